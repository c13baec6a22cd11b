//! On-disk embedding store.
//!
//! A store is a directory:
//!
//! | file | content |
//! |------|---------|
//! | `manifest.json` | schema version, dataset name, dim, counts, dtype `"f32le"`, normalized flag, prompt template, optional pair template |
//! | `classnames.json` | array of class names |
//! | `pool.json` | `{"texts": [...], "origin_class": [...] | null}` |
//! | `cls_emb.f32` | classname prompt embeddings |
//! | `pool_emb.f32` | description embeddings |
//! | `images.f32` | image embeddings |
//! | `labels.u32le` | one `u32` per image |
//! | `split.u8` | one byte per image, 0 = train, 1 = test |
//! | `pairs.idx`, `pairs_emb.f32` | optional; `(class u32, pool u32)` keys aligned with pair rows |
//!
//! Matrices are row-major little-endian `f32` with no header or padding.

use std::fs;
use std::path::{Path, PathBuf};

use descsel_core::{DatasetStore, DescriptionPool, EmbeddingMatrix, PairEmbeddingTable, Split};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const DTYPE: &str = "f32le";
pub const DEFAULT_PAIR_TEMPLATE: &str = "{cls}, which has {desc}";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub classes: usize,
    pub pool: usize,
    pub images: usize,
    #[serde(default)]
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub dataset: String,
    pub dim: usize,
    pub counts: Counts,
    pub dtype: String,
    pub normalized: bool,
    pub prompt_template: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_template: Option<String>,
    #[serde(default)]
    pub synthetic_pairs: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PoolFile {
    texts: Vec<String>,
    #[serde(default)]
    origin_class: Option<Vec<u32>>,
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|source| Error::Json { path: path.to_path_buf(), source })
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|source| Error::Json { path: path.to_path_buf(), source })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_exact_len(path: &Path, len: usize) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != len {
        return Err(Error::format(
            path,
            format!("expected {len} bytes from the manifest counts, found {}", bytes.len()),
        ));
    }
    Ok(bytes)
}

pub fn read_f32_matrix(path: &Path, rows: usize, dim: usize) -> Result<EmbeddingMatrix> {
    let bytes = read_exact_len(path, rows * dim * 4)?;
    let data = bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
    Ok(EmbeddingMatrix::new(rows, dim, data)?)
}

pub fn f32_bytes(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|x| x.to_le_bytes()).collect()
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_u32s(path: &Path, count: usize) -> Result<Vec<u32>> {
    let bytes = read_exact_len(path, count * 4)?;
    Ok(bytes.chunks_exact(4).map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect())
}

fn u32_bytes(values: impl IntoIterator<Item = u32>) -> Vec<u8> {
    values.into_iter().flat_map(u32::to_le_bytes).collect()
}

pub fn manifest_of(store: &DatasetStore) -> Manifest {
    Manifest {
        schema_version: SCHEMA_VERSION,
        dataset: store.name.clone(),
        dim: store.dim(),
        counts: Counts {
            classes: store.num_classes(),
            pool: store.pool.len(),
            images: store.images.rows(),
            pairs: store.pairs.as_ref().map_or(0, PairEmbeddingTable::len),
        },
        dtype: DTYPE.to_string(),
        normalized: store.normalized,
        prompt_template: store.prompt_template.clone(),
        pair_template: store.pairs.as_ref().map(|p| p.template.clone()),
        synthetic_pairs: store.pairs.as_ref().is_some_and(|p| p.synthetic),
    }
}

/// Reads and fully validates a store directory.
pub fn load_store(dir: &Path) -> Result<DatasetStore> {
    let manifest: Manifest = read_json(&dir.join("manifest.json"))?;
    let manifest_path = dir.join("manifest.json");
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(Error::format(&manifest_path, format!("unsupported schema_version {}", manifest.schema_version)));
    }
    if manifest.dtype != DTYPE {
        return Err(Error::format(&manifest_path, format!("unsupported dtype {:?}", manifest.dtype)));
    }
    let Counts { classes, pool, images, pairs } = manifest.counts;
    let dim = manifest.dim;

    let classnames: Vec<String> = read_json(&dir.join("classnames.json"))?;
    let pool_file: PoolFile = read_json(&dir.join("pool.json"))?;
    if classnames.len() != classes {
        return Err(Error::format(
            dir.join("classnames.json"),
            format!("manifest lists {classes} classes, file has {}", classnames.len()),
        ));
    }
    if pool_file.texts.len() != pool {
        return Err(Error::format(
            dir.join("pool.json"),
            format!("manifest lists {pool} descriptions, file has {}", pool_file.texts.len()),
        ));
    }

    let cls_prompts = read_f32_matrix(&dir.join("cls_emb.f32"), classes, dim)?;
    let pool_embeddings = read_f32_matrix(&dir.join("pool_emb.f32"), pool, dim)?;
    let image_matrix = read_f32_matrix(&dir.join("images.f32"), images, dim)?;
    let labels = read_u32s(&dir.join("labels.u32le"), images)?;
    let split_path = dir.join("split.u8");
    let split = read_exact_len(&split_path, images)?
        .into_iter()
        .map(|b| Split::from_byte(b).ok_or_else(|| Error::format(&split_path, format!("invalid split tag {b}"))))
        .collect::<Result<Vec<_>>>()?;

    let idx_path = dir.join("pairs.idx");
    let pair_table = if pairs > 0 || idx_path.exists() {
        let raw = read_u32s(&idx_path, pairs * 2)?;
        let keys = raw.chunks_exact(2).map(|k| (k[0], k[1])).collect();
        let emb = read_f32_matrix(&dir.join("pairs_emb.f32"), pairs, dim)?;
        let template = manifest.pair_template.clone().unwrap_or_else(|| DEFAULT_PAIR_TEMPLATE.to_string());
        Some(PairEmbeddingTable::new(template, manifest.synthetic_pairs, keys, emb)?)
    } else {
        None
    };

    let store = DatasetStore {
        name: manifest.dataset,
        prompt_template: manifest.prompt_template,
        normalized: manifest.normalized,
        classnames,
        cls_prompts,
        pool: DescriptionPool {
            texts: pool_file.texts,
            embeddings: pool_embeddings,
            origin_class: pool_file.origin_class,
        },
        images: image_matrix,
        labels,
        split,
        pairs: pair_table,
    };
    store.validate()?;
    Ok(store)
}

/// Writes a store directory, creating it if needed.
pub fn save_store(store: &DatasetStore, dir: &Path) -> Result<()> {
    store.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_json(&dir.join("manifest.json"), &manifest_of(store))?;
    write_json(&dir.join("classnames.json"), &store.classnames)?;
    write_json(
        &dir.join("pool.json"),
        &PoolFile { texts: store.pool.texts.clone(), origin_class: store.pool.origin_class.clone() },
    )?;
    write_bytes(&dir.join("cls_emb.f32"), &f32_bytes(store.cls_prompts.as_slice()))?;
    write_bytes(&dir.join("pool_emb.f32"), &f32_bytes(store.pool.embeddings.as_slice()))?;
    write_bytes(&dir.join("images.f32"), &f32_bytes(store.images.as_slice()))?;
    write_bytes(&dir.join("labels.u32le"), &u32_bytes(store.labels.iter().copied()))?;
    let split: Vec<u8> = store.split.iter().map(|&s| s as u8).collect();
    write_bytes(&dir.join("split.u8"), &split)?;
    let idx = dir.join("pairs.idx");
    let emb = dir.join("pairs_emb.f32");
    match &store.pairs {
        Some(p) => {
            write_bytes(&idx, &u32_bytes(p.keys().iter().flat_map(|&(c, d)| [c, d])))?;
            write_bytes(&emb, &f32_bytes(p.embeddings().as_slice()))?;
        }
        None => {
            for stale in [&idx, &emb] {
                if stale.exists() {
                    fs::remove_file(stale).map_err(|e| Error::io(stale, e))?;
                }
            }
        }
    }
    Ok(())
}

pub fn store_path(dir: &Path, file: &str) -> PathBuf {
    dir.join(file)
}
