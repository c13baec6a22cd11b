//! Lookup matrix cache: `lookup.f32` (row-major `classes x pool` f32le) and
//! `lookup.json` with the probe parameters and content digests.

use std::fs;
use std::path::Path;

use descsel_core::rng::PRNG_VERSION;
use descsel_core::{DatasetStore, LookupMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::storefs::{f32_bytes, read_json, write_bytes, write_json};

pub const LOOKUP_BIN: &str = "lookup.f32";
pub const LOOKUP_META: &str = "lookup.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookupMeta {
    pub classes: usize,
    pub pool: usize,
    pub n: usize,
    pub seed: u64,
    pub store_hash: String,
    pub pool_hash: String,
    pub prng_version: u32,
}

pub fn save_lookup(dir: &Path, lookup: &LookupMatrix) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_bytes(&dir.join(LOOKUP_BIN), &f32_bytes(&lookup.values))?;
    write_json(
        &dir.join(LOOKUP_META),
        &LookupMeta {
            classes: lookup.classes,
            pool: lookup.pool,
            n: lookup.n,
            seed: lookup.seed,
            store_hash: hex::encode(lookup.store_hash),
            pool_hash: hex::encode(lookup.pool_hash),
            prng_version: PRNG_VERSION,
        },
    )
}

fn digest(path: &Path, s: &str) -> Result<[u8; 32]> {
    let mut out = [0u8; 32];
    hex::decode_to_slice(s, &mut out).map_err(|e| Error::format(path, format!("bad digest: {e}")))?;
    Ok(out)
}

pub fn load_lookup(dir: &Path) -> Result<LookupMatrix> {
    let meta_path = dir.join(LOOKUP_META);
    let meta: LookupMeta = read_json(&meta_path)?;
    if meta.prng_version != PRNG_VERSION {
        return Err(Error::format(&meta_path, format!("prng_version {} is not {PRNG_VERSION}", meta.prng_version)));
    }
    let m = crate::storefs::read_f32_matrix(&dir.join(LOOKUP_BIN), meta.classes, meta.pool)?;
    let mut lookup = LookupMatrix::from_values(meta.classes, meta.pool, m.into_vec())?;
    lookup.n = meta.n;
    lookup.seed = meta.seed;
    lookup.store_hash = digest(&meta_path, &meta.store_hash)?;
    lookup.pool_hash = digest(&meta_path, &meta.pool_hash)?;
    Ok(lookup)
}

/// Loads a cached matrix if one exists and was built from this store with
/// `(n, seed)`; `Ok(None)` on a miss or a stale cache.
pub fn load_matching(dir: &Path, store: &DatasetStore, n: usize, seed: u64) -> Result<Option<LookupMatrix>> {
    if !dir.join(LOOKUP_META).exists() {
        return Ok(None);
    }
    let lookup = load_lookup(dir)?;
    Ok(lookup.matches(store, n, seed).then_some(lookup))
}
