//! Cosine similarity and the classwise lookup matrix `S`.
//!
//! `S[c][p]` is the mean cosine between the probe images of class `c` and
//! pool description `p`. Sums run over probes in probe order, in `f64`, and
//! are cast to `f32` at the end, so every cell is reproducible on its own.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::matrix::{dot, l2_norm, EmbeddingMatrix};
use crate::probe::ProbeSet;
use crate::store::DatasetStore;

pub fn cosine(u: &[f32], v: &[f32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimMismatch { expected: u.len(), found: v.len() });
    }
    let nu = l2_norm(u);
    let nv = l2_norm(v);
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(dot(u, v) / (nu * nv))
}

/// Dense `rows x cols` matrix of `f64` scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl ScoreMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

fn inverse_norms(m: &EmbeddingMatrix) -> Result<Vec<f64>> {
    m.iter_rows()
        .map(|r| {
            let n = l2_norm(r);
            if n == 0.0 {
                Err(Error::ZeroVector)
            } else {
                Ok(1.0 / n)
            }
        })
        .collect()
}

/// All pairwise cosines between the rows of `a` and the rows of `b`.
pub fn sim_matrix(a: &EmbeddingMatrix, b: &EmbeddingMatrix) -> Result<ScoreMatrix> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch { expected: a.dim(), found: b.dim() });
    }
    let ia = inverse_norms(a)?;
    let ib = inverse_norms(b)?;
    let mut data = Vec::with_capacity(a.rows() * b.rows());
    for (u, nu) in a.iter_rows().zip(&ia) {
        for (v, nv) in b.iter_rows().zip(&ib) {
            data.push(dot(u, v) * nu * nv);
        }
    }
    Ok(ScoreMatrix { rows: a.rows(), cols: b.rows(), data })
}

/// Cosines of one vector against every row of `m`.
pub fn cosines_against(v: &[f32], m: &EmbeddingMatrix) -> Result<Vec<f64>> {
    if v.len() != m.dim() {
        return Err(Error::DimMismatch { expected: m.dim(), found: v.len() });
    }
    m.iter_rows().map(|row| cosine(v, row)).collect()
}

/// Classwise mean image-description similarities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookupMatrix {
    pub classes: usize,
    pub pool: usize,
    /// Row-major `classes x pool`.
    pub values: Vec<f32>,
    pub n: usize,
    pub seed: u64,
    pub store_hash: [u8; 32],
    pub pool_hash: [u8; 32],
}

impl LookupMatrix {
    /// Wraps raw values; hashes are zeroed since no store backs them.
    pub fn from_values(classes: usize, pool: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != classes * pool {
            return Err(Error::Shape { rows: classes, dim: pool, len: values.len() });
        }
        Ok(Self { classes, pool, values, n: 0, seed: 0, store_hash: [0; 32], pool_hash: [0; 32] })
    }

    pub fn get(&self, class: usize, pool_id: usize) -> f32 {
        self.values[class * self.pool + pool_id]
    }

    pub fn row(&self, class: usize) -> &[f32] {
        &self.values[class * self.pool..(class + 1) * self.pool]
    }

    /// True when this matrix was built from exactly this store content with
    /// the given probe parameters.
    pub fn matches(&self, store: &DatasetStore, n: usize, seed: u64) -> bool {
        self.n == n
            && self.seed == seed
            && self.classes == store.num_classes()
            && self.pool == store.pool.len()
            && self.store_hash == store_digest(store)
            && self.pool_hash == pool_digest(store)
    }
}

/// One row of `S`: mean cosine of class `class` probes to every pool entry.
pub fn lookup_row(store: &DatasetStore, probes: &ProbeSet, class: usize) -> Result<Vec<f32>> {
    let pool = &store.pool.embeddings;
    let indices = &probes.per_class[class];
    let mut acc = alloc::vec![0.0f64; pool.rows()];
    for &i in indices {
        let cos = cosines_against(store.images.row(i), pool)?;
        for (a, c) in acc.iter_mut().zip(cos) {
            *a += c;
        }
    }
    let n = indices.len() as f64;
    Ok(acc.into_iter().map(|a| (a / n) as f32).collect())
}

/// Builds `S` sequentially, class by class.
pub fn build_lookup(store: &DatasetStore, probes: &ProbeSet) -> Result<LookupMatrix> {
    probes.validate(store)?;
    let mut rows = Vec::with_capacity(store.num_classes());
    for class in 0..store.num_classes() {
        rows.push(lookup_row(store, probes, class)?);
    }
    Ok(assemble_lookup(store, probes, rows))
}

/// Stitches independently computed rows into a [`LookupMatrix`].
pub fn assemble_lookup(store: &DatasetStore, probes: &ProbeSet, rows: Vec<Vec<f32>>) -> LookupMatrix {
    LookupMatrix {
        classes: store.num_classes(),
        pool: store.pool.len(),
        values: rows.into_iter().flatten().collect(),
        n: probes.n,
        seed: probes.seed,
        store_hash: store_digest(store),
        pool_hash: pool_digest(store),
    }
}

fn hash_floats(h: &mut Sha256, m: &EmbeddingMatrix) {
    h.update((m.rows() as u64).to_le_bytes());
    h.update((m.dim() as u64).to_le_bytes());
    for x in m.as_slice() {
        h.update(x.to_le_bytes());
    }
}

/// SHA-256 over everything `S` depends on besides the pool: image
/// embeddings, labels and split tags.
pub fn store_digest(store: &DatasetStore) -> [u8; 32] {
    let mut h = Sha256::new();
    hash_floats(&mut h, &store.images);
    for l in &store.labels {
        h.update(l.to_le_bytes());
    }
    for s in &store.split {
        h.update([*s as u8]);
    }
    h.finalize().into()
}

/// SHA-256 over the pool embeddings.
pub fn pool_digest(store: &DatasetStore) -> [u8; 32] {
    let mut h = Sha256::new();
    hash_floats(&mut h, &store.pool.embeddings);
    h.finalize().into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probe::sample_probe_set;
    use crate::store::fixtures::tiny_store;
    use crate::store::Split;
    use alloc::vec;

    #[test]
    fn cosine_examples() {
        let u = [0.6f32, 0.8];
        assert!((cosine(&u, &u).unwrap() - 1.0).abs() < 1e-7);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine(&u, &[1.0, 0.0]).unwrap() - 0.6).abs() < 1e-7);
        assert_eq!(cosine(&u, &[1.0]), Err(Error::DimMismatch { expected: 2, found: 1 }));
        assert_eq!(cosine(&u, &[0.0, 0.0]), Err(Error::ZeroVector));
    }

    #[test]
    fn sim_matrix_of_orthonormal_rows_is_identity() {
        let m = EmbeddingMatrix::new(3, 3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let s = sim_matrix(&m, &m).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(s.get(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn sim_matrix_single_pair_is_cosine() {
        let a = EmbeddingMatrix::new(1, 2, vec![0.6, 0.8]).unwrap();
        let b = EmbeddingMatrix::new(1, 2, vec![1.0, 0.0]).unwrap();
        let s = sim_matrix(&a, &b).unwrap();
        assert_eq!((s.rows, s.cols), (1, 1));
        assert!((s.get(0, 0) - cosine(a.row(0), b.row(0)).unwrap()).abs() < 1e-12);
        let c = EmbeddingMatrix::new(1, 3, vec![1.0, 0.0, 0.0]).unwrap();
        assert!(sim_matrix(&a, &c).is_err());
    }

    #[test]
    fn single_probe_lookup_equals_sim_matrix() {
        let s = tiny_store();
        let probes = sample_probe_set(&s, 1, 0).unwrap();
        let l = build_lookup(&s, &probes).unwrap();
        assert_eq!((l.classes, l.pool), (2, 2));
        let probe_rows = s.images.select_rows(&[probes.per_class[0][0], probes.per_class[1][0]]);
        let direct = sim_matrix(&probe_rows, &s.pool.embeddings).unwrap();
        for c in 0..2 {
            for p in 0..2 {
                assert!((f64::from(l.get(c, p)) - direct.get(c, p)).abs() < 1e-6);
            }
        }
        assert!(l.matches(&s, 1, 0));
        assert!(!l.matches(&s, 1, 1));
    }

    #[test]
    fn two_probe_mean() {
        // class 0 probes have cosines 0.2 and 0.6 to description (1, 0)
        let mut s = tiny_store();
        let mut data = vec![0.2f32, libm::sqrtf(1.0 - 0.04), 0.6, 0.8];
        data.extend_from_slice(&[0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
        s.images = EmbeddingMatrix::new(6, 2, data).unwrap();
        s.labels = vec![0, 0, 1, 1, 0, 1];
        s.split = vec![Split::Train, Split::Train, Split::Train, Split::Train, Split::Test, Split::Test];
        s.pool.embeddings = EmbeddingMatrix::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let probes = sample_probe_set(&s, 2, 0).unwrap();
        let l = build_lookup(&s, &probes).unwrap();
        assert!((l.get(0, 0) - 0.4).abs() < 1e-6);
        assert!((l.get(1, 1) - 1.0).abs() < 1e-6);

        let dup = ProbeSet { per_class: vec![vec![0, 0], vec![2, 3]], n: 2, seed: 0 };
        assert!(build_lookup(&s, &dup).is_err());
    }

    #[test]
    fn digests_track_content() {
        let s = tiny_store();
        let mut t = s.clone();
        assert_eq!(store_digest(&s), store_digest(&t));
        t.labels.swap(0, 1);
        assert_ne!(store_digest(&s), store_digest(&t));
        assert_eq!(pool_digest(&s), pool_digest(&t));
    }
}
