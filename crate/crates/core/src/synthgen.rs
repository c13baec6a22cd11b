//! Synthetic stores with planted distinctive descriptions.
//!
//! Geometry, with an orthonormal coordinate basis:
//!
//! * class axes `u_c` (coordinates `0..C`) and planted attribute axes
//!   `f_{c,j}` (coordinates `C + c*g + j`); remaining coordinates form a
//!   background subspace.
//! * prototype `p_c = normalize(u_c + ATTRIBUTE_WEIGHT * sum_j f_{c,j})`.
//! * images `normalize(p_c + (sigma / sqrt(dim)) * z)` with `z ~ N(0, I)`,
//!   so `sigma` is the expected norm of the noise and the per-image cosine
//!   noise has standard deviation about `sigma / sqrt(dim)`.
//! * classname prompts sit on a ring of confusable classes:
//!   `normalize((1 + specificity) u_c + u_{c-1} + u_{c+1})`. The true class
//!   is always in the prompt top-3 but prompts alone separate neighbors only
//!   weakly.
//! * planted descriptions `normalize(f_{c,j} + 0.25 b)` for a random
//!   background unit vector `b`; their cosine to class `c` images exceeds
//!   the cosine to any other class by about `0.35`, far above
//!   `2 sigma / sqrt(dim)`.
//! * a fraction `overlap` of the remaining pool is ambiguous:
//!   `normalize(0.6 s + b)` where `s` is the normalized sum of the class
//!   axes of a window of 2 or 3 consecutive ring classes. The rest is pure
//!   background.
//! * pair rows are `normalize(cls_prompt_c + description_p)` for every
//!   `(c, p)`, flagged as synthetic.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{normalize_in_place, EmbeddingMatrix};
use crate::rng::Prng;
use crate::selector::ClassAssignment;
use crate::store::{DatasetStore, DescriptionPool, PairEmbeddingTable, Split};

const ATTRIBUTE_WEIGHT: f64 = 0.5;
const PLANTED_BACKGROUND: f64 = 0.25;
const DISTRACTOR_CLASS_WEIGHT: f64 = 0.6;

pub const SYNTH_PAIR_TEMPLATE: &str = "{cls}, which has {desc}";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub classes: usize,
    pub dim: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub pool: usize,
    /// Planted descriptions per class.
    pub planted: usize,
    pub sigma: f64,
    /// Fraction of non-planted descriptions that overlap several classes.
    pub overlap: f64,
    /// Extra weight of a class's own axis in its classname prompt.
    pub prompt_specificity: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            classes: 10,
            dim: 128,
            train_per_class: 20,
            test_per_class: 100,
            pool: 100,
            planted: 3,
            sigma: 0.3,
            overlap: 0.5,
            prompt_specificity: 0.05,
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InfeasibleSpec(msg));
        if self.classes < 2 {
            return fail("at least 2 classes are required".into());
        }
        if self.planted * self.classes > self.pool {
            return fail(format!(
                "{} planted descriptions for {} classes exceed the pool of {}",
                self.planted, self.classes, self.pool
            ));
        }
        let needed = self.classes + self.planted * self.classes;
        if self.dim < needed {
            return fail(format!("dim {} is below the {needed} orthogonal axes needed", self.dim));
        }
        if self.train_per_class == 0 || self.test_per_class == 0 {
            return fail("every class needs train and test images".into());
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return fail("sigma must be finite and nonnegative".into());
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            return fail("overlap must lie in [0, 1]".into());
        }
        if !(self.prompt_specificity > 0.0 && self.prompt_specificity.is_finite()) {
            return fail("prompt specificity must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub store: DatasetStore,
    /// Planted pool ids per class.
    pub ground_truth: ClassAssignment,
}

struct Basis {
    dim: usize,
    classes: usize,
    planted: usize,
}

impl Basis {
    fn class_axis(&self, c: usize) -> usize {
        c
    }

    fn attribute_axis(&self, c: usize, j: usize) -> usize {
        self.classes + c * self.planted + j
    }

    fn background(&self) -> core::ops::Range<usize> {
        self.classes + self.classes * self.planted..self.dim
    }

    fn prototype(&self, c: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        v[self.class_axis(c)] = 1.0;
        for j in 0..self.planted {
            v[self.attribute_axis(c, j)] = ATTRIBUTE_WEIGHT;
        }
        normalize_in_place(&mut v);
        v
    }

    /// Unit vector in the background subspace, or zero when there is none.
    fn background_vector(&self, rng: &mut Prng) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for i in self.background() {
            v[i] = rng.normal();
        }
        normalize_in_place(&mut v);
        v
    }
}

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

fn ring(c: isize, classes: usize) -> usize {
    c.rem_euclid(classes as isize) as usize
}

/// Builds a store and its planted ground truth; deterministic per seed.
pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let mut rng = Prng::new(spec.seed);
    let classes = spec.classes;
    let dim = spec.dim;
    let basis = Basis { dim, classes, planted: spec.planted };

    let prototypes: Vec<Vec<f64>> = (0..classes).map(|c| basis.prototype(c)).collect();

    let mut prompt_data = Vec::with_capacity(classes * dim);
    for c in 0..classes {
        let mut v = vec![0.0; dim];
        v[basis.class_axis(c)] += 1.0 + spec.prompt_specificity;
        let left = ring(c as isize - 1, classes);
        let right = ring(c as isize + 1, classes);
        v[basis.class_axis(left)] += 1.0;
        if right != left {
            v[basis.class_axis(right)] += 1.0;
        }
        normalize_in_place(&mut v);
        prompt_data.extend(to_f32(&v));
    }

    // pool: planted first, then ambiguous, then background; shuffled below
    let mut rows: Vec<(Vec<f64>, Option<usize>, u32)> = Vec::with_capacity(spec.pool);
    for c in 0..classes {
        for j in 0..spec.planted {
            let mut v = basis.background_vector(&mut rng);
            v.iter_mut().for_each(|x| *x *= PLANTED_BACKGROUND);
            v[basis.attribute_axis(c, j)] += 1.0;
            normalize_in_place(&mut v);
            rows.push((v, Some(c), c as u32));
        }
    }
    let rest = spec.pool - rows.len();
    let ambiguous = libm::round(spec.overlap * rest as f64) as usize;
    for i in 0..rest {
        let mut v = basis.background_vector(&mut rng);
        let origin = if i < ambiguous {
            let start = rng.below(classes as u64) as usize;
            let width = (2 + rng.below(2) as usize).min(classes);
            let w = DISTRACTOR_CLASS_WEIGHT / libm::sqrt(width as f64);
            for offset in 0..width {
                v[basis.class_axis(ring((start + offset) as isize, classes))] += w;
            }
            start as u32
        } else {
            rng.below(classes as u64) as u32
        };
        if v.iter().all(|&x| x == 0.0) {
            // no background subspace and no class component
            v[basis.class_axis(origin as usize)] = 1.0;
        }
        normalize_in_place(&mut v);
        rows.push((v, None, origin));
    }
    let mut order: Vec<usize> = (0..rows.len()).collect();
    rng.shuffle(&mut order);

    let mut planted_lists = vec![Vec::new(); classes];
    let mut texts = Vec::with_capacity(spec.pool);
    let mut origin_class = Vec::with_capacity(spec.pool);
    let mut pool_data = Vec::with_capacity(spec.pool * dim);
    for (pool_id, &r) in order.iter().enumerate() {
        let (v, planted_for, origin) = &rows[r];
        if let Some(c) = planted_for {
            planted_lists[*c].push(pool_id as u32);
        }
        texts.push(format!("description {pool_id}"));
        origin_class.push(*origin);
        pool_data.extend(to_f32(v));
    }

    let mut image_data = Vec::new();
    let mut labels = Vec::new();
    let mut split = Vec::new();
    let noise_scale = spec.sigma / libm::sqrt(dim as f64);
    for (c, proto) in prototypes.iter().enumerate() {
        for i in 0..spec.train_per_class + spec.test_per_class {
            let mut v: Vec<f64> = proto.iter().map(|&p| p + noise_scale * rng.normal()).collect();
            normalize_in_place(&mut v);
            image_data.extend(to_f32(&v));
            labels.push(c as u32);
            split.push(if i < spec.train_per_class { Split::Train } else { Split::Test });
        }
    }

    let cls_prompts = EmbeddingMatrix::new(classes, dim, prompt_data)?;
    let pool_embeddings = EmbeddingMatrix::new(spec.pool, dim, pool_data)?;
    let mut keys = Vec::with_capacity(classes * spec.pool);
    let mut pair_data = Vec::with_capacity(classes * spec.pool * dim);
    for c in 0..classes {
        for p in 0..spec.pool {
            let mut v: Vec<f64> = cls_prompts
                .row(c)
                .iter()
                .zip(pool_embeddings.row(p))
                .map(|(&a, &b)| f64::from(a) + f64::from(b))
                .collect();
            normalize_in_place(&mut v);
            keys.push((c as u32, p as u32));
            pair_data.extend(to_f32(&v));
        }
    }
    let pairs = PairEmbeddingTable::new(
        SYNTH_PAIR_TEMPLATE.to_string(),
        true,
        keys,
        EmbeddingMatrix::new(classes * spec.pool, dim, pair_data)?,
    )?;

    let store = DatasetStore {
        name: format!("synth-c{}-d{}-s{}", classes, dim, spec.seed),
        prompt_template: "a photo of a {cls}".to_string(),
        normalized: true,
        classnames: (0..classes).map(|c| format!("class_{c:02}")).collect(),
        cls_prompts,
        pool: DescriptionPool { texts, embeddings: pool_embeddings, origin_class: Some(origin_class) },
        images: EmbeddingMatrix::new(labels.len(), dim, image_data)?,
        labels,
        split,
        pairs: Some(pairs),
    };
    store.validate()?;
    Ok(SynthOutput { store, ground_truth: ClassAssignment { lists: planted_lists } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::similarity::cosine;

    fn small() -> SynthSpec {
        SynthSpec {
            classes: 4,
            dim: 24,
            train_per_class: 3,
            test_per_class: 2,
            pool: 20,
            planted: 2,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn deterministic_and_valid() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a, b);
        a.store.validate().unwrap();
        assert_eq!(a.store.images.rows(), 4 * 5);
        assert!(a.ground_truth.lists.iter().all(|l| l.len() == 2));
        let c = generate(&SynthSpec { seed: 8, ..small() }).unwrap();
        assert_ne!(a.store.images, c.store.images);
    }

    #[test]
    fn infeasible_specs() {
        for spec in [
            SynthSpec { classes: 1, ..small() },
            SynthSpec { pool: 7, ..small() },
            SynthSpec { dim: 11, ..small() },
            SynthSpec { sigma: -1.0, ..small() },
            SynthSpec { overlap: 1.5, ..small() },
            SynthSpec { test_per_class: 0, ..small() },
        ] {
            assert!(matches!(generate(&spec), Err(Error::InfeasibleSpec(_))), "{spec:?}");
        }
    }

    #[test]
    fn noiseless_images_equal_prototypes_and_prompts_rank_them_first() {
        let out = generate(&SynthSpec { sigma: 0.0, ..small() }).unwrap();
        let s = &out.store;
        for i in 0..s.images.rows() {
            let c = s.labels[i] as usize;
            let scores = crate::similarity::cosines_against(s.images.row(i), &s.cls_prompts).unwrap();
            let best = crate::neighborhood::rank_classes(&scores)[0];
            assert_eq!(best as usize, c);
            if i > 0 && s.labels[i - 1] as usize == c {
                assert_eq!(s.images.row(i), s.images.row(i - 1));
            }
        }
    }

    #[test]
    fn planted_descriptions_prefer_their_class() {
        let out = generate(&small()).unwrap();
        let s = &out.store;
        let protos: Vec<Vec<f32>> =
            (0..4).map(|c| to_f32(&Basis { dim: 24, classes: 4, planted: 2 }.prototype(c))).collect();
        for (c, list) in out.ground_truth.lists.iter().enumerate() {
            for &d in list {
                let desc = s.pool.embeddings.row(d as usize);
                let own = cosine(&protos[c], desc).unwrap();
                for (o, p) in protos.iter().enumerate() {
                    if o != c {
                        assert!(own - cosine(p, desc).unwrap() > 0.3);
                    }
                }
            }
        }
    }

    #[test]
    fn pair_table_is_dense_and_synthetic() {
        let out = generate(&small()).unwrap();
        let pairs = out.store.pairs.as_ref().unwrap();
        assert!(pairs.synthetic);
        assert_eq!(pairs.len(), 4 * 20);
        assert!(pairs.get(3, 19).is_some());
    }
}
