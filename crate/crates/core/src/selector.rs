//! Distinctive description selection.
//!
//! For every candidate class `a` of an image, each pool description `d` gets
//! a distinctiveness score built from the differences `S[a][d] - S[r][d]`
//! against the other candidates `r`. The `m` best strictly positive
//! descriptions become the classname-free representation of `a` inside that
//! image's neighborhood.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neighborhood::CandidateSet;
use crate::rng::Prng;
use crate::similarity::LookupMatrix;
use crate::store::DescriptionPool;

/// How the positive part of the rival differences is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PositivityMode {
    /// Mean over rivals of `max(0, diff)`.
    #[default]
    Clamp,
    /// Mean over rivals of `diff`, but zero unless every diff is positive.
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub m: usize,
    pub mode: PositivityMode,
    pub k: usize,
    pub n: usize,
    pub seed: u64,
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidConfig("m must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSelection {
    pub class: u32,
    /// Pool ids by descending score, ties by ascending id.
    pub descriptions: Vec<u32>,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageAssignment {
    pub image: usize,
    /// One entry per candidate, in candidate order.
    pub per_candidate: Vec<CandidateSelection>,
}

impl ImageAssignment {
    /// Selected descriptions for `class`; empty when it is not a candidate.
    pub fn descriptions_for(&self, class: u32) -> &[u32] {
        self.per_candidate.iter().find(|s| s.class == class).map(|s| s.descriptions.as_slice()).unwrap_or(&[])
    }
}

/// Class-level description lists, `lists[c]` being `D(c)` without the
/// classname element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassAssignment {
    pub lists: Vec<Vec<u32>>,
}

impl ClassAssignment {
    pub fn get(&self, class: u32) -> &[u32] {
        self.lists.get(class as usize).map(Vec::as_slice).unwrap_or(&[])
    }
}

fn check_candidate(candidates: &CandidateSet, class: u32) -> Result<()> {
    if !candidates.contains(class) {
        return Err(Error::NotACandidate { class });
    }
    if candidates.len() < 2 {
        return Err(Error::KTooSmall { k: candidates.len() });
    }
    Ok(())
}

/// Distinctiveness of every pool description for candidate `class`.
pub fn distinctiveness(
    lookup: &LookupMatrix,
    candidates: &CandidateSet,
    class: u32,
    mode: PositivityMode,
) -> Result<Vec<f64>> {
    check_candidate(candidates, class)?;
    let own = lookup.row(class as usize);
    let rivals: Vec<&[f32]> =
        candidates.classes.iter().filter(|&&c| c != class).map(|&c| lookup.row(c as usize)).collect();
    let count = rivals.len() as f64;
    let scores = (0..lookup.pool)
        .map(|d| {
            let target = f64::from(own[d]);
            let mut sum = 0.0;
            let mut all_positive = true;
            for rival in &rivals {
                let diff = target - f64::from(rival[d]);
                match mode {
                    PositivityMode::Clamp => sum += diff.max(0.0),
                    PositivityMode::Strict => {
                        all_positive &= diff > 0.0;
                        sum += diff;
                    }
                }
            }
            if mode == PositivityMode::Strict && !all_positive {
                0.0
            } else {
                sum / count
            }
        })
        .collect();
    Ok(scores)
}

/// Strictly positive `(pool id, score)` pairs, best first, ties by id.
fn ranked_positive(scores: &[f64]) -> Vec<(u32, f64)> {
    let mut ranked: Vec<(u32, f64)> =
        scores.iter().enumerate().filter(|(_, &s)| s > 0.0).map(|(d, &s)| (d as u32, s)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked
}

/// Up to `m` strictly positive descriptions per candidate. Candidates with
/// fewer qualifying descriptions get shorter, possibly empty, lists.
pub fn select(lookup: &LookupMatrix, candidates: &CandidateSet, cfg: &SelectionConfig) -> Result<ImageAssignment> {
    cfg.validate()?;
    let mut per_candidate = Vec::with_capacity(candidates.len());
    for &class in &candidates.classes {
        let scores = distinctiveness(lookup, candidates, class, cfg.mode)?;
        let mut ranked = ranked_positive(&scores);
        ranked.truncate(cfg.m);
        let (descriptions, scores) = ranked.into_iter().unzip();
        per_candidate.push(CandidateSelection { class, descriptions, scores });
    }
    Ok(ImageAssignment { image: candidates.image, per_candidate })
}

pub fn select_batch(
    lookup: &LookupMatrix,
    candidate_sets: &[CandidateSet],
    cfg: &SelectionConfig,
) -> Result<Vec<ImageAssignment>> {
    candidate_sets.iter().map(|c| select(lookup, c, cfg)).collect()
}

/// Clamp-mode positive scores for one candidate, best first.
pub fn dump_distinctiveness(lookup: &LookupMatrix, candidates: &CandidateSet, class: u32) -> Result<Vec<(u32, f64)>> {
    let scores = distinctiveness(lookup, candidates, class, PositivityMode::Clamp)?;
    Ok(ranked_positive(&scores))
}

/// Descriptions generated for each class, in pool order, capped at `cap`.
pub fn assign_llm(pool: &DescriptionPool, classes: usize, cap: usize) -> Result<ClassAssignment> {
    let origin = pool.origin_class.as_ref().ok_or(Error::MissingOrigin)?;
    let mut lists = alloc::vec![Vec::new(); classes];
    for (d, &c) in origin.iter().enumerate() {
        let list = lists
            .get_mut(c as usize)
            .ok_or(Error::InvalidConfig(alloc::format!("description {d} has origin class {c} outside 0..{classes}")))?;
        if list.len() < cap {
            list.push(d as u32);
        }
    }
    Ok(ClassAssignment { lists })
}

/// `per_class` distinct pool ids per class, drawn independently for each
/// class from one [`Prng`] stream (classes in ascending order).
pub fn assign_random(pool_len: usize, per_class: usize, seed: u64, classes: usize) -> Result<ClassAssignment> {
    if per_class > pool_len {
        return Err(Error::PoolTooSmall { requested: per_class, available: pool_len });
    }
    let mut rng = Prng::new(seed);
    let lists = (0..classes)
        .map(|_| {
            let mut ids: Vec<u32> = (0..pool_len as u32).collect();
            rng.partial_shuffle(&mut ids, per_class);
            ids.truncate(per_class);
            ids
        })
        .collect();
    Ok(ClassAssignment { lists })
}
