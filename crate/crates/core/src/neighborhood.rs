//! Top-k candidate classes per image from classname prompts alone.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::EmbeddingMatrix;
use crate::similarity::cosines_against;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub image: usize,
    /// Class ids by descending prompt similarity, ties by ascending id.
    pub classes: Vec<u32>,
    pub scores: Vec<f64>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn contains(&self, class: u32) -> bool {
        self.classes.contains(&class)
    }

    pub fn top(&self) -> u32 {
        self.classes[0]
    }
}

/// `k` clamped to the number of classes. Callers that want to warn about
/// clamping compare the result against their request.
pub fn effective_k(k: usize, classes: usize) -> Result<usize> {
    if k < 2 {
        return Err(Error::KTooSmall { k });
    }
    let k = k.min(classes);
    if k < 2 {
        return Err(Error::KTooSmall { k });
    }
    Ok(k)
}

/// Every class ordered by descending score, ties by ascending class id.
pub fn rank_classes(scores: &[f64]) -> Vec<u32> {
    let mut order: Vec<u32> = (0..scores.len() as u32).collect();
    order.sort_by(|&a, &b| scores[b as usize].total_cmp(&scores[a as usize]).then(a.cmp(&b)));
    order
}

pub fn candidates(image: usize, embedding: &[f32], cls_prompts: &EmbeddingMatrix, k: usize) -> Result<CandidateSet> {
    let k = effective_k(k, cls_prompts.rows())?;
    let scores = cosines_against(embedding, cls_prompts)?;
    Ok(candidates_from_scores(image, &scores, k))
}

/// Top-`k` of precomputed prompt scores; `k` must already be clamped.
pub fn candidates_from_scores(image: usize, scores: &[f64], k: usize) -> CandidateSet {
    let mut classes = rank_classes(scores);
    classes.truncate(k);
    let scores = classes.iter().map(|&c| scores[c as usize]).collect();
    CandidateSet { image, classes, scores }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn prompts() -> EmbeddingMatrix {
        EmbeddingMatrix::new(3, 2, vec![1.0, 0.0, 0.0, 1.0, 0.6, 0.8]).unwrap()
    }

    #[test]
    fn hand_example() {
        let c = candidates(0, &[1.0, 0.0], &prompts(), 2).unwrap();
        assert_eq!(c.classes, vec![0, 2]);
        assert!((c.scores[0] - 1.0).abs() < 1e-7);
        assert!((c.scores[1] - 0.6).abs() < 1e-7);
    }

    #[test]
    fn k_equal_to_classes_orders_everything() {
        let c = candidates(0, &[1.0, 0.0], &prompts(), 3).unwrap();
        assert_eq!(c.classes, vec![0, 2, 1]);
    }

    #[test]
    fn k_is_clamped_and_small_k_rejected() {
        assert_eq!(candidates(0, &[1.0, 0.0], &prompts(), 10).unwrap().len(), 3);
        assert_eq!(candidates(0, &[1.0, 0.0], &prompts(), 1), Err(Error::KTooSmall { k: 1 }));
        let single = EmbeddingMatrix::new(1, 2, vec![1.0, 0.0]).unwrap();
        assert!(candidates(0, &[1.0, 0.0], &single, 3).is_err());
    }

    #[test]
    fn ties_break_by_class_id() {
        let c = candidates_from_scores(4, &[0.1, 0.5, 0.5, 0.5], 3);
        assert_eq!(c.classes, vec![1, 2, 3]);
        assert_eq!(c.image, 4);
    }
}
