//! Scoring and accuracy under every evaluation regime.
//!
//! A class `c` is represented by its classname prompt plus a description
//! list `D(c)` (selected per image, generated by an LLM, or random). The
//! setups differ in how those elements are embedded and combined:
//!
//! * `cls-only`: the classname prompt alone.
//! * `classname-free`: prompt weighted by `w_cls` plus classname-free pool
//!   descriptions, see [`score_classname_free`].
//! * `classname-included`: prompt plus pair embeddings of
//!   "{cls} + {description}", averaged or maxed.
//!
//! Evaluation is split into [`prepare_image`] (candidates and selections,
//! independent of `w_cls`) and [`classify`], so sweeps reuse the first half.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neighborhood::{candidates_from_scores, effective_k, CandidateSet};
use crate::probe::sample_probe_set;
use crate::selector::{
    assign_llm, assign_random, select, ClassAssignment, ImageAssignment, PositivityMode, SelectionConfig,
};
use crate::similarity::{build_lookup, cosine, cosines_against, LookupMatrix};
use crate::store::{DatasetStore, Split};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Setup {
    ClassnameFree,
    ClassnameIncluded,
    ClsOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssignmentSource {
    Selected,
    Llm,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    Mean,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    LocalK,
    Global,
}

/// Normalization of the classname-free ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OuterNorm {
    /// `(w_cls * phi_cls + mean(phi_d)) / |D|` with `|D| = 1 + #descriptions`.
    PaperEq5,
    /// `w_cls * phi_cls + mean(phi_d)`, comparable across list lengths.
    DescriptionBlockOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub setup: Setup,
    pub assignment: AssignmentSource,
    pub aggregation: Aggregation,
    pub scope: Scope,
    pub w_cls: f64,
    pub outer_norm: OuterNorm,
    pub k: usize,
    pub m: usize,
    /// Probes per class; `None` means the smallest train class size.
    pub n: Option<usize>,
    pub probe_seed: u64,
    pub mode: PositivityMode,
    /// Cap on LLM lists; `None` keeps every generated description.
    pub llm_cap: Option<usize>,
    pub random_per_class: usize,
    pub random_seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            setup: Setup::ClassnameFree,
            assignment: AssignmentSource::Selected,
            aggregation: Aggregation::Mean,
            scope: Scope::LocalK,
            w_cls: 1.0,
            outer_norm: OuterNorm::PaperEq5,
            k: 3,
            m: 5,
            n: None,
            probe_seed: 0,
            mode: PositivityMode::Clamp,
            llm_cap: None,
            random_per_class: 13,
            random_seed: 0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.w_cls.is_finite() && self.w_cls >= 0.0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "w_cls must be a finite nonnegative number, got {}",
                self.w_cls
            )));
        }
        if self.m == 0 {
            return Err(Error::InvalidConfig("m must be at least 1".into()));
        }
        if self.k < 2 {
            return Err(Error::KTooSmall { k: self.k });
        }
        Ok(())
    }

    fn needs_lookup(&self) -> bool {
        self.setup != Setup::ClsOnly && self.assignment == AssignmentSource::Selected
    }

    pub fn selection(&self, n: usize) -> SelectionConfig {
        SelectionConfig { m: self.m, mode: self.mode, k: self.k, n, seed: self.probe_seed }
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn max(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn cosines(image: &[f32], descs: &[&[f32]]) -> Result<Vec<f64>> {
    descs.iter().map(|d| cosine(image, d)).collect()
}

/// Mean cosine between the image and each description.
pub fn score_mean(image: &[f32], descs: &[&[f32]]) -> Result<f64> {
    if descs.is_empty() {
        return Err(Error::EmptyDescriptions);
    }
    Ok(mean(&cosines(image, descs)?))
}

/// Largest cosine between the image and any description.
pub fn score_max(image: &[f32], descs: &[&[f32]]) -> Result<f64> {
    if descs.is_empty() {
        return Err(Error::EmptyDescriptions);
    }
    Ok(max(&cosines(image, descs)?))
}

/// Weighted classname-free ensemble over precomputed cosines. An empty
/// description list leaves only `w_cls * cls_cos`.
pub fn classname_free_from_cosines(cls_cos: f64, desc_cos: &[f64], w_cls: f64, norm: OuterNorm) -> f64 {
    let weighted_cls = w_cls * cls_cos;
    if desc_cos.is_empty() {
        return weighted_cls;
    }
    let block = mean(desc_cos);
    match norm {
        OuterNorm::PaperEq5 => (weighted_cls + block) / (desc_cos.len() + 1) as f64,
        OuterNorm::DescriptionBlockOnly => weighted_cls + block,
    }
}

/// Max-aggregated classname-free score: `max(w_cls * cls_cos, max(desc_cos))`.
pub fn classname_free_max_from_cosines(cls_cos: f64, desc_cos: &[f64], w_cls: f64) -> f64 {
    max(desc_cos).max(w_cls * cls_cos)
}

pub fn score_classname_free(
    image: &[f32],
    cls_emb: &[f32],
    descs: &[&[f32]],
    w_cls: f64,
    norm: OuterNorm,
) -> Result<f64> {
    let cls = cosine(image, cls_emb)?;
    Ok(classname_free_from_cosines(cls, &cosines(image, descs)?, w_cls, norm))
}

/// Everything evaluation needs besides the per-image work: the clamped `k`,
/// the resolved probe count, the lookup matrix when selections are needed,
/// and class-level assignments for LLM or random runs.
#[derive(Debug, Clone)]
pub struct EvalContext {
    pub k: usize,
    pub n: usize,
    pub lookup: Option<LookupMatrix>,
    pub class_assignment: Option<ClassAssignment>,
}

/// Candidates, prompt scores and (for selected runs) the image's description
/// selection. Independent of `w_cls`, aggregation and scope.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageState {
    pub image: usize,
    pub cls_scores: Vec<f64>,
    pub candidates: CandidateSet,
    pub selection: Option<ImageAssignment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image: usize,
    pub label: u32,
    pub predicted: u32,
    pub predicted_score: f64,
    /// Candidate classes and their final scores under the configured setup.
    pub candidates: Vec<u32>,
    pub scores: Vec<f64>,
}

impl ImageRecord {
    pub fn correct(&self) -> bool {
        self.predicted == self.label
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub dataset: String,
    /// Echo of the configuration with `n` resolved and `k` clamped.
    pub config: EvalConfig,
    pub top1: f64,
    pub correct: usize,
    pub total: usize,
    pub per_class: Vec<f64>,
    pub records: Vec<ImageRecord>,
}

/// Resolves `n`, builds or reuses `S`, and draws class-level assignments.
/// A `cached` lookup is used only if it matches the store and `(n, seed)`.
pub fn context(store: &DatasetStore, cfg: &EvalConfig, cached: Option<LookupMatrix>) -> Result<EvalContext> {
    context_with(store, cfg, cached, build_lookup)
}

/// Like [`context`], with a caller-supplied lookup builder (e.g. a parallel
/// one) used on a cache miss.
pub fn context_with<F>(
    store: &DatasetStore,
    cfg: &EvalConfig,
    cached: Option<LookupMatrix>,
    build: F,
) -> Result<EvalContext>
where
    F: FnOnce(&DatasetStore, &crate::probe::ProbeSet) -> Result<LookupMatrix>,
{
    cfg.validate()?;
    let k = effective_k(cfg.k, store.num_classes())?;
    let n = cfg.n.unwrap_or_else(|| store.min_train_cardinality());
    if cfg.setup == Setup::ClassnameIncluded && store.pairs.is_none() {
        return Err(Error::MissingPairTable);
    }
    let lookup = if cfg.needs_lookup() {
        match cached {
            Some(l) if l.matches(store, n, cfg.probe_seed) => Some(l),
            _ => {
                let probes = sample_probe_set(store, n, cfg.probe_seed)?;
                Some(build(store, &probes)?)
            }
        }
    } else {
        None
    };
    let class_assignment = match (cfg.setup, cfg.assignment) {
        (Setup::ClsOnly, _) | (_, AssignmentSource::Selected) => None,
        (_, AssignmentSource::Llm) => {
            Some(assign_llm(&store.pool, store.num_classes(), cfg.llm_cap.unwrap_or(usize::MAX))?)
        }
        (_, AssignmentSource::Random) => {
            Some(assign_random(store.pool.len(), cfg.random_per_class, cfg.random_seed, store.num_classes())?)
        }
    };
    Ok(EvalContext { k, n, lookup, class_assignment })
}

pub fn prepare_image(store: &DatasetStore, cfg: &EvalConfig, ctx: &EvalContext, image: usize) -> Result<ImageState> {
    let cls_scores = cosines_against(store.images.row(image), &store.cls_prompts)?;
    let candidates = candidates_from_scores(image, &cls_scores, ctx.k);
    let selection = match &ctx.lookup {
        Some(lookup) => Some(select(lookup, &candidates, &cfg.selection(ctx.n))?),
        None => None,
    };
    Ok(ImageState { image, cls_scores, candidates, selection })
}

fn descriptions_for<'a>(ctx: &'a EvalContext, state: &'a ImageState, class: u32) -> &'a [u32] {
    if let Some(sel) = &state.selection {
        return sel.descriptions_for(class);
    }
    match &ctx.class_assignment {
        Some(a) => a.get(class),
        None => &[],
    }
}

fn class_score(
    store: &DatasetStore,
    cfg: &EvalConfig,
    ctx: &EvalContext,
    state: &ImageState,
    class: u32,
) -> Result<f64> {
    let cls_cos = state.cls_scores[class as usize];
    if cfg.setup == Setup::ClsOnly {
        return Ok(cls_cos);
    }
    let image = store.images.row(state.image);
    let descs = descriptions_for(ctx, state, class);
    match cfg.setup {
        Setup::ClsOnly => unreachable!(),
        Setup::ClassnameFree => {
            let desc_cos = descs
                .iter()
                .map(|&d| cosine(image, store.pool.embeddings.row(d as usize)))
                .collect::<Result<Vec<_>>>()?;
            Ok(match cfg.aggregation {
                Aggregation::Mean => classname_free_from_cosines(cls_cos, &desc_cos, cfg.w_cls, cfg.outer_norm),
                Aggregation::Max => classname_free_max_from_cosines(cls_cos, &desc_cos, cfg.w_cls),
            })
        }
        Setup::ClassnameIncluded => {
            let pairs = store.pairs.as_ref().ok_or(Error::MissingPairTable)?;
            let mut element_cos = Vec::with_capacity(descs.len() + 1);
            element_cos.push(cls_cos);
            for &d in descs {
                let row = pairs.get(class, d).ok_or(Error::MissingPair { class, pool_id: d })?;
                element_cos.push(cosine(image, row)?);
            }
            Ok(match cfg.aggregation {
                Aggregation::Mean => mean(&element_cos),
                Aggregation::Max => max(&element_cos),
            })
        }
    }
}

/// Highest-scoring `(class, score)`; equal scores go to the smaller class id.
pub fn argmax<I: IntoIterator<Item = (u32, f64)>>(scored: I) -> Option<(u32, f64)> {
    scored.into_iter().fold(None, |best, (c, s)| match best {
        Some((b, bs)) if s < bs || (s == bs && c > b) => Some((b, bs)),
        _ => Some((c, s)),
    })
}

/// Argmax over the configured scope; ties go to the smaller class id.
pub fn classify(store: &DatasetStore, cfg: &EvalConfig, ctx: &EvalContext, state: &ImageState) -> Result<ImageRecord> {
    let candidate_scores =
        state.candidates.classes.iter().map(|&c| class_score(store, cfg, ctx, state, c)).collect::<Result<Vec<_>>>()?;

    let best = match cfg.scope {
        Scope::LocalK => argmax(state.candidates.classes.iter().copied().zip(candidate_scores.iter().copied())),
        Scope::Global => {
            let mut all = Vec::with_capacity(store.num_classes());
            for c in 0..store.num_classes() as u32 {
                let score = match state.candidates.classes.iter().position(|&x| x == c) {
                    Some(i) => candidate_scores[i],
                    None => class_score(store, cfg, ctx, state, c)?,
                };
                all.push((c, score));
            }
            argmax(all)
        }
    };
    let (predicted, predicted_score) = best.expect("candidate sets are never empty");
    Ok(ImageRecord {
        image: state.image,
        label: store.labels[state.image],
        predicted,
        predicted_score,
        candidates: state.candidates.classes.clone(),
        scores: candidate_scores,
    })
}

/// Aggregates per-image records, in test-image order, into an [`EvalResult`].
pub fn summarize(store: &DatasetStore, cfg: &EvalConfig, ctx: &EvalContext, records: Vec<ImageRecord>) -> EvalResult {
    let classes = store.num_classes();
    let mut hits = alloc::vec![0usize; classes];
    let mut totals = alloc::vec![0usize; classes];
    for r in &records {
        totals[r.label as usize] += 1;
        if r.correct() {
            hits[r.label as usize] += 1;
        }
    }
    let correct: usize = hits.iter().sum();
    let total = records.len();
    let per_class = hits.iter().zip(&totals).map(|(&h, &t)| if t == 0 { 0.0 } else { h as f64 / t as f64 }).collect();
    let top1 = if total == 0 { 0.0 } else { correct as f64 / total as f64 };
    debug_assert_eq!(
        top1,
        if total == 0 { 0.0 } else { records.iter().filter(|r| r.correct()).count() as f64 / total as f64 }
    );
    let mut config = cfg.clone();
    config.k = ctx.k;
    config.n = Some(ctx.n);
    EvalResult { dataset: store.name.clone(), config, top1, correct, total, per_class, records }
}

fn test_images(store: &DatasetStore) -> impl Iterator<Item = usize> + '_ {
    (0..store.images.rows()).filter(|&i| store.split[i] == Split::Test)
}

pub fn prepare_all(store: &DatasetStore, cfg: &EvalConfig, ctx: &EvalContext) -> Result<Vec<ImageState>> {
    test_images(store).map(|i| prepare_image(store, cfg, ctx, i)).collect()
}

pub fn classify_all(
    store: &DatasetStore,
    cfg: &EvalConfig,
    ctx: &EvalContext,
    states: &[ImageState],
) -> Result<EvalResult> {
    let records = states.iter().map(|s| classify(store, cfg, ctx, s)).collect::<Result<Vec<_>>>()?;
    Ok(summarize(store, cfg, ctx, records))
}

/// Sequential end-to-end evaluation.
pub fn evaluate(store: &DatasetStore, cfg: &EvalConfig) -> Result<EvalResult> {
    evaluate_cached(store, cfg, None)
}

pub fn evaluate_cached(store: &DatasetStore, cfg: &EvalConfig, cached: Option<LookupMatrix>) -> Result<EvalResult> {
    let ctx = context(store, cfg, cached)?;
    let states = prepare_all(store, cfg, &ctx)?;
    classify_all(store, cfg, &ctx, &states)
}

/// Accuracy at each `w_cls` in `grid`, sharing `S` and all selections.
pub fn sweep_wcls(store: &DatasetStore, cfg: &EvalConfig, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if cfg.setup != Setup::ClassnameFree {
        return Err(Error::InvalidConfig("w_cls sweeps need the classname-free setup".into()));
    }
    let ctx = context(store, cfg, None)?;
    let states = prepare_all(store, cfg, &ctx)?;
    grid.iter()
        .map(|&w| {
            let cfg = EvalConfig { w_cls: w, ..cfg.clone() };
            cfg.validate()?;
            Ok((w, classify_all(store, &cfg, &ctx, &states)?.top1))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::EmbeddingMatrix;
    use crate::store::fixtures::tiny_store;
    use crate::store::PairEmbeddingTable;
    use alloc::string::ToString;
    use alloc::vec;

    fn unit(angle: f64) -> [f32; 2] {
        [libm::cos(angle) as f32, libm::sin(angle) as f32]
    }

    fn with_cos(c: f64) -> [f32; 2] {
        unit(libm::acos(c))
    }

    #[test]
    fn score_mean_and_max() {
        let x = [1.0f32, 0.0];
        let a = with_cos(0.2);
        let b = with_cos(0.6);
        assert!((score_mean(&x, &[&a]).unwrap() - 0.2).abs() < 1e-6);
        assert!((score_mean(&x, &[&a, &b]).unwrap() - 0.4).abs() < 1e-6);
        assert!((score_max(&x, &[&a, &b]).unwrap() - 0.6).abs() < 1e-6);
        assert_eq!(score_max(&x, &[&b]).unwrap(), score_mean(&x, &[&b]).unwrap());
        assert_eq!(score_mean(&x, &[]), Err(Error::EmptyDescriptions));
        assert_eq!(score_max(&x, &[]), Err(Error::EmptyDescriptions));
    }

    #[test]
    fn classname_free_hand_values() {
        let v = classname_free_from_cosines(0.5, &[0.2, 0.6], 1.0, OuterNorm::PaperEq5);
        assert!((v - 0.3).abs() < 1e-12);
        let v = classname_free_from_cosines(0.5, &[0.2, 0.6], 1.0, OuterNorm::DescriptionBlockOnly);
        assert!((v - 0.9).abs() < 1e-12);
        assert_eq!(classname_free_from_cosines(0.5, &[], 3.0, OuterNorm::PaperEq5), 1.5);
        // w_cls = 0 leaves only the description block, scaled by 1/|D|
        let v = classname_free_from_cosines(0.9, &[0.2, 0.6], 0.0, OuterNorm::PaperEq5);
        assert!((v - 0.4 / 3.0).abs() < 1e-12);

        let x = [1.0f32, 0.0];
        let v = score_classname_free(&x, &with_cos(0.5), &[&with_cos(0.2), &with_cos(0.6)], 1.0, OuterNorm::PaperEq5)
            .unwrap();
        assert!((v - 0.3).abs() < 1e-6);
    }

    #[test]
    fn descriptions_flip_the_classname_decision() {
        // cls cosines (0.50, 0.52), one selected description each with
        // cosines (0.70, 0.10)
        let s0 = classname_free_from_cosines(0.50, &[0.70], 1.0, OuterNorm::PaperEq5);
        let s1 = classname_free_from_cosines(0.52, &[0.10], 1.0, OuterNorm::PaperEq5);
        assert!((s0 - 0.60).abs() < 1e-12);
        assert!((s1 - 0.31).abs() < 1e-12);
        assert!(s0 > s1);
    }

    /// Two classes in 3-D; the second pool description matches images of
    /// class 1 and the prompts are nearly tied.
    fn flip_store() -> DatasetStore {
        let mut s = tiny_store();
        let n = |v: [f64; 3]| {
            let norm = libm::sqrt(v.iter().map(|x| x * x).sum());
            v.map(|x| (x / norm) as f32)
        };
        let rows = |vs: &[[f32; 3]]| EmbeddingMatrix::from_rows(3, vs.iter().map(|v| &v[..])).unwrap();
        s.cls_prompts = rows(&[n([1.0, 0.3, 0.0]), n([1.0, 0.0, 0.01])]);
        s.pool.embeddings = rows(&[n([0.0, 1.0, 0.0]), n([0.0, 0.0, 1.0])]);
        s.images = rows(&[n([0.2, 1.0, 0.0]), n([1.0, 0.0, 1.0]), n([0.3, 1.0, 0.1]), n([1.0, 0.2, 1.0])]);
        s.pairs = None;
        s
    }

    #[test]
    fn evaluate_cls_only_and_selected() {
        let s = flip_store();
        s.validate().unwrap();
        let base = EvalConfig { setup: Setup::ClsOnly, k: 2, m: 1, ..EvalConfig::default() };
        let r = evaluate(&s, &base).unwrap();
        // both prompts prefer class 0
        assert_eq!(r.records.iter().map(|r| r.predicted).collect::<Vec<_>>(), vec![0, 0]);
        assert_eq!(r.top1, 0.5);
        assert_eq!(r.per_class, vec![1.0, 0.0]);

        let sel = EvalConfig { setup: Setup::ClassnameFree, w_cls: 0.0, ..base.clone() };
        let r = evaluate(&s, &sel).unwrap();
        assert_eq!(r.top1, 1.0);
        assert_eq!(r.config.n, Some(1));
        assert_eq!(r.total, 2);
    }

    #[test]
    fn classname_included_needs_pairs() {
        let mut s = flip_store();
        let cfg = EvalConfig { setup: Setup::ClassnameIncluded, k: 2, m: 1, ..EvalConfig::default() };
        assert_eq!(evaluate(&s, &cfg).unwrap_err(), Error::MissingPairTable);
        let emb = EmbeddingMatrix::new(1, 3, vec![1.0, 0.0, 0.0]).unwrap();
        s.pairs = Some(PairEmbeddingTable::new("{cls}, which {desc}".to_string(), true, vec![(0, 0)], emb).unwrap());
        assert!(matches!(evaluate(&s, &cfg), Err(Error::MissingPair { .. })));
    }

    #[test]
    fn config_errors() {
        let s = flip_store();
        for cfg in [
            EvalConfig { w_cls: -1.0, ..EvalConfig::default() },
            EvalConfig { w_cls: f64::NAN, ..EvalConfig::default() },
            EvalConfig { m: 0, ..EvalConfig::default() },
            EvalConfig { k: 1, ..EvalConfig::default() },
        ] {
            assert!(evaluate(&s, &cfg).unwrap_err().is_config());
        }
        let cfg = EvalConfig { setup: Setup::ClsOnly, ..EvalConfig::default() };
        assert!(sweep_wcls(&s, &cfg, &[0.0]).is_err());
    }

    #[test]
    fn sweep_matches_individual_runs() {
        let s = flip_store();
        let cfg = EvalConfig { k: 2, m: 1, ..EvalConfig::default() };
        let grid = [0.0, 1.0, 1e6];
        let curve = sweep_wcls(&s, &cfg, &grid).unwrap();
        for (w, acc) in curve {
            let single = evaluate(&s, &EvalConfig { w_cls: w, ..cfg.clone() }).unwrap();
            assert_eq!(acc, single.top1);
        }
        assert_eq!(sweep_wcls(&s, &cfg, &[1e6]).unwrap()[0].1, 0.5);
    }

    #[test]
    fn single_test_image_accuracy_is_binary() {
        let mut s = flip_store();
        s.split = vec![Split::Train, Split::Train, Split::Test, Split::Train];
        let r = evaluate(&s, &EvalConfig { setup: Setup::ClsOnly, k: 2, ..EvalConfig::default() }).unwrap();
        assert_eq!(r.total, 1);
        assert_eq!(r.records[0].scores.len(), 2);
        assert!(r.top1 == 0.0 || r.top1 == 1.0);
    }
}
