//! Rayon drivers for the core pipeline.
//!
//! Every parallel map is indexed and collected in input order, and each cell
//! is computed by the same sequential code as the core crate, so results do
//! not depend on the thread count.

use descsel_core::evaluator::{classify, context_with, prepare_image, summarize, EvalContext, ImageState};
use descsel_core::probe::ProbeSet;
use descsel_core::similarity::{assemble_lookup, lookup_row};
use descsel_core::{DatasetStore, EvalConfig, EvalResult, LookupMatrix, Setup};
use rayon::prelude::*;
use rayon::ThreadPool;

use crate::error::{Error, Result};

/// `threads == 0` lets rayon pick.
pub fn thread_pool(threads: usize) -> Result<ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))
}

pub fn build_lookup(store: &DatasetStore, probes: &ProbeSet) -> descsel_core::Result<LookupMatrix> {
    probes.validate(store)?;
    let rows = (0..store.num_classes())
        .into_par_iter()
        .map(|c| lookup_row(store, probes, c))
        .collect::<descsel_core::Result<Vec<_>>>()?;
    Ok(assemble_lookup(store, probes, rows))
}

pub fn context(store: &DatasetStore, cfg: &EvalConfig, cached: Option<LookupMatrix>) -> Result<EvalContext> {
    Ok(context_with(store, cfg, cached, build_lookup)?)
}

pub fn prepare_all(store: &DatasetStore, cfg: &EvalConfig, ctx: &EvalContext) -> Result<Vec<ImageState>> {
    Ok(store
        .test_indices()
        .into_par_iter()
        .map(|i| prepare_image(store, cfg, ctx, i))
        .collect::<descsel_core::Result<Vec<_>>>()?)
}

pub fn classify_all(
    store: &DatasetStore,
    cfg: &EvalConfig,
    ctx: &EvalContext,
    states: &[ImageState],
) -> Result<EvalResult> {
    let records = states.par_iter().map(|s| classify(store, cfg, ctx, s)).collect::<descsel_core::Result<Vec<_>>>()?;
    Ok(summarize(store, cfg, ctx, records))
}

pub fn evaluate(
    pool: &ThreadPool,
    store: &DatasetStore,
    cfg: &EvalConfig,
    cached: Option<LookupMatrix>,
) -> Result<EvalResult> {
    pool.install(|| {
        let ctx = context(store, cfg, cached)?;
        let states = prepare_all(store, cfg, &ctx)?;
        classify_all(store, cfg, &ctx, &states)
    })
}

/// One [`EvalResult`] per grid value, sharing `S` and the selections.
pub fn sweep(
    pool: &ThreadPool,
    store: &DatasetStore,
    cfg: &EvalConfig,
    grid: &[f64],
    cached: Option<LookupMatrix>,
) -> Result<Vec<EvalResult>> {
    if cfg.setup != Setup::ClassnameFree {
        return Err(Error::Config("w_cls sweeps need the classname-free setup".into()));
    }
    pool.install(|| {
        let ctx = context(store, cfg, cached)?;
        let states = prepare_all(store, cfg, &ctx)?;
        grid.iter()
            .map(|&w| {
                let cfg = EvalConfig { w_cls: w, ..cfg.clone() };
                cfg.validate()?;
                classify_all(store, &cfg, &ctx, &states)
            })
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use descsel_core::{generate, sample_probe_set, AssignmentSource, SynthSpec};

    fn store() -> DatasetStore {
        generate(&SynthSpec {
            classes: 5,
            dim: 32,
            train_per_class: 4,
            test_per_class: 6,
            pool: 20,
            planted: 2,
            ..SynthSpec::default()
        })
        .unwrap()
        .store
    }

    #[test]
    fn parallel_lookup_equals_sequential() {
        let s = store();
        let probes = sample_probe_set(&s, 3, 9).unwrap();
        let seq = descsel_core::build_lookup(&s, &probes).unwrap();
        for t in [1, 3] {
            let par = thread_pool(t).unwrap().install(|| build_lookup(&s, &probes)).unwrap();
            assert_eq!(seq, par);
        }
    }

    #[test]
    fn parallel_evaluation_equals_sequential() {
        let s = store();
        for assignment in [AssignmentSource::Selected, AssignmentSource::Random] {
            let cfg = EvalConfig { assignment, random_per_class: 4, ..EvalConfig::default() };
            let seq = descsel_core::evaluate(&s, &cfg).unwrap();
            for t in [1, 4] {
                assert_eq!(evaluate(&thread_pool(t).unwrap(), &s, &cfg, None).unwrap(), seq);
            }
        }
    }

    #[test]
    fn sweep_matches_core_sweep() {
        let s = store();
        let grid = [0.0, 0.5, 2.0, 100.0];
        let cfg = EvalConfig::default();
        let core = descsel_core::sweep_wcls(&s, &cfg, &grid).unwrap();
        let ours = sweep(&thread_pool(2).unwrap(), &s, &cfg, &grid, None).unwrap();
        let ours: Vec<(f64, f64)> = ours.iter().map(|r| (r.config.w_cls, r.top1)).collect();
        assert_eq!(core, ours);
        let bad = EvalConfig { setup: Setup::ClsOnly, ..cfg };
        assert!(sweep(&thread_pool(1).unwrap(), &s, &bad, &grid, None).is_err());
    }
}
