//! JSON and CSV artifacts.

use std::collections::BTreeSet;
use std::path::Path;

use descsel_core::evaluator::ImageState;
use descsel_core::{ClassAssignment, DatasetStore, EvalResult, PositivityMode};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::storefs::{write_json, DEFAULT_PAIR_TEMPLATE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedDescription {
    pub id: u32,
    pub text: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateEntry {
    pub class: u32,
    pub classname: String,
    pub cls_score: f64,
    pub descriptions: Vec<SelectedDescription>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageSelections {
    pub image: usize,
    pub label: u32,
    pub candidates: Vec<CandidateEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionsFile {
    pub dataset: String,
    pub k: usize,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub mode: PositivityMode,
    pub images: Vec<ImageSelections>,
}

/// Builds `selections.json` content from prepared image states.
pub fn selections(
    store: &DatasetStore,
    states: &[ImageState],
    k: usize,
    m: usize,
    n: usize,
    seed: u64,
    mode: PositivityMode,
) -> SelectionsFile {
    let images = states
        .iter()
        .map(|st| {
            let candidates = st
                .candidates
                .classes
                .iter()
                .map(|&c| {
                    let sel = st.selection.as_ref().and_then(|a| a.per_candidate.iter().find(|p| p.class == c));
                    let descriptions = sel
                        .map(|s| {
                            s.descriptions
                                .iter()
                                .zip(&s.scores)
                                .map(|(&id, &score)| SelectedDescription {
                                    id,
                                    text: store.pool.texts[id as usize].clone(),
                                    score,
                                })
                                .collect()
                        })
                        .unwrap_or_default();
                    CandidateEntry {
                        class: c,
                        classname: store.classnames[c as usize].clone(),
                        cls_score: st.cls_scores[c as usize],
                        descriptions,
                    }
                })
                .collect();
            ImageSelections { image: st.image, label: store.labels[st.image], candidates }
        })
        .collect();
    SelectionsFile { dataset: store.name.clone(), k, m, n, seed, mode, images }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthClass {
    pub class: u32,
    pub classname: String,
    pub planted: Vec<u32>,
}

pub fn ground_truth(store: &DatasetStore, truth: &ClassAssignment) -> Vec<GroundTruthClass> {
    truth
        .lists
        .iter()
        .enumerate()
        .map(|(c, list)| GroundTruthClass {
            class: c as u32,
            classname: store.classnames[c].clone(),
            planted: list.clone(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairKey {
    pub class: u32,
    pub pool_id: u32,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairKeysFile {
    pub dataset: String,
    pub template: String,
    pub keys: Vec<PairKey>,
}

/// Sorted, deduplicated `(class, pool_id)` keys with rendered pair texts.
pub fn pair_keys(store: &DatasetStore, keys: impl IntoIterator<Item = (u32, u32)>) -> PairKeysFile {
    let template = store.pairs.as_ref().map_or(DEFAULT_PAIR_TEMPLATE, |p| p.template.as_str()).to_string();
    let unique: BTreeSet<(u32, u32)> = keys.into_iter().collect();
    let keys = unique
        .into_iter()
        .map(|(class, pool_id)| PairKey {
            class,
            pool_id,
            text: descsel_core::store::render_pair(
                &template,
                &store.classnames[class as usize],
                &store.pool.texts[pool_id as usize],
            ),
        })
        .collect();
    PairKeysFile { dataset: store.name.clone(), template, keys }
}

/// Keys needed by per-image selections.
pub fn keys_from_states(states: &[ImageState]) -> Vec<(u32, u32)> {
    states
        .iter()
        .filter_map(|s| s.selection.as_ref())
        .flat_map(|a| &a.per_candidate)
        .flat_map(|c| c.descriptions.iter().map(move |&d| (c.class, d)))
        .collect()
}

/// Keys needed by class-level assignments.
pub fn keys_from_assignment(a: &ClassAssignment) -> Vec<(u32, u32)> {
    a.lists.iter().enumerate().flat_map(|(c, l)| l.iter().map(move |&d| (c as u32, d))).collect()
}

pub const RESULTS_HEADER: [&str; 10] =
    ["dataset", "setup", "assignment", "aggregation", "scope", "k", "m", "n", "w_cls", "top1"];

/// The serde name of a unit enum variant, e.g. `"classname-free"`.
pub fn variant_name<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        other => panic!("not a unit variant: {other:?}"),
    }
}

pub fn write_results_csv(path: &Path, results: &[EvalResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RESULTS_HEADER)?;
    for r in results {
        let c = &r.config;
        w.write_record([
            r.dataset.clone(),
            variant_name(&c.setup),
            variant_name(&c.assignment),
            variant_name(&c.aggregation),
            variant_name(&c.scope),
            c.k.to_string(),
            c.m.to_string(),
            c.n.map_or_else(String::new, |n| n.to_string()),
            c.w_cls.to_string(),
            r.top1.to_string(),
        ])?;
    }
    w.flush().map_err(|e| crate::error::Error::io(path, e))?;
    Ok(())
}

/// One row of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub setup: String,
    pub assignment: String,
    pub aggregation: String,
    pub scope: String,
    pub k: usize,
    pub m: usize,
    pub n: usize,
    pub w_cls: f64,
    pub top1: f64,
}

pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<Vec<ResultRow>, csv::Error>>()?)
}

pub fn write_results(dir: &Path, results: &[EvalResult]) -> Result<()> {
    if let [one] = results {
        write_json(&dir.join("results.json"), one)?;
    } else {
        write_json(&dir.join("results.json"), results)?;
    }
    write_results_csv(&dir.join("results.csv"), results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use descsel_core::{evaluate, generate, EvalConfig, SynthSpec};

    #[test]
    fn pair_keys_are_sorted_and_unique() {
        let s =
            generate(&SynthSpec { classes: 3, dim: 16, pool: 9, planted: 2, ..SynthSpec::default() }).unwrap().store;
        let f = pair_keys(&s, [(2, 1), (0, 3), (2, 1), (0, 0)]);
        let ids: Vec<(u32, u32)> = f.keys.iter().map(|k| (k.class, k.pool_id)).collect();
        assert_eq!(ids, [(0, 0), (0, 3), (2, 1)]);
        assert_eq!(f.keys[2].text, format!("{}, which has {}", s.classnames[2], s.pool.texts[1]));
        assert!(pair_keys(&s, []).keys.is_empty());
    }

    #[test]
    fn results_csv_round_trips() {
        let s =
            generate(&SynthSpec { classes: 4, dim: 24, pool: 16, planted: 2, ..SynthSpec::default() }).unwrap().store;
        let results: Vec<EvalResult> = [0.0, 0.1, 1.0 / 3.0]
            .iter()
            .map(|&w_cls| evaluate(&s, &EvalConfig { w_cls, ..EvalConfig::default() }).unwrap())
            .collect();
        let dir = tempfile::tempdir().unwrap();
        write_results(dir.path(), &results).unwrap();
        let rows = read_results_csv(&dir.path().join("results.csv")).unwrap();
        assert_eq!(rows.len(), 3);
        for (row, r) in rows.iter().zip(&results) {
            assert_eq!(row.top1, r.top1);
            assert_eq!(row.w_cls, r.config.w_cls);
            assert_eq!(row.setup, "classname-free");
            assert_eq!(row.scope, "local-k");
        }
    }
}
