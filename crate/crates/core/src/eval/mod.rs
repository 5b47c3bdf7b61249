//! Scoring against gold pairs and the diagnostic reports.
//!
//! Pairs are compared exactly after [`normalize_pair`]; there is no partial
//! credit. Precision, recall and F are micro-averaged over documents.

pub mod report;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::NBestList;
use crate::rerank::{RerankedList, ScoredCandidate};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("predictions reference documents missing from gold set `{gold}`: {ids:?}")]
    UnknownDocuments { gold: String, ids: Vec<String> },
    #[error("no observations to summarize")]
    NoObservations,
    #[error("no correct chosen candidates; median confidence is undefined")]
    NoCorrectCandidates,
}

/// Lowercases, collapses whitespace runs, trims, and drops trailing ASCII
/// punctuation from both members of a pair.
pub fn normalize_pair(sf: &str, lf: &str) -> (String, String) {
    (normalize(sf), normalize(lf))
}

fn normalize(s: &str) -> String {
    let collapsed = s
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase();
    collapsed
        .trim_end_matches(|c: char| c.is_ascii_punctuation())
        .trim_end()
        .to_string()
}

pub type PairSet = BTreeSet<(String, String)>;

/// Predicted pairs per document.
pub type Predictions = BTreeMap<String, PairSet>;

/// Gold pairs for one benchmark, stored normalized. Documents without any
/// pair are still registered so predictions on them count as false
/// positives rather than unknown ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldSet {
    pub name: String,
    entries: BTreeMap<String, PairSet>,
}

impl GoldSet {
    pub fn new(name: impl Into<String>) -> Self {
        GoldSet {
            name: name.into(),
            entries: BTreeMap::new(),
        }
    }

    pub fn add_document(&mut self, doc_id: &str) {
        self.entries.entry(doc_id.to_string()).or_default();
    }

    /// Adds a pair; returns false when its normalized form was already present.
    pub fn add_pair(&mut self, doc_id: &str, sf: &str, lf: &str) -> bool {
        self.entries
            .entry(doc_id.to_string())
            .or_default()
            .insert(normalize_pair(sf, lf))
    }

    pub fn contains(&self, doc_id: &str, sf: &str, lf: &str) -> bool {
        self.entries
            .get(doc_id)
            .is_some_and(|pairs| pairs.contains(&normalize_pair(sf, lf)))
    }

    pub fn has_document(&self, doc_id: &str) -> bool {
        self.entries.contains_key(doc_id)
    }

    pub fn documents(&self) -> impl Iterator<Item = (&str, &PairSet)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn doc_count(&self) -> usize {
        self.entries.len()
    }

    pub fn pair_count(&self) -> usize {
        self.entries.values().map(BTreeSet::len).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl EvalReport {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        EvalReport {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
        }
    }
}

/// Micro-averaged comparison of `predictions` with `gold`.
pub fn evaluate(predictions: &Predictions, gold: &GoldSet) -> Result<EvalReport, EvalError> {
    let unknown: Vec<String> = predictions
        .keys()
        .filter(|id| !gold.has_document(id))
        .cloned()
        .collect();
    if !unknown.is_empty() {
        return Err(EvalError::UnknownDocuments {
            gold: gold.name.clone(),
            ids: unknown,
        });
    }
    let empty = PairSet::new();
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (doc_id, gold_pairs) in gold.documents() {
        let predicted: PairSet = predictions
            .get(doc_id)
            .unwrap_or(&empty)
            .iter()
            .map(|(sf, lf)| normalize_pair(sf, lf))
            .collect();
        let hits = predicted.intersection(gold_pairs).count();
        tp += hits;
        fp += predicted.len() - hits;
        fn_ += gold_pairs.len() - hits;
    }
    Ok(EvalReport::from_counts(tp, fp, fn_))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankHistogram {
    pub counts: Vec<usize>,
}

impl RankHistogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// For each list, the lowest rank whose candidate is a gold long form for
/// that document and short form. `k_max` sets the minimum number of bins.
pub fn rank_histogram(lists: &[NBestList], gold: &GoldSet, k_max: usize) -> RankHistogram {
    let mut counts = vec![0; k_max];
    for list in lists {
        let hit = list
            .candidates
            .iter()
            .filter(|c| gold.contains(&list.doc_id, &list.sf, &c.lf))
            .map(|c| c.rank)
            .min();
        if let Some(rank) = hit {
            if rank >= counts.len() {
                counts.resize(rank + 1, 0);
            }
            counts[rank] += 1;
        }
    }
    RankHistogram { counts }
}

/// A chosen candidate and whether it matched gold.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub chosen: ScoredCandidate,
    pub sf: String,
    pub correct: bool,
}

/// Chosen candidate of every non-empty reranked list, judged against gold.
pub fn observations(reranked: &[RerankedList], gold: &GoldSet) -> Vec<Observation> {
    reranked
        .iter()
        .filter_map(|r| {
            let chosen = r.chosen()?;
            Some(Observation {
                correct: gold.contains(&r.source.doc_id, &r.source.sf, &chosen.candidate.lf),
                sf: r.source.sf.clone(),
                chosen: chosen.clone(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharmatchReport {
    /// `None` when no chosen candidate had charmatch = 1.
    pub p_correct_given_charmatch: Option<f64>,
    /// `None` when every chosen candidate had charmatch = 1.
    pub p_correct_given_not: Option<f64>,
    pub n_charmatch: usize,
    pub n_not: usize,
    pub correct_charmatch: usize,
    pub correct_not: usize,
}

pub fn charmatch_conditional(obs: &[Observation]) -> Result<CharmatchReport, EvalError> {
    if obs.is_empty() {
        return Err(EvalError::NoObservations);
    }
    let (mut n_cm, mut n_not, mut ok_cm, mut ok_not) = (0, 0, 0, 0);
    for o in obs {
        let ok = usize::from(o.correct);
        if o.chosen.features.charmatch == 1 {
            n_cm += 1;
            ok_cm += ok;
        } else {
            n_not += 1;
            ok_not += ok;
        }
    }
    let frac = |k: usize, n: usize| (n > 0).then(|| k as f64 / n as f64);
    Ok(CharmatchReport {
        p_correct_given_charmatch: frac(ok_cm, n_cm),
        p_correct_given_not: frac(ok_not, n_not),
        n_charmatch: n_cm,
        n_not,
        correct_charmatch: ok_cm,
        correct_not: ok_not,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceReport {
    pub median_prob_correct: f64,
    pub n_correct: usize,
}

/// Median of `values`; the mean of the two middle values for even counts.
pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

/// Median `sigmoid(z)` over chosen candidates that are gold-correct.
pub fn confidence_summary(
    reranked: &[RerankedList],
    gold: &GoldSet,
) -> Result<ConfidenceReport, EvalError> {
    let mut probs: Vec<f64> = observations(reranked, gold)
        .into_iter()
        .filter(|o| o.correct)
        .map(|o| o.chosen.prob)
        .collect();
    let n_correct = probs.len();
    let median_prob_correct = median(&mut probs).ok_or(EvalError::NoCorrectCandidates)?;
    Ok(ConfidenceReport {
        median_prob_correct,
        n_correct,
    })
}

/// Predictions made of each list's chosen candidate.
pub fn chosen_predictions(reranked: &[RerankedList]) -> Predictions {
    let mut out = Predictions::new();
    for r in reranked {
        let entry = out.entry(r.source.doc_id.clone()).or_default();
        if let Some(c) = r.chosen() {
            entry.insert((r.source.sf.clone(), c.candidate.lf.clone()));
        }
    }
    out
}
