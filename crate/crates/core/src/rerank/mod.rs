//! Feature extraction, logistic scoring and n-best reranking.

mod model;
pub mod train;

use serde::{Deserialize, Serialize};

use crate::eval::GoldSet;
use crate::extract::{Candidate, NBestList};
use crate::index::SuffixIndex;

pub use model::{
    all_presets, preset, preset_benchmark, FeatureSet, ModelCoefficients, ModelError, ModelSource,
    PRESET_BENCHMARKS,
};
pub use train::{train, TrainError, TrainOptions, TrainedModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub rank: usize,
    pub charmatch: u8,
    /// `ln(1 + freq)` where freq counts the definition string in the corpus.
    pub log1p_freq: f64,
}

impl FeatureVector {
    pub fn new(rank: usize, charmatch: bool, freq: u64) -> Self {
        FeatureVector {
            rank,
            charmatch: u8::from(charmatch),
            log1p_freq: (freq as f64).ln_1p(),
        }
    }

    /// `(1, rank, charmatch, log1p_freq)`, aligned with the coefficients.
    pub fn design_row(&self) -> [f64; 4] {
        [
            1.0,
            self.rank as f64,
            f64::from(self.charmatch),
            self.log1p_freq,
        ]
    }
}

/// 1 when the first alphanumeric characters of `sf` and `lf` agree, ignoring case.
pub fn charmatch(sf: &str, lf: &str) -> bool {
    let first = |s: &str| {
        s.chars()
            .find(|c| c.is_alphanumeric())
            .map(|c| c.to_lowercase().collect::<String>())
    };
    match (first(sf), first(lf)) {
        (Some(a), Some(b)) => a == b,
        _ => false,
    }
}

/// Features for one candidate. Without an index the frequency feature is 0.
pub fn featurize(candidate: &Candidate, sf: &str, index: Option<&SuffixIndex>) -> FeatureVector {
    let freq = index
        .and_then(|idx| idx.definition_freq(sf, &candidate.lf).ok())
        .unwrap_or(0);
    FeatureVector::new(candidate.rank, charmatch(sf, &candidate.lf), freq as u64)
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl ModelCoefficients {
    pub fn linear(&self, fv: &FeatureVector) -> f64 {
        self.beta0
            + self.beta1 * fv.rank as f64
            + self.beta2 * f64::from(fv.charmatch)
            + self.beta3 * fv.log1p_freq
    }

    /// `(z, sigmoid(z))`.
    pub fn score(&self, fv: &FeatureVector) -> (f64, f64) {
        let z = self.linear(fv);
        (z, sigmoid(z))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub candidate: Candidate,
    pub features: FeatureVector,
    pub z: f64,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RerankedList {
    pub source: NBestList,
    /// Sorted by `z` descending; ties keep the original rank order.
    pub scored: Vec<ScoredCandidate>,
}

impl RerankedList {
    pub fn chosen(&self) -> Option<&ScoredCandidate> {
        self.scored.first()
    }
}

pub fn rerank(
    nbest: &NBestList,
    coeffs: &ModelCoefficients,
    index: Option<&SuffixIndex>,
) -> RerankedList {
    let mut scored: Vec<ScoredCandidate> = nbest
        .candidates
        .iter()
        .map(|c| {
            let features = featurize(c, &nbest.sf, index);
            let (z, prob) = coeffs.score(&features);
            ScoredCandidate {
                candidate: c.clone(),
                features,
                z,
                prob,
            }
        })
        .collect();
    scored.sort_by(|a, b| {
        b.z.total_cmp(&a.z)
            .then(a.candidate.rank.cmp(&b.candidate.rank))
    });
    RerankedList {
        source: nbest.clone(),
        scored,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingInstance {
    pub features: FeatureVector,
    pub label: u8,
}

/// One instance per candidate, labelled 1 when the candidate's long form is a
/// gold long form for the same document and short form.
pub fn label_instances(
    lists: &[NBestList],
    gold: &GoldSet,
    index: Option<&SuffixIndex>,
) -> Vec<TrainingInstance> {
    lists
        .iter()
        .flat_map(|list| {
            list.candidates.iter().map(move |c| TrainingInstance {
                features: featurize(c, &list.sf, index),
                label: u8::from(gold.contains(&list.doc_id, &list.sf, &c.lf)),
            })
        })
        .collect()
}
