//! File formats read and written by the `adi` command.
//!
//! * Documents: `.tsv` files hold `id<TAB>text` per line, `.xml` files are
//!   BioC, anything else is one plain-text document named after the file stem.
//! * Gold pairs: `.xml` files are BioC; otherwise TSV with `doc_id<TAB>sf<TAB>lf`
//!   per line, or a bare `doc_id` to register a document without pairs.
//! * Pair TSV: `doc_id sf lf sf_start sf_end lf_start lf_end pattern`, no header.
//! * N-best JSONL: `{"doc_id", "sf", "sf_start", "sf_end", "candidates": [{"lf", "rank", "score"?}]}`.
//! * Reranked JSONL: an n-best line plus `scored` and `chosen`.
//! * Instance JSONL: `{"rank", "charmatch", "freq" | "log1p_freq", "label"}`.
//!
//! Offsets are UTF-8 byte offsets into the document text.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use adi_core::eval::Predictions;
use adi_core::extract::{Candidate, NBestList, SfLfPair};
use adi_core::rerank::{FeatureVector, RerankedList, ScoredCandidate, TrainingInstance};
use adi_core::{Document, GoldSet, Span};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bioc::{parse_bioc, BiocCollection};
use crate::error::CliError;

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("input")
        .to_string()
}

/// Non-empty lines with their 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.trim().is_empty())
}

pub fn read_bioc(path: &Path) -> Result<BiocCollection, CliError> {
    parse_bioc(&read_text(path)?).map_err(|source| CliError::Bioc {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_documents(paths: &[impl AsRef<Path>]) -> Result<Vec<Document>, CliError> {
    let mut docs = Vec::new();
    let mut seen = BTreeSet::new();
    for path in paths {
        let path = path.as_ref();
        let batch = match extension(path).as_str() {
            "xml" => read_bioc(path)?.to_documents(),
            "tsv" => {
                let text = read_text(path)?;
                let mut batch = Vec::new();
                for (n, line) in lines(&text) {
                    let (id, body) = line
                        .split_once('\t')
                        .ok_or_else(|| CliError::parse(path, n, "expected `id<TAB>text`"))?;
                    if id.is_empty() {
                        return Err(CliError::parse(path, n, "empty document id"));
                    }
                    batch.push(Document::new(id, body));
                }
                batch
            }
            _ => vec![Document::new(stem(path), read_text(path)?)],
        };
        for d in batch {
            if !seen.insert(d.id.clone()) {
                return Err(CliError::Data(format!(
                    "{}: duplicate document id `{}`",
                    path.display(),
                    d.id
                )));
            }
            docs.push(d);
        }
    }
    Ok(docs)
}

/// Gold pairs plus any warnings from skipped BioC annotations.
pub fn read_gold(path: &Path) -> Result<(GoldSet, Vec<String>), CliError> {
    let name = stem(path);
    if extension(path) == "xml" {
        let coll = read_bioc(path)?;
        let mut warnings = coll.warnings.clone();
        if coll.skipped_annotations > 0 {
            warnings.push(format!(
                "{}: skipped {} annotation(s) with mismatched offsets",
                path.display(),
                coll.skipped_annotations
            ));
        }
        return Ok((coll.gold_set(&name), warnings));
    }
    let text = read_text(path)?;
    let mut gold = GoldSet::new(name);
    for (n, line) in lines(&text) {
        let cols: Vec<&str> = line.split('\t').collect();
        match cols.as_slice() {
            [id] if !id.is_empty() => gold.add_document(id),
            [id, sf, lf, ..] if !id.is_empty() && !sf.is_empty() && !lf.is_empty() => {
                gold.add_pair(id, sf, lf);
            }
            _ => return Err(CliError::parse(path, n, "expected `doc_id<TAB>sf<TAB>lf`")),
        }
    }
    Ok((gold, Vec::new()))
}

/// The first three columns of a pair TSV.
pub fn read_predictions(path: &Path) -> Result<Predictions, CliError> {
    let text = read_text(path)?;
    let mut out = Predictions::new();
    for (n, line) in lines(&text) {
        let cols: Vec<&str> = line.split('\t').collect();
        match cols.as_slice() {
            [id, sf, lf, ..] if !id.is_empty() => {
                out.entry(id.to_string())
                    .or_default()
                    .insert((sf.to_string(), lf.to_string()));
            }
            _ => {
                return Err(CliError::parse(
                    path,
                    n,
                    "expected at least `doc_id<TAB>sf<TAB>lf`",
                ))
            }
        }
    }
    Ok(out)
}

fn check_field(field: &str) -> Result<&str, CliError> {
    if field.contains(['\t', '\n', '\r']) {
        Err(CliError::Data(format!(
            "field {field:?} contains a tab or newline"
        )))
    } else {
        Ok(field)
    }
}

pub fn pair_row(doc_id: &str, p: &SfLfPair) -> Result<String, CliError> {
    Ok(format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
        check_field(doc_id)?,
        check_field(&p.sf)?,
        check_field(&p.lf)?,
        p.sf_span.start,
        p.sf_span.end,
        p.lf_span.start,
        p.lf_span.end,
        p.pattern
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NBestRecord {
    pub doc_id: String,
    pub sf: String,
    #[serde(default)]
    pub sf_start: usize,
    #[serde(default)]
    pub sf_end: usize,
    pub candidates: Vec<Candidate>,
}

impl NBestRecord {
    pub fn from_list(list: &NBestList) -> Self {
        NBestRecord {
            doc_id: list.doc_id.clone(),
            sf: list.sf.clone(),
            sf_start: list.sf_span.start,
            sf_end: list.sf_span.end,
            candidates: list.candidates.clone(),
        }
    }

    /// Candidates sorted by rank; ranks must then be exactly `0..n`.
    pub fn into_list(self) -> Result<NBestList, String> {
        let mut candidates = self.candidates;
        candidates.sort_by_key(|c| c.rank);
        let list = NBestList {
            doc_id: self.doc_id,
            sf: self.sf,
            sf_span: Span::new(self.sf_start, self.sf_end),
            candidates,
        };
        if list.ranks_are_consecutive() {
            Ok(list)
        } else {
            Err(format!(
                "candidate ranks must be 0..{} without gaps or repeats",
                list.candidates.len()
            ))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRecord {
    pub lf: String,
    pub rank: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    pub features: FeatureVector,
    pub z: f64,
    pub prob: f64,
}

impl ScoredRecord {
    pub fn from_scored(s: &ScoredCandidate) -> Self {
        ScoredRecord {
            lf: s.candidate.lf.clone(),
            rank: s.candidate.rank,
            score: s.candidate.generator_score,
            features: s.features,
            z: s.z,
            prob: s.prob,
        }
    }

    pub fn into_scored(self) -> ScoredCandidate {
        ScoredCandidate {
            candidate: Candidate {
                lf: self.lf,
                rank: self.rank,
                generator_score: self.score,
            },
            features: self.features,
            z: self.z,
            prob: self.prob,
        }
    }
}

pub fn nbest_line(list: &NBestList) -> String {
    serde_json::to_string(&NBestRecord::from_list(list)).expect("n-best records always serialize")
}

pub fn parse_nbest_line(path: &Path, n: usize, line: &str) -> Result<NBestList, CliError> {
    let rec: NBestRecord =
        serde_json::from_str(line).map_err(|e| CliError::parse(path, n, e.to_string()))?;
    rec.into_list().map_err(|e| CliError::parse(path, n, e))
}

pub fn read_nbest(path: &Path) -> Result<Vec<NBestList>, CliError> {
    let text = read_text(path)?;
    lines(&text)
        .map(|(n, l)| parse_nbest_line(path, n, l))
        .collect()
}

/// Adds `scored` and `chosen` to an n-best JSON object, keeping its other fields.
pub fn augment_line(mut object: serde_json::Map<String, Value>, reranked: &RerankedList) -> String {
    let scored: Vec<ScoredRecord> = reranked
        .scored
        .iter()
        .map(ScoredRecord::from_scored)
        .collect();
    let chosen = scored.first().cloned();
    object.insert(
        "scored".into(),
        serde_json::to_value(scored).expect("serializable"),
    );
    object.insert(
        "chosen".into(),
        serde_json::to_value(chosen).expect("serializable"),
    );
    serde_json::to_string(&object).expect("serializable")
}

#[derive(Debug, Deserialize)]
struct RerankedRecord {
    #[serde(flatten)]
    nbest: NBestRecord,
    scored: Vec<ScoredRecord>,
}

pub fn read_reranked(path: &Path) -> Result<Vec<RerankedList>, CliError> {
    let text = read_text(path)?;
    lines(&text)
        .map(|(n, line)| {
            let rec: RerankedRecord =
                serde_json::from_str(line).map_err(|e| CliError::parse(path, n, e.to_string()))?;
            let source = rec
                .nbest
                .into_list()
                .map_err(|e| CliError::parse(path, n, e))?;
            Ok(RerankedList {
                source,
                scored: rec
                    .scored
                    .into_iter()
                    .map(ScoredRecord::into_scored)
                    .collect(),
            })
        })
        .collect()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceRecord {
    rank: usize,
    charmatch: u8,
    #[serde(default)]
    freq: Option<u64>,
    #[serde(default)]
    log1p_freq: Option<f64>,
    label: u8,
}

fn instance_from(rec: InstanceRecord) -> Result<TrainingInstance, String> {
    if rec.charmatch > 1 || rec.label > 1 {
        return Err("charmatch and label must be 0 or 1".into());
    }
    let log1p_freq = match (rec.freq, rec.log1p_freq) {
        (Some(_), Some(_)) => return Err("give either `freq` or `log1p_freq`, not both".into()),
        (Some(f), None) => (f as f64).ln_1p(),
        (None, Some(l)) if l.is_finite() && l >= 0.0 => l,
        (None, Some(_)) => return Err("`log1p_freq` must be finite and non-negative".into()),
        (None, None) => 0.0,
    };
    Ok(TrainingInstance {
        features: FeatureVector {
            rank: rec.rank,
            charmatch: rec.charmatch,
            log1p_freq,
        },
        label: rec.label,
    })
}

pub fn read_instances(path: &Path) -> Result<Vec<TrainingInstance>, CliError> {
    let text = read_text(path)?;
    lines(&text)
        .map(|(n, line)| {
            let rec: InstanceRecord =
                serde_json::from_str(line).map_err(|e| CliError::parse(path, n, e.to_string()))?;
            instance_from(rec).map_err(|e| CliError::parse(path, n, e))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use adi_core::extract::extract_pairs;

    #[test]
    fn pair_row_layout() {
        let doc = Document::new("d1", "heat shock protein (HSP)");
        let p = &extract_pairs(&doc)[0];
        assert_eq!(
            pair_row("d1", p).unwrap(),
            "d1\tHSP\theat shock protein\t20\t23\t0\t18\tLF_PAREN_SF\n"
        );
        assert!(pair_row("d\t1", p).is_err());
    }

    #[test]
    fn nbest_record_round_trip() {
        let line = r#"{"doc_id":"d","sf":"HC","sf_start":3,"sf_end":5,"candidates":[{"lf":"healthy controls","rank":1},{"lf":"controls","rank":0,"score":0.7}]}"#;
        let list = parse_nbest_line(Path::new("x"), 1, line).unwrap();
        assert_eq!(list.candidates[0].lf, "controls");
        assert_eq!(list.candidates[0].generator_score, Some(0.7));
        let again = parse_nbest_line(Path::new("x"), 1, &nbest_line(&list)).unwrap();
        assert_eq!(again, list);
    }

    #[test]
    fn nbest_rank_gaps_are_rejected() {
        let line = r#"{"doc_id":"d","sf":"HC","candidates":[{"lf":"a b","rank":0},{"lf":"c d","rank":2}]}"#;
        let err = parse_nbest_line(Path::new("x.jsonl"), 4, line).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().starts_with("x.jsonl:4:"), "{err}");
    }

    #[test]
    fn instance_forms() {
        let a = instance_from(
            serde_json::from_str(r#"{"rank":1,"charmatch":1,"freq":2,"label":1}"#).unwrap(),
        )
        .unwrap();
        assert!((a.features.log1p_freq - 3f64.ln()).abs() < 1e-15);
        let b = instance_from(
            serde_json::from_str(r#"{"rank":1,"charmatch":0,"log1p_freq":0.5,"label":0}"#).unwrap(),
        )
        .unwrap();
        assert_eq!(b.features.log1p_freq, 0.5);
        assert!(instance_from(
            serde_json::from_str(r#"{"rank":1,"charmatch":2,"label":0}"#).unwrap()
        )
        .is_err());
    }
}
