//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use adi_core::eval::{
    self, confidence_summary, evaluate, median, rank_histogram, GoldSet, Predictions,
};
use adi_core::extract::{extract_pairs, Candidate, NBestList};
use adi_core::rerank::{
    self, label_instances, preset, train, FeatureSet, FeatureVector, RerankedList, ScoredCandidate,
    TrainOptions, TrainingInstance,
};
use adi_core::{Document, Span, SuffixIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

// Coefficient rows (beta0, beta1, beta2, beta3) for models 1..=12, typed in
// from the published table rather than taken from the library.
const TABLE: [[f64; 4]; 12] = [
    [1.6, -3.3, 0.0, 0.0],
    [0.7, -1.6, 0.0, 0.0],
    [1.9, -3.9, 0.0, 0.0],
    [1.4, -3.3, 0.0, 0.0],
    [-1.2, -3.2, 3.5, 0.0],
    [-2.5, -1.5, 3.8, 0.0],
    [-1.0, -4.0, 3.9, 0.0],
    [-1.9, -3.2, 4.1, 0.0],
    [-2.7, -2.9, 3.7, 0.3],
    [-5.2, -1.5, 5.2, 0.5],
    [-3.2, -3.8, 4.7, 0.4],
    [-3.1, -2.9, 4.3, 0.3],
];

fn naive_count(text: &[u8], pattern: &[u8]) -> usize {
    if pattern.len() > text.len() {
        return 0;
    }
    text.windows(pattern.len())
        .filter(|w| *w == pattern)
        .count()
}

fn suffix_array_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let alphabets: [&[u8]; 2] = [b"ab", b"abcdefghijklmnopqrstuvwxyz"];
    let mut nonzero = 0;
    for case in 0..1000 {
        let alphabet = alphabets[case % 2];
        let len = rng.gen_range(1..=10_000);
        let corpus: Vec<u8> = (0..len)
            .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
            .collect();
        let n_docs = rng.gen_range(1..=3).min(len);
        let mut cuts: Vec<usize> = (0..n_docs - 1).map(|_| rng.gen_range(1..len)).collect();
        cuts.sort_unstable();
        cuts.dedup();
        let mut docs = Vec::new();
        let mut prev = 0;
        for c in cuts.into_iter().chain([len]) {
            docs.push(Document::new(
                format!("c{case}d{}", docs.len()),
                String::from_utf8(corpus[prev..c].to_vec()).unwrap(),
            ));
            prev = c;
        }
        let plen = rng.gen_range(1..=20usize);
        let pattern: Vec<u8> = if rng.gen_bool(0.5) && plen <= len {
            let at = rng.gen_range(0..=len - plen);
            corpus[at..at + plen].to_vec()
        } else {
            (0..plen)
                .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
                .collect()
        };
        let expected: usize = docs
            .iter()
            .map(|d| naive_count(d.text.as_bytes(), &pattern))
            .sum();
        let idx = SuffixIndex::build(&docs, false).map_err(|e| e.to_string())?;
        let got = idx
            .count_occurrences(std::str::from_utf8(&pattern).unwrap())
            .map_err(|e| e.to_string())?;
        ensure(got == expected, || {
            format!(
                "case {case}: pattern {:?} counted {got}, naive {expected}",
                String::from_utf8_lossy(&pattern)
            )
        })?;
        nonzero += usize::from(expected > 0);
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "1000 cases agree ({nonzero} with matches) in {:.1}s",
        elapsed.as_secs_f64()
    ))
}

fn preset_arithmetic() -> Check {
    let mut checked = 0;
    for (i, row) in TABLE.iter().enumerate() {
        let id = i as u32 + 1;
        let m = preset(id).map_err(|e| e.to_string())?;
        ensure(m.betas() == *row, || {
            format!("model {id}: {:?} != {row:?}", m.betas())
        })?;
        for rank in 0..=4usize {
            for cm in [false, true] {
                for freq in [0u64, 10, 6075] {
                    let oracle = row[0]
                        + row[1] * rank as f64
                        + row[2] * if cm { 1.0 } else { 0.0 }
                        + row[3] * (1.0 + freq as f64).ln();
                    let (z, _) = m.score(&FeatureVector::new(rank, cm, freq));
                    let rel = (z - oracle).abs() / oracle.abs().max(1.0);
                    ensure(rel <= 1e-12, || {
                        format!("model {id} ({rank},{cm},{freq}): z={z} oracle={oracle}")
                    })?;
                    checked += 1;
                }
            }
        }
    }
    let (z, p) = preset(9).unwrap().score(&FeatureVector::new(0, true, 6075));
    ensure((p - 0.9737).abs() <= 1e-3, || format!("model 9 prob {p}"))?;
    Ok(format!(
        "{checked} grid points; model 9 at (0,1,6075): z={z:.4}, prob={p:.4}"
    ))
}

fn charmatch_override() -> Check {
    let nb = NBestList {
        doc_id: "d".into(),
        sf: "HC".into(),
        sf_span: Span::new(0, 0),
        candidates: vec![
            Candidate::new("controls", 0),
            Candidate::new("healthy controls", 1),
        ],
    };
    let out = rerank::rerank(&nb, &preset(5).unwrap(), None);
    let chosen = out.chosen().ok_or("empty rerank output")?;
    ensure(
        chosen.candidate.rank == 1 && chosen.candidate.lf == "healthy controls",
        || format!("chose {:?}", chosen.candidate),
    )?;
    let (top, other) = (chosen.z, out.scored[1].z);
    ensure(
        (top + 0.9).abs() < 1e-12 && (other + 1.2).abs() < 1e-12,
        || format!("z = {top}, {other}"),
    )?;
    Ok(format!(
        "rank-1 charmatch z={top:.1} beats rank-0 z={other:.1}"
    ))
}

fn trainer_recovery() -> Check {
    let start = Instant::now();
    let truth = [-1.0, -2.0, 3.0, 0.5];
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0004);
    let data: Vec<TrainingInstance> = (0..100_000)
        .map(|_| {
            let fv = FeatureVector::new(
                rng.gen_range(0..=4),
                rng.gen_bool(0.5),
                rng.gen_range(0..=1000),
            );
            let z: f64 = fv.design_row().iter().zip(truth).map(|(x, b)| x * b).sum();
            TrainingInstance {
                features: fv,
                label: u8::from(rng.gen::<f64>() < rerank::sigmoid(z)),
            }
        })
        .collect();
    let fitted = train(
        &data,
        FeatureSet::RankCharmatchFreq,
        &TrainOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let got = fitted.coefficients.betas();
    for j in 0..4 {
        ensure((got[j] - truth[j]).abs() <= 0.1, || {
            format!("beta{j} = {} vs {}", got[j], truth[j])
        })?;
    }

    let l2 = TrainOptions::default().l2;
    let fs = FeatureSet::RankCharmatchFreq;
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let beta: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-3.0..3.0));
        let analytic = rerank::train::gradient(&data, fs, l2, &beta);
        let mut numeric = [0.0; 4];
        for j in 0..4 {
            let h = 1e-4 * beta[j].abs().max(1.0);
            let (mut up, mut down) = (beta, beta);
            up[j] += h;
            down[j] -= h;
            numeric[j] = (rerank::train::objective(&data, fs, l2, &up)
                - rerank::train::objective(&data, fs, l2, &down))
                / (2.0 * h);
        }
        let diff = (0..4)
            .map(|j| (analytic[j] - numeric[j]).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm = analytic
            .iter()
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
            .max(1e-12);
        worst = worst.max(diff / norm);
    }
    ensure(worst <= 1e-6, || {
        format!("gradient relative error {worst:.2e}")
    })?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "beta = ({:.3}, {:.3}, {:.3}, {:.3}) in {} iterations; gradient rel. error {worst:.1e}; {:.1}s",
        got[0],
        got[1],
        got[2],
        got[3],
        fitted.iterations,
        elapsed.as_secs_f64()
    ))
}

fn sign_pattern() -> Check {
    // Each feature cell gets a fixed positive fraction that rises with
    // charmatch and frequency and falls with rank.
    let mut data = Vec::new();
    for rank in 0..5usize {
        for cm in [false, true] {
            for freq in [0u64, 5, 50, 500] {
                let fv = FeatureVector::new(rank, cm, freq);
                let z =
                    -0.5 - 1.2 * rank as f64 + 2.0 * f64::from(fv.charmatch) + 0.3 * fv.log1p_freq;
                let positives = (200.0 * rerank::sigmoid(z)).round() as usize;
                for i in 0..200 {
                    data.push(TrainingInstance {
                        features: fv,
                        label: u8::from(i < positives),
                    });
                }
            }
        }
    }
    let m = train(
        &data,
        FeatureSet::RankCharmatchFreq,
        &TrainOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let c = m.coefficients;
    ensure(c.beta1 < 0.0 && c.beta2 > 0.0 && c.beta3 > 0.0, || {
        format!("{:?}", c.betas())
    })?;
    Ok(format!(
        "beta1={:.3} < 0, beta2={:.3} > 0, beta3={:.3} > 0",
        c.beta1, c.beta2, c.beta3
    ))
}

fn extraction_examples() -> Check {
    let cases: [(&str, &[(&str, &str)]); 5] = [
        ("heat shock protein (HSP)", &[("HSP", "heat shock protein")]),
        ("HSP (heat shock protein)", &[("HSP", "heat shock protein")]),
        (
            "The American Football Conference (AFC) champion Denver Broncos defeated the National Football \
             Conference (NFC) champion Carolina Panthers 24-10 to earn their third Super Bowl title.",
            &[("AFC", "American Football Conference"), ("NFC", "National Football Conference")],
        ),
        ("healthy controls (HC)", &[("HC", "healthy controls")]),
        ("Latent herpes simplex virus (HSV)", &[("HSV", "herpes simplex virus")]),
    ];
    for (text, gold) in cases {
        let got: Vec<(String, String)> = extract_pairs(&Document::new("x", text))
            .into_iter()
            .map(|p| (p.sf, p.lf))
            .collect();
        let want: Vec<(String, String)> = gold
            .iter()
            .map(|(s, l)| (s.to_string(), l.to_string()))
            .collect();
        ensure(got == want, || format!("{text:?}: got {got:?}"))?;
    }
    Ok("5 texts, 6 pairs, exact; HSV long form excludes `Latent`".into())
}

/// Pseudo-word `n` with a chosen first letter, unique per `n`.
fn word(first: char, n: usize) -> String {
    const SYL: [&str; 8] = ["ra", "lo", "mi", "ve", "tu", "sa", "no", "ki"];
    format!(
        "{first}{}{}{}",
        SYL[n % 8],
        SYL[(n / 8) % 8],
        SYL[(n / 64) % 8]
    )
}

struct TrendFixture {
    lists: Vec<NBestList>,
    gold: GoldSet,
    index: SuffixIndex,
}

// 20 lists with the correct long form at rank 0, 15 where a wrong rank-0
// candidate without charmatch precedes the correct one, and 15 where the
// wrong rank-0 candidate also charmatches but never occurs in the corpus.
// Correct long forms always charmatch and are the most frequent definitions.
fn trend_fixture() -> TrendFixture {
    let letters: Vec<char> = "bcdfghjklmnpqrstvwxz".chars().collect();
    let mut lists = Vec::new();
    let mut gold = GoldSet::new("trend");
    let mut corpus = Vec::new();
    for i in 0..50 {
        let a = letters[i % letters.len()];
        let b = letters[(i + 7) % letters.len()];
        let correct = format!(
            "{} {} {}",
            word(a, 3 * i),
            word(b, 3 * i + 1),
            word(b, 3 * i + 2)
        );
        let sf = format!(
            "{}{}{}X{i}",
            a.to_ascii_uppercase(),
            b.to_ascii_uppercase(),
            b.to_ascii_uppercase()
        );
        let doc_id = format!("L{i:02}");
        let no_cm = format!("{} {}", word(b, 500 + i), word(b, 600 + i));
        let with_cm = format!("{} {}", word(a, 700 + i), word(b, 800 + i));
        let filler = format!(
            "{} {} {}",
            word(b, 900 + i),
            word(a, 1000 + i),
            word(b, 1100 + i)
        );
        let (ranked, freq_correct) = match i {
            0..=19 => (vec![correct.clone(), no_cm.clone(), filler], 60 + 5 * i),
            20..=34 => (
                vec![no_cm.clone(), correct.clone(), filler],
                60 + 5 * (i - 20),
            ),
            _ => (
                vec![with_cm, correct.clone(), no_cm.clone()],
                150 + 5 * (i - 35),
            ),
        };
        let mut text = format!("{correct} ({sf}) ").repeat(freq_correct);
        text.push_str(&format!("{no_cm} ({sf}) ").repeat(3));
        corpus.push(Document::new(doc_id.clone(), text));
        gold.add_pair(&doc_id, &sf, &correct);
        lists.push(NBestList {
            doc_id,
            sf,
            sf_span: Span::new(0, 0),
            candidates: ranked
                .into_iter()
                .enumerate()
                .map(|(r, lf)| Candidate::new(lf, r))
                .collect(),
        });
    }
    let index = SuffixIndex::build(&corpus, false).expect("fixture corpus is valid");
    TrendFixture { lists, gold, index }
}

fn feature_trend() -> Check {
    let fx = trend_fixture();
    let mut lines = Vec::new();
    for base in 1..=4u32 {
        let mut f = Vec::new();
        let mut med = Vec::new();
        for id in [base, base + 4, base + 8] {
            let m = preset(id).unwrap();
            let reranked: Vec<RerankedList> = fx
                .lists
                .iter()
                .map(|l| rerank::rerank(l, &m, Some(&fx.index)))
                .collect();
            let report = evaluate(&eval::chosen_predictions(&reranked), &fx.gold)
                .map_err(|e| e.to_string())?;
            f.push(report.f1);
            med.push(
                confidence_summary(&reranked, &fx.gold)
                    .map_err(|e| format!("model {id}: {e}"))?
                    .median_prob_correct,
            );
        }
        ensure(f[2] >= f[1] && f[1] >= f[0], || {
            format!("models {base}/{}/{}: F = {f:?}", base + 4, base + 8)
        })?;
        ensure(med[2] > med[0], || {
            format!("models {base}/{}: median sigma {med:?}", base + 8)
        })?;
        lines.push(format!(
            "{}/{}/{}: F {:.2}<={:.2}<={:.2}, median {:.3}<{:.3}",
            base,
            base + 4,
            base + 8,
            f[0],
            f[1],
            f[2],
            med[0],
            med[2]
        ));
    }
    let labelled = label_instances(&fx.lists, &fx.gold, Some(&fx.index));
    ensure(
        labelled
            .iter()
            .filter(|i| i.label == 1)
            .all(|i| i.features.charmatch == 1),
        || "a correct candidate lacks charmatch".into(),
    )?;
    Ok(lines.join("; "))
}

fn evaluator_arithmetic() -> Check {
    let mut gold = GoldSet::new("g");
    gold.add_pair("a", "HSP", "heat shock protein");
    gold.add_pair("a", "HC", "healthy controls");
    gold.add_pair("b", "TNF", "tumor necrosis factor");
    let mut preds = Predictions::new();
    for (d, s, l) in [
        ("a", "HSP", "heat shock protein"),
        ("a", "HC", "controls"),
        ("b", "TNF", "tumor necrosis factor"),
    ] {
        preds
            .entry(d.into())
            .or_default()
            .insert((s.into(), l.into()));
    }
    let r = evaluate(&preds, &gold).map_err(|e| e.to_string())?;
    ensure((r.tp, r.fp, r.fn_) == (2, 1, 1), || format!("{r:?}"))?;
    let third = 2.0 / 3.0;
    ensure(
        r.precision == third && r.recall == third && r.f1 == third,
        || format!("{r:?}"),
    )?;

    let list = |doc: &str, sf: &str, lfs: &[&str]| NBestList {
        doc_id: doc.into(),
        sf: sf.into(),
        sf_span: Span::new(0, 0),
        candidates: lfs
            .iter()
            .enumerate()
            .map(|(i, l)| Candidate::new(*l, i))
            .collect(),
    };
    let lists = [
        list("a", "HSP", &["heat shock protein", "shock protein"]),
        list("a", "HC", &["healthy controls"]),
        list(
            "b",
            "TNF",
            &["factor", "necrosis factor", "tumor necrosis factor"],
        ),
    ];
    let h = rank_histogram(&lists, &gold, 5);
    ensure(h.counts == [2, 0, 1, 0, 0], || format!("{:?}", h.counts))?;

    let mut probs = [0.8, 0.6];
    let m = median(&mut probs).unwrap();
    ensure(m == (0.6 + 0.8) / 2.0 && (m - 0.7).abs() < 1e-15, || {
        format!("median {m}")
    })?;
    let chosen = |l: &NBestList, prob: f64| RerankedList {
        source: l.clone(),
        scored: vec![ScoredCandidate {
            candidate: l.candidates[0].clone(),
            features: FeatureVector::new(0, true, 0),
            z: (prob / (1.0 - prob)).ln(),
            prob,
        }],
    };
    let c = confidence_summary(&[chosen(&lists[0], 0.6), chosen(&lists[1], 0.8)], &gold)
        .map_err(|e| e.to_string())?;
    ensure(c.median_prob_correct == m && c.n_correct == 2, || {
        format!("{c:?}")
    })?;
    Ok(format!(
        "P=R=F={third}; histogram {:?}; median {m}",
        h.counts
    ))
}

fn run_pipeline(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let adi = |args: &[&str]| -> Result<(), String> {
        let o = Command::new(env!("CARGO_BIN_EXE_adi"))
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        if o.status.success() {
            Ok(())
        } else {
            Err(format!(
                "adi {args:?}: {}",
                String::from_utf8_lossy(&o.stderr)
            ))
        }
    };
    let p = |name: &str| dir.join(name).to_str().unwrap().to_string();
    let docs = fixture("docs.tsv");
    let docs = docs.to_str().unwrap();
    let bioc = fixture("minimal.xml");
    let bioc = bioc.to_str().unwrap();
    let gold = fixture("gold.tsv");
    let gold = gold.to_str().unwrap();
    adi(&["index", docs, bioc, "-o", &p("corpus.idx")])?;
    adi(&["extract", docs, "-o", &p("pairs.tsv")])?;
    adi(&["extract", "--nbest", "5", docs, "-o", &p("nbest.jsonl")])?;
    adi(&[
        "rerank",
        &p("nbest.jsonl"),
        "--model",
        "9",
        "--index",
        &p("corpus.idx"),
        "-o",
        &p("reranked.jsonl"),
    ])?;
    adi(&[
        "eval",
        "--gold",
        gold,
        "--reranked",
        &p("reranked.jsonl"),
        "--json",
        &p("report.json"),
    ])?;
    adi(&[
        "eval",
        "--gold",
        gold,
        "--predictions",
        &p("pairs.tsv"),
        "--json",
        &p("pairs_report.json"),
    ])?;
    adi(&["extract", bioc, "-o", &p("bioc_pairs.tsv")])?;
    adi(&[
        "eval",
        "--gold",
        bioc,
        "--predictions",
        &p("bioc_pairs.tsv"),
        "--json",
        &p("bioc_report.json"),
    ])?;
    let mut out = Vec::new();
    for name in [
        "corpus.idx",
        "pairs.tsv",
        "nbest.jsonl",
        "reranked.jsonl",
        "report.json",
        "pairs_report.json",
        "bioc_pairs.tsv",
        "bioc_report.json",
    ] {
        let bytes = fs::read(dir.join(name)).map_err(|e| e.to_string())?;
        let bytes = String::from_utf8_lossy(&bytes)
            .replace(dir.to_str().unwrap(), "<dir>")
            .into_bytes();
        out.push((name.to_string(), bytes));
    }
    Ok(out)
}

fn end_to_end_determinism() -> Check {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = run_pipeline(a.path())?;
    let second = run_pipeline(b.path())?;
    for ((name, x), (_, y)) in first.iter().zip(&second) {
        ensure(x == y, || format!("{name} differs between runs"))?;
    }

    let idx_path = a.path().join("corpus.idx");
    let bytes = fs::read(&idx_path).map_err(|e| e.to_string())?;
    let loaded = SuffixIndex::load(&idx_path).map_err(|e| e.to_string())?;
    ensure(loaded.to_bytes() == bytes, || {
        "index re-serialization differs".into()
    })?;
    let docs = [Document::new("x", "herpes simplex virus (HSV) ".repeat(20))];
    let built = SuffixIndex::build(&docs, true).map_err(|e| e.to_string())?;
    let again = SuffixIndex::from_bytes(&built.to_bytes()).map_err(|e| e.to_string())?;
    ensure(
        again == built && again.to_bytes() == built.to_bytes(),
        || "in-memory round trip differs".into(),
    )?;
    Ok(format!(
        "{} output files byte-identical across two runs; index round-trips",
        first.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("suffix array counts equal naive scan", suffix_array_oracle),
        ("preset coefficient arithmetic", preset_arithmetic),
        ("charmatch overrides rank under model 5", charmatch_override),
        (
            "trainer recovers coefficients; gradient check",
            trainer_recovery,
        ),
        ("trained sign pattern", sign_pattern),
        ("extraction on worked examples", extraction_examples),
        (
            "more features do not lower F; higher median confidence",
            feature_trend,
        ),
        ("evaluator arithmetic", evaluator_arithmetic),
        ("end-to-end determinism", end_to_end_determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, f) in criteria {
        let result = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
