//! Aligned plain-text tables for the evaluation reports.

use std::fmt::Write;

use super::{CharmatchReport, ConfidenceReport, EvalReport, RankHistogram};

/// Right-aligned table with a header rule, first column left-aligned.
#[derive(Debug, Clone, Default)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row<S: Into<String>>(&mut self, cells: impl IntoIterator<Item = S>) -> &mut Self {
        self.rows.push(cells.into_iter().map(Into::into).collect());
        self
    }

    pub fn render(&self) -> String {
        let cols = self
            .rows
            .iter()
            .map(Vec::len)
            .chain([self.header.len()])
            .max()
            .unwrap_or(0);
        let mut widths = vec![0; cols];
        for r in self.rows.iter().chain([&self.header]) {
            for (i, c) in r.iter().enumerate() {
                widths[i] = widths[i].max(c.chars().count());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, cells: &[String]| {
            let mut parts = Vec::with_capacity(cols);
            for (i, w) in widths.iter().enumerate() {
                let c = cells.get(i).map_or("", String::as_str);
                parts.push(if i == 0 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                });
            }
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(&mut out, &self.header);
        let total = widths.iter().sum::<usize>() + 2 * cols.saturating_sub(1);
        let _ = writeln!(out, "{}", "-".repeat(total));
        for r in &self.rows {
            line(&mut out, r);
        }
        out
    }
}

fn opt(p: Option<f64>) -> String {
    p.map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}"))
}

/// Precision, recall and F per named system or benchmark.
pub fn f1_table(rows: &[(&str, &EvalReport)]) -> String {
    let mut t = Table::new(["Benchmark", "TP", "FP", "FN", "P", "R", "F"]);
    for (name, r) in rows {
        t.row([
            name.to_string(),
            r.tp.to_string(),
            r.fp.to_string(),
            r.fn_.to_string(),
            format!("{:.3}", r.precision),
            format!("{:.3}", r.recall),
            format!("{:.3}", r.f1),
        ]);
    }
    t.render()
}

/// Correct candidates by n-best position, one column per histogram.
pub fn rank_table(columns: &[(&str, &RankHistogram)]) -> String {
    let mut header = vec!["Rank".to_string()];
    header.extend(columns.iter().map(|(n, _)| n.to_string()));
    let mut t = Table::new(header);
    let bins = columns
        .iter()
        .map(|(_, h)| h.counts.len())
        .max()
        .unwrap_or(0);
    for rank in 0..bins {
        let mut row = vec![rank.to_string()];
        row.extend(
            columns
                .iter()
                .map(|(_, h)| h.counts.get(rank).map_or(String::new(), usize::to_string)),
        );
        t.row(row);
    }
    t.render()
}

/// `Pr(correct | charmatch)` and `Pr(correct | not charmatch)`.
pub fn charmatch_table(rows: &[(&str, &CharmatchReport)]) -> String {
    let mut t = Table::new([
        "Benchmark",
        "not charmatch",
        "charmatch",
        "n(not)",
        "n(charmatch)",
    ]);
    for (name, r) in rows {
        t.row([
            name.to_string(),
            opt(r.p_correct_given_not),
            opt(r.p_correct_given_charmatch),
            r.n_not.to_string(),
            r.n_charmatch.to_string(),
        ]);
    }
    t.render()
}

/// Median `sigmoid(z)` of correct chosen candidates.
pub fn confidence_table(rows: &[(&str, &ConfidenceReport)]) -> String {
    let mut t = Table::new(["Model", "median sigma(z)", "n correct"]);
    for (name, r) in rows {
        t.row([
            name.to_string(),
            format!("{:.3}", r.median_prob_correct),
            r.n_correct.to_string(),
        ]);
    }
    t.render()
}
