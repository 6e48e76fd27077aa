//! Threshold-free detection metrics and the evaluation protocols built on
//! them. Fake is the positive class.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::curation::{quartile_partition, ScoredSet, Strategy, QUARTILE_LABELS};
use crate::error::{Error, Result};
use crate::feature::FeatureSet;
use crate::probe::{predict_logits, ProbeModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub auc: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

fn check_finite(xs: &[f64], what: &str) -> Result<()> {
    match xs.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(format!("{what}[{i}]"))),
        None => Ok(()),
    }
}

/// Mann–Whitney statistic via the rank sum with average ranks for ties.
/// Ranks are kept doubled so the sum stays integral.
pub fn auc(fake_scores: &[f64], real_scores: &[f64]) -> Result<f64> {
    if fake_scores.is_empty() {
        return Err(Error::EmptyInput("fake scores"));
    }
    if real_scores.is_empty() {
        return Err(Error::EmptyInput("real scores"));
    }
    check_finite(fake_scores, "fake score")?;
    check_finite(real_scores, "real score")?;
    let mut all: Vec<(f64, bool)> = fake_scores
        .iter()
        .map(|&s| (s, true))
        .chain(real_scores.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i + 1;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        // Ranks i+1..=j average to (i+1+j)/2.
        let twice_avg = (i + 1 + j) as u128;
        let fakes = all[i..j].iter().filter(|p| p.1).count() as u128;
        twice_rank_sum += twice_avg * fakes;
        i = j;
    }
    let nf = fake_scores.len() as u128;
    let nr = real_scores.len() as u128;
    let twice_u = twice_rank_sum - nf * (nf + 1);
    Ok(twice_u as f64 / (2 * nf * nr) as f64)
}

pub fn evaluate(fake_scores: &[f64], real_scores: &[f64]) -> Result<EvalResult> {
    Ok(EvalResult {
        auc: auc(fake_scores, real_scores)?,
        n_pos: fake_scores.len(),
        n_neg: real_scores.len(),
    })
}

/// Mean and sample (n−1) standard deviation; std is 0 for one value.
pub fn aggregate_seeds(aucs: &[f64]) -> Result<(f64, f64)> {
    if aucs.is_empty() {
        return Err(Error::EmptyInput("aggregate_seeds"));
    }
    check_finite(aucs, "auc")?;
    let n = aucs.len() as f64;
    let mean = aucs.iter().sum::<f64>() / n;
    if aucs.len() == 1 {
        return Ok((mean, 0.0));
    }
    let ss: f64 = aucs.iter().map(|a| (a - mean) * (a - mean)).sum();
    Ok((mean, libm::sqrt(ss / (n - 1.0))))
}

/// 1-based ranks with ties averaged.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && xs[idx[j]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// Pearson correlation of average ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::TooFewRecords {
            needed: 2,
            found: a.len(),
        });
    }
    check_finite(a, "a")?;
    check_finite(b, "b")?;
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::Numeric("spearman: constant input".into()));
    }
    Ok(sab / libm::sqrt(saa * sbb))
}

#[derive(Debug, Clone)]
pub struct TrainedProbe {
    pub train_tag: String,
    pub strategy: Strategy,
    pub seed: u64,
    pub model: ProbeModel,
}

#[derive(Debug, Clone)]
pub struct TestSplit {
    pub tag: String,
    pub fakes: FeatureSet,
    pub reals: FeatureSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub test_tag: String,
    /// Per seed, in ascending seed order.
    pub aucs: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub intra: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub train_tag: String,
    pub strategy: Strategy,
    pub seeds: Vec<u64>,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CrossConceptReport {
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
    pub warnings: Vec<String>,
}

/// Rows are (train tag, strategy) in order of first appearance; columns
/// follow `tests`. A row whose seeds differ from `seeds` is dropped and
/// recorded in `warnings`.
pub fn cross_concept_matrix(models: &[TrainedProbe], tests: &[TestSplit], seeds: &[u64]) -> Result<CrossConceptReport> {
    if tests.is_empty() {
        return Err(Error::EmptyInput("test splits"));
    }
    let mut expected: Vec<u64> = seeds.to_vec();
    expected.sort_unstable();
    expected.dedup();

    let mut order: Vec<(String, Strategy)> = Vec::new();
    let mut groups: BTreeMap<(String, Strategy), Vec<&TrainedProbe>> = BTreeMap::new();
    for m in models {
        let key = (m.train_tag.clone(), m.strategy);
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        let group = groups.entry(key).or_default();
        if group.iter().any(|g| g.seed == m.seed) {
            return Err(Error::Config(format!(
                "duplicate probe for ({}, {}, seed {})",
                m.train_tag, m.strategy, m.seed
            )));
        }
        group.push(m);
        for t in tests {
            if t.fakes.dim() != m.model.input_dim() || t.reals.dim() != m.model.input_dim() {
                return Err(Error::DimMismatch {
                    expected: m.model.input_dim(),
                    found: t.fakes.dim(),
                });
            }
        }
    }

    let mut report = CrossConceptReport {
        columns: tests.iter().map(|t| t.tag.clone()).collect(),
        ..Default::default()
    };
    for key in order {
        let mut group = groups.remove(&key).unwrap_or_default();
        group.sort_by_key(|g| g.seed);
        let got: Vec<u64> = group.iter().map(|g| g.seed).collect();
        if got != expected {
            report.warnings.push(format!(
                "dropped row ({}, {}): seeds {:?}, expected {:?}",
                key.0, key.1, got, expected
            ));
            continue;
        }
        let mut cells = Vec::with_capacity(tests.len());
        for t in tests {
            let mut aucs = Vec::with_capacity(group.len());
            for g in &group {
                // Logits rank identically to P(fake) without saturating at 1.
                let f = predict_logits(&g.model, &t.fakes)?;
                let r = predict_logits(&g.model, &t.reals)?;
                aucs.push(auc(&f, &r)?);
            }
            let (mean, std) = aggregate_seeds(&aucs)?;
            cells.push(Cell {
                test_tag: t.tag.clone(),
                aucs,
                mean,
                std,
                intra: t.tag == key.0,
            });
        }
        report.rows.push(Row {
            train_tag: key.0,
            strategy: key.1,
            seeds: got,
            cells,
        });
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuartileResult {
    pub label: String,
    pub result: EvalResult,
}

/// Each fake quality quartile against the full real test set, lowest first.
pub fn quartile_eval(
    model: &ProbeModel,
    test_fakes: &ScoredSet,
    test_reals: &FeatureSet,
) -> Result<[QuartileResult; 4]> {
    let bins = quartile_partition(test_fakes)?;
    let reals = predict_logits(model, test_reals)?;
    let mut out = Vec::with_capacity(4);
    for (bin, label) in bins.iter().zip(QUARTILE_LABELS) {
        let fakes = predict_logits(model, bin.set())?;
        out.push(QuartileResult {
            label: label.to_string(),
            result: evaluate(&fakes, &reals)?,
        });
    }
    Ok(out.try_into().expect("four quartiles"))
}

/// Pipe table with every column padded to its widest entry.
pub fn markdown_table(headers: &[String], rows: &[Vec<String>]) -> String {
    let width = |s: &str| s.chars().count();
    let mut widths: Vec<usize> = headers.iter().map(|h| width(h).max(3)).collect();
    for row in rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(width(c));
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::from("|");
        for (c, w) in cells.iter().zip(&widths) {
            let _ = write!(s, " {}{} |", c, " ".repeat(w - width(c)));
        }
        s.push('\n');
        s
    };
    let mut out = line(headers);
    out.push('|');
    for w in &widths {
        let _ = write!(out, " {} |", "-".repeat(*w));
    }
    out.push('\n');
    for row in rows {
        out.push_str(&line(row));
    }
    out
}

pub const INTRA_MARKER: &str = "*";

impl CrossConceptReport {
    /// Long format: one line per (row, column) cell.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("train,strategy,test,intra,n_seeds,auc_mean,auc_std,auc_mean_x100,auc_std_x100\n");
        for row in &self.rows {
            for c in &row.cells {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{:.6},{:.6},{:.2},{:.2}",
                    row.train_tag,
                    row.strategy,
                    c.test_tag,
                    c.intra,
                    c.aucs.len(),
                    c.mean,
                    c.std,
                    c.mean * 100.0,
                    c.std * 100.0
                );
            }
        }
        s
    }

    /// Train × test tables, one strategy row per train tag, ×100 and raw.
    pub fn to_markdown(&self) -> String {
        let mut headers = vec!["train".to_string(), "strategy".to_string()];
        headers.extend(self.columns.iter().cloned());
        let table = |scale: f64, prec: usize| {
            let rows: Vec<Vec<String>> = self
                .rows
                .iter()
                .map(|r| {
                    let mut cells = vec![r.train_tag.clone(), r.strategy.to_string()];
                    for c in &r.cells {
                        let mark = if c.intra { INTRA_MARKER } else { "" };
                        cells.push(format!(
                            "{:.*}±{:.*}{}",
                            prec,
                            c.mean * scale,
                            prec,
                            c.std * scale,
                            mark
                        ));
                    }
                    cells
                })
                .collect();
            markdown_table(&headers, &rows)
        };
        let mut s = String::from("AUC ×100, mean±std over seeds\n\n");
        s.push_str(&table(100.0, 1));
        s.push_str("\nAUC, mean±std over seeds\n\n");
        s.push_str(&table(1.0, 4));
        let _ = writeln!(s, "\n{INTRA_MARKER} intra-concept evaluation");
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}

pub fn quartiles_to_csv(results: &[QuartileResult]) -> String {
    let mut s = String::from("quartile,n_fake,n_real,auc,auc_x100\n");
    for q in results {
        let _ = writeln!(
            s,
            "\"{}\",{},{},{:.6},{:.2}",
            q.label,
            q.result.n_pos,
            q.result.n_neg,
            q.result.auc,
            q.result.auc * 100.0
        );
    }
    s
}

pub fn quartiles_to_markdown(results: &[QuartileResult]) -> String {
    let headers = ["quartile", "n_fake", "n_real", "AUC", "AUC ×100"].map(String::from);
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|q| {
            vec![
                q.label.clone(),
                q.result.n_pos.to_string(),
                q.result.n_neg.to_string(),
                format!("{:.4}", q.result.auc),
                format!("{:.1}", q.result.auc * 100.0),
            ]
        })
        .collect();
    markdown_table(&headers, &rows)
}
