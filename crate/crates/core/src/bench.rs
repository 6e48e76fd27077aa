//! Synthetic cross-concept benchmark.
//!
//! Reals of concept `c` are `N(μ_c, I)`. A fake is a fresh draw from the same
//! distribution shifted by `δ·u_s + s·u_c`, where `u_s` is shared by every
//! concept, `u_c` is specific to `c`, and the severity `s` is exponential and
//! clipped. All directions are mutually orthonormal.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::curation::{build_curated_split, CurationPlan, HoldOut, Strategy};
use crate::error::{Error, Result};
use crate::eval::{
    aggregate_seeds, cross_concept_matrix, spearman, Cell, CrossConceptReport, Row, TestSplit, TrainedProbe,
};
use crate::feature::{FeatureRecord, FeatureSet, Label};
use crate::gmm::{fit_em, score_set, EmConfig};
use crate::probe::{train_probe, TrainConfig};
use crate::rng;

const BASIS_STREAM: u64 = 0x6261_7369_73;
const DATA_STREAM: u64 = 0x6461_7461;
const ORTHO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptSpec {
    pub name: String,
    pub mean: Vec<f64>,
    pub artifact: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub d: usize,
    pub concepts: Vec<ConceptSpec>,
    pub shared_artifact: Vec<f64>,
    pub delta: f64,
    pub severity_mean: f64,
    pub severity_max: f64,
    pub n_real: usize,
    pub n_fake: usize,
    pub seed: u64,
}

pub const DEFAULT_SEPARATION: f64 = 3.0;

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self::orthonormal(16, &["alpha", "beta"], DEFAULT_SEPARATION, 0).expect("default spec")
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// `n` orthonormal vectors in `R^d` by Gram–Schmidt on seeded Gaussian draws.
pub fn random_orthonormal(d: usize, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n > d {
        return Err(Error::Config(format!(
            "cannot fit {n} orthonormal vectors in {d} dimensions"
        )));
    }
    let mut r = rng::stream(seed, BASIS_STREAM);
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(n);
    while out.len() < n {
        let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut r)).collect();
        // Two passes keep the result orthogonal to working precision.
        for _ in 0..2 {
            for q in &out {
                let p = dot(&v, q);
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= p * b);
            }
        }
        let n = norm(&v);
        if n > 1e-6 {
            out.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    Ok(out)
}

impl SyntheticSpec {
    /// Spec built on a seeded orthonormal frame: `u_s = q_0`,
    /// `μ_c = sep·q_{1+c}`, `u_c = q_{1+C+c}`.
    pub fn orthonormal(d: usize, names: &[&str], separation: f64, seed: u64) -> Result<Self> {
        let c = names.len();
        let q = random_orthonormal(d, 1 + 2 * c, seed)?;
        let concepts = names
            .iter()
            .enumerate()
            .map(|(i, name)| ConceptSpec {
                name: name.to_string(),
                mean: q[1 + i].iter().map(|v| v * separation).collect(),
                artifact: q[1 + c + i].clone(),
            })
            .collect();
        let spec = Self {
            d,
            concepts,
            shared_artifact: q[0].clone(),
            delta: 0.8,
            severity_mean: 4.0,
            severity_max: 8.0,
            n_real: 4000,
            n_fake: 4000,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("synthetic spec: {m}")));
        if self.d == 0 {
            return Err(Error::ZeroDim);
        }
        if self.concepts.is_empty() {
            return bad("no concepts".into());
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return bad("delta must be finite and non-negative".into());
        }
        if !(self.severity_mean > 0.0 && self.severity_max >= 0.0 && self.severity_max.is_finite()) {
            return bad("severity_mean must be positive and severity_max finite and non-negative".into());
        }
        if self.n_real == 0 || self.n_fake == 0 {
            return bad("n_real and n_fake must be positive".into());
        }
        let mut names: Vec<&str> = self.concepts.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) || names.iter().any(|n| n.is_empty()) {
            return bad("concept names must be non-empty and distinct".into());
        }
        let mut dirs: Vec<(&str, &[f64])> = vec![("shared_artifact", &self.shared_artifact)];
        for c in &self.concepts {
            if c.mean.len() != self.d {
                return bad(format!("mean of `{}` has length {}", c.name, c.mean.len()));
            }
            dirs.push((&c.name, &c.artifact));
        }
        for (name, v) in &dirs {
            if v.len() != self.d {
                return bad(format!("artifact `{name}` has length {}", v.len()));
            }
            if (norm(v) - 1.0).abs() > ORTHO_TOL {
                return bad(format!("artifact `{name}` is not a unit vector"));
            }
        }
        for (i, (a, u)) in dirs.iter().enumerate() {
            for (b, v) in &dirs[i + 1..] {
                if dot(u, v).abs() > ORTHO_TOL {
                    return bad(format!("artifacts `{a}` and `{b}` are not orthogonal"));
                }
            }
            for (j, ci) in self.concepts.iter().enumerate() {
                for cj in &self.concepts[j + 1..] {
                    let diff: Vec<f64> = ci.mean.iter().zip(&cj.mean).map(|(x, y)| x - y).collect();
                    if dot(u, &diff).abs() > ORTHO_TOL {
                        return bad(format!(
                            "artifact `{a}` is not orthogonal to μ_{} − μ_{}",
                            ci.name, cj.name
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn concept(&self, name: &str) -> Result<&ConceptSpec> {
        self.concepts
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::UnknownConcept(name.to_string()))
    }
}

/// Fake ids end in `-s<severity>`.
pub fn severity_from_id(id: &str) -> Option<f64> {
    id.rsplit_once("-s")?.1.parse().ok()
}

/// Reals, fakes, and the true severity of each fake.
pub fn generate_concept<R: Rng + ?Sized>(
    spec: &SyntheticSpec,
    concept: &str,
    rng: &mut R,
) -> Result<(FeatureSet, FeatureSet, Vec<f64>)> {
    let c = spec.concept(concept)?;
    let draw = |rng: &mut R| -> Vec<f64> {
        c.mean
            .iter()
            .map(|m| {
                let z: f64 = StandardNormal.sample(&mut *rng);
                m + z
            })
            .collect()
    };
    let mut reals = FeatureSet::new(spec.d)?;
    for i in 0..spec.n_real {
        let v = draw(rng);
        reals.push(FeatureRecord::new(
            format!("{concept}-real-{i:05}"),
            Label::Real,
            concept,
            "camera",
            v.iter().map(|&x| x as f32).collect(),
        ))?;
    }
    let mut fakes = FeatureSet::new(spec.d)?;
    let mut severities = Vec::with_capacity(spec.n_fake);
    for i in 0..spec.n_fake {
        let mut v = draw(rng);
        let e: f64 = Exp1.sample(&mut *rng);
        let s = (e * spec.severity_mean).clamp(0.0, spec.severity_max);
        for k in 0..spec.d {
            v[k] += spec.delta * spec.shared_artifact[k] + s * c.artifact[k];
        }
        fakes.push(FeatureRecord::new(
            format!("{concept}-fake-{i:05}-s{s}"),
            Label::Fake,
            concept,
            "synthetic",
            v.iter().map(|&x| x as f32).collect(),
        ))?;
        severities.push(s);
    }
    Ok((reals, fakes, severities))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub plan: CurationPlan,
    pub em: EmConfig,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            plan: CurationPlan {
                pool_size: 4000,
                test_size: 400,
                k: 2000,
                seed: 0,
                hold_out: HoldOut::BeforeSelection,
            },
            em: EmConfig {
                components: 4,
                ..EmConfig::default()
            },
            train: TrainConfig {
                hidden: Vec::new(),
                ..TrainConfig::default()
            },
            seeds: vec![0, 1, 2],
        }
    }
}

impl ExperimentConfig {
    /// Pool size follows `n_fake`; test and k keep their
    /// proportions to it.
    pub fn scaled_to(spec: &SyntheticSpec) -> Self {
        let mut cfg = Self::default();
        let n = spec.n_fake;
        cfg.plan.pool_size = n;
        cfg.plan.test_size = (n / 10).max(1);
        cfg.plan.k = (n / 2).max(1);
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedDiagnostics {
    pub seed: u64,
    pub concept: String,
    pub spearman_qc_vs_neg_severity: f64,
    pub mean_severity_qc_top_k: f64,
    pub mean_severity_random_k: f64,
    /// Cosine between the linear probe's weights and the shared artifact;
    /// absent for probes with hidden layers.
    pub cos_shared_qc: Option<f64>,
    pub cos_shared_random: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub cross_qc: f64,
    pub cross_random: f64,
    pub cross_delta: f64,
    pub intra_qc: f64,
    pub intra_random: f64,
    pub intra_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentProvenance {
    pub spec: SyntheticSpec,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub matrix: CrossConceptReport,
    pub summary: Summary,
    pub diagnostics: Vec<SeedDiagnostics>,
    pub provenance: ExperimentProvenance,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn cosine_with(w: &[f64], u: &[f64]) -> f64 {
    dot(w, u) / norm(w)
}

struct SeedRun {
    report: CrossConceptReport,
    diagnostics: Vec<SeedDiagnostics>,
}

fn run_seed(spec: &SyntheticSpec, cfg: &ExperimentConfig, seed: u64) -> Result<SeedRun> {
    let plan = CurationPlan {
        seed,
        ..cfg.plan.clone()
    };
    let em = EmConfig { seed, ..cfg.em.clone() };
    let train = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let mut tests = Vec::with_capacity(spec.concepts.len());
    let mut probes = Vec::new();
    let mut diagnostics = Vec::new();
    for (ci, concept) in spec.concepts.iter().enumerate() {
        let mut r = rng::stream(spec.seed.wrapping_add(seed), DATA_STREAM + ci as u64);
        let (reals, fakes, severity) = generate_concept(spec, &concept.name, &mut r)?;
        let (gmm, _) = fit_em(&reals, &em)?;
        let scored = score_set(&gmm, &fakes)?;
        let neg: Vec<f64> = severity.iter().map(|s| -s).collect();
        let rho = spearman(scored.scores(), &neg)?;
        let by_id: BTreeMap<&str, f64> = fakes
            .iter()
            .map(|f| f.id.as_str())
            .zip(severity.iter().copied())
            .collect();
        let mut sev_means = [0.0; 2];
        let mut cosines = [None; 2];
        for (si, strategy) in [Strategy::Qc, Strategy::Random].into_iter().enumerate() {
            let split = build_curated_split(&scored, &reals, &plan, strategy)?;
            let picked: Vec<f64> = split.train_fake.iter().map(|f| by_id[f.id.as_str()]).collect();
            sev_means[si] = mean(&picked);
            let (model, _) = train_probe(&split, &train)?;
            if model.layers() == 1 {
                cosines[si] = Some(cosine_with(model.layer(0).0, &spec.shared_artifact));
            }
            if si == 0 {
                tests.push(TestSplit {
                    tag: concept.name.clone(),
                    fakes: split.test_fake.clone(),
                    reals: split.test_real.clone(),
                });
            }
            probes.push(TrainedProbe {
                train_tag: concept.name.clone(),
                strategy,
                seed,
                model,
            });
        }
        diagnostics.push(SeedDiagnostics {
            seed,
            concept: concept.name.clone(),
            spearman_qc_vs_neg_severity: rho,
            mean_severity_qc_top_k: sev_means[0],
            mean_severity_random_k: sev_means[1],
            cos_shared_qc: cosines[0],
            cos_shared_random: cosines[1],
        });
    }
    let report = cross_concept_matrix(&probes, &tests, &[seed])?;
    Ok(SeedRun { report, diagnostics })
}

/// Per-seed matrices share layout; cells gather one AUC per seed.
fn combine(runs: &[SeedRun], seeds: &[u64]) -> Result<CrossConceptReport> {
    let first = &runs[0].report;
    let mut out = CrossConceptReport {
        columns: first.columns.clone(),
        rows: Vec::with_capacity(first.rows.len()),
        warnings: runs.iter().flat_map(|r| r.report.warnings.iter().cloned()).collect(),
    };
    for (ri, row) in first.rows.iter().enumerate() {
        let mut cells = Vec::with_capacity(row.cells.len());
        for (ci, cell) in row.cells.iter().enumerate() {
            let aucs: Vec<f64> = runs.iter().map(|r| r.report.rows[ri].cells[ci].aucs[0]).collect();
            let (m, s) = aggregate_seeds(&aucs)?;
            cells.push(Cell {
                test_tag: cell.test_tag.clone(),
                aucs,
                mean: m,
                std: s,
                intra: cell.intra,
            });
        }
        out.rows.push(Row {
            train_tag: row.train_tag.clone(),
            strategy: row.strategy,
            seeds: seeds.to_vec(),
            cells,
        });
    }
    Ok(out)
}

pub fn summarize(matrix: &CrossConceptReport) -> Summary {
    let pick = |strategy: Strategy, intra: bool| -> f64 {
        let v: Vec<f64> = matrix
            .rows
            .iter()
            .filter(|r| r.strategy == strategy)
            .flat_map(|r| r.cells.iter().filter(|c| c.intra == intra).map(|c| c.mean))
            .collect();
        if v.is_empty() {
            f64::NAN
        } else {
            mean(&v)
        }
    };
    let (cq, cr) = (pick(Strategy::Qc, false), pick(Strategy::Random, false));
    let (iq, ir) = (pick(Strategy::Qc, true), pick(Strategy::Random, true));
    Summary {
        cross_qc: cq,
        cross_random: cr,
        cross_delta: cq - cr,
        intra_qc: iq,
        intra_random: ir,
        intra_delta: iq - ir,
    }
}

/// Seeds run independently: each regenerates data, refits the mixture,
/// redraws the curation, and retrains.
pub fn run_experiment(spec: &SyntheticSpec, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_with(spec, cfg, |s| run_seed(spec, cfg, s).map(|r| (r.report, r.diagnostics)))
}

/// As [`run_experiment`], with the per-seed work supplied by the caller
/// (e.g. to run seeds in parallel and hand back results in seed order).
pub fn run_experiment_with<F>(spec: &SyntheticSpec, cfg: &ExperimentConfig, mut per_seed: F) -> Result<ExperimentReport>
where
    F: FnMut(u64) -> Result<(CrossConceptReport, Vec<SeedDiagnostics>)>,
{
    spec.validate()?;
    if cfg.seeds.is_empty() {
        return Err(Error::EmptyInput("seeds"));
    }
    let mut runs = Vec::with_capacity(cfg.seeds.len());
    for &s in &cfg.seeds {
        let (report, diagnostics) = per_seed(s)?;
        runs.push(SeedRun { report, diagnostics });
    }
    let matrix = combine(&runs, &cfg.seeds)?;
    Ok(ExperimentReport {
        summary: summarize(&matrix),
        matrix,
        diagnostics: runs.into_iter().flat_map(|r| r.diagnostics).collect(),
        provenance: ExperimentProvenance {
            spec: spec.clone(),
            config: cfg.clone(),
        },
    })
}

/// One seed of [`run_experiment`], for callers that schedule seeds themselves.
pub fn run_single_seed(
    spec: &SyntheticSpec,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<(CrossConceptReport, Vec<SeedDiagnostics>)> {
    spec.validate()?;
    run_seed(spec, cfg, seed).map(|r| (r.report, r.diagnostics))
}

impl ExperimentReport {
    pub fn to_csv(&self) -> String {
        self.matrix.to_csv()
    }

    pub fn to_markdown(&self) -> String {
        let mut s = self.matrix.to_markdown();
        let s4 = |v: f64| format!("{v:.4}");
        let _ = writeln!(s, "\nsummary\n");
        let headers = ["", "qc", "random", "qc − random"].map(String::from);
        let rows = vec![
            vec![
                "cross-concept".into(),
                s4(self.summary.cross_qc),
                s4(self.summary.cross_random),
                s4(self.summary.cross_delta),
            ],
            vec![
                "intra-concept".into(),
                s4(self.summary.intra_qc),
                s4(self.summary.intra_random),
                s4(self.summary.intra_delta),
            ],
        ];
        s.push_str(&crate::eval::markdown_table(&headers, &rows));
        let _ = writeln!(s, "\ndiagnostics\n");
        let headers = [
            "seed",
            "concept",
            "spearman(qc, −severity)",
            "severity top-k",
            "severity random-k",
            "cos(w, u_s) qc",
            "cos(w, u_s) random",
        ]
        .map(String::from);
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), s4);
        let rows: Vec<Vec<String>> = self
            .diagnostics
            .iter()
            .map(|d| {
                vec![
                    d.seed.to_string(),
                    d.concept.clone(),
                    s4(d.spearman_qc_vs_neg_severity),
                    s4(d.mean_severity_qc_top_k),
                    s4(d.mean_severity_random_k),
                    opt(d.cos_shared_qc),
                    opt(d.cos_shared_random),
                ]
            })
            .collect();
        s.push_str(&crate::eval::markdown_table(&headers, &rows));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec(names: &[&str]) -> SyntheticSpec {
        SyntheticSpec {
            n_real: 600,
            n_fake: 600,
            ..SyntheticSpec::orthonormal(16, names, DEFAULT_SEPARATION, 5).unwrap()
        }
    }

    #[test]
    fn default_spec_is_valid_and_orthonormal() {
        let s = SyntheticSpec::default();
        assert_eq!(
            (s.d, s.delta, s.severity_max, s.n_real, s.n_fake),
            (16, 0.8, 8.0, 4000, 4000)
        );
        assert_eq!(s.concepts.len(), 2);
        s.validate().unwrap();
        let mut broken = s.clone();
        broken.concepts[1].artifact = broken.shared_artifact.clone();
        assert!(broken.validate().is_err());
        let mut tilted = s.clone();
        tilted.concepts[0].mean[0] += 0.1;
        assert!(tilted.validate().is_err());
        let q = random_orthonormal(5, 5, 3).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot(&q[i], &q[j]) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn generation_is_seeded_and_tagged() {
        let spec = small_spec(&["a", "b"]);
        let g = |seed| generate_concept(&spec, "a", &mut rng::stream(seed, 0)).unwrap();
        let (r1, f1, s1) = g(1);
        let (r2, f2, s2) = g(1);
        assert_eq!((r1.clone(), f1.clone(), s1.clone()), (r2, f2, s2));
        assert_ne!(g(2).1, f1);
        for (rec, s) in f1.iter().zip(&s1) {
            assert_eq!(severity_from_id(&rec.id), Some(*s));
            assert!((0.0..=8.0).contains(s));
        }
        assert_eq!(r1.len(), 600);
        assert!(matches!(
            generate_concept(&spec, "zzz", &mut rng::stream(0, 0)),
            Err(Error::UnknownConcept(_))
        ));
    }

    fn mean_vec(set: &FeatureSet) -> Vec<f64> {
        let mut m = vec![0.0; set.dim()];
        for r in set.iter() {
            m.iter_mut().zip(&r.vector).for_each(|(a, &b)| *a += f64::from(b));
        }
        m.iter_mut().for_each(|v| *v /= set.len() as f64);
        m
    }

    #[test]
    fn degenerate_spec_makes_indistinguishable_fakes() {
        let spec = SyntheticSpec {
            delta: 0.0,
            severity_max: 0.0,
            ..SyntheticSpec::default()
        };
        let (r, f, _) = generate_concept(&spec, "alpha", &mut rng::stream(0, 0)).unwrap();
        let diff: Vec<f64> = mean_vec(&f).iter().zip(mean_vec(&r)).map(|(a, b)| a - b).collect();
        let bound = 3.0 * libm::sqrt(2.0 * 16.0 / 4000.0);
        assert!(norm(&diff) < bound, "{} vs {bound}", norm(&diff));
    }

    #[test]
    fn population_shift_matches_construction() {
        let spec = SyntheticSpec::default();
        let (r, f, s) = generate_concept(&spec, "beta", &mut rng::stream(7, 0)).unwrap();
        // E[min(mean·E, max)] for E ~ Exp(1): mean·(1 − exp(−max/mean)).
        let es = spec.severity_mean * (1.0 - libm::exp(-spec.severity_max / spec.severity_mean));
        assert!((mean(&s) - es).abs() < 4.0 * 2.5 / libm::sqrt(4000.0));
        let uc = &spec.concepts[1].artifact;
        let want: Vec<f64> = (0..16)
            .map(|k| spec.delta * spec.shared_artifact[k] + es * uc[k])
            .collect();
        let got: Vec<f64> = mean_vec(&f).iter().zip(mean_vec(&r)).map(|(a, b)| a - b).collect();
        let err: Vec<f64> = got.iter().zip(&want).map(|(a, b)| a - b).collect();
        // Noise: √(2/n) per axis plus the severity spread along u_c.
        assert!(
            norm(&err) < 4.0 * libm::sqrt(2.0 * 16.0 / 4000.0 + 6.0 / 4000.0),
            "{}",
            norm(&err)
        );
    }

    #[test]
    fn single_concept_report_is_intra_only() {
        let spec = small_spec(&["solo"]);
        let cfg = ExperimentConfig {
            seeds: vec![0],
            ..ExperimentConfig::scaled_to(&spec)
        };
        let rep = run_experiment(&spec, &cfg).unwrap();
        assert_eq!(rep.matrix.rows.len(), 2);
        assert!(rep.matrix.rows.iter().all(|r| r.cells.len() == 1 && r.cells[0].intra));
        assert!(rep.summary.cross_qc.is_nan());
    }

    #[test]
    fn two_concepts_layout_and_determinism() {
        let spec = small_spec(&["a", "b"]);
        let cfg = ExperimentConfig {
            seeds: vec![0, 1],
            ..ExperimentConfig::scaled_to(&spec)
        };
        let a = run_experiment(&spec, &cfg).unwrap();
        assert_eq!(a.matrix.rows.len(), 4);
        assert_eq!(a.matrix.columns.len(), 2);
        assert!(a
            .matrix
            .rows
            .iter()
            .all(|r| r.seeds == [0, 1] && r.cells.iter().all(|c| c.aucs.len() == 2)));
        assert_eq!(a.diagnostics.len(), 4);
        let b = run_experiment(&spec, &cfg).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.to_markdown(), b.to_markdown());
        for d in &a.diagnostics {
            assert!(d.mean_severity_qc_top_k < d.mean_severity_random_k);
            assert!(d.cos_shared_qc.is_some());
        }
    }

    #[test]
    fn scaled_plan() {
        let cfg = ExperimentConfig::scaled_to(&SyntheticSpec::default());
        assert_eq!((cfg.plan.pool_size, cfg.plan.test_size, cfg.plan.k), (4000, 400, 2000));
        assert_eq!(cfg.em.components, 4);
        assert!(cfg.train.hidden.is_empty());
    }

    /// Newton–Raphson logistic regression with intercept, run to convergence.
    fn logistic_oracle(xs: &[Vec<f64>], ys: &[f64]) -> Vec<f64> {
        let p = xs[0].len() + 1;
        let aug = |x: &[f64]| -> Vec<f64> { core::iter::once(1.0).chain(x.iter().copied()).collect() };
        let mut beta = vec![0.0; p];
        for _ in 0..50 {
            let mut grad = vec![0.0; p];
            let mut hess = vec![vec![0.0; p]; p];
            for (x, &y) in xs.iter().zip(ys) {
                let z = aug(x);
                let eta: f64 = z.iter().zip(&beta).map(|(a, b)| a * b).sum();
                let mu = 1.0 / (1.0 + (-eta).exp());
                for i in 0..p {
                    grad[i] += (y - mu) * z[i];
                    for j in 0..p {
                        hess[i][j] += mu * (1.0 - mu) * z[i] * z[j];
                    }
                }
            }
            // Solve hess · step = grad by Gaussian elimination with partial pivoting.
            let mut a: Vec<Vec<f64>> = hess
                .into_iter()
                .zip(&grad)
                .map(|(mut row, g)| {
                    row.push(*g);
                    row
                })
                .collect();
            for c in 0..p {
                let piv = (c..p).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
                a.swap(c, piv);
                for r in c + 1..p {
                    let f = a[r][c] / a[c][c];
                    for k in c..=p {
                        a[r][k] -= f * a[c][k];
                    }
                }
            }
            let mut step = vec![0.0; p];
            for r in (0..p).rev() {
                let tail: f64 = (r + 1..p).map(|k| a[r][k] * step[k]).sum();
                step[r] = (a[r][p] - tail) / a[r][r];
            }
            for (b, s) in beta.iter_mut().zip(&step) {
                *b += s;
            }
            if step.iter().map(|s| s.abs()).fold(0.0, f64::max) < 1e-10 {
                break;
            }
        }
        beta
    }

    fn brute_auc(pos: &[f64], neg: &[f64]) -> f64 {
        let mut twice = 0usize;
        for a in pos {
            for b in neg {
                twice += if a > b {
                    2
                } else if a == b {
                    1
                } else {
                    0
                };
            }
        }
        twice as f64 / (2 * pos.len() * neg.len()) as f64
    }

    // Intra-concept probes are compared with a converged logistic regression
    // fitted on every non-test record (no top-k or random-k truncation), scored
    // on the same held-out split.
    #[test]
    fn intra_auc_near_logistic_oracle_and_shared_alignment() {
        let spec = SyntheticSpec::default();
        let cfg = ExperimentConfig::scaled_to(&spec);
        let report = run_experiment(&spec, &cfg).unwrap();
        for (ci, concept) in spec.concepts.iter().enumerate() {
            let mut oracle_aucs = Vec::new();
            for &seed in &cfg.seeds {
                let mut r = rng::stream(spec.seed.wrapping_add(seed), DATA_STREAM + ci as u64);
                let (reals, fakes, _) = generate_concept(&spec, &concept.name, &mut r).unwrap();
                // The held-out partition does not depend on the scores.
                let flat = crate::curation::ScoredSet::new(fakes.clone(), vec![0.0; fakes.len()]).unwrap();
                let plan = CurationPlan {
                    seed,
                    ..cfg.plan.clone()
                };
                let split = build_curated_split(&flat, &reals, &plan, Strategy::Qc).unwrap();
                let mut xs = Vec::new();
                let mut ys = Vec::new();
                for (set, y) in [(&reals, 0.0), (&fakes, 1.0)] {
                    for rec in set {
                        if !split.test_real.contains_id(&rec.id) && !split.test_fake.contains_id(&rec.id) {
                            xs.push(rec.vector_f64());
                            ys.push(y);
                        }
                    }
                }
                let beta = logistic_oracle(&xs, &ys);
                let score = |set: &FeatureSet| -> Vec<f64> {
                    set.iter()
                        .map(|rec| beta[0] + rec.vector_f64().iter().zip(&beta[1..]).map(|(a, b)| a * b).sum::<f64>())
                        .collect()
                };
                oracle_aucs.push(brute_auc(&score(&split.test_fake), &score(&split.test_real)));
            }
            let oracle = oracle_aucs.iter().sum::<f64>() / oracle_aucs.len() as f64;
            for row in report.matrix.rows.iter().filter(|r| r.train_tag == concept.name) {
                let cell = row.cells.iter().find(|c| c.intra).unwrap();
                assert!(
                    cell.mean >= oracle - 0.03 && cell.mean <= oracle + 0.01,
                    "{} {}: probe {} vs oracle {}",
                    concept.name,
                    row.strategy,
                    cell.mean,
                    oracle
                );
            }
        }
        let n = report.diagnostics.len() as f64;
        let qc: f64 = report.diagnostics.iter().map(|d| d.cos_shared_qc.unwrap()).sum::<f64>() / n;
        let random: f64 = report
            .diagnostics
            .iter()
            .map(|d| d.cos_shared_random.unwrap())
            .sum::<f64>()
            / n;
        assert!(qc > random, "cos(w, u_s): qc {qc} random {random}");
    }
}
