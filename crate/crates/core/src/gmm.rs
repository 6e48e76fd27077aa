//! Diagonal-covariance Gaussian mixtures fitted to real-image features, and
//! the QC quality score derived from them.
//!
//! QC scores are log-densities. The raw mixture density underflows long
//! before feature dimensions of practical interest, and since the logarithm
//! is strictly increasing every ranking is unchanged.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::curation::ScoredSet;
use crate::error::{Error, Result};
use crate::feature::{FeatureSet, Label};
use crate::rng;

const INIT_STREAM: u64 = 0x6b6d_6561_6e73;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceKind {
    #[default]
    Diagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmConfig {
    pub components: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub cov_floor: f64,
    pub covariance: CovarianceKind,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            components: 50,
            max_iters: 200,
            rel_tol: 1e-4,
            cov_floor: 1e-6,
            covariance: CovarianceKind::Diagonal,
            seed: 0,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.components == 0 {
            return Err(Error::Config("em: components must be at least 1".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::Config("em: rel_tol must be positive".into()));
        }
        if !(self.cov_floor > 0.0 && self.cov_floor.is_finite()) {
            return Err(Error::Config("em: cov_floor must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub iterations: usize,
    /// Mean per-record log-likelihood of each visited parameter state.
    pub trace: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MixtureRepr {
    #[serde(rename = "M")]
    m: usize,
    d: usize,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    variances: Vec<Vec<f64>>,
    cov_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixtureRepr", into = "MixtureRepr")]
pub struct GaussianMixture {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    variances: Vec<Vec<f64>>,
    cov_floor: f64,
    // cached: ln w, per-component Gaussian normalizer, inverse variances
    log_weights: Vec<f64>,
    log_norm: Vec<f64>,
    inv_var: Vec<Vec<f64>>,
}

impl TryFrom<MixtureRepr> for GaussianMixture {
    type Error = Error;

    fn try_from(r: MixtureRepr) -> Result<Self> {
        if r.weights.len() != r.m {
            return Err(Error::Config(format!(
                "mixture: M={} but {} weights",
                r.m,
                r.weights.len()
            )));
        }
        if r.means.first().is_some_and(|m| m.len() != r.d) {
            return Err(Error::DimMismatch {
                expected: r.d,
                found: r.means[0].len(),
            });
        }
        Self::new(r.weights, r.means, r.variances, r.cov_floor)
    }
}

impl From<GaussianMixture> for MixtureRepr {
    fn from(g: GaussianMixture) -> Self {
        Self {
            m: g.components(),
            d: g.dim(),
            weights: g.weights,
            means: g.means,
            variances: g.variances,
            cov_floor: g.cov_floor,
        }
    }
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, variances: Vec<Vec<f64>>, cov_floor: f64) -> Result<Self> {
        let m = weights.len();
        if m == 0 {
            return Err(Error::Config("mixture: needs at least one component".into()));
        }
        if means.len() != m || variances.len() != m {
            return Err(Error::Config(
                "mixture: weights, means and variances disagree on M".into(),
            ));
        }
        let d = means[0].len();
        if d == 0 {
            return Err(Error::ZeroDim);
        }
        if !(cov_floor > 0.0 && cov_floor.is_finite()) {
            return Err(Error::Config("mixture: cov_floor must be positive".into()));
        }
        for (mu, var) in means.iter().zip(&variances) {
            if mu.len() != d || var.len() != d {
                return Err(Error::DimMismatch {
                    expected: d,
                    found: if mu.len() != d { mu.len() } else { var.len() },
                });
            }
            if mu.iter().any(|v| !v.is_finite()) || var.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric("mixture: non-finite parameter".into()));
            }
            if var.iter().any(|&v| v < cov_floor) {
                return Err(Error::Config("mixture: variance below cov_floor".into()));
            }
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config("mixture: weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("mixture: weights sum to {total}, not 1")));
        }
        let log_weights = weights
            .iter()
            .map(|&w| if w > 0.0 { libm::log(w) } else { f64::NEG_INFINITY })
            .collect();
        let log_norm = variances
            .iter()
            .map(|var| -0.5 * var.iter().map(|&v| libm::log(2.0 * PI * v)).sum::<f64>())
            .collect();
        let inv_var = variances
            .iter()
            .map(|var| var.iter().map(|v| 1.0 / v).collect())
            .collect();
        Ok(Self {
            weights,
            means,
            variances,
            cov_floor,
            log_weights,
            log_norm,
            inv_var,
        })
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn variances(&self) -> &[Vec<f64>] {
        &self.variances
    }

    pub fn cov_floor(&self) -> f64 {
        self.cov_floor
    }

    /// ln(wᵢ · g(x | μᵢ, Σᵢ)) for every component.
    fn component_terms(&self, x: &[f64], out: &mut [f64]) {
        for (k, t) in out.iter_mut().enumerate() {
            let mu = &self.means[k];
            let iv = &self.inv_var[k];
            let mut q = 0.0;
            for j in 0..x.len() {
                let diff = x[j] - mu[j];
                q += diff * diff * iv[j];
            }
            *t = self.log_weights[k] + self.log_norm[k] - 0.5 * q;
        }
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dim() {
            return Err(Error::DimMismatch {
                expected: self.dim(),
                found,
            });
        }
        Ok(())
    }

    /// ln p(x | λ), evaluated with log-sum-exp.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        let mut terms = vec![0.0; self.components()];
        self.component_terms(x, &mut terms);
        Ok(log_sum_exp(&terms))
    }

    pub fn log_density_f32(&self, x: &[f32]) -> Result<f64> {
        let x: Vec<f64> = x.iter().map(|&v| f64::from(v)).collect();
        self.log_density(&x)
    }
}

pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + libm::log(terms.iter().map(|&t| libm::exp(t - max)).sum::<f64>())
}

pub fn log_density(gmm: &GaussianMixture, x: &[f64]) -> Result<f64> {
    gmm.log_density(x)
}

/// The QC score of a generated sample's features: the log of its mixture density.
pub fn qc_score(gmm: &GaussianMixture, x: &[f64]) -> Result<f64> {
    gmm.log_density(x)
}

/// QC score for every record, order preserved.
pub fn score_set(gmm: &GaussianMixture, set: &FeatureSet) -> Result<ScoredSet> {
    if set.dim() != gmm.dim() {
        return Err(Error::DimMismatch {
            expected: gmm.dim(),
            found: set.dim(),
        });
    }
    let scores = set
        .iter()
        .map(|r| gmm.log_density_f32(&r.vector))
        .collect::<Result<Vec<_>>>()?;
    ScoredSet::new(set.clone(), scores)
}

/// k-means++ seeding: first center uniform, then D²-weighted draws. Zero-mass
/// and exhausted draws fall back to the lowest eligible index.
fn kmeans_pp_centers<R: Rng + ?Sized>(data: &[f64], n: usize, d: usize, k: usize, rng: &mut R) -> Vec<usize> {
    let point = |i: usize| &data[i * d..(i + 1) * d];
    let sq_dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let mut centers = Vec::with_capacity(k);
    centers.push(rng.random_range(0..n));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(point(i), point(centers[0]))).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let u: f64 = rng.random::<f64>();
        let next = if total > 0.0 {
            let target = u * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap_or(0))
        } else {
            (0..n).find(|i| !centers.contains(i)).unwrap_or(0)
        };
        centers.push(next);
        let c = point(next);
        for (i, slot) in d2.iter_mut().enumerate() {
            *slot = slot.min(sq_dist(point(i), c));
        }
    }
    centers
}

struct EmState {
    n: usize,
    d: usize,
    m: usize,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    variances: Vec<Vec<f64>>,
}

impl EmState {
    fn mixture(&self, floor: f64) -> Result<GaussianMixture> {
        GaussianMixture::new(self.weights.clone(), self.means.clone(), self.variances.clone(), floor)
    }

    /// Fills `resp` (n × m) with responsibilities and returns the mean log-likelihood.
    fn e_step(&self, gmm: &GaussianMixture, data: &[f64], resp: &mut [f64]) -> f64 {
        let mut total = 0.0;
        for i in 0..self.n {
            let row = &mut resp[i * self.m..(i + 1) * self.m];
            gmm.component_terms(&data[i * self.d..(i + 1) * self.d], row);
            let lse = log_sum_exp(row);
            for r in row.iter_mut() {
                *r = libm::exp(*r - lse);
            }
            total += lse;
        }
        total / self.n as f64
    }

    fn m_step(&mut self, data: &[f64], resp: &[f64], floor: f64) {
        let (n, d, m) = (self.n, self.d, self.m);
        let mut nk = vec![0.0; m];
        for i in 0..n {
            for k in 0..m {
                nk[k] += resp[i * m + k];
            }
        }
        for k in 0..m {
            if nk[k] <= 0.0 {
                continue;
            }
            let mut mu = vec![0.0; d];
            for i in 0..n {
                let r = resp[i * m + k];
                for j in 0..d {
                    mu[j] += r * data[i * d + j];
                }
            }
            mu.iter_mut().for_each(|v| *v /= nk[k]);
            let mut var = vec![0.0; d];
            for i in 0..n {
                let r = resp[i * m + k];
                for j in 0..d {
                    let diff = data[i * d + j] - mu[j];
                    var[j] += r * diff * diff;
                }
            }
            var.iter_mut().for_each(|v| *v = (*v / nk[k]).max(floor));
            self.means[k] = mu;
            self.variances[k] = var;
        }
        let total: f64 = nk.iter().sum();
        self.weights = nk.iter().map(|v| v / total).collect();
    }
}

/// Fits a diagonal Gaussian mixture to real-image features by EM.
pub fn fit_em(real: &FeatureSet, cfg: &EmConfig) -> Result<(GaussianMixture, FitReport)> {
    cfg.validate()?;
    if let Some(r) = real.iter().find(|r| r.label != Label::Real) {
        return Err(Error::FakeInFitData(r.id.clone()));
    }
    let (n, d, m) = (real.len(), real.dim(), cfg.components);
    if n < m || n == 0 {
        return Err(Error::TooFewRecords {
            needed: m.max(1),
            found: n,
        });
    }
    let data: Vec<f64> = real
        .iter()
        .flat_map(|r| r.vector.iter().map(|&v| f64::from(v)))
        .collect();

    let mut rng = rng::stream(cfg.seed, INIT_STREAM);
    let centers = kmeans_pp_centers(&data, n, d, m, &mut rng);
    let mut global_mean = vec![0.0; d];
    for i in 0..n {
        for j in 0..d {
            global_mean[j] += data[i * d + j];
        }
    }
    global_mean.iter_mut().for_each(|v| *v /= n as f64);
    let mut global_var = vec![0.0; d];
    for i in 0..n {
        for j in 0..d {
            let diff = data[i * d + j] - global_mean[j];
            global_var[j] += diff * diff;
        }
    }
    global_var
        .iter_mut()
        .for_each(|v| *v = (*v / n as f64).max(cfg.cov_floor));

    let mut state = EmState {
        n,
        d,
        m,
        weights: vec![1.0 / m as f64; m],
        means: centers.iter().map(|&c| data[c * d..(c + 1) * d].to_vec()).collect(),
        variances: vec![global_var; m],
    };
    // Uniform weights may miss the simplex tolerance by an ulp for odd M.
    let sum: f64 = state.weights.iter().sum();
    state.weights.iter_mut().for_each(|w| *w /= sum);

    let mut resp = vec![0.0; n * m];
    let mut gmm = state.mixture(cfg.cov_floor)?;
    let mut ll = state.e_step(&gmm, &data, &mut resp);
    if !ll.is_finite() {
        return Err(Error::Numeric(format!("em: initial log-likelihood is {ll}")));
    }
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        state.m_step(&data, &resp, cfg.cov_floor);
        gmm = state.mixture(cfg.cov_floor)?;
        let next = state.e_step(&gmm, &data, &mut resp);
        iterations += 1;
        if !next.is_finite() {
            return Err(Error::Numeric(format!(
                "em: log-likelihood became {next} at iteration {iterations}"
            )));
        }
        trace.push(next);
        let rel = (next - ll).abs() / ll.abs().max(f64::MIN_POSITIVE);
        ll = next;
        if rel < cfg.rel_tol {
            converged = true;
            break;
        }
    }
    Ok((
        gmm,
        FitReport {
            iterations,
            trace,
            converged,
        },
    ))
}
