//! Density evaluations and conjugate parameter updates.
//!
//! Everything is done in log space; `-inf` marks an impossible configuration
//! (invalid path, zero prior support) and is a value, not an error.  Errors
//! are reserved for genuinely unusable inputs such as improper posteriors.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use thiserror::Error;

use crate::model::{ModelSpec, ObservationSeries, Path};

const LN_2PI: f64 = 1.8378770664093453;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LikelihoodError {
    #[error("posterior for {target} is improper (shape {shape}, rate {rate}); a proper prior or more data is required")]
    ImproperPosterior { target: &'static str, shape: f64, rate: f64 },
    #[error("rate pair sums to zero; ratio undefined")]
    ZeroPairSum,
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
}

/// Gamma distribution in shape/rate form.  Improper parameter choices
/// (shape or rate zero) are allowed for priors; `log_pdf` then falls back to
/// the unnormalized kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaParams {
    pub shape: f64,
    pub rate: f64,
}

impl GammaParams {
    pub fn new(shape: f64, rate: f64) -> Self {
        GammaParams { shape, rate }
    }

    pub fn is_proper(&self) -> bool {
        self.shape > 0.0 && self.rate > 0.0
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let kernel = (self.shape - 1.0) * x.ln() - self.rate * x;
        if self.is_proper() {
            self.shape * self.rate.ln() - libm::lgamma(self.shape) + kernel
        } else {
            kernel
        }
    }

    pub fn sample<R: Rng>(&self, target: &'static str, rng: &mut R) -> Result<f64, LikelihoodError> {
        if !self.is_proper() {
            return Err(LikelihoodError::ImproperPosterior {
                target,
                shape: self.shape,
                rate: self.rate,
            });
        }
        let gamma = Gamma::new(self.shape, 1.0 / self.rate).map_err(|_| {
            LikelihoodError::ImproperPosterior { target, shape: self.shape, rate: self.rate }
        })?;
        Ok(gamma.sample(rng))
    }
}

/// Priors for the rates and the observation precision, plus the reversible
/// reaction pairs that are updated in sum/ratio coordinates.
///
/// A paired rate couple `(i, j)` gets a Gamma prior on the sum
/// `theta_i + theta_j` (hyperparameters taken from entry `i`) and a flat
/// prior on the ratio `theta_i / (theta_i + theta_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    pub theta: Vec<GammaParams>,
    pub eta: GammaParams,
    pub pairs: Vec<(usize, usize)>,
}

impl PriorSpec {
    pub fn validate(&self, n_reactions: usize) -> Result<(), LikelihoodError> {
        if self.theta.len() != n_reactions {
            return Err(LikelihoodError::InvalidPrior(format!(
                "{} rate priors for {} reactions",
                self.theta.len(),
                n_reactions
            )));
        }
        for (i, g) in self.theta.iter().enumerate() {
            if !g.is_proper() {
                return Err(LikelihoodError::InvalidPrior(format!(
                    "rate prior {i} must have positive shape and rate"
                )));
            }
        }
        if self.eta.shape < 0.0 || self.eta.rate < 0.0 {
            return Err(LikelihoodError::InvalidPrior(
                "precision prior parameters must be nonnegative".into(),
            ));
        }
        let mut seen = vec![false; n_reactions];
        for &(i, j) in &self.pairs {
            if i >= n_reactions || j >= n_reactions || i == j {
                return Err(LikelihoodError::InvalidPrior(format!("bad pair ({i}, {j})")));
            }
            if seen[i] || seen[j] {
                return Err(LikelihoodError::InvalidPrior(format!(
                    "reaction {} appears in more than one pair",
                    if seen[i] { i } else { j }
                )));
            }
            seen[i] = true;
            seen[j] = true;
        }
        Ok(())
    }

    pub fn is_paired(&self, i: usize) -> bool {
        self.pairs.iter().any(|&(a, b)| a == i || b == i)
    }

    /// Log prior of the rate vector, with paired components evaluated in
    /// sum/ratio coordinates.
    pub fn log_theta_prior(&self, theta: &[f64]) -> f64 {
        let mut total = 0.0;
        for &(i, j) in &self.pairs {
            total += self.theta[i].log_pdf(theta[i] + theta[j]);
            if theta[i] < 0.0 || theta[j] < 0.0 {
                return f64::NEG_INFINITY;
            }
        }
        for (i, g) in self.theta.iter().enumerate() {
            if !self.is_paired(i) {
                total += g.log_pdf(theta[i]);
            }
        }
        total
    }
}

/// Per-reaction event counts and integrated standardized intensities of a
/// path; everything the conjugate rate updates need.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    pub totals: Vec<u64>,
    pub integrals: Vec<f64>,
}

pub fn path_sufficient_stats(model: &ModelSpec, path: &Path) -> SufficientStats {
    let r = model.n_reactions();
    let mut totals = vec![0u64; r];
    let mut integrals = vec![0.0; r];
    path.walk(model, |s, t, y, event| {
        for i in 0..r {
            integrals[i] += model.integrated_intensity(i, s, t, y);
        }
        if let Some(i) = event {
            totals[i] += 1;
        }
    });
    SufficientStats { totals, integrals }
}

/// Log density of a path under rates `theta`: the survival term over all
/// segments plus one intensity factor per event, evaluated at the event time
/// in the pre-jump state.  `-inf` when the path is invalid or some event has
/// zero intensity.
pub fn log_path_density(model: &ModelSpec, theta: &[f64], path: &Path) -> f64 {
    let r = model.n_reactions();
    let mut log_dens = 0.0;
    let mut valid = path.y_a.iter().all(|&v| v >= 0);
    path.walk(model, |s, t, y, event| {
        if !valid {
            return;
        }
        if y.iter().any(|&v| v < 0) {
            valid = false;
            return;
        }
        for i in 0..r {
            log_dens -= theta[i] * model.integrated_intensity(i, s, t, y);
        }
        if let Some(i) = event {
            let mu = theta[i] * model.intensity(i, t, y);
            if mu > 0.0 {
                log_dens += mu.ln();
            } else {
                valid = false;
            }
        }
    });
    // The last segment's state is not revisited by the walk closure; check
    // the final state explicitly via the running flag plus a final jump test.
    if !valid {
        return f64::NEG_INFINITY;
    }
    if path.final_state(model).iter().any(|&v| v < 0) {
        return f64::NEG_INFINITY;
    }
    log_dens
}

/// Sum of Gaussian observation log densities over observation times in
/// `[s, t]`, restricted to species flagged in `observed` and to non-missing
/// entries.  An empty selection contributes 0.
pub fn log_obs_density(
    model: &ModelSpec,
    eta: f64,
    obs: &ObservationSeries,
    path: &Path,
    observed: &[bool],
    s: f64,
    t: f64,
) -> f64 {
    let lo = s.max(path.a);
    let hi = t.min(path.b);
    let idx: Vec<usize> = obs.indices_in(lo, hi).collect();
    if idx.is_empty() {
        return 0.0;
    }
    let times: Vec<f64> = idx.iter().map(|&l| obs.times[l]).collect();
    let states = path.states_at(model, &times);
    let mut log_dens = 0.0;
    for (pos, &l) in idx.iter().enumerate() {
        for (j, value) in obs.values[l].iter().enumerate() {
            if !observed[j] {
                continue;
            }
            if let Some(x) = value {
                let resid = x - states[pos][j] as f64;
                log_dens += 0.5 * (eta.ln() - LN_2PI) - 0.5 * eta * resid * resid;
            }
        }
    }
    log_dens
}

/// Conjugate update for the rates: shape gains the event count, rate gains
/// the integrated intensity.
pub fn theta_posterior(prior: &[GammaParams], stats: &SufficientStats) -> Vec<GammaParams> {
    prior
        .iter()
        .zip(stats.totals.iter().zip(&stats.integrals))
        .map(|(g, (&n, &i))| GammaParams::new(g.shape + n as f64, g.rate + i))
        .collect()
}

/// Conjugate update for the observation precision: shape gains half the
/// number of non-missing observed entries, rate gains half the sum of
/// squared residuals.  Errors when the result is still improper.
pub fn eta_posterior(
    prior: GammaParams,
    model: &ModelSpec,
    obs: &ObservationSeries,
    path: &Path,
    observed: &[bool],
) -> Result<GammaParams, LikelihoodError> {
    let states = path.states_at(model, &obs.times);
    let mut count = 0u64;
    let mut ss = 0.0;
    for (l, row) in obs.values.iter().enumerate() {
        for (j, value) in row.iter().enumerate() {
            if !observed[j] {
                continue;
            }
            if let Some(x) = value {
                let resid = x - states[l][j] as f64;
                count += 1;
                ss += resid * resid;
            }
        }
    }
    let post = GammaParams::new(prior.shape + 0.5 * count as f64, prior.rate + 0.5 * ss);
    if post.is_proper() {
        Ok(post)
    } else {
        Err(LikelihoodError::ImproperPosterior {
            target: "precision",
            shape: post.shape,
            rate: post.rate,
        })
    }
}

/// Full log joint of parameters, latent path, and observations: priors,
/// initial-state density, path density, observation density.  When the
/// precision is held fixed its prior term is skipped.
#[allow(clippy::too_many_arguments)]
pub fn log_joint(
    model: &ModelSpec,
    prior: &PriorSpec,
    theta: &[f64],
    eta: f64,
    path: &Path,
    obs: &ObservationSeries,
    observed: &[bool],
    eta_is_sampled: bool,
) -> f64 {
    let mut total = prior.log_theta_prior(theta);
    if eta_is_sampled {
        total += prior.eta.log_pdf(eta);
    }
    total += model.log_init_density(&path.y_a);
    if total == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    total += log_path_density(model, theta, path);
    if total == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    total + log_obs_density(model, eta, obs, path, observed, path.a, path.b)
}

/// Sum/ratio coordinates of a rate pair.
pub fn rho_transform(theta_i: f64, theta_j: f64) -> Result<(f64, f64), LikelihoodError> {
    let sum = theta_i + theta_j;
    if sum <= 0.0 {
        return Err(LikelihoodError::ZeroPairSum);
    }
    Ok((sum, theta_i / sum))
}

pub fn rho_inverse(rho_sum: f64, rho_ratio: f64) -> (f64, f64) {
    (rho_sum * rho_ratio, rho_sum * (1.0 - rho_ratio))
}

/// Conditional distribution of the ratio coordinate of a rate pair given the
/// path: density proportional to
/// `(beta + rho*I1 + (1-rho)*I2)^-(alpha+N1+N2) * rho^N1 * (1-rho)^N2`
/// on (0, 1).  Sampled by inverse CDF on an adaptive grid: a coarse scan
/// locates the region within 35 log units of the mode, a fine grid of 4096
/// cells then carries a piecewise-constant approximation.
#[derive(Debug, Clone)]
pub struct RhoRatioDist {
    lo: f64,
    step: f64,
    /// Cumulative cell masses, normalized to end at 1.
    cdf: Vec<f64>,
}

impl RhoRatioDist {
    const COARSE: usize = 1024;
    const FINE: usize = 4096;
    const LOG_WINDOW: f64 = 35.0;

    pub fn new(alpha: f64, beta: f64, n1: u64, n2: u64, i1: f64, i2: f64) -> Self {
        let a = alpha + (n1 + n2) as f64;
        let (n1f, n2f) = (n1 as f64, n2 as f64);
        let log_kernel = move |rho: f64| -> f64 {
            let mut v = -a * (beta + rho * i1 + (1.0 - rho) * i2).ln();
            if n1 > 0 {
                v += n1f * rho.ln();
            }
            if n2 > 0 {
                v += n2f * (1.0 - rho).ln();
            }
            v
        };

        let coarse: Vec<f64> = (0..Self::COARSE)
            .map(|k| (k as f64 + 0.5) / Self::COARSE as f64)
            .collect();
        let logs: Vec<f64> = coarse.iter().map(|&x| log_kernel(x)).collect();
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let first = logs.iter().position(|&v| v >= max - Self::LOG_WINDOW).unwrap();
        let last = logs.iter().rposition(|&v| v >= max - Self::LOG_WINDOW).unwrap();
        let cell = 1.0 / Self::COARSE as f64;
        let lo = (coarse[first] - 1.5 * cell).max(0.0);
        let hi = (coarse[last] + 1.5 * cell).min(1.0);

        let step = (hi - lo) / Self::FINE as f64;
        let mut cdf = Vec::with_capacity(Self::FINE);
        let mut acc = 0.0;
        for j in 0..Self::FINE {
            let x = lo + (j as f64 + 0.5) * step;
            acc += (log_kernel(x) - max).exp();
            cdf.push(acc);
        }
        let total = acc;
        for v in &mut cdf {
            *v /= total;
        }
        RhoRatioDist { lo, step, cdf }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let j = self.cdf.partition_point(|&c| c < u);
        let j = j.min(self.cdf.len() - 1);
        let c_prev = if j == 0 { 0.0 } else { self.cdf[j - 1] };
        let mass = (self.cdf[j] - c_prev).max(f64::MIN_POSITIVE);
        let frac = ((u - c_prev) / mass).clamp(0.0, 1.0);
        self.lo + (j as f64 + frac) * self.step
    }
}

/// Draws a rate pair in sum/ratio coordinates: ratio from its grid-sampled
/// conditional, then sum from the conditional Gamma.
pub fn sample_rho_pair<R: Rng>(
    pair_prior: GammaParams,
    n1: u64,
    n2: u64,
    i1: f64,
    i2: f64,
    rng: &mut R,
) -> Result<(f64, f64), LikelihoodError> {
    let ratio = RhoRatioDist::new(pair_prior.shape, pair_prior.rate, n1, n2, i1, i2).sample(rng);
    let cond = GammaParams::new(
        pair_prior.shape + (n1 + n2) as f64,
        pair_prior.rate + ratio * i1 + (1.0 - ratio) * i2,
    );
    let sum = cond.sample("rate pair sum", rng)?;
    Ok((sum, ratio))
}
