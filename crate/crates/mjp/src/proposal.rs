//! Endpoint-conditioned path proposals.
//!
//! A path update on a sub-interval `[a, b]` keeps the endpoint states fixed
//! and works in two stages: first new reaction totals are drawn by adding a
//! random kernel-lattice vector (so `A * r_tot`, and with it the endpoint
//! difference, is preserved exactly), then a fresh path with those totals is
//! grown event by event.  Event types are drawn sequentially with weights
//! `sqrt(remaining_i * mu_i)`, balancing the local jump law against the
//! quota still to be placed; waiting fractions come from a Dirichlet
//! distribution moment-matched to the conditioned exponential waiting times.
//! Border intervals additionally move the outer endpoint by stepping the
//! totals along vectors that change a single species.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma};
use thiserror::Error;

use crate::lattice::{kernel_basis, kernel_basis_excluding_row, IntMatrix, LatticeError};
use crate::likelihood::{log_obs_density, log_path_density};
use crate::model::{Event, ModelSpec, ObservationSeries, Path};

#[derive(Debug, Error)]
pub enum ProposalError {
    #[error("proposal law is not symmetric: {0}")]
    Asymmetric(String),
    #[error("invalid proposal parameters: {0}")]
    BadParams(String),
    #[error("total intensity vanishes at position {index}; waiting-time parameters undefined")]
    ZeroIntensity { index: usize },
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// Symmetric distribution on `Z^d` driving the interior totals move.
#[derive(Debug, Clone, PartialEq)]
pub enum ZLaw {
    /// Independent coordinates, each a binomial magnitude with a fair sign:
    /// `B * Bbar` with `P[B = +1] = P[B = -1] = 1/2` and
    /// `Bbar ~ Bin(trials, iota)`.
    SignedBinomial { trials: u64, iota: f64 },
    /// Explicit finite table of (vector, probability).
    Table(Vec<(Vec<i64>, f64)>),
}

impl ZLaw {
    pub fn validate(&self, dim: usize) -> Result<(), ProposalError> {
        match self {
            ZLaw::SignedBinomial { trials, iota } => {
                if !(0.0..=1.0).contains(iota) {
                    return Err(ProposalError::BadParams(format!(
                        "signed binomial weight {iota} outside [0, 1]"
                    )));
                }
                if *trials == 0 {
                    return Err(ProposalError::BadParams("zero binomial trials".into()));
                }
                Ok(())
            }
            ZLaw::Table(entries) => {
                if entries.is_empty() {
                    return Err(ProposalError::BadParams("empty proposal table".into()));
                }
                let mut total = 0.0;
                for (z, p) in entries {
                    if z.len() != dim {
                        return Err(ProposalError::BadParams(format!(
                            "table vector length {} does not match lattice dimension {dim}",
                            z.len()
                        )));
                    }
                    if !(*p > 0.0) {
                        return Err(ProposalError::BadParams("nonpositive table weight".into()));
                    }
                    total += p;
                    let neg: Vec<i64> = z.iter().map(|v| -v).collect();
                    let mirror = entries.iter().find(|(w, _)| *w == neg).map(|(_, q)| *q);
                    match mirror {
                        Some(q) if (q - p).abs() <= 1e-12 * p.max(q) => {}
                        _ => {
                            return Err(ProposalError::Asymmetric(format!(
                                "no equal-weight mirror entry for {z:?}"
                            )))
                        }
                    }
                }
                if (total - 1.0).abs() > 1e-9 {
                    return Err(ProposalError::BadParams(format!(
                        "table weights sum to {total}, expected 1"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn sample<R: Rng>(&self, dim: usize, rng: &mut R) -> Vec<i64> {
        match self {
            ZLaw::SignedBinomial { trials, iota } => {
                let bin = Binomial::new(*trials, *iota).expect("validated parameters");
                (0..dim)
                    .map(|_| {
                        let magnitude = bin.sample(rng) as i64;
                        if magnitude == 0 {
                            0
                        } else if rng.random::<bool>() {
                            magnitude
                        } else {
                            -magnitude
                        }
                    })
                    .collect()
            }
            ZLaw::Table(entries) => {
                let mut u: f64 = rng.random();
                for (z, p) in entries {
                    u -= p;
                    if u <= 0.0 {
                        return z.clone();
                    }
                }
                entries.last().expect("validated nonempty").0.clone()
            }
        }
    }
}

/// Keeps the columns of `basis` that are NOT in the kernel of `a`; moves
/// along dropped columns would leave both endpoints unchanged and are
/// already covered by the interior proposal.
pub fn non_kernel_columns(a: &IntMatrix, basis: &IntMatrix) -> Vec<Vec<i64>> {
    let mut kept = Vec::new();
    for c in 0..basis.cols() {
        let col = basis.col(c);
        let image = a.mul_vec(&col).expect("dimension-checked column");
        if image.iter().any(|&v| v != 0) {
            kept.push(col);
        }
    }
    kept
}

/// Candidate totals-change vectors for a border update restricted to the
/// given species: for each species j, a kernel basis of the jump matrix
/// without row j is computed and its genuine kernel columns are filtered
/// out, leaving vectors whose endpoint effect touches species j alone.
pub fn border_move_vectors(a: &IntMatrix, species: &[usize]) -> Result<Vec<Vec<i64>>, LatticeError> {
    let mut vectors = Vec::new();
    for &j in species {
        let basis = kernel_basis_excluding_row(a, j)?;
        vectors.extend(non_kernel_columns(a, &basis));
    }
    Ok(vectors)
}

/// Pre-built proposal tunings for one model: interior kernel basis with its
/// step law, and the signed border vector pools for the two boundaries.
#[derive(Debug, Clone)]
pub struct TotalsProposalSpec {
    pub v: IntMatrix,
    pub z_law: ZLaw,
    /// Vectors for moves of the initial state; empty when the initial
    /// distribution is a point mass.
    pub border_start: Vec<Vec<i64>>,
    /// Vectors for moves of the final state.
    pub border_end: Vec<Vec<i64>>,
}

impl TotalsProposalSpec {
    pub fn build(model: &ModelSpec, z_law: ZLaw) -> Result<Self, ProposalError> {
        let v = kernel_basis(&model.a)?;
        z_law.validate(v.cols())?;
        let all_species: Vec<usize> = (0..model.n_species()).collect();
        let border_end = border_move_vectors(&model.a, &all_species)?;
        let border_start = border_move_vectors(&model.a, &model.free_initial_species())?;
        Ok(TotalsProposalSpec { v, z_law, border_start, border_end })
    }
}

/// Interior totals move `r_tot + V * Z`.  Returns `None` when a component
/// would go negative, in which case the whole path update is skipped and
/// the current path stands.
pub fn propose_totals_interior<R: Rng>(
    r_tot: &[u64],
    spec: &TotalsProposalSpec,
    rng: &mut R,
) -> Option<Vec<u64>> {
    let z = spec.z_law.sample(spec.v.cols(), rng);
    let mut new = Vec::with_capacity(r_tot.len());
    for row in 0..spec.v.rows() {
        let mut value = r_tot[row] as i64;
        for (col, &zc) in z.iter().enumerate() {
            value += spec.v.get(row, col) * zc;
        }
        if value < 0 {
            return None;
        }
        new.push(value as u64);
    }
    Some(new)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Start,
    End,
}

/// A border totals move together with the implied new outer endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct BorderMove {
    pub r_tot_new: Vec<u64>,
    pub endpoint_new: Vec<i64>,
}

/// Border totals move: adds a uniformly chosen signed vector from the pool
/// and derives the moving endpoint from `y_b - y_a = A * r_tot`.
/// `y_fixed` is the endpoint that stays put (`y_a` for an end update, `y_b`
/// for a start update).  `None` when totals or the new endpoint would leave
/// their domain, or when the pool is empty.
pub fn propose_totals_border<R: Rng>(
    model: &ModelSpec,
    r_tot: &[u64],
    boundary: Boundary,
    y_fixed: &[i64],
    vectors: &[Vec<i64>],
    rng: &mut R,
) -> Option<BorderMove> {
    if vectors.is_empty() {
        return None;
    }
    let v = &vectors[rng.random_range(0..vectors.len())];
    let sign: i64 = if rng.random::<bool>() { 1 } else { -1 };
    let mut new = Vec::with_capacity(r_tot.len());
    for (i, &rv) in r_tot.iter().enumerate() {
        let value = rv as i64 + sign * v[i];
        if value < 0 {
            return None;
        }
        new.push(value as u64);
    }
    let signed_new: Vec<i64> = new.iter().map(|&v| v as i64).collect();
    let image = model.a.mul_vec(&signed_new).ok()?;
    let endpoint_new: Vec<i64> = match boundary {
        Boundary::End => y_fixed.iter().zip(&image).map(|(&ya, &d)| ya + d).collect(),
        Boundary::Start => y_fixed.iter().zip(&image).map(|(&yb, &d)| yb - d).collect(),
    };
    if endpoint_new.iter().any(|&v| v < 0) {
        return None;
    }
    Some(BorderMove { r_tot_new: new, endpoint_new })
}

/// Dirichlet parameters matching the waiting fractions of independent
/// exponential times with rates `mu0`, conditioned on their sum: means give
/// `alpha_k` proportional to `1 / mu0_k`, the summed variances fix the
/// scale to `S1 / S2` with `Sm = sum(mu0_k^-m)`.
pub fn dirichlet_params(mu0: &[f64]) -> Result<Vec<f64>, ProposalError> {
    if let Some(index) = mu0.iter().position(|&m| !(m > 0.0)) {
        return Err(ProposalError::ZeroIntensity { index });
    }
    Ok(dirichlet_params_lenient(mu0))
}

/// As `dirichlet_params`, but entries with zero intensity (possible only
/// for the final slack, when the path ends in an absorbing state) fall back
/// to weight 1 while the rest are moment-matched among themselves.
fn dirichlet_params_lenient(mu0: &[f64]) -> Vec<f64> {
    // Equal rates make the conditioned waiting times exactly uniform on the
    // simplex; return the flat parameter directly rather than through the
    // moment-matching arithmetic, which would only be correct up to roundoff.
    let mut positive = mu0.iter().filter(|&&m| m > 0.0);
    let first = positive.next().copied();
    match first {
        None => return vec![1.0; mu0.len()],
        Some(f) if positive.all(|&m| m == f) => return vec![1.0; mu0.len()],
        _ => {}
    }
    let s1: f64 = mu0.iter().filter(|&&m| m > 0.0).map(|m| 1.0 / m).sum();
    let s2: f64 = mu0.iter().filter(|&&m| m > 0.0).map(|m| 1.0 / (m * m)).sum();
    let c = s1 / s2;
    mu0.iter().map(|&m| if m > 0.0 { c / m } else { 1.0 }).collect()
}

/// Result of a path generation attempt.  `Impossible` marks a dead end (the
/// remaining quota cannot be placed); the caller scores it as an automatic
/// rejection.
#[derive(Debug, Clone)]
pub enum PathProposal {
    Proposed { path: Path, log_q: f64 },
    Impossible,
}

fn total_intensity(model: &ModelSpec, theta: &[f64], t: f64, y: &[i64]) -> f64 {
    (0..model.n_reactions()).map(|i| theta[i] * model.intensity(i, t, y)).sum()
}

fn type_weights(
    model: &ModelSpec,
    theta: &[f64],
    remaining: &[u64],
    t_star: f64,
    y: &[i64],
    weights: &mut [f64],
) -> f64 {
    let mut sum = 0.0;
    for i in 0..model.n_reactions() {
        weights[i] = if remaining[i] > 0 {
            (remaining[i] as f64 * theta[i] * model.intensity(i, t_star, y)).sqrt()
        } else {
            0.0
        };
        sum += weights[i];
    }
    sum
}

fn ln_dirichlet_density(alpha: &[f64], fractions: &[f64]) -> f64 {
    let a0: f64 = alpha.iter().sum();
    let mut ld = libm::lgamma(a0);
    for (&a, &f) in alpha.iter().zip(fractions) {
        ld += (a - 1.0) * f.ln() - libm::lgamma(a);
    }
    ld
}

/// Grows a path on `[a, b]` from `y_a` with exactly the prescribed totals.
pub fn propose_path<R: Rng>(
    model: &ModelSpec,
    theta: &[f64],
    a: f64,
    b: f64,
    y_a: &[i64],
    r_tot: &[u64],
    rng: &mut R,
) -> PathProposal {
    let n_tot: u64 = r_tot.iter().sum();
    if n_tot == 0 {
        return PathProposal::Proposed { path: Path::empty(a, b, y_a.to_vec()), log_q: 0.0 };
    }
    let span = b - a;
    let r = model.n_reactions();
    let mut remaining = r_tot.to_vec();
    let mut y = y_a.to_vec();
    let mut weights = vec![0.0; r];
    let mut types = Vec::with_capacity(n_tot as usize);
    let mut mu0 = Vec::with_capacity(n_tot as usize + 1);
    let mut log_q = 0.0;
    for k in 0..n_tot {
        let t_star = a + span * k as f64 / n_tot as f64;
        let wsum = type_weights(model, theta, &remaining, t_star, &y, &mut weights);
        if !(wsum > 0.0) {
            return PathProposal::Impossible;
        }
        mu0.push(total_intensity(model, theta, t_star, &y));
        let mut pick = rng.random::<f64>() * wsum;
        let mut chosen = r - 1;
        for (i, &w) in weights.iter().enumerate() {
            pick -= w;
            if pick <= 0.0 && w > 0.0 {
                chosen = i;
                break;
            }
        }
        if weights[chosen] == 0.0 {
            // Roundoff walked past the last positive weight; take it instead.
            chosen = weights.iter().rposition(|&w| w > 0.0).expect("wsum > 0");
        }
        log_q += weights[chosen].ln() - wsum.ln();
        remaining[chosen] -= 1;
        if !model.apply_reaction_in_place(&mut y, chosen) {
            return PathProposal::Impossible;
        }
        types.push(chosen);
    }
    mu0.push(total_intensity(model, theta, b, &y));
    let alpha = dirichlet_params_lenient(&mu0);

    let n = n_tot as usize;
    let mut fractions = vec![0.0; n + 1];
    let mut ok = false;
    for _attempt in 0..2 {
        let mut total = 0.0;
        for (f, &a_k) in fractions.iter_mut().zip(&alpha) {
            let g = Gamma::new(a_k, 1.0).expect("positive shape").sample(rng);
            *f = g;
            total += g;
        }
        if total > 0.0 && fractions.iter().all(|&g| g > 0.0) {
            for f in &mut fractions {
                *f /= total;
            }
            ok = true;
            break;
        }
    }
    if !ok {
        return PathProposal::Impossible;
    }

    let mut events = Vec::with_capacity(n);
    let mut t = a;
    for k in 0..n {
        t += span * fractions[k];
        let prev = if k == 0 { a } else { events[k - 1] };
        if !(t > prev) || t >= b {
            return PathProposal::Impossible;
        }
        events.push(t);
    }
    let events: Vec<Event> = events
        .into_iter()
        .zip(types)
        .map(|(time, reaction)| Event { time, reaction })
        .collect();
    log_q += ln_dirichlet_density(&alpha, &fractions) - n as f64 * span.ln();
    PathProposal::Proposed { path: Path { a, b, y_a: y_a.to_vec(), events }, log_q }
}

/// Log density, under the generator above, of an existing path given its
/// own starting state and totals.  `-inf` for paths the generator cannot
/// produce.
pub fn log_proposal_density(model: &ModelSpec, theta: &[f64], path: &Path) -> f64 {
    let r = model.n_reactions();
    let n = path.events.len();
    if n == 0 {
        return 0.0;
    }
    let span = path.b - path.a;
    let mut remaining = path.reaction_totals(r);
    let mut y = path.y_a.clone();
    let mut weights = vec![0.0; r];
    let mut mu0 = Vec::with_capacity(n + 1);
    let mut log_q = 0.0;
    for (k, event) in path.events.iter().enumerate() {
        let t_star = path.a + span * k as f64 / n as f64;
        let wsum = type_weights(model, theta, &remaining, t_star, &y, &mut weights);
        let w = weights[event.reaction];
        if !(w > 0.0) {
            return f64::NEG_INFINITY;
        }
        log_q += w.ln() - wsum.ln();
        mu0.push(total_intensity(model, theta, t_star, &y));
        remaining[event.reaction] -= 1;
        if !model.apply_reaction_in_place(&mut y, event.reaction) {
            return f64::NEG_INFINITY;
        }
    }
    mu0.push(total_intensity(model, theta, path.b, &y));
    let alpha = dirichlet_params_lenient(&mu0);
    let mut fractions = Vec::with_capacity(n + 1);
    let mut prev = path.a;
    for event in &path.events {
        fractions.push((event.time - prev) / span);
        prev = event.time;
    }
    fractions.push((path.b - prev) / span);
    if fractions.iter().any(|&f| !(f > 0.0)) {
        return f64::NEG_INFINITY;
    }
    log_q + ln_dirichlet_density(&alpha, &fractions) - n as f64 * span.ln()
}

/// Log Metropolis-Hastings ratio (before clamping at 0) for replacing
/// `old_sub` by `new_sub` on their common interval: path-density and
/// observation terms plus the proposal correction.  The totals-move factor
/// cancels by symmetry.  Start-boundary moves add the initial-distribution
/// ratio.
#[allow(clippy::too_many_arguments)]
pub fn acceptance_log_ratio(
    model: &ModelSpec,
    theta: &[f64],
    eta: f64,
    obs: &ObservationSeries,
    observed: &[bool],
    old_sub: &Path,
    new_sub: &Path,
    log_q_new: f64,
    boundary: Option<Boundary>,
) -> f64 {
    let new_psi = log_path_density(model, theta, new_sub);
    if new_psi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut ratio = new_psi - log_path_density(model, theta, old_sub);
    ratio += log_obs_density(model, eta, obs, new_sub, observed, new_sub.a, new_sub.b)
        - log_obs_density(model, eta, obs, old_sub, observed, old_sub.a, old_sub.b);
    ratio += log_proposal_density(model, theta, old_sub) - log_q_new;
    if boundary == Some(Boundary::Start) {
        ratio += model.log_init_density(&new_sub.y_a) - model.log_init_density(&old_sub.y_a);
    }
    ratio
}
