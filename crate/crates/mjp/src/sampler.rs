//! The MCMC driver: blockwise path updates over a sub-interval schedule,
//! conjugate Gibbs steps for the rates and the noise precision, and the
//! particle-filter construction of starting values.
//!
//! One iteration updates the latent path on every scheduled sub-interval in
//! a fixed deterministic order, then redraws the rates from their Gamma
//! full conditionals (with optional pairing through the sum/ratio
//! reparameterization) and finally the observation precision.  Boundary
//! intervals get a second pass that can move the outer endpoint state
//! itself.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::gillespie::{simulate_equal_rate_path, simulate_path};
use crate::likelihood::{
    eta_posterior, log_joint, log_obs_density, path_sufficient_stats, rho_inverse,
    sample_rho_pair, theta_posterior, LikelihoodError, PriorSpec,
};
use crate::model::{InitialSpec, ModelSpec, ObservationSeries, Path, State};
use crate::proposal::{
    acceptance_log_ratio, propose_path, propose_totals_border, propose_totals_interior,
    Boundary, PathProposal, ProposalError, TotalsProposalSpec, ZLaw,
};

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
    #[error(transparent)]
    Proposal(#[from] ProposalError),
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error(
        "initialization failed extending to time {time}: all {particles} candidate \
         continuations were unusable; increase the particle count"
    )]
    InitFailed { time: f64, particles: usize },
}

/// How a scheduled sub-interval relates to the observation window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntervalKind {
    Interior,
    Start,
    End,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleEntry {
    pub a: f64,
    pub b: f64,
    pub kind: IntervalKind,
    /// True for the shifted intervals straddling an observation time.
    pub midpoint: bool,
}

/// Ordered list of sub-intervals covering the observation window.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub entries: Vec<ScheduleEntry>,
}

/// The standard schedule: every inter-observation interval plus every
/// midpoint-shifted interval, interleaved so neighbouring blocks are
/// refreshed alternately.  The first and last base intervals carry the
/// boundary marks; a single-interval grid yields one start and one end
/// entry over the same span.
pub fn build_schedule(times: &[f64]) -> Result<Schedule, SamplerError> {
    if times.len() < 2 {
        return Err(SamplerError::Config("schedule needs at least two time points".into()));
    }
    if times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(SamplerError::Config("schedule times must be strictly increasing".into()));
    }
    let n = times.len() - 1;
    let mut entries = Vec::with_capacity(2 * n - 1);
    if n == 1 {
        entries.push(ScheduleEntry {
            a: times[0],
            b: times[1],
            kind: IntervalKind::Start,
            midpoint: false,
        });
        entries.push(ScheduleEntry {
            a: times[0],
            b: times[1],
            kind: IntervalKind::End,
            midpoint: false,
        });
        return Ok(Schedule { entries });
    }
    for k in 0..n {
        let kind = if k == 0 {
            IntervalKind::Start
        } else if k == n - 1 {
            IntervalKind::End
        } else {
            IntervalKind::Interior
        };
        entries.push(ScheduleEntry { a: times[k], b: times[k + 1], kind, midpoint: false });
        if k + 1 < n {
            entries.push(ScheduleEntry {
                a: 0.5 * (times[k] + times[k + 1]),
                b: 0.5 * (times[k + 1] + times[k + 2]),
                kind: IntervalKind::Interior,
                midpoint: true,
            });
        }
    }
    Ok(Schedule { entries })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AcceptanceCounter {
    pub proposed: u64,
    pub accepted: u64,
}

impl AcceptanceCounter {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Per-pass acceptance bookkeeping: base intervals, midpoint intervals, and
/// boundary passes are tracked separately.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ChainStats {
    pub base: AcceptanceCounter,
    pub midpoint: AcceptanceCounter,
    pub border: AcceptanceCounter,
}

impl ChainStats {
    pub fn pooled(&self) -> AcceptanceCounter {
        AcceptanceCounter {
            proposed: self.base.proposed + self.midpoint.proposed + self.border.proposed,
            accepted: self.base.accepted + self.midpoint.accepted + self.border.accepted,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChainState {
    pub path: Path,
    pub theta: Vec<f64>,
    pub eta: f64,
    pub rng: ChaCha12Rng,
    pub stats: ChainStats,
}

impl ChainState {
    pub fn new(path: Path, theta: Vec<f64>, eta: f64, rng: ChaCha12Rng) -> Self {
        ChainState { path, theta, eta, rng, stats: ChainStats::default() }
    }
}

/// Tunable knobs of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub iterations: u64,
    pub thinning: u64,
    pub seed: u64,
    pub z_law: ZLaw,
    /// Custom schedule knots; defaults to the observation times.
    pub schedule_times: Option<Vec<f64>>,
    /// Shrinkage applied to every rate draw during initialization.
    pub nu: f64,
    pub init_particles: usize,
    pub init_sweeps: u64,
    pub init_eta: f64,
    /// When set, the precision is held at this value and never redrawn.
    pub eta_fixed: Option<f64>,
    /// Record a full path snapshot every this many iterations (0 = never).
    pub path_snapshot_every: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            iterations: 10_000,
            thinning: 1,
            seed: 0,
            z_law: ZLaw::SignedBinomial { trials: 2, iota: 0.4 },
            schedule_times: None,
            nu: 0.95,
            init_particles: 150,
            init_sweeps: 150,
            init_eta: 10.0,
            eta_fixed: None,
            path_snapshot_every: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.thinning == 0 {
            return Err(SamplerError::Config("thinning must be at least 1".into()));
        }
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(SamplerError::Config(format!("shrinkage {} outside (0, 1]", self.nu)));
        }
        if self.init_particles == 0 {
            return Err(SamplerError::Config("at least one initialization particle".into()));
        }
        if !(self.init_eta > 0.0) {
            return Err(SamplerError::Config("initialization precision must be positive".into()));
        }
        if let Some(eta) = self.eta_fixed {
            if !(eta > 0.0) {
                return Err(SamplerError::Config("fixed precision must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Read-only bundle shared by all sampler operations of one run.
pub struct SamplerContext<'a> {
    pub model: &'a ModelSpec,
    pub prior: &'a PriorSpec,
    pub obs: &'a ObservationSeries,
    pub observed: Vec<bool>,
    pub schedule: Schedule,
    pub totals: TotalsProposalSpec,
    pub eta_fixed: Option<f64>,
}

impl<'a> SamplerContext<'a> {
    pub fn new(
        model: &'a ModelSpec,
        prior: &'a PriorSpec,
        obs: &'a ObservationSeries,
        observed: Vec<bool>,
        config: &RunConfig,
    ) -> Result<Self, SamplerError> {
        config.validate()?;
        prior.validate(model.n_reactions())?;
        if observed.len() != model.n_species() {
            return Err(SamplerError::Config("observation mask length mismatch".into()));
        }
        if obs.times.len() < 2 {
            return Err(SamplerError::Config("need at least two observation times".into()));
        }
        let knots = config.schedule_times.as_deref().unwrap_or(&obs.times);
        let (t0, tn) = (obs.times[0], *obs.times.last().expect("nonempty"));
        if knots.first() != Some(&t0) || knots.last() != Some(&tn) {
            return Err(SamplerError::Config(
                "custom schedule must span the observation window".into(),
            ));
        }
        let schedule = build_schedule(knots)?;
        let totals = TotalsProposalSpec::build(model, config.z_law.clone())?;
        Ok(SamplerContext {
            model,
            prior,
            obs,
            observed,
            schedule,
            totals,
            eta_fixed: config.eta_fixed,
        })
    }

    fn border_pool(&self, boundary: Boundary) -> &[Vec<i64>] {
        match boundary {
            Boundary::Start => &self.totals.border_start,
            Boundary::End => &self.totals.border_end,
        }
    }
}

/// One path-update pass on `[a, b]`: totals move, fresh bridge, MH accept.
/// Returns whether the proposal was accepted; dead ends and out-of-domain
/// totals count as rejected proposals.
fn path_pass(
    ctx: &SamplerContext,
    state: &mut ChainState,
    a: f64,
    b: f64,
    boundary: Option<Boundary>,
) -> bool {
    let old_sub = state.path.restrict(ctx.model, a, b);
    let r_old = old_sub.reaction_totals(ctx.model.n_reactions());
    let (r_new, y_a_new) = match boundary {
        None => match propose_totals_interior(&r_old, &ctx.totals, &mut state.rng) {
            Some(r) => (r, old_sub.y_a.clone()),
            None => return false,
        },
        Some(Boundary::Start) => {
            let y_b = old_sub.final_state(ctx.model);
            match propose_totals_border(
                ctx.model,
                &r_old,
                Boundary::Start,
                &y_b,
                &ctx.totals.border_start,
                &mut state.rng,
            ) {
                Some(mv) => (mv.r_tot_new, mv.endpoint_new),
                None => return false,
            }
        }
        Some(Boundary::End) => match propose_totals_border(
            ctx.model,
            &r_old,
            Boundary::End,
            &old_sub.y_a,
            &ctx.totals.border_end,
            &mut state.rng,
        ) {
            Some(mv) => (mv.r_tot_new, old_sub.y_a.clone()),
            None => return false,
        },
    };
    let (new_sub, log_q_new) =
        match propose_path(ctx.model, &state.theta, a, b, &y_a_new, &r_new, &mut state.rng) {
            PathProposal::Proposed { path, log_q } => (path, log_q),
            PathProposal::Impossible => return false,
        };
    let ratio = acceptance_log_ratio(
        ctx.model,
        &state.theta,
        state.eta,
        ctx.obs,
        &ctx.observed,
        &old_sub,
        &new_sub,
        log_q_new,
        boundary,
    );
    if ratio >= 0.0 || state.rng.random::<f64>().ln() < ratio {
        state.path = state.path.splice(&new_sub);
        true
    } else {
        false
    }
}

/// One full sweep over the schedule.  Boundary entries get an interior pass
/// first and then the endpoint-moving pass; a boundary pass is skipped
/// entirely when its move pool is empty (nothing to move).
pub fn sweep(ctx: &SamplerContext, state: &mut ChainState) {
    for entry in &ctx.schedule.entries {
        let counter = if entry.midpoint {
            &mut state.stats.midpoint
        } else {
            &mut state.stats.base
        };
        counter.proposed += 1;
        let accepted = path_pass(ctx, state, entry.a, entry.b, None);
        let counter = if entry.midpoint {
            &mut state.stats.midpoint
        } else {
            &mut state.stats.base
        };
        if accepted {
            counter.accepted += 1;
        }
        let boundary = match entry.kind {
            IntervalKind::Interior => None,
            IntervalKind::Start => Some(Boundary::Start),
            IntervalKind::End => Some(Boundary::End),
        };
        if let Some(boundary) = boundary {
            if !ctx.border_pool(boundary).is_empty() {
                state.stats.border.proposed += 1;
                if path_pass(ctx, state, entry.a, entry.b, Some(boundary)) {
                    state.stats.border.accepted += 1;
                }
            }
        }
    }
}

/// Gamma full-conditional draw for every rate; paired rates are updated
/// jointly through their sum and ratio.
pub fn gibbs_theta(ctx: &SamplerContext, state: &mut ChainState) -> Result<(), SamplerError> {
    let stats = path_sufficient_stats(ctx.model, &state.path);
    let mut handled = vec![false; ctx.model.n_reactions()];
    for &(i, j) in &ctx.prior.pairs {
        let (sum, ratio) = sample_rho_pair(
            ctx.prior.theta[i],
            stats.totals[i],
            stats.totals[j],
            stats.integrals[i],
            stats.integrals[j],
            &mut state.rng,
        )?;
        let (ti, tj) = rho_inverse(sum, ratio);
        state.theta[i] = ti;
        state.theta[j] = tj;
        handled[i] = true;
        handled[j] = true;
    }
    let posteriors = theta_posterior(&ctx.prior.theta, &stats);
    for (i, post) in posteriors.iter().enumerate() {
        if !handled[i] {
            state.theta[i] = post.sample("rate", &mut state.rng)?;
        }
    }
    Ok(())
}

/// Gamma full-conditional draw for the observation precision; a no-op when
/// the precision is held fixed.
pub fn gibbs_eta(ctx: &SamplerContext, state: &mut ChainState) -> Result<(), SamplerError> {
    if let Some(eta) = ctx.eta_fixed {
        state.eta = eta;
        return Ok(());
    }
    let post =
        eta_posterior(ctx.prior.eta, ctx.model, ctx.obs, &state.path, &ctx.observed)?;
    state.eta = post.sample("precision", &mut state.rng)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iter: u64,
    pub theta: Vec<f64>,
    pub eta: f64,
    pub log_joint: f64,
    pub r_tot: Vec<u64>,
}

/// Latent states at the observation times for one recorded iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentBlock {
    pub iter: u64,
    pub states: Vec<State>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Vec<TraceRow>,
    pub latent: Vec<LatentBlock>,
    pub snapshots: Vec<(u64, Path)>,
    pub state: ChainState,
}

/// Runs the chain for `config.iterations` iterations from an initialized
/// state, recording every `config.thinning`-th iteration.
pub fn run_chain(
    ctx: &SamplerContext,
    config: &RunConfig,
    mut state: ChainState,
) -> Result<RunOutput, SamplerError> {
    config.validate()?;
    let mut trace = Vec::new();
    let mut latent = Vec::new();
    let mut snapshots = Vec::new();
    for iter in 1..=config.iterations {
        sweep(ctx, &mut state);
        gibbs_theta(ctx, &mut state)?;
        gibbs_eta(ctx, &mut state)?;
        if iter % config.thinning == 0 {
            let lj = log_joint(
                ctx.model,
                ctx.prior,
                &state.theta,
                state.eta,
                &state.path,
                ctx.obs,
                &ctx.observed,
                ctx.eta_fixed.is_none(),
            );
            trace.push(TraceRow {
                iter,
                theta: state.theta.clone(),
                eta: state.eta,
                log_joint: lj,
                r_tot: state.path.reaction_totals(ctx.model.n_reactions()),
            });
            latent.push(LatentBlock {
                iter,
                states: state.path.states_at(ctx.model, &ctx.obs.times),
            });
        }
        if config.path_snapshot_every > 0 && iter % config.path_snapshot_every == 0 {
            snapshots.push((iter, state.path.clone()));
        }
    }
    Ok(RunOutput { trace, latent, snapshots, state })
}

/// Exact draw from the initial law conditioned on the first observation
/// row: discrete uniform priors are reweighted by the Gaussian factor of
/// each observed coordinate.
fn sample_initial_conditional<R: Rng>(
    model: &ModelSpec,
    row: &[Option<f64>],
    observed: &[bool],
    eta0: f64,
    rng: &mut R,
) -> State {
    let mut y = Vec::with_capacity(model.n_species());
    for (j, init) in model.init.iter().enumerate() {
        let value = match *init {
            InitialSpec::Fixed(v) => v,
            InitialSpec::Uniform { lo, hi } => match row.get(j).copied().flatten() {
                Some(x) if observed[j] => {
                    let logw: Vec<f64> = (lo..=hi)
                        .map(|v| -0.5 * eta0 * (x - v as f64) * (x - v as f64))
                        .collect();
                    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let weights: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
                    let total: f64 = weights.iter().sum();
                    let mut u = rng.random::<f64>() * total;
                    let mut pick = hi;
                    for (offset, w) in weights.iter().enumerate() {
                        u -= w;
                        if u <= 0.0 {
                            pick = lo + offset as i64;
                            break;
                        }
                    }
                    pick
                }
                _ => rng.random_range(lo..=hi),
            },
        };
        y.push(value);
    }
    y
}

fn extend_path(base: &Path, continuation: &Path) -> Path {
    let mut events = base.events.clone();
    events.extend_from_slice(&continuation.events);
    Path { a: base.a, b: continuation.b, y_a: base.y_a.clone(), events }
}

/// Particle-filter construction of starting values: conditional draws at
/// the first time, equal-hazard propagation over the first window, then
/// alternating MCMC passes on the filled prefix (rates shrunk by `nu`
/// after every draw, precision held at `init_eta`) and best-of-`S`
/// simulated continuations to the next observation time.
pub fn initialize(ctx: &SamplerContext, config: &RunConfig) -> Result<ChainState, SamplerError> {
    config.validate()?;
    let eta0 = config.eta_fixed.unwrap_or(config.init_eta);
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let times = &ctx.obs.times;
    let n = times.len() - 1;

    // First window: equal-hazard particles from conditional starting values.
    let rate = 1.0 / (times[1] - times[0]);
    let mut best: Option<(f64, Path)> = None;
    for _ in 0..config.init_particles {
        let y0 =
            sample_initial_conditional(ctx.model, &ctx.obs.values[0], &ctx.observed, eta0, &mut rng);
        let particle =
            match simulate_equal_rate_path(ctx.model, rate, times[0], times[1], y0, &mut rng) {
                Ok(p) => p,
                Err(_) => continue,
            };
        let weight = log_obs_density(
            ctx.model,
            eta0,
            ctx.obs,
            &particle,
            &ctx.observed,
            times[0],
            times[1],
        );
        if best.as_ref().is_none_or(|(w, _)| weight > *w) {
            best = Some((weight, particle));
        }
    }
    let (_, path) = best.ok_or(SamplerError::InitFailed {
        time: times[1],
        particles: config.init_particles,
    })?;

    let stats = path_sufficient_stats(ctx.model, &path);
    let posteriors = theta_posterior(&ctx.prior.theta, &stats);
    let mut theta = Vec::with_capacity(posteriors.len());
    for post in &posteriors {
        theta.push(config.nu * post.sample("rate", &mut rng)?);
    }

    let mut state = ChainState::new(path, theta, eta0, rng);
    for l in 1..n {
        let prefix_ctx = SamplerContext {
            model: ctx.model,
            prior: ctx.prior,
            obs: ctx.obs,
            observed: ctx.observed.clone(),
            schedule: build_schedule(&times[..=l])?,
            totals: ctx.totals.clone(),
            eta_fixed: Some(eta0),
        };
        for _ in 0..config.init_sweeps {
            sweep(&prefix_ctx, &mut state);
            gibbs_theta(&prefix_ctx, &mut state)?;
            for t in &mut state.theta {
                *t *= config.nu;
            }
        }
        let y_l = state.path.final_state(ctx.model);
        let mut best: Option<(f64, Path)> = None;
        for _ in 0..config.init_particles {
            let continuation = match simulate_path(
                ctx.model,
                &state.theta,
                times[l],
                times[l + 1],
                y_l.clone(),
                &mut state.rng,
            ) {
                Ok(p) => p,
                Err(_) => continue,
            };
            let weight = log_obs_density(
                ctx.model,
                eta0,
                ctx.obs,
                &continuation,
                &ctx.observed,
                times[l + 1],
                times[l + 1],
            );
            if best.as_ref().is_none_or(|(w, _)| weight > *w) {
                best = Some((weight, continuation));
            }
        }
        let (_, continuation) = best.ok_or(SamplerError::InitFailed {
            time: times[l + 1],
            particles: config.init_particles,
        })?;
        state.path = extend_path(&state.path, &continuation);
    }
    // Fresh acceptance counters for the main run.
    Ok(ChainState::new(state.path, state.theta, state.eta, state.rng))
}
