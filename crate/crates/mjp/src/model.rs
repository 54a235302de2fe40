//! Model description and the two central data objects: jump paths and
//! observation series.
//!
//! A model couples a p x r jump matrix with one standardized intensity form
//! per reaction.  Intensity forms are products of binomial coefficients of
//! affine expressions in the state, optionally times a closed-form integrable
//! function of time; this covers mass-action kinetics (`binomial(y_j, order)`
//! per reactant) as well as capacity terms such as `K - y_j`.  The form keeps
//! intensities exactly integrable over path segments, which the conjugate
//! rate updates rely on.

use rand::Rng;
use std::collections::BTreeMap;
use thiserror::Error;

use crate::lattice::IntMatrix;

/// Species counts.  Components are conceptually non-negative; signed storage
/// lets jump arithmetic detect violations instead of wrapping.
pub type State = Vec<i64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("model validation failed: {0}")]
    Invalid(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PathError {
    #[error("event times must be strictly increasing within ({a}, {b}]")]
    NonMonotoneTimes { a: f64, b: f64 },
    #[error("reaction index {index} out of range for {n_reactions} reactions")]
    ReactionOutOfRange { index: usize, n_reactions: usize },
    #[error("interval end {b} not greater than start {a}")]
    EmptyInterval { a: f64, b: f64 },
}

/// Affine integer expression `sum_j coeffs[j] * y_j + constant`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineExpr {
    pub coeffs: Vec<i64>,
    pub constant: i64,
}

impl AffineExpr {
    /// Expression selecting a single species count.
    pub fn species(n_species: usize, j: usize) -> Self {
        let mut coeffs = vec![0; n_species];
        coeffs[j] = 1;
        AffineExpr { coeffs, constant: 0 }
    }

    pub fn eval(&self, y: &[i64]) -> i64 {
        let mut acc = self.constant;
        for (c, v) in self.coeffs.iter().zip(y) {
            acc += c * v;
        }
        acc
    }
}

/// One factor `binomial(affine(y), order)` of an intensity form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntensityFactor {
    pub affine: AffineExpr,
    pub order: u32,
}

/// Closed-form integrable time modulation of an intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeFactor {
    /// `phi(t) = t`
    Linear,
    /// `phi(t) = exp(rate * t)`
    Exponential(f64),
}

impl TimeFactor {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            TimeFactor::Linear => t,
            TimeFactor::Exponential(rate) => (rate * t).exp(),
        }
    }

    pub fn integral(&self, s: f64, t: f64) -> f64 {
        match *self {
            TimeFactor::Linear => 0.5 * (t * t - s * s),
            TimeFactor::Exponential(rate) => {
                if rate == 0.0 {
                    t - s
                } else {
                    ((rate * t).exp() - (rate * s).exp()) / rate
                }
            }
        }
    }
}

/// Standardized intensity `h_i(t, y)`: a product of binomial factors in the
/// state, optionally modulated by a time factor.  An empty factor list is the
/// constant 1.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityForm {
    pub factors: Vec<IntensityFactor>,
    pub time_factor: Option<TimeFactor>,
}

impl IntensityForm {
    pub fn state_part(&self, y: &[i64]) -> f64 {
        let mut prod = 1.0;
        for f in &self.factors {
            prod *= binomial(f.affine.eval(y), f.order);
            if prod == 0.0 {
                return 0.0;
            }
        }
        prod
    }

    pub fn value(&self, t: f64, y: &[i64]) -> f64 {
        let base = self.state_part(y);
        match self.time_factor {
            Some(tf) => base * tf.value(t),
            None => base,
        }
    }

    /// Exact integral of `h_i(u, y)` over `u` in `[s, t]` at frozen state `y`.
    pub fn integral(&self, s: f64, t: f64, y: &[i64]) -> f64 {
        let base = self.state_part(y);
        match self.time_factor {
            Some(tf) => base * tf.integral(s, t),
            None => base * (t - s),
        }
    }

    pub fn is_time_varying(&self) -> bool {
        self.time_factor.is_some()
    }
}

/// Binomial coefficient as a float; exact while the integer product fits in
/// i128 (which covers all arguments below 2^31 at the orders that occur in
/// kinetic models).  Zero for `n < k`.
pub fn binomial(n: i64, k: u32) -> f64 {
    if n < k as i64 {
        return 0.0;
    }
    let mut acc: i128 = 1;
    for i in 1..=k as i128 {
        match acc.checked_mul(n as i128 - k as i128 + i) {
            Some(v) => acc = v / i,
            None => {
                // Extremely large argument; continue in floating point.
                let mut f = acc as f64 / i as f64 * (n as f64 - k as f64 + i as f64);
                for l in (i + 1)..=k as i128 {
                    f *= (n as f64 - k as f64 + l as f64) / l as f64;
                }
                return f;
            }
        }
    }
    acc as f64
}

/// Per-species initial distribution; the joint initial law is the product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialSpec {
    Fixed(i64),
    Uniform { lo: i64, hi: i64 },
}

impl InitialSpec {
    pub fn log_density(&self, v: i64) -> f64 {
        match *self {
            InitialSpec::Fixed(x) => {
                if v == x {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            InitialSpec::Uniform { lo, hi } => {
                if v >= lo && v <= hi {
                    -(((hi - lo + 1) as f64).ln())
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> i64 {
        match *self {
            InitialSpec::Fixed(x) => x,
            InitialSpec::Uniform { lo, hi } => rng.random_range(lo..=hi),
        }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, InitialSpec::Fixed(_))
    }
}

/// Which species an observation scenario reports, and whether the error
/// precision is held fixed instead of sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub observed: Vec<bool>,
    pub eta_fixed: Option<f64>,
}

/// Full model description.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub name: String,
    pub species: Vec<String>,
    pub reactions: Vec<String>,
    /// Jump matrix, one column per reaction.
    pub a: IntMatrix,
    pub intensities: Vec<IntensityForm>,
    pub init: Vec<InitialSpec>,
    pub scenarios: BTreeMap<String, Scenario>,
}

impl ModelSpec {
    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn n_reactions(&self) -> usize {
        self.intensities.len()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let p = self.n_species();
        let r = self.n_reactions();
        if self.a.rows() != p || self.a.cols() != r {
            return Err(ModelError::Invalid(format!(
                "jump matrix is {}x{}, expected {}x{}",
                self.a.rows(),
                self.a.cols(),
                p,
                r
            )));
        }
        if self.reactions.len() != r {
            return Err(ModelError::Invalid("one name per reaction required".into()));
        }
        if self.init.len() != p {
            return Err(ModelError::Invalid("one initial spec per species required".into()));
        }
        for form in &self.intensities {
            for f in &form.factors {
                if f.affine.coeffs.len() != p {
                    return Err(ModelError::Invalid(
                        "affine coefficient length must equal species count".into(),
                    ));
                }
                if f.order == 0 {
                    return Err(ModelError::Invalid("factor order must be at least 1".into()));
                }
            }
        }
        for (lo, hi) in self.init.iter().filter_map(|s| match s {
            InitialSpec::Uniform { lo, hi } => Some((*lo, *hi)),
            InitialSpec::Fixed(_) => None,
        }) {
            if lo > hi || lo < 0 {
                return Err(ModelError::Invalid(format!("bad uniform range [{lo}, {hi}]")));
            }
        }
        for (name, sc) in &self.scenarios {
            if sc.observed.len() != p {
                return Err(ModelError::Invalid(format!(
                    "scenario {name} mask length must equal species count"
                )));
            }
            if let Some(eta) = sc.eta_fixed {
                if !(eta > 0.0) {
                    return Err(ModelError::Invalid(format!(
                        "scenario {name} fixed precision must be positive"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Standardized intensity `h_i(t, y)`.
    pub fn intensity(&self, i: usize, t: f64, y: &[i64]) -> f64 {
        self.intensities[i].value(t, y)
    }

    /// `integral_s^t h_i(u, y) du` at frozen state `y`.
    pub fn integrated_intensity(&self, i: usize, s: f64, t: f64, y: &[i64]) -> f64 {
        self.intensities[i].integral(s, t, y)
    }

    pub fn is_time_homogeneous(&self) -> bool {
        self.intensities.iter().all(|h| !h.is_time_varying())
    }

    /// State after firing reaction `i`, or `None` if a count would go
    /// negative.
    pub fn apply_reaction(&self, y: &[i64], i: usize) -> Option<State> {
        let mut out = y.to_vec();
        if self.apply_reaction_in_place(&mut out, i) {
            Some(out)
        } else {
            None
        }
    }

    /// In-place jump; returns false (state restored) when a count would go
    /// negative.
    pub fn apply_reaction_in_place(&self, y: &mut [i64], i: usize) -> bool {
        for row in 0..self.a.rows() {
            y[row] += self.a.get(row, i);
        }
        if y.iter().all(|&v| v >= 0) {
            true
        } else {
            for row in 0..self.a.rows() {
                y[row] -= self.a.get(row, i);
            }
            false
        }
    }

    pub fn log_init_density(&self, y: &[i64]) -> f64 {
        self.init.iter().zip(y).map(|(spec, &v)| spec.log_density(v)).sum()
    }

    pub fn sample_initial<R: Rng>(&self, rng: &mut R) -> State {
        self.init.iter().map(|spec| spec.sample(rng)).collect()
    }

    /// Species whose initial value is not a point mass; only these may move
    /// in a start-boundary update.
    pub fn free_initial_species(&self) -> Vec<usize> {
        (0..self.n_species()).filter(|&j| !self.init[j].is_fixed()).collect()
    }

    pub fn scenario(&self, name: &str) -> Option<&Scenario> {
        self.scenarios.get(name)
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s == name)
    }

    pub fn reaction_index(&self, name: &str) -> Option<usize> {
        self.reactions.iter().position(|s| s == name)
    }
}

/// One reaction event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub reaction: usize,
}

/// A jump path on `[a, b]`: the state at `a` plus the ordered events in
/// `(a, b]`.  States between events are implied by the jump matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub a: f64,
    pub b: f64,
    pub y_a: State,
    pub events: Vec<Event>,
}

impl Path {
    pub fn new(a: f64, b: f64, y_a: State, events: Vec<Event>, n_reactions: usize) -> Result<Self, PathError> {
        if !(b > a) {
            return Err(PathError::EmptyInterval { a, b });
        }
        let mut prev = a;
        for e in &events {
            if !(e.time > prev) || e.time > b {
                return Err(PathError::NonMonotoneTimes { a, b });
            }
            if e.reaction >= n_reactions {
                return Err(PathError::ReactionOutOfRange { index: e.reaction, n_reactions });
            }
            prev = e.time;
        }
        Ok(Path { a, b, y_a, events })
    }

    pub fn empty(a: f64, b: f64, y_a: State) -> Self {
        Path { a, b, y_a, events: Vec::new() }
    }

    pub fn n_events(&self) -> usize {
        self.events.len()
    }

    /// Event count per reaction type.
    pub fn reaction_totals(&self, n_reactions: usize) -> Vec<u64> {
        let mut totals = vec![0u64; n_reactions];
        for e in &self.events {
            totals[e.reaction] += 1;
        }
        totals
    }

    /// Visits the `n_events + 1` constant segments in order.  Each visit gets
    /// `(t_start, t_end, state_on_segment, event_ending_it)`; the final
    /// segment ends at `b` with no event.
    pub fn walk<F>(&self, model: &ModelSpec, mut visit: F)
    where
        F: FnMut(f64, f64, &[i64], Option<usize>),
    {
        let mut cur = self.y_a.clone();
        let mut t_prev = self.a;
        for e in &self.events {
            visit(t_prev, e.time, &cur, Some(e.reaction));
            for row in 0..model.a.rows() {
                cur[row] += model.a.get(row, e.reaction);
            }
            t_prev = e.time;
        }
        visit(t_prev, self.b, &cur, None);
    }

    /// All intermediate states stay non-negative.
    pub fn is_valid(&self, model: &ModelSpec) -> bool {
        let mut cur = self.y_a.clone();
        if cur.iter().any(|&v| v < 0) {
            return false;
        }
        for e in &self.events {
            if !model.apply_reaction_in_place(&mut cur, e.reaction) {
                return false;
            }
        }
        true
    }

    /// State at time `t` (events at exactly `t` included), `a <= t <= b`.
    pub fn state_at(&self, model: &ModelSpec, t: f64) -> State {
        let mut cur = self.y_a.clone();
        for e in &self.events {
            if e.time > t {
                break;
            }
            for row in 0..model.a.rows() {
                cur[row] += model.a.get(row, e.reaction);
            }
        }
        cur
    }

    pub fn final_state(&self, model: &ModelSpec) -> State {
        self.state_at(model, self.b)
    }

    /// States at an increasing list of query times in `[a, b]`, in one walk.
    pub fn states_at(&self, model: &ModelSpec, times: &[f64]) -> Vec<State> {
        let mut out = Vec::with_capacity(times.len());
        let mut cur = self.y_a.clone();
        let mut ev = self.events.iter().peekable();
        for &t in times {
            while let Some(e) = ev.peek() {
                if e.time <= t {
                    for row in 0..model.a.rows() {
                        cur[row] += model.a.get(row, e.reaction);
                    }
                    ev.next();
                } else {
                    break;
                }
            }
            out.push(cur.clone());
        }
        out
    }

    /// Sub-path on `[s, t]`: starting state evaluated at `s`, events in
    /// `(s, t]`.
    pub fn restrict(&self, model: &ModelSpec, s: f64, t: f64) -> Path {
        let y_s = self.state_at(model, s);
        let events = self
            .events
            .iter()
            .filter(|e| e.time > s && e.time <= t)
            .copied()
            .collect();
        Path { a: s, b: t, y_a: y_s, events }
    }

    /// Replaces the events in `(sub.a, sub.b]` with those of `sub`.  When the
    /// sub-path starts at `a`, its starting state is adopted (boundary
    /// updates move the state at `a`).
    pub fn splice(&self, sub: &Path) -> Path {
        let mut events = Vec::with_capacity(self.events.len() + sub.events.len());
        for e in &self.events {
            if e.time <= sub.a {
                events.push(*e);
            }
        }
        events.extend_from_slice(&sub.events);
        for e in &self.events {
            if e.time > sub.b {
                events.push(*e);
            }
        }
        let y_a = if sub.a == self.a { sub.y_a.clone() } else { self.y_a.clone() };
        Path { a: self.a, b: self.b, y_a, events }
    }
}

/// Observations on a time grid; `None` marks a missing entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSeries {
    pub times: Vec<f64>,
    /// Row per time point, one entry per species.
    pub values: Vec<Vec<Option<f64>>>,
    pub species: Vec<String>,
}

impl ObservationSeries {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.times.len() != self.values.len() {
            return Err(ModelError::Invalid("one value row per time point required".into()));
        }
        if !self.times.windows(2).all(|w| w[1] > w[0]) {
            return Err(ModelError::Invalid("observation times must be strictly increasing".into()));
        }
        let p = self.species.len();
        if self.values.iter().any(|row| row.len() != p) {
            return Err(ModelError::Invalid("ragged observation rows".into()));
        }
        if !self.values.iter().flatten().any(Option::is_some) {
            return Err(ModelError::Invalid("all observation entries are missing".into()));
        }
        Ok(())
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    /// Indices of observation times inside `[s, t]` (inclusive).
    pub fn indices_in(&self, s: f64, t: f64) -> impl Iterator<Item = usize> + '_ {
        self.times
            .iter()
            .enumerate()
            .filter(move |(_, &tt)| tt >= s && tt <= t)
            .map(|(i, _)| i)
    }
}
