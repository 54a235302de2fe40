//! Stochastic simulation of jump paths by the direct method.
//!
//! For time-varying intensities the waiting time is drawn from the rates
//! frozen at the current time (left-endpoint evaluation); models without a
//! time factor are simulated exactly.

use rand::Rng;
use thiserror::Error;

use crate::model::{Event, ModelSpec, Path, State};

/// Hard ceiling on events per simulated interval, guarding against
/// explosive parameter draws.
pub const DEFAULT_EVENT_CAP: usize = 10_000_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("event cap {cap} exceeded on [{a}, {b}]", a = .partial.a, b = .partial.b)]
    EventCapExceeded {
        cap: usize,
        /// Path built so far, ending at the time of the last accepted event.
        partial: Path,
    },
    #[error("reaction {reaction} at t = {time} would drive a count negative")]
    NegativeState { time: f64, reaction: usize },
}

/// Simulates a path on `[a, b]` started at `y_a` with rates
/// `theta[i] * h_i(t, y)`.
pub fn simulate_path<R: Rng>(
    model: &ModelSpec,
    theta: &[f64],
    a: f64,
    b: f64,
    y_a: State,
    rng: &mut R,
) -> Result<Path, SimError> {
    simulate_path_capped(model, theta, a, b, y_a, DEFAULT_EVENT_CAP, rng)
}

pub fn simulate_path_capped<R: Rng>(
    model: &ModelSpec,
    theta: &[f64],
    a: f64,
    b: f64,
    y_a: State,
    cap: usize,
    rng: &mut R,
) -> Result<Path, SimError> {
    simulate_with_rates(
        model,
        a,
        b,
        y_a,
        cap,
        rng,
        |t, y, rates| {
            for i in 0..model.n_reactions() {
                rates[i] = theta[i] * model.intensity(i, t, y);
            }
        },
    )
}

/// Simulates with every currently possible reaction (`h_i(t, y) > 0`) firing
/// at the same hazard `rate`, regardless of the magnitude of `h_i`.  Used to
/// explore reachable states without trusting any particular rate values.
pub fn simulate_equal_rate_path<R: Rng>(
    model: &ModelSpec,
    rate: f64,
    a: f64,
    b: f64,
    y_a: State,
    rng: &mut R,
) -> Result<Path, SimError> {
    simulate_with_rates(
        model,
        a,
        b,
        y_a,
        DEFAULT_EVENT_CAP,
        rng,
        |t, y, rates| {
            for i in 0..model.n_reactions() {
                rates[i] = if model.intensity(i, t, y) > 0.0 { rate } else { 0.0 };
            }
        },
    )
}

fn simulate_with_rates<R, F>(
    model: &ModelSpec,
    a: f64,
    b: f64,
    y_a: State,
    cap: usize,
    rng: &mut R,
    mut fill_rates: F,
) -> Result<Path, SimError>
where
    R: Rng,
    F: FnMut(f64, &[i64], &mut [f64]),
{
    let r = model.n_reactions();
    let mut rates = vec![0.0; r];
    let mut cur = y_a.clone();
    let mut t = a;
    let mut events = Vec::new();
    loop {
        fill_rates(t, &cur, &mut rates);
        let total: f64 = rates.iter().sum();
        if total <= 0.0 {
            break;
        }
        t += -rng.random::<f64>().ln() / total;
        if t > b {
            break;
        }
        if events.len() == cap {
            return Err(SimError::EventCapExceeded {
                cap,
                partial: Path { a, b: events.last().map_or(a, |e: &Event| e.time), y_a, events },
            });
        }
        let mut pick = rng.random::<f64>() * total;
        let mut reaction = r - 1;
        for (i, &rate) in rates.iter().enumerate() {
            pick -= rate;
            if pick <= 0.0 {
                reaction = i;
                break;
            }
        }
        if !model.apply_reaction_in_place(&mut cur, reaction) {
            return Err(SimError::NegativeState { time: t, reaction });
        }
        events.push(Event { time: t, reaction });
    }
    Ok(Path { a, b, y_a, events })
}
