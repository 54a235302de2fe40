//! JSON configuration parsing for models and runs.
//!
//! A model file describes species, reactions (jump vectors plus intensity
//! factors), the initial law, the error model, priors, and named
//! observation scenarios.  A run file holds sampler tunings, the scenario
//! selection, and an optional synthetic-data block for `simulate`.

use std::collections::BTreeMap;

use serde::Deserialize;
use thiserror::Error;

use crate::likelihood::{GammaParams, PriorSpec};
use crate::model::{
    AffineExpr, InitialSpec, IntensityFactor, IntensityForm, ModelError, ModelSpec, Scenario,
    TimeFactor,
};
use crate::proposal::ZLaw;
use crate::sampler::RunConfig;
use crate::IntMatrix;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("config field error: {0}")]
    Field(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("prior error: {0}")]
    Prior(#[from] crate::likelihood::LikelihoodError),
}

fn field_err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Field(msg.into()))
}

/// Integer literal or a reference into the `constants` map.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum IntOrConst {
    Int(i64),
    Name(String),
}

impl IntOrConst {
    fn resolve(&self, constants: &BTreeMap<String, i64>) -> Result<i64, ConfigError> {
        match self {
            IntOrConst::Int(v) => Ok(*v),
            IntOrConst::Name(n) => constants
                .get(n)
                .copied()
                .ok_or_else(|| ConfigError::Field(format!("unknown constant `{n}`"))),
        }
    }
}

fn default_order() -> u32 {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFactor {
    #[serde(default)]
    species: Option<String>,
    #[serde(default)]
    coeffs: BTreeMap<String, i64>,
    #[serde(default)]
    constant: Option<IntOrConst>,
    #[serde(default = "default_order")]
    order: u32,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawTime {
    Name(String),
    Exponential { exponential: f64 },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntensity {
    #[serde(default)]
    factors: Vec<RawFactor>,
    #[serde(default)]
    time: Option<RawTime>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReaction {
    name: String,
    jump: Vec<i64>,
    #[serde(default)]
    intensity: RawIntensity,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawInit {
    Fixed { fixed: IntOrConst },
    Uniform { uniform: RawRange },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRange {
    lo: IntOrConst,
    hi: IntOrConst,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGamma {
    shape: f64,
    rate: f64,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawThetaPrior {
    Shared(RawGamma),
    PerReaction(Vec<RawGamma>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPriors {
    theta: RawThetaPrior,
    #[serde(default)]
    pairs: Vec<(String, String)>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawErrorModel {
    eta_prior: RawGamma,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    observed: Vec<String>,
    #[serde(default)]
    eta_fixed: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    name: String,
    species: Vec<String>,
    #[serde(default)]
    constants: BTreeMap<String, i64>,
    reactions: Vec<RawReaction>,
    init: BTreeMap<String, RawInit>,
    error_model: RawErrorModel,
    priors: RawPriors,
    #[serde(default)]
    scenarios: BTreeMap<String, RawScenario>,
}

/// A parsed model file: the process definition together with its priors.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub model: ModelSpec,
    pub prior: PriorSpec,
}

pub fn parse_model_config(text: &str) -> Result<ModelBundle, ConfigError> {
    let raw: RawModel = serde_json::from_str(text)?;
    let p = raw.species.len();
    let species_index = |name: &str| -> Result<usize, ConfigError> {
        raw.species
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| ConfigError::Field(format!("unknown species `{name}`")))
    };

    let mut jump_cols = Vec::with_capacity(raw.reactions.len());
    let mut intensities = Vec::with_capacity(raw.reactions.len());
    let mut names = Vec::with_capacity(raw.reactions.len());
    for reaction in &raw.reactions {
        if reaction.jump.len() != p {
            return field_err(format!(
                "reaction `{}`: jump vector has {} entries, expected {p}",
                reaction.name,
                reaction.jump.len()
            ));
        }
        jump_cols.push(reaction.jump.clone());
        let mut factors = Vec::with_capacity(reaction.intensity.factors.len());
        for f in &reaction.intensity.factors {
            let affine = match (&f.species, f.coeffs.is_empty(), &f.constant) {
                (Some(name), true, None) => AffineExpr::species(p, species_index(name)?),
                (None, _, _) if !f.coeffs.is_empty() || f.constant.is_some() => {
                    let mut coeffs = vec![0i64; p];
                    for (name, c) in &f.coeffs {
                        coeffs[species_index(name)?] = *c;
                    }
                    let constant = match &f.constant {
                        Some(c) => c.resolve(&raw.constants)?,
                        None => 0,
                    };
                    AffineExpr { coeffs, constant }
                }
                _ => {
                    return field_err(format!(
                        "reaction `{}`: factor needs either `species` or `coeffs`/`constant`",
                        reaction.name
                    ))
                }
            };
            factors.push(IntensityFactor { affine, order: f.order });
        }
        let time_factor = match &reaction.intensity.time {
            None => None,
            Some(RawTime::Name(n)) if n == "linear" => Some(TimeFactor::Linear),
            Some(RawTime::Name(n)) => {
                return field_err(format!("unknown time factor `{n}` (expected \"linear\")"))
            }
            Some(RawTime::Exponential { exponential }) => {
                Some(TimeFactor::Exponential(*exponential))
            }
        };
        intensities.push(IntensityForm { factors, time_factor });
        names.push(reaction.name.clone());
    }

    let mut init = Vec::with_capacity(p);
    for s in &raw.species {
        let spec = raw
            .init
            .get(s)
            .ok_or_else(|| ConfigError::Field(format!("missing init entry for species `{s}`")))?;
        init.push(match spec {
            RawInit::Fixed { fixed } => InitialSpec::Fixed(fixed.resolve(&raw.constants)?),
            RawInit::Uniform { uniform } => InitialSpec::Uniform {
                lo: uniform.lo.resolve(&raw.constants)?,
                hi: uniform.hi.resolve(&raw.constants)?,
            },
        });
    }
    for key in raw.init.keys() {
        if !raw.species.iter().any(|s| s == key) {
            return field_err(format!("init entry for unknown species `{key}`"));
        }
    }

    let mut scenarios = BTreeMap::new();
    for (name, sc) in &raw.scenarios {
        let mut observed = vec![false; p];
        for s in &sc.observed {
            observed[species_index(s)?] = true;
        }
        scenarios.insert(name.clone(), Scenario { observed, eta_fixed: sc.eta_fixed });
    }

    let model = ModelSpec {
        name: raw.name,
        species: raw.species,
        reactions: names,
        a: IntMatrix::from_cols(&jump_cols),
        intensities,
        init,
        scenarios,
    };
    model.validate()?;

    let r = model.n_reactions();
    let theta = match &raw.priors.theta {
        RawThetaPrior::Shared(g) => vec![GammaParams::new(g.shape, g.rate); r],
        RawThetaPrior::PerReaction(v) => {
            if v.len() != r {
                return field_err(format!(
                    "priors.theta has {} entries, expected {r}",
                    v.len()
                ));
            }
            v.iter().map(|g| GammaParams::new(g.shape, g.rate)).collect()
        }
    };
    let mut pairs = Vec::with_capacity(raw.priors.pairs.len());
    for (a, b) in &raw.priors.pairs {
        let find = |n: &str| {
            model
                .reactions
                .iter()
                .position(|r| r == n)
                .ok_or_else(|| ConfigError::Field(format!("unknown reaction `{n}` in pairs")))
        };
        pairs.push((find(a)?, find(b)?));
    }
    let prior = PriorSpec {
        theta,
        eta: GammaParams::new(raw.error_model.eta_prior.shape, raw.error_model.eta_prior.rate),
        pairs,
    };
    prior.validate(r)?;

    Ok(ModelBundle { model, prior })
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawZLaw {
    SignedBinomial { signed_binomial: RawSignedBinomial },
    Table { table: Vec<RawZEntry> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSignedBinomial {
    trials: u64,
    iota: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawZEntry {
    z: Vec<i64>,
    p: f64,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawTimes {
    List(Vec<f64>),
    Grid { from: f64, to: f64, step: f64 },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulate {
    theta: Vec<f64>,
    #[serde(default)]
    eta: Option<f64>,
    times: RawTimes,
}

fn default_thinning() -> u64 {
    1
}
fn default_nu() -> f64 {
    0.95
}
fn default_particles() -> usize {
    150
}
fn default_sweeps() -> u64 {
    150
}
fn default_init_eta() -> f64 {
    10.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    #[serde(default)]
    iterations: u64,
    #[serde(default = "default_thinning")]
    thinning: u64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    z_law: Option<RawZLaw>,
    #[serde(default)]
    schedule_times: Option<Vec<f64>>,
    #[serde(default = "default_nu")]
    nu: f64,
    #[serde(default = "default_particles")]
    init_particles: usize,
    #[serde(default = "default_sweeps")]
    init_sweeps: u64,
    #[serde(default = "default_init_eta")]
    init_eta: f64,
    #[serde(default)]
    eta_fixed: Option<f64>,
    #[serde(default)]
    path_snapshot_every: u64,
    #[serde(default)]
    scenario: Option<String>,
    #[serde(default)]
    simulate: Option<RawSimulate>,
}

/// Synthetic-data generation block of a run file.
#[derive(Debug, Clone)]
pub struct SimulateSpec {
    pub theta: Vec<f64>,
    /// Gaussian noise precision; exact observations when absent.
    pub eta: Option<f64>,
    pub times: Vec<f64>,
}

/// A parsed run file.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub run: RunConfig,
    pub scenario: Option<String>,
    pub simulate: Option<SimulateSpec>,
}

fn expand_times(times: &RawTimes) -> Result<Vec<f64>, ConfigError> {
    match times {
        RawTimes::List(v) => Ok(v.clone()),
        RawTimes::Grid { from, to, step } => {
            if !(*step > 0.0) || to < from {
                return field_err("times grid needs step > 0 and to >= from");
            }
            let n = ((to - from) / step).round() as usize;
            Ok((0..=n).map(|k| from + step * k as f64).collect())
        }
    }
}

pub fn parse_run_config(text: &str) -> Result<RunSettings, ConfigError> {
    let raw: RawRun = serde_json::from_str(text)?;
    let z_law = match raw.z_law {
        None => ZLaw::SignedBinomial { trials: 2, iota: 0.4 },
        Some(RawZLaw::SignedBinomial { signed_binomial }) => ZLaw::SignedBinomial {
            trials: signed_binomial.trials,
            iota: signed_binomial.iota,
        },
        Some(RawZLaw::Table { table }) => {
            ZLaw::Table(table.into_iter().map(|e| (e.z, e.p)).collect())
        }
    };
    let simulate = match &raw.simulate {
        None => None,
        Some(s) => Some(SimulateSpec {
            theta: s.theta.clone(),
            eta: s.eta,
            times: expand_times(&s.times)?,
        }),
    };
    Ok(RunSettings {
        run: RunConfig {
            iterations: raw.iterations,
            thinning: raw.thinning,
            seed: raw.seed,
            z_law,
            schedule_times: raw.schedule_times,
            nu: raw.nu,
            init_particles: raw.init_particles,
            init_sweeps: raw.init_sweeps,
            init_eta: raw.init_eta,
            eta_fixed: raw.eta_fixed,
            path_snapshot_every: raw.path_snapshot_every,
        },
        scenario: raw.scenario,
        simulate,
    })
}

/// The three-species oscillator model shipped with the crate.
pub fn oregonator() -> ModelBundle {
    parse_model_config(include_str!("../../../configs/oregonator.json"))
        .expect("embedded oregonator config is valid")
}

/// The gene auto-regulation model shipped with the crate.
pub fn prokaryotic() -> ModelBundle {
    parse_model_config(include_str!("../../../configs/prokaryotic.json"))
        .expect("embedded prokaryotic config is valid")
}
