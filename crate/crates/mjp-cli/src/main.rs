//! Command line front end: simulate synthetic data, run posterior inference,
//! and summarize inference output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

use mjp::config::{parse_model_config, parse_run_config, ModelBundle, RunSettings};
use mjp::gillespie::simulate_path;
use mjp::model::Scenario;
use mjp::sampler::{initialize, run_chain, RunConfig, RunOutput, SamplerContext};
use mjp::{io, summary, ObservationSeries};

#[derive(Parser)]
#[command(
    name = "mjp",
    version,
    about = "Bayesian inference for Markov jump processes from noisy time series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one trajectory from a model and write noisy observations of it.
    Simulate(SimulateArgs),
    /// Sample the posterior of rates, noise precision and latent paths.
    Infer(InferArgs),
    /// Summarize traces produced by `infer`.
    Summarize(SummarizeArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Model configuration (JSON).
    #[arg(long)]
    model: PathBuf,
    /// Run configuration (JSON) with a `simulate` block.
    #[arg(long)]
    run: PathBuf,
    /// Overrides the seed from the run configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InferArgs {
    /// Model configuration (JSON).
    #[arg(long)]
    model: PathBuf,
    /// Observation table (CSV with header `t,<species...>`, `na` for missing).
    #[arg(long)]
    obs: PathBuf,
    /// Run configuration (JSON).
    #[arg(long)]
    run: PathBuf,
    /// Overrides the seed from the run configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of independent chains; chain j uses seed + j - 1.
    #[arg(long, default_value_t = 1)]
    chains: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SummarizeArgs {
    /// Directory holding `trace_*.csv` (and `latent_*.csv`) from `infer`;
    /// summary tables are written next to them.
    #[arg(long)]
    out: PathBuf,
    /// Fraction of each chain discarded before summarizing.
    #[arg(long, default_value_t = 0.5)]
    burn_in: f64,
}

enum AppError {
    Config(String),
    Runtime(String),
}

type AppResult<T> = Result<T, AppError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Infer(args) => infer(args),
        Command::Summarize(args) => summarize(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(AppError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn read_to_string(path: &FsPath) -> AppResult<String> {
    fs::read_to_string(path)
        .map_err(|e| AppError::Config(format!("cannot read {}: {e}", path.display())))
}

fn load_model(path: &FsPath) -> AppResult<(ModelBundle, String)> {
    let text = read_to_string(path)?;
    let bundle = parse_model_config(&text)
        .map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
    Ok((bundle, text))
}

fn load_run(path: &FsPath) -> AppResult<(RunSettings, String)> {
    let text = read_to_string(path)?;
    let settings = parse_run_config(&text)
        .map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
    Ok((settings, text))
}

fn sha256_hex(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        let _ = write!(hex, "{byte:02x}");
    }
    hex
}

fn write_file(dir: &FsPath, name: &str, contents: &str) -> AppResult<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents)
        .map_err(|e| AppError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn ensure_dir(dir: &FsPath) -> AppResult<()> {
    fs::create_dir_all(dir)
        .map_err(|e| AppError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

/// Resolves the scenario named in the run file; with none given, every
/// species is observed and the noise precision is sampled.
fn resolve_scenario(
    bundle: &ModelBundle,
    settings: &RunSettings,
) -> AppResult<(Option<String>, Scenario)> {
    match &settings.scenario {
        None => Ok((
            None,
            Scenario { observed: vec![true; bundle.model.n_species()], eta_fixed: None },
        )),
        Some(name) => {
            let sc = bundle.model.scenario(name).ok_or_else(|| {
                AppError::Config(format!("model defines no scenario named `{name}`"))
            })?;
            Ok((Some(name.clone()), sc.clone()))
        }
    }
}

fn simulate(args: SimulateArgs) -> AppResult<()> {
    let (bundle, model_text) = load_model(&args.model)?;
    let (settings, run_text) = load_run(&args.run)?;
    let model = &bundle.model;
    let sim = settings.simulate.as_ref().ok_or_else(|| {
        AppError::Config("run configuration has no `simulate` block".to_string())
    })?;
    if sim.theta.len() != model.n_reactions() {
        return Err(AppError::Config(format!(
            "simulate.theta has {} entries, model has {} reactions",
            sim.theta.len(),
            model.n_reactions()
        )));
    }
    if sim.times.len() < 2 {
        return Err(AppError::Config("simulate.times needs at least two points".into()));
    }
    let (scenario_name, scenario) = resolve_scenario(&bundle, &settings)?;
    let seed = args.seed.unwrap_or(settings.run.seed);

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let y0: Vec<i64> = model.init.iter().map(|spec| spec.sample(&mut rng)).collect();
    let (a, b) = (sim.times[0], *sim.times.last().unwrap());
    let path = simulate_path(model, &sim.theta, a, b, y0, &mut rng)
        .map_err(|e| AppError::Runtime(format!("simulation failed: {e}")))?;

    let states = path.states_at(model, &sim.times);
    let noise_sd = sim.eta.map(|eta| (1.0 / eta).sqrt());
    let values: Vec<Vec<Option<f64>>> = states
        .iter()
        .map(|state| {
            state
                .iter()
                .zip(&scenario.observed)
                .map(|(&y, &seen)| {
                    if !seen {
                        return None;
                    }
                    Some(match noise_sd {
                        Some(sd) => y as f64 + sd * rng.sample::<f64, _>(rand_distr::StandardNormal),
                        None => y as f64,
                    })
                })
                .collect()
        })
        .collect();
    let obs = ObservationSeries {
        times: sim.times.clone(),
        values,
        species: model.species.clone(),
    };

    ensure_dir(&args.out)?;
    let obs_path = write_file(&args.out, "observations.csv", &io::write_observations(&obs))?;
    write_file(&args.out, "path.csv", &io::write_path(model, &path))?;
    let manifest = serde_json::json!({
        "command": "simulate",
        "model": model.name,
        "model_sha256": sha256_hex(&model_text),
        "run_sha256": sha256_hex(&run_text),
        "seed": seed,
        "scenario": scenario_name,
        "theta": sim.theta,
        "eta": sim.eta,
        "times": sim.times.len(),
        "events": path.events.len(),
    });
    write_file(&args.out, "manifest.json", &format!("{manifest:#}\n"))?;
    println!(
        "simulated {} events on [{a}, {b}], observations in {}",
        path.events.len(),
        obs_path.display()
    );
    Ok(())
}

/// Reorders observation columns to the model's species order; species absent
/// from the file become all-missing columns.
fn align_observations(
    model_species: &[String],
    obs: &ObservationSeries,
) -> AppResult<ObservationSeries> {
    for s in &obs.species {
        if !model_species.contains(s) {
            return Err(AppError::Config(format!(
                "observation column `{s}` is not a model species"
            )));
        }
    }
    let columns: Vec<Option<usize>> = model_species
        .iter()
        .map(|s| obs.species.iter().position(|o| o == s))
        .collect();
    let values = obs
        .values
        .iter()
        .map(|row| columns.iter().map(|c| c.and_then(|j| row[j])).collect())
        .collect();
    Ok(ObservationSeries {
        times: obs.times.clone(),
        values,
        species: model_species.to_vec(),
    })
}

fn infer(args: InferArgs) -> AppResult<()> {
    let (bundle, model_text) = load_model(&args.model)?;
    let obs_text = read_to_string(&args.obs)?;
    let raw_obs = io::read_observations(&obs_text)
        .map_err(|e| AppError::Config(format!("{}: {e}", args.obs.display())))?;
    let (settings, run_text) = load_run(&args.run)?;
    if args.chains == 0 {
        return Err(AppError::Config("--chains must be at least 1".into()));
    }

    let model = &bundle.model;
    let prior = &bundle.prior;
    let obs = align_observations(&model.species, &raw_obs)?;
    let (scenario_name, scenario) = resolve_scenario(&bundle, &settings)?;
    let seed = args.seed.unwrap_or(settings.run.seed);
    let mut base_config = settings.run.clone();
    base_config.seed = seed;
    base_config.eta_fixed = base_config.eta_fixed.or(scenario.eta_fixed);

    // Masked entries play no role in the likelihood; drop them so validation
    // and the initializer see only what the scenario exposes.
    let mut obs = obs;
    for row in &mut obs.values {
        for (entry, &seen) in row.iter_mut().zip(&scenario.observed) {
            if !seen {
                *entry = None;
            }
        }
    }
    obs.validate()
        .map_err(|e| AppError::Config(format!("observations: {e}")))?;

    ensure_dir(&args.out)?;
    let chains = args.chains;
    let mut results: Vec<Option<Result<(RunConfig, RunOutput), String>>> =
        (0..chains).map(|_| None).collect();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for chain in 0..chains {
            let mut config = base_config.clone();
            config.seed = seed + chain;
            let observed = scenario.observed.clone();
            let (model, prior, obs) = (&*model, prior, &obs);
            handles.push(scope.spawn(move || {
                let ctx = SamplerContext::new(model, prior, obs, observed, &config)
                    .map_err(|e| e.to_string())?;
                let state = initialize(&ctx, &config).map_err(|e| e.to_string())?;
                let output = run_chain(&ctx, &config, state).map_err(|e| e.to_string())?;
                Ok::<_, String>((config, output))
            }));
        }
        for (slot, handle) in results.iter_mut().zip(handles) {
            *slot = Some(handle.join().expect("chain thread panicked"));
        }
    });

    let mut chain_reports = Vec::new();
    for (k, slot) in results.into_iter().enumerate() {
        let chain_no = k + 1;
        let (config, output) = slot
            .expect("chain result missing")
            .map_err(|e| AppError::Runtime(format!("chain {chain_no}: {e}")))?;
        write_file(
            &args.out,
            &format!("trace_{chain_no}.csv"),
            &io::write_trace(&output.trace, model.n_reactions()),
        )?;
        write_file(
            &args.out,
            &format!("latent_{chain_no}.csv"),
            &io::write_latent(&output.latent, &obs.times, &model.species),
        )?;
        if !output.snapshots.is_empty() {
            write_file(
                &args.out,
                &format!("paths_{chain_no}.csv"),
                &io::write_path_snapshots(model, &output.snapshots),
            )?;
        }
        let stats = &output.state.stats;
        let pooled = stats.pooled();
        println!(
            "chain {chain_no}: seed {}, acceptance {:.1}% (base {:.1}%, midpoint {:.1}%, border {:.1}%)",
            config.seed,
            100.0 * pooled.rate(),
            100.0 * stats.base.rate(),
            100.0 * stats.midpoint.rate(),
            100.0 * stats.border.rate(),
        );
        chain_reports.push(serde_json::json!({
            "chain": chain_no,
            "seed": config.seed,
            "acceptance": {
                "base": stats.base.rate(),
                "midpoint": stats.midpoint.rate(),
                "border": stats.border.rate(),
                "pooled": pooled.rate(),
            },
            "proposed": pooled.proposed,
        }));
    }

    let manifest = serde_json::json!({
        "command": "infer",
        "model": model.name,
        "model_sha256": sha256_hex(&model_text),
        "obs_sha256": sha256_hex(&obs_text),
        "run_sha256": sha256_hex(&run_text),
        "seed": seed,
        "chains": chains,
        "scenario": scenario_name,
        "iterations": base_config.iterations,
        "thinning": base_config.thinning,
        "eta_fixed": base_config.eta_fixed,
        "chain_stats": chain_reports,
    });
    write_file(&args.out, "manifest.json", &format!("{manifest:#}\n"))?;
    println!("wrote {} chain(s) to {}", chains, args.out.display());
    Ok(())
}

fn summarize(args: SummarizeArgs) -> AppResult<()> {
    if !(0.0..1.0).contains(&args.burn_in) {
        return Err(AppError::Config("--burn-in must be in [0, 1)".into()));
    }
    let entries = fs::read_dir(&args.out)
        .map_err(|e| AppError::Config(format!("cannot read {}: {e}", args.out.display())))?;
    let mut trace_files = Vec::new();
    let mut latent_files = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|e| AppError::Runtime(e.to_string()))?
            .path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        if name.starts_with("trace_") && name.ends_with(".csv") {
            trace_files.push(path);
        } else if name.starts_with("latent_") && name.ends_with(".csv") {
            latent_files.push(path);
        }
    }
    if trace_files.is_empty() {
        return Err(AppError::Config(format!(
            "no trace_*.csv files in {}",
            args.out.display()
        )));
    }
    trace_files.sort();
    latent_files.sort();

    let mut kept_rows = Vec::new();
    for file in &trace_files {
        let rows = io::read_trace(&read_to_string(file)?)
            .map_err(|e| AppError::Config(format!("{}: {e}", file.display())))?;
        let start = summary::burn_start(rows.len(), args.burn_in);
        kept_rows.extend_from_slice(&rows[start..]);
    }
    if kept_rows.is_empty() {
        return Err(AppError::Config("traces contain no rows".into()));
    }

    let params = summary::summarize_params(&kept_rows, 0.0);
    write_file(&args.out, "summary_params.csv", &summary::write_param_summaries(&params))?;
    let grids = summary::density_grids(&kept_rows, 0.0);
    write_file(&args.out, "density_grid.csv", &summary::write_density_grids(&grids))?;

    let mut latent_records = Vec::new();
    for file in &latent_files {
        let records = io::read_latent(&read_to_string(file)?)
            .map_err(|e| AppError::Config(format!("{}: {e}", file.display())))?;
        latent_records.extend(records);
    }
    if !latent_records.is_empty() {
        let bands = summary::latent_bands(&latent_records, args.burn_in);
        write_file(&args.out, "latent_bands.csv", &summary::write_latent_bands(&bands))?;
    }

    println!(
        "{} trace file(s), {} retained draws (burn-in {})",
        trace_files.len(),
        kept_rows.len(),
        args.burn_in
    );
    println!("{:<12} {:>12} {:>12} {:>12} {:>12}", "param", "mean", "median", "q2.5", "q97.5");
    for p in params.iter().filter(|p| p.name.starts_with("theta_") || p.name == "eta") {
        println!(
            "{:<12} {:>12.5} {:>12.5} {:>12.5} {:>12.5}",
            p.name, p.mean, p.median, p.lo, p.hi
        );
    }
    Ok(())
}
