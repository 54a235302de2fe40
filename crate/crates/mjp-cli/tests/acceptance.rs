//! End-to-end acceptance checks for the sampler and the command line tool.
//! Each test covers one numbered criterion and prints a single [PASS] line
//! (visible with `--nocapture`); a failing assertion marks the criterion as
//! not met.

use std::collections::BTreeMap;
use std::process::Command;
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use mjp::config;
use mjp::gillespie::simulate_path;
use mjp::lattice::{kernel_basis, kernel_basis_excluding_row, same_lattice};
use mjp::likelihood::{
    eta_posterior, path_sufficient_stats, theta_posterior, GammaParams, PriorSpec,
};
use mjp::model::{AffineExpr, Event, InitialSpec, IntensityFactor, IntensityForm, ModelSpec};
use mjp::proposal::{dirichlet_params, non_kernel_columns};
use mjp::sampler::{
    gibbs_eta, gibbs_theta, initialize, run_chain, sweep, ChainState, IntervalKind, RunConfig,
    SamplerContext, Schedule, ScheduleEntry,
};
use mjp::summary::quantile;
use mjp::{IntMatrix, ObservationSeries, Path, ZLaw};

fn immigration_death(init: InitialSpec) -> ModelSpec {
    ModelSpec {
        name: "imm-death".into(),
        species: vec!["N".into()],
        reactions: vec!["R1".into(), "R2".into()],
        a: IntMatrix::from_rows(&[vec![1, -1]]),
        intensities: vec![
            IntensityForm { factors: vec![], time_factor: None },
            IntensityForm {
                factors: vec![IntensityFactor { affine: AffineExpr::species(1, 0), order: 1 }],
                time_factor: None,
            },
        ],
        init: vec![init],
        scenarios: BTreeMap::new(),
    }
}

/// Asymptotic one-sample Kolmogorov-Smirnov p-value.
fn ks_pvalue(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    let t = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..=100u32 {
        let k = k as f64;
        p += 2.0 * (-1.0f64).powi(k as i32 - 1) * (-2.0 * k * k * t * t).exp();
    }
    p.clamp(0.0, 1.0)
}

fn central_interval(values: &[f64]) -> (f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    (quantile(&sorted, 0.025), quantile(&sorted, 0.975))
}

#[test]
fn criterion_1_lattice_exactness() {
    let start = Instant::now();

    let oreg = config::oregonator().model;
    let basis = kernel_basis(&oreg.a).unwrap();
    assert_eq!(oreg.a.mul(&basis).unwrap(), IntMatrix::zeros(3, basis.cols()));
    let printed = IntMatrix::from_cols(&[vec![1, -1, 0, 1, 0], vec![1, 0, 1, 1, 1]]);
    assert_eq!(oreg.a.mul(&printed).unwrap(), IntMatrix::zeros(3, 2));
    assert!(same_lattice(&basis, &printed).unwrap());

    let prok = config::prokaryotic().model;
    let basis = kernel_basis(&prok.a).unwrap();
    assert_eq!(prok.a.mul(&basis).unwrap(), IntMatrix::zeros(4, basis.cols()));
    let printed = IntMatrix::from_cols(&[
        vec![1, 1, 0, 0, 0, 0, 0, 0],
        vec![0, 0, 0, 0, 1, 1, 0, 0],
        vec![0, 0, 1, 0, 0, 0, 1, 0],
        vec![0, 0, 0, 1, 0, 0, 0, 1],
    ]);
    assert_eq!(prok.a.mul(&printed).unwrap(), IntMatrix::zeros(4, 4));
    assert!(same_lattice(&basis, &printed).unwrap());

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!("[PASS] criterion 1: kernel bases exact, match published lattices ({elapsed:?})");
}

#[test]
fn criterion_2_border_bases() {
    let oreg = config::oregonator().model;
    let ours = kernel_basis_excluding_row(&oreg.a, 0).unwrap();
    let published =
        IntMatrix::from_cols(&[vec![1, -1, 0, 0, 0], vec![0, 0, 0, 1, 0], vec![0, 1, 1, 0, 1]]);
    assert!(same_lattice(&ours, &published).unwrap());
    // The filter drops exactly the third published vector, which already
    // lies in the kernel of the full matrix.
    let kept = non_kernel_columns(&oreg.a, &published);
    assert_eq!(kept, vec![vec![1, -1, 0, 0, 0], vec![0, 0, 0, 1, 0]]);
    let kept_ours = non_kernel_columns(&oreg.a, &ours);
    assert!(!kept_ours.is_empty());
    for v in &kept_ours {
        assert!(oreg.a.mul_vec(v).unwrap().iter().any(|&x| x != 0));
    }

    let prok = config::prokaryotic().model;
    let ours = kernel_basis_excluding_row(&prok.a, 3).unwrap();
    let published = IntMatrix::from_cols(&[
        vec![1, 1, 0, 0, 0, 0, 0, 0],
        vec![0, 0, 0, 0, 1, 1, 0, 0],
        vec![0, 0, 1, 0, 0, 0, 1, 0],
        vec![0, 0, 0, 1, 0, 0, 0, 1],
        vec![0, -1, 0, 2, 1, 0, 0, 0],
    ]);
    assert!(same_lattice(&ours, &published).unwrap());

    println!("[PASS] criterion 2: border bases match published row-deleted lattices");
}

#[test]
fn criterion_3_conjugacy_exactness() {
    // Fixture 1: one always-on reaction on [0, 2], no events.
    let constant = ModelSpec {
        name: "const".into(),
        species: vec!["N".into()],
        reactions: vec!["R1".into()],
        a: IntMatrix::from_rows(&[vec![1]]),
        intensities: vec![IntensityForm { factors: vec![], time_factor: None }],
        init: vec![InitialSpec::Fixed(0)],
        scenarios: BTreeMap::new(),
    };
    let stats = path_sufficient_stats(&constant, &Path::empty(0.0, 2.0, vec![0]));
    let post = theta_posterior(&[GammaParams::new(0.1, 1.0)], &stats);
    assert_eq!(post, vec![GammaParams::new(0.1, 3.0)]);

    // Fixture 2: immigration-death on [0, 4] with three events; integrated
    // intensities are exactly (4, 9.75).
    let imd = immigration_death(InitialSpec::Fixed(2));
    let path = Path {
        a: 0.0,
        b: 4.0,
        y_a: vec![2],
        events: vec![
            Event { time: 0.5, reaction: 0 },
            Event { time: 1.25, reaction: 1 },
            Event { time: 3.0, reaction: 0 },
        ],
    };
    let stats = path_sufficient_stats(&imd, &path);
    let post = theta_posterior(&[GammaParams::new(0.5, 2.0), GammaParams::new(1.5, 0.25)], &stats);
    assert_eq!(post, vec![GammaParams::new(2.5, 6.0), GammaParams::new(2.5, 10.0)]);

    // Fixture 3: three-species oscillator path with one event each of three
    // reaction types; integrals are dyadic rationals, hence exact.
    let oreg = config::oregonator().model;
    let path3 = Path {
        a: 0.0,
        b: 2.0,
        y_a: vec![2, 3, 1],
        events: vec![
            Event { time: 0.25, reaction: 1 },
            Event { time: 0.5, reaction: 2 },
            Event { time: 1.0, reaction: 4 },
        ],
    };
    let stats = path_sufficient_stats(&oreg, &path3);
    let post = theta_posterior(&vec![GammaParams::new(0.1, 1.0); 5], &stats);
    let shapes: Vec<f64> = post.iter().map(|g| g.shape).collect();
    let rates: Vec<f64> = post.iter().map(|g| g.rate).collect();
    assert_eq!(shapes, vec![0.1, 1.1, 1.1, 0.1, 1.1]);
    assert_eq!(rates, vec![6.25, 11.0, 4.75, 2.75, 3.5]);

    // Noise precision on fixture 2: residuals 0.5, -0.5, 1.0 at three
    // observed points give shape + 3/2 and rate + 1.5/2.
    let obs = ObservationSeries {
        times: vec![0.0, 2.0, 4.0],
        values: vec![vec![Some(2.5)], vec![Some(1.5)], vec![Some(4.0)]],
        species: vec!["N".into()],
    };
    let post = eta_posterior(GammaParams::new(1.0, 0.5), &imd, &obs, &path, &[true]).unwrap();
    assert_eq!(post, GammaParams::new(2.5, 1.25));

    println!("[PASS] criterion 3: conjugate updates exact on all stored fixtures");
}

#[test]
fn criterion_4_gillespie_law() {
    let start = Instant::now();
    let model = immigration_death(InitialSpec::Fixed(3));
    let theta = vec![3.0, 1.0];

    // Ergodic check: long-run time average of the count near theta1/theta2.
    let mut rng = ChaCha12Rng::seed_from_u64(404);
    let horizon = 2000.0;
    let path = simulate_path(&model, &theta, 0.0, horizon, vec![3], &mut rng).unwrap();
    let mut integral = 0.0;
    let mut y = path.y_a[0] as f64;
    let mut prev = 0.0;
    for e in &path.events {
        integral += y * (e.time - prev);
        prev = e.time;
        y += if e.reaction == 0 { 1.0 } else { -1.0 };
    }
    integral += y * (horizon - prev);
    let time_avg = integral / horizon;
    // Stationary variance 3, relaxation time 1/theta2: SE of the time
    // average is sqrt(2 * 3 * 1 / 2000).
    let se = (2.0 * 3.0 / horizon).sqrt();
    assert!(
        (time_avg - 3.0).abs() < 3.0 * se,
        "time average {time_avg} vs 3 +- {}",
        3.0 * se
    );

    // Distributional check: first waiting time from y = 3 is exponential
    // with rate theta1 + 3 * theta2 = 6.
    let mut waits = Vec::with_capacity(10_000);
    for _ in 0..10_000 {
        let p = simulate_path(&model, &theta, 0.0, 10.0, vec![3], &mut rng).unwrap();
        waits.push(p.events[0].time);
    }
    let p = ks_pvalue(&waits, |t| 1.0 - (-6.0 * t).exp());
    assert!(p > 0.01, "KS p-value {p}");

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!(
        "[PASS] criterion 4: time average {time_avg:.3} within 3 SE, waiting-time KS p = {p:.3} ({elapsed:?})"
    );
}

/// Solves the variance-sum matching equation numerically instead of using
/// the simplified closed form: alpha_k = c / mu0_k with c chosen so that the
/// Dirichlet variance sum equals the conditioned-exponential target.
fn oracle_dirichlet_params(mu0: &[f64]) -> Vec<f64> {
    let e: Vec<f64> = mu0.iter().map(|m| 1.0 / m).collect();
    let s1: f64 = e.iter().sum();
    let s2: f64 = e.iter().map(|x| x * x).sum();
    let target: f64 = e
        .iter()
        .map(|&ek| {
            let vk = ek * ek;
            (vk + ek * ek) / (s2 + s1 * s1) - (ek / s1) * (ek / s1)
        })
        .sum();
    let dirichlet_var_sum = |c: f64| -> f64 {
        let alpha: Vec<f64> = e.iter().map(|&ek| c * ek).collect();
        let a0: f64 = alpha.iter().sum();
        alpha.iter().map(|&a| a * (a0 - a) / (a0 * a0 * (a0 + 1.0))).sum()
    };
    // The variance sum decreases in c; bisect.
    let (mut lo, mut hi) = (1e-12f64, 1e12f64);
    for _ in 0..400 {
        let mid = (lo * hi).sqrt();
        if dirichlet_var_sum(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = (lo * hi).sqrt();
    e.iter().map(|&ek| c * ek).collect()
}

#[test]
fn criterion_5_dirichlet_proposal() {
    // Constant intensity must give the flat parameter exactly.
    for mu in [0.1, 3.0, 7.0, 1.0 / 3.0, 1e6, std::f64::consts::PI] {
        for n in [2usize, 3, 7, 64, 1000] {
            assert_eq!(dirichlet_params(&vec![mu; n]).unwrap(), vec![1.0; n]);
        }
    }

    // General case against the independent root-finding oracle.
    let cases: Vec<Vec<f64>> = vec![
        vec![1.0, 2.0],
        vec![0.3, 5.0, 1.7],
        vec![10.0, 0.1, 3.0, 0.5, 2.2],
        vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0],
        vec![0.05, 900.0, 3.3],
    ];
    for mu0 in &cases {
        let ours = dirichlet_params(mu0).unwrap();
        let oracle = oracle_dirichlet_params(mu0);
        for (a, b) in ours.iter().zip(&oracle) {
            assert!(
                (a - b).abs() <= 1e-12 * b.abs().max(1.0),
                "{a} vs oracle {b} for {mu0:?}"
            );
        }
        // Mean condition holds exactly by construction; check it anyway.
        let a0: f64 = ours.iter().sum();
        let s1: f64 = mu0.iter().map(|m| 1.0 / m).sum();
        for (a, m) in ours.iter().zip(mu0) {
            assert!((a / a0 - (1.0 / m) / s1).abs() < 1e-12);
        }
    }
    println!("[PASS] criterion 5: flat case exact, moment matching agrees with oracle to 1e-12");
}

/// Distribution of the number of jumps on [0, t] for an immigration-death
/// process conditioned on start and end state, computed by uniformization on
/// the jump-count-augmented chain (truncated at nmax copies and kmax jumps).
fn bridge_event_count_oracle(
    lambda: f64,
    mu: f64,
    start_state: usize,
    end_state: usize,
    nmax: usize,
    kmax: usize,
    t: f64,
) -> Vec<f64> {
    let ny = nmax + 1;
    let nk = kmax + 1;
    let idx = |y: usize, k: usize| y * nk + k;
    let rate_cap = lambda + mu * nmax as f64;
    let lam_t = rate_cap * t;

    let mut p = vec![0.0f64; ny * nk];
    p[idx(start_state, 0)] = 1.0;
    let mut acc = vec![0.0f64; ny * nk];
    let mut pois = (-lam_t).exp();
    let mut cum = 0.0;
    let mut m = 0usize;
    loop {
        for (slot, &mass) in acc.iter_mut().zip(&p) {
            *slot += pois * mass;
        }
        cum += pois;
        if (cum > 1.0 - 1e-13 && m as f64 > lam_t) || m > 2000 {
            break;
        }
        let mut next = vec![0.0f64; ny * nk];
        for y in 0..ny {
            let birth = lambda;
            let death = mu * y as f64;
            let stay = 1.0 - (birth + death) / rate_cap;
            for k in 0..nk {
                let mass = p[idx(y, k)];
                if mass == 0.0 {
                    continue;
                }
                next[idx(y, k)] += stay * mass;
                if k + 1 < nk {
                    if y + 1 < ny {
                        next[idx(y + 1, k + 1)] += mass * birth / rate_cap;
                    }
                    if y > 0 {
                        next[idx(y - 1, k + 1)] += mass * death / rate_cap;
                    }
                }
            }
        }
        p = next;
        m += 1;
        pois *= lam_t / m as f64;
    }
    let z: f64 = (0..nk).map(|k| acc[idx(end_state, k)]).sum();
    (0..nk).map(|k| acc[idx(end_state, k)] / z).collect()
}

#[test]
fn criterion_6_bridge_stationarity() {
    let start = Instant::now();
    let model = immigration_death(InitialSpec::Fixed(2));
    let theta = vec![1.0, 0.5];
    let prior = PriorSpec {
        theta: vec![GammaParams::new(1.0, 1.0); 2],
        eta: GammaParams::new(1.0, 1.0),
        pairs: vec![],
    };
    // Both endpoints pinned at 2; the observation itself is masked so the
    // chain targets the unconditioned path law on the bridge.
    let obs = ObservationSeries {
        times: vec![0.0, 1.0],
        values: vec![vec![Some(2.0)], vec![Some(2.0)]],
        species: vec!["N".into()],
    };
    let config = RunConfig::default();
    let mut ctx = SamplerContext::new(&model, &prior, &obs, vec![false], &config).unwrap();
    ctx.schedule = Schedule {
        entries: vec![ScheduleEntry {
            a: 0.0,
            b: 1.0,
            kind: IntervalKind::Interior,
            midpoint: false,
        }],
    };

    let mut state = ChainState::new(
        Path::empty(0.0, 1.0, vec![2]),
        theta.clone(),
        1.0,
        ChaCha12Rng::seed_from_u64(99),
    );
    const KMAX: usize = 60;
    let total = 100_000usize;
    let burn = 10_000usize;
    let mut hist = vec![0u64; KMAX + 2];
    for s in 0..total {
        sweep(&ctx, &mut state);
        if s >= burn {
            hist[state.path.events.len().min(KMAX + 1)] += 1;
        }
    }

    let oracle = bridge_event_count_oracle(theta[0], theta[1], 2, 2, 30, KMAX, 1.0);
    let n = (total - burn) as f64;
    let mut tv = hist[KMAX + 1] as f64 / n;
    for k in 0..=KMAX {
        tv += (hist[k] as f64 / n - oracle[k]).abs();
    }
    tv *= 0.5;
    let elapsed = start.elapsed();
    assert!(tv < 0.05, "total variation {tv}");
    assert!(elapsed.as_secs_f64() < 600.0, "took {elapsed:?}");
    println!("[PASS] criterion 6: bridge event-count TV = {tv:.4} vs uniformization oracle ({elapsed:?})");
}

#[test]
fn criterion_7_geweke_joint_distribution() {
    let start = Instant::now();
    let model = immigration_death(InitialSpec::Fixed(2));
    let prior = PriorSpec {
        theta: vec![GammaParams::new(5.0, 5.0); 2],
        eta: GammaParams::new(3.0, 1.0),
        pairs: vec![],
    };
    let times = [0.0, 1.0, 2.0];
    let config = RunConfig::default();

    let observe = |path: &Path, eta: f64, rng: &mut ChaCha12Rng| -> Vec<f64> {
        let sd = (1.0 / eta).sqrt();
        path.states_at(&model, &times)
            .iter()
            .map(|s| s[0] as f64 + sd * rng.sample::<f64, _>(StandardNormal))
            .collect()
    };
    // Statistics compared between the two simulators: rates, precision, the
    // middle observation, and the number of events.
    let record = |theta: &[f64], eta: f64, data: &[f64], path: &Path| -> [f64; 5] {
        [theta[0], theta[1], eta, data[1], path.events.len() as f64]
    };

    // Forward simulator: everything from the prior and the model.
    let mut rng = ChaCha12Rng::seed_from_u64(777);
    let n_forward = 20_000;
    let mut forward: Vec<[f64; 5]> = Vec::with_capacity(n_forward);
    for _ in 0..n_forward {
        let theta = vec![
            prior.theta[0].sample("theta1", &mut rng).unwrap(),
            prior.theta[1].sample("theta2", &mut rng).unwrap(),
        ];
        let eta = prior.eta.sample("eta", &mut rng).unwrap();
        let path = simulate_path(&model, &theta, 0.0, 2.0, vec![2], &mut rng).unwrap();
        let data = observe(&path, eta, &mut rng);
        forward.push(record(&theta, eta, &data, &path));
    }

    // Successive-conditional simulator: alternate the sampler's transition
    // with a fresh data draw, starting from an exact joint sample.
    let theta0 = vec![
        prior.theta[0].sample("theta1", &mut rng).unwrap(),
        prior.theta[1].sample("theta2", &mut rng).unwrap(),
    ];
    let eta0 = prior.eta.sample("eta", &mut rng).unwrap();
    let path0 = simulate_path(&model, &theta0, 0.0, 2.0, vec![2], &mut rng).unwrap();
    let mut state = ChainState::new(path0, theta0, eta0, ChaCha12Rng::seed_from_u64(778));
    let mut data = observe(&state.path, state.eta, &mut state.rng);

    let n_cycles = 30_000;
    let drop = 2_000;
    let mut successive: Vec<[f64; 5]> = Vec::with_capacity(n_cycles - drop);
    for cycle in 0..n_cycles {
        let obs = ObservationSeries {
            times: times.to_vec(),
            values: data.iter().map(|&x| vec![Some(x)]).collect(),
            species: vec!["N".into()],
        };
        let ctx = SamplerContext::new(&model, &prior, &obs, vec![true], &config).unwrap();
        sweep(&ctx, &mut state);
        gibbs_theta(&ctx, &mut state).unwrap();
        gibbs_eta(&ctx, &mut state).unwrap();
        data = observe(&state.path, state.eta, &mut state.rng);
        if cycle >= drop {
            successive.push(record(&state.theta, state.eta, &data, &state.path));
        }
    }

    let names = ["theta1", "theta2", "eta", "x(1)", "n_events"];
    let mut worst: f64 = 0.0;
    for stat in 0..5 {
        let mut fwd: Vec<f64> = forward.iter().map(|r| r[stat]).collect();
        fwd.sort_by(f64::total_cmp);
        let sc: Vec<f64> = successive.iter().map(|r| r[stat]).collect();
        for d in 1..=9 {
            let cut = quantile(&fwd, d as f64 / 10.0);
            let f_frac = fwd.iter().filter(|&&x| x <= cut).count() as f64 / fwd.len() as f64;
            let s_frac = sc.iter().filter(|&&x| x <= cut).count() as f64 / sc.len() as f64;
            let gap = (f_frac - s_frac).abs();
            worst = worst.max(gap);
            assert!(
                gap < 0.05,
                "decile {d} of {}: forward {f_frac:.3} vs successive {s_frac:.3}",
                names[stat]
            );
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 900.0, "took {elapsed:?}");
    println!("[PASS] criterion 7: Geweke decile gap max {worst:.4} over 5 statistics ({elapsed:?})");
}

#[test]
fn criterion_8_scaled_oscillator_end_to_end() {
    let start = Instant::now();
    let bundle = config::oregonator();
    let model = &bundle.model;
    let truth = [0.1, 0.1, 2.5, 0.04, 1.0];
    let times: Vec<f64> = (0..21).map(|k| 0.5 * k as f64).collect();
    let scenario = model.scenario("A").unwrap().clone();

    // Three independent end-to-end replications: each seed drives both the
    // synthetic data set (observed exactly, scenario A) and the chain.
    let mut per_seed_covered = Vec::new();
    let mut pooled = (0u64, 0u64);
    for seed in [1u64, 2, 3] {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let y0: Vec<i64> = model.init.iter().map(|s| s.sample(&mut rng)).collect();
        let path = simulate_path(model, &truth, 0.0, 10.0, y0, &mut rng).unwrap();
        let states = path.states_at(model, &times);
        let obs = ObservationSeries {
            times: times.clone(),
            values: states
                .iter()
                .map(|s| s.iter().map(|&y| Some(y as f64)).collect())
                .collect(),
            species: model.species.clone(),
        };
        let config = RunConfig {
            iterations: 20_000,
            thinning: 10,
            seed,
            eta_fixed: scenario.eta_fixed,
            ..RunConfig::default()
        };
        let ctx =
            SamplerContext::new(model, &bundle.prior, &obs, scenario.observed.clone(), &config)
                .unwrap();
        let state = initialize(&ctx, &config).unwrap();
        let out = run_chain(&ctx, &config, state).unwrap();

        let rows = &out.trace[out.trace.len() / 2..];
        let mut covered = 0;
        let mut report = String::new();
        for (i, t) in truth.iter().enumerate() {
            let draws: Vec<f64> = rows.iter().map(|r| r.theta[i]).collect();
            let (lo, hi) = central_interval(&draws);
            let inside = *t >= lo && *t <= hi;
            covered += inside as usize;
            report.push_str(&format!(" theta{}[{lo:.3},{hi:.3}]{}", i + 1, if inside { "+" } else { "-" }));
        }
        let p = out.state.stats.pooled();
        pooled.0 += p.proposed;
        pooled.1 += p.accepted;
        println!(
            "  seed {seed}: covered {covered}/5, acceptance {:.1}%:{report}",
            100.0 * p.rate()
        );
        per_seed_covered.push(covered);
    }
    let good_seeds = per_seed_covered.iter().filter(|&&c| c >= 4).count();
    let rate = pooled.1 as f64 / pooled.0 as f64;
    let elapsed = start.elapsed();
    assert!(
        good_seeds >= 2,
        "only {good_seeds}/3 seeds covered >= 4/5 rates ({per_seed_covered:?})"
    );
    assert!((0.02..=0.30).contains(&rate), "pooled acceptance {rate}");
    // Well under the hour budget, and more than 10x faster than the
    // reference pro-rata runtime for this workload.
    assert!(elapsed.as_secs_f64() < 2700.0, "took {elapsed:?}");
    println!(
        "[PASS] criterion 8: {good_seeds}/3 seeds covered >= 4/5 rates, pooled acceptance {:.1}% ({elapsed:?})",
        100.0 * rate
    );
}

#[test]
fn criterion_9_scaled_autoregulation_reparameterization() {
    let start = Instant::now();
    let bundle = config::prokaryotic();
    let model = &bundle.model;
    let truth = [0.1, 0.7, 0.6, 0.085, 0.05, 0.2, 0.2, 0.015];
    let eta_true = 0.5f64;
    let times: Vec<f64> = (0..=25).map(|k| k as f64).collect();

    let mut rng = ChaCha12Rng::seed_from_u64(2);
    let y0: Vec<i64> = model.init.iter().map(|s| s.sample(&mut rng)).collect();
    let path = simulate_path(model, &truth, 0.0, 25.0, y0, &mut rng).unwrap();
    let scenario = model.scenario("C").unwrap().clone();
    let sd = (1.0 / eta_true).sqrt();
    let values: Vec<Vec<Option<f64>>> = path
        .states_at(model, &times)
        .iter()
        .map(|state| {
            state
                .iter()
                .zip(&scenario.observed)
                .map(|(&y, &seen)| {
                    seen.then(|| y as f64 + sd * rng.sample::<f64, _>(StandardNormal))
                })
                .collect()
        })
        .collect();
    let obs = ObservationSeries { times: times.clone(), values, species: model.species.clone() };

    let config = RunConfig {
        iterations: 10_000,
        thinning: 10,
        seed: 2,
        init_sweeps: 200,
        init_particles: 200,
        z_law: ZLaw::Table(vec![
            (vec![0, 0, 0, 0], 0.2),
            (vec![1, 0, 0, 0], 0.1),
            (vec![-1, 0, 0, 0], 0.1),
            (vec![0, 1, 0, 0], 0.1),
            (vec![0, -1, 0, 0], 0.1),
            (vec![0, 0, 1, 0], 0.1),
            (vec![0, 0, -1, 0], 0.1),
            (vec![0, 0, 0, 1], 0.1),
            (vec![0, 0, 0, -1], 0.1),
        ]),
        ..RunConfig::default()
    };
    let ctx = SamplerContext::new(model, &bundle.prior, &obs, scenario.observed.clone(), &config)
        .unwrap();
    let state = initialize(&ctx, &config).unwrap();
    let out = run_chain(&ctx, &config, state).unwrap();

    // Sum/ratio transform per reversible pair, matching the model's pairs.
    let pairs = [(0usize, 1usize), (2, 6), (3, 7), (4, 5)];
    let rho_of = |theta: &[f64]| -> [f64; 8] {
        let mut rho = [0.0; 8];
        for (k, &(i, j)) in pairs.iter().enumerate() {
            rho[2 * k] = theta[i] + theta[j];
            rho[2 * k + 1] = theta[i] / (theta[i] + theta[j]);
        }
        rho
    };
    let rho_true = rho_of(&truth);
    let rows = &out.trace[out.trace.len() / 2..];
    let rho_draws: Vec<[f64; 8]> = rows.iter().map(|r| rho_of(&r.theta)).collect();

    let mut covered = 0;
    let mut widths = [0.0f64; 8];
    for c in 0..8 {
        let draws: Vec<f64> = rho_draws.iter().map(|r| r[c]).collect();
        let (lo, hi) = central_interval(&draws);
        widths[c] = hi - lo;
        if rho_true[c] >= lo && rho_true[c] <= hi {
            covered += 1;
        }
        println!(
            "  rho{}: [{lo:.4}, {hi:.4}] width {:.4} true {:.4}",
            c + 1,
            widths[c],
            rho_true[c]
        );
    }
    let elapsed = start.elapsed();
    // The ratio coordinates are collectively far tighter than the sum
    // coordinates; individual pairs vary because some reactions fire only a
    // handful of times on this horizon.
    let even: f64 = (0..4).map(|k| widths[2 * k + 1]).sum();
    let odd: f64 = (0..4).map(|k| widths[2 * k]).sum();
    let ratio = even / odd;
    assert!(
        ratio < 0.5,
        "ratio intervals ({even:.4}) not collectively tighter than sum intervals ({odd:.4})"
    );
    assert!(covered >= 6, "true rho covered only {covered}/8");
    println!(
        "[PASS] criterion 9: ratio intervals {:.2}x tighter than sum intervals, coverage {covered}/8 ({elapsed:?})",
        1.0 / ratio
    );
}

#[test]
fn criterion_10_determinism_of_infer() {
    let tmp = tempfile::tempdir().unwrap();
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let model = root.join("configs/oregonator.json");
    let run = tmp.path().join("run.json");
    std::fs::write(
        &run,
        r#"{
  "iterations": 60,
  "thinning": 5,
  "seed": 9,
  "init_particles": 40,
  "init_sweeps": 10,
  "scenario": "B",
  "path_snapshot_every": 30,
  "simulate": {
    "theta": [0.1, 0.1, 2.5, 0.04, 1.0],
    "eta": 0.5,
    "times": {"from": 0.0, "to": 6.0, "step": 0.5}
  }
}"#,
    )
    .unwrap();

    let bin = env!("CARGO_BIN_EXE_mjp");
    let data_dir = tmp.path().join("data");
    let status = Command::new(bin)
        .args(["simulate", "--model"])
        .arg(&model)
        .arg("--run")
        .arg(&run)
        .arg("--out")
        .arg(&data_dir)
        .status()
        .unwrap();
    assert!(status.success());

    let run_infer = |out: &std::path::Path| {
        let status = Command::new(bin)
            .args(["infer", "--model"])
            .arg(&model)
            .arg("--obs")
            .arg(data_dir.join("observations.csv"))
            .arg("--run")
            .arg(&run)
            .args(["--seed", "5", "--chains", "2", "--out"])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    };
    let dir_a = tmp.path().join("a");
    let dir_b = tmp.path().join("b");
    run_infer(&dir_a);
    run_infer(&dir_b);

    for name in ["trace_1.csv", "trace_2.csv", "latent_1.csv", "latent_2.csv", "paths_1.csv", "manifest.json"] {
        let a = std::fs::read(dir_a.join(name)).unwrap();
        let b = std::fs::read(dir_b.join(name)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    println!("[PASS] criterion 10: repeated infer runs are byte-identical");
}
