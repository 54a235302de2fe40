//! Posterior summaries over recorded traces: parameter tables, latent
//! quantile bands, and kernel density grids.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::io::LatentRecord;
use crate::sampler::TraceRow;

/// Linear-interpolation quantile of a sorted sample (the convention used by
/// R's default and NumPy's `linear` method).  Panics on an empty slice.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let q = q.clamp(0.0, 1.0);
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Index of the first retained row after discarding `burn_in` of the run.
pub fn burn_start(len: usize, burn_in: f64) -> usize {
    if len == 0 {
        return 0;
    }
    let cut = (len as f64 * burn_in.clamp(0.0, 1.0)).floor() as usize;
    cut.min(len - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub median: f64,
    pub lo: f64,
    pub hi: f64,
}

fn summarize_column(name: &str, values: &[f64]) -> ParamSummary {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    ParamSummary {
        name: name.to_string(),
        mean: mean(values),
        median: quantile(&sorted, 0.5),
        lo: quantile(&sorted, 0.025),
        hi: quantile(&sorted, 0.975),
    }
}

/// Named numeric columns of a trace, in file order.
fn trace_columns(rows: &[TraceRow]) -> Vec<(String, Vec<f64>)> {
    let Some(first) = rows.first() else { return Vec::new() };
    let r = first.theta.len();
    let mut cols: Vec<(String, Vec<f64>)> = Vec::with_capacity(2 * r + 2);
    for i in 0..r {
        let name = format!("theta_{}", i + 1);
        cols.push((name, rows.iter().map(|row| row.theta[i]).collect()));
    }
    cols.push(("eta".into(), rows.iter().map(|row| row.eta).collect()));
    cols.push(("logjoint".into(), rows.iter().map(|row| row.log_joint).collect()));
    for i in 0..r {
        let name = format!("rtot_{}", i + 1);
        cols.push((name, rows.iter().map(|row| row.r_tot[i] as f64).collect()));
    }
    cols
}

/// Central summaries of every trace column after burn-in.
pub fn summarize_params(rows: &[TraceRow], burn_in: f64) -> Vec<ParamSummary> {
    let rows = &rows[burn_start(rows.len(), burn_in)..];
    trace_columns(rows)
        .iter()
        .map(|(name, values)| summarize_column(name, values))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentBand {
    pub t: f64,
    pub species: String,
    pub mean: f64,
    pub lo: f64,
    pub median: f64,
    pub hi: f64,
}

/// Per-(time, species) posterior bands of the latent states after burn-in,
/// discarding the earliest recorded iterations.
pub fn latent_bands(records: &[LatentRecord], burn_in: f64) -> Vec<LatentBand> {
    let mut iters: Vec<u64> = records.iter().map(|r| r.iter).collect();
    iters.sort_unstable();
    iters.dedup();
    if iters.is_empty() {
        return Vec::new();
    }
    let threshold = iters[burn_start(iters.len(), burn_in)];

    let mut groups: HashMap<(u64, &str), Vec<f64>> = HashMap::new();
    for rec in records.iter().filter(|r| r.iter >= threshold) {
        groups
            .entry((rec.t.to_bits(), rec.species.as_str()))
            .or_default()
            .push(rec.value as f64);
    }
    let mut bands: Vec<LatentBand> = groups
        .into_iter()
        .map(|((bits, species), mut values)| {
            values.sort_by(f64::total_cmp);
            LatentBand {
                t: f64::from_bits(bits),
                species: species.to_string(),
                mean: mean(&values),
                lo: quantile(&values, 0.025),
                median: quantile(&values, 0.5),
                hi: quantile(&values, 0.975),
            }
        })
        .collect();
    bands.sort_by(|a, b| a.t.total_cmp(&b.t).then_with(|| a.species.cmp(&b.species)));
    bands
}

/// Gaussian kernel density estimate on an evenly spaced grid spanning the
/// sample range padded by three bandwidths.  Bandwidth follows Silverman's
/// rule; a degenerate (constant) sample gets a narrow spike around the value.
pub fn kde(samples: &[f64], points: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(points >= 2 && !samples.is_empty());
    let n = samples.len() as f64;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = mean(samples);
    let sd = (samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let mut spread = sd.min(iqr / 1.34);
    if spread <= 0.0 {
        spread = sd.max(iqr / 1.34);
    }
    let mut h = 0.9 * spread * n.powf(-0.2);
    if h <= 0.0 {
        h = (m.abs() * 1e-6).max(1e-9);
    }
    let lo = sorted[0] - 3.0 * h;
    let hi = sorted[sorted.len() - 1] + 3.0 * h;
    let step = (hi - lo) / (points - 1) as f64;
    let norm = 1.0 / (n * h * (2.0 * std::f64::consts::PI).sqrt());
    let xs: Vec<f64> = (0..points).map(|k| lo + step * k as f64).collect();
    let density = xs
        .iter()
        .map(|&x| norm * samples.iter().map(|&s| (-0.5 * ((x - s) / h).powi(2)).exp()).sum::<f64>())
        .collect();
    (xs, density)
}

#[derive(Debug, Clone)]
pub struct DensityGrid {
    pub name: String,
    pub x: Vec<f64>,
    pub density: Vec<f64>,
}

pub const KDE_POINTS: usize = 512;

/// Density grids for the model parameters (rates and noise precision).
pub fn density_grids(rows: &[TraceRow], burn_in: f64) -> Vec<DensityGrid> {
    let rows = &rows[burn_start(rows.len(), burn_in)..];
    trace_columns(rows)
        .iter()
        .filter(|(name, _)| name.starts_with("theta_") || name == "eta")
        .map(|(name, values)| {
            let (x, density) = kde(values, KDE_POINTS);
            DensityGrid { name: name.clone(), x, density }
        })
        .collect()
}

pub fn write_param_summaries(summaries: &[ParamSummary]) -> String {
    let mut out = String::from("param,mean,median,q2.5,q97.5\n");
    for s in summaries {
        let _ = writeln!(out, "{},{},{},{},{}", s.name, s.mean, s.median, s.lo, s.hi);
    }
    out
}

pub fn write_latent_bands(bands: &[LatentBand]) -> String {
    let mut out = String::from("t,species,mean,q2.5,median,q97.5\n");
    for b in bands {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            b.t, b.species, b.mean, b.lo, b.median, b.hi
        );
    }
    out
}

pub fn write_density_grids(grids: &[DensityGrid]) -> String {
    let mut out = String::from("param,x,density\n");
    for g in grids {
        for (x, d) in g.x.iter().zip(&g.density) {
            let _ = writeln!(out, "{},{x},{d}", g.name);
        }
    }
    out
}
