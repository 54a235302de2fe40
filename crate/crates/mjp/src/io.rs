//! CSV serialization for observations, jump paths, parameter traces, and
//! latent-state records.
//!
//! All writers emit plain text with `\n` line endings and shortest
//! round-tripping float formatting, so identical inputs produce
//! byte-identical files.

use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{Event, ModelSpec, ObservationSeries, Path, State};
use crate::sampler::{LatentBlock, TraceRow};

pub const MISSING: &str = "na";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

fn format_err<T>(line: usize, message: impl Into<String>) -> Result<T, IoError> {
    Err(IoError::Format { line, message: message.into() })
}

fn parse_f64(field: &str, line: usize, what: &str) -> Result<f64, IoError> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| IoError::Format { line, message: format!("bad {what} `{field}`") })
}

fn parse_u64(field: &str, line: usize, what: &str) -> Result<u64, IoError> {
    field
        .trim()
        .parse::<u64>()
        .map_err(|_| IoError::Format { line, message: format!("bad {what} `{field}`") })
}

fn parse_i64(field: &str, line: usize, what: &str) -> Result<i64, IoError> {
    field
        .trim()
        .parse::<i64>()
        .map_err(|_| IoError::Format { line, message: format!("bad {what} `{field}`") })
}

/// Observation table with header `t,<species...>` and `na` for missing
/// entries.
pub fn write_observations(obs: &ObservationSeries) -> String {
    let mut out = String::new();
    out.push('t');
    for s in &obs.species {
        let _ = write!(out, ",{s}");
    }
    out.push('\n');
    for (t, row) in obs.times.iter().zip(&obs.values) {
        let _ = write!(out, "{t}");
        for v in row {
            match v {
                Some(x) => {
                    let _ = write!(out, ",{x}");
                }
                None => {
                    let _ = write!(out, ",{MISSING}");
                }
            }
        }
        out.push('\n');
    }
    out
}

pub fn read_observations(text: &str) -> Result<ObservationSeries, IoError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| IoError::Format { line: 1, message: "empty file".into() })?;
    let mut cols = header.split(',');
    if cols.next().map(str::trim) != Some("t") {
        return format_err(1, "header must start with `t`");
    }
    let species: Vec<String> = cols.map(|c| c.trim().to_string()).collect();
    if species.is_empty() {
        return format_err(1, "header lists no species columns");
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != species.len() + 1 {
            return format_err(
                lineno,
                format!("expected {} fields, found {}", species.len() + 1, fields.len()),
            );
        }
        times.push(parse_f64(fields[0], lineno, "time")?);
        let mut row = Vec::with_capacity(species.len());
        for f in &fields[1..] {
            if f.trim() == MISSING {
                row.push(None);
            } else {
                row.push(Some(parse_f64(f, lineno, "value")?));
            }
        }
        values.push(row);
    }
    let obs = ObservationSeries { times, values, species };
    obs.validate()
        .map_err(|e| IoError::Format { line: 1, message: e.to_string() })?;
    Ok(obs)
}

/// Jump path as `t,reaction,<species...>` rows.  The first row carries the
/// pseudo-reaction `init` with the state at the left endpoint; each later
/// row records one event and the state just after it.
pub fn write_path(model: &ModelSpec, path: &Path) -> String {
    let mut out = String::new();
    out.push_str("t,reaction");
    for s in &model.species {
        let _ = write!(out, ",{s}");
    }
    out.push('\n');
    let write_state = |out: &mut String, y: &State| {
        for v in y {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    };
    let _ = write!(out, "{},init", path.a);
    write_state(&mut out, &path.y_a);
    let mut y = path.y_a.clone();
    for e in &path.events {
        model.apply_reaction_in_place(&mut y, e.reaction);
        let _ = write!(out, "{},{}", e.time, model.reactions[e.reaction]);
        write_state(&mut out, &y);
    }
    out
}

/// Reads a path written by [`write_path`].  `b` is the right endpoint of the
/// interval, which the file itself does not record.
pub fn read_path(model: &ModelSpec, text: &str, b: f64) -> Result<Path, IoError> {
    let p = model.n_species();
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| IoError::Format { line: 1, message: "empty file".into() })?;
    let expected: Vec<&str> = header.split(',').map(str::trim).collect();
    if expected.len() != p + 2 || expected[0] != "t" || expected[1] != "reaction" {
        return format_err(1, "header must be `t,reaction,<species...>`");
    }
    let mut a = None;
    let mut y_a: State = Vec::new();
    let mut events = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != p + 2 {
            return format_err(lineno, format!("expected {} fields", p + 2));
        }
        let t = parse_f64(fields[0], lineno, "time")?;
        let name = fields[1].trim();
        if a.is_none() {
            if name != "init" {
                return format_err(lineno, "first row must use reaction `init`");
            }
            a = Some(t);
            for f in &fields[2..] {
                y_a.push(parse_i64(f, lineno, "state entry")?);
            }
        } else {
            let reaction = model
                .reactions
                .iter()
                .position(|r| r == name)
                .ok_or_else(|| IoError::Format {
                    line: lineno,
                    message: format!("unknown reaction `{name}`"),
                })?;
            events.push(Event { time: t, reaction });
        }
    }
    let a = a.ok_or_else(|| IoError::Format { line: 1, message: "no init row".into() })?;
    let path = Path { a, b, y_a, events };
    if !path.is_valid(model) {
        return format_err(1, "path fails validity check for this model");
    }
    Ok(path)
}

/// Trace header `iter,theta_1..theta_r,eta,logjoint,rtot_1..rtot_r`.
pub fn trace_header(n_reactions: usize) -> String {
    let mut h = String::from("iter");
    for i in 1..=n_reactions {
        let _ = write!(h, ",theta_{i}");
    }
    h.push_str(",eta,logjoint");
    for i in 1..=n_reactions {
        let _ = write!(h, ",rtot_{i}");
    }
    h
}

pub fn write_trace(rows: &[TraceRow], n_reactions: usize) -> String {
    let mut out = trace_header(n_reactions);
    out.push('\n');
    for row in rows {
        let _ = write!(out, "{}", row.iter);
        for v in &row.theta {
            let _ = write!(out, ",{v}");
        }
        let _ = write!(out, ",{},{}", row.eta, row.log_joint);
        for v in &row.r_tot {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn read_trace(text: &str) -> Result<Vec<TraceRow>, IoError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| IoError::Format { line: 1, message: "empty file".into() })?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let r = cols.iter().filter(|c| c.starts_with("theta_")).count();
    if r == 0 || cols != trace_header(r).split(',').collect::<Vec<_>>() {
        return format_err(1, "malformed trace header");
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 * r + 3 {
            return format_err(lineno, format!("expected {} fields", 2 * r + 3));
        }
        let iter = parse_u64(fields[0], lineno, "iteration")?;
        let theta = fields[1..=r]
            .iter()
            .map(|f| parse_f64(f, lineno, "theta"))
            .collect::<Result<Vec<_>, _>>()?;
        let eta = parse_f64(fields[r + 1], lineno, "eta")?;
        let log_joint = parse_f64(fields[r + 2], lineno, "logjoint")?;
        let r_tot = fields[r + 3..]
            .iter()
            .map(|f| parse_u64(f, lineno, "reaction total"))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(TraceRow { iter, theta, eta, log_joint, r_tot });
    }
    Ok(rows)
}

/// Latent states in long form: `iter,t,species,value`, one row per recorded
/// iteration, observation time, and species.
pub fn write_latent(blocks: &[LatentBlock], times: &[f64], species: &[String]) -> String {
    let mut out = String::from("iter,t,species,value\n");
    for block in blocks {
        for (t, state) in times.iter().zip(&block.states) {
            for (s, v) in species.iter().zip(state) {
                let _ = writeln!(out, "{},{t},{s},{v}", block.iter);
            }
        }
    }
    out
}

pub struct LatentRecord {
    pub iter: u64,
    pub t: f64,
    pub species: String,
    pub value: i64,
}

pub fn read_latent(text: &str) -> Result<Vec<LatentRecord>, IoError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| IoError::Format { line: 1, message: "empty file".into() })?;
    if header.split(',').map(str::trim).collect::<Vec<_>>() != ["iter", "t", "species", "value"] {
        return format_err(1, "header must be `iter,t,species,value`");
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return format_err(lineno, "expected 4 fields");
        }
        records.push(LatentRecord {
            iter: parse_u64(fields[0], lineno, "iteration")?,
            t: parse_f64(fields[1], lineno, "time")?,
            species: fields[2].trim().to_string(),
            value: parse_i64(fields[3], lineno, "value")?,
        });
    }
    Ok(records)
}

/// Full path snapshots in long form: `iter,t,reaction,<species...>`, the
/// per-iteration analogue of [`write_path`].
pub fn write_path_snapshots(model: &ModelSpec, snapshots: &[(u64, Path)]) -> String {
    let mut out = String::from("iter,t,reaction");
    for s in &model.species {
        let _ = write!(out, ",{s}");
    }
    out.push('\n');
    for (iter, path) in snapshots {
        for line in write_path(model, path).lines().skip(1) {
            let _ = writeln!(out, "{iter},{line}");
        }
    }
    out
}
