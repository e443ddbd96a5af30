use std::collections::BTreeMap;
use std::path::Path;

use glefield_core::comparison::{run_comparison, ComparisonProfile};
use glefield_core::field::{
    self, assemble_field_layouts, check_regularity_assumption, require_wellposed, FieldLayout, FieldSample, FieldSpec,
};
use glefield_core::regularity::{
    default_lags, empirical_variogram, field_variogram, fit_exponent, mode_time_increment, truncation_aware_lags,
    IncrementAxis,
};
use glefield_core::rng::{derive_key, BOOTSTRAP_LANE};
use glefield_core::sampler::{sample_gle_mode, sample_gle_mode_spectral, sample_ou_mode, TimeGrid};
use glefield_core::spectral::{check_resonance_inequality, find_resonance, integrate_rho, SpectralDensity};
use glefield_core::Error;
use ndarray::Array3;
use serde::Serialize;
use serde_json::json;

use crate::artifacts::{write_json, write_sidecar, Table};
use crate::config::{Method, RunConfig};
use crate::CliError;

fn linspace(hi: f64, points: usize) -> Result<Vec<f64>, CliError> {
    if points < 2 || !(hi.is_finite() && hi > 0.0) {
        return Err(CliError::Usage(format!("need a positive range and >= 2 points, got {hi} and {points}")));
    }
    Ok((0..points).map(|j| hi * j as f64 / (points - 1) as f64).collect())
}

pub fn kernel(config: Option<&Path>, t_max: f64, points: usize, out: &Path) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let measure = cfg.kernel()?;
    let mut table = Table::create(out, &["t", "value"])?;
    for t in linspace(t_max, points)? {
        table.row([t.to_string(), measure.value(t).to_string()])?;
    }
    table.finish()?;
    write_sidecar(out, "kernel", &cfg, None, json!({ "atoms": measure.atoms().len(), "total_mass": measure.total_mass() }))
}

fn spectral_density(cfg: &RunConfig, k: usize) -> Result<SpectralDensity, CliError> {
    let m = field::mode(&cfg.basis()?, &cfg.weights()?, k)?;
    Ok(SpectralDensity::new(cfg.kernel()?, m))
}

pub fn spectrum(config: Option<&Path>, k: usize, omega_max: f64, points: usize, out: &Path) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let sd = spectral_density(&cfg, k)?;
    let mut table = Table::create(out, &["omega", "rho", "k_cos", "k_sin"])?;
    for w in linspace(omega_max, points)? {
        let (kc, ks) = sd.kernel.transforms(w);
        table.row([w.to_string(), sd.density(w).to_string(), kc.to_string(), ks.to_string()])?;
    }
    table.finish()?;
    write_sidecar(out, "spectrum", &cfg, None, json!({ "k": k, "alpha_k": sd.mode.alpha, "lambda_k": sd.mode.lambda }))
}

#[derive(Serialize)]
struct VerifyEntry {
    k: usize,
    alpha_k: f64,
    lambda_k: f64,
    integral: f64,
    expected: f64,
    rel_err: f64,
    omega_k: Option<f64>,
    omega_k_sq_over_alpha_k: Option<f64>,
    inequality_min_slack: Option<f64>,
}

pub fn verify(config: Option<&Path>, k_list: &[usize], out: Option<&Path>) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    if k_list.is_empty() {
        return Err(CliError::Usage("--k-list is empty".into()));
    }
    let mut entries = Vec::with_capacity(k_list.len());
    for &k in k_list {
        let sd = spectral_density(&cfg, k)?;
        let integral = integrate_rho(&sd, cfg.tolerances.rel_tol)?;
        let expected = sd.mode.variance();
        let (omega_k, inequality_min_slack) = match find_resonance(&sd, cfg.tolerances.q) {
            Ok(res) => (Some(res.omega_k), check_resonance_inequality(&sd, &res)?.min_slack()),
            Err(Error::NoResonance { .. }) => (None, None),
            Err(e) => return Err(e.into()),
        };
        entries.push(VerifyEntry {
            k,
            alpha_k: sd.mode.alpha,
            lambda_k: sd.mode.lambda,
            integral,
            expected,
            rel_err: (integral - expected).abs() / expected,
            omega_k,
            omega_k_sq_over_alpha_k: omega_k.map(|w| w * w / sd.mode.alpha),
            inequality_min_slack,
        });
    }
    match out {
        Some(path) => {
            write_json(path, &entries)?;
            write_sidecar(path, "verify", &cfg, None, json!({ "k_list": k_list }))?;
        }
        None => println!("{}", serde_json::to_string_pretty(&entries).expect("report serializes")),
    }
    let tol = cfg.tolerances.verify;
    if let Some(bad) = entries.iter().find(|e| !(e.rel_err <= tol)) {
        return Err(CliError::Numerical(format!(
            "variance identity off by {:.3e} for k = {} (tolerance {tol:.1e})",
            bad.rel_err, bad.k
        )));
    }
    Ok(())
}

pub fn override_sampler(
    cfg: &mut RunConfig,
    dt: Option<f64>,
    n: Option<usize>,
    ensemble: Option<usize>,
    seed: Option<u64>,
    method: Option<Method>,
) {
    let s = &mut cfg.sampler;
    s.dt = dt.unwrap_or(s.dt);
    s.n = n.unwrap_or(s.n);
    s.ensemble = ensemble.unwrap_or(s.ensemble);
    s.seed = seed.unwrap_or(s.seed);
    s.method = method.unwrap_or(s.method);
}

pub fn sample_mode(cfg: &RunConfig, k: usize, out: &Path) -> Result<(), CliError> {
    let grid = cfg.grid()?;
    let s = &cfg.sampler;
    let m = field::mode(&cfg.basis()?, &cfg.weights()?, k)?;
    let ens = match s.method {
        Method::Ce => sample_gle_mode(&SpectralDensity::new(cfg.kernel()?, m), &grid, s.ensemble, s.seed)?,
        Method::Ss => {
            sample_gle_mode_spectral(&SpectralDensity::new(cfg.kernel()?, m), &grid, s.ensemble, s.seed, s.nodes)?
        }
        Method::Ou => sample_ou_mode(&m, &grid, s.ensemble, s.seed)?,
    };
    let mut table = Table::create(out, &["path_id", "t", "value"])?;
    let times: Vec<String> = (0..grid.n).map(|j| grid.time(j).to_string()).collect();
    for (i, row) in ens.paths.rows().into_iter().enumerate() {
        let id = i.to_string();
        for (t, v) in times.iter().zip(row.iter()) {
            table.row([id.as_str(), t.as_str(), v.to_string().as_str()])?;
        }
    }
    table.finish()?;
    let details = json!({
        "k": k,
        "alpha_k": m.alpha,
        "lambda_k": m.lambda,
        "method": ens.method,
        "clipped_mass": ens.clipped_mass,
        "embedding_len": ens.embedding_len,
    });
    write_sidecar(out, "sample-mode", cfg, Some(s.seed), details)
}

fn field_spec(cfg: &RunConfig) -> Result<FieldSpec, CliError> {
    Ok(FieldSpec {
        basis: cfg.basis()?,
        weights: cfg.weights()?,
        dynamics: cfg.dynamics()?,
        grid: cfg.grid()?,
        modes: cfg.field.modes,
        ensemble: cfg.sampler.ensemble,
        seed: cfg.sampler.seed,
        tail_budget: cfg.field.tail_budget,
        n_probe: cfg.field.n_probe,
    })
}

fn interior_points(length: f64, nx: usize) -> Result<Vec<f64>, CliError> {
    if nx == 0 {
        return Err(CliError::Usage("nx must be >= 1".into()));
    }
    Ok((1..=nx).map(|i| i as f64 * length / (nx + 1) as f64).collect())
}

pub fn sample_field(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let spec = field_spec(cfg)?;
    let probe = cfg.field.n_probe.max(2 * cfg.field.modes);
    let wellposedness = require_wellposed(&spec.basis, &spec.weights, probe)?;
    let assumption = check_regularity_assumption(&spec.basis, &spec.weights, cfg.assumption.eta, probe)?;
    let xs = interior_points(cfg.basis.length, cfg.field.nx)?;
    let layout = FieldLayout { space_points: xs.clone(), time_stride: 1 };
    let sample = assemble_field_layouts(&spec, &[layout])?.remove(0);

    let mut table = Table::create(out, &["path_id", "t", "x", "value"])?;
    let xs_text: Vec<String> = xs.iter().map(f64::to_string).collect();
    for (e, slab) in sample.values.outer_iter().enumerate() {
        let id = e.to_string();
        for (j, row) in slab.outer_iter().enumerate() {
            let t = sample.times.time(j).to_string();
            for (x, v) in xs_text.iter().zip(row.iter()) {
                table.row([id.as_str(), t.as_str(), x.as_str(), v.to_string().as_str()])?;
            }
        }
    }
    table.finish()?;
    let details = json!({
        "N": spec.modes,
        "tail_bound": sample.tail_bound,
        "wellposedness": wellposedness,
        "regularity_assumption": assumption,
    });
    write_sidecar(out, "sample-field", cfg, Some(cfg.sampler.seed), details)
}

fn read_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("cannot read {}: {e}", path.display()))
}

/// Rebuilds a field sample from `path_id,t[,x],value` rows.
fn read_sample(path: &Path) -> Result<(FieldSample, bool), CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| read_err(path, e))?;
    let header: Vec<String> = reader.headers().map_err(|e| read_err(path, e))?.iter().map(str::to_owned).collect();
    let has_x = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["path_id", "t", "x", "value"] => true,
        ["path_id", "t", "value"] => false,
        _ => return Err(read_err(path, "expected columns path_id,t[,x],value")),
    };
    let mut rows = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| read_err(path, e))?;
        let num = |i: usize| -> Result<f64, CliError> {
            rec[i].parse::<f64>().map_err(|e| read_err(path, format!("line {}: {e}", line + 2)))
        };
        let id: u64 = rec[0].parse().map_err(|e| read_err(path, format!("line {}: {e}", line + 2)))?;
        let (x, v) = if has_x { (num(2)?, num(3)?) } else { (0.0, num(2)?) };
        rows.push((id, num(1)?, x, v));
    }
    let unique = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let ts = unique(rows.iter().map(|r| r.1).collect());
    let xs = unique(rows.iter().map(|r| r.2).collect());
    let mut ids: Vec<u64> = rows.iter().map(|r| r.0).collect();
    ids.sort_unstable();
    ids.dedup();
    if ts.len() < 2 {
        return Err(read_err(path, "need at least two time points"));
    }
    let dt = ts[1] - ts[0];
    if ts.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(w[1].abs())) {
        return Err(read_err(path, "time points are not uniformly spaced"));
    }
    let (m, nt, nx) = (ids.len(), ts.len(), xs.len());
    if rows.len() != m * nt * nx {
        return Err(read_err(path, "rows do not form a complete path x time x space grid"));
    }
    let index = |sorted: &[f64], v: f64| sorted.binary_search_by(|p| p.total_cmp(&v)).expect("value present");
    let mut values = Array3::<f64>::from_elem((m, nt, nx), f64::NAN);
    for (id, t, x, v) in rows {
        let e = ids.binary_search(&id).expect("id present");
        values[[e, index(&ts, t), index(&xs, x)]] = v;
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(read_err(path, "duplicate or missing rows"));
    }
    let times = TimeGrid::new(ts[0], dt, nt).map_err(|e| read_err(path, e))?;
    Ok((FieldSample { times, space_points: xs, values, truncation: 0, tail_bound: 0.0 }, has_x))
}

fn parse_lags(cfg: &RunConfig, sample: &FieldSample, axis: IncrementAxis) -> Result<Vec<f64>, CliError> {
    let (step, count) = match axis {
        IncrementAxis::Time => (sample.times.dt, sample.times.n),
        IncrementAxis::Space => {
            let xs = &sample.space_points;
            if xs.len() < 2 {
                return Err(CliError::Usage("space lags need at least two space points".into()));
            }
            (xs[1] - xs[0], xs.len())
        }
    };
    match cfg.regularity.lags.as_str() {
        "dyadic" => Ok(default_lags(step, count as f64 * step)),
        "truncation" => Ok(truncation_aware_lags(step, cfg.basis()?.alpha(cfg.field.modes)?, 5)),
        list => list
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| CliError::Usage(format!("bad lag `{s}`: {e}"))))
            .collect(),
    }
}

pub fn hoelder(
    cfg: &RunConfig,
    with_oracle: bool,
    input: &Path,
    axis: IncrementAxis,
    k: Option<usize>,
    out: &Path,
) -> Result<(), CliError> {
    let (sample, has_x) = read_sample(input)?;
    let lags = parse_lags(cfg, &sample, axis)?;
    let curve = empirical_variogram(&sample, axis, &lags)?;
    let seed = derive_key(cfg.sampler.seed, BOOTSTRAP_LANE);
    let report = fit_exponent(&curve, cfg.regularity.bootstrap, seed)?;

    let oracle_values = match (with_oracle, has_x, k) {
        (false, _, _) => None,
        (true, true, _) => {
            let spec = field_spec(cfg)?;
            Some(field_variogram(&spec, axis, &sample.space_points, &lags, cfg.tolerances.rel_tol)?.values)
        }
        (true, false, Some(k)) if axis == IncrementAxis::Time => {
            let m = field::mode(&cfg.basis()?, &cfg.weights()?, k)?;
            let dynamics = cfg.dynamics()?;
            Some(
                lags.iter()
                    .map(|&h| mode_time_increment(&dynamics, &m, h, cfg.tolerances.rel_tol))
                    .collect::<Result<Vec<_>, _>>()?,
            )
        }
        (true, false, _) => {
            return Err(CliError::Usage("oracle values for a path file need --k and the time axis".into()));
        }
    };
    let mut doc = json!({
        "axis": report.axis,
        "gamma_hat": report.gamma_hat,
        "ci": [report.ci_low, report.ci_high],
        "r_squared": report.r_squared,
        "lags": curve.lags,
        "values": curve.values,
        "stderr": curve.stderr,
        "bootstrap": report.bootstrap_reps,
    });
    if let Some(o) = oracle_values {
        doc["oracle_values"] = json!(o);
    }
    write_json(out, &doc)?;
    write_sidecar(out, "hoelder", cfg, Some(cfg.sampler.seed), json!({ "input": input.display().to_string() }))
}

pub fn reproduce(profile: &str, out_dir: &Path) -> Result<(), CliError> {
    let profile = ComparisonProfile::by_name(profile)
        .ok_or_else(|| CliError::Usage(format!("unknown profile `{profile}` (available: comparison_1d)")))?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", out_dir.display())))?;
    let result = run_comparison(&profile)?;

    let variograms = out_dir.join("variograms.csv");
    let mut table = Table::create(&variograms, &["cell", "lag", "value", "stderr", "oracle"])?;
    for cell in &result.cells {
        for i in 0..cell.curve.lags.len() {
            table.row([
                cell.name.clone(),
                cell.curve.lags[i].to_string(),
                cell.curve.values[i].to_string(),
                cell.curve.stderr[i].to_string(),
                cell.oracle[i].to_string(),
            ])?;
        }
    }
    table.finish()?;

    let cells: BTreeMap<&str, _> = result
        .cells
        .iter()
        .map(|c| {
            let r = &c.report;
            (
                c.name.as_str(),
                json!({
                    "gamma_hat": r.gamma_hat,
                    "ci": [r.ci_low, r.ci_high],
                    "ci_width": r.ci_high - r.ci_low,
                    "r_squared": r.r_squared,
                    "lag_min": r.lag_min,
                    "lag_max": r.lag_max,
                }),
            )
        })
        .collect();
    let summary = json!({
        "profile": profile.name,
        "tail_bound": result.tail_bound,
        "cells": cells,
        "time_separation": result.time_separation(),
        "time_intervals_disjoint": result.time_intervals_disjoint(),
    });
    let summary_path = out_dir.join("summary.json");
    write_json(&summary_path, &summary)?;
    write_sidecar(&summary_path, "reproduce", &profile, Some(profile.seed), json!({ "variograms": "variograms.csv" }))?;
    for c in &result.cells {
        println!(
            "{:<10} gamma = {:.4}  ci = [{:.4}, {:.4}]  r2 = {:.4}",
            c.name, c.report.gamma_hat, c.report.ci_low, c.report.ci_high, c.report.r_squared
        );
    }
    Ok(())
}
