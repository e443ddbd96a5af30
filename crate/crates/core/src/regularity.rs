//! Hölder exponent estimation from second-order structure functions.

use ndarray::{ArrayView2, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cm_kernel::KernelMeasure;
use crate::error::{Error, Result};
use crate::field::{mode, FieldSample, FieldSpec, ModeDynamics};
use crate::rng::{self, BOOTSTRAP_LANE};
use crate::spectral::{increment_second_moment, Mode, SpectralDensity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IncrementAxis {
    Time,
    Space,
}

impl std::str::FromStr for IncrementAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "time" => Ok(IncrementAxis::Time),
            "space" => Ok(IncrementAxis::Space),
            other => Err(Error::InvalidInput(format!("axis must be `time` or `space`, got `{other}`"))),
        }
    }
}

/// Mean squared increments `E|u(. + h) - u(.)|²` at a set of lags.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariogramCurve {
    pub axis: IncrementAxis,
    pub lags: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Per ensemble member values, `member_values[l][e]`; empty for oracle curves.
    #[serde(skip)]
    pub member_values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HoelderReport {
    pub axis: IncrementAxis,
    pub gamma_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub r_squared: f64,
    pub lag_min: f64,
    pub lag_max: f64,
    pub bootstrap_reps: usize,
}

const ALIGN_TOL: f64 = 1e-9;

fn lag_steps(lags: &[f64], step: f64, max_lag: f64) -> Result<Vec<usize>> {
    if lags.is_empty() {
        return Err(Error::InvalidInput("no lags given".into()));
    }
    let mut out = Vec::with_capacity(lags.len());
    for &h in lags {
        let j = (h / step).round();
        if !(h > 0.0) || (h - j * step).abs() > ALIGN_TOL * step.max(h) || j < 1.0 {
            return Err(Error::MisalignedLag { lag: h, step });
        }
        if h > max_lag * (1.0 + ALIGN_TOL) {
            return Err(Error::InvalidInput(format!("lag {h} exceeds a quarter of the extent ({max_lag})")));
        }
        out.push(j as usize);
    }
    if out.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("lags must be strictly increasing".into()));
    }
    Ok(out)
}

fn space_step(points: &[f64]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InvalidInput("space variogram needs at least two points".into()));
    }
    let step = points[1] - points[0];
    let uniform = step > 0.0
        && points.windows(2).all(|w| ((w[1] - w[0]) - step).abs() <= ALIGN_TOL * step.max(w[1].abs()));
    if !uniform {
        return Err(Error::InvalidInput("space points must be uniformly spaced and increasing".into()));
    }
    Ok(step)
}

/// Mean over one member's `time x space` slab of squared increments at `j` steps along `axis`.
fn member_increment(slab: ArrayView2<f64>, axis: IncrementAxis, j: usize) -> f64 {
    let (nt, nx) = slab.dim();
    let mut acc = 0.0;
    match axis {
        IncrementAxis::Time => {
            for t in 0..nt - j {
                let (a, b) = (slab.row(t), slab.row(t + j));
                acc += a.iter().zip(b.iter()).map(|(x, y)| (y - x) * (y - x)).sum::<f64>();
            }
            acc / ((nt - j) * nx) as f64
        }
        IncrementAxis::Space => {
            for row in slab.rows() {
                acc += (0..nx - j).map(|i| (row[i + j] - row[i]).powi(2)).sum::<f64>();
            }
            acc / (nt * (nx - j)) as f64
        }
    }
}

/// Empirical structure function of a field sample along one axis.
pub fn empirical_variogram(fs: &FieldSample, axis: IncrementAxis, lags: &[f64]) -> Result<VariogramCurve> {
    let (m, nt, nx) = fs.values.dim();
    let (step, count) = match axis {
        IncrementAxis::Time => (fs.times.dt, nt),
        IncrementAxis::Space => (space_step(&fs.space_points)?, nx),
    };
    let steps = lag_steps(lags, step, (count - 1) as f64 * step / 4.0)?;

    let per_member: Vec<Vec<f64>> = fs
        .values
        .axis_iter(Axis(0))
        .into_par_iter()
        .map(|slab| steps.iter().map(|&j| member_increment(slab, axis, j)).collect())
        .collect();

    let member_values: Vec<Vec<f64>> = (0..steps.len()).map(|l| per_member.iter().map(|v| v[l]).collect()).collect();
    let (values, stderr) = member_values
        .iter()
        .map(|xs| crate::sampler::mean_and_stderr(xs))
        .map(|(mean, se)| (mean, if m > 1 { se } else { 0.0 }))
        .unzip();
    Ok(VariogramCurve { axis, lags: lags.to_vec(), values, stderr, member_values })
}

/// Slope, intercept and r² of `log value` on `log lag`.
fn log_log_fit(lags: &[f64], values: &[f64]) -> (f64, f64, f64) {
    let n = lags.len() as f64;
    let xs: Vec<f64> = lags.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (slope, intercept, r2)
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub const MIN_LAGS: usize = 4;
pub const MIN_LAG_SPAN: f64 = 16.0;
pub const MIN_R_SQUARED: f64 = 0.9;

/// Log-log least squares fit `gamma = slope / 2`, with a percentile bootstrap
/// over ensemble members (keyed by `seed`) for the 95% interval.
pub fn fit_exponent(vc: &VariogramCurve, bootstrap_reps: usize, seed: u64) -> Result<HoelderReport> {
    let l = vc.lags.len();
    if l < MIN_LAGS || vc.values.len() != l {
        return Err(Error::InvalidInput(format!("exponent fit needs at least {MIN_LAGS} lags, got {l}")));
    }
    if vc.lags.windows(2).any(|w| !(w[1] > w[0])) || !(vc.lags[0] > 0.0) {
        return Err(Error::InvalidInput("lags must be positive and strictly increasing".into()));
    }
    if vc.lags[l - 1] / vc.lags[0] < MIN_LAG_SPAN * (1.0 - 1e-12) {
        return Err(Error::InvalidInput(format!("lags must span at least a factor {MIN_LAG_SPAN}")));
    }
    if let Some(v) = vc.values.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::DegenerateFit(format!("nonpositive variogram value {v}")));
    }
    let (slope, _, r_squared) = log_log_fit(&vc.lags, &vc.values);
    if !(r_squared >= MIN_R_SQUARED) {
        return Err(Error::DegenerateFit(format!("r² = {r_squared:.4} below {MIN_R_SQUARED}")));
    }
    let gamma_hat = slope / 2.0;

    let members = vc.member_values.first().map_or(0, Vec::len);
    let (mut ci_low, mut ci_high) = (gamma_hat, gamma_hat);
    if members > 1 && bootstrap_reps > 0 {
        let mut gammas: Vec<f64> = (0..bootstrap_reps)
            .into_par_iter()
            .filter_map(|b| {
                let mut r = rng::stream(seed, BOOTSTRAP_LANE, b as u64);
                let picks: Vec<usize> = (0..members).map(|_| r.random_range(0..members)).collect();
                let values: Vec<f64> = vc
                    .member_values
                    .iter()
                    .map(|xs| picks.iter().map(|&i| xs[i]).sum::<f64>() / members as f64)
                    .collect();
                values.iter().all(|v| *v > 0.0).then(|| log_log_fit(&vc.lags, &values).0 / 2.0)
            })
            .collect();
        if !gammas.is_empty() {
            gammas.sort_by(f64::total_cmp);
            ci_low = percentile(&gammas, 0.025).min(gamma_hat);
            ci_high = percentile(&gammas, 0.975).max(gamma_hat);
        }
    }
    Ok(HoelderReport {
        axis: vc.axis,
        gamma_hat,
        ci_low,
        ci_high,
        r_squared,
        lag_min: vc.lags[0],
        lag_max: vc.lags[l - 1],
        bootstrap_reps,
    })
}

/// Exact time structure function of one memory-driven mode.
pub fn theoretical_variogram(kernel: &KernelMeasure, mode: &Mode, lags: &[f64], rel_tol: f64) -> Result<VariogramCurve> {
    let sd = SpectralDensity::new(kernel.clone(), *mode);
    let values = lags
        .iter()
        .map(|&h| increment_second_moment(&sd, h, rel_tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(VariogramCurve {
        axis: IncrementAxis::Time,
        lags: lags.to_vec(),
        stderr: vec![0.0; lags.len()],
        values,
        member_values: Vec::new(),
    })
}

/// `E|u_k(t + h) - u_k(t)|²` for one mode under the given dynamics.
pub fn mode_time_increment(dynamics: &ModeDynamics, m: &Mode, h: f64, rel_tol: f64) -> Result<f64> {
    match dynamics {
        ModeDynamics::Heat => Ok(2.0 * dynamics.mode_variance(m) * -(-m.alpha * h).exp_m1()),
        ModeDynamics::Gle(kernel) | ModeDynamics::GleSpectral(kernel, _) => {
            increment_second_moment(&SpectralDensity::new(kernel.clone(), *m), h, rel_tol)
        }
    }
}

/// Exact structure function of the truncated field, averaged over `positions`
/// in the same way [`empirical_variogram`] averages a sample.
pub fn field_variogram(
    spec: &FieldSpec,
    axis: IncrementAxis,
    positions: &[f64],
    lags: &[f64],
    rel_tol: f64,
) -> Result<VariogramCurve> {
    let modes = (1..=spec.modes).map(|k| mode(&spec.basis, &spec.weights, k)).collect::<Result<Vec<_>>>()?;
    let values = match axis {
        IncrementAxis::Time => {
            let shapes: Vec<f64> = modes
                .iter()
                .map(|m| {
                    positions.iter().map(|&x| spec.basis.eigenfunction(m.index, x).powi(2)).sum::<f64>()
                        / positions.len() as f64
                })
                .collect();
            let per_mode: Vec<Vec<f64>> = modes
                .par_iter()
                .map(|m| lags.iter().map(|&h| mode_time_increment(&spec.dynamics, m, h, rel_tol)).collect())
                .collect::<Vec<Result<Vec<f64>>>>()
                .into_iter()
                .collect::<Result<_>>()?;
            (0..lags.len())
                .map(|l| per_mode.iter().zip(&shapes).map(|(inc, s)| inc[l] * s).sum())
                .collect()
        }
        IncrementAxis::Space => {
            let step = space_step(positions)?;
            let steps = lag_steps(lags, step, (positions.len() - 1) as f64 * step / 4.0)?;
            steps
                .iter()
                .map(|&j| {
                    let pairs = positions.len() - j;
                    modes
                        .iter()
                        .map(|m| {
                            let diff: f64 = (0..pairs)
                                .map(|i| {
                                    let e = &spec.basis;
                                    (e.eigenfunction(m.index, positions[i + j]) - e.eigenfunction(m.index, positions[i]))
                                        .powi(2)
                                })
                                .sum();
                            spec.dynamics.mode_variance(m) * diff / pairs as f64
                        })
                        .sum()
                })
                .collect()
        }
    };
    Ok(VariogramCurve {
        axis,
        lags: lags.to_vec(),
        stderr: vec![0.0; lags.len()],
        values,
        member_values: Vec::new(),
    })
}

/// Dyadic lags `2 step, 4 step, ...` up to `extent / 16`.
pub fn default_lags(step: f64, extent: f64) -> Vec<f64> {
    let mut lags = Vec::new();
    let mut j = 2usize;
    while j as f64 * step <= extent / 16.0 * (1.0 + 1e-12) {
        lags.push(j as f64 * step);
        j *= 2;
    }
    lags
}

/// `count` dyadic lags starting at the first grid multiple at or above
/// `max(2 step, 4 / sqrt(alpha_max))`. Below `1/sqrt(alpha_N)` a truncated
/// expansion is smooth and the structure function turns quadratic.
pub fn truncation_aware_lags(step: f64, alpha_max: f64, count: usize) -> Vec<f64> {
    let floor = (2.0 * step).max(4.0 / alpha_max.sqrt());
    let first = (floor / step - 1e-9).ceil().max(2.0);
    (0..count).map(|j| first * step * f64::powi(2.0, j as i32)).collect()
}
