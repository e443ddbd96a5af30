//! Space-time fields `u(t, x) = Σ_{k<=N} u_k(t) e_k(x)` over an eigenbasis.

use std::fmt;
use std::sync::Arc;

use ndarray::{Array3, Axis};
use rayon::prelude::*;
use serde::Serialize;

use crate::cm_kernel::KernelMeasure;
use crate::error::{Error, Result};
use crate::rng;
use crate::sampler::{sample_gle_mode, sample_gle_mode_spectral, sample_ou_mode, PathEnsemble, TimeGrid};
use crate::spectral::{Mode, SpectralDensity};

pub type EigenFn = Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>;

/// User-tabulated eigenpairs: `modes[k-1] = (alpha_k, c_k)` and `eval(k, x) = e_k(x)`.
#[derive(Clone)]
pub struct CustomBasis {
    pub modes: Vec<(f64, f64)>,
    pub eval: EigenFn,
}

impl fmt::Debug for CustomBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomBasis").field("modes", &self.modes).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum EigenBasis {
    /// `e_k(x) = sqrt(2/L) sin(k pi x / L)` on `(0, L)`, `alpha_k = (k pi / L)²`.
    DirichletInterval { length: f64 },
    Custom(CustomBasis),
}

impl EigenBasis {
    pub fn dirichlet(length: f64) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidInput(format!("interval length must be > 0, got {length}")));
        }
        Ok(EigenBasis::DirichletInterval { length })
    }

    pub fn custom(modes: Vec<(f64, f64)>, eval: EigenFn) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidInput("custom basis needs at least one mode".into()));
        }
        for w in modes.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidInput("custom alpha_k must be strictly increasing".into()));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::InvalidInput("custom c_k must be nondecreasing".into()));
            }
        }
        if modes.iter().any(|&(a, c)| !(a > 0.0 && c > 0.0 && a.is_finite() && c.is_finite())) {
            return Err(Error::InvalidInput("custom alpha_k and c_k must be positive".into()));
        }
        Ok(EigenBasis::Custom(CustomBasis { modes, eval }))
    }

    /// Number of available modes (`None` = unbounded).
    pub fn mode_limit(&self) -> Option<usize> {
        match self {
            EigenBasis::DirichletInterval { .. } => None,
            EigenBasis::Custom(c) => Some(c.modes.len()),
        }
    }

    fn check_index(&self, k: usize) -> Result<()> {
        if k == 0 || self.mode_limit().is_some_and(|lim| k > lim) {
            return Err(Error::InvalidInput(format!("mode index {k} outside the basis")));
        }
        Ok(())
    }

    pub fn alpha(&self, k: usize) -> Result<f64> {
        self.check_index(k)?;
        Ok(match self {
            EigenBasis::DirichletInterval { length } => (k as f64 * std::f64::consts::PI / length).powi(2),
            EigenBasis::Custom(c) => c.modes[k - 1].0,
        })
    }

    pub fn sup_constant(&self, k: usize) -> Result<f64> {
        self.check_index(k)?;
        Ok(match self {
            EigenBasis::DirichletInterval { length } => (2.0 / length).sqrt(),
            EigenBasis::Custom(c) => c.modes[k - 1].1,
        })
    }

    pub fn eigenfunction(&self, k: usize, x: f64) -> f64 {
        match self {
            EigenBasis::DirichletInterval { length } => {
                if x == 0.0 || x == *length {
                    // exact zeros at the boundary (sin(k pi) is not exactly 0 in floating point)
                    return 0.0;
                }
                (2.0 / length).sqrt() * (k as f64 * std::f64::consts::PI * x / length).sin()
            }
            EigenBasis::Custom(c) => (c.eval)(k, x),
        }
    }

    /// `(0, L)` for the built-in basis.
    pub fn domain(&self) -> Option<(f64, f64)> {
        match self {
            EigenBasis::DirichletInterval { length } => Some((0.0, *length)),
            EigenBasis::Custom(_) => None,
        }
    }
}

/// Largest observed `|e_k'(x)| / (sqrt(alpha_k) c_k)` over `k <= k_max` on a
/// uniform grid, by centred differences. For the sine basis the exact
/// supremum is 1, so `M = 1` in `|grad e_k| <= M sqrt(alpha_k) c_k`.
pub fn gradient_bound_ratio(basis: &EigenBasis, k_max: usize, points: usize) -> Result<f64> {
    let (lo, hi) = basis
        .domain()
        .ok_or_else(|| Error::InvalidInput("gradient check needs a basis with a known domain".into()))?;
    let step = (hi - lo) / points as f64;
    let h = 1e-6 * (hi - lo);
    let mut worst: f64 = 0.0;
    for k in 1..=k_max {
        let scale = basis.alpha(k)?.sqrt() * basis.sup_constant(k)?;
        for j in 0..=points {
            let x = (lo + j as f64 * step).clamp(lo + h, hi - h);
            let d = (basis.eigenfunction(k, x + h) - basis.eigenfunction(k, x - h)) / (2.0 * h);
            worst = worst.max(d.abs() / scale);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum NoiseWeights {
    Flat { lambda: f64 },
    /// `lambda_k = alpha_k^{-s}`
    PowerDecay { s: f64 },
    Explicit { values: Vec<f64> },
}

impl NoiseWeights {
    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseWeights::Flat { lambda } if !(lambda.is_finite() && *lambda > 0.0) => {
                Err(Error::InvalidInput(format!("flat noise weight must be > 0, got {lambda}")))
            }
            NoiseWeights::PowerDecay { s } if !(s.is_finite() && *s >= 0.0) => {
                Err(Error::InvalidInput(format!("power decay exponent must be >= 0, got {s}")))
            }
            NoiseWeights::Explicit { values } if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) => {
                Err(Error::InvalidInput("explicit noise weights must be positive".into()))
            }
            NoiseWeights::Explicit { values } if values.is_empty() => {
                Err(Error::InvalidInput("explicit noise weights are empty".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn lambda(&self, k: usize, alpha: f64) -> Result<f64> {
        match self {
            NoiseWeights::Flat { lambda } => Ok(*lambda),
            NoiseWeights::PowerDecay { s } => Ok(alpha.powf(-s)),
            NoiseWeights::Explicit { values } => values
                .get(k - 1)
                .copied()
                .ok_or_else(|| Error::InvalidInput(format!("no explicit noise weight for mode {k}"))),
        }
    }

    pub fn mode_limit(&self) -> Option<usize> {
        match self {
            NoiseWeights::Explicit { values } => Some(values.len()),
            _ => None,
        }
    }
}

pub fn mode(basis: &EigenBasis, weights: &NoiseWeights, k: usize) -> Result<Mode> {
    let alpha = basis.alpha(k)?;
    Mode::new(k, alpha, weights.lambda(k, alpha)?, basis.sup_constant(k)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Convergent,
    Divergent,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesTest {
    /// Terms are exactly `C k^{-p}`; tail by Euler-Maclaurin.
    ClosedForm,
    /// Raabe's statistic `k (t_k / t_{k+1} - 1)` averaged over the upper half of the probe.
    Raabe,
}

/// Convergence assessment of `Σ_k t_k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesReport {
    pub n_probe: usize,
    /// `S_N` for `N = 1..=n_probe`.
    pub partial_sums: Vec<f64>,
    /// Decay exponent `p` of `t_k ~ C k^{-p}` (exact or estimated).
    pub exponent: f64,
    /// Estimate of `Σ_{k > n_probe} t_k` when convergent.
    pub tail: Option<f64>,
    pub limit: Option<f64>,
    pub test: SeriesTest,
    pub verdict: Verdict,
}

impl SeriesReport {
    /// Estimated `Σ_{k > n} t_k` for `n <= n_probe`.
    pub fn tail_after(&self, n: usize) -> Option<f64> {
        let tail = self.tail?;
        let s_n = if n == 0 { 0.0 } else { self.partial_sums[n - 1] };
        Some(self.partial_sums[self.n_probe - 1] - s_n + tail)
    }
}

/// `Σ_{k > n} k^{-p}` by Euler-Maclaurin, `p > 1`.
pub fn zeta_tail(p: f64, n: usize) -> f64 {
    let n = n as f64;
    n.powf(1.0 - p) / (p - 1.0) - 0.5 * n.powf(-p) + p * n.powf(-p - 1.0) / 12.0
        - p * (p + 1.0) * (p + 2.0) * n.powf(-p - 3.0) / 720.0
}

/// Coefficient and exponent `(C, p)` with `lambda_k² c_k^{2 c_power} / alpha_k^eta = C k^{-p}`,
/// when the basis/weight pair admits it.
fn power_law_terms(basis: &EigenBasis, weights: &NoiseWeights, eta: f64, with_c: bool) -> Option<(f64, f64)> {
    let EigenBasis::DirichletInterval { length } = basis else {
        return None;
    };
    let base = (length / std::f64::consts::PI).powi(2); // alpha_k = k² / base
    let c2 = if with_c { 2.0 / length } else { 1.0 };
    match *weights {
        NoiseWeights::Flat { lambda } => Some((lambda * lambda * c2 * base.powf(eta), 2.0 * eta)),
        NoiseWeights::PowerDecay { s } => Some((c2 * base.powf(2.0 * s + eta), 4.0 * s + 2.0 * eta)),
        NoiseWeights::Explicit { .. } => None,
    }
}

fn series_report(
    basis: &EigenBasis,
    weights: &NoiseWeights,
    eta: f64,
    with_c: bool,
    n_probe: usize,
) -> Result<SeriesReport> {
    weights.validate()?;
    if n_probe < 100 {
        return Err(Error::InvalidInput(format!("n_probe must be >= 100, got {n_probe}")));
    }
    let limit = [basis.mode_limit(), weights.mode_limit()].into_iter().flatten().min();
    if let Some(lim) = limit {
        if lim < n_probe {
            return Err(Error::InvalidInput(format!(
                "basis/weights provide {lim} modes but the probe needs {n_probe}"
            )));
        }
    }
    let mut terms = Vec::with_capacity(n_probe);
    for k in 1..=n_probe {
        let m = mode(basis, weights, k)?;
        let c2 = if with_c { m.c * m.c } else { 1.0 };
        terms.push(m.lambda * m.lambda * c2 / m.alpha.powf(eta));
    }
    let mut partial_sums = Vec::with_capacity(n_probe);
    let mut acc = 0.0;
    for t in &terms {
        acc += t;
        partial_sums.push(acc);
    }

    if let Some((coef, p)) = power_law_terms(basis, weights, eta, with_c) {
        let (verdict, tail) = if p > 1.0 {
            (Verdict::Convergent, Some(coef * zeta_tail(p, n_probe)))
        } else {
            (Verdict::Divergent, None)
        };
        return Ok(SeriesReport {
            n_probe,
            limit: tail.map(|t| acc + t),
            partial_sums,
            exponent: p,
            tail,
            test: SeriesTest::ClosedForm,
            verdict,
        });
    }

    let upper = &terms[n_probe / 2..];
    let first_k = n_probe / 2 + 1;
    let raabe = upper
        .windows(2)
        .enumerate()
        .map(|(i, w)| (first_k + i) as f64 * (w[0] / w[1] - 1.0))
        .sum::<f64>()
        / (upper.len() - 1) as f64;
    let verdict = if raabe > 1.1 {
        Verdict::Convergent
    } else if raabe < 0.9 {
        Verdict::Divergent
    } else {
        Verdict::Inconclusive
    };
    let tail = (verdict == Verdict::Convergent).then(|| {
        let last = terms[n_probe - 1];
        last * n_probe as f64 / (raabe - 1.0)
    });
    Ok(SeriesReport {
        n_probe,
        limit: tail.map(|t| acc + t),
        partial_sums,
        exponent: raabe,
        tail,
        test: SeriesTest::Raabe,
        verdict,
    })
}

/// Admissibility of `Σ lambda_k² / alpha_k < inf`, the condition for a
/// stationary solution to exist.
pub fn check_wellposedness(basis: &EigenBasis, weights: &NoiseWeights, n_probe: usize) -> Result<SeriesReport> {
    series_report(basis, weights, 1.0, false, n_probe)
}

/// Like [`check_wellposedness`] but fails unless the series is convergent.
pub fn require_wellposed(basis: &EigenBasis, weights: &NoiseWeights, n_probe: usize) -> Result<SeriesReport> {
    let report = check_wellposedness(basis, weights, n_probe)?;
    match report.verdict {
        Verdict::Convergent => Ok(report),
        v => Err(Error::Divergent(format!(
            "Σ lambda_k²/alpha_k is {v:?} (decay exponent {:.4})",
            report.exponent
        ))),
    }
}

pub const ETA_GRID: [f64; 19] = [
    0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95,
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityAssumptionReport {
    pub eta: f64,
    pub series: SeriesReport,
    /// Smallest `eta` on [`ETA_GRID`] whose series converges.
    pub min_admissible_eta: Option<f64>,
    /// `(0, 1 - eta_min)`: Hölder exponents available in time and space.
    pub hoelder_range: Option<(f64, f64)>,
}

/// Assessment of `Σ lambda_k² c_k² / alpha_k^eta < inf`.
pub fn check_regularity_assumption(
    basis: &EigenBasis,
    weights: &NoiseWeights,
    eta: f64,
    n_probe: usize,
) -> Result<RegularityAssumptionReport> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidInput(format!("eta must lie in (0, 1), got {eta}")));
    }
    let series = series_report(basis, weights, eta, true, n_probe)?;
    let mut min_admissible_eta = None;
    for &e in &ETA_GRID {
        if series_report(basis, weights, e, true, n_probe)?.verdict == Verdict::Convergent {
            min_admissible_eta = Some(e);
            break;
        }
    }
    Ok(RegularityAssumptionReport {
        eta,
        series,
        min_admissible_eta,
        hoelder_range: min_admissible_eta.map(|e| (0.0, 1.0 - e)),
    })
}

/// Per-mode dynamics used for field assembly.
#[derive(Debug, Clone, PartialEq)]
pub enum ModeDynamics {
    /// Memory equation, sampled by circulant embedding.
    Gle(KernelMeasure),
    /// Memory equation, sampled by harmonic synthesis with the given node count.
    GleSpectral(KernelMeasure, usize),
    /// Classical heat equation: Ornstein-Uhlenbeck modes.
    Heat,
}

impl ModeDynamics {
    /// Stationary variance of a mode under these dynamics.
    pub fn mode_variance(&self, mode: &Mode) -> f64 {
        match self {
            ModeDynamics::Heat => mode.variance() / 2.0,
            _ => mode.variance(),
        }
    }

    fn sample(&self, mode: Mode, grid: &TimeGrid, m: usize, seed: u64) -> Result<PathEnsemble> {
        match self {
            ModeDynamics::Gle(kernel) => sample_gle_mode(&SpectralDensity::new(kernel.clone(), mode), grid, m, seed),
            ModeDynamics::GleSpectral(kernel, nodes) => {
                sample_gle_mode_spectral(&SpectralDensity::new(kernel.clone(), mode), grid, m, seed, *nodes)
            }
            ModeDynamics::Heat => sample_ou_mode(&mode, grid, m, seed),
        }
    }
}

/// Everything that determines a field draw except the output layout.
#[derive(Debug, Clone)]
pub struct FieldSpec {
    pub basis: EigenBasis,
    pub weights: NoiseWeights,
    pub dynamics: ModeDynamics,
    pub grid: TimeGrid,
    /// Truncation `N`.
    pub modes: usize,
    pub ensemble: usize,
    pub seed: u64,
    pub tail_budget: f64,
    pub n_probe: usize,
}

/// Where to evaluate the field: `space_points` at every `time_stride`-th grid time.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldLayout {
    pub space_points: Vec<f64>,
    pub time_stride: usize,
}

#[derive(Debug, Clone)]
pub struct FieldSample {
    pub times: TimeGrid,
    pub space_points: Vec<f64>,
    /// `ensemble x time x space`
    pub values: Array3<f64>,
    pub truncation: usize,
    /// Omitted variance `Σ_{k>N} lambda_k²/alpha_k`.
    pub tail_bound: f64,
}

impl FieldSample {
    /// Wraps a single-mode ensemble as a field observed at one point.
    pub fn from_paths(ens: &PathEnsemble) -> Self {
        FieldSample {
            times: ens.grid,
            space_points: vec![0.0],
            values: ens.paths.clone().insert_axis(Axis(2)),
            truncation: 1,
            tail_bound: 0.0,
        }
    }
}

/// Draws the field for one layout.
pub fn assemble_field(spec: &FieldSpec, space_points: &[f64]) -> Result<FieldSample> {
    let layout = FieldLayout { space_points: space_points.to_vec(), time_stride: 1 };
    Ok(assemble_field_layouts(spec, &[layout])?.remove(0))
}

/// Omitted variance after truncation at `n` and the admissibility report behind it.
pub fn truncation_tail(spec: &FieldSpec) -> Result<(f64, SeriesReport)> {
    let probe = spec.n_probe.max(2 * spec.modes).max(100);
    let report = require_wellposed(&spec.basis, &spec.weights, probe)?;
    let tail = report.tail_after(spec.modes).unwrap_or(f64::INFINITY);
    Ok((tail, report))
}

/// Draws each mode once and projects it onto every requested layout.
pub fn assemble_field_layouts(spec: &FieldSpec, layouts: &[FieldLayout]) -> Result<Vec<FieldSample>> {
    if spec.modes == 0 {
        return Err(Error::InvalidInput("truncation N must be >= 1".into()));
    }
    if spec.ensemble == 0 {
        return Err(Error::InvalidInput("ensemble size must be >= 1".into()));
    }
    let (tail, _) = truncation_tail(spec)?;
    if tail > spec.tail_budget {
        return Err(Error::TailBudgetExceeded { tail, budget: spec.tail_budget });
    }
    for layout in layouts {
        if layout.time_stride == 0 || layout.space_points.is_empty() {
            return Err(Error::InvalidInput("layout needs a positive stride and at least one point".into()));
        }
        if let Some((lo, hi)) = spec.basis.domain() {
            if let Some(x) = layout.space_points.iter().find(|x| !(**x >= lo && **x <= hi)) {
                return Err(Error::InvalidInput(format!("space point {x} outside [{lo}, {hi}]")));
            }
        }
    }

    let grid = spec.grid;
    let mut samples: Vec<FieldSample> = layouts
        .iter()
        .map(|layout| {
            let nt = grid.n.div_ceil(layout.time_stride);
            FieldSample {
                times: TimeGrid { t0: grid.t0, dt: grid.dt * layout.time_stride as f64, n: nt },
                space_points: layout.space_points.clone(),
                values: Array3::zeros((spec.ensemble, nt, layout.space_points.len())),
                truncation: spec.modes,
                tail_bound: tail,
            }
        })
        .collect();

    for k in 1..=spec.modes {
        let m = mode(&spec.basis, &spec.weights, k)?;
        let ens = spec.dynamics.sample(m, &grid, spec.ensemble, rng::derive_key(spec.seed, k as u64))?;
        for (sample, layout) in samples.iter_mut().zip(layouts) {
            let shape: Vec<f64> = layout.space_points.iter().map(|&x| spec.basis.eigenfunction(k, x)).collect();
            let stride = layout.time_stride;
            sample
                .values
                .axis_iter_mut(Axis(0))
                .into_par_iter()
                .zip(ens.paths.axis_iter(Axis(0)).into_par_iter())
                .for_each(|(mut slab, path)| {
                    for (ti, mut row) in slab.axis_iter_mut(Axis(0)).enumerate() {
                        let u = path[ti * stride];
                        for (v, e) in row.iter_mut().zip(&shape) {
                            *v += u * e;
                        }
                    }
                });
        }
    }
    Ok(samples)
}

/// `Σ_{k<=N} Var(u_k) e_k(x)²` for the given dynamics.
pub fn pointwise_variance(spec: &FieldSpec, x: f64) -> Result<f64> {
    let mut acc = 0.0;
    for k in 1..=spec.modes {
        let m = mode(&spec.basis, &spec.weights, k)?;
        acc += spec.dynamics.mode_variance(&m) * spec.basis.eigenfunction(k, x).powi(2);
    }
    Ok(acc)
}
