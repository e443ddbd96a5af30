//! Stationary Gaussian sample paths for single modes.
//!
//! Three generators share one output type:
//!
//! * circulant embedding (Davies-Harte) of the exact lag covariance, the
//!   default for memory-driven modes;
//! * harmonic superposition over a resonance-aware frequency grid, kept as
//!   an independent cross-check;
//! * the exact AR(1) recursion of the memoryless (Ornstein-Uhlenbeck) mode
//!   used by the classical heat equation.
//!
//! Path `i` of a mode is drawn from the stream keyed by `(seed, mode index, i)`,
//! so any subset of an ensemble can be regenerated on its own.

use std::sync::Arc;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng;
use crate::spectral::{covariance_sequence, find_resonance, tail_bound, Mode, SpectralDensity, SpectralWeight, DEFAULT_Q};

/// Uniform time grid `t0 + j dt`, `j = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub n: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, n: usize) -> Result<Self> {
        if !t0.is_finite() {
            return Err(Error::InvalidInput(format!("t0 must be finite, got {t0}")));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidInput(format!("dt must be > 0, got {dt}")));
        }
        if n < 2 {
            return Err(Error::InvalidInput(format!("time grid needs n >= 2, got {n}")));
        }
        Ok(Self { t0, dt, n })
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.dt
    }

    pub fn extent(&self) -> f64 {
        (self.n - 1) as f64 * self.dt
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMethod {
    CirculantEmbedding,
    SpectralSynthesis,
    OuExact,
}

/// `ensemble x n` matrix of sampled paths with the parameters that produced it.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    pub grid: TimeGrid,
    pub paths: Array2<f64>,
    pub mode: Mode,
    pub seed: u64,
    pub method: SamplingMethod,
    /// Fraction of circulant eigenvalue mass clipped to zero (embedding only).
    pub clipped_mass: f64,
    /// Circulant length used (embedding only).
    pub embedding_len: usize,
}

fn check_ensemble(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidInput("ensemble size must be >= 1".into()));
    }
    Ok(())
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Square roots of the circulant eigenvalues, pre-scaled by `1/sqrt(M)`.
struct Embedding {
    sqrt_eig: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    clipped_mass: f64,
}

const PSD_TOLERANCE: f64 = 1e-8;
const MAX_CLIPPED_MASS: f64 = 1e-6;
const MAX_EMBEDDING_FACTOR: usize = 16;

fn build_embedding(sd: &SpectralDensity, grid: &TimeGrid) -> Result<Embedding> {
    let n = grid.n;
    let mut planner = FftPlanner::<f64>::new();
    let mut factor = 2;
    loop {
        let len = factor * n;
        let half = len / 2;
        let cov = covariance_sequence(sd, grid.dt, half + 1)?;
        let r0 = cov[0];
        let mut row: Vec<Complex<f64>> = (0..len)
            .map(|j| Complex::new(cov[if j <= half { j } else { len - j }], 0.0))
            .collect();
        let fft = planner.plan_fft_forward(len);
        fft.process(&mut row);
        let eig: Vec<f64> = row.iter().map(|c| c.re).collect();
        let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
        if min >= -PSD_TOLERANCE * r0 || factor >= MAX_EMBEDDING_FACTOR {
            let total: f64 = eig.iter().map(|e| e.abs()).sum();
            let clipped: f64 = eig.iter().filter(|&&e| e < 0.0).map(|e| -e).sum();
            let clipped_mass = if total > 0.0 { clipped / total } else { 0.0 };
            if min < -PSD_TOLERANCE * r0 && clipped_mass > MAX_CLIPPED_MASS {
                return Err(Error::EmbeddingNotPsd { clipped_fraction: clipped_mass });
            }
            let scale = 1.0 / len as f64;
            let sqrt_eig = eig.iter().map(|&e| (e.max(0.0) * scale).sqrt()).collect();
            return Ok(Embedding { sqrt_eig, fft, clipped_mass });
        }
        factor *= 2;
    }
}

/// Davies-Harte sampling of the mode's lag covariance on `grid`.
pub fn sample_gle_mode(sd: &SpectralDensity, grid: &TimeGrid, m: usize, seed: u64) -> Result<PathEnsemble> {
    check_ensemble(m)?;
    let n = grid.n;
    let mut paths = Array2::<f64>::zeros((m, n));
    let mut ensemble = PathEnsemble {
        grid: *grid,
        paths: Array2::zeros((0, 0)),
        mode: sd.mode,
        seed,
        method: SamplingMethod::CirculantEmbedding,
        clipped_mass: 0.0,
        embedding_len: 0,
    };
    if sd.mode.lambda == 0.0 {
        ensemble.paths = paths;
        return Ok(ensemble);
    }
    let emb = build_embedding(sd, grid)?;
    let len = emb.sqrt_eig.len();
    let lane = sd.mode.index as u64;

    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map_init(
            || vec![Complex::new(0.0, 0.0); emb.fft.get_inplace_scratch_len()],
            |scratch, i| {
                let mut rng = rng::stream(seed, lane, i as u64);
                let mut buf: Vec<Complex<f64>> = emb
                    .sqrt_eig
                    .iter()
                    .map(|&s| {
                        let re = standard_normal(&mut rng);
                        let im = standard_normal(&mut rng);
                        Complex::new(s * re, s * im)
                    })
                    .collect();
                emb.fft.process_with_scratch(&mut buf, scratch);
                buf[..n].iter().map(|c| c.re).collect()
            },
        )
        .collect();
    for (i, row) in rows.into_iter().enumerate() {
        paths.row_mut(i).assign(&ndarray::Array1::from(row));
    }
    ensemble.paths = paths;
    ensemble.clipped_mass = emb.clipped_mass;
    ensemble.embedding_len = len;
    Ok(ensemble)
}

/// Midpoint frequencies and cell widths for harmonic synthesis.
pub(crate) fn synthesis_nodes(sd: &SpectralDensity, node_count: usize) -> Vec<(f64, f64)> {
    let a = sd.mode.alpha * sd.kernel.total_mass();
    let mut cutoff = 4.0 * a.sqrt().max(1.0);
    let budget = 1e-4 * sd.mode.variance();
    while tail_bound(sd, SpectralWeight::One, cutoff) > budget && cutoff < 1e12 {
        cutoff *= 2.0;
    }

    let mut nodes = Vec::with_capacity(node_count);
    let uniform = |lo: f64, hi: f64, count: usize, nodes: &mut Vec<(f64, f64)>| {
        let width = (hi - lo) / count as f64;
        for j in 0..count {
            nodes.push((lo + (j as f64 + 0.5) * width, width));
        }
    };
    let geometric = |lo: f64, hi: f64, count: usize, nodes: &mut Vec<(f64, f64)>| {
        let ratio = (hi / lo).powf(1.0 / count as f64);
        let mut left = lo;
        for _ in 0..count {
            let right = left * ratio;
            nodes.push(((left * right).sqrt(), right - left));
            left = right;
        }
    };

    match find_resonance(sd, DEFAULT_Q) {
        Ok(res) => {
            let spread = res.omega_k.powf(DEFAULT_Q);
            let lo = (res.omega_k - spread).max(0.0);
            let hi = res.omega_k + spread;
            let peak = node_count / 2;
            let below = (node_count - peak) / 2;
            let above = node_count - peak - below;
            if lo > 0.0 {
                uniform(0.0, lo, below, &mut nodes);
                uniform(lo, hi, peak, &mut nodes);
            } else {
                uniform(0.0, hi, peak + below, &mut nodes);
            }
            geometric(hi, cutoff.max(2.0 * hi), above, &mut nodes);
        }
        Err(_) => {
            let inner = 4.0 * a.sqrt().max(1e-3);
            let near = node_count / 2;
            uniform(0.0, inner, near, &mut nodes);
            geometric(inner, cutoff.max(2.0 * inner), node_count - near, &mut nodes);
        }
    }
    nodes
}

/// Harmonic superposition `u(t) = Σ_j sqrt(2 rho(w_j) dw_j) [xi_j cos(w_j t) + eta_j sin(w_j t)]`.
pub fn sample_gle_mode_spectral(
    sd: &SpectralDensity,
    grid: &TimeGrid,
    m: usize,
    seed: u64,
    node_count: usize,
) -> Result<PathEnsemble> {
    check_ensemble(m)?;
    if node_count < 256 {
        return Err(Error::InvalidInput(format!("spectral synthesis needs >= 256 nodes, got {node_count}")));
    }
    let n = grid.n;
    let nodes: Vec<(f64, f64, Complex<f64>)> = synthesis_nodes(sd, node_count)
        .into_iter()
        .map(|(w, dw)| {
            let amp = (2.0 * sd.density(w) * dw).sqrt();
            (w, amp, Complex::from_polar(1.0, w * grid.dt))
        })
        .collect();
    // Lane offset keeps these streams apart from the embedding sampler's.
    let lane = (sd.mode.index as u64) ^ (1 << 62);

    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut out = vec![0.0; n];
            if sd.mode.lambda == 0.0 {
                return out;
            }
            let mut rng = rng::stream(seed, lane, i as u64);
            for &(w, amp, rot) in &nodes {
                let xi = standard_normal(&mut rng);
                let eta = standard_normal(&mut rng);
                // Re[(xi - i eta) e^{i w t}] = xi cos(w t) + eta sin(w t)
                let coeff = Complex::new(amp * xi, -amp * eta);
                let mut z = coeff * Complex::from_polar(1.0, w * grid.t0);
                for v in out.iter_mut() {
                    *v += z.re;
                    z *= rot;
                }
            }
            out
        })
        .collect();
    let mut paths = Array2::<f64>::zeros((m, n));
    for (i, row) in rows.into_iter().enumerate() {
        paths.row_mut(i).assign(&ndarray::Array1::from(row));
    }
    Ok(PathEnsemble {
        grid: *grid,
        paths,
        mode: sd.mode,
        seed,
        method: SamplingMethod::SpectralSynthesis,
        clipped_mass: 0.0,
        embedding_len: 0,
    })
}

/// Exact stationary AR(1) sampling of `du = -alpha u dt + lambda dW`.
pub fn sample_ou_mode(mode: &Mode, grid: &TimeGrid, m: usize, seed: u64) -> Result<PathEnsemble> {
    check_ensemble(m)?;
    if !(mode.alpha > 0.0) {
        return Err(Error::InvalidInput(format!("OU mode needs alpha > 0, got {}", mode.alpha)));
    }
    let n = grid.n;
    let decay = (-mode.alpha * grid.dt).exp();
    let stationary_sd = mode.lambda / (2.0 * mode.alpha).sqrt();
    // sqrt((1 - e^{-2 alpha dt}) / (2 alpha)) with expm1 for small alpha dt
    let innovation_sd = mode.lambda * (-(-2.0 * mode.alpha * grid.dt).exp_m1() / (2.0 * mode.alpha)).sqrt();
    let lane = (mode.index as u64) ^ (1 << 61);

    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, lane, i as u64);
            let mut out = Vec::with_capacity(n);
            let mut u = stationary_sd * standard_normal(&mut rng);
            out.push(u);
            for _ in 1..n {
                u = decay * u + innovation_sd * standard_normal(&mut rng);
                out.push(u);
            }
            out
        })
        .collect();
    let mut paths = Array2::<f64>::zeros((m, n));
    for (i, row) in rows.into_iter().enumerate() {
        paths.row_mut(i).assign(&ndarray::Array1::from(row));
    }
    Ok(PathEnsemble {
        grid: *grid,
        paths,
        mode: *mode,
        seed,
        method: SamplingMethod::OuExact,
        clipped_mass: 0.0,
        embedding_len: 0,
    })
}

/// Sample autocovariance at integer lag `lag` pooled over paths and time.
pub fn sample_autocovariance(paths: &Array2<f64>, lag: usize) -> f64 {
    let (m, n) = paths.dim();
    let mut acc = 0.0;
    for row in paths.rows() {
        let mut s = 0.0;
        for j in 0..n - lag {
            s += row[j] * row[j + lag];
        }
        acc += s;
    }
    acc / (m * (n - lag)) as f64
}

/// Per-path lag products averaged over time; their spread across paths gives
/// a Monte Carlo standard error that respects temporal dependence.
pub fn per_path_autocovariance(paths: &Array2<f64>, lag: usize) -> Vec<f64> {
    let n = paths.ncols();
    paths
        .rows()
        .into_iter()
        .map(|row| (0..n - lag).map(|j| row[j] * row[j + lag]).sum::<f64>() / (n - lag) as f64)
        .collect()
}

/// Mean and standard error of a sample.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    if xs.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}
