use serde::Serialize;

use super::SpectralDensity;
use crate::error::{Error, Result};

pub const DEFAULT_Q: f64 = 0.5;

/// Root of `1 - alpha K_sin(w)/w` on `(0, inf)` with the constant of the
/// lower bound around it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Resonance {
    pub omega_k: f64,
    pub q: f64,
    /// `K_sin(1) / (4 K(0))`
    pub lower_bound_constant: f64,
}

fn detuning(sd: &SpectralDensity, omega: f64) -> f64 {
    1.0 - sd.mode.alpha * sd.kernel.sin_over_omega(omega)
}

/// Locates the resonance by bisection. `K_sin(w)/w` is strictly decreasing,
/// so the detuning `g(w) = 1 - alpha K_sin(w)/w` has at most one root; it
/// has one exactly when `g(0+) = 1 - alpha Σ w_i/x_i² < 0`.
pub fn find_resonance(sd: &SpectralDensity, q: f64) -> Result<Resonance> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidInput(format!("q must lie in (0, 1), got {q}")));
    }
    let alpha = sd.mode.alpha;
    let k0 = sd.kernel.total_mass();
    let scale = (alpha * k0).sqrt();
    if detuning(sd, 0.0) >= 0.0 {
        return Err(Error::NoResonance { alpha, omega_max: 1e6 * scale });
    }
    // g(w) >= 1 - alpha K(0)/w² > 0 at w = 2 sqrt(alpha K(0)).
    let (mut lo, mut hi) = (0.0f64, 2.0 * scale);
    for _ in 0..4096 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if detuning(sd, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let omega_k = if detuning(sd, hi).abs() < detuning(sd, lo).abs() { hi } else { lo };
    let residual = detuning(sd, omega_k).abs();
    if residual > 1e-12 {
        return Err(Error::ToleranceNotMet(format!(
            "resonance residual {residual:.3e} above 1e-12 at omega = {omega_k}"
        )));
    }
    Ok(Resonance {
        omega_k,
        q,
        lower_bound_constant: sd.kernel.sin_transform(1.0) / (4.0 * k0),
    })
}

/// `|alpha K_sin(w)/w - 1| - (c/omega_k) |w - omega_k|`.
pub fn inequality_slack(sd: &SpectralDensity, res: &Resonance, omega: f64) -> f64 {
    detuning(sd, omega).abs() - res.lower_bound_constant / res.omega_k * (omega - res.omega_k).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum InequalityReport {
    Checked { min_slack: f64, witness: f64 },
    /// The bound is only claimed for `omega_k > 1`.
    Skipped { omega_k: f64 },
}

impl InequalityReport {
    pub fn min_slack(&self) -> Option<f64> {
        match *self {
            InequalityReport::Checked { min_slack, .. } => Some(min_slack),
            InequalityReport::Skipped { .. } => None,
        }
    }
}

pub const INEQUALITY_GRID: usize = 1024;

/// Samples the lower bound on `[omega_k - omega_k^q, omega_k + omega_k^q]`.
pub fn check_resonance_inequality(sd: &SpectralDensity, res: &Resonance) -> Result<InequalityReport> {
    if res.omega_k <= 1.0 {
        return Ok(InequalityReport::Skipped { omega_k: res.omega_k });
    }
    let spread = res.omega_k.powf(res.q);
    let (lo, hi) = (res.omega_k - spread, res.omega_k + spread);
    let step = (hi - lo) / (INEQUALITY_GRID - 1) as f64;
    let mut min_slack = f64::INFINITY;
    let mut witness = lo;
    for i in 0..INEQUALITY_GRID {
        let w = lo + step * i as f64;
        let s = inequality_slack(sd, res, w);
        if s < min_slack {
            min_slack = s;
            witness = w;
        }
    }
    if min_slack < 0.0 {
        return Err(Error::InequalityViolated { omega: witness, slack: min_slack });
    }
    Ok(InequalityReport::Checked { min_slack, witness })
}
