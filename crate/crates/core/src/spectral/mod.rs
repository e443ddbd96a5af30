//! Per-mode spectral density of the stationary solution and its integrals.
//!
//! For a mode with eigenvalue `alpha`, noise weight `lambda` and kernel `K`,
//! the stationary process `u_k` has spectral density
//!
//! ```text
//! rho(w) = (1/pi) * lambda² K_cos(w) / (alpha² K_cos(w)² + (w - alpha K_sin(w))²)
//! ```
//!
//! and every second-moment quantity below is a weighted integral of `rho`
//! over the real line. Integration uses adaptive Gauss-Kronrod on a partition
//! that isolates the resonance peak at `omega_k` plus a closed-form bound on
//! the tail beyond a cutoff `Omega_max`.

mod relaxation;
mod resonance;

pub use relaxation::covariance_sequence;
pub use resonance::{
    check_resonance_inequality, find_resonance, inequality_slack, InequalityReport, Resonance,
    DEFAULT_Q,
};

use serde::Serialize;
use std::f64::consts::PI;

use crate::cm_kernel::KernelMeasure;
use crate::error::{ensure_finite, Error, Result};
use crate::quadrature;

/// One Fourier mode of the field expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mode {
    pub index: usize,
    /// Eigenvalue of `-A` for this mode.
    pub alpha: f64,
    /// Noise weight.
    pub lambda: f64,
    /// Sup-norm constant of the eigenfunction.
    pub c: f64,
}

impl Mode {
    pub fn new(index: usize, alpha: f64, lambda: f64, c: f64) -> Result<Self> {
        if index == 0 {
            return Err(Error::InvalidInput("mode index starts at 1".into()));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidInput(format!("alpha_k must be > 0, got {alpha}")));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidInput(format!("lambda_k must be >= 0, got {lambda}")));
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidInput(format!("c_k must be > 0, got {c}")));
        }
        Ok(Self { index, alpha, lambda, c })
    }

    /// Mode used only for its `(alpha, lambda)` pair.
    pub fn bare(alpha: f64, lambda: f64) -> Result<Self> {
        Self::new(1, alpha, lambda, 1.0)
    }

    /// `lambda² / alpha`, the stationary variance of the mode.
    pub fn variance(&self) -> f64 {
        self.lambda * self.lambda / self.alpha
    }
}

/// A kernel paired with a mode.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDensity {
    pub kernel: KernelMeasure,
    pub mode: Mode,
}

impl SpectralDensity {
    pub fn new(kernel: KernelMeasure, mode: Mode) -> Self {
        Self { kernel, mode }
    }

    /// `rho(w)` without argument checks.
    pub fn density(&self, omega: f64) -> f64 {
        let lambda2 = self.mode.lambda * self.mode.lambda;
        if lambda2 == 0.0 {
            return 0.0;
        }
        let a = self.mode.alpha;
        let (kc, ks) = self.kernel.transforms(omega);
        let detune = omega - a * ks;
        lambda2 * kc / (PI * (a * a * kc * kc + detune * detune))
    }
}

/// Spectral density `rho_k(w)`.
pub fn rho(sd: &SpectralDensity, omega: f64) -> Result<f64> {
    ensure_finite("omega", omega)?;
    Ok(sd.density(omega))
}

/// Multiplier applied to `rho` inside a spectral integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralWeight {
    One,
    /// `cos(tau w)`
    Cos(f64),
    /// `2 (1 - cos(h w))`, the increment second moment
    Increment(f64),
    /// `|w|^p` with `0 <= p < 1`
    Power(f64),
}

impl SpectralWeight {
    fn eval(self, omega: f64) -> f64 {
        match self {
            SpectralWeight::One => 1.0,
            SpectralWeight::Cos(tau) => (tau * omega).cos(),
            SpectralWeight::Increment(h) => {
                // 1 - cos(x) = 2 sin²(x/2) avoids cancellation at small x
                let s = (0.5 * h * omega).sin();
                4.0 * s * s
            }
            SpectralWeight::Power(p) => omega.abs().powf(p),
        }
    }

    /// `(c, p)` such that `|weight(w)| <= c w^p` for large `w`.
    fn growth(self) -> (f64, f64) {
        match self {
            SpectralWeight::One | SpectralWeight::Cos(_) => (1.0, 0.0),
            SpectralWeight::Increment(_) => (4.0, 0.0),
            SpectralWeight::Power(p) => (1.0, p),
        }
    }
}

/// Closed-form bound on `2 ∫_Omega^inf |weight| rho dw`. Needs `Omega² > alpha K(0)`.
///
/// For `w² > alpha K(0)`, `|w - alpha K_sin(w)| >= w (1 - alpha K(0)/w²)`
/// because `w K_sin(w) <= K(0)`; the numerator uses either
/// `K_cos(w) <= K(0)/(2w)` or `K_cos(w) <= (Σ w_i x_i)/w²`.
pub fn tail_bound(sd: &SpectralDensity, weight: SpectralWeight, cutoff: f64) -> f64 {
    let lambda2 = sd.mode.lambda * sd.mode.lambda;
    let a = sd.mode.alpha * sd.kernel.total_mass();
    let shrink = 1.0 - a / (cutoff * cutoff);
    if shrink <= 0.0 {
        return f64::INFINITY;
    }
    let (c, p) = weight.growth();
    let via_sup = 0.5 * sd.kernel.total_mass() * cutoff.powf(p - 2.0) / (2.0 - p);
    let via_moment = sd.kernel.first_moment() * cutoff.powf(p - 3.0) / (3.0 - p);
    2.0 * c * lambda2 * via_sup.min(via_moment) / (PI * shrink * shrink)
}

const MAX_DOUBLINGS: usize = 40;
const MAX_SEGMENTS: usize = 400_000;

/// Breakpoints on `[0, inf)` that isolate the resonance peak.
pub(crate) fn peak_partition(sd: &SpectralDensity, q: f64) -> (Vec<f64>, f64) {
    let a = sd.mode.alpha * sd.kernel.total_mass();
    let mut points = vec![0.0];
    let start = match find_resonance(sd, q) {
        Ok(res) => {
            let w = res.omega_k;
            let spread = w.powf(q);
            for p in [w - spread, w - 1.0, w, w + 1.0, w + spread] {
                if p > 0.0 {
                    points.push(p);
                }
            }
            (4.0 * w).max(4.0 * a.sqrt())
        }
        Err(_) => 4.0 * a.sqrt(),
    };
    points.sort_by(f64::total_cmp);
    points.dedup();
    let start = start.max(points.last().copied().unwrap_or(0.0) * 2.0).max(1.0);
    (points, start)
}

/// `∫_R weight(w) rho(w) dw` with absolute error target `rel_tol * lambda²/alpha`.
pub fn spectral_integral(sd: &SpectralDensity, weight: SpectralWeight, rel_tol: f64) -> Result<f64> {
    check_rel_tol(rel_tol)?;
    if sd.mode.lambda == 0.0 {
        return Ok(0.0);
    }
    let scale = sd.mode.variance();
    let tail_budget = 0.25 * rel_tol * scale;
    let (mut breaks, mut cutoff) = peak_partition(sd, DEFAULT_Q);

    let mut doublings = 0;
    breaks.push(cutoff);
    while tail_bound(sd, weight, cutoff) > tail_budget {
        if doublings == MAX_DOUBLINGS {
            return Err(Error::ToleranceNotMet(format!(
                "tail bound {:.3e} above budget {:.3e} at Omega_max = {cutoff:.3e}",
                tail_bound(sd, weight, cutoff),
                tail_budget
            )));
        }
        cutoff *= 2.0;
        breaks.push(cutoff);
        doublings += 1;
    }

    let f = |w: f64| weight.eval(w) * sd.density(w);
    let body = quadrature::integrate(f, &breaks, 0.25 * rel_tol * scale, 0.0, MAX_SEGMENTS);
    if !body.converged {
        return Err(Error::ToleranceNotMet(format!(
            "quadrature error estimate {:.3e} above target {:.3e}",
            body.abs_error,
            0.25 * rel_tol * scale
        )));
    }
    Ok(2.0 * body.value)
}

fn check_rel_tol(rel_tol: f64) -> Result<()> {
    if !(1e-12..=1e-3).contains(&rel_tol) {
        return Err(Error::InvalidInput(format!("rel_tol must lie in [1e-12, 1e-3], got {rel_tol}")));
    }
    Ok(())
}

/// `∫_R rho(w) dw`, which equals `lambda²/alpha` exactly.
pub fn integrate_rho(sd: &SpectralDensity, rel_tol: f64) -> Result<f64> {
    spectral_integral(sd, SpectralWeight::One, rel_tol)
}

/// Stationary autocovariance `r(tau) = 2 ∫_0^inf cos(tau w) rho(w) dw`.
pub fn autocovariance(sd: &SpectralDensity, tau: f64, rel_tol: f64) -> Result<f64> {
    ensure_finite("tau", tau)?;
    if tau < 0.0 {
        return Err(Error::InvalidInput(format!("lag must be >= 0, got {tau}")));
    }
    if tau == 0.0 {
        return integrate_rho(sd, rel_tol);
    }
    spectral_integral(sd, SpectralWeight::Cos(tau), rel_tol)
}

/// `E|u_k(t + h) - u_k(t)|² = 2 ∫_R (1 - cos(h w)) rho(w) dw`.
pub fn increment_second_moment(sd: &SpectralDensity, h: f64, rel_tol: f64) -> Result<f64> {
    ensure_finite("h", h)?;
    if h <= 0.0 {
        return Err(Error::InvalidInput(format!("increment lag must be > 0, got {h}")));
    }
    spectral_integral(sd, SpectralWeight::Increment(h), rel_tol)
}

/// `∫_R |w|^p rho(w) dw` for `0 <= p < 1`.
pub fn power_moment(sd: &SpectralDensity, p: f64, rel_tol: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidInput(format!("moment power must lie in [0, 1), got {p}")));
    }
    spectral_integral(sd, SpectralWeight::Power(p), rel_tol)
}

/// Right-hand side of `E|u(t+h)-u(t)|² <= (2/a) 2 h^a ∫ |w|^a rho`, obtained from
/// `1 - cos(x) <= (2/a)|x|^a`.
pub fn increment_power_bound(sd: &SpectralDensity, h: f64, a: f64, rel_tol: f64) -> Result<f64> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::InvalidInput(format!("exponent must lie in (0, 1), got {a}")));
    }
    Ok(2.0 * (2.0 / a) * h.powf(a) * power_moment(sd, a, rel_tol)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sd(weights: &[(f64, f64)], alpha: f64, lambda: f64) -> SpectralDensity {
        SpectralDensity::new(
            KernelMeasure::new(weights.iter().copied()).unwrap(),
            Mode::bare(alpha, lambda).unwrap(),
        )
    }

    #[test]
    fn rho_examples() {
        let s = sd(&[(1.0, 1.0)], 2.0, 1.0);
        assert!((rho(&s, 0.0).unwrap() - 0.25 / PI).abs() < 1e-16);
        let s = sd(&[(1.0, 1.0)], 100.0, 1.0);
        let w = 99f64.sqrt();
        let simplified = |w: f64| (1.0 + w * w) / (PI * (1e4 + w * w * (w * w + 1.0 - 100.0).powi(2)));
        assert!((rho(&s, w).unwrap() - 1.0 / (100.0 * PI)).abs() < 1e-15);
        for &w in &[0.0, 0.5, 3.0, 9.9, 10.0, 250.0] {
            let r = rho(&s, w).unwrap();
            assert!((r - simplified(w)).abs() <= 1e-14 * r.max(1e-300));
        }
        assert!(rho(&s, f64::NAN).is_err());
    }

    #[test]
    fn rho_is_even_and_nonnegative() {
        let s = sd(&[(0.5, 1.0), (0.5, 2.0)], 7.0, 2.0);
        for i in 0..400 {
            let w = -50.0 + 0.25 * i as f64;
            let r = rho(&s, w).unwrap();
            assert!(r >= 0.0);
            assert_eq!(r, rho(&s, -w).unwrap());
        }
    }

    #[test]
    fn variance_identity_examples() {
        let s = sd(&[(1.0, 1.0)], 100.0, 1.0);
        let v = integrate_rho(&s, 1e-8).unwrap();
        assert!((v - 0.01).abs() <= 1e-10, "{v}");
        let rel = 1e-8;
        let s = sd(&[(0.5, 1.0), (0.5, 2.0)], 7.0, 2.0);
        let v = integrate_rho(&s, rel).unwrap();
        assert!((v - 4.0 / 7.0).abs() <= rel * 4.0 / 7.0, "{v}");
        let s = sd(&[(1.0, 1.0)], 3.0, 0.0);
        assert_eq!(integrate_rho(&s, 1e-8).unwrap(), 0.0);
    }

    #[test]
    fn rel_tol_domain_is_enforced() {
        let s = sd(&[(1.0, 1.0)], 3.0, 1.0);
        assert!(integrate_rho(&s, 1e-2).is_err());
        assert!(integrate_rho(&s, 1e-13).is_err());
    }

    #[test]
    fn tail_bound_dominates_the_numerical_tail() {
        let s = sd(&[(0.5, 1.0), (0.5, 2.0)], 50.0, 1.0);
        for &cut in &[40.0, 100.0, 1000.0] {
            let tail = quadrature::integrate(|w| s.density(w), &[cut, 10.0 * cut, 1e3 * cut, 1e6 * cut], 0.0, 1e-12, 10_000);
            assert!(2.0 * tail.value <= tail_bound(&s, SpectralWeight::One, cut));
        }
    }

    #[test]
    fn autocovariance_at_zero_is_the_variance_and_bounds_other_lags() {
        let s = sd(&[(1.0, 1.0)], 100.0, 1.0);
        let r0 = autocovariance(&s, 0.0, 1e-8).unwrap();
        assert!((r0 - 0.01).abs() < 1e-10);
        for &tau in &[0.05, 0.3, 1.0, 4.0] {
            assert!(autocovariance(&s, tau, 1e-8).unwrap().abs() <= r0);
        }
        assert!(autocovariance(&s, -1.0, 1e-8).is_err());
    }

    #[test]
    fn increment_moment_routes_agree() {
        let s = sd(&[(1.0, 1.0)], 100.0, 1.0);
        let h = 0.1;
        let direct = increment_second_moment(&s, h, 1e-11).unwrap();
        let via_cov = 2.0 * (autocovariance(&s, 0.0, 1e-11).unwrap() - autocovariance(&s, h, 1e-11).unwrap());
        assert!((direct - via_cov).abs() <= 1e-8 * direct, "{direct} vs {via_cov}");
    }

    #[test]
    fn increment_moment_shrinks_with_lag_and_is_bounded() {
        let s = sd(&[(1.0, 1.0)], 100.0, 1.0);
        let rel = 1e-8;
        let big = increment_second_moment(&s, 10.0, rel).unwrap();
        assert!(big <= 0.02 + 2.0 * rel);
        // Monotone once h is below the oscillation period of the resonant mode.
        for (s, first) in [(s.clone(), 4), (sd(&[(1.0, 1.0)], 2.0, 1.0), 0)] {
            let mut prev = f64::INFINITY;
            for j in first..first + 12 {
                let h = 0.5f64.powi(j);
                let v = increment_second_moment(&s, h, rel).unwrap();
                assert!(v < prev && v >= 0.0, "h={h}");
                prev = v;
            }
            assert!(prev < 1e-5);
        }
        assert!(increment_second_moment(&s, 0.0, rel).is_err());
    }

    #[test]
    fn elementary_cosine_bound_holds() {
        let s = sd(&[(0.5, 1.0), (0.5, 2.0)], 30.0, 1.0);
        for &h in &[0.01, 0.1, 1.0] {
            let inc = increment_second_moment(&s, h, 1e-8).unwrap();
            let bound = increment_power_bound(&s, h, 0.5, 1e-8).unwrap();
            assert!(inc <= bound, "h={h}: {inc} > {bound}");
        }
    }
}
