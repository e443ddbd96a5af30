//! Autocovariance on a uniform lag grid through the relaxation function.
//!
//! With `G(s) = 1 / (s + alpha K^(s))`, the density is
//! `rho(w) = lambda²/(pi alpha) Re G(iw)`, so `r(tau) = (lambda²/alpha) g(|tau|)`
//! where `g` is the inverse Laplace transform of `G`:
//!
//! ```text
//! g'(t) = -alpha ∫_0^t K(t - s) g(s) ds,   g(0) = 1
//! ```
//!
//! For an atomic kernel this is the linear system `g' = -alpha Σ w_i z_i`,
//! `z_i' = g - x_i z_i`, `z_i(0) = 0`, stepped exactly with `exp(B dt)`.

use nalgebra::{DMatrix, DVector};

use super::SpectralDensity;
use crate::error::{Error, Result};

/// `r(j dt)` for `j = 0..len`.
pub fn covariance_sequence(sd: &SpectralDensity, dt: f64, len: usize) -> Result<Vec<f64>> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidInput(format!("dt must be > 0, got {dt}")));
    }
    let variance = sd.mode.variance();
    if variance == 0.0 {
        return Ok(vec![0.0; len]);
    }
    let atoms = sd.kernel.atoms();
    let dim = atoms.len() + 1;
    let mut generator = DMatrix::<f64>::zeros(dim, dim);
    for (i, a) in atoms.iter().enumerate() {
        generator[(0, i + 1)] = -sd.mode.alpha * a.weight;
        generator[(i + 1, 0)] = 1.0;
        generator[(i + 1, i + 1)] = -a.rate;
    }
    let step = (generator * dt).exp();

    let mut state = DVector::<f64>::zeros(dim);
    state[0] = 1.0;
    let mut scratch = DVector::<f64>::zeros(dim);
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(variance * state[0]);
        step.mul_to(&state, &mut scratch);
        std::mem::swap(&mut state, &mut scratch);
    }
    Ok(out)
}
