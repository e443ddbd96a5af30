//! Completely monotone memory kernels with a finite representing measure.
//!
//! A kernel in this class is the Laplace transform of a finite positive
//! measure `mu` on `(0, inf)`:
//!
//! ```text
//! K(t) = ∫ e^{-t x} mu(dx),        K(0) = mu((0, inf)) < inf
//! ```
//!
//! Only atomic measures are represented. Continuous representing densities
//! (such as the one behind `(1 + t)^{-a}`) are discretized by Gauss quadrature
//! first, after which every transform below is an exact finite sum.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Default quadrature size for discretizing power-law kernels.
pub const DEFAULT_POWER_LAW_NODES: usize = 64;

/// One point mass `weight * delta_{rate}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub weight: f64,
    pub rate: f64,
}

/// Finite positive atomic measure in canonical form: strictly increasing
/// rates, positive weights, no atom at zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelMeasure {
    atoms: Vec<Atom>,
    total_mass: f64,
}

impl KernelMeasure {
    /// Builds a canonical measure from `(weight, rate)` pairs. Duplicate rates
    /// are merged by summing their weights.
    pub fn new<I>(atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut atoms: Vec<Atom> = atoms
            .into_iter()
            .map(|(weight, rate)| Atom { weight, rate })
            .collect();
        if atoms.is_empty() {
            return Err(Error::InvalidInput("kernel measure needs at least one atom".into()));
        }
        for a in &atoms {
            if !(a.weight.is_finite() && a.weight > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "atom weight must be positive and finite, got {}",
                    a.weight
                )));
            }
            if !(a.rate.is_finite() && a.rate > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "atom rate must be positive and finite, got {}",
                    a.rate
                )));
            }
        }
        atoms.sort_by(|a, b| a.rate.total_cmp(&b.rate));
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            match merged.last_mut() {
                Some(last) if last.rate == a.rate => last.weight += a.weight,
                _ => merged.push(a),
            }
        }
        let total_mass = merged.iter().map(|a| a.weight).sum();
        Ok(Self { atoms: merged, total_mass })
    }

    /// `weight * e^{-rate t}`.
    pub fn exponential(weight: f64, rate: f64) -> Result<Self> {
        Self::new([(weight, rate)])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// `K(0)`, the total mass of the measure.
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// `K(t)` without argument checks.
    pub fn value(&self, t: f64) -> f64 {
        self.atoms.iter().map(|a| a.weight * (-t * a.rate).exp()).sum()
    }

    /// Cosine transform `∫_0^inf K(t) cos(t w) dt = Σ w_i x_i / (x_i² + w²)`.
    pub fn cos_transform(&self, omega: f64) -> f64 {
        let w2 = omega * omega;
        self.atoms
            .iter()
            .map(|a| a.weight * a.rate / (a.rate * a.rate + w2))
            .sum()
    }

    /// Sine transform `∫_0^inf K(t) sin(t w) dt = Σ w_i w / (x_i² + w²)`.
    pub fn sin_transform(&self, omega: f64) -> f64 {
        omega * self.sin_over_omega(omega)
    }

    /// `K_sin(w) / w = Σ w_i / (x_i² + w²)`, continuous at `w = 0`.
    pub fn sin_over_omega(&self, omega: f64) -> f64 {
        let w2 = omega * omega;
        self.atoms
            .iter()
            .map(|a| a.weight / (a.rate * a.rate + w2))
            .sum()
    }

    /// Both transforms in one pass.
    pub fn transforms(&self, omega: f64) -> (f64, f64) {
        let w2 = omega * omega;
        let mut kc = 0.0;
        let mut ks_over = 0.0;
        for a in &self.atoms {
            let d = a.weight / (a.rate * a.rate + w2);
            kc += d * a.rate;
            ks_over += d;
        }
        (kc, ks_over * omega)
    }

    /// `Σ w_i x_i`; bounds `w² K_cos(w)` from above.
    pub fn first_moment(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight * a.rate).sum()
    }

    /// `Σ w_i x_i²`; bounds `w² (K(0) - w K_sin(w))` from above.
    pub fn second_moment(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight * a.rate * a.rate).sum()
    }

    /// `Σ w_i / x_i²`, the limit of `K_sin(w)/w` as `w -> 0`.
    pub fn inverse_square_moment(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight / (a.rate * a.rate)).sum()
    }
}

/// Kernel `K(t) = Σ w_i e^{-t x_i}` evaluated at `t >= 0`.
pub fn eval_kernel(m: &KernelMeasure, t: f64) -> Result<f64> {
    ensure_finite("t", t)?;
    if t < 0.0 {
        return Err(Error::InvalidInput(format!("kernel argument must be >= 0, got {t}")));
    }
    Ok(m.value(t))
}

pub fn k_cos(m: &KernelMeasure, omega: f64) -> Result<f64> {
    ensure_finite("omega", omega)?;
    Ok(m.cos_transform(omega))
}

pub fn k_sin(m: &KernelMeasure, omega: f64) -> Result<f64> {
    ensure_finite("omega", omega)?;
    Ok(m.sin_transform(omega))
}

/// Parametric kernel families accepted from configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelFamily {
    ExponentialSum(KernelMeasure),
    /// `K(t) = (1 + t)^{-exponent}`, representing density
    /// `x^{exponent-1} e^{-x} / Gamma(exponent)`.
    PowerLaw { exponent: f64, nodes: usize },
}

impl KernelFamily {
    pub fn power_law(exponent: f64) -> Self {
        KernelFamily::PowerLaw { exponent, nodes: DEFAULT_POWER_LAW_NODES }
    }
}

/// Reduces a family to an atomic measure.
pub fn discretize(family: &KernelFamily) -> Result<KernelMeasure> {
    match family {
        KernelFamily::ExponentialSum(m) => Ok(m.clone()),
        &KernelFamily::PowerLaw { exponent, nodes } => {
            if !(exponent.is_finite() && exponent > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "power-law exponent must be > 0, got {exponent}"
                )));
            }
            if nodes < 8 {
                return Err(Error::InvalidInput(format!(
                    "power-law discretization needs at least 8 nodes, got {nodes}"
                )));
            }
            let rule = gauss_laguerre(nodes, exponent - 1.0)?;
            KernelMeasure::new(
                rule.into_iter()
                    .filter(|&(_, w)| w > 0.0)
                    .map(|(x, w)| (w, x)),
            )
        }
    }
}

/// Nodes and weights `(x_i, w_i)` of the `n`-point Gauss rule for the
/// probability measure `x^beta e^{-x} / Gamma(beta + 1)` on `(0, inf)`.
///
/// Golub-Welsch eigenvalues, polished by Newton on the orthonormal
/// three-term recurrence; weights from the Christoffel function.
pub(crate) fn gauss_laguerre(n: usize, beta: f64) -> Result<Vec<(f64, f64)>> {
    if !(beta > -1.0) {
        return Err(Error::InvalidInput(format!("Laguerre parameter must exceed -1, got {beta}")));
    }
    let diag = |j: usize| 2.0 * j as f64 + beta + 1.0;
    let off = |j: usize| (j as f64 * (j as f64 + beta)).sqrt();

    let mut jacobi = nalgebra::DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        jacobi[(j, j)] = diag(j);
        if j + 1 < n {
            jacobi[(j, j + 1)] = off(j + 1);
            jacobi[(j + 1, j)] = off(j + 1);
        }
    }
    let mut nodes: Vec<f64> = nalgebra::SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);

    // p_n(x) and p_n'(x) alongside Σ_{j<n} p_j(x)², orthonormal normalization.
    let recur = |x: f64| -> (f64, f64, f64) {
        let (mut p_prev, mut p) = (0.0, 1.0);
        let (mut d_prev, mut d) = (0.0, 0.0);
        let mut sum_sq = 0.0;
        for j in 0..n {
            sum_sq += p * p;
            let b_next = off(j + 1);
            let b_cur = if j == 0 { 0.0 } else { off(j) };
            let p_next = ((x - diag(j)) * p - b_cur * p_prev) / b_next;
            let d_next = (p + (x - diag(j)) * d - b_cur * d_prev) / b_next;
            p_prev = p;
            p = p_next;
            d_prev = d;
            d = d_next;
        }
        (p, d, sum_sq)
    };

    let mut rule = Vec::with_capacity(n);
    for x0 in nodes {
        let mut x = x0;
        for _ in 0..8 {
            let (p, d, _) = recur(x);
            if d == 0.0 || !d.is_finite() {
                break;
            }
            let step = p / d;
            x -= step;
            if step.abs() <= 4.0 * f64::EPSILON * x.abs() {
                break;
            }
        }
        let (_, _, sum_sq) = recur(x);
        rule.push((x, 1.0 / sum_sq));
    }
    Ok(rule)
}
