#![allow(dead_code)]

use glefield_core::cm_kernel::{discretize, KernelFamily, KernelMeasure};
use glefield_core::spectral::{Mode, SpectralDensity};

/// Kernels exercised throughout: `e^{-t}`, `(e^{-t} + e^{-2t})/2` and `(1 + t)^{-1}`.
pub fn corpus() -> Vec<(&'static str, KernelMeasure)> {
    vec![
        ("exp", KernelMeasure::exponential(1.0, 1.0).unwrap()),
        ("two_exp", KernelMeasure::new([(0.5, 1.0), (0.5, 2.0)]).unwrap()),
        ("power_law", discretize(&KernelFamily::power_law(1.0)).unwrap()),
    ]
}

pub fn density(kernel: &KernelMeasure, alpha: f64, lambda: f64) -> SpectralDensity {
    SpectralDensity::new(kernel.clone(), Mode::bare(alpha, lambda).unwrap())
}

pub fn geometric_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let ratio = (hi / lo).ln() / (points - 1) as f64;
    (0..points).map(|j| lo * (ratio * j as f64).exp()).collect()
}
