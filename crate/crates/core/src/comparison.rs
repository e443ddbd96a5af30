//! Side-by-side regularity of the memory equation and the classical heat
//! equation on the unit-noise Dirichlet interval.

use serde::Serialize;

use crate::cm_kernel::KernelMeasure;
use crate::error::Result;
use crate::field::{assemble_field_layouts, EigenBasis, FieldLayout, FieldSpec, ModeDynamics, NoiseWeights};
use crate::regularity::{
    empirical_variogram, field_variogram, fit_exponent, truncation_aware_lags, HoelderReport, IncrementAxis,
    VariogramCurve,
};
use crate::rng;
use crate::sampler::TimeGrid;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonProfile {
    pub name: String,
    pub length: f64,
    pub kernel: KernelMeasure,
    pub lambda: f64,
    pub modes: usize,
    pub dt: f64,
    pub n: usize,
    pub ensemble: usize,
    pub seed: u64,
    pub bootstrap: usize,
    /// Points at which time increments are measured.
    pub time_points: usize,
    /// Interior grid points for space increments.
    pub space_points: usize,
    /// Time decimation for the space slab.
    pub space_time_stride: usize,
    pub lag_count: usize,
    pub tail_budget: f64,
    pub oracle_rel_tol: f64,
}

impl ComparisonProfile {
    pub fn comparison_1d() -> Self {
        ComparisonProfile {
            name: "comparison_1d".into(),
            length: std::f64::consts::PI,
            kernel: KernelMeasure::exponential(1.0, 1.0).expect("unit exponential kernel"),
            lambda: 1.0,
            modes: 128,
            dt: 2f64.powi(-10),
            n: 1 << 14,
            ensemble: 64,
            seed: 20_240_601,
            bootstrap: 200,
            time_points: 8,
            space_points: 255,
            space_time_stride: 64,
            lag_count: 5,
            tail_budget: 0.01,
            oracle_rel_tol: 1e-8,
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        (name == "comparison_1d").then(Self::comparison_1d)
    }

    fn time_positions(&self) -> Vec<f64> {
        let p = self.time_points as f64;
        (0..self.time_points).map(|j| (2.0 * j as f64 + 1.0) * self.length / (2.0 * p)).collect()
    }

    fn space_grid(&self) -> Vec<f64> {
        let dx = self.length / (self.space_points + 1) as f64;
        (1..=self.space_points).map(|i| i as f64 * dx).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonCell {
    /// `gle_time`, `gle_space`, `heat_time` or `heat_space`.
    pub name: String,
    pub curve: VariogramCurve,
    pub oracle: Vec<f64>,
    pub report: HoelderReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonResult {
    pub profile: ComparisonProfile,
    pub tail_bound: f64,
    pub cells: Vec<ComparisonCell>,
}

impl ComparisonResult {
    pub fn cell(&self, name: &str) -> Option<&ComparisonCell> {
        self.cells.iter().find(|c| c.name == name)
    }

    /// `gamma(gle_time) - gamma(heat_time)`.
    pub fn time_separation(&self) -> Option<f64> {
        Some(self.cell("gle_time")?.report.gamma_hat - self.cell("heat_time")?.report.gamma_hat)
    }

    pub fn time_intervals_disjoint(&self) -> Option<bool> {
        let (g, h) = (&self.cell("gle_time")?.report, &self.cell("heat_time")?.report);
        Some(g.ci_low > h.ci_high || h.ci_low > g.ci_high)
    }
}

pub fn run_comparison(profile: &ComparisonProfile) -> Result<ComparisonResult> {
    let basis = EigenBasis::dirichlet(profile.length)?;
    let weights = NoiseWeights::Flat { lambda: profile.lambda };
    let grid = TimeGrid::new(0.0, profile.dt, profile.n)?;
    let alpha_max = basis.alpha(profile.modes)?;
    let time_positions = profile.time_positions();
    let space_grid = profile.space_grid();
    let dx = space_grid[1] - space_grid[0];
    let time_lags = truncation_aware_lags(profile.dt, alpha_max, profile.lag_count);
    let space_lags = truncation_aware_lags(dx, alpha_max, profile.lag_count);
    let layouts = [
        FieldLayout { space_points: time_positions.clone(), time_stride: 1 },
        FieldLayout { space_points: space_grid.clone(), time_stride: profile.space_time_stride },
    ];

    let mut cells = Vec::with_capacity(4);
    let mut tail_bound = 0.0;
    for (label, dynamics) in [("gle", ModeDynamics::Gle(profile.kernel.clone())), ("heat", ModeDynamics::Heat)] {
        let spec = FieldSpec {
            basis: basis.clone(),
            weights: weights.clone(),
            dynamics,
            grid,
            modes: profile.modes,
            ensemble: profile.ensemble,
            seed: profile.seed,
            tail_budget: profile.tail_budget,
            n_probe: 100,
        };
        let samples = assemble_field_layouts(&spec, &layouts)?;
        tail_bound = samples[0].tail_bound;
        let targets = [
            (IncrementAxis::Time, &samples[0], &time_positions, &time_lags),
            (IncrementAxis::Space, &samples[1], &space_grid, &space_lags),
        ];
        for (axis, sample, positions, lags) in targets {
            let name = format!("{label}_{}", if axis == IncrementAxis::Time { "time" } else { "space" });
            let curve = empirical_variogram(sample, axis, lags)?;
            let oracle = field_variogram(&spec, axis, positions, lags, profile.oracle_rel_tol)?.values;
            let bootstrap_seed = rng::derive_key(profile.seed, cells.len() as u64);
            let report = fit_exponent(&curve, profile.bootstrap, bootstrap_seed)?;
            cells.push(ComparisonCell { name, curve, oracle, report });
        }
    }
    Ok(ComparisonResult { profile: profile.clone(), tail_bound, cells })
}
