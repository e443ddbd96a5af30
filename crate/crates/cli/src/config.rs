//! Run configuration: TOML-style `[section]` / `key = value` files.
//!
//! Bare words on the right-hand side (`kernel = expsum`) are accepted as
//! strings. Every key has a default; unknown keys are errors.

use std::path::Path;

use glefield_core::cm_kernel::{discretize, KernelFamily, KernelMeasure};
use glefield_core::field::{EigenBasis, ModeDynamics, NoiseWeights};
use glefield_core::sampler::TimeGrid;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub kernel: KernelSection,
    pub basis: BasisSection,
    pub weights: WeightsSection,
    pub assumption: AssumptionSection,
    pub sampler: SamplerSection,
    pub field: FieldSection,
    pub regularity: RegularitySection,
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Expsum,
    Powerlaw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    #[serde(rename = "type", alias = "kernel")]
    pub kind: KernelKind,
    /// `[weight, rate]` pairs.
    pub atoms: Vec<[f64; 2]>,
    pub exponent: f64,
    pub nodes: usize,
}

impl Default for KernelSection {
    fn default() -> Self {
        KernelSection { kind: KernelKind::Expsum, atoms: vec![[1.0, 1.0]], exponent: 1.0, nodes: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    Dirichlet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisSection {
    #[serde(rename = "type")]
    pub kind: BasisKind,
    #[serde(rename = "L", alias = "length")]
    pub length: f64,
}

impl Default for BasisSection {
    fn default() -> Self {
        BasisSection { kind: BasisKind::Dirichlet, length: std::f64::consts::PI }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightRule {
    Flat,
    Power,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsSection {
    pub rule: WeightRule,
    pub lambda: f64,
    pub s: f64,
    pub values: Vec<f64>,
}

impl Default for WeightsSection {
    fn default() -> Self {
        WeightsSection { rule: WeightRule::Flat, lambda: 1.0, s: 0.0, values: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssumptionSection {
    pub eta: f64,
}

impl Default for AssumptionSection {
    fn default() -> Self {
        AssumptionSection { eta: 0.6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// circulant embedding
    Ce,
    /// spectral synthesis
    Ss,
    /// Ornstein-Uhlenbeck (classical heat equation)
    Ou,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub dt: f64,
    pub n: usize,
    pub ensemble: usize,
    pub seed: u64,
    pub method: Method,
    /// Frequency nodes for spectral synthesis.
    pub nodes: usize,
}

impl Default for SamplerSection {
    fn default() -> Self {
        SamplerSection { dt: 1.0 / 64.0, n: 1024, ensemble: 8, seed: 0, method: Method::Ce, nodes: 4096 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldSection {
    #[serde(rename = "N", alias = "modes")]
    pub modes: usize,
    /// Interior grid points `x_i = i L / (nx + 1)`.
    pub nx: usize,
    pub tail_budget: f64,
    pub n_probe: usize,
}

impl Default for FieldSection {
    fn default() -> Self {
        FieldSection { modes: 64, nx: 32, tail_budget: 0.05, n_probe: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegularitySection {
    /// `dyadic`, `truncation` or a comma separated list of lags.
    pub lags: String,
    pub bootstrap: usize,
}

impl Default for RegularitySection {
    fn default() -> Self {
        RegularitySection { lags: "dyadic".into(), bootstrap: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative accuracy of spectral quadrature.
    pub rel_tol: f64,
    /// Resonance window exponent.
    pub q: f64,
    /// Largest accepted relative error in `verify`.
    pub verify: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rel_tol: 1e-9, q: 0.5, verify: 1e-6 }
    }
}

/// Quotes bare-word values so the text parses as TOML. Line numbers are preserved.
fn quote_bare_words(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 16);
    for line in text.lines() {
        let rewritten = line.split_once('=').and_then(|(key, rest)| {
            let (value, comment) = match rest.find('#') {
                Some(i) => rest.split_at(i),
                None => (rest, ""),
            };
            let v = value.trim();
            let bare = v.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
                && v.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
                && !matches!(v, "true" | "false" | "inf" | "nan");
            bare.then(|| format!("{key}= \"{v}\" {comment}"))
        });
        out.push_str(rewritten.as_deref().unwrap_or(line));
        out.push('\n');
    }
    out
}

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        toml::from_str(&quote_bare_words(text)).map_err(|e| CliError::Usage(format!("{origin}: {e}")))
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", p.display())))?;
                RunConfig::parse(&text, &p.display().to_string())
            }
        }
    }

    pub fn kernel(&self) -> Result<KernelMeasure, CliError> {
        let k = &self.kernel;
        let measure = match k.kind {
            KernelKind::Expsum => KernelMeasure::new(k.atoms.iter().map(|&[w, x]| (w, x))),
            KernelKind::Powerlaw => discretize(&KernelFamily::PowerLaw { exponent: k.exponent, nodes: k.nodes }),
        };
        measure.map_err(|e| CliError::Usage(format!("[kernel]: {e}")))
    }

    pub fn basis(&self) -> Result<EigenBasis, CliError> {
        match self.basis.kind {
            BasisKind::Dirichlet => EigenBasis::dirichlet(self.basis.length),
        }
        .map_err(|e| CliError::Usage(format!("[basis]: {e}")))
    }

    pub fn weights(&self) -> Result<NoiseWeights, CliError> {
        let w = &self.weights;
        let weights = match w.rule {
            WeightRule::Flat => NoiseWeights::Flat { lambda: w.lambda },
            WeightRule::Power => NoiseWeights::PowerDecay { s: w.s },
            WeightRule::Explicit => NoiseWeights::Explicit { values: w.values.clone() },
        };
        weights.validate().map_err(|e| CliError::Usage(format!("[weights]: {e}")))?;
        Ok(weights)
    }

    pub fn grid(&self) -> Result<TimeGrid, CliError> {
        TimeGrid::new(0.0, self.sampler.dt, self.sampler.n).map_err(|e| CliError::Usage(format!("[sampler]: {e}")))
    }

    pub fn dynamics(&self) -> Result<ModeDynamics, CliError> {
        Ok(match self.sampler.method {
            Method::Ce => ModeDynamics::Gle(self.kernel()?),
            Method::Ss => ModeDynamics::GleSpectral(self.kernel()?, self.sampler.nodes),
            Method::Ou => ModeDynamics::Heat,
        })
    }
}
