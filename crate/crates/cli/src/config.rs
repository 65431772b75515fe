//! TOML run configuration. Every section is optional; unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use biym_core::flow::FlowConfig;
use biym_core::{ConformalMetric, Density, LatticeSpec};
use serde::Deserialize;

use crate::{CliError, Result};

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub lattice: LatticeSection,
    pub fiber: FiberSection,
    pub density: DensitySection,
    pub metric: MetricSection,
    pub flow: FlowSection,
    pub seeds: SeedSection,
    pub spectrum: SpectrumSection,
    pub verify: VerifySection,
    pub output: OutputSection,
    /// Directory that relative paths inside the file resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeSection {
    pub n: usize,
    /// Per-axis extents; when absent every axis has length `size`.
    pub extents: Option<Vec<usize>>,
    pub size: usize,
    pub h: f64,
}

impl Default for LatticeSection {
    fn default() -> Self {
        Self {
            n: 3,
            extents: None,
            size: 4,
            h: 1.0,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FiberSection {
    pub m: usize,
}

impl Default for FiberSection {
    fn default() -> Self {
        Self { m: 3 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DensitySection {
    /// `born-infeld`, `yang-mills`, `power` or `power-el`.
    pub name: String,
    pub p: Option<f64>,
}

impl Default for DensitySection {
    fn default() -> Self {
        Self {
            name: "born-infeld".into(),
            p: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", tag = "kind")]
pub enum MetricSection {
    Uniform,
    /// CSV file with header `site,factor`, one row per site.
    Conformal { file: PathBuf },
}

impl Default for MetricSection {
    fn default() -> Self {
        MetricSection::Uniform
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum StartKind {
    /// Independent random edges.
    Random,
    /// `amplitude · δψ` for a random 2-form `ψ`.
    Coexact,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSection {
    pub residual_tol: f64,
    pub max_iters: usize,
    pub initial_step: f64,
    pub armijo: f64,
    pub backtrack: f64,
    pub amplitude: f64,
    pub start: StartKind,
}

impl Default for FlowSection {
    fn default() -> Self {
        let d = FlowConfig::default();
        Self {
            residual_tol: d.residual_tol,
            max_iters: d.max_iters,
            initial_step: d.initial_step,
            armijo: d.armijo,
            backtrack: d.backtrack,
            amplitude: d.amplitude,
            start: StartKind::Coexact,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeedSection {
    pub flow: u64,
    pub verify: u64,
    pub spectrum: u64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    pub k: usize,
    pub tau: Option<f64>,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self { k: 16, tau: None }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub trials: usize,
    /// Dimension used by the conformal identities.
    pub conformal_n: usize,
    /// Per-identity tolerance overrides.
    pub tolerances: BTreeMap<String, f64>,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            trials: 3,
            conformal_n: 5,
            tolerances: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => config_err(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.lattice_spec()?;
        self.density()?;
        self.flow_config()?.validate()?;
        if !(2..=4).contains(&self.fiber.m) {
            return Err(config_err(format!("fiber.m must be in 2..=4, got {}", self.fiber.m)));
        }
        if self.spectrum.k == 0 {
            return Err(config_err("spectrum.k must be positive"));
        }
        if let Some(tau) = self.spectrum.tau {
            if !(tau > 0.0) {
                return Err(config_err(format!("spectrum.tau must be > 0, got {tau}")));
            }
        }
        if self.verify.trials == 0 {
            return Err(config_err("verify.trials must be positive"));
        }
        for (name, tol) in &self.verify.tolerances {
            if !crate::verify::IDENTITIES.contains(&name.as_str()) {
                return Err(config_err(format!("verify.tolerances: unknown identity {name:?}")));
            }
            if !(*tol > 0.0) {
                return Err(config_err(format!("verify.tolerances.{name} must be > 0")));
            }
        }
        Ok(())
    }

    pub fn lattice_spec(&self) -> Result<LatticeSpec> {
        let l = &self.lattice;
        let extents = match &l.extents {
            Some(e) => {
                if e.len() != l.n {
                    return Err(config_err(format!("lattice.extents has {} entries but n = {}", e.len(), l.n)));
                }
                e.clone()
            }
            None => vec![l.size; l.n],
        };
        LatticeSpec::new(extents, l.h).map_err(|e| config_err(e.to_string()))
    }

    pub fn density(&self) -> Result<Density> {
        let d = &self.density;
        let need_p = || d.p.ok_or_else(|| config_err(format!("density {:?} needs p", d.name)));
        let density = match d.name.as_str() {
            "power" => Density::Power { p: need_p()? },
            "power-el" => Density::PowerEl { p: need_p()? },
            other => {
                if d.p.is_some() {
                    return Err(config_err(format!("density {other:?} takes no p")));
                }
                other.parse().map_err(|e: biym_core::Error| config_err(e.to_string()))?
            }
        };
        if let Density::Power { p } | Density::PowerEl { p } = density {
            if !(p.is_finite() && p > 0.0) {
                return Err(config_err(format!("density.p must be a positive number, got {p}")));
            }
        }
        Ok(density)
    }

    pub fn flow_config(&self) -> Result<FlowConfig> {
        let f = &self.flow;
        let cfg = FlowConfig {
            residual_tol: f.residual_tol,
            max_iters: f.max_iters,
            initial_step: f.initial_step,
            armijo: f.armijo,
            backtrack: f.backtrack,
            seed: self.seeds.flow,
            amplitude: f.amplitude,
        };
        cfg.validate().map_err(|e| config_err(e.to_string()))?;
        Ok(cfg)
    }

    pub fn metric(&self, lattice: Arc<LatticeSpec>) -> Result<ConformalMetric> {
        match &self.metric {
            MetricSection::Uniform => Ok(ConformalMetric::uniform(lattice)),
            MetricSection::Conformal { file } => {
                let path = self.base_dir.join(file);
                let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
                let factors = parse_factor_csv(&text, lattice.num_sites())
                    .map_err(|msg| config_err(format!("{}: {msg}", path.display())))?;
                ConformalMetric::from_factors(lattice, factors).map_err(|e| config_err(e.to_string()))
            }
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.base_dir.join(&self.output.dir)
    }

    /// Replaces every seed.
    pub fn override_seed(&mut self, seed: u64) {
        self.seeds = SeedSection {
            flow: seed,
            verify: seed,
            spectrum: seed,
        };
    }
}

fn parse_factor_csv(text: &str, sites: usize) -> std::result::Result<Vec<f64>, String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == "site,factor" => {}
        _ => return Err("expected header `site,factor`".into()),
    }
    let mut out = vec![f64::NAN; sites];
    for (row, line) in lines.enumerate() {
        let (s, v) = line.split_once(',').ok_or_else(|| format!("row {}: expected two columns", row + 2))?;
        let site: usize = s.trim().parse().map_err(|_| format!("row {}: bad site index", row + 2))?;
        let value: f64 = v.trim().parse().map_err(|_| format!("row {}: bad factor", row + 2))?;
        if site >= sites {
            return Err(format!("row {}: site {site} out of range", row + 2));
        }
        out[site] = value;
    }
    if let Some(missing) = out.iter().position(|v| v.is_nan()) {
        return Err(format!("no factor for site {missing}"));
    }
    Ok(out)
}
