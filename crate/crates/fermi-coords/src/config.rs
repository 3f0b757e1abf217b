//! Run configuration: a JSON document listing cases and shared settings.
//!
//! A case either names a catalog entry (plus its parameters) or spells out
//! the geometry with explicit expression strings. Identical configurations
//! and seeds produce byte-identical reports, so everything that feeds the
//! pipeline lives here.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::catalog::{catalog, resolve, ResolvedCase};
use crate::chart::SignatureType;
use crate::error::{Error, Result};
use crate::fermi::GeodesicSolverConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
    Both,
}

impl ReportFormat {
    pub fn wants_csv(self) -> bool {
        matches!(self, ReportFormat::Csv | ReportFormat::Both)
    }
    pub fn wants_json(self) -> bool {
        matches!(self, ReportFormat::Json | ReportFormat::Both)
    }
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "both" => Ok(ReportFormat::Both),
            other => Err(Error::config(format!("unknown report format: {other}"))),
        }
    }
}

/// One case: a catalog reference or explicit geometry.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CaseConfig {
    /// Label used in reports; must be unique within a run.
    pub name: String,
    /// Catalog entry to expand, if not giving explicit geometry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Perturbation size; marks the case as a member of a smooth family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// ((p,q),(p',q')): tangential and normal signature pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sig: Option<((usize, usize), (usize, usize))>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<Vec<String>>,
    /// Row-major n x n metric entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<Vec<f64>>,
}

impl CaseConfig {
    pub fn catalog_ref(name: &str) -> CaseConfig {
        CaseConfig {
            name: name.to_string(),
            case: Some(name.to_string()),
            ..CaseConfig::default()
        }
    }

    pub fn is_family(&self) -> bool {
        self.eps.is_some()
    }

    /// Expand to explicit expressions. For family cases `eps_override`
    /// replaces the configured size (used when sweeping a family).
    pub fn resolve_with(&self, eps_override: Option<f64>) -> Result<ResolvedCase> {
        let eps = eps_override.or(self.eps);
        if let Some(key) = &self.case {
            let mut r = resolve(key, self.kappa, self.seed, eps)?;
            r.name = self.name.clone();
            return Ok(r);
        }
        let sig = self
            .sig
            .ok_or_else(|| Error::config(format!("case {}: explicit geometry needs sig", self.name)))?;
        let sig = SignatureType::new(sig.0, sig.1);
        let need = |field: &'static str| {
            Error::config(format!("case {}: explicit geometry needs {field}", self.name))
        };
        Ok(ResolvedCase {
            name: self.name.clone(),
            sig,
            coords: self.coords.clone().ok_or_else(|| need("coords"))?,
            params: self.params.clone().ok_or_else(|| need("params"))?,
            metric: self.metric.clone().ok_or_else(|| need("metric"))?,
            embedding: self.embedding.clone().ok_or_else(|| need("embedding"))?,
            base: self.base.clone().ok_or_else(|| need("base"))?,
        })
    }

    pub fn resolved(&self) -> Result<ResolvedCase> {
        self.resolve_with(None)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    /// Jet order of the measured expansion, in [2, 5].
    #[serde(default = "default_order")]
    pub order: usize,
    /// Absolute tolerance on condition residuals.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Base seed; per-case seeds offset from it when not set explicitly.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub solver: GeodesicSolverConfig,
    /// Perturbation sizes for family sweeps, descending, each half the
    /// previous so slopes can be Richardson-corrected.
    #[serde(default = "default_eps_list")]
    pub eps_list: Vec<f64>,
    #[serde(default = "default_radius")]
    pub chart_radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default = "default_format")]
    pub format: ReportFormat,
    #[serde(default = "default_true")]
    pub parallel: bool,
    pub cases: Vec<CaseConfig>,
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}
fn default_order() -> usize {
    4
}
fn default_tol() -> f64 {
    1e-8
}
fn default_eps_list() -> Vec<f64> {
    vec![1e-2, 5e-3, 2.5e-3]
}
fn default_radius() -> f64 {
    0.5
}
fn default_format() -> ReportFormat {
    ReportFormat::Both
}
fn default_true() -> bool {
    true
}

impl RunConfig {
    /// The whole catalog with default parameters: one case per entry,
    /// kappa variants for the quadratic graph, three perturbation seeds.
    pub fn default_catalog() -> RunConfig {
        let mut cases = Vec::new();
        for entry in catalog() {
            match entry.name {
                "graph-quadratic" => {
                    for kappa in [0.5, 1.0, 2.0] {
                        let mut c = CaseConfig::catalog_ref(entry.name);
                        c.name = format!("graph-quadratic-k{kappa}");
                        c.kappa = Some(kappa);
                        cases.push(c);
                    }
                }
                "eps-perturbed-flat" => {
                    for seed in 0..3u64 {
                        let mut c = CaseConfig::catalog_ref(entry.name);
                        c.name = format!("eps-perturbed-flat-s{seed}");
                        c.seed = Some(seed);
                        c.eps = Some(1e-2);
                        cases.push(c);
                    }
                }
                name => {
                    let mut c = CaseConfig::catalog_ref(name);
                    if entry.family {
                        c.eps = Some(1e-2);
                        c.seed = Some(0);
                    }
                    cases.push(c);
                }
            }
        }
        RunConfig {
            schema_version: SCHEMA_VERSION,
            order: default_order(),
            tol: default_tol(),
            seed: 0,
            solver: GeodesicSolverConfig::default(),
            eps_list: default_eps_list(),
            chart_radius: default_radius(),
            out_dir: None,
            format: default_format(),
            parallel: true,
            cases,
        }
    }

    pub fn from_path(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if !(2..=5).contains(&self.order) {
            return Err(Error::config(format!(
                "jet order {} outside [2, 5]",
                self.order
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::config("tolerance must be positive"));
        }
        if self.solver.steps_per_unit < 8 {
            return Err(Error::config("solver needs at least 8 steps per unit length"));
        }
        if !(self.chart_radius > 0.0) {
            return Err(Error::config("chart radius must be positive"));
        }
        if self.eps_list.is_empty() {
            return Err(Error::config("eps list must not be empty"));
        }
        for w in self.eps_list.windows(2) {
            if !(w[1] < w[0]) {
                return Err(Error::config("eps list must be strictly decreasing"));
            }
        }
        if self.eps_list.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::config("eps values must be positive"));
        }
        if self.cases.is_empty() {
            return Err(Error::config("no cases configured"));
        }
        let mut names: Vec<&str> = self.cases.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.cases.len() {
            return Err(Error::config("case names must be unique"));
        }
        for c in &self.cases {
            let r = c.resolved()?;
            let n = r.sig.n();
            let k = r.sig.k();
            if r.coords.len() != n {
                return Err(Error::config(format!(
                    "case {}: {} coordinates for ambient dimension {n}",
                    c.name,
                    r.coords.len()
                )));
            }
            if r.metric.len() != n * n {
                return Err(Error::config(format!(
                    "case {}: metric needs {} entries, got {}",
                    c.name,
                    n * n,
                    r.metric.len()
                )));
            }
            if r.embedding.len() != n {
                return Err(Error::config(format!(
                    "case {}: embedding needs {n} components, got {}",
                    c.name,
                    r.embedding.len()
                )));
            }
            if r.params.len() != k {
                return Err(Error::config(format!(
                    "case {}: {} parameters for surface dimension {k}",
                    c.name,
                    r.params.len()
                )));
            }
            if r.base.len() != k {
                return Err(Error::config(format!(
                    "case {}: base point needs {k} entries, got {}",
                    c.name,
                    r.base.len()
                )));
            }
            r.check_parses()?;
        }
        Ok(())
    }
}
