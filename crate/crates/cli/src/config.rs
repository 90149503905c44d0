//! Run configuration with the precedence chain flags > env > file > defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use misclose_core::closing::ClosingConfig;
use misclose_core::orbit::ClassifyOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Standard,
    Extended,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub closing: f64,
    pub landing: f64,
    pub conjugacy: f64,
    pub multiplier: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            closing: 1e-11,
            landing: 1e-9,
            conjugacy: 1e-10,
            multiplier: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Budgets {
    /// Classification preperiod budget; an explicit CLI/env override also
    /// pins the closing total iterate.
    pub preperiod: usize,
    pub period: usize,
    pub n_max_cover: usize,
    pub seed_grid: usize,
    pub seed_grid_max: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            preperiod: 200,
            period: 64,
            n_max_cover: 64,
            seed_grid: 64,
            seed_grid_max: 512,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticThresholds {
    /// Trend radii, largest first.
    pub radii: Vec<f64>,
    /// Ratio-lemma threshold at the smallest radius (artifact convention).
    pub ratio: f64,
    pub comp_prop: f64,
    /// Radius and window length for the verbatim quotient-stability bound.
    pub q_radius: f64,
    pub q_window: usize,
}

impl Default for DiagnosticThresholds {
    fn default() -> Self {
        DiagnosticThresholds {
            radii: vec![1e-4, 1e-5, 1e-6],
            ratio: 0.1,
            comp_prop: 0.05,
            q_radius: 1e-8,
            q_window: 20,
        }
    }
}

/// The resolved configuration every command runs with.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub precision: Precision,
    pub tolerances: Tolerances,
    pub budgets: Budgets,
    pub diagnostics: DiagnosticThresholds,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Set only by an explicit flag/env/file override; pins the closing
    /// total iterate.
    pub budget_preperiod_override: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            precision: Precision::Standard,
            tolerances: Tolerances::default(),
            budgets: Budgets::default(),
            diagnostics: DiagnosticThresholds::default(),
            seed: 0,
            out_dir: PathBuf::from("out"),
            budget_preperiod_override: None,
        }
    }
}

/// Flag-level overrides collected by the CLI.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub precision: Option<Precision>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub budget_preperiod: Option<usize>,
    pub tol_closing: Option<f64>,
}

impl RunConfig {
    /// Resolve the precedence chain: defaults, then the config file, then
    /// environment variables, then flags.
    pub fn resolve(file: Option<&Path>, flags: &Overrides) -> anyhow::Result<RunConfig> {
        let mut cfg = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                serde_json::from_str::<RunConfig>(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
            None => RunConfig::default(),
        };

        // Environment layer.
        if let Ok(v) = std::env::var("MISCLOSE_PRECISION") {
            cfg.precision = match v.as_str() {
                "standard" => Precision::Standard,
                "extended" => Precision::Extended,
                other => bail!("MISCLOSE_PRECISION: unknown mode {other:?}"),
            };
        }
        if let Ok(v) = std::env::var("MISCLOSE_SEED") {
            cfg.seed = v.parse().context("MISCLOSE_SEED")?;
        }
        if let Ok(v) = std::env::var("MISCLOSE_OUT") {
            cfg.out_dir = PathBuf::from(v);
        }
        if let Ok(v) = std::env::var("MISCLOSE_BUDGET_PREPERIOD") {
            let n: usize = v.parse().context("MISCLOSE_BUDGET_PREPERIOD")?;
            cfg.budgets.preperiod = n;
            cfg.budget_preperiod_override = Some(n);
        }
        if let Ok(v) = std::env::var("MISCLOSE_TOL_CLOSING") {
            cfg.tolerances.closing = v.parse().context("MISCLOSE_TOL_CLOSING")?;
        }

        // Flag layer.
        if let Some(p) = flags.precision {
            cfg.precision = p;
        }
        if let Some(s) = flags.seed {
            cfg.seed = s;
        }
        if let Some(o) = &flags.out_dir {
            cfg.out_dir = o.clone();
        }
        if let Some(b) = flags.budget_preperiod {
            cfg.budgets.preperiod = b;
            cfg.budget_preperiod_override = Some(b);
        }
        if let Some(t) = flags.tol_closing {
            cfg.tolerances.closing = t;
        }

        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let t = &self.tolerances;
        if !(t.closing > 0.0 && t.landing > 0.0 && t.conjugacy > 0.0 && t.multiplier > 0.0) {
            bail!("all tolerances must be positive");
        }
        let b = &self.budgets;
        if b.preperiod < 1 || b.period < 1 || b.n_max_cover < 1 || b.seed_grid < 1 {
            bail!("all budgets must be at least 1");
        }
        if self.diagnostics.radii.is_empty() {
            bail!("diagnostics need at least one radius");
        }
        Ok(())
    }

    pub fn classify_options(&self) -> ClassifyOptions {
        ClassifyOptions {
            preperiod_budget: self.budgets.preperiod,
            period_budget: self.budgets.period,
            landing_tol: self.tolerances.landing,
            ..ClassifyOptions::default()
        }
    }

    pub fn closing_config(&self) -> ClosingConfig {
        ClosingConfig {
            closing_tol: self.tolerances.closing,
            total_iterate_budget: self.budget_preperiod_override,
            n_max_cover: self.budgets.n_max_cover,
            seed_grid: self.budgets.seed_grid,
            seed_grid_max: self.budgets.seed_grid_max,
            verify_multiplier_tol: self.tolerances.multiplier,
            classify: self.classify_options(),
            ..ClosingConfig::default()
        }
    }
}
