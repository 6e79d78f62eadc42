//! Run configuration: a TOML file with the sections below. Every key is
//! optional; absent keys take the reference defaults.
//!
//! ```toml
//! base_seed = 0
//!
//! [model]      # a, sigma, m, d
//! [grid]       # half_length, points
//! [noise]      # xi
//! [schedule]   # dt, t_end, observe_stride
//! [analysis]   # ell, k_min, k_max (0 = N/8), smooth_window (0 = 64 N/4096),
//!              # prominence, median_window
//! [experiment] # n, init, inits, a_grid, k_grid, sigmas, iterations, t_max,
//!              # runs, samples, perturbation, boundary, snapshots
//! ```
//!
//! Loading never stops at the first problem: unknown keys, type mismatches
//! and constraint violations are collected and reported together.

use std::fmt;
use std::path::Path;

use busse_core::experiments::{InitSpec, Settings, DEFAULT_PERTURBATION};
use busse_core::integrator::{StepSchedule, DEFAULT_DT, DEFAULT_OBSERVE_STRIDE};
use busse_core::model::{DEFAULT_D, DEFAULT_HALF_LENGTH, DEFAULT_M, DEFAULT_POINTS};
use busse_core::noise::DEFAULT_CORRELATION_LENGTH;
use busse_core::{AnalysisConfig, Error, Grid1D, ModelParams};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub a: f64,
    pub sigma: f64,
    pub m: f64,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub half_length: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub xi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub dt: f64,
    pub t_end: f64,
    pub observe_stride: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    pub ell: f64,
    pub k_min: usize,
    /// 0 selects `N / 8`.
    pub k_max: usize,
    /// 0 selects the resolution-scaled default.
    pub smooth_window: usize,
    pub prominence: f64,
    pub median_window: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    /// Pulse number of the pattern used by `pattern`, `exit-sigma` and `gap-fill`.
    pub n: usize,
    /// Initial condition of `simulate`.
    pub init: String,
    /// Initial conditions compared by `stationary`.
    pub inits: Vec<String>,
    pub a_grid: Vec<f64>,
    pub k_grid: Vec<usize>,
    pub sigmas: Vec<f64>,
    pub iterations: usize,
    pub t_max: f64,
    /// Runs per rainfall value of `from-uniform`.
    pub runs: usize,
    /// Increments drawn by `validate-noise`.
    pub samples: usize,
    pub perturbation: f64,
    /// Optional Busse-balloon boundary CSV (`a,k_low,k_high`); empty for none.
    pub boundary: String,
    /// Write binary snapshots at every observation of `simulate`.
    pub snapshots: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub base_seed: u64,
    pub model: ModelSection,
    pub grid: GridSection,
    pub noise: NoiseSection,
    pub schedule: ScheduleSection,
    pub analysis: AnalysisSection,
    pub experiment: ExperimentSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        let defaults = AnalysisConfig::default();
        Self {
            base_seed: 0,
            model: ModelSection {
                a: 2.0,
                sigma: 0.0,
                m: DEFAULT_M,
                d: DEFAULT_D,
            },
            grid: GridSection {
                half_length: DEFAULT_HALF_LENGTH,
                points: DEFAULT_POINTS,
            },
            noise: NoiseSection {
                xi: DEFAULT_CORRELATION_LENGTH,
            },
            schedule: ScheduleSection {
                dt: DEFAULT_DT,
                t_end: 500.0,
                observe_stride: DEFAULT_OBSERVE_STRIDE,
            },
            analysis: AnalysisSection {
                ell: defaults.ell,
                k_min: defaults.k_min,
                k_max: 0,
                smooth_window: 0,
                prominence: defaults.prominence,
                median_window: defaults.median_window,
            },
            experiment: ExperimentSection {
                n: 30,
                init: "pattern:30".into(),
                inits: vec!["pattern:19".into(), "homogeneous".into()],
                a_grid: vec![2.0],
                k_grid: vec![30],
                sigmas: vec![0.2],
                iterations: 25,
                t_max: 500.0,
                runs: 20,
                samples: 100_000,
                perturbation: DEFAULT_PERTURBATION,
                boundary: String::new(),
                snapshots: false,
            },
        }
    }
}

/// All problems found while loading or validating a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration ({} problem(s)):", self.0.len())?;
        for e in &self.0 {
            writeln!(f, "  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

const PRESETS: &[(&str, &str)] = &[
    (
        "full-selection",
        "[model]\nsigma = 0.0\n[schedule]\nt_end = 5000.0\n[experiment]\nruns = 200\n\
         a_grid = [1.0, 1.2, 1.4, 1.6, 1.8, 2.0, 2.2, 2.4, 2.6, 2.8, 3.0]\n",
    ),
    (
        "full-exit-map",
        "[model]\nsigma = 0.2\n[experiment]\niterations = 25\nt_max = 10000.0\n\
         a_grid = [1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5, 2.75, 3.0]\n\
         k_grid = [14, 16, 18, 20, 22, 24, 26, 28, 30, 32, 34, 36, 38, 40, 42]\n",
    ),
    (
        "full-stationary",
        "[model]\nsigma = 0.25\n[schedule]\ndt = 0.01\nobserve_stride = 50.0\n[experiment]\niterations = 100\n\
         t_max = 2500.0\ninits = [\"homogeneous\"]\na_grid = [1.5, 1.75, 2.0, 2.25, 2.5, 2.75, 3.0]\n",
    ),
    (
        "full-stationary-long",
        "[model]\nsigma = 0.25\n[schedule]\ndt = 0.01\nobserve_stride = 50.0\n[experiment]\niterations = 100\n\
         t_max = 10000.0\ninits = [\"homogeneous\"]\na_grid = [1.5, 1.75, 2.0, 2.25, 2.5, 2.75, 3.0]\n",
    ),
    (
        "desk-selection",
        "[model]\na = 2.0\nsigma = 0.0\n[schedule]\nt_end = 2000.0\n[experiment]\nruns = 20\na_grid = [2.0]\n",
    ),
    (
        "desk-gap-fill",
        "[model]\na = 1.5\nsigma = 0.0\n[schedule]\nt_end = 2000.0\nobserve_stride = 2.0\n[experiment]\nn = 30\n",
    ),
    (
        "desk-exit-map",
        "[model]\nsigma = 0.25\n[schedule]\ndt = 0.01\n[experiment]\niterations = 5\nt_max = 1000.0\n\
         a_grid = [1.0, 1.25, 1.5]\nk_grid = [16, 20, 24, 28]\n",
    ),
    (
        "desk-exit-ordering",
        "[model]\na = 2.0\nsigma = 0.2\n[experiment]\niterations = 25\nt_max = 500.0\n\
         a_grid = [2.0]\nk_grid = [23, 30, 31, 38]\n",
    ),
    (
        "desk-exit-sigma",
        "[model]\na = 2.0\n[schedule]\ndt = 0.01\n[experiment]\nn = 30\niterations = 25\nt_max = 3000.0\n\
         sigmas = [0.2, 0.25, 0.3, 0.35]\n",
    ),
    (
        "desk-stationary",
        "[model]\na = 1.5\nsigma = 0.25\n[schedule]\ndt = 0.01\nobserve_stride = 50.0\n[experiment]\n\
         iterations = 10\nt_max = 2500.0\na_grid = [1.5]\ninits = [\"pattern:19\", \"homogeneous\"]\n",
    ),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(name, _)| *name)
}

/// Resolve `desk` to the desk-scale preset of `command`.
pub fn preset_text(name: &str, command: &str) -> Option<&'static str> {
    let name = if name == "desk" {
        match command {
            "exit-map" => "desk-exit-map",
            "exit-sigma" => "desk-exit-sigma",
            "stationary" => "desk-stationary",
            "from-uniform" => "desk-selection",
            "gap-fill" => "desk-gap-fill",
            _ => return None,
        }
    } else {
        name
    };
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

impl RunConfig {
    /// Overlay the keys of a TOML document on `self`, then validate.
    pub fn merge_str(&self, text: &str) -> Result<Self, ConfigErrors> {
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigErrors(vec![format!("parse error: {}", e.message())]))?;
        self.merge_table(&table)
    }

    pub fn merge_table(&self, overlay: &Table) -> Result<Self, ConfigErrors> {
        let base = match Value::try_from(self) {
            Ok(Value::Table(t)) => t,
            _ => unreachable!("RunConfig serialises to a table"),
        };
        let mut errors = Vec::new();
        let mut merged = base.clone();
        for (key, value) in overlay {
            match (base.get(key), value) {
                (None, _) => errors.push(format!("unknown key `{key}`")),
                (Some(Value::Table(section)), Value::Table(fields)) => {
                    for (field, v) in fields {
                        if !section.contains_key(field) {
                            errors.push(format!("unknown key `{key}.{field}`"));
                            continue;
                        }
                        // check each value on its own so that every mismatch is reported
                        let mut probe = base.clone();
                        probe[key.as_str()]
                            .as_table_mut()
                            .expect("section")
                            .insert(field.clone(), v.clone());
                        if let Err(e) = RunConfig::deserialize(Value::Table(probe)) {
                            errors.push(format!("`{key}.{field}`: {}", e.message()));
                            continue;
                        }
                        merged[key.as_str()]
                            .as_table_mut()
                            .expect("section")
                            .insert(field.clone(), v.clone());
                    }
                }
                (Some(Value::Table(_)), _) => errors.push(format!("`{key}` must be a section")),
                (Some(_), v) => {
                    let mut probe = base.clone();
                    probe.insert(key.clone(), v.clone());
                    match RunConfig::deserialize(Value::Table(probe)) {
                        Ok(_) => {
                            merged.insert(key.clone(), v.clone());
                        }
                        Err(e) => errors.push(format!("`{key}`: {}", e.message())),
                    }
                }
            }
        }
        if !errors.is_empty() {
            return Err(ConfigErrors(errors));
        }
        let cfg =
            RunConfig::deserialize(Value::Table(merged)).map_err(|e| ConfigErrors(vec![e.message().to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(&self, path: &Path) -> Result<Self, ConfigErrors> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigErrors(vec![format!("cannot read {}: {e}", path.display())]))?;
        self.merge_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("RunConfig serialises")
    }

    pub fn grid(&self) -> Result<Grid1D, Error> {
        Grid1D::new(self.grid.half_length, self.grid.points)
    }

    pub fn analysis_config(&self, grid: &Grid1D) -> AnalysisConfig {
        let defaults = AnalysisConfig::for_grid(grid);
        let a = &self.analysis;
        AnalysisConfig {
            ell: a.ell,
            k_min: a.k_min,
            k_max: if a.k_max == 0 { defaults.k_max } else { a.k_max },
            smooth_window: if a.smooth_window == 0 {
                defaults.smooth_window
            } else {
                a.smooth_window
            },
            prominence: a.prominence,
            median_window: a.median_window,
        }
    }

    pub fn params(&self) -> Result<ModelParams, Error> {
        let m = &self.model;
        ModelParams::new(m.a, m.m, m.d, m.sigma)
    }

    pub fn schedule(&self) -> Result<StepSchedule, Error> {
        let s = &self.schedule;
        StepSchedule::new(s.dt, s.t_end, s.observe_stride)
    }

    pub fn settings(&self) -> Result<Settings, Error> {
        let grid = self.grid()?;
        let settings = Settings {
            m: self.model.m,
            d: self.model.d,
            grid,
            xi: self.noise.xi,
            dt: self.schedule.dt,
            observe_stride: self.schedule.observe_stride,
            analysis: self.analysis_config(&grid),
            base_seed: self.base_seed,
            perturbation: self.experiment.perturbation,
        };
        settings.validate()?;
        Ok(settings)
    }

    pub fn init(&self) -> Result<InitSpec, Error> {
        self.experiment.init.parse()
    }

    pub fn inits(&self) -> Result<Vec<InitSpec>, Error> {
        self.experiment.inits.iter().map(|s| s.parse()).collect()
    }

    /// Check every constraint, reporting all violations.
    pub fn validate(&self) -> Result<(), ConfigErrors> {
        let mut errors = Vec::new();
        let m = &self.model;
        push(
            &mut errors,
            "model",
            ModelParams::new(m.a, m.m, m.d, m.sigma).map(|_| ()),
        );
        push(&mut errors, "noise", positive("xi", self.noise.xi));
        push(&mut errors, "schedule", self.schedule().map(|_| ()));
        match self.grid() {
            Err(e) => push(&mut errors, "grid", Err(e)),
            Ok(grid) => {
                // each field against defaults for the others, then their combination
                let defaults = AnalysisConfig::for_grid(&grid);
                let full = self.analysis_config(&grid);
                let variants = [
                    AnalysisConfig {
                        ell: full.ell,
                        ..defaults
                    },
                    AnalysisConfig {
                        k_min: full.k_min,
                        ..defaults
                    },
                    AnalysisConfig {
                        k_max: full.k_max,
                        ..defaults
                    },
                    AnalysisConfig {
                        smooth_window: full.smooth_window,
                        ..defaults
                    },
                    AnalysisConfig {
                        prominence: full.prominence,
                        ..defaults
                    },
                    AnalysisConfig {
                        median_window: full.median_window,
                        ..defaults
                    },
                ];
                let before = errors.len();
                for v in &variants {
                    push(&mut errors, "analysis", v.validate(&grid));
                }
                if errors.len() == before {
                    push(&mut errors, "analysis", full.validate(&grid));
                }
            }
        }
        let e = &self.experiment;
        push(&mut errors, "experiment", e.init.parse::<InitSpec>().map(|_| ()));
        for s in &e.inits {
            let r = s.parse::<InitSpec>().map(|_| ()).map_err(|_| inits_error(s));
            push(&mut errors, "experiment", r);
        }
        push(&mut errors, "experiment", at_least("n", e.n, 1));
        push(&mut errors, "experiment", at_least("iterations", e.iterations, 1));
        push(&mut errors, "experiment", at_least("runs", e.runs, 1));
        push(&mut errors, "experiment", at_least("samples", e.samples, 2));
        push(&mut errors, "experiment", positive("t_max", e.t_max));
        if !(e.perturbation.is_finite() && e.perturbation >= 0.0) {
            errors.push(format!("experiment.perturbation: must be >= 0, got {}", e.perturbation));
        }
        if e.a_grid.is_empty() || e.a_grid.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            errors.push("experiment.a_grid: must be a non-empty list of positive numbers".into());
        }
        if e.k_grid.is_empty() || e.k_grid.contains(&0) {
            errors.push("experiment.k_grid: must be a non-empty list of positive integers".into());
        }
        if e.sigmas.is_empty() || e.sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            errors.push("experiment.sigmas: must be a non-empty list of numbers >= 0".into());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigErrors(errors))
        }
    }
}

fn push(errors: &mut Vec<String>, section: &str, r: Result<(), Error>) {
    if let Err(e) = r {
        errors.push(describe(section, &e));
    }
}

fn inits_error(s: &str) -> Error {
    Error::InvalidParameter {
        field: "inits",
        reason: format!("expected `homogeneous` or `pattern:<n>`, got `{s}`"),
    }
}

fn positive(field: &'static str, x: f64) -> Result<(), Error> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            field,
            reason: format!("must be > 0, got {x}"),
        })
    }
}

fn at_least(field: &'static str, x: usize, min: usize) -> Result<(), Error> {
    if x >= min {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            field,
            reason: format!("must be >= {min}, got {x}"),
        })
    }
}

fn describe(section: &str, e: &Error) -> String {
    match e {
        Error::InvalidParameter { field, reason } => {
            // core names the grid fields by their symbols
            let key = match (section, *field) {
                ("grid", "N") => "points",
                ("grid", "L") => "half_length",
                (_, f) => f,
            };
            format!("{section}.{key}: {reason}")
        }
        other => format!("{section}: {other}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_reference_defaults() {
        let cfg = RunConfig::default().merge_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!((cfg.model.d, cfg.model.m), (500.0, 0.45));
        assert_eq!(cfg.grid.half_length, 250.0);
        assert_eq!(cfg.analysis.ell, 50.0);
    }

    #[test]
    fn echoed_config_round_trips() {
        let cfg = RunConfig::default()
            .merge_str("base_seed = 7\n[model]\nsigma = 0.25\na = 1.55\n[experiment]\nsigmas = [0.1, 0.3]\n")
            .unwrap();
        let back = RunConfig::default().merge_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn all_problems_are_reported_together() {
        let text = "colour = 1\n[model]\nsigma = -0.1\nrain = 2\n[grid]\npoints = \"many\"\n\
                    [analysis]\nmedian_window = 4\nprominence = 0\n";
        let err = RunConfig::default().merge_str(text).unwrap_err();
        let all = err.0.join("\n");
        assert!(all.contains("unknown key `colour`"), "{all}");
        assert!(all.contains("unknown key `model.rain`"), "{all}");
        assert!(all.contains("`grid.points`"), "{all}");
        // type errors stop before constraint checks
        let err = RunConfig::default()
            .merge_str("[model]\nsigma = -0.1\n[analysis]\nmedian_window = 4\nprominence = 0\n")
            .unwrap_err();
        let all = err.0.join("\n");
        assert!(all.contains("model.sigma"), "{all}");
        assert!(all.contains("analysis.median_window"), "{all}");
        assert!(all.contains("analysis.prominence"), "{all}");
    }

    #[test]
    fn every_preset_is_valid() {
        for name in preset_names() {
            RunConfig::default()
                .merge_str(preset_text(name, "").unwrap())
                .unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert_eq!(preset_text("desk", "exit-map"), preset_text("desk-exit-map", ""));
        assert!(preset_text("desk", "pattern").is_none());
        assert!(preset_text("nope", "exit-map").is_none());
    }

    #[test]
    fn zero_selects_scaled_analysis_defaults() {
        let cfg = RunConfig::default().merge_str("[grid]\npoints = 1024\n").unwrap();
        let grid = cfg.grid().unwrap();
        let a = cfg.analysis_config(&grid);
        assert_eq!((a.k_max, a.smooth_window), (128, 16));
    }
}
