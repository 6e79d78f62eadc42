//! Ensemble experiments: first exit times, stationary local-wave-number
//! distributions, wave-number selection from the homogeneous state and the
//! deterministic gap-fill run. Every ensemble statistic is computed from
//! per-realisation records that can be written to and re-read from CSV.

mod exit;
mod gapfill;
mod io;
mod selection;
mod stationary;
mod stats;

pub use exit::{
    fit_exit_vs_a, fit_exit_vs_sigma, run_exit_ensemble, run_exit_time_map, summarize, summarize_cells,
    EnsembleSummary, ExitMap, ExitRecord, MissingCell, SigmaFit,
};
pub use gapfill::{run_gap_fill, GapFillRun};
pub use io::{
    read_exit_records, read_fits, read_histograms, write_exit_records, write_fits, write_gap_fill, write_histograms,
    write_selection, FitRow, HistogramRow,
};
pub use selection::{run_from_uniform, SelectionRecord, SelectionSummary};
pub use stationary::{run_stationary_distribution, InitSpec, StationaryRun};
pub use stats::{linear_fit, mean_std, welch_separation, Fit};

use serde::{Deserialize, Serialize};

use crate::analysis::AnalysisConfig;
use crate::error::{invalid, Result};
use crate::integrator::{StepSchedule, DEFAULT_DT, DEFAULT_OBSERVE_STRIDE};
use crate::model::{FieldState, Grid1D, ModelParams, DEFAULT_D, DEFAULT_M};
use crate::noise::{rng_from_seed, DEFAULT_CORRELATION_LENGTH};
use crate::pattern::perturb_state;

/// Standard deviation of the perturbation added to homogeneous starts.
pub const DEFAULT_PERTURBATION: f64 = 0.01;

/// Settings shared by all ensemble experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub m: f64,
    pub d: f64,
    pub grid: Grid1D,
    pub xi: f64,
    pub dt: f64,
    pub observe_stride: f64,
    pub analysis: AnalysisConfig,
    pub base_seed: u64,
    pub perturbation: f64,
}

impl Default for Settings {
    fn default() -> Self {
        let grid = Grid1D::default();
        Self {
            m: DEFAULT_M,
            d: DEFAULT_D,
            grid,
            xi: DEFAULT_CORRELATION_LENGTH,
            dt: DEFAULT_DT,
            observe_stride: DEFAULT_OBSERVE_STRIDE,
            analysis: AnalysisConfig::for_grid(&grid),
            base_seed: 0,
            perturbation: DEFAULT_PERTURBATION,
        }
    }
}

impl Settings {
    pub fn params(&self, a: f64, sigma: f64) -> Result<ModelParams> {
        ModelParams::new(a, self.m, self.d, sigma)
    }

    pub fn schedule(&self, t_end: f64) -> Result<StepSchedule> {
        StepSchedule::new(self.dt, t_end, self.observe_stride)
    }

    /// Seed of realisation `iteration`. Seeds do not depend on the cell, so
    /// different cells of one experiment see the same noise streams.
    pub fn seed(&self, iteration: usize) -> u64 {
        self.base_seed.wrapping_add(iteration as u64)
    }

    pub fn validate(&self) -> Result<()> {
        Grid1D::new(self.grid.half_length(), self.grid.len())?;
        self.params(2.0, 0.0)?;
        self.schedule(0.0)?;
        self.analysis.validate(&self.grid)?;
        if !(self.xi.is_finite() && self.xi > 0.0) {
            return Err(invalid("xi", format!("must be > 0, got {}", self.xi)));
        }
        if !(self.perturbation.is_finite() && self.perturbation >= 0.0) {
            return Err(invalid(
                "perturbation",
                format!("must be >= 0, got {}", self.perturbation),
            ));
        }
        Ok(())
    }

    /// Vegetated homogeneous state plus Gaussian noise drawn from `seed`.
    /// The perturbation stream is decorrelated from the noise stream of a
    /// run with the same seed.
    pub fn perturbed_homogeneous(&self, params: &ModelParams, seed: u64) -> Result<FieldState> {
        let veg = crate::model::homogeneous_states(params)
            .lower
            .ok_or_else(|| invalid("a", format!("no vegetated state at a = {} (need a >= 2m)", params.a)))?;
        let base = FieldState::homogeneous(&self.grid, veg.u, veg.v);
        let mut rng = rng_from_seed(seed ^ 0x9E37_79B9_7F4A_7C15);
        perturb_state(&base, self.perturbation, &mut rng)
    }
}
