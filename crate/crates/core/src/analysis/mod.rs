//! Classification of snapshots: predominant and local wave numbers, pulse
//! counting, temporal median filtering and first-exit detection.

mod exit;
mod pulses;
mod spectral;

pub use exit::{detect_exit_time, median_filter_series, ExitDetector, ExitTime};
pub use pulses::{count_pulses, PulseCounter};
pub use spectral::{
    local_wavenumber_field, local_wavenumber_histogram, predominant_wavenumber, LocalWaveNumbers, WaveNumberHistogram,
};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{Grid1D, DEFAULT_POINTS};

/// Window width of the local Fourier transform at the reference resolution.
pub const DEFAULT_ELL: f64 = 50.0;
/// Gaussian smoothing width (grid points) at the reference resolution of 4096 points.
pub const DEFAULT_SMOOTH_WINDOW: usize = 64;
pub const DEFAULT_PROMINENCE: f64 = 0.3;
pub const DEFAULT_MEDIAN_WINDOW: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    /// Width `ell` of the Gaussian window `exp(-(x - x0)^2 / ell^2)`.
    pub ell: f64,
    /// Smallest integer wave number searched (never 0).
    pub k_min: usize,
    pub k_max: usize,
    /// Gaussian smoothing width in grid points.
    pub smooth_window: usize,
    /// Minimal prominence of a counted extremum.
    pub prominence: f64,
    /// Length (in observations) of the temporal median filter; odd.
    pub median_window: usize,
}

impl AnalysisConfig {
    /// Defaults scaled to `grid`: wave numbers `1..=N/8`, smoothing width
    /// `64 N / 4096` points.
    pub fn for_grid(grid: &Grid1D) -> Self {
        let n = grid.len();
        Self {
            ell: DEFAULT_ELL,
            k_min: 1,
            k_max: n / 8,
            smooth_window: (DEFAULT_SMOOTH_WINDOW * n / DEFAULT_POINTS).max(1),
            prominence: DEFAULT_PROMINENCE,
            median_window: DEFAULT_MEDIAN_WINDOW,
        }
    }

    pub fn validate(&self, grid: &Grid1D) -> Result<()> {
        if !(self.ell.is_finite() && self.ell > 0.0) {
            return Err(invalid("ell", format!("must be > 0, got {}", self.ell)));
        }
        if self.k_min == 0 {
            return Err(invalid("k_min", "wave number 0 cannot be searched"));
        }
        if self.k_max < self.k_min || self.k_max > grid.len() / 2 {
            return Err(invalid(
                "k_max",
                format!(
                    "must lie in [k_min, N/2] = [{}, {}], got {}",
                    self.k_min,
                    grid.len() / 2,
                    self.k_max
                ),
            ));
        }
        if self.smooth_window == 0 {
            return Err(invalid("smooth_window", "must be >= 1"));
        }
        if !(self.prominence.is_finite() && self.prominence > 0.0) {
            return Err(invalid("prominence", format!("must be > 0, got {}", self.prominence)));
        }
        if self.median_window.is_multiple_of(2) {
            return Err(invalid(
                "median_window",
                format!("must be odd, got {}", self.median_window),
            ));
        }
        Ok(())
    }
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self::for_grid(&Grid1D::default())
    }
}
