//! Pulse counting: Gaussian smoothing followed by prominence-filtered
//! extremum counting on the periodic signal.

use super::AnalysisConfig;
use crate::error::Result;
use crate::model::Grid1D;

/// Reusable Gaussian smoother and extremum counter.
///
/// The smoothing kernel spans `smooth_window` points with standard deviation
/// `smooth_window / 5`, wrapped periodically.
#[derive(Debug, Clone)]
pub struct PulseCounter {
    weights: Vec<f64>,
    half: usize,
    prominence: f64,
    smoothed: Vec<f64>,
    unrolled: Vec<f64>,
}

impl PulseCounter {
    pub fn new(grid: &Grid1D, cfg: &AnalysisConfig) -> Result<Self> {
        cfg.validate(grid)?;
        let half = (cfg.smooth_window / 2).min(grid.len() / 2 - 1);
        let sd = cfg.smooth_window as f64 / 5.0;
        let mut weights: Vec<f64> = (0..=2 * half)
            .map(|i| {
                let d = i as f64 - half as f64;
                (-0.5 * d * d / (sd * sd)).exp()
            })
            .collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self {
            weights,
            half,
            prominence: cfg.prominence,
            smoothed: vec![0.0; grid.len()],
            unrolled: Vec::with_capacity(grid.len() + 1),
        })
    }

    pub fn smooth<'a>(&'a mut self, v: &[f64]) -> &'a [f64] {
        let n = v.len();
        self.smoothed.resize(n, 0.0);
        let half = self.half as isize;
        for (i, out) in self.smoothed.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, w) in self.weights.iter().enumerate() {
                let idx = (i as isize + j as isize - half).rem_euclid(n as isize) as usize;
                acc += w * v[idx];
            }
            *out = acc;
        }
        &self.smoothed
    }

    /// `max(#maxima, #minima)` of the smoothed biomass with prominence at least
    /// the configured threshold.
    pub fn count(&mut self, v: &[f64]) -> usize {
        if v.is_empty() {
            return 0;
        }
        self.smooth(v);
        let maxima = count_prominent_maxima(&self.smoothed, self.prominence, &mut self.unrolled, 1.0);
        let minima = count_prominent_maxima(&self.smoothed, self.prominence, &mut self.unrolled, -1.0);
        maxima.max(minima)
    }
}

pub fn count_pulses(v: &[f64], grid: &Grid1D, cfg: &AnalysisConfig) -> Result<usize> {
    Ok(PulseCounter::new(grid, cfg)?.count(v))
}

/// Count maxima of `sign * signal` on a periodic domain whose prominence is at
/// least `threshold`. The signal is rotated so that its global minimum sits at
/// both ends of the unrolled copy; every peak then has well-defined bases.
fn count_prominent_maxima(signal: &[f64], threshold: f64, unrolled: &mut Vec<f64>, sign: f64) -> usize {
    let n = signal.len();
    let (argmin, _) =
        signal.iter().map(|x| sign * x).enumerate().fold(
            (0, f64::INFINITY),
            |(bi, bv), (i, x)| if x < bv { (i, x) } else { (bi, bv) },
        );
    unrolled.clear();
    unrolled.extend((0..=n).map(|i| sign * signal[(argmin + i) % n]));
    let x = unrolled.as_slice();

    let mut count = 0;
    let mut i = 1;
    let last = x.len() - 1;
    while i < last {
        if x[i - 1] < x[i] {
            // walk across a plateau
            let mut ahead = i + 1;
            while ahead < last && x[ahead] == x[i] {
                ahead += 1;
            }
            if x[ahead] < x[i] {
                let peak = (i + ahead - 1) / 2;
                if prominence(x, peak) >= threshold {
                    count += 1;
                }
                i = ahead;
                continue;
            }
            i = ahead;
            continue;
        }
        i += 1;
    }
    count
}

/// Peak height above the higher of its two bases.
fn prominence(x: &[f64], peak: usize) -> f64 {
    let height = x[peak];
    let mut left_min = height;
    for &val in x[..peak].iter().rev() {
        if val > height {
            break;
        }
        left_min = left_min.min(val);
    }
    let mut right_min = height;
    for &val in &x[peak + 1..] {
        if val > height {
            break;
        }
        right_min = right_min.min(val);
    }
    height - left_min.max(right_min)
}
