//! Global and Gaussian-windowed Fourier classification.
//!
//! The windowed transform at `x0` is
//! `F_x0[v](k) = sum_i v_i exp(-(x_i - x0)^2 / ell^2) exp(-2 pi i k i / N)`
//! (periodic distances). The window decays; a growing exponential as the
//! window would not be summable. For fixed `k` the map `x0 -> F_x0` is a
//! circular convolution of the modulated signal with the window, so every
//! grid point is handled by one inverse FFT per searched `k`.
//!
//! Before the transform the window-weighted local mean
//! `m(x0) = sum_i v_i w_i / sum_i w_i` is removed. Biomass is non-negative,
//! and without this the leakage of the mean through the window spectrum
//! outweighs the pattern mode at small `k`.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::AnalysisConfig;
use crate::error::{Error, Result};
use crate::model::Grid1D;

/// Relative margin a candidate must clear to beat the current maximum, so
/// exact and rounding-level ties resolve to the smaller wave number.
const TIE_TOLERANCE: f64 = 1e-12;

/// Integer mode in `k_min..=k_max` with the largest global Fourier magnitude.
pub fn predominant_wavenumber(v: &[f64], grid: &Grid1D, cfg: &AnalysisConfig) -> Result<usize> {
    let n = grid.len();
    if v.len() != n {
        return Err(crate::error::invalid("v", "length differs from grid"));
    }
    let mut buf: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let k_max = cfg.k_max.min(n / 2);
    let mut best_k = cfg.k_min;
    let mut best = buf[cfg.k_min].norm_sqr();
    for (k, c) in buf.iter().enumerate().take(k_max + 1).skip(cfg.k_min + 1) {
        let p = c.norm_sqr();
        if p > best * (1.0 + TIE_TOLERANCE) {
            best = p;
            best_k = k;
        }
    }
    if best == 0.0 {
        return Err(Error::NoSpectralContent);
    }
    Ok(best_k)
}

/// Precomputed plans and window spectrum for repeated local analysis.
pub struct LocalWaveNumbers {
    n: usize,
    k_min: usize,
    k_max: usize,
    /// Non-negligible window Fourier coefficients `(offset, weight / N)`.
    window: Vec<(isize, f64)>,
    /// Full window spectrum (real, even).
    window_hat: Vec<f64>,
    /// `exp(-2 pi i m / N)` for `m` in `0..N`.
    carrier: Vec<Complex64>,
    local_mean: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    spectrum: Vec<Complex64>,
    work: Vec<Complex64>,
    scratch: Vec<Complex64>,
    power: Vec<f64>,
}

impl LocalWaveNumbers {
    pub fn new(grid: &Grid1D, cfg: &AnalysisConfig) -> Result<Self> {
        cfg.validate(grid)?;
        let n = grid.len();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);

        let h = grid.spacing();
        let mut w: Vec<Complex64> = (0..n)
            .map(|i| {
                let d = grid.periodic_distance(i as f64 * h);
                Complex64::new((-(d * d) / (cfg.ell * cfg.ell)).exp(), 0.0)
            })
            .collect();
        forward.process(&mut w);
        let peak = w[0].re.abs();
        let window_hat: Vec<f64> = w.iter().map(|c| c.re).collect();
        let carrier = (0..n)
            .map(|m| Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * m as f64 / n as f64))
            .collect();
        let inv_n = 1.0 / n as f64;
        let window = w
            .iter()
            .enumerate()
            .filter(|(_, c)| c.re.abs() > 1e-15 * peak)
            .map(|(j, c)| {
                let offset = if j > n / 2 { j as isize - n as isize } else { j as isize };
                (offset, c.re * inv_n)
            })
            .collect();

        let scratch_len = inverse.get_inplace_scratch_len().max(forward.get_inplace_scratch_len());
        Ok(Self {
            n,
            k_min: cfg.k_min,
            k_max: cfg.k_max,
            window,
            window_hat,
            carrier,
            local_mean: vec![0.0; n],
            forward,
            inverse,
            spectrum: vec![Complex64::default(); n],
            work: vec![Complex64::default(); n],
            scratch: vec![Complex64::default(); scratch_len],
            power: vec![0.0; n],
        })
    }

    pub fn k_range(&self) -> (usize, usize) {
        (self.k_min, self.k_max)
    }

    /// Local wave number at every grid point.
    pub fn field(&mut self, v: &[f64]) -> Vec<usize> {
        assert_eq!(v.len(), self.n, "field length differs from grid");
        for (s, &x) in self.spectrum.iter_mut().zip(v) {
            *s = Complex64::new(x, 0.0);
        }
        self.forward.process_with_scratch(&mut self.spectrum, &mut self.scratch);

        self.convolve(0);
        let w0 = self.window_hat[0];
        for (m, c) in self.local_mean.iter_mut().zip(&self.work) {
            *m = c.re / w0;
        }
        // powers at rounding level of the signal count as exact zeros
        let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs())) * w0;
        let floor = (1e-12 * scale).powi(2);

        let mut best_k = vec![self.k_min; self.n];
        self.power.iter_mut().for_each(|p| *p = -1.0);
        for k in self.k_min..=self.k_max {
            self.convolve(k);
            let leak = self.window_hat[(self.n - k) % self.n];
            for (i0, ((c, best), bk)) in self
                .work
                .iter()
                .zip(self.power.iter_mut())
                .zip(best_k.iter_mut())
                .enumerate()
            {
                let corrected = c - self.carrier[(k * i0) % self.n] * (self.local_mean[i0] * leak);
                let mut p = corrected.norm_sqr();
                if p < floor {
                    p = 0.0;
                }
                // the -1 sentinel always loses to the first searched mode
                if p > *best * (1.0 + TIE_TOLERANCE) {
                    *best = p;
                    *bk = k;
                }
            }
        }
        best_k
    }

    /// `work[i0] = sum_i v_i w(x_i - x0) exp(-2 pi i k (i - i0) / N)`, up to a
    /// phase that does not depend on `v`.
    fn convolve(&mut self, k: usize) {
        let n = self.n as isize;
        self.work.iter_mut().for_each(|c| *c = Complex64::default());
        for &(j, w) in &self.window {
            let src = (k as isize + j).rem_euclid(n) as usize;
            let dst = j.rem_euclid(n) as usize;
            self.work[dst] = self.spectrum[src] * w;
        }
        self.inverse.process_with_scratch(&mut self.work, &mut self.scratch);
    }

    pub fn histogram(&mut self, v: &[f64]) -> WaveNumberHistogram {
        let field = self.field(v);
        WaveNumberHistogram::from_field(&field, self.k_min, self.k_max)
    }
}

pub fn local_wavenumber_field(v: &[f64], grid: &Grid1D, cfg: &AnalysisConfig) -> Result<Vec<usize>> {
    if v.len() != grid.len() {
        return Err(crate::error::invalid("v", "length differs from grid"));
    }
    Ok(LocalWaveNumbers::new(grid, cfg)?.field(v))
}

pub fn local_wavenumber_histogram(v: &[f64], grid: &Grid1D, cfg: &AnalysisConfig) -> Result<WaveNumberHistogram> {
    if v.len() != grid.len() {
        return Err(crate::error::invalid("v", "length differs from grid"));
    }
    Ok(LocalWaveNumbers::new(grid, cfg)?.histogram(v))
}

/// Normalised histogram of integer wave numbers over `k_min..=k_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveNumberHistogram {
    k_min: usize,
    frequencies: Vec<f64>,
    mean: f64,
    std: f64,
}

impl WaveNumberHistogram {
    pub fn from_field(field: &[usize], k_min: usize, k_max: usize) -> Self {
        let mut counts = vec![0usize; k_max - k_min + 1];
        for &k in field {
            counts[k - k_min] += 1;
        }
        let total = field.len().max(1) as f64;
        let frequencies = counts.iter().map(|&c| c as f64 / total).collect();
        Self::from_frequencies(k_min, frequencies)
    }

    pub fn from_frequencies(k_min: usize, frequencies: Vec<f64>) -> Self {
        let mean = frequencies
            .iter()
            .enumerate()
            .map(|(i, f)| (k_min + i) as f64 * f)
            .sum::<f64>();
        let var = frequencies
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let d = (k_min + i) as f64 - mean;
                d * d * f
            })
            .sum::<f64>();
        Self {
            k_min,
            frequencies,
            mean,
            std: var.max(0.0).sqrt(),
        }
    }

    /// Bin-wise average of histograms over the same wave-number range.
    pub fn average(hists: &[WaveNumberHistogram]) -> Option<Self> {
        let first = hists.first()?;
        let mut acc = vec![0.0; first.frequencies.len()];
        for h in hists {
            assert_eq!(h.k_min, first.k_min);
            assert_eq!(h.frequencies.len(), acc.len());
            for (a, f) in acc.iter_mut().zip(&h.frequencies) {
                *a += f;
            }
        }
        let inv = 1.0 / hists.len() as f64;
        acc.iter_mut().for_each(|a| *a *= inv);
        Some(Self::from_frequencies(first.k_min, acc))
    }

    pub fn k_min(&self) -> usize {
        self.k_min
    }

    pub fn k_max(&self) -> usize {
        self.k_min + self.frequencies.len() - 1
    }

    pub fn frequency(&self, k: usize) -> f64 {
        k.checked_sub(self.k_min)
            .and_then(|i| self.frequencies.get(i))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// `(k, frequency)` for every non-empty bin.
    pub fn nonzero(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.frequencies
            .iter()
            .enumerate()
            .filter(|(_, f)| **f > 0.0)
            .map(move |(i, f)| (self.k_min + i, *f))
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn std(&self) -> f64 {
        self.std
    }

    /// Average local wave number rounded to the nearest integer.
    pub fn rounded_mean(&self) -> i64 {
        self.mean.round() as i64
    }

    pub fn total(&self) -> f64 {
        self.frequencies.iter().sum()
    }

    /// Most populated bin (smallest `k` on ties).
    pub fn mode(&self) -> usize {
        let mut best = 0;
        for (i, f) in self.frequencies.iter().enumerate() {
            if *f > self.frequencies[best] {
                best = i;
            }
        }
        self.k_min + best
    }
}
