//! Spatially correlated, temporally white Q-Wiener increments on the periodic
//! grid.
//!
//! The covariance kernel is `q(x) = exp(-pi x^2 / (4 xi^2)) / (2 xi)`, sampled
//! at minimal-image distances. Its circulant covariance matrix is diagonal in
//! the discrete Fourier basis, so increments are drawn by scaling complex
//! Gaussian modes by `sqrt(eigenvalue / N)` and applying one inverse real FFT.
//!
//! Random streams come from `ChaCha8Rng` (`rand_chacha` 0.9) seeded through
//! `SeedableRng::seed_from_u64`; Gaussian variates use `rand_distr::StandardNormal`
//! (ziggurat). Streams are reproducible for a fixed build.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use realfft::{ComplexToReal, RealFftPlanner};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::Grid1D;

/// Random generator used for every stochastic component.
pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

pub const DEFAULT_CORRELATION_LENGTH: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Correlation length `xi`.
    pub xi: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn new(xi: f64, seed: u64) -> Result<Self> {
        if !(xi.is_finite() && xi > 0.0) {
            return Err(invalid("xi", format!("must be finite and > 0, got {xi}")));
        }
        Ok(Self { xi, seed })
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            xi: DEFAULT_CORRELATION_LENGTH,
            seed: 0,
        }
    }
}

/// Covariance kernel `q(x)`.
pub fn kernel(x: f64, xi: f64) -> f64 {
    (-PI * x * x / (4.0 * xi * xi)).exp() / (2.0 * xi)
}

/// Square roots of the covariance eigenvalues in the discrete Fourier basis.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpectrum {
    sqrt_eigs: Vec<f64>,
    grid: Grid1D,
    xi: f64,
    trace: f64,
    clamped_mass: f64,
}

impl NoiseSpectrum {
    pub fn sqrt_eigs(&self) -> &[f64] {
        &self.sqrt_eigs
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// Sum of the unclamped eigenvalues, `N q(0)`.
    pub fn trace(&self) -> f64 {
        self.trace
    }

    /// Total magnitude of the negative eigenvalues that were set to zero.
    pub fn clamped_mass(&self) -> f64 {
        self.clamped_mass
    }

    pub fn clamped_fraction(&self) -> f64 {
        self.clamped_mass / self.trace
    }

    /// Fails when clamping removed more than `max_fraction` of the trace.
    pub fn check_clamping(&self, max_fraction: f64) -> Result<()> {
        if self.clamped_fraction() > max_fraction {
            return Err(invalid(
                "xi",
                format!(
                    "kernel is under-resolved: clamped {:.3}% of the covariance trace",
                    100.0 * self.clamped_fraction()
                ),
            ));
        }
        Ok(())
    }
}

pub fn build_spectrum(cfg: &NoiseConfig, grid: &Grid1D) -> NoiseSpectrum {
    let n = grid.len();
    let h = grid.spacing();
    let mut buf: Vec<Complex64> = (0..n)
        .map(|j| {
            let x = grid.periodic_distance(j as f64 * h);
            Complex64::new(kernel(x, cfg.xi), 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let mut trace = 0.0;
    let mut clamped_mass = 0.0;
    let sqrt_eigs = buf
        .iter()
        .map(|c| {
            // kernel samples are even, so the spectrum is real up to rounding
            let lam = c.re;
            trace += lam;
            if lam < 0.0 {
                clamped_mass -= lam;
                0.0
            } else {
                lam.sqrt()
            }
        })
        .collect();
    NoiseSpectrum {
        sqrt_eigs,
        grid: *grid,
        xi: cfg.xi,
        trace,
        clamped_mass,
    }
}

/// Draws unit-time increments `dW` with spatial covariance `q`.
///
/// The caller scales by `sqrt(dt) sigma v`.
pub struct NoiseSampler {
    spectrum: Arc<NoiseSpectrum>,
    /// `sqrt(lambda_k / N)` for the non-negative frequencies.
    scale: Vec<f64>,
    plan: Arc<dyn ComplexToReal<f64>>,
    modes: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl NoiseSampler {
    pub fn new(spectrum: Arc<NoiseSpectrum>) -> Self {
        let n = spectrum.grid.len();
        let plan = RealFftPlanner::<f64>::new().plan_fft_inverse(n);
        let inv_n = 1.0 / n as f64;
        let scale = spectrum.sqrt_eigs[..=n / 2].iter().map(|s| s * inv_n.sqrt()).collect();
        let modes = plan.make_input_vec();
        let scratch = plan.make_scratch_vec();
        Self {
            spectrum,
            scale,
            plan,
            modes,
            scratch,
        }
    }

    pub fn spectrum(&self) -> &NoiseSpectrum {
        &self.spectrum
    }

    pub fn sample_into<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut [f64]) {
        let half = self.modes.len() - 1;
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for (k, (mode, &s)) in self.modes.iter_mut().zip(&self.scale).enumerate() {
            *mode = if k == 0 || k == half {
                Complex64::new(s * rng.sample::<f64, _>(StandardNormal), 0.0)
            } else {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(s * r * re, s * r * im)
            };
        }
        self.plan
            .process_with_scratch(&mut self.modes, out, &mut self.scratch)
            .expect("buffer sizes match the plan");
    }
}

/// Convenience wrapper returning a freshly allocated increment.
pub fn sample_increment<R: Rng + ?Sized>(spectrum: &Arc<NoiseSpectrum>, rng: &mut R) -> Vec<f64> {
    let mut sampler = NoiseSampler::new(Arc::clone(spectrum));
    let mut out = vec![0.0; spectrum.grid.len()];
    sampler.sample_into(rng, &mut out);
    out
}

/// Empirical statistics of a run of consecutive increments.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDiagnostics {
    pub samples: usize,
    /// `(lag in grid points, empirical covariance, kernel value q(lag h))`.
    pub covariance: Vec<(usize, f64, f64)>,
    /// Correlation of successive increments at the same grid point.
    pub lag1_autocorrelation: f64,
}

impl NoiseDiagnostics {
    pub fn variance(&self) -> f64 {
        self.covariance[0].1
    }
}

/// Draw `samples` consecutive increments from `seed` and estimate the
/// spatial covariance for lags `0..=max_lag` (averaged over all positions)
/// and the lag-one temporal autocorrelation.
pub fn noise_diagnostics(
    spectrum: &Arc<NoiseSpectrum>,
    samples: usize,
    max_lag: usize,
    seed: u64,
) -> Result<NoiseDiagnostics> {
    let n = spectrum.grid.len();
    if samples < 2 {
        return Err(invalid("samples", "need at least 2 samples"));
    }
    if max_lag >= n {
        return Err(invalid("max_lag", format!("must be < N = {n}")));
    }
    let mut sampler = NoiseSampler::new(Arc::clone(spectrum));
    let mut rng = rng_from_seed(seed);
    let mut prev = vec![0.0; n];
    let mut cur = vec![0.0; n];
    let mut lag_sums = vec![0.0; max_lag + 1];
    let (mut cross, mut sq_prev, mut sq_cur) = (0.0, 0.0, 0.0);
    for s in 0..samples {
        sampler.sample_into(&mut rng, &mut cur);
        for (lag, acc) in lag_sums.iter_mut().enumerate() {
            let mut sum = 0.0;
            for i in 0..n {
                sum += cur[i] * cur[(i + lag) % n];
            }
            *acc += sum;
        }
        if s > 0 {
            for (p, c) in prev.iter().zip(&cur) {
                cross += p * c;
                sq_prev += p * p;
                sq_cur += c * c;
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let norm = 1.0 / (samples * n) as f64;
    let h = spectrum.grid.spacing();
    let covariance = lag_sums
        .iter()
        .enumerate()
        .map(|(lag, sum)| (lag, sum * norm, kernel(lag as f64 * h, spectrum.xi)))
        .collect();
    Ok(NoiseDiagnostics {
        samples,
        covariance,
        lag1_autocorrelation: cross / (sq_prev * sq_cur).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagnostics_on_small_grid() {
        let grid = Grid1D::new(5.0, 128).unwrap();
        let spec = Arc::new(build_spectrum(&NoiseConfig::new(0.5, 0).unwrap(), &grid));
        let d = noise_diagnostics(&spec, 4000, 4, 3).unwrap();
        assert_eq!(d.covariance.len(), 5);
        for &(_, emp, exact) in &d.covariance {
            assert!((emp - exact).abs() < 0.05, "{emp} vs {exact}");
        }
        assert!(d.lag1_autocorrelation.abs() < 0.02);
        assert!(noise_diagnostics(&spec, 1, 4, 3).is_err());
        assert!(noise_diagnostics(&spec, 10, 128, 3).is_err());
    }

    #[test]
    fn trace_identity() {
        let grid = Grid1D::default();
        let spec = build_spectrum(&NoiseConfig::default(), &grid);
        let mean_eig = spec.trace() / grid.len() as f64;
        assert!((mean_eig - 5.0).abs() / 5.0 < 1e-6, "{mean_eig}");
        assert!(spec.sqrt_eigs().iter().all(|&s| s >= 0.0));
        assert!(spec.clamped_fraction() < 0.01);
        spec.check_clamping(0.01).unwrap();
    }

    #[test]
    fn hermitian_pairing() {
        let grid = Grid1D::new(10.0, 64).unwrap();
        let spec = build_spectrum(&NoiseConfig::new(0.7, 0).unwrap(), &grid);
        let s = spec.sqrt_eigs();
        for j in 1..64 {
            assert!((s[j] - s[64 - j]).abs() < 1e-12);
        }
    }

    #[test]
    fn long_correlation_concentrates_on_mean_mode() {
        let grid = Grid1D::new(250.0, 1024).unwrap();
        let spec = build_spectrum(&NoiseConfig::new(500.0, 0).unwrap(), &grid);
        let eigs: Vec<f64> = spec.sqrt_eigs().iter().map(|s| s * s).collect();
        let total: f64 = eigs.iter().sum();
        assert!(eigs[0] / total > 0.8, "{}", eigs[0] / total);
    }

    #[test]
    fn same_seed_same_stream() {
        let grid = Grid1D::new(50.0, 256).unwrap();
        let spec = Arc::new(build_spectrum(&NoiseConfig::default(), &grid));
        let a = sample_increment(&spec, &mut rng_from_seed(9));
        let b = sample_increment(&spec, &mut rng_from_seed(9));
        let c = sample_increment(&spec, &mut rng_from_seed(10));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_correlation_length() {
        assert!(NoiseConfig::new(0.0, 1).is_err());
        assert!(NoiseConfig::new(f64::INFINITY, 1).is_err());
    }
}
