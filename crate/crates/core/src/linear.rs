//! Linear stability of the vegetated homogeneous state: dispersion relation,
//! most unstable mode and the Turing point.
//!
//! Wave numbers here are continuous angular wave numbers (perturbations
//! `exp(i k x)`). Use [`pulses_for_angular`] to convert to the integer
//! "number of wavelengths on the domain" convention.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{homogeneous_states, ModelParams};

/// Reaction Jacobian `A` at the vegetated state plus diffusion coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linearization {
    pub jacobian: [[f64; 2]; 2],
    /// Water diffusion.
    pub d1: f64,
    /// Biomass diffusion.
    pub d2: f64,
    /// `d1 A22 + d2 A11`
    pub gamma: f64,
}

impl Linearization {
    /// Linearise about the lower vegetated state. Fails when `a < 2m`.
    pub fn at(params: &ModelParams) -> Result<Self> {
        let state = homogeneous_states(params).lower.ok_or(Error::NoUnstableMode)?;
        let (u, v) = (state.u, state.v);
        let jacobian = [[-1.0 - v * v, -2.0 * u * v], [v * v, -params.m + 2.0 * u * v]];
        Ok(Self::from_jacobian(jacobian, params.d, 1.0))
    }

    pub fn from_jacobian(jacobian: [[f64; 2]; 2], d1: f64, d2: f64) -> Self {
        Self {
            jacobian,
            d1,
            d2,
            gamma: d1 * jacobian[1][1] + d2 * jacobian[0][0],
        }
    }

    pub fn trace(&self) -> f64 {
        self.jacobian[0][0] + self.jacobian[1][1]
    }

    pub fn det(&self) -> f64 {
        let a = &self.jacobian;
        a[0][0] * a[1][1] - a[0][1] * a[1][0]
    }

    /// Coefficients `(b, c)` of `lambda^2 + b lambda + c = 0` at wave number `k`.
    pub fn characteristic(&self, k: f64) -> (f64, f64) {
        let k2 = k * k;
        let b = (self.d1 + self.d2) * k2 - self.trace();
        let c = self.d1 * self.d2 * k2 * k2 - self.gamma * k2 + self.det();
        (b, c)
    }
}

/// Both growth rates at wave number `k`, ordered by descending real part.
pub fn dispersion_eigenvalues(k: f64, lin: &Linearization) -> [Complex64; 2] {
    let (b, c) = lin.characteristic(k);
    let disc = b * b - 4.0 * c;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        // cancellation-free pair
        let q = -0.5 * (b + b.signum() * sq);
        let (r1, r2) = if q == 0.0 { (0.0, -b) } else { (q, c / q) };
        let (hi, lo) = if r1 >= r2 { (r1, r2) } else { (r2, r1) };
        [Complex64::new(hi, 0.0), Complex64::new(lo, 0.0)]
    } else {
        let re = -0.5 * b;
        let im = 0.5 * (-disc).sqrt();
        [Complex64::new(re, im), Complex64::new(re, -im)]
    }
}

/// Real part of the leading growth rate at `k`.
pub fn leading_growth_rate(k: f64, lin: &Linearization) -> f64 {
    dispersion_eigenvalues(k, lin)[0].re
}

/// The most unstable wave number and its (real) growth rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MostUnstableMode {
    pub k: f64,
    pub growth_rate: f64,
}

/// Stationary point of the leading growth rate.
///
/// Imposing `d lambda / dk = 0` with `lambda` real gives
/// `lambda = (Gamma - 2 d1 d2 k^2) / (d1 + d2)`; substituting back into the
/// characteristic polynomial leaves a quadratic in `s = k^2`. Among its
/// positive roots the one whose `lambda` is the leading eigenvalue with the
/// largest value is returned.
pub fn most_unstable_mode(lin: &Linearization) -> Option<MostUnstableMode> {
    let (d1, d2) = (lin.d1, lin.d2);
    let sum = d1 + d2;
    let prod = d1 * d2;
    let (tr, det, gamma) = (lin.trace(), lin.det(), lin.gamma);

    let c2 = prod * (4.0 * prod - sum * sum);
    let c1 = 2.0 * prod * tr * sum - 4.0 * prod * gamma;
    let c0 = gamma * gamma - sum * tr * gamma + sum * sum * det;

    let rate_at = |s: f64| (gamma - 2.0 * prod * s) / sum;
    let mut best: Option<MostUnstableMode> = None;
    for s in real_quadratic_roots(c2, c1, c0) {
        if s.is_nan() || s <= 0.0 {
            continue;
        }
        let k = s.sqrt();
        let rate = rate_at(s);
        let leading = leading_growth_rate(k, lin);
        // reject spurious roots where the formula picks the trailing eigenvalue
        if (leading - rate).abs() > 1e-8 * (1.0 + rate.abs()) {
            continue;
        }
        if best.is_none_or(|b| rate > b.growth_rate) {
            best = Some(MostUnstableMode { k, growth_rate: rate });
        }
    }
    best
}

fn real_quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        return if b == 0.0 { vec![] } else { vec![-c / b] };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return vec![0.0];
    }
    vec![q / a, c / q]
}

/// Rainfall and critical wave number at which the vegetated state destabilises.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuringPoint {
    pub a: f64,
    pub k: f64,
}

/// Growth rate of the most unstable mode as a function of rainfall.
pub fn most_unstable_rate(params: &ModelParams, a: f64) -> Option<f64> {
    let lin = Linearization::at(&params.with_a(a)).ok()?;
    most_unstable_mode(&lin).map(|m| m.growth_rate)
}

/// Locate `a_T` by bisection on `a -> lambda_mu(a)` inside `bracket`.
pub fn turing_point(params: &ModelParams, bracket: (f64, f64)) -> Result<TuringPoint> {
    let (mut lo, mut hi) = bracket;
    let f_lo = most_unstable_rate(params, lo);
    let f_hi = most_unstable_rate(params, hi);
    let (Some(mut flo), Some(fhi)) = (f_lo, f_hi) else {
        return Err(Error::NoSignChange {
            a_lo: lo,
            a_hi: hi,
            rate_lo: f_lo,
            rate_hi: f_hi,
        });
    };
    if flo.signum() == fhi.signum() || flo == 0.0 && fhi == 0.0 {
        return Err(Error::NoSignChange {
            a_lo: lo,
            a_hi: hi,
            rate_lo: f_lo,
            rate_hi: f_hi,
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let Some(fm) = most_unstable_rate(params, mid) else {
            // branch lost inside the bracket: shrink from the side that has no root
            hi = mid;
            continue;
        };
        if fm == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    let a = 0.5 * (lo + hi);
    let lin = Linearization::at(&params.with_a(a))?;
    let mode = most_unstable_mode(&lin).ok_or(Error::NoUnstableMode)?;
    Ok(TuringPoint { a, k: mode.k })
}

/// Integer wave number (wavelengths on `[-L, L]`) of an angular wave number.
pub fn pulses_for_angular(k: f64, half_length: f64) -> f64 {
    k * half_length / std::f64::consts::PI
}
