//! Model definition: parameters, the periodic grid, field states, the
//! reaction terms and the spatially homogeneous steady states.
//!
//! The model is the non-dimensional Klausmeier system on `[-L, L]` with
//! periodic boundary conditions:
//!
//! ```text
//! du = [d u_xx + a - u - u v^2] dt
//! dv = [  v_xx - m v + u v^2  ] dt + sigma v dW
//! ```
//!
//! with `u` the water and `v` the biomass.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Water diffusion used throughout the reference experiments.
pub const DEFAULT_D: f64 = 500.0;
/// Average vegetation mortality used throughout the reference experiments.
pub const DEFAULT_M: f64 = 0.45;
/// Half-length of the reference domain `[-250, 250]`.
pub const DEFAULT_HALF_LENGTH: f64 = 250.0;
/// Reference grid size, `2^12`.
pub const DEFAULT_POINTS: usize = 4096;

/// Rainfall `a`, mortality `m`, water diffusion `d` and noise intensity `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub a: f64,
    pub m: f64,
    pub d: f64,
    pub sigma: f64,
}

impl ModelParams {
    pub fn new(a: f64, m: f64, d: f64, sigma: f64) -> Result<Self> {
        let p = Self { a, m, d, sigma };
        p.validate()?;
        Ok(p)
    }

    /// Reference preset (`d = 500`, `m = 0.45`) at the given rainfall and noise.
    pub fn reference(a: f64, sigma: f64) -> Self {
        Self {
            a,
            m: DEFAULT_M,
            d: DEFAULT_D,
            sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("a", self.a), ("m", self.m), ("d", self.d), ("sigma", self.sigma)] {
            if !value.is_finite() {
                return Err(Error::InvalidParameter {
                    field: name,
                    reason: format!("must be finite, got {value}"),
                });
            }
        }
        if self.a < 0.0 {
            return Err(invalid("a", format!("must be >= 0, got {}", self.a)));
        }
        if self.m <= 0.0 {
            return Err(invalid("m", format!("must be > 0, got {}", self.m)));
        }
        if self.d <= 0.0 {
            return Err(invalid("d", format!("must be > 0, got {}", self.d)));
        }
        if self.sigma < 0.0 {
            return Err(invalid("sigma", format!("must be >= 0, got {}", self.sigma)));
        }
        Ok(())
    }

    pub fn with_a(self, a: f64) -> Self {
        Self { a, ..self }
    }

    pub fn with_sigma(self, sigma: f64) -> Self {
        Self { sigma, ..self }
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::reference(2.0, 0.0)
    }
}

/// Uniform periodic grid `x_i = -L + i h`, `h = 2L / N`, `N` a power of two.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    half_length: f64,
    points: usize,
    spacing: f64,
}

impl Grid1D {
    pub fn new(half_length: f64, points: usize) -> Result<Self> {
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(invalid("L", format!("must be finite and > 0, got {half_length}")));
        }
        if points < 8 || !points.is_power_of_two() {
            return Err(invalid("N", format!("must be a power of two >= 8, got {points}")));
        }
        Ok(Self {
            half_length,
            points,
            spacing: 2.0 * half_length / points as f64,
        })
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn length(&self) -> f64 {
        2.0 * self.half_length
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.half_length + i as f64 * self.spacing
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.x(i)).collect()
    }

    /// Shortest signed distance between two points on the periodic domain.
    pub fn periodic_distance(&self, dx: f64) -> f64 {
        let len = self.length();
        dx - len * (dx / len).round()
    }
}

impl Default for Grid1D {
    fn default() -> Self {
        Self::new(DEFAULT_HALF_LENGTH, DEFAULT_POINTS).expect("reference grid is valid")
    }
}

/// Water `u` and biomass `v` sampled on the grid at time `t`.
///
/// Negative biomass is allowed: the time discretisation of the multiplicative
/// noise can produce tiny negative excursions and clipping them would bias it.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub t: f64,
}

impl FieldState {
    pub fn new(u: Vec<f64>, v: Vec<f64>, t: f64) -> Result<Self> {
        let state = Self { u, v, t };
        state.validate()?;
        Ok(state)
    }

    pub fn homogeneous(grid: &Grid1D, u: f64, v: f64) -> Self {
        Self {
            u: vec![u; grid.len()],
            v: vec![v; grid.len()],
            t: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.u.len() != self.v.len() {
            return Err(invalid(
                "state",
                format!("u has {} points but v has {}", self.u.len(), self.v.len()),
            ));
        }
        self.check_finite()
    }

    pub fn check_finite(&self) -> Result<()> {
        for (component, values) in [("u", &self.u), ("v", &self.v)] {
            if let Some(index) = values.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    t: self.t,
                    index,
                    component,
                });
            }
        }
        Ok(())
    }

    /// Sup-norm distance over both components.
    pub fn sup_distance(&self, other: &FieldState) -> f64 {
        self.u
            .iter()
            .zip(&other.u)
            .chain(self.v.iter().zip(&other.v))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn check_grid(&self, grid: &Grid1D) -> Result<()> {
        if self.len() != grid.len() || self.v.len() != grid.len() {
            return Err(invalid(
                "state",
                format!("state has {} points, grid has {}", self.len(), grid.len()),
            ));
        }
        Ok(())
    }
}

/// Pointwise reaction part `(a - u - u v^2, -m v + u v^2)`.
pub fn reaction_terms(state: &FieldState, params: &ModelParams) -> Result<(Vec<f64>, Vec<f64>)> {
    state.validate()?;
    let (fu, fv) = state
        .u
        .iter()
        .zip(&state.v)
        .map(|(&u, &v)| reaction_point(u, v, params))
        .unzip();
    Ok((fu, fv))
}

#[inline]
pub(crate) fn reaction_point(u: f64, v: f64, params: &ModelParams) -> (f64, f64) {
    let uvv = u * v * v;
    (params.a - u - uvv, -params.m * v + uvv)
}

/// A spatially homogeneous steady state `(u, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Homogeneous {
    pub u: f64,
    pub v: f64,
}

/// The bare-soil state and, when `a >= 2m`, the two vegetated states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneousStates {
    pub bare: Homogeneous,
    /// The Turing-unstable vegetated state (smaller `u`).
    pub lower: Option<Homogeneous>,
    /// The saddle-type middle state (larger `u`).
    pub upper: Option<Homogeneous>,
}

pub fn homogeneous_states(params: &ModelParams) -> HomogeneousStates {
    let a = params.a;
    let m = params.m;
    let bare = Homogeneous { u: a, v: 0.0 };
    // factored form keeps the discriminant exactly zero at a = 2m
    let disc = (a - 2.0 * m) * (a + 2.0 * m);
    if disc < 0.0 || m <= 0.0 {
        return HomogeneousStates {
            bare,
            lower: None,
            upper: None,
        };
    }
    let u_upper = 0.5 * (a + disc.sqrt());
    // product of the roots of u^2 - a u + m^2 is m^2
    let u_lower = m * m / u_upper;
    let state = |u: f64| Homogeneous { u, v: (a - u) / m };
    HomogeneousStates {
        bare,
        lower: Some(state(u_lower)),
        upper: Some(state(u_upper)),
    }
}

/// Number of wavelengths `lambda` that fit on `[-L, L]`, i.e. `2L / lambda`.
pub fn pulses_for_wavelength(lambda: f64, half_length: f64) -> Result<f64> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(invalid("lambda", format!("must be > 0, got {lambda}")));
    }
    Ok(2.0 * half_length / lambda)
}

/// Wavelength of an `n`-pulse pattern on `[-L, L]`.
pub fn wavelength_for_pulses(n: usize, half_length: f64) -> f64 {
    2.0 * half_length / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs(xs: &[f64]) -> f64 {
        xs.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    #[test]
    fn bare_soil_is_a_zero_of_the_reaction() {
        let grid = Grid1D::new(10.0, 16).unwrap();
        for a in [0.0, 0.7, 2.3] {
            let p = ModelParams::reference(a, 0.1);
            let s = FieldState::homogeneous(&grid, a, 0.0);
            let (fu, fv) = reaction_terms(&s, &p).unwrap();
            assert_eq!(max_abs(&fu), 0.0);
            assert_eq!(max_abs(&fv), 0.0);
        }
    }

    #[test]
    fn vegetated_state_at_unit_rainfall() {
        let p = ModelParams::reference(1.0, 0.0);
        let lower = homogeneous_states(&p).lower.unwrap();
        // closed form evaluated independently
        let u = 0.5 - (1.0_f64 - 4.0 * 0.45 * 0.45).sqrt() / 2.0;
        let v = (1.0 - u) / 0.45;
        assert!((lower.u - u).abs() < 1e-14);
        assert!((lower.v - v).abs() < 1e-13);
        // quoted reference values carry only about six significant digits
        assert!((lower.u - 0.282056).abs() < 5e-6);
        assert!((lower.v - 1.595431).abs() < 5e-6);
        let grid = Grid1D::new(10.0, 8).unwrap();
        let s = FieldState::homogeneous(&grid, lower.u, lower.v);
        let (fu, fv) = reaction_terms(&s, &p).unwrap();
        assert!(max_abs(&fu) < 1e-12 && max_abs(&fv) < 1e-12);
    }

    #[test]
    fn hand_arithmetic_reaction() {
        let grid = Grid1D::new(1.0, 8).unwrap();
        let p = ModelParams::reference(2.0, 0.0);
        let s = FieldState::homogeneous(&grid, 1.0, 1.0);
        let (fu, fv) = reaction_terms(&s, &p).unwrap();
        assert!(fu.iter().all(|&x| x == 0.0));
        assert!(fv.iter().all(|&x| (x - 0.55).abs() < 1e-15));
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let mut s = FieldState::homogeneous(&Grid1D::new(1.0, 8).unwrap(), 1.0, 1.0);
        s.v[3] = f64::NAN;
        let err = reaction_terms(&s, &ModelParams::default()).unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 3, .. }));
    }

    #[test]
    fn homogeneous_state_existence() {
        let below = homogeneous_states(&ModelParams::reference(0.8, 0.0));
        assert!(below.lower.is_none() && below.upper.is_none());

        let fold = homogeneous_states(&ModelParams::reference(0.9, 0.0));
        let (lo, hi) = (fold.lower.unwrap(), fold.upper.unwrap());
        assert!((lo.u - 0.45).abs() < 1e-15 && (lo.v - 1.0).abs() < 1e-14);
        assert_eq!(lo, hi);
    }

    #[test]
    fn vegetated_roots_solve_the_quadratic() {
        for a in [0.95, 1.0, 1.5, 2.0, 3.7] {
            let p = ModelParams::reference(a, 0.0);
            let hs = homogeneous_states(&p);
            let (lo, hi) = (hs.lower.unwrap(), hs.upper.unwrap());
            assert!(lo.u < hi.u);
            for s in [lo, hi, hs.bare] {
                let (fu, fv) = reaction_point(s.u, s.v, &p);
                assert!(fu.abs() < 1e-12 && fv.abs() < 1e-12, "a={a} {s:?}");
            }
            for u in [lo.u, hi.u] {
                assert!((u * u - a * u + p.m * p.m).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn wave_number_convention() {
        assert!((pulses_for_wavelength(500.0 / 30.0, 250.0).unwrap() - 30.0).abs() < 1e-12);
        assert_eq!(pulses_for_wavelength(500.0, 250.0).unwrap(), 1.0);
        assert!((pulses_for_wavelength(500.0 / 24.0, 250.0).unwrap() - 24.0).abs() < 1e-12);
        assert!(pulses_for_wavelength(0.0, 250.0).is_err());
        assert!(pulses_for_wavelength(-3.0, 250.0).is_err());
    }

    #[test]
    fn grid_validation() {
        let g = Grid1D::default();
        assert_eq!(g.len(), 4096);
        assert_eq!(g.spacing(), 500.0 / 4096.0);
        assert_eq!(g.x(0), -250.0);
        assert_eq!(g.x(2048), 0.0);
        assert!(Grid1D::new(250.0, 4).is_err());
        assert!(Grid1D::new(250.0, 100).is_err());
        assert!(Grid1D::new(-1.0, 64).is_err());
    }

    #[test]
    fn parameter_validation() {
        assert!(ModelParams::new(1.0, 0.45, 500.0, -0.1).is_err());
        assert!(ModelParams::new(1.0, 0.0, 500.0, 0.1).is_err());
        assert!(ModelParams::new(f64::NAN, 0.45, 500.0, 0.1).is_err());
        assert!(ModelParams::new(1.0, 0.45, 500.0, 0.0).is_ok());
    }

    #[test]
    fn reaction_is_pointwise() {
        let grid = Grid1D::new(1.0, 8).unwrap();
        let p = ModelParams::reference(1.3, 0.0);
        let u: Vec<f64> = (0..8).map(|i| 0.3 + 0.1 * i as f64).collect();
        let v: Vec<f64> = (0..8).map(|i| 1.7 - 0.2 * i as f64).collect();
        let s = FieldState::new(u.clone(), v.clone(), 0.0).unwrap();
        let perm = [3, 0, 7, 1, 6, 2, 5, 4];
        let sp = FieldState::new(
            perm.iter().map(|&i| u[i]).collect(),
            perm.iter().map(|&i| v[i]).collect(),
            0.0,
        )
        .unwrap();
        let (fu, fv) = reaction_terms(&s, &p).unwrap();
        let (gu, gv) = reaction_terms(&sp, &p).unwrap();
        for (j, &i) in perm.iter().enumerate() {
            assert_eq!(gu[j], fu[i]);
            assert_eq!(gv[j], fv[i]);
        }
        assert_eq!(grid.len(), 8);
    }
}
