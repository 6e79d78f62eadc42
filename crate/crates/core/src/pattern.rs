//! Deterministic periodic steady states used as initial conditions, plus
//! pulse deletion, random perturbation and the optional Busse-balloon
//! boundary table.
//!
//! Steady states are found by damped Newton iteration on the discrete
//! equations `d L_h u + a - u - u v^2 = 0`, `L_h v - m v + u v^2 = 0`,
//! restricted to fields that are even about `x = 0`. The restriction removes
//! the translation mode (which would make the Jacobian singular) and reduces
//! the unknowns to the half domain `[0, L]` with mirror conditions at both
//! ends. A zero of these equations is an exact fixed point of the
//! semi-implicit scheme for every `dt`.

use std::f64::consts::PI;
use std::io::Read;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Deserialize;

use crate::analysis::{count_pulses, predominant_wavenumber, AnalysisConfig};
use crate::banded::BandMatrix;
use crate::error::{invalid, Error, Result};
use crate::model::{homogeneous_states, wavelength_for_pulses, FieldState, Grid1D, ModelParams};

pub const NEWTON_TOLERANCE: f64 = 1e-10;
pub const MAX_NEWTON_ITERATIONS: usize = 80;
/// Seed amplitudes tried in turn, as fractions of the vegetated biomass level.
const SEED_AMPLITUDES: [f64; 6] = [0.9, 0.5, 1.5, 0.25, 2.5, 0.1];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternRequest {
    pub params: ModelParams,
    /// Number of pulses on `[-L, L]`.
    pub n: usize,
    pub grid: Grid1D,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternReport {
    /// Sup-norm of the steady-state residual on the full periodic grid.
    pub residual: f64,
    pub iterations: usize,
    /// Seed amplitude (fraction of the vegetated biomass) that converged.
    pub seed_amplitude: f64,
}

/// Half-domain Newton problem.
struct HalfDomain {
    params: ModelParams,
    points: usize,
    inv_h2: f64,
}

impl HalfDomain {
    fn lap(&self, y: &[f64], p: usize) -> f64 {
        let last = self.points - 1;
        let (left, right) = match p {
            0 => (y[2], y[2]),
            _ if p == last => (y[2 * (last - 1)], y[2 * (last - 1)]),
            _ => (y[2 * (p - 1)], y[2 * (p + 1)]),
        };
        (left - 2.0 * y[2 * p] + right) * self.inv_h2
    }

    /// Residual of the interleaved state `(u_0, v_0, u_1, v_1, ...)`.
    fn residual(&self, y: &[f64], out: &mut [f64]) {
        let pm = &self.params;
        for p in 0..self.points {
            let (u, v) = (y[2 * p], y[2 * p + 1]);
            let lu = self.lap(y, p);
            let lv = self.lap(&y[1..], p);
            let uvv = u * v * v;
            out[2 * p] = pm.d * lu + pm.a - u - uvv;
            out[2 * p + 1] = lv - pm.m * v + uvv;
        }
    }

    fn jacobian(&self, y: &[f64]) -> BandMatrix {
        let n = 2 * self.points;
        let pm = &self.params;
        let mut jac = BandMatrix::zeros(n, 2, 2);
        let last = self.points - 1;
        for p in 0..self.points {
            let (u, v) = (y[2 * p], y[2 * p + 1]);
            let (iu, iv) = (2 * p, 2 * p + 1);
            jac.add(iu, iu, -2.0 * pm.d * self.inv_h2 - 1.0 - v * v);
            jac.add(iu, iv, -2.0 * u * v);
            jac.add(iv, iu, v * v);
            jac.add(iv, iv, -2.0 * self.inv_h2 - pm.m + 2.0 * u * v);
            let neighbours: &[(usize, f64)] = match p {
                0 => &[(1, 2.0)],
                _ if p == last => &[(last - 1, 2.0)],
                _ => &[(p - 1, 1.0), (p + 1, 1.0)],
            };
            for &(q, w) in neighbours {
                jac.add(iu, 2 * q, w * pm.d * self.inv_h2);
                jac.add(iv, 2 * q + 1, w * self.inv_h2);
            }
        }
        jac
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Damped Newton from `y`; returns iterations used.
fn newton(problem: &HalfDomain, y: &mut Vec<f64>) -> Result<usize> {
    let n = y.len();
    let mut f = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut f_trial = vec![0.0; n];
    problem.residual(y, &mut f);
    for it in 0..MAX_NEWTON_ITERATIONS {
        let res = norm_inf(&f);
        if !res.is_finite() {
            break;
        }
        if res < NEWTON_TOLERANCE {
            return Ok(it);
        }
        let mut step: Vec<f64> = f.iter().map(|x| -x).collect();
        if problem.jacobian(y).solve_in_place(&mut step).is_none() {
            break;
        }
        let merit = norm2(&f);
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            for ((t, yi), s) in trial.iter_mut().zip(y.iter()).zip(&step) {
                *t = yi + alpha * s;
            }
            problem.residual(&trial, &mut f_trial);
            let m = norm2(&f_trial);
            if m.is_finite() && m <= (1.0 - 1e-4 * alpha) * merit {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // stagnation at rounding level counts as converged
            if res < 10.0 * NEWTON_TOLERANCE {
                return Ok(it);
            }
            break;
        }
        std::mem::swap(y, &mut trial);
        std::mem::swap(&mut f, &mut f_trial);
    }
    Err(Error::NewtonDiverged {
        iterations: MAX_NEWTON_ITERATIONS,
        residual: norm_inf(&f),
    })
}

/// Sup-norm of `(d L_h u + a - u - u v^2, L_h v - m v + u v^2)` on the
/// periodic grid.
pub fn steady_residual(state: &FieldState, params: &ModelParams, grid: &Grid1D) -> f64 {
    let n = grid.len();
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let (u, v) = (&state.u, &state.v);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let (l, r) = ((i + n - 1) % n, (i + 1) % n);
        let lu = (u[l] - 2.0 * u[i] + u[r]) * inv_h2;
        let lv = (v[l] - 2.0 * v[i] + v[r]) * inv_h2;
        let uvv = u[i] * v[i] * v[i];
        worst = worst
            .max((params.d * lu + params.a - u[i] - uvv).abs())
            .max((lv - params.m * v[i] + uvv).abs());
    }
    worst
}

/// Steady `n`-pulse pattern with a biomass minimum at `x = 0` and pulse
/// maxima at `x = lambda / 2 + j lambda`.
pub fn periodic_pattern(req: &PatternRequest) -> Result<(FieldState, PatternReport)> {
    let PatternRequest { params, n, grid } = *req;
    params.validate()?;
    let points = grid.len();
    if n == 0 || n > points / 8 {
        return Err(invalid("n", format!("must lie in 1..={}, got {n}", points / 8)));
    }
    let veg = homogeneous_states(&params)
        .lower
        .ok_or(Error::PatternDoesNotExist { a: params.a, n })?;
    let half_points = points / 2 + 1;
    let problem = HalfDomain {
        params,
        points: half_points,
        inv_h2: 1.0 / (grid.spacing() * grid.spacing()),
    };
    let cfg = AnalysisConfig::for_grid(&grid);
    let wavenumber = 2.0 * PI * n as f64 / grid.length();

    let mut last_err = None;
    for &amp in &SEED_AMPLITUDES {
        let mut y = Vec::with_capacity(2 * half_points);
        for p in 0..half_points {
            let x = p as f64 * grid.spacing();
            y.push(veg.u);
            y.push(veg.v * (1.0 - amp * (wavenumber * x).cos()));
        }
        let iterations = match newton(&problem, &mut y) {
            Ok(it) => it,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        let state = unfold(&y, &grid);
        let (lo, hi) = state.v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        if hi - lo < 1e-6 {
            last_err = Some(Error::PatternDoesNotExist { a: params.a, n });
            continue;
        }
        let pulses = count_pulses(&state.v, &grid, &cfg)?;
        let dominant = predominant_wavenumber(&state.v, &grid, &cfg)?;
        if pulses != n || dominant != n {
            last_err = Some(Error::WrongWaveNumber {
                requested: n,
                found: if pulses != n { pulses } else { dominant },
            });
            continue;
        }
        let residual = steady_residual(&state, &params, &grid);
        return Ok((
            state,
            PatternReport {
                residual,
                iterations,
                seed_amplitude: amp,
            },
        ));
    }
    Err(match last_err {
        Some(Error::NewtonDiverged { .. }) | None => Error::PatternDoesNotExist { a: params.a, n },
        Some(e) => e,
    })
}

/// Expand the half-domain solution to the full grid by even reflection.
fn unfold(y: &[f64], grid: &Grid1D) -> FieldState {
    let n = grid.len();
    let mid = n / 2;
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for g in 0..n {
        let p = g.abs_diff(mid);
        u.push(y[2 * p]);
        v.push(y[2 * p + 1]);
    }
    FieldState { u, v, t: 0.0 }
}

/// Zero both components on `[0, wavelength)`.
pub fn delete_pulse(state: &FieldState, grid: &Grid1D, wavelength: f64) -> Result<FieldState> {
    state.check_grid(grid)?;
    if !(wavelength > 0.0 && wavelength <= grid.length()) {
        return Err(invalid(
            "wavelength",
            format!("must lie in (0, {}], got {wavelength}", grid.length()),
        ));
    }
    let mut out = state.clone();
    for i in 0..grid.len() {
        let x = grid.x(i);
        if (0.0..wavelength).contains(&x) {
            out.u[i] = 0.0;
            out.v[i] = 0.0;
        }
    }
    Ok(out)
}

/// Delete one pulse of an `n`-pulse pattern.
pub fn delete_one_pulse(state: &FieldState, grid: &Grid1D, n: usize) -> Result<FieldState> {
    delete_pulse(state, grid, wavelength_for_pulses(n, grid.half_length()))
}

/// Add independent `N(0, amplitude^2)` noise to both components.
pub fn perturb_state<R: Rng + ?Sized>(state: &FieldState, amplitude: f64, rng: &mut R) -> Result<FieldState> {
    if !(amplitude.is_finite() && amplitude >= 0.0) {
        return Err(invalid("amplitude", format!("must be >= 0, got {amplitude}")));
    }
    let mut out = state.clone();
    if amplitude == 0.0 {
        return Ok(out);
    }
    for x in out.u.iter_mut().chain(out.v.iter_mut()) {
        let z: f64 = rng.sample(StandardNormal);
        *x += amplitude * z;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct BoundaryRow {
    pub a: f64,
    pub k_low: f64,
    pub k_high: f64,
}

/// Busse-balloon boundary polyline `(a, k_low, k_high)`, sorted by `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct BalloonBoundary {
    rows: Vec<BoundaryRow>,
}

impl BalloonBoundary {
    pub fn from_rows(mut rows: Vec<BoundaryRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(invalid("boundary", "no rows"));
        }
        for r in &rows {
            if !(r.a.is_finite() && r.k_low.is_finite() && r.k_high.is_finite()) || r.k_low > r.k_high {
                return Err(invalid("boundary", format!("bad row {r:?}")));
            }
        }
        rows.sort_by(|x, y| x.a.total_cmp(&y.a));
        Ok(Self { rows })
    }

    /// Read a CSV with header `a,k_low,k_high`.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let rows = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<BoundaryRow>, _>>()?;
        Self::from_rows(rows)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn rows(&self) -> &[BoundaryRow] {
        &self.rows
    }

    /// `(k_low, k_high)` at rainfall `a`, linearly interpolated.
    pub fn limits(&self, a: f64) -> Option<(f64, f64)> {
        let rows = &self.rows;
        if a < rows[0].a || a > rows[rows.len() - 1].a {
            return None;
        }
        let j = rows.partition_point(|r| r.a < a);
        if j < rows.len() && rows[j].a == a {
            return Some((rows[j].k_low, rows[j].k_high));
        }
        let (l, r) = (rows[j - 1], rows[j]);
        let s = (a - l.a) / (r.a - l.a);
        Some((l.k_low + s * (r.k_low - l.k_low), l.k_high + s * (r.k_high - l.k_high)))
    }

    pub fn contains(&self, a: f64, k: f64) -> bool {
        self.limits(a).is_some_and(|(lo, hi)| lo <= k && k <= hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::rng_from_seed;

    fn small_grid() -> Grid1D {
        Grid1D::new(250.0, 4096).unwrap()
    }

    #[test]
    fn half_domain_residual_matches_full_grid() {
        let grid = Grid1D::new(30.0, 64).unwrap();
        let params = ModelParams::reference(1.5, 0.0);
        let problem = HalfDomain {
            params,
            points: 33,
            inv_h2: 1.0 / (grid.spacing() * grid.spacing()),
        };
        let y: Vec<f64> = (0..66)
            .map(|i| 1.0 + 0.1 * ((i / 2) as f64 * 0.3).cos() + 0.05 * (i % 2) as f64)
            .collect();
        let mut f = vec![0.0; 66];
        problem.residual(&y, &mut f);
        let full = unfold(&y, &grid);
        assert!((norm_inf(&f) - steady_residual(&full, &params, &grid)).abs() < 1e-9);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let params = ModelParams::reference(1.5, 0.0);
        let problem = HalfDomain {
            params,
            points: 6,
            inv_h2: 4.0,
        };
        let y: Vec<f64> = (0..12).map(|i| 0.5 + 0.1 * i as f64).collect();
        let jac = problem.jacobian(&y);
        let mut f0 = vec![0.0; 12];
        let mut f1 = vec![0.0; 12];
        let eps = 1e-6;
        for j in 0..12 {
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[j] += eps;
            ym[j] -= eps;
            problem.residual(&yp, &mut f1);
            problem.residual(&ym, &mut f0);
            for i in 0..12 {
                let fd = (f1[i] - f0[i]) / (2.0 * eps);
                let exact = if i + 2 >= j && j + 2 >= i { jac.get(i, j) } else { 0.0 };
                assert!((fd - exact).abs() < 1e-5 * (1.0 + fd.abs()), "({i},{j}) {fd} {exact}");
            }
        }
    }

    #[test]
    fn thirty_pulse_pattern() {
        let grid = small_grid();
        let params = ModelParams::reference(1.5, 0.0);
        let (state, report) = periodic_pattern(&PatternRequest { params, n: 30, grid }).unwrap();
        assert!(report.residual < NEWTON_TOLERANCE, "{report:?}");
        assert!(steady_residual(&state, &params, &grid) < 1e-10);
        // even about x = 0 (index N/2)
        let mid = grid.len() / 2;
        for i in 1..mid {
            assert!((state.v[mid + i] - state.v[mid - i]).abs() < 1e-8);
        }
    }

    #[test]
    fn exactly_periodic_when_divisible() {
        let grid = small_grid();
        let params = ModelParams::reference(1.5, 0.0);
        let (state, _) = periodic_pattern(&PatternRequest { params, n: 32, grid }).unwrap();
        let shift = grid.len() / 32;
        let mut rotated = state.clone();
        rotated.u.rotate_left(shift);
        rotated.v.rotate_left(shift);
        assert!(rotated.sup_distance(&state) < 1e-10);
    }

    #[test]
    fn no_pattern_without_vegetated_state() {
        let grid = small_grid();
        let params = ModelParams::reference(0.3, 0.0);
        let err = periodic_pattern(&PatternRequest { params, n: 20, grid }).unwrap_err();
        assert!(matches!(err, Error::PatternDoesNotExist { .. }));
    }

    #[test]
    fn rejects_out_of_range_n() {
        let grid = Grid1D::new(250.0, 256).unwrap();
        let params = ModelParams::reference(1.5, 0.0);
        assert!(periodic_pattern(&PatternRequest { params, n: 0, grid }).is_err());
        assert!(periodic_pattern(&PatternRequest { params, n: 33, grid }).is_err());
    }

    #[test]
    fn delete_pulse_zeroes_interval_only() {
        let grid = Grid1D::new(10.0, 64).unwrap();
        let s = FieldState::homogeneous(&grid, 1.0, 2.0);
        let d = delete_pulse(&s, &grid, 2.5).unwrap();
        for i in 0..64 {
            let x = grid.x(i);
            let inside = (0.0..2.5).contains(&x);
            assert_eq!(d.u[i] == 0.0, inside);
            assert_eq!(d.v[i] == 0.0, inside);
        }
        let zero = FieldState::homogeneous(&grid, 0.0, 0.0);
        assert_eq!(delete_pulse(&zero, &grid, 2.5).unwrap(), zero);
        assert!(delete_pulse(&s, &grid, 21.0).is_err());
    }

    #[test]
    fn perturbation_properties() {
        let grid = Grid1D::new(10.0, 256).unwrap();
        let s = FieldState::homogeneous(&grid, 0.28, 1.6);
        assert_eq!(perturb_state(&s, 0.0, &mut rng_from_seed(1)).unwrap(), s);
        let p = perturb_state(&s, 0.01, &mut rng_from_seed(1)).unwrap();
        assert!(p.sup_distance(&s) <= 5.0 * 0.01);
        assert!(p.sup_distance(&s) > 0.0);
        assert_eq!(p, perturb_state(&s, 0.01, &mut rng_from_seed(1)).unwrap());
        assert!(perturb_state(&s, -1.0, &mut rng_from_seed(1)).is_err());
    }

    #[test]
    fn boundary_interpolation() {
        let csv = "a,k_low,k_high\n2.0,20,40\n1.0,10,20\n";
        let b = BalloonBoundary::from_reader(csv.as_bytes()).unwrap();
        assert_eq!(b.limits(1.5), Some((15.0, 30.0)));
        assert_eq!(b.limits(2.0), Some((20.0, 40.0)));
        assert!(b.contains(1.5, 29.0));
        assert!(!b.contains(1.5, 31.0));
        assert!(!b.contains(2.5, 30.0));
        assert!(BalloonBoundary::from_reader("a,k_low\n1,2\n".as_bytes()).is_err());
    }
}
