//! Semi-implicit Euler–Maruyama time stepping.
//!
//! One step solves
//!
//! ```text
//! (I - dt L_h) X(t + dt) = X(t) + dt f(X(t)) + sqrt(dt) sigma (0, v(t)) dW
//! ```
//!
//! where `L_h` is the periodic three-point Laplacian scaled by the diffusion
//! coefficient of each component and `f` the reaction terms. The noise is
//! evaluated at the left endpoint (Itô). `L_h` is circulant, so the solve is
//! a diagonal multiplication in Fourier space.

use std::f64::consts::PI;
use std::ops::ControlFlow;
use std::sync::Arc;

use rand::Rng;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{reaction_point, FieldState, Grid1D, ModelParams};
use crate::noise::{build_spectrum, rng_from_seed, NoiseConfig, NoiseSampler, NoiseSpectrum};

pub const DEFAULT_DT: f64 = 0.05;
pub const DEFAULT_OBSERVE_STRIDE: f64 = 4.0;

/// Eigenvalue of the periodic three-point Laplacian for Fourier mode `j`.
pub fn laplacian_symbol(j: usize, grid: &Grid1D) -> f64 {
    let n = grid.len() as f64;
    let h = grid.spacing();
    (2.0 * (2.0 * PI * j as f64 / n).cos() - 2.0) / (h * h)
}

/// Fourier multipliers of `(I - dt c L_h)^{-1}` for water (`c = d`) and biomass (`c = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct ImplicitOperator {
    dt: f64,
    water: Vec<f64>,
    biomass: Vec<f64>,
}

impl ImplicitOperator {
    pub fn new(grid: &Grid1D, params: &ModelParams, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid("dt", format!("must be finite and > 0, got {dt}")));
        }
        let modes = grid.len() / 2 + 1;
        let build = |c: f64| -> Vec<f64> {
            (0..modes)
                .map(|j| 1.0 / (1.0 - dt * c * laplacian_symbol(j, grid)))
                .collect()
        };
        Ok(Self {
            dt,
            water: build(params.d),
            biomass: build(1.0),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Multipliers for modes `0..=N/2` of the water equation.
    pub fn water(&self) -> &[f64] {
        &self.water
    }

    pub fn biomass(&self) -> &[f64] {
        &self.biomass
    }
}

/// Time step, horizon and observation interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub dt: f64,
    pub t_end: f64,
    pub observe_stride: f64,
}

impl StepSchedule {
    pub fn new(dt: f64, t_end: f64, observe_stride: f64) -> Result<Self> {
        let s = Self {
            dt,
            t_end,
            observe_stride,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid("dt", format!("must be finite and > 0, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(invalid("t_end", format!("must be finite and >= 0, got {}", self.t_end)));
        }
        let ratio = self.observe_stride / self.dt;
        if self.observe_stride.is_nan()
            || self.observe_stride <= 0.0
            || (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0)
            || ratio.round() < 1.0
        {
            return Err(invalid(
                "observe_stride",
                format!(
                    "must be a positive multiple of dt = {}, got {}",
                    self.dt, self.observe_stride
                ),
            ));
        }
        Ok(())
    }

    pub fn with_t_end(self, t_end: f64) -> Self {
        Self { t_end, ..self }
    }

    pub fn with_dt(self, dt: f64) -> Self {
        Self { dt, ..self }
    }

    pub fn stride_steps(&self) -> usize {
        (self.observe_stride / self.dt).round() as usize
    }

    /// Number of steps from `t0` to `t_end`.
    pub fn steps_from(&self, t0: f64) -> usize {
        if self.t_end <= t0 {
            0
        } else {
            ((self.t_end - t0) / self.dt).round() as usize
        }
    }
}

impl Default for StepSchedule {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            t_end: 500.0,
            observe_stride: DEFAULT_OBSERVE_STRIDE,
        }
    }
}

/// Callback invoked with `(t, state)` every observation stride.
///
/// Returning `ControlFlow::Break` stops the run early.
pub trait Observer {
    fn observe(&mut self, t: f64, state: &FieldState) -> ControlFlow<()>;
}

impl<F> Observer for F
where
    F: FnMut(f64, &FieldState) -> ControlFlow<()>,
{
    fn observe(&mut self, t: f64, state: &FieldState) -> ControlFlow<()> {
        self(t, state)
    }
}

/// Reusable stepping workspace for one realisation.
pub struct Stepper {
    params: ModelParams,
    op: Arc<ImplicitOperator>,
    sampler: Option<NoiseSampler>,
    reaction: bool,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
    spectrum: Vec<Complex64>,
    scratch_fwd: Vec<Complex64>,
    scratch_inv: Vec<Complex64>,
    rhs_u: Vec<f64>,
    rhs_v: Vec<f64>,
    dw: Vec<f64>,
}

impl Stepper {
    /// `noise` may be `None` for deterministic runs; it is ignored when `sigma = 0`.
    pub fn new(
        params: ModelParams,
        grid: &Grid1D,
        op: Arc<ImplicitOperator>,
        noise: Option<Arc<NoiseSpectrum>>,
    ) -> Result<Self> {
        params.validate()?;
        if op.water.len() != grid.len() / 2 + 1 {
            return Err(invalid("operator", "built for a different grid"));
        }
        let sampler = match noise {
            Some(spec) if params.sigma > 0.0 => {
                if spec.grid().len() != grid.len() {
                    return Err(invalid("noise", "spectrum built for a different grid"));
                }
                Some(NoiseSampler::new(spec))
            }
            None if params.sigma > 0.0 => return Err(invalid("noise", "sigma > 0 requires a noise spectrum")),
            _ => None,
        };
        let mut planner = RealFftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(grid.len());
        let inverse = planner.plan_fft_inverse(grid.len());
        let n = grid.len();
        Ok(Self {
            params,
            op,
            sampler,
            reaction: true,
            spectrum: forward.make_output_vec(),
            scratch_fwd: forward.make_scratch_vec(),
            scratch_inv: inverse.make_scratch_vec(),
            forward,
            inverse,
            rhs_u: vec![0.0; n],
            rhs_v: vec![0.0; n],
            dw: vec![0.0; n],
        })
    }

    /// Drop the reaction terms, leaving the implicit diffusion (and noise).
    /// Used to check the linear part of the scheme in isolation.
    pub fn without_reaction(mut self) -> Self {
        self.reaction = false;
        self
    }

    pub fn dt(&self) -> f64 {
        self.op.dt
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn step<R: Rng + ?Sized>(&mut self, state: &mut FieldState, rng: &mut R) -> Result<()> {
        let dt = self.op.dt;
        let p = self.params;
        if self.reaction {
            for i in 0..state.u.len() {
                let (u, v) = (state.u[i], state.v[i]);
                let (fu, fv) = reaction_point(u, v, &p);
                self.rhs_u[i] = u + dt * fu;
                self.rhs_v[i] = v + dt * fv;
            }
        } else {
            self.rhs_u.copy_from_slice(&state.u);
            self.rhs_v.copy_from_slice(&state.v);
        }
        if let Some(sampler) = self.sampler.as_mut() {
            sampler.sample_into(rng, &mut self.dw);
            let amp = dt.sqrt() * p.sigma;
            for ((r, &v), &w) in self.rhs_v.iter_mut().zip(&state.v).zip(&self.dw) {
                *r += amp * v * w;
            }
        }
        self.solve(true, &mut state.u);
        self.solve(false, &mut state.v);
        state.t += dt;
        state.check_finite()
    }

    fn solve(&mut self, water: bool, out: &mut [f64]) {
        let (rhs, mult) = if water {
            (&mut self.rhs_u, &self.op.water)
        } else {
            (&mut self.rhs_v, &self.op.biomass)
        };
        self.forward
            .process_with_scratch(rhs, &mut self.spectrum, &mut self.scratch_fwd)
            .expect("buffer sizes match the plan");
        let inv_n = 1.0 / out.len() as f64;
        for (c, &m) in self.spectrum.iter_mut().zip(mult) {
            *c *= m * inv_n;
        }
        // the Nyquist and mean bins must be purely real for the inverse transform
        self.spectrum[0].im = 0.0;
        let last = self.spectrum.len() - 1;
        self.spectrum[last].im = 0.0;
        self.inverse
            .process_with_scratch(&mut self.spectrum, out, &mut self.scratch_inv)
            .expect("buffer sizes match the plan");
    }
}

/// Advance a copy of `state` by one step.
pub fn step<R: Rng + ?Sized>(
    state: &FieldState,
    params: &ModelParams,
    grid: &Grid1D,
    spectrum: Option<Arc<NoiseSpectrum>>,
    op: Arc<ImplicitOperator>,
    rng: &mut R,
) -> Result<FieldState> {
    state.check_grid(grid)?;
    let mut stepper = Stepper::new(*params, grid, op, spectrum)?;
    let mut next = state.clone();
    stepper.step(&mut next, rng)?;
    Ok(next)
}

/// Result of a simulation run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub state: FieldState,
    pub steps: usize,
    pub observations: usize,
    /// An observer asked to stop before `t_end`.
    pub stopped_early: bool,
}

/// Shared, immutable inputs for many realisations with the same parameters.
#[derive(Debug, Clone)]
pub struct Simulator {
    params: ModelParams,
    grid: Grid1D,
    schedule: StepSchedule,
    op: Arc<ImplicitOperator>,
    spectrum: Option<Arc<NoiseSpectrum>>,
}

impl Simulator {
    pub fn new(params: ModelParams, grid: Grid1D, xi: f64, schedule: StepSchedule) -> Result<Self> {
        params.validate()?;
        schedule.validate()?;
        let op = Arc::new(ImplicitOperator::new(&grid, &params, schedule.dt)?);
        let spectrum = if params.sigma > 0.0 {
            let cfg = NoiseConfig::new(xi, 0)?;
            Some(Arc::new(build_spectrum(&cfg, &grid)))
        } else {
            None
        };
        Ok(Self {
            params,
            grid,
            schedule,
            op,
            spectrum,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn schedule(&self) -> &StepSchedule {
        &self.schedule
    }

    pub fn spectrum(&self) -> Option<&Arc<NoiseSpectrum>> {
        self.spectrum.as_ref()
    }

    pub fn stepper(&self) -> Result<Stepper> {
        Stepper::new(self.params, &self.grid, Arc::clone(&self.op), self.spectrum.clone())
    }

    /// Integrate from `init.t` to `t_end`, observing at `init.t` and every
    /// stride thereafter. Nothing is observed when no step is taken.
    pub fn run(&self, init: &FieldState, seed: u64, observers: &mut [&mut dyn Observer]) -> Result<RunOutcome> {
        init.validate()?;
        init.check_grid(&self.grid)?;
        let steps = self.schedule.steps_from(init.t);
        let stride = self.schedule.stride_steps();
        let mut state = init.clone();
        if steps == 0 {
            return Ok(RunOutcome {
                state,
                steps: 0,
                observations: 0,
                stopped_early: false,
            });
        }
        let t0 = init.t;
        let dt = self.schedule.dt;
        let mut rng = rng_from_seed(seed);
        let mut stepper = self.stepper()?;
        let mut observations = 0;

        let mut notify = |state: &FieldState, observations: &mut usize| -> bool {
            *observations += 1;
            let mut stop = false;
            for obs in observers.iter_mut() {
                if obs.observe(state.t, state).is_break() {
                    stop = true;
                }
            }
            stop
        };

        if notify(&state, &mut observations) {
            return Ok(RunOutcome {
                state,
                steps: 0,
                observations,
                stopped_early: true,
            });
        }
        for k in 1..=steps {
            stepper.step(&mut state, &mut rng).map_err(|e| match e {
                Error::NonFinite { index, component, .. } => Error::NonFinite {
                    t: t0 + k as f64 * dt,
                    index,
                    component,
                },
                other => other,
            })?;
            // recompute from the step count to avoid drift in the time stamp
            state.t = t0 + k as f64 * dt;
            if k % stride == 0 && notify(&state, &mut observations) {
                return Ok(RunOutcome {
                    state,
                    steps: k,
                    observations,
                    stopped_early: true,
                });
            }
        }
        Ok(RunOutcome {
            state,
            steps,
            observations,
            stopped_early: false,
        })
    }
}

/// One-shot simulation using `noise.seed` as the random stream seed.
pub fn simulate(
    init: &FieldState,
    params: &ModelParams,
    grid: &Grid1D,
    noise: &NoiseConfig,
    schedule: &StepSchedule,
    observers: &mut [&mut dyn Observer],
) -> Result<RunOutcome> {
    Simulator::new(*params, *grid, noise.xi, *schedule)?.run(init, noise.seed, observers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::homogeneous_states;

    #[test]
    fn multipliers_in_unit_interval() {
        let grid = Grid1D::default();
        for dt in [1e-6, 0.05, 1.0, 1e6] {
            let op = ImplicitOperator::new(&grid, &ModelParams::default(), dt).unwrap();
            for &m in op.water().iter().chain(op.biomass()) {
                assert!(m > 0.0 && m <= 1.0, "dt={dt} m={m}");
            }
            assert_eq!(op.water()[0], 1.0);
        }
    }

    #[test]
    fn bare_soil_is_a_fixed_point() {
        let grid = Grid1D::default();
        let p = ModelParams::reference(1.3, 0.0);
        let op = Arc::new(ImplicitOperator::new(&grid, &p, 0.05).unwrap());
        let s0 = FieldState::homogeneous(&grid, 1.3, 0.0);
        let s1 = step(&s0, &p, &grid, None, op, &mut rng_from_seed(0)).unwrap();
        assert!(s1.sup_distance(&s0) < 1e-13);
        assert!((s1.t - 0.05).abs() < 1e-15);
    }

    #[test]
    fn vegetated_state_is_a_fixed_point() {
        let grid = Grid1D::default();
        let p = ModelParams::reference(1.0, 0.0);
        let hs = homogeneous_states(&p).lower.unwrap();
        let op = Arc::new(ImplicitOperator::new(&grid, &p, 0.05).unwrap());
        let s0 = FieldState::homogeneous(&grid, hs.u, hs.v);
        let s1 = step(&s0, &p, &grid, None, op, &mut rng_from_seed(0)).unwrap();
        assert!(s1.sup_distance(&s0) < 1e-12);
    }

    #[test]
    fn pure_diffusion_scales_each_mode_exactly() {
        let grid = Grid1D::new(20.0, 64).unwrap();
        let p = ModelParams::reference(1.0, 0.0);
        let dt = 0.1;
        let op = Arc::new(ImplicitOperator::new(&grid, &p, dt).unwrap());
        let mut stepper = Stepper::new(p, &grid, Arc::clone(&op), None)
            .unwrap()
            .without_reaction();
        for j in [1usize, 5, 17, 32] {
            let wave: Vec<f64> = (0..64).map(|i| (2.0 * PI * (j * i) as f64 / 64.0).cos()).collect();
            let mut s = FieldState::new(wave.clone(), wave.clone(), 0.0).unwrap();
            stepper.step(&mut s, &mut rng_from_seed(0)).unwrap();
            let mu = laplacian_symbol(j, &grid);
            let fu = 1.0 / (1.0 - dt * p.d * mu);
            let fv = 1.0 / (1.0 - dt * mu);
            for i in 0..64 {
                assert!((s.u[i] - fu * wave[i]).abs() < 1e-13);
                assert!((s.v[i] - fv * wave[i]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn zero_biomass_stays_zero_under_noise() {
        let grid = Grid1D::new(50.0, 256).unwrap();
        let p = ModelParams::reference(1.2, 0.5);
        let sched = StepSchedule::new(0.05, 5.0, 1.0).unwrap();
        let init = FieldState::homogeneous(&grid, 0.7, 0.0);
        let out = simulate(&init, &p, &grid, &NoiseConfig::default(), &sched, &mut []).unwrap();
        assert!(out.state.v.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_horizon_returns_init_without_observations() {
        let grid = Grid1D::new(10.0, 32).unwrap();
        let p = ModelParams::reference(1.2, 0.2);
        let init = FieldState::homogeneous(&grid, 1.0, 1.0);
        let sched = StepSchedule::new(0.05, 0.0, 1.0).unwrap();
        let mut seen = 0;
        let mut obs = |_: f64, _: &FieldState| {
            seen += 1;
            ControlFlow::Continue(())
        };
        let out = simulate(&init, &p, &grid, &NoiseConfig::default(), &sched, &mut [&mut obs]).unwrap();
        assert_eq!(out.state, init);
        assert_eq!(out.observations, 0);
        assert_eq!(seen, 0);
    }

    #[test]
    fn observers_fire_on_stride_and_can_stop() {
        let grid = Grid1D::new(10.0, 32).unwrap();
        let p = ModelParams::reference(1.2, 0.0);
        let init = FieldState::homogeneous(&grid, 1.0, 1.0);
        let sched = StepSchedule::new(0.05, 10.0, 2.0).unwrap();
        let mut times = Vec::new();
        let mut obs = |t: f64, _: &FieldState| {
            times.push(t);
            if t >= 6.0 {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        };
        let out = simulate(&init, &p, &grid, &NoiseConfig::default(), &sched, &mut [&mut obs]).unwrap();
        assert!(out.stopped_early);
        assert_eq!(times, vec![0.0, 2.0, 4.0, 6.0]);
    }

    #[test]
    fn blow_up_reports_time_and_index() {
        let grid = Grid1D::new(10.0, 32).unwrap();
        let p = ModelParams::reference(1.0, 0.0);
        let mut init = FieldState::homogeneous(&grid, 1.0, 1.0);
        init.v[7] = 1e200;
        let sched = StepSchedule::new(0.5, 10.0, 0.5).unwrap();
        let err = simulate(&init, &p, &grid, &NoiseConfig::default(), &sched, &mut []).unwrap_err();
        match err {
            Error::NonFinite { t, .. } => assert!(t > 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn schedule_validation() {
        assert!(StepSchedule::new(0.05, 10.0, 4.0).is_ok());
        assert!(StepSchedule::new(0.05, 10.0, 0.07).is_err());
        assert!(StepSchedule::new(0.0, 10.0, 1.0).is_err());
        assert!(StepSchedule::new(0.05, -1.0, 1.0).is_err());
    }

    #[test]
    fn noisy_run_requires_spectrum() {
        let grid = Grid1D::new(10.0, 32).unwrap();
        let p = ModelParams::reference(1.0, 0.1);
        let op = Arc::new(ImplicitOperator::new(&grid, &p, 0.05).unwrap());
        assert!(Stepper::new(p, &grid, op, None).is_err());
    }
}
