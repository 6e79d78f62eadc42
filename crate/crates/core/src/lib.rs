//! Stochastic Klausmeier vegetation model on a periodic 1-D domain.
//!
//! The crate covers the deterministic building blocks (homogeneous states,
//! dispersion relation, Turing point, steady periodic patterns), a
//! semi-implicit Euler-Maruyama integrator driven by spatially correlated
//! multiplicative noise, snapshot classification (predominant and local wave
//! numbers, pulse counting) and the ensemble experiments built on top.

pub mod analysis;
mod banded;
pub mod error;
pub mod experiments;
pub mod integrator;
pub mod linear;
pub mod model;
pub mod noise;
pub mod pattern;
pub mod snapshot;

pub use analysis::{
    count_pulses, detect_exit_time, local_wavenumber_field, local_wavenumber_histogram, median_filter_series,
    predominant_wavenumber, AnalysisConfig, ExitDetector, ExitTime, LocalWaveNumbers, PulseCounter,
    WaveNumberHistogram,
};
pub use error::{Error, Result};
pub use integrator::{simulate, Observer, RunOutcome, Simulator, StepSchedule, Stepper};
pub use linear::{most_unstable_mode, turing_point, Linearization, MostUnstableMode, TuringPoint};
pub use model::{homogeneous_states, FieldState, Grid1D, Homogeneous, HomogeneousStates, ModelParams};
pub use noise::{build_spectrum, rng_from_seed, NoiseConfig, NoiseSampler, NoiseSpectrum, SimRng};
pub use pattern::{periodic_pattern, BalloonBoundary, PatternReport, PatternRequest};
