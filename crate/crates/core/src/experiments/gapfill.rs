use std::ops::ControlFlow;

use super::Settings;
use crate::analysis::{predominant_wavenumber, LocalWaveNumbers, PulseCounter};
use crate::error::Result;
use crate::integrator::Simulator;
use crate::model::FieldState;
use crate::pattern::{delete_one_pulse, periodic_pattern, PatternRequest};

/// Classifier time series after deleting one pulse of an `n`-pulse pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct GapFillRun {
    pub a: f64,
    pub sigma: f64,
    pub n: usize,
    pub times: Vec<f64>,
    pub pulses: Vec<usize>,
    pub predominant: Vec<usize>,
    /// Average local wave number rounded to the nearest integer.
    pub average_local: Vec<i64>,
}

fn first_change<T: PartialEq>(times: &[f64], series: &[T]) -> Option<f64> {
    let first = series.first()?;
    series.iter().position(|x| x != first).map(|i| times[i])
}

impl GapFillRun {
    /// First time the predominant wave number differs from its initial value.
    pub fn predominant_shift(&self) -> Option<f64> {
        first_change(&self.times, &self.predominant)
    }

    pub fn average_local_shift(&self) -> Option<f64> {
        first_change(&self.times, &self.average_local)
    }

    /// Times at which the pulse count differs from the previous observation.
    pub fn pulse_changes(&self) -> Vec<f64> {
        self.pulses
            .windows(2)
            .zip(&self.times[1..])
            .filter(|(w, _)| w[0] != w[1])
            .map(|(_, t)| *t)
            .collect()
    }
}

/// Delete the pulse on `[0, lambda)` of the steady `n`-pulse pattern at
/// rainfall `a` and follow the three classifiers up to `t_end`.
pub fn run_gap_fill(settings: &Settings, a: f64, sigma: f64, n: usize, t_end: f64) -> Result<GapFillRun> {
    settings.validate()?;
    let grid = settings.grid;
    let (pattern, _) = periodic_pattern(&PatternRequest {
        params: settings.params(a, 0.0)?,
        n,
        grid,
    })?;
    let start = delete_one_pulse(&pattern, &grid, n)?;
    let sim = Simulator::new(settings.params(a, sigma)?, grid, settings.xi, settings.schedule(t_end)?)?;

    let mut lwn = LocalWaveNumbers::new(&grid, &settings.analysis)?;
    let mut counter = PulseCounter::new(&grid, &settings.analysis)?;
    let mut run = GapFillRun {
        a,
        sigma,
        n,
        times: Vec::new(),
        pulses: Vec::new(),
        predominant: Vec::new(),
        average_local: Vec::new(),
    };
    let mut failure = None;
    let mut obs = |t: f64, s: &FieldState| {
        match predominant_wavenumber(&s.v, &grid, &settings.analysis) {
            Ok(k) => run.predominant.push(k),
            Err(e) => {
                failure = Some(e);
                return ControlFlow::Break(());
            }
        }
        run.times.push(t);
        run.pulses.push(counter.count(&s.v));
        run.average_local.push(lwn.histogram(&s.v).rounded_mean());
        ControlFlow::Continue(())
    };
    sim.run(&start, settings.seed(0), &mut [&mut obs])?;
    match failure {
        Some(e) => Err(e),
        None => Ok(run),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn change_points() {
        let run = GapFillRun {
            a: 1.5,
            sigma: 0.0,
            n: 30,
            times: vec![0.0, 2.0, 4.0, 6.0],
            pulses: vec![29, 29, 28, 29],
            predominant: vec![30, 30, 30, 29],
            average_local: vec![30, 29, 29, 29],
        };
        assert_eq!(run.predominant_shift(), Some(6.0));
        assert_eq!(run.average_local_shift(), Some(2.0));
        assert_eq!(run.pulse_changes(), vec![4.0, 6.0]);
        assert_eq!(first_change::<i64>(&[], &[]), None);
    }
}
