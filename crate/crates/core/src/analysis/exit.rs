//! Temporal median filtering of pulse-number series and first-exit detection.

use std::ops::ControlFlow;

use super::{AnalysisConfig, PulseCounter};
use crate::error::{invalid, Error, Result};
use crate::integrator::Observer;
use crate::model::{FieldState, Grid1D};

/// Centred moving median. Near the ends the window shrinks symmetrically so
/// that it always holds an odd number of samples.
pub fn median_filter_series(series: &[i64], window: usize) -> Result<Vec<i64>> {
    if window.is_multiple_of(2) {
        return Err(invalid("median_window", format!("must be odd, got {window}")));
    }
    let half = window / 2;
    let mut buf = Vec::with_capacity(window);
    Ok((0..series.len())
        .map(|i| filtered_at(series, i, half, &mut buf))
        .collect())
}

fn filtered_at(series: &[i64], i: usize, half: usize, buf: &mut Vec<i64>) -> i64 {
    let reach = half.min(i).min(series.len() - 1 - i);
    buf.clear();
    buf.extend_from_slice(&series[i - reach..=i + reach]);
    buf.sort_unstable();
    buf[reach]
}

/// First exit time of one realisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitTime {
    pub t_exit: f64,
    /// No change was seen up to `t_max`; `t_exit` is then `t_max`.
    pub censored: bool,
}

/// Earliest time `<= t_max` at which the (already filtered) count differs from
/// `initial_count`, or `t_max` (censored) if there is none.
pub fn detect_exit_time(times: &[f64], filtered_counts: &[i64], initial_count: i64, t_max: f64) -> Result<ExitTime> {
    if times.is_empty() || filtered_counts.is_empty() {
        return Err(Error::EmptySeries);
    }
    if times.len() != filtered_counts.len() {
        return Err(invalid("series", "times and counts differ in length"));
    }
    let hit = times
        .iter()
        .zip(filtered_counts)
        .take_while(|(t, _)| **t <= t_max)
        .find(|(_, c)| **c != initial_count);
    Ok(match hit {
        Some((&t, _)) => ExitTime {
            t_exit: t,
            censored: false,
        },
        None => ExitTime {
            t_exit: t_max,
            censored: true,
        },
    })
}

/// Streaming observer: counts pulses at every observation, median-filters
/// the series and stops the run once the exit time is known.
///
/// A filtered value is final once its full window has been observed, so the
/// simulation should run `median_window / 2` strides past `t_max`; the exit
/// time found is then independent of how far beyond `t_max` the run goes.
pub struct ExitDetector {
    counter: PulseCounter,
    initial: i64,
    half: usize,
    t_max: f64,
    times: Vec<f64>,
    counts: Vec<i64>,
    next: usize,
    exit: Option<usize>,
    buf: Vec<i64>,
}

impl ExitDetector {
    pub fn new(grid: &Grid1D, cfg: &AnalysisConfig, initial: i64, t_max: f64) -> Result<Self> {
        Ok(Self {
            counter: PulseCounter::new(grid, cfg)?,
            initial,
            half: cfg.median_window / 2,
            t_max,
            times: Vec::new(),
            counts: Vec::new(),
            next: 0,
            exit: None,
            buf: Vec::with_capacity(cfg.median_window),
        })
    }

    /// How far past `t_max` a run must go for every filtered value up to
    /// `t_max` to be final.
    pub fn lookahead(&self, observe_stride: f64) -> f64 {
        self.half as f64 * observe_stride
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn counts(&self) -> &[i64] {
        &self.counts
    }

    pub fn result(&self) -> Result<ExitTime> {
        if self.times.is_empty() {
            return Err(Error::EmptySeries);
        }
        Ok(match self.exit {
            Some(i) => ExitTime {
                t_exit: self.times[i],
                censored: false,
            },
            None => ExitTime {
                t_exit: self.t_max,
                censored: true,
            },
        })
    }

    fn advance(&mut self) -> ControlFlow<()> {
        let last = self.counts.len() - 1;
        while self.next <= last && last >= self.next + self.half.min(self.next) {
            let i = self.next;
            if self.times[i] > self.t_max {
                return ControlFlow::Break(());
            }
            // the window may still be shrunk on the left near the start
            let reach = self.half.min(i);
            self.buf.clear();
            self.buf.extend_from_slice(&self.counts[i - reach..=i + reach]);
            self.buf.sort_unstable();
            if self.buf[reach] != self.initial {
                self.exit = Some(i);
                return ControlFlow::Break(());
            }
            self.next += 1;
        }
        ControlFlow::Continue(())
    }
}

impl Observer for ExitDetector {
    fn observe(&mut self, t: f64, state: &FieldState) -> ControlFlow<()> {
        if self.exit.is_some() {
            return ControlFlow::Break(());
        }
        self.times.push(t);
        self.counts.push(self.counter.count(&state.v) as i64);
        self.advance()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_removes_single_glitch() {
        assert_eq!(median_filter_series(&[30, 30, 29, 30, 30], 3).unwrap(), vec![30; 5]);
        assert_eq!(
            median_filter_series(&[30, 29, 29, 29, 28], 3).unwrap(),
            vec![30, 29, 29, 29, 28]
        );
        assert_eq!(median_filter_series(&[7; 9], 5).unwrap(), vec![7; 9]);
        assert!(median_filter_series(&[1, 2], 4).is_err());
        assert!(median_filter_series(&[], 5).unwrap().is_empty());
    }

    #[test]
    fn exit_detection() {
        let r = detect_exit_time(&[0.0, 4.0, 8.0, 12.0], &[30, 30, 29, 29], 30, 500.0).unwrap();
        assert_eq!(
            r,
            ExitTime {
                t_exit: 8.0,
                censored: false
            }
        );
        let times: Vec<f64> = (0..=125).map(|i| 4.0 * i as f64).collect();
        let r = detect_exit_time(&times, &vec![30; times.len()], 30, 500.0).unwrap();
        assert_eq!(
            r,
            ExitTime {
                t_exit: 500.0,
                censored: true
            }
        );
        assert!(matches!(detect_exit_time(&[], &[], 30, 1.0), Err(Error::EmptySeries)));
    }

    #[test]
    fn changes_after_horizon_are_censored() {
        let r = detect_exit_time(&[0.0, 4.0, 8.0], &[5, 5, 4], 5, 6.0).unwrap();
        assert!(r.censored);
        assert_eq!(r.t_exit, 6.0);
    }
}
