//! Property suites shared by the `properties` and `acceptance` targets.
//!
//! Every suite runs a deterministic proptest runner so failures reproduce.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use busse_core::noise::rng_from_seed;
use busse_core::{
    build_spectrum, count_pulses, detect_exit_time, local_wavenumber_field, local_wavenumber_histogram,
    periodic_pattern, predominant_wavenumber, AnalysisConfig, FieldState, Grid1D, ModelParams, NoiseConfig,
    NoiseSampler, PatternRequest, Simulator, StepSchedule, WaveNumberHistogram,
};
use proptest::collection::vec;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestError, TestRng, TestRunner};

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn report<T: std::fmt::Debug>(r: Result<(), TestError<T>>) -> Result<(), String> {
    r.map_err(|e| e.to_string())
}

/// Smaller grid keeps the suites fast; the analysis defaults rescale with it.
pub fn small_grid() -> Grid1D {
    Grid1D::new(250.0, 1024).unwrap()
}

/// A positive, pulse-like signal built from up to three modes.
fn signal(grid: &Grid1D, modes: &[(usize, f64, f64)]) -> Vec<f64> {
    (0..grid.len())
        .map(|i| {
            let x = grid.x(i);
            let s: f64 = modes
                .iter()
                .map(|&(k, amp, phase)| amp * (PI * k as f64 * x / grid.half_length() + phase).cos())
                .sum();
            2.0 + s
        })
        .collect()
}

fn modes() -> impl Strategy<Value = Vec<(usize, f64, f64)>> {
    vec((8usize..60, 0.2f64..1.5, 0.0f64..(2.0 * PI)), 1..=3)
}

fn rotate(v: &[f64], s: usize) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|i| v[(i + n - s) % n]).collect()
}

/// Circular shifts commute with the local wave-number field and leave the
/// global classifiers unchanged.
pub fn translation_equivariance(cases: u32) -> Result<(), String> {
    let grid = small_grid();
    let cfg = AnalysisConfig::for_grid(&grid);
    report(runner(cases).run(&(modes(), 0usize..1024), |(m, shift)| {
        let v = signal(&grid, &m);
        let w = rotate(&v, shift);
        let fv = local_wavenumber_field(&v, &grid, &cfg).unwrap();
        let fw = local_wavenumber_field(&w, &grid, &cfg).unwrap();
        prop_assert_eq!(rotate_usize(&fv, shift), fw);
        prop_assert_eq!(
            predominant_wavenumber(&v, &grid, &cfg).unwrap(),
            predominant_wavenumber(&w, &grid, &cfg).unwrap()
        );
        prop_assert_eq!(
            count_pulses(&v, &grid, &cfg).unwrap(),
            count_pulses(&w, &grid, &cfg).unwrap()
        );
        let hv = local_wavenumber_histogram(&v, &grid, &cfg).unwrap();
        let hw = local_wavenumber_histogram(&w, &grid, &cfg).unwrap();
        prop_assert_eq!(hv.frequencies(), hw.frequencies());
        Ok(())
    }))
}

fn rotate_usize(v: &[usize], s: usize) -> Vec<usize> {
    let n = v.len();
    (0..n).map(|i| v[(i + n - s) % n]).collect()
}

/// Multiplying by `c > 0` leaves the argmax-based classifiers unchanged.
pub fn scale_invariance(cases: u32) -> Result<(), String> {
    let grid = small_grid();
    let cfg = AnalysisConfig::for_grid(&grid);
    report(runner(cases).run(&(modes(), -2.0f64..2.0), |(m, log_c)| {
        let c = 10f64.powf(log_c);
        let v = signal(&grid, &m);
        let w: Vec<f64> = v.iter().map(|x| c * x).collect();
        prop_assert_eq!(
            predominant_wavenumber(&v, &grid, &cfg).unwrap(),
            predominant_wavenumber(&w, &grid, &cfg).unwrap()
        );
        prop_assert_eq!(
            local_wavenumber_field(&v, &grid, &cfg).unwrap(),
            local_wavenumber_field(&w, &grid, &cfg).unwrap()
        );
        Ok(())
    }))?;

    // the pulse count is only kept when the scaled pattern still clears the prominence
    let req = PatternRequest {
        params: ModelParams::reference(2.0, 0.0),
        n: 24,
        grid,
    };
    let v = periodic_pattern(&req).map_err(|e| e.to_string())?.0.v;
    let w: Vec<f64> = v.iter().map(|x| 10.0 * x).collect();
    let (cv, cw) = (
        count_pulses(&v, &grid, &cfg).unwrap(),
        count_pulses(&w, &grid, &cfg).unwrap(),
    );
    if cv != 24 || cw != 24 {
        return Err(format!("pulse counts {cv} and {cw} after scaling, expected 24"));
    }
    Ok(())
}

/// Histograms are normalised, their mean lies inside the occupied range and
/// averaging does not depend on order.
pub fn histogram_normalization(cases: u32) -> Result<(), String> {
    let grid = small_grid();
    let cfg = AnalysisConfig::for_grid(&grid);
    report(runner(cases).run(&modes(), |m| {
        let h = local_wavenumber_histogram(&signal(&grid, &m), &grid, &cfg).unwrap();
        prop_assert!((h.total() - 1.0).abs() < 1e-12, "total {}", h.total());
        let lo = h.nonzero().next().unwrap().0 as f64;
        let hi = h.nonzero().last().unwrap().0 as f64;
        prop_assert!(h.mean() >= lo - 1e-9 && h.mean() <= hi + 1e-9);
        Ok(())
    }))?;
    let fields = vec(vec(3usize..=40, 1..200), 2..6);
    report(runner(cases).run(&fields, |fields| {
        let hists: Vec<_> = fields
            .iter()
            .map(|f| WaveNumberHistogram::from_field(f, 3, 40))
            .collect();
        let avg = WaveNumberHistogram::average(&hists).unwrap();
        prop_assert!((avg.total() - 1.0).abs() < 1e-12);
        let reversed: Vec<_> = hists.iter().rev().cloned().collect();
        let rev = WaveNumberHistogram::average(&reversed).unwrap();
        for (a, b) in avg.frequencies().iter().zip(rev.frequencies()) {
            prop_assert!((a - b).abs() < 1e-15);
        }
        Ok(())
    }))
}

/// Raising `t_max` never lowers the ensemble mean exit time, and censored
/// realisations sit exactly at `t_max`.
pub fn censoring_monotonicity(cases: u32) -> Result<(), String> {
    let series = vec(vec(prop_oneof![8 => Just(0i64), 1 => -1i64..=1], 10..80), 1..12);
    report(
        runner(cases).run(&(series, 1.0f64..300.0, 0.0f64..300.0), |(runs, t1, extra)| {
            let t2 = t1 + extra;
            let mean = |t_max: f64| -> Result<f64, TestCaseError> {
                let mut sum = 0.0;
                for counts in &runs {
                    let times: Vec<f64> = (0..counts.len()).map(|i| 4.0 * i as f64).collect();
                    let e = detect_exit_time(&times, counts, 0, t_max).unwrap();
                    prop_assert!(e.t_exit >= 0.0 && e.t_exit <= t_max);
                    if e.censored {
                        prop_assert_eq!(e.t_exit, t_max);
                    }
                    sum += e.t_exit;
                }
                Ok(sum / runs.len() as f64)
            };
            let (m1, m2) = (mean(t1)?, mean(t2)?);
            prop_assert!(m2 >= m1, "mean {} at t_max {} but {} at {}", m1, t1, m2, t2);
            Ok(())
        }),
    )
}

/// The same seed reproduces noise increments and whole runs bit for bit.
pub fn seed_determinism(cases: u32) -> Result<(), String> {
    let grid = Grid1D::new(250.0, 256).unwrap();
    let spectrum = Arc::new(build_spectrum(&NoiseConfig::new(0.1, 0).unwrap(), &grid));
    let schedule = StepSchedule::new(0.05, 2.0, 1.0).unwrap();
    let sim = Simulator::new(ModelParams::reference(2.0, 0.05), grid, 0.1, schedule).unwrap();
    let start = FieldState::new(
        (0..256).map(|i| 0.5 + 0.1 * (i as f64 * 0.3).sin()).collect(),
        (0..256).map(|i| 2.0 + (i as f64 * 0.2).cos()).collect(),
        0.0,
    )
    .unwrap();
    report(runner(cases).run(&any::<u64>(), |seed| {
        let draw = |s: u64| {
            let mut sampler = NoiseSampler::new(Arc::clone(&spectrum));
            let mut rng = rng_from_seed(s);
            let mut out = vec![0.0; 256];
            sampler.sample_into(&mut rng, &mut out);
            sampler.sample_into(&mut rng, &mut out);
            out
        };
        let a = draw(seed);
        prop_assert!(a.iter().zip(draw(seed)).all(|(x, y)| x.to_bits() == y.to_bits()));
        prop_assert!(a != draw(seed.wrapping_add(1)));

        let r1 = sim.run(&start, seed, &mut []).unwrap().state;
        let r2 = sim.run(&start, seed, &mut []).unwrap().state;
        prop_assert!(r1.v.iter().zip(&r2.v).all(|(x, y)| x.to_bits() == y.to_bits()));
        prop_assert!(r1.u.iter().zip(&r2.u).all(|(x, y)| x.to_bits() == y.to_bits()));
        let r3 = sim.run(&start, seed.wrapping_add(1), &mut []).unwrap().state;
        prop_assert!(r1.v != r3.v);
        Ok(())
    }))
}
