use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{linear_fit, mean_std, Fit};
use super::Settings;
use crate::analysis::ExitDetector;
use crate::error::{invalid, Error, Result};
use crate::integrator::Simulator;
use crate::model::FieldState;
use crate::pattern::{periodic_pattern, PatternRequest};

/// First exit time of one realisation started on an `k_init`-pulse pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitRecord {
    pub seed: u64,
    pub a: f64,
    pub k_init: usize,
    pub sigma: f64,
    pub t_exit: f64,
    pub censored: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub a: f64,
    pub k: usize,
    pub sigma: f64,
    /// Censored realisations enter at `t_max`.
    pub mean: f64,
    pub std: f64,
    pub censored_fraction: f64,
    pub iterations: usize,
}

/// Cell of an exit-time map for which no pattern could be generated.
#[derive(Debug, Clone, PartialEq)]
pub struct MissingCell {
    pub a: f64,
    pub k: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExitMap {
    pub records: Vec<ExitRecord>,
    pub summaries: Vec<EnsembleSummary>,
    pub missing: Vec<MissingCell>,
}

/// Aggregate records of one cell. Fails on an empty slice.
pub fn summarize(records: &[ExitRecord]) -> Result<EnsembleSummary> {
    let first = records.first().ok_or(Error::EmptySeries)?;
    let times: Vec<f64> = records.iter().map(|r| r.t_exit).collect();
    let (mean, std) = mean_std(&times).ok_or(Error::EmptySeries)?;
    let censored = records.iter().filter(|r| r.censored).count();
    Ok(EnsembleSummary {
        a: first.a,
        k: first.k_init,
        sigma: first.sigma,
        mean,
        std,
        censored_fraction: censored as f64 / records.len() as f64,
        iterations: records.len(),
    })
}

/// Group records by `(a, k_init, sigma)` and summarise each group, ordered by
/// `a`, then `k`, then `sigma`. Record order within a group does not matter
/// beyond floating-point summation order, which follows the seed.
pub fn summarize_cells(records: &[ExitRecord]) -> Vec<EnsembleSummary> {
    let mut cells: BTreeMap<(u64, usize, u64), Vec<ExitRecord>> = BTreeMap::new();
    for r in records {
        cells
            .entry((ordered_bits(r.a), r.k_init, ordered_bits(r.sigma)))
            .or_default()
            .push(*r);
    }
    cells
        .into_values()
        .map(|mut group| {
            group.sort_by_key(|r| r.seed);
            summarize(&group).expect("groups are non-empty")
        })
        .collect()
}

/// Order-preserving key for finite floats.
fn ordered_bits(x: f64) -> u64 {
    let bits = x.to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

fn generate(settings: &Settings, a: f64, k: usize) -> Result<FieldState> {
    let params = settings.params(a, 0.0)?;
    let (state, _) = periodic_pattern(&PatternRequest {
        params,
        n: k,
        grid: settings.grid,
    })?;
    Ok(state)
}

fn exit_runs(
    settings: &Settings,
    pattern: &FieldState,
    a: f64,
    k: usize,
    sigma: f64,
    iterations: usize,
    t_max: f64,
) -> Result<Vec<ExitRecord>> {
    let params = settings.params(a, sigma)?;
    let probe = ExitDetector::new(&settings.grid, &settings.analysis, k as i64, t_max)?;
    let t_end = t_max + probe.lookahead(settings.observe_stride);
    let sim = Arc::new(Simulator::new(
        params,
        settings.grid,
        settings.xi,
        settings.schedule(t_end)?,
    )?);
    (0..iterations)
        .into_par_iter()
        .map(|i| {
            let seed = settings.seed(i);
            let mut det = ExitDetector::new(&settings.grid, &settings.analysis, k as i64, t_max)?;
            sim.run(pattern, seed, &mut [&mut det])?;
            let exit = det.result()?;
            Ok(ExitRecord {
                seed,
                a,
                k_init: k,
                sigma,
                t_exit: exit.t_exit,
                censored: exit.censored,
            })
        })
        .collect()
}

fn check_horizon(t_max: f64) -> Result<()> {
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(invalid("t_max", format!("must be > 0, got {t_max}")));
    }
    Ok(())
}

/// `iterations` realisations at every `sigma`, all started from the same
/// `k`-pulse pattern at rainfall `a`.
pub fn run_exit_ensemble(
    settings: &Settings,
    a: f64,
    k: usize,
    sigmas: &[f64],
    iterations: usize,
    t_max: f64,
) -> Result<Vec<ExitRecord>> {
    settings.validate()?;
    check_horizon(t_max)?;
    let pattern = generate(settings, a, k)?;
    let mut out = Vec::with_capacity(sigmas.len() * iterations);
    for &sigma in sigmas {
        out.extend(exit_runs(settings, &pattern, a, k, sigma, iterations, t_max)?);
    }
    Ok(out)
}

/// Exit-time statistics over an `(a, k)` grid at fixed `sigma`. Cells whose
/// pattern cannot be generated are reported in `missing`.
pub fn run_exit_time_map(
    settings: &Settings,
    a_grid: &[f64],
    k_grid: &[usize],
    sigma: f64,
    iterations: usize,
    t_max: f64,
) -> Result<ExitMap> {
    settings.validate()?;
    check_horizon(t_max)?;
    let cells: Vec<(f64, usize)> = a_grid
        .iter()
        .flat_map(|&a| k_grid.iter().map(move |&k| (a, k)))
        .collect();
    let patterns: Vec<Result<FieldState>> = cells.par_iter().map(|&(a, k)| generate(settings, a, k)).collect();
    let mut records = Vec::new();
    let mut missing = Vec::new();
    for (&(a, k), pattern) in cells.iter().zip(patterns) {
        match pattern {
            Ok(p) => records.extend(exit_runs(settings, &p, a, k, sigma, iterations, t_max)?),
            Err(
                e @ (Error::PatternDoesNotExist { .. } | Error::WrongWaveNumber { .. } | Error::NewtonDiverged { .. }),
            ) => missing.push(MissingCell {
                a,
                k,
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    let summaries = summarize_cells(&records);
    Ok(ExitMap {
        records,
        summaries,
        missing,
    })
}

/// Fit of `log10(max_k mean exit time)` against `a`. Only rainfall values
/// whose maximising cell has at most half of its realisations censored are
/// used; at least three are required.
pub fn fit_exit_vs_a(summaries: &[EnsembleSummary]) -> Result<Fit> {
    let mut best: BTreeMap<u64, EnsembleSummary> = BTreeMap::new();
    for s in summaries {
        let e = best.entry(ordered_bits(s.a)).or_insert(*s);
        if s.mean > e.mean {
            *e = *s;
        }
    }
    let (x, y): (Vec<f64>, Vec<f64>) = best
        .values()
        .filter(|s| s.censored_fraction <= 0.5 && s.mean > 0.0)
        .map(|s| (s.a, s.mean.log10()))
        .unzip();
    if x.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: x.len(),
        });
    }
    linear_fit(&x, &y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaFit {
    /// `slope` is the exponent `alpha` in `E[T_exit] ~ sigma^alpha`.
    pub fit: Fit,
    pub used: Vec<EnsembleSummary>,
    /// Noise levels dropped because more than half their runs were censored.
    pub excluded: Vec<f64>,
}

/// Log-log fit of mean exit time against `sigma` for records of one `(a, k)`
/// cell.
pub fn fit_exit_vs_sigma(records: &[ExitRecord]) -> Result<SigmaFit> {
    let summaries = summarize_cells(records);
    if let Some(first) = summaries.first() {
        if summaries.iter().any(|s| s.a != first.a || s.k != first.k) {
            return Err(invalid("records", "must share a single (a, k_init) cell"));
        }
    }
    let (used, dropped): (Vec<_>, Vec<_>) = summaries
        .into_iter()
        .partition(|s| s.censored_fraction <= 0.5 && s.mean > 0.0 && s.sigma > 0.0);
    if used.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: used.len(),
        });
    }
    let x: Vec<f64> = used.iter().map(|s| s.sigma.log10()).collect();
    let y: Vec<f64> = used.iter().map(|s| s.mean.log10()).collect();
    Ok(SigmaFit {
        fit: linear_fit(&x, &y)?,
        used,
        excluded: dropped.iter().map(|s| s.sigma).collect(),
    })
}
