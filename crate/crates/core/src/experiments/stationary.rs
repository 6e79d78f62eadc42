use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Settings;
use crate::analysis::{LocalWaveNumbers, WaveNumberHistogram};
use crate::error::{invalid, Error, Result};
use crate::integrator::Simulator;
use crate::model::FieldState;
use crate::pattern::{periodic_pattern, PatternRequest};

/// Realisations simulated concurrently before their histograms are summed;
/// bounds memory while keeping the summation order fixed.
const CHUNK: usize = 16;

/// Observation times and per-time histogram frequencies of one realisation.
type Observed = (Vec<f64>, Vec<Vec<f64>>);

/// Initial condition of a stationary-distribution run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum InitSpec {
    /// Vegetated homogeneous state plus a small Gaussian perturbation.
    Homogeneous,
    /// Steady pattern with the given number of pulses.
    Pattern(usize),
}

impl fmt::Display for InitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitSpec::Homogeneous => write!(f, "homogeneous"),
            InitSpec::Pattern(n) => write!(f, "pattern:{n}"),
        }
    }
}

impl FromStr for InitSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "homogeneous" {
            return Ok(InitSpec::Homogeneous);
        }
        s.strip_prefix("pattern:")
            .and_then(|n| n.parse().ok())
            .map(InitSpec::Pattern)
            .ok_or_else(|| invalid("init", format!("expected `homogeneous` or `pattern:<n>`, got `{s}`")))
    }
}

impl TryFrom<String> for InitSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<InitSpec> for String {
    fn from(s: InitSpec) -> String {
        s.to_string()
    }
}

/// Ensemble-averaged local-wave-number histograms over time.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryRun {
    pub a: f64,
    pub sigma: f64,
    pub init: InitSpec,
    pub iterations: usize,
    pub times: Vec<f64>,
    pub histograms: Vec<WaveNumberHistogram>,
}

impl StationaryRun {
    /// Mean local wave number of the averaged histogram at every time.
    pub fn means(&self) -> Vec<f64> {
        self.histograms.iter().map(|h| h.mean()).collect()
    }

    pub fn stds(&self) -> Vec<f64> {
        self.histograms.iter().map(|h| h.std()).collect()
    }

    pub fn final_mean(&self) -> Option<f64> {
        self.histograms.last().map(|h| h.mean())
    }
}

fn initial_state(settings: &Settings, a: f64, init: InitSpec, seed: u64) -> Result<FieldState> {
    let params = settings.params(a, 0.0)?;
    match init {
        InitSpec::Homogeneous => settings.perturbed_homogeneous(&params, seed),
        InitSpec::Pattern(n) => Ok(periodic_pattern(&PatternRequest {
            params,
            n,
            grid: settings.grid,
        })?
        .0),
    }
}

/// Run `iterations` realisations up to `t_max`, observing the normalised
/// local-wave-number histogram every `observe_stride`, and average the
/// histograms over realisations at each observation time.
pub fn run_stationary_distribution(
    settings: &Settings,
    a: f64,
    sigma: f64,
    t_max: f64,
    iterations: usize,
    init: InitSpec,
) -> Result<StationaryRun> {
    settings.validate()?;
    if iterations == 0 {
        return Err(invalid("iterations", "must be >= 1"));
    }
    let params = settings.params(a, sigma)?;
    let sim = Simulator::new(params, settings.grid, settings.xi, settings.schedule(t_max)?)?;
    let pattern = match init {
        InitSpec::Pattern(_) => Some(initial_state(settings, a, init, 0)?),
        InitSpec::Homogeneous => None,
    };
    let (k_min, k_max) = (settings.analysis.k_min, settings.analysis.k_max);
    let mut times: Vec<f64> = Vec::new();
    let mut sums: Vec<Vec<f64>> = Vec::new();
    let indices: Vec<usize> = (0..iterations).collect();
    for chunk in indices.chunks(CHUNK) {
        let runs: Vec<Result<Observed>> = chunk
            .par_iter()
            .map(|&i| {
                let seed = settings.seed(i);
                let start = match &pattern {
                    Some(p) => p.clone(),
                    None => initial_state(settings, a, init, seed)?,
                };
                let mut lwn = LocalWaveNumbers::new(&settings.grid, &settings.analysis)?;
                let mut t_obs = Vec::new();
                let mut hists = Vec::new();
                let mut obs = |t: f64, s: &FieldState| {
                    t_obs.push(t);
                    hists.push(lwn.histogram(&s.v).frequencies().to_vec());
                    std::ops::ControlFlow::Continue(())
                };
                sim.run(&start, seed, &mut [&mut obs])?;
                Ok((t_obs, hists))
            })
            .collect();
        for run in runs {
            let (t_obs, hists) = run?;
            if sums.is_empty() {
                times = t_obs;
                sums = vec![vec![0.0; k_max - k_min + 1]; times.len()];
            }
            for (acc, h) in sums.iter_mut().zip(&hists) {
                for (s, f) in acc.iter_mut().zip(h) {
                    *s += f;
                }
            }
        }
    }
    let inv = 1.0 / iterations as f64;
    let histograms = sums
        .into_iter()
        .map(|mut acc| {
            acc.iter_mut().for_each(|s| *s *= inv);
            WaveNumberHistogram::from_frequencies(k_min, acc)
        })
        .collect();
    Ok(StationaryRun {
        a,
        sigma,
        init,
        iterations,
        times,
        histograms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_spec_round_trip() {
        for spec in [InitSpec::Homogeneous, InitSpec::Pattern(19)] {
            assert_eq!(spec.to_string().parse::<InitSpec>().unwrap(), spec);
        }
        assert!("pattern:x".parse::<InitSpec>().is_err());
        assert!("flat".parse::<InitSpec>().is_err());
    }
}
