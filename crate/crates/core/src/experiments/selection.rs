use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Settings;
use crate::analysis::predominant_wavenumber;
use crate::error::{invalid, Result};
use crate::integrator::Simulator;

/// Final predominant wave number of one deterministic run started near the
/// homogeneous vegetated state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub seed: u64,
    pub a: f64,
    pub k_final: usize,
}

/// Outcome counts of the runs at one rainfall value.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionSummary {
    pub a: f64,
    pub runs: usize,
    /// `k -> number of runs ending with predominant wave number k`.
    pub counts: BTreeMap<usize, usize>,
}

impl SelectionSummary {
    pub fn from_records(a: f64, records: &[SelectionRecord]) -> Self {
        let mut counts = BTreeMap::new();
        for r in records.iter().filter(|r| r.a == a) {
            *counts.entry(r.k_final).or_insert(0) += 1;
        }
        Self {
            a,
            runs: counts.values().sum(),
            counts,
        }
    }

    /// Most frequent outcome (smallest `k` on ties).
    pub fn mode(&self) -> Option<usize> {
        let best = *self.counts.values().max()?;
        self.counts.iter().find(|(_, c)| **c == best).map(|(k, _)| *k)
    }

    pub fn max_count(&self) -> usize {
        self.counts.values().copied().max().unwrap_or(0)
    }
}

/// For every `a`, integrate `runs` noise-free realisations from the perturbed
/// homogeneous state up to `t_end` and classify the final state.
pub fn run_from_uniform(settings: &Settings, a_grid: &[f64], runs: usize, t_end: f64) -> Result<Vec<SelectionRecord>> {
    settings.validate()?;
    if runs == 0 {
        return Err(invalid("runs", "must be >= 1"));
    }
    let mut out = Vec::with_capacity(a_grid.len() * runs);
    for &a in a_grid {
        let params = settings.params(a, 0.0)?;
        let sim = Simulator::new(params, settings.grid, settings.xi, settings.schedule(t_end)?)?;
        let records: Result<Vec<SelectionRecord>> = (0..runs)
            .into_par_iter()
            .map(|i| {
                let seed = settings.seed(i);
                let start = settings.perturbed_homogeneous(&params, seed)?;
                let end = sim.run(&start, seed, &mut [])?.state;
                Ok(SelectionRecord {
                    seed,
                    a,
                    k_final: predominant_wavenumber(&end.v, &settings.grid, &settings.analysis)?,
                })
            })
            .collect();
        out.extend(records?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_counts_and_mode() {
        let r = |seed, a, k| SelectionRecord { seed, a, k_final: k };
        let recs = [r(0, 2.0, 30), r(1, 2.0, 29), r(2, 2.0, 30), r(3, 1.5, 7), r(4, 2.0, 29)];
        let s = SelectionSummary::from_records(2.0, &recs);
        assert_eq!(s.runs, 4);
        assert_eq!(s.mode(), Some(29));
        assert_eq!(s.max_count(), 2);
        assert_eq!(SelectionSummary::from_records(3.0, &recs).mode(), None);
    }
}
