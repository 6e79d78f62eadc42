//! CSV schemas:
//!
//! * `exit_records.csv`: `seed,a,k_init,sigma,t_exit,censored`
//! * `histograms.csv`: `t,a,sigma,k,frequency` (non-empty bins only)
//! * `fits.csv`: `name,slope,intercept,r2,stderr`
//! * `selection.csv`: `seed,a,k_final`
//! * `gap_fill.csv`: `t,pulses,predominant,average_local`
//!
//! Floats are written in shortest round-trip form, so re-reading a file
//! reproduces the values bit for bit.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::exit::ExitRecord;
use super::gapfill::GapFillRun;
use super::selection::SelectionRecord;
use super::stationary::StationaryRun;
use super::stats::Fit;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub t: f64,
    pub a: f64,
    pub sigma: f64,
    pub k: usize,
    pub frequency: f64,
}

impl HistogramRow {
    pub fn from_run(run: &StationaryRun) -> Vec<HistogramRow> {
        run.times
            .iter()
            .zip(&run.histograms)
            .flat_map(|(&t, h)| {
                h.nonzero().map(move |(k, frequency)| HistogramRow {
                    t,
                    a: run.a,
                    sigma: run.sigma,
                    k,
                    frequency,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub name: String,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub stderr: f64,
}

impl FitRow {
    pub fn new(name: impl Into<String>, fit: &Fit) -> Self {
        Self {
            name: name.into(),
            slope: fit.slope,
            intercept: fit.intercept,
            r2: fit.r2,
            stderr: fit.stderr,
        }
    }
}

#[derive(Serialize)]
struct GapFillRow {
    t: f64,
    pulses: usize,
    predominant: usize,
    average_local: i64,
}

fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = T>) -> Result<()> {
    // the header is written by hand so that empty tables still carry it
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<T>, _>>()?)
}

pub fn write_exit_records(path: &Path, records: &[ExitRecord]) -> Result<()> {
    write_rows(path, &["seed", "a", "k_init", "sigma", "t_exit", "censored"], records)
}

pub fn read_exit_records(path: &Path) -> Result<Vec<ExitRecord>> {
    read_rows(path)
}

pub fn write_histograms(path: &Path, rows: &[HistogramRow]) -> Result<()> {
    write_rows(path, &["t", "a", "sigma", "k", "frequency"], rows)
}

pub fn read_histograms(path: &Path) -> Result<Vec<HistogramRow>> {
    read_rows(path)
}

pub fn write_fits(path: &Path, rows: &[FitRow]) -> Result<()> {
    write_rows(path, &["name", "slope", "intercept", "r2", "stderr"], rows)
}

pub fn read_fits(path: &Path) -> Result<Vec<FitRow>> {
    read_rows(path)
}

pub fn write_selection(path: &Path, records: &[SelectionRecord]) -> Result<()> {
    write_rows(path, &["seed", "a", "k_final"], records)
}

pub fn write_gap_fill(path: &Path, run: &GapFillRun) -> Result<()> {
    let rows = (0..run.times.len()).map(|i| GapFillRow {
        t: run.times[i],
        pulses: run.pulses[i],
        predominant: run.predominant[i],
        average_local: run.average_local[i],
    });
    write_rows(path, &["t", "pulses", "predominant", "average_local"], rows)
}
