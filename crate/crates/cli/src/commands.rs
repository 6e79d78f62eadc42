use std::fmt;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use busse_core::experiments::{
    fit_exit_vs_a, fit_exit_vs_sigma, run_exit_ensemble, run_exit_time_map, run_from_uniform, run_gap_fill,
    run_stationary_distribution, write_exit_records, write_fits, write_gap_fill, write_histograms, write_selection,
    FitRow, HistogramRow, InitSpec, SelectionSummary,
};
use busse_core::linear::{leading_growth_rate, most_unstable_rate, pulses_for_angular, turing_point};
use busse_core::noise::noise_diagnostics;
use busse_core::pattern::steady_residual;
use busse_core::snapshot::{write_record, SnapshotWriter};
use busse_core::{
    build_spectrum, most_unstable_mode, periodic_pattern, BalloonBoundary, Error, FieldState, Linearization,
    LocalWaveNumbers, NoiseConfig, PatternRequest, PulseCounter, Simulator,
};

use crate::config::RunConfig;

#[derive(Debug)]
pub enum Failure {
    Core(Error),
    Io(std::io::Error),
    /// The command ran but its checks did not pass.
    Check(String),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Io(e) => write!(f, "{e}"),
            Failure::Check(s) => write!(f, "{s}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

type Outcome = Result<String, Failure>;

/// Run `command`, writing results below `out`, and return the summary line.
pub fn run(command: &str, cfg: &RunConfig, out: &Path) -> Outcome {
    if command == "pattern" {
        return pattern(cfg, out);
    }
    fs::create_dir_all(out)?;
    fs::write(out.join("effective_config.toml"), cfg.to_toml())?;
    match command {
        "simulate" => simulate(cfg, out),
        "dispersion" => dispersion(cfg, out),
        "exit-map" => exit_map(cfg, out),
        "exit-sigma" => exit_sigma(cfg, out),
        "stationary" => stationary(cfg, out),
        "from-uniform" => from_uniform(cfg, out),
        "gap-fill" => gap_fill(cfg, out),
        "validate-noise" => validate_noise(cfg, out),
        other => unreachable!("unknown command {other}"),
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text)?;
    Ok(())
}

fn boundary(cfg: &RunConfig) -> Result<Option<BalloonBoundary>, Failure> {
    let path = &cfg.experiment.boundary;
    if path.is_empty() {
        return Ok(None);
    }
    Ok(Some(BalloonBoundary::load(Path::new(path))?))
}

fn initial_state(cfg: &RunConfig, spec: InitSpec) -> Result<FieldState, Failure> {
    let settings = cfg.settings()?;
    let params = cfg.params()?.with_sigma(0.0);
    Ok(match spec {
        InitSpec::Homogeneous => settings.perturbed_homogeneous(&params, cfg.base_seed)?,
        InitSpec::Pattern(n) => {
            periodic_pattern(&PatternRequest {
                params,
                n,
                grid: settings.grid,
            })?
            .0
        }
    })
}

fn simulate(cfg: &RunConfig, out: &Path) -> Outcome {
    let settings = cfg.settings()?;
    let grid = settings.grid;
    let start = initial_state(cfg, cfg.init()?)?;
    let sim = Simulator::new(cfg.params()?, grid, settings.xi, cfg.schedule()?)?;

    let mut counter = PulseCounter::new(&grid, &settings.analysis)?;
    let mut lwn = LocalWaveNumbers::new(&grid, &settings.analysis)?;
    let mut series = String::from("t,pulses,predominant,average_local\n");
    let mut failure = None;
    let mut record = |t: f64, s: &FieldState| {
        let predominant = match busse_core::predominant_wavenumber(&s.v, &grid, &settings.analysis) {
            Ok(k) => k.to_string(),
            // a bare state has no dominant mode
            Err(Error::NoSpectralContent) => "0".into(),
            Err(e) => {
                failure = Some(e);
                return ControlFlow::Break(());
            }
        };
        let _ = writeln!(
            series,
            "{t},{},{predominant},{}",
            counter.count(&s.v),
            lwn.histogram(&s.v).rounded_mean()
        );
        ControlFlow::Continue(())
    };
    let outcome = if cfg.experiment.snapshots {
        let file = BufWriter::new(File::create(out.join("snapshots.bin"))?);
        let mut snaps = SnapshotWriter::new(file);
        let outcome = sim.run(&start, cfg.base_seed, &mut [&mut record, &mut snaps])?;
        snaps.finish()?;
        outcome
    } else {
        sim.run(&start, cfg.base_seed, &mut [&mut record])?
    };
    if let Some(e) = failure {
        return Err(e.into());
    }
    write_text(&out.join("series.csv"), &series)?;
    let mut f = BufWriter::new(File::create(out.join("final.bin"))?);
    write_record(&mut f, &outcome.state)?;
    f.flush()?;
    let pulses = PulseCounter::new(&grid, &settings.analysis)?.count(&outcome.state.v);
    Ok(format!(
        "simulate: a={} sigma={} t={} steps={} observations={} final pulses={pulses}",
        cfg.model.a, cfg.model.sigma, outcome.state.t, outcome.steps, outcome.observations
    ))
}

fn pattern(cfg: &RunConfig, out: &Path) -> Outcome {
    let (file, config_path) = if out.extension().is_some_and(|e| e == "bin") {
        if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        (out.to_path_buf(), out.with_extension("config.toml"))
    } else {
        fs::create_dir_all(out)?;
        (out.join("pattern.bin"), out.join("effective_config.toml"))
    };
    fs::write(&config_path, cfg.to_toml())?;
    let grid = cfg.grid()?;
    let params = cfg.params()?.with_sigma(0.0);
    let n = cfg.experiment.n;
    let (state, report) = periodic_pattern(&PatternRequest { params, n, grid })?;
    let mut f = BufWriter::new(File::create(&file)?);
    write_record(&mut f, &state)?;
    f.flush()?;
    Ok(format!(
        "pattern: a={} n={n} residual={:.3e} newton_iterations={} -> {}",
        params.a,
        steady_residual(&state, &params, &grid).max(report.residual),
        report.iterations,
        file.display()
    ))
}

fn dispersion(cfg: &RunConfig, out: &Path) -> Outcome {
    let params = cfg.params()?;
    let half = cfg.grid.half_length;
    let lin = Linearization::at(&params)?;
    let mode = most_unstable_mode(&lin);
    let k_hi = mode.map_or(1.0, |m| 3.0 * m.k);
    let mut csv = String::from("k,pulses,growth_rate\n");
    for i in 0..=600 {
        let k = k_hi * i as f64 / 600.0;
        let _ = writeln!(
            csv,
            "{k},{},{}",
            pulses_for_angular(k, half),
            leading_growth_rate(k, &lin)
        );
    }
    write_text(&out.join("dispersion.csv"), &csv)?;
    // scan upwards for the first rainfall with a decaying most unstable mode
    let lo = 2.2 * params.m;
    let hi = (1..=400)
        .map(|i| lo + 0.05 * i as f64)
        .find(|&a| most_unstable_rate(&params, a).is_some_and(|r| r < 0.0))
        .unwrap_or(lo + 20.0);
    let bracket = (hi - 0.05, hi);
    let turing = match turing_point(&params, bracket) {
        Ok(tp) => format!("a_T={:.6} (k_T={:.6})", tp.a, tp.k),
        Err(e) => format!("a_T not found: {e}"),
    };
    Ok(match mode {
        Some(m) => format!(
            "dispersion: a={} k_mu={:.6} (pulses {:.2}, rounded {}) lambda_mu={:.6e} {turing}",
            params.a,
            m.k,
            pulses_for_angular(m.k, half),
            pulses_for_angular(m.k, half).round(),
            m.growth_rate
        ),
        None => format!("dispersion: a={} no most unstable mode; {turing}", params.a),
    })
}

fn exit_map(cfg: &RunConfig, out: &Path) -> Outcome {
    let settings = cfg.settings()?;
    let e = &cfg.experiment;
    let map = run_exit_time_map(&settings, &e.a_grid, &e.k_grid, cfg.model.sigma, e.iterations, e.t_max)?;
    write_exit_records(&out.join("exit_records.csv"), &map.records)?;
    let balloon = boundary(cfg)?;
    let mut table = String::from("a,k,sigma,mean,std,censored_fraction,iterations,inside_balloon\n");
    for s in &map.summaries {
        let inside = balloon
            .as_ref()
            .map_or(String::new(), |b| b.contains(s.a, s.k as f64).to_string());
        let _ = writeln!(
            table,
            "{},{},{},{},{},{},{},{inside}",
            s.a, s.k, s.sigma, s.mean, s.std, s.censored_fraction, s.iterations
        );
    }
    write_text(&out.join("summary.csv"), &table)?;
    print!("{table}");
    for m in &map.missing {
        println!("missing cell a={} k={}: {}", m.a, m.k, m.reason);
    }
    let fit = fit_exit_vs_a(&map.summaries);
    let rows: Vec<FitRow> = fit.iter().map(|f| FitRow::new("log10_max_exit_vs_a", f)).collect();
    write_fits(&out.join("fits.csv"), &rows)?;
    let fit_note = match fit {
        Ok(f) => format!(" slope={:.4} r2={:.4}", f.slope, f.r2),
        Err(_) => String::new(),
    };
    Ok(format!(
        "exit-map: {} cells, {} records, {} missing{fit_note}",
        map.summaries.len(),
        map.records.len(),
        map.missing.len()
    ))
}

fn exit_sigma(cfg: &RunConfig, out: &Path) -> Outcome {
    let settings = cfg.settings()?;
    let e = &cfg.experiment;
    let records = run_exit_ensemble(&settings, cfg.model.a, e.n, &e.sigmas, e.iterations, e.t_max)?;
    write_exit_records(&out.join("exit_records.csv"), &records)?;
    let fit = fit_exit_vs_sigma(&records);
    let rows: Vec<FitRow> = fit
        .iter()
        .map(|f| FitRow::new("log10_exit_vs_log10_sigma", &f.fit))
        .collect();
    write_fits(&out.join("fits.csv"), &rows)?;
    Ok(match fit {
        Ok(f) => {
            for s in &f.excluded {
                eprintln!("warning: sigma={s} excluded (more than half of the runs censored)");
            }
            format!(
                "exit-sigma: a={} k={} alpha={:.3} +- {:.3} r2={:.4} ({} sigma values used)",
                cfg.model.a,
                e.n,
                f.fit.slope,
                f.fit.stderr,
                f.fit.r2,
                f.used.len()
            )
        }
        Err(err) => format!("exit-sigma: a={} k={} no fit: {err}", cfg.model.a, e.n),
    })
}

fn init_file_tag(spec: InitSpec) -> String {
    spec.to_string().replace(':', "-")
}

fn stationary(cfg: &RunConfig, out: &Path) -> Outcome {
    let settings = cfg.settings()?;
    let e = &cfg.experiment;
    let mut summary = String::from("init,a,t,mean,std\n");
    let mut finals = Vec::new();
    for spec in cfg.inits()? {
        let mut rows = Vec::new();
        for &a in &e.a_grid {
            let run = run_stationary_distribution(&settings, a, cfg.model.sigma, e.t_max, e.iterations, spec)?;
            rows.extend(HistogramRow::from_run(&run));
            for ((t, m), s) in run.times.iter().zip(run.means()).zip(run.stds()) {
                let _ = writeln!(summary, "{spec},{a},{t},{m},{s}");
            }
            finals.push(format!("{spec} a={a}: {:.3}", run.final_mean().unwrap_or(f64::NAN)));
        }
        let path: PathBuf = out.join(format!("histograms_{}.csv", init_file_tag(spec)));
        write_histograms(&path, &rows)?;
    }
    write_text(&out.join("stationary_summary.csv"), &summary)?;
    Ok(format!(
        "stationary: sigma={} final mean local wave number {}",
        cfg.model.sigma,
        finals.join(", ")
    ))
}

fn from_uniform(cfg: &RunConfig, out: &Path) -> Outcome {
    let settings = cfg.settings()?;
    let e = &cfg.experiment;
    let records = run_from_uniform(&settings, &e.a_grid, e.runs, cfg.schedule.t_end)?;
    write_selection(&out.join("selection.csv"), &records)?;
    let balloon = boundary(cfg)?;
    let mut parts = Vec::new();
    for &a in &e.a_grid {
        let summary = SelectionSummary::from_records(a, &records);
        let lin = Linearization::at(&cfg.params()?.with_a(a))?;
        let k_mu = most_unstable_mode(&lin).map(|m| pulses_for_angular(m.k, cfg.grid.half_length).round());
        let mut part = format!(
            "a={a}: mode={} k_mu={}",
            summary.mode().map_or("-".into(), |k| k.to_string()),
            k_mu.map_or("-".into(), |k| k.to_string())
        );
        if let Some(b) = &balloon {
            let inside = records
                .iter()
                .filter(|r| r.a == a && b.contains(a, r.k_final as f64))
                .count();
            let _ = write!(part, " inside={:.0}%", 100.0 * inside as f64 / summary.runs as f64);
        }
        parts.push(part);
    }
    Ok(format!("from-uniform: {} runs; {}", records.len(), parts.join("; ")))
}

fn gap_fill(cfg: &RunConfig, out: &Path) -> Outcome {
    let settings = cfg.settings()?;
    let run = run_gap_fill(
        &settings,
        cfg.model.a,
        cfg.model.sigma,
        cfg.experiment.n,
        cfg.schedule.t_end,
    )?;
    write_gap_fill(&out.join("gap_fill.csv"), &run)?;
    let fmt_t = |t: Option<f64>| t.map_or("none".into(), |t| t.to_string());
    Ok(format!(
        "gap-fill: a={} n={} average-local shift at t={} predominant shift at t={} pulse changes={}",
        run.a,
        run.n,
        fmt_t(run.average_local_shift()),
        fmt_t(run.predominant_shift()),
        run.pulse_changes().len()
    ))
}

fn validate_noise(cfg: &RunConfig, out: &Path) -> Outcome {
    let grid = cfg.grid()?;
    let spectrum = Arc::new(build_spectrum(&NoiseConfig::new(cfg.noise.xi, cfg.base_seed)?, &grid));
    let max_lag = 8.min(grid.len() - 1);
    let d = noise_diagnostics(&spectrum, cfg.experiment.samples, max_lag, cfg.base_seed)?;
    let q0 = d.covariance[0].2;
    let mut csv = String::from("lag,dx,empirical,kernel\n");
    let mut worst_off_lag: f64 = 0.0;
    for &(lag, emp, exact) in &d.covariance {
        let _ = writeln!(csv, "{lag},{},{emp},{exact}", lag as f64 * grid.spacing());
        if lag > 0 {
            worst_off_lag = worst_off_lag.max((emp - exact).abs());
        }
    }
    write_text(&out.join("noise_validation.csv"), &csv)?;
    let var_err = (d.variance() - q0).abs() / q0;
    let ok = var_err < 0.03 && worst_off_lag < 0.05 * q0 && d.lag1_autocorrelation.abs() < 0.01;
    let line = format!(
        "validate-noise: {} samples variance={:.4} (q(0)={q0:.4}, rel err {:.2}%) max off-lag error={:.4} lag-1 autocorrelation={:.2e} clamped={:.2e} -> {}",
        d.samples,
        d.variance(),
        100.0 * var_err,
        worst_off_lag,
        d.lag1_autocorrelation,
        spectrum.clamped_fraction(),
        if ok { "pass" } else { "FAIL" }
    );
    if ok {
        Ok(line)
    } else {
        Err(Failure::Check(line))
    }
}
