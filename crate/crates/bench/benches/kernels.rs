use std::sync::Arc;

use busse_core::{
    build_spectrum, periodic_pattern, rng_from_seed, AnalysisConfig, Grid1D, LocalWaveNumbers, ModelParams,
    NoiseConfig, NoiseSampler, PatternRequest, PulseCounter, Simulator, StepSchedule,
};
use criterion::{black_box, criterion_group, criterion_main, Criterion};

fn grid() -> Grid1D {
    Grid1D::new(250.0, 4096).unwrap()
}

fn pattern_v(n: usize) -> Vec<f64> {
    let req = PatternRequest {
        params: ModelParams::reference(2.0, 0.0),
        n,
        grid: grid(),
    };
    periodic_pattern(&req).unwrap().0.v
}

fn step(c: &mut Criterion) {
    let grid = grid();
    let req = PatternRequest {
        params: ModelParams::reference(2.0, 0.0),
        n: 30,
        grid,
    };
    let start = periodic_pattern(&req).unwrap().0;
    let schedule = StepSchedule::new(0.05, 1.0, 1.0).unwrap();
    let sim = Simulator::new(ModelParams::reference(2.0, 0.2), grid, 0.1, schedule).unwrap();
    let mut stepper = sim.stepper().unwrap();
    let mut rng = rng_from_seed(1);
    let mut state = start.clone();
    c.bench_function("stochastic step N=4096", |b| {
        b.iter(|| {
            stepper.step(&mut state, &mut rng).unwrap();
            if state.t > 50.0 {
                state = start.clone();
            }
        })
    });
}

fn noise(c: &mut Criterion) {
    let spectrum = Arc::new(build_spectrum(&NoiseConfig::new(0.1, 0).unwrap(), &grid()));
    let mut sampler = NoiseSampler::new(spectrum);
    let mut rng = rng_from_seed(2);
    let mut out = vec![0.0; 4096];
    c.bench_function("noise increment N=4096", |b| {
        b.iter(|| sampler.sample_into(&mut rng, black_box(&mut out)))
    });
}

fn analysis(c: &mut Criterion) {
    let grid = grid();
    let cfg = AnalysisConfig::for_grid(&grid);
    let v = pattern_v(30);
    let mut counter = PulseCounter::new(&grid, &cfg).unwrap();
    c.bench_function("count pulses", |b| b.iter(|| counter.count(black_box(&v))));
    let mut lwn = LocalWaveNumbers::new(&grid, &cfg).unwrap();
    c.bench_function("local wave-number histogram", |b| {
        b.iter(|| lwn.histogram(black_box(&v)))
    });
}

criterion_group! {
    name = kernels;
    config = Criterion::default().sample_size(20);
    targets = step, noise, analysis
}
criterion_main!(kernels);
