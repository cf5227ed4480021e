//! Sequential against rayon execution of the residual, the normal
//! equations and a complete fit, on a cantilever-sized image.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use vic_core::beam_oracle::CantileverSpec;
use vic_core::correlation::Correlator;
use vic_core::init::{fit_series, trace, TraceOptions};
use vic_core::synth::{Profile, Scene, SceneCurve};
use vic_core::{build_mesh, fit, CurvatureBasis, Exec, FitOptions, GradientForm, ParamId, Vec2};

fn scene() -> Scene {
    Scene {
        schema_version: 1,
        width: 1000,
        height: 500,
        fiber_half_width: 3.0,
        profile: Profile::Gaussian,
        background: 0.1,
        noise_sigma: 0.02,
        seed: 1,
        curve: SceneCurve::Cantilever {
            spec: CantileverSpec {
                length: 2.459,
                radius: 4.95e-3,
                young_modulus: 72e9,
                density: 2700.0,
                gravity: 9.81,
                n_nodes: 2000,
            },
            px_per_meter: 380.0,
            origin: [20.0, 150.0],
        },
    }
}

const STRATEGIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn bench(c: &mut Criterion) {
    let (raster, _) = scene().render().unwrap();
    let basis = CurvatureBasis::legendre(3).unwrap();
    let poly = trace(&raster, Vec2::new(20.0, 150.0), 0.0, &TraceOptions::new(20.0, 6.0)).unwrap();
    let p0 = fit_series(&poly, &basis).unwrap();
    let beam = build_mesh(p0.length, 6.0, 3.0).unwrap();
    let free: Vec<usize> = (1..p0.n_params()).collect();

    let mut group = c.benchmark_group("phi");
    for (name, exec) in STRATEGIES {
        let corr = Correlator::new(&raster, &basis, &beam).unwrap().with_exec(exec);
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| corr.phi(black_box(&p0)).unwrap())
        });
    }
    group.finish();

    let mut group = c.benchmark_group("assemble");
    for (name, exec) in STRATEGIES {
        let corr = Correlator::new(&raster, &basis, &beam).unwrap().with_exec(exec);
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| corr.assemble(black_box(&p0), &free, GradientForm::VirtualImage).unwrap())
        });
    }
    group.finish();

    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    for (name, exec) in STRATEGIES {
        let opts = FitOptions {
            frozen: vec![ParamId::X01],
            exec,
            ..FitOptions::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| fit(&raster, black_box(&p0), &basis, &beam, &opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
