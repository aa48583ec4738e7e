use criterion::{criterion_group, criterion_main, Criterion};

use wigmat::montecarlo::sample_grid;
use wigmat::tomography::required_fock_count;
use wigmat::vibronic::make_cat_state;
use wigmat::wigner::exact_field;
use wigmat::{
    CatStateSpec, Complex64, DriveConfig, Grid, SamplerConfig, SamplingMode, ScheduleOptions, TomographyPlan,
};

fn grid_sweep(c: &mut Criterion) {
    let grid = Grid {
        re_min: -3.0,
        re_max: 3.0,
        n_re: 7,
        im_min: -1.0,
        im_max: 1.0,
        n_im: 3,
    };
    let state = make_cat_state(CatStateSpec { beta: Complex64::new(2.0, 0.0) }, 82).unwrap();
    let drive = DriveConfig::new(1.0, 0.0, 0.1).unwrap();
    let m = required_fock_count(&state, &grid, 1e-6).unwrap();
    let options = ScheduleOptions {
        fixed_cycles: Some(30),
        ..ScheduleOptions::default()
    };
    let plan = TomographyPlan::build(&drive, m, &options).unwrap();

    let mut g = c.benchmark_group("sweep_21_points");
    g.sample_size(10);
    g.bench_function("exact_field", |b| b.iter(|| exact_field(&state, &grid).unwrap()));
    g.bench_function("schedules_k30", |b| b.iter(|| TomographyPlan::build(&drive, m, &options).unwrap()));
    for (name, mode) in [("fast_analytic", SamplingMode::FastAnalytic), ("trajectory", SamplingMode::Trajectory)] {
        let cfg = SamplerConfig {
            trials: 200,
            mode,
            ..SamplerConfig::default()
        };
        g.bench_function(format!("sample_{name}"), |b| b.iter(|| sample_grid(&state, &grid, &plan, &cfg).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, grid_sweep);
criterion_main!(benches);
