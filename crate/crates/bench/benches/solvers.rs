use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use hda_core::oracle::{default_feas_tol, oracle_basis_pursuit};
use hda_core::problem::{generate_instance, InstanceSpec};
use hda_core::solvers::{hopping_run, BcdState, HdaState, LbiState};
use hda_core::{BcdPolicy, SolverConfig};

fn steps(c: &mut Criterion) {
    let inst = InstanceSpec::recovery_default(1).generate().unwrap();
    let d = &inst.dictionary;
    let drive = d.drive(&inst.clean_signal).unwrap();
    let cfg = SolverConfig {
        delta: 1.0 / d.spectral_norm_sq(),
        ..SolverConfig::default()
    };

    let mut g = c.benchmark_group("step_64x128");
    g.bench_function("lbi", |b| {
        let mut s = LbiState::new(d.cols());
        b.iter(|| s.step(d, &drive, &cfg).unwrap())
    });
    g.bench_function("bcd_greedy", |b| {
        let mut s = BcdState::new(d.cols(), BcdPolicy::Greedy);
        b.iter(|| {
            let i = s.select(&drive);
            s.step(d, &drive, i, &cfg).unwrap()
        })
    });
    g.bench_function("hda", |b| {
        let mut s = HdaState::new(d.cols());
        b.iter(|| s.step(d, &drive, cfg.lambda).unwrap())
    });
    g.finish();
}

fn runs(c: &mut Criterion) {
    let inst = InstanceSpec::recovery_default(1).generate().unwrap();
    let cfg = SolverConfig {
        max_iters: 1_000,
        tol: 0.0,
        ..SolverConfig::default()
    };
    c.bench_function("hopping_64x128_t1000", |b| {
        b.iter(|| hopping_run(&inst.dictionary, &inst.clean_signal, &cfg, 1_000.0).unwrap())
    });
}

fn oracle(c: &mut Criterion) {
    let inst = generate_instance(8, 12, 3, -0.5, 0.5, 1000).unwrap();
    let tol = default_feas_tol(&inst.clean_signal);
    c.bench_function("oracle_8x12", |b| {
        b.iter_batched(
            || inst.clone(),
            |i| black_box(oracle_basis_pursuit(&i.dictionary, &i.clean_signal, tol).unwrap()),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, steps, runs, oracle);
criterion_main!(benches);
