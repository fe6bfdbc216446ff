//! Timings for the hot paths: model building under each weighting
//! extreme, both decoders, E-value calibration, and one full
//! cross-validated experiment.

use std::collections::BTreeMap;
use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, Criterion};

use phmmw_bench::{family_alignment, query, tiny_corpus};
use phmmw_core::evalharness::{run_experiment, EvalConfig};
use phmmw_core::plan7::{build_scheme_model, PseudocountConfig, WeightScheme};
use phmmw_core::scorer::{calibrate, Scorer};
use phmmw_core::structweights::HcsParams;

fn bench_build(c: &mut Criterion) {
    let aln = family_alignment();
    let cfg = PseudocountConfig::default();
    let params = HcsParams::default();
    let mut group = c.benchmark_group("build");
    for scheme in [WeightScheme::Baseline, WeightScheme::CoreProximity] {
        group.bench_function(scheme.tag(), |b| {
            b.iter(|| {
                build_scheme_model(
                    black_box(&aln),
                    scheme,
                    &cfg,
                    params,
                    "bench",
                    BTreeMap::new(),
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

fn bench_score(c: &mut Criterion) {
    let aln = family_alignment();
    let model = build_scheme_model(
        &aln,
        WeightScheme::Baseline,
        &PseudocountConfig::default(),
        HcsParams::default(),
        "bench",
        BTreeMap::new(),
    )
    .unwrap();
    let seq = query(&aln);
    let scorer = Scorer::new(&model);
    let mut group = c.benchmark_group("score");
    group.bench_function("viterbi", |b| {
        b.iter(|| scorer.viterbi_bits(black_box(&seq)).unwrap())
    });
    group.bench_function("forward", |b| {
        b.iter(|| scorer.forward_bits(black_box(&seq)).unwrap())
    });
    group.finish();

    c.bench_function("calibrate/200", |b| {
        b.iter(|| {
            let mut fresh = model.clone();
            calibrate(&mut fresh, 200, black_box(7)).unwrap()
        })
    });
}

fn bench_experiment(c: &mut Criterion) {
    let corpus = tiny_corpus();
    let cfg = EvalConfig {
        calib_samples: 100,
        ..EvalConfig::default()
    };
    c.bench_function("experiment/two-superfamilies", |b| {
        b.iter(|| run_experiment(black_box(&corpus), &cfg).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default()
        .sample_size(20)
        .warm_up_time(Duration::from_millis(300))
        .measurement_time(Duration::from_secs(2));
    targets = bench_build, bench_score, bench_experiment
}
criterion_main!(benches);
