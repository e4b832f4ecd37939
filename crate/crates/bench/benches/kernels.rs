use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use structleak::attack::{train_attack, AttackConfig, AttackVariant};
use structleak::eval::{mmd, Bandwidth};
use structleak::graph::{enumerate_motifs, MotifCatalog};
use structleak::homophily::{prox_ratios, role_ratios, HomophilyConfig};
use structleak::publisher::{train_sampler, SamplerConfig};
use structleak::synth::{generate, SynthConfig};

fn homophily(c: &mut Criterion) {
    let data = generate(&SynthConfig::scenario_p(1000, 0)).unwrap();
    let cfg = HomophilyConfig::default();
    c.bench_function("prox_ratios n=1000", |b| {
        b.iter(|| prox_ratios(black_box(&data.graph), &data.private, &cfg).unwrap())
    });
    c.bench_function("role_ratios n=1000", |b| {
        b.iter(|| role_ratios(black_box(&data.graph), &data.private, &cfg).unwrap())
    });
}

fn structure(c: &mut Criterion) {
    let data = generate(&SynthConfig::scenario_p(1000, 1)).unwrap();
    c.bench_function("ego_network k=1 all nodes", |b| {
        b.iter(|| {
            (0..1000)
                .map(|v| data.graph.ego_network(v, 1).unwrap().node_count())
                .sum::<usize>()
        })
    });
    let small = generate(&SynthConfig::scenario_p(300, 1)).unwrap();
    c.bench_function("enumerate_motifs n=300", |b| {
        b.iter(|| enumerate_motifs(black_box(&small.graph), &MotifCatalog::default()).unwrap())
    });
    let deg: Vec<f64> = data.graph.degrees().iter().map(|&d| d as f64).collect();
    let half: Vec<f64> = deg.iter().map(|d| (d * 0.5).floor()).collect();
    c.bench_function("mmd median bandwidth n=1000", |b| {
        b.iter(|| mmd(black_box(&deg), &half, Bandwidth::MedianHeuristic).unwrap())
    });
}

fn training(c: &mut Criterion) {
    let data = generate(&SynthConfig::scenario_p(1000, 2)).unwrap();
    let mut group = c.benchmark_group("training");
    group.sample_size(10);
    for variant in [AttackVariant::ProxOnly, AttackVariant::Full] {
        let cfg = AttackConfig {
            hops: 1,
            hidden: 32,
            epochs: 10,
            variant,
            ..Default::default()
        };
        group.bench_function(format!("attack 10 epochs {variant:?}"), |b| {
            b.iter(|| train_attack(&data.graph, &data.private, &cfg).unwrap())
        });
    }
    let attack = AttackConfig {
        hops: 1,
        hidden: 32,
        ..Default::default()
    };
    let sampler = SamplerConfig {
        epochs: 10,
        ..Default::default()
    };
    group.bench_function("sampler 10 epochs", |b| {
        b.iter(|| train_sampler(&data.graph, &data.private, &attack, &sampler).unwrap())
    });
    group.finish();
}

criterion_group!(benches, homophily, structure, training);
criterion_main!(benches);
