mod common;

use std::collections::BTreeMap;

use common::{er_graph_with_features, random_matrix, rng};
use structleak::autodiff::{adamw_step, AdamWConfig, Initializer, OptimizerState, ParamSet};
use structleak::synth::{generate, SynthConfig};
use structleak::Matrix;

fn one_param(v: Vec<f64>) -> ParamSet {
    let mut p = ParamSet::new(0);
    p.insert("w", Matrix::from_vec(1, v.len(), v)).unwrap();
    p
}

fn grads(v: Vec<f64>) -> BTreeMap<String, Matrix> {
    BTreeMap::from([("w".to_string(), Matrix::from_vec(1, v.len(), v))])
}

#[test]
fn adamw_constant_gradient_follows_closed_form() {
    // With a constant gradient the bias-corrected moments are exactly g and
    // g^2, so every step moves by lr * g / (|g| + eps).
    let g = [0.3, -2.0, 1e-3];
    let cfg = AdamWConfig::new(0.01, 0.0);
    let mut p = one_param(vec![0.0; 3]);
    let mut state = OptimizerState::new(cfg);
    for t in 1..=500 {
        adamw_step(&mut p, &grads(g.to_vec()), &mut state).unwrap();
        assert_eq!(state.step_count(), t);
        for k in 0..3 {
            let expect = -(t as f64) * cfg.lr * g[k] / (g[k].abs() + cfg.eps);
            assert!((p.get("w").unwrap()[(0, k)] - expect).abs() < 1e-9 * t as f64);
        }
    }
    let m = state.first_moment("w").unwrap();
    assert!((m[(0, 1)] + 2.0 * (1.0 - 0.9f64.powi(500))).abs() < 1e-12);
}

#[test]
fn adamw_zero_gradient_only_decays() {
    let cfg = AdamWConfig::new(0.1, 0.5);
    let mut p = one_param(vec![2.0, -4.0]);
    let mut state = OptimizerState::new(cfg);
    adamw_step(&mut p, &grads(vec![0.0, 0.0]), &mut state).unwrap();
    assert_eq!(p.get("w").unwrap().as_slice(), &[2.0 * 0.95, -4.0 * 0.95]);

    let mut bad = BTreeMap::new();
    bad.insert("v".to_string(), Matrix::zeros(1, 2));
    assert!(adamw_step(&mut p, &bad, &mut state).is_err());
    assert!(adamw_step(&mut p, &grads(vec![0.0; 3]), &mut state).is_err());
    assert!(adamw_step(&mut p, &grads(vec![f64::NAN, 0.0]), &mut state).is_err());
}

#[test]
fn param_set_round_trips_losslessly() {
    let mut r = rng(1);
    let mut init = Initializer::new(42);
    init.glorot("a.w", 7, 5).unwrap();
    init.zeros("a.b", 1, 5).unwrap();
    let mut p = init.finish();
    p.insert("odd", random_matrix(3, 3, &mut r).map(|v| v * 1e-300 + v / 3.0))
        .unwrap();
    let text = p.to_json().unwrap();
    let back = ParamSet::from_json(&text).unwrap();
    assert_eq!(back, p);
    for (name, m) in p.iter() {
        let b = back.get(name).unwrap();
        assert!(m
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    p.save(&path).unwrap();
    assert_eq!(ParamSet::load(&path).unwrap(), p);

    let mut again = Initializer::new(42);
    again.glorot("a.w", 7, 5).unwrap();
    assert_eq!(again.finish().get("a.w"), p.get("a.w"));
    assert!(ParamSet::from_json(&text.replace("\"format_version\": 1", "\"format_version\": 9")).is_err());
    assert!(p.insert("a.w", Matrix::zeros(1, 1)).is_err());
}

#[test]
fn synth_is_deterministic_and_edge_count_is_calibrated() {
    for seed in 0..5 {
        for cfg in [SynthConfig::scenario_p(600, seed), SynthConfig::scenario_r(600, seed)] {
            let a = generate(&cfg).unwrap();
            let b = generate(&cfg).unwrap();
            assert_eq!(a.graph.edges(), b.graph.edges());
            assert_eq!(a.graph.features(), b.graph.features());
            assert_eq!(a.private, b.private);
            assert_eq!(a.utility, b.utility);
            let classes: Vec<usize> = a.private.label.iter().map(|c| c.unwrap()).collect();
            let (mean, sd) = cfg.edge_count_moments(&classes);
            assert!((a.graph.edge_count() as f64 - mean).abs() <= 3.0 * sd, "seed {seed}");
            assert_eq!(a.private.known_nodes().len(), 60);
            assert_eq!(a.private.known_class_counts().iter().filter(|&&c| c > 0).count(), 2);
        }
    }
    let mut bad = SynthConfig::scenario_p(100, 0);
    bad.p_out = 0.5;
    assert!(generate(&bad).is_err());
}

#[test]
fn scenario_r_degree_ratio_follows_the_edge_model() {
    let mut ratios = Vec::new();
    for seed in 0..5 {
        let data = generate(&SynthConfig::scenario_r(1000, seed)).unwrap();
        let mut sum = [0.0; 2];
        let mut cnt = [0.0; 2];
        for i in 0..1000 {
            let c = data.private.label[i].unwrap();
            sum[c] += data.graph.degree(i) as f64;
            cnt[c] += 1.0;
        }
        ratios.push((sum[1] / cnt[1]) / (sum[0] / cnt[0]));
    }
    let mean = ratios.iter().sum::<f64>() / 5.0;
    // Class means: p*n/2*(1 + 2) vs p*n/2*(2 + 4), a ratio of 2.
    assert!((mean - 2.0).abs() < 0.1, "degree ratio {mean}");
}

#[test]
fn graph_features_default_to_ones() {
    let g = er_graph_with_features(5, 0.5, 2, 1);
    let unit = structleak::Graph::unit_features(5, g.edges().to_vec()).unwrap();
    assert_eq!(unit.features(), &Matrix::filled(5, 1, 1.0));
}
