//! Monte Carlo and small training experiments with statistical tolerances.

mod common;

use common::{er_graph, rng};
use rand::Rng;
use structleak::attack::{
    baseline_attack, check_theorem_bound, infer, train_attack, AttackConfig, AttackVariant, BaselineKind, PsiEncoder,
};
use structleak::eval::{attack_metrics, utility_eval, UtilityConfig};
use structleak::publisher::gumbel_relax;
use structleak::synth::{generate, SynthConfig};
use structleak::{Graph, Matrix, NodeLabels};

#[test]
fn hard_thresholded_relaxation_is_bernoulli() {
    let mut r = rng(1);
    let draws = 10_000;
    let kept = (0..draws)
        .filter(|_| {
            let u: f64 = r.random::<f64>().max(1e-300);
            gumbel_relax(0.3, u, 0.1) > 0.5
        })
        .count();
    let frac = kept as f64 / draws as f64;
    assert!((frac - 0.3).abs() <= 0.02, "fraction {frac}");
}

#[test]
fn theorem_bound_small_cases() {
    let k3 = Graph::unit_features(3, [(0, 1), (1, 2), (0, 2)])
        .unwrap()
        .ego_network(0, 1)
        .unwrap();
    let p3 = Graph::unit_features(3, [(0, 1), (1, 2)])
        .unwrap()
        .ego_network(1, 1)
        .unwrap();
    for seed in 0..10 {
        let enc = PsiEncoder::random(&[1, 4, 4], seed).unwrap();
        let same = check_theorem_bound(&k3, &k3, &enc).unwrap();
        assert_eq!((same.lhs, same.rhs), (0.0, 0.0));
        assert!(same.holds);
        let rep = check_theorem_bound(&k3, &p3, &enc).unwrap();
        assert!(rep.holds && rep.lhs <= rep.rhs + 1e-9, "{rep:?}");
        let t = rep.tau_sigma * rep.tau_w * rep.tau_l;
        let tau = if (t - 1.0).abs() < 1e-12 {
            2.0 * rep.tau_sigma * rep.tau_w * rep.tau_h
        } else {
            (t.powi(2) - 1.0) / (t - 1.0) * rep.tau_sigma * rep.tau_w * rep.tau_h
        };
        assert!((rep.tau - tau).abs() <= 1e-9 * tau.max(1.0));
    }
    let p2 = Graph::unit_features(2, [(0, 1)]).unwrap().ego_network(0, 1).unwrap();
    assert!(check_theorem_bound(&k3, &p2, &PsiEncoder::random(&[1, 2], 0).unwrap()).is_err());
}

#[test]
fn separable_features_are_fit_quickly() {
    let n = 60;
    let classes: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let feats: Vec<f64> = classes
        .iter()
        .flat_map(|&c| if c == 0 { [1.0, 0.0] } else { [0.0, 1.0] })
        .collect();
    let pairs: Vec<(usize, usize)> = common::er_pairs(n, 0.4, &mut rng(2))
        .into_iter()
        .filter(|&(u, v)| classes[u] == classes[v])
        .collect();
    let g = Graph::from_edges(n, pairs, Matrix::from_vec(n, 2, feats)).unwrap();
    let known: Vec<bool> = (0..n).map(|i| i < 20).collect();
    let labels = NodeLabels::new(classes.into_iter().map(Some).collect(), known, 2).unwrap();
    for variant in [AttackVariant::Full, AttackVariant::ProxOnly] {
        let cfg = AttackConfig {
            hops: 1,
            hidden: 16,
            epochs: 50,
            lr: 0.01,
            variant,
            ..Default::default()
        };
        let (_, hist) = train_attack(&g, &labels, &cfg).unwrap();
        assert!(
            *hist.loss.last().unwrap() < 0.1,
            "{variant:?} loss {:?}",
            hist.loss.last()
        );
    }
}

#[test]
fn null_model_attack_is_near_prior() {
    let mut accs = Vec::new();
    for seed in 0..3 {
        let data = generate(&SynthConfig::null(600, seed)).unwrap();
        let cfg = AttackConfig {
            hops: 1,
            hidden: 16,
            epochs: 60,
            seed,
            ..Default::default()
        };
        let (model, _) = train_attack(&data.graph, &data.private, &cfg).unwrap();
        let pred = infer(&model, &data.graph, &data.private).unwrap();
        accs.push(attack_metrics(&pred.distribution, &data.private).unwrap().accuracy);
    }
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    assert!((mean - 0.5).abs() <= 0.05, "{accs:?}");
}

#[test]
fn baselines() {
    let data = generate(&SynthConfig::scenario_r(600, 3)).unwrap();
    let cfg = AttackConfig {
        hidden: 16,
        epochs: 100,
        lr: 0.01,
        ..Default::default()
    };
    let pred = baseline_attack(BaselineKind::FeatureMlp, &data.graph, &data.private, &cfg).unwrap();
    let acc = attack_metrics(&pred.distribution, &data.private).unwrap().accuracy;
    assert!((acc - 0.5).abs() <= 0.05, "feature-mlp on structure-only data: {acc}");

    let g = Graph::unit_features(6, [(0, 1), (0, 2), (0, 3)]).unwrap();
    let label = vec![Some(0), Some(0), Some(0), Some(1), Some(1), Some(1)];
    let known = vec![false, true, true, true, true, true];
    let labels = NodeLabels::new(label, known, 2).unwrap();
    let pred = baseline_attack(BaselineKind::MajorityNeighbor, &g, &labels, &cfg).unwrap();
    assert_eq!(pred.hard[0], 0);
    // Node 5 is isolated: global plurality among known labels (3 of 5 are class 1).
    assert_eq!(pred.hard[5], 1);
}

#[test]
fn utility_classifier_bands() {
    let g = er_graph(400, 0.03, 4);
    let cfg = UtilityConfig {
        classifier: AttackConfig {
            hops: 1,
            hidden: 16,
            epochs: 40,
            seed: 1,
            ..Default::default()
        },
        ..Default::default()
    };
    let constant = NodeLabels::fully_known(vec![0; 400], 1).unwrap();
    assert_eq!(utility_eval(&g, &constant, &cfg).unwrap(), 1.0);

    let mut r = rng(5);
    let noise = NodeLabels::fully_known((0..400).map(|_| r.random_range(0..2)).collect(), 2).unwrap();
    let acc = utility_eval(&g, &noise, &cfg).unwrap();
    assert!((acc - 0.5).abs() <= 0.07, "independent labels: {acc}");

    let data = generate(&SynthConfig::scenario_p(600, 2)).unwrap();
    let a = utility_eval(&data.graph, &data.utility, &cfg).unwrap();
    let b = utility_eval(&data.graph, &data.utility, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn scenario_p_attack_fits_known_nodes() {
    let data = generate(&SynthConfig::scenario_p(1000, 0)).unwrap();
    let cfg = AttackConfig {
        hops: 1,
        hidden: 32,
        variant: AttackVariant::Full,
        ..Default::default()
    };
    let (_, hist) = train_attack(&data.graph, &data.private, &cfg).unwrap();
    assert!(hist.train_accuracy >= 0.95, "train accuracy {}", hist.train_accuracy);
}
