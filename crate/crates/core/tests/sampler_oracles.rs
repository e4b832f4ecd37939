mod common;

use std::rc::Rc;

use common::dense::{add_bias, dense_gin, dense_sage, mm, p, relu, to_dense, weighted_adjacency, Dense};
use common::{er_graph, er_graph_with_features, random_labels, randomize, rng};
use rand::Rng;
use structleak::attack::{message_graph, AttackArch, AttackConfig, AttackContext, AttackModel, AttackVariant};
use structleak::autodiff::Tape;
use structleak::homophily::{class_priors, prox_ratios, role_ratios, HomophilyConfig, LabelMode};
use structleak::publisher::{
    edge_probabilities, gumbel_relax, losses_on_tape, publish, soft_ghratio, train_sampler, DisTargets, PublishMode,
    SamplerConfig, SamplerModel, SamplerVariant,
};
use structleak::Matrix;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Scalar double loop over the weighted adjacency.
fn soft_oracle(a: &Dense, classes: &[Option<usize>], theta: f64, s: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = a.len();
    let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let (mut prox, mut role, mut pden, mut rden) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for i in 0..n {
        let Some(ci) = classes[i] else { continue };
        let (mut pn, mut pd, mut rn, mut rd) = (0.0, 0.0, 0.0, 0.0);
        for j in 0..n {
            let Some(cj) = classes[j] else { continue };
            if j == i {
                continue;
            }
            pd += a[i][j];
            let k = sigmoid((theta + 0.5 - (deg[i] - deg[j]).abs()) / s);
            rd += k;
            if ci == cj {
                pn += a[i][j];
                rn += k;
            }
        }
        prox[i] = if pd > 0.0 { pn / pd } else { 0.0 };
        role[i] = if rd > 0.0 { rn / rd } else { 0.0 };
        pden[i] = pd;
        rden[i] = rd;
    }
    (prox, role, pden, rden)
}

#[test]
fn soft_ratios_match_scalar_oracle() {
    let g = er_graph(50, 0.15, 3);
    let mut r = rng(4);
    let w: Vec<f64> = (0..g.edge_count()).map(|_| r.random::<f64>()).collect();
    let classes: Vec<Option<usize>> = (0..50).map(|i| (i % 7 != 0).then(|| r.random_range(0..3))).collect();
    let mut tape = Tape::new();
    let wv = tape.constant(Matrix::column(w.clone()));
    let sr = soft_ghratio(&mut tape, wv, &message_graph(&g), &Rc::new(classes.clone()), 2, 0.7);
    let (prox, role, pden, rden) = soft_oracle(&weighted_adjacency(&g, &w), &classes, 2.0, 0.7);
    for i in 0..50 {
        assert!((tape.value(sr.prox)[(i, 0)] - prox[i]).abs() < 1e-10, "prox {i}");
        assert!((tape.value(sr.role)[(i, 0)] - role[i]).abs() < 1e-10, "role {i}");
        if classes[i].is_some() {
            assert!((sr.prox_denominator[i] - pden[i]).abs() < 1e-10);
            assert!((sr.role_denominator[i] - rden[i]).abs() < 1e-10);
        }
    }
}

#[test]
fn hard_weights_reproduce_counting_ratios() {
    for seed in 0..4 {
        let g = er_graph(80, 0.08, 10 + seed);
        let labels = random_labels(80, 2, 1.0, 20 + seed);
        let cfg = HomophilyConfig {
            degree_threshold: 3,
            label_mode: LabelMode::KnownOnly,
        };
        let prox = prox_ratios(&g, &labels, &cfg).unwrap();
        let role = role_ratios(&g, &labels, &cfg).unwrap();
        let mut tape = Tape::new();
        let wv = tape.constant(Matrix::filled(g.edge_count(), 1, 1.0));
        let sr = soft_ghratio(
            &mut tape,
            wv,
            &message_graph(&g),
            &Rc::new(labels.label.clone()),
            3,
            1e-3,
        );
        for i in 0..80 {
            assert_eq!(sr.prox_present(i), prox[i].is_some());
            if let Some(v) = prox[i] {
                assert!((tape.value(sr.prox)[(i, 0)] - v).abs() < 1e-12);
            }
            if let Some(v) = role[i] {
                assert!((tape.value(sr.role)[(i, 0)] - v).abs() < 1e-12);
            }
        }
    }
}

fn sampler_cfg(seed: u64) -> SamplerConfig {
    SamplerConfig {
        hidden: 6,
        scorer_hidden: 4,
        seed,
        ..Default::default()
    }
}

fn dense_probabilities(g: &structleak::Graph, model: &SamplerModel) -> Vec<f64> {
    let a = weighted_adjacency(g, &vec![1.0; g.edge_count()]);
    let h = dense_sage(&model.params, "enc.sage0", &to_dense(g.features()), &a);
    let h = dense_sage(&model.params, "enc.sage1", &h, &a);
    let pairs: Dense = g
        .edges()
        .iter()
        .map(|&(u, v)| [h[u].clone(), h[v].clone()].concat())
        .collect();
    let z = relu(add_bias(
        mm(&pairs, &p(&model.params, "scorer.0.w")),
        model.params.get("scorer.0.b").unwrap(),
    ));
    let z = add_bias(
        mm(&z, &p(&model.params, "scorer.1.w")),
        model.params.get("scorer.1.b").unwrap(),
    );
    z.iter().map(|r| sigmoid(r[0]).clamp(1e-6, 1.0 - 1e-6)).collect()
}

#[test]
fn edge_probabilities_match_dense_forward() {
    let g = er_graph_with_features(8, 0.4, 3, 7);
    let mut model = SamplerModel::new(3, &sampler_cfg(1)).unwrap();
    randomize(&mut model.params, 2);
    let got = edge_probabilities(&g, &model).unwrap();
    for (a, b) in got.iter().zip(dense_probabilities(&g, &model)) {
        assert!((a - b).abs() < 1e-12);
    }
    model.zero_scorer_output();
    assert!(edge_probabilities(&g, &model).unwrap().iter().all(|&t| t == 0.5));
}

#[test]
fn loss_terms_match_scalar_oracles() {
    let g = er_graph_with_features(12, 0.35, 3, 8);
    let labels = random_labels(12, 2, 0.5, 9);
    let mut sampler = SamplerModel::new(
        3,
        &SamplerConfig {
            gamma: 2.0,
            eta: 3.0,
            lambda: 0.7,
            ..sampler_cfg(3)
        },
    )
    .unwrap();
    randomize(&mut sampler.params, 4);
    let arch = AttackArch {
        feature_dim: 3,
        hidden: 5,
        classes: 2,
        hops: 1,
    };
    let acfg = AttackConfig {
        hops: 1,
        hidden: 5,
        variant: AttackVariant::ProxOnly,
        ..Default::default()
    };
    let mut attack = AttackModel::new(arch, 12, &acfg).unwrap();
    randomize(&mut attack.params, 5);
    let ctx = AttackContext::for_model(&g, &attack).unwrap();
    let targets: Vec<(usize, usize)> = labels
        .known_nodes()
        .into_iter()
        .map(|i| (i, labels.label[i].unwrap()))
        .collect();
    let pseudo: Vec<usize> = (0..12).map(|i| i % 2).collect();
    let dis = DisTargets::new(&labels, Some(&pseudo)).unwrap();
    let mut r = rng(6);
    let u: Vec<f64> = (0..g.edge_count()).map(|_| r.random::<f64>().max(1e-9)).collect();

    let mut tape = Tape::new();
    let msg = message_graph(&g);
    let vars = losses_on_tape(&mut tape, &g, &msg, &sampler, Some((&attack, &ctx)), &targets, &dis, &u).unwrap();
    let got = vars.breakdown(&tape);

    let t = dense_probabilities(&g, &sampler);
    let reg = -t.iter().map(|x| x.ln()).sum::<f64>() / t.len() as f64;
    let relaxed: Vec<f64> = t
        .iter()
        .zip(&u)
        .map(|(&t, &u)| gumbel_relax(t, u, sampler.config.temperature))
        .collect();
    let a = weighted_adjacency(&g, &relaxed);

    let h = dense_gin(&attack.params, "prox.gin0", &to_dense(g.features()), &a);
    let h = dense_gin(&attack.params, "prox.gin1", &h, &a);
    let logits = add_bias(
        mm(&h, &p(&attack.params, "prox.head.w")),
        attack.params.get("prox.head.b").unwrap(),
    );
    let adv = -targets
        .iter()
        .map(|&(i, c)| {
            let z: f64 = logits[i].iter().map(|v| v.exp()).sum();
            (logits[i][c].exp() / z).ln()
        })
        .sum::<f64>()
        / targets.len() as f64;

    let freq = class_priors(&labels.observed()).unwrap();
    let (prox, role, pden, rden) = soft_oracle(&a, &dis.classes, 5.0, sampler.config.smoothing);
    let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let (mut dsum, mut counted) = (0.0, 0);
    for i in 0..12 {
        let Some(c) = dis.classes[i] else { continue };
        let prior = freq[c];
        let hp = pden[i] >= 1e-8;
        let hr = rden[i] >= 1e-8 && deg[i] >= 1e-8;
        if hp {
            dsum += (prox[i] - prior).abs();
        }
        if hr {
            dsum += (role[i] - prior).abs();
        }
        counted += usize::from(hp || hr);
    }
    let dis_v = dsum / counted as f64;

    assert!((got.reg - reg).abs() < 1e-10, "reg {} vs {reg}", got.reg);
    assert!((got.adv - adv).abs() < 1e-10, "adv {} vs {adv}", got.adv);
    assert!((got.dis - dis_v).abs() < 1e-10, "dis {} vs {dis_v}", got.dis);
    assert!((got.total - (-2.0 * adv + 3.0 * dis_v + 0.7 * reg)).abs() < 1e-10);
}

#[test]
fn near_empty_relaxed_graph_has_zero_dis() {
    let g = er_graph(20, 0.3, 1);
    let labels = random_labels(20, 2, 1.0, 2);
    let dis = DisTargets::new(&labels, None).unwrap();
    let mut tape = Tape::new();
    let wv = tape.constant(Matrix::filled(g.edge_count(), 1, 1e-12));
    let sr = soft_ghratio(&mut tape, wv, &message_graph(&g), &dis.classes, 5, 1.0);
    let loss = structleak::publisher::disentangle_loss(&mut tape, &sr, &dis.priors);
    assert_eq!(tape.value(loss).item(), 0.0);
}

#[test]
fn retention_pressure_alone_keeps_edges() {
    let g = er_graph_with_features(40, 0.15, 3, 11);
    let labels = random_labels(40, 2, 0.3, 12);
    let cfg = SamplerConfig {
        gamma: 0.0,
        eta: 0.0,
        lambda: 1.0,
        epochs: 100,
        lr: 0.01,
        ..sampler_cfg(5)
    };
    let acfg = AttackConfig {
        hops: 1,
        hidden: 4,
        ..Default::default()
    };
    let trained = train_sampler(&g, &labels, &acfg, &cfg).unwrap();
    assert!(trained.attack.is_none());
    let mean = trained.keep_probabilities.iter().sum::<f64>() / g.edge_count() as f64;
    assert!(mean >= 0.95, "mean keep probability {mean}");
    let reg: Vec<f64> = trained.history.iter().map(|b| b.reg).collect();
    assert!(reg[..20].windows(2).all(|w| w[1] < w[0]), "{:?}", &reg[..20]);

    let zero = train_sampler(
        &g,
        &labels,
        &acfg,
        &SamplerConfig {
            epochs: 0,
            ..cfg.clone()
        },
    )
    .unwrap();
    let fresh = SamplerModel::new(3, &SamplerConfig { epochs: 0, ..cfg }).unwrap();
    assert_eq!(zero.keep_probabilities, edge_probabilities(&g, &fresh).unwrap());
}

#[test]
fn sampler_variants_run_and_stay_interior() {
    let g = er_graph_with_features(30, 0.2, 3, 13);
    let labels = random_labels(30, 2, 0.3, 14);
    let acfg = AttackConfig {
        hops: 1,
        hidden: 4,
        ..Default::default()
    };
    for variant in [SamplerVariant::Full, SamplerVariant::AdvOnly, SamplerVariant::DisOnly] {
        let cfg = SamplerConfig {
            variant,
            epochs: 12,
            update_interval: 4,
            ..sampler_cfg(6)
        };
        let a = train_sampler(&g, &labels, &acfg, &cfg).unwrap();
        let b = train_sampler(&g, &labels, &acfg, &cfg).unwrap();
        assert_eq!(a.keep_probabilities, b.keep_probabilities, "{variant:?}");
        assert!(a.keep_probabilities.iter().all(|&t| (1e-6..=1.0 - 1e-6).contains(&t)));
        if variant == SamplerVariant::DisOnly {
            // The co-trained attack still supplies pseudo-labels; its loss carries no weight.
            assert!(a
                .history
                .iter()
                .all(|h| (h.total - (cfg.eta * h.dis + cfg.lambda * h.reg)).abs() < 1e-9));
        }
    }
}

#[test]
fn inner_step_counts() {
    let g = er_graph_with_features(30, 0.2, 3, 15);
    let labels = random_labels(30, 2, 0.3, 16);
    let acfg = AttackConfig {
        hops: 1,
        hidden: 4,
        ..Default::default()
    };
    let base = SamplerConfig {
        epochs: 8,
        update_interval: 4,
        ..sampler_cfg(7)
    };
    for bad in [
        SamplerConfig {
            attack_steps: 0,
            ..base.clone()
        },
        SamplerConfig {
            sampler_steps: 0,
            ..base.clone()
        },
    ] {
        assert!(train_sampler(&g, &labels, &acfg, &bad).is_err());
    }
    let one = train_sampler(&g, &labels, &acfg, &base).unwrap();
    for cfg in [
        SamplerConfig {
            attack_steps: 3,
            ..base.clone()
        },
        SamplerConfig {
            sampler_steps: 3,
            ..base.clone()
        },
    ] {
        let a = train_sampler(&g, &labels, &acfg, &cfg).unwrap();
        let b = train_sampler(&g, &labels, &acfg, &cfg).unwrap();
        assert_eq!(a.keep_probabilities, b.keep_probabilities);
        assert_eq!(a.history.len(), base.epochs);
        assert_ne!(a.keep_probabilities, one.keep_probabilities);
    }
}

#[test]
fn publication_modes() {
    let g = er_graph(60, 0.2, 15);
    let m = g.edge_count();
    let all = publish(&g, &vec![0.9; m], PublishMode::Threshold).unwrap();
    assert_eq!(all.graph.edges(), g.edges());
    let mut r = rng(16);
    let probs: Vec<f64> = (0..m).map(|_| r.random::<f64>()).collect();
    let a = publish(&g, &probs, PublishMode::Bernoulli { seed: 3 }).unwrap();
    let b = publish(&g, &probs, PublishMode::Bernoulli { seed: 3 }).unwrap();
    assert_eq!(a.mask, b.mask);
    assert_eq!(a.graph.edges(), b.graph.edges());
    assert!(a.graph.edges().iter().all(|&(u, v)| g.has_edge(u, v)));
    assert!(publish(&g, &probs[1..], PublishMode::Threshold).is_err());

    // m = 10,000 edges at T = 0.5: kept count within 3 sigma (150) of 5,000.
    let big = er_graph(300, 10_000.0 / 44_850.0, 17);
    let mb = big.edge_count();
    let kept = publish(&big, &vec![0.5; mb], PublishMode::Bernoulli { seed: 9 })
        .unwrap()
        .graph
        .edge_count();
    let sd = (mb as f64 * 0.25).sqrt();
    assert!((kept as f64 - mb as f64 / 2.0).abs() <= 3.0 * sd, "{kept} of {mb}");
}

#[test]
fn gumbel_relax_shape() {
    assert_eq!(gumbel_relax(0.5, 0.5, 0.3), 0.5);
    assert!(gumbel_relax(0.5, 0.9, 1e-3) > 1.0 - 1e-12);
    let mut r = rng(18);
    for _ in 0..1000 {
        let u: f64 = r.random::<f64>().clamp(1e-9, 1.0 - 1e-9);
        let eps = 0.05 + r.random::<f64>();
        let (t1, t2) = (r.random::<f64>(), r.random::<f64>());
        let (lo, hi) = (t1.min(t2), t1.max(t2));
        assert!(gumbel_relax(lo, u, eps) <= gumbel_relax(hi, u, eps));
        let s = gumbel_relax(0.5, u, eps) + gumbel_relax(0.5, 1.0 - u, eps);
        assert!((s - 1.0).abs() < 1e-12);
    }
}
