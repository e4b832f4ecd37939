mod common;

use std::rc::Rc;

use common::{er_graph_with_features, random_labels, random_matrix, randomize, rng};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use structleak::attack::{message_graph, route, RoutingState};
use structleak::autodiff::{gnn_layer, mean_pool, GinLayer, GnnKind, Initializer, SageLayer, Tape};
use structleak::eval::{auc_mann_whitney, mmd, motif_keep_report, Bandwidth};
use structleak::graph::{motif_edge_membership, MotifCatalog};
use structleak::homophily::{prox_ratios, role_ratios, HomophilyConfig, LabelMode};
use structleak::publisher::{gumbel_relax, publish, soft_ghratio, PublishMode};
use structleak::{Graph, Matrix, NodeLabels};

fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut rng(seed));
    p
}

/// Renames node `i` to `perm[i]`.
fn permute_graph(g: &Graph, perm: &[usize]) -> Graph {
    let n = g.node_count();
    let d = g.feature_dim();
    let mut feats = Matrix::zeros(n, d);
    for i in 0..n {
        feats.row_mut(perm[i]).copy_from_slice(g.features().row(i));
    }
    Graph::from_edges(n, g.edges().iter().map(|&(u, v)| (perm[u], perm[v])), feats).unwrap()
}

fn permute_labels(l: &NodeLabels, perm: &[usize]) -> NodeLabels {
    let mut label = vec![None; l.len()];
    let mut known = vec![false; l.len()];
    for i in 0..l.len() {
        label[perm[i]] = l.label[i];
        known[perm[i]] = l.known[i];
    }
    NodeLabels::new(label, known, l.class_count).unwrap()
}

fn graph_case() -> impl Strategy<Value = (usize, f64, u64)> {
    (3usize..24, 0.05f64..0.6, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn adjacency_is_symmetric_and_full_mask_is_identity((n, p, seed) in graph_case()) {
        let g = er_graph_with_features(n, p, 2, seed);
        for &(u, v) in g.edges() {
            prop_assert!(u < v);
            prop_assert!(g.neighbors(u).contains(&v) && g.neighbors(v).contains(&u));
        }
        let same = g.apply_edge_mask(&vec![true; g.edge_count()]).unwrap();
        prop_assert_eq!(same.edges(), g.edges());
        prop_assert_eq!(same.features(), g.features());
        let sum: usize = g.degrees().iter().sum();
        prop_assert_eq!(sum, 2 * g.edge_count());
    }

    #[test]
    fn ratios_are_equivariant_under_node_and_class_relabeling(
        (n, p, seed) in graph_case(), theta in 0usize..6, pseudo in any::<bool>()
    ) {
        let g = er_graph_with_features(n.max(6), p, 1, seed);
        let n = g.node_count();
        let labels = random_labels(n, 3, 0.5, seed ^ 1);
        let mode = if pseudo { LabelMode::PseudoAugmented } else { LabelMode::KnownOnly };
        let cfg = HomophilyConfig { degree_threshold: theta, label_mode: mode };
        let prox = prox_ratios(&g, &labels, &cfg).unwrap();
        let role = role_ratios(&g, &labels, &cfg).unwrap();

        let swapped = labels.relabel(&[2, 0, 1]);
        prop_assert_eq!(&prox_ratios(&g, &swapped, &cfg).unwrap(), &prox);
        prop_assert_eq!(&role_ratios(&g, &swapped, &cfg).unwrap(), &role);

        let perm = permutation(n, seed ^ 2);
        let pg = permute_graph(&g, &perm);
        let pl = permute_labels(&labels, &perm);
        let pprox = prox_ratios(&pg, &pl, &cfg).unwrap();
        let prole = role_ratios(&pg, &pl, &cfg).unwrap();
        for i in 0..n {
            prop_assert_eq!(pprox[perm[i]], prox[i]);
            prop_assert_eq!(prole[perm[i]], role[i]);
            for r in [prox[i], role[i]].into_iter().flatten() {
                prop_assert!((0.0..=1.0).contains(&r));
            }
        }
    }

    #[test]
    fn soft_role_denominator_grows_with_theta((n, p, seed) in graph_case(), theta in 0usize..8) {
        let g = er_graph_with_features(n, p, 1, seed);
        let labels = random_labels(n, 2, 1.0, seed);
        let msg = message_graph(&g);
        let classes = Rc::new(labels.label.clone());
        let mut tape = Tape::new();
        let w: Vec<f64> = (0..g.edge_count()).map(|e| 0.2 + 0.8 * ((e * 7 % 11) as f64 / 10.0)).collect();
        let a = tape.constant(Matrix::column(w));
        let lo = soft_ghratio(&mut tape, a, &msg, &classes, theta, 1.0);
        let hi = soft_ghratio(&mut tape, a, &msg, &classes, theta + 1, 1.0);
        for (l, h) in lo.role_denominator.iter().zip(&hi.role_denominator) {
            prop_assert!(h >= l);
        }
    }

    #[test]
    fn routed_rows_are_distributions(seed in any::<u64>(), rows in 1usize..12, classes in 2usize..5) {
        let mut r = rng(seed);
        let pl = random_matrix(rows, classes, &mut r).map(|v| 10.0 * v);
        let rl = random_matrix(rows, classes, &mut r).map(|v| 10.0 * v);
        let routing: Vec<RoutingState> = (0..rows)
            .map(|i| match i % 3 {
                0 => RoutingState { prox: Some(0.3 + i as f64 / 50.0), role: Some(0.9), prior: Some(0.5) },
                1 => RoutingState { prox: None, role: Some(0.2), prior: Some(0.5) },
                _ => RoutingState { prox: None, role: None, prior: Some(0.5) },
            })
            .collect();
        let out = route(&pl, &rl, &routing).unwrap();
        for i in 0..rows {
            let row = out.row(i);
            prop_assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mmd_is_symmetric_and_nonnegative(
        a in prop::collection::vec(0.0f64..20.0, 1..40),
        b in prop::collection::vec(0.0f64..20.0, 1..40),
    ) {
        let ab = mmd(&a, &b, Bandwidth::MedianHeuristic).unwrap();
        let ba = mmd(&b, &a, Bandwidth::MedianHeuristic).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!(ab >= -1e-12);
        prop_assert!(mmd(&a, &a, Bandwidth::Fixed(1.5)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn auc_is_invariant_to_monotone_transforms(
        pos in prop::collection::vec(-3.0f64..3.0, 1..30),
        neg in prop::collection::vec(-3.0f64..3.0, 1..30),
    ) {
        let f = |v: &f64| v.powi(3) + 2.0 * v;
        let tp: Vec<f64> = pos.iter().map(f).collect();
        let tn: Vec<f64> = neg.iter().map(f).collect();
        let base = auc_mann_whitney(&pos, &neg).unwrap();
        prop_assert!((auc_mann_whitney(&tp, &tn).unwrap() - base).abs() < 1e-12);
        prop_assert!((auc_mann_whitney(&neg, &pos).unwrap() - (1.0 - base)).abs() < 1e-12);
    }

    #[test]
    fn mean_pool_ignores_node_order(seed in any::<u64>(), k in 1usize..10) {
        let mut r = rng(seed);
        let x = random_matrix(10, 3, &mut r);
        let nodes: Vec<usize> = (0..k).map(|i| (i * 7 + seed as usize) % 10).collect();
        let mut shuffled = nodes.clone();
        shuffled.shuffle(&mut r);
        let mut tape = Tape::new();
        let xv = tape.constant(x);
        let a = mean_pool(&mut tape, xv, &nodes).unwrap();
        let b = mean_pool(&mut tape, xv, &shuffled).unwrap();
        prop_assert!(tape.value(a).max_abs_diff(tape.value(b)) < 1e-14);
    }

    #[test]
    fn gnn_layers_are_permutation_equivariant((n, p, seed) in graph_case()) {
        let g = er_graph_with_features(n, p, 3, seed);
        let perm = permutation(n, seed ^ 5);
        let pg = permute_graph(&g, &perm);
        let mut init = Initializer::new(seed);
        GinLayer::new("g", 3, 4).init(&mut init).unwrap();
        SageLayer::new("s", 3, 4).init(&mut init).unwrap();
        let mut params = init.finish();
        randomize(&mut params, seed ^ 6);
        for kind in [GnnKind::Gin, GnnKind::SageMean] {
            let prefix = if kind == GnnKind::Gin { "g" } else { "s" };
            let mut tape = Tape::new();
            let x = tape.constant(g.features().clone());
            let out = gnn_layer(&mut tape, kind, &params, prefix, x, &message_graph(&g), None).unwrap();
            let px = tape.constant(pg.features().clone());
            let pout = gnn_layer(&mut tape, kind, &params, prefix, px, &message_graph(&pg), None).unwrap();
            let (o, po) = (tape.value(out), tape.value(pout));
            for i in 0..n {
                for (u, v) in o.row(i).iter().zip(po.row(perm[i])) {
                    prop_assert!((u - v).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn gumbel_relaxation_is_monotone(t in 0.0f64..1.0, dt in 0.0f64..0.5, u in 1e-9f64..1.0, du in 0.0f64..0.5, eps in 0.01f64..2.0) {
        let base = gumbel_relax(t, u, eps);
        prop_assert!((0.0..=1.0).contains(&base));
        prop_assert!(gumbel_relax((t + dt).min(1.0), u, eps) >= base);
        prop_assert!(gumbel_relax(t, (u + du).min(1.0 - 1e-12), eps) >= base);
    }

    #[test]
    fn publication_only_removes_edges((n, p, seed) in graph_case(), pub_seed in any::<u64>()) {
        let g = er_graph_with_features(n, p, 1, seed);
        let mut r = rng(seed ^ 9);
        let probs: Vec<f64> = (0..g.edge_count()).map(|_| rand::Rng::random::<f64>(&mut r)).collect();
        for mode in [PublishMode::Bernoulli { seed: pub_seed }, PublishMode::Threshold] {
            let out = publish(&g, &probs, mode).unwrap();
            prop_assert!(out.graph.edges().iter().all(|&(u, v)| g.has_edge(u, v)));
            prop_assert_eq!(out.mask.iter().filter(|&&k| k).count(), out.graph.edge_count());
            prop_assert_eq!(out.graph.features(), g.features());
        }
    }

    #[test]
    fn motif_keep_rates_lie_within_member_range((n, p, seed) in graph_case()) {
        let g = er_graph_with_features(n.min(14), p.max(0.3), 1, seed);
        let mut r = rng(seed ^ 3);
        let t: Vec<f64> = (0..g.edge_count()).map(|_| rand::Rng::random::<f64>(&mut r)).collect();
        let catalog = MotifCatalog::default();
        let report = motif_keep_report(&g, &t, &catalog).unwrap();
        let membership = motif_edge_membership(&g, &catalog).unwrap();
        for (kind, rate) in report {
            let member: Vec<f64> = (0..t.len()).filter(|&e| membership[&kind][e]).map(|e| t[e]).collect();
            match rate {
                None => prop_assert!(member.is_empty()),
                Some(v) => {
                    let lo = member.iter().copied().fold(1.0, f64::min);
                    let hi = member.iter().copied().fold(0.0, f64::max);
                    prop_assert!(lo - 1e-12 <= v && v <= hi + 1e-12);
                }
            }
        }
    }
}
