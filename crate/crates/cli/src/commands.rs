//! One function per subcommand. Each reads its inputs, runs the library and
//! writes its artifacts plus `provenance.json` into the output directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde_json::{json, Value as Json};
use sha2::{Digest, Sha256};

use structleak::attack::{check_theorem_bound, infer, train_attack, AttackConfig, AttackContext, PsiEncoder};
use structleak::eval::{
    attack_metrics, motif_keep_report, property_change, utility_eval, Bandwidth, EvalReport, UtilityConfig,
};
use structleak::graph::{load_graph, read_edge_list, read_labels, write_edge_list, MotifCatalog};
use structleak::homophily::{audit, HomophilyConfig, LabelMode};
use structleak::publisher::{degree_drop, probs_csv, publish, random_drop, train_sampler, PublishMode, SamplerConfig};
use structleak::synth::{
    generate, write_dataset, SynthConfig, EDGES_FILE, FEATURES_FILE, LABELS_FILE, UTILITY_LABELS_FILE,
};
use structleak::{Error, Graph, NodeLabels, Subgraph};

use crate::config::{Command, RunConfig};
use crate::failure::{CliError, Context};

pub const PROBS_FILE: &str = "probs.csv";
pub const PROVENANCE_FILE: &str = "provenance.json";

pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let out = cfg.out();
    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let result = match cfg.command {
        Command::Synth => synth(cfg, &out),
        Command::Audit => audit_cmd(cfg, &out),
        Command::Attack => attack(cfg, &out),
        Command::Publish => publish_cmd(cfg, &out),
        Command::Eval => eval(cfg, &out),
        Command::TheoremCheck => theorem_check(cfg, &out),
        Command::Sweep => sweep(cfg, &out),
    }?;
    write_json(&out.join(PROVENANCE_FILE), &provenance(cfg, result))
}

/// Command, resolved config, its hash and the tool version. Nothing
/// time- or host-dependent goes in, so reruns are byte-identical.
pub fn provenance(cfg: &RunConfig, result: Json) -> Json {
    let config = Json::Object(cfg.to_json());
    let canonical =
        serde_json::to_string(&json!({ "command": cfg.command.name(), "config": config })).expect("config serializes");
    json!({
        "command": cfg.command.name(),
        "config": config,
        "config_sha256": hex::encode(Sha256::digest(canonical.as_bytes())),
        "version": env!("CARGO_PKG_VERSION"),
        "result": result,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_json(path: &Path, value: &Json) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
    text.push('\n');
    write_text(path, &text)
}

fn choice<T: DeserializeOwned>(cfg: &RunConfig, key: &str) -> T {
    serde_json::from_value(Json::from(cfg.text(key))).unwrap_or_else(|_| panic!("`{key}` choice maps to a variant"))
}

struct Dataset {
    graph: Graph,
    labels: NodeLabels,
    utility: Option<NodeLabels>,
}

fn load_dataset(dir: &Path) -> Result<Dataset, CliError> {
    let optional = |name: &str| {
        let p = dir.join(name);
        p.exists().then_some(p)
    };
    let features = optional(FEATURES_FILE);
    let (graph, labels) =
        load_graph(&dir.join(EDGES_FILE), features.as_deref(), Some(&dir.join(LABELS_FILE))).in_module("graph-core")?;
    let utility = match optional(UTILITY_LABELS_FILE) {
        Some(p) => Some(labels_from_file(&p, graph.node_count())?),
        None => None,
    };
    Ok(Dataset { graph, labels, utility })
}

fn labels_from_file(path: &Path, n: usize) -> Result<NodeLabels, CliError> {
    let rows = read_labels(path).in_module("graph-core")?;
    let mut label = vec![None; n];
    let mut known = vec![false; n];
    let mut classes = 0;
    for (node, l, k) in rows {
        if node >= n {
            return Err(CliError::core("graph-core", Error::Range { id: node, count: n }));
        }
        label[node] = l;
        known[node] = k;
        if let Some(c) = l {
            classes = classes.max(c + 1);
        }
    }
    NodeLabels::new(label, known, classes).in_module("graph-core")
}

/// The published edge list over the original node set and features.
fn load_published(dir: &Path, original: &Graph) -> Result<Graph, CliError> {
    let file = read_edge_list(&dir.join(EDGES_FILE)).in_module("graph-core")?;
    if let Some(n) = file.declared_nodes {
        if n != original.node_count() {
            return Err(CliError::core(
                "eval",
                Error::Contract(format!(
                    "published graph has {n} nodes, original has {}",
                    original.node_count()
                )),
            ));
        }
    }
    if let Some(&(u, v)) = file.pairs.iter().find(|&&(u, v)| !original.has_edge(u, v)) {
        return Err(CliError::core(
            "eval",
            Error::Contract(format!("published edge ({u}, {v}) is not in the original graph")),
        ));
    }
    Graph::from_edges(original.node_count(), file.pairs, original.features().clone()).in_module("graph-core")
}

/// Keep probabilities from a `probs.csv`, aligned to the canonical edges of
/// `graph`.
fn load_probs(path: &Path, graph: &Graph) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let parse = |line: usize, msg: String| {
        CliError::core(
            "eval",
            Error::Parse {
                path: path.to_path_buf(),
                line,
                message: msg,
            },
        )
    };
    let mut probs = vec![None; graph.edge_count()];
    for (i, line) in text.lines().enumerate().skip(1) {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [u, v, t] = fields[..] else {
            return Err(parse(i + 1, "expected u,v,keep_prob".into()));
        };
        let (u, v, t): (usize, usize, f64) = match (u.parse(), v.parse(), t.parse()) {
            (Ok(u), Ok(v), Ok(t)) => (u, v, t),
            _ => return Err(parse(i + 1, format!("malformed row `{line}`"))),
        };
        let e = graph
            .edge_id(u, v)
            .ok_or_else(|| parse(i + 1, format!("edge ({u}, {v}) is not in the graph")))?;
        probs[e] = Some(t);
    }
    probs
        .into_iter()
        .enumerate()
        .map(|(e, p)| p.ok_or_else(|| parse(0, format!("no keep probability for edge {:?}", graph.edges()[e]))))
        .collect()
}

fn attack_config(cfg: &RunConfig) -> AttackConfig {
    AttackConfig {
        hops: cfg.usize("k"),
        hidden: cfg.usize("hidden"),
        degree_threshold: cfg.usize("theta"),
        lr: cfg.float("lr"),
        weight_decay: cfg.float("weight_decay"),
        epochs: if cfg.has("epochs") {
            cfg.usize("epochs")
        } else {
            AttackConfig::default().epochs
        },
        update_interval: cfg.usize("update_interval"),
        variant: choice(cfg, "attack_variant"),
        seed: cfg.seed(),
    }
}

fn sampler_config(cfg: &RunConfig) -> SamplerConfig {
    SamplerConfig {
        hidden: cfg.usize("sampler_hidden"),
        scorer_hidden: cfg.usize("scorer_hidden"),
        temperature: cfg.float("epsilon"),
        gamma: cfg.float("gamma"),
        eta: cfg.float("eta"),
        lambda: cfg.float("lambda"),
        smoothing: cfg.float("smoothing"),
        degree_threshold: cfg.usize("theta"),
        update_interval: cfg.usize("update_interval"),
        lr: cfg.float("sampler_lr"),
        weight_decay: cfg.float("sampler_weight_decay"),
        epochs: cfg.usize("sampler_epochs"),
        attack_steps: cfg.usize("attack_steps"),
        sampler_steps: cfg.usize("sampler_steps"),
        label_mode: choice(cfg, "label_mode"),
        variant: choice(cfg, "variant"),
        seed: cfg.seed(),
    }
}

fn publish_mode(cfg: &RunConfig) -> PublishMode {
    match cfg.text("publish_mode") {
        "threshold" => PublishMode::Threshold,
        _ => PublishMode::Bernoulli { seed: cfg.seed() },
    }
}

fn synth(cfg: &RunConfig, out: &Path) -> Result<Json, CliError> {
    let (n, seed) = (cfg.usize("n"), cfg.seed());
    let mut sc = match cfg.text("scenario") {
        "p" => SynthConfig::scenario_p(n, seed),
        "r" => SynthConfig::scenario_r(n, seed),
        _ => SynthConfig::null(n, seed),
    };
    sc.feature_dim = cfg.usize("feature_dim");
    sc.feature_signal = cfg.float("feature_signal");
    sc.utility_signal = cfg.float("utility_signal");
    sc.known_fraction = cfg.float("known_fraction");
    let data = generate(&sc).in_module("synth")?;
    write_dataset(out, &data).in_module("synth")?;
    Ok(json!({
        "synth_config": sc,
        "nodes": data.graph.node_count(),
        "edges": data.graph.edge_count(),
        "known": data.private.known_nodes().len(),
    }))
}

fn audit_cmd(cfg: &RunConfig, out: &Path) -> Result<Json, CliError> {
    let data = load_dataset(&cfg.path("input").expect("required"))?;
    let hc = HomophilyConfig {
        degree_threshold: cfg.usize("theta"),
        label_mode: match cfg.text("labels") {
            "known" => LabelMode::KnownOnly,
            _ => LabelMode::PseudoAugmented,
        },
    };
    let report = audit(&data.graph, &data.labels, &hc).in_module("homophily")?;
    write_json(
        &out.join("homophily.json"),
        &serde_json::to_value(&report).expect("report serializes"),
    )?;
    write_text(&out.join("homophily.csv"), &report.to_csv())?;
    Ok(json!({ "mean_prox": report.mean_prox(), "mean_role": report.mean_role() }))
}

fn attack(cfg: &RunConfig, out: &Path) -> Result<Json, CliError> {
    let data = load_dataset(&cfg.path("input").expect("required"))?;
    let ac = attack_config(cfg);
    let (model, history) = train_attack(&data.graph, &data.labels, &ac).in_module("attack")?;
    let pred = infer(&model, &data.graph, &data.labels).in_module("attack")?;
    model.params.save(&out.join("model.params.json")).in_module("attack")?;
    write_text(&out.join("model.json"), &model.sidecar_json().in_module("attack")?)?;
    write_text(&out.join("predictions.csv"), &pred.to_csv())?;
    let metrics = match attack_metrics(&pred.distribution, &data.labels) {
        Ok(m) => serde_json::to_value(m).expect("metrics serialize"),
        Err(Error::Contract(_)) => Json::Null,
        Err(e) => return Err(CliError::core("eval", e)),
    };
    let summary = json!({
        "hidden_metrics": metrics,
        "train_accuracy": history.train_accuracy,
        "final_loss": history.loss.last(),
        "epochs": history.loss.len(),
    });
    write_json(&out.join("metrics.json"), &summary)?;
    Ok(summary)
}

fn publish_cmd(cfg: &RunConfig, out: &Path) -> Result<Json, CliError> {
    let data = load_dataset(&cfg.path("input").expect("required"))?;
    let trained =
        train_sampler(&data.graph, &data.labels, &attack_config(cfg), &sampler_config(cfg)).in_module("publisher")?;
    let published = publish(&data.graph, &trained.keep_probabilities, publish_mode(cfg)).in_module("publisher")?;
    write_edge_list(&out.join(EDGES_FILE), &published.graph).in_module("graph-core")?;
    write_text(
        &out.join(PROBS_FILE),
        &probs_csv(&data.graph, &trained.keep_probabilities),
    )?;
    trained
        .model
        .params
        .save(&out.join("sampler.params.json"))
        .in_module("publisher")?;
    Ok(json!({
        "epochs": trained.history.len(),
        "final_loss": trained.history.last(),
        "retention": published.retention(),
        "edges_kept": published.graph.edge_count(),
        "edges_original": data.graph.edge_count(),
    }))
}

/// Accuracy of a freshly trained attack on `graph` over the hidden nodes.
fn retrained_attack_accuracy(
    graph: &Graph,
    labels: &NodeLabels,
    ac: &AttackConfig,
) -> Result<(f64, Option<f64>), CliError> {
    let (model, _) = train_attack(graph, labels, ac).in_module("attack")?;
    let ctx = AttackContext::for_model(graph, &model).in_module("attack")?;
    let dist = model.predict(&ctx).in_module("attack")?;
    let m = attack_metrics(&dist, labels).in_module("eval")?;
    Ok((m.accuracy, m.auc))
}

fn utility_config(cfg: &RunConfig, ac: &AttackConfig) -> UtilityConfig {
    UtilityConfig {
        train_fraction: cfg.float("utility_fraction"),
        classifier: ac.clone(),
        ..UtilityConfig::default()
    }
}

fn eval(cfg: &RunConfig, out: &Path) -> Result<Json, CliError> {
    let data = load_dataset(&cfg.path("input").expect("required"))?;
    let published_dir = cfg.path("published");
    let published = match &published_dir {
        Some(dir) => load_published(dir, &data.graph)?,
        None => data.graph.clone(),
    };
    let ac = attack_config(cfg);
    let mut report = EvalReport::default();
    let (acc, auc) = retrained_attack_accuracy(&published, &data.labels, &ac)?;
    report.attack_accuracy = Some(acc);
    report.attack_auc = auc;

    let bandwidth = match cfg.text("bandwidth") {
        "fixed" => Bandwidth::Fixed(cfg.float("sigma")),
        _ => Bandwidth::MedianHeuristic,
    };
    let change = property_change(&data.graph, &published, bandwidth).in_module("eval")?;
    report.mmd_degree = Some(change.mmd_degree);
    report.mmd_clustering = Some(change.mmd_clustering);

    let mut notes = Vec::new();
    if let Some(probs_path) = published_dir.map(|d| d.join(PROBS_FILE)).filter(|p| p.exists()) {
        let probs = load_probs(&probs_path, &data.graph)?;
        match motif_keep_report(&data.graph, &probs, &MotifCatalog::default()) {
            Ok(r) => {
                report.motif_avg_prob = r.into_iter().map(|(k, v)| (k.name().to_string(), v)).collect();
            }
            Err(Error::Resource(msg)) => notes.push(format!("motif report skipped: {msg}")),
            Err(e) => return Err(CliError::core("eval", e)),
        }
    }
    if let Some(utility) = &data.utility {
        report.utility_accuracy = Some(utility_eval(&published, utility, &utility_config(cfg, &ac)).in_module("eval")?);
    } else {
        notes.push(format!("no {UTILITY_LABELS_FILE}; utility not evaluated"));
    }
    let body = json!({
        "report": report,
        "notes": notes,
        "config": Json::Object(cfg.to_json()),
    });
    write_json(&out.join("eval_report.json"), &body)?;
    Ok(serde_json::to_value(&report).expect("report serializes"))
}

/// Random graph on `nodes` vertices with edge probability 1/2, centered at 0.
fn random_subgraph(nodes: usize, hops: usize, rng: &mut ChaCha8Rng) -> Subgraph {
    let mut edges = Vec::new();
    for u in 0..nodes {
        for v in u + 1..nodes {
            if rng.random::<bool>() {
                edges.push((u, v));
            }
        }
    }
    Subgraph {
        center: 0,
        nodes: (0..nodes).collect(),
        edge_ids: (0..edges.len()).collect(),
        edges,
        hops,
    }
}

/// Ego networks above this size are left out of input-driven checks; the
/// spectral norms are dense decompositions.
const MAX_CHECK_NODES: usize = 200;

fn theorem_check(cfg: &RunConfig, out: &Path) -> Result<Json, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed());
    let k = cfg.usize("k");
    let pairs = cfg.usize("pairs");
    let mut draw_pair: Box<dyn FnMut(&mut ChaCha8Rng) -> (Subgraph, Subgraph)> = match cfg.path("input") {
        Some(dir) => {
            let data = load_dataset(&dir)?;
            let mut by_size: BTreeMap<usize, Vec<Subgraph>> = BTreeMap::new();
            for v in 0..data.graph.node_count() {
                let sub = data.graph.ego_network(v, k).in_module("graph-core")?;
                if sub.node_count() <= MAX_CHECK_NODES {
                    by_size.entry(sub.node_count()).or_default().push(sub);
                }
            }
            let groups: Vec<Vec<Subgraph>> = by_size.into_values().filter(|g| g.len() >= 2).collect();
            if groups.is_empty() {
                return Err(CliError::core(
                    "attack",
                    Error::Contract(format!(
                        "no two {k}-hop ego networks of equal size (at most {MAX_CHECK_NODES} nodes)"
                    )),
                ));
            }
            Box::new(move |rng| {
                let g = &groups[rng.random_range(0..groups.len())];
                let picked: Vec<&Subgraph> = g.choose_multiple(rng, 2).collect();
                (picked[0].clone(), picked[1].clone())
            })
        }
        None => {
            let nodes = cfg.usize("subgraph_nodes");
            Box::new(move |rng| (random_subgraph(nodes, k, rng), random_subgraph(nodes, k, rng)))
        }
    };
    let width = cfg.usize("width");
    let mut widths = vec![1];
    widths.extend(std::iter::repeat_n(width, cfg.usize("layers")));
    let mut checked = 0usize;
    let mut violations = Vec::new();
    let mut max_ratio: f64 = 0.0;
    let mut records = Vec::new();
    for e in 0..cfg.usize("encoders") {
        let encoder = PsiEncoder::random(&widths, rng.random()).in_module("attack")?;
        for p in 0..pairs {
            let (a, b) = draw_pair(&mut rng);
            let r = check_theorem_bound(&a, &b, &encoder).in_module("attack")?;
            checked += 1;
            if r.rhs > 0.0 {
                max_ratio = max_ratio.max(r.lhs / r.rhs);
            }
            if !r.holds {
                violations.push(json!({ "encoder": e, "pair": p, "lhs": r.lhs, "rhs": r.rhs }));
            }
            records.push(json!({
                "encoder": e,
                "pair": p,
                "nodes": a.node_count(),
                "lhs": r.lhs,
                "rhs": r.rhs,
                "tau": r.tau,
                "laplacian_distance": r.laplacian_distance,
            }));
        }
    }
    let summary = json!({
        "checked": checked,
        "violations": violations.len(),
        "max_lhs_over_rhs": max_ratio,
    });
    write_json(
        &out.join("theorem.json"),
        &json!({ "summary": summary, "violations": violations, "pairs": records }),
    )?;
    Ok(summary)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn sweep(cfg: &RunConfig, out: &Path) -> Result<Json, CliError> {
    let data = load_dataset(&cfg.path("input").expect("required"))?;
    let ac = attack_config(cfg);
    let base = sampler_config(cfg);
    let uc = utility_config(cfg, &ac);
    let utility = |g: &Graph| -> Result<Option<f64>, CliError> {
        data.utility
            .as_ref()
            .map(|u| utility_eval(g, u, &uc).in_module("eval"))
            .transpose()
    };

    let mut tradeoff = String::from("gamma,eta,retention,attack_acc,utility_acc\n");
    let mut points = 0;
    for &gamma in cfg.floats("gammas") {
        for &eta in cfg.floats("etas") {
            let sc = SamplerConfig {
                gamma,
                eta,
                ..base.clone()
            };
            let trained = train_sampler(&data.graph, &data.labels, &ac, &sc).in_module("publisher")?;
            let published =
                publish(&data.graph, &trained.keep_probabilities, publish_mode(cfg)).in_module("publisher")?;
            let (acc, _) = retrained_attack_accuracy(&published.graph, &data.labels, &ac)?;
            let util = utility(&published.graph)?;
            writeln!(
                tradeoff,
                "{gamma},{eta},{:.6},{acc:.6},{}",
                published.retention(),
                fmt_opt(util)
            )
            .unwrap();
            points += 1;
        }
    }
    write_text(&out.join("tradeoff.csv"), &tradeoff)?;

    let mut baselines = String::from("method,retention,attack_acc,utility_acc\n");
    let (acc, _) = retrained_attack_accuracy(&data.graph, &data.labels, &ac)?;
    writeln!(
        baselines,
        "original,1.000000,{acc:.6},{}",
        fmt_opt(utility(&data.graph)?)
    )
    .unwrap();
    for &r in cfg.floats("retentions") {
        let drops = [
            (
                "random-drop",
                random_drop(&data.graph, r, cfg.seed()).in_module("publisher")?,
            ),
            ("degree-drop", degree_drop(&data.graph, r).in_module("publisher")?),
        ];
        for (name, g) in drops {
            let (acc, _) = retrained_attack_accuracy(&g, &data.labels, &ac)?;
            writeln!(baselines, "{name},{r:.6},{acc:.6},{}", fmt_opt(utility(&g)?)).unwrap();
        }
    }
    write_text(&out.join("baselines.csv"), &baselines)?;
    Ok(json!({ "tradeoff_points": points, "retentions": cfg.floats("retentions") }))
}

/// Best-effort error record next to the other outputs.
pub fn write_error_record(out: Option<PathBuf>, err: &CliError) {
    if let Some(dir) = out {
        if dir.is_dir() {
            let _ = write_json(&dir.join("error.json"), &err.to_json());
        }
    }
}
