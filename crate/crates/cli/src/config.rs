//! Run configuration.
//!
//! Every subcommand owns a flat table of keys. A key can come from a
//! `--flag`, from a config file (`key=value` lines or a JSON object), or from
//! its default, in that order of precedence. The resolved table is what gets
//! echoed into provenance, and feeding that echo back as a config file
//! reproduces the same [`RunConfig`].

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Arg, ArgAction, ArgMatches};
use serde_json::{Map, Value as Json};

use crate::failure::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Command {
    Synth,
    Audit,
    Attack,
    Publish,
    Eval,
    TheoremCheck,
    Sweep,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Synth,
        Command::Audit,
        Command::Attack,
        Command::Publish,
        Command::Eval,
        Command::TheoremCheck,
        Command::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Audit => "audit",
            Command::Attack => "attack",
            Command::Publish => "publish",
            Command::Eval => "eval",
            Command::TheoremCheck => "theorem-check",
            Command::Sweep => "sweep",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }

    fn about(self) -> &'static str {
        match self {
            Command::Synth => "Generate a synthetic dataset with planted homophily",
            Command::Audit => "Per-node proximity and structure-role homophily ratios",
            Command::Attack => "Train the dual-channel attribute-inference attack and predict hidden labels",
            Command::Publish => "Train the edge sampler and publish a sampled graph",
            Command::Eval => "Attack accuracy, utility and property drift of a published graph",
            Command::TheoremCheck => "Check the representation-distance bound on sampled subgraph pairs",
            Command::Sweep => "Privacy/utility trade-off over a (gamma, eta) grid plus drop baselines",
        }
    }

    /// Keys accepted by this subcommand, in display order.
    pub fn keys(self) -> Vec<&'static Key> {
        let mut keys: Vec<&'static Key> = vec![&SEED, &OUT];
        let attack_model = [
            &K,
            &THETA,
            &HIDDEN,
            &LR,
            &WEIGHT_DECAY,
            &UPDATE_INTERVAL,
            &ATTACK_VARIANT,
        ];
        let sampler = [
            &SAMPLER_HIDDEN,
            &SCORER_HIDDEN,
            &SAMPLER_LR,
            &SAMPLER_WEIGHT_DECAY,
            &SAMPLER_EPOCHS,
            &ATTACK_STEPS,
            &SAMPLER_STEPS,
            &GAMMA,
            &ETA,
            &LAMBDA,
            &EPSILON,
            &SMOOTHING,
            &VARIANT,
            &LABEL_MODE,
            &PUBLISH_MODE,
        ];
        match self {
            Command::Synth => keys.extend([
                &SCENARIO,
                &N,
                &FEATURE_DIM,
                &FEATURE_SIGNAL,
                &UTILITY_SIGNAL,
                &KNOWN_FRACTION,
            ]),
            Command::Audit => keys.extend([&INPUT, &THETA, &LABELS]),
            Command::Attack => {
                keys.push(&INPUT);
                keys.extend(attack_model);
                keys.push(&EPOCHS);
            }
            Command::Publish => {
                keys.push(&INPUT);
                keys.extend(attack_model);
                keys.extend(sampler);
            }
            Command::Eval => {
                keys.extend([&INPUT, &PUBLISHED]);
                keys.extend(attack_model);
                keys.extend([&EPOCHS, &BANDWIDTH, &SIGMA, &UTILITY_FRACTION]);
            }
            Command::TheoremCheck => keys.extend([
                &INPUT_OPTIONAL,
                &K_THEOREM,
                &PAIRS,
                &ENCODERS,
                &LAYERS,
                &WIDTH,
                &SUBGRAPH_NODES,
            ]),
            Command::Sweep => {
                keys.push(&INPUT);
                keys.extend(attack_model);
                keys.push(&EPOCHS);
                keys.extend(sampler);
                keys.extend([&UTILITY_FRACTION, &GAMMAS, &ETAS, &RETENTIONS]);
            }
        }
        keys
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Kind {
    UInt {
        min: u64,
    },
    /// Inclusive bounds; `open_min` excludes the lower one.
    Float {
        min: f64,
        max: f64,
        open_min: bool,
    },
    Choice(&'static [&'static str]),
    Path,
    FloatList {
        min: f64,
        max: f64,
    },
}

#[derive(Debug)]
pub struct Key {
    pub name: &'static str,
    pub flag: &'static str,
    pub kind: Kind,
    pub default: Option<&'static str>,
    pub required: bool,
    pub help: &'static str,
}

const fn key(name: &'static str, flag: &'static str, kind: Kind, default: &'static str, help: &'static str) -> Key {
    Key {
        name,
        flag,
        kind,
        default: Some(default),
        required: false,
        help,
    }
}

const fn required(name: &'static str, flag: &'static str, kind: Kind, help: &'static str) -> Key {
    Key {
        name,
        flag,
        kind,
        default: None,
        required: true,
        help,
    }
}

const fn optional(name: &'static str, flag: &'static str, kind: Kind, help: &'static str) -> Key {
    Key {
        name,
        flag,
        kind,
        default: None,
        required: false,
        help,
    }
}

const fn uint(min: u64) -> Kind {
    Kind::UInt { min }
}

const fn closed(min: f64, max: f64) -> Kind {
    Kind::Float {
        min,
        max,
        open_min: false,
    }
}

const fn positive() -> Kind {
    Kind::Float {
        min: 0.0,
        max: f64::INFINITY,
        open_min: true,
    }
}

const fn non_negative() -> Kind {
    closed(0.0, f64::INFINITY)
}

static SEED: Key = required("seed", "seed", uint(0), "Seed for every random draw of the run");
static OUT: Key = required("out", "out", Kind::Path, "Output directory");
static INPUT: Key = required(
    "input",
    "input",
    Kind::Path,
    "Dataset directory (edges.txt, features.csv, labels.csv)",
);
static INPUT_OPTIONAL: Key = optional(
    "input",
    "input",
    Kind::Path,
    "Dataset directory to sample ego networks from; random graphs when absent",
);
static PUBLISHED: Key = optional(
    "published",
    "published",
    Kind::Path,
    "Published bundle directory; the input graph itself when absent",
);

static SCENARIO: Key = key(
    "scenario",
    "scenario",
    Kind::Choice(&["p", "r", "null"]),
    "p",
    "Planted scenario",
);
static N: Key = key("n", "n", uint(2), "1000", "Node count");
static FEATURE_DIM: Key = key("feature_dim", "feature-dim", uint(1), "8", "Feature dimension");
static FEATURE_SIGNAL: Key = key(
    "feature_signal",
    "feature-signal",
    closed(0.0, 1.0),
    "0",
    "Fraction of feature dimensions carrying the private label",
);
static UTILITY_SIGNAL: Key = key(
    "utility_signal",
    "utility-signal",
    closed(0.0, 1.0),
    "0.5",
    "Fraction of feature dimensions carrying the utility label",
);
static KNOWN_FRACTION: Key = key(
    "known_fraction",
    "known-fraction",
    Kind::Float {
        min: 0.0,
        max: 1.0,
        open_min: true,
    },
    "0.1",
    "Fraction of nodes whose private label is public",
);

static THETA: Key = key(
    "theta",
    "theta",
    uint(0),
    "5",
    "Degree-difference threshold for structural similarity",
);
static LABELS: Key = key(
    "labels",
    "labels",
    Kind::Choice(&["all", "known"]),
    "all",
    "Count every label in the file, or only the public ones",
);

static K: Key = key(
    "k",
    "k",
    uint(1),
    "2",
    "Ego-network hop count of the structure-role channel",
);
static HIDDEN: Key = key("hidden", "hidden", uint(1), "64", "Attack hidden width");
static LR: Key = key("lr", "lr", positive(), "0.001", "Attack learning rate");
static WEIGHT_DECAY: Key = key(
    "weight_decay",
    "weight-decay",
    non_negative(),
    "0.0005",
    "Attack weight decay",
);
static EPOCHS: Key = key("epochs", "epochs", uint(0), "300", "Attack training epochs");
static UPDATE_INTERVAL: Key = key(
    "update_interval",
    "update-interval",
    uint(1),
    "10",
    "Epochs between pseudo-label refreshes",
);
static ATTACK_VARIANT: Key = key(
    "attack_variant",
    "attack-variant",
    Kind::Choice(&["full", "equal", "prox-only", "role-only"]),
    "full",
    "Channel routing of the attack",
);

static SAMPLER_HIDDEN: Key = key(
    "sampler_hidden",
    "sampler-hidden",
    uint(1),
    "64",
    "Sampler encoder width",
);
static SCORER_HIDDEN: Key = key("scorer_hidden", "scorer-hidden", uint(1), "32", "Edge scorer width");
static SAMPLER_LR: Key = key("sampler_lr", "sampler-lr", positive(), "0.002", "Sampler learning rate");
static SAMPLER_WEIGHT_DECAY: Key = key(
    "sampler_weight_decay",
    "sampler-weight-decay",
    non_negative(),
    "0.0005",
    "Sampler weight decay",
);
static SAMPLER_EPOCHS: Key = key(
    "sampler_epochs",
    "sampler-epochs",
    uint(0),
    "200",
    "Sampler training epochs",
);
static ATTACK_STEPS: Key = key(
    "attack_steps",
    "attack-steps",
    uint(1),
    "1",
    "Attack updates per sampler epoch",
);
static SAMPLER_STEPS: Key = key(
    "sampler_steps",
    "sampler-steps",
    uint(1),
    "1",
    "Sampler updates per epoch",
);
static GAMMA: Key = key("gamma", "gamma", non_negative(), "5", "Weight of the adversarial term");
static ETA: Key = key("eta", "eta", non_negative(), "5", "Weight of the disentangling term");
static LAMBDA: Key = key("lambda", "lambda", non_negative(), "1", "Weight of the retention term");
static EPSILON: Key = key("epsilon", "epsilon", positive(), "0.5", "Relaxation temperature");
static SMOOTHING: Key = key(
    "smoothing",
    "smoothing",
    positive(),
    "1",
    "Width of the soft degree-similarity kernel",
);
static VARIANT: Key = key(
    "variant",
    "variant",
    Kind::Choice(&["full", "adv-only", "dis-only"]),
    "full",
    "Which sampler loss terms are active",
);
static LABEL_MODE: Key = key(
    "label_mode",
    "label-mode",
    Kind::Choice(&["known-only", "pseudo-augmented"]),
    "pseudo-augmented",
    "Labels counted by the disentangling term",
);
static PUBLISH_MODE: Key = key(
    "publish_mode",
    "publish-mode",
    Kind::Choice(&["bernoulli", "threshold"]),
    "bernoulli",
    "Keep each edge with probability T, or keep edges with T >= 0.5",
);

static BANDWIDTH: Key = key(
    "bandwidth",
    "bandwidth",
    Kind::Choice(&["median", "fixed"]),
    "median",
    "MMD kernel bandwidth rule",
);
static SIGMA: Key = key(
    "sigma",
    "sigma",
    positive(),
    "1",
    "Kernel bandwidth when bandwidth=fixed",
);
static UTILITY_FRACTION: Key = key(
    "utility_fraction",
    "utility-fraction",
    Kind::Float {
        min: 0.0,
        max: 1.0,
        open_min: true,
    },
    "0.1",
    "Training fraction of the utility classifier",
);

static K_THEOREM: Key = key("k", "k", uint(1), "1", "Ego-network hop count");
static PAIRS: Key = key("pairs", "pairs", uint(1), "100", "Subgraph pairs per encoder");
static ENCODERS: Key = key("encoders", "encoders", uint(1), "10", "Random encoders");
static LAYERS: Key = key("layers", "layers", uint(1), "2", "Encoder depth K");
static WIDTH: Key = key("width", "width", uint(1), "8", "Encoder width");
static SUBGRAPH_NODES: Key = key(
    "subgraph_nodes",
    "subgraph-nodes",
    uint(2),
    "6",
    "Node count of random subgraphs when no input is given",
);

static GAMMAS: Key = key(
    "gammas",
    "gammas",
    Kind::FloatList {
        min: 0.0,
        max: f64::INFINITY,
    },
    "0,1,5",
    "Comma-separated gamma grid",
);
static ETAS: Key = key(
    "etas",
    "etas",
    Kind::FloatList {
        min: 0.0,
        max: f64::INFINITY,
    },
    "0,5",
    "Comma-separated eta grid",
);
static RETENTIONS: Key = key(
    "retentions",
    "retentions",
    Kind::FloatList { min: 0.0, max: 1.0 },
    "0.5,0.7,0.9",
    "Edge retention levels of the drop baselines",
);

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    UInt(u64),
    Float(f64),
    Text(String),
    Floats(Vec<f64>),
}

impl Value {
    fn to_json(&self) -> Json {
        match self {
            Value::UInt(v) => Json::from(*v),
            Value::Float(v) => Json::from(*v),
            Value::Text(s) => Json::from(s.as_str()),
            Value::Floats(v) => Json::from(v.clone()),
        }
    }
}

/// A fully resolved run: subcommand plus one value per present key.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    values: BTreeMap<&'static str, Value>,
}

impl RunConfig {
    fn get(&self, name: &str) -> &Value {
        self.values
            .get(name)
            .unwrap_or_else(|| panic!("`{name}` is not a resolved key of `{}`", self.command.name()))
    }

    pub fn has(&self, name: &str) -> bool {
        self.values.contains_key(name)
    }

    pub fn uint(&self, name: &str) -> u64 {
        match self.get(name) {
            Value::UInt(v) => *v,
            other => panic!("`{name}` is {other:?}, not an integer"),
        }
    }

    pub fn usize(&self, name: &str) -> usize {
        self.uint(name) as usize
    }

    pub fn float(&self, name: &str) -> f64 {
        match self.get(name) {
            Value::Float(v) => *v,
            other => panic!("`{name}` is {other:?}, not a number"),
        }
    }

    pub fn text(&self, name: &str) -> &str {
        match self.get(name) {
            Value::Text(s) => s,
            other => panic!("`{name}` is {other:?}, not text"),
        }
    }

    pub fn path(&self, name: &str) -> Option<PathBuf> {
        self.values.get(name).map(|_| PathBuf::from(self.text(name)))
    }

    pub fn floats(&self, name: &str) -> &[f64] {
        match self.get(name) {
            Value::Floats(v) => v,
            other => panic!("`{name}` is {other:?}, not a list"),
        }
    }

    pub fn seed(&self) -> u64 {
        self.uint("seed")
    }

    pub fn out(&self) -> PathBuf {
        self.path("out").expect("out is required")
    }

    /// The resolved keys as a JSON object.
    pub fn to_json(&self) -> Map<String, Json> {
        self.values.iter().map(|(k, v)| (k.to_string(), v.to_json())).collect()
    }
}

/// Raw setting before type checking.
#[derive(Clone, Debug)]
enum Raw {
    Text(String),
    Json(Json),
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::usage(msg)
}

fn parse_value(key: &Key, raw: &Raw) -> Result<Value, CliError> {
    let bad = |why: &str| usage(format!("invalid value for `{}`: {why}", key.name));
    let text = |raw: &Raw| -> Result<String, CliError> {
        match raw {
            Raw::Text(s) => Ok(s.trim().to_string()),
            Raw::Json(Json::String(s)) => Ok(s.trim().to_string()),
            Raw::Json(Json::Number(n)) => Ok(n.to_string()),
            Raw::Json(other) => Err(bad(&format!("unexpected JSON value {other}"))),
        }
    };
    let number = |s: &str| -> Result<f64, CliError> {
        let v: f64 = s.parse().map_err(|_| bad(&format!("`{s}` is not a number")))?;
        if !v.is_finite() {
            return Err(bad("must be finite"));
        }
        Ok(v)
    };
    match key.kind {
        Kind::UInt { min } => {
            let s = text(raw)?;
            let v: u64 = s
                .parse()
                .map_err(|_| bad(&format!("`{s}` is not a non-negative integer")))?;
            if v < min {
                return Err(bad(&format!("must be at least {min}")));
            }
            Ok(Value::UInt(v))
        }
        Kind::Float { min, max, open_min } => {
            let v = number(&text(raw)?)?;
            let low_ok = if open_min { v > min } else { v >= min };
            if !low_ok || v > max {
                let open = if open_min { "(" } else { "[" };
                return Err(bad(&format!("{v} is outside {open}{min}, {max}]")));
            }
            Ok(Value::Float(v))
        }
        Kind::Choice(options) => {
            let s = text(raw)?;
            if options.contains(&s.as_str()) {
                Ok(Value::Text(s))
            } else {
                Err(bad(&format!("`{s}` is not one of {}", options.join(", "))))
            }
        }
        Kind::Path => {
            let s = text(raw)?;
            if s.is_empty() {
                return Err(bad("empty path"));
            }
            Ok(Value::Text(s))
        }
        Kind::FloatList { min, max } => {
            let items: Vec<f64> = match raw {
                Raw::Json(Json::Array(items)) => items
                    .iter()
                    .map(|j| number(&text(&Raw::Json(j.clone()))?))
                    .collect::<Result<_, _>>()?,
                other => {
                    let s = text(other)?;
                    s.split(',').map(|t| number(t.trim())).collect::<Result<_, _>>()?
                }
            };
            if items.is_empty() {
                return Err(bad("empty list"));
            }
            if let Some(v) = items.iter().find(|&&v| v < min || v > max) {
                return Err(bad(&format!("{v} is outside [{min}, {max}]")));
            }
            Ok(Value::Floats(items))
        }
    }
}

/// Reads a config file: a JSON object, a provenance record (its `config`
/// member), or `key=value` lines with `#` comments.
fn read_config_file(path: &Path, command: Command) -> Result<BTreeMap<String, Raw>, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config file {}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    if text.trim_start().starts_with('{') {
        let json: Json = serde_json::from_str(&text)
            .map_err(|e| usage(format!("config file {} is not valid JSON: {e}", path.display())))?;
        let mut obj = match json {
            Json::Object(o) => o,
            _ => return Err(usage("config JSON must be an object")),
        };
        if let (Some(Json::String(cmd)), Some(Json::Object(_))) = (obj.get("command"), obj.get("config")) {
            if cmd != command.name() {
                return Err(usage(format!(
                    "config file records command `{cmd}`, not `{}`",
                    command.name()
                )));
            }
            let Some(Json::Object(inner)) = obj.remove("config") else {
                unreachable!("checked above")
            };
            obj = inner;
        }
        for (k, v) in obj {
            out.insert(k.replace('-', "_"), Raw::Json(v));
        }
    } else {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("{}:{}: expected key=value", path.display(), i + 1)))?;
            let k = k.trim().replace('-', "_");
            if out.insert(k.clone(), Raw::Text(v.trim().to_string())).is_some() {
                return Err(usage(format!("{}:{}: duplicate key `{k}`", path.display(), i + 1)));
            }
        }
    }
    Ok(out)
}

pub fn cli() -> clap::Command {
    let mut app = clap::Command::new("structleak")
        .about("Structural privacy leakage: measurement, attribute inference and private graph publishing")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true);
    for command in Command::ALL {
        let mut sub = clap::Command::new(command.name()).about(command.about()).arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .action(ArgAction::Set)
                .help("Config file (key=value lines or JSON); flags override it"),
        );
        for key in command.keys() {
            let mut help = key.help.to_string();
            match (key.default, key.required) {
                (Some(d), _) => help.push_str(&format!(" [default: {d}]")),
                (None, true) => help.push_str(" [required]"),
                (None, false) => {}
            }
            sub = sub.arg(
                Arg::new(key.name)
                    .long(key.flag)
                    .value_name("VALUE")
                    .action(ArgAction::Set)
                    .help(help),
            );
        }
        app = app.subcommand(sub);
    }
    app
}

/// Parses `argv` (including the program name) into a resolved config.
pub fn parse_args<I, T>(argv: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = cli().try_get_matches_from(argv).map_err(CliError::from_clap)?;
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let command = Command::from_name(name).expect("registered subcommand");
    resolve(command, sub)
}

fn resolve(command: Command, matches: &ArgMatches) -> Result<RunConfig, CliError> {
    let file = match matches.get_one::<String>("config") {
        Some(path) => read_config_file(Path::new(path), command)?,
        None => BTreeMap::new(),
    };
    let keys = command.keys();
    if let Some(unknown) = file.keys().find(|k| !keys.iter().any(|key| key.name == k.as_str())) {
        return Err(usage(format!("unknown key `{unknown}` for `{}`", command.name())));
    }
    let mut values = BTreeMap::new();
    for key in keys {
        let raw = matches
            .get_one::<String>(key.name)
            .map(|s| Raw::Text(s.clone()))
            .or_else(|| file.get(key.name).cloned())
            .or_else(|| key.default.map(|d| Raw::Text(d.to_string())));
        match raw {
            Some(raw) => {
                values.insert(key.name, parse_value(key, &raw)?);
            }
            None if key.required => {
                return Err(usage(format!("missing required key `{}`", key.name)));
            }
            None => {}
        }
    }
    Ok(RunConfig { command, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<RunConfig, CliError> {
        parse_args(std::iter::once("structleak").chain(args.iter().copied()))
    }

    #[test]
    fn defaults_fill_unset_keys() {
        let cfg = parse(&["attack", "--seed", "3", "--out", "o", "--input", "d"]).unwrap();
        assert_eq!(cfg.uint("k"), 2);
        assert_eq!(cfg.float("lr"), 0.001);
        assert_eq!(cfg.text("attack_variant"), "full");
    }

    #[test]
    fn range_errors_name_the_key() {
        let err = parse(&["synth", "--seed", "1", "--out", "o", "--known-fraction", "1.5"]).unwrap_err();
        assert_eq!(err.code, 2);
        assert!(err.message.contains("known_fraction"), "{}", err.message);
    }

    #[test]
    fn list_values_parse() {
        let cfg = parse(&[
            "sweep", "--seed", "1", "--out", "o", "--input", "d", "--gammas", "0, 2.5",
        ])
        .unwrap();
        assert_eq!(cfg.floats("gammas"), &[0.0, 2.5]);
    }

    #[test]
    fn every_command_has_unique_keys() {
        for c in Command::ALL {
            let keys = c.keys();
            for (i, a) in keys.iter().enumerate() {
                assert!(
                    keys[i + 1..].iter().all(|b| b.name != a.name),
                    "{} repeats {}",
                    c.name(),
                    a.name
                );
            }
        }
    }
}
