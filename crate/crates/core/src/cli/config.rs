//! `key = value` configuration files.
//!
//! Parsing is two-pass: lines are collected into a key map (flags are merged
//! on top of it), then the typed config is built from defaults plus the map.
//! Keys left over after building are rejected.

use std::collections::BTreeMap;
use std::fmt::{Display, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::agents::EtaSchedule;
use crate::envs::{Domain, DomainSpec, Variant};
use crate::error::{Error, Result};
use crate::matrixgames::{MatrixGame, MatrixSuiteConfig};
use crate::neural::OptimizerKind;
use crate::trainer::{validate_train_config, Algorithm, TrainConfig};

pub const TRAIN_KEYS: &[&str] = &[
    "hidden",
    "optimizer",
    "eta",
    "eta_schedule",
    "eta_timescale",
    "epsilon",
    "epsilon_decay",
    "decay_interval",
    "decay_unit",
    "lr_policy",
    "lr_q",
    "batch_size",
    "sil_iterations",
    "gamma",
    "q_discount",
    "sync_interval",
    "warmup",
    "rl_capacity",
    "sl_capacity",
    "si_capacity",
    "baseline",
    "sil_q_gradient",
];

pub const EXPERIMENT_KEYS: &[&str] = &[
    "algo",
    "domain",
    "variant",
    "grid",
    "generic_agents",
    "firetrucks",
    "ambulances",
    "tasks",
    "horizon",
    "escalation",
    "reward",
    "episodes",
    "runs",
    "seed",
    "window",
    "checkpoint_every",
    "out",
    "record_wallclock",
];

pub const MATRIX_KEYS: &[&str] = &[
    "algo",
    "players",
    "actions",
    "payoffs",
    "episodes",
    "runs",
    "seed",
    "eval_every",
    "threshold",
];

const DEFAULT_ETA_TIMESCALE: f64 = 500.0;

/// Raw key/value pairs awaiting typed parsing.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
}

impl ConfigMap {
    /// Parse `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}", n + 1), format!("expected `key = value`, got {line:?}")))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::config(format!("line {}", n + 1), "empty key"));
            }
            if map.entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(Error::config(key, format!("duplicate key on line {}", n + 1)));
            }
        }
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Set or replace a value; used for command-line overrides.
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| Error::config(key, format!("cannot parse {v:?}: {e}"))),
        }
    }

    fn take_or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        Ok(self.take(key)?.unwrap_or(default))
    }

    fn take_with<T>(&mut self, key: &str, parse: impl FnOnce(&str) -> std::result::Result<T, String>) -> Result<Option<T>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(v) => parse(&v).map(Some).map_err(|e| Error::config(key, e)),
        }
    }

    fn finish(self) -> Result<()> {
        match self.entries.keys().next() {
            None => Ok(()),
            Some(k) => Err(Error::config(k.as_str(), "unknown key")),
        }
    }
}

pub fn parse_grid(s: &str) -> std::result::Result<(usize, usize), String> {
    let parts: Vec<&str> = s.split('x').collect();
    match parts.as_slice() {
        [w, h] => {
            let w = w.trim().parse::<usize>().map_err(|e| format!("bad width in {s:?}: {e}"))?;
            let h = h.trim().parse::<usize>().map_err(|e| format!("bad height in {s:?}: {e}"))?;
            Ok((w, h))
        }
        _ => Err(format!("expected WxH, got {s:?}")),
    }
}

fn parse_list<T: FromStr>(s: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: Display,
{
    s.split(',')
        .map(|p| p.trim().parse::<T>().map_err(|e| format!("bad entry {p:?}: {e}")))
        .collect()
}

fn parse_optimizer(s: &str) -> std::result::Result<OptimizerKind, String> {
    match s {
        "adam" => Ok(OptimizerKind::adam()),
        "plain" | "sgd" => Ok(OptimizerKind::Plain),
        _ => Err(format!("unknown optimizer {s:?} (adam, plain)")),
    }
}

fn optimizer_name(kind: OptimizerKind) -> &'static str {
    match kind {
        OptimizerKind::Plain => "plain",
        OptimizerKind::Adam { .. } => "adam",
    }
}

fn join<T: Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// Pull every training key out of `map` on top of `base`.
fn take_train(map: &mut ConfigMap, mut base: TrainConfig) -> Result<TrainConfig> {
    if let Some(h) = map.take_with("hidden", parse_list::<usize>)? {
        base.hidden = h;
    }
    if let Some(o) = map.take_with("optimizer", parse_optimizer)? {
        base.optimizer = o;
    }
    base.eta = map.take_or("eta", base.eta)?;
    let default_timescale = match base.eta_schedule {
        EtaSchedule::Harmonic { timescale } => timescale,
        EtaSchedule::Fixed => DEFAULT_ETA_TIMESCALE,
    };
    let timescale = map.take_or("eta_timescale", default_timescale)?;
    let schedule = map.take_with("eta_schedule", |s| match s {
        "fixed" => Ok(EtaSchedule::Fixed),
        "harmonic" => Ok(EtaSchedule::Harmonic { timescale }),
        _ => Err(format!("unknown eta schedule {s:?} (fixed, harmonic)")),
    })?;
    base.eta_schedule = match schedule.unwrap_or(base.eta_schedule) {
        EtaSchedule::Harmonic { .. } => EtaSchedule::Harmonic { timescale },
        EtaSchedule::Fixed => EtaSchedule::Fixed,
    };
    base.epsilon = map.take_or("epsilon", base.epsilon)?;
    base.epsilon_decay = map.take_or("epsilon_decay", base.epsilon_decay)?;
    base.decay_interval = map.take_or("decay_interval", base.decay_interval)?;
    base.decay_unit = map.take_or("decay_unit", base.decay_unit)?;
    base.lr_policy = map.take_or("lr_policy", base.lr_policy)?;
    base.lr_q = map.take_or("lr_q", base.lr_q)?;
    base.batch_size = map.take_or("batch_size", base.batch_size)?;
    base.sil_iterations = map.take_or("sil_iterations", base.sil_iterations)?;
    base.gamma = map.take_or("gamma", base.gamma)?;
    base.q_discount = map.take_or("q_discount", base.q_discount)?;
    base.sync_interval = map.take_or("sync_interval", base.sync_interval)?;
    base.warmup = map.take_or("warmup", base.warmup)?;
    base.rl_capacity = map.take_or("rl_capacity", base.rl_capacity)?;
    base.sl_capacity = map.take_or("sl_capacity", base.sl_capacity)?;
    base.si_capacity = map.take_or("si_capacity", base.si_capacity)?;
    base.baseline = map.take_or("baseline", base.baseline)?;
    base.sil_q_gradient = map.take_or("sil_q_gradient", base.sil_q_gradient)?;
    Ok(base)
}

fn write_train(out: &mut String, t: &TrainConfig) {
    let mut kv = |k: &str, v: &dyn Display| {
        let _ = writeln!(out, "{k} = {v}");
    };
    kv("hidden", &join(&t.hidden));
    kv("optimizer", &optimizer_name(t.optimizer));
    kv("eta", &t.eta);
    match t.eta_schedule {
        EtaSchedule::Fixed => kv("eta_schedule", &"fixed"),
        EtaSchedule::Harmonic { timescale } => {
            kv("eta_schedule", &"harmonic");
            kv("eta_timescale", &timescale);
        }
    }
    kv("epsilon", &t.epsilon);
    kv("epsilon_decay", &t.epsilon_decay);
    kv("decay_interval", &t.decay_interval);
    kv("decay_unit", &t.decay_unit);
    kv("lr_policy", &t.lr_policy);
    kv("lr_q", &t.lr_q);
    kv("batch_size", &t.batch_size);
    kv("sil_iterations", &t.sil_iterations);
    kv("gamma", &t.gamma);
    kv("q_discount", &t.q_discount);
    kv("sync_interval", &t.sync_interval);
    kv("warmup", &t.warmup);
    kv("rl_capacity", &t.rl_capacity);
    kv("sl_capacity", &t.sl_capacity);
    kv("si_capacity", &t.si_capacity);
    kv("baseline", &t.baseline);
    kv("sil_q_gradient", &t.sil_q_gradient);
}

/// Everything the `train` command needs.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    pub domain: DomainSpec,
    pub episodes: u64,
    pub runs: usize,
    pub seed: u64,
    /// Running-average window in episodes.
    pub window: usize,
    /// Write checkpoints every this many episodes; 0 disables them.
    pub checkpoint_every: u64,
    pub out: Option<PathBuf>,
    pub record_wallclock: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            domain: DomainSpec::benchmark(Domain::BoxPushing, Variant::V1),
            episodes: 2000,
            runs: 5,
            seed: 0,
            window: 100,
            checkpoint_every: 0,
            out: None,
            record_wallclock: false,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_map(ConfigMap::parse(text)?)
    }

    pub fn from_map(mut map: ConfigMap) -> Result<Self> {
        let d = Self::default();
        let algo = map.take_or("algo", d.train.algo)?;
        let domain = map.take_or("domain", d.domain.domain)?;
        let variant = map.take_or("variant", d.domain.variant)?;
        let mut spec = DomainSpec::benchmark(domain, variant);
        if let Some((w, h)) = map.take_with("grid", parse_grid)? {
            spec = spec.with_grid(w, h);
        }
        spec.generic_agents = map.take_or("generic_agents", spec.generic_agents)?;
        spec.firetrucks = map.take_or("firetrucks", spec.firetrucks)?;
        spec.ambulances = map.take_or("ambulances", spec.ambulances)?;
        spec.tasks = map.take_or("tasks", spec.tasks)?;
        spec.horizon = map.take_or("horizon", spec.horizon)?;
        spec.escalation = map.take_or("escalation", spec.escalation)?;
        spec.reward = map.take_or("reward", spec.reward)?;

        let train = take_train(&mut map, TrainConfig { algo, ..d.train })?;
        let config = Self {
            train,
            domain: spec,
            episodes: map.take_or("episodes", d.episodes)?,
            runs: map.take_or("runs", d.runs)?,
            seed: map.take_or("seed", d.seed)?,
            window: map.take_or("window", d.window)?,
            checkpoint_every: map.take_or("checkpoint_every", d.checkpoint_every)?,
            out: map.take::<PathBuf>("out")?,
            record_wallclock: map.take_or("record_wallclock", d.record_wallclock)?,
        };
        map.finish()?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        validate_train_config(&self.train)?;
        self.domain.validate()?;
        if self.episodes == 0 {
            return Err(Error::config("episodes", "must be > 0"));
        }
        if self.runs == 0 {
            return Err(Error::config("runs", "must be > 0"));
        }
        if self.window == 0 {
            return Err(Error::config("window", "must be > 0"));
        }
        Ok(())
    }

    /// Serialize every key; parsing the result gives back `self`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let s = &self.domain;
        let mut kv = |k: &str, v: &dyn Display| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("algo", &self.train.algo);
        kv("domain", &s.domain);
        kv("variant", &s.variant);
        kv("grid", &format!("{}x{}", s.width, s.height));
        kv("generic_agents", &s.generic_agents);
        kv("firetrucks", &s.firetrucks);
        kv("ambulances", &s.ambulances);
        kv("tasks", &s.tasks);
        kv("horizon", &s.horizon);
        kv("escalation", &s.escalation);
        kv("reward", &s.reward);
        kv("episodes", &self.episodes);
        kv("runs", &self.runs);
        kv("seed", &self.seed);
        kv("window", &self.window);
        kv("checkpoint_every", &self.checkpoint_every);
        if let Some(out_dir) = &self.out {
            kv("out", &out_dir.display());
        }
        kv("record_wallclock", &self.record_wallclock);
        write_train(&mut out, &self.train);
        out
    }
}

/// Everything the `matrix` command needs.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixConfig {
    pub game: MatrixGame,
    pub suite: MatrixSuiteConfig,
    pub runs: usize,
    pub seed: u64,
}

impl MatrixConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_map(ConfigMap::parse(text)?)
    }

    /// Defaults to the 2x2 game with payoff 1 at `(0, 0)`.
    pub fn from_map(mut map: ConfigMap) -> Result<Self> {
        let algo = map.take_or("algo", Algorithm::Nfsip)?;
        let players = map.take_or("players", 2usize)?;
        let actions = map.take_or("actions", 2usize)?;
        let payoffs = map.take_with("payoffs", parse_list::<f64>)?;
        let game = match payoffs {
            Some(p) => MatrixGame::new(players, actions, p),
            None => {
                let mut p = vec![0.0; actions.checked_pow(players as u32).unwrap_or(0)];
                if let Some(first) = p.first_mut() {
                    *first = 1.0;
                }
                MatrixGame::new(players, actions, p)
            }
        }
        .map_err(|e| Error::config("payoffs", e.to_string()))?;
        let base = MatrixSuiteConfig::gwfp(algo);
        let suite = MatrixSuiteConfig {
            episodes: map.take_or("episodes", base.episodes)?,
            eval_every: map.take_or("eval_every", base.eval_every)?,
            threshold: map.take_or("threshold", base.threshold)?,
            train: take_train(&mut map, base.train)?,
        };
        let config = Self {
            game,
            suite,
            runs: map.take_or("runs", 5)?,
            seed: map.take_or("seed", 0)?,
        };
        map.finish()?;
        validate_train_config(&config.suite.train)?;
        if config.runs == 0 {
            return Err(Error::config("runs", "must be > 0"));
        }
        if config.suite.episodes == 0 {
            return Err(Error::config("episodes", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&config.suite.threshold) {
            return Err(Error::config("threshold", "must be in [0, 1]"));
        }
        Ok(config)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "algo = {}", self.suite.train.algo);
        let _ = writeln!(out, "players = {}", self.game.players());
        let _ = writeln!(out, "actions = {}", self.game.actions());
        let _ = writeln!(out, "payoffs = {}", join(self.game.payoffs()));
        let _ = writeln!(out, "episodes = {}", self.suite.episodes);
        let _ = writeln!(out, "eval_every = {}", self.suite.eval_every);
        let _ = writeln!(out, "threshold = {}", self.suite.threshold);
        let _ = writeln!(out, "runs = {}", self.runs);
        let _ = writeln!(out, "seed = {}", self.seed);
        write_train(&mut out, &self.suite.train);
        out
    }
}
