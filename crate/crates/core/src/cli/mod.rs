//! Command-line entry point: `train`, `matrix`, `gradcheck` and `replay`.

mod config;
mod metrics;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clap::{Arg, ArgAction, ArgMatches, Command};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agents::{argmax, gradcheck, sample_categorical};
use crate::envs::{trajectory_line, Environment, GridEnv};
use crate::error::{Error, Result};
use crate::matrixgames::{median_episodes_to_threshold, neural_selfplay_on_matrix_game};
use crate::neural::{predict, softmax, Checkpoint};
use crate::trainer::{aggregate, run_experiment_with, RunMetrics};

pub use config::{parse_grid, ConfigMap, ExperimentConfig, MatrixConfig, EXPERIMENT_KEYS, MATRIX_KEYS, TRAIN_KEYS};
pub use metrics::{
    aggregate_path, check_output_dir, format_g, run_path, write_aggregate, RunWriter, AGGREGATE_HEADER, RUN_HEADER,
};

pub const OUT_ENV: &str = "NFSIP_OUT";
const DEFAULT_OUT: &str = "results";

fn key_flags(keys: &[&'static str]) -> Vec<Arg> {
    keys.iter()
        .map(|&k| {
            Arg::new(k)
                .long(k.replace('_', "-"))
                .value_name("VALUE")
                .allow_hyphen_values(true)
                .help(format!("override `{k}`"))
        })
        .collect()
}

fn config_arg() -> Arg {
    Arg::new("config")
        .long("config")
        .short('c')
        .value_name("FILE")
        .help("key = value config file")
}

pub fn command() -> Command {
    let experiment_keys: Vec<&'static str> = EXPERIMENT_KEYS.iter().chain(TRAIN_KEYS).copied().collect();
    let matrix_keys: Vec<&'static str> = MATRIX_KEYS.iter().chain(TRAIN_KEYS).copied().collect();
    Command::new("nfsip")
        .about("Neural fictitious self-imitation play for cooperative multi-agent RL")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(
            Command::new("train")
                .about("Run seeded training runs and write per-run and aggregate CSV curves")
                .arg(config_arg())
                .args(key_flags(&experiment_keys)),
        )
        .subcommand(
            Command::new("matrix")
                .about("Train on an identical-interest matrix game and report convergence")
                .arg(config_arg())
                .args(key_flags(&matrix_keys)),
        )
        .subcommand(
            Command::new("gradcheck")
                .about("Compare analytic loss gradients with finite differences")
                .arg(Arg::new("draws").long("draws").default_value("20"))
                .arg(Arg::new("seed").long("seed").default_value("0")),
        )
        .subcommand(
            Command::new("replay")
                .about("Play one episode from a checkpoint and print the trajectory")
                .arg(
                    Arg::new("checkpoint")
                        .long("checkpoint")
                        .value_name("FILE")
                        .required(true),
                )
                .arg(
                    Arg::new("network")
                        .long("network")
                        .value_parser(["policy", "q"])
                        .default_value("policy"),
                )
                .arg(Arg::new("episode-seed").long("episode-seed").default_value("0"))
                .arg(Arg::new("greedy").long("greedy").action(ArgAction::SetTrue))
                .arg(config_arg())
                .args(key_flags(&experiment_keys)),
        )
}

fn load_map(m: &ArgMatches, keys: &[&str]) -> Result<ConfigMap> {
    let mut map = match m.get_one::<String>("config") {
        Some(path) => ConfigMap::load(Path::new(path))?,
        None => ConfigMap::default(),
    };
    for &k in keys {
        if let Some(v) = m.get_one::<String>(k) {
            map.set(k, v.clone());
        }
    }
    Ok(map)
}

fn experiment_config(m: &ArgMatches) -> Result<ExperimentConfig> {
    let keys: Vec<&str> = EXPERIMENT_KEYS.iter().chain(TRAIN_KEYS).copied().collect();
    ExperimentConfig::from_map(load_map(m, &keys)?)
}

fn parse_flag<T: std::str::FromStr>(m: &ArgMatches, name: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = m.get_one::<String>(name).map(String::as_str).unwrap_or_default();
    raw.parse()
        .map_err(|e| Error::config(name, format!("cannot parse {raw:?}: {e}")))
}

/// Parse `args` (including the program name) and run the chosen command.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<i32>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return Ok(code);
        }
    };
    match matches.subcommand() {
        Some(("train", m)) => {
            let mut config = experiment_config(m)?;
            if config.out.is_none() {
                config.out = Some(std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from(DEFAULT_OUT), PathBuf::from));
            }
            let runs = train(&config)?;
            let dir = config.out.as_deref().expect("output directory set");
            for (r, m) in runs.iter().enumerate() {
                writeln!(
                    out,
                    "{} run {r}: final-{} mean welfare {}",
                    config.train.algo,
                    config.window,
                    format_g(m.final_mean(config.window))
                )?;
            }
            writeln!(out, "wrote {}", aggregate_path(dir, config.train.algo).display())?;
            Ok(0)
        }
        Some(("matrix", m)) => {
            let keys: Vec<&str> = MATRIX_KEYS.iter().chain(TRAIN_KEYS).copied().collect();
            let config = MatrixConfig::from_map(load_map(m, &keys)?)?;
            matrix(&config, out)
        }
        Some(("gradcheck", m)) => {
            let reports = gradcheck::run_gradcheck(parse_flag(m, "draws")?, parse_flag(m, "seed")?)?;
            let mut ok = true;
            for r in &reports {
                ok &= r.passed();
                let verdict = if r.passed() { "ok" } else { "FAIL" };
                writeln!(out, "{:<22} {:.3e}  {verdict}", r.name, r.max_relative_error)?;
            }
            Ok(if ok { 0 } else { 1 })
        }
        Some(("replay", m)) => {
            let config = experiment_config(m)?;
            let ck = Checkpoint::load(m.get_one::<String>("checkpoint").expect("required"))?;
            let network = m.get_one::<String>("network").map(String::as_str).unwrap_or("policy");
            replay(
                &config,
                &ck,
                network,
                parse_flag(m, "episode-seed")?,
                m.get_flag("greedy"),
                out,
            )?;
            Ok(0)
        }
        _ => unreachable!("subcommand required"),
    }
}

/// Validate the output directory, run every seed and write the CSV files.
pub fn train(config: &ExperimentConfig) -> Result<Vec<RunMetrics>> {
    config.validate()?;
    let dir = config
        .out
        .as_deref()
        .ok_or_else(|| Error::config("out", "no output directory"))?;
    check_output_dir(dir)?;
    let writers: Vec<Mutex<Option<RunWriter>>> = (0..config.runs)
        .map(|r| RunWriter::create(dir, config.train.algo, r).map(|w| Mutex::new(Some(w))))
        .collect::<Result<_>>()?;
    let runs = run_experiment_with(config, |run, summary| {
        let mut slot = writers[run].lock().expect("writer lock");
        slot.as_mut().expect("open writer").row(summary)
    })?;
    for w in writers {
        if let Some(w) = w.into_inner().expect("writer lock") {
            w.finish()?;
        }
    }
    write_aggregate(dir, config.train.algo, &aggregate(&runs))?;
    Ok(runs)
}

fn matrix(config: &MatrixConfig, out: &mut dyn Write) -> Result<i32> {
    let mut runs = Vec::new();
    for r in 0..config.runs {
        let seed = config.seed.wrapping_add(r as u64);
        let run = neural_selfplay_on_matrix_game(&config.game, &config.suite, seed)?;
        let last = run.trace.last().map_or(0.0, |&(_, m)| m);
        let hit = run.first_hit.map_or_else(|| "never".to_string(), |e| e.to_string());
        writeln!(out, "seed {seed}: optimum mass {}  first hit {hit}", format_g(last))?;
        runs.push(run);
    }
    writeln!(
        out,
        "median episodes to {}: {}",
        config.suite.threshold,
        format_g(median_episodes_to_threshold(&runs, config.suite.episodes))
    )?;
    Ok(0)
}

fn replay(
    config: &ExperimentConfig,
    ck: &Checkpoint,
    network: &str,
    seed: u64,
    greedy: bool,
    out: &mut dyn Write,
) -> Result<()> {
    let params = ck
        .get(network)
        .ok_or_else(|| Error::Checkpoint(format!("no network named {network:?}")))?;
    let mut env = GridEnv::new(config.domain.clone(), seed)?;
    if params.architecture().input != env.observation_len() || params.architecture().output != env.num_actions() {
        return Err(Error::Checkpoint("network does not match the configured domain".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    writeln!(out, "step\tactions\trewards\tremaining")?;
    for t in 0.. {
        let mut actions = Vec::new();
        for i in 0..env.num_agents() {
            let row = predict(params, &env.observe(i)?)?;
            let a = if greedy || network == "q" {
                argmax(&row)
            } else {
                sample_categorical(&softmax(&row), &mut rng)
            };
            actions.push(a);
        }
        let (rewards, done) = env.step(&actions, &mut rng)?;
        writeln!(out, "{}", trajectory_line(t, &actions, &rewards, env.tasks_remaining()))?;
        if done {
            break;
        }
    }
    Ok(())
}
