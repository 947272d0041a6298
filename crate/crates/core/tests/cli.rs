use std::fs;

use nfsip::cli::{self, ExperimentConfig, AGGREGATE_HEADER, RUN_HEADER};
use nfsip::neural::Checkpoint;
use nfsip::trainer::Algorithm;

fn run(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let code = cli::run(std::iter::once("nfsip").chain(args.iter().copied()), &mut out).unwrap();
    (code, String::from_utf8(out).unwrap())
}

const SMALL: &[&str] = &[
    "--grid",
    "3x3",
    "--generic-agents",
    "2",
    "--tasks",
    "2",
    "--episodes",
    "12",
    "--warmup",
    "40",
    "--hidden",
    "8,8",
];

#[test]
fn flags_override_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    fs::write(&cfg, "algo = nfsip\nruns = 2\n").unwrap();
    let mut map = nfsip::cli::ConfigMap::load(&cfg).unwrap();
    map.set("algo", "nfsp");
    let c = ExperimentConfig::from_map(map).unwrap();
    assert_eq!(c.train.algo, Algorithm::Nfsp);
    assert_eq!(c.runs, 2);
}

#[test]
fn train_writes_per_run_and_aggregate_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    fs::write(&cfg, "# small\nalgo = nfsip\nruns = 3\n").unwrap();
    let out = dir.path().join("out");
    let mut args = vec!["train", "--config", cfg.to_str().unwrap(), "--algo", "nfsp", "--out", out.to_str().unwrap()];
    args.extend_from_slice(SMALL);
    let (code, _) = run(&args);
    assert_eq!(code, 0);
    for r in 0..3 {
        let text = fs::read_to_string(out.join(format!("nfsp_run{r}.csv"))).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(RUN_HEADER));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 12);
        for (e, row) in rows.iter().enumerate() {
            let cols: Vec<&str> = row.split(',').collect();
            assert_eq!(cols[0], r.to_string());
            assert_eq!(cols[1], e.to_string());
            assert_eq!(cols[4], "0");
        }
    }
    let agg = fs::read_to_string(out.join("nfsp_aggregate.csv")).unwrap();
    assert_eq!(agg.lines().next(), Some(AGGREGATE_HEADER));
    assert_eq!(agg.lines().count(), 13);
    assert!(!out.join("nfsip_run0.csv").exists());
}

#[test]
fn single_run_aggregate_has_zero_variance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut args = vec!["train", "--runs", "1", "--out", out];
    args.extend_from_slice(SMALL);
    assert_eq!(run(&args).0, 0);
    let agg = fs::read_to_string(dir.path().join("nfsip_aggregate.csv")).unwrap();
    for row in agg.lines().skip(1) {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[2], "0");
        assert_eq!(cols[4], "0");
    }
}

#[test]
fn unwritable_output_fails_before_training() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = blocker.join("sub");
    let mut args = vec!["nfsip", "train", "--out", out.to_str().unwrap()];
    args.extend_from_slice(SMALL);
    let err = cli::run(args, &mut Vec::new()).unwrap_err();
    assert!(err.to_string().contains("out"), "{err}");
}

#[test]
fn bad_config_is_a_field_error() {
    let err = cli::run(["nfsip", "train", "--grid", "9x9x9"], &mut Vec::new()).unwrap_err();
    assert!(err.to_string().contains("grid"), "{err}");
    let err = cli::run(["nfsip", "train", "--batch-size", "-3"], &mut Vec::new()).unwrap_err();
    assert!(err.to_string().contains("batch_size"), "{err}");
}

#[test]
fn usage_errors_exit_nonzero() {
    assert_ne!(run(&[]).0, 0);
    assert_ne!(run(&["frobnicate"]).0, 0);
}

#[test]
fn gradcheck_reports_every_loss() {
    let (code, out) = run(&["gradcheck", "--draws", "2"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 8);
    assert!(out.lines().all(|l| l.ends_with("ok")));
}

#[test]
fn matrix_reads_inline_payoffs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("game.cfg");
    fs::write(&cfg, "players = 2\nactions = 2\npayoffs = 1, 0, 0, 0\nepisodes = 100\nruns = 1\nalgo = nfsp\n").unwrap();
    let (code, out) = run(&["matrix", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.contains("seed 0"), "{out}");
    assert!(out.contains("median episodes"), "{out}");
}

#[test]
fn checkpoints_load_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut args = vec!["train", "--runs", "1", "--checkpoint-every", "6", "--out", out];
    args.extend_from_slice(SMALL);
    assert_eq!(run(&args).0, 0);
    let ckpt = dir.path().join("nfsip_run0.ckpt");
    let ck = Checkpoint::load(&ckpt).unwrap();
    assert_eq!(ck.names().collect::<Vec<_>>(), ["q", "target_q", "policy"]);

    let mut args = vec!["replay", "--checkpoint", ckpt.to_str().unwrap(), "--greedy"];
    args.extend_from_slice(&SMALL[..6]);
    let (code, text) = run(&args);
    assert_eq!(code, 0);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "step\tactions\trewards\tremaining");
    assert!(lines.len() >= 2 && lines.len() <= 51);

    let args = ["replay", "--checkpoint", ckpt.to_str().unwrap(), "--grid", "4x4"];
    assert!(cli::run(std::iter::once("nfsip").chain(args), &mut Vec::new()).is_err());
}
