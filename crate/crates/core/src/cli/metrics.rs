//! CSV learning curves.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::trainer::{Aggregate, Algorithm, EpisodeSummary};

pub const RUN_HEADER: &str = "run,episode,social_welfare,running_avg,seconds";
pub const AGGREGATE_HEADER: &str = "episode,mean_welfare,var_welfare,mean_running_avg,var_running_avg";

/// `printf("%g")`: six significant digits, trailing zeros removed, exponent
/// form outside `[1e-4, 1e6)`.
pub fn format_g(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        trim_zeros(&format!("{x:.*}", (5 - exp) as usize)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn run_path(dir: &Path, algo: Algorithm, run: usize) -> PathBuf {
    dir.join(format!("{algo}_run{run}.csv"))
}

pub fn aggregate_path(dir: &Path, algo: Algorithm) -> PathBuf {
    dir.join(format!("{algo}_aggregate.csv"))
}

/// Create `dir` if needed and make sure files can be written there.
pub fn check_output_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::config("out", format!("cannot create {}: {e}", dir.display())))?;
    let probe = dir.join(".nfsip-write-probe");
    File::create(&probe)
        .and_then(|_| std::fs::remove_file(&probe))
        .map_err(|e| Error::config("out", format!("{} is not writable: {e}", dir.display())))
}

/// Per-run CSV, written row by row as episodes finish.
pub struct RunWriter {
    run: usize,
    out: BufWriter<File>,
}

impl RunWriter {
    pub fn create(dir: &Path, algo: Algorithm, run: usize) -> Result<Self> {
        let mut out = BufWriter::new(File::create(run_path(dir, algo, run))?);
        writeln!(out, "{RUN_HEADER}")?;
        Ok(Self { run, out })
    }

    pub fn row(&mut self, s: &EpisodeSummary) -> Result<()> {
        writeln!(
            self.out,
            "{},{},{},{},{}",
            self.run,
            s.episode,
            format_g(s.welfare),
            format_g(s.running_avg),
            format_g(s.seconds)
        )?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

pub fn write_aggregate(dir: &Path, algo: Algorithm, agg: &Aggregate) -> Result<()> {
    let mut out = BufWriter::new(File::create(aggregate_path(dir, algo))?);
    writeln!(out, "{AGGREGATE_HEADER}")?;
    for e in 0..agg.mean_welfare.len() {
        writeln!(
            out,
            "{e},{},{},{},{}",
            format_g(agg.mean_welfare[e]),
            format_g(agg.var_welfare[e]),
            format_g(agg.mean_running_avg[e]),
            format_g(agg.var_running_avg[e])
        )?;
    }
    out.flush()?;
    Ok(())
}
