//! Parallel replica runner. Replica `i` of a configuration is a pure
//! function of `(config, i)`: its seed comes from the master seed and the
//! index alone, so reruns and resumed runs reproduce the same bytes, and
//! any prefix of the output file is a valid partial run.

use crate::config::ExperimentConfig;
use crate::HarnessError;
use rangelab_core::energy::energy_interpolated;
use rangelab_core::rangekit::range_process;
use rangelab_core::silt::pair_count_process;
use rangelab_core::walks::{replica_seed, sample_path};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const REPLICA_FILE: &str = "replicas.jsonl";
pub const CONFIG_FILE: &str = "config.json";

/// One replica line of a run. Grid-valued fields hold one entry per
/// configured grid time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicaResult {
    pub replica: u64,
    pub seed: u64,
    /// Interpolated range at each grid time; empty when the replica failed.
    pub r: Vec<f64>,
    /// Cumulative self-intersection pair counts at each grid time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<u64>>,
    /// Raw interpolated energies of the configured kernel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Wall seconds, reported in the run summary only: output files must
    /// stay byte-identical across reruns, so timing is never serialized.
    #[serde(skip)]
    pub elapsed: f64,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub output: PathBuf,
    pub computed: usize,
    pub resumed: usize,
    pub failed: usize,
    pub elapsed: f64,
}

/// Runs one replica, isolating any failure into the `error` field so a bad
/// replica cannot take down the run.
pub fn compute_replica(cfg: &ExperimentConfig, replica: u64) -> ReplicaResult {
    let started = Instant::now();
    let seed = replica_seed(cfg.master_seed, replica);
    let mut out = ReplicaResult {
        replica,
        seed,
        r: Vec::new(),
        pairs: None,
        energy: None,
        error: None,
        elapsed: 0.0,
    };
    if let Err(e) = fill_replica(cfg, seed, &mut out) {
        out.r.clear();
        out.pairs = None;
        out.energy = None;
        out.error = Some(e.to_string());
    }
    out.elapsed = started.elapsed().as_secs_f64();
    out
}

fn fill_replica(
    cfg: &ExperimentConfig,
    seed: u64,
    out: &mut ReplicaResult,
) -> Result<(), HarnessError> {
    let path = sample_path(&cfg.walk, cfg.n, seed)?;
    let rp = range_process(&path)?;
    let nf = cfg.n as f64;
    out.r = cfg
        .t_grid
        .iter()
        .map(|&t| rp.interpolate(t * nf))
        .collect::<Result<_, _>>()?;
    if cfg.record_pairs {
        let grid: Vec<u64> = cfg.t_grid.iter().map(|&t| (t * nf).floor() as u64).collect();
        out.pairs = Some(pair_count_process(&path, &grid)?);
    }
    if let Some(kernel) = &cfg.kernel {
        let energies: Result<Vec<f64>, _> = cfg
            .t_grid
            .iter()
            .map(|&t| energy_interpolated(&rp, kernel, t * nf))
            .collect();
        out.energy = Some(energies?);
    }
    Ok(())
}

/// Runs (or finishes) an experiment. Completed replicas already in the
/// output file are kept; missing ones are computed in parallel and appended
/// in index order, so the final file is identical to a single fresh run.
pub fn run_experiment(
    cfg: &ExperimentConfig,
) -> Result<(Vec<ReplicaResult>, RunSummary), HarnessError> {
    let started = Instant::now();
    cfg.validate()?;
    fs::create_dir_all(&cfg.output_dir)?;
    let cfg_path = cfg.output_dir.join(CONFIG_FILE);
    let out_path = cfg.output_dir.join(REPLICA_FILE);

    if cfg_path.exists() {
        let stored = ExperimentConfig::load(&cfg_path)?;
        if stored != *cfg {
            return Err(HarnessError::BadConfig(format!(
                "{} holds a different configuration; refusing to mix runs",
                cfg_path.display()
            )));
        }
    } else {
        cfg.save(&cfg_path)?;
    }

    let mut rows = load_prefix(&out_path, cfg)?;
    let resumed = rows.len();
    let todo = cfg.replicas - resumed as u64;
    let fresh: Vec<ReplicaResult> = (resumed as u64..cfg.replicas)
        .into_par_iter()
        .map(|i| compute_replica(cfg, i))
        .collect();

    // The resumable prefix property: line k is always replica k, appended
    // only after every earlier replica is on disk.
    let file = fs::OpenOptions::new().create(true).append(true).open(&out_path)?;
    let mut w = BufWriter::new(file);
    for row in &fresh {
        serde_json::to_writer(&mut w, row)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;

    rows.extend(fresh);
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    let summary = RunSummary {
        output: out_path,
        computed: todo as usize,
        resumed,
        failed,
        elapsed: started.elapsed().as_secs_f64(),
    };
    Ok((rows, summary))
}

/// Reads the valid leading lines of a replica file; a torn trailing line
/// (from an interrupted run) is truncated away so appends stay clean.
fn load_prefix(
    path: &Path,
    cfg: &ExperimentConfig,
) -> Result<Vec<ReplicaResult>, HarnessError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut rows: Vec<ReplicaResult> = Vec::new();
    let mut good_bytes: u64 = 0;
    let mut torn = false;
    let reader = BufReader::new(fs::File::open(path)?);
    for line in reader.lines() {
        let line = line?;
        match serde_json::from_str::<ReplicaResult>(&line) {
            Ok(row) if row.replica == rows.len() as u64 => {
                good_bytes += line.len() as u64 + 1;
                rows.push(row);
            }
            _ => {
                torn = true;
                break;
            }
        }
    }
    if rows.len() as u64 > cfg.replicas {
        return Err(HarnessError::BadConfig(format!(
            "{} already holds {} replicas but the run asks for {}",
            path.display(),
            rows.len(),
            cfg.replicas
        )));
    }
    if torn {
        let f = fs::OpenOptions::new().write(true).open(path)?;
        f.set_len(good_bytes)?;
    }
    Ok(rows)
}

/// Loads a finished (or partial) replica file, e.g. for `rangelab report`.
pub fn read_results(path: &Path) -> Result<Vec<ReplicaResult>, HarnessError> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut rows = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str::<ReplicaResult>(&line)?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rangelab_core::stats::mean;
    use rangelab_core::walks::WalkSpec;
    use std::path::PathBuf;

    fn tiny_config(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            walk: WalkSpec::srw(2).unwrap(),
            n: 512,
            replicas: 12,
            t_grid: vec![0.0, 0.25, 0.5, 1.0],
            regime_override: None,
            kernel: Some(rangelab_core::regvar::KernelSpec::power_decay(1.0, 0.5).unwrap()),
            record_pairs: true,
            depth: 4,
            master_seed: 99,
            output_dir: dir.to_path_buf(),
            profile: "fast".into(),
        }
    }

    fn scratch(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("rangelab-runner-{tag}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        dir
    }

    #[test]
    fn identical_configs_produce_identical_bytes() {
        let (da, db) = (scratch("a"), scratch("b"));
        let (rows_a, sa) = run_experiment(&tiny_config(&da)).unwrap();
        let (_rows_b, sb) = run_experiment(&tiny_config(&db)).unwrap();
        let bytes_a = fs::read(&sa.output).unwrap();
        let bytes_b = fs::read(&sb.output).unwrap();
        assert_eq!(bytes_a, bytes_b);
        assert_eq!(sa.failed, 0);
        assert!(rows_a.iter().all(|r| r.pairs.is_some() && r.energy.is_some()));
        // grid values are nondecreasing in t per replica
        for r in &rows_a {
            assert!(r.r.windows(2).all(|w| w[0] <= w[1]));
        }
        let _ = fs::remove_dir_all(da);
        let _ = fs::remove_dir_all(db);
    }

    /// Chopping the file mid-stream (with a torn trailing line) and
    /// rerunning must rebuild the exact same bytes, computing only the
    /// missing tail.
    #[test]
    fn resume_completes_a_truncated_run() {
        let dir = scratch("resume");
        let cfg = tiny_config(&dir);
        let (_, summary) = run_experiment(&cfg).unwrap();
        let full = fs::read(&summary.output).unwrap();

        let text = String::from_utf8(full.clone()).unwrap();
        let keep: Vec<&str> = text.lines().take(5).collect();
        let mut chopped = keep.join("\n");
        chopped.push('\n');
        chopped.push_str("{\"replica\":5,\"seed\":12,\"r\":[3");
        fs::write(&summary.output, chopped).unwrap();

        let (rows, resumed) = run_experiment(&cfg).unwrap();
        assert_eq!(resumed.resumed, 5);
        assert_eq!(resumed.computed, 7);
        assert_eq!(rows.len(), 12);
        assert_eq!(fs::read(&resumed.output).unwrap(), full);
        let _ = fs::remove_dir_all(dir);
    }

    /// Statistics folded from the returned stream equal statistics from the
    /// stored file read back.
    #[test]
    fn streamed_and_stored_rows_agree() {
        let dir = scratch("stream");
        let cfg = tiny_config(&dir);
        let (mut rows, summary) = run_experiment(&cfg).unwrap();
        let stored = read_results(&summary.output).unwrap();
        // timing is process-local and never serialized
        for row in &mut rows {
            row.elapsed = 0.0;
        }
        assert_eq!(rows, stored);
        let final_r: Vec<f64> = rows.iter().map(|r| *r.r.last().unwrap()).collect();
        let stored_r: Vec<f64> = stored.iter().map(|r| *r.r.last().unwrap()).collect();
        assert_eq!(mean(&final_r), mean(&stored_r));
        let _ = fs::remove_dir_all(dir);
    }

    #[test]
    fn conflicting_stored_config_is_rejected() {
        let dir = scratch("conflict");
        let cfg = tiny_config(&dir);
        run_experiment(&cfg).unwrap();
        let mut other = cfg.clone();
        other.master_seed = 100;
        assert!(matches!(run_experiment(&other), Err(HarnessError::BadConfig(_))));
        let _ = fs::remove_dir_all(dir);
    }

    /// Replica failures are isolated: the horizon exceeds the path budget,
    /// so every replica errors, yet the run itself completes and reports.
    #[test]
    fn per_replica_failures_are_recorded_not_fatal() {
        let dir = scratch("fail");
        let mut cfg = tiny_config(&dir);
        cfg.n = 1 << 25;
        cfg.replicas = 3;
        cfg.record_pairs = false;
        cfg.kernel = None;
        let (rows, summary) = run_experiment(&cfg).unwrap();
        assert_eq!(summary.failed, 3);
        assert!(rows.iter().all(|r| r.error.is_some() && r.r.is_empty()));
        let _ = fs::remove_dir_all(dir);
    }
}
