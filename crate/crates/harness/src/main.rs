//! Command-line front end: experiment runners for the range, intersection,
//! and energy ensembles, plus the deterministic self-test and the full
//! verification suite.

use clap::{Parser, Subcommand};
use rangelab_harness::acceptance::{run_acceptance, young_selftest};
use rangelab_harness::config::{env_thread_count, ExperimentConfig};
use rangelab_harness::reports::{estimate_sigma2, ks_report, KsReference};
use rangelab_harness::runner::{read_results, run_experiment, ReplicaResult, CONFIG_FILE, REPLICA_FILE};
use rangelab_harness::HarnessError;
use rangelab_core::regvar::make_scale_suite;
use rangelab_core::silt::{build_centering_table, silt_estimate, MIN_PILOT_REPLICAS};
use rangelab_core::stats::{holder_exponent, mean, variance};
use rangelab_core::walks::{replica_seed, sample_path};
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "rangelab", version, about = "Monte Carlo laboratory for lattice walk ranges")]
struct Cli {
    /// Worker threads (default: all cores, or RANGELAB_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run (or resume) the replica ensemble described by a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Fixed-time fluctuation report: normality of the final range and
    /// stability of the variance structure.
    Fluctuations {
        #[arg(long)]
        config: PathBuf,
    },
    /// Centered dyadic self-intersection estimates.
    Silt {
        #[arg(long)]
        config: PathBuf,
        /// Override the dyadic depth from the config.
        #[arg(long)]
        depth: Option<u32>,
    },
    /// Rescaled energy ensemble for the kernel named in the config.
    Energy {
        #[arg(long)]
        config: PathBuf,
    },
    /// Roughness exponent of the rescaled, centered range paths.
    Holder {
        #[arg(long)]
        config: PathBuf,
    },
    /// Deterministic oracles for the Young integration layer.
    YoungSelftest,
    /// Run the verification suite under a tolerance profile.
    Verify {
        #[arg(long, default_value = "fast")]
        profile: String,
        /// Where to write the JSON outcome list.
        #[arg(long, default_value = "acceptance.json")]
        out: PathBuf,
    },
    /// Summarise a finished experiment directory as CSV and gnuplot data.
    Report {
        /// Experiment directory holding config.json and replicas.jsonl.
        #[arg(long)]
        input: PathBuf,
        /// Output directory (default: the input directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads.or_else(env_thread_count);
    if let Some(k) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: could not size the thread pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

/// Successfully computed range rows of a finished experiment.
fn ok_rows(results: &[ReplicaResult]) -> Vec<Vec<f64>> {
    results.iter().filter(|r| r.error.is_none()).map(|r| r.r.clone()).collect()
}

fn load_experiment(path: &PathBuf) -> Result<(ExperimentConfig, Vec<ReplicaResult>), HarnessError> {
    let cfg = ExperimentConfig::load(path)?;
    let (results, summary) = run_experiment(&cfg)?;
    if summary.failed > 0 {
        eprintln!("note: {} of {} replicas failed; see the error field", summary.failed, cfg.replicas);
    }
    Ok((cfg, results))
}

fn run(command: Command) -> Result<ExitCode, HarnessError> {
    match command {
        Command::Simulate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let (_, summary) = run_experiment(&cfg)?;
            println!(
                "{} replicas ({} new, {} resumed, {} failed) in {:.1}s -> {}",
                cfg.replicas,
                summary.computed,
                summary.resumed,
                summary.failed,
                summary.elapsed,
                summary.output.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Fluctuations { config } => {
            let (cfg, results) = load_experiment(&config)?;
            let rows = ok_rows(&results);
            let finals: Vec<f64> = rows.iter().map(|r| *r.last().unwrap()).collect();
            let profile = rangelab_harness::profiles::get(&cfg.profile)?;
            let rep =
                ks_report("final-range normality", &finals, KsReference::FittedNormal, profile.ks_p_accept)?;
            println!("{}", rep.one_line());
            match estimate_sigma2(&rows, &cfg.t_grid, cfg.n, profile.sup_var_ratio_tol) {
                Ok(sig) => println!(
                    "sigma^2 = {:.6} (CI {:.6}..{:.6}); half-horizon {:.6}; covariance max rel err {:.3}",
                    sig.sigma2, sig.ci.0, sig.ci.1, sig.half_sigma2, sig.cov_max_rel_err
                ),
                Err(e) => println!("variance structure skipped: {e}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Silt { config, depth } => {
            let cfg = ExperimentConfig::load(&config)?;
            let depth = depth.unwrap_or(cfg.depth);
            let suite = make_scale_suite(&cfg.walk, cfg.n)?;
            // pilot stream lives far from the evaluation replicas
            let pilot_seed = cfg.master_seed ^ 0x9e37_79b9_7f4a_7c15;
            let pilots = MIN_PILOT_REPLICAS.max(cfg.replicas);
            let table = build_centering_table(&cfg.walk, cfg.n, 1.0, depth, pilots, pilot_seed)?;
            let gammas: Result<Vec<f64>, HarnessError> = (0..cfg.replicas as usize)
                .map(|i| {
                    let path = sample_path(&cfg.walk, cfg.n, replica_seed(cfg.master_seed, i as u64))?;
                    Ok(silt_estimate(&path, &suite, 1.0, depth, &table)?.gamma_hat)
                })
                .collect();
            let gammas = gammas?;
            println!(
                "gamma-hat over {} replicas (n = {}, depth {depth}): mean {:.6}, variance {:.6}",
                gammas.len(),
                cfg.n,
                mean(&gammas),
                variance(&gammas)
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Energy { config } => {
            let (cfg, results) = load_experiment(&config)?;
            if cfg.kernel.is_none() {
                return Err(HarnessError::BadConfig("energy runs need a kernel in the config".into()));
            }
            let energies: Vec<f64> = results
                .iter()
                .filter(|r| r.error.is_none())
                .filter_map(|r| r.energy.as_ref().and_then(|e| e.last().copied()))
                .collect();
            if energies.is_empty() {
                return Err(HarnessError::BadConfig("no stored energies; set a kernel and rerun".into()));
            }
            let profile = rangelab_harness::profiles::get(&cfg.profile)?;
            let rep =
                ks_report("energy normality", &energies, KsReference::FittedNormal, profile.ks_p_accept)?;
            println!(
                "energy at t = {:.3}: mean {:.6}, variance {:.6} over {} replicas",
                cfg.t_grid.last().unwrap(),
                mean(&energies),
                variance(&energies),
                energies.len()
            );
            println!("{}", rep.one_line());
            Ok(ExitCode::SUCCESS)
        }
        Command::Holder { config } => {
            let (cfg, results) = load_experiment(&config)?;
            let rows = ok_rows(&results);
            let suite = make_scale_suite(&cfg.walk, cfg.n)?;
            let paths =
                rangelab_core::rangekit::rescale_center_rows(&rows, &suite, cfg.n, &cfg.t_grid)?;
            let values: Vec<Vec<f64>> = paths.iter().map(|p| p.values().to_vec()).collect();
            let dt = cfg.t_grid[1] - cfg.t_grid[0];
            let profile = rangelab_harness::profiles::get(&cfg.profile)?;
            let fit = holder_exponent(
                &values,
                dt,
                &profile.holder_lags,
                profile.bootstrap_resamples,
                cfg.master_seed,
            )?;
            println!(
                "roughness exponent {:.4} (CI {:.4}..{:.4}) from {} paths",
                fit.alpha,
                fit.ci.0,
                fit.ci.1,
                values.len()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::YoungSelftest => {
            let profile = rangelab_harness::profiles::get("fast")?;
            let checks = young_selftest(profile.young_chi0_tol, profile.young_value_tol)?;
            let mut ok = true;
            for c in &checks {
                ok &= c.ok;
                println!(
                    "[{}] {} | residual {:.3e} (budget {:.3e})",
                    if c.ok { "PASS" } else { "FAIL" },
                    c.name,
                    c.residual,
                    c.tolerance
                );
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Verify { profile, out } => {
            let outcomes = run_acceptance(&profile, |c| println!("{}", c.one_line()))?;
            fs::write(&out, serde_json::to_string_pretty(&outcomes)? + "\n")?;
            let ok = outcomes.iter().all(|c| c.passed);
            println!(
                "{}: {} of {} criteria passed ({} skipped) -> {}",
                if ok { "OK" } else { "FAILED" },
                outcomes.iter().filter(|c| c.passed && !c.skipped).count(),
                outcomes.iter().filter(|c| !c.skipped).count(),
                outcomes.iter().filter(|c| c.skipped).count(),
                out.display()
            );
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Report { input, out } => {
            let cfg = ExperimentConfig::load(&input.join(CONFIG_FILE))?;
            let results = read_results(&input.join(REPLICA_FILE))?;
            let rows = ok_rows(&results);
            if rows.is_empty() {
                return Err(HarnessError::BadConfig("no successful replicas to report".into()));
            }
            let out_dir = out.unwrap_or(input);
            fs::create_dir_all(&out_dir)?;
            let mut csv = String::from("t,mean_range,var_range\n");
            let mut dat = String::from("# t mean_range var_range\n");
            for (k, &t) in cfg.t_grid.iter().enumerate() {
                let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
                let (m, v) = (mean(&col), if col.len() > 1 { variance(&col) } else { 0.0 });
                csv.push_str(&format!("{t},{m},{v}\n"));
                dat.push_str(&format!("{t} {m} {v}\n"));
            }
            fs::write(out_dir.join("summary.csv"), csv)?;
            fs::write(out_dir.join("profile.dat"), dat)?;
            println!("wrote {} and {}", out_dir.join("summary.csv").display(), out_dir.join("profile.dat").display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
