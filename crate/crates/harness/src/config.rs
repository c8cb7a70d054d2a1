//! Run configuration: what to simulate, how many replicas, what to record,
//! and where results go. Configurations serialize to JSON bit-exactly, so
//! a stored file reloads to the identical struct and reserializes to the
//! identical bytes.

use crate::HarnessError;
use rangelab_core::regvar::{KernelSpec, Regime};
use rangelab_core::silt::MAX_DEPTH;
use rangelab_core::walks::WalkSpec;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Environment variable overriding `output_dir`.
pub const ENV_OUT: &str = "RANGELAB_OUT";
/// Environment variable fixing the worker thread count (read by the CLI).
pub const ENV_THREADS: &str = "RANGELAB_THREADS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub walk: WalkSpec,
    /// Walk horizon in steps.
    pub n: u64,
    pub replicas: u64,
    /// Horizon fractions in [0, 1], sorted, at which per-replica
    /// functionals are recorded.
    pub t_grid: Vec<f64>,
    /// Forces the scaling regime instead of classifying from (d, beta).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime_override: Option<Regime>,
    /// Memory kernel; when present the runner records raw interpolated
    /// energies on the grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
    /// Record cumulative self-intersection pair counts on the grid.
    #[serde(default)]
    pub record_pairs: bool,
    /// Dyadic depth for pair-count analyses downstream of the runner.
    #[serde(default)]
    pub depth: u32,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    /// Tolerance profile consulted by analyses of this run.
    pub profile: String,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.walk.validate().map_err(HarnessError::Walk)?;
        if self.n == 0 {
            return Err(HarnessError::BadConfig("horizon n must be positive".into()));
        }
        if self.replicas == 0 {
            return Err(HarnessError::BadConfig("need at least one replica".into()));
        }
        if self.t_grid.is_empty() {
            return Err(HarnessError::BadConfig("t_grid must be nonempty".into()));
        }
        if self.t_grid.iter().any(|t| !t.is_finite() || *t < 0.0 || *t > 1.0) {
            return Err(HarnessError::BadConfig("t_grid values must lie in [0, 1]".into()));
        }
        if self.t_grid.windows(2).any(|w| w[0] > w[1]) {
            return Err(HarnessError::BadConfig("t_grid must be sorted ascending".into()));
        }
        if self.depth > MAX_DEPTH {
            return Err(HarnessError::BadConfig(format!(
                "depth {} exceeds the supported maximum {MAX_DEPTH}",
                self.depth
            )));
        }
        crate::profiles::get(&self.profile)?;
        Ok(())
    }

    /// Applies environment overrides through an injected lookup;
    /// `apply_env` is the production entry point.
    pub fn apply_overrides_from<F: Fn(&str) -> Option<String>>(&mut self, lookup: F) {
        if let Some(dir) = lookup(ENV_OUT) {
            if !dir.is_empty() {
                self.output_dir = PathBuf::from(dir);
            }
        }
    }

    pub fn apply_env(&mut self) {
        self.apply_overrides_from(|k| std::env::var(k).ok());
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn from_json_str(text: &str) -> Result<Self, HarnessError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        Ok(std::fs::write(path, self.to_json_string())?)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let cfg = Self::from_json_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Thread count requested through the environment, if any; zero and junk
/// values are ignored.
pub fn env_thread_count() -> Option<usize> {
    std::env::var(ENV_THREADS)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&k| k > 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_config() -> ExperimentConfig {
        ExperimentConfig {
            walk: WalkSpec::lazy_srw(2, 0.5).unwrap(),
            n: 4096,
            replicas: 16,
            t_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            regime_override: None,
            kernel: Some(KernelSpec::power_decay(1.0, 0.3).unwrap()),
            record_pairs: true,
            depth: 6,
            master_seed: 41,
            output_dir: PathBuf::from("out/run-a"),
            profile: "fast".into(),
        }
    }

    /// Serialize -> parse -> serialize must be byte-identical, and the
    /// parsed struct equal to the original.
    #[test]
    fn json_round_trip_is_bit_exact() {
        let cfg = sample_config();
        let text = cfg.to_json_string();
        let back = ExperimentConfig::from_json_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_json_string(), text);
    }

    #[test]
    fn validation_rejects_bad_fields() {
        let ok = sample_config();
        ok.validate().unwrap();

        let mut c = sample_config();
        c.replicas = 0;
        assert!(matches!(c.validate(), Err(HarnessError::BadConfig(_))));

        c = sample_config();
        c.t_grid = vec![0.5, 0.25];
        assert!(matches!(c.validate(), Err(HarnessError::BadConfig(_))));

        c = sample_config();
        c.t_grid = vec![0.0, 1.5];
        assert!(matches!(c.validate(), Err(HarnessError::BadConfig(_))));

        c = sample_config();
        c.profile = "warp".into();
        assert!(matches!(c.validate(), Err(HarnessError::UnknownProfile(_))));

        c = sample_config();
        c.depth = 64;
        assert!(matches!(c.validate(), Err(HarnessError::BadConfig(_))));
    }

    #[test]
    fn env_override_replaces_output_dir() {
        let mut cfg = sample_config();
        cfg.apply_overrides_from(|k| {
            (k == ENV_OUT).then(|| "/tmp/elsewhere".to_string())
        });
        assert_eq!(cfg.output_dir, PathBuf::from("/tmp/elsewhere"));

        let mut untouched = sample_config();
        untouched.apply_overrides_from(|_| None);
        assert_eq!(untouched.output_dir, PathBuf::from("out/run-a"));
    }
}
