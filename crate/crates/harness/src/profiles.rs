//! Tolerance profiles: every numeric threshold and run size used by the
//! verification suite lives in one embedded, versioned JSON document, so a
//! given binary pins exactly what it tested against.

use crate::HarnessError;
use serde::{Deserialize, Serialize};
use std::sync::LazyLock;

/// Version of the embedded profile document this build understands.
pub const PROFILES_VERSION: u32 = 1;

const PROFILES_JSON: &str = include_str!("../profiles.json");

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ToleranceProfile {
    pub name: String,
    /// Whether Monte Carlo criteria run at all; the fast profile keeps only
    /// the exact identity and deterministic oracle checks.
    pub monte_carlo: bool,
    /// Distributional acceptance: the test p-value must exceed this.
    pub ks_p_accept: f64,
    /// Negative controls must fall below this.
    pub ks_p_reject: f64,
    pub identity_paths: usize,
    pub identity_n: u64,
    pub young_chi0_tol: f64,
    pub young_value_tol: f64,
    pub ibp_rel_tol: f64,
    pub sub_replicas: u64,
    pub sub_n: u64,
    pub sub_mean_tol: f64,
    pub sup_replicas: u64,
    pub sup_n: u64,
    pub sup_var_ratio_tol: f64,
    pub boundary_replicas: u64,
    pub boundary_n: u64,
    pub boundary_var_ratio_tol: f64,
    pub mid_replicas: u64,
    pub mid_n_small: u64,
    pub mid_n_large: u64,
    pub mid_var_ratio_tol: f64,
    pub silt_depth: u32,
    pub silt_pilot_replicas: u64,
    pub energy_var_ratio_tol: f64,
    /// Segments of the uniform fine grid replicas are recorded on.
    pub fine_segments: usize,
    pub holder_lags: Vec<usize>,
    /// Coarser lag menu for the intersection regime: its limit paths are
    /// near-Lipschitz, and at attainable horizons walk-level noise
    /// dominates max increments over windows under ~8 grid steps, biasing
    /// the fitted exponent down. The macroscopic scaling plateau starts
    /// around lag 16 on the fine grid.
    pub holder_mid_lags: Vec<usize>,
    pub holder_sup_window: (f64, f64),
    pub holder_mid_window: (f64, f64),
    pub envelope_pairs: usize,
    pub envelope_n: u64,
    /// Slack eta in the envelope exponent chi - eta.
    pub envelope_eta: f64,
    /// Allowed max/min ratio of fitted envelope constants across n.
    pub envelope_stability: f64,
    pub resamples: usize,
    pub bootstrap_resamples: u32,
}

#[derive(Deserialize)]
struct ProfileDoc {
    version: u32,
    profiles: Vec<ToleranceProfile>,
}

static PROFILES: LazyLock<Vec<ToleranceProfile>> = LazyLock::new(|| {
    let doc: ProfileDoc =
        serde_json::from_str(PROFILES_JSON).expect("embedded profiles.json parses");
    assert_eq!(doc.version, PROFILES_VERSION, "profile document version drift");
    doc.profiles
});

/// Looks up a profile by name; the returned reference lives for the whole
/// process, so ensembles and reports can borrow it freely.
pub fn get(name: &str) -> Result<&'static ToleranceProfile, HarnessError> {
    PROFILES
        .iter()
        .find(|p| p.name == name)
        .ok_or_else(|| HarnessError::UnknownProfile(name.to_string()))
}

/// All profile names the binary knows, for CLI help and error messages.
pub fn names() -> Vec<&'static str> {
    PROFILES.iter().map(|p| p.name.as_str()).collect()
}
