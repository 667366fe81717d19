//! The named experiments: each consumes a strict config, produces an
//! [`ExperimentReport`] whose records carry (measured, bound, margin,
//! error bar), and passes iff every margin clears its tolerance.

pub(crate) mod dsmc_run;
mod inequality_run;
mod saturate;
mod steady;
mod thm1;
mod thm2;

use crate::config::{Config, ConfigError};
use kac_core::params::SystemParams;
use kac_core::report::ExperimentReport;
use kac_core::state::{
    gaussian_coefficients, h2_perturbation, product_state, two_temperature_mixture, HermiteState,
};
use kac_core::tensor::TensorBasis;
use sha2::{Digest, Sha256};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    VerifyThm1,
    VerifyThm2,
    SteadyState,
    Dsmc,
    Inequality,
    Saturate,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::VerifyThm1 => "verify-thm1",
            ExperimentKind::VerifyThm2 => "verify-thm2",
            ExperimentKind::SteadyState => "steady-state",
            ExperimentKind::Dsmc => "dsmc",
            ExperimentKind::Inequality => "inequality",
            ExperimentKind::Saturate => "saturate",
        }
    }
}

/// Run one experiment. Any error is a configuration or certification
/// failure (exit code 2); a finished report with a negative margin is a
/// bound violation (exit code 1).
pub fn run(
    kind: ExperimentKind,
    config: &Config,
    seed_override: Option<u64>,
) -> Result<ExperimentReport, ConfigError> {
    if config.has("experiment") {
        let named = config.str_or("experiment", "");
        if named != kind.name() {
            return Err(ConfigError(format!(
                "experiment: config names `{named}` but `{}` was requested",
                kind.name()
            )));
        }
    }
    let seed = seed_override.unwrap_or(config.u64_or("seed", 0)?);
    let hash = config_hash(config);
    match kind {
        ExperimentKind::VerifyThm1 => thm1::run(config, seed, &hash),
        ExperimentKind::VerifyThm2 => thm2::run(config, seed, &hash),
        ExperimentKind::SteadyState => steady::run(config, seed, &hash),
        ExperimentKind::Dsmc => dsmc_run::run(config, seed, &hash),
        ExperimentKind::Inequality => inequality_run::run(config, seed, &hash),
        ExperimentKind::Saturate => saturate::run(config, seed, &hash),
    }
}

pub fn config_hash(config: &Config) -> String {
    let mut hasher = Sha256::new();
    hasher.update(config.raw_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub(crate) const COMMON_KEYS: &[&str] = &[
    "experiment",
    "seed",
    "cutoff",
    "tolerance",
    "params.M",
    "params.N",
    "params.lambda_s",
    "params.lambda_r",
    "params.mu",
];

pub(crate) const INITIAL_KEYS: &[&str] = &[
    "initial.kind",
    "initial.epsilon",
    "initial.coordinate",
    "initial.beta_s",
    "initial.weight",
    "initial.beta1",
    "initial.beta2",
    "initial.p",
    "initial.amplitude",
];

pub(crate) fn parse_params(config: &Config) -> Result<SystemParams, ConfigError> {
    let m = config.require_usize("params.M")?;
    let n = config.require_usize("params.N")?;
    let lambda_s = config.f64_or("params.lambda_s", 1.0)?;
    let lambda_r = config.f64_or("params.lambda_r", 1.0)?;
    let mu = config.f64_or("params.mu", 1.0)?;
    SystemParams::new(m, n, lambda_s, lambda_r, mu)
        .map_err(|e| ConfigError(format!("params: {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum InitialKind {
    H2,
    Gaussian,
    Mixture,
    Saturating,
}

pub(crate) struct InitialSpec {
    pub kind: InitialKind,
    pub epsilon: f64,
    pub coordinate: usize,
    pub beta_s: f64,
    pub weight: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub p: usize,
    pub amplitude: Option<f64>,
}

pub(crate) fn parse_initial(config: &Config) -> Result<InitialSpec, ConfigError> {
    let kind = match config.str_or("initial.kind", "h2").as_str() {
        "h2" => InitialKind::H2,
        "gaussian" => InitialKind::Gaussian,
        "mixture" => InitialKind::Mixture,
        "saturating" => InitialKind::Saturating,
        other => {
            return Err(ConfigError(format!(
                "initial.kind: unknown kind `{other}` (expected h2 | gaussian | mixture | saturating)"
            )))
        }
    };
    let two_pi = 2.0 * std::f64::consts::PI;
    Ok(InitialSpec {
        kind,
        epsilon: config.f64_or("initial.epsilon", 0.1)?,
        coordinate: config.usize_or("initial.coordinate", 0)?,
        beta_s: config.f64_or("initial.beta_s", two_pi * 1.25)?,
        weight: config.f64_or("initial.weight", 0.5)?,
        beta1: config.f64_or("initial.beta1", two_pi * 4.0 / 3.0)?,
        beta2: config.f64_or("initial.beta2", two_pi * 4.0 / 5.0)?,
        p: config.usize_or("initial.p", 2)?,
        amplitude: if config.has("initial.amplitude") {
            Some(config.f64_or("initial.amplitude", 0.0)?)
        } else {
            None
        },
    })
}

/// Build `h_0` over the full `(M+N)`-coordinate basis.
pub(crate) fn build_initial(
    spec: &InitialSpec,
    params: &SystemParams,
    basis: &Arc<TensorBasis>,
) -> Result<HermiteState, ConfigError> {
    let m = params.m;
    match spec.kind {
        InitialKind::H2 => {
            if spec.coordinate >= m {
                return Err(ConfigError(format!(
                    "initial.coordinate: {} is not a system coordinate (M = {m})",
                    spec.coordinate
                )));
            }
            Ok(h2_perturbation(basis.clone(), spec.coordinate, spec.epsilon))
        }
        InitialKind::Gaussian => {
            let g = gaussian_coefficients(basis.cutoff(), spec.beta_s)
                .map_err(|e| ConfigError(format!("initial.beta_s: {e}")))?;
            product_state(basis.clone(), m, &g).map_err(|e| ConfigError(format!("initial: {e}")))
        }
        InitialKind::Mixture => {
            two_temperature_mixture(basis.clone(), m, spec.weight, spec.beta1, spec.beta2)
                .map_err(|e| ConfigError(format!("initial: {e}")))
        }
        InitialKind::Saturating => {
            let sat = kac_core::saturation::build(m, spec.p, basis)
                .map_err(|e| ConfigError(format!("initial.p: {e}")))?;
            let mut h = sat.state.clone();
            let a = spec.amplitude.unwrap_or(sat.amplitude);
            h.scale(a);
            h.coefficients_mut()[0] += 1.0;
            Ok(h)
        }
    }
}

/// Restrict a v-only state on the full basis to the `m`-coordinate basis.
pub(crate) fn restrict_v_only(
    state: &HermiteState,
    m: usize,
) -> Result<HermiteState, ConfigError> {
    let full = state.basis();
    if !state.is_v_only(m) {
        return Err(ConfigError(
            "initial state depends on reservoir coordinates".into(),
        ));
    }
    let small = TensorBasis::new(m, full.cutoff())
        .map_err(|e| ConfigError(format!("basis: {e}")))?;
    let mut coef = vec![0.0; small.dim()];
    for (k, ix) in small.indices() {
        let mut jx = ix.to_vec();
        jx.resize(full.ncoord(), 0);
        if let Some(j) = full.flat(&jx) {
            coef[k] = state.coefficients()[j];
        }
    }
    HermiteState::new(small, coef).map_err(|e| ConfigError(format!("basis: {e}")))
}

pub(crate) fn parse_basis(
    config: &Config,
    params: &SystemParams,
) -> Result<Arc<TensorBasis>, ConfigError> {
    let cutoff = config.usize_or("cutoff", 8)?;
    TensorBasis::new(params.ncoord(), cutoff).map_err(|e| ConfigError(format!("cutoff: {e}")))
}
