//! GTW-metric comparison of the two evolutions: checks
//! `d_2(e^{Ltilde t} f0, e^{L t} f0) <= (K M / N)(1 - e^{-mu t/4})
//!  sqrt(d_2(l0, Gamma_M)(F_4 + d_2(l0, Gamma_M)))`
//! with `F_4 = 48 pi^4 (E_4 + 1)` and `K = 16 sqrt(2)`, plus the one-step
//! contraction of the thermostated map in `d_2` (reported at t = -1).

use super::{
    build_initial, parse_basis, parse_initial, parse_params, restrict_v_only, InitialKind,
    COMMON_KEYS, INITIAL_KEYS,
};
use crate::config::{default_time_grid, Config, ConfigError};
use kac_core::charfn::CharFunction;
use kac_core::d2::{d2_lower, d2_to_gaussian, D2Config, SymmetryReduction};
use kac_core::metrics::InitialMoments;
use kac_core::operators::assemble;
use kac_core::params::GeneratorTag;
use kac_core::propagator::{evolve, SemigroupPair};
use kac_core::report::{ExperimentReport, Record};
use kac_core::state::HermiteState;
use std::f64::consts::PI;

const SERIES_TOL: f64 = 1e-10;

pub fn run(config: &Config, seed: u64, hash: &str) -> Result<ExperimentReport, ConfigError> {
    let mut allowed: Vec<&str> = COMMON_KEYS.to_vec();
    allowed.extend_from_slice(INITIAL_KEYS);
    allowed.extend_from_slice(&[
        "thm2.t_grid",
        "d2.half_width",
        "d2.grid",
        "d2.refine_rounds",
        "d2.refine_grid",
        "d2.multistart",
    ]);
    config.check_keys(&allowed)?;

    let params = parse_params(config)?;
    let basis = parse_basis(config, &params)?;
    let spec = parse_initial(config)?;
    if params.m >= 2 && spec.kind == InitialKind::H2 {
        return Err(ConfigError(
            "initial.kind: theorem 2 needs a symmetric initial state; `h2` is only symmetric for M = 1".into(),
        ));
    }
    let h0 = build_initial(&spec, &params, &basis)?;
    let t_grid = config.f64_list("thm2.t_grid", &default_time_grid(params.mu))?;
    let tolerance = config.f64_or("tolerance", 1e-8)?;
    let d2_cfg = parse_d2_config(config, params.m)?;

    // moments and d_2(l_0, Gamma_M) from the system marginal
    let l0 = restrict_v_only(&h0, params.m)?;
    let moments = InitialMoments::of_state(&l0, params.m);
    let f4 = 48.0 * PI.powi(4) * (moments.e4 + 1.0);
    let kconst = 16.0 * 2.0f64.sqrt();
    let l0_hat = CharFunction::from_coefficients(&l0);
    let small_cfg = D2Config {
        symmetric: (params.m >= 2).then_some(SymmetryReduction { m: params.m }),
        refine_rounds: d2_cfg.refine_rounds.max(8),
        ..d2_cfg.clone()
    };
    let d2_l0 = d2_to_gaussian(&l0_hat, &small_cfg)
        .map_err(|e| ConfigError(format!("d2(l0, Gamma): {e}")))?;

    let pair = SemigroupPair::new(&params, &basis)
        .map_err(|e| ConfigError(format!("assembly: {e}")))?;

    let mut report = ExperimentReport::new("verify-thm2", hash, seed, tolerance);
    report.diagnostic("E4", moments.e4);
    report.diagnostic("F4", f4);
    report.diagnostic("d2_l0", d2_l0.value);
    report.diagnostic("d2_l0_certified", if d2_l0.certified { 1.0 } else { 0.0 });

    // one-step contraction: d_2(Lambda^{-1}(Q_S+Q_R+Q_B) f0, Gamma) <=
    // (1 - mu/(2 Lambda)) d_2(l0, Gamma_M); reported at t = -1
    {
        let lambda = params.lambda_total();
        let full_t = assemble(&params, GeneratorTag::FullT, &basis)
            .map_err(|e| ConfigError(format!("assembly: {e}")))?;
        let mapped = full_t.matrix.matvec(h0.coefficients());
        let mapped: Vec<f64> = mapped.iter().map(|v| v / lambda).collect();
        let state = HermiteState::new(basis.clone(), mapped)
            .map_err(|e| ConfigError(format!("state: {e}")))?;
        let fhat = CharFunction::from_coefficients(&state);
        let step = d2_to_gaussian(&fhat, &d2_cfg)
            .map_err(|e| ConfigError(format!("d2 contraction: {e}")))?;
        let bound = (1.0 - params.mu / (2.0 * lambda)) * d2_l0.value;
        report.push(Record::new(-1.0, step.value, bound, step.stderr));
    }

    for &t in &t_grid {
        let ft = evolve(&h0, &pair.fr, t, SERIES_TOL)
            .map_err(|e| ConfigError(format!("evolution: {e}")))?;
        let gt = evolve(&h0, &pair.t_system, t, SERIES_TOL)
            .map_err(|e| ConfigError(format!("evolution: {e}")))?;
        let fhat = CharFunction::from_coefficients(&ft);
        let ghat = CharFunction::from_coefficients(&gt);
        let lower = d2_lower(&fhat, &ghat, &d2_cfg)
            .map_err(|e| ConfigError(format!("d2 search: {e}")))?;
        let bound = kconst * params.m as f64 / params.n as f64
            * (1.0 - (-params.mu * t / 4.0).exp())
            * (d2_l0.value * (f4 + d2_l0.value)).sqrt();
        report.push(Record::new(t, lower.value, bound, lower.stderr));
    }
    Ok(report)
}

pub(crate) fn parse_d2_config(config: &Config, m: usize) -> Result<D2Config, ConfigError> {
    Ok(D2Config {
        half_width: config.f64_or("d2.half_width", 2.0)?,
        grid_per_axis: config.usize_or("d2.grid", 33)?,
        refine_rounds: config.usize_or("d2.refine_rounds", 5)?,
        refine_grid: config.usize_or("d2.refine_grid", 7)?,
        multistart: config.usize_or("d2.multistart", 8)?,
        symmetric: (m >= 2).then_some(SymmetryReduction { m }),
    })
}
