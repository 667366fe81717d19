//! Jump-process ensembles: physics invariants (energy conservation, zero
//! momentum, fourth-moment boundedness) and, when the spectral basis is
//! small enough, cross-validation of moments against the propagator.

use super::{parse_initial, parse_params, restrict_v_only, InitialKind, COMMON_KEYS, INITIAL_KEYS};
use crate::config::{Config, ConfigError};
use kac_core::dsmc::{
    final_system_velocities, run_ensemble, write_sample_dump, InitialSampler, Observable,
    SystemKind,
};
use kac_core::metrics::InitialMoments;
use kac_core::propagator::{evolve, SemigroupPair};
use kac_core::report::{ExperimentReport, Record};
use kac_core::tensor::{basis_dim, TensorBasis};
use std::path::Path;

pub fn run(config: &Config, seed: u64, hash: &str) -> Result<ExperimentReport, ConfigError> {
    run_with_dump(config, seed, hash, None)
}

pub fn run_with_dump(
    config: &Config,
    seed: u64,
    hash: &str,
    out_dir: Option<&Path>,
) -> Result<ExperimentReport, ConfigError> {
    let mut allowed: Vec<&str> = COMMON_KEYS.to_vec();
    allowed.extend_from_slice(INITIAL_KEYS);
    allowed.extend_from_slice(&[
        "dsmc.kind",
        "dsmc.replicas",
        "dsmc.t_grid",
        "dsmc.compare_spectral",
        "dsmc.dump",
    ]);
    config.check_keys(&allowed)?;

    let params = parse_params(config)?;
    let spec = parse_initial(config)?;
    let kind = match config.str_or("dsmc.kind", "fr").as_str() {
        "fr" => SystemKind::FiniteReservoir,
        "thermostat" => SystemKind::Thermostated,
        other => {
            return Err(ConfigError(format!(
                "dsmc.kind: `{other}` is not fr | thermostat"
            )))
        }
    };
    let replicas = config.usize_or("dsmc.replicas", 10_000)?;
    let t_grid = config.f64_list("dsmc.t_grid", &[0.5, 1.0, 2.0])?;
    let tolerance = config.f64_or("tolerance", 1e-8)?;
    let cutoff = config.usize_or("cutoff", 8)?;
    let compare_default = basis_dim(params.ncoord(), cutoff) <= 20_000;
    let compare = match config.str_or("dsmc.compare_spectral", "auto").as_str() {
        "auto" => compare_default,
        "true" => true,
        "false" => false,
        other => {
            return Err(ConfigError(format!(
                "dsmc.compare_spectral: `{other}` is not auto | true | false"
            )))
        }
    };

    // sampler plus the initial moments needed for the fourth-moment cap
    let (sampler, e4) = build_sampler(&spec, &params, cutoff)?;
    let observables = [
        Observable::SystemMoment { order: 2 },
        Observable::SystemMoment { order: 4 },
        Observable::Energy,
        Observable::Momentum,
    ];
    let mut grid_with_zero = t_grid.clone();
    if grid_with_zero.first().copied() != Some(0.0) {
        grid_with_zero.insert(0, 0.0);
    }
    let ensemble = run_ensemble(
        &params,
        kind,
        &sampler,
        &grid_with_zero,
        &observables,
        replicas,
        seed,
    )
    .map_err(|e| ConfigError(format!("dsmc: {e}")))?;

    let mut report = ExperimentReport::new("dsmc", hash, seed, tolerance);
    report.diagnostic("replicas", replicas as f64);
    report.diagnostic("events", ensemble.event_counts.total() as f64);
    report.diagnostic("flagged_replicas", ensemble.flagged_replicas.len() as f64);
    for (ti, &t) in ensemble.t_grid.iter().enumerate() {
        for series in &ensemble.series {
            report.diagnostic(format!("{}[t={t}]", series.label), series.mean[ti]);
        }
    }

    // energy conservation (finite reservoir only)
    if kind == SystemKind::FiniteReservoir {
        report.push(Record::new(0.0, ensemble.max_energy_drift, 1e-10, 0.0));
    }

    // momentum stays zero within 4 sigma
    let momentum = &ensemble.series[3];
    for (ti, &t) in ensemble.t_grid.iter().enumerate() {
        report.push(Record::new(
            t,
            momentum.mean[ti].abs(),
            4.0 * momentum.stderr[ti],
            momentum.stderr[ti],
        ));
    }

    // fourth moments respect E_4(t) <= 2 (E_4 + 1) within 4 sigma
    let m4 = &ensemble.series[1];
    let cap = 2.0 * (e4 + 1.0);
    for (ti, &t) in ensemble.t_grid.iter().enumerate() {
        report.push(Record::new(t, m4.mean[ti], cap, 4.0 * m4.stderr[ti]));
    }

    if compare {
        cross_validate(&params, kind, &spec, cutoff, &ensemble, &mut report)?;
    }

    if config.has("dsmc.dump") {
        let name = config.str_or("dsmc.dump", "samples.bin");
        let t_final = *grid_with_zero.last().unwrap();
        let rows = final_system_velocities(&params, kind, &sampler, t_final, replicas, seed)
            .map_err(|e| ConfigError(format!("dsmc.dump: {e}")))?;
        let path = out_dir.unwrap_or_else(|| Path::new(".")).join(name);
        let file = std::fs::File::create(&path)
            .map_err(|e| ConfigError(format!("dsmc.dump: cannot write {path:?}: {e}")))?;
        write_sample_dump(&rows, std::io::BufWriter::new(file))
            .map_err(|e| ConfigError(format!("dsmc.dump: {e}")))?;
    }
    Ok(report)
}

fn build_sampler(
    spec: &super::InitialSpec,
    params: &kac_core::params::SystemParams,
    cutoff: usize,
) -> Result<(InitialSampler, f64), ConfigError> {
    match spec.kind {
        InitialKind::Gaussian => Ok((
            InitialSampler::GaussianAtBeta { beta_s: spec.beta_s },
            3.0 / (spec.beta_s * spec.beta_s),
        )),
        InitialKind::Mixture => {
            let e4 = spec.weight * 3.0 / (spec.beta1 * spec.beta1)
                + (1.0 - spec.weight) * 3.0 / (spec.beta2 * spec.beta2);
            Ok((
                InitialSampler::TwoTemperatureMixture {
                    w: spec.weight,
                    beta1: spec.beta1,
                    beta2: spec.beta2,
                },
                e4,
            ))
        }
        InitialKind::H2 | InitialKind::Saturating => {
            let full = TensorBasis::new(params.ncoord(), cutoff)
                .map_err(|e| ConfigError(format!("cutoff: {e}")))?;
            let h0 = super::build_initial(spec, params, &full)?;
            let l0 = restrict_v_only(&h0, params.m)?;
            let moments = InitialMoments::of_state(&l0, params.m);
            Ok((
                InitialSampler::HermitePerturbed { h0: l0, m: params.m },
                moments.e4,
            ))
        }
    }
}

fn cross_validate(
    params: &kac_core::params::SystemParams,
    kind: SystemKind,
    spec: &super::InitialSpec,
    cutoff: usize,
    ensemble: &kac_core::dsmc::EnsembleReport,
    report: &mut ExperimentReport,
) -> Result<(), ConfigError> {
    let basis = TensorBasis::new(params.ncoord(), cutoff)
        .map_err(|e| ConfigError(format!("cutoff: {e}")))?;
    let h0 = super::build_initial(spec, params, &basis)?;
    let pair = SemigroupPair::new(params, &basis)
        .map_err(|e| ConfigError(format!("assembly: {e}")))?;
    let generator = match kind {
        SystemKind::FiniteReservoir => &pair.fr,
        SystemKind::Thermostated => &pair.t_system,
    };
    for (ti, &t) in ensemble.t_grid.iter().enumerate() {
        let ht = evolve(&h0, generator, t, 1e-10)
            .map_err(|e| ConfigError(format!("evolution: {e}")))?;
        let m = params.m;
        let spectral_m2 = (0..m).map(|i| ht.second_moment(i)).sum::<f64>() / m as f64;
        let spectral_m4 = (0..m).map(|i| ht.fourth_moment(i)).sum::<f64>() / m as f64;
        for (series_idx, spectral) in [(0usize, spectral_m2), (1usize, spectral_m4)] {
            let series = &ensemble.series[series_idx];
            let diff = (series.mean[ti] - spectral).abs();
            report.push(Record::new(
                t,
                diff,
                3.0 * series.stderr[ti],
                series.stderr[ti],
            ));
        }
    }
    Ok(())
}
