//! Event-driven (Gillespie) simulation of the finite-reservoir and
//! thermostated jump processes. The generators define exponential holding
//! times with total rate `Lambda` and uniformly chosen rotation partners;
//! simulating the jump chain directly leaves no time-discretization error.

use crate::error::{Error, Result};
use crate::hermite::hermite_values;
use crate::params::SystemParams;
use crate::state::HermiteState;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

/// Velocities of one replica plus its simulated clock.
#[derive(Debug, Clone)]
pub struct ParticleState {
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub clock: f64,
}

impl ParticleState {
    pub fn energy(&self) -> f64 {
        self.v.iter().map(|x| x * x).sum::<f64>() + self.w.iter().map(|x| x * x).sum::<f64>()
    }
}

/// Which dynamics the jump chain follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SystemKind {
    /// System + finite reservoir (energy conserving).
    FiniteReservoir,
    /// System + Maxwellian thermostat (fresh Gaussian partners).
    Thermostated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EventKind {
    SystemPair,
    ReservoirPair,
    Interaction,
    Thermostat,
}

fn rotate(x: f64, y: f64, theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    (x * c + y * s, -x * s + y * c)
}

fn total_rate(kind: SystemKind, params: &SystemParams) -> f64 {
    match kind {
        SystemKind::FiniteReservoir => params.lambda_total(),
        SystemKind::Thermostated => params.gain_s() + params.gain_i(),
    }
}

/// Velocity update of one event (no clock change).
fn collide(
    state: &mut ParticleState,
    params: &SystemParams,
    kind: SystemKind,
    rng: &mut impl Rng,
) -> EventKind {
    let gs = params.gain_s();
    let pick = rng.gen::<f64>() * total_rate(kind, params);
    let theta = rng.gen::<f64>() * 2.0 * PI;
    match kind {
        SystemKind::FiniteReservoir => {
            let gr = params.gain_r();
            if pick < gs {
                let (i, j) = distinct_pair(rng, params.m);
                let (a, b) = rotate(state.v[i], state.v[j], theta);
                state.v[i] = a;
                state.v[j] = b;
                EventKind::SystemPair
            } else if pick < gs + gr {
                let (i, j) = distinct_pair(rng, params.n);
                let (a, b) = rotate(state.w[i], state.w[j], theta);
                state.w[i] = a;
                state.w[j] = b;
                EventKind::ReservoirPair
            } else {
                let i = rng.gen_range(0..params.m);
                let j = rng.gen_range(0..params.n);
                let (a, b) = rotate(state.v[i], state.w[j], theta);
                state.v[i] = a;
                state.w[j] = b;
                EventKind::Interaction
            }
        }
        SystemKind::Thermostated => {
            if pick < gs {
                let (i, j) = distinct_pair(rng, params.m);
                let (a, b) = rotate(state.v[i], state.v[j], theta);
                state.v[i] = a;
                state.v[j] = b;
                EventKind::SystemPair
            } else {
                let j = rng.gen_range(0..params.m);
                let fresh: f64 = rng.sample::<f64, _>(StandardNormal) / (2.0 * PI).sqrt();
                let (a, _discarded) = rotate(state.v[j], fresh, theta);
                state.v[j] = a;
                EventKind::Thermostat
            }
        }
    }
}

/// One event of the finite-reservoir chain: advances the clock by an
/// exponential holding time at total rate `Lambda`, selects the mechanism
/// with probability proportional to its gain rate, picks the pair uniformly
/// and rotates it by a uniform angle.
pub fn step_fr(state: &mut ParticleState, params: &SystemParams, rng: &mut impl Rng) -> EventKind {
    state.clock += exponential(rng, total_rate(SystemKind::FiniteReservoir, params));
    collide(state, params, SystemKind::FiniteReservoir, rng)
}

/// One event of the thermostated chain: system pairs as in [`step_fr`]; a
/// thermostat event (rate `mu M`) rotates the chosen system particle with a
/// fresh Maxwellian partner of variance `1/(2 pi)` and discards the partner.
pub fn step_t(state: &mut ParticleState, params: &SystemParams, rng: &mut impl Rng) -> EventKind {
    state.clock += exponential(rng, total_rate(SystemKind::Thermostated, params));
    collide(state, params, SystemKind::Thermostated, rng)
}

fn exponential(rng: &mut impl Rng, rate: f64) -> f64 {
    if rate <= 0.0 {
        return f64::INFINITY;
    }
    let u: f64 = rng.gen::<f64>();
    -(1.0 - u).ln() / rate
}

fn distinct_pair(rng: &mut impl Rng, n: usize) -> (usize, usize) {
    debug_assert!(n >= 2);
    let i = rng.gen_range(0..n);
    let mut j = rng.gen_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    (i, j)
}

/// Initial law of the system velocities; the reservoir always starts in
/// equilibrium at `beta = 2 pi`.
#[derive(Debug, Clone)]
pub enum InitialSampler {
    /// Product Gaussian at inverse temperature `beta_s`.
    GaussianAtBeta { beta_s: f64 },
    /// Density `h_0(v) Gamma_M(v)` for a nonnegative polynomial `h_0` given
    /// as a coefficient state over the system coordinates; sampled by
    /// rejection against a widened Gaussian.
    HermitePerturbed { h0: HermiteState, m: usize },
    /// Mixture of two product Gaussians with weight `w` on `beta1`.
    TwoTemperatureMixture { w: f64, beta1: f64, beta2: f64 },
}

/// Ensemble of independent replicas with reproducible per-replica RNG
/// streams derived from one master seed; reruns with the same seed are
/// bit-identical regardless of scheduling.
#[derive(Debug, Clone)]
pub struct ReplicaEnsemble {
    pub replicas: usize,
    pub master_seed: u64,
}

impl ReplicaEnsemble {
    pub fn new(replicas: usize, master_seed: u64) -> Self {
        ReplicaEnsemble {
            replicas,
            master_seed,
        }
    }

    /// The RNG of one replica: a dedicated ChaCha stream of the master seed.
    pub fn rng(&self, replica: usize) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.master_seed);
        rng.set_stream(replica as u64 + 1);
        rng
    }
}

/// Scalar observables recorded along the time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Observable {
    /// `(1/M) sum_i v_i^order`.
    SystemMoment { order: u32 },
    /// `(1/M) sum_i H_n(v_i)` in the orthonormal Hermite basis.
    SystemHermite { degree: usize },
    /// Total kinetic energy `|v|^2 + |w|^2`.
    Energy,
    /// Total momentum `sum_i v_i + sum_j w_j`.
    Momentum,
    /// Real part of `exp(-2 pi i (xi.v + eta.w))`.
    CharReal { point: Vec<f64> },
    /// Imaginary part of the same.
    CharImag { point: Vec<f64> },
}

impl Observable {
    pub fn label(&self) -> String {
        match self {
            Observable::SystemMoment { order } => format!("moment{order}"),
            Observable::SystemHermite { degree } => format!("hermite{degree}"),
            Observable::Energy => "energy".into(),
            Observable::Momentum => "momentum".into(),
            Observable::CharReal { point } => format!("char_re@{point:?}"),
            Observable::CharImag { point } => format!("char_im@{point:?}"),
        }
    }

    fn eval(&self, state: &ParticleState) -> f64 {
        match self {
            Observable::SystemMoment { order } => {
                let m = state.v.len() as f64;
                state.v.iter().map(|&v| v.powi(*order as i32)).sum::<f64>() / m
            }
            Observable::SystemHermite { degree } => {
                let m = state.v.len() as f64;
                state
                    .v
                    .iter()
                    .map(|&v| hermite_values(*degree, v)[*degree])
                    .sum::<f64>()
                    / m
            }
            Observable::Energy => state.energy(),
            Observable::Momentum => state.v.iter().sum::<f64>() + state.w.iter().sum::<f64>(),
            Observable::CharReal { point } | Observable::CharImag { point } => {
                let mut phase = 0.0;
                for (z, x) in point.iter().zip(state.v.iter().chain(state.w.iter())) {
                    phase -= 2.0 * PI * z * x;
                }
                match self {
                    Observable::CharReal { .. } => phase.cos(),
                    _ => phase.sin(),
                }
            }
        }
    }
}

/// Time series of one observable with per-time standard errors.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ObservableSeries {
    pub label: String,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct EnsembleReport {
    pub kind: SystemKind,
    pub t_grid: Vec<f64>,
    pub series: Vec<ObservableSeries>,
    pub replicas: usize,
    pub master_seed: u64,
    pub event_counts: EventCounts,
    /// Worst relative drift of the conserved energy (finite reservoir only).
    pub max_energy_drift: f64,
    /// Replicas excluded because a velocity overflowed or became non-finite.
    pub flagged_replicas: Vec<usize>,
}

#[derive(Debug, Clone, Copy, Default, Serialize, PartialEq)]
pub struct EventCounts {
    pub system: u64,
    pub reservoir: u64,
    pub interaction: u64,
    pub thermostat: u64,
}

impl EventCounts {
    pub fn total(&self) -> u64 {
        self.system + self.reservoir + self.interaction + self.thermostat
    }
}

/// Run `K` independent replicas of the chosen dynamics, recording the
/// observables at every grid time. Replicas execute in parallel; the
/// reduction runs in replica order, so results are scheduling independent.
pub fn run_ensemble(
    params: &SystemParams,
    kind: SystemKind,
    sampler: &InitialSampler,
    t_grid: &[f64],
    observables: &[Observable],
    replicas: usize,
    master_seed: u64,
) -> Result<EnsembleReport> {
    if replicas < 2 {
        return Err(Error::InvalidParameter(
            "need at least two replicas for error bars".into(),
        ));
    }
    if t_grid.is_empty() {
        return Err(Error::InvalidParameter("time grid is empty".into()));
    }
    if t_grid.windows(2).any(|w| w[0] > w[1]) || t_grid.iter().any(|&t| t < 0.0) {
        return Err(Error::InvalidParameter(
            "time grid must be sorted and nonnegative".into(),
        ));
    }
    let envelope = match sampler {
        InitialSampler::HermitePerturbed { h0, m } => Some(rejection_envelope(h0, *m)?),
        _ => None,
    };
    let ensemble = ReplicaEnsemble::new(replicas, master_seed);
    let sigma_res = 1.0 / (2.0 * PI).sqrt();
    let rate = total_rate(kind, params);

    struct ReplicaOut {
        values: Vec<f64>, // t-major, then observable
        counts: EventCounts,
        energy_drift: f64,
        flagged: bool,
    }

    let outs: Vec<ReplicaOut> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = ensemble.rng(r);
            let v = sample_initial(sampler, params.m, envelope, &mut rng);
            let w: Vec<f64> = (0..params.n)
                .map(|_| rng.sample::<f64, _>(StandardNormal) * sigma_res)
                .collect();
            let mut state = ParticleState { v, w, clock: 0.0 };
            let e0 = state.energy();
            let mut counts = EventCounts::default();
            let mut values = Vec::with_capacity(t_grid.len() * observables.len());
            let mut drift = 0.0f64;
            let mut flagged = false;
            let mut ti = 0usize;
            while ti < t_grid.len() {
                // velocities are frozen on [clock, next_event)
                let next_event = state.clock + exponential(&mut rng, rate);
                while ti < t_grid.len() && t_grid[ti] <= next_event {
                    for obs in observables {
                        values.push(obs.eval(&state));
                    }
                    ti += 1;
                }
                if ti == t_grid.len() {
                    break;
                }
                state.clock = next_event;
                let ev = collide(&mut state, params, kind, &mut rng);
                bump(&mut counts, ev);
                if kind == SystemKind::FiniteReservoir && e0 > 0.0 {
                    drift = drift.max((state.energy() - e0).abs() / e0);
                }
                if !state.v.iter().all(|x| x.is_finite() && x.abs() < 1e100) {
                    flagged = true;
                    break;
                }
            }
            // flagged replicas may have recorded fewer points; pad with NaN
            values.resize(t_grid.len() * observables.len(), f64::NAN);
            ReplicaOut {
                values,
                counts,
                energy_drift: drift,
                flagged,
            }
        })
        .collect();

    // fixed-order reduction
    let nt = t_grid.len();
    let nobs = observables.len();
    let mut totals = EventCounts::default();
    let mut max_drift = 0.0f64;
    let mut flagged_replicas = Vec::new();
    let mut mean = vec![0.0f64; nt * nobs];
    let mut m2 = vec![0.0f64; nt * nobs];
    let mut used = 0usize;
    for (r, out) in outs.iter().enumerate() {
        totals.system += out.counts.system;
        totals.reservoir += out.counts.reservoir;
        totals.interaction += out.counts.interaction;
        totals.thermostat += out.counts.thermostat;
        max_drift = max_drift.max(out.energy_drift);
        if out.flagged {
            flagged_replicas.push(r);
            continue;
        }
        used += 1;
        let k = used as f64;
        for (slot, &x) in out.values.iter().enumerate() {
            let delta = x - mean[slot];
            mean[slot] += delta / k;
            m2[slot] += delta * (x - mean[slot]);
        }
    }
    let series = observables
        .iter()
        .enumerate()
        .map(|(o, obs)| ObservableSeries {
            label: obs.label(),
            mean: (0..nt).map(|ti| mean[ti * nobs + o]).collect(),
            stderr: (0..nt)
                .map(|ti| {
                    let var = m2[ti * nobs + o] / (used.max(2) as f64 - 1.0);
                    (var / used.max(1) as f64).sqrt()
                })
                .collect(),
        })
        .collect();
    Ok(EnsembleReport {
        kind,
        t_grid: t_grid.to_vec(),
        series,
        replicas,
        master_seed,
        event_counts: totals,
        max_energy_drift: max_drift,
        flagged_replicas,
    })
}

/// Final system velocities of every replica at `t_final`, using the same
/// per-replica streams as [`run_ensemble`] (row `r` is replica `r`).
pub fn final_system_velocities(
    params: &SystemParams,
    kind: SystemKind,
    sampler: &InitialSampler,
    t_final: f64,
    replicas: usize,
    master_seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if t_final < 0.0 {
        return Err(Error::InvalidParameter("time must be >= 0".into()));
    }
    let envelope = match sampler {
        InitialSampler::HermitePerturbed { h0, m } => Some(rejection_envelope(h0, *m)?),
        _ => None,
    };
    let ensemble = ReplicaEnsemble::new(replicas, master_seed);
    let sigma_res = 1.0 / (2.0 * PI).sqrt();
    let rate = total_rate(kind, params);
    Ok((0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = ensemble.rng(r);
            let v = sample_initial(sampler, params.m, envelope, &mut rng);
            let w: Vec<f64> = (0..params.n)
                .map(|_| rng.sample::<f64, _>(StandardNormal) * sigma_res)
                .collect();
            let mut state = ParticleState { v, w, clock: 0.0 };
            loop {
                let next = state.clock + exponential(&mut rng, rate);
                if next > t_final {
                    break;
                }
                state.clock = next;
                collide(&mut state, params, kind, &mut rng);
            }
            state.v
        })
        .collect())
}

/// Binary dump of per-replica rows of little-endian f64 values, with an
/// 8-byte magic, then `rows` and `cols` as little-endian u64.
pub fn write_sample_dump(
    rows: &[Vec<f64>],
    mut out: impl std::io::Write,
) -> std::io::Result<()> {
    out.write_all(b"KACSAMP1")?;
    let cols = rows.first().map_or(0, |r| r.len());
    out.write_all(&(rows.len() as u64).to_le_bytes())?;
    out.write_all(&(cols as u64).to_le_bytes())?;
    for row in rows {
        for &x in row {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

fn bump(counts: &mut EventCounts, ev: EventKind) {
    match ev {
        EventKind::SystemPair => counts.system += 1,
        EventKind::ReservoirPair => counts.reservoir += 1,
        EventKind::Interaction => counts.interaction += 1,
        EventKind::Thermostat => counts.thermostat += 1,
    }
}

fn sample_initial(
    sampler: &InitialSampler,
    m: usize,
    envelope: Option<f64>,
    rng: &mut impl Rng,
) -> Vec<f64> {
    match sampler {
        InitialSampler::GaussianAtBeta { beta_s } => {
            let sigma = (1.0 / beta_s).sqrt();
            (0..m)
                .map(|_| rng.sample::<f64, _>(StandardNormal) * sigma)
                .collect()
        }
        InitialSampler::TwoTemperatureMixture { w, beta1, beta2 } => {
            let beta = if rng.gen::<f64>() < *w { *beta1 } else { *beta2 };
            let sigma = (1.0 / beta).sqrt();
            (0..m)
                .map(|_| rng.sample::<f64, _>(StandardNormal) * sigma)
                .collect()
        }
        InitialSampler::HermitePerturbed { h0, m: mm } => {
            let bound = envelope.expect("envelope precomputed");
            // proposal: product Gaussian with density prop to exp(-pi |v|^2 / 2)
            let sigma = (1.0 / PI).sqrt();
            loop {
                let v: Vec<f64> = (0..*mm)
                    .map(|_| rng.sample::<f64, _>(StandardNormal) * sigma)
                    .collect();
                let r2: f64 = v.iter().map(|x| x * x).sum();
                let h = eval_vonly(h0, &v);
                let ratio = h * (-PI * r2 / 2.0).exp() / bound;
                debug_assert!(ratio <= 1.0 + 1e-9, "rejection envelope too small");
                if rng.gen::<f64>() < ratio {
                    return v;
                }
            }
        }
    }
}

/// `sup_v h0(v) exp(-pi |v|^2 / 2)` over a dense grid, with a safety factor.
fn rejection_envelope(h0: &HermiteState, m: usize) -> Result<f64> {
    if !h0.is_v_only(m) {
        return Err(Error::InvalidParameter(
            "sampler state must depend on system coordinates only".into(),
        ));
    }
    let grid: Vec<f64> = (0..=40).map(|k| -5.0 + 0.25 * k as f64).collect();
    let mut best: f64 = 0.0;
    let mut idx = vec![0usize; m];
    loop {
        let v: Vec<f64> = idx.iter().map(|&k| grid[k]).collect();
        let r2: f64 = v.iter().map(|x| x * x).sum();
        let h = eval_vonly(h0, &v);
        if h < -1e-9 {
            return Err(Error::InvalidParameter(format!(
                "sampler density is negative at {v:?} (h = {h})"
            )));
        }
        best = best.max(h * (-PI * r2 / 2.0).exp());
        // odometer over the grid
        let mut c = 0;
        loop {
            idx[c] += 1;
            if idx[c] < grid.len() {
                break;
            }
            idx[c] = 0;
            c += 1;
            if c == m {
                return Ok(best * 1.5);
            }
        }
    }
}

/// Evaluate a v-only coefficient state at a point of R^m.
pub fn eval_vonly(h0: &HermiteState, v: &[f64]) -> f64 {
    let basis = h0.basis();
    let cutoff = basis.cutoff();
    let per_coord: Vec<Vec<f64>> = v.iter().map(|&x| hermite_values(cutoff, x)).collect();
    let mut acc = 0.0;
    for (k, ix) in basis.indices() {
        let c = h0.coefficients()[k];
        if c == 0.0 {
            continue;
        }
        let mut term = c;
        for (co, &d) in ix.iter().enumerate() {
            if d == 0 {
                continue;
            }
            match per_coord.get(co) {
                Some(vals) => term *= vals[d as usize],
                None => {
                    term = 0.0;
                    break;
                }
            }
        }
        acc += term;
    }
    acc
}
