//! Exact-in-truncation propagation under `exp(L t)` and `exp(Lbar t)` by
//! uniformization, the telescoped expansion of the semigroup difference, and
//! the rotation-average steady state.

use crate::error::{Error, Result};
use crate::operators::{assemble, single_pair_rotation, GeneratorMatrix};
use crate::params::{GeneratorTag, SystemParams};
use crate::sparse::CsrMatrix;
use crate::state::HermiteState;
use crate::tensor::TensorBasis;
use std::sync::Arc;

const MAX_SERIES_TERMS: usize = 20_000;

/// `exp((Q - Lambda) t) h` by uniformization:
/// `exp(-Lambda t) sum_n (t^n / n!) Q^n h`, with the Poisson tail bound
/// (valid because `||Q|| <= Lambda`) as the stopping rule.
pub fn evolve(
    state: &HermiteState,
    generator: &GeneratorMatrix,
    t: f64,
    tol: f64,
) -> Result<HermiteState> {
    if t < 0.0 {
        return Err(Error::InvalidParameter(format!("time must be >= 0, got {t}")));
    }
    if !matches!(generator.tag, GeneratorTag::FullFr | GeneratorTag::FullT) {
        return Err(Error::InvalidParameter(
            "evolve needs a FULL_FR or FULL_T generator".into(),
        ));
    }
    if !state.basis().same_shape(&generator.basis) {
        return Err(Error::BasisMismatch(
            "state and generator bases differ".into(),
        ));
    }
    let lambda = generator.params.lambda_total();
    let rate = lambda * t;
    let scale = state.norm().max(1.0);

    // running Poisson(rate) pmf and tail
    let mut pmf = (-rate).exp();
    let mut tail = 1.0 - pmf;
    let mut term = state.coefficients().to_vec();
    let mut acc: Vec<f64> = term.iter().map(|c| c * pmf).collect();
    let mut scratch = vec![0.0; term.len()];
    let mut n = 0usize;
    while tail * scale > tol {
        n += 1;
        if n > MAX_SERIES_TERMS {
            return Err(Error::SeriesNotConverged {
                tol,
                terms: MAX_SERIES_TERMS,
                residual: tail * scale,
            });
        }
        generator.matrix.matvec_into(&term, &mut scratch);
        for (dst, src) in term.iter_mut().zip(&scratch) {
            *dst = src / lambda;
        }
        pmf *= rate / n as f64;
        tail -= pmf;
        tail = tail.max(0.0);
        for (a, v) in acc.iter_mut().zip(&term) {
            *a += pmf * v;
        }
    }
    HermiteState::new(state.basis().clone(), acc)
}

/// Both full generators for one parameter set.
pub struct SemigroupPair {
    pub fr: GeneratorMatrix,
    pub t_system: GeneratorMatrix,
}

impl SemigroupPair {
    pub fn new(params: &SystemParams, basis: &Arc<TensorBasis>) -> Result<Self> {
        Ok(SemigroupPair {
            fr: assemble(params, GeneratorTag::FullFr, basis)?,
            t_system: assemble(params, GeneratorTag::FullT, basis)?,
        })
    }

    /// `|| exp(L t) h0 - exp(Lbar t) h0 ||_2` by evolving both sides.
    pub fn difference_norm(&self, h0: &HermiteState, t: f64, tol: f64) -> Result<f64> {
        let a = evolve(h0, &self.fr, t, tol)?;
        let b = evolve(h0, &self.t_system, t, tol)?;
        Ok(a.sub(&b).norm())
    }
}

/// `exp(L t) h0 - exp(Lbar t) h0` evaluated through the telescoped double
/// sum over `A^{n-1-k} (Q_I - Q_T) B^k u_0` with `A = Q_S+Q_R+Q_I` and
/// `B = Q_S+Q_R+Q_T`. Requires `h0` to depend on the system coordinates
/// only, which keeps the per-term norm bound
/// `(mu/2)(M/sqrt(N)) Lambda^{n-k-1} (Lambda - mu/2)^k ||u_0||` valid.
pub fn difference_series(
    h0: &HermiteState,
    pair: &SemigroupPair,
    t: f64,
    tol: f64,
) -> Result<HermiteState> {
    let params = &pair.fr.params;
    if !h0.is_v_only(params.m) {
        return Err(Error::InvalidParameter(
            "difference_series needs an initial state depending on v coordinates only".into(),
        ));
    }
    if t < 0.0 {
        return Err(Error::InvalidParameter(format!("time must be >= 0, got {t}")));
    }
    let lambda = params.lambda_total();
    let rate = lambda * t;
    let dim = h0.basis().dim();

    // u_0 = h_0 - 1; the difference of semigroups kills constants
    let mut u = h0.coefficients().to_vec();
    u[0] -= 1.0;
    let u0_norm = u.iter().map(|c| c * c).sum::<f64>().sqrt();
    let amplitude = params.m as f64 / (params.n as f64).sqrt() * u0_norm;

    let a_mat = &pair.fr.matrix;
    let b_mat = &pair.t_system.matrix;

    // S_{n+1} = A S_n + g_n, g_n = (Q_I - Q_T) B^n u_0; sum pmf_n * S_n / Lambda^n
    let mut s = vec![0.0; dim];
    let mut acc = vec![0.0; dim];
    let mut scratch = vec![0.0; dim];
    let mut g = vec![0.0; dim];

    let mut pmf = (-rate).exp(); // weight of n = 0 (no contribution)
    let mut tail = 1.0 - pmf;
    let mut n = 0usize;
    loop {
        // g_n = (A - B) u_n, then u_{n+1} = B u_n / Lambda (normalized as we go)
        a_mat.matvec_into(&u, &mut g);
        b_mat.matvec_into(&u, &mut scratch);
        for k in 0..dim {
            g[k] = (g[k] - scratch[k]) / lambda;
            u[k] = scratch[k] / lambda;
        }
        // S_{n+1} = (A/Lambda) S_n + g_n
        a_mat.matvec_into(&s, &mut scratch);
        for k in 0..dim {
            s[k] = scratch[k] / lambda + g[k];
        }
        n += 1;
        pmf *= rate / n as f64;
        tail -= pmf;
        tail = tail.max(0.0);
        for (a, v) in acc.iter_mut().zip(&s) {
            *a += pmf * v;
        }
        // ||S_n / Lambda^n|| <= (M/sqrt(N)) ||u_0||, so the tail is controlled
        if tail * amplitude.max(1e-300) <= tol {
            break;
        }
        if n > MAX_SERIES_TERMS {
            return Err(Error::SeriesNotConverged {
                tol,
                terms: MAX_SERIES_TERMS,
                residual: tail * amplitude,
            });
        }
    }
    HermiteState::new(h0.basis().clone(), acc)
}

/// Norm of one expansion term `A^{n-1-k} (Q_I - Q_T) B^k u_0` (both operators
/// scaled by `Lambda^{-(n-1)}` would overflow otherwise; callers compare with
/// the matching bound). Used to probe the per-term estimate.
pub fn expansion_term_norm(
    h0: &HermiteState,
    pair: &SemigroupPair,
    n: usize,
    k: usize,
) -> Result<f64> {
    if k + 1 > n {
        return Err(Error::InvalidParameter("need k <= n - 1".into()));
    }
    let mut u = h0.coefficients().to_vec();
    u[0] -= 1.0;
    let dim = u.len();
    let mut scratch = vec![0.0; dim];
    for _ in 0..k {
        pair.t_system.matrix.matvec_into(&u, &mut scratch);
        std::mem::swap(&mut u, &mut scratch);
    }
    pair.fr.matrix.matvec_into(&u, &mut scratch);
    let mut w = vec![0.0; dim];
    pair.t_system.matrix.matvec_into(&u, &mut w);
    for i in 0..dim {
        u[i] = scratch[i] - w[i];
    }
    for _ in 0..(n - 1 - k) {
        pair.fr.matrix.matvec_into(&u, &mut scratch);
        std::mem::swap(&mut u, &mut scratch);
    }
    Ok(u.iter().map(|c| c * c).sum::<f64>().sqrt())
}

/// Orthogonal projection onto the rotation-invariant (radial) subspace,
/// realized by iterating the average of all coordinate-pair rotation
/// projectors. The iteration fixes exactly the common fixed space and
/// contracts everything else, so it converges to the steady state of the
/// finite-reservoir evolution.
pub struct RadialProjector {
    averaged: CsrMatrix,
}

impl RadialProjector {
    pub fn new(basis: &Arc<TensorBasis>) -> Self {
        let n = basis.ncoord();
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                pairs.push(single_pair_rotation(basis, i, j));
            }
        }
        let weight = 1.0 / pairs.len() as f64;
        let terms: Vec<(f64, &CsrMatrix)> = pairs.iter().map(|p| (weight, p)).collect();
        RadialProjector {
            averaged: CsrMatrix::linear_combination(&terms),
        }
    }

    pub fn apply(&self, state: &HermiteState) -> Result<HermiteState> {
        let mut x = state.coefficients().to_vec();
        let mut acc = vec![0.0; x.len()];
        let scale = state.norm().max(1.0);
        let mut last_delta = f64::INFINITY;
        let mut stalled = 0usize;
        for it in 0..200_000 {
            self.averaged.matvec_into(&x, &mut acc);
            let mut delta = 0.0f64;
            for (xi, a) in x.iter_mut().zip(&acc) {
                delta += (a - *xi) * (a - *xi);
                *xi = *a;
            }
            let delta = delta.sqrt();
            // converged, or stuck at the rounding floor of the pair matrices
            if delta <= 1e-14 * scale {
                return HermiteState::new(state.basis().clone(), x);
            }
            if delta >= 0.5 * last_delta {
                stalled += 1;
                if stalled >= 8 && delta <= 1e-11 * scale {
                    return HermiteState::new(state.basis().clone(), x);
                }
            } else {
                stalled = 0;
            }
            last_delta = delta;
            if it == 199_999 {
                return Err(Error::SeriesNotConverged {
                    tol: 1e-14,
                    terms: 200_000,
                    residual: delta,
                });
            }
        }
        unreachable!()
    }
}

/// The finite-reservoir steady state reached from `h0`: the radial
/// projection of the initial state.
pub fn steady_state(h0: &HermiteState) -> Result<HermiteState> {
    RadialProjector::new(h0.basis()).apply(h0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::h2_perturbation;
    use approx::assert_abs_diff_eq;

    fn setup(m: usize, n: usize, rates: (f64, f64, f64), cutoff: usize) -> (SystemParams, Arc<TensorBasis>, SemigroupPair) {
        let p = SystemParams::new(m, n, rates.0, rates.1, rates.2).unwrap();
        let basis = TensorBasis::new(m + n, cutoff).unwrap();
        let pair = SemigroupPair::new(&p, &basis).unwrap();
        (p, basis, pair)
    }

    #[test]
    fn evolve_at_zero_time_is_identity() {
        let (_, basis, pair) = setup(1, 2, (1.0, 1.0, 1.0), 6);
        let h0 = h2_perturbation(basis, 0, 0.3);
        let ht = evolve(&h0, &pair.fr, 0.0, 1e-12).unwrap();
        for (a, b) in ht.coefficients().iter().zip(h0.coefficients()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn constant_state_is_steady_for_both_generators() {
        let (_, basis, pair) = setup(2, 2, (1.0, 0.5, 1.0), 4);
        let one = HermiteState::one(basis);
        for g in [&pair.fr, &pair.t_system] {
            let ht = evolve(&one, g, 2.5, 1e-12).unwrap();
            assert_abs_diff_eq!(ht.distance_to_one(), 0.0, epsilon = 1e-11);
        }
    }

    #[test]
    fn thermostat_scalar_mode_decays_at_half_mu() {
        // M = 1, N = 1, lambda = 0: coefficient of H_2(v_1) evolves as
        // epsilon * exp(-mu t / 2) (eigenvalue a(1) = 1/2)
        let mu = 1.3;
        let (_, basis, pair) = setup(1, 1, (0.0, 0.0, mu), 6);
        let eps = 0.2;
        let h0 = h2_perturbation(basis.clone(), 0, eps);
        for t in [0.3, 1.0, 2.7] {
            let ht = evolve(&h0, &pair.t_system, t, 1e-12).unwrap();
            let k = basis.flat(&[2, 0]).unwrap();
            assert_abs_diff_eq!(
                ht.coefficients()[k],
                eps * (-mu * t / 2.0).exp(),
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn normalization_is_conserved() {
        let (_, basis, pair) = setup(2, 3, (1.0, 1.0, 1.0), 5);
        let h0 = h2_perturbation(basis, 1, 0.4);
        for t in [0.1, 1.0, 10.0] {
            for g in [&pair.fr, &pair.t_system] {
                let ht = evolve(&h0, g, t, 1e-11).unwrap();
                assert_abs_diff_eq!(ht.normalization(), 1.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn difference_series_of_equilibrium_is_zero() {
        let (_, basis, pair) = setup(1, 2, (0.0, 1.0, 1.0), 6);
        let one = HermiteState::one(basis);
        let d = difference_series(&one, &pair, 1.7, 1e-12).unwrap();
        assert_abs_diff_eq!(d.norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn difference_series_matches_evolve_then_subtract() {
        let (_, basis, pair) = setup(1, 2, (1.0, 1.0, 1.0), 8);
        let h0 = h2_perturbation(basis, 0, 0.1);
        let t = 1.0;
        let series = difference_series(&h0, &pair, t, 1e-10).unwrap();
        let a = evolve(&h0, &pair.fr, t, 1e-12).unwrap();
        let b = evolve(&h0, &pair.t_system, t, 1e-12).unwrap();
        let direct = a.sub(&b);
        assert!(series.sub(&direct).norm() < 1e-8);
    }

    #[test]
    fn difference_series_rejects_reservoir_dependence() {
        let (_, basis, pair) = setup(1, 2, (1.0, 1.0, 1.0), 4);
        let bad = h2_perturbation(basis, 1, 0.1); // reservoir coordinate
        assert!(difference_series(&bad, &pair, 1.0, 1e-8).is_err());
    }

    #[test]
    fn expansion_terms_respect_per_term_bound() {
        // || A^{n-k-1} (Q_I - Q_T) B^k u_0 || <=
        //   (mu/2)(M/sqrt(N)) Lambda^{n-k-1} (Lambda - mu/2)^k ||u_0||
        let (p, basis, pair) = setup(2, 3, (1.0, 1.0, 1.0), 4);
        let h0 = h2_perturbation(basis, 0, 0.5);
        let lambda = p.lambda_total();
        let u0 = 0.5;
        for (n, k) in [(1usize, 0usize), (2, 0), (2, 1), (4, 2), (6, 5)] {
            let norm = expansion_term_norm(&h0, &pair, n, k).unwrap();
            let bound = p.mu / 2.0 * p.m as f64 / (p.n as f64).sqrt()
                * lambda.powi((n - 1 - k) as i32)
                * (lambda - p.mu / 2.0).powi(k as i32)
                * u0;
            assert!(
                norm <= bound * (1.0 + 1e-12),
                "term ({n},{k}): {norm} > {bound}"
            );
        }
    }

    #[test]
    fn steady_state_of_constant_is_constant() {
        let (_, basis, _) = setup(1, 2, (1.0, 1.0, 1.0), 4);
        let one = HermiteState::one(basis);
        let s = steady_state(&one).unwrap();
        assert_abs_diff_eq!(s.distance_to_one(), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn long_time_evolution_matches_radial_projection() {
        let (p, basis, pair) = setup(1, 2, (1.0, 1.0, 1.0), 6);
        let h0 = h2_perturbation(basis, 0, 0.05);
        let proj = steady_state(&h0).unwrap();
        let t = 50.0 / p.lambda_total();
        let ht = evolve(&h0, &pair.fr, t, 1e-10).unwrap();
        assert!(ht.sub(&proj).norm() < 1e-6);
    }

    #[test]
    fn monotone_relaxation_along_time_grid() {
        let (_, basis, pair) = setup(1, 2, (1.0, 1.0, 1.0), 6);
        let h0 = h2_perturbation(basis, 0, 0.2);
        let steady = steady_state(&h0).unwrap();
        let mut last = f64::INFINITY;
        for k in -4..=4 {
            let t = 2.0f64.powi(k);
            let ht = evolve(&h0, &pair.fr, t, 1e-11).unwrap();
            let dist = ht.sub(&steady).norm();
            assert!(dist <= last + 1e-9);
            last = dist;
        }
    }
}
