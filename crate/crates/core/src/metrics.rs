//! Weighted L2 norm, the fourth-moment recursion behind the `C^4` control
//! of the thermostated evolution, and the chained `C^4` bounds on the
//! interaction-minus-thermostat kernel.

use crate::charfn::CharFunction;
use crate::error::{Error, Result};
use crate::hermite::AngularRule;
use crate::operators::assemble;
use crate::params::{GeneratorTag, SystemParams};
use crate::state::HermiteState;
use crate::tensor::TensorBasis;
use nalgebra::Matrix4;
use std::f64::consts::PI;
use std::sync::Arc;

/// Weighted L2 norm of a coefficient state (Parseval).
pub fn l2_gamma_norm(state: &HermiteState) -> f64 {
    state.norm()
}

/// Components on the basis `{HH_4, HH_3, HH_2, HH_0}` of even symmetric
/// polynomials of degree at most four built from monic Hermite polynomials:
/// `HH_4 = (1/M) sum_i H4m(v_i)`, `HH_3 = 2/(M(M-1)) sum_{i<j} H2m(v_i) H2m(v_j)`,
/// `HH_2 = (1/M) sum_i H2m(v_i)`, `HH_0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentVector {
    pub a4: f64,
    pub a3: f64,
    pub a2: f64,
    pub a0: f64,
}

impl MomentVector {
    /// Components of `(1/M) sum_i v_i^4`: `(1, 0, 3/pi, 3/(4 pi^2))`.
    pub fn mean_fourth_power() -> Self {
        MomentVector {
            a4: 1.0,
            a3: 0.0,
            a2: 3.0 / PI,
            a0: 3.0 / (4.0 * PI * PI),
        }
    }

    pub fn euclidean_norm(&self) -> f64 {
        (self.a4 * self.a4 + self.a3 * self.a3 + self.a2 * self.a2 + self.a0 * self.a0).sqrt()
    }

    fn to_array(self) -> [f64; 4] {
        [self.a4, self.a3, self.a2, self.a0]
    }

    fn from_array(a: [f64; 4]) -> Self {
        MomentVector {
            a4: a[0],
            a3: a[1],
            a2: a[2],
            a0: a[3],
        }
    }
}

/// Moments of a symmetric initial distribution `l_0` entering the pairing
/// that evaluates `E_{4,k}`. `e3` is the mixed moment
/// `integral v_i^2 v_j^2 l_0` (any `i != j`; zero-dimensional for `M = 1`).
#[derive(Debug, Clone, Copy)]
pub struct InitialMoments {
    pub e2: f64,
    pub e3: f64,
    pub e4: f64,
}

impl InitialMoments {
    pub fn of_state(state: &HermiteState, m: usize) -> Self {
        let e2 = (0..m).map(|i| state.second_moment(i)).sum::<f64>() / m as f64;
        let e4 = (0..m).map(|i| state.fourth_moment(i)).sum::<f64>() / m as f64;
        let e3 = if m >= 2 {
            let mut acc = 0.0;
            let mut cnt = 0.0;
            for i in 0..m {
                for j in (i + 1)..m {
                    acc += state.mixed_second_moment(i, j);
                    cnt += 1.0;
                }
            }
            acc / cnt
        } else {
            0.0
        };
        InitialMoments { e2, e3, e4 }
    }

    pub fn gaussian() -> Self {
        InitialMoments {
            e2: 1.0 / (2.0 * PI),
            e3: 1.0 / (4.0 * PI * PI),
            e4: 3.0 / (4.0 * PI * PI),
        }
    }
}

/// The matrix of `Lambda^{-1} (Q_S + Q_T + (lambda_R N / 2) I)` on the
/// `HH` basis, computed numerically from the assembled operators on a
/// v-only tensor basis. Its spectral norm is at most one, which is what
/// keeps the fourth-moment recursion bounded.
pub struct PropHiMatrix {
    pub matrix: Matrix4<f64>,
    pub params: SystemParams,
}

impl PropHiMatrix {
    pub fn new(params: &SystemParams) -> Result<Self> {
        let m = params.m;
        // v-only action: assemble over the system coordinates plus one idle
        // reservoir coordinate; N enters only through lambda_R N/2 and Lambda
        let v_params = SystemParams::new(m, 1, params.lambda_s, 0.0, params.mu)?;
        let basis_full = TensorBasis::new(m + 1, 4)?;
        let qs = assemble(&v_params, GeneratorTag::QS, &basis_full)?;
        let qt = assemble(&v_params, GeneratorTag::QT, &basis_full)?;
        let lambda = params.lambda_total();
        let shift = params.gain_r();

        let hh = hh_basis(&basis_full, m);
        let mut cols = [[0.0f64; 4]; 4];
        for (c, base_vec) in hh.iter().enumerate() {
            if base_vec.norm_sq == 0.0 {
                continue;
            }
            let mut img = qs.matrix.matvec(&base_vec.coef);
            let img_t = qt.matrix.matvec(&base_vec.coef);
            for (k, v) in img.iter_mut().enumerate() {
                *v = (*v + img_t[k] + shift * base_vec.coef[k]) / lambda;
            }
            // coordinates: HH_i are mutually orthogonal in L2(Gamma)
            let mut residual = img.clone();
            for (r, row_vec) in hh.iter().enumerate() {
                if row_vec.norm_sq == 0.0 {
                    continue;
                }
                let coord = dot(&img, &row_vec.coef) / row_vec.norm_sq;
                cols[c][r] = coord;
                for (res, b) in residual.iter_mut().zip(&row_vec.coef) {
                    *res -= coord * b;
                }
            }
            let res_norm = residual.iter().map(|v| v * v).sum::<f64>().sqrt();
            if res_norm > 1e-10 {
                return Err(Error::CertificationFailed(format!(
                    "operator does not leave the degree-four symmetric space invariant (residual {res_norm:.3e})"
                )));
            }
        }
        let mut mat = Matrix4::zeros();
        for c in 0..4 {
            for r in 0..4 {
                mat[(r, c)] = cols[c][r];
            }
        }
        Ok(PropHiMatrix {
            matrix: mat,
            params: *params,
        })
    }

    pub fn spectral_norm(&self) -> f64 {
        self.matrix.svd(false, false).singular_values.max()
    }

    pub fn apply(&self, a: &MomentVector) -> MomentVector {
        let v = self.matrix * nalgebra::Vector4::from(a.to_array());
        MomentVector::from_array([v[0], v[1], v[2], v[3]])
    }

    /// `a_k = L^k a`.
    pub fn iterate(&self, a0: &MomentVector, k: usize) -> MomentVector {
        let mut a = *a0;
        for _ in 0..k {
            a = self.apply(&a);
        }
        a
    }

    /// `E_{4,k}`: pair `a_k` with the moments of `l_0`.
    pub fn e4k(&self, a_k: &MomentVector, moments: &InitialMoments) -> f64 {
        let InitialMoments { e2, e3, e4 } = *moments;
        a_k.a4 * (e4 - 3.0 / PI * e2 + 3.0 / (4.0 * PI * PI))
            + a_k.a3 * (e3 - e2 / PI + 1.0 / (4.0 * PI * PI))
            + a_k.a2 * (e2 - 1.0 / (2.0 * PI))
            + a_k.a0
    }
}

struct HhVector {
    coef: Vec<f64>,
    norm_sq: f64,
}

/// The four symmetric basis vectors as coefficient states over a basis with
/// `m` system coordinates (extra coordinates carry degree zero).
fn hh_basis(basis: &Arc<TensorBasis>, m: usize) -> [HhVector; 4] {
    // monic normalizations: H2m = c2 H_2, H4m = c4 H_4
    let c2 = 2.0f64.sqrt() / (2.0 * PI);
    let c4 = 24.0f64.sqrt() / (4.0 * PI * PI);
    let dim = basis.dim();
    let ncoord = basis.ncoord();
    let mut h4 = vec![0.0; dim];
    let mut h2 = vec![0.0; dim];
    let mut h3 = vec![0.0; dim];
    let mut h0 = vec![0.0; dim];
    h0[0] = 1.0;
    for i in 0..m {
        let mut ix = vec![0u8; ncoord];
        ix[i] = 4;
        h4[basis.flat(&ix).unwrap()] = c4 / m as f64;
        ix[i] = 2;
        h2[basis.flat(&ix).unwrap()] = c2 / m as f64;
    }
    if m >= 2 {
        let scale = 2.0 * c2 * c2 / (m as f64 * (m as f64 - 1.0));
        for i in 0..m {
            for j in (i + 1)..m {
                let mut ix = vec![0u8; ncoord];
                ix[i] = 2;
                ix[j] = 2;
                h3[basis.flat(&ix).unwrap()] = scale;
            }
        }
    }
    [h4, h3, h2, h0].map(|coef| {
        let norm_sq = coef.iter().map(|v| v * v).sum();
        HhVector { coef, norm_sq }
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Builds the kernel `Ghat_k(xi, eta)` of the interaction-minus-thermostat
/// comparison from the transform of a v-only state `l_k`, and estimates its
/// `C^4` norm in `eta` by finite differences. Used to check the chain
/// `||Ghat_k(xi, .)||_C4 <= 32 pi^4 (E_{4,k} + 1) <= 96 pi^4 (E_4 + 1)`.
pub struct InteractionKernel {
    lhat: CharFunction,
    m: usize,
    angles: AngularRule,
}

impl InteractionKernel {
    pub fn new(l_state: &HermiteState, m: usize) -> Result<Self> {
        if !l_state.is_v_only(m) {
            return Err(Error::InvalidParameter(
                "interaction kernel needs a v-only state".into(),
            ));
        }
        Ok(InteractionKernel {
            lhat: CharFunction::from_coefficients(l_state),
            m,
            angles: AngularRule::new(128),
        })
    }

    /// `Fhat_i(xi, eta) = avg_theta lhat(.., xi_i cos + eta sin, ..) Gamma_1(-xi_i sin + eta cos)`.
    fn fhat(&self, i: usize, xi: &[f64], eta: f64) -> f64 {
        let mut z = xi.to_vec();
        self.angles.average(|theta| {
            let (c, s) = (theta.cos(), theta.sin());
            z[i] = xi[i] * c + eta * s;
            let gauss = (-PI * (-xi[i] * s + eta * c).powi(2)).exp();
            let v = self.lhat.eval(&z);
            v.re * gauss
        })
    }

    /// `Ghat(xi, eta) = (1/M) sum_i (Fhat_i(xi, eta) - Fhat_i(xi, 0) Gamma_1(eta))`.
    pub fn ghat(&self, xi: &[f64], eta: f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.m {
            let f_eta = self.fhat(i, xi, eta);
            let f_zero = self.fhat(i, xi, 0.0);
            acc += f_eta - f_zero * (-PI * eta * eta).exp();
        }
        acc / self.m as f64
    }

    /// `max_{p <= 4} sup_eta |d^p/deta^p Ghat(xi, eta)|` by central finite
    /// differences on a dense eta grid.
    pub fn c4_norm(&self, xi: &[f64], eta_max: f64, neta: usize) -> f64 {
        let n = neta.max(201);
        let h = 2.0 * eta_max / (n - 1) as f64;
        let vals: Vec<f64> = (0..n)
            .map(|k| self.ghat(xi, -eta_max + k as f64 * h))
            .collect();
        let mut best = vals.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let mut d = vals;
        for _ in 1..=4 {
            let mut next = vec![0.0; d.len()];
            for k in 1..d.len() - 1 {
                next[k] = (d[k + 1] - d[k - 1]) / (2.0 * h);
            }
            next[0] = next[1];
            let last = d.len() - 1;
            next[last] = next[last - 1];
            // skip the contaminated boundary entries
            for &v in &next[8..next.len() - 8] {
                best = best.max(v.abs());
            }
            d = next;
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::GaussHermiteRule;
    use crate::state::{h2_perturbation, two_temperature_mixture, HermiteState};
    use approx::assert_abs_diff_eq;

    #[test]
    fn norm_of_constant_is_one() {
        let basis = TensorBasis::new(2, 4).unwrap();
        assert_eq!(l2_gamma_norm(&HermiteState::one(basis)), 1.0);
    }

    #[test]
    fn norm_of_perturbation() {
        let basis = TensorBasis::new(2, 4).unwrap();
        let h = h2_perturbation(basis, 0, 0.1);
        assert_abs_diff_eq!(l2_gamma_norm(&h), 1.01f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn parseval_matches_direct_quadrature() {
        // random degree <= 4 state in one variable; oracle integrates h^2 Gamma
        let basis = TensorBasis::new(1, 4).unwrap();
        let mut h = HermiteState::one(basis.clone());
        let coefs = [0.9, 0.3, -0.4, 0.2, 0.05];
        for (deg, &c) in coefs.iter().enumerate() {
            h.coefficients_mut()[basis.flat(&[deg as u8]).unwrap()] = c;
        }
        let rule = GaussHermiteRule::new(24);
        let quad = rule
            .integrate(|v| {
                let vals = crate::hermite::hermite_values(4, v);
                let hv: f64 = coefs.iter().zip(&vals).map(|(c, b)| c * b).sum();
                hv * hv
            })
            .sqrt();
        assert_abs_diff_eq!(l2_gamma_norm(&h), quad, epsilon = 1e-10);
    }

    #[test]
    fn mean_fourth_power_components() {
        let a = MomentVector::mean_fourth_power();
        assert_eq!(a.a4, 1.0);
        assert_eq!(a.a3, 0.0);
        assert_abs_diff_eq!(a.a2, 3.0 / PI, epsilon = 0.0);
        assert_abs_diff_eq!(a.a0, 3.0 / (4.0 * PI * PI), epsilon = 0.0);
        assert!(a.euclidean_norm() <= 2.0f64.sqrt());
    }

    #[test]
    fn prop_hi_matrix_is_a_contraction() {
        for (m, n) in [(1usize, 2usize), (2, 10), (4, 40)] {
            let p = SystemParams::new(m, n, 1.0, 1.0, 1.0).unwrap();
            let l = PropHiMatrix::new(&p).unwrap();
            assert!(
                l.spectral_norm() <= 1.0 + 1e-10,
                "||L|| = {} at (M,N)=({m},{n})",
                l.spectral_norm()
            );
        }
    }

    #[test]
    fn prop_hi_matrix_frozen_entries() {
        // M=1, N=2, lambda_s=0, mu=lambda_r=1: L = diag((a(2) + 1)/2, ., (a(1)+1)/2, 1)
        let p = SystemParams::new(1, 2, 0.0, 1.0, 1.0).unwrap();
        let l = PropHiMatrix::new(&p).unwrap();
        assert_abs_diff_eq!(l.matrix[(0, 0)], 11.0 / 16.0, epsilon = 1e-12);
        assert_abs_diff_eq!(l.matrix[(2, 2)], 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(l.matrix[(3, 3)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_is_a_fixed_point_of_the_recursion() {
        let p = SystemParams::new(2, 10, 1.0, 1.0, 1.0).unwrap();
        let l = PropHiMatrix::new(&p).unwrap();
        let moments = InitialMoments::gaussian();
        let mut a = MomentVector::mean_fourth_power();
        for _ in 0..=50 {
            let e4k = l.e4k(&a, &moments);
            assert_abs_diff_eq!(e4k, 3.0 / (4.0 * PI * PI), epsilon = 1e-12);
            a = l.apply(&a);
        }
    }

    #[test]
    fn e4k_bounded_by_twice_e4_plus_one() {
        let p = SystemParams::new(2, 10, 1.0, 1.0, 1.0).unwrap();
        let l = PropHiMatrix::new(&p).unwrap();
        let basis = TensorBasis::new(3, 8).unwrap();
        let state = two_temperature_mixture(basis, 2, 0.5, 2.0 * PI * 4.0 / 3.0, 2.0 * PI * 4.0 / 5.0)
            .unwrap();
        let moments = InitialMoments::of_state(&state, 2);
        let mut a = MomentVector::mean_fourth_power();
        let cap = 2.0 * (moments.e4 + 1.0);
        for _ in 0..=50 {
            assert!(l.e4k(&a, &moments) <= cap);
            a = l.apply(&a);
            assert!(a.euclidean_norm() <= 2.0f64.sqrt() + 1e-12);
        }
    }

    #[test]
    fn c4_chain_holds_for_sampled_states() {
        // || Ghat_k(xi, .) ||_C4 <= 32 pi^4 (E_{4,k} + 1) <= 96 pi^4 (E_4 + 1)
        let m = 1usize;
        let n = 2usize;
        let p = SystemParams::new(m, n, 0.0, 1.0, 1.0).unwrap();
        let basis = TensorBasis::new(m, 8).unwrap();
        let l0 = two_temperature_mixture(
            basis.clone(),
            m,
            0.5,
            2.0 * PI * 4.0 / 3.0,
            2.0 * PI * 4.0 / 5.0,
        )
        .unwrap();
        let moments = InitialMoments::of_state(&l0, m);
        // l_k: normalized thermostat powers on the v-only basis
        let qt = assemble(
            &SystemParams::new(m, 1, 0.0, 0.0, 1.0).unwrap(),
            GeneratorTag::QT,
            &TensorBasis::new(m + 1, 8).unwrap(),
        )
        .unwrap();
        // embed the 1d state into the (m+1)-coordinate basis used by qt
        let full_basis = qt.basis.clone();
        let mut lk = {
            let mut coef = vec![0.0; full_basis.dim()];
            for (k, ix) in basis.indices() {
                let mut jx = ix.to_vec();
                jx.push(0);
                coef[full_basis.flat(&jx).unwrap()] = l0.coefficients()[k];
            }
            HermiteState::new(full_basis.clone(), coef).unwrap()
        };
        let lambda = p.lambda_total();
        let prop = PropHiMatrix::new(&p).unwrap();
        let mut a = MomentVector::mean_fourth_power();
        for _k in 0..3 {
            let e4k = prop.e4k(&a, &moments);
            let kernel = InteractionKernel::new(&lk, m).unwrap();
            for xi_val in [0.2, 0.7, 1.5] {
                let mut xi = vec![0.0; m + 1];
                xi[0] = xi_val;
                let c4 = kernel.c4_norm(&xi, 4.0, 801);
                assert!(
                    c4 <= 32.0 * PI.powi(4) * (e4k + 1.0),
                    "C4 {} above 32 pi^4 (E4k+1) {}",
                    c4,
                    32.0 * PI.powi(4) * (e4k + 1.0)
                );
                assert!(c4 <= 96.0 * PI.powi(4) * (moments.e4 + 1.0));
            }
            // advance l_k and the moment vector
            let img = qt.matrix.matvec(lk.coefficients());
            let shift = p.gain_r();
            let next: Vec<f64> = img
                .iter()
                .zip(lk.coefficients())
                .map(|(t, c)| (t + shift * c) / lambda)
                .collect();
            lk = HermiteState::new(full_basis.clone(), next).unwrap();
            a = prop.apply(&a);
        }
    }
}
