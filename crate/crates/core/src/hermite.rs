//! One-dimensional Hermite machinery for the weight `exp(-pi v^2)`.
//!
//! The basis is orthonormal: `<H_m, H_n> = delta_{mn}` with
//! `<f, g> = integral f(v) g(v) exp(-pi v^2) dv`. Concretely
//! `H_n(v) = He_n(sqrt(2 pi) v)` where `He_n` is the orthonormal
//! probabilists' Hermite polynomial, so `H_0 = 1`, `H_1(v) = sqrt(2 pi) v`
//! and every `H_n` has a positive leading coefficient.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use std::f64::consts::PI;

/// Truncated orthonormal Hermite basis for the weight `exp(-pi v^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HermiteBasis {
    cutoff: usize,
}

impl HermiteBasis {
    pub fn new(cutoff: usize) -> Self {
        HermiteBasis { cutoff }
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Value of the orthonormal `H_n` at `v`, by the three-term recurrence.
    pub fn eval(&self, n: usize, v: f64) -> Result<f64> {
        if n > self.cutoff {
            return Err(Error::DegreeAboveCutoff {
                degree: n,
                cutoff: self.cutoff,
            });
        }
        Ok(hermite_value(n, v))
    }

    /// Values of `H_0(v) .. H_cutoff(v)`.
    pub fn eval_all(&self, v: f64) -> Vec<f64> {
        hermite_values(self.cutoff, v)
    }

    /// Leading coefficient of `H_n`, i.e. `H_n(v) = lead * v^n + ...`.
    /// Dividing it out gives the monic Hermite polynomial for the same weight.
    pub fn leading_coefficient(&self, n: usize) -> f64 {
        let mut lead = 1.0;
        for k in 1..=n {
            lead *= (2.0 * PI / k as f64).sqrt();
        }
        lead
    }
}

pub(crate) fn hermite_values(nmax: usize, v: f64) -> Vec<f64> {
    let x = (2.0 * PI).sqrt() * v;
    let mut out = vec![0.0; nmax + 1];
    out[0] = 1.0;
    if nmax >= 1 {
        out[1] = x;
    }
    for n in 1..nmax {
        out[n + 1] = (x * out[n] - (n as f64).sqrt() * out[n - 1]) / ((n + 1) as f64).sqrt();
    }
    out
}

pub(crate) fn hermite_value(n: usize, v: f64) -> f64 {
    hermite_values(n, v)[n]
}

/// Gauss rule for `integral f(v) exp(-pi v^2) dv`, exact for polynomials of
/// degree `2 * len - 1`. Built by Golub-Welsch on the Jacobi matrix of the
/// orthonormal recurrence (off-diagonals `sqrt(n / (2 pi))`).
#[derive(Debug, Clone)]
pub struct GaussHermiteRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermiteRule {
    pub fn new(npoints: usize) -> Self {
        assert!(npoints >= 1);
        let mut jacobi = DMatrix::<f64>::zeros(npoints, npoints);
        for k in 1..npoints {
            let b = (k as f64 / (2.0 * PI)).sqrt();
            jacobi[(k - 1, k)] = b;
            jacobi[(k, k - 1)] = b;
        }
        let eig = SymmetricEigen::new(jacobi);
        let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        nodes.sort_by(f64::total_cmp);
        // Newton-polish the eigenvalue estimates on H_n (the nodes are its
        // roots) and take the Christoffel weights 1 / sum_k H_k(x)^2; this
        // keeps the rule exact to near machine precision at high degree.
        let weights: Vec<f64> = nodes
            .iter_mut()
            .map(|x| {
                for _ in 0..4 {
                    let vals = hermite_values(npoints, *x);
                    let deriv = (2.0 * PI * npoints as f64).sqrt() * vals[npoints - 1];
                    if deriv != 0.0 {
                        *x -= vals[npoints] / deriv;
                    }
                }
                let vals = hermite_values(npoints.saturating_sub(1), *x);
                1.0 / vals.iter().map(|h| h * h).sum::<f64>()
            })
            .collect();
        GaussHermiteRule { nodes, weights }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Uniform angular rule on `[0, 2 pi)`; with `n` nodes it integrates
/// trigonometric polynomials of degree `< n` exactly.
#[derive(Debug, Clone)]
pub struct AngularRule {
    pub nodes: Vec<f64>,
}

impl AngularRule {
    pub fn new(npoints: usize) -> Self {
        assert!(npoints >= 1);
        AngularRule {
            nodes: (0..npoints)
                .map(|k| 2.0 * PI * k as f64 / npoints as f64)
                .collect(),
        }
    }

    /// Normalized average `(1/2pi) integral_0^{2pi} f(theta) dtheta`.
    pub fn average(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for &t in &self.nodes {
            acc += f(t);
        }
        acc / self.nodes.len() as f64
    }
}

/// Thermostat eigenvalue `a(n)`: `T_i H_{2n} = a(n) H_{2n}` while odd degrees
/// are annihilated. Equals the circular average of `cos^{2n}`.
pub fn thermostat_eigenvalue(n: usize) -> f64 {
    // (2n-1)!! / (2n)!!
    let mut a = 1.0;
    for k in 1..=n {
        a *= (2.0 * k as f64 - 1.0) / (2.0 * k as f64);
    }
    a
}

/// Action of the thermostat on a single coordinate of degree `n`:
/// `a(n/2)` for even `n`, zero for odd `n`.
pub fn thermostat_factor(degree: usize) -> f64 {
    if degree % 2 == 0 {
        thermostat_eigenvalue(degree / 2)
    } else {
        0.0
    }
}

/// Matrix of the theta-averaged pair rotation on the two-variable block of
/// total degree `d`, in the basis `{H_a (x) H_b : a + b = d}` ordered by `a`.
///
/// Entry `(p, a)` is `avg_theta <H_p (x) H_{d-p}, H_a(v*) H_{d-a}(w*)>` with
/// `v* = v cos(theta) + w sin(theta)`, `w* = -v sin(theta) + w cos(theta)`.
/// The integrand is a trigonometric polynomial of degree `<= 2d`, so the
/// uniform rule below is exact; the result is the orthogonal projector onto
/// the rotation-invariant part of the block (zero for odd `d`).
pub fn rotation_block(d: usize) -> DMatrix<f64> {
    let ntheta = 4 * d + 8;
    let rule = GaussHermiteRule::new(d + 4);
    let angles = AngularRule::new(ntheta);
    let npts = rule.nodes.len();
    // quadrature weights folded into the unrotated factors
    let base: Vec<Vec<f64>> = (0..=d)
        .map(|n| {
            rule.nodes
                .iter()
                .zip(&rule.weights)
                .map(|(&x, &w)| hermite_value(n, x) * w)
                .collect()
        })
        .collect();
    let mut block = DMatrix::<f64>::zeros(d + 1, d + 1);
    let mut comp = DMatrix::<f64>::zeros(d + 1, d + 1);
    for &theta in &angles.nodes {
        let (s, c) = theta.sin_cos();
        for i in 0..npts {
            for j in 0..npts {
                let (v, w) = (rule.nodes[i], rule.nodes[j]);
                let hv = hermite_values(d, v * c + w * s);
                let hw = hermite_values(d, -v * s + w * c);
                for a in 0..=d {
                    let rot = hv[a] * hw[d - a];
                    if rot == 0.0 {
                        continue;
                    }
                    // parity: entries mixing even and odd degrees vanish
                    for p in (a % 2..=d).step_by(2) {
                        // Kahan-compensated accumulation
                        let term = rot * base[p][i] * base[d - p][j] - comp[(p, a)];
                        let next = block[(p, a)] + term;
                        comp[(p, a)] = (next - block[(p, a)]) - term;
                        block[(p, a)] = next;
                    }
                }
            }
        }
    }
    block /= ntheta as f64;
    // the averaged rotation is self-adjoint; symmetrizing removes the
    // remaining rounding noise of the tensor quadrature
    block = (block.clone() + block.transpose()) / 2.0;
    for e in block.iter_mut() {
        if e.abs() < 1e-13 {
            *e = 0.0;
        }
    }
    block
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn h0_is_one() {
        let basis = HermiteBasis::new(8);
        for v in [-3.0, -0.5, 0.0, 1.7, 4.2] {
            assert_eq!(basis.eval(0, v).unwrap(), 1.0);
        }
    }

    #[test]
    fn h1_is_sqrt_2pi_v() {
        // normalization oracle: integral v^2 exp(-pi v^2) dv = 1/(2 pi)
        let rule = GaussHermiteRule::new(20);
        let second_moment = rule.integrate(|v| v * v);
        assert_abs_diff_eq!(second_moment, 1.0 / (2.0 * PI), epsilon = 1e-14);
        let basis = HermiteBasis::new(4);
        for v in [-1.3, 0.4, 2.0] {
            assert_abs_diff_eq!(
                basis.eval(1, v).unwrap(),
                v / second_moment.sqrt(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn degree_above_cutoff_rejected() {
        let basis = HermiteBasis::new(3);
        assert!(matches!(
            basis.eval(4, 0.0),
            Err(Error::DegreeAboveCutoff { degree: 4, cutoff: 3 })
        ));
    }

    #[test]
    fn gram_matrix_is_identity() {
        // quadrature oracle, independent of any closed form
        let rule = GaussHermiteRule::new(24);
        for m in 0..=8 {
            for n in 0..=8 {
                let ip = rule.integrate(|v| hermite_value(m, v) * hermite_value(n, v));
                let expect = if m == n { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(ip, expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn angular_rule_exact_on_trig_polynomials() {
        let rule = AngularRule::new(33);
        for k in 1..=16usize {
            let avg_cos = rule.average(|t| (k as f64 * t).cos());
            let avg_sin = rule.average(|t| (k as f64 * t).sin());
            assert_abs_diff_eq!(avg_cos, 0.0, epsilon = 1e-13);
            assert_abs_diff_eq!(avg_sin, 0.0, epsilon = 1e-13);
        }
        assert_abs_diff_eq!(
            rule.average(|t| t.cos().powi(2)),
            0.5,
            epsilon = 1e-13
        );
    }

    #[test]
    fn radial_rule_exact_on_polynomials() {
        // degree 2n-1 exactness: moments of exp(-pi v^2)
        let rule = GaussHermiteRule::new(6);
        let mut expect = vec![1.0]; // m_0
        for k in 1..=5usize {
            // m_{2k} = (2k-1)!! / (2 pi)^k
            let prev = expect[k - 1];
            expect.push(prev * (2.0 * k as f64 - 1.0) / (2.0 * PI));
        }
        for k in 0..=5usize {
            let m = rule.integrate(|v| v.powi(2 * k as i32));
            assert_abs_diff_eq!(m, expect[k], epsilon = 1e-13 * expect[k].max(1.0));
            if k < 5 {
                let odd = rule.integrate(|v| v.powi(2 * k as i32 + 1));
                assert_abs_diff_eq!(odd, 0.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn thermostat_eigenvalues() {
        assert_eq!(thermostat_eigenvalue(0), 1.0);
        // oracle: circular average of cos^2
        let rule = AngularRule::new(64);
        let a1 = rule.average(|t| t.cos().powi(2));
        assert_abs_diff_eq!(thermostat_eigenvalue(1), a1, epsilon = 1e-14);
        assert_abs_diff_eq!(thermostat_eigenvalue(1), 0.5, epsilon = 0.0);
        for n in 1..=8 {
            let quad = rule.average(|t| t.cos().powi(2 * n as i32));
            assert_abs_diff_eq!(thermostat_eigenvalue(n), quad, epsilon = 1e-13);
            assert!(thermostat_eigenvalue(n) <= 0.5);
        }
        // odd degrees are annihilated
        for n in [1usize, 3, 5, 7] {
            assert_eq!(thermostat_factor(n), 0.0);
            let odd = rule.average(|t| t.cos().powi(n as i32));
            assert_abs_diff_eq!(odd, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn rotation_block_degree_zero_is_identity() {
        let b = rotation_block(0);
        assert_eq!(b.nrows(), 1);
        assert_abs_diff_eq!(b[(0, 0)], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn rotation_blocks_are_projectors() {
        for d in 0..=16 {
            let b = rotation_block(d);
            let diff = &b * &b - &b;
            assert!(diff.amax() <= 1e-12, "degree {d}: not idempotent");
            assert!((b.transpose() - &b).amax() <= 1e-12, "degree {d}: not symmetric");
        }
    }

    #[test]
    fn rotation_block_degree_two_matches_dense_quadrature_oracle() {
        // independent oracle: dense theta grid, pointwise products
        let d = 2;
        let rule = GaussHermiteRule::new(12);
        let ntheta = 512;
        let mut oracle = DMatrix::<f64>::zeros(d + 1, d + 1);
        for kt in 0..ntheta {
            let theta = 2.0 * PI * kt as f64 / ntheta as f64;
            let (c, s) = (theta.cos(), theta.sin());
            for a in 0..=d {
                for p in 0..=d {
                    let mut acc = 0.0;
                    for (&v, &wv) in rule.nodes.iter().zip(&rule.weights) {
                        for (&w, &ww) in rule.nodes.iter().zip(&rule.weights) {
                            acc += wv
                                * ww
                                * hermite_value(a, v * c + w * s)
                                * hermite_value(d - a, -v * s + w * c)
                                * hermite_value(p, v)
                                * hermite_value(d - p, w);
                        }
                    }
                    oracle[(p, a)] += acc;
                }
            }
        }
        oracle /= ntheta as f64;
        let block = rotation_block(d);
        assert!((block.clone() - oracle).amax() < 1e-12);
        // frozen values: columns mix (2,0),(0,2) with weight 1/2, kill (1,1)
        assert_abs_diff_eq!(block[(0, 0)], 0.5, epsilon = 1e-13);
        assert_abs_diff_eq!(block[(2, 0)], 0.5, epsilon = 1e-13);
        assert_abs_diff_eq!(block[(1, 1)], 0.0, epsilon = 1e-13);
    }

    #[test]
    fn leading_coefficients_give_monic_polynomials() {
        let basis = HermiteBasis::new(4);
        // monic degree 2: v^2 - 1/(2 pi); monic degree 4: v^4 - (3/pi) v^2 + 3/(4 pi^2)
        let lead2 = basis.leading_coefficient(2);
        let lead4 = basis.leading_coefficient(4);
        for v in [0.3, 1.1, -0.8] {
            let m2 = basis.eval(2, v).unwrap() / lead2;
            assert_abs_diff_eq!(m2, v * v - 1.0 / (2.0 * PI), epsilon = 1e-12);
            let m4 = basis.eval(4, v).unwrap() / lead4;
            assert_abs_diff_eq!(
                m4,
                v.powi(4) - 3.0 / PI * v * v + 3.0 / (4.0 * PI * PI),
                epsilon = 1e-12
            );
        }
    }
}
