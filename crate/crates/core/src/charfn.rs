//! Characteristic functions, with the paper's Fourier convention
//! `fhat(z) = integral exp(-2 pi i z.x) f(x) dx` under which the reference
//! Gaussian `Gamma_1(v) = exp(-pi v^2)` is self-dual.
//!
//! For a coefficient state `f = h Gamma`, each basis factor transforms as
//! `FT[H_n Gamma](z) = (-i)^n (sqrt(2 pi) z)^n / sqrt(n!) * Gamma(z)`,
//! which follows from the generating function of the orthonormal basis.

use crate::state::HermiteState;
use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::Arc;

/// Where the evaluator comes from; carries what is needed for certified
/// tail bounds in the `d_2` search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    AnalyticFromCoefficients,
    EmpiricalFromEnsemble,
    Reference,
}

#[derive(Clone)]
pub struct CharFunction {
    dim: usize,
    provenance: Provenance,
    /// Upper bound on `sup_z |fhat(z)|`, used by the search certificate.
    sup_bound: f64,
    /// Whether `fhat` depends only on `|z|` (rotation-invariant density).
    radial: bool,
    /// Bound on the absolute floating-point error of one evaluation; the
    /// `d_2` search subtracts it so the `0/0` cone near the origin cannot
    /// inflate the reported supremum.
    eval_noise: f64,
    /// Symmetric matrix of the quadratic term of `fhat - Gaussian` at the
    /// origin (available for coefficient states); its largest absolute
    /// eigenvalue is the exact `z -> 0` limit of the `d_2` ratio.
    quadratic: Option<Vec<f64>>,
    eval: Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>,
    /// Standard error of the evaluator at a point (empirical inputs only).
    stderr: Option<Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>>,
}

impl std::fmt::Debug for CharFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CharFunction")
            .field("dim", &self.dim)
            .field("provenance", &self.provenance)
            .field("sup_bound", &self.sup_bound)
            .field("radial", &self.radial)
            .finish()
    }
}

impl CharFunction {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    pub fn is_radial(&self) -> bool {
        self.radial
    }

    pub fn eval(&self, z: &[f64]) -> Complex64 {
        debug_assert_eq!(z.len(), self.dim);
        (self.eval)(z)
    }

    pub fn stderr_at(&self, z: &[f64]) -> f64 {
        match &self.stderr {
            Some(f) => f(z),
            None => 0.0,
        }
    }

    pub fn eval_noise(&self) -> f64 {
        self.eval_noise
    }

    /// Quadratic form of `fhat - Gamma` at the origin, row-major symmetric,
    /// when the input is backed by coefficients.
    pub fn quadratic_form(&self) -> Option<&[f64]> {
        self.quadratic.as_deref()
    }

    /// The reference Gaussian `Gamma_dim`, which is its own transform.
    pub fn gaussian(dim: usize) -> Self {
        CharFunction {
            dim,
            provenance: Provenance::Reference,
            sup_bound: 1.0,
            radial: true,
            eval_noise: 8.0 * f64::EPSILON,
            quadratic: Some(vec![0.0; dim * dim]),
            eval: Arc::new(move |z: &[f64]| {
                let r2: f64 = z.iter().map(|v| v * v).sum();
                Complex64::new((-PI * r2).exp(), 0.0)
            }),
            stderr: None,
        }
    }

    /// Analytic transform of a coefficient state.
    pub fn from_coefficients(state: &HermiteState) -> Self {
        Self::from_coefficients_with(state, false)
    }

    /// Same, for states known to be rotation invariant (steady states):
    /// enables the one-dimensional radial search.
    pub fn from_coefficients_radial(state: &HermiteState) -> Self {
        Self::from_coefficients_with(state, true)
    }

    fn from_coefficients_with(state: &HermiteState, radial: bool) -> Self {
        let basis = state.basis().clone();
        let dim = basis.ncoord();
        let cutoff = basis.cutoff();
        let entries: Vec<(Vec<u8>, f64)> = basis
            .indices()
            .filter_map(|(k, ix)| {
                let c = state.coefficients()[k];
                (c != 0.0).then(|| (ix.to_vec(), c))
            })
            .collect();
        // |FT[H_n Gamma]| <= kappa_n with kappa_n = n^{n/2} e^{-n/2} / sqrt(n!)
        let kappa: Vec<f64> = (0..=cutoff)
            .map(|n| {
                if n == 0 {
                    1.0
                } else {
                    let nf = n as f64;
                    let mut fact = 1.0;
                    for k in 1..=n {
                        fact *= k as f64;
                    }
                    (nf.ln() * nf / 2.0 - nf / 2.0 - fact.ln() / 2.0).exp()
                }
            })
            .collect();
        let sup_bound: f64 = entries
            .iter()
            .map(|(ix, c)| {
                c.abs()
                    * ix.iter()
                        .map(|&n| kappa[n as usize])
                        .product::<f64>()
            })
            .sum();
        // each summand is bounded by |c_alpha| once the per-coordinate
        // Gaussian is folded in, so the summation error is controlled
        let abs_sum: f64 = entries.iter().map(|(_, c)| c.abs()).sum();
        let eval_noise = 8.0 * f64::EPSILON * (entries.len() as f64 + dim as f64 + 2.0)
            * abs_sum.max(1.0);
        // quadratic term of fhat - Gamma at the origin (condd2 inputs):
        // -sqrt(2) pi dc_{2e_k} on the diagonal, -pi dc_{e_k + e_l} off it,
        // relative to the Gaussian reference coefficients delta_0
        let quadratic = {
            let mut q = vec![0.0; dim * dim];
            let mut ix = vec![0u8; dim];
            for k in 0..dim {
                ix.iter_mut().for_each(|d| *d = 0);
                ix[k] = 2;
                if let Some(flat) = basis.flat(&ix) {
                    q[k * dim + k] = -2.0f64.sqrt() * PI * state.coefficients()[flat];
                }
                for l in (k + 1)..dim {
                    ix.iter_mut().for_each(|d| *d = 0);
                    ix[k] = 1;
                    ix[l] = 1;
                    if let Some(flat) = basis.flat(&ix) {
                        let v = -PI * state.coefficients()[flat];
                        q[k * dim + l] = v;
                        q[l * dim + k] = v;
                    }
                }
            }
            Some(q)
        };
        let eval = move |z: &[f64]| -> Complex64 {
            // per-coordinate factors (-i)^n (sqrt(2 pi) z)^n e^{-pi z^2}/sqrt(n!),
            // each bounded by 1, so every summand is bounded by |c_alpha|
            let root = (2.0 * PI).sqrt();
            let mut factors: Vec<Complex64> = Vec::with_capacity(dim * (cutoff + 1));
            for &zk in z {
                let gauss = (-PI * zk * zk).exp();
                let mut power = Complex64::new(gauss, 0.0);
                factors.push(power);
                let step = Complex64::new(0.0, -root * zk);
                for n in 1..=cutoff {
                    power *= step / (n as f64).sqrt();
                    factors.push(power);
                }
            }
            let stride = cutoff + 1;
            let mut val = Complex64::new(0.0, 0.0);
            for (ix, c) in &entries {
                let mut term = Complex64::new(*c, 0.0);
                for (co, &n) in ix.iter().enumerate() {
                    term *= factors[co * stride + n as usize];
                }
                val += term;
            }
            val
        };
        CharFunction {
            dim,
            provenance: Provenance::AnalyticFromCoefficients,
            sup_bound,
            radial,
            eval_noise,
            quadratic,
            eval: Arc::new(eval),
            stderr: None,
        }
    }

    /// Empirical transform of a sample cloud (rows are points in R^dim).
    pub fn from_samples(samples: Arc<Vec<Vec<f64>>>, dim: usize) -> Self {
        let count = samples.len();
        let n = samples.len().max(1) as f64;
        let samples_for_err = samples.clone();
        let eval = move |z: &[f64]| -> Complex64 {
            let mut acc = Complex64::new(0.0, 0.0);
            for x in samples.iter() {
                let phase: f64 = -2.0 * PI * z.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                acc += Complex64::from_polar(1.0, phase);
            }
            acc / n
        };
        let stderr = move |z: &[f64]| -> f64 {
            // variance of exp(-2 pi i z.x) around its mean, divided by K
            let mut mean = Complex64::new(0.0, 0.0);
            let mut sq = 0.0;
            for x in samples_for_err.iter() {
                let phase: f64 = -2.0 * PI * z.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                let v = Complex64::from_polar(1.0, phase);
                mean += v;
                sq += 1.0; // |v|^2 = 1
            }
            let k = samples_for_err.len().max(2) as f64;
            mean /= k;
            let var = (sq / k - mean.norm_sqr()).max(0.0);
            (var / k).sqrt()
        };
        CharFunction {
            dim,
            provenance: Provenance::EmpiricalFromEnsemble,
            sup_bound: 1.0,
            radial: false,
            eval_noise: 8.0 * f64::EPSILON * (count as f64 + dim as f64 + 2.0),
            quadratic: None,
            eval: Arc::new(eval),
            stderr: Some(Arc::new(stderr)),
        }
    }

    /// Convex mixture `alpha f + beta g` of two densities' transforms.
    pub fn mix(alpha: f64, f: &CharFunction, beta: f64, g: &CharFunction) -> Self {
        assert_eq!(f.dim, g.dim);
        let (fe, ge) = (f.eval.clone(), g.eval.clone());
        let quadratic = match (&f.quadratic, &g.quadratic) {
            (Some(a), Some(b)) => Some(
                a.iter()
                    .zip(b)
                    .map(|(x, y)| alpha * x + beta * y)
                    .collect(),
            ),
            _ => None,
        };
        CharFunction {
            dim: f.dim,
            provenance: f.provenance,
            sup_bound: alpha * f.sup_bound + beta * g.sup_bound,
            radial: f.radial && g.radial,
            eval_noise: alpha.abs() * f.eval_noise + beta.abs() * g.eval_noise,
            quadratic,
            eval: Arc::new(move |z: &[f64]| alpha * fe(z) + beta * ge(z)),
            stderr: None,
        }
    }
}
