//! Coefficient states in the ground-state representation: `f = h * Gamma`,
//! with `h` stored as coefficients over the orthonormal tensor basis. By
//! Parseval, the weighted L2 norm is the Euclidean coefficient norm.

use crate::error::{Error, Result};
use crate::tensor::TensorBasis;
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct HermiteState {
    basis: Arc<TensorBasis>,
    coef: Vec<f64>,
}

impl HermiteState {
    pub fn new(basis: Arc<TensorBasis>, coef: Vec<f64>) -> Result<Self> {
        if coef.len() != basis.dim() {
            return Err(Error::BasisMismatch(format!(
                "coefficient vector has {} entries, basis has {}",
                coef.len(),
                basis.dim()
            )));
        }
        Ok(HermiteState { basis, coef })
    }

    /// The constant function `1` (the common steady state's density ratio).
    pub fn one(basis: Arc<TensorBasis>) -> Self {
        let mut coef = vec![0.0; basis.dim()];
        coef[0] = 1.0;
        HermiteState { basis, coef }
    }

    pub fn basis(&self) -> &Arc<TensorBasis> {
        &self.basis
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coef
    }

    pub fn coefficients_mut(&mut self) -> &mut [f64] {
        &mut self.coef
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.coef
    }

    /// `<h, 1>`, the conserved normalization.
    pub fn normalization(&self) -> f64 {
        self.coef[0]
    }

    /// Weighted L2 norm of `h` (Parseval: Euclidean norm of coefficients).
    pub fn norm(&self) -> f64 {
        self.coef.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &HermiteState) -> f64 {
        self.coef
            .iter()
            .zip(&other.coef)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Distance to the constant `1`, i.e. `||h - 1||_2`.
    pub fn distance_to_one(&self) -> f64 {
        let mut acc = (self.coef[0] - 1.0).powi(2);
        for c in &self.coef[1..] {
            acc += c * c;
        }
        acc.sqrt()
    }

    /// True if the state depends only on the first `m` (system) coordinates.
    pub fn is_v_only(&self, m: usize) -> bool {
        self.basis.indices().all(|(k, ix)| {
            self.coef[k] == 0.0 || ix[m..].iter().all(|&d| d == 0)
        })
    }

    pub fn scale(&mut self, factor: f64) {
        for c in &mut self.coef {
            *c *= factor;
        }
    }

    pub fn axpy(&mut self, alpha: f64, other: &HermiteState) {
        for (c, o) in self.coef.iter_mut().zip(&other.coef) {
            *c += alpha * o;
        }
    }

    pub fn sub(&self, other: &HermiteState) -> HermiteState {
        let coef = self
            .coef
            .iter()
            .zip(&other.coef)
            .map(|(a, b)| a - b)
            .collect();
        HermiteState {
            basis: self.basis.clone(),
            coef,
        }
    }

    /// `integral v_i^2 h Gamma`, the second moment of coordinate `i`.
    pub fn second_moment(&self, coord: usize) -> f64 {
        // v^2 = (sqrt(2) H_2 + 1) / (2 pi)
        let c0 = self.coef[0];
        let c2 = self.unit_coef(coord, 2);
        (2.0f64.sqrt() * c2 + c0) / (2.0 * PI)
    }

    /// `integral v_i^4 h Gamma`, the fourth moment of coordinate `i`.
    pub fn fourth_moment(&self, coord: usize) -> f64 {
        // v^4 = (sqrt(24) H_4 + 6 sqrt(2) H_2 + 3) / (4 pi^2)
        let c0 = self.coef[0];
        let c2 = self.unit_coef(coord, 2);
        let c4 = self.unit_coef(coord, 4);
        (24.0f64.sqrt() * c4 + 6.0 * 2.0f64.sqrt() * c2 + 3.0 * c0) / (4.0 * PI * PI)
    }

    /// `integral v_i^2 v_j^2 h Gamma`, the mixed fourth moment.
    pub fn mixed_second_moment(&self, i: usize, j: usize) -> f64 {
        let c0 = self.coef[0];
        let c2i = self.unit_coef(i, 2);
        let c2j = self.unit_coef(j, 2);
        let c22 = self.pair_coef(i, 2, j, 2);
        (2.0 * c22 + 2.0f64.sqrt() * (c2i + c2j) + c0) / (4.0 * PI * PI)
    }

    /// Coefficient on the index with `deg` at `coord`, zero elsewhere.
    fn unit_coef(&self, coord: usize, deg: u8) -> f64 {
        let mut ix = vec![0u8; self.basis.ncoord()];
        ix[coord] = deg;
        self.basis.flat(&ix).map_or(0.0, |k| self.coef[k])
    }

    fn pair_coef(&self, i: usize, di: u8, j: usize, dj: u8) -> f64 {
        let mut ix = vec![0u8; self.basis.ncoord()];
        ix[i] = di;
        ix[j] = dj;
        self.basis.flat(&ix).map_or(0.0, |k| self.coef[k])
    }
}

/// `h_0 = 1 + epsilon H_2(v_coord)`.
pub fn h2_perturbation(basis: Arc<TensorBasis>, coord: usize, epsilon: f64) -> HermiteState {
    let mut state = HermiteState::one(basis);
    let mut ix = vec![0u8; state.basis.ncoord()];
    ix[coord] = 2;
    let k = state.basis.flat(&ix).expect("degree 2 inside cutoff");
    state.coef[k] = epsilon;
    state
}

/// Per-coordinate ground-state coefficients of a centered Gaussian with
/// inverse temperature `beta_s`, relative to the reference at `2 pi`:
/// `gamma_{2k} = (tau^2 - 1)^k (2k-1)!! / sqrt((2k)!)` with `tau^2 = 2 pi / beta_s`.
/// Finite L2 norm requires `beta_s > pi`.
pub fn gaussian_coefficients(cutoff: usize, beta_s: f64) -> Result<Vec<f64>> {
    if beta_s <= PI {
        return Err(Error::InvalidParameter(format!(
            "h_0 for a Gaussian at beta_s = {beta_s} is not in L2 (needs beta_s > pi)"
        )));
    }
    let tau2 = 2.0 * PI / beta_s;
    let mut g = vec![0.0; cutoff + 1];
    g[0] = 1.0;
    let mut dfact = 1.0; // (2k-1)!!
    let mut fact = 1.0; // (2k)!
    for k in 1..=(cutoff / 2) {
        dfact *= 2.0 * k as f64 - 1.0;
        fact *= (2.0 * k as f64 - 1.0) * 2.0 * k as f64;
        g[2 * k] = (tau2 - 1.0).powi(k as i32) * dfact / fact.sqrt();
    }
    Ok(g)
}

/// Product state over the system coordinates from per-coordinate
/// coefficients, with the reservoir left at equilibrium.
pub fn product_state(
    basis: Arc<TensorBasis>,
    m: usize,
    per_coordinate: &[f64],
) -> Result<HermiteState> {
    let mut coef = vec![0.0; basis.dim()];
    for (k, ix) in basis.indices() {
        if ix[m..].iter().any(|&d| d != 0) {
            continue;
        }
        let mut c = 1.0;
        for &d in &ix[..m] {
            c *= per_coordinate.get(d as usize).copied().unwrap_or(0.0);
        }
        coef[k] = c;
    }
    HermiteState::new(basis, coef)
}

/// Mixture of two product Gaussians at inverse temperatures `beta1`, `beta2`
/// with weights `w`, `1 - w` (the two-temperature initial state).
pub fn two_temperature_mixture(
    basis: Arc<TensorBasis>,
    m: usize,
    w: f64,
    beta1: f64,
    beta2: f64,
) -> Result<HermiteState> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::InvalidParameter(format!(
            "mixture weight must be in [0,1], got {w}"
        )));
    }
    let g1 = gaussian_coefficients(basis.cutoff(), beta1)?;
    let g2 = gaussian_coefficients(basis.cutoff(), beta2)?;
    let mut s1 = product_state(basis.clone(), m, &g1)?;
    let s2 = product_state(basis, m, &g2)?;
    s1.scale(w);
    s1.axpy(1.0 - w, &s2);
    Ok(s1)
}
