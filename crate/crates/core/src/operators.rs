//! Sparse assembly of the generator pieces on the truncated tensor basis,
//! in the ground-state representation.
//!
//! Coordinates `0..M` carry the system velocities, `M..M+N` the reservoir.
//! Pair rotation averages conserve the total degree of the pair and the
//! thermostat acts diagonally, so every assembled matrix leaves the
//! truncated space exactly invariant: there is no closure error.

use crate::error::{Error, Result};
use crate::hermite::{rotation_block, thermostat_factor};
use crate::params::{GeneratorTag, SystemParams};
use crate::sparse::CsrMatrix;
use crate::tensor::TensorBasis;
use nalgebra::DMatrix;
use std::sync::Arc;

/// A generator piece with its provenance.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    pub matrix: CsrMatrix,
    pub tag: GeneratorTag,
    pub params: SystemParams,
    pub basis: Arc<TensorBasis>,
}

impl GeneratorMatrix {
    pub fn apply(&self, coef: &[f64]) -> Vec<f64> {
        self.matrix.matvec(coef)
    }
}

/// Assemble the named generator piece on `basis`.
pub fn assemble(
    params: &SystemParams,
    tag: GeneratorTag,
    basis: &Arc<TensorBasis>,
) -> Result<GeneratorMatrix> {
    if basis.ncoord() != params.ncoord() {
        return Err(Error::BasisMismatch(format!(
            "basis has {} coordinates but params describe {}",
            basis.ncoord(),
            params.ncoord()
        )));
    }
    let m = params.m;
    let n = params.n;
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut blocks = BlockCache::new(basis.cutoff());

    let add_pairs = |triplets: &mut Vec<(usize, usize, f64)>,
                         blocks: &mut BlockCache,
                         pairs: &[(usize, usize)],
                         scale: f64| {
        for &(i, j) in pairs {
            push_pair_rotation(basis, i, j, scale, blocks, triplets);
        }
    };

    match tag {
        GeneratorTag::QS | GeneratorTag::FullFr | GeneratorTag::FullT => {
            if m >= 2 {
                let pairs = coordinate_pairs(0, m);
                add_pairs(
                    &mut triplets,
                    &mut blocks,
                    &pairs,
                    params.lambda_s / (m as f64 - 1.0),
                );
            }
        }
        _ => {}
    }
    match tag {
        GeneratorTag::QR | GeneratorTag::FullFr | GeneratorTag::FullT => {
            if n >= 2 {
                let pairs = coordinate_pairs(m, m + n);
                add_pairs(
                    &mut triplets,
                    &mut blocks,
                    &pairs,
                    params.lambda_r / (n as f64 - 1.0),
                );
            }
        }
        _ => {}
    }
    match tag {
        GeneratorTag::QI | GeneratorTag::FullFr => {
            let mut pairs = Vec::with_capacity(m * n);
            for i in 0..m {
                for j in 0..n {
                    pairs.push((i, m + j));
                }
            }
            add_pairs(&mut triplets, &mut blocks, &pairs, params.mu / n as f64);
        }
        _ => {}
    }
    match tag {
        GeneratorTag::QT | GeneratorTag::FullT => {
            for (k, ix) in basis.indices() {
                let factor: f64 = (0..m).map(|i| thermostat_factor(ix[i] as usize)).sum();
                if factor != 0.0 {
                    triplets.push((k, k, params.mu * factor));
                }
            }
        }
        _ => {}
    }

    Ok(GeneratorMatrix {
        matrix: CsrMatrix::from_triplets(basis.dim(), &triplets),
        tag,
        params: *params,
        basis: basis.clone(),
    })
}

/// The theta-averaged rotation of one coordinate pair, as a sparse matrix on
/// the full tensor basis (unit rate). `Q_I = (mu/N) sum_{i,j}` of these, etc.
pub fn single_pair_rotation(basis: &Arc<TensorBasis>, i: usize, j: usize) -> CsrMatrix {
    assert!(i < basis.ncoord() && j < basis.ncoord() && i != j);
    let mut blocks = BlockCache::new(basis.cutoff());
    let mut triplets = Vec::new();
    push_pair_rotation(basis, i, j, 1.0, &mut blocks, &mut triplets);
    CsrMatrix::from_triplets(basis.dim(), &triplets)
}

/// The thermostat acting on a single coordinate (unit rate): diagonal with
/// entries `a(n/2)` on even degrees `n`, zero on odd ones.
pub fn single_thermostat(basis: &Arc<TensorBasis>, i: usize) -> CsrMatrix {
    assert!(i < basis.ncoord());
    let triplets: Vec<(usize, usize, f64)> = basis
        .indices()
        .filter_map(|(k, ix)| {
            let f = thermostat_factor(ix[i] as usize);
            (f != 0.0).then_some((k, k, f))
        })
        .collect();
    CsrMatrix::from_triplets(basis.dim(), &triplets)
}

fn coordinate_pairs(lo: usize, hi: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in lo..hi {
        for j in (i + 1)..hi {
            pairs.push((i, j));
        }
    }
    pairs
}

struct BlockCache {
    blocks: Vec<Option<DMatrix<f64>>>,
}

impl BlockCache {
    fn new(cutoff: usize) -> Self {
        BlockCache {
            blocks: vec![None; cutoff + 1],
        }
    }

    fn get(&mut self, d: usize) -> &DMatrix<f64> {
        self.blocks[d].get_or_insert_with(|| rotation_block(d))
    }
}

fn push_pair_rotation(
    basis: &Arc<TensorBasis>,
    i: usize,
    j: usize,
    scale: f64,
    blocks: &mut BlockCache,
    triplets: &mut Vec<(usize, usize, f64)>,
) {
    let mut scratch: Vec<u8> = Vec::new();
    for (col, ix) in basis.indices() {
        let (a, b) = (ix[i] as usize, ix[j] as usize);
        let d = a + b;
        let block = blocks.get(d);
        for p in 0..=d {
            let coef = block[(p, a)];
            if coef == 0.0 {
                continue;
            }
            scratch.clear();
            scratch.extend_from_slice(ix);
            scratch[i] = p as u8;
            scratch[j] = (d - p) as u8;
            // total degree is conserved, so the image is always inside
            let row = basis
                .flat(&scratch)
                .expect("pair rotation left the truncated basis");
            triplets.push((row, col, scale * coef));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::{rotation_block, thermostat_eigenvalue};
    use approx::assert_abs_diff_eq;

    fn ones_eigencheck(tag: GeneratorTag, p: &SystemParams, basis: &Arc<TensorBasis>) {
        let g = assemble(p, tag, basis).unwrap();
        let mut one = vec![0.0; basis.dim()];
        one[0] = 1.0;
        let y = g.apply(&one);
        let expect = tag.gain_on_constant(p);
        for (k, &v) in y.iter().enumerate() {
            let want = if k == 0 { expect } else { 0.0 };
            assert_abs_diff_eq!(v, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn constants_are_eigenvectors_with_stated_gains() {
        let p = SystemParams::new(2, 3, 1.3, 0.7, 0.9).unwrap();
        let basis = TensorBasis::new(5, 4).unwrap();
        for tag in [
            GeneratorTag::QS,
            GeneratorTag::QR,
            GeneratorTag::QI,
            GeneratorTag::QT,
            GeneratorTag::FullFr,
            GeneratorTag::FullT,
        ] {
            ones_eigencheck(tag, &p, &basis);
        }
    }

    #[test]
    fn empty_sum_semantics_for_single_particle() {
        // M = 1: Q_S vanishes identically even with lambda_s > 0
        let p = SystemParams::new(1, 2, 7.0, 1.0, 1.0).unwrap();
        let basis = TensorBasis::new(3, 4).unwrap();
        let qs = assemble(&p, GeneratorTag::QS, &basis).unwrap();
        assert_eq!(qs.matrix.nnz(), 0);
        // and the full generator still kills the constant after -Lambda
        let full = assemble(&p, GeneratorTag::FullFr, &basis).unwrap();
        let mut one = vec![0.0; basis.dim()];
        one[0] = 1.0;
        let y = full.apply(&one);
        assert_abs_diff_eq!(y[0], p.lambda_total(), epsilon = 1e-12);
    }

    #[test]
    fn qi_on_single_pair_matches_rotation_block() {
        // M = 1, N = 1, lambda = 0: Q_I = mu * R^I_{1,1}
        let p = SystemParams::new(1, 1, 0.0, 0.0, 1.0).unwrap();
        let basis = TensorBasis::new(2, 4).unwrap();
        let qi = assemble(&p, GeneratorTag::QI, &basis).unwrap();
        let mut h2 = vec![0.0; basis.dim()];
        h2[basis.flat(&[2, 0]).unwrap()] = 1.0;
        let y = qi.apply(&h2);
        let block = rotation_block(2);
        for (pdeg, row_ix) in [([2u8, 0u8], 0usize), ([1, 1], 1), ([0, 2], 2)] {
            let flat = basis.flat(&pdeg).unwrap();
            assert_abs_diff_eq!(y[flat], block[(row_ix, 0)], epsilon = 1e-12);
        }
    }

    #[test]
    fn qt_product_eigenstructure() {
        // Q_T on H_2(v_1) H_2(v_2) at M=2: eigenvalue mu (a(1) + a(1)) = mu
        let p = SystemParams::new(2, 1, 0.0, 0.0, 1.3).unwrap();
        let basis = TensorBasis::new(3, 4).unwrap();
        let qt = assemble(&p, GeneratorTag::QT, &basis).unwrap();
        let mut state = vec![0.0; basis.dim()];
        let flat = basis.flat(&[2, 2, 0]).unwrap();
        state[flat] = 1.0;
        let y = qt.apply(&state);
        let expect = 1.3 * (thermostat_eigenvalue(1) + thermostat_eigenvalue(1));
        assert_abs_diff_eq!(y[flat], expect, epsilon = 1e-13);
        assert_abs_diff_eq!(expect, 1.3, epsilon = 0.0);
    }

    #[test]
    fn assembled_matrices_are_self_adjoint() {
        let p = SystemParams::new(2, 2, 1.0, 0.8, 1.2).unwrap();
        let basis = TensorBasis::new(4, 5).unwrap();
        for tag in [
            GeneratorTag::QS,
            GeneratorTag::QR,
            GeneratorTag::QI,
            GeneratorTag::QT,
            GeneratorTag::FullFr,
            GeneratorTag::FullT,
        ] {
            let g = assemble(&p, tag, &basis).unwrap();
            assert!(g.matrix.asymmetry() <= 1e-12, "{tag:?} not symmetric");
        }
    }

    #[test]
    fn rotation_conserves_total_degree() {
        let basis = TensorBasis::new(3, 6).unwrap();
        let r = single_pair_rotation(&basis, 0, 2);
        for (row, col, _) in r.triplets() {
            assert_eq!(basis.total_degree(row), basis.total_degree(col));
        }
    }

    #[test]
    fn basis_mismatch_rejected() {
        let p = SystemParams::new(2, 2, 1.0, 1.0, 1.0).unwrap();
        let basis = TensorBasis::new(3, 4).unwrap();
        assert!(matches!(
            assemble(&p, GeneratorTag::QS, &basis),
            Err(Error::BasisMismatch(_))
        ));
    }

    #[test]
    fn permutation_equivariance_of_qs_and_qr() {
        let p = SystemParams::new(3, 2, 1.1, 0.9, 0.5).unwrap();
        let basis = TensorBasis::new(5, 4).unwrap();
        // conjugating by a coordinate permutation = relabeling tensor indices
        let perm_sys = [1usize, 2, 0, 3, 4]; // cycle the system coordinates
        let perm_res = [0usize, 1, 2, 4, 3]; // swap the reservoir coordinates
        for (tag, perm) in [(GeneratorTag::QS, perm_sys), (GeneratorTag::QR, perm_res)] {
            let q = assemble(&p, tag, &basis).unwrap();
            let permute = |x: &[f64]| -> Vec<f64> {
                let mut y = vec![0.0; x.len()];
                for (k, ix) in basis.indices() {
                    let mut jx = vec![0u8; 5];
                    for (c, &pc) in perm.iter().enumerate() {
                        jx[pc] = ix[c];
                    }
                    y[basis.flat(&jx).unwrap()] = x[k];
                }
                y
            };
            // P Q P^T x == Q x on a few deterministic vectors
            for s in 0..4u64 {
                let x: Vec<f64> = (0..basis.dim())
                    .map(|k| ((k as f64 + 1.3) * (s as f64 + 0.7)).sin())
                    .collect();
                let direct = q.apply(&x);
                let inv_perm: Vec<usize> = {
                    let mut inv = vec![0usize; 5];
                    for (c, &pc) in perm.iter().enumerate() {
                        inv[pc] = c;
                    }
                    inv
                };
                let permute_inv = |x: &[f64]| -> Vec<f64> {
                    let mut y = vec![0.0; x.len()];
                    for (k, ix) in basis.indices() {
                        let mut jx = vec![0u8; 5];
                        for (c, &pc) in inv_perm.iter().enumerate() {
                            jx[pc] = ix[c];
                        }
                        y[basis.flat(&jx).unwrap()] = x[k];
                    }
                    y
                };
                let conjugated = permute_inv(&q.apply(&permute(&x)));
                for (a, b) in direct.iter().zip(&conjugated) {
                    assert_abs_diff_eq!(a, b, epsilon = 1e-12);
                }
            }
        }
    }
}
