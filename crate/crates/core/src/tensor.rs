//! Tensor Hermite basis over `ncoord` coordinates, truncated at a global
//! total degree. Multi-indices are enumerated in lexicographic order, which
//! fixes a bijective, order-stable flat indexing.

use crate::error::{Error, Result};
use std::collections::HashMap;
use std::sync::Arc;

/// Per-coordinate degrees of one basis element.
pub type TensorIndex = Box<[u8]>;

/// Enumerated multi-index set `{ (n_1..n_ncoord) : sum n_k <= cutoff }`.
#[derive(Debug)]
pub struct TensorBasis {
    ncoord: usize,
    cutoff: usize,
    indices: Vec<TensorIndex>,
    flat: HashMap<TensorIndex, usize>,
}

/// Hard cap on basis sizes; dense spectral work beyond this is out of reach
/// and belongs to the jump-process simulator.
pub const MAX_BASIS_DIM: usize = 200_000;

impl TensorBasis {
    pub fn new(ncoord: usize, cutoff: usize) -> Result<Arc<Self>> {
        if ncoord == 0 {
            return Err(Error::InvalidParameter("ncoord must be >= 1".into()));
        }
        let dim = basis_dim(ncoord, cutoff);
        if dim > MAX_BASIS_DIM {
            return Err(Error::BasisTooLarge {
                ncoord,
                cutoff,
                dim,
                limit: MAX_BASIS_DIM,
            });
        }
        let mut indices = Vec::with_capacity(dim);
        let mut cur = vec![0u8; ncoord];
        enumerate(&mut indices, &mut cur, 0, cutoff);
        indices.sort();
        let flat = indices
            .iter()
            .enumerate()
            .map(|(k, ix)| (ix.clone(), k))
            .collect();
        Ok(Arc::new(TensorBasis {
            ncoord,
            cutoff,
            indices,
            flat,
        }))
    }

    pub fn ncoord(&self) -> usize {
        self.ncoord
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn index(&self, flat: usize) -> &[u8] {
        &self.indices[flat]
    }

    pub fn indices(&self) -> impl Iterator<Item = (usize, &[u8])> {
        self.indices.iter().enumerate().map(|(k, ix)| (k, &ix[..]))
    }

    /// Flat position of a multi-index, if it is inside the truncation.
    pub fn flat(&self, index: &[u8]) -> Option<usize> {
        self.flat.get(index).copied()
    }

    pub fn total_degree(&self, flat: usize) -> usize {
        self.indices[flat].iter().map(|&d| d as usize).sum()
    }

    /// True when two bases index the same space.
    pub fn same_shape(&self, other: &TensorBasis) -> bool {
        self.ncoord == other.ncoord && self.cutoff == other.cutoff
    }
}

fn enumerate(out: &mut Vec<TensorIndex>, cur: &mut Vec<u8>, coord: usize, left: usize) {
    if coord == cur.len() {
        out.push(cur.clone().into_boxed_slice());
        return;
    }
    for d in 0..=left {
        cur[coord] = d as u8;
        enumerate(out, cur, coord + 1, left - d);
    }
    cur[coord] = 0;
}

/// Number of multi-indices with `ncoord` coordinates and total degree
/// `<= cutoff`, i.e. `binom(cutoff + ncoord, ncoord)`.
pub fn basis_dim(ncoord: usize, cutoff: usize) -> usize {
    binomial(cutoff + ncoord, ncoord)
}

/// Number of compositions of `total` into `parts` nonnegative parts.
pub fn composition_count(total: usize, parts: usize) -> usize {
    if parts == 0 {
        return if total == 0 { 1 } else { 0 };
    }
    binomial(total + parts - 1, parts - 1)
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dim_matches_closed_form() {
        for (ncoord, cutoff) in [(1, 8), (3, 8), (6, 8), (7, 8), (2, 0)] {
            let b = TensorBasis::new(ncoord, cutoff).unwrap();
            assert_eq!(b.dim(), basis_dim(ncoord, cutoff));
        }
        // C(14, 6) = 3003
        assert_eq!(basis_dim(6, 8), 3003);
    }

    #[test]
    fn oversized_basis_rejected() {
        assert!(matches!(
            TensorBasis::new(12, 12),
            Err(Error::BasisTooLarge { .. })
        ));
    }

    proptest! {
        #[test]
        fn flat_round_trip(ncoord in 1usize..5, cutoff in 0usize..7, pick in 0usize..1000) {
            let b = TensorBasis::new(ncoord, cutoff).unwrap();
            let k = pick % b.dim();
            let ix = b.index(k).to_vec();
            prop_assert_eq!(b.flat(&ix), Some(k));
        }
    }

    #[test]
    fn enumeration_is_order_stable() {
        let a = TensorBasis::new(3, 5).unwrap();
        let b = TensorBasis::new(3, 5).unwrap();
        for k in 0..a.dim() {
            assert_eq!(a.index(k), b.index(k));
        }
    }
}
