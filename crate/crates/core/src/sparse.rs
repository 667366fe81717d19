//! Minimal CSR matrix, assembled from triplets. Enough for symmetric
//! generator matrices, matrix-vector products and text dumps.

use std::collections::HashMap;
use std::io::{self, Write};

#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    /// Build an `n x n` matrix from (row, col, value) triplets; duplicate
    /// entries are summed, exact zeros dropped.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut merged: HashMap<(usize, usize), f64> = HashMap::with_capacity(triplets.len());
        for &(r, c, v) in triplets {
            debug_assert!(r < n && c < n);
            *merged.entry((r, c)).or_insert(0.0) += v;
        }
        let mut entries: Vec<((usize, usize), f64)> =
            merged.into_iter().filter(|&(_, v)| v != 0.0).collect();
        entries.sort_by_key(|&((r, c), _)| (r, c));
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::with_capacity(entries.len());
        let mut data = Vec::with_capacity(entries.len());
        for ((r, c), v) in entries {
            indptr[r + 1] += 1;
            indices.push(c);
            data.push(v);
        }
        for r in 0..n {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix {
            n,
            indptr,
            indices,
            data,
        }
    }

    pub fn zeros(n: usize) -> Self {
        CsrMatrix {
            n,
            indptr: vec![0; n + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.n {
            let mut acc = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.data[k] * x[self.indices[k]];
            }
            y[r] = acc;
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |r| {
            (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], self.data[k]))
        })
    }

    /// Linear combination `sum coeff_i * m_i` of same-size matrices.
    pub fn linear_combination(terms: &[(f64, &CsrMatrix)]) -> Self {
        assert!(!terms.is_empty());
        let n = terms[0].1.n;
        let mut triplets = Vec::new();
        for &(coeff, m) in terms {
            assert_eq!(m.n, n);
            if coeff == 0.0 {
                continue;
            }
            triplets.extend(m.triplets().map(|(r, c, v)| (r, c, coeff * v)));
        }
        if triplets.is_empty() {
            return CsrMatrix::zeros(n);
        }
        CsrMatrix::from_triplets(n, &triplets)
    }

    /// `max_{r,c} |A[r,c] - A[c,r]|`.
    pub fn asymmetry(&self) -> f64 {
        let mut map: HashMap<(usize, usize), f64> = HashMap::with_capacity(self.nnz());
        for (r, c, v) in self.triplets() {
            map.insert((r, c), v);
        }
        let mut worst = 0.0f64;
        for (&(r, c), &v) in &map {
            let vt = map.get(&(c, r)).copied().unwrap_or(0.0);
            worst = worst.max((v - vt).abs());
        }
        worst
    }

    /// Largest eigenvalue of a symmetric matrix by shifted power iteration.
    /// The spectrum is assumed to lie in `[-shift, shift]`.
    pub fn largest_eigenvalue_symmetric(&self, shift: f64, tol: f64, max_iter: usize) -> f64 {
        let n = self.n;
        let mut x: Vec<f64> = (0..n)
            .map(|k| 1.0 + (k as f64 * 0.7368).sin())
            .collect();
        normalize(&mut x);
        let mut lambda = 0.0;
        let mut y = vec![0.0; n];
        for _ in 0..max_iter {
            // (A + shift I) x keeps the top of the spectrum dominant
            self.matvec_into(&x, &mut y);
            for k in 0..n {
                y[k] += shift * x[k];
            }
            let norm = normalize(&mut y);
            let next = norm - shift;
            std::mem::swap(&mut x, &mut y);
            if (next - lambda).abs() <= tol {
                return next;
            }
            lambda = next;
        }
        lambda
    }

    /// Text dump, one `row col value` per line.
    pub fn dump_triplets(&self, mut out: impl Write) -> io::Result<()> {
        for (r, c, v) in self.triplets() {
            writeln!(out, "{} {} {}", r, c, v)?;
        }
        Ok(())
    }

    /// Parse the `dump_triplets` format back.
    pub fn parse_triplets(n: usize, text: &str) -> Option<Self> {
        let mut triplets = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let r: usize = it.next()?.parse().ok()?;
            let c: usize = it.next()?.parse().ok()?;
            let v: f64 = it.next()?.parse().ok()?;
            triplets.push((r, c, v));
        }
        Some(CsrMatrix::from_triplets(n, &triplets))
    }
}

fn normalize(x: &mut [f64]) -> f64 {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in x.iter_mut() {
            *v /= norm;
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn triplet_assembly_merges_duplicates() {
        let m = CsrMatrix::from_triplets(3, &[(0, 1, 2.0), (0, 1, 3.0), (2, 2, 1.0)]);
        assert_eq!(m.nnz(), 2);
        let y = m.matvec(&[0.0, 1.0, 4.0]);
        assert_eq!(y, vec![5.0, 0.0, 4.0]);
    }

    #[test]
    fn dump_round_trips_through_parser() {
        let m = CsrMatrix::from_triplets(4, &[(0, 3, 0.25), (1, 1, -2.0), (3, 0, 1e-3)]);
        let mut buf = Vec::new();
        m.dump_triplets(&mut buf).unwrap();
        let parsed = CsrMatrix::parse_triplets(4, std::str::from_utf8(&buf).unwrap()).unwrap();
        let x = [0.3, -1.0, 2.0, 0.7];
        for (a, b) in m.matvec(&x).iter().zip(parsed.matvec(&x)) {
            assert_abs_diff_eq!(a, &b, epsilon = 0.0);
        }
    }

    #[test]
    fn power_iteration_finds_top_eigenvalue() {
        // diag(3, 1, -2)
        let m = CsrMatrix::from_triplets(3, &[(0, 0, 3.0), (1, 1, 1.0), (2, 2, -2.0)]);
        let top = m.largest_eigenvalue_symmetric(3.0, 1e-13, 10_000);
        assert_abs_diff_eq!(top, 3.0, epsilon = 1e-10);
    }
}
