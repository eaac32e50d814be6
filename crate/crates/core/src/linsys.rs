//! Thin wrapper over faer's sparse factorizations.
//!
//! Matrices are stored as the lower triangle (diagonal included) in CSC form.
//! The pattern is built once from `(row, col)` pairs and can be reused with new
//! values, which lets the FEM loop keep its symbolic factorization.

use std::sync::OnceLock;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu, SymbolicLlt, SymbolicLu};
use faer::sparse::{SparseColMat, SparseColMatRef, SymbolicSparseColMatRef, Triplet};
use faer::{Mat, Side};

#[derive(Debug, thiserror::Error)]
pub(crate) enum LinsysError {
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("matrix is singular")]
    Singular,
    #[error("factorization failed: {0}")]
    Other(String),
}

/// Lower-triangular CSC sparsity pattern.
#[derive(Debug)]
pub(crate) struct LowerPattern {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    symbolic: OnceLock<SymbolicLlt<usize>>,
}

impl LowerPattern {
    /// Builds the pattern from arbitrary `(row, col)` pairs; pairs above the
    /// diagonal are mirrored and duplicates merged. Every diagonal entry is
    /// included.
    pub(crate) fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut entries: Vec<(usize, usize)> = pairs
            .into_iter()
            .map(|(r, c)| if r >= c { (c, r) } else { (r, c) })
            .chain((0..n).map(|i| (i, i)))
            .collect();
        entries.sort_unstable();
        entries.dedup();
        let mut col_ptr = vec![0usize; n + 1];
        for &(c, _) in &entries {
            col_ptr[c + 1] += 1;
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        let row_idx = entries.into_iter().map(|(_, r)| r).collect();
        Self {
            n,
            col_ptr,
            row_idx,
            symbolic: OnceLock::new(),
        }
    }

    pub(crate) fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Position of entry `(row, col)` (either triangle) in the value array.
    pub(crate) fn slot(&self, row: usize, col: usize) -> Option<usize> {
        let (r, c) = if row >= col { (row, col) } else { (col, row) };
        let range = self.col_ptr[c]..self.col_ptr[c + 1];
        self.row_idx[range.clone()]
            .binary_search(&r)
            .ok()
            .map(|k| range.start + k)
    }

    fn symbolic_ref(&self) -> SymbolicSparseColMatRef<'_, usize> {
        SymbolicSparseColMatRef::new_checked(self.n, self.n, &self.col_ptr, None, &self.row_idx)
    }

    /// `y = A x` for the symmetric matrix whose lower triangle is `values`.
    pub(crate) fn sym_matvec(&self, values: &[f64], x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for c in 0..self.n {
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                let r = self.row_idx[k];
                let v = values[k];
                y[r] += v * x[c];
                if r != c {
                    y[c] += v * x[r];
                }
            }
        }
        y
    }

    fn full_matrix(&self, values: &[f64]) -> Result<SparseColMat<usize, f64>, LinsysError> {
        let mut triplets = Vec::with_capacity(2 * values.len());
        for c in 0..self.n {
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                let r = self.row_idx[k];
                triplets.push(Triplet::new(r, c, values[k]));
                if r != c {
                    triplets.push(Triplet::new(c, r, values[k]));
                }
            }
        }
        SparseColMat::try_new_from_triplets(self.n, self.n, &triplets)
            .map_err(|e| LinsysError::Other(format!("{e:?}")))
    }
}

enum Factor {
    Llt(Llt<usize, f64>),
    Lu(Lu<usize, f64>),
}

/// A factorized symmetric system.
pub(crate) struct Factorization<'a> {
    pattern: &'a LowerPattern,
    values: &'a [f64],
    factor: Factor,
}

impl<'a> Factorization<'a> {
    /// Sparse Cholesky. Fails with `NotPositiveDefinite` when a pivot breaks down.
    pub(crate) fn cholesky(pattern: &'a LowerPattern, values: &'a [f64]) -> Result<Self, LinsysError> {
        assert_eq!(values.len(), pattern.nnz());
        let symbolic = match pattern.symbolic.get() {
            Some(s) => s.clone(),
            None => {
                let s = SymbolicLlt::try_new(pattern.symbolic_ref(), Side::Lower)
                    .map_err(|e| LinsysError::Other(format!("{e:?}")))?;
                let _ = pattern.symbolic.set(s.clone());
                s
            }
        };
        let mat = SparseColMatRef::new(pattern.symbolic_ref(), values);
        let llt = Llt::try_new_with_symbolic(symbolic, mat, Side::Lower)
            .map_err(|_| LinsysError::NotPositiveDefinite)?;
        Ok(Self {
            pattern,
            values,
            factor: Factor::Llt(llt),
        })
    }

    /// Sparse LU on the symmetrized matrix, for systems that are not SPD.
    pub(crate) fn lu(pattern: &'a LowerPattern, values: &'a [f64]) -> Result<Self, LinsysError> {
        let full = pattern.full_matrix(values)?;
        let symbolic = SymbolicLu::try_new(full.symbolic()).map_err(|e| LinsysError::Other(format!("{e:?}")))?;
        let lu = Lu::try_new_with_symbolic(symbolic, full.as_ref()).map_err(|_| LinsysError::Singular)?;
        Ok(Self {
            pattern,
            values,
            factor: Factor::Lu(lu),
        })
    }

    /// Cholesky first, LU if the matrix turns out indefinite.
    pub(crate) fn cholesky_or_lu(pattern: &'a LowerPattern, values: &'a [f64]) -> Result<Self, LinsysError> {
        match Self::cholesky(pattern, values) {
            Err(LinsysError::NotPositiveDefinite) => {
                log::debug!("cholesky failed, falling back to LU");
                Self::lu(pattern, values)
            }
            other => other,
        }
    }

    fn raw_solve(&self, b: &[f64]) -> Vec<f64> {
        let mut rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        match &self.factor {
            Factor::Llt(f) => f.solve_in_place(rhs.as_mut()),
            Factor::Lu(f) => f.solve_in_place(rhs.as_mut()),
        }
        (0..b.len()).map(|i| rhs[(i, 0)]).collect()
    }

    /// Solves `A x = b` with a few rounds of iterative refinement. Returns the
    /// solution and its relative residual `|b - A x| / |b|` (0 for `b = 0`).
    pub(crate) fn solve(&self, b: &[f64]) -> (Vec<f64>, f64) {
        let bnorm = norm(b);
        if bnorm == 0.0 {
            return (vec![0.0; b.len()], 0.0);
        }
        let mut x = self.raw_solve(b);
        let mut res = self.residual(b, &x);
        let mut rel = norm(&res) / bnorm;
        for _ in 0..3 {
            if rel <= 1e-14 || !rel.is_finite() {
                break;
            }
            let dx = self.raw_solve(&res);
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + d).collect();
            let trial_res = self.residual(b, &trial);
            let trial_rel = norm(&trial_res) / bnorm;
            if trial_rel >= rel {
                break;
            }
            x = trial;
            res = trial_res;
            rel = trial_rel;
        }
        (x, rel)
    }

    fn residual(&self, b: &[f64], x: &[f64]) -> Vec<f64> {
        let ax = self.pattern.sym_matvec(self.values, x);
        b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Assembles a symmetric matrix from triplets (either triangle, duplicates
/// summed). Entries above the diagonal are ignored so callers can pass the
/// full symmetric list or the lower half.
pub(crate) fn assemble_lower(n: usize, triplets: &[(usize, usize, f64)]) -> (LowerPattern, Vec<f64>) {
    let pattern = LowerPattern::from_pairs(
        n,
        triplets.iter().filter(|t| t.0 >= t.1).map(|&(r, c, _)| (r, c)),
    );
    let mut values = vec![0.0; pattern.nnz()];
    for &(r, c, v) in triplets.iter().filter(|t| t.0 >= t.1) {
        values[pattern.slot(r, c).expect("entry in pattern")] += v;
    }
    (pattern, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i + 1, i, -1.0));
                t.push((i, i + 1, -1.0));
            }
        }
        t
    }

    #[test]
    fn cholesky_solves_tridiagonal() {
        let n = 50;
        let (p, v) = assemble_lower(n, &laplacian_1d(n));
        let f = Factorization::cholesky(&p, &v).unwrap();
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = p.sym_matvec(&v, &xs);
        let (x, rel) = f.solve(&b);
        assert!(rel < 1e-12);
        for (a, e) in x.iter().zip(&xs) {
            assert!((a - e).abs() < 1e-10);
        }
        // second factorization reuses the cached symbolic structure
        let v2: Vec<f64> = v.iter().map(|a| 2.0 * a).collect();
        let f2 = Factorization::cholesky(&p, &v2).unwrap();
        let (x2, _) = f2.solve(&b);
        assert!((x2[3] - 0.5 * xs[3]).abs() < 1e-10);
    }

    #[test]
    fn indefinite_falls_back_to_lu() {
        let t = vec![(0, 0, 1.0), (1, 1, -2.0), (1, 0, 0.5)];
        let (p, v) = assemble_lower(2, &t);
        assert!(matches!(
            Factorization::cholesky(&p, &v),
            Err(LinsysError::NotPositiveDefinite)
        ));
        let f = Factorization::cholesky_or_lu(&p, &v).unwrap();
        let (x, rel) = f.solve(&[1.0, 0.0]);
        assert!(rel < 1e-14);
        // [[1, .5], [.5, -2]] x = [1, 0]
        assert!((x[0] + 0.5 * x[1] - 1.0).abs() < 1e-14);
        assert!((0.5 * x[0] - 2.0 * x[1]).abs() < 1e-14);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let (p, v) = assemble_lower(3, &laplacian_1d(3));
        let f = Factorization::cholesky(&p, &v).unwrap();
        let (x, rel) = f.solve(&[0.0; 3]);
        assert_eq!(x, vec![0.0; 3]);
        assert_eq!(rel, 0.0);
    }
}
