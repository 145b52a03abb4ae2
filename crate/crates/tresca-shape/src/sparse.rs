//! Symmetric sparse matrices in CSR form and the preconditioned
//! conjugate-gradient solver used for every linear system in the crate.

use crate::error::{Error, Result};

/// Compressed sparse row matrix. All assembled matrices are symmetric;
/// both triangles are stored so matvec needs no transpose handling.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Triplet accumulator used during assembly. Duplicate entries are summed.
pub struct Triplets {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(n: usize) -> Self {
        Triplets { n, entries: Vec::new() }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n && j < self.n);
        self.entries.push((i, j, v));
    }

    pub fn into_csr(mut self) -> SparseMatrix {
        self.entries.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let n = self.n;
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in &self.entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix { n, row_ptr, col_idx, values }
    }
}

impl SparseMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// y = A x
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        self.mul_into(x, &mut y);
        y
    }

    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = s;
        }
    }

    /// Iterate over the stored (column, value) pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        for k in self.row_ptr[i]..self.row_ptr[i + 1] {
            if self.col_idx[k] == j {
                return self.values[k];
            }
        }
        0.0
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// x' A y
    pub fn quadratic(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            let mut row = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                row += self.values[k] * y[self.col_idx[k]];
            }
            s += x[i] * row;
        }
        s
    }

    /// Maximal asymmetry |a_ij - a_ji| over the stored pattern.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                worst = worst.max((self.values[k] - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Symmetric elimination of the given rows: zero row and column, unit
    /// diagonal. Keeps the matrix SPD so CG still applies. The caller must
    /// zero the matching entries of the right-hand side.
    pub fn eliminate_rows(&self, rows: &[usize]) -> SparseMatrix {
        let mut mask = vec![false; self.n];
        for &r in rows {
            mask[r] = true;
        }
        let mut out = self.clone();
        for i in 0..self.n {
            for k in out.row_ptr[i]..out.row_ptr[i + 1] {
                let j = out.col_idx[k];
                if mask[i] || mask[j] {
                    out.values[k] = if i == j { 1.0 } else { 0.0 };
                }
            }
        }
        out
    }

    /// Upper bound on the spectral norm via power iteration, with a 5%
    /// safety margin. Used to pick proximal-gradient step sizes.
    pub fn spectral_bound(&self) -> f64 {
        let n = self.n;
        let mut x: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.5 * ((i * 2654435761) % 97) as f64 / 97.0)
            .collect();
        let mut lambda = 0.0;
        for _ in 0..60 {
            let y = self.mul(&x);
            let ny = norm(&y);
            if ny == 0.0 {
                return 1.0;
            }
            lambda = ny / norm(&x).max(1e-300);
            x = y.iter().map(|v| v / ny).collect();
        }
        lambda * 1.05
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Solve A x = rhs for symmetric positive definite A by conjugate gradients
/// with diagonal (Jacobi) preconditioning.
///
/// Returns x with ||A x - rhs|| <= tol * ||rhs||, or a solver error carrying
/// the final residual.
pub fn solve_spd(a: &SparseMatrix, rhs: &[f64], tol: f64, maxit: usize) -> Result<Vec<f64>> {
    let n = a.dim();
    assert_eq!(rhs.len(), n);
    let rhs_norm = norm(rhs);
    if rhs_norm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut res = rhs_norm;

    for it in 0..maxit {
        if res <= tol * rhs_norm {
            return Ok(x);
        }
        let ap = a.mul(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Solver { residual: res, iterations: it });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        res = norm(&r);
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if res <= tol * rhs_norm {
        Ok(x)
    } else {
        Err(Error::Solver { residual: res, iterations: maxit })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_matrix(d: &[f64]) -> SparseMatrix {
        let mut t = Triplets::new(d.len());
        for (i, &v) in d.iter().enumerate() {
            t.push(i, i, v);
        }
        t.into_csr()
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let a = diag_matrix(&[1.0; 7]);
        let rhs = vec![3.0, -1.0, 0.5, 2.0, 0.0, 9.0, -4.0];
        let x = solve_spd(&a, &rhs, 1e-14, 100).unwrap();
        for (xi, ri) in x.iter().zip(&rhs) {
            assert!((xi - ri).abs() < 1e-12);
        }
    }

    #[test]
    fn small_diagonal_system() {
        let a = diag_matrix(&[2.0, 4.0]);
        let x = solve_spd(&a, &[2.0, 4.0], 1e-14, 50).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_triplets_are_summed() {
        let mut t = Triplets::new(2);
        t.push(0, 0, 1.0);
        t.push(0, 0, 2.0);
        t.push(0, 1, -1.0);
        t.push(1, 0, -1.0);
        t.push(1, 1, 5.0);
        let a = t.into_csr();
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(0, 1), -1.0);
        assert_eq!(a.nnz(), 4);
    }

    #[test]
    fn random_spd_vs_dense_oracle() {
        // 50x50 SPD built as B'B + n I, dense Cholesky as the oracle
        let n = 50;
        let mut state = 0x12345u64;
        let mut rng = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        let mut b = vec![vec![0.0f64; n]; n];
        for row in b.iter_mut() {
            for v in row.iter_mut() {
                *v = rng();
            }
        }
        let mut dense = vec![vec![0.0f64; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for (k, brow) in b.iter().enumerate() {
                    s += brow[i] * b[k][j];
                    let _ = k;
                }
                dense[i][j] = s + if i == j { n as f64 } else { 0.0 };
            }
        }
        let mut t = Triplets::new(n);
        for i in 0..n {
            for j in 0..n {
                t.push(i, j, dense[i][j]);
            }
        }
        let a = t.into_csr();
        let rhs: Vec<f64> = (0..n).map(|_| rng()).collect();

        let na = nalgebra::DMatrix::from_fn(n, n, |i, j| dense[i][j]);
        let nb = nalgebra::DVector::from_column_slice(&rhs);
        let oracle = na.cholesky().expect("spd").solve(&nb);

        let x = solve_spd(&a, &rhs, 1e-13, 10_000).unwrap();
        for i in 0..n {
            assert!((x[i] - oracle[i]).abs() < 1e-9, "component {i}");
        }
    }

    #[test]
    fn nonconvergence_reports_residual() {
        let mut t = Triplets::new(3);
        for i in 0..3 {
            t.push(i, i, 2.0);
        }
        t.push(0, 1, -1.0);
        t.push(1, 0, -1.0);
        t.push(1, 2, -1.0);
        t.push(2, 1, -1.0);
        let a = t.into_csr();
        let err = solve_spd(&a, &[1.0, 1.0, 1.0], 1e-30, 1).unwrap_err();
        match err {
            Error::Solver { residual, .. } => assert!(residual > 0.0),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn spectral_bound_dominates() {
        let a = diag_matrix(&[1.0, 3.0, 7.0]);
        let b = a.spectral_bound();
        assert!(b >= 7.0 && b < 9.0);
    }
}
