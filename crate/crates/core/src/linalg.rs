//! Sparse and dense linear-algebra support: CSR storage, conjugate
//! gradients, a banded Cholesky factorization, and symmetric generalized
//! eigenvalues via Cholesky reduction.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Compressed sparse row matrix (square).
#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    /// Builds from (row, col, value) triplets, summing duplicates. Stable
    /// sorting keeps the accumulation order deterministic.
    pub fn from_triplets(n: usize, triplets: &mut Vec<(usize, usize, f64)>) -> Csr {
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_counts = vec![0usize; n];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut prev: Option<(usize, usize)> = None;
        for &(i, j, v) in triplets.iter() {
            debug_assert!(i < n && j < n);
            if prev == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                values.push(v);
                row_counts[i] += 1;
                prev = Some((i, j));
            }
        }
        let mut indptr = vec![0usize; n + 1];
        for i in 0..n {
            indptr[i + 1] = indptr[i] + row_counts[i];
        }
        Csr {
            n,
            indptr,
            indices,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn matvec(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.indptr[i]..self.indptr[i + 1] {
                s += self.values[k] * x[self.indices[k]];
            }
            y[i] = s;
        }
    }

    pub fn diagonal(&self) -> DVector<f64> {
        let mut d = DVector::zeros(self.n);
        for (i, j, v) in self.iter() {
            if i == j {
                d[i] += v;
            }
        }
        d
    }

    /// Iterates stored entries as (row, col, value).
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            (self.indptr[i]..self.indptr[i + 1]).map(move |k| (i, self.indices[k], self.values[k]))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        for k in self.indptr[i]..self.indptr[i + 1] {
            if self.indices[k] == j {
                return self.values[k];
            }
        }
        0.0
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, j, v) in self.iter() {
            m[(i, j)] += v;
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    /// max |M - M^T| over all entries.
    pub fn symmetry_defect(&self) -> f64 {
        let mut defect = 0.0_f64;
        for (i, j, v) in self.iter() {
            defect = defect.max((v - self.get(j, i)).abs());
        }
        defect
    }

    pub fn bandwidth(&self) -> usize {
        let mut bw = 0usize;
        for (i, j, _) in self.iter() {
            bw = bw.max(i.abs_diff(j));
        }
        bw
    }
}

/// Diagonally preconditioned conjugate gradients for SPD systems.
///
/// Returns the solution and the iteration count. Fails with
/// `NotPositiveDefinite` when a nonpositive curvature direction shows up and
/// with `NoConvergence` after `max_iter` iterations.
pub fn cg_solve(
    a: &Csr,
    b: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(DVector<f64>, usize)> {
    let n = a.n;
    let norm_b = b.norm();
    if norm_b == 0.0 {
        return Ok((DVector::zeros(n), 0));
    }
    let diag = a.diagonal();
    let mut precond = DVector::zeros(n);
    for i in 0..n {
        if diag[i] <= 0.0 {
            return Err(Error::NotPositiveDefinite);
        }
        precond[i] = 1.0 / diag[i];
    }
    let mut x = DVector::zeros(n);
    let mut r = b.clone();
    let mut z = r.component_mul(&precond);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    let mut ap = DVector::zeros(n);
    for it in 0..max_iter {
        a.matvec(&p, &mut ap);
        let pap = p.dot(&ap);
        if pap <= 0.0 {
            return Err(Error::NotPositiveDefinite);
        }
        let alpha = rz / pap;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        if r.norm() <= tol * norm_b {
            return Ok((x, it + 1));
        }
        z = r.component_mul(&precond);
        let rz_new = r.dot(&z);
        let beta = rz_new / rz;
        rz = rz_new;
        p = &z + beta * &p;
    }
    Err(Error::NoConvergence(max_iter))
}

/// Cholesky factorization in banded storage; row i holds L[i, i-bw ..= i].
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedCholesky {
    /// Factors an SPD CSR matrix. Fails with `NotPositiveDefinite` on a
    /// nonpositive pivot and refuses absurdly wide bands.
    pub fn factor(a: &Csr) -> Result<BandedCholesky> {
        let n = a.n;
        let bw = a.bandwidth();
        let stride = bw + 1;
        if n.saturating_mul(stride) > 150_000_000 {
            return Err(Error::InvalidParam(format!(
                "band storage too large ({n} rows, bandwidth {bw}); use the cg solver"
            )));
        }
        let mut band = vec![0.0f64; n * stride];
        let at = |i: usize, j: usize| i * stride + (j + bw - i);
        for (i, j, v) in a.iter() {
            if j <= i {
                band[at(i, j)] += v;
            }
        }
        for i in 0..n {
            let lo_i = i.saturating_sub(bw);
            for j in lo_i..=i {
                let lo = lo_i.max(j.saturating_sub(bw));
                let mut s = band[at(i, j)];
                for k in lo..j {
                    s -= band[at(i, k)] * band[at(j, k)];
                }
                if j == i {
                    if s <= 0.0 {
                        return Err(Error::NotPositiveDefinite);
                    }
                    band[at(i, i)] = s.sqrt();
                } else {
                    band[at(i, j)] = s / band[at(j, j)];
                }
            }
        }
        Ok(BandedCholesky {
            n,
            bw,
            data: band,
        })
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let (n, bw) = (self.n, self.bw);
        let stride = bw + 1;
        let at = |i: usize, j: usize| i * stride + (j + bw - i);
        let mut y = b.clone();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut s = y[i];
            for k in lo..i {
                s -= self.data[at(i, k)] * y[k];
            }
            y[i] = s / self.data[at(i, i)];
        }
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let mut s = y[i];
            for k in i + 1..=hi {
                s -= self.data[at(k, i)] * y[k];
            }
            y[i] = s / self.data[at(i, i)];
        }
        y
    }
}

/// Dense SPD solve; fails with `NotPositiveDefinite` when the Cholesky
/// factorization breaks down.
pub fn dense_cholesky_solve(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = Cholesky::new(a).ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.solve(b))
}

/// Eigenvalues of the symmetric pencil (A, B) with B positive definite,
/// sorted ascending. Reduces to a standard problem via B = L L^T.
pub fn generalized_symmetric_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<f64>> {
    let a_sym = 0.5 * (a + a.transpose());
    let b_sym = 0.5 * (b + b.transpose());
    let chol = Cholesky::new(b_sym).ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l();
    let inv_l_a = l
        .solve_lower_triangular(&a_sym)
        .ok_or(Error::NotPositiveDefinite)?;
    let c = l
        .solve_lower_triangular(&inv_l_a.transpose())
        .ok_or(Error::NotPositiveDefinite)?;
    let c_sym = 0.5 * (&c + c.transpose());
    let mut eigs: Vec<f64> = SymmetricEigen::new(c_sym).eigenvalues.iter().copied().collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(eigs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> Csr {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        Csr::from_triplets(n, &mut t)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let mut t = vec![(0, 0, 1.0), (1, 1, 2.0), (0, 0, 3.0), (1, 0, -1.0)];
        let m = Csr::from_triplets(2, &mut t);
        assert_eq!(m.get(0, 0), 4.0);
        assert_eq!(m.get(1, 1), 2.0);
        assert_eq!(m.get(1, 0), -1.0);
        assert_eq!(m.nnz(), 3);
    }

    #[test]
    fn cg_and_banded_agree_on_laplacian() {
        let a = laplace_1d(50);
        let b = DVector::from_fn(50, |i, _| (i as f64 * 0.37).sin());
        let (x_cg, iters) = cg_solve(&a, &b, 1e-13, 5000).unwrap();
        assert!(iters > 0);
        let x_direct = BandedCholesky::factor(&a).unwrap().solve(&b);
        assert!((x_cg - &x_direct).amax() < 1e-9);
        let mut r = DVector::zeros(50);
        a.matvec(&x_direct, &mut r);
        assert!((r - b).norm() < 1e-10);
    }

    #[test]
    fn zero_rhs_gives_zero_solution() {
        let a = laplace_1d(10);
        let (x, iters) = cg_solve(&a, &DVector::zeros(10), 1e-12, 100).unwrap();
        assert_eq!(iters, 0);
        assert_eq!(x.norm(), 0.0);
    }

    #[test]
    fn indefinite_matrix_is_reported() {
        let mut t = vec![(0, 0, 1.0), (1, 1, -2.0)];
        let a = Csr::from_triplets(2, &mut t);
        let b = DVector::from_vec(vec![1.0, 1.0]);
        assert!(matches!(
            BandedCholesky::factor(&a),
            Err(Error::NotPositiveDefinite)
        ));
        assert!(matches!(
            cg_solve(&a, &b, 1e-12, 100),
            Err(Error::NotPositiveDefinite)
        ));
    }

    #[test]
    fn generalized_eigenvalues_of_diagonal_pencil() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 6.0, 12.0]));
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let eigs = generalized_symmetric_eigenvalues(&a, &b).unwrap();
        assert!((eigs[0] - 2.0).abs() < 1e-12);
        assert!((eigs[1] - 3.0).abs() < 1e-12);
        assert!((eigs[2] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn symmetry_defect_detects_asymmetry() {
        let mut t = vec![(0, 1, 1.0), (1, 0, 1.5)];
        let m = Csr::from_triplets(2, &mut t);
        assert!((m.symmetry_defect() - 0.5).abs() < 1e-15);
    }
}
