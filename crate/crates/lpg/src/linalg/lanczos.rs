//! Thick-restart Lanczos with full reorthogonalization for symmetric
//! operators, returning the top-k eigenpairs by modulus.
//!
//! The projected matrix is kept dense and re-solved at every restart, so
//! coefficients lost to floating-point orthogonality drift are recaptured
//! by the two-pass reorthogonalization. The iteration is deterministic for
//! a fixed seed: basis updates are serial and the operator apply writes
//! disjoint rows.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{explicit_residuals, modulus_order, LinalgError, SolveMethod, SpectralDecomposition};
use crate::lapack;

/// Symmetric operator interface for iterative solvers. Implementations must
/// be pure: the same input always produces the same output.
pub trait MatVec: Sync {
    fn dim(&self) -> usize;
    fn matvec(&self, x: &[f64], y: &mut [f64]);
}

/// Dense symmetric matrix operator with row-parallel apply.
pub struct DenseSym {
    a: Array2<f64>,
}

impl DenseSym {
    pub fn new(a: Array2<f64>) -> Self {
        assert_eq!(a.nrows(), a.ncols());
        Self { a }
    }

    pub fn view(&self) -> ndarray::ArrayView2<'_, f64> {
        self.a.view()
    }
}

impl MatVec for DenseSym {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dim();
        let a = self.a.as_slice().expect("contiguous");
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let row = &a[i * n..(i + 1) * n];
            let mut acc = 0.0;
            for j in 0..n {
                acc += row[j] * x[j];
            }
            *yi = acc;
        });
    }
}

/// Binary CSR matrix (all stored entries equal one), the natural form for
/// adjacency matrices.
pub struct CsrMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
}

impl CsrMatrix {
    pub fn new(n: usize, indptr: Vec<usize>, indices: Vec<u32>) -> Self {
        assert_eq!(indptr.len(), n + 1);
        Self { n, indptr, indices }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }
}

impl MatVec for CsrMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let mut acc = 0.0;
            for &j in &self.indices[self.indptr[i]..self.indptr[i + 1]] {
                acc += x[j as usize];
            }
            *yi = acc;
        });
    }
}

struct Basis {
    data: Vec<f64>, // vector i occupies data[i*n..(i+1)*n]
    n: usize,
    len: usize,
}

impl Basis {
    fn new(n: usize, cap: usize) -> Self {
        Self {
            data: vec![0.0; n * cap],
            n,
            len: 0,
        }
    }

    fn vec(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    fn push(&mut self, v: &[f64]) {
        let off = self.len * self.n;
        self.data[off..off + self.n].copy_from_slice(v);
        self.len += 1;
    }

    /// Two-pass classical Gram-Schmidt of `w` against all basis vectors;
    /// returns the combined projection coefficients.
    fn reorthogonalize(&self, w: &mut [f64]) -> Vec<f64> {
        let mut h = vec![0.0; self.len];
        for _pass in 0..2 {
            for i in 0..self.len {
                let vi = self.vec(i);
                let p = super::dot(vi, w);
                h[i] += p;
                for (wj, vj) in w.iter_mut().zip(vi) {
                    *wj -= p * vj;
                }
            }
        }
        h
    }

    /// Replace the basis with linear combinations `self * s_cols` followed by
    /// the extra vector.
    fn compress(&mut self, s: &[f64], m: usize, cols: &[usize], extra: &[f64]) {
        let n = self.n;
        let mut fresh = vec![0.0f64; (cols.len() + 1) * n];
        for (new_idx, &c) in cols.iter().enumerate() {
            let out = &mut fresh[new_idx * n..(new_idx + 1) * n];
            for i in 0..m {
                let coef = s[i * m + c];
                if coef != 0.0 {
                    let vi = &self.data[i * n..(i + 1) * n];
                    for (o, v) in out.iter_mut().zip(vi) {
                        *o += coef * v;
                    }
                }
            }
        }
        fresh[cols.len() * n..(cols.len() + 1) * n].copy_from_slice(extra);
        self.len = cols.len() + 1;
        self.data[..fresh.len()].copy_from_slice(&fresh);
    }
}

/// Top-k eigenpairs by modulus of a symmetric operator.
///
/// Runs Lanczos with full reorthogonalization and thick restarts until each
/// of the k largest-modulus Ritz pairs has an estimated residual below
/// `tol * scale`, where `scale` tracks the largest Ritz modulus seen.
/// Returned residuals are recomputed explicitly from the operator.
pub fn eig_topk_lanczos(
    op: &dyn MatVec,
    k: usize,
    tol: f64,
    seed: u64,
) -> Result<SpectralDecomposition, LinalgError> {
    let n = op.dim();
    let max_k = (n / 4).max(1);
    if k == 0 || k > max_k {
        return Err(LinalgError::BadK { k, n, max: max_k });
    }
    let m_max = (2 * k + 50).clamp(k + 10, n);
    let max_restarts = 300usize;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut basis = Basis::new(n, m_max);
    let mut start: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    normalize(&mut start);
    basis.push(&start);

    // Dense projected matrix, row-major, m_max x m_max.
    let mut h = vec![0.0f64; m_max * m_max];
    let mut scale = 0.0f64;
    let mut w = vec![0.0f64; n];
    let mut beta_last = 0.0f64;

    for _restart in 0..max_restarts {
        // Extend the basis to m_max vectors.
        while basis.len < m_max {
            let j = basis.len - 1;
            op.matvec(basis.vec(j), &mut w);
            let coeffs = basis.reorthogonalize(&mut w);
            for (i, &c) in coeffs.iter().enumerate() {
                h[i * m_max + j] = c;
                h[j * m_max + i] = c;
            }
            scale = scale.max(coeffs[j].abs());
            let beta = super::l2(&w);
            beta_last = beta;
            if beta <= 1e-12 * scale.max(1e-300) {
                // Invariant subspace: continue from a fresh random direction.
                let mut next: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
                basis.reorthogonalize(&mut next);
                let nn = super::l2(&next);
                if nn <= 1e-14 {
                    break; // space exhausted
                }
                super::scale(&mut next, 1.0 / nn);
                h[(j + 1) * m_max + j] = 0.0;
                h[j * m_max + (j + 1)] = 0.0;
                beta_last = 0.0;
                basis.push(&next);
            } else {
                super::scale(&mut w, 1.0 / beta);
                h[(j + 1) * m_max + j] = beta;
                h[j * m_max + (j + 1)] = beta;
                basis.push(&w);
            }
        }

        // One more apply on the last vector to close the projected matrix and
        // obtain the outgoing residual direction.
        let m = basis.len;
        {
            let j = m - 1;
            op.matvec(basis.vec(j), &mut w);
            let coeffs = basis.reorthogonalize(&mut w);
            for (i, &c) in coeffs.iter().enumerate() {
                h[i * m_max + j] = c;
                h[j * m_max + i] = c;
            }
            scale = scale.max(coeffs[j].abs());
            beta_last = super::l2(&w);
            if beta_last > 0.0 {
                super::scale(&mut w, 1.0 / beta_last);
            }
        }

        // Rayleigh-Ritz on the m x m projected matrix.
        let mut proj = vec![0.0f64; m * m];
        for i in 0..m {
            for j in 0..m {
                proj[i * m + j] = h[i * m_max + j];
            }
        }
        let theta = lapack::syevd(m, &mut proj).map_err(|info| LinalgError::Lapack {
            routine: "dsyevd",
            info,
        })?;
        // proj now holds projected eigenvector c contiguous at [c*m..(c+1)*m].
        for &t in &theta {
            scale = scale.max(t.abs());
        }
        let order = modulus_order(&theta);
        let resid_est = |c: usize| -> f64 { (beta_last * proj[c * m + (m - 1)]).abs() };

        let top: Vec<usize> = order.iter().copied().take(k).collect();
        let converged = top
            .iter()
            .filter(|&&c| resid_est(c) <= tol * scale.max(1e-300))
            .count();

        if converged == k || basis.len >= n {
            if converged < k {
                let worst = top.iter().map(|&c| resid_est(c)).fold(0.0f64, f64::max);
                return Err(LinalgError::NoConvergence {
                    converged,
                    k,
                    tol,
                    worst,
                });
            }
            // Assemble eigenvectors X = V * S_top.
            let mut vectors = Array2::<f64>::zeros((n, k));
            for (col, &c) in top.iter().enumerate() {
                for i in 0..m {
                    let coef = proj[c * m + i];
                    if coef != 0.0 {
                        let vi = basis.vec(i);
                        for row in 0..n {
                            vectors[[row, col]] += coef * vi[row];
                        }
                    }
                }
            }
            let eigenvalues: Vec<f64> = top.iter().map(|&c| theta[c]).collect();
            let residuals = operator_residuals(op, &eigenvalues, &vectors);
            return Ok(SpectralDecomposition {
                eigenvalues,
                vectors,
                residuals,
                method: SolveMethod::Lanczos,
            });
        }

        // Thick restart: keep the leading Ritz pairs by modulus plus a
        // cushion, then continue from the residual direction.
        let keep = (k + (k / 2).clamp(8, 20)).min(m.saturating_sub(10)).max(k.min(m - 1));
        let keep_cols: Vec<usize> = order.iter().copied().take(keep).collect();
        let kept_theta: Vec<f64> = keep_cols.iter().map(|&c| theta[c]).collect();
        let couplings: Vec<f64> = keep_cols
            .iter()
            .map(|&c| beta_last * proj[c * m + (m - 1)])
            .collect();
        if beta_last <= 1e-12 * scale.max(1e-300) {
            // Residual vanished with unconverged pairs left: restart fresh.
            let mut next: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            normalize(&mut next);
            basis.compress(&proj, m, &keep_cols, &next);
        } else {
            let extra = w.clone();
            basis.compress(&proj, m, &keep_cols, &extra);
        }
        h.iter_mut().for_each(|v| *v = 0.0);
        for (i, &t) in kept_theta.iter().enumerate() {
            h[i * m_max + i] = t;
        }
        for (i, &c) in couplings.iter().enumerate() {
            h[keep * m_max + i] = c;
            h[i * m_max + keep] = c;
        }
    }

    Err(LinalgError::NoConvergence {
        converged: 0,
        k,
        tol,
        worst: f64::INFINITY,
    })
}

fn normalize(v: &mut [f64]) {
    let n = super::l2(v);
    if n > 0.0 {
        super::scale(v, 1.0 / n);
    }
}

fn operator_residuals(op: &dyn MatVec, values: &[f64], vectors: &Array2<f64>) -> Vec<f64> {
    let n = vectors.nrows();
    let mut x = vec![0.0f64; n];
    let mut y = vec![0.0f64; n];
    values
        .iter()
        .enumerate()
        .map(|(j, &lj)| {
            for i in 0..n {
                x[i] = vectors[[i, j]];
            }
            op.matvec(&x, &mut y);
            let mut acc = 0.0;
            for i in 0..n {
                let d = y[i] - lj * x[i];
                acc += d * d;
            }
            acc.sqrt()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eig_dense;
    use approx::assert_abs_diff_eq;

    fn random_psd(n: usize, seed: u64) -> Array2<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = Array2::<f64>::zeros((n, n));
        for v in b.iter_mut() {
            *v = rng.random::<f64>() - 0.5;
        }
        let g = b.t().dot(&b);
        g
    }

    #[test]
    fn rank_one_matrix() {
        let n = 16;
        let s = Array2::from_elem((n, n), 0.5);
        let op = DenseSym::new(s);
        let d = eig_topk_lanczos(&op, 3, 1e-10, 7).unwrap();
        assert_abs_diff_eq!(d.eigenvalues[0], n as f64 / 2.0, epsilon = 1e-8);
        assert!(d.eigenvalues[1].abs() < 1e-8);
        assert!(d.eigenvalues[2].abs() < 1e-8);
    }

    #[test]
    fn matches_dense_on_psd() {
        let s = random_psd(300, 3);
        let dense = eig_dense(s.view()).unwrap();
        let op = DenseSym::new(s);
        let lan = eig_topk_lanczos(&op, 10, 1e-10, 11).unwrap();
        for j in 0..10 {
            let rel = (lan.eigenvalues[j] - dense.eigenvalues[j]).abs()
                / dense.eigenvalues[0].abs();
            assert!(rel < 1e-8, "pair {j}: rel error {rel}");
        }
        assert!(lan.orthonormality_defect() < 1e-9);
    }

    #[test]
    fn matches_dense_on_indefinite() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 200;
        let mut s = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let v = rng.random::<f64>() - 0.5;
                s[[i, j]] = v;
                s[[j, i]] = v;
            }
        }
        let dense = eig_dense(s.view()).unwrap();
        let op = DenseSym::new(s);
        let lan = eig_topk_lanczos(&op, 8, 1e-10, 2).unwrap();
        for j in 0..8 {
            let rel =
                (lan.eigenvalues[j] - dense.eigenvalues[j]).abs() / dense.eigenvalues[0].abs();
            assert!(rel < 1e-8, "pair {j}: rel error {rel}");
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let s = random_psd(120, 9);
        let op = DenseSym::new(s);
        let a = eig_topk_lanczos(&op, 5, 1e-10, 42).unwrap();
        let b = eig_topk_lanczos(&op, 5, 1e-10, 42).unwrap();
        assert_eq!(a.eigenvalues, b.eigenvalues);
        assert_eq!(
            a.vectors.as_slice().unwrap(),
            b.vectors.as_slice().unwrap()
        );
    }

    #[test]
    fn csr_matvec_matches_dense() {
        // 5-cycle adjacency
        let n = 5;
        let mut indptr = vec![0usize];
        let mut indices = Vec::new();
        for i in 0..n {
            let mut nb = vec![((i + 1) % n) as u32, ((i + n - 1) % n) as u32];
            nb.sort();
            indices.extend(nb);
            indptr.push(indices.len());
        }
        let csr = CsrMatrix::new(n, indptr, indices);
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let mut y = [0.0; 5];
        csr.matvec(&x, &mut y);
        assert_eq!(y, [7.0, 4.0, 6.0, 8.0, 5.0]);
    }

    #[test]
    fn rejects_bad_k() {
        let op = DenseSym::new(Array2::zeros((8, 8)));
        assert!(matches!(
            eig_topk_lanczos(&op, 5, 1e-8, 0),
            Err(LinalgError::BadK { .. })
        ));
    }
}
