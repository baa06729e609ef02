//! Symmetric eigendecompositions, matrix norms, and subspace alignments.
//!
//! Eigenvalues are always reported in decreasing modulus, the ordering
//! convention used throughout the crate for both population and sample
//! spectra. Ties in modulus break by signed value descending, then by
//! position in the solver output, so results are deterministic.

mod lanczos;

pub use lanczos::{eig_topk_lanczos, CsrMatrix, DenseSym, MatVec};

use ndarray::{Array2, ArrayView2};
use thiserror::Error;

use crate::lapack;

pub const DENSE_MAX_N: usize = 4000;
const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not symmetric: |S[{i},{j}] - S[{j},{i}]| = {asym:.3e}")]
    NotSymmetric { i: usize, j: usize, asym: f64 },
    #[error("dense solver guard: n = {n} exceeds {max}")]
    TooLarge { n: usize, max: usize },
    #[error("LAPACK routine {routine} failed with info = {info}")]
    Lapack { routine: &'static str, info: i32 },
    #[error("requested k = {k} eigenpairs outside 1..={max} for n = {n}")]
    BadK { k: usize, n: usize, max: usize },
    #[error(
        "Lanczos did not converge: {converged} of {k} pairs at tol {tol:.1e}, worst residual {worst:.3e}"
    )]
    NoConvergence {
        converged: usize,
        k: usize,
        tol: f64,
        worst: f64,
    },
    #[error("power iteration did not certify within {max_iter} iterations (residual {worst:.3e})")]
    PowerNoConvergence { max_iter: usize, worst: f64 },
    #[error("column counts differ: {a} vs {b}")]
    ShapeMismatch { a: usize, b: usize },
    #[error("eigenvalue sign patterns disagree at position {pos}: {lhs:.3e} vs {rhs:.3e}")]
    SignMismatch { pos: usize, lhs: f64, rhs: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Dense,
    Lanczos,
}

/// Modulus-ordered eigenpairs of a symmetric matrix with per-pair residuals.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// Eigenvalues with |l_1| >= |l_2| >= ...
    pub eigenvalues: Vec<f64>,
    /// n x k matrix of corresponding orthonormal eigenvectors.
    pub vectors: Array2<f64>,
    /// ||S v_j - l_j v_j|| for each returned pair.
    pub residuals: Vec<f64>,
    pub method: SolveMethod,
}

impl SpectralDecomposition {
    pub fn n(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Max absolute entry of V^T V - I.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.vectors.t().dot(&self.vectors);
        let k = self.k();
        let mut worst = 0.0f64;
        for i in 0..k {
            for j in 0..k {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[[i, j]] - target).abs());
            }
        }
        worst
    }

    pub fn is_modulus_ordered(&self) -> bool {
        self.eigenvalues
            .windows(2)
            .all(|w| w[0].abs() >= w[1].abs() - 1e-12)
    }

    /// Moduli gaps |l_j| - |l_{j+1}| for j = 1..k-1.
    pub fn modulus_gaps(&self) -> Vec<f64> {
        self.eigenvalues
            .windows(2)
            .map(|w| w[0].abs() - w[1].abs())
            .collect()
    }
}

/// Sort eigenpair indices by decreasing modulus, ties by signed value
/// descending, then original index.
pub(crate) fn modulus_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        values[b]
            .abs()
            .partial_cmp(&values[a].abs())
            .unwrap()
            .then(values[b].partial_cmp(&values[a]).unwrap())
            .then(a.cmp(&b))
    });
    idx
}

fn check_symmetric(s: ArrayView2<'_, f64>) -> Result<(), LinalgError> {
    let n = s.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let asym = (s[[i, j]] - s[[j, i]]).abs();
            if asym > SYMMETRY_TOL {
                return Err(LinalgError::NotSymmetric { i, j, asym });
            }
        }
    }
    Ok(())
}

/// Full dense eigendecomposition, modulus-ordered. Guarded at n <= 4000;
/// larger problems go through `eig_topk_lanczos`.
pub fn eig_dense(s: ArrayView2<'_, f64>) -> Result<SpectralDecomposition, LinalgError> {
    let n = s.nrows();
    assert_eq!(n, s.ncols(), "square matrix required");
    if n > DENSE_MAX_N {
        return Err(LinalgError::TooLarge { n, max: DENSE_MAX_N });
    }
    check_symmetric(s)?;
    let mut buf: Vec<f64> = s.iter().copied().collect();
    let w = lapack::syevd(n, &mut buf).map_err(|info| LinalgError::Lapack {
        routine: "dsyevd",
        info,
    })?;
    // buf holds eigenvector j contiguous at [j*n..(j+1)*n].
    let order = modulus_order(&w);
    let eigenvalues: Vec<f64> = order.iter().map(|&j| w[j]).collect();
    let mut vectors = Array2::<f64>::zeros((n, eigenvalues.len()));
    for (col, &j) in order.iter().enumerate() {
        let src = &buf[j * n..(j + 1) * n];
        for i in 0..n {
            vectors[[i, col]] = src[i];
        }
    }
    let residuals = explicit_residuals(s, &eigenvalues, &vectors);
    Ok(SpectralDecomposition {
        eigenvalues,
        vectors,
        residuals,
        method: SolveMethod::Dense,
    })
}

pub(crate) fn explicit_residuals(
    s: ArrayView2<'_, f64>,
    values: &[f64],
    vectors: &Array2<f64>,
) -> Vec<f64> {
    let sv = s.dot(vectors);
    values
        .iter()
        .enumerate()
        .map(|(j, &lj)| {
            let mut acc = 0.0f64;
            for i in 0..vectors.nrows() {
                let d = sv[[i, j]] - lj * vectors[[i, j]];
                acc += d * d;
            }
            acc.sqrt()
        })
        .collect()
}

/// Norms of an n x r matrix used throughout: two-to-infinity (max row-wise
/// Euclidean norm), Frobenius, max absolute entry, and max absolute row sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixNorms {
    pub two_to_inf: f64,
    pub frobenius: f64,
    pub max_abs: f64,
    pub inf_row_sum: f64,
}

pub fn matrix_norms(m: ArrayView2<'_, f64>) -> MatrixNorms {
    let mut two_to_inf = 0.0f64;
    let mut fro = 0.0f64;
    let mut max_abs = 0.0f64;
    let mut inf_row = 0.0f64;
    for row in m.rows() {
        let mut sq = 0.0;
        let mut abs_sum = 0.0;
        for &v in row {
            sq += v * v;
            abs_sum += v.abs();
            max_abs = max_abs.max(v.abs());
        }
        two_to_inf = two_to_inf.max(sq.sqrt());
        inf_row = inf_row.max(abs_sum);
        fro += sq;
    }
    MatrixNorms {
        two_to_inf,
        frobenius: fro.sqrt(),
        max_abs,
        inf_row_sum: inf_row,
    }
}

pub fn two_to_inf(m: ArrayView2<'_, f64>) -> f64 {
    matrix_norms(m).two_to_inf
}

/// Spectral norm of a symmetric operator by power iteration on S^2,
/// certified by the residual ||S^2 x - theta^2 x|| <= tol * theta^2.
/// Squaring makes the iteration insensitive to a +/- pair at the edge.
pub fn spectral_norm(
    op: &dyn MatVec,
    tol: f64,
    seed: u64,
) -> Result<f64, LinalgError> {
    use rand::{Rng, SeedableRng};
    let n = op.dim();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let nx = l2(&x);
    if nx == 0.0 || n == 0 {
        return Ok(0.0);
    }
    scale(&mut x, 1.0 / nx);
    let mut y = vec![0.0f64; n];
    let mut z = vec![0.0f64; n];
    let max_iter = 10_000usize;
    let mut worst = f64::INFINITY;
    for _ in 0..max_iter {
        op.matvec(&x, &mut y);
        op.matvec(&y, &mut z); // z = S^2 x
        let theta2 = dot(&x, &z);
        let nz = l2(&z);
        if nz <= 1e-300 {
            return Ok(0.0); // x in the null space of S^2; ||S|| = 0 for our starts
        }
        let mut res = 0.0f64;
        for i in 0..n {
            let d = z[i] - theta2 * x[i];
            res += d * d;
        }
        res = res.sqrt();
        worst = res / theta2.max(1e-300);
        if theta2 > 0.0 && res <= tol * theta2 {
            return Ok(theta2.sqrt());
        }
        for i in 0..n {
            x[i] = z[i] / nz;
        }
    }
    Err(LinalgError::PowerNoConvergence { max_iter, worst })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn l2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn scale(a: &mut [f64], s: f64) {
    for v in a {
        *v *= s;
    }
}

/// Index partition of eigenpairs into the positive and negative eigenvalue
/// groups, positions taken in modulus order.
#[derive(Debug, Clone, Default)]
pub struct SignBlocks {
    pub positive: Vec<usize>,
    pub negative: Vec<usize>,
}

impl SignBlocks {
    pub fn from_eigenvalues(values: &[f64]) -> Self {
        let mut blocks = SignBlocks::default();
        for (idx, &v) in values.iter().enumerate() {
            if v >= 0.0 {
                blocks.positive.push(idx);
            } else {
                blocks.negative.push(idx);
            }
        }
        blocks
    }

    /// Diagonal of the sign matrix J with Lambda = |Lambda| J.
    pub fn sign_diagonal(&self, r: usize) -> Vec<f64> {
        let mut j = vec![1.0; r];
        for &idx in &self.negative {
            j[idx] = -1.0;
        }
        j
    }
}

/// An orthogonal alignment W with its sign-block structure and misfit.
#[derive(Debug, Clone)]
pub struct AlignmentResult {
    /// r x r orthogonal matrix minimizing ||Uhat - U W||_F (over the
    /// block-diagonal group when sign blocks are present).
    pub w: Array2<f64>,
    pub sign_blocks: SignBlocks,
    pub frobenius_misfit: f64,
}

impl AlignmentResult {
    pub fn orthogonality_defect(&self) -> f64 {
        let r = self.w.nrows();
        let g = self.w.t().dot(&self.w);
        let mut worst = 0.0f64;
        for i in 0..r {
            for j in 0..r {
                let t = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[[i, j]] - t).abs());
            }
        }
        worst
    }
}

/// Orthogonal matrix W minimizing ||Uhat - U W||_F: the polar factor of
/// U^T Uhat. Zero singular values are completed by pairing the trailing
/// singular directions, which is deterministic for a fixed input.
pub fn procrustes(
    u: ArrayView2<'_, f64>,
    u_hat: ArrayView2<'_, f64>,
) -> Result<AlignmentResult, LinalgError> {
    if u.ncols() != u_hat.ncols() {
        return Err(LinalgError::ShapeMismatch {
            a: u.ncols(),
            b: u_hat.ncols(),
        });
    }
    let r = u.ncols();
    if r == 0 {
        return Ok(AlignmentResult {
            w: Array2::zeros((0, 0)),
            sign_blocks: SignBlocks::default(),
            frobenius_misfit: 0.0,
        });
    }
    let m = u.t().dot(&u_hat);
    let w = polar_factor(&m)?;
    let misfit = frob_diff(u_hat, &u.dot(&w));
    Ok(AlignmentResult {
        w,
        sign_blocks: SignBlocks {
            positive: (0..r).collect(),
            negative: Vec::new(),
        },
        frobenius_misfit: misfit,
    })
}

fn polar_factor(m: &Array2<f64>) -> Result<Array2<f64>, LinalgError> {
    let r = m.nrows();
    let flat: Vec<f64> = m.iter().copied().collect();
    let (u, _s, vt) = lapack::gesvd_small(r, r, &flat).map_err(|info| LinalgError::Lapack {
        routine: "dgesvd",
        info,
    })?;
    let ua = Array2::from_shape_vec((r, r), u).unwrap();
    let vta = Array2::from_shape_vec((r, r), vt).unwrap();
    Ok(ua.dot(&vta))
}

fn frob_diff(a: ArrayView2<'_, f64>, b: &Array2<f64>) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let d = x - y;
        acc += d * d;
    }
    acc.sqrt()
}

/// Block-diagonal Procrustes across eigenvalue sign groups: one orthogonal
/// block aligns the eigenvectors of the positive eigenvalues, one aligns the
/// negative group. Requires the sign patterns of `lambda` and `lambda_hat`
/// to agree positionally.
pub fn block_signed_procrustes(
    u: ArrayView2<'_, f64>,
    lambda: &[f64],
    u_hat: ArrayView2<'_, f64>,
    lambda_hat: &[f64],
) -> Result<AlignmentResult, LinalgError> {
    if u.ncols() != u_hat.ncols() {
        return Err(LinalgError::ShapeMismatch {
            a: u.ncols(),
            b: u_hat.ncols(),
        });
    }
    let r = u.ncols();
    assert_eq!(lambda.len(), r);
    assert_eq!(lambda_hat.len(), r);
    for pos in 0..r {
        if (lambda[pos] >= 0.0) != (lambda_hat[pos] >= 0.0) {
            return Err(LinalgError::SignMismatch {
                pos,
                lhs: lambda[pos],
                rhs: lambda_hat[pos],
            });
        }
    }
    let blocks = SignBlocks::from_eigenvalues(lambda);
    let mut w = Array2::<f64>::zeros((r, r));
    for group in [&blocks.positive, &blocks.negative] {
        if group.is_empty() {
            continue;
        }
        let ug = select_columns(u, group);
        let uhg = select_columns(u_hat, group);
        let m = ug.t().dot(&uhg);
        let wg = polar_factor(&m)?;
        for (a, &ia) in group.iter().enumerate() {
            for (b, &ib) in group.iter().enumerate() {
                w[[ia, ib]] = wg[[a, b]];
            }
        }
    }
    let misfit = frob_diff(u_hat, &u.dot(&w));
    Ok(AlignmentResult {
        w,
        sign_blocks: blocks,
        frobenius_misfit: misfit,
    })
}

pub(crate) fn select_columns(m: ArrayView2<'_, f64>, cols: &[usize]) -> Array2<f64> {
    let n = m.nrows();
    let mut out = Array2::<f64>::zeros((n, cols.len()));
    for (c, &j) in cols.iter().enumerate() {
        for i in 0..n {
            out[[i, c]] = m[[i, j]];
        }
    }
    out
}

/// Squared-loss distance between two real sequences minimized over all
/// bijections: both sides sorted descending (zero-padded to common length),
/// then summed squared differences.
pub fn delta2_distance(v: &[f64], w: &[f64]) -> f64 {
    let len = v.len().max(w.len());
    let mut a = v.to_vec();
    let mut b = w.to_vec();
    a.resize(len, 0.0);
    b.resize(len, 0.0);
    a.sort_by(|x, y| y.partial_cmp(x).unwrap());
    b.sort_by(|x, y| y.partial_cmp(x).unwrap());
    a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum()
}
