//! Latent position graph model: kernels, latent distributions, the edge
//! probability matrix, and Bernoulli adjacency sampling.
//!
//! The generative procedure: sample i.i.d. latent vectors from a
//! distribution, set `P[i][j] = rho * kappa(X_i, X_j)`, and draw each
//! upper-triangle entry of the adjacency matrix (diagonal included)
//! independently as Bernoulli(P[i][j]). A `--hollow` escape hatch zeroes
//! the diagonal after sampling for comparison runs.

pub mod io;

use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::linalg::{self, MatVec};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("latent dimension must be at least 1")]
    ZeroDimension,
    #[error("need at least {min} latent positions, got {n}")]
    TooFewPoints { n: usize, min: usize },
    #[error("point cloud is empty or contains non-finite coordinates")]
    BadPointCloud,
    #[error("sparsity rho = {rho} outside (0, 1]")]
    BadRho { rho: f64 },
    #[error("kernel value {value:.6} at pair ({i}, {j}) outside [0, 1]")]
    KernelOutOfRange { i: usize, j: usize, value: f64 },
    #[error("pair placement needs distinct indices")]
    SameIndex,
    #[error("distance {eps} infeasible for the unit sphere (chord must be <= 2)")]
    InfeasibleDistance { eps: f64 },
    #[error("Nystrom needs m >= k >= 1, got m = {m}, k = {k}")]
    BadNystromArgs { m: usize, k: usize },
    #[error("constant kernel value {value} outside [0, 1]")]
    BadConstant { value: f64 },
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
}

/// Symmetric link function with range in [0, 1].
#[derive(Debug, Clone)]
pub enum KernelSpec {
    /// exp(-||x - y|| / scale), Euclidean distance.
    Laplace { scale: f64 },
    /// exp(-angle(x, y) / scale) where angle is the great-circle angle
    /// between the directions of x and y. Intended for unit-sphere latents.
    ArcLaplace { scale: f64 },
    /// exp(-||x - y||^2 / bandwidth_sq).
    Gaussian { bandwidth_sq: f64 },
    /// x^T M y for a fixed symmetric M; the caller is responsible for
    /// choosing M and the latent support so values stay in [0, 1].
    DotProduct { matrix: Array2<f64> },
    /// Constant link, rank one.
    Constant { value: f64 },
}

impl KernelSpec {
    pub fn evaluate(&self, x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>) -> f64 {
        match self {
            KernelSpec::Laplace { scale } => {
                let d = euclidean(x, y);
                (-d / scale).exp()
            }
            KernelSpec::ArcLaplace { scale } => {
                let nx = x.dot(&x).sqrt();
                let ny = y.dot(&y).sqrt();
                let c = if nx == 0.0 || ny == 0.0 {
                    1.0
                } else {
                    (x.dot(&y) / (nx * ny)).clamp(-1.0, 1.0)
                };
                (-c.acos() / scale).exp()
            }
            KernelSpec::Gaussian { bandwidth_sq } => {
                let d = euclidean(x, y);
                (-d * d / bandwidth_sq).exp()
            }
            KernelSpec::DotProduct { matrix } => {
                let mut acc = 0.0;
                for i in 0..x.len() {
                    for j in 0..y.len() {
                        acc += x[i] * matrix[[i, j]] * y[j];
                    }
                }
                acc
            }
            KernelSpec::Constant { value } => *value,
        }
    }

    /// Whether the induced integral operator is positive semidefinite.
    pub fn is_positive_semidefinite(&self) -> bool {
        match self {
            KernelSpec::Laplace { .. }
            | KernelSpec::ArcLaplace { .. }
            | KernelSpec::Gaussian { .. }
            | KernelSpec::Constant { .. } => true,
            KernelSpec::DotProduct { matrix } => {
                match linalg::eig_dense(matrix.view()) {
                    Ok(d) => {
                        let top = d.eigenvalues.first().map(|v| v.abs()).unwrap_or(0.0);
                        d.eigenvalues.iter().all(|&v| v >= -1e-12 * top.max(1.0))
                    }
                    Err(_) => false,
                }
            }
        }
    }
}

fn euclidean(x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>) -> f64 {
    let mut acc = 0.0;
    for (a, b) in x.iter().zip(y.iter()) {
        let d = a - b;
        acc += d * d;
    }
    acc.sqrt()
}

/// Support of the latent distribution, used by pair placement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    UnitSphere,
    Euclidean,
}

#[derive(Debug, Clone)]
pub enum LatentDistribution {
    UniformSphere { dim: usize },
    StandardNormal { dim: usize },
    PointCloud { points: Array2<f64> },
}

impl LatentDistribution {
    pub fn dim(&self) -> usize {
        match self {
            LatentDistribution::UniformSphere { dim } | LatentDistribution::StandardNormal { dim } => {
                *dim
            }
            LatentDistribution::PointCloud { points } => points.ncols(),
        }
    }

    pub fn support(&self) -> Support {
        match self {
            LatentDistribution::UniformSphere { .. } => Support::UnitSphere,
            _ => Support::Euclidean,
        }
    }
}

/// n latent positions, one per row, plus the seed they came from.
#[derive(Debug, Clone)]
pub struct LatentSample {
    pub coords: Array2<f64>,
    pub seed: u64,
    pub support: Support,
}

impl LatentSample {
    pub fn n(&self) -> usize {
        self.coords.nrows()
    }

    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }
}

/// Draw n i.i.d. latent positions. Bit-reproducible for a fixed seed.
/// A point cloud with exactly n rows is returned verbatim; otherwise rows
/// are drawn uniformly from the cloud.
pub fn sample_latents(
    dist: &LatentDistribution,
    n: usize,
    seed: u64,
) -> Result<LatentSample, ModelError> {
    if n < 2 {
        return Err(ModelError::TooFewPoints { n, min: 2 });
    }
    if dist.dim() == 0 {
        return Err(ModelError::ZeroDimension);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = dist.dim();
    let coords = match dist {
        LatentDistribution::UniformSphere { .. } => {
            let mut c = Array2::<f64>::zeros((n, d));
            for mut row in c.rows_mut() {
                loop {
                    let mut norm_sq = 0.0;
                    for v in row.iter_mut() {
                        *v = StandardNormal.sample(&mut rng);
                        norm_sq += *v * *v;
                    }
                    if norm_sq > 1e-24 {
                        let inv = 1.0 / norm_sq.sqrt();
                        row.iter_mut().for_each(|v| *v *= inv);
                        break;
                    }
                }
            }
            c
        }
        LatentDistribution::StandardNormal { .. } => {
            let mut c = Array2::<f64>::zeros((n, d));
            for v in c.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            c
        }
        LatentDistribution::PointCloud { points } => {
            if points.nrows() == 0 || points.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::BadPointCloud);
            }
            if points.nrows() == n {
                points.clone()
            } else {
                let mut c = Array2::<f64>::zeros((n, d));
                for i in 0..n {
                    let pick = rng.random_range(0..points.nrows());
                    for j in 0..d {
                        c[[i, j]] = points[[pick, j]];
                    }
                }
                c
            }
        }
    };
    Ok(LatentSample {
        coords,
        seed,
        support: dist.support(),
    })
}

/// Move row `j` so that ||X_j - X_i|| equals `eps`, leaving every other row
/// unchanged. On the sphere the move goes along a uniformly random tangent
/// direction at X_i with the polar angle chosen so the chord has length
/// `eps`; in flat space along a uniformly random direction.
pub fn place_pair_at_distance(
    sample: &LatentSample,
    i: usize,
    j: usize,
    eps: f64,
    seed: u64,
) -> Result<LatentSample, ModelError> {
    if i == j {
        return Err(ModelError::SameIndex);
    }
    let mut out = sample.clone();
    if eps == 0.0 {
        let xi = sample.coords.row(i).to_owned();
        out.coords.row_mut(j).assign(&xi);
        return Ok(out);
    }
    let d = sample.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match sample.support {
        Support::UnitSphere => {
            if eps > 2.0 {
                return Err(ModelError::InfeasibleDistance { eps });
            }
            let xi = sample.coords.row(i).to_owned();
            // Random tangent direction at x_i.
            let mut t = vec![0.0f64; d];
            loop {
                let mut dot_xi = 0.0;
                for v in t.iter_mut() {
                    *v = StandardNormal.sample(&mut rng);
                }
                for a in 0..d {
                    dot_xi += t[a] * xi[a];
                }
                for a in 0..d {
                    t[a] -= dot_xi * xi[a];
                }
                let nt: f64 = t.iter().map(|v| v * v).sum::<f64>().sqrt();
                if nt > 1e-12 {
                    t.iter_mut().for_each(|v| *v /= nt);
                    break;
                }
            }
            // Chord eps corresponds to polar angle 2 asin(eps / 2).
            let theta = 2.0 * (eps / 2.0).asin();
            let (c, s) = (theta.cos(), theta.sin());
            for a in 0..d {
                out.coords[[j, a]] = c * xi[a] + s * t[a];
            }
        }
        Support::Euclidean => {
            let mut u = vec![0.0f64; d];
            loop {
                for v in u.iter_mut() {
                    *v = StandardNormal.sample(&mut rng);
                }
                let nu: f64 = u.iter().map(|v| v * v).sum::<f64>().sqrt();
                if nu > 1e-12 {
                    u.iter_mut().for_each(|v| *v /= nu);
                    break;
                }
            }
            for a in 0..d {
                out.coords[[j, a]] = sample.coords[[i, a]] + eps * u[a];
            }
        }
    }
    Ok(out)
}

/// Symmetric edge probability matrix, entries stored once per unordered
/// pair (lower triangle including the diagonal).
#[derive(Debug, Clone)]
pub struct EdgeProbabilityMatrix {
    packed: Vec<f64>,
    n: usize,
    rho: f64,
}

#[inline]
fn tri_index(i: usize, j: usize) -> usize {
    // requires j <= i
    i * (i + 1) / 2 + j
}

impl EdgeProbabilityMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j <= i {
            self.packed[tri_index(i, j)]
        } else {
            self.packed[tri_index(j, i)]
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.packed.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.n;
        let mut a = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let v = self.packed[tri_index(i, j)];
                a[[i, j]] = v;
                a[[j, i]] = v;
            }
        }
        a
    }

    /// Row i as a dense vector.
    pub fn row_dense(&self, i: usize, out: &mut [f64]) {
        assert_eq!(out.len(), self.n);
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.get(i, j);
        }
    }
}

/// Build P[i][j] = rho * kappa(X_i, X_j). Fails if any kernel value falls
/// outside [0, 1], which signals a misconfigured dot-product matrix.
pub fn build_p(
    sample: &LatentSample,
    kernel: &KernelSpec,
    rho: f64,
) -> Result<EdgeProbabilityMatrix, ModelError> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(ModelError::BadRho { rho });
    }
    if let KernelSpec::Constant { value } = kernel {
        if !(0.0..=1.0).contains(value) {
            return Err(ModelError::BadConstant { value: *value });
        }
    }
    let n = sample.n();
    let mut packed = vec![0.0f64; n * (n + 1) / 2];
    // Carve the packed buffer into per-row slices for parallel fill.
    let mut rows: Vec<&mut [f64]> = Vec::with_capacity(n);
    let mut rest = packed.as_mut_slice();
    for i in 0..n {
        let (row, tail) = rest.split_at_mut(i + 1);
        rows.push(row);
        rest = tail;
    }
    let coords = &sample.coords;
    let bad = rows
        .into_par_iter()
        .enumerate()
        .try_for_each(|(i, row)| -> Result<(), ModelError> {
            let xi = coords.row(i);
            for (j, slot) in row.iter_mut().enumerate() {
                let k = kernel.evaluate(xi, coords.row(j));
                if !((-1e-12..=1.0 + 1e-12).contains(&k)) {
                    return Err(ModelError::KernelOutOfRange { i, j, value: k });
                }
                *slot = rho * k.clamp(0.0, 1.0);
            }
            Ok(())
        });
    bad?;
    Ok(EdgeProbabilityMatrix { packed, n, rho })
}

/// Symmetric binary adjacency matrix, bit-packed lower triangle including
/// the diagonal.
#[derive(Debug, Clone)]
pub struct Adjacency {
    bits: Vec<u64>,
    n: usize,
    hollow: bool,
}

impl Adjacency {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn hollow(&self) -> bool {
        self.hollow
    }

    pub(crate) fn empty(n: usize, hollow: bool) -> Self {
        let nbits = n * (n + 1) / 2;
        Adjacency {
            bits: vec![0u64; nbits.div_ceil(64)],
            n,
            hollow,
        }
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.bits
    }

    pub(crate) fn from_words(n: usize, words: Vec<u64>, hollow: bool) -> Self {
        assert_eq!(words.len(), (n * (n + 1) / 2).div_ceil(64));
        Adjacency {
            bits: words,
            n,
            hollow,
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        let idx = if j <= i { tri_index(i, j) } else { tri_index(j, i) };
        (self.bits[idx / 64] >> (idx % 64)) & 1 == 1
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize) {
        let idx = if j <= i { tri_index(i, j) } else { tri_index(j, i) };
        self.bits[idx / 64] |= 1 << (idx % 64);
    }

    /// Average degree n^{-1} sum_{ij} a_ij: off-diagonal entries count twice
    /// (once per orientation), diagonal entries once.
    pub fn average_degree(&self) -> f64 {
        let mut total = 0u64;
        for i in 0..self.n {
            if self.get(i, i) {
                total += 1;
            }
            for j in 0..i {
                if self.get(i, j) {
                    total += 2;
                }
            }
        }
        total as f64 / self.n as f64
    }

    /// Edges as (i, j) with i <= j, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for j in 0..self.n {
            for i in j..self.n {
                if self.get(i, j) {
                    out.push((j, i));
                }
            }
        }
        out.sort_unstable();
        out
    }

    pub fn edge_count(&self) -> usize {
        let mut total = 0usize;
        for w in &self.bits {
            total += w.count_ones() as usize;
        }
        total
    }

    /// Row i as 0/1 reals.
    pub fn row_dense(&self, i: usize, out: &mut [f64]) {
        assert_eq!(out.len(), self.n);
        for (j, o) in out.iter_mut().enumerate() {
            *o = if self.get(i, j) { 1.0 } else { 0.0 };
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.n;
        let mut a = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                if self.get(i, j) {
                    a[[i, j]] = 1.0;
                    a[[j, i]] = 1.0;
                }
            }
        }
        a
    }

    /// Compressed sparse rows over the full symmetric pattern, for the
    /// iterative eigensolver.
    pub fn to_csr(&self) -> linalg::CsrMatrix {
        let n = self.n;
        let mut counts = vec![0usize; n];
        for i in 0..n {
            for j in 0..=i {
                if self.get(i, j) {
                    counts[i] += 1;
                    if i != j {
                        counts[j] += 1;
                    }
                }
            }
        }
        let mut indptr = vec![0usize; n + 1];
        for i in 0..n {
            indptr[i + 1] = indptr[i] + counts[i];
        }
        let mut cursor = indptr.clone();
        let mut indices = vec![0u32; indptr[n]];
        for i in 0..n {
            for j in 0..=i {
                if self.get(i, j) {
                    indices[cursor[i]] = j as u32;
                    cursor[i] += 1;
                    if i != j {
                        indices[cursor[j]] = i as u32;
                        cursor[j] += 1;
                    }
                }
            }
        }
        // Rows come out sorted because j ascends for fixed i and i ascends
        // for the mirrored entries.
        linalg::CsrMatrix::new(n, indptr, indices)
    }
}

/// Operator view of the adjacency for solvers that want A x without the CSR
/// conversion.
impl MatVec for Adjacency {
    fn dim(&self) -> usize {
        self.n
    }

    fn matvec(&self, x: &[f64], y: &mut [f64]) {
        // Bit scan; fine for small n, solvers should prefer to_csr().
        for i in 0..self.n {
            let mut acc = 0.0;
            for j in 0..self.n {
                if self.get(i, j) {
                    acc += x[j];
                }
            }
            y[i] = acc;
        }
    }
}

/// Sample the adjacency: each pair (i, j) with j <= i is an independent
/// Bernoulli(P[i][j]) draw; the matrix is symmetric by construction.
/// With `hollow`, diagonal draws are still consumed but the entries are
/// forced to zero, so the off-diagonal graph matches the non-hollow run
/// with the same seed.
pub fn sample_adjacency(p: &EdgeProbabilityMatrix, seed: u64, hollow: bool) -> Adjacency {
    let n = p.n();
    let mut adj = Adjacency::empty(n, hollow);
    // Per-row RNG streams keep the draw deterministic under any scheduling.
    let row_bits: Vec<Vec<(usize, bool)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            let mut row = Vec::new();
            for j in 0..=i {
                let u: f64 = rng.random();
                let mut hit = u < p.get(i, j);
                if hollow && i == j {
                    hit = false;
                }
                if hit {
                    row.push((j, true));
                }
            }
            row.into_iter().collect()
        })
        .collect();
    for (i, row) in row_bits.into_iter().enumerate() {
        for (j, _) in row {
            adj.set(i, j);
        }
    }
    adj
}

/// Top-k largest-modulus eigenvalues of the m x m kernel Gram matrix on a
/// fresh latent draw, divided by m: estimates of the integral operator
/// spectrum.
pub fn nystrom_spectrum(
    kernel: &KernelSpec,
    dist: &LatentDistribution,
    m: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<f64>, ModelError> {
    if m < k || k == 0 {
        return Err(ModelError::BadNystromArgs { m, k });
    }
    let sample = sample_latents(dist, m.max(2), seed)?;
    let coords = &sample.coords;
    let mut gram = Array2::<f64>::zeros((m, m));
    {
        let data = gram.as_slice_mut().unwrap();
        data.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
            let xi = coords.row(i);
            for (j, slot) in row.iter_mut().enumerate() {
                *slot = kernel.evaluate(xi, coords.row(j)) / m as f64;
            }
        });
    }
    // Symmetrize exactly against round-off in the kernel evaluation order.
    for i in 0..m {
        for j in 0..i {
            let v = 0.5 * (gram[[i, j]] + gram[[j, i]]);
            gram[[i, j]] = v;
            gram[[j, i]] = v;
        }
    }
    let values = if m <= linalg::DENSE_MAX_N && k * 4 >= m.min(64) {
        linalg::eig_dense(gram.view())?.eigenvalues
    } else if m <= linalg::DENSE_MAX_N {
        linalg::eig_dense(gram.view())?.eigenvalues
    } else {
        let op = linalg::DenseSym::new(gram);
        linalg::eig_topk_lanczos(&op, k, 1e-10, seed ^ 0x5eed)?.eigenvalues
    };
    Ok(values.into_iter().take(k).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn point_cloud_identity_case() {
        let cloud = LatentDistribution::PointCloud {
            points: array![[0.0], [1.0]],
        };
        let s = sample_latents(&cloud, 2, 5).unwrap();
        assert_eq!(s.coords, array![[0.0], [1.0]]);
    }

    #[test]
    fn sphere_rows_have_unit_norm() {
        let dist = LatentDistribution::UniformSphere { dim: 3 };
        let s = sample_latents(&dist, 1000, 42).unwrap();
        for row in s.coords.rows() {
            let norm: f64 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn normal_sample_mean_near_zero() {
        // CLT oracle: mean within 4/sqrt(n) per coordinate.
        let n = 100_000;
        let dist = LatentDistribution::StandardNormal { dim: 2 };
        let s = sample_latents(&dist, n, 7).unwrap();
        let tol = 4.0 / (n as f64).sqrt();
        for c in 0..2 {
            let mean: f64 = s.coords.column(c).iter().sum::<f64>() / n as f64;
            assert!(mean.abs() < 0.02, "mean {mean} vs tol {tol}");
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let dist = LatentDistribution::StandardNormal { dim: 3 };
        let a = sample_latents(&dist, 50, 9).unwrap();
        let b = sample_latents(&dist, 50, 9).unwrap();
        assert_eq!(a.coords, b.coords);
    }

    #[test]
    fn rejects_n_below_two() {
        let dist = LatentDistribution::StandardNormal { dim: 1 };
        assert!(matches!(
            sample_latents(&dist, 1, 0),
            Err(ModelError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn place_pair_zero_distance_copies_exactly() {
        let dist = LatentDistribution::UniformSphere { dim: 3 };
        let s = sample_latents(&dist, 10, 3).unwrap();
        let moved = place_pair_at_distance(&s, 0, 9, 0.0, 1).unwrap();
        for a in 0..3 {
            assert_eq!(moved.coords[[9, a]], moved.coords[[0, a]]);
        }
    }

    #[test]
    fn place_pair_on_sphere_hits_chord() {
        let dist = LatentDistribution::UniformSphere { dim: 3 };
        let s = sample_latents(&dist, 10, 3).unwrap();
        let moved = place_pair_at_distance(&s, 0, 9, 0.3, 11).unwrap();
        let norm: f64 = moved.coords.row(9).iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12, "stays on the sphere");
        let mut chord = 0.0;
        for a in 0..3 {
            let d = moved.coords[[9, a]] - moved.coords[[0, a]];
            chord += d * d;
        }
        assert_abs_diff_eq!(chord.sqrt(), 0.3, epsilon = 1e-10);
    }

    #[test]
    fn place_pair_flat_deterministic() {
        let dist = LatentDistribution::StandardNormal { dim: 2 };
        let s = sample_latents(&dist, 5, 1).unwrap();
        let a = place_pair_at_distance(&s, 0, 4, 1.0, 77).unwrap();
        let b = place_pair_at_distance(&s, 0, 4, 1.0, 77).unwrap();
        assert_eq!(a.coords, b.coords);
        let mut dist_sq = 0.0;
        for c in 0..2 {
            let d = a.coords[[4, c]] - a.coords[[0, c]];
            dist_sq += d * d;
        }
        assert_abs_diff_eq!(dist_sq.sqrt(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn place_pair_rejects_infeasible_sphere_distance() {
        let dist = LatentDistribution::UniformSphere { dim: 3 };
        let s = sample_latents(&dist, 4, 2).unwrap();
        assert!(matches!(
            place_pair_at_distance(&s, 0, 1, 2.5, 0),
            Err(ModelError::InfeasibleDistance { .. })
        ));
    }

    #[test]
    fn build_p_constant_rank_one() {
        let dist = LatentDistribution::StandardNormal { dim: 1 };
        let s = sample_latents(&dist, 4, 1).unwrap();
        let p = build_p(&s, &KernelSpec::Constant { value: 1.0 }, 0.5).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(p.get(i, j), 0.5);
            }
        }
        let d = linalg::eig_dense(p.to_dense().view()).unwrap();
        assert_abs_diff_eq!(d.eigenvalues[0], 2.0, epsilon = 1e-10);
        for j in 1..4 {
            assert!(d.eigenvalues[j].abs() < 1e-10);
        }
    }

    #[test]
    fn build_p_laplace_values() {
        let points = array![[0.0], [std::f64::consts::LN_2]];
        let cloud = LatentDistribution::PointCloud { points };
        let s = sample_latents(&cloud, 2, 0).unwrap();
        let kernel = KernelSpec::Laplace { scale: 1.0 };
        let p = build_p(&s, &kernel, 1.0).unwrap();
        assert_abs_diff_eq!(p.get(0, 0), 1.0, epsilon = 1e-15); // kappa(x, x) = 1
        assert_abs_diff_eq!(p.get(0, 1), 0.5, epsilon = 1e-12); // exp(-ln 2)
        let p2 = build_p(&s, &kernel, 0.25).unwrap();
        assert_abs_diff_eq!(p2.get(1, 1), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn build_p_rejects_out_of_range_kernel() {
        let cloud = LatentDistribution::PointCloud {
            points: array![[2.0], [0.0]],
        };
        let s = sample_latents(&cloud, 2, 0).unwrap();
        let kernel = KernelSpec::DotProduct {
            matrix: array![[1.0]],
        };
        assert!(matches!(
            build_p(&s, &kernel, 1.0),
            Err(ModelError::KernelOutOfRange { .. })
        ));
    }

    #[test]
    fn build_p_symmetric_and_bounded() {
        let dist = LatentDistribution::UniformSphere { dim: 3 };
        let s = sample_latents(&dist, 60, 4).unwrap();
        let p = build_p(&s, &KernelSpec::ArcLaplace { scale: 1.0 }, 0.4).unwrap();
        assert!(p.max_abs() <= 0.4 + 1e-15);
        let d = p.to_dense();
        for i in 0..60 {
            for j in 0..60 {
                assert_eq!(d[[i, j]], d[[j, i]]);
            }
        }
    }

    #[test]
    fn adjacency_degenerate_probabilities() {
        let cloud = LatentDistribution::PointCloud {
            points: array![[0.0], [10.0], [20.0]],
        };
        let s = sample_latents(&cloud, 3, 0).unwrap();
        // Gaussian kernel: kappa = 1 on the diagonal, ~0 off it.
        let p = build_p(&s, &KernelSpec::Gaussian { bandwidth_sq: 0.01 }, 1.0).unwrap();
        let a = sample_adjacency(&p, 123, false);
        for i in 0..3 {
            assert!(a.get(i, i));
            for j in 0..i {
                assert!(!a.get(i, j));
            }
        }
    }

    #[test]
    fn adjacency_bernoulli_mean() {
        // P = 0.5 everywhere at n = 200; the (0, 1) entry across 400
        // replicates should land within a binomial CI of 0.5.
        let dist = LatentDistribution::StandardNormal { dim: 1 };
        let s = sample_latents(&dist, 200, 8).unwrap();
        let p = build_p(&s, &KernelSpec::Constant { value: 0.5 }, 1.0).unwrap();
        let mut hits = 0;
        for rep in 0..400u64 {
            let a = sample_adjacency(&p, 1000 + rep, false);
            if a.get(0, 1) {
                hits += 1;
            }
        }
        let freq = hits as f64 / 400.0;
        assert!((freq - 0.5).abs() < 0.08, "frequency {freq}");
    }

    #[test]
    fn adjacency_deterministic_and_symmetric() {
        let dist = LatentDistribution::UniformSphere { dim: 3 };
        let s = sample_latents(&dist, 40, 2).unwrap();
        let p = build_p(&s, &KernelSpec::Laplace { scale: 1.0 }, 0.5).unwrap();
        let a = sample_adjacency(&p, 7, false);
        let b = sample_adjacency(&p, 7, false);
        assert_eq!(a.words(), b.words());
        for i in 0..40 {
            for j in 0..40 {
                assert_eq!(a.get(i, j), a.get(j, i));
            }
        }
    }

    #[test]
    fn hollow_preserves_off_diagonal_draws() {
        let dist = LatentDistribution::UniformSphere { dim: 3 };
        let s = sample_latents(&dist, 30, 2).unwrap();
        let p = build_p(&s, &KernelSpec::Laplace { scale: 1.0 }, 0.8).unwrap();
        let full = sample_adjacency(&p, 99, false);
        let hollow = sample_adjacency(&p, 99, true);
        for i in 0..30 {
            assert!(!hollow.get(i, i));
            for j in 0..i {
                assert_eq!(full.get(i, j), hollow.get(i, j));
            }
        }
    }

    #[test]
    fn csr_matches_bit_matvec() {
        let dist = LatentDistribution::UniformSphere { dim: 3 };
        let s = sample_latents(&dist, 50, 12).unwrap();
        let p = build_p(&s, &KernelSpec::Laplace { scale: 1.0 }, 0.6).unwrap();
        let a = sample_adjacency(&p, 3, false);
        let csr = a.to_csr();
        let x: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let mut y1 = vec![0.0; 50];
        let mut y2 = vec![0.0; 50];
        a.matvec(&x, &mut y1);
        csr.matvec(&x, &mut y2);
        for (u, v) in y1.iter().zip(&y2) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-12);
        }
        assert_eq!(csr.nnz(), {
            let mut c = 0;
            for i in 0..50 {
                for j in 0..50 {
                    if a.get(i, j) {
                        c += 1;
                    }
                }
            }
            c
        });
    }

    #[test]
    fn nystrom_constant_kernel() {
        let dist = LatentDistribution::StandardNormal { dim: 1 };
        let mu = nystrom_spectrum(&KernelSpec::Constant { value: 0.7 }, &dist, 100, 3, 5).unwrap();
        assert_abs_diff_eq!(mu[0], 0.7, epsilon = 1e-10);
        assert!(mu[1].abs() < 1e-10 && mu[2].abs() < 1e-10);
    }

    #[test]
    fn nystrom_two_point_dot_product() {
        let cloud = LatentDistribution::PointCloud {
            points: array![[1.0, 0.0], [0.0, 1.0]],
        };
        let kernel = KernelSpec::DotProduct {
            matrix: Array2::eye(2),
        };
        let mu = nystrom_spectrum(&kernel, &cloud, 2, 2, 0).unwrap();
        assert_abs_diff_eq!(mu[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(mu[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn nystrom_rejects_bad_args() {
        let dist = LatentDistribution::StandardNormal { dim: 1 };
        assert!(matches!(
            nystrom_spectrum(&KernelSpec::Constant { value: 0.5 }, &dist, 3, 5, 0),
            Err(ModelError::BadNystromArgs { .. })
        ));
    }
}
