//! Thin safe wrappers around the LAPACK routines we use.

use core::ffi::c_char;

/// Full symmetric eigendecomposition via `dsyevd` (divide and conquer).
///
/// `a` is the n x n matrix as a flat slice; symmetry makes the storage order
/// irrelevant on input. Returns eigenvalues in ascending order; on exit `a`
/// holds the eigenvectors with vector `j` contiguous at `a[j*n..(j+1)*n]`.
pub(crate) fn syevd(n: usize, a: &mut [f64]) -> Result<Vec<f64>, i32> {
    assert_eq!(a.len(), n * n);
    let mut w = vec![0.0f64; n];
    let ni = n as i32;
    let mut info = 0i32;
    let jobz = b'V' as c_char;
    let uplo = b'L' as c_char;
    unsafe {
        let mut work_q = [0.0f64];
        let mut iwork_q = [0i32];
        lapack_sys::dsyevd_(
            &jobz,
            &uplo,
            &ni,
            a.as_mut_ptr(),
            &ni,
            w.as_mut_ptr(),
            work_q.as_mut_ptr(),
            &-1i32,
            iwork_q.as_mut_ptr(),
            &-1i32,
            &mut info,
        );
        if info != 0 {
            return Err(info);
        }
        let lwork = work_q[0] as i32;
        let liwork = iwork_q[0];
        let mut work = vec![0.0f64; lwork.max(1) as usize];
        let mut iwork = vec![0i32; liwork.max(1) as usize];
        lapack_sys::dsyevd_(
            &jobz,
            &uplo,
            &ni,
            a.as_mut_ptr(),
            &ni,
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork,
            iwork.as_mut_ptr(),
            &liwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(info);
    }
    Ok(w)
}

/// Singular value decomposition of a small m x n matrix via `dgesvd`.
///
/// Input and output are row-major. Returns `(u, s, vt)` with `u` m x m and
/// `vt` n x n (full SVD).
pub(crate) fn gesvd_small(
    m: usize,
    n: usize,
    a_rowmajor: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), i32> {
    assert_eq!(a_rowmajor.len(), m * n);
    // Column-major copy for LAPACK.
    let mut a = vec![0.0f64; m * n];
    for i in 0..m {
        for j in 0..n {
            a[i + j * m] = a_rowmajor[i * n + j];
        }
    }
    let mut s = vec![0.0f64; m.min(n)];
    let mut u = vec![0.0f64; m * m];
    let mut vt = vec![0.0f64; n * n];
    let (mi, ni) = (m as i32, n as i32);
    let mut info = 0i32;
    let job = b'A' as c_char;
    unsafe {
        let mut work_q = [0.0f64];
        lapack_sys::dgesvd_(
            &job,
            &job,
            &mi,
            &ni,
            a.as_mut_ptr(),
            &mi,
            s.as_mut_ptr(),
            u.as_mut_ptr(),
            &mi,
            vt.as_mut_ptr(),
            &ni,
            work_q.as_mut_ptr(),
            &-1i32,
            &mut info,
        );
        if info != 0 {
            return Err(info);
        }
        let lwork = work_q[0] as i32;
        let mut work = vec![0.0f64; lwork.max(1) as usize];
        lapack_sys::dgesvd_(
            &job,
            &job,
            &mi,
            &ni,
            a.as_mut_ptr(),
            &mi,
            s.as_mut_ptr(),
            u.as_mut_ptr(),
            &mi,
            vt.as_mut_ptr(),
            &ni,
            work.as_mut_ptr(),
            &lwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(info);
    }
    // Back to row-major.
    let mut u_rm = vec![0.0f64; m * m];
    for i in 0..m {
        for j in 0..m {
            u_rm[i * m + j] = u[i + j * m];
        }
    }
    let mut vt_rm = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            vt_rm[i * n + j] = vt[i + j * n];
        }
    }
    Ok((u_rm, s, vt_rm))
}
