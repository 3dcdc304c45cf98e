//! Generalized Hermitian eigensolver `A u = λ M u` with ascending
//! eigenvalues and M-orthonormal eigenvectors.
//!
//! Two paths share one contract:
//!
//! * dense (default up to 4096 DOFs): LAPACK `zhegvd` on the full pencil,
//!   which returns all eigenvalues ascending and eigenvectors normalized to
//!   `Z^H M Z = I`;
//! * shift-invert subspace iteration for larger problems: block iteration on
//!   `(A + τM)^{-1} M` with conjugate-gradient inner solves and
//!   Rayleigh–Ritz extraction, targeting the lowest pairs only.
//!
//! Ties in degenerate clusters keep the backend's deterministic order; the
//! subspace machinery downstream consumes whole clusters, so the basis
//! choice inside a cluster does not matter.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigMethod {
    Dense,
    ShiftInvert,
}

#[derive(Debug, Clone, Copy)]
pub struct EigOptions {
    /// Largest dimension solved densely when the method is chosen
    /// automatically.
    pub dense_cutoff: usize,
    /// Force a particular path regardless of size.
    pub force: Option<EigMethod>,
    /// Residual tolerance relative to `‖A‖_F / sqrt(N)`.
    pub residual_tol: f64,
}

impl Default for EigOptions {
    fn default() -> Self {
        Self {
            dense_cutoff: 4096,
            force: None,
            residual_tol: 1e-8,
        }
    }
}

/// Eigenpairs at one wavevector, ascending, M-orthonormal.
#[derive(Debug, Clone)]
pub struct EigenSolution {
    pub k: [f64; 2],
    pub eigenvalues: Vec<f64>,
    /// N x m_max, column j pairs with `eigenvalues[j]`.
    pub eigenvectors: DMatrix<Complex64>,
    /// `‖A u_j − λ_j M u_j‖_2` per returned pair.
    pub residual_norms: Vec<f64>,
}

/// Compute the `m_max` algebraically smallest eigenpairs of the Hermitian
/// pencil `(A, M)` with `M` positive definite.
pub fn solve_gevp(
    a: &CsrMatrix,
    m: &CsrMatrix,
    m_max: usize,
    k: [f64; 2],
    opts: &EigOptions,
) -> Result<EigenSolution> {
    let n = a.dim;
    if m.dim != n {
        return Err(Error::invalid(format!(
            "operator dimensions differ: {} vs {}",
            n, m.dim
        )));
    }
    if m_max == 0 || m_max > n {
        return Err(Error::invalid(format!(
            "m_max must be in [1, {n}], got {m_max}"
        )));
    }
    let method = opts.force.unwrap_or(if n <= opts.dense_cutoff {
        EigMethod::Dense
    } else {
        EigMethod::ShiftInvert
    });
    let (eigenvalues, eigenvectors) = match method {
        EigMethod::Dense => dense_path(a, m, m_max)?,
        EigMethod::ShiftInvert => shift_invert_path(a, m, m_max, opts)?,
    };
    let residual_norms = residuals(a, m, &eigenvalues, &eigenvectors);
    Ok(EigenSolution {
        k,
        eigenvalues,
        eigenvectors,
        residual_norms,
    })
}

fn residuals(
    a: &CsrMatrix,
    m: &CsrMatrix,
    eigenvalues: &[f64],
    eigenvectors: &DMatrix<Complex64>,
) -> Vec<f64> {
    let n = a.dim;
    let mut au = vec![Complex64::new(0.0, 0.0); n];
    let mut mu = vec![Complex64::new(0.0, 0.0); n];
    let mut out = Vec::with_capacity(eigenvalues.len());
    for (j, &lambda) in eigenvalues.iter().enumerate() {
        let col: Vec<Complex64> = eigenvectors.column(j).iter().copied().collect();
        a.mul_vec(&col, &mut au);
        m.mul_vec(&col, &mut mu);
        let mut norm2 = 0.0;
        for i in 0..n {
            norm2 += (au[i] - mu[i] * lambda).norm_sqr();
        }
        out.push(norm2.sqrt());
    }
    out
}

// ---------------------------------------------------------------------------
// Dense path (LAPACK zhegvd)
// ---------------------------------------------------------------------------

mod lapack {
    use num_complex::Complex64;

    extern "C" {
        pub fn zhegvd_(
            itype: *const i32,
            jobz: *const u8,
            uplo: *const u8,
            n: *const i32,
            a: *mut Complex64,
            lda: *const i32,
            b: *mut Complex64,
            ldb: *const i32,
            w: *mut f64,
            work: *mut Complex64,
            lwork: *const i32,
            rwork: *mut f64,
            lrwork: *const i32,
            iwork: *mut i32,
            liwork: *const i32,
            info: *mut i32,
        );
        pub fn openblas_set_num_threads(n: i32);
    }
}

/// Pin the BLAS backend to one thread. Parallelism lives at the k-point
/// level, and single-threaded BLAS keeps results reproducible.
fn pin_blas_threads() {
    use std::sync::Once;
    static ONCE: Once = Once::new();
    ONCE.call_once(|| unsafe {
        lapack::openblas_set_num_threads(1);
    });
}

/// Full solve of the dense pencil; returns the first `m_max` pairs.
fn dense_path(
    a: &CsrMatrix,
    m: &CsrMatrix,
    m_max: usize,
) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    pin_blas_threads();
    let n = a.dim;
    let mut a_dense = a.to_dense();
    let mut m_dense = m.to_dense();
    let mut w = vec![0.0f64; n];

    let itype: i32 = 1;
    let jobz = b'V';
    let uplo = b'L';
    let n_i = n as i32;
    let mut info: i32 = 0;

    // workspace query
    let mut work_query = [Complex64::new(0.0, 0.0)];
    let mut rwork_query = [0.0f64];
    let mut iwork_query = [0i32];
    let minus_one: i32 = -1;
    unsafe {
        lapack::zhegvd_(
            &itype,
            &jobz,
            &uplo,
            &n_i,
            a_dense.as_mut_slice().as_mut_ptr(),
            &n_i,
            m_dense.as_mut_slice().as_mut_ptr(),
            &n_i,
            w.as_mut_ptr(),
            work_query.as_mut_ptr(),
            &minus_one,
            rwork_query.as_mut_ptr(),
            &minus_one,
            iwork_query.as_mut_ptr(),
            &minus_one,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Numerical(format!(
            "eigensolver workspace query failed (info = {info})"
        )));
    }
    let lwork = work_query[0].re as i32;
    let lrwork = rwork_query[0] as i32;
    let liwork = iwork_query[0];
    let mut work = vec![Complex64::new(0.0, 0.0); lwork.max(1) as usize];
    let mut rwork = vec![0.0f64; lrwork.max(1) as usize];
    let mut iwork = vec![0i32; liwork.max(1) as usize];

    unsafe {
        lapack::zhegvd_(
            &itype,
            &jobz,
            &uplo,
            &n_i,
            a_dense.as_mut_slice().as_mut_ptr(),
            &n_i,
            m_dense.as_mut_slice().as_mut_ptr(),
            &n_i,
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork,
            rwork.as_mut_ptr(),
            &lrwork,
            iwork.as_mut_ptr(),
            &liwork,
            &mut info,
        );
    }
    if info > n as i32 {
        return Err(Error::Numerical(format!(
            "mass matrix is not positive definite (leading minor {})",
            info - n as i32
        )));
    }
    if info != 0 {
        return Err(Error::Numerical(format!(
            "dense eigensolver did not converge (info = {info})"
        )));
    }
    // zhegvd returns ascending eigenvalues and M-orthonormal vectors in a.
    let eigenvalues = w[..m_max].to_vec();
    let eigenvectors = DMatrix::from_fn(n, m_max, |i, j| a_dense[(i, j)]);
    Ok((eigenvalues, eigenvectors))
}

// ---------------------------------------------------------------------------
// Shift-invert subspace iteration
// ---------------------------------------------------------------------------

/// Jacobi-preconditioned conjugate gradients on a Hermitian
/// positive-definite operator.
fn pcg(
    c: &CsrMatrix,
    precond: &[f64],
    b: &[Complex64],
    x: &mut [Complex64],
    tol: f64,
    max_iters: usize,
) -> Result<()> {
    let n = c.dim;
    let mut r = b.to_vec();
    let mut tmp = vec![Complex64::new(0.0, 0.0); n];
    if x.iter().any(|v| v.norm_sqr() > 0.0) {
        c.mul_vec(x, &mut tmp);
        for i in 0..n {
            r[i] -= tmp[i];
        }
    }
    let bnorm = b
        .iter()
        .map(|v| v.norm_sqr())
        .sum::<f64>()
        .sqrt()
        .max(1e-300);
    let mut z: Vec<Complex64> = r.iter().zip(precond).map(|(ri, &d)| ri * d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(ri, zi)| (ri.conj() * zi).re).sum();
    for _ in 0..max_iters {
        let rnorm = r.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if rnorm <= tol * bnorm {
            return Ok(());
        }
        c.mul_vec(&p, &mut tmp);
        let p_cp: f64 = p.iter().zip(&tmp).map(|(pi, ti)| (pi.conj() * ti).re).sum();
        if p_cp <= 0.0 {
            return Err(Error::Numerical(
                "conjugate gradients met a non-positive curvature direction".into(),
            ));
        }
        let alpha = rz / p_cp;
        for i in 0..n {
            x[i] += p[i] * alpha;
            r[i] -= tmp[i] * alpha;
        }
        for i in 0..n {
            z[i] = r[i] * precond[i];
        }
        let rz_next: f64 = r.iter().zip(&z).map(|(ri, zi)| (ri.conj() * zi).re).sum();
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + p[i] * beta;
        }
    }
    let rnorm = r.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if rnorm <= tol.max(1e-8) * bnorm {
        Ok(())
    } else {
        Err(Error::Numerical(format!(
            "conjugate gradients stalled at relative residual {:.3e}",
            rnorm / bnorm
        )))
    }
}

/// M-orthonormalize the columns of `x` in place via the Gram Cholesky.
fn m_orthonormalize(x: &mut DMatrix<Complex64>, m: &CsrMatrix) -> Result<()> {
    let mx = m.mul_dense(x);
    let gram = x.adjoint() * &mx;
    let chol = nalgebra::Cholesky::new(gram)
        .ok_or_else(|| Error::Numerical("subspace became numerically rank deficient".into()))?;
    // x <- x L^{-H}, via L (x L^{-H})^H = x^H
    let solved = chol
        .l()
        .solve_lower_triangular(&x.adjoint())
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    *x = solved.adjoint();
    Ok(())
}

fn shift_invert_path(
    a: &CsrMatrix,
    m: &CsrMatrix,
    m_max: usize,
    opts: &EigOptions,
) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    use rand::{Rng, SeedableRng};
    let n = a.dim;
    let block = (m_max + (m_max / 2).max(6)).min(n);

    // Small positive shift keeps A + τM definite while barely perturbing the
    // low end of the spectrum.
    let trace_ratio = {
        let ta: f64 = a.diagonal().iter().map(|v| v.re).sum();
        let tm: f64 = m.diagonal().iter().map(|v| v.re).sum();
        (ta / tm.max(1e-300)).abs().max(1e-12)
    };
    let tau = 1e-3 * trace_ratio;
    let shifted = CsrMatrix::weighted_sum(n, &[a.clone(), m.clone()], &[1.0, tau])?;
    let precond: Vec<f64> = shifted
        .diagonal()
        .iter()
        .map(|d| if d.re > 0.0 { 1.0 / d.re } else { 1.0 })
        .collect();

    let scale = a.frobenius_norm() / (n as f64).sqrt();
    let res_tol = opts.residual_tol * scale.max(1e-300);

    // Deterministic start.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed ^ (n as u64) << 8 ^ block as u64);
    let mut x = DMatrix::from_fn(n, block, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    m_orthonormalize(&mut x, m)?;

    let cg_iters = 40 * (n as f64).sqrt() as usize + 200;
    let mut ritz = vec![0.0f64; block];
    for _outer in 0..200 {
        // y_j = (A + τM)^{-1} M x_j
        let mx = m.mul_dense(&x);
        let mut y = DMatrix::zeros(n, block);
        for j in 0..block {
            let rhs: Vec<Complex64> = mx.column(j).iter().copied().collect();
            let mut col = vec![Complex64::new(0.0, 0.0); n];
            pcg(&shifted, &precond, &rhs, &mut col, 1e-11, cg_iters)?;
            for i in 0..n {
                y[(i, j)] = col[i];
            }
        }
        m_orthonormalize(&mut y, m)?;

        // Rayleigh–Ritz in the (A, M) inner products.
        let ay = a.mul_dense(&y);
        let small = y.adjoint() * &ay;
        let small = (small.adjoint() + &small) * Complex64::new(0.5, 0.0);
        let eig = small.symmetric_eigen();
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
        let mut rot = DMatrix::zeros(block, block);
        for (dst, &src) in order.iter().enumerate() {
            rot.column_mut(dst).copy_from(&eig.eigenvectors.column(src));
            ritz[dst] = eig.eigenvalues[src];
        }
        x = &y * &rot;

        // Convergence of the wanted pairs.
        let ax = a.mul_dense(&x);
        let mx = m.mul_dense(&x);
        let mut converged = true;
        for j in 0..m_max {
            let mut r2 = 0.0;
            for i in 0..n {
                r2 += (ax[(i, j)] - mx[(i, j)] * ritz[j]).norm_sqr();
            }
            if r2.sqrt() > res_tol {
                converged = false;
                break;
            }
        }
        if converged {
            let eigenvalues = ritz[..m_max].to_vec();
            let eigenvectors = DMatrix::from_fn(n, m_max, |i, j| x[(i, j)]);
            return Ok((eigenvalues, eigenvectors));
        }
    }
    Err(Error::Numerical(
        "shift-invert iteration did not converge".into(),
    ))
}
