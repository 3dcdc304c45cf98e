//! Truncated eigenspace selection and reduced constraint blocks.
//!
//! At a frozen incumbent design, the eigenvalue constraints around the gap
//! are replaced by matrix inequalities projected onto a few eigenvectors:
//! the `a_k` bands just below band m and the `b_k` bands just above band
//! m+1. The per-k dimensions come from relative windows `r_l`, `r_u` below
//! and above the band edges, with degenerate clusters at the threshold fully
//! included (a tie grows the subspace rather than splitting a cluster).

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::assembly::AffineOperatorFamily;
use crate::bands::BandSolution;
use crate::error::{Error, Result};
use crate::lattice::DielectricDesign;

/// Subspace dimensions at one wavevector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DimSelection {
    pub a: usize,
    pub b: usize,
    /// `a` hit the number of available bands below (window left open).
    pub a_saturated: bool,
    /// `b` hit the number of computed bands above (window left open);
    /// callers should recompute with a larger eigensolve depth.
    pub b_saturated: bool,
}

/// Smallest `a_k`/`b_k` such that every eigenvalue within `100 r_l %` below
/// band m (resp. `100 r_u %` above band m+1) is captured.
///
/// `eigenvalues` is ascending and 0-indexed; `m` is the 1-based band index.
pub fn select_dims(eigenvalues: &[f64], m: usize, r_l: f64, r_u: f64) -> Result<DimSelection> {
    if m < 1 || eigenvalues.len() < m + 1 {
        return Err(Error::invalid(format!(
            "need eigenvalues at least through band {}, got {}",
            m + 1,
            eigenvalues.len()
        )));
    }
    if !(r_l > 0.0 && r_u > 0.0) {
        return Err(Error::invalid("r_l and r_u must be positive".to_string()));
    }
    let lambda_m = eigenvalues[m - 1];
    let lambda_m1 = eigenvalues[m];
    if lambda_m1 <= 0.0 {
        return Err(Error::invalid(format!(
            "relative windows need a positive upper band edge, got λ^(m+1) = {lambda_m1}"
        )));
    }
    // At Γ the lowest band touches zero exactly (constant mode); the
    // relative window degenerates there, so the zero cluster is taken
    // whole. Genuinely negative edges are still rejected.
    let zero_tol = 1e-9 * lambda_m1;
    if lambda_m < -zero_tol {
        return Err(Error::invalid(format!(
            "relative windows need a nonnegative lower band edge, got λ^m = {lambda_m}"
        )));
    }
    let mut a = 0;
    if lambda_m <= zero_tol {
        for j in (0..m).rev() {
            if eigenvalues[j].abs() <= zero_tol {
                a += 1;
            } else {
                break;
            }
        }
    } else {
        for j in (0..m).rev() {
            if (lambda_m - eigenvalues[j]) / lambda_m <= r_l {
                a += 1;
            } else {
                break;
            }
        }
    }
    let a_saturated = a == m;
    let mut b = 0;
    for &ev in eigenvalues.iter().skip(m) {
        if (ev - lambda_m1) / lambda_m1 <= r_u {
            b += 1;
        } else {
            break;
        }
    }
    let b_saturated = b == eigenvalues.len() - m;
    Ok(DimSelection {
        a,
        b,
        a_saturated,
        b_saturated,
    })
}

/// Eigenvector blocks at one wavevector, M(incumbent)-orthonormal.
#[derive(Debug, Clone)]
pub struct KSubspace {
    pub dims: DimSelection,
    /// Bands m-a+1 ... m (columns ascending in band index).
    pub phi_a: DMatrix<Complex64>,
    /// Bands m+1 ... m+b.
    pub phi_b: DMatrix<Complex64>,
}

/// Per-k truncated eigenspaces frozen at an incumbent design.
#[derive(Debug, Clone)]
pub struct ReducedSubspace {
    pub band_index: usize,
    pub incumbent: DielectricDesign,
    pub per_k: Vec<KSubspace>,
}

impl ReducedSubspace {
    pub fn max_b(&self) -> usize {
        self.per_k.iter().map(|s| s.dims.b).max().unwrap_or(0)
    }

    pub fn any_b_saturated(&self) -> bool {
        self.per_k.iter().any(|s| s.dims.b_saturated)
    }

    /// (a_k, b_k) per path point, for run diagnostics.
    pub fn dim_profile(&self) -> Vec<(usize, usize)> {
        self.per_k.iter().map(|s| (s.dims.a, s.dims.b)).collect()
    }
}

/// Extract the truncated eigenvector blocks from band solutions computed at
/// the incumbent design.
pub fn build_reduced_subspace(
    bands: &BandSolution,
    r_l: f64,
    r_u: f64,
    incumbent: &DielectricDesign,
) -> Result<ReducedSubspace> {
    let m = bands.band_index;
    let mut per_k = Vec::with_capacity(bands.solutions.len());
    for (idx, sol) in bands.solutions.iter().enumerate() {
        if sol.eigenvalues.len() < m + 1 {
            return Err(Error::Internal(format!(
                "k-point {idx} carries {} bands but band index {m} needs at least {}; \
                 recompute the eigensolve with a larger band count",
                sol.eigenvalues.len(),
                m + 1
            )));
        }
        let dims = select_dims(&sol.eigenvalues, m, r_l, r_u).map_err(|e| e.at_k(idx))?;
        let n = sol.eigenvectors.nrows();
        let phi_a = DMatrix::from_fn(n, dims.a, |i, j| sol.eigenvectors[(i, m - dims.a + j)]);
        let phi_b = DMatrix::from_fn(n, dims.b, |i, j| sol.eigenvectors[(i, m + j)]);
        per_k.push(KSubspace { dims, phi_a, phi_b });
    }
    Ok(ReducedSubspace {
        band_index: m,
        incumbent: incumbent.clone(),
        per_k,
    })
}

/// Projections of every affine term onto the lower and upper blocks at one
/// wavevector. All blocks are Hermitian by construction.
#[derive(Debug, Clone)]
pub struct KBlocks {
    /// Per design variable: `Φ_a^* T_i Φ_a`.
    pub lower_terms: Vec<DMatrix<Complex64>>,
    /// Projection of the design-independent operator onto `Φ_a`.
    pub lower_fixed: DMatrix<Complex64>,
    pub upper_terms: Vec<DMatrix<Complex64>>,
    pub upper_fixed: DMatrix<Complex64>,
}

fn hermitize(m: DMatrix<Complex64>) -> DMatrix<Complex64> {
    let adj = m.adjoint();
    (m + adj) * Complex64::new(0.5, 0.0)
}

/// Project the family's affine terms onto a k-point subspace.
pub fn reduce_blocks(family: &AffineOperatorFamily, subspace: &KSubspace) -> Result<KBlocks> {
    if subspace.phi_a.nrows() != family.dof_count {
        return Err(Error::invalid(format!(
            "subspace has {} rows, family has {} DOFs",
            subspace.phi_a.nrows(),
            family.dof_count
        )));
    }
    let project = |phi: &DMatrix<Complex64>, t: &crate::sparse::CsrMatrix| {
        hermitize(phi.adjoint() * t.mul_dense(phi))
    };
    let lower_terms = family
        .design_terms
        .iter()
        .map(|t| project(&subspace.phi_a, t))
        .collect();
    let upper_terms = family
        .design_terms
        .iter()
        .map(|t| project(&subspace.phi_b, t))
        .collect();
    Ok(KBlocks {
        lower_terms,
        lower_fixed: project(&subspace.phi_a, &family.fixed),
        upper_terms,
        upper_fixed: project(&subspace.phi_b, &family.fixed),
    })
}

/// Real symmetric embedding `[[Re H, -Im H], [Im H, Re H]]` of a complex
/// Hermitian matrix. Positive semidefinite iff `H` is; every eigenvalue
/// appears twice. The output is symmetric exactly.
pub fn embed_real(h: &DMatrix<Complex64>) -> Result<DMatrix<f64>> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(Error::invalid("embedding needs a square matrix"));
    }
    let scale: f64 = h.iter().map(|v| v.norm()).fold(1.0, f64::max);
    for i in 0..n {
        for j in 0..n {
            if (h[(i, j)] - h[(j, i)].conj()).norm() > 1e-12 * scale {
                return Err(Error::invalid(format!(
                    "matrix is not Hermitian at ({i}, {j})"
                )));
            }
        }
    }
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in i..n {
            let re = 0.5 * (h[(i, j)].re + h[(j, i)].re);
            let im = 0.5 * (h[(i, j)].im - h[(j, i)].im); // antisymmetric part
            out[(i, j)] = re;
            out[(j, i)] = re;
            out[(n + i, n + j)] = re;
            out[(n + j, n + i)] = re;
            // upper-right block is -Im, lower-left is +Im
            out[(i, n + j)] = -im;
            out[(n + j, i)] = -im;
            out[(j, n + i)] = im;
            out[(n + i, j)] = im;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{evaluate, Polarization};
    use crate::bands::{gap_from_solutions, solve_path};
    use crate::eig::EigOptions;
    use crate::lattice::{build_grid, build_k_path, build_symmetry_map};

    #[test]
    fn dimension_selection_examples() {
        let eigenvalues = [0.5, 0.85, 0.95, 1.0, 1.4];
        let d = select_dims(&eigenvalues, 4, 0.1, 0.1).unwrap();
        assert_eq!(d.a, 2); // 0.95 and 1.0 within 10% below the edge
        assert!(!d.a_saturated);

        // exact triple degeneracy at the band edge pulls in the whole cluster
        let eigenvalues = [0.6, 1.0, 1.0, 1.0, 1.3, 1.32, 2.0];
        let d = select_dims(&eigenvalues, 4, 0.1, 0.1).unwrap();
        assert_eq!(d.a, 3);
        assert_eq!(d.b, 2); // 1.3 and 1.32 within 10% above the upper edge

        // equality at the threshold is included (tie grows the subspace)
        let eigenvalues = [0.9, 1.0, 2.0];
        let d = select_dims(&eigenvalues, 2, 0.1, 0.5).unwrap();
        assert_eq!(d.a, 2);
        assert!(d.a_saturated);

        assert!(select_dims(&eigenvalues, 0, 0.1, 0.1).is_err());
        assert!(select_dims(&[-1.0, 2.0], 1, 0.1, 0.1).is_err());
        assert!(select_dims(&[1.0], 1, 0.1, 0.1).is_err());
    }

    proptest::proptest! {
        #[test]
        fn selection_is_monotone_in_the_window(
            seed in 0u64..500,
            r_small in 0.01f64..0.3,
            extra in 0.0f64..0.5,
        ) {
            let mut eigenvalues: Vec<f64> = (0..10)
                .map(|i| 0.5 + ((seed + i as u64 * 977) % 1000) as f64 / 400.0)
                .collect();
            eigenvalues.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let m = 5;
            let d1 = select_dims(&eigenvalues, m, r_small, r_small).unwrap();
            let d2 = select_dims(&eigenvalues, m, r_small + extra, r_small + extra).unwrap();
            proptest::prop_assert!(d2.a >= d1.a);
            proptest::prop_assert!(d2.b >= d1.b);
            // the defining inequalities hold verbatim when unsaturated
            let lm = eigenvalues[m - 1];
            if !d1.a_saturated {
                let inner = (lm - eigenvalues[m - d1.a]) / lm;
                let outer = (lm - eigenvalues[m - d1.a - 1]) / lm;
                proptest::prop_assert!(inner <= r_small && r_small <= outer);
            }
        }
    }

    #[test]
    fn embedding_examples() {
        let id = DMatrix::from_diagonal_element(3, 3, Complex64::new(1.0, 0.0));
        let e = embed_real(&id).unwrap();
        assert_eq!(e, DMatrix::identity(6, 6));

        // [[0, -i], [i, 0]] has eigenvalues ±1
        let mut h = DMatrix::zeros(2, 2);
        h[(0, 1)] = Complex64::new(0.0, -1.0);
        h[(1, 0)] = Complex64::new(0.0, 1.0);
        let e = embed_real(&h).unwrap();
        assert_eq!(e.transpose(), e);
        let mut evs: Vec<f64> = e.symmetric_eigen().eigenvalues.iter().copied().collect();
        evs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expect = [-1.0, -1.0, 1.0, 1.0];
        for (got, want) in evs.iter().zip(expect) {
            assert!((got - want).abs() < 1e-12);
        }

        let mut bad = DMatrix::zeros(2, 2);
        bad[(0, 1)] = Complex64::new(1.0, 0.0);
        assert!(embed_real(&bad).is_err());
    }

    #[test]
    fn embedding_duplicates_the_spectrum() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..5 {
            let n = 6;
            let raw = DMatrix::from_fn(n, n, |_, _| {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let h = (&raw + raw.adjoint()) * Complex64::new(0.5, 0.0);
            let mut complex_spectrum: Vec<f64> = h
                .clone()
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .copied()
                .collect();
            complex_spectrum.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let embedded = embed_real(&h).unwrap();
            let mut real_spectrum: Vec<f64> = embedded
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .copied()
                .collect();
            real_spectrum.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for j in 0..n {
                assert!((real_spectrum[2 * j] - complex_spectrum[j]).abs() < 1e-12);
                assert!((real_spectrum[2 * j + 1] - complex_spectrum[j]).abs() < 1e-12);
            }
        }
    }

    fn test_design(n_eps: usize) -> DielectricDesign {
        DielectricDesign {
            eps: (0..n_eps)
                .map(|i| 1.0 + 10.4 * ((i * 41 + 17) % 71) as f64 / 70.0)
                .collect(),
            eps_min: 1.0,
            eps_max: 11.4,
        }
    }

    #[test]
    fn subspace_blocks_are_orthonormal_and_diagonalize_the_incumbent() {
        let grid = build_grid(8).unwrap();
        let map = build_symmetry_map(&grid);
        let kpath = build_k_path(4).unwrap();
        let design = test_design(map.n_eps);
        let m = 2;
        let opts = EigOptions::default();
        for pol in [Polarization::TE, Polarization::TM] {
            let families = crate::bands::assemble_path_families(&grid, &map, &kpath, pol).unwrap();
            let solutions = solve_path(&families, &design, 10, &opts).unwrap();
            let bands = gap_from_solutions(solutions, pol, m).unwrap();
            let sub = build_reduced_subspace(&bands, 0.15, 0.15, &design).unwrap();
            for (idx, (ks, family)) in sub.per_k.iter().zip(&families).enumerate() {
                let (a_mat, m_mat) = evaluate(family, &design).unwrap();
                let m_dense = m_mat.to_dense();
                // combined block of lower and upper eigenvectors
                let total = ks.phi_a.ncols() + ks.phi_b.ncols();
                let mut phi = DMatrix::zeros(ks.phi_a.nrows(), total);
                for j in 0..ks.phi_a.ncols() {
                    phi.column_mut(j).copy_from(&ks.phi_a.column(j));
                }
                for j in 0..ks.phi_b.ncols() {
                    phi.column_mut(ks.phi_a.ncols() + j)
                        .copy_from(&ks.phi_b.column(j));
                }
                let gram = phi.adjoint() * &m_dense * &phi;
                for i in 0..gram.nrows() {
                    for j in 0..gram.ncols() {
                        let want = if i == j { 1.0 } else { 0.0 };
                        assert!(
                            (gram[(i, j)] - Complex64::new(want, 0.0)).norm() < 1e-10,
                            "k {idx}: gram({i},{j})"
                        );
                    }
                }
                // the lower block of the incumbent pencil is diagonal with
                // the band values relative to the gap edge
                let a_dense = a_mat.to_dense();
                let lower = ks.phi_a.adjoint()
                    * (&a_dense - &m_dense * Complex64::new(bands.lambda_lower, 0.0))
                    * &ks.phi_a;
                let eigenvalues = &bands.solutions[idx].eigenvalues;
                for i in 0..ks.dims.a {
                    for j in 0..ks.dims.a {
                        let want = if i == j {
                            eigenvalues[m - ks.dims.a + i] - bands.lambda_lower
                        } else {
                            0.0
                        };
                        assert!(
                            (lower[(i, j)] - Complex64::new(want, 0.0)).norm() < 1e-8,
                            "k {idx} lower({i},{j})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn reduced_blocks_identity_linearity_and_incumbent_signs() {
        let grid = build_grid(8).unwrap();
        let map = build_symmetry_map(&grid);
        let kpath = build_k_path(4).unwrap();
        let design = test_design(map.n_eps);
        let m = 2;
        let families =
            crate::bands::assemble_path_families(&grid, &map, &kpath, Polarization::TE).unwrap();
        let solutions = solve_path(&families, &design, 10, &EigOptions::default()).unwrap();
        let bands = gap_from_solutions(solutions, Polarization::TE, m).unwrap();
        let sub = build_reduced_subspace(&bands, 0.15, 0.15, &design).unwrap();
        for (idx, (ks, family)) in sub.per_k.iter().zip(&families).enumerate() {
            let blocks = reduce_blocks(family, ks).unwrap();
            // TE fixed operator is the mass matrix: projects to the identity
            for i in 0..ks.dims.a {
                for j in 0..ks.dims.a {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (blocks.lower_fixed[(i, j)] - Complex64::new(want, 0.0)).norm() < 1e-10
                    );
                }
            }
            // linearity: sum_i (1/eps_i) L_i equals the projected evaluated
            // stiffness
            let (a_mat, _) = evaluate(family, &design).unwrap();
            let direct = ks.phi_a.adjoint() * a_mat.mul_dense(&ks.phi_a);
            let mut combined = DMatrix::zeros(ks.dims.a, ks.dims.a);
            for (term, &e) in blocks.lower_terms.iter().zip(&design.eps) {
                combined += term * Complex64::new(1.0 / e, 0.0);
            }
            let scale = direct.camax().max(1.0);
            assert!(
                (&combined - &direct).camax() < 1e-11 * scale,
                "k {idx}: affine projection mismatch"
            );
            // at the incumbent with λl = max_k band m, the evaluated lower
            // block minus λl * identity-block is negative semidefinite
            let shifted = &combined - &blocks.lower_fixed * Complex64::new(bands.lambda_lower, 0.0);
            let embedded = embed_real(&hermitize(shifted)).unwrap();
            let max_ev = embedded.symmetric_eigen().eigenvalues.max();
            assert!(max_ev <= 1e-8 * bands.lambda_lower.max(1.0), "k {idx}");
        }
    }
}
