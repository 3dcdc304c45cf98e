//! Bloch-periodic finite-element assembly in affine form over the design
//! variables.
//!
//! Bilinear 4-node square elements with 2x2 Gauss quadrature (exact for
//! these integrands) discretize the shifted operators obtained by replacing
//! ∇ with ∇ + ik on the periodic unit cell. Periodicity is enforced through
//! DOF identification, so the only k-dependence sits in the element
//! integrands.
//!
//! For the TE polarization the stiffness decomposes into one term per
//! reduced design variable, `A(ε,k) = Σ_i (1/ε_i) A_i(k)`, with a fixed mass
//! matrix; for TM the stiffness is fixed and the mass decomposes as
//! `M(ε) = Σ_i ε_i M_i`. The per-term matrices are assembled once per
//! k-point and are immutable afterwards.

use nalgebra::Matrix4;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{DielectricDesign, Grid, SymmetryMap};
use crate::sparse::{CsrMatrix, TripletBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarization {
    TE,
    TM,
}

impl std::fmt::Display for Polarization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Polarization::TE => f.write_str("TE"),
            Polarization::TM => f.write_str("TM"),
        }
    }
}

impl std::str::FromStr for Polarization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "te" => Ok(Polarization::TE),
            "tm" => Ok(Polarization::TM),
            other => Err(Error::invalid(format!(
                "polarization must be `te` or `tm`, got `{other}`"
            ))),
        }
    }
}

/// Element matrices of the shifted operator on one square cell:
/// `stiffness[p][q] = ∫ conj((∇+ik)φ_p) · (∇+ik)φ_q` and
/// `mass[p][q] = ∫ φ_p φ_q`, both exact under 2x2 Gauss for bilinear φ.
pub fn element_matrices(h: f64, k: [f64; 2]) -> Result<(Matrix4<Complex64>, Matrix4<f64>)> {
    if !(h > 0.0) {
        return Err(Error::invalid(format!(
            "cell size must be positive, got {h}"
        )));
    }
    // 2-point Gauss nodes on [0, h], weight h/2 each.
    let half = 0.5 * h;
    let offset = half / 3.0_f64.sqrt();
    let nodes = [half - offset, half + offset];
    let weight = half;

    // Bilinear shape functions and gradients at (x, y).
    let shape = |p: usize, x: f64, y: f64| -> (f64, f64, f64) {
        let (fx, dfx) = match p {
            0 | 3 => (1.0 - x / h, -1.0 / h),
            _ => (x / h, 1.0 / h),
        };
        let (fy, dfy) = match p {
            0 | 1 => (1.0 - y / h, -1.0 / h),
            _ => (y / h, 1.0 / h),
        };
        (fx * fy, dfx * fy, fx * dfy)
    };

    let ikx = Complex64::new(0.0, k[0]);
    let iky = Complex64::new(0.0, k[1]);
    let mut stiffness = Matrix4::<Complex64>::zeros();
    let mut mass = Matrix4::<f64>::zeros();
    for p in 0..4 {
        for q in p..4 {
            let mut s = Complex64::new(0.0, 0.0);
            let mut m = 0.0;
            for &x in &nodes {
                for &y in &nodes {
                    let w = weight * weight;
                    let (vp, gpx, gpy) = shape(p, x, y);
                    let (vq, gqx, gqy) = shape(q, x, y);
                    // conj((∇+ik)φ_p) · (∇+ik)φ_q, componentwise
                    let sx = (Complex64::new(gpx, 0.0) - ikx * vp)
                        * (Complex64::new(gqx, 0.0) + ikx * vq);
                    let sy = (Complex64::new(gpy, 0.0) - iky * vp)
                        * (Complex64::new(gqy, 0.0) + iky * vq);
                    s += (sx + sy) * w;
                    m += vp * vq * w;
                }
            }
            if p == q {
                stiffness[(p, q)] = Complex64::new(s.re, 0.0);
            } else {
                stiffness[(p, q)] = s;
                stiffness[(q, p)] = s.conj();
            }
            mass[(p, q)] = m;
            mass[(q, p)] = m;
        }
    }
    Ok((stiffness, mass))
}

/// Per-k operator family in affine form over the reduced design variables.
#[derive(Debug, Clone)]
pub struct AffineOperatorFamily {
    pub polarization: Polarization,
    pub k: [f64; 2],
    pub dof_count: usize,
    /// One Hermitian matrix per reduced variable: TE stiffness terms
    /// `A_i(k)`, TM mass terms `M_i`.
    pub design_terms: Vec<CsrMatrix>,
    /// The design-independent operator: TE mass, TM stiffness `A(k)`.
    pub fixed: CsrMatrix,
}

/// Scatter the element matrices of every cell into global periodic DOF
/// numbering, grouped by symmetry orbit.
pub fn assemble_family(
    grid: &Grid,
    map: &SymmetryMap,
    k: [f64; 2],
    polarization: Polarization,
) -> Result<AffineOperatorFamily> {
    let (elem_stiffness, elem_mass) = element_matrices(grid.h, k)?;
    let dofs = grid.dof_count();
    let n = grid.n;

    let scatter_complex = |builder: &mut TripletBuilder, cell: usize, elem: &Matrix4<Complex64>| {
        let (cx, cy) = (cell % n, cell / n);
        let g = grid.cell_dofs(cx, cy);
        for p in 0..4 {
            for q in 0..4 {
                builder.push(g[p], g[q], elem[(p, q)]);
            }
        }
    };
    let scatter_real = |builder: &mut TripletBuilder, cell: usize, elem: &Matrix4<f64>| {
        let (cx, cy) = (cell % n, cell / n);
        let g = grid.cell_dofs(cx, cy);
        for p in 0..4 {
            for q in 0..4 {
                builder.push(g[p], g[q], Complex64::new(elem[(p, q)], 0.0));
            }
        }
    };

    let mut design_terms = Vec::with_capacity(map.n_eps);
    for cells in &map.cells_of_orbit {
        let mut builder = TripletBuilder::new(dofs);
        for &cell in cells {
            match polarization {
                Polarization::TE => scatter_complex(&mut builder, cell, &elem_stiffness),
                Polarization::TM => scatter_real(&mut builder, cell, &elem_mass),
            }
        }
        design_terms.push(builder.build_hermitian());
    }

    let mut fixed_builder = TripletBuilder::new(dofs);
    for cell in 0..grid.cell_count() {
        match polarization {
            Polarization::TE => scatter_real(&mut fixed_builder, cell, &elem_mass),
            Polarization::TM => scatter_complex(&mut fixed_builder, cell, &elem_stiffness),
        }
    }
    let fixed = fixed_builder.build_hermitian();

    Ok(AffineOperatorFamily {
        polarization,
        k,
        dof_count: dofs,
        design_terms,
        fixed,
    })
}

/// Evaluate the family at a design: returns the (stiffness, mass) pair of
/// the generalized eigenproblem `A u = λ M u`.
pub fn evaluate(
    family: &AffineOperatorFamily,
    design: &DielectricDesign,
) -> Result<(CsrMatrix, CsrMatrix)> {
    if design.eps.len() != family.design_terms.len() {
        return Err(Error::invalid(format!(
            "design has {} variables, family has {}",
            design.eps.len(),
            family.design_terms.len()
        )));
    }
    for (i, &e) in design.eps.iter().enumerate() {
        if !e.is_finite() || e < design.eps_min - 1e-12 || e > design.eps_max + 1e-12 {
            return Err(Error::invalid(format!(
                "eps[{i}] = {e} outside [{}, {}]",
                design.eps_min, design.eps_max
            )));
        }
    }
    let weights: Vec<f64> = match family.polarization {
        Polarization::TE => design.eps.iter().map(|&e| 1.0 / e).collect(),
        Polarization::TM => design.eps.clone(),
    };
    let combined = CsrMatrix::weighted_sum(family.dof_count, &family.design_terms, &weights)?;
    match family.polarization {
        Polarization::TE => Ok((combined, family.fixed.clone())),
        Polarization::TM => Ok((family.fixed.clone(), combined)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_grid, build_symmetry_map};
    use nalgebra::DMatrix;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Closed-form element matrices from exact 1D integrals (tensor
    /// products), independent of the quadrature implementation.
    fn closed_form(h: f64, k: [f64; 2]) -> (Matrix4<Complex64>, Matrix4<f64>) {
        let k1 = [[1.0 / h, -1.0 / h], [-1.0 / h, 1.0 / h]];
        let m1 = [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]];
        // antisymmetric part of ∫ φ'_a φ_b
        let e1 = [[0.0, -1.0], [1.0, 0.0]];
        let ax = [0usize, 1, 1, 0];
        let ay = [0usize, 0, 1, 1];
        let mut stiffness = Matrix4::<Complex64>::zeros();
        let mut mass = Matrix4::<f64>::zeros();
        for p in 0..4 {
            for q in 0..4 {
                let lap = k1[ax[p]][ax[q]] * m1[ay[p]][ay[q]] + m1[ax[p]][ax[q]] * k1[ay[p]][ay[q]];
                let m = m1[ax[p]][ax[q]] * m1[ay[p]][ay[q]];
                let cx = e1[ax[p]][ax[q]] * m1[ay[p]][ay[q]];
                let cy = m1[ax[p]][ax[q]] * e1[ay[p]][ay[q]];
                let k2 = k[0] * k[0] + k[1] * k[1];
                stiffness[(p, q)] = c(lap + k2 * m, k[0] * cx + k[1] * cy);
                mass[(p, q)] = m;
            }
        }
        (stiffness, mass)
    }

    #[test]
    fn gamma_point_stiffness_is_the_laplacian_element() {
        let (s, _) = element_matrices(0.25, [0.0, 0.0]).unwrap();
        let expected = [
            [4.0, -1.0, -2.0, -1.0],
            [-1.0, 4.0, -1.0, -2.0],
            [-2.0, -1.0, 4.0, -1.0],
            [-1.0, -2.0, -1.0, 4.0],
        ];
        for p in 0..4 {
            let mut row_sum = c(0.0, 0.0);
            for q in 0..4 {
                assert!((s[(p, q)] - c(expected[p][q] / 6.0, 0.0)).norm() < 1e-14);
                row_sum += s[(p, q)];
            }
            // constants lie in the kernel of the gradient
            assert!(row_sum.norm() < 1e-14);
        }
    }

    #[test]
    fn mass_entries_sum_to_cell_area() {
        for (h, k) in [
            (1.0, [0.3, -0.7]),
            (0.125, [1.2, 0.4]),
            (2.0 / 6.0, [0.0, 0.9]),
        ] {
            let (_, m) = element_matrices(h, k).unwrap();
            let total: f64 = m.iter().sum();
            assert!((total - h * h).abs() < 1e-14 * h * h.max(1.0));
        }
    }

    #[test]
    fn golden_values_at_h1_k_pi_half() {
        let k = [PI / 2.0, 0.0];
        let (s, m) = element_matrices(1.0, k).unwrap();
        let (s_ref, m_ref) = closed_form(1.0, k);
        for p in 0..4 {
            for q in 0..4 {
                assert!((s[(p, q)] - s_ref[(p, q)]).norm() < 1e-13, "({p},{q})");
                assert!((m[(p, q)] - m_ref[(p, q)]).abs() < 1e-15);
            }
        }
        // frozen spot values
        assert!((s[(0, 0)] - c(2.0 / 3.0 + PI * PI / 36.0, 0.0)).norm() < 1e-14);
        assert!((s[(0, 1)] - c(-1.0 / 6.0 + PI * PI / 72.0, -PI / 6.0)).norm() < 1e-14);
    }

    #[test]
    fn element_is_hermitian_and_conjugates_under_k_flip() {
        let k = [0.8, -1.3];
        let (s, _) = element_matrices(0.5, k).unwrap();
        let (s_neg, _) = element_matrices(0.5, [-k[0], -k[1]]).unwrap();
        for p in 0..4 {
            for q in 0..4 {
                assert_eq!(s[(p, q)], s[(q, p)].conj());
                assert_eq!(s_neg[(p, q)], s[(p, q)].conj());
            }
        }
        assert!(element_matrices(0.0, k).is_err());
    }

    /// One-pass assembler with per-cell coefficients; no affine split, no
    /// Hermitian mirror trick. Oracle for the affine expansion.
    fn monolithic(
        grid: &Grid,
        coeff: &[f64],
        k: [f64; 2],
        pol: Polarization,
    ) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
        let (es, em) = element_matrices(grid.h, k).unwrap();
        let n = grid.n;
        let dofs = grid.dof_count();
        let mut a = TripletBuilder::new(dofs);
        let mut m = TripletBuilder::new(dofs);
        for cy in 0..n {
            for cx in 0..n {
                let cell = cy * n + cx;
                let g = grid.cell_dofs(cx, cy);
                let (wa, wm) = match pol {
                    Polarization::TE => (1.0 / coeff[cell], 1.0),
                    Polarization::TM => (1.0, coeff[cell]),
                };
                for p in 0..4 {
                    for q in 0..4 {
                        a.push(g[p], g[q], es[(p, q)] * wa);
                        m.push(g[p], g[q], c(em[(p, q)] * wm, 0.0));
                    }
                }
            }
        }
        (a.build().to_dense(), m.build().to_dense())
    }

    fn rel_frobenius(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
        let diff = a - b;
        diff.norm() / b.norm().max(1e-300)
    }

    #[test]
    fn affine_evaluation_matches_monolithic_assembly() {
        let grid = build_grid(4).unwrap();
        let map = build_symmetry_map(&grid);
        let k = [0.9, 0.4];
        // deterministic pseudo-random admissible design
        let eps: Vec<f64> = (0..map.n_eps)
            .map(|i| 1.0 + 10.4 * ((i * 37 + 11) % 97) as f64 / 96.0)
            .collect();
        let design = DielectricDesign {
            eps: eps.clone(),
            eps_min: 1.0,
            eps_max: 11.4,
        };
        let cellwise = crate::lattice::expand_design(&map, &eps).unwrap();
        for pol in [Polarization::TE, Polarization::TM] {
            let family = assemble_family(&grid, &map, k, pol).unwrap();
            let (a, m) = evaluate(&family, &design).unwrap();
            let (a_ref, m_ref) = monolithic(&grid, &cellwise, k, pol);
            assert!(rel_frobenius(&a.to_dense(), &a_ref) < 1e-13);
            assert!(rel_frobenius(&m.to_dense(), &m_ref) < 1e-13);
            assert_eq!(a.hermitian_error(), 0.0);
            assert_eq!(m.hermitian_error(), 0.0);
        }
    }

    #[test]
    fn unit_dielectric_reduces_to_plain_assembly() {
        let grid = build_grid(4).unwrap();
        let map = build_symmetry_map(&grid);
        let k = [0.5, 0.2];
        let design = DielectricDesign {
            eps: vec![1.0; map.n_eps],
            eps_min: 1.0,
            eps_max: 11.4,
        };
        let family = assemble_family(&grid, &map, k, Polarization::TE).unwrap();
        let (a, _) = evaluate(&family, &design).unwrap();
        let coeff = vec![1.0; grid.cell_count()];
        let (a_ref, _) = monolithic(&grid, &coeff, k, Polarization::TE);
        assert!(rel_frobenius(&a.to_dense(), &a_ref) < 1e-14);
    }

    #[test]
    fn tm_mass_terms_partition_the_plain_mass_matrix() {
        let grid = build_grid(6).unwrap();
        let map = build_symmetry_map(&grid);
        let family = assemble_family(&grid, &map, [0.3, 0.3], Polarization::TM).unwrap();
        let sum = CsrMatrix::sum(family.dof_count, &family.design_terms);
        let coeff = vec![1.0; grid.cell_count()];
        let (_, m_ref) = monolithic(&grid, &coeff, [0.3, 0.3], Polarization::TM);
        assert!(rel_frobenius(&sum.to_dense(), &m_ref) < 1e-14);
    }

    #[test]
    fn constant_designs_scale_linearly() {
        let grid = build_grid(4).unwrap();
        let map = build_symmetry_map(&grid);
        let k = [0.7, 0.1];
        let scale = 3.5;
        let ones = DielectricDesign {
            eps: vec![1.0; map.n_eps],
            eps_min: 0.5,
            eps_max: 12.0,
        };
        let scaled = DielectricDesign {
            eps: vec![scale; map.n_eps],
            eps_min: 0.5,
            eps_max: 12.0,
        };
        let tm = assemble_family(&grid, &map, k, Polarization::TM).unwrap();
        let (_, m1) = evaluate(&tm, &ones).unwrap();
        let (_, ms) = evaluate(&tm, &scaled).unwrap();
        for (v1, vs) in m1.vals.iter().zip(&ms.vals) {
            assert!((vs - v1 * scale).norm() < 1e-13);
        }
        let te = assemble_family(&grid, &map, k, Polarization::TE).unwrap();
        let (a1, _) = evaluate(&te, &ones).unwrap();
        let (as_, _) = evaluate(&te, &scaled).unwrap();
        for (v1, vs) in a1.vals.iter().zip(&as_.vals) {
            assert!((vs - v1 / scale).norm() < 1e-13);
        }
        let out_of_bounds = DielectricDesign {
            eps: vec![13.0; map.n_eps],
            eps_min: 0.5,
            eps_max: 12.0,
        };
        assert!(evaluate(&te, &out_of_bounds).is_err());
    }

    #[test]
    fn evaluated_operators_are_hermitian_with_definite_mass() {
        let grid = build_grid(6).unwrap();
        let map = build_symmetry_map(&grid);
        let k = [0.45, -0.8];
        for trial in 0..10u64 {
            let eps: Vec<f64> = (0..map.n_eps)
                .map(|i| 1.0 + 10.4 * ((i as u64 * 131 + trial * 17 + 7) % 89) as f64 / 88.0)
                .collect();
            let design = DielectricDesign {
                eps,
                eps_min: 1.0,
                eps_max: 11.4,
            };
            for pol in [Polarization::TE, Polarization::TM] {
                let family = assemble_family(&grid, &map, k, pol).unwrap();
                let (a, m) = evaluate(&family, &design).unwrap();
                assert_eq!(a.hermitian_error(), 0.0);
                assert_eq!(m.hermitian_error(), 0.0);
                let min_mass_eig = m.to_dense().symmetric_eigen().eigenvalues.min();
                assert!(min_mass_eig > 0.0, "mass must be positive definite");
            }
        }
    }

    #[test]
    fn gamma_point_matrices_are_real_and_conjugate_under_k_flip() {
        let grid = build_grid(4).unwrap();
        let map = build_symmetry_map(&grid);
        let gamma = assemble_family(&grid, &map, [0.0, 0.0], Polarization::TE).unwrap();
        for term in &gamma.design_terms {
            assert_eq!(term.max_imag(), 0.0);
        }
        assert_eq!(gamma.fixed.max_imag(), 0.0);

        let k = [0.6, 0.25];
        let plus = assemble_family(&grid, &map, k, Polarization::TE).unwrap();
        let minus = assemble_family(&grid, &map, [-k[0], -k[1]], Polarization::TE).unwrap();
        for (tp, tm_) in plus.design_terms.iter().zip(&minus.design_terms) {
            assert_eq!(tp.cols, tm_.cols);
            for (vp, vm) in tp.vals.iter().zip(&tm_.vals) {
                assert_eq!(*vm, vp.conj());
            }
        }
    }
}
