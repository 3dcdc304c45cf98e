#![allow(dead_code)] // shared across integration suites; not every suite uses every oracle

//! Shared oracles for the integration suites. These deliberately avoid the
//! library's affine-expansion and Hermitian-mirror paths so they can serve
//! as independent references.

use bandgap2d::assembly::{element_matrices, Polarization};
use bandgap2d::lattice::Grid;
use bandgap2d::sparse::TripletBuilder;
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

/// One-pass assembly with a per-cell coefficient; no affine split, no
/// upper-triangle mirroring.
pub fn monolithic_assembly(
    grid: &Grid,
    cellwise: &[f64],
    k: [f64; 2],
    pol: Polarization,
) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let (es, em) = element_matrices(grid.h, k).unwrap();
    let dofs = grid.dof_count();
    let mut a = TripletBuilder::new(dofs);
    let mut m = TripletBuilder::new(dofs);
    for cy in 0..grid.n {
        for cx in 0..grid.n {
            let cell = cy * grid.n + cx;
            let g = grid.cell_dofs(cx, cy);
            let (wa, wm) = match pol {
                Polarization::TE => (1.0 / cellwise[cell], 1.0),
                Polarization::TM => (1.0, cellwise[cell]),
            };
            for p in 0..4 {
                for q in 0..4 {
                    a.push(g[p], g[q], es[(p, q)] * wa);
                    m.push(g[p], g[q], Complex64::new(em[(p, q)] * wm, 0.0));
                }
            }
        }
    }
    (a.build().to_dense(), m.build().to_dense())
}

/// Analytic free-space dispersion: the sorted set `{|k+G|² : G = π(p,q)}`
/// for `|p|, |q| <= 4` (lattice constant 2).
pub fn free_space_dispersion(k: [f64; 2]) -> Vec<f64> {
    let mut values = Vec::with_capacity(81);
    for p in -4i32..=4 {
        for q in -4i32..=4 {
            let gx = PI * p as f64;
            let gy = PI * q as f64;
            values.push((k[0] + gx).powi(2) + (k[1] + gy).powi(2));
        }
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values
}

/// Deterministic admissible random design on `[eps_min, eps_max]`.
pub fn pseudo_random_design(n_eps: usize, seed: u64, eps_min: f64, eps_max: f64) -> Vec<f64> {
    let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
    (0..n_eps)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            let u = (state >> 11) as f64 / (1u64 << 53) as f64;
            eps_min + (eps_max - eps_min) * u
        })
        .collect()
}
