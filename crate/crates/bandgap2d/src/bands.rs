//! Band diagrams over the wavevector path and gap-midgap bookkeeping.

use rayon::prelude::*;

use crate::assembly::{assemble_family, evaluate, AffineOperatorFamily, Polarization};
use crate::eig::{solve_gevp, EigOptions, EigenSolution};
use crate::error::{Error, Result};
use crate::lattice::{DielectricDesign, Grid, KPath, SymmetryMap};

/// Eigen-solutions along the path plus the gap data for one band index.
///
/// `lambda_lower` is the top of band `m` over the sampled wavevectors,
/// `lambda_upper` the bottom of band `m+1`; `gap_midgap` is their
/// scale-invariant ratio, positive exactly when the bands separate.
#[derive(Debug, Clone)]
pub struct BandSolution {
    pub polarization: Polarization,
    /// 1-based band index m; the gap considered is between m and m+1.
    pub band_index: usize,
    pub solutions: Vec<EigenSolution>,
    pub lambda_lower: f64,
    pub lambda_upper: f64,
    pub gap_midgap: f64,
    /// Index into the path where band m attains its maximum.
    pub argmax_lower: usize,
    /// Index into the path where band m+1 attains its minimum.
    pub argmin_upper: usize,
}

/// Gap-midgap ratio `(λu - λl) / (λu + λl)`.
pub fn gap_midgap(lambda_lower: f64, lambda_upper: f64) -> Result<f64> {
    if !(lambda_lower > 0.0 && lambda_upper > 0.0) {
        return Err(Error::invalid(format!(
            "gap-midgap needs strictly positive band edges, got ({lambda_lower}, {lambda_upper})"
        )));
    }
    Ok((lambda_upper - lambda_lower) / (lambda_upper + lambda_lower))
}

/// Dimensionless frequency `sqrt(λ) a / 2π` used on band-diagram axes.
pub fn normalized_frequency(lambda: f64, lattice_constant: f64) -> Result<f64> {
    if lambda < 0.0 {
        return Err(Error::invalid(format!(
            "normalized frequency needs λ >= 0, got {lambda}"
        )));
    }
    Ok(lambda.sqrt() * lattice_constant / (2.0 * std::f64::consts::PI))
}

/// Assemble the operator family at every path point, in parallel.
pub fn assemble_path_families(
    grid: &Grid,
    map: &SymmetryMap,
    kpath: &KPath,
    polarization: Polarization,
) -> Result<Vec<AffineOperatorFamily>> {
    kpath
        .points
        .par_iter()
        .map(|&k| assemble_family(grid, map, k, polarization))
        .collect()
}

/// Eigen-solutions at each family evaluated at `design`, in path order.
pub fn solve_path(
    families: &[AffineOperatorFamily],
    design: &DielectricDesign,
    n_bands: usize,
    opts: &EigOptions,
) -> Result<Vec<EigenSolution>> {
    families
        .par_iter()
        .enumerate()
        .map(|(idx, family)| {
            let (a, m) = evaluate(family, design).map_err(|e| e.at_k(idx))?;
            solve_gevp(&a, &m, n_bands, family.k, opts).map_err(|e| e.at_k(idx))
        })
        .collect()
}

/// Gap bookkeeping over already-computed path solutions.
pub fn gap_from_solutions(
    solutions: Vec<EigenSolution>,
    polarization: Polarization,
    band_index: usize,
) -> Result<BandSolution> {
    let m = band_index;
    if m < 1 {
        return Err(Error::invalid("band index must be >= 1".to_string()));
    }
    for (idx, sol) in solutions.iter().enumerate() {
        if sol.eigenvalues.len() < m + 1 {
            return Err(Error::invalid(format!(
                "need at least {} bands, k-point {idx} has {}",
                m + 1,
                sol.eigenvalues.len()
            )));
        }
    }
    let (argmax_lower, lambda_lower) = solutions
        .iter()
        .enumerate()
        .map(|(i, s)| (i, s.eigenvalues[m - 1]))
        .fold((0, f64::NEG_INFINITY), |acc, cur| {
            if cur.1 > acc.1 {
                cur
            } else {
                acc
            }
        });
    let (argmin_upper, lambda_upper) = solutions
        .iter()
        .enumerate()
        .map(|(i, s)| (i, s.eigenvalues[m]))
        .fold(
            (0, f64::INFINITY),
            |acc, cur| if cur.1 < acc.1 { cur } else { acc },
        );
    let gap = gap_midgap(lambda_lower, lambda_upper)?;
    Ok(BandSolution {
        polarization,
        band_index: m,
        solutions,
        lambda_lower,
        lambda_upper,
        gap_midgap: gap,
        argmax_lower,
        argmin_upper,
    })
}

/// Full band diagram: assemble, solve at every path point, and aggregate
/// the gap between bands `m` and `m+1`.
pub fn band_diagram(
    grid: &Grid,
    map: &SymmetryMap,
    design: &DielectricDesign,
    kpath: &KPath,
    polarization: Polarization,
    band_index: usize,
    n_bands: usize,
    opts: &EigOptions,
) -> Result<BandSolution> {
    if n_bands < band_index + 1 {
        return Err(Error::invalid(format!(
            "n_bands = {n_bands} too small for band index {band_index}"
        )));
    }
    design.validate(map)?;
    let families = assemble_path_families(grid, map, kpath, polarization)?;
    let solutions = solve_path(&families, design, n_bands, opts)?;
    gap_from_solutions(solutions, polarization, band_index)
}
