//! Empty-lattice sanity check: with ε ≡ 1 the TM bands must follow the
//! analytic plane-wave dispersion |k+G|², and no gap can open.
//!
//!     cargo run --release --example free_space_bands

use bandgap2d::assembly::Polarization;
use bandgap2d::bands::{assemble_path_families, gap_from_solutions, solve_path};
use bandgap2d::eig::EigOptions;
use bandgap2d::lattice::{build_grid, build_k_path, build_symmetry_map, DielectricDesign};
use std::f64::consts::PI;

fn analytic_bands(k: [f64; 2], count: usize) -> Vec<f64> {
    let mut v = Vec::new();
    for p in -4i32..=4 {
        for q in -4i32..=4 {
            v.push((k[0] + PI * p as f64).powi(2) + (k[1] + PI * q as f64).powi(2));
        }
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.truncate(count);
    v
}

fn main() -> bandgap2d::Result<()> {
    let grid = build_grid(32)?;
    let map = build_symmetry_map(&grid);
    let kpath = build_k_path(12)?;
    let design = DielectricDesign {
        eps: vec![1.0; map.n_eps],
        eps_min: 1.0,
        eps_max: 11.4,
    };

    let families = assemble_path_families(&grid, &map, &kpath, Polarization::TM)?;
    let solutions = solve_path(&families, &design, 8, &EigOptions::default())?;

    println!("free space, TM, 32x32 grid, first 8 bands");
    println!(
        "{:>3} {:>18} {:>14} {:>14} {:>10}",
        "k#", "(kx, ky)", "computed λ1", "analytic λ1", "worst rel"
    );
    let mut overall: f64 = 0.0;
    for (idx, sol) in solutions.iter().enumerate() {
        let exact = analytic_bands(kpath.points[idx], 8);
        let mut worst: f64 = 0.0;
        for j in 0..8 {
            worst = worst.max((sol.eigenvalues[j] - exact[j]).abs() / exact[j].max(1e-9));
        }
        overall = overall.max(worst);
        println!(
            "{idx:>3} ({:>7.4}, {:>7.4}) {:>14.6} {:>14.6} {:>10.2e}",
            kpath.points[idx][0], kpath.points[idx][1], sol.eigenvalues[0], exact[0], worst
        );
    }
    println!("\nworst relative deviation across the path: {overall:.2e}");

    for m in 1..=6 {
        let bands = gap_from_solutions(solutions.clone(), Polarization::TM, m)?;
        println!(
            "gap ratio between bands {m} and {}: {:>8.4}%  (no gap expected)",
            m + 1,
            100.0 * bands.gap_midgap
        );
    }
    Ok(())
}
