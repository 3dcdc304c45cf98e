//! A look inside one outer iteration: subspace dimensions selected at the
//! incumbent, the reduced fractional SDP, its homogenized form, and the
//! surrogate optimum compared with the true gap after the update.
//!
//!     cargo run --release --example inspect_reduced_sdp

use bandgap2d::assembly::Polarization;
use bandgap2d::bands::{assemble_path_families, gap_from_solutions, solve_path};
use bandgap2d::eig::EigOptions;
use bandgap2d::lattice::{build_grid, build_k_path, build_symmetry_map, DielectricDesign};
use bandgap2d::optimizer::{initial_config, InitKind};
use bandgap2d::sdp::{
    build_fractional, charnes_cooper, recover, solve_sdp, strictly_interior_start,
    transport_feasible, SdpOptions,
};
use bandgap2d::subspace::{build_reduced_subspace, reduce_blocks};

fn main() -> bandgap2d::Result<()> {
    let grid = build_grid(16)?;
    let map = build_symmetry_map(&grid);
    let kpath = build_k_path(12)?;
    let pol = Polarization::TM;
    let m = 1;
    let design = initial_config(
        &InitKind::Rods { radius: 0.30 },
        0,
        &grid,
        &map,
        (1.0, 11.4),
    )?;

    let families = assemble_path_families(&grid, &map, &kpath, pol)?;
    let solutions = solve_path(&families, &design, m + 7, &EigOptions::default())?;
    let bands = gap_from_solutions(solutions, pol, m)?;
    println!(
        "incumbent: J = {:.4}%, λl = {:.5} (k#{}), λu = {:.5} (k#{})",
        100.0 * bands.gap_midgap,
        bands.lambda_lower,
        bands.argmax_lower,
        bands.lambda_upper,
        bands.argmin_upper
    );

    let subspace = build_reduced_subspace(&bands, 0.1, 0.1, &design)?;
    println!("\nselected subspace dimensions (a_k, b_k) per path point:");
    for (idx, (a, b)) in subspace.dim_profile().iter().enumerate() {
        println!(
            "  k#{idx:<2} ({:.4}, {:.4}) -> a = {a}, b = {b}",
            kpath.points[idx][0], kpath.points[idx][1]
        );
    }

    let blocks: Vec<_> = families
        .iter()
        .zip(&subspace.per_k)
        .map(|(f, ks)| reduce_blocks(f, ks))
        .collect::<bandgap2d::Result<_>>()?;
    let floor = 1e-6 / bands.lambda_upper;
    let fsdp = build_fractional(&blocks, pol, (1.0, 11.4), floor)?;
    println!(
        "\nfractional SDP: {} variables, {} matrix inequalities",
        fsdp.n_vars,
        fsdp.blocks.len()
    );

    let lsdp = charnes_cooper(&fsdp);
    println!(
        "homogenized: {} variables, {} scalar rows, {} equality",
        lsdp.problem.n_vars,
        lsdp.problem.rows.len(),
        lsdp.problem.eq_lhs.nrows()
    );

    let start = transport_feasible(&fsdp, &strictly_interior_start(&fsdp, &blocks, &design)?)?;
    let sol = solve_sdp(&lsdp, &SdpOptions::default(), Some(&start))?;
    println!(
        "solve: status {}, {} Newton steps, duality gap {:.2e}",
        sol.status, sol.newton_iters, sol.duality_gap
    );
    let recovered = recover(&sol, &fsdp)?;
    println!(
        "surrogate optimum J = {:.4}% at λl = {:.5}, λu = {:.5} (clamp {:.2e})",
        100.0 * recovered.gap_midgap,
        recovered.lambda_lower,
        recovered.lambda_upper,
        recovered.clamp_magnitude
    );

    // fresh eigensolve at the updated design shows the true gap
    let next = DielectricDesign {
        eps: recovered.eps,
        eps_min: 1.0,
        eps_max: 11.4,
    };
    let solutions = solve_path(&families, &next, m + 7, &EigOptions::default())?;
    let after = gap_from_solutions(solutions, pol, m)?;
    println!(
        "true gap at the updated design: J = {:.4}%",
        100.0 * after.gap_midgap
    );
    Ok(())
}
