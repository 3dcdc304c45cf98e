//! The classic square lattice of dielectric rods in air: a robust TM gap
//! between the first two bands. Writes the band diagram and the dielectric
//! layout as SVG/CSV under `out/rods_band_gap/`.
//!
//!     cargo run --release --example rods_band_gap

use bandgap2d::assembly::Polarization;
use bandgap2d::bands::band_diagram;
use bandgap2d::eig::EigOptions;
use bandgap2d::lattice::{build_grid, build_k_path, build_symmetry_map};
use bandgap2d::optimizer::{initial_config, InitKind};
use bandgap2d::report;
use std::path::Path;

fn main() -> bandgap2d::Result<()> {
    let grid = build_grid(32)?;
    let map = build_symmetry_map(&grid);
    let kpath = build_k_path(12)?;
    // GaAs rods (ε = 11.4) of radius 0.19a in air
    let design = initial_config(
        &InitKind::Rods { radius: 0.38 },
        0,
        &grid,
        &map,
        (1.0, 11.4),
    )?;

    let bands = band_diagram(
        &grid,
        &map,
        &design,
        &kpath,
        Polarization::TM,
        1,
        8,
        &EigOptions::default(),
    )?;
    println!(
        "TM gap between bands 1 and 2: {:.2}%  (ω·a/2πc in [{:.4}, {:.4}])",
        100.0 * bands.gap_midgap,
        bandgap2d::bands::normalized_frequency(bands.lambda_lower, report::LATTICE_CONSTANT)?,
        bandgap2d::bands::normalized_frequency(bands.lambda_upper, report::LATTICE_CONSTANT)?,
    );

    let dir = Path::new("out/rods_band_gap");
    std::fs::create_dir_all(dir)?;
    report::write_bands_csv(&dir.join("bands.csv"), &kpath, &bands)?;
    report::write_band_svg(&dir.join("bands.svg"), &kpath, &bands)?;
    report::write_design_csv(&dir.join("design.csv"), &grid, &map, &design)?;
    report::write_design_svg(&dir.join("design.svg"), &grid, &map, &design)?;
    println!("artifacts in {}", dir.display());
    Ok(())
}
