//! Artifact emission: CSV tables, SVG figures, JSON summaries, and the
//! design-file loader.
//!
//! All floating-point output uses 17 significant digits so files round-trip
//! through text exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::bands::{normalized_frequency, BandSolution};
use crate::error::{Error, Result};
use crate::lattice::{DielectricDesign, Grid, KPath, SymmetryMap};
use crate::optimizer::{RunConfig, RunResult};

/// Lattice constant of the unit cell Ω = [-1,1]².
pub const LATTICE_CONSTANT: f64 = 2.0;

/// `cell_row,cell_col,eps` per grid cell, row = y index.
pub fn write_design_csv(
    path: &Path,
    grid: &Grid,
    map: &SymmetryMap,
    design: &DielectricDesign,
) -> Result<()> {
    let field = design.expanded(map)?;
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "cell_row,cell_col,eps")?;
    for cy in 0..grid.n {
        for cx in 0..grid.n {
            writeln!(w, "{cy},{cx},{:.17e}", field[cy * grid.n + cx])?;
        }
    }
    Ok(())
}

/// Load a design file: either one reduced value per line, or a per-cell
/// `cell_row,cell_col,eps` CSV (which must be exactly symmetric).
pub fn load_design_file(path: &Path, map: &SymmetryMap) -> Result<Vec<f64>> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        lines.push(trimmed.to_string());
    }
    if lines
        .first()
        .map(|l| l.starts_with("cell_row"))
        .unwrap_or(false)
    {
        let n_cells = map.orbit_of_cell.len();
        let n = (n_cells as f64).sqrt().round() as usize;
        let mut field = vec![f64::NAN; n_cells];
        for (i, line) in lines.iter().skip(1).enumerate() {
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 3 {
                return Err(Error::invalid(format!(
                    "design CSV row {} has {} fields, expected 3",
                    i + 2,
                    parts.len()
                )));
            }
            let row: usize = parts[0]
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("bad cell_row on data row {}", i + 1)))?;
            let col: usize = parts[1]
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("bad cell_col on data row {}", i + 1)))?;
            let eps: f64 = parts[2]
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("bad eps on data row {}", i + 1)))?;
            if row >= n || col >= n {
                return Err(Error::invalid(format!(
                    "cell ({row}, {col}) outside the {n}x{n} grid"
                )));
            }
            field[row * n + col] = eps;
        }
        if field.iter().any(|v| v.is_nan()) {
            return Err(Error::invalid(format!(
                "design CSV does not cover all {n_cells} cells"
            )));
        }
        // fold onto orbits, demanding symmetry
        let mut reduced = vec![f64::NAN; map.n_eps];
        for (cell, &orbit) in map.orbit_of_cell.iter().enumerate() {
            let v = field[cell];
            if reduced[orbit].is_nan() {
                reduced[orbit] = v;
            } else if (reduced[orbit] - v).abs() > 1e-9 * reduced[orbit].abs().max(1.0) {
                return Err(Error::invalid(format!(
                    "design CSV is not square-symmetric at cell {cell}"
                )));
            }
        }
        Ok(reduced)
    } else {
        let values: Vec<f64> = lines
            .iter()
            .enumerate()
            .map(|(i, l)| {
                l.parse::<f64>()
                    .map_err(|_| Error::invalid(format!("bad value on line {}", i + 1)))
            })
            .collect::<Result<_>>()?;
        if values.len() != map.n_eps {
            return Err(Error::invalid(format!(
                "design file has {} values, expected {}",
                values.len(),
                map.n_eps
            )));
        }
        Ok(values)
    }
}

/// `k_index,k_x,k_y,band,lambda,omega_norm` per path point and band.
pub fn write_bands_csv(path: &Path, kpath: &KPath, bands: &BandSolution) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "k_index,k_x,k_y,band,lambda,omega_norm")?;
    for (idx, sol) in bands.solutions.iter().enumerate() {
        let k = kpath.points[idx];
        for (band, &lambda) in sol.eigenvalues.iter().enumerate() {
            let omega = normalized_frequency(lambda.max(0.0), LATTICE_CONSTANT)?;
            writeln!(
                w,
                "{idx},{:.17e},{:.17e},{},{:.17e},{:.17e}",
                k[0],
                k[1],
                band + 1,
                lambda,
                omega
            )?;
        }
    }
    Ok(())
}

/// Band diagram: one polyline per band over cumulative arc length, corner
/// ticks at Γ, X, M, Γ, and a shaded strip over the gap when it is open.
pub fn write_band_svg(path: &Path, kpath: &KPath, bands: &BandSolution) -> Result<()> {
    let (width, height) = (720.0, 540.0);
    let (ml, mr, mt, mb) = (64.0, 16.0, 16.0, 40.0);
    let arcs = kpath.cumulative_arc();
    let total = *arcs.last().unwrap();
    let n_k = kpath.n_k();
    let n_bands = bands.solutions[0].eigenvalues.len();

    let mut omega_max: f64 = 0.0;
    for sol in &bands.solutions {
        for &l in &sol.eigenvalues {
            omega_max = omega_max.max(normalized_frequency(l.max(0.0), LATTICE_CONSTANT)?);
        }
    }
    omega_max *= 1.05;
    let x_of = |arc: f64| ml + (width - ml - mr) * arc / total;
    let y_of = |omega: f64| height - mb - (height - mb - mt) * omega / omega_max;

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {width} {height}\" \
         font-family=\"sans-serif\" font-size=\"13\">\n"
    ));
    s.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n"
    ));

    // shaded gap strip
    if bands.gap_midgap > 0.0 {
        let y_hi = y_of(normalized_frequency(bands.lambda_upper, LATTICE_CONSTANT)?);
        let y_lo = y_of(normalized_frequency(bands.lambda_lower, LATTICE_CONSTANT)?);
        s.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#f5c15c\" opacity=\"0.45\"/>\n",
            x_of(0.0),
            y_hi,
            x_of(total) - x_of(0.0),
            y_lo - y_hi
        ));
    }

    // corner gridlines and labels (path closes back at Γ)
    let mut ticks: Vec<(f64, &str)> = bands
        .solutions
        .iter()
        .enumerate()
        .filter_map(|(i, _)| {
            kpath
                .corners
                .iter()
                .find(|(idx, _)| *idx == i)
                .map(|(_, c)| (arcs[i], c.label()))
        })
        .collect();
    ticks.push((total, "Γ"));
    for (arc, label) in &ticks {
        let x = x_of(*arc);
        s.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{mt}\" x2=\"{x}\" y2=\"{}\" stroke=\"#999\" stroke-width=\"0.7\"/>\n",
            height - mb
        ));
        s.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" text-anchor=\"middle\">{label}</text>\n",
            height - mb + 18.0
        ));
    }

    // y-axis ticks
    for t in 0..=5 {
        let omega = omega_max * t as f64 / 5.0;
        let y = y_of(omega);
        s.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#999\" stroke-width=\"0.7\"/>\n",
            ml - 5.0,
            ml
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{omega:.2}</text>\n",
            ml - 9.0,
            y + 4.0
        ));
    }
    s.push_str(&format!(
        "<text x=\"16\" y=\"{}\" transform=\"rotate(-90 16 {})\" text-anchor=\"middle\">ωa/2πc</text>\n",
        (height - mb + mt) / 2.0,
        (height - mb + mt) / 2.0
    ));

    // bands as polylines, closing the loop back to the first path point
    for band in 0..n_bands {
        let mut pts = String::new();
        for (i, sol) in bands.solutions.iter().enumerate() {
            let omega = normalized_frequency(sol.eigenvalues[band].max(0.0), LATTICE_CONSTANT)?;
            pts.push_str(&format!("{:.2},{:.2} ", x_of(arcs[i]), y_of(omega)));
        }
        let omega0 = normalized_frequency(
            bands.solutions[0].eigenvalues[band].max(0.0),
            LATTICE_CONSTANT,
        )?;
        pts.push_str(&format!("{:.2},{:.2}", x_of(total), y_of(omega0)));
        let _ = n_k;
        s.push_str(&format!(
            "<polyline points=\"{pts}\" fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"1.6\"/>\n"
        ));
    }

    // frame
    s.push_str(&format!(
        "<rect x=\"{ml}\" y=\"{mt}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        width - ml - mr,
        height - mt - mb
    ));
    s.push_str("</svg>\n");
    std::fs::write(path, s)?;
    Ok(())
}

/// Dielectric field as grayscale cells; dark marks high ε.
pub fn write_design_svg(
    path: &Path,
    grid: &Grid,
    map: &SymmetryMap,
    design: &DielectricDesign,
) -> Result<()> {
    let field = design.expanded(map)?;
    let n = grid.n;
    let cell = 12usize;
    let size = n * cell;
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {size} {size}\" \
         shape-rendering=\"crispEdges\">\n"
    ));
    let span = (design.eps_max - design.eps_min).max(1e-300);
    for cy in 0..n {
        for cx in 0..n {
            let t = (field[cy * n + cx] - design.eps_min) / span;
            let v = (235.0 - 215.0 * t).round() as u8;
            // SVG y grows downward; put cell_row 0 at the bottom
            let y = (n - 1 - cy) * cell;
            s.push_str(&format!(
                "<rect x=\"{}\" y=\"{y}\" width=\"{cell}\" height=\"{cell}\" fill=\"rgb({v},{v},{v})\"/>\n",
                cx * cell
            ));
        }
    }
    s.push_str("</svg>\n");
    std::fs::write(path, s)?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct GapSummary {
    pub polarization: String,
    pub n: usize,
    pub n_k: usize,
    pub m: usize,
    pub lambda_lower: f64,
    pub lambda_upper: f64,
    pub gap_midgap: f64,
    pub omega_lower: f64,
    pub omega_upper: f64,
}

impl GapSummary {
    pub fn from_bands(bands: &BandSolution, n: usize, n_k: usize) -> Result<Self> {
        Ok(Self {
            polarization: bands.polarization.to_string(),
            n,
            n_k,
            m: bands.band_index,
            lambda_lower: bands.lambda_lower,
            lambda_upper: bands.lambda_upper,
            gap_midgap: bands.gap_midgap,
            omega_lower: normalized_frequency(bands.lambda_lower, LATTICE_CONSTANT)?,
            omega_upper: normalized_frequency(bands.lambda_upper, LATTICE_CONSTANT)?,
        })
    }
}

pub fn write_summary_json(path: &Path, summary: &GapSummary) -> Result<()> {
    let text = serde_json::to_string_pretty(summary).map_err(|e| Error::Internal(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Flat echo of the run configuration, mirroring the config-file keys.
pub fn config_echo(cfg: &RunConfig) -> serde_json::Value {
    use crate::optimizer::InitKind;
    let (kind, radius, thickness, file) = match &cfg.init {
        InitKind::UniformRandom => ("uniform-random".to_string(), None, None, None),
        InitKind::Rods { radius } => ("rods".to_string(), Some(*radius), None, None),
        InitKind::Veins { thickness } => ("veins".to_string(), None, Some(*thickness), None),
        InitKind::File(p) => (
            "file".to_string(),
            None,
            None,
            Some(p.display().to_string()),
        ),
    };
    serde_json::json!({
        "lattice.n": cfg.n,
        "polarization": cfg.polarization.to_string(),
        "band.m": cfg.band_index,
        "material.eps_min": cfg.eps_min,
        "material.eps_max": cfg.eps_max,
        "kpath.n_k": cfg.n_k,
        "subspace.r_l": cfg.r_l,
        "subspace.r_u": cfg.r_u,
        "outer.tol": cfg.eps_tol,
        "outer.move_limit": cfg.move_limit,
        "outer.max_iter": cfg.max_outer,
        "init.kind": kind,
        "init.seed": cfg.seed,
        "init.radius": radius,
        "init.thickness": thickness,
        "init.file": file,
        "restarts": cfg.restarts,
        "solver.tol": cfg.solver_tol,
        "output.dir": cfg.output_dir.as_ref().map(|p| p.display().to_string()),
        "output.snapshots": cfg.snapshots,
    })
}

/// Full run record; see `docs/run_schema.json` for the field contract.
/// `timing` carries wall-clock data and is the only part that varies
/// between identically-configured runs.
pub fn run_report_json(cfg: &RunConfig, run: &RunResult, wall_secs: f64) -> serde_json::Value {
    let history: Vec<serde_json::Value> = run
        .history
        .iter()
        .map(|rec| {
            serde_json::json!({
                "iter": rec.iter,
                "j_true": rec.j_true,
                "lambda_lower": rec.lambda_lower,
                "lambda_upper": rec.lambda_upper,
                "dims": rec.dims,
                "sdp_status": rec.sdp_status,
                "sdp_objective": rec.sdp_objective,
                "step_norm": rec.step_norm,
                "clamp_magnitude": rec.clamp_magnitude,
                "timing": { "wall_secs": rec.wall_secs },
            })
        })
        .collect();
    serde_json::json!({
        "config": config_echo(cfg),
        "seed": run.seed,
        "initial_j": run.initial_j,
        "termination": run.termination.to_string(),
        "history": history,
        "final": {
            "gap_midgap": run.final_j(),
            "lambda_lower": run.final_bands.lambda_lower,
            "lambda_upper": run.final_bands.lambda_upper,
        },
        "timing": { "wall_secs": wall_secs },
    })
}

pub fn write_run_json(path: &Path, report: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::Internal(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_grid, build_symmetry_map};

    #[test]
    fn design_csv_round_trips_through_the_loader() {
        let dir = std::env::temp_dir().join("bandgap2d_report_test");
        std::fs::create_dir_all(&dir).unwrap();
        let grid = build_grid(8).unwrap();
        let map = build_symmetry_map(&grid);
        let design = DielectricDesign {
            eps: (0..map.n_eps).map(|i| 1.0 + (i as f64) * 0.7).collect(),
            eps_min: 1.0,
            eps_max: 1.0 + map.n_eps as f64,
        };
        let path = dir.join("design.csv");
        write_design_csv(&path, &grid, &map, &design).unwrap();
        let loaded = load_design_file(&path, &map).unwrap();
        assert_eq!(loaded, design.eps);

        // reduced single-column form
        let reduced_path = dir.join("reduced.txt");
        let body: String = design.eps.iter().map(|v| format!("{v:.17e}\n")).collect();
        std::fs::write(&reduced_path, body).unwrap();
        let loaded = load_design_file(&reduced_path, &map).unwrap();
        assert_eq!(loaded, design.eps);

        // wrong length is rejected
        std::fs::write(&reduced_path, "1.0\n2.0\n").unwrap();
        assert!(load_design_file(&reduced_path, &map).is_err());

        // asymmetric per-cell file is rejected
        let mut bad = String::from("cell_row,cell_col,eps\n");
        for cy in 0..8 {
            for cx in 0..8 {
                bad.push_str(&format!("{cy},{cx},{}\n", (cy * 8 + cx) as f64));
            }
        }
        let bad_path = dir.join("bad.csv");
        std::fs::write(&bad_path, bad).unwrap();
        assert!(load_design_file(&bad_path, &map).is_err());
    }
}
