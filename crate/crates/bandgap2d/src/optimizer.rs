//! Outer iteration: freeze subspaces at the incumbent, build and solve the
//! reduced fractional SDP, update the incumbent, repeat to convergence.
//! Also initial-configuration generation and restart management.
//!
//! Each pass performs
//!
//! 1. eigensolves at the incumbent over every path point,
//! 2. subspace dimension selection and eigenvector extraction,
//! 3. reduced-block projection and fractional SDP assembly,
//! 4. one homogenized interior-point solve,
//! 5. the unconditional incumbent update with the convergence test
//!    `‖x* - x̂‖∞ / max(1, ‖x̂‖∞) ≤ ε_tol`.
//!
//! The update uses the clamped (admissible) recovered design so every
//! incumbent stays inside the box. The gap ratio recorded per iteration is
//! the true value from the fresh eigensolve at that iterate, not the SDP
//! surrogate; because the subspaces are approximations the true value may
//! dip between iterations, and the loop does not backtrack.

use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::assembly::Polarization;
use crate::bands::{assemble_path_families, gap_from_solutions, solve_path, BandSolution};
use crate::eig::EigOptions;
use crate::error::{Error, Result};
use crate::lattice::{
    build_grid, build_k_path, build_symmetry_map, DielectricDesign, Grid, SymmetryMap,
};
use crate::sdp::{
    build_fractional, charnes_cooper, incumbent_vector, recover, solve_sdp,
    strictly_interior_start, transport_feasible, SdpOptions,
};
use crate::subspace::{build_reduced_subspace, reduce_blocks, ReducedSubspace};

/// Initial dielectric layout.
#[derive(Debug, Clone, PartialEq)]
pub enum InitKind {
    /// Independent uniform values per reduced variable.
    UniformRandom,
    /// High-ε disk centered in the cell; radius in units of the half-cell.
    Rods { radius: f64 },
    /// High-ε orthogonal skeleton; half-width in units of the half-cell.
    Veins { thickness: f64 },
    /// Reduced vector or per-cell CSV loaded from disk.
    File(PathBuf),
}

pub const DEFAULT_ROD_RADIUS: f64 = 0.38;
pub const DEFAULT_VEIN_THICKNESS: f64 = 0.25;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub n: usize,
    pub polarization: Polarization,
    /// 1-based band index m; the gap maximized is between m and m+1.
    pub band_index: usize,
    pub eps_min: f64,
    pub eps_max: f64,
    pub n_k: usize,
    pub r_l: f64,
    pub r_u: f64,
    /// Relative infinity-norm step tolerance of the outer loop.
    pub eps_tol: f64,
    pub max_outer: usize,
    pub init: InitKind,
    pub seed: u64,
    pub restarts: usize,
    pub solver_tol: f64,
    /// Optional cap on the per-iteration change of each material variable,
    /// as a fraction of the box width. Off by default: the incumbent update
    /// is unconditional.
    pub move_limit: Option<f64>,
    pub eig: EigOptions,
    pub output_dir: Option<PathBuf>,
    pub snapshots: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 32,
            polarization: Polarization::TM,
            band_index: 1,
            eps_min: 1.0,
            eps_max: 11.4,
            n_k: 12,
            r_l: 0.1,
            r_u: 0.1,
            eps_tol: 1e-4,
            max_outer: 50,
            init: InitKind::UniformRandom,
            seed: 0,
            restarts: 1,
            solver_tol: 1e-8,
            move_limit: None,
            eig: EigOptions::default(),
            output_dir: None,
            snapshots: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.n % 2 != 0 {
            return Err(Error::invalid("lattice.n must be an even integer >= 2"));
        }
        if self.band_index < 1 {
            return Err(Error::invalid("band.m must be >= 1"));
        }
        if !(self.eps_min > 0.0 && self.eps_min < self.eps_max) {
            return Err(Error::invalid("need 0 < eps_min < eps_max"));
        }
        if self.n_k < 3 {
            return Err(Error::invalid("kpath.n_k must be >= 3"));
        }
        if !(self.r_l > 0.0 && self.r_u > 0.0) {
            return Err(Error::invalid("subspace windows r_l, r_u must be positive"));
        }
        if !(self.eps_tol > 0.0) {
            return Err(Error::invalid("outer.tol must be positive"));
        }
        if self.max_outer < 1 {
            return Err(Error::invalid("outer.max_iter must be >= 1"));
        }
        if self.restarts < 1 {
            return Err(Error::invalid("restarts must be >= 1"));
        }
        if !(self.solver_tol > 0.0) {
            return Err(Error::invalid("solver.tol must be positive"));
        }
        if let Some(limit) = self.move_limit {
            if !(limit > 0.0 && limit <= 1.0) {
                return Err(Error::invalid("outer.move_limit must lie in (0, 1]"));
            }
        }
        Ok(())
    }
}

/// Generate the starting design for a run.
pub fn initial_config(
    kind: &InitKind,
    seed: u64,
    grid: &Grid,
    map: &SymmetryMap,
    bounds: (f64, f64),
) -> Result<DielectricDesign> {
    let (eps_min, eps_max) = bounds;
    let eps = match kind {
        InitKind::UniformRandom => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..map.n_eps)
                .map(|_| rng.random_range(eps_min..eps_max))
                .collect()
        }
        InitKind::Rods { radius } => {
            orbit_indicator(grid, map, bounds, |x, y| x * x + y * y <= radius * radius)
        }
        InitKind::Veins { thickness } => orbit_indicator(grid, map, bounds, |x, y| {
            x.abs() <= *thickness || y.abs() <= *thickness
        }),
        InitKind::File(path) => crate::report::load_design_file(path, map)?,
    };
    let design = DielectricDesign {
        eps,
        eps_min,
        eps_max,
    };
    design.validate(map)?;
    Ok(design)
}

/// Evaluate a square-symmetric indicator at each orbit representative.
fn orbit_indicator(
    grid: &Grid,
    map: &SymmetryMap,
    (eps_min, eps_max): (f64, f64),
    inside: impl Fn(f64, f64) -> bool,
) -> Vec<f64> {
    map.cells_of_orbit
        .iter()
        .map(|cells| {
            let cell = cells[0];
            let (x, y) = grid.cell_center(cell % grid.n, cell / grid.n);
            if inside(x, y) {
                eps_max
            } else {
                eps_min
            }
        })
        .collect()
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// Gap-midgap ratio of the incumbent, recomputed from the eigensolve.
    pub j_true: f64,
    pub lambda_lower: f64,
    pub lambda_upper: f64,
    /// (a_k, b_k) per path point.
    pub dims: Vec<(usize, usize)>,
    pub sdp_status: String,
    /// Surrogate optimum reported by the SDP.
    pub sdp_objective: f64,
    pub step_norm: f64,
    pub clamp_magnitude: f64,
    /// Wall-clock seconds; excluded from determinism comparisons.
    pub wall_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub enum TerminationReason {
    Converged,
    MaxOuter,
    SolverFailure,
    EigenFailure,
}

impl std::fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TerminationReason::Converged => "converged",
            TerminationReason::MaxOuter => "max_outer",
            TerminationReason::SolverFailure => "solver_failure",
            TerminationReason::EigenFailure => "eigen_failure",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub seed: u64,
    pub history: Vec<IterationRecord>,
    pub initial_j: f64,
    pub final_design: DielectricDesign,
    /// Fresh band solution at the final design, decoupled from loop state.
    pub final_bands: BandSolution,
    pub termination: TerminationReason,
}

impl RunResult {
    pub fn final_j(&self) -> f64 {
        self.final_bands.gap_midgap
    }

    /// Deterministic digest of the iteration history with timing excluded,
    /// for reproducibility checks.
    pub fn history_fingerprint(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        for rec in &self.history {
            write!(
                s,
                "{}|{:.17e}|{:.17e}|{:.17e}|{:?}|{}|{:.17e}|{:.17e}|{:.17e};",
                rec.iter,
                rec.j_true,
                rec.lambda_lower,
                rec.lambda_upper,
                rec.dims,
                rec.sdp_status,
                rec.sdp_objective,
                rec.step_norm,
                rec.clamp_magnitude
            )
            .unwrap();
        }
        write!(s, "term={}", self.termination).unwrap();
        s
    }
}

/// Eigensolve depth: enough bands above the gap for the window selection
/// plus verification headroom.
fn initial_band_count(m: usize) -> usize {
    m + 7
}

struct IncumbentState {
    bands: BandSolution,
    subspace: ReducedSubspace,
}

/// Solve the path at the incumbent, growing the band count until the upper
/// selection window is verifiable (or the problem size caps it).
fn analyze_incumbent(
    families: &[crate::assembly::AffineOperatorFamily],
    design: &DielectricDesign,
    config: &RunConfig,
    n_bands: &mut usize,
) -> Result<IncumbentState> {
    let dof = families[0].dof_count;
    loop {
        let solutions = solve_path(families, design, (*n_bands).min(dof), &config.eig)?;
        let bands = gap_from_solutions(solutions, config.polarization, config.band_index)?;
        let subspace = build_reduced_subspace(&bands, config.r_l, config.r_u, design)?;
        if subspace.any_b_saturated() && *n_bands < dof.min(config.band_index + 64) {
            *n_bands = (*n_bands * 2).min(dof.min(config.band_index + 64));
            continue;
        }
        if subspace.any_b_saturated() {
            log::warn!(
                "upper selection window still open at {} computed bands; proceeding with the saturated subspace",
                *n_bands
            );
        }
        return Ok(IncumbentState { bands, subspace });
    }
}

/// Run the outer iteration from one starting design.
pub fn optimize(config: &RunConfig) -> Result<RunResult> {
    config.validate()?;
    let grid = build_grid(config.n)?;
    let map = build_symmetry_map(&grid);
    let kpath = build_k_path(config.n_k)?;
    let design0 = initial_config(
        &config.init,
        config.seed,
        &grid,
        &map,
        (config.eps_min, config.eps_max),
    )?;
    let families = assemble_path_families(&grid, &map, &kpath, config.polarization)?;

    let mut design = design0;
    let mut n_bands = initial_band_count(config.band_index);
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut best: Option<(f64, DielectricDesign)> = None;
    let mut termination = TerminationReason::MaxOuter;
    let sdp_opts = SdpOptions {
        tol: config.solver_tol,
    };

    for iter in 1..=config.max_outer {
        let t0 = Instant::now();
        let state = match analyze_incumbent(&families, &design, config, &mut n_bands) {
            Ok(s) => s,
            Err(err) => {
                log::error!("eigensolve failed at iteration {iter}: {err}");
                termination = TerminationReason::EigenFailure;
                break;
            }
        };
        let j_true = state.bands.gap_midgap;
        if best.as_ref().map_or(true, |(bj, _)| j_true > *bj) {
            best = Some((j_true, design.clone()));
        }

        if config.snapshots {
            if let Some(dir) = &config.output_dir {
                let snap = dir.join(format!("iter_{iter:04}"));
                std::fs::create_dir_all(&snap)?;
                crate::report::write_design_csv(&snap.join("design.csv"), &grid, &map, &design)?;
                crate::report::write_bands_csv(&snap.join("bands.csv"), &kpath, &state.bands)?;
                log::info!(
                    "iter {iter}: J = {:.6} ({:.2}%)  written to {}",
                    j_true,
                    100.0 * j_true,
                    snap.display()
                );
            }
        }

        // reduced blocks and the fractional SDP at the frozen subspaces
        let blocks: Vec<_> = families
            .par_iter()
            .zip(&state.subspace.per_k)
            .map(|(family, ks)| reduce_blocks(family, ks))
            .collect::<Result<_>>()?;
        let edge_floor = match config.polarization {
            Polarization::TE => 1e-6 * state.bands.lambda_lower,
            Polarization::TM => 1e-6 / state.bands.lambda_upper,
        };
        let fsdp = build_fractional(
            &blocks,
            config.polarization,
            (config.eps_min, config.eps_max),
            edge_floor,
        )?;
        let x_hat = incumbent_vector(
            &fsdp,
            &design,
            state.bands.lambda_lower,
            state.bands.lambda_upper,
        );
        let sdp_step = strictly_interior_start(&fsdp, &blocks, &design)
            .and_then(|x| transport_feasible(&fsdp, &x))
            .and_then(|start| {
                let lsdp = charnes_cooper(&fsdp);
                solve_sdp(&lsdp, &sdp_opts, Some(&start))
            });
        let (status, objective, recovered) = match sdp_step {
            Ok(sol) => {
                let status = sol.status;
                let objective = sol.objective;
                match recover(&sol, &fsdp) {
                    Ok(r) => (status, objective, Some(r)),
                    Err(err) => {
                        log::error!("recovery failed at iteration {iter}: {err}");
                        (status, objective, None)
                    }
                }
            }
            Err(err) => {
                log::error!("SDP step failed at iteration {iter}: {err}");
                (conic::SolveStatus::NumericalFailure, f64::NAN, None)
            }
        };
        let Some(recovered) = recovered else {
            history.push(IterationRecord {
                iter,
                j_true,
                lambda_lower: state.bands.lambda_lower,
                lambda_upper: state.bands.lambda_upper,
                dims: state.subspace.dim_profile(),
                sdp_status: status.to_string(),
                sdp_objective: objective,
                step_norm: f64::NAN,
                clamp_magnitude: f64::NAN,
                wall_secs: t0.elapsed().as_secs_f64(),
            });
            termination = TerminationReason::SolverFailure;
            break;
        };

        let mut next_eps = recovered.eps.clone();
        if let Some(limit) = config.move_limit {
            let cap = limit * (config.eps_max - config.eps_min);
            for (e_next, &e_hat) in next_eps.iter_mut().zip(&design.eps) {
                // trust region intersected with the admissible box
                let lo = (e_hat - cap).max(config.eps_min);
                let hi = (e_hat + cap).min(config.eps_max);
                *e_next = e_next.clamp(lo, hi);
            }
        }
        let next = DielectricDesign {
            eps: next_eps,
            eps_min: config.eps_min,
            eps_max: config.eps_max,
        };
        let x_next = incumbent_vector(&fsdp, &next, recovered.lambda_lower, recovered.lambda_upper);
        let step_norm = (&x_next - &x_hat).amax() / x_hat.amax().max(1.0);

        history.push(IterationRecord {
            iter,
            j_true,
            lambda_lower: state.bands.lambda_lower,
            lambda_upper: state.bands.lambda_upper,
            dims: state.subspace.dim_profile(),
            sdp_status: status.to_string(),
            sdp_objective: objective,
            step_norm,
            clamp_magnitude: recovered.clamp_magnitude,
            wall_secs: t0.elapsed().as_secs_f64(),
        });
        log::debug!(
            "iter {iter}: J = {:.6}, surrogate = {:.6}, step = {:.3e}",
            j_true,
            objective,
            step_norm
        );

        design = next;
        if step_norm <= config.eps_tol {
            termination = TerminationReason::Converged;
            break;
        }
    }

    // final report from a fresh eigensolve, decoupled from the loop
    let final_design = match termination {
        TerminationReason::SolverFailure | TerminationReason::EigenFailure => {
            best.map(|(_, d)| d).unwrap_or(design)
        }
        _ => design,
    };
    let solutions = solve_path(&families, &final_design, n_bands, &config.eig)?;
    let final_bands = gap_from_solutions(solutions, config.polarization, config.band_index)?;
    let initial_j = history.first().map(|r| r.j_true).unwrap_or(f64::NAN);
    Ok(RunResult {
        seed: config.seed,
        history,
        initial_j,
        final_design,
        final_bands,
        termination,
    })
}

/// Analyze the initial design and dump its homogenized SDP, for replay
/// against external solvers.
pub fn initial_sdp_dump(config: &RunConfig, path: &std::path::Path) -> Result<()> {
    config.validate()?;
    let grid = build_grid(config.n)?;
    let map = build_symmetry_map(&grid);
    let kpath = build_k_path(config.n_k)?;
    let design = initial_config(
        &config.init,
        config.seed,
        &grid,
        &map,
        (config.eps_min, config.eps_max),
    )?;
    let families = assemble_path_families(&grid, &map, &kpath, config.polarization)?;
    let mut n_bands = initial_band_count(config.band_index);
    let state = analyze_incumbent(&families, &design, config, &mut n_bands)?;
    let blocks: Vec<_> = families
        .iter()
        .zip(&state.subspace.per_k)
        .map(|(family, ks)| reduce_blocks(family, ks))
        .collect::<Result<_>>()?;
    let edge_floor = match config.polarization {
        Polarization::TE => 1e-6 * state.bands.lambda_lower,
        Polarization::TM => 1e-6 / state.bands.lambda_upper,
    };
    let fsdp = build_fractional(
        &blocks,
        config.polarization,
        (config.eps_min, config.eps_max),
        edge_floor,
    )?;
    let lsdp = charnes_cooper(&fsdp);
    let file = std::fs::File::create(path)?;
    crate::sdp::dump_linear_sdp(&lsdp, std::io::BufWriter::new(file))?;
    Ok(())
}

#[derive(Debug)]
pub struct MultiRestartResult {
    /// One entry per seed, in order; failures recorded, not fatal.
    pub runs: Vec<std::result::Result<RunResult, String>>,
    /// Index of the successful run with the largest final gap ratio.
    pub best: usize,
}

impl MultiRestartResult {
    pub fn best_run(&self) -> &RunResult {
        self.runs[self.best]
            .as_ref()
            .expect("best index points at a success")
    }
}

/// Repeat the optimization from seeds `seed, seed+1, ...` and keep the best
/// final gap ratio.
pub fn multi_restart(config: &RunConfig, restarts: usize) -> Result<MultiRestartResult> {
    if restarts < 1 {
        return Err(Error::invalid("restarts must be >= 1"));
    }
    let mut runs = Vec::with_capacity(restarts);
    for offset in 0..restarts {
        let mut cfg = config.clone();
        cfg.seed = config.seed + offset as u64;
        // per-restart snapshots would collide in one directory
        if restarts > 1 {
            if let Some(dir) = &config.output_dir {
                cfg.output_dir = Some(dir.join(format!("seed_{}", cfg.seed)));
                if cfg.snapshots {
                    std::fs::create_dir_all(cfg.output_dir.as_ref().unwrap())?;
                }
            }
        }
        log::info!("restart {} of {restarts} (seed {})", offset + 1, cfg.seed);
        match optimize(&cfg) {
            Ok(run) => runs.push(Ok(run)),
            Err(err) => runs.push(Err(err.to_string())),
        }
    }
    let best = runs
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.as_ref().ok().map(|run| (i, run.final_j())))
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Solver("every restart failed".to_string()))?;
    Ok(MultiRestartResult { runs, best })
}
