//! Batch front end: `bands` computes a band diagram for a configured
//! design, `optimize` runs the gap maximization, `sweep` runs seeded
//! restarts and reports the best. Exit codes: 0 success, 1 configuration
//! error, 2 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{ArgAction, Parser, Subcommand};

use bandgap2d::assembly::evaluate;
use bandgap2d::bands::{assemble_path_families, band_diagram};
use bandgap2d::config::ConfigDraft;
use bandgap2d::error::Error;
use bandgap2d::lattice::{build_grid, build_k_path, build_symmetry_map};
use bandgap2d::optimizer::{
    initial_config, initial_sdp_dump, multi_restart, optimize, RunConfig, RunResult,
    TerminationReason,
};
use bandgap2d::report;

#[derive(Parser)]
#[command(
    name = "bandgap2d",
    about = "Photonic band gap analysis and maximization for 2D square lattices",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Increase log verbosity (repeatable).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    /// Only log errors.
    #[arg(short, long, global = true)]
    quiet: bool,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Path to a `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Inline override `key=value`, applied after the file (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Band diagram and gap summary of a configured design.
    Bands {
        #[command(flatten)]
        common: CommonArgs,
        /// Also dump the evaluated operators as triplet text files.
        #[arg(long)]
        dump_matrices: bool,
    },
    /// Maximize the gap-midgap ratio from the configured start.
    Optimize {
        #[command(flatten)]
        common: CommonArgs,
        /// Dump the first homogenized SDP for replay against other solvers.
        #[arg(long)]
        dump_sdp: bool,
    },
    /// Run the configured number of seeded restarts and keep the best.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let filter = if cli.quiet {
        "error"
    } else {
        match cli.verbose {
            0 => "info",
            1 => "debug",
            _ => "trace",
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(filter))
        .format_timestamp(None)
        .init();

    let result = match &cli.command {
        Command::Bands {
            common,
            dump_matrices,
        } => run_bands(common, *dump_matrices),
        Command::Optimize { common, dump_sdp } => run_optimize(common, *dump_sdp),
        Command::Sweep { common } => run_sweep(common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            log::error!("{err}");
            match err {
                Error::Config { .. } | Error::InvalidArgument(_) | Error::Io(_) => {
                    ExitCode::from(1)
                }
                _ => ExitCode::from(2),
            }
        }
    }
}

/// Parse the config file plus overrides; config problems map to exit 1.
fn load_config(common: &CommonArgs) -> Result<RunConfig, Error> {
    let mut draft = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
                line: 0,
                key: path.display().to_string(),
                message: format!("cannot read config: {e}"),
            })?;
            ConfigDraft::from_text(&text)?
        }
        None => ConfigDraft::default(),
    };
    for assignment in &common.set {
        let Some((key, value)) = assignment.split_once('=') else {
            return Err(Error::Config {
                line: 0,
                key: assignment.clone(),
                message: "override must look like key=value".to_string(),
            });
        };
        draft.set(key.trim(), value.trim(), 0)?;
    }
    if let Some(out) = &common.out {
        draft.output_dir(out.clone());
    }
    draft.build()
}

fn output_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn run_bands(common: &CommonArgs, dump_matrices: bool) -> Result<(), Error> {
    let cfg = load_config(common)?;
    let grid = build_grid(cfg.n)?;
    let map = build_symmetry_map(&grid);
    let kpath = build_k_path(cfg.n_k)?;
    let design = initial_config(&cfg.init, cfg.seed, &grid, &map, (cfg.eps_min, cfg.eps_max))?;

    let t0 = Instant::now();
    let n_bands = cfg.band_index + 7;
    let bands = band_diagram(
        &grid,
        &map,
        &design,
        &kpath,
        cfg.polarization,
        cfg.band_index,
        n_bands,
        &cfg.eig,
    )?;
    log::info!(
        "{} bands at {} path points in {:.2?}: J = {:.4}%",
        n_bands,
        kpath.n_k(),
        t0.elapsed(),
        100.0 * bands.gap_midgap
    );

    let dir = output_dir(&cfg);
    std::fs::create_dir_all(&dir)?;
    report::write_bands_csv(&dir.join("bands.csv"), &kpath, &bands)?;
    report::write_design_csv(&dir.join("design.csv"), &grid, &map, &design)?;
    report::write_band_svg(&dir.join("bands.svg"), &kpath, &bands)?;
    report::write_design_svg(&dir.join("design.svg"), &grid, &map, &design)?;
    let summary = report::GapSummary::from_bands(&bands, cfg.n, cfg.n_k)?;
    report::write_summary_json(&dir.join("summary.json"), &summary)?;

    if dump_matrices {
        let mdir = dir.join("matrices");
        std::fs::create_dir_all(&mdir)?;
        let families = assemble_path_families(&grid, &map, &kpath, cfg.polarization)?;
        for (idx, family) in families.iter().enumerate() {
            let (a, m) = evaluate(family, &design)?;
            let mut fa = std::fs::File::create(mdir.join(format!("k{idx:02}_stiffness.txt")))?;
            a.dump_triplets(&mut fa)?;
            let mut fm = std::fs::File::create(mdir.join(format!("k{idx:02}_mass.txt")))?;
            m.dump_triplets(&mut fm)?;
        }
        log::info!("operator triplets written to {}", mdir.display());
    }
    log::info!("artifacts written to {}", dir.display());
    Ok(())
}

fn write_run_artifacts(
    dir: &Path,
    cfg: &RunConfig,
    run: &RunResult,
    wall_secs: f64,
) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    let grid = build_grid(cfg.n)?;
    let map = build_symmetry_map(&grid);
    let kpath = build_k_path(cfg.n_k)?;
    report::write_run_json(
        &dir.join("run.json"),
        &report::run_report_json(cfg, run, wall_secs),
    )?;
    report::write_design_csv(&dir.join("design.csv"), &grid, &map, &run.final_design)?;
    report::write_design_svg(&dir.join("design.svg"), &grid, &map, &run.final_design)?;
    report::write_bands_csv(&dir.join("bands.csv"), &kpath, &run.final_bands)?;
    report::write_band_svg(&dir.join("bands.svg"), &kpath, &run.final_bands)?;
    let summary = report::GapSummary::from_bands(&run.final_bands, cfg.n, cfg.n_k)?;
    report::write_summary_json(&dir.join("summary.json"), &summary)?;
    Ok(())
}

fn run_optimize(common: &CommonArgs, dump_sdp: bool) -> Result<(), Error> {
    let mut cfg = load_config(common)?;
    let dir = output_dir(&cfg);
    std::fs::create_dir_all(&dir)?;
    cfg.output_dir = Some(dir.clone());

    if dump_sdp {
        initial_sdp_dump(&cfg, &dir.join("sdp_dump.txt"))?;
        log::info!(
            "homogenized SDP dumped to {}",
            dir.join("sdp_dump.txt").display()
        );
    }

    let t0 = Instant::now();
    let (best, all): (RunResult, Vec<RunResult>) = if cfg.restarts > 1 {
        let multi = multi_restart(&cfg, cfg.restarts)?;
        let best = multi.best_run().clone();
        let all = multi.runs.into_iter().filter_map(|r| r.ok()).collect();
        (best, all)
    } else {
        let run = optimize(&cfg)?;
        (run.clone(), vec![run])
    };
    let wall = t0.elapsed().as_secs_f64();

    write_run_artifacts(&dir, &cfg, &best, wall)?;
    if all.len() > 1 {
        let per_seed: Vec<serde_json::Value> = all
            .iter()
            .map(|r| {
                serde_json::json!({
                    "seed": r.seed,
                    "final_j": r.final_j(),
                    "initial_j": r.initial_j,
                    "termination": r.termination.to_string(),
                })
            })
            .collect();
        report::write_run_json(
            &dir.join("runs.json"),
            &serde_json::json!({ "best_seed": best.seed, "runs": per_seed }),
        )?;
    }
    log::info!(
        "{}: J {:.4}% -> {:.4}% after {} iterations ({:.1}s); artifacts in {}",
        best.termination,
        100.0 * best.initial_j,
        100.0 * best.final_j(),
        best.history.len(),
        wall,
        dir.display()
    );
    match best.termination {
        TerminationReason::SolverFailure | TerminationReason::EigenFailure => Err(Error::Solver(
            "optimization stopped early; best-so-far artifacts were written".to_string(),
        )),
        _ => Ok(()),
    }
}

fn run_sweep(common: &CommonArgs) -> Result<(), Error> {
    let mut cfg = load_config(common)?;
    let dir = output_dir(&cfg);
    std::fs::create_dir_all(&dir)?;
    cfg.output_dir = Some(dir.clone());

    let t0 = Instant::now();
    let multi = multi_restart(&cfg, cfg.restarts)?;
    let wall = t0.elapsed().as_secs_f64();
    let mut rows = Vec::new();
    for entry in &multi.runs {
        match entry {
            Ok(run) => {
                let seed_dir = dir.join(format!("seed_{}", run.seed));
                write_run_artifacts(&seed_dir, &cfg, run, wall)?;
                rows.push(serde_json::json!({
                    "seed": run.seed,
                    "final_j": run.final_j(),
                    "initial_j": run.initial_j,
                    "iterations": run.history.len(),
                    "termination": run.termination.to_string(),
                }));
            }
            Err(msg) => rows.push(serde_json::json!({ "error": msg })),
        }
    }
    let best = multi.best_run();
    write_run_artifacts(&dir, &cfg, best, wall)?;
    report::write_run_json(
        &dir.join("sweep.json"),
        &serde_json::json!({
            "restarts": cfg.restarts,
            "best_seed": best.seed,
            "best_final_j": best.final_j(),
            "runs": rows,
            "timing": { "wall_secs": wall },
        }),
    )?;
    log::info!(
        "sweep over {} seeds: best J = {:.4}% (seed {}); artifacts in {}",
        cfg.restarts,
        100.0 * best.final_j(),
        best.seed,
        dir.display()
    );
    Ok(())
}
