//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line. Run with `cargo test --test acceptance -- --nocapture` (the
//! long-running reproduction study is `--ignored`).

mod common;

use bandgap2d::assembly::{assemble_family, evaluate, Polarization};
use bandgap2d::bands::{assemble_path_families, gap_from_solutions, solve_path};
use bandgap2d::eig::{solve_gevp, EigOptions};
use bandgap2d::lattice::{build_grid, build_k_path, build_symmetry_map, DielectricDesign};
use bandgap2d::optimizer::{multi_restart, optimize, InitKind, RunConfig};
use bandgap2d::sdp::{charnes_cooper, solve_sdp, SdpOptions};
use bandgap2d::subspace::{build_reduced_subspace, embed_real, reduce_blocks};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::time::Instant;

fn verdict(id: u32, ok: bool, detail: &str) {
    println!(
        "criterion {id:02} {} — {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {id:02}: {detail}");
}

/// Free-space TM dispersion on the 32x32 grid against the analytic
/// plane-wave set, first 10 bands, 1% relative, 12-point path, under 60 s.
///
/// Known to exceed the 1% tolerance: the consistent-mass bilinear
/// discretization carries a dispersion error of about (κh)²/12 per
/// direction, which reaches 1.3% at band 10 already at Γ (κ = 2π,
/// h = 1/16) and 2.3% on the path interior. The companion test below
/// verifies the h² convergence of exactly this error, so the failure is
/// discretization accuracy, not assembly or solver defects. Bands 1..9
/// pass the 1% bound.
#[test]
fn criterion_01_free_space_dispersion() {
    let t0 = Instant::now();
    let grid = build_grid(32).unwrap();
    let map = build_symmetry_map(&grid);
    let kpath = build_k_path(12).unwrap();
    let design = DielectricDesign {
        eps: vec![1.0; map.n_eps],
        eps_min: 1.0,
        eps_max: 11.4,
    };
    let families = assemble_path_families(&grid, &map, &kpath, Polarization::TM).unwrap();
    let solutions = solve_path(&families, &design, 10, &EigOptions::default()).unwrap();
    let mut worst: f64 = 0.0;
    let mut worst_nine: f64 = 0.0;
    for (idx, sol) in solutions.iter().enumerate() {
        let exact = common::free_space_dispersion(kpath.points[idx]);
        for j in 0..10 {
            let want = exact[j];
            let err = (sol.eigenvalues[j] - want).abs() / want.max(1e-9);
            worst = worst.max(err);
            if j < 9 {
                worst_nine = worst_nine.max(err);
            }
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    let ok = worst <= 0.01 && elapsed <= 60.0;
    verdict(
        1,
        ok,
        &format!(
            "worst relative error {worst:.3e} over 10 bands (first 9: {worst_nine:.3e}), {elapsed:.1} s; tolerance 1e-2, budget 60 s"
        ),
    );
}

/// Companion to criterion 1: the free-space eigenvalue error shrinks as h²,
/// pinning the discrepancy on discretization accuracy.
#[test]
fn free_space_error_converges_quadratically() {
    let mut errors = Vec::new();
    for n in [16usize, 32] {
        let grid = build_grid(n).unwrap();
        let map = build_symmetry_map(&grid);
        let design = DielectricDesign {
            eps: vec![1.0; map.n_eps],
            eps_min: 1.0,
            eps_max: 11.4,
        };
        let k = [std::f64::consts::PI / 2.0, 0.0];
        let family = assemble_family(&grid, &map, k, Polarization::TM).unwrap();
        let (a, m) = evaluate(&family, &design).unwrap();
        let sol = solve_gevp(&a, &m, 10, k, &EigOptions::default()).unwrap();
        let exact = common::free_space_dispersion(k);
        let mut worst: f64 = 0.0;
        for j in 0..10 {
            worst = worst.max((sol.eigenvalues[j] - exact[j]).abs() / exact[j].max(1e-9));
        }
        errors.push(worst);
    }
    let ratio = errors[0] / errors[1];
    assert!(
        (3.0..5.5).contains(&ratio),
        "halving h should shrink the worst error about 4x, got {ratio:.2} ({errors:?})"
    );
}

/// Affine evaluation equals monolithic assembly to 1e-12 relative Frobenius
/// for random admissible designs, both polarizations, several wavevectors.
#[test]
fn criterion_02_affine_exactness() {
    let grid = build_grid(16).unwrap();
    let map = build_symmetry_map(&grid);
    let ks = [[0.0, 0.0], [0.9, 0.0], [0.7, 0.55]];
    let mut worst: f64 = 0.0;
    for trial in 0..10 {
        let eps = common::pseudo_random_design(map.n_eps, trial + 1, 1.0, 11.4);
        let design = DielectricDesign {
            eps: eps.clone(),
            eps_min: 1.0,
            eps_max: 11.4,
        };
        let cellwise = design.expanded(&map).unwrap();
        for pol in [Polarization::TE, Polarization::TM] {
            for k in ks {
                let family = assemble_family(&grid, &map, k, pol).unwrap();
                let (a, m) = evaluate(&family, &design).unwrap();
                let (a_ref, m_ref) = common::monolithic_assembly(&grid, &cellwise, k, pol);
                let ea = (a.to_dense() - &a_ref).norm() / a_ref.norm();
                let em = (m.to_dense() - &m_ref).norm() / m_ref.norm();
                worst = worst.max(ea).max(em);
            }
        }
    }
    verdict(
        2,
        worst <= 1e-12,
        &format!("worst relative Frobenius deviation {worst:.3e} (tolerance 1e-12)"),
    );
}

/// At any incumbent, the reduced lower blocks evaluated with
/// λl = max_k band m are negative semidefinite and the upper blocks with
/// λu = min_k band m+1 positive semidefinite, to 1e-8 times the block scale.
#[test]
fn criterion_03_incumbent_feasibility() {
    let grid = build_grid(16).unwrap();
    let map = build_symmetry_map(&grid);
    let kpath = build_k_path(8).unwrap();
    let mut worst: f64 = 0.0;
    for (pol, m, seed) in [
        (Polarization::TM, 1, 5),
        (Polarization::TM, 3, 6),
        (Polarization::TE, 2, 7),
    ] {
        let design = DielectricDesign {
            eps: common::pseudo_random_design(map.n_eps, seed, 1.0, 11.4),
            eps_min: 1.0,
            eps_max: 11.4,
        };
        let families = assemble_path_families(&grid, &map, &kpath, pol).unwrap();
        let solutions = solve_path(&families, &design, m + 8, &EigOptions::default()).unwrap();
        let bands = gap_from_solutions(solutions, pol, m).unwrap();
        let subspace = build_reduced_subspace(&bands, 0.1, 0.1, &design).unwrap();
        for (family, ks) in families.iter().zip(&subspace.per_k) {
            let blocks = reduce_blocks(family, ks).unwrap();
            let weights: Vec<f64> = match pol {
                Polarization::TE => design.eps.iter().map(|&e| 1.0 / e).collect(),
                Polarization::TM => design.eps.clone(),
            };
            let combine = |terms: &[DMatrix<Complex64>]| {
                let d = terms[0].nrows();
                let mut acc = DMatrix::zeros(d, d);
                for (t, &w) in terms.iter().zip(&weights) {
                    acc += t * Complex64::new(w, 0.0);
                }
                acc
            };
            // lower: A_red - λl M_red has no positive eigenvalues
            let (a_low, m_low, a_up, m_up) = match pol {
                Polarization::TE => (
                    combine(&blocks.lower_terms),
                    blocks.lower_fixed.clone(),
                    combine(&blocks.upper_terms),
                    blocks.upper_fixed.clone(),
                ),
                Polarization::TM => (
                    blocks.lower_fixed.clone(),
                    combine(&blocks.lower_terms),
                    blocks.upper_fixed.clone(),
                    combine(&blocks.upper_terms),
                ),
            };
            let lower = &a_low - &m_low * Complex64::new(bands.lambda_lower, 0.0);
            let upper = &a_up - &m_up * Complex64::new(bands.lambda_upper, 0.0);
            let lower_emb = embed_real(&hermitize(lower)).unwrap();
            let upper_emb = embed_real(&hermitize(upper)).unwrap();
            let scale_low = lower_emb.amax().max(bands.lambda_lower);
            let scale_up = upper_emb.amax().max(bands.lambda_upper);
            let max_low = lower_emb.symmetric_eigen().eigenvalues.max();
            let min_up = upper_emb.symmetric_eigen().eigenvalues.min();
            worst = worst.max(max_low / scale_low).max(-min_up / scale_up);
        }
    }
    verdict(
        3,
        worst <= 1e-8,
        &format!("worst scaled eigenvalue violation {worst:.3e} (tolerance 1e-8)"),
    );
}

fn hermitize(m: DMatrix<Complex64>) -> DMatrix<Complex64> {
    let adj = m.adjoint();
    (m + adj) * Complex64::new(0.5, 0.0)
}

/// Homogenized optimum equals the bisection-on-target oracle to 1e-6 on
/// random small fractional SDPs.
#[test]
fn criterion_04_charnes_cooper_equivalence() {
    use conic::{ConicProblem, ScalarRow, SolverOptions};
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let n_vars = 2 + (seed % 3) as usize; // 2..4 variables
        let fsdp = random_fractional(seed, n_vars);
        let lsdp = charnes_cooper(&fsdp);
        let sol = solve_sdp(&lsdp, &SdpOptions::default(), None).unwrap();
        assert!(
            matches!(
                sol.status,
                conic::SolveStatus::Optimal | conic::SolveStatus::NearOptimal
            ),
            "seed {seed}: status {}",
            sol.status
        );

        // bisection: t is achievable iff max (c - t d)·x >= t d0 - c0
        let level_value = |t: f64| -> f64 {
            let mut objective = DVector::zeros(fsdp.n_vars);
            for i in 0..fsdp.n_vars {
                objective[i] = fsdp.numerator[i] - t * fsdp.denominator[i];
            }
            let mut rows = Vec::new();
            for i in 0..fsdp.n_vars {
                rows.push(ScalarRow {
                    constant: -fsdp.var_lower[i],
                    coeffs: vec![(i, 1.0)],
                });
                if let Some(hi) = fsdp.var_upper[i] {
                    rows.push(ScalarRow {
                        constant: hi,
                        coeffs: vec![(i, -1.0)],
                    });
                }
            }
            let p = ConicProblem {
                n_vars: fsdp.n_vars,
                objective,
                blocks: fsdp.blocks.clone(),
                rows,
                eq_lhs: DMatrix::zeros(0, fsdp.n_vars),
                eq_rhs: DVector::zeros(0),
            };
            let s = conic::solve(&p, &SolverOptions::default(), None).unwrap();
            s.objective + fsdp.numerator_offset - t * fsdp.denominator_offset
        };
        let (mut lo, mut hi) = (-30.0, 30.0);
        for _ in 0..55 {
            let mid = 0.5 * (lo + hi);
            if level_value(mid) >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let reference = 0.5 * (lo + hi);
        worst = worst.max((sol.objective - reference).abs());
    }
    verdict(
        4,
        worst <= 1e-6,
        &format!(
            "worst |homogenized - bisection| = {worst:.3e} over 20 instances (tolerance 1e-6)"
        ),
    );
}

fn random_fractional(seed: u64, n_vars: usize) -> bandgap2d::sdp::FractionalSdp {
    use conic::LmiBlock;
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed * 7919 + 13);
    let (lo, hi) = (0.5, 3.0);
    let mut blocks = Vec::new();
    for _ in 0..2 {
        let mut coeffs = Vec::new();
        let mut at_center = DMatrix::<f64>::zeros(2, 2);
        for i in 0..n_vars {
            let a = rng.random_range(-1.0..1.0);
            let b = rng.random_range(-1.0..1.0);
            let c = rng.random_range(-1.0..1.0);
            let f = DMatrix::from_row_slice(2, 2, &[a, b, b, c]);
            at_center += &f * (0.5 * (lo + hi));
            coeffs.push((i, f));
        }
        let shift = -at_center.symmetric_eigen().eigenvalues.min() + 0.4;
        blocks.push(LmiBlock {
            dim: 2,
            constant: DMatrix::identity(2, 2) * shift,
            coeffs,
        });
    }
    bandgap2d::sdp::FractionalSdp {
        polarization: Polarization::TE,
        n_eps: n_vars,
        n_vars,
        numerator: DVector::from_fn(n_vars, |_, _| rng.random_range(-1.0..1.0)),
        numerator_offset: rng.random_range(-0.5..0.5),
        denominator: DVector::from_fn(n_vars, |_, _| rng.random_range(0.05..1.0)),
        denominator_offset: 0.1,
        blocks,
        var_lower: vec![lo; n_vars],
        var_upper: vec![Some(hi); n_vars],
        eps_min: lo,
        eps_max: hi,
        floor: 1e-9,
    }
}

/// The real symmetric embedding reproduces every Hermitian eigenvalue with
/// multiplicity two, to 1e-12, on random matrices up to 8x8.
#[test]
fn criterion_05_embedding_spectral_fidelity() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(515);
    let mut worst: f64 = 0.0;
    for trial in 0..20 {
        let n = 2 + trial % 7;
        let raw = DMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let h = (&raw + raw.adjoint()) * Complex64::new(0.5, 0.0);
        let mut spectrum: Vec<f64> = h
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        spectrum.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let embeddedm = embed_real(&h).unwrap();
        let mut doubled: Vec<f64> = embeddedm
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        doubled.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for j in 0..n {
            worst = worst.max((doubled[2 * j] - spectrum[j]).abs());
            worst = worst.max((doubled[2 * j + 1] - spectrum[j]).abs());
        }
    }
    verdict(
        5,
        worst <= 1e-12,
        &format!("worst eigenvalue deviation {worst:.3e} over 20 matrices (tolerance 1e-12)"),
    );
}

/// Scaling every ε by 2 halves each TM eigenvalue (1e-10 relative, with an
/// absolute floor for the zero mode at Γ) and leaves the gap ratio
/// unchanged to 1e-10.
#[test]
fn criterion_06_tm_scaling_invariance() {
    let grid = build_grid(16).unwrap();
    let map = build_symmetry_map(&grid);
    let kpath = build_k_path(12).unwrap();
    let base = DielectricDesign {
        eps: common::pseudo_random_design(map.n_eps, 77, 1.0, 10.0),
        eps_min: 1.0,
        eps_max: 20.0,
    };
    let scaled = DielectricDesign {
        eps: base.eps.iter().map(|&e| 2.0 * e).collect(),
        eps_min: 1.0,
        eps_max: 20.0,
    };
    let families = assemble_path_families(&grid, &map, &kpath, Polarization::TM).unwrap();
    let opts = EigOptions::default();
    let s1 = solve_path(&families, &base, 8, &opts).unwrap();
    let s2 = solve_path(&families, &scaled, 8, &opts).unwrap();
    // 1e-10 relative per eigenvalue, with an absolute round-off floor for
    // the numerically-zero mode at Γ; reported as a fraction of tolerance.
    let mut worst: f64 = 0.0;
    for (a, b) in s1.iter().zip(&s2) {
        let scale = a.eigenvalues[7].abs();
        for j in 0..8 {
            let expect = a.eigenvalues[j] / 2.0;
            let tol = (1e-10 * expect.abs()).max(1e-12 * scale);
            worst = worst.max((b.eigenvalues[j] - expect).abs() / tol);
        }
    }
    let b1 = gap_from_solutions(s1, Polarization::TM, 2).unwrap();
    let b2 = gap_from_solutions(s2, Polarization::TM, 2).unwrap();
    let j_dev = (b1.gap_midgap - b2.gap_midgap).abs();
    verdict(
        6,
        worst <= 1.0 && j_dev <= 1e-10,
        &format!("worst eigenvalue deviation {worst:.3}x the 1e-10 tolerance, gap-ratio deviation {j_dev:.3e}"),
    );
}

/// Expanded designs are exactly invariant under all 8 square symmetries,
/// and band values satisfy λ(k) = λ(-k) to 1e-9 relative.
#[test]
fn criterion_07_symmetry_suite() {
    let grid = build_grid(16).unwrap();
    let map = build_symmetry_map(&grid);
    let design = DielectricDesign {
        eps: common::pseudo_random_design(map.n_eps, 99, 1.0, 11.4),
        eps_min: 1.0,
        eps_max: 11.4,
    };
    let field = design.expanded(&map).unwrap();
    let n = grid.n as i64;
    let ops: [fn(i64, i64, i64) -> (i64, i64); 8] = [
        |x, y, _n| (x, y),
        |x, y, n| (n - 1 - y, x),
        |x, y, n| (n - 1 - x, n - 1 - y),
        |x, y, n| (y, n - 1 - x),
        |x, y, n| (n - 1 - x, y),
        |x, y, n| (x, n - 1 - y),
        |x, y, _n| (y, x),
        |x, y, n| (n - 1 - y, n - 1 - x),
    ];
    let mut exact = true;
    for cy in 0..n {
        for cx in 0..n {
            for op in ops {
                let (ix, iy) = op(cx, cy, n);
                if field[(cy * n + cx) as usize] != field[(iy * n + ix) as usize] {
                    exact = false;
                }
            }
        }
    }

    // time reversal λ(k) = λ(-k) and square covariance λ(k) = λ(Rk)
    let mut worst: f64 = 0.0;
    for pol in [Polarization::TE, Polarization::TM] {
        for k in [[0.6, 0.0], [0.5, 0.5], [0.8, 0.3]] {
            let images = [[-k[0], -k[1]], [-k[1], k[0]], [k[1], k[0]]];
            let fam_p = assemble_family(&grid, &map, k, pol).unwrap();
            let (ap, mp) = evaluate(&fam_p, &design).unwrap();
            let sp = solve_gevp(&ap, &mp, 6, k, &EigOptions::default()).unwrap();
            for image in images {
                let fam_i = assemble_family(&grid, &map, image, pol).unwrap();
                let (ai, mi) = evaluate(&fam_i, &design).unwrap();
                let si = solve_gevp(&ai, &mi, 6, image, &EigOptions::default()).unwrap();
                for j in 0..6 {
                    let err = (sp.eigenvalues[j] - si.eigenvalues[j]).abs()
                        / sp.eigenvalues[j].abs().max(1e-12);
                    worst = worst.max(err);
                }
            }
        }
    }
    verdict(
        7,
        exact && worst <= 1e-9,
        &format!("expanded-field symmetry exact: {exact}; worst band deviation under time reversal and square rotations {worst:.3e} (tolerance 1e-9)"),
    );
}

fn desk_scale_config() -> RunConfig {
    RunConfig {
        n: 16,
        polarization: Polarization::TM,
        band_index: 1,
        init: InitKind::Rods { radius: 0.38 },
        n_k: 12,
        r_l: 0.1,
        r_u: 0.1,
        max_outer: 30,
        ..RunConfig::default()
    }
}

/// Desk-scale end-to-end optimization: TM bands 1–2 on the 16x16 grid from
/// the rod start reaches at least a 10% gap ratio without degrading, in
/// under ten minutes.
#[test]
fn criterion_08_desk_scale_optimization() {
    let t0 = Instant::now();
    let run = optimize(&desk_scale_config()).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();
    // no-degradation check up to the SDP solver tolerance (the converged
    // fixed point differs from the start by about the solver's 1e-8 gap)
    let no_degradation = run.final_j() >= run.initial_j - 1e-8;
    let ok = run.final_j() >= 0.10 && no_degradation && elapsed <= 600.0;
    verdict(
        8,
        ok,
        &format!(
            "J {:.9} -> {:.9} in {} iterations, {elapsed:.1} s ({})",
            run.initial_j,
            run.final_j(),
            run.history.len(),
            run.termination
        ),
    );
}

/// Long-running reproduction study at the 64x64 scale: eight random
/// restarts for the TM gap between bands 7 and 8, expecting the best ratio
/// to clear 25%. Hours of compute; excluded from routine runs.
#[test]
#[ignore = "long-running 64x64 reproduction study; run explicitly with --ignored"]
fn criterion_09_reproduction_stretch() {
    let cfg = RunConfig {
        n: 64,
        polarization: Polarization::TM,
        band_index: 7,
        init: InitKind::UniformRandom,
        seed: 0,
        max_outer: 40,
        ..RunConfig::default()
    };
    let multi = multi_restart(&cfg, 8).unwrap();
    let best = multi.best_run();
    verdict(
        9,
        best.final_j() > 0.25,
        &format!(
            "best TM 7-8 gap ratio over 8 restarts: {:.4} (target > 0.25)",
            best.final_j()
        ),
    );
}

/// Two runs of the desk-scale configuration produce identical iteration
/// histories.
#[test]
fn criterion_10_determinism() {
    let cfg = desk_scale_config();
    let run1 = optimize(&cfg).unwrap();
    let run2 = optimize(&cfg).unwrap();
    let same_history = run1.history_fingerprint() == run2.history_fingerprint();
    let same_design = run1.final_design.eps == run2.final_design.eps;
    verdict(
        10,
        same_history && same_design,
        &format!("history fingerprints equal: {same_history}; final designs bit-identical: {same_design}"),
    );
}
