//! Small dense interior-point solver for linear semidefinite programs.
//!
//! Solves problems of the form
//!
//! ```text
//! maximize    c · x
//! subject to  F0_b + sum_i x_i F_{b,i}  >= 0   (matrix inequality, per block b)
//!             g0_r + sum_i x_i a_{r,i}  >= 0   (scalar inequality, per row r)
//!             E x = e                          (linear equalities)
//! ```
//!
//! where `>=` on matrices is the Löwner order (positive semidefiniteness).
//! All blocks are real symmetric and dense; the solver is intended for
//! problems with many small blocks and up to a few thousand variables.
//!
//! The algorithm is a feasible-start path-following barrier method: damped
//! Newton centering on `t·(-c·x) + phi(x)` with the log-det barrier `phi`,
//! an exact fraction-to-boundary step limit per cone, and a geometric update
//! of `t` until the duality gap bound `nu / t` falls below the requested
//! tolerance. When no strictly feasible start is supplied, a phase-1 problem
//! (maximize the smallest cone margin) is solved first; a non-positive
//! phase-1 optimum reports infeasibility.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// One matrix-inequality constraint `constant + sum_i x_i * coeff_i >= 0`.
#[derive(Debug, Clone)]
pub struct LmiBlock {
    pub dim: usize,
    /// Constant term, `dim x dim` symmetric.
    pub constant: DMatrix<f64>,
    /// Variable coefficients as `(variable index, symmetric matrix)` pairs.
    pub coeffs: Vec<(usize, DMatrix<f64>)>,
}

/// One scalar inequality `constant + sum_i x_i * coeff_i >= 0`.
#[derive(Debug, Clone)]
pub struct ScalarRow {
    pub constant: f64,
    pub coeffs: Vec<(usize, f64)>,
}

/// A linear SDP in inequality form with optional equality constraints.
#[derive(Debug, Clone)]
pub struct ConicProblem {
    pub n_vars: usize,
    /// Objective vector; the solver maximizes `objective · x`.
    pub objective: DVector<f64>,
    pub blocks: Vec<LmiBlock>,
    pub rows: Vec<ScalarRow>,
    /// Equality constraints `eq_lhs * x = eq_rhs`; may have zero rows.
    pub eq_lhs: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Target bound on the duality gap `nu / t`.
    pub gap_tol: f64,
    /// Margin below which phase 1 declares the problem infeasible.
    pub feas_tol: f64,
    /// Multiplicative update of the path parameter `t`.
    pub mu_factor: f64,
    /// Cap on Newton iterations within one centering step.
    pub max_center_iters: usize,
    /// Cap on total Newton iterations across the whole solve.
    pub max_total_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-8,
            feas_tol: 1e-9,
            mu_factor: 3.0,
            max_center_iters: 60,
            max_total_iters: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    NearOptimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::NearOptimal => "near-optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::NumericalFailure => "numerical-failure",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: SolveStatus,
    pub x: DVector<f64>,
    pub objective: f64,
    /// Upper bound on the duality gap at the returned point.
    pub duality_gap: f64,
    /// Most negative cone margin at the returned point (0 when interior).
    pub primal_infeasibility: f64,
    /// Worst equality residual `|E x - e|` at the returned point.
    pub equality_residual: f64,
    pub newton_iters: usize,
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

/// Smallest cone margin of `x`: the minimum over blocks of the smallest
/// eigenvalue of `G_b(x)` and over scalar rows of the row value. Positive
/// iff `x` is strictly feasible for the cone constraints.
pub fn cone_margin(problem: &ConicProblem, x: &DVector<f64>) -> f64 {
    let mut margin = f64::INFINITY;
    for block in &problem.blocks {
        let g = eval_block(block, x);
        let eig = g.symmetric_eigen();
        for ev in eig.eigenvalues.iter() {
            margin = margin.min(*ev);
        }
    }
    for row in &problem.rows {
        margin = margin.min(eval_row(row, x));
    }
    margin
}

fn eval_block(block: &LmiBlock, x: &DVector<f64>) -> DMatrix<f64> {
    let mut g = block.constant.clone();
    for (var, f) in &block.coeffs {
        g += f * x[*var];
    }
    g
}

fn eval_row(row: &ScalarRow, x: &DVector<f64>) -> f64 {
    let mut g = row.constant;
    for (var, a) in &row.coeffs {
        g += a * x[*var];
    }
    g
}

/// Total barrier degree: sum of block dimensions plus the number of rows.
pub fn barrier_degree(problem: &ConicProblem) -> usize {
    problem.blocks.iter().map(|b| b.dim).sum::<usize>() + problem.rows.len()
}

/// Solve the problem, optionally from a strictly feasible starting point.
///
/// Without a start (or with a start that is not strictly interior), a
/// phase-1 margin-maximization problem is solved first. An infeasible or
/// unbounded instance is reported through [`Solution::status`], never as an
/// `Err`; errors are reserved for malformed input and hard linear-algebra
/// breakdowns.
pub fn solve(
    problem: &ConicProblem,
    opts: &SolverOptions,
    start: Option<&DVector<f64>>,
) -> Result<Solution, SolverError> {
    validate(problem)?;
    let problem = symmetrized(problem);

    let mut total_iters = 0usize;

    // Starting point: caller-provided if strictly interior, else phase 1.
    let x0 = match start {
        Some(x) if x.len() == problem.n_vars && is_usable_start(&problem, x) => x.clone(),
        _ => match phase_one(&problem, opts, &mut total_iters)? {
            PhaseOne::Feasible(x) => x,
            PhaseOne::Infeasible(margin) => {
                return Ok(Solution {
                    status: SolveStatus::Infeasible,
                    x: DVector::zeros(problem.n_vars),
                    objective: f64::NAN,
                    duality_gap: f64::INFINITY,
                    primal_infeasibility: (-margin).max(0.0),
                    equality_residual: 0.0,
                    newton_iters: total_iters,
                });
            }
        },
    };

    let outcome = follow_path(&problem, opts, x0, &problem.objective, &mut total_iters);
    finalize(&problem, opts, outcome, total_iters)
}

fn finalize(
    problem: &ConicProblem,
    opts: &SolverOptions,
    outcome: PathOutcome,
    total_iters: usize,
) -> Result<Solution, SolverError> {
    let x = outcome.x;
    let margin = cone_margin(problem, &x);
    let eq_res = equality_residual(problem, &x);
    let objective = problem.objective.dot(&x);
    let status = if outcome.unbounded {
        SolveStatus::Unbounded
    } else if outcome.clean && outcome.gap <= opts.gap_tol {
        SolveStatus::Optimal
    } else if outcome.gap <= opts.gap_tol * 1e4 && margin >= 0.0 {
        SolveStatus::NearOptimal
    } else {
        SolveStatus::NumericalFailure
    };
    Ok(Solution {
        status,
        x,
        objective,
        duality_gap: outcome.gap,
        primal_infeasibility: (-margin).max(0.0),
        equality_residual: eq_res,
        newton_iters: total_iters,
    })
}

fn equality_residual(problem: &ConicProblem, x: &DVector<f64>) -> f64 {
    if problem.eq_lhs.nrows() == 0 {
        return 0.0;
    }
    let r = &problem.eq_lhs * x - &problem.eq_rhs;
    r.amax()
}

fn validate(problem: &ConicProblem) -> Result<(), SolverError> {
    let n = problem.n_vars;
    if problem.objective.len() != n {
        return Err(SolverError::InvalidProblem(format!(
            "objective length {} != n_vars {}",
            problem.objective.len(),
            n
        )));
    }
    for (bi, block) in problem.blocks.iter().enumerate() {
        if block.constant.nrows() != block.dim || block.constant.ncols() != block.dim {
            return Err(SolverError::InvalidProblem(format!(
                "block {bi}: constant is {}x{}, expected {}x{}",
                block.constant.nrows(),
                block.constant.ncols(),
                block.dim,
                block.dim
            )));
        }
        for (var, f) in &block.coeffs {
            if *var >= n {
                return Err(SolverError::InvalidProblem(format!(
                    "block {bi}: variable index {var} out of range"
                )));
            }
            if f.nrows() != block.dim || f.ncols() != block.dim {
                return Err(SolverError::InvalidProblem(format!(
                    "block {bi}: coefficient for variable {var} has wrong shape"
                )));
            }
        }
    }
    for (ri, row) in problem.rows.iter().enumerate() {
        for (var, _) in &row.coeffs {
            if *var >= n {
                return Err(SolverError::InvalidProblem(format!(
                    "row {ri}: variable index {var} out of range"
                )));
            }
        }
    }
    if problem.eq_lhs.nrows() != problem.eq_rhs.len() {
        return Err(SolverError::InvalidProblem(
            "equality lhs/rhs row mismatch".to_string(),
        ));
    }
    if problem.eq_lhs.nrows() > 0 && problem.eq_lhs.ncols() != n {
        return Err(SolverError::InvalidProblem(
            "equality lhs column count != n_vars".to_string(),
        ));
    }
    Ok(())
}

/// Copy of the problem with every block coefficient symmetrized.
fn symmetrized(problem: &ConicProblem) -> ConicProblem {
    let mut p = problem.clone();
    for block in &mut p.blocks {
        block.constant = (&block.constant + block.constant.transpose()) * 0.5;
        for (_, f) in &mut block.coeffs {
            *f = (&*f + f.transpose()) * 0.5;
        }
    }
    p
}

fn is_usable_start(problem: &ConicProblem, x: &DVector<f64>) -> bool {
    cone_margin(problem, x) > 0.0 && equality_residual(problem, x) <= 1e-9 * (1.0 + x.amax())
}

enum PhaseOne {
    Feasible(DVector<f64>),
    Infeasible(f64),
}

/// Maximize the smallest cone margin; a positive optimum yields a strictly
/// feasible interior starting point.
fn phase_one(
    problem: &ConicProblem,
    opts: &SolverOptions,
    total_iters: &mut usize,
) -> Result<PhaseOne, SolverError> {
    let n = problem.n_vars;
    let s_index = n;

    // Seed satisfying the equalities (least-norm solution).
    let x_seed = if problem.eq_lhs.nrows() > 0 {
        let e = &problem.eq_lhs;
        let gram = e * e.transpose();
        let rhs = problem.eq_rhs.clone();
        let y = gram
            .lu()
            .solve(&rhs)
            .ok_or_else(|| SolverError::Linalg("rank-deficient equality constraints".into()))?;
        e.transpose() * y
    } else {
        DVector::zeros(n)
    };
    let margin0 = cone_margin(problem, &x_seed);
    let s0 = margin0 - 1.0;
    let s_cap = margin0.abs().max(1.0) * 2.0 + 10.0;

    let mut ext = ConicProblem {
        n_vars: n + 1,
        objective: {
            let mut c = DVector::zeros(n + 1);
            c[s_index] = 1.0;
            c
        },
        blocks: problem
            .blocks
            .iter()
            .map(|b| {
                let mut coeffs = b.coeffs.clone();
                coeffs.push((s_index, -DMatrix::identity(b.dim, b.dim)));
                LmiBlock {
                    dim: b.dim,
                    constant: b.constant.clone(),
                    coeffs,
                }
            })
            .collect(),
        rows: problem
            .rows
            .iter()
            .map(|r| {
                let mut coeffs = r.coeffs.clone();
                coeffs.push((s_index, -1.0));
                ScalarRow {
                    constant: r.constant,
                    coeffs,
                }
            })
            .collect(),
        eq_lhs: DMatrix::zeros(problem.eq_lhs.nrows(), n + 1),
        eq_rhs: problem.eq_rhs.clone(),
    };
    for i in 0..problem.eq_lhs.nrows() {
        for j in 0..n {
            ext.eq_lhs[(i, j)] = problem.eq_lhs[(i, j)];
        }
    }
    // Bound s from above so phase 1 cannot be unbounded.
    ext.rows.push(ScalarRow {
        constant: s_cap,
        coeffs: vec![(s_index, -1.0)],
    });

    let mut x0 = DVector::zeros(n + 1);
    for i in 0..n {
        x0[i] = x_seed[i];
    }
    x0[s_index] = s0;

    let phase_opts = SolverOptions {
        gap_tol: opts.gap_tol.min(1e-9),
        ..*opts
    };
    let outcome = follow_path(&ext, &phase_opts, x0, &ext.objective, total_iters);
    let s_star = outcome.x[s_index];
    if s_star > opts.feas_tol {
        let x = DVector::from_fn(n, |i, _| outcome.x[i]);
        // The phase-1 center has margin about s_star > 0, so it is interior.
        Ok(PhaseOne::Feasible(x))
    } else {
        Ok(PhaseOne::Infeasible(s_star))
    }
}

struct PathOutcome {
    x: DVector<f64>,
    gap: f64,
    clean: bool,
    unbounded: bool,
}

/// Barrier path following from a strictly feasible `x0`.
fn follow_path(
    problem: &ConicProblem,
    opts: &SolverOptions,
    x0: DVector<f64>,
    objective: &DVector<f64>,
    total_iters: &mut usize,
) -> PathOutcome {
    let nu = barrier_degree(problem).max(1) as f64;
    let obj_scale = 1.0 + objective.amax();
    let mut x = x0;

    let mut t = (nu / (1.0 + objective.dot(&x).abs())).max(1.0);
    let mut clean = true;

    loop {
        let iters_before = *total_iters;
        let outcome = center(problem, opts, &mut x, objective, t, total_iters);
        log::debug!(
            "t = {t:.3e}: {} Newton steps, objective {:.9e}",
            *total_iters - iters_before,
            objective.dot(&x)
        );
        match outcome {
            CenterResult::Centered => {}
            CenterResult::Stalled(decrement) => {
                log::debug!("centering stalled at decrement {decrement:.3e}");
                // A stall deep in the quadratic region still certifies the
                // gap bound; larger decrements mean the bound only holds
                // approximately, and a genuinely uncentered point ends the
                // path with whatever gap the previous stage reached.
                if decrement > 1e-4 {
                    return PathOutcome {
                        x,
                        gap: nu / (t / opts.mu_factor).max(1.0),
                        clean: false,
                        unbounded: false,
                    };
                }
                if decrement > 1e-6 {
                    clean = false;
                }
            }
        }
        if objective.dot(&x).abs() > 1e14 * obj_scale {
            return PathOutcome {
                x,
                gap: nu / t,
                clean,
                unbounded: true,
            };
        }
        if nu / t <= opts.gap_tol {
            return PathOutcome {
                x,
                gap: nu / t,
                clean,
                unbounded: false,
            };
        }
        if *total_iters >= opts.max_total_iters {
            return PathOutcome {
                x,
                gap: nu / t,
                clean: false,
                unbounded: false,
            };
        }
        t *= opts.mu_factor;
    }
}

enum CenterResult {
    Centered,
    Stalled(f64),
}

/// Damped Newton iteration for `min t(-c.x) + phi(x)  s.t.  E x = e`.
fn center(
    problem: &ConicProblem,
    opts: &SolverOptions,
    x: &mut DVector<f64>,
    objective: &DVector<f64>,
    t: f64,
    total_iters: &mut usize,
) -> CenterResult {
    let n = problem.n_vars;
    let me = problem.eq_lhs.nrows();
    let mut last_decrement = f64::INFINITY;

    for _ in 0..opts.max_center_iters {
        *total_iters += 1;
        let Some(bar) = barrier_derivatives(problem, x) else {
            // Lost interiority to rounding; report as a stall.
            return CenterResult::Stalled(last_decrement);
        };
        let mut grad = bar.grad.clone();
        for i in 0..n {
            grad[i] -= t * objective[i];
        }
        let mut hess = bar.hess.clone();
        // Tiny ridge keeps the KKT factorization stable when a variable is
        // barely constrained.
        let ridge = 1e-13 * (1.0 + hess.diagonal().amax());
        for i in 0..n {
            hess[(i, i)] += ridge;
        }

        // Equilibrate the KKT system: barrier curvature spans many orders
        // of magnitude near the boundary, and the symmetric diagonal
        // scaling keeps the factorization accurate there.
        let scale = DVector::from_fn(n, |i, _| 1.0 / hess[(i, i)].max(1e-300).sqrt());
        let dim = n + me;
        let mut kkt = DMatrix::zeros(dim, dim);
        for i in 0..n {
            for j in 0..n {
                kkt[(i, j)] = hess[(i, j)] * scale[i] * scale[j];
            }
        }
        for r in 0..me {
            for j in 0..n {
                let v = problem.eq_lhs[(r, j)] * scale[j];
                kkt[(n + r, j)] = v;
                kkt[(j, n + r)] = v;
            }
        }
        let mut rhs = DVector::zeros(dim);
        for i in 0..n {
            rhs[i] = -grad[i] * scale[i];
        }
        let lu = kkt.clone().lu();
        let Some(mut sol) = lu.solve(&rhs) else {
            return CenterResult::Stalled(last_decrement);
        };
        // one round of iterative refinement
        let residual = &rhs - &kkt * &sol;
        if let Some(correction) = lu.solve(&residual) {
            sol += correction;
        }
        let dx = DVector::from_fn(n, |i, _| sol[i] * scale[i]);

        let decrement = (-grad.dot(&dx)).max(0.0) / 2.0;
        last_decrement = decrement;
        if decrement <= 1e-10_f64.max(1e-15 * t) {
            return CenterResult::Centered;
        }

        // Exact fraction-to-boundary limit, then Armijo backtracking.
        let alpha_max = step_to_boundary(problem, x, &dx, &bar);
        let mut alpha = (0.99 * alpha_max).min(1.0);
        if alpha <= 1e-14 {
            return CenterResult::Stalled(decrement);
        }
        let psi0 = merit(problem, x, objective, t);
        let slope = grad.dot(&dx);
        let mut accepted = false;
        for _ in 0..60 {
            let trial = &*x + &dx * alpha;
            if let Some(psi) = merit_at(problem, &trial, objective, t) {
                if psi <= psi0 + 0.01 * alpha * slope {
                    *x = trial;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            log::trace!("line search failed: decrement {decrement:.3e}, alpha_max {alpha_max:.3e}");
            return CenterResult::Stalled(decrement);
        }
        log::trace!("newton: decrement {decrement:.3e} alpha {alpha:.3e}");
    }
    CenterResult::Stalled(last_decrement)
}

struct BarrierDerivatives {
    grad: DVector<f64>,
    hess: DMatrix<f64>,
    /// Cholesky factors of each block value, reused by the line search.
    block_factors: Vec<DMatrix<f64>>,
    row_values: Vec<f64>,
}

fn barrier_derivatives(problem: &ConicProblem, x: &DVector<f64>) -> Option<BarrierDerivatives> {
    let n = problem.n_vars;
    let mut grad = DVector::zeros(n);
    let mut hess = DMatrix::zeros(n, n);
    let mut block_factors = Vec::with_capacity(problem.blocks.len());

    for block in &problem.blocks {
        let g = eval_block(block, x);
        let chol = nalgebra::Cholesky::new(g)?;
        let l = chol.l();
        let d = block.dim;
        let k = block.coeffs.len();
        // v-matrix of vectorized L^-1 F L^-T, one column per coefficient.
        let mut v = DMatrix::zeros(d * d, k);
        for (ci, (var, f)) in block.coeffs.iter().enumerate() {
            let tmp = l.solve_lower_triangular(f)?;
            let s = l.solve_lower_triangular(&tmp.transpose())?.transpose();
            let mut trace = 0.0;
            for i in 0..d {
                trace += s[(i, i)];
            }
            grad[*var] -= trace;
            for cidx in 0..d {
                for ridx in 0..d {
                    v[(cidx * d + ridx, ci)] = s[(ridx, cidx)];
                }
            }
        }
        let h_sub = v.transpose() * &v;
        for (ci, (vi, _)) in block.coeffs.iter().enumerate() {
            for (cj, (vj, _)) in block.coeffs.iter().enumerate() {
                hess[(*vi, *vj)] += h_sub[(ci, cj)];
            }
        }
        block_factors.push(l);
    }

    let mut row_values = Vec::with_capacity(problem.rows.len());
    for row in &problem.rows {
        let g = eval_row(row, x);
        if g <= 0.0 {
            return None;
        }
        for (vi, ai) in &row.coeffs {
            grad[*vi] -= ai / g;
            for (vj, aj) in &row.coeffs {
                hess[(*vi, *vj)] += ai * aj / (g * g);
            }
        }
        row_values.push(g);
    }

    Some(BarrierDerivatives {
        grad,
        hess,
        block_factors,
        row_values,
    })
}

/// Largest step along `dx` that keeps every cone strictly feasible.
fn step_to_boundary(
    problem: &ConicProblem,
    _x: &DVector<f64>,
    dx: &DVector<f64>,
    bar: &BarrierDerivatives,
) -> f64 {
    let mut alpha = f64::INFINITY;
    for (block, l) in problem.blocks.iter().zip(&bar.block_factors) {
        let d = block.dim;
        let mut dg = DMatrix::zeros(d, d);
        for (var, f) in &block.coeffs {
            if dx[*var] != 0.0 {
                dg += f * dx[*var];
            }
        }
        let Some(tmp) = l.solve_lower_triangular(&dg) else {
            return 0.0;
        };
        let Some(w) = l.solve_lower_triangular(&tmp.transpose()) else {
            return 0.0;
        };
        let w = (w.transpose() + &w) * 0.5;
        let eig = w.symmetric_eigen();
        let min_ev = eig.eigenvalues.min();
        if min_ev < 0.0 {
            alpha = alpha.min(-1.0 / min_ev);
        }
    }
    for (row, g) in problem.rows.iter().zip(&bar.row_values) {
        let mut dgr = 0.0;
        for (var, a) in &row.coeffs {
            dgr += a * dx[*var];
        }
        if dgr < 0.0 {
            alpha = alpha.min(-g / dgr);
        }
    }
    alpha
}

fn merit(problem: &ConicProblem, x: &DVector<f64>, objective: &DVector<f64>, t: f64) -> f64 {
    merit_at(problem, x, objective, t).unwrap_or(f64::INFINITY)
}

/// Barrier merit `t(-c.x) + phi(x)`; `None` off the interior.
fn merit_at(
    problem: &ConicProblem,
    x: &DVector<f64>,
    objective: &DVector<f64>,
    t: f64,
) -> Option<f64> {
    let mut psi = -t * objective.dot(x);
    for block in &problem.blocks {
        let g = eval_block(block, x);
        let chol = nalgebra::Cholesky::new(g)?;
        let l = chol.l();
        let mut logdet = 0.0;
        for i in 0..block.dim {
            let lii = l[(i, i)];
            if lii <= 0.0 {
                return None;
            }
            logdet += lii.ln();
        }
        psi -= 2.0 * logdet;
    }
    for row in &problem.rows {
        let g = eval_row(row, x);
        if g <= 0.0 {
            return None;
        }
        psi -= g.ln();
    }
    Some(psi)
}
