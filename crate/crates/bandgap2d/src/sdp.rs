//! Linear-fractional SDP construction from reduced blocks, homogenization
//! to a linear SDP, solver bridging, and solution recovery.
//!
//! For TE the variables are `y = (1/ε_1 .. 1/ε_n, λl, λu)`; the reduced
//! stiffness terms are affine in `y` and the objective is the fractional
//! form `(y_u - y_l)/(y_u + y_l)`. For TM the variables are
//! `z = (ε_1 .. ε_n, 1/λl, 1/λu)` after multiplying the two inclusions by
//! `1/λl` and `1/λu`. Either way the problem is a linear-fractional SDP,
//! homogenized to a linear SDP with variables `(w, θ)` through
//! `x = w/θ`, `d·w = 1`, `θ > 0`, and handed to the interior-point solver.
//!
//! Complex Hermitian blocks enter the solver through the real symmetric
//! embedding (see [`crate::subspace::embed_real`]), which preserves
//! semidefiniteness exactly at the cost of doubling each eigenvalue's
//! multiplicity.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use conic::{ConicProblem, LmiBlock, ScalarRow, SolveStatus, SolverOptions};

use crate::assembly::Polarization;
use crate::error::{Error, Result};
use crate::lattice::DielectricDesign;
use crate::subspace::{embed_real, KBlocks};

/// Index layout of the decision vector: the `n_eps` material variables
/// first, then the lower-edge and upper-edge variables.
#[derive(Debug, Clone)]
pub struct FractionalSdp {
    pub polarization: Polarization,
    pub n_eps: usize,
    /// `n_eps + 2`.
    pub n_vars: usize,
    /// Objective numerator `c·x + c0`.
    pub numerator: DVector<f64>,
    pub numerator_offset: f64,
    /// Objective denominator `d·x + d0`, positive on the feasible set.
    pub denominator: DVector<f64>,
    pub denominator_offset: f64,
    /// Matrix inequalities `G(x) >= 0`, two per wavevector, real embedded.
    pub blocks: Vec<LmiBlock>,
    /// Per-variable bounds; upper bounds may be absent (edge variables).
    pub var_lower: Vec<f64>,
    pub var_upper: Vec<Option<f64>>,
    pub eps_min: f64,
    pub eps_max: f64,
    /// Strict-positivity floor applied to the two edge variables.
    pub floor: f64,
}

fn embedded(h: &DMatrix<Complex64>) -> Result<DMatrix<f64>> {
    embed_real(h)
}

/// Assemble the fractional SDP from the per-k reduced blocks.
pub fn build_fractional(
    blocks_per_k: &[KBlocks],
    polarization: Polarization,
    bounds: (f64, f64),
    floor: f64,
) -> Result<FractionalSdp> {
    let (eps_min, eps_max) = bounds;
    if !(eps_min > 0.0 && eps_min < eps_max) {
        return Err(Error::invalid(format!(
            "need 0 < eps_min < eps_max, got ({eps_min}, {eps_max})"
        )));
    }
    if !(floor > 0.0) {
        return Err(Error::invalid("positivity floor must be positive"));
    }
    let first = blocks_per_k
        .first()
        .ok_or_else(|| Error::invalid("no reduced blocks supplied"))?;
    let n_eps = first.lower_terms.len();
    let n_vars = n_eps + 2;
    let lower_var = n_eps;
    let upper_var = n_eps + 1;

    let mut blocks = Vec::with_capacity(2 * blocks_per_k.len());
    for kb in blocks_per_k {
        if kb.lower_terms.len() != n_eps || kb.upper_terms.len() != n_eps {
            return Err(Error::invalid("inconsistent term counts across k-points"));
        }
        let dim_a = kb.lower_fixed.nrows();
        let dim_b = kb.upper_fixed.nrows();
        let mut lower_coeffs = Vec::with_capacity(n_eps + 1);
        let mut upper_coeffs = Vec::with_capacity(n_eps + 1);
        match polarization {
            Polarization::TE => {
                // lower: y_l * M_a - Σ y_i A_{i,a} >= 0
                for (i, term) in kb.lower_terms.iter().enumerate() {
                    lower_coeffs.push((i, -embedded(term)?));
                }
                lower_coeffs.push((lower_var, embedded(&kb.lower_fixed)?));
                // upper: Σ y_i A_{i,b} - y_u * M_b >= 0
                for (i, term) in kb.upper_terms.iter().enumerate() {
                    upper_coeffs.push((i, embedded(term)?));
                }
                upper_coeffs.push((upper_var, -embedded(&kb.upper_fixed)?));
            }
            Polarization::TM => {
                // lower: Σ z_i M_{i,a} - z_l * A_a >= 0
                for (i, term) in kb.lower_terms.iter().enumerate() {
                    lower_coeffs.push((i, embedded(term)?));
                }
                lower_coeffs.push((lower_var, -embedded(&kb.lower_fixed)?));
                // upper: z_u * A_b - Σ z_i M_{i,b} >= 0
                for (i, term) in kb.upper_terms.iter().enumerate() {
                    upper_coeffs.push((i, -embedded(term)?));
                }
                upper_coeffs.push((upper_var, embedded(&kb.upper_fixed)?));
            }
        }
        blocks.push(LmiBlock {
            dim: 2 * dim_a,
            constant: DMatrix::zeros(2 * dim_a, 2 * dim_a),
            coeffs: lower_coeffs,
        });
        blocks.push(LmiBlock {
            dim: 2 * dim_b,
            constant: DMatrix::zeros(2 * dim_b, 2 * dim_b),
            coeffs: upper_coeffs,
        });
    }

    let (mat_lo, mat_hi) = match polarization {
        Polarization::TE => (1.0 / eps_max, 1.0 / eps_min),
        Polarization::TM => (eps_min, eps_max),
    };
    let mut var_lower = vec![mat_lo; n_eps];
    let mut var_upper: Vec<Option<f64>> = vec![Some(mat_hi); n_eps];
    var_lower.push(floor);
    var_lower.push(floor);
    var_upper.push(None);
    var_upper.push(None);

    // objective (λu - λl)/(λu + λl) through the variable change
    let mut numerator = DVector::zeros(n_vars);
    let mut denominator = DVector::zeros(n_vars);
    match polarization {
        Polarization::TE => {
            numerator[upper_var] = 1.0;
            numerator[lower_var] = -1.0;
            denominator[upper_var] = 1.0;
            denominator[lower_var] = 1.0;
        }
        Polarization::TM => {
            numerator[lower_var] = 1.0;
            numerator[upper_var] = -1.0;
            denominator[lower_var] = 1.0;
            denominator[upper_var] = 1.0;
        }
    }

    Ok(FractionalSdp {
        polarization,
        n_eps,
        n_vars,
        numerator,
        numerator_offset: 0.0,
        denominator,
        denominator_offset: 0.0,
        blocks,
        var_lower,
        var_upper,
        eps_min,
        eps_max,
        floor,
    })
}

/// Homogenized linear SDP over `(w, θ)`.
#[derive(Debug, Clone)]
pub struct LinearSdp {
    pub problem: ConicProblem,
    pub n_orig: usize,
    pub theta_index: usize,
}

/// Charnes–Cooper homogenization: `x = w/θ` turns the fractional program
/// into a linear SDP with `d·w + d0·θ = 1` and `θ >= 0`; every affine
/// constraint `A0 + Σ x_i A_i >= 0` becomes `θ A0 + Σ w_i A_i >= 0`.
pub fn charnes_cooper(fsdp: &FractionalSdp) -> LinearSdp {
    let n = fsdp.n_vars;
    let theta = n;
    let n_total = n + 1;

    let mut objective = DVector::zeros(n_total);
    for i in 0..n {
        objective[i] = fsdp.numerator[i];
    }
    objective[theta] = fsdp.numerator_offset;

    let blocks = fsdp
        .blocks
        .iter()
        .map(|b| {
            let mut coeffs = b.coeffs.clone();
            if b.constant.amax() > 0.0 {
                coeffs.push((theta, b.constant.clone()));
            }
            LmiBlock {
                dim: b.dim,
                constant: DMatrix::zeros(b.dim, b.dim),
                coeffs,
            }
        })
        .collect();

    let mut rows = Vec::new();
    for i in 0..n {
        // w_i - θ lo_i >= 0
        rows.push(ScalarRow {
            constant: 0.0,
            coeffs: vec![(i, 1.0), (theta, -fsdp.var_lower[i])],
        });
        if let Some(hi) = fsdp.var_upper[i] {
            // θ hi_i - w_i >= 0
            rows.push(ScalarRow {
                constant: 0.0,
                coeffs: vec![(theta, hi), (i, -1.0)],
            });
        }
    }
    // θ >= 0 (kept strictly positive by the barrier)
    rows.push(ScalarRow {
        constant: 0.0,
        coeffs: vec![(theta, 1.0)],
    });

    let mut eq_lhs = DMatrix::zeros(1, n_total);
    for i in 0..n {
        eq_lhs[(0, i)] = fsdp.denominator[i];
    }
    eq_lhs[(0, theta)] = fsdp.denominator_offset;
    let eq_rhs = DVector::from_vec(vec![1.0]);

    LinearSdp {
        problem: ConicProblem {
            n_vars: n_total,
            objective,
            blocks,
            rows,
            eq_lhs,
            eq_rhs,
        },
        n_orig: n,
        theta_index: theta,
    }
}

/// Transport a strictly feasible fractional point into `(w, θ)` space.
pub fn transport_feasible(fsdp: &FractionalSdp, x: &DVector<f64>) -> Result<DVector<f64>> {
    let den = fsdp.denominator.dot(x) + fsdp.denominator_offset;
    if !(den > 0.0) {
        return Err(Error::invalid(format!(
            "denominator must be positive at the transported point, got {den}"
        )));
    }
    let mut out = DVector::zeros(fsdp.n_vars + 1);
    for i in 0..fsdp.n_vars {
        out[i] = x[i] / den;
    }
    out[fsdp.n_vars] = 1.0 / den;
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct SdpOptions {
    /// Duality-gap tolerance handed to the interior-point solver.
    pub tol: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self { tol: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SolveStatus,
    pub w: DVector<f64>,
    pub theta: f64,
    pub objective: f64,
    pub duality_gap: f64,
    pub primal_infeasibility: f64,
    pub equality_residual: f64,
    pub newton_iters: usize,
}

/// Solve the homogenized SDP, optionally warm-scaled from a strictly
/// feasible starting point (the transported incumbent).
///
/// Solver failures surface as a status, never a panic; `Err` is reserved
/// for malformed problems.
pub fn solve_sdp(
    lsdp: &LinearSdp,
    opts: &SdpOptions,
    start: Option<&DVector<f64>>,
) -> Result<SdpSolution> {
    let n_total = lsdp.problem.n_vars;

    // Variable equilibration from the starting point: the interior-point
    // method behaves best when all variables are O(1).
    let scale: Vec<f64> = match start {
        Some(x0) => (0..n_total)
            .map(|i| x0[i].abs().max(1e-10 * (1.0 + x0.amax())))
            .collect(),
        None => vec![1.0; n_total],
    };

    let mut scaled = lsdp.problem.clone();
    for (i, s) in scale.iter().enumerate() {
        scaled.objective[i] *= s;
    }
    for block in &mut scaled.blocks {
        for (var, f) in &mut block.coeffs {
            *f *= scale[*var];
        }
        // balance the block magnitudes
        let norm = block
            .coeffs
            .iter()
            .map(|(_, f)| f.amax())
            .fold(block.constant.amax(), f64::max);
        if norm > 0.0 {
            block.constant /= norm;
            for (_, f) in &mut block.coeffs {
                *f /= norm;
            }
        }
    }
    for row in &mut scaled.rows {
        for (var, a) in &mut row.coeffs {
            *a *= scale[*var];
        }
    }
    for j in 0..scaled.eq_lhs.ncols() {
        for i in 0..scaled.eq_lhs.nrows() {
            scaled.eq_lhs[(i, j)] *= scale[j];
        }
    }

    let scaled_start = start.map(|x0| DVector::from_fn(n_total, |i, _| x0[i] / scale[i]));
    let solver_opts = SolverOptions {
        gap_tol: opts.tol,
        feas_tol: opts.tol,
        ..SolverOptions::default()
    };
    let sol = conic::solve(&scaled, &solver_opts, scaled_start.as_ref())
        .map_err(|e| Error::Solver(e.to_string()))?;

    let w_full = DVector::from_fn(n_total, |i, _| sol.x[i] * scale[i]);
    let theta = w_full[lsdp.theta_index];
    // objective in original units
    let objective = lsdp.problem.objective.dot(&w_full);
    Ok(SdpSolution {
        status: sol.status,
        w: w_full,
        theta,
        objective,
        duality_gap: sol.duality_gap,
        primal_infeasibility: sol.primal_infeasibility,
        equality_residual: sol.equality_residual,
        newton_iters: sol.newton_iters,
    })
}

/// A recovered admissible design with the band edges and gap ratio implied
/// by the SDP solution.
#[derive(Debug, Clone)]
pub struct RecoveredDesign {
    pub eps: Vec<f64>,
    pub lambda_lower: f64,
    pub lambda_upper: f64,
    pub gap_midgap: f64,
    /// Largest distance any material variable had to be clamped back into
    /// the admissible box (0 for interior solutions).
    pub clamp_magnitude: f64,
    /// The raw decision vector `x = w/θ` before clamping.
    pub x: DVector<f64>,
}

/// Undo the homogenization and the TE/TM variable changes.
pub fn recover(sol: &SdpSolution, fsdp: &FractionalSdp) -> Result<RecoveredDesign> {
    match sol.status {
        SolveStatus::Optimal | SolveStatus::NearOptimal => {}
        other => {
            return Err(Error::Solver(format!(
                "cannot recover a design from solver status `{other}`"
            )))
        }
    }
    let theta = sol.theta;
    if theta <= 1e-12 * (1.0 + sol.w.amax()) {
        return Err(Error::Solver(format!(
            "degenerate homogenized solution: θ = {theta}"
        )));
    }
    let n = fsdp.n_vars;
    let x = DVector::from_fn(n, |i, _| sol.w[i] / theta);
    let mut clamp: f64 = 0.0;
    let mut eps = Vec::with_capacity(fsdp.n_eps);
    for i in 0..fsdp.n_eps {
        let raw = match fsdp.polarization {
            Polarization::TE => 1.0 / x[i],
            Polarization::TM => x[i],
        };
        let clamped = raw.clamp(fsdp.eps_min, fsdp.eps_max);
        clamp = clamp.max((raw - clamped).abs());
        eps.push(clamped);
    }
    let (lambda_lower, lambda_upper) = match fsdp.polarization {
        Polarization::TE => (x[fsdp.n_eps], x[fsdp.n_eps + 1]),
        Polarization::TM => (1.0 / x[fsdp.n_eps], 1.0 / x[fsdp.n_eps + 1]),
    };
    let gap = crate::bands::gap_midgap(lambda_lower, lambda_upper)?;
    Ok(RecoveredDesign {
        eps,
        lambda_lower,
        lambda_upper,
        gap_midgap: gap,
        clamp_magnitude: clamp,
        x,
    })
}

/// Map a design plus band edges onto the decision vector of the fractional
/// program.
pub fn incumbent_vector(
    fsdp: &FractionalSdp,
    design: &DielectricDesign,
    lambda_lower: f64,
    lambda_upper: f64,
) -> DVector<f64> {
    let mut x = DVector::zeros(fsdp.n_vars);
    for (i, &e) in design.eps.iter().enumerate() {
        x[i] = match fsdp.polarization {
            Polarization::TE => 1.0 / e,
            Polarization::TM => e,
        };
    }
    match fsdp.polarization {
        Polarization::TE => {
            x[fsdp.n_eps] = lambda_lower;
            x[fsdp.n_eps + 1] = lambda_upper;
        }
        Polarization::TM => {
            x[fsdp.n_eps] = 1.0 / lambda_lower;
            x[fsdp.n_eps + 1] = 1.0 / lambda_upper;
        }
    }
    x
}

/// Smallest and largest generalized eigenvalues of the small Hermitian
/// pencil `(A, M)` with `M` positive definite.
fn small_pencil_extremes(a: &DMatrix<Complex64>, m: &DMatrix<Complex64>) -> Result<(f64, f64)> {
    let chol = nalgebra::Cholesky::new(m.clone())
        .ok_or_else(|| Error::Numerical("reduced mass block is not positive definite".into()))?;
    let l = chol.l();
    let tmp = l
        .solve_lower_triangular(a)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let reduced = l
        .solve_lower_triangular(&tmp.adjoint())
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let sym = (reduced.adjoint() + &reduced) * Complex64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &ev in eig.eigenvalues.iter() {
        lo = lo.min(ev);
        hi = hi.max(ev);
    }
    Ok((lo, hi))
}

/// Build a strictly feasible starting vector near the incumbent: material
/// variables pulled marginally inside the box, band-edge variables re-solved
/// from the reduced pencils so every inequality holds strictly.
pub fn strictly_interior_start(
    fsdp: &FractionalSdp,
    blocks_per_k: &[KBlocks],
    design: &DielectricDesign,
) -> Result<DVector<f64>> {
    // deep enough inside the cones that the first centering steps are cheap
    let delta = 1e-4;
    let width = fsdp.eps_max - fsdp.eps_min;
    let eps_inner: Vec<f64> = design
        .eps
        .iter()
        .map(|&e| e.clamp(fsdp.eps_min + delta * width, fsdp.eps_max - delta * width))
        .collect();

    let weights: Vec<f64> = match fsdp.polarization {
        Polarization::TE => eps_inner.iter().map(|&e| 1.0 / e).collect(),
        Polarization::TM => eps_inner.clone(),
    };
    let mut lower_max = f64::NEG_INFINITY;
    let mut upper_min = f64::INFINITY;
    for kb in blocks_per_k {
        let combine = |terms: &[DMatrix<Complex64>]| {
            let d = terms[0].nrows();
            let mut acc = DMatrix::zeros(d, d);
            for (t, &w) in terms.iter().zip(&weights) {
                acc += t * Complex64::new(w, 0.0);
            }
            acc
        };
        // In both polarizations the reduced pencil at fixed material
        // variables is (stiffness-like, mass-like) and the edge variables
        // must straddle its extreme eigenvalues.
        let (a_low, m_low, a_up, m_up) = match fsdp.polarization {
            Polarization::TE => (
                combine(&kb.lower_terms),
                kb.lower_fixed.clone(),
                combine(&kb.upper_terms),
                kb.upper_fixed.clone(),
            ),
            Polarization::TM => (
                kb.lower_fixed.clone(),
                combine(&kb.lower_terms),
                kb.upper_fixed.clone(),
                combine(&kb.upper_terms),
            ),
        };
        let (_, hi) = small_pencil_extremes(&a_low, &m_low)?;
        lower_max = lower_max.max(hi);
        let (lo, _) = small_pencil_extremes(&a_up, &m_up)?;
        upper_min = upper_min.min(lo);
    }
    let lambda_lower = lower_max.max(fsdp.floor * (1.0 + delta)) * (1.0 + delta);
    let lambda_upper = (upper_min * (1.0 - delta)).max(fsdp.floor * (1.0 + delta));
    if !(lambda_lower > 0.0 && lambda_upper > 0.0) {
        return Err(Error::Numerical(
            "could not construct a strictly interior starting point".into(),
        ));
    }
    let inner_design = DielectricDesign {
        eps: eps_inner,
        eps_min: design.eps_min,
        eps_max: design.eps_max,
    };
    Ok(incumbent_vector(
        fsdp,
        &inner_design,
        lambda_lower,
        lambda_upper,
    ))
}

/// Margin of a fractional-space point: smallest LMI eigenvalue and bound
/// slack. Positive iff strictly feasible.
pub fn fractional_margin(fsdp: &FractionalSdp, x: &DVector<f64>) -> f64 {
    let mut margin = f64::INFINITY;
    for block in &fsdp.blocks {
        let mut g = block.constant.clone();
        for (var, f) in &block.coeffs {
            g += f * x[*var];
        }
        let eig = g.symmetric_eigen();
        margin = margin.min(eig.eigenvalues.min());
    }
    for i in 0..fsdp.n_vars {
        margin = margin.min(x[i] - fsdp.var_lower[i]);
        if let Some(hi) = fsdp.var_upper[i] {
            margin = margin.min(hi - x[i]);
        }
    }
    margin
}

/// Self-describing text dump of a homogenized problem, for replay against
/// external solvers. Format: header lines (`vars`, `theta_index`,
/// `objective`, `equality`), then per-cone sections. `block <dim>` is
/// followed by one `term <var>` line per coefficient with `i j value`
/// triplets; `row <const> <var>:<coeff>...` lists scalar inequalities.
pub fn dump_linear_sdp<W: std::io::Write>(lsdp: &LinearSdp, mut w: W) -> std::io::Result<()> {
    let p = &lsdp.problem;
    writeln!(w, "# homogenized linear SDP")?;
    writeln!(w, "vars {}", p.n_vars)?;
    writeln!(w, "theta_index {}", lsdp.theta_index)?;
    write!(w, "objective")?;
    for v in p.objective.iter() {
        write!(w, " {v:.17e}")?;
    }
    writeln!(w)?;
    for r in 0..p.eq_lhs.nrows() {
        write!(w, "equality")?;
        for j in 0..p.eq_lhs.ncols() {
            write!(w, " {:.17e}", p.eq_lhs[(r, j)])?;
        }
        writeln!(w, " = {:.17e}", p.eq_rhs[r])?;
    }
    for block in &p.blocks {
        writeln!(w, "block {}", block.dim)?;
        for (var, f) in &block.coeffs {
            writeln!(w, "term {var}")?;
            for i in 0..block.dim {
                for j in 0..block.dim {
                    if f[(i, j)] != 0.0 {
                        writeln!(w, "{i} {j} {:.17e}", f[(i, j)])?;
                    }
                }
            }
        }
    }
    for row in &p.rows {
        write!(w, "row {:.17e}", row.constant)?;
        for (var, a) in &row.coeffs {
            write!(w, " {var}:{a:.17e}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}
