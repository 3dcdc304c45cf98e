//! Unit-cell grid, square-symmetry reduction of the dielectric
//! parametrization, and the Γ–X–M–Γ wavevector path.
//!
//! The unit cell is Ω = [-1, 1] x [-1, 1] (lattice constant a = 2), split
//! into n x n square cells with periodic vertex identification. The
//! dielectric is constant on each cell and invariant under the 8 symmetry
//! operations of the square, so only one value per symmetry orbit is stored;
//! orbits are computed with exact integer arithmetic on cell-center
//! coordinates to keep the partition deterministic.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Uniform n x n grid over Ω = [-1,1]² with periodic vertices.
#[derive(Debug, Clone)]
pub struct Grid {
    /// Cells per side; even and >= 2.
    pub n: usize,
    /// Cell size, `2 / n`.
    pub h: f64,
}

impl Grid {
    pub fn cell_count(&self) -> usize {
        self.n * self.n
    }

    /// Unique vertices after periodic identification.
    pub fn dof_count(&self) -> usize {
        self.n * self.n
    }

    pub fn cell_index(&self, cx: usize, cy: usize) -> usize {
        cy * self.n + cx
    }

    pub fn dof_index(&self, ix: usize, iy: usize) -> usize {
        (iy % self.n) * self.n + (ix % self.n)
    }

    /// Global DOFs of a cell's four corners, counterclockwise from the
    /// lower-left: (cx,cy), (cx+1,cy), (cx+1,cy+1), (cx,cy+1).
    pub fn cell_dofs(&self, cx: usize, cy: usize) -> [usize; 4] {
        [
            self.dof_index(cx, cy),
            self.dof_index(cx + 1, cy),
            self.dof_index(cx + 1, cy + 1),
            self.dof_index(cx, cy + 1),
        ]
    }

    pub fn cell_center(&self, cx: usize, cy: usize) -> (f64, f64) {
        (
            -1.0 + (cx as f64 + 0.5) * self.h,
            -1.0 + (cy as f64 + 0.5) * self.h,
        )
    }
}

/// Build the unit-cell grid. `n` must be even (the symmetry reduction needs
/// cell centers off the mirror axes) and at least 2.
pub fn build_grid(n: usize) -> Result<Grid> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::invalid(format!(
            "grid side must be an even integer >= 2, got {n}"
        )));
    }
    Ok(Grid {
        n,
        h: 2.0 / n as f64,
    })
}

/// Partition of the cells into orbits of the square's symmetry group.
#[derive(Debug, Clone)]
pub struct SymmetryMap {
    pub n_eps: usize,
    /// Cell index -> reduced (orbit) index.
    pub orbit_of_cell: Vec<usize>,
    /// Reduced index -> member cell indices, ascending.
    pub cells_of_orbit: Vec<Vec<usize>>,
}

/// Group the grid cells into orbits under the 8 square-symmetry operations.
///
/// Cell centers have odd integer coordinates `(2cx+1-n, 2cy+1-n)` in units
/// of `h/2`; the orbit representative is `(min |u|,|v|, max |u|,|v|)` and
/// reduced indices follow the lexicographic order of representatives. The
/// resulting count is `(1 + n/2) * (n/2) / 2`.
pub fn build_symmetry_map(grid: &Grid) -> SymmetryMap {
    let n = grid.n as i64;
    let mut reps: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    let mut rep_of_cell = Vec::with_capacity(grid.cell_count());
    for cy in 0..grid.n {
        for cx in 0..grid.n {
            let u = 2 * cx as i64 + 1 - n;
            let v = 2 * cy as i64 + 1 - n;
            let (a, b) = (u.abs().min(v.abs()), u.abs().max(v.abs()));
            rep_of_cell.push((a, b));
            reps.entry((a, b)).or_insert(0);
        }
    }
    for (index, (_, slot)) in reps.iter_mut().enumerate() {
        *slot = index;
    }
    let n_eps = reps.len();
    let mut orbit_of_cell = Vec::with_capacity(grid.cell_count());
    let mut cells_of_orbit = vec![Vec::new(); n_eps];
    for (cell, rep) in rep_of_cell.iter().enumerate() {
        let orbit = reps[rep];
        orbit_of_cell.push(orbit);
        cells_of_orbit[orbit].push(cell);
    }
    debug_assert_eq!(n_eps, (1 + grid.n / 2) * (grid.n / 2) / 2);
    SymmetryMap {
        n_eps,
        orbit_of_cell,
        cells_of_orbit,
    }
}

/// Expand a reduced per-orbit vector to a per-cell vector.
pub fn expand_design(map: &SymmetryMap, reduced: &[f64]) -> Result<Vec<f64>> {
    if reduced.len() != map.n_eps {
        return Err(Error::invalid(format!(
            "reduced vector has length {}, expected {}",
            reduced.len(),
            map.n_eps
        )));
    }
    Ok(map
        .orbit_of_cell
        .iter()
        .map(|&orbit| reduced[orbit])
        .collect())
}

/// A symmetry-reduced dielectric design with its admissible bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct DielectricDesign {
    /// One value per symmetry orbit.
    pub eps: Vec<f64>,
    pub eps_min: f64,
    pub eps_max: f64,
}

impl DielectricDesign {
    pub fn validate(&self, map: &SymmetryMap) -> Result<()> {
        if self.eps.len() != map.n_eps {
            return Err(Error::invalid(format!(
                "design has {} entries, expected {}",
                self.eps.len(),
                map.n_eps
            )));
        }
        if !(self.eps_min > 0.0 && self.eps_min < self.eps_max) {
            return Err(Error::invalid("need 0 < eps_min < eps_max".to_string()));
        }
        for (i, &e) in self.eps.iter().enumerate() {
            if !e.is_finite() || e < self.eps_min - 1e-12 || e > self.eps_max + 1e-12 {
                return Err(Error::invalid(format!(
                    "eps[{i}] = {e} outside [{}, {}]",
                    self.eps_min, self.eps_max
                )));
            }
        }
        Ok(())
    }

    pub fn expanded(&self, map: &SymmetryMap) -> Result<Vec<f64>> {
        expand_design(map, &self.eps)
    }
}

/// High-symmetry corner of the square-lattice Brillouin zone boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Corner {
    Gamma,
    X,
    M,
}

impl Corner {
    pub fn label(&self) -> &'static str {
        match self {
            Corner::Gamma => "Γ",
            Corner::X => "X",
            Corner::M => "M",
        }
    }
}

/// Wavevectors along the closed polyline Γ → X → M → Γ.
#[derive(Debug, Clone)]
pub struct KPath {
    pub points: Vec<[f64; 2]>,
    /// Indices of the corner points within `points`.
    pub corners: Vec<(usize, Corner)>,
}

impl KPath {
    pub fn n_k(&self) -> usize {
        self.points.len()
    }

    /// Cumulative arc length along the path, closing back to Γ; has
    /// `n_k + 1` entries so plots can place the trailing Γ tick.
    pub fn cumulative_arc(&self) -> Vec<f64> {
        let mut acc = vec![0.0];
        for w in 1..self.points.len() {
            let dx = self.points[w][0] - self.points[w - 1][0];
            let dy = self.points[w][1] - self.points[w - 1][1];
            acc.push(acc[w - 1] + dx.hypot(dy));
        }
        let last = self.points.last().unwrap();
        acc.push(acc.last().unwrap() + last[0].hypot(last[1]));
        acc
    }
}

/// Corner coordinates for lattice constant a = 2: Γ=(0,0), X=(π/2,0),
/// M=(π/2,π/2).
pub fn corner_coordinates(corner: Corner) -> [f64; 2] {
    match corner {
        Corner::Gamma => [0.0, 0.0],
        Corner::X => [PI / 2.0, 0.0],
        Corner::M => [PI / 2.0, PI / 2.0],
    }
}

/// Distribute `n_k` points over Γ–X–M–Γ: the three corners always included,
/// interior points spaced uniformly by arc length within each segment, the
/// closing Γ not duplicated. Interior counts are assigned by largest
/// remainder on segment lengths, ties to the earlier segment.
pub fn build_k_path(n_k: usize) -> Result<KPath> {
    if n_k < 3 {
        return Err(Error::invalid(format!("n_k must be >= 3, got {n_k}")));
    }
    let corners = [Corner::Gamma, Corner::X, Corner::M];
    let verts: Vec<[f64; 2]> = corners.iter().map(|&c| corner_coordinates(c)).collect();
    let closed: Vec<[f64; 2]> = vec![verts[0], verts[1], verts[2], verts[0]];
    let seg_len: Vec<f64> = (0..3)
        .map(|s| {
            let dx = closed[s + 1][0] - closed[s][0];
            let dy = closed[s + 1][1] - closed[s][1];
            dx.hypot(dy)
        })
        .collect();
    let total: f64 = seg_len.iter().sum();

    let interior = n_k - 3;
    let quota: Vec<f64> = seg_len
        .iter()
        .map(|l| interior as f64 * l / total)
        .collect();
    let mut counts: Vec<usize> = quota.iter().map(|q| q.floor() as usize).collect();
    let mut leftover = interior - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&i, &j| {
        let ri = quota[i] - quota[i].floor();
        let rj = quota[j] - quota[j].floor();
        rj.partial_cmp(&ri).unwrap().then(i.cmp(&j))
    });
    for &seg in &order {
        if leftover == 0 {
            break;
        }
        counts[seg] += 1;
        leftover -= 1;
    }

    let mut points = Vec::with_capacity(n_k);
    let mut corner_marks = Vec::new();
    for seg in 0..3 {
        corner_marks.push((points.len(), corners[seg]));
        points.push(closed[seg]);
        let c = counts[seg];
        for j in 1..=c {
            let t = j as f64 / (c + 1) as f64;
            points.push([
                closed[seg][0] + t * (closed[seg + 1][0] - closed[seg][0]),
                closed[seg][1] + t * (closed[seg + 1][1] - closed[seg][1]),
            ]);
        }
    }
    Ok(KPath {
        points,
        corners: corner_marks,
    })
}
