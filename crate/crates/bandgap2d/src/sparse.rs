//! Minimal complex sparse matrices for operator assembly.
//!
//! Assembly accumulates triplets in a deterministic order and compresses to
//! CSR, so repeated runs produce bit-identical matrices. Hermitian operators
//! are built from their upper triangle and mirrored, which makes `A = A*`
//! hold exactly rather than up to rounding.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct TripletBuilder {
    dim: usize,
    entries: Vec<(u32, u32, Complex64)>,
}

impl TripletBuilder {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: Complex64) {
        debug_assert!(row < self.dim && col < self.dim);
        self.entries.push((row as u32, col as u32, value));
    }

    /// Compress to CSR, summing duplicate coordinates.
    pub fn build(mut self) -> CsrMatrix {
        // Stable sort keeps the accumulation order of equal coordinates
        // deterministic.
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        CsrMatrix::from_sorted_triplets(self.dim, &self.entries)
    }

    /// Compress to a Hermitian CSR using only the upper triangle.
    ///
    /// Entries with `row > col` are dropped; the caller must guarantee they
    /// mirror the kept ones (true for scattered Hermitian element matrices).
    /// The lower triangle is reconstructed as the exact conjugate and
    /// diagonal imaginary parts are forced to zero.
    pub fn build_hermitian(mut self) -> CsrMatrix {
        self.entries.retain(|&(r, c, _)| r <= c);
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let upper = CsrMatrix::from_sorted_triplets(self.dim, &self.entries);

        let mut full = TripletBuilder::new(self.dim);
        for row in 0..self.dim {
            for idx in upper.row_ptr[row]..upper.row_ptr[row + 1] {
                let col = upper.cols[idx];
                let v = upper.vals[idx];
                if row == col {
                    full.push(row, col, Complex64::new(v.re, 0.0));
                } else {
                    full.push(row, col, v);
                    full.push(col, row, v.conj());
                }
            }
        }
        full.entries.sort_by_key(|&(r, c, _)| (r, c));
        CsrMatrix::from_sorted_triplets(self.dim, &full.entries)
    }
}

#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub dim: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<Complex64>,
}

impl CsrMatrix {
    fn from_sorted_triplets(dim: usize, entries: &[(u32, u32, Complex64)]) -> Self {
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::new();
        let mut vals: Vec<Complex64> = Vec::new();
        let mut last: Option<(u32, u32)> = None;
        for &(r, c, v) in entries {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c as usize);
                vals.push(v);
                row_ptr[r as usize + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            dim,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: vec![0; dim + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[Complex64], y: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        for row in 0..self.dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for idx in self.row_ptr[row]..self.row_ptr[row + 1] {
                acc += self.vals[idx] * x[self.cols[idx]];
            }
            y[row] = acc;
        }
    }

    /// Dense B = A * X for a tall dense block X (dim x k).
    pub fn mul_dense(&self, x: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        debug_assert_eq!(x.nrows(), self.dim);
        let k = x.ncols();
        let mut out = DMatrix::zeros(self.dim, k);
        for row in 0..self.dim {
            for idx in self.row_ptr[row]..self.row_ptr[row + 1] {
                let col = self.cols[idx];
                let v = self.vals[idx];
                for j in 0..k {
                    out[(row, j)] += v * x[(col, j)];
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for row in 0..self.dim {
            for idx in self.row_ptr[row]..self.row_ptr[row + 1] {
                m[(row, self.cols[idx])] += self.vals[idx];
            }
        }
        m
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.vals.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest magnitude of `A - A*` over stored entries (0 for exactly
    /// Hermitian matrices built through [`TripletBuilder::build_hermitian`]).
    pub fn hermitian_error(&self) -> f64 {
        let dense = self.to_dense();
        let adj = dense.adjoint();
        (dense - adj).camax()
    }

    /// Largest imaginary part of any stored entry.
    pub fn max_imag(&self) -> f64 {
        self.vals.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        let mut d = vec![Complex64::new(0.0, 0.0); self.dim];
        for row in 0..self.dim {
            for idx in self.row_ptr[row]..self.row_ptr[row + 1] {
                if self.cols[idx] == row {
                    d[row] += self.vals[idx];
                }
            }
        }
        d
    }

    /// Entrywise conjugate.
    pub fn conjugate(&self) -> CsrMatrix {
        let mut out = self.clone();
        for v in &mut out.vals {
            *v = v.conj();
        }
        out
    }

    /// Deterministic linear combination `sum_i weights[i] * terms[i]`.
    pub fn weighted_sum(dim: usize, terms: &[CsrMatrix], weights: &[f64]) -> Result<CsrMatrix> {
        if terms.len() != weights.len() {
            return Err(Error::invalid(format!(
                "weighted_sum: {} terms but {} weights",
                terms.len(),
                weights.len()
            )));
        }
        let mut builder = TripletBuilder::new(dim);
        for (term, &w) in terms.iter().zip(weights) {
            debug_assert_eq!(term.dim, dim);
            for row in 0..dim {
                for idx in term.row_ptr[row]..term.row_ptr[row + 1] {
                    builder.push(row, term.cols[idx], term.vals[idx] * w);
                }
            }
        }
        Ok(builder.build())
    }

    /// Unweighted sum of matrices of equal dimension.
    pub fn sum(dim: usize, terms: &[CsrMatrix]) -> CsrMatrix {
        let weights = vec![1.0; terms.len()];
        CsrMatrix::weighted_sum(dim, terms, &weights).expect("lengths match")
    }

    /// Write `row col re im` triplet lines, one stored entry per line.
    pub fn dump_triplets<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# dim {} nnz {}", self.dim, self.nnz())?;
        for row in 0..self.dim {
            for idx in self.row_ptr[row]..self.row_ptr[row + 1] {
                let v = self.vals[idx];
                writeln!(w, "{} {} {:.17e} {:.17e}", row, self.cols[idx], v.re, v.im)?;
            }
        }
        Ok(())
    }
}
