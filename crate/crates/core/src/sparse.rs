//! Compressed-column storage, element assembly and constrained Cholesky solves.

use std::collections::VecDeque;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{MatMut, Side};

use crate::error::{Error, Result};

/// Square sparse matrix in compressed-column form with sorted row indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CscMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Entries of column `j` as `(row, value)`.
    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        self.row_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        match self.row_idx[range.clone()].binary_search(&i) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            for (i, a) in self.column(j) {
                y[i] += a * xj;
            }
        }
        y
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for j in 0..self.n {
            for (i, a) in self.column(j) {
                worst = worst.max((a - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for j in 0..self.n {
            for (i, a) in self.column(j) {
                d[i][j] = a;
            }
        }
        d
    }
}

/// Sparsity pattern of an element-assembled matrix plus the scatter map of
/// every element-matrix entry into the global value array.
#[derive(Debug, Clone)]
pub struct AssemblyPlan {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    /// Per element, row-major `k × k` slots into the value array.
    scatter: Vec<Vec<usize>>,
}

impl AssemblyPlan {
    /// `element_dofs[e]` lists the global indices of element `e`'s local dofs.
    pub fn new(n: usize, element_dofs: &[Vec<usize>]) -> Self {
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
        for dofs in element_dofs {
            for &j in dofs {
                cols[j].extend_from_slice(dofs);
            }
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for c in cols.iter_mut() {
            c.sort_unstable();
            c.dedup();
            row_idx.extend_from_slice(c);
            col_ptr.push(row_idx.len());
        }
        let scatter = element_dofs
            .iter()
            .map(|dofs| {
                let mut slots = Vec::with_capacity(dofs.len() * dofs.len());
                for &i in dofs {
                    for &j in dofs {
                        let range = col_ptr[j]..col_ptr[j + 1];
                        let k = row_idx[range.clone()]
                            .binary_search(&i)
                            .expect("entry present in pattern");
                        slots.push(range.start + k);
                    }
                }
                slots
            })
            .collect();
        AssemblyPlan {
            n,
            col_ptr,
            row_idx,
            scatter,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn num_elements(&self) -> usize {
        self.scatter.len()
    }

    /// Sums the element matrices in element order.
    pub fn assemble<F>(&self, mut element_matrix: F) -> CscMatrix
    where
        F: FnMut(usize, &mut [f64]),
    {
        let mut values = vec![0.0; self.row_idx.len()];
        let mut buf = Vec::new();
        for (e, slots) in self.scatter.iter().enumerate() {
            buf.clear();
            buf.resize(slots.len(), 0.0);
            element_matrix(e, &mut buf);
            for (&s, &v) in slots.iter().zip(&buf) {
                values[s] += v;
            }
        }
        CscMatrix {
            n: self.n,
            col_ptr: self.col_ptr.clone(),
            row_idx: self.row_idx.clone(),
            values,
        }
    }

    /// Assembles from a precomputed list of element matrices.
    pub fn assemble_from(&self, element_matrices: &[Vec<f64>]) -> CscMatrix {
        self.assemble(|e, out| out.copy_from_slice(&element_matrices[e]))
    }
}

/// Cholesky solver for the free block of a matrix with some dofs prescribed.
///
/// The symbolic factorization is computed once; every call to
/// [`ConstrainedSolver::factorize`] reuses it for a new set of values with
/// the same pattern.
#[derive(Debug, Clone)]
pub struct ConstrainedSolver {
    n: usize,
    /// Global index → reduced index for free dofs.
    reduced: Vec<Option<usize>>,
    free: Vec<usize>,
    prescribed: Vec<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    /// Reduced (lower-triangle) slot → index into the full value array.
    source: Vec<usize>,
    symbolic: SymbolicLlt<usize>,
    /// Free dofs with no path to a prescribed dof through the pattern.
    floating: Vec<usize>,
}

/// Numeric factorization produced by [`ConstrainedSolver::factorize`].
#[derive(Debug, Clone)]
pub struct Factorization {
    llt: Llt<usize, f64>,
}

impl ConstrainedSolver {
    pub fn new(pattern: &CscMatrix, prescribed: &[usize]) -> Result<Self> {
        let n = pattern.dim();
        let mut is_prescribed = vec![false; n];
        for &p in prescribed {
            if p >= n {
                return Err(Error::InvalidArgument(format!(
                    "prescribed dof {p} out of range 0..{n}"
                )));
            }
            is_prescribed[p] = true;
        }
        let mut reduced = vec![None; n];
        let mut free = Vec::new();
        for i in 0..n {
            if !is_prescribed[i] {
                reduced[i] = Some(free.len());
                free.push(i);
            }
        }
        let mut col_ptr = vec![0];
        let mut row_idx = Vec::new();
        let mut source = Vec::new();
        for &j in &free {
            for k in pattern.col_ptr[j]..pattern.col_ptr[j + 1] {
                let i = pattern.row_idx[k];
                if let Some(ri) = reduced[i] {
                    if i >= j {
                        row_idx.push(ri);
                        source.push(k);
                    }
                }
            }
            col_ptr.push(row_idx.len());
        }
        let m = free.len();
        let symbolic = SymbolicLlt::try_new(
            SymbolicSparseColMatRef::new_checked(m, m, &col_ptr, None, &row_idx),
            Side::Lower,
        )
        .map_err(|e| Error::SolverFailure {
            message: format!("symbolic factorization failed: {e:?}"),
            residual: f64::NAN,
        })?;

        // breadth-first search from the prescribed set
        let mut reached = is_prescribed.clone();
        let mut queue: VecDeque<usize> = prescribed.iter().copied().collect();
        while let Some(j) = queue.pop_front() {
            for k in pattern.col_ptr[j]..pattern.col_ptr[j + 1] {
                let i = pattern.row_idx[k];
                if !reached[i] {
                    reached[i] = true;
                    queue.push_back(i);
                }
            }
        }
        let floating = (0..n).filter(|&i| !reached[i]).collect();

        let mut dedup = prescribed.to_vec();
        dedup.sort_unstable();
        dedup.dedup();
        Ok(ConstrainedSolver {
            n,
            reduced,
            free,
            prescribed: dedup,
            col_ptr,
            row_idx,
            source,
            symbolic,
            floating,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    pub fn prescribed_dofs(&self) -> &[usize] {
        &self.prescribed
    }

    pub fn reduced_index(&self, i: usize) -> Option<usize> {
        self.reduced[i]
    }

    /// Free dofs not connected to any prescribed dof.
    pub fn floating_dofs(&self) -> &[usize] {
        &self.floating
    }

    pub fn factorize(&self, a: &CscMatrix) -> Result<Factorization> {
        if a.dim() != self.n {
            return Err(Error::InvalidArgument(format!(
                "matrix dimension {} does not match solver dimension {}",
                a.dim(),
                self.n
            )));
        }
        let m = self.free.len();
        let values: Vec<f64> = self.source.iter().map(|&k| a.values[k]).collect();
        let sym = SymbolicSparseColMatRef::new_checked(m, m, &self.col_ptr, None, &self.row_idx);
        let mat = SparseColMatRef::new(sym, &values);
        let llt = Llt::try_new_with_symbolic(self.symbolic.clone(), mat, Side::Lower).map_err(
            |e| {
                let detail = if self.floating.is_empty() {
                    String::new()
                } else {
                    format!("; dofs without a prescribed value in reach: {:?}", self.floating)
                };
                Error::Singular(format!(
                    "Cholesky factorization failed ({e:?}){detail}"
                ))
            },
        )?;
        Ok(Factorization { llt })
    }

    /// Solves `A x = b` with `x[i] = values[i]` on prescribed dofs.
    ///
    /// `prescribed_values` is indexed globally; only prescribed entries are read.
    pub fn solve(
        &self,
        a: &CscMatrix,
        factor: &Factorization,
        rhs: &[f64],
        prescribed_values: &[f64],
    ) -> Vec<f64> {
        let m = self.free.len();
        let mut b: Vec<f64> = self.free.iter().map(|&i| rhs[i]).collect();
        for &c in &self.prescribed {
            let xc = prescribed_values[c];
            if xc == 0.0 {
                continue;
            }
            for (i, aic) in a.column(c) {
                if let Some(ri) = self.reduced[i] {
                    b[ri] -= aic * xc;
                }
            }
        }
        factor
            .llt
            .solve_in_place(MatMut::from_column_major_slice_mut(&mut b, m, 1));
        let mut x = vec![0.0; self.n];
        for &c in &self.prescribed {
            x[c] = prescribed_values[c];
        }
        for (ri, &i) in self.free.iter().enumerate() {
            x[i] = b[ri];
        }
        x
    }

    /// Solves with the free block only: `A_ff y = b_f`, zero on prescribed dofs.
    pub fn solve_homogeneous(&self, factor: &Factorization, rhs: &[f64]) -> Vec<f64> {
        let m = self.free.len();
        let mut b: Vec<f64> = self.free.iter().map(|&i| rhs[i]).collect();
        factor
            .llt
            .solve_in_place(MatMut::from_column_major_slice_mut(&mut b, m, 1));
        let mut x = vec![0.0; self.n];
        for (ri, &i) in self.free.iter().enumerate() {
            x[i] = b[ri];
        }
        x
    }

    /// `‖(A x - b)_free‖`.
    pub fn free_residual(&self, a: &CscMatrix, x: &[f64], rhs: &[f64]) -> f64 {
        let ax = a.mul_vec(x);
        self.free
            .iter()
            .map(|&i| (ax[i] - rhs[i]).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
