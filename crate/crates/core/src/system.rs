//! Global DoF numbering, sparse assembly and the linear solve.
//!
//! Assembly computes local matrices in parallel and scatters them serially
//! in cell order, then facet order. The compressed-row matrix sums duplicate
//! entries in that fixed order, so the output does not depend on the number
//! of threads.

use std::fmt::Write as _;
use std::path::Path;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forms::{cell_matrix, facet_matrix, local_load, ModelParams, ProblemData};
use crate::mesh::PolyMesh;
use crate::polybasis::{cell_quadrature, dim_p2};
use crate::vemspace::LocalSpace;

/// Facet DoFs first (facet major, moment order minor), then interior DoFs
/// (cell major, graded-lex minor).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalDofMap {
    pub k: usize,
    pub n_facets: usize,
    /// interior moments per cell
    pub n_interior: usize,
    pub n_dofs: usize,
    /// local → global index for each cell, in local DoF order
    pub cell_dofs: Vec<Vec<usize>>,
}

impl GlobalDofMap {
    pub fn facet_dof(&self, facet: usize, l: usize) -> usize {
        facet * self.k + l
    }

    pub fn interior_dof(&self, cell: usize, j: usize) -> usize {
        self.k * self.n_facets + cell * self.n_interior + j
    }

    /// Gathers the local DoFs of `cell` from a global vector.
    pub fn gather(&self, cell: usize, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.cell_dofs[cell].len(), self.cell_dofs[cell].iter().map(|&g| u[g]))
    }
}

pub fn build_dof_map(mesh: &PolyMesh, k: usize) -> GlobalDofMap {
    let n_interior = dim_p2(k as isize - 2);
    let mut map = GlobalDofMap {
        k,
        n_facets: mesh.num_facets(),
        n_interior,
        n_dofs: k * mesh.num_facets() + n_interior * mesh.num_cells(),
        cell_dofs: Vec::with_capacity(mesh.num_cells()),
    };
    for (c, facets) in mesh.cell_facets.iter().enumerate() {
        let mut dofs = Vec::with_capacity(k * facets.len() + n_interior);
        for &f in facets {
            dofs.extend((0..k).map(|l| map.facet_dof(f, l)));
        }
        dofs.extend((0..n_interior).map(|j| map.interior_dof(c, j)));
        map.cell_dofs.push(dofs);
    }
    map
}

/// A mesh together with its local spaces and global numbering.
#[derive(Debug, Clone)]
pub struct Discretization<'m> {
    pub mesh: &'m PolyMesh,
    pub k: usize,
    pub spaces: Vec<LocalSpace>,
    pub dofmap: GlobalDofMap,
}

impl<'m> Discretization<'m> {
    pub fn new(mesh: &'m PolyMesh, k: usize) -> Result<Self> {
        let spaces = (0..mesh.num_cells())
            .into_par_iter()
            .map(|c| LocalSpace::new(mesh, c, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(Discretization {
            mesh,
            k,
            spaces,
            dofmap: build_dof_map(mesh, k),
        })
    }

    /// Exactness of the rule used for the source term and the errors.
    pub fn data_exactness(&self) -> usize {
        2 * self.k + 6
    }
}

/// Square matrix in compressed-row form with sorted, unique column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds the matrix from `(row, col, value)` entries. Duplicates are
    /// summed in input order.
    pub fn from_triplets(n: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; n + 1];
        for &(r, c, _) in entries {
            if r >= n || c >= n {
                return Err(Error::Contract(format!("entry ({r}, {c}) outside a {n}×{n} matrix")));
            }
            counts[r + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut bucket = vec![(0usize, 0.0f64); entries.len()];
        for &(r, c, v) in entries {
            bucket[next[r]] = (c, v);
            next[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for r in 0..n {
            let row = &mut bucket[counts[r]..counts[r + 1]];
            // stable: equal columns keep input order
            row.sort_by_key(|&(c, _)| c);
            for &(c, v) in row.iter() {
                if col_idx.len() > *row_ptr.last().unwrap() && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let cols = &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]];
        match cols.binary_search(&c) {
            Ok(i) => self.values[self.row_ptr[r] + i],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.n, |r, _| {
            (self.row_ptr[r]..self.row_ptr[r + 1])
                .map(|i| self.values[i] * x[self.col_idx[i]])
                .sum()
        })
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.n {
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                worst = worst.max((self.values[i] - self.get(self.col_idx[i], r)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                d[(r, self.col_idx[i])] = self.values[i];
            }
        }
        d
    }

    /// MatrixMarket coordinate format, 1-based indices.
    pub fn to_matrix_market(&self) -> String {
        let mut s = String::with_capacity(32 * self.nnz() + 64);
        s.push_str("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(s, "{} {} {}", self.n, self.n, self.nnz());
        for r in 0..self.n {
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                let _ = writeln!(s, "{} {} {:.17e}", r + 1, self.col_idx[i] + 1, self.values[i]);
            }
        }
        s
    }

    pub fn write_matrix_market(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_matrix_market().as_bytes())
    }
}

#[derive(Debug, Clone)]
pub struct GlobalSystem {
    pub matrix: CsrMatrix,
    pub rhs: DVector<f64>,
}

fn check_finite(m: &DMatrix<f64>, what: impl FnOnce() -> String) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what()))
    }
}

/// Assembles the global operator and load vector.
pub fn assemble(disc: &Discretization, params: &ModelParams, data: &dyn ProblemData) -> Result<GlobalSystem> {
    params.validate()?;
    let mesh = disc.mesh;
    let map = &disc.dofmap;
    let ex = disc.data_exactness();

    let mut rows = RowAccumulator::new(map.n_dofs);
    let mut rhs = DVector::zeros(map.n_dofs);
    for chunk in disc.spaces.chunks(ASSEMBLY_CHUNK) {
        let local: Vec<(DMatrix<f64>, DVector<f64>)> = chunk
            .par_iter()
            .map(|s| {
                let a = cell_matrix(s, data, params)?;
                let rule = cell_quadrature(mesh, s.cell, ex);
                let f = local_load(s, data, params, &rule);
                check_finite(&a, || format!("cell {}", s.cell))?;
                if !f.iter().all(|v| v.is_finite()) {
                    return Err(Error::NonFinite(format!("load vector of cell {}", s.cell)));
                }
                Ok((a, f))
            })
            .collect::<Result<_>>()?;
        for (s, (a, f)) in chunk.iter().zip(&local) {
            let dofs = &map.cell_dofs[s.cell];
            for (i, &gi) in dofs.iter().enumerate() {
                rhs[gi] += f[i];
                for (j, &gj) in dofs.iter().enumerate() {
                    rows.add(gi, gj, a[(i, j)]);
                }
            }
        }
    }

    let interior: Vec<usize> = (0..mesh.num_facets()).filter(|&f| !mesh.facets[f].is_boundary()).collect();
    for chunk in interior.chunks(ASSEMBLY_CHUNK) {
        let local: Vec<DMatrix<f64>> = chunk
            .par_iter()
            .map(|&f| {
                let m = facet_matrix(mesh, f, &disc.spaces, data, params)?;
                check_finite(&m, || format!("facet {f}"))?;
                Ok(m)
            })
            .collect::<Result<_>>()?;
        for (&f, m) in chunk.iter().zip(&local) {
            let rec = &mesh.facets[f];
            let dofs: Vec<usize> = map.cell_dofs[rec.owner]
                .iter()
                .chain(&map.cell_dofs[rec.neighbor.unwrap()])
                .copied()
                .collect();
            for (i, &gi) in dofs.iter().enumerate() {
                for (j, &gj) in dofs.iter().enumerate() {
                    let v = m[(i, j)];
                    if v != 0.0 {
                        rows.add(gi, gj, v);
                    }
                }
            }
        }
    }
    Ok(GlobalSystem {
        matrix: rows.into_csr(),
        rhs,
    })
}

/// Local matrices computed at once between two serial scatters; bounds
/// the memory held by dense local blocks.
const ASSEMBLY_CHUNK: usize = 1024;

/// Rows kept sorted by column while contributions arrive. The first
/// contribution to an entry sets it and later ones are added in arrival
/// order, so the result equals [`CsrMatrix::from_triplets`] on the same
/// stream.
struct RowAccumulator {
    rows: Vec<Vec<(usize, f64)>>,
}

impl RowAccumulator {
    fn new(n: usize) -> Self {
        RowAccumulator { rows: vec![Vec::new(); n] }
    }

    fn add(&mut self, r: usize, c: usize, v: f64) {
        let row = &mut self.rows[r];
        match row.binary_search_by_key(&c, |e| e.0) {
            Ok(i) => row[i].1 += v,
            Err(i) => row.insert(i, (c, v)),
        }
    }

    fn into_csr(self) -> CsrMatrix {
        let n = self.rows.len();
        let nnz = self.rows.iter().map(Vec::len).sum();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for row in self.rows {
            for (c, v) in row {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }
}

/// Solution of the linear system and its relative residual.
#[derive(Debug, Clone)]
pub struct Solution {
    pub x: DVector<f64>,
    /// `‖Ax - b‖ / ‖b‖` (absolute when `b = 0`)
    pub residual: f64,
}

/// Sparse LU with partial pivoting followed by up to three steps of
/// iterative refinement.
pub fn solve(system: &GlobalSystem) -> Result<Solution> {
    let a = &system.matrix;
    let n = a.n;
    if n == 0 {
        return Ok(Solution { x: DVector::zeros(0), residual: 0.0 });
    }
    let mut triplets = Vec::with_capacity(a.nnz());
    for r in 0..n {
        for i in a.row_ptr[r]..a.row_ptr[r + 1] {
            triplets.push(Triplet::new(r, a.col_idx[i], a.values[i]));
        }
    }
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| Error::Solver(format!("matrix construction failed: {e:?}")))?;
    drop(triplets);
    let lu = mat
        .sp_lu()
        .map_err(|e| Error::Solver(format!("LU factorization failed: {e:?}")))?;
    let solve_with = |b: &DVector<f64>| -> DVector<f64> {
        let rhs = faer::Col::<f64>::from_fn(n, |i| b[i]);
        let x = lu.solve(&rhs);
        DVector::from_fn(n, |i, _| x[i])
    };

    let b = &system.rhs;
    let bnorm = b.norm();
    let scale = if bnorm > 0.0 { bnorm } else { 1.0 };
    let mut x = solve_with(b);
    let mut r = b - a.mul_vec(&x);
    let mut residual = r.norm() / scale;
    for _ in 0..3 {
        if !residual.is_finite() || residual <= 1e-14 {
            break;
        }
        let candidate = &x + solve_with(&r);
        let rc = b - a.mul_vec(&candidate);
        let res_c = rc.norm() / scale;
        if !(res_c < residual) {
            break;
        }
        x = candidate;
        r = rc;
        residual = res_c;
    }
    if !residual.is_finite() || !x.iter().all(|v| v.is_finite()) {
        return Err(Error::Solver("factorization is numerically singular".into()));
    }
    Ok(Solution { x, residual })
}
