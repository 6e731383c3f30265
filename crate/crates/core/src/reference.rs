//! Sparse-assembly ground truth.
//!
//! Builds global matrices `Σ_e C_eᵀ A_e C_e` from triplets and solves the
//! constrained system directly. Nothing on the matrix-free solver path
//! depends on this module; it exists to check that path and to provide
//! reference solutions.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::elements::LocalMatrix;
use crate::error::{Error, Result};
use crate::operator::{DirichletData, LinearOperator};
use crate::{norm2, NB};

/// Largest free-node count handled by the dense routines.
pub const DENSE_LIMIT: usize = 2000;

/// Relative residual target of the conjugate-gradient fallback.
pub const CG_TOL: f64 = 1e-13;

/// Square matrix in compressed sparse row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Consolidates triplets, summing duplicates.
    pub fn from_triplets<I>(n: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut entries: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::Index { index: i.max(j), len: n });
            }
            *entries.entry((i, j)).or_insert(0.0) += v;
        }
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals = Vec::with_capacity(entries.len());
        for ((i, j), v) in entries {
            row_ptr[i + 1] += 1;
            cols.push(j);
            vals.push(v);
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(SparseMatrix { n, row_ptr, cols, vals })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[range.clone()].binary_search(&j) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => 0.0,
        }
    }

    /// `(col, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[range.clone()].iter().copied().zip(self.vals[range].iter().copied())
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// Sum of all entries, compensated (Neumaier) so the result does not
    /// drift with the number of entries.
    pub fn sum(&self) -> f64 {
        let (mut total, mut carry) = (0.0f64, 0.0f64);
        for &v in &self.vals {
            let t = total + v;
            carry += if total.abs() >= v.abs() { (total - t) + v } else { (v - t) + total };
            total = t;
        }
        total + carry
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    /// Largest entrywise difference over the union of both patterns.
    pub fn max_abs_diff(&self, other: &SparseMatrix) -> f64 {
        let one = (0..self.n).flat_map(|i| self.row(i).map(move |(j, v)| (v - other.get(i, j)).abs()));
        let two = (0..other.n).flat_map(|i| other.row(i).map(move |(j, v)| (v - self.get(i, j)).abs()));
        one.chain(two).fold(0.0, f64::max)
    }

    /// `self + s · other`.
    pub fn add_scaled(&self, s: f64, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.n != other.n {
            return Err(Error::Shape(format!("{} vs {}", self.n, other.n)));
        }
        let a = (0..self.n).flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)));
        let b = (0..other.n).flat_map(|i| other.row(i).map(move |(j, v)| (i, j, s * v)));
        SparseMatrix::from_triplets(self.n, a.chain(b))
    }

    /// Dense principal submatrix on the given indices.
    fn principal_submatrix(&self, keep: &[usize]) -> DMatrix<f64> {
        let mut pos = vec![usize::MAX; self.n];
        for (k, &g) in keep.iter().enumerate() {
            pos[g] = k;
        }
        let mut a = DMatrix::zeros(keep.len(), keep.len());
        for (k, &g) in keep.iter().enumerate() {
            for (j, v) in self.row(g) {
                if pos[j] != usize::MAX {
                    a[(k, pos[j])] = v;
                }
            }
        }
        a
    }
}

/// Triplet scatter of every local entry to `(indt[e][i], indt[e][j])`.
pub fn assemble_sparse(slices: &[LocalMatrix], indt: &[[usize; NB]], n_nodes: usize) -> Result<SparseMatrix> {
    if slices.len() != indt.len() {
        return Err(Error::Shape(format!("{} slices vs {} index columns", slices.len(), indt.len())));
    }
    let triplets = slices.iter().zip(indt).flat_map(|(a, idx)| {
        (0..NB).flat_map(move |i| (0..NB).map(move |j| (idx[i], idx[j], a[i][j])))
    });
    SparseMatrix::from_triplets(n_nodes, triplets)
}

/// An assembled matrix together with its right-hand side.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
}

impl SparseSystem {
    pub fn new(matrix: SparseMatrix, rhs: Vec<f64>) -> Result<Self> {
        if rhs.len() != matrix.dim() {
            return Err(Error::Shape(format!("rhs length {} for dimension {}", rhs.len(), matrix.dim())));
        }
        Ok(SparseSystem { matrix, rhs })
    }
}

impl LinearOperator for SparseSystem {
    fn dim(&self) -> usize {
        self.matrix.dim()
    }

    fn residual(&self, x: &[f64], r: &mut [f64]) -> Result<()> {
        self.apply(x, r)?;
        for (ri, bi) in r.iter_mut().zip(&self.rhs) {
            *ri = bi - *ri;
        }
        Ok(())
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        let n = self.dim();
        if x.len() != n || y.len() != n {
            return Err(Error::Shape(format!("vectors of length {} and {} for dimension {n}", x.len(), y.len())));
        }
        if let Some(g) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Evaluation(format!("x[{g}] = {}", x[g])));
        }
        self.matrix.matvec(x, y);
        Ok(())
    }
}

fn free_nodes(n: usize, d: &DirichletData) -> Result<Vec<usize>> {
    d.check_dim(n)?;
    let fixed = d.mask(n);
    Ok((0..n).filter(|&g| !fixed[g]).collect())
}

/// Solves `A u = b` with `u` prescribed on the constrained nodes.
///
/// Known values move to the right-hand side; the reduced SPD system is
/// factorized densely up to [`DENSE_LIMIT`] unknowns and solved by
/// conjugate gradients beyond that.
pub fn solve_reference(a: &SparseMatrix, b: &[f64], d: &DirichletData) -> Result<Vec<f64>> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::Shape(format!("rhs length {} for dimension {n}", b.len())));
    }
    let free = free_nodes(n, d)?;
    let mut u = vec![0.0; n];
    for (&g, &v) in d.nodes().iter().zip(d.values()) {
        u[g] = v;
    }
    if free.is_empty() {
        return Ok(u);
    }
    let mut pos = vec![usize::MAX; n];
    for (k, &g) in free.iter().enumerate() {
        pos[g] = k;
    }
    let mut rhs: Vec<f64> = free.iter().map(|&g| b[g]).collect();
    for (k, &g) in free.iter().enumerate() {
        for (j, v) in a.row(g) {
            if pos[j] == usize::MAX {
                rhs[k] -= v * u[j];
            }
        }
    }

    let sol = if free.len() <= DENSE_LIMIT {
        let chol = a
            .principal_submatrix(&free)
            .cholesky()
            .ok_or_else(|| Error::Factorization("reduced matrix is not positive definite".into()))?;
        chol.solve(&DVector::from_vec(rhs)).as_slice().to_vec()
    } else {
        conjugate_gradient(a, &free, &pos, &rhs)?
    };
    for (k, &g) in free.iter().enumerate() {
        u[g] = sol[k];
    }
    Ok(u)
}

fn conjugate_gradient(a: &SparseMatrix, free: &[usize], pos: &[usize], rhs: &[f64]) -> Result<Vec<f64>> {
    let m = free.len();
    let reduced_apply = |x: &[f64], y: &mut [f64]| {
        for (k, &g) in free.iter().enumerate() {
            y[k] = a.row(g).filter(|&(j, _)| pos[j] != usize::MAX).map(|(j, v)| v * x[pos[j]]).sum();
        }
    };
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();

    let mut x = vec![0.0; m];
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut q = vec![0.0; m];
    let target = CG_TOL * norm2(rhs);
    let mut rr = dot(&r, &r);
    for _ in 0..(10 * m).max(100) {
        if rr.sqrt() <= target {
            return Ok(x);
        }
        reduced_apply(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(Error::Factorization("reduced matrix is not positive definite".into()));
        }
        let step = rr / pq;
        for k in 0..m {
            x[k] += step * p[k];
            r[k] -= step * q[k];
        }
        let rr_next = dot(&r, &r);
        let beta = rr_next / rr;
        rr = rr_next;
        for k in 0..m {
            p[k] = r[k] + beta * p[k];
        }
    }
    Err(Error::Factorization(format!("conjugate gradients stalled at residual {:e}", rr.sqrt())))
}

/// Ascending spectrum of the free-node principal submatrix.
pub fn dense_interior_eigenvalues(a: &SparseMatrix, d: &DirichletData) -> Result<Vec<f64>> {
    let free = free_nodes(a.dim(), d)?;
    if free.len() > DENSE_LIMIT {
        return Err(Error::Size(format!("{} free nodes exceed the dense limit {DENSE_LIMIT}", free.len())));
    }
    let eig = SymmetricEigen::new(a.principal_submatrix(&free));
    let mut values = eig.eigenvalues.as_slice().to_vec();
    values.sort_by(f64::total_cmp);
    Ok(values)
}
