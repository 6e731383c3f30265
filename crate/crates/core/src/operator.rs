//! Element-by-element residual `r = b - A x` without a global matrix.
//!
//! Each residual evaluation gathers `x_e = x[ind_e]`, forms the local
//! residual `b_e - A_e x_e` and scatter-adds it through `indt`. Dirichlet
//! conditions are enforced only by zeroing the residual on constrained
//! nodes; iterates started from a conforming guess never leave the
//! prescribed values.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use crate::elements::{ElementBatch, LocalMatrix, LocalVector};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::NB;

/// Elements per rayon task.
const MIN_CHUNK: usize = 2048;

/// Anything that can produce residuals and matrix-vector products.
pub trait LinearOperator {
    fn dim(&self) -> usize;

    /// `r = b - A x`.
    fn residual(&self, x: &[f64], r: &mut [f64]) -> Result<()>;

    /// `y = A x`.
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()>;
}

/// How local contributions are accumulated into the global vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScatterMode {
    /// Bitwise independent of the thread count: every node sums its
    /// contributions in element order, exactly like a sequential scatter.
    #[default]
    Deterministic,
    /// Lock-free atomic adds; results vary in the last bits between runs.
    Atomic,
}

/// Prescribed values on a subset of nodes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DirichletData {
    nodes: Vec<usize>,
    values: Vec<f64>,
}

impl DirichletData {
    /// Sorts by node; rejects duplicates, mismatched lengths and non-finite
    /// values.
    pub fn new(nodes: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() != values.len() {
            return Err(Error::Shape(format!("{} nodes vs {} values", nodes.len(), values.len())));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Evaluation(format!("prescribed value {v}")));
        }
        let mut pairs: Vec<(usize, f64)> = nodes.into_iter().zip(values).collect();
        pairs.sort_by_key(|p| p.0);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Parameter("duplicate constrained node".into()));
        }
        let (nodes, values) = pairs.into_iter().unzip();
        Ok(DirichletData { nodes, values })
    }

    /// The same value on every boundary node of `mesh`.
    pub fn on_boundary(mesh: &Mesh, value: f64) -> Result<Self> {
        let nodes = mesh.boundary_nodes().to_vec();
        let values = vec![value; nodes.len()];
        Self::new(nodes, values)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Errors if a constrained node is not below `n`.
    pub fn check_dim(&self, n: usize) -> Result<()> {
        match self.nodes.last() {
            Some(&g) if g >= n => Err(Error::Index { index: g, len: n }),
            _ => Ok(()),
        }
    }

    /// Boolean mask, `true` on constrained nodes.
    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &g in &self.nodes {
            m[g] = true;
        }
        m
    }
}

/// Zeroes `r` on the constrained nodes.
pub fn mask_dirichlet(r: &mut [f64], d: &DirichletData) {
    for &g in &d.nodes {
        r[g] = 0.0;
    }
}

/// Conforming initial guess: prescribed values on constrained nodes, zero
/// elsewhere.
pub fn apply_initial_guess(n_nodes: usize, d: &DirichletData) -> Vec<f64> {
    let mut x = vec![0.0; n_nodes];
    for (&g, &v) in d.nodes.iter().zip(&d.values) {
        x[g] = v;
    }
    x
}

/// Scatter-adds local vectors through `indt`.
pub fn assemble_rhs(bt_e: &[LocalVector], indt: &[[usize; NB]], n_nodes: usize) -> Result<Vec<f64>> {
    if bt_e.len() != indt.len() {
        return Err(Error::Shape(format!("{} local vectors vs {} index columns", bt_e.len(), indt.len())));
    }
    let mut b = vec![0.0; n_nodes];
    for (local, idx) in bt_e.iter().zip(indt) {
        for j in 0..NB {
            let g = idx[j];
            if g >= n_nodes {
                return Err(Error::Index { index: g, len: n_nodes });
            }
            b[g] += local[j];
        }
    }
    Ok(b)
}

/// For each node, the flat positions `3·e + j` of its incident local entries
/// in increasing order (compressed rows).
#[derive(Debug, Clone)]
struct Incidence {
    offsets: Vec<usize>,
    slots: Vec<usize>,
}

impl Incidence {
    fn new(indt: &[[usize; NB]], n_nodes: usize) -> Self {
        let mut offsets = vec![0usize; n_nodes + 1];
        for idx in indt {
            for &g in idx {
                offsets[g + 1] += 1;
            }
        }
        for g in 0..n_nodes {
            offsets[g + 1] += offsets[g];
        }
        let mut fill = offsets.clone();
        let mut slots = vec![0usize; offsets[n_nodes]];
        for (e, idx) in indt.iter().enumerate() {
            for (j, &g) in idx.iter().enumerate() {
                slots[fill[g]] = NB * e + j;
                fill[g] += 1;
            }
        }
        Incidence { offsets, slots }
    }
}

/// Matrix-free operator over a batch of element matrices.
#[derive(Debug, Clone)]
pub struct MatrixFreeOperator {
    batch: ElementBatch,
    incidence: Incidence,
    mode: ScatterMode,
}

impl MatrixFreeOperator {
    pub fn new(batch: ElementBatch, mode: ScatterMode) -> Result<Self> {
        let n = batch.n_nodes;
        let idx = &batch.index;
        if idx.ind_e.len() != batch.a_e.len() || idx.indt.len() != batch.a_e.len() || batch.bt_e.len() != batch.a_e.len() {
            return Err(Error::Shape("element arrays disagree on the element count".into()));
        }
        for tri in idx.ind_e.iter().chain(&idx.indt) {
            if let Some(&g) = tri.iter().find(|&&g| g >= n) {
                return Err(Error::Index { index: g, len: n });
            }
        }
        let incidence = Incidence::new(&idx.indt, n);
        Ok(MatrixFreeOperator { batch, incidence, mode })
    }

    pub fn batch(&self) -> &ElementBatch {
        &self.batch
    }

    pub fn mode(&self) -> ScatterMode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: ScatterMode) {
        self.mode = mode;
    }

    /// Assembled right-hand side `b`.
    pub fn rhs(&self) -> Vec<f64> {
        let mut b = vec![0.0; self.dim()];
        self.scatter(&self.batch.bt_e, &mut b);
        b
    }

    /// Local residuals `b_e - A_e x_e`, or local products `A_e x_e` when
    /// `residual` is false.
    fn local_terms(&self, x: &[f64], residual: bool) -> Vec<LocalVector> {
        let batch = &self.batch;
        let kernel = |(a, (bt, idx)): (&LocalMatrix, (&LocalVector, &[usize; NB]))| {
            let xe = idx.map(|g| x[g]);
            let mut re = [0.0; NB];
            for i in 0..NB {
                let ax = a[i][0] * xe[0] + a[i][1] * xe[1] + a[i][2] * xe[2];
                re[i] = if residual { bt[i] - ax } else { ax };
            }
            re
        };
        let items = batch.a_e.par_iter().zip(batch.bt_e.par_iter().zip(batch.index.ind_e.par_iter()));
        items.with_min_len(MIN_CHUNK).map(kernel).collect()
    }

    fn scatter(&self, local: &[LocalVector], out: &mut [f64]) {
        let indt = &self.batch.index.indt;
        match self.mode {
            ScatterMode::Deterministic if rayon::current_num_threads() == 1 => {
                out.fill(0.0);
                for (re, idx) in local.iter().zip(indt) {
                    for j in 0..NB {
                        out[idx[j]] += re[j];
                    }
                }
            }
            ScatterMode::Deterministic => {
                let flat = local.as_flattened();
                let inc = &self.incidence;
                out.par_iter_mut().with_min_len(MIN_CHUNK).enumerate().for_each(|(g, o)| {
                    let mut acc = 0.0;
                    for &s in &inc.slots[inc.offsets[g]..inc.offsets[g + 1]] {
                        acc += flat[s];
                    }
                    *o = acc;
                });
            }
            ScatterMode::Atomic => {
                let acc: Vec<AtomicU64> = (0..out.len()).map(|_| AtomicU64::new(0f64.to_bits())).collect();
                local.par_iter().zip(indt.par_iter()).with_min_len(MIN_CHUNK).for_each(|(re, idx)| {
                    for j in 0..NB {
                        atomic_add(&acc[idx[j]], re[j]);
                    }
                });
                for (o, a) in out.iter_mut().zip(acc) {
                    *o = f64::from_bits(a.into_inner());
                }
            }
        }
    }

    fn check_input(&self, x: &[f64], out: &[f64]) -> Result<()> {
        let n = self.dim();
        if x.len() != n || out.len() != n {
            return Err(Error::Shape(format!("vectors of length {} and {} for {n} nodes", x.len(), out.len())));
        }
        if let Some(g) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Evaluation(format!("x[{g}] = {}", x[g])));
        }
        Ok(())
    }
}

fn atomic_add(cell: &AtomicU64, v: f64) {
    let mut cur = cell.load(Ordering::Relaxed);
    loop {
        let next = (f64::from_bits(cur) + v).to_bits();
        match cell.compare_exchange_weak(cur, next, Ordering::Relaxed, Ordering::Relaxed) {
            Ok(_) => return,
            Err(seen) => cur = seen,
        }
    }
}

impl LinearOperator for MatrixFreeOperator {
    fn dim(&self) -> usize {
        self.batch.n_nodes
    }

    fn residual(&self, x: &[f64], r: &mut [f64]) -> Result<()> {
        self.check_input(x, r)?;
        let local = self.local_terms(x, true);
        self.scatter(&local, r);
        Ok(())
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.check_input(x, y)?;
        let local = self.local_terms(x, false);
        self.scatter(&local, y);
        Ok(())
    }
}
