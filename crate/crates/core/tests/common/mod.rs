#![allow(dead_code)]

use matfree::elements::ElementBatch;
use matfree::mesh::{build_unit_square_mesh, Mesh};
use matfree::operator::{apply_initial_guess, DirichletData, MatrixFreeOperator, ScatterMode};
use matfree::reference::{assemble_sparse, solve_reference, SparseMatrix};
use matfree::solvers::SpectralBounds;
use matfree::spectrum::model_eigen_bounds;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Model problem with f = 1 and u = 1 on the boundary.
pub struct Setup {
    pub mesh: Mesh,
    pub op: MatrixFreeOperator,
    pub a: SparseMatrix,
    pub b: Vec<f64>,
    pub d: DirichletData,
    pub x0: Vec<f64>,
    pub u: Vec<f64>,
    pub bounds: SpectralBounds,
}

pub fn setup(level: u32, nu: f64) -> Setup {
    let mesh = build_unit_square_mesh(level).unwrap();
    let batch = ElementBatch::new(&mesh, nu, |_, _| 1.0).unwrap();
    let a = assemble_sparse(&batch.a_e, &batch.index.indt, mesh.n_nodes()).unwrap();
    let op = MatrixFreeOperator::new(batch, ScatterMode::Deterministic).unwrap();
    let b = op.rhs();
    let d = DirichletData::on_boundary(&mesh, 1.0).unwrap();
    let x0 = apply_initial_guess(mesh.n_nodes(), &d);
    let u = solve_reference(&a, &b, &d).unwrap();
    let bounds = model_eigen_bounds((1 << level) + 1).unwrap();
    Setup { mesh, op, a, b, d, x0, u, bounds }
}

pub fn random_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    matfree::dist2(a, b) / matfree::norm2(b)
}
