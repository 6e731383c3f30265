//! Eigenvalue bounds for the Chebyshev and Richardson parameters.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::elements::ElementBatch;
use crate::error::{Error, Result};
use crate::operator::{mask_dirichlet, DirichletData, LinearOperator};
use crate::solvers::SpectralBounds;
use crate::{norm2, NB};

/// Default iteration cap of [`power_iteration_lambda_max`].
pub const POWER_MAX_ITERS: usize = 1000;
/// Absolute Rayleigh-quotient change that ends the power iteration.
pub const POWER_TOL: f64 = 1e-10;

fn model_eigenvalue(n: usize, i: usize, j: usize) -> f64 {
    let s = |k: usize| (k as f64 * PI / (2.0 * (n - 1) as f64)).sin().powi(2);
    4.0 * (s(i) + s(j))
}

fn check_side(n: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::Parameter(format!("need at least 3 nodes per side, got {n}")));
    }
    Ok(())
}

/// Extreme eigenvalues of the interior stiffness matrix on an `n × n` grid.
///
/// `λ(i, j) = 4(sin²(iπ/(2(n-1))) + sin²(jπ/(2(n-1))))` for
/// `i, j = 1..=n-2`; the minimum sits at `i = j = 1`, the maximum at
/// `i = j = n - 2`.
pub fn model_eigen_bounds(n: usize) -> Result<SpectralBounds> {
    check_side(n)?;
    SpectralBounds::new(model_eigenvalue(n, 1, 1), model_eigenvalue(n, n - 2, n - 2))
}

/// All `(n-2)²` interior eigenvalues, ascending.
pub fn model_eigenvalues_all(n: usize) -> Result<Vec<f64>> {
    check_side(n)?;
    let mut values: Vec<f64> = (1..=n - 2)
        .flat_map(|i| (1..=n - 2).map(move |j| model_eigenvalue(n, i, j)))
        .collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Power iteration from a seeded random start on the masked operator.
pub fn power_iteration_lambda_max<O: LinearOperator + ?Sized>(
    op: &O,
    d: &DirichletData,
    iters: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start: Vec<f64> = (0..op.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    power_iteration_from(op, d, &start, iters, POWER_TOL)
}

/// Power iteration for the largest eigenvalue of `A` restricted to the free
/// nodes. Returns the last Rayleigh quotient.
pub fn power_iteration_from<O: LinearOperator + ?Sized>(
    op: &O,
    d: &DirichletData,
    start: &[f64],
    iters: usize,
    tol: f64,
) -> Result<f64> {
    let n = op.dim();
    if start.len() != n {
        return Err(Error::Shape(format!("start vector of length {} for dimension {n}", start.len())));
    }
    if iters == 0 {
        return Err(Error::Parameter("power iteration needs at least one step".into()));
    }
    d.check_dim(n)?;
    let mut v = start.to_vec();
    mask_dirichlet(&mut v, d);
    let vn = norm2(&v);
    if vn == 0.0 || !vn.is_finite() {
        return Err(Error::Seed);
    }
    v.iter_mut().for_each(|a| *a /= vn);

    let mut w = vec![0.0; n];
    let mut rq = f64::NAN;
    for _ in 0..iters {
        op.apply(&v, &mut w)?;
        mask_dirichlet(&mut w, d);
        let next: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let wn = norm2(&w);
        if wn == 0.0 {
            return Ok(0.0);
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / wn;
        }
        let done = (next - rq).abs() < tol;
        rq = next;
        if done {
            break;
        }
    }
    Ok(rq)
}

/// Gershgorin interval of the assembled mass matrix restricted to the free
/// nodes, computed from the element slices without assembling.
pub fn mass_gershgorin(batch: &ElementBatch, d: &DirichletData) -> Result<(f64, f64)> {
    let n = batch.n_nodes;
    d.check_dim(n)?;
    let fixed = d.mask(n);
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n];
    for (m, idx) in batch.m_e.iter().zip(&batch.index.indt) {
        for i in 0..NB {
            diag[idx[i]] += m[i][i];
            for j in 0..NB {
                if j != i && !fixed[idx[j]] {
                    off[idx[i]] += m[i][j].abs();
                }
            }
        }
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for g in (0..n).filter(|&g| !fixed[g]) {
        lo = lo.min(diag[g] - off[g]);
        hi = hi.max(diag[g] + off[g]);
    }
    if lo > hi {
        return Err(Error::Parameter("no free nodes".into()));
    }
    Ok((lo, hi))
}

/// Enclosure of the spectrum of `K + νM` on the interior nodes of an
/// `n × n` grid: model stiffness bounds shifted by `ν` times a Gershgorin
/// interval for `M` (Weyl's inequality). The lower end of the mass interval
/// is clamped at zero.
pub fn shifted_model_bounds(n: usize, nu: f64, mass_interval: (f64, f64)) -> Result<SpectralBounds> {
    if !(nu >= 0.0) {
        return Err(Error::Parameter(format!("nu must be non-negative, got {nu}")));
    }
    let k = model_eigen_bounds(n)?;
    let (m_lo, m_hi) = mass_interval;
    SpectralBounds::new(k.lambda1 + nu * m_lo.max(0.0), k.lambda2 + nu * m_hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_unit_square_mesh;
    use crate::operator::{MatrixFreeOperator, ScatterMode};
    use crate::reference::{SparseMatrix, SparseSystem};

    #[test]
    fn three_nodes_per_side() {
        let b = model_eigen_bounds(3).unwrap();
        assert!((b.lambda1 - 4.0).abs() < 1e-14);
        assert_eq!(b.lambda1, b.lambda2);
        assert_eq!(model_eigenvalues_all(3).unwrap().len(), 1);
        assert!(matches!(model_eigen_bounds(2), Err(Error::Parameter(_))));
        assert!(model_eigenvalues_all(1).is_err());
    }

    #[test]
    fn four_nodes_per_side() {
        let ev = model_eigenvalues_all(4).unwrap();
        for (a, b) in ev.iter().zip([2.0, 4.0, 4.0, 6.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn thirty_three_nodes_per_side() {
        let b = model_eigen_bounds(33).unwrap();
        // 8 sin²(π/64) and 8 sin²(31π/64)
        assert!((b.lambda1 - 0.019261093311212455).abs() < 1e-15);
        assert!((b.lambda2 - 7.980738906688788).abs() < 1e-13);
        assert!((b.lambda1 - 0.0192612).abs() < 1e-6);
        assert!((b.lambda2 - 7.9807388).abs() < 1e-6);
    }

    #[test]
    fn bounds_sum_to_eight_and_widen() {
        let mut prev = model_eigen_bounds(3).unwrap();
        for n in [3, 5, 9, 17, 33, 65, 1025] {
            let b = model_eigen_bounds(n).unwrap();
            assert!((b.lambda1 + b.lambda2 - 8.0).abs() < 1e-13);
            if n > 3 {
                assert!(b.lambda1 < prev.lambda1 && b.lambda2 > prev.lambda2);
            }
            assert!(b.lambda2 < 8.0);
            prev = b;
        }
    }

    fn model_operator(level: u32) -> (MatrixFreeOperator, DirichletData) {
        let mesh = build_unit_square_mesh(level).unwrap();
        let batch = ElementBatch::new(&mesh, 0.0, |_, _| 1.0).unwrap();
        let d = DirichletData::on_boundary(&mesh, 0.0).unwrap();
        (MatrixFreeOperator::new(batch, ScatterMode::Deterministic).unwrap(), d)
    }

    #[test]
    fn power_iteration_scalar() {
        let sys = SparseSystem::new(SparseMatrix::from_triplets(1, [(0, 0, 2.0)]).unwrap(), vec![0.0]).unwrap();
        let est = power_iteration_lambda_max(&sys, &DirichletData::empty(), 10, 1).unwrap();
        assert!((est - 2.0).abs() < 1e-12);
    }

    #[test]
    fn power_iteration_model_five() {
        let (op, d) = model_operator(2);
        let est = power_iteration_lambda_max(&op, &d, 500, 7).unwrap();
        let exact = model_eigen_bounds(5).unwrap().lambda2;
        assert!((est - exact).abs() < 1e-6, "{est} vs {exact}");
    }

    #[test]
    fn power_iteration_scale_invariant() {
        let (op, d) = model_operator(2);
        let start: Vec<f64> = (0..op.dim()).map(|i| ((i * 31) % 17) as f64 - 8.0).collect();
        let scaled: Vec<f64> = start.iter().map(|v| v * 1e6).collect();
        let a = power_iteration_from(&op, &d, &start, 300, POWER_TOL).unwrap();
        let b = power_iteration_from(&op, &d, &scaled, 300, POWER_TOL).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn power_iteration_zero_start() {
        let (op, d) = model_operator(1);
        let mut start = vec![1.0; op.dim()];
        start[4] = 0.0;
        assert!(matches!(power_iteration_from(&op, &d, &start, 10, POWER_TOL), Err(Error::Seed)));
    }

    #[test]
    fn shifted_bounds_enclose_spectrum() {
        use crate::reference::{assemble_sparse, dense_interior_eigenvalues};
        let mesh = build_unit_square_mesh(3).unwrap();
        let nu = 10.0;
        let batch = ElementBatch::new(&mesh, nu, |_, _| 1.0).unwrap();
        let d = DirichletData::on_boundary(&mesh, 0.0).unwrap();
        let interval = mass_gershgorin(&batch, &d).unwrap();
        let bounds = shifted_model_bounds(9, nu, interval).unwrap();
        let a = assemble_sparse(&batch.a_e, &batch.index.indt, mesh.n_nodes()).unwrap();
        let ev = dense_interior_eigenvalues(&a, &d).unwrap();
        assert!(bounds.lambda1 <= ev[0] + 1e-12);
        assert!(bounds.lambda2 >= ev[ev.len() - 1] - 1e-12);
    }
}
