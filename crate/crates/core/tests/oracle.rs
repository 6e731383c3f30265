//! Matrix-free quantities against sparse assembly and dense eigensolves.

mod common;

use common::{random_vector, rel_diff, setup};
use matfree::elements::{local_mass_batch, local_stiffness_batch, ElementBatch};
use matfree::mesh::{build_unit_square_mesh, Mesh};
use matfree::operator::{DirichletData, LinearOperator, MatrixFreeOperator, ScatterMode};
use matfree::reference::{assemble_sparse, dense_interior_eigenvalues};
use matfree::spectrum::model_eigenvalues_all;

fn sparse_residual(s: &common::Setup, x: &[f64]) -> Vec<f64> {
    let mut ax = vec![0.0; x.len()];
    s.a.matvec(x, &mut ax);
    s.b.iter().zip(&ax).map(|(b, a)| b - a).collect()
}

#[test]
fn residual_matches_sparse_oracle() {
    for level in 1..=5 {
        for nu in [0.0, 1.0] {
            let s = setup(level, nu);
            for seed in 0..20 {
                let x = random_vector(s.mesh.n_nodes(), seed);
                let mut r = vec![0.0; x.len()];
                s.op.residual(&x, &mut r).unwrap();
                let diff = rel_diff(&r, &sparse_residual(&s, &x));
                assert!(diff <= 1e-12, "level {level}, nu {nu}, seed {seed}: {diff:e}");
            }
        }
    }
}

#[test]
fn residual_is_affine() {
    let s = setup(4, 1.0);
    let n = s.mesh.n_nodes();
    let (x, y) = (random_vector(n, 1), random_vector(n, 2));
    let (mut rx, mut ry, mut av) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    s.op.residual(&x, &mut rx).unwrap();
    s.op.residual(&y, &mut ry).unwrap();
    let v: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
    s.op.apply(&v, &mut av).unwrap();
    let lhs: Vec<f64> = rx.iter().zip(&ry).map(|(a, b)| a - b).collect();
    let minus_av: Vec<f64> = av.iter().map(|a| -a).collect();
    assert!(rel_diff(&lhs, &minus_av) <= 1e-12);

    // A v equals minus the residual of a zero-load batch.
    let mesh = build_unit_square_mesh(4).unwrap();
    let zero_load = ElementBatch::new(&mesh, 1.0, |_, _| 0.0).unwrap();
    let op0 = MatrixFreeOperator::new(zero_load, ScatterMode::Deterministic).unwrap();
    let mut r0 = vec![0.0; n];
    op0.residual(&v, &mut r0).unwrap();
    for (a, r) in av.iter().zip(&r0) {
        assert_eq!(*a, -r);
    }
}

#[test]
fn assembled_element_matrices_match() {
    for level in 0..=4 {
        let mesh = build_unit_square_mesh(level).unwrap();
        let n = mesh.n_nodes();
        let idx = mesh.index_arrays();
        let k = assemble_sparse(&local_stiffness_batch(&mesh).unwrap(), &idx.indt, n).unwrap();
        let m = assemble_sparse(&local_mass_batch(&mesh).unwrap(), &idx.indt, n).unwrap();
        assert!(k.asymmetry() <= 1e-14 && m.asymmetry() <= 1e-14);
        assert!((m.sum() - 1.0).abs() <= 1e-14);
        for nu in [0.0, 1.0] {
            let batch = ElementBatch::new(&mesh, nu, |_, _| 1.0).unwrap();
            let a = assemble_sparse(&batch.a_e, &idx.indt, n).unwrap();
            assert!(a.max_abs_diff(&k.add_scaled(nu, &m).unwrap()) <= 1e-14);
        }

        // Scattering K_e through the matrix-free apply reproduces K column by column.
        let batch = ElementBatch::new(&mesh, 0.0, |_, _| 0.0).unwrap();
        let op = MatrixFreeOperator::new(batch, ScatterMode::Deterministic).unwrap();
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            op.apply(&e, &mut col).unwrap();
            for (i, &v) in col.iter().enumerate() {
                assert!((v - k.get(i, j)).abs() <= 1e-14, "level {level}: K[{i},{j}]");
            }
            e[j] = 0.0;
        }
    }
}

#[test]
fn interior_stiffness_is_the_five_point_stencil() {
    let mesh = build_unit_square_mesh(3).unwrap();
    let n = mesh.n_nodes();
    let k = assemble_sparse(&local_stiffness_batch(&mesh).unwrap(), &mesh.index_arrays().indt, n).unwrap();
    let side = 9;
    let g = 4 * side + 4;
    assert!((k.get(g, g) - 4.0).abs() < 1e-14);
    for nb in [g - 1, g + 1, g - side, g + side] {
        assert!((k.get(g, nb) + 1.0).abs() < 1e-14);
    }
    // The diagonal neighbours cancel for this triangulation.
    for nb in [g - side - 1, g + side + 1, g - side + 1, g + side - 1] {
        assert!(k.get(g, nb).abs() < 1e-14);
    }
}

#[test]
fn consolidation_ignores_element_order() {
    let mesh = build_unit_square_mesh(3).unwrap();
    let mut els = mesh.elements().to_vec();
    els.rotate_left(17);
    els.swap(3, 40);
    let shuffled = Mesh::from_parts(mesh.nodes().to_vec(), els, 3).unwrap();
    let n = mesh.n_nodes();
    let a = assemble_sparse(&local_stiffness_batch(&mesh).unwrap(), &mesh.index_arrays().indt, n).unwrap();
    let b = assemble_sparse(&local_stiffness_batch(&shuffled).unwrap(), &shuffled.index_arrays().indt, n).unwrap();
    assert!(a.max_abs_diff(&b) <= 1e-15);
}

#[test]
fn eigenvalue_formula_matches_dense_spectrum() {
    // n = 2^L + 1 covers 3, 5, 9; n = 4 uses a hand-built 4 × 4 grid.
    for level in 1..=3 {
        let mesh = build_unit_square_mesh(level).unwrap();
        check_formula(&mesh, (1 << level) + 1);
    }
    check_formula(&grid_mesh(4), 4);
}

fn grid_mesh(side: usize) -> Mesh {
    let h = 1.0 / (side - 1) as f64;
    let nodes = (0..side).flat_map(|iy| (0..side).map(move |ix| [ix as f64 * h, iy as f64 * h])).collect();
    let mut els = Vec::new();
    for iy in 0..side - 1 {
        for ix in 0..side - 1 {
            let p00 = iy * side + ix;
            els.push([p00, p00 + 1, p00 + side + 1]);
            els.push([p00, p00 + side + 1, p00 + side]);
        }
    }
    Mesh::from_parts(nodes, els, 0).unwrap()
}

fn check_formula(mesh: &Mesh, side: usize) {
    let k = assemble_sparse(&local_stiffness_batch(mesh).unwrap(), &mesh.index_arrays().indt, mesh.n_nodes()).unwrap();
    let d = DirichletData::on_boundary(mesh, 0.0).unwrap();
    let dense = dense_interior_eigenvalues(&k, &d).unwrap();
    let formula = model_eigenvalues_all(side).unwrap();
    assert_eq!(dense.len(), formula.len());
    for (a, b) in dense.iter().zip(&formula) {
        assert!((a - b).abs() <= 1e-10, "n = {side}: {a} vs {b}");
    }
}

#[test]
fn reference_solution_self_consistent() {
    for level in [1, 3, 5] {
        let s = setup(level, 0.0);
        let mut r = vec![0.0; s.u.len()];
        s.op.residual(&s.u, &mut r).unwrap();
        matfree::operator::mask_dirichlet(&mut r, &s.d);
        assert!(matfree::norm2(&r) <= 1e-10 * matfree::norm2(&s.b));
    }
}
