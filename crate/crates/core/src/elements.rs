//! Batched local matrices for all P1 elements.
//!
//! Each element owns one contiguous `3 × 3` slice (`[[f64; 3]; 3]`), the
//! Rust analogue of an `n_b × n_b × n_e` array.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{IndexArrays, Mesh};
use crate::NB;

pub type LocalMatrix = [[f64; NB]; NB];
pub type LocalVector = [f64; NB];

/// Elements with area at or below this are rejected.
pub const AREA_EPS: f64 = 1e-14;

/// All element data needed by the matrix-free residual.
#[derive(Debug, Clone)]
pub struct ElementBatch {
    pub k_e: Vec<LocalMatrix>,
    pub m_e: Vec<LocalMatrix>,
    pub a_e: Vec<LocalMatrix>,
    /// Local loads before assembly.
    pub bt_e: Vec<LocalVector>,
    pub nu: f64,
    pub index: IndexArrays,
    pub n_nodes: usize,
}

impl ElementBatch {
    /// Computes `K_e`, `M_e`, `A_e = K_e + ν M_e` and `b_e` for every element.
    pub fn new<F>(mesh: &Mesh, nu: f64, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        let k_e = local_stiffness_batch(mesh)?;
        let m_e = local_mass_batch(mesh)?;
        let a_e = combine_system(&k_e, &m_e, nu)?;
        let bt_e = local_load_batch(mesh, f)?;
        Ok(ElementBatch { k_e, m_e, a_e, bt_e, nu, index: mesh.index_arrays(), n_nodes: mesh.n_nodes() })
    }

    pub fn n_elements(&self) -> usize {
        self.a_e.len()
    }
}

fn checked_area(mesh: &Mesh, e: usize) -> Result<f64> {
    let area = mesh.element_area(e);
    if area.is_nan() || area <= AREA_EPS {
        return Err(Error::Geometry { element: e, area });
    }
    Ok(area)
}

/// `area · GᵀG` with `G` the constant gradients of the three hat functions.
pub fn local_stiffness_batch(mesh: &Mesh) -> Result<Vec<LocalMatrix>> {
    let nodes = mesh.nodes();
    (0..mesh.n_elements())
        .into_par_iter()
        .map(|e| {
            let area = checked_area(mesh, e)?;
            let [a, b, c] = mesh.elements()[e].map(|g| nodes[g]);
            // Unscaled gradient of the hat function at each vertex; the true
            // gradient is this divided by 2·area.
            let grads = [
                [b[1] - c[1], c[0] - b[0]],
                [c[1] - a[1], a[0] - c[0]],
                [a[1] - b[1], b[0] - a[0]],
            ];
            let scale = 1.0 / (4.0 * area);
            let mut k = [[0.0; NB]; NB];
            for i in 0..NB {
                for j in 0..NB {
                    k[i][j] = scale * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                }
            }
            Ok(k)
        })
        .collect()
}

/// Exact P1 mass matrix `area/12 · [[2,1,1],[1,2,1],[1,1,2]]`.
pub fn local_mass_batch(mesh: &Mesh) -> Result<Vec<LocalMatrix>> {
    (0..mesh.n_elements())
        .into_par_iter()
        .map(|e| {
            let s = checked_area(mesh, e)? / 12.0;
            let mut m = [[s; NB]; NB];
            for (i, row) in m.iter_mut().enumerate() {
                row[i] = 2.0 * s;
            }
            Ok(m)
        })
        .collect()
}

/// Centroid-rule loads `f(centroid) · area / 3`.
pub fn local_load_batch<F>(mesh: &Mesh, f: F) -> Result<Vec<LocalVector>>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    (0..mesh.n_elements())
        .into_par_iter()
        .map(|e| {
            let area = checked_area(mesh, e)?;
            let [x, y] = mesh.centroid(e);
            let value = f(x, y);
            if !value.is_finite() {
                return Err(Error::Evaluation(format!("source term at ({x}, {y}) is {value}")));
            }
            Ok([value * area / 3.0; NB])
        })
        .collect()
}

pub fn combine_system(k_e: &[LocalMatrix], m_e: &[LocalMatrix], nu: f64) -> Result<Vec<LocalMatrix>> {
    if k_e.len() != m_e.len() {
        return Err(Error::Shape(format!("{} stiffness slices vs {} mass slices", k_e.len(), m_e.len())));
    }
    if !(nu >= 0.0) || !nu.is_finite() {
        return Err(Error::Parameter(format!("nu must be finite and non-negative, got {nu}")));
    }
    Ok(k_e
        .par_iter()
        .zip(m_e.par_iter())
        .map(|(k, m)| {
            let mut a = *k;
            for i in 0..NB {
                for j in 0..NB {
                    a[i][j] += nu * m[i][j];
                }
            }
            a
        })
        .collect())
}
