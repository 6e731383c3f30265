//! Structured triangulations of the unit square.
//!
//! Nodes of a level-`L` mesh sit on a `(2^L + 1) × (2^L + 1)` grid numbered
//! row by row (`y` outer, `x` inner). Every grid cell is cut along its
//! lower-left to upper-right diagonal into
//!
//! ```text
//!  p01 ---- p11
//!   |  up  / |
//!   |    /   |
//!   |  / low |
//!  p00 ---- p10
//! ```
//!
//! `low = (p00, p10, p11)` followed by `up = (p00, p11, p01)`, both
//! counterclockwise and starting at the lower-left corner.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::NB;

/// Largest supported refinement level.
pub const MAX_LEVEL: u32 = 12;

const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    elements: Vec<[usize; NB]>,
    boundary: Vec<usize>,
    level: u32,
}

/// Gather and scatter indices replacing the Boolean restriction and
/// connectivity matrices. Entry `e` holds the global ids of the local nodes
/// of element `e`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexArrays {
    /// Gather indices, `x_e = x[ind_e[e]]`.
    pub ind_e: Vec<[usize; NB]>,
    /// Scatter indices, `r[indt[e][j]] += r_e[j]`.
    pub indt: Vec<[usize; NB]>,
}

impl IndexArrays {
    pub fn n_elements(&self) -> usize {
        self.indt.len()
    }
}

impl Mesh {
    /// Builds a mesh from raw parts, checking indices and orientation.
    pub fn from_parts(nodes: Vec<[f64; 2]>, elements: Vec<[usize; NB]>, level: u32) -> Result<Self> {
        let n = nodes.len();
        for (e, tri) in elements.iter().enumerate() {
            for &g in tri {
                if g >= n {
                    return Err(Error::Index { index: g, len: n });
                }
            }
            let area = signed_area(&nodes, tri);
            if area.is_nan() || area <= 0.0 {
                return Err(Error::Geometry { element: e, area });
            }
        }
        let boundary = classify_boundary(&nodes);
        Ok(Mesh { nodes, elements, boundary, level })
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn elements(&self) -> &[[usize; NB]] {
        &self.elements
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    /// Nodes lying on the boundary of the unit square, ascending.
    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary
    }

    pub fn element_area(&self, e: usize) -> f64 {
        signed_area(&self.nodes, &self.elements[e])
    }

    pub fn centroid(&self, e: usize) -> [f64; 2] {
        let [a, b, c] = self.elements[e].map(|g| self.nodes[g]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn index_arrays(&self) -> IndexArrays {
        build_index_arrays(self)
    }

    /// Writes `nodes.txt` (`x y` per line) and `elements.txt` (three 0-based
    /// indices per line) into `dir`.
    pub fn write_txt(&self, dir: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(dir.join("nodes.txt"))?);
        for [x, y] in &self.nodes {
            writeln!(out, "{x:.17e} {y:.17e}")?;
        }
        out.flush()?;
        let mut out = std::io::BufWriter::new(std::fs::File::create(dir.join("elements.txt"))?);
        for [a, b, c] in &self.elements {
            writeln!(out, "{a} {b} {c}")?;
        }
        out.flush()?;
        Ok(())
    }
}

fn signed_area(nodes: &[[f64; 2]], tri: &[usize; NB]) -> f64 {
    let [a, b, c] = tri.map(|g| nodes[g]);
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn on_boundary(p: &[f64; 2]) -> bool {
    p.iter()
        .any(|&t| t.abs() <= BOUNDARY_TOL || (t - 1.0).abs() <= BOUNDARY_TOL)
}

fn classify_boundary(nodes: &[[f64; 2]]) -> Vec<usize> {
    (0..nodes.len()).filter(|&g| on_boundary(&nodes[g])).collect()
}

fn check_level(level: u32) -> Result<()> {
    if level > MAX_LEVEL {
        return Err(Error::Size(format!("refinement level {level} exceeds {MAX_LEVEL}")));
    }
    Ok(())
}

/// Structured mesh of the unit square with `2 · 4^level` triangles.
pub fn build_unit_square_mesh(level: u32) -> Result<Mesh> {
    check_level(level)?;
    let cells = 1usize << level;
    let n = cells + 1;
    let h = 1.0 / cells as f64;
    let mut nodes = Vec::with_capacity(n * n);
    for iy in 0..n {
        for ix in 0..n {
            nodes.push([ix as f64 * h, iy as f64 * h]);
        }
    }
    let mut elements = Vec::with_capacity(2 * cells * cells);
    for iy in 0..cells {
        for ix in 0..cells {
            let p00 = iy * n + ix;
            let p10 = p00 + 1;
            let p01 = p00 + n;
            let p11 = p01 + 1;
            elements.push([p00, p10, p11]);
            elements.push([p00, p11, p01]);
        }
    }
    let boundary = classify_boundary(&nodes);
    Ok(Mesh { nodes, elements, boundary, level })
}

/// Splits every triangle into four through its edge midpoints.
///
/// Nodes are renumbered lexicographically by `(y, x)` and each child is
/// rotated to start at its lowest-numbered vertex, so refining a structured
/// mesh reproduces `build_unit_square_mesh(level + 1)` exactly.
pub fn uniform_refine(mesh: &Mesh) -> Result<Mesh> {
    check_level(mesh.level + 1)?;
    let mut nodes = mesh.nodes.clone();
    let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
    let mut midpoint = |a: usize, b: usize, nodes: &mut Vec<[f64; 2]>| -> usize {
        let key = (a.min(b), a.max(b));
        *midpoints.entry(key).or_insert_with(|| {
            let (pa, pb) = (nodes[a], nodes[b]);
            nodes.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
            nodes.len() - 1
        })
    };

    let mut children = Vec::with_capacity(4 * mesh.elements.len());
    for &[a, b, c] in &mesh.elements {
        let ab = midpoint(a, b, &mut nodes);
        let bc = midpoint(b, c, &mut nodes);
        let ca = midpoint(c, a, &mut nodes);
        children.push([a, ab, ca]);
        children.push([ab, b, bc]);
        children.push([ca, bc, c]);
        children.push([ab, bc, ca]);
    }

    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by(|&i, &j| {
        let (p, q) = (nodes[i], nodes[j]);
        p[1].total_cmp(&q[1]).then(p[0].total_cmp(&q[0]))
    });
    let mut new_id = vec![0usize; nodes.len()];
    for (k, &old) in order.iter().enumerate() {
        new_id[old] = k;
    }
    let nodes: Vec<[f64; 2]> = order.iter().map(|&old| nodes[old]).collect();

    let mut elements: Vec<[usize; NB]> = children
        .into_iter()
        .map(|tri| {
            let t = tri.map(|g| new_id[g]);
            let start = (0..NB).min_by_key(|&j| t[j]).unwrap_or(0);
            [t[start], t[(start + 1) % NB], t[(start + 2) % NB]]
        })
        .collect();
    elements.sort_unstable();

    let boundary = classify_boundary(&nodes);
    Ok(Mesh { nodes, elements, boundary, level: mesh.level + 1 })
}

pub fn boundary_nodes(mesh: &Mesh) -> Vec<usize> {
    mesh.boundary.clone()
}

pub fn build_index_arrays(mesh: &Mesh) -> IndexArrays {
    IndexArrays { ind_e: mesh.elements.clone(), indt: mesh.elements.clone() }
}
