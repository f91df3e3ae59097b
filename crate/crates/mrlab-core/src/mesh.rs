//! Tensor-grid meshes on the interval, the unit square, and the unit disk
//! (largest lattice subset), with quadrature volumes, boundary normals,
//! face-difference gradient norms, and the singular witness function for the
//! gradient-integrability regression.

use std::collections::HashMap;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::space::lp_norm;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    Interval,
    Square,
    Disk,
}

/// Hard cap on node counts; finer requests return a resource error.
const MAX_NODES: usize = 4_000_000;

#[derive(Debug, Clone)]
pub struct Mesh {
    pub kind: DomainKind,
    pub dim: usize,
    /// Grid spacing (snapped so that 1/h is an integer).
    pub h: f64,
    /// Node coordinates; the second coordinate is zero in 1D.
    pub nodes: Vec<[f64; 2]>,
    /// Quadrature weight per node; sums to `measure`.
    pub cell_volumes: DVector<f64>,
    /// Indices of boundary nodes with outward unit normals.
    pub boundary: Vec<(usize, [f64; 2])>,
    /// Measure of the discrete domain the volumes integrate over.
    pub measure: f64,
    lattice: HashMap<(i64, i64), usize>,
    coords: Vec<(i64, i64)>,
}

impl Mesh {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        self.boundary.iter().any(|&(i, _)| i == idx)
    }

    /// Indices of nodes not on the boundary.
    pub fn interior(&self) -> Vec<usize> {
        let bset: std::collections::HashSet<usize> =
            self.boundary.iter().map(|&(i, _)| i).collect();
        (0..self.len()).filter(|i| !bset.contains(i)).collect()
    }

    /// Lattice neighbor in direction `axis` (0 = x, 1 = y), `step` = +/-1.
    pub fn neighbor(&self, idx: usize, axis: usize, step: i64) -> Option<usize> {
        let (i, j) = self.coords[idx];
        let key = if axis == 0 { (i + step, j) } else { (i, j + step) };
        self.lattice.get(&key).copied()
    }

    pub fn lattice_coords(&self, idx: usize) -> (i64, i64) {
        self.coords[idx]
    }
}

/// Build a tensor mesh of spacing ~h on the requested domain.
pub fn build_mesh(kind: DomainKind, h: f64) -> Result<Mesh> {
    if !(h > 0.0 && h <= 0.5) {
        return Err(Error::InvalidArg(format!("mesh size h = {h} outside (0, 0.5]")));
    }
    let m = (1.0 / h).round().max(2.0) as i64;
    let h = 1.0 / m as f64;
    let est = match kind {
        DomainKind::Interval => (m + 1) as usize,
        DomainKind::Square => ((m + 1) * (m + 1)) as usize,
        DomainKind::Disk => (std::f64::consts::PI * (m as f64) * (m as f64)) as usize + 4 * m as usize,
    };
    if est > MAX_NODES {
        return Err(Error::Resource(format!(
            "mesh with ~{est} nodes exceeds the {MAX_NODES}-node budget"
        )));
    }
    let mut nodes = Vec::new();
    let mut coords = Vec::new();
    let mut lattice = HashMap::new();
    let mut vols = Vec::new();
    let mut boundary = Vec::new();
    match kind {
        DomainKind::Interval => {
            for i in 0..=m {
                let idx = nodes.len();
                nodes.push([i as f64 * h, 0.0]);
                coords.push((i, 0));
                lattice.insert((i, 0), idx);
                vols.push(if i == 0 || i == m { h / 2.0 } else { h });
            }
            boundary.push((0, [-1.0, 0.0]));
            boundary.push(((m as usize), [1.0, 0.0]));
            Ok(Mesh {
                kind,
                dim: 1,
                h,
                nodes,
                cell_volumes: DVector::from_vec(vols),
                boundary,
                measure: 1.0,
                lattice,
                coords,
            })
        }
        DomainKind::Square => {
            let w1 = |i: i64| if i == 0 || i == m { h / 2.0 } else { h };
            for i in 0..=m {
                for j in 0..=m {
                    let idx = nodes.len();
                    nodes.push([i as f64 * h, j as f64 * h]);
                    coords.push((i, j));
                    lattice.insert((i, j), idx);
                    vols.push(w1(i) * w1(j));
                    let on_x = i == 0 || i == m;
                    let on_y = j == 0 || j == m;
                    if on_x || on_y {
                        let nx: f64 = if i == 0 { -1.0 } else if i == m { 1.0 } else { 0.0 };
                        let ny: f64 = if j == 0 { -1.0 } else if j == m { 1.0 } else { 0.0 };
                        let len = (nx * nx + ny * ny).sqrt();
                        boundary.push((idx, [nx / len, ny / len]));
                    }
                }
            }
            Ok(Mesh {
                kind,
                dim: 2,
                h,
                nodes,
                cell_volumes: DVector::from_vec(vols),
                boundary,
                measure: 1.0,
                lattice,
                coords,
            })
        }
        DomainKind::Disk => {
            for i in -m..=m {
                for j in -m..=m {
                    let (x, y) = (i as f64 * h, j as f64 * h);
                    if x * x + y * y < 1.0 {
                        let idx = nodes.len();
                        nodes.push([x, y]);
                        coords.push((i, j));
                        lattice.insert((i, j), idx);
                        vols.push(h * h);
                    }
                }
            }
            for (idx, &(i, j)) in coords.iter().enumerate() {
                let missing = [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)]
                    .iter()
                    .any(|&(di, dj)| !lattice.contains_key(&(i + di, j + dj)));
                if missing {
                    let [x, y] = nodes[idx];
                    let r = (x * x + y * y).sqrt().max(1e-300);
                    boundary.push((idx, [x / r, y / r]));
                }
            }
            let measure = nodes.len() as f64 * h * h;
            Ok(Mesh {
                kind,
                dim: 2,
                h,
                nodes,
                cell_volumes: DVector::from_vec(vols),
                boundary,
                measure,
                lattice,
                coords,
            })
        }
    }
}

/// Discrete `||grad v||_{L^p}` from face-midpoint differences with face
/// volumes `h^dim`; differences are one-sided at the boundary (only faces
/// between mesh nodes contribute).
pub fn gradient_norm(mesh: &Mesh, v: &DVector<f64>, p: f64) -> Result<f64> {
    if v.len() != mesh.len() {
        return Err(Error::Shape(format!(
            "vector length {} does not match mesh size {}",
            v.len(),
            mesh.len()
        )));
    }
    let h = mesh.h;
    let facevol = h.powi(mesh.dim as i32);
    let mut diffs = Vec::new();
    let mut fvols = Vec::new();
    for idx in 0..mesh.len() {
        for axis in 0..mesh.dim {
            if let Some(nb) = mesh.neighbor(idx, axis, 1) {
                diffs.push((v[nb] - v[idx]) / h);
                fvols.push(facevol);
            }
        }
    }
    Ok(lp_norm(&DVector::from_vec(fvols), p, &diffs))
}

/// Same face-difference data as [`gradient_norm`], raised to the p-th power:
/// the discrete Dirichlet-type p-energy `int |grad v|^p` whose growth under
/// refinement witnesses gradient non-integrability.
pub fn gradient_energy(mesh: &Mesh, v: &DVector<f64>, p: f64) -> Result<f64> {
    Ok(gradient_norm(mesh, v, p)?.powf(p))
}

/// C^2 cutoff profile: 1 on `[0, c/2]`, 0 on `[c, inf)`, joined by a smoothed
/// trapezoid ramp whose slope stays within 1/(1-RAMP) of the linear one. The
/// gentle slope keeps the cutoff ring's contribution to gradient p-energies
/// small relative to the singular core.
const RAMP: f64 = 0.15;

pub fn cutoff_bump(r: f64, cutoff: f64) -> f64 {
    let t = (r - cutoff / 2.0) / (cutoff / 2.0);
    if t <= 0.0 {
        return 1.0;
    }
    if t >= 1.0 {
        return 0.0;
    }
    let a = RAMP;
    let s = 1.0 / (1.0 - a);
    let g = |u: f64| u * u * u - 0.5 * u * u * u * u; // integral of 3u^2 - 2u^3
    let f = if t <= a {
        s * a * g(t / a)
    } else if t >= 1.0 - a {
        1.0 - s * a * g((1.0 - t) / a)
    } else {
        s * a * 0.5 + s * (t - a)
    };
    1.0 - f
}

/// Samples of `w = u psi` on a disk mesh, where `u(x,y) = x (x^2+y^2)^{-1/4}`
/// (extended by 0 at the exact origin) and psi is the C^2 bump equal to 1 on
/// `|x| <= cutoff/2` and 0 on `|x| >= cutoff`.
pub fn meyers_witness(mesh: &Mesh, cutoff: f64) -> Result<DVector<f64>> {
    if mesh.kind != DomainKind::Disk {
        return Err(Error::InvalidArg(
            "the singular witness requires a disk mesh".into(),
        ));
    }
    if !(cutoff > 0.0 && cutoff < 1.0) {
        return Err(Error::InvalidArg(format!(
            "cutoff radius {cutoff} outside (0, 1)"
        )));
    }
    let vals = mesh
        .nodes
        .iter()
        .map(|&[x, y]| {
            let r = (x * x + y * y).sqrt();
            if r == 0.0 {
                0.0
            } else {
                x / r.sqrt() * cutoff_bump(r, cutoff)
            }
        })
        .collect::<Vec<f64>>();
    Ok(DVector::from_vec(vals))
}
