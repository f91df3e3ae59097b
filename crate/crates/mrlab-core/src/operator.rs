//! Finite-difference assembly of the divergence-form operator on tensor
//! meshes, and time-indexed operator families.
//!
//! The stencil is flux-form: `-div(A grad u + a u) + b . grad u + c0 u` with
//! face-averaged coefficients, 9-point cross terms when the off-diagonal
//! leading entry is nonzero, centered differences for the first-order terms,
//! and ghost-point elimination of `conormal(u) + beta u = 0` for Neumann and
//! Robin rows.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::field::{min_symmetric_eigenvalue, CoefficientField};
use crate::mesh::{DomainKind, Mesh};
use crate::space::WeightedSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
    Robin,
}

/// Tag recorded on a family: where its matrices came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcTag {
    Dirichlet,
    Neumann,
    Robin,
    Synthetic,
}

impl From<BoundaryCondition> for BcTag {
    fn from(bc: BoundaryCondition) -> Self {
        match bc {
            BoundaryCondition::Dirichlet => BcTag::Dirichlet,
            BoundaryCondition::Neumann => BcTag::Neumann,
            BoundaryCondition::Robin => BcTag::Robin,
        }
    }
}

/// Degrees of freedom for a boundary condition on a mesh: interior nodes for
/// Dirichlet on box domains (boundary values are eliminated as zeros), all
/// nodes otherwise.
pub fn active_nodes(mesh: &Mesh, bc: BoundaryCondition) -> Vec<usize> {
    match (bc, mesh.kind) {
        (BoundaryCondition::Dirichlet, DomainKind::Interval | DomainKind::Square) => {
            mesh.interior()
        }
        (BoundaryCondition::Dirichlet, DomainKind::Disk) => (0..mesh.len()).collect(),
        (_, _) => (0..mesh.len()).collect(),
    }
}

/// Assemble the operator matrix at time `t` over the active nodes of `bc`.
pub fn assemble_operator(
    mesh: &Mesh,
    field: &CoefficientField,
    bc: BoundaryCondition,
    t: f64,
) -> Result<DMatrix<f64>> {
    if field.dim != mesh.dim {
        return Err(Error::Shape(format!(
            "field dimension {} does not match mesh dimension {}",
            field.dim, mesh.dim
        )));
    }
    if bc == BoundaryCondition::Robin && !field.has_robin() {
        return Err(Error::InvalidArg(
            "Robin assembly requires a field with a Robin coefficient".into(),
        ));
    }
    if bc != BoundaryCondition::Dirichlet && mesh.kind == DomainKind::Disk {
        return Err(Error::InvalidArg(
            "the polygonal disk supports Dirichlet conditions only".into(),
        ));
    }
    let cross = field.has_cross_terms();
    if bc != BoundaryCondition::Dirichlet && cross {
        return Err(Error::InvalidArg(
            "ghost elimination requires a diagonal leading matrix at the boundary".into(),
        ));
    }
    let active = active_nodes(mesh, bc);
    let n = active.len();
    let mut local = vec![usize::MAX; mesh.len()];
    for (k, &idx) in active.iter().enumerate() {
        local[idx] = k;
    }
    let h = mesh.h;
    let dim = mesh.dim;
    let mut a = DMatrix::<f64>::zeros(n, n);

    // clamp a face-midpoint evaluation point into the closed domain
    let clamp = |x: [f64; 2]| -> [f64; 2] {
        match mesh.kind {
            DomainKind::Interval | DomainKind::Square => {
                [x[0].clamp(0.0, 1.0), x[1].clamp(0.0, 1.0)]
            }
            DomainKind::Disk => {
                let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
                if r > 1.0 {
                    [x[0] / r, x[1] / r]
                } else {
                    x
                }
            }
        }
    };
    let leading_at = |t: f64, x: [f64; 2]| -> Result<DMatrix<f64>> {
        field.eval_matrix(t, &clamp(x))
    };

    // missing columns are the Dirichlet zero extension
    fn add(a: &mut DMatrix<f64>, row: usize, col: Option<usize>, val: f64) {
        if let Some(c) = col {
            a[(row, c)] += val;
        }
    }

    for (row, &idx) in active.iter().enumerate() {
        let x = mesh.nodes[idx];
        for axis in 0..dim {
            let mut e = [0.0, 0.0];
            e[axis] = 1.0;
            let face_p = [x[0] + 0.5 * h * e[0], x[1] + 0.5 * h * e[1]];
            let face_m = [x[0] - 0.5 * h * e[0], x[1] - 0.5 * h * e[1]];
            let ap = leading_at(t, face_p)?[(axis, axis)];
            let am = leading_at(t, face_m)?[(axis, axis)];
            let nb_p = mesh.neighbor(idx, axis, 1).map(|g| local[g]).filter(|&c| c != usize::MAX);
            let nb_m = mesh.neighbor(idx, axis, -1).map(|g| local[g]).filter(|&c| c != usize::MAX);
            let ghost_p = mesh.neighbor(idx, axis, 1).is_none();
            let ghost_m = mesh.neighbor(idx, axis, -1).is_none();
            match bc {
                BoundaryCondition::Dirichlet => {
                    a[(row, row)] += (ap + am) / (h * h);
                    add(&mut a, row, nb_p, -ap / (h * h));
                    add(&mut a, row, nb_m, -am / (h * h));
                }
                BoundaryCondition::Neumann | BoundaryCondition::Robin => {
                    if ghost_p || ghost_m {
                        // one ghost on this axis: eliminate with
                        // du/dnu + beta u = 0, i.e. u_ghost = u_in - 2 h beta u_b
                        let beta = if bc == BoundaryCondition::Robin {
                            field.eval_robin(t, &clamp(x))?
                        } else {
                            0.0
                        };
                        let af = if ghost_p { am } else { ap }; // use the inside face value
                        let inner = if ghost_p { nb_m } else { nb_p };
                        a[(row, row)] += 2.0 * af / (h * h) + 2.0 * af * beta / h;
                        add(&mut a, row, inner, -2.0 * af / (h * h));
                    } else {
                        a[(row, row)] += (ap + am) / (h * h);
                        add(&mut a, row, nb_p, -ap / (h * h));
                        add(&mut a, row, nb_m, -am / (h * h));
                    }
                }
            }
            // drift terms (interior stencils; Dirichlet zero extension)
            let da = field.eval_drift_a(t, &clamp(x));
            let db = field.eval_drift_b(t, &clamp(x));
            if da[axis] != 0.0 || db[axis] != 0.0 {
                if bc != BoundaryCondition::Dirichlet {
                    return Err(Error::InvalidArg(
                        "first-order terms are supported with Dirichlet conditions only".into(),
                    ));
                }
                // -d/dx(a u): -(a_f (u_i + u_+)/2 - a_f (u_- + u_i)/2)/h with face values
                let afp = field.eval_drift_a(t, &clamp(face_p))[axis];
                let afm = field.eval_drift_a(t, &clamp(face_m))[axis];
                a[(row, row)] += (-afp + afm) / (2.0 * h);
                add(&mut a, row, nb_p, -afp / (2.0 * h));
                add(&mut a, row, nb_m, afm / (2.0 * h));
                // b du/dx centered
                a[(row, row)] += 0.0;
                add(&mut a, row, nb_p, db[axis] / (2.0 * h));
                add(&mut a, row, nb_m, -db[axis] / (2.0 * h));
            }
        }
        // cross terms: -d/dx(a01 d/dy u) - d/dy(a10 d/dx u), corner-averaged
        if cross && dim == 2 {
            for (ax, ay) in [(0usize, 1usize), (1usize, 0usize)] {
                let mut e = [0.0, 0.0];
                e[ax] = 1.0;
                for (sgn, _s) in [(1.0f64, 1i64), (-1.0, -1)] {
                    let face = [x[0] + sgn * 0.5 * h * e[0], x[1] + sgn * 0.5 * h * e[1]];
                    let aoff = leading_at(t, face)?[(ax, ay)];
                    if aoff == 0.0 {
                        continue;
                    }
                    // transverse difference at the face: average of the four
                    // corner values ((i or i+sgn), j +/- 1) in direction ay
                    let step = if sgn > 0.0 { 1 } else { -1 };
                    let corners = [
                        (0i64, 1i64, 1.0f64),
                        (step, 1, 1.0),
                        (0, -1, -1.0),
                        (step, -1, -1.0),
                    ];
                    for &(dx_ax, dy_ay, csgn) in &corners {
                        let nb = step_lattice(mesh, idx, ax, dx_ax, ay, dy_ay);
                        let col = nb.map(|g| local[g]).filter(|&c| c != usize::MAX);
                        // -(1/h)*sgn*aoff*(1/(4h))*csgn applied to u at corner
                        let val = -sgn * aoff * csgn / (4.0 * h * h);
                        add(&mut a, row, col, val);
                    }
                }
            }
        }
        // zero-order term
        let c0 = field.eval_zero_order(t, &clamp(x));
        if c0 != 0.0 {
            a[(row, row)] += c0;
        }
    }
    Ok(a)
}

fn step_lattice(mesh: &Mesh, idx: usize, ax1: usize, s1: i64, ax2: usize, s2: i64) -> Option<usize> {
    if s1 == 0 {
        return mesh.neighbor(idx, ax2, s2);
    }
    let first = mesh.neighbor(idx, ax1, s1)?;
    mesh.neighbor(first, ax2, s2)
}

/// A time grid with one operator matrix per node (plus cached midpoint
/// matrices for the causal quadrature), the quadrature weights and exponent
/// of the underlying space, and the applied spectral shift.
#[derive(Debug, Clone)]
pub struct OperatorFamily {
    time_grid: Vec<f64>,
    matrices: Vec<DMatrix<f64>>,
    midpoints: Vec<DMatrix<f64>>,
    weights: DVector<f64>,
    p: f64,
    mu: f64,
    bc: BcTag,
    source: Option<FamilySource>,
    active: Vec<usize>,
}

#[derive(Clone)]
pub struct FamilySource {
    pub mesh: Mesh,
    pub field: CoefficientField,
    pub bc: BoundaryCondition,
}

impl std::fmt::Debug for FamilySource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FamilySource")
            .field("field", &self.field.name())
            .field("bc", &self.bc)
            .finish()
    }
}

impl OperatorFamily {
    /// Assemble the family of a coefficient field on a mesh over a time grid,
    /// shifting every matrix by `mu`.
    pub fn from_field(
        mesh: &Mesh,
        field: &CoefficientField,
        bc: BoundaryCondition,
        time_grid: Vec<f64>,
        p: f64,
        mu: f64,
    ) -> Result<Self> {
        check_time_grid(&time_grid)?;
        let active = active_nodes(mesh, bc);
        let weights = DVector::from_iterator(
            active.len(),
            active.iter().map(|&i| mesh.cell_volumes[i]),
        );
        let shift = DMatrix::<f64>::identity(active.len(), active.len()) * mu;
        let matrices: Vec<DMatrix<f64>> = time_grid
            .iter()
            .map(|&t| Ok(assemble_operator(mesh, field, bc, t)? + &shift))
            .collect::<Result<_>>()?;
        let midpoints: Vec<DMatrix<f64>> = time_grid
            .windows(2)
            .map(|w| Ok(assemble_operator(mesh, field, bc, 0.5 * (w[0] + w[1]))? + &shift))
            .collect::<Result<_>>()?;
        Ok(OperatorFamily {
            time_grid,
            matrices,
            midpoints,
            weights,
            p,
            mu,
            bc: bc.into(),
            source: Some(FamilySource {
                mesh: mesh.clone(),
                field: field.clone(),
                bc,
            }),
            active,
        })
    }

    /// Wrap explicit matrices; midpoint matrices are linear interpolations of
    /// the node matrices.
    pub fn from_matrices(
        time_grid: Vec<f64>,
        matrices: Vec<DMatrix<f64>>,
        weights: DVector<f64>,
        p: f64,
    ) -> Result<Self> {
        check_time_grid(&time_grid)?;
        if matrices.len() != time_grid.len() {
            return Err(Error::Shape(format!(
                "{} matrices for {} time nodes",
                matrices.len(),
                time_grid.len()
            )));
        }
        let n = weights.len();
        if matrices.iter().any(|m| m.nrows() != n || m.ncols() != n) {
            return Err(Error::Shape("matrix size does not match weights".into()));
        }
        let midpoints = matrices
            .windows(2)
            .map(|w| (&w[0] + &w[1]) * 0.5)
            .collect();
        Ok(OperatorFamily {
            time_grid,
            matrices,
            midpoints,
            weights,
            p,
            mu: 0.0,
            bc: BcTag::Synthetic,
            source: None,
            active: Vec::new(),
        })
    }

    /// Scalar family `A(t) = a(t)` as 1x1 matrices on a unit-weight space.
    pub fn scalar(time_grid: Vec<f64>, a: impl Fn(f64) -> f64, p: f64) -> Result<Self> {
        check_time_grid(&time_grid)?;
        let matrices = time_grid
            .iter()
            .map(|&t| DMatrix::from_element(1, 1, a(t)))
            .collect();
        let midpoints = time_grid
            .windows(2)
            .map(|w| DMatrix::from_element(1, 1, a(0.5 * (w[0] + w[1]))))
            .collect();
        Ok(OperatorFamily {
            time_grid,
            matrices,
            midpoints,
            weights: DVector::from_element(1, 1.0),
            p,
            mu: 0.0,
            bc: BcTag::Synthetic,
            source: None,
            active: Vec::new(),
        })
    }

    /// Same family with the shift replaced by `mu`.
    pub fn with_shift(&self, mu: f64) -> Self {
        let delta = mu - self.mu;
        let n = self.dim();
        let shift = DMatrix::<f64>::identity(n, n) * delta;
        let mut out = self.clone();
        for m in out.matrices.iter_mut() {
            *m += &shift;
        }
        for m in out.midpoints.iter_mut() {
            *m += &shift;
        }
        out.mu = mu;
        out
    }

    pub fn time_grid(&self) -> &[f64] {
        &self.time_grid
    }

    /// Number of time cells.
    pub fn steps(&self) -> usize {
        self.time_grid.len() - 1
    }

    /// Spatial dimension of the matrices.
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn horizon(&self) -> f64 {
        *self.time_grid.last().unwrap()
    }

    pub fn matrix(&self, i: usize) -> &DMatrix<f64> {
        &self.matrices[i]
    }

    /// Matrix at the midpoint of cell j (cells are 1-based like the grid
    /// intervals; `midpoint(j)` freezes `A` on `(t_{j-1}, t_j)`).
    pub fn midpoint(&self, j: usize) -> &DMatrix<f64> {
        &self.midpoints[j - 1]
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn bc(&self) -> BcTag {
        self.bc
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn source(&self) -> Option<&FamilySource> {
        self.source.as_ref()
    }

    pub fn space(&self) -> WeightedSpace {
        WeightedSpace::new(self.weights.clone(), self.p).expect("family space is valid")
    }

    /// Evaluate A(t) off the grid: exactly from the generating field when
    /// available, by linear interpolation of node matrices otherwise.
    pub fn eval_at(&self, t: f64) -> Result<DMatrix<f64>> {
        if let Some(src) = &self.source {
            let n = self.dim();
            let shift = DMatrix::<f64>::identity(n, n) * self.mu;
            return Ok(assemble_operator(&src.mesh, &src.field, src.bc, t)? + shift);
        }
        let grid = &self.time_grid;
        if t <= grid[0] {
            return Ok(self.matrices[0].clone());
        }
        if t >= *grid.last().unwrap() {
            return Ok(self.matrices.last().unwrap().clone());
        }
        let j = grid.partition_point(|&s| s < t).max(1);
        let (t0, t1) = (grid[j - 1], grid[j]);
        let w = (t - t0) / (t1 - t0);
        Ok(&self.matrices[j - 1] * (1.0 - w) + &self.matrices[j] * w)
    }

    /// True when all node matrices coincide.
    pub fn is_autonomous(&self, tol: f64) -> bool {
        let a0 = &self.matrices[0];
        let scale = a0.norm().max(1e-300);
        self.matrices
            .iter()
            .all(|m| (m - a0).norm() <= tol * scale)
    }

    /// Min over nodes of the min eigenvalue of the symmetric part: the left
    /// edge of the numerical range. Positive = invertible sectorial analogue.
    pub fn numerical_range_margin(&self) -> f64 {
        self.matrices
            .iter()
            .map(min_symmetric_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }
}

fn check_time_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::InvalidArg("time grid needs at least 2 nodes".into()));
    }
    if grid[0] != 0.0 {
        return Err(Error::InvalidArg("time grid must start at 0".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArg("time grid must be strictly ascending".into()));
    }
    Ok(())
}

/// Uniform grid 0..T with `steps` cells; `grading` > 1 compresses cells
/// towards t = 0 via t_i = T (i/m)^grading.
pub fn time_grid(horizon: f64, steps: usize, grading: f64) -> Vec<f64> {
    (0..=steps)
        .map(|i| horizon * (i as f64 / steps as f64).powf(grading))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh;
    use approx::assert_relative_eq;

    #[test]
    fn one_dim_half_h_single_entry() {
        // 1D, h = 1/2, A = 1, Dirichlet: 1x1 matrix [8]
        let mesh = build_mesh(DomainKind::Interval, 0.5).unwrap();
        let field = CoefficientField::constant_identity(1);
        let a = assemble_operator(&mesh, &field, BoundaryCondition::Dirichlet, 0.0).unwrap();
        assert_eq!(a.nrows(), 1);
        assert_relative_eq!(a[(0, 0)], 8.0);
    }

    #[test]
    fn five_point_stencil_identity_coefficients() {
        let mesh = build_mesh(DomainKind::Square, 0.25).unwrap();
        let field = CoefficientField::constant_identity(2);
        let a = assemble_operator(&mesh, &field, BoundaryCondition::Dirichlet, 0.0).unwrap();
        let h2 = 0.25 * 0.25;
        // middle row (center of the 3x3 interior grid)
        let center = 4;
        assert_relative_eq!(a[(center, center)], 4.0 / h2);
        let offs: Vec<f64> = (0..9)
            .filter(|&j| j != center)
            .map(|j| a[(center, j)])
            .filter(|&v| v != 0.0)
            .collect();
        assert_eq!(offs.len(), 4);
        for v in offs {
            assert_relative_eq!(v, -1.0 / h2);
        }
    }

    #[test]
    fn robin_zero_equals_neumann_bitwise() {
        let mesh = build_mesh(DomainKind::Interval, 0.125).unwrap();
        let robin0 = CoefficientField::robin_laplacian(1, 0.9, 0.0, 0.0, 0.0);
        let an = assemble_operator(&mesh, &robin0, BoundaryCondition::Neumann, 0.3).unwrap();
        let ar = assemble_operator(&mesh, &robin0, BoundaryCondition::Robin, 0.3).unwrap();
        assert_eq!(an, ar);
    }

    #[test]
    fn dirichlet_symmetric_spd() {
        let mesh = build_mesh(DomainKind::Square, 0.125).unwrap();
        let field = CoefficientField::checkerboard(2, 0.25, 0.5, 1.5, 0.25, 1.0, 0.0);
        let a = assemble_operator(&mesh, &field, BoundaryCondition::Dirichlet, 0.0).unwrap();
        assert_relative_eq!((&a - a.transpose()).norm(), 0.0, epsilon = 1e-10);
        let min_eig = a.symmetric_eigenvalues().min();
        assert!(min_eig > 0.0);
        // discrete coercivity: bounded below by c * alpha0 with c = pi^2-ish
        assert!(min_eig > 2.0 * field.alpha0, "min eig {min_eig}");
    }

    #[test]
    fn consistency_sin_interval() {
        // A = I, u = sin(pi x): residual of (A u - pi^2 u) decays at order h^2
        let field = CoefficientField::constant_identity(1);
        let mut errs = Vec::new();
        for &m in &[16usize, 32, 64] {
            let mesh = build_mesh(DomainKind::Interval, 1.0 / m as f64).unwrap();
            let a = assemble_operator(&mesh, &field, BoundaryCondition::Dirichlet, 0.0).unwrap();
            let act = active_nodes(&mesh, BoundaryCondition::Dirichlet);
            let u = DVector::from_iterator(
                act.len(),
                act.iter().map(|&i| (std::f64::consts::PI * mesh.nodes[i][0]).sin()),
            );
            let r = &a * &u - &u * std::f64::consts::PI.powi(2);
            errs.push(r.norm() / u.norm());
        }
        assert!(errs[1] < errs[0] * 0.3, "{errs:?}");
        assert!(errs[2] < errs[1] * 0.3, "{errs:?}");
    }

    #[test]
    fn consistency_variable_coefficient_2d() {
        // smooth anisotropic field with cross terms against a manufactured
        // solution; interior residual decays O(h) or better
        use std::sync::Arc;
        let leading: crate::field::MatrixFn = Arc::new(|_t, x| {
            let (a, b) = (x[0], x[1]);
            DMatrix::from_row_slice(
                2,
                2,
                &[2.0 + a, 0.3 * a * b, 0.3 * a * b, 1.5 + 0.5 * b],
            )
        });
        let field =
            CoefficientField::custom(2, "aniso", leading, None, None, None, 1.0, 3.5);
        let pi = std::f64::consts::PI;
        let u = |x: f64, y: f64| (pi * x).sin() * (pi * y).sin();
        // -div(A grad u) computed symbolically via finite differences of the flux
        let lu = |x: f64, y: f64| {
            let e = 1e-5;
            let flux = |x: f64, y: f64, comp: usize| {
                let ux = (u(x + e, y) - u(x - e, y)) / (2.0 * e);
                let uy = (u(x, y + e) - u(x, y - e)) / (2.0 * e);
                let m = (0.0, [x, y]);
                let a11 = 2.0 + m.1[0];
                let a12 = 0.3 * m.1[0] * m.1[1];
                let a22 = 1.5 + 0.5 * m.1[1];
                if comp == 0 {
                    a11 * ux + a12 * uy
                } else {
                    a12 * ux + a22 * uy
                }
            };
            -((flux(x + e, y, 0) - flux(x - e, y, 0)) / (2.0 * e)
                + (flux(x, y + e, 1) - flux(x, y - e, 1)) / (2.0 * e))
        };
        let mut errs = Vec::new();
        for &m in &[8usize, 16, 32] {
            let mesh = build_mesh(DomainKind::Square, 1.0 / m as f64).unwrap();
            let a = assemble_operator(&mesh, &field, BoundaryCondition::Dirichlet, 0.0).unwrap();
            let act = active_nodes(&mesh, BoundaryCondition::Dirichlet);
            let uv = DVector::from_iterator(
                act.len(),
                act.iter().map(|&i| u(mesh.nodes[i][0], mesh.nodes[i][1])),
            );
            let target = DVector::from_iterator(
                act.len(),
                act.iter().map(|&i| lu(mesh.nodes[i][0], mesh.nodes[i][1])),
            );
            let r = &a * &uv - &target;
            errs.push(r.amax() / target.amax());
        }
        assert!(errs[2] < errs[0], "{errs:?}");
        assert!(errs[2] < 0.7 * errs[1], "no decay: {errs:?}");
    }

    #[test]
    fn family_shift_and_range() {
        let mesh = build_mesh(DomainKind::Interval, 0.25).unwrap();
        let field = CoefficientField::constant_identity(1);
        let grid = time_grid(1.0, 4, 1.0);
        let fam = OperatorFamily::from_field(&mesh, &field, BoundaryCondition::Dirichlet, grid, 2.0, 0.0)
            .unwrap();
        assert!(fam.numerical_range_margin() > 0.0);
        let shifted = fam.with_shift(5.0);
        assert_relative_eq!(
            shifted.matrix(0)[(0, 0)],
            fam.matrix(0)[(0, 0)] + 5.0
        );
        assert!(shifted.is_autonomous(1e-14));
    }

    #[test]
    fn synthetic_midpoints_interpolate() {
        let grid = vec![0.0, 0.5, 1.0];
        let mats = vec![
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.5),
            DMatrix::from_element(1, 1, 2.0),
        ];
        let fam =
            OperatorFamily::from_matrices(grid, mats, DVector::from_element(1, 1.0), 2.0).unwrap();
        assert_relative_eq!(fam.midpoint(1)[(0, 0)], 1.25);
        assert_relative_eq!(fam.midpoint(2)[(0, 0)], 1.75);
        assert_relative_eq!(fam.eval_at(0.25).unwrap()[(0, 0)], 1.25);
    }

    #[test]
    fn graded_grid_shape() {
        let g = time_grid(1.0, 4, 2.0);
        assert_relative_eq!(g[1], 1.0 / 16.0);
        assert_relative_eq!(g[4], 1.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }
}
