//! Solver for the discrete non-autonomous Cauchy problem
//! `u'(t) + A(t) u(t) = f(t)`, `u(0) = u0`, via the causal representation
//! `(Id - Q)(A(.)u(.)) = Sf + R u0` with exact per-cell semigroup integrals,
//! plus an independent Crank-Nicolson time-stepping oracle, mixed norms, and
//! the maximal-regularity constant.
//!
//! Data `f` is piecewise constant per time cell `(t_{j-1}, t_j]`; the cell
//! integrals of `S` and `Q` then have closed forms in the matrix exponential
//! (the antiderivative of `A e^{-sigma A}` is `-e^{-sigma A}`), so the only
//! representation error is the midpoint freezing of `A(s)^{-1}` and the
//! right-endpoint freezing of the trajectory inside `Q`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::calculus::{lu_inverse, mat_exp, real_interp_norm};
use crate::error::{Error, Result};
use crate::operator::OperatorFamily;
use crate::space::lp_norm;

/// Trajectories are node values on the family's time grid (length steps + 1).
pub type Trajectory = Vec<DVector<f64>>;

/// The discrete problem: family, initial value, cell-sampled right-hand side
/// (piecewise constant per cell), and the time exponent of the mixed norm.
#[derive(Debug, Clone)]
pub struct NacpProblem {
    pub family: OperatorFamily,
    pub u0: DVector<f64>,
    /// `f[j]` is the value on the cell `(t_j, t_{j+1}]`, j = 0..steps-1.
    pub f: Vec<DVector<f64>>,
    pub q_time: f64,
}

impl NacpProblem {
    pub fn new(
        family: OperatorFamily,
        u0: DVector<f64>,
        f: Vec<DVector<f64>>,
        q_time: f64,
    ) -> Result<Self> {
        let n = family.dim();
        let m = family.steps();
        if u0.len() != n {
            return Err(Error::Shape(format!(
                "u0 has length {}, family dimension {n}",
                u0.len()
            )));
        }
        if f.len() != m {
            return Err(Error::Shape(format!("f has {} cells, grid has {m}", f.len())));
        }
        if f.iter().any(|v| v.len() != n) {
            return Err(Error::Shape("f cell dimension mismatch".into()));
        }
        if !(q_time >= 1.0) {
            return Err(Error::InvalidArg(format!("time exponent q = {q_time}")));
        }
        Ok(NacpProblem { family, u0, f, q_time })
    }

    /// Constant-in-time right-hand side.
    pub fn with_constant_f(
        family: OperatorFamily,
        u0: DVector<f64>,
        fvec: DVector<f64>,
        q_time: f64,
    ) -> Result<Self> {
        let m = family.steps();
        let f = vec![fvec; m];
        NacpProblem::new(family, u0, f, q_time)
    }
}

/// `(R u0)(t_i) = A(t_i) e^{-t_i A(t_i)} u0`.
pub fn assemble_r(family: &OperatorFamily, u0: &DVector<f64>) -> Result<Trajectory> {
    let grid = family.time_grid();
    let mut out = Vec::with_capacity(grid.len());
    for (i, &t) in grid.iter().enumerate() {
        let e = mat_exp(family.matrix(i), t)?;
        out.push(family.matrix(i) * (e * u0));
    }
    Ok(out)
}

/// `(S f)(t_i) = sum_{j<=i} [e^{-(t_i - t_j) A_i} - e^{-(t_i - t_{j-1}) A_i}] f_j`,
/// the exact cell integrals for piecewise-constant data.
pub fn assemble_s(family: &OperatorFamily, f: &[DVector<f64>]) -> Result<Trajectory> {
    let grid = family.time_grid();
    let m = family.steps();
    let n = family.dim();
    if f.len() != m {
        return Err(Error::Shape("cell count mismatch in S assembly".into()));
    }
    let mut out = vec![DVector::zeros(n)];
    for i in 1..=m {
        let ai = family.matrix(i);
        // sweep j = i..1 accumulating M_j = e^{-(t_i - t_j) A_i}
        let mut mj = DMatrix::<f64>::identity(n, n);
        let mut acc = DVector::<f64>::zeros(n);
        for j in (1..=i).rev() {
            let mj1 = &mj * mat_exp(ai, grid[j] - grid[j - 1])?;
            acc += (&mj - &mj1) * &f[j - 1];
            mj = mj1;
        }
        out.push(acc);
    }
    Ok(out)
}

/// The causal operator `Q` on trajectories: block (i, j) for `1 <= j <= i` is
/// `A_i [e^{-(t_i-t_j)A_i} - e^{-(t_i-t_{j-1})A_i}] (A(mid_j)^{-1} - A_i^{-1})`,
/// acting on the right-endpoint value of the trajectory in cell j.
pub struct QOperator {
    grid: Vec<f64>,
    mats: Vec<DMatrix<f64>>,
    ainv: Vec<DMatrix<f64>>,
    minv: Vec<DMatrix<f64>>,
    /// Dense block rows `blocks[i-1][j-1] = B_{ij}` when memory allows.
    blocks: Option<Vec<Vec<DMatrix<f64>>>>,
    /// Uniform-grid cell propagators `E_i = e^{-dt A_i}` for the matrix-free path.
    cell_exp: Option<Vec<DMatrix<f64>>>,
    weights: DVector<f64>,
    p: f64,
}

/// Dense Q blocks are stored up to this many bytes.
const Q_DENSE_BUDGET: usize = 256 << 20;

impl QOperator {
    pub fn assemble(family: &OperatorFamily) -> Result<Self> {
        let grid = family.time_grid().to_vec();
        let m = family.steps();
        let n = family.dim();
        let mats: Vec<DMatrix<f64>> = (0..=m).map(|i| family.matrix(i).clone()).collect();
        let ainv: Vec<DMatrix<f64>> = mats.iter().map(lu_inverse).collect::<Result<_>>()?;
        let minv: Vec<DMatrix<f64>> = (1..=m)
            .map(|j| lu_inverse(family.midpoint(j)))
            .collect::<Result<_>>()?;
        let dense_bytes = m * (m + 1) / 2 * n * n * 8;
        let dt0 = grid[1] - grid[0];
        let uniform = grid
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dt0).abs() <= 1e-12 * dt0);
        let mut blocks = None;
        let mut cell_exp = None;
        if dense_bytes <= Q_DENSE_BUDGET {
            let mut rows = Vec::with_capacity(m);
            for i in 1..=m {
                let ai = &mats[i];
                let mut row = vec![DMatrix::<f64>::zeros(n, n); i];
                let mut mj = DMatrix::<f64>::identity(n, n);
                for j in (1..=i).rev() {
                    let mj1 = &mj * mat_exp(ai, grid[j] - grid[j - 1])?;
                    row[j - 1] = ai * ((&mj - &mj1) * (&minv[j - 1] - &ainv[i]));
                    mj = mj1;
                }
                rows.push(row);
            }
            blocks = Some(rows);
        } else if uniform {
            let es: Vec<DMatrix<f64>> = (0..=m)
                .map(|i| mat_exp(&mats[i], dt0))
                .collect::<Result<_>>()?;
            cell_exp = Some(es);
        } else {
            return Err(Error::Resource(format!(
                "Q needs {} MB of dense blocks and the grid is graded; refine less",
                dense_bytes >> 20
            )));
        }
        Ok(QOperator {
            grid,
            mats,
            ainv,
            minv,
            blocks,
            cell_exp,
            weights: family.weights().clone(),
            p: family.p(),
        })
    }

    pub fn steps(&self) -> usize {
        self.grid.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Dense block (i, j), 1-based; available on the dense path.
    pub fn block(&self, i: usize, j: usize) -> Option<&DMatrix<f64>> {
        self.blocks.as_ref().map(|rows| &rows[i - 1][j - 1])
    }

    /// `(Q w)(t_i)` for a node trajectory; row 0 is zero by causality.
    pub fn apply(&self, w: &[DVector<f64>]) -> Result<Trajectory> {
        let m = self.steps();
        let n = self.dim();
        if w.len() != m + 1 {
            return Err(Error::Shape("trajectory length mismatch in Q apply".into()));
        }
        let mut out = vec![DVector::<f64>::zeros(n)];
        if let Some(rows) = &self.blocks {
            for i in 1..=m {
                let mut acc = DVector::<f64>::zeros(n);
                for j in 1..=i {
                    acc += &rows[i - 1][j - 1] * &w[j];
                }
                out.push(acc);
            }
            return Ok(out);
        }
        let es = self
            .cell_exp
            .as_ref()
            .expect("matrix-free path requires a uniform grid");
        // y_j = Minv_j w_j, reused across rows
        let ys: Vec<DVector<f64>> = (1..=m).map(|j| &self.minv[j - 1] * &w[j]).collect();
        for i in 1..=m {
            let ei = &es[i];
            let mut acc = DVector::<f64>::zeros(n);
            for j in 1..=i {
                let cj = &ys[j - 1] - &self.ainv[i] * &w[j];
                acc = ei * acc + cj;
            }
            // acc = sum_j E^{i-j} c_j; row = A_i (acc - E acc)
            let eacc = ei * &acc;
            out.push(&self.mats[i] * (acc - eacc));
        }
        Ok(out)
    }

    /// Adjoint of Q with respect to the weighted trajectory inner product
    /// (used by the norm estimator at p = q = 2).
    fn apply_adjoint(&self, v: &[DVector<f64>], dts: &[f64]) -> Trajectory {
        let m = self.steps();
        let n = self.dim();
        let w = &self.weights;
        let mut out = vec![DVector::<f64>::zeros(n); m + 1];
        let scale_in = |i: usize, x: &DVector<f64>| -> DVector<f64> {
            DVector::from_fn(n, |k, _| x[k] * w[k] * dts[i - 1])
        };
        if let Some(rows) = &self.blocks {
            for i in 1..=m {
                let vi = scale_in(i, &v[i]);
                for j in 1..=i {
                    let contrib = rows[i - 1][j - 1].transpose() * &vi;
                    out[j] += contrib;
                }
            }
        } else {
            let es = self.cell_exp.as_ref().unwrap();
            for i in 1..=m {
                let ei = &es[i];
                let vi = scale_in(i, &v[i]);
                // B_ij^T v = (Minv_j - Ainv_i)^T (E^T)^{i-j} (I - E^T) A_i^T v
                let base = self.mats[i].transpose() * &vi;
                let eit = ei.transpose();
                let mut z = &base - &eit * &base;
                for j in (1..=i).rev() {
                    let term = self.minv[j - 1].transpose() * &z - self.ainv[i].transpose() * &z;
                    out[j] += term;
                    if j > 1 {
                        z = &eit * z;
                    }
                }
            }
        }
        for (j, o) in out.iter_mut().enumerate() {
            if j >= 1 {
                for k in 0..n {
                    o[k] /= w[k] * dts[j - 1];
                }
            }
        }
        out
    }

    /// Operator norm of Q on the mixed trajectory norm. For `p = q = 2` this
    /// is a power iteration on `Q* Q` in the weighted inner product; other
    /// exponents use a duality-map fixed point. Either way the value is a
    /// certified lower bound for the true norm.
    pub fn norm_estimate(&self, q_time: f64, seed: u64, max_iter: usize) -> Result<f64> {
        let m = self.steps();
        let n = self.dim();
        let dts: Vec<f64> = self.grid.windows(2).map(|w| w[1] - w[0]).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best: f64 = 0.0;
        let restarts = if self.p == 2.0 && q_time == 2.0 { 2 } else { 6 };
        for r in 0..restarts {
            let mut w: Trajectory = (0..=m)
                .map(|i| {
                    if i == 0 {
                        DVector::zeros(n)
                    } else if r == 0 {
                        DVector::from_element(n, 1.0)
                    } else {
                        DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
                    }
                })
                .collect();
            let mut nw = self.mixed_norm_q(self.p, q_time, &w, &dts);
            if nw == 0.0 {
                continue;
            }
            for wi in w.iter_mut() {
                *wi /= nw;
            }
            let mut prev = 0.0;
            for _ in 0..max_iter {
                let qw = self.apply(&w)?;
                let nqw = self.mixed_norm_q(self.p, q_time, &qw, &dts);
                best = best.max(nqw);
                if nqw <= 1e-300 {
                    break;
                }
                if self.p == 2.0 && q_time == 2.0 {
                    let back = self.apply_adjoint(&qw, &dts);
                    nw = self.mixed_norm_q(self.p, q_time, &back, &dts);
                    if nw <= 1e-300 {
                        break;
                    }
                    w = back.into_iter().map(|x| x / nw).collect();
                } else {
                    let dual = self.mixed_dual_q(self.p, q_time, &qw, &dts, nqw);
                    let back = self.apply_adjoint(&dual, &dts);
                    let (pd, qd) = self.dual_exponents(q_time);
                    let nb = self.mixed_norm_q(pd, qd, &back, &dts);
                    if nb <= 1e-300 {
                        break;
                    }
                    let primal = self.mixed_dual_q(pd, qd, &back, &dts, nb);
                    let np = self.mixed_norm_q(self.p, q_time, &primal, &dts);
                    if np <= 1e-300 {
                        break;
                    }
                    w = primal.into_iter().map(|x| x / np).collect();
                }
                if (best - prev).abs() <= 1e-6 * best.max(1e-300) {
                    break;
                }
                prev = best;
            }
        }
        Ok(best)
    }

    fn dual_exponents(&self, q_time: f64) -> (f64, f64) {
        let conj = |e: f64| {
            if e.is_infinite() {
                1.0
            } else if e == 1.0 {
                f64::INFINITY
            } else {
                e / (e - 1.0)
            }
        };
        (conj(self.p), conj(q_time))
    }

    fn mixed_norm_q(&self, p: f64, q: f64, traj: &[DVector<f64>], dts: &[f64]) -> f64 {
        let m = dts.len();
        let vals: Vec<f64> = (1..=m)
            .map(|i| lp_norm(&self.weights, p, traj[i].as_slice()))
            .collect();
        let tw = DVector::from_vec(dts.to_vec());
        lp_norm(&tw, q, &vals)
    }

    /// Normalized duality trajectory of the mixed (p, q) norm.
    fn mixed_dual_q(
        &self,
        p: f64,
        q: f64,
        traj: &[DVector<f64>],
        dts: &[f64],
        nrm: f64,
    ) -> Trajectory {
        let m = dts.len();
        let n = self.dim();
        let mut out = vec![DVector::<f64>::zeros(n)];
        for i in 1..=m {
            let ni = lp_norm(&self.weights, p, traj[i].as_slice());
            if ni == 0.0 {
                out.push(DVector::zeros(n));
                continue;
            }
            let time_factor = if q.is_infinite() {
                if ni >= nrm * (1.0 - 1e-12) {
                    1.0
                } else {
                    0.0
                }
            } else {
                (ni / nrm).powf(q - 1.0)
            };
            let v = DVector::from_fn(n, |k, _| {
                let x = traj[i][k];
                if x == 0.0 {
                    0.0
                } else if p.is_infinite() {
                    if x.abs() >= ni * (1.0 - 1e-12) {
                        x.signum()
                    } else {
                        0.0
                    }
                } else {
                    x.signum() * (x.abs() / ni).powf(p - 1.0)
                }
            });
            out.push(v * time_factor);
        }
        out
    }
}

/// Right-endpoint mixed norm `( sum_i dt_i ||v(t_i)||_p^q )^{1/q}` of a node
/// trajectory (length steps+1, node 0 carries no quadrature weight) or a cell
/// array (length steps).
pub fn mixed_norm(family: &OperatorFamily, q_time: f64, values: &[DVector<f64>]) -> Result<f64> {
    let grid = family.time_grid();
    let m = family.steps();
    let offset = if values.len() == m + 1 {
        1
    } else if values.len() == m {
        0
    } else {
        return Err(Error::Shape(format!(
            "trajectory has {} entries for {m} cells",
            values.len()
        )));
    };
    let dts: Vec<f64> = grid.windows(2).map(|w| w[1] - w[0]).collect();
    let vals: Vec<f64> = (0..m)
        .map(|j| lp_norm(family.weights(), family.p(), values[j + offset].as_slice()))
        .collect();
    Ok(lp_norm(&DVector::from_vec(dts), q_time, &vals))
}

/// Solution strategy for the block system.
#[derive(Debug, Clone, Copy)]
pub enum Strategy {
    /// Block forward substitution; exact for the discrete system.
    DirectBlock,
    /// Neumann series `w <- rhs + Q w`; witnesses the contraction mechanism
    /// and requires an estimated `||Q|| < 1`.
    Neumann { max_iter: usize, tol: f64 },
}

/// Norms entering the maximal-regularity constant.
#[derive(Debug, Clone, Copy)]
pub struct MrNorms {
    pub udot: f64,
    pub au: f64,
    pub f: f64,
    pub u0_interp: f64,
}

/// Solution data of the discrete problem.
#[derive(Debug)]
pub struct MrSolveResult {
    pub u: Trajectory,
    pub udot: Trajectory,
    pub au: Trajectory,
    /// Power-iteration estimate of `||Q||` on the mixed norm.
    pub q_norm_est: f64,
    /// Neumann iterations used (0 for the direct solve).
    pub neumann_iters: usize,
    pub c_mr: Option<f64>,
    pub norms: MrNorms,
}

/// Solve `(Id - Q) w = S f + R u0`, recover `u = A^{-1} w`, `u' = f - w`.
pub fn solve_at(problem: &NacpProblem, strategy: Strategy) -> Result<MrSolveResult> {
    let family = &problem.family;
    let m = family.steps();
    let n = family.dim();
    let grid = family.time_grid();
    let q = QOperator::assemble(family)?;
    let s = assemble_s(family, &problem.f)?;
    let r = assemble_r(family, &problem.u0)?;
    let rhs: Trajectory = (0..=m).map(|i| &s[i] + &r[i]).collect();
    let q_norm_est = q.norm_estimate(problem.q_time, 0x5eed, 12)?;

    let mut neumann_iters = 0;
    let w: Trajectory = match strategy {
        Strategy::DirectBlock => {
            let mut w: Trajectory = vec![rhs[0].clone()];
            let eye = DMatrix::<f64>::identity(n, n);
            for i in 1..=m {
                // known part: sum_{j<i} B_ij w_j
                let known = if let Some(rows) = &q.blocks {
                    let mut acc = DVector::<f64>::zeros(n);
                    for j in 1..i {
                        acc += &rows[i - 1][j - 1] * &w[j];
                    }
                    acc
                } else {
                    let es = q.cell_exp.as_ref().unwrap();
                    let ei = &es[i];
                    let mut h = DVector::<f64>::zeros(n);
                    for j in 1..i {
                        let cj = &q.minv[j - 1] * &w[j] - &q.ainv[i] * &w[j];
                        h = ei * h + cj;
                    }
                    let sacc = ei * h; // sum_{j<i} E^{i-j} c_j
                    &q.mats[i] * (&sacc - ei * &sacc)
                };
                // diagonal block B_ii = A_i (I - E_cell_i)(Minv_i - Ainv_i)
                let ecell = mat_exp(&q.mats[i], grid[i] - grid[i - 1])?;
                let bii = &q.mats[i] * ((&eye - &ecell) * (&q.minv[i - 1] - &q.ainv[i]));
                let lhs = &eye - bii;
                let wi = lhs
                    .lu()
                    .solve(&(&rhs[i] + known))
                    .ok_or_else(|| Error::Numerical("singular diagonal block Id - Q_ii".into()))?;
                w.push(wi);
            }
            w
        }
        Strategy::Neumann { max_iter, tol } => {
            if q_norm_est >= 1.0 {
                return Err(Error::ContractionFailed(q_norm_est));
            }
            let scale = mixed_norm(family, problem.q_time, &rhs)?.max(1e-300);
            let mut w = rhs.clone();
            let mut converged = false;
            for it in 1..=max_iter {
                let qw = q.apply(&w)?;
                let next: Trajectory = (0..=m).map(|i| &rhs[i] + &qw[i]).collect();
                let diff: Trajectory = (0..=m).map(|i| &next[i] - &w[i]).collect();
                let d = mixed_norm(family, problem.q_time, &diff)?;
                w = next;
                neumann_iters = it;
                if d <= tol * scale {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::ContractionFailed(q_norm_est));
            }
            w
        }
    };

    let u: Trajectory = (0..=m).map(|i| &q.ainv[i] * &w[i]).collect();
    let udot: Trajectory = (0..=m)
        .map(|i| {
            let fc = if i == 0 { &problem.f[0] } else { &problem.f[i - 1] };
            fc - &w[i]
        })
        .collect();
    let norms = MrNorms {
        udot: mixed_norm(family, problem.q_time, &udot)?,
        au: mixed_norm(family, problem.q_time, &w)?,
        f: mixed_norm(family, problem.q_time, &problem.f)?,
        u0_interp: interp_norm_of_u0(problem)?,
    };
    let c_mr = mr_constant_from(&norms);
    Ok(MrSolveResult {
        u,
        udot,
        au: w,
        q_norm_est,
        neumann_iters,
        c_mr,
        norms,
    })
}

fn interp_norm_of_u0(problem: &NacpProblem) -> Result<f64> {
    let space = problem.family.space();
    if space.norm(&problem.u0) == 0.0 {
        return Ok(0.0);
    }
    real_interp_norm(
        problem.family.matrix(0),
        &space,
        1.0 / problem.q_time,
        problem.q_time,
        &problem.u0,
        (-20, 20),
    )
}

fn mr_constant_from(norms: &MrNorms) -> Option<f64> {
    let den = norms.f + norms.u0_interp;
    if den <= 0.0 {
        return None; // undefined: both data zero
    }
    Some((norms.udot + norms.au) / den)
}

/// The maximal-regularity quotient of a solve; `None` when both data vanish.
pub fn mr_constant(result: &MrSolveResult) -> Option<f64> {
    mr_constant_from(&result.norms)
}

/// Crank-Nicolson oracle on a `refine`-times finer grid with midpoint-frozen
/// `A(t)`, restricted back to the problem grid.
pub fn cn_oracle(problem: &NacpProblem, refine: usize) -> Result<Trajectory> {
    if refine == 0 {
        return Err(Error::InvalidArg("refine must be >= 1".into()));
    }
    let family = &problem.family;
    let grid = family.time_grid();
    let n = family.dim();
    let eye = DMatrix::<f64>::identity(n, n);
    let mut u = problem.u0.clone();
    let mut out = vec![u.clone()];
    for j in 1..=family.steps() {
        let tau = (grid[j] - grid[j - 1]) / refine as f64;
        for k in 0..refine {
            let tmid = grid[j - 1] + (k as f64 + 0.5) * tau;
            let a = family.eval_at(tmid)?;
            let rhs = (&eye - &a * (tau / 2.0)) * &u + &problem.f[j - 1] * tau;
            u = (&eye + &a * (tau / 2.0))
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::Numerical("Crank-Nicolson solve failed".into()))?;
        }
        out.push(u.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::time_grid;
    use approx::assert_relative_eq;

    fn scalar_family(a: impl Fn(f64) -> f64, steps: usize) -> OperatorFamily {
        OperatorFamily::scalar(time_grid(1.0, steps, 1.0), a, 2.0).unwrap()
    }

    fn v1(x: f64) -> DVector<f64> {
        DVector::from_element(1, x)
    }

    #[test]
    fn r_scalar_and_diag() {
        let fam = scalar_family(|_| 1.0, 4);
        let r = assemble_r(&fam, &v1(1.0)).unwrap();
        assert_relative_eq!(r[4][0], (-1.0f64).exp(), max_relative = 1e-12);
        let r0 = assemble_r(&fam, &v1(0.0)).unwrap();
        assert!(r0.iter().all(|v| v[0] == 0.0));
        let mats: Vec<DMatrix<f64>> = (0..=4)
            .map(|_| DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0])))
            .collect();
        let fam2 = OperatorFamily::from_matrices(
            time_grid(1.0, 4, 1.0),
            mats,
            DVector::from_element(2, 1.0),
            2.0,
        )
        .unwrap();
        let r2 = assemble_r(&fam2, &DVector::from_vec(vec![1.0, 1.0])).unwrap();
        assert_relative_eq!(r2[4][0], (-1.0f64).exp(), max_relative = 1e-12);
        assert_relative_eq!(r2[4][1], 2.0 * (-2.0f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn s_closed_forms() {
        // A = 1, f = 1, one cell [0,1]: (Sf)(1) = 1 - e^{-1}
        let fam = OperatorFamily::scalar(vec![0.0, 1.0], |_| 1.0, 2.0).unwrap();
        let s = assemble_s(&fam, &[v1(1.0)]).unwrap();
        assert_relative_eq!(s[1][0], 1.0 - (-1.0f64).exp(), max_relative = 1e-12);
        let s0 = assemble_s(&fam, &[v1(0.0)]).unwrap();
        assert!(s0.iter().all(|v| v[0] == 0.0));
        // A = 2, f = 1 on [0, 0.5] then 0, at t = 1: e^{-1} - e^{-2}
        let fam2 = OperatorFamily::scalar(vec![0.0, 0.5, 1.0], |_| 2.0, 2.0).unwrap();
        let s2 = assemble_s(&fam2, &[v1(1.0), v1(0.0)]).unwrap();
        assert_relative_eq!(
            s2[2][0],
            (-1.0f64).exp() - (-2.0f64).exp(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn q_autonomous_is_zero() {
        let fam = scalar_family(|_| 3.0, 6);
        let q = QOperator::assemble(&fam).unwrap();
        let w: Trajectory = (0..=6).map(|i| v1(i as f64)).collect();
        let qw = q.apply(&w).unwrap();
        assert!(qw.iter().all(|v| v[0].abs() < 1e-14));
        assert!(q.norm_estimate(2.0, 1, 20).unwrap() < 1e-12);
    }

    #[test]
    fn q_scalar_block_closed_form() {
        // A(t) = 1 + t, cells [0, 0.5], [0.5, 1]: block (2,1) =
        // a(1) [e^{-0.5 a(1)} - e^{-a(1)}] (1/a(0.25) - 1/a(1)), a(1) = 2
        let fam = OperatorFamily::scalar(vec![0.0, 0.5, 1.0], |t| 1.0 + t, 2.0).unwrap();
        let q = QOperator::assemble(&fam).unwrap();
        let b21 = q.block(2, 1).unwrap();
        let expect = 2.0 * ((-1.0f64).exp() - (-2.0f64).exp()) * (1.0 / 1.25 - 0.5);
        assert_relative_eq!(b21[(0, 0)], expect, max_relative = 1e-12);
        assert_relative_eq!(expect, 0.139526, max_relative = 1e-4);
    }

    #[test]
    fn q_causality_last_cell() {
        // a trajectory supported on the last cell feeds only the last row
        let fam = scalar_family(|t| 1.0 + 0.5 * t, 5);
        let q = QOperator::assemble(&fam).unwrap();
        let mut w: Trajectory = (0..=5).map(|_| v1(0.0)).collect();
        w[5] = v1(1.0);
        let qw = q.apply(&w).unwrap();
        for i in 0..5 {
            assert_eq!(qw[i][0], 0.0);
        }
        assert!(qw[5][0] != 0.0);
    }

    #[test]
    fn q_matrix_free_matches_dense() {
        let fam = scalar_family(|t| 1.0 + t * t, 8);
        let dense = QOperator::assemble(&fam).unwrap();
        assert!(dense.blocks.is_some());
        let free = QOperator {
            blocks: None,
            cell_exp: Some(
                (0..=8)
                    .map(|i| mat_exp(fam.matrix(i), 1.0 / 8.0).unwrap())
                    .collect(),
            ),
            grid: dense.grid.clone(),
            mats: dense.mats.clone(),
            ainv: dense.ainv.clone(),
            minv: dense.minv.clone(),
            weights: dense.weights.clone(),
            p: dense.p,
        };
        let w: Trajectory = (0..=8).map(|i| v1((i as f64).sin() + 0.3)).collect();
        let a = dense.apply(&w).unwrap();
        let b = free.apply(&w).unwrap();
        for i in 0..=8 {
            assert_relative_eq!(a[i][0], b[i][0], epsilon = 1e-13, max_relative = 1e-11);
        }
        // adjoint consistency: <Qw, v> = <w, Q* v> in the weighted inner product
        let dts: Vec<f64> = dense.grid.windows(2).map(|x| x[1] - x[0]).collect();
        let v: Trajectory = (0..=8).map(|i| v1((i as f64).cos())).collect();
        let qa = free.apply_adjoint(&v, &dts);
        let qa2 = dense.apply_adjoint(&v, &dts);
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for i in 1..=8 {
            lhs += dts[i - 1] * a[i][0] * v[i][0];
            rhs += dts[i - 1] * w[i][0] * qa[i][0];
            assert_relative_eq!(qa[i][0], qa2[i][0], epsilon = 1e-13, max_relative = 1e-11);
        }
        assert_relative_eq!(lhs, rhs, max_relative = 1e-11);
    }

    #[test]
    fn autonomous_exactness() {
        // A = 1: f = 0, u0 = 1 -> u(t) = e^{-t}; f = 1, u0 = 0 -> 1 - e^{-t}
        let fam = scalar_family(|_| 1.0, 16);
        let p1 = NacpProblem::with_constant_f(fam.clone(), v1(1.0), v1(0.0), 2.0).unwrap();
        let r1 = solve_at(&p1, Strategy::DirectBlock).unwrap();
        assert_relative_eq!(r1.u[16][0], (-1.0f64).exp(), max_relative = 1e-12);
        let p2 = NacpProblem::with_constant_f(fam, v1(0.0), v1(1.0), 2.0).unwrap();
        let r2 = solve_at(&p2, Strategy::DirectBlock).unwrap();
        for i in 0..=16 {
            let t = i as f64 / 16.0;
            assert_relative_eq!(r2.u[i][0], 1.0 - (-t).exp(), max_relative = 1e-11, epsilon = 1e-13);
        }
    }

    #[test]
    fn uniqueness_probe_zero_data() {
        let fam = scalar_family(|t| 1.0 + t.powf(0.75), 12);
        let p = NacpProblem::with_constant_f(fam, v1(0.0), v1(0.0), 2.0).unwrap();
        let r = solve_at(&p, Strategy::DirectBlock).unwrap();
        for ui in &r.u {
            assert!(ui[0].abs() <= 1e-14);
        }
        assert!(r.c_mr.is_none(), "c_mr must be the undefined flag");
    }

    #[test]
    fn defect_identity_on_grid() {
        let fam = scalar_family(|t| 1.0 + 0.7 * t.powf(0.6), 24);
        let p = NacpProblem::with_constant_f(fam, v1(0.8), v1(0.5), 2.0).unwrap();
        let r = solve_at(&p, Strategy::DirectBlock).unwrap();
        for i in 1..=24 {
            let res = r.udot[i][0] + r.au[i][0] - 0.5;
            assert!(res.abs() <= 1e-12);
        }
        assert_eq!(r.u[0][0], 0.8);
    }

    #[test]
    fn causality_of_solution() {
        // truncating f after cell k leaves u unchanged on nodes 0..k
        let fam = scalar_family(|t| 1.0 + t, 10);
        let f_full: Vec<DVector<f64>> = (0..10).map(|j| v1(1.0 + j as f64)).collect();
        let mut f_trunc = f_full.clone();
        for fj in f_trunc.iter_mut().skip(6) {
            *fj = v1(0.0);
        }
        let p1 = NacpProblem::new(fam.clone(), v1(0.3), f_full, 2.0).unwrap();
        let p2 = NacpProblem::new(fam, v1(0.3), f_trunc, 2.0).unwrap();
        let r1 = solve_at(&p1, Strategy::DirectBlock).unwrap();
        let r2 = solve_at(&p2, Strategy::DirectBlock).unwrap();
        for i in 0..=6 {
            assert_eq!(r1.u[i][0], r2.u[i][0], "node {i}");
        }
    }

    #[test]
    fn neumann_matches_direct() {
        let fam = scalar_family(|t| 1.0 + 2.0 * t.powf(0.75), 20);
        let p = NacpProblem::with_constant_f(fam, v1(1.0), v1(0.7), 2.0).unwrap();
        let direct = solve_at(&p, Strategy::DirectBlock).unwrap();
        let neumann = solve_at(
            &p,
            Strategy::Neumann {
                max_iter: 200,
                tol: 1e-14,
            },
        )
        .unwrap();
        assert!(neumann.neumann_iters > 0);
        for i in 0..=20 {
            assert_relative_eq!(direct.u[i][0], neumann.u[i][0], max_relative = 1e-10);
        }
    }

    #[test]
    fn cn_scalar_analytic() {
        let fam = scalar_family(|_| 1.0, 100);
        let p = NacpProblem::with_constant_f(fam, v1(1.0), v1(0.0), 2.0).unwrap();
        let u = cn_oracle(&p, 10).unwrap();
        assert_relative_eq!(u[100][0], (-1.0f64).exp(), max_relative = 1e-6);
    }

    #[test]
    fn cn_second_order() {
        // refine doubling reduces the error ~4x on a smooth scalar problem
        let fam = scalar_family(|t| 1.0 + t, 4);
        let p = NacpProblem::with_constant_f(fam, v1(1.0), v1(0.0), 2.0).unwrap();
        let uref = cn_oracle(&p, 4096).unwrap()[4][0];
        let e1 = (cn_oracle(&p, 8).unwrap()[4][0] - uref).abs();
        let e2 = (cn_oracle(&p, 16).unwrap()[4][0] - uref).abs();
        let e3 = (cn_oracle(&p, 32).unwrap()[4][0] - uref).abs();
        assert!(e2 < e1 / 3.0, "e1={e1:.3e} e2={e2:.3e}");
        assert!(e3 < e2 / 3.0, "e2={e2:.3e} e3={e3:.3e}");
    }

    #[test]
    fn cn_autonomous_diag_decouples() {
        let grid = time_grid(1.0, 8, 1.0);
        let mats: Vec<DMatrix<f64>> = (0..=8)
            .map(|_| DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0])))
            .collect();
        let fam =
            OperatorFamily::from_matrices(grid, mats, DVector::from_element(2, 1.0), 2.0).unwrap();
        let p = NacpProblem::with_constant_f(
            fam,
            DVector::from_vec(vec![1.0, 1.0]),
            DVector::zeros(2),
            2.0,
        )
        .unwrap();
        let u = cn_oracle(&p, 4).unwrap();
        for (a, comp) in [(1.0, 0usize), (2.0, 1usize)] {
            let sfam = scalar_family(|_| a, 8);
            let sp = NacpProblem::with_constant_f(sfam, v1(1.0), v1(0.0), 2.0).unwrap();
            let su = cn_oracle(&sp, 4).unwrap();
            for i in 0..=8 {
                assert_relative_eq!(u[i][comp], su[i][0], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn mixed_norm_examples() {
        let fam = scalar_family(|_| 1.0, 10);
        let traj: Trajectory = (0..=10).map(|_| v1(2.0)).collect();
        for q in [1.0, 2.0, 4.0] {
            assert_relative_eq!(mixed_norm(&fam, q, &traj).unwrap(), 2.0, max_relative = 1e-12);
        }
        let z: Trajectory = (0..=10).map(|_| v1(0.0)).collect();
        assert_eq!(mixed_norm(&fam, 2.0, &z).unwrap(), 0.0);
        // v = 1 on [0, 0.5], 0 after: q = 2 -> sqrt(0.5)
        let step: Trajectory = (0..=10)
            .map(|i| v1(if i as f64 / 10.0 <= 0.5 { 1.0 } else { 0.0 }))
            .collect();
        assert_relative_eq!(
            mixed_norm(&fam, 2.0, &step).unwrap(),
            0.5f64.sqrt(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn mr_constant_scaling_invariance() {
        let fam = scalar_family(|t| 1.0 + 0.5 * t, 16);
        let p1 = NacpProblem::with_constant_f(fam.clone(), v1(0.0), v1(1.0), 2.0).unwrap();
        let p2 = NacpProblem::with_constant_f(fam, v1(0.0), v1(2.0), 2.0).unwrap();
        let c1 = solve_at(&p1, Strategy::DirectBlock).unwrap().c_mr.unwrap();
        let c2 = solve_at(&p2, Strategy::DirectBlock).unwrap().c_mr.unwrap();
        assert_relative_eq!(c1, c2, max_relative = 1e-10);
    }

    #[test]
    fn mr_constant_scalar_symbolic_oracle() {
        // A = 1, f = 1, u0 = 0, p = q = 2: u = 1 - e^{-t}, udot = e^{-t};
        // compare against the same right-endpoint sums of the closed forms
        let m = 64;
        let fam = scalar_family(|_| 1.0, m);
        let p = NacpProblem::with_constant_f(fam.clone(), v1(0.0), v1(1.0), 2.0).unwrap();
        let r = solve_at(&p, Strategy::DirectBlock).unwrap();
        let dt = 1.0 / m as f64;
        let mut sum_udot = 0.0;
        let mut sum_au = 0.0;
        for i in 1..=m {
            let t = i as f64 * dt;
            sum_udot += dt * (-t).exp().powi(2);
            sum_au += dt * (1.0 - (-t).exp()).powi(2);
        }
        let oracle = sum_udot.sqrt() + sum_au.sqrt();
        assert_relative_eq!(r.c_mr.unwrap(), oracle, max_relative = 1e-9);
        // and the continuum integrals are close at this resolution
        let cont = ((1.0 - (-2.0f64).exp()) / 2.0).sqrt()
            + (1.0 - 2.0 * (1.0 - (-1.0f64).exp()) + (1.0 - (-2.0f64).exp()) / 2.0).sqrt();
        assert!((r.c_mr.unwrap() - cont).abs() < 0.02);
    }

    #[test]
    fn shift_relation_scalar() {
        // symbolic identity: with f~(s) = e^{mu s} f(s) the shifted solution is
        // e^{-mu t} u(t); checked in closed form, then on the solver for the
        // homogeneous autonomous case where the representation is exact
        let mu = 1.5;
        for &t in &[0.25, 0.5, 1.0] {
            let u = (-t).exp() * 0.3 + (1.0 - (-t).exp());
            let quad = (0..4000)
                .map(|k| {
                    let s = t * (k as f64 + 0.5) / 4000.0;
                    (-(t - s) * (1.0 + mu)).exp() * (mu * s).exp() * (t / 4000.0)
                })
                .sum::<f64>();
            let u_shift = quad + (-t * (1.0 + mu)).exp() * 0.3;
            assert_relative_eq!(u_shift, (-mu * t).exp() * u, max_relative = 1e-6);
        }
        let m = 8;
        let fam = scalar_family(|_| 1.0, m);
        let fam_mu = fam.with_shift(mu);
        let p = NacpProblem::with_constant_f(fam, v1(1.0), v1(0.0), 2.0).unwrap();
        let pm = NacpProblem::with_constant_f(fam_mu, v1(1.0), v1(0.0), 2.0).unwrap();
        let r = solve_at(&p, Strategy::DirectBlock).unwrap();
        let rm = solve_at(&pm, Strategy::DirectBlock).unwrap();
        for i in 0..=m {
            let t = i as f64 / m as f64;
            assert_relative_eq!(rm.u[i][0], (-mu * t).exp() * r.u[i][0], max_relative = 1e-10);
        }
    }
}
