//! Weighted discrete `L^p` spaces and certified operator norms.
//!
//! A [`WeightedSpace`] is the triple (n, w, p): vectors of length n measured by
//! `||v|| = (sum_i w_i |v_i|^p)^{1/p}` with `||v|| = max_i |v_i|` for p = infinity.
//! The pairing `<u, v> = sum_i w_i u_i v_i` identifies the dual with the same
//! weights and the conjugate exponent.
//!
//! Induced operator norms are exact for p in {1, 2, inf} (column sums, SVD, row
//! sums). For other p they are reported as a certified interval: a lower bound
//! from Boyd's fixed-point iteration on the duality map and an upper bound by
//! Riesz-Thorin interpolation between the exact p = 1 and p = inf norms.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A two-sided bound on an operator norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifiedNorm {
    pub lower: f64,
    pub upper: f64,
}

impl CertifiedNorm {
    fn exact(v: f64) -> Self {
        CertifiedNorm { lower: v, upper: v }
    }
}

/// Discrete weighted `l^p` space.
#[derive(Debug, Clone)]
pub struct WeightedSpace {
    weights: DVector<f64>,
    p: f64,
}

impl WeightedSpace {
    pub fn new(weights: DVector<f64>, p: f64) -> Result<Self> {
        if !(p >= 1.0) {
            return Err(Error::InvalidArg(format!("exponent p = {p} must be >= 1")));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidArg("weights must be strictly positive".into()));
        }
        Ok(WeightedSpace { weights, p })
    }

    /// Unit weights.
    pub fn uniform(n: usize, p: f64) -> Self {
        WeightedSpace::new(DVector::from_element(n, 1.0), p).expect("uniform weights are valid")
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.len() == 0
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn with_exponent(&self, p: f64) -> Result<Self> {
        WeightedSpace::new(self.weights.clone(), p)
    }

    /// Dual space: conjugate exponent, same weights.
    pub fn dual(&self) -> Self {
        let q = if self.p.is_infinite() {
            1.0
        } else if self.p == 1.0 {
            f64::INFINITY
        } else {
            self.p / (self.p - 1.0)
        };
        WeightedSpace {
            weights: self.weights.clone(),
            p: q,
        }
    }

    /// `<u, v> = sum_i w_i u_i v_i`.
    pub fn pairing(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        self.weights
            .iter()
            .zip(u.iter())
            .zip(v.iter())
            .map(|((&w, &a), &b)| w * a * b)
            .sum()
    }

    pub fn norm(&self, v: &DVector<f64>) -> f64 {
        lp_norm(&self.weights, self.p, v.as_slice())
    }

    pub fn norm_c(&self, v: &DVector<Complex64>) -> f64 {
        lp_norm_c(&self.weights, self.p, v.as_slice())
    }

    /// Certified induced norm of a real matrix on this space.
    pub fn op_norm(&self, m: &DMatrix<f64>) -> Result<CertifiedNorm> {
        let mc = m.map(|x| Complex64::new(x, 0.0));
        self.op_norm_c(&mc)
    }

    /// Certified induced norm of a complex matrix on this space.
    pub fn op_norm_c(&self, m: &DMatrix<Complex64>) -> Result<CertifiedNorm> {
        let n = self.len();
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::Shape(format!(
                "matrix is {}x{}, space has dimension {}",
                m.nrows(),
                m.ncols(),
                n
            )));
        }
        if n == 0 {
            return Ok(CertifiedNorm::exact(0.0));
        }
        let n1 = self.norm_p1(m);
        let ninf = self.norm_pinf(m);
        if self.p == 1.0 {
            return Ok(CertifiedNorm::exact(n1));
        }
        if self.p.is_infinite() {
            return Ok(CertifiedNorm::exact(ninf));
        }
        if self.p == 2.0 {
            // exact up to SVD accuracy: ||M||_{2,w} = sigma_max(W^{1/2} M W^{-1/2})
            let d: DVector<f64> = self.weights.map(|w| w.sqrt());
            let mut s = m.clone();
            for i in 0..n {
                for j in 0..n {
                    s[(i, j)] *= Complex64::new(d[i] / d[j], 0.0);
                }
            }
            let sv = s
                .try_svd(false, false, f64::EPSILON * 16.0, 100_000)
                .ok_or(Error::EigFailed)?;
            let sigma = sv.singular_values.max();
            return Ok(CertifiedNorm::exact(sigma));
        }
        // general p: Boyd lower bound, Riesz-Thorin upper bound
        let lower = self.boyd_lower(m, 20);
        let upper = n1.powf(1.0 / self.p) * ninf.powf(1.0 - 1.0 / self.p);
        Ok(CertifiedNorm {
            lower: lower.min(upper),
            upper,
        })
    }

    /// Exact norm on weighted l^1: max_j w_j^{-1} sum_i w_i |m_ij|.
    fn norm_p1(&self, m: &DMatrix<Complex64>) -> f64 {
        let n = self.len();
        (0..n)
            .map(|j| {
                (0..n)
                    .map(|i| self.weights[i] * m[(i, j)].norm())
                    .sum::<f64>()
                    / self.weights[j]
            })
            .fold(0.0, f64::max)
    }

    /// Exact norm on l^inf (weights drop out): max row absolute sum.
    fn norm_pinf(&self, m: &DMatrix<Complex64>) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| (0..n).map(|j| m[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Boyd power iteration on the p-norm duality map; returns the best ratio
    /// seen over `restarts` starting vectors. Always a valid lower bound.
    fn boyd_lower(&self, m: &DMatrix<Complex64>, restarts: usize) -> f64 {
        let n = self.len();
        let p = self.p;
        let q = p / (p - 1.0);
        let madj = self.adjoint_c(m);
        let mut rng = ChaCha8Rng::seed_from_u64(0x9e3779b97f4a7c15);
        let mut best: f64 = 0.0;
        for r in 0..restarts {
            let mut x: DVector<Complex64> = if r == 0 {
                DVector::from_element(n, Complex64::new(1.0, 0.0))
            } else if r == 1 {
                DVector::from_fn(n, |i, _| Complex64::new(1.0 / (1.0 + i as f64), 0.0))
            } else {
                DVector::from_fn(n, |_, _| {
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                })
            };
            let nx = self.norm_c(&x);
            if nx == 0.0 {
                continue;
            }
            x /= Complex64::new(nx, 0.0);
            let mut last = 0.0;
            for _ in 0..60 {
                let y = m * &x;
                let ny = self.norm_c(&y);
                best = best.max(ny);
                if ny == 0.0 {
                    break;
                }
                let z = dual_map(&y, p, ny);
                let w = &madj * &z;
                let nw = lp_norm_c(&self.weights, q, w.as_slice());
                if nw <= last * (1.0 + 1e-12) {
                    break;
                }
                last = nw;
                x = dual_map(&w, q, nw);
                let nx = self.norm_c(&x);
                if nx == 0.0 {
                    break;
                }
                x /= Complex64::new(nx, 0.0);
            }
        }
        best
    }

    /// Adjoint with respect to the weighted pairing: `W^{-1} M^T W` (transpose,
    /// not conjugate: the pairing is bilinear).
    pub fn adjoint(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| m[(j, i)] * self.weights[j] / self.weights[i])
    }

    fn adjoint_c(&self, m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| {
            m[(j, i)].conj() * self.weights[j] / self.weights[i]
        })
    }
}

/// `(sum_i w_i |v_i|^p)^{1/p}`, with the max for p = infinity.
pub fn lp_norm(weights: &DVector<f64>, p: f64, v: &[f64]) -> f64 {
    assert_eq!(weights.len(), v.len(), "weight/vector length mismatch");
    if p.is_infinite() {
        return v.iter().fold(0.0, |a, &x| a.max(x.abs()));
    }
    let scale = v.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let sum: f64 = weights
        .iter()
        .zip(v.iter())
        .map(|(&w, &x)| w * (x.abs() / scale).powf(p))
        .sum();
    scale * sum.powf(1.0 / p)
}

pub fn lp_norm_c(weights: &DVector<f64>, p: f64, v: &[Complex64]) -> f64 {
    assert_eq!(weights.len(), v.len(), "weight/vector length mismatch");
    if p.is_infinite() {
        return v.iter().fold(0.0, |a, x| a.max(x.norm()));
    }
    let scale = v.iter().fold(0.0_f64, |a, x| a.max(x.norm()));
    if scale == 0.0 {
        return 0.0;
    }
    let sum: f64 = weights
        .iter()
        .zip(v.iter())
        .map(|(&w, x)| w * (x.norm() / scale).powf(p))
        .sum();
    scale * sum.powf(1.0 / p)
}

/// Normalized duality map for the p-norm: `z_i = phase(y_i) (|y_i|/||y||)^{p-1}`.
fn dual_map(y: &DVector<Complex64>, p: f64, ny: f64) -> DVector<Complex64> {
    y.map(|yi| {
        let r = yi.norm();
        if r == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            (yi / r) * (r / ny).powf(p - 1.0)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lp_norm_examples() {
        let w = DVector::from_vec(vec![1.0]);
        assert_relative_eq!(lp_norm(&w, 2.0, &[3.0]), 3.0);
        let w = DVector::from_vec(vec![0.5, 0.5]);
        assert_relative_eq!(lp_norm(&w, 2.0, &[1.0, 1.0]), 1.0);
        let expect = 2.0 * 0.5_f64.powf(0.25);
        assert_relative_eq!(lp_norm(&w, 4.0, &[2.0, 0.0]), expect, max_relative = 1e-14);
        assert_relative_eq!(lp_norm(&w, f64::INFINITY, &[2.0, -3.0]), 3.0);
    }

    #[test]
    fn lp_norm_homogeneous() {
        let w = DVector::from_vec(vec![0.3, 0.5, 0.2]);
        let v = [1.0, -2.0, 0.7];
        let v2: Vec<f64> = v.iter().map(|x| 3.5 * x).collect();
        assert_relative_eq!(
            lp_norm(&w, 3.0, &v2),
            3.5 * lp_norm(&w, 3.0, &v),
            max_relative = 1e-14
        );
    }

    #[test]
    fn dual_exponent() {
        let s = WeightedSpace::uniform(4, 4.0);
        assert_relative_eq!(s.dual().p(), 4.0 / 3.0);
        let s1 = WeightedSpace::uniform(4, 1.0);
        assert!(s1.dual().p().is_infinite());
    }

    #[test]
    fn adjoint_weighted_example() {
        // A = [[1,2],[3,4]], w = (1,2) -> W^{-1} A^T W = [[1,6],[1,4]]
        let s = WeightedSpace::new(DVector::from_vec(vec![1.0, 2.0]), 2.0).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let adj = s.adjoint(&a);
        let expect = DMatrix::from_row_slice(2, 2, &[1.0, 6.0, 1.0, 4.0]);
        assert_relative_eq!((adj - expect).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn adjoint_pairing_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = 5;
            let w = DVector::from_fn(n, |_, _| rng.gen_range(0.1..3.0));
            let s = WeightedSpace::new(w, 2.0).unwrap();
            let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let u = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let lhs = s.pairing(&(&a * &u), &v);
            let rhs = s.pairing(&u, &(s.adjoint(&a) * &v));
            assert_relative_eq!(lhs, rhs, epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn adjoint_plain_transpose_when_unweighted() {
        let s = WeightedSpace::uniform(3, 2.0);
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        assert_eq!(s.adjoint(&a), a.transpose());
        // involution is exact for unit weights
        assert_eq!(s.adjoint(&s.adjoint(&a)), a);
    }

    #[test]
    fn symmetric_selfadjoint_unweighted() {
        let s = WeightedSpace::uniform(3, 2.0);
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 1.0]);
        assert_eq!(s.adjoint(&a), a);
    }

    #[test]
    fn op_norms_diagonal() {
        let s = WeightedSpace::uniform(3, 2.0);
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -4.0, 2.0]));
        let nrm = s.op_norm(&m).unwrap();
        assert_relative_eq!(nrm.lower, 4.0, max_relative = 1e-10);
        for p in [1.0, 1.5, 3.0, f64::INFINITY] {
            let sp = s.with_exponent(p).unwrap();
            let nrm = sp.op_norm(&m).unwrap();
            // diagonal matrices have p-independent induced norm = max |d_i|
            assert!(nrm.lower <= 4.0 + 1e-10 && nrm.upper >= 4.0 - 1e-10);
            assert!(nrm.lower >= 4.0 * 0.999, "p={p}: lower {}", nrm.lower);
        }
    }

    #[test]
    fn boyd_bounds_bracket_exact_p2() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let n = 6;
            let w = DVector::from_fn(n, |_, _| rng.gen_range(0.2..2.0));
            let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let s2 = WeightedSpace::new(w.clone(), 2.0).unwrap();
            let exact = s2.op_norm(&a).unwrap().lower;
            let sp = WeightedSpace::new(w, 2.0 + 1e-9).unwrap();
            let b = sp.op_norm(&a).unwrap();
            assert!(b.lower <= exact * (1.0 + 1e-6));
            assert!(b.upper >= exact * (1.0 - 1e-6));
            assert!(b.lower >= exact * 0.95, "boyd too loose: {} vs {}", b.lower, exact);
        }
    }
}
