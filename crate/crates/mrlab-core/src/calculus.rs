//! Dense-matrix sectorial calculus: spectra, resolvents, sector verification,
//! matrix exponentials, fractional and imaginary powers, fractional-power
//! scale norms, and discrete real-interpolation norms built from a
//! resolvent-quasi-minimizer K-functional.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::linear_fit;
use crate::space::WeightedSpace;

pub fn complexify(a: &DMatrix<f64>) -> DMatrix<Complex64> {
    a.map(|x| Complex64::new(x, 0.0))
}

/// Eigenvalues of a real matrix to backward-stable accuracy.
pub fn spectrum(a: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    let schur = nalgebra::linalg::Schur::try_new(complexify(a), f64::EPSILON * 16.0, 100_000)
        .ok_or(Error::EigFailed)?;
    let (_, t) = schur.unpack();
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

pub fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    Ok(spectrum(a)?.iter().fold(0.0, |m, z| m.max(z.norm())))
}

/// `(lambda - A)^{-1}` with a near-singularity guard.
pub fn resolvent(a: &DMatrix<f64>, lambda: Complex64) -> Result<DMatrix<Complex64>> {
    let n = a.nrows();
    let shifted = DMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { lambda } else { Complex64::new(0.0, 0.0) };
        d - Complex64::new(a[(i, j)], 0.0)
    });
    let scale = a.norm().max(lambda.norm()).max(1e-300);
    let lu = shifted.lu();
    let min_pivot = (0..n)
        .map(|i| lu.u()[(i, i)].norm())
        .fold(f64::INFINITY, f64::min);
    if min_pivot <= 1e-14 * scale {
        return Err(Error::NearSingular {
            lambda,
            margin: min_pivot / scale,
        });
    }
    lu.try_inverse().ok_or(Error::NearSingular {
        lambda,
        margin: 0.0,
    })
}

pub fn lu_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let scale = a.norm().max(1e-300);
    let lu = a.clone().lu();
    let min_pivot = (0..a.nrows())
        .map(|i| lu.u()[(i, i)].abs())
        .fold(f64::INFINITY, f64::min);
    if min_pivot <= 1e-14 * scale {
        return Err(Error::SingularNode);
    }
    lu.try_inverse().ok_or(Error::SingularNode)
}

// ---------------------------------------------------------------------------
// sector verification
// ---------------------------------------------------------------------------

/// Sampling specification for resolvent scans outside a sector.
#[derive(Debug, Clone)]
pub struct LambdaGrid {
    /// Rays are placed at `+/-(phi + angle_margin)` plus the negative reals.
    pub angle_margin: f64,
    pub points_per_decade: usize,
    /// Radii span `[lo_factor * min|spec|, hi_factor * max|spec|]`.
    pub lo_factor: f64,
    pub hi_factor: f64,
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid {
            angle_margin: 0.05,
            points_per_decade: 8,
            lo_factor: 1e-3,
            hi_factor: 1e3,
        }
    }
}

impl LambdaGrid {
    /// Concrete sample points for a spectrum inside the sector of half-angle
    /// `phi`: log-spaced radii on both boundary rays of the slightly larger
    /// sector and on the negative real axis.
    pub fn samples(&self, spectrum: &[Complex64], phi: f64) -> Vec<Complex64> {
        let rmin = spectrum.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        let rmax = spectrum.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let lo = (self.lo_factor * rmin).max(1e-300);
        let hi = (self.hi_factor * rmax).max(lo * 10.0);
        let decades = (hi / lo).log10();
        let count = ((decades * self.points_per_decade as f64).ceil() as usize).max(2);
        let angles = [phi + self.angle_margin, -(phi + self.angle_margin), std::f64::consts::PI];
        let mut out = Vec::with_capacity(3 * (count + 1));
        for k in 0..=count {
            let r = lo * (hi / lo).powf(k as f64 / count as f64);
            for &ang in &angles {
                out.push(Complex64::from_polar(r, ang));
            }
        }
        out
    }
}

/// Result of a sectoriality scan.
#[derive(Debug, Clone)]
pub struct SectorReport {
    pub phi: f64,
    /// Sampled sup of the certified lower bounds of `||lambda R(lambda, A)||`.
    pub constant: f64,
    /// Matching sup of certified upper bounds.
    pub constant_upper: f64,
    /// Sampled sup for `||(1 + |lambda|) R(lambda, A)||`.
    pub constant_one_plus: f64,
    /// Distance from the spectrum to the complement of the sector.
    pub spectrum_margin: f64,
    pub samples: usize,
}

/// Distance from a point inside the sector to its boundary.
fn sector_margin(z: Complex64, phi: f64) -> f64 {
    let arg = z.arg().abs();
    if z.norm() == 0.0 || arg >= phi {
        return 0.0;
    }
    let to_ray = if phi - arg < std::f64::consts::FRAC_PI_2 {
        z.norm() * (phi - arg).sin()
    } else {
        z.norm()
    };
    to_ray.min(z.norm())
}

/// Verify that the spectrum lies strictly inside the sector of half-angle
/// `phi` and scan `||lambda R(lambda, A)||` over the sampling grid.
pub fn sector_verify(
    a: &DMatrix<f64>,
    space: &WeightedSpace,
    phi: f64,
    grid: &LambdaGrid,
) -> Result<SectorReport> {
    let spec = spectrum(a)?;
    let mut margin = f64::INFINITY;
    for &z in &spec {
        let m = sector_margin(z, phi);
        if m <= 0.0 {
            return Err(Error::NotSectorial { phi, lambda: z });
        }
        margin = margin.min(m);
    }
    let lambdas = grid.samples(&spec, phi);
    let mut sup_lower: f64 = 0.0;
    let mut sup_upper: f64 = 0.0;
    let mut sup_one_plus: f64 = 0.0;
    for &lam in &lambdas {
        let r = resolvent(a, lam)?;
        let nrm = space.op_norm_c(&r)?;
        sup_lower = sup_lower.max(lam.norm() * nrm.lower);
        sup_upper = sup_upper.max(lam.norm() * nrm.upper);
        sup_one_plus = sup_one_plus.max((1.0 + lam.norm()) * nrm.lower);
    }
    Ok(SectorReport {
        phi,
        constant: sup_lower,
        constant_upper: sup_upper,
        constant_one_plus: sup_one_plus,
        spectrum_margin: margin,
        samples: lambdas.len(),
    })
}

// ---------------------------------------------------------------------------
// matrix exponential: scaling and squaring with Pade degree chosen by norm
// ---------------------------------------------------------------------------

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539398330063230e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

fn pade_coeffs(m: usize) -> &'static [f64] {
    match m {
        3 => &[120.0, 60.0, 12.0, 1.0],
        5 => &[30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0],
        7 => &[
            17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
        ],
        9 => &[
            17643225600.0,
            8821612800.0,
            2075673600.0,
            302702400.0,
            30270240.0,
            2162160.0,
            110880.0,
            3960.0,
            90.0,
            1.0,
        ],
        13 => &[
            64764752532480000.0,
            32382376266240000.0,
            7771770303897600.0,
            1187353796428800.0,
            129060195264000.0,
            10559470521600.0,
            670442572800.0,
            33522128640.0,
            1323241920.0,
            40840800.0,
            960960.0,
            16380.0,
            182.0,
            1.0,
        ],
        _ => unreachable!(),
    }
}

fn norm_1(a: &DMatrix<f64>) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn pade_exp(b: &DMatrix<f64>, m: usize) -> Result<DMatrix<f64>> {
    let n = b.nrows();
    let c = pade_coeffs(m);
    let b2 = b * b;
    let eye = DMatrix::<f64>::identity(n, n);
    let (u, v) = if m <= 9 {
        let mut pow = eye.clone(); // B^{2k}
        let mut u_sum = &eye * c[1];
        let mut v_sum = &eye * c[0];
        let mut k = 2;
        while k <= m {
            pow = &pow * &b2;
            v_sum += &pow * c[k];
            if k + 1 <= m {
                u_sum += &pow * c[k + 1];
            }
            k += 2;
        }
        (b * u_sum, v_sum)
    } else {
        let b4 = &b2 * &b2;
        let b6 = &b2 * &b4;
        let u_hi = &b6 * (&b6 * c[13] + &b4 * c[11] + &b2 * c[9]);
        let u_lo = &b6 * c[7] + &b4 * c[5] + &b2 * c[3] + &eye * c[1];
        let v_hi = &b6 * (&b6 * c[12] + &b4 * c[10] + &b2 * c[8]);
        let v_lo = &b6 * c[6] + &b4 * c[4] + &b2 * c[2] + &eye * c[0];
        (b * (u_hi + u_lo), v_hi + v_lo)
    };
    let lhs = &v - &u;
    let rhs = &v + &u;
    lhs.lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("Pade denominator is singular".into()))
}

/// `e^{-sA}` via scaling and squaring with the Pade degree chosen by norm.
pub fn mat_exp(a: &DMatrix<f64>, s: f64) -> Result<DMatrix<f64>> {
    if s < 0.0 {
        return Err(Error::InvalidArg(format!("semigroup parameter s = {s} < 0")));
    }
    let n = a.nrows();
    if s == 0.0 {
        return Ok(DMatrix::identity(n, n));
    }
    let b = a * (-s);
    let nb = norm_1(&b);
    if !nb.is_finite() || nb > 1e9 {
        return Err(Error::ExpOverflow(nb));
    }
    for (theta, m) in [(THETA_3, 3), (THETA_5, 5), (THETA_7, 7), (THETA_9, 9)] {
        if nb <= theta {
            return pade_exp(&b, m);
        }
    }
    let squarings = ((nb / THETA_13).log2().ceil() as i32).max(0);
    let scaled = &b * 2f64.powi(-squarings);
    let mut e = pade_exp(&scaled, 13)?;
    for _ in 0..squarings {
        e = &e * &e;
    }
    Ok(e)
}

// ---------------------------------------------------------------------------
// fractional powers: complex Schur + blocked Parlett recurrence
// ---------------------------------------------------------------------------

/// Result of a complex matrix-function evaluation; `warning` flags
/// ill-conditioned eigenvalue clusters.
#[derive(Debug, Clone)]
pub struct MatrixFunction {
    pub matrix: DMatrix<Complex64>,
    pub warning: Option<String>,
}

/// Real counterpart of [`MatrixFunction`].
#[derive(Debug, Clone)]
pub struct RealMatrixFunction {
    pub matrix: DMatrix<f64>,
    pub warning: Option<String>,
}

/// Relative gap below which eigenvalues are grouped into one Parlett block.
const CLUSTER_TOL: f64 = 0.1;

/// `A^theta` on the principal branch, for `Re theta` in `[-1, 1]`.
///
/// Complex Schur factorization, reordering of the triangular factor into
/// eigenvalue clusters, binomial series on the diagonal blocks and the
/// Parlett recurrence (triangular Sylvester solves) off the diagonal.
pub fn frac_power(a: &DMatrix<f64>, theta: Complex64) -> Result<MatrixFunction> {
    if theta.re.abs() > 1.0 + 1e-12 {
        return Err(Error::InvalidArg(format!(
            "Re theta = {} outside [-1, 1]",
            theta.re
        )));
    }
    let n = a.nrows();
    if theta.norm() == 0.0 {
        return Ok(MatrixFunction {
            matrix: DMatrix::identity(n, n),
            warning: None,
        });
    }
    let schur = nalgebra::linalg::Schur::try_new(complexify(a), f64::EPSILON * 16.0, 100_000)
        .ok_or(Error::EigFailed)?;
    let (mut q, mut t) = schur.unpack();
    let scale = (0..n).map(|i| t[(i, i)].norm()).fold(0.0, f64::max);
    for i in 0..n {
        let lam = t[(i, i)];
        if lam.norm() <= 1e-14 * scale.max(1e-300) {
            return Err(Error::BranchCut { lambda: lam });
        }
        if lam.re < 0.0 && lam.im.abs() <= 1e-8 * lam.norm() {
            return Err(Error::BranchCut { lambda: lam });
        }
    }
    let clusters = cluster_diagonal(&t);
    reorder_schur(&mut q, &mut t, &clusters);
    let mut blocks = Vec::new();
    {
        let mut i = 0;
        for sz in ordered_cluster_sizes(&clusters) {
            blocks.push((i, sz));
            i += sz;
        }
    }
    let mut warning = None;
    let mut f = DMatrix::<Complex64>::zeros(n, n);
    for &(start, sz) in &blocks {
        let tb = t.view((start, start), (sz, sz)).into_owned();
        let (fb, warn) = power_of_block(&tb, theta);
        if warning.is_none() {
            warning = warn;
        }
        f.view_mut((start, start), (sz, sz)).copy_from(&fb);
    }
    for sep in 1..blocks.len() {
        for bi in 0..blocks.len() - sep {
            let bj = bi + sep;
            let (i0, isz) = blocks[bi];
            let (j0, jsz) = blocks[bj];
            let tii = t.view((i0, i0), (isz, isz)).into_owned();
            let tjj = t.view((j0, j0), (jsz, jsz)).into_owned();
            let tij = t.view((i0, j0), (isz, jsz)).into_owned();
            let fii = f.view((i0, i0), (isz, isz)).into_owned();
            let fjj = f.view((j0, j0), (jsz, jsz)).into_owned();
            let mut c = &fii * &tij - &tij * &fjj;
            for (bk, &(k0, ksz)) in blocks.iter().enumerate().take(bj).skip(bi + 1) {
                let _ = bk;
                let fik = f.view((i0, k0), (isz, ksz)).into_owned();
                let tkj = t.view((k0, j0), (ksz, jsz)).into_owned();
                let tik = t.view((i0, k0), (isz, ksz)).into_owned();
                let fkj = f.view((k0, j0), (ksz, jsz)).into_owned();
                c += &fik * &tkj - &tik * &fkj;
            }
            let (fij, warn) = triangular_sylvester(&tii, &tjj, &c);
            if warning.is_none() {
                warning = warn;
            }
            f.view_mut((i0, j0), (isz, jsz)).copy_from(&fij);
        }
    }
    let result = &q * f * q.adjoint();
    Ok(MatrixFunction {
        matrix: result,
        warning,
    })
}

/// Real-valued fractional power `A^alpha`; errors when a genuinely complex
/// result appears (real matrices have conjugate-symmetric spectra, so real
/// exponents give real powers up to roundoff).
pub fn frac_power_real(a: &DMatrix<f64>, alpha: f64) -> Result<RealMatrixFunction> {
    let f = frac_power(a, Complex64::new(alpha, 0.0))?;
    let imag_norm = f.matrix.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let scale = f.matrix.norm().max(1e-300);
    if imag_norm > 1e-7 * scale {
        return Err(Error::Numerical(format!(
            "imaginary residue {imag_norm:.3e} in a real fractional power"
        )));
    }
    Ok(RealMatrixFunction {
        matrix: f.matrix.map(|z| z.re),
        warning: f.warning,
    })
}

fn cluster_diagonal(t: &DMatrix<Complex64>) -> Vec<usize> {
    let n = t.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let r = find(parent, parent[i]);
            parent[i] = r;
        }
        parent[i]
    }
    for i in 0..n {
        for j in i + 1..n {
            let (li, lj) = (t[(i, i)], t[(j, j)]);
            let gap = (li - lj).norm();
            if gap <= CLUSTER_TOL * li.norm().max(lj.norm()).max(1e-300) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let mut out = vec![0usize; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if label[r] == usize::MAX {
            label[r] = next;
            next += 1;
        }
        out[i] = label[r];
    }
    out
}

/// Cluster sizes in order of first appearance along the diagonal.
fn ordered_cluster_sizes(clusters: &[usize]) -> Vec<usize> {
    let mut seen: Vec<usize> = Vec::new();
    for &c in clusters {
        if !seen.contains(&c) {
            seen.push(c);
        }
    }
    seen.iter()
        .map(|&c| clusters.iter().filter(|&&x| x == c).count())
        .collect()
}

/// Reorder the Schur form so that equal cluster labels become contiguous (in
/// order of first appearance), by adjacent unitary swaps.
fn reorder_schur(q: &mut DMatrix<Complex64>, t: &mut DMatrix<Complex64>, clusters: &[usize]) {
    let n = t.nrows();
    let mut labels = clusters.to_vec();
    let mut target = 0usize;
    let order: Vec<usize> = {
        let mut seen = Vec::new();
        for &c in clusters {
            if !seen.contains(&c) {
                seen.push(c);
            }
        }
        seen
    };
    for &cl in &order {
        let count = labels.iter().filter(|&&c| c == cl).count();
        for _ in 0..count {
            let pos = (target..n).find(|&i| labels[i] == cl).unwrap();
            for k in (target..pos).rev() {
                swap_adjacent(q, t, k);
                labels.swap(k, k + 1);
            }
            target += 1;
        }
    }
}

/// Unitary similarity swapping the diagonal entries t_kk and t_{k+1,k+1}.
fn swap_adjacent(q: &mut DMatrix<Complex64>, t: &mut DMatrix<Complex64>, k: usize) {
    let n = t.nrows();
    let t11 = t[(k, k)];
    let t12 = t[(k, k + 1)];
    let t22 = t[(k + 1, k + 1)];
    let v1 = t12;
    let v2 = t22 - t11;
    let r = (v1.norm_sqr() + v2.norm_sqr()).sqrt();
    if r <= 1e-300 {
        return; // equal eigenvalues with no coupling: nothing to do
    }
    // unitary G whose first column is the t22-eigenvector (v1, v2)/r
    let g11 = v1 / r;
    let g21 = v2 / r;
    let g12 = -g21.conj();
    let g22 = g11.conj();
    for j in 0..n {
        let a = t[(k, j)];
        let b = t[(k + 1, j)];
        t[(k, j)] = g11.conj() * a + g21.conj() * b;
        t[(k + 1, j)] = g12.conj() * a + g22.conj() * b;
    }
    for i in 0..n {
        let a = t[(i, k)];
        let b = t[(i, k + 1)];
        t[(i, k)] = a * g11 + b * g21;
        t[(i, k + 1)] = a * g12 + b * g22;
        let qa = q[(i, k)];
        let qb = q[(i, k + 1)];
        q[(i, k)] = qa * g11 + qb * g21;
        q[(i, k + 1)] = qa * g12 + qb * g22;
    }
    t[(k + 1, k)] = Complex64::new(0.0, 0.0);
    t[(k, k)] = t22;
    t[(k + 1, k + 1)] = t11;
}

/// Principal power of a triangular block whose diagonal forms one cluster:
/// binomial series `(sigma + E)^theta = sigma^theta sum_k C(theta,k)(E/sigma)^k`.
fn power_of_block(
    tb: &DMatrix<Complex64>,
    theta: Complex64,
) -> (DMatrix<Complex64>, Option<String>) {
    let m = tb.nrows();
    if m == 1 {
        let lam = tb[(0, 0)];
        let val = (lam.ln() * theta).exp();
        return (DMatrix::from_element(1, 1, val), None);
    }
    let sigma = (0..m).map(|i| tb[(i, i)]).sum::<Complex64>() / m as f64;
    let e = tb - DMatrix::<Complex64>::identity(m, m) * sigma;
    let radius = (0..m)
        .map(|i| (tb[(i, i)] - sigma).norm())
        .fold(0.0, f64::max);
    let mut warning = None;
    if radius > 0.5 * sigma.norm() {
        warning = Some(format!(
            "eigenvalue cluster of width {radius:.3e} around {sigma}: series conditioning degraded"
        ));
    }
    let mut coeff = (sigma.ln() * theta).exp();
    let mut term = DMatrix::<Complex64>::identity(m, m);
    let mut f = &term * coeff;
    let mut converged = false;
    for k in 1..200 {
        let kk = k as f64;
        coeff = coeff * (theta - Complex64::new(kk - 1.0, 0.0)) / kk / sigma;
        term = &term * &e;
        let add = &term * coeff;
        f += &add;
        if add.norm() <= f64::EPSILON * f.norm() {
            converged = true;
            break;
        }
    }
    if !converged && warning.is_none() {
        warning = Some("binomial series for a cluster block did not fully converge".into());
    }
    (f, warning)
}

/// Solve `T_ii X - X T_jj = C` for upper-triangular blocks by column
/// back-substitution.
fn triangular_sylvester(
    tii: &DMatrix<Complex64>,
    tjj: &DMatrix<Complex64>,
    c: &DMatrix<Complex64>,
) -> (DMatrix<Complex64>, Option<String>) {
    let p = tii.nrows();
    let q = tjj.nrows();
    let mut x = DMatrix::<Complex64>::zeros(p, q);
    let scale = tii.norm().max(tjj.norm()).max(1e-300);
    let mut warning = None;
    for col in 0..q {
        let mut rhs = c.column(col).into_owned();
        for d in 0..col {
            let coupling = tjj[(d, col)];
            rhs += x.column(d) * coupling;
        }
        let shift = tjj[(col, col)];
        for i in (0..p).rev() {
            let mut v = rhs[i];
            for k in i + 1..p {
                v -= tii[(i, k)] * x[(k, col)];
            }
            let pivot = tii[(i, i)] - shift;
            if pivot.norm() <= 1e-14 * scale {
                if warning.is_none() {
                    warning = Some(format!(
                        "near-coincident eigenvalues across Parlett blocks (gap {:.3e})",
                        pivot.norm()
                    ));
                }
                x[(i, col)] = v / Complex64::new(1e-14 * scale, 0.0);
            } else {
                x[(i, col)] = v / pivot;
            }
        }
    }
    (x, warning)
}

// ---------------------------------------------------------------------------
// scale norms and interpolation norms
// ---------------------------------------------------------------------------

/// `||A^alpha x||` in the weighted space; alpha in [-1, 1]. The endpoints use
/// plain products/solves, fractional exponents go through the Schur route.
pub fn scale_norm(
    a: &DMatrix<f64>,
    space: &WeightedSpace,
    alpha: f64,
    x: &DVector<f64>,
) -> Result<f64> {
    if alpha.abs() > 1.0 + 1e-12 {
        return Err(Error::InvalidArg(format!("alpha = {alpha} outside [-1, 1]")));
    }
    if alpha == 0.0 {
        return Ok(space.norm(x));
    }
    if alpha == 1.0 {
        return Ok(space.norm(&(a * x)));
    }
    if alpha == -1.0 {
        let inv = lu_inverse(a)?;
        return Ok(space.norm(&(inv * x)));
    }
    let f = frac_power_real(a, alpha)?;
    Ok(space.norm(&(&f.matrix * x)))
}

/// Dyadic grid `2^j / t` for `j` in `[-levels, levels]`: the minimum coverage
/// required by the quasi-K-functional.
pub fn dyadic_s_grid(t: f64, levels: i32) -> Vec<f64> {
    (-levels..=levels).map(|j| 2f64.powi(j) / t).collect()
}

/// Quasi-K-functional: `min_s ||x - z_s|| + t ||A z_s||` over the grid, with
/// resolvent quasi-minimizers `z_s = s (s + A)^{-1} x`.
pub fn quasi_k_functional(
    a: &DMatrix<f64>,
    space: &WeightedSpace,
    x: &DVector<f64>,
    t: f64,
    s_grid: &[f64],
) -> Result<f64> {
    if t <= 0.0 {
        return Err(Error::InvalidArg(format!("K-functional parameter t = {t} <= 0")));
    }
    if s_grid.is_empty() {
        return Err(Error::InvalidArg("empty s grid".into()));
    }
    let smin = s_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let smax = s_grid.iter().cloned().fold(0.0, f64::max);
    let need_lo = 2f64.powi(-5) / t;
    let need_hi = 2f64.powi(5) / t;
    if smin > need_lo * (1.0 + 1e-9) || smax < need_hi * (1.0 - 1e-9) {
        return Err(Error::InvalidArg(format!(
            "s grid [{smin:.3e}, {smax:.3e}] does not cover [{need_lo:.3e}, {need_hi:.3e}]"
        )));
    }
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let mut best = f64::INFINITY;
    for &s in s_grid {
        if !(s > 0.0) {
            return Err(Error::InvalidArg("s grid must be positive".into()));
        }
        let shifted = a + &eye * s;
        let z = shifted.lu().solve(x).ok_or(Error::SingularNode)? * s;
        let obj = space.norm(&(x - &z)) + t * space.norm(&(a * &z));
        best = best.min(obj);
    }
    Ok(best)
}

/// Discrete real-interpolation norm of the couple `(X, D(A))` by the dyadic
/// K-method: `( sum_j (2^{-j theta} K(2^j, x))^q )^{1/q}`. The paper-side
/// couple `(D(A), X)_{theta,q}` is realized with the roles swapped; which
/// order a caller means is recorded through its choice of theta.
pub fn real_interp_norm(
    a: &DMatrix<f64>,
    space: &WeightedSpace,
    theta: f64,
    q: f64,
    x: &DVector<f64>,
    j_range: (i32, i32),
) -> Result<f64> {
    if !(0.0 < theta && theta < 1.0) {
        return Err(Error::InvalidArg(format!("theta = {theta} outside (0,1)")));
    }
    if j_range.0 > -20 || j_range.1 < 20 {
        return Err(Error::InvalidArg(
            "dyadic range must cover at least [-20, 20]".into(),
        ));
    }
    if space.norm(x) == 0.0 {
        return Ok(0.0);
    }
    let mut terms = Vec::new();
    for j in j_range.0..=j_range.1 {
        let t = 2f64.powi(j);
        let k = quasi_k_functional(a, space, x, t, &dyadic_s_grid(t, 5))?;
        terms.push(2f64.powf(-(j as f64) * theta) * k);
    }
    if q.is_infinite() {
        return Ok(terms.iter().cloned().fold(0.0, f64::max));
    }
    let scale = terms.iter().cloned().fold(0.0_f64, f64::max).max(1e-300);
    let sum: f64 = terms.iter().map(|v| (v / scale).powf(q)).sum();
    Ok(scale * sum.powf(1.0 / q))
}

// ---------------------------------------------------------------------------
// imaginary powers
// ---------------------------------------------------------------------------

/// Fitted growth of imaginary powers: `||A^{is}|| <= M e^{omega |s|}`.
#[derive(Debug, Clone)]
pub struct BipFit {
    pub m_fit: f64,
    pub omega_fit: f64,
    pub max_norm: f64,
    pub norms: Vec<(f64, f64)>,
}

/// Measure `||A^{is}||` on the space over the given s values and fit the
/// exponential envelope.
pub fn bip_fit(a: &DMatrix<f64>, space: &WeightedSpace, s_values: &[f64]) -> Result<BipFit> {
    let mut norms = Vec::with_capacity(s_values.len());
    for &s in s_values {
        let f = frac_power(a, Complex64::new(0.0, s))?;
        let nrm = space.op_norm_c(&f.matrix)?;
        norms.push((s, nrm.lower));
    }
    let xs: Vec<f64> = norms
        .iter()
        .filter(|(s, _)| *s != 0.0)
        .map(|(s, _)| s.abs())
        .collect();
    let ys: Vec<f64> = norms
        .iter()
        .filter(|(s, _)| *s != 0.0)
        .map(|(_, n)| n.max(1e-300).ln())
        .collect();
    let (omega, log_m, _r2) = linear_fit(&xs, &ys);
    let max_norm = norms.iter().map(|&(_, n)| n).fold(0.0, f64::max);
    Ok(BipFit {
        m_fit: log_m.exp(),
        omega_fit: omega,
        max_norm,
        norms,
    })
}
