//! Linear-problem theory: stability polynomials, absolute monotonicity,
//! threshold factors and the optimal second-order family.

use nalgebra::{DMatrix, DVector};

use crate::error::{MsrkError, Result};
use crate::method::MsrkMethod;
use crate::spijker::SpijkerForm;

/// Polynomial in the monomial basis, lowest degree first.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn constant(c: f64) -> Self {
        Poly(vec![c])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    /// Degree after dropping trailing coefficients that are tiny relative to
    /// the largest one. The zero polynomial has degree 0.
    pub fn degree(&self) -> usize {
        let scale = self.0.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let cut = scale * 1e-14;
        self.0.iter().rposition(|c| c.abs() > cut).unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * z + c)
    }

    fn add_scaled(&mut self, other: &Poly, scale: f64, shift: usize) {
        if self.0.len() < other.0.len() + shift {
            self.0.resize(other.0.len() + shift, 0.0);
        }
        for (i, &c) in other.0.iter().enumerate() {
            self.0[i + shift] += scale * c;
        }
    }
}

/// `psi[i]` multiplies `u^{n-i}` in `u^{n+1} = sum_i psi_{i+1}(z) u^{n-i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityPolynomials {
    pub psi: Vec<Poly>,
}

/// `gamma[(i, j)]` is the coefficient of `(1 + z/r)^j` in `psi_{i+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedBasisExpansion {
    pub r: f64,
    pub gamma: DMatrix<f64>,
}

/// Applies the method to `u' = lambda u` symbolically in `z = dt lambda`.
pub fn stability_polynomials(sp: &SpijkerForm) -> StabilityPolynomials {
    let n = sp.s_mat.nrows();
    let k = sp.k;
    // w = S x + z T w, solved row by row for the dependence on each x_l.
    let mut w: Vec<Vec<Poly>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut row: Vec<Poly> = (0..k).map(|l| Poly::constant(sp.s_mat[(i, l)])).collect();
        for (j, wj) in w.iter().enumerate() {
            let t = sp.t_mat[(i, j)];
            if t != 0.0 {
                for l in 0..k {
                    row[l].add_scaled(&wj[l], t, 1);
                }
            }
        }
        w.push(row);
    }
    let last = &w[n - 1];
    StabilityPolynomials {
        psi: (0..k).map(|i| last[k - 1 - i].clone()).collect(),
    }
}

/// Coefficients of `psi` in powers of `(1 + z/r)`.
pub fn shifted_basis(psi: &Poly, r: f64) -> Result<Vec<f64>> {
    if r.is_nan() || r <= 0.0 {
        return Err(MsrkError::Domain(format!(
            "shifted basis needs r > 0, got {r}"
        )));
    }
    // gamma_j = r^j psi^{(j)}(-r) / j!
    let a = psi.coeffs();
    let n = a.len();
    let mut gamma = vec![0.0; n];
    for (j, g) in gamma.iter_mut().enumerate() {
        let mut acc = 0.0;
        // sum_{m >= j} a_m C(m, j) (-r)^{m-j}, evaluated by Horner in (-r).
        for m in (j..n).rev() {
            acc = acc * (-r) + a[m] * binomial(m, j);
        }
        *g = acc * r.powi(j as i32);
    }
    Ok(gamma)
}

/// Inverse of [`shifted_basis`]: monomial coefficients of `sum_j g_j (1+z/r)^j`.
pub fn from_shifted_basis(gamma: &[f64], r: f64) -> Poly {
    let n = gamma.len();
    let mut out = vec![0.0; n];
    for (j, &g) in gamma.iter().enumerate() {
        for (m, o) in out.iter_mut().enumerate().take(j + 1) {
            *o += g * binomial(j, m) / r.powi(m as i32);
        }
    }
    Poly(out)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

const GAMMA_TOL: f64 = 1e-12;

fn absolutely_monotone_at(psi: &Poly, r: f64) -> bool {
    shifted_basis(psi, r)
        .map(|g| g.iter().all(|&x| x >= -GAMMA_TOL))
        .unwrap_or(false)
}

/// Largest `r` with every derivative of `psi` nonnegative on `[-r, 0]`.
///
/// Returns `f64::INFINITY` for nonnegative constants. The bisection bracket
/// starts at `2 deg + 2` and is doubled while still feasible, since a single
/// `psi_i` of a multistep method is not normalized.
pub fn radius_abs_monotonicity(psi: &Poly, tol: f64) -> f64 {
    let deg = psi.degree();
    let a = &psi.coeffs()[..=deg.min(psi.coeffs().len().saturating_sub(1))];
    if a.iter().any(|&c| c < -GAMMA_TOL) {
        return 0.0;
    }
    if deg == 0 {
        return if a.first().copied().unwrap_or(0.0) >= 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
    }
    let trimmed = Poly(a.to_vec());
    let mut lo = 0.0;
    let mut hi = 2.0 * deg as f64 + 2.0;
    while absolutely_monotone_at(&trimmed, hi) {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return f64::INFINITY;
        }
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if absolutely_monotone_at(&trimmed, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Minimum radius of absolute monotonicity over the `psi_i`; identically
/// zero polynomials are ignored.
pub fn threshold_factor(sp: &StabilityPolynomials) -> f64 {
    sp.psi
        .iter()
        .filter(|p| !p.is_zero())
        .map(|p| radius_abs_monotonicity(p, 1e-10))
        .fold(f64::INFINITY, f64::min)
}

/// Optimal threshold factor `R_{s,k,2}` of explicit second-order methods.
pub fn r_sk2(s: usize, k: usize) -> Result<f64> {
    if k <= 1 || s == 0 {
        return Err(MsrkError::Domain(format!(
            "R_(s,k,2) requires s >= 1 and k > 1, got s = {s}, k = {k}"
        )));
    }
    let s = s as f64;
    let k = k as f64;
    // Both terms are nonnegative, so the sum is free of cancellation.
    let lead = (k - 2.0) * s;
    let disc = lead * lead + 4.0 * s * (s - 1.0) * (k - 1.0);
    Ok((lead + disc.sqrt()) / (2.0 * (k - 1.0)))
}

/// Shifted-basis coefficients attaining `R_{s,k,2}`.
pub fn optimal_gamma_sk2(s: usize, k: usize) -> Result<ShiftedBasisExpansion> {
    let r = r_sk2(s, k)?;
    let (sf, kf) = (s as f64, k as f64);
    let denom = sf - r + kf * r;
    let mut gamma = DMatrix::zeros(k, s + 1);
    gamma[(0, s)] = kf * r / denom;
    gamma[(k - 1, 0)] = (sf - r) / denom;
    Ok(ShiftedBasisExpansion { r, gamma })
}

/// Residuals of the zeroth, first and second order conditions written in the
/// shifted basis.
pub fn second_order_residuals(e: &ShiftedBasisExpansion) -> [f64; 3] {
    let k = e.gamma.nrows();
    let r = e.r;
    let kf = k as f64;
    let mut res = [-1.0, -kf * r, -kf * kf * r * r];
    for i in 0..k {
        let back = (k - 1 - i) as f64; // k - i for 1-based i
        for j in 0..e.gamma.ncols() {
            let g = e.gamma[(i, j)];
            let jf = j as f64;
            res[0] += g;
            res[1] += g * (jf + back * r);
            res[2] += g * (back * back * r * r + 2.0 * back * jf * r + jf * (jf - 1.0));
        }
    }
    res
}

/// The optimal second-order `s`-stage, `k`-step family.
pub fn gen_second_order(s: usize, k: usize) -> Result<MsrkMethod> {
    if s < 2 || k < 2 {
        return Err(MsrkError::Domain(format!(
            "second-order family needs s >= 2 and k >= 2, got s = {s}, k = {k}"
        )));
    }
    let r = r_sk2(s, k)?;
    let (sf, kf) = (s as f64, k as f64);
    let q = 2.0 * (kf - 1.0) * r;
    let beta = kf * q / (sf * (kf - 1.0) * (2.0 * (sf - 1.0) + q));
    let theta_k = (kf - beta * sf) / (kf - 1.0);

    let mut d = DMatrix::zeros(s, k);
    d.column_mut(k - 1).fill(1.0);
    let mut a = DMatrix::zeros(s, s);
    for i in 0..s {
        for j in 0..i {
            a[(i, j)] = 1.0 / r;
        }
    }
    let mut theta = DVector::zeros(k);
    theta[k - 1] = theta_k;
    theta[0] = 1.0 - theta_k;
    Ok(MsrkMethod {
        name: format!("SO2({s},{k})"),
        claimed_order: 2,
        d,
        ahat: DMatrix::zeros(s, k - 1),
        a,
        theta,
        bhat: DVector::zeros(k - 1),
        b: DVector::from_element(s, beta),
    })
}

/// Largest `p` such that `e^z - sum_i psi_i(z) e^{-(i-1) z} = O(z^{p+1})`.
pub fn linear_order(sp: &StabilityPolynomials, pmax: usize, tol: f64) -> usize {
    let n = pmax + 2;
    let mut defect = vec![0.0; n];
    let mut fact = 1.0;
    for (m, d) in defect.iter_mut().enumerate() {
        if m > 0 {
            fact *= m as f64;
        }
        *d = 1.0 / fact;
    }
    for (i, psi) in sp.psi.iter().enumerate() {
        // series of e^{-i z}
        let mut shift = vec![0.0; n];
        let mut term = 1.0;
        for (m, c) in shift.iter_mut().enumerate() {
            if m > 0 {
                term *= -(i as f64) / m as f64;
            }
            *c = term;
        }
        for (a, &pa) in psi.coeffs().iter().enumerate().take(n) {
            for m in 0..n - a {
                defect[a + m] -= pa * shift[m];
            }
        }
    }
    defect
        .iter()
        .position(|d| d.abs() > tol)
        .map(|first_bad| first_bad.saturating_sub(1))
        .unwrap_or(pmax)
        .min(pmax)
}
