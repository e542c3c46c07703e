//! Spijker form `w = S x + dt T f`, the canonical convex-combination rewrite
//! and the SSP coefficient `C(S,T)`.

use nalgebra::DMatrix;

use crate::error::{MsrkError, Result};
use crate::method::MsrkMethod;

/// `S` is `(k+s) x k`, `T` is `(k+s) x (k+s)`; rows are ordered
/// `u^{n-k+1}, ..., u^{n-1}, y_1, ..., y_s, u^{n+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpijkerForm {
    pub s_mat: DMatrix<f64>,
    pub t_mat: DMatrix<f64>,
    pub k: usize,
    pub s: usize,
}

/// `P = r (I + rT)^{-1} T` and `R = (I + rT)^{-1} S`.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalForm {
    pub r: f64,
    pub p: DMatrix<f64>,
    pub r_mat: DMatrix<f64>,
}

impl CanonicalForm {
    pub fn min_entry(&self) -> f64 {
        self.p
            .iter()
            .chain(self.r_mat.iter())
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_row_sum_defect(&self) -> f64 {
        (0..self.p.nrows())
            .map(|i| (self.p.row(i).sum() + self.r_mat.row(i).sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

pub fn to_spijker(method: &MsrkMethod) -> Result<SpijkerForm> {
    let report = method.validate();
    if let Some(v) = report.first_structural() {
        return Err(MsrkError::InvalidMethod(v.to_string()));
    }
    Ok(build_spijker(method))
}

/// Builds the block matrices without validating; shapes must already agree.
pub(crate) fn build_spijker(method: &MsrkMethod) -> SpijkerForm {
    let s = method.stages();
    let k = method.steps();
    let n = k + s;
    let mut s_mat = DMatrix::zeros(n, k);
    let mut t_mat = DMatrix::zeros(n, n);
    for i in 0..k - 1 {
        s_mat[(i, i)] = 1.0;
    }
    for i in 0..s {
        let row = k - 1 + i;
        for l in 0..k {
            s_mat[(row, l)] = method.d[(i, l)];
        }
        for l in 0..k - 1 {
            t_mat[(row, l)] = method.ahat[(i, l)];
        }
        for j in 0..s {
            t_mat[(row, k - 1 + j)] = method.a[(i, j)];
        }
    }
    let last = n - 1;
    for l in 0..k {
        s_mat[(last, l)] = method.theta[l];
    }
    for l in 0..k - 1 {
        t_mat[(last, l)] = method.bhat[l];
    }
    for j in 0..s {
        t_mat[(last, k - 1 + j)] = method.b[j];
    }
    SpijkerForm { s_mat, t_mat, k, s }
}

/// Solves `(I + rT) X = B` by forward substitution; `T` strictly lower triangular.
fn forward_solve(t: &DMatrix<f64>, r: f64, rhs: &DMatrix<f64>) -> DMatrix<f64> {
    let n = t.nrows();
    let mut x = rhs.clone();
    for i in 0..n {
        for j in 0..i {
            let tij = t[(i, j)];
            if tij != 0.0 {
                for c in 0..x.ncols() {
                    let v = x[(j, c)];
                    x[(i, c)] -= r * tij * v;
                }
            }
        }
    }
    x
}

pub fn canonical(sp: &SpijkerForm, r: f64) -> Result<CanonicalForm> {
    if r.is_nan() || r < 0.0 || r.is_infinite() {
        return Err(MsrkError::Domain(format!(
            "canonical form needs r >= 0, got {r}"
        )));
    }
    let r_mat = forward_solve(&sp.t_mat, r, &sp.s_mat);
    let p = forward_solve(&sp.t_mat, r, &(&sp.t_mat * r));
    Ok(CanonicalForm { r, p, r_mat })
}

/// Bisection controls for [`ssp_analysis`].
#[derive(Debug, Clone, Copy)]
pub struct SspOptions {
    /// Entries of `P` and `R` down to `-entry_tol` count as nonnegative.
    pub entry_tol: f64,
    pub width: f64,
    pub max_iter: usize,
}

impl Default for SspOptions {
    fn default() -> Self {
        SspOptions {
            entry_tol: 1e-12,
            width: 1e-10,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SspAnalysis {
    pub c: f64,
    /// Some entry of `S` is negative, so no `r >= 0` is feasible.
    pub infeasible_at_zero: bool,
    /// Still feasible at the upper end of the bracket `s + 1`.
    pub bracket_hit: bool,
    /// Feasibility re-checked at `c (1 - 1e-9)`.
    pub revalidated: bool,
}

impl SpijkerForm {
    pub fn is_feasible(&self, r: f64, entry_tol: f64) -> bool {
        // r = 0 is checked directly since canonical(0) = (S, 0).
        if r == 0.0 {
            return self.s_mat.iter().all(|&v| v >= -entry_tol);
        }
        match canonical(self, r) {
            Ok(cf) => cf.min_entry() >= -entry_tol,
            Err(_) => false,
        }
    }
}

pub fn ssp_analysis(sp: &SpijkerForm, opts: &SspOptions) -> SspAnalysis {
    if !sp.is_feasible(0.0, opts.entry_tol) {
        return SspAnalysis {
            c: 0.0,
            infeasible_at_zero: true,
            bracket_hit: false,
            revalidated: true,
        };
    }
    let mut lo = 0.0;
    let mut hi = sp.s as f64 + 1.0;
    if sp.is_feasible(hi, opts.entry_tol) {
        return SspAnalysis {
            c: hi,
            infeasible_at_zero: false,
            bracket_hit: true,
            revalidated: true,
        };
    }
    for _ in 0..opts.max_iter {
        if hi - lo < opts.width {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if sp.is_feasible(mid, opts.entry_tol) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    SspAnalysis {
        c: lo,
        infeasible_at_zero: false,
        bracket_hit: false,
        revalidated: sp.is_feasible(lo * (1.0 - 1e-9), opts.entry_tol),
    }
}

/// `C(S,T)` with default tolerances. This is a lower bound on the SSP
/// coefficient, exact for row-irreducible methods.
pub fn ssp_coefficient(sp: &SpijkerForm) -> f64 {
    ssp_analysis(sp, &SspOptions::default()).c
}

/// Convenience: `C(S,T)` of a structurally valid method.
pub fn method_ssp_coefficient(method: &MsrkMethod) -> Result<f64> {
    Ok(ssp_coefficient(&to_spijker(method)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::method::{forward_euler, rk44, ssprk33};

    #[test]
    fn forward_euler_spijker() {
        let sp = to_spijker(&forward_euler()).unwrap();
        assert_eq!(sp.s_mat, DMatrix::from_row_slice(2, 1, &[1.0, 1.0]));
        assert_eq!(
            sp.t_mat,
            DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0])
        );
    }

    #[test]
    fn canonical_at_zero_is_identity_case() {
        let sp = to_spijker(&ssprk33()).unwrap();
        let cf = canonical(&sp, 0.0).unwrap();
        assert_eq!(cf.r_mat, sp.s_mat);
        assert!(cf.p.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn canonical_forward_euler_r1() {
        let sp = to_spijker(&forward_euler()).unwrap();
        let cf = canonical(&sp, 1.0).unwrap();
        assert_eq!(cf.p, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]));
        assert_eq!(cf.r_mat, DMatrix::from_row_slice(2, 1, &[1.0, 0.0]));
    }

    #[test]
    fn canonical_rejects_negative_r() {
        let sp = to_spijker(&forward_euler()).unwrap();
        assert!(matches!(canonical(&sp, -0.5), Err(MsrkError::Domain(_))));
    }

    #[test]
    fn known_ssp_coefficients() {
        let fe = ssp_coefficient(&to_spijker(&forward_euler()).unwrap());
        assert!((fe - 1.0).abs() < 1e-10);
        let c = ssp_coefficient(&to_spijker(&ssprk33()).unwrap());
        assert!((c - 1.0).abs() < 1e-9, "{c}");
        // Classical RK4 has a negative entry of size O(r^2) for every r > 0,
        // which the entry tolerance hides only below r ~ 1e-6.
        let c = ssp_coefficient(&to_spijker(&rk44()).unwrap());
        assert!(c < 1e-5, "{c}");
    }

    #[test]
    fn negative_s_entry_flags_infeasible() {
        let mut m = crate::method::MsrkMethod::zeros(1, 2);
        m.theta = nalgebra::DVector::from_column_slice(&[-0.5, 1.5]);
        let a = ssp_analysis(&to_spijker(&m).unwrap(), &SspOptions::default());
        assert!(a.infeasible_at_zero);
        assert_eq!(a.c, 0.0);
    }
}
