//! Stage and final quadrature residuals, and stage order.

use std::collections::BTreeMap;

use nalgebra::DVector;

use crate::method::MsrkMethod;

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSet {
    /// `tau_j` for the `k-1+s` entries of `[u^{n-k+1}; ...; u^{n-1}; y_1; ...; y_s]`.
    pub stage: BTreeMap<usize, DVector<f64>>,
    /// Scalar `tau_j` of the step update.
    pub final_: BTreeMap<usize, f64>,
}

impl ResidualSet {
    /// Largest magnitude among stage and final residuals of order `j`.
    pub fn max_abs(&self, j: usize) -> f64 {
        let st = self.stage.get(&j).map_or(0.0, |v| v.amax());
        let fi = self.final_.get(&j).map_or(0.0, |v| v.abs());
        st.max(fi)
    }
}

fn powi(v: &DVector<f64>, e: usize) -> DVector<f64> {
    v.map(|x| x.powi(e as i32))
}

pub fn stage_residuals(method: &MsrkMethod, jmax: usize) -> ResidualSet {
    let ext = method.extended();
    let (c, l) = method.abscissae();
    let neg_l = -l;
    let mut stage = BTreeMap::new();
    let mut final_ = BTreeMap::new();
    let mut fact = 1.0; // (j-1)!
    for j in 1..=jmax {
        let jfact = fact * j as f64;
        let cj = powi(&c, j);
        let cjm1 = powi(&c, j - 1);
        let lj = powi(&neg_l, j);
        let tau = (cj - &ext.d * &lj) / jfact - (&ext.a * &cjm1) / fact;
        let tau_final = (1.0 - method.theta.dot(&lj)) / jfact - ext.b.dot(&cjm1) / fact;
        stage.insert(j, tau);
        final_.insert(j, tau_final);
        fact = jfact;
    }
    ResidualSet { stage, final_ }
}

/// Largest `q` with every stage and final residual of order `<= q` below `tol`.
pub fn stage_order(method: &MsrkMethod, tol: f64) -> usize {
    const CAP: usize = 24;
    let res = stage_residuals(method, CAP);
    (1..=CAP)
        .take_while(|&j| res.max_abs(j) <= tol)
        .last()
        .unwrap_or(0)
}
