//! Nonlinear order by exact series comparison.
//!
//! Back values are set to the exact flow evaluated at `-(k-l) h`, one step is
//! taken entirely in truncated series arithmetic and the result is compared
//! with the flow at `+h`. A local error of `O(h^{p+1})` on generic problems
//! means the order conditions through `p` hold.

use crate::error::{MsrkError, Result};
use crate::method::MsrkMethod;
use crate::par::Execution;

use super::problem::{flow_series, rooted_trees, PolynomialOde};
use super::series::TaylorSeries;

/// Dimension of the generated oracle problems.
pub const ORACLE_DIM: usize = 3;

/// Enough problems to separate every elementary differential of order
/// `order`: at least `min_count`, and `ceil(trees / dim)` so the stacked
/// error coefficients have full rank. Degree `order - 1` keeps the bushy
/// trees visible.
pub fn standard_problems(order: usize, min_count: usize, seed: u64) -> Vec<PolynomialOde> {
    let count = min_count.max(rooted_trees(order).div_ceil(ORACLE_DIM));
    let degree = order.saturating_sub(1).max(2);
    PolynomialOde::family(count, ORACLE_DIM, degree, seed)
}

#[derive(Debug, Clone)]
struct Prepared {
    flow: TaylorSeries,
    back: Vec<TaylorSeries>,
    fback: Vec<TaylorSeries>,
    /// `1 / max(1, |flow coefficient|)` per entry.
    weight: Vec<f64>,
    problem: PolynomialOde,
}

/// Precomputed flows and back values for a fixed step count `k`.
#[derive(Debug, Clone)]
pub struct OracleContext {
    k: usize,
    order: usize,
    items: Vec<Prepared>,
}

impl OracleContext {
    pub fn new(problems: &[PolynomialOde], k: usize, order: usize) -> Self {
        let items = problems
            .iter()
            .map(|p| {
                let flow = flow_series(p, order);
                let back: Vec<TaylorSeries> = (0..k)
                    .map(|l| flow.scale_argument(-((k - 1 - l) as f64)))
                    .collect();
                let fback = back.iter().map(|b| p.eval_series(b)).collect();
                let weight = (0..=order)
                    .flat_map(|j| {
                        flow.coeff(j)
                            .iter()
                            .map(|c| 1.0 / c.abs().max(1.0))
                            .collect::<Vec<_>>()
                    })
                    .collect();
                Prepared {
                    flow,
                    back,
                    fback,
                    weight,
                    problem: p.clone(),
                }
            })
            .collect();
        OracleContext { k, order, items }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_problems(&self) -> usize {
        self.items.len()
    }

    /// Normalized local error series, one per problem.
    pub fn local_errors(&self, method: &MsrkMethod) -> Vec<TaylorSeries> {
        assert_eq!(
            method.steps(),
            self.k,
            "oracle context built for a different step count"
        );
        self.items
            .iter()
            .map(|it| local_error(method, it))
            .collect()
    }

    /// Writes normalized error coefficients of orders `from..=to` for every
    /// problem into `out`.
    pub fn push_coefficients(
        &self,
        method: &MsrkMethod,
        from: usize,
        to: usize,
        out: &mut Vec<f64>,
    ) {
        for err in self.local_errors(method) {
            for j in from..=to.min(self.order) {
                out.extend_from_slice(err.coeff(j));
            }
        }
    }
}

fn local_error(method: &MsrkMethod, it: &Prepared) -> TaylorSeries {
    let s = method.stages();
    let k = method.steps();
    let dim = it.flow.dim();
    let order = it.flow.order();
    let f = |y: &TaylorSeries| it.problem.eval_series(y);

    let mut fy: Vec<TaylorSeries> = Vec::with_capacity(s);
    fy.push(it.fback[k - 1].clone());
    for i in 1..s {
        let mut y = TaylorSeries::zeros(dim, order);
        for l in 0..k {
            y.axpy(method.d[(i, l)], &it.back[l]);
        }
        for l in 0..k - 1 {
            y.axpy_shifted(method.ahat[(i, l)], &it.fback[l]);
        }
        for (j, fj) in fy.iter().enumerate().take(i) {
            y.axpy_shifted(method.a[(i, j)], fj);
        }
        fy.push(f(&y));
    }
    let mut next = TaylorSeries::zeros(dim, order);
    for l in 0..k {
        next.axpy(method.theta[l], &it.back[l]);
    }
    for l in 0..k - 1 {
        next.axpy_shifted(method.bhat[l], &it.fback[l]);
    }
    for (j, fj) in fy.iter().enumerate() {
        next.axpy_shifted(method.b[j], fj);
    }
    next.axpy(-1.0, &it.flow);
    for j in 0..=order {
        let w = &it.weight[j * dim..(j + 1) * dim];
        for (x, wi) in next.coeff_mut(j).iter_mut().zip(w) {
            *x *= wi;
        }
    }
    next
}

/// Largest `p <= pmax` whose error coefficients `h^0 .. h^p` vanish on every
/// oracle problem. Each order `q` is checked on its own problem set, sized
/// by [`standard_problems`].
pub fn oracle_order(
    method: &MsrkMethod,
    pmax: usize,
    nproblems: usize,
    seed: u64,
    tol: f64,
) -> Result<usize> {
    oracle_order_with(method, pmax, nproblems, seed, tol, Execution::default())
}

pub fn oracle_order_with(
    method: &MsrkMethod,
    pmax: usize,
    nproblems: usize,
    seed: u64,
    tol: f64,
    exec: Execution,
) -> Result<usize> {
    if nproblems < 2 {
        return Err(MsrkError::Config(format!(
            "oracle needs at least 2 problems, got {nproblems}"
        )));
    }
    if pmax > 12 {
        return Err(MsrkError::Config(format!(
            "oracle order is limited to 12, got {pmax}"
        )));
    }
    if let Some(v) = method.validate().first_structural() {
        return Err(MsrkError::InvalidMethod(v.to_string()));
    }
    let mut order = 0;
    for q in 1..=pmax + 1 {
        let problems = standard_problems(q, nproblems, seed.wrapping_add(q as u64));
        let k = method.steps();
        let ok = exec.map(&problems, |_, p| {
            let ctx = OracleContext::new(std::slice::from_ref(p), k, q);
            let err = &ctx.local_errors(method)[0];
            (0..=q).all(|j| err.coeff(j).iter().all(|x| x.abs() <= tol))
        });
        if ok.into_iter().all(|x| x) {
            order = q;
        } else {
            break;
        }
    }
    Ok(order.min(pmax))
}
