//! Stage residuals, stage order and nonlinear order verification.

mod oracle;
mod problem;
mod residuals;
mod series;

pub use oracle::{oracle_order, oracle_order_with, standard_problems, OracleContext, ORACLE_DIM};
pub use problem::{flow_series, rooted_trees, PolynomialOde};
pub use residuals::{stage_order, stage_residuals, ResidualSet};
pub use series::{scalar_mul, TaylorSeries};

use crate::error::{MsrkError, Result};
use crate::method::MsrkMethod;

/// Equality constraints for order `p`: final residuals `tau_j` (`j <= p`),
/// stage residuals up to `floor((p-1)/2)` and the oracle's normalized local
/// error coefficients of orders `1..=p` on each problem.
pub fn order_residual_vector(
    method: &MsrkMethod,
    p: usize,
    problems: &[PolynomialOde],
) -> Vec<f64> {
    let ctx = OracleContext::new(problems, method.steps(), p);
    order_residuals_with(method, p, &ctx)
}

/// Same as [`order_residual_vector`] with a prepared context of order `p`.
pub fn order_residuals_with(method: &MsrkMethod, p: usize, ctx: &OracleContext) -> Vec<f64> {
    let mut out = Vec::new();
    push_order_residuals(method, p, ctx, &mut out);
    out
}

pub(crate) fn push_order_residuals(
    method: &MsrkMethod,
    p: usize,
    ctx: &OracleContext,
    out: &mut Vec<f64>,
) {
    let q = p.saturating_sub(1) / 2;
    let res = stage_residuals(method, p.max(q));
    for j in 1..=p {
        out.push(res.final_[&j]);
    }
    for j in 1..=q {
        out.extend(res.stage[&j].iter().copied());
    }
    ctx.push_coefficients(method, 1, p, out);
}

/// Least-squares slope of `log(error)` against `log(dt)`.
pub fn convergence_order(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 4 {
        return Err(MsrkError::Data(format!(
            "convergence fit needs at least 4 points, got {}",
            points.len()
        )));
    }
    if let Some(&(dt, e)) = points.iter().find(|(dt, e)| !(*e > 0.0) || !(*dt > 0.0)) {
        return Err(MsrkError::Data(format!(
            "non-positive point (dt = {dt}, error = {e})"
        )));
    }
    if points.windows(2).any(|w| w[1].0 >= w[0].0) {
        return Err(MsrkError::Data(
            "step sizes must be strictly decreasing".into(),
        ));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::method::ssprk33;
    use crate::theory::gen_second_order;

    fn max_abs(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    #[test]
    fn residual_vector_of_ssprk33() {
        let r3 = order_residual_vector(&ssprk33(), 3, &standard_problems(3, 2, 3));
        assert!(max_abs(&r3) <= 1e-12, "{}", max_abs(&r3));
        let r4 = order_residual_vector(&ssprk33(), 4, &standard_problems(4, 2, 3));
        assert!(max_abs(&r4) > 1e-3);
    }

    #[test]
    fn residual_vector_of_second_order_family() {
        let m = gen_second_order(5, 4).unwrap();
        let r = order_residual_vector(&m, 2, &standard_problems(2, 2, 9));
        assert!(max_abs(&r) <= 1e-10, "{}", max_abs(&r));
    }

    #[test]
    fn exact_power_law_slope() {
        let pts: Vec<(f64, f64)> = [0.4, 0.2, 0.1, 0.05]
            .iter()
            .map(|&h| (h, 3.0 * h * h))
            .collect();
        assert!((convergence_order(&pts).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_cubic_slope() {
        let noise = [1.01, 0.99, 1.005, 0.995, 1.01, 0.99];
        let pts: Vec<(f64, f64)> = (0..6)
            .map(|i| {
                let h = 0.5f64.powi(i);
                (h, 0.7 * h.powi(3) * noise[i as usize])
            })
            .collect();
        assert!((convergence_order(&pts).unwrap() - 3.0).abs() < 0.1);
    }

    #[test]
    fn fit_preconditions() {
        assert!(convergence_order(&[(0.1, 1.0)]).is_err());
        let pts = [(0.4, 1.0), (0.2, 0.0), (0.1, 0.1), (0.05, 0.01)];
        assert!(matches!(convergence_order(&pts), Err(MsrkError::Data(_))));
    }
}
