//! Local least-squares solvers for the inner feasibility problems.

use nalgebra::{DMatrix, DVector};

/// Result of one local solve.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerOutcome {
    pub x: Vec<f64>,
    /// Sum of squared residuals at `x`.
    pub merit: f64,
    pub iterations: usize,
}

/// Smooth constraint functions: `f(x, eq, ineq)` fills the equalities
/// (`eq = 0`) and inequalities (`ineq >= 0`).
pub type ConstraintFn<'a> = dyn Fn(&[f64], &mut Vec<f64>, &mut Vec<f64>) + Sync + 'a;

/// `sum eq^2 + sum min(0, ineq)^2`.
pub fn merit(eq: &[f64], ineq: &[f64]) -> f64 {
    eq.iter().map(|x| x * x).sum::<f64>() + ineq.iter().map(|x| x.min(0.0).powi(2)).sum::<f64>()
}

/// A deterministic local minimizer of [`merit`]. The solver may stop as soon
/// as the merit falls to `target`.
pub trait InnerSolver: Sync {
    fn solve(&self, f: &ConstraintFn<'_>, x0: &[f64], target: f64) -> InnerOutcome;
}

/// Levenberg-Marquardt with Marquardt diagonal scaling. The Jacobian comes
/// from forward differences of the smooth functions; an inequality row
/// enters only while it is violated.
#[derive(Debug, Clone, Copy)]
pub struct LevenbergMarquardt {
    pub max_iters: usize,
    /// Stop when the merit has not dropped below `stall_ratio` times its value
    /// `stall_window` iterations earlier.
    pub stall_window: usize,
    pub stall_ratio: f64,
}

impl Default for LevenbergMarquardt {
    fn default() -> Self {
        LevenbergMarquardt {
            max_iters: 500,
            stall_window: 25,
            stall_ratio: 0.99,
        }
    }
}

impl InnerSolver for LevenbergMarquardt {
    fn solve(&self, f: &ConstraintFn<'_>, x0: &[f64], target: f64) -> InnerOutcome {
        let n = x0.len();
        let mut x = x0.to_vec();
        let (mut eq, mut ineq) = (Vec::new(), Vec::new());
        let (mut teq, mut tineq) = (Vec::new(), Vec::new());
        f(&x, &mut eq, &mut ineq);
        let mut m0 = merit(&eq, &ineq);
        let mut lambda = 1e-3;
        let mut history = vec![m0];
        let mut trial = vec![0.0; n];
        let mut iterations = 0;

        while iterations < self.max_iters && m0 > target && m0.is_finite() {
            iterations += 1;
            let active: Vec<usize> = (0..ineq.len()).filter(|&i| ineq[i] < 0.0).collect();
            let rows = eq.len() + active.len();
            let mut res = DVector::zeros(rows);
            for (i, v) in eq.iter().enumerate() {
                res[i] = *v;
            }
            for (a, &i) in active.iter().enumerate() {
                res[eq.len() + a] = ineq[i];
            }
            let mut jac = DMatrix::zeros(rows, n);
            for j in 0..n {
                let h = 1.5e-8 * x[j].abs().max(1.0);
                let saved = x[j];
                x[j] = saved + h;
                f(&x, &mut teq, &mut tineq);
                x[j] = saved;
                for i in 0..eq.len() {
                    jac[(i, j)] = (teq[i] - eq[i]) / h;
                }
                for (a, &i) in active.iter().enumerate() {
                    jac[(eq.len() + a, j)] = (tineq[i] - ineq[i]) / h;
                }
            }
            let jtj = jac.transpose() * &jac;
            let g = jac.transpose() * res;
            let scale: Vec<f64> = (0..n).map(|i| jtj[(i, i)].max(1e-12)).collect();

            let mut accepted = false;
            while lambda < 1e16 {
                let mut lhs = jtj.clone();
                for i in 0..n {
                    lhs[(i, i)] += lambda * scale[i];
                }
                let Some(chol) = lhs.cholesky() else {
                    lambda *= 10.0;
                    continue;
                };
                let step = chol.solve(&g);
                for i in 0..n {
                    trial[i] = x[i] - step[i];
                }
                f(&trial, &mut teq, &mut tineq);
                let tm = merit(&teq, &tineq);
                if tm.is_finite() && tm < m0 {
                    x.copy_from_slice(&trial);
                    std::mem::swap(&mut eq, &mut teq);
                    std::mem::swap(&mut ineq, &mut tineq);
                    m0 = tm;
                    lambda = (lambda / 3.0).max(1e-15);
                    accepted = true;
                    break;
                }
                lambda *= 4.0;
            }
            if !accepted {
                break;
            }
            history.push(m0);
            let w = self.stall_window;
            if history.len() > w && m0 > self.stall_ratio * history[history.len() - 1 - w] {
                break;
            }
        }
        InnerOutcome {
            x,
            merit: m0,
            iterations,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_rosenbrock_as_least_squares() {
        let f = |x: &[f64], eq: &mut Vec<f64>, ineq: &mut Vec<f64>| {
            *eq = vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]];
            ineq.clear();
        };
        let out = LevenbergMarquardt::default().solve(&f, &[-1.2, 1.0], 1e-24);
        assert!(out.merit <= 1e-20, "{out:?}");
        assert!((out.x[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn lands_on_an_inequality_boundary() {
        // x0^2 = 1 with x0 >= 1 pins x0 = 1; x1 starts above its upper bound.
        let f = |x: &[f64], eq: &mut Vec<f64>, ineq: &mut Vec<f64>| {
            *eq = vec![x[0] * x[0] - 1.0];
            *ineq = vec![x[0] - 1.0, 3.0 - x[1], x[1]];
        };
        let out = LevenbergMarquardt::default().solve(&f, &[0.2, 5.0], 1e-26);
        assert!(out.merit <= 1e-24, "{out:?}");
        assert!((out.x[0] - 1.0).abs() < 1e-10 && out.x[1] <= 3.0 + 1e-12);
    }

    #[test]
    fn stalls_on_inconsistent_system() {
        let f = |x: &[f64], eq: &mut Vec<f64>, ineq: &mut Vec<f64>| {
            *eq = vec![x[0] - 1.0, x[0] + 1.0];
            ineq.clear();
        };
        let out = LevenbergMarquardt::default().solve(&f, &[3.0], 1e-24);
        assert!((out.merit - 2.0).abs() < 1e-9);
        assert!(out.iterations < 100);
    }
}
