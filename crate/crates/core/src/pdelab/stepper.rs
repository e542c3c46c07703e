//! Time stepping: one MSRK step, startup values, full runs and the
//! high-accuracy reference integrator.

use std::collections::VecDeque;

use crate::error::{MsrkError, Result};
use crate::method::MsrkMethod;

use super::problems::SemiDiscretization;
use super::{positivity_min, tv_seminorm};

/// The `k` most recent states with their derivatives, oldest first.
#[derive(Debug, Clone, Default)]
pub struct History {
    pub states: VecDeque<Vec<f64>>,
    pub derivs: VecDeque<Vec<f64>>,
}

impl History {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn push(&mut self, state: Vec<f64>, deriv: Vec<f64>) {
        self.states.push_back(state);
        self.derivs.push_back(deriv);
    }

    /// Pushes a new step and drops the oldest one.
    pub fn advance(&mut self, state: Vec<f64>, deriv: Vec<f64>) {
        self.states.pop_front();
        self.derivs.pop_front();
        self.push(state, deriv);
    }

    pub fn latest(&self) -> &[f64] {
        self.states.back().expect("history is empty")
    }
}

/// Result of [`msrk_step`]: `u^{n+1}` and `F(u^{n+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub state: Vec<f64>,
    pub deriv: Vec<f64>,
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    if a != 0.0 {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += a * xi;
        }
    }
}

/// One step of `method`. Evaluates `rhs` once per stage `y_2..y_s` and once
/// at `u^{n+1}`, so `s` times in total.
pub fn msrk_step(
    method: &MsrkMethod,
    history: &History,
    rhs: &dyn Fn(&[f64], &mut [f64]),
    dt: f64,
) -> Result<StepOutput> {
    let (s, k) = (method.stages(), method.steps());
    if history.len() != k {
        return Err(MsrkError::History {
            expected: k,
            found: history.len(),
        });
    }
    let dim = history.latest().len();
    let mut fy: Vec<Vec<f64>> = Vec::with_capacity(s);
    for i in 1..s {
        let mut y = vec![0.0; dim];
        for l in 0..k {
            axpy(&mut y, method.d[(i, l)], &history.states[l]);
        }
        for l in 0..k - 1 {
            axpy(&mut y, dt * method.ahat[(i, l)], &history.derivs[l]);
        }
        for j in 0..i {
            let fj = if j == 0 {
                &history.derivs[k - 1]
            } else {
                &fy[j - 1]
            };
            axpy(&mut y, dt * method.a[(i, j)], fj);
        }
        let mut f = vec![0.0; dim];
        rhs(&y, &mut f);
        fy.push(f);
    }
    let mut u = vec![0.0; dim];
    for l in 0..k {
        axpy(&mut u, method.theta[l], &history.states[l]);
    }
    for l in 0..k - 1 {
        axpy(&mut u, dt * method.bhat[l], &history.derivs[l]);
    }
    for j in 0..s {
        let fj = if j == 0 {
            &history.derivs[k - 1]
        } else {
            &fy[j - 1]
        };
        axpy(&mut u, dt * method.b[j], fj);
    }
    let mut deriv = vec![0.0; dim];
    rhs(&u, &mut deriv);
    Ok(StepOutput { state: u, deriv })
}

/// One SSPRK(3,3) step in Shu-Osher form, reusing the scratch buffers.
fn ssprk33_step(
    problem: &dyn SemiDiscretization,
    u: &mut [f64],
    h: f64,
    f: &mut [f64],
    y: &mut [f64],
) {
    problem.rhs(u, f);
    for i in 0..u.len() {
        y[i] = u[i] + h * f[i];
    }
    problem.rhs(y, f);
    for i in 0..u.len() {
        y[i] = 0.75 * u[i] + 0.25 * (y[i] + h * f[i]);
    }
    problem.rhs(y, f);
    for i in 0..u.len() {
        u[i] = u[i] / 3.0 + 2.0 / 3.0 * (y[i] + h * f[i]);
    }
}

/// Advances `u` by `len` with `count` equal SSPRK(3,3) substeps.
fn ssprk33_advance(
    problem: &dyn SemiDiscretization,
    u: &[f64],
    len: f64,
    count: usize,
) -> Vec<f64> {
    let mut u = u.to_vec();
    let mut f = vec![0.0; u.len()];
    let mut y = vec![0.0; u.len()];
    let h = len / count as f64;
    for _ in 0..count {
        ssprk33_step(problem, &mut u, h, &mut f, &mut y);
    }
    u
}

/// Number of substeps of size at most `min(dt^{p/3}, dt_fe)` covering `len`.
pub fn substep_count(len: f64, dt: f64, p: usize, dt_fe: f64) -> usize {
    let h = dt.powf(p as f64 / 3.0).min(dt_fe);
    ((len / h) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartupMode {
    /// Sample the problem's exact solution.
    Exact,
    /// Integrate each interval with small SSPRK(3,3) substeps.
    Rk3Substeps,
}

/// The states at `t = 0, dt, ..., (k-1) dt`.
pub fn startup(
    problem: &dyn SemiDiscretization,
    dt: f64,
    k: usize,
    p: usize,
    mode: StartupMode,
) -> Result<Vec<Vec<f64>>> {
    let mut out = vec![problem.initial()];
    for l in 1..k {
        let next = match mode {
            StartupMode::Exact => problem.exact(l as f64 * dt)?.ok_or_else(|| {
                MsrkError::Config(format!(
                    "problem {} has no exact solution for startup",
                    problem.name()
                ))
            })?,
            StartupMode::Rk3Substeps => {
                let count = substep_count(dt, dt, p, problem.dt_fe());
                ssprk33_advance(problem, &out[l - 1], dt, count)
            }
        };
        out.push(next);
    }
    Ok(out)
}

/// Monitor samples of a run. Index `i` is the state at `times[i]`; the
/// first `multistep_from` samples come from startup.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub times: Vec<f64>,
    pub tv: Vec<f64>,
    pub min: Vec<f64>,
    pub multistep_from: usize,
    pub final_state: Vec<f64>,
    /// Max-norm error against the exact solution at the final time.
    pub error: Option<f64>,
}

impl RunRecord {
    fn sample(&mut self, t: f64, u: &[f64]) {
        self.times.push(t);
        self.tv.push(tv_seminorm(u));
        self.min.push(positivity_min(u));
    }

    /// Every multistep step satisfies `TV(u^{n+1}) <= max` over the previous
    /// `k` samples plus `slack`.
    pub fn tvd_holds(&self, k: usize, slack: f64) -> bool {
        (self.multistep_from..self.tv.len()).all(|n| {
            let lo = n.saturating_sub(k);
            let prev = self.tv[lo..n]
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            self.tv[n] <= prev + slack
        })
    }

    pub fn positivity_holds(&self, slack: f64) -> bool {
        self.min[self.multistep_from..].iter().all(|&m| m >= -slack)
    }
}

/// Startup followed by `steps` full multistep steps of size `dt`.
pub fn run_steps(
    problem: &dyn SemiDiscretization,
    method: &MsrkMethod,
    dt: f64,
    steps: usize,
    mode: StartupMode,
) -> Result<(RunRecord, History)> {
    if let Some(v) = method.validate().first_structural() {
        return Err(MsrkError::InvalidMethod(v.to_string()));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(MsrkError::Config(format!("dt must be positive, got {dt}")));
    }
    let k = method.steps();
    let init = startup(problem, dt, k, method.claimed_order, mode)?;
    let mut rec = RunRecord {
        times: Vec::new(),
        tv: Vec::new(),
        min: Vec::new(),
        multistep_from: k,
        final_state: Vec::new(),
        error: None,
    };
    let mut hist = History::default();
    for (l, u) in init.into_iter().enumerate() {
        rec.sample(l as f64 * dt, &u);
        let mut f = vec![0.0; u.len()];
        problem.rhs(&u, &mut f);
        hist.push(u, f);
    }
    let rhs = |u: &[f64], out: &mut [f64]| problem.rhs(u, out);
    for n in 0..steps {
        let out = msrk_step(method, &hist, &rhs, dt)?;
        if out.state.iter().any(|v| !v.is_finite()) {
            return Err(MsrkError::NonFinite { step: n + 1 });
        }
        rec.sample((k - 1 + n + 1) as f64 * dt, &out.state);
        hist.advance(out.state, out.deriv);
    }
    rec.final_state = hist.latest().to_vec();
    Ok((rec, hist))
}

/// Runs to `tf`. A leftover shorter than `dt` is covered by a truncated step
/// for one-step methods and by small SSPRK(3,3) substeps otherwise, since a
/// multistep formula needs equally spaced history.
pub fn run(
    problem: &dyn SemiDiscretization,
    method: &MsrkMethod,
    dt: f64,
    tf: f64,
    mode: StartupMode,
) -> Result<RunRecord> {
    let k = method.steps();
    if !(tf > (k - 1) as f64 * dt) {
        return Err(MsrkError::Config(format!(
            "tf = {tf} must exceed the startup span (k-1) dt = {}",
            (k - 1) as f64 * dt
        )));
    }
    let span = tf - (k - 1) as f64 * dt;
    let full = ((span / dt) * (1.0 + 1e-12)).floor() as usize;
    let (mut rec, hist) = run_steps(problem, method, dt, full, mode)?;
    let rem = span - full as f64 * dt;
    if rem > 1e-12 * tf {
        let next = if k == 1 {
            let rhs = |u: &[f64], out: &mut [f64]| problem.rhs(u, out);
            msrk_step(method, &hist, &rhs, rem)?.state
        } else {
            let count = substep_count(rem, dt, method.claimed_order, problem.dt_fe());
            ssprk33_advance(problem, hist.latest(), rem, count)
        };
        if next.iter().any(|v| !v.is_finite()) {
            return Err(MsrkError::NonFinite { step: full + 1 });
        }
        rec.sample(tf, &next);
        rec.final_state = next;
    }
    if let Some(exact) = problem.exact(tf)? {
        let err = rec
            .final_state
            .iter()
            .zip(&exact)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        rec.error = Some(err);
    }
    Ok(rec)
}

/// SSPRK(3,3) solution at `tf` with `2^20` steps, checked against `2^21`
/// steps. Fails unless the two agree to `1e-10` in max norm.
pub fn reference_solution(problem: &dyn SemiDiscretization, tf: f64) -> Result<Vec<f64>> {
    if !(tf > 0.0) {
        return Err(MsrkError::Domain(format!(
            "reference solution needs tf > 0, got {tf}"
        )));
    }
    let u0 = problem.initial();
    let coarse = ssprk33_advance(problem, &u0, tf, 1 << 20);
    let fine = ssprk33_advance(problem, &u0, tf, 1 << 21);
    let diff = coarse
        .iter()
        .zip(&fine)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if !(diff <= 1e-10) {
        return Err(MsrkError::Accuracy {
            difference: diff,
            tolerance: 1e-10,
        });
    }
    Ok(fine)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::method::{forward_euler, ssprk33};
    use crate::pdelab::problems::{Advection, BuckleyLeverett, VanDerPol};
    use crate::theory::gen_second_order;
    use std::cell::Cell;

    /// `u' = lambda u` in one dimension.
    struct Linear(f64);

    impl SemiDiscretization for Linear {
        fn name(&self) -> &str {
            "linear"
        }
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, u: &[f64], out: &mut [f64]) {
            out[0] = self.0 * u[0];
        }
        fn dt_fe(&self) -> f64 {
            1.0
        }
        fn dx(&self) -> f64 {
            1.0
        }
        fn initial(&self) -> Vec<f64> {
            vec![1.0]
        }
        fn exact(&self, t: f64) -> Result<Option<Vec<f64>>> {
            Ok(Some(vec![(self.0 * t).exp()]))
        }
    }

    fn one_step_history(u: f64, lambda: f64) -> History {
        let mut h = History::default();
        h.push(vec![u], vec![lambda * u]);
        h
    }

    #[test]
    fn forward_euler_growth() {
        let rhs = |u: &[f64], out: &mut [f64]| out[0] = u[0];
        let out = msrk_step(&forward_euler(), &one_step_history(1.0, 1.0), &rhs, 0.1).unwrap();
        assert!((out.state[0] - 1.1).abs() < 1e-15);
    }

    #[test]
    fn ssprk33_matches_its_stability_polynomial() {
        let lambda = -1.7;
        let dt = 0.3;
        let rhs = |u: &[f64], out: &mut [f64]| out[0] = lambda * u[0];
        let out = msrk_step(&ssprk33(), &one_step_history(1.0, lambda), &rhs, dt).unwrap();
        let z: f64 = lambda * dt;
        let expected = 1.0 + z + z * z / 2.0 + z * z * z / 6.0;
        assert!((out.state[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_rhs_reduces_to_step_combination() {
        let m = gen_second_order(2, 2).unwrap();
        let rhs = |_: &[f64], out: &mut [f64]| out[0] = 0.0;
        let mut h = History::default();
        h.push(vec![3.0], vec![0.0]);
        h.push(vec![5.0], vec![0.0]);
        let out = msrk_step(&m, &h, &rhs, 0.2).unwrap();
        let expected = m.theta[0] * 3.0 + m.theta[1] * 5.0;
        assert!((out.state[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn history_length_is_checked() {
        let rhs = |_: &[f64], out: &mut [f64]| out[0] = 0.0;
        let err = msrk_step(
            &gen_second_order(2, 2).unwrap(),
            &one_step_history(1.0, 0.0),
            &rhs,
            0.1,
        );
        assert!(matches!(
            err,
            Err(MsrkError::History {
                expected: 2,
                found: 1
            })
        ));
    }

    #[test]
    fn exactly_s_rhs_calls_per_step() {
        for m in [ssprk33(), gen_second_order(5, 3).unwrap(), forward_euler()] {
            let calls = Cell::new(0);
            let rhs = |u: &[f64], out: &mut [f64]| {
                calls.set(calls.get() + 1);
                out[0] = -u[0];
            };
            let mut h = History::default();
            for _ in 0..m.steps() {
                h.push(vec![1.0], vec![-1.0]);
            }
            msrk_step(&m, &h, &rhs, 0.1).unwrap();
            assert_eq!(calls.get(), m.stages(), "{}", m.name);
        }
    }

    #[test]
    fn startup_modes() {
        let adv = Advection::default();
        let dt = adv.dx();
        let states = startup(&adv, dt, 3, 3, StartupMode::Exact).unwrap();
        assert_eq!(states.len(), 3);
        assert_eq!(states[2], adv.exact(2.0 * dt).unwrap().unwrap());
        assert_eq!(
            startup(&adv, dt, 1, 3, StartupMode::Exact).unwrap(),
            vec![adv.initial()]
        );
        let bl = BuckleyLeverett::default();
        assert!(matches!(
            startup(&bl, 0.001, 2, 2, StartupMode::Exact),
            Err(MsrkError::Config(_))
        ));
    }

    #[test]
    fn substep_size_follows_order() {
        // dt = 0.1, p = 6: substeps of at most 0.01, so at least 10 of them.
        assert!(substep_count(0.1, 0.1, 6, 1.0) >= 10);
        assert_eq!(substep_count(0.1, 0.1, 6, 1.0), 10);
        assert_eq!(substep_count(0.1, 0.1, 3, 1.0), 1);
        // Capped by the forward Euler step.
        assert_eq!(substep_count(0.1, 0.1, 3, 0.025), 4);
    }

    #[test]
    fn advection_stays_tvd_at_half_the_guaranteed_step() {
        let adv = Advection::default();
        for m in [ssprk33(), gen_second_order(3, 2).unwrap()] {
            let c = crate::spijker::method_ssp_coefficient(&m).unwrap();
            let rec = run(&adv, &m, 0.5 * c * adv.dt_fe(), 0.125, StartupMode::Exact).unwrap();
            assert!(rec.tvd_holds(m.steps(), 1e-12), "{}", m.name);
            assert!((rec.times.last().unwrap() - 0.125).abs() < 1e-14);
        }
    }

    #[test]
    fn ssprk33_advection_at_unit_cfl_has_nonincreasing_tv() {
        let adv = Advection::default();
        let rec = run(&adv, &ssprk33(), adv.dx(), 0.125, StartupMode::Exact).unwrap();
        assert!(rec.tv.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn buckley_leverett_conserves_mass() {
        let bl = BuckleyLeverett::default();
        let m = gen_second_order(2, 2).unwrap();
        let (rec, _) = run_steps(&bl, &m, bl.dt_fe(), 30, StartupMode::Rk3Substeps).unwrap();
        let mass0: f64 = bl.initial().iter().sum::<f64>() * bl.dx();
        let mass: f64 = rec.final_state.iter().sum::<f64>() * bl.dx();
        assert!((mass - mass0).abs() <= 31.0 * 1e-12);
    }

    #[test]
    fn second_order_error_ratio_on_van_der_pol() {
        let p = VanDerPol::default();
        let m = gen_second_order(2, 2).unwrap();
        let e1 = run(&p, &m, 0.1, 2.0, StartupMode::Exact)
            .unwrap()
            .error
            .unwrap();
        let e2 = run(&p, &m, 0.05, 2.0, StartupMode::Exact)
            .unwrap()
            .error
            .unwrap();
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.6, "{ratio}");
    }

    #[test]
    fn run_rejects_short_final_time() {
        let m = gen_second_order(2, 3).unwrap();
        assert!(run(&Linear(-1.0), &m, 0.5, 0.9, StartupMode::Exact).is_err());
    }

    #[test]
    fn partial_final_step_lands_on_tf() {
        let lin = Linear(-1.0);
        for m in [ssprk33(), gen_second_order(2, 2).unwrap()] {
            let rec = run(&lin, &m, 0.03, 1.0, StartupMode::Exact).unwrap();
            assert!((rec.times.last().unwrap() - 1.0).abs() < 1e-14);
            assert!(rec.error.unwrap() < 1e-3);
        }
    }

    #[test]
    fn reference_solution_of_linear_decay() {
        let u = reference_solution(&Linear(-1.0), 1.0).unwrap();
        assert!((u[0] - (-1.0f64).exp()).abs() < 1e-10);
        let tiny = reference_solution(&VanDerPol::default(), 1e-12).unwrap();
        assert!((tiny[0] - 0.5).abs() < 1e-12 && tiny[1].abs() < 1e-12);
    }

    #[test]
    fn reference_solution_self_check_at_four() {
        assert!(reference_solution(&VanDerPol::default(), 4.0).is_ok());
        assert!(reference_solution(&Linear(-1.0), 0.0).is_err());
    }

    #[test]
    fn divergence_is_reported_with_step() {
        let err = run_steps(
            &Linear(1e3),
            &forward_euler(),
            10.0,
            200,
            StartupMode::Exact,
        );
        assert!(matches!(err, Err(MsrkError::NonFinite { .. })));
    }
}
