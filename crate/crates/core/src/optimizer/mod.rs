//! Multistart search for MSRK methods with the largest SSP coefficient.
//!
//! The outer loop bisects on `r`. For a fixed `r` the question "is there a
//! method of order `p` whose canonical form at `r` is nonnegative?" becomes a
//! nonlinear least-squares problem: order residuals as equalities and the
//! entries of `P`, `R` and the coefficient bounds as hinged inequalities. A start
//! counts as feasible when its merit drops to `feas_tol^2`.

mod ladder;
mod lm;
mod pack;

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use ladder::{pad_stage, pad_step, warm_start_ladder, MethodArchive};
pub use lm::{merit, ConstraintFn, InnerOutcome, InnerSolver, LevenbergMarquardt};
pub use pack::{bounds, free_count, pack, unpack, Bound};

use crate::error::{MsrkError, Result};
use crate::method::MsrkMethod;
use crate::orderlab::{
    oracle_order_with, order_residual_vector, push_order_residuals, standard_problems,
    OracleContext, PolynomialOde,
};
use crate::par::Execution;
use crate::spijker::{build_spijker, canonical, ssp_coefficient};
use crate::theory::r_sk2;

/// Problems drawn for the search itself; certification uses fresh ones.
const SEARCH_PROBLEMS: usize = 2;
const CERTIFY_PROBLEMS: usize = 4;
const CERTIFY_TOL: f64 = 1e-8;
const CERTIFY_SEED_OFFSET: u64 = 0x5eed_0000_f00d;

#[derive(Debug, Clone)]
pub struct SearchSpec {
    pub s: usize,
    pub k: usize,
    pub p: usize,
    pub starts: usize,
    pub seed: u64,
    pub r_tol: f64,
    pub feas_tol: f64,
    pub max_inner_iters: usize,
    pub warm_starts: Vec<MsrkMethod>,
    pub exec: Execution,
}

impl SearchSpec {
    pub fn new(s: usize, k: usize, p: usize) -> Self {
        SearchSpec {
            s,
            k,
            p,
            starts: 10,
            seed: 0,
            r_tol: 1e-6,
            feas_tol: 1e-10,
            max_inner_iters: 500,
            warm_starts: Vec::new(),
            exec: Execution::default(),
        }
    }

    fn check(&self) -> Result<()> {
        if self.s == 0 || self.k == 0 {
            return Err(MsrkError::Config(format!(
                "need s, k >= 1, got s = {}, k = {}",
                self.s, self.k
            )));
        }
        if self.p == 0 || self.p > 12 {
            return Err(MsrkError::Config(format!(
                "order must be in 1..=12, got {}",
                self.p
            )));
        }
        if self.starts == 0 {
            return Err(MsrkError::Config("need at least one start".into()));
        }
        if !(self.r_tol > 0.0 && self.feas_tol > 0.0) {
            return Err(MsrkError::Config("tolerances must be positive".into()));
        }
        for m in &self.warm_starts {
            if m.stages() != self.s || m.steps() != self.k {
                return Err(MsrkError::Config(format!(
                    "warm start {} has shape ({},{}), expected ({},{})",
                    m.name,
                    m.stages(),
                    m.steps(),
                    self.s,
                    self.k
                )));
            }
        }
        Ok(())
    }

    /// Upper end of the bisection bracket.
    pub fn upper_bound(&self) -> f64 {
        let s = self.s as f64;
        if self.p >= 2 && self.k >= 2 {
            r_sk2(self.s, self.k).map_or(s, |r| r.min(s))
        } else {
            s
        }
    }
}

/// One local solve.
#[derive(Debug, Clone, PartialEq)]
pub struct StartRecord {
    pub round: usize,
    pub start: usize,
    pub r: f64,
    pub merit: f64,
    pub iterations: usize,
    pub feasible: bool,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub method: MsrkMethod,
    pub c: f64,
    pub c_eff: f64,
    /// Largest `r` at which the inner problem was solved.
    pub r_best: f64,
    /// Euclidean norm of the order residuals on the search problems.
    pub residual_norm: f64,
    pub certified: bool,
    pub oracle_order: usize,
    pub history: Vec<StartRecord>,
}

/// Equality residuals and inequality violations (`>= 0`, zero when
/// satisfied) of `method` at `r`.
pub fn constraint_residuals(
    method: &MsrkMethod,
    r: f64,
    p: usize,
    problems: &[PolynomialOde],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if let Some(v) = method.validate().first_structural() {
        return Err(MsrkError::InvalidMethod(v.to_string()));
    }
    if r.is_nan() || r < 0.0 {
        return Err(MsrkError::Domain(format!("r must be nonnegative, got {r}")));
    }
    let eq = order_residual_vector(method, p, problems);
    let mut g = Vec::new();
    push_inequalities(method, r, &mut g);
    Ok((eq, g.into_iter().map(|v| (-v).max(0.0)).collect()))
}

/// Appends every inequality `g >= 0`: entries of `P` and `R` at `r` and the
/// coefficient bounds.
fn push_inequalities(m: &MsrkMethod, r: f64, out: &mut Vec<f64>) {
    let sp = build_spijker(m);
    let cf = canonical(&sp, r).expect("r checked by caller");
    let n = cf.p.nrows();
    for i in 0..n {
        for j in 0..i {
            out.push(cf.p[(i, j)]);
        }
        for j in 0..cf.r_mat.ncols() {
            out.push(cf.r_mat[(i, j)]);
        }
    }
    let unit = |v: f64, out: &mut Vec<f64>| {
        out.push(v);
        out.push(1.0 - v);
    };
    let (s, k) = (m.stages(), m.steps());
    for i in 1..s {
        for l in 0..k {
            unit(m.d[(i, l)], out);
        }
        out.extend((0..k - 1).map(|l| m.ahat[(i, l)]));
        out.extend((0..i).map(|j| m.a[(i, j)]));
    }
    for &t in m.theta.iter() {
        unit(t, out);
    }
    out.extend(m.bhat.iter().copied());
    out.extend(m.b.iter().copied());
}

struct Subproblem<'a> {
    s: usize,
    k: usize,
    p: usize,
    r: f64,
    ctx: &'a OracleContext,
}

impl Subproblem<'_> {
    fn eval(&self, x: &[f64], eq: &mut Vec<f64>, ineq: &mut Vec<f64>) {
        eq.clear();
        ineq.clear();
        let m = unpack(x, self.s, self.k).expect("solver keeps the vector length");
        push_order_residuals(&m, self.p, self.ctx, eq);
        push_inequalities(&m, self.r, ineq);
    }
}

fn random_start(spec: &SearchSpec, round: usize, index: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(((round as u64) << 32) | index as u64);
    let hi = 2.0 / spec.s as f64;
    bounds(spec.s, spec.k)
        .into_iter()
        .map(|b| match b {
            Bound::Unit => rng.gen_range(0.0..1.0),
            Bound::NonNegative => rng.gen_range(0.0..hi),
        })
        .collect()
}

struct Searcher<'a> {
    spec: &'a SearchSpec,
    solver: &'a dyn InnerSolver,
    ctx: OracleContext,
    history: Vec<StartRecord>,
}

impl Searcher<'_> {
    /// Runs warm starts, then random ones, in batches. Returns the
    /// lowest-index feasible point, or the best merit seen.
    fn solve_at(
        &mut self,
        r: f64,
        round: usize,
        warm: &[Vec<f64>],
    ) -> std::result::Result<Vec<f64>, f64> {
        let spec = self.spec;
        let total = warm.len() + spec.starts;
        let target = (0.01 * spec.feas_tol).powi(2);
        let feasible = spec.feas_tol * spec.feas_tol;
        let sub = Subproblem {
            s: spec.s,
            k: spec.k,
            p: spec.p,
            r,
            ctx: &self.ctx,
        };
        let f = |x: &[f64], eq: &mut Vec<f64>, ineq: &mut Vec<f64>| sub.eval(x, eq, ineq);
        let width = spec.exec.width();
        let mut best = f64::INFINITY;
        let mut next = 0;
        while next < total {
            let batch: Vec<usize> = (next..(next + width).min(total)).collect();
            next += batch.len();
            let outcomes = spec.exec.map(&batch, |_, &i| {
                let x0 = if i < warm.len() {
                    warm[i].clone()
                } else {
                    random_start(spec, round, i - warm.len())
                };
                self.solver.solve(&f, &x0, target)
            });
            let mut found = None;
            for (&i, out) in batch.iter().zip(outcomes) {
                let ok = out.merit <= feasible;
                self.history.push(StartRecord {
                    round,
                    start: i,
                    r,
                    merit: out.merit,
                    iterations: out.iterations,
                    feasible: ok,
                });
                best = best.min(out.merit);
                if ok && found.is_none() {
                    found = Some(out.x);
                }
            }
            if let Some(x) = found {
                return Ok(x);
            }
        }
        Err(best)
    }
}

fn coefficient(m: &MsrkMethod) -> f64 {
    ssp_coefficient(&build_spijker(m))
}

/// Snaps coordinates within `1e-9` outside their bounds back onto them.
fn polish(x: &[f64], s: usize, k: usize) -> MsrkMethod {
    let snapped: Vec<f64> = x
        .iter()
        .zip(bounds(s, k))
        .map(|(&v, b)| {
            if (-1e-9..0.0).contains(&v) {
                0.0
            } else if b == Bound::Unit && v > 1.0 && v < 1.0 + 1e-9 {
                1.0
            } else {
                v
            }
        })
        .collect();
    let mut m = unpack(&snapped, s, k).expect("length preserved");
    for i in 1..s {
        if (-1e-12..0.0).contains(&m.d[(i, k - 1)]) {
            m.d[(i, k - 1)] = 0.0;
        }
    }
    if (-1e-12..0.0).contains(&m.theta[k - 1]) {
        m.theta[k - 1] = 0.0;
    }
    m
}

/// Single inner problem at a fixed `r`: the first start (warm starts, then
/// random ones) that reaches the feasibility threshold, plus the start log.
pub fn feasible_at(spec: &SearchSpec, r: f64) -> Result<(Option<MsrkMethod>, Vec<StartRecord>)> {
    spec.check()?;
    if r.is_nan() || r < 0.0 {
        return Err(MsrkError::Domain(format!("r must be nonnegative, got {r}")));
    }
    let solver = LevenbergMarquardt {
        max_iters: spec.max_inner_iters,
        ..LevenbergMarquardt::default()
    };
    let problems = standard_problems(spec.p, SEARCH_PROBLEMS, spec.seed);
    let mut searcher = Searcher {
        spec,
        solver: &solver,
        ctx: OracleContext::new(&problems, spec.k, spec.p),
        history: Vec::new(),
    };
    let warm: Vec<Vec<f64>> = spec.warm_starts.iter().map(pack).collect();
    let found = searcher.solve_at(r, 0, &warm).ok();
    let method = found.map(|x| unpack(&x, spec.s, spec.k)).transpose()?;
    Ok((method, searcher.history))
}

pub fn maximize_ssp(spec: &SearchSpec) -> Result<SearchResult> {
    let solver = LevenbergMarquardt {
        max_iters: spec.max_inner_iters,
        ..LevenbergMarquardt::default()
    };
    maximize_ssp_with(spec, &solver)
}

pub fn maximize_ssp_with(spec: &SearchSpec, solver: &dyn InnerSolver) -> Result<SearchResult> {
    spec.check()?;
    let (s, k, p) = (spec.s, spec.k, spec.p);
    let problems = standard_problems(p, SEARCH_PROBLEMS, spec.seed);
    let mut searcher = Searcher {
        spec,
        solver,
        ctx: OracleContext::new(&problems, k, p),
        history: Vec::new(),
    };
    let warm: Vec<Vec<f64>> = spec.warm_starts.iter().map(pack).collect();

    let mut best = match searcher.solve_at(0.0, 0, &warm) {
        Ok(x) => x,
        Err(merit) => {
            return Err(MsrkError::Infeasible {
                s,
                k,
                p,
                reason: format!(
                    "no start reached merit {:.1e} at r = 0 (best {merit:.3e} over {} starts)",
                    spec.feas_tol * spec.feas_tol,
                    warm.len() + spec.starts
                ),
            })
        }
    };
    let upper = spec.upper_bound();
    let mut lo = coefficient(&unpack(&best, s, k)?).min(upper);
    let mut r_best = 0.0f64.max(lo);
    let mut hi = upper;
    let mut round = 0;
    while hi - lo > spec.r_tol {
        round += 1;
        let mid = 0.5 * (lo + hi);
        let mut seeds = vec![best.clone()];
        seeds.extend(warm.iter().cloned());
        match searcher.solve_at(mid, round, &seeds) {
            Ok(x) => {
                let c = coefficient(&unpack(&x, s, k)?);
                best = x;
                r_best = mid;
                lo = mid.max(c);
            }
            Err(_) => hi = mid,
        }
    }

    let raw = unpack(&best, s, k)?;
    let polished = polish(&best, s, k);
    let c_raw = coefficient(&raw);
    let c_pol = coefficient(&polished);
    let mut method = if polished.validate().is_empty() && c_pol >= c_raw - 1e-9 {
        polished
    } else {
        raw
    };
    method.name = format!("SSP-MSRK({s},{k},{p})");
    method.claimed_order = p;
    let c = coefficient(&method);
    if c < spec.r_tol {
        return Err(MsrkError::Infeasible {
            s,
            k,
            p,
            reason: format!("order conditions are solvable but no method with positive SSP coefficient was found (C = {c:.3e})"),
        });
    }
    let eq = order_residual_vector(&method, p, &problems);
    let residual_norm = eq.iter().map(|v| v * v).sum::<f64>().sqrt();
    let order = oracle_order_with(
        &method,
        p,
        CERTIFY_PROBLEMS,
        spec.seed.wrapping_add(CERTIFY_SEED_OFFSET),
        CERTIFY_TOL,
        spec.exec,
    )?;
    let certified = method.validate().is_empty() && order >= p && c >= r_best - 1e-6;
    Ok(SearchResult {
        c_eff: c / s as f64,
        method,
        c,
        r_best,
        residual_norm,
        certified,
        oracle_order: order,
        history: searcher.history,
    })
}

/// Writes the per-start log as CSV (`start,r,merit,iterations`).
pub fn write_search_log(history: &[StartRecord], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "start,r,merit,iterations")?;
    for h in history {
        writeln!(
            w,
            "{},{:.12e},{:.6e},{}",
            h.start, h.r, h.merit, h.iterations
        )?;
    }
    Ok(())
}

/// For each fixed `(k, p)`, pairs `(s, s')` with `s < s'` where the larger
/// stage count reported a smaller coefficient. Entries are `(s, k, p, C)`.
pub fn monotonicity_violations(results: &[(usize, usize, usize, f64)]) -> Vec<String> {
    let mut out = Vec::new();
    for (i, &(s1, k1, p1, c1)) in results.iter().enumerate() {
        for &(s2, k2, p2, c2) in &results[i + 1..] {
            if k1 != k2 || p1 != p2 || s1 == s2 {
                continue;
            }
            let ((sa, ca), (sb, cb)) = if s1 < s2 {
                ((s1, c1), (s2, c2))
            } else {
                ((s2, c2), (s1, c1))
            };
            if cb < ca - 1e-9 {
                out.push(format!(
                    "k = {k1}, p = {p1}: C({sb}) = {cb:.6} < C({sa}) = {ca:.6}"
                ));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::method::ssprk33;
    use crate::theory::gen_second_order;

    fn max(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    #[test]
    fn known_feasible_point() {
        let m = gen_second_order(4, 3).unwrap();
        let r = r_sk2(4, 3).unwrap();
        let (eq, ineq) = constraint_residuals(&m, r, 2, &standard_problems(2, 2, 1)).unwrap();
        assert!(max(&eq) <= 1e-10, "{}", max(&eq));
        assert!(max(&ineq) <= 1e-10, "{}", max(&ineq));
        let (_, ineq) = constraint_residuals(&m, r + 0.1, 2, &standard_problems(2, 2, 1)).unwrap();
        assert!(max(&ineq) > 1e-6);
    }

    #[test]
    fn ssprk33_is_feasible_at_one() {
        let (eq, ineq) =
            constraint_residuals(&ssprk33(), 1.0, 3, &standard_problems(3, 2, 4)).unwrap();
        assert!(max(&eq) <= 1e-10 && max(&ineq) <= 1e-10);
    }

    #[test]
    fn inequality_vector_is_nonnegative() {
        let (_, ineq) = constraint_residuals(
            &gen_second_order(3, 2).unwrap(),
            3.0,
            2,
            &standard_problems(2, 2, 1),
        )
        .unwrap();
        assert!(ineq.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn spec_checks() {
        let mut spec = SearchSpec::new(2, 2, 0);
        assert!(matches!(maximize_ssp(&spec), Err(MsrkError::Config(_))));
        spec.p = 2;
        spec.starts = 0;
        assert!(maximize_ssp(&spec).is_err());
        spec.starts = 1;
        spec.warm_starts.push(ssprk33());
        assert!(matches!(maximize_ssp(&spec), Err(MsrkError::Config(_))));
    }

    #[test]
    fn second_order_two_stage_two_step() {
        let spec = SearchSpec {
            seed: 7,
            ..SearchSpec::new(2, 2, 2)
        };
        let res = maximize_ssp(&spec).unwrap();
        assert!((res.c - 2f64.sqrt()).abs() < 1e-3, "{}", res.c);
        assert!(res.certified);
        assert!((res.c_eff - res.c / 2.0).abs() < 1e-15);
    }

    #[test]
    fn search_is_deterministic_across_execution_modes() {
        let base = SearchSpec {
            seed: 3,
            starts: 4,
            ..SearchSpec::new(2, 2, 3)
        };
        let a = maximize_ssp(&SearchSpec {
            exec: Execution::Sequential,
            ..base.clone()
        })
        .unwrap();
        let b = maximize_ssp(&SearchSpec {
            exec: Execution::Parallel,
            ..base.clone()
        })
        .unwrap();
        let c = maximize_ssp(&SearchSpec {
            exec: Execution::Sequential,
            ..base
        })
        .unwrap();
        assert_eq!(pack(&a.method), pack(&b.method));
        assert_eq!(pack(&a.method), pack(&c.method));
    }

    #[test]
    fn log_has_header_and_rows() {
        let rec = StartRecord {
            round: 0,
            start: 2,
            r: 0.5,
            merit: 1e-3,
            iterations: 7,
            feasible: false,
        };
        let mut buf = Vec::new();
        write_search_log(&[rec], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("start,r,merit,iterations\n2,"));
    }

    #[test]
    fn flags_stage_monotonicity_breaks() {
        let flags = monotonicity_violations(&[
            (2, 2, 3, 0.7),
            (3, 2, 3, 0.6),
            (4, 2, 3, 1.7),
            (3, 3, 3, 0.1),
        ]);
        assert_eq!(flags.len(), 1);
        assert!(flags[0].contains("C(3)"));
    }
}
