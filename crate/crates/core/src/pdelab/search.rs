//! Observed step-size limits for total variation and positivity.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{MsrkError, Result};
use crate::method::MsrkMethod;
use crate::par::Execution;
use crate::spijker::method_ssp_coefficient;

use super::problems::SemiDiscretization;
use super::stepper::{run_steps, StartupMode};

/// Absolute slack for rounding in the pass criteria.
pub const MONITOR_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Property {
    Tvd,
    Positivity,
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Property::Tvd => "tvd",
            Property::Positivity => "positivity",
        })
    }
}

impl FromStr for Property {
    type Err = MsrkError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tvd" => Ok(Property::Tvd),
            "positivity" => Ok(Property::Positivity),
            other => Err(MsrkError::Config(format!("unknown property {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StepSearchConfig {
    pub tf: f64,
    /// Bisection stops at this width; `None` means `0.001 dt_fe`.
    pub resolution: Option<f64>,
    pub startup: StartupMode,
    /// Upper end of the bracket in units of `dt_fe`.
    pub max_factor: f64,
}

impl StepSearchConfig {
    pub fn new(tf: f64, startup: StartupMode) -> Self {
        StepSearchConfig {
            tf,
            resolution: None,
            startup,
            max_factor: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepSearchResult {
    pub property: Property,
    pub dt_max: f64,
    /// `dt_max / dx`.
    pub normalized: f64,
    /// `C dt_fe`.
    pub theoretical: f64,
    pub resolution: f64,
    /// Passed at the top of the bracket.
    pub bracket_hit: bool,
    /// Failed even at the smallest step tried.
    pub failed_at_zero: bool,
}

/// Number of full steps covering `tf` after startup.
fn step_count(tf: f64, dt: f64, k: usize) -> usize {
    let total = ((tf / dt) * (1.0 - 1e-12)).ceil() as usize;
    total.saturating_sub(k - 1).max(1)
}

/// Runs full steps of size `dt` and checks `property` at every multistep step.
pub fn property_holds(
    problem: &dyn SemiDiscretization,
    method: &MsrkMethod,
    property: Property,
    dt: f64,
    cfg: &StepSearchConfig,
) -> Result<bool> {
    let k = method.steps();
    let n = step_count(cfg.tf, dt, k);
    let rec = match run_steps(problem, method, dt, n, cfg.startup) {
        Ok((rec, _)) => rec,
        Err(MsrkError::NonFinite { .. }) => return Ok(false),
        Err(e) => return Err(e),
    };
    Ok(match property {
        Property::Tvd => rec.tvd_holds(k, MONITOR_SLACK),
        Property::Positivity => rec.positivity_holds(MONITOR_SLACK),
    })
}

/// Bisection on `dt` over `[0, max_factor dt_fe]` for the largest step at
/// which `property` holds throughout a run to `tf`.
pub fn max_stable_step(
    problem: &dyn SemiDiscretization,
    method: &MsrkMethod,
    property: Property,
    cfg: &StepSearchConfig,
) -> Result<StepSearchResult> {
    let dt_fe = problem.dt_fe();
    let resolution = cfg.resolution.unwrap_or(1e-3 * dt_fe);
    if !(resolution > 0.0) {
        return Err(MsrkError::Config(format!(
            "resolution must be positive, got {resolution}"
        )));
    }
    let c = method_ssp_coefficient(method)?;
    let mut lo = 0.0;
    let mut hi = cfg.max_factor * dt_fe;
    let bracket_hit = property_holds(problem, method, property, hi, cfg)?;
    if bracket_hit {
        lo = hi;
    } else {
        while hi - lo > resolution {
            let mid = 0.5 * (lo + hi);
            if property_holds(problem, method, property, mid, cfg)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    Ok(StepSearchResult {
        property,
        dt_max: lo,
        normalized: lo / problem.dx(),
        theoretical: c * dt_fe,
        resolution,
        bracket_hit,
        failed_at_zero: lo == 0.0,
    })
}

/// One row of the step-size comparison table, all normalized by `dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTableRow {
    pub label: String,
    pub s: usize,
    pub dt_tvd: f64,
    pub theory: f64,
    pub dt_pos: f64,
}

/// Quotes a CSV field that contains a comma or quote.
pub fn csv_field(text: &str) -> String {
    if text.contains([',', '"']) {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}

impl StepTableRow {
    pub const HEADER: &'static str =
        "method,dt_tvd/dx,dt_tvd/(s*dx),C*dt_fe/dx,C_eff*dt_fe/dx,dt_pos/dx,dt_pos/(s*dx)";

    pub fn csv(&self) -> String {
        let s = self.s as f64;
        format!(
            "{},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3}",
            csv_field(&self.label),
            self.dt_tvd,
            self.dt_tvd / s,
            self.theory,
            self.theory / s,
            self.dt_pos,
            self.dt_pos / s
        )
    }
}

pub fn step_table_row(
    problem: &dyn SemiDiscretization,
    method: &MsrkMethod,
    cfg: &StepSearchConfig,
) -> Result<StepTableRow> {
    let tvd = max_stable_step(problem, method, Property::Tvd, cfg)?;
    let pos = max_stable_step(problem, method, Property::Positivity, cfg)?;
    Ok(StepTableRow {
        label: method.label(),
        s: method.stages(),
        dt_tvd: tvd.normalized,
        theory: tvd.theoretical / problem.dx(),
        dt_pos: pos.normalized,
    })
}

/// Table rows for several methods, one independent search each.
pub fn step_table(
    problem: &dyn SemiDiscretization,
    methods: &[MsrkMethod],
    cfg: &StepSearchConfig,
    exec: Execution,
) -> Result<Vec<StepTableRow>> {
    exec.map(methods, |_, m| step_table_row(problem, m, cfg))
        .into_iter()
        .collect()
}

pub fn write_step_table(rows: &[StepTableRow], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "{}", StepTableRow::HEADER)?;
    for r in rows {
        writeln!(w, "{}", r.csv())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::method::ssprk33;
    use crate::pdelab::problems::{Advection, BuckleyLeverett};
    use crate::theory::gen_second_order;

    #[test]
    fn full_step_counts() {
        assert_eq!(step_count(1.0, 0.1, 1), 10);
        assert_eq!(step_count(1.0, 0.3, 1), 4);
        assert_eq!(step_count(1.0, 0.1, 3), 8);
        assert_eq!(step_count(0.1, 1.0, 3), 1);
    }

    #[test]
    fn ssprk33_advection_tvd_limit_is_one() {
        let adv = Advection::default();
        let cfg = StepSearchConfig::new(0.125, StartupMode::Exact);
        let res = max_stable_step(&adv, &ssprk33(), Property::Tvd, &cfg).unwrap();
        assert!((res.normalized - 1.0).abs() <= 0.02, "{}", res.normalized);
        assert!(!res.bracket_hit && !res.failed_at_zero);
    }

    #[test]
    fn second_order_family_meets_its_bound_on_advection() {
        let adv = Advection::default();
        let cfg = StepSearchConfig::new(0.125, StartupMode::Exact);
        let res =
            max_stable_step(&adv, &gen_second_order(2, 2).unwrap(), Property::Tvd, &cfg).unwrap();
        assert!(
            res.dt_max >= 2f64.sqrt() * adv.dx() - res.resolution,
            "{res:?}"
        );
    }

    #[test]
    fn positivity_step_not_below_tvd_step_on_buckley_leverett() {
        let bl = BuckleyLeverett::default();
        let cfg = StepSearchConfig::new(0.125, StartupMode::Rk3Substeps);
        let row = step_table_row(&bl, &gen_second_order(2, 2).unwrap(), &cfg).unwrap();
        assert!(row.dt_pos >= row.dt_tvd, "{row:?}");
    }

    #[test]
    fn table_csv_shape() {
        let row = StepTableRow {
            label: "(3,1,3)".into(),
            s: 3,
            dt_tvd: 1.0,
            theory: 1.0,
            dt_pos: 1.028,
        };
        let mut buf = Vec::new();
        write_step_table(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().nth(1).unwrap(),
            "\"(3,1,3)\",1.000,0.333,1.000,0.333,1.028,0.343"
        );
    }

    #[test]
    fn csv_fields_are_quoted_when_needed() {
        assert_eq!(csv_field("SSPRK33"), "SSPRK33");
        assert_eq!(csv_field("a\"b,c"), "\"a\"\"b,c\"");
    }

    #[test]
    fn property_names_parse() {
        assert_eq!("tvd".parse::<Property>().unwrap(), Property::Tvd);
        assert!("speed".parse::<Property>().is_err());
    }
}
