//! Running MSRK methods on test problems: van der Pol, linear advection and
//! Buckley-Leverett, with total variation and positivity monitors.

mod convergence;
mod problems;
mod search;
mod stepper;

use std::io::Write;

pub use convergence::{convergence_study, write_convergence, ConvergenceStudy, VDP_GRID};
pub use problems::{by_name, koren, Advection, BuckleyLeverett, SemiDiscretization, VanDerPol};
pub use search::{
    csv_field, max_stable_step, property_holds, step_table, step_table_row, write_step_table,
    Property, StepSearchConfig, StepSearchResult, StepTableRow, MONITOR_SLACK,
};
pub use stepper::{
    msrk_step, reference_solution, run, run_steps, startup, substep_count, History, RunRecord,
    StartupMode, StepOutput,
};

/// Periodic total variation `sum_j |u_{j+1} - u_j|`, including the wrap.
pub fn tv_seminorm(u: &[f64]) -> f64 {
    let n = u.len();
    (0..n).map(|j| (u[(j + 1) % n] - u[j]).abs()).sum()
}

pub fn positivity_min(u: &[f64]) -> f64 {
    u.iter().copied().fold(f64::INFINITY, f64::min)
}

/// `t,tv,min` per sample.
pub fn write_run(rec: &RunRecord, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "t,tv,min")?;
    for i in 0..rec.times.len() {
        writeln!(
            w,
            "{:.12e},{:.12e},{:.12e}",
            rec.times[i], rec.tv[i], rec.min[i]
        )?;
    }
    Ok(())
}
