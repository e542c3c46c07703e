//! Error-versus-step convergence studies.

use std::io::Write;

use crate::error::{MsrkError, Result};
use crate::method::MsrkMethod;
use crate::orderlab::convergence_order;
use crate::par::Execution;

use super::problems::SemiDiscretization;
use super::stepper::{run, StartupMode};

/// Grid sizes of the van der Pol study; the step is `tf / (N - 1)`.
pub const VDP_GRID: [usize; 8] = [15, 19, 23, 27, 31, 35, 39, 43];

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    /// `(dt, error)` with `dt` decreasing.
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
}

pub fn convergence_study(
    problem: &dyn SemiDiscretization,
    method: &MsrkMethod,
    tf: f64,
    grid: &[usize],
    mode: StartupMode,
    exec: Execution,
) -> Result<ConvergenceStudy> {
    if grid.iter().any(|&n| n < 2) {
        return Err(MsrkError::Config("grid sizes must be at least 2".into()));
    }
    let mut sizes = grid.to_vec();
    sizes.sort_unstable();
    sizes.dedup();
    let errors = exec.map(&sizes, |_, &n| {
        let dt = tf / (n - 1) as f64;
        let rec = run(problem, method, dt, tf, mode)?;
        let err = rec.error.ok_or_else(|| {
            MsrkError::Config(format!("problem {} has no exact solution", problem.name()))
        })?;
        Ok((dt, err))
    });
    let points = errors.into_iter().collect::<Result<Vec<_>>>()?;
    let slope = convergence_order(&points)?;
    Ok(ConvergenceStudy { points, slope })
}

/// `dt,error` rows followed by a `slope` row.
pub fn write_convergence(study: &ConvergenceStudy, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "dt,error")?;
    for (dt, e) in &study.points {
        writeln!(w, "{dt:.12e},{e:.6e}")?;
    }
    writeln!(w, "slope,{:.4}", study.slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::method::ssprk33;
    use crate::pdelab::problems::VanDerPol;
    use crate::theory::gen_second_order;

    #[test]
    fn van_der_pol_slopes() {
        let vdp = VanDerPol::default();
        for (m, p) in [(gen_second_order(2, 2).unwrap(), 2.0), (ssprk33(), 3.0)] {
            let st = convergence_study(
                &vdp,
                &m,
                4.0,
                &VDP_GRID,
                StartupMode::Exact,
                Execution::Sequential,
            )
            .unwrap();
            assert!((st.slope - p).abs() <= 0.3, "{} slope {}", m.name, st.slope);
            assert!(st.points.windows(2).all(|w| w[1].0 < w[0].0));
        }
    }

    #[test]
    fn csv_ends_with_slope() {
        let st = ConvergenceStudy {
            points: vec![(0.1, 1e-3)],
            slope: 2.0,
        };
        let mut buf = Vec::new();
        write_convergence(&st, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().ends_with("slope,2.0000\n"));
    }
}
