//! Test problems as semi-discretizations `u' = F(u)`.

use crate::error::Result;

use super::stepper::reference_solution;

pub trait SemiDiscretization: Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    /// Writes `F(u)` into `out`.
    fn rhs(&self, u: &[f64], out: &mut [f64]);
    /// Largest forward Euler step keeping the monitored properties.
    fn dt_fe(&self) -> f64;
    /// Grid spacing used to normalize step sizes (1 for ODEs).
    fn dx(&self) -> f64;
    fn initial(&self) -> Vec<f64>;
    /// Exact or high-accuracy reference state at `t`, if known.
    fn exact(&self, t: f64) -> Result<Option<Vec<f64>>>;
}

/// `u1' = u2`, `u2' = (-u1 + (1 - u1^2) u2) / eps`.
#[derive(Debug, Clone)]
pub struct VanDerPol {
    pub eps: f64,
    pub u0: [f64; 2],
}

impl VanDerPol {
    pub fn new(eps: f64) -> Self {
        assert!(eps > 0.0, "van der Pol needs eps > 0");
        VanDerPol {
            eps,
            u0: [0.5, 0.0],
        }
    }
}

impl Default for VanDerPol {
    fn default() -> Self {
        Self::new(10.0)
    }
}

impl SemiDiscretization for VanDerPol {
    fn name(&self) -> &str {
        "vdp"
    }
    fn dim(&self) -> usize {
        2
    }
    fn rhs(&self, u: &[f64], out: &mut [f64]) {
        out[0] = u[1];
        out[1] = (-u[0] + (1.0 - u[0] * u[0]) * u[1]) / self.eps;
    }
    fn dt_fe(&self) -> f64 {
        1.0
    }
    fn dx(&self) -> f64 {
        1.0
    }
    fn initial(&self) -> Vec<f64> {
        self.u0.to_vec()
    }
    fn exact(&self, t: f64) -> Result<Option<Vec<f64>>> {
        if t == 0.0 {
            return Ok(Some(self.initial()));
        }
        reference_solution(self, t).map(Some)
    }
}

/// First-order upwind discretization of `u_t + u_x = 0` on a periodic grid
/// of `n` cells over `[0, 1)`, with a step initial condition.
#[derive(Debug, Clone)]
pub struct Advection {
    pub n: usize,
}

impl Advection {
    pub fn new(n: usize) -> Self {
        assert!(n >= 3, "advection grid needs at least 3 points");
        Advection { n }
    }

    fn step(x: f64) -> f64 {
        if x <= 0.5 {
            1.0
        } else {
            0.0
        }
    }
}

impl Default for Advection {
    fn default() -> Self {
        Self::new(101)
    }
}

impl SemiDiscretization for Advection {
    fn name(&self) -> &str {
        "advection"
    }
    fn dim(&self) -> usize {
        self.n
    }
    fn rhs(&self, u: &[f64], out: &mut [f64]) {
        let inv = self.n as f64;
        let n = self.n;
        for j in 0..n {
            let left = u[(j + n - 1) % n];
            out[j] = -(u[j] - left) * inv;
        }
    }
    fn dt_fe(&self) -> f64 {
        self.dx()
    }
    fn dx(&self) -> f64 {
        1.0 / self.n as f64
    }
    fn initial(&self) -> Vec<f64> {
        (0..self.n)
            .map(|j| Self::step(j as f64 * self.dx()))
            .collect()
    }
    fn exact(&self, t: f64) -> Result<Option<Vec<f64>>> {
        let dx = self.dx();
        Ok(Some(
            (0..self.n)
                .map(|j| Self::step((j as f64 * dx - t).rem_euclid(1.0)))
                .collect(),
        ))
    }
}

/// Conservative flux-limited scheme for `u_t + f(u)_x = 0` with the
/// Buckley-Leverett flux, Koren limiter and upwind interface flux.
#[derive(Debug, Clone)]
pub struct BuckleyLeverett {
    pub n: usize,
    pub a: f64,
}

impl BuckleyLeverett {
    pub fn new(n: usize, a: f64) -> Self {
        assert!(n >= 3 && a > 0.0, "Buckley-Leverett needs n >= 3 and a > 0");
        BuckleyLeverett { n, a }
    }

    pub fn flux(&self, u: f64) -> f64 {
        let u2 = u * u;
        let v = 1.0 - u;
        u2 / (u2 + self.a * v * v)
    }

    pub fn flux_derivative(&self, u: f64) -> f64 {
        let v = 1.0 - u;
        let den = u * u + self.a * v * v;
        2.0 * self.a * u * v / (den * den)
    }

    /// Forward Euler step that is provably TVD for the limited scheme,
    /// `dx / (2 max f')` with the maximum taken over `[0, 1]`. It is smaller
    /// than [`SemiDiscretization::dt_fe`], which follows the conventional
    /// `dx / 4`.
    pub fn limiter_dt_fe(&self) -> f64 {
        let max_speed = (0..=100_000)
            .map(|i| self.flux_derivative(i as f64 * 1e-5))
            .fold(0.0, f64::max);
        self.dx() / (2.0 * max_speed)
    }
}

impl Default for BuckleyLeverett {
    fn default() -> Self {
        Self::new(100, 1.0 / 3.0)
    }
}

/// `max(0, min(2 theta, (1 + 2 theta) / 3, 2))`.
pub fn koren(theta: f64) -> f64 {
    (2.0 * theta)
        .min((1.0 + 2.0 * theta) / 3.0)
        .min(2.0)
        .max(0.0)
}

const LIMITER_GUARD: f64 = 1e-14;

impl SemiDiscretization for BuckleyLeverett {
    fn name(&self) -> &str {
        "buckley"
    }
    fn dim(&self) -> usize {
        self.n
    }
    fn rhs(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n;
        // flux[j] is the flux through the right face of cell j.
        let flux: Vec<f64> = (0..n)
            .map(|j| {
                let um = u[(j + n - 1) % n];
                let up = u[(j + 1) % n];
                let jump = up - u[j];
                let phi = if jump.abs() < LIMITER_GUARD {
                    0.0
                } else {
                    koren((u[j] - um) / jump)
                };
                self.flux(u[j] + 0.5 * phi * jump)
            })
            .collect();
        let inv = 1.0 / self.dx();
        for j in 0..n {
            out[j] = -(flux[j] - flux[(j + n - 1) % n]) * inv;
        }
    }
    fn dt_fe(&self) -> f64 {
        0.25 * self.dx()
    }
    fn dx(&self) -> f64 {
        1.0 / self.n as f64
    }
    fn initial(&self) -> Vec<f64> {
        (0..self.n)
            .map(|j| {
                if j as f64 * self.dx() >= 0.5 {
                    0.5
                } else {
                    0.0
                }
            })
            .collect()
    }
    fn exact(&self, _t: f64) -> Result<Option<Vec<f64>>> {
        Ok(None)
    }
}

/// Looks up a problem by its command-line name.
pub fn by_name(name: &str) -> Option<Box<dyn SemiDiscretization>> {
    match name {
        "vdp" => Some(Box::new(VanDerPol::default())),
        "advection" => Some(Box::new(Advection::default())),
        "buckley" => Some(Box::new(BuckleyLeverett::default())),
        _ => None,
    }
}
