//! Coefficient form of explicit multistep Runge-Kutta (MSRK) methods.
//!
//! An `s`-stage, `k`-step method advances `u^n` using the `k` most recent
//! steps `u^{n-k+1}, ..., u^n`:
//!
//! ```text
//! y_1 = u^n
//! y_i = sum_l d_il u^{n-k+l} + dt sum_l ahat_il F(u^{n-k+l}) + dt sum_{j<i} a_ij F(y_j)
//! u^{n+1} = sum_l theta_l u^{n-k+l} + dt sum_l bhat_l F(u^{n-k+l}) + dt sum_j b_j F(y_j)
//! ```
//!
//! where the `ahat`/`bhat` sums run over the `k-1` older steps only.

use std::fmt;

use nalgebra::{DMatrix, DVector};

const CONSISTENCY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MsrkMethod {
    pub name: String,
    pub claimed_order: usize,
    /// `s x k` step weights.
    pub d: DMatrix<f64>,
    /// `s x (k-1)` weights on derivatives of older steps.
    pub ahat: DMatrix<f64>,
    /// `s x s`, strictly lower triangular.
    pub a: DMatrix<f64>,
    pub theta: DVector<f64>,
    pub bhat: DVector<f64>,
    pub b: DVector<f64>,
}

/// One broken invariant found by [`MsrkMethod::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Shape {
        field: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    FirstRow {
        field: &'static str,
    },
    NotExplicit {
        i: usize,
        j: usize,
        value: f64,
    },
    RowSum {
        field: &'static str,
        row: Option<usize>,
        sum: f64,
    },
    NonFinite {
        field: &'static str,
    },
    /// Coefficient outside the range required for a positive SSP coefficient.
    Sign {
        field: &'static str,
        index: (usize, usize),
        value: f64,
    },
    Order,
}

impl Violation {
    /// Structural violations make the method unusable; sign violations only
    /// rule out a positive SSP coefficient.
    pub fn is_structural(&self) -> bool {
        !matches!(self, Violation::Sign { .. })
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Shape {
                field,
                expected,
                found,
            } => write!(
                f,
                "{field} has shape {}x{}, expected {}x{}",
                found.0, found.1, expected.0, expected.1
            ),
            Violation::FirstRow { field } => {
                write!(f, "first row of {field} does not describe y_1 = u^n")
            }
            Violation::NotExplicit { i, j, value } => {
                write!(f, "A[{i}][{j}] = {value} on or above the diagonal")
            }
            Violation::RowSum {
                field,
                row: Some(r),
                sum,
            } => write!(f, "{field} row {r} sums to {sum} ≠ 1"),
            Violation::RowSum {
                field,
                row: None,
                sum,
            } => write!(f, "{field} sums to {sum} ≠ 1"),
            Violation::NonFinite { field } => write!(f, "{field} has non-finite entries"),
            Violation::Sign {
                field,
                index,
                value,
            } => write!(
                f,
                "{field}[{}][{}] = {value} outside the admissible range",
                index.0, index.1
            ),
            Violation::Order => write!(f, "claimed order must be at least 1"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    /// No violations of any kind.
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    /// No structural violations (sign violations allowed).
    pub fn is_valid(&self) -> bool {
        self.violations.iter().all(|v| !v.is_structural())
    }

    pub fn first_structural(&self) -> Option<&Violation> {
        self.violations.iter().find(|v| v.is_structural())
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (n, v) in self.violations.iter().enumerate() {
            if n > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// The stacked matrices acting on `[u^{n-k+1}; ...; u^{n-1}; y_1; ...; y_s]`.
#[derive(Debug, Clone)]
pub struct ExtendedForm {
    /// `(k-1+s) x k`
    pub d: DMatrix<f64>,
    /// `(k-1+s) x (k-1+s)`
    pub a: DMatrix<f64>,
    /// `k-1+s`
    pub b: DVector<f64>,
}

impl MsrkMethod {
    /// Explicit Runge-Kutta method (`k = 1`) from its Butcher coefficients.
    pub fn runge_kutta(
        name: impl Into<String>,
        claimed_order: usize,
        a: DMatrix<f64>,
        b: DVector<f64>,
    ) -> Self {
        let s = b.len();
        MsrkMethod {
            name: name.into(),
            claimed_order,
            d: DMatrix::from_element(s, 1, 1.0),
            ahat: DMatrix::zeros(s, 0),
            a,
            theta: DVector::from_element(1, 1.0),
            bhat: DVector::zeros(0),
            b,
        }
    }

    /// An all-zero method of the given shape with `d_{ik} = 1`, `theta_k = 1`.
    pub fn zeros(s: usize, k: usize) -> Self {
        let mut d = DMatrix::zeros(s, k);
        d.column_mut(k - 1).fill(1.0);
        let mut theta = DVector::zeros(k);
        theta[k - 1] = 1.0;
        MsrkMethod {
            name: format!("zero({s},{k})"),
            claimed_order: 1,
            d,
            ahat: DMatrix::zeros(s, k - 1),
            a: DMatrix::zeros(s, s),
            theta,
            bhat: DVector::zeros(k - 1),
            b: DVector::zeros(s),
        }
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    pub fn steps(&self) -> usize {
        self.theta.len()
    }

    /// `(s,k,p)` label used in tables.
    pub fn label(&self) -> String {
        format!(
            "({},{},{})",
            self.stages(),
            self.steps(),
            self.claimed_order
        )
    }

    pub fn validate(&self) -> ValidationReport {
        let s = self.stages();
        let k = self.steps();
        let mut out = Vec::new();
        if k == 0 {
            out.push(Violation::Shape {
                field: "theta",
                expected: (1, 1),
                found: (0, 1),
            });
        }
        if s == 0 {
            out.push(Violation::Shape {
                field: "b",
                expected: (1, 1),
                found: (0, 1),
            });
        }
        if self.claimed_order == 0 {
            out.push(Violation::Order);
        }
        let km1 = k.saturating_sub(1);
        let shapes: [(&'static str, (usize, usize), (usize, usize)); 4] = [
            ("D", (s, k), self.d.shape()),
            ("Ahat", (s, km1), self.ahat.shape()),
            ("A", (s, s), self.a.shape()),
            ("bhat", (km1, 1), (self.bhat.len(), 1)),
        ];
        let mut shape_ok = s > 0 && k > 0;
        for (field, expected, found) in shapes {
            if expected != found {
                shape_ok = false;
                out.push(Violation::Shape {
                    field,
                    expected,
                    found,
                });
            }
        }
        let finite = [
            ("D", self.d.iter().all(|x| x.is_finite())),
            ("Ahat", self.ahat.iter().all(|x| x.is_finite())),
            ("A", self.a.iter().all(|x| x.is_finite())),
            ("theta", self.theta.iter().all(|x| x.is_finite())),
            ("bhat", self.bhat.iter().all(|x| x.is_finite())),
            ("b", self.b.iter().all(|x| x.is_finite())),
        ];
        for (field, ok) in finite {
            if !ok {
                out.push(Violation::NonFinite { field });
            }
        }
        if !shape_ok {
            return ValidationReport { violations: out };
        }

        let first_d_ok = (0..k).all(|l| self.d[(0, l)] == if l + 1 == k { 1.0 } else { 0.0 });
        if !first_d_ok {
            out.push(Violation::FirstRow { field: "D" });
        }
        if self.a.row(0).iter().any(|&x| x != 0.0) {
            out.push(Violation::FirstRow { field: "A" });
        }
        if self.ahat.row(0).iter().any(|&x| x != 0.0) {
            out.push(Violation::FirstRow { field: "Ahat" });
        }
        for i in 0..s {
            for j in i..s {
                if self.a[(i, j)] != 0.0 {
                    out.push(Violation::NotExplicit {
                        i,
                        j,
                        value: self.a[(i, j)],
                    });
                }
            }
        }
        for i in 0..s {
            let sum: f64 = self.d.row(i).iter().sum();
            if (sum - 1.0).abs() > CONSISTENCY_TOL {
                out.push(Violation::RowSum {
                    field: "D",
                    row: Some(i),
                    sum,
                });
            }
        }
        let tsum: f64 = self.theta.iter().sum();
        if (tsum - 1.0).abs() > CONSISTENCY_TOL {
            out.push(Violation::RowSum {
                field: "theta",
                row: None,
                sum: tsum,
            });
        }

        // 0 <= D, theta <= 1 and nonnegative A, Ahat, b, bhat.
        let mut sign = |field: &'static str,
                        rows: usize,
                        cols: usize,
                        at: &dyn Fn(usize, usize) -> f64,
                        upper: bool| {
            for i in 0..rows {
                for j in 0..cols {
                    let v = at(i, j);
                    if v < 0.0 || (upper && v > 1.0) {
                        out.push(Violation::Sign {
                            field,
                            index: (i, j),
                            value: v,
                        });
                    }
                }
            }
        };
        sign("D", s, k, &|i, j| self.d[(i, j)], true);
        sign("Ahat", s, km1, &|i, j| self.ahat[(i, j)], false);
        sign("A", s, s, &|i, j| self.a[(i, j)], false);
        sign("theta", 1, k, &|_, j| self.theta[j], true);
        sign("bhat", 1, km1, &|_, j| self.bhat[j], false);
        sign("b", 1, s, &|_, j| self.b[j], false);

        ValidationReport { violations: out }
    }

    /// Stacked `D~`, `A~`, `b~` over the `k-1` older steps and the `s` stages.
    pub fn extended(&self) -> ExtendedForm {
        let s = self.stages();
        let k = self.steps();
        let n = k - 1 + s;
        let mut d = DMatrix::zeros(n, k);
        let mut a = DMatrix::zeros(n, n);
        for i in 0..k - 1 {
            d[(i, i)] = 1.0;
        }
        for i in 0..s {
            for l in 0..k {
                d[(k - 1 + i, l)] = self.d[(i, l)];
            }
            for l in 0..k - 1 {
                a[(k - 1 + i, l)] = self.ahat[(i, l)];
            }
            for j in 0..s {
                a[(k - 1 + i, k - 1 + j)] = self.a[(i, j)];
            }
        }
        let mut b = DVector::zeros(n);
        for l in 0..k - 1 {
            b[l] = self.bhat[l];
        }
        for j in 0..s {
            b[k - 1 + j] = self.b[j];
        }
        ExtendedForm { d, a, b }
    }

    /// Step offsets `l = (k-1, ..., 1, 0)` and abscissae `c = A~ e - D~ l`.
    pub fn abscissae(&self) -> (DVector<f64>, DVector<f64>) {
        let k = self.steps();
        let ext = self.extended();
        let l = DVector::from_iterator(k, (0..k).map(|i| (k - 1 - i) as f64));
        let row_sums = DVector::from_iterator(ext.a.nrows(), ext.a.row_iter().map(|r| r.sum()));
        let c = row_sums - &ext.d * &l;
        (c, l)
    }
}

/// Forward Euler.
pub fn forward_euler() -> MsrkMethod {
    MsrkMethod::runge_kutta("FE", 1, DMatrix::zeros(1, 1), DVector::from_element(1, 1.0))
}

/// Shu-Osher three-stage third-order SSP Runge-Kutta method.
pub fn ssprk33() -> MsrkMethod {
    let a = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.25, 0.25, 0.0]);
    let b = DVector::from_column_slice(&[1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0]);
    MsrkMethod::runge_kutta("SSPRK(3,3)", 3, a, b)
}

/// Classical fourth-order Runge-Kutta method (not SSP).
pub fn rk44() -> MsrkMethod {
    let a = DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0, 0.0, 0.0, 0.0, //
            0.5, 0.0, 0.0, 0.0, //
            0.0, 0.5, 0.0, 0.0, //
            0.0, 0.0, 1.0, 0.0,
        ],
    );
    let b = DVector::from_column_slice(&[1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0]);
    MsrkMethod::runge_kutta("RK(4,4)", 4, a, b)
}
