//! Vector-valued power series in the step size, truncated at a fixed order.

use std::ops::{Add, Mul, Sub};

/// Coefficients of `h^0 .. h^order`, each a vector of length `dim`.
/// Stored row-major: `data[j * dim + i]` is component `i` of `h^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorSeries {
    order: usize,
    dim: usize,
    data: Vec<f64>,
}

impl TaylorSeries {
    pub fn zeros(dim: usize, order: usize) -> Self {
        TaylorSeries {
            order,
            dim,
            data: vec![0.0; dim * (order + 1)],
        }
    }

    pub fn constant(value: &[f64], order: usize) -> Self {
        let mut s = Self::zeros(value.len(), order);
        s.data[..value.len()].copy_from_slice(value);
        s
    }

    /// Builds a series from its coefficient vectors `h^0, h^1, ...`.
    pub fn from_coeffs(coeffs: &[Vec<f64>]) -> Self {
        let dim = coeffs.first().map_or(0, |c| c.len());
        let order = coeffs.len().saturating_sub(1);
        let mut data = Vec::with_capacity(dim * coeffs.len());
        for c in coeffs {
            assert_eq!(c.len(), dim, "ragged series coefficients");
            data.extend_from_slice(c);
        }
        TaylorSeries { order, dim, data }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Coefficient vector of `h^j`.
    pub fn coeff(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn coeff_mut(&mut self, j: usize) -> &mut [f64] {
        let d = self.dim;
        &mut self.data[j * d..(j + 1) * d]
    }

    /// Component `i` as a scalar series.
    pub fn component(&self, i: usize) -> Vec<f64> {
        (0..=self.order)
            .map(|j| self.data[j * self.dim + i])
            .collect()
    }

    pub fn coeffs(&self) -> Vec<Vec<f64>> {
        (0..=self.order).map(|j| self.coeff(j).to_vec()).collect()
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &TaylorSeries) {
        debug_assert_eq!(self.data.len(), other.data.len());
        if a == 0.0 {
            return;
        }
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * y;
        }
    }

    /// `self += a * h * other`, dropping the coefficient pushed past the order.
    pub fn axpy_shifted(&mut self, a: f64, other: &TaylorSeries) {
        if a == 0.0 {
            return;
        }
        let d = self.dim;
        let n = self.data.len();
        for (x, y) in self.data[d..].iter_mut().zip(&other.data[..n - d]) {
            *x += a * y;
        }
    }

    pub fn scale(&self, a: f64) -> TaylorSeries {
        TaylorSeries {
            order: self.order,
            dim: self.dim,
            data: self.data.iter().map(|x| a * x).collect(),
        }
    }

    /// The series of `U(a h)`.
    pub fn scale_argument(&self, a: f64) -> TaylorSeries {
        let mut out = self.clone();
        let mut f = 1.0;
        for j in 0..=self.order {
            for x in out.coeff_mut(j) {
                *x *= f;
            }
            f *= a;
        }
        out
    }

    /// `u0 + integral_0^h self`, truncated at the same order.
    pub fn integrate(&self, u0: &[f64]) -> TaylorSeries {
        let mut out = Self::constant(u0, self.order);
        for j in 1..=self.order {
            let inv = 1.0 / j as f64;
            for i in 0..self.dim {
                out.data[j * self.dim + i] = self.data[(j - 1) * self.dim + i] * inv;
            }
        }
        out
    }

    /// `d/dh`, truncated: the top coefficient becomes zero.
    pub fn derivative(&self) -> TaylorSeries {
        let mut out = Self::zeros(self.dim, self.order);
        for j in 1..=self.order {
            for i in 0..self.dim {
                out.data[(j - 1) * self.dim + i] = j as f64 * self.data[j * self.dim + i];
            }
        }
        out
    }

    /// Componentwise product.
    pub fn hadamard(&self, other: &TaylorSeries) -> TaylorSeries {
        assert_eq!(self.dim, other.dim);
        assert_eq!(self.order, other.order);
        let mut out = Self::zeros(self.dim, self.order);
        for i in 0..self.dim {
            let a = self.component(i);
            let b = other.component(i);
            let c = scalar_mul(&a, &b);
            for (j, v) in c.into_iter().enumerate() {
                out.data[j * self.dim + i] = v;
            }
        }
        out
    }

    /// Evaluates the truncated series at a given `h`.
    pub fn eval(&self, h: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for j in (0..=self.order).rev() {
            for (o, c) in out.iter_mut().zip(self.coeff(j)) {
                *o = *o * h + c;
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Truncated product of two scalar series of equal length.
pub fn scalar_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().min(b.len());
    let mut out = vec![0.0; n];
    for (i, &ai) in a.iter().enumerate().take(n) {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate().take(n - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

impl Add for &TaylorSeries {
    type Output = TaylorSeries;
    fn add(self, rhs: &TaylorSeries) -> TaylorSeries {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub for &TaylorSeries {
    type Output = TaylorSeries;
    fn sub(self, rhs: &TaylorSeries) -> TaylorSeries {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl Mul for &TaylorSeries {
    type Output = TaylorSeries;
    fn mul(self, rhs: &TaylorSeries) -> TaylorSeries {
        self.hadamard(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(dim: usize, order: usize) -> impl Strategy<Value = TaylorSeries> {
        prop::collection::vec(-1.0f64..1.0, dim * (order + 1)).prop_map(move |data| TaylorSeries {
            order,
            dim,
            data,
        })
    }

    /// Entrywise agreement relative to `max(1, |x|, |y|)`.
    fn close(a: &TaylorSeries, b: &TaylorSeries, tol: f64) -> bool {
        a.data
            .iter()
            .zip(&b.data)
            .all(|(x, y)| (x - y).abs() <= tol * x.abs().max(y.abs()).max(1.0))
    }

    proptest! {
        #[test]
        fn product_is_associative(a in series(2, 6), b in series(2, 6), c in series(2, 6)) {
            let left = &(&a * &b) * &c;
            let right = &a * &(&b * &c);
            prop_assert!(close(&left, &right, 1e-13));
        }

        #[test]
        fn argument_scaling_composes(a in series(3, 7), x in -1.5f64..1.5, y in -1.5f64..1.5) {
            let twice = a.scale_argument(x).scale_argument(y);
            let once = a.scale_argument(x * y);
            prop_assert!(close(&twice, &once, 1e-13));
        }
    }

    #[test]
    fn shifted_axpy_multiplies_by_h() {
        let one = TaylorSeries::constant(&[1.0], 3);
        let mut acc = TaylorSeries::zeros(1, 3);
        acc.axpy_shifted(2.0, &one);
        assert_eq!(acc.component(0), vec![0.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn integrate_and_differentiate() {
        let s = TaylorSeries::from_coeffs(&[vec![1.0], vec![2.0], vec![3.0]]);
        let i = s.integrate(&[5.0]);
        assert_eq!(i.component(0), vec![5.0, 1.0, 1.0]);
        assert_eq!(i.derivative().component(0), vec![1.0, 2.0, 0.0]);
    }
}
