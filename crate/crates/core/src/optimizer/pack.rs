//! Flat parameter vector of the free coefficients of an `(s,k)` method.
//!
//! Layout, in order: the first `k-1` entries of rows `2..s` of `D`, rows
//! `2..s` of `Ahat`, the strictly lower part of rows `2..s` of `A`, the first
//! `k-1` entries of `theta`, then `bhat` and `b`. The last entry of each `D`
//! row and of `theta` is fixed by the sum-to-one condition.

use nalgebra::{DMatrix, DVector};

use crate::error::{MsrkError, Result};
use crate::method::MsrkMethod;

/// Which bound applies to a free coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    /// `[0, 1]` weights on old steps.
    Unit,
    /// `>= 0` derivative weights.
    NonNegative,
}

pub fn free_count(s: usize, k: usize) -> usize {
    let km1 = k - 1;
    2 * (s - 1) * km1 + s * (s - 1) / 2 + 2 * km1 + s
}

/// Bound class of each coordinate, in pack order.
pub fn bounds(s: usize, k: usize) -> Vec<Bound> {
    let km1 = k - 1;
    let mut out = Vec::with_capacity(free_count(s, k));
    out.extend(std::iter::repeat_n(Bound::Unit, (s - 1) * km1));
    out.extend(std::iter::repeat_n(
        Bound::NonNegative,
        (s - 1) * km1 + s * (s - 1) / 2,
    ));
    out.extend(std::iter::repeat_n(Bound::Unit, km1));
    out.extend(std::iter::repeat_n(Bound::NonNegative, km1 + s));
    out
}

pub fn pack(method: &MsrkMethod) -> Vec<f64> {
    let s = method.stages();
    let k = method.steps();
    let mut x = Vec::with_capacity(free_count(s, k));
    for i in 1..s {
        x.extend((0..k - 1).map(|l| method.d[(i, l)]));
    }
    for i in 1..s {
        x.extend((0..k - 1).map(|l| method.ahat[(i, l)]));
    }
    for i in 1..s {
        x.extend((0..i).map(|j| method.a[(i, j)]));
    }
    x.extend(method.theta.iter().take(k - 1));
    x.extend(method.bhat.iter());
    x.extend(method.b.iter());
    x
}

pub fn unpack(x: &[f64], s: usize, k: usize) -> Result<MsrkMethod> {
    if s == 0 || k == 0 {
        return Err(MsrkError::Domain(format!(
            "need s, k >= 1, got s = {s}, k = {k}"
        )));
    }
    let n = free_count(s, k);
    if x.len() != n {
        return Err(MsrkError::Shape {
            expected: n,
            found: x.len(),
        });
    }
    let mut it = x.iter().copied();
    let mut next = || it.next().expect("length checked above");

    let mut d = DMatrix::zeros(s, k);
    d[(0, k - 1)] = 1.0;
    for i in 1..s {
        let mut sum = 0.0;
        for l in 0..k - 1 {
            let v = next();
            d[(i, l)] = v;
            sum += v;
        }
        d[(i, k - 1)] = 1.0 - sum;
    }
    let mut ahat = DMatrix::zeros(s, k - 1);
    for i in 1..s {
        for l in 0..k - 1 {
            ahat[(i, l)] = next();
        }
    }
    let mut a = DMatrix::zeros(s, s);
    for i in 1..s {
        for j in 0..i {
            a[(i, j)] = next();
        }
    }
    let mut theta = DVector::zeros(k);
    let mut sum = 0.0;
    for l in 0..k - 1 {
        theta[l] = next();
        sum += theta[l];
    }
    theta[k - 1] = 1.0 - sum;
    let bhat = DVector::from_iterator(k - 1, (0..k - 1).map(|_| next()));
    let b = DVector::from_iterator(s, (0..s).map(|_| next()));
    Ok(MsrkMethod {
        name: format!("opt({s},{k})"),
        claimed_order: 1,
        d,
        ahat,
        a,
        theta,
        bhat,
        b,
    })
}
