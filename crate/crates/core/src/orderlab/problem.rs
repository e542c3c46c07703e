//! Random polynomial vector fields used as order-testing problems.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::series::{scalar_mul, TaylorSeries};

/// Number of rooted trees with `n` vertices (`n = 0..=13`), i.e. the number of
/// independent elementary differentials contributing at order `n`.
const ROOTED_TREES: [usize; 14] = [0, 1, 1, 2, 4, 9, 20, 48, 115, 286, 719, 1842, 4766, 12486];

pub fn rooted_trees(order: usize) -> usize {
    ROOTED_TREES.get(order).copied().unwrap_or(usize::MAX)
}

/// Autonomous system `u' = F(u)` with each component of `F` a polynomial of
/// total degree `<= degree` in `dim` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialOde {
    pub dim: usize,
    pub degree: usize,
    pub seed: u64,
    pub u0: Vec<f64>,
    /// Exponent vectors, sorted by total degree; entry 0 is the constant.
    monomials: Vec<Vec<u32>>,
    /// For monomial `t > 0`: `(parent, var)` with `x^t = x^parent * x_var`.
    parents: Vec<(usize, usize)>,
    /// `coeffs[i * n_monomials + t]` multiplies monomial `t` in component `i`.
    coeffs: Vec<f64>,
}

impl PolynomialOde {
    /// Coefficients are integers in `[-3, 3]` halved; `u0` is uniform in `[-1, 1]`.
    pub fn random(dim: usize, degree: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (monomials, parents) = enumerate_monomials(dim, degree);
        let coeffs = (0..dim * monomials.len())
            .map(|_| rng.gen_range(-3i32..=3) as f64 / 2.0)
            .collect();
        let u0 = (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        PolynomialOde {
            dim,
            degree,
            seed,
            u0,
            monomials,
            parents,
            coeffs,
        }
    }

    /// Builds a system from explicit terms `(component, exponents, coefficient)`.
    pub fn from_terms(
        dim: usize,
        degree: usize,
        u0: Vec<f64>,
        terms: &[(usize, Vec<u32>, f64)],
    ) -> Self {
        let (monomials, parents) = enumerate_monomials(dim, degree);
        let mut coeffs = vec![0.0; dim * monomials.len()];
        for (i, exps, c) in terms {
            let t = monomials
                .iter()
                .position(|m| m == exps)
                .expect("term exponent exceeds the declared degree");
            coeffs[i * monomials.len() + t] += c;
        }
        PolynomialOde {
            dim,
            degree,
            seed: 0,
            u0,
            monomials,
            parents,
            coeffs,
        }
    }

    /// `count` problems with derived seeds.
    pub fn family(count: usize, dim: usize, degree: usize, seed: u64) -> Vec<PolynomialOde> {
        (0..count as u64)
            .map(|i| {
                PolynomialOde::random(
                    dim,
                    degree,
                    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i),
                )
            })
            .collect()
    }

    pub fn n_monomials(&self) -> usize {
        self.monomials.len()
    }

    pub fn eval(&self, u: &[f64]) -> Vec<f64> {
        let n = self.monomials.len();
        let mut mono = vec![1.0; n];
        for t in 1..n {
            let (p, v) = self.parents[t];
            mono[t] = mono[p] * u[v];
        }
        (0..self.dim)
            .map(|i| {
                self.coeffs[i * n..(i + 1) * n]
                    .iter()
                    .zip(&mono)
                    .map(|(c, m)| c * m)
                    .sum()
            })
            .collect()
    }

    /// `F(U(h))` in truncated series arithmetic.
    pub fn eval_series(&self, u: &TaylorSeries) -> TaylorSeries {
        let n = self.monomials.len();
        let order = u.order();
        let comps: Vec<Vec<f64>> = (0..self.dim).map(|i| u.component(i)).collect();
        let mut mono: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut one = vec![0.0; order + 1];
        one[0] = 1.0;
        mono.push(one);
        for t in 1..n {
            let (p, v) = self.parents[t];
            let next = scalar_mul(&mono[p], &comps[v]);
            mono.push(next);
        }
        let mut out = TaylorSeries::zeros(self.dim, order);
        for i in 0..self.dim {
            for (t, m) in mono.iter().enumerate() {
                let c = self.coeffs[i * n + t];
                if c == 0.0 {
                    continue;
                }
                for (j, mj) in m.iter().enumerate() {
                    out.coeff_mut(j)[i] += c * mj;
                }
            }
        }
        out
    }
}

fn enumerate_monomials(dim: usize, degree: usize) -> (Vec<Vec<u32>>, Vec<(usize, usize)>) {
    let mut monomials: Vec<Vec<u32>> = vec![vec![0; dim]];
    let mut parents = vec![(0, 0)];
    let mut level_start = 0;
    for _ in 1..=degree {
        let level_end = monomials.len();
        for p in level_start..level_end {
            // Extend only at or after the last nonzero variable so each
            // monomial is generated once.
            let last = monomials[p].iter().rposition(|&e| e > 0).unwrap_or(0);
            for v in last..dim {
                let mut m = monomials[p].clone();
                m[v] += 1;
                monomials.push(m);
                parents.push((p, v));
            }
        }
        level_start = level_end;
    }
    (monomials, parents)
}

/// Truncated series of the exact flow through `u0`, by Picard iteration:
/// each pass fixes one more coefficient.
pub fn flow_series(problem: &PolynomialOde, order: usize) -> TaylorSeries {
    let mut u = TaylorSeries::constant(&problem.u0, order);
    for _ in 0..order {
        u = problem.eval_series(&u).integrate(&problem.u0);
    }
    u
}
