//! Second-order forward-mode differentiation.
//!
//! A [`Jet2`] carries a value together with its gradient and Hessian with
//! respect to up to six real inputs. Arithmetic propagates all three by the
//! product and chain rules, so one evaluation of a function on seeded
//! variables yields its full 2-jet.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub const MAX_VARS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2 {
    dim: usize,
    pub v: f64,
    pub g: [f64; MAX_VARS],
    pub h: [[f64; MAX_VARS]; MAX_VARS],
}

impl Jet2 {
    pub fn constant(dim: usize, v: f64) -> Self {
        assert!(dim <= MAX_VARS);
        Self { dim, v, g: [0.0; MAX_VARS], h: [[0.0; MAX_VARS]; MAX_VARS] }
    }

    /// The `i`-th input variable evaluated at `v`.
    pub fn variable(dim: usize, i: usize, v: f64) -> Self {
        let mut j = Self::constant(dim, v);
        j.g[i] = 1.0;
        j
    }

    pub fn variables(x: &[f64]) -> Vec<Self> {
        (0..x.len()).map(|i| Self::variable(x.len(), i, x[i])).collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gradient(&self) -> Vec<f64> {
        self.g[..self.dim].to_vec()
    }

    pub fn hessian(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.h[i][..self.dim].to_vec()).collect()
    }

    /// `phi(self)` given `phi`, `phi'` and `phi''` at `self.v`.
    pub fn chain(&self, f0: f64, f1: f64, f2: f64) -> Self {
        let d = self.dim;
        let mut out = Self::constant(d, f0);
        for i in 0..d {
            out.g[i] = f1 * self.g[i];
        }
        for i in 0..d {
            for j in 0..d {
                out.h[i][j] = f1 * self.h[i][j] + f2 * self.g[i] * self.g[j];
            }
        }
        out
    }

    pub fn exp(&self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn ln(&self) -> Self {
        self.chain(self.v.ln(), 1.0 / self.v, -1.0 / (self.v * self.v))
    }

    pub fn sqrt(&self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.v))
    }

    pub fn recip(&self) -> Self {
        let r = 1.0 / self.v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    pub fn powf(&self, p: f64) -> Self {
        let x = self.v;
        self.chain(x.powf(p), p * x.powf(p - 1.0), p * (p - 1.0) * x.powf(p - 2.0))
    }

    /// Composition with a function of several variables whose value,
    /// gradient and Hessian at the point `(u_k.v)` are known.
    pub fn lift(inputs: &[Jet2], value: f64, grad: &[f64], hess: &[Vec<f64>]) -> Self {
        let d = inputs[0].dim;
        let mut out = Self::constant(d, value);
        for (k, u) in inputs.iter().enumerate() {
            let gk = grad[k];
            for i in 0..d {
                out.g[i] += gk * u.g[i];
                for j in 0..d {
                    out.h[i][j] += gk * u.h[i][j];
                }
            }
        }
        for (k, uk) in inputs.iter().enumerate() {
            for (l, ul) in inputs.iter().enumerate() {
                let hkl = hess[k][l];
                if hkl == 0.0 {
                    continue;
                }
                for i in 0..d {
                    for j in 0..d {
                        out.h[i][j] += hkl * uk.g[i] * ul.g[j];
                    }
                }
            }
        }
        out
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(mut self, rhs: Jet2) -> Jet2 {
        self.v += rhs.v;
        for i in 0..self.dim {
            self.g[i] += rhs.g[i];
            for j in 0..self.dim {
                self.h[i][j] += rhs.h[i][j];
            }
        }
        self
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, rhs: Jet2) -> Jet2 {
        self + (-rhs)
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self * -1.0
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: Jet2) -> Jet2 {
        let d = self.dim;
        let mut out = Jet2::constant(d, self.v * rhs.v);
        for i in 0..d {
            out.g[i] = self.v * rhs.g[i] + rhs.v * self.g[i];
        }
        for i in 0..d {
            for j in 0..d {
                out.h[i][j] = self.v * rhs.h[i][j] + rhs.v * self.h[i][j] + self.g[i] * rhs.g[j] + rhs.g[i] * self.g[j];
            }
        }
        out
    }
}

impl Div for Jet2 {
    type Output = Jet2;
    fn div(self, rhs: Jet2) -> Jet2 {
        self * rhs.recip()
    }
}

impl Add<f64> for Jet2 {
    type Output = Jet2;
    fn add(mut self, rhs: f64) -> Jet2 {
        self.v += rhs;
        self
    }
}

impl Sub<f64> for Jet2 {
    type Output = Jet2;
    fn sub(self, rhs: f64) -> Jet2 {
        self + (-rhs)
    }
}

impl Mul<f64> for Jet2 {
    type Output = Jet2;
    fn mul(mut self, rhs: f64) -> Jet2 {
        self.v *= rhs;
        for i in 0..self.dim {
            self.g[i] *= rhs;
            for j in 0..self.dim {
                self.h[i][j] *= rhs;
            }
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fd_hessian(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<Vec<f64>> {
        let d = x.len();
        let mut out = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for (si, sj, w) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                    let mut y = x.to_vec();
                    y[i] += si * h;
                    y[j] += sj * h;
                    s += w * f(&y);
                }
                out[i][j] = s / (4.0 * h * h);
            }
        }
        out
    }

    #[test]
    fn product_and_quotient() {
        let x = Jet2::variables(&[2.0, 3.0]);
        let p = x[0] * x[1] * x[1];
        assert_eq!(p.v, 18.0);
        assert_eq!(p.gradient(), vec![9.0, 12.0]);
        assert_eq!(p.hessian(), vec![vec![0.0, 6.0], vec![6.0, 4.0]]);
        let q = x[0] / x[1];
        assert!((q.h[1][1] - 2.0 * 2.0 / 27.0).abs() < 1e-15);
    }

    #[test]
    fn norm_of_vector() {
        let x = Jet2::variables(&[0.6, 0.8, 0.0]);
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        assert!((r.v - 1.0).abs() < 1e-15);
        assert!((r.g[0] - 0.6).abs() < 1e-15);
        // Hessian of |x| is (I - x x^T)/|x|.
        assert!((r.h[0][0] - 0.64).abs() < 1e-15);
        assert!((r.h[0][1] + 0.48).abs() < 1e-15);
        assert!((r.h[2][2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lifting_matches_direct() {
        let x = Jet2::variables(&[0.3, -0.7]);
        let u = [x[0] * x[1], x[0] + x[1] * 2.0];
        let direct = (u[0] * u[0] * u[1]).exp();
        let (a, b) = (u[0].v, u[1].v);
        let e = (a * a * b).exp();
        let g = [2.0 * a * b * e, a * a * e];
        let h = vec![
            vec![(2.0 * b + 4.0 * a * a * b * b) * e, (2.0 * a + 2.0 * a * a * a * b) * e],
            vec![(2.0 * a + 2.0 * a * a * a * b) * e, a.powi(4) * e],
        ];
        let lifted = Jet2::lift(&u, e, &g, &h);
        for i in 0..2 {
            assert!((lifted.g[i] - direct.g[i]).abs() < 1e-14);
            for j in 0..2 {
                assert!((lifted.h[i][j] - direct.h[i][j]).abs() < 1e-13);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn matches_finite_differences(a in -1.0f64..1.0, b in -1.0f64..1.0, c in 0.5f64..2.0) {
            let f = |y: &[f64]| ((y[0] * y[1]).exp() + y[2].ln()) * (y[0] * y[0] + y[2]).sqrt();
            let x = Jet2::variables(&[a, b, c]);
            let j = ((x[0] * x[1]).exp() + x[2].ln()) * (x[0] * x[0] + x[2]).sqrt();
            let fh = fd_hessian(&f, &[a, b, c], 1e-4);
            for i in 0..3 {
                for k in 0..3 {
                    prop_assert!((j.h[i][k] - fh[i][k]).abs() < 1e-5 * (1.0 + fh[i][k].abs()));
                }
            }
            prop_assert!((j.v - f(&[a, b, c])).abs() < 1e-14);
        }

        #[test]
        fn hessian_is_symmetric(a in 0.1f64..2.0, b in -2.0f64..2.0) {
            let x = Jet2::variables(&[a, b]);
            let j = (x[0].powf(1.5) * x[1].exp()) / (x[0] + x[1] * x[1]);
            prop_assert!((j.h[0][1] - j.h[1][0]).abs() < 1e-12 * (1.0 + j.h[0][1].abs()));
        }
    }
}
