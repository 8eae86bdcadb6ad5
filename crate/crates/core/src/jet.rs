//! Second-order forward-mode jets.
//!
//! A [`Jet2`] carries a value together with its gradient and Hessian with
//! respect to `n` chart coordinates. Arithmetic propagates both derivative
//! orders exactly (to roundoff), which is what the curvature code needs:
//! Christoffel symbols consume first derivatives of the metric, the Riemann
//! tensor consumes second derivatives, and nothing downstream needs third
//! derivatives.

use nalgebra::{DMatrix, DVector};
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Truncated second-order Taylor jet in `n` variables.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet2 {
    pub val: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

impl Jet2 {
    /// Constant jet: value with vanishing derivatives.
    pub fn constant(val: f64, n: usize) -> Self {
        Jet2 {
            val,
            grad: DVector::zeros(n),
            hess: DMatrix::zeros(n, n),
        }
    }

    /// Seed for the `i`-th coordinate function evaluated at `val`.
    pub fn variable(val: f64, i: usize, n: usize) -> Self {
        let mut grad = DVector::zeros(n);
        grad[i] = 1.0;
        Jet2 {
            val,
            grad,
            hess: DMatrix::zeros(n, n),
        }
    }

    /// Seeds for every coordinate of a point at once.
    pub fn seed_point(x: &[f64]) -> Vec<Jet2> {
        let n = x.len();
        x.iter()
            .enumerate()
            .map(|(i, &v)| Jet2::variable(v, i, n))
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    /// Chain rule through a scalar function with given first and second
    /// derivative at `self.val`.
    fn unary(&self, f: f64, df: f64, d2f: f64) -> Jet2 {
        let outer = &self.grad * self.grad.transpose();
        Jet2 {
            val: f,
            grad: &self.grad * df,
            hess: &self.hess * df + outer * d2f,
        }
    }

    pub fn exp(&self) -> Jet2 {
        let e = self.val.exp();
        self.unary(e, e, e)
    }

    pub fn ln(&self) -> Jet2 {
        let v = self.val;
        self.unary(v.ln(), 1.0 / v, -1.0 / (v * v))
    }

    pub fn sqrt(&self) -> Jet2 {
        let s = self.val.sqrt();
        self.unary(s, 0.5 / s, -0.25 / (s * s * s))
    }

    pub fn recip(&self) -> Jet2 {
        let v = self.val;
        self.unary(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }

    pub fn powi(&self, k: i32) -> Jet2 {
        let v = self.val;
        self.unary(
            v.powi(k),
            f64::from(k) * v.powi(k - 1),
            f64::from(k * (k - 1)) * v.powi(k - 2),
        )
    }

    pub fn sin(&self) -> Jet2 {
        self.unary(self.val.sin(), self.val.cos(), -self.val.sin())
    }

    pub fn cos(&self) -> Jet2 {
        self.unary(self.val.cos(), -self.val.sin(), -self.val.cos())
    }
}

impl Add for &Jet2 {
    type Output = Jet2;
    fn add(self, rhs: &Jet2) -> Jet2 {
        Jet2 {
            val: self.val + rhs.val,
            grad: &self.grad + &rhs.grad,
            hess: &self.hess + &rhs.hess,
        }
    }
}

impl Sub for &Jet2 {
    type Output = Jet2;
    fn sub(self, rhs: &Jet2) -> Jet2 {
        Jet2 {
            val: self.val - rhs.val,
            grad: &self.grad - &rhs.grad,
            hess: &self.hess - &rhs.hess,
        }
    }
}

impl Mul for &Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: &Jet2) -> Jet2 {
        let cross = &self.grad * rhs.grad.transpose();
        Jet2 {
            val: self.val * rhs.val,
            grad: &self.grad * rhs.val + &rhs.grad * self.val,
            hess: &self.hess * rhs.val + &rhs.hess * self.val + &cross + cross.transpose(),
        }
    }
}

impl Div for &Jet2 {
    type Output = Jet2;
    #[allow(clippy::suspicious_arithmetic_impl)] // division via the reciprocal jet
    fn div(self, rhs: &Jet2) -> Jet2 {
        self * &rhs.recip()
    }
}

impl Neg for &Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        Jet2 {
            val: -self.val,
            grad: -&self.grad,
            hess: -&self.hess,
        }
    }
}

macro_rules! forward_owned {
    ($trait:ident, $method:ident) => {
        impl $trait for Jet2 {
            type Output = Jet2;
            fn $method(self, rhs: Jet2) -> Jet2 {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Jet2> for Jet2 {
            type Output = Jet2;
            fn $method(self, rhs: &Jet2) -> Jet2 {
                (&self).$method(rhs)
            }
        }
        impl $trait<Jet2> for &Jet2 {
            type Output = Jet2;
            fn $method(self, rhs: Jet2) -> Jet2 {
                self.$method(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        -&self
    }
}

impl Mul<f64> for &Jet2 {
    type Output = Jet2;
    fn mul(self, s: f64) -> Jet2 {
        Jet2 {
            val: self.val * s,
            grad: &self.grad * s,
            hess: &self.hess * s,
        }
    }
}

impl Mul<f64> for Jet2 {
    type Output = Jet2;
    fn mul(self, s: f64) -> Jet2 {
        (&self) * s
    }
}

impl Add<f64> for &Jet2 {
    type Output = Jet2;
    fn add(self, s: f64) -> Jet2 {
        let mut out = self.clone();
        out.val += s;
        out
    }
}

impl Add<f64> for Jet2 {
    type Output = Jet2;
    fn add(self, s: f64) -> Jet2 {
        (&self) + s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // f(x, y) = exp(x) * y^2 + x / (1 + y^2), exercised against hand
    // derivatives at a generic point.
    fn f(x: &[Jet2]) -> Jet2 {
        let one = Jet2::constant(1.0, 2);
        &(&x[0].exp() * &x[1].powi(2)) + &(&x[0] / &(&one + &x[1].powi(2)))
    }

    #[test]
    fn matches_hand_derivatives() {
        let (x, y) = (0.3_f64, -1.2_f64);
        let jets = Jet2::seed_point(&[x, y]);
        let out = f(&jets);

        let w = 1.0 + y * y;
        assert_relative_eq!(out.val, x.exp() * y * y + x / w, epsilon = 1e-14);
        assert_relative_eq!(out.grad[0], x.exp() * y * y + 1.0 / w, epsilon = 1e-13);
        assert_relative_eq!(
            out.grad[1],
            2.0 * x.exp() * y - 2.0 * x * y / (w * w),
            epsilon = 1e-13
        );
        assert_relative_eq!(out.hess[(0, 0)], x.exp() * y * y, epsilon = 1e-13);
        assert_relative_eq!(
            out.hess[(0, 1)],
            2.0 * x.exp() * y - 2.0 * y / (w * w),
            epsilon = 1e-13
        );
        assert_relative_eq!(
            out.hess[(1, 1)],
            2.0 * x.exp() + x * (6.0 * y * y - 2.0) / (w * w * w),
            epsilon = 1e-13
        );
        assert_relative_eq!(out.hess[(0, 1)], out.hess[(1, 0)], epsilon = 1e-15);
    }

    #[test]
    fn matches_central_differences() {
        let p = [0.7, 0.4];
        let jets = Jet2::seed_point(&p);
        let out = f(&jets);
        let h = 1e-4;
        let eval = |x: f64, y: f64| {
            let c = [Jet2::constant(x, 2), Jet2::constant(y, 2)];
            f(&c).val
        };
        let fd_dx = (eval(p[0] + h, p[1]) - eval(p[0] - h, p[1])) / (2.0 * h);
        let fd_dxy =
            (eval(p[0] + h, p[1] + h) - eval(p[0] + h, p[1] - h) - eval(p[0] - h, p[1] + h)
                + eval(p[0] - h, p[1] - h))
                / (4.0 * h * h);
        assert_relative_eq!(out.grad[0], fd_dx, epsilon = 1e-8);
        assert_relative_eq!(out.hess[(0, 1)], fd_dxy, epsilon = 1e-6);
    }

    #[test]
    fn unary_chain_rules_compose() {
        let x = Jet2::variable(0.9, 0, 1);
        let lhs = x.ln().exp();
        assert_relative_eq!(lhs.val, 0.9, epsilon = 1e-14);
        assert_relative_eq!(lhs.grad[0], 1.0, epsilon = 1e-13);
        assert_relative_eq!(lhs.hess[(0, 0)], 0.0, epsilon = 1e-13);

        let s = x.sqrt();
        let sq = &s * &s;
        assert_relative_eq!(sq.grad[0], 1.0, epsilon = 1e-13);
        assert_relative_eq!(sq.hess[(0, 0)], 0.0, epsilon = 1e-12);
    }
}
