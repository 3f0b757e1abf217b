//! Scalar abstraction over plain floats, jets, and forward-mode dual numbers.
//!
//! Expression evaluation and the geodesic right sides are written once
//! against [`Scalar`]. `Dual<S>` layers one level of differentiation on any
//! scalar, so `Dual<f64>` gives first spatial derivatives at a real point and
//! `Dual<Dual<f64>>` gives second derivatives; `Dual<Jet>` differentiates a
//! whole jet-valued evaluation.

use crate::error::EvalError;
use crate::jet::Jet;

pub trait Scalar: Clone + std::fmt::Debug {
    /// A constant with the same shape bookkeeping as `self`.
    fn constant_like(&self, v: f64) -> Self;
    /// The underlying value at the expansion point (used by guards).
    fn value(&self) -> f64;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn div(&self, o: &Self) -> Result<Self, EvalError>;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn exp(&self) -> Self;
    fn sqrt(&self) -> Result<Self, EvalError>;
    /// Multiply by a plain float.
    fn scale(&self, c: f64) -> Self {
        self.mul(&self.constant_like(c))
    }
    /// Largest magnitude over all stored coefficients, for convergence checks.
    fn max_abs(&self) -> f64;

    fn powi(&self, k: i32) -> Result<Self, EvalError> {
        let mut result = self.constant_like(1.0);
        let mut base = if k < 0 {
            self.constant_like(1.0).div(self)?
        } else {
            self.clone()
        };
        let mut e = k.unsigned_abs();
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        Ok(result)
    }
}

impl Scalar for f64 {
    fn constant_like(&self, v: f64) -> f64 {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn add(&self, o: &f64) -> f64 {
        self + o
    }
    fn sub(&self, o: &f64) -> f64 {
        self - o
    }
    fn mul(&self, o: &f64) -> f64 {
        self * o
    }
    fn neg(&self) -> f64 {
        -self
    }
    fn div(&self, o: &f64) -> Result<f64, EvalError> {
        if *o == 0.0 {
            return Err(EvalError::DivisionByZero);
        }
        Ok(self / o)
    }
    fn sin(&self) -> f64 {
        f64::sin(*self)
    }
    fn cos(&self) -> f64 {
        f64::cos(*self)
    }
    fn exp(&self) -> f64 {
        f64::exp(*self)
    }
    fn sqrt(&self) -> Result<f64, EvalError> {
        if *self < 0.0 {
            return Err(EvalError::SqrtNegative(*self));
        }
        Ok(f64::sqrt(*self))
    }
    fn powi(&self, k: i32) -> Result<f64, EvalError> {
        if k < 0 && *self == 0.0 {
            return Err(EvalError::DivisionByZero);
        }
        Ok(f64::powi(*self, k))
    }
    fn scale(&self, c: f64) -> f64 {
        self * c
    }
    fn max_abs(&self) -> f64 {
        self.abs()
    }
}

impl Scalar for Jet {
    fn constant_like(&self, v: f64) -> Jet {
        Jet::constant(self.nvars(), self.order(), v)
    }
    fn value(&self) -> f64 {
        self.constant_term()
    }
    fn add(&self, o: &Jet) -> Jet {
        self + o
    }
    fn sub(&self, o: &Jet) -> Jet {
        self - o
    }
    fn mul(&self, o: &Jet) -> Jet {
        self * o
    }
    fn neg(&self) -> Jet {
        self.scaled(-1.0)
    }
    fn div(&self, o: &Jet) -> Result<Jet, EvalError> {
        Ok(self.try_div(o)?)
    }
    fn sin(&self) -> Jet {
        Jet::sin(self)
    }
    fn cos(&self) -> Jet {
        Jet::cos(self)
    }
    fn exp(&self) -> Jet {
        Jet::exp(self)
    }
    fn sqrt(&self) -> Result<Jet, EvalError> {
        Ok(Jet::sqrt(self)?)
    }
    fn powi(&self, k: i32) -> Result<Jet, EvalError> {
        Ok(Jet::powi(self, k)?)
    }
    fn scale(&self, c: f64) -> Jet {
        self.scaled(c)
    }
    fn max_abs(&self) -> f64 {
        Jet::max_abs(self)
    }
}

/// Value plus gradient with respect to a fixed set of seed directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Dual<S> {
    pub val: S,
    pub grad: Vec<S>,
}

impl<S: Scalar> Dual<S> {
    pub fn constant(val: S, ndirs: usize) -> Dual<S> {
        let zero = val.constant_like(0.0);
        Dual {
            val,
            grad: vec![zero; ndirs],
        }
    }

    /// Seed direction `dir` with unit derivative.
    pub fn seeded(val: S, ndirs: usize, dir: usize) -> Dual<S> {
        let mut d = Dual::constant(val, ndirs);
        d.grad[dir] = d.val.constant_like(1.0);
        d
    }
}

impl<S: Scalar> Scalar for Dual<S> {
    fn constant_like(&self, v: f64) -> Dual<S> {
        Dual::constant(self.val.constant_like(v), self.grad.len())
    }

    fn value(&self) -> f64 {
        self.val.value()
    }

    fn add(&self, o: &Dual<S>) -> Dual<S> {
        Dual {
            val: self.val.add(&o.val),
            grad: self
                .grad
                .iter()
                .zip(&o.grad)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    fn sub(&self, o: &Dual<S>) -> Dual<S> {
        Dual {
            val: self.val.sub(&o.val),
            grad: self
                .grad
                .iter()
                .zip(&o.grad)
                .map(|(a, b)| a.sub(b))
                .collect(),
        }
    }

    fn mul(&self, o: &Dual<S>) -> Dual<S> {
        Dual {
            val: self.val.mul(&o.val),
            grad: self
                .grad
                .iter()
                .zip(&o.grad)
                .map(|(a, b)| a.mul(&o.val).add(&self.val.mul(b)))
                .collect(),
        }
    }

    fn neg(&self) -> Dual<S> {
        Dual {
            val: self.val.neg(),
            grad: self.grad.iter().map(|a| a.neg()).collect(),
        }
    }

    fn div(&self, o: &Dual<S>) -> Result<Dual<S>, EvalError> {
        let val = self.val.div(&o.val)?;
        let inv_sq = o.val.constant_like(1.0).div(&o.val.mul(&o.val))?;
        let grad = self
            .grad
            .iter()
            .zip(&o.grad)
            .map(|(a, b)| a.mul(&o.val).sub(&self.val.mul(b)).mul(&inv_sq))
            .collect();
        Ok(Dual { val, grad })
    }

    fn sin(&self) -> Dual<S> {
        let c = self.val.cos();
        Dual {
            val: self.val.sin(),
            grad: self.grad.iter().map(|a| a.mul(&c)).collect(),
        }
    }

    fn cos(&self) -> Dual<S> {
        let ms = self.val.sin().neg();
        Dual {
            val: self.val.cos(),
            grad: self.grad.iter().map(|a| a.mul(&ms)).collect(),
        }
    }

    fn exp(&self) -> Dual<S> {
        let e = self.val.exp();
        Dual {
            val: e.clone(),
            grad: self.grad.iter().map(|a| a.mul(&e)).collect(),
        }
    }

    fn sqrt(&self) -> Result<Dual<S>, EvalError> {
        let s = self.val.sqrt()?;
        let half_inv = s.constant_like(0.5).div(&s)?;
        Ok(Dual {
            val: s,
            grad: self.grad.iter().map(|a| a.mul(&half_inv)).collect(),
        })
    }

    fn scale(&self, c: f64) -> Dual<S> {
        Dual {
            val: self.val.scale(c),
            grad: self.grad.iter().map(|a| a.scale(c)).collect(),
        }
    }

    fn max_abs(&self) -> f64 {
        self.grad
            .iter()
            .fold(self.val.max_abs(), |m, a| m.max(a.max_abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn dual_f64_matches_hand_derivatives() {
        // f(x, y) = x^2 sin(y) + x / y at (x, y) = (1.3, 0.7)
        let (x0, y0) = (1.3, 0.7);
        let x = Dual::seeded(x0, 2, 0);
        let y = Dual::seeded(y0, 2, 1);
        let f = x
            .mul(&x)
            .mul(&y.sin())
            .add(&x.div(&y).unwrap());
        assert_relative_eq!(f.val, x0 * x0 * y0.sin() + x0 / y0, max_relative = 1e-14);
        assert_relative_eq!(f.grad[0], 2.0 * x0 * y0.sin() + 1.0 / y0, max_relative = 1e-14);
        assert_relative_eq!(
            f.grad[1],
            x0 * x0 * y0.cos() - x0 / (y0 * y0),
            max_relative = 1e-14
        );
    }

    #[test]
    fn nested_dual_gives_second_derivatives() {
        // d^2/dx^2 exp(2x) = 4 exp(2x)
        let x0 = 0.4;
        let inner = Dual::seeded(x0, 1, 0);
        let outer = Dual::seeded(inner, 1, 0);
        let f = outer.mul(&outer.constant_like(2.0)).exp();
        let second = f.grad[0].grad[0];
        assert_relative_eq!(second, 4.0 * (2.0 * x0).exp(), max_relative = 1e-13);
    }

    #[test]
    fn dual_over_jet_matches_jet_derivative() {
        // Differentiating a jet evaluation in a seed direction must agree
        // with the jet-level derivative operator.
        let xj = Jet::variable(1, 4, 0, 0.3).unwrap();
        let d = Dual::seeded(xj.clone(), 1, 0);
        let f = d.sin().mul(&d);
        let f_jet = xj.sin() * xj.clone();
        let df_jet = f_jet.derivative(0);
        // grad entry is a jet of the same order; compare after truncation
        let got = f.grad[0].truncate(3);
        for (a, b) in got.coeffs().iter().zip(df_jet.coeffs()) {
            assert_relative_eq!(a, b, epsilon = 1e-13);
        }
    }

    #[test]
    fn division_by_zero_value_is_caught() {
        let x = Dual::seeded(1.0f64, 1, 0);
        let z = Dual::constant(0.0f64, 1);
        assert!(matches!(x.div(&z), Err(EvalError::DivisionByZero)));
    }

    #[test]
    fn generic_powi_matches_f64() {
        let x = Dual::seeded(1.7f64, 1, 0);
        let p = x.powi(5).unwrap();
        assert_relative_eq!(p.val, 1.7f64.powi(5), max_relative = 1e-14);
        assert_relative_eq!(p.grad[0], 5.0 * 1.7f64.powi(4), max_relative = 1e-14);
        let q = x.powi(-3).unwrap();
        assert_relative_eq!(q.val, 1.7f64.powi(-3), max_relative = 1e-13);
        assert_relative_eq!(q.grad[0], -3.0 * 1.7f64.powi(-4), max_relative = 1e-12);
    }
}
