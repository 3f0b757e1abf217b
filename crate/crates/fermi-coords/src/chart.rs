//! Coordinate charts: an expression-backed metric on an open set, and a
//! parametrized submanifold through a chosen base point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, EvalError, Result};
use crate::expr::{parse_expression, Expr};
use crate::jet::Jet;
use crate::linalg::symmetric_signature;
use crate::scalar::{Dual, Scalar};

/// Signature data ((p,q),(p',q')): p/q count spacelike/timelike tangential
/// frame directions, p'/q' the normal ones. The reference form h is diagonal
/// with +1 p times, -1 q times, +1 p' times, -1 q' times, in that order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignatureType {
    pub tangential: (usize, usize),
    pub normal: (usize, usize),
}

impl SignatureType {
    pub fn new(tangential: (usize, usize), normal: (usize, usize)) -> Self {
        SignatureType { tangential, normal }
    }

    /// Submanifold dimension k.
    pub fn k(&self) -> usize {
        self.tangential.0 + self.tangential.1
    }

    pub fn codim(&self) -> usize {
        self.normal.0 + self.normal.1
    }

    pub fn n(&self) -> usize {
        self.k() + self.codim()
    }

    pub fn ambient_signature(&self) -> (usize, usize) {
        (
            self.tangential.0 + self.normal.0,
            self.tangential.1 + self.normal.1,
        )
    }

    /// Diagonal of the reference form h.
    pub fn h_diag(&self) -> Vec<f64> {
        let mut d = Vec::with_capacity(self.n());
        d.extend(std::iter::repeat(1.0).take(self.tangential.0));
        d.extend(std::iter::repeat(-1.0).take(self.tangential.1));
        d.extend(std::iter::repeat(1.0).take(self.normal.0));
        d.extend(std::iter::repeat(-1.0).take(self.normal.1));
        d
    }

    pub fn as_array(&self) -> [[usize; 2]; 2] {
        [
            [self.tangential.0, self.tangential.1],
            [self.normal.0, self.normal.1],
        ]
    }

    pub fn from_array(a: [[usize; 2]; 2]) -> Self {
        SignatureType {
            tangential: (a[0][0], a[0][1]),
            normal: (a[1][0], a[1][1]),
        }
    }
}

/// Symmetric metric tensor given entrywise by expressions in the chart
/// coordinates.
#[derive(Debug, Clone)]
pub struct MetricChart {
    dim: usize,
    coords: Vec<String>,
    entries: Vec<Expr>,
}

impl MetricChart {
    pub fn new(coords: Vec<String>, entries: Vec<Expr>) -> Result<MetricChart> {
        let dim = coords.len();
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                context: "metric entry count",
                expected: dim * dim,
                got: entries.len(),
            });
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                if entries[i * dim + j] != entries[j * dim + i] {
                    return Err(Error::AsymmetricMetric(i, j, f64::NAN));
                }
            }
        }
        Ok(MetricChart {
            dim,
            coords,
            entries,
        })
    }

    pub fn from_strings(coords: &[&str], entries: &[&str]) -> Result<MetricChart> {
        let exprs = entries
            .iter()
            .map(|s| parse_expression(s, coords))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(MetricChart::new(
            coords.iter().map(|s| s.to_string()).collect(),
            exprs,
        )?)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn entries(&self) -> &[Expr] {
        &self.entries
    }

    /// Evaluate all n^2 entries at a point given over any scalar.
    pub fn eval<S: Scalar>(&self, z: &[S]) -> Result<Vec<S>, EvalError> {
        assert_eq!(z.len(), self.dim);
        self.entries.iter().map(|e| e.evaluate(z)).collect()
    }

    /// Entries as jets about z0, with every coordinate seeded.
    pub fn eval_jets(&self, z0: &[f64], order: usize) -> Result<Vec<Jet>> {
        let vars: Vec<Jet> = z0
            .iter()
            .enumerate()
            .map(|(i, &v)| Jet::variable(self.dim, order, i, v))
            .collect::<Result<_, _>>()?;
        Ok(self.eval(&vars)?)
    }

    /// Eigenvalue signature (positive, negative) at a point; near-zero
    /// eigenvalues are degeneracy errors.
    pub fn signature_at(&self, z0: &[f64]) -> Result<(usize, usize)> {
        let g = self.eval(&z0.to_vec())?;
        let (pos, neg, zero) = symmetric_signature(&g, self.dim, 1e-9);
        if zero > 0 {
            return Err(Error::Degenerate {
                context: "metric at base point",
                pivot: 0.0,
                threshold: 1e-9,
            });
        }
        Ok((pos, neg))
    }
}

/// Embedded submanifold given by component expressions in k parameters,
/// with a distinguished base parameter point.
#[derive(Debug, Clone)]
pub struct SubmanifoldChart {
    ambient_dim: usize,
    params: Vec<String>,
    components: Vec<Expr>,
    base: Vec<f64>,
}

impl SubmanifoldChart {
    pub fn new(
        ambient_dim: usize,
        params: Vec<String>,
        components: Vec<Expr>,
        base: Vec<f64>,
    ) -> Result<SubmanifoldChart> {
        let k = params.len();
        if k == 0 || k >= ambient_dim {
            return Err(Error::CodimensionZero { k, n: ambient_dim });
        }
        if components.len() != ambient_dim {
            return Err(Error::DimensionMismatch {
                context: "submanifold component count",
                expected: ambient_dim,
                got: components.len(),
            });
        }
        if base.len() != k {
            return Err(Error::DimensionMismatch {
                context: "submanifold base parameter count",
                expected: k,
                got: base.len(),
            });
        }
        Ok(SubmanifoldChart {
            ambient_dim,
            params,
            components,
            base,
        })
    }

    pub fn from_strings(
        ambient_dim: usize,
        params: &[&str],
        components: &[&str],
        base: &[f64],
    ) -> Result<SubmanifoldChart> {
        let exprs = components
            .iter()
            .map(|s| parse_expression(s, params))
            .collect::<Result<Vec<_>, _>>()?;
        SubmanifoldChart::new(
            ambient_dim,
            params.iter().map(|s| s.to_string()).collect(),
            exprs,
            base.to_vec(),
        )
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn params(&self) -> &[String] {
        &self.params
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn eval<S: Scalar>(&self, s: &[S]) -> Result<Vec<S>, EvalError> {
        assert_eq!(s.len(), self.dim());
        self.components.iter().map(|e| e.evaluate(s)).collect()
    }

    /// The base point in ambient coordinates.
    pub fn base_point(&self) -> Result<Vec<f64>> {
        Ok(self.eval(&self.base)?)
    }

    /// Components as jets about the base parameters.
    pub fn eval_jets(&self, order: usize) -> Result<Vec<Jet>> {
        let k = self.dim();
        let vars: Vec<Jet> = self
            .base
            .iter()
            .enumerate()
            .map(|(i, &v)| Jet::variable(k, order, i, v))
            .collect::<Result<_, _>>()?;
        Ok(self.eval(&vars)?)
    }

    /// Value and first parameter derivatives at `s`: returns (phi, T) with
    /// T[a][i] = d phi^i / d s^a.
    pub fn eval_with_jacobian<S: Scalar>(
        &self,
        s: &[S],
    ) -> Result<(Vec<S>, Vec<Vec<S>>), EvalError> {
        let k = self.dim();
        let seeded: Vec<Dual<S>> = s
            .iter()
            .enumerate()
            .map(|(a, v)| Dual::seeded(v.clone(), k, a))
            .collect();
        let vals = self.eval(&seeded)?;
        let phi: Vec<S> = vals.iter().map(|d| d.val.clone()).collect();
        let t: Vec<Vec<S>> = (0..k)
            .map(|a| vals.iter().map(|d| d.grad[a].clone()).collect())
            .collect();
        Ok((phi, t))
    }

    /// Value, first, and second parameter derivatives at `s`:
    /// (phi, T, T2) with T2[a][b][i] = d^2 phi^i / d s^a d s^b.
    #[allow(clippy::type_complexity)]
    pub fn eval_with_hessian<S: Scalar>(
        &self,
        s: &[S],
    ) -> Result<(Vec<S>, Vec<Vec<S>>, Vec<Vec<Vec<S>>>), EvalError> {
        let k = self.dim();
        let inner: Vec<Dual<S>> = s
            .iter()
            .enumerate()
            .map(|(a, v)| Dual::seeded(v.clone(), k, a))
            .collect();
        let outer: Vec<Dual<Dual<S>>> = inner
            .iter()
            .enumerate()
            .map(|(a, v)| Dual::seeded(v.clone(), k, a))
            .collect();
        let vals = self.eval(&outer)?;
        let phi: Vec<S> = vals.iter().map(|d| d.val.val.clone()).collect();
        let t: Vec<Vec<S>> = (0..k)
            .map(|a| vals.iter().map(|d| d.val.grad[a].clone()).collect())
            .collect();
        let t2: Vec<Vec<Vec<S>>> = (0..k)
            .map(|a| {
                (0..k)
                    .map(|b| vals.iter().map(|d| d.grad[b].grad[a].clone()).collect())
                    .collect()
            })
            .collect();
        Ok((phi, t, t2))
    }
}

/// Check a declared type against the actual metric and pullback signatures
/// at the base point.
pub fn validate_signature(
    metric: &MetricChart,
    sub: &SubmanifoldChart,
    sig: &SignatureType,
) -> Result<()> {
    let n = sig.n();
    let k = sig.k();
    if metric.dim() != n {
        return Err(Error::DimensionMismatch {
            context: "metric dimension vs signature type",
            expected: n,
            got: metric.dim(),
        });
    }
    if sub.ambient_dim() != n || sub.dim() != k {
        return Err(Error::DimensionMismatch {
            context: "submanifold dimensions vs signature type",
            expected: n,
            got: sub.ambient_dim(),
        });
    }
    let ambient = metric.signature_at(&sub.base_point()?)?;
    if ambient != sig.ambient_signature() {
        let want = sig.ambient_signature();
        return Err(Error::SignatureMismatch(
            want.0, want.1, ambient.0, ambient.1,
        ));
    }
    // pullback metric at the base parameters
    let p_hat = sub.base_point()?;
    let g = metric.eval(&p_hat)?;
    let (_, t) = sub.eval_with_jacobian(&sub.base().to_vec())?;
    let mut pulled = vec![0.0; k * k];
    for a in 0..k {
        for b in 0..k {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += g[i * n + j] * t[a][i] * t[b][j];
                }
            }
            pulled[a * k + b] = acc;
        }
    }
    let (pos, neg, zero) = symmetric_signature(&pulled, k, 1e-9);
    if zero > 0 {
        return Err(Error::Degenerate {
            context: "pullback metric at base point",
            pivot: 0.0,
            threshold: 1e-9,
        });
    }
    if (pos, neg) != sig.tangential {
        return Err(Error::SignatureMismatch(
            sig.tangential.0,
            sig.tangential.1,
            pos,
            neg,
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn polar() -> MetricChart {
        MetricChart::from_strings(&["r", "th"], &["1", "0", "0", "r^2"]).unwrap()
    }

    #[test]
    fn metric_requires_symmetric_entries() {
        let err = MetricChart::from_strings(&["x", "y"], &["1", "x", "0", "1"]).unwrap_err();
        assert!(matches!(err, Error::AsymmetricMetric(0, 1, _)));
    }

    #[test]
    fn metric_jets_seed_all_coordinates() {
        let g = polar().eval_jets(&[2.0, 0.5], 2).unwrap();
        // entry r^2: 4 + 4 dr + dr^2
        let e = &g[3];
        assert_eq!(e.taylor_coeff(&[0, 0]), 4.0);
        assert_eq!(e.taylor_coeff(&[1, 0]), 4.0);
        assert_eq!(e.taylor_coeff(&[2, 0]), 1.0);
        assert_eq!(e.taylor_coeff(&[0, 1]), 0.0);
    }

    #[test]
    fn signature_detection() {
        let mink =
            MetricChart::from_strings(&["t", "x", "y"], &["-1", "0", "0", "0", "1", "0", "0", "0", "1"])
                .unwrap();
        assert_eq!(mink.signature_at(&[0.0, 0.0, 0.0]).unwrap(), (2, 1));
        let degenerate = MetricChart::from_strings(&["x", "y"], &["x", "0", "0", "1"]).unwrap();
        assert!(matches!(
            degenerate.signature_at(&[0.0, 0.0]),
            Err(Error::Degenerate { .. })
        ));
    }

    #[test]
    fn submanifold_dimensions_enforced() {
        // k = n is rejected: the construction needs positive codimension
        let err = SubmanifoldChart::from_strings(2, &["a", "b"], &["a", "b"], &[0.0, 0.0]);
        assert!(matches!(err, Err(Error::CodimensionZero { k: 2, n: 2 })));
    }

    #[test]
    fn circle_jacobian_and_hessian() {
        let circle =
            SubmanifoldChart::from_strings(2, &["t"], &["cos(t)", "sin(t)"], &[0.0]).unwrap();
        let (phi, t, t2) = circle.eval_with_hessian(&[0.0f64]).unwrap();
        assert_relative_eq!(phi[0], 1.0);
        assert_relative_eq!(phi[1], 0.0);
        assert_relative_eq!(t[0][0], 0.0);
        assert_relative_eq!(t[0][1], 1.0);
        // second derivative is minus the position
        assert_relative_eq!(t2[0][0][0], -1.0);
        assert_relative_eq!(t2[0][0][1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn signature_validation_catches_wrong_type() {
        let g = MetricChart::from_strings(&["x", "y"], &["1", "0", "0", "1"]).unwrap();
        let line = SubmanifoldChart::from_strings(2, &["t"], &["t", "0"], &[0.0]).unwrap();
        let good = SignatureType::new((1, 0), (1, 0));
        validate_signature(&g, &line, &good).unwrap();
        let bad = SignatureType::new((0, 1), (1, 0));
        assert!(validate_signature(&g, &line, &bad).is_err());
    }

    #[test]
    fn h_diag_layout() {
        let sig = SignatureType::new((1, 1), (2, 1));
        assert_eq!(sig.h_diag(), vec![1.0, -1.0, 1.0, 1.0, -1.0]);
        assert_eq!(sig.k(), 2);
        assert_eq!(sig.codim(), 3);
        assert_eq!(sig.ambient_signature(), (3, 2));
    }
}
