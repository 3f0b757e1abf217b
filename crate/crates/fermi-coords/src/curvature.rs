//! Connection coefficients, curvature, and covariant derivative stacks.
//!
//! Conventions used throughout:
//!   Gamma^k_ij = (1/2) g^{kl} (d_i g_jl + d_j g_il - d_l g_ij)
//!   R^i_jkl    = d_k Gamma^i_lj - d_l Gamma^i_kj
//!              + Gamma^i_km Gamma^m_lj - Gamma^i_lm Gamma^m_kj
//!   R_ijkl     = g_im R^m_jkl
//! On the unit sphere this gives R_1212 = +1 in orthonormal slots.

use crate::chart::MetricChart;
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::linalg::{invert_generic, invert_jet_matrix};
use crate::scalar::{Dual, Scalar};
use crate::tensor::TensorAtPoint;

/// Connection coefficients as jets, one order below the metric jets.
/// Layout: gamma[(k*n + i)*n + j] = Gamma^k_ij.
pub fn christoffel_jets(g: &[Jet], n: usize) -> Result<Vec<Jet>> {
    assert_eq!(g.len(), n * n);
    let order = g[0].order();
    if order == 0 {
        return Err(Error::OrderTooLow {
            context: "connection coefficients",
            have: 0,
            need: 1,
        });
    }
    let target = order - 1;
    let ginv: Vec<Jet> = invert_jet_matrix(g, n)?
        .into_iter()
        .map(|e| e.truncate(target))
        .collect();
    let mut dg = Vec::with_capacity(n * n * n);
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                dg.push(g[i * n + j].derivative(l));
            }
        }
    }
    let at = |l: usize, i: usize, j: usize| &dg[(l * n + i) * n + j];
    let mut gamma = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut acc = Jet::zero_like(&dg[0]);
                for l in 0..n {
                    let mut term = at(i, j, l).try_add(at(j, i, l))?;
                    term = term.try_sub(at(l, i, j))?;
                    acc = acc.try_add(&ginv[k * n + l].try_mul(&term)?)?;
                }
                gamma.push(acc.scaled(0.5));
            }
        }
    }
    Ok(gamma)
}

/// Mixed curvature R^i_jkl as jets, one order below the connection jets.
pub fn riemann_mixed_jets(gamma: &[Jet], n: usize) -> Result<Vec<Jet>> {
    assert_eq!(gamma.len(), n * n * n);
    let order = gamma[0].order();
    if order == 0 {
        return Err(Error::OrderTooLow {
            context: "curvature tensor",
            have: 0,
            need: 1,
        });
    }
    let target = order - 1;
    let gm = |i: usize, j: usize, k: usize| &gamma[(i * n + j) * n + k];
    let gt: Vec<Jet> = gamma.iter().map(|j| j.truncate(target)).collect();
    let gmt = |i: usize, j: usize, k: usize| &gt[(i * n + j) * n + k];
    let mut r = Vec::with_capacity(n * n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut acc = gm(i, l, j).derivative(k).try_sub(&gm(i, k, j).derivative(l))?;
                    for m in 0..n {
                        acc = acc.try_add(&gmt(i, k, m).try_mul(gmt(m, l, j))?)?;
                        acc = acc.try_sub(&gmt(i, l, m).try_mul(gmt(m, k, j))?)?;
                    }
                    r.push(acc);
                }
            }
        }
    }
    Ok(r)
}

/// Lower the first slot: R_ijkl = g_im R^m_jkl.
pub fn lower_riemann(g: &[Jet], r_mixed: &[Jet], n: usize) -> Result<Vec<Jet>> {
    let target = r_mixed[0].order();
    let gt: Vec<Jet> = g.iter().map(|j| j.truncate(target.min(j.order()))).collect();
    let mut out = Vec::with_capacity(n * n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut acc = Jet::zero_like(&r_mixed[0]);
                    for m in 0..n {
                        acc = acc
                            .try_add(&gt[i * n + m].try_mul(&r_mixed[((m * n + j) * n + k) * n + l])?)?;
                    }
                    out.push(acc);
                }
            }
        }
    }
    Ok(out)
}

/// Connection coefficients of an expression metric at a point over any
/// scalar type, via one forward differentiation layer.
pub fn christoffel_scalar<S: Scalar>(metric: &MetricChart, z: &[S]) -> Result<Vec<S>> {
    let n = metric.dim();
    let seeded: Vec<Dual<S>> = z
        .iter()
        .enumerate()
        .map(|(i, v)| Dual::seeded(v.clone(), n, i))
        .collect();
    let gd = metric.eval(&seeded)?;
    let g: Vec<S> = gd.iter().map(|d| d.val.clone()).collect();
    let ginv = invert_generic(&g, n)?;
    // dg[l][i][j] = d_l g_ij
    let dg = |l: usize, i: usize, j: usize| -> &S { &gd[i * n + j].grad[l] };
    let mut gamma = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut acc: Option<S> = None;
                for l in 0..n {
                    let term = dg(i, j, l).add(dg(j, i, l)).sub(dg(l, i, j));
                    let piece = ginv[k * n + l].mul(&term);
                    acc = Some(match acc {
                        None => piece,
                        Some(a) => a.add(&piece),
                    });
                }
                let half = acc.expect("dimension is positive");
                gamma.push(half.mul(&half.constant_like(0.5)));
            }
        }
    }
    Ok(gamma)
}

/// Dense tensor of jets with explicit slot dimensions, row-major.
#[derive(Debug, Clone)]
pub struct JetTensor {
    dims: Vec<usize>,
    data: Vec<Jet>,
}

impl JetTensor {
    pub fn new(dims: Vec<usize>, data: Vec<Jet>) -> JetTensor {
        let len: usize = dims.iter().product();
        assert_eq!(data.len(), len);
        JetTensor { dims, data }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[Jet] {
        &self.data
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        let mut off = 0;
        for (d, &i) in self.dims.iter().zip(idx) {
            debug_assert!(i < *d);
            off = off * d + i;
        }
        off
    }

    pub fn get(&self, idx: &[usize]) -> &Jet {
        &self.data[self.offset(idx)]
    }

    /// Constant terms as a pointwise tensor.
    pub fn constant_terms(&self) -> TensorAtPoint {
        TensorAtPoint::from_data(
            &self.dims,
            self.data.iter().map(|j| j.constant_term()).collect(),
        )
    }

    /// Covariant derivative of an all-covariant tensor whose slots all have
    /// the ambient dimension. Appends the new derivative slot last and drops
    /// one jet order.
    pub fn covariant_derivative(&self, gamma: &[Jet], n: usize) -> Result<JetTensor> {
        assert!(self.dims.iter().all(|&d| d == n));
        let rank = self.dims.len();
        let order = self.data[0].order();
        if order == 0 {
            return Err(Error::OrderTooLow {
                context: "covariant derivative",
                have: 0,
                need: 1,
            });
        }
        let target = order - 1;
        let gt: Vec<Jet> = gamma.iter().map(|j| j.truncate(target.min(j.order()))).collect();
        let tt: Vec<Jet> = self.data.iter().map(|j| j.truncate(target)).collect();
        let mut dims = self.dims.clone();
        dims.push(n);
        let mut data = Vec::with_capacity(self.data.len() * n);
        let mut idx = vec![0usize; rank];
        for (off, entry) in self.data.iter().enumerate() {
            // decode off into idx
            let mut rem = off;
            for s in (0..rank).rev() {
                idx[s] = rem % n;
                rem /= n;
            }
            for c in 0..n {
                let mut acc = entry.derivative(c);
                for (s, &is) in idx.iter().enumerate() {
                    // stride of slot s in the flat layout
                    let stride = n.pow((rank - 1 - s) as u32);
                    let base = off - is * stride;
                    for q in 0..n {
                        let g = &gt[(q * n + c) * n + is];
                        acc = acc.try_sub(&g.try_mul(&tt[base + q * stride])?)?;
                    }
                }
                data.push(acc);
            }
        }
        Ok(JetTensor::new(dims, data))
    }
}

/// All-covariant curvature and its first `depth` covariant derivatives at a
/// point: returns [Rm, DRm, ..., D^depth Rm], slot layout (i,j,k,l,c1,...).
pub fn riemann_covariant_stack(
    metric: &MetricChart,
    z0: &[f64],
    depth: usize,
) -> Result<Vec<TensorAtPoint>> {
    let n = metric.dim();
    let g = metric.eval_jets(z0, depth + 2)?;
    let gamma = christoffel_jets(&g, n)?;
    let mixed = riemann_mixed_jets(&gamma, n)?;
    let lowered = lower_riemann(&g, &mixed, n)?;
    let mut current = JetTensor::new(vec![n; 4], lowered);
    let mut out = Vec::with_capacity(depth + 1);
    out.push(current.constant_terms());
    for _ in 0..depth {
        current = current.covariant_derivative(&gamma, n)?;
        out.push(current.constant_terms());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::MetricChart;
    use approx::assert_relative_eq;

    fn polar() -> MetricChart {
        MetricChart::from_strings(&["r", "th"], &["1", "0", "0", "r^2"]).unwrap()
    }

    fn sphere() -> MetricChart {
        MetricChart::from_strings(&["th", "ph"], &["1", "0", "0", "sin(th)^2"]).unwrap()
    }

    #[test]
    fn flat_curvature_vanishes() {
        let g = MetricChart::from_strings(&["x", "y"], &["1", "0", "0", "1"]).unwrap();
        let stack = riemann_covariant_stack(&g, &[0.3, -0.2], 1).unwrap();
        assert_eq!(stack[0].max_abs(), 0.0);
        assert_eq!(stack[1].max_abs(), 0.0);
    }

    #[test]
    fn polar_connection_coefficients() {
        let jets = polar().eval_jets(&[2.0, 0.5], 3).unwrap();
        let gamma = christoffel_jets(&jets, 2).unwrap();
        let at = |k: usize, i: usize, j: usize| gamma[(k * 2 + i) * 2 + j].constant_term();
        assert_relative_eq!(at(0, 1, 1), -2.0, epsilon = 1e-12); // -r
        assert_relative_eq!(at(1, 0, 1), 0.5, epsilon = 1e-12); // 1/r
        assert_relative_eq!(at(1, 1, 0), 0.5, epsilon = 1e-12);
        assert_relative_eq!(at(0, 0, 0), 0.0, epsilon = 1e-12);
        // jet content: Gamma^r_thth = -r = -2 - dr
        assert_relative_eq!(
            gamma[(0 * 2 + 1) * 2 + 1].taylor_coeff(&[1, 0]),
            -1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn scalar_connection_matches_jet_connection() {
        let z = [1.3, 0.7];
        let gamma_pt = christoffel_scalar::<f64>(&polar(), &z).unwrap();
        let jets = polar().eval_jets(&z, 2).unwrap();
        let gamma_jet = christoffel_jets(&jets, 2).unwrap();
        for (a, b) in gamma_pt.iter().zip(&gamma_jet) {
            assert_relative_eq!(*a, b.constant_term(), epsilon = 1e-12);
        }
    }

    #[test]
    fn sphere_sectional_curvature_is_plus_one() {
        let z0 = [std::f64::consts::FRAC_PI_2, 0.4];
        let stack = riemann_covariant_stack(&sphere(), &z0, 0).unwrap();
        // at the equator the coordinate frame is orthonormal
        assert_relative_eq!(stack[0].get(&[0, 1, 0, 1]), 1.0, epsilon = 1e-10);
        assert_relative_eq!(stack[0].get(&[1, 0, 0, 1]), -1.0, epsilon = 1e-10);
    }

    /// Central-difference check of the curvature against independently
    /// evaluated connection coefficients.
    #[test]
    fn curvature_matches_finite_differences_of_connection() {
        let g = sphere();
        let n = 2;
        let z0 = [1.1, 0.4];
        let h = 1e-5;
        let gamma_at = |z: &[f64]| christoffel_scalar::<f64>(&g, z).unwrap();
        let g0 = gamma_at(&z0);
        let mut dgamma = vec![vec![0.0; n * n * n]; n];
        for c in 0..n {
            let mut zp = z0;
            zp[c] += h;
            let mut zm = z0;
            zm[c] -= h;
            let gp = gamma_at(&zp);
            let gm = gamma_at(&zm);
            for e in 0..n * n * n {
                dgamma[c][e] = (gp[e] - gm[e]) / (2.0 * h);
            }
        }
        let gm = |i: usize, j: usize, k: usize| g0[(i * n + j) * n + k];
        let jets = g.eval_jets(&z0, 2).unwrap();
        let mixed = riemann_mixed_jets(&christoffel_jets(&jets, n).unwrap(), n).unwrap();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut want = dgamma[k][(i * n + l) * n + j] - dgamma[l][(i * n + k) * n + j];
                        for m in 0..n {
                            want += gm(i, k, m) * gm(m, l, j) - gm(i, l, m) * gm(m, k, j);
                        }
                        let got = mixed[((i * n + j) * n + k) * n + l].constant_term();
                        assert_relative_eq!(got, want, epsilon = 1e-6, max_relative = 1e-6);
                    }
                }
            }
        }
    }

    fn wavy() -> MetricChart {
        // symmetric, curvature-rich, no special symmetry
        MetricChart::from_strings(
            &["x", "y", "z"],
            &[
                "1 + 0.2 * sin(x + y)",
                "0.1 * x * z",
                "0.05 * y",
                "0.1 * x * z",
                "1 + 0.1 * x^2",
                "0.08 * sin(z)",
                "0.05 * y",
                "0.08 * sin(z)",
                "1 + 0.15 * cos(x)",
            ],
        )
        .unwrap()
    }

    #[test]
    fn lowered_curvature_symmetries() {
        let n = 3;
        let z0 = [0.3, -0.4, 0.2];
        let stack = riemann_covariant_stack(&wavy(), &z0, 0).unwrap();
        let r = &stack[0];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let v = r.get(&[i, j, k, l]);
                        assert_relative_eq!(v, -r.get(&[j, i, k, l]), epsilon = 1e-9);
                        assert_relative_eq!(v, -r.get(&[i, j, l, k]), epsilon = 1e-9);
                        assert_relative_eq!(v, r.get(&[k, l, i, j]), epsilon = 1e-9);
                        // first Bianchi
                        let cyc =
                            v + r.get(&[i, k, l, j]) + r.get(&[i, l, j, k]);
                        assert!(cyc.abs() < 1e-9, "bianchi1 {cyc}");
                    }
                }
            }
        }
    }

    #[test]
    fn second_bianchi_identity() {
        let n = 3;
        let z0 = [0.3, -0.4, 0.2];
        let stack = riemann_covariant_stack(&wavy(), &z0, 1).unwrap();
        let dr = &stack[1];
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        for m in 0..n {
                            let s = dr.get(&[i, j, k, l, m])
                                + dr.get(&[i, j, l, m, k])
                                + dr.get(&[i, j, m, k, l]);
                            worst = worst.max(s.abs());
                        }
                    }
                }
            }
        }
        assert!(worst < 1e-7, "second bianchi residual {worst}");
    }
}
