//! Second fundamental form of an embedded submanifold, its normal-bundle
//! covariant derivatives, and the Gauss relation between intrinsic and
//! ambient curvature.

use crate::chart::{MetricChart, SubmanifoldChart};
use crate::curvature::{christoffel_jets, christoffel_scalar, lower_riemann, riemann_mixed_jets, riemann_covariant_stack};
use crate::error::Result;
use crate::frame::AdaptedFrame;
use crate::jet::Jet;
use crate::linalg::invert_jet_matrix;
use crate::tensor::TensorAtPoint;

/// Pullback metric entries as jets in the parameters about the base point.
pub fn induced_metric(
    metric: &MetricChart,
    sub: &SubmanifoldChart,
    order: usize,
) -> Result<Vec<Jet>> {
    let k = sub.dim();
    let n = sub.ambient_dim();
    let phi = sub.eval_jets(order + 1)?;
    let t: Vec<Vec<Jet>> = (0..k)
        .map(|a| phi.iter().map(|p| p.derivative(a)).collect())
        .collect();
    let gphi: Vec<Jet> = metric
        .eval(&phi)?
        .into_iter()
        .map(|e| e.truncate(order))
        .collect();
    let mut out = Vec::with_capacity(k * k);
    for a in 0..k {
        for b in 0..k {
            let mut acc = Jet::zero_like(&gphi[0]);
            for i in 0..n {
                for j in 0..n {
                    acc = acc.try_add(&gphi[i * n + j].try_mul(&t[a][i])?.try_mul(&t[b][j])?)?;
                }
            }
            out.push(acc);
        }
    }
    Ok(out)
}

/// Internal state for one level of the derivative recursion: a vector-valued
/// covariant tensor field along the submanifold, all lower slots parameter
/// indexed, value slot ambient, entries as jets in the parameters.
struct LevelField {
    k: usize,
    n: usize,
    rank: usize,
    data: Vec<Jet>,
}

impl LevelField {
    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank);
        let mut off = 0;
        for &i in idx {
            debug_assert!(i < self.k);
            off = off * self.k + i;
        }
        off * self.n
    }

    fn vector(&self, idx: &[usize]) -> &[Jet] {
        let off = self.offset(idx);
        &self.data[off..off + self.n]
    }
}

struct Geometry {
    k: usize,
    n: usize,
    /// g_ij at phi(s)
    gphi: Vec<Jet>,
    /// Gamma^i_jk at phi(s)
    gamma_phi: Vec<Jet>,
    /// Gammabar^c_ab of the pullback metric
    gamma_bar: Vec<Jet>,
    /// pullback inverse
    gbar_inv: Vec<Jet>,
    /// parameter derivative columns T_a
    t: Vec<Vec<Jet>>,
}

impl Geometry {
    fn build(metric: &MetricChart, sub: &SubmanifoldChart, order: usize) -> Result<Geometry> {
        let k = sub.dim();
        let n = sub.ambient_dim();
        let phi = sub.eval_jets(order + 2)?;
        let t: Vec<Vec<Jet>> = (0..k)
            .map(|a| phi.iter().map(|p| p.derivative(a)).collect())
            .collect();
        let gphi: Vec<Jet> = metric.eval(&phi)?.into_iter().collect();
        let gamma_phi = christoffel_scalar::<Jet>(metric, &phi)?;
        let gbar = induced_metric(metric, sub, order + 1)?;
        let gamma_bar = christoffel_jets(&gbar, k)?;
        let gbar_inv = invert_jet_matrix(&gbar, k)?;
        Ok(Geometry {
            k,
            n,
            gphi,
            gamma_phi,
            gamma_bar,
            gbar_inv,
            t,
        })
    }

    /// g(v, T_a) for an ambient vector of jets, truncated to `ord`.
    fn pair_with_column(&self, v: &[Jet], a: usize, ord: usize) -> Result<Jet> {
        let n = self.n;
        let mut acc = Jet::zero_like(&v[0].truncate(ord));
        for i in 0..n {
            for l in 0..n {
                let g = self.gphi[i * n + l].truncate(ord);
                acc = acc.try_add(
                    &g.try_mul(&v[i].truncate(ord))?
                        .try_mul(&self.t[a][l].truncate(ord))?,
                )?;
            }
        }
        Ok(acc)
    }

    /// Remove the tangential part of an ambient vector of jets at order `ord`.
    fn project_normal(&self, v: &[Jet], ord: usize) -> Result<Vec<Jet>> {
        let k = self.k;
        let mut out: Vec<Jet> = v.iter().map(|x| x.truncate(ord)).collect();
        for a in 0..k {
            for b in 0..k {
                let coeff = self
                    .gbar_inv[a * k + b]
                    .truncate(ord)
                    .try_mul(&self.pair_with_column(v, a, ord)?)?;
                for i in 0..self.n {
                    let piece = coeff.try_mul(&self.t[b][i].truncate(ord))?;
                    out[i] = out[i].try_sub(&piece)?;
                }
            }
        }
        Ok(out)
    }
}

/// Second fundamental form and its covariant derivatives along the
/// submanifold at the base point, in the adapted frame.
///
/// Returns [B, DB, ..., D^depth B] where B has slots (alpha, beta, gamma')
/// with gamma' the normal component, and each derivative appends one
/// tangential slot. Slot dims: [k, k, n-k] then k repeated.
pub fn second_fundamental_form(
    metric: &MetricChart,
    sub: &SubmanifoldChart,
    frame: &AdaptedFrame,
    depth: usize,
) -> Result<Vec<TensorAtPoint>> {
    let geo = Geometry::build(metric, sub, depth)?;
    let k = geo.k;
    let n = geo.n;
    let q = depth;

    // level 0: covariant Hessian of the embedding minus its tangential part
    let mut t2 = vec![Vec::new(); k * k];
    for a in 0..k {
        for b in 0..k {
            t2[a * k + b] = geo
                .t[a]
                .iter()
                .map(|col| col.derivative(b))
                .collect::<Vec<_>>();
        }
    }

    let mut data = Vec::with_capacity(k * k * n);
    for a in 0..k {
        for b in 0..k {
            let mut w: Vec<Jet> = (0..n).map(|i| t2[a * k + b][i].truncate(q)).collect();
            for (i, wi) in w.iter_mut().enumerate() {
                for j in 0..n {
                    for l in 0..n {
                        let term = geo.gamma_phi[(i * n + j) * n + l]
                            .truncate(q)
                            .try_mul(&geo.t[a][j].truncate(q))?
                            .try_mul(&geo.t[b][l].truncate(q))?;
                        *wi = wi.try_add(&term)?;
                    }
                }
                for c in 0..k {
                    let term = geo.gamma_bar[(c * k + a) * k + b]
                        .truncate(q)
                        .try_mul(&geo.t[c][i].truncate(q))?;
                    *wi = wi.try_sub(&term)?;
                }
            }
            data.extend(w);
        }
    }
    let mut level = LevelField {
        k,
        n,
        rank: 2,
        data,
    };

    let mut levels_out = Vec::with_capacity(depth + 1);
    levels_out.push(level_to_frame(&level, frame)?);

    for j in 0..depth {
        let ord = q - j;
        let target = ord - 1;
        let rank = level.rank;
        let mut data = Vec::with_capacity(level.data.len() * k);
        for flat in 0..level.data.len() / n {
            // decode the parameter multi-index
            let mut idx = vec![0usize; rank];
            let mut rem = flat;
            for s in (0..rank).rev() {
                idx[s] = rem % k;
                rem /= k;
            }
            for c in 0..k {
                // ambient connection correction on the value slot
                let cur = level.vector(&idx);
                let mut v: Vec<Jet> = (0..n).map(|i| cur[i].derivative(c)).collect();
                for (i, vi) in v.iter_mut().enumerate() {
                    for jj in 0..n {
                        for l in 0..n {
                            let term = geo.gamma_phi[(i * n + jj) * n + l]
                                .truncate(target)
                                .try_mul(&geo.t[c][jj].truncate(target))?
                                .try_mul(&cur[l].truncate(target))?;
                            *vi = vi.try_add(&term)?;
                        }
                    }
                }
                let mut v = geo.project_normal(&v, target)?;
                // pullback connection on every lower slot
                for s in 0..rank {
                    let is = idx[s];
                    for d in 0..k {
                        let mut nidx = idx.clone();
                        nidx[s] = d;
                        let neighbor = level.vector(&nidx);
                        let gb = geo.gamma_bar[(d * k + c) * k + is].truncate(target);
                        for i in 0..n {
                            let term = gb.try_mul(&neighbor[i].truncate(target))?;
                            v[i] = v[i].try_sub(&term)?;
                        }
                    }
                }
                data.extend(v);
            }
        }
        level = LevelField {
            k,
            n,
            rank: rank + 1,
            data,
        };
        levels_out.push(level_to_frame(&level, frame)?);
    }
    Ok(levels_out)
}

/// Constant terms of a level field converted to adapted-frame components:
/// parameter slots against the tangential frame, value slot lowered against
/// the normal frame. Result slots: (alpha, beta, gamma', derivs...).
fn level_to_frame(level: &LevelField, frame: &AdaptedFrame) -> Result<TensorAtPoint> {
    let k = level.k;
    let n = level.n;
    let mut dims = vec![k; level.rank];
    dims.push(n);
    let consts = TensorAtPoint::from_data(
        &dims,
        level.data.iter().map(|j| j.constant_term()).collect(),
    );
    let cparams: Vec<Vec<f64>> = frame.tangent_params().to_vec();
    let mut t = consts;
    for slot in 0..level.rank {
        t = t.contract_slot(slot, &cparams)?;
    }
    // lower the ambient value slot against the normal frame vectors
    let g0 = frame.metric_at_base();
    let covectors: Vec<Vec<f64>> = frame
        .normal()
        .iter()
        .map(|e| {
            (0..n)
                .map(|i| (0..n).map(|j| g0[i * n + j] * e[j]).sum())
                .collect()
        })
        .collect();
    t = t.contract_slot(level.rank, &covectors)?;
    // layout (alpha, beta, d1..dm, gamma') -> (alpha, beta, gamma', d1..dm)
    Ok(t.move_slot(level.rank, 2))
}

/// Largest deviation of the intrinsic curvature at the base point from the
/// ambient curvature corrected by the second fundamental form.
pub fn gauss_residual(
    metric: &MetricChart,
    sub: &SubmanifoldChart,
    frame: &AdaptedFrame,
) -> Result<f64> {
    let k = sub.dim();
    let codim = sub.ambient_dim() - k;
    let h = frame.sig().h_diag();

    // intrinsic curvature of the pullback metric, in frame components
    let gbar = induced_metric(metric, sub, 2)?;
    let gamma_bar = christoffel_jets(&gbar, k)?;
    let mixed = riemann_mixed_jets(&gamma_bar, k)?;
    let lowered = lower_riemann(&gbar, &mixed, k)?;
    let intrinsic = TensorAtPoint::from_data(
        &[k, k, k, k],
        lowered.iter().map(|j| j.constant_term()).collect(),
    )
    .contract_all_slots(frame.tangent_params())?;

    // ambient curvature restricted to tangential frame slots
    let ambient = riemann_covariant_stack(metric, frame.base_point(), 0)?[0]
        .contract_all_slots(frame.vectors())?;

    let b = &second_fundamental_form(metric, sub, frame, 0)?[0];
    let mut worst = 0.0f64;
    for a in 0..k {
        for bb in 0..k {
            for c in 0..k {
                for d in 0..k {
                    let mut gauss = ambient.get(&[a, bb, c, d]);
                    for g in 0..codim {
                        gauss += h[k + g]
                            * (b.get(&[a, c, g]) * b.get(&[bb, d, g])
                                - b.get(&[a, d, g]) * b.get(&[bb, c, g]));
                    }
                    worst = worst.max((intrinsic.get(&[a, bb, c, d]) - gauss).abs());
                }
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{SignatureType, SubmanifoldChart};
    use crate::frame::adapted_frame;
    use approx::assert_relative_eq;

    fn euclidean(n: usize) -> MetricChart {
        let names: Vec<String> = (0..n).map(|i| format!("z{i}")).collect();
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let entries: Vec<&str> = (0..n * n)
            .map(|e| if e / n == e % n { "1" } else { "0" })
            .collect();
        MetricChart::from_strings(&refs, &entries).unwrap()
    }

    #[test]
    fn affine_subspace_has_no_second_form() {
        let g = euclidean(3);
        let plane =
            SubmanifoldChart::from_strings(3, &["a", "b"], &["a", "b", "0"], &[0.1, -0.2]).unwrap();
        let sig = SignatureType::new((2, 0), (1, 0));
        let f = adapted_frame(&g, &plane, &sig).unwrap();
        let forms = second_fundamental_form(&g, &plane, &f, 2).unwrap();
        for form in &forms {
            assert_eq!(form.max_abs(), 0.0);
        }
    }

    #[test]
    fn circle_second_form_is_minus_one_and_parallel() {
        let g = euclidean(2);
        let circle =
            SubmanifoldChart::from_strings(2, &["t"], &["cos(t)", "sin(t)"], &[0.0]).unwrap();
        let sig = SignatureType::new((1, 0), (1, 0));
        let f = adapted_frame(&g, &circle, &sig).unwrap();
        let forms = second_fundamental_form(&g, &circle, &f, 2).unwrap();
        assert_relative_eq!(forms[0].get(&[0, 0, 0]), -1.0, epsilon = 1e-12);
        // arclength frame along a circle keeps the form constant
        assert!(forms[1].max_abs() < 1e-12);
        assert!(forms[2].max_abs() < 1e-11);
    }

    #[test]
    fn graph_curvature_and_first_derivative() {
        // u = (kappa/2) t^2 + (c/6) t^3 has B_ttu = kappa and derivative c at 0
        let kappa = 2.0;
        let c = 0.7;
        let g = euclidean(2);
        let expr = format!("{kappa} * t^2 / 2 + {c} * t^3 / 6");
        let graph = SubmanifoldChart::from_strings(2, &["t"], &["t", &expr], &[0.0]).unwrap();
        let sig = SignatureType::new((1, 0), (1, 0));
        let f = adapted_frame(&g, &graph, &sig).unwrap();
        let forms = second_fundamental_form(&g, &graph, &f, 1).unwrap();
        assert_relative_eq!(forms[0].get(&[0, 0, 0]), kappa, epsilon = 1e-12);
        assert_relative_eq!(forms[1].get(&[0, 0, 0, 0]), c, epsilon = 1e-12);
    }

    #[test]
    fn second_form_magnitude_survives_ambient_rotation() {
        // the same circle described in coordinates rotated by 0.4
        let g = euclidean(2);
        let th = 0.4f64;
        let (c, s) = (th.cos(), th.sin());
        let rotated = SubmanifoldChart::from_strings(
            2,
            &["t"],
            &[
                &format!("{c} * cos(t) - {s} * sin(t)"),
                &format!("{s} * cos(t) + {c} * sin(t)"),
            ],
            &[0.0],
        )
        .unwrap();
        let sig = SignatureType::new((1, 0), (1, 0));
        let f = adapted_frame(&g, &rotated, &sig).unwrap();
        let forms = second_fundamental_form(&g, &rotated, &f, 0).unwrap();
        let b = forms[0].get(&[0, 0, 0]);
        assert_relative_eq!(b * b, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn sphere_satisfies_gauss_relation() {
        let g = euclidean(3);
        let sphere = SubmanifoldChart::from_strings(
            3,
            &["th", "ps"],
            &["sin(th) * cos(ps)", "sin(th) * sin(ps)", "cos(th)"],
            &[std::f64::consts::FRAC_PI_2, 0.0],
        )
        .unwrap();
        let sig = SignatureType::new((2, 0), (1, 0));
        let f = adapted_frame(&g, &sphere, &sig).unwrap();
        // sanity: both principal curvatures are -1 against the outward normal
        let forms = second_fundamental_form(&g, &sphere, &f, 0).unwrap();
        assert_relative_eq!(forms[0].get(&[0, 0, 0]), -1.0, epsilon = 1e-10);
        assert_relative_eq!(forms[0].get(&[1, 1, 0]), -1.0, epsilon = 1e-10);
        assert!(gauss_residual(&g, &sphere, &f).unwrap() < 1e-10);
    }

    #[test]
    fn saddle_satisfies_gauss_relation() {
        let g = euclidean(3);
        let saddle = SubmanifoldChart::from_strings(
            3,
            &["s", "t"],
            &["s", "t", "(s^2 - t^2) / 2"],
            &[0.0, 0.0],
        )
        .unwrap();
        let sig = SignatureType::new((2, 0), (1, 0));
        let f = adapted_frame(&g, &saddle, &sig).unwrap();
        let forms = second_fundamental_form(&g, &saddle, &f, 0).unwrap();
        assert_relative_eq!(forms[0].get(&[0, 0, 0]), 1.0, epsilon = 1e-12);
        assert_relative_eq!(forms[0].get(&[1, 1, 0]), -1.0, epsilon = 1e-12);
        assert!(gauss_residual(&g, &saddle, &f).unwrap() < 1e-10);
    }

    #[test]
    fn curved_ambient_gauss_relation() {
        // equatorial 2-sphere inside the round 3-sphere
        let g = MetricChart::from_strings(
            &["ch", "th", "ps"],
            &[
                "1", "0", "0",
                "0", "sin(ch)^2", "0",
                "0", "0", "sin(ch)^2 * sin(th)^2",
            ],
        )
        .unwrap();
        let half_pi = std::f64::consts::FRAC_PI_2;
        let sub = SubmanifoldChart::new(
            3,
            vec!["a".into(), "b".into()],
            vec![
                crate::expr::Expr::constant(half_pi),
                crate::expr::parse_expression("a", &["a", "b"]).unwrap(),
                crate::expr::parse_expression("b", &["a", "b"]).unwrap(),
            ],
            vec![half_pi, 0.0],
        )
        .unwrap();
        let sig = SignatureType::new((2, 0), (1, 0));
        let f = adapted_frame(&g, &sub, &sig).unwrap();
        // the equator is totally geodesic, so intrinsic must match ambient
        let forms = second_fundamental_form(&g, &sub, &f, 0).unwrap();
        assert!(forms[0].max_abs() < 1e-10);
        assert!(gauss_residual(&g, &sub, &f).unwrap() < 1e-10);
    }
}
