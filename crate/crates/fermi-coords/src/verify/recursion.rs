//! Recovery of the frame coefficients from a measured metric jet.
//!
//! Writing the metric as g_ij = h_kl a^k_i a^l_j for an orthonormal coframe
//! a^k_i dz^i that is radially parallel, the coefficients a^k_i satisfy a
//! hierarchy of Euler-operator identities that determine every Taylor
//! coefficient from the metric jet itself: scaling operators in x and u act
//! invertibly degree by degree, with right-hand sides built from curvature
//! and connection data of the measured metric. Solving the hierarchy and
//! squaring the result back into h_kl a^k_i a^l_j closes the loop: the
//! reassembled jet must reproduce the measured one through the solved order.

use crate::chart::SignatureType;
use crate::curvature::{christoffel_jets, riemann_mixed_jets};
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::linalg::invert_jet_matrix;

use super::xu_degrees;

/// The coframe coefficient jets a^k_i (frame label k, coordinate slot i),
/// stored row-major as a[k * n + i].
#[derive(Debug, Clone)]
pub struct FrameCoefficients {
    pub sig: SignatureType,
    pub a: Vec<Jet>,
}

impl FrameCoefficients {
    pub fn order(&self) -> usize {
        self.a[0].order()
    }
}

/// Add into `dst` the coefficients of `src` of exact bidegree
/// (dx in the tangentials, du in the normals), scaled by `c`.
fn add_bidegree(dst: &mut Jet, src: &Jet, k: usize, dx: usize, du: usize, c: f64) {
    let shape = src.shape().clone();
    let coeffs = src.coeffs().to_vec();
    let out = dst.coeffs_mut();
    for (pos, &v) in coeffs.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        if xu_degrees(shape.index_at(pos), k) == (dx, du) {
            out[pos] += c * v;
        }
    }
}

/// Add into `dst` the product u^c * src, where src must not depend on the
/// normals. Coefficient of x^I in src becomes coefficient of x^I u^c.
fn add_times_normal(dst: &mut Jet, src: &Jet, k: usize, c: usize, scale: f64) {
    let shape = src.shape().clone();
    let order = dst.order();
    for (pos, &v) in src.coeffs().to_vec().iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let exps = shape.index_at(pos);
        debug_assert_eq!(xu_degrees(exps, k).1, 0);
        let total: usize = exps.iter().map(|&e| e as usize).sum();
        if total + 1 > order {
            continue;
        }
        let mut target = exps.to_vec();
        target[k + c] += 1;
        let tp = dst
            .shape()
            .position(&target)
            .expect("shifted index within shape");
        dst.coeffs_mut()[tp] += scale * v;
    }
}

fn fit_order(j: &Jet, order: usize) -> Jet {
    if j.order() > order {
        j.truncate(order)
    } else {
        j.pad_to(order)
    }
}

/// Solve the coefficient hierarchy for a measured metric jet. `gt` holds
/// the n^2 component jets in the adapted variables (tangentials first);
/// the result carries every a^k_i through total degree `order`.
pub fn solve_frame_coefficients(
    gt: &[Jet],
    sig: &SignatureType,
    order: usize,
) -> Result<FrameCoefficients> {
    let n = sig.n();
    let k = sig.k();
    let codim = sig.codim();
    let h = sig.h_diag();
    if gt.len() != n * n {
        return Err(Error::DimensionMismatch {
            context: "metric jet list",
            expected: n * n,
            got: gt.len(),
        });
    }
    if gt[0].nvars() != n {
        return Err(Error::DimensionMismatch {
            context: "metric jet variables",
            expected: n,
            got: gt[0].nvars(),
        });
    }
    if order < 2 {
        return Err(Error::OrderTooLow {
            context: "coefficient hierarchy",
            have: order,
            need: 2,
        });
    }
    if gt[0].order() < order {
        return Err(Error::OrderTooLow {
            context: "measured metric jet",
            have: gt[0].order(),
            need: order,
        });
    }
    let normals: Vec<usize> = (k..n).collect();

    // curvature and connection of the measured metric, padded up so every
    // product below lives at the working order; the padding zeros only
    // touch degrees that the explicit x- and u-factors push past `order`
    let gamma = christoffel_jets(gt, n)?;
    let rmixed: Vec<Jet> = riemann_mixed_jets(&gamma, n)?
        .iter()
        .map(|j| fit_order(j, order))
        .collect();
    let gm = |i: usize, j: usize, l: usize, m: usize| &rmixed[((i * n + j) * n + l) * n + m];

    // intrinsic curvature of the tangential block on the surface
    let gbar: Vec<Jet> = (0..k * k)
        .map(|p| {
            fit_order(
                &gt[(p / k) * n + (p % k)].restrict_zero(&normals),
                order + 1,
            )
        })
        .collect();
    let gamma_bar = christoffel_jets(&gbar, k)?;
    let rbar: Vec<Jet> = riemann_mixed_jets(&gamma_bar, k)?
        .iter()
        .map(|j| fit_order(j, order))
        .collect();

    // connection restricted to the surface; its mixed components are the
    // second fundamental form of the u = 0 slice in these variables
    let ell: Vec<Jet> = (0..codim * k * k)
        .map(|p| {
            let (c, rest) = (p / (k * k), p % (k * k));
            fit_order(
                &gamma[(((k + c) * n) + rest / k) * n + rest % k].restrict_zero(&normals),
                order,
            )
        })
        .collect();
    let lc = |c: usize, a: usize, b: usize| &ell[(c * k + a) * k + b];

    let xvar: Vec<Jet> = (0..k)
        .map(|v| Jet::variable(n, order, v, 0.0))
        .collect::<Result<_, _>>()?;
    let uvar: Vec<Jet> = (0..codim)
        .map(|v| Jet::variable(n, order, k + v, 0.0))
        .collect::<Result<_, _>>()?;

    let mut a: Vec<Jet> = (0..n * n)
        .map(|p| Jet::constant(n, order, if p / n == p % n { 1.0 } else { 0.0 }))
        .collect();

    // surface stage: (M^2 + M) on the degree-M part of the tangential
    // block equals a abar^-1 Rbar x x, driven by intrinsic curvature
    for m in 2..=order {
        let tan: Vec<Jet> = (0..k * k).map(|p| a[(p / k) * n + (p % k)].clone()).collect();
        let tinv = invert_jet_matrix(&tan, k)?;
        for al in 0..k {
            for be in 0..k {
                let mut rhs = Jet::constant(n, order, 0.0);
                for ga in 0..k {
                    let mut q = Jet::constant(n, order, 0.0);
                    for de in 0..k {
                        for si in 0..k {
                            for rho in 0..k {
                                let term = tinv[de * k + rho]
                                    .try_mul(&rbar[((ga * k + de) * k + si) * k + be])?
                                    .try_mul(&xvar[si])?
                                    .try_mul(&xvar[rho])?;
                                q = q.try_add(&term)?;
                            }
                        }
                    }
                    rhs = rhs.try_add(&tan[al * k + ga].try_mul(&q)?)?;
                }
                let scale = 1.0 / (m * m + m) as f64;
                add_bidegree(&mut a[al * n + be], &rhs, k, m, 0, scale);
            }
        }
    }

    // first normal derivative of the tangential block: set directly by the
    // connection's mixed components against the inverted surface solution
    let tan: Vec<Jet> = (0..k * k).map(|p| a[(p / k) * n + (p % k)].clone()).collect();
    let tinv = invert_jet_matrix(&tan, k)?;
    for c in 0..codim {
        for al in 0..k {
            for be in 0..k {
                let mut f = Jet::constant(n, order, 0.0);
                for de in 0..k {
                    f = f.try_add(&lc(c, be, de).try_mul(&tinv[de * k + al])?)?;
                }
                let scale = -h[al] * h[k + c];
                add_times_normal(&mut a[al * n + be], &f, k, c, scale);
            }
        }
    }

    // first normal derivative of the normal rows' tangential components:
    // (M + 1) inverts the scaling operator on x-degree M, with curvature
    // plus an antisymmetrized quadratic connection term on the right
    for co in 0..codim {
        for ci in 0..codim {
            for be in 0..k {
                let mut rhs = Jet::constant(n, order, 0.0);
                for al in 0..k {
                    let mut term = fit_order(
                        &gm(k + co, k + ci, al, be).restrict_zero(&normals),
                        order,
                    );
                    for ga in 0..k {
                        for rho in 0..k {
                            for si in 0..k {
                                let mut quad = lc(co, rho, al)
                                    .try_mul(lc(ci, be, si))?
                                    .try_sub(&lc(co, rho, be).try_mul(lc(ci, al, si))?)?;
                                quad = quad
                                    .try_mul(&tinv[rho * k + ga])?
                                    .try_mul(&tinv[si * k + ga])?;
                                term = term.try_add(&quad.scaled(h[k + ci] * h[ga]))?;
                            }
                        }
                    }
                    rhs = rhs.try_add(&term.try_mul(&xvar[al])?)?;
                }
                let mut f = Jet::constant(n, order, 0.0);
                for m in 1..order {
                    add_bidegree(&mut f, &rhs, k, m, 0, 1.0 / (m + 1) as f64);
                }
                add_times_normal(&mut a[(k + co) * n + be], &f, k, ci, 1.0);
            }
        }
    }

    // normal stages: (N^2 -+ N) on the u-degree-N part equals
    // a ainv R u u, now with full dependence on both variable groups
    for nd in 2..=order {
        let ainv = invert_jet_matrix(&a, n)?;
        for i in 0..n {
            for j in 0..n {
                let mut rhs = Jet::constant(n, order, 0.0);
                for r in 0..n {
                    let mut t = Jet::constant(n, order, 0.0);
                    for s in 0..n {
                        for ca in 0..codim {
                            for cg in 0..codim {
                                let term = ainv[s * n + (k + cg)]
                                    .try_mul(gm(r, s, k + ca, j))?
                                    .try_mul(&uvar[ca])?
                                    .try_mul(&uvar[cg])?;
                                t = t.try_add(&term)?;
                            }
                        }
                    }
                    rhs = rhs.try_add(&a[i * n + r].try_mul(&t)?)?;
                }
                let denom = if j < k {
                    (nd * nd - nd) as f64
                } else {
                    (nd * nd + nd) as f64
                };
                for m in 0..=order.saturating_sub(nd) {
                    add_bidegree(&mut a[i * n + j], &rhs, k, m, nd, 1.0 / denom);
                }
            }
        }
    }

    Ok(FrameCoefficients {
        sig: sig.clone(),
        a,
    })
}

/// Square the coefficients back into a metric jet: g_ij = h_kl a^k_i a^l_j.
pub fn reassemble_metric_jet(fc: &FrameCoefficients) -> Result<Vec<Jet>> {
    let n = fc.sig.n();
    let h = fc.sig.h_diag();
    let order = fc.order();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = Jet::constant(n, order, 0.0);
            for m in 0..n {
                acc.add_scaled_assign(h[m], &fc.a[m * n + i].try_mul(&fc.a[m * n + j])?);
            }
            out.push(acc);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{MetricChart, SubmanifoldChart};
    use crate::fermi::{FermiChart, GeodesicSolverConfig};
    use crate::frame::adapted_frame;
    use approx::assert_relative_eq;

    fn max_diff(a: &[Jet], b: &[Jet], order: usize) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.truncate(order).try_sub(&y.truncate(order)).unwrap().max_abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn flat_metric_gives_identity_coefficients() {
        let sig = SignatureType::new((2, 0), (1, 0));
        let n = 3;
        let gt: Vec<Jet> = (0..9)
            .map(|p| Jet::constant(n, 4, if p / n == p % n { 1.0 } else { 0.0 }))
            .collect();
        let fc = solve_frame_coefficients(&gt, &sig, 3).unwrap();
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { 1.0 } else { 0.0 };
                let dev = fc.a[i * n + j]
                    .try_sub(&Jet::constant(n, 3, expect))
                    .unwrap()
                    .max_abs();
                assert!(dev == 0.0, "a[{i}][{j}] deviates by {dev}");
            }
        }
        let back = reassemble_metric_jet(&fc).unwrap();
        assert_eq!(max_diff(&gt, &back, 3), 0.0);
    }

    #[test]
    fn circle_coefficients_are_exact() {
        // offset chart around the unit circle: g = diag((1+u)^2, 1), and
        // the solved coefficient a^t_t must be exactly 1 + u
        let n = 2;
        let sig = SignatureType::new((1, 0), (1, 0));
        let sh = crate::jet::shape(n, 4);
        let mut gtt = vec![0.0; sh.len()];
        for (pos, exps) in sh.indices().enumerate() {
            match (exps[0], exps[1]) {
                (0, 0) => gtt[pos] = 1.0,
                (0, 1) => gtt[pos] = 2.0,
                (0, 2) => gtt[pos] = 1.0,
                _ => {}
            }
        }
        let gt = vec![
            Jet::from_coeffs(n, 4, gtt),
            Jet::constant(n, 4, 0.0),
            Jet::constant(n, 4, 0.0),
            Jet::constant(n, 4, 1.0),
        ];
        let fc = solve_frame_coefficients(&gt, &sig, 3).unwrap();
        let att = &fc.a[0];
        assert_relative_eq!(att.taylor_coeff(&[0, 0]), 1.0, epsilon = 1e-12);
        assert_relative_eq!(att.taylor_coeff(&[0, 1]), 1.0, epsilon = 1e-12);
        assert!(att.taylor_coeff(&[1, 0]).abs() < 1e-12);
        assert!(att.taylor_coeff(&[0, 2]).abs() < 1e-12);
        assert!(fc.a[1].max_abs() < 1e-12);
        assert!(fc.a[2].max_abs() < 1e-12);

        let back = reassemble_metric_jet(&fc).unwrap();
        assert!(max_diff(&gt, &back, 3) < 1e-12);
    }

    #[test]
    fn sphere_chart_closes_the_loop() {
        let g = MetricChart::from_strings(
            &["z1", "z2", "z3"],
            &["1", "0", "0", "0", "1", "0", "0", "0", "1"],
        )
        .unwrap();
        let sphere = SubmanifoldChart::from_strings(
            3,
            &["p", "q"],
            &[
                "cos(p) * cos(q)",
                "sin(p) * cos(q)",
                "sin(q)",
            ],
            &[0.0, 0.0],
        )
        .unwrap();
        let sig = SignatureType::new((2, 0), (1, 0));
        let f = adapted_frame(&g, &sphere, &sig).unwrap();
        let chart =
            FermiChart::build(&g, &sphere, &f, &GeodesicSolverConfig::default(), 5, 0.5).unwrap();
        let gt = chart.metric_jets();
        let fc = solve_frame_coefficients(gt, &sig, 3).unwrap();
        let back = reassemble_metric_jet(&fc).unwrap();
        let dev = max_diff(gt, &back, 3);
        assert!(dev < 1e-6, "closed-loop deviation {dev}");
    }

    #[test]
    fn rejects_underresolved_input() {
        let sig = SignatureType::new((1, 0), (1, 0));
        let gt: Vec<Jet> = (0..4)
            .map(|p| Jet::constant(2, 2, if p / 2 == p % 2 { 1.0 } else { 0.0 }))
            .collect();
        let err = solve_frame_coefficients(&gt, &sig, 3).unwrap_err();
        assert!(matches!(err, Error::OrderTooLow { .. }));
    }
}
