//! Linear-order prediction of the measured metric's derivatives.
//!
//! Every partial derivative of the measured metric at the base point,
//! modulo terms quadratic in curvature and second fundamental form, is one
//! of thirteen explicit expressions in those tensors. First derivatives
//! carry no quadratic correction at all, so they are compared at absolute
//! tolerance; higher derivatives are compared through families that scale
//! the geometry by a small parameter, where the quadratic remainder dies
//! off one order faster than the linear term.

use serde::Serialize;

use crate::chart::{MetricChart, SignatureType};
use crate::curvature::riemann_covariant_stack;
use crate::error::{Error, Result};
use crate::fermi::fit_slope;
use crate::frame::AdaptedFrame;
use crate::jet::{shape, Jet};
use crate::tensor::TensorAtPoint;

use super::{expand_indices, relative_dev, xu_degrees, MIN_SCALING_EXPONENT, TOL_SLOPE_ABS,
    TOL_SLOPE_REL};

/// Which displayed formula a predicted value came from. One variant per
/// row of the table, including the rows that vanish identically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RowClass {
    TangentTangentConstant,
    TangentTangentFirstX,
    TangentTangentCurvature,
    TangentTangentFundamental,
    TangentTangentNormalPair,
    TangentNormalSurface,
    TangentNormalFirstU,
    TangentNormalMixed,
    TangentNormalNormalPair,
    NormalNormalConstant,
    NormalNormalSurface,
    NormalNormalFirstU,
    NormalNormalNormalPair,
}

/// Predicted value of one partial derivative of one metric component.
#[derive(Debug, Clone)]
pub struct PredictedEntry {
    pub i: usize,
    pub j: usize,
    /// Exponent vector of the derivative, tangential variables first.
    pub index: Vec<usize>,
    /// Predicted partial derivative (not divided by the multifactorial).
    pub value: f64,
    pub row: RowClass,
}

/// The full table of predictions through a given derivative order.
#[derive(Debug, Clone)]
pub struct LinearPrediction {
    pub sig: SignatureType,
    pub order: usize,
    /// Upper-triangle entries (i <= j); the table is symmetric in (i, j).
    pub entries: Vec<PredictedEntry>,
}

impl LinearPrediction {
    pub fn lookup(&self, i: usize, j: usize, index: &[usize]) -> Option<&PredictedEntry> {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.entries
            .iter()
            .find(|e| e.i == a && e.j == b && e.index == index)
    }

    /// Predictions as jets (Taylor coefficients, so each value is divided
    /// by the multifactorial of its index).
    pub fn jets(&self) -> Vec<Jet> {
        let n = self.sig.n();
        let sh = shape(n, self.order);
        let mut coeffs = vec![vec![0.0; sh.len()]; n * n];
        for e in &self.entries {
            let exps: Vec<u8> = e.index.iter().map(|&v| v as u8).collect();
            let pos = sh.position(&exps).expect("entry index within shape");
            let fact: f64 = e
                .index
                .iter()
                .map(|&v| (1..=v as u64).product::<u64>() as f64)
                .product();
            coeffs[e.i * n + e.j][pos] = e.value / fact;
            coeffs[e.j * n + e.i][pos] = e.value / fact;
        }
        coeffs
            .into_iter()
            .map(|c| Jet::from_coeffs(n, self.order, c))
            .collect()
    }
}

/// Average `f` over all distinct arrangements of `items`. Each distinct
/// arrangement of a multiset occurs equally often among the full factorial
/// of permutations, so this equals the factorial average.
fn average_over_arrangements(items: &[usize], f: &mut dyn FnMut(&[usize]) -> f64) -> f64 {
    let mut sorted = items.to_vec();
    sorted.sort_unstable();
    let mut used = vec![false; sorted.len()];
    let mut current = Vec::with_capacity(sorted.len());
    let mut sum = 0.0;
    let mut count = 0usize;
    fn rec(
        sorted: &[usize],
        used: &mut [bool],
        current: &mut Vec<usize>,
        f: &mut dyn FnMut(&[usize]) -> f64,
        sum: &mut f64,
        count: &mut usize,
    ) {
        if current.len() == sorted.len() {
            *sum += f(current);
            *count += 1;
            return;
        }
        for i in 0..sorted.len() {
            if used[i] || (i > 0 && sorted[i] == sorted[i - 1] && !used[i - 1]) {
                continue;
            }
            used[i] = true;
            current.push(sorted[i]);
            rec(sorted, used, current, f, sum, count);
            current.pop();
            used[i] = false;
        }
    }
    if sorted.is_empty() {
        return f(&[]);
    }
    rec(&sorted, &mut used, &mut current, f, &mut sum, &mut count);
    sum / count as f64
}

fn need_curv(curv: &[TensorAtPoint], m: usize) -> Result<&TensorAtPoint> {
    curv.get(m).ok_or(Error::DepthTooLow {
        context: "curvature derivative stack",
        have: curv.len(),
        need: m + 1,
    })
}

fn need_fund(fund: &[TensorAtPoint], m: usize) -> Result<&TensorAtPoint> {
    fund.get(m).ok_or(Error::DepthTooLow {
        context: "second-fundamental-form derivative stack",
        have: fund.len(),
        need: m + 1,
    })
}

/// Ambient curvature derivative stack at the frame's base point, converted
/// to adapted-frame components (every slot contracted with the frame).
pub fn frame_curvature_stack(
    metric: &MetricChart,
    frame: &AdaptedFrame,
    depth: usize,
) -> Result<Vec<TensorAtPoint>> {
    let stack = riemann_covariant_stack(metric, frame.base_point(), depth)?;
    stack
        .iter()
        .map(|t| t.contract_all_slots(frame.vectors()))
        .collect()
}

/// Predict every partial derivative with |K| <= order from the curvature
/// stack and the second-fundamental-form stack, both in adapted-frame
/// components ([R, DR, ...] lowered with slots (i,j,k,l,derivs...);
/// [L, DL, ...] with slots (alpha, beta, gamma', derivs...)).
pub fn predict_linear_jet(
    curv: &[TensorAtPoint],
    fund: &[TensorAtPoint],
    sig: &SignatureType,
    order: usize,
) -> Result<LinearPrediction> {
    let k = sig.k();
    let n = sig.n();
    let h = sig.h_diag();
    let sh = shape(n, order);
    let mut entries = Vec::new();

    for exps in sh.indices() {
        let (m_deg, n_deg) = xu_degrees(exps, k);
        let tau = expand_indices(exps, 0, k);
        let sigma = expand_indices(exps, k, n);
        let index: Vec<usize> = exps.iter().map(|&e| e as usize).collect();
        for i in 0..n {
            for j in i..n {
                let (value, row) =
                    predict_one(curv, fund, &h, k, i, j, m_deg, n_deg, &tau, &sigma)?;
                entries.push(PredictedEntry {
                    i,
                    j,
                    index: index.clone(),
                    value,
                    row,
                });
            }
        }
    }
    Ok(LinearPrediction {
        sig: sig.clone(),
        order,
        entries,
    })
}

#[allow(clippy::too_many_arguments)]
fn predict_one(
    curv: &[TensorAtPoint],
    fund: &[TensorAtPoint],
    h: &[f64],
    k: usize,
    i: usize,
    j: usize,
    m_deg: usize,
    n_deg: usize,
    tau: &[usize],
    sigma: &[usize],
) -> Result<(f64, RowClass)> {
    let tangential = |idx: usize| idx < k;
    match (tangential(i), tangential(j)) {
        (true, true) => match (n_deg, m_deg) {
            (0, 0) => {
                let v = if i == j { h[i] } else { 0.0 };
                Ok((v, RowClass::TangentTangentConstant))
            }
            (0, 1) => Ok((0.0, RowClass::TangentTangentFirstX)),
            (0, m) => {
                let t = need_curv(curv, m - 2)?;
                let coeff = 2.0 * (m as f64 - 1.0) / (m as f64 + 1.0);
                let v = average_over_arrangements(tau, &mut |p| {
                    let mut idx = vec![i, p[0], p[1], j];
                    idx.extend_from_slice(&p[2..]);
                    t.get(&idx)
                });
                Ok((coeff * v, RowClass::TangentTangentCurvature))
            }
            (1, m) => {
                let t = need_fund(fund, m)?;
                let gp = sigma[0];
                let v = average_over_arrangements(tau, &mut |p| {
                    let mut idx = vec![i, j, gp];
                    idx.extend_from_slice(p);
                    t.get(&idx)
                });
                Ok((-2.0 * v, RowClass::TangentTangentFundamental))
            }
            (nn, m) => {
                let t = need_curv(curv, nn - 2 + m)?;
                let v = pair_row_value(t, k, i, j, sigma, tau);
                Ok((2.0 * v, RowClass::TangentTangentNormalPair))
            }
        },
        (true, false) | (false, true) => {
            // canonical orientation: alpha tangential, beta' normal
            let (alpha, bp) = if tangential(i) { (i, j) } else { (j, i) };
            match (n_deg, m_deg) {
                (0, _) => Ok((0.0, RowClass::TangentNormalSurface)),
                (1, 0) => Ok((0.0, RowClass::TangentNormalFirstU)),
                (1, m) => {
                    let t = need_curv(curv, m - 1)?;
                    let gp = k + sigma[0];
                    let coeff = -(m as f64) / (m as f64 + 1.0);
                    let v = average_over_arrangements(tau, &mut |p| {
                        let mut idx = vec![bp, gp, alpha, p[0]];
                        idx.extend_from_slice(&p[1..]);
                        t.get(&idx)
                    });
                    Ok((coeff * v, RowClass::TangentNormalMixed))
                }
                (nn, m) => {
                    let t = need_curv(curv, nn - 2 + m)?;
                    let coeff = 2.0 * nn as f64 / (nn as f64 + 1.0);
                    let v = pair_row_value(t, k, alpha, bp, sigma, tau);
                    Ok((coeff * v, RowClass::TangentNormalNormalPair))
                }
            }
        }
        (false, false) => match (n_deg, m_deg) {
            (0, 0) => {
                let v = if i == j { h[i] } else { 0.0 };
                Ok((v, RowClass::NormalNormalConstant))
            }
            (0, _) => Ok((0.0, RowClass::NormalNormalSurface)),
            (1, _) => Ok((0.0, RowClass::NormalNormalFirstU)),
            (nn, m) => {
                let t = need_curv(curv, nn - 2 + m)?;
                let coeff = 2.0 * (nn as f64 - 1.0) / (nn as f64 + 1.0);
                let v = pair_row_value(t, k, i, j, sigma, tau);
                Ok((coeff * v, RowClass::NormalNormalNormalPair))
            }
        },
    }
}

/// Shared shape of the N >= 2 rows: first and second normal indices flank
/// the free pair, remaining normals then tangentials fill the derivative
/// slots; normals and tangentials are symmetrized independently.
fn pair_row_value(
    t: &TensorAtPoint,
    k: usize,
    i: usize,
    j: usize,
    sigma: &[usize],
    tau: &[usize],
) -> f64 {
    average_over_arrangements(sigma, &mut |ps| {
        average_over_arrangements(tau, &mut |pt| {
            let mut idx = vec![i, k + ps[0], k + ps[1], j];
            idx.extend(ps[2..].iter().map(|&g| k + g));
            idx.extend_from_slice(pt);
            t.get(&idx)
        })
    })
}

/// One measured-against-predicted coefficient.
#[derive(Debug, Clone, Serialize)]
pub struct CoefficientComparison {
    pub i: usize,
    pub j: usize,
    pub index: Vec<usize>,
    pub measured: f64,
    pub predicted: f64,
    pub deviation: f64,
    pub relative: f64,
    pub pass: bool,
}

/// Compare every first-derivative entry at absolute tolerance. These rows
/// have no quadratic remainder, so they must hold exactly on any geometry.
pub fn compare_first_order(
    gt: &[Jet],
    pred: &LinearPrediction,
    tol: f64,
) -> Result<Vec<CoefficientComparison>> {
    let n = pred.sig.n();
    let mut out = Vec::new();
    for e in &pred.entries {
        if e.index.iter().sum::<usize>() != 1 {
            continue;
        }
        let measured = gt[e.i * n + e.j].partial_derivative(&e.index)?;
        let deviation = (measured - e.value).abs();
        out.push(CoefficientComparison {
            i: e.i,
            j: e.j,
            index: e.index.clone(),
            measured,
            predicted: e.value,
            deviation,
            relative: relative_dev(measured, e.value),
            pass: deviation <= tol,
        });
    }
    Ok(out)
}

/// One member of a scaled family: built at perturbation strength `eps`,
/// with the measured jet and the prediction evaluated on that member's own
/// curvature data.
#[derive(Debug, Clone)]
pub struct FamilyMember {
    pub eps: f64,
    pub measured: Vec<Jet>,
    pub predicted: Vec<Jet>,
}

/// Slope in eps of one coefficient, measured against predicted.
#[derive(Debug, Clone, Serialize)]
pub struct SlopeComparison {
    pub i: usize,
    pub j: usize,
    pub index: Vec<usize>,
    pub measured_slope: f64,
    pub predicted_slope: f64,
    pub relative: f64,
    pub pass: bool,
}

/// Fitted decay of the measured-vs-predicted deviation of one coefficient.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingFit {
    pub i: usize,
    pub j: usize,
    pub index: Vec<usize>,
    /// (eps, deviation) pairs, eps descending.
    pub deviations: Vec<(f64, f64)>,
    pub exponent: f64,
    pub pass: bool,
}

fn member(members: &[FamilyMember], eps: f64) -> Result<&FamilyMember> {
    members
        .iter()
        .find(|m| (m.eps - eps).abs() <= 1e-12 * eps.abs().max(1.0))
        .ok_or_else(|| Error::config(format!("family member at eps = {eps} missing")))
}

/// Compare second- and third-derivative entries across a scaled family:
/// the deviation from the linear prediction must decay at least
/// quadratically in eps, and the extracted d/d(eps) slope of each measured
/// coefficient must match the predicted slope.
pub fn linearized_compare(
    members: &[FamilyMember],
    sig: &SignatureType,
) -> Result<(Vec<SlopeComparison>, Vec<ScalingFit>)> {
    if members.is_empty() {
        return Err(Error::config("empty family"));
    }
    let n = sig.n();
    let mut levels: Vec<f64> = members.iter().map(|m| m.eps.abs()).collect();
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    levels.dedup_by(|a, b| (*a - *b).abs() <= 1e-15);
    if levels.len() < 2 {
        return Err(Error::config("family needs at least two eps magnitudes"));
    }
    let e1 = levels[0];
    let e2 = levels[1];
    if (e2 / e1 - 2.0).abs() > 1e-9 {
        return Err(Error::config(
            "slope extraction expects the two smallest eps magnitudes in ratio 2",
        ));
    }

    let order = members[0].measured[0].order().min(3);
    let sh = shape(n, order);
    let mut slopes = Vec::new();
    let mut fits = Vec::new();

    for exps in sh.indices() {
        let total: usize = exps.iter().map(|&e| e as usize).sum();
        if !(2..=3).contains(&total) {
            continue;
        }
        let index: Vec<usize> = exps.iter().map(|&e| e as usize).collect();
        for i in 0..n {
            for j in i..n {
                // deviation decay across the eps levels
                let mut deviations = Vec::new();
                for &e in levels.iter().rev() {
                    let mut worst = 0.0f64;
                    for signed in [e, -e] {
                        let m = member(members, signed)?;
                        let mv = m.measured[i * n + j].partial_derivative(&index)?;
                        let pv = m.predicted[i * n + j].partial_derivative(&index)?;
                        worst = worst.max((mv - pv).abs());
                    }
                    deviations.push((e, worst));
                }
                if deviations[0].1 >= 1e-12 {
                    let xs: Vec<f64> = deviations.iter().map(|d| d.0.ln()).collect();
                    let ys: Vec<f64> = deviations.iter().map(|d| d.1.max(1e-18).ln()).collect();
                    let exponent = fit_slope(&xs, &ys);
                    fits.push(ScalingFit {
                        i,
                        j,
                        index: index.clone(),
                        deviations,
                        exponent,
                        pass: exponent >= MIN_SCALING_EXPONENT,
                    });
                }

                // slope of the coefficient itself, Richardson-corrected
                let read = |eps: f64, which: bool| -> Result<f64> {
                    let m = member(members, eps)?;
                    let jets = if which { &m.measured } else { &m.predicted };
                    Ok(jets[i * n + j].partial_derivative(&index)?)
                };
                let slope = |which: bool| -> Result<f64> {
                    let d1 = (read(e1, which)? - read(-e1, which)?) / (2.0 * e1);
                    let d2 = (read(e2, which)? - read(-e2, which)?) / (2.0 * e2);
                    Ok((4.0 * d1 - d2) / 3.0)
                };
                let sm = slope(true)?;
                let sp = slope(false)?;
                let relative = relative_dev(sm, sp);
                slopes.push(SlopeComparison {
                    i,
                    j,
                    index: index.clone(),
                    measured_slope: sm,
                    predicted_slope: sp,
                    relative,
                    pass: relative <= TOL_SLOPE_REL || (sm - sp).abs() <= TOL_SLOPE_ABS,
                });
            }
        }
    }
    Ok((slopes, fits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::SubmanifoldChart;
    use crate::fermi::{FermiChart, GeodesicSolverConfig};
    use crate::frame::adapted_frame;
    use crate::second_form::second_fundamental_form;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn arrangement_average_matches_factorial_enumeration() {
        // production path averages distinct arrangements; compare against
        // the full factorial enumeration including repeats
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let vals: Vec<f64> = (0..81).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let t = TensorAtPoint::from_data(&[3, 3, 3, 3], vals);
        let items = [0usize, 2, 2];
        let mut f = |p: &[usize]| t.get(&[1, p[0], p[1], p[2]]);
        let fast = average_over_arrangements(&items, &mut f);

        fn factorial_perms(items: &[usize]) -> Vec<Vec<usize>> {
            if items.is_empty() {
                return vec![vec![]];
            }
            let mut out = Vec::new();
            for (i, &v) in items.iter().enumerate() {
                let mut rest = items.to_vec();
                rest.remove(i);
                for mut tail in factorial_perms(&rest) {
                    let mut p = vec![v];
                    p.append(&mut tail);
                    out.push(p);
                }
            }
            out
        }
        let all = factorial_perms(&items);
        let slow: f64 = all.iter().map(|p| f(p)).sum::<f64>() / all.len() as f64;
        assert_relative_eq!(fast, slow, epsilon = 1e-14);
    }

    #[test]
    fn symmetrization_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let vals: Vec<f64> = (0..81).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let t = TensorAtPoint::from_data(&[3, 3, 3, 3], vals);
        let items = [0usize, 1, 2];
        // pre-symmetrize over the three open slots, then average again
        let mut sym = |p: &[usize]| {
            average_over_arrangements(&[p[0], p[1], p[2]], &mut |q| t.get(&[0, q[0], q[1], q[2]]))
        };
        let once = sym(&items);
        let twice = average_over_arrangements(&items, &mut sym);
        assert_relative_eq!(once, twice, epsilon = 1e-14);
    }

    fn euclidean(n: usize) -> MetricChart {
        let names: Vec<String> = (0..n).map(|i| format!("z{i}")).collect();
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let entries: Vec<&str> = (0..n * n)
            .map(|e| if e / n == e % n { "1" } else { "0" })
            .collect();
        MetricChart::from_strings(&refs, &entries).unwrap()
    }

    #[test]
    fn flat_affine_prediction_is_pure_reference_form() {
        let g = euclidean(3);
        let plane =
            SubmanifoldChart::from_strings(3, &["a", "b"], &["a", "b", "0"], &[0.0, 0.0]).unwrap();
        let sig = SignatureType::new((2, 0), (1, 0));
        let f = adapted_frame(&g, &plane, &sig).unwrap();
        let curv = frame_curvature_stack(&g, &f, 2).unwrap();
        let fund = second_fundamental_form(&g, &plane, &f, 3).unwrap();
        let pred = predict_linear_jet(&curv, &fund, &sig, 4).unwrap();
        for e in &pred.entries {
            let expect = if e.index.iter().sum::<usize>() == 0 && e.i == e.j {
                1.0
            } else {
                0.0
            };
            assert_eq!(e.value, expect, "entry ({}, {}, {:?})", e.i, e.j, e.index);
        }
    }

    #[test]
    fn circle_first_order_row_matches_chart() {
        let g = euclidean(2);
        let circle =
            SubmanifoldChart::from_strings(2, &["t"], &["cos(t)", "sin(t)"], &[0.0]).unwrap();
        let sig = SignatureType::new((1, 0), (1, 0));
        let f = adapted_frame(&g, &circle, &sig).unwrap();
        let curv = frame_curvature_stack(&g, &f, 1).unwrap();
        let fund = second_fundamental_form(&g, &circle, &f, 2).unwrap();
        let pred = predict_linear_jet(&curv, &fund, &sig, 3).unwrap();
        // g_tt picks up -2 L_ttn u with L_ttn = -1 for the outward normal
        let entry = pred.lookup(0, 0, &[0, 1]).unwrap();
        assert_relative_eq!(entry.value, 2.0, epsilon = 1e-12);
        assert_eq!(entry.row, RowClass::TangentTangentFundamental);

        let chart = FermiChart::build(&g, &circle, &f, &GeodesicSolverConfig::default(), 4, 0.5)
            .unwrap();
        let rows = compare_first_order(chart.metric_jets(), &pred, 1e-7).unwrap();
        assert!(rows.iter().all(|r| r.pass), "{rows:#?}");
    }

    #[test]
    fn graph_first_order_row_scales_with_curvature_strength() {
        for kappa in [0.5, 2.0] {
            let g = euclidean(2);
            let graph = SubmanifoldChart::from_strings(
                2,
                &["t"],
                &["t", &format!("{kappa} * t^2 / 2")],
                &[0.0],
            )
            .unwrap();
            let sig = SignatureType::new((1, 0), (1, 0));
            let f = adapted_frame(&g, &graph, &sig).unwrap();
            let curv = frame_curvature_stack(&g, &f, 1).unwrap();
            let fund = second_fundamental_form(&g, &graph, &f, 2).unwrap();
            let pred = predict_linear_jet(&curv, &fund, &sig, 3).unwrap();
            let entry = pred.lookup(0, 0, &[0, 1]).unwrap();
            assert_relative_eq!(entry.value, -2.0 * kappa, epsilon = 1e-10);

            let chart =
                FermiChart::build(&g, &graph, &f, &GeodesicSolverConfig::default(), 4, 0.5)
                    .unwrap();
            let measured = chart.metric_jets()[0].partial_derivative(&[0, 1]).unwrap();
            assert_relative_eq!(measured, -2.0 * kappa, epsilon = 1e-7);
        }
    }

    #[test]
    fn shallow_stacks_are_rejected() {
        let sig = SignatureType::new((1, 0), (1, 0));
        let err = predict_linear_jet(&[], &[], &sig, 2).unwrap_err();
        assert!(matches!(err, Error::DepthTooLow { .. }));
    }
}
