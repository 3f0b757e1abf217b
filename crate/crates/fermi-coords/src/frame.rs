//! Orthonormal frames at the base point adapted to the submanifold split.

use crate::chart::{MetricChart, SignatureType, SubmanifoldChart};
use crate::error::{Error, Result};
use crate::linalg::invert;

/// Threshold below which a candidate direction counts as degenerate or null.
const NEAR_NULL_EPS: f64 = 1e-10;

/// g-orthonormal frame at the base point: the first k vectors span the
/// tangent space of the submanifold, the rest its g-orthogonal complement,
/// with inner products matching the diagonal reference form h.
#[derive(Debug, Clone)]
pub struct AdaptedFrame {
    sig: SignatureType,
    base_params: Vec<f64>,
    base_point: Vec<f64>,
    /// Frame vectors in ambient components, tangential block first.
    vectors: Vec<Vec<f64>>,
    /// Tangential frame vectors in parameter components:
    /// e_alpha = sum_a coeff[alpha][a] * dphi/ds^a.
    tangent_params: Vec<Vec<f64>>,
    /// Parameter derivative columns T_a at the base point.
    jacobian: Vec<Vec<f64>>,
    metric0: Vec<f64>,
}

impl AdaptedFrame {
    pub fn sig(&self) -> &SignatureType {
        &self.sig
    }

    pub fn base_params(&self) -> &[f64] {
        &self.base_params
    }

    pub fn base_point(&self) -> &[f64] {
        &self.base_point
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn tangential(&self) -> &[Vec<f64>] {
        &self.vectors[..self.sig.k()]
    }

    pub fn normal(&self) -> &[Vec<f64>] {
        &self.vectors[self.sig.k()..]
    }

    /// Parameter components of the tangential frame vectors.
    pub fn tangent_params(&self) -> &[Vec<f64>] {
        &self.tangent_params
    }

    pub fn jacobian(&self) -> &[Vec<f64>] {
        &self.jacobian
    }

    pub fn metric_at_base(&self) -> &[f64] {
        &self.metric0
    }

    /// Largest deviation of the Gram matrix from the reference form.
    pub fn gram_deviation(&self) -> f64 {
        let n = self.sig.n();
        let h = self.sig.h_diag();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { h[i] } else { 0.0 };
                let got = inner(&self.metric0, &self.vectors[i], &self.vectors[j]);
                worst = worst.max((got - want).abs());
            }
        }
        worst
    }

    /// Replace the frame vectors by `new_vectors`, revalidating the Gram
    /// matrix and the tangential span. Used to realize block rotations of an
    /// existing frame.
    pub fn with_vectors(&self, new_vectors: Vec<Vec<f64>>) -> Result<AdaptedFrame> {
        let mut out = self.clone();
        out.vectors = new_vectors;
        out.tangent_params = tangent_param_components(
            &out.metric0,
            &out.jacobian,
            &out.vectors[..out.sig.k()],
        )?;
        let dev = out.gram_deviation();
        if dev > 1e-8 {
            return Err(Error::ToleranceNotMet {
                achieved: dev,
                target: 1e-8,
            });
        }
        // tangential vectors must stay inside the tangent space
        let n = out.sig.n();
        for (alpha, e) in out.vectors[..out.sig.k()].iter().enumerate() {
            let mut resid = e.clone();
            for (a, col) in out.jacobian.iter().enumerate() {
                for i in 0..n {
                    resid[i] -= out.tangent_params[alpha][a] * col[i];
                }
            }
            let norm = resid.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-8 {
                return Err(Error::ToleranceNotMet {
                    achieved: norm,
                    target: 1e-8,
                });
            }
        }
        Ok(out)
    }
}

fn inner(g: &[f64], u: &[f64], v: &[f64]) -> f64 {
    let n = u.len();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += g[i * n + j] * u[i] * v[j];
        }
    }
    acc
}

/// Solve for parameter components of tangential frame vectors using the
/// pullback metric: coeff[alpha][a] = gbar^{ab} g(e_alpha, T_b).
fn tangent_param_components(
    g: &[f64],
    jacobian: &[Vec<f64>],
    tangential: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    let k = jacobian.len();
    let mut gbar = vec![0.0; k * k];
    for a in 0..k {
        for b in 0..k {
            gbar[a * k + b] = inner(g, &jacobian[a], &jacobian[b]);
        }
    }
    let gbar_inv = invert(&gbar, k).map_err(|_| Error::Degenerate {
        context: "pullback metric at base point",
        pivot: 0.0,
        threshold: NEAR_NULL_EPS,
    })?;
    let mut out = Vec::with_capacity(tangential.len());
    for e in tangential {
        let mut row = vec![0.0; k];
        for a in 0..k {
            let mut acc = 0.0;
            for b in 0..k {
                acc += gbar_inv[a * k + b] * inner(g, e, &jacobian[b]);
            }
            row[a] = acc;
        }
        out.push(row);
    }
    Ok(out)
}

/// Build the adapted frame by signature-aware Gram-Schmidt.
///
/// Tangential candidates are the parameter derivative columns in order;
/// normal candidates are the ambient coordinate directions, projected onto
/// the complement of everything already built. Each produced unit vector is
/// slotted to the next open position of matching sign in its block; the
/// overall sign makes the leading nonzero component positive.
pub fn adapted_frame(
    metric: &MetricChart,
    sub: &SubmanifoldChart,
    sig: &SignatureType,
) -> Result<AdaptedFrame> {
    crate::chart::validate_signature(metric, sub, sig)?;
    let n = sig.n();
    let k = sig.k();
    let h = sig.h_diag();
    let base_params = sub.base().to_vec();
    let base_point = sub.base_point()?;
    let g = metric.eval(&base_point)?;
    let (_, jacobian) = sub.eval_with_jacobian(&base_params)?;

    let mut built: Vec<Vec<f64>> = Vec::new();
    let mut built_sign: Vec<f64> = Vec::new();
    let mut slots: Vec<Option<Vec<f64>>> = vec![None; n];

    // Tangential block. Every candidate is required; a null direction after
    // projection means the pullback metric is degenerate along the flag.
    for (idx, cand) in jacobian.iter().enumerate().take(k) {
        let v = project_out(&g, cand, &built, &built_sign);
        let q = inner(&g, &v, &v);
        if q.abs() < NEAR_NULL_EPS {
            return Err(Error::NearNullDirection {
                candidate: idx,
                norm: q.abs(),
            });
        }
        let unit = normalize(v, q);
        let sign = q.signum();
        let slot = match open_slot(&slots, &h, 0, k, sign) {
            Some(s) => s,
            None => {
                return Err(Error::SignatureMismatch(
                    sig.tangential.0,
                    sig.tangential.1,
                    if sign > 0.0 { 1 } else { 0 },
                    if sign < 0.0 { 1 } else { 0 },
                ))
            }
        };
        slots[slot] = Some(unit.clone());
        built.push(unit);
        built_sign.push(sign);
    }

    // Normal block. Ambient directions are plentiful, so candidates that
    // project to near-null vectors or whose sign has no open slot are
    // skipped rather than rejected.
    for axis in 0..n {
        if built.len() == n {
            break;
        }
        let mut cand = vec![0.0; n];
        cand[axis] = 1.0;
        let v = project_out(&g, &cand, &built, &built_sign);
        let q = inner(&g, &v, &v);
        if q.abs() < NEAR_NULL_EPS {
            continue;
        }
        let sign = q.signum();
        let slot = match open_slot(&slots, &h, k, n, sign) {
            Some(s) => s,
            None => continue,
        };
        let unit = normalize(v, q);
        slots[slot] = Some(unit.clone());
        built.push(unit);
        built_sign.push(sign);
    }

    let mut vectors = Vec::with_capacity(n);
    for (i, slot) in slots.into_iter().enumerate() {
        match slot {
            Some(v) => vectors.push(v),
            None => {
                return Err(Error::FrameIncomplete {
                    wanted: if i < k { "tangential" } else { "normal" },
                    sign: if h[i] > 0.0 { 1 } else { -1 },
                })
            }
        }
    }

    let tangent_params = tangent_param_components(&g, &jacobian, &vectors[..k])?;
    let frame = AdaptedFrame {
        sig: *sig,
        base_params,
        base_point,
        vectors,
        tangent_params,
        jacobian,
        metric0: g,
    };
    let dev = frame.gram_deviation();
    if dev > 1e-12 {
        return Err(Error::ToleranceNotMet {
            achieved: dev,
            target: 1e-12,
        });
    }
    Ok(frame)
}

fn project_out(g: &[f64], cand: &[f64], built: &[Vec<f64>], built_sign: &[f64]) -> Vec<f64> {
    let mut v = cand.to_vec();
    for (b, sign) in built.iter().zip(built_sign) {
        let c = sign * inner(g, &v, b);
        for i in 0..v.len() {
            v[i] -= c * b[i];
        }
    }
    v
}

fn normalize(mut v: Vec<f64>, q: f64) -> Vec<f64> {
    let scale = 1.0 / q.abs().sqrt();
    for x in v.iter_mut() {
        *x *= scale;
    }
    let lead = v.iter().find(|x| x.abs() > NEAR_NULL_EPS).copied();
    if let Some(l) = lead {
        if l < 0.0 {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
    }
    v
}

fn open_slot(slots: &[Option<Vec<f64>>], h: &[f64], lo: usize, hi: usize, sign: f64) -> Option<usize> {
    (lo..hi).find(|&i| slots[i].is_none() && h[i].signum() == sign)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{MetricChart, SubmanifoldChart};
    use approx::assert_relative_eq;

    fn euclidean(n: usize) -> MetricChart {
        let names: Vec<String> = (0..n).map(|i| format!("z{i}")).collect();
        let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let mut entries = Vec::new();
        for i in 0..n {
            for j in 0..n {
                entries.push(if i == j { "1" } else { "0" });
            }
        }
        MetricChart::from_strings(&name_refs, &entries).unwrap()
    }

    #[test]
    fn circle_frame_is_tangent_then_outward_normal() {
        let g = euclidean(2);
        let circle =
            SubmanifoldChart::from_strings(2, &["t"], &["cos(t)", "sin(t)"], &[0.0]).unwrap();
        let sig = SignatureType::new((1, 0), (1, 0));
        let f = adapted_frame(&g, &circle, &sig).unwrap();
        // tangent at (1,0) is (0,1); sign rule keeps the leading component positive
        assert_relative_eq!(f.vectors()[0][0], 0.0, epsilon = 1e-14);
        assert_relative_eq!(f.vectors()[0][1], 1.0, epsilon = 1e-14);
        assert_relative_eq!(f.vectors()[1][0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(f.vectors()[1][1], 0.0, epsilon = 1e-14);
        assert!(f.gram_deviation() < 1e-14);
        assert_relative_eq!(f.tangent_params()[0][0], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn sphere_frame_orthonormal() {
        let g = euclidean(3);
        let sphere = SubmanifoldChart::from_strings(
            3,
            &["th", "ps"],
            &[
                "sin(th) * cos(ps)",
                "sin(th) * sin(ps)",
                "cos(th)",
            ],
            &[std::f64::consts::FRAC_PI_2, 0.0],
        )
        .unwrap();
        let sig = SignatureType::new((2, 0), (1, 0));
        let f = adapted_frame(&g, &sphere, &sig).unwrap();
        assert!(f.gram_deviation() < 1e-12);
        // normal slot is the outward radial direction at (1,0,0)
        assert_relative_eq!(f.normal()[0][0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(f.normal()[0][1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(f.normal()[0][2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn timelike_line_slots_to_negative_block() {
        let g = MetricChart::from_strings(&["t", "x"], &["1", "0", "0", "-1"]).unwrap();
        let line = SubmanifoldChart::from_strings(2, &["s"], &["0", "s"], &[0.0]).unwrap();
        let sig = SignatureType::new((0, 1), (1, 0));
        let f = adapted_frame(&g, &line, &sig).unwrap();
        assert!(f.gram_deviation() < 1e-12);
        // tangential vector has g(e,e) = -1, normal has +1
        assert_relative_eq!(f.tangential()[0][1], 1.0, epsilon = 1e-14);
        assert_relative_eq!(f.normal()[0][0], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn declared_type_must_match_pullback() {
        let g = MetricChart::from_strings(&["t", "x"], &["1", "0", "0", "-1"]).unwrap();
        let line = SubmanifoldChart::from_strings(2, &["s"], &["0", "s"], &[0.0]).unwrap();
        let wrong = SignatureType::new((1, 0), (0, 1));
        assert!(adapted_frame(&g, &line, &wrong).is_err());
    }

    #[test]
    fn null_tangent_rejected() {
        // tangent along a null direction of the Minkowski plane
        let g = MetricChart::from_strings(&["t", "x"], &["1", "0", "0", "-1"]).unwrap();
        let line = SubmanifoldChart::from_strings(2, &["s"], &["s", "s"], &[0.0]).unwrap();
        let sig = SignatureType::new((1, 0), (0, 1));
        let err = adapted_frame(&g, &line, &sig).unwrap_err();
        // degeneracy surfaces during signature validation of the pullback
        assert!(matches!(
            err,
            Error::Degenerate { .. } | Error::NearNullDirection { .. }
        ));
    }

    #[test]
    fn rotated_frame_keeps_invariants() {
        let g = euclidean(3);
        let plane =
            SubmanifoldChart::from_strings(3, &["a", "b"], &["a", "b", "0"], &[0.0, 0.0]).unwrap();
        let sig = SignatureType::new((2, 0), (1, 0));
        let f = adapted_frame(&g, &plane, &sig).unwrap();
        let th = 0.3f64;
        let e0 = &f.vectors()[0];
        let e1 = &f.vectors()[1];
        let r0: Vec<f64> = (0..3).map(|i| th.cos() * e0[i] - th.sin() * e1[i]).collect();
        let r1: Vec<f64> = (0..3).map(|i| th.sin() * e0[i] + th.cos() * e1[i]).collect();
        let rotated = f
            .with_vectors(vec![r0, r1, f.vectors()[2].clone()])
            .unwrap();
        assert!(rotated.gram_deviation() < 1e-12);
        // mixing a normal vector into the tangential block is rejected
        let bad = f.with_vectors(vec![
            f.vectors()[2].clone(),
            f.vectors()[1].clone(),
            f.vectors()[0].clone(),
        ]);
        assert!(bad.is_err());
    }
}
