//! The four radial identities that characterize the chart.
//!
//! In the chart coordinates (x, u) with reference form h, the construction
//! is equivalent to:
//!   (A) surface radial: sum_b [g_ab(x,0) - h_ab] x^b = 0, a tangential;
//!   (B) normal radial: sum_b' [g_a'b'(x,u) - h_a'b'] u^b' = 0, a' normal;
//!   (C) mixed transport: sum_a d_b' g_aa'(x,0) x^a = 0, derivative in u
//!       taken before restricting to the surface;
//!   (D) mixed radial: sum_a' g_aa'(x,u) u^a' = 0, a tangential.
//! (A) says x restricts to normal coordinates on the surface, (B) and (D)
//! say u-lines are ambient geodesics met orthogonally, and (C) pins the
//! normal frame as parallel rather than merely smooth.

use crate::chart::SignatureType;
use crate::error::Result;
use crate::jet::Jet;

use super::xu_degrees;

/// Worst residual coefficient of one condition.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ConditionResidual {
    pub id: char,
    pub label: &'static str,
    pub residual: f64,
    /// Free indices and monomial of the worst coefficient.
    pub worst_term: String,
}

/// Residuals of all four conditions, scanned over every complete
/// coefficient of the residual polynomials.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ConditionReport {
    pub residuals: Vec<ConditionResidual>,
    /// Residual polynomials were scanned through this total degree.
    pub order: usize,
}

impl ConditionReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.residual))
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual() <= tol
    }

    pub fn by_id(&self, id: char) -> &ConditionResidual {
        self.residuals
            .iter()
            .find(|r| r.id == id)
            .expect("condition id out of range")
    }
}

struct Scan {
    residual: f64,
    worst_term: String,
}

impl Scan {
    fn new() -> Scan {
        Scan {
            residual: 0.0,
            worst_term: String::from("-"),
        }
    }

    /// Fold one residual jet in, tagging coefficients with the free-index
    /// description.
    fn absorb(&mut self, jet: &Jet, who: &str) {
        for (pos, &c) in jet.coeffs().iter().enumerate() {
            if c.abs() > self.residual {
                self.residual = c.abs();
                let exps: Vec<usize> = jet
                    .shape()
                    .index_at(pos)
                    .iter()
                    .map(|&e| e as usize)
                    .collect();
                self.worst_term = format!("{who}, K={exps:?}");
            }
        }
    }
}

/// Evaluate the four conditions on measured metric jets `gt` (n*n entries
/// in n = k + codim variables, tangential variables first).
pub fn check_conditions(gt: &[Jet], sig: &SignatureType) -> Result<ConditionReport> {
    let k = sig.k();
    let n = sig.n();
    assert_eq!(gt.len(), n * n);
    let h = sig.h_diag();
    let q = gt[0].order();
    let work = q + 1;

    let xvars: Vec<Jet> = (0..k)
        .map(|a| Jet::variable(n, work, a, 0.0))
        .collect::<Result<_, _>>()?;
    let uvars: Vec<Jet> = (k..n)
        .map(|g| Jet::variable(n, work, g, 0.0))
        .collect::<Result<_, _>>()?;
    let unormals: Vec<usize> = (k..n).collect();

    // (A) surface radial, tangential block restricted to u = 0
    let mut a_scan = Scan::new();
    for alpha in 0..k {
        let mut acc = Jet::constant(n, work, 0.0);
        for beta in 0..k {
            let mut entry = gt[alpha * n + beta].restrict_zero(&unormals).pad_to(work);
            entry.coeffs_mut()[0] -= h[alpha] * if alpha == beta { 1.0 } else { 0.0 };
            acc = acc.try_add(&entry.try_mul(&xvars[beta])?)?;
        }
        a_scan.absorb(&acc, &format!("a={alpha}"));
    }

    // (B) normal radial, full dependence on (x, u)
    let mut b_scan = Scan::new();
    for ap in 0..n - k {
        let mut acc = Jet::constant(n, work, 0.0);
        for bp in 0..n - k {
            let mut entry = gt[(k + ap) * n + (k + bp)].pad_to(work);
            entry.coeffs_mut()[0] -= h[k + ap] * if ap == bp { 1.0 } else { 0.0 };
            acc = acc.try_add(&entry.try_mul(&uvars[bp])?)?;
        }
        b_scan.absorb(&acc, &format!("a'={ap}"));
    }

    // (C) mixed transport: u-derivative first, then restrict to the surface
    let mut c_scan = Scan::new();
    for ap in 0..n - k {
        for bp in 0..n - k {
            let mut acc = Jet::constant(n, work, 0.0);
            for alpha in 0..k {
                let d = gt[alpha * n + (k + ap)]
                    .derivative(k + bp)
                    .restrict_zero(&unormals)
                    .pad_to(work);
                acc = acc.try_add(&d.try_mul(&xvars[alpha])?)?;
            }
            c_scan.absorb(&acc, &format!("a'={ap}, b'={bp}"));
        }
    }

    // (D) mixed radial, full dependence on (x, u)
    let mut d_scan = Scan::new();
    for alpha in 0..k {
        let mut acc = Jet::constant(n, work, 0.0);
        for ap in 0..n - k {
            let entry = gt[alpha * n + (k + ap)].pad_to(work);
            acc = acc.try_add(&entry.try_mul(&uvars[ap])?)?;
        }
        d_scan.absorb(&acc, &format!("a={alpha}"));
    }

    Ok(ConditionReport {
        residuals: vec![
            ConditionResidual {
                id: 'A',
                label: "surface radial",
                residual: a_scan.residual,
                worst_term: a_scan.worst_term,
            },
            ConditionResidual {
                id: 'B',
                label: "normal radial",
                residual: b_scan.residual,
                worst_term: b_scan.worst_term,
            },
            ConditionResidual {
                id: 'C',
                label: "mixed transport",
                residual: c_scan.residual,
                worst_term: c_scan.worst_term,
            },
            ConditionResidual {
                id: 'D',
                label: "mixed radial",
                residual: d_scan.residual,
                worst_term: d_scan.worst_term,
            },
        ],
        order: work,
    })
}

/// True when every nonzero coefficient of the measured jet sits in the
/// constant term (used by exactness checks on flat cases).
pub fn max_nonconstant_coeff(gt: &[Jet], k: usize) -> f64 {
    let mut worst = 0.0f64;
    for jet in gt {
        for (pos, &c) in jet.coeffs().iter().enumerate() {
            let exps = jet.shape().index_at(pos);
            let (m, nn) = xu_degrees(exps, k);
            if m + nn > 0 {
                worst = worst.max(c.abs());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    // closed-form offset chart of the unit circle: g_xx = (1+u)^2
    fn circle_gt(order: usize) -> Vec<Jet> {
        let u = Jet::variable(2, order, 1, 0.0).unwrap();
        let one_plus_u = Jet::constant(2, order, 1.0).try_add(&u).unwrap();
        vec![
            one_plus_u.try_mul(&one_plus_u).unwrap(),
            Jet::constant(2, order, 0.0),
            Jet::constant(2, order, 0.0),
            Jet::constant(2, order, 1.0),
        ]
    }

    #[test]
    fn flat_metric_jet_passes_exactly() {
        let sig = SignatureType::new((1, 0), (1, 0));
        let gt = vec![
            Jet::constant(2, 4, 1.0),
            Jet::constant(2, 4, 0.0),
            Jet::constant(2, 4, 0.0),
            Jet::constant(2, 4, 1.0),
        ];
        let report = check_conditions(&gt, &sig).unwrap();
        assert_eq!(report.max_residual(), 0.0);
    }

    #[test]
    fn circle_offset_chart_passes() {
        let sig = SignatureType::new((1, 0), (1, 0));
        let report = check_conditions(&circle_gt(4), &sig).unwrap();
        assert!(report.max_residual() < 1e-14);
    }

    #[test]
    fn frozen_frame_chart_fails_mixed_radial() {
        // the constant-frame chart over the circle measures
        // g = [[1, -sin x], [-sin x, 1]]; the mixed block is u-independent,
        // so the mixed-transport condition stays clean while the mixed
        // radial condition picks up the full tilt
        let order = 4;
        let x = Jet::variable(2, order, 0, 0.0).unwrap();
        let gt = vec![
            Jet::constant(2, order, 1.0),
            x.sin().scaled(-1.0),
            x.sin().scaled(-1.0),
            Jet::constant(2, order, 1.0),
        ];
        let sig = SignatureType::new((1, 0), (1, 0));
        let report = check_conditions(&gt, &sig).unwrap();
        assert!(report.by_id('A').residual < 1e-14);
        assert!(report.by_id('B').residual < 1e-14);
        assert!(report.by_id('C').residual < 1e-14);
        assert!(report.by_id('D').residual > 0.5);
    }

    #[test]
    fn twisted_frame_chart_fails_mixed_transport_only() {
        // in-bundle twist at rate w over a line in flat 3-space measures
        // g_xx = 1 + w^2(u1^2+u2^2), g_x,u1 = -w u2, g_x,u2 = w u1
        let order = 4;
        let n = 3;
        let w = 0.5;
        let u1 = Jet::variable(n, order, 1, 0.0).unwrap();
        let u2 = Jet::variable(n, order, 2, 0.0).unwrap();
        let r2 = u1
            .try_mul(&u1)
            .unwrap()
            .try_add(&u2.try_mul(&u2).unwrap())
            .unwrap();
        let gxx = Jet::constant(n, order, 1.0)
            .try_add(&r2.scaled(w * w))
            .unwrap();
        let gx1 = u2.scaled(-w);
        let gx2 = u1.scaled(w);
        let one = Jet::constant(n, order, 1.0);
        let zero = Jet::constant(n, order, 0.0);
        let gt = vec![
            gxx,
            gx1.clone(),
            gx2.clone(),
            gx1,
            one.clone(),
            zero.clone(),
            gx2,
            zero,
            one,
        ];
        let sig = SignatureType::new((1, 0), (2, 0));
        let report = check_conditions(&gt, &sig).unwrap();
        assert!(report.by_id('A').residual < 1e-14);
        assert!(report.by_id('B').residual < 1e-14);
        assert!(report.by_id('D').residual < 1e-14, "the twist is skew");
        assert!(report.by_id('C').residual > 0.4);
    }

    #[test]
    fn indefinite_reference_form_is_respected() {
        let sig = SignatureType::new((1, 0), (0, 1));
        let gt = vec![
            Jet::constant(2, 3, 1.0),
            Jet::constant(2, 3, 0.0),
            Jet::constant(2, 3, 0.0),
            Jet::constant(2, 3, -1.0),
        ];
        let report = check_conditions(&gt, &sig).unwrap();
        assert_eq!(report.max_residual(), 0.0);
        // a sign slip in the normal block is caught by (B)
        let bad = vec![
            Jet::constant(2, 3, 1.0),
            Jet::constant(2, 3, 0.0),
            Jet::constant(2, 3, 0.0),
            Jet::constant(2, 3, 1.0),
        ];
        let report = check_conditions(&bad, &sig).unwrap();
        assert!(report.by_id('B').residual > 1.0);
    }
}
