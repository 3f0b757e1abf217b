//! Normal-coordinate chart construction along a submanifold.
//!
//! The chart map sends (x, u) to the endpoint of an ambient geodesic: x
//! picks a point through the intrinsic exponential map, the normal frame is
//! carried there by normal-parallel transport, and u gives the launch
//! velocity in that frame. Jets of the map are obtained by running the same
//! flows over truncated polynomial arithmetic; connection coefficients along
//! the moving point are composed from fixed expansions at the base point,
//! which is exact at these orders because the offsets carry no constant
//! term.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::chart::{MetricChart, SubmanifoldChart};
use crate::curvature::{christoffel_jets, christoffel_scalar};
use crate::error::{Error, Result};
use crate::frame::AdaptedFrame;
use crate::jet::{shape, Jet, JetShape, MonomialTable};
use crate::linalg::{invert, invert_jet_matrix};
use crate::scalar::{Dual, Scalar};
use crate::second_form::induced_metric;

/// Fixed-step integrator settings shared by every flow in a chart build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeodesicSolverConfig {
    /// RK4 steps per unit of flow time, at least 8.
    pub steps_per_unit: usize,
    /// Allowed disagreement between the full-step and half-step solutions.
    pub abs_tol: f64,
    /// Hard cap on RK4 steps for a single solve.
    pub max_steps: usize,
    /// Re-run each solve at half the step size and compare endpoints.
    pub richardson_check: bool,
}

impl Default for GeodesicSolverConfig {
    fn default() -> Self {
        GeodesicSolverConfig {
            steps_per_unit: 256,
            abs_tol: 1e-9,
            max_steps: 200_000,
            richardson_check: true,
        }
    }
}

fn add_scaled<S: Scalar>(y: &[S], c: f64, d: &[S]) -> Vec<S> {
    y.iter().zip(d).map(|(a, b)| a.add(&b.scale(c))).collect()
}

fn rk4<S: Scalar>(
    y0: &[S],
    t_total: f64,
    steps: usize,
    rhs: &mut dyn FnMut(&[S]) -> Result<Vec<S>>,
) -> Result<Vec<S>> {
    let h = t_total / steps as f64;
    let mut y = y0.to_vec();
    for _ in 0..steps {
        let k1 = rhs(&y)?;
        let k2 = rhs(&add_scaled(&y, h * 0.5, &k1))?;
        let k3 = rhs(&add_scaled(&y, h * 0.5, &k2))?;
        let k4 = rhs(&add_scaled(&y, h, &k3))?;
        y = add_scaled(&y, h / 6.0, &k1);
        y = add_scaled(&y, h / 3.0, &k2);
        y = add_scaled(&y, h / 3.0, &k3);
        y = add_scaled(&y, h / 6.0, &k4);
    }
    Ok(y)
}

/// Fixed-step RK4 with an optional step-halving consistency check. Returns
/// the finer solution when the check is on.
fn integrate<S: Scalar>(
    y0: &[S],
    t_total: f64,
    cfg: &GeodesicSolverConfig,
    rhs: &mut dyn FnMut(&[S]) -> Result<Vec<S>>,
) -> Result<Vec<S>> {
    let steps = ((cfg.steps_per_unit as f64) * t_total.abs()).ceil() as usize;
    let steps = steps.max(8);
    let budget = if cfg.richardson_check { steps * 3 } else { steps };
    if budget > cfg.max_steps {
        return Err(Error::StepBudgetExhausted(budget));
    }
    let coarse = rk4(y0, t_total, steps, rhs)?;
    if !cfg.richardson_check {
        return Ok(coarse);
    }
    let fine = rk4(y0, t_total, steps * 2, rhs)?;
    let mut disagreement = 0.0f64;
    for (a, b) in coarse.iter().zip(&fine) {
        disagreement = disagreement.max(a.sub(b).max_abs());
    }
    if disagreement > cfg.abs_tol {
        return Err(Error::ToleranceNotMet {
            achieved: disagreement,
            target: cfg.abs_tol,
        });
    }
    Ok(fine)
}

/// Geodesic flow of an expression metric over any scalar type: follows
/// z'' = -Gamma(z)(z', z') from (z0, v0) for time `t`.
pub fn geodesic_flow<S: Scalar>(
    metric: &MetricChart,
    z0: &[S],
    v0: &[S],
    t: f64,
    cfg: &GeodesicSolverConfig,
) -> Result<(Vec<S>, Vec<S>)> {
    let n = metric.dim();
    assert_eq!(z0.len(), n);
    assert_eq!(v0.len(), n);
    let mut rhs = |y: &[S]| -> Result<Vec<S>> {
        let (z, v) = y.split_at(n);
        let gamma = christoffel_scalar(metric, z)?;
        let mut out = Vec::with_capacity(2 * n);
        out.extend(v.iter().cloned());
        for kk in 0..n {
            let mut acc = z[0].constant_like(0.0);
            for i in 0..n {
                for j in 0..n {
                    acc = acc.sub(&gamma[(kk * n + i) * n + j].mul(&v[i]).mul(&v[j]));
                }
            }
            out.push(acc);
        }
        Ok(out)
    };
    let mut y0 = z0.to_vec();
    y0.extend(v0.iter().cloned());
    let y = integrate(&y0, t, cfg, &mut rhs)?;
    Ok((y[..n].to_vec(), y[n..].to_vec()))
}

/// Empirical convergence order of the integrator on a unit-time geodesic:
/// least-squares slope of log error against log step count, negated.
pub fn convergence_order(
    metric: &MetricChart,
    z0: &[f64],
    v0: &[f64],
    steps: &[usize],
) -> Result<f64> {
    let finest = *steps.iter().max().ok_or_else(|| Error::config("empty step list"))?;
    let mut cfg = GeodesicSolverConfig {
        richardson_check: false,
        ..GeodesicSolverConfig::default()
    };
    cfg.steps_per_unit = finest * 8;
    let (zr, vr) = geodesic_flow(metric, z0, v0, 1.0, &cfg)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &st in steps {
        cfg.steps_per_unit = st;
        let (z, v) = geodesic_flow(metric, z0, v0, 1.0, &cfg)?;
        let mut err = 0.0f64;
        for (a, b) in z.iter().zip(&zr) {
            err = err.max((a - b).abs());
        }
        for (a, b) in v.iter().zip(&vr) {
            err = err.max((a - b).abs());
        }
        if err <= 0.0 {
            return Err(Error::config(
                "convergence probe needs a flow with nonzero truncation error",
            ));
        }
        xs.push((st as f64).ln());
        ys.push(err.ln());
    }
    Ok(-fit_slope(&xs, &ys))
}

pub(crate) fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let m = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    (m * sxy - sx * sy) / (m * sxx - sx * sx)
}

/// How the normal frame is moved along the intrinsic geodesics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransportMode {
    /// Normal-parallel transport; the construction the chart is built on.
    Parallel,
    /// Keep the base-point frame unchanged everywhere. Deliberately wrong
    /// once the normal spaces tilt; used as a falsification control.
    FrozenFrame,
    /// Parallel transport followed by an in-bundle rotation of the first two
    /// normal directions by `rate * x_1`. Stays inside the normal bundle
    /// while breaking parallelism; the other falsification control.
    TwistedBy(f64),
}

/// The chart map and its measured metric, with jets in (x, u) about the
/// base point.
#[derive(Debug, Clone)]
pub struct FermiChart {
    metric: MetricChart,
    sub: SubmanifoldChart,
    frame: AdaptedFrame,
    solver: GeodesicSolverConfig,
    order: usize,
    radius: f64,
    transport: TransportMode,
    s_jets: Vec<Jet>,
    w_jets: Vec<Vec<Jet>>,
    phi_jets: Vec<Jet>,
    gtilde: Vec<Jet>,
}

struct StageACtx<'a> {
    k: usize,
    n: usize,
    p: usize,
    wcols: usize,
    s0: &'a [f64],
    p_hat: &'a [f64],
    sh_k: Arc<JetShape>,
    sh_n: Arc<JetShape>,
    gamma_bar: &'a [Jet],
    gamma_amb: &'a [Jet],
    g_amb: &'a [Jet],
    gbar_inv: &'a [Jet],
    phi: &'a [Jet],
    t_cols: &'a [Vec<Jet>],
    t2_cols: &'a [Vec<Vec<Jet>>],
}

fn shift_const(j: &Jet, c: f64) -> Jet {
    let mut out = j.clone();
    out.coeffs_mut()[0] -= c;
    out
}

impl<'a> StageACtx<'a> {
    fn rhs(&self, y: &[Jet]) -> Result<Vec<Jet>> {
        let k = self.k;
        let n = self.n;
        let s = &y[..k];
        let sdot = &y[k..2 * k];
        let inner_s: Vec<Jet> = s
            .iter()
            .zip(self.s0)
            .map(|(j, &c)| shift_const(j, c))
            .collect();
        let table_s = MonomialTable::new(self.sh_k.clone(), &inner_s)?;
        let gb: Vec<Jet> = self
            .gamma_bar
            .iter()
            .map(|o| table_s.eval(o))
            .collect::<Result<_, _>>()?;
        let mut out = Vec::with_capacity(y.len());
        out.extend(sdot.iter().cloned());
        for a in 0..k {
            let mut acc = Jet::constant(n, self.p, 0.0);
            for b in 0..k {
                for c in 0..k {
                    acc = acc.try_sub(&gb[(a * k + b) * k + c].try_mul(&sdot[b])?.try_mul(&sdot[c])?)?;
                }
            }
            out.push(acc);
        }
        if self.wcols == 0 {
            return Ok(out);
        }

        let phis: Vec<Jet> = self
            .phi
            .iter()
            .map(|o| table_s.eval(o))
            .collect::<Result<_, _>>()?;
        let inner_z: Vec<Jet> = phis
            .iter()
            .zip(self.p_hat)
            .map(|(j, &c)| shift_const(j, c))
            .collect();
        let table_z = MonomialTable::new(self.sh_n.clone(), &inner_z)?;
        let ga: Vec<Jet> = self
            .gamma_amb
            .iter()
            .map(|o| table_z.eval(o))
            .collect::<Result<_, _>>()?;
        let gphi: Vec<Jet> = self
            .g_amb
            .iter()
            .map(|o| table_z.eval(o))
            .collect::<Result<_, _>>()?;
        let ts: Vec<Vec<Jet>> = self
            .t_cols
            .iter()
            .map(|col| col.iter().map(|o| table_s.eval(o)).collect::<Result<_, _>>())
            .collect::<Result<_, _>>()?;
        let t2s: Vec<Vec<Vec<Jet>>> = self
            .t2_cols
            .iter()
            .map(|row| {
                row.iter()
                    .map(|col| col.iter().map(|o| table_s.eval(o)).collect::<Result<_, _>>())
                    .collect::<Result<_, _>>()
            })
            .collect::<Result<_, _>>()?;
        let gbinv: Vec<Jet> = self
            .gbar_inv
            .iter()
            .map(|o| table_s.eval(o))
            .collect::<Result<_, _>>()?;

        let mut zdot = Vec::with_capacity(n);
        for i in 0..n {
            let mut acc = Jet::constant(n, self.p, 0.0);
            for a in 0..k {
                acc = acc.try_add(&ts[a][i].try_mul(&sdot[a])?)?;
            }
            zdot.push(acc);
        }
        // U_b = covariant rate of change of the column T_b along the curve
        let mut ub = Vec::with_capacity(k);
        for b in 0..k {
            let mut col = Vec::with_capacity(n);
            for l in 0..n {
                let mut acc = Jet::constant(n, self.p, 0.0);
                for c in 0..k {
                    acc = acc.try_add(&t2s[b][c][l].try_mul(&sdot[c])?)?;
                }
                for j in 0..n {
                    for kk in 0..n {
                        acc = acc.try_add(
                            &ga[(l * n + j) * n + kk].try_mul(&zdot[j])?.try_mul(&ts[b][kk])?,
                        )?;
                    }
                }
                col.push(acc);
            }
            ub.push(col);
        }
        for colidx in 0..self.wcols {
            let w = &y[2 * k + colidx * n..2 * k + (colidx + 1) * n];
            // lam[b] = g(W, U_b)
            let mut lam = Vec::with_capacity(k);
            for b in 0..k {
                let mut acc = Jet::constant(n, self.p, 0.0);
                for i in 0..n {
                    for l in 0..n {
                        acc = acc.try_add(&gphi[i * n + l].try_mul(&w[i])?.try_mul(&ub[b][l])?)?;
                    }
                }
                lam.push(acc);
            }
            for i in 0..n {
                let mut acc = Jet::constant(n, self.p, 0.0);
                for j in 0..n {
                    for kk in 0..n {
                        acc = acc
                            .try_sub(&ga[(i * n + j) * n + kk].try_mul(&zdot[j])?.try_mul(&w[kk])?)?;
                    }
                }
                for a in 0..k {
                    for b in 0..k {
                        let piece = gbinv[a * k + b].try_mul(&lam[b])?.try_mul(&ts[a][i])?;
                        acc = acc.try_sub(&piece)?;
                    }
                }
                out.push(acc);
            }
        }
        Ok(out)
    }
}

impl FermiChart {
    pub fn build(
        metric: &MetricChart,
        sub: &SubmanifoldChart,
        frame: &AdaptedFrame,
        solver: &GeodesicSolverConfig,
        order: usize,
        radius: f64,
    ) -> Result<FermiChart> {
        FermiChart::build_with_transport(
            metric,
            sub,
            frame,
            solver,
            order,
            radius,
            TransportMode::Parallel,
        )
    }

    /// Build the chart with an explicit transport rule. The non-parallel
    /// modes exist to produce deliberately broken charts for falsification
    /// runs.
    pub fn build_with_transport(
        metric: &MetricChart,
        sub: &SubmanifoldChart,
        frame: &AdaptedFrame,
        solver: &GeodesicSolverConfig,
        order: usize,
        radius: f64,
        transport: TransportMode,
    ) -> Result<FermiChart> {
        let n = metric.dim();
        let k = sub.dim();
        let codim = n - k;
        if order < 2 {
            return Err(Error::OrderTooLow {
                context: "chart jets",
                have: order,
                need: 2,
            });
        }
        if let TransportMode::TwistedBy(_) = transport {
            let h = frame.sig().h_diag();
            if codim < 2 || h[k] != h[k + 1] {
                return Err(Error::config(
                    "twisted transport needs two normal directions of equal sign",
                ));
            }
        }
        let p = order;
        let sh_n = shape(n, p);
        let sh_k = shape(k, p);

        // fixed expansions at the base point
        let phi_full = sub.eval_jets(p + 2)?;
        let p_hat: Vec<f64> = phi_full.iter().map(|j| j.constant_term()).collect();
        let phi_out: Vec<Jet> = phi_full.iter().map(|j| j.truncate(p)).collect();
        let t_cols: Vec<Vec<Jet>> = (0..k)
            .map(|a| phi_full.iter().map(|j| j.derivative(a).truncate(p)).collect())
            .collect();
        let t2_cols: Vec<Vec<Vec<Jet>>> = (0..k)
            .map(|a| {
                (0..k)
                    .map(|b| {
                        phi_full
                            .iter()
                            .map(|j| j.derivative(a).derivative(b))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let g_amb_full = metric.eval_jets(&p_hat, p + 1)?;
        let gamma_amb = christoffel_jets(&g_amb_full, n)?;
        let g_amb: Vec<Jet> = g_amb_full.iter().map(|j| j.truncate(p)).collect();
        let gbar = induced_metric(metric, sub, p + 1)?;
        let gamma_bar = christoffel_jets(&gbar, k)?;
        let gbar_inv: Vec<Jet> = invert_jet_matrix(&gbar, k)?
            .iter()
            .map(|j| j.truncate(p))
            .collect();

        let xvars: Vec<Jet> = (0..k)
            .map(|a| Jet::variable(n, p, a, 0.0))
            .collect::<Result<_, _>>()?;
        let uvars: Vec<Jet> = (0..codim)
            .map(|g| Jet::variable(n, p, k + g, 0.0))
            .collect::<Result<_, _>>()?;

        // stage one: intrinsic geodesic spray with joint frame transport
        let c = frame.tangent_params();
        let with_w = matches!(
            transport,
            TransportMode::Parallel | TransportMode::TwistedBy(_)
        );
        let wcols = if with_w { codim } else { 0 };
        let mut state = Vec::with_capacity(2 * k + wcols * n);
        for a in 0..k {
            state.push(Jet::constant(n, p, frame.base_params()[a]));
        }
        for a in 0..k {
            let mut v = Jet::constant(n, p, 0.0);
            for (al, x) in xvars.iter().enumerate() {
                v = v.try_add(&x.scaled(c[al][a]))?;
            }
            state.push(v);
        }
        if with_w {
            for e in frame.normal() {
                for &comp in e {
                    state.push(Jet::constant(n, p, comp));
                }
            }
        }
        let ctx = StageACtx {
            k,
            n,
            p,
            wcols,
            s0: frame.base_params(),
            p_hat: &p_hat,
            sh_k: sh_k.clone(),
            sh_n: sh_n.clone(),
            gamma_bar: &gamma_bar,
            gamma_amb: &gamma_amb,
            g_amb: &g_amb,
            gbar_inv: &gbar_inv,
            phi: &phi_out,
            t_cols: &t_cols,
            t2_cols: &t2_cols,
        };
        let mut rhs_a = |y: &[Jet]| ctx.rhs(y);
        let end = integrate(&state, 1.0, solver, &mut rhs_a)?;
        let s_jets: Vec<Jet> = end[..k].to_vec();
        let mut w_jets: Vec<Vec<Jet>> = if with_w {
            (0..codim)
                .map(|col| end[2 * k + col * n..2 * k + (col + 1) * n].to_vec())
                .collect()
        } else {
            frame
                .normal()
                .iter()
                .map(|e| e.iter().map(|&v| Jet::constant(n, p, v)).collect())
                .collect()
        };
        if let TransportMode::TwistedBy(rate) = transport {
            let theta = xvars[0].scaled(rate);
            let (ct, st) = (theta.cos(), theta.sin());
            let w0 = w_jets[0].clone();
            let w1 = w_jets[1].clone();
            for i in 0..n {
                w_jets[0][i] = ct.try_mul(&w0[i])?.try_sub(&st.try_mul(&w1[i])?)?;
                w_jets[1][i] = st.try_mul(&w0[i])?.try_add(&ct.try_mul(&w1[i])?)?;
            }
        }

        // stage two: ambient geodesics from phi(s(x)) with velocity u.W(x)
        let inner_send: Vec<Jet> = s_jets
            .iter()
            .zip(frame.base_params())
            .map(|(j, &c0)| shift_const(j, c0))
            .collect();
        let table_send = MonomialTable::new(sh_k.clone(), &inner_send)?;
        let phi_x: Vec<Jet> = phi_out
            .iter()
            .map(|o| table_send.eval(o))
            .collect::<Result<_, _>>()?;
        let mut v0 = Vec::with_capacity(n);
        for i in 0..n {
            let mut acc = Jet::constant(n, p, 0.0);
            for (g, u) in uvars.iter().enumerate() {
                acc = acc.try_add(&u.try_mul(&w_jets[g][i])?)?;
            }
            v0.push(acc);
        }
        let mut state_b = phi_x;
        state_b.extend(v0);
        let gamma_amb_ref = &gamma_amb;
        let p_hat_ref = &p_hat;
        let sh_n_ref = &sh_n;
        let mut rhs_b = |y: &[Jet]| -> Result<Vec<Jet>> {
            let (z, v) = y.split_at(n);
            let inner: Vec<Jet> = z
                .iter()
                .zip(p_hat_ref.iter())
                .map(|(j, &c0)| shift_const(j, c0))
                .collect();
            let table = MonomialTable::new(sh_n_ref.clone(), &inner)?;
            let ga: Vec<Jet> = gamma_amb_ref
                .iter()
                .map(|o| table.eval(o))
                .collect::<Result<_, _>>()?;
            let mut out = Vec::with_capacity(2 * n);
            out.extend(v.iter().cloned());
            for kk in 0..n {
                let mut acc = Jet::constant(n, p, 0.0);
                for i in 0..n {
                    for j in 0..n {
                        acc = acc.try_sub(&ga[(kk * n + i) * n + j].try_mul(&v[i])?.try_mul(&v[j])?)?;
                    }
                }
                out.push(acc);
            }
            Ok(out)
        };
        let end_b = integrate(&state_b, 1.0, solver, &mut rhs_b)?;
        let phi_jets: Vec<Jet> = end_b[..n].to_vec();

        // measured metric: pullback of g through the chart map
        let inner_phi: Vec<Jet> = phi_jets
            .iter()
            .zip(p_hat.iter())
            .map(|(j, &c0)| shift_const(j, c0))
            .collect();
        let table_phi = MonomialTable::new(sh_n.clone(), &inner_phi)?;
        let q = p - 1;
        let g_on_chart: Vec<Jet> = g_amb
            .iter()
            .map(|o| table_phi.eval(o).map(|j| j.truncate(q)))
            .collect::<Result<_, _>>()?;
        let dphi: Vec<Vec<Jet>> = (0..n)
            .map(|a| phi_jets.iter().map(|j| j.derivative(a)).collect())
            .collect();
        let mut gtilde = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                let mut acc = Jet::constant(n, q, 0.0);
                for i in 0..n {
                    for j in 0..n {
                        acc = acc.try_add(
                            &g_on_chart[i * n + j].try_mul(&dphi[a][i])?.try_mul(&dphi[b][j])?,
                        )?;
                    }
                }
                gtilde.push(acc);
            }
        }

        let chart = FermiChart {
            metric: metric.clone(),
            sub: sub.clone(),
            frame: frame.clone(),
            solver: solver.clone(),
            order: p,
            radius,
            transport,
            s_jets,
            w_jets,
            phi_jets,
            gtilde,
        };
        chart.check_base_invariants()?;
        Ok(chart)
    }

    /// Base-point invariants: the map fixes the base point and its linear
    /// part reproduces the frame.
    fn check_base_invariants(&self) -> Result<()> {
        let n = self.metric.dim();
        let mut dev = 0.0f64;
        for i in 0..n {
            dev = dev.max((self.phi_jets[i].constant_term() - self.frame.base_point()[i]).abs());
            for slot in 0..n {
                let mut unit = vec![0usize; n];
                unit[slot] = 1;
                let got = self.phi_jets[i].taylor_coeff(&unit);
                dev = dev.max((got - self.frame.vectors()[slot][i]).abs());
            }
        }
        if dev > 1e-8 {
            return Err(Error::ToleranceNotMet {
                achieved: dev,
                target: 1e-8,
            });
        }
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn metric(&self) -> &MetricChart {
        &self.metric
    }

    pub fn submanifold(&self) -> &SubmanifoldChart {
        &self.sub
    }

    pub fn frame(&self) -> &AdaptedFrame {
        &self.frame
    }

    pub fn transport(&self) -> TransportMode {
        self.transport
    }

    /// Jets of the chart map, order `order`.
    pub fn map_jets(&self) -> &[Jet] {
        &self.phi_jets
    }

    /// Jets of the intrinsic exponential map in parameter space.
    pub fn intrinsic_jets(&self) -> &[Jet] {
        &self.s_jets
    }

    /// Jets of the transported normal frame columns.
    pub fn transport_jets(&self) -> &[Vec<Jet>] {
        &self.w_jets
    }

    /// Measured metric components in chart coordinates, order `order - 1`.
    pub fn metric_jets(&self) -> &[Jet] {
        &self.gtilde
    }

    fn guard_radius(&self, x: &[f64], u: &[f64]) -> Result<()> {
        let norm = x
            .iter()
            .chain(u.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        if norm > self.radius {
            return Err(Error::OutsideChartRadius {
                norm,
                radius: self.radius,
            });
        }
        Ok(())
    }

    fn real_stage_a(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let k = self.sub.dim();
        let n = self.metric.dim();
        let codim = n - k;
        let c = self.frame.tangent_params();
        let with_w = matches!(
            self.transport,
            TransportMode::Parallel | TransportMode::TwistedBy(_)
        );
        let wcols = if with_w { codim } else { 0 };
        let mut y0 = self.frame.base_params().to_vec();
        for a in 0..k {
            let mut v = 0.0;
            for (al, &xa) in x.iter().enumerate() {
                v += xa * c[al][a];
            }
            y0.push(v);
        }
        if with_w {
            for e in self.frame.normal() {
                y0.extend(e.iter().copied());
            }
        }
        let metric = &self.metric;
        let sub = &self.sub;
        let mut rhs = |y: &[f64]| -> Result<Vec<f64>> {
            let s = &y[..k];
            let sdot = &y[k..2 * k];
            let gamma_bar = induced_christoffel_at(metric, sub, s)?;
            let mut out = Vec::with_capacity(y.len());
            out.extend_from_slice(sdot);
            for a in 0..k {
                let mut acc = 0.0;
                for b in 0..k {
                    for cc in 0..k {
                        acc -= gamma_bar[(a * k + b) * k + cc] * sdot[b] * sdot[cc];
                    }
                }
                out.push(acc);
            }
            if wcols > 0 {
                let (phi, t, t2) = sub.eval_with_hessian(s)?;
                let gamma = christoffel_scalar::<f64>(metric, &phi)?;
                let g = metric.eval(&phi)?;
                let mut gbar = vec![0.0; k * k];
                for a in 0..k {
                    for b in 0..k {
                        let mut acc = 0.0;
                        for i in 0..n {
                            for j in 0..n {
                                acc += g[i * n + j] * t[a][i] * t[b][j];
                            }
                        }
                        gbar[a * k + b] = acc;
                    }
                }
                let gbar_inv = invert(&gbar, k)?;
                let mut zdot = vec![0.0; n];
                for (a, col) in t.iter().enumerate() {
                    for i in 0..n {
                        zdot[i] += col[i] * sdot[a];
                    }
                }
                let mut ub = vec![vec![0.0; n]; k];
                for b in 0..k {
                    for l in 0..n {
                        let mut acc = 0.0;
                        for cc in 0..k {
                            acc += t2[b][cc][l] * sdot[cc];
                        }
                        for j in 0..n {
                            for kk in 0..n {
                                acc += gamma[(l * n + j) * n + kk] * zdot[j] * t[b][kk];
                            }
                        }
                        ub[b][l] = acc;
                    }
                }
                for colidx in 0..wcols {
                    let w = &y[2 * k + colidx * n..2 * k + (colidx + 1) * n];
                    let mut lam = vec![0.0; k];
                    for b in 0..k {
                        let mut acc = 0.0;
                        for i in 0..n {
                            for l in 0..n {
                                acc += g[i * n + l] * w[i] * ub[b][l];
                            }
                        }
                        lam[b] = acc;
                    }
                    for i in 0..n {
                        let mut acc = 0.0;
                        for j in 0..n {
                            for kk in 0..n {
                                acc -= gamma[(i * n + j) * n + kk] * zdot[j] * w[kk];
                            }
                        }
                        for a in 0..k {
                            for b in 0..k {
                                acc -= gbar_inv[a * k + b] * lam[b] * t[a][i];
                            }
                        }
                        out.push(acc);
                    }
                }
            }
            Ok(out)
        };
        let y = integrate(&y0, 1.0, &self.solver, &mut rhs)?;
        let s_end = y[..k].to_vec();
        let mut w = if with_w {
            (0..codim)
                .map(|col| y[2 * k + col * n..2 * k + (col + 1) * n].to_vec())
                .collect::<Vec<_>>()
        } else {
            self.frame.normal().to_vec()
        };
        if let TransportMode::TwistedBy(rate) = self.transport {
            let th = rate * x[0];
            let (ct, st) = (th.cos(), th.sin());
            let w0 = w[0].clone();
            let w1 = w[1].clone();
            for i in 0..n {
                w[0][i] = ct * w0[i] - st * w1[i];
                w[1][i] = st * w0[i] + ct * w1[i];
            }
        }
        Ok((s_end, w))
    }

    /// Parameter point reached by the intrinsic exponential map.
    pub fn intrinsic_point(&self, x: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(x.len(), self.sub.dim());
        self.guard_radius(x, &[])?;
        Ok(self.real_stage_a(x)?.0)
    }

    /// Transported normal frame columns at tangential position x.
    pub fn transported_frame_at(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        assert_eq!(x.len(), self.sub.dim());
        self.guard_radius(x, &[])?;
        Ok(self.real_stage_a(x)?.1)
    }

    /// Evaluate the chart map at a real point inside the chart radius.
    pub fn map_point(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let n = self.metric.dim();
        let k = self.sub.dim();
        assert_eq!(x.len(), k);
        assert_eq!(u.len(), n - k);
        self.guard_radius(x, u)?;
        let (s_end, w) = self.real_stage_a(x)?;
        let z0 = self.sub.eval(&s_end)?;
        let mut v0 = vec![0.0; n];
        for (g, &ug) in u.iter().enumerate() {
            for i in 0..n {
                v0[i] += ug * w[g][i];
            }
        }
        let (z, _) = geodesic_flow(&self.metric, &z0, &v0, 1.0, &self.solver)?;
        Ok(z)
    }
}

/// Connection coefficients of the pullback metric at arbitrary parameters.
fn induced_christoffel_at(
    metric: &MetricChart,
    sub: &SubmanifoldChart,
    s: &[f64],
) -> Result<Vec<f64>> {
    let k = sub.dim();
    let n = sub.ambient_dim();
    let seeded: Vec<Dual<f64>> = s
        .iter()
        .enumerate()
        .map(|(a, &v)| Dual::seeded(v, k, a))
        .collect();
    let (phi, t) = sub.eval_with_jacobian(&seeded)?;
    let g = metric.eval(&phi)?;
    let mut gbar = vec![Dual::constant(0.0, k); k * k];
    for a in 0..k {
        for b in 0..k {
            let mut acc = Dual::constant(0.0, k);
            for i in 0..n {
                for j in 0..n {
                    acc = acc.add(&g[i * n + j].mul(&t[a][i]).mul(&t[b][j]));
                }
            }
            gbar[a * k + b] = acc;
        }
    }
    let g0: Vec<f64> = gbar.iter().map(|d| d.val).collect();
    let ginv = invert(&g0, k)?;
    let dg = |l: usize, a: usize, b: usize| gbar[a * k + b].grad[l];
    let mut gamma = vec![0.0; k * k * k];
    for c in 0..k {
        for a in 0..k {
            for b in 0..k {
                let mut acc = 0.0;
                for l in 0..k {
                    acc += ginv[c * k + l] * (dg(a, b, l) + dg(b, a, l) - dg(l, a, b));
                }
                gamma[(c * k + a) * k + b] = 0.5 * acc;
            }
        }
    }
    Ok(gamma)
}
