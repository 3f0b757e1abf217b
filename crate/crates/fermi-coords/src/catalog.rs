//! Built-in example geometries.
//!
//! Each entry expands to explicit expression strings for the metric and the
//! embedding, so a resolved case is self-describing and round-trips through
//! the run configuration instead of hiding state in code. Parameterized
//! entries (curvature strength, perturbation seed and size) bake the chosen
//! values into the generated expressions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chart::{MetricChart, SignatureType, SubmanifoldChart};
use crate::error::{Error, Result};
use crate::expr::parse_expression;

/// Name and one-line description of a built-in case.
#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub description: &'static str,
    /// Whether the entry takes a perturbation size and forms a smooth
    /// family degenerating to a flat, totally geodesic configuration.
    pub family: bool,
}

pub fn catalog() -> Vec<CatalogEntry> {
    let e = |name, description, family| CatalogEntry {
        name,
        description,
        family,
    };
    vec![
        e("flat-affine", "plane in Euclidean 3-space, type ((2,0),(1,0))", false),
        e(
            "minkowski-affine-plane",
            "mixed-signature plane in flat R^{2,1}, type ((1,1),(1,0))",
            false,
        ),
        e("circle-in-plane", "unit circle in the Euclidean plane", false),
        e("sphere2-in-r3", "unit sphere in Euclidean 3-space", false),
        e(
            "graph-quadratic",
            "curve (t, kappa t^2/2) in the plane; kappa sets the curvature",
            false,
        ),
        e("saddle-in-r3", "saddle graph z = (a^2 - b^2)/2 in Euclidean 3-space", false),
        e(
            "minkowski-spacelike-line",
            "spacelike axis in the Minkowski plane, type ((1,0),(0,1))",
            false,
        ),
        e(
            "minkowski-timelike-line",
            "timelike axis in the Minkowski plane, type ((0,1),(1,0))",
            false,
        ),
        e(
            "greatcircle-in-s3",
            "great circle on the Clifford torus of the round 3-sphere, codimension 2",
            false,
        ),
        e(
            "eps-perturbed-flat",
            "plane in a seeded random polynomial perturbation of flat R^3",
            true,
        ),
        e(
            "eps-perturbed-normal2",
            "line in a seeded random polynomial perturbation of flat R^3, codimension 2",
            true,
        ),
        e(
            "graph-eps",
            "curve (t, eps (t^2/2 + t^3/6)) in the plane, flattening as eps -> 0",
            true,
        ),
    ]
}

/// A case with all parameters baked into expression strings.
#[derive(Debug, Clone)]
pub struct ResolvedCase {
    pub name: String,
    pub sig: SignatureType,
    pub coords: Vec<String>,
    pub params: Vec<String>,
    pub metric: Vec<String>,
    pub embedding: Vec<String>,
    pub base: Vec<f64>,
}

impl ResolvedCase {
    pub fn build(&self) -> Result<(MetricChart, SubmanifoldChart)> {
        let coord_refs: Vec<&str> = self.coords.iter().map(|s| s.as_str()).collect();
        let metric_refs: Vec<&str> = self.metric.iter().map(|s| s.as_str()).collect();
        let metric = MetricChart::from_strings(&coord_refs, &metric_refs)?;
        let param_refs: Vec<&str> = self.params.iter().map(|s| s.as_str()).collect();
        let comp_refs: Vec<&str> = self.embedding.iter().map(|s| s.as_str()).collect();
        let sub = SubmanifoldChart::from_strings(
            self.coords.len(),
            &param_refs,
            &comp_refs,
            &self.base,
        )?;
        Ok((metric, sub))
    }

    /// Every expression reparses against its declared variables.
    pub fn check_parses(&self) -> Result<()> {
        let coord_refs: Vec<&str> = self.coords.iter().map(|s| s.as_str()).collect();
        for src in &self.metric {
            parse_expression(src, &coord_refs)?;
        }
        let param_refs: Vec<&str> = self.params.iter().map(|s| s.as_str()).collect();
        for src in &self.embedding {
            parse_expression(src, &param_refs)?;
        }
        Ok(())
    }
}

fn flat_metric(coords: &[&str], signs: &[f64]) -> (Vec<String>, Vec<String>) {
    let n = coords.len();
    let mut entries = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            entries.push(if i != j {
                "0".to_string()
            } else if signs[i] < 0.0 {
                "-1".to_string()
            } else {
                "1".to_string()
            });
        }
    }
    (coords.iter().map(|s| s.to_string()).collect(), entries)
}

fn fmt_f(v: f64) -> String {
    if v < 0.0 {
        format!("(-{})", -v)
    } else {
        format!("{v}")
    }
}

/// Symmetric random polynomial perturbation of the flat metric: every
/// entry gains eps times a degree <= 3 polynomial with coefficients drawn
/// from the seeded generator. Degree-2 terms make curvature nonzero at the
/// base point, degree-3 terms make its first derivatives nonzero.
fn perturbed_flat_metric(coords: &[&str], seed: u64, eps: f64) -> Vec<String> {
    let n = coords.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut monomials = Vec::new();
    for d in 1..=3usize {
        // all exponent vectors of total degree d
        let mut stack = vec![(vec![0usize; n], d, 0usize)];
        while let Some((exps, left, pos)) = stack.pop() {
            if pos == n {
                if left == 0 {
                    monomials.push(exps);
                }
                continue;
            }
            for e in 0..=left {
                let mut next = exps.clone();
                next[pos] = e;
                stack.push((next, left - e, pos + 1));
            }
        }
    }
    let mut upper = vec![String::new(); n * n];
    for i in 0..n {
        for j in i..n {
            let mut terms = Vec::new();
            for exps in &monomials {
                let c: f64 = rng.gen_range(-1.0..1.0);
                let mut factors = vec![fmt_f(c)];
                for (v, &e) in exps.iter().enumerate() {
                    match e {
                        0 => {}
                        1 => factors.push(coords[v].to_string()),
                        _ => factors.push(format!("{}^{}", coords[v], e)),
                    }
                }
                terms.push(factors.join("*"));
            }
            let poly = terms.join(" + ");
            let base = if i == j { "1" } else { "0" };
            upper[i * n + j] = format!("{base} + {}*({poly})", fmt_f(eps));
        }
    }
    let mut entries = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            entries.push(upper[a * n + b].clone());
        }
    }
    entries
}

/// Expand a catalog name into a fully explicit case. `kappa` feeds
/// graph-quadratic (default 1), `seed` the perturbed entries (default 0),
/// and `eps` is required for the family entries.
pub fn resolve(
    name: &str,
    kappa: Option<f64>,
    seed: Option<u64>,
    eps: Option<f64>,
) -> Result<ResolvedCase> {
    let need_eps = || {
        eps.ok_or_else(|| Error::config(format!("catalog case {name} needs a perturbation size")))
    };
    let kappa = kappa.unwrap_or(1.0);
    let seed = seed.unwrap_or(0);
    let strs = |v: &[&str]| -> Vec<String> { v.iter().map(|s| s.to_string()).collect() };

    let case = match name {
        "flat-affine" => {
            let (coords, metric) = flat_metric(&["z1", "z2", "z3"], &[1.0, 1.0, 1.0]);
            ResolvedCase {
                name: name.into(),
                sig: SignatureType::new((2, 0), (1, 0)),
                coords,
                params: strs(&["a", "b"]),
                metric,
                embedding: strs(&["a", "b", "0"]),
                base: vec![0.0, 0.0],
            }
        }
        "minkowski-affine-plane" => {
            let (coords, metric) = flat_metric(&["z1", "z2", "z3"], &[1.0, -1.0, 1.0]);
            ResolvedCase {
                name: name.into(),
                sig: SignatureType::new((1, 1), (1, 0)),
                coords,
                params: strs(&["a", "b"]),
                metric,
                embedding: strs(&["a", "b", "0"]),
                base: vec![0.0, 0.0],
            }
        }
        "circle-in-plane" => {
            let (coords, metric) = flat_metric(&["z1", "z2"], &[1.0, 1.0]);
            ResolvedCase {
                name: name.into(),
                sig: SignatureType::new((1, 0), (1, 0)),
                coords,
                params: strs(&["t"]),
                metric,
                embedding: strs(&["cos(t)", "sin(t)"]),
                base: vec![0.0],
            }
        }
        "sphere2-in-r3" => {
            let (coords, metric) = flat_metric(&["z1", "z2", "z3"], &[1.0, 1.0, 1.0]);
            ResolvedCase {
                name: name.into(),
                sig: SignatureType::new((2, 0), (1, 0)),
                coords,
                params: strs(&["p", "q"]),
                metric,
                embedding: strs(&["cos(p)*cos(q)", "sin(p)*cos(q)", "sin(q)"]),
                base: vec![0.0, 0.0],
            }
        }
        "graph-quadratic" => {
            let (coords, metric) = flat_metric(&["z1", "z2"], &[1.0, 1.0]);
            ResolvedCase {
                name: name.into(),
                sig: SignatureType::new((1, 0), (1, 0)),
                coords,
                params: strs(&["t"]),
                metric,
                embedding: vec!["t".into(), format!("{}*t^2/2", fmt_f(kappa))],
                base: vec![0.0],
            }
        }
        "saddle-in-r3" => {
            let (coords, metric) = flat_metric(&["z1", "z2", "z3"], &[1.0, 1.0, 1.0]);
            ResolvedCase {
                name: name.into(),
                sig: SignatureType::new((2, 0), (1, 0)),
                coords,
                params: strs(&["a", "b"]),
                metric,
                embedding: strs(&["a", "b", "(a^2 - b^2)/2"]),
                base: vec![0.0, 0.0],
            }
        }
        "minkowski-spacelike-line" => {
            let (coords, metric) = flat_metric(&["z1", "z2"], &[1.0, -1.0]);
            ResolvedCase {
                name: name.into(),
                sig: SignatureType::new((1, 0), (0, 1)),
                coords,
                params: strs(&["t"]),
                metric,
                embedding: strs(&["t", "0"]),
                base: vec![0.0],
            }
        }
        "minkowski-timelike-line" => {
            let (coords, metric) = flat_metric(&["z1", "z2"], &[1.0, -1.0]);
            ResolvedCase {
                name: name.into(),
                sig: SignatureType::new((0, 1), (1, 0)),
                coords,
                params: strs(&["t"]),
                metric,
                embedding: strs(&["0", "t"]),
                base: vec![0.0],
            }
        }
        "greatcircle-in-s3" => {
            // round 3-sphere in torus coordinates: diag(1, sin^2 psi, cos^2 psi);
            // the diagonal of the psi = pi/4 torus is a closed geodesic
            let quarter_pi = std::f64::consts::FRAC_PI_4;
            ResolvedCase {
                name: name.into(),
                sig: SignatureType::new((1, 0), (2, 0)),
                coords: strs(&["psi", "th", "ph"]),
                params: strs(&["t"]),
                metric: strs(&[
                    "1", "0", "0", "0", "sin(psi)^2", "0", "0", "0", "cos(psi)^2",
                ]),
                embedding: vec![format!("{quarter_pi}"), "t".into(), "t".into()],
                base: vec![0.0],
            }
        }
        "eps-perturbed-flat" => {
            let eps = need_eps()?;
            let coords = ["z1", "z2", "z3"];
            ResolvedCase {
                name: name.into(),
                sig: SignatureType::new((2, 0), (1, 0)),
                coords: strs(&coords),
                params: strs(&["a", "b"]),
                metric: perturbed_flat_metric(&coords, seed, eps),
                embedding: strs(&["a", "b", "0"]),
                base: vec![0.0, 0.0],
            }
        }
        "eps-perturbed-normal2" => {
            let eps = need_eps()?;
            let coords = ["z1", "z2", "z3"];
            ResolvedCase {
                name: name.into(),
                sig: SignatureType::new((1, 0), (2, 0)),
                coords: strs(&coords),
                params: strs(&["t"]),
                metric: perturbed_flat_metric(&coords, seed, eps),
                embedding: strs(&["t", "0", "0"]),
                base: vec![0.0],
            }
        }
        "graph-eps" => {
            let eps = need_eps()?;
            let (coords, metric) = flat_metric(&["z1", "z2"], &[1.0, 1.0]);
            ResolvedCase {
                name: name.into(),
                sig: SignatureType::new((1, 0), (1, 0)),
                coords,
                params: strs(&["t"]),
                metric,
                embedding: vec!["t".into(), format!("{}*(t^2/2 + t^3/6)", fmt_f(eps))],
                base: vec![0.0],
            }
        }
        other => {
            return Err(Error::config(format!("unknown catalog case: {other}")));
        }
    };
    Ok(case)
}
