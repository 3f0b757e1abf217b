//! Truncated multivariate Taylor jets.
//!
//! A [`Jet`] stores the Taylor coefficients c_K = (1/K!) ∂^K f of a smooth
//! function at a base point, densely over all multi-indices K with |K| up to
//! the truncation order, in graded lexicographic order. Arithmetic is exact
//! on the retained coefficients: truncating inputs first and truncating the
//! exact result agree. Elementary functions expand the univariate series
//! about the constant term and compose with the nilpotent remainder, so they
//! are likewise exact to the truncation order.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::JetError;

/// Exponent vector of a monomial; `order` is the total degree.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    exps: Vec<u8>,
}

impl MultiIndex {
    pub fn new(exps: &[usize]) -> Self {
        MultiIndex {
            exps: exps.iter().map(|&e| e as u8).collect(),
        }
    }

    pub fn exponents(&self) -> Vec<usize> {
        self.exps.iter().map(|&e| e as usize).collect()
    }

    pub fn order(&self) -> usize {
        self.exps.iter().map(|&e| e as usize).sum()
    }

    /// K! = prod k_i!
    pub fn factorial(&self) -> f64 {
        self.exps
            .iter()
            .map(|&e| (1..=e as u64).product::<u64>() as f64)
            .product()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.exps.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// Shared coefficient layout for all jets of a given (nvars, order):
/// the graded-lex index list, position lookup, and the product pair table.
#[derive(Debug)]
pub struct JetShape {
    nvars: usize,
    order: usize,
    indices: Vec<Vec<u8>>,
    pos: HashMap<Vec<u8>, u32>,
    /// For each left coefficient position i: list of (j, k) with
    /// index[i] + index[j] = index[k], |index[i]| + |index[j]| <= order.
    pairs: Vec<Vec<(u32, u32)>>,
}

fn enumerate_degree(nvars: usize, degree: usize, out: &mut Vec<Vec<u8>>) {
    fn rec(prefix: &mut Vec<u8>, remaining: usize, slots: usize, out: &mut Vec<Vec<u8>>) {
        if slots == 1 {
            prefix.push(remaining as u8);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=remaining).rev() {
            prefix.push(e as u8);
            rec(prefix, remaining - e, slots - 1, out);
            prefix.pop();
        }
    }
    rec(&mut Vec::new(), degree, nvars, out);
}

impl JetShape {
    fn build(nvars: usize, order: usize) -> JetShape {
        let mut indices = Vec::new();
        for d in 0..=order {
            enumerate_degree(nvars, d, &mut indices);
        }
        let pos: HashMap<Vec<u8>, u32> = indices
            .iter()
            .enumerate()
            .map(|(i, idx)| (idx.clone(), i as u32))
            .collect();
        let mut pairs = vec![Vec::new(); indices.len()];
        for (i, a) in indices.iter().enumerate() {
            let da: usize = a.iter().map(|&e| e as usize).sum();
            for (j, b) in indices.iter().enumerate() {
                let db: usize = b.iter().map(|&e| e as usize).sum();
                if da + db > order {
                    continue;
                }
                let sum: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                let k = pos[&sum];
                pairs[i].push((j as u32, k));
            }
        }
        JetShape {
            nvars,
            order,
            indices,
            pos,
            pairs,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn indices(&self) -> impl Iterator<Item = &[u8]> {
        self.indices.iter().map(|v| v.as_slice())
    }

    pub fn index_at(&self, i: usize) -> &[u8] {
        &self.indices[i]
    }

    pub fn position(&self, exps: &[u8]) -> Option<usize> {
        self.pos.get(exps).map(|&i| i as usize)
    }
}

fn shape_cache() -> &'static Mutex<HashMap<(usize, usize), Arc<JetShape>>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetShape>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Fetch (building and caching on first use) the layout for `nvars` variables
/// truncated at `order`.
pub fn shape(nvars: usize, order: usize) -> Arc<JetShape> {
    let mut cache = shape_cache().lock().unwrap();
    cache
        .entry((nvars, order))
        .or_insert_with(|| Arc::new(JetShape::build(nvars, order)))
        .clone()
}

/// Variable count, truncation order, and display names for a jet space.
#[derive(Debug, Clone, PartialEq)]
pub struct JetConfig {
    pub nvars: usize,
    pub order: usize,
    pub names: Vec<String>,
}

impl JetConfig {
    pub fn new(nvars: usize, order: usize) -> Self {
        let names = (1..=nvars).map(|i| format!("x{i}")).collect();
        JetConfig {
            nvars,
            order,
            names,
        }
    }

    pub fn with_names(nvars: usize, order: usize, names: &[&str]) -> Self {
        assert_eq!(names.len(), nvars);
        JetConfig {
            nvars,
            order,
            names: names.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn shape(&self) -> Arc<JetShape> {
        shape(self.nvars, self.order)
    }
}

/// Truncated Taylor expansion of a scalar function.
#[derive(Clone)]
pub struct Jet {
    shape: Arc<JetShape>,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Jet({} vars, order {}: [",
            self.shape.nvars, self.shape.order
        )?;
        let mut first = true;
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c != 0.0 {
                if !first {
                    write!(f, ", ")?;
                }
                first = false;
                write!(f, "{}: {}", MultiIndex::new(&to_usize(self.shape.index_at(i))), c)?;
            }
        }
        write!(f, "])")
    }
}

fn to_usize(v: &[u8]) -> Vec<usize> {
    v.iter().map(|&e| e as usize).collect()
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        self.shape.nvars == other.shape.nvars
            && self.shape.order == other.shape.order
            && self.coeffs == other.coeffs
    }
}

impl Jet {
    pub fn constant(nvars: usize, order: usize, value: f64) -> Jet {
        let shape = shape(nvars, order);
        let mut coeffs = vec![0.0; shape.len()];
        coeffs[0] = value;
        Jet { shape, coeffs }
    }

    /// The seeded coordinate function: value at the base point plus a unit
    /// linear term. At order 0 only the constant survives.
    pub fn variable(nvars: usize, order: usize, index: usize, value: f64) -> Result<Jet, JetError> {
        if index >= nvars {
            return Err(JetError::VariableOutOfRange { index, nvars });
        }
        let mut jet = Jet::constant(nvars, order, value);
        if order >= 1 {
            let mut exps = vec![0u8; nvars];
            exps[index] = 1;
            let pos = jet.shape.position(&exps).unwrap();
            jet.coeffs[pos] = 1.0;
        }
        Ok(jet)
    }

    pub fn from_coeffs(nvars: usize, order: usize, coeffs: Vec<f64>) -> Jet {
        let shape = shape(nvars, order);
        assert_eq!(coeffs.len(), shape.len());
        Jet { shape, coeffs }
    }

    pub fn zero_like(&self) -> Jet {
        Jet {
            shape: self.shape.clone(),
            coeffs: vec![0.0; self.coeffs.len()],
        }
    }

    pub fn shape(&self) -> &Arc<JetShape> {
        &self.shape
    }

    pub fn nvars(&self) -> usize {
        self.shape.nvars
    }

    pub fn order(&self) -> usize {
        self.shape.order
    }

    pub fn constant_term(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    /// Raw Taylor coefficient c_K (without the K! factor).
    pub fn taylor_coeff(&self, k: &[usize]) -> f64 {
        let exps: Vec<u8> = k.iter().map(|&e| e as u8).collect();
        match self.shape.position(&exps) {
            Some(i) => self.coeffs[i],
            None => 0.0,
        }
    }

    /// Derivative value ∂^K f at the base point, i.e. K! c_K.
    pub fn partial_derivative(&self, k: &[usize]) -> Result<f64, JetError> {
        let total: usize = k.iter().sum();
        if k.len() != self.shape.nvars {
            return Err(JetError::ShapeMismatch(
                self.shape.nvars,
                self.shape.order,
                k.len(),
                total,
            ));
        }
        if total > self.shape.order {
            return Err(JetError::OrderExceeded(total, self.shape.order));
        }
        let m = MultiIndex::new(k);
        Ok(self.taylor_coeff(k) * m.factorial())
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    fn check_same_shape(&self, other: &Jet) -> Result<(), JetError> {
        if self.shape.nvars != other.shape.nvars || self.shape.order != other.shape.order {
            return Err(JetError::ShapeMismatch(
                self.shape.nvars,
                self.shape.order,
                other.shape.nvars,
                other.shape.order,
            ));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Jet) -> Result<Jet, JetError> {
        self.check_same_shape(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Jet {
            shape: self.shape.clone(),
            coeffs,
        })
    }

    pub fn try_sub(&self, other: &Jet) -> Result<Jet, JetError> {
        self.check_same_shape(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Jet {
            shape: self.shape.clone(),
            coeffs,
        })
    }

    /// Cauchy product, truncated at the shared order.
    pub fn try_mul(&self, other: &Jet) -> Result<Jet, JetError> {
        self.check_same_shape(other)?;
        let mut coeffs = vec![0.0; self.coeffs.len()];
        for (i, row) in self.shape.pairs.iter().enumerate() {
            let a = self.coeffs[i];
            if a == 0.0 {
                continue;
            }
            for &(j, k) in row {
                let b = other.coeffs[j as usize];
                if b != 0.0 {
                    coeffs[k as usize] += a * b;
                }
            }
        }
        Ok(Jet {
            shape: self.shape.clone(),
            coeffs,
        })
    }

    pub fn scaled(&self, c: f64) -> Jet {
        Jet {
            shape: self.shape.clone(),
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
        }
    }

    pub fn add_scaled_assign(&mut self, c: f64, other: &Jet) {
        debug_assert_eq!(self.coeffs.len(), other.coeffs.len());
        if c == 0.0 {
            return;
        }
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += c * b;
        }
    }

    /// Discard all coefficients of total degree above `order`. The layout is
    /// graded, so this is a prefix copy.
    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.shape.order {
            return self.clone();
        }
        let target = shape(self.shape.nvars, order);
        let coeffs = self.coeffs[..target.len()].to_vec();
        Jet {
            shape: target,
            coeffs,
        }
    }

    /// Pad with zero coefficients up to a higher truncation order.
    pub fn pad_to(&self, order: usize) -> Jet {
        if order <= self.shape.order {
            return self.truncate(order);
        }
        let target = shape(self.shape.nvars, order);
        let mut coeffs = vec![0.0; target.len()];
        coeffs[..self.coeffs.len()].copy_from_slice(&self.coeffs);
        Jet {
            shape: target,
            coeffs,
        }
    }

    /// Partial derivative ∂/∂v as a jet of order one less.
    pub fn derivative(&self, v: usize) -> Jet {
        assert!(v < self.shape.nvars);
        let new_order = self.shape.order.saturating_sub(1);
        let target = shape(self.shape.nvars, new_order);
        let mut coeffs = vec![0.0; target.len()];
        for (i, out) in coeffs.iter_mut().enumerate() {
            let mut exps = target.index_at(i).to_vec();
            exps[v] += 1;
            if let Some(src) = self.shape.position(&exps) {
                *out = self.coeffs[src] * exps[v] as f64;
            }
        }
        Jet {
            shape: target,
            coeffs,
        }
    }

    /// Zero every coefficient that involves any of the listed variables.
    /// (Evaluation at those variables = 0, keeping the shape.)
    pub fn restrict_zero(&self, vars: &[usize]) -> Jet {
        let mut out = self.clone();
        for (i, c) in out.coeffs.iter_mut().enumerate() {
            let idx = self.shape.index_at(i);
            if vars.iter().any(|&v| idx[v] > 0) {
                *c = 0.0;
            }
        }
        out
    }

    /// Evaluate the truncated polynomial at a real displacement from the base
    /// point. This is plain polynomial evaluation; truncation error is the
    /// caller's concern.
    pub fn eval_poly(&self, dx: &[f64]) -> f64 {
        assert_eq!(dx.len(), self.shape.nvars);
        let mut total = 0.0;
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let mut term = c;
            for (v, &e) in self.shape.index_at(i).iter().enumerate() {
                for _ in 0..e {
                    term *= dx[v];
                }
            }
            total += term;
        }
        total
    }

    /// Compose the univariate series sum_j a_j w^j with the nonconstant part
    /// w of self, via Horner. `series[j]` must be f^(j)(c)/j! for the
    /// constant term c.
    fn compose_univariate(&self, series: &[f64]) -> Jet {
        let mut w = self.clone();
        w.coeffs[0] = 0.0;
        let order = self.shape.order;
        let mut result = Jet::constant(self.shape.nvars, order, series[order.min(series.len() - 1)]);
        for j in (0..order.min(series.len() - 1)).rev() {
            result = result.try_mul(&w).unwrap();
            result.coeffs[0] += series[j];
        }
        result
    }

    pub fn sin(&self) -> Jet {
        let c = self.coeffs[0];
        let (s, co) = c.sin_cos();
        let cycle = [s, co, -s, -co];
        let mut series = vec![0.0; self.shape.order + 1];
        let mut fact = 1.0;
        for (j, slot) in series.iter_mut().enumerate() {
            if j > 0 {
                fact *= j as f64;
            }
            *slot = cycle[j % 4] / fact;
        }
        self.compose_univariate(&series)
    }

    pub fn cos(&self) -> Jet {
        let c = self.coeffs[0];
        let (s, co) = c.sin_cos();
        let cycle = [co, -s, -co, s];
        let mut series = vec![0.0; self.shape.order + 1];
        let mut fact = 1.0;
        for (j, slot) in series.iter_mut().enumerate() {
            if j > 0 {
                fact *= j as f64;
            }
            *slot = cycle[j % 4] / fact;
        }
        self.compose_univariate(&series)
    }

    pub fn exp(&self) -> Jet {
        let e = self.coeffs[0].exp();
        let mut series = vec![0.0; self.shape.order + 1];
        let mut fact = 1.0;
        for (j, slot) in series.iter_mut().enumerate() {
            if j > 0 {
                fact *= j as f64;
            }
            *slot = e / fact;
        }
        self.compose_univariate(&series)
    }

    pub fn sqrt(&self) -> Result<Jet, JetError> {
        let c = self.coeffs[0];
        if c <= 0.0 {
            return Err(JetError::SqrtNonPositive(c));
        }
        let mut series = vec![0.0; self.shape.order + 1];
        series[0] = c.sqrt();
        for j in 1..series.len() {
            // a_j = a_{j-1} * (1/2 - (j-1)) / (j c)
            series[j] = series[j - 1] * (0.5 - (j as f64 - 1.0)) / (j as f64 * c);
        }
        Ok(self.compose_univariate(&series))
    }

    pub fn recip(&self) -> Result<Jet, JetError> {
        let c = self.coeffs[0];
        if c == 0.0 {
            return Err(JetError::ReciprocalZero);
        }
        let mut series = vec![0.0; self.shape.order + 1];
        let mut p = 1.0 / c;
        for slot in series.iter_mut() {
            *slot = p;
            p *= -1.0 / c;
        }
        Ok(self.compose_univariate(&series))
    }

    pub fn try_div(&self, other: &Jet) -> Result<Jet, JetError> {
        self.try_mul(&other.recip()?)
    }

    /// Integer power by binary exponentiation; negative exponents go through
    /// the reciprocal and need a nonzero constant term.
    pub fn powi(&self, k: i32) -> Result<Jet, JetError> {
        if k < 0 {
            return self.recip()?.powi(-(k as i64) as i32);
        }
        let mut result = Jet::constant(self.shape.nvars, self.shape.order, 1.0);
        let mut base = self.clone();
        let mut e = k as u32;
        while e > 0 {
            if e & 1 == 1 {
                result = result.try_mul(&base).unwrap();
            }
            e >>= 1;
            if e > 0 {
                base = base.try_mul(&base).unwrap();
            }
        }
        Ok(result)
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.try_add(rhs).expect("jet addition: shape mismatch")
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.try_sub(rhs).expect("jet subtraction: shape mismatch")
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.try_mul(rhs).expect("jet product: shape mismatch")
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scaled(-1.0)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        &self + &rhs
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        &self - &rhs
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        &self * &rhs
    }
}

/// Powers of a fixed tuple of inner jets, one per outer monomial. Building
/// the table once lets many outer jets be composed against the same inners
/// for the cost of a linear combination each.
pub struct MonomialTable {
    outer_shape: Arc<JetShape>,
    powers: Vec<Jet>,
}

impl MonomialTable {
    /// Inners must share a shape and have exactly zero constant term (the
    /// composition is then exact to the truncation order).
    pub fn new(outer_shape: Arc<JetShape>, inners: &[Jet]) -> Result<MonomialTable, JetError> {
        if inners.len() != outer_shape.nvars() {
            return Err(JetError::InnerCountMismatch {
                expected: outer_shape.nvars(),
                got: inners.len(),
            });
        }
        for (i, inner) in inners.iter().enumerate() {
            inner.check_same_shape(&inners[0])?;
            if inner.constant_term() != 0.0 {
                return Err(JetError::NonzeroInnerConstant(i, inner.constant_term()));
            }
        }
        let inner_shape = inners[0].shape().clone();
        let mut powers: Vec<Jet> = Vec::with_capacity(outer_shape.len());
        powers.push(Jet::constant(inner_shape.nvars(), inner_shape.order(), 1.0));
        for i in 1..outer_shape.len() {
            let idx = outer_shape.index_at(i).to_vec();
            let v = idx.iter().position(|&e| e > 0).unwrap();
            let mut parent = idx.clone();
            parent[v] -= 1;
            let parent_pos = outer_shape.position(&parent).unwrap();
            let jet = powers[parent_pos].try_mul(&inners[v])?;
            powers.push(jet);
        }
        Ok(MonomialTable {
            outer_shape,
            powers,
        })
    }

    pub fn eval(&self, outer: &Jet) -> Result<Jet, JetError> {
        if outer.shape().nvars() != self.outer_shape.nvars()
            || outer.shape().order() != self.outer_shape.order()
        {
            return Err(JetError::ShapeMismatch(
                outer.shape().nvars(),
                outer.shape().order(),
                self.outer_shape.nvars(),
                self.outer_shape.order(),
            ));
        }
        let mut result = self.powers[0].zero_like();
        for (i, &c) in outer.coeffs().iter().enumerate() {
            result.add_scaled_assign(c, &self.powers[i]);
        }
        Ok(result)
    }
}

/// Substitute the inner jets for the outer jet's variables. The inner jets
/// must have zero constant term; the result is exact to the truncation order
/// of the inners.
pub fn compose(outer: &Jet, inners: &[Jet]) -> Result<Jet, JetError> {
    let table = MonomialTable::new(outer.shape().clone(), inners)?;
    table.eval(outer)
}
