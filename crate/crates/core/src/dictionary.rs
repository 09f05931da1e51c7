//! Candidate-term libraries and their evaluation.
//!
//! A library evaluates every term on full spatial snapshots. Derivative terms
//! need the whole field for their stencils, so states enter as `[time, M, d₂]`
//! and rows are flattened only in the output feature block.

use std::collections::HashSet;

use ndarray::{Array2, ArrayView3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{first_non_finite, SpatialGrid};
use crate::error::{Error, Result};
use crate::simulate::System;

const AXIS_NAMES: [&str; 4] = ["x", "y", "z", "w"];

/// Highest supported derivative order per axis.
pub const MAX_ORDER: u32 = 4;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameters", rename_all = "snake_case")]
pub enum TermKind {
    Constant,
    Monomial { exponents: Vec<u32> },
    Derivative { variable: usize, orders: Vec<u32> },
    Product { exponents: Vec<u32>, variable: usize, orders: Vec<u32> },
}

impl TermKind {
    /// Exponents of a polynomial term; `None` for terms involving derivatives.
    pub fn exponents(&self, n_vars: usize) -> Option<Vec<u32>> {
        match self {
            TermKind::Constant => Some(vec![0; n_vars]),
            TermKind::Monomial { exponents } => Some(exponents.clone()),
            _ => None,
        }
    }

    pub fn has_derivative(&self) -> bool {
        matches!(self, TermKind::Derivative { .. } | TermKind::Product { .. })
    }

    /// Human-readable label such as `u^2 v`, `u_xx` or `u u_x`.
    pub fn label(&self, variables: &[String]) -> String {
        match self {
            TermKind::Constant => "1".into(),
            TermKind::Monomial { exponents } => monomial_label(exponents, variables),
            TermKind::Derivative { variable, orders } => {
                derivative_label(*variable, orders, variables)
            }
            TermKind::Product { exponents, variable, orders } => format!(
                "{} {}",
                monomial_label(exponents, variables),
                derivative_label(*variable, orders, variables)
            ),
        }
    }
}

fn monomial_label(exponents: &[u32], variables: &[String]) -> String {
    let parts: Vec<String> = exponents
        .iter()
        .zip(variables)
        .filter(|(&e, _)| e > 0)
        .map(|(&e, name)| if e == 1 { name.clone() } else { format!("{name}^{e}") })
        .collect();
    if parts.is_empty() {
        "1".into()
    } else {
        parts.join(" ")
    }
}

fn derivative_label(variable: usize, orders: &[u32], variables: &[String]) -> String {
    let mut s = format!("{}_", variables[variable]);
    for (axis, &o) in orders.iter().enumerate() {
        for _ in 0..o {
            s.push_str(AXIS_NAMES[axis]);
        }
    }
    s
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    #[serde(flatten)]
    pub kind: TermKind,
    pub label: String,
}

#[derive(Clone, Debug)]
enum Plan {
    Constant,
    Monomial(Vec<u32>),
    Derivative(usize),
    Product(Vec<u32>, usize),
}

/// Ordered candidate terms over `d₂` named state variables.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "RawLibrary", into = "RawLibrary")]
pub struct Library {
    variables: Vec<String>,
    grid: SpatialGrid,
    terms: Vec<Term>,
    // distinct (variable, orders) fields needed by the terms
    fields: Vec<(usize, Vec<u32>)>,
    plans: Vec<Plan>,
}

impl PartialEq for Library {
    fn eq(&self, other: &Self) -> bool {
        self.variables == other.variables && self.grid == other.grid && self.terms == other.terms
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLibrary {
    variables: Vec<String>,
    grid: SpatialGrid,
    terms: Vec<Term>,
}

impl TryFrom<RawLibrary> for Library {
    type Error = Error;
    fn try_from(r: RawLibrary) -> Result<Self> {
        Self::with_terms(r.variables, r.grid, r.terms)
    }
}

impl From<Library> for RawLibrary {
    fn from(l: Library) -> Self {
        RawLibrary { variables: l.variables, grid: l.grid, terms: l.terms }
    }
}

impl Library {
    /// Builds a library, generating labels from the variable names.
    pub fn new(variables: Vec<String>, grid: SpatialGrid, kinds: Vec<TermKind>) -> Result<Self> {
        let terms = kinds
            .into_iter()
            .map(|kind| {
                if let TermKind::Derivative { variable, .. } | TermKind::Product { variable, .. } =
                    &kind
                {
                    if *variable >= variables.len() {
                        return Err(Error::InvalidLibrary(format!(
                            "variable index {variable} out of range"
                        )));
                    }
                }
                let label = kind.label(&variables);
                Ok(Term { kind, label })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::with_terms(variables, grid, terms)
    }

    pub fn with_terms(variables: Vec<String>, grid: SpatialGrid, terms: Vec<Term>) -> Result<Self> {
        let d = variables.len();
        if d == 0 {
            return Err(Error::InvalidLibrary("no state variables".into()));
        }
        if terms.is_empty() {
            return Err(Error::InvalidLibrary("library has no terms".into()));
        }
        let mut seen = HashSet::new();
        let mut fields: Vec<(usize, Vec<u32>)> = Vec::new();
        let mut plans = Vec::with_capacity(terms.len());
        for t in &terms {
            if !seen.insert(t.label.as_str()) {
                return Err(Error::InvalidLibrary(format!("duplicate label {:?}", t.label)));
            }
            let check_exp = |e: &Vec<u32>| {
                if e.len() != d {
                    Err(Error::InvalidLibrary(format!(
                        "term {:?} has {} exponents for {d} variables",
                        t.label,
                        e.len()
                    )))
                } else {
                    Ok(())
                }
            };
            let mut field_index = |variable: usize, orders: &Vec<u32>| -> Result<usize> {
                if variable >= d {
                    return Err(Error::InvalidLibrary(format!(
                        "term {:?} differentiates variable {variable}",
                        t.label
                    )));
                }
                if orders.len() != grid.ndim() {
                    return Err(Error::GridMismatch(format!(
                        "term {:?} has {} derivative axes on a {}-d grid",
                        t.label,
                        orders.len(),
                        grid.ndim()
                    )));
                }
                if let Some(&o) = orders.iter().find(|&&o| o > MAX_ORDER) {
                    return Err(Error::UnsupportedOrder(o));
                }
                if orders.iter().all(|&o| o == 0) {
                    return Err(Error::InvalidLibrary(format!(
                        "term {:?} has no derivative",
                        t.label
                    )));
                }
                let key = (variable, orders.clone());
                Ok(match fields.iter().position(|f| *f == key) {
                    Some(i) => i,
                    None => {
                        fields.push(key);
                        fields.len() - 1
                    }
                })
            };
            plans.push(match &t.kind {
                TermKind::Constant => Plan::Constant,
                TermKind::Monomial { exponents } => {
                    check_exp(exponents)?;
                    Plan::Monomial(exponents.clone())
                }
                TermKind::Derivative { variable, orders } => {
                    Plan::Derivative(field_index(*variable, orders)?)
                }
                TermKind::Product { exponents, variable, orders } => {
                    check_exp(exponents)?;
                    let f = field_index(*variable, orders)?;
                    Plan::Product(exponents.clone(), f)
                }
            });
        }
        Ok(Self { variables, grid, terms, fields, plans })
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn labels(&self) -> Vec<&str> {
        self.terms.iter().map(|t| t.label.as_str()).collect()
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.terms.iter().position(|t| t.label == label)
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn is_polynomial(&self) -> bool {
        self.terms.iter().all(|t| !t.kind.has_derivative())
    }

    /// Same terms under new variable names, with regenerated labels.
    pub fn renamed(&self, variables: &[&str]) -> Result<Self> {
        if variables.len() != self.n_vars() {
            return Err(Error::InvalidLibrary("wrong number of variable names".into()));
        }
        Self::new(
            variables.iter().map(|s| s.to_string()).collect(),
            self.grid.clone(),
            self.terms.iter().map(|t| t.kind.clone()).collect(),
        )
    }

    /// Library restricted to the given term indices, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let terms = indices
            .iter()
            .map(|&i| {
                self.terms
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::InvalidLibrary(format!("term index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::with_terms(self.variables.clone(), self.grid.clone(), terms)
    }

    /// Feature block `[rows_t · M, |Θ|]` for states `[rows_t, M, d₂]`.
    ///
    /// Times are accepted for non-autonomous terms; none of the provided
    /// term kinds depend on them.
    pub fn evaluate(&self, state: ArrayView3<'_, f64>, times: &[f64]) -> Result<Array2<f64>> {
        let (nt, m, d) = state.dim();
        if m != self.grid.size() || d != self.n_vars() {
            return Err(Error::ShapeMismatch(format!(
                "state [{nt}, {m}, {d}] does not fit library over {} points and {} variables",
                self.grid.size(),
                self.n_vars()
            )));
        }
        if times.len() != nt {
            return Err(Error::ShapeMismatch(format!(
                "{} times for {nt} snapshots",
                times.len()
            )));
        }
        let state = state.as_standard_layout();
        let flat = state.as_slice().expect("standard layout");
        if let Some(index) = first_non_finite(flat.iter()) {
            return Err(Error::NonFiniteState { index });
        }
        let p = self.len();
        let mut out = Array2::zeros((nt * m, p));
        if m * p > 0 && nt > 0 {
            out.as_slice_mut()
                .expect("fresh array")
                .par_chunks_mut(m * p)
                .zip(flat.par_chunks(m * d))
                .zip(times.par_iter())
                .for_each_init(Vec::new, |scratch, ((o, s), &t)| {
                    self.eval_snapshot(s, t, o, scratch)
                });
        }
        Ok(out)
    }

    /// Number of scratch values `eval_snapshot` needs.
    pub(crate) fn scratch_len(&self) -> usize {
        let m = self.grid.size();
        if self.fields.is_empty() {
            0
        } else {
            (self.fields.len() + 2) * m
        }
    }

    /// One snapshot: `state` is `[M, d₂]`, `out` is `[M, |Θ|]`, both row-major.
    pub(crate) fn eval_snapshot(&self, state: &[f64], _t: f64, out: &mut [f64], scratch: &mut Vec<f64>) {
        let m = self.grid.size();
        let d = self.n_vars();
        let p = self.len();
        scratch.resize(self.scratch_len(), 0.0);
        if !self.fields.is_empty() {
            let (fields, work) = scratch.split_at_mut(self.fields.len() * m);
            let (a, b) = work.split_at_mut(m);
            for (f, (var, orders)) in self.fields.iter().enumerate() {
                for (i, x) in a.iter_mut().enumerate() {
                    *x = state[i * d + var];
                }
                let mut src_is_a = true;
                for (axis, &order) in orders.iter().enumerate() {
                    if order == 0 {
                        continue;
                    }
                    // one pass per axis; an order-2 pass is not two order-1 passes
                    if src_is_a {
                        apply_stencil(a, b, &self.grid, axis, order);
                    } else {
                        apply_stencil(b, a, &self.grid, axis, order);
                    }
                    src_is_a = !src_is_a;
                }
                let src = if src_is_a { &*a } else { &*b };
                fields[f * m..(f + 1) * m].copy_from_slice(src);
            }
        }
        let fields = &scratch[..self.fields.len() * m];
        for i in 0..m {
            let u = &state[i * d..(i + 1) * d];
            let row = &mut out[i * p..(i + 1) * p];
            for (c, plan) in self.plans.iter().enumerate() {
                row[c] = match plan {
                    Plan::Constant => 1.0,
                    Plan::Monomial(e) => monomial(u, e),
                    Plan::Derivative(f) => fields[f * m + i],
                    Plan::Product(e, f) => monomial(u, e) * fields[f * m + i],
                };
            }
        }
    }
}

#[inline]
pub(crate) fn monomial(u: &[f64], exponents: &[u32]) -> f64 {
    let mut x = 1.0;
    for (&ui, &e) in u.iter().zip(exponents) {
        for _ in 0..e {
            x *= ui;
        }
    }
    x
}

/// Central finite-difference weights as `(offset, weight)`, zero weights included.
pub fn stencil_weights(order: u32, dx: f64) -> Result<Vec<(i64, f64)>> {
    let (offsets, w): (Vec<i64>, Vec<f64>) = match order {
        1 => ((-1..=1).collect(), vec![-0.5, 0.0, 0.5]),
        2 => ((-1..=1).collect(), vec![1.0, -2.0, 1.0]),
        3 => ((-2..=2).collect(), vec![-0.5, 1.0, 0.0, -1.0, 0.5]),
        4 => ((-2..=2).collect(), vec![1.0, -4.0, 6.0, -4.0, 1.0]),
        o => return Err(Error::UnsupportedOrder(o)),
    };
    let scale = dx.powi(order as i32);
    Ok(offsets.into_iter().zip(w.into_iter().map(|x| x / scale)).collect())
}

/// Applies the periodic `order` stencil along `axis`.
fn apply_stencil(input: &[f64], output: &mut [f64], grid: &SpatialGrid, axis: usize, order: u32) {
    let n = grid.dims()[axis] as i64;
    let stride = grid.stride(axis);
    let weights: Vec<(i64, f64)> = stencil_weights(order, grid.spacings()[axis])
        .expect("orders validated at construction")
        .into_iter()
        .filter(|&(_, w)| w != 0.0)
        .collect();
    for (idx, out) in output.iter_mut().enumerate() {
        let c = ((idx / stride) as i64) % n;
        let base = idx as i64 - c * stride as i64;
        let mut acc = 0.0;
        for &(off, w) in &weights {
            let c2 = (c + off).rem_euclid(n);
            acc += w * input[(base + c2 * stride as i64) as usize];
        }
        *out = acc;
    }
}

/// `u, v, w` for up to three variables, `u0, u1, ...` beyond.
pub fn variable_names(d: usize) -> Vec<String> {
    if d <= 3 {
        ["u", "v", "w"][..d].iter().map(|s| s.to_string()).collect()
    } else {
        (0..d).map(|i| format!("u{i}")).collect()
    }
}

/// Monomials in `d` variables up to `degree`, ordered by total degree and then
/// by descending exponent of the earlier variables (`u^2, u v, v^2, ...`).
pub fn monomials(d: usize, degree: u32) -> Vec<TermKind> {
    fn fill(d: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == d - 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=left).rev() {
            prefix.push(e);
            fill(d, left - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = vec![TermKind::Constant];
    for deg in 1..=degree {
        let mut exps = Vec::new();
        fill(d, deg, &mut Vec::new(), &mut exps);
        out.extend(exps.into_iter().map(|exponents| TermKind::Monomial { exponents }));
    }
    out
}

/// The candidate dictionary used for each benchmark system.
pub fn standard_library(system: System, grid: &SpatialGrid) -> Result<Library> {
    let need = |ndim: usize, point: bool| -> Result<()> {
        let ok = if point { grid.is_point() } else { grid.ndim() == ndim && !grid.is_point() };
        if ok {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{system:?} needs {}, got dims {:?}",
                if point { "a single-point grid".to_string() } else { format!("a {ndim}-d grid") },
                grid.dims()
            )))
        }
    };
    let mono = |e: &[u32]| TermKind::Monomial { exponents: e.to_vec() };
    let kinds = match system {
        System::CubicOscillator => {
            need(1, true)?;
            monomials(2, 4)
        }
        System::LinearOscillator | System::FitzHughNagumo => {
            need(1, true)?;
            monomials(2, 3)
        }
        System::Advection => {
            need(1, false)?;
            let mut k = monomials(1, 3);
            k.extend((1..=3).map(|o| TermKind::Derivative { variable: 0, orders: vec![o] }));
            k
        }
        System::KuramotoSivashinsky => {
            need(1, false)?;
            let mut k = vec![TermKind::Constant];
            k.extend((1..=4).map(|o| TermKind::Derivative { variable: 0, orders: vec![o] }));
            k.push(TermKind::Product { exponents: vec![1], variable: 0, orders: vec![1] });
            k
        }
        System::ReactionDiffusion2d => {
            need(2, false)?;
            let d = |variable: usize, ox: u32, oy: u32| TermKind::Derivative {
                variable,
                orders: vec![ox, oy],
            };
            vec![
                TermKind::Constant,
                mono(&[1, 0]),
                mono(&[0, 1]),
                mono(&[2, 0]),
                mono(&[0, 2]),
                mono(&[3, 0]),
                mono(&[0, 3]),
                d(0, 1, 0),
                d(1, 1, 0),
                d(0, 0, 1),
                d(1, 0, 1),
                d(0, 2, 0),
                d(1, 2, 0),
                d(0, 0, 2),
                d(1, 0, 2),
                d(0, 1, 1),
                d(1, 1, 1),
                mono(&[1, 1]),
                mono(&[2, 1]),
                mono(&[1, 2]),
            ]
        }
    };
    Library::new(variable_names(system.n_vars()), grid.clone(), kinds)
}
