//! Y-valued transition matrices, independent-type models, distributions,
//! the joint lift and trajectory sampling.

use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution as _;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{self, Matrix, Vector};
use crate::settings::Settings;

/// One violated invariant, with its location.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Shape { message: String },
    NonFinite { y: usize, x: usize, xp: usize },
    Negative { y: usize, x: usize, xp: usize, value: f64 },
    ColumnSum { xp: usize, sum: f64 },
    TransitionNegative { x: usize, xp: usize, value: f64 },
    TransitionColumnSum { xp: usize, sum: f64 },
    EmissionNegative { y: usize, xp: usize, value: f64 },
    EmissionColumnSum { xp: usize, sum: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Shape { message } => write!(f, "shape: {message}"),
            Violation::NonFinite { y, x, xp } => write!(f, "W_{y}({x}|{xp}) is not finite"),
            Violation::Negative { y, x, xp, value } => write!(f, "W_{y}({x}|{xp}) = {value} is negative"),
            Violation::ColumnSum { xp, sum } => write!(f, "column {xp} of |W| sums to {sum}"),
            Violation::TransitionNegative { x, xp, value } => write!(f, "W({x}|{xp}) = {value} is negative"),
            Violation::TransitionColumnSum { xp, sum } => write!(f, "column {xp} of W sums to {sum}"),
            Violation::EmissionNegative { y, xp, value } => write!(f, "V({y}|{xp}) = {value} is negative"),
            Violation::EmissionColumnSum { xp, sum } => write!(f, "column {xp} of V sums to {sum}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "no violations");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// The family (W_y) of nonnegative d x d matrices whose sum is column-stochastic.
/// Entry `(x, xp)` of `W_y` is the probability of moving from `xp` to `x` while emitting `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct YTransitionModel {
    d: usize,
    w: Vec<Matrix>,
}

/// Check the invariants of a Y-valued transition matrix given as raw parts.
pub fn validate_parts(w: &[Matrix], stochastic_tol: f64) -> ValidationReport {
    let mut violations = Vec::new();
    if w.is_empty() {
        violations.push(Violation::Shape { message: "no output symbols".into() });
        return ValidationReport { violations };
    }
    let d = w[0].nrows();
    if d == 0 {
        violations.push(Violation::Shape { message: "no hidden states".into() });
        return ValidationReport { violations };
    }
    for (y, m) in w.iter().enumerate() {
        if m.shape() != (d, d) {
            violations.push(Violation::Shape {
                message: format!("W_{y} has shape {}x{}, expected {d}x{d}", m.nrows(), m.ncols()),
            });
        }
    }
    if !violations.is_empty() {
        return ValidationReport { violations };
    }
    for (y, m) in w.iter().enumerate() {
        for xp in 0..d {
            for x in 0..d {
                let v = m[(x, xp)];
                if !v.is_finite() {
                    violations.push(Violation::NonFinite { y, x, xp });
                } else if v < 0.0 {
                    violations.push(Violation::Negative { y, x, xp, value: v });
                }
            }
        }
    }
    for xp in 0..d {
        let s: f64 = w.iter().map(|m| m.column(xp).sum()).sum();
        if !((s - 1.0).abs() <= stochastic_tol) {
            violations.push(Violation::ColumnSum { xp, sum: s });
        }
    }
    ValidationReport { violations }
}

impl YTransitionModel {
    /// Build and validate with the default stochasticity tolerance.
    pub fn new(w: Vec<Matrix>) -> Result<Self> {
        Self::new_with_tol(w, Settings::default().stochastic_tol)
    }

    pub fn new_with_tol(w: Vec<Matrix>, stochastic_tol: f64) -> Result<Self> {
        let report = validate_parts(&w, stochastic_tol);
        if !report.is_valid() {
            return Err(Error::Validation(report));
        }
        Ok(YTransitionModel { d: w[0].nrows(), w })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn dy(&self) -> usize {
        self.w.len()
    }

    pub fn w(&self, y: usize) -> &Matrix {
        &self.w[y]
    }

    pub fn matrices(&self) -> &[Matrix] {
        &self.w
    }

    /// The column-stochastic matrix |W| = sum_y W_y.
    pub fn total(&self) -> Matrix {
        let mut t = Matrix::zeros(self.d, self.d);
        for m in &self.w {
            t += m;
        }
        t
    }

    pub fn validate(&self, stochastic_tol: f64) -> ValidationReport {
        validate_parts(&self.w, stochastic_tol)
    }

    /// Support indicator in flattened (y, x, x') row-major order.
    pub fn support_mask(&self, support_tol: f64) -> Vec<bool> {
        let d = self.d;
        let mut mask = Vec::with_capacity(self.dy() * d * d);
        for m in &self.w {
            for x in 0..d {
                for xp in 0..d {
                    mask.push(m[(x, xp)] > support_tol);
                }
            }
        }
        mask
    }

    pub fn has_full_support(&self, support_tol: f64) -> bool {
        self.support_mask(support_tol).into_iter().all(|b| b)
    }

    pub fn is_irreducible(&self, support_tol: f64) -> bool {
        numerics::is_irreducible(&self.total(), support_tol)
    }

    /// Apply the word (y_1, ..., y_k), in time order, to `v`: W_{y_k} ... W_{y_1} v.
    pub fn apply_word(&self, word: &[usize], v: &Vector) -> Vector {
        word.iter().fold(v.clone(), |acc, &y| &self.w[y] * acc)
    }
}

/// Validate a model given as raw parts, with the default tolerance.
pub fn validate(model: &YTransitionModel) -> ValidationReport {
    model.validate(Settings::default().stochastic_tol)
}

/// A probability vector on the hidden states (or on X x Y for lifted laws).
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    p: Vector,
}

impl Distribution {
    pub fn new(p: Vector) -> Result<Self> {
        Self::new_with_tol(p, Settings::default().stochastic_tol)
    }

    pub fn new_with_tol(p: Vector, tol: f64) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidDistribution("empty vector".into()));
        }
        if let Some((i, v)) = p.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidDistribution(format!("entry {i} = {v} is negative or not finite")));
        }
        let s = p.sum();
        if (s - 1.0).abs() > tol {
            return Err(Error::InvalidDistribution(format!("entries sum to {s}")));
        }
        Ok(Distribution { p })
    }

    pub fn from_slice(p: &[f64]) -> Result<Self> {
        Self::new(Vector::from_column_slice(p))
    }

    pub fn uniform(d: usize) -> Self {
        Distribution { p: Vector::from_element(d, 1.0 / d as f64) }
    }

    pub fn point(d: usize, x: usize) -> Self {
        let mut p = Vector::zeros(d);
        p[x] = 1.0;
        Distribution { p }
    }

    pub fn p(&self) -> &Vector {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn has_full_support(&self, support_tol: f64) -> bool {
        self.p.iter().all(|v| *v > support_tol)
    }
}

/// Transition matrix W on X together with emission matrix V (rows y, columns x').
#[derive(Debug, Clone, PartialEq)]
pub struct IndepModel {
    w: Matrix,
    v: Matrix,
}

pub fn validate_indep_parts(w: &Matrix, v: &Matrix, stochastic_tol: f64) -> ValidationReport {
    let mut violations = Vec::new();
    let d = w.nrows();
    if d == 0 || w.ncols() != d {
        violations.push(Violation::Shape { message: format!("W has shape {}x{}", w.nrows(), w.ncols()) });
    }
    if v.nrows() == 0 || v.ncols() != d {
        violations.push(Violation::Shape { message: format!("V has shape {}x{}, expected dYx{d}", v.nrows(), v.ncols()) });
    }
    if !violations.is_empty() {
        return ValidationReport { violations };
    }
    for xp in 0..d {
        for x in 0..d {
            let val = w[(x, xp)];
            if !(val >= 0.0) || !val.is_finite() {
                violations.push(Violation::TransitionNegative { x, xp, value: val });
            }
        }
        let s = w.column(xp).sum();
        if !((s - 1.0).abs() <= stochastic_tol) {
            violations.push(Violation::TransitionColumnSum { xp, sum: s });
        }
        for y in 0..v.nrows() {
            let val = v[(y, xp)];
            if !(val >= 0.0) || !val.is_finite() {
                violations.push(Violation::EmissionNegative { y, xp, value: val });
            }
        }
        let s = v.column(xp).sum();
        if !((s - 1.0).abs() <= stochastic_tol) {
            violations.push(Violation::EmissionColumnSum { xp, sum: s });
        }
    }
    ValidationReport { violations }
}

impl IndepModel {
    pub fn new(w: Matrix, v: Matrix) -> Result<Self> {
        Self::new_with_tol(w, v, Settings::default().stochastic_tol)
    }

    pub fn new_with_tol(w: Matrix, v: Matrix, stochastic_tol: f64) -> Result<Self> {
        let report = validate_indep_parts(&w, &v, stochastic_tol);
        if !report.is_valid() {
            return Err(Error::Validation(report));
        }
        Ok(IndepModel { w, v })
    }

    pub fn d(&self) -> usize {
        self.w.nrows()
    }

    pub fn dy(&self) -> usize {
        self.v.nrows()
    }

    pub fn w(&self) -> &Matrix {
        &self.w
    }

    pub fn v(&self) -> &Matrix {
        &self.v
    }

    /// The vector V_y = (V(y|x'))_{x'}.
    pub fn emission(&self, y: usize) -> Vector {
        self.v.row(y).transpose()
    }

    pub fn has_full_support(&self, support_tol: f64) -> bool {
        self.w.iter().chain(self.v.iter()).all(|v| *v > support_tol)
    }
}

/// W_y = W D(V_y).
pub fn from_independent(m: &IndepModel) -> Result<YTransitionModel> {
    let d = m.d();
    let w = (0..m.dy())
        .map(|y| {
            let mut wy = m.w.clone();
            for xp in 0..d {
                let s = m.v[(y, xp)];
                wy.column_mut(xp).scale_mut(s);
            }
            wy
        })
        .collect();
    YTransitionModel::new(w)
}

/// W_y keeps the rows of W whose state is mapped to y by `f`.
pub fn from_function(w: &Matrix, f: &[usize], dy: usize) -> Result<YTransitionModel> {
    let d = w.nrows();
    if f.len() != d {
        return Err(Error::InvalidArgument(format!("f has {} entries for {d} states", f.len())));
    }
    if let Some((x, y)) = f.iter().enumerate().find(|(_, y)| **y >= dy) {
        return Err(Error::InvalidArgument(format!("f({x}) = {y} is outside 0..{dy}")));
    }
    let ws = (0..dy)
        .map(|y| {
            let mut wy = Matrix::zeros(d, d);
            for x in (0..d).filter(|&x| f[x] == y) {
                wy.set_row(x, &w.row(x));
            }
            wy
        })
        .collect();
    YTransitionModel::new(ws)
}

/// Index of the joint state (x, y) in the lifted chain.
pub fn joint_index(d: usize, x: usize, y: usize) -> usize {
    y * d + x
}

/// Transition matrix of the joint chain on X x Y: entry ((x,y),(x',y')) = W_y(x|x').
pub fn lift_joint(model: &YTransitionModel) -> Matrix {
    let d = model.d();
    let n = d * model.dy();
    let mut out = Matrix::zeros(n, n);
    for (y, wy) in model.matrices().iter().enumerate() {
        for yp in 0..model.dy() {
            out.view_mut((y * d, yp * d), (d, d)).copy_from(wy);
        }
    }
    out
}

/// Stationary distribution of |W|; errors with the component decomposition when reducible.
pub fn stationary(model: &YTransitionModel, settings: &Settings) -> Result<Distribution> {
    let total = model.total();
    let comps = numerics::strongly_connected_components(&total, settings.support_tol);
    if comps.len() != 1 {
        return Err(Error::Reducible { components: comps });
    }
    let pd = numerics::perron(&total, settings)?;
    let mut p = pd.right;
    for v in p.iter_mut() {
        *v = v.max(0.0);
    }
    let s = p.sum();
    p /= s;
    let residual = (&total * &p - &p).amax();
    if residual > settings.residual_tol {
        return Err(Error::NonConvergence { residual });
    }
    Ok(Distribution { p })
}

/// P(x, y) = sum_{x'} W_y(x|x') P_stat(x'), indexed by `joint_index`.
pub fn lifted_stationary(model: &YTransitionModel, settings: &Settings) -> Result<Distribution> {
    let p = stationary(model, settings)?;
    let d = model.d();
    let mut out = Vector::zeros(d * model.dy());
    for (y, wy) in model.matrices().iter().enumerate() {
        out.rows_mut(y * d, d).copy_from(&(wy * p.p()));
    }
    Ok(Distribution { p: out })
}

/// A sampled trajectory: initial state and the (x_i, y_i) pairs for i = 1..n.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub x0: usize,
    pub steps: Vec<(usize, usize)>,
}

impl Trajectory {
    pub fn outputs(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.1).collect()
    }
}

/// Draw x_0 from `p0`, then each (x_i, y_i) jointly with probability W_{y_i}(x_i|x_{i-1}).
pub fn sample<R: Rng + ?Sized>(model: &YTransitionModel, p0: &Distribution, n: usize, rng: &mut R) -> Result<Trajectory> {
    let d = model.d();
    if p0.len() != d {
        return Err(Error::DimensionMismatch(format!("initial law has {} entries for {d} states", p0.len())));
    }
    let init = WeightedIndex::new(p0.p().iter().copied())
        .map_err(|e| Error::InvalidDistribution(e.to_string()))?;
    let columns = column_samplers(model)?;
    let x0 = init.sample(rng);
    let mut steps = Vec::with_capacity(n);
    let mut x = x0;
    for _ in 0..n {
        let k = columns[x].sample(rng);
        let (y, next) = (k / d, k % d);
        steps.push((next, y));
        x = next;
    }
    Ok(Trajectory { x0, steps })
}

// One sampler per source column over the joint index y * d + x.
fn column_samplers(model: &YTransitionModel) -> Result<Vec<WeightedIndex<f64>>> {
    let d = model.d();
    (0..d)
        .map(|xp| {
            let weights: Vec<f64> = model
                .matrices()
                .iter()
                .flat_map(|wy| (0..d).map(move |x| wy[(x, xp)]))
                .collect();
            WeightedIndex::new(weights).map_err(|e| Error::InvalidArgument(e.to_string()))
        })
        .collect()
}
