//! Exponential families of Y-valued transition matrices.
//!
//! A generator set (g_j) anchored at a base model W defines the tilted matrix
//! `Wbar_theta(x|x') = sum_y exp(sum_j theta_j g_j(y,x,x')) W_y(x|x')`, whose
//! Perron data normalize the tilt back into a Y-valued transition matrix.

use crate::error::{Error, Result};
use crate::model::{stationary, Distribution, YTransitionModel};
use crate::numerics::{self, perron, Matrix, MatrixFamily, Vector};
use crate::observables::check_cap;
use crate::settings::Settings;
use crate::tangent;

/// Functions g_j(y, x, x') supported on the support of a base model.
#[derive(Debug, Clone)]
pub struct GeneratorSet {
    base: YTransitionModel,
    gens: Vec<MatrixFamily>,
}

impl GeneratorSet {
    /// Checks the support condition and linear independence modulo N.
    pub fn new(base: YTransitionModel, gens: Vec<MatrixFamily>, settings: &Settings) -> Result<Self> {
        let set = Self::new_lenient(base, gens, settings)?;
        let rank = tangent::generator_rank_mod_n(&set.base, &set.gens, settings)?;
        if rank < set.gens.len() {
            return Err(Error::Precondition(format!(
                "generators are linearly dependent modulo f(x) - f(x') + c: rank {rank} for {} functions",
                set.gens.len()
            )));
        }
        Ok(set)
    }

    /// Checks the support condition only.
    pub fn new_lenient(base: YTransitionModel, gens: Vec<MatrixFamily>, settings: &Settings) -> Result<Self> {
        for (j, g) in gens.iter().enumerate() {
            check_support(&base, g, settings).map_err(|e| match e {
                Error::InvalidArgument(msg) => Error::InvalidArgument(format!("generator {j}: {msg}")),
                other => other,
            })?;
        }
        Ok(GeneratorSet { base, gens })
    }

    pub fn base(&self) -> &YTransitionModel {
        &self.base
    }

    pub fn gens(&self) -> &[MatrixFamily] {
        &self.gens
    }

    pub fn len(&self) -> usize {
        self.gens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gens.is_empty()
    }

    /// sum_j a_j g_j.
    pub fn combine(&self, a: &[f64]) -> Result<MatrixFamily> {
        if a.len() != self.gens.len() {
            return Err(Error::DimensionMismatch(format!("{} coefficients for {} generators", a.len(), self.gens.len())));
        }
        Ok(MatrixFamily::combination(self.base.d(), self.base.dy(), &self.gens, a))
    }
}

/// A function on Y x X x X must have the model's shape and vanish off its support.
pub fn check_support(model: &YTransitionModel, g: &MatrixFamily, settings: &Settings) -> Result<()> {
    if g.d() != model.d() || g.dy() != model.dy() {
        return Err(Error::DimensionMismatch(format!(
            "function has d={}, dY={} but the model has d={}, dY={}",
            g.d(),
            g.dy(),
            model.d(),
            model.dy()
        )));
    }
    for y in 0..model.dy() {
        for x in 0..model.d() {
            for xp in 0..model.d() {
                let v = g.get(y)[(x, xp)];
                if !v.is_finite() {
                    return Err(Error::InvalidArgument(format!("value at (y={y}, x={x}, xp={xp}) is not finite")));
                }
                if model.w(y)[(x, xp)] <= settings.support_tol && v != 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "nonzero value at (y={y}, x={x}, xp={xp}) outside the model support"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Zero a function outside the model support.
pub fn restrict_to_support(model: &YTransitionModel, g: &MatrixFamily, support_tol: f64) -> MatrixFamily {
    let mut out = g.clone();
    for y in 0..model.dy() {
        let m = out.get_mut(y);
        for x in 0..model.d() {
            for xp in 0..model.d() {
                if model.w(y)[(x, xp)] <= support_tol {
                    m[(x, xp)] = 0.0;
                }
            }
        }
    }
    out
}

/// The exponent sum_j theta_j g_j, checked against the overflow guard.
fn exponent(gs: &GeneratorSet, theta: &[f64], settings: &Settings) -> Result<MatrixFamily> {
    if let Some(t) = theta.iter().find(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument(format!("theta component {t} is not finite")));
    }
    let e = gs.combine(theta)?;
    let m = e.amax();
    if m > settings.overflow_limit || !m.is_finite() {
        return Err(Error::Overflow { value: m, limit: settings.overflow_limit });
    }
    Ok(e)
}

/// Wbar_theta = sum_y exp(theta . g) W_y.
pub fn tilt(gs: &GeneratorSet, theta: &[f64], settings: &Settings) -> Result<Matrix> {
    let e = exponent(gs, theta, settings)?;
    let base = gs.base();
    let mut out = Matrix::zeros(base.d(), base.d());
    for (y, w) in base.matrices().iter().enumerate() {
        out += w.component_mul(&e.get(y).map(f64::exp));
    }
    Ok(out)
}

/// Tilted version of the joint chain on X x Y; shares its Perron eigenvalue with `tilt`.
pub fn lifted_tilt(gs: &GeneratorSet, theta: &[f64], settings: &Settings) -> Result<Matrix> {
    let e = exponent(gs, theta, settings)?;
    let base = gs.base();
    let d = base.d();
    let dy = base.dy();
    let mut out = Matrix::zeros(d * dy, d * dy);
    for (y, w) in base.matrices().iter().enumerate() {
        let block = w.component_mul(&e.get(y).map(f64::exp));
        for yp in 0..dy {
            out.view_mut((y * d, yp * d), (d, d)).copy_from(&block);
        }
    }
    Ok(out)
}

/// A point of the family: parameters, Perron data and the normalized model.
#[derive(Debug, Clone)]
pub struct ExpFamilyPoint {
    pub theta: Vec<f64>,
    pub lambda: f64,
    /// Left Perron vector of the tilt, scaled so that `<pbar, right> = 1`.
    pub pbar: Vector,
    /// Right Perron vector of the tilt, summing to one.
    pub right: Vector,
    pub model: YTransitionModel,
    pub phi: f64,
}

/// W_{theta,y}(x|x') = lambda^{-1} pbar(x) exp(theta . g(y,x,x')) W_y(x|x') / pbar(x').
pub fn at(gs: &GeneratorSet, theta: &[f64], settings: &Settings) -> Result<ExpFamilyPoint> {
    let base = gs.base();
    let e = exponent(gs, theta, settings)?;
    if theta.iter().all(|t| *t == 0.0) {
        // The tilt is |W| itself, whose Perron eigenvalue is exactly one.
        let right = stationary(base, settings)?.p().clone();
        return Ok(ExpFamilyPoint {
            theta: theta.to_vec(),
            lambda: 1.0,
            pbar: Vector::from_element(base.d(), 1.0),
            right,
            model: base.clone(),
            phi: 0.0,
        });
    }
    let wbar = tilt(gs, theta, settings)?;
    let pd = perron(&wbar, settings)?;
    let d = base.d();
    let w = base
        .matrices()
        .iter()
        .enumerate()
        .map(|(y, wy)| {
            Matrix::from_fn(d, d, |x, xp| {
                pd.left[x] * e.get(y)[(x, xp)].exp() * wy[(x, xp)] / (pd.lambda * pd.left[xp])
            })
        })
        .collect();
    let model = YTransitionModel::new_with_tol(w, settings.stochastic_tol.max(1e-11))?;
    Ok(ExpFamilyPoint {
        theta: theta.to_vec(),
        lambda: pd.lambda,
        pbar: pd.left,
        right: pd.right,
        model,
        phi: pd.lambda.ln(),
    })
}

/// phi(theta) = log lambda_theta.
pub fn potential(gs: &GeneratorSet, theta: &[f64], settings: &Settings) -> Result<f64> {
    Ok(at(gs, theta, settings)?.phi)
}

/// d phi / d theta_j = <left, (d_j Wbar) right> / (lambda <left, right>).
pub fn potential_gradient(gs: &GeneratorSet, theta: &[f64], settings: &Settings) -> Result<Vector> {
    let e = exponent(gs, theta, settings)?;
    let base = gs.base();
    let wbar = tilt(gs, theta, settings)?;
    let pd = perron(&wbar, settings)?;
    let denom = pd.lambda * pd.left.dot(&pd.right);
    let tilted: Vec<Matrix> = base
        .matrices()
        .iter()
        .enumerate()
        .map(|(y, w)| w.component_mul(&e.get(y).map(f64::exp)))
        .collect();
    let grad = gs
        .gens()
        .iter()
        .map(|g| {
            let mut dw = Matrix::zeros(base.d(), base.d());
            for (y, t) in tilted.iter().enumerate() {
                dw += t.component_mul(g.get(y));
            }
            pd.left.dot(&(dw * &pd.right)) / denom
        })
        .collect::<Vec<_>>();
    Ok(Vector::from_vec(grad))
}

/// D(theta || theta') = sum_j (theta_j - theta'_j) d_j phi(theta) - phi(theta) + phi(theta').
pub fn divergence(gs: &GeneratorSet, theta: &[f64], theta2: &[f64], settings: &Settings) -> Result<f64> {
    if theta.len() != theta2.len() {
        return Err(Error::DimensionMismatch(format!("theta lengths {} and {}", theta.len(), theta2.len())));
    }
    let grad = potential_gradient(gs, theta, settings)?;
    let lin: f64 = theta.iter().zip(theta2).zip(grad.iter()).map(|((a, b), g)| (a - b) * g).sum();
    Ok(lin - potential(gs, theta, settings)? + potential(gs, theta2, settings)?)
}

/// (W_* g)_y(x|x') = g(y,x,x') W_y(x|x').
pub fn m_rep(base: &YTransitionModel, g: &MatrixFamily) -> MatrixFamily {
    let mats = base.matrices().iter().zip(g.matrices()).map(|(w, gy)| w.component_mul(gy)).collect();
    MatrixFamily::new(mats).expect("shapes match the model")
}

/// The representative g + f(x) - f(x') + c of the class of g whose m-representation
/// satisfies sum_y (W_* g)_y^T 1 = 0.
pub fn g1_project(base: &YTransitionModel, g: &MatrixFamily, settings: &Settings) -> Result<MatrixFamily> {
    check_support(base, g, settings)?;
    let (f, c) = g1_correction(base, g, settings)?;
    let d = base.d();
    let mut out = g.clone();
    for y in 0..base.dy() {
        let m = out.get_mut(y);
        for x in 0..d {
            for xp in 0..d {
                if base.w(y)[(x, xp)] > settings.support_tol {
                    m[(x, xp)] += f[x] - f[xp] + c;
                }
            }
        }
    }
    Ok(out)
}

/// The pair (f, c) used by `g1_project`, with the gauge <1, f> = 0.
pub fn g1_correction(base: &YTransitionModel, g: &MatrixFamily, settings: &Settings) -> Result<(Vector, f64)> {
    let d = base.d();
    let mrep = m_rep(base, g);
    let mut v = Vector::zeros(d);
    for m in mrep.matrices() {
        v += m.row_sum().transpose();
    }
    let p = stationary(base, settings)?;
    let c = -p.p().dot(&v);
    let lhs = numerics::identity_minus(&base.total().transpose());
    let rhs = &v + Vector::from_element(d, c);
    let f = numerics::solve_on_complement(&lhs, &rhs, &Vector::from_element(d, 1.0), settings.rank_tol, settings.residual_tol)?;
    Ok((f, c))
}

/// Largest |sum_y (B_y^T 1)(x')| over x': zero exactly on the constraint space L_1.
pub fn column_constraint_residual(b: &MatrixFamily) -> f64 {
    let d = b.d();
    let mut v = Vector::zeros(d);
    for m in b.matrices() {
        v += m.row_sum().transpose();
    }
    v.amax()
}

/// How the initial law depends on theta.
#[derive(Debug, Clone)]
pub enum LawMode {
    /// The same initial law for every theta.
    Fixed(Distribution),
    /// The stationary law of each W_theta.
    Stationary,
}

/// Derivative at theta = 0 of the k-window output law along sum_j a_j g_j.
pub fn law_derivative(gs: &GeneratorSet, a: &[f64], mode: &LawMode, k: usize, settings: &Settings) -> Result<Vector> {
    let g = gs.combine(a)?;
    let proj = g1_project(gs.base(), &g, settings)?;
    law_derivative_mrep(gs.base(), &m_rep(gs.base(), &proj), mode, k, settings)
}

/// Derivative of the k-window law along a tangent direction given by its
/// m-representation B (which must satisfy sum_y B_y^T 1 = 0).
pub fn law_derivative_mrep(
    model: &YTransitionModel,
    b: &MatrixFamily,
    mode: &LawMode,
    k: usize,
    settings: &Settings,
) -> Result<Vector> {
    let dy = model.dy();
    let d = model.d();
    let n = check_cap(dy, k, settings.enumeration_cap)?;
    let (p, dp) = match mode {
        LawMode::Fixed(p) => {
            if p.len() != d {
                return Err(Error::DimensionMismatch(format!("initial law of length {} for {d} states", p.len())));
            }
            (p.p().clone(), Vector::zeros(d))
        }
        LawMode::Stationary => {
            let p = stationary(model, settings)?.p().clone();
            let mut sum_b = Matrix::zeros(d, d);
            for m in b.matrices() {
                sum_b += m;
            }
            let rhs = sum_b * &p;
            let q = numerics::solve_on_complement(
                &numerics::identity_minus(&model.total()),
                &rhs,
                &Vector::from_element(d, 1.0),
                settings.rank_tol,
                settings.residual_tol,
            )?;
            (p, q)
        }
    };
    let mut out = Vector::zeros(n);
    let mut stack: Vec<(usize, usize, Vector, Vector)> = vec![(0, 0, p, dp)];
    while let Some((depth, index, v, dv)) = stack.pop() {
        if depth == k {
            out[index] = dv.sum();
            continue;
        }
        let weight = dy.pow(depth as u32);
        for y in 0..dy {
            let nv = model.w(y) * &v;
            let ndv = model.w(y) * &dv + b.get(y) * &v;
            stack.push((depth + 1, index + y * weight, nv, ndv));
        }
    }
    Ok(out)
}
