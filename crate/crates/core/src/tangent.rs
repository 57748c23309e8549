//! Indistinguishable tangent subspaces, local-equivalence tests, local
//! dimension and canonical generator construction.
//!
//! Tangent directions are m-representations (B_y)_{y in Y} flattened to
//! R^{dY d^2} in (y, x, x') row-major order. Matrices A in the domain of the
//! commutator maps are flattened row-major to R^{d^2}.

use itertools::Itertools;
use nalgebra::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expfam::{g1_project, law_derivative_mrep, m_rep, GeneratorSet, LawMode};
use crate::model::{stationary, Distribution, YTransitionModel};
use crate::numerics::{self, Matrix, MatrixFamily, Subspace, Vector};
use crate::observables::reachability_profile;
use crate::settings::Settings;

type CMatrix = nalgebra::DMatrix<Complex<f64>>;

fn ambient(model: &YTransitionModel) -> usize {
    model.dy() * model.d() * model.d()
}

fn support_indices(model: &YTransitionModel, tol: f64) -> Vec<usize> {
    model
        .support_mask(tol)
        .into_iter()
        .enumerate()
        .filter_map(|(i, b)| b.then_some(i))
        .collect()
}

/// Coordinate subspace of directions supported where the model is nonzero.
pub fn support_space(model: &YTransitionModel, settings: &Settings) -> Subspace {
    let n = ambient(model);
    let idx = support_indices(model, settings.support_tol);
    let mut basis = Matrix::zeros(n, idx.len());
    for (j, &i) in idx.iter().enumerate() {
        basis[(i, j)] = 1.0;
    }
    Subspace::span(&basis, settings.rank_tol).with_tol(settings.rank_tol)
}

// Null space of `constraints` among vectors supported on `idx`.
fn kernel_on_support(constraints: &Matrix, idx: &[usize], n: usize, settings: &Settings) -> Subspace {
    let mut restricted = Matrix::zeros(constraints.nrows(), idx.len());
    for (j, &i) in idx.iter().enumerate() {
        restricted.set_column(j, &constraints.column(i));
    }
    let k = Subspace::kernel_scaled(&restricted, settings.rank_tol, 1.0);
    let mut basis = Matrix::zeros(n, k.dim());
    for (j, &i) in idx.iter().enumerate() {
        basis.set_row(i, &k.basis().row(j));
    }
    Subspace::span(&basis, settings.rank_tol).with_tol(settings.rank_tol)
}

/// Rows x' of the map B -> sum_y B_y^T 1.
fn column_sum_constraints(model: &YTransitionModel) -> Matrix {
    let d = model.d();
    let mut c = Matrix::zeros(d, ambient(model));
    for y in 0..model.dy() {
        for x in 0..d {
            for xp in 0..d {
                c[(xp, MatrixFamily::flat_index(d, y, x, xp))] = 1.0;
            }
        }
    }
    c
}

/// L_1: directions on the support with sum_y B_y^T 1 = 0.
pub fn l1_space(model: &YTransitionModel, settings: &Settings) -> Subspace {
    let idx = support_indices(model, settings.support_tol);
    kernel_on_support(&column_sum_constraints(model), &idx, ambient(model), settings)
}

/// Matrix of A -> W A - A W on row-major flattened d x d matrices.
pub fn commutator_matrix(w: &Matrix) -> Matrix {
    let d = w.nrows();
    let mut m = Matrix::zeros(d * d, d * d);
    for x in 0..d {
        for xp in 0..d {
            for j in 0..d {
                m[(x * d + xp, j * d + xp)] += w[(x, j)];
                m[(x * d + xp, x * d + j)] -= w[(j, xp)];
            }
        }
    }
    m
}

/// Matrix of A -> (alpha_y(A))_y = ([W_y, A])_y, into R^{dY d^2}.
pub fn alpha_matrix(model: &YTransitionModel) -> Matrix {
    let blocks: Vec<Matrix> = model.matrices().iter().map(commutator_matrix).collect();
    numerics::vstack(&blocks)
}

/// Rows of A -> A^T 1 (column sums of A).
fn matrix_column_sums(d: usize) -> Matrix {
    let mut c = Matrix::zeros(d, d * d);
    for i in 0..d {
        for xp in 0..d {
            c[(xp, i * d + xp)] = 1.0;
        }
    }
    c
}

/// Rows of A -> A v.
fn matrix_times_vector(v: &Vector) -> Matrix {
    let d = v.len();
    let mut c = Matrix::zeros(d, d * d);
    for x in 0..d {
        for j in 0..d {
            c[(x, x * d + j)] = v[j];
        }
    }
    c
}

/// {A : A^T 1 = 0} as a d^2 x (d^2 - d) basis.
pub fn zero_column_sum_domain(d: usize, settings: &Settings) -> Subspace {
    Subspace::kernel_scaled(&matrix_column_sums(d), settings.rank_tol, 1.0)
}

fn image_on_support(model: &YTransitionModel, domain: &Subspace, settings: &Settings) -> Result<Subspace> {
    let n = ambient(model);
    if domain.dim() == 0 {
        return Ok(Subspace::zero(n).with_tol(settings.rank_tol));
    }
    let img = alpha_matrix(model) * domain.basis();
    let image = Subspace::span_scaled(&img, settings.rank_tol, 1.0).with_tol(settings.rank_tol);
    if model.has_full_support(settings.support_tol) {
        Ok(image)
    } else {
        numerics::intersect(&image, &support_space(model, settings))
    }
}

/// L_2: image of A -> ([W_y, A])_y over A^T 1 = 0, restricted to the support.
pub fn l2_space(model: &YTransitionModel, settings: &Settings) -> Result<Subspace> {
    image_on_support(model, &zero_column_sum_domain(model.d(), settings), settings)
}

/// The same image over the larger domain A^T 1 = c 1.
pub fn l2_space_relaxed(model: &YTransitionModel, settings: &Settings) -> Result<Subspace> {
    let d = model.d();
    // Variables (A, c): A^T 1 - c 1 = 0.
    let mut cons = Matrix::zeros(d, d * d + 1);
    cons.view_mut((0, 0), (d, d * d)).copy_from(&matrix_column_sums(d));
    for xp in 0..d {
        cons[(xp, d * d)] = -1.0;
    }
    let k = Subspace::kernel_scaled(&cons, settings.rank_tol, 1.0);
    let a_part = k.basis().rows(0, d * d).into_owned();
    let domain = Subspace::span_scaled(&a_part, settings.rank_tol, 1.0);
    image_on_support(model, &domain, settings)
}

/// L_P: directions in L_1 with B_y(Ker + reachable) inside Ker for every y.
pub fn lp_space(model: &YTransitionModel, p: &Distribution, settings: &Settings) -> Result<Subspace> {
    let reach = reachability_profile(model, p, settings)?;
    let d = model.d();
    let n = ambient(model);
    let kernel = &reach.quotient.kernel;
    let lifted = reach.lifted_space();
    let comp = Matrix::identity(d, d) - kernel.projector();
    let mut blocks = vec![column_sum_constraints(model)];
    for y in 0..model.dy() {
        for s in 0..lifted.dim() {
            let v = lifted.basis().column(s);
            // Map B -> B_y v as a d x n matrix.
            let mut m = Matrix::zeros(d, n);
            for x in 0..d {
                for xp in 0..d {
                    m[(x, MatrixFamily::flat_index(d, y, x, xp))] = v[xp];
                }
            }
            blocks.push(&comp * m);
        }
    }
    let idx = support_indices(model, settings.support_tol);
    Ok(kernel_on_support(&numerics::vstack(&blocks), &idx, n, settings))
}

/// L_{2,P}: image of the commutator map over A^T 1 = 0, A P = 0.
pub fn l2p_space(model: &YTransitionModel, p: &Distribution, settings: &Settings) -> Result<Subspace> {
    let d = model.d();
    let cons = numerics::vstack(&[matrix_column_sums(d), matrix_times_vector(p.p())]);
    let domain = Subspace::kernel_scaled(&cons, settings.rank_tol, 1.0);
    image_on_support(model, &domain, settings)
}

/// N: functions f(x) - f(x') + c restricted to the support, as flattened vectors.
pub fn n_space(model: &YTransitionModel, settings: &Settings) -> Subspace {
    let d = model.d();
    let mask = model.support_mask(settings.support_tol);
    let n = ambient(model);
    let mut cols = Vec::with_capacity(d + 1);
    for z in 0..=d {
        let mut v = Vector::zeros(n);
        for y in 0..model.dy() {
            for x in 0..d {
                for xp in 0..d {
                    let i = MatrixFamily::flat_index(d, y, x, xp);
                    if mask[i] {
                        v[i] = if z == d {
                            1.0
                        } else {
                            (x == z) as i32 as f64 - (xp == z) as i32 as f64
                        };
                    }
                }
            }
        }
        cols.push(v);
    }
    Subspace::span_scaled(&numerics::columns_to_matrix(n, &cols), settings.rank_tol, 1.0).with_tol(settings.rank_tol)
}

/// Rank of a list of functions modulo N.
pub fn generator_rank_mod_n(model: &YTransitionModel, gens: &[MatrixFamily], settings: &Settings) -> Result<usize> {
    let nsp = n_space(model, settings);
    Ok(rank_modulo(&nsp, gens.iter().map(|g| g.flatten()), settings))
}

// Rank of the vectors after quotienting by `space`.
fn rank_modulo(space: &Subspace, vectors: impl Iterator<Item = Vector>, settings: &Settings) -> usize {
    let n = space.ambient_dim();
    let residuals: Vec<Vector> = vectors
        .map(|v| {
            let r = &v - space.project(&v);
            let nv = v.norm();
            if nv > 0.0 {
                r / nv
            } else {
                r
            }
        })
        .collect();
    if residuals.is_empty() {
        return 0;
    }
    Subspace::span_scaled(&numerics::columns_to_matrix(n, &residuals), settings.rank_tol, 1e-3).dim()
}

/// Dimension table of the indistinguishable subspaces at a model.
#[derive(Debug, Clone, Serialize)]
pub struct TangentReport {
    pub d: usize,
    pub dy: usize,
    pub dim_l1: usize,
    pub dim_l2: usize,
    pub dim_lp: usize,
    pub dim_l2p: usize,
    /// dim L_P computed at the stationary law (used by the asymptotic count).
    pub dim_lp_stationary: usize,
    pub dim_l2_plus_lp: usize,
    pub dim_lp_plus_l2p: usize,
    pub local_dim_fixed: usize,
    pub local_dim_asymptotic: usize,
    /// d^2 (dY - 1), the local dimension at generic points.
    pub generic_dim: usize,
    /// dY - 1, the number of directly observable generators.
    pub observable_count: usize,
    /// Whether the asymptotic local dimension falls below the generic value;
    /// `None` when the model lacks full support and the generic value does not apply.
    pub singular: Option<bool>,
    pub containments_hold: bool,
}

/// The spaces behind a `TangentReport`.
#[derive(Debug, Clone)]
pub struct TangentSpaces {
    pub l1: Subspace,
    pub l2: Subspace,
    pub lp: Subspace,
    pub l2p: Subspace,
    pub lp_stationary: Subspace,
    /// L_P + L_{2,P}: the fixed-law indistinguishable space.
    pub fixed: Subspace,
    /// L_2 + L_P at the stationary law: the asymptotic indistinguishable space.
    pub asymptotic: Subspace,
}

pub fn tangent_spaces(model: &YTransitionModel, p: Option<&Distribution>, settings: &Settings) -> Result<TangentSpaces> {
    let stat = stationary(model, settings)?;
    let p = p.unwrap_or(&stat);
    let l1 = l1_space(model, settings);
    let l2 = l2_space(model, settings)?;
    let lp = lp_space(model, p, settings)?;
    let l2p = l2p_space(model, p, settings)?;
    let lp_stationary = lp_space(model, &stat, settings)?;
    let fixed = numerics::sum(&[&lp, &l2p])?;
    let asymptotic = numerics::sum(&[&l2, &lp_stationary])?;
    Ok(TangentSpaces { l1, l2, lp, l2p, lp_stationary, fixed, asymptotic })
}

/// Dimensions of the indistinguishable subspaces; `p = None` uses the stationary law.
pub fn tangent_report(model: &YTransitionModel, p: Option<&Distribution>, settings: &Settings) -> Result<TangentReport> {
    let s = tangent_spaces(model, p, settings)?;
    let d = model.d();
    let dy = model.dy();
    let mut containments_hold = true;
    for sub in [&s.l2, &s.lp, &s.l2p, &s.fixed, &s.asymptotic] {
        containments_hold &= s.l1.contains_subspace(sub)?;
    }
    let generic_dim = d * d * (dy - 1);
    let local_dim_asymptotic = s.l1.dim() - s.asymptotic.dim();
    Ok(TangentReport {
        d,
        dy,
        dim_l1: s.l1.dim(),
        dim_l2: s.l2.dim(),
        dim_lp: s.lp.dim(),
        dim_l2p: s.l2p.dim(),
        dim_lp_stationary: s.lp_stationary.dim(),
        dim_l2_plus_lp: s.asymptotic.dim(),
        dim_lp_plus_l2p: s.fixed.dim(),
        local_dim_fixed: s.l1.dim() - s.fixed.dim(),
        local_dim_asymptotic,
        generic_dim,
        observable_count: dy - 1,
        singular: model
            .has_full_support(settings.support_tol)
            .then_some(local_dim_asymptotic < generic_dim),
        containments_hold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalVerdict {
    /// The direction is indistinguishable to first order.
    Equivalent,
    NotEquivalent,
    /// A residual fell inside the band between the vanishing and nonvanishing thresholds.
    Indeterminate,
}

/// Outcome of a local-equivalence test with both of its witnesses.
#[derive(Debug, Clone, Serialize)]
pub struct LocalEquivalence {
    pub verdict: LocalVerdict,
    /// Distance of the m-representation to the indistinguishable space, relative to its norm.
    pub membership_residual: f64,
    /// Max-norm of the law derivative at the window, relative to the m-representation.
    pub derivative_norm: f64,
    pub window: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Decision {
    Zero,
    Nonzero,
    Unclear,
}

fn decide(value: f64, settings: &Settings) -> Decision {
    if value <= settings.vanish_tol {
        Decision::Zero
    } else if value > settings.nonvanish_tol {
        Decision::Nonzero
    } else {
        Decision::Unclear
    }
}

/// Local equivalence of the direction with m-representation `b` (which must lie in L_1).
pub fn local_equiv_mrep(model: &YTransitionModel, b: &MatrixFamily, mode: &LawMode, settings: &Settings) -> Result<LocalEquivalence> {
    let (space, p) = match mode {
        LawMode::Fixed(p) => (tangent_spaces(model, Some(p), settings)?.fixed, p.clone()),
        LawMode::Stationary => (tangent_spaces(model, None, settings)?.asymptotic, stationary(model, settings)?),
    };
    let reach = reachability_profile(model, &p, settings)?;
    let window = reach.observability.k_w + reach.k_pw + 1;
    let scale = b.amax();
    if scale == 0.0 {
        return Ok(LocalEquivalence { verdict: LocalVerdict::Equivalent, membership_residual: 0.0, derivative_norm: 0.0, window });
    }
    let flat = b.flatten();
    let membership_residual = space.residual(&flat) / flat.norm();
    let deriv = law_derivative_mrep(model, b, mode, window, settings)?;
    let derivative_norm = deriv.amax() / scale;
    let verdict = match (decide(membership_residual, settings), decide(derivative_norm, settings)) {
        (Decision::Zero, Decision::Zero) => LocalVerdict::Equivalent,
        (Decision::Nonzero, Decision::Nonzero) => LocalVerdict::NotEquivalent,
        (Decision::Zero, Decision::Nonzero) | (Decision::Nonzero, Decision::Zero) => {
            return Err(Error::CrossCheck(format!(
                "subspace membership (relative residual {membership_residual:.3e}) and law derivative \
                 (relative norm {derivative_norm:.3e}) disagree at window {window}"
            )))
        }
        _ => LocalVerdict::Indeterminate,
    };
    Ok(LocalEquivalence { verdict, membership_residual, derivative_norm, window })
}

/// Local equivalence along sum_j a_j g_j with the initial law held fixed.
pub fn local_equiv_fixed(p: &Distribution, gens: &GeneratorSet, a: &[f64], settings: &Settings) -> Result<LocalEquivalence> {
    let b = direction_mrep(gens, a, settings)?;
    local_equiv_mrep(gens.base(), &b, &LawMode::Fixed(p.clone()), settings)
}

/// Local equivalence along sum_j a_j g_j for the stationary processes.
pub fn local_equiv_asymptotic(gens: &GeneratorSet, a: &[f64], settings: &Settings) -> Result<LocalEquivalence> {
    let b = direction_mrep(gens, a, settings)?;
    local_equiv_mrep(gens.base(), &b, &LawMode::Stationary, settings)
}

/// m-representation of the G_1 representative of sum_j a_j g_j.
pub fn direction_mrep(gens: &GeneratorSet, a: &[f64], settings: &Settings) -> Result<MatrixFamily> {
    let g = gens.combine(a)?;
    Ok(m_rep(gens.base(), &g1_project(gens.base(), &g, settings)?))
}

/// Rank of the generators in the quotient by the indistinguishable space
/// (asymptotic when `p` is `None`, fixed-law otherwise). Equals the local
/// dimension when the generators span the quotient.
pub fn generator_quotient_rank(gens: &GeneratorSet, p: Option<&Distribution>, settings: &Settings) -> Result<usize> {
    let spaces = tangent_spaces(gens.base(), p, settings)?;
    let space = if p.is_some() { spaces.fixed } else { spaces.asymptotic };
    let mreps = gens
        .gens()
        .iter()
        .map(|g| g1_project(gens.base(), g, settings).map(|h| m_rep(gens.base(), &h).flatten()))
        .collect::<Result<Vec<_>>>()?;
    Ok(rank_modulo(&space, mreps.into_iter(), settings))
}

/// E3 for the pair (y0, y1), tested by numerical kernels.
pub fn check_e3(model: &YTransitionModel, y0: usize, y1: usize, settings: &Settings) -> Result<bool> {
    Ok(e3_parts(model, y0, y1, settings)?.0 && e3_parts(model, y0, y1, settings)?.1)
}

/// The two injectivity conditions of E3 separately.
pub fn e3_parts(model: &YTransitionModel, y0: usize, y1: usize, settings: &Settings) -> Result<(bool, bool)> {
    check_pair(model, y0, y1)?;
    let d = model.d();
    let a0 = commutator_matrix(model.w(y0));
    let a1 = commutator_matrix(model.w(y1));
    let dom1 = zero_column_sum_domain(d, settings);
    let first = numerics::rank(&(&a0 * dom1.basis()), settings.rank_tol) == dom1.dim();
    let dom2 = Subspace::kernel_scaled(&Matrix::from_element(1, d * d, 1.0), settings.rank_tol, 1.0);
    let stacked = numerics::vstack(&[a0, a1]) * dom2.basis();
    let second = dom2.dim() == 0 || numerics::rank(&stacked, settings.rank_tol) == dom2.dim();
    Ok((first, second))
}

fn check_pair(model: &YTransitionModel, y0: usize, y1: usize) -> Result<()> {
    if y0 == y1 || y0 >= model.dy() || y1 >= model.dy() {
        return Err(Error::InvalidArgument(format!("need two distinct outputs in 0..{}, got {y0} and {y1}", model.dy())));
    }
    Ok(())
}

// Eigenvalues and unit eigenvectors of a real matrix, assuming distinct eigenvalues.
fn eigensystem(m: &Matrix) -> (Vec<Complex<f64>>, CMatrix) {
    let d = m.nrows();
    let vals: Vec<Complex<f64>> = m.clone().complex_eigenvalues().iter().copied().collect();
    let cm: CMatrix = m.map(|v| Complex::new(v, 0.0));
    let mut vecs = CMatrix::zeros(d, d);
    for (j, mu) in vals.iter().enumerate() {
        let shifted = &cm - CMatrix::identity(d, d) * *mu;
        if let Some(v) = numerics::smallest_right_singular_vector_complex(&shifted) {
            vecs.set_column(j, &v);
        }
    }
    (vals, vecs)
}

fn distinct(vals: &[Complex<f64>], rel_gap: f64) -> bool {
    let scale = vals.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    vals.iter().tuple_combinations().all(|(a, b)| (a - b).norm() > rel_gap * scale)
}

fn complex_rank(m: &CMatrix, tol: f64) -> usize {
    if m.ncols() == 0 {
        return 0;
    }
    let s = numerics::singular_values_complex(m);
    let smax = s.first().copied().unwrap_or(0.0);
    s.iter().filter(|v| **v > tol * smax).count()
}

/// Spectral sufficient condition for E3: distinct eigenvalues of W_{y0}^T and
/// W_{y1}^T, all eigen-coefficients of 1 nonzero for W_{y0}^T, and no span of a
/// proper subset of eigenvectors shared between the two systems.
pub fn check_e3_sufficient(model: &YTransitionModel, y0: usize, y1: usize, settings: &Settings) -> Result<bool> {
    check_pair(model, y0, y1)?;
    let d = model.d();
    let (v0, f0) = eigensystem(&model.w(y0).transpose());
    let (v1, f1) = eigensystem(&model.w(y1).transpose());
    if !distinct(&v0, settings.eigen_gap_tol) || !distinct(&v1, settings.eigen_gap_tol) {
        return Ok(false);
    }
    if complex_rank(&f0, settings.rank_tol) < d || complex_rank(&f1, settings.rank_tol) < d {
        return Ok(false);
    }
    let ones = nalgebra::DVector::from_element(d, Complex::new(1.0, 0.0));
    let Some(coef) = f0.clone().lu().solve(&ones) else { return Ok(false) };
    let cmax = coef.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if coef.iter().any(|c| c.norm() <= settings.mean_tol * cmax) {
        return Ok(false);
    }
    for size in 1..d {
        for s0 in (0..d).combinations(size) {
            for s1 in (0..d).combinations(size) {
                let mut m = CMatrix::zeros(d, 2 * size);
                for (j, &i) in s0.iter().enumerate() {
                    m.set_column(j, &f0.column(i));
                }
                for (j, &i) in s1.iter().enumerate() {
                    m.set_column(size + j, &f1.column(i));
                }
                if complex_rank(&m, 1e-8) == size {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// The first pair (y0, y1) in lexicographic order satisfying E3.
pub fn find_e3_pair(model: &YTransitionModel, settings: &Settings) -> Result<Option<(usize, usize)>> {
    for y0 in 0..model.dy() {
        for y1 in 0..model.dy() {
            if y0 != y1 && check_e3(model, y0, y1, settings)? {
                return Ok(Some((y0, y1)));
            }
        }
    }
    Ok(None)
}

fn unit(d: usize, i: usize) -> Vector {
    let mut v = Vector::zeros(d);
    v[i] = 1.0;
    v
}

fn flat_matrix(m: &Matrix) -> Vector {
    let d = m.nrows();
    Vector::from_fn(d * d, |k, _| m[(k / d, k % d)])
}

// Single-entry matrices in column-major order of (x, x').
fn delta_pool(d: usize) -> Vec<Matrix> {
    let mut out = Vec::with_capacity(d * d);
    for xp in 0..d {
        for x in 0..d {
            let mut m = Matrix::zeros(d, d);
            m[(x, xp)] = 1.0;
            out.push(m);
        }
    }
    out
}

// First-fit selection of `count` candidates independent of `base` and of each other.
fn complete(base: &Subspace, pool: &[Matrix], count: usize, accept: impl Fn(&[Matrix]) -> bool, settings: &Settings) -> Vec<Matrix> {
    let n = base.ambient_dim();
    let mut chosen: Vec<Matrix> = Vec::new();
    for cand in pool {
        if chosen.len() == count {
            break;
        }
        let mut cols: Vec<Vector> = (0..base.dim()).map(|j| base.basis().column(j).into_owned()).collect();
        cols.extend(chosen.iter().map(flat_matrix));
        let current = Subspace::span_scaled(&numerics::columns_to_matrix(n, &cols), settings.rank_tol, 1.0);
        let v = flat_matrix(cand);
        if current.residual(&v) > 1e-6 * v.norm() {
            let mut trial = chosen.clone();
            trial.push(cand.clone());
            if trial.len() < count || accept(&trial) {
                chosen = trial;
            }
        }
    }
    chosen
}

/// Generators in the block layout of the non-singular construction: d functions
/// for y0, d^2 - d for y1, then d^2 coordinate functions for every other output.
/// Returns the E3 pair used and the functions (e-representations).
pub fn nfr_generators(model: &YTransitionModel, p: Option<&Distribution>, settings: &Settings) -> Result<((usize, usize), Vec<MatrixFamily>)> {
    let d = model.d();
    let dy = model.dy();
    if dy < 2 {
        return Err(Error::Precondition("the construction needs at least two outputs".into()));
    }
    let stat = stationary(model, settings)?;
    let p = p.unwrap_or(&stat);
    let gen = crate::observables::check_genericity(model, p, settings)?;
    if !gen.e1 {
        return Err(Error::Precondition(
            "E1 fails: the observability kernel is nontrivial or the reachable space is not the whole quotient; \
             use the two-state singular construction or supply generators"
                .into(),
        ));
    }
    if !gen.e2 {
        return Err(Error::Precondition("E2 fails: some W_y has a zero entry".into()));
    }
    let Some((y0, y1)) = find_e3_pair(model, settings)? else {
        return Err(Error::Precondition("E3 fails: no pair (y0, y1) makes alpha_y0 and (alpha_y0, alpha_y1) injective".into()));
    };
    let pstat = stat.p();
    let ones = Vector::from_element(d, 1.0);

    // y0 block: complete the alpha_{y0} image of {A^T 1 = 0}.
    let dom = zero_column_sum_domain(d, settings);
    let img0 = Subspace::span_scaled(&(commutator_matrix(model.w(y0)) * dom.basis()), settings.rank_tol, 1.0);
    let mut pool0: Vec<Matrix> = (0..d.saturating_sub(1)).map(|i| (unit(d, i) - unit(d, i + 1)) * ones.transpose()).collect();
    pool0.push(Matrix::from_element(d, d, 1.0));
    pool0.extend(delta_pool(d));
    let has_mean = |set: &[Matrix]| set.iter().any(|b| (b * pstat).sum().abs() > settings.mean_tol);
    let block0 = complete(&img0, &pool0, d, has_mean, settings);
    if block0.len() != d {
        return Err(Error::InternalConsistency(format!("found {} of {d} functions for output {y0}", block0.len())));
    }

    // y1 block: complete alpha_{y1}(Ker alpha_{y0}) + span{W_{y1}}.
    let ker0 = Subspace::kernel_scaled(&commutator_matrix(model.w(y0)), settings.rank_tol, 1.0);
    let img1 = commutator_matrix(model.w(y1)) * ker0.basis();
    let base1 = numerics::hstack(&[img1, Matrix::from_column_slice(d * d, 1, flat_matrix(model.w(y1)).as_slice())]);
    let sub1 = Subspace::span_scaled(&base1, settings.rank_tol, 1.0);
    let mut pool1: Vec<Matrix> = Vec::new();
    for xp in 0..d {
        for i in 0..d.saturating_sub(1) {
            pool1.push((unit(d, i) - unit(d, i + 1)) * unit(d, xp).transpose());
        }
    }
    pool1.extend(delta_pool(d));
    let block1 = complete(&sub1, &pool1, d * d - d, |_| true, settings);
    if block1.len() != d * d - d {
        return Err(Error::InternalConsistency(format!("found {} of {} functions for output {y1}", block1.len(), d * d - d)));
    }

    let to_function = |y: usize, b: &Matrix| -> MatrixFamily {
        let mut g = MatrixFamily::zeros(d, dy);
        *g.get_mut(y) = b.component_div(model.w(y));
        g
    };
    let mut gens: Vec<MatrixFamily> = block0.iter().map(|b| to_function(y0, b)).collect();
    gens.extend(block1.iter().map(|b| to_function(y1, b)));
    for y in (0..dy).filter(|&y| y != y0 && y != y1) {
        for b in delta_pool(d) {
            let mrep = b.component_mul(model.w(y));
            if (&mrep * pstat).sum().abs() <= settings.mean_tol {
                return Err(Error::Precondition(format!("output {y}: a coordinate function has zero stationary mean")));
            }
            gens.push(to_function(y, &mrep));
        }
    }
    Ok(((y0, y1), gens))
}

/// A generator set of size d^2 (dY - 1) at a model satisfying E1, E2 and E3. The
/// first dY - 1 members are output indicators; the rest are taken in order from
/// `nfr_generators` while they stay independent modulo the indistinguishable space.
pub fn build_generators(model: &YTransitionModel, p: Option<&Distribution>, settings: &Settings) -> Result<GeneratorSet> {
    let d = model.d();
    let dy = model.dy();
    let (_, raw) = nfr_generators(model, p, settings)?;
    let stat = stationary(model, settings)?;
    let pp = p.unwrap_or(&stat);
    let l2 = l2_space(model, settings)?;
    let lp = lp_space(model, pp, settings)?;
    let indist = numerics::sum(&[&l2, &lp])?;
    let target = d * d * (dy - 1);
    let mrep_of = |g: &MatrixFamily| -> Result<Vector> { Ok(m_rep(model, &g1_project(model, g, settings)?).flatten()) };

    let mut chosen: Vec<MatrixFamily> = Vec::new();
    let mut vecs: Vec<Vector> = Vec::new();
    let candidates = (0..dy - 1).map(|y| MatrixFamily::output_indicator(d, dy, y)).chain(raw);
    for g in candidates {
        if chosen.len() == target {
            break;
        }
        let v = mrep_of(&g)?;
        let mut trial = vecs.clone();
        trial.push(v);
        if rank_modulo(&indist, trial.iter().cloned(), settings) == trial.len() {
            vecs = trial;
            chosen.push(g);
        }
    }
    if chosen.len() != target {
        return Err(Error::InternalConsistency(format!("built {} of {target} independent generators", chosen.len())));
    }
    GeneratorSet::new(model.clone(), chosen, settings)
}

/// Check that the span of the generators meets N + N_P + N_2 only in zero.
pub fn zero_intersection_check(gens: &GeneratorSet, p: Option<&Distribution>, settings: &Settings) -> Result<bool> {
    Ok(generator_quotient_rank(gens, p, settings)? == gens.len())
}

/// Whether W_y(0|0) + W_y(1|0) = W_y(0|1) + W_y(1|1) holds for output y of a two-state model.
pub fn two_state_output_degenerate(model: &YTransitionModel, y: usize, tol: f64) -> bool {
    let w = model.w(y);
    (w[(0, 0)] + w[(1, 0)] - w[(0, 1)] - w[(1, 1)]).abs() <= tol
}

/// Generators (b^j_y E1)_y and (b^j_y E2)_y, j = 1..dY-1, at a two-state model whose
/// outputs all have state-independent probabilities.
pub fn two_state_singular_generators(model: &YTransitionModel, settings: &Settings) -> Result<GeneratorSet> {
    let dy = model.dy();
    if model.d() != 2 || dy < 2 {
        return Err(Error::Precondition("the singular construction needs d = 2 and at least two outputs".into()));
    }
    let tol = 1e-9;
    if let Some(y) = (0..dy).find(|&y| !two_state_output_degenerate(model, y, tol)) {
        return Err(Error::Precondition(format!(
            "output {y} has state-dependent probability: W_y(0|0) + W_y(1|0) != W_y(0|1) + W_y(1|1)"
        )));
    }
    if !model.has_full_support(settings.support_tol) {
        return Err(Error::Precondition("E2 fails: some W_y has a zero entry".into()));
    }
    let e1 = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
    let e2 = Matrix::from_row_slice(2, 2, &[1.0, -1.0, 1.0, -1.0]);
    let mut gens = Vec::with_capacity(2 * dy - 2);
    for e in [&e1, &e2] {
        for j in 0..dy - 1 {
            let mut g = MatrixFamily::zeros(2, dy);
            *g.get_mut(j) = e.clone();
            *g.get_mut(dy - 1) = -e;
            gens.push(g);
        }
    }
    let set = GeneratorSet::new(model.clone(), gens, settings)?;
    let rank = generator_quotient_rank(&set, None, settings)?;
    if rank != 2 * dy - 2 {
        return Err(Error::InternalConsistency(format!("singular generators have quotient rank {rank}, expected {}", 2 * dy - 2)));
    }
    Ok(set)
}
