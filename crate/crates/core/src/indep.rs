//! Independent-type models W_y = W D(V_y): factorization testing, identifiability,
//! the (B, C) tangent spaces, full-model generators and the two-state analysis.
//!
//! A tangent pair (B, C) is flattened as B row-major followed by C_y(x') at
//! offset d^2 + y d + x'.

use itertools::Itertools;
use serde::Serialize;

use crate::equivalence::{are_equivalent, tv_distance, Verdict};
use crate::error::{Error, Result};
use crate::expfam::{at, ExpFamilyPoint, GeneratorSet};
use crate::model::{from_independent, stationary, Distribution, IndepModel, YTransitionModel};
use crate::numerics::{self, perron, Matrix, MatrixFamily, Subspace, Vector};
use crate::observables::{exact_output_law, observability_profile, reachability_profile};
use crate::settings::Settings;
use crate::tangent::commutator_matrix;

fn pair_dim(m: &IndepModel) -> usize {
    m.d() * m.d() + m.d() * m.dy()
}

fn b_index(d: usize, x: usize, xp: usize) -> usize {
    x * d + xp
}

fn c_index(d: usize, y: usize, xp: usize) -> usize {
    d * d + y * d + xp
}

/// Split a flattened pair into B and the family C (rows y, columns x').
pub fn split_pair(m: &IndepModel, v: &Vector) -> (Matrix, Matrix) {
    let d = m.d();
    let b = Matrix::from_fn(d, d, |x, xp| v[b_index(d, x, xp)]);
    let c = Matrix::from_fn(m.dy(), d, |y, xp| v[c_index(d, y, xp)]);
    (b, c)
}

pub fn join_pair(m: &IndepModel, b: &Matrix, c: &Matrix) -> Vector {
    let d = m.d();
    let mut v = Vector::zeros(pair_dim(m));
    for x in 0..d {
        for xp in 0..d {
            v[b_index(d, x, xp)] = b[(x, xp)];
        }
    }
    for y in 0..m.dy() {
        for xp in 0..d {
            v[c_index(d, y, xp)] = c[(y, xp)];
        }
    }
    v
}

/// Matrix of (B, C) -> (B D(V_y) + W D(C_y))_y into flattened families.
pub fn star_matrix(m: &IndepModel) -> Matrix {
    let d = m.d();
    let dy = m.dy();
    let mut s = Matrix::zeros(dy * d * d, pair_dim(m));
    for y in 0..dy {
        for x in 0..d {
            for xp in 0..d {
                let row = MatrixFamily::flat_index(d, y, x, xp);
                s[(row, b_index(d, x, xp))] = m.v()[(y, xp)];
                s[(row, c_index(d, y, xp))] = m.w()[(x, xp)];
            }
        }
    }
    s
}

/// (B D(V_y) + W D(C_y))_y, with C given as rows y.
pub fn star_map(m: &IndepModel, b: &Matrix, c: &Matrix) -> Result<MatrixFamily> {
    let d = m.d();
    if b.shape() != (d, d) || c.shape() != (m.dy(), d) {
        return Err(Error::DimensionMismatch(format!(
            "expected B {d}x{d} and C {}x{d}, got {:?} and {:?}",
            m.dy(),
            b.shape(),
            c.shape()
        )));
    }
    let mats = (0..m.dy())
        .map(|y| {
            let cy = c.row(y).transpose();
            b * Matrix::from_diagonal(&m.emission(y)) + m.w() * Matrix::from_diagonal(&cy)
        })
        .collect();
    MatrixFamily::new(mats)
}

fn pair_support(m: &IndepModel, tol: f64) -> Vec<usize> {
    let d = m.d();
    let mut idx = Vec::new();
    for x in 0..d {
        for xp in 0..d {
            if m.w()[(x, xp)] > tol {
                idx.push(b_index(d, x, xp));
            }
        }
    }
    for y in 0..m.dy() {
        for xp in 0..d {
            if m.v()[(y, xp)] > tol {
                idx.push(c_index(d, y, xp));
            }
        }
    }
    idx
}

fn pair_support_space(m: &IndepModel, settings: &Settings) -> Subspace {
    let idx = pair_support(m, settings.support_tol);
    let mut basis = Matrix::zeros(pair_dim(m), idx.len());
    for (j, &i) in idx.iter().enumerate() {
        basis[(i, j)] = 1.0;
    }
    Subspace::span(&basis, settings.rank_tol).with_tol(settings.rank_tol)
}

fn restrict_to_support(m: &IndepModel, s: Subspace, settings: &Settings) -> Result<Subspace> {
    if m.has_full_support(settings.support_tol) {
        Ok(s)
    } else {
        numerics::intersect(&s, &pair_support_space(m, settings))
    }
}

fn kernel_on_pair_support(m: &IndepModel, cons: &Matrix, settings: &Settings) -> Subspace {
    let idx = pair_support(m, settings.support_tol);
    let n = pair_dim(m);
    let mut r = Matrix::zeros(cons.nrows(), idx.len());
    for (j, &i) in idx.iter().enumerate() {
        r.set_column(j, &cons.column(i));
    }
    let k = Subspace::kernel_scaled(&r, settings.rank_tol, 1.0);
    let mut basis = Matrix::zeros(n, k.dim());
    for (j, &i) in idx.iter().enumerate() {
        basis.set_row(i, &k.basis().row(j));
    }
    Subspace::span(&basis, settings.rank_tol).with_tol(settings.rank_tol)
}

// B^T 1 = 0 and sum_y C_y = 0.
fn l1i_constraints(m: &IndepModel) -> Matrix {
    let d = m.d();
    let mut c = Matrix::zeros(2 * d, pair_dim(m));
    for xp in 0..d {
        for x in 0..d {
            c[(xp, b_index(d, x, xp))] = 1.0;
        }
        for y in 0..m.dy() {
            c[(d + xp, c_index(d, y, xp))] = 1.0;
        }
    }
    c
}

/// L^I_1: pairs on the support with B^T 1 = 0 and sum_y C_y = 0.
pub fn l1i_space(m: &IndepModel, settings: &Settings) -> Subspace {
    kernel_on_pair_support(m, &l1i_constraints(m), settings)
}

// Variables (A, C) of size d^2 + d dY. Rows: A^T 1 = 0, optionally A P = 0, and
// W [D(V_y), A] - W D(C_y) = 0 for every y.
fn commutator_system(m: &IndepModel, p: Option<&Distribution>) -> Matrix {
    let d = m.d();
    let dy = m.dy();
    let n = pair_dim(m);
    let mut rows: Vec<Matrix> = Vec::new();
    let mut colsum = Matrix::zeros(d, n);
    for i in 0..d {
        for xp in 0..d {
            colsum[(xp, i * d + xp)] = 1.0;
        }
    }
    rows.push(colsum);
    if let Some(p) = p {
        let mut ap = Matrix::zeros(d, n);
        for x in 0..d {
            for j in 0..d {
                ap[(x, x * d + j)] = p.p()[j];
            }
        }
        rows.push(ap);
    }
    for y in 0..dy {
        let vy = m.emission(y);
        // [D(V_y), A](i, j) = (V_y(i) - V_y(j)) A(i, j); then left-multiply by W.
        let mut blk = Matrix::zeros(d * d, n);
        for x in 0..d {
            for j in 0..d {
                for i in 0..d {
                    blk[(x * d + j, i * d + j)] += m.w()[(x, i)] * (vy[i] - vy[j]);
                }
                blk[(x * d + j, c_index(d, y, j))] -= m.w()[(x, j)];
            }
        }
        rows.push(blk);
    }
    numerics::vstack(&rows)
}

// (A, C) -> ([W, A], C).
fn commutator_to_pair(m: &IndepModel) -> Matrix {
    let d = m.d();
    let n = pair_dim(m);
    let mut t = Matrix::zeros(n, n);
    t.view_mut((0, 0), (d * d, d * d)).copy_from(&commutator_matrix(m.w()));
    for k in d * d..n {
        t[(k, k)] = 1.0;
    }
    t
}

fn image_of_solutions(m: &IndepModel, p: Option<&Distribution>, settings: &Settings) -> Result<Subspace> {
    let sol = Subspace::kernel_scaled(&commutator_system(m, p), settings.rank_tol, 1.0);
    if sol.dim() == 0 {
        return Ok(Subspace::zero(pair_dim(m)).with_tol(settings.rank_tol));
    }
    let img = commutator_to_pair(m) * sol.basis();
    restrict_to_support(m, Subspace::span_scaled(&img, settings.rank_tol, 1.0).with_tol(settings.rank_tol), settings)
}

/// L^I_2 = {([W, A], C) : A^T 1 = 0, W [D(V_y), A] = W D(C_y)}.
pub fn l2i_space(m: &IndepModel, settings: &Settings) -> Result<Subspace> {
    image_of_solutions(m, None, settings)
}

/// L^I_{2,P}: L^I_2 with the extra condition A P = 0.
pub fn l2pi_space(m: &IndepModel, p: &Distribution, settings: &Settings) -> Result<Subspace> {
    image_of_solutions(m, Some(p), settings)
}

// Domain A^T 1 = 0 (and A P = 0) with A(x, x') = 0 whenever columns x, x' of V differ.
fn block_domain(m: &IndepModel, p: Option<&Distribution>, settings: &Settings) -> Subspace {
    let d = m.d();
    let mut rows: Vec<Vector> = Vec::new();
    for xp in 0..d {
        rows.push(Vector::from_fn(d * d, |k, _| if k % d == xp { 1.0 } else { 0.0 }));
    }
    if let Some(p) = p {
        for x in 0..d {
            rows.push(Vector::from_fn(d * d, |k, _| if k / d == x { p.p()[k % d] } else { 0.0 }));
        }
    }
    for x in 0..d {
        for xp in 0..d {
            if (m.v().column(x) - m.v().column(xp)).amax() > settings.support_tol {
                let mut r = Vector::zeros(d * d);
                r[x * d + xp] = 1.0;
                rows.push(r);
            }
        }
    }
    let cons = numerics::columns_to_matrix(d * d, &rows).transpose();
    Subspace::kernel_scaled(&cons, settings.rank_tol, 1.0)
}

/// L^I_2 (or L^I_{2,P}) for invertible W: pairs ([W, A], 0) with A commuting with
/// the projectors onto groups of states sharing an emission column.
pub fn l2i_space_invertible(m: &IndepModel, p: Option<&Distribution>, settings: &Settings) -> Result<Subspace> {
    let d = m.d();
    let dom = block_domain(m, p, settings);
    let n = pair_dim(m);
    if dom.dim() == 0 {
        return Ok(Subspace::zero(n).with_tol(settings.rank_tol));
    }
    let mut img = Matrix::zeros(n, dom.dim());
    img.view_mut((0, 0), (d * d, dom.dim())).copy_from(&(commutator_matrix(m.w()) * dom.basis()));
    restrict_to_support(m, Subspace::span_scaled(&img, settings.rank_tol, 1.0).with_tol(settings.rank_tol), settings)
}

/// L^I_2 (or L^I_{2,P}) for rank-one W: pairs ([W, A], (A^T V_y)_y).
pub fn l2i_space_rank_one(m: &IndepModel, p: Option<&Distribution>, settings: &Settings) -> Result<Subspace> {
    let d = m.d();
    let n = pair_dim(m);
    let mut rows: Vec<Vector> = (0..d).map(|xp| Vector::from_fn(d * d, |k, _| if k % d == xp { 1.0 } else { 0.0 })).collect();
    if let Some(p) = p {
        for x in 0..d {
            rows.push(Vector::from_fn(d * d, |k, _| if k / d == x { p.p()[k % d] } else { 0.0 }));
        }
    }
    let dom = Subspace::kernel_scaled(&numerics::columns_to_matrix(d * d, &rows).transpose(), settings.rank_tol, 1.0);
    if dom.dim() == 0 {
        return Ok(Subspace::zero(n).with_tol(settings.rank_tol));
    }
    let comm = commutator_matrix(m.w());
    let cols: Vec<Vector> = (0..dom.dim())
        .map(|j| {
            let a_flat = dom.basis().column(j).into_owned();
            let a = Matrix::from_fn(d, d, |x, xp| a_flat[x * d + xp]);
            let b_flat = &comm * &a_flat;
            let b = Matrix::from_fn(d, d, |x, xp| b_flat[x * d + xp]);
            let c = Matrix::from_fn(m.dy(), d, |y, xp| (a.transpose() * m.emission(y))[xp]);
            join_pair(m, &b, &c)
        })
        .collect();
    restrict_to_support(m, Subspace::span_scaled(&numerics::columns_to_matrix(n, &cols), settings.rank_tol, 1.0).with_tol(settings.rank_tol), settings)
}

/// L^I_P: pairs in L^I_1 whose image maps Ker + reachable into Ker for every y.
pub fn lpi_space(m: &IndepModel, p: &Distribution, settings: &Settings) -> Result<Subspace> {
    let model = from_independent(m)?;
    let reach = reachability_profile(&model, p, settings)?;
    let d = m.d();
    let n = pair_dim(m);
    let comp = Matrix::identity(d, d) - reach.quotient.kernel.projector();
    let lifted = reach.lifted_space();
    let star = star_matrix(m);
    let mut blocks = vec![l1i_constraints(m)];
    for y in 0..m.dy() {
        let rows = star.rows(y * d * d, d * d).into_owned();
        for s in 0..lifted.dim() {
            let v = lifted.basis().column(s);
            // (pair) -> (star(pair)_y) v.
            let mut apply = Matrix::zeros(d, n);
            for x in 0..d {
                for xp in 0..d {
                    let r = rows.row(x * d + xp) * v[xp];
                    let mut target = apply.row_mut(x);
                    target += r;
                }
            }
            blocks.push(&comp * apply);
        }
    }
    Ok(kernel_on_pair_support(m, &numerics::vstack(&blocks), settings))
}

/// Pairs in L^I_1 whose image under the star map lies in `space`.
pub fn pullback(m: &IndepModel, space: &Subspace, settings: &Settings) -> Result<Subspace> {
    let l1 = l1i_space(m, settings);
    if l1.dim() == 0 {
        return Ok(l1);
    }
    let comp = Matrix::identity(space.ambient_dim(), space.ambient_dim()) - space.projector();
    let k = Subspace::kernel_scaled(&(comp * star_matrix(m) * l1.basis()), settings.rank_tol, 1.0);
    Ok(Subspace::span_scaled(&(l1.basis() * k.basis()), settings.rank_tol, 1.0).with_tol(settings.rank_tol))
}

pub fn is_rank_one(w: &Matrix, tol: f64) -> bool {
    (1..w.ncols()).all(|j| (w.column(j) - w.column(0)).amax() <= tol)
}

pub fn is_invertible(w: &Matrix, settings: &Settings) -> bool {
    let s = numerics::singular_values(w);
    let smax = s.iter().copied().fold(1.0, f64::max);
    s.iter().copied().fold(f64::INFINITY, f64::min) > settings.rank_tol * smax
}

/// Dimensions of the independent-type indistinguishable spaces.
#[derive(Debug, Clone, Serialize)]
pub struct IndepTangentReport {
    pub dim_l1: usize,
    pub dim_l2: usize,
    pub dim_lp: usize,
    pub dim_l2p: usize,
    pub dim_lp_stationary: usize,
    /// dim L^I_1 - dim(L^I_{2,P} + L^I_P).
    pub local_dim_fixed: usize,
    /// dim L^I_1 - dim(L^I_2 + L^I_P) at the stationary law.
    pub local_dim_asymptotic: usize,
    /// Agreement with the invertible-W form, when W is invertible.
    pub invertible_form_agrees: Option<bool>,
    /// Agreement with the rank-one-W form, when W has rank one.
    pub rank_one_form_agrees: Option<bool>,
    /// Agreement of L^I_2 and L^I_P with the preimages of L_2 and L_P under the star map.
    pub pullback_agrees: bool,
}

pub fn indep_tangent_report(m: &IndepModel, p: Option<&Distribution>, settings: &Settings) -> Result<IndepTangentReport> {
    let model = from_independent(m)?;
    let stat = stationary(&model, settings)?;
    let p = p.unwrap_or(&stat);
    let l1 = l1i_space(m, settings);
    let l2 = l2i_space(m, settings)?;
    let l2p = l2pi_space(m, p, settings)?;
    let lp = lpi_space(m, p, settings)?;
    let lp_stat = lpi_space(m, &stat, settings)?;
    let fixed = numerics::sum(&[&l2p, &lp])?;
    let asym = numerics::sum(&[&l2, &lp_stat])?;

    let invertible_form_agrees = if is_invertible(m.w(), settings) {
        Some(numerics::equal(&l2, &l2i_space_invertible(m, None, settings)?)? && numerics::equal(&l2p, &l2i_space_invertible(m, Some(p), settings)?)?)
    } else {
        None
    };
    let rank_one_form_agrees = if is_rank_one(m.w(), settings.support_tol) {
        Some(numerics::equal(&l2, &l2i_space_rank_one(m, None, settings)?)? && numerics::equal(&l2p, &l2i_space_rank_one(m, Some(p), settings)?)?)
    } else {
        None
    };
    let l2_general = crate::tangent::l2_space(&model, settings)?;
    let lp_general = crate::tangent::lp_space(&model, p, settings)?;
    let pullback_agrees =
        numerics::equal(&l2, &pullback(m, &l2_general, settings)?)? && numerics::equal(&lp, &pullback(m, &lp_general, settings)?)?;

    Ok(IndepTangentReport {
        dim_l1: l1.dim(),
        dim_l2: l2.dim(),
        dim_lp: lp.dim(),
        dim_l2p: l2p.dim(),
        dim_lp_stationary: lp_stat.dim(),
        local_dim_fixed: l1.dim() - fixed.dim(),
        local_dim_asymptotic: l1.dim() - asym.dim(),
        invertible_form_agrees,
        rank_one_form_agrees,
        pullback_agrees,
    })
}

/// The three sub-conditions of the factorization test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum G2Condition {
    /// Some U_y has a simple spectrum and every U_y has real nonnegative eigenvalues.
    #[serde(rename = "G2-1")]
    SimpleNonnegativeSpectrum,
    /// The eigenvectors of the witness U_y diagonalize every U_y.
    #[serde(rename = "G2-2")]
    CommonEigenvectors,
    /// T |W| T^{-1} has nonnegative entries.
    #[serde(rename = "G2-3")]
    NonnegativeTransition,
}

impl std::fmt::Display for G2Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            G2Condition::SimpleNonnegativeSpectrum => "G2-1 (simple, real nonnegative spectrum of U_y)",
            G2Condition::CommonEigenvectors => "G2-2 (common eigenvector system)",
            G2Condition::NonnegativeTransition => "G2-3 (nonnegative T|W|T^-1)",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub enum DecomposeOutcome {
    /// `t` maps states of the input to states of the factorized model.
    Decomposed { indep: IndepModel, t: Matrix, tv: f64 },
    Failed { condition: G2Condition, detail: String },
    Indeterminate { condition: G2Condition, detail: String },
}

#[derive(Debug, Clone)]
pub struct DecomposeReport {
    pub outcome: DecomposeOutcome,
    /// Output whose U_y supplied the eigenvectors.
    pub witness: Option<usize>,
    /// Smallest pairwise eigenvalue gap of the witness relative to its spectral radius.
    pub eigen_gap: f64,
    pub max_imaginary: f64,
    pub min_eigenvalue: f64,
    pub leakage: Option<f64>,
    pub min_transition_entry: Option<f64>,
}

impl DecomposeReport {
    pub fn indep(&self) -> Option<&IndepModel> {
        match &self.outcome {
            DecomposeOutcome::Decomposed { indep, .. } => Some(indep),
            _ => None,
        }
    }

    pub fn failed_condition(&self) -> Option<G2Condition> {
        match &self.outcome {
            DecomposeOutcome::Failed { condition, .. } => Some(*condition),
            _ => None,
        }
    }
}

fn relative_gap(vals: &[nalgebra::Complex<f64>]) -> f64 {
    let scale = vals.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    vals.iter()
        .tuple_combinations()
        .map(|(a, b)| (a - b).norm() / scale)
        .fold(f64::INFINITY, f64::min)
}

fn real_eigenvector(m: &Matrix, mu: f64) -> Vector {
    let d = m.nrows();
    numerics::smallest_right_singular_vector(&(m - Matrix::identity(d, d) * mu)).unwrap_or_else(|| Vector::zeros(d))
}

/// Test whether a model is equivalent to an independent-type model and, if so,
/// construct one. Needs an invertible |W|.
pub fn decompose(model: &YTransitionModel, settings: &Settings) -> Result<DecomposeReport> {
    let d = model.d();
    let dy = model.dy();
    let total = model.total();
    if !is_invertible(&total, settings) {
        return Err(Error::Singular("the factorization test needs an invertible |W|".into()));
    }
    if dy == 1 {
        let indep = IndepModel::new(total, Matrix::from_element(1, d, 1.0))?;
        return Ok(DecomposeReport {
            outcome: DecomposeOutcome::Decomposed { indep, t: Matrix::identity(d, d), tv: 0.0 },
            witness: Some(0),
            eigen_gap: f64::INFINITY,
            max_imaginary: 0.0,
            min_eigenvalue: 1.0,
            leakage: Some(0.0),
            min_transition_entry: None,
        });
    }
    let inv = total.clone().try_inverse().ok_or_else(|| Error::Singular("|W| is not invertible".into()))?;
    let u: Vec<Matrix> = model.matrices().iter().map(|w| &inv * w).collect();
    let spectra: Vec<Vec<nalgebra::Complex<f64>>> = u.iter().map(|m| m.clone().complex_eigenvalues().iter().copied().collect()).collect();
    let max_imaginary = spectra.iter().flatten().map(|c| c.im.abs()).fold(0.0, f64::max);
    let min_eigenvalue = spectra.iter().flatten().map(|c| c.re).fold(f64::INFINITY, f64::min);
    let gaps: Vec<f64> = spectra.iter().map(|s| relative_gap(s)).collect();
    let witness = (0..dy).max_by(|&a, &b| gaps[a].total_cmp(&gaps[b])).unwrap_or(0);
    let eigen_gap = gaps[witness];
    let mut report = DecomposeReport {
        outcome: DecomposeOutcome::Failed { condition: G2Condition::SimpleNonnegativeSpectrum, detail: String::new() },
        witness: Some(witness),
        eigen_gap,
        max_imaginary,
        min_eigenvalue,
        leakage: None,
        min_transition_entry: None,
    };

    if max_imaginary > settings.eigen_real_tol {
        report.outcome = DecomposeOutcome::Failed {
            condition: G2Condition::SimpleNonnegativeSpectrum,
            detail: format!("some U_y has a non-real eigenvalue (imaginary part {max_imaginary:.3e})"),
        };
        return Ok(report);
    }
    if min_eigenvalue < -settings.eigen_real_tol {
        report.outcome = DecomposeOutcome::Failed {
            condition: G2Condition::SimpleNonnegativeSpectrum,
            detail: format!("some U_y has a negative eigenvalue ({min_eigenvalue:.3e})"),
        };
        return Ok(report);
    }
    if eigen_gap <= settings.eigen_gap_floor {
        report.outcome = DecomposeOutcome::Failed {
            condition: G2Condition::SimpleNonnegativeSpectrum,
            detail: format!("every U_y has a multiple eigenvalue (best relative gap {eigen_gap:.3e})"),
        };
        return Ok(report);
    }
    if eigen_gap <= settings.eigen_gap_tol {
        report.outcome = DecomposeOutcome::Indeterminate {
            condition: G2Condition::SimpleNonnegativeSpectrum,
            detail: format!("best relative eigenvalue gap {eigen_gap:.3e} lies between {:.0e} and {:.0e}", settings.eigen_gap_floor, settings.eigen_gap_tol),
        };
        return Ok(report);
    }

    // Rows of T are left eigenvectors of the witness, scaled so that the rows sum to 1^T.
    let ut = u[witness].transpose();
    let vecs: Vec<Vector> = spectra[witness].iter().map(|mu| real_eigenvector(&ut, mu.re)).collect();
    let e = numerics::columns_to_matrix(d, &vecs);
    let coef = e.clone().lu().solve(&Vector::from_element(d, 1.0));
    let Some(coef) = coef.filter(|c| c.iter().all(|v| v.abs() > settings.mean_tol)) else {
        report.outcome = DecomposeOutcome::Failed {
            condition: G2Condition::CommonEigenvectors,
            detail: "the all-ones vector does not have a nonzero component on every eigenvector".into(),
        };
        return Ok(report);
    };
    let t = Matrix::from_fn(d, d, |i, x| coef[i] * e[(x, i)]);
    let Some(tinv) = t.clone().try_inverse() else {
        report.outcome = DecomposeOutcome::Failed { condition: G2Condition::CommonEigenvectors, detail: "eigenvectors are dependent".into() };
        return Ok(report);
    };
    let diag: Vec<Matrix> = u.iter().map(|m| &t * m * &tinv).collect();
    let leakage = diag
        .iter()
        .map(|m| (0..d).cartesian_product(0..d).filter(|(i, j)| i != j).map(|(i, j)| m[(i, j)].abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    report.leakage = Some(leakage);
    if leakage > settings.leakage_tol {
        report.outcome = DecomposeOutcome::Failed {
            condition: G2Condition::CommonEigenvectors,
            detail: format!("the eigenvectors of U_{witness} leave off-diagonal mass {leakage:.3e} in another U_y"),
        };
        return Ok(report);
    }
    let wmat = &t * &total * &tinv;
    let min_entry = wmat.min();
    report.min_transition_entry = Some(min_entry);
    if min_entry < -settings.leakage_tol {
        report.outcome = DecomposeOutcome::Failed {
            condition: G2Condition::NonnegativeTransition,
            detail: format!("T|W|T^-1 has a negative entry ({min_entry:.3e})"),
        };
        return Ok(report);
    }
    let mut w = wmat.map(|v| v.max(0.0));
    for mut col in w.column_iter_mut() {
        let s = col.sum();
        col /= s;
    }
    let mut v = Matrix::from_fn(dy, d, |y, i| diag[y][(i, i)].max(0.0));
    for mut col in v.column_iter_mut() {
        let s = col.sum();
        col /= s;
    }
    let indep = IndepModel::new(w, v)?;
    let tv = verify_factorization(model, &indep, &t, settings)?;
    report.outcome = DecomposeOutcome::Decomposed { indep, t, tv };
    Ok(report)
}

// Compare output laws of (model, P) and (factorized, T P) at a window long enough for both.
fn verify_factorization(model: &YTransitionModel, indep: &IndepModel, t: &Matrix, settings: &Settings) -> Result<f64> {
    let other = from_independent(indep)?;
    let p = match stationary(model, settings) {
        Ok(p) => p,
        Err(Error::Reducible { .. }) => Distribution::uniform(model.d()),
        Err(e) => return Err(e),
    };
    let tp = t * p.p();
    let k = observability_profile(model, settings).k_w + model.d() + 1;
    let k = k.min(8);
    let law_a = exact_output_law(model, &p, k, settings.enumeration_cap)?;
    let law_b = crate::observables::output_law_of_vector(&other, &tp, k, settings.enumeration_cap)?;
    let tv = tv_distance(&law_a, &law_b);
    if tv > 1e3 * settings.equivalence_tol.max(settings.leakage_tol) {
        return Err(Error::CrossCheck(format!("factorized model differs from the input by total variation {tv:.3e}")));
    }
    Ok(tv)
}

/// Identifiability facts for an independent-type model.
#[derive(Debug, Clone, Serialize)]
pub struct IdentifiabilityReport {
    /// The columns V_{*,x} are linearly independent.
    pub columns_independent: bool,
    pub k_w: usize,
    pub kernel_trivial: bool,
    pub initial_full_support: bool,
    pub comparison: Option<PermutationCheck>,
    pub notice: Option<String>,
}

/// Equivalence against another pair, and the permutations that map one onto the other.
#[derive(Debug, Clone, Serialize)]
pub struct PermutationCheck {
    pub equivalent: bool,
    /// Permutations g with W' = g^{-1} W g, V' = V g and P' = P g, entrywise within tolerance.
    pub matching_permutations: Vec<Vec<usize>>,
    /// Whether "equivalent" coincides with "some permutation matches".
    pub claim_holds: bool,
}

pub const PERMUTATION_SWEEP_MAX_D: usize = 6;

fn permutation_matches(a: &IndepModel, pa: &Distribution, b: &IndepModel, pb: &Distribution, perm: &[usize], tol: f64) -> bool {
    let d = a.d();
    (0..d).all(|i| (pa.p()[perm[i]] - pb.p()[i]).abs() <= tol)
        && (0..d).cartesian_product(0..d).all(|(i, j)| (a.w()[(perm[i], perm[j])] - b.w()[(i, j)]).abs() <= tol)
        && (0..a.dy()).cartesian_product(0..d).all(|(y, i)| (a.v()[(y, perm[i])] - b.v()[(y, i)]).abs() <= tol)
}

pub fn check_identifiability(
    m: &IndepModel,
    p: &Distribution,
    other: Option<(&IndepModel, &Distribution)>,
    settings: &Settings,
) -> Result<IdentifiabilityReport> {
    let model = from_independent(m)?;
    let prof = observability_profile(&model, settings);
    let columns_independent = numerics::rank(m.v(), settings.rank_tol) == m.d();
    let kernel_trivial = prof.kernel().dim() == 0;
    if columns_independent && (!kernel_trivial || prof.k_w != 1) {
        return Err(Error::CrossCheck(format!(
            "independent emission columns but k_W = {} and kernel dimension {}",
            prof.k_w,
            prof.kernel().dim()
        )));
    }
    let mut notice = None;
    let comparison = match other {
        Some((b, pb)) => {
            if b.d() != m.d() || b.dy() != m.dy() {
                return Err(Error::DimensionMismatch("compared models have different sizes".into()));
            }
            let cert = are_equivalent(&model, p, &from_independent(b)?, pb, settings.equivalence_tol, settings)?;
            let equivalent = cert.verdict == Verdict::Equivalent;
            if m.d() > PERMUTATION_SWEEP_MAX_D {
                notice = Some(format!("permutation sweep skipped for d = {} > {PERMUTATION_SWEEP_MAX_D}", m.d()));
                None
            } else {
                let tol = 1e-9;
                let matching: Vec<Vec<usize>> =
                    (0..m.d()).permutations(m.d()).filter(|perm| permutation_matches(m, p, b, pb, perm, tol)).collect();
                let claim_holds = !(columns_independent && p.has_full_support(settings.support_tol)) || equivalent == !matching.is_empty();
                Some(PermutationCheck { equivalent, matching_permutations: matching, claim_holds })
            }
        }
        None => None,
    };
    Ok(IdentifiabilityReport {
        columns_independent,
        k_w: prof.k_w,
        kernel_trivial,
        initial_full_support: p.has_full_support(settings.support_tol),
        comparison,
        notice,
    })
}

/// Generators given as g_a on X x X and g_b on Y x X.
#[derive(Debug, Clone)]
pub struct IndepGeneratorSet {
    base: IndepModel,
    ga: Vec<Matrix>,
    gb: Vec<Matrix>,
    embedded: GeneratorSet,
}

impl IndepGeneratorSet {
    /// Applies the gauge sum_y V(y|x') g_b(y,x') = 0 and checks independence of
    /// the embedded functions modulo f(x) - f(x') + c.
    pub fn new(base: IndepModel, ga: Vec<Matrix>, gb: Vec<Matrix>, settings: &Settings) -> Result<Self> {
        let d = base.d();
        let dy = base.dy();
        if ga.len() != gb.len() {
            return Err(Error::DimensionMismatch(format!("{} g_a parts and {} g_b parts", ga.len(), gb.len())));
        }
        if let Some(bad) = ga.iter().chain(gb.iter()).zip(std::iter::repeat_n((d, d), ga.len()).chain(std::iter::repeat_n((dy, d), gb.len()))).find(|(m, s)| m.shape() != *s) {
            return Err(Error::DimensionMismatch(format!("generator part of shape {:?}, expected {:?}", bad.0.shape(), bad.1)));
        }
        if !base.has_full_support(settings.support_tol) {
            return Err(Error::Precondition("independent-type generators need W and V with full support".into()));
        }
        let mut ga2 = Vec::with_capacity(ga.len());
        let mut gb2 = Vec::with_capacity(gb.len());
        for (a, b) in ga.iter().zip(&gb) {
            let mean = Vector::from_fn(d, |xp, _| (0..dy).map(|y| base.v()[(y, xp)] * b[(y, xp)]).sum());
            ga2.push(Matrix::from_fn(d, d, |x, xp| a[(x, xp)] + mean[xp]));
            gb2.push(Matrix::from_fn(dy, d, |y, xp| b[(y, xp)] - mean[xp]));
        }
        let model = from_independent(&base)?;
        let fns = ga2.iter().zip(&gb2).map(|(a, b)| embed(a, b)).collect();
        let embedded = GeneratorSet::new(model, fns, settings)?;
        Ok(IndepGeneratorSet { base, ga: ga2, gb: gb2, embedded })
    }

    pub fn base(&self) -> &IndepModel {
        &self.base
    }

    pub fn ga(&self) -> &[Matrix] {
        &self.ga
    }

    pub fn gb(&self) -> &[Matrix] {
        &self.gb
    }

    pub fn embedded(&self) -> &GeneratorSet {
        &self.embedded
    }

    pub fn len(&self) -> usize {
        self.ga.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ga.is_empty()
    }
}

/// g(y, x, x') = g_a(x, x') + g_b(y, x').
pub fn embed(ga: &Matrix, gb: &Matrix) -> MatrixFamily {
    let d = ga.nrows();
    let mats = (0..gb.nrows()).map(|y| Matrix::from_fn(d, d, |x, xp| ga[(x, xp)] + gb[(y, xp)])).collect();
    MatrixFamily::new(mats).expect("consistent shapes")
}

/// Raw (g_a, g_b) patterns of the full independent-type model: output indicators
/// for y < dY - 1, output indicators restricted to x' for x' < d - 1, and
/// single-entry g_a for x < d - 1.
pub fn ert_patterns(d: usize, dy: usize) -> (Vec<Matrix>, Vec<Matrix>) {
    let mut ga = Vec::new();
    let mut gb = Vec::new();
    for j in 0..dy - 1 {
        ga.push(Matrix::zeros(d, d));
        gb.push(Matrix::from_fn(dy, d, |y, _| (y == j) as u8 as f64));
    }
    for i in 0..d - 1 {
        for j in 0..dy - 1 {
            ga.push(Matrix::zeros(d, d));
            gb.push(Matrix::from_fn(dy, d, |y, xp| (y == j && xp == i) as u8 as f64));
        }
    }
    for i in 0..d {
        for j in 0..d - 1 {
            ga.push(Matrix::from_fn(d, d, |x, xp| (x == j && xp == i) as u8 as f64));
            gb.push(Matrix::zeros(dy, d));
        }
    }
    (ga, gb)
}

/// The d(d + dY - 2) generators of the full independent-type model.
pub fn ert_generators(m: &IndepModel, settings: &Settings) -> Result<IndepGeneratorSet> {
    let (ga, gb) = ert_patterns(m.d(), m.dy());
    IndepGeneratorSet::new(m.clone(), ga, gb, settings)
}

/// A point of an independent-type family together with the general-family evaluation.
#[derive(Debug, Clone)]
pub struct IndepFamilyPoint {
    pub w: Matrix,
    pub v: Matrix,
    pub lambda: f64,
    pub general: ExpFamilyPoint,
    /// max_{y,x,x'} |W_theta(x|x') V_theta(y|x') - W_{theta,y}(x|x')|.
    pub product_residual: f64,
}

pub fn indep_exp_family(gs: &IndepGeneratorSet, theta: &[f64], settings: &Settings) -> Result<IndepFamilyPoint> {
    let m = gs.base();
    let d = m.d();
    let dy = m.dy();
    if theta.len() != gs.len() {
        return Err(Error::DimensionMismatch(format!("{} parameters for {} generators", theta.len(), gs.len())));
    }
    let ea = gs.ga.iter().zip(theta).fold(Matrix::zeros(d, d), |acc, (g, t)| acc + g * *t);
    let eb = gs.gb.iter().zip(theta).fold(Matrix::zeros(dy, d), |acc, (g, t)| acc + g * *t);
    let limit = settings.overflow_limit;
    if let Some(v) = ea.iter().chain(eb.iter()).find(|v| v.abs() > limit) {
        return Err(Error::Overflow { value: *v, limit });
    }
    let vt_unnorm = Matrix::from_fn(dy, d, |y, xp| eb[(y, xp)].exp() * m.v()[(y, xp)]);
    let colsum: Vec<f64> = (0..d).map(|xp| vt_unnorm.column(xp).sum()).collect();
    let v = Matrix::from_fn(dy, d, |y, xp| vt_unnorm[(y, xp)] / colsum[xp]);
    let wbar = Matrix::from_fn(d, d, |x, xp| m.w()[(x, xp)] * ea[(x, xp)].exp() * colsum[xp]);
    let pd = perron(&wbar, settings)?;
    let w = Matrix::from_fn(d, d, |x, xp| pd.left[x] * wbar[(x, xp)] / (pd.lambda * pd.left[xp]));
    let general = at(gs.embedded(), theta, settings)?;
    let mut residual = 0.0f64;
    for y in 0..dy {
        for x in 0..d {
            for xp in 0..d {
                residual = residual.max((w[(x, xp)] * v[(y, xp)] - general.model.w(y)[(x, xp)]).abs());
            }
        }
    }
    Ok(IndepFamilyPoint { w, v, lambda: pd.lambda, general, product_residual: residual })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TwoStateCase {
    /// W invertible and some output has state-dependent emission probability.
    NonSingular,
    /// W has rank one, emissions state-dependent.
    RankOneTransition,
    /// Emissions identical for both states, W invertible.
    EqualEmissions,
    /// Emissions identical and W of rank one.
    EqualEmissionsRankOneTransition,
}

#[derive(Debug, Clone, Serialize)]
pub struct TwoStateReport {
    pub case: TwoStateCase,
    pub dims: IndepTangentReport,
    /// Whether the given initial law is the stationary one.
    pub initial_is_stationary: bool,
    /// Local dimension used for the split: asymptotic when the initial law is stationary.
    pub quotient_dim: usize,
    /// Indices of full-model generators that move within the singular set (empty when non-singular).
    pub in_stratum: Vec<usize>,
    /// Indices of full-model generators transversal to the singular set.
    pub transversal: Vec<usize>,
}

/// Classification of a two-state independent-type model.
pub fn two_hidden_state_report(m: &IndepModel, p: Option<&Distribution>, settings: &Settings) -> Result<TwoStateReport> {
    if m.d() != 2 {
        return Err(Error::Precondition(format!("the two-state analysis needs d = 2, got d = {}", m.d())));
    }
    let dy = m.dy();
    let model = from_independent(m)?;
    let stat = stationary(&model, settings)?;
    let p = p.unwrap_or(&stat);
    let initial_is_stationary = (p.p() - stat.p()).amax() <= 1e-9;
    let equal_emissions = (m.v().column(0) - m.v().column(1)).amax() <= 1e-9;
    let rank_one = is_rank_one(m.w(), 1e-9);
    let case = match (equal_emissions, rank_one) {
        (false, false) => TwoStateCase::NonSingular,
        (false, true) => TwoStateCase::RankOneTransition,
        (true, false) => TwoStateCase::EqualEmissions,
        (true, true) => TwoStateCase::EqualEmissionsRankOneTransition,
    };
    let dims = indep_tangent_report(m, Some(p), settings)?;
    // Full-model generators start with dY - 1 output indicators, which move
    // within the singular set; the next ones leave it.
    let quotient = if initial_is_stationary { dims.local_dim_asymptotic } else { dims.local_dim_fixed };
    let (in_stratum, transversal) = match case {
        TwoStateCase::NonSingular => (Vec::new(), Vec::new()),
        _ => ((0..dy - 1).collect(), (dy - 1..quotient.max(dy - 1)).collect()),
    };
    Ok(TwoStateReport { case, dims, initial_is_stationary, quotient_dim: quotient, in_stratum, transversal })
}
