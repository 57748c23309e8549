//! Observed-law maps P^k, kernel chains, reachable spaces and the quotient
//! actions [W_y] on V_X / Ker P^{k_W}.
//!
//! Words over Y are stored in time order `(y_1, ..., y_k)`. Rows of P^k are
//! ordered lexicographically in `(y_k, ..., y_1)`, so a word's row index is
//! `sum_i y_i * dY^(i-1)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Distribution, YTransitionModel};
use crate::numerics::{self, Matrix, Subspace, Vector};
use crate::settings::Settings;

/// Row index of the word `(y_1, ..., y_k)`.
pub fn word_index(word: &[usize], dy: usize) -> usize {
    word.iter().rev().fold(0, |acc, &y| acc * dy + y)
}

/// Inverse of `word_index` for words of length `k`.
pub fn index_word(mut index: usize, k: usize, dy: usize) -> Vec<usize> {
    let mut word = Vec::with_capacity(k);
    for _ in 0..k {
        word.push(index % dy);
        index /= dy;
    }
    word
}

/// All words of length `k`, in row order.
pub fn words(dy: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    let n = dy.pow(k as u32);
    (0..n).map(move |i| index_word(i, k, dy))
}

/// All words of length 0..=k_max, shorter words first.
pub fn words_up_to(dy: usize, k_max: usize) -> Vec<Vec<usize>> {
    (0..=k_max).flat_map(|k| words(dy, k)).collect()
}

pub fn check_cap(dy: usize, k: usize, cap: usize) -> Result<usize> {
    let rows = (dy as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
    if rows > cap as u128 {
        return Err(Error::EnumerationCap { rows, cap });
    }
    Ok(rows as usize)
}

/// P^k[W](y_k..y_1|x') = 1^T W_{y_k} ... W_{y_1}, one row per word.
pub fn pk_map(model: &YTransitionModel, k: usize, cap: usize) -> Result<Matrix> {
    if k == 0 {
        return Err(Error::InvalidArgument("pk_map needs k >= 1".into()));
    }
    let dy = model.dy();
    let d = model.d();
    check_cap(dy, k, cap)?;
    let mut rows = Matrix::from_element(1, d, 1.0);
    for _ in 0..k {
        let mut next = Matrix::zeros(rows.nrows() * dy, d);
        for r in 0..rows.nrows() {
            let row = rows.row(r);
            for y in 0..dy {
                next.set_row(r * dy + y, &(row * model.w(y)));
            }
        }
        rows = next;
    }
    Ok(rows)
}

/// The law of (y_1, ..., y_k) started from `p`, indexed like the rows of P^k.
pub fn exact_output_law(model: &YTransitionModel, p: &Distribution, k: usize, cap: usize) -> Result<Vector> {
    output_law_of_vector(model, p.p(), k, cap)
}

/// P^k v for an arbitrary vector v (k = 0 gives the total mass).
pub fn output_law_of_vector(model: &YTransitionModel, v: &Vector, k: usize, cap: usize) -> Result<Vector> {
    if v.len() != model.d() {
        return Err(Error::DimensionMismatch(format!("vector of length {} for {} states", v.len(), model.d())));
    }
    let dy = model.dy();
    let n = check_cap(dy, k, cap)?;
    let mut out = Vector::zeros(n);
    let mut stack: Vec<(usize, usize, Vector)> = vec![(0, 0, v.clone())];
    // Depth-first over words, carrying W_{y_j}...W_{y_1} v.
    while let Some((depth, index, state)) = stack.pop() {
        if depth == k {
            out[index] = state.sum();
            continue;
        }
        let weight = dy.pow(depth as u32);
        for y in 0..dy {
            stack.push((depth + 1, index + y * weight, model.w(y) * &state));
        }
    }
    Ok(out)
}

/// Sum a k-law over its last symbol y_k, giving the (k-1)-law.
pub fn marginalize_last(law: &Vector, dy: usize) -> Vector {
    let block = law.len() / dy;
    let mut out = Vector::zeros(block);
    for y in 0..dy {
        out += law.rows(y * block, block);
    }
    out
}

/// Kernel chain of the observed-law maps.
#[derive(Debug, Clone)]
pub struct ObservabilityProfile {
    pub k_w: usize,
    pub d_w: usize,
    /// Ker P^1, ..., Ker P^{k_W}.
    pub kernels: Vec<Subspace>,
    /// True when some kernel was obtained by the subspace recursion instead of P^k.
    pub used_recursion: bool,
}

impl ObservabilityProfile {
    /// Ker P^{k_W}, the kernel of the whole observed process.
    pub fn kernel(&self) -> &Subspace {
        self.kernels.last().expect("kernel chain is never empty")
    }
}

// {v : W_y v in K for all y}
fn refine_kernel(model: &YTransitionModel, k: &Subspace, rank_tol: f64) -> Subspace {
    let d = model.d();
    let comp = Matrix::identity(d, d) - k.projector();
    let blocks: Vec<Matrix> = model.matrices().iter().map(|w| &comp * w).collect();
    Subspace::kernel_scaled(&numerics::vstack(&blocks), rank_tol, 1.0)
}

/// Ker P^{k+1} computed from Ker P^k without materializing P^{k+1}.
pub fn kernel_by_recursion(model: &YTransitionModel, previous: &Subspace, settings: &Settings) -> Subspace {
    refine_kernel(model, previous, settings.rank_tol).with_tol(settings.rank_tol)
}

fn kernel_at(model: &YTransitionModel, k: usize, previous: Option<&Subspace>, settings: &Settings) -> (Subspace, bool) {
    match pk_map(model, k, settings.enumeration_cap) {
        Ok(m) => (Subspace::kernel_scaled(&m, settings.rank_tol, 0.0).with_tol(settings.rank_tol), false),
        Err(_) => {
            let base = match previous {
                Some(k) => k.clone(),
                None => Subspace::kernel(&Matrix::from_element(1, model.d(), 1.0), settings.rank_tol),
            };
            (kernel_by_recursion(model, &base, settings), true)
        }
    }
}

pub fn observability_profile(model: &YTransitionModel, settings: &Settings) -> ObservabilityProfile {
    let (first, mut used_recursion) = kernel_at(model, 1, None, settings);
    let mut kernels = vec![first];
    loop {
        let k = kernels.len();
        let (next, rec) = kernel_at(model, k + 1, kernels.last(), settings);
        used_recursion |= rec;
        if next.dim() >= kernels[k - 1].dim() || k > model.d() {
            break;
        }
        kernels.push(next);
    }
    let k_w = kernels.len();
    let d_w = model.d() - kernels[k_w - 1].dim();
    ObservabilityProfile { k_w, d_w, kernels, used_recursion }
}

/// The quotient V_X / Ker P^{k_W}, represented by the orthonormal complement of the kernel.
#[derive(Debug, Clone)]
pub struct Quotient {
    pub kernel: Subspace,
    /// d x d_W matrix with orthonormal columns spanning the complement of the kernel.
    pub basis: Matrix,
    /// [W_y] = Q^T W_y Q for each y.
    pub actions: Vec<Matrix>,
}

impl Quotient {
    pub fn new(model: &YTransitionModel, profile: &ObservabilityProfile, settings: &Settings) -> Result<Self> {
        let kernel = profile.kernel().clone();
        let basis = kernel.complement().basis().clone();
        let d = model.d();
        let comp = Matrix::identity(d, d) - kernel.projector();
        let mut actions = Vec::with_capacity(model.dy());
        for (y, w) in model.matrices().iter().enumerate() {
            let leak = if kernel.dim() == 0 { 0.0 } else { (&comp * w * kernel.basis()).amax() };
            if leak > settings.residual_tol {
                return Err(Error::InternalConsistency(format!(
                    "W_{y} does not map the observability kernel into itself (residual {leak:.3e})"
                )));
            }
            actions.push(basis.transpose() * w * &basis);
        }
        Ok(Quotient { kernel, basis, actions })
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Coordinates [v] of the class of v.
    pub fn coords(&self, v: &Vector) -> Vector {
        self.basis.transpose() * v
    }

    /// Largest |(I - P_K) W_y k| over unit kernel vectors k.
    pub fn invariance_residual(&self, model: &YTransitionModel) -> f64 {
        if self.kernel.dim() == 0 {
            return 0.0;
        }
        let d = model.d();
        let comp = Matrix::identity(d, d) - self.kernel.projector();
        model
            .matrices()
            .iter()
            .map(|w| (&comp * w * self.kernel.basis()).amax())
            .fold(0.0, f64::max)
    }
}

/// [W_y] in the orthonormal quotient basis.
pub fn quotient_action(model: &YTransitionModel, y: usize, settings: &Settings) -> Result<Matrix> {
    if y >= model.dy() {
        return Err(Error::InvalidArgument(format!("output {y} outside 0..{}", model.dy())));
    }
    let profile = observability_profile(model, settings);
    let q = Quotient::new(model, &profile, settings)?;
    Ok(q.actions[y].clone())
}

/// Reachable spaces V^1(P) <= ... <= V^{k_PW}(P) in quotient coordinates.
#[derive(Debug, Clone)]
pub struct ReachabilityProfile {
    pub k_pw: usize,
    pub d_pw: usize,
    pub spaces: Vec<Subspace>,
    pub quotient: Quotient,
    pub observability: ObservabilityProfile,
}

impl ReachabilityProfile {
    /// V^{k_PW}(P) in quotient coordinates.
    pub fn space(&self) -> &Subspace {
        self.spaces.last().expect("reachable chain is never empty")
    }

    /// Ker P^{k_W} + (preimage of the reachable space), as a subspace of R^d.
    pub fn lifted_space(&self) -> Subspace {
        let reach = &self.quotient.basis * self.space().basis();
        let both = numerics::hstack(&[self.quotient.kernel.basis().clone(), reach]);
        Subspace::span_scaled(&both, self.space().tol(), 1.0).with_tol(self.space().tol())
    }

    /// Orthonormal basis R of the reachable space inside the quotient (d_W x d_PW).
    pub fn reach_basis(&self) -> &Matrix {
        self.space().basis()
    }
}

pub fn reachability_profile(model: &YTransitionModel, p: &Distribution, settings: &Settings) -> Result<ReachabilityProfile> {
    if p.len() != model.d() {
        return Err(Error::DimensionMismatch(format!("distribution of length {} for {} states", p.len(), model.d())));
    }
    let observability = observability_profile(model, settings);
    let quotient = Quotient::new(model, &observability, settings)?;
    let tol = settings.rank_tol;
    let n = quotient.dim();
    let start = quotient.coords(p.p());
    let mut current = Subspace::from_vectors(n, &[start], tol);
    let mut chain: Vec<Subspace> = Vec::new();
    loop {
        let mut cols = vec![current.basis().clone()];
        for a in &quotient.actions {
            cols.push(a * current.basis());
        }
        let next = Subspace::span_scaled(&numerics::hstack(&cols), tol, 0.0).with_tol(tol);
        if next.dim() <= current.dim() {
            if chain.is_empty() {
                chain.push(current);
            }
            break;
        }
        chain.push(next.clone());
        current = next;
    }
    let k_pw = chain.len();
    let d_pw = chain[k_pw - 1].dim();
    Ok(ReachabilityProfile { k_pw, d_pw, spaces: chain, quotient, observability })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Genericity {
    pub e1: bool,
    pub e2: bool,
}

/// E1: trivial observability kernel and full reachable quotient. E2: full support.
pub fn check_genericity(model: &YTransitionModel, p: &Distribution, settings: &Settings) -> Result<Genericity> {
    let reach = reachability_profile(model, p, settings)?;
    let e1 = reach.observability.kernel().dim() == 0 && reach.d_pw == reach.quotient.dim();
    let e2 = model.has_full_support(settings.support_tol);
    Ok(Genericity { e1, e2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{from_independent, stationary, IndepModel};
    use nalgebra::{dmatrix, dvector};

    fn m2() -> YTransitionModel {
        from_independent(&IndepModel::new(dmatrix![0.7, 0.4; 0.3, 0.6], dmatrix![0.9, 0.2; 0.1, 0.8]).unwrap()).unwrap()
    }

    fn s2() -> YTransitionModel {
        let m = dmatrix![0.7, 0.4; 0.3, 0.6];
        YTransitionModel::new(vec![&m * 0.3, &m * 0.7]).unwrap()
    }

    #[test]
    fn word_indexing_round_trip() {
        for i in 0..27 {
            assert_eq!(word_index(&index_word(i, 3, 3), 3), i);
        }
        assert_eq!(word_index(&[1, 0], 2), 1);
        assert_eq!(word_index(&[0, 1], 2), 2);
    }

    #[test]
    fn pk_map_rows_are_products() {
        let m = m2();
        let p2 = pk_map(&m, 2, 1000).unwrap();
        // row for (y_2, y_1) = (1, 0) has index 2: 1^T W_1 W_0
        let expect = Matrix::from_element(1, 2, 1.0) * m.w(1) * m.w(0);
        assert!((p2.row(2) - expect).amax() < 1e-15);
        for c in 0..2 {
            assert!((p2.column(c).sum() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn m2_first_output_law() {
        let m = m2();
        let p = stationary(&m, &Settings::default()).unwrap();
        let law = exact_output_law(&m, &p, 1, 100).unwrap();
        assert!((law - dvector![0.6, 0.4]).amax() < 1e-14);
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(pk_map(&m2(), 21, 1_000_000), Err(Error::EnumerationCap { .. })));
    }

    #[test]
    fn observability_m2_and_s2() {
        let s = Settings::default();
        let p = observability_profile(&m2(), &s);
        assert_eq!((p.k_w, p.d_w, p.kernels[0].dim()), (1, 2, 0));
        let q = observability_profile(&s2(), &s);
        assert_eq!((q.k_w, q.d_w), (1, 1));
        assert!(q.kernel().contains(&dvector![1.0, -1.0]));
    }

    #[test]
    fn single_output_has_no_information() {
        let m = YTransitionModel::new(vec![dmatrix![0.7, 0.4; 0.3, 0.6]]).unwrap();
        let p = observability_profile(&m, &Settings::default());
        assert_eq!(p.d_w, 1);
        assert!(p.kernel().contains(&dvector![1.0, -1.0]));
    }

    #[test]
    fn quotient_of_s2_is_scalar() {
        let a = quotient_action(&s2(), 1, &Settings::default()).unwrap();
        assert_eq!(a.shape(), (1, 1));
        assert!((a[(0, 0)] - 0.7).abs() < 1e-14);
    }

    #[test]
    fn reachability_examples() {
        let s = Settings::default();
        let m = m2();
        let p = stationary(&m, &s).unwrap();
        let r = reachability_profile(&m, &p, &s).unwrap();
        assert_eq!((r.k_pw, r.d_pw), (1, 2));
        let r = reachability_profile(&s2(), &Distribution::uniform(2), &s).unwrap();
        assert_eq!(r.d_pw, 1);
        let one = YTransitionModel::new(vec![dmatrix![0.4], dmatrix![0.6]]).unwrap();
        let r = reachability_profile(&one, &Distribution::uniform(1), &s).unwrap();
        assert_eq!((r.k_pw, r.d_pw), (1, 1));
    }

    #[test]
    fn genericity_flags() {
        let s = Settings::default();
        let m = m2();
        let p = stationary(&m, &s).unwrap();
        assert_eq!(check_genericity(&m, &p, &s).unwrap(), Genericity { e1: true, e2: true });
        assert!(!check_genericity(&s2(), &Distribution::uniform(2), &s).unwrap().e1);
        let z = YTransitionModel::new(vec![dmatrix![0.5, 0.0; 0.2, 0.5], dmatrix![0.2, 0.5; 0.1, 0.0]]).unwrap();
        assert!(!check_genericity(&z, &Distribution::uniform(2), &s).unwrap().e2);
    }
}
