//! Equivalence of (model, initial law) pairs, intertwiner certificates and
//! generators of equivalent models for testing.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{stationary, Distribution, YTransitionModel};
use crate::numerics::{Matrix, Vector};
use crate::observables::{exact_output_law, reachability_profile, words_up_to, ReachabilityProfile};
use crate::settings::Settings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Equivalent,
    Distinguishable,
}

/// Linear map between the reachable spaces of two equivalent pairs.
#[derive(Debug, Clone)]
pub struct Intertwiner {
    /// d_PW x d_PW matrix in the orthonormal reachable-space bases.
    pub t: Matrix,
    /// Maps reachable coordinates of the first model back to R^{d_A}.
    pub embed_a: Matrix,
    /// Maps reachable coordinates of the second model back to R^{d_B}.
    pub embed_b: Matrix,
    /// Words whose reachable vectors were used as a basis.
    pub labels: Vec<Vec<usize>>,
    /// max_y |T [W_y] - [W'_y] T|, entrywise.
    pub action_residual: f64,
    /// |T [P] - [P']|, entrywise.
    pub initial_residual: f64,
}

impl Intertwiner {
    /// T expressed as a d_B x d_A matrix acting on state vectors.
    pub fn in_state_coordinates(&self) -> Matrix {
        &self.embed_b * &self.t * self.embed_a.transpose()
    }
}

#[derive(Debug, Clone)]
pub struct EquivalenceCertificate {
    pub verdict: Verdict,
    pub k_used: usize,
    pub tv_distance: f64,
    pub intertwiner: Option<Intertwiner>,
}

pub fn tv_distance(p: &Vector, q: &Vector) -> f64 {
    0.5 * (p - q).abs().sum()
}

/// Window length max(k_W, k_W') + max(k_PW, k_P'W') + 1.
pub fn equivalence_window(ra: &ReachabilityProfile, rb: &ReachabilityProfile) -> usize {
    ra.observability.k_w.max(rb.observability.k_w) + ra.k_pw.max(rb.k_pw) + 1
}

fn check_outputs(a: &YTransitionModel, b: &YTransitionModel) -> Result<()> {
    if a.dy() != b.dy() {
        return Err(Error::DimensionMismatch(format!("output alphabets of size {} and {}", a.dy(), b.dy())));
    }
    Ok(())
}

/// Compare the output laws of both pairs at the window that decides equivalence.
pub fn are_equivalent(
    a: &YTransitionModel,
    pa: &Distribution,
    b: &YTransitionModel,
    pb: &Distribution,
    tol: f64,
    settings: &Settings,
) -> Result<EquivalenceCertificate> {
    check_outputs(a, b)?;
    let ra = reachability_profile(a, pa, settings)?;
    let rb = reachability_profile(b, pb, settings)?;
    let k = equivalence_window(&ra, &rb);
    let la = exact_output_law(a, pa, k, settings.enumeration_cap)?;
    let lb = exact_output_law(b, pb, k, settings.enumeration_cap)?;
    let tv = tv_distance(&la, &lb);
    let verdict = if tv <= tol { Verdict::Equivalent } else { Verdict::Distinguishable };
    let intertwiner = if verdict == Verdict::Equivalent
        && pa.has_full_support(settings.support_tol)
        && pb.has_full_support(settings.support_tol)
    {
        Some(intertwiner_from_profiles(a, pa, &ra, b, pb, &rb, settings)?)
    } else {
        None
    };
    Ok(EquivalenceCertificate { verdict, k_used: k, tv_distance: tv, intertwiner })
}

/// Equivalence of the stationary processes of two models.
pub fn stationary_equivalent(
    a: &YTransitionModel,
    b: &YTransitionModel,
    tol: f64,
    settings: &Settings,
) -> Result<EquivalenceCertificate> {
    let pa = stationary(a, settings)?;
    let pb = stationary(b, settings)?;
    are_equivalent(a, &pa, b, &pb, tol, settings)
}

/// Build T with T [W_y] = [W'_y] T and T [P] = [P'] on the reachable spaces.
pub fn intertwiner(
    a: &YTransitionModel,
    pa: &Distribution,
    b: &YTransitionModel,
    pb: &Distribution,
    settings: &Settings,
) -> Result<Intertwiner> {
    check_outputs(a, b)?;
    let ra = reachability_profile(a, pa, settings)?;
    let rb = reachability_profile(b, pb, settings)?;
    intertwiner_from_profiles(a, pa, &ra, b, pb, &rb, settings)
}

// Reachable coordinates R^T Q^T W_word P for each word.
fn reachable_coords(model: &YTransitionModel, p: &Distribution, r: &ReachabilityProfile, words: &[&Vec<usize>]) -> Matrix {
    let embed = &r.quotient.basis * r.reach_basis();
    let mut g = Matrix::zeros(embed.ncols(), words.len());
    for (j, w) in words.iter().enumerate() {
        g.set_column(j, &(embed.transpose() * model.apply_word(w, p.p())));
    }
    g
}

fn intertwiner_from_profiles(
    a: &YTransitionModel,
    pa: &Distribution,
    ra: &ReachabilityProfile,
    b: &YTransitionModel,
    pb: &Distribution,
    rb: &ReachabilityProfile,
    settings: &Settings,
) -> Result<Intertwiner> {
    if ra.d_pw != rb.d_pw {
        return Err(Error::RankMismatch { left: ra.d_pw, right: rb.d_pw });
    }
    let n = ra.d_pw;
    let k1 = ra.k_pw.max(rb.k_pw);
    let k2 = ra.observability.k_w.max(rb.observability.k_w);
    let labels = words_up_to(a.dy(), k1);
    crate::observables::check_cap(a.dy(), k1 + k2, settings.enumeration_cap)?;

    // Columns of the joint matrix: P^{k2} W_word P, all identical for equivalent pairs.
    let columns: Vec<Vector> = labels
        .iter()
        .map(|w| crate::observables::output_law_of_vector(a, &a.apply_word(w, pa.p()), k2, settings.enumeration_cap))
        .collect::<Result<_>>()?;
    let picked = pivoted_selection(&columns, n, settings.rank_tol);
    if picked.len() != n {
        return Err(Error::InternalConsistency(format!(
            "observable matrix has rank {} but the reachable space has dimension {n}",
            picked.len()
        )));
    }
    let chosen: Vec<&Vec<usize>> = picked.iter().map(|&i| &labels[i]).collect();
    let ga = reachable_coords(a, pa, ra, &chosen);
    let gb = reachable_coords(b, pb, rb, &chosen);
    let ga_inv = ga
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("reachable vectors of the selected words are dependent".into()))?;
    let t = &gb * ga_inv;

    let ea = &ra.quotient.basis * ra.reach_basis();
    let eb = &rb.quotient.basis * rb.reach_basis();
    let mut action_residual: f64 = 0.0;
    for y in 0..a.dy() {
        let ay = ra.reach_basis().transpose() * &ra.quotient.actions[y] * ra.reach_basis();
        let by = rb.reach_basis().transpose() * &rb.quotient.actions[y] * rb.reach_basis();
        action_residual = action_residual.max((&t * ay - by * &t).amax());
    }
    let initial_residual = (&t * (ea.transpose() * pa.p()) - eb.transpose() * pb.p()).amax();
    Ok(Intertwiner {
        t,
        embed_a: ea,
        embed_b: eb,
        labels: chosen.into_iter().cloned().collect(),
        action_residual,
        initial_residual,
    })
}

/// Greedy column selection by largest residual norm (pivoted Gram-Schmidt).
fn pivoted_selection(columns: &[Vector], max: usize, rank_tol: f64) -> Vec<usize> {
    let scale = columns.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut residuals: Vec<Vector> = columns.to_vec();
    let mut picked = Vec::new();
    while picked.len() < max {
        let (best, norm) = residuals
            .iter()
            .enumerate()
            .filter(|(i, _)| !picked.contains(i))
            .map(|(i, r)| (i, r.norm()))
            .fold((usize::MAX, 0.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if best == usize::MAX || norm <= rank_tol * scale {
            break;
        }
        let q = &residuals[best] / norm;
        for r in residuals.iter_mut() {
            let c = q.dot(r);
            *r -= &q * c;
        }
        picked.push(best);
    }
    picked
}

fn check_perm(perm: &[usize], d: usize) -> Result<()> {
    let mut seen = vec![false; d];
    if perm.len() != d {
        return Err(Error::InvalidArgument(format!("permutation of length {} for {d} states", perm.len())));
    }
    for &i in perm {
        if i >= d || seen[i] {
            return Err(Error::InvalidArgument(format!("{perm:?} is not a bijection on 0..{d}")));
        }
        seen[i] = true;
    }
    Ok(())
}

/// Relabel states: W'_y(i|j) = W_y(perm[i]|perm[j]).
pub fn permuted(model: &YTransitionModel, perm: &[usize]) -> Result<YTransitionModel> {
    let d = model.d();
    check_perm(perm, d)?;
    let w = model
        .matrices()
        .iter()
        .map(|m| Matrix::from_fn(d, d, |i, j| m[(perm[i], perm[j])]))
        .collect();
    YTransitionModel::new(w)
}

/// P'(i) = P(perm[i]).
pub fn permute_distribution(p: &Distribution, perm: &[usize]) -> Result<Distribution> {
    check_perm(perm, p.len())?;
    Distribution::new(Vector::from_fn(p.len(), |i, _| p.p()[perm[i]]))
}

/// Split state `x` into two copies receiving its incoming mass in proportions
/// (split, 1 - split). The copy gets index d.
pub fn duplicate_state(
    model: &YTransitionModel,
    p: &Distribution,
    x: usize,
    split: f64,
) -> Result<(YTransitionModel, Distribution)> {
    let d = model.d();
    if x >= d {
        return Err(Error::InvalidArgument(format!("state {x} outside 0..{d}")));
    }
    if !(split > 0.0 && split < 1.0) {
        return Err(Error::InvalidArgument(format!("split {split} is not in (0, 1)")));
    }
    let w = model
        .matrices()
        .iter()
        .map(|m| {
            let mut out = Matrix::zeros(d + 1, d + 1);
            out.view_mut((0, 0), (d, d)).copy_from(m);
            for j in 0..d {
                out[(x, j)] = split * m[(x, j)];
                out[(d, j)] = (1.0 - split) * m[(x, j)];
            }
            let copy = out.column(x).into_owned();
            out.set_column(d, &copy);
            out
        })
        .collect();
    let mut q = Vector::zeros(d + 1);
    q.rows_mut(0, d).copy_from(p.p());
    q[x] = split * p.p()[x];
    q[d] = (1.0 - split) * p.p()[x];
    Ok((YTransitionModel::new(w)?, Distribution::new(q)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{from_independent, IndepModel};
    use nalgebra::dmatrix;

    fn m2() -> YTransitionModel {
        from_independent(&IndepModel::new(dmatrix![0.7, 0.4; 0.3, 0.6], dmatrix![0.9, 0.2; 0.1, 0.8]).unwrap()).unwrap()
    }

    #[test]
    fn reflexive() {
        let s = Settings::default();
        let m = m2();
        let p = stationary(&m, &s).unwrap();
        let c = are_equivalent(&m, &p, &m, &p, 1e-9, &s).unwrap();
        assert_eq!(c.verdict, Verdict::Equivalent);
        assert_eq!(c.tv_distance, 0.0);
        let t = c.intertwiner.unwrap();
        assert!((t.t - Matrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn swap_is_equivalent_with_permutation_certificate() {
        let s = Settings::default();
        let m = m2();
        let p = stationary(&m, &s).unwrap();
        let mp = permuted(&m, &[1, 0]).unwrap();
        let pp = permute_distribution(&p, &[1, 0]).unwrap();
        let c = are_equivalent(&m, &p, &mp, &pp, 1e-9, &s).unwrap();
        assert_eq!(c.verdict, Verdict::Equivalent);
        let t = c.intertwiner.unwrap().in_state_coordinates();
        assert!((t - dmatrix![0.0, 1.0; 1.0, 0.0]).amax() < 1e-10);
    }

    #[test]
    fn perturbed_is_distinguishable() {
        let s = Settings::default();
        let m = m2();
        let mut w = m.matrices().to_vec();
        w[0][(0, 0)] += 0.05;
        w[1][(0, 0)] -= 0.05;
        let b = YTransitionModel::new(w).unwrap();
        let p = stationary(&m, &s).unwrap();
        let c = are_equivalent(&m, &p, &b, &p, 1e-9, &s).unwrap();
        assert_eq!(c.verdict, Verdict::Distinguishable);
        assert!(c.tv_distance > 1e-3);
    }

    #[test]
    fn duplicate_preserves_law() {
        let s = Settings::default();
        let m = m2();
        let p = stationary(&m, &s).unwrap();
        let (big, pbig) = duplicate_state(&m, &p, 0, 0.5).unwrap();
        assert_eq!(big.d(), 3);
        let c = are_equivalent(&m, &p, &big, &pbig, 1e-9, &s).unwrap();
        assert_eq!(c.verdict, Verdict::Equivalent);
        let t = c.intertwiner.unwrap();
        assert!(t.action_residual < 1e-10 && t.initial_residual < 1e-10);
        assert!(duplicate_state(&m, &p, 0, 1.0).is_err());
    }

    #[test]
    fn bad_permutation() {
        assert!(permuted(&m2(), &[0, 0]).is_err());
    }
}
