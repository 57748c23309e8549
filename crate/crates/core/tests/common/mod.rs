#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use yhmm::{Distribution, IndepModel, Matrix, Vector, YTransitionModel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normalize_columns(m: &mut Matrix) {
    for mut c in m.column_iter_mut() {
        let s = c.sum();
        c /= s;
    }
}

/// Entries drawn from [lo, 1], normalized so that the sum over y is column-stochastic.
pub fn random_model_with_floor(r: &mut impl Rng, d: usize, dy: usize, lo: f64) -> YTransitionModel {
    let raw: Vec<Matrix> = (0..dy).map(|_| DMatrix::from_fn(d, d, |_, _| r.random_range(lo..1.0))).collect();
    let mut sums = vec![0.0; d];
    for m in &raw {
        for (xp, s) in sums.iter_mut().enumerate() {
            *s += m.column(xp).sum();
        }
    }
    let mats = raw.into_iter().map(|m| Matrix::from_fn(d, d, |x, xp| m[(x, xp)] / sums[xp])).collect();
    YTransitionModel::new(mats).unwrap()
}

pub fn random_model(r: &mut impl Rng, d: usize, dy: usize) -> YTransitionModel {
    random_model_with_floor(r, d, dy, 0.05)
}

pub fn random_stochastic(r: &mut impl Rng, rows: usize, cols: usize, lo: f64) -> Matrix {
    let mut m = Matrix::from_fn(rows, cols, |_, _| r.random_range(lo..1.0));
    normalize_columns(&mut m);
    m
}

pub fn random_indep(r: &mut impl Rng, d: usize, dy: usize) -> IndepModel {
    IndepModel::new(random_stochastic(r, d, d, 0.05), random_stochastic(r, dy, d, 0.05)).unwrap()
}

pub fn random_distribution(r: &mut impl Rng, d: usize) -> Distribution {
    let v = Vector::from_fn(d, |_, _| r.random_range(0.1..1.0));
    let s = v.sum();
    Distribution::new(v / s).unwrap()
}

/// A two-state model in which every W_y has equal column sums, so that the output
/// probability does not depend on the hidden state.
pub fn two_state_all_degenerate(r: &mut impl Rng, dy: usize) -> YTransitionModel {
    let weights: Vec<f64> = (0..dy).map(|_| r.random_range(0.2..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mats = weights
        .iter()
        .map(|w| {
            let s = w / total;
            let a = r.random_range(0.1..0.9);
            let b = r.random_range(0.1..0.9);
            Matrix::from_row_slice(2, 2, &[a * s, b * s, (1.0 - a) * s, (1.0 - b) * s])
        })
        .collect();
    YTransitionModel::new(mats).unwrap()
}

/// Move `delta` of mass from W_{y2}(x2|xp) to W_{y1}(x1|xp), keeping stochasticity.
pub fn perturb(r: &mut impl Rng, m: &YTransitionModel, delta: f64) -> YTransitionModel {
    let d = m.d();
    let dy = m.dy();
    loop {
        let xp = r.random_range(0..d);
        let (y1, x1) = (r.random_range(0..dy), r.random_range(0..d));
        let (y2, x2) = (r.random_range(0..dy), r.random_range(0..d));
        if (y1, x1) == (y2, x2) || m.w(y2)[(x2, xp)] <= delta + 1e-3 {
            continue;
        }
        let mut mats = m.matrices().to_vec();
        mats[y1][(x1, xp)] += delta;
        mats[y2][(x2, xp)] -= delta;
        return YTransitionModel::new(mats).unwrap();
    }
}

pub fn all_permutations(d: usize) -> Vec<Vec<usize>> {
    use itertools::Itertools;
    (0..d).permutations(d).collect()
}
