mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use yhmm::equivalence::{are_equivalent, permute_distribution, permuted, stationary_equivalent, Verdict};
use yhmm::expfam::{at, column_constraint_residual, divergence, g1_project, m_rep, potential, GeneratorSet};
use yhmm::indep::decompose;
use yhmm::io::{parse_model, ModelFile};
use yhmm::model::{from_independent, sample, stationary};
use yhmm::numerics::{self, MatrixFamily};
use yhmm::observables::{exact_output_law, index_word, marginalize_last, observability_profile, word_index};
use yhmm::tangent::{tangent_report, tangent_spaces};
use yhmm::{Matrix, Settings, Subspace};

fn dims() -> impl Strategy<Value = (usize, usize)> {
    (2usize..=3, 2usize..=3)
}

fn random_generators(r: &mut impl Rng, d: usize, dy: usize, count: usize) -> Vec<MatrixFamily> {
    (0..count)
        .map(|_| MatrixFamily::new((0..dy).map(|_| Matrix::from_fn(d, d, |_, _| r.random_range(-1.0..1.0))).collect()).unwrap())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn output_laws_are_consistent_across_lengths(seed in any::<u64>(), (d, dy) in dims(), k in 1usize..4) {
        let mut r = rng(seed);
        let m = random_model(&mut r, d, dy);
        let p = random_distribution(&mut r, d);
        let cap = Settings::default().enumeration_cap;
        let long = exact_output_law(&m, &p, k + 1, cap).unwrap();
        let short = exact_output_law(&m, &p, k, cap).unwrap();
        prop_assert!((long.sum() - 1.0).abs() < 1e-12);
        prop_assert!(long.min() >= 0.0);
        prop_assert!((marginalize_last(&long, dy) - short).amax() < 1e-12);
    }

    #[test]
    fn word_indexing_round_trips(dy in 1usize..5, k in 0usize..5, raw in any::<u64>()) {
        let n = dy.pow(k as u32);
        let index = (raw as usize) % n.max(1);
        let word = index_word(index, k, dy);
        prop_assert_eq!(word.len(), k);
        prop_assert_eq!(word_index(&word, dy), index);
    }

    #[test]
    fn relabelled_states_are_equivalent(seed in any::<u64>(), (d, dy) in dims()) {
        let s = Settings::default();
        let mut r = rng(seed);
        let m = random_model(&mut r, d, dy);
        let p = random_distribution(&mut r, d);
        let perms = all_permutations(d);
        let perm = &perms[r.random_range(0..perms.len())];
        let b = permuted(&m, perm).unwrap();
        let pb = permute_distribution(&p, perm).unwrap();
        let c = are_equivalent(&m, &p, &b, &pb, 1e-10, &s).unwrap();
        prop_assert_eq!(c.verdict, Verdict::Equivalent);
        prop_assert_eq!(stationary_equivalent(&m, &b, 1e-10, &s).unwrap().verdict, Verdict::Equivalent);
    }

    #[test]
    fn tilted_models_are_stochastic(seed in any::<u64>(), (d, dy) in dims()) {
        let s = Settings::default();
        let mut r = rng(seed);
        let m = random_model(&mut r, d, dy);
        let gs = GeneratorSet::new(m, random_generators(&mut r, d, dy, 2), &s).unwrap();
        let theta = [r.random_range(-2.0..2.0), r.random_range(-2.0..2.0)];
        let pt = at(&gs, &theta, &s).unwrap();
        prop_assert!(pt.model.validate(1e-10).is_valid());
        prop_assert!(pt.lambda > 0.0);
        prop_assert!((potential(&gs, &theta, &s).unwrap() - pt.phi).abs() < 1e-12);
    }

    #[test]
    fn divergence_is_nonnegative(seed in any::<u64>(), (d, dy) in dims()) {
        let s = Settings::default();
        let mut r = rng(seed);
        let m = random_model(&mut r, d, dy);
        let gs = GeneratorSet::new(m, random_generators(&mut r, d, dy, 3), &s).unwrap();
        let a: Vec<f64> = (0..3).map(|_| r.random_range(-1.5..1.5)).collect();
        let b: Vec<f64> = (0..3).map(|_| r.random_range(-1.5..1.5)).collect();
        prop_assert!(divergence(&gs, &a, &b, &s).unwrap() >= -1e-12);
    }

    #[test]
    fn projected_directions_keep_columns_stochastic(seed in any::<u64>(), (d, dy) in dims()) {
        let s = Settings::default();
        let mut r = rng(seed);
        let m = random_model(&mut r, d, dy);
        let g = random_generators(&mut r, d, dy, 1).remove(0);
        let b = m_rep(&m, &g1_project(&m, &g, &s).unwrap());
        prop_assert!(column_constraint_residual(&b) < 1e-12);
    }

    #[test]
    fn tangent_dimensions_are_bounded(seed in any::<u64>(), (d, dy) in dims()) {
        let s = Settings::default();
        let mut r = rng(seed);
        let m = random_model(&mut r, d, dy);
        let p = random_distribution(&mut r, d);
        let rep = tangent_report(&m, Some(&p), &s).unwrap();
        prop_assert_eq!(rep.dim_l1, dy * d * d - d);
        prop_assert!(rep.local_dim_asymptotic <= d * d * (dy - 1));
        prop_assert!(rep.local_dim_fixed <= rep.dim_l1);
        prop_assert!(rep.containments_hold);
        let sp = tangent_spaces(&m, Some(&p), &s).unwrap();
        prop_assert!(sp.l1.contains_subspace(&sp.fixed).unwrap());
        prop_assert!(sp.l1.contains_subspace(&sp.asymptotic).unwrap());
    }

    #[test]
    fn observability_index_is_at_most_d(seed in any::<u64>(), (d, dy) in dims()) {
        let s = Settings::default();
        let mut r = rng(seed);
        let m = random_model_with_floor(&mut r, d, dy, 0.0);
        let prof = observability_profile(&m, &s);
        prop_assert!(prof.k_w <= d);
        prop_assert_eq!(prof.kernels.len(), prof.k_w);
    }

    #[test]
    fn factorization_reproduces_the_law(seed in any::<u64>(), (d, dy) in dims()) {
        let s = Settings::default();
        let mut r = rng(seed);
        let im = random_indep(&mut r, d, dy);
        let m = from_independent(&im).unwrap();
        let rep = decompose(&m, &s).unwrap();
        if let Some(found) = rep.indep() {
            let back = from_independent(found).unwrap();
            let p = stationary(&m, &s).unwrap();
            let q = stationary(&back, &s).unwrap();
            let cap = s.enumeration_cap;
            let tv = yhmm::equivalence::tv_distance(&exact_output_law(&m, &p, 4, cap).unwrap(), &exact_output_law(&back, &q, 4, cap).unwrap());
            prop_assert!(tv < 1e-8);
        }
    }

    #[test]
    fn model_files_round_trip(seed in any::<u64>(), (d, dy) in dims()) {
        let s = Settings::default();
        let mut r = rng(seed);
        let m = random_model(&mut r, d, dy);
        let p = random_distribution(&mut r, d);
        let text = serde_json::to_string(&ModelFile::from_model(&m, Some(&p))).unwrap();
        let back = parse_model(&text, &s).unwrap();
        for y in 0..dy {
            prop_assert_eq!(back.y_model().w(y), m.w(y));
        }
        let p0 = back.p0.unwrap();
        prop_assert!((p0.p() - p.p()).amax() < 1e-15);
    }

    #[test]
    fn sampling_is_reproducible(seed in any::<u64>(), (d, dy) in dims()) {
        let mut r = rng(seed);
        let m = random_model(&mut r, d, dy);
        let p = random_distribution(&mut r, d);
        let a = sample(&m, &p, 20, &mut rng(seed ^ 1)).unwrap();
        let b = sample(&m, &p, 20, &mut rng(seed ^ 1)).unwrap();
        prop_assert_eq!(a.outputs(), b.outputs());
        prop_assert_eq!(a.outputs().len(), 20);
    }

    #[test]
    fn subspace_dimensions_add_up(seed in any::<u64>(), n in 3usize..7) {
        let mut r = rng(seed);
        let ka = r.random_range(0..=n);
        let kb = r.random_range(0..=n);
        let shared = r.random_range(0..=ka.min(kb));
        let common = Matrix::from_fn(n, shared, |_, _| r.random_range(-1.0..1.0));
        let extra_a = Matrix::from_fn(n, ka - shared, |_, _| r.random_range(-1.0..1.0));
        let extra_b = Matrix::from_fn(n, kb - shared, |_, _| r.random_range(-1.0..1.0));
        let a = Subspace::span(&numerics::hstack(&[common.clone(), extra_a]), 1e-9);
        let b = Subspace::span(&numerics::hstack(&[common, extra_b]), 1e-9);
        let sum = numerics::sum(&[&a, &b]).unwrap();
        let meet = numerics::intersect(&a, &b).unwrap();
        prop_assert_eq!(sum.dim() + meet.dim(), a.dim() + b.dim());
        prop_assert!(a.contains_subspace(&meet).unwrap() && b.contains_subspace(&meet).unwrap());
    }
}
