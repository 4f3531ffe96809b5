//! Property checks that hold for every input: ranges, symmetries,
//! invariances, determinism and unbiasedness.

use kif_core::permutation::{permuted_scores, permuted_scores_uncached, SeededPermutations};
use kif_core::rank_stats::{concordant_pairs_fast, concordant_pairs_naive, kendall_tau_naive};
use kif_core::{
    class_partition, gen_setting3, kendall_tau_fast, kif_score, mvn_sample, permutation_pvalues,
    screen_all_pairs, ClassSizePolicy, CovarianceSpec, Dataset, KernelChoice, LabelVector,
    PermutationPlan, ScreeningConfig, ScreeningResult,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Paired vectors on a small integer grid so ties are common.
fn tied_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..60, 1u32..12).prop_flat_map(|(n, levels)| {
        let v = prop::collection::vec((0..levels).prop_map(f64::from), n);
        (v.clone(), v)
    })
}

/// A small dataset with 2 or 3 classes of at least two rows each.
fn dataset() -> impl Strategy<Value = Dataset> {
    (8usize..50, 3usize..7, 2u32..4, any::<u64>()).prop_map(|(n, p, k, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = (0..n * p)
            .map(|_| f64::from(rng.gen_range(0..20u32)))
            .collect();
        let mut codes: Vec<u32> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        for c in 0..k as usize {
            codes[2 * c] = c as u32;
            codes[2 * c + 1] = c as u32;
        }
        Dataset::new(n, p, values, LabelVector::from_values(&codes).unwrap()).unwrap()
    })
}

fn screen(data: &Dataset) -> ScreeningResult {
    screen_all_pairs(data, &ScreeningConfig::default()).unwrap()
}

fn score_bits(r: &ScreeningResult) -> Vec<(usize, usize, u64)> {
    r.ranked
        .iter()
        .map(|s| (s.j, s.l, s.score.to_bits()))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn tau_in_range_and_fast_equals_naive((x, y) in tied_pair()) {
        let naive = kendall_tau_naive(&x, &y).unwrap();
        prop_assert!((-1.0..=1.0).contains(&naive));
        prop_assert_eq!(concordant_pairs_fast(&x, &y).unwrap(), concordant_pairs_naive(&x, &y).unwrap());
        prop_assert_eq!(kendall_tau_fast(&x, &y).unwrap().to_bits(), naive.to_bits());
    }

    #[test]
    fn tau_symmetric((x, y) in tied_pair()) {
        prop_assert_eq!(kendall_tau_fast(&x, &y).unwrap(), kendall_tau_fast(&y, &x).unwrap());
    }

    #[test]
    fn tau_monotone_invariant((x, y) in tied_pair()) {
        let gx: Vec<f64> = x.iter().map(|v| v * v * v + 7.0).collect();
        let gy: Vec<f64> = y.iter().map(|v| (v / 4.0).exp()).collect();
        prop_assert_eq!(kendall_tau_fast(&gx, &gy).unwrap(), kendall_tau_fast(&x, &y).unwrap());
    }

    #[test]
    fn score_symmetric_and_bounded(data in dataset()) {
        let part = data.labels().partition();
        for j in 0..data.p() {
            for l in (j + 1)..data.p() {
                let a = kif_score(data.column(j), data.column(l), &part, ClassSizePolicy::Strict).unwrap();
                let b = kif_score(data.column(l), data.column(j), &part, ClassSizePolicy::Strict).unwrap();
                prop_assert_eq!(a.to_bits(), b.to_bits());
                prop_assert!((0.0..=2.0).contains(&a));
            }
        }
    }

    #[test]
    fn scores_invariant_under_monotone_maps_of_some_columns(data in dataset(), mask in any::<u8>()) {
        let columns: Vec<Vec<f64>> = (0..data.p())
            .map(|j| {
                let col = data.column(j);
                if mask >> (j % 8) & 1 == 1 {
                    col.iter().map(|v| (v / 3.0).exp()).collect()
                } else {
                    col.to_vec()
                }
            })
            .collect();
        let mapped = Dataset::from_columns(columns, data.labels().clone()).unwrap();
        let (a, b) = (screen(&data), screen(&mapped));
        prop_assert_eq!(score_bits(&a), score_bits(&b));
        prop_assert_eq!(a.selected, b.selected);
    }

    #[test]
    fn scores_invariant_under_row_permutation(data in dataset(), seed in any::<u64>()) {
        let mut perm: Vec<usize> = (0..data.n()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let shuffled = data.permute_rows(&perm).unwrap();
        prop_assert_eq!(score_bits(&screen(&data)), score_bits(&screen(&shuffled)));
    }

    #[test]
    fn renaming_classes_changes_nothing(data in dataset()) {
        let k = data.labels().num_classes() as u32;
        let codes: Vec<u32> = data.labels().codes().iter().map(|c| k - 1 - c).collect();
        let names: Vec<String> = (0..k).map(|c| format!("class{}", 100 - c)).collect();
        let renamed = data.with_labels(LabelVector::from_codes(codes, names).unwrap()).unwrap();
        prop_assert_eq!(score_bits(&screen(&data)), score_bits(&screen(&renamed)));
    }

    #[test]
    fn label_shuffle_keeps_priors(data in dataset(), seed in any::<u64>()) {
        let mut perm: Vec<usize> = (0..data.n()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let part = data.labels().partition();
        let shuffled = part.permuted(&perm);
        let mut a = part.priors();
        let mut b = shuffled.priors();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        prop_assert_eq!(a, b);
        // the screening engine on shuffled labels agrees with the
        // standalone estimator on the permuted partition
        let codes: Vec<u32> = perm.iter().map(|&i| data.labels().codes()[i]).collect();
        let names = data.labels().class_names().to_vec();
        let relabeled = data.with_labels(LabelVector::from_codes(codes, names).unwrap()).unwrap();
        for s in screen(&relabeled).ranked {
            let w = kif_score(data.column(s.j), data.column(s.l), &shuffled, ClassSizePolicy::Strict).unwrap();
            prop_assert_eq!(w.to_bits(), s.score.to_bits());
        }
    }

    #[test]
    fn kernels_agree(data in dataset()) {
        let run = |kernel| {
            let config = ScreeningConfig { kernel, ..ScreeningConfig::default() };
            score_bits(&screen_all_pairs(&data, &config).unwrap())
        };
        prop_assert_eq!(run(KernelChoice::Bitset), run(KernelChoice::Sorted));
    }

    #[test]
    fn cached_permuted_scores_match_recomputation(data in dataset(), seed in any::<u64>(), t in 0u64..1000) {
        let pairs: Vec<(usize, usize)> = (1..data.p()).map(|l| (0, l)).collect();
        let plan = PermutationPlan::new(pairs, 1, seed);
        let source = SeededPermutations { seed };
        let cached = permuted_scores(&data, &plan, &source, t).unwrap();
        let fresh = permuted_scores_uncached(&data, &plan, &source, t).unwrap();
        prop_assert_eq!(cached, fresh);
    }
}

#[test]
fn screening_identical_across_thread_counts() {
    let data = gen_setting3(150, 60, 41).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            let r = screen(&data);
            let pv = permutation_pvalues(
                &data,
                &PermutationPlan::new(r.selected[..3].to_vec(), 300, 2),
            )
            .unwrap();
            (score_bits(&r), r.selected, pv)
        })
    };
    let one = run(1);
    assert_eq!(one, run(2));
    assert_eq!(one, run(0));
}

#[test]
fn null_scores_shrink_with_n() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mean_max = |n: usize, rng: &mut ChaCha8Rng| {
        let mut total = 0.0;
        for _ in 0..10 {
            let values: Vec<f64> = (0..n * 8).map(|_| rng.gen()).collect();
            let lab: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            let data = Dataset::new(n, 8, values, LabelVector::from_values(&lab).unwrap()).unwrap();
            total += screen(&data).ranked[0].score;
        }
        total / 10.0
    };
    let small = mean_max(100, &mut rng);
    let large = mean_max(1600, &mut rng);
    // scores scale as n^{-1/2}: a sixteenfold n should cut them about fourfold
    assert!(large < small / 2.5, "{small} -> {large}");
}

#[test]
fn p_values_on_grid_and_reproducible() {
    let data = gen_setting3(80, 8, 43).unwrap();
    let plan = PermutationPlan::new(vec![(0, 1), (2, 3), (4, 7)], 250, 6);
    let a = permutation_pvalues(&data, &plan).unwrap();
    assert_eq!(a, permutation_pvalues(&data, &plan).unwrap());
    for pv in &a {
        assert!((0.0..=1.0).contains(&pv.p_value));
        assert_eq!(pv.p_value, pv.exceedances as f64 / 250.0);
    }
    let other = PermutationPlan { seed: 7, ..plan };
    assert_ne!(
        a.iter().map(|p| p.exceedances).collect::<Vec<_>>(),
        permutation_pvalues(&data, &other)
            .unwrap()
            .iter()
            .map(|p| p.exceedances)
            .collect::<Vec<_>>()
    );
}

#[test]
fn tau_hat_unbiased_for_gaussian_pairs() {
    // for a bivariate normal with correlation ρ, τ = (2/π)·arcsin ρ
    let rho: f64 = 0.5;
    let tau = 2.0 / std::f64::consts::PI * rho.asin();
    let cov = CovarianceSpec::block_constant(2, 0.0, vec![(0, 1, rho)]);
    let m = 2000;
    let n = 50;
    let estimates: Vec<f64> = (0..m)
        .map(|r| {
            let x = mvn_sample(&cov, n, 1000 + r as u64).unwrap();
            let a: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
            let b: Vec<f64> = (0..n).map(|i| x[(i, 1)]).collect();
            kendall_tau_fast(&a, &b).unwrap()
        })
        .collect();
    let mean = estimates.iter().sum::<f64>() / m as f64;
    let sd = (estimates.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt();
    let se = sd / (m as f64).sqrt();
    assert!(
        (mean - tau).abs() < 4.0 * se,
        "mean {mean} vs {tau} (se {se})"
    );
}

#[test]
fn conditional_tau_unbiased_within_class() {
    let rho: f64 = -0.6;
    let tau = 2.0 / std::f64::consts::PI * rho.asin();
    let cov = CovarianceSpec::block_constant(2, 0.0, vec![(0, 1, rho)]);
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let m = 1500;
    let estimates: Vec<f64> = (0..m)
        .map(|r| {
            let x = mvn_sample(&cov, 60, 5000 + r as u64).unwrap();
            let mut lab: Vec<u8> = (0..60).map(|_| rng.gen_range(0..2)).collect();
            lab[..4].copy_from_slice(&[0, 0, 1, 1]);
            let part = class_partition(&lab).unwrap();
            let a: Vec<f64> = (0..60).map(|i| x[(i, 0)]).collect();
            let b: Vec<f64> = (0..60).map(|i| x[(i, 1)]).collect();
            kif_core::conditional_kendall_tau(&a, &b, &part, 0).unwrap()
        })
        .collect();
    let mean = estimates.iter().sum::<f64>() / m as f64;
    let sd = (estimates.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt();
    assert!(
        (mean - tau).abs() < 4.0 * sd / (m as f64).sqrt(),
        "{mean} vs {tau}"
    );
}
