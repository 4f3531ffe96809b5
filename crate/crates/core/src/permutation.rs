//! Label-permutation significance levels for selected couples.
//!
//! For permutation `t = 1..T` the labels are shuffled once and every target
//! couple is rescored on the shuffled labels. The p-value of a couple is
//!
//! ```text
//! p = #{t : ŵ⁽ᵗ⁾ ≥ ŵ_observed} / T
//! ```
//!
//! with no +1 correction, so `p = 0` can be reported.
//!
//! Shuffling labels moves neither the marginal τ̂ of a couple nor the class
//! counts, so both are computed once and reused for every permutation.
//!
//! Permutation `t` is drawn with `ChaCha8Rng::seed_from_u64(seed)` switched
//! to stream `t`, then a Fisher-Yates shuffle of `0..n`
//! (`rand::seq::SliceRandom::shuffle`). Each permutation therefore depends
//! only on `(seed, t)`, not on which thread draws it.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::Dataset;
use crate::engine::{check_class_sizes, kif_score, score_from_counts, ClassSizePolicy};
use crate::error::{KifError, Result};
use crate::pairwise::{ClassLayout, ConcordanceIndex, KernelChoice, Scratch};
use crate::rank_stats::{tau_from_concordant, ClassPartition};

pub const DEFAULT_PERMUTATIONS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PermutationPlan {
    /// Number of permutations `T`.
    pub permutations: u64,
    pub seed: u64,
    /// Couples as column indices of the dataset, `j < l`.
    pub pairs: Vec<(usize, usize)>,
    pub class_policy: ClassSizePolicy,
}

impl PermutationPlan {
    pub fn new(pairs: Vec<(usize, usize)>, permutations: u64, seed: u64) -> Self {
        Self {
            permutations,
            seed,
            pairs,
            class_policy: ClassSizePolicy::Strict,
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.permutations == 0 {
            return Err(KifError::InvalidConfig(
                "permutation count must be >= 1".into(),
            ));
        }
        for &(j, l) in &self.pairs {
            if j >= l || l >= p {
                return Err(KifError::InvalidPair { j, l, p });
            }
        }
        Ok(())
    }
}

/// Source of the label permutation used at replicate `t`.
pub trait PermutationSource: Sync {
    /// Fills `perm` (length n) with a permutation of `0..n`.
    fn fill(&self, t: u64, perm: &mut [usize]);
}

/// Counter-based ChaCha8 substreams, one per replicate.
#[derive(Debug, Clone, Copy)]
pub struct SeededPermutations {
    pub seed: u64,
}

impl PermutationSource for SeededPermutations {
    fn fill(&self, t: u64, perm: &mut [usize]) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(t);
        for (i, v) in perm.iter_mut().enumerate() {
            *v = i;
        }
        perm.shuffle(&mut rng);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairPValue {
    pub j: usize,
    pub l: usize,
    pub observed: f64,
    /// Permutations with `ŵ⁽ᵗ⁾ ≥ observed`.
    pub exceedances: u64,
    pub p_value: f64,
}

struct Prepared {
    part: ClassPartition,
    index: ConcordanceIndex,
    /// Column slot in `index` of each target pair.
    slots: Vec<(usize, usize)>,
    /// Marginal τ̂ of each target pair.
    taus: Vec<f64>,
    observed: Vec<f64>,
}

fn prepare(data: &Dataset, plan: &PermutationPlan) -> Result<Prepared> {
    plan.validate(data.p())?;
    let part = data.labels().partition();
    check_class_sizes(&part, plan.class_policy)?;

    let mut cols: Vec<usize> = plan.pairs.iter().flat_map(|&(j, l)| [j, l]).collect();
    cols.sort_unstable();
    cols.dedup();
    let slot = |c: usize| cols.binary_search(&c).expect("column indexed");
    let slots: Vec<(usize, usize)> = plan
        .pairs
        .iter()
        .map(|&(j, l)| (slot(j), slot(l)))
        .collect();
    let columns: Vec<&[f64]> = cols.iter().map(|&c| data.column(c)).collect();
    let index = ConcordanceIndex::build(&columns, KernelChoice::Auto);

    let layout = ClassLayout::new(part.class_of(), part.num_classes());
    let mut scratch = Scratch::default();
    let mut class_counts = vec![0u64; part.num_classes()];
    let mut taus = Vec::with_capacity(slots.len());
    let mut observed = Vec::with_capacity(slots.len());
    for &(a, b) in &slots {
        let total = index.counts(a, b, &layout, &mut scratch, &mut class_counts);
        let tau = tau_from_concordant(total, data.n());
        taus.push(tau);
        observed.push(score_from_counts(tau, &class_counts, &part));
    }
    Ok(Prepared {
        part,
        index,
        slots,
        taus,
        observed,
    })
}

/// Permutation p-values for `plan.pairs`, in plan order.
pub fn permutation_pvalues(data: &Dataset, plan: &PermutationPlan) -> Result<Vec<PairPValue>> {
    permutation_pvalues_with(data, plan, &SeededPermutations { seed: plan.seed })
}

/// As [`permutation_pvalues`] with an explicit permutation source.
pub fn permutation_pvalues_with<S: PermutationSource>(
    data: &Dataset,
    plan: &PermutationPlan,
    source: &S,
) -> Result<Vec<PairPValue>> {
    let prep = prepare(data, plan)?;
    let n = data.n();
    let k = prep.part.num_classes();
    let m = prep.slots.len();
    // contiguous blocks of replicates per task keep scheduling overhead low
    let block = 256u64;
    let blocks: Vec<u64> = (0..plan.permutations).step_by(block as usize).collect();

    let counts = blocks
        .par_iter()
        .map_init(
            || {
                (
                    vec![0usize; n],
                    ClassLayout::new(prep.part.class_of(), k),
                    Scratch::default(),
                    vec![0u64; k],
                )
            },
            |(perm, layout, scratch, class_counts), &start| {
                let mut exceed = vec![0u64; m];
                let end = (start + block).min(plan.permutations);
                for t in start..end {
                    source.fill(t, perm);
                    layout.set_permuted(prep.part.class_of(), perm);
                    for (i, &(a, b)) in prep.slots.iter().enumerate() {
                        prep.index.counts(a, b, layout, scratch, class_counts);
                        let w = score_from_counts(prep.taus[i], class_counts, &prep.part);
                        if w >= prep.observed[i] {
                            exceed[i] += 1;
                        }
                    }
                }
                exceed
            },
        )
        .reduce(
            || vec![0u64; m],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );

    Ok(plan
        .pairs
        .iter()
        .zip(counts)
        .zip(&prep.observed)
        .map(|((&(j, l), exceedances), &observed)| PairPValue {
            j,
            l,
            observed,
            exceedances,
            p_value: exceedances as f64 / plan.permutations as f64,
        })
        .collect())
}

/// Scores of the target pairs under permutation `t`, using the cached
/// marginal τ̂.
pub fn permuted_scores<S: PermutationSource>(
    data: &Dataset,
    plan: &PermutationPlan,
    source: &S,
    t: u64,
) -> Result<Vec<f64>> {
    let prep = prepare(data, plan)?;
    let mut perm = vec![0usize; data.n()];
    source.fill(t, &mut perm);
    let mut layout = ClassLayout::new(prep.part.class_of(), prep.part.num_classes());
    layout.set_permuted(prep.part.class_of(), &perm);
    let mut scratch = Scratch::default();
    let mut class_counts = vec![0u64; prep.part.num_classes()];
    Ok(prep
        .slots
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| {
            prep.index
                .counts(a, b, &layout, &mut scratch, &mut class_counts);
            score_from_counts(prep.taus[i], &class_counts, &prep.part)
        })
        .collect())
}

/// Scores of the target pairs under permutation `t`, recomputed from
/// scratch with the standalone estimators (no cached τ̂).
pub fn permuted_scores_uncached<S: PermutationSource>(
    data: &Dataset,
    plan: &PermutationPlan,
    source: &S,
    t: u64,
) -> Result<Vec<f64>> {
    plan.validate(data.p())?;
    let mut perm = vec![0usize; data.n()];
    source.fill(t, &mut perm);
    let part = data.labels().partition().permuted(&perm);
    plan.pairs
        .iter()
        .map(|&(j, l)| kif_score(data.column(j), data.column(l), &part, plan.class_policy))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rank_stats::LabelVector;
    use rand::Rng;

    struct Identity;

    impl PermutationSource for Identity {
        fn fill(&self, _t: u64, perm: &mut [usize]) {
            for (i, v) in perm.iter_mut().enumerate() {
                *v = i;
            }
        }
    }

    fn noise(seed: u64, n: usize, p: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..n * p).map(|_| rng.gen::<f64>()).collect();
        let labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        Dataset::new(n, p, values, LabelVector::from_values(&labels).unwrap()).unwrap()
    }

    #[test]
    fn identity_permutation_gives_one() {
        let data = noise(1, 30, 4);
        let plan = PermutationPlan::new(vec![(0, 1), (2, 3)], 1, 0);
        let res = permutation_pvalues_with(&data, &plan, &Identity).unwrap();
        assert!(res.iter().all(|r| r.p_value == 1.0 && r.exceedances == 1));
    }

    #[test]
    fn extreme_couple_has_zero_pvalue() {
        // concordant in class a, discordant in class b, marginal τ̂ near 0
        let n = 40;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<f64> = (0..n).map(|i| i as f64 + rng.gen::<f64>() * 0.1).collect();
        let mut labels = Vec::new();
        let mut y = Vec::new();
        for (i, &xi) in x.iter().enumerate() {
            if i % 2 == 0 {
                labels.push("a");
                y.push(xi);
            } else {
                labels.push("b");
                y.push(-xi);
            }
        }
        let data =
            Dataset::from_columns(vec![x, y], LabelVector::from_values(&labels).unwrap()).unwrap();
        let plan = PermutationPlan::new(vec![(0, 1)], 2000, 9);
        let res = permutation_pvalues(&data, &plan).unwrap();
        assert!(res[0].observed > 0.9);
        assert_eq!(res[0].p_value, 0.0);
    }

    #[test]
    fn seeded_stream_is_a_permutation_and_reproducible() {
        let src = SeededPermutations { seed: 42 };
        let mut a = vec![0; 50];
        let mut b = vec![0; 50];
        src.fill(17, &mut a);
        src.fill(17, &mut b);
        assert_eq!(a, b);
        src.fill(18, &mut b);
        assert_ne!(a, b);
        let mut sorted = a.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn pvalues_on_grid() {
        let data = noise(3, 25, 5);
        let plan = PermutationPlan::new(vec![(0, 1), (1, 4), (2, 3)], 40, 7);
        for r in permutation_pvalues(&data, &plan).unwrap() {
            assert_eq!(r.p_value * 40.0, r.exceedances as f64);
            assert!((0.0..=1.0).contains(&r.p_value));
        }
    }

    #[test]
    fn cache_matches_recomputation() {
        let data = noise(4, 33, 6);
        let plan = PermutationPlan::new(vec![(0, 1), (0, 5), (3, 4)], 10, 5);
        let src = SeededPermutations { seed: 5 };
        for t in 0..10 {
            assert_eq!(
                permuted_scores(&data, &plan, &src, t).unwrap(),
                permuted_scores_uncached(&data, &plan, &src, t).unwrap()
            );
        }
    }

    #[test]
    fn invalid_pairs_rejected() {
        let data = noise(5, 10, 3);
        for pairs in [vec![(1, 0)], vec![(0, 3)], vec![(2, 2)]] {
            let plan = PermutationPlan::new(pairs, 10, 0);
            assert!(matches!(
                permutation_pvalues(&data, &plan),
                Err(KifError::InvalidPair { .. })
            ));
        }
        let plan = PermutationPlan::new(vec![(0, 1)], 0, 0);
        assert!(permutation_pvalues(&data, &plan).is_err());
    }
}
