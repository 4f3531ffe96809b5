//! KIF scores for all feature pairs, ranking and selection of the screened
//! set.
//!
//! For a couple `(j, l)` the score is
//!
//! ```text
//! ŵ_{j,l} = Σ_k π̂_k · |τ̂_k(X_j, X_l) − τ̂(X_j, X_l)|
//! ```
//!
//! with τ̂ the marginal and τ̂_k the within-class strict Kendall estimator.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{KifError, Result};
use crate::pairwise::{ClassLayout, ConcordanceIndex, KernelChoice, Scratch};
use crate::rank_stats::{
    conditional_kendall_tau, kendall_tau_fast, tau_from_concordant, ClassPartition,
};

/// Upper bound of ŵ: each |τ̂_k − τ̂| ≤ 2 and the priors sum to one.
///
/// The population score never exceeds 1 for balanced binary labels, but
/// the empirical score can (e.g. two tight, internally concordant classes
/// whose cross-class pairs are all discordant).
pub const SCORE_MAX: f64 = 2.0;

/// How the screened set is chosen from the ranking.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SelectionRule {
    /// Top `⌈n / ln n⌉` couples.
    #[default]
    AutoTopD,
    /// Top `d` couples.
    TopD { d: usize },
    /// Couples with `ŵ > c · n^(−r)`.
    Threshold { c: f64, r: f64 },
}

/// A selection rule with its data-dependent quantities filled in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ResolvedRule {
    TopD { d: usize },
    Threshold { c: f64, r: f64, threshold: f64 },
}

/// `⌈n / ln n⌉`, the default number of couples kept.
pub fn default_top_d(n: usize) -> usize {
    let nf = n as f64;
    ((nf / nf.ln()).ceil() as usize).max(1)
}

impl SelectionRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SelectionRule::AutoTopD => Ok(()),
            SelectionRule::TopD { d } if d >= 1 => Ok(()),
            SelectionRule::TopD { .. } => Err(KifError::InvalidConfig("d must be >= 1".into())),
            SelectionRule::Threshold { c, r } => {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(KifError::InvalidConfig(format!("c must be > 0, got {c}")));
                }
                if !(0.0..0.5).contains(&r) {
                    return Err(KifError::InvalidConfig(format!(
                        "r must satisfy 0 <= r < 1/2, got {r}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn resolve(&self, n: usize) -> ResolvedRule {
        match *self {
            SelectionRule::AutoTopD => ResolvedRule::TopD {
                d: default_top_d(n),
            },
            SelectionRule::TopD { d } => ResolvedRule::TopD { d },
            SelectionRule::Threshold { c, r } => ResolvedRule::Threshold {
                c,
                r,
                threshold: c * (n as f64).powf(-r),
            },
        }
    }
}

/// What to do with classes that have fewer than two observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassSizePolicy {
    /// Refuse to score.
    #[default]
    Strict,
    /// Drop the class from the sum and flag it in the result.
    SkipClass,
}

/// Which scored pairs are kept in the result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Retention {
    /// Every evaluated pair.
    #[default]
    All,
    /// Only the selected head, tracked with bounded heaps. Same selected set
    /// as `All`.
    Head,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScreeningConfig {
    pub rule: SelectionRule,
    pub class_policy: ClassSizePolicy,
    /// Share of lowest-variance features dropped before pairing.
    pub prescreen_fraction: f64,
    pub retention: Retention,
    pub kernel: KernelChoice,
    /// Pairs per parallel work unit.
    pub chunk_size: usize,
}

impl Default for ScreeningConfig {
    fn default() -> Self {
        Self {
            rule: SelectionRule::AutoTopD,
            class_policy: ClassSizePolicy::Strict,
            prescreen_fraction: 0.0,
            retention: Retention::All,
            kernel: KernelChoice::Auto,
            chunk_size: 1024,
        }
    }
}

impl ScreeningConfig {
    pub fn validate(&self) -> Result<()> {
        self.rule.validate()?;
        check_fraction(self.prescreen_fraction)?;
        if self.chunk_size == 0 {
            return Err(KifError::InvalidConfig("chunk size must be >= 1".into()));
        }
        Ok(())
    }
}

/// One couple with its score and 1-based rank. `j < l` are feature ids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairScore {
    pub j: usize,
    pub l: usize,
    pub score: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Timing {
    pub prescreen_secs: f64,
    pub scoring_secs: f64,
    pub ranking_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScreeningResult {
    pub n: usize,
    /// Number of features the pairs were formed from.
    pub p: usize,
    pub pairs_evaluated: u64,
    /// Sorted by score descending, ties by `(j, l)`.
    pub ranked: Vec<PairScore>,
    /// Selected couples in rank order.
    pub selected: Vec<(usize, usize)>,
    pub config: ScreeningConfig,
    pub rule: ResolvedRule,
    /// Names of classes left out under [`ClassSizePolicy::SkipClass`].
    pub skipped_classes: Vec<String>,
    #[serde(skip)]
    pub timing: Timing,
}

impl ScreeningResult {
    pub fn score_of(&self, j: usize, l: usize) -> Option<f64> {
        let (j, l) = (j.min(l), j.max(l));
        self.ranked
            .iter()
            .find(|s| s.j == j && s.l == l)
            .map(|s| s.score)
    }

    pub fn rank_of(&self, j: usize, l: usize) -> Option<usize> {
        let (j, l) = (j.min(l), j.max(l));
        self.ranked
            .iter()
            .find(|s| s.j == j && s.l == l)
            .map(|s| s.rank)
    }

    pub fn is_selected(&self, j: usize, l: usize) -> bool {
        let (j, l) = (j.min(l), j.max(l));
        self.selected.contains(&(j, l))
    }
}

/// Checks class sizes against the policy and returns the skipped classes.
pub(crate) fn check_class_sizes(
    part: &ClassPartition,
    policy: ClassSizePolicy,
) -> Result<Vec<usize>> {
    let small = part.undersized_classes();
    match (policy, small.first()) {
        (ClassSizePolicy::Strict, Some(&k)) => Err(KifError::InsufficientClassSize {
            class: k,
            label: part.class_name(k).to_string(),
            size: part.count(k),
        }),
        _ => Ok(small),
    }
}

/// ŵ from the marginal τ̂ and exact within-class concordance counts.
/// Classes with fewer than two rows contribute nothing.
#[inline]
/// Sums per-class terms in ascending order, so the result does not depend
/// on how classes are numbered.
fn class_sum(terms: impl IntoIterator<Item = f64>) -> f64 {
    let mut buf = [0.0f64; 8];
    let mut spill = Vec::new();
    let mut len = 0;
    for t in terms {
        if len < buf.len() {
            buf[len] = t;
        } else {
            if spill.is_empty() {
                spill.extend_from_slice(&buf);
            }
            spill.push(t);
        }
        len += 1;
    }
    let terms = if spill.is_empty() {
        &mut buf[..len]
    } else {
        &mut spill[..]
    };
    if terms.len() > 2 {
        terms.sort_unstable_by(f64::total_cmp);
    }
    terms.iter().sum()
}

pub(crate) fn score_from_counts(tau: f64, class_counts: &[u64], part: &ClassPartition) -> f64 {
    let w = class_sum(class_counts.iter().enumerate().filter_map(|(k, &c)| {
        let nk = part.count(k);
        (nk >= 2).then(|| part.prior(k) * (tau_from_concordant(c, nk) - tau).abs())
    }));
    assert!(
        (0.0..=SCORE_MAX).contains(&w),
        "KIF score {w} outside [0, {SCORE_MAX}]"
    );
    w
}

/// ŵ for a single couple, from the standalone τ estimators.
pub fn kif_score(
    x_j: &[f64],
    x_l: &[f64],
    part: &ClassPartition,
    policy: ClassSizePolicy,
) -> Result<f64> {
    check_class_sizes(part, policy)?;
    let tau = kendall_tau_fast(x_j, x_l)?;
    if x_j.len() != part.n() {
        return Err(KifError::LengthMismatch {
            left: x_j.len(),
            right: part.n(),
        });
    }
    let mut terms = Vec::with_capacity(part.num_classes());
    for k in 0..part.num_classes() {
        if part.count(k) < 2 {
            continue;
        }
        let tau_k = conditional_kendall_tau(x_j, x_l, part, k)?;
        terms.push(part.prior(k) * (tau_k - tau).abs());
    }
    let w = class_sum(terms);
    assert!((0.0..=SCORE_MAX).contains(&w));
    Ok(w)
}

/// Ranking order: higher score first, then lexicographic `(j, l)`.
#[inline]
pub fn rank_order(a: (f64, usize, usize), b: (f64, usize, usize)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    score: f64,
    j: usize,
    l: usize,
}

impl Candidate {
    fn key(&self) -> (f64, usize, usize) {
        (self.score, self.j, self.l)
    }
}

// Greater = ranked later, so a max-heap keeps the worst retained pair on top.
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        rank_order(self.key(), other.key())
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

/// Number of unordered pairs among `p` features.
pub fn pair_count(p: usize) -> u64 {
    (p as u64) * (p as u64).saturating_sub(1) / 2
}

/// Iterates pairs `(a, b)`, `a < b < p`, row-major, starting at linear
/// index `start`.
fn pairs_from(p: usize, start: u64) -> impl Iterator<Item = (usize, usize)> {
    // first row whose cumulative pair count exceeds `start`
    let mut a = 0usize;
    let mut before = 0u64;
    while a + 1 < p && before + (p - 1 - a) as u64 <= start {
        before += (p - 1 - a) as u64;
        a += 1;
    }
    let b = a + 1 + (start - before) as usize;
    let mut cur = (a, b);
    std::iter::from_fn(move || {
        let (a, b) = cur;
        if a + 1 >= p {
            return None;
        }
        cur = if b + 1 < p {
            (a, b + 1)
        } else {
            (a + 1, a + 2)
        };
        Some((a, b))
    })
}

/// Scores every pair of columns of `data` and ranks them. Output does not
/// depend on the evaluation order or the number of threads.
pub fn screen_all_pairs(data: &Dataset, config: &ScreeningConfig) -> Result<ScreeningResult> {
    config.validate()?;
    let part = data.labels().partition();
    let skipped = check_class_sizes(&part, config.class_policy)?;
    let rule = config.rule.resolve(data.n());

    let t0 = Instant::now();
    let columns: Vec<&[f64]> = data.columns().collect();
    let index = ConcordanceIndex::build(&columns, config.kernel);
    let layout = ClassLayout::new(part.class_of(), part.num_classes());
    let ids = data.feature_ids();
    let p = data.p();
    let n = data.n();
    let total_pairs = pair_count(p);
    let chunk = config.chunk_size as u64;
    let starts: Vec<u64> = (0..total_pairs).step_by(chunk as usize).collect();

    let score_chunk = |scratch: &mut (Scratch, Vec<u64>), start: u64| -> Vec<Candidate> {
        let len = chunk.min(total_pairs - start) as usize;
        let (scratch, class_counts) = scratch;
        pairs_from(p, start)
            .take(len)
            .map(|(a, b)| {
                let total = index.counts(a, b, &layout, scratch, class_counts);
                let tau = tau_from_concordant(total, n);
                let score = score_from_counts(tau, class_counts, &part);
                let (j, l) = (ids[a].min(ids[b]), ids[a].max(ids[b]));
                Candidate { score, j, l }
            })
            .collect()
    };
    let init = || (Scratch::default(), vec![0u64; part.num_classes()]);

    let head_limit = match (config.retention, rule) {
        (Retention::Head, ResolvedRule::TopD { d }) => Some(d),
        _ => None,
    };
    let threshold = match rule {
        ResolvedRule::Threshold { threshold, .. } => Some(threshold),
        ResolvedRule::TopD { .. } => None,
    };

    let mut candidates: Vec<Candidate> = match (config.retention, head_limit) {
        (Retention::All, _) => starts
            .par_iter()
            .map_init(init, |s, &start| score_chunk(s, start))
            .flatten_iter()
            .collect(),
        (Retention::Head, Some(d)) => {
            let heaps = starts
                .par_iter()
                .map_init(init, |s, &start| {
                    let mut heap = BinaryHeap::with_capacity(d + 1);
                    for c in score_chunk(s, start) {
                        push_bounded(&mut heap, c, d);
                    }
                    heap
                })
                .reduce(BinaryHeap::new, |mut a, b| {
                    for c in b {
                        push_bounded(&mut a, c, d);
                    }
                    a
                });
            heaps.into_vec()
        }
        (Retention::Head, None) => {
            let t = threshold.unwrap_or(f64::NEG_INFINITY);
            starts
                .par_iter()
                .map_init(init, |s, &start| {
                    let mut v = score_chunk(s, start);
                    v.retain(|c| c.score > t);
                    v
                })
                .flatten_iter()
                .collect()
        }
    };
    let scoring_secs = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    candidates.par_sort_unstable_by(|a, b| rank_order(a.key(), b.key()));
    let ranked: Vec<PairScore> = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| PairScore {
            j: c.j,
            l: c.l,
            score: c.score,
            rank: i + 1,
        })
        .collect();
    let selected = select_couples(&ranked, &rule);
    let ranking_secs = t1.elapsed().as_secs_f64();

    Ok(ScreeningResult {
        n,
        p,
        pairs_evaluated: total_pairs,
        ranked,
        selected,
        config: config.clone(),
        rule,
        skipped_classes: skipped
            .iter()
            .map(|&k| part.class_name(k).to_string())
            .collect(),
        timing: Timing {
            prescreen_secs: 0.0,
            scoring_secs,
            ranking_secs,
        },
    })
}

fn push_bounded(heap: &mut BinaryHeap<Candidate>, c: Candidate, limit: usize) {
    if heap.len() < limit {
        heap.push(c);
    } else if let Some(worst) = heap.peek() {
        if c < *worst {
            heap.pop();
            heap.push(c);
        }
    }
}

/// Selected couples, in rank order, from a ranked list.
pub fn select_couples(ranked: &[PairScore], rule: &ResolvedRule) -> Vec<(usize, usize)> {
    match *rule {
        ResolvedRule::TopD { d } => ranked.iter().take(d).map(|s| (s.j, s.l)).collect(),
        ResolvedRule::Threshold { threshold, .. } => ranked
            .iter()
            .filter(|s| s.score > threshold)
            .map(|s| (s.j, s.l))
            .collect(),
    }
}

fn check_fraction(fraction: f64) -> Result<()> {
    if (0.0..1.0).contains(&fraction) {
        Ok(())
    } else {
        Err(KifError::InvalidConfig(format!(
            "prescreen fraction must be in [0, 1), got {fraction}"
        )))
    }
}

/// Unbiased sample variance (divisor `n − 1`).
pub fn sample_variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
}

/// Number of features dropped for a given fraction: `⌊p · fraction⌋`.
pub fn prescreen_drop_count(p: usize, fraction: f64) -> usize {
    // tolerate representation error such as 0.29 * 100 = 28.999999999999996
    ((p as f64 * fraction) * (1.0 + 1e-12)).floor() as usize
}

/// Drops the `⌊p · fraction⌋` lowest-variance features. Among equal
/// variances the smaller column index is kept. Kept columns stay in their
/// original order.
pub fn variance_prescreen(data: &Dataset, fraction: f64) -> Result<Dataset> {
    check_fraction(fraction)?;
    let p = data.p();
    let drop = prescreen_drop_count(p, fraction);
    if drop == 0 {
        return Ok(data.clone());
    }
    let variances: Vec<f64> = data.columns().map(sample_variance).collect();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| variances[b].total_cmp(&variances[a]).then(a.cmp(&b)));
    let mut keep = order[..p - drop].to_vec();
    keep.sort_unstable();
    data.select_features(&keep)
}

/// Variance pre-screening followed by [`screen_all_pairs`].
pub fn run_screening(data: &Dataset, config: &ScreeningConfig) -> Result<ScreeningResult> {
    config.validate()?;
    let t0 = Instant::now();
    let reduced;
    let target = if config.prescreen_fraction > 0.0 {
        reduced = variance_prescreen(data, config.prescreen_fraction)?;
        &reduced
    } else {
        data
    };
    let prescreen_secs = t0.elapsed().as_secs_f64();
    let mut result = screen_all_pairs(target, config)?;
    result.timing.prescreen_secs = prescreen_secs;
    Ok(result)
}
