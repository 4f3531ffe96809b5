//! Kendall's τ estimators (marginal and within-class) and class priors.
//!
//! The estimator used throughout is the strict-concordance form
//!
//! ```text
//! τ̂ = 4·C / (n(n−1)) − 1,   C = #{i < t : (x_i − x_t)(y_i − y_t) > 0}
//! ```
//!
//! A pair tied in either coordinate is *not* concordant, so ties pull τ̂
//! towards −1. This is not τ-b, which drops tied pairs from the
//! denominator instead.
//!
//! Every estimator goes through an exact integer count `C` and a single
//! division in [`tau_from_concordant`], which is what makes the
//! O(n log n) path bit-identical to the quadratic one.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt::Display;
use std::hash::Hash;

use serde::Serialize;

use crate::error::{KifError, Result};

/// Converts a strict-concordance count over `n` observations to τ̂.
#[inline]
pub fn tau_from_concordant(concordant: u64, n: usize) -> f64 {
    debug_assert!(n >= 2);
    let pairs = (n as u64) * (n as u64 - 1);
    4.0 * concordant as f64 / pairs as f64 - 1.0
}

pub(crate) fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(KifError::NonFinite { index }),
        None => Ok(()),
    }
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(KifError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(KifError::TooFewObservations {
            required: 2,
            got: x.len(),
        });
    }
    check_finite(x)?;
    check_finite(y)
}

/// Number of strictly concordant pairs by direct enumeration of all
/// `n(n−1)/2` pairs.
pub fn concordant_pairs_naive(x: &[f64], y: &[f64]) -> Result<u64> {
    check_pair(x, y)?;
    let n = x.len();
    let mut concordant = 0u64;
    for i in 0..n {
        for t in (i + 1)..n {
            // sign comparison rather than the product so that tiny
            // differences cannot underflow to zero
            let dx = x[i].partial_cmp(&x[t]);
            let dy = y[i].partial_cmp(&y[t]);
            match (dx, dy) {
                (Some(Ordering::Less), Some(Ordering::Less))
                | (Some(Ordering::Greater), Some(Ordering::Greater)) => concordant += 1,
                _ => {}
            }
        }
    }
    Ok(concordant)
}

/// Quadratic-time reference estimator.
pub fn kendall_tau_naive(x: &[f64], y: &[f64]) -> Result<f64> {
    let c = concordant_pairs_naive(x, y)?;
    Ok(tau_from_concordant(c, x.len()))
}

/// Dense ranks starting at 0; equal values (including `-0.0 == 0.0`)
/// share a rank.
pub fn dense_ranks(values: &[f64]) -> Vec<u32> {
    let mut order: Vec<u32> = (0..values.len() as u32).collect();
    order.sort_unstable_by(|&a, &b| {
        values[a as usize]
            .partial_cmp(&values[b as usize])
            .unwrap_or(Ordering::Equal)
    });
    let mut ranks = vec![0u32; values.len()];
    let mut rank = 0u32;
    for w in 0..order.len() {
        if w > 0 && values[order[w] as usize] != values[order[w - 1] as usize] {
            rank += 1;
        }
        ranks[order[w] as usize] = rank;
    }
    ranks
}

#[inline]
fn tied_pairs(run: u64) -> u64 {
    run * (run.saturating_sub(1)) / 2
}

const INSERTION_BLOCK: usize = 16;

/// Sorts `v` ascending and returns the number of strict inversions
/// (`a < b` with `v[a] > v[b]`).
pub(crate) fn sort_count_inversions(v: &mut [u32], buf: &mut Vec<u32>) -> u64 {
    let n = v.len();
    let mut inversions = 0u64;

    for block in v.chunks_mut(INSERTION_BLOCK) {
        for i in 1..block.len() {
            let cur = block[i];
            let mut k = i;
            while k > 0 && block[k - 1] > cur {
                block[k] = block[k - 1];
                k -= 1;
            }
            inversions += (i - k) as u64;
            block[k] = cur;
        }
    }

    buf.clear();
    buf.resize(n, 0);
    let mut width = INSERTION_BLOCK;
    while width < n {
        let mut start = 0;
        while start < n {
            let mid = (start + width).min(n);
            let end = (start + 2 * width).min(n);
            if mid < end {
                let (mut i, mut k, mut out) = (start, mid, start);
                while i < mid && k < end {
                    if v[i] <= v[k] {
                        buf[out] = v[i];
                        i += 1;
                    } else {
                        buf[out] = v[k];
                        inversions += (mid - i) as u64;
                        k += 1;
                    }
                    out += 1;
                }
                buf[out..out + (mid - i)].copy_from_slice(&v[i..mid]);
                out += mid - i;
                buf[out..out + (end - k)].copy_from_slice(&v[k..end]);
                v[start..end].copy_from_slice(&buf[start..end]);
            }
            start = end;
        }
        width *= 2;
    }
    inversions
}

/// Strict-concordance count for rank sequences already sorted
/// lexicographically by `(xs, ys)`. `ys` is sorted in place.
pub(crate) fn concordant_from_sorted(xs: &[u32], ys: &mut [u32], buf: &mut Vec<u32>) -> u64 {
    let n = xs.len();
    if n < 2 {
        return 0;
    }
    let mut tied_x = 0u64;
    let mut tied_xy = 0u64;
    let mut run_x = 1u64;
    let mut run_xy = 1u64;
    for i in 1..n {
        if xs[i] == xs[i - 1] {
            run_x += 1;
            if ys[i] == ys[i - 1] {
                run_xy += 1;
            } else {
                tied_xy += tied_pairs(run_xy);
                run_xy = 1;
            }
        } else {
            tied_x += tied_pairs(run_x);
            tied_xy += tied_pairs(run_xy);
            run_x = 1;
            run_xy = 1;
        }
    }
    tied_x += tied_pairs(run_x);
    tied_xy += tied_pairs(run_xy);

    let inversions = sort_count_inversions(ys, buf);

    let mut tied_y = 0u64;
    let mut run_y = 1u64;
    for i in 1..n {
        if ys[i] == ys[i - 1] {
            run_y += 1;
        } else {
            tied_y += tied_pairs(run_y);
            run_y = 1;
        }
    }
    tied_y += tied_pairs(run_y);

    // pairs ordered (a < b) after sorting by (x, y):
    //   y_a < y_b         = total - inversions - tied_y
    //   ... with x_a = x_b = tied_x - tied_xy (y is nondecreasing in an x-run)
    let total = tied_pairs(n as u64);
    total - inversions - tied_y - (tied_x - tied_xy)
}

/// Strict-concordance count in O(n log n).
pub fn concordant_pairs_fast(x: &[f64], y: &[f64]) -> Result<u64> {
    check_pair(x, y)?;
    let rx = dense_ranks(x);
    let ry = dense_ranks(y);
    let mut order: Vec<u32> = (0..x.len() as u32).collect();
    order.sort_unstable_by_key(|&i| (rx[i as usize], ry[i as usize]));
    let xs: Vec<u32> = order.iter().map(|&i| rx[i as usize]).collect();
    let mut ys: Vec<u32> = order.iter().map(|&i| ry[i as usize]).collect();
    let mut buf = Vec::with_capacity(x.len());
    Ok(concordant_from_sorted(&xs, &mut ys, &mut buf))
}

/// Kendall's τ̂ via sort and merge-sort inversion counting. Bit-identical
/// to [`kendall_tau_naive`].
pub fn kendall_tau_fast(x: &[f64], y: &[f64]) -> Result<f64> {
    let c = concordant_pairs_fast(x, y)?;
    Ok(tau_from_concordant(c, x.len()))
}

/// Validated class labels: one class code per observation, at least two
/// distinct classes. Classes are numbered by first appearance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabelVector {
    codes: Vec<u32>,
    names: Vec<String>,
}

impl LabelVector {
    pub fn from_values<T>(values: &[T]) -> Result<Self>
    where
        T: Eq + Hash + Display,
    {
        let (codes, names) = encode_labels(values)?;
        if names.len() < 2 {
            return Err(KifError::TooFewClasses { found: names.len() });
        }
        Ok(Self { codes, names })
    }

    /// Builds from precomputed codes in `0..K`; code `k` is named by
    /// `names[k]`.
    pub fn from_codes(codes: Vec<u32>, names: Vec<String>) -> Result<Self> {
        if codes.is_empty() {
            return Err(KifError::EmptyLabels);
        }
        if names.len() < 2 {
            return Err(KifError::TooFewClasses { found: names.len() });
        }
        if let Some(&bad) = codes.iter().find(|&&c| c as usize >= names.len()) {
            return Err(KifError::UnknownClass {
                class: bad as usize,
                classes: names.len(),
            });
        }
        Ok(Self { codes, names })
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn codes(&self) -> &[u32] {
        &self.codes
    }

    pub fn class_names(&self) -> &[String] {
        &self.names
    }

    pub fn num_classes(&self) -> usize {
        self.names.len()
    }

    /// Label name of observation `i`.
    pub fn name_of(&self, i: usize) -> &str {
        &self.names[self.codes[i] as usize]
    }

    pub fn partition(&self) -> ClassPartition {
        ClassPartition::from_codes(self.codes.clone(), self.names.clone())
    }
}

fn encode_labels<T>(values: &[T]) -> Result<(Vec<u32>, Vec<String>)>
where
    T: Eq + Hash + Display,
{
    if values.is_empty() {
        return Err(KifError::EmptyLabels);
    }
    let mut index: HashMap<&T, u32> = HashMap::new();
    let mut names = Vec::new();
    let codes = values
        .iter()
        .map(|v| {
            *index.entry(v).or_insert_with(|| {
                names.push(v.to_string());
                (names.len() - 1) as u32
            })
        })
        .collect();
    Ok((codes, names))
}

/// Per-class index sets, counts and empirical priors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassPartition {
    class_of: Vec<u32>,
    members: Vec<Vec<usize>>,
    names: Vec<String>,
}

impl ClassPartition {
    fn from_codes(class_of: Vec<u32>, names: Vec<String>) -> Self {
        let mut members = vec![Vec::new(); names.len()];
        for (i, &c) in class_of.iter().enumerate() {
            members[c as usize].push(i);
        }
        Self {
            class_of,
            members,
            names,
        }
    }

    /// Total number of observations.
    pub fn n(&self) -> usize {
        self.class_of.len()
    }

    pub fn num_classes(&self) -> usize {
        self.members.len()
    }

    pub fn class_of(&self) -> &[u32] {
        &self.class_of
    }

    pub fn members(&self, k: usize) -> &[usize] {
        &self.members[k]
    }

    pub fn count(&self, k: usize) -> usize {
        self.members[k].len()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    /// π̂_k = n_k / n.
    #[inline]
    pub fn prior(&self, k: usize) -> f64 {
        self.members[k].len() as f64 / self.class_of.len() as f64
    }

    pub fn priors(&self) -> Vec<f64> {
        (0..self.num_classes()).map(|k| self.prior(k)).collect()
    }

    pub fn class_name(&self, k: usize) -> &str {
        &self.names[k]
    }

    /// Classes with fewer than two observations, for which τ̂_k is undefined.
    pub fn undersized_classes(&self) -> Vec<usize> {
        (0..self.num_classes())
            .filter(|&k| self.count(k) < 2)
            .collect()
    }

    /// Partition after relabelling: observation `i` takes the class of
    /// observation `perm[i]`. Counts and priors are unchanged.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n(), "permutation length");
        let class_of = perm.iter().map(|&src| self.class_of[src]).collect();
        Self::from_codes(class_of, self.names.clone())
    }
}

/// Groups `labels` into classes numbered by first appearance.
pub fn class_partition<T>(labels: &[T]) -> Result<ClassPartition>
where
    T: Eq + Hash + Display,
{
    let (codes, names) = encode_labels(labels)?;
    Ok(ClassPartition::from_codes(codes, names))
}

/// τ̂_k computed on the rows of class `k` only.
pub fn conditional_kendall_tau(
    x: &[f64],
    y: &[f64],
    part: &ClassPartition,
    k: usize,
) -> Result<f64> {
    if x.len() != part.n() {
        return Err(KifError::LengthMismatch {
            left: x.len(),
            right: part.n(),
        });
    }
    if k >= part.num_classes() {
        return Err(KifError::UnknownClass {
            class: k,
            classes: part.num_classes(),
        });
    }
    let rows = part.members(k);
    if rows.len() < 2 {
        return Err(KifError::InsufficientClassSize {
            class: k,
            label: part.class_name(k).to_string(),
            size: rows.len(),
        });
    }
    let xk: Vec<f64> = rows.iter().map(|&i| x[i]).collect();
    let yk: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
    kendall_tau_fast(&xk, &yk)
}
