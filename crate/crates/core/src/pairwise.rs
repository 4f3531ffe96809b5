//! Precomputed per-column structures for counting strict concordances of
//! many column pairs at once, overall and within each class.
//!
//! Two interchangeable kernels produce the same integer counts:
//!
//! * `Bitset`: for every row `i` a bitmask of the rows `t` with
//!   `x_t > x_i`. The concordant count of a pair is the popcount of the
//!   row-wise AND of the two columns' masks; class counts add an AND with
//!   the class membership mask. O(n²/64) per pair, fastest for moderate n.
//! * `Sorted`: dense ranks plus an argsort per column, then merge-sort
//!   inversion counting per pair. O(n log n) per pair, used for large n.

use rayon::prelude::*;

use crate::rank_stats::{concordant_from_sorted, dense_ranks};

/// Which concordance kernel to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelChoice {
    /// Bitset when `n` and the memory footprint are small enough.
    #[default]
    Auto,
    Bitset,
    Sorted,
}

const BITSET_MAX_N: usize = 1024;
const BITSET_MAX_BYTES: usize = 1 << 30;

/// Class membership of each row, plus per-class row bitmasks.
#[derive(Debug, Clone)]
pub struct ClassLayout {
    class_of: Vec<u32>,
    num_classes: usize,
    words: usize,
    masks: Vec<u64>,
    /// Per class `c`, an `n × words` block whose row `i` is the class-`c`
    /// mask if row `i` belongs to class `c` and zero otherwise. Lets the
    /// bitset kernel count within-class concordances in one streaming pass.
    /// Left empty when it would exceed [`SPREAD_MAX_BYTES`].
    spread: Vec<u64>,
}

const SPREAD_MAX_BYTES: usize = 64 << 20;

impl ClassLayout {
    pub fn new(class_of: &[u32], num_classes: usize) -> Self {
        let words = class_of.len().div_ceil(64);
        let mut layout = Self {
            class_of: class_of.to_vec(),
            num_classes,
            words,
            masks: vec![0; num_classes * words],
            spread: Vec::new(),
        };
        layout.fill_masks();
        layout
    }

    fn fill_masks(&mut self) {
        self.masks.iter_mut().for_each(|m| *m = 0);
        for (i, &c) in self.class_of.iter().enumerate() {
            self.masks[c as usize * self.words + i / 64] |= 1u64 << (i % 64);
        }
        let n = self.class_of.len();
        let block = n * self.words;
        if self.num_classes.saturating_mul(block).saturating_mul(8) > SPREAD_MAX_BYTES {
            self.spread.clear();
            return;
        }
        self.spread.clear();
        self.spread.resize(self.num_classes * block, 0);
        for (i, &c) in self.class_of.iter().enumerate() {
            let c = c as usize;
            let dst = c * block + i * self.words;
            self.spread[dst..dst + self.words]
                .copy_from_slice(&self.masks[c * self.words..(c + 1) * self.words]);
        }
    }

    /// Reassigns classes in place (`class_of[i] = source[perm[i]]`),
    /// reusing the allocation.
    pub fn set_permuted(&mut self, source: &[u32], perm: &[usize]) {
        for (dst, &src) in self.class_of.iter_mut().zip(perm) {
            *dst = source[src];
        }
        self.fill_masks();
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn class_of(&self) -> &[u32] {
        &self.class_of
    }
}

enum Repr {
    Bitset {
        words: usize,
        upper: Vec<Vec<u64>>,
    },
    Sorted {
        ranks: Vec<Vec<u32>>,
        order: Vec<Vec<u32>>,
    },
}

/// Per-column concordance index over a fixed set of columns.
pub struct ConcordanceIndex {
    n: usize,
    repr: Repr,
}

/// Reusable buffers for one worker.
#[derive(Default)]
pub struct Scratch {
    triples: Vec<(u32, u32, u32)>,
    xs: Vec<u32>,
    ys: Vec<u32>,
    buf: Vec<u32>,
}

impl ConcordanceIndex {
    /// Indexes `columns`, each of length `n`. Columns are addressed by their
    /// position in the slice.
    pub fn build(columns: &[&[f64]], choice: KernelChoice) -> Self {
        let n = columns.first().map_or(0, |c| c.len());
        let words = n.div_ceil(64);
        let use_bitset = match choice {
            KernelChoice::Bitset => true,
            KernelChoice::Sorted => false,
            KernelChoice::Auto => {
                n <= BITSET_MAX_N && columns.len().saturating_mul(n * words * 8) <= BITSET_MAX_BYTES
            }
        };
        let repr = if use_bitset {
            Repr::Bitset {
                words,
                upper: columns.par_iter().map(|c| upper_masks(c)).collect(),
            }
        } else {
            let (ranks, order) = columns
                .par_iter()
                .map(|c| {
                    let r = dense_ranks(c);
                    let mut o: Vec<u32> = (0..c.len() as u32).collect();
                    o.sort_unstable_by_key(|&i| r[i as usize]);
                    (r, o)
                })
                .unzip();
            Repr::Sorted { ranks, order }
        };
        Self { n, repr }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_bitset(&self) -> bool {
        matches!(self.repr, Repr::Bitset { .. })
    }

    /// Strict-concordance count of columns `a` and `b` over all rows;
    /// `class_counts[k]` receives the count restricted to rows of class `k`.
    pub fn counts(
        &self,
        a: usize,
        b: usize,
        layout: &ClassLayout,
        scratch: &mut Scratch,
        class_counts: &mut [u64],
    ) -> u64 {
        debug_assert_eq!(layout.class_of.len(), self.n);
        debug_assert_eq!(class_counts.len(), layout.num_classes);
        class_counts.iter_mut().for_each(|c| *c = 0);
        match &self.repr {
            Repr::Bitset { words, upper } => {
                bitset_counts(&upper[a], &upper[b], *words, layout, class_counts)
            }
            Repr::Sorted { ranks, order } => sorted_counts(
                &ranks[a],
                &ranks[b],
                &order[a],
                layout,
                scratch,
                class_counts,
            ),
        }
    }
}

/// Row `i` of the result (words `i*W..(i+1)*W`) marks every row `t` with
/// `x_t > x_i`.
fn upper_masks(x: &[f64]) -> Vec<u64> {
    let n = x.len();
    let words = n.div_ceil(64);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut out = vec![0u64; n * words];
    let mut above = vec![0u64; words];
    let mut end = n;
    // walk tie groups from the largest value down
    while end > 0 {
        let mut start = end - 1;
        while start > 0 && x[order[start - 1]] == x[order[end - 1]] {
            start -= 1;
        }
        for &row in &order[start..end] {
            out[row * words..(row + 1) * words].copy_from_slice(&above);
        }
        for &row in &order[start..end] {
            above[row / 64] |= 1u64 << (row % 64);
        }
        end = start;
    }
    out
}

fn bitset_counts(
    ua: &[u64],
    ub: &[u64],
    words: usize,
    layout: &ClassLayout,
    class_counts: &mut [u64],
) -> u64 {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2")
            && std::arch::is_x86_feature_detected!("popcnt")
        {
            // SAFETY: the CPU supports the enabled features
            return unsafe { bitset_counts_avx2(ua, ub, words, layout, class_counts) };
        }
        if std::arch::is_x86_feature_detected!("popcnt") {
            // SAFETY: the CPU supports the enabled feature
            return unsafe { bitset_counts_popcnt(ua, ub, words, layout, class_counts) };
        }
    }
    bitset_counts_portable(ua, ub, words, layout, class_counts)
}

/// Same as [`bitset_counts_portable`], compiled with the hardware popcount
/// instruction, which the baseline x86-64 target does not assume.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "popcnt")]
unsafe fn bitset_counts_popcnt(
    ua: &[u64],
    ub: &[u64],
    words: usize,
    layout: &ClassLayout,
    class_counts: &mut [u64],
) -> u64 {
    bitset_counts_portable(ua, ub, words, layout, class_counts)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,popcnt")]
unsafe fn bitset_counts_avx2(
    ua: &[u64],
    ub: &[u64],
    words: usize,
    layout: &ClassLayout,
    class_counts: &mut [u64],
) -> u64 {
    bitset_counts_portable(ua, ub, words, layout, class_counts)
}

#[inline(always)]
fn and_popcount(a: &[u64], b: &[u64]) -> u64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x & y).count_ones() as u64)
        .sum()
}

#[inline(always)]
fn and3_popcount(a: &[u64], b: &[u64], c: &[u64]) -> u64 {
    a.iter()
        .zip(b)
        .zip(c)
        .map(|((x, y), z)| (x & y & z).count_ones() as u64)
        .sum()
}

#[inline(always)]
fn bitset_counts_portable(
    ua: &[u64],
    ub: &[u64],
    words: usize,
    layout: &ClassLayout,
    class_counts: &mut [u64],
) -> u64 {
    if !layout.spread.is_empty() {
        let block = ua.len();
        for (c, slot) in class_counts.iter_mut().enumerate() {
            *slot = and3_popcount(ua, ub, &layout.spread[c * block..(c + 1) * block]);
        }
        return and_popcount(ua, ub);
    }
    let mut total = 0u64;
    for (i, &c) in layout.class_of.iter().enumerate() {
        let ra = &ua[i * words..(i + 1) * words];
        let rb = &ub[i * words..(i + 1) * words];
        let mask = &layout.masks[c as usize * words..(c as usize + 1) * words];
        let mut all = 0u32;
        let mut within = 0u32;
        for w in 0..words {
            let v = ra[w] & rb[w];
            all += v.count_ones();
            within += (v & mask[w]).count_ones();
        }
        total += all as u64;
        class_counts[c as usize] += within as u64;
    }
    total
}

fn sorted_counts(
    ra: &[u32],
    rb: &[u32],
    order_a: &[u32],
    layout: &ClassLayout,
    scratch: &mut Scratch,
    class_counts: &mut [u64],
) -> u64 {
    let Scratch {
        triples,
        xs,
        ys,
        buf,
    } = scratch;
    triples.clear();
    triples.extend(order_a.iter().map(|&row| {
        let r = row as usize;
        (ra[r], rb[r], layout.class_of[r])
    }));
    // order by (rank_a, rank_b): only x-tie runs need fixing
    let mut start = 0;
    while start < triples.len() {
        let mut end = start + 1;
        while end < triples.len() && triples[end].0 == triples[start].0 {
            end += 1;
        }
        if end - start > 1 {
            triples[start..end].sort_unstable_by_key(|t| t.1);
        }
        start = end;
    }

    xs.clear();
    ys.clear();
    xs.extend(triples.iter().map(|t| t.0));
    ys.extend(triples.iter().map(|t| t.1));
    let total = concordant_from_sorted(xs, ys, buf);

    for (k, slot) in class_counts.iter_mut().enumerate() {
        xs.clear();
        ys.clear();
        for t in triples.iter().filter(|t| t.2 as usize == k) {
            xs.push(t.0);
            ys.push(t.1);
        }
        *slot = concordant_from_sorted(xs, ys, buf);
    }
    total
}
