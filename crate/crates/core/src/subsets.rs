//! Subset enumeration.
//!
//! Exhaustive enumeration walks index subsets in lexicographic order without
//! materialising them. When an enumeration is too large for the caller's cap,
//! the samplers fall back to drawing *distinct* sub-multisets uniformly: two
//! index subsets that pick the same points (samples are drawn with
//! replacement) have the same centroid, so only the multiset matters.

use std::collections::HashSet;

use rand::Rng;

/// `C(n, k)` as a float (exact for results below `2^53`).
pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut r = 1.0f64;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    if r < 9.0e15 {
        r.round()
    } else {
        r
    }
}

/// `C(n, k)` in exact integer arithmetic, `None` on overflow.
pub fn binomial_exact(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k as u128 {
        r = r.checked_mul(n as u128 - i)? / (i + 1);
    }
    Some(r)
}

/// Lexicographic stream of the `k`-subsets of `0..n`.
pub struct Combinations {
    n: usize,
    idx: Vec<usize>,
    started: bool,
    done: bool,
}

impl Combinations {
    pub fn new(n: usize, k: usize) -> Self {
        Combinations { n, idx: (0..k).collect(), started: false, done: k > n }
    }

    /// Advances to the next subset. The slice is valid until the next call.
    #[allow(clippy::should_implement_trait)]
    pub fn next(&mut self) -> Option<&[usize]> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(&self.idx);
        }
        let k = self.idx.len();
        let mut i = k;
        while i > 0 {
            i -= 1;
            if self.idx[i] < self.n - k + i {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                return Some(&self.idx);
            }
        }
        self.done = true;
        None
    }
}

/// Counts of sub-multisets of a multiset with type multiplicities `mult`,
/// tabulated by suffix: `table[i][s]` is the number of ways to pick `s`
/// elements from types `i..`.
pub struct SubmultisetTable {
    mult: Vec<usize>,
    size: usize,
    table: Vec<Vec<f64>>,
}

impl SubmultisetTable {
    pub fn new(mult: &[usize], size: usize) -> Self {
        let u = mult.len();
        let mut table = vec![vec![0.0; size + 1]; u + 1];
        table[u][0] = 1.0;
        for i in (0..u).rev() {
            for s in 0..=size {
                let top = mult[i].min(s);
                table[i][s] = (0..=top).map(|c| table[i + 1][s - c]).sum();
            }
        }
        SubmultisetTable { mult: mult.to_vec(), size, table }
    }

    /// Number of distinct sub-multisets of the requested size.
    pub fn total(&self) -> f64 {
        self.table[0][self.size]
    }

    /// A uniformly random sub-multiset, as per-type counts.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let mut out = vec![0; self.mult.len()];
        let mut s = self.size;
        for (i, (slot, &mult)) in out.iter_mut().zip(&self.mult).enumerate() {
            if s == 0 {
                break;
            }
            let mut r = rng.random::<f64>() * self.table[i][s];
            let top = mult.min(s);
            let mut pick = 0;
            for c in 0..=top {
                let w = self.table[i + 1][s - c];
                if w == 0.0 {
                    continue;
                }
                pick = c;
                if r < w {
                    break;
                }
                r -= w;
            }
            *slot = pick;
            s -= pick;
        }
        out
    }

    /// Every distinct sub-multiset, in lexicographic order of the count vector.
    pub fn for_each<F: FnMut(&[usize])>(&self, mut f: F) {
        let mut cur = vec![0; self.mult.len()];
        self.walk(0, self.size, &mut cur, &mut f);
    }

    fn walk<F: FnMut(&[usize])>(&self, i: usize, s: usize, cur: &mut Vec<usize>, f: &mut F) {
        if i == self.mult.len() {
            if s == 0 {
                f(cur);
            }
            return;
        }
        if self.table[i][s] == 0.0 {
            return;
        }
        for c in 0..=self.mult[i].min(s) {
            cur[i] = c;
            self.walk(i + 1, s - c, cur, f);
        }
        cur[i] = 0;
    }
}

/// Picks up to `budget` distinct sub-multisets of the given size.
///
/// Small families are enumerated in full (and thinned by a seeded shuffle if
/// slightly over budget); large ones are sampled uniformly with rejection of
/// repeats. The result is deterministic for a given generator state.
pub fn select_distinct<R: Rng + ?Sized>(mult: &[usize], size: usize, budget: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let table = SubmultisetTable::new(mult, size);
    let total = table.total();
    if budget == 0 || total == 0.0 {
        return Vec::new();
    }
    if total <= 2.0 * budget as f64 {
        let mut all = Vec::with_capacity(total as usize);
        table.for_each(|c| all.push(c.to_vec()));
        if all.len() > budget {
            // Partial Fisher-Yates, then restore enumeration order.
            let mut order: Vec<usize> = (0..all.len()).collect();
            for i in 0..budget {
                let j = rng.random_range(i..order.len());
                order.swap(i, j);
            }
            let mut keep = order[..budget].to_vec();
            keep.sort_unstable();
            all = keep.into_iter().map(|i| std::mem::take(&mut all[i])).collect();
        }
        return all;
    }
    let mut seen = HashSet::with_capacity(budget);
    let mut out = Vec::with_capacity(budget);
    let max_attempts = budget.saturating_mul(8).max(64);
    for _ in 0..max_attempts {
        if out.len() == budget {
            break;
        }
        let c = table.sample(rng);
        if seen.insert(c.clone()) {
            out.push(c);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use std::collections::HashMap;

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), 6.0);
        assert_eq!(binomial(32, 8), 10_518_300.0);
        assert_eq!(binomial(3, 5), 0.0);
        assert_eq!(binomial_exact(31, 8), Some(7_888_725));
        assert_eq!(binomial_exact(10_000, 5000), None);
    }

    #[test]
    fn combinations_lexicographic_and_complete() {
        let mut it = Combinations::new(4, 2);
        let mut all = Vec::new();
        while let Some(c) = it.next() {
            all.push(c.to_vec());
        }
        assert_eq!(all, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        let mut empty = Combinations::new(3, 0);
        assert_eq!(empty.next(), Some(&[][..]));
        assert_eq!(empty.next(), None);
        assert_eq!(Combinations::new(2, 3).next(), None);
    }

    #[test]
    fn combination_counts_match_binomial() {
        for n in 0..9 {
            for k in 0..=n {
                let mut it = Combinations::new(n, k);
                let mut count = 0;
                while it.next().is_some() {
                    count += 1;
                }
                assert_eq!(count as f64, binomial(n as u64, k as u64));
            }
        }
    }

    #[test]
    fn submultiset_counts_by_brute_force() {
        let mult = [2, 0, 3, 1];
        for size in 0..=6 {
            let t = SubmultisetTable::new(&mult, size);
            let mut brute = 0;
            for a in 0..=2 {
                for c in 0..=3 {
                    for d in 0..=1 {
                        if a + c + d == size {
                            brute += 1;
                        }
                    }
                }
            }
            assert_eq!(t.total(), brute as f64);
            let mut listed = 0;
            t.for_each(|v| {
                assert_eq!(v.iter().sum::<usize>(), size);
                listed += 1;
            });
            assert_eq!(listed, brute);
        }
    }

    #[test]
    fn submultiset_sampling_is_roughly_uniform() {
        let t = SubmultisetTable::new(&[2, 2, 2], 3);
        assert_eq!(t.total(), 7.0);
        let mut rng = substream(1, 1);
        let mut freq: HashMap<Vec<usize>, usize> = HashMap::new();
        for _ in 0..7000 {
            *freq.entry(t.sample(&mut rng)).or_default() += 1;
        }
        assert_eq!(freq.len(), 7);
        assert!(freq.values().all(|&c| (800..1200).contains(&c)), "{freq:?}");
    }

    #[test]
    fn select_distinct_respects_budget_and_uniqueness() {
        let mut rng = substream(2, 2);
        let small = select_distinct(&[1, 1, 1], 2, 10, &mut rng);
        assert_eq!(small.len(), 3);
        let thinned = select_distinct(&[1, 1, 1, 1], 2, 4, &mut rng);
        assert_eq!(thinned.len(), 4);
        let big = select_distinct(&[3; 12], 8, 300, &mut rng);
        assert_eq!(big.len(), 300);
        let uniq: HashSet<_> = big.iter().collect();
        assert_eq!(uniq.len(), 300);
    }
}
