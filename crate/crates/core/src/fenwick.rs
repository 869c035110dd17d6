//! Binary indexed tree over per-level unit counts.
//!
//! Supports point updates, prefix sums and "find the slot holding the k-th
//! unit" in `O(log n)`, which is what both volume-weighted cancellation and
//! best-quote recovery need.

#[derive(Debug, Clone)]
pub struct Fenwick {
    tree: Vec<i64>,
    // Largest power of two <= len, used by `find`.
    top_bit: usize,
}

impl Fenwick {
    pub fn new(len: usize) -> Self {
        Self {
            tree: vec![0; len + 1],
            top_bit: top_bit(len),
        }
    }

    /// Builds the tree in `O(n)` from raw counts.
    pub fn from_counts(counts: &[u32]) -> Self {
        let n = counts.len();
        let mut tree = vec![0i64; n + 1];
        for (i, &c) in counts.iter().enumerate() {
            tree[i + 1] = i64::from(c);
        }
        for i in 1..=n {
            let parent = i + (i & i.wrapping_neg());
            if parent <= n {
                tree[parent] += tree[i];
            }
        }
        Self {
            tree,
            top_bit: top_bit(n),
        }
    }

    pub fn len(&self) -> usize {
        self.tree.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn add(&mut self, index: usize, delta: i64) {
        let n = self.len();
        let mut i = index + 1;
        while i <= n {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum of slots `0..=index`.
    pub fn prefix(&self, index: usize) -> i64 {
        let mut i = (index + 1).min(self.len());
        let mut sum = 0;
        while i > 0 {
            sum += self.tree[i];
            i &= i - 1;
        }
        sum
    }

    pub fn total(&self) -> i64 {
        self.prefix(self.len().saturating_sub(1))
    }

    /// Smallest slot `i` with `prefix(i) > k`, i.e. the slot holding unit
    /// number `k` (0-based) when units are laid out left to right.
    /// Returns `None` when `k >= total`.
    pub fn find(&self, k: i64) -> Option<usize> {
        let n = self.len();
        let mut pos = 0usize;
        let mut rem = k;
        let mut step = self.top_bit;
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= rem {
                pos = next;
                rem -= self.tree[next];
            }
            step >>= 1;
        }
        if pos < n {
            Some(pos)
        } else {
            None
        }
    }
}

fn top_bit(n: usize) -> usize {
    if n == 0 {
        0
    } else {
        1 << (usize::BITS - 1 - n.leading_zeros())
    }
}
