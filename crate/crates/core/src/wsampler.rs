//! Dynamic weighted categorical sampling over an append-only list.
//!
//! [`PrefixWeightIndex`] is a binary-indexed (Fenwick) tree of prefix sums.
//! Appending a weight and drawing an index proportional to the weights both
//! cost `O(log N)`. Zero weights still receive an index but are never drawn.

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::numeric::CompensatedSum;

#[inline]
fn lsb(i: usize) -> usize {
    i & i.wrapping_neg()
}

#[derive(Debug, Clone)]
pub struct PrefixWeightIndex {
    // 1-based; `tree[i]` holds the sum of weights in `(i - lsb(i), i]`.
    tree: Vec<f64>,
    total: CompensatedSum,
    last_positive: Option<usize>,
}

impl Default for PrefixWeightIndex {
    fn default() -> Self {
        Self::new()
    }
}

impl PrefixWeightIndex {
    pub fn new() -> Self {
        Self::with_capacity(0)
    }

    pub fn with_capacity(capacity: usize) -> Self {
        let mut tree = Vec::with_capacity(capacity + 1);
        tree.push(0.0);
        Self {
            tree,
            total: CompensatedSum::new(),
            last_positive: None,
        }
    }

    /// Number of appended entries.
    pub fn len(&self) -> usize {
        self.tree.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sum of all appended weights.
    pub fn total(&self) -> f64 {
        self.total.value()
    }

    /// Appends `weight` and returns its flat index.
    pub fn append(&mut self, weight: f64) -> Result<usize> {
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(invalid(format!(
                "weight must be finite and non-negative, got {weight}"
            )));
        }
        let i = self.tree.len();
        let lower = i - lsb(i);
        let mut node = weight;
        let mut child = i - 1;
        while child > lower {
            node += self.tree[child];
            child -= lsb(child);
        }
        self.tree.push(node);
        self.total.add(weight);
        if weight > 0.0 {
            self.last_positive = Some(i - 1);
        }
        Ok(i - 1)
    }

    /// Sum of the first `count` weights.
    pub fn prefix(&self, count: usize) -> f64 {
        let mut i = count.min(self.len());
        let mut acc = 0.0;
        while i > 0 {
            acc += self.tree[i];
            i -= lsb(i);
        }
        acc
    }

    /// Maps `u` in `[0, total)` to the index whose half-open interval
    /// `[prefix(i), prefix(i + 1))` contains it. A `u` on a boundary goes to
    /// the next positive-weight index.
    pub fn locate(&self, u: f64) -> Result<usize> {
        let last = self.last_positive.ok_or(Error::NoSelectablePoint)?;
        let n = self.len();
        let mut pos = 0;
        let mut rem = u;
        let mut step = if n == 0 {
            0
        } else {
            1 << (usize::BITS - 1 - n.leading_zeros())
        };
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= rem {
                pos = next;
                rem -= self.tree[next];
            }
            step >>= 1;
        }
        // Rounding can push `u` past the last positive interval.
        Ok(pos.min(last))
    }

    /// Draws an index with probability `w_i / total`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        let total = self.total();
        if !(total > 0.0) {
            return Err(Error::NoSelectablePoint);
        }
        let u = rng.random::<f64>() * total;
        self.locate(u)
    }

    /// Multiplies every stored weight by `factor > 0`.
    pub fn scale_all(&mut self, factor: f64) {
        debug_assert!(factor > 0.0);
        for node in self.tree.iter_mut().skip(1) {
            *node *= factor;
        }
        self.total.scale(factor);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn build(weights: &[f64]) -> PrefixWeightIndex {
        let mut idx = PrefixWeightIndex::new();
        for &w in weights {
            idx.append(w).unwrap();
        }
        idx
    }

    #[test]
    fn append_accumulates_total() {
        let idx = build(&[1.0, 3.0]);
        assert_eq!(idx.total(), 4.0);
        assert_eq!(idx.len(), 2);
    }

    #[test]
    fn zero_weight_gets_index_but_is_never_drawn() {
        let mut idx = PrefixWeightIndex::new();
        assert_eq!(idx.append(2.0).unwrap(), 0);
        assert_eq!(idx.append(0.0).unwrap(), 1);
        assert_eq!(idx.append(1.0).unwrap(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            assert_ne!(idx.sample(&mut rng).unwrap(), 1);
        }
    }

    #[test]
    fn million_unit_appends_sum_exactly() {
        let mut idx = PrefixWeightIndex::with_capacity(1_000_000);
        for _ in 0..1_000_000 {
            idx.append(1.0).unwrap();
        }
        assert_eq!(idx.total(), 1e6);
        assert_eq!(idx.prefix(1_000_000), 1e6);
    }

    #[test]
    fn negative_and_nan_weights_are_rejected() {
        let mut idx = PrefixWeightIndex::new();
        assert!(idx.append(-1.0).is_err());
        assert!(idx.append(f64::NAN).is_err());
        assert!(idx.is_empty());
    }

    #[test]
    fn empty_or_zero_total_cannot_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            PrefixWeightIndex::new().sample(&mut rng),
            Err(Error::NoSelectablePoint)
        );
        assert_eq!(
            build(&[0.0, 0.0]).sample(&mut rng),
            Err(Error::NoSelectablePoint)
        );
    }

    #[test]
    fn single_weight_always_index_zero() {
        let idx = build(&[5.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            assert_eq!(idx.sample(&mut rng).unwrap(), 0);
        }
    }

    #[test]
    fn boundary_maps_to_next_positive_index() {
        let idx = build(&[1.0, 0.0, 0.0, 2.0, 1.0]);
        assert_eq!(idx.locate(0.0).unwrap(), 0);
        assert_eq!(idx.locate(1.0).unwrap(), 3);
        assert_eq!(idx.locate(3.0).unwrap(), 4);
        assert_eq!(idx.locate(3.999).unwrap(), 4);
        // past the end clamps to the last positive weight
        assert_eq!(idx.locate(4.0).unwrap(), 4);
    }

    #[test]
    fn scaling_preserves_proportions() {
        let mut idx = build(&[1.0, 3.0, 4.0]);
        idx.scale_all(0.25);
        assert_eq!(idx.total(), 2.0);
        assert_eq!(idx.locate(0.25).unwrap(), 1);
        assert_eq!(idx.locate(1.0).unwrap(), 2);
    }

    proptest! {
        // Inverse-prefix search partitions [0, total) into intervals whose
        // lengths are exactly the given weights.
        #[test]
        fn intervals_match_weights(weights in prop::collection::vec(0u32..6, 1..=8)) {
            let ws: Vec<f64> = weights.iter().map(|&w| w as f64).collect();
            prop_assume!(ws.iter().sum::<f64>() > 0.0);
            let idx = build(&ws);
            let mut lo = 0.0;
            for (i, &w) in ws.iter().enumerate() {
                let hi = lo + w;
                if w > 0.0 {
                    prop_assert_eq!(idx.locate(lo).unwrap(), i);
                    prop_assert_eq!(idx.locate(hi.next_down()).unwrap(), i);
                    prop_assert_eq!(idx.locate(0.5 * (lo + hi)).unwrap(), i);
                }
                prop_assert_eq!(idx.prefix(i + 1), hi);
                lo = hi;
            }
        }

        #[test]
        fn prefix_sums_are_nondecreasing(weights in prop::collection::vec(0.0f64..10.0, 1..200)) {
            let idx = build(&weights);
            let mut prev = 0.0;
            for i in 0..=weights.len() {
                let p = idx.prefix(i);
                prop_assert!(p >= prev);
                prev = p;
            }
            let direct: f64 = weights.iter().sum();
            prop_assert!((idx.total() - direct).abs() <= 1e-12 * direct.max(1.0));
        }
    }
}
