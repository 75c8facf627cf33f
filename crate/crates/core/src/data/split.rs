use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Train/test/validation partition in 7:2:1 proportion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split<W> {
    pub train: Vec<W>,
    pub test: Vec<W>,
    pub val: Vec<W>,
}

/// Which role each share of the 7:2:1 ratio plays; written into caches.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRoles {
    pub train: String,
    pub test: String,
    pub val: String,
}

impl Default for SplitRoles {
    fn default() -> Self {
        Self {
            train: "floor(0.7 N)".into(),
            test: "floor(0.2 N)".into(),
            val: "remainder (~0.1 N)".into(),
        }
    }
}

/// Seeded shuffle, then ⌊0.7N⌋ train, ⌊0.2N⌋ test, remainder validation.
pub fn split_dataset<W>(items: Vec<W>, seed: u64) -> Split<W> {
    let n = items.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = 7 * n / 10;
    let n_test = 2 * n / 10;
    let mut slots: Vec<Option<W>> = items.into_iter().map(Some).collect();
    let mut take = |range: std::ops::Range<usize>| -> Vec<W> {
        order[range].iter().map(|&i| slots[i].take().expect("each index once")).collect()
    };
    let train = take(0..n_train);
    let test = take(n_train..n_train + n_test);
    let val = take(n_train + n_test..n);
    Split { train, test, val }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_items_split_seven_two_one() {
        let s = split_dataset((0..10).collect::<Vec<_>>(), 1);
        assert_eq!((s.train.len(), s.test.len(), s.val.len()), (7, 2, 1));
        let mut all: Vec<_> = s.train.iter().chain(&s.test).chain(&s.val).copied().collect();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn empty_input_gives_empty_sets() {
        let s = split_dataset(Vec::<u8>::new(), 1);
        assert!(s.train.is_empty() && s.test.is_empty() && s.val.is_empty());
    }

    #[test]
    fn same_seed_same_assignment() {
        let a = split_dataset((0..100).collect::<Vec<_>>(), 5);
        let b = split_dataset((0..100).collect::<Vec<_>>(), 5);
        assert_eq!(a, b);
        let c = split_dataset((0..100).collect::<Vec<_>>(), 6);
        assert_ne!(a, c);
    }
}
