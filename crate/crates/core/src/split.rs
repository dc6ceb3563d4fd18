//! Deterministic shuffled train/validation split.

use alloc::vec::Vec;

use thiserror::Error;

use crate::rng::{shuffle, Purpose, Substream};

/// Smallest pool accepted by [`split_train_val`].
pub const MIN_POOL: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SplitError {
    #[error("pool of {0} records is too small to split (need at least {MIN_POOL})")]
    PoolTooSmall(usize),
    #[error("split ratio must lie in (0, 1)")]
    BadRatio,
}

/// Number of training items for a pool of `n` at `ratio` (floor).
pub fn train_size(n: usize, ratio: f64) -> usize {
    libm::floor(ratio * n as f64 + 1e-9) as usize
}

/// Shuffles indices with the `Split` substream of `seed`, then returns
/// `(train, val)` with `floor(ratio·N)` training items.
pub fn split_train_val<T>(pool: Vec<T>, ratio: f64, seed: u64) -> Result<(Vec<T>, Vec<T>), SplitError> {
    if pool.len() < MIN_POOL {
        return Err(SplitError::PoolTooSmall(pool.len()));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(SplitError::BadRatio);
    }
    let n_train = train_size(pool.len(), ratio);
    let mut order: Vec<usize> = (0..pool.len()).collect();
    shuffle(&mut order, &mut Substream::new(seed, 0, Purpose::Split));
    let mut slots: Vec<Option<T>> = pool.into_iter().map(Some).collect();
    let mut take = |ids: &[usize]| -> Vec<T> {
        ids.iter().map(|&i| slots[i].take().unwrap()).collect()
    };
    let train = take(&order[..n_train]);
    let val = take(&order[n_train..]);
    Ok((train, val))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        let (t, v) = split_train_val((0..1000).collect::<Vec<_>>(), 0.9, 1).unwrap();
        assert_eq!((t.len(), v.len()), (900, 100));
        let (t, v) = split_train_val((0..10).collect::<Vec<_>>(), 0.9, 1).unwrap();
        assert_eq!((t.len(), v.len()), (9, 1));
        assert_eq!(
            split_train_val((0..9).collect::<Vec<_>>(), 0.9, 1),
            Err(SplitError::PoolTooSmall(9))
        );
    }

    #[test]
    fn deterministic_and_disjoint() {
        let a = split_train_val((0..200).collect::<Vec<_>>(), 0.9, 42).unwrap();
        let b = split_train_val((0..200).collect::<Vec<_>>(), 0.9, 42).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<_> = a.0.iter().chain(&a.1).copied().collect();
        all.sort();
        assert_eq!(all, (0..200).collect::<Vec<_>>());
        let c = split_train_val((0..200).collect::<Vec<_>>(), 0.9, 43).unwrap();
        assert_ne!(a.1, c.1);
    }
}
