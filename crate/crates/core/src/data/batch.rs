use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Shuffles `0..count` under `seed` and cuts it into batches of `batch_size`,
/// keeping the final partial batch. Returns index batches.
pub fn make_batches(count: usize, batch_size: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled_batches(count, batch_size, &mut rng)
}

pub(crate) fn shuffled_batches(count: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    assert!(batch_size >= 1, "batch_size must be at least 1");
    let mut order: Vec<usize> = (0..count).collect();
    order.shuffle(rng);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sizes_and_determinism() {
        let b = make_batches(10, 4, 7);
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 4, 2]);
        assert_eq!(b, make_batches(10, 4, 7));
        assert_ne!(b, make_batches(10, 4, 8));
    }

    proptest! {
        #[test]
        fn every_item_exactly_once(count in 0usize..300, batch in 1usize..40, seed: u64) {
            let mut all: Vec<usize> = make_batches(count, batch, seed).into_iter().flatten().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..count).collect::<Vec<_>>());
        }
    }
}
