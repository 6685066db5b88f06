use std::hint::black_box;
use std::time::{Duration, Instant};

use curate::EmbeddingTable;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn table(vocab: usize) -> EmbeddingTable {
    EmbeddingTable::from_entries(
        4,
        (0..vocab).map(|i| (format!("w{i}"), vec![1.0, (i % 7) as f32, 0.5, -1.0])),
    )
    .unwrap()
}

fn time_lookups(table: &EmbeddingTable, keys: &[String], passes: usize) -> Duration {
    (0..5)
        .map(|_| {
            let start = Instant::now();
            let mut hits = 0usize;
            for _ in 0..passes {
                for k in keys {
                    hits += usize::from(black_box(table.lookup(k)).is_some());
                }
            }
            black_box(hits);
            start.elapsed()
        })
        .min()
        .unwrap()
}

fn keys(vocab: usize, n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| format!("w{}", rng.random_range(0..vocab + vocab / 10)))
        .collect()
}

/// Hash lookups: time scales with the number of lookups, not vocabulary size.
/// Both vocabularies are small enough to stay cache-resident, so the
/// comparison sees the lookup algorithm rather than the memory hierarchy.
/// Bounds are loose so that the check survives noisy machines.
#[test]
fn lookup_time_tracks_lookup_count_not_vocab_size() {
    let small = table(4_096);
    let large = table(8_192);
    let small_keys = keys(4_096, 1_000_000, 1);
    let base = time_lookups(&small, &small_keys, 1);
    let bigger_vocab = time_lookups(&large, &keys(8_192, 1_000_000, 1), 1);
    let twice_as_many = time_lookups(&small, &small_keys, 2);

    let vocab_ratio = bigger_vocab.as_secs_f64() / base.as_secs_f64();
    let count_ratio = twice_as_many.as_secs_f64() / base.as_secs_f64();
    assert!(vocab_ratio < 1.6, "doubling vocabulary changed lookup time by {vocab_ratio:.2}x");
    assert!((1.4..3.0).contains(&count_ratio), "doubling lookups changed time by {count_ratio:.2}x");
}
