//! Synthetic workloads shared by the benchmarks.

use gpar_core::DatasetSplit;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random graph with `entities` nodes, `relations` labels and about
/// `triples` edges. Ten percent of the edges are held out as a test split.
pub fn synthetic(entities: usize, relations: usize, triples: usize, seed: u64) -> DatasetSplit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = (0..entities).map(|i| format!("e{i}")).collect();
    let rels: Vec<String> = (0..relations).map(|i| format!("r{i}")).collect();
    let rows: Vec<(&str, &str, &str)> = (0..triples)
        .map(|_| {
            let h = rng.gen_range(0..entities);
            let t = rng.gen_range(0..entities);
            (names[h].as_str(), rels[rng.gen_range(0..relations)].as_str(), names[t].as_str())
        })
        .collect();
    let cut = rows.len() / 10;
    DatasetSplit::from_strings(&rows[cut..], &[], &rows[..cut])
}
