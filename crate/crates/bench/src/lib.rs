//! Fixtures shared by the benchmarks and the sweep tool.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use wltls::synth::{self, SynthConfig};
use wltls::{Dataset, TrellisGraph};

/// `n` standard-normal margin vectors sized for `graph`.
pub fn random_margins(graph: &TrellisGraph, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..graph.num_edges()).map(|_| rng.sample(StandardNormal)).collect())
        .collect()
}

/// A scaled-down synthetic corpus that trains in well under a second.
pub fn small_corpus(num_classes: usize) -> (Dataset, Dataset) {
    synth::generate(&SynthConfig {
        num_classes,
        num_features: 20_000,
        train_per_class: 20,
        test_per_class: 5,
        ..SynthConfig::default()
    })
    .expect("valid synthetic configuration")
}

/// The default synthetic corpus with overrides from `SYNTH_*` environment
/// variables (VOCAB, TOKENS, BG, JITTER, D, TRAIN, TEST, SEED).
pub fn synth_config_from_env() -> SynthConfig {
    fn var<T: std::str::FromStr>(name: &str, default: T) -> T {
        std::env::var(format!("SYNTH_{}", name))
            .ok()
            .map(|v| v.parse().unwrap_or_else(|_| panic!("bad SYNTH_{}", name)))
            .unwrap_or(default)
    }
    let d = SynthConfig::default();
    SynthConfig {
        vocabulary_size: var("VOCAB", d.vocabulary_size),
        tokens_per_sample: var("TOKENS", d.tokens_per_sample),
        background_rate: var("BG", d.background_rate),
        jitter: var("JITTER", d.jitter),
        num_features: var("D", d.num_features),
        train_per_class: var("TRAIN", d.train_per_class),
        test_per_class: var("TEST", d.test_per_class),
        seed: var("SEED", d.seed),
        ..d
    }
}
