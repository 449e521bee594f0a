//! Synthetic sparse multiclass data shaped like a bag-of-words corpus.
//!
//! Every class owns a small vocabulary of features drawn from the full
//! feature range, so vocabularies overlap between classes. A sample draws
//! tokens from its class vocabulary (with per-class Gaussian jitter on the
//! token weights) mixed with background tokens from a Zipf-like global
//! distribution, then is L2-normalized. One-vs-rest problems on such data are
//! close to linearly separable while problems that pool many classes on each
//! side are not, which is the regime the slice width trades across.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use crate::data::{Dataset, LabelMap, Sample};
use crate::error::{Result, WltlsError};
use crate::sparse::SparseVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub num_classes: usize,
    pub num_features: usize,
    pub vocabulary_size: usize,
    pub tokens_per_sample: usize,
    /// Probability that a token comes from the background distribution.
    pub background_rate: f64,
    /// Standard deviation of the per-sample jitter on vocabulary weights.
    pub jitter: f64,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    /// Shaped like the `sector` benchmark: 105 classes, ~55k features,
    /// ~22 nonzeros per sample.
    fn default() -> Self {
        SynthConfig {
            num_classes: 105,
            num_features: 55_000,
            vocabulary_size: 80,
            tokens_per_sample: 24,
            background_rate: 0.8,
            jitter: 0.6,
            train_per_class: 100,
            test_per_class: 40,
            seed: 20_18,
        }
    }
}

struct ClassProfile {
    features: Vec<u32>,
    weights: Vec<f64>,
}

/// Generates `(train, test)` with shared label map and feature dimension.
pub fn generate(config: &SynthConfig) -> Result<(Dataset, Dataset)> {
    let c = config;
    if c.num_classes < 2
        || c.vocabulary_size == 0
        || c.vocabulary_size > c.num_features
        || c.tokens_per_sample == 0
        || c.train_per_class == 0
        || c.test_per_class == 0
        || !(0.0..=1.0).contains(&c.background_rate)
        || c.jitter.is_nan()
        || c.jitter < 0.0
    {
        return Err(WltlsError::InvalidParameter(format!(
            "invalid synthetic configuration {:?}",
            c
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let profiles: Vec<ClassProfile> = (0..c.num_classes)
        .map(|_| {
            let mut features: Vec<u32> = sample(&mut rng, c.num_features, c.vocabulary_size)
                .into_iter()
                .map(|i| i as u32)
                .collect();
            features.sort_unstable();
            let weights = features.iter().map(|_| rng.gen_range(0.2..1.0)).collect();
            ClassProfile { features, weights }
        })
        .collect();
    let background = WeightedIndex::new((1..=c.num_features).map(|r| 1.0 / r as f64))
        .expect("positive weights");
    // Background ranks are scattered over the feature range.
    let mut rank_to_feature: Vec<u32> = (0..c.num_features as u32).collect();
    rand::seq::SliceRandom::shuffle(&mut rank_to_feature[..], &mut rng);
    let jitter = Normal::new(0.0, c.jitter).expect("finite jitter");

    let label_map = LabelMap::from_labels((1..=c.num_classes as i64).collect())?;
    let draw = |per_class: usize, rng: &mut ChaCha8Rng| -> Result<Dataset> {
        let mut samples = Vec::with_capacity(per_class * c.num_classes);
        let mut dense = vec![0.0f64; c.num_features];
        let mut touched = Vec::new();
        for _ in 0..per_class {
            for (class_id, profile) in profiles.iter().enumerate() {
                let scaled: Vec<f64> = profile
                    .weights
                    .iter()
                    .map(|w| (w * (1.0 + jitter.sample(rng))).max(0.01))
                    .collect();
                let class_dist = WeightedIndex::new(&scaled).expect("positive weights");
                for _ in 0..c.tokens_per_sample {
                    let f = if rng.gen_bool(c.background_rate) {
                        rank_to_feature[background.sample(rng)]
                    } else {
                        profile.features[class_dist.sample(rng)]
                    } as usize;
                    if dense[f] == 0.0 {
                        touched.push(f);
                    }
                    dense[f] += 1.0;
                }
                touched.sort_unstable();
                let norm = touched.iter().map(|&f| dense[f] * dense[f]).sum::<f64>().sqrt();
                let features = SparseVector::from_pairs(
                    touched.iter().map(|&f| (f as u32, dense[f] / norm)),
                )?;
                for &f in &touched {
                    dense[f] = 0.0;
                }
                touched.clear();
                samples.push(Sample { features, class_id });
            }
        }
        Dataset::new(samples, c.num_features, label_map.clone())
    };
    let train = draw(c.train_per_class, &mut rng)?;
    let test = draw(c.test_per_class, &mut rng)?;
    Ok((train, test))
}
