//! One AROW linear learner per trellis edge.
//!
//! Each learner sees the whole training set with a binary label derived from
//! whether its edge lies on the path assigned to the sample's class. The
//! learners never interact, so they are trained in parallel and the result
//! does not depend on the number of worker threads.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Result, WltlsError};
use crate::model::ClassAssignment;
use crate::sparse::SparseVector;
use crate::trellis::TrellisGraph;

/// Diagonal AROW state for one binary problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ArowState {
    mean: Vec<f64>,
    variance: Vec<f64>,
    r: f64,
}

impl ArowState {
    pub fn new(num_features: usize, r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(WltlsError::InvalidParameter(format!(
                "AROW regularization r must be positive, got {}",
                r
            )));
        }
        Ok(ArowState {
            mean: vec![0.0; num_features],
            variance: vec![1.0; num_features],
            r,
        })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn variance(&self) -> &[f64] {
        &self.variance
    }

    pub fn into_mean(self) -> Vec<f64> {
        self.mean
    }

    pub fn margin(&self, x: &SparseVector) -> f64 {
        x.dot_dense(&self.mean)
    }

    /// One AROW step on `(x, y)` with `y ∈ {-1, +1}`. Returns whether the
    /// state changed (it does not when `y·μ·x ≥ 1`). Features outside the
    /// state's dimension are ignored.
    pub fn update(&mut self, x: &SparseVector, y: f64) -> bool {
        let margin = y * self.margin(x);
        if margin >= 1.0 {
            return false;
        }
        let d = self.mean.len();
        let confidence: f64 = x
            .iter()
            .filter(|&(i, _)| (i as usize) < d)
            .map(|(i, v)| self.variance[i as usize] * v * v)
            .sum();
        let beta = 1.0 / (confidence + self.r);
        let alpha = (1.0 - margin) * beta;
        for (i, v) in x.iter() {
            let i = i as usize;
            if i >= d {
                continue;
            }
            let sv = self.variance[i] * v;
            self.mean[i] += alpha * y * sv;
            self.variance[i] -= beta * sv * sv;
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub r: f64,
    pub seed: u64,
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 5,
            r: 1.0,
            seed: 0,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(WltlsError::InvalidParameter("epochs must be positive".into()));
        }
        if self.threads == 0 {
            return Err(WltlsError::InvalidParameter("threads must be positive".into()));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(WltlsError::InvalidParameter(format!(
                "r must be positive, got {}",
                self.r
            )));
        }
        Ok(())
    }
}

/// Weights of one edge learner, stored as `f32`.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightVector {
    Dense(Vec<f32>),
    /// Strictly increasing indices with nonzero values.
    Sparse { indices: Vec<u32>, values: Vec<f32> },
}

impl WeightVector {
    pub fn from_dense_f64(w: &[f64]) -> Self {
        WeightVector::Dense(w.iter().map(|&v| v as f32).collect())
    }

    pub fn nnz(&self) -> usize {
        match self {
            WeightVector::Dense(w) => w.iter().filter(|&&v| v != 0.0).count(),
            WeightVector::Sparse { indices, .. } => indices.len(),
        }
    }

    pub fn get(&self, i: usize) -> f32 {
        match self {
            WeightVector::Dense(w) => w.get(i).copied().unwrap_or(0.0),
            WeightVector::Sparse { indices, values } => indices
                .binary_search(&(i as u32))
                .map_or(0.0, |p| values[p]),
        }
    }

    pub fn max_abs(&self) -> f32 {
        let values: &[f32] = match self {
            WeightVector::Dense(w) => w,
            WeightVector::Sparse { values, .. } => values,
        };
        values.iter().fold(0.0f32, |m, v| m.max(v.abs()))
    }

    pub fn dot(&self, x: &SparseVector) -> f64 {
        match self {
            WeightVector::Dense(w) => {
                let mut acc = 0.0;
                for (i, v) in x.iter() {
                    if let Some(&wi) = w.get(i as usize) {
                        acc += wi as f64 * v;
                    }
                }
                acc
            }
            WeightVector::Sparse { indices, values } => {
                let mut acc = 0.0;
                let mut lo = 0;
                for (i, v) in x.iter() {
                    match indices[lo..].binary_search(&i) {
                        Ok(p) => {
                            acc += values[lo + p] as f64 * v;
                            lo += p + 1;
                        }
                        Err(p) => lo += p,
                    }
                    if lo >= indices.len() {
                        break;
                    }
                }
                acc
            }
        }
    }

    /// Zeroes every weight with `|w| ≤ lambda`.
    pub fn thresholded(&self, lambda: f64) -> WeightVector {
        match self {
            WeightVector::Dense(w) => WeightVector::Dense(
                w.iter()
                    .map(|&v| if v.abs() as f64 <= lambda { 0.0 } else { v })
                    .collect(),
            ),
            WeightVector::Sparse { indices, values } => {
                let (indices, values) = indices
                    .iter()
                    .zip(values)
                    .filter(|(_, v)| v.abs() as f64 > lambda)
                    .map(|(&i, &v)| (i, v))
                    .unzip();
                WeightVector::Sparse { indices, values }
            }
        }
    }

    /// Re-encodes as sparse when that is smaller on disk (8 bytes per
    /// nonzero against 4 per feature), otherwise as dense.
    pub fn compacted(&self, num_features: usize) -> WeightVector {
        let nnz = self.nnz();
        if 8 * nnz < 4 * num_features {
            let (indices, values) = (0..num_features)
                .map(|i| (i as u32, self.get(i)))
                .filter(|(_, v)| *v != 0.0)
                .unzip();
            WeightVector::Sparse { indices, values }
        } else {
            WeightVector::Dense((0..num_features).map(|i| self.get(i)).collect())
        }
    }
}

/// The trained edge learners.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginModel {
    num_features: usize,
    weights: Vec<WeightVector>,
}

impl MarginModel {
    pub fn new(num_features: usize, weights: Vec<WeightVector>) -> Result<Self> {
        for (j, w) in weights.iter().enumerate() {
            let bad = match w {
                WeightVector::Dense(v) => v.len() != num_features,
                WeightVector::Sparse { indices, values } => {
                    indices.len() != values.len()
                        || indices.windows(2).any(|p| p[0] >= p[1])
                        || indices.last().is_some_and(|&i| i as usize >= num_features)
                }
            };
            if bad {
                return Err(WltlsError::DimensionMismatch(format!(
                    "weight vector {} is inconsistent with d = {}",
                    j, num_features
                )));
            }
        }
        Ok(MarginModel {
            num_features,
            weights,
        })
    }

    /// An all-zero model.
    pub fn zeros(num_features: usize, num_edges: usize) -> Self {
        MarginModel {
            num_features,
            weights: vec![
                WeightVector::Sparse {
                    indices: Vec::new(),
                    values: Vec::new(),
                };
                num_edges
            ],
        }
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn num_edges(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[WeightVector] {
        &self.weights
    }

    pub fn nnz(&self) -> usize {
        self.weights.iter().map(WeightVector::nnz).sum()
    }

    pub fn max_abs_weight(&self) -> f32 {
        self.weights.iter().fold(0.0, |m, w| m.max(w.max_abs()))
    }

    /// `f_j(x)` for every edge.
    pub fn margins(&self, x: &SparseVector) -> Vec<f64> {
        let mut out = vec![0.0; self.weights.len()];
        self.margins_into(x, &mut out);
        out
    }

    pub fn margins_into(&self, x: &SparseVector, out: &mut [f64]) {
        for (o, w) in out.iter_mut().zip(&self.weights) {
            *o = w.dot(x);
        }
    }

    pub fn map_weights<F: Fn(&WeightVector) -> WeightVector + Sync + Send>(&self, f: F) -> MarginModel {
        MarginModel {
            num_features: self.num_features,
            weights: self.weights.par_iter().map(f).collect(),
        }
    }
}

/// Sorted edge lists of every class's assigned path.
#[derive(Debug, Clone)]
pub struct ClassPaths {
    paths: Vec<Vec<usize>>,
}

impl ClassPaths {
    pub fn new(graph: &TrellisGraph, assignment: &ClassAssignment) -> Result<Self> {
        if assignment.num_classes() != graph.num_classes() {
            return Err(WltlsError::DimensionMismatch(format!(
                "assignment has {} classes, graph has {}",
                assignment.num_classes(),
                graph.num_classes()
            )));
        }
        let paths = (0..graph.num_classes())
            .map(|k| {
                let mut p = graph.index_to_path(assignment.path_of(k) as u64)?;
                p.sort_unstable();
                Ok(p)
            })
            .collect::<Result<_>>()?;
        Ok(ClassPaths { paths })
    }

    pub fn path(&self, class_id: usize) -> &[usize] {
        &self.paths[class_id]
    }

    pub fn label(&self, class_id: usize, edge_id: usize) -> i8 {
        if self.paths[class_id].binary_search(&edge_id).is_ok() {
            1
        } else {
            -1
        }
    }
}

/// `M[class, edge]`: +1 iff the edge lies on the class's assigned path.
pub fn binary_label(
    assignment: &ClassAssignment,
    graph: &TrellisGraph,
    class_id: usize,
    edge_id: usize,
) -> Result<i8> {
    if class_id >= graph.num_classes() || edge_id >= graph.num_edges() {
        return Err(WltlsError::InvalidParameter(format!(
            "class {} / edge {} out of range",
            class_id, edge_id
        )));
    }
    let path = graph.index_to_path(assignment.path_of(class_id) as u64)?;
    Ok(if path.contains(&edge_id) { 1 } else { -1 })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the shuffling stream for one learner and epoch.
pub fn epoch_seed(seed: u64, edge_id: usize, epoch: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ edge_id as u64) ^ epoch as u64)
}

fn train_edge(
    train: &Dataset,
    paths: &ClassPaths,
    edge_id: usize,
    config: &TrainConfig,
) -> Result<WeightVector> {
    let mut state = ArowState::new(train.num_features(), config.r)?;
    let samples = train.samples();
    let labels: Vec<f64> = samples
        .iter()
        .map(|s| paths.label(s.class_id, edge_id) as f64)
        .collect();
    let mut order: Vec<usize> = Vec::with_capacity(samples.len());
    for epoch in 0..config.epochs {
        order.clear();
        order.extend(0..samples.len());
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(epoch_seed(
            config.seed,
            edge_id,
            epoch,
        )));
        for &i in &order {
            state.update(&samples[i].features, labels[i]);
        }
    }
    Ok(WeightVector::from_dense_f64(state.mean()))
}

/// Trains every edge learner for `config.epochs` passes with per-epoch reshuffling.
pub fn train_all(
    train: &Dataset,
    graph: &TrellisGraph,
    assignment: &ClassAssignment,
    config: &TrainConfig,
) -> Result<MarginModel> {
    config.validate()?;
    if train.num_classes() != graph.num_classes() {
        return Err(WltlsError::DimensionMismatch(format!(
            "dataset has {} classes, graph has {}",
            train.num_classes(),
            graph.num_classes()
        )));
    }
    let paths = ClassPaths::new(graph, assignment)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| WltlsError::InvalidParameter(format!("thread pool: {}", e)))?;
    let weights = pool.install(|| {
        (0..graph.num_edges())
            .into_par_iter()
            .map(|j| train_edge(train, &paths, j, config))
            .collect::<Result<Vec<_>>>()
    })?;
    MarginModel::new(train.num_features(), weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_update_trace() {
        let mut s = ArowState::new(1, 1.0).unwrap();
        let x = SparseVector::from_dense(&[1.0]);
        assert!(s.update(&x, 1.0));
        assert_eq!(s.mean(), &[0.5]);
        assert_eq!(s.variance(), &[0.5]);
    }

    #[test]
    fn no_update_when_margin_is_large() {
        let mut s = ArowState::new(2, 1.0).unwrap();
        s.update(&SparseVector::from_dense(&[2.0, 0.0]), 1.0);
        let x = SparseVector::from_dense(&[10.0, 0.0]);
        let before = s.clone();
        assert!(s.margin(&x) >= 1.0);
        assert!(!s.update(&x, 1.0));
        assert_eq!(s, before);
    }

    #[test]
    fn untouched_features_keep_their_state() {
        let mut s = ArowState::new(3, 0.5).unwrap();
        s.update(&SparseVector::from_dense(&[0.0, 1.0, 0.0]), -1.0);
        assert_eq!(s.mean()[0], 0.0);
        assert_eq!(s.variance()[2], 1.0);
        assert!(s.mean()[1] < 0.0);
    }

    #[test]
    fn separable_pair_is_learned() {
        let a = SparseVector::from_dense(&[1.0, 0.2]);
        let b = SparseVector::from_dense(&[0.1, 1.0]);
        let mut s = ArowState::new(2, 1.0).unwrap();
        for _ in 0..10 {
            s.update(&a, 1.0);
            s.update(&b, -1.0);
        }
        assert!(s.margin(&a) > 0.0);
        assert!(s.margin(&b) < 0.0);
    }

    #[test]
    fn rejects_bad_r() {
        assert!(ArowState::new(3, 0.0).is_err());
        assert!(ArowState::new(3, f64::NAN).is_err());
    }

    #[test]
    fn sparse_and_dense_dot_agree() {
        let dense = WeightVector::Dense(vec![0.0, 1.5, 0.0, -2.0, 0.25, 0.0, 0.0, 0.0]);
        let sparse = dense.compacted(8);
        assert!(matches!(sparse, WeightVector::Sparse { .. }));
        let x = SparseVector::from_pairs([(1, 2.0), (2, 7.0), (4, 4.0)]).unwrap();
        assert_eq!(dense.dot(&x), sparse.dot(&x));
        assert_eq!(dense.dot(&x), 4.0);
    }

    #[test]
    fn threshold_zeroes_small_weights() {
        let w = WeightVector::Dense(vec![0.1, -0.25, 0.25, 0.0, 1.0]);
        let t = w.thresholded(0.25);
        assert_eq!(t, WeightVector::Dense(vec![0.0, 0.0, 0.0, 0.0, 1.0]));
        assert_eq!(t.compacted(5).nnz(), 1);
    }

    #[test]
    fn margins_are_linear() {
        let m = MarginModel::new(
            3,
            vec![
                WeightVector::Dense(vec![1.0, 2.0, 3.0]),
                WeightVector::Dense(vec![-1.0, 0.5, 0.0]),
            ],
        )
        .unwrap();
        let x = SparseVector::from_pairs([(1, 2.0)]).unwrap();
        assert_eq!(m.margins(&x), vec![4.0, 1.0]);
        assert_eq!(m.margins(&SparseVector::new()), vec![0.0, 0.0]);
    }

    #[test]
    fn epoch_seeds_differ() {
        assert_ne!(epoch_seed(0, 0, 0), epoch_seed(0, 1, 0));
        assert_ne!(epoch_seed(0, 0, 0), epoch_seed(0, 0, 1));
        assert_ne!(epoch_seed(0, 0, 0), epoch_seed(1, 0, 0));
    }
}
