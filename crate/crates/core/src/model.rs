//! The assembled classifier: graph, class↔path assignment, edge learners and
//! label map, plus pruning and the binary model file.
//!
//! File layout (little-endian):
//!
//! ```text
//! "WLTLS" | version u16 | K u32 | b u32 | d u32 | ℓ u32 | loss tag u8 | seed u64
//! permutation: K × u32 (class id → path index)
//! label map:   K × i64 (class id → original label)
//! ℓ × { 0u8, d × f32 }  or  { 1u8, nnz u32, nnz × (u32 index, f32 value) }
//! crc32 of everything above: u32
//! ```
//!
//! The graph itself is never stored; it is rebuilt from `(K, b)`.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{Dataset, LabelMap};
use crate::decode::{DecodeResult, Decoder};
use crate::error::{Result, WltlsError};
use crate::eval;
use crate::learner::{train_all, MarginModel, TrainConfig, WeightVector};
use crate::loss::LossKind;
use crate::sparse::SparseVector;
use crate::trellis::TrellisGraph;

pub const MAGIC: &[u8; 5] = b"WLTLS";
pub const FORMAT_VERSION: u16 = 1;
const NO_SEED: u64 = u64::MAX;

/// A bijection between class ids and canonical path indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassAssignment {
    path_of: Vec<u32>,
    class_of: Vec<u32>,
    seed: Option<u64>,
}

impl ClassAssignment {
    /// Seeded Fisher–Yates permutation.
    pub fn random(num_classes: usize, seed: u64) -> Result<Self> {
        if num_classes < 2 {
            return Err(WltlsError::InvalidParameter(format!(
                "need at least 2 classes, got {}",
                num_classes
            )));
        }
        let mut perm: Vec<u32> = (0..num_classes as u32).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut a = Self::from_permutation(perm)?;
        a.seed = Some(seed);
        Ok(a)
    }

    pub fn identity(num_classes: usize) -> Self {
        Self::from_permutation((0..num_classes as u32).collect()).expect("identity is a bijection")
    }

    pub fn from_permutation(path_of: Vec<u32>) -> Result<Self> {
        let mut class_of = vec![u32::MAX; path_of.len()];
        for (class, &p) in path_of.iter().enumerate() {
            let slot = class_of.get_mut(p as usize).ok_or_else(|| {
                WltlsError::InvalidParameter(format!("path index {} out of range", p))
            })?;
            if *slot != u32::MAX {
                return Err(WltlsError::InvalidParameter(format!(
                    "path index {} assigned twice",
                    p
                )));
            }
            *slot = class as u32;
        }
        Ok(ClassAssignment {
            path_of,
            class_of,
            seed: None,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.path_of.len()
    }

    pub fn path_of(&self, class_id: usize) -> usize {
        self.path_of[class_id] as usize
    }

    pub fn class_of(&self, path_index: usize) -> usize {
        self.class_of[path_index] as usize
    }

    pub fn permutation(&self) -> &[u32] {
        &self.path_of
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }
}

/// Size and sparsity figures for a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelStats {
    pub num_classes: usize,
    pub slice_width: usize,
    pub num_features: usize,
    pub num_edges: usize,
    pub num_vertices: usize,
    pub nnz: usize,
    pub nonzero_fraction: f64,
    /// `ℓ · d · 4`: every learner stored as a dense `f32` array.
    pub bytes_dense: usize,
    /// Every learner stored sparse: 5 header bytes plus 8 per nonzero.
    pub bytes_sparse: usize,
    /// Size of the weight payload as this model would actually be written.
    pub bytes_payload: usize,
}

impl ModelStats {
    /// Operation count of one prediction for inputs with `mean_nnz` active
    /// features: margins plus the two linear passes over the graph.
    pub fn decode_cost(&self, mean_nnz: f64) -> f64 {
        mean_nnz * self.num_edges as f64 + (self.num_vertices + 2 * self.num_edges) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PruneReport {
    pub lambda: f64,
    pub nnz_before: usize,
    pub nnz_after: usize,
    pub accuracy_before: f64,
    pub accuracy_after: f64,
}

impl PruneReport {
    pub fn degradation(&self) -> f64 {
        self.accuracy_before - self.accuracy_after
    }

    pub fn nnz_reduction(&self) -> f64 {
        if self.nnz_before == 0 {
            0.0
        } else {
            1.0 - self.nnz_after as f64 / self.nnz_before as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct WltlsModel {
    graph: TrellisGraph,
    assignment: ClassAssignment,
    label_map: LabelMap,
    margins: MarginModel,
    loss: LossKind,
}

impl PartialEq for WltlsModel {
    fn eq(&self, other: &Self) -> bool {
        self.graph.num_classes() == other.graph.num_classes()
            && self.graph.slice_width() == other.graph.slice_width()
            && self.assignment == other.assignment
            && self.label_map == other.label_map
            && self.margins == other.margins
            && self.loss == other.loss
    }
}

impl WltlsModel {
    pub fn new(
        graph: TrellisGraph,
        assignment: ClassAssignment,
        label_map: LabelMap,
        margins: MarginModel,
        loss: LossKind,
    ) -> Result<Self> {
        let k = graph.num_classes();
        if assignment.num_classes() != k || label_map.len() != k {
            return Err(WltlsError::DimensionMismatch(format!(
                "graph has {} classes, assignment {}, label map {}",
                k,
                assignment.num_classes(),
                label_map.len()
            )));
        }
        if margins.num_edges() != graph.num_edges() {
            return Err(WltlsError::DimensionMismatch(format!(
                "graph has {} edges but {} weight vectors",
                graph.num_edges(),
                margins.num_edges()
            )));
        }
        Ok(WltlsModel {
            graph,
            assignment,
            label_map,
            margins,
            loss,
        })
    }

    /// Builds the graph for the dataset's classes, assigns paths at random
    /// (seeded by `config.seed`) and trains every edge learner.
    pub fn train(train: &Dataset, slice_width: usize, loss: LossKind, config: &TrainConfig) -> Result<Self> {
        let graph = TrellisGraph::new(train.num_classes(), slice_width)?;
        let assignment = ClassAssignment::random(train.num_classes(), config.seed)?;
        let margins = train_all(train, &graph, &assignment, config)?;
        WltlsModel::new(graph, assignment, train.label_map().clone(), margins, loss)
    }

    pub fn graph(&self) -> &TrellisGraph {
        &self.graph
    }

    pub fn assignment(&self) -> &ClassAssignment {
        &self.assignment
    }

    pub fn label_map(&self) -> &LabelMap {
        &self.label_map
    }

    pub fn margin_model(&self) -> &MarginModel {
        &self.margins
    }

    pub fn num_features(&self) -> usize {
        self.margins.num_features()
    }

    pub fn num_classes(&self) -> usize {
        self.graph.num_classes()
    }

    /// Default decoding loss.
    pub fn loss(&self) -> LossKind {
        self.loss
    }

    pub fn with_loss(mut self, loss: LossKind) -> Self {
        self.loss = loss;
        self
    }

    pub fn margins(&self, x: &SparseVector) -> Vec<f64> {
        self.margins.margins(x)
    }

    pub fn decoder(&self, loss: LossKind) -> Decoder<'_> {
        Decoder::new(&self.graph, &self.assignment, loss).expect("model invariants hold")
    }

    pub fn predict(&self, x: &SparseVector, loss: LossKind) -> Result<DecodeResult> {
        self.decoder(loss).decode(&self.margins, x)
    }

    /// Decodes every sample in parallel; output order matches the dataset.
    pub fn predict_all(&self, data: &Dataset, loss: LossKind) -> Result<Vec<DecodeResult>> {
        data.samples()
            .par_iter()
            .map_init(
                || self.decoder(loss),
                |dec, s| dec.decode(&self.margins, &s.features),
            )
            .collect()
    }

    /// Zeroes every weight with `|w| ≤ lambda` and re-encodes the learners.
    pub fn prune(&self, lambda: f64) -> Result<WltlsModel> {
        if lambda.is_nan() || lambda < 0.0 {
            return Err(WltlsError::InvalidParameter(format!(
                "pruning threshold must be non-negative, got {}",
                lambda
            )));
        }
        let d = self.num_features();
        let margins = self
            .margins
            .map_weights(|w| w.thresholded(lambda).compacted(d));
        Ok(WltlsModel {
            margins,
            ..self.clone()
        })
    }

    pub fn stats(&self) -> ModelStats {
        let d = self.num_features();
        let l = self.graph.num_edges();
        let nnz = self.margins.nnz();
        let bytes_sparse = self.margins.weights().iter().map(|w| 5 + 8 * w.nnz()).sum();
        let bytes_payload = self
            .margins
            .weights()
            .iter()
            .map(|w| match w {
                WeightVector::Dense(v) => 1 + 4 * v.len(),
                WeightVector::Sparse { indices, .. } => 5 + 8 * indices.len(),
            })
            .sum();
        ModelStats {
            num_classes: self.num_classes(),
            slice_width: self.graph.slice_width(),
            num_features: d,
            num_edges: l,
            num_vertices: self.graph.num_vertices(),
            nnz,
            nonzero_fraction: if d * l == 0 {
                0.0
            } else {
                nnz as f64 / (d * l) as f64
            },
            bytes_dense: l * d * 4,
            bytes_sparse,
            bytes_payload,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let k = self.num_classes();
        let mut out = Vec::with_capacity(64 + 12 * k + self.stats().bytes_payload);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        for v in [
            k,
            self.graph.slice_width(),
            self.num_features(),
            self.graph.num_edges(),
        ] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.push(self.loss.tag());
        out.extend_from_slice(&self.assignment.seed.unwrap_or(NO_SEED).to_le_bytes());
        for &p in self.assignment.permutation() {
            out.extend_from_slice(&p.to_le_bytes());
        }
        for &label in self.label_map.labels() {
            out.extend_from_slice(&label.to_le_bytes());
        }
        for w in self.margins.weights() {
            match w {
                WeightVector::Dense(v) => {
                    out.push(0);
                    for x in v {
                        out.extend_from_slice(&x.to_le_bytes());
                    }
                }
                WeightVector::Sparse { indices, values } => {
                    out.push(1);
                    out.extend_from_slice(&(indices.len() as u32).to_le_bytes());
                    for (i, x) in indices.iter().zip(values) {
                        out.extend_from_slice(&i.to_le_bytes());
                        out.extend_from_slice(&x.to_le_bytes());
                    }
                }
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<WltlsModel> {
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            return Err(WltlsError::BadMagic);
        }
        if bytes.len() < MAGIC.len() + 2 {
            return Err(WltlsError::Corrupt("truncated header".into()));
        }
        let version = u16::from_le_bytes([bytes[5], bytes[6]]);
        if version != FORMAT_VERSION {
            return Err(WltlsError::UnsupportedVersion {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        if bytes.len() < MAGIC.len() + 2 + 4 {
            return Err(WltlsError::Corrupt("truncated header".into()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(WltlsError::Checksum { stored, computed });
        }

        let mut r = Reader {
            buf: body,
            pos: MAGIC.len() + 2,
        };
        let k = r.u32()? as usize;
        let b = r.u32()? as usize;
        let d = r.u32()? as usize;
        let l = r.u32()? as usize;
        let loss = LossKind::from_tag(r.u8()?)
            .ok_or_else(|| WltlsError::Corrupt("unknown loss tag".into()))?;
        let seed = r.u64()?;

        let graph = TrellisGraph::new(k, b)
            .map_err(|e| WltlsError::Corrupt(format!("bad graph parameters: {}", e)))?;
        if graph.num_edges() != l {
            return Err(WltlsError::Corrupt(format!(
                "header says {} edges but ({}, {}) builds {}",
                l,
                k,
                b,
                graph.num_edges()
            )));
        }
        let perm = (0..k).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let mut assignment = ClassAssignment::from_permutation(perm)
            .map_err(|e| WltlsError::Corrupt(e.to_string()))?;
        assignment.seed = (seed != NO_SEED).then_some(seed);
        let labels = (0..k).map(|_| r.i64()).collect::<Result<Vec<_>>>()?;
        let label_map =
            LabelMap::from_labels(labels).map_err(|e| WltlsError::Corrupt(e.to_string()))?;

        let mut weights = Vec::with_capacity(l);
        for _ in 0..l {
            match r.u8()? {
                0 => {
                    let v = (0..d).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
                    weights.push(WeightVector::Dense(v));
                }
                1 => {
                    let nnz = r.u32()? as usize;
                    if nnz > d {
                        return Err(WltlsError::Corrupt(format!("{} nonzeros with d = {}", nnz, d)));
                    }
                    let mut indices = Vec::with_capacity(nnz);
                    let mut values = Vec::with_capacity(nnz);
                    for _ in 0..nnz {
                        indices.push(r.u32()?);
                        values.push(r.f32()?);
                    }
                    weights.push(WeightVector::Sparse { indices, values });
                }
                t => return Err(WltlsError::Corrupt(format!("unknown vector flag {}", t))),
            }
        }
        if r.pos != body.len() {
            return Err(WltlsError::Corrupt("trailing bytes".into()));
        }
        let margins =
            MarginModel::new(d, weights).map_err(|e| WltlsError::Corrupt(e.to_string()))?;
        WltlsModel::new(graph, assignment, label_map, margins, loss)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        f.sync_all()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<WltlsModel> {
        WltlsModel::from_bytes(&fs::read(path)?)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let bytes = self
            .buf
            .get(self.pos..end)
            .ok_or_else(|| WltlsError::Corrupt("unexpected end of data".into()))?;
        self.pos = end;
        Ok(bytes.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take::<1>()?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take()?))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take()?))
    }
}

/// Candidate pruning thresholds: 0, then `1e-4 · 1.5^i` up to the largest
/// weight magnitude, which closes the grid.
pub fn lambda_grid(max_abs_weight: f64) -> Vec<f64> {
    let mut grid = vec![0.0];
    let mut lambda = 1e-4;
    while lambda < max_abs_weight {
        grid.push(lambda);
        lambda *= 1.5;
    }
    if max_abs_weight > 0.0 {
        grid.push(max_abs_weight);
    }
    grid
}

/// Picks the largest grid threshold whose validation accuracy (decoded with
/// the model's loss) drops by at most `max_degradation` (a fraction, so 0.01
/// is one percentage point).
pub fn tune_prune(
    model: &WltlsModel,
    validation: &Dataset,
    max_degradation: f64,
) -> Result<(f64, WltlsModel, PruneReport)> {
    if validation.is_empty() {
        return Err(WltlsError::EmptyDataset);
    }
    let loss = model.loss();
    let before = eval::accuracy(model, validation, loss)?;
    let grid = lambda_grid(model.margin_model().max_abs_weight() as f64);
    // Scan from the top; the first feasible candidate is the largest one.
    for &lambda in grid.iter().rev() {
        let pruned = model.prune(lambda)?;
        let after = eval::accuracy(&pruned, validation, loss)?;
        if before - after <= max_degradation || lambda == 0.0 {
            let report = PruneReport {
                lambda,
                nnz_before: model.margin_model().nnz(),
                nnz_after: pruned.margin_model().nnz(),
                accuracy_before: before,
                accuracy_after: after,
            };
            return Ok((lambda, pruned, report));
        }
    }
    unreachable!("the grid always contains 0")
}
