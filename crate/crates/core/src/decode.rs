//! Loss-based decoding as a shortest path over the trellis.
//!
//! Edge `e_j` gets weight `L(f_j) + Σ_{e ∈ S(e_j) \ e_j} L(-f_e)`, which makes
//! the weight of every class path equal that class's total codeword loss
//! `Σ_j L(M_kj · f_j)`. The `S` groups are contiguous edge ranges, so all
//! weights come from per-group leave-one-out sums plus a suffix sum over
//! deeper groups for sink edges: `O(|V| + |E|)` per query.

use crate::error::{Result, WltlsError};
use crate::learner::MarginModel;
use crate::loss::LossKind;
use crate::model::ClassAssignment;
use crate::sparse::SparseVector;
use crate::trellis::{Codeword, TrellisGraph};

/// Per-term losses are clamped here so sums stay finite.
pub const LOSS_CLAMP: f64 = 1e300;

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeWeights {
    pub w: Vec<f64>,
    /// Number of loss terms that hit [`LOSS_CLAMP`].
    pub clamped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub class_id: usize,
    pub path: Vec<usize>,
    /// Total codeword loss of the predicted class.
    pub total_loss: f64,
    pub clamped: usize,
}

#[inline]
fn clamped_loss(kind: LossKind, z: f64, clamped: &mut usize) -> f64 {
    let v = kind.eval(z);
    if v > LOSS_CLAMP {
        *clamped += 1;
        LOSS_CLAMP
    } else {
        v
    }
}

fn check_margins(graph: &TrellisGraph, margins: &[f64]) -> Result<()> {
    if margins.len() != graph.num_edges() {
        return Err(WltlsError::DimensionMismatch(format!(
            "{} margins for a graph with {} edges",
            margins.len(),
            graph.num_edges()
        )));
    }
    if let Some(&bad) = margins.iter().find(|m| !m.is_finite()) {
        return Err(WltlsError::NonFinite(bad));
    }
    Ok(())
}

/// Fills `out` from per-edge positive losses `pos[j] = L(f_j)` and negative
/// losses `neg[j] = L(-f_j)`. `group_offset` is added to every group total
/// (zero in normal use; path totals shift uniformly by any other value).
fn assemble_weights(
    graph: &TrellisGraph,
    pos: &[f64],
    neg: &[f64],
    group_offset: f64,
    out: &mut [f64],
) {
    let groups = graph.num_groups();
    // Sum of group totals strictly deeper than the current group.
    let mut deeper = 0.0;
    for s in (0..groups).rev() {
        let range = graph.group(s);
        let mut prefix = 0.0;
        for j in range.clone() {
            out[j] = prefix;
            prefix += neg[j];
        }
        let mut suffix = 0.0;
        for j in range.clone().rev() {
            out[j] += suffix + pos[j] + group_offset;
            suffix += neg[j];
            if graph.is_sink_edge(j) {
                out[j] += deeper;
            }
        }
        deeper += prefix + group_offset;
    }
}

/// Edge weights for one query.
pub fn edge_weights(graph: &TrellisGraph, margins: &[f64], kind: LossKind) -> Result<EdgeWeights> {
    check_margins(graph, margins)?;
    let mut clamped = 0;
    let pos: Vec<f64> = margins.iter().map(|&f| clamped_loss(kind, f, &mut clamped)).collect();
    let neg: Vec<f64> = margins.iter().map(|&f| clamped_loss(kind, -f, &mut clamped)).collect();
    let mut w = vec![0.0; margins.len()];
    assemble_weights(graph, &pos, &neg, 0.0, &mut w);
    Ok(EdgeWeights { w, clamped })
}

/// Minimum-weight source-to-sink path (Viterbi over the topological order).
/// Ties go to the smaller incoming edge id.
pub fn shortest_path(graph: &TrellisGraph, weights: &[f64]) -> Result<(Vec<usize>, f64)> {
    if weights.len() != graph.num_edges() {
        return Err(WltlsError::DimensionMismatch(format!(
            "{} weights for a graph with {} edges",
            weights.len(),
            graph.num_edges()
        )));
    }
    let mut dist = vec![0.0; graph.num_vertices()];
    let mut back = vec![usize::MAX; graph.num_vertices()];
    Ok(viterbi(graph, weights, &mut dist, &mut back))
}

fn viterbi(
    graph: &TrellisGraph,
    weights: &[f64],
    dist: &mut [f64],
    back: &mut [usize],
) -> (Vec<usize>, f64) {
    dist[graph.source()] = 0.0;
    for v in 1..graph.num_vertices() {
        let mut best = f64::INFINITY;
        let mut arg = usize::MAX;
        for &j in graph.in_edges(v) {
            let cand = dist[graph.edge(j).tail] + weights[j];
            if arg == usize::MAX || cand < best {
                best = cand;
                arg = j;
            }
        }
        dist[v] = best;
        back[v] = arg;
    }
    let mut path = Vec::with_capacity(graph.num_slices() + 1);
    let mut v = graph.sink();
    while v != graph.source() {
        let j = back[v];
        path.push(j);
        v = graph.edge(j).tail;
    }
    path.reverse();
    (path, dist[graph.sink()])
}

/// Reusable per-thread buffers for decoding many queries against one graph.
pub struct Decoder<'a> {
    graph: &'a TrellisGraph,
    assignment: &'a ClassAssignment,
    kind: LossKind,
    margins: Vec<f64>,
    pos: Vec<f64>,
    neg: Vec<f64>,
    weights: Vec<f64>,
    dist: Vec<f64>,
    back: Vec<usize>,
}

impl<'a> Decoder<'a> {
    pub fn new(
        graph: &'a TrellisGraph,
        assignment: &'a ClassAssignment,
        kind: LossKind,
    ) -> Result<Self> {
        if assignment.num_classes() != graph.num_classes() {
            return Err(WltlsError::DimensionMismatch(format!(
                "assignment has {} classes, graph has {}",
                assignment.num_classes(),
                graph.num_classes()
            )));
        }
        let l = graph.num_edges();
        Ok(Decoder {
            graph,
            assignment,
            kind,
            margins: vec![0.0; l],
            pos: vec![0.0; l],
            neg: vec![0.0; l],
            weights: vec![0.0; l],
            dist: vec![0.0; graph.num_vertices()],
            back: vec![usize::MAX; graph.num_vertices()],
        })
    }

    pub fn decode_margins(&mut self, margins: &[f64]) -> Result<DecodeResult> {
        check_margins(self.graph, margins)?;
        let mut clamped = 0;
        for (j, &f) in margins.iter().enumerate() {
            self.pos[j] = clamped_loss(self.kind, f, &mut clamped);
            self.neg[j] = clamped_loss(self.kind, -f, &mut clamped);
        }
        assemble_weights(self.graph, &self.pos, &self.neg, 0.0, &mut self.weights);
        let (path, total) = viterbi(self.graph, &self.weights, &mut self.dist, &mut self.back);
        let index = self.graph.path_to_index(&path)?;
        Ok(DecodeResult {
            class_id: self.assignment.class_of(index as usize),
            path,
            total_loss: total,
            clamped,
        })
    }

    pub fn decode(&mut self, model: &MarginModel, x: &SparseVector) -> Result<DecodeResult> {
        let mut margins = std::mem::take(&mut self.margins);
        model.margins_into(x, &mut margins);
        let result = self.decode_margins(&margins);
        self.margins = margins;
        result
    }
}

/// Decodes precomputed margins.
pub fn decode_margins(
    graph: &TrellisGraph,
    assignment: &ClassAssignment,
    margins: &[f64],
    kind: LossKind,
) -> Result<DecodeResult> {
    Decoder::new(graph, assignment, kind)?.decode_margins(margins)
}

/// Predicts the class of `x`.
pub fn decode(
    model: &MarginModel,
    graph: &TrellisGraph,
    assignment: &ClassAssignment,
    x: &SparseVector,
    kind: LossKind,
) -> Result<DecodeResult> {
    if model.num_edges() != graph.num_edges() {
        return Err(WltlsError::DimensionMismatch(format!(
            "model has {} learners, graph has {} edges",
            model.num_edges(),
            graph.num_edges()
        )));
    }
    Decoder::new(graph, assignment, kind)?.decode(model, x)
}

/// The explicit `K × ℓ` coding matrix, for exhaustive decoding.
#[derive(Debug, Clone)]
pub struct CodeMatrix {
    num_edges: usize,
    rows: Vec<i8>,
    paths: Vec<Vec<usize>>,
}

impl CodeMatrix {
    /// Rows are indexed by class id.
    pub fn new(graph: &TrellisGraph, assignment: &ClassAssignment, limit: usize) -> Result<Self> {
        let k = graph.num_classes();
        if k > limit {
            return Err(WltlsError::TooManyClasses {
                what: "exhaustive decoding",
                k,
                limit,
            });
        }
        if assignment.num_classes() != k {
            return Err(WltlsError::DimensionMismatch(format!(
                "assignment has {} classes, graph has {}",
                assignment.num_classes(),
                k
            )));
        }
        let l = graph.num_edges();
        let mut rows = Vec::with_capacity(k * l);
        let mut paths = Vec::with_capacity(k);
        for class in 0..k {
            let path = graph.index_to_path(assignment.path_of(class) as u64)?;
            rows.extend_from_slice(Codeword::from_path(l, &path).bits());
            paths.push(path);
        }
        Ok(CodeMatrix {
            num_edges: l,
            rows,
            paths,
        })
    }

    pub fn row(&self, class_id: usize) -> &[i8] {
        &self.rows[class_id * self.num_edges..(class_id + 1) * self.num_edges]
    }

    pub fn num_classes(&self) -> usize {
        self.paths.len()
    }

    /// `Σ_j L(M_kj · f_j)`.
    pub fn codeword_loss(&self, class_id: usize, margins: &[f64], kind: LossKind) -> f64 {
        let mut clamped = 0;
        self.row(class_id)
            .iter()
            .zip(margins)
            .map(|(&m, &f)| clamped_loss(kind, m as f64 * f, &mut clamped))
            .sum()
    }

    /// Literal argmin of the total codeword loss; ties go to the smaller class id.
    pub fn decode(&self, margins: &[f64], kind: LossKind) -> Result<DecodeResult> {
        if margins.len() != self.num_edges {
            return Err(WltlsError::DimensionMismatch(format!(
                "{} margins for {} columns",
                margins.len(),
                self.num_edges
            )));
        }
        if let Some(&bad) = margins.iter().find(|m| !m.is_finite()) {
            return Err(WltlsError::NonFinite(bad));
        }
        let mut clamped = 0;
        let mut best = (0, f64::INFINITY);
        for k in 0..self.num_classes() {
            let total: f64 = self
                .row(k)
                .iter()
                .zip(margins)
                .map(|(&m, &f)| clamped_loss(kind, m as f64 * f, &mut clamped))
                .sum();
            if k == 0 || total < best.1 {
                best = (k, total);
            }
        }
        Ok(DecodeResult {
            class_id: best.0,
            path: self.paths[best.0].clone(),
            total_loss: best.1,
            clamped,
        })
    }
}

/// Exhaustive decoding over all `K` codewords (refuses above `limit` classes).
pub fn decode_exhaustive(
    graph: &TrellisGraph,
    assignment: &ClassAssignment,
    margins: &[f64],
    kind: LossKind,
    limit: usize,
) -> Result<DecodeResult> {
    check_margins(graph, margins)?;
    CodeMatrix::new(graph, assignment, limit)?.decode(margins, kind)
}

/// Heaviest-path decoding: maximizes the sum of raw margins along the path.
/// The reported `total_loss` is the squared-loss codeword total of the winner.
pub fn decode_heaviest(
    graph: &TrellisGraph,
    assignment: &ClassAssignment,
    margins: &[f64],
) -> Result<DecodeResult> {
    check_margins(graph, margins)?;
    let negated: Vec<f64> = margins.iter().map(|f| -f).collect();
    let (path, _) = shortest_path(graph, &negated)?;
    let index = graph.path_to_index(&path)?;
    // Σ_j (1 - M_j f_j)² = Σ_j (1 + f_j)² - 4 Σ_{j ∈ path} f_j
    let base: f64 = margins.iter().map(|f| (1.0 + f) * (1.0 + f)).sum();
    let on_path: f64 = path.iter().map(|&j| margins[j]).sum();
    Ok(DecodeResult {
        class_id: assignment.class_of(index as usize),
        path,
        total_loss: base - 4.0 * on_path,
        clamped: 0,
    })
}
