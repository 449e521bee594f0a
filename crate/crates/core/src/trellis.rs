//! Trellis graphs whose source-to-sink paths enumerate the classes.
//!
//! A graph for `K` classes and slice width `b` is built from the base-`b`
//! digits of `K`: `⌊log_b K⌋ + 1` inner slices of `b` vertices each, fully
//! connected between adjacent slices, with `digit[i]` vertices of slice `i`
//! wired to the sink. Vertices that cannot reach the sink are dropped. When
//! `K = b^n` exactly the canonical layout instead uses `n` slices and wires
//! the whole last slice to the sink.
//!
//! Edges are numbered slice-major: source edges first, then for every slice
//! its forward edges ordered by (tail position, head position), followed by
//! that slice's sink edges. As a consequence all edges whose tails share a
//! source distance are contiguous, which lets the decoder treat the `S(e)`
//! groups as index ranges.

use std::ops::Range;

use crate::error::{Result, WltlsError};

/// Default brute-force limit for code diagnostics and exhaustive decoding.
pub const DEFAULT_BRUTE_FORCE_LIMIT: usize = 4096;

/// How a graph is laid out when `K` is an exact power of `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Layout {
    /// `n` full slices with the last one wired to the sink when `K = b^n`;
    /// identical to [`Layout::Literal`] otherwise.
    #[default]
    Canonical,
    /// The digit construction applied verbatim, including the single-vertex
    /// top slice produced by `K = b^n`.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexKind {
    Source,
    Inner { slice: usize, position: usize },
    Sink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
}

/// An immutable trellis graph. Vertex ids are a topological order: the
/// source is 0, inner vertices follow slice by slice and the sink is last.
#[derive(Debug, Clone)]
pub struct TrellisGraph {
    num_classes: usize,
    slice_width: usize,
    vertices: Vec<VertexKind>,
    /// Shortest edge distance from the source.
    depth: Vec<usize>,
    edges: Vec<Edge>,
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
    paths_from_source: Vec<u64>,
    paths_to_sink: Vec<u64>,
    /// `group_start[s]..group_start[s + 1]` are the edges whose tail has depth `s`.
    group_start: Vec<usize>,
}

/// Base-`b` digits of `k`, least significant first.
pub fn base_digits(mut k: usize, b: usize) -> Vec<usize> {
    let mut digits = Vec::new();
    while k > 0 {
        digits.push(k % b);
        k /= b;
    }
    digits
}

fn floor_log(k: usize, b: usize) -> usize {
    base_digits(k, b).len() - 1
}

/// Upper bound on the number of edges: `(b+1)(⌊log_b K⌋+1)b + b`.
pub fn edge_count_bound(k: usize, b: usize) -> usize {
    (b + 1) * (floor_log(k, b) + 1) * b + b
}

impl TrellisGraph {
    /// Builds the canonical graph for `k` classes and slice width `b`.
    pub fn new(k: usize, b: usize) -> Result<Self> {
        Self::with_layout(k, b, Layout::Canonical)
    }

    pub fn with_layout(k: usize, b: usize, layout: Layout) -> Result<Self> {
        if k < 2 {
            return Err(WltlsError::InvalidParameter(format!(
                "need at least 2 classes, got {}",
                k
            )));
        }
        if b < 2 || b > k {
            return Err(WltlsError::InvalidParameter(format!(
                "slice width must be in [2, K={}], got {}",
                k, b
            )));
        }
        if k > u32::MAX as usize {
            return Err(WltlsError::InvalidParameter(format!("K={} is too large", k)));
        }

        let digits = base_digits(k, b);
        let exact_power =
            digits[digits.len() - 1] == 1 && digits[..digits.len() - 1].iter().all(|&d| d == 0);
        // Number of sink edges leaving each slice.
        let sink_counts: Vec<usize> = if exact_power && layout == Layout::Canonical {
            let mut counts = vec![0; digits.len() - 1];
            *counts.last_mut().expect("K >= b gives at least two digits") = b;
            counts
        } else {
            digits
        };
        let num_slices = sink_counts.len();

        // A vertex survives if it has a sink edge or any surviving successor.
        // Sink edges leave the lowest positions, so survivors are a prefix.
        let mut alive = vec![0; num_slices];
        for i in (0..num_slices).rev() {
            alive[i] = if i + 1 < num_slices && alive[i + 1] > 0 {
                b
            } else {
                sink_counts[i]
            };
        }

        let mut vertices = vec![VertexKind::Source];
        let mut depth = vec![0];
        let mut slice_offset = Vec::with_capacity(num_slices);
        for (slice, &count) in alive.iter().enumerate() {
            slice_offset.push(vertices.len());
            for position in 0..count {
                vertices.push(VertexKind::Inner { slice, position });
                depth.push(slice + 1);
            }
        }
        let sink = vertices.len();
        vertices.push(VertexKind::Sink);
        depth.push(usize::MAX);

        let mut edges = Vec::new();
        for p in 0..alive[0] {
            edges.push(Edge {
                tail: 0,
                head: slice_offset[0] + p,
            });
        }
        for i in 0..num_slices {
            if i + 1 < num_slices {
                for t in 0..alive[i] {
                    for h in 0..alive[i + 1] {
                        edges.push(Edge {
                            tail: slice_offset[i] + t,
                            head: slice_offset[i + 1] + h,
                        });
                    }
                }
            }
            for p in 0..sink_counts[i] {
                edges.push(Edge {
                    tail: slice_offset[i] + p,
                    head: sink,
                });
            }
        }
        depth[sink] = edges
            .iter()
            .filter(|e| e.head == sink)
            .map(|e| depth[e.tail] + 1)
            .min()
            .expect("the sink has incoming edges");

        let n = vertices.len();
        let mut out_edges = vec![Vec::new(); n];
        let mut in_edges = vec![Vec::new(); n];
        for (j, e) in edges.iter().enumerate() {
            out_edges[e.tail].push(j);
            in_edges[e.head].push(j);
        }

        let mut paths_from_source = vec![0u64; n];
        paths_from_source[0] = 1;
        for v in 1..n {
            paths_from_source[v] = in_edges[v]
                .iter()
                .map(|&j| paths_from_source[edges[j].tail])
                .sum();
        }
        let mut paths_to_sink = vec![0u64; n];
        paths_to_sink[sink] = 1;
        for v in (0..sink).rev() {
            paths_to_sink[v] = out_edges[v]
                .iter()
                .map(|&j| paths_to_sink[edges[j].head])
                .sum();
        }

        let mut group_start = vec![0];
        for s in 1..=num_slices {
            let start = edges
                .iter()
                .position(|e| depth[e.tail] >= s)
                .unwrap_or(edges.len());
            group_start.push(start);
        }
        group_start.push(edges.len());
        debug_assert!(edges
            .windows(2)
            .all(|w| depth[w[0].tail] <= depth[w[1].tail]));

        Ok(TrellisGraph {
            num_classes: k,
            slice_width: b,
            vertices,
            depth,
            edges,
            out_edges,
            in_edges,
            paths_from_source,
            paths_to_sink,
            group_start,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn slice_width(&self) -> usize {
        self.slice_width
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_slices(&self) -> usize {
        self.group_start.len() - 2
    }

    pub fn source(&self) -> usize {
        0
    }

    pub fn sink(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn vertex(&self, v: usize) -> VertexKind {
        self.vertices[v]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, j: usize) -> Edge {
        self.edges[j]
    }

    pub fn is_sink_edge(&self, j: usize) -> bool {
        self.edges[j].head == self.sink()
    }

    /// Shortest edge distance of `v` from the source.
    pub fn depth(&self, v: usize) -> usize {
        self.depth[v]
    }

    pub fn out_edges(&self, v: usize) -> &[usize] {
        &self.out_edges[v]
    }

    pub fn in_edges(&self, v: usize) -> &[usize] {
        &self.in_edges[v]
    }

    /// Number of source paths reaching `v`.
    pub fn paths_from_source(&self, v: usize) -> u64 {
        self.paths_from_source[v]
    }

    /// Number of paths from `v` to the sink.
    pub fn paths_to_sink(&self, v: usize) -> u64 {
        self.paths_to_sink[v]
    }

    /// Number of source-to-sink paths.
    pub fn count_paths(&self) -> u64 {
        self.paths_from_source[self.sink()]
    }

    /// How many source-to-sink paths run through edge `j`.
    pub fn edge_usage(&self, j: usize) -> u64 {
        let e = self.edges[j];
        self.paths_from_source[e.tail] * self.paths_to_sink[e.head]
    }

    /// Number of tail-depth groups (source edges form group 0).
    pub fn num_groups(&self) -> usize {
        self.group_start.len() - 1
    }

    /// Edges whose tail has depth `s`.
    pub fn group(&self, s: usize) -> Range<usize> {
        self.group_start[s]..self.group_start[s + 1]
    }

    /// Edges whose tail depth is at least `s`.
    pub fn groups_from(&self, s: usize) -> Range<usize> {
        self.group_start[s]..self.edges.len()
    }

    /// The edges that cannot share a path with `e_j`, plus `e_j` itself.
    ///
    /// For a forward edge these are the edges leaving the same slice; for a
    /// sink edge also every edge leaving a deeper slice.
    pub fn s_set(&self, j: usize) -> Range<usize> {
        let s = self.depth[self.edges[j].tail];
        if self.is_sink_edge(j) {
            self.groups_from(s)
        } else {
            self.group(s)
        }
    }

    /// Edge ids of the path with canonical index `index`, ordered source to sink.
    pub fn index_to_path(&self, index: u64) -> Result<Vec<usize>> {
        if index >= self.count_paths() {
            return Err(WltlsError::InvalidPath(format!(
                "path index {} out of range [0, {})",
                index,
                self.count_paths()
            )));
        }
        let mut path = Vec::with_capacity(self.num_slices() + 1);
        let mut rest = index;
        let mut v = self.source();
        while v != self.sink() {
            let mut next = None;
            for &j in &self.out_edges[v] {
                let count = self.paths_to_sink[self.edges[j].head];
                if rest < count {
                    next = Some(j);
                    break;
                }
                rest -= count;
            }
            let j = next.expect("paths_to_sink counts are consistent");
            path.push(j);
            v = self.edges[j].head;
        }
        Ok(path)
    }

    /// Mixed-radix rank of a source-to-sink path.
    pub fn path_to_index(&self, path: &[usize]) -> Result<u64> {
        let mut v = self.source();
        let mut index = 0;
        for &j in path {
            if j >= self.edges.len() {
                return Err(WltlsError::InvalidPath(format!("no edge {}", j)));
            }
            if self.edges[j].tail != v {
                return Err(WltlsError::InvalidPath(format!(
                    "edge {} does not leave vertex {}",
                    j, v
                )));
            }
            for &prev in self.out_edges[v].iter().take_while(|&&o| o != j) {
                index += self.paths_to_sink[self.edges[prev].head];
            }
            v = self.edges[j].head;
        }
        if v != self.sink() {
            return Err(WltlsError::InvalidPath(
                "path does not end at the sink".to_string(),
            ));
        }
        Ok(index)
    }

    /// Calls `f` with every path, in index order.
    pub fn for_each_path<F: FnMut(u64, &[usize])>(&self, mut f: F) {
        for index in 0..self.count_paths() {
            let path = self.index_to_path(index).expect("index in range");
            f(index, &path);
        }
    }

    pub fn codeword(&self, index: u64) -> Result<Codeword> {
        let path = self.index_to_path(index)?;
        Ok(Codeword::from_path(self.num_edges(), &path))
    }

    /// Minimum pairwise Hamming distance of the code, by brute force.
    pub fn min_hamming_distance(&self, limit: usize) -> Result<usize> {
        let k = self.num_classes;
        if k > limit {
            return Err(WltlsError::TooManyClasses {
                what: "minimum distance computation",
                k,
                limit,
            });
        }
        let words = self.num_edges().div_ceil(64);
        let mut bits = vec![0u64; k * words];
        self.for_each_path(|i, path| {
            let row = &mut bits[i as usize * words..(i as usize + 1) * words];
            for &j in path {
                row[j / 64] |= 1 << (j % 64);
            }
        });
        let mut best = usize::MAX;
        for a in 0..k {
            let ra = &bits[a * words..(a + 1) * words];
            for b in a + 1..k {
                let rb = &bits[b * words..(b + 1) * words];
                let d: u32 = ra.iter().zip(rb).map(|(x, y)| (x ^ y).count_ones()).sum();
                best = best.min(d as usize);
            }
        }
        Ok(best)
    }
}

/// A row of the coding matrix: `+1` on the edges of one path, `-1` elsewhere.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Codeword {
    bits: Vec<i8>,
}

impl Codeword {
    pub fn from_path(num_edges: usize, path: &[usize]) -> Self {
        let mut bits = vec![-1; num_edges];
        for &j in path {
            bits[j] = 1;
        }
        Codeword { bits }
    }

    pub fn bits(&self) -> &[i8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn hamming_distance(&self, other: &Codeword) -> usize {
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| a != b)
            .count()
    }
}
