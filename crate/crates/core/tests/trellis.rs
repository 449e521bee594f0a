use std::collections::{HashMap, HashSet};

use proptest::prelude::*;
use wltls::trellis::VertexKind;
use wltls::{edge_count_bound, Layout, TrellisGraph};

/// Counts paths by explicit DFS enumeration, independent of the DP tables.
fn enumerate_paths(g: &TrellisGraph) -> Vec<Vec<usize>> {
    fn walk(g: &TrellisGraph, v: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if v == g.sink() {
            out.push(cur.clone());
            return;
        }
        for &j in g.out_edges(v) {
            cur.push(j);
            walk(g, g.edge(j).head, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    walk(g, g.source(), &mut Vec::new(), &mut out);
    out
}

#[test]
fn path_count_grid() {
    for k in 2..=512 {
        for b in [2, 3, 5, 7, 10] {
            if b > k {
                continue;
            }
            let g = TrellisGraph::new(k, b).unwrap();
            assert_eq!(g.count_paths(), k as u64, "K={} b={}", k, b);
        }
    }
    for k in 2..=128 {
        assert_eq!(TrellisGraph::new(k, k).unwrap().count_paths(), k as u64);
    }
}

#[test]
fn literal_layout_also_counts_k() {
    for k in 2..=300 {
        for b in [2, 3, 4, 10] {
            if b <= k {
                let g = TrellisGraph::with_layout(k, b, Layout::Literal).unwrap();
                assert_eq!(g.count_paths(), k as u64, "K={} b={}", k, b);
            }
        }
    }
}

#[test]
fn enumeration_agrees_with_dp() {
    for k in 2..=200 {
        for b in [2, 3, 6] {
            if b <= k {
                let g = TrellisGraph::new(k, b).unwrap();
                assert_eq!(enumerate_paths(&g).len(), k);
            }
        }
    }
}

#[test]
fn paths_into_full_slices_are_powers_of_b() {
    // Without deletions, a vertex in slice i is reached by b^i paths.
    for b in 2..=6usize {
        for n in 1..=4u32 {
            let k = b.pow(n);
            let g = TrellisGraph::new(k, b).unwrap();
            for v in 0..g.num_vertices() {
                if let VertexKind::Inner { slice, .. } = g.vertex(v) {
                    assert_eq!(g.paths_from_source(v), (b as u64).pow(slice as u32));
                }
            }
        }
    }
}

#[test]
fn codec_is_a_bijection_on_grid() {
    for k in 2..=160 {
        for b in [2, 3, 5, 7, 10, k] {
            if b > k {
                continue;
            }
            let g = TrellisGraph::new(k, b).unwrap();
            let mut seen = HashSet::new();
            for i in 0..k as u64 {
                let p = g.index_to_path(i).unwrap();
                assert_eq!(g.path_to_index(&p).unwrap(), i);
                assert!(seen.insert(p));
            }
            assert!(g.index_to_path(k as u64).is_err());
        }
    }
}

#[test]
fn first_ordered_path_has_index_zero() {
    for (k, b) in [(9, 2), (105, 4), (37, 5), (8, 8)] {
        let g = TrellisGraph::new(k, b).unwrap();
        let mut v = g.source();
        let mut path = Vec::new();
        while v != g.sink() {
            let j = *g.out_edges(v).iter().min().unwrap();
            path.push(j);
            v = g.edge(j).head;
        }
        assert_eq!(g.path_to_index(&path).unwrap(), 0);
    }
}

#[test]
fn one_vs_rest_graph_indexes_by_inner_vertex() {
    let k = 12;
    let g = TrellisGraph::new(k, k).unwrap();
    assert_eq!(g.num_edges(), 2 * k);
    for i in 0..k as u64 {
        let p = g.index_to_path(i).unwrap();
        assert_eq!(p.len(), 2);
        match g.vertex(g.edge(p[0]).head) {
            VertexKind::Inner { position, .. } => assert_eq!(position as u64, i),
            other => panic!("unexpected {:?}", other),
        }
    }
}

#[test]
fn rejects_invalid_paths() {
    let g = TrellisGraph::new(9, 2).unwrap();
    assert!(g.path_to_index(&[]).is_err());
    assert!(g.path_to_index(&[0]).is_err());
    assert!(g.path_to_index(&[999]).is_err());
    let mut p = g.index_to_path(3).unwrap();
    p.swap(0, 1);
    assert!(g.path_to_index(&p).is_err());
}

#[test]
fn codeword_has_one_positive_per_traversed_group() {
    // A path leaves every depth it visits through exactly one edge.
    for (k, b) in [(9, 2), (105, 2), (105, 4), (105, 10), (64, 8), (50, 7)] {
        let g = TrellisGraph::new(k, b).unwrap();
        for i in 0..k as u64 {
            let path = g.index_to_path(i).unwrap();
            let cw = g.codeword(i).unwrap();
            let mut per_depth: HashMap<usize, usize> = HashMap::new();
            for (j, &bit) in cw.bits().iter().enumerate() {
                if bit == 1 {
                    *per_depth.entry(g.depth(g.edge(j).tail)).or_default() += 1;
                }
            }
            assert!(per_depth.values().all(|&c| c == 1));
            assert_eq!(per_depth.len(), path.len());
            assert_eq!(cw.bits().iter().filter(|&&x| x == 1).count(), path.len());
        }
    }
}

#[test]
fn edge_usage_matches_enumeration() {
    for k in 2..=256 {
        for b in [2, 3, 5] {
            if b > k {
                continue;
            }
            let g = TrellisGraph::new(k, b).unwrap();
            let mut usage = vec![0u64; g.num_edges()];
            let mut total_len = 0u64;
            for p in enumerate_paths(&g) {
                total_len += p.len() as u64;
                for j in p {
                    usage[j] += 1;
                }
            }
            for (j, &u) in usage.iter().enumerate() {
                assert_eq!(g.edge_usage(j), u, "K={} b={} edge {}", k, b, j);
            }
            assert_eq!(usage.iter().sum::<u64>(), total_len);
        }
    }
}

#[test]
fn edge_bound_holds_on_grid() {
    for k in 2..=512 {
        for b in [2, 3, 5, 7, 10] {
            if b <= k {
                let g = TrellisGraph::new(k, b).unwrap();
                assert!(g.num_edges() <= edge_count_bound(k, b));
            }
        }
    }
    for k in 2..=128 {
        assert!(TrellisGraph::new(k, k).unwrap().num_edges() <= edge_count_bound(k, k));
    }
}

#[test]
fn every_vertex_lies_on_a_path() {
    for (k, b) in [(2, 2), (9, 2), (105, 10), (99, 7), (511, 3)] {
        for layout in [Layout::Canonical, Layout::Literal] {
            let g = TrellisGraph::with_layout(k, b, layout).unwrap();
            for v in 0..g.num_vertices() {
                assert!(g.paths_from_source(v) > 0 && g.paths_to_sink(v) > 0);
            }
        }
    }
}

#[test]
fn s_sets_follow_tail_depth() {
    for (k, b) in [(9, 2), (105, 4), (300, 7), (64, 64)] {
        let g = TrellisGraph::new(k, b).unwrap();
        for j in 0..g.num_edges() {
            let dj = g.depth(g.edge(j).tail);
            let expected: Vec<usize> = (0..g.num_edges())
                .filter(|&i| {
                    let di = g.depth(g.edge(i).tail);
                    if g.is_sink_edge(j) {
                        di >= dj
                    } else {
                        di == dj
                    }
                })
                .collect();
            assert_eq!(g.s_set(j).collect::<Vec<_>>(), expected);
        }
    }
}

#[test]
fn rejects_bad_widths() {
    assert!(TrellisGraph::new(10, 1).is_err());
    assert!(TrellisGraph::new(10, 11).is_err());
    assert!(TrellisGraph::new(1, 2).is_err());
}

proptest! {
    #[test]
    fn prop_codec_roundtrip(k in 2usize..5000, b_raw in 2usize..40, seed in any::<u64>()) {
        let b = b_raw.min(k);
        let g = TrellisGraph::new(k, b).unwrap();
        let i = seed % k as u64;
        let p = g.index_to_path(i).unwrap();
        prop_assert_eq!(g.path_to_index(&p).unwrap(), i);
        // Consecutive edges chain from source to sink.
        prop_assert_eq!(g.edge(p[0]).tail, g.source());
        prop_assert_eq!(g.edge(*p.last().unwrap()).head, g.sink());
        for w in p.windows(2) {
            prop_assert_eq!(g.edge(w[0]).head, g.edge(w[1]).tail);
        }
    }

    #[test]
    fn prop_count_and_bound(k in 2usize..100_000, b_raw in 2usize..64) {
        let b = b_raw.min(k);
        let g = TrellisGraph::new(k, b).unwrap();
        prop_assert_eq!(g.count_paths(), k as u64);
        prop_assert!(g.num_edges() <= edge_count_bound(k, b));
    }
}
