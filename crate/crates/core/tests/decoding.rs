use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use wltls::decode::LOSS_CLAMP;
use wltls::{
    decode_exhaustive, decode_heaviest, decode_margins, edge_weights, shortest_path,
    ClassAssignment, CodeMatrix, Decoder, LossKind, TrellisGraph,
};

fn random_instance(rng: &mut ChaCha8Rng, max_k: usize) -> (TrellisGraph, ClassAssignment, Vec<f64>) {
    let k = rng.gen_range(2..=max_k);
    let b = rng.gen_range(2..=12).min(k);
    let g = TrellisGraph::new(k, b).unwrap();
    let a = ClassAssignment::random(k, rng.gen()).unwrap();
    let f = (0..g.num_edges()).map(|_| rng.sample(StandardNormal)).collect();
    (g, a, f)
}

/// Σ_j L(M_kj f_j) straight from the ±1 codeword.
fn codeword_loss(g: &TrellisGraph, path_index: u64, f: &[f64], kind: LossKind) -> f64 {
    let cw = g.codeword(path_index).unwrap();
    cw.bits()
        .iter()
        .zip(f)
        .map(|(&m, &fj)| kind.eval(m as f64 * fj))
        .sum()
}

/// Class with the smallest literal loss plus the gap to the runner-up.
fn literal_argmin(g: &TrellisGraph, a: &ClassAssignment, f: &[f64], kind: LossKind) -> (usize, f64) {
    let mut totals: Vec<(f64, usize)> = (0..g.num_classes())
        .map(|c| (codeword_loss(g, a.path_of(c) as u64, f, kind), c))
        .collect();
    totals.sort_by(|x, y| x.0.total_cmp(&y.0));
    (totals[0].1, totals[1].0 - totals[0].0)
}

#[test]
fn path_totals_equal_codeword_losses() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..300 {
        let (g, _, f) = random_instance(&mut rng, 300);
        for kind in LossKind::ALL {
            let w = edge_weights(&g, &f, kind).unwrap();
            assert_eq!(w.clamped, 0);
            g.for_each_path(|i, path| {
                let total: f64 = path.iter().map(|&j| w.w[j]).sum();
                let literal = codeword_loss(&g, i, &f, kind);
                assert!(
                    (total - literal).abs() <= 1e-9 * literal.abs().max(1e-300),
                    "{} path {}: {} vs {}",
                    kind,
                    i,
                    total,
                    literal
                );
            });
        }
    }
}

#[test]
fn weights_match_literal_s_set_sums() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..500 {
        let (g, _, f) = random_instance(&mut rng, 400);
        let kind = LossKind::ALL[rng.gen_range(0..LossKind::ALL.len())];
        let w = edge_weights(&g, &f, kind).unwrap();
        for j in 0..g.num_edges() {
            let dj = g.depth(g.edge(j).tail);
            let mut literal = kind.eval(f[j]);
            for (i, &fi) in f.iter().enumerate() {
                let di = g.depth(g.edge(i).tail);
                let in_s = if g.is_sink_edge(j) { di >= dj } else { di == dj };
                if in_s && i != j {
                    literal += kind.eval(-fi);
                }
            }
            assert!((w.w[j] - literal).abs() <= 1e-12 * literal.abs().max(1.0));
        }
    }
}

#[test]
fn decode_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut compared = 0;
    for _ in 0..400 {
        let (g, a, f) = random_instance(&mut rng, 512);
        for kind in LossKind::ALL {
            let fast = decode_margins(&g, &a, &f, kind).unwrap();
            let slow = decode_exhaustive(&g, &a, &f, kind, 1024).unwrap();
            let (best, gap) = literal_argmin(&g, &a, &f, kind);
            if gap > 1e-6 {
                assert_eq!(fast.class_id, best);
                assert_eq!(slow.class_id, best);
                compared += 1;
            }
            assert!((fast.total_loss - slow.total_loss).abs() <= 1e-9 * slow.total_loss.max(1e-300));
        }
    }
    assert!(compared > 1000);
}

#[test]
fn shortest_path_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..300 {
        let k = rng.gen_range(2..=512);
        let b = rng.gen_range(2..=10).min(k);
        let g = TrellisGraph::new(k, b).unwrap();
        let w: Vec<f64> = (0..g.num_edges()).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let (path, total) = shortest_path(&g, &w).unwrap();
        let mut best = f64::INFINITY;
        g.for_each_path(|_, p| best = best.min(p.iter().map(|&j| w[j]).sum()));
        assert!((total - best).abs() < 1e-9);
        let along: f64 = path.iter().map(|&j| w[j]).sum();
        assert!((along - total).abs() < 1e-12);
    }
}

#[test]
fn hamming_decoding_is_nearest_codeword() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..300 {
        let (g, a, f) = random_instance(&mut rng, 200);
        let signs: Vec<i8> = f.iter().map(|&x| if x > 0.0 { 1 } else { -1 }).collect();
        let mut dists: Vec<(usize, usize)> = (0..g.num_classes())
            .map(|c| {
                let cw = g.codeword(a.path_of(c) as u64).unwrap();
                let d = cw.bits().iter().zip(&signs).filter(|(x, y)| x != y).count();
                (d, c)
            })
            .collect();
        dists.sort();
        let r = decode_margins(&g, &a, &f, LossKind::HammingStep).unwrap();
        assert_eq!(r.total_loss, dists[0].0 as f64);
        if dists[1].0 > dists[0].0 {
            assert_eq!(r.class_id, dists[0].1);
        }
    }
}

#[test]
fn heaviest_path_matches_squared_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut compared = 0;
    for _ in 0..500 {
        let (g, a, f) = random_instance(&mut rng, 300);
        let heavy = decode_heaviest(&g, &a, &f).unwrap();
        let sq = decode_margins(&g, &a, &f, LossKind::Squared).unwrap();
        let literal = codeword_loss(&g, a.path_of(heavy.class_id) as u64, &f, LossKind::Squared);
        assert!((heavy.total_loss - literal).abs() <= 1e-9 * literal);
        let (best, gap) = literal_argmin(&g, &a, &f, LossKind::Squared);
        if gap > 1e-6 {
            assert_eq!(heavy.class_id, best);
            assert_eq!(sq.class_id, best);
            compared += 1;
        }
    }
    assert!(compared > 450);
}

#[test]
fn reused_decoder_matches_fresh_calls() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let g = TrellisGraph::new(77, 3).unwrap();
    let a = ClassAssignment::random(77, 1).unwrap();
    let mut dec = Decoder::new(&g, &a, LossKind::Log).unwrap();
    for _ in 0..50 {
        let f: Vec<f64> = (0..g.num_edges()).map(|_| rng.sample(StandardNormal)).collect();
        assert_eq!(
            dec.decode_margins(&f).unwrap(),
            decode_margins(&g, &a, &f, LossKind::Log).unwrap()
        );
    }
}

#[test]
fn huge_margins_are_clamped_not_infinite() {
    let g = TrellisGraph::new(10, 2).unwrap();
    let a = ClassAssignment::identity(10);
    let mut f = vec![0.0; g.num_edges()];
    f[0] = 900.0;
    let r = decode_margins(&g, &a, &f, LossKind::Exponential).unwrap();
    assert!(r.clamped > 0);
    assert!(r.total_loss.is_finite());
    let w = edge_weights(&g, &f, LossKind::Exponential).unwrap();
    assert!(w.w.iter().all(|x| x.is_finite() && *x <= LOSS_CLAMP * g.num_edges() as f64));
}

#[test]
fn code_matrix_rows_are_assigned_codewords() {
    let g = TrellisGraph::new(33, 4).unwrap();
    let a = ClassAssignment::random(33, 9).unwrap();
    let m = CodeMatrix::new(&g, &a, 100).unwrap();
    for c in 0..33 {
        assert_eq!(m.row(c), g.codeword(a.path_of(c) as u64).unwrap().bits());
    }
    assert!(CodeMatrix::new(&g, &a, 10).is_err());
}

#[test]
fn rejects_mismatched_and_non_finite_margins() {
    let g = TrellisGraph::new(10, 2).unwrap();
    let a = ClassAssignment::identity(10);
    assert!(edge_weights(&g, &[0.0; 3], LossKind::Squared).is_err());
    assert!(shortest_path(&g, &[0.0; 3]).is_err());
    let mut f = vec![0.0; g.num_edges()];
    f[2] = f64::NAN;
    assert!(decode_margins(&g, &a, &f, LossKind::Squared).is_err());
    assert!(decode_heaviest(&g, &a, &f).is_err());
}

proptest! {
    #[test]
    fn prop_decoded_path_encodes_decoded_class(
        k in 2usize..400,
        b_raw in 2usize..16,
        seed in any::<u64>(),
        kind_ix in 0usize..6,
    ) {
        let b = b_raw.min(k);
        let g = TrellisGraph::new(k, b).unwrap();
        let a = ClassAssignment::random(k, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f: Vec<f64> = (0..g.num_edges()).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let r = decode_margins(&g, &a, &f, LossKind::ALL[kind_ix]).unwrap();
        prop_assert_eq!(a.class_of(g.path_to_index(&r.path).unwrap() as usize), r.class_id);
    }
}
