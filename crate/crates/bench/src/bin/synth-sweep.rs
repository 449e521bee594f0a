//! Sweeps slice widths on the synthetic corpus and prints one line per width.
//!
//! Usage: synth-sweep [b,b,...] [seed]
//!
//! `SYNTH_*` environment variables override the generator settings; see
//! `wltls_bench::synth_config_from_env`.

use std::time::Instant;

use wltls::eval::{self, SweepConfig};
use wltls::synth;
use wltls::{tune_prune, TrainConfig};

fn main() -> wltls::Result<()> {
    let mut args = std::env::args().skip(1);
    let widths: Vec<usize> = args
        .next()
        .unwrap_or_else(|| "2,4,10".into())
        .split(',')
        .map(|s| s.parse().expect("slice width"))
        .collect();
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());

    let started = Instant::now();
    let synth_config = wltls_bench::synth_config_from_env();
    let (train, test) = synth::generate(&synth_config)?;
    let stats = train.stats();
    println!(
        "synthetic: K={} d={} m={} test={} mean_nnz={:.1} ({:.1}s)",
        stats.num_classes,
        stats.num_features,
        stats.num_samples,
        test.len(),
        stats.mean_nnz,
        started.elapsed().as_secs_f64()
    );
    let config = SweepConfig {
        train: TrainConfig {
            seed,
            threads,
            ..TrainConfig::default()
        },
        ..SweepConfig::default()
    };
    let (fit, val) = train.split(0.1, seed)?;
    for &b in &widths {
        let (model, row) = eval::evaluate_width(&train, &test, b, &config)?;
        drop(model);
        let unpruned = eval::evaluate_width(&fit, &val, b, &config)?.0;
        let unpruned_test = eval::accuracy(&unpruned, &test, unpruned.loss())?;
        let (lambda, pruned, report) = tune_prune(&unpruned, &val, 0.01)?;
        println!(
            "b={:>3} ell={:>4} train_acc={:.4} test_acc={:.4} eps={:.5} bound={:.4} margin={:.3} nnz_frac={:.3} train_s={:.2} | prune lambda={:.4} nnz -{:.1}% val {:.4}->{:.4} test {:.4}->{:.4}",
            row.b,
            row.ell,
            row.train_acc,
            row.test_acc,
            row.eps,
            row.bound,
            row.avg_abs_margin,
            row.nonzero_fraction,
            row.train_s,
            lambda,
            100.0 * report.nnz_reduction(),
            report.accuracy_before,
            report.accuracy_after,
            unpruned_test,
            eval::accuracy(&pruned, &test, pruned.loss())?,
        );
    }
    Ok(())
}
