//! Accuracy, average binary loss, the training-error bound `ℓε / (ρ L(0))`
//! and slice-width sweeps.

use std::io::{self, Write};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Result, WltlsError};
use crate::learner::{ClassPaths, MarginModel, TrainConfig};
use crate::loss::LossKind;
use crate::model::{ClassAssignment, WltlsModel};
use crate::trellis::{TrellisGraph, DEFAULT_BRUTE_FORCE_LIMIT};

/// Fraction of samples whose decoded class equals the true class.
pub fn accuracy(model: &WltlsModel, data: &Dataset, loss: LossKind) -> Result<f64> {
    let predictions = model.predict_all(data, loss)?;
    let correct = predictions
        .iter()
        .zip(data.samples())
        .filter(|(p, s)| p.class_id == s.class_id)
        .count();
    Ok(correct as f64 / data.len() as f64)
}

fn check_consistent(margins: &MarginModel, graph: &TrellisGraph, data: &Dataset) -> Result<()> {
    if margins.num_edges() != graph.num_edges() {
        return Err(WltlsError::DimensionMismatch(format!(
            "{} learners for {} edges",
            margins.num_edges(),
            graph.num_edges()
        )));
    }
    if let Some(s) = data.samples().iter().find(|s| s.class_id >= graph.num_classes()) {
        return Err(WltlsError::DimensionMismatch(format!(
            "sample class {} outside the model's {} classes",
            s.class_id,
            graph.num_classes()
        )));
    }
    Ok(())
}

/// `ε` for several losses at once:
/// `(1 / mℓ) Σ_i Σ_j L(M_{y_i, j} · f_j(x_i))`.
pub fn avg_binary_losses(
    margins: &MarginModel,
    graph: &TrellisGraph,
    assignment: &ClassAssignment,
    data: &Dataset,
    kinds: &[LossKind],
) -> Result<Vec<f64>> {
    check_consistent(margins, graph, data)?;
    let paths = ClassPaths::new(graph, assignment)?;
    let l = graph.num_edges();
    let per_sample: Vec<Vec<f64>> = data
        .samples()
        .par_iter()
        .map_init(
            || vec![0.0; l],
            |f, s| {
                margins.margins_into(&s.features, f);
                let mut sums = vec![0.0; kinds.len()];
                for (j, &fj) in f.iter().enumerate() {
                    let z = paths.label(s.class_id, j) as f64 * fj;
                    for (acc, kind) in sums.iter_mut().zip(kinds) {
                        *acc += kind.eval(z);
                    }
                }
                sums
            },
        )
        .collect();
    let denom = (data.len() * l) as f64;
    Ok((0..kinds.len())
        .map(|i| per_sample.iter().map(|v| v[i]).sum::<f64>() / denom)
        .collect())
}

pub fn avg_binary_loss(
    margins: &MarginModel,
    graph: &TrellisGraph,
    assignment: &ClassAssignment,
    data: &Dataset,
    kind: LossKind,
) -> Result<f64> {
    Ok(avg_binary_losses(margins, graph, assignment, data, &[kind])?[0])
}

/// `(1 / mℓ) Σ_i Σ_j |f_j(x_i)|`.
pub fn avg_abs_margin(margins: &MarginModel, data: &Dataset) -> f64 {
    let l = margins.num_edges();
    let per_sample: Vec<f64> = data
        .samples()
        .par_iter()
        .map_init(
            || vec![0.0; l],
            |f, s| {
                margins.margins_into(&s.features, f);
                f.iter().map(|v| v.abs()).sum::<f64>()
            },
        )
        .collect();
    per_sample.iter().sum::<f64>() / (data.len() * l) as f64
}

/// Upper bound on the multiclass training error of loss-based decoding:
/// `ℓ · ε / (ρ · L(0))`.
pub fn error_bound(num_edges: usize, epsilon: f64, rho: usize, kind: LossKind) -> Result<f64> {
    let l0 = kind.at_zero();
    if rho == 0 || l0 <= 0.0 {
        return Err(WltlsError::InvalidParameter(format!(
            "bound undefined for rho = {} and L(0) = {}",
            rho, l0
        )));
    }
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(WltlsError::InvalidParameter(format!(
            "average binary loss must be non-negative, got {}",
            epsilon
        )));
    }
    Ok(num_edges as f64 * epsilon / (rho as f64 * l0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub train: TrainConfig,
    /// Loss used to decode the test set.
    pub decode_loss: LossKind,
    /// Loss used for `ε`, the bound and the training accuracy.
    pub eps_loss: LossKind,
    /// Minimum distance plugged into the bound.
    pub rho: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            train: TrainConfig::default(),
            decode_loss: LossKind::Exponential,
            eps_loss: LossKind::SquaredHinge,
            rho: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub b: usize,
    pub ell: usize,
    /// Training accuracy decoded with the `ε` loss.
    pub train_acc: f64,
    /// Test accuracy decoded with the decode loss.
    pub test_acc: f64,
    pub eps: f64,
    /// `ε` under every loss, in [`LossKind::ALL`] order.
    pub eps_all: Vec<f64>,
    pub bound: f64,
    /// Exact minimum distance when `K` is small enough to brute-force.
    pub rho_exact: Option<usize>,
    pub avg_abs_margin: f64,
    pub nonzero_fraction: f64,
    pub bytes_dense: usize,
    pub bytes_sparse: usize,
    pub train_s: f64,
    pub decode_us_per_query: f64,
}

impl SweepRow {
    pub fn train_error(&self) -> f64 {
        1.0 - self.train_acc
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

pub const CSV_HEADER: &str =
    "b,ell,train_acc,test_acc,eps,bound,bytes_dense,bytes_sparse,train_s,decode_us_per_query";

impl SweepReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", CSV_HEADER)?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{:.6},{:.6},{:.8},{:.8},{},{},{:.3},{:.3}",
                r.b,
                r.ell,
                r.train_acc,
                r.test_acc,
                r.eps,
                r.bound,
                r.bytes_dense,
                r.bytes_sparse,
                r.train_s,
                r.decode_us_per_query
            )?;
        }
        Ok(())
    }

    pub fn row(&self, b: usize) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.b == b)
    }
}

/// Trains and evaluates one model.
pub fn evaluate_width(
    train: &Dataset,
    test: &Dataset,
    b: usize,
    config: &SweepConfig,
) -> Result<(WltlsModel, SweepRow)> {
    let started = Instant::now();
    let model = WltlsModel::train(train, b, config.decode_loss, &config.train)?;
    let train_s = started.elapsed().as_secs_f64();

    let eps_all = avg_binary_losses(
        model.margin_model(),
        model.graph(),
        model.assignment(),
        train,
        &LossKind::ALL,
    )?;
    let eps_index = LossKind::ALL
        .iter()
        .position(|&k| k == config.eps_loss)
        .expect("every loss is listed");
    let eps = eps_all[eps_index];
    let ell = model.graph().num_edges();
    let bound = error_bound(ell, eps, config.rho, config.eps_loss)?;
    let train_acc = accuracy(&model, train, config.eps_loss)?;

    let started = Instant::now();
    let test_acc = accuracy(&model, test, config.decode_loss)?;
    let decode_us_per_query = started.elapsed().as_secs_f64() * 1e6 / test.len() as f64;

    let rho_exact = model.graph().min_hamming_distance(DEFAULT_BRUTE_FORCE_LIMIT).ok();
    let stats = model.stats();
    let row = SweepRow {
        b,
        ell,
        train_acc,
        test_acc,
        eps,
        eps_all,
        bound,
        rho_exact,
        avg_abs_margin: avg_abs_margin(model.margin_model(), train),
        nonzero_fraction: stats.nonzero_fraction,
        bytes_dense: stats.bytes_dense,
        bytes_sparse: stats.bytes_sparse,
        train_s,
        decode_us_per_query,
    };
    Ok((model, row))
}

/// One row per slice width, in the given order, with fixed seeds.
pub fn sweep(
    train: &Dataset,
    test: &Dataset,
    b_values: &[usize],
    config: &SweepConfig,
) -> Result<SweepReport> {
    let k = train.num_classes();
    if let Some(&b) = b_values.iter().find(|&&b| b < 2 || b > k) {
        return Err(WltlsError::InvalidParameter(format!(
            "slice width {} outside [2, {}]",
            b, k
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.train.threads)
        .build()
        .map_err(|e| WltlsError::InvalidParameter(format!("thread pool: {}", e)))?;
    let rows = pool.install(|| {
        b_values
            .iter()
            .map(|&b| evaluate_width(train, test, b, config).map(|(_, row)| row))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(SweepReport { rows })
}

/// Smallest slice width at which the bound stops decreasing: the first row
/// whose successor has a larger bound, else the last row. Rows are taken in
/// increasing `b`.
pub fn select_b(report: &SweepReport) -> Result<usize> {
    if report.rows.len() < 2 {
        return Err(WltlsError::InvalidParameter(
            "model selection needs at least two sweep rows".into(),
        ));
    }
    let mut rows: Vec<&SweepRow> = report.rows.iter().collect();
    rows.sort_by_key(|r| r.b);
    Ok(rows
        .windows(2)
        .find(|w| w[1].bound > w[0].bound)
        .map_or(rows[rows.len() - 1].b, |w| w[0].b))
}
