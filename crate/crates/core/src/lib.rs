//! Wide-LTLS extreme multiclass classification.
//!
//! Classes are mapped to source-to-sink paths of a trellis graph whose slice
//! width `b` controls the trade-off between model size and accuracy: `b = 2`
//! gives a logarithmic number of edges, `b = K` degenerates to one-vs-rest.
//! One AROW linear learner is trained per edge, and prediction finds the path
//! minimizing the total codeword loss with a single shortest-path pass.
//!
//! ```
//! use wltls::{LossKind, TrainConfig, WltlsModel};
//!
//! let text = "1 1:1.0 2:0.2\n2 3:1.0\n3 4:1.0 1:0.1\n4 5:1.0\n";
//! let data = wltls::parse_libsvm(text.as_bytes(), wltls::IndexBase::One).unwrap();
//! let config = TrainConfig { epochs: 10, ..TrainConfig::default() };
//! let model = WltlsModel::train(&data, 2, LossKind::Exponential, &config).unwrap();
//! let acc = wltls::eval::accuracy(&model, &data, LossKind::Exponential).unwrap();
//! assert_eq!(acc, 1.0);
//! ```

pub mod data;
pub mod decode;
pub mod error;
pub mod eval;
pub mod learner;
pub mod loss;
pub mod model;
pub mod sparse;
pub mod synth;
pub mod trellis;

pub use data::{
    load_libsvm_file, load_libsvm_file_with_labels, parse_libsvm, parse_libsvm_with_labels,
    Dataset, DatasetStats, IndexBase, LabelMap, Sample,
};
pub use decode::{
    decode, decode_exhaustive, decode_heaviest, decode_margins, edge_weights, shortest_path,
    CodeMatrix, DecodeResult, Decoder, EdgeWeights,
};
pub use error::{Result, WltlsError};
pub use eval::{SweepConfig, SweepReport, SweepRow};
pub use learner::{
    binary_label, train_all, ArowState, MarginModel, TrainConfig, WeightVector,
};
pub use loss::{loss, LossKind};
pub use model::{tune_prune, ClassAssignment, ModelStats, PruneReport, WltlsModel};
pub use sparse::SparseVector;
pub use trellis::{edge_count_bound, Codeword, Layout, TrellisGraph};
