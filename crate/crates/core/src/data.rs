//! Multiclass datasets in svmlight/libsvm text format.
//!
//! Each nonempty line is `<label> <index>:<value> ...`. Labels are arbitrary
//! integers and get remapped to contiguous class ids in first-seen order; the
//! mapping travels with the dataset (and later with the trained model).

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, WltlsError};
use crate::sparse::SparseVector;

/// Whether feature indices in a file start at 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IndexBase {
    Zero,
    #[default]
    One,
}

impl IndexBase {
    pub fn offset(self) -> u64 {
        match self {
            IndexBase::Zero => 0,
            IndexBase::One => 1,
        }
    }
}

/// Bidirectional map between original labels and contiguous class ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelMap {
    labels: Vec<i64>,
    index: HashMap<i64, usize>,
}

impl LabelMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_labels(labels: Vec<i64>) -> Result<Self> {
        let mut map = LabelMap::new();
        for label in labels {
            if map.index.contains_key(&label) {
                return Err(WltlsError::InvalidParameter(format!(
                    "duplicate label {} in label map",
                    label
                )));
            }
            map.get_or_insert(label);
        }
        Ok(map)
    }

    pub fn get_or_insert(&mut self, label: i64) -> usize {
        if let Some(&id) = self.index.get(&label) {
            return id;
        }
        let id = self.labels.len();
        self.labels.push(label);
        self.index.insert(label, id);
        id
    }

    pub fn class_of(&self, label: i64) -> Option<usize> {
        self.index.get(&label).copied()
    }

    pub fn label_of(&self, class_id: usize) -> Option<i64> {
        self.labels.get(class_id).copied()
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: SparseVector,
    pub class_id: usize,
}

/// An immutable multiclass dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    num_features: usize,
    label_map: LabelMap,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetStats {
    pub num_samples: usize,
    pub num_features: usize,
    pub num_classes: usize,
    pub mean_nnz: f64,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, num_features: usize, label_map: LabelMap) -> Result<Self> {
        if samples.is_empty() {
            return Err(WltlsError::EmptyDataset);
        }
        for (i, s) in samples.iter().enumerate() {
            if s.class_id >= label_map.len() {
                return Err(WltlsError::InvalidParameter(format!(
                    "sample {} has class id {} but only {} classes are mapped",
                    i,
                    s.class_id,
                    label_map.len()
                )));
            }
            if s.features.dim_hint() > num_features {
                return Err(WltlsError::DimensionMismatch(format!(
                    "sample {} uses feature {} but d = {}",
                    i,
                    s.features.dim_hint() - 1,
                    num_features
                )));
            }
        }
        Ok(Dataset {
            samples,
            num_features,
            label_map,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn num_classes(&self) -> usize {
        self.label_map.len()
    }

    pub fn label_map(&self) -> &LabelMap {
        &self.label_map
    }

    pub fn stats(&self) -> DatasetStats {
        let total: usize = self.samples.iter().map(|s| s.features.nnz()).sum();
        DatasetStats {
            num_samples: self.samples.len(),
            num_features: self.num_features,
            num_classes: self.num_classes(),
            mean_nnz: total as f64 / self.samples.len() as f64,
        }
    }

    /// Returns a copy with a larger feature dimension (for aligning a test set to a model).
    pub fn with_num_features(mut self, num_features: usize) -> Result<Self> {
        if num_features < self.num_features {
            return Err(WltlsError::DimensionMismatch(format!(
                "cannot shrink d from {} to {}",
                self.num_features, num_features
            )));
        }
        self.num_features = num_features;
        Ok(self)
    }

    fn with_samples(&self, samples: Vec<Sample>) -> Dataset {
        Dataset {
            samples,
            num_features: self.num_features,
            label_map: self.label_map.clone(),
        }
    }

    /// Seeded permutation of the samples; metadata is unchanged.
    pub fn shuffle(&self, seed: u64) -> Dataset {
        let mut samples = self.samples.clone();
        samples.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        self.with_samples(samples)
    }

    /// Splits off `round(m * validation_fraction)` randomly chosen samples as a
    /// validation set. Both parts keep the original relative order.
    pub fn split(&self, validation_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
            return Err(WltlsError::InvalidParameter(format!(
                "validation fraction must be in (0, 1), got {}",
                validation_fraction
            )));
        }
        let m = self.samples.len();
        let n_val = (m as f64 * validation_fraction).round() as usize;
        if n_val == 0 || n_val >= m {
            return Err(WltlsError::InvalidParameter(format!(
                "validation fraction {} of {} samples leaves an empty part ({} train / {} validation)",
                validation_fraction,
                m,
                m.saturating_sub(n_val),
                n_val
            )));
        }
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut is_val = vec![false; m];
        for &i in &order[..n_val] {
            is_val[i] = true;
        }
        let (mut train, mut val) = (Vec::with_capacity(m - n_val), Vec::with_capacity(n_val));
        for (s, v) in self.samples.iter().zip(is_val) {
            if v {
                val.push(s.clone());
            } else {
                train.push(s.clone());
            }
        }
        Ok((self.with_samples(train), self.with_samples(val)))
    }

    /// Writes the dataset back out in libsvm text format using original labels.
    pub fn write_libsvm<W: Write>(&self, mut out: W, base: IndexBase) -> io::Result<()> {
        for s in &self.samples {
            let label = self.label_map.label_of(s.class_id).expect("class id is mapped");
            write!(out, "{}", label)?;
            for (i, v) in s.features.iter() {
                write!(out, " {}:{}", i as u64 + base.offset(), v)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Parses a libsvm stream with a fresh label map.
pub fn parse_libsvm<R: BufRead>(reader: R, base: IndexBase) -> Result<Dataset> {
    parse_libsvm_with_labels(reader, base, LabelMap::new())
}

/// Parses a libsvm stream, extending an existing label map (e.g. the one from
/// the training set) with any unseen labels.
pub fn parse_libsvm_with_labels<R: BufRead>(
    reader: R,
    base: IndexBase,
    mut label_map: LabelMap,
) -> Result<Dataset> {
    let mut samples = Vec::new();
    let mut max_index: Option<u64> = None;
    let mut pairs: Vec<(u32, f64)> = Vec::new();

    for (line_no, line) in reader.lines().enumerate() {
        let line_no = line_no + 1;
        let line = line?;
        let content = match line.find('#') {
            Some(p) => &line[..p],
            None => &line[..],
        };
        let mut tokens = content.split_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue;
        };
        let err = |message: String| WltlsError::Parse {
            line: line_no,
            message,
        };
        let label = parse_label(label_tok).map_err(err)?;
        let class_id = label_map.get_or_insert(label);

        pairs.clear();
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| err(format!("expected <index>:<value>, got `{}`", tok)))?;
            let idx: u64 = idx
                .parse()
                .map_err(|_| err(format!("bad feature index `{}`", idx)))?;
            let val: f64 = val
                .parse()
                .map_err(|_| err(format!("bad feature value `{}`", val)))?;
            if !val.is_finite() {
                return Err(err(format!("non-finite feature value `{}`", tok)));
            }
            let idx = idx
                .checked_sub(base.offset())
                .ok_or_else(|| err(format!("feature index {} below index base", idx)))?;
            let idx = u32::try_from(idx)
                .map_err(|_| err(format!("feature index {} too large", idx)))?;
            max_index = Some(max_index.map_or(idx as u64, |m| m.max(idx as u64)));
            pairs.push((idx, val));
        }
        if pairs.windows(2).any(|w| w[0].0 > w[1].0) {
            pairs.sort_by_key(|p| p.0);
        }
        if let Some(w) = pairs.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(err(format!(
                "duplicate feature index {}",
                w[0].0 as u64 + base.offset()
            )));
        }
        let features = SparseVector::from_pairs(pairs.iter().copied())
            .map_err(|e| err(e.to_string()))?;
        samples.push(Sample { features, class_id });
    }

    if samples.is_empty() {
        return Err(WltlsError::EmptyDataset);
    }
    let num_features = max_index.map_or(0, |m| m as usize + 1);
    Dataset::new(samples, num_features, label_map)
}

fn parse_label(tok: &str) -> std::result::Result<i64, String> {
    if tok.contains(',') {
        return Err(format!(
            "multilabel line (label `{}`) is not supported; expected one label per sample",
            tok
        ));
    }
    if let Ok(v) = tok.parse::<i64>() {
        return Ok(v);
    }
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() && v.fract() == 0.0 && v.abs() < 9.0e15 => Ok(v as i64),
        _ => Err(format!("bad label `{}`", tok)),
    }
}

/// Opens a libsvm file; names ending in `.gz` are decompressed on the fly.
pub fn open_libsvm_file(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path).map_err(|e| {
        WltlsError::Io(io::Error::new(
            e.kind(),
            format!("{}: {}", path.display(), e),
        ))
    })?;
    let reader: Box<dyn Read> = if path.extension().is_some_and(|e| e == "gz") {
        Box::new(MultiGzDecoder::new(file))
    } else {
        Box::new(file)
    };
    Ok(Box::new(BufReader::new(reader)))
}

pub fn load_libsvm_file(path: &Path, base: IndexBase) -> Result<Dataset> {
    parse_libsvm(open_libsvm_file(path)?, base)
}

pub fn load_libsvm_file_with_labels(
    path: &Path,
    base: IndexBase,
    label_map: LabelMap,
) -> Result<Dataset> {
    parse_libsvm_with_labels(open_libsvm_file(path)?, base, label_map)
}
