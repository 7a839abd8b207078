//! Class tables, labeled features, splits, file formats and the synthetic generator.

mod checkpoint;
mod synth;
mod text;

use std::collections::{BTreeSet, HashMap};

use crate::error::{Result, VaweError};
use crate::numerics::DenseMatrix;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use synth::{calibrate_discrepancy, generate_synthetic, random_split, SynthConfig, SynthData};
pub use text::{
    load_embeddings, load_features, load_split, parse_embeddings, parse_features, parse_split,
    save_embeddings, save_features, save_split, write_embeddings, write_features, write_split,
};

/// Class name ↔ vector table. Row order is the canonical class index.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassEmbeddingTable {
    class_names: Vec<String>,
    vectors: DenseMatrix,
}

impl ClassEmbeddingTable {
    pub fn new(class_names: Vec<String>, vectors: DenseMatrix) -> Result<Self> {
        if class_names.len() != vectors.rows() {
            return Err(VaweError::Shape(format!(
                "{} class names for {} vectors",
                class_names.len(),
                vectors.rows()
            )));
        }
        let mut seen = BTreeSet::new();
        for name in &class_names {
            if !seen.insert(name.as_str()) {
                return Err(VaweError::Protocol(format!("duplicate class name `{name}`")));
            }
        }
        if !vectors.is_finite() {
            return Err(VaweError::Numeric("embedding table contains non-finite values".into()));
        }
        Ok(ClassEmbeddingTable {
            class_names,
            vectors,
        })
    }

    pub fn len(&self) -> usize {
        self.class_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class_names.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn vectors(&self) -> &DenseMatrix {
        &self.vectors
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.vectors.row(i)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|n| n == name)
    }

    /// Name → row index map for repeated lookups.
    pub fn index_map(&self) -> HashMap<&str, usize> {
        self.class_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect()
    }

    /// Rows for `names`, in that order.
    pub fn subset<S: AsRef<str>>(&self, names: &[S]) -> Result<Self> {
        let map = self.index_map();
        let idx = names
            .iter()
            .map(|n| {
                map.get(n.as_ref()).copied().ok_or_else(|| {
                    VaweError::Protocol(format!("class `{}` missing from embedding table", n.as_ref()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ClassEmbeddingTable::new(
            idx.iter().map(|&i| self.class_names[i].clone()).collect(),
            self.vectors.select_rows(&idx),
        )
    }
}

/// One feature row per image, each labeled with its class name.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledFeatureSet {
    class_labels: Vec<String>,
    features: DenseMatrix,
}

impl LabeledFeatureSet {
    pub fn new(class_labels: Vec<String>, features: DenseMatrix) -> Result<Self> {
        if class_labels.len() != features.rows() {
            return Err(VaweError::Shape(format!(
                "{} labels for {} feature rows",
                class_labels.len(),
                features.rows()
            )));
        }
        if !features.is_finite() {
            return Err(VaweError::Numeric("feature set contains non-finite values".into()));
        }
        Ok(LabeledFeatureSet {
            class_labels,
            features,
        })
    }

    pub fn len(&self) -> usize {
        self.class_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class_labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn class_labels(&self) -> &[String] {
        &self.class_labels
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    /// Distinct labels in order of first appearance.
    pub fn classes(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        self.class_labels
            .iter()
            .filter(|l| seen.insert(l.as_str()))
            .cloned()
            .collect()
    }

    /// Rows whose label is in `classes`, original order kept.
    pub fn restrict_to<S: AsRef<str>>(&self, classes: &[S]) -> LabeledFeatureSet {
        let keep: BTreeSet<&str> = classes.iter().map(|c| c.as_ref()).collect();
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| keep.contains(self.class_labels[i].as_str()))
            .collect();
        LabeledFeatureSet {
            class_labels: idx.iter().map(|&i| self.class_labels[i].clone()).collect(),
            features: self.features.select_rows(&idx),
        }
    }
}

/// Disjoint seen/unseen class lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZslSplit {
    seen: Vec<String>,
    unseen: Vec<String>,
}

impl ZslSplit {
    pub fn new(seen: Vec<String>, unseen: Vec<String>) -> Result<Self> {
        if seen.is_empty() || unseen.is_empty() {
            return Err(VaweError::Protocol(
                "split needs at least one seen and one unseen class".into(),
            ));
        }
        let mut all = BTreeSet::new();
        for c in seen.iter().chain(&unseen) {
            if !all.insert(c.as_str()) {
                return Err(VaweError::Protocol(format!(
                    "class `{c}` listed twice in split"
                )));
            }
        }
        Ok(ZslSplit { seen, unseen })
    }

    pub fn seen(&self) -> &[String] {
        &self.seen
    }

    pub fn unseen(&self) -> &[String] {
        &self.unseen
    }
}
