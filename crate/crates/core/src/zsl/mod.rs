//! Zero-shot evaluators. Both fit on seen classes only and predict over a
//! candidate table of unseen class embeddings.

mod conse;
mod eszsl;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataio::{ClassEmbeddingTable, LabeledFeatureSet};
use crate::error::{Result, VaweError};
use crate::neighborhood::visual_signatures;
use crate::numerics::{dot, norm};

pub use conse::{conse_embed, conse_predict, ConseModel, ConseParams};
pub use eszsl::{EszslModel, EszslParams, TargetEncoding};

/// Compatibility between an image feature and a class embedding.
pub trait ZslScorer {
    fn score(&self, x: &[f64], class_embedding: &[f64]) -> f64;

    /// Highest-scoring candidate; ties go to the lowest index.
    fn predict(&self, x: &[f64], candidates: &ClassEmbeddingTable) -> usize {
        argmax(candidates.vectors().row_iter().map(|s| self.score(x, s)))
    }
}

/// Index of the first maximum. Returns 0 for an empty iterator.
pub fn argmax(scores: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, s) in scores.into_iter().enumerate() {
        if s > best_val {
            best = i;
            best_val = s;
        }
    }
    best
}

/// Cosine similarity; zero when either side has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let d = norm(a) * norm(b);
    if d == 0.0 {
        0.0
    } else {
        dot(a, b) / d
    }
}

pub fn eszsl_fit(
    x_seen: &LabeledFeatureSet,
    emb_seen: &ClassEmbeddingTable,
    params: &EszslParams,
) -> Result<EszslModel> {
    EszslModel::fit(x_seen, emb_seen, params)
}

/// ConSE model whose seen-class posterior uses the class means of `x_seen`.
pub fn conse_fit(
    x_seen: &LabeledFeatureSet,
    emb_seen: &ClassEmbeddingTable,
    params: &ConseParams,
) -> Result<ConseModel> {
    let signatures = visual_signatures(x_seen, emb_seen.class_names())?;
    ConseModel::new(signatures, emb_seen.clone(), params)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZslMethod {
    Eszsl,
    Conse,
}

impl ZslMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            ZslMethod::Eszsl => "eszsl",
            ZslMethod::Conse => "conse",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub per_class_accuracy: BTreeMap<String, f64>,
    pub mean_per_class_accuracy: f64,
    pub overall_accuracy: f64,
    pub num_test: usize,
    pub config: serde_json::Value,
}

/// Top-1 accuracy of `predict` over unseen test rows. `predict` returns an
/// index into `emb_unseen`.
pub fn evaluate_with(
    method: &str,
    mut predict: impl FnMut(&[f64]) -> usize,
    features_unseen: &LabeledFeatureSet,
    emb_unseen: &ClassEmbeddingTable,
    config: serde_json::Value,
) -> Result<EvalReport> {
    if features_unseen.is_empty() {
        return Err(VaweError::Protocol("no unseen test features".into()));
    }
    let index = emb_unseen.index_map();
    let mut hits: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for (i, label) in features_unseen.class_labels().iter().enumerate() {
        let truth = *index.get(label.as_str()).ok_or_else(|| {
            VaweError::Protocol(format!("test label `{label}` is not an unseen class"))
        })?;
        let entry = hits.entry(label.as_str()).or_default();
        entry.1 += 1;
        if predict(features_unseen.row(i)) == truth {
            entry.0 += 1;
        }
    }
    let per_class: BTreeMap<String, f64> = hits
        .iter()
        .map(|(k, &(c, n))| (k.to_string(), c as f64 / n as f64))
        .collect();
    let mean = per_class.values().sum::<f64>() / per_class.len() as f64;
    let correct: usize = hits.values().map(|h| h.0).sum();
    Ok(EvalReport {
        method: method.to_string(),
        per_class_accuracy: per_class,
        mean_per_class_accuracy: mean,
        overall_accuracy: correct as f64 / features_unseen.len() as f64,
        num_test: features_unseen.len(),
        config,
    })
}

pub fn evaluate<S: ZslScorer + ?Sized>(
    method: &str,
    scorer: &S,
    features_unseen: &LabeledFeatureSet,
    emb_unseen: &ClassEmbeddingTable,
    config: serde_json::Value,
) -> Result<EvalReport> {
    evaluate_with(
        method,
        |x| scorer.predict(x, emb_unseen),
        features_unseen,
        emb_unseen,
        config,
    )
}

/// Fits `method` on the seen part and scores the unseen part.
pub fn run_zsl(
    method: ZslMethod,
    x_seen: &LabeledFeatureSet,
    emb_seen: &ClassEmbeddingTable,
    x_unseen: &LabeledFeatureSet,
    emb_unseen: &ClassEmbeddingTable,
    eszsl: &EszslParams,
    conse: &ConseParams,
) -> Result<EvalReport> {
    if x_seen.dim() != x_unseen.dim() {
        return Err(VaweError::Shape(format!(
            "seen features have dimension {}, unseen {}",
            x_seen.dim(),
            x_unseen.dim()
        )));
    }
    if emb_seen.dim() != emb_unseen.dim() {
        return Err(VaweError::Shape(format!(
            "seen embeddings have dimension {}, unseen {}",
            emb_seen.dim(),
            emb_unseen.dim()
        )));
    }
    match method {
        ZslMethod::Eszsl => {
            let model = eszsl_fit(x_seen, emb_seen, eszsl)?;
            let cfg = serde_json::to_value(eszsl)?;
            evaluate(method.as_str(), &model, x_unseen, emb_unseen, cfg)
        }
        ZslMethod::Conse => {
            let model = conse_fit(x_seen, emb_seen, conse)?;
            let cfg = serde_json::json!({
                "t_top": model.t_top,
                "temperature": model.temperature,
            });
            evaluate(method.as_str(), &model, x_unseen, emb_unseen, cfg)
        }
    }
}
