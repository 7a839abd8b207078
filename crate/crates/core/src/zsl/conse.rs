use serde::{Deserialize, Serialize};

use super::{argmax, cosine, ZslScorer};
use crate::dataio::ClassEmbeddingTable;
use crate::error::{Result, VaweError};
use crate::neighborhood::VisualSignatureTable;
use crate::numerics::{l2_normalize, sq_dist};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConseParams {
    /// Number of top seen classes combined (`None`: min(10, #seen)).
    pub t_top: Option<usize>,
    pub temperature: f64,
}

impl Default for ConseParams {
    fn default() -> Self {
        ConseParams {
            t_top: None,
            temperature: 1.0,
        }
    }
}

/// Convex combination of seen-class embeddings weighted by a seen-class
/// posterior. The posterior is a softmax over negative squared distances
/// to the seen visual signatures, divided by `temperature`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConseModel {
    pub signatures: VisualSignatureTable,
    pub seen_embeddings: ClassEmbeddingTable,
    pub t_top: usize,
    pub temperature: f64,
}

impl ConseModel {
    pub fn new(
        signatures: VisualSignatureTable,
        seen_embeddings: ClassEmbeddingTable,
        params: &ConseParams,
    ) -> Result<Self> {
        if signatures.class_names() != seen_embeddings.class_names() {
            return Err(VaweError::Protocol(
                "ConSE signatures and seen embeddings must list the same classes in order".into(),
            ));
        }
        let n = signatures.len();
        let t_top = params.t_top.unwrap_or(n.min(10));
        if t_top == 0 || t_top > n {
            return Err(VaweError::Config(format!(
                "t_top must lie in 1..={n}, got {t_top}"
            )));
        }
        if !(params.temperature > 0.0 && params.temperature.is_finite()) {
            return Err(VaweError::Config(format!(
                "temperature must be positive, got {}",
                params.temperature
            )));
        }
        Ok(ConseModel {
            signatures,
            seen_embeddings,
            t_top,
            temperature: params.temperature,
        })
    }

    /// Seen-class posterior for one feature vector.
    pub fn posterior(&self, x: &[f64]) -> Vec<f64> {
        let logits: Vec<f64> = self
            .signatures
            .signatures()
            .row_iter()
            .map(|v| -sq_dist(x, v) / self.temperature)
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / z).collect()
    }
}

/// Semantic embedding of an image: normalized, posterior-weighted mean of
/// the `t_top` most probable seen-class embeddings.
pub fn conse_embed(x: &[f64], model: &ConseModel) -> Result<Vec<f64>> {
    if x.len() != model.signatures.dim() {
        return Err(VaweError::Shape(format!(
            "feature of length {} against signatures of dimension {}",
            x.len(),
            model.signatures.dim()
        )));
    }
    let post = model.posterior(x);
    let mut order: Vec<usize> = (0..post.len()).collect();
    order.sort_by(|&a, &b| post[b].total_cmp(&post[a]).then(a.cmp(&b)));
    let dim = model.seen_embeddings.dim();
    let mut acc = vec![0.0; dim];
    let mut mass = 0.0;
    for &c in &order[..model.t_top] {
        mass += post[c];
        for (a, s) in acc.iter_mut().zip(model.seen_embeddings.row(c)) {
            *a += post[c] * s;
        }
    }
    acc.iter_mut().for_each(|a| *a /= mass);
    Ok(l2_normalize(&acc, 1e-12))
}

/// Index into `unseen` of the class whose embedding has the highest cosine
/// with the image's ConSE embedding.
pub fn conse_predict(x: &[f64], model: &ConseModel, unseen: &ClassEmbeddingTable) -> Result<usize> {
    if unseen.dim() != model.seen_embeddings.dim() {
        return Err(VaweError::Shape(format!(
            "unseen embeddings have dimension {}, seen ones {}",
            unseen.dim(),
            model.seen_embeddings.dim()
        )));
    }
    let e = conse_embed(x, model)?;
    Ok(argmax(unseen.vectors().row_iter().map(|s| cosine(&e, s))))
}

impl ZslScorer for ConseModel {
    fn score(&self, x: &[f64], class_embedding: &[f64]) -> f64 {
        cosine(&conse_embed(x, self).expect("feature dimension checked by caller"), class_embedding)
    }

    fn predict(&self, x: &[f64], candidates: &ClassEmbeddingTable) -> usize {
        conse_predict(x, self, candidates).expect("dimensions checked by caller")
    }
}
