use serde::{Deserialize, Serialize};

use super::loss::batch_gradient;
use super::mlp::{forward, MlpParams, MlpShape};
use crate::dataio::ClassEmbeddingTable;
use crate::error::{Result, VaweError};
use crate::miner::mine_triplets;
use crate::neighborhood::{consistency, hub_counts, neighbor_lists, HubSet, VisualSignatureTable};
use crate::numerics::{DenseMatrix, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Neighborhood size that makes a class "close".
    pub k1: usize,
    /// Neighborhood size outside of which a class is "distant"
    /// (`None`: half the seen classes, capped at `n - 1`).
    pub k2: Option<usize>,
    /// Hinge margin.
    pub alpha: f64,
    /// Weight-decay coefficient on every weight and bias.
    pub lambda: f64,
    pub out_dim: usize,
    /// Hidden widths (`None`: twice the input dimension for both).
    pub hidden: Option<[usize; 2]>,
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub min_delta: f64,
    pub norm_eps: f64,
    pub seed: u64,
    /// Rebuild the semantic lists from the mapped outputs every epoch instead
    /// of keeping those of the input embeddings.
    pub recompute_ns_per_epoch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k1: 10,
            k2: None,
            alpha: 1.0,
            lambda: 1e-4,
            out_dim: 128,
            hidden: None,
            lr: 0.01,
            momentum: 0.0,
            batch_size: 64,
            max_epochs: 300,
            patience: 10,
            min_delta: 1e-6,
            norm_eps: 1e-12,
            seed: 0,
            recompute_ns_per_epoch: false,
        }
    }
}

impl TrainConfig {
    /// `k2` for `num_classes` seen classes.
    pub fn resolved_k2(&self, num_classes: usize) -> usize {
        self.k2
            .unwrap_or((num_classes / 2).min(num_classes.saturating_sub(1)))
    }

    pub fn network_shape(&self, input_dim: usize) -> MlpShape {
        let [h1, h2] = self.hidden.unwrap_or([2 * input_dim, 2 * input_dim]);
        [input_dim, h1, h2, self.out_dim]
    }

    /// Checks the config on its own and against `num_classes` seen classes.
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        let bad = |m: String| Err(VaweError::Config(m));
        let k2 = self.resolved_k2(num_classes);
        if self.k1 == 0 {
            return bad("k1 must be >= 1".into());
        }
        if k2 <= self.k1 {
            return bad(format!("k2 ({k2}) must exceed k1 ({})", self.k1));
        }
        if num_classes < k2 + 1 {
            return bad(format!(
                "need at least k2 + 1 = {} seen classes, got {num_classes}",
                k2 + 1
            ));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if self.out_dim < 2 {
            return bad(format!("out_dim must be >= 2, got {}", self.out_dim));
        }
        if matches!(self.hidden, Some([a, b]) if a == 0 || b == 0) {
            return bad("hidden widths must be positive".into());
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return bad("batch_size and max_epochs must be positive".into());
        }
        if !(self.norm_eps > 0.0 && self.min_delta >= 0.0) {
            return bad("norm_eps must be positive and min_delta non-negative".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The miner found no disagreement triplets.
    StructureConverged,
    LossPlateau,
    MaxEpochs,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::StructureConverged => "structure converged",
            StopReason::LossPlateau => "loss plateau",
            StopReason::MaxEpochs => "max epochs",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub triplets: usize,
    /// Mean hinge loss over the epoch's triplets (0 for an empty batch).
    pub mean_loss: f64,
    pub hubs: usize,
    /// Consistency at `k1` between the seen visual signatures and the
    /// mapped embeddings that the epoch started from.
    pub consistency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub stop_reason: StopReason,
    /// Epoch whose end-of-epoch parameters are returned; `None` means the
    /// initialization was returned.
    pub best_epoch: Option<usize>,
    pub best_mean_loss: Option<f64>,
    pub last_mean_loss: Option<f64>,
    /// Consistency at `k1` of the returned parameters on the seen classes.
    pub final_consistency: f64,
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ReportLine<'a> {
    Epoch(&'a EpochRecord),
    Summary {
        stop_reason: StopReason,
        best_epoch: Option<usize>,
        best_mean_loss: Option<f64>,
        last_mean_loss: Option<f64>,
        final_consistency: f64,
    },
}

impl TrainReport {
    /// JSON lines: one `"kind":"epoch"` object per epoch, then a summary.
    pub fn to_json_lines(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.epochs {
            out.push_str(&serde_json::to_string(&ReportLine::Epoch(e))?);
            out.push('\n');
        }
        out.push_str(&serde_json::to_string(&ReportLine::Summary {
            stop_reason: self.stop_reason,
            best_epoch: self.best_epoch,
            best_mean_loss: self.best_mean_loss,
            last_mean_loss: self.last_mean_loss,
            final_consistency: self.final_consistency,
        })?);
        out.push('\n');
        Ok(out)
    }
}

/// Row-wise forward of a whole table; class order is kept.
pub fn map_embeddings(
    params: &MlpParams,
    table: &ClassEmbeddingTable,
    eps: f64,
) -> Result<ClassEmbeddingTable> {
    if table.dim() != params.input_dim() {
        return Err(VaweError::Shape(format!(
            "embeddings have dimension {}, network expects {}",
            table.dim(),
            params.input_dim()
        )));
    }
    let rows = map_rows(params, table.vectors(), eps)?;
    ClassEmbeddingTable::new(table.class_names().to_vec(), rows)
}

fn map_rows(params: &MlpParams, rows: &DenseMatrix, eps: f64) -> Result<DenseMatrix> {
    let mut out = DenseMatrix::zeros(rows.rows(), params.out_dim());
    for (i, r) in rows.row_iter().enumerate() {
        out.row_mut(i).copy_from_slice(&forward(params, r, eps)?.0);
    }
    Ok(out)
}

/// Optional per-epoch observer, e.g. for streaming progress.
pub type EpochHook<'a> = &'a mut dyn FnMut(&EpochRecord);

/// Trains the mapping network on seen classes only.
pub fn train(
    semantic: &ClassEmbeddingTable,
    signatures: &VisualSignatureTable,
    cfg: &TrainConfig,
) -> Result<(MlpParams, TrainReport)> {
    train_with_hook(semantic, signatures, cfg, None)
}

pub fn train_with_hook(
    semantic: &ClassEmbeddingTable,
    signatures: &VisualSignatureTable,
    cfg: &TrainConfig,
    mut hook: Option<EpochHook<'_>>,
) -> Result<(MlpParams, TrainReport)> {
    if semantic.class_names() != signatures.class_names() {
        return Err(VaweError::Protocol(
            "semantic table and visual signatures must list the same classes in the same order"
                .into(),
        ));
    }
    let n = semantic.len();
    cfg.validate(n)?;
    let (k1, k2) = (cfg.k1, cfg.resolved_k2(n));
    let eps = cfg.norm_eps;
    let inputs = semantic.vectors();

    let mut rng = Rng::new(cfg.seed);
    let mut init_rng = rng.split();
    let mut shuffle_rng = rng.split();
    let mut params = MlpParams::init(cfg.network_shape(semantic.dim()), &mut init_rng);
    let mut velocity = MlpParams::zeros(params.shape());

    let nv_k1 = neighbor_lists(signatures.signatures(), k1)?;
    let nv_k2 = neighbor_lists(signatures.signatures(), k2)?;
    let mut ns_k1 = neighbor_lists(inputs, k1)?;
    let mut ns_k2 = neighbor_lists(inputs, k2)?;

    let mut best: Option<(usize, f64, MlpParams)> = None;
    let mut since_best = 0;
    let mut records = Vec::new();
    let mut stop = StopReason::MaxEpochs;

    for epoch in 1..=cfg.max_epochs {
        let mapped = map_rows(&params, inputs, eps)?;
        let mapped_k1 = neighbor_lists(&mapped, k1)?;
        let hubs = HubSet {
            members: hub_counts(&mapped_k1)
                .into_iter()
                .enumerate()
                .filter(|&(_, c)| c > k1)
                .map(|(j, _)| j)
                .collect(),
            epoch,
        };
        let mapped_consistency = consistency(&nv_k1, &mapped_k1)?;
        if cfg.recompute_ns_per_epoch && epoch > 1 {
            ns_k1 = mapped_k1;
            ns_k2 = neighbor_lists(&mapped, k2)?;
        }

        let batch = mine_triplets(&nv_k1, &nv_k2, &ns_k1, &ns_k2, &hubs, &mut shuffle_rng)?;
        if batch.is_empty() {
            let rec = EpochRecord {
                epoch,
                triplets: 0,
                mean_loss: 0.0,
                hubs: hubs.len(),
                consistency: mapped_consistency,
            };
            if let Some(h) = hook.as_mut() {
                h(&rec);
            }
            records.push(rec);
            stop = StopReason::StructureConverged;
            break;
        }

        let mut loss_sum = 0.0;
        for chunk in batch.triplets.chunks(cfg.batch_size) {
            let g = batch_gradient(&params, inputs, chunk, cfg.alpha, cfg.lambda, eps)?;
            if !g.loss.is_finite() || !g.grad.is_finite() {
                return Err(VaweError::Divergence {
                    epoch,
                    msg: "non-finite loss or gradient".into(),
                });
            }
            loss_sum += g.loss * chunk.len() as f64;
            if cfg.momentum > 0.0 {
                velocity.scale(cfg.momentum);
                velocity.add_scaled(1.0, &g.grad);
                params.add_scaled(-cfg.lr, &velocity);
            } else {
                params.add_scaled(-cfg.lr, &g.grad);
            }
        }
        let mean_loss = loss_sum / batch.len() as f64;
        if !mean_loss.is_finite() || !params.is_finite() {
            return Err(VaweError::Divergence {
                epoch,
                msg: format!("mean loss {mean_loss}"),
            });
        }
        let rec = EpochRecord {
            epoch,
            triplets: batch.len(),
            mean_loss,
            hubs: hubs.len(),
            consistency: mapped_consistency,
        };
        if let Some(h) = hook.as_mut() {
            h(&rec);
        }
        records.push(rec);

        let improved = best
            .as_ref()
            .is_none_or(|(_, l, _)| mean_loss < l - cfg.min_delta);
        if improved {
            best = Some((epoch, mean_loss, params.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                stop = StopReason::LossPlateau;
                break;
            }
        }
    }

    let last_mean_loss = records.iter().rev().find(|r| r.triplets > 0).map(|r| r.mean_loss);
    let (best_epoch, best_mean_loss, params) = match best {
        Some((e, l, p)) => (Some(e), Some(l), p),
        None => (None, None, params),
    };
    let final_consistency = consistency(&nv_k1, &neighbor_lists(&map_rows(&params, inputs, eps)?, k1)?)?;
    Ok((
        params,
        TrainReport {
            epochs: records,
            stop_reason: stop,
            best_epoch,
            best_mean_loss,
            last_mean_loss,
            final_consistency,
        },
    ))
}
