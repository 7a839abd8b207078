use serde::{Deserialize, Serialize};

use super::ZslScorer;
use crate::dataio::{ClassEmbeddingTable, LabeledFeatureSet};
use crate::error::{Result, VaweError};
use crate::numerics::{dot, matmul_tn, solve_spd, DenseMatrix};

/// Encoding of the seen-class ground-truth matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetEncoding {
    /// +1 for the true class, −1 elsewhere.
    #[default]
    PlusMinusOne,
    /// 1 for the true class, 0 elsewhere.
    ZeroOne,
}

impl TargetEncoding {
    fn values(self) -> (f64, f64) {
        match self {
            TargetEncoding::PlusMinusOne => (1.0, -1.0),
            TargetEncoding::ZeroOne => (1.0, 0.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EszslParams {
    /// Ridge weight on the feature side.
    pub gamma: f64,
    /// Ridge weight on the embedding side.
    pub lam: f64,
    pub encoding: TargetEncoding,
}

impl Default for EszslParams {
    fn default() -> Self {
        EszslParams {
            gamma: 1.0,
            lam: 1.0,
            encoding: TargetEncoding::PlusMinusOne,
        }
    }
}

/// Bilinear compatibility `score(x, s) = xᵀ·V·s`.
#[derive(Clone, Debug, PartialEq)]
pub struct EszslModel {
    pub v: DenseMatrix,
    pub gamma: f64,
    pub lam: f64,
}

impl EszslModel {
    /// Closed-form fit on seen classes:
    /// `V = (X·Xᵀ + γI)⁻¹ · X·Y·Sᵀ · (S·Sᵀ + λI)⁻¹`
    /// with feature columns `X`, class-embedding columns `S` and targets `Y`.
    pub fn fit(
        x_seen: &LabeledFeatureSet,
        emb_seen: &ClassEmbeddingTable,
        params: &EszslParams,
    ) -> Result<Self> {
        if !(params.gamma > 0.0 && params.lam > 0.0) {
            return Err(VaweError::Config(format!(
                "gamma and lam must be positive, got {} / {}",
                params.gamma, params.lam
            )));
        }
        if x_seen.is_empty() {
            return Err(VaweError::Protocol("no seen features to fit on".into()));
        }
        let index = emb_seen.index_map();
        let labels = x_seen
            .class_labels()
            .iter()
            .map(|l| {
                index.get(l.as_str()).copied().ok_or_else(|| {
                    VaweError::Protocol(format!("feature label `{l}` is not a seen class"))
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let f = x_seen.features();
        let e = emb_seen.vectors();
        let (pos, neg) = params.encoding.values();

        // Y·E, one row per image: pos·e_y + neg·(Σ_c e_c − e_y).
        let mut total = vec![0.0; e.cols()];
        for r in e.row_iter() {
            total.iter_mut().zip(r).for_each(|(t, v)| *t += v);
        }
        let mut ye = DenseMatrix::zeros(f.rows(), e.cols());
        for (i, &y) in labels.iter().enumerate() {
            for ((dst, &t), &ey) in ye.row_mut(i).iter_mut().zip(&total).zip(e.row(y)) {
                *dst = pos * ey + neg * (t - ey);
            }
        }

        let mut gram_x = matmul_tn(f, f)?;
        gram_x.add_diagonal(params.gamma);
        let xys = matmul_tn(f, &ye)?;
        let left = solve_spd(&gram_x, &xys)?;

        let mut gram_s = matmul_tn(e, e)?;
        gram_s.add_diagonal(params.lam);
        let v = solve_spd(&gram_s, &left.transpose())?.transpose();
        if !v.is_finite() {
            return Err(VaweError::Numeric("ESZSL solution is not finite".into()));
        }
        Ok(EszslModel {
            v,
            gamma: params.gamma,
            lam: params.lam,
        })
    }

    /// `xᵀ·V`, reusable across candidate classes.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.v.rows() {
            return Err(VaweError::Shape(format!(
                "feature of length {} for a model expecting {}",
                x.len(),
                self.v.rows()
            )));
        }
        let mut out = vec![0.0; self.v.cols()];
        for (xi, row) in x.iter().zip(self.v.row_iter()) {
            out.iter_mut().zip(row).for_each(|(o, v)| *o += xi * v);
        }
        Ok(out)
    }
}

impl ZslScorer for EszslModel {
    fn score(&self, x: &[f64], class_embedding: &[f64]) -> f64 {
        let xv = self.project(x).expect("feature dimension checked by caller");
        dot(&xv, class_embedding)
    }

    fn predict(&self, x: &[f64], candidates: &ClassEmbeddingTable) -> usize {
        let xv = self.project(x).expect("feature dimension checked by caller");
        super::argmax(candidates.vectors().row_iter().map(|s| dot(&xv, s)))
    }
}
