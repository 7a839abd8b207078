//! Synthetic classes with a tunable visual–semantic discrepancy.
//!
//! Class centers lie on a sphere inside a `visual_rank`-dimensional subspace
//! of the visual space. Images are centers plus isotropic noise. A fixed
//! random map `Q` takes each center into the semantic space, acting as an
//! isometry on the center subspace whenever `visual_rank <= semantic_dim`.
//! Semantic vectors are `normalize(Q·μ + ρ·g)` where `g` is drawn from a
//! Gaussian supported on a fixed `discrepancy_rank`-dimensional subspace,
//! scaled so that `E‖g‖² = semantic_dim`.
//!
//! With `ρ = 0` and an isometric `Q`, semantic distances are the visual ones
//! up to a common factor, so both spaces share every neighborhood.

use serde::{Deserialize, Serialize};

use super::{ClassEmbeddingTable, LabeledFeatureSet, ZslSplit};
use crate::error::{Result, VaweError};
use crate::neighborhood::{consistency, neighbor_lists, visual_signatures, VisualSignatureTable};
use crate::numerics::{l2_normalize, matmul, DenseMatrix, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub num_classes: usize,
    pub images_per_class: usize,
    pub visual_dim: usize,
    pub semantic_dim: usize,
    /// Per-coordinate standard deviation of image features around their center.
    pub noise_sigma: f64,
    /// Weight of the non-visual semantic component.
    pub discrepancy_rho: f64,
    /// Dimension of the subspace spanned by class centers (`None`: `visual_dim`).
    pub visual_rank: Option<usize>,
    /// Rank of the discrepancy covariance (`None`: `semantic_dim`, isotropic).
    pub discrepancy_rank: Option<usize>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_classes: 40,
            images_per_class: 25,
            visual_dim: 32,
            semantic_dim: 24,
            noise_sigma: 0.3,
            discrepancy_rho: 2.0,
            visual_rank: Some(4),
            discrepancy_rank: Some(2),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn visual_rank(&self) -> usize {
        self.visual_rank.unwrap_or(self.visual_dim)
    }

    pub fn discrepancy_rank(&self) -> usize {
        self.discrepancy_rank.unwrap_or(self.semantic_dim)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(VaweError::Config(m));
        if self.num_classes < 4 {
            return bad(format!("num_classes must be >= 4, got {}", self.num_classes));
        }
        if self.images_per_class == 0 {
            return bad("images_per_class must be >= 1".into());
        }
        if self.visual_dim < 2 || self.semantic_dim < 2 {
            return bad(format!(
                "dimensions must be >= 2, got visual {} / semantic {}",
                self.visual_dim, self.semantic_dim
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma must be finite and >= 0, got {}", self.noise_sigma));
        }
        if !(self.discrepancy_rho >= 0.0 && self.discrepancy_rho.is_finite()) {
            return bad(format!(
                "discrepancy_rho must be finite and >= 0, got {}",
                self.discrepancy_rho
            ));
        }
        if !(1..=self.visual_dim).contains(&self.visual_rank()) {
            return bad(format!(
                "visual_rank must lie in 1..={}, got {}",
                self.visual_dim,
                self.visual_rank()
            ));
        }
        if !(1..=self.semantic_dim).contains(&self.discrepancy_rank()) {
            return bad(format!(
                "discrepancy_rank must lie in 1..={}, got {}",
                self.semantic_dim,
                self.discrepancy_rank()
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthData {
    pub features: LabeledFeatureSet,
    pub embeddings: ClassEmbeddingTable,
    /// The true class centers.
    pub centers: VisualSignatureTable,
}

/// `rows × cols` matrix with orthonormal columns (or orthonormal rows when
/// `cols > rows`), via modified Gram–Schmidt on Gaussian draws.
fn random_orthonormal(rng: &mut Rng, rows: usize, cols: usize) -> DenseMatrix {
    let (n, m) = if rows >= cols { (rows, cols) } else { (cols, rows) };
    // `m` orthonormal vectors of length `n`.
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    while basis.len() < m {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gaussian()).collect();
        for _ in 0..2 {
            for b in &basis {
                let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
        }
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nv > 1e-8 {
            basis.push(v.into_iter().map(|x| x / nv).collect());
        }
    }
    let mut out = DenseMatrix::zeros(rows, cols);
    for (j, b) in basis.iter().enumerate() {
        for (i, &x) in b.iter().enumerate() {
            if rows >= cols {
                out[(i, j)] = x;
            } else {
                out[(j, i)] = x;
            }
        }
    }
    out
}

pub fn class_name(i: usize) -> String {
    format!("class_{i:03}")
}

pub fn generate_synthetic(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let mut rng = Rng::new(cfg.seed);
    let (c, dv, ds) = (cfg.num_classes, cfg.visual_dim, cfg.semantic_dim);
    let (rv, rg) = (cfg.visual_rank(), cfg.discrepancy_rank());

    let center_basis = random_orthonormal(&mut rng, dv, rv);
    let semantic_basis = random_orthonormal(&mut rng, ds, rv);
    // Q = semantic_basis · center_basisᵀ, a fixed visual → semantic map.
    let q = matmul(&semantic_basis, &center_basis.transpose())?;
    let discrepancy_basis = random_orthonormal(&mut rng, ds, rg);
    let g_scale = (ds as f64 / rg as f64).sqrt();

    let radius = (rv as f64).sqrt();
    let mut centers = DenseMatrix::zeros(c, dv);
    for i in 0..c {
        let u: Vec<f64> = (0..rv).map(|_| rng.gaussian()).collect();
        let u = l2_normalize(&u, 1e-12);
        let mu = center_basis.mul_vec(&u)?;
        for (dst, x) in centers.row_mut(i).iter_mut().zip(mu) {
            *dst = radius * x;
        }
    }

    let mut semantic = DenseMatrix::zeros(c, ds);
    for i in 0..c {
        let z: Vec<f64> = (0..rg).map(|_| rng.gaussian()).collect();
        let g = discrepancy_basis.mul_vec(&z)?;
        let qmu = q.mul_vec(centers.row(i))?;
        let s: Vec<f64> = qmu
            .iter()
            .zip(&g)
            .map(|(a, b)| a + cfg.discrepancy_rho * g_scale * b)
            .collect();
        semantic.row_mut(i).copy_from_slice(&l2_normalize(&s, 1e-12));
    }

    let n_img = cfg.images_per_class;
    let mut features = DenseMatrix::zeros(c * n_img, dv);
    let mut labels = Vec::with_capacity(c * n_img);
    for i in 0..c {
        for j in 0..n_img {
            let r = i * n_img + j;
            for d in 0..dv {
                features[(r, d)] = centers[(i, d)] + cfg.noise_sigma * rng.gaussian();
            }
            labels.push(class_name(i));
        }
    }

    let names: Vec<String> = (0..c).map(class_name).collect();
    Ok(SynthData {
        features: LabeledFeatureSet::new(labels, features)?,
        embeddings: ClassEmbeddingTable::new(names.clone(), semantic)?,
        centers: VisualSignatureTable::new(names, centers)?,
    })
}

/// Random seen/unseen split; both lists keep the order of `names`.
pub fn random_split(names: &[String], num_unseen: usize, rng: &mut Rng) -> Result<ZslSplit> {
    if num_unseen == 0 || num_unseen >= names.len() {
        return Err(VaweError::Config(format!(
            "num_unseen must lie in 1..{}, got {num_unseen}",
            names.len()
        )));
    }
    let mut idx: Vec<usize> = (0..names.len()).collect();
    rng.shuffle(&mut idx);
    let mut unseen_mask = vec![false; names.len()];
    for &i in &idx[..num_unseen] {
        unseen_mask[i] = true;
    }
    let (mut seen, mut unseen) = (Vec::new(), Vec::new());
    for (name, &u) in names.iter().zip(&unseen_mask) {
        if u {
            unseen.push(name.clone());
        } else {
            seen.push(name.clone());
        }
    }
    ZslSplit::new(seen, unseen)
}

/// Scans `grid` (in order) for a discrepancy weight whose raw consistency at
/// `k`, semantic vectors against image-mean signatures over all classes,
/// lies in `[lo, hi]`; returns the one closest to the middle of the range
/// together with its consistency.
pub fn calibrate_discrepancy(
    base: &SynthConfig,
    k: usize,
    lo: f64,
    hi: f64,
    grid: &[f64],
) -> Result<Option<(f64, f64)>> {
    let mid = 0.5 * (lo + hi);
    let mut best: Option<(f64, f64)> = None;
    for &rho in grid {
        let cfg = SynthConfig {
            discrepancy_rho: rho,
            ..base.clone()
        };
        let data = generate_synthetic(&cfg)?;
        let sig = visual_signatures(&data.features, data.embeddings.class_names())?;
        let value = consistency(
            &neighbor_lists(sig.signatures(), k)?,
            &neighbor_lists(data.embeddings.vectors(), k)?,
        )?;
        if (lo..=hi).contains(&value)
            && best.is_none_or(|(_, b)| (value - mid).abs() < (b - mid).abs())
        {
            best = Some((rho, value));
        }
    }
    Ok(best)
}
