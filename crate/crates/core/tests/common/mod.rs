//! Independent reference implementations shared by the integration tests.
//! Everything here works on plain nested vectors with naive loops so that
//! it shares no code path with the library beyond the types it is fed.

#![allow(dead_code)]

use std::collections::BTreeSet;

use vawe::alignnet::{backward, forward, objective, MlpParams};
use vawe::dataio::{ClassEmbeddingTable, LabeledFeatureSet};
use vawe::numerics::{DenseMatrix, Rng};

pub type Mat = Vec<Vec<f64>>;

pub fn gaussian_mat(rng: &mut Rng, rows: usize, cols: usize) -> Mat {
    (0..rows).map(|_| (0..cols).map(|_| rng.gaussian()).collect()).collect()
}

pub fn to_dense(m: &Mat) -> DenseMatrix {
    DenseMatrix::from_rows(m).unwrap()
}

pub fn from_dense(m: &DenseMatrix) -> Mat {
    m.row_iter().map(|r| r.to_vec()).collect()
}

pub fn mm(a: &Mat, b: &Mat) -> Mat {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|r| {
            (0..cols)
                .map(|j| (0..inner).map(|k| r[k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

pub fn tr(a: &Mat) -> Mat {
    let cols = a.first().map_or(0, Vec::len);
    (0..cols).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

pub fn frob(a: &Mat) -> f64 {
    a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn class_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("k{i:02}")).collect()
}

/// Neighbor ranking from scratch: ascending squared distance, then index.
pub fn ranking(points: &Mat, i: usize) -> Vec<usize> {
    let mut others: Vec<(f64, usize)> = (0..points.len())
        .filter(|&j| j != i)
        .map(|j| {
            let d = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
            (d, j)
        })
        .collect();
    others.sort_by(|x, y| x.partial_cmp(y).unwrap());
    others.into_iter().map(|(_, j)| j).collect()
}

pub fn top(points: &Mat, i: usize, k: usize) -> BTreeSet<usize> {
    ranking(points, i).into_iter().take(k).collect()
}

/// Triplet selection written directly as set algebra over raw points.
pub fn brute_force_triplets(
    visual: &Mat,
    semantic: &Mat,
    k1: usize,
    k2: usize,
    hubs: &BTreeSet<usize>,
) -> BTreeSet<(usize, usize, usize)> {
    let mut out = BTreeSet::new();
    for a in 0..visual.len() {
        let nv1: BTreeSet<usize> = top(visual, a, k1).difference(hubs).copied().collect();
        let nv2: BTreeSet<usize> = top(visual, a, k2).difference(hubs).copied().collect();
        let ns1 = top(semantic, a, k1);
        let ns2 = top(semantic, a, k2);
        for &n in ns1.difference(&nv2) {
            for &p in nv1.difference(&ns2) {
                out.insert((a, p, n));
            }
        }
    }
    out
}

/// Mean top-k overlap, recomputed from raw points.
pub fn brute_consistency(visual: &Mat, semantic: &Mat, k: usize) -> f64 {
    let c = visual.len();
    (0..c)
        .map(|i| top(visual, i, k).intersection(&top(semantic, i, k)).count() as f64)
        .sum::<f64>()
        / c as f64
}

/// Feature rows `m × d_v`, labels cycling over `z` classes.
pub fn random_zsl_instance(
    rng: &mut Rng,
    m: usize,
    dv: usize,
    z: usize,
    de: usize,
) -> (LabeledFeatureSet, ClassEmbeddingTable) {
    let names = class_names(z);
    let labels = (0..m).map(|i| names[i % z].clone()).collect();
    let feats = LabeledFeatureSet::new(labels, to_dense(&gaussian_mat(rng, m, dv))).unwrap();
    let emb = ClassEmbeddingTable::new(names, to_dense(&gaussian_mat(rng, z, de))).unwrap();
    (feats, emb)
}

/// Half the gradient of
/// `‖XᵀVS − Y‖² + γ‖VS‖² + λ‖XᵀV‖² + γλ‖V‖²` at `v`, which is
/// `(XXᵀ + γI)·V·(SSᵀ + λI) − X·Y·Sᵀ`. `x` holds feature columns (d_v × m),
/// `s` embedding columns (d_e × z) and `y` the m × z target matrix.
pub fn eszsl_half_gradient(x: &Mat, s: &Mat, y: &Mat, v: &Mat, gamma: f64, lam: f64) -> Mat {
    let mut xx = mm(x, &tr(x));
    for (i, r) in xx.iter_mut().enumerate() {
        r[i] += gamma;
    }
    let mut ss = mm(s, &tr(s));
    for (i, r) in ss.iter_mut().enumerate() {
        r[i] += lam;
    }
    let lhs = mm(&mm(&xx, v), &ss);
    let rhs = mm(&mm(x, y), &tr(s));
    lhs.iter()
        .zip(&rhs)
        .map(|(a, b)| a.iter().zip(b).map(|(p, q)| p - q).collect())
        .collect()
}

pub struct GradCheck {
    pub max_rel_err: f64,
    pub draws: usize,
}

/// Central-difference check of [`backward`] against [`objective`] over
/// `draws` random small networks with an active hinge, no hidden unit within
/// `1e-4` of its kink, and `lambda` drawn from `[0, 0.1)`.
pub fn gradient_check(seed: u64, draws: usize, h: f64) -> GradCheck {
    let mut rng = Rng::new(seed);
    let eps = 1e-12;
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < draws {
        let d = 3 + rng.below(4);
        let shape = [d, 4 + rng.below(5), 3 + rng.below(5), 2 + rng.below(4)];
        let mut params = MlpParams::init(shape, &mut rng);
        // Non-zero biases so their gradients are exercised too.
        for b in [&mut params.b1, &mut params.b2, &mut params.b3] {
            b.iter_mut().for_each(|v| *v = 0.3 * rng.gaussian());
        }
        let xs: Vec<Vec<f64>> = (0..3).map(|_| (0..d).map(|_| rng.gaussian()).collect()).collect();
        let inputs = [xs[0].as_slice(), xs[1].as_slice(), xs[2].as_slice()];
        let alpha = 0.5 + 1.5 * rng.uniform();
        let lambda = 0.1 * rng.uniform();

        let near_kink = inputs.iter().any(|x| {
            forward(&params, x, eps)
                .unwrap()
                .1
                .pre_activations()
                .any(|p| p.abs() < 1e-4)
        });
        let outs: Vec<Vec<f64>> = inputs.iter().map(|x| forward(&params, x, eps).unwrap().0).collect();
        let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
        let hinge_arg = sq(&outs[0], &outs[1]) - sq(&outs[0], &outs[2]) + alpha;
        if near_kink || hinge_arg < 1e-3 {
            continue;
        }

        let analytic = backward(&params, inputs, alpha, lambda, eps).unwrap().grad.to_flat();
        let base = params.to_flat();
        let mut numeric = vec![0.0; base.len()];
        for i in 0..base.len() {
            let eval = |delta: f64| {
                let mut f = base.clone();
                f[i] += delta;
                let p = MlpParams::from_flat(shape, &f).unwrap();
                objective(&p, inputs, alpha, lambda, eps).unwrap()
            };
            numeric[i] = (eval(h) - eval(-h)) / (2.0 * h);
        }
        let scale = analytic.iter().chain(&numeric).fold(0.0f64, |m, v| m.max(v.abs()));
        let err = analytic
            .iter()
            .zip(&numeric)
            .fold(0.0f64, |m, (a, n)| m.max((a - n).abs()));
        worst = worst.max(err / scale.max(1e-12));
        done += 1;
    }
    GradCheck {
        max_rel_err: worst,
        draws: done,
    }
}
