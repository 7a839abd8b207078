mod common;

use std::collections::BTreeSet;

use common::*;
use proptest::prelude::*;
use vawe::alignnet::{forward, map_embeddings, MlpParams};
use vawe::dataio::{
    parse_embeddings, parse_features, write_embeddings, write_features, ClassEmbeddingTable, LabeledFeatureSet,
};
use vawe::miner::mine_triplets;
use vawe::neighborhood::{consistency, hub_counts, neighbor_lists, HubSet};
use vawe::numerics::{l2_normalize, matmul, norm, pairwise_sq_dist, solve_spd, DenseMatrix, Rng};
use vawe::zsl::{conse_predict, eszsl_fit, ConseModel, ConseParams, EszslParams, ZslScorer};

fn config() -> ProptestConfig {
    ProptestConfig { cases: 48, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn normalize_gives_unit_or_zero(v in prop::collection::vec(-1e3f64..1e3, 1..20)) {
        let y = l2_normalize(&v, 1e-12);
        let n = norm(&y);
        prop_assert!(n == 0.0 || (n - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pairwise_distances_are_symmetric_and_nonnegative(seed in any::<u64>(), n in 2usize..12, d in 1usize..6) {
        let mut rng = Rng::new(seed);
        let m = to_dense(&gaussian_mat(&mut rng, n, d));
        let dist = pairwise_sq_dist(&m, &m).unwrap();
        for i in 0..n {
            prop_assert_eq!(dist[(i, i)], 0.0);
            for j in 0..n {
                prop_assert!(dist[(i, j)] >= 0.0);
                prop_assert_eq!(dist[(i, j)], dist[(j, i)]);
            }
        }
    }

    #[test]
    fn spd_solve_has_small_residual(seed in any::<u64>(), n in 1usize..10, k in 1usize..4) {
        let mut rng = Rng::new(seed);
        let g = to_dense(&gaussian_mat(&mut rng, n + 3, n));
        let mut a = vawe::numerics::matmul_tn(&g, &g).unwrap();
        a.add_diagonal(0.5);
        let b = to_dense(&gaussian_mat(&mut rng, n, k));
        let x = solve_spd(&a, &b).unwrap();
        let r = matmul(&a, &x).unwrap().sub(&b).unwrap();
        prop_assert!(r.max_abs() < 1e-9 * (1.0 + b.max_abs()));
    }

    #[test]
    fn neighbor_lists_are_well_formed(seed in any::<u64>(), n in 3usize..20, frac in 0.0f64..1.0) {
        let mut rng = Rng::new(seed);
        let k = 1 + ((n - 2) as f64 * frac) as usize;
        let pts = to_dense(&gaussian_mat(&mut rng, n, 3));
        let lists = neighbor_lists(&pts, k).unwrap();
        for i in 0..n {
            let l = lists.list(i);
            prop_assert_eq!(l.len(), k);
            prop_assert!(!l.contains(&i));
            prop_assert_eq!(l.iter().collect::<BTreeSet<_>>().len(), k);
        }
        prop_assert_eq!(hub_counts(&lists).iter().sum::<usize>(), n * k);
    }

    #[test]
    fn consistency_is_bounded_and_symmetric(seed in any::<u64>(), n in 3usize..20, frac in 0.0f64..1.0) {
        let mut rng = Rng::new(seed);
        let k = 1 + ((n - 2) as f64 * frac) as usize;
        let a = neighbor_lists(&to_dense(&gaussian_mat(&mut rng, n, 3)), k).unwrap();
        let b = neighbor_lists(&to_dense(&gaussian_mat(&mut rng, n, 5)), k).unwrap();
        let c = consistency(&a, &b).unwrap();
        prop_assert!((0.0..=k as f64).contains(&c));
        prop_assert_eq!(c, consistency(&b, &a).unwrap());
        prop_assert_eq!(consistency(&a, &a).unwrap(), k as f64);
    }

    #[test]
    fn mined_triplets_respect_their_definitions(seed in any::<u64>(), n in 6usize..18) {
        let mut rng = Rng::new(seed);
        let k1 = 1 + rng.below(3);
        let k2 = (k1 + 1 + rng.below(4)).min(n - 1);
        let vis = to_dense(&gaussian_mat(&mut rng, n, 3));
        let sem = to_dense(&gaussian_mat(&mut rng, n, 4));
        let hubs = HubSet::from_members((0..rng.below(3)).map(|_| rng.below(n)));
        let (v1, v2) = (neighbor_lists(&vis, k1).unwrap(), neighbor_lists(&vis, k2).unwrap());
        let (s1, s2) = (neighbor_lists(&sem, k1).unwrap(), neighbor_lists(&sem, k2).unwrap());
        let b1 = mine_triplets(&v1, &v2, &s1, &s2, &hubs, &mut Rng::new(1)).unwrap();
        let b2 = mine_triplets(&v1, &v2, &s1, &s2, &hubs, &mut Rng::new(2)).unwrap();
        for t in &b1.triplets {
            prop_assert!(v1.contains(t.a, t.p) && !hubs.contains(t.p) && !s2.contains(t.a, t.p));
            prop_assert!(s1.contains(t.a, t.n) && (!v2.contains(t.a, t.n) || hubs.contains(t.n)));
        }
        let set = |b: &vawe::miner::TripletBatch| b.triplets.iter().copied().collect::<BTreeSet<_>>();
        prop_assert_eq!(set(&b1), set(&b2));
    }

    #[test]
    fn forward_output_is_unit_norm(seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let p = MlpParams::init([4, 5, 6, 3], &mut rng);
        let x: Vec<f64> = (0..4).map(|_| rng.gaussian()).collect();
        let (y, cache) = forward(&p, &x, 1e-12).unwrap();
        if norm(cache.raw_output()) < 1e-12 {
            prop_assert!(y.iter().all(|v| *v == 0.0));
        } else {
            prop_assert!((norm(&y) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mapping_commutes_with_row_permutation(seed in any::<u64>(), n in 2usize..10) {
        let mut rng = Rng::new(seed);
        let p = MlpParams::init([3, 4, 4, 5], &mut rng);
        let rows = gaussian_mat(&mut rng, n, 3);
        let mut perm: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut perm);
        let names = class_names(n);
        let t = ClassEmbeddingTable::new(names.clone(), to_dense(&rows)).unwrap();
        let pt = ClassEmbeddingTable::new(
            perm.iter().map(|&i| names[i].clone()).collect(),
            to_dense(&perm.iter().map(|&i| rows[i].clone()).collect()),
        ).unwrap();
        let (a, b) = (map_embeddings(&p, &t, 1e-12).unwrap(), map_embeddings(&p, &pt, 1e-12).unwrap());
        for (k, &i) in perm.iter().enumerate() {
            prop_assert_eq!(b.row(k), a.row(i));
        }
    }

    #[test]
    fn eszsl_prediction_ignores_positive_feature_scale(seed in any::<u64>(), scale in 0.01f64..100.0) {
        let mut rng = Rng::new(seed);
        let (feats, emb) = random_zsl_instance(&mut rng, 30, 5, 4, 3);
        let model = eszsl_fit(&feats, &emb, &EszslParams::default()).unwrap();
        let unseen = ClassEmbeddingTable::new(class_names(5), to_dense(&gaussian_mat(&mut rng, 5, 3))).unwrap();
        let x: Vec<f64> = (0..5).map(|_| rng.gaussian()).collect();
        let xs: Vec<f64> = x.iter().map(|v| v * scale).collect();
        let s = model.score(&x, unseen.row(1));
        prop_assert!((model.score(&xs, unseen.row(1)) - scale * s).abs() < 1e-9 * (1.0 + (scale * s).abs()));
        prop_assert_eq!(model.predict(&xs, &unseen), model.predict(&x, &unseen));
    }

    #[test]
    fn conse_prediction_ignores_common_embedding_scale(seed in any::<u64>(), scale in 0.01f64..100.0) {
        let mut rng = Rng::new(seed);
        let (feats, emb) = random_zsl_instance(&mut rng, 24, 4, 6, 5);
        let sig = vawe::neighborhood::visual_signatures(&feats, emb.class_names()).unwrap();
        let model = ConseModel::new(sig, emb, &ConseParams::default()).unwrap();
        let rows = gaussian_mat(&mut rng, 4, 5);
        let scaled: Mat = rows.iter().map(|r| r.iter().map(|v| v * scale).collect()).collect();
        let u = ClassEmbeddingTable::new(class_names(4), to_dense(&rows)).unwrap();
        let us = ClassEmbeddingTable::new(class_names(4), to_dense(&scaled)).unwrap();
        let x: Vec<f64> = (0..4).map(|_| rng.gaussian()).collect();
        prop_assert_eq!(conse_predict(&x, &model, &u).unwrap(), conse_predict(&x, &model, &us).unwrap());
    }

    #[test]
    fn text_formats_round_trip(seed in any::<u64>(), n in 1usize..8, d in 1usize..6) {
        let mut rng = Rng::new(seed);
        let vals: Mat = (0..n).map(|_| (0..d).map(|_| rng.gaussian() * 10f64.powi(rng.below(9) as i32 - 4)).collect()).collect();
        let t = ClassEmbeddingTable::new(class_names(n), to_dense(&vals)).unwrap();
        let text = write_embeddings(&t);
        let back = parse_embeddings(&text).unwrap();
        prop_assert_eq!(&back, &t);
        prop_assert_eq!(write_embeddings(&back), text);

        let labels: Vec<String> = (0..n).map(|i| format!("k{}", i % 2)).collect();
        let f = LabeledFeatureSet::new(labels, DenseMatrix::from_rows(&vals).unwrap()).unwrap();
        let ft = write_features(&f);
        prop_assert_eq!(parse_features(&ft).unwrap(), f);
    }

    #[test]
    fn rng_below_and_shuffle(seed in any::<u64>(), n in 1usize..50) {
        let mut rng = Rng::new(seed);
        prop_assert!(rng.below(n) < n);
        let mut v: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut v);
        v.sort_unstable();
        prop_assert_eq!(v, (0..n).collect::<Vec<_>>());
    }
}
