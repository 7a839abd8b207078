//! Per-epoch triplet selection from visual/semantic neighborhood disagreement.
//!
//! For an anchor `a`, a positive is a close visual neighbor (top `k1`) that
//! the semantic space puts far away (outside its top `k2`), and a negative is
//! a close semantic neighbor that is far in the visual space. Hub classes are
//! first removed from the visual lists, at both `k1` and `k2`, and the
//! filtered lists are not refilled from further down the ranking.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VaweError};
use crate::neighborhood::{HubSet, NeighborLists};
use crate::numerics::Rng;

/// Anchor, positive and negative class indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triplet {
    pub a: usize,
    pub p: usize,
    pub n: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TripletBatch {
    pub epoch: usize,
    /// In shuffled order.
    pub triplets: Vec<Triplet>,
}

impl TripletBatch {
    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    /// Text dump, one `a p n` line per triplet.
    pub fn to_text(&self) -> String {
        self.triplets
            .iter()
            .map(|t| format!("{} {} {}\n", t.a, t.p, t.n))
            .collect()
    }
}

/// Selects every disagreement triplet and shuffles the batch with `rng`.
///
/// `nv_*` are visual lists, `ns_*` semantic lists, all over the same classes;
/// `k2` must exceed `k1`.
pub fn mine_triplets(
    nv_k1: &NeighborLists,
    nv_k2: &NeighborLists,
    ns_k1: &NeighborLists,
    ns_k2: &NeighborLists,
    hubs: &HubSet,
    rng: &mut Rng,
) -> Result<TripletBatch> {
    let n = nv_k1.num_classes();
    if [nv_k2, ns_k1, ns_k2].iter().any(|l| l.num_classes() != n) {
        return Err(VaweError::Shape(
            "visual and semantic neighbor lists cover different class counts".into(),
        ));
    }
    let (k1, k2) = (nv_k1.k(), nv_k2.k());
    if ns_k1.k() != k1 || ns_k2.k() != k2 {
        return Err(VaweError::Shape(format!(
            "visual lists use k1={k1}/k2={k2} but semantic lists use {}/{}",
            ns_k1.k(),
            ns_k2.k()
        )));
    }
    if k2 <= k1 {
        return Err(VaweError::Config(format!("k2 ({k2}) must exceed k1 ({k1})")));
    }

    let mut triplets = Vec::new();
    for a in 0..n {
        let visual_near: Vec<usize> = nv_k1.list(a).iter().copied().filter(|v| !hubs.contains(*v)).collect();
        let visual_wide: Vec<usize> = nv_k2.list(a).iter().copied().filter(|v| !hubs.contains(*v)).collect();
        let positives: Vec<usize> = visual_near
            .iter()
            .copied()
            .filter(|v| !ns_k2.contains(a, *v))
            .collect();
        if positives.is_empty() {
            continue;
        }
        for &neg in ns_k1.list(a) {
            if visual_wide.contains(&neg) {
                continue;
            }
            triplets.extend(positives.iter().map(|&p| Triplet { a, p, n: neg }));
        }
    }
    rng.shuffle(&mut triplets);
    Ok(TripletBatch {
        epoch: hubs.epoch,
        triplets,
    })
}
