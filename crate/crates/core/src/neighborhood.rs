//! Class-level neighborhood structure.
//!
//! A class's neighborhood is the ordered list of its `k` nearest *other*
//! classes; ties are broken by ascending class index so that identical
//! spaces always produce identical lists. The consistency score is the mean
//! overlap between two such structures and ranges over `[0, k]`.

use std::collections::{BTreeSet, HashMap};

use crate::dataio::{ClassEmbeddingTable, LabeledFeatureSet};
use crate::error::{Result, VaweError};
use crate::numerics::{pairwise_sq_dist, DenseMatrix};

/// Mean visual feature per class, rows in canonical class order.
#[derive(Clone, Debug, PartialEq)]
pub struct VisualSignatureTable {
    class_names: Vec<String>,
    signatures: DenseMatrix,
}

impl VisualSignatureTable {
    pub fn new(class_names: Vec<String>, signatures: DenseMatrix) -> Result<Self> {
        if class_names.len() != signatures.rows() {
            return Err(VaweError::Shape(format!(
                "{} class names for {} signatures",
                class_names.len(),
                signatures.rows()
            )));
        }
        Ok(VisualSignatureTable {
            class_names,
            signatures,
        })
    }

    pub fn len(&self) -> usize {
        self.class_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class_names.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.signatures.cols()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn signatures(&self) -> &DenseMatrix {
        &self.signatures
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.signatures.row(i)
    }

    pub fn subset<S: AsRef<str>>(&self, names: &[S]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| {
                self.class_names
                    .iter()
                    .position(|c| c == n.as_ref())
                    .ok_or_else(|| {
                        VaweError::Protocol(format!("class `{}` has no visual signature", n.as_ref()))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        VisualSignatureTable::new(
            idx.iter().map(|&i| self.class_names[i].clone()).collect(),
            self.signatures.select_rows(&idx),
        )
    }

    /// View as a class table, e.g. to feed signatures where embeddings are expected.
    pub fn to_table(&self) -> Result<ClassEmbeddingTable> {
        ClassEmbeddingTable::new(self.class_names.clone(), self.signatures.clone())
    }
}

/// Per class, exactly `k` other class indices in ascending distance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborLists {
    k: usize,
    lists: Vec<Vec<usize>>,
}

impl NeighborLists {
    pub fn new(k: usize, lists: Vec<Vec<usize>>) -> Result<Self> {
        let n = lists.len();
        if k == 0 || k + 1 > n {
            return Err(VaweError::Config(format!(
                "k = {k} out of range for {n} classes (need 1 <= k <= {})",
                n.saturating_sub(1)
            )));
        }
        for (i, l) in lists.iter().enumerate() {
            if l.len() != k {
                return Err(VaweError::Shape(format!(
                    "list {i} has {} entries, expected {k}",
                    l.len()
                )));
            }
            let uniq: BTreeSet<_> = l.iter().collect();
            if uniq.len() != k || l.contains(&i) || l.iter().any(|&j| j >= n) {
                return Err(VaweError::Protocol(format!(
                    "list {i} must hold {k} distinct other class indices, got {l:?}"
                )));
            }
        }
        Ok(NeighborLists { k, lists })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_classes(&self) -> usize {
        self.lists.len()
    }

    pub fn list(&self, i: usize) -> &[usize] {
        &self.lists[i]
    }

    pub fn lists(&self) -> &[Vec<usize>] {
        &self.lists
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.lists[i].contains(&j)
    }
}

/// Class indices flagged as hubs for one epoch.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HubSet {
    pub members: BTreeSet<usize>,
    pub epoch: usize,
}

impl HubSet {
    pub fn empty() -> Self {
        HubSet::default()
    }

    pub fn from_members(members: impl IntoIterator<Item = usize>) -> Self {
        HubSet {
            members: members.into_iter().collect(),
            epoch: 0,
        }
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.contains(&i)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Per-class arithmetic mean of the feature rows, rows ordered as `class_order`.
pub fn visual_signatures<S: AsRef<str>>(
    features: &LabeledFeatureSet,
    class_order: &[S],
) -> Result<VisualSignatureTable> {
    let index: HashMap<&str, usize> = class_order
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_ref(), i))
        .collect();
    let dim = features.dim();
    let mut sums = DenseMatrix::zeros(class_order.len(), dim);
    let mut counts = vec![0usize; class_order.len()];
    for (r, label) in features.class_labels().iter().enumerate() {
        if let Some(&c) = index.get(label.as_str()) {
            counts[c] += 1;
            for (s, v) in sums.row_mut(c).iter_mut().zip(features.row(r)) {
                *s += v;
            }
        }
    }
    for (c, &n) in counts.iter().enumerate() {
        if n == 0 {
            return Err(VaweError::MissingClass(class_order[c].as_ref().to_string()));
        }
        let inv = n as f64;
        sums.row_mut(c).iter_mut().for_each(|s| *s /= inv);
    }
    VisualSignatureTable::new(
        class_order.iter().map(|c| c.as_ref().to_string()).collect(),
        sums,
    )
}

/// Symmetric matrix of Euclidean distances between rows, zero diagonal.
pub fn class_distance_matrix(rows: &DenseMatrix) -> Result<DenseMatrix> {
    if rows.rows() < 2 {
        return Err(VaweError::Shape(format!(
            "need at least 2 classes for a distance matrix, got {}",
            rows.rows()
        )));
    }
    let mut d = pairwise_sq_dist(rows, rows)?;
    d.as_mut_slice().iter_mut().for_each(|v| *v = v.sqrt());
    Ok(d)
}

/// The `k` nearest other classes of every class, ties by ascending index.
pub fn top_k_neighbors(dist: &DenseMatrix, k: usize) -> Result<NeighborLists> {
    let n = dist.rows();
    if dist.cols() != n {
        return Err(VaweError::Shape(format!(
            "distance matrix must be square, got {}x{}",
            n,
            dist.cols()
        )));
    }
    if k == 0 || k + 1 > n {
        return Err(VaweError::Config(format!(
            "k = {k} out of range for {n} classes (need 1 <= k <= {})",
            n.saturating_sub(1)
        )));
    }
    let lists = (0..n)
        .map(|i| {
            let row = dist.row(i);
            let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
            others.truncate(k);
            others
        })
        .collect();
    Ok(NeighborLists { k, lists })
}

/// Neighbor lists computed straight from row vectors (squared Euclidean ordering).
pub fn neighbor_lists(rows: &DenseMatrix, k: usize) -> Result<NeighborLists> {
    top_k_neighbors(&pairwise_sq_dist(rows, rows)?, k)
}

/// Mean number of shared neighbors per class.
pub fn consistency(nv: &NeighborLists, ns: &NeighborLists) -> Result<f64> {
    if nv.num_classes() != ns.num_classes() || nv.k != ns.k {
        return Err(VaweError::Shape(format!(
            "neighbor structures differ: {} classes/k={} vs {} classes/k={}",
            nv.num_classes(),
            nv.k,
            ns.num_classes(),
            ns.k
        )));
    }
    let shared: usize = nv
        .lists
        .iter()
        .zip(&ns.lists)
        .map(|(a, b)| a.iter().filter(|j| b.contains(j)).count())
        .sum();
    Ok(shared as f64 / nv.num_classes() as f64)
}

/// Number of lists each class appears in.
pub fn hub_counts(lists: &NeighborLists) -> Vec<usize> {
    let mut counts = vec![0; lists.num_classes()];
    for l in &lists.lists {
        for &j in l {
            counts[j] += 1;
        }
    }
    counts
}

/// Classes appearing in more than `k1` of the `k1`-neighbor lists of the mapped rows.
pub fn detect_hubs(mapped: &ClassEmbeddingTable, k1: usize) -> Result<HubSet> {
    let lists = neighbor_lists(mapped.vectors(), k1)?;
    Ok(HubSet::from_members(
        hub_counts(&lists)
            .into_iter()
            .enumerate()
            .filter(|&(_, c)| c > k1)
            .map(|(j, _)| j),
    ))
}
