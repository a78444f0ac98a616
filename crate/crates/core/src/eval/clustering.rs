//! Clustering agreement: B³, MUC and entity-based CEAF.
//!
//! Both sides are lists of clusters over mention keys. When the two sides
//! disagree on which mentions exist, a mention missing from one side is added
//! there as a singleton before scoring.

use std::collections::{BTreeMap, BTreeSet};

use super::prf::Prf;

type Clusters<T> = Vec<BTreeSet<T>>;

fn normalize<T: Ord + Clone>(gold: &[Vec<T>], pred: &[Vec<T>]) -> (Clusters<T>, Clusters<T>) {
    let mut g: Clusters<T> = gold
        .iter()
        .map(|c| c.iter().cloned().collect::<BTreeSet<T>>())
        .filter(|c| !c.is_empty())
        .collect();
    let mut p: Clusters<T> = pred
        .iter()
        .map(|c| c.iter().cloned().collect::<BTreeSet<T>>())
        .filter(|c| !c.is_empty())
        .collect();
    let gu: BTreeSet<T> = g.iter().flatten().cloned().collect();
    let pu: BTreeSet<T> = p.iter().flatten().cloned().collect();
    for m in pu.difference(&gu) {
        g.push(BTreeSet::from([m.clone()]));
    }
    for m in gu.difference(&pu) {
        p.push(BTreeSet::from([m.clone()]));
    }
    (g, p)
}

fn cluster_index<T: Ord + Clone>(clusters: &[BTreeSet<T>]) -> BTreeMap<T, usize> {
    clusters
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.iter().map(move |m| (m.clone(), i)))
        .collect()
}

/// Mention-averaged precision and recall of cluster overlap.
pub fn b_cubed<T: Ord + Clone>(gold: &[Vec<T>], pred: &[Vec<T>]) -> Prf {
    let (g, p) = normalize(gold, pred);
    let gi = cluster_index(&g);
    let pi = cluster_index(&p);
    let n = gi.len();
    if n == 0 {
        return Prf::perfect();
    }
    let (mut prec, mut rec) = (0.0, 0.0);
    for (m, &gc) in &gi {
        let pc = pi[m];
        let overlap = g[gc].intersection(&p[pc]).count() as f64;
        prec += overlap / p[pc].len() as f64;
        rec += overlap / g[gc].len() as f64;
    }
    Prf::from_scores(prec / n as f64, rec / n as f64)
}

/// Link-based score of `key` clusters against the partition induced by `other`.
fn muc_side<T: Ord + Clone>(key: &[BTreeSet<T>], other: &BTreeMap<T, usize>) -> (f64, f64) {
    let mut num = 0.0;
    let mut den = 0.0;
    for c in key {
        let parts: BTreeSet<usize> = c.iter().map(|m| other[m]).collect();
        num += (c.len() - parts.len()) as f64;
        den += (c.len() - 1) as f64;
    }
    (num, den)
}

/// MUC. A side with no links scores 0 on the corresponding ratio, except
/// that two link-free (all-singleton) clusterings agree perfectly.
pub fn muc<T: Ord + Clone>(gold: &[Vec<T>], pred: &[Vec<T>]) -> Prf {
    let (g, p) = normalize(gold, pred);
    let gi = cluster_index(&g);
    let pi = cluster_index(&p);
    let (rn, rd) = muc_side(&g, &pi);
    let (pn, pd) = muc_side(&p, &gi);
    if rd == 0.0 && pd == 0.0 {
        return Prf::perfect();
    }
    let recall = if rd == 0.0 { 0.0 } else { rn / rd };
    let precision = if pd == 0.0 { 0.0 } else { pn / pd };
    Prf::from_scores(precision, recall)
}

/// Entity similarity `2|g ∩ p| / (|g| + |p|)`.
pub fn phi4<T: Ord>(g: &BTreeSet<T>, p: &BTreeSet<T>) -> f64 {
    2.0 * g.intersection(p).count() as f64 / (g.len() + p.len()) as f64
}

/// CEAF with entity similarity under the best one-to-one cluster alignment.
pub fn ceaf_e<T: Ord + Clone>(gold: &[Vec<T>], pred: &[Vec<T>]) -> Prf {
    let (g, p) = normalize(gold, pred);
    if g.is_empty() && p.is_empty() {
        return Prf::perfect();
    }
    let sim: Vec<Vec<f64>> = g.iter().map(|gc| p.iter().map(|pc| phi4(gc, pc)).collect()).collect();
    let total = max_weight_assignment(&sim);
    let precision = if p.is_empty() { 0.0 } else { total / p.len() as f64 };
    let recall = if g.is_empty() { 0.0 } else { total / g.len() as f64 };
    Prf::from_scores(precision, recall)
}

/// Maximum total weight of a one-to-one matching between rows and columns of
/// a non-negative weight matrix (Hungarian method on the padded square cost
/// matrix).
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> f64 {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    let n = rows.max(cols);
    if n == 0 {
        return 0.0;
    }
    let max_w = weights.iter().flatten().copied().fold(0.0, f64::max);
    // cost[i][j] = max_w - w, padded cells cost max_w (weight 0)
    let cost = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            max_w - weights[i][j]
        } else {
            max_w
        }
    };
    // 1-indexed potentials, as in the classic O(n^3) formulation
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut owner = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n)
        .filter(|&j| owner[j] >= 1 && owner[j] <= rows && j <= cols)
        .map(|j| weights[owner[j] - 1][j - 1])
        .sum()
}
