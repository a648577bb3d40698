use alloc::collections::{BTreeSet, VecDeque};
use alloc::vec::Vec;
use core::cmp::Ordering;
use nalgebra::DVector;

use super::{GalleryMap, KeyframeId};
use crate::world::Descriptor;

/// The `top_k` keyframes by cosine similarity, best first; equal scores rank
/// the lower id first.
pub fn retrieve(gallery: &GalleryMap, query: &DVector<f64>, top_k: usize) -> Vec<KeyframeId> {
    let mut scored: Vec<(f64, KeyframeId)> =
        gallery.keyframes.iter().map(|k| (k.global_descriptor.dot(query), k.id)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.into_iter().take(top_k).map(|(_, id)| id).collect()
}

/// Connected components of the covisibility graph restricted to `ids`.
///
/// Members are sorted ascending; clusters by size descending, then smallest id.
pub fn covis_cluster(gallery: &GalleryMap, ids: &[KeyframeId]) -> Vec<Vec<KeyframeId>> {
    let wanted: BTreeSet<KeyframeId> = ids.iter().copied().collect();
    let mut seen: BTreeSet<KeyframeId> = BTreeSet::new();
    let mut clusters = Vec::new();
    for &start in &wanted {
        if !seen.insert(start) {
            continue;
        }
        let mut members = alloc::vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(k) = queue.pop_front() {
            for n in gallery.neighbors(k) {
                if wanted.contains(&n) && seen.insert(n) {
                    members.push(n);
                    queue.push_back(n);
                }
            }
        }
        members.sort();
        clusters.push(members);
    }
    clusters.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    clusters
}

fn sq_dist(a: &Descriptor, b: &Descriptor) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn lt(a: f64, b: f64) -> bool {
    a.total_cmp(&b) == Ordering::Less
}

/// Lowe's ratio test followed by mutual-best filtering.
///
/// A query descriptor matches its nearest gallery descriptor when
/// `d1 / d2 < ratio`; the match survives only if that gallery descriptor's
/// nearest query descriptor is the same one. With fewer than two gallery
/// descriptors nothing matches.
pub fn match_nn_ratio(query: &[Descriptor], gallery: &[Descriptor], ratio: f64) -> Vec<(usize, usize)> {
    if gallery.len() < 2 || query.is_empty() {
        return Vec::new();
    }
    let dist: Vec<Vec<f64>> = query.iter().map(|q| gallery.iter().map(|g| sq_dist(q, g)).collect()).collect();

    let mut back = alloc::vec![usize::MAX; gallery.len()];
    for (j, slot) in back.iter_mut().enumerate() {
        let mut best = f64::INFINITY;
        for (i, row) in dist.iter().enumerate() {
            if lt(row[j], best) {
                best = row[j];
                *slot = i;
            }
        }
    }

    let r2 = ratio * ratio;
    let mut out = Vec::new();
    for (i, row) in dist.iter().enumerate() {
        let (mut j1, mut d1, mut d2) = (usize::MAX, f64::INFINITY, f64::INFINITY);
        for (j, &d) in row.iter().enumerate() {
            if lt(d, d1) {
                d2 = d1;
                d1 = d;
                j1 = j;
            } else if lt(d, d2) {
                d2 = d;
            }
        }
        // Squared distances: d1/d2 < r  ⇔  d1² < r²·d2².
        if d2 > 0.0 && d1 < r2 * d2 && back[j1] == i {
            out.push((i, j1));
        }
    }
    out
}
