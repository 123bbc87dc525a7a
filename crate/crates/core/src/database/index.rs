//! Completion-candidate indexing.
//!
//! For every object the same-class objects are first narrowed to the `2K`
//! with the most similar box (canonical IoU), then re-ranked by how dense they
//! are where the source is sparse, keeping `K`.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::partition::mean_nonempty;
use crate::geometry::{canonical_iou, ObjectClass};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CandidateIndex {
    pub lists: Vec<Vec<u32>>,
}

impl CandidateIndex {
    pub fn candidates(&self, id: u32) -> &[u32] {
        self.lists.get(id as usize).map_or(&[], Vec::as_slice)
    }
}

/// Cells whose density is below the mean of the non-empty cells. An object
/// with no points at all is deficient everywhere.
pub fn deficient_partitions(densities: &[f64]) -> Vec<usize> {
    match mean_nonempty(densities) {
        Some(mean) => (0..densities.len()).filter(|&p| densities[p] < mean).collect(),
        None => (0..densities.len()).collect(),
    }
}

#[derive(Clone, Copy)]
struct Scored {
    id: u32,
    similarity: f64,
    score: f64,
}

fn by_similarity(a: &Scored, b: &Scored) -> Ordering {
    b.similarity.partial_cmp(&a.similarity).unwrap_or(Ordering::Equal).then(a.id.cmp(&b.id))
}

fn by_score(a: &Scored, b: &Scored) -> Ordering {
    b.score.partial_cmp(&a.score).unwrap_or(Ordering::Equal).then_with(|| by_similarity(a, b))
}

/// Ranks candidates for one source object among `members` (ids of its class).
pub(crate) fn rank_candidates(
    source: u32,
    members: &[u32],
    extents: &[[f64; 3]],
    densities: &[Vec<f64>],
    k: usize,
) -> Vec<u32> {
    let src_ext = extents[source as usize];
    let mut pool: Vec<Scored> = members
        .iter()
        .filter(|&&j| j != source)
        .map(|&j| Scored { id: j, similarity: canonical_iou(src_ext, extents[j as usize]), score: 0.0 })
        .collect();
    let keep = (2 * k).min(pool.len());
    if keep < pool.len() && keep > 0 {
        pool.select_nth_unstable_by(keep - 1, by_similarity);
    }
    pool.truncate(keep);

    let deficient = deficient_partitions(&densities[source as usize]);
    for cand in &mut pool {
        let d = &densities[cand.id as usize];
        cand.score = deficient.iter().fold(0.0, |acc, &p| acc + d[p]);
    }
    pool.sort_unstable_by(by_score);
    pool.truncate(k);
    pool.into_iter().map(|c| c.id).collect()
}

/// Builds the candidate lists for every object. `classes`, `extents` and
/// `densities` are indexed by object id.
pub fn index_candidates(
    classes: &[ObjectClass],
    extents: &[[f64; 3]],
    densities: &[Vec<f64>],
    k: usize,
) -> CandidateIndex {
    let mut members: [Vec<u32>; 3] = Default::default();
    for (id, class) in classes.iter().enumerate() {
        members[class.index()].push(id as u32);
    }
    for class in ObjectClass::ALL {
        if members[class.index()].len() == 1 {
            log::warn!("class {class} has a single object; it gets no completion candidates");
        }
    }
    let lists = (0..classes.len() as u32)
        .into_par_iter()
        .map(|id| rank_candidates(id, &members[classes[id as usize].index()], extents, densities, k))
        .collect();
    CandidateIndex { lists }
}
