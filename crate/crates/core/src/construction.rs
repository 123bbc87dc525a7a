//! Whole-body object construction.
//!
//! A database object is mirrored (cars and cyclists), then repeatedly
//! complemented cell by cell with points of randomly drawn candidates until
//! enough of its cells are at least as dense as its average non-empty cell.

use rand::Rng;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::database::{mean_nonempty, partition_counts, partition_densities, GtDatabase};
use crate::geometry::{mirror_x, LabeledObject, Point};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConstructionError {
    #[error("object {0} is not whole-body and has no completion candidates")]
    NoCandidates(u32),
    #[error("empty candidate list")]
    EmptyCandidateList,
    #[error("no object {0} in the database")]
    UnknownObject(u32),
    #[error("invalid construction config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstructionConfig {
    pub whole_body_threshold: f64,
    pub max_iterations: u32,
    pub dedup_epsilon: f64,
}

impl Default for ConstructionConfig {
    fn default() -> Self {
        Self { whole_body_threshold: 0.85, max_iterations: 20, dedup_epsilon: 0.01 }
    }
}

impl ConstructionConfig {
    pub fn validate(&self) -> Result<(), ConstructionError> {
        if !(self.whole_body_threshold > 0.0 && self.whole_body_threshold <= 1.0) {
            return Err(ConstructionError::InvalidConfig(format!(
                "whole_body_threshold must be in (0, 1], got {}",
                self.whole_body_threshold
            )));
        }
        if self.max_iterations == 0 {
            return Err(ConstructionError::InvalidConfig("max_iterations must be at least 1".into()));
        }
        if !(self.dedup_epsilon >= 0.0 && self.dedup_epsilon.is_finite()) {
            return Err(ConstructionError::InvalidConfig(format!(
                "dedup_epsilon must be finite and >= 0, got {}",
                self.dedup_epsilon
            )));
        }
        Ok(())
    }
}

/// Share of all cells whose density is at least the mean of the non-empty
/// cells; 0 for an empty object.
pub fn high_density_fraction(densities: &[f64]) -> f64 {
    match mean_nonempty(densities) {
        Some(mean) => densities.iter().filter(|&&d| d >= mean).count() as f64 / densities.len() as f64,
        None => 0.0,
    }
}

pub fn is_whole_body(densities: &[f64], threshold: f64) -> bool {
    high_density_fraction(densities) >= threshold
}

/// One complementing pass: every cell of `obj` receives the points of the same
/// cell of one uniformly drawn candidate, scaled from the candidate's box into
/// `obj`'s box. Returns the number of points added.
pub fn complement_step<R: Rng + ?Sized>(
    obj: &mut LabeledObject,
    db: &GtDatabase,
    candidates: &[u32],
    rng: &mut R,
) -> Result<usize, ConstructionError> {
    if candidates.is_empty() {
        return Err(ConstructionError::EmptyCandidateList);
    }
    let grid = db.config.grids.get(obj.class);
    let ext = obj.bbox.extents();
    let half = ext.map(|e| e / 2.0);
    let before = obj.points.len();
    for cell in 0..grid.len() {
        let cand = candidates[rng.gen_range(0..candidates.len())];
        let cext = db.object(cand).object.bbox.extents();
        let scale = [ext[0] / cext[0], ext[1] / cext[1], ext[2] / cext[2]];
        obj.points.extend(db.cell_points(cand, cell).iter().map(|p| Point {
            x: (p.x * scale[0]).clamp(-half[0], half[0]),
            y: (p.y * scale[1]).clamp(-half[1], half[1]),
            z: (p.z * scale[2]).clamp(-half[2], half[2]),
            r: p.r,
        }));
    }
    Ok(obj.points.len() - before)
}

/// Voxel occupancy for removing near-duplicate points.
struct VoxelSet {
    seen: FxHashSet<[i64; 3]>,
    epsilon: f64,
}

impl VoxelSet {
    fn new(epsilon: f64, capacity: usize) -> Self {
        Self { seen: FxHashSet::with_capacity_and_hasher(capacity, Default::default()), epsilon }
    }

    /// Marks the voxel of `p` occupied; false if it already was.
    fn insert(&mut self, p: &Point) -> bool {
        self.epsilon <= 0.0 || self.seen.insert([p.x, p.y, p.z].map(|c| (c / self.epsilon).floor() as i64))
    }

    /// Filters `points[from..]`, except that indices below `keep` always survive.
    fn filter(&mut self, points: &mut Vec<Point>, from: usize, keep: usize) {
        let mut i = from;
        let mut j = from;
        while i < points.len() {
            if self.insert(&points[i]) || i < keep {
                points[j] = points[i];
                j += 1;
            }
            i += 1;
        }
        points.truncate(j);
    }
}

/// Drops every point after `keep` whose `epsilon` voxel is already occupied.
/// The first `keep` points always survive.
pub fn dedup_points(points: &mut Vec<Point>, keep: usize, epsilon: f64) {
    if epsilon <= 0.0 {
        return;
    }
    VoxelSet::new(epsilon, points.len()).filter(points, 0, keep);
}

#[derive(Debug, Clone, PartialEq)]
pub struct Construction {
    pub object: LabeledObject,
    /// Complementing passes run.
    pub iterations: u32,
    /// Whether the loop stopped on the whole-body rule rather than the cap.
    pub whole_body: bool,
    /// High-density share of the returned (deduplicated) object.
    pub high_density_fraction: f64,
}

/// Builds a whole-body version of database object `source_id`, in canonical pose.
pub fn construct_whole_body<R: Rng + ?Sized>(
    source_id: u32,
    db: &GtDatabase,
    config: &ConstructionConfig,
    rng: &mut R,
) -> Result<Construction, ConstructionError> {
    if source_id as usize >= db.len() {
        return Err(ConstructionError::UnknownObject(source_id));
    }
    let src = &db.object(source_id).object;
    let class = src.class;
    let grid = db.config.grids.get(class);
    let maxima = &db.densities.class_maxima[class.index()];
    let ext = src.bbox.extents();
    let kept = src.points.len();

    let mut obj = src.clone();
    if class.is_mirror_symmetric() {
        obj.points = mirror_x(&obj.points);
    }
    let mut voxels = VoxelSet::new(config.dedup_epsilon, 4 * obj.points.len());
    voxels.filter(&mut obj.points, 0, kept);
    let mut counts = partition_counts(&obj, grid);
    let mut whole = is_whole_body(&partition_densities(&counts, maxima), config.whole_body_threshold);
    let candidates = db.candidates(source_id);
    if !whole && candidates.is_empty() {
        return Err(ConstructionError::NoCandidates(source_id));
    }

    let mut iterations = 0;
    while !whole && iterations < config.max_iterations {
        let start = obj.points.len();
        complement_step(&mut obj, db, candidates, rng)?;
        voxels.filter(&mut obj.points, start, kept);
        for p in &obj.points[start..] {
            counts[grid.index_of(p, ext)] += 1;
        }
        iterations += 1;
        whole = is_whole_body(&partition_densities(&counts, maxima), config.whole_body_threshold);
    }

    let fraction = high_density_fraction(&partition_densities(&counts, maxima));
    Ok(Construction { object: obj, iterations, whole_body: whole, high_density_fraction: fraction })
}
