//! Ground-truth object database.
//!
//! Every labeled object of the training frames is stored in canonical pose
//! together with the pose it was observed at, its per-partition densities and
//! its ranked completion candidates.

mod format;
mod index;
mod partition;

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{to_canonical, LabeledObject, ObjectClass, Point, Pose};
use crate::io::{load_frame, Frame, FrameFiles, IoError};

pub use format::{decode_database, encode_database, load_database, save_database, FORMAT_VERSION, MAGIC};
pub use index::{deficient_partitions, index_candidates, CandidateIndex};
pub use partition::{mean_nonempty, partition_counts, partition_densities, ClassGrids, PartitionGrid};

pub const DEFAULT_K: usize = 400;

#[derive(Debug, Error)]
pub enum DatabaseError {
    #[error("no labeled objects of any class in the input frames")]
    EmptyDatabase,
    #[error("not a database file (bad magic)")]
    BadMagic,
    #[error("unsupported database version {0}")]
    UnsupportedVersion(u32),
    #[error("database truncated in section `{0}`")]
    TruncatedSection(&'static str),
    #[error("corrupt database: {0}")]
    Corrupt(String),
    #[error("invalid database config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Load(#[from] IoError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatabaseConfig {
    pub k: usize,
    pub grids: ClassGrids,
}

impl Default for DatabaseConfig {
    fn default() -> Self {
        Self { k: DEFAULT_K, grids: ClassGrids::default() }
    }
}

impl DatabaseConfig {
    pub fn validate(&self) -> Result<(), DatabaseError> {
        if self.k == 0 || self.k > u32::MAX as usize / 2 {
            return Err(DatabaseError::InvalidConfig(format!("K must be in [1, {}], got {}", u32::MAX / 2, self.k)));
        }
        for g in self.grids.0 {
            if g.nx == 0 || g.ny == 0 || g.nz == 0 {
                return Err(DatabaseError::InvalidConfig(format!("grid {g} has an empty axis")));
            }
        }
        Ok(())
    }
}

/// A stored object: canonical points and box, the pose it was extracted at
/// and the index of its frame in [`GtDatabase::frame_ids`].
#[derive(Debug, Clone, PartialEq)]
pub struct DbObject {
    pub object: LabeledObject,
    pub pose: Pose,
    pub source_frame: u32,
}

impl DbObject {
    pub fn class(&self) -> ObjectClass {
        self.object.class
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DensityTable {
    /// Densities per object id.
    pub densities: Vec<Vec<f64>>,
    /// Largest raw count per partition, per class.
    pub class_maxima: [Vec<u32>; 3],
}

/// Immutable, thread-shareable database.
///
/// Object points are grouped by partition cell so that the points of any cell
/// are a contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct GtDatabase {
    pub config: DatabaseConfig,
    pub frame_ids: Vec<String>,
    pub objects: Vec<DbObject>,
    pub densities: DensityTable,
    pub candidates: CandidateIndex,
    cell_offsets: Vec<Vec<u32>>,
    members: [Vec<u32>; 3],
}

impl GtDatabase {
    /// Assembles a database from already computed parts, sorting object points
    /// by cell. Fails if the parts disagree in size.
    pub fn from_parts(
        config: DatabaseConfig,
        frame_ids: Vec<String>,
        mut objects: Vec<DbObject>,
        densities: DensityTable,
        candidates: CandidateIndex,
    ) -> Result<Self, DatabaseError> {
        config.validate()?;
        let n = objects.len();
        if densities.densities.len() != n || candidates.lists.len() != n {
            return Err(DatabaseError::Corrupt(format!(
                "{n} objects but {} density rows and {} candidate lists",
                densities.densities.len(),
                candidates.lists.len()
            )));
        }
        let mut members: [Vec<u32>; 3] = Default::default();
        for (id, o) in objects.iter().enumerate() {
            let cells = config.grids.get(o.class()).len();
            if densities.densities[id].len() != cells {
                return Err(DatabaseError::Corrupt(format!("object {id} has the wrong number of densities")));
            }
            if o.source_frame as usize >= frame_ids.len() {
                return Err(DatabaseError::Corrupt(format!("object {id} refers to a missing frame")));
            }
            members[o.class().index()].push(id as u32);
        }
        for class in ObjectClass::ALL {
            if densities.class_maxima[class.index()].len() != config.grids.get(class).len() {
                return Err(DatabaseError::Corrupt(format!("{class} maxima have the wrong length")));
            }
        }
        for (id, list) in candidates.lists.iter().enumerate() {
            for &c in list {
                let ok = (c as usize) < n && c as usize != id && objects[c as usize].class() == objects[id].class();
                if !ok {
                    return Err(DatabaseError::Corrupt(format!("object {id} has invalid candidate {c}")));
                }
            }
        }
        let cell_offsets = objects
            .iter_mut()
            .map(|o| {
                let grid = config.grids.get(o.object.class);
                group_by_cell(&mut o.object, grid)
            })
            .collect();
        Ok(Self { config, frame_ids, objects, densities, candidates, cell_offsets, members })
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn object(&self, id: u32) -> &DbObject {
        &self.objects[id as usize]
    }

    pub fn candidates(&self, id: u32) -> &[u32] {
        self.candidates.candidates(id)
    }

    pub fn densities(&self, id: u32) -> &[f64] {
        &self.densities.densities[id as usize]
    }

    /// Object ids of a class in ascending order.
    pub fn class_members(&self, class: ObjectClass) -> &[u32] {
        &self.members[class.index()]
    }

    pub fn class_counts(&self) -> [usize; 3] {
        [0, 1, 2].map(|i| self.members[i].len())
    }

    /// Canonical points of `id` that fall in partition cell `cell`.
    pub fn cell_points(&self, id: u32, cell: usize) -> &[Point] {
        let off = &self.cell_offsets[id as usize];
        &self.objects[id as usize].object.points[off[cell] as usize..off[cell + 1] as usize]
    }
}

fn group_by_cell(obj: &mut LabeledObject, grid: PartitionGrid) -> Vec<u32> {
    let extents = obj.bbox.extents();
    let mut keyed: Vec<(usize, Point)> = obj.points.iter().map(|p| (grid.index_of(p, extents), *p)).collect();
    keyed.sort_by_key(|(cell, _)| *cell);
    let mut offsets = vec![0u32; grid.len() + 1];
    for (cell, _) in &keyed {
        offsets[cell + 1] += 1;
    }
    for c in 0..grid.len() {
        offsets[c + 1] += offsets[c];
    }
    obj.points = keyed.into_iter().map(|(_, p)| p).collect();
    offsets
}

/// Extracts, normalizes and indexes every labeled object in `frames`.
/// The result depends only on the frames and their order.
pub fn build_database(frames: &[Frame], config: DatabaseConfig) -> Result<GtDatabase, DatabaseError> {
    config.validate()?;
    let per_frame: Vec<Vec<DbObject>> = frames
        .par_iter()
        .enumerate()
        .map(|(fi, frame)| {
            frame
                .objects
                .iter()
                .map(|o| {
                    let (object, pose) = to_canonical(o);
                    DbObject { object, pose, source_frame: fi as u32 }
                })
                .collect()
        })
        .collect();
    let objects: Vec<DbObject> = per_frame.into_iter().flatten().collect();
    if objects.is_empty() {
        return Err(DatabaseError::EmptyDatabase);
    }

    let counts: Vec<Vec<u32>> =
        objects.par_iter().map(|o| partition_counts(&o.object, config.grids.get(o.class()))).collect();
    let mut class_maxima: [Vec<u32>; 3] = ObjectClass::ALL.map(|c| vec![0; config.grids.get(c).len()]);
    for (o, c) in objects.iter().zip(&counts) {
        for (m, &v) in class_maxima[o.class().index()].iter_mut().zip(c) {
            *m = (*m).max(v);
        }
    }
    let densities: Vec<Vec<f64>> = objects
        .iter()
        .zip(&counts)
        .map(|(o, c)| partition_densities(c, &class_maxima[o.class().index()]))
        .collect();

    let classes: Vec<ObjectClass> = objects.iter().map(DbObject::class).collect();
    let extents: Vec<[f64; 3]> = objects.iter().map(|o| o.object.bbox.extents()).collect();
    let candidates = index_candidates(&classes, &extents, &densities, config.k);

    let frame_ids = frames.iter().map(|f| f.frame_id.clone()).collect();
    GtDatabase::from_parts(config, frame_ids, objects, DensityTable { densities, class_maxima }, candidates)
}

/// Loads the frames (in parallel, keeping their order) and builds the database.
pub fn build_database_from_files(files: &[FrameFiles], config: DatabaseConfig) -> Result<GtDatabase, DatabaseError> {
    let frames = files.par_iter().map(load_frame).collect::<Result<Vec<_>, _>>()?;
    build_database(&frames, config)
}
