//! Readers and writers for velodyne scans, label files and PLY exports.

mod labels;
mod ply;
mod velodyne;

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::geometry::{BoundingBox, LabeledObject, ObjectClass, Point};

pub use labels::{
    format_sig9, parse_calibration, read_kitti_labels, read_labels, write_labels, Calibration,
    LabelFile,
};
pub use ply::{export_ply, parse_ply, write_ply, ColorMode, PlyVertex};
pub use velodyne::{decode_velodyne, encode_velodyne, read_velodyne_bin, write_velodyne_bin};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: size {size} is not a multiple of 16 bytes")]
    SizeNotMultipleOf16 { path: PathBuf, size: u64 },
    #[error("{path}:{line}: malformed line")]
    MalformedLine { path: PathBuf, line: usize },
    #[error("{path}: missing calibration key `{key}`")]
    MissingCalibKey { path: PathBuf, key: &'static str },
    #[error("{path}: malformed PLY: {reason}")]
    MalformedPly { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl IoError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IoError::Io { path: path.into(), source }
    }
}

/// Paths making up one input frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameFiles {
    pub frame_id: String,
    pub cloud_path: PathBuf,
    pub label_path: PathBuf,
}

/// A point cloud split into background points and labeled objects.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Frame {
    pub frame_id: String,
    pub background: Vec<Point>,
    pub objects: Vec<LabeledObject>,
}

impl Frame {
    pub fn total_points(&self) -> usize {
        self.background.len() + self.objects.iter().map(|o| o.points.len()).sum::<usize>()
    }

    pub fn class_counts(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for obj in &self.objects {
            counts[obj.class.index()] += 1;
        }
        counts
    }

    /// All points, background first, then objects in order.
    pub fn all_points(&self) -> Vec<Point> {
        let mut out = Vec::with_capacity(self.total_points());
        out.extend_from_slice(&self.background);
        for obj in &self.objects {
            out.extend_from_slice(&obj.points);
        }
        out
    }

    pub fn labels(&self) -> Vec<(ObjectClass, BoundingBox)> {
        self.objects.iter().map(|o| (o.class, o.bbox)).collect()
    }

    /// Adds an object, moving background points inside its box out of the frame.
    pub fn insert_object(&mut self, obj: LabeledObject) {
        let bbox = obj.bbox;
        let inside = bbox.membership();
        self.background.retain(|p| !inside(p));
        self.objects.push(obj);
    }
}

/// Partitions a cloud: each point goes to the first box (in label order)
/// containing it, otherwise to the background.
pub fn split_frame(
    frame_id: impl Into<String>,
    points: &[Point],
    labels: &[(ObjectClass, BoundingBox)],
) -> Frame {
    let mut objects: Vec<LabeledObject> = labels
        .iter()
        .map(|(class, bbox)| LabeledObject::new(Vec::new(), *class, *bbox))
        .collect();
    let tests: Vec<_> = labels.iter().map(|(_, bbox)| bbox.membership()).collect();
    let mut background = Vec::new();
    for p in points {
        match tests.iter().position(|inside| inside(p)) {
            Some(i) => objects[i].points.push(*p),
            None => background.push(*p),
        }
    }
    Frame { frame_id: frame_id.into(), background, objects }
}

pub const CLOUD_DIR: &str = "velodyne";
pub const LABEL_DIR: &str = "label";

impl FrameFiles {
    /// Paths of frame `frame_id` under a dataset root.
    pub fn in_dir(root: impl AsRef<Path>, frame_id: &str) -> Self {
        let root = root.as_ref();
        Self {
            frame_id: frame_id.to_string(),
            cloud_path: root.join(CLOUD_DIR).join(format!("{frame_id}.bin")),
            label_path: root.join(LABEL_DIR).join(format!("{frame_id}.txt")),
        }
    }
}

/// Frames of a dataset root laid out as `velodyne/<id>.bin` plus
/// `label/<id>.txt`, sorted by id. A missing `velodyne` directory yields no frames.
pub fn discover_frames(root: impl AsRef<Path>) -> Result<Vec<FrameFiles>, IoError> {
    let root = root.as_ref();
    let clouds = root.join(CLOUD_DIR);
    if !root.is_dir() {
        return Err(IoError::io(root, std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory")));
    }
    if !clouds.is_dir() {
        return Ok(Vec::new());
    }
    let mut ids = Vec::new();
    for entry in fs::read_dir(&clouds).map_err(|e| IoError::io(&clouds, e))? {
        let path = entry.map_err(|e| IoError::io(&clouds, e))?.path();
        if path.extension().is_some_and(|e| e == "bin") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                ids.push(stem.to_string());
            }
        }
    }
    ids.sort();
    Ok(ids.iter().map(|id| FrameFiles::in_dir(root, id)).collect())
}

/// Writes a frame's cloud (background first) and native labels under a
/// dataset root, creating the directories as needed.
pub fn write_frame(frame: &Frame, root: impl AsRef<Path>) -> Result<FrameFiles, IoError> {
    let files = FrameFiles::in_dir(root, &frame.frame_id);
    for path in [&files.cloud_path, &files.label_path] {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
        }
    }
    write_velodyne_bin(&frame.all_points(), &files.cloud_path)?;
    write_labels(&frame.labels(), &files.label_path)?;
    Ok(files)
}

/// Reads a cloud and its native label file and splits them into a frame.
pub fn load_frame(files: &FrameFiles) -> Result<Frame, IoError> {
    let points = read_velodyne_bin(&files.cloud_path)?;
    let labels = read_labels(&files.label_path)?;
    Ok(split_frame(files.frame_id.clone(), &points, &labels.boxes))
}
