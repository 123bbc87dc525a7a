//! Hidden point removal.
//!
//! Every point is reflected along its ray from the viewpoint `C` to the
//! outside of a sphere of radius `R`; a point is visible when its image is a
//! vertex of the convex hull of all images together with `C`. Larger `R`
//! flattens the reflected cloud and admits more near-silhouette points.
//!
//! [`s_hpr`] runs this per placed object (self-occlusion, distance-dependent
//! thinning); [`e_hpr`] runs it once over a whole frame (inter-object
//! occlusion) and drops labels that lose nearly all of their points.

mod hull;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{box_diagonal, LabeledObject, ObjectClass, Point};
use crate::io::Frame;

pub use hull::HullError;
pub(crate) use hull::{hull_vertex_mask, norm, sub, V3};

/// Default symbolic perturbation applied when the hull input is degenerate.
pub const DEFAULT_JITTER: f64 = 1e-7;

const MIN_VIEW_DISTANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HprError {
    #[error("point {index} coincides with the viewpoint")]
    PointAtViewpoint { index: usize },
    #[error("point {index} lies {distance} m from the viewpoint, beyond radius {radius}")]
    PointBeyondRadius { index: usize, distance: f64, radius: f64 },
    #[error("no points survived hidden point removal")]
    EmptyResult,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HprParams {
    pub radius: f64,
    pub viewpoint: [f64; 3],
    pub jitter: f64,
}

impl HprParams {
    pub fn new(viewpoint: [f64; 3], radius: f64) -> Self {
        Self { radius, viewpoint, jitter: DEFAULT_JITTER }
    }
}

/// Frame-level (external occlusion) parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EHprParams {
    pub radius: f64,
    /// Height of the viewpoint above the LiDAR origin.
    pub z: f64,
    /// Labels left with fewer surviving points are deleted together with those points.
    pub min_points_per_label: usize,
    pub jitter: f64,
}

impl Default for EHprParams {
    fn default() -> Self {
        Self { radius: 100_000.0, z: 0.0, min_points_per_label: 5, jitter: DEFAULT_JITTER }
    }
}

/// Object-level (self occlusion) parameters: `R = multiplier[class] * box diagonal`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SHprParams {
    pub radius_multiplier: [f64; 3],
    pub jitter: f64,
}

impl Default for SHprParams {
    fn default() -> Self {
        Self { radius_multiplier: [200.0; 3], jitter: DEFAULT_JITTER }
    }
}

impl SHprParams {
    pub fn multiplier(&self, class: ObjectClass) -> f64 {
        self.radius_multiplier[class.index()]
    }
}

/// Reflects points through the sphere of radius `radius` around `center`.
/// Output coordinates are relative to `center`.
pub fn spherical_flip(points: &[[f64; 3]], center: [f64; 3], radius: f64) -> Result<Vec<[f64; 3]>, HprError> {
    points
        .iter()
        .enumerate()
        .map(|(index, p)| {
            let d = sub(*p, center);
            let len = norm(d);
            if len < MIN_VIEW_DISTANCE {
                return Err(HprError::PointAtViewpoint { index });
            }
            if len > radius {
                return Err(HprError::PointBeyondRadius { index, distance: len, radius });
            }
            let k = 2.0 * (radius - len) / len;
            Ok([d[0] + k * d[0], d[1] + k * d[1], d[2] + k * d[2]])
        })
        .collect()
}

/// Indices of the convex hull vertices of `points`, ascending.
///
/// Fewer than four points are all returned. Degenerate (coplanar, collinear)
/// inputs are perturbed by a seeded jitter of magnitude `jitter`, escalated
/// tenfold per retry.
pub fn convex_hull_vertices(points: &[[f64; 3]], jitter: f64) -> Vec<usize> {
    let mask = hull_mask_with_jitter(points, jitter);
    (0..points.len()).filter(|&i| mask[i]).collect()
}

fn hull_mask_with_jitter(points: &[V3], jitter: f64) -> Vec<bool> {
    if points.len() < 4 {
        return vec![true; points.len()];
    }
    match hull_vertex_mask(points) {
        Ok(mask) => return mask,
        Err(err) => log::debug!("hull of {} points failed ({err}); jittering", points.len()),
    }
    let mut scale = jitter.max(f64::MIN_POSITIVE);
    for attempt in 0..8u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(attempt);
        let perturbed: Vec<V3> = points
            .iter()
            .map(|p| p.map(|c| c + scale * rng.gen_range(-1.0..=1.0)))
            .collect();
        if let Ok(mask) = hull_vertex_mask(&perturbed) {
            return mask;
        }
        scale *= 10.0;
    }
    log::warn!("hull of {} points failed after jittering; keeping all points", points.len());
    vec![true; points.len()]
}

/// Indices (ascending) of the points visible from `params.viewpoint`.
pub fn hpr_visible(points: &[[f64; 3]], params: &HprParams) -> Result<Vec<usize>, HprError> {
    let mask = hpr_mask(points, params)?;
    Ok((0..points.len()).filter(|&i| mask[i]).collect())
}

fn hpr_mask(points: &[[f64; 3]], params: &HprParams) -> Result<Vec<bool>, HprError> {
    let mut flipped = spherical_flip(points, params.viewpoint, params.radius)?;
    flipped.push([0.0; 3]);
    let mut mask = hull_mask_with_jitter(&flipped, params.jitter);
    mask.pop();
    Ok(mask)
}

fn xyz(points: &[Point]) -> Vec<[f64; 3]> {
    points.iter().map(Point::xyz).collect()
}

/// Self-occlusion for a placed object seen from `lidar_origin`.
pub fn s_hpr(obj: &LabeledObject, lidar_origin: [f64; 3], params: &SHprParams) -> Result<LabeledObject, HprError> {
    let radius = params.multiplier(obj.class) * box_diagonal(&obj.bbox);
    let hpr = HprParams { radius, viewpoint: lidar_origin, jitter: params.jitter };
    let mask = hpr_mask(&xyz(&obj.points), &hpr)?;
    let points: Vec<Point> = obj.points.iter().zip(&mask).filter(|(_, &m)| m).map(|(p, _)| *p).collect();
    if points.is_empty() {
        return Err(HprError::EmptyResult);
    }
    Ok(LabeledObject { points, ..obj.clone() })
}

/// External occlusion over the whole frame, viewed from `(0, 0, params.z)`.
///
/// Points at the viewpoint or beyond the radius cannot be reflected and are
/// treated as hidden.
pub fn e_hpr(frame: &Frame, params: &EHprParams) -> Frame {
    let viewpoint = [0.0, 0.0, params.z];
    let all = frame.all_points();
    let mut usable = Vec::with_capacity(all.len());
    let mut usable_index = Vec::with_capacity(all.len());
    for (i, p) in all.iter().enumerate() {
        let d = norm(sub(p.xyz(), viewpoint));
        if d >= MIN_VIEW_DISTANCE && d <= params.radius {
            usable.push(p.xyz());
            usable_index.push(i);
        }
    }
    let hpr = HprParams { radius: params.radius, viewpoint, jitter: params.jitter };
    let usable_mask = hpr_mask(&usable, &hpr).expect("points were pre-filtered to the flip domain");
    let mut visible = vec![false; all.len()];
    for (&i, &m) in usable_index.iter().zip(&usable_mask) {
        visible[i] = m;
    }

    let mut offset = 0;
    let mut take = |pts: &[Point]| {
        let kept: Vec<Point> = pts.iter().zip(&visible[offset..]).filter(|(_, &m)| m).map(|(p, _)| *p).collect();
        offset += pts.len();
        kept
    };
    let background = take(&frame.background);
    let mut objects = Vec::with_capacity(frame.objects.len());
    for obj in &frame.objects {
        let points = take(&obj.points);
        if points.len() >= params.min_points_per_label {
            objects.push(LabeledObject { points, ..obj.clone() });
        }
    }
    Frame { frame_id: frame.frame_id.clone(), background, objects }
}
