//! Conventional augmentation: global flip/scale/rotation and ground-truth
//! copy-paste at the objects' original poses.

use std::f64::consts::PI;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::database::GtDatabase;
use crate::geometry::{bev_overlap, from_canonical, rotate_z, BoundingBox, LabeledObject, ObjectClass, Point};
use crate::io::Frame;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalParams {
    pub flip_probability: f64,
    pub scale_range: (f64, f64),
    pub rotation_range: (f64, f64),
}

impl Default for GlobalParams {
    fn default() -> Self {
        Self { flip_probability: 0.5, scale_range: (0.95, 1.05), rotation_range: (-PI / 4.0, PI / 4.0) }
    }
}

/// One realization of the global transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalDraw {
    pub flip: bool,
    pub scale: f64,
    pub angle: f64,
}

impl GlobalDraw {
    pub const IDENTITY: GlobalDraw = GlobalDraw { flip: false, scale: 1.0, angle: 0.0 };
}

pub fn draw_global<R: Rng + ?Sized>(rng: &mut R, params: &GlobalParams) -> GlobalDraw {
    let flip = rng.gen::<f64>() < params.flip_probability;
    let (slo, shi) = params.scale_range;
    let scale = slo + (shi - slo) * rng.gen::<f64>();
    let (rlo, rhi) = params.rotation_range;
    let angle = rlo + (rhi - rlo) * rng.gen::<f64>();
    GlobalDraw { flip, scale, angle }
}

fn transform_points(points: &[Point], d: &GlobalDraw) -> Vec<Point> {
    let staged: Vec<Point> = points
        .iter()
        .map(|p| {
            let y = if d.flip { -p.y } else { p.y };
            Point { x: p.x * d.scale, y: y * d.scale, z: p.z * d.scale, r: p.r }
        })
        .collect();
    if d.angle == 0.0 {
        staged
    } else {
        rotate_z(&staged, d.angle)
    }
}

fn transform_box(b: &BoundingBox, d: &GlobalDraw) -> BoundingBox {
    let (cy, theta) = if d.flip { (-b.cy, -b.theta) } else { (b.cy, b.theta) };
    let (s, c) = d.angle.sin_cos();
    let (x, y) = (b.cx * d.scale, cy * d.scale);
    BoundingBox::new(
        [x * c - y * s, x * s + y * c, b.cz * d.scale],
        [b.l * d.scale, b.w * d.scale, b.h * d.scale],
        theta + d.angle,
    )
}

/// Flip across the x axis, then scale, then rotate about z; applied to every
/// point and box. Intensities and object membership are preserved.
pub fn apply_global(frame: &Frame, d: &GlobalDraw) -> Frame {
    Frame {
        frame_id: frame.frame_id.clone(),
        background: transform_points(&frame.background, d),
        objects: frame
            .objects
            .iter()
            .map(|o| LabeledObject::new(transform_points(&o.points, d), o.class, transform_box(&o.bbox, d)))
            .collect(),
    }
}

pub fn global_augment<R: Rng + ?Sized>(frame: &Frame, rng: &mut R, params: &GlobalParams) -> Frame {
    apply_global(frame, &draw_global(rng, params))
}

pub const DEFAULT_GTS_COUNTS: [usize; 3] = [20, 15, 15];

/// Pastes up to `counts` database objects per class (sampled without
/// replacement) back at their stored poses, skipping any that collide in BEV
/// with a box already in the frame. Returns the number pasted per class.
pub fn gts_sample<R: Rng + ?Sized>(frame: &mut Frame, db: &GtDatabase, rng: &mut R, counts: [usize; 3]) -> [usize; 3] {
    let mut added = [0; 3];
    let mut occupied: Vec<BoundingBox> = frame.objects.iter().map(|o| o.bbox).collect();
    for class in ObjectClass::ALL {
        let members = db.class_members(class);
        let n = counts[class.index()].min(members.len());
        for i in sample(rng, members.len(), n) {
            let entry = db.object(members[i]);
            let obj = from_canonical(&entry.object, &entry.pose);
            if occupied.iter().any(|b| bev_overlap(b, &obj.bbox)) {
                continue;
            }
            occupied.push(obj.bbox);
            frame.insert_object(obj);
            added[class.index()] += 1;
        }
    }
    added
}
