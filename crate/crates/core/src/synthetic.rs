//! Seeded synthetic scenes for tests, benchmarks and demos.
//!
//! Frames contain a ground plane, two building facades and a handful of
//! objects whose points cover only the box faces turned towards the sensor,
//! like a single LiDAR sweep.

use std::f64::consts::PI;

use rand::Rng;

use crate::database::{build_database, DatabaseConfig, DatabaseError, GtDatabase};
use crate::geometry::{bev_overlap, from_canonical, BoundingBox, LabeledObject, ObjectClass, Point, Pose};
use crate::io::{split_frame, Frame};
use crate::seeding::{rng_from_seed, sub_rng, Rng as SeededRng};

pub const GROUND_Z: f64 = -1.73;

/// Depth of the inward range noise on sampled object surfaces, in meters.
pub const SURFACE_ROUGHNESS: f64 = 0.03;

/// Typical extents per class.
pub fn class_extents(class: ObjectClass) -> [f64; 3] {
    match class {
        ObjectClass::Car => [3.9, 1.6, 1.56],
        ObjectClass::Pedestrian => [0.8, 0.6, 1.73],
        ObjectClass::Cyclist => [1.76, 0.6, 1.73],
    }
}

/// Class extents jittered by up to ±10% per axis.
pub fn random_extents<R: Rng + ?Sized>(rng: &mut R, class: ObjectClass) -> [f64; 3] {
    class_extents(class).map(|e| e * rng.gen_range(0.9..1.1))
}

/// Which box faces to sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Faces {
    All,
    /// Faces whose outward normal points towards the origin once the box is at `pose`.
    VisibleFrom(Pose),
}

/// Samples `n` points on the (inset) surface of a canonical box.
pub fn box_surface<R: Rng + ?Sized>(rng: &mut R, extents: [f64; 3], n: usize, faces: Faces) -> Vec<Point> {
    let [l, w, h] = extents;
    // (axis, sign, area); the bottom face is never observed.
    let all = [(0, 1.0, w * h), (0, -1.0, w * h), (1, 1.0, l * h), (1, -1.0, l * h), (2, 1.0, l * w)];
    let chosen: Vec<(usize, f64, f64)> = all
        .into_iter()
        .filter(|&(axis, sign, _)| match faces {
            Faces::All => true,
            Faces::VisibleFrom(pose) => {
                let mut c = [0.0; 3];
                c[axis] = sign * extents[axis] / 2.0;
                let (s, co) = pose.theta.sin_cos();
                let world = [pose.x + c[0] * co - c[1] * s, pose.y + c[0] * s + c[1] * co, pose.z + c[2]];
                let mut nrm = [0.0; 3];
                nrm[axis] = sign;
                let nw = [nrm[0] * co - nrm[1] * s, nrm[0] * s + nrm[1] * co, nrm[2]];
                nw[0] * world[0] + nw[1] * world[1] + nw[2] * world[2] < 0.0
            }
        })
        .collect();
    let total: f64 = chosen.iter().map(|f| f.2).sum();
    let inset = 0.98;
    let mut pts = Vec::with_capacity(n);
    for _ in 0..n {
        let mut pick = rng.gen::<f64>() * total;
        let mut face = chosen[chosen.len() - 1];
        for f in &chosen {
            if pick < f.2 {
                face = *f;
                break;
            }
            pick -= f.2;
        }
        let mut c = [0.0; 3];
        for (a, e) in extents.iter().enumerate() {
            c[a] = if a == face.0 {
                face.1 * (e / 2.0 * inset - rng.gen_range(0.0..SURFACE_ROUGHNESS))
            } else {
                rng.gen_range(-0.5..0.5) * e * inset
            };
        }
        pts.push(Point::new(c[0], c[1], c[2], rng.gen::<f64>()));
    }
    pts
}

/// Points returned by an object at distance `d` in a sweep.
fn object_point_budget(class: ObjectClass, d: f64) -> usize {
    let near = match class {
        ObjectClass::Car => 9000.0,
        ObjectClass::Pedestrian => 2500.0,
        ObjectClass::Cyclist => 3000.0,
    };
    ((near / d.max(3.0)) as usize).clamp(15, 1200)
}

/// One synthetic sweep with roughly `target_points` points (exactly that many
/// unless the objects alone exceed it).
pub fn synthetic_frame(frame_id: &str, seed: u64, target_points: usize) -> Frame {
    let mut rng = sub_rng(seed, "synthetic-frame", 0);
    let mut boxes: Vec<(ObjectClass, BoundingBox)> = Vec::new();
    let mut points = Vec::with_capacity(target_points);

    let counts = [rng.gen_range(2..=6), rng.gen_range(0..=3), rng.gen_range(0..=2)];
    for class in ObjectClass::ALL {
        for _ in 0..counts[class.index()] {
            let ext = random_extents(&mut rng, class);
            for _ in 0..30 {
                let pose = Pose::new(
                    rng.gen_range(5.0..50.0),
                    rng.gen_range(-12.0..12.0),
                    GROUND_Z + ext[2] / 2.0,
                    rng.gen_range(-PI..PI),
                );
                let bbox = BoundingBox::new([pose.x, pose.y, pose.z], ext, pose.theta);
                if boxes.iter().any(|(_, b)| bev_overlap(b, &bbox)) {
                    continue;
                }
                let n = object_point_budget(class, pose.x.hypot(pose.y));
                let canon = LabeledObject::new(
                    box_surface(&mut rng, ext, n, Faces::VisibleFrom(pose)),
                    class,
                    BoundingBox::canonical(ext[0], ext[1], ext[2]),
                );
                points.extend(from_canonical(&canon, &pose).points);
                boxes.push((class, bbox));
                break;
            }
        }
    }

    let remaining = target_points.saturating_sub(points.len());
    let walls = remaining / 4;
    for i in 0..walls {
        let side = if i % 2 == 0 { 1.0 } else { -1.0 };
        let y = side * 20.0 + rng.gen_range(-0.05..0.05);
        points.push(Point::new(rng.gen_range(5.0..60.0), y, rng.gen_range(GROUND_Z..3.0), rng.gen::<f64>() * 0.5));
    }
    for _ in 0..remaining - walls {
        // Ring-like falloff: uniform in range, so density drops with distance.
        let r = rng.gen_range(3.0..70.0);
        let az = rng.gen_range(-PI / 2.0..PI / 2.0);
        let z = GROUND_Z + rng.gen_range(-0.03..0.03);
        points.push(Point::new(r * az.cos(), r * az.sin(), z, rng.gen::<f64>() * 0.3));
    }
    split_frame(frame_id, &points, &boxes)
}

/// `n` frames with ids `000000`, `000001`, ...
pub fn synthetic_corpus(n: usize, seed: u64, target_points: usize) -> Vec<Frame> {
    (0..n)
        .map(|i| {
            let id = format!("{i:06}");
            synthetic_frame(&id, crate::seeding::hash64(seed, &id), target_points)
        })
        .collect()
}

pub fn synthetic_database(n_frames: usize, seed: u64, config: DatabaseConfig) -> Result<GtDatabase, DatabaseError> {
    build_database(&synthetic_corpus(n_frames, seed, 4000), config)
}

/// How half-objects are cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalfSplit {
    /// Even objects keep `y < 0`, odd objects keep `y > 0`.
    LeftRight,
    /// Even objects keep `x > 0`, odd objects keep `x < 0`.
    FrontRear,
}

/// A class made only of half objects, one object per frame, observed on all faces.
pub fn half_object_frames(class: ObjectClass, n: usize, split: HalfSplit, seed: u64, points_per_object: usize) -> Vec<Frame> {
    let mut rng: SeededRng = rng_from_seed(seed);
    (0..n)
        .map(|i| {
            let ext = random_extents(&mut rng, class);
            let mut pts = box_surface(&mut rng, ext, points_per_object, Faces::All);
            let even = i % 2 == 0;
            pts.retain(|p| match split {
                HalfSplit::LeftRight => (p.y < 0.0) == even,
                HalfSplit::FrontRear => (p.x > 0.0) == even,
            });
            let pose = Pose::new(rng.gen_range(5.0..40.0), rng.gen_range(-10.0..10.0), GROUND_Z + ext[2] / 2.0, rng.gen_range(-PI..PI));
            let canon = LabeledObject::new(pts, class, BoundingBox::canonical(ext[0], ext[1], ext[2]));
            let world = from_canonical(&canon, &pose);
            Frame { frame_id: format!("{i:06}"), background: Vec::new(), objects: vec![world] }
        })
        .collect()
}
