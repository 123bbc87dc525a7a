//! Geometric primitives shared by the rest of the crate.
//!
//! Coordinates follow the LiDAR convention: x forward, y left, z up. Headings
//! are rotations about z and are kept normalized to `(-pi, pi]`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack used for point-in-box membership.
pub const BOX_EPSILON: f64 = 1e-6;

/// Tolerance for treating a box as being in canonical pose.
pub const CANONICAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("box is not in canonical pose (center {center:?}, theta {theta})")]
    NotCanonical { center: [f64; 3], theta: f64 },
    #[error("unknown object class `{0}`")]
    UnknownClass(String),
}

/// A single LiDAR return.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Reflection intensity in `[0, 1]`.
    pub r: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64, z: f64, r: f64) -> Self {
        Self { x, y, z, r }
    }

    #[inline]
    pub fn xyz(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn is_valid(&self) -> bool {
        self.x.is_finite()
            && self.y.is_finite()
            && self.z.is_finite()
            && (0.0..=1.0).contains(&self.r)
    }
}

/// The three annotated classes, in the fixed processing order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ObjectClass {
    Car,
    Pedestrian,
    Cyclist,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 3] = [ObjectClass::Car, ObjectClass::Pedestrian, ObjectClass::Cyclist];

    pub fn index(self) -> usize {
        match self {
            ObjectClass::Car => 0,
            ObjectClass::Pedestrian => 1,
            ObjectClass::Cyclist => 2,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ObjectClass::Car => "Car",
            ObjectClass::Pedestrian => "Pedestrian",
            ObjectClass::Cyclist => "Cyclist",
        }
    }

    /// Cars and cyclists are roughly left/right symmetric in canonical pose.
    pub fn is_mirror_symmetric(self) -> bool {
        !matches!(self, ObjectClass::Pedestrian)
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObjectClass {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Car" => Ok(ObjectClass::Car),
            "Pedestrian" => Ok(ObjectClass::Pedestrian),
            "Cyclist" => Ok(ObjectClass::Cyclist),
            other => Err(GeometryError::UnknownClass(other.to_string())),
        }
    }
}

/// Oriented 3D box: center, extents (length along heading, width, height) and heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub cx: f64,
    pub cy: f64,
    pub cz: f64,
    pub l: f64,
    pub w: f64,
    pub h: f64,
    pub theta: f64,
}

impl BoundingBox {
    pub fn new(center: [f64; 3], extents: [f64; 3], theta: f64) -> Self {
        Self {
            cx: center[0],
            cy: center[1],
            cz: center[2],
            l: extents[0],
            w: extents[1],
            h: extents[2],
            theta: normalize_angle(theta),
        }
    }

    /// Axis-aligned box centered at the origin.
    pub fn canonical(l: f64, w: f64, h: f64) -> Self {
        Self::new([0.0; 3], [l, w, h], 0.0)
    }

    #[inline]
    pub fn center(&self) -> [f64; 3] {
        [self.cx, self.cy, self.cz]
    }

    #[inline]
    pub fn extents(&self) -> [f64; 3] {
        [self.l, self.w, self.h]
    }

    pub fn volume(&self) -> f64 {
        self.l * self.w * self.h
    }

    pub fn is_valid(&self) -> bool {
        let finite = self.center().iter().chain(&[self.theta]).all(|v| v.is_finite());
        finite && self.l > 0.0 && self.w > 0.0 && self.h > 0.0
    }

    pub fn is_canonical(&self) -> bool {
        self.center().iter().all(|c| c.abs() <= CANONICAL_TOLERANCE)
            && self.theta.abs() <= CANONICAL_TOLERANCE
    }

    /// Membership test with [`BOX_EPSILON`] slack on every face.
    pub fn contains(&self, p: &Point) -> bool {
        self.membership()(p)
    }

    /// [`BoundingBox::contains`] with the heading's sine and cosine computed
    /// once, for testing many points.
    pub fn membership(&self) -> impl Fn(&Point) -> bool + '_ {
        let (s, c) = self.theta.sin_cos();
        move |p| {
            let dx = p.x - self.cx;
            let dy = p.y - self.cy;
            let lx = c * dx + s * dy;
            let ly = -s * dx + c * dy;
            let lz = p.z - self.cz;
            lx.abs() <= self.l / 2.0 + BOX_EPSILON
                && ly.abs() <= self.w / 2.0 + BOX_EPSILON
                && lz.abs() <= self.h / 2.0 + BOX_EPSILON
        }
    }

    /// Birds-eye-view corners, counter-clockwise.
    pub fn bev_corners(&self) -> [[f64; 2]; 4] {
        let (s, c) = self.theta.sin_cos();
        let hl = self.l / 2.0;
        let hw = self.w / 2.0;
        [[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]]
            .map(|[u, v]| [self.cx + c * u - s * v, self.cy + s * u + c * v])
    }
}

/// Rigid transform from an object's canonical frame to the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub theta: f64,
}

impl Pose {
    pub const IDENTITY: Pose = Pose { x: 0.0, y: 0.0, z: 0.0, theta: 0.0 };

    pub fn new(x: f64, y: f64, z: f64, theta: f64) -> Self {
        Self { x, y, z, theta: normalize_angle(theta) }
    }
}

/// A labeled object: its points, class and box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledObject {
    pub points: Vec<Point>,
    pub class: ObjectClass,
    pub bbox: BoundingBox,
}

impl LabeledObject {
    pub fn new(points: Vec<Point>, class: ObjectClass, bbox: BoundingBox) -> Self {
        Self { points, class, bbox }
    }

    pub fn all_points_inside(&self) -> bool {
        let inside = self.bbox.membership();
        self.points.iter().all(inside)
    }
}

/// Maps an angle into `(-pi, pi]`.
pub fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t - 2.0 * PI
    } else {
        t
    }
}

#[inline]
fn rotate_xy(x: f64, y: f64, sin: f64, cos: f64) -> (f64, f64) {
    (cos * x - sin * y, sin * x + cos * y)
}

/// Rotates every point about the z axis through the origin.
pub fn rotate_z(points: &[Point], angle: f64) -> Vec<Point> {
    let (s, c) = angle.sin_cos();
    points
        .iter()
        .map(|p| {
            let (x, y) = rotate_xy(p.x, p.y, s, c);
            Point { x, y, ..*p }
        })
        .collect()
}

/// Moves an object into canonical pose (centered, zero heading) and returns
/// the pose that maps it back.
pub fn to_canonical(obj: &LabeledObject) -> (LabeledObject, Pose) {
    let b = &obj.bbox;
    let pose = Pose { x: b.cx, y: b.cy, z: b.cz, theta: b.theta };
    let (s, c) = (-b.theta).sin_cos();
    let points = obj
        .points
        .iter()
        .map(|p| {
            let (x, y) = rotate_xy(p.x - b.cx, p.y - b.cy, s, c);
            Point { x, y, z: p.z - b.cz, r: p.r }
        })
        .collect();
    let canonical = LabeledObject {
        points,
        class: obj.class,
        bbox: BoundingBox::canonical(b.l, b.w, b.h),
    };
    (canonical, pose)
}

/// Applies `pose` to an object: rotation about z by `pose.theta`, then translation.
pub fn from_canonical(obj: &LabeledObject, pose: &Pose) -> LabeledObject {
    let (s, c) = pose.theta.sin_cos();
    let transform = |x: f64, y: f64, z: f64| {
        let (rx, ry) = rotate_xy(x, y, s, c);
        (rx + pose.x, ry + pose.y, z + pose.z)
    };
    let points = obj
        .points
        .iter()
        .map(|p| {
            let (x, y, z) = transform(p.x, p.y, p.z);
            Point { x, y, z, r: p.r }
        })
        .collect();
    let b = &obj.bbox;
    let (cx, cy, cz) = transform(b.cx, b.cy, b.cz);
    LabeledObject {
        points,
        class: obj.class,
        bbox: BoundingBox::new([cx, cy, cz], b.extents(), b.theta + pose.theta),
    }
}

/// Returns the input followed by its reflection across the xz plane.
pub fn mirror_x(points: &[Point]) -> Vec<Point> {
    let mut out = Vec::with_capacity(points.len() * 2);
    out.extend_from_slice(points);
    out.extend(points.iter().map(|p| Point { y: -p.y, ..*p }));
    out
}

/// Intersection-over-union of two canonical boxes.
///
/// Both boxes are centered and axis aligned, so the intersection is the box of
/// per-axis minimum extents.
pub fn box_similarity(a: &BoundingBox, b: &BoundingBox) -> Result<f64, GeometryError> {
    for bx in [a, b] {
        if !bx.is_canonical() {
            return Err(GeometryError::NotCanonical { center: bx.center(), theta: bx.theta });
        }
    }
    Ok(canonical_iou(a.extents(), b.extents()))
}

#[inline]
pub(crate) fn canonical_iou(a: [f64; 3], b: [f64; 3]) -> f64 {
    let inter = a[0].min(b[0]) * a[1].min(b[1]) * a[2].min(b[2]);
    let union = a[0] * a[1] * a[2] + b[0] * b[1] * b[2] - inter;
    inter / union
}

/// Separating-axis test on the birds-eye-view rectangles. Touching counts as overlap.
pub fn bev_overlap(a: &BoundingBox, b: &BoundingBox) -> bool {
    let ca = a.bev_corners();
    let cb = b.bev_corners();
    let axes = [a.theta, a.theta + PI / 2.0, b.theta, b.theta + PI / 2.0];
    for angle in axes {
        let (s, c) = angle.sin_cos();
        let project = |corners: &[[f64; 2]; 4]| {
            corners.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                let d = p[0] * c + p[1] * s;
                (lo.min(d), hi.max(d))
            })
        };
        let (amin, amax) = project(&ca);
        let (bmin, bmax) = project(&cb);
        if amax < bmin || bmax < amin {
            return false;
        }
    }
    true
}

pub fn box_diagonal(b: &BoundingBox) -> f64 {
    (b.l * b.l + b.w * b.w + b.h * b.h).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn rotate_quarter_turn() {
        let out = rotate_z(&[Point::new(1.0, 0.0, 0.0, 0.7)], PI / 2.0);
        assert!(close(out[0].x, 0.0, 1e-15) && close(out[0].y, 1.0, 1e-15));
        assert_eq!(out[0].z, 0.0);
        assert_eq!(out[0].r, 0.7);
    }

    #[test]
    fn rotate_identity_and_half_turn() {
        let pts = vec![Point::new(1.0, 1.0, 0.0, 0.1), Point::new(-3.0, 2.5, 1.0, 0.9)];
        assert_eq!(rotate_z(&pts, 0.0), pts);
        let out = rotate_z(&pts[..1], PI);
        assert!(close(out[0].x, -1.0, 1e-12) && close(out[0].y, -1.0, 1e-12));
    }

    #[test]
    fn angle_normalization_range() {
        assert_eq!(normalize_angle(PI), PI);
        assert!(close(normalize_angle(-PI), PI, 1e-15));
        assert!(close(normalize_angle(3.0 * PI / 2.0), -PI / 2.0, 1e-15));
        assert!(close(normalize_angle(0.25), 0.25, 0.0));
    }

    #[test]
    fn canonical_identity_object_unchanged() {
        let obj = LabeledObject::new(
            vec![Point::new(0.5, -0.2, 0.1, 0.3)],
            ObjectClass::Car,
            BoundingBox::canonical(4.0, 2.0, 1.5),
        );
        let (canon, pose) = to_canonical(&obj);
        assert_eq!(pose, Pose::IDENTITY);
        assert_eq!(canon, obj);
    }

    #[test]
    fn canonical_center_maps_to_origin() {
        let obj = LabeledObject::new(
            vec![Point::new(5.0, -2.0, 1.0, 0.3)],
            ObjectClass::Car,
            BoundingBox::new([5.0, -2.0, 1.0], [4.0, 2.0, 1.5], PI / 2.0),
        );
        let (canon, pose) = to_canonical(&obj);
        assert_eq!(canon.points[0].xyz(), [0.0, 0.0, 0.0]);
        assert!(canon.bbox.is_canonical());
        assert_eq!(pose, Pose { x: 5.0, y: -2.0, z: 1.0, theta: PI / 2.0 });
    }

    #[test]
    fn from_canonical_translation() {
        let obj = LabeledObject::new(
            vec![Point::new(1.0, 2.0, 3.0, 0.5)],
            ObjectClass::Cyclist,
            BoundingBox::canonical(2.0, 1.0, 1.0),
        );
        assert_eq!(from_canonical(&obj, &Pose::IDENTITY), obj);
        let moved = from_canonical(&obj, &Pose::new(10.0, 0.0, 0.0, 0.0));
        assert_eq!(moved.points[0].xyz(), [11.0, 2.0, 3.0]);
        assert_eq!(moved.bbox.cx, 10.0);
    }

    fn random_object(rng: &mut ChaCha8Rng) -> LabeledObject {
        let extents = [rng.gen_range(0.5..6.0), rng.gen_range(0.5..3.0), rng.gen_range(0.5..2.5)];
        let center = [rng.gen_range(-80.0..80.0), rng.gen_range(-80.0..80.0), rng.gen_range(-3.0..1.0)];
        let bbox = BoundingBox::new(center, extents, rng.gen_range(-4.0..4.0));
        let canon = LabeledObject::new(
            (0..rng.gen_range(0..50))
                .map(|_| {
                    Point::new(
                        rng.gen_range(-0.5..0.5) * extents[0],
                        rng.gen_range(-0.5..0.5) * extents[1],
                        rng.gen_range(-0.5..0.5) * extents[2],
                        rng.gen(),
                    )
                })
                .collect(),
            ObjectClass::Car,
            BoundingBox::canonical(extents[0], extents[1], extents[2]),
        );
        from_canonical(&canon, &Pose::new(bbox.cx, bbox.cy, bbox.cz, bbox.theta))
    }

    #[test]
    fn canonical_round_trip_seeded() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let obj = random_object(&mut rng);
            assert!(obj.all_points_inside());
            let (canon, pose) = to_canonical(&obj);
            assert!(canon.bbox.is_canonical());
            assert!(canon.all_points_inside());
            let back = from_canonical(&canon, &pose);
            for (a, b) in obj.points.iter().zip(&back.points) {
                for (u, v) in a.xyz().iter().zip(b.xyz()) {
                    assert!((u - v).abs() < 1e-9);
                }
                assert_eq!(a.r, b.r);
            }
            for (u, v) in obj.bbox.center().iter().zip(back.bbox.center()) {
                assert!((u - v).abs() < 1e-9);
            }
            assert!(close(normalize_angle(obj.bbox.theta - back.bbox.theta), 0.0, 1e-12));
        }
    }

    #[test]
    fn mirror_examples() {
        let out = mirror_x(&[Point::new(1.0, 0.5, 0.0, 0.3)]);
        assert_eq!(out, vec![Point::new(1.0, 0.5, 0.0, 0.3), Point::new(1.0, -0.5, 0.0, 0.3)]);
        let fixed = mirror_x(&[Point::new(1.0, 0.0, 0.0, 0.3)]);
        assert_eq!(fixed[0].xyz(), [1.0, 0.0, 0.0]);
        assert_eq!(fixed[1].xyz(), [1.0, -0.0, 0.0]);
    }

    #[test]
    fn similarity_closed_form() {
        let a = BoundingBox::canonical(4.0, 2.0, 2.0);
        let b = BoundingBox::canonical(2.0, 2.0, 2.0);
        let c = BoundingBox::canonical(4.0, 2.0, 1.0);
        assert_eq!(box_similarity(&a, &a).unwrap(), 1.0);
        assert_eq!(box_similarity(&a, &b).unwrap(), 0.5);
        assert_eq!(box_similarity(&a, &c).unwrap(), 0.5);
        assert_eq!(box_similarity(&b, &a).unwrap(), 0.5);
    }

    #[test]
    fn similarity_rejects_non_canonical() {
        let a = BoundingBox::canonical(4.0, 2.0, 2.0);
        let moved = BoundingBox::new([1.0, 0.0, 0.0], [4.0, 2.0, 2.0], 0.0);
        let turned = BoundingBox::new([0.0; 3], [4.0, 2.0, 2.0], 0.1);
        assert!(matches!(box_similarity(&a, &moved), Err(GeometryError::NotCanonical { .. })));
        assert!(box_similarity(&turned, &a).is_err());
    }

    #[test]
    fn bev_overlap_examples() {
        let a = BoundingBox::new([10.0, 0.0, 0.0], [4.0, 2.0, 1.5], 0.3);
        assert!(bev_overlap(&a, &a));
        let far = BoundingBox::new([110.0, 0.0, 0.0], [5.0, 5.0, 5.0], 1.0);
        assert!(!bev_overlap(&a, &far));
        // Corner of a rotated square just short of / just past the other's edge.
        let base = BoundingBox::new([0.0; 3], [2.0, 2.0, 1.0], 0.0);
        let reach = 2f64.sqrt();
        let gap = BoundingBox::new([1.0 + reach + 1e-3, 0.0, 0.0], [2.0, 2.0, 1.0], PI / 4.0);
        let hit = BoundingBox::new([1.0 + reach - 1e-3, 0.0, 0.0], [2.0, 2.0, 1.0], PI / 4.0);
        assert!(!bev_overlap(&base, &gap));
        assert!(bev_overlap(&base, &hit));
    }

    #[test]
    fn diagonal_examples() {
        assert!(close(box_diagonal(&BoundingBox::canonical(3.0, 4.0, 1e-4)), 5.0, 1e-8));
        assert!(close(box_diagonal(&BoundingBox::canonical(1.0, 1.0, 1.0)), 3f64.sqrt(), 1e-15));
        assert_eq!(box_diagonal(&BoundingBox::canonical(2.0, 2.0, 1.0)), 3.0);
    }

    #[test]
    fn contains_uses_slack() {
        let b = BoundingBox::canonical(2.0, 2.0, 2.0);
        assert!(b.contains(&Point::new(1.0 + 5e-7, 0.0, 0.0, 0.0)));
        assert!(!b.contains(&Point::new(1.0 + 5e-6, 0.0, 0.0, 0.0)));
    }

    proptest! {
        #[test]
        fn rotate_inverse_is_identity(x in -100.0..100.0f64, y in -100.0..100.0f64, a in -10.0..10.0f64) {
            let p = [Point::new(x, y, 1.0, 0.5)];
            let back = rotate_z(&rotate_z(&p, a), -a);
            prop_assert!((back[0].x - x).abs() < 1e-12 && (back[0].y - y).abs() < 1e-12);
        }

        #[test]
        fn similarity_symmetric(a in prop::array::uniform3(0.1..10.0f64), b in prop::array::uniform3(0.1..10.0f64)) {
            let ba = BoundingBox::canonical(a[0], a[1], a[2]);
            let bb = BoundingBox::canonical(b[0], b[1], b[2]);
            let s = box_similarity(&ba, &bb).unwrap();
            prop_assert_eq!(s, box_similarity(&bb, &ba).unwrap());
            prop_assert!(s > 0.0 && s <= 1.0);
            prop_assert_eq!(box_similarity(&ba, &ba).unwrap(), 1.0);
        }

        #[test]
        fn mirror_doubles_and_is_symmetric(ys in prop::collection::vec(-5.0..5.0f64, 0..20)) {
            let pts: Vec<Point> = ys.iter().map(|&y| Point::new(1.0, y, 0.0, 0.2)).collect();
            let m = mirror_x(&pts);
            prop_assert_eq!(m.len(), 2 * pts.len());
            let mut a: Vec<f64> = m.iter().map(|p| p.y).collect();
            let mut b: Vec<f64> = m.iter().map(|p| -p.y).collect();
            a.sort_by(f64::total_cmp);
            b.sort_by(|u, v| (u + 0.0).total_cmp(&(v + 0.0)));
            let a: Vec<f64> = a.into_iter().map(|v| v + 0.0).collect();
            prop_assert_eq!(a, b.into_iter().map(|v| v + 0.0).collect::<Vec<_>>());
        }
    }
}
