//! Random placement of whole-body objects with BEV collision avoidance.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{bev_overlap, from_canonical, normalize_angle, BoundingBox, LabeledObject, ObjectClass, Pose};
use crate::io::Frame;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid placement config: {0}")]
pub struct PlacementConfigError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementConfig {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    /// Headings are drawn from `[lo, hi)` and normalized to `(-pi, pi]`.
    pub rotation_range: (f64, f64),
    /// Objects to add per class, indexed by [`ObjectClass::index`].
    pub objects_per_class: [usize; 3],
    pub max_attempts: u32,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        Self {
            x_range: (0.0, 70.4),
            y_range: (-40.0, 40.0),
            rotation_range: (-PI, PI),
            objects_per_class: [10, 10, 10],
            max_attempts: 30,
        }
    }
}

impl PlacementConfig {
    pub fn validate(&self) -> Result<(), PlacementConfigError> {
        for (name, (lo, hi)) in [("x_range", self.x_range), ("y_range", self.y_range), ("rotation_range", self.rotation_range)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(PlacementConfigError(format!("{name} [{lo}, {hi}] is not a finite interval")));
            }
        }
        if self.max_attempts == 0 {
            return Err(PlacementConfigError("max_attempts must be at least 1".into()));
        }
        Ok(())
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

/// Uniform `(x, y, theta)`; `z` is kept from the source object.
pub fn sample_pose<R: Rng + ?Sized>(rng: &mut R, config: &PlacementConfig, source_cz: f64) -> Pose {
    let x = uniform(rng, config.x_range);
    let y = uniform(rng, config.y_range);
    let theta = normalize_angle(uniform(rng, config.rotation_range));
    Pose::new(x, y, source_cz, theta)
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlaceOutcome {
    Placed(LabeledObject),
    Rejected,
}

/// Tries up to `max_attempts` poses for canonical `obj`; the first whose box
/// clears every box in `occupied` wins.
pub fn try_place<R: Rng + ?Sized>(
    occupied: &[BoundingBox],
    obj: &LabeledObject,
    source_cz: f64,
    config: &PlacementConfig,
    rng: &mut R,
) -> PlaceOutcome {
    for _ in 0..config.max_attempts {
        let pose = sample_pose(rng, config, source_cz);
        let bbox = BoundingBox::new([pose.x, pose.y, pose.z], obj.bbox.extents(), pose.theta);
        if !occupied.iter().any(|b| bev_overlap(b, &bbox)) {
            return PlaceOutcome::Placed(from_canonical(obj, &pose));
        }
    }
    PlaceOutcome::Rejected
}

/// A constructed object waiting to be placed.
#[derive(Debug, Clone, PartialEq)]
pub struct Placeable {
    pub object: LabeledObject,
    pub source_cz: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PlacementReport {
    pub accepted: [usize; 3],
    pub rejected: [usize; 3],
    /// Index in `frame.objects` of the first placed object; placed objects
    /// follow contiguously.
    pub first_placed: usize,
}

/// Places every list in class order (Car, Pedestrian, Cyclist), dropping
/// rejected objects. Background points inside accepted boxes are removed.
pub fn place_all<R: Rng + ?Sized>(
    frame: &mut Frame,
    constructed: [Vec<Placeable>; 3],
    config: &PlacementConfig,
    rng: &mut R,
) -> PlacementReport {
    let mut report = PlacementReport { first_placed: frame.objects.len(), ..Default::default() };
    let mut occupied: Vec<BoundingBox> = frame.objects.iter().map(|o| o.bbox).collect();
    for (class, list) in ObjectClass::ALL.into_iter().zip(constructed) {
        for item in list {
            match try_place(&occupied, &item.object, item.source_cz, config, rng) {
                PlaceOutcome::Placed(obj) => {
                    occupied.push(obj.bbox);
                    frame.insert_object(obj);
                    report.accepted[class.index()] += 1;
                }
                PlaceOutcome::Rejected => report.rejected[class.index()] += 1,
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::seeding::rng_from_seed;

    fn car() -> LabeledObject {
        let pts = vec![Point::new(1.0, 0.5, 0.2, 0.3), Point::new(-1.5, -0.4, -0.6, 0.7)];
        LabeledObject::new(pts, ObjectClass::Car, BoundingBox::canonical(4.0, 1.8, 1.5))
    }

    #[test]
    fn degenerate_ranges_are_deterministic() {
        let cfg = PlacementConfig { x_range: (5.0, 5.0), y_range: (-2.0, -2.0), rotation_range: (0.5, 0.5), ..Default::default() };
        let pose = sample_pose(&mut rng_from_seed(1), &cfg, -0.9);
        assert_eq!(pose, Pose::new(5.0, -2.0, -0.9, 0.5));
    }

    #[test]
    fn x_is_uniform() {
        let cfg = PlacementConfig::default();
        let mut rng = rng_from_seed(11);
        let mut xs: Vec<f64> = (0..100_000).map(|_| sample_pose(&mut rng, &cfg, 0.0).x).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((33.0..=37.4).contains(&mean));
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let f = x / 70.4;
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "KS statistic {ks}");
    }

    #[test]
    fn narrow_rotation_range() {
        let cfg = PlacementConfig { rotation_range: (-PI / 4.0, PI / 4.0), ..Default::default() };
        let mut rng = rng_from_seed(2);
        for _ in 0..10_000 {
            let t = sample_pose(&mut rng, &cfg, 0.0).theta;
            assert!((-PI / 4.0..=PI / 4.0).contains(&t));
        }
    }

    #[test]
    fn empty_frame_accepts_first_pose() {
        let cfg = PlacementConfig::default();
        let expected = sample_pose(&mut rng_from_seed(4), &cfg, -0.7);
        match try_place(&[], &car(), -0.7, &cfg, &mut rng_from_seed(4)) {
            PlaceOutcome::Placed(o) => {
                assert_eq!(o.bbox.center(), [expected.x, expected.y, expected.z]);
                assert!(o.all_points_inside());
            }
            PlaceOutcome::Rejected => panic!("rejected in an empty frame"),
        }
    }

    #[test]
    fn full_range_rejects() {
        let wall = BoundingBox::new([35.2, 0.0, 0.0], [200.0, 200.0, 3.0], 0.0);
        let out = try_place(&[wall], &car(), 0.0, &PlacementConfig::default(), &mut rng_from_seed(0));
        assert_eq!(out, PlaceOutcome::Rejected);
    }

    #[test]
    fn place_all_avoids_collisions_and_clears_background() {
        let mut frame = Frame { frame_id: "x".into(), background: Vec::new(), objects: Vec::new() };
        let mut rng = rng_from_seed(5);
        for _ in 0..20_000 {
            frame.background.push(Point::new(rng.gen_range(0.0..70.4), rng.gen_range(-40.0..40.0), -1.6, 0.1));
        }
        let lists = [0, 1, 2].map(|_| (0..10).map(|_| Placeable { object: car(), source_cz: -0.8 }).collect());
        let report = place_all(&mut frame, lists, &PlacementConfig::default(), &mut rng);
        assert_eq!(report.first_placed, 0);
        assert_eq!(report.accepted.iter().sum::<usize>(), frame.objects.len());
        for (i, a) in frame.objects.iter().enumerate() {
            for b in &frame.objects[i + 1..] {
                assert!(!bev_overlap(&a.bbox, &b.bbox));
            }
            assert!(frame.background.iter().all(|p| !a.bbox.contains(p)));
        }
    }

    #[test]
    fn counts_zero_leave_frame_unchanged() {
        let mut frame = Frame { frame_id: "x".into(), background: vec![Point::new(1.0, 1.0, 1.0, 0.0)], objects: vec![car()] };
        let before = frame.clone();
        let report = place_all(&mut frame, Default::default(), &PlacementConfig::default(), &mut rng_from_seed(0));
        assert_eq!(frame, before);
        assert_eq!(report.accepted, [0, 0, 0]);
    }

    #[test]
    fn shrinking_ranges_does_not_raise_acceptance() {
        let mut totals = Vec::new();
        for scale in [1.0, 0.5, 0.2, 0.05] {
            let cfg = PlacementConfig { x_range: (0.0, 70.4 * scale), y_range: (-40.0 * scale, 40.0 * scale), ..Default::default() };
            let mut total = 0;
            for seed in 0..20 {
                let mut frame = Frame { frame_id: "x".into(), background: Vec::new(), objects: Vec::new() };
                let lists = [0, 1, 2].map(|_| (0..10).map(|_| Placeable { object: car(), source_cz: 0.0 }).collect());
                total += place_all(&mut frame, lists, &cfg, &mut rng_from_seed(seed)).accepted.iter().sum::<usize>();
            }
            totals.push(total);
        }
        assert!(totals.windows(2).all(|w| w[0] >= w[1]), "{totals:?}");
    }
}
