use std::f64::consts::PI;

use drcpo_core::geometry::{bev_overlap, BoundingBox};
use drcpo_core::seeding::rng_from_seed;
use rand::Rng;

type P = [f64; 2];

fn orient(a: P, b: P, c: P) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: P, b: P, p: P) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

fn segments_meet(a: P, b: P, c: P, d: P) -> bool {
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

/// Point in a counter-clockwise convex polygon, boundary included.
fn inside(poly: &[P; 4], p: P) -> bool {
    (0..4).all(|i| orient(poly[i], poly[(i + 1) % 4], p) >= 0.0)
}

/// Edge-intersection plus containment, independent of any projection argument.
fn polygons_meet(a: &[P; 4], b: &[P; 4]) -> bool {
    for i in 0..4 {
        for j in 0..4 {
            if segments_meet(a[i], a[(i + 1) % 4], b[j], b[(j + 1) % 4]) {
                return true;
            }
        }
    }
    inside(b, a[0]) || inside(a, b[0])
}

/// Dense sampling of `a` (interior and boundary) against `b`; a hit proves overlap.
fn sampled_hit(a: &BoundingBox, b: &[P; 4]) -> bool {
    let (s, c) = a.theta.sin_cos();
    let (nu, nv) = (80, 40);
    for i in 0..=nu {
        for j in 0..=nv {
            let u = a.l * (i as f64 / nu as f64 - 0.5);
            let v = a.w * (j as f64 / nv as f64 - 0.5);
            if inside(b, [a.cx + c * u - s * v, a.cy + s * u + c * v]) {
                return true;
            }
        }
    }
    false
}

fn rect(center: P, theta: f64) -> BoundingBox {
    BoundingBox::new([center[0], center[1], 0.0], [4.0, 2.0, 1.5], theta)
}

#[test]
fn near_touching_rotated_pairs_match_exact_and_sampling_oracles() {
    let mut rng = rng_from_seed(0xBE7);
    let mut hits = 0;
    for pair in 0..10_000 {
        let theta = rng.gen_range(-PI..PI);
        let a = rect([0.0, 0.0], theta);
        let dir = rng.gen_range(-PI..PI);
        let (s, c) = dir.sin_cos();
        let b_at = |t: f64| rect([t * c, t * s], theta + PI / 4.0);
        // Distance at which the pair starts to touch, by bisection on the exact oracle.
        let (mut lo, mut hi) = (0.0, 10.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if polygons_meet(&a.bev_corners(), &b_at(mid).bev_corners()) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let rel = if pair % 2 == 0 { rng.gen_range(1e-6..1e-2) } else { rng.gen_range(1e-2..0.5) };
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let b = b_at(lo * (1.0 + sign * rel));
        let (ca, cb) = (a.bev_corners(), b.bev_corners());
        let exact = polygons_meet(&ca, &cb);
        assert_eq!(bev_overlap(&a, &b), exact, "pair {pair}");
        assert_eq!(bev_overlap(&b, &a), exact, "pair {pair} swapped");
        if sampled_hit(&a, &cb) {
            hits += 1;
            assert!(bev_overlap(&a, &b), "pair {pair}: sampled point inside both");
        }
    }
    assert!(hits > 1000);
}

#[test]
fn shared_edge_counts_as_overlap() {
    let a = rect([0.0, 0.0], 0.0);
    assert!(bev_overlap(&a, &rect([4.0, 0.0], 0.0)));
    assert!(bev_overlap(&a, &rect([0.0, 2.0], 0.0)));
    assert!(!bev_overlap(&a, &rect([4.0 + 1e-9, 0.0], 0.0)));
}
