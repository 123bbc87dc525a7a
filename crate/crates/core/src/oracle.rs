//! Brute-force reference implementations used to check the production paths.
//!
//! Nothing here calls into the hull, HPR or candidate-index code; each oracle
//! restates its rule directly and trades speed for obviousness.

use std::cmp::Ordering;
use std::f64::consts::PI;

use thiserror::Error;

use crate::geometry::ObjectClass;

pub const MAX_BRUTE_HULL_POINTS: usize = 300;
pub const MIN_ANGULAR_BINS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("{0} points exceeds the brute-force limit of {MAX_BRUTE_HULL_POINTS}")]
    TooManyPoints(usize),
    #[error("angular oracle needs at least {MIN_ANGULAR_BINS} bins per axis")]
    TooFewBins,
}

fn diff(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Hull vertices by facet enumeration: a triple spans a facet when every
/// other point lies weakly on one side of its plane. O(n^4).
pub fn brute_hull_vertices(points: &[[f64; 3]]) -> Result<Vec<usize>, OracleError> {
    let n = points.len();
    if n > MAX_BRUTE_HULL_POINTS {
        return Err(OracleError::TooManyPoints(n));
    }
    if n < 4 {
        return Ok((0..n).collect());
    }
    let scale = points
        .iter()
        .flat_map(|p| p.iter())
        .fold(0.0f64, |m, c| m.max(c.abs()))
        .max(1.0);
    let tol = 1e-10 * scale;
    let mut is_vertex = vec![false; n];
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let u = diff(&points[j], &points[i]);
                let v = diff(&points[k], &points[i]);
                let nx = u[1] * v[2] - u[2] * v[1];
                let ny = u[2] * v[0] - u[0] * v[2];
                let nz = u[0] * v[1] - u[1] * v[0];
                let len = (nx * nx + ny * ny + nz * nz).sqrt();
                if len <= tol * tol {
                    continue;
                }
                let (mut above, mut below) = (false, false);
                for (m, q) in points.iter().enumerate() {
                    if m == i || m == j || m == k {
                        continue;
                    }
                    let w = diff(q, &points[i]);
                    let side = (nx * w[0] + ny * w[1] + nz * w[2]) / len;
                    above |= side > tol;
                    below |= side < -tol;
                    if above && below {
                        break;
                    }
                }
                if !(above && below) {
                    is_vertex[i] = true;
                    is_vertex[j] = true;
                    is_vertex[k] = true;
                }
            }
        }
    }
    Ok((0..n).filter(|&i| is_vertex[i]).collect())
}

/// Visibility by reflection through a sphere of radius `radius` around
/// `viewpoint` followed by [`brute_hull_vertices`] over the images plus the
/// viewpoint itself.
pub fn brute_hpr_visible(points: &[[f64; 3]], viewpoint: [f64; 3], radius: f64) -> Result<Vec<usize>, OracleError> {
    let mut images: Vec<[f64; 3]> = points
        .iter()
        .map(|p| {
            let d = diff(p, &viewpoint);
            let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            let scale = 2.0 * radius / len - 1.0;
            [d[0] * scale, d[1] * scale, d[2] * scale]
        })
        .collect();
    images.push([0.0; 3]);
    let n = points.len();
    Ok(brute_hull_vertices(&images)?.into_iter().filter(|&i| i < n).collect())
}

/// Physical LiDAR model: bucket returns by azimuth and elevation from the
/// viewpoint and keep only the nearest point of each bucket.
pub fn angular_shadow_visible(
    points: &[[f64; 3]],
    viewpoint: [f64; 3],
    az_bins: usize,
    el_bins: usize,
) -> Result<Vec<usize>, OracleError> {
    if az_bins < MIN_ANGULAR_BINS || el_bins < MIN_ANGULAR_BINS {
        return Err(OracleError::TooFewBins);
    }
    let mut nearest: Vec<Option<(f64, usize)>> = vec![None; az_bins * el_bins];
    for (i, p) in points.iter().enumerate() {
        let d = diff(p, &viewpoint);
        let horizontal = d[0].hypot(d[1]);
        let range = horizontal.hypot(d[2]);
        if range == 0.0 {
            continue;
        }
        let az = d[1].atan2(d[0]);
        let el = d[2].atan2(horizontal);
        let a = (((az + PI) / (2.0 * PI)) * az_bins as f64).floor() as usize;
        let e = (((el + PI / 2.0) / PI) * el_bins as f64).floor() as usize;
        let bin = a.min(az_bins - 1) * el_bins + e.min(el_bins - 1);
        match nearest[bin] {
            Some((r, _)) if r <= range => {}
            _ => nearest[bin] = Some((range, i)),
        }
    }
    let mut visible: Vec<usize> = nearest.into_iter().flatten().map(|(_, i)| i).collect();
    visible.sort_unstable();
    Ok(visible)
}

/// Minimal description of a database object for [`brute_candidate_ranking`].
#[derive(Debug, Clone, PartialEq)]
pub struct RankingObject {
    pub id: u32,
    pub class: ObjectClass,
    pub extents: [f64; 3],
    pub densities: Vec<f64>,
}

/// Exhaustive candidate ranking for `source_id`.
///
/// Every same-class object is scored by canonical box IoU; the best `2k`
/// (ties by ascending id) are re-scored by the sum of their densities over the
/// source's deficient partitions (below the mean of its non-empty partitions,
/// or all partitions if it has none) and the best `k` are returned, ties
/// broken by IoU and then id.
pub fn brute_candidate_ranking(objects: &[RankingObject], source_id: u32, k: usize) -> Vec<u32> {
    let Some(source) = objects.iter().find(|o| o.id == source_id) else {
        return Vec::new();
    };
    let iou = |other: &RankingObject| {
        let a = source.extents;
        let b = other.extents;
        let inter = a[0].min(b[0]) * a[1].min(b[1]) * a[2].min(b[2]);
        inter / (a[0] * a[1] * a[2] + b[0] * b[1] * b[2] - inter)
    };
    let mut pool: Vec<(f64, u32, &RankingObject)> = objects
        .iter()
        .filter(|o| o.class == source.class && o.id != source.id)
        .map(|o| (iou(o), o.id, o))
        .collect();
    pool.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
    pool.truncate(2 * k);

    let filled: Vec<f64> = source.densities.iter().copied().filter(|d| *d > 0.0).collect();
    let deficient: Vec<usize> = if filled.is_empty() {
        (0..source.densities.len()).collect()
    } else {
        let mean = filled.iter().sum::<f64>() / filled.len() as f64;
        (0..source.densities.len()).filter(|&p| source.densities[p] < mean).collect()
    };
    let mut scored: Vec<(f64, f64, u32)> = pool
        .into_iter()
        .map(|(sim, id, o)| {
            let mut score = 0.0;
            for &p in &deficient {
                score += o.densities[p];
            }
            (score, sim, id)
        })
        .collect();
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(Ordering::Equal)
            .then(b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal))
            .then(a.2.cmp(&b.2))
    });
    scored.into_iter().take(k).map(|(_, _, id)| id).collect()
}
