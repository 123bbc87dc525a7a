//! Per-class partition grids and density bookkeeping.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geometry::{LabeledObject, ObjectClass, Point};

/// Number of cells along the box's length, width and height.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PartitionGrid {
    pub nx: u32,
    pub ny: u32,
    pub nz: u32,
}

impl PartitionGrid {
    pub const fn new(nx: u32, ny: u32, nz: u32) -> Self {
        Self { nx, ny, nz }
    }

    pub fn len(&self) -> usize {
        (self.nx * self.ny * self.nz) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell of a canonical point in a box of the given extents.
    ///
    /// Per axis the cell is `floor((c + e / 2) / e * n)` clamped to `[0, n - 1]`;
    /// cells are numbered `(ix * ny + iy) * nz + iz`.
    #[inline]
    pub fn index_of(&self, p: &Point, extents: [f64; 3]) -> usize {
        let cell = |c: f64, e: f64, n: u32| -> usize {
            let f = ((c + e / 2.0) / e * n as f64).floor();
            if f.is_nan() || f < 0.0 {
                0
            } else {
                (f as usize).min(n as usize - 1)
            }
        };
        let ix = cell(p.x, extents[0], self.nx);
        let iy = cell(p.y, extents[1], self.ny);
        let iz = cell(p.z, extents[2], self.nz);
        (ix * self.ny as usize + iy) * self.nz as usize + iz
    }
}

impl fmt::Display for PartitionGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.nx, self.ny, self.nz)
    }
}

impl FromStr for PartitionGrid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<u32> = s
            .split('x')
            .map(|t| t.trim().parse::<u32>().map_err(|_| format!("bad grid `{s}`")))
            .collect::<Result<_, _>>()?;
        match parts.as_slice() {
            &[nx, ny, nz] if nx >= 1 && ny >= 1 && nz >= 1 => Ok(Self { nx, ny, nz }),
            _ => Err(format!("grid `{s}` must be NXxNYxNZ with every count >= 1")),
        }
    }
}

/// Grid per class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassGrids(pub [PartitionGrid; 3]);

impl ClassGrids {
    pub fn get(&self, class: ObjectClass) -> PartitionGrid {
        self.0[class.index()]
    }
}

impl Default for ClassGrids {
    fn default() -> Self {
        // Cars and cyclists are long, pedestrians tall.
        ClassGrids([PartitionGrid::new(4, 2, 2), PartitionGrid::new(2, 2, 4), PartitionGrid::new(4, 2, 2)])
    }
}

/// Raw point count per cell of a canonical object.
pub fn partition_counts(obj: &LabeledObject, grid: PartitionGrid) -> Vec<u32> {
    let mut counts = vec![0u32; grid.len()];
    let extents = obj.bbox.extents();
    for p in &obj.points {
        counts[grid.index_of(p, extents)] += 1;
    }
    counts
}

/// `count / max` per cell, `0` where the class maximum is `0`, capped at `1`.
pub fn partition_densities(counts: &[u32], maxima: &[u32]) -> Vec<f64> {
    counts
        .iter()
        .zip(maxima)
        .map(|(&c, &m)| if m == 0 { 0.0 } else { (c as f64 / m as f64).min(1.0) })
        .collect()
}

/// Mean density over the non-empty cells, `None` if every cell is empty.
pub fn mean_nonempty(densities: &[f64]) -> Option<f64> {
    let (sum, n) = densities
        .iter()
        .filter(|d| **d > 0.0)
        .fold((0.0, 0usize), |(s, n), d| (s + d, n + 1));
    (n > 0).then(|| sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundingBox;

    fn canonical(points: Vec<Point>, extents: [f64; 3]) -> LabeledObject {
        LabeledObject::new(points, ObjectClass::Car, BoundingBox::canonical(extents[0], extents[1], extents[2]))
    }

    #[test]
    fn empty_object_counts_zero() {
        let obj = canonical(vec![], [4.0, 2.0, 1.5]);
        assert_eq!(partition_counts(&obj, PartitionGrid::new(4, 2, 2)), vec![0; 16]);
    }

    #[test]
    fn single_cell_grid_counts_everything() {
        let pts = (0..13).map(|i| Point::new(i as f64 * 0.1 - 0.6, 0.0, 0.0, 0.0)).collect();
        let obj = canonical(pts, [4.0, 2.0, 1.5]);
        assert_eq!(partition_counts(&obj, PartitionGrid::new(1, 1, 1)), vec![13]);
    }

    #[test]
    fn corners_fill_each_cell_once() {
        let (l, w, h) = (4.0, 2.0, 1.5);
        let mut pts = Vec::new();
        for sx in [-0.5, 0.5] {
            for sy in [-0.5, 0.5] {
                for sz in [-0.5, 0.5] {
                    pts.push(Point::new(sx * l, sy * w, sz * h, 0.1));
                }
            }
        }
        let obj = canonical(pts, [l, w, h]);
        assert_eq!(partition_counts(&obj, PartitionGrid::new(2, 2, 2)), vec![1; 8]);
    }

    #[test]
    fn cell_numbering() {
        let grid = PartitionGrid::new(4, 2, 2);
        let ext = [4.0, 2.0, 2.0];
        assert_eq!(grid.index_of(&Point::new(-1.9, -0.9, -0.9, 0.0), ext), 0);
        assert_eq!(grid.index_of(&Point::new(-1.9, -0.9, 0.9, 0.0), ext), 1);
        assert_eq!(grid.index_of(&Point::new(-1.9, 0.9, -0.9, 0.0), ext), 2);
        assert_eq!(grid.index_of(&Point::new(1.9, 0.9, 0.9, 0.0), ext), 15);
        // Outside the box clamps to the border cell.
        assert_eq!(grid.index_of(&Point::new(9.0, 9.0, 9.0, 0.0), ext), 15);
        assert_eq!(grid.index_of(&Point::new(-9.0, -9.0, -9.0, 0.0), ext), 0);
    }

    #[test]
    fn density_examples() {
        assert_eq!(partition_densities(&[4, 2, 0, 2], &[4, 4, 4, 4]), vec![1.0, 0.5, 0.0, 0.5]);
        assert_eq!(partition_densities(&[3, 7], &[3, 7]), vec![1.0, 1.0]);
        assert_eq!(partition_densities(&[0, 5], &[0, 5]), vec![0.0, 1.0]);
        assert_eq!(partition_densities(&[9], &[3]), vec![1.0]);
    }

    #[test]
    fn grid_parsing() {
        assert_eq!("4x2x2".parse::<PartitionGrid>().unwrap(), PartitionGrid::new(4, 2, 2));
        assert!("4x2".parse::<PartitionGrid>().is_err());
        assert!("0x2x2".parse::<PartitionGrid>().is_err());
        assert_eq!(PartitionGrid::new(2, 2, 4).to_string(), "2x2x4");
    }
}
