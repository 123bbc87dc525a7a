//! Incremental 3D convex hull returning the set of hull vertices.
//!
//! Faces are triangles stored with outward normals and explicit adjacency
//! (`adj[k]` is the face across edge `v[k] -> v[k + 1]`). Points are inserted
//! in Morton order. Each one is located by walking to the face pierced by the
//! ray from a fixed interior point, which decides inside/outside directly; an
//! outside point replaces its visible region by a cone of new faces. The
//! horizon is found with an ordered depth-first walk over visible faces, so
//! the cone can be stitched without an edge map. Distances below a tolerance
//! scaled to the input's magnitude count as "on the plane".

use thiserror::Error;

pub(crate) type V3 = [f64; 3];

#[inline]
pub(crate) fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross(a: V3, b: V3) -> V3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
pub(crate) fn norm(a: V3) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum HullError {
    #[error("fewer than four points")]
    TooFewPoints,
    #[error("input is coincident, collinear or coplanar")]
    Degenerate,
    #[error("horizon is not a simple cycle")]
    Topology,
}

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy)]
struct Face {
    v: [u32; 3],
    adj: [u32; 3],
    alive: bool,
}

#[derive(Clone, Copy)]
struct HorizonEdge {
    a: u32,
    b: u32,
    face: u32,
    edge: usize,
}

struct Hull<'a> {
    points: &'a [V3],
    tol: f64,
    /// Strictly interior point of the hull, fixed once the simplex exists.
    center: V3,
    faces: Vec<Face>,
    /// Per face: unnormalized normal `n`, offset `n . v0` and `|n|^2`.
    planes: Vec<[f64; 5]>,
    free: Vec<u32>,
    mark: Vec<u32>,
    epoch: u32,
    // Scratch buffers reused across insertions.
    visible: Vec<u32>,
    horizon: Vec<HorizonEdge>,
    stack: Vec<(u32, usize, usize)>,
    cone: Vec<u32>,
}

impl<'a> Hull<'a> {
    fn new_face(&mut self, v: [u32; 3]) -> u32 {
        let p = v.map(|i| self.points[i as usize]);
        let n = cross(sub(p[1], p[0]), sub(p[2], p[0]));
        let plane = [n[0], n[1], n[2], dot(n, p[0]), dot(n, n)];
        let face = Face { v, adj: [NONE; 3], alive: true };
        match self.free.pop() {
            Some(id) => {
                self.faces[id as usize] = face;
                self.planes[id as usize] = plane;
                id
            }
            None => {
                self.faces.push(face);
                self.planes.push(plane);
                self.mark.push(0);
                (self.faces.len() - 1) as u32
            }
        }
    }

    /// Whether `p` lies more than the tolerance above the face's plane.
    #[inline]
    fn above(&self, face: u32, p: V3) -> bool {
        let [a, b, c, d, nn] = self.planes[face as usize];
        let h = a * p[0] + b * p[1] + c * p[2] - d;
        h > 0.0 && h * h > self.tol * self.tol * nn
    }

    fn initial_simplex(&mut self) -> Result<[u32; 4], HullError> {
        let pts = self.points;
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for (i, p) in pts.iter().enumerate() {
            for axis in 0..3 {
                if p[axis] < pts[lo[axis]][axis] {
                    lo[axis] = i;
                }
                if p[axis] > pts[hi[axis]][axis] {
                    hi[axis] = i;
                }
            }
        }
        let (mut i0, mut i1, mut best) = (0, 0, -1.0);
        for axis in 0..3 {
            let d = norm(sub(pts[hi[axis]], pts[lo[axis]]));
            if d > best {
                (i0, i1, best) = (lo[axis], hi[axis], d);
            }
        }
        if best <= self.tol {
            return Err(HullError::Degenerate);
        }
        let dir = sub(pts[i1], pts[i0]);
        let (mut i2, mut best) = (0, -1.0);
        for (i, p) in pts.iter().enumerate() {
            let d = norm(cross(sub(*p, pts[i0]), dir));
            if d > best {
                (i2, best) = (i, d);
            }
        }
        if best / norm(dir) <= self.tol {
            return Err(HullError::Degenerate);
        }
        let n = cross(dir, sub(pts[i2], pts[i0]));
        let n_len = norm(n);
        let (mut i3, mut best) = (0, 0.0f64);
        for (i, p) in pts.iter().enumerate() {
            let d = dot(n, sub(*p, pts[i0])) / n_len;
            if d.abs() > best.abs() {
                (i3, best) = (i, d);
            }
        }
        if best.abs() <= self.tol {
            return Err(HullError::Degenerate);
        }
        let (a, b, c, d) = (i0 as u32, i1 as u32, i2 as u32, i3 as u32);
        // Base face must have the apex behind it.
        let (b, c) = if best > 0.0 { (c, b) } else { (b, c) };
        for v in [[a, b, c], [a, d, b], [b, d, c], [c, d, a]] {
            self.new_face(v);
        }
        for f in 0..4 {
            for k in 0..3 {
                let (u, w) = (self.faces[f].v[k], self.faces[f].v[(k + 1) % 3]);
                let g = (0..4)
                    .find(|&g| g != f && (0..3).any(|j| self.faces[g].v[j] == w && self.faces[g].v[(j + 1) % 3] == u))
                    .ok_or(HullError::Topology)?;
                self.faces[f].adj[k] = g as u32;
            }
        }
        let corners = [a, b, c, d].map(|i| pts[i as usize]);
        self.center = [0, 1, 2].map(|axis| corners.iter().map(|p| p[axis]).sum::<f64>() / 4.0);
        Ok([a, b, c, d])
    }

    /// Walks from `start` to the face pierced by the ray from the center
    /// through `p`. Gives up after a bounded number of steps.
    fn locate(&self, p: V3, start: u32) -> Option<u32> {
        let o = self.center;
        let d = sub(p, o);
        let mut f = start;
        let limit = 64 + self.faces.len();
        for _ in 0..limit {
            let face = &self.faces[f as usize];
            let r = sub(self.points[face.v[0] as usize], o);
            let s = sub(self.points[face.v[1] as usize], o);
            let t = sub(self.points[face.v[2] as usize], o);
            // Cross the edge whose plane through the center separates `p` the most.
            let mut next = NONE;
            let mut worst = 0.0;
            for (k, (a, b)) in [(r, s), (s, t), (t, r)].into_iter().enumerate() {
                let side = dot(cross(a, b), d);
                if side < worst {
                    (next, worst) = (face.adj[k], side);
                }
            }
            if next == NONE {
                return Some(f);
            }
            f = next;
        }
        None
    }

    fn find_horizon(&mut self, eye: V3, start: u32) -> Result<(), HullError> {
        self.epoch += 1;
        let epoch = self.epoch;
        self.mark[start as usize] = epoch;
        self.visible.clear();
        self.horizon.clear();
        self.stack.clear();
        self.visible.push(start);
        self.stack.push((start, 0, 0));
        while let Some(top) = self.stack.last_mut() {
            let (f, first, k) = *top;
            if k == 3 {
                self.stack.pop();
                continue;
            }
            top.2 += 1;
            let e = (first + k) % 3;
            let face = &self.faces[f as usize];
            let g = face.adj[e];
            if self.mark[g as usize] == epoch {
                continue;
            }
            let (a, b) = (face.v[e], face.v[(e + 1) % 3]);
            let gv = self.faces[g as usize].v;
            let back = (0..3).find(|&j| gv[j] == b && gv[(j + 1) % 3] == a).ok_or(HullError::Topology)?;
            if self.above(g, eye) {
                self.mark[g as usize] = epoch;
                self.visible.push(g);
                self.stack.push((g, back + 1, 0));
            } else {
                self.horizon.push(HorizonEdge { a, b, face: g, edge: back });
            }
        }
        let h = &self.horizon;
        let m = h.len();
        if m < 3 || (0..m).any(|i| h[i].b != h[(i + 1) % m].a) {
            return Err(HullError::Topology);
        }
        Ok(())
    }

    /// Replaces the faces visible from point `eye` (starting at visible face
    /// `start`) by a cone; returns one of the new faces.
    fn add_point(&mut self, eye: u32, start: u32) -> Result<u32, HullError> {
        self.find_horizon(self.points[eye as usize], start)?;
        for &f in &self.visible {
            self.faces[f as usize].alive = false;
        }
        self.free.extend_from_slice(&self.visible);

        self.cone.clear();
        for i in 0..self.horizon.len() {
            let h = self.horizon[i];
            let id = self.new_face([h.a, h.b, eye]);
            self.cone.push(id);
        }
        let m = self.cone.len();
        for i in 0..m {
            let h = self.horizon[i];
            let id = self.cone[i];
            self.faces[id as usize].adj = [h.face, self.cone[(i + 1) % m], self.cone[(i + m - 1) % m]];
            self.faces[h.face as usize].adj[h.edge] = id;
        }
        Ok(self.cone[0])
    }

    fn insert(&mut self, i: u32, hint: u32) -> Result<u32, HullError> {
        let p = self.points[i as usize];
        match self.locate(p, hint) {
            Some(f) if self.above(f, p) => self.add_point(i, f),
            Some(f) => Ok(f),
            None => {
                // The walk did not settle; fall back to a scan for any visible face.
                let visible = (0..self.faces.len() as u32).find(|&f| self.faces[f as usize].alive && self.above(f, p));
                match visible {
                    Some(f) => self.add_point(i, f),
                    None => Ok(hint),
                }
            }
        }
    }
}

/// Spreads the low 10 bits of `x` so that two zero bits separate each.
fn spread10(mut x: u64) -> u64 {
    x &= 0x3ff;
    x = (x | (x << 16)) & 0x0300_00ff;
    x = (x | (x << 8)) & 0x0300_f00f;
    x = (x | (x << 4)) & 0x030c_30c3;
    x = (x | (x << 2)) & 0x0924_9249;
    x
}

/// Point indices sorted along a Morton curve over the bounding box.
fn spatial_order(points: &[V3]) -> Vec<u32> {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for axis in 0..3 {
            lo[axis] = lo[axis].min(p[axis]);
            hi[axis] = hi[axis].max(p[axis]);
        }
    }
    let scale = [0, 1, 2].map(|axis| if hi[axis] > lo[axis] { 1023.0 / (hi[axis] - lo[axis]) } else { 0.0 });
    // Morton code in the high bits, index in the low 32.
    let mut keys: Vec<u64> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let cell = |axis: usize| spread10(((p[axis] - lo[axis]) * scale[axis]) as u64);
            ((cell(0) | cell(1) << 1 | cell(2) << 2) << 32) | i as u64
        })
        .collect();
    keys.sort_unstable();
    keys.into_iter().map(|k| k as u32).collect()
}

/// Flags the hull vertices of `points`. No jitter is applied here.
pub(crate) fn hull_vertex_mask(points: &[V3]) -> Result<Vec<bool>, HullError> {
    if points.len() < 4 {
        return Err(HullError::TooFewPoints);
    }
    if points.len() >= NONE as usize {
        return Err(HullError::Degenerate);
    }
    let mut max_abs = [0.0f64; 3];
    for p in points {
        for axis in 0..3 {
            if !p[axis].is_finite() {
                return Err(HullError::Degenerate);
            }
            max_abs[axis] = max_abs[axis].max(p[axis].abs());
        }
    }
    let tol = 3.0 * f64::EPSILON * (max_abs[0] + max_abs[1] + max_abs[2]);
    let capacity = 2 * points.len() + 16;
    let mut hull = Hull {
        points,
        tol,
        center: [0.0; 3],
        faces: Vec::with_capacity(capacity),
        planes: Vec::with_capacity(capacity),
        free: Vec::new(),
        mark: Vec::with_capacity(capacity),
        epoch: 0,
        visible: Vec::new(),
        horizon: Vec::new(),
        stack: Vec::new(),
        cone: Vec::new(),
    };
    let simplex = hull.initial_simplex()?;
    let order = spatial_order(points);
    let mut hint = 0;
    // Coarse rounds first (every 64th, 16th, 4th point, then the rest).
    for (stride, skip) in [(64, usize::MAX), (16, 64), (4, 16), (1, 4)] {
        for (pos, &i) in order.iter().enumerate().step_by(stride) {
            if (skip != usize::MAX && pos % skip == 0) || simplex.contains(&i) {
                continue;
            }
            hint = hull.insert(i, hint)?;
        }
    }
    let mut mask = vec![false; points.len()];
    for face in hull.faces.iter().filter(|f| f.alive) {
        for &v in &face.v {
            mask[v as usize] = true;
        }
    }
    Ok(mask)
}
