//! Binned-SAH bounding volume hierarchy over triangles.

use crate::math::{Aabb, Ray, Vec3};

const LEAF_SIZE: usize = 4;
const BINS: usize = 12;

#[derive(Clone, Debug)]
struct Node {
    bounds: Aabb,
    /// Leaf: first index into `order`; interior: index of the left child (right is `left + 1`).
    start: u32,
    /// Number of primitives for leaves, zero for interior nodes.
    count: u32,
}

#[derive(Clone, Debug, Default)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
}

/// Closest primitive hit: distance and barycentrics of vertices 1 and 2.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrimHit {
    pub prim: u32,
    pub t: f64,
    pub b1: f64,
    pub b2: f64,
}

/// Möller–Trumbore. Returns `(t, b1, b2)` for hits with `t_min < t < t_max`.
#[inline]
pub fn intersect_triangle(
    ray: &Ray,
    p0: Vec3<f64>,
    p1: Vec3<f64>,
    p2: Vec3<f64>,
    t_min: f64,
    t_max: f64,
) -> Option<(f64, f64, f64)> {
    let e1 = p1 - p0;
    let e2 = p2 - p0;
    let pvec = ray.direction.cross(e2);
    let det = e1.dot(pvec);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv_det = 1.0 / det;
    let tvec = ray.origin - p0;
    let b1 = tvec.dot(pvec) * inv_det;
    if !(0.0..=1.0).contains(&b1) {
        return None;
    }
    let qvec = tvec.cross(e1);
    let b2 = ray.direction.dot(qvec) * inv_det;
    if b2 < 0.0 || b1 + b2 > 1.0 {
        return None;
    }
    let t = e2.dot(qvec) * inv_det;
    if t > t_min && t < t_max {
        Some((t, b1, b2))
    } else {
        None
    }
}

impl Bvh {
    pub fn build(tri_bounds: &[Aabb]) -> Self {
        let n = tri_bounds.len();
        let mut bvh = Bvh { nodes: Vec::with_capacity(2 * n.max(1)), order: (0..n as u32).collect() };
        let centroids: Vec<Vec3<f64>> = tri_bounds.iter().map(|b| b.centroid()).collect();
        bvh.nodes.push(Node { bounds: Aabb::empty(), start: 0, count: n as u32 });
        if n > 0 {
            bvh.subdivide(0, 0, n, tri_bounds, &centroids);
        }
        bvh
    }

    fn subdivide(&mut self, node: usize, start: usize, end: usize, tri_bounds: &[Aabb], centroids: &[Vec3<f64>]) {
        let mut bounds = Aabb::empty();
        let mut cbounds = Aabb::empty();
        for &p in &self.order[start..end] {
            bounds = bounds.union(&tri_bounds[p as usize]);
            cbounds.grow(centroids[p as usize]);
        }
        self.nodes[node].bounds = bounds;
        self.nodes[node].start = start as u32;
        self.nodes[node].count = (end - start) as u32;
        let count = end - start;
        if count <= LEAF_SIZE {
            return;
        }

        let ext = cbounds.extent();
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        let lo = cbounds.min[axis];
        let span = ext[axis];
        let split = if span <= 1e-12 {
            None
        } else {
            self.best_sah_split(start, end, axis, lo, span, tri_bounds, centroids, bounds.surface_area())
        };
        let mid = match split {
            Some(bin) => {
                let order = &mut self.order[start..end];
                let bin_of = |p: u32| (((centroids[p as usize][axis] - lo) / span * BINS as f64) as usize).min(BINS - 1);
                let mut i = 0;
                let mut j = order.len();
                while i < j {
                    if bin_of(order[i]) <= bin {
                        i += 1;
                    } else {
                        j -= 1;
                        order.swap(i, j);
                    }
                }
                start + i
            }
            None => {
                if count <= 2 * LEAF_SIZE && span <= 1e-12 {
                    return;
                }
                // median split on the widest centroid axis
                let order = &mut self.order[start..end];
                order.sort_by(|a, b| centroids[*a as usize][axis].total_cmp(&centroids[*b as usize][axis]));
                start + count / 2
            }
        };
        if mid == start || mid == end {
            return;
        }
        let left = self.nodes.len();
        self.nodes.push(Node { bounds: Aabb::empty(), start: 0, count: 0 });
        self.nodes.push(Node { bounds: Aabb::empty(), start: 0, count: 0 });
        self.nodes[node].start = left as u32;
        self.nodes[node].count = 0;
        self.subdivide(left, start, mid, tri_bounds, centroids);
        self.subdivide(left + 1, mid, end, tri_bounds, centroids);
    }

    #[allow(clippy::too_many_arguments)]
    fn best_sah_split(
        &self,
        start: usize,
        end: usize,
        axis: usize,
        lo: f64,
        span: f64,
        tri_bounds: &[Aabb],
        centroids: &[Vec3<f64>],
        parent_area: f64,
    ) -> Option<usize> {
        let mut bin_bounds = [Aabb::empty(); BINS];
        let mut bin_counts = [0usize; BINS];
        for &p in &self.order[start..end] {
            let b = (((centroids[p as usize][axis] - lo) / span * BINS as f64) as usize).min(BINS - 1);
            bin_bounds[b] = bin_bounds[b].union(&tri_bounds[p as usize]);
            bin_counts[b] += 1;
        }
        let mut best = None;
        let mut best_cost = (end - start) as f64;
        for split in 0..BINS - 1 {
            let (mut lb, mut rb) = (Aabb::empty(), Aabb::empty());
            let (mut lc, mut rc) = (0, 0);
            for b in 0..=split {
                lb = lb.union(&bin_bounds[b]);
                lc += bin_counts[b];
            }
            for b in split + 1..BINS {
                rb = rb.union(&bin_bounds[b]);
                rc += bin_counts[b];
            }
            if lc == 0 || rc == 0 {
                continue;
            }
            let cost = 0.125 + (lc as f64 * lb.surface_area() + rc as f64 * rb.surface_area()) / parent_area.max(1e-300);
            if cost < best_cost {
                best_cost = cost;
                best = Some(split);
            }
        }
        best
    }

    /// Closest hit in `(t_min, t_max)`; `test` intersects one primitive.
    pub fn closest(
        &self,
        ray: &Ray,
        t_min: f64,
        t_max: f64,
        mut test: impl FnMut(u32, f64) -> Option<(f64, f64, f64)>,
    ) -> Option<PrimHit> {
        if self.order.is_empty() {
            return None;
        }
        let inv = Vec3::new(1.0 / ray.direction.x, 1.0 / ray.direction.y, 1.0 / ray.direction.z);
        let mut best: Option<PrimHit> = None;
        let mut limit = t_max;
        let mut stack = [0u32; 64];
        let mut sp = 0;
        if self.nodes[0].bounds.hit(ray.origin, inv, limit).is_none() {
            return None;
        }
        stack[sp] = 0;
        sp += 1;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp] as usize];
            if node.count > 0 {
                let s = node.start as usize;
                for &p in &self.order[s..s + node.count as usize] {
                    if let Some((t, b1, b2)) = test(p, limit) {
                        if t > t_min && t < limit {
                            // ties broken by primitive id so traversal order never matters
                            let replace = match best {
                                Some(h) => t < h.t || (t == h.t && p < h.prim),
                                None => true,
                            };
                            if replace {
                                best = Some(PrimHit { prim: p, t, b1, b2 });
                                limit = t;
                            }
                        }
                    }
                }
                continue;
            }
            let l = node.start as usize;
            let r = l + 1;
            let tl = self.nodes[l].bounds.hit(ray.origin, inv, limit);
            let tr = self.nodes[r].bounds.hit(ray.origin, inv, limit);
            match (tl, tr) {
                (Some(a), Some(b)) => {
                    let (near, far) = if a <= b { (l, r) } else { (r, l) };
                    stack[sp] = far as u32;
                    stack[sp + 1] = near as u32;
                    sp += 2;
                }
                (Some(_), None) => {
                    stack[sp] = l as u32;
                    sp += 1;
                }
                (None, Some(_)) => {
                    stack[sp] = r as u32;
                    sp += 1;
                }
                (None, None) => {}
            }
        }
        best
    }

    /// True if any primitive is hit in `(t_min, t_max)`.
    pub fn any(&self, ray: &Ray, t_max: f64, mut test: impl FnMut(u32) -> bool) -> bool {
        if self.order.is_empty() {
            return false;
        }
        let inv = Vec3::new(1.0 / ray.direction.x, 1.0 / ray.direction.y, 1.0 / ray.direction.z);
        let mut stack = [0u32; 64];
        let mut sp = 1;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp] as usize];
            if node.bounds.hit(ray.origin, inv, t_max).is_none() {
                continue;
            }
            if node.count > 0 {
                let s = node.start as usize;
                if self.order[s..s + node.count as usize].iter().any(|&p| test(p)) {
                    return true;
                }
            } else {
                stack[sp] = node.start;
                stack[sp + 1] = node.start + 1;
                sp += 2;
            }
        }
        false
    }

    /// Checks that every node's bounds contain all primitives below it.
    pub fn validate(&self, tri_bounds: &[Aabb]) -> bool {
        fn walk(bvh: &Bvh, node: usize, tri_bounds: &[Aabb], seen: &mut usize) -> Option<Aabb> {
            let n = &bvh.nodes[node];
            let content = if n.count > 0 {
                let s = n.start as usize;
                *seen += n.count as usize;
                bvh.order[s..s + n.count as usize]
                    .iter()
                    .fold(Aabb::empty(), |acc, &p| acc.union(&tri_bounds[p as usize]))
            } else {
                let a = walk(bvh, n.start as usize, tri_bounds, seen)?;
                let b = walk(bvh, n.start as usize + 1, tri_bounds, seen)?;
                a.union(&b)
            };
            let ok = n.bounds.contains(content.min, 0.0) && n.bounds.contains(content.max, 0.0);
            ok.then_some(n.bounds)
        }
        if self.order.is_empty() {
            return true;
        }
        let mut seen = 0;
        walk(self, 0, tri_bounds, &mut seen).is_some() && seen == tri_bounds.len()
    }
}
