use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::bvh::{intersect_triangle, Bvh, PrimHit};
use super::texture::Frame;
use crate::error::{Error, Result};
use crate::math::{Aabb, Ray, Vec3};

/// Minimum hit distance; guards against self-intersection.
pub const RAY_EPSILON: f64 = 1e-4;

/// Ray–mesh intersection record.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub x0: Vec3<f64>,
    pub uv: [f64; 2],
    /// Interpolated shading frame (tangent, bitangent, normal).
    pub frame: Frame,
    pub geometric_normal: Vec3<f64>,
    pub prim: u32,
}

#[derive(Clone, Debug)]
pub struct TriangleMesh {
    pub positions: Vec<Vec3<f64>>,
    pub uvs: Vec<[f64; 2]>,
    pub normals: Vec<Vec3<f64>>,
    pub tangents: Vec<Vec3<f64>>,
    pub faces: Vec<[u32; 3]>,
    bvh: Bvh,
    bounds: Aabb,
}

impl TriangleMesh {
    /// Builds a mesh from indexed triangles.
    ///
    /// Missing normals are computed by area-weighted averaging over faces that
    /// share a position; per-vertex tangents come from UV gradients.
    pub fn new(
        positions: Vec<Vec3<f64>>,
        uvs: Option<Vec<[f64; 2]>>,
        normals: Option<Vec<Vec3<f64>>>,
        faces: Vec<[u32; 3]>,
    ) -> Result<Self> {
        let n = positions.len();
        if let Some(bad) = faces.iter().flatten().find(|&&i| i as usize >= n) {
            return Err(Error::InvalidArgument(format!("face index {bad} out of range for {n} vertices")));
        }
        let uvs = uvs.unwrap_or_else(|| vec![[0.0, 0.0]; n]);
        if uvs.len() != n {
            return Err(Error::ShapeMismatch(format!("{} uvs for {n} vertices", uvs.len())));
        }
        let normals = match normals {
            Some(ns) if ns.len() == n => ns.into_iter().map(|v| v.normalized()).collect(),
            Some(ns) => return Err(Error::ShapeMismatch(format!("{} normals for {n} vertices", ns.len()))),
            None => area_weighted_normals(&positions, &faces, &(0..n as u32).collect::<Vec<_>>()),
        };
        Ok(Self::assemble(positions, uvs, normals, faces))
    }

    fn assemble(positions: Vec<Vec3<f64>>, uvs: Vec<[f64; 2]>, normals: Vec<Vec3<f64>>, faces: Vec<[u32; 3]>) -> Self {
        let tangents = uv_tangents(&positions, &uvs, &normals, &faces);
        let tri_bounds: Vec<Aabb> = faces
            .iter()
            .map(|f| {
                let mut b = Aabb::empty();
                for &i in f {
                    b.grow(positions[i as usize]);
                }
                b
            })
            .collect();
        let bvh = Bvh::build(&tri_bounds);
        let mut bounds = Aabb::empty();
        for p in &positions {
            bounds.grow(*p);
        }
        Self { positions, uvs, normals, tangents, faces, bvh, bounds }
    }

    pub fn bounds(&self) -> Aabb {
        self.bounds
    }

    pub fn triangle_bounds(&self) -> Vec<Aabb> {
        self.faces
            .iter()
            .map(|f| {
                let mut b = Aabb::empty();
                for &i in f {
                    b.grow(self.positions[i as usize]);
                }
                b
            })
            .collect()
    }

    pub fn bvh_is_valid(&self) -> bool {
        self.bvh.validate(&self.triangle_bounds())
    }

    #[inline]
    fn corners(&self, prim: u32) -> (Vec3<f64>, Vec3<f64>, Vec3<f64>) {
        let f = self.faces[prim as usize];
        (self.positions[f[0] as usize], self.positions[f[1] as usize], self.positions[f[2] as usize])
    }

    /// Nearest hit with `t > RAY_EPSILON`.
    pub fn intersect(&self, ray: &Ray) -> Option<Hit> {
        self.intersect_within(ray, f64::INFINITY)
    }

    pub fn intersect_within(&self, ray: &Ray, t_max: f64) -> Option<Hit> {
        let hit = self.bvh.closest(ray, RAY_EPSILON, t_max, |p, limit| {
            let (a, b, c) = self.corners(p);
            intersect_triangle(ray, a, b, c, RAY_EPSILON, limit)
        })?;
        Some(self.hit_record(ray, hit))
    }

    /// Reference intersection that tests every triangle.
    pub fn intersect_brute_force(&self, ray: &Ray) -> Option<Hit> {
        let mut best: Option<PrimHit> = None;
        for p in 0..self.faces.len() as u32 {
            let (a, b, c) = self.corners(p);
            let limit = best.map_or(f64::INFINITY, |h| h.t);
            if let Some((t, b1, b2)) = intersect_triangle(ray, a, b, c, RAY_EPSILON, f64::INFINITY) {
                if t < limit || (t == limit && best.is_some_and(|h| p < h.prim)) {
                    best = Some(PrimHit { prim: p, t, b1, b2 });
                }
            }
        }
        best.map(|h| self.hit_record(ray, h))
    }

    /// True if anything blocks `ray` in `(RAY_EPSILON, t_max)`.
    pub fn occluded(&self, ray: &Ray, t_max: f64) -> bool {
        self.bvh.any(ray, t_max, |p| {
            let (a, b, c) = self.corners(p);
            intersect_triangle(ray, a, b, c, RAY_EPSILON, t_max).is_some()
        })
    }

    fn hit_record(&self, ray: &Ray, h: PrimHit) -> Hit {
        let f = self.faces[h.prim as usize];
        let (i0, i1, i2) = (f[0] as usize, f[1] as usize, f[2] as usize);
        let b0 = 1.0 - h.b1 - h.b2;
        let uv = [
            b0 * self.uvs[i0][0] + h.b1 * self.uvs[i1][0] + h.b2 * self.uvs[i2][0],
            b0 * self.uvs[i0][1] + h.b1 * self.uvs[i1][1] + h.b2 * self.uvs[i2][1],
        ];
        let (p0, p1, p2) = (self.positions[i0], self.positions[i1], self.positions[i2]);
        let mut geometric_normal = (p1 - p0).cross(p2 - p0).normalized();
        let mut normal = (self.normals[i0] * b0 + self.normals[i1] * h.b1 + self.normals[i2] * h.b2).normalized();
        if normal.length_squared() < 0.5 {
            normal = geometric_normal;
        }
        if geometric_normal.dot(normal) < 0.0 {
            geometric_normal = -geometric_normal;
        }
        let tangent = self.tangents[i0] * b0 + self.tangents[i1] * h.b1 + self.tangents[i2] * h.b2;
        Hit {
            t: h.t,
            x0: ray.at(h.t),
            uv,
            frame: Frame::from_normal_tangent(normal, tangent),
            geometric_normal,
            prim: h.prim,
        }
    }

    pub fn load_obj(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_obj(&text, path)
    }

    /// Parses the `v`/`vt`/`vn`/`f` subset of Wavefront OBJ (1-based or negative indices).
    pub fn parse_obj(text: &str, path: &Path) -> Result<Self> {
        let mut pos = Vec::new();
        let mut tex = Vec::new();
        let mut nrm = Vec::new();
        // (position, uv, normal) triples, resolved to 0-based indices
        let mut corners: Vec<[(usize, Option<usize>, Option<usize>); 3]> = Vec::new();
        let parse_err = |line: usize, message: String| Error::Parse { path: path.to_path_buf(), line, message };

        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            let mut it = content.split_whitespace();
            let Some(tag) = it.next() else { continue };
            let mut floats = |want: usize| -> Result<Vec<f64>> {
                let vals: Vec<f64> = it
                    .by_ref()
                    .map(|t| t.parse::<f64>().map_err(|_| parse_err(line, format!("bad number '{t}'"))))
                    .collect::<Result<_>>()?;
                if vals.len() < want {
                    return Err(parse_err(line, format!("expected {want} values for '{tag}'")));
                }
                Ok(vals)
            };
            match tag {
                "v" => {
                    let v = floats(3)?;
                    pos.push(Vec3::new(v[0], v[1], v[2]));
                }
                "vt" => {
                    let v = floats(2)?;
                    tex.push([v[0], v[1]]);
                }
                "vn" => {
                    let v = floats(3)?;
                    nrm.push(Vec3::new(v[0], v[1], v[2]));
                }
                "f" => {
                    let refs: Vec<&str> = it.collect();
                    if refs.len() != 3 {
                        return Err(Error::NonTriangleFace { path: path.to_path_buf(), line, vertices: refs.len() });
                    }
                    let mut tri = [(0usize, None, None); 3];
                    for (k, r) in refs.iter().enumerate() {
                        let mut parts = r.split('/');
                        let resolve = |s: Option<&str>, len: usize| -> Result<Option<usize>> {
                            let Some(s) = s.filter(|s| !s.is_empty()) else { return Ok(None) };
                            let idx: i64 = s.parse().map_err(|_| parse_err(line, format!("bad index '{s}'")))?;
                            let resolved = if idx > 0 { idx - 1 } else { len as i64 + idx };
                            if idx == 0 || resolved < 0 || resolved >= len as i64 {
                                return Err(Error::IndexOutOfRange { path: path.to_path_buf(), line, index: idx });
                            }
                            Ok(Some(resolved as usize))
                        };
                        let p = resolve(parts.next(), pos.len())?
                            .ok_or_else(|| parse_err(line, "face vertex without position".into()))?;
                        let t = resolve(parts.next(), tex.len())?;
                        let n = resolve(parts.next(), nrm.len())?;
                        tri[k] = (p, t, n);
                    }
                    corners.push(tri);
                }
                _ => {}
            }
        }

        // unify (position, uv, normal) triples into vertices
        let mut map: HashMap<(usize, Option<usize>, Option<usize>), u32> = HashMap::new();
        let mut positions = Vec::new();
        let mut uvs = Vec::new();
        let mut normals: Vec<Option<Vec3<f64>>> = Vec::new();
        let mut source_pos = Vec::new();
        let mut faces = Vec::with_capacity(corners.len());
        for tri in &corners {
            let mut f = [0u32; 3];
            for (k, key) in tri.iter().enumerate() {
                f[k] = *map.entry(*key).or_insert_with(|| {
                    positions.push(pos[key.0]);
                    uvs.push(key.1.map_or([0.0, 0.0], |t| tex[t]));
                    normals.push(key.2.map(|n| nrm[n]));
                    source_pos.push(key.0 as u32);
                    (positions.len() - 1) as u32
                });
            }
            faces.push(f);
        }
        let normals = if normals.iter().all(Option::is_some) {
            normals.into_iter().map(|n| n.unwrap().normalized()).collect()
        } else {
            let computed = area_weighted_normals(&positions, &faces, &source_pos);
            normals.into_iter().zip(computed).map(|(given, c)| given.map_or(c, |n| n.normalized())).collect()
        };
        Ok(Self::assemble(positions, uvs, normals, faces))
    }

    pub fn to_obj_string(&self) -> String {
        let mut s = String::new();
        for p in &self.positions {
            let _ = writeln!(s, "v {} {} {}", p.x, p.y, p.z);
        }
        for t in &self.uvs {
            let _ = writeln!(s, "vt {} {}", t[0], t[1]);
        }
        for n in &self.normals {
            let _ = writeln!(s, "vn {} {} {}", n.x, n.y, n.z);
        }
        for f in &self.faces {
            let [a, b, c] = f.map(|i| i + 1);
            let _ = writeln!(s, "f {a}/{a}/{a} {b}/{b}/{b} {c}/{c}/{c}");
        }
        s
    }

    pub fn save_obj(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_obj_string()).map_err(|e| Error::io(path, e))
    }

    /// Latitude/longitude sphere. `uv = (φ / 2π, 1 − θ / π)` with θ measured from +Y.
    pub fn uv_sphere(center: Vec3<f64>, radius: f64, stacks: usize, slices: usize) -> Self {
        let stacks = stacks.max(2);
        let slices = slices.max(3);
        let mut positions = Vec::new();
        let mut uvs = Vec::new();
        let mut normals = Vec::new();
        for i in 0..=stacks {
            let theta = std::f64::consts::PI * i as f64 / stacks as f64;
            for j in 0..=slices {
                let phi = 2.0 * std::f64::consts::PI * j as f64 / slices as f64;
                let n = Vec3::new(theta.sin() * phi.cos(), theta.cos(), theta.sin() * phi.sin());
                positions.push(center + n * radius);
                normals.push(n);
                uvs.push([j as f64 / slices as f64, 1.0 - i as f64 / stacks as f64]);
            }
        }
        let row = slices + 1;
        let mut faces = Vec::new();
        for i in 0..stacks {
            for j in 0..slices {
                let a = (i * row + j) as u32;
                let b = (i * row + j + 1) as u32;
                let c = ((i + 1) * row + j) as u32;
                let d = ((i + 1) * row + j + 1) as u32;
                // outward winding
                if i != 0 {
                    faces.push([a, b, c]);
                }
                if i != stacks - 1 {
                    faces.push([b, d, c]);
                }
            }
        }
        Self::assemble(positions, uvs, normals, faces)
    }

    /// Subdivided icosahedron with `20 * 4^subdivisions` faces.
    pub fn icosphere(center: Vec3<f64>, radius: f64, subdivisions: usize) -> Self {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut verts: Vec<Vec3<f64>> = [
            (-1.0, t, 0.0), (1.0, t, 0.0), (-1.0, -t, 0.0), (1.0, -t, 0.0),
            (0.0, -1.0, t), (0.0, 1.0, t), (0.0, -1.0, -t), (0.0, 1.0, -t),
            (t, 0.0, -1.0), (t, 0.0, 1.0), (-t, 0.0, -1.0), (-t, 0.0, 1.0),
        ]
        .iter()
        .map(|&(x, y, z)| Vec3::new(x, y, z).normalized())
        .collect();
        let mut faces: Vec<[u32; 3]> = vec![
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut cache: HashMap<(u32, u32), u32> = HashMap::new();
            let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vec3<f64>>| -> u32 {
                let key = (a.min(b), a.max(b));
                *cache.entry(key).or_insert_with(|| {
                    verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalized());
                    (verts.len() - 1) as u32
                })
            };
            let mut next = Vec::with_capacity(faces.len() * 4);
            for [a, b, c] in faces {
                let ab = midpoint(a, b, &mut verts);
                let bc = midpoint(b, c, &mut verts);
                let ca = midpoint(c, a, &mut verts);
                next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        let uvs = verts
            .iter()
            .map(|n| {
                let (u, v) = crate::lighting::dir_to_equirect(*n);
                [u, 1.0 - v]
            })
            .collect();
        let positions = verts.iter().map(|n| center + *n * radius).collect();
        Self::assemble(positions, uvs, verts, faces)
    }

    /// Square in the plane `y = height`, facing +Y, split into `2 * cells^2` triangles.
    pub fn ground_plane(height: f64, half_size: f64, cells: usize) -> Self {
        let cells = cells.max(1);
        let mut positions = Vec::new();
        let mut uvs = Vec::new();
        for i in 0..=cells {
            for j in 0..=cells {
                let u = j as f64 / cells as f64;
                let v = i as f64 / cells as f64;
                positions.push(Vec3::new(-half_size + 2.0 * half_size * u, height, half_size - 2.0 * half_size * v));
                uvs.push([u, v]);
            }
        }
        let row = cells + 1;
        let mut faces = Vec::new();
        for i in 0..cells {
            for j in 0..cells {
                let a = (i * row + j) as u32;
                let b = a + 1;
                let c = a + row as u32;
                let d = c + 1;
                faces.push([a, b, d]);
                faces.push([a, d, c]);
            }
        }
        let normals = vec![Vec3::new(0.0, 1.0, 0.0); positions.len()];
        Self::assemble(positions, uvs, normals, faces)
    }

    pub fn merge(meshes: &[TriangleMesh]) -> Self {
        let mut positions = Vec::new();
        let mut uvs = Vec::new();
        let mut normals = Vec::new();
        let mut faces = Vec::new();
        for m in meshes {
            let base = positions.len() as u32;
            positions.extend_from_slice(&m.positions);
            uvs.extend_from_slice(&m.uvs);
            normals.extend_from_slice(&m.normals);
            faces.extend(m.faces.iter().map(|f| f.map(|i| i + base)));
        }
        Self::assemble(positions, uvs, normals, faces)
    }
}

/// Area-weighted vertex normals, pooled over vertices that share `source_pos`.
fn area_weighted_normals(positions: &[Vec3<f64>], faces: &[[u32; 3]], source_pos: &[u32]) -> Vec<Vec3<f64>> {
    let slots = source_pos.iter().map(|&p| p as usize + 1).max().unwrap_or(0);
    let mut acc = vec![Vec3::zero(); slots];
    for f in faces {
        let (a, b, c) = (positions[f[0] as usize], positions[f[1] as usize], positions[f[2] as usize]);
        // |cross| is twice the area, so this is area weighting
        let n = (b - a).cross(c - a);
        for &i in f {
            acc[source_pos[i as usize] as usize] += n;
        }
    }
    source_pos
        .iter()
        .map(|&p| {
            let n = acc[p as usize].normalized();
            if n.length_squared() < 0.5 {
                Vec3::new(0.0, 0.0, 1.0)
            } else {
                n
            }
        })
        .collect()
}

fn uv_tangents(positions: &[Vec3<f64>], uvs: &[[f64; 2]], normals: &[Vec3<f64>], faces: &[[u32; 3]]) -> Vec<Vec3<f64>> {
    let mut acc = vec![Vec3::zero(); positions.len()];
    for f in faces {
        let (i0, i1, i2) = (f[0] as usize, f[1] as usize, f[2] as usize);
        let e1 = positions[i1] - positions[i0];
        let e2 = positions[i2] - positions[i0];
        let du1 = uvs[i1][0] - uvs[i0][0];
        let dv1 = uvs[i1][1] - uvs[i0][1];
        let du2 = uvs[i2][0] - uvs[i0][0];
        let dv2 = uvs[i2][1] - uvs[i0][1];
        let det = du1 * dv2 - du2 * dv1;
        if det.abs() < 1e-20 {
            continue;
        }
        let t = (e1 * dv2 - e2 * dv1) * (1.0 / det);
        for i in [i0, i1, i2] {
            acc[i] += t;
        }
    }
    acc.iter()
        .zip(normals)
        .map(|(t, n)| Frame::from_normal_tangent(*n, *t).tangent)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn obj(text: &str) -> Result<TriangleMesh> {
        TriangleMesh::parse_obj(text, Path::new("test.obj"))
    }

    #[test]
    fn single_triangle_gets_cross_product_normal() {
        let m = obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        assert_eq!(m.faces.len(), 1);
        for n in &m.normals {
            assert!((*n - Vec3::new(0.0, 0.0, 1.0)).length() < 1e-12);
        }
    }

    #[test]
    fn quad_face_is_rejected() {
        let err = obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap_err();
        assert!(err.to_string().contains("non-triangle face"), "{err}");
        assert!(err.to_string().contains(":5:"));
    }

    #[test]
    fn index_out_of_range_reports_line() {
        let err = obj("v 0 0 0\nv 1 0 0\nf 1 2 7\n").unwrap_err();
        assert!(matches!(err, Error::IndexOutOfRange { line: 3, index: 7, .. }), "{err}");
    }

    #[test]
    fn parse_error_has_line_number() {
        let err = obj("v 0 0 0\nv 1 zero 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn negative_indices_and_slash_forms() {
        let m = obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\nvn 0 0 1\nf -3/1/1 -2/2/1 -1/3/1\n").unwrap();
        assert_eq!(m.uvs, vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn obj_round_trip_keeps_geometry() {
        let s = TriangleMesh::icosphere(Vec3::zero(), 1.0, 1);
        let back = obj(&s.to_obj_string()).unwrap();
        assert_eq!(back.faces.len(), s.faces.len());
        for (fa, fb) in back.faces.iter().zip(&s.faces) {
            for k in 0..3 {
                assert!((back.positions[fa[k] as usize] - s.positions[fb[k] as usize]).length() < 1e-12);
            }
        }
    }

    #[test]
    fn icosphere_has_expected_faces_and_unit_normals() {
        let m = obj(&TriangleMesh::icosphere(Vec3::zero(), 1.0, 2).to_obj_string()).unwrap();
        assert_eq!(m.faces.len(), 320);
        assert!(m.normals.iter().all(|n| (n.length() - 1.0).abs() < 1e-6));
    }

    #[test]
    fn ray_through_icosphere_centre_hits_near_two() {
        let m = TriangleMesh::icosphere(Vec3::zero(), 1.0, 2);
        // inscribed-sphere radius bounds the faceting error
        let min_face_dist = m
            .faces
            .iter()
            .map(|f| {
                let (a, b, c) = (m.positions[f[0] as usize], m.positions[f[1] as usize], m.positions[f[2] as usize]);
                (b - a).cross(c - a).normalized().dot(a).abs()
            })
            .fold(f64::INFINITY, f64::min);
        let hit = m.intersect(&Ray::new(Vec3::new(0.0, 0.0, 3.0), Vec3::new(0.0, 0.0, -1.0))).unwrap();
        assert!(hit.t >= 2.0 - 1e-9 && hit.t <= 3.0 - min_face_dist + 1e-9, "t = {}", hit.t);
    }

    #[test]
    fn parallel_ray_outside_bounds_misses() {
        let m = TriangleMesh::icosphere(Vec3::zero(), 1.0, 1);
        assert!(m.intersect(&Ray::new(Vec3::new(-5.0, 2.0, 0.0), Vec3::new(1.0, 0.0, 0.0))).is_none());
    }

    #[test]
    fn vertex_hit_returns_vertex_uv() {
        let m = obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0.1 0.2\nvt 0.9 0.2\nvt 0.1 0.8\nf 1/1 2/2 3/3\n").unwrap();
        let hit = m.intersect(&Ray::new(Vec3::new(1.0, 0.0, 1.0), Vec3::new(0.0, 0.0, -1.0))).unwrap();
        assert!((hit.uv[0] - 0.9).abs() < 1e-12 && (hit.uv[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn hit_frame_is_orthonormal_and_point_on_ray() {
        let m = TriangleMesh::uv_sphere(Vec3::zero(), 1.0, 16, 32);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let o = Vec3::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), 4.0);
            let d = (Vec3::new(rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6), 0.0) - o).normalized();
            let ray = Ray::new(o, d);
            if let Some(h) = m.intersect(&ray) {
                assert!((h.x0 - ray.at(h.t)).length() < 1e-5);
                let f = h.frame;
                for v in [f.tangent, f.bitangent, f.normal] {
                    assert!((v.length() - 1.0).abs() < 1e-4);
                }
                assert!(f.tangent.dot(f.normal).abs() < 1e-4);
                assert!(f.tangent.dot(f.bitangent).abs() < 1e-4);
                assert!(f.bitangent.dot(f.normal).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn occlusion_query_sees_blocker() {
        let wall = obj("v -1 -1 1\nv 1 -1 1\nv 0 1 1\nf 1 2 3\n").unwrap();
        let up = Ray::new(Vec3::zero(), Vec3::new(0.0, 0.0, 1.0));
        assert!(wall.occluded(&up, f64::INFINITY));
        assert!(!wall.occluded(&up, 0.5));
        assert!(!wall.occluded(&Ray::new(Vec3::zero(), Vec3::new(0.0, 0.0, -1.0)), f64::INFINITY));
    }
}
