//! Triangle meshes and their projection to a two-channel spherical signal:
//! distance to the farthest surface hit and sine of the incidence angle.

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Bandwidth, SphericalGrid};
use crate::rotation::RotationZYZ;
use crate::sft::SphericalSignal;

pub type Point = [f64; 3];

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Point, b: Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: Point) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriangleMesh {
    vertices: Vec<Point>,
    faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    /// Validates indices and drops zero-area faces (logged as a warning).
    pub fn new(vertices: Vec<Point>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Mesh("non-finite vertex coordinate".into()));
        }
        if let Some(f) = faces.iter().find(|f| f.iter().any(|&i| i >= vertices.len())) {
            return Err(Error::Mesh(format!(
                "face {f:?} references a vertex beyond {}",
                vertices.len()
            )));
        }
        let before = faces.len();
        let faces: Vec<[usize; 3]> = faces
            .into_iter()
            .filter(|f| {
                let [a, b, c] = f.map(|i| vertices[i]);
                norm(cross(sub(b, a), sub(c, a))) > 0.0
            })
            .collect();
        if faces.len() < before {
            log::warn!("dropped {} degenerate faces", before - faces.len());
        }
        Ok(TriangleMesh { vertices, faces })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    /// Parses ASCII OFF. Polygons with more than three vertices are fan-split.
    pub fn from_off(text: &str) -> Result<Self> {
        let mut tokens = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(str::split_whitespace);
        match tokens.next() {
            Some("OFF") => {}
            Some(t) if t.starts_with("OFF") && t.len() > 3 => {
                return Err(Error::Mesh(format!("unsupported OFF variant {t}")))
            }
            _ => return Err(Error::Mesh("missing OFF header".into())),
        }
        let mut next_num = |what: &str| -> Result<f64> {
            tokens
                .next()
                .ok_or_else(|| Error::Mesh(format!("unexpected end of file reading {what}")))?
                .parse::<f64>()
                .map_err(|e| Error::Mesh(format!("bad {what}: {e}")))
        };
        let nv = next_num("vertex count")? as usize;
        let nf = next_num("face count")? as usize;
        let _edges = next_num("edge count")?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            vertices.push([next_num("vertex")?, next_num("vertex")?, next_num("vertex")?]);
        }
        let mut faces = Vec::with_capacity(nf);
        for _ in 0..nf {
            let k = next_num("face size")? as usize;
            let idx = (0..k)
                .map(|_| next_num("face index").map(|v| v as usize))
                .collect::<Result<Vec<_>>>()?;
            fan(&idx, &mut faces)?;
        }
        TriangleMesh::new(vertices, faces)
    }

    /// Parses the `v`/`f` subset of OBJ (1-based or negative indices,
    /// `i/t/n` references reduced to the vertex index).
    pub fn from_obj(text: &str) -> Result<Self> {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let mut parts = line.split_whitespace();
            let bad = |what: &str| Error::Mesh(format!("line {}: bad {what}", lineno + 1));
            match parts.next() {
                Some("v") => {
                    let c: Vec<f64> = parts
                        .take(3)
                        .map(|p| p.parse::<f64>().map_err(|_| bad("vertex")))
                        .collect::<Result<_>>()?;
                    if c.len() != 3 {
                        return Err(bad("vertex"));
                    }
                    vertices.push([c[0], c[1], c[2]]);
                }
                Some("f") => {
                    let idx = parts
                        .map(|p| {
                            let i: i64 = p.split('/').next().unwrap_or("").parse().map_err(|_| bad("face"))?;
                            let n = vertices.len() as i64;
                            match i {
                                i if i > 0 => Ok((i - 1) as usize),
                                i if i < 0 && -i <= n => Ok((n + i) as usize),
                                _ => Err(bad("face index")),
                            }
                        })
                        .collect::<Result<Vec<_>>>()?;
                    fan(&idx, &mut faces)?;
                }
                _ => {}
            }
        }
        TriangleMesh::new(vertices, faces)
    }

    /// Loads `.off` or `.obj` by extension.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("off") => TriangleMesh::from_off(&text),
            Some("obj") => TriangleMesh::from_obj(&text),
            _ => Err(Error::Mesh(format!("unknown mesh format: {}", path.display()))),
        }
    }

    pub fn to_off(&self) -> String {
        let mut s = format!("OFF\n{} {} 0\n", self.vertices.len(), self.faces.len());
        for v in &self.vertices {
            s += &format!("{} {} {}\n", v[0], v[1], v[2]);
        }
        for f in &self.faces {
            s += &format!("3 {} {} {}\n", f[0], f[1], f[2]);
        }
        s
    }

    /// Rotates every vertex about the origin.
    pub fn rotated(&self, r: &RotationZYZ) -> Self {
        let m = r.matrix();
        TriangleMesh {
            vertices: self.vertices.iter().map(|&v| crate::rotation::matvec(&m, v)).collect(),
            faces: self.faces.clone(),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        TriangleMesh {
            vertices: self.vertices.iter().map(|v| v.map(|x| x * s)).collect(),
            faces: self.faces.clone(),
        }
    }

    pub fn translated(&self, t: Point) -> Self {
        TriangleMesh {
            vertices: self.vertices.iter().map(|v| [v[0] + t[0], v[1] + t[1], v[2] + t[2]]).collect(),
            faces: self.faces.clone(),
        }
    }

    /// Moves each vertex radially: `v ← center + r(v̂) (v − center)`.
    pub fn displaced_radially(&self, f: impl Fn(Point) -> f64) -> Self {
        TriangleMesh {
            vertices: self
                .vertices
                .iter()
                .map(|&v| {
                    let n = norm(v);
                    let s = f(v.map(|x| x / n));
                    v.map(|x| x * s)
                })
                .collect(),
            faces: self.faces.clone(),
        }
    }

    /// Unit icosphere: an icosahedron subdivided `level` times, projected to the sphere.
    pub fn icosphere(level: usize) -> Self {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut vertices: Vec<Point> = [
            [-1.0, t, 0.0],
            [1.0, t, 0.0],
            [-1.0, -t, 0.0],
            [1.0, -t, 0.0],
            [0.0, -1.0, t],
            [0.0, 1.0, t],
            [0.0, -1.0, -t],
            [0.0, 1.0, -t],
            [t, 0.0, -1.0],
            [t, 0.0, 1.0],
            [-t, 0.0, -1.0],
            [-t, 0.0, 1.0],
        ]
        .iter()
        .map(|&v| v.map(|x| x / norm(v)))
        .collect();
        let mut faces = vec![
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ];
        for _ in 0..level {
            let mut mids: HashMap<(usize, usize), usize> = HashMap::new();
            let mut mid = |a: usize, b: usize, vs: &mut Vec<Point>| -> usize {
                *mids.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    let (p, q) = (vs[a], vs[b]);
                    let m = [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0, (p[2] + q[2]) / 2.0];
                    let n = norm(m);
                    vs.push(m.map(|x| x / n));
                    vs.len() - 1
                })
            };
            let mut next = Vec::with_capacity(faces.len() * 4);
            for [a, b, c] in faces {
                let ab = mid(a, b, &mut vertices);
                let bc = mid(b, c, &mut vertices);
                let ca = mid(c, a, &mut vertices);
                next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        TriangleMesh { vertices, faces }
    }

    /// Axis-aligned cube centered at the origin.
    pub fn cube(half_edge: f64) -> Self {
        let h = half_edge;
        let vertices = (0..8)
            .map(|i| [if i & 1 == 0 { -h } else { h }, if i & 2 == 0 { -h } else { h }, if i & 4 == 0 { -h } else { h }])
            .collect();
        let quads = [[0, 2, 3, 1], [4, 5, 7, 6], [0, 1, 5, 4], [2, 6, 7, 3], [0, 4, 6, 2], [1, 3, 7, 5]];
        let mut faces = Vec::new();
        for q in quads {
            faces.push([q[0], q[1], q[2]]);
            faces.push([q[0], q[2], q[3]]);
        }
        TriangleMesh { vertices, faces }
    }

    /// Regular tetrahedron with unit circumradius centered at the origin.
    pub fn tetrahedron() -> Self {
        let s = 1.0 / 3f64.sqrt();
        let vertices = vec![[s, s, s], [s, -s, -s], [-s, s, -s], [-s, -s, s]];
        TriangleMesh {
            vertices,
            faces: vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]],
        }
    }
}

fn fan(idx: &[usize], faces: &mut Vec<[usize; 3]>) -> Result<()> {
    if idx.len() < 3 {
        return Err(Error::Mesh(format!("face with {} vertices", idx.len())));
    }
    for i in 1..idx.len() - 1 {
        faces.push([idx[0], idx[i], idx[i + 1]]);
    }
    Ok(())
}

/// Relative accuracy of [`bounding_sphere`].
pub const BOUNDING_SPHERE_EPS: f64 = 0.01;

/// Approximate minimum enclosing sphere of the vertices.
///
/// Bădoiu–Clarkson core-set iteration: the center walks toward the farthest
/// vertex with step `1/(i+1)`; after `⌈1/ε²⌉` steps the enclosing radius is
/// within a factor `1+ε` of optimal. The returned radius always contains every vertex.
pub fn bounding_sphere(mesh: &TriangleMesh) -> Result<(Point, f64)> {
    let vs = mesh.vertices();
    let first = *vs.first().ok_or_else(|| Error::Mesh("empty mesh".into()))?;
    let farthest = |c: Point| -> (usize, f64) {
        vs.iter()
            .enumerate()
            .map(|(i, &v)| (i, dot(sub(v, c), sub(v, c))))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc })
    };
    let iters = (1.0 / (BOUNDING_SPHERE_EPS * BOUNDING_SPHERE_EPS)).ceil() as usize;
    let mut c = first;
    let mut best = (c, farthest(c).1);
    for i in 1..=iters {
        let (q, _) = farthest(c);
        let step = 1.0 / (i + 1) as f64;
        let d = sub(vs[q], c);
        c = [c[0] + d[0] * step, c[1] + d[1] * step, c[2] + d[2] * step];
        let r2 = farthest(c).1;
        if r2 < best.1 {
            best = (c, r2);
        }
    }
    Ok((best.0, best.1.sqrt()))
}

/// Two-channel spherical image of a mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct SphericalRepresentation {
    /// Channel 0: normalized distance `d`; channel 1: `sin α`.
    pub signal: SphericalSignal,
    pub center: Point,
    /// Normalization constant: the largest vertex distance from `center`.
    pub radius: f64,
}

/// Projects a mesh from the center of its bounding sphere.
pub fn mesh_to_sphere(mesh: &TriangleMesh, bandwidth: Bandwidth) -> Result<SphericalRepresentation> {
    let (center, _) = bounding_sphere(mesh)?;
    mesh_to_sphere_with_center(mesh, bandwidth, center)
}

/// Projects a mesh from an arbitrary center (used for jitter augmentation).
///
/// Distances are divided by the largest vertex distance from `center`, so
/// they stay in `[0, 1]` wherever the center sits.
pub fn mesh_to_sphere_with_center(
    mesh: &TriangleMesh,
    bandwidth: Bandwidth,
    center: Point,
) -> Result<SphericalRepresentation> {
    if mesh.vertices().is_empty() {
        return Err(Error::Mesh("empty mesh".into()));
    }
    let radius = mesh
        .vertices()
        .iter()
        .map(|&v| norm(sub(v, center)))
        .fold(0.0, f64::max);
    if radius <= 0.0 {
        return Err(Error::Mesh("all vertices coincide with the projection center".into()));
    }
    let tris: Vec<Triangle> = mesh
        .faces()
        .iter()
        .map(|f| {
            let [a, b, c] = f.map(|i| sub(mesh.vertices()[i], center));
            let (e1, e2) = (sub(b, a), sub(c, a));
            let n = cross(e1, e2);
            let nn = norm(n);
            Triangle {
                a,
                e1,
                e2,
                normal: n.map(|x| x / nn),
            }
        })
        .collect();
    let grid = SphericalGrid::new(bandwidth);
    let n = grid.size();
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut d = vec![0.0; n];
            let mut s = vec![0.0; n];
            for k in 0..n {
                let dir = grid.direction(j, k);
                if let Some((t, normal)) = farthest_hit(&tris, dir) {
                    d[k] = t / radius;
                    let c = dot(normal, dir).abs().min(1.0);
                    s[k] = (1.0 - c * c).sqrt();
                }
            }
            (d, s)
        })
        .collect();
    let mut values = Vec::with_capacity(2 * n * n);
    for (d, _) in &rows {
        values.extend_from_slice(d);
    }
    for (_, s) in &rows {
        values.extend_from_slice(s);
    }
    Ok(SphericalRepresentation {
        signal: SphericalSignal::from_values(bandwidth, 2, values)?,
        center,
        radius,
    })
}

struct Triangle {
    a: Point,
    e1: Point,
    e2: Point,
    normal: Point,
}

/// Möller–Trumbore ray/triangle test for a ray from the origin.
/// Returns the ray parameter of the hit.
fn intersect(tri: &Triangle, dir: Point) -> Option<f64> {
    let p = cross(dir, tri.e2);
    let det = dot(tri.e1, p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = [-tri.a[0], -tri.a[1], -tri.a[2]];
    let u = dot(s, p) * inv;
    // barycentric slack so a ray through a shared edge hits both faces
    const SLACK: f64 = 1e-12;
    if !(-SLACK..=1.0 + SLACK).contains(&u) {
        return None;
    }
    let q = cross(s, tri.e1);
    let v = dot(dir, q) * inv;
    if v < -SLACK || u + v > 1.0 + SLACK {
        return None;
    }
    let t = dot(tri.e2, q) * inv;
    (t > 0.0).then_some(t)
}

/// Hits on a shared edge tie; the earlier face wins unless a later one is
/// farther by more than rounding, which keeps the choice scale-invariant.
fn farthest_hit(tris: &[Triangle], dir: Point) -> Option<(f64, Point)> {
    let mut best: Option<(f64, Point)> = None;
    for tri in tris {
        if let Some(t) = intersect(tri, dir) {
            if best.map_or(true, |(bt, _)| t > bt * (1.0 + 1e-10)) {
                best = Some((t, tri.normal));
            }
        }
    }
    best
}
