//! Rest-pose triangle surfaces and axis-aligned boxes.

use std::collections::BTreeMap;

use log::warn;

use crate::error::{Error, Result};
use crate::math::Vec3;

/// Triangulated boundary of a body, in its rest frame.
#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    pub edges: Vec<[usize; 2]>,
}

impl SurfaceMesh {
    /// Validates indices and triangle areas and derives the edge list.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= vertices.len()) {
                return Err(Error::DegenerateGeometry(format!(
                    "triangle {t} references a vertex out of range ({} vertices)",
                    vertices.len()
                )));
            }
            let [a, b, c] = tri.map(|i| vertices[i]);
            if (b - a).cross(&(c - a)).norm() <= 0.0 {
                return Err(Error::DegenerateGeometry(format!("triangle {t} has zero area")));
            }
        }
        let (edges, non_manifold) = edge_incidence(&triangles);
        if non_manifold > 0 {
            warn!("{non_manifold} non-manifold edges; mesh usable for contact only");
        }
        Ok(Self {
            vertices,
            triangles,
            edges,
        })
    }

    /// Checks that every edge is shared by exactly two oppositely oriented triangles.
    pub fn check_closed(&self) -> Result<()> {
        let mut directed: BTreeMap<(usize, usize), i32> = BTreeMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *directed.entry((a, b)).or_default() += 1;
            }
        }
        for (&(a, b), &n) in &directed {
            let back = directed.get(&(b, a)).copied().unwrap_or(0);
            if n != 1 || back != 1 {
                return Err(Error::OpenMesh(format!(
                    "edge ({a}, {b}) has {n} forward and {back} backward half-edges"
                )));
            }
        }
        Ok(())
    }

    pub fn triangle(&self, t: usize) -> [Vec3; 3] {
        self.triangles[t].map(|i| self.vertices[i])
    }

    pub fn edge(&self, e: usize) -> [Vec3; 2] {
        self.edges[e].map(|i| self.vertices[i])
    }

    pub fn bounding_box(&self) -> Aabb {
        aabb_of(&self.vertices, 0.0)
    }
}

/// Unique undirected edges of a triangle list, sorted lexicographically by
/// `(min, max)` vertex index.
pub fn build_edges(triangles: &[[usize; 3]]) -> Vec<[usize; 2]> {
    edge_incidence(triangles).0
}

fn edge_incidence(triangles: &[[usize; 3]]) -> (Vec<[usize; 2]>, usize) {
    let mut count: BTreeMap<[usize; 2], usize> = BTreeMap::new();
    for tri in triangles {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            *count.entry([a.min(b), a.max(b)]).or_default() += 1;
        }
    }
    let non_manifold = count.values().filter(|&&n| n > 2).count();
    (count.into_keys().collect(), non_manifold)
}

/// Closed axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub lo: Vec3,
    pub hi: Vec3,
}

impl Default for Aabb {
    fn default() -> Self {
        Self::empty()
    }
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            lo: Vec3::repeat(f64::INFINITY),
            hi: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|k| self.lo[k] > self.hi[k])
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.lo = self.lo.inf(p);
        self.hi = self.hi.sup(p);
    }

    pub fn merge(&mut self, o: &Aabb) {
        self.lo = self.lo.inf(&o.lo);
        self.hi = self.hi.sup(&o.hi);
    }

    pub fn inflate(&self, r: f64) -> Self {
        Self {
            lo: self.lo.add_scalar(-r),
            hi: self.hi.add_scalar(r),
        }
    }

    pub fn overlaps(&self, o: &Aabb) -> bool {
        (0..3).all(|k| self.lo[k] <= o.hi[k] && o.lo[k] <= self.hi[k])
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|k| self.lo[k] <= p[k] && p[k] <= self.hi[k])
    }

    pub fn center(&self) -> Vec3 {
        (self.lo + self.hi) * 0.5
    }

    pub fn extent(&self) -> Vec3 {
        self.hi - self.lo
    }
}

/// Bounding box of `points` with every face pushed out by `inflation`.
pub fn aabb_of(points: &[Vec3], inflation: f64) -> Aabb {
    let mut b = Aabb::empty();
    for p in points {
        b.grow(p);
    }
    b.inflate(inflation)
}

/// Intersection of two closed boxes, or `None` when separated along some axis.
pub fn aabb_overlap(a: &Aabb, b: &Aabb) -> Option<Aabb> {
    a.overlaps(b).then(|| Aabb {
        lo: a.lo.sup(&b.lo),
        hi: a.hi.inf(&b.hi),
    })
}

/// Axis-aligned box mesh centered at the origin with the given full extents.
pub fn box_mesh(size: Vec3) -> SurfaceMesh {
    let h = size * 0.5;
    let vertices = (0..8)
        .map(|i| {
            Vec3::new(
                if i & 1 == 0 { -h.x } else { h.x },
                if i & 2 == 0 { -h.y } else { h.y },
                if i & 4 == 0 { -h.z } else { h.z },
            )
        })
        .collect();
    let triangles = vec![
        [0, 2, 3], [0, 3, 1], // -z
        [4, 5, 7], [4, 7, 6], // +z
        [0, 1, 5], [0, 5, 4], // -y
        [2, 6, 7], [2, 7, 3], // +y
        [0, 4, 6], [0, 6, 2], // -x
        [1, 3, 7], [1, 7, 5], // +x
    ];
    SurfaceMesh::new(vertices, triangles).expect("box mesh is valid")
}

/// Icosphere of the given radius, refined `subdivisions` times.
pub fn icosphere(radius: f64, subdivisions: u32) -> SurfaceMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, t, 0.0), (1.0, t, 0.0), (-1.0, -t, 0.0), (1.0, -t, 0.0),
        (0.0, -1.0, t), (0.0, 1.0, t), (0.0, -1.0, -t), (0.0, 1.0, -t),
        (t, 0.0, -1.0), (t, 0.0, 1.0), (-t, 0.0, -1.0), (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut triangles: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut next = Vec::with_capacity(triangles.len() * 4);
        for tri in &triangles {
            let mut mid = [0usize; 3];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                mid[k] = *midpoint.entry(key).or_insert_with(|| {
                    vertices.push(((vertices[a] + vertices[b]) * 0.5).normalize());
                    vertices.len() - 1
                });
            }
            next.push([tri[0], mid[0], mid[2]]);
            next.push([tri[1], mid[1], mid[0]]);
            next.push([tri[2], mid[2], mid[1]]);
            next.push(mid);
        }
        triangles = next;
    }
    for v in &mut vertices {
        *v *= radius;
    }
    SurfaceMesh::new(vertices, triangles).expect("icosphere is valid")
}

/// Single-sided rectangle in the `z = 0` plane facing `+z` (open; static geometry only).
pub fn quad_mesh(size_x: f64, size_y: f64) -> SurfaceMesh {
    let (hx, hy) = (size_x * 0.5, size_y * 0.5);
    let vertices = vec![
        Vec3::new(-hx, -hy, 0.0),
        Vec3::new(hx, -hy, 0.0),
        Vec3::new(hx, hy, 0.0),
        Vec3::new(-hx, hy, 0.0),
    ];
    SurfaceMesh::new(vertices, vec![[0, 1, 2], [0, 2, 3]]).expect("quad is valid")
}

/// Extrusion along `z` (centered, total `depth`) of a counter-clockwise
/// polygon in the xy-plane that is star-shaped about its vertex centroid.
/// Caps are fanned from the centroid.
pub fn prism_mesh(polygon: &[[f64; 2]], depth: f64) -> Result<SurfaceMesh> {
    let n = polygon.len();
    if n < 3 {
        return Err(Error::DegenerateGeometry("prism polygon needs at least 3 points".into()));
    }
    let c = polygon.iter().fold([0.0, 0.0], |acc, p| [acc[0] + p[0], acc[1] + p[1]]);
    let c = [c[0] / n as f64, c[1] / n as f64];
    let h = depth * 0.5;
    let mut vertices = Vec::with_capacity(2 * n + 2);
    for z in [-h, h] {
        for p in polygon {
            vertices.push(Vec3::new(p[0], p[1], z));
        }
    }
    let (bottom_c, top_c) = (2 * n, 2 * n + 1);
    vertices.push(Vec3::new(c[0], c[1], -h));
    vertices.push(Vec3::new(c[0], c[1], h));
    let mut triangles = Vec::with_capacity(4 * n);
    for i in 0..n {
        let j = (i + 1) % n;
        triangles.push([bottom_c, j, i]);
        triangles.push([top_c, n + i, n + j]);
        triangles.push([i, j, n + j]);
        triangles.push([i, n + j, n + i]);
    }
    SurfaceMesh::new(vertices, triangles)
}
