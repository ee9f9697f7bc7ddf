//! Joint constraints through virtual tetrahedra.
//!
//! A non-degenerate tetrahedron rigidly attached to a body determines the
//! body's affine coordinates linearly from its four vertex positions. Fixing
//! or sharing tetrahedron vertices between bodies is then a linear equality,
//! which is eliminated by expressing every body's coordinates through a
//! reduced set of unknowns ("nodes"):
//!
//! `q_b = c_b + Σₙ T_{b,n} zₙ`
//!
//! An unconstrained body is a single 12-dimensional node with `T = I`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SMatrix};

use crate::body::BodyCoords;
use crate::error::{Error, Result};
use crate::math::{Mat12, Mat3, Vec12, Vec3};

pub type TetMatrix = SMatrix<f64, 3, 4>;

/// Recovery of affine coordinates from tetrahedron vertices:
/// `p = ¼ Σ (pᵢ − p̄ᵢ)`, `A = P P̄ᵀ (P̄ P̄ᵀ)⁻¹`. Exact when `P̄` is centered.
pub fn phi(p: &TetMatrix, p_bar: &TetMatrix) -> Result<BodyCoords> {
    let gram = p_bar * p_bar.transpose();
    let inv = gram
        .try_inverse()
        .ok_or_else(|| Error::Constraint("degenerate virtual tetrahedron".into()))?;
    let t = (p - p_bar).column_sum() / 4.0;
    Ok(BodyCoords::from_parts(&t, &(p * p_bar.transpose() * inv)))
}

/// A tetrahedron attached to a body, given by its rest-frame vertices.
#[derive(Clone, Debug)]
pub struct VirtualTet {
    /// Rest-frame vertices as supplied.
    pub rest: [Vec3; 4],
    centroid: Vec3,
    centered: TetMatrix,
    map: Mat12,
}

impl VirtualTet {
    /// Re-centers the vertices on their centroid and precomputes the constant
    /// linear map `q = G vec(P)` (column-major `vec`).
    pub fn new(rest: [Vec3; 4]) -> Result<Self> {
        let centroid = rest.iter().sum::<Vec3>() / 4.0;
        let centered = TetMatrix::from_columns(&rest.map(|v| v - centroid));
        let gram = centered * centered.transpose();
        let scale = centered.norm_squared();
        if scale <= 0.0 || gram.determinant().abs() <= 1e-12 * scale.powi(3) {
            return Err(Error::Constraint("degenerate virtual tetrahedron".into()));
        }
        let mut tet = Self {
            rest,
            centroid,
            centered,
            map: Mat12::zeros(),
        };
        for k in 0..12 {
            let mut e = Vec12::zeros();
            e[k] = 1.0;
            tet.map.set_column(k, &tet.coords_from_vec(&e).0);
        }
        Ok(tet)
    }

    fn coords_from_vec(&self, v: &Vec12) -> BodyCoords {
        let p = TetMatrix::from_column_slice(v.as_slice());
        let q = phi(&p, &self.centered).expect("checked at construction");
        // The tetrahedron frame is centered; shift back to the body frame.
        let a = q.linear();
        BodyCoords::from_parts(&(q.translation() - a * self.centroid), &a)
    }

    /// The constant 12×12 map `G` with `q = G vec(P)`.
    pub fn reparam_map(&self) -> &Mat12 {
        &self.map
    }

    pub fn coords_from_vertices(&self, p: &[Vec3; 4]) -> BodyCoords {
        BodyCoords(self.map * vec_of(p))
    }

    /// World positions of the tetrahedron vertices for body coordinates `q`.
    pub fn vertices_for(&self, q: &BodyCoords) -> [Vec3; 4] {
        self.rest.map(|x| crate::body::world_position(q, &x))
    }
}

pub fn vec_of(p: &[Vec3; 4]) -> Vec12 {
    Vec12::from_fn(|i, _| p[i / 3][i % 3])
}

/// What happens to one tetrahedron vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VertexRole {
    Free,
    Fixed,
    /// Shared among all bodies using the same key.
    Shared(usize),
}

/// A linear equality `Σ coeffs[k]·vec(P)[k] = rhs` over one body's tet.
#[derive(Clone, Debug)]
pub struct LinearRow {
    pub coeffs: Vec12,
    pub rhs: f64,
}

#[derive(Clone, Debug)]
pub struct BodyTet {
    pub tet: VirtualTet,
    pub roles: [VertexRole; 4],
    pub rows: Vec<LinearRow>,
}

/// How one dynamic body's coordinates depend on the unknowns.
#[derive(Clone, Debug)]
pub struct BodyMap {
    pub constant: Vec12,
    pub terms: Vec<(usize, DMatrix<f64>)>,
    /// Single 12-dim node with `T = I` and no constant.
    pub identity: bool,
}

/// Reduced unknown layout for the whole scene.
#[derive(Clone, Debug)]
pub struct DofLayout {
    pub node_dims: Vec<usize>,
    pub node_offsets: Vec<usize>,
    /// `None` for static bodies.
    pub body_maps: Vec<Option<BodyMap>>,
    /// Bodies touching each node, ascending.
    pub node_bodies: Vec<Vec<usize>>,
    /// Node of each shared-vertex key.
    pub shared_nodes: BTreeMap<usize, usize>,
}

impl DofLayout {
    pub fn n_unknowns(&self) -> usize {
        self.node_dims.iter().sum()
    }

    /// Current position of a shared tetrahedron vertex.
    pub fn shared_vertex(&self, key: usize, z: &DVector<f64>) -> Option<Vec3> {
        let node = *self.shared_nodes.get(&key)?;
        Some(Vec3::from_column_slice(z.rows(self.node_offsets[node], 3).as_slice()))
    }

    /// Body coordinates for unknowns `z`; static bodies keep `fixed[b]`.
    pub fn body_coords(&self, z: &DVector<f64>, fixed: &[BodyCoords]) -> Vec<BodyCoords> {
        self.body_maps
            .iter()
            .enumerate()
            .map(|(b, m)| match m {
                None => fixed[b],
                Some(m) => BodyCoords(self.apply(m, z, true)),
            })
            .collect()
    }

    /// Body-space step for an unknown-space step (no constant term).
    pub fn body_step(&self, dz: &DVector<f64>) -> Vec<Vec12> {
        self.body_maps
            .iter()
            .map(|m| m.as_ref().map_or_else(Vec12::zeros, |m| self.apply(m, dz, false)))
            .collect()
    }

    fn apply(&self, m: &BodyMap, z: &DVector<f64>, with_constant: bool) -> Vec12 {
        if m.identity {
            let n = m.terms[0].0;
            return Vec12::from_column_slice(z.rows(self.node_offsets[n], 12).as_slice());
        }
        let mut q = if with_constant { m.constant } else { Vec12::zeros() };
        for (n, t) in &m.terms {
            let r = t * z.rows(self.node_offsets[*n], self.node_dims[*n]);
            q += Vec12::from_column_slice(r.as_slice());
        }
        q
    }

    /// `Tᵀ g` summed over bodies, in body order.
    pub fn reduce_gradient(&self, g: &[Vec12]) -> DVector<f64> {
        let mut out = DVector::zeros(self.n_unknowns());
        for (b, m) in self.body_maps.iter().enumerate() {
            let Some(m) = m else { continue };
            for (n, t) in &m.terms {
                let mut seg = out.rows_mut(self.node_offsets[*n], self.node_dims[*n]);
                if m.identity {
                    seg += &g[b];
                } else {
                    seg += t.transpose() * g[b];
                }
            }
        }
        out
    }

    /// `Tᵀ H T` for a body-space block matrix whose block indices are
    /// dynamic-body ranks (`body_of_rank`).
    pub fn reduce_hessian(&self, h: &crate::solver::sparse::BlockSparseMatrix, body_of_rank: &[usize]) -> crate::solver::sparse::VarBlockMatrix {
        let mut out = crate::solver::sparse::VarBlockMatrix::new(self.node_dims.clone());
        let maps = |r: usize| self.body_maps[body_of_rank[r]].as_ref().expect("dynamic");
        for (r, block) in h.diag.iter().enumerate() {
            let m = maps(r);
            let block = DMatrix::from_column_slice(12, 12, block.as_slice());
            for (i, (n, tn)) in m.terms.iter().enumerate() {
                for (mn, tm) in &m.terms[i..] {
                    let x = if m.identity { block.clone() } else { tn.transpose() * &block * tm };
                    out.add_block(*n, *mn, &x);
                }
            }
        }
        for (&(ra, rb), block) in &h.upper {
            let (ma, mb) = (maps(ra), maps(rb));
            let block = DMatrix::from_column_slice(12, 12, block.as_slice());
            for (n, tn) in &ma.terms {
                for (mn, tm) in &mb.terms {
                    let x = if ma.identity && mb.identity { block.clone() } else { tn.transpose() * &block * tm };
                    if n == mn {
                        let sym = &x + x.transpose();
                        out.add_block(*n, *n, &sym);
                    } else {
                        out.add_block(*n, *mn, &x);
                    }
                }
            }
        }
        out
    }
}

/// Per-body node bookkeeping while building the layout.
struct Builder {
    dims: Vec<usize>,
    node_bodies: Vec<Vec<usize>>,
}

impl Builder {
    fn node(&mut self, dim: usize) -> usize {
        self.dims.push(dim);
        self.node_bodies.push(Vec::new());
        self.dims.len() - 1
    }
}

/// Builds the reduced layout and the initial unknowns. `tets[b]` is the
/// virtual tetrahedron of a constrained dynamic body. Coordinates of
/// constrained bodies in `qs` are replaced by their exact reconstruction
/// from the unknowns.
pub fn build_layout(is_static: &[bool], tets: &[Option<BodyTet>], qs: &mut [BodyCoords]) -> Result<(DofLayout, DVector<f64>)> {
    let n = is_static.len();
    let mut builder = Builder {
        dims: Vec::new(),
        node_bodies: Vec::new(),
    };
    let mut maps: Vec<Option<BodyMap>> = vec![None; n];
    let mut z_parts: Vec<DVector<f64>> = Vec::new();
    let mut shared: BTreeMap<usize, usize> = BTreeMap::new();
    for b in 0..n {
        if is_static[b] {
            if tets[b].is_some() {
                return Err(Error::Constraint(format!("body {b} is static and cannot carry joints")));
            }
            continue;
        }
        let Some(bt) = &tets[b] else {
            let node = builder.node(12);
            builder.node_bodies[node].push(b);
            z_parts.push(DVector::from_column_slice(qs[b].0.as_slice()));
            maps[b] = Some(BodyMap {
                constant: Vec12::zeros(),
                terms: vec![(node, DMatrix::identity(12, 12))],
                identity: true,
            });
            continue;
        };
        let g = DMatrix::from_column_slice(12, 12, bt.tet.reparam_map().as_slice());
        let p0 = vec_of(&bt.tet.vertices_for(&qs[b]));
        let mut constant = DVector::<f64>::zeros(12);
        let mut terms = Vec::new();
        let mut free_coords = Vec::new();
        let mut fixed_coords = Vec::new();
        for (k, role) in bt.roles.iter().enumerate() {
            let cols = g.columns(3 * k, 3).into_owned();
            match role {
                VertexRole::Fixed => {
                    constant += &cols * p0.fixed_rows::<3>(3 * k);
                    fixed_coords.extend(3 * k..3 * k + 3);
                }
                VertexRole::Shared(key) => {
                    let node = match shared.get(key) {
                        Some(&node) => node,
                        None => {
                            let node = builder.node(3);
                            shared.insert(*key, node);
                            z_parts.push(DVector::from_column_slice(p0.fixed_rows::<3>(3 * k).as_slice()));
                            node
                        }
                    };
                    builder.node_bodies[node].push(b);
                    terms.push((node, cols));
                }
                VertexRole::Free => free_coords.extend(3 * k..3 * k + 3),
            }
        }
        if !free_coords.is_empty() {
            let f0 = DVector::from_iterator(free_coords.len(), free_coords.iter().map(|&i| p0[i]));
            let (basis, particular) = if bt.rows.is_empty() {
                (DMatrix::identity(free_coords.len(), free_coords.len()), None)
            } else {
                let (basis, particular) = nullspace_of_rows(&bt.rows, &free_coords, &fixed_coords, &p0, b)?;
                (basis, Some(particular))
            };
            let gf = DMatrix::from_fn(12, free_coords.len(), |r, c| g[(r, free_coords[c])]);
            if let Some(part) = &particular {
                constant += &gf * part;
            }
            if basis.ncols() > 0 {
                let node = builder.node(basis.ncols());
                builder.node_bodies[node].push(b);
                let offset = particular.unwrap_or_else(|| DVector::zeros(free_coords.len()));
                z_parts.push(basis.transpose() * (f0 - offset));
                terms.push((node, gf * basis));
            }
        } else if !bt.rows.is_empty() {
            return Err(Error::Constraint(format!("body {b}: linear rows need free tetrahedron vertices")));
        }
        if terms.iter().map(|(node, _)| builder.dims[*node]).sum::<usize>() == 0 {
            return Err(Error::Constraint(format!("body {b} is over-constrained (no free degrees of freedom)")));
        }
        maps[b] = Some(BodyMap {
            constant: Vec12::from_column_slice(constant.as_slice()),
            terms,
            identity: false,
        });
    }
    let mut offsets = Vec::with_capacity(builder.dims.len());
    let mut acc = 0;
    for &d in &builder.dims {
        offsets.push(acc);
        acc += d;
    }
    let mut z = DVector::zeros(acc);
    for (node, part) in z_parts.iter().enumerate() {
        z.rows_mut(offsets[node], builder.dims[node]).copy_from(part);
    }
    let layout = DofLayout {
        node_dims: builder.dims,
        node_offsets: offsets,
        body_maps: maps,
        node_bodies: builder.node_bodies,
        shared_nodes: shared,
    };
    let rebuilt = layout.body_coords(&z, qs);
    qs.copy_from_slice(&rebuilt);
    Ok((layout, z))
}

/// Orthonormal nullspace basis of the rows restricted to the free coordinates
/// and a particular solution, with fixed coordinates moved to the right side.
fn nullspace_of_rows(rows: &[LinearRow], free: &[usize], fixed: &[usize], p0: &Vec12, body: usize) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let m = rows.len();
    let nf = free.len();
    let mut a = DMatrix::zeros(m, nf);
    let mut rhs = DVector::zeros(m);
    for (r, row) in rows.iter().enumerate() {
        for k in 0..12 {
            let c = row.coeffs[k];
            if c == 0.0 {
                continue;
            }
            if let Some(j) = free.iter().position(|&f| f == k) {
                a[(r, j)] = c;
            } else if fixed.contains(&k) {
                rhs[r] -= c * p0[k];
            } else {
                return Err(Error::Constraint(format!("body {body}: linear row touches a shared tetrahedron vertex")));
            }
        }
        rhs[r] += row.rhs;
    }
    // Full SVD of Aᵀ A gives the row space and nullspace of A.
    let svd = nalgebra::SVD::new(a.transpose() * &a, true, true);
    let v = svd.v_t.expect("requested").transpose();
    let tol = 1e-10 * svd.singular_values.max().max(1.0);
    let null: Vec<usize> = (0..nf).filter(|&i| svd.singular_values[i] <= tol).collect();
    let basis = DMatrix::from_fn(nf, null.len(), |r, c| v[(r, null[c])]);
    let particular = a
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::Constraint(format!("body {body}: {e}")))?;
    if (&a * &particular - &rhs).norm() > 1e-9 * rhs.norm().max(1.0) {
        return Err(Error::Constraint(format!("body {body}: inconsistent linear rows")));
    }
    Ok((basis, particular))
}

/// Regular-tetrahedron completion of up to four required rest-frame points.
/// Two points become an edge of a regular tetrahedron; the remaining vertices
/// are placed on the side of `toward`.
pub fn complete_tet(points: &[Vec3], toward: &Vec3, size: f64) -> Result<[Vec3; 4]> {
    let away = |base: &Vec3, dir: &Vec3| -> Vec3 {
        let d = toward - base;
        let d = d - dir * dir.dot(&d);
        if d.norm() > 1e-9 * size {
            d.normalize()
        } else {
            let helper = if dir.x.abs() < 0.6 { Vec3::x() } else { Vec3::y() };
            dir.cross(&helper).normalize()
        }
    };
    let tet = match points {
        [a, b, c, d] => [*a, *b, *c, *d],
        [a, b, c] => {
            let n = (b - a).cross(&(c - a));
            if n.norm() <= 0.0 {
                return Err(Error::Constraint("collinear joint points".into()));
            }
            let n = n.normalize();
            let side = if n.dot(&(toward - a)) >= 0.0 { 1.0 } else { -1.0 };
            let edge = ((b - a).norm() + (c - b).norm() + (a - c).norm()) / 3.0;
            let m = (a + b + c) / 3.0;
            [*a, *b, *c, m + n * (side * edge * (2.0f64 / 3.0).sqrt())]
        }
        [a, b] => {
            let e = b - a;
            let l = e.norm();
            if l <= 0.0 {
                return Err(Error::Constraint("coincident joint points".into()));
            }
            let e = e / l;
            let mid = (a + b) / 2.0;
            let u = away(&mid, &e);
            let w = e.cross(&u);
            let c = mid + u * (l / 2f64.sqrt());
            [*a, *b, c + w * (l / 2.0), c - w * (l / 2.0)]
        }
        [a] => {
            let dir = away(a, &Vec3::zeros());
            let (e, _) = orthonormal_pair(&dir);
            let b = a + e * size;
            return complete_tet(&[*a, b], toward, size);
        }
        [] => {
            let s = size / 2.0;
            [
                toward + Vec3::new(s, s, s),
                toward + Vec3::new(s, -s, -s),
                toward + Vec3::new(-s, s, -s),
                toward + Vec3::new(-s, -s, s),
            ]
        }
        _ => return Err(Error::Constraint("more than four joint points on one body".into())),
    };
    VirtualTet::new(tet)?;
    Ok(tet)
}

fn orthonormal_pair(n: &Vec3) -> (Vec3, Vec3) {
    let n = if n.norm() > 0.0 { n.normalize() } else { Vec3::z() };
    let helper = if n.x.abs() < 0.6 { Vec3::x() } else { Vec3::y() };
    let a = n.cross(&helper).normalize();
    (a, n.cross(&a))
}

/// Rest-frame position of a world point for body coordinates `q`.
pub fn to_rest_frame(q: &BodyCoords, x: &Vec3) -> Result<Vec3> {
    let inv: Mat3 = q
        .linear()
        .try_inverse()
        .ok_or_else(|| Error::Constraint("singular body transform".into()))?;
    Ok(inv * (x - q.translation()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn regular() -> [Vec3; 4] {
        [
            Vec3::new(1.0, 1.0, 1.0),
            Vec3::new(1.0, -1.0, -1.0),
            Vec3::new(-1.0, 1.0, -1.0),
            Vec3::new(-1.0, -1.0, 1.0),
        ]
    }

    fn rand_vec(rng: &mut ChaCha8Rng) -> Vec3 {
        Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    }

    #[test]
    fn phi_examples() {
        let pb = TetMatrix::from_columns(&regular());
        let q = phi(&pb, &pb).unwrap();
        assert!(q.translation().norm() < 1e-15);
        assert!((q.linear() - Mat3::identity()).norm() < 1e-14);
        let t = Vec3::new(0.5, -2.0, 3.0);
        let shifted = TetMatrix::from_columns(&regular().map(|v| v + t));
        let q = phi(&shifted, &pb).unwrap();
        assert!((q.translation() - t).norm() < 1e-14);
        assert!((q.linear() - Mat3::identity()).norm() < 1e-14);
        let q = phi(&(pb * 2.0), &pb).unwrap();
        assert!(q.translation().norm() < 1e-14);
        assert!((q.linear() - Mat3::identity() * 2.0).norm() < 1e-14);
        assert!(phi(&pb, &TetMatrix::zeros()).is_err());
    }

    #[test]
    fn round_trip_and_linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..200 {
            let rest = [rand_vec(&mut rng), rand_vec(&mut rng), rand_vec(&mut rng), rand_vec(&mut rng)];
            let Ok(tet) = VirtualTet::new(rest) else { continue };
            let q = BodyCoords(Vec12::from_fn(|_, _| rng.random_range(-1.0..1.0)));
            let back = tet.coords_from_vertices(&tet.vertices_for(&q));
            assert!((back.0 - q.0).norm() <= 1e-12 * q.0.norm().max(1.0) * 1e2, "{}", (back.0 - q.0).norm());
            let p1 = vec_of(&[rand_vec(&mut rng), rand_vec(&mut rng), rand_vec(&mut rng), rand_vec(&mut rng)]);
            let p2 = vec_of(&[rand_vec(&mut rng), rand_vec(&mut rng), rand_vec(&mut rng), rand_vec(&mut rng)]);
            let g = tet.reparam_map();
            let lhs = tet.coords_from_vec(&p1).0 - tet.coords_from_vec(&p2).0;
            assert!((lhs - g * (p1 - p2)).norm() < 1e-9 * (p1 - p2).norm());
        }
    }

    #[test]
    fn map_matches_finite_differences() {
        let tet = VirtualTet::new(regular().map(|v| v * 0.3 + Vec3::new(0.2, 0.0, -0.1))).unwrap();
        let p = vec_of(&regular());
        let h = 1e-6;
        for k in 0..12 {
            let mut pp = p;
            let mut pm = p;
            pp[k] += h;
            pm[k] -= h;
            let col = (tet.coords_from_vec(&pp).0 - tet.coords_from_vec(&pm).0) / (2.0 * h);
            assert!((col - tet.reparam_map().column(k)).norm() < 1e-9);
        }
    }

    #[test]
    fn degenerate_tet_rejected() {
        let flat = [Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::new(1.0, 1.0, 0.0)];
        assert!(VirtualTet::new(flat).is_err());
    }

    #[test]
    fn completion_builds_regular_edge_tet() {
        let a = Vec3::new(0.0, 0.0, -0.5);
        let b = Vec3::new(0.0, 0.0, 0.5);
        let t = complete_tet(&[a, b], &Vec3::new(1.0, 0.0, 0.0), 1.0).unwrap();
        for i in 0..4 {
            for j in i + 1..4 {
                assert!(((t[i] - t[j]).norm() - 1.0).abs() < 1e-12);
            }
        }
        assert!(t[2].x > 0.0 && t[3].x > 0.0);
    }

    #[test]
    fn layout_identity_and_fixed_vertices() {
        let mut qs = vec![BodyCoords::identity(), BodyCoords::identity(), BodyCoords::identity()];
        let tet = VirtualTet::new(regular()).unwrap();
        let tets = vec![
            None,
            Some(BodyTet {
                tet: tet.clone(),
                roles: [VertexRole::Fixed, VertexRole::Fixed, VertexRole::Free, VertexRole::Free],
                rows: vec![],
            }),
            None,
        ];
        let (layout, z) = build_layout(&[false, false, true], &tets, &mut qs).unwrap();
        assert_eq!(layout.node_dims, vec![12, 6]);
        assert!(layout.body_maps[2].is_none());
        let q = layout.body_coords(&z, &qs);
        assert!((q[1].0 - BodyCoords::identity().0).norm() < 1e-12);
        // moving the free node never moves the fixed vertices
        let mut z2 = z.clone();
        for i in 12..18 {
            z2[i] += 0.1 * i as f64;
        }
        let moved = layout.body_coords(&z2, &qs);
        let v = tet.vertices_for(&moved[1]);
        assert!((v[0] - regular()[0]).norm() < 1e-12);
        assert!((v[1] - regular()[1]).norm() < 1e-12);

        let all_fixed = vec![Some(BodyTet {
            tet,
            roles: [VertexRole::Fixed; 4],
            rows: vec![],
        })];
        let mut one = vec![BodyCoords::identity()];
        assert!(build_layout(&[false], &all_fixed, &mut one).is_err());
    }

    #[test]
    fn shared_vertices_merge_into_one_node() {
        let tet = VirtualTet::new(regular()).unwrap();
        let mut qs = vec![BodyCoords::identity(); 2];
        let tets = vec![
            Some(BodyTet {
                tet: tet.clone(),
                roles: [VertexRole::Free, VertexRole::Free, VertexRole::Shared(0), VertexRole::Shared(1)],
                rows: vec![],
            }),
            Some(BodyTet {
                tet,
                roles: [VertexRole::Free, VertexRole::Free, VertexRole::Shared(0), VertexRole::Shared(1)],
                rows: vec![],
            }),
        ];
        let (layout, _) = build_layout(&[false, false], &tets, &mut qs).unwrap();
        assert_eq!(layout.node_dims, vec![3, 3, 6, 6]);
        assert_eq!(layout.node_bodies[0], vec![0, 1]);
    }

    #[test]
    fn linear_rows_reduce_free_coordinates() {
        let tet = VirtualTet::new(regular()).unwrap();
        let mut qs = vec![BodyCoords::identity()];
        let mut coeffs = Vec12::zeros();
        coeffs[6] = 1.0; // x of vertex 2
        coeffs[9] = -1.0; // x of vertex 3
        let tets = vec![Some(BodyTet {
            tet,
            roles: [VertexRole::Fixed, VertexRole::Fixed, VertexRole::Free, VertexRole::Free],
            rows: vec![LinearRow { coeffs, rhs: 0.0 }],
        })];
        let (layout, z) = build_layout(&[false], &tets, &mut qs).unwrap();
        assert_eq!(layout.node_dims, vec![5]);
        let mut z2 = z.clone();
        z2.iter_mut().enumerate().for_each(|(i, v)| *v += 0.01 * (i + 1) as f64);
        let q = layout.body_coords(&z2, &qs);
        let tet = tets[0].as_ref().unwrap().tet.clone();
        let v = tet.vertices_for(&q[0]);
        assert!((v[2].x - v[3].x).abs() < 1e-12);
    }
}
