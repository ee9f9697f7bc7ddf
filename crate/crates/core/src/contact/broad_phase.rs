//! Interval-AABB culling with shallow per-overlap trees.
//!
//! Each body gets the box of its vertices swept over the search interval,
//! inflated by `d̂`. For every overlapping body pair only the primitives whose
//! swept boxes (inflated by `d̂/2`) reach into the overlap box are kept, and a
//! three-level binary tree is built over them on each side. Leaf-vs-leaf
//! primitive box tests then emit vertex–face and edge–edge candidates.

use rayon::prelude::*;

use super::{ContactPair, PairKind};
use crate::body::{AffineBody, BodyCoords};
use crate::mesh::{aabb_overlap, Aabb, SurfaceMesh};

/// Candidate primitive pairs plus the body pairs whose boxes overlap.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CandidateSet {
    /// Sorted, duplicate-free.
    pub pairs: Vec<ContactPair>,
    /// Canonical `(a, b)` body pairs with a non-empty overlap box, sorted.
    pub body_pairs: Vec<(usize, usize)>,
}

impl CandidateSet {
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BroadPhaseStats {
    pub overlapping_body_pairs: usize,
    /// Primitives (vertices, edges and faces of both sides) kept inside overlap boxes.
    pub clipped_primitives: usize,
    /// Primitive pairs examined in leaf-vs-leaf tests.
    pub pairs_examined: u64,
    pub candidates: usize,
}

impl std::ops::AddAssign for BroadPhaseStats {
    fn add_assign(&mut self, o: Self) {
        self.overlapping_body_pairs += o.overlapping_body_pairs;
        self.clipped_primitives += o.clipped_primitives;
        self.pairs_examined += o.pairs_examined;
        self.candidates += o.candidates;
    }
}

/// Swept, inflated primitive boxes of one body over an interval.
struct SweptBody {
    vertex_boxes: Vec<Aabb>,
    body_box: Aabb,
}

fn sweep(body: &AffineBody, q0: &BodyCoords, q1: &BodyCoords, d_hat: f64) -> SweptBody {
    let x0 = body.world_vertices(q0);
    let x1 = body.world_vertices(q1);
    let mut body_box = Aabb::empty();
    let vertex_boxes = x0
        .iter()
        .zip(&x1)
        .map(|(a, b)| {
            let mut bx = Aabb::empty();
            bx.grow(a);
            bx.grow(b);
            let bx = bx.inflate(0.5 * d_hat);
            body_box.merge(&bx);
            bx
        })
        .collect();
    SweptBody {
        vertex_boxes,
        body_box: body_box.inflate(0.5 * d_hat),
    }
}

#[derive(Clone, Copy)]
struct Item {
    idx: usize,
    aabb: Aabb,
}

#[derive(Default)]
struct Leaf {
    aabb: Aabb,
    verts: Vec<Item>,
    edges: Vec<Item>,
    faces: Vec<Item>,
}

#[derive(Clone, Copy)]
enum Kind {
    Vertex,
    Edge,
    Face,
}

fn primitive_items(mesh: &SurfaceMesh, swept: &SweptBody, clip: Option<&Aabb>) -> Vec<(Kind, Item)> {
    let vb = &swept.vertex_boxes;
    let union = |ids: &[usize]| {
        let mut b = Aabb::empty();
        for &i in ids {
            b.merge(&vb[i]);
        }
        b
    };
    let keep = |b: &Aabb| clip.is_none_or(|c| c.overlaps(b));
    let mut items = Vec::new();
    for (idx, aabb) in vb.iter().enumerate() {
        if keep(aabb) {
            items.push((Kind::Vertex, Item { idx, aabb: *aabb }));
        }
    }
    for (idx, e) in mesh.edges.iter().enumerate() {
        let aabb = union(e);
        if keep(&aabb) {
            items.push((Kind::Edge, Item { idx, aabb }));
        }
    }
    for (idx, t) in mesh.triangles.iter().enumerate() {
        let aabb = union(t);
        if keep(&aabb) {
            items.push((Kind::Face, Item { idx, aabb }));
        }
    }
    items
}

fn split_median(items: &mut [(Kind, Item)]) -> usize {
    let mut bounds = Aabb::empty();
    for (_, it) in items.iter() {
        bounds.grow(&it.aabb.center());
    }
    let axis = if items.is_empty() { 0 } else { bounds.extent().imax() };
    let mid = items.len() / 2;
    if mid > 0 {
        items.select_nth_unstable_by(mid, |a, b| a.1.aabb.center()[axis].total_cmp(&b.1.aabb.center()[axis]));
    }
    mid
}

/// Root, two children and four leaves; only the leaves are materialized.
fn three_level_tree(mut items: Vec<(Kind, Item)>) -> Vec<Leaf> {
    let mid = split_median(&mut items);
    let (left, right) = items.split_at_mut(mid);
    let mut leaves = Vec::with_capacity(4);
    for half in [left, right] {
        let m = split_median(half);
        let (l, r) = half.split_at_mut(m);
        for part in [&*l, &*r] {
            let mut leaf = Leaf::default();
            for (kind, it) in part {
                leaf.aabb.merge(&it.aabb);
                match kind {
                    Kind::Vertex => leaf.verts.push(*it),
                    Kind::Edge => leaf.edges.push(*it),
                    Kind::Face => leaf.faces.push(*it),
                }
            }
            if !part.is_empty() {
                leaves.push(leaf);
            }
        }
    }
    leaves
}

fn examined(la: &Leaf, lb: &Leaf) -> u64 {
    (la.verts.len() * lb.faces.len() + la.faces.len() * lb.verts.len() + la.edges.len() * lb.edges.len()) as u64
}

fn test_leaves(a: usize, b: usize, la: &Leaf, lb: &Leaf, out: &mut Vec<ContactPair>) {
    let mut emit = |xs: &[Item], ys: &[Item], kind: PairKind| {
        for x in xs {
            for y in ys {
                if x.aabb.overlaps(&y.aabb) {
                    out.push(ContactPair {
                        body_a: a,
                        body_b: b,
                        kind,
                        prim_a: x.idx,
                        prim_b: y.idx,
                    });
                }
            }
        }
    };
    emit(&la.verts, &lb.faces, PairKind::VertexFace);
    emit(&la.faces, &lb.verts, PairKind::FaceVertex);
    emit(&la.edges, &lb.edges, PairKind::EdgeEdge);
}

fn overlapping_body_pairs(bodies: &[AffineBody], swept: &[SweptBody]) -> Vec<(usize, usize, Aabb)> {
    let mut out = Vec::new();
    for a in 0..bodies.len() {
        for b in a + 1..bodies.len() {
            if bodies[a].is_static() && bodies[b].is_static() {
                continue;
            }
            if let Some(o) = aabb_overlap(&swept[a].body_box, &swept[b].body_box) {
                out.push((a, b, o));
            }
        }
    }
    out
}

fn sweep_all(bodies: &[AffineBody], q_start: &[BodyCoords], q_end: &[BodyCoords], d_hat: f64) -> Vec<SweptBody> {
    bodies
        .par_iter()
        .enumerate()
        .map(|(i, b)| sweep(b, &q_start[i], &q_end[i], d_hat))
        .collect()
}

/// Candidate pairs whose primitives may come within `d_hat` of each other
/// anywhere along the linear interval from `q_start` to `q_end`.
pub fn broad_phase(bodies: &[AffineBody], q_start: &[BodyCoords], q_end: &[BodyCoords], d_hat: f64) -> (CandidateSet, BroadPhaseStats) {
    let swept = sweep_all(bodies, q_start, q_end, d_hat);
    let overlaps = overlapping_body_pairs(bodies, &swept);
    let per_pair: Vec<(Vec<ContactPair>, BroadPhaseStats)> = overlaps
        .par_iter()
        .map(|&(a, b, ref o)| {
            let ia = primitive_items(&bodies[a].mesh, &swept[a], Some(o));
            let ib = primitive_items(&bodies[b].mesh, &swept[b], Some(o));
            let mut stats = BroadPhaseStats {
                overlapping_body_pairs: 1,
                clipped_primitives: ia.len() + ib.len(),
                ..Default::default()
            };
            let mut pairs = Vec::new();
            if ia.is_empty() || ib.is_empty() {
                return (pairs, stats);
            }
            let ta = three_level_tree(ia);
            let tb = three_level_tree(ib);
            for la in &ta {
                for lb in &tb {
                    if la.aabb.overlaps(&lb.aabb) {
                        stats.pairs_examined += examined(la, lb);
                        test_leaves(a, b, la, lb, &mut pairs);
                    }
                }
            }
            pairs.sort_unstable();
            stats.candidates = pairs.len();
            (pairs, stats)
        })
        .collect();
    let mut set = CandidateSet {
        pairs: Vec::with_capacity(per_pair.iter().map(|p| p.0.len()).sum()),
        body_pairs: overlaps.iter().map(|&(a, b, _)| (a, b)).collect(),
    };
    let mut stats = BroadPhaseStats::default();
    for (pairs, s) in per_pair {
        set.pairs.extend(pairs);
        stats += s;
    }
    (set, stats)
}

/// Number of primitive pairs the same three-level hierarchy would examine if
/// built over every primitive of each body instead of only those inside the
/// overlap box. Used as the reference for culling efficiency.
pub fn full_body_pair_count(bodies: &[AffineBody], q_start: &[BodyCoords], q_end: &[BodyCoords], d_hat: f64) -> u64 {
    let swept = sweep_all(bodies, q_start, q_end, d_hat);
    let trees: Vec<Vec<Leaf>> = bodies
        .par_iter()
        .zip(&swept)
        .map(|(b, s)| three_level_tree(primitive_items(&b.mesh, s, None)))
        .collect();
    overlapping_body_pairs(bodies, &swept)
        .par_iter()
        .map(|&(a, b, _)| {
            let mut n = 0;
            for la in &trees[a] {
                for lb in &trees[b] {
                    if la.aabb.overlaps(&lb.aabb) {
                        n += examined(la, lb);
                    }
                }
            }
            n
        })
        .sum()
}

/// World-space swept box of each body, inflated by `d_hat`.
pub fn body_boxes(bodies: &[AffineBody], q_start: &[BodyCoords], q_end: &[BodyCoords], d_hat: f64) -> Vec<Aabb> {
    sweep_all(bodies, q_start, q_end, d_hat).into_iter().map(|s| s.body_box).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::PairGeometry;
    use crate::math::{Mat3, Vec3};
    use crate::mesh::{box_mesh, icosphere};
    use std::collections::BTreeSet;

    const D_HAT: f64 = 1e-3;

    fn cubes(gap: f64) -> (Vec<AffineBody>, Vec<BodyCoords>) {
        let cube = box_mesh(Vec3::repeat(1.0));
        let bodies = vec![
            AffineBody::new_dynamic("a", cube.clone(), 1.0, 1.0).unwrap(),
            AffineBody::new_dynamic("b", cube, 1.0, 1.0).unwrap(),
        ];
        let qs = vec![
            BodyCoords::identity(),
            BodyCoords::from_parts(&Vec3::new(0.1, 0.0, 1.0 + gap), &Mat3::identity()),
        ];
        (bodies, qs)
    }

    /// All-pairs inflated-box test without any tree or clipping.
    fn brute_force_boxes(bodies: &[AffineBody], q0: &[BodyCoords], q1: &[BodyCoords]) -> BTreeSet<ContactPair> {
        let swept: Vec<SweptBody> = bodies.iter().enumerate().map(|(i, b)| sweep(b, &q0[i], &q1[i], D_HAT)).collect();
        let mut out = BTreeSet::new();
        for a in 0..bodies.len() {
            for b in a + 1..bodies.len() {
                let ia = primitive_items(&bodies[a].mesh, &swept[a], None);
                let ib = primitive_items(&bodies[b].mesh, &swept[b], None);
                let leaf = |items: Vec<(Kind, Item)>| {
                    let mut l = Leaf::default();
                    for (k, it) in items {
                        match k {
                            Kind::Vertex => l.verts.push(it),
                            Kind::Edge => l.edges.push(it),
                            Kind::Face => l.faces.push(it),
                        }
                    }
                    l
                };
                let mut v = Vec::new();
                test_leaves(a, b, &leaf(ia), &leaf(ib), &mut v);
                out.extend(v);
            }
        }
        out
    }

    #[test]
    fn separated_bodies_give_empty_set() {
        let (bodies, qs) = cubes(3.0 * D_HAT);
        let (set, stats) = broad_phase(&bodies, &qs, &qs, D_HAT);
        assert!(set.is_empty());
        assert!(set.body_pairs.is_empty());
        assert_eq!(stats.pairs_examined, 0);
    }

    #[test]
    fn matches_all_pairs_box_test_and_covers_near_pairs() {
        let (bodies, qs) = cubes(0.5 * D_HAT);
        let (set, stats) = broad_phase(&bodies, &qs, &qs, D_HAT);
        let got: BTreeSet<ContactPair> = set.pairs.iter().copied().collect();
        assert_eq!(got.len(), set.pairs.len());
        assert_eq!(got, brute_force_boxes(&bodies, &qs, &qs));
        assert_eq!(stats.candidates, set.pairs.len());
        // every pair actually within d̂ is present
        let near = brute_force_boxes(&bodies, &qs, &qs)
            .into_iter()
            .filter(|p| PairGeometry::new(p, &bodies, &qs).distance().unwrap().d_sq < D_HAT * D_HAT)
            .count();
        assert!(near > 0);
        assert_eq!(set.body_pairs, vec![(0, 1)]);
    }

    #[test]
    fn candidate_order_is_canonical() {
        let (bodies, qs) = cubes(0.5 * D_HAT);
        let (set, _) = broad_phase(&bodies, &qs, &qs, D_HAT);
        assert!(set.pairs.windows(2).all(|w| w[0] < w[1]));
        let (again, _) = broad_phase(&bodies, &qs, &qs, D_HAT);
        assert_eq!(set, again);
    }

    #[test]
    fn static_pairs_skipped() {
        let cube = box_mesh(Vec3::repeat(1.0));
        let bodies = vec![AffineBody::new_static("a", cube.clone()), AffineBody::new_static("b", cube)];
        let qs = vec![BodyCoords::identity(); 2];
        assert!(broad_phase(&bodies, &qs, &qs, D_HAT).0.is_empty());
    }

    #[test]
    fn clipping_examines_fewer_pairs_than_full_trees() {
        let ball = icosphere(0.5, 3);
        let bodies = vec![
            AffineBody::new_dynamic("a", ball.clone(), 1.0, 1.0).unwrap(),
            AffineBody::new_dynamic("b", ball, 1.0, 1.0).unwrap(),
        ];
        let qs = vec![
            BodyCoords::identity(),
            BodyCoords::from_parts(&Vec3::new(0.0, 0.0, 1.0 + 0.5 * D_HAT), &Mat3::identity()),
        ];
        let (_, stats) = broad_phase(&bodies, &qs, &qs, D_HAT);
        let full = full_body_pair_count(&bodies, &qs, &qs, D_HAT);
        assert!(stats.pairs_examined * 10 < full, "{} vs {full}", stats.pairs_examined);
    }
}
