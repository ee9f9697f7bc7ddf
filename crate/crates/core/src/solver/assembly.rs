//! Gradient and Hessian assembly over dynamic bodies.
//!
//! Pass one evaluates every local term (per-body inertia and orthogonality,
//! per-pair contact and friction) in parallel. Pass two gathers, for each
//! target block, the contributions in a fixed canonical order (body term,
//! contact pairs in candidate order, friction pairs in order) and reduces the
//! targets in parallel. Every block therefore sees exactly the same sequence
//! of floating-point additions as [`assemble_sequential`].

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::sparse::BlockSparseMatrix;
use super::StepParams;
use crate::body::{ortho_gradient, ortho_hessian, AffineBody, BodyCoords};
use crate::contact::{pair_derivatives, ContactPair, FrictionDatum, PairDerivatives};
use crate::error::Result;
use crate::math::{Mat12, Vec12};

/// Dense numbering of the dynamic bodies.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ranks {
    pub rank_of: Vec<Option<usize>>,
    pub body_of: Vec<usize>,
}

impl Ranks {
    pub fn new(bodies: &[AffineBody]) -> Self {
        let mut rank_of = vec![None; bodies.len()];
        let mut body_of = Vec::new();
        for (b, body) in bodies.iter().enumerate() {
            if !body.is_static() {
                rank_of[b] = Some(body_of.len());
                body_of.push(b);
            }
        }
        Self { rank_of, body_of }
    }

    pub fn len(&self) -> usize {
        self.body_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.body_of.is_empty()
    }
}

/// Everything the assembly reads.
pub struct AssemblyInput<'a> {
    pub bodies: &'a [AffineBody],
    pub qs: &'a [BodyCoords],
    pub q_tilde: &'a [Vec12],
    pub candidates: &'a [ContactPair],
    /// Overlapping body pairs from the broad phase.
    pub body_pairs: &'a [(usize, usize)],
    pub friction: &'a [FrictionDatum],
    pub params: &'a StepParams,
    pub ranks: &'a Ranks,
}

/// Gradient per body (zero for static bodies) and the Hessian over ranks.
#[derive(Clone, Debug, PartialEq)]
pub struct Assembled {
    pub grad: Vec<Vec12>,
    pub hess: BlockSparseMatrix,
}

struct LocalPair {
    a: usize,
    b: usize,
    d: Box<PairDerivatives>,
}

fn body_term(input: &AssemblyInput, b: usize) -> (Vec12, Mat12) {
    let body = &input.bodies[b];
    let m = &body.mass.as_ref().expect("dynamic body").assembled;
    let dt2 = input.params.dt * input.params.dt;
    let q = &input.qs[b];
    let g = m * (q.0 - input.q_tilde[b]) + ortho_gradient(q, &body.material) * dt2;
    let h = m + ortho_hessian(q, &body.material, true) * dt2;
    (g, h)
}

type LocalTerms = (Vec<(Vec12, Mat12)>, Vec<LocalPair>);

/// Pass one: all local terms, in canonical order.
fn local_terms(input: &AssemblyInput) -> Result<LocalTerms> {
    let p = input.params;
    let bodies: Vec<(Vec12, Mat12)> = input.ranks.body_of.par_iter().map(|&b| body_term(input, b)).collect();
    let contacts: Vec<Option<LocalPair>> = input
        .candidates
        .par_iter()
        .map(|pair| {
            Ok(pair_derivatives(pair, input.bodies, input.qs, p.kappa_barrier, p.d_hat, true)?.map(|d| LocalPair {
                a: pair.body_a,
                b: pair.body_b,
                d: Box::new(d),
            }))
        })
        .collect::<Result<_>>()?;
    let eps = p.friction_eps();
    let friction: Vec<LocalPair> = input
        .friction
        .par_iter()
        .map(|f| LocalPair {
            a: f.pair.body_a,
            b: f.pair.body_b,
            d: Box::new(f.derivatives(input.bodies, input.qs, p.mu, eps)),
        })
        .collect();
    Ok((bodies, contacts.into_iter().flatten().chain(friction).collect()))
}

fn pattern(input: &AssemblyInput) -> Vec<(usize, usize)> {
    let r = |b: usize| input.ranks.rank_of[b];
    let mut set: Vec<(usize, usize)> = input
        .body_pairs
        .iter()
        .copied()
        .chain(input.friction.iter().map(|f| (f.pair.body_a, f.pair.body_b)))
        .filter_map(|(a, b)| Some((r(a)?, r(b)?)))
        .collect();
    set.sort_unstable();
    set.dedup();
    set
}

/// Which part of a local pair term feeds a target.
#[derive(Clone, Copy)]
enum Part {
    A,
    B,
}

fn grad_part(d: &PairDerivatives, part: Part) -> Vec12 {
    match part {
        Part::A => d.grad.fixed_rows::<12>(0).into_owned(),
        Part::B => d.grad.fixed_rows::<12>(12).into_owned(),
    }
}

fn hess_part(d: &PairDerivatives, part: Part) -> Mat12 {
    match part {
        Part::A => d.hess.fixed_view::<12, 12>(0, 0).into_owned(),
        Part::B => d.hess.fixed_view::<12, 12>(12, 12).into_owned(),
    }
}

fn hess_off(d: &PairDerivatives) -> Mat12 {
    d.hess.fixed_view::<12, 12>(0, 12).into_owned()
}

/// Two-pass parallel assembly.
pub fn assemble(input: &AssemblyInput) -> Result<Assembled> {
    let (body_terms, pairs) = local_terms(input)?;
    let ranks = input.ranks;
    let n = ranks.len();

    let mut per_rank: Vec<Vec<(usize, Part)>> = vec![Vec::new(); n];
    let mut per_upper: BTreeMap<(usize, usize), Vec<usize>> = pattern(input).into_iter().map(|k| (k, Vec::new())).collect();
    for (k, lp) in pairs.iter().enumerate() {
        let (ra, rb) = (ranks.rank_of[lp.a], ranks.rank_of[lp.b]);
        if let Some(ra) = ra {
            per_rank[ra].push((k, Part::A));
        }
        if let Some(rb) = rb {
            per_rank[rb].push((k, Part::B));
        }
        if let (Some(ra), Some(rb)) = (ra, rb) {
            per_upper.entry((ra, rb)).or_default().push(k);
        }
    }

    let diag_and_grad: Vec<(Vec12, Mat12)> = (0..n)
        .into_par_iter()
        .map(|r| {
            let mut g = Vec12::zeros();
            let mut h = Mat12::zeros();
            g += body_terms[r].0;
            h += body_terms[r].1;
            for &(k, part) in &per_rank[r] {
                g += grad_part(&pairs[k].d, part);
                h += hess_part(&pairs[k].d, part);
            }
            (g, h)
        })
        .collect();
    let upper_list: Vec<((usize, usize), &Vec<usize>)> = per_upper.iter().map(|(k, v)| (*k, v)).collect();
    let upper: Vec<((usize, usize), Mat12)> = upper_list
        .par_iter()
        .map(|(key, list)| {
            let mut h = Mat12::zeros();
            for &k in list.iter() {
                h += hess_off(&pairs[k].d);
            }
            (*key, h)
        })
        .collect();

    let mut grad = vec![Vec12::zeros(); input.bodies.len()];
    let mut hess = BlockSparseMatrix::with_pattern(n, std::iter::empty());
    for (r, (g, h)) in diag_and_grad.into_iter().enumerate() {
        grad[ranks.body_of[r]] = g;
        hess.diag[r] = h;
    }
    hess.upper = upper.into_iter().collect();
    Ok(Assembled { grad, hess })
}

/// Single-threaded reference assembly in the same canonical order.
pub fn assemble_sequential(input: &AssemblyInput) -> Result<Assembled> {
    let ranks = input.ranks;
    let p = input.params;
    let n = ranks.len();
    let mut grad = vec![Vec12::zeros(); input.bodies.len()];
    let mut hess = BlockSparseMatrix::with_pattern(n, pattern(input));
    for (r, &b) in ranks.body_of.iter().enumerate() {
        let (g, h) = body_term(input, b);
        grad[b] += g;
        hess.diag[r] += h;
    }
    let mut add = |a: usize, b: usize, d: &PairDerivatives| {
        let (ra, rb) = (ranks.rank_of[a], ranks.rank_of[b]);
        if let Some(ra) = ra {
            grad[a] += grad_part(d, Part::A);
            hess.diag[ra] += hess_part(d, Part::A);
        }
        if let Some(rb) = rb {
            grad[b] += grad_part(d, Part::B);
            hess.diag[rb] += hess_part(d, Part::B);
        }
        if let (Some(ra), Some(rb)) = (ra, rb) {
            *hess.upper.entry((ra, rb)).or_insert_with(Mat12::zeros) += hess_off(d);
        }
    };
    for pair in input.candidates {
        if let Some(d) = pair_derivatives(pair, input.bodies, input.qs, p.kappa_barrier, p.d_hat, true)? {
            add(pair.body_a, pair.body_b, &d);
        }
    }
    for f in input.friction {
        let d = f.derivatives(input.bodies, input.qs, p.mu, p.friction_eps());
        add(f.pair.body_a, f.pair.body_b, &d);
    }
    Ok(Assembled { grad, hess })
}
