//! Implicit-Euler time stepping by projected Newton on the incremental
//! potential, with CCD-filtered backtracking line search.

pub mod assembly;
pub mod sparse;

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::body::{ortho_energy, AffineBody, BodyCoords};
use crate::ccd::{step_filter, DEFAULT_SLACK};
use crate::constraints::DofLayout;
use crate::contact::{broad_phase, contact_energy, friction_energy, friction_precompute, min_distance, CandidateSet, ContactPair, FrictionDatum};
use crate::error::{Error, Result};
use crate::math::{inf_norm, Vec12};
use assembly::{assemble, AssemblyInput, Ranks};
use sparse::solve_newton_system;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepParams {
    pub dt: f64,
    pub d_hat: f64,
    pub kappa_barrier: f64,
    pub mu: f64,
    /// Static friction velocity threshold `ε_v`.
    pub epsilon_v: f64,
    /// Convergence threshold on `‖Δq‖∞ / Δt`.
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub friction_outer_iters: usize,
    pub ccd_slack: f64,
    /// Fraction of the certified CCD step tried first.
    pub ccd_step_fraction: f64,
}

impl Default for StepParams {
    fn default() -> Self {
        Self {
            dt: 0.01,
            d_hat: 1e-3,
            kappa_barrier: 1e4,
            mu: 0.0,
            epsilon_v: 1e-3,
            newton_tol: 1e-2,
            max_newton_iters: 100,
            friction_outer_iters: 1,
            ccd_slack: DEFAULT_SLACK,
            ccd_step_fraction: 0.9,
        }
    }
}

impl StepParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Scene(format!("invalid step parameter: {what}")));
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if !(self.d_hat > 0.0) {
            return bad("d_hat must be positive");
        }
        if !(self.newton_tol > 0.0) {
            return bad("newton_tol must be positive");
        }
        if !(self.kappa_barrier > 0.0) {
            return bad("kappa_barrier must be positive");
        }
        if !(self.mu >= 0.0) {
            return bad("mu must be non-negative");
        }
        if !(self.epsilon_v > 0.0) {
            return bad("epsilon_v must be positive");
        }
        if !(self.ccd_slack > 0.0 && self.ccd_slack < 1.0) {
            return bad("ccd_slack must lie in (0, 1)");
        }
        if !(self.ccd_step_fraction > 0.0 && self.ccd_step_fraction <= 1.0) {
            return bad("ccd_step_fraction must lie in (0, 1]");
        }
        if self.max_newton_iters == 0 {
            return bad("max_newton_iters must be at least 1");
        }
        Ok(())
    }

    /// Friction mollifier width `ε_v Δt` in displacement units.
    pub fn friction_eps(&self) -> f64 {
        self.epsilon_v * self.dt
    }
}

/// `q̃ = qᵗ + Δt q̇ᵗ + Δt² M⁻¹ f` per body; static bodies keep `qᵗ`.
pub fn compute_q_tilde(bodies: &[AffineBody], qs: &[BodyCoords], q_dots: &[Vec12], forces: &[Vec12], dt: f64) -> Vec<Vec12> {
    bodies
        .iter()
        .enumerate()
        .map(|(b, body)| match &body.mass {
            None => qs[b].0,
            Some(m) => qs[b].0 + q_dots[b] * dt + m.solve(&forces[b]) * (dt * dt),
        })
        .collect()
}

/// `Σ_b [½‖q_b − q̃_b‖²_M + Δt² V⊥(q_b)] + V_C + V_F`.
pub fn ip_value(
    bodies: &[AffineBody],
    qs: &[BodyCoords],
    q_tilde: &[Vec12],
    candidates: &[ContactPair],
    friction: &[FrictionDatum],
    params: &StepParams,
) -> Result<f64> {
    let dt2 = params.dt * params.dt;
    let mut e = 0.0;
    for (b, body) in bodies.iter().enumerate() {
        if let Some(m) = &body.mass {
            let d = qs[b].0 - q_tilde[b];
            e += 0.5 * d.dot(&(m.assembled * d)) + dt2 * ortho_energy(&qs[b], &body.material);
        }
    }
    e += contact_energy(bodies, qs, candidates, params.kappa_barrier, params.d_hat)?;
    e += friction_energy(bodies, qs, friction, params.mu, params.friction_eps());
    Ok(e)
}

/// Wall-clock seconds spent in each phase of a step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhaseTimes {
    pub broad_phase: f64,
    pub narrow_phase: f64,
    pub assembly: f64,
    pub solve: f64,
    pub ccd: f64,
    pub line_search: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepStats {
    /// Newton linear solves, including the one that detects convergence,
    /// summed over friction outer iterations.
    pub newton_iters: usize,
    pub converged: bool,
    /// Smallest candidate-pair distance at the end of the step, capped at `d̂`.
    pub min_distance: f64,
    pub candidate_pairs: usize,
    pub ip_value: f64,
    /// Incremental potential after every accepted iterate.
    pub energy_trace: Vec<f64>,
    pub descent_fallbacks: usize,
    pub times: PhaseTimes,
}

/// Dynamic state of a scene: body coordinates, generalized velocities and
/// the reduced unknowns of the constraint layout.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub bodies: Vec<AffineBody>,
    pub layout: DofLayout,
    pub z: DVector<f64>,
    pub qs: Vec<BodyCoords>,
    pub q_dots: Vec<Vec12>,
    pub params: StepParams,
    /// Completed steps.
    pub step: usize,
    ranks: Ranks,
}

/// Accepted-iterate observer, called with body coordinates after every
/// accepted line-search step.
pub type IterateHook<'a> = &'a mut dyn FnMut(&[AffineBody], &[BodyCoords]);

impl Simulation {
    /// `qs` must already be consistent with `layout` and `z`.
    pub fn new(bodies: Vec<AffineBody>, layout: DofLayout, z: DVector<f64>, qs: Vec<BodyCoords>, q_dots: Vec<Vec12>, params: StepParams) -> Result<Self> {
        params.validate()?;
        let ranks = Ranks::new(&bodies);
        Ok(Self {
            bodies,
            layout,
            z,
            qs,
            q_dots,
            params,
            step: 0,
            ranks,
        })
    }

    /// Unconstrained bodies: every dynamic body is its own 12-dim node.
    pub fn unconstrained(bodies: Vec<AffineBody>, mut qs: Vec<BodyCoords>, q_dots: Vec<Vec12>, params: StepParams) -> Result<Self> {
        let is_static: Vec<bool> = bodies.iter().map(|b| b.is_static()).collect();
        let tets = vec![None; bodies.len()];
        let (layout, z) = crate::constraints::build_layout(&is_static, &tets, &mut qs)?;
        Self::new(bodies, layout, z, qs, q_dots, params)
    }

    pub fn ranks(&self) -> &Ranks {
        &self.ranks
    }

    /// Advances one time step under per-body generalized external forces.
    pub fn advance_step(&mut self, forces: &[Vec12]) -> Result<StepStats> {
        self.advance_step_observed(forces, &mut |_, _| {})
    }

    pub fn advance_step_observed(&mut self, forces: &[Vec12], hook: IterateHook) -> Result<StepStats> {
        let p = self.params;
        let q_start = self.qs.clone();
        let q_tilde = compute_q_tilde(&self.bodies, &self.qs, &self.q_dots, forces, p.dt);
        let mut stats = StepStats::default();
        let outer = p.friction_outer_iters.max(1);
        let mut converged = false;
        for k in 0..outer {
            let friction = if p.mu > 0.0 {
                // Lagged from the start of the step, then from the latest iterate.
                let lag = if k == 0 { &q_start } else { &self.qs };
                let t = Instant::now();
                let (cands, _) = broad_phase(&self.bodies, lag, lag, p.d_hat);
                stats.times.broad_phase += t.elapsed().as_secs_f64();
                friction_precompute(&self.bodies, lag, &cands.pairs, p.kappa_barrier, p.d_hat, p.mu)?
            } else {
                Vec::new()
            };
            converged = self.newton(&q_tilde, &friction, &mut stats, hook)?;
        }
        stats.converged = converged;
        if !converged {
            log::warn!("Newton did not converge within {} iterations", p.max_newton_iters);
        }
        for (b, body) in self.bodies.iter().enumerate() {
            if !body.is_static() {
                self.q_dots[b] = (self.qs[b].0 - q_start[b].0) / p.dt;
            }
        }
        self.step += 1;
        let t = Instant::now();
        let (cands, _) = broad_phase(&self.bodies, &self.qs, &self.qs, p.d_hat);
        stats.times.broad_phase += t.elapsed().as_secs_f64();
        stats.candidate_pairs = cands.pairs.len();
        stats.min_distance = min_distance(&self.bodies, &self.qs, &cands.pairs).map_or(p.d_hat, |d| d.min(p.d_hat));
        Ok(stats)
    }

    fn newton(&mut self, q_tilde: &[Vec12], friction: &[FrictionDatum], stats: &mut StepStats, hook: IterateHook) -> Result<bool> {
        let p = self.params;
        for iteration in 0..p.max_newton_iters {
            let t = Instant::now();
            let (cands, _) = broad_phase(&self.bodies, &self.qs, &self.qs, p.d_hat);
            stats.times.broad_phase += t.elapsed().as_secs_f64();

            let t = Instant::now();
            let input = AssemblyInput {
                bodies: &self.bodies,
                qs: &self.qs,
                q_tilde,
                candidates: &cands.pairs,
                body_pairs: &cands.body_pairs,
                friction,
                params: &p,
                ranks: &self.ranks,
            };
            let assembled = assemble(&input)?;
            stats.times.narrow_phase += t.elapsed().as_secs_f64();

            let t = Instant::now();
            let g = self.layout.reduce_gradient(&assembled.grad);
            let h = self.layout.reduce_hessian(&assembled.hess, &self.ranks.body_of);
            stats.times.assembly += t.elapsed().as_secs_f64();

            let t = Instant::now();
            let mut dz = solve_newton_system(&h, &g)?;
            if g.dot(&dz) >= 0.0 && g.norm() > 0.0 {
                log::warn!("Newton direction is not a descent direction; using steepest descent");
                stats.descent_fallbacks += 1;
                dz = -&g;
            }
            stats.times.solve += t.elapsed().as_secs_f64();

            stats.newton_iters += 1;
            let dqs = self.layout.body_step(&dz);
            let step_norm = inf_norm(&dqs);
            if step_norm / p.dt < p.newton_tol {
                stats.ip_value = ip_value(&self.bodies, &self.qs, q_tilde, &cands.pairs, friction, &p)?;
                return Ok(true);
            }

            let t = Instant::now();
            let q_end: Vec<BodyCoords> = self.qs.iter().zip(&dqs).map(|(q, d)| BodyCoords(q.0 + d)).collect();
            let (interval, _) = broad_phase(&self.bodies, &self.qs, &q_end, p.d_hat);
            stats.times.broad_phase += t.elapsed().as_secs_f64();

            let t = Instant::now();
            let alpha_max = step_filter(&self.bodies, &self.qs, &dqs, &interval.pairs, p.ccd_slack)?;
            stats.times.ccd += t.elapsed().as_secs_f64();

            let t = Instant::now();
            let predicted = -g.dot(&dz);
            let Some((alpha, e1)) = self.line_search(q_tilde, friction, &interval, &dz, alpha_max, iteration, step_norm, predicted)? else {
                stats.times.line_search += t.elapsed().as_secs_f64();
                log::debug!("iteration {iteration}: no decrease representable, |dq|inf {step_norm:.3e}");
                stats.ip_value = ip_value(&self.bodies, &self.qs, q_tilde, &cands.pairs, friction, &p)?;
                return Ok(true);
            };
            stats.times.line_search += t.elapsed().as_secs_f64();
            log::debug!("iteration {iteration}: |dq|inf {step_norm:.3e}, alpha {alpha:.3e} (ccd {alpha_max:.3e}), energy {e1:.6e}");

            self.z += &dz * alpha;
            self.qs = self.layout.body_coords(&self.z, &self.qs);
            stats.energy_trace.push(e1);
            stats.ip_value = e1;
            hook(&self.bodies, &self.qs);
        }
        Ok(false)
    }

    #[allow(clippy::too_many_arguments)]
    fn line_search(
        &self,
        q_tilde: &[Vec12],
        friction: &[FrictionDatum],
        interval: &CandidateSet,
        dz: &DVector<f64>,
        alpha_max: f64,
        iteration: usize,
        dq_norm: f64,
        predicted: f64,
    ) -> Result<Option<(f64, f64)>> {
        let p = &self.params;
        let e0 = ip_value(&self.bodies, &self.qs, q_tilde, &interval.pairs, friction, p)?;
        let mut alpha = if alpha_max >= 1.0 { 1.0 } else { p.ccd_step_fraction * alpha_max };
        loop {
            if alpha < 1e-12 {
                // The whole predicted decrease is below the round-off of the energy.
                if predicted <= 64.0 * f64::EPSILON * e0.abs() {
                    return Ok(None);
                }
                return Err(Error::LineSearch {
                    step: self.step,
                    iteration,
                    alpha,
                    dq_norm,
                });
            }
            let z = &self.z + dz * alpha;
            let qs = self.layout.body_coords(&z, &self.qs);
            // A trial inside the certified interval can still fail only
            // through round-off; treat that like an energy increase.
            match ip_value(&self.bodies, &qs, q_tilde, &interval.pairs, friction, p) {
                Ok(e1) if e1 < e0 => return Ok(Some((alpha, e1))),
                Ok(_) | Err(Error::Intersection(_)) => alpha *= 0.5,
                Err(e) => return Err(e),
            }
        }
    }
}
