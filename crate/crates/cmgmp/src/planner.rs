//! The contact-mode-guided RRT: sampling, nearest neighbor, per-CS-mode
//! extension with best-SS-mode selection, projected integration with drift
//! correction, and finger relocation by rejection sampling.

use crate::collision::{
    contact_pairs, detect_contacts, sample_finger_sites, ContactPoint, FingerSite,
};
use crate::geometry::{
    apply_twist, desired_twist, in_goal, pose_distance, rotation_angle, GoalRegion, Pose, Twist,
};
use crate::manipulator::ManipulatorModel;
use crate::mechanics::{
    assemble, check_force_feasibility, correction_velocity, solve_best_velocity, DynamicsSpec,
    SolveOutcome,
};
use crate::modes::{
    build_grasp_map, enumerate_cs_modes, enumerate_ss_modes, ContactMode, ContactSet, CsLabel,
    EnvContact, FingerContact, TangentBasis, N_MAX_DEFAULT,
};
use crate::task::Task;
use crate::{Error, Result};
use nalgebra::{DVector, Quaternion, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stop-condition (1) tolerance on the weighted desired-velocity norm.
pub const STOP_VDES_TOL: f64 = 1e-4;
/// Minimum pose change for an extension to count as progress.
const PROGRESS_TOL: f64 = 1e-7;
/// Hard bound on integration steps per extension (the travel caps bind
/// far earlier at sane step sizes).
const MAX_EDGE_STEPS: usize = 400;

/// One integration step of a tree edge: the body twist applied at the
/// previous pose, its duration, and the resulting pose (including any
/// drift correction).
#[derive(Debug, Clone)]
pub struct EdgeState {
    pub twist: Twist,
    pub dt: f64,
    pub pose: Pose,
}

#[derive(Debug, Clone)]
pub struct TreeNode {
    pub q: Pose,
    /// Finger assignment active along the incoming edge and inherited by
    /// children; None = unassigned.
    pub sites: Vec<Option<FingerSite>>,
    pub parent: Option<usize>,
    /// Full mode string (environment part plus sticking finger part).
    pub incoming_mode: Option<String>,
    pub edge: Vec<EdgeState>,
}

/// One output state: everything the trajectory file records per step.
#[derive(Debug, Clone)]
pub struct PlanState {
    pub time: f64,
    pub pose: Pose,
    pub twist: Twist,
    pub q_mnp: DVector<f64>,
    pub mode: String,
    pub sites: Vec<Option<FingerSite>>,
    pub env_contacts: Vec<ContactPoint>,
}

#[derive(Debug, Clone)]
pub struct Plan {
    pub states: Vec<PlanState>,
    pub nodes_tree: usize,
    pub nodes_solution: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub enum PlanOutcome {
    Success(Plan),
    Failure {
        nodes_tree: usize,
        best_distance: f64,
    },
}

/// Uniform random orientation (subgroup algorithm).
pub fn sample_uniform_quaternion<R: Rng>(rng: &mut R) -> UnitQuaternion<f64> {
    let u1: f64 = rng.gen();
    let u2: f64 = rng.gen();
    let u3: f64 = rng.gen();
    let tau = std::f64::consts::TAU;
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    UnitQuaternion::from_quaternion(Quaternion::new(
        b * (tau * u3).cos(),
        a * (tau * u2).sin(),
        a * (tau * u2).cos(),
        b * (tau * u3).sin(),
    ))
}

/// Goal-biased pose sampling: probability p of a uniform random sample,
/// 1 - p of the goal center.
pub fn sample_object_config<R: Rng>(
    goal: &GoalRegion,
    pos_min: &Vector3<f64>,
    pos_max: &Vector3<f64>,
    p: f64,
    rng: &mut R,
) -> Pose {
    let u: f64 = rng.gen();
    if u >= p {
        return goal.center;
    }
    let position = Vector3::from_fn(|i, _| rng.gen_range(pos_min[i]..pos_max[i]));
    Pose {
        position,
        orientation: sample_uniform_quaternion(rng),
    }
}

/// Linear-scan nearest neighbor under the weighted SE(3) metric; ties go
/// to the lowest node id.
pub fn nearest_neighbor(nodes: &[TreeNode], q_rand: &Pose, w_r: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, n) in nodes.iter().enumerate() {
        let d = pose_distance(&n.q, q_rand, w_r);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Scale a desired twist into the per-extension caps, preserving its
/// screw direction.
fn clip_twist(t: &Twist, cap_trans: f64, cap_rot: f64) -> Twist {
    let mut s = 1.0f64;
    let ln = t.linear.norm();
    if ln > cap_trans {
        s = s.min(cap_trans / ln);
    }
    let an = t.angular.norm();
    if an > cap_rot {
        s = s.min(cap_rot / an);
    }
    t.scaled(s)
}

pub struct Planner<'a> {
    task: &'a Task,
    basis: TangentBasis,
    sites_pool: Vec<FingerSite>,
    rng: ChaCha8Rng,
    nodes: Vec<TreeNode>,
}

impl<'a> Planner<'a> {
    pub fn new(task: &'a Task) -> Result<Self> {
        let pl = &task.planner;
        let sites_pool = sample_finger_sites(&task.body, pl.n_sites, pl.rng_seed)?;
        Ok(Planner {
            task,
            basis: TangentBasis::default(),
            sites_pool,
            rng: ChaCha8Rng::seed_from_u64(pl.rng_seed),
            nodes: Vec::new(),
        })
    }

    fn dynamics_at(&self, q: &Pose) -> DynamicsSpec {
        if self.task.quasidynamic {
            DynamicsSpec::quasidynamic(&self.task.body, q, self.task.gravity, self.task.planner.h)
        } else {
            DynamicsSpec::quasistatic(&self.task.body, q, self.task.gravity)
        }
    }

    fn env_contact_list(&self, q: &Pose) -> Result<Vec<EnvContact>> {
        let contacts = detect_contacts(
            &self.task.body,
            q,
            &self.task.env,
            self.task.planner.d_contact,
        )?;
        Ok(contacts
            .iter()
            .map(|c| EnvContact {
                point: c.clone(),
                grasp: build_grasp_map(c, q),
            })
            .collect())
    }

    /// Contact set at q: environment contacts plus the assigned fingers.
    fn contact_set(&self, env: Vec<EnvContact>, sites: &[Option<FingerSite>], q: &Pose) -> ContactSet {
        let model = &self.task.manipulator;
        let jacs = model.jacobian(&DVector::zeros(model.dof()), sites, q);
        let mut fingers = Vec::new();
        for (site, jac) in sites.iter().filter_map(|s| s.as_ref()).zip(jacs) {
            let point = ContactPoint {
                position: q.transform_point(&site.position),
                normal: -q.transform_vector(&site.normal),
                signed_distance: 0.0,
            };
            let grasp = build_grasp_map(&point, q);
            fingers.push(FingerContact {
                point,
                grasp,
                jacobian: jac,
            });
        }
        ContactSet {
            env,
            fingers,
            dof: model.dof(),
            mu_env: self.task.body.mu_env,
            mu_mnp: self.task.body.mu_mnp,
        }
    }

    fn mode_string(&self, mode: &ContactMode, sites: &[Option<FingerSite>]) -> String {
        let mut s = mode.encode();
        let finger_block: String =
            std::iter::once('M').chain((0..self.basis.n_t()).map(|_| '0')).collect();
        for site in sites {
            if site.is_some() {
                s.push_str(&finger_block);
            }
        }
        s
    }

    /// Smallest-cost SS completion: solves the best-velocity QP for every
    /// candidate and keeps the feasible minimum (first wins on ties, and
    /// candidates arrive in lexicographic order).
    fn best_ss_mode(
        &self,
        q_near: &Pose,
        v_des: &Twist,
        env: &[EnvContact],
        candidates: &[ContactMode],
        sites: &[Option<FingerSite>],
    ) -> Result<Option<(ContactMode, Twist)>> {
        let pl = &self.task.planner;
        let dynamics = self.dynamics_at(q_near);
        let set = self.contact_set(env.to_vec(), sites, q_near);
        let mut best: Option<(ContactMode, Twist, f64)> = None;
        for mode in candidates {
            let sys = assemble(mode, &set, &dynamics, &self.basis, 0.0)?;
            // a candidate whose system defeats the solvers numerically is
            // skipped rather than aborting the whole search
            let outcome = match solve_best_velocity(v_des, &sys, set.dof, pl.w_a, pl.eps) {
                Ok(o) => o,
                Err(Error::SolverIterationLimit(_)) => continue,
                Err(e) => return Err(e),
            };
            if let SolveOutcome::Solved(sol) = outcome {
                if best.as_ref().map_or(true, |(_, _, c)| sol.objective < *c) {
                    best = Some((mode.clone(), sol.v_o, sol.objective));
                }
            }
        }
        Ok(best.map(|(m, v, _)| (m, v)))
    }

    /// Rejection-sampled finger relocation at a fixed object pose. Returns
    /// the accepted assignment or None after R_max attempts.
    fn relocate(
        &mut self,
        q_near: &Pose,
        env: &[EnvContact],
        current: &[Option<FingerSite>],
    ) -> Result<Option<Vec<Option<FingerSite>>>> {
        let model = &self.task.manipulator;
        let pl = &self.task.planner;
        let old_q_mnp = model
            .inverse_kinematics(current, q_near)
            .unwrap_or_else(|| {
                let parked: Vec<Option<FingerSite>> = vec![None; current.len()];
                model
                    .inverse_kinematics(&parked, q_near)
                    .expect("rest configuration is reachable")
            });
        for _ in 0..pl.r_max {
            // resample every unassigned finger and each assigned one with
            // probability 1/2; require at least one actual change
            let mut proposal = current.to_vec();
            let mut changed = false;
            for slot in proposal.iter_mut() {
                let resample = slot.is_none() || self.rng.gen::<f64>() < 0.5;
                if resample {
                    let site = self.sites_pool[self.rng.gen_range(0..self.sites_pool.len())];
                    changed |= slot.map_or(true, |s| s != site);
                    *slot = Some(site);
                }
            }
            if !changed {
                continue;
            }
            // transition balance: with the moving fingers lifted, the kept
            // contacts must hold the object (quasidynamic regimes tolerate
            // brief unbalance by definition)
            if !self.task.quasidynamic {
                let kept: Vec<Option<FingerSite>> = current
                    .iter()
                    .zip(&proposal)
                    .map(|(old, new)| match (old, new) {
                        (Some(a), Some(b)) if a == b => Some(*a),
                        _ => None,
                    })
                    .collect();
                let set = self.contact_set(env.to_vec(), &kept, q_near);
                let hold = ContactMode::all_sticking(
                    &vec![CsLabel::Maintain; env.len()],
                    self.basis.n_t(),
                );
                let dynamics = self.dynamics_at(q_near);
                match check_force_feasibility(&hold, &set, &dynamics, &self.basis, None) {
                    Ok(true) => {}
                    Ok(false) | Err(Error::SolverIterationLimit(_)) => continue,
                    Err(e) => return Err(e),
                }
            }
            let Some(q_mnp) = model.inverse_kinematics(&proposal, q_near) else {
                continue;
            };
            if model.self_and_env_collision(&q_mnp, q_near, &self.task.env) {
                continue;
            }
            if !model.relocation_path_exists(&old_q_mnp, &q_mnp, q_near, &self.task.env) {
                continue;
            }
            return Ok(Some(proposal));
        }
        Ok(None)
    }

    /// Time-step under a fixed mode toward q_rand until a stop condition
    /// fires; returns the reached pose and the recorded edge.
    fn project_integrate(
        &self,
        q_near: &Pose,
        q_rand: &Pose,
        sites: &[Option<FingerSite>],
        mode: &ContactMode,
    ) -> Result<(Pose, Vec<EdgeState>)> {
        let pl = &self.task.planner;
        let model = &self.task.manipulator;
        let base_pairs: Vec<(usize, usize)> = contact_pairs(
            &self.task.body,
            q_near,
            &self.task.env,
            pl.d_contact,
        )?
        .into_iter()
        .map(|(p, v, _)| (p, v))
        .collect();
        let pairs_at = |q: &Pose| -> Option<Vec<(usize, usize)>> {
            contact_pairs(&self.task.body, q, &self.task.env, pl.d_contact)
                .ok()
                .map(|ps| ps.into_iter().map(|(p, v, _)| (p, v)).collect())
        };

        let mut q = *q_near;
        let mut edge: Vec<EdgeState> = Vec::new();
        for step in 0..MAX_EDGE_STEPS {
            let v_des_raw = desired_twist(&q, q_rand);
            if v_des_raw.weighted_norm(pl.w_a) <= STOP_VDES_TOL {
                break; // stop (1): arrived
            }
            let v_des = clip_twist(&v_des_raw, pl.extend_cap_trans, pl.extend_cap_rot);
            let Some(q_mnp) = model.inverse_kinematics(sites, &q) else {
                break; // stop (4): IK failure
            };
            if model.self_and_env_collision(&q_mnp, &q, &self.task.env) {
                break; // stop (3): robot collision
            }
            let env = self.env_contact_list(&q)?;
            let set = self.contact_set(env, sites, &q);
            let dynamics = self.dynamics_at(&q);
            let sys = assemble(mode, &set, &dynamics, &self.basis, 0.0)?;
            let sol = match solve_best_velocity(&v_des, &sys, set.dof, pl.w_a, pl.eps) {
                Ok(SolveOutcome::Infeasible(_)) => break, // stop (2)
                Ok(SolveOutcome::Solved(s)) => s,
                // numerical breakdown: end the edge here rather than
                // aborting the whole search
                Err(Error::SolverIterationLimit(_)) => break,
                Err(e) => return Err(e),
            };
            if sol.v_o.weighted_norm(pl.w_a) <= STOP_VDES_TOL {
                break; // mode pins the object: no progress possible
            }
            let mut dt = pl.h;
            let mut q_next = apply_twist(&q, &sol.v_o, dt);
            let mut stopping = false;
            if pairs_at(&q_next).map_or(true, |p| p != base_pairs) {
                // stop (3): the contact-pair set changes somewhere inside
                // this step; bisect to land just past the change so the
                // entering pair sits inside the contact band
                let mut lo = 0.0f64;
                let mut hi = 1.0f64;
                for _ in 0..50 {
                    let mid = 0.5 * (lo + hi);
                    let q_mid = apply_twist(&q, &sol.v_o, pl.h * mid);
                    if pairs_at(&q_mid).map_or(false, |p| p == base_pairs) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                dt = pl.h * hi;
                q_next = apply_twist(&q, &sol.v_o, dt);
                if pairs_at(&q_next).is_none() {
                    // deep penetration at the landing: back off to the
                    // last clean fraction
                    dt = pl.h * lo;
                    q_next = apply_twist(&q, &sol.v_o, dt);
                }
                stopping = true;
                if dt <= 1e-12 {
                    break; // no usable motion inside this step
                }
            }
            if stopping || (step + 1) % pl.cor_every == 0 {
                q_next = self.correct_drift(&q_next, mode, &base_pairs)?;
            }
            edge.push(EdgeState {
                twist: sol.v_o,
                dt,
                pose: q_next,
            });
            q = q_next;
            if stopping {
                break;
            }
            let traveled = (q.position - q_near.position).norm();
            let turned = rotation_angle(&q_near.orientation, &q.orientation);
            if traveled >= pl.extend_cap_trans || turned >= pl.extend_cap_rot {
                break; // per-extension travel cap
            }
        }
        // terminal drift correction
        if let Some(last) = edge.last_mut() {
            let corrected = self.correct_drift(&last.pose, mode, &[])?;
            last.pose = corrected;
            q = corrected;
        }
        Ok((q, edge))
    }

    /// One Euler step of the negated correction twist over the maintained
    /// contacts, pulling their signed distances toward zero. Skipped when
    /// it would change the contact-pair picture for the worse.
    fn correct_drift(
        &self,
        q: &Pose,
        mode: &ContactMode,
        base_pairs: &[(usize, usize)],
    ) -> Result<Pose> {
        let pl = &self.task.planner;
        let pairs = match contact_pairs(&self.task.body, q, &self.task.env, pl.d_contact) {
            Ok(p) => p,
            Err(_) => return Ok(*q),
        };
        let env = self.env_contact_list(q)?;
        // maintained contacts only: correcting separating contacts would
        // fight the mode's own motion
        let mut subset = Vec::new();
        for (i, ec) in env.iter().enumerate() {
            let maintained = if mode.cs.len() == env.len() {
                mode.cs[i] == CsLabel::Maintain
            } else {
                // pair set changed (terminal landing): correct pairs the
                // mode maintained, identified by base order
                base_pairs.is_empty()
                    || base_pairs
                        .iter()
                        .position(|bp| *bp == (pairs[i].0, pairs[i].1))
                        .map_or(false, |k| {
                            mode.cs.get(k) == Some(&CsLabel::Maintain)
                        })
            };
            if maintained {
                subset.push(ec.clone());
            }
        }
        if subset.is_empty() {
            return Ok(*q);
        }
        let set = ContactSet {
            env: subset,
            fingers: Vec::new(),
            dof: 0,
            mu_env: self.task.body.mu_env,
            mu_mnp: self.task.body.mu_mnp,
        };
        let v_cor = correction_velocity(&set, pl.eps_cor);
        let q_new = apply_twist(q, &v_cor.scaled(-1.0), 1.0);
        // reject corrections that break the contact picture
        match contact_pairs(&self.task.body, &q_new, &self.task.env, pl.d_contact) {
            Ok(p) if p.len() == pairs.len() => Ok(q_new),
            _ => Ok(*q),
        }
    }

    /// One CS-mode extension: pick the best SS completion, fall
    /// back to relocation, integrate both the best and the all-sticking
    /// completion, and return the ids of any nodes added.
    fn extend(&mut self, cs: &[CsLabel], near: usize, q_rand: &Pose) -> Result<Vec<usize>> {
        let pl = &self.task.planner;
        let q_near = self.nodes[near].q;
        let env = self.env_contact_list(&q_near)?;
        let candidates = enumerate_ss_modes(cs, &env, &self.basis, pl.ss_cap, &mut self.rng)?;
        if candidates.is_empty() {
            return Ok(Vec::new());
        }
        let sticking = ContactMode::all_sticking(cs, self.basis.n_t());
        let mut sites = self.nodes[near].sites.clone();
        let v_des = clip_twist(
            &desired_twist(&q_near, q_rand),
            pl.extend_cap_trans,
            pl.extend_cap_rot,
        );

        // trigger (4): occasionally relocate for free
        if self.rng.gen::<f64>() < pl.relocate_prob {
            if let Some(s) = self.relocate(&q_near, &env, &sites)? {
                sites = s;
            }
        }
        let mut best = self.best_ss_mode(&q_near, &v_des, &env, &candidates, &sites)?;
        let no_progress = best
            .as_ref()
            .map_or(true, |(_, v)| v.weighted_norm(pl.w_a) <= STOP_VDES_TOL);
        if no_progress {
            // triggers (1)-(3): unassigned fingers, infeasibility, or no
            // motion with the inherited contacts
            if let Some(s) = self.relocate(&q_near, &env, &sites)? {
                sites = s;
                best = self.best_ss_mode(&q_near, &v_des, &env, &candidates, &sites)?;
            }
        }
        let Some((best_mode, _)) = best else {
            return Ok(Vec::new());
        };

        let mut try_modes = vec![best_mode.clone()];
        if best_mode != sticking && candidates.contains(&sticking) {
            try_modes.push(sticking);
        }
        let mut added = Vec::new();
        for mode in try_modes {
            let (q_new, edge) = self.project_integrate(&q_near, q_rand, &sites, &mode)?;
            if edge.is_empty() || pose_distance(&q_new, &q_near, pl.w_r) <= PROGRESS_TOL {
                continue;
            }
            let id = self.nodes.len();
            self.nodes.push(TreeNode {
                q: q_new,
                sites: sites.clone(),
                parent: Some(near),
                incoming_mode: Some(self.mode_string(&mode, &sites)),
                edge,
            });
            added.push(id);
        }
        Ok(added)
    }

    fn extract(&self, goal_id: usize, iterations: usize) -> Result<Plan> {
        let model = &self.task.manipulator;
        let mut ids = Vec::new();
        let mut cur = Some(goal_id);
        while let Some(i) = cur {
            ids.push(i);
            cur = self.nodes[i].parent;
        }
        ids.reverse();

        let finger_block: String =
            std::iter::once('M').chain((0..self.basis.n_t()).map(|_| '0')).collect();
        let q_mnp_at = |sites: &[Option<FingerSite>], q: &Pose| -> DVector<f64> {
            model.inverse_kinematics(sites, q).unwrap_or_else(|| {
                let parked: Vec<Option<FingerSite>> = vec![None; sites.len()];
                model
                    .inverse_kinematics(&parked, q)
                    .expect("rest configuration is reachable")
            })
        };
        let contacts_at = |q: &Pose| -> Result<Vec<ContactPoint>> {
            detect_contacts(
                &self.task.body,
                q,
                &self.task.env,
                self.task.planner.d_contact,
            )
        };

        let mut states = Vec::new();
        let mut time = 0.0;
        let mut pose = self.nodes[ids[0]].q;
        let mut last_mode = {
            // a contact-free root has the empty environment mode
            let n_env = contacts_at(&pose)?.len();
            let mut s: String = (0..n_env).map(|_| 'S').collect();
            if s.is_empty() {
                s = String::new();
            }
            s
        };
        let mut last_sites = self.nodes[ids[0]].sites.clone();
        let _ = &finger_block;
        for &id in &ids[1..] {
            let node = &self.nodes[id];
            let mode = node.incoming_mode.clone().unwrap_or_default();
            for es in &node.edge {
                states.push(PlanState {
                    time,
                    pose,
                    twist: es.twist,
                    q_mnp: q_mnp_at(&node.sites, &pose),
                    mode: mode.clone(),
                    sites: node.sites.clone(),
                    env_contacts: contacts_at(&pose)?,
                });
                time += es.dt;
                pose = es.pose;
            }
            last_mode = mode;
            last_sites = node.sites.clone();
        }
        states.push(PlanState {
            time,
            pose,
            twist: Twist::zero(),
            q_mnp: q_mnp_at(&last_sites, &pose),
            mode: last_mode,
            sites: last_sites,
            env_contacts: contacts_at(&pose)?,
        });
        Ok(Plan {
            states,
            nodes_tree: self.nodes.len(),
            nodes_solution: ids.len(),
            iterations,
        })
    }

    /// Algorithm 1: the full search.
    pub fn plan(&mut self) -> Result<PlanOutcome> {
        let pl = &self.task.planner;
        let goal = self.task.goal;
        // the start must be collision-consistent (deep penetration errors)
        contact_pairs(
            &self.task.body,
            &self.task.start,
            &self.task.env,
            pl.d_contact,
        )?;
        self.nodes.clear();
        self.nodes.push(TreeNode {
            q: self.task.start,
            sites: vec![None; self.task.manipulator.max_fingers()],
            parent: None,
            incoming_mode: None,
            edge: Vec::new(),
        });
        if in_goal(&self.task.start, &goal) {
            return Ok(PlanOutcome::Success(self.extract(0, 0)?));
        }
        let max_iters = pl.max_iters;
        for iter in 1..=max_iters {
            let q_rand = sample_object_config(
                &goal,
                &self.task.sample_min,
                &self.task.sample_max,
                self.task.planner.p,
                &mut self.rng,
            );
            let near = nearest_neighbor(&self.nodes, &q_rand, self.task.planner.w_r);
            let env = self.env_contact_list(&self.nodes[near].q)?;
            let cs_list = enumerate_cs_modes(&env, N_MAX_DEFAULT)?;
            for cs in &cs_list {
                let added = self.extend(cs, near, &q_rand)?;
                for id in added {
                    if in_goal(&self.nodes[id].q, &goal) {
                        return Ok(PlanOutcome::Success(self.extract(id, iter)?));
                    }
                }
            }
        }
        let best_distance = self
            .nodes
            .iter()
            .map(|n| pose_distance(&n.q, &goal.center, self.task.planner.w_r))
            .fold(f64::INFINITY, f64::min);
        Ok(PlanOutcome::Failure {
            nodes_tree: self.nodes.len(),
            best_distance,
        })
    }
}

/// Convenience entry point.
pub fn plan(task: &Task) -> Result<PlanOutcome> {
    Planner::new(task)?.plan()
}


#[cfg(test)]
mod e2e_tests {
    use super::*;
    use crate::task::tests::cube_task_text;
    use crate::task::TaskFile;

    #[test]
    fn start_in_goal_is_a_one_state_plan() {
        let text = cube_task_text().replace(
            "pose = [0.5, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]",
            "pose = [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]",
        );
        let task = TaskFile::parse(&text).unwrap().build().unwrap();
        match plan(&task).unwrap() {
            PlanOutcome::Success(p) => {
                assert_eq!(p.states.len(), 1);
                assert_eq!(p.iterations, 0);
                assert_eq!(p.nodes_solution, 1);
            }
            PlanOutcome::Failure { .. } => panic!("start is in the goal"),
        }
    }

    #[test]
    fn cube_push_reaches_the_goal() {
        let task = TaskFile::parse(&cube_task_text()).unwrap().build().unwrap();
        let started = std::time::Instant::now();
        match plan(&task).unwrap() {
            PlanOutcome::Success(p) => {
                let last = p.states.last().unwrap();
                assert!(in_goal(&last.pose, &task.goal));
                assert!(p.nodes_solution <= p.nodes_tree);
                eprintln!(
                    "cube_push: {} states, {} tree nodes, {} iters, {:.2}s",
                    p.states.len(),
                    p.nodes_tree,
                    p.iterations,
                    started.elapsed().as_secs_f64()
                );
            }
            PlanOutcome::Failure {
                nodes_tree,
                best_distance,
            } => panic!("push failed: tree {nodes_tree}, best {best_distance}"),
        }
    }
}
