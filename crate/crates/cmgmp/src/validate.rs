//! Independent trajectory checker: re-assembles the contact constraints
//! from each step's *recorded* contacts and mode string (rather than
//! trusting planner internals) and verifies the recorded motion against
//! them, plus penetration bounds and finger-sticking consistency.

use crate::collision::{detect_contacts, ContactPoint, FingerSite};
use crate::geometry::{Pose, Twist};
use crate::lp::solve_feasibility;
use crate::manipulator::ManipulatorModel;
use crate::mechanics::{check_force_feasibility, DynamicsSpec};
use crate::modes::{
    build_grasp_map, decode_mode, mode_velocity_constraints, ContactMode, ContactSet, CsLabel,
    EnvContact, FingerContact, TangentBasis,
};
use crate::task::{task_hash, Task};
use crate::trajectory::TrajectoryFile;
use crate::Result;
use nalgebra::{DMatrix, DVector};

/// Scaled residual tolerance for the mode-constraint and dynamics re-solve.
pub const RESIDUAL_TOL: f64 = 1e-6;
/// Finger contact points must co-move with the object within this bound
/// per step.
pub const STICKING_TOL: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub steps: usize,
    /// Human-readable description of every violation, in step order.
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Split a mode string into per-contact tokens ("S" or "M" plus `n_t`
/// sign characters).
fn mode_tokens(s: &str, n_t: usize) -> Option<Vec<String>> {
    let chars: Vec<char> = s.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        match chars[i] {
            'S' => {
                tokens.push("S".to_string());
                i += 1;
            }
            'M' => {
                if i + n_t >= chars.len() + 0 && i + 1 + n_t > chars.len() {
                    return None;
                }
                tokens.push(chars[i..i + 1 + n_t].iter().collect());
                i += 1 + n_t;
            }
            _ => return None,
        }
    }
    Some(tokens)
}

fn contact_set_from_records(
    task: &Task,
    pose: &Pose,
    env_points: &[ContactPoint],
    sites: &[Option<FingerSite>],
) -> ContactSet {
    let model = &task.manipulator;
    let env: Vec<EnvContact> = env_points
        .iter()
        .map(|c| EnvContact {
            point: c.clone(),
            grasp: build_grasp_map(c, pose),
        })
        .collect();
    let jacs = model.jacobian(&DVector::zeros(model.dof()), sites, pose);
    let mut fingers = Vec::new();
    for (site, jac) in sites.iter().filter_map(|s| s.as_ref()).zip(jacs) {
        let point = ContactPoint {
            position: pose.transform_point(&site.position),
            normal: -pose.transform_vector(&site.normal),
            signed_distance: 0.0,
        };
        let grasp = build_grasp_map(&point, pose);
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
        mu_env: task.body.mu_env,
        mu_mnp: task.body.mu_mnp,
    }
}

/// Check the recorded twist against the mode's velocity constraints with
/// the manipulator joint velocity left free, allowing `RESIDUAL_TOL` of
/// scaled slack per row.
fn velocity_residuals_ok(
    mode: &ContactMode,
    set: &ContactSet,
    basis: &TangentBasis,
    twist: &Twist,
) -> Result<bool> {
    let sys = mode_velocity_constraints(mode, set, basis, 0.0, 0)?.row_normalized();
    let dof = set.dof;
    let mut v = DVector::zeros(6);
    v.fixed_rows_mut::<3>(0).copy_from(&twist.linear);
    v.fixed_rows_mut::<3>(3).copy_from(&twist.angular);

    // substitute v, keep q_dot free, and relax every row by the tolerance
    let me = sys.a_eq.nrows();
    let mi = sys.a_ineq.nrows();
    let mut a = DMatrix::zeros(2 * me + mi, dof);
    let mut b = DVector::zeros(2 * me + mi);
    let mut fill = |row: usize, coeffs: nalgebra::RowDVector<f64>, rhs: f64| {
        for c in 0..dof {
            a[(row, c)] = coeffs[6 + c];
        }
        let head: f64 = (0..6).map(|c| coeffs[c] * v[c]).sum();
        b[row] = rhs - head - RESIDUAL_TOL;
    };
    for r in 0..me {
        fill(r, sys.a_eq.row(r).into_owned(), sys.b_eq[r]);
        fill(me + r, -sys.a_eq.row(r).into_owned(), -sys.b_eq[r]);
    }
    for r in 0..mi {
        fill(2 * me + r, sys.a_ineq.row(r).into_owned(), sys.b_ineq[r]);
    }
    let f = solve_feasibility(&DMatrix::zeros(0, dof), &DVector::zeros(0), &a, &b)?;
    Ok(f.feasible)
}

/// Validate `traj` against `task`; `task_text` is the raw task file text
/// used for the header-hash check.
pub fn validate(task: &Task, task_text: &str, traj: &TrajectoryFile) -> Result<ValidationReport> {
    let basis = TangentBasis::default();
    let n_t = basis.n_t();
    let model = &task.manipulator;
    let mut violations = Vec::new();

    if traj.header.task_hash != task_hash(task_text) {
        violations.push(format!(
            "header: task_hash {} does not match the task file",
            traj.header.task_hash
        ));
    }
    let expect_dyn = if task.quasidynamic {
        "quasidynamic"
    } else {
        "quasistatic"
    };
    if traj.header.dynamics != expect_dyn {
        violations.push(format!(
            "header: dynamics {:?} but the task is {expect_dyn}",
            traj.header.dynamics
        ));
    }

    let n = traj.steps.len();
    let pen_floor = -(task.planner.d_contact + 1e-4);
    for i in 0..n {
        let pose = match traj.pose(i) {
            Ok(p) => p,
            Err(e) => {
                violations.push(format!("step {i}: {e}"));
                continue;
            }
        };

        // penetration from the pose alone, independent of recorded contacts
        match detect_contacts(&task.body, &pose, &task.env, task.planner.d_contact) {
            Ok(contacts) => {
                for c in &contacts {
                    if c.signed_distance < pen_floor {
                        violations.push(format!(
                            "step {i}: penetration {:.3e} below {:.3e}",
                            c.signed_distance, pen_floor
                        ));
                        break;
                    }
                }
            }
            Err(e) => violations.push(format!("step {i}: penetration check: {e}")),
        }

        // finger sticking: the recorded configuration must place each
        // assigned fingertip on its object-frame site
        let sites = match traj.sites(i, model.max_fingers()) {
            Ok(s) => s,
            Err(e) => {
                violations.push(format!("step {i}: {e}"));
                continue;
            }
        };
        let q_mnp = traj.q_mnp(i);
        if q_mnp.len() != model.dof() {
            violations.push(format!(
                "step {i}: q_mnp has {} entries, manipulator dof is {}",
                q_mnp.len(),
                model.dof()
            ));
            continue;
        }
        match model.inverse_kinematics(&sites, &pose) {
            Some(expected) => {
                for k in 0..model.max_fingers() {
                    if sites[k].is_none() {
                        continue;
                    }
                    let drift = (q_mnp.rows(3 * k, 3) - expected.rows(3 * k, 3)).norm();
                    if drift > STICKING_TOL {
                        violations.push(format!(
                            "step {i}: finger {k} drifts {drift:.3e} m off its contact site"
                        ));
                    }
                }
            }
            None => violations.push(format!(
                "step {i}: recorded finger sites are outside the manipulator workspace"
            )),
        }

        // the last state has no outgoing motion to check
        if i + 1 == n {
            continue;
        }

        let twist = traj.twist(i);
        let env_points = traj.env_contacts(i);
        let Some(tokens) = mode_tokens(&traj.steps[i].mode, n_t) else {
            violations.push(format!(
                "step {i}: malformed mode string {:?}",
                traj.steps[i].mode
            ));
            continue;
        };
        let n_assigned = sites.iter().filter(|s| s.is_some()).count();
        if tokens.len() != env_points.len() + n_assigned {
            violations.push(format!(
                "step {i}: mode string {:?} has {} tokens for {} environment contacts and {} fingers",
                traj.steps[i].mode,
                tokens.len(),
                env_points.len(),
                n_assigned
            ));
            continue;
        }
        let sticking_block: String =
            std::iter::once('M').chain((0..n_t).map(|_| '0')).collect();
        if tokens[env_points.len()..].iter().any(|t| t != &sticking_block) {
            violations.push(format!(
                "step {i}: finger tokens in {:?} are not all sticking",
                traj.steps[i].mode
            ));
            continue;
        }
        let env_mode_str: String = tokens[..env_points.len()].concat();
        let mode = match decode_mode(&env_mode_str, n_t) {
            Ok(m) => m,
            Err(e) => {
                violations.push(format!("step {i}: {e}"));
                continue;
            }
        };
        if mode.cs.len() != env_points.len() {
            violations.push(format!(
                "step {i}: mode covers {} contacts, {} recorded",
                mode.cs.len(),
                env_points.len()
            ));
            continue;
        }

        let set = contact_set_from_records(task, &pose, &env_points, &sites);
        let dynamics = if task.quasidynamic {
            DynamicsSpec::quasidynamic(&task.body, &pose, task.gravity, task.planner.h)
        } else {
            DynamicsSpec::quasistatic(&task.body, &pose, task.gravity)
        };

        match velocity_residuals_ok(&mode, &set, &basis, &twist) {
            Ok(true) => {}
            Ok(false) => violations.push(format!(
                "step {i}: recorded twist violates the mode {:?} velocity constraints",
                traj.steps[i].mode
            )),
            Err(e) => violations.push(format!("step {i}: velocity check: {e}")),
        }
        match check_force_feasibility(&mode, &set, &dynamics, &basis, Some(&twist)) {
            Ok(true) => {}
            Ok(false) => violations.push(format!(
                "step {i}: no contact forces balance mode {:?} under the recorded motion",
                traj.steps[i].mode
            )),
            Err(e) => violations.push(format!("step {i}: force check: {e}")),
        }

        // separated contacts must not be loaded: with CS all-Separate the
        // above force check already covers it; nothing extra needed here.
        let _ = CsLabel::Separate;
    }

    Ok(ValidationReport {
        steps: n,
        violations,
    })
}
