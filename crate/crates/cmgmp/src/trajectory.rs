//! Trajectory serialization: a TOML file with a header identifying the
//! task and a flat list of per-step records (pose, twist, manipulator
//! configuration, contacts, and the contact-mode string).

use crate::collision::{ContactPoint, FingerSite};
use crate::geometry::{Pose, Twist};
use crate::planner::{Plan, PlanState};
use crate::task::{pose_from_numbers, pose_to_numbers};
use crate::{Error, Result};
use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};

pub const PLANNER_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryHeader {
    /// SHA-256 of the task file text this trajectory was planned from.
    pub task_hash: String,
    pub seed: u64,
    pub planner_version: String,
    /// "quasistatic" or "quasidynamic".
    pub dynamics: String,
    pub nodes_tree: usize,
    pub nodes_solution: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvContactRecord {
    pub position: [f64; 3],
    pub normal: [f64; 3],
    pub signed_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FingerContactRecord {
    /// Index of the finger this site is assigned to.
    pub finger: usize,
    /// Contact location in the object frame.
    pub position: [f64; 3],
    /// Outward object-surface normal in the object frame.
    pub normal: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRecord {
    pub index: usize,
    pub time: f64,
    /// x y z qw qx qy qz.
    pub pose: [f64; 7],
    /// Body twist applied over this step: vx vy vz wx wy wz.
    pub twist: [f64; 6],
    /// Manipulator configuration vector.
    pub q_mnp: Vec<f64>,
    /// Contact-mode string for the edge leaving this state.
    pub mode: String,
    #[serde(default)]
    pub env_contacts: Vec<EnvContactRecord>,
    #[serde(default)]
    pub finger_contacts: Vec<FingerContactRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryFile {
    pub header: TrajectoryHeader,
    #[serde(default, rename = "step")]
    pub steps: Vec<StepRecord>,
}

impl TrajectoryFile {
    pub fn from_plan(plan: &Plan, task_hash: &str, seed: u64, quasidynamic: bool) -> Self {
        let steps = plan
            .states
            .iter()
            .enumerate()
            .map(|(i, s)| step_record(i, s))
            .collect();
        TrajectoryFile {
            header: TrajectoryHeader {
                task_hash: task_hash.to_string(),
                seed,
                planner_version: PLANNER_VERSION.to_string(),
                dynamics: if quasidynamic {
                    "quasidynamic".to_string()
                } else {
                    "quasistatic".to_string()
                },
                nodes_tree: plan.nodes_tree,
                nodes_solution: plan.nodes_solution,
                iterations: plan.iterations,
            },
            steps,
        }
    }

    pub fn parse(text: &str) -> Result<TrajectoryFile> {
        let t: TrajectoryFile =
            toml::from_str(text).map_err(|e| Error::Trajectory(e.to_string()))?;
        for (i, s) in t.steps.iter().enumerate() {
            if s.index != i {
                return Err(Error::Trajectory(format!(
                    "step indices must be contiguous from 0: found {} at position {i}",
                    s.index
                )));
            }
        }
        Ok(t)
    }

    pub fn emit(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Trajectory(e.to_string()))
    }

    /// Pose of step `i` as a typed value.
    pub fn pose(&self, i: usize) -> Result<Pose> {
        pose_from_numbers(&self.steps[i].pose, &format!("step {i} pose"))
    }

    /// Twist of step `i` as a typed value.
    pub fn twist(&self, i: usize) -> Twist {
        let t = &self.steps[i].twist;
        Twist::new(
            Vector3::new(t[0], t[1], t[2]),
            Vector3::new(t[3], t[4], t[5]),
        )
    }

    pub fn q_mnp(&self, i: usize) -> DVector<f64> {
        DVector::from_vec(self.steps[i].q_mnp.clone())
    }

    /// Finger sites of step `i` as an assignment vector over `n_fingers`.
    pub fn sites(&self, i: usize, n_fingers: usize) -> Result<Vec<Option<FingerSite>>> {
        let mut out = vec![None; n_fingers];
        for fc in &self.steps[i].finger_contacts {
            if fc.finger >= n_fingers {
                return Err(Error::Trajectory(format!(
                    "step {i}: finger index {} out of range (manipulator has {n_fingers})",
                    fc.finger
                )));
            }
            out[fc.finger] = Some(FingerSite {
                position: Vector3::from_row_slice(&fc.position),
                normal: Vector3::from_row_slice(&fc.normal),
            });
        }
        Ok(out)
    }

    pub fn env_contacts(&self, i: usize) -> Vec<ContactPoint> {
        self.steps[i]
            .env_contacts
            .iter()
            .map(|r| ContactPoint {
                position: Vector3::from_row_slice(&r.position),
                normal: Vector3::from_row_slice(&r.normal),
                signed_distance: r.signed_distance,
            })
            .collect()
    }
}

fn step_record(index: usize, s: &PlanState) -> StepRecord {
    StepRecord {
        index,
        time: s.time,
        pose: pose_to_numbers(&s.pose),
        twist: [
            s.twist.linear.x,
            s.twist.linear.y,
            s.twist.linear.z,
            s.twist.angular.x,
            s.twist.angular.y,
            s.twist.angular.z,
        ],
        q_mnp: s.q_mnp.iter().copied().collect(),
        mode: s.mode.clone(),
        env_contacts: s
            .env_contacts
            .iter()
            .map(|c| EnvContactRecord {
                position: [c.position.x, c.position.y, c.position.z],
                normal: [c.normal.x, c.normal.y, c.normal.z],
                signed_distance: c.signed_distance,
            })
            .collect(),
        finger_contacts: s
            .sites
            .iter()
            .enumerate()
            .filter_map(|(k, site)| site.as_ref().map(|st| (k, st)))
            .map(|(k, st)| FingerContactRecord {
                finger: k,
                position: [st.position.x, st.position.y, st.position.z],
                normal: [st.normal.x, st.normal.y, st.normal.z],
            })
            .collect(),
    }
}
