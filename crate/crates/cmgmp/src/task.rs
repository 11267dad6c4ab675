//! Task file format: strict TOML with explicit raw structures, converted
//! into domain types after validation. Poses are 7 numbers, scalar-first
//! quaternion: x y z qw qx qy qz.

use crate::collision::{EnvironmentBody, ObjectBody, Primitive};
use crate::geometry::{GoalRegion, Pose};
use crate::manipulator::FreeBallFingers;
use crate::{Error, Result};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

fn vec3(v: &[f64; 3]) -> Vector3<f64> {
    Vector3::new(v[0], v[1], v[2])
}

/// Parse a 7-number pose, rejecting badly-normalized quaternions.
pub fn pose_from_numbers(p: &[f64; 7], field: &str) -> Result<Pose> {
    let norm = (p[3] * p[3] + p[4] * p[4] + p[5] * p[5] + p[6] * p[6]).sqrt();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::Task(format!(
            "{field}: quaternion norm {norm:.6} is not 1 (order is x y z qw qx qy qz)"
        )));
    }
    Ok(Pose::from_parts(
        Vector3::new(p[0], p[1], p[2]),
        p[3],
        p[4],
        p[5],
        p[6],
    ))
}

/// Emit a pose as its 7-number form.
pub fn pose_to_numbers(q: &Pose) -> [f64; 7] {
    let quat = q.orientation.into_inner();
    [
        q.position.x,
        q.position.y,
        q.position.z,
        quat.w,
        quat.i,
        quat.j,
        quat.k,
    ]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskFile {
    pub name: String,
    pub object: ObjectSection,
    pub environment: EnvironmentSection,
    pub manipulator: ManipulatorSection,
    pub start: StartSection,
    pub goal: GoalSection,
    pub dynamics: DynamicsSection,
    pub planner: PlannerSection,
    pub sampling: SamplingSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSection {
    pub vertices: Vec<[f64; 3]>,
    pub mass: f64,
    /// Row-major 3x3 inertia about the center of mass, body frame.
    pub inertia: [[f64; 3]; 3],
    pub com: [f64; 3],
    pub mu_env: f64,
    pub mu_mnp: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSection {
    pub primitives: Vec<PrimitiveSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PrimitiveSection {
    HalfSpace {
        normal: [f64; 3],
        offset: f64,
    },
    Box {
        pose: [f64; 7],
        half_extents: [f64; 3],
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManipulatorSection {
    #[serde(rename = "type")]
    pub kind: String,
    pub n_fingers: usize,
    pub radius: f64,
    pub workspace_min: [f64; 3],
    pub workspace_max: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartSection {
    pub pose: [f64; 7],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalSection {
    pub pose: [f64; 7],
    pub translation_tolerance: f64,
    pub rotation_tolerance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSection {
    /// "quasistatic" or "quasidynamic"
    pub variant: String,
    #[serde(default = "default_gravity")]
    pub gravity: f64,
}

fn default_gravity() -> f64 {
    9.81
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerSection {
    /// Probability that a sample is random (1 - p draws the goal center).
    #[serde(default = "d_p")]
    pub p: f64,
    #[serde(default = "d_one")]
    pub w_r: f64,
    #[serde(default = "d_one")]
    pub w_a: f64,
    #[serde(default = "d_max_iters")]
    pub max_iters: usize,
    #[serde(default = "d_cap_trans")]
    pub extend_cap_trans: f64,
    #[serde(default = "d_cap_rot")]
    pub extend_cap_rot: f64,
    #[serde(default = "d_h")]
    pub h: f64,
    #[serde(default = "d_cor_every")]
    pub cor_every: usize,
    #[serde(default = "d_relocate_prob")]
    pub relocate_prob: f64,
    #[serde(default = "d_seed")]
    pub rng_seed: u64,
    #[serde(default = "d_d_contact")]
    pub d_contact: f64,
    #[serde(default = "d_eps")]
    pub eps: f64,
    #[serde(default = "d_eps_cor")]
    pub eps_cor: f64,
    #[serde(default = "d_ss_cap")]
    pub ss_cap: usize,
    #[serde(default = "d_n_sites")]
    pub n_sites: usize,
    #[serde(default = "d_r_max")]
    pub r_max: usize,
}

fn d_p() -> f64 {
    0.5
}
fn d_one() -> f64 {
    1.0
}
fn d_max_iters() -> usize {
    100
}
fn d_cap_trans() -> f64 {
    0.1
}
fn d_cap_rot() -> f64 {
    0.5
}
fn d_h() -> f64 {
    0.02
}
fn d_cor_every() -> usize {
    5
}
fn d_relocate_prob() -> f64 {
    0.1
}
fn d_seed() -> u64 {
    1
}
fn d_d_contact() -> f64 {
    1e-3
}
fn d_eps() -> f64 {
    1e-4
}
fn d_eps_cor() -> f64 {
    1e-3
}
fn d_ss_cap() -> usize {
    1024
}
fn d_n_sites() -> usize {
    200
}
fn d_r_max() -> usize {
    30
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    pub pos_min: [f64; 3],
    pub pos_max: [f64; 3],
}

/// Everything the planner consumes, converted and validated.
#[derive(Debug, Clone)]
pub struct Task {
    pub name: String,
    pub body: ObjectBody,
    pub env: EnvironmentBody,
    pub manipulator: FreeBallFingers,
    pub start: Pose,
    pub goal: GoalRegion,
    pub quasidynamic: bool,
    pub gravity: f64,
    pub planner: PlannerSection,
    pub sample_min: Vector3<f64>,
    pub sample_max: Vector3<f64>,
}

impl TaskFile {
    pub fn parse(text: &str) -> Result<TaskFile> {
        toml::from_str(text).map_err(|e| Error::Task(format!("task parse error: {e}")))
    }

    pub fn emit(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Task(format!("task emit error: {e}")))
    }

    pub fn build(&self) -> Result<Task> {
        let o = &self.object;
        let body = ObjectBody {
            vertices: o.vertices.iter().map(vec3).collect(),
            mass: o.mass,
            inertia: Matrix3::from_fn(|r, c| o.inertia[r][c]),
            com: vec3(&o.com),
            mu_env: o.mu_env,
            mu_mnp: o.mu_mnp,
        };
        body.validate()?;
        let mut primitives = Vec::new();
        for (i, p) in self.environment.primitives.iter().enumerate() {
            primitives.push(match p {
                PrimitiveSection::HalfSpace { normal, offset } => {
                    let n = vec3(normal);
                    if (n.norm() - 1.0).abs() > 1e-6 {
                        return Err(Error::Task(format!(
                            "environment.primitives[{i}].normal is not unit length"
                        )));
                    }
                    Primitive::HalfSpace {
                        normal: n,
                        offset: *offset,
                    }
                }
                PrimitiveSection::Box { pose, half_extents } => {
                    let he = vec3(half_extents);
                    if he.iter().any(|&e| e <= 0.0) {
                        return Err(Error::Task(format!(
                            "environment.primitives[{i}].half_extents must be positive"
                        )));
                    }
                    Primitive::Box {
                        pose: pose_from_numbers(
                            pose,
                            &format!("environment.primitives[{i}].pose"),
                        )?,
                        half_extents: he,
                    }
                }
            });
        }
        if self.manipulator.kind != "free_ball_fingers" {
            return Err(Error::Task(format!(
                "manipulator.type {:?} is not supported (expected \"free_ball_fingers\")",
                self.manipulator.kind
            )));
        }
        let manipulator = FreeBallFingers::new(
            self.manipulator.n_fingers,
            self.manipulator.radius,
            vec3(&self.manipulator.workspace_min),
            vec3(&self.manipulator.workspace_max),
            &body,
        )?;
        let start = pose_from_numbers(&self.start.pose, "start.pose")?;
        let goal = GoalRegion {
            center: pose_from_numbers(&self.goal.pose, "goal.pose")?,
            translation_tolerance: self.goal.translation_tolerance,
            rotation_tolerance: self.goal.rotation_tolerance,
        };
        if goal.translation_tolerance <= 0.0 || goal.rotation_tolerance <= 0.0 {
            return Err(Error::Task("goal tolerances must be positive".into()));
        }
        let quasidynamic = match self.dynamics.variant.as_str() {
            "quasistatic" => false,
            "quasidynamic" => true,
            other => {
                return Err(Error::Task(format!(
                    "dynamics.variant {other:?} must be \"quasistatic\" or \"quasidynamic\""
                )))
            }
        };
        let pl = &self.planner;
        if !(0.0..=1.0).contains(&pl.p) || !(0.0..=1.0).contains(&pl.relocate_prob) {
            return Err(Error::Task("planner probabilities must be in [0, 1]".into()));
        }
        if pl.extend_cap_trans <= 0.0
            || pl.extend_cap_rot <= 0.0
            || pl.h <= 0.0
            || pl.d_contact <= 0.0
            || pl.eps <= 0.0
            || pl.eps_cor <= 0.0
            || pl.cor_every == 0
        {
            return Err(Error::Task(
                "planner caps, step size, tolerances must be positive".into(),
            ));
        }
        let sample_min = vec3(&self.sampling.pos_min);
        let sample_max = vec3(&self.sampling.pos_max);
        if (0..3).any(|i| sample_min[i] >= sample_max[i]) {
            return Err(Error::Task("sampling box is empty".into()));
        }
        Ok(Task {
            name: self.name.clone(),
            body,
            env: EnvironmentBody { primitives },
            manipulator,
            start,
            goal,
            quasidynamic,
            gravity: self.dynamics.gravity,
            planner: pl.clone(),
            sample_min,
            sample_max,
        })
    }
}

/// Content hash of a task file's bytes, hex encoded.
pub fn task_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn load_task_file(path: &std::path::Path) -> Result<(TaskFile, String)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Task(format!("cannot read {}: {e}", path.display())))?;
    let file = TaskFile::parse(&text)?;
    Ok((file, task_hash(&text)))
}
