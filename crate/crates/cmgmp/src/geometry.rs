//! SE(3) poses, body twists, exponential-map integration, and the weighted
//! pose metric used by the planner.
//!
//! Twists are body-frame throughout: `(linear, angular)` with the angular
//! part expressed in the body frame of the pose being integrated.

use nalgebra::{Matrix3, Quaternion, Rotation3, UnitQuaternion, Vector3};

/// Rigid-body configuration: position plus a unit quaternion (scalar-first
/// in all serialized forms). The quaternion is renormalized on construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

/// Body velocity of the object, twist form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Twist {
    pub linear: Vector3<f64>,
    pub angular: Vector3<f64>,
}

/// Goal set: a center pose with translation and rotation tolerances.
#[derive(Debug, Clone, Copy)]
pub struct GoalRegion {
    pub center: Pose,
    pub translation_tolerance: f64,
    pub rotation_tolerance: f64,
}

impl Pose {
    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        // UnitQuaternion construction already normalizes; renormalize anyway
        // so the 1e-9 norm invariant holds after long compositions.
        let q = UnitQuaternion::from_quaternion(orientation.into_inner());
        Pose {
            position,
            orientation: q,
        }
    }

    pub fn identity() -> Self {
        Pose {
            position: Vector3::zeros(),
            orientation: UnitQuaternion::identity(),
        }
    }

    pub fn from_parts(position: Vector3<f64>, w: f64, x: f64, y: f64, z: f64) -> Self {
        Pose::new(
            position,
            UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z)),
        )
    }

    pub fn rotation(&self) -> Rotation3<f64> {
        self.orientation.to_rotation_matrix()
    }

    /// Map a point from the body frame to the world frame.
    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.orientation * p + self.position
    }

    /// Map a direction from the body frame to the world frame.
    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.orientation * v
    }

    /// Map a world-frame point into the body frame.
    pub fn inverse_transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.orientation.inverse() * (p - self.position)
    }

    /// Map a world-frame direction into the body frame.
    pub fn inverse_transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.orientation.inverse() * v
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|x| x.is_finite())
            && self.orientation.coords.iter().all(|x| x.is_finite())
    }
}

impl Twist {
    pub fn zero() -> Self {
        Twist {
            linear: Vector3::zeros(),
            angular: Vector3::zeros(),
        }
    }

    pub fn new(linear: Vector3<f64>, angular: Vector3<f64>) -> Self {
        Twist { linear, angular }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Twist {
            linear: self.linear * s,
            angular: self.angular * s,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.linear.iter().all(|x| x.is_finite()) && self.angular.iter().all(|x| x.is_finite())
    }

    /// Mixed norm sqrt(|v|^2 + w_a |w|^2) used by stop conditions.
    pub fn weighted_norm(&self, w_a: f64) -> f64 {
        (self.linear.norm_squared() + w_a * self.angular.norm_squared()).sqrt()
    }
}

/// Rotation angle of the relative orientation, in [0, pi]. Uses
/// 2*acos(|q1.q2|) so the quaternion double cover never reports 2pi - a.
pub fn rotation_angle(q1: &UnitQuaternion<f64>, q2: &UnitQuaternion<f64>) -> f64 {
    // atan2 form of 2*acos(|q1.q2|); well conditioned near 0 and pi
    let rel = q1.inverse() * q2;
    let vec = Vector3::new(rel.coords.x, rel.coords.y, rel.coords.z);
    2.0 * vec.norm().atan2(rel.coords.w.abs())
}

/// SO(3) exponential: rotation vector to quaternion.
fn exp_so3(w: &Vector3<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::from_scaled_axis(*w)
}

/// SO(3) logarithm as a rotation vector with a deterministic tie-break at
/// angle pi: the axis component picked from the largest rotation-matrix
/// diagonal entry, positive-signed.
fn log_so3(q: &UnitQuaternion<f64>) -> Vector3<f64> {
    let angle = 2.0 * q.coords.w.abs().min(1.0).acos();
    if angle < 1e-12 {
        return Vector3::zeros();
    }
    if angle > std::f64::consts::PI - 1e-9 {
        // Near pi the vector part of the quaternion is ill-conditioned; pull
        // the axis from R + I whose columns are parallel to the axis.
        let r = q.to_rotation_matrix();
        let m = r.matrix() + Matrix3::identity();
        let mut best = 0usize;
        for i in 1..3 {
            if m[(i, i)] > m[(best, best)] {
                best = i;
            }
        }
        let col = m.column(best).into_owned();
        let axis = col / col.norm();
        let axis = if axis[best] < 0.0 { -axis } else { axis };
        return axis * angle;
    }
    // Standard branch: vector part = axis * sin(angle/2).
    let mut v = Vector3::new(q.coords.x, q.coords.y, q.coords.z);
    let mut w = q.coords.w;
    if w < 0.0 {
        v = -v;
        w = -w;
    }
    let half = (v.norm()).atan2(w);
    if v.norm() < 1e-15 {
        Vector3::zeros()
    } else {
        v / v.norm() * 2.0 * half
    }
}

/// V matrix of the SE(3) exponential (left Jacobian of SO(3)).
fn se3_v_matrix(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta = w.norm();
    let wx = skew(w);
    if theta < 1e-9 {
        Matrix3::identity() + 0.5 * wx + wx * wx / 6.0
    } else {
        let t2 = theta * theta;
        Matrix3::identity() + wx * ((1.0 - theta.cos()) / t2)
            + (wx * wx) * ((theta - theta.sin()) / (t2 * theta))
    }
}

fn se3_v_inverse(w: &Vector3<f64>) -> Matrix3<f64> {
    se3_v_matrix(w)
        .try_inverse()
        .expect("V(w) is invertible for |w| < 2*pi")
}

/// Deterministic orthonormal tangent frame for a unit normal:
/// t1 = normalize(e x n) with e the first standard basis vector not close
/// to parallel with n (|e . n| < 0.9), t2 = n x t1.
pub fn tangent_frame(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let e = if n.x.abs() < 0.9 {
        Vector3::x()
    } else if n.y.abs() < 0.9 {
        Vector3::y()
    } else {
        Vector3::z()
    };
    let t1 = e.cross(n).normalize();
    let t2 = n.cross(&t1);
    (t1, t2)
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Integrate a constant body twist for duration `h` with the exact SE(3)
/// exponential. The first-order part is the time discretization only; the
/// exponential keeps poses on the manifold.
pub fn apply_twist(q: &Pose, xi: &Twist, h: f64) -> Pose {
    assert!(h.is_finite() && q.is_finite() && xi.is_finite(), "non-finite apply_twist input");
    let w = xi.angular * h;
    let v = xi.linear * h;
    let dr = exp_so3(&w);
    let dp = se3_v_matrix(&w) * v;
    Pose::new(
        q.position + q.orientation * dp,
        q.orientation * dr,
    )
}

/// Weighted SE(3) metric: translation distance plus w_r times the geodesic
/// rotation angle.
pub fn pose_distance(q1: &Pose, q2: &Pose, w_r: f64) -> f64 {
    debug_assert!(w_r >= 0.0);
    (q1.position - q2.position).norm() + w_r * rotation_angle(&q1.orientation, &q2.orientation)
}

/// The body twist xi with apply_twist(q_from, xi, 1) = q_to: logarithm of
/// the relative transform.
pub fn desired_twist(q_from: &Pose, q_to: &Pose) -> Twist {
    let rel_r = q_from.orientation.inverse() * q_to.orientation;
    let rel_p = q_from.orientation.inverse() * (q_to.position - q_from.position);
    let w = log_so3(&rel_r);
    let v = se3_v_inverse(&w) * rel_p;
    Twist::new(v, w)
}

pub fn in_goal(q: &Pose, goal: &GoalRegion) -> bool {
    let dt = (q.position - goal.center.position).norm();
    let da = rotation_angle(&q.orientation, &goal.center.orientation);
    dt <= goal.translation_tolerance && da <= goal.rotation_tolerance
}
