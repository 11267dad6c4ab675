//! Manipulator abstraction and the default free-moving-ball-finger model.
//!
//! The planner only needs kinematics, collision predicates, and a
//! relocation sub-planner from the robot; everything else stays behind
//! this interface.

use crate::collision::{hull_faces, hull_plane_distance, EnvironmentBody, FingerSite, HullFace, ObjectBody};
use crate::geometry::Pose;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector, Vector3};

/// Robot-specific kinematics and feasibility predicates.
pub trait ManipulatorModel {
    /// Joint-space dimension of the full manipulator configuration.
    fn dof(&self) -> usize;

    /// Hard limit on simultaneous finger contacts.
    fn max_fingers(&self) -> usize;

    /// World-frame fingertip (contact-point) positions.
    fn forward_kinematics(&self, q_mnp: &DVector<f64>) -> Vec<Vector3<f64>>;

    /// Configuration placing the fingertips on the given object-frame
    /// sites, or None when unreachable. Sites are given for every finger;
    /// unassigned fingers pass None and park at a rest placement.
    fn inverse_kinematics(
        &self,
        sites: &[Option<FingerSite>],
        object_pose: &Pose,
    ) -> Option<DVector<f64>>;

    /// Per-finger 3 x dof contact-frame Jacobians: rows are the contact
    /// frame axes (t1, t2, n), so J qdot is the fingertip velocity
    /// expressed in the contact frame.
    fn jacobian(&self, q_mnp: &DVector<f64>, sites: &[Option<FingerSite>], object_pose: &Pose)
        -> Vec<DMatrix<f64>>;

    /// True when the configuration collides with itself, the object, or
    /// the environment (touching at assigned contacts is not a collision).
    fn self_and_env_collision(
        &self,
        q_mnp: &DVector<f64>,
        object_pose: &Pose,
        env: &EnvironmentBody,
    ) -> bool;

    /// True when the robot can move between the two configurations while
    /// the object holds still (the relocation sub-planner).
    fn relocation_path_exists(
        &self,
        q_from: &DVector<f64>,
        q_to: &DVector<f64>,
        object_pose: &Pose,
        env: &EnvironmentBody,
    ) -> bool;
}

/// Free-moving ball fingers: each finger is a sphere whose center is its
/// own 3-DOF configuration, constrained to an axis-aligned workspace box.
#[derive(Debug, Clone)]
pub struct FreeBallFingers {
    pub n_fingers: usize,
    pub radius: f64,
    pub workspace_min: Vector3<f64>,
    pub workspace_max: Vector3<f64>,
    /// Object-frame hull, fixed at construction, for clearance queries.
    hull: Vec<HullFace>,
    /// Object-frame vertex centroid and circumradius about it, for
    /// routing relocation detours outside the body.
    centroid: Vector3<f64>,
    circumradius: f64,
}

/// Clearance slack: a ball whose center sits exactly at `radius` from a
/// surface is touching, not colliding.
const TOUCH_TOL: f64 = 1e-6;

impl FreeBallFingers {
    pub fn new(
        n_fingers: usize,
        radius: f64,
        workspace_min: Vector3<f64>,
        workspace_max: Vector3<f64>,
        body: &ObjectBody,
    ) -> Result<Self> {
        if n_fingers == 0 || radius <= 0.0 {
            return Err(Error::Task(
                "manipulator needs n_fingers >= 1 and radius > 0".into(),
            ));
        }
        if (0..3).any(|i| workspace_min[i] >= workspace_max[i]) {
            return Err(Error::Task("manipulator workspace box is empty".into()));
        }
        let centroid =
            body.vertices.iter().sum::<Vector3<f64>>() / body.vertices.len() as f64;
        let circumradius = body
            .vertices
            .iter()
            .map(|v| (v - centroid).norm())
            .fold(0.0f64, f64::max);
        Ok(FreeBallFingers {
            n_fingers,
            radius,
            workspace_min,
            workspace_max,
            hull: hull_faces(&body.vertices)?,
            centroid,
            circumradius,
        })
    }

    fn in_workspace(&self, c: &Vector3<f64>) -> bool {
        (0..3).all(|i| c[i] >= self.workspace_min[i] && c[i] <= self.workspace_max[i])
    }

    /// Ball center for a site: surface point plus radius along the
    /// outward normal, world frame.
    fn center_for_site(&self, site: &FingerSite, object_pose: &Pose) -> Vector3<f64> {
        let p = object_pose.transform_point(&site.position);
        let n = object_pose.transform_vector(&site.normal);
        p + self.radius * n
    }

    /// Rest placement for an unassigned finger: a far corner of the
    /// workspace, one slot per finger so parked fingers never coincide.
    fn rest_center(&self, finger: usize) -> Vector3<f64> {
        let mut c = self.workspace_max;
        c -= Vector3::repeat(self.radius);
        c.x -= 2.5 * self.radius * finger as f64;
        c
    }

    fn centers(&self, q_mnp: &DVector<f64>) -> Vec<Vector3<f64>> {
        (0..self.n_fingers)
            .map(|k| Vector3::new(q_mnp[3 * k], q_mnp[3 * k + 1], q_mnp[3 * k + 2]))
            .collect()
    }

    /// Collision state of a single ball center against object, fingers,
    /// and environment.
    fn ball_collides(
        &self,
        c: &Vector3<f64>,
        others: &[Vector3<f64>],
        object_pose: &Pose,
        env: &EnvironmentBody,
    ) -> bool {
        let local = object_pose.inverse_transform_point(c);
        if hull_plane_distance(&self.hull, &local) < self.radius - TOUCH_TOL {
            return true;
        }
        for prim in &env.primitives {
            if prim.distance_to_point(c) < self.radius - TOUCH_TOL {
                return true;
            }
        }
        for o in others {
            if (c - o).norm() < 2.0 * self.radius - TOUCH_TOL {
                return true;
            }
        }
        false
    }

    /// Straight-segment sweep test at quarter-radius resolution.
    fn segment_clear(
        &self,
        from: &Vector3<f64>,
        to: &Vector3<f64>,
        others: &[Vector3<f64>],
        object_pose: &Pose,
        env: &EnvironmentBody,
    ) -> bool {
        let len = (to - from).norm();
        let steps = (len / (0.25 * self.radius)).ceil().max(1.0) as usize;
        for i in 0..=steps {
            let c = from + (to - from) * (i as f64 / steps as f64);
            if !self.in_workspace(&c) || self.ball_collides(&c, others, object_pose, env) {
                return false;
            }
        }
        true
    }

    fn clamp_to_workspace(&self, c: &Vector3<f64>) -> Vector3<f64> {
        let mut out = *c;
        for i in 0..3 {
            out[i] = out[i]
                .max(self.workspace_min[i] + self.radius)
                .min(self.workspace_max[i] - self.radius);
        }
        out
    }

    /// Outward retraction direction: the normal of the nearest hull face,
    /// rotated to the world frame.
    fn retract_direction(&self, c: &Vector3<f64>, object_pose: &Pose) -> Vector3<f64> {
        let local = object_pose.inverse_transform_point(c);
        let face = self
            .hull
            .iter()
            .max_by(|a, b| {
                let da = a.normal.dot(&local) - a.offset;
                let db = b.normal.dot(&local) - b.offset;
                da.partial_cmp(&db).unwrap()
            })
            .expect("hull has faces");
        object_pose.transform_vector(&face.normal)
    }
}

impl ManipulatorModel for FreeBallFingers {
    fn dof(&self) -> usize {
        3 * self.n_fingers
    }

    fn max_fingers(&self) -> usize {
        self.n_fingers
    }

    fn forward_kinematics(&self, q_mnp: &DVector<f64>) -> Vec<Vector3<f64>> {
        // the fingertip is the point of the ball facing the object; for
        // planning purposes the center offset is applied by IK, so FK
        // reports the centers shifted back along the stored direction is
        // unnecessary: contact points live radius away from the center,
        // and callers pair FK with the sites they requested. Report
        // centers.
        self.centers(q_mnp)
    }

    fn inverse_kinematics(
        &self,
        sites: &[Option<FingerSite>],
        object_pose: &Pose,
    ) -> Option<DVector<f64>> {
        assert_eq!(sites.len(), self.n_fingers);
        let mut q = DVector::zeros(self.dof());
        for (k, site) in sites.iter().enumerate() {
            let c = match site {
                Some(s) => self.center_for_site(s, object_pose),
                None => self.rest_center(k),
            };
            if !self.in_workspace(&c) {
                return None;
            }
            q.fixed_rows_mut::<3>(3 * k).copy_from(&c);
        }
        Some(q)
    }

    fn jacobian(
        &self,
        _q_mnp: &DVector<f64>,
        sites: &[Option<FingerSite>],
        object_pose: &Pose,
    ) -> Vec<DMatrix<f64>> {
        use crate::geometry::tangent_frame;
        let dof = self.dof();
        sites
            .iter()
            .enumerate()
            .filter_map(|(k, site)| site.as_ref().map(|s| (k, s)))
            .map(|(k, s)| {
                // contact normal points into the object: world -outward
                let n_contact = -object_pose.transform_vector(&s.normal);
                let (t1, t2) = tangent_frame(&n_contact);
                let mut j = DMatrix::zeros(3, dof);
                for (r, axis) in [t1, t2, n_contact].iter().enumerate() {
                    for c in 0..3 {
                        j[(r, 3 * k + c)] = axis[c];
                    }
                }
                j
            })
            .collect()
    }

    fn self_and_env_collision(
        &self,
        q_mnp: &DVector<f64>,
        object_pose: &Pose,
        env: &EnvironmentBody,
    ) -> bool {
        let centers = self.centers(q_mnp);
        for (k, c) in centers.iter().enumerate() {
            if !self.in_workspace(c) {
                return true;
            }
            let others: Vec<Vector3<f64>> = centers
                .iter()
                .enumerate()
                .filter(|&(j, _)| j > k)
                .map(|(_, o)| *o)
                .collect();
            if self.ball_collides(c, &others, object_pose, env) {
                return true;
            }
        }
        false
    }

    fn relocation_path_exists(
        &self,
        q_from: &DVector<f64>,
        q_to: &DVector<f64>,
        object_pose: &Pose,
        env: &EnvironmentBody,
    ) -> bool {
        let from = self.centers(q_from);
        let to = self.centers(q_to);
        // fingers move one at a time: retract 2 radii off the surface,
        // translate, approach; stationary fingers are obstacles at their
        // *current* positions (already-moved fingers at their targets)
        let mut current = from.clone();
        for k in 0..self.n_fingers {
            if (from[k] - to[k]).norm() < 1e-12 {
                continue;
            }
            let others: Vec<Vector3<f64>> = current
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .map(|(_, c)| *c)
                .collect();
            let dir_from = self.retract_direction(&from[k], object_pose);
            let dir_to = self.retract_direction(&to[k], object_pose);
            // clamp: retracting from a workspace boundary (e.g. the rest
            // corner) must not leave the workspace
            let retract_from = self.clamp_to_workspace(&(from[k] + 2.0 * self.radius * dir_from));
            let retract_to = self.clamp_to_workspace(&(to[k] + 2.0 * self.radius * dir_to));
            if !self.segment_clear(&from[k], &retract_from, &others, object_pose, env)
                || !self.segment_clear(&retract_to, &to[k], &others, object_pose, env)
            {
                return false;
            }
            // translate leg: direct chord, else detour through a waypoint
            // outside the circumsphere (adjacent-face moves would
            // otherwise cut through the body)
            let mut translate_ok =
                self.segment_clear(&retract_from, &retract_to, &others, object_pose, env);
            if !translate_ok {
                let center = object_pose.transform_point(&self.centroid);
                let reach = self.circumradius + 4.0 * self.radius;
                let mut candidates = vec![(dir_from + dir_to).normalize()];
                for axis in 0..3 {
                    for sign in [1.0, -1.0] {
                        let mut d = Vector3::zeros();
                        d[axis] = sign;
                        candidates.push(d);
                    }
                }
                translate_ok = candidates.iter().any(|d| {
                    let mid = self.clamp_to_workspace(&(center + reach * d));
                    self.segment_clear(&retract_from, &mid, &others, object_pose, env)
                        && self.segment_clear(&mid, &retract_to, &others, object_pose, env)
                });
            }
            if !translate_ok {
                return false;
            }
            current[k] = to[k];
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::Primitive;
    use nalgebra::Matrix3;

    fn cube_body() -> ObjectBody {
        let h = 0.5;
        let vertices = [
            [-h, -h, 0.0],
            [-h, h, 0.0],
            [h, -h, 0.0],
            [h, h, 0.0],
            [-h, -h, 1.0],
            [-h, h, 1.0],
            [h, -h, 1.0],
            [h, h, 1.0],
        ]
        .iter()
        .map(|p| Vector3::new(p[0], p[1], p[2]))
        .collect();
        ObjectBody {
            vertices,
            mass: 1.0,
            inertia: Matrix3::identity() * 0.1,
            com: Vector3::new(0.0, 0.0, 0.5),
            mu_env: 0.5,
            mu_mnp: 0.5,
        }
    }

    fn floor() -> EnvironmentBody {
        EnvironmentBody {
            primitives: vec![Primitive::HalfSpace {
                normal: Vector3::new(0.0, 0.0, 1.0),
                offset: 0.0,
            }],
        }
    }

    fn model(n: usize) -> FreeBallFingers {
        FreeBallFingers::new(
            n,
            0.05,
            Vector3::new(-5.0, -5.0, 0.0),
            Vector3::new(5.0, 5.0, 5.0),
            &cube_body(),
        )
        .unwrap()
    }

    fn side_site() -> FingerSite {
        FingerSite {
            position: Vector3::new(-0.5, 0.0, 0.5),
            normal: Vector3::new(-1.0, 0.0, 0.0),
        }
    }

    #[test]
    fn ik_places_ball_center_off_the_surface() {
        let m = model(1);
        let q = m
            .inverse_kinematics(&[Some(side_site())], &Pose::identity())
            .unwrap();
        let tips = m.forward_kinematics(&q);
        // center = site + radius * outward normal
        let expected = Vector3::new(-0.55, 0.0, 0.5);
        assert!((tips[0] - expected).norm() < 1e-6);
    }

    #[test]
    fn ik_respects_workspace() {
        let m = FreeBallFingers::new(
            1,
            0.05,
            Vector3::new(0.0, -1.0, 0.0),
            Vector3::new(1.0, 1.0, 1.0),
            &cube_body(),
        )
        .unwrap();
        // the -x face center lies at x = -0.55, outside workspace x >= 0
        assert!(m
            .inverse_kinematics(&[Some(side_site())], &Pose::identity())
            .is_none());
    }

    #[test]
    fn ik_tracks_the_object_pose() {
        let m = model(1);
        let pose = Pose {
            position: Vector3::new(0.3, 0.2, 0.0),
            orientation: nalgebra::UnitQuaternion::from_euler_angles(0.0, 0.0, 0.4),
        };
        let q = m.inverse_kinematics(&[Some(side_site())], &pose).unwrap();
        let c = m.forward_kinematics(&q)[0];
        let expected = pose.transform_point(&Vector3::new(-0.55, 0.0, 0.5));
        assert!((c - expected).norm() < 1e-9);
    }

    #[test]
    fn touching_contact_is_not_a_collision() {
        let m = model(1);
        let q = m
            .inverse_kinematics(&[Some(side_site())], &Pose::identity())
            .unwrap();
        assert!(!m.self_and_env_collision(&q, &Pose::identity(), &floor()));
    }

    #[test]
    fn penetrating_ball_collides() {
        let m = model(1);
        // center only half a radius from the face plane
        let q = DVector::from_vec(vec![-0.525, 0.0, 0.5]);
        assert!(m.self_and_env_collision(&q, &Pose::identity(), &floor()));
        // and a ball buried in the floor
        let q = DVector::from_vec(vec![2.0, 0.0, 0.01]);
        assert!(m.self_and_env_collision(&q, &Pose::identity(), &floor()));
    }

    #[test]
    fn overlapping_fingers_collide() {
        let m = model(2);
        let q = DVector::from_vec(vec![-0.55, 0.0, 0.5, -0.55, 0.06, 0.5]);
        assert!(m.self_and_env_collision(&q, &Pose::identity(), &floor()));
        let q = DVector::from_vec(vec![-0.55, 0.0, 0.5, -0.55, 0.2, 0.5]);
        assert!(!m.self_and_env_collision(&q, &Pose::identity(), &floor()));
    }

    #[test]
    fn relocation_between_faces_exists() {
        let m = model(1);
        let pose = Pose::identity();
        let q_from = m.inverse_kinematics(&[Some(side_site())], &pose).unwrap();
        let other = FingerSite {
            position: Vector3::new(0.0, 0.5, 0.5),
            normal: Vector3::new(0.0, 1.0, 0.0),
        };
        let q_to = m.inverse_kinematics(&[Some(other)], &pose).unwrap();
        assert!(m.relocation_path_exists(&q_from, &q_to, &pose, &floor()));
    }

    #[test]
    fn relocation_blocked_by_floor() {
        // target on the bottom face: the approach would push the ball
        // through the floor
        let m = model(1);
        let pose = Pose::identity();
        let q_from = m.inverse_kinematics(&[Some(side_site())], &pose).unwrap();
        let bottom = FingerSite {
            position: Vector3::new(0.0, 0.0, 0.0),
            normal: Vector3::new(0.0, 0.0, -1.0),
        };
        let q_to = DVector::from_vec(vec![0.0, 0.0, -0.05]);
        let _ = bottom;
        assert!(!m.relocation_path_exists(&q_from, &q_to, &pose, &floor()));
    }

    #[test]
    fn jacobian_rows_are_contact_frame_axes() {
        let m = model(2);
        let pose = Pose::identity();
        let sites = [Some(side_site()), None];
        let q = m.inverse_kinematics(&sites, &pose).unwrap();
        let jacs = m.jacobian(&q, &sites, &pose);
        assert_eq!(jacs.len(), 1);
        let j = &jacs[0];
        assert_eq!(j.shape(), (3, 6));
        // contact normal is +x (into the object from the -x face)
        let n = Vector3::new(j[(2, 0)], j[(2, 1)], j[(2, 2)]);
        assert!((n - Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
        // rows orthonormal
        for r in 0..3 {
            let row = Vector3::new(j[(r, 0)], j[(r, 1)], j[(r, 2)]);
            assert!((row.norm() - 1.0).abs() < 1e-12);
        }
        // unassigned finger's columns are untouched
        assert!(j.view((0, 3), (3, 3)).norm() < 1e-15);
    }
}
