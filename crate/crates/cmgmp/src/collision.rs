//! Analytic contact detection between a convex-polytope object and a
//! primitive environment, plus finger-site generation on the object hull.
//!
//! The contact model is object vertices against environment primitives:
//! face-on-face contact shows up as the vertex set of the touching face.

use crate::geometry::{skew, Pose};
use crate::{Error, Result};
use nalgebra::{Matrix3, Matrix6, Vector3};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The manipulated rigid body. Vertices are in the object frame; the
/// inertia is about the center of mass in the body frame.
#[derive(Debug, Clone)]
pub struct ObjectBody {
    pub vertices: Vec<Vector3<f64>>,
    pub mass: f64,
    pub inertia: Matrix3<f64>,
    pub com: Vector3<f64>,
    pub mu_env: f64,
    pub mu_mnp: f64,
}

#[derive(Debug, Clone)]
pub enum Primitive {
    /// Solid half-space { x : normal . x <= offset }.
    HalfSpace { normal: Vector3<f64>, offset: f64 },
    /// Solid oriented box.
    Box {
        pose: Pose,
        half_extents: Vector3<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct EnvironmentBody {
    pub primitives: Vec<Primitive>,
}

/// One contact: world-frame position and normal, normal pointing from the
/// other body into the object. Negative signed distance is penetration.
#[derive(Debug, Clone)]
pub struct ContactPoint {
    pub position: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub signed_distance: f64,
}

/// A candidate finger placement on the object surface, object frame,
/// outward normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FingerSite {
    pub position: Vector3<f64>,
    pub normal: Vector3<f64>,
}

impl ObjectBody {
    pub fn validate(&self) -> Result<()> {
        if self.vertices.len() < 4 {
            return Err(Error::Task("object needs at least 4 vertices".into()));
        }
        if !(self.mass > 0.0) {
            return Err(Error::Task("object mass must be positive".into()));
        }
        if (self.inertia - self.inertia.transpose()).norm() > 1e-9 {
            return Err(Error::Task("object inertia must be symmetric".into()));
        }
        let eig = self.inertia.symmetric_eigenvalues();
        if eig.iter().any(|&e| e <= 0.0) {
            return Err(Error::Task("object inertia must be positive definite".into()));
        }
        if self.mu_env < 0.0 || self.mu_mnp < 0.0 {
            return Err(Error::Task("friction coefficients must be >= 0".into()));
        }
        // non-coplanar check: hull construction fails on flat vertex sets
        hull_faces(&self.vertices)?;
        Ok(())
    }

    /// 6x6 spatial inertia about the body-frame origin, twist order
    /// (linear, angular).
    pub fn spatial_inertia(&self) -> Matrix6<f64> {
        let c = skew(&self.com);
        let mut m = Matrix6::zeros();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&(Matrix3::identity() * self.mass));
        m.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-self.mass * c));
        m.fixed_view_mut::<3, 3>(3, 0).copy_from(&(self.mass * c));
        m.fixed_view_mut::<3, 3>(3, 3)
            .copy_from(&(self.inertia - self.mass * c * c));
        m
    }
}

impl Primitive {
    /// Euclidean signed distance from a world point to the solid:
    /// positive outside, negative (max depth) inside.
    pub fn distance_to_point(&self, p: &Vector3<f64>) -> f64 {
        match self {
            Primitive::HalfSpace { normal, offset } => normal.dot(p) - offset,
            Primitive::Box { pose, half_extents } => {
                let local = pose.inverse_transform_point(p);
                let d = Vector3::new(
                    local.x.abs() - half_extents.x,
                    local.y.abs() - half_extents.y,
                    local.z.abs() - half_extents.z,
                );
                let outside = Vector3::new(d.x.max(0.0), d.y.max(0.0), d.z.max(0.0));
                outside.norm() + d.max().min(0.0)
            }
        }
    }

    /// Signed distance and inward (into-object) normal for a world point,
    /// or None when the point is not associated with any face of the
    /// primitive (outside a box's face prisms).
    fn point_contact(&self, p: &Vector3<f64>) -> Option<(f64, Vector3<f64>)> {
        match self {
            Primitive::HalfSpace { normal, offset } => {
                Some((normal.dot(p) - offset, *normal))
            }
            Primitive::Box { pose, half_extents } => {
                let local = pose.inverse_transform_point(p);
                let lateral_tol = 1e-9;
                // faces ordered +x,-x,+y,-y,+z,-z; a vertex maps to at most
                // one face: the laterally valid face with the largest
                // signed distance
                let mut best: Option<(f64, Vector3<f64>)> = None;
                for axis in 0..3 {
                    for sign in [1.0f64, -1.0] {
                        let d = sign * local[axis] - half_extents[axis];
                        let lateral_ok = (0..3).filter(|&b| b != axis).all(|b| {
                            local[b].abs() <= half_extents[b] + lateral_tol
                        });
                        if !lateral_ok {
                            continue;
                        }
                        if best.map_or(true, |(bd, _)| d > bd) {
                            let mut n = Vector3::zeros();
                            n[axis] = sign;
                            best = Some((d, pose.transform_vector(&n)));
                        }
                    }
                }
                best
            }
        }
    }
}

/// Every object vertex within `d_contact` of an environment primitive, one
/// contact per (primitive, vertex) pair in that order. Penetration deeper
/// than 10 * d_contact is an error.
pub fn detect_contacts(
    body: &ObjectBody,
    q: &Pose,
    env: &EnvironmentBody,
    d_contact: f64,
) -> Result<Vec<ContactPoint>> {
    assert!(d_contact > 0.0);
    let mut out = Vec::new();
    for (pi, prim) in env.primitives.iter().enumerate() {
        for (vi, v) in body.vertices.iter().enumerate() {
            let p = q.transform_point(v);
            if let Some((d, n)) = prim.point_contact(&p) {
                if d < -10.0 * d_contact {
                    return Err(Error::DeepPenetration {
                        depth: -d,
                        limit: 10.0 * d_contact,
                        primitive: pi,
                        vertex: vi,
                    });
                }
                if d <= d_contact {
                    out.push(ContactPoint {
                        position: p,
                        normal: n,
                        signed_distance: d,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// The (primitive, vertex) identity of each contact `detect_contacts`
/// would return, in the same order, with its signed distance.
pub fn contact_pairs(
    body: &ObjectBody,
    q: &Pose,
    env: &EnvironmentBody,
    d_contact: f64,
) -> Result<Vec<(usize, usize, f64)>> {
    let mut out = Vec::new();
    for (pi, prim) in env.primitives.iter().enumerate() {
        for (vi, v) in body.vertices.iter().enumerate() {
            let p = q.transform_point(v);
            if let Some((d, _)) = prim.point_contact(&p) {
                if d < -10.0 * d_contact {
                    return Err(Error::DeepPenetration {
                        depth: -d,
                        limit: 10.0 * d_contact,
                        primitive: pi,
                        vertex: vi,
                    });
                }
                if d <= d_contact {
                    out.push((pi, vi, d));
                }
            }
        }
    }
    Ok(out)
}

pub fn signed_distances(contacts: &[ContactPoint]) -> Vec<f64> {
    contacts.iter().map(|c| c.signed_distance).collect()
}

/// A planar face of the convex hull: outward plane, ordered boundary
/// vertices, area and centroid.
#[derive(Debug, Clone)]
pub struct HullFace {
    pub normal: Vector3<f64>,
    pub offset: f64,
    pub polygon: Vec<Vector3<f64>>,
    pub area: f64,
    pub centroid: Vector3<f64>,
}

/// Brute-force hull faces of a small vertex cloud: every supporting plane
/// through three vertices with all points on the inner side, coplanar
/// planes merged.
pub fn hull_faces(vertices: &[Vector3<f64>]) -> Result<Vec<HullFace>> {
    let n = vertices.len();
    if n < 4 {
        return Err(Error::DegenerateHull("fewer than 4 vertices".into()));
    }
    let tol = 1e-9;
    let mut planes: Vec<(Vector3<f64>, f64)> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let e1 = vertices[j] - vertices[i];
                let e2 = vertices[k] - vertices[i];
                let cross = e1.cross(&e2);
                if cross.norm() < 1e-12 {
                    continue;
                }
                let mut normal = cross / cross.norm();
                let mut offset = normal.dot(&vertices[i]);
                let mut above = false;
                let mut below = false;
                for v in vertices {
                    let d = normal.dot(v) - offset;
                    if d > tol {
                        above = true;
                    } else if d < -tol {
                        below = true;
                    }
                }
                if above && below {
                    continue;
                }
                if above {
                    normal = -normal;
                    offset = -offset;
                }
                if !planes
                    .iter()
                    .any(|(pn, po)| (pn - normal).norm() < 1e-7 && (po - offset).abs() < 1e-7)
                {
                    planes.push((normal, offset));
                }
            }
        }
    }
    if planes.len() < 4 {
        return Err(Error::DegenerateHull(
            "vertex set is coplanar or degenerate".into(),
        ));
    }
    let mut faces = Vec::new();
    for (normal, offset) in planes {
        let mut poly: Vec<Vector3<f64>> = vertices
            .iter()
            .filter(|v| (normal.dot(v) - offset).abs() <= tol)
            .cloned()
            .collect();
        if poly.len() < 3 {
            continue;
        }
        // order around the face centroid
        let center: Vector3<f64> = poly.iter().sum::<Vector3<f64>>() / poly.len() as f64;
        let (t1, t2) = crate::geometry::tangent_frame(&normal);
        poly.sort_by(|a, b| {
            let pa = (a - center).dot(&t2).atan2((a - center).dot(&t1));
            let pb = (b - center).dot(&t2).atan2((b - center).dot(&t1));
            pa.partial_cmp(&pb).unwrap()
        });
        let mut area = 0.0;
        let mut centroid = Vector3::zeros();
        for t in 1..(poly.len() - 1) {
            let a = poly[0];
            let b = poly[t];
            let c = poly[t + 1];
            let ta = 0.5 * (b - a).cross(&(c - a)).norm();
            area += ta;
            centroid += ta * (a + b + c) / 3.0;
        }
        if area > 1e-12 {
            centroid /= area;
        }
        faces.push(HullFace {
            normal,
            offset,
            polygon: poly,
            area,
            centroid,
        });
    }
    // deterministic face order: by normal components then offset
    faces.sort_by(|a, b| {
        (a.normal.x, a.normal.y, a.normal.z, a.offset)
            .partial_cmp(&(b.normal.x, b.normal.y, b.normal.z, b.offset))
            .unwrap()
    });
    Ok(faces)
}

/// Signed distance from a world point to the hull (exact outside near a
/// face, a lower bound elsewhere): max over supporting planes.
pub fn hull_plane_distance(faces: &[HullFace], p: &Vector3<f64>) -> f64 {
    faces
        .iter()
        .map(|f| f.normal.dot(p) - f.offset)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `count` candidate finger sites on the hull, allocated to faces by area
/// with a per-face interior grid; one-point faces take the centroid.
pub fn sample_finger_sites(
    body: &ObjectBody,
    count: usize,
    rng_seed: u64,
) -> Result<Vec<FingerSite>> {
    assert!(count >= 1);
    let faces = hull_faces(&body.vertices)?;
    let total_area: f64 = faces.iter().map(|f| f.area).sum();
    if total_area < 1e-12 {
        return Err(Error::DegenerateHull("zero surface area".into()));
    }
    // largest-remainder allocation of `count` sites across faces
    let quotas: Vec<f64> = faces
        .iter()
        .map(|f| count as f64 * f.area / total_area)
        .collect();
    let mut alloc: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut remaining = count - alloc.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..faces.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in &order {
        if remaining == 0 {
            break;
        }
        alloc[i] += 1;
        remaining -= 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut sites = Vec::with_capacity(count);
    for (face, &k) in faces.iter().zip(&alloc) {
        if k == 0 {
            continue;
        }
        if k == 1 {
            sites.push(FingerSite {
                position: face.centroid,
                normal: face.normal,
            });
            continue;
        }
        sites.extend(face_grid_sites(face, k, &mut rng));
    }
    Ok(sites)
}

/// Lay out k points on a face: cell centers of the densest grid over the
/// face bounding box that keeps at least k centers inside the polygon,
/// thinned to exactly k with the given rng.
fn face_grid_sites(face: &HullFace, k: usize, rng: &mut ChaCha8Rng) -> Vec<FingerSite> {
    let (t1, t2) = crate::geometry::tangent_frame(&face.normal);
    let coords: Vec<(f64, f64)> = face
        .polygon
        .iter()
        .map(|v| ((v - face.centroid).dot(&t1), (v - face.centroid).dot(&t2)))
        .collect();
    let (mut umin, mut umax, mut vmin, mut vmax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(u, v) in &coords {
        umin = umin.min(u);
        umax = umax.max(u);
        vmin = vmin.min(v);
        vmax = vmax.max(v);
    }
    let inside = |u: f64, v: f64| -> bool {
        // convex polygon, ccw in (t1,t2); small shrink keeps sites off edges
        let m = coords.len();
        for i in 0..m {
            let (ax, ay) = coords[i];
            let (bx, by) = coords[(i + 1) % m];
            if (bx - ax) * (v - ay) - (by - ay) * (u - ax) < 1e-9 {
                return false;
            }
        }
        true
    };
    let mut g = (k as f64).sqrt().ceil() as usize;
    loop {
        let mut pts = Vec::new();
        for i in 0..g {
            for j in 0..g {
                let u = umin + (umax - umin) * (i as f64 + 0.5) / g as f64;
                let v = vmin + (vmax - vmin) * (j as f64 + 0.5) / g as f64;
                if inside(u, v) {
                    pts.push((u, v));
                }
            }
        }
        if pts.len() >= k {
            let keep = if pts.len() == k {
                (0..k).collect::<Vec<_>>()
            } else {
                let mut idx = sample(rng, pts.len(), k).into_vec();
                idx.sort_unstable();
                idx
            };
            return keep
                .into_iter()
                .map(|i| {
                    let (u, v) = pts[i];
                    FingerSite {
                        position: face.centroid + u * t1 + v * t2,
                        normal: face.normal,
                    }
                })
                .collect();
        }
        g += 1;
        assert!(g < 10_000, "face grid failed to converge");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose;
    use approx::assert_relative_eq;
    use nalgebra::UnitQuaternion;
    use proptest::prelude::*;

    pub fn unit_cube() -> ObjectBody {
        let h = 0.5;
        let mut vertices = Vec::new();
        for x in [-h, h] {
            for y in [-h, h] {
                for z in [-h, h] {
                    vertices.push(Vector3::new(x, y, z));
                }
            }
        }
        ObjectBody {
            vertices,
            mass: 0.5,
            inertia: Matrix3::identity() * (0.5 / 6.0),
            com: Vector3::zeros(),
            mu_env: 0.5,
            mu_mnp: 0.8,
        }
    }

    fn floor() -> EnvironmentBody {
        EnvironmentBody {
            primitives: vec![Primitive::HalfSpace {
                normal: Vector3::z(),
                offset: 0.0,
            }],
        }
    }

    fn pose_z(z: f64) -> Pose {
        Pose::new(Vector3::new(0.0, 0.0, z), UnitQuaternion::identity())
    }

    #[test]
    fn cube_resting_on_floor() {
        let contacts = detect_contacts(&unit_cube(), &pose_z(0.5), &floor(), 1e-3).unwrap();
        assert_eq!(contacts.len(), 4);
        for c in &contacts {
            assert_relative_eq!(c.normal, Vector3::z(), epsilon = 1e-12);
            assert_relative_eq!(c.signed_distance, 0.0, epsilon = 1e-12);
            assert_relative_eq!(c.position.z, 0.0, epsilon = 1e-12);
            assert_relative_eq!(c.position.x.abs(), 0.5, epsilon = 1e-12);
            assert_relative_eq!(c.position.y.abs(), 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn cube_in_midair_has_no_contacts() {
        let contacts = detect_contacts(&unit_cube(), &pose_z(1.0), &floor(), 0.005).unwrap();
        assert!(contacts.is_empty());
    }

    #[test]
    fn cube_in_corner_has_eight_contacts() {
        // floor plus wall occupying x >= 0.5; cube touching both
        let env = EnvironmentBody {
            primitives: vec![
                Primitive::HalfSpace {
                    normal: Vector3::z(),
                    offset: 0.0,
                },
                Primitive::HalfSpace {
                    normal: -Vector3::x(),
                    offset: -0.5,
                },
            ],
        };
        let q = pose_z(0.5);
        let contacts = detect_contacts(&unit_cube(), &q, &env, 1e-3).unwrap();
        // oracle: enumerate vertex-primitive distances directly
        let body = unit_cube();
        let mut expected = 0;
        for prim in &env.primitives {
            for v in &body.vertices {
                let p = q.transform_point(v);
                let d = prim.point_contact(&p).unwrap().0;
                if d <= 1e-3 {
                    expected += 1;
                }
            }
        }
        assert_eq!(expected, 8);
        assert_eq!(contacts.len(), 8);
        assert_eq!(contacts.iter().filter(|c| c.normal.z > 0.5).count(), 4);
        assert_eq!(contacts.iter().filter(|c| c.normal.x < -0.5).count(), 4);
    }

    #[test]
    fn deep_penetration_is_an_error() {
        let r = detect_contacts(&unit_cube(), &pose_z(0.45), &floor(), 1e-3);
        assert!(matches!(r, Err(Error::DeepPenetration { .. })));
    }

    #[test]
    fn penetration_distance_vector() {
        let contacts = detect_contacts(&unit_cube(), &pose_z(0.499), &floor(), 1e-3).unwrap();
        let d = signed_distances(&contacts);
        assert_eq!(d.len(), 4);
        for x in d {
            assert_relative_eq!(x, -0.001, epsilon = 1e-12);
        }
        assert!(signed_distances(&[]).is_empty());
    }

    #[test]
    fn box_primitive_decomposes_into_faces() {
        let env = EnvironmentBody {
            primitives: vec![Primitive::Box {
                pose: pose_z(-0.5),
                half_extents: Vector3::new(2.0, 2.0, 0.5),
            }],
        };
        // box top face is z = 0: same four contacts as the half-space floor
        let contacts = detect_contacts(&unit_cube(), &pose_z(0.5), &env, 1e-3).unwrap();
        assert_eq!(contacts.len(), 4);
        for c in &contacts {
            assert_relative_eq!(c.normal, Vector3::z(), epsilon = 1e-12);
        }
        // far to the side: no contacts even though the z-slab matches
        let q = Pose::new(Vector3::new(5.0, 0.0, 0.5), UnitQuaternion::identity());
        assert!(detect_contacts(&unit_cube(), &q, &env, 1e-3).unwrap().is_empty());
    }

    #[test]
    fn cube_hull_has_six_faces() {
        let faces = hull_faces(&unit_cube().vertices).unwrap();
        assert_eq!(faces.len(), 6);
        for f in &faces {
            assert_relative_eq!(f.area, 1.0, epsilon = 1e-9);
            assert_eq!(f.polygon.len(), 4);
        }
    }

    #[test]
    fn cube_six_sites_are_face_centroids() {
        let sites = sample_finger_sites(&unit_cube(), 6, 0).unwrap();
        assert_eq!(sites.len(), 6);
        for s in &sites {
            // centroid of each face lies at the center of that face
            assert_relative_eq!(s.position.norm(), 0.5, epsilon = 1e-9);
            assert_relative_eq!(s.normal.norm(), 1.0, epsilon = 1e-12);
            assert_relative_eq!(s.position, 0.5 * s.normal, epsilon = 1e-9);
        }
    }

    #[test]
    fn two_hundred_sites_on_surface() {
        let body = unit_cube();
        let faces = hull_faces(&body.vertices).unwrap();
        let sites = sample_finger_sites(&body, 200, 7).unwrap();
        assert_eq!(sites.len(), 200);
        for s in &sites {
            let d = hull_plane_distance(&faces, &s.position);
            assert!(d.abs() <= 1e-6, "site off surface by {d}");
            // normal agrees with the supporting face plane
            let f = faces
                .iter()
                .find(|f| (f.normal.dot(&s.position) - f.offset).abs() < 1e-9)
                .unwrap();
            assert_relative_eq!(s.normal, f.normal, epsilon = 1e-9);
        }
    }

    #[test]
    fn site_sampling_is_deterministic() {
        let body = unit_cube();
        let a = sample_finger_sites(&body, 37, 123).unwrap();
        let b = sample_finger_sites(&body, 37, 123).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn translation_equivariance(
            t in prop::array::uniform3(-3.0f64..3.0),
            z in 0.4995f64..0.6,
        ) {
            let body = unit_cube();
            let t = Vector3::from(t);
            let q1 = pose_z(z);
            let base = detect_contacts(&body, &q1, &floor(), 1e-3).unwrap();
            // translate object and environment together
            let q2 = Pose::new(q1.position + t, q1.orientation);
            let env2 = EnvironmentBody {
                primitives: vec![Primitive::HalfSpace {
                    normal: Vector3::z(),
                    offset: Vector3::z().dot(&t),
                }],
            };
            let moved = detect_contacts(&body, &q2, &env2, 1e-3).unwrap();
            prop_assert_eq!(base.len(), moved.len());
            for (a, b) in base.iter().zip(&moved) {
                prop_assert!((a.signed_distance - b.signed_distance).abs() < 1e-9);
            }
        }
    }
}
