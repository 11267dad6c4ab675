//! Contact modes: representation, grasp maps, tangent-plane partitioning,
//! CS/SS enumeration, and the per-mode velocity and force constraint rows.
//!
//! A mode labels every environment contact as Separate or Maintain, and
//! every maintained contact with the sign pattern of its tangent velocity
//! against the tangent-plane partition. Finger contacts are sticking by
//! assumption and carry a fixed all-zero pattern.

use crate::collision::ContactPoint;
use crate::geometry::{tangent_frame, Pose};
use crate::lp;
use crate::mechanics::LinearSystem;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector, Matrix6x3, Vector2, Vector3, Vector6};
use rand::seq::index::sample;
use rand::Rng;

/// Strictness margin standing in for strict inequalities inside
/// enumeration LPs (solvers only handle non-strict constraints).
pub const SIGMA: f64 = 1e-6;

/// Hard cap on contacts for exhaustive CS enumeration.
pub const N_MAX_DEFAULT: usize = 16;

/// The `n_t` unit directions partitioning each contact tangent plane.
#[derive(Debug, Clone)]
pub struct TangentBasis {
    pub directions: Vec<Vector2<f64>>,
}

impl TangentBasis {
    /// Equal-angled partition; n_t = 2 is exactly [1,0], [0,1].
    pub fn new(n_t: usize) -> Self {
        assert!(n_t >= 2);
        let directions = (0..n_t)
            .map(|j| {
                let a = std::f64::consts::PI * j as f64 / n_t as f64;
                Vector2::new(a.cos(), a.sin())
            })
            .collect();
        TangentBasis { directions }
    }

    pub fn n_t(&self) -> usize {
        self.directions.len()
    }
}

impl Default for TangentBasis {
    fn default() -> Self {
        TangentBasis::new(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CsLabel {
    Maintain,
    Separate,
}

/// Tangential sign: one of -1, 0, +1 per tangent hyperplane. The mode
/// ordering ranks 0 < + < - so the all-sticking completion sorts first.
pub type SsSign = i8;

fn sign_rank(s: SsSign) -> u8 {
    match s {
        0 => 0,
        1 => 1,
        _ => 2,
    }
}

/// A full contact mode over the environment contacts: CS labels per
/// contact, and an SS sign vector for each maintained contact, in contact
/// order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ContactMode {
    pub cs: Vec<CsLabel>,
    pub ss: Vec<Vec<SsSign>>,
}

impl ContactMode {
    pub fn all_sticking(cs: &[CsLabel], n_t: usize) -> Self {
        let ss = cs
            .iter()
            .filter(|&&c| c == CsLabel::Maintain)
            .map(|_| vec![0i8; n_t])
            .collect();
        ContactMode { cs: cs.to_vec(), ss }
    }

    pub fn is_all_sticking(&self) -> bool {
        self.ss.iter().all(|v| v.iter().all(|&s| s == 0))
    }

    pub fn num_maintained(&self) -> usize {
        self.ss.len()
    }

    /// Sign vector of the k-th maintained contact.
    pub fn ss_of_maintained(&self, k: usize) -> &[SsSign] {
        &self.ss[k]
    }

    /// String encoding: "S" per separating contact, "M" plus sign
    /// characters per maintained contact; sticking finger contacts append
    /// "M0..0" (done by the caller, which knows the finger count).
    pub fn encode(&self) -> String {
        let mut out = String::new();
        let mut k = 0;
        for c in &self.cs {
            match c {
                CsLabel::Separate => out.push('S'),
                CsLabel::Maintain => {
                    out.push('M');
                    for &s in &self.ss[k] {
                        out.push(match s {
                            0 => '0',
                            1 => '+',
                            _ => '-',
                        });
                    }
                    k += 1;
                }
            }
        }
        out
    }

    /// Ordering key for deterministic output and tie-breaks: Maintain
    /// before Separate, signs ranked 0 < + < -.
    pub fn order_key(&self) -> Vec<u8> {
        let mut key = Vec::new();
        let mut k = 0;
        for c in &self.cs {
            match c {
                CsLabel::Maintain => {
                    key.push(0);
                    for &s in &self.ss[k] {
                        key.push(sign_rank(s));
                    }
                    k += 1;
                }
                CsLabel::Separate => key.push(1),
            }
        }
        key
    }
}

/// Parse a mode string ("S", "M00", "M+-", ...) back into a mode over
/// `n_contacts` environment contacts.
pub fn decode_mode(s: &str, n_t: usize) -> Result<ContactMode> {
    let mut cs = Vec::new();
    let mut ss = Vec::new();
    let mut chars = s.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            'S' => cs.push(CsLabel::Separate),
            'M' => {
                cs.push(CsLabel::Maintain);
                let mut signs = Vec::with_capacity(n_t);
                for _ in 0..n_t {
                    match chars.next() {
                        Some('0') => signs.push(0),
                        Some('+') => signs.push(1),
                        Some('-') => signs.push(-1),
                        other => {
                            return Err(Error::Trajectory(format!(
                                "bad sign char {other:?} in mode string {s:?}"
                            )))
                        }
                    }
                }
                ss.push(signs);
            }
            other => {
                return Err(Error::Trajectory(format!(
                    "bad mode char {other:?} in mode string {s:?}"
                )))
            }
        }
    }
    Ok(ContactMode { cs, ss })
}

/// The 6x3 wrench basis of one contact: columns map contact-frame force
/// (f_t1, f_t2, f_n) to a body-frame wrench about the body origin; the
/// transpose maps a body twist to the contact velocity (v_t1, v_t2, v_n).
#[derive(Debug, Clone)]
pub struct GraspMapEntry {
    pub matrix: Matrix6x3<f64>,
    /// Contact frame axes in the world frame (tangents from the
    /// deterministic tie-break, normal into the object).
    pub t1_world: Vector3<f64>,
    pub t2_world: Vector3<f64>,
    pub n_world: Vector3<f64>,
}

pub fn build_grasp_map(contact: &ContactPoint, q: &Pose) -> GraspMapEntry {
    let n_w = contact.normal;
    let (t1_w, t2_w) = tangent_frame(&n_w);
    let r = q.inverse_transform_point(&contact.position);
    let mut m = Matrix6x3::zeros();
    for (col, axis_w) in [t1_w, t2_w, n_w].iter().enumerate() {
        let axis_b = q.inverse_transform_vector(axis_w);
        let torque = r.cross(&axis_b);
        for i in 0..3 {
            m[(i, col)] = axis_b[i];
            m[(3 + i, col)] = torque[i];
        }
    }
    GraspMapEntry {
        matrix: m,
        t1_world: t1_w,
        t2_world: t2_w,
        n_world: n_w,
    }
}

/// One environment contact with its grasp map.
#[derive(Debug, Clone)]
pub struct EnvContact {
    pub point: ContactPoint,
    pub grasp: GraspMapEntry,
}

/// One sticking finger contact: grasp map plus the manipulator Jacobian
/// rows mapping joint velocity to the contact-frame velocity (3 x dof).
#[derive(Debug, Clone)]
pub struct FingerContact {
    pub point: ContactPoint,
    pub grasp: GraspMapEntry,
    pub jacobian: DMatrix<f64>,
}

/// Everything the assembly needs about the current contacts.
#[derive(Debug, Clone)]
pub struct ContactSet {
    pub env: Vec<EnvContact>,
    pub fingers: Vec<FingerContact>,
    /// Manipulator degrees of freedom (columns of each finger Jacobian).
    pub dof: usize,
    pub mu_env: f64,
    pub mu_mnp: f64,
}

impl ContactSet {
    pub fn env_only(contacts: &[ContactPoint], q: &Pose, mu_env: f64) -> Self {
        ContactSet {
            env: contacts
                .iter()
                .map(|c| EnvContact {
                    point: c.clone(),
                    grasp: build_grasp_map(c, q),
                })
                .collect(),
            fingers: Vec::new(),
            dof: 0,
            mu_env,
            mu_mnp: 0.0,
        }
    }
}

/// Row of G^T selecting the normal velocity, as a 6-vector over v.
fn normal_velocity_row(grasp: &GraspMapEntry) -> Vector6<f64> {
    grasp.matrix.column(2).into_owned()
}

/// Row of C_T^j applied to the tangent velocity, over v.
fn tangent_velocity_row(grasp: &GraspMapEntry, basis: &TangentBasis, j: usize) -> Vector6<f64> {
    let c = basis.directions[j];
    grasp.matrix.column(0) * c[0] + grasp.matrix.column(1) * c[1]
}

/// All CS assignments admitting a strictly separating twist, by exhaustive
/// 2^N search with an LP feasibility filter, in lexicographic order with
/// Maintain < Separate.
pub fn enumerate_cs_modes(
    env: &[EnvContact],
    n_max: usize,
) -> Result<Vec<Vec<CsLabel>>> {
    let n = env.len();
    if n > n_max {
        return Err(Error::TooManyContacts { n, max: n_max });
    }
    if n == 0 {
        return Ok(vec![Vec::new()]);
    }
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        let labels: Vec<CsLabel> = (0..n)
            .map(|i| {
                if mask >> (n - 1 - i) & 1 == 0 {
                    CsLabel::Maintain
                } else {
                    CsLabel::Separate
                }
            })
            .collect();
        if cs_feasible(env, &labels)? {
            out.push(labels);
        }
    }
    Ok(out)
}

fn cs_feasible(env: &[EnvContact], labels: &[CsLabel]) -> Result<bool> {
    let mut a_eq = Vec::new();
    let mut a_ineq = Vec::new();
    for (ec, l) in env.iter().zip(labels) {
        let row = normal_velocity_row(&ec.grasp);
        match l {
            CsLabel::Maintain => a_eq.push(row),
            CsLabel::Separate => a_ineq.push(row),
        }
    }
    lp_rows_feasible(&a_eq, &a_ineq)
}

fn lp_rows_feasible(eq: &[Vector6<f64>], ineq: &[Vector6<f64>]) -> Result<bool> {
    let a_eq = DMatrix::from_fn(eq.len(), 6, |r, c| eq[r][c]);
    let b_eq = DVector::zeros(eq.len());
    let a_ineq = DMatrix::from_fn(ineq.len(), 6, |r, c| ineq[r][c]);
    let b_ineq = DVector::from_element(ineq.len(), SIGMA);
    Ok(lp::solve_feasibility(&a_eq, &b_eq, &a_ineq, &b_ineq)?.feasible)
}

/// All kinematically feasible SS completions of a CS mode, in
/// lexicographic order, found by depth-first extension over the maintained
/// contacts with LP pruning of infeasible prefixes. When more than `cap`
/// completions exist, a uniform subsample is kept with the all-sticking
/// completion always retained.
pub fn enumerate_ss_modes<R: Rng>(
    cs: &[CsLabel],
    env: &[EnvContact],
    basis: &TangentBasis,
    cap: usize,
    rng: &mut R,
) -> Result<Vec<ContactMode>> {
    let n_t = basis.n_t();
    let maintained: Vec<usize> = cs
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == CsLabel::Maintain)
        .map(|(i, _)| i)
        .collect();

    // fixed rows from the CS part
    let mut base_eq: Vec<Vector6<f64>> = Vec::new();
    let mut base_ineq: Vec<Vector6<f64>> = Vec::new();
    for (i, l) in cs.iter().enumerate() {
        let row = normal_velocity_row(&env[i].grasp);
        match l {
            CsLabel::Maintain => base_eq.push(row),
            CsLabel::Separate => base_ineq.push(row),
        }
    }

    // per-hyperplane sign options in rank order: 0, +, -
    let per_plane: [SsSign; 3] = [0, 1, -1];
    let mut complete: Vec<Vec<Vec<SsSign>>> = Vec::new();
    let mut stack: Vec<Vec<SsSign>> = Vec::new();

    fn dfs(
        depth: usize,
        maintained: &[usize],
        env: &[EnvContact],
        basis: &TangentBasis,
        per_plane: &[SsSign; 3],
        n_t: usize,
        base_eq: &[Vector6<f64>],
        base_ineq: &[Vector6<f64>],
        stack: &mut Vec<Vec<SsSign>>,
        complete: &mut Vec<Vec<Vec<SsSign>>>,
    ) -> Result<()> {
        if depth == maintained.len() {
            complete.push(stack.clone());
            return Ok(());
        }
        // enumerate this contact's sign vectors in rank-lexicographic order
        let mut pattern = vec![0usize; n_t];
        loop {
            let signs: Vec<SsSign> = pattern.iter().map(|&p| per_plane[p]).collect();
            stack.push(signs);
            if prefix_feasible(maintained, env, basis, base_eq, base_ineq, stack)? {
                dfs(
                    depth + 1,
                    maintained,
                    env,
                    basis,
                    per_plane,
                    n_t,
                    base_eq,
                    base_ineq,
                    stack,
                    complete,
                )?;
            }
            stack.pop();
            // odometer over rank indices
            let mut k = n_t;
            loop {
                if k == 0 {
                    return Ok(());
                }
                k -= 1;
                pattern[k] += 1;
                if pattern[k] < 3 {
                    break;
                }
                pattern[k] = 0;
            }
        }
    }

    dfs(
        0,
        &maintained,
        env,
        basis,
        &per_plane,
        n_t,
        &base_eq,
        &base_ineq,
        &mut stack,
        &mut complete,
    )?;

    let mut modes: Vec<ContactMode> = complete
        .into_iter()
        .map(|ss| ContactMode { cs: cs.to_vec(), ss })
        .collect();

    if modes.len() > cap {
        // index 0 is all-sticking when feasible (it sorts first); keep it
        let sticking_first = modes.first().map_or(false, |m| m.is_all_sticking());
        let (head, pool_start) = if sticking_first { (1, 1) } else { (0, 0) };
        let take = cap.saturating_sub(head);
        let mut idx = sample(rng, modes.len() - pool_start, take)
            .into_iter()
            .map(|i| i + pool_start)
            .collect::<Vec<_>>();
        idx.sort_unstable();
        let mut kept = Vec::with_capacity(cap);
        if sticking_first {
            kept.push(modes[0].clone());
        }
        for i in idx {
            kept.push(modes[i].clone());
        }
        modes = kept;
    }
    Ok(modes)
}

fn prefix_feasible(
    maintained: &[usize],
    env: &[EnvContact],
    basis: &TangentBasis,
    base_eq: &[Vector6<f64>],
    base_ineq: &[Vector6<f64>],
    stack: &[Vec<SsSign>],
) -> Result<bool> {
    let mut eq = base_eq.to_vec();
    let mut ineq = base_ineq.to_vec();
    for (k, signs) in stack.iter().enumerate() {
        let grasp = &env[maintained[k]].grasp;
        for (j, &s) in signs.iter().enumerate() {
            let row = tangent_velocity_row(grasp, basis, j);
            match s {
                0 => eq.push(row),
                1 => ineq.push(row),
                _ => ineq.push(-row),
            }
        }
    }
    lp_rows_feasible(&eq, &ineq)
}

/// Extreme rays of the tangent-velocity cone selected by a nonzero sign
/// vector: intersection of the half-planes/lines `sign_j (C_T^j . v)`.
pub fn sliding_cone_edges(ss: &[SsSign], basis: &TangentBasis) -> Result<Vec<Vector2<f64>>> {
    assert!(ss.iter().any(|&s| s != 0), "sticking pattern has no cone");
    let tol = 1e-9;
    let satisfied = |v: &Vector2<f64>, strict: bool| -> bool {
        ss.iter().zip(&basis.directions).all(|(&s, c)| {
            let d = c.dot(v);
            match s {
                0 => d.abs() <= tol,
                1 => {
                    if strict {
                        d > tol
                    } else {
                        d >= -tol
                    }
                }
                _ => {
                    if strict {
                        d < -tol
                    } else {
                        d <= tol
                    }
                }
            }
        })
    };
    // candidate rays: both directions along each hyperplane
    let mut edges: Vec<Vector2<f64>> = Vec::new();
    for c in &basis.directions {
        for dir in [Vector2::new(-c.y, c.x), Vector2::new(c.y, -c.x)] {
            if satisfied(&dir, false) && !edges.iter().any(|e| (e - dir).norm() < 1e-9) {
                edges.push(dir);
            }
        }
    }
    // the cone must contain a ray strictly matching the sign pattern
    let has_equality = ss.iter().any(|&s| s == 0);
    let interior_ok = if has_equality {
        edges.iter().any(|e| satisfied(e, true))
    } else {
        let sum: Vector2<f64> = edges.iter().sum();
        satisfied(&sum.normalize(), true)
    };
    if edges.is_empty() || !interior_ok {
        return Err(Error::EmptySlidingCone(format!("{ss:?}")));
    }
    if has_equality {
        // 1D cone: a single edge, the strictly satisfying direction
        edges.retain(|e| satisfied(e, true));
    }
    edges.sort_by(|a, b| a.y.atan2(a.x).partial_cmp(&b.y.atan2(b.x)).unwrap());
    Ok(edges)
}

/// Per-mode velocity constraint rows over `x = [v (6), qdot, lambda]`:
/// normal rows per CS label, tangent rows per SS sign, and full sticking
/// equalities for every finger contact.
pub fn mode_velocity_constraints(
    mode: &ContactMode,
    set: &ContactSet,
    basis: &TangentBasis,
    sigma: f64,
    n_lambda: usize,
) -> Result<LinearSystem> {
    if mode.cs.len() != set.env.len() {
        return Err(Error::DimensionMismatch(format!(
            "mode has {} contacts, set has {}",
            mode.cs.len(),
            set.env.len()
        )));
    }
    let ncols = 6 + set.dof + n_lambda;
    let mut sys = LinearSystem::new(ncols);
    let embed = |v6: Vector6<f64>| -> DVector<f64> {
        let mut row = DVector::zeros(ncols);
        for c in 0..6 {
            row[c] = v6[c];
        }
        row
    };
    let mut k = 0;
    for (i, l) in mode.cs.iter().enumerate() {
        let grasp = &set.env[i].grasp;
        match l {
            CsLabel::Separate => sys.push_ineq(embed(normal_velocity_row(grasp)), sigma),
            CsLabel::Maintain => {
                sys.push_eq(embed(normal_velocity_row(grasp)), 0.0);
                for (j, &s) in mode.ss[k].iter().enumerate() {
                    let row = tangent_velocity_row(grasp, basis, j);
                    match s {
                        0 => sys.push_eq(embed(row), 0.0),
                        1 => sys.push_ineq(embed(row), sigma),
                        _ => sys.push_ineq(embed(-row), sigma),
                    }
                }
                k += 1;
            }
        }
    }
    // finger contacts stick: contact velocity G^T v - J qdot = 0
    for f in &set.fingers {
        for r in 0..3 {
            let mut row = DVector::zeros(ncols);
            for c in 0..6 {
                row[c] = f.grasp.matrix[(c, r)];
            }
            for c in 0..set.dof {
                row[6 + c] = -f.jacobian[(r, c)];
            }
            sys.push_eq(row, 0.0);
        }
    }
    Ok(sys)
}

/// Force rows over the lambda block plus the active wrench directions.
#[derive(Debug, Clone)]
pub struct ForceModel {
    /// Constraint rows over lambda only.
    pub rows: LinearSystem,
    /// 6 x n_lambda: column k is the body wrench per unit lambda_k.
    pub wrench_basis: DMatrix<f64>,
    /// (offset, count) into the lambda block, env contacts then fingers;
    /// separating contacts own an empty range.
    pub lambda_spans: Vec<(usize, usize)>,
}

/// Build the per-mode force constraints: separating contacts contribute no
/// force variables; sticking contacts a 3-vector inside the polyhedral
/// cone; sliding contacts nonnegative magnitudes along the reversed cone
/// edges tied to the normal force by the Coulomb equality.
pub fn mode_force_constraints(
    mode: &ContactMode,
    set: &ContactSet,
    basis: &TangentBasis,
) -> Result<ForceModel> {
    if mode.cs.len() != set.env.len() {
        return Err(Error::DimensionMismatch(format!(
            "mode has {} contacts, set has {}",
            mode.cs.len(),
            set.env.len()
        )));
    }
    let n_t = basis.n_t();
    struct Block {
        wrench_cols: Vec<Vector6<f64>>,
        // rows over this block's lambdas: (coeffs, rhs, is_eq)
        rows: Vec<(Vec<f64>, f64, bool)>,
    }
    let mut blocks = Vec::new();
    let mut spans = Vec::new();
    let mut offset = 0usize;
    let mut k = 0usize;

    let sticking_block = |grasp: &GraspMapEntry, mu: f64| -> Block {
        let mut rows = Vec::new();
        // lambda_n >= 0
        rows.push((vec![0.0, 0.0, 1.0], 0.0, false));
        // polyhedral cone: C_T . lambda_t +/- mu lambda_n >= 0
        for c in &basis.directions {
            rows.push((vec![c[0], c[1], mu], 0.0, false));
            rows.push((vec![-c[0], -c[1], mu], 0.0, false));
        }
        Block {
            wrench_cols: (0..3).map(|c| grasp.matrix.column(c).into_owned()).collect(),
            rows,
        }
    };

    for (i, l) in mode.cs.iter().enumerate() {
        let grasp = &set.env[i].grasp;
        match l {
            CsLabel::Separate => {
                spans.push((offset, 0));
            }
            CsLabel::Maintain => {
                let ss = &mode.ss[k];
                k += 1;
                if ss.iter().all(|&s| s == 0) {
                    let b = sticking_block(grasp, set.mu_env);
                    spans.push((offset, 3));
                    offset += 3;
                    blocks.push(b);
                } else {
                    let edges = sliding_cone_edges(ss, basis)?;
                    let ne = edges.len();
                    // variables: (lambda_t1..lambda_tK, lambda_n)
                    let mut wrench_cols = Vec::with_capacity(ne + 1);
                    for e in &edges {
                        // force opposes the sliding cone edge
                        let dir =
                            -(grasp.matrix.column(0) * e[0] + grasp.matrix.column(1) * e[1]);
                        wrench_cols.push(dir.into_owned());
                    }
                    wrench_cols.push(grasp.matrix.column(2).into_owned());
                    let mut rows = Vec::new();
                    for t in 0..=ne {
                        let mut coeff = vec![0.0; ne + 1];
                        coeff[t] = 1.0;
                        rows.push((coeff, 0.0, false)); // all magnitudes >= 0
                    }
                    // Coulomb equality: mu lambda_n - sum lambda_tj = 0
                    let mut coeff = vec![-1.0; ne + 1];
                    coeff[ne] = set.mu_env;
                    rows.push((coeff, 0.0, true));
                    spans.push((offset, ne + 1));
                    offset += ne + 1;
                    blocks.push(Block { wrench_cols, rows });
                }
            }
        }
    }
    let _ = n_t;
    for f in &set.fingers {
        let b = sticking_block(&f.grasp, set.mu_mnp);
        spans.push((offset, 3));
        offset += 3;
        blocks.push(b);
    }

    let n_lambda = offset;
    let mut wrench_basis = DMatrix::zeros(6, n_lambda);
    let mut rows = LinearSystem::new(n_lambda);
    let mut col = 0usize;
    for b in &blocks {
        for w in &b.wrench_cols {
            for r in 0..6 {
                wrench_basis[(r, col)] = w[r];
            }
            col += 1;
        }
    }
    let mut block_offset = 0usize;
    for b in &blocks {
        let width = b.wrench_cols.len();
        for (coeff, rhs, is_eq) in &b.rows {
            let mut row = DVector::zeros(n_lambda);
            for (c, &v) in coeff.iter().enumerate() {
                row[block_offset + c] = v;
            }
            if *is_eq {
                rows.push_eq(row, *rhs);
            } else {
                rows.push_ineq(row, *rhs);
            }
        }
        block_offset += width;
    }
    Ok(ForceModel {
        rows,
        wrench_basis,
        lambda_spans: spans,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::ContactPoint;
    use crate::geometry::Pose;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn contact(p: [f64; 3], n: [f64; 3]) -> ContactPoint {
        ContactPoint {
            position: Vector3::new(p[0], p[1], p[2]),
            normal: Vector3::new(n[0], n[1], n[2]),
            signed_distance: 0.0,
        }
    }

    fn floor_corners() -> Vec<ContactPoint> {
        // bottom corners of a unit cube resting on z = 0
        [
            [-0.5, -0.5, 0.0],
            [-0.5, 0.5, 0.0],
            [0.5, -0.5, 0.0],
            [0.5, 0.5, 0.0],
        ]
        .iter()
        .map(|p| contact(*p, [0.0, 0.0, 1.0]))
        .collect()
    }

    fn env_set(contacts: &[ContactPoint]) -> ContactSet {
        ContactSet::env_only(contacts, &Pose::identity(), 0.5)
    }

    #[test]
    fn grasp_map_identity_pose() {
        // upward normal at r = (1, 0, 0): t1 = (0,-1,0), t2 = (1,0,0)
        let c = contact([1.0, 0.0, 0.0], [0.0, 0.0, 1.0]);
        let g = build_grasp_map(&c, &Pose::identity());
        assert!((g.t1_world - Vector3::new(0.0, -1.0, 0.0)).norm() < 1e-12);
        assert!((g.t2_world - Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
        let expected = Matrix6x3::from_columns(&[
            Vector6::new(0.0, -1.0, 0.0, 0.0, 0.0, -1.0),
            Vector6::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0),
            Vector6::new(0.0, 0.0, 1.0, 0.0, -1.0, 0.0),
        ]);
        assert!((g.matrix - expected).norm() < 1e-12);
        // G' [v; w] is the contact velocity: spin about z moves the
        // contact along -t1
        let twist = Vector6::new(0.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        let cv = g.matrix.transpose() * twist;
        assert!((cv - Vector3::new(-1.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn grasp_map_rotated_body() {
        // the body-frame grasp map sees the world contact through the pose
        let rot = nalgebra::UnitQuaternion::from_euler_angles(0.3, -0.2, 0.5);
        let q = Pose {
            position: Vector3::new(0.2, -0.1, 0.3),
            orientation: rot,
        };
        let c = contact([0.4, 0.1, 0.0], [0.0, 0.0, 1.0]);
        let g = build_grasp_map(&c, &q);
        // a body twist of zero moves nothing; a unit body-frame normal
        // force maps to a world force along +z
        let f_world = q
            .orientation
            .transform_vector(&g.matrix.fixed_view::<3, 1>(0, 2).into_owned());
        assert!((f_world - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn cs_modes_no_contacts() {
        let set = env_set(&[]);
        let modes = enumerate_cs_modes(&set.env, N_MAX_DEFAULT).unwrap();
        assert_eq!(modes, vec![Vec::new()]);
    }

    #[test]
    fn cs_modes_single_contact() {
        let set = env_set(&[contact([0.0, 0.0, 0.0], [0.0, 0.0, 1.0])]);
        let modes = enumerate_cs_modes(&set.env, N_MAX_DEFAULT).unwrap();
        assert_eq!(
            modes,
            vec![vec![CsLabel::Maintain], vec![CsLabel::Separate]]
        );
    }

    #[test]
    fn cs_modes_cube_on_floor_census() {
        use CsLabel::{Maintain as M, Separate as S};
        let set = env_set(&floor_corners());
        let modes = enumerate_cs_modes(&set.env, N_MAX_DEFAULT).unwrap();
        // corners in ctor order: (-,-), (-,+), (+,-), (+,+); feasible sets
        // are all-M, all-S, each single corner, and each edge pair (pairs
        // sharing a cube edge differ in exactly one coordinate)
        let expected: Vec<Vec<CsLabel>> = vec![
            vec![M, M, M, M],
            vec![M, M, S, S],
            vec![M, S, M, S],
            vec![M, S, S, S],
            vec![S, M, S, M],
            vec![S, M, S, S],
            vec![S, S, M, M],
            vec![S, S, M, S],
            vec![S, S, S, M],
            vec![S, S, S, S],
        ];
        assert_eq!(modes.len(), 10);
        assert_eq!(modes, expected);
    }

    #[test]
    fn cs_modes_contact_cap() {
        let contacts: Vec<_> = (0..17)
            .map(|i| contact([i as f64 * 0.01, 0.0, 0.0], [0.0, 0.0, 1.0]))
            .collect();
        let set = env_set(&contacts);
        assert!(matches!(
            enumerate_cs_modes(&set.env, N_MAX_DEFAULT),
            Err(Error::TooManyContacts { n: 17, max: 16 })
        ));
    }

    #[test]
    fn ss_modes_all_separate() {
        let set = env_set(&[contact([0.0, 0.0, 0.0], [0.0, 0.0, 1.0])]);
        let basis = TangentBasis::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let modes =
            enumerate_ss_modes(&[CsLabel::Separate], &set.env, &basis, 1024, &mut rng).unwrap();
        assert_eq!(modes.len(), 1);
        assert_eq!(modes[0].encode(), "S");
    }

    #[test]
    fn ss_modes_single_maintained_contact() {
        let set = env_set(&[contact([0.0, 0.0, 0.0], [0.0, 0.0, 1.0])]);
        let basis = TangentBasis::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let modes =
            enumerate_ss_modes(&[CsLabel::Maintain], &set.env, &basis, 1024, &mut rng).unwrap();
        // a single contact on a free object admits every sign pattern
        assert_eq!(modes.len(), 9);
        assert_eq!(modes[0].encode(), "M00");
        let codes: Vec<_> = modes.iter().map(|m| m.encode()).collect();
        assert_eq!(
            codes,
            vec!["M00", "M0+", "M0-", "M+0", "M++", "M+-", "M-0", "M-+", "M--"]
        );
    }

    #[test]
    fn ss_modes_match_brute_force_on_cube() {
        // all-maintain over the four bottom corners: the pruned DFS must
        // agree with an exhaustive scan over all 9^4 sign assignments
        let set = env_set(&floor_corners());
        let basis = TangentBasis::default();
        let cs = vec![CsLabel::Maintain; 4];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let modes = enumerate_ss_modes(&cs, &set.env, &basis, usize::MAX, &mut rng).unwrap();

        let options: [SsSign; 3] = [0, 1, -1];
        let mut brute = Vec::new();
        for a in 0..81 {
            for b in 0..81 {
                let idx = [a / 27 % 3, a / 9 % 3, a / 3 % 3, a % 3];
                let _ = idx;
                let combined = a * 81 + b;
                let digits: Vec<usize> =
                    (0..8).rev().map(|k| combined / 3usize.pow(k) % 3).collect();
                let ss: Vec<Vec<SsSign>> = digits
                    .chunks(2)
                    .map(|c| vec![options[c[0]], options[c[1]]])
                    .collect();
                let mode = ContactMode { cs: cs.clone(), ss };
                let mut eq = Vec::new();
                let mut ineq = Vec::new();
                for (i, ec) in set.env.iter().enumerate() {
                    eq.push(normal_velocity_row(&ec.grasp));
                    for (j, &s) in mode.ss[i].iter().enumerate() {
                        let row = tangent_velocity_row(&ec.grasp, &basis, j);
                        match s {
                            0 => eq.push(row),
                            1 => ineq.push(row),
                            _ => ineq.push(-row),
                        }
                    }
                }
                if lp_rows_feasible(&eq, &ineq).unwrap() {
                    brute.push(mode);
                }
            }
        }
        assert_eq!(modes.len(), brute.len());
        assert_eq!(modes, brute);
        assert!(modes[0].is_all_sticking());
    }

    #[test]
    fn ss_cap_subsamples_and_keeps_sticking() {
        let set = env_set(&[contact([0.0, 0.0, 0.0], [0.0, 0.0, 1.0])]);
        let basis = TangentBasis::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let modes =
            enumerate_ss_modes(&[CsLabel::Maintain], &set.env, &basis, 4, &mut rng).unwrap();
        assert_eq!(modes.len(), 4);
        assert!(modes[0].is_all_sticking());
        // determinism under the same seed
        let mut rng2 = ChaCha8Rng::seed_from_u64(7);
        let again =
            enumerate_ss_modes(&[CsLabel::Maintain], &set.env, &basis, 4, &mut rng2).unwrap();
        assert_eq!(modes, again);
    }

    #[test]
    fn cone_edges_half_plane() {
        let basis = TangentBasis::default();
        let edges = sliding_cone_edges(&[1, 0], &basis).unwrap();
        assert_eq!(edges.len(), 1);
        assert!((edges[0] - Vector2::new(1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn cone_edges_quadrant() {
        let basis = TangentBasis::default();
        let edges = sliding_cone_edges(&[1, -1], &basis).unwrap();
        assert_eq!(edges.len(), 2);
        // sorted by angle: (0,-1) before (1,0)
        assert!((edges[0] - Vector2::new(0.0, -1.0)).norm() < 1e-9);
        assert!((edges[1] - Vector2::new(1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn cone_edges_empty_pattern_errors() {
        let basis = TangentBasis::new(3);
        assert!(matches!(
            sliding_cone_edges(&[1, 0, 1], &basis),
            Err(Error::EmptySlidingCone(_))
        ));
    }

    #[test]
    fn sticking_force_rows_enforce_friction_cone() {
        let set = env_set(&[contact([0.0, 0.0, 0.0], [0.0, 0.0, 1.0])]);
        let basis = TangentBasis::default();
        let mode = ContactMode::all_sticking(&[CsLabel::Maintain], 2);
        let fm = mode_force_constraints(&mode, &set, &basis).unwrap();
        assert_eq!(fm.wrench_basis.ncols(), 3);
        assert_eq!(fm.lambda_spans, vec![(0, 3)]);
        // mu = 0.5: lambda = (0.6, 0, 1) violates -t1 + mu n >= 0 by 0.1
        let lam = DVector::from_vec(vec![0.6, 0.0, 1.0]);
        assert!((fm.rows.violation(&lam) - 0.1).abs() < 1e-12);
        // inside the cone
        let lam = DVector::from_vec(vec![0.3, 0.2, 1.0]);
        assert!(fm.rows.violation(&lam) < 1e-12);
    }

    #[test]
    fn sliding_force_rows_oppose_motion() {
        // sliding along +t1 with mu = 0.3: the tangential force direction
        // is -t1 and the Coulomb row ties its magnitude to 0.3 lambda_n
        let mut set = env_set(&[contact([0.0, 0.0, 0.0], [0.0, 0.0, 1.0])]);
        set.mu_env = 0.3;
        let basis = TangentBasis::default();
        let mode = ContactMode {
            cs: vec![CsLabel::Maintain],
            ss: vec![vec![1, 0]],
        };
        let fm = mode_force_constraints(&mode, &set, &basis).unwrap();
        assert_eq!(fm.wrench_basis.ncols(), 2);
        let g = &set.env[0].grasp;
        let t_col = fm.wrench_basis.column(0);
        let expected = -g.matrix.column(0);
        assert!((t_col - expected).norm() < 1e-12);
        // Coulomb equality: 0.3 lambda_n - lambda_t = 0
        assert_eq!(fm.rows.a_eq.nrows(), 1);
        assert!((fm.rows.a_eq[(0, 0)] + 1.0).abs() < 1e-12);
        assert!((fm.rows.a_eq[(0, 1)] - 0.3).abs() < 1e-12);
        // unit normal force drags the object with force 0.3 along -t1
        let lam = DVector::from_vec(vec![0.3, 1.0]);
        assert!(fm.rows.violation(&lam) < 1e-12);
        let wrench = &fm.wrench_basis * &lam;
        let expected_w =
            g.matrix.column(2).into_owned() - 0.3 * g.matrix.column(0).into_owned();
        assert!((wrench - expected_w).norm() < 1e-12);
    }

    #[test]
    fn velocity_rows_separate_and_slide() {
        let set = env_set(&floor_corners());
        let basis = TangentBasis::default();
        // first corner slides along +t1, the rest separate
        let mode = ContactMode {
            cs: vec![
                CsLabel::Maintain,
                CsLabel::Separate,
                CsLabel::Separate,
                CsLabel::Separate,
            ],
            ss: vec![vec![1, 0]],
        };
        let sys = mode_velocity_constraints(&mode, &set, &basis, SIGMA, 0).unwrap();
        // maintained: 1 normal eq + 1 tangent eq (the 0 sign); ineqs: 1
        // tangent strict + 3 separations
        assert_eq!(sys.a_eq.nrows(), 2);
        assert_eq!(sys.a_ineq.nrows(), 4);
        // t1 at an upward normal is -y, so sliding along +t1 is v_y < 0
        let mut x = DVector::zeros(6);
        x[1] = -1.0; // v_y
        x[2] = 0.5; // v_z lifts the other corners? no: normal eq pins corner 0
        assert!(sys.violation(&x) > 0.0);
        // rotation about the in-plane diagonal through the maintained
        // corner lifts the other three while keeping its normal velocity
        // zero; added sliding along +t1 satisfies the strict tangent row
        let mut x = DVector::zeros(6);
        let r0 = Vector3::new(-0.5, -0.5, 0.0);
        let w = Vector3::new(1.0, -1.0, 0.0).normalize();
        let v = w.cross(&(-r0));
        for i in 0..3 {
            x[i] = v[i];
            x[3 + i] = w[i];
        }
        x[1] += -1.0; // world -y is +t1 at an upward normal
        assert!(sys.violation(&x) <= 1e-12);
    }

    #[test]
    fn encode_decode_round_trip() {
        let mode = ContactMode {
            cs: vec![CsLabel::Maintain, CsLabel::Separate, CsLabel::Maintain],
            ss: vec![vec![1, -1], vec![0, 0]],
        };
        let s = mode.encode();
        assert_eq!(s, "M+-SM00");
        assert_eq!(decode_mode(&s, 2).unwrap(), mode);
    }
}
