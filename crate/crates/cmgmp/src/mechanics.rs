//! Constraint assembly under a contact mode plus quasistatic or
//! quasidynamic dynamics, the per-step best-velocity QP, force-feasibility
//! LPs, and the drift-correction velocity.

use crate::collision::ObjectBody;
use crate::geometry::{skew, Pose, Twist};
use crate::lp;
use crate::modes::{mode_force_constraints, mode_velocity_constraints, ContactMode, ContactSet, TangentBasis};
use crate::{Error, Result};
use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, NonnegativeConeT, SolverStatus, SupportedConeT,
    ZeroConeT,
};
use nalgebra::{DMatrix, DVector, Matrix6, Vector3, Vector6};

/// Stacked linear equalities and inequalities over the step unknowns
/// `x = [v^o (6), qdot (dof), lambda]`, with the inequality convention
/// `A_ineq x >= b_ineq`.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub ncols: usize,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub a_ineq: DMatrix<f64>,
    pub b_ineq: DVector<f64>,
}

impl LinearSystem {
    pub fn new(ncols: usize) -> Self {
        LinearSystem {
            ncols,
            a_eq: DMatrix::zeros(0, ncols),
            b_eq: DVector::zeros(0),
            a_ineq: DMatrix::zeros(0, ncols),
            b_ineq: DVector::zeros(0),
        }
    }

    pub fn push_eq(&mut self, row: DVector<f64>, rhs: f64) {
        debug_assert_eq!(row.len(), self.ncols);
        self.a_eq = stack_row(&self.a_eq, &row);
        self.b_eq = self.b_eq.clone().push(rhs);
    }

    pub fn push_ineq(&mut self, row: DVector<f64>, rhs: f64) {
        debug_assert_eq!(row.len(), self.ncols);
        self.a_ineq = stack_row(&self.a_ineq, &row);
        self.b_ineq = self.b_ineq.clone().push(rhs);
    }

    /// Concatenate another system over the same column layout.
    pub fn extend(&mut self, other: &LinearSystem) {
        assert_eq!(self.ncols, other.ncols);
        for r in 0..other.a_eq.nrows() {
            self.push_eq(other.a_eq.row(r).transpose(), other.b_eq[r]);
        }
        for r in 0..other.a_ineq.nrows() {
            self.push_ineq(other.a_ineq.row(r).transpose(), other.b_ineq[r]);
        }
    }

    /// Normalize each row (and its rhs) to unit row norm; rows mix meters,
    /// radians and newtons otherwise and skew the solver tolerances.
    pub fn row_normalized(&self) -> LinearSystem {
        self.row_normalized_with_floor(1e-12)
    }

    /// Row normalization with a minimum scale: rows whose coefficients all
    /// vanish (e.g. dynamics rows with no force variables) keep their
    /// right-hand side relative to `floor` instead of being blown up.
    pub fn row_normalized_with_floor(&self, floor: f64) -> LinearSystem {
        let mut out = self.clone();
        for r in 0..out.a_eq.nrows() {
            let s = out.a_eq.row(r).norm().max(floor);
            let scaled = out.a_eq.row(r) / s;
            out.a_eq.row_mut(r).copy_from(&scaled);
            out.b_eq[r] /= s;
        }
        for r in 0..out.a_ineq.nrows() {
            let s = out.a_ineq.row(r).norm().max(floor);
            let scaled = out.a_ineq.row(r) / s;
            out.a_ineq.row_mut(r).copy_from(&scaled);
            out.b_ineq[r] /= s;
        }
        out
    }

    /// Worst constraint violation at x: max of |eq residual| and
    /// max(0, b - A x) over inequality rows.
    pub fn violation(&self, x: &DVector<f64>) -> f64 {
        let mut v: f64 = 0.0;
        let eq = &self.a_eq * x - &self.b_eq;
        for r in eq.iter() {
            v = v.max(r.abs());
        }
        let ineq = &self.a_ineq * x - &self.b_ineq;
        for r in ineq.iter() {
            v = v.max(-r);
        }
        v
    }
}

fn stack_row(m: &DMatrix<f64>, row: &DVector<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows() + 1, m.ncols());
    out.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
    out.row_mut(m.nrows()).copy_from(&row.transpose());
    out
}

/// Mechanics regime for the dynamics rows.
#[derive(Debug, Clone)]
pub enum DynamicsVariant {
    Quasistatic,
    Quasidynamic { m_o: Matrix6<f64>, h: f64 },
}

#[derive(Debug, Clone)]
pub struct DynamicsSpec {
    pub variant: DynamicsVariant,
    /// Body-frame external wrench (gravity mapped through the pose).
    pub f_external: Vector6<f64>,
}

impl DynamicsSpec {
    pub fn quasistatic(body: &ObjectBody, q: &Pose, gravity: f64) -> Self {
        DynamicsSpec {
            variant: DynamicsVariant::Quasistatic,
            f_external: gravity_wrench(body, q, gravity),
        }
    }

    pub fn quasidynamic(body: &ObjectBody, q: &Pose, gravity: f64, h: f64) -> Self {
        DynamicsSpec {
            variant: DynamicsVariant::Quasidynamic {
                m_o: body.spatial_inertia(),
                h,
            },
            f_external: gravity_wrench(body, q, gravity),
        }
    }
}

/// Gravity as a body-frame wrench about the body origin: the world-frame
/// force (0, 0, -m g) rotated into the body frame, applied at the com.
pub fn gravity_wrench(body: &ObjectBody, q: &Pose, gravity: f64) -> Vector6<f64> {
    let f_world = Vector3::new(0.0, 0.0, -body.mass * gravity);
    let f_body = q.inverse_transform_vector(&f_world);
    let tau = skew(&body.com) * f_body;
    let mut w = Vector6::zeros();
    w.fixed_rows_mut::<3>(0).copy_from(&f_body);
    w.fixed_rows_mut::<3>(3).copy_from(&tau);
    w
}

/// Solution of the per-step QP.
#[derive(Debug, Clone)]
pub struct StepSolution {
    pub v_o: Twist,
    pub q_dot: DVector<f64>,
    pub lambdas: DVector<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub enum SolveOutcome {
    Solved(StepSolution),
    /// No point satisfies the constraints; carries the phase-1 certificate
    /// objective.
    Infeasible(f64),
}

/// Concatenate the mode's velocity and force rows with the dynamics
/// equalities over `x = [v (6), qdot (dof), lambda]`.
///
/// `sigma` is the strictness margin for the mode's strict inequalities:
/// positive during enumeration, zero inside the motion QP.
pub fn assemble(
    mode: &ContactMode,
    set: &ContactSet,
    dynamics: &DynamicsSpec,
    basis: &TangentBasis,
    sigma: f64,
) -> Result<LinearSystem> {
    let force = mode_force_constraints(mode, set, basis)?;
    let dof = set.dof;
    let n_lambda = force.wrench_basis.ncols();
    let ncols = 6 + dof + n_lambda;

    let mut sys = mode_velocity_constraints(mode, set, basis, sigma, n_lambda)?;
    debug_assert_eq!(sys.ncols, ncols);

    // force rows, embedded after (v, qdot)
    for r in 0..force.rows.a_eq.nrows() {
        let mut row = DVector::zeros(ncols);
        row.rows_mut(6 + dof, n_lambda)
            .copy_from(&force.rows.a_eq.row(r).transpose());
        sys.push_eq(row, force.rows.b_eq[r]);
    }
    for r in 0..force.rows.a_ineq.nrows() {
        let mut row = DVector::zeros(ncols);
        row.rows_mut(6 + dof, n_lambda)
            .copy_from(&force.rows.a_ineq.row(r).transpose());
        sys.push_ineq(row, force.rows.b_ineq[r]);
    }

    // dynamics equalities
    match &dynamics.variant {
        DynamicsVariant::Quasistatic => {
            // W lambda + F_ext = 0
            for r in 0..6 {
                let mut row = DVector::zeros(ncols);
                for c in 0..n_lambda {
                    row[6 + dof + c] = force.wrench_basis[(r, c)];
                }
                sys.push_eq(row, -dynamics.f_external[r]);
            }
        }
        DynamicsVariant::Quasidynamic { m_o, h } => {
            // M v / h - W lambda = F_ext
            for r in 0..6 {
                let mut row = DVector::zeros(ncols);
                for c in 0..6 {
                    row[c] = m_o[(r, c)] / h;
                }
                for c in 0..n_lambda {
                    row[6 + dof + c] = -force.wrench_basis[(r, c)];
                }
                sys.push_eq(row, dynamics.f_external[r]);
            }
        }
    }
    Ok(sys)
}

/// Feasibility margin used when accepting QP/LP solutions.
pub const FEAS_TOL: f64 = 1e-7;

/// A QP optimum with the duals needed for an independent KKT check.
#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub y_eq: DVector<f64>,
    pub z_ineq: DVector<f64>,
}

/// Minimize `1/2 x' diag(p_diag) x + q_lin' x` over the system's
/// constraints. `Ok(None)` means the solver certified infeasibility.
pub fn solve_qp(
    p_diag: &[f64],
    q_lin: &[f64],
    sys: &LinearSystem,
) -> Result<Option<QpSolution>> {
    let n = sys.ncols;
    let me = sys.a_eq.nrows();
    let mi = sys.a_ineq.nrows();
    // clarabel form: A x + s = b with s in Zero x Nonnegative, so the
    // inequality block is -A_ineq x + s = -b_ineq
    let mut a_rows: Vec<Vec<f64>> = Vec::with_capacity(me + mi);
    let mut b = Vec::with_capacity(me + mi);
    for r in 0..me {
        a_rows.push(sys.a_eq.row(r).iter().cloned().collect());
        b.push(sys.b_eq[r]);
    }
    for r in 0..mi {
        a_rows.push(sys.a_ineq.row(r).iter().map(|v| -v).collect());
        b.push(-sys.b_ineq[r]);
    }
    let a = if me + mi > 0 {
        CscMatrix::from(&a_rows)
    } else {
        CscMatrix::zeros((0, n))
    };
    let p = CscMatrix::new(n, n, (0..=n).collect(), (0..n).collect(), p_diag.to_vec());
    let cones: Vec<SupportedConeT<f64>> = vec![ZeroConeT(me), NonnegativeConeT(mi)];
    let settings = DefaultSettings {
        verbose: false,
        tol_gap_abs: 1e-10,
        tol_gap_rel: 1e-10,
        tol_feas: 1e-10,
        ..DefaultSettings::default()
    };
    let mut solver = DefaultSolver::new(&p, q_lin, &a, &b, &cones, settings)
        .map_err(|e| Error::DimensionMismatch(format!("qp setup: {e:?}")))?;
    solver.solve();
    match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => {}
        SolverStatus::PrimalInfeasible
        | SolverStatus::AlmostPrimalInfeasible
        | SolverStatus::DualInfeasible
        | SolverStatus::AlmostDualInfeasible => return Ok(None),
        s => return Err(Error::SolverIterationLimit(format!("{s:?}"))),
    }
    let x = DVector::from_vec(solver.solution.x.clone());
    // clarabel stationarity is P x + q + A' z = 0 over stacked rows
    // [A_eq; -A_ineq]; map back to our sign convention
    let z = &solver.solution.z;
    let y_eq = DVector::from_iterator(me, z[..me].iter().map(|v| -v));
    let z_ineq = DVector::from_iterator(mi, z[me..].iter().cloned());
    Ok(Some(QpSolution { x, y_eq, z_ineq }))
}

/// Minimize `|v_des(v) - v|^2 + w_a |v_des(w) - w|^2 + eps lambda' lambda`
/// subject to the assembled system. Infeasibility is certified by a
/// phase-1 LP before the QP runs.
pub fn solve_best_velocity(
    v_des: &Twist,
    system: &LinearSystem,
    dof: usize,
    w_a: f64,
    eps: f64,
) -> Result<SolveOutcome> {
    assert!(eps > 0.0 && w_a >= 0.0);
    let sys = system.row_normalized();
    let n = sys.ncols;
    let n_lambda = n - 6 - dof;

    let phase1 = lp::solve_feasibility(&sys.a_eq, &sys.b_eq, &sys.a_ineq, &sys.b_ineq)?;
    if !phase1.feasible {
        return Ok(SolveOutcome::Infeasible(phase1.phase1_objective));
    }

    // P diagonal: 2 on v, 2*w_a on omega, 0 on qdot, 2*eps on lambda
    let mut p_diag = vec![0.0; n];
    let mut q_lin = vec![0.0; n];
    for i in 0..3 {
        p_diag[i] = 2.0;
        q_lin[i] = -2.0 * v_des.linear[i];
        p_diag[3 + i] = 2.0 * w_a;
        q_lin[3 + i] = -2.0 * w_a * v_des.angular[i];
    }
    for i in 0..n_lambda {
        p_diag[6 + dof + i] = 2.0 * eps;
    }

    let Some(sol) = solve_qp(&p_diag, &q_lin, &sys)? else {
        // phase-1 said feasible; the QP disagreed at tolerance, so report
        // infeasible without a certificate value
        return Ok(SolveOutcome::Infeasible(f64::NAN));
    };
    let x = sol.x;
    let v_o = Twist::new(
        Vector3::new(x[0], x[1], x[2]),
        Vector3::new(x[3], x[4], x[5]),
    );
    let q_dot = DVector::from(x.rows(6, dof).into_owned());
    let lambdas = DVector::from(x.rows(6 + dof, n_lambda).into_owned());
    let objective = (v_des.linear - v_o.linear).norm_squared()
        + w_a * (v_des.angular - v_o.angular).norm_squared()
        + eps * lambdas.norm_squared();
    Ok(SolveOutcome::Solved(StepSolution {
        v_o,
        q_dot,
        lambdas,
        objective,
    }))
}

/// LP feasibility of the force and dynamics rows for a mode: balance at
/// rest when `v_fixed` is None, otherwise with the object velocity pinned.
pub fn check_force_feasibility(
    mode: &ContactMode,
    set: &ContactSet,
    dynamics: &DynamicsSpec,
    basis: &TangentBasis,
    v_fixed: Option<&Twist>,
) -> Result<bool> {
    // only the force rows and the dynamics equalities constrain lambda;
    // velocity rows are the motion QP's concern
    let force = mode_force_constraints(mode, set, basis)?;
    let n_lambda = force.wrench_basis.ncols();
    let v: Vector6<f64> = match v_fixed {
        Some(t) => {
            let mut v6 = Vector6::zeros();
            v6.fixed_rows_mut::<3>(0).copy_from(&t.linear);
            v6.fixed_rows_mut::<3>(3).copy_from(&t.angular);
            v6
        }
        None => Vector6::zeros(),
    };
    let mut reduced = force.rows.clone();
    for r in 0..6 {
        let row = DVector::from_iterator(
            n_lambda,
            (0..n_lambda).map(|c| force.wrench_basis[(r, c)]),
        );
        let rhs = match &dynamics.variant {
            // W lambda = -F_ext
            DynamicsVariant::Quasistatic => -dynamics.f_external[r],
            // W lambda = M v / h - F_ext
            DynamicsVariant::Quasidynamic { m_o, h } => {
                let mv: f64 = (0..6).map(|c| m_o[(r, c)] * v[c]).sum::<f64>() / h;
                mv - dynamics.f_external[r]
            }
        };
        reduced.push_eq(row, rhs);
    }
    // normalize against the physical force scale so that dynamics rows
    // with no force columns (contact-free motion) keep their tiny
    // integration residuals below tolerance instead of amplifying them
    let force_scale = dynamics.f_external.amax().max(1.0);
    let reduced = reduced.row_normalized_with_floor(force_scale);
    let f = lp::solve_feasibility(&reduced.a_eq, &reduced.b_eq, &reduced.a_ineq, &reduced.b_ineq)?;
    Ok(f.feasible)
}

/// Ridge-regularized least-squares twist matching the contact normal
/// velocities to the contact distances:
/// `v_cor = (G_N' G_N + eps I)^-1 G_N' d^c`.
pub fn correction_velocity(set: &ContactSet, eps_cor: f64) -> Twist {
    let n = set.env.len();
    assert!(n >= 1, "correction velocity needs at least one contact");
    let mut g_n = DMatrix::zeros(n, 6);
    let mut d = DVector::zeros(n);
    for (i, ec) in set.env.iter().enumerate() {
        let col = ec.grasp.matrix.column(2);
        for c in 0..6 {
            g_n[(i, c)] = col[c];
        }
        d[i] = ec.point.signed_distance;
    }
    let gtg = g_n.transpose() * &g_n + DMatrix::identity(6, 6) * eps_cor;
    let rhs = g_n.transpose() * d;
    let sol = gtg
        .lu()
        .solve(&rhs)
        .expect("ridge system is positive definite");
    Twist::new(
        Vector3::new(sol[0], sol[1], sol[2]),
        Vector3::new(sol[3], sol[4], sol[5]),
    )
}

/// Stationarity, feasibility, and complementary-slackness residuals of a
/// candidate QP solution. Independent of the solver: plain dense algebra
/// on the assembled matrices.
pub fn kkt_residuals(
    p_diag: &DVector<f64>,
    q_lin: &DVector<f64>,
    sys: &LinearSystem,
    x: &DVector<f64>,
    y_eq: &DVector<f64>,
    z_ineq: &DVector<f64>,
) -> f64 {
    // stationarity: P x + q - A_eq' y - A_ineq' z = 0, z >= 0
    let mut grad = DVector::zeros(sys.ncols);
    for i in 0..sys.ncols {
        grad[i] = p_diag[i] * x[i] + q_lin[i];
    }
    let stat = &grad - sys.a_eq.transpose() * y_eq - sys.a_ineq.transpose() * z_ineq;
    let mut res = stat.norm();
    let eq = &sys.a_eq * x - &sys.b_eq;
    for r in eq.iter() {
        res = res.max(r.abs());
    }
    let slack = &sys.a_ineq * x - &sys.b_ineq;
    for i in 0..slack.len() {
        res = res.max(-slack[i]); // primal feasibility
        res = res.max(-z_ineq[i]); // dual feasibility
        res = res.max((slack[i] * z_ineq[i]).abs()); // complementarity
    }
    res
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::ContactPoint;
    use crate::modes::{CsLabel, SIGMA};
    use approx::assert_relative_eq;
    use nalgebra::Matrix3;

    const G: f64 = 9.81;

    fn unit_cube(mass: f64, mu: f64) -> ObjectBody {
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
            mass,
            inertia: Matrix3::identity() * (mass / 6.0),
            com: Vector3::new(0.0, 0.0, 0.5),
            mu_env: mu,
            mu_mnp: mu,
        }
    }

    fn floor_corner_contacts() -> Vec<ContactPoint> {
        [
            [-0.5, -0.5, 0.0],
            [-0.5, 0.5, 0.0],
            [0.5, -0.5, 0.0],
            [0.5, 0.5, 0.0],
        ]
        .iter()
        .map(|p| ContactPoint {
            position: Vector3::new(p[0], p[1], p[2]),
            normal: Vector3::new(0.0, 0.0, 1.0),
            signed_distance: 0.0,
        })
        .collect()
    }

    fn resting_cube_setup() -> (ObjectBody, Pose, ContactSet) {
        let body = unit_cube(2.0, 0.5);
        let q = Pose::identity();
        let set = ContactSet::env_only(&floor_corner_contacts(), &q, body.mu_env);
        (body, q, set)
    }

    #[test]
    fn gravity_wrench_identity_and_rotated() {
        let body = unit_cube(2.0, 0.5);
        let w = gravity_wrench(&body, &Pose::identity(), G);
        // force straight down, torque = com x f = (0,0,0.5) x (0,0,-mg) = 0
        assert_relative_eq!(w[2], -2.0 * G, epsilon = 1e-12);
        assert!(w.fixed_rows::<3>(3).norm() < 1e-12);
        // lie the cube on its side: gravity acquires a body-frame torque
        let rot = nalgebra::UnitQuaternion::from_euler_angles(
            std::f64::consts::FRAC_PI_2,
            0.0,
            0.0,
        );
        let q = Pose {
            position: Vector3::zeros(),
            orientation: rot,
        };
        let w = gravity_wrench(&body, &q, G);
        let f_body = q.inverse_transform_vector(&Vector3::new(0.0, 0.0, -2.0 * G));
        assert_relative_eq!((w.fixed_rows::<3>(0) - f_body).norm(), 0.0, epsilon = 1e-12);
        let tau = crate::geometry::skew(&body.com) * f_body;
        assert_relative_eq!((w.fixed_rows::<3>(3) - tau).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn quasistatic_free_object_infeasible_under_gravity() {
        let body = unit_cube(1.0, 0.5);
        let q = Pose::identity();
        let set = ContactSet::env_only(&[], &q, 0.5);
        let mode = ContactMode::all_sticking(&[], 2);
        let dyn_ = DynamicsSpec::quasistatic(&body, &q, G);
        let sys = assemble(&mode, &set, &dyn_, &TangentBasis::default(), 0.0).unwrap();
        match solve_best_velocity(&Twist::zero(), &sys, 0, 1.0, 1e-4).unwrap() {
            SolveOutcome::Infeasible(cert) => assert!(cert > 1e-6),
            SolveOutcome::Solved(_) => panic!("gravity cannot balance on nothing"),
        }
    }

    #[test]
    fn quasidynamic_free_fall_velocity() {
        let body = unit_cube(2.0, 0.5);
        // com at the body origin so the spatial inertia is block diagonal
        let mut body = body;
        body.com = Vector3::zeros();
        let q = Pose::identity();
        let set = ContactSet::env_only(&[], &q, 0.5);
        let mode = ContactMode::all_sticking(&[], 2);
        let h = 0.02;
        let dyn_ = DynamicsSpec::quasidynamic(&body, &q, G, h);
        let sys = assemble(&mode, &set, &dyn_, &TangentBasis::default(), 0.0).unwrap();
        let out = solve_best_velocity(&Twist::zero(), &sys, 0, 1.0, 1e-4).unwrap();
        let SolveOutcome::Solved(sol) = out else {
            panic!("free fall must be feasible")
        };
        // M v / h = F_ext  =>  v = (0, 0, -g h)
        assert_relative_eq!(sol.v_o.linear[2], -G * h, epsilon = 1e-9);
        assert!(sol.v_o.linear.fixed_rows::<2>(0).norm() < 1e-9);
        assert!(sol.v_o.angular.norm() < 1e-9);
    }

    #[test]
    fn resting_cube_supports_gravity_with_normal_forces() {
        let (body, q, set) = resting_cube_setup();
        let mode = ContactMode::all_sticking(&[CsLabel::Maintain; 4], 2);
        let dyn_ = DynamicsSpec::quasistatic(&body, &q, G);
        let sys = assemble(&mode, &set, &dyn_, &TangentBasis::default(), 0.0).unwrap();
        let out = solve_best_velocity(&Twist::zero(), &sys, 0, 1.0, 1e-4).unwrap();
        let SolveOutcome::Solved(sol) = out else {
            panic!("resting cube must balance")
        };
        assert!(sol.v_o.linear.norm() < 1e-7 && sol.v_o.angular.norm() < 1e-7);
        // lambda blocks of 3 per sticking contact; normals sum to m g
        let total_normal: f64 = (0..4).map(|i| sol.lambdas[3 * i + 2]).sum();
        assert_relative_eq!(total_normal, body.mass * G, epsilon = 1e-6);
        for i in 0..4 {
            assert!(sol.lambdas[3 * i + 2] >= -1e-9);
        }
    }

    #[test]
    fn sticking_mode_rejects_lateral_desired_velocity() {
        // all-sticking pins the object, so the best velocity is zero and
        // the objective equals |v_des|^2
        let (body, q, set) = resting_cube_setup();
        let mode = ContactMode::all_sticking(&[CsLabel::Maintain; 4], 2);
        let dyn_ = DynamicsSpec::quasistatic(&body, &q, G);
        let sys = assemble(&mode, &set, &dyn_, &TangentBasis::default(), 0.0).unwrap();
        let v_des = Twist::new(Vector3::new(0.3, 0.0, 0.0), Vector3::zeros());
        let out = solve_best_velocity(&v_des, &sys, 0, 1.0, 1e-4).unwrap();
        let SolveOutcome::Solved(sol) = out else {
            panic!("sticking mode stays feasible")
        };
        assert!(sol.v_o.linear.norm() < 1e-6);
        let velocity_cost = sol.objective - 1e-4 * sol.lambdas.norm_squared();
        assert_relative_eq!(velocity_cost, 0.09, epsilon = 1e-6);
    }

    #[test]
    fn sliding_without_a_pusher_is_infeasible() {
        // sliding along +x needs friction work that gravity cannot supply:
        // the Coulomb equality forces lambda_t = mu lambda_n while the
        // lateral balance needs lambda_t = 0, so lambda_n = 0 and the
        // weight is unsupported
        let (body, q, set) = resting_cube_setup();
        let mode = ContactMode {
            cs: vec![CsLabel::Maintain; 4],
            ss: vec![vec![0, 1]; 4],
        };
        let dyn_ = DynamicsSpec::quasistatic(&body, &q, G);
        let sys = assemble(&mode, &set, &dyn_, &TangentBasis::default(), 0.0).unwrap();
        let v_des = Twist::new(Vector3::new(0.3, 0.0, 0.0), Vector3::zeros());
        match solve_best_velocity(&v_des, &sys, 0, 1.0, 1e-4).unwrap() {
            SolveOutcome::Infeasible(cert) => assert!(cert > 1e-8),
            SolveOutcome::Solved(_) => panic!("no actuator can drive this slide"),
        }
    }

    #[test]
    fn finger_push_drives_the_slide() {
        // a sticking ball finger on the -x face pushes the cube into the
        // +x slide the bare mode could not afford
        let (body, q, mut set) = resting_cube_setup();
        let fc = ContactPoint {
            position: Vector3::new(-0.5, 0.0, 0.3),
            normal: Vector3::new(1.0, 0.0, 0.0),
            signed_distance: 0.0,
        };
        let grasp = crate::modes::build_grasp_map(&fc, &q);
        // free ball finger: joint velocity is the world tip velocity, so
        // the contact-frame jacobian rows are the frame axes
        let mut jac = DMatrix::zeros(3, 3);
        for (r, axis) in [grasp.t1_world, grasp.t2_world, grasp.n_world]
            .iter()
            .enumerate()
        {
            for c in 0..3 {
                jac[(r, c)] = axis[c];
            }
        }
        set.fingers.push(crate::modes::FingerContact {
            point: fc,
            grasp,
            jacobian: jac,
        });
        set.dof = 3;
        let mode = ContactMode {
            cs: vec![CsLabel::Maintain; 4],
            ss: vec![vec![0, 1]; 4],
        };
        let dyn_ = DynamicsSpec::quasistatic(&body, &q, G);
        let sys = assemble(&mode, &set, &dyn_, &TangentBasis::default(), 0.0).unwrap();
        let v_des = Twist::new(Vector3::new(0.3, 0.0, 0.0), Vector3::zeros());
        let out = solve_best_velocity(&v_des, &sys, 3, 1.0, 1e-4).unwrap();
        let SolveOutcome::Solved(sol) = out else {
            panic!("pushed slide must be feasible")
        };
        assert_relative_eq!(sol.v_o.linear[0], 0.3, epsilon = 1e-5);
        assert!(sol.v_o.linear.fixed_rows::<2>(1).norm() < 1e-6);
        // finger normal force (lambda block: 4 env x 2 vars, then the
        // finger's 3) carries roughly half the weight through mu = 0.5
        let f_n = sol.lambdas[10];
        assert!(f_n > 0.3 * body.mass * G, "finger push {f_n}");
        // the finger joints co-move with the object
        let tip = &set.fingers[0].jacobian * &sol.q_dot;
        let expected = set.fingers[0].grasp.matrix.transpose()
            * Vector6::new(0.3, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert!((tip - expected).norm() < 1e-6);
    }

    #[test]
    fn force_feasibility_matches_physics() {
        let (body, q, set) = resting_cube_setup();
        let basis = TangentBasis::default();
        let qs = DynamicsSpec::quasistatic(&body, &q, G);
        let sticking = ContactMode::all_sticking(&[CsLabel::Maintain; 4], 2);
        assert!(check_force_feasibility(&sticking, &set, &qs, &basis, None).unwrap());
        // all-separate cannot balance gravity quasistatically
        let separate = ContactMode {
            cs: vec![CsLabel::Separate; 4],
            ss: vec![],
        };
        assert!(!check_force_feasibility(&separate, &set, &qs, &basis, None).unwrap());
        // quasidynamically, separating with the free-fall velocity is fine
        let h = 0.02;
        let mut falling = body.clone();
        falling.com = Vector3::zeros();
        let qd = DynamicsSpec::quasidynamic(&falling, &q, G, h);
        let v = Twist::new(Vector3::new(0.0, 0.0, -G * h), Vector3::zeros());
        assert!(check_force_feasibility(&separate, &set, &qd, &basis, Some(&v)).unwrap());
        // but not with an upward velocity and no one pushing
        let v_up = Twist::new(Vector3::new(0.0, 0.0, 0.3), Vector3::zeros());
        assert!(!check_force_feasibility(&separate, &set, &qd, &basis, Some(&v_up)).unwrap());
    }

    #[test]
    fn correction_velocity_single_contact_closed_form() {
        // one contact, normal +z at the origin: G_N = e_z row, so
        // v = d / (1 + eps) along z
        let q = Pose::identity();
        let c = ContactPoint {
            position: Vector3::zeros(),
            normal: Vector3::new(0.0, 0.0, 1.0),
            signed_distance: 4e-4,
        };
        let set = ContactSet::env_only(&[c], &q, 0.5);
        let eps = 1e-3;
        let v = correction_velocity(&set, eps);
        assert_relative_eq!(v.linear[2], 4e-4 / (1.0 + eps), epsilon = 1e-12);
        assert!(v.linear.fixed_rows::<2>(0).norm() < 1e-15);
        assert!(v.angular.norm() < 1e-15);
    }

    #[test]
    fn correction_velocity_four_contacts() {
        // four coplanar contacts at equal distance d: by symmetry the
        // minimizer is a pure +z translation with G'G = diag(4,...) on z
        let q = Pose::identity();
        let d = 2e-4;
        let contacts: Vec<ContactPoint> = floor_corner_contacts()
            .into_iter()
            .map(|mut c| {
                c.signed_distance = d;
                c
            })
            .collect();
        let set = ContactSet::env_only(&contacts, &q, 0.5);
        let eps = 1e-3;
        let v = correction_velocity(&set, eps);
        // normal equations: (4 + eps) v_z = 4 d
        assert_relative_eq!(v.linear[2], 4.0 * d / (4.0 + eps), epsilon = 1e-12);
        assert!(v.angular.norm() < 1e-12);
    }

    #[test]
    fn qp_duals_certify_optimum() {
        // minimize (x0 - 1)^2 + (x1 - 1)^2 s.t. x0 + x1 = 1, x0 >= 0.8:
        // optimum x = (0.8, 0.2)
        let mut sys = LinearSystem::new(2);
        sys.push_eq(DVector::from_vec(vec![1.0, 1.0]), 1.0);
        sys.push_ineq(DVector::from_vec(vec![1.0, 0.0]), 0.8);
        let p_diag = vec![2.0, 2.0];
        let q_lin = vec![-2.0, -2.0];
        let sol = solve_qp(&p_diag, &q_lin, &sys).unwrap().unwrap();
        assert_relative_eq!(sol.x[0], 0.8, epsilon = 1e-7);
        assert_relative_eq!(sol.x[1], 0.2, epsilon = 1e-7);
        let res = kkt_residuals(
            &DVector::from_vec(p_diag),
            &DVector::from_vec(q_lin),
            &sys,
            &sol.x,
            &sol.y_eq,
            &sol.z_ineq,
        );
        assert!(res < 1e-6, "kkt residual {res}");
    }

    #[test]
    fn assemble_strictness_margin_is_respected() {
        // a separating contact's row carries the sigma right-hand side
        let (_, q, set) = resting_cube_setup();
        let _ = q;
        let mode = ContactMode {
            cs: vec![CsLabel::Separate; 4],
            ss: vec![],
        };
        let body = unit_cube(2.0, 0.5);
        let dyn_ = DynamicsSpec::quasistatic(&body, &Pose::identity(), G);
        let sys = assemble(&mode, &set, &dyn_, &TangentBasis::default(), SIGMA).unwrap();
        assert_eq!(sys.a_ineq.nrows(), 4);
        for r in 0..4 {
            assert_relative_eq!(sys.b_ineq[r], SIGMA, epsilon = 1e-15);
        }
    }
}
