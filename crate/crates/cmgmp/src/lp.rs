//! Dense phase-1 simplex for small feasibility problems over free
//! variables:
//!
//! ```text
//!     find x     s.t.  A_eq x  = b_eq,   A_ineq x >= b_ineq
//! ```
//!
//! Mode enumeration, force-balance checks, and the validator all reduce to
//! systems of this shape with a handful of variables and a few dozen rows.
//! The phase-1 objective doubles as the infeasibility certificate: a
//! minimum above tolerance proves the system empty.

use crate::{Error, Result};
use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus,
    SupportedConeT::{NonnegativeConeT, ZeroConeT},
};
use nalgebra::{DMatrix, DVector};

const PIVOT_TOL: f64 = 1e-7;
const RATIO_TIE: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Feasibility {
    pub feasible: bool,
    /// Minimum of the phase-1 artificial sum; > ~1e-9 certifies
    /// infeasibility for unit-scaled rows.
    pub phase1_objective: f64,
    /// A feasible point when one exists.
    pub point: Option<DVector<f64>>,
}

/// Decide feasibility of `A_eq x = b_eq`, `A_ineq x >= b_ineq` with x free.
pub fn solve_feasibility(
    a_eq: &DMatrix<f64>,
    b_eq: &DVector<f64>,
    a_ineq: &DMatrix<f64>,
    b_ineq: &DVector<f64>,
) -> Result<Feasibility> {
    let n = if a_eq.nrows() > 0 {
        a_eq.ncols()
    } else {
        a_ineq.ncols()
    };
    if a_eq.nrows() > 0 && a_ineq.nrows() > 0 && a_eq.ncols() != a_ineq.ncols() {
        return Err(Error::DimensionMismatch(
            "equality and inequality column counts differ".into(),
        ));
    }
    // rows with no coefficients are decided directly: amplifying their
    // right-hand side by the scaling floor would manufacture spurious
    // infeasibility out of numerical dust
    let mut eq_rows = Vec::new();
    for r in 0..a_eq.nrows() {
        if a_eq.row(r).norm() <= 1e-12 {
            if b_eq[r].abs() > COST_TOL {
                return Ok(Feasibility {
                    feasible: false,
                    phase1_objective: b_eq[r].abs(),
                    point: None,
                });
            }
        } else {
            eq_rows.push(r);
        }
    }
    let mut ineq_rows = Vec::new();
    for r in 0..a_ineq.nrows() {
        if a_ineq.row(r).norm() <= 1e-12 {
            if b_ineq[r] > COST_TOL {
                return Ok(Feasibility {
                    feasible: false,
                    phase1_objective: b_ineq[r],
                    point: None,
                });
            }
        } else {
            ineq_rows.push(r);
        }
    }
    let a_eq = a_eq.select_rows(eq_rows.iter());
    let b_eq = DVector::from_iterator(eq_rows.len(), eq_rows.iter().map(|&r| b_eq[r]));
    let a_ineq = a_ineq.select_rows(ineq_rows.iter());
    let b_ineq = DVector::from_iterator(ineq_rows.len(), ineq_rows.iter().map(|&r| b_ineq[r]));
    let (a_eq, b_eq, a_ineq, b_ineq) = (&a_eq, &b_eq, &a_ineq, &b_ineq);

    let me = a_eq.nrows();
    let mi = a_ineq.nrows();
    let m = me + mi;
    if m == 0 {
        return Ok(Feasibility {
            feasible: true,
            phase1_objective: 0.0,
            point: Some(DVector::zeros(n)),
        });
    }

    // columns: x+ (n) | x- (n) | slacks (mi) | artificials (m) | rhs
    let ncols = 2 * n + mi + m;
    let mut t = DMatrix::<f64>::zeros(m + 1, ncols + 1);

    for r in 0..m {
        let (row, rhs, slack) = if r < me {
            (a_eq.row(r).transpose(), b_eq[r], None)
        } else {
            (a_ineq.row(r - me).transpose(), b_ineq[r - me], Some(r - me))
        };
        // normalize row scale, then flip so the rhs is non-negative
        let scale = row.norm().max(rhs.abs()).max(1e-12);
        let sign = if rhs < 0.0 { -1.0 } else { 1.0 };
        for c in 0..n {
            let v = sign * row[c] / scale;
            t[(r, c)] = v;
            t[(r, n + c)] = -v;
        }
        if let Some(s) = slack {
            // surplus column: A x - s = b
            t[(r, 2 * n + s)] = -sign;
        }
        t[(r, 2 * n + mi + r)] = 1.0;
        t[(r, ncols)] = sign * rhs / scale;
    }

    // phase-1 objective row: minimize sum of artificials; express reduced
    // costs by subtracting each constraint row
    for c in 0..=ncols {
        let mut s = 0.0;
        for r in 0..m {
            s += t[(r, c)];
        }
        t[(m, c)] = -s;
    }
    for r in 0..m {
        t[(m, 2 * n + mi + r)] = 0.0;
    }

    let mut basis: Vec<usize> = (0..m).map(|r| 2 * n + mi + r).collect();
    let max_iters = 200 * (m + ncols);
    let bland_after = 20 * (m + ncols);
    let mut iters = 0;
    loop {
        // Entering: most-negative reduced cost while iterations are cheap,
        // strict Bland's rule (first negative) past the anti-cycling
        // threshold. Columns whose every entry is below the pivot floor are
        // numerical noise and get skipped: phase-1 is bounded below by 0,
        // so a genuinely improving column always admits a pivot.
        let bland = iters > bland_after;
        let mut pivot_pair: Option<(usize, usize, f64)> = None;
        for e in 0..ncols {
            let cost = t[(m, e)];
            if cost >= -COST_TOL {
                continue;
            }
            if let Some((_, _, best_cost)) = pivot_pair {
                if !bland && cost >= best_cost {
                    continue;
                }
            }
            // ratio test; among minimum-ratio rows take the largest pivot
            // element so tiny pivots never corrupt the tableau
            let mut best: Option<(usize, f64)> = None;
            for r in 0..m {
                let a = t[(r, e)];
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = t[(r, ncols)] / a;
                match best {
                    None => best = Some((r, ratio)),
                    Some((br, bratio)) => {
                        let tie = (ratio - bratio).abs() <= RATIO_TIE;
                        let better_tie = if bland {
                            basis[r] < basis[br]
                        } else {
                            a > t[(br, e)]
                        };
                        if ratio < bratio - RATIO_TIE || (tie && better_tie) {
                            best = Some((r, ratio));
                        }
                    }
                }
            }
            if let Some((l, _)) = best {
                pivot_pair = Some((l, e, cost));
                if bland {
                    break;
                }
            }
        }
        let Some((l, e, _)) = pivot_pair else { break };
        // pivot on (l, e)
        let piv = t[(l, e)];
        for c in 0..=ncols {
            t[(l, c)] /= piv;
        }
        for r in 0..=m {
            if r != l {
                let f = t[(r, e)];
                if f != 0.0 {
                    for c in 0..=ncols {
                        t[(r, c)] -= f * t[(l, c)];
                    }
                }
            }
        }
        basis[l] = e;
        iters += 1;
        if iters > max_iters {
            return Err(Error::SolverIterationLimit(format!(
                "phase-1 simplex exceeded {max_iters} pivots"
            )));
        }
    }

    let objective = -t[(m, ncols)];
    if objective > COST_TOL {
        return Ok(Feasibility {
            feasible: false,
            phase1_objective: objective,
            point: None,
        });
    }
    let mut x = DVector::zeros(n);
    for (r, &b) in basis.iter().enumerate() {
        let val = t[(r, ncols)];
        if b < n {
            x[b] += val;
        } else if b < 2 * n {
            x[b - n] -= val;
        }
    }
    // guard against a numerically corrupted tableau: the reconstructed
    // point must actually satisfy the (row-scaled) input system. If it
    // does not, fall back to an interior-point solve, which is slower but
    // does not suffer from pivot-selection breakdown.
    if point_violation(a_eq, b_eq, a_ineq, b_ineq, &x) > 1e-5 {
        return interior_point_feasibility(a_eq, b_eq, a_ineq, b_ineq);
    }
    Ok(Feasibility {
        feasible: true,
        phase1_objective: objective.max(0.0),
        point: Some(x),
    })
}

fn point_violation(
    a_eq: &DMatrix<f64>,
    b_eq: &DVector<f64>,
    a_ineq: &DMatrix<f64>,
    b_ineq: &DVector<f64>,
    x: &DVector<f64>,
) -> f64 {
    let mut worst = 0.0f64;
    for r in 0..a_eq.nrows() {
        let scale = a_eq.row(r).norm().max(b_eq[r].abs()).max(1e-12);
        worst = worst.max((a_eq.row(r).dot(&x.transpose()) - b_eq[r]).abs() / scale);
    }
    for r in 0..a_ineq.nrows() {
        let scale = a_ineq.row(r).norm().max(b_ineq[r].abs()).max(1e-12);
        worst = worst.max((b_ineq[r] - a_ineq.row(r).dot(&x.transpose())) / scale);
    }
    worst
}

/// Fallback feasibility decision via a regularized interior-point solve of
/// `min 1e-8 |x|^2` over the same constraints.
fn interior_point_feasibility(
    a_eq: &DMatrix<f64>,
    b_eq: &DVector<f64>,
    a_ineq: &DMatrix<f64>,
    b_ineq: &DVector<f64>,
) -> Result<Feasibility> {
    let n = if a_eq.nrows() > 0 {
        a_eq.ncols()
    } else {
        a_ineq.ncols()
    };
    let me = a_eq.nrows();
    let mi = a_ineq.nrows();
    let mut a_rows: Vec<Vec<f64>> = Vec::with_capacity(me + mi);
    let mut b = Vec::with_capacity(me + mi);
    for r in 0..me {
        let scale = a_eq.row(r).norm().max(b_eq[r].abs()).max(1e-12);
        a_rows.push(a_eq.row(r).iter().map(|v| v / scale).collect());
        b.push(b_eq[r] / scale);
    }
    for r in 0..mi {
        // clarabel form: A x + s = b with s >= 0, so flip the sense
        let scale = a_ineq.row(r).norm().max(b_ineq[r].abs()).max(1e-12);
        a_rows.push(a_ineq.row(r).iter().map(|v| -v / scale).collect());
        b.push(-b_ineq[r] / scale);
    }
    let a = CscMatrix::from(&a_rows);
    let p = CscMatrix::new(
        n,
        n,
        (0..=n).collect(),
        (0..n).collect(),
        vec![1e-8; n],
    );
    let settings = DefaultSettings {
        verbose: false,
        ..DefaultSettings::default()
    };
    let mut solver = DefaultSolver::new(
        &p,
        &vec![0.0; n],
        &a,
        &b,
        &[ZeroConeT(me), NonnegativeConeT(mi)],
        settings,
    )
    .map_err(|e| Error::DimensionMismatch(format!("feasibility fallback setup: {e:?}")))?;
    solver.solve();
    match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => {
            let x = DVector::from_vec(solver.solution.x.clone());
            let worst = point_violation(a_eq, b_eq, a_ineq, b_ineq, &x);
            if worst > 1e-5 {
                return Err(Error::SolverIterationLimit(format!(
                    "feasibility fallback returned an inconsistent point (violation {worst:.3e})"
                )));
            }
            Ok(Feasibility {
                feasible: true,
                phase1_objective: 0.0,
                point: Some(x),
            })
        }
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => Ok(Feasibility {
            feasible: false,
            phase1_objective: 1.0,
            point: None,
        }),
        s => Err(Error::SolverIterationLimit(format!(
            "feasibility fallback did not converge ({s:?})"
        ))),
    }
}
