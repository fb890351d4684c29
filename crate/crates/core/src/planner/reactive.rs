use nalgebra::{DMatrix, DVector};

use super::{check_endpoints, DistanceBackend, PlannerParams, Trajectory};
use crate::error::{Error, Result};
use crate::kinematics::{JointConfig, RobotModel};

const SLACK_PENALTY: f64 = 1e6;

/// One control step. Minimizes `e(q_{k+1})' H e(q_{k+1}) + u' R u` over the
/// control box subject to `-dt grad_f . u <= ln(f + gamma)`.
///
/// When `B` is diagonal the box is also tightened so that the successor
/// state stays within joint limits. If no control satisfies the safety
/// constraint, the constraint is softened with a heavily penalized slack
/// and the result comes back as `Error::SafetyInfeasible` carrying that
/// control as the fallback.
pub fn reactive_step(
    robot: &RobotModel,
    backend: &dyn DistanceBackend,
    params: &PlannerParams,
    q: &[f64],
    goal: &[f64],
) -> Result<DVector<f64>> {
    check_endpoints(robot, params, q, goal)?;
    let qv = DVector::from_column_slice(q);
    let drift = &params.a * &qv - DVector::from_column_slice(goal);
    // Objective as 1/2 u'Pu + g'u.
    let bt_h = params.b.transpose() * &params.h;
    let p = 2.0 * (&bt_h * &params.b + &params.r);
    let g = 2.0 * &bt_h * &drift;
    let (lo, hi) = control_box(robot, params, &qv);

    let constraint = backend.eval(q).map(|s| {
        let a = -params.dt * s.gradient;
        let b = (s.value + params.gamma).ln();
        (a, b)
    });
    let Some((a, b)) = constraint else {
        return Ok(box_qp(&p, &g, &lo, &hi));
    };
    let feasible = |u: &DVector<f64>| a.dot(u) <= b;
    let in_box = |u: &DVector<f64>| u.iter().zip(lo.iter().zip(&hi)).all(|(v, (l, h))| l <= v && v <= h);

    let chol = p.clone().cholesky().expect("B'HB + R is positive definite");
    let free = -chol.solve(&g);
    if in_box(&free) && feasible(&free) {
        return Ok(free);
    }
    if !feasible(&free) {
        let pa = chol.solve(&a);
        let corrected = &free - &pa * ((a.dot(&free) - b) / a.dot(&pa));
        if in_box(&corrected) {
            return Ok(corrected);
        }
    }

    let boxed = box_qp(&p, &g, &lo, &hi);
    if feasible(&boxed) {
        return Ok(boxed);
    }
    let safest: f64 = a
        .iter()
        .zip(lo.iter().zip(&hi))
        .map(|(ai, (l, h))| if *ai > 0.0 { ai * l } else { ai * h })
        .sum();
    if safest > b {
        let p_soft = &p + 2.0 * SLACK_PENALTY * &a * a.transpose();
        let g_soft = &g - 2.0 * SLACK_PENALTY * b * &a;
        let fallback = box_qp(&p_soft, &g_soft, &lo, &hi);
        return Err(Error::SafetyInfeasible {
            violation: a.dot(&fallback) - b,
            fallback: fallback.iter().copied().collect(),
        });
    }
    Ok(dual_bisection(&p, &g, &a, b, &lo, &hi))
}

/// Per-joint control bounds: the user box, narrowed so the next state stays
/// within joint limits when each control drives a single joint.
fn control_box(robot: &RobotModel, params: &PlannerParams, q: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let mut lo = -params.u_max.clone();
    let mut hi = params.u_max.clone();
    let b = &params.b;
    let diagonal = b.is_square() && (0..b.nrows()).all(|i| (0..b.ncols()).all(|j| i == j || b[(i, j)] == 0.0));
    if diagonal {
        let next = &params.a * q;
        for (j, &(ql, qh)) in robot.joint_limits().iter().enumerate() {
            // A hair inside, so rounding in A q + B u never leaves the limits.
            let margin = 1e-12 * (qh - ql);
            let (ql, qh) = (ql + margin, qh - margin);
            let bj = b[(j, j)];
            if bj > 0.0 {
                lo[j] = lo[j].max((ql - next[j]) / bj);
                hi[j] = hi[j].min((qh - next[j]) / bj);
            } else if bj < 0.0 {
                lo[j] = lo[j].max((qh - next[j]) / bj);
                hi[j] = hi[j].min((ql - next[j]) / bj);
            }
            if lo[j] > hi[j] {
                // Already outside the reachable band; hold as close as possible.
                let mid = 0.5 * (lo[j] + hi[j]);
                lo[j] = mid;
                hi[j] = mid;
            }
        }
    }
    (lo, hi)
}

/// Finds the multiplier of the single inequality by bisection on the dual;
/// the box-constrained inner problem is solved by coordinate descent.
fn dual_bisection(p: &DMatrix<f64>, g: &DVector<f64>, a: &DVector<f64>, b: f64, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
    let solve = |lambda: f64| box_qp(p, &(g + lambda * a), lo, hi);
    let mut low = 0.0;
    let mut high = 1.0;
    let mut u_high = solve(high);
    while a.dot(&u_high) > b {
        low = high;
        high *= 2.0;
        u_high = solve(high);
        if high > 1e30 {
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (low + high);
        if mid <= low || mid >= high {
            break;
        }
        let u = solve(mid);
        if a.dot(&u) > b {
            low = mid;
        } else {
            high = mid;
            u_high = u;
        }
    }
    u_high
}

/// Minimizes `1/2 x'Px + g'x` over a box by cyclic coordinate descent.
pub(crate) fn box_qp(p: &DMatrix<f64>, g: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
    let n = g.len();
    let mut x = DVector::zeros(n);
    for i in 0..n {
        x[i] = 0.0f64.clamp(lo[i], hi[i]);
    }
    for _ in 0..20_000 {
        let mut change = 0.0f64;
        for i in 0..n {
            let mut s = g[i];
            for j in 0..n {
                if j != i {
                    s += p[(i, j)] * x[j];
                }
            }
            let xi = (-s / p[(i, i)]).clamp(lo[i], hi[i]);
            change = change.max((xi - x[i]).abs());
            x[i] = xi;
        }
        if change <= 1e-15 * (1.0 + x.amax()) {
            break;
        }
    }
    x
}

/// Runs the controller from `start` for at most `horizon` states. Steps where
/// the safety constraint is infeasible apply the slack fallback.
pub fn reactive_rollout(
    robot: &RobotModel,
    backend: &dyn DistanceBackend,
    params: &PlannerParams,
    start: &[f64],
    goal: &[f64],
) -> Result<Trajectory> {
    check_endpoints(robot, params, start, goal)?;
    let goal_v = DVector::from_column_slice(goal);
    let mut q = DVector::from_column_slice(start);
    let mut traj = Trajectory {
        states: vec![JointConfig(start.to_vec())],
        controls: Vec::new(),
        distances: vec![backend.eval(start).map(|s| s.value)],
        converged: false,
    };
    while traj.states.len() < params.horizon {
        if (&q - &goal_v).norm() < params.stop_tolerance {
            traj.converged = true;
            break;
        }
        let u = match reactive_step(robot, backend, params, q.as_slice(), goal) {
            Ok(u) => u,
            Err(Error::SafetyInfeasible { fallback, .. }) => DVector::from_vec(fallback),
            Err(e) => return Err(e),
        };
        q = params.step(&q, &u);
        traj.controls.push(u.iter().copied().collect());
        traj.states.push(JointConfig(q.iter().copied().collect()));
        traj.distances.push(backend.eval(q.as_slice()).map(|s| s.value));
    }
    traj.converged |= (&q - &goal_v).norm() < params.stop_tolerance;
    Ok(traj)
}
