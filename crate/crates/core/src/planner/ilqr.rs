use nalgebra::{DMatrix, DVector};

use super::{check_endpoints, DistanceBackend, PlannerParams, Trajectory};
use crate::error::Result;
use crate::kinematics::{JointConfig, RobotModel};

#[derive(Debug, Clone)]
pub struct IlqrReport {
    pub trajectory: Trajectory,
    /// Total cost after each accepted iteration, starting with the
    /// zero-control rollout.
    pub cost_history: Vec<f64>,
}

/// Trajectory optimization over `horizon` states:
/// `e_K' Q1 e_K + sum q2 h(q_k)^2 + u_k' R u_k` plus a soft joint-limit
/// penalty, with `h = min(f - gamma, 0)`. Starts from zero controls.
pub fn ilqr_plan(
    robot: &RobotModel,
    backend: &dyn DistanceBackend,
    params: &PlannerParams,
    start: &[f64],
    goal: &[f64],
) -> Result<Trajectory> {
    ilqr_optimize(robot, backend, params, start, goal).map(|r| r.trajectory)
}

pub fn ilqr_optimize(
    robot: &RobotModel,
    backend: &dyn DistanceBackend,
    params: &PlannerParams,
    start: &[f64],
    goal: &[f64],
) -> Result<IlqrReport> {
    check_endpoints(robot, params, start, goal)?;
    let problem = Problem {
        robot,
        backend,
        params,
        goal: DVector::from_column_slice(goal),
    };
    let steps = params.horizon - 1;
    let x0 = DVector::from_column_slice(start);
    let mut us = vec![DVector::zeros(params.controls()); steps];
    let mut xs = problem.rollout(&x0, &us);
    let mut cost = problem.cost(&xs, &us);
    let mut history = vec![cost];
    let mut mu = 1e-6;
    let mut converged = false;

    for _ in 0..params.max_ilqr_iters {
        let Some((ks, gains)) = problem.backward(&xs, &us, mu) else {
            mu *= 10.0;
            if mu > 1e10 {
                break;
            }
            continue;
        };
        let mut accepted = None;
        let mut alpha = 1.0;
        for _ in 0..12 {
            let (nx, nu) = problem.forward(&xs, &us, &ks, &gains, alpha);
            let c = problem.cost(&nx, &nu);
            if c < cost {
                accepted = Some((nx, nu, c));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((nx, nu, c)) => {
                let decrease = cost - c;
                xs = nx;
                us = nu;
                cost = c;
                history.push(c);
                mu = (mu * 0.1).max(1e-9);
                if decrease < 1e-8 {
                    converged = true;
                    break;
                }
            }
            None => {
                mu *= 10.0;
                if mu > 1e10 {
                    // No descent direction left: a local minimum.
                    converged = true;
                    break;
                }
            }
        }
    }

    let distances = xs.iter().map(|x| backend.eval(x.as_slice()).map(|s| s.value)).collect();
    Ok(IlqrReport {
        trajectory: Trajectory {
            states: xs.iter().map(|x| JointConfig(x.iter().copied().collect())).collect(),
            controls: us.iter().map(|u| u.iter().copied().collect()).collect(),
            distances,
            converged,
        },
        cost_history: history,
    })
}

struct Problem<'a> {
    robot: &'a RobotModel,
    backend: &'a dyn DistanceBackend,
    params: &'a PlannerParams,
    goal: DVector<f64>,
}

impl Problem<'_> {
    fn rollout(&self, x0: &DVector<f64>, us: &[DVector<f64>]) -> Vec<DVector<f64>> {
        let mut xs = Vec::with_capacity(us.len() + 1);
        xs.push(x0.clone());
        for u in us {
            let next = self.params.step(xs.last().unwrap(), u);
            xs.push(next);
        }
        xs
    }

    /// Collision and joint-limit cost of one state.
    fn state_cost(&self, x: &DVector<f64>) -> f64 {
        let mut c = 0.0;
        if self.params.q2 > 0.0 {
            if let Some(s) = self.backend.eval(x.as_slice()) {
                let h = (s.value - self.params.gamma).min(0.0);
                c += self.params.q2 * h * h;
            }
        }
        if self.params.joint_limit_weight > 0.0 {
            for (v, (lo, hi)) in x.iter().zip(self.robot.joint_limits()) {
                let excess = (v - hi).max(0.0) + (lo - v).max(0.0);
                c += self.params.joint_limit_weight * excess * excess;
            }
        }
        c
    }

    /// Gauss-Newton gradient and Hessian of `state_cost`.
    fn state_derivs(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let n = x.len();
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        if self.params.q2 > 0.0 {
            if let Some(s) = self.backend.eval(x.as_slice()) {
                let h = s.value - self.params.gamma;
                if h < 0.0 {
                    grad += 2.0 * self.params.q2 * h * &s.gradient;
                    hess += 2.0 * self.params.q2 * &s.gradient * s.gradient.transpose();
                }
            }
        }
        let w = self.params.joint_limit_weight;
        if w > 0.0 {
            for (j, (lo, hi)) in self.robot.joint_limits().iter().enumerate() {
                if x[j] > *hi {
                    grad[j] += 2.0 * w * (x[j] - hi);
                    hess[(j, j)] += 2.0 * w;
                } else if x[j] < *lo {
                    grad[j] += 2.0 * w * (x[j] - lo);
                    hess[(j, j)] += 2.0 * w;
                }
            }
        }
        (grad, hess)
    }

    fn cost(&self, xs: &[DVector<f64>], us: &[DVector<f64>]) -> f64 {
        let p = self.params;
        let e = xs.last().unwrap() - &self.goal;
        let mut c = e.dot(&(&p.q1 * &e));
        for u in us {
            c += u.dot(&(&p.r * u));
        }
        for x in xs {
            c += self.state_cost(x);
        }
        c
    }

    #[allow(clippy::type_complexity)]
    fn backward(&self, xs: &[DVector<f64>], us: &[DVector<f64>], mu: f64) -> Option<(Vec<DVector<f64>>, Vec<DMatrix<f64>>)> {
        let p = self.params;
        let (a, b) = (&p.a, &p.b);
        let m = p.controls();
        let last = xs.last().unwrap();
        let (lx, lxx) = self.state_derivs(last);
        let e = last - &self.goal;
        let mut vx = 2.0 * &p.q1 * e + lx;
        let mut vxx = 2.0 * &p.q1 + lxx;
        let mut ks = vec![DVector::zeros(m); us.len()];
        let mut gains = vec![DMatrix::zeros(m, xs[0].len()); us.len()];
        for k in (0..us.len()).rev() {
            let (lx, lxx) = self.state_derivs(&xs[k]);
            let qx = lx + a.transpose() * &vx;
            let qu = 2.0 * &p.r * &us[k] + b.transpose() * &vx;
            let qxx = lxx + a.transpose() * &vxx * a;
            let quu = 2.0 * &p.r + b.transpose() * &vxx * b + DMatrix::identity(m, m) * mu;
            let qux = b.transpose() * &vxx * a;
            let chol = quu.clone().cholesky()?;
            let kff = -chol.solve(&qu);
            let gain = -chol.solve(&qux);
            vx = &qx + gain.transpose() * &quu * &kff + gain.transpose() * &qu + qux.transpose() * &kff;
            vxx = &qxx + gain.transpose() * &quu * &gain + gain.transpose() * &qux + qux.transpose() * &gain;
            vxx = 0.5 * (&vxx + vxx.transpose());
            ks[k] = kff;
            gains[k] = gain;
        }
        Some((ks, gains))
    }

    fn forward(
        &self,
        xs: &[DVector<f64>],
        us: &[DVector<f64>],
        ks: &[DVector<f64>],
        gains: &[DMatrix<f64>],
        alpha: f64,
    ) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let mut nx = Vec::with_capacity(xs.len());
        let mut nu = Vec::with_capacity(us.len());
        nx.push(xs[0].clone());
        for k in 0..us.len() {
            let u = &us[k] + alpha * &ks[k] + &gains[k] * (&nx[k] - &xs[k]);
            nx.push(self.params.step(&nx[k], &u));
            nu.push(u);
        }
        (nx, nu)
    }
}
