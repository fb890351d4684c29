//! Motion generation with a distance backend: a reactive controller that
//! solves one small QP per step, and an iLQR trajectory optimizer.
//!
//! Dynamics are linear, `q_{k+1} = A q_k + B u_k`; the defaults are the
//! single integrator `A = I`, `B = dt I`.

mod backend;
mod ilqr;
mod metrics;
mod reactive;
mod scene;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use backend::{DistanceBackend, DistanceSample, PointCloudCdf, SdfBackend};
pub use ilqr::{ilqr_optimize, ilqr_plan, IlqrReport};
pub use metrics::{rollout_metrics, RolloutMetrics};
pub use reactive::{reactive_rollout, reactive_step};
pub use scene::{Obstacle, Scene, SCENE_FORMAT_VERSION};

use crate::error::{Error, Result};
use crate::kinematics::{JointConfig, RobotModel};

/// Scalar weights, each applied as a multiple of the identity. This is the
/// form read from config files and flags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// Tracking weight on the successor state (reactive).
    pub h: f64,
    /// Control effort weight.
    pub r: f64,
    /// Terminal tracking weight (iLQR).
    pub q1: f64,
    /// Collision weight (iLQR).
    pub q2: f64,
    pub gamma: f64,
    pub dt: f64,
    pub horizon: usize,
    /// Per-joint bound on `|u|`, rad/s.
    pub u_max: f64,
    /// Soft joint-limit penalty (iLQR).
    pub joint_limit_weight: f64,
    /// Reactive rollouts stop once the tracking error falls below this.
    pub stop_tolerance: f64,
    pub max_ilqr_iters: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            h: 1.0,
            r: 1e-4,
            q1: 1e4,
            q2: 100.0,
            gamma: 0.3,
            dt: 0.02,
            horizon: 500,
            u_max: 1.0,
            joint_limit_weight: 1e4,
            stop_tolerance: 1e-3,
            max_ilqr_iters: 100,
        }
    }
}

impl PlannerConfig {
    pub fn params(&self, dof: usize) -> Result<PlannerParams> {
        let eye = DMatrix::<f64>::identity(dof, dof);
        PlannerParams {
            h: &eye * self.h,
            r: &eye * self.r,
            q1: &eye * self.q1,
            q2: self.q2,
            gamma: self.gamma,
            dt: self.dt,
            horizon: self.horizon,
            u_max: DVector::from_element(dof, self.u_max),
            a: eye.clone(),
            b: &eye * self.dt,
            joint_limit_weight: self.joint_limit_weight,
            stop_tolerance: self.stop_tolerance,
            max_ilqr_iters: self.max_ilqr_iters,
        }
        .validated()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerParams {
    pub h: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub q1: DMatrix<f64>,
    /// The collision residual is scalar, so its weight is too.
    pub q2: f64,
    pub gamma: f64,
    pub dt: f64,
    pub horizon: usize,
    pub u_max: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub joint_limit_weight: f64,
    pub stop_tolerance: f64,
    pub max_ilqr_iters: usize,
}

impl PlannerParams {
    pub fn dof(&self) -> usize {
        self.a.nrows()
    }

    pub fn controls(&self) -> usize {
        self.b.ncols()
    }

    pub fn validated(self) -> Result<Self> {
        let n = self.a.nrows();
        let m = self.b.ncols();
        let square = |mat: &DMatrix<f64>, size: usize| mat.nrows() == size && mat.ncols() == size;
        if !square(&self.a, n) || self.b.nrows() != n || !square(&self.h, n) || !square(&self.q1, n) {
            return Err(Error::Input("A, H and Q1 must be n x n and B must be n x m".into()));
        }
        if !square(&self.r, m) || self.u_max.len() != m {
            return Err(Error::Input("R must be m x m and u_max must have m entries".into()));
        }
        for (name, mat) in [("H", &self.h), ("Q1", &self.q1)] {
            if !is_psd(mat) {
                return Err(Error::Input(format!("{name} must be symmetric positive semidefinite")));
            }
        }
        if !is_psd(&self.r) || self.r.clone().cholesky().is_none() {
            return Err(Error::Input("R must be symmetric positive definite".into()));
        }
        if !(self.dt > 0.0) || !(self.gamma > 0.0) || self.horizon < 2 {
            return Err(Error::Input("planner needs dt > 0, gamma > 0 and horizon >= 2".into()));
        }
        if !(self.q2 >= 0.0) || !(self.joint_limit_weight >= 0.0) || self.u_max.iter().any(|u| !(*u > 0.0)) {
            return Err(Error::Input("weights must be non-negative and u_max positive".into()));
        }
        Ok(self)
    }

    pub(crate) fn step(&self, q: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * q + &self.b * u
    }
}

fn is_psd(m: &DMatrix<f64>) -> bool {
    let sym = (m - m.transpose()).amax() <= 1e-12 * m.amax().max(1.0);
    sym && m.clone().symmetric_eigenvalues().iter().all(|e| *e >= -1e-12)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<JointConfig>,
    pub controls: Vec<Vec<f64>>,
    /// Backend distance at each state; `None` where the backend had nothing
    /// to report.
    pub distances: Vec<Option<f64>>,
    pub converged: bool,
}

impl Trajectory {
    pub fn final_state(&self) -> &JointConfig {
        self.states.last().expect("trajectory has at least one state")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trajectory serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse(text, e))
    }
}

pub(crate) fn check_endpoints(robot: &RobotModel, params: &PlannerParams, start: &[f64], goal: &[f64]) -> Result<()> {
    robot.check_dim(start)?;
    robot.check_dim(goal)?;
    if params.dof() != robot.dof() {
        return Err(Error::Dimension {
            expected: robot.dof(),
            found: params.dof(),
        });
    }
    if !robot.within_limits(start) || !robot.within_limits(goal) {
        return Err(Error::Input("start and goal must lie within joint limits".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let p = PlannerConfig::default().params(2).unwrap();
        assert_eq!(p.b[(0, 0)], 0.02);
        assert_eq!(p.controls(), 2);
    }

    #[test]
    fn rejects_bad_params() {
        let cfg = PlannerConfig {
            dt: 0.0,
            ..Default::default()
        };
        assert!(cfg.params(2).is_err());
        let mut p = PlannerConfig::default().params(2).unwrap();
        p.h[(0, 1)] = 0.5;
        assert!(p.validated().is_err());
        let cfg = PlannerConfig { r: 0.0, ..Default::default() };
        assert!(cfg.params(2).is_err());
    }

    #[test]
    fn config_reads_partial_json() {
        let cfg: PlannerConfig = serde_json::from_str(r#"{"gamma":0.7}"#).unwrap();
        assert_eq!(cfg.gamma, 0.7);
        assert_eq!(cfg.dt, 0.02);
        assert!(serde_json::from_str::<PlannerConfig>(r#"{"gama":0.7}"#).is_err());
    }
}
