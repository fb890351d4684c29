//! Task-space distance from a workspace point to the robot surface.
//!
//! This is the building block the configuration-space field is computed from
//! and also the baseline every comparison runs against.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::kinematics::{jacobian_at, joint_positions, Point2, RobotModel};

#[derive(Debug, Clone, PartialEq)]
pub struct SdfResult {
    /// Signed distance in workspace units. Non-negative for zero-radius links.
    pub distance: f64,
    /// 1-based index of the closest link; ties go to the lowest index.
    pub contact_link: usize,
    pub closest_fraction: f64,
    pub grad_p: Point2,
    pub grad_q: DVector<f64>,
}

/// Signed distance from `p` to the robot at `q`, with gradients in both
/// arguments. `q` must have the robot's dimension.
pub fn sdf(robot: &RobotModel, q: &[f64], p: &Point2) -> SdfResult {
    let joints = joint_positions(robot, q);
    sdf_with_joints(robot, &joints, p)
}

pub(crate) fn sdf_with_joints(robot: &RobotModel, joints: &[Point2], p: &Point2) -> SdfResult {
    let closest = closest_link(robot, joints, p);
    let x = joints[closest.link - 1] + (joints[closest.link] - joints[closest.link - 1]) * closest.fraction;
    let offset = p - x;
    let norm = offset.norm();
    let grad_p = if norm > 0.0 {
        offset / norm
    } else {
        // On the link axis; fall back to the segment's left normal.
        let dir = joints[closest.link] - joints[closest.link - 1];
        Point2::new(-dir.y, dir.x).normalize()
    };
    let jac = jacobian_at(joints, robot.dof(), closest.link, &x);
    let grad_q = -(jac.transpose() * grad_p);
    SdfResult {
        distance: closest.distance,
        contact_link: closest.link,
        closest_fraction: closest.fraction,
        grad_p,
        grad_q,
    }
}

pub(crate) struct Closest {
    pub distance: f64,
    pub link: usize,
    pub fraction: f64,
}

/// Distance-only scan over links, shared by the full query and the cheap
/// residual checks.
pub(crate) fn closest_link(robot: &RobotModel, joints: &[Point2], p: &Point2) -> Closest {
    let mut best = Closest {
        distance: f64::INFINITY,
        link: 1,
        fraction: 0.0,
    };
    for (i, w) in joints.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let ab = b - a;
        let s = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
        let d = (p - (a + ab * s)).norm() - robot.link_radii()[i];
        if d < best.distance {
            best = Closest {
                distance: d,
                link: i + 1,
                fraction: s,
            };
        }
    }
    best
}

/// Signed distance only, for residual checks in hot loops.
pub fn sdf_distance(robot: &RobotModel, q: &[f64], p: &Point2) -> f64 {
    closest_link(robot, &joint_positions(robot, q), p).distance
}

/// Closest point on the robot surface: `p - f_s * grad_p`.
pub fn sdf_project_point(robot: &RobotModel, q: &[f64], p: &Point2) -> Point2 {
    let res = sdf(robot, q, p);
    p - res.grad_p * res.distance
}

/// `result[i][j] = sdf(configs[i], points[j])`.
pub fn sdf_batch(robot: &RobotModel, configs: &[impl AsRef<[f64]> + Sync], points: &[Point2]) -> Vec<Vec<SdfResult>> {
    configs
        .par_iter()
        .map(|q| {
            let joints = joint_positions(robot, q.as_ref());
            points.iter().map(|p| sdf_with_joints(robot, &joints, p)).collect()
        })
        .collect()
}

/// Minimum over a point cloud, with the configuration gradient of the winner.
pub fn sdf_min_over(robot: &RobotModel, q: &[f64], points: &[Point2]) -> Option<SdfResult> {
    let joints = joint_positions(robot, q);
    let mut best: Option<(f64, usize)> = None;
    for (j, p) in points.iter().enumerate() {
        let d = closest_link(robot, &joints, p).distance;
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, j));
        }
    }
    best.map(|(_, j)| sdf_with_joints(robot, &joints, &points[j]))
}

impl AsRef<[f64]> for crate::kinematics::JointConfig {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}
