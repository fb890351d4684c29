use nalgebra::DVector;

use crate::cdf::{query_from, FusedCdf};
use crate::kinematics::{JointConfig, Point2, RobotModel};
use crate::robot_sdf::sdf_min_over;
use crate::zero_level_set::{find_zero_configs, fps_downsample, SolverParams};

/// Obstacle distance and its configuration gradient at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceSample {
    pub value: f64,
    pub gradient: DVector<f64>,
}

/// Distance to a fixed obstacle point cloud as a function of the joint
/// configuration. `None` means there is nothing to avoid.
pub trait DistanceBackend: Sync {
    fn eval(&self, q: &[f64]) -> Option<DistanceSample>;

    fn name(&self) -> &'static str;
}

/// Task-space baseline: minimum over the cloud of the robot SDF.
pub struct SdfBackend<'a> {
    pub robot: &'a RobotModel,
    pub points: Vec<Point2>,
}

impl DistanceBackend for SdfBackend<'_> {
    fn eval(&self, q: &[f64]) -> Option<DistanceSample> {
        sdf_min_over(self.robot, q, &self.points).map(|r| DistanceSample {
            value: r.distance,
            gradient: r.grad_q,
        })
    }

    fn name(&self) -> &'static str {
        "sdf"
    }
}

/// Configuration-space field fused over per-point zero sets. Samples are
/// stored flat and grouped by contact link, so each group's inner loop has a
/// fixed length.
#[derive(Debug, Clone)]
pub struct PointCloudCdf {
    dof: usize,
    /// `(link, leading joints of every sample, full configs)`.
    groups: Vec<(usize, Vec<f64>, Vec<f64>)>,
    pub points: Vec<Point2>,
}

impl PointCloudCdf {
    /// Runs the zero-set search for every point and keeps at most `fps_k`
    /// samples per point. Points without contacts contribute nothing.
    pub fn build(robot: &RobotModel, points: &[Point2], solver: &SolverParams, fps_k: usize, rng_seed: u64) -> Self {
        let dof = robot.dof();
        let mut groups: Vec<(usize, Vec<f64>, Vec<f64>)> = (1..=dof).map(|k| (k, Vec::new(), Vec::new())).collect();
        for (i, p) in points.iter().enumerate() {
            let zs = fps_downsample(&find_zero_configs(robot, p, solver, rng_seed.wrapping_add(i as u64)), fps_k);
            for (q, &k) in zs.configs.iter().zip(&zs.contact_links) {
                groups[k - 1].1.extend_from_slice(&q[..k]);
                groups[k - 1].2.extend_from_slice(q);
            }
        }
        groups.retain(|g| !g.2.is_empty());
        PointCloudCdf {
            dof,
            groups,
            points: points.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.groups.iter().map(|g| g.2.len() / self.dof).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn value(&self, q: &[f64]) -> Option<f64> {
        self.nearest(q).map(|(d2, _, _)| d2.sqrt())
    }

    /// Squared distance, group and row of the nearest sample. Ties keep the
    /// lower link.
    fn nearest(&self, q: &[f64]) -> Option<(f64, usize, usize)> {
        let mut best = f64::INFINITY;
        let mut at = None;
        for (g, (k, lead, _)) in self.groups.iter().enumerate() {
            let head = &q[..*k];
            for (row, c) in lead.chunks_exact(*k).enumerate() {
                let d2: f64 = head.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
                if d2 < best {
                    best = d2;
                    at = Some((g, row));
                }
            }
        }
        at.map(|(g, row)| (best, g, row))
    }
}

impl DistanceBackend for PointCloudCdf {
    fn eval(&self, q: &[f64]) -> Option<DistanceSample> {
        let (d2, g, row) = self.nearest(q)?;
        let (k, _, full) = &self.groups[g];
        let nearest = JointConfig(full[row * self.dof..(row + 1) * self.dof].to_vec());
        let query = query_from(q, &nearest, *k, d2);
        Some(DistanceSample {
            value: query.value,
            gradient: query.gradient,
        })
    }

    fn name(&self) -> &'static str {
        "cdf"
    }
}

impl DistanceBackend for FusedCdf<'_> {
    fn eval(&self, q: &[f64]) -> Option<DistanceSample> {
        self.query_fast(q).map(|r| DistanceSample {
            value: r.value,
            gradient: r.gradient,
        })
    }

    fn name(&self) -> &'static str {
        "cdf"
    }
}
