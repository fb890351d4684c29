//! Zero-level-set search: configurations that put the robot surface in
//! contact with a workspace point, found by independent L-BFGS runs on the
//! squared task-space distance, plus farthest-point downsampling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kinematics::{joint_positions, JointConfig, Point2, RobotModel};
use crate::lbfgs::{self, LbfgsParams, LineSearch};
use crate::robot_sdf::{closest_link, sdf_with_joints};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    /// Number of random initial configurations.
    pub seeds: usize,
    pub max_iters: usize,
    /// A configuration is kept when `|f_s| < epsilon`.
    pub epsilon: f64,
    pub lbfgs_memory: usize,
    pub line_search: LineSearch,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            seeds: 1024,
            max_iters: 50,
            epsilon: 1e-3,
            lbfgs_memory: 10,
            line_search: LineSearch::default(),
        }
    }
}

impl SolverParams {
    pub fn with_seeds(self, seeds: usize) -> Self {
        SolverParams { seeds, ..self }
    }

    /// Per-seed optimizer settings derived from these parameters.
    pub fn lbfgs(&self) -> LbfgsParams {
        LbfgsParams {
            memory: self.lbfgs_memory,
            max_iters: self.max_iters,
            line_search: self.line_search,
            // Converged seeds stop early; the margin keeps them well inside epsilon.
            cost_tolerance: (1e-2 * self.epsilon).powi(2),
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        if self.seeds == 0 || self.max_iters == 0 || !(self.epsilon > 0.0) || self.lbfgs_memory == 0 {
            return Err(crate::Error::Input(
                "solver needs seeds >= 1, max_iters >= 1, epsilon > 0 and lbfgs_memory >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroSetStatus {
    Converged,
    Unreachable,
    NotConverged,
}

/// Access to contact samples, shared by solver output and stored grid cells.
pub trait ContactSamples: Sync {
    fn configs(&self) -> &[JointConfig];
    /// 1-based contact link per config.
    fn contact_links(&self) -> &[usize];

    fn is_empty(&self) -> bool {
        self.configs().is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroSet {
    pub point: Point2,
    pub configs: Vec<JointConfig>,
    pub contact_links: Vec<usize>,
    /// `|f_s|` at each config.
    pub residuals: Vec<f64>,
    pub status: ZeroSetStatus,
}

impl ContactSamples for ZeroSet {
    fn configs(&self) -> &[JointConfig] {
        &self.configs
    }

    fn contact_links(&self) -> &[usize] {
        &self.contact_links
    }
}

impl ZeroSet {
    pub fn empty(point: Point2, status: ZeroSetStatus) -> Self {
        ZeroSet {
            point,
            configs: Vec::new(),
            contact_links: Vec::new(),
            residuals: Vec::new(),
            status,
        }
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }
}

/// Per-seed optimization result, exposed so callers can inspect the line
/// search history.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub config: JointConfig,
    pub residual: f64,
    pub cost_history: Vec<f64>,
}

/// Runs L-BFGS on `c(q) = f_s(p, q)^2` from `q0`, clamping to joint limits.
pub fn descend_to_contact(robot: &RobotModel, p: &Point2, q0: JointConfig, params: &LbfgsParams) -> SeedRun {
    let run = lbfgs::minimize(
        q0.0,
        |q, grad| {
            let res = sdf_with_joints(robot, &joint_positions(robot, q), p);
            for (g, dq) in grad.iter_mut().zip(res.grad_q.iter()) {
                *g = 2.0 * res.distance * dq;
            }
            res.distance * res.distance
        },
        |q| robot.clamp(q),
        params,
    );
    SeedRun {
        residual: run.cost.sqrt(),
        config: JointConfig(run.x),
        cost_history: run.history,
    }
}

/// Random initial configurations, drawn sequentially so the batch depends
/// only on `rng_seed`.
pub fn seed_configs(robot: &RobotModel, seeds: usize, rng_seed: u64) -> Vec<JointConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    (0..seeds).map(|_| robot.sample_config(&mut rng)).collect()
}

pub fn find_zero_configs(robot: &RobotModel, p: &Point2, params: &SolverParams, rng_seed: u64) -> ZeroSet {
    if p.norm() > robot.reach() {
        return ZeroSet::empty(*p, ZeroSetStatus::Unreachable);
    }
    let lbfgs = params.lbfgs();
    let runs: Vec<SeedRun> = seed_configs(robot, params.seeds, rng_seed)
        .into_par_iter()
        .map(|q0| descend_to_contact(robot, p, q0, &lbfgs))
        .collect();

    let mut kept: Vec<(JointConfig, usize, f64)> = runs
        .into_iter()
        .filter_map(|run| {
            let closest = closest_link(robot, &joint_positions(robot, &run.config), p);
            (closest.distance.abs() < params.epsilon && robot.within_limits(&run.config))
                .then(|| (run.config, closest.link, closest.distance.abs()))
        })
        .collect();
    kept.sort_by(|a, b| lex_cmp(&a.0, &b.0));

    if kept.is_empty() {
        return ZeroSet::empty(*p, ZeroSetStatus::NotConverged);
    }
    let mut zs = ZeroSet::empty(*p, ZeroSetStatus::Converged);
    for (q, link, residual) in kept {
        zs.configs.push(q);
        zs.contact_links.push(link);
        zs.residuals.push(residual);
    }
    zs
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

/// Farthest-point subsample of at most `k` configs. The first pick is the
/// config nearest the joint-space centroid; each following pick maximizes
/// its minimum distance to the picks so far.
pub fn fps_downsample(zs: &ZeroSet, k: usize) -> ZeroSet {
    if zs.len() <= k {
        return zs.clone();
    }
    let picks = fps_indices(&zs.configs, k);
    ZeroSet {
        point: zs.point,
        configs: picks.iter().map(|&i| zs.configs[i].clone()).collect(),
        contact_links: picks.iter().map(|&i| zs.contact_links[i]).collect(),
        residuals: picks.iter().map(|&i| zs.residuals[i]).collect(),
        status: zs.status,
    }
}

pub fn fps_indices(configs: &[JointConfig], k: usize) -> Vec<usize> {
    let n = configs.len();
    if n == 0 || k == 0 {
        return Vec::new();
    }
    let dim = configs[0].dim();
    let mut centroid = vec![0.0; dim];
    for q in configs {
        for (c, v) in centroid.iter_mut().zip(q.iter()) {
            *c += v / n as f64;
        }
    }
    let first = argmin(configs.iter().map(|q| q.distance(&centroid)));
    let mut picks = vec![first];
    let mut nearest: Vec<f64> = configs.iter().map(|q| q.distance(&configs[first])).collect();
    while picks.len() < k.min(n) {
        let next = argmax(nearest.iter().copied());
        picks.push(next);
        for (d, q) in nearest.iter_mut().zip(configs) {
            *d = d.min(q.distance(&configs[next]));
        }
    }
    picks
}

fn argmin(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, v) in values.enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best.0
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use rand::seq::index::sample;
    use rand::Rng;

    use super::*;
    use crate::robot_sdf::sdf;

    fn one_link() -> RobotModel {
        RobotModel::planar(&[2.0]).unwrap()
    }

    fn revalidate(robot: &RobotModel, zs: &ZeroSet, eps: f64) {
        for (q, link) in zs.configs.iter().zip(&zs.contact_links) {
            let res = sdf(robot, q, &zs.point);
            assert!(res.distance.abs() < eps);
            assert_eq!(res.contact_link, *link);
            assert!(robot.within_limits(q));
        }
    }

    #[test]
    fn one_link_unique_contact() {
        let robot = one_link();
        let p = Point2::new(0.0, 2.0);
        let params = SolverParams::default().with_seeds(256);
        let zs = find_zero_configs(&robot, &p, &params, 1);
        assert_eq!(zs.status, ZeroSetStatus::Converged);
        assert!(!zs.is_empty());
        for q in &zs.configs {
            assert!((q[0] - FRAC_PI_2).abs() < 1e-3, "{q:?}");
        }
        revalidate(&robot, &zs, params.epsilon);
    }

    #[test]
    fn full_extension_is_the_only_contact() {
        let robot = RobotModel::two_link();
        let zs = find_zero_configs(&robot, &Point2::new(4.0, 0.0), &SolverParams::default(), 2);
        assert!(!zs.is_empty());
        for q in &zs.configs {
            assert!(q[0].abs() < 1e-2 && q[1].abs() < 1e-2, "{q:?}");
        }
    }

    #[test]
    fn inner_point_gives_one_dimensional_family() {
        let robot = RobotModel::two_link();
        let params = SolverParams::default();
        let zs = find_zero_configs(&robot, &Point2::new(1.0, 0.0), &params, 3);
        assert!(zs.len() > 500, "only {} survivors", zs.len());
        revalidate(&robot, &zs, params.epsilon);
        // Link-1 contacts pin q1 = 0 with q2 free; the family spans q2.
        let spread = zs
            .configs
            .iter()
            .filter(|q| q[0].abs() < 1e-2)
            .map(|q| q[1])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        assert!(spread.1 - spread.0 > 4.0);
        assert!(zs.contact_links.contains(&1) && zs.contact_links.contains(&2));
    }

    #[test]
    fn unreachable_point_is_flagged() {
        let robot = RobotModel::two_link();
        let zs = find_zero_configs(&robot, &Point2::new(5.0, 0.0), &SolverParams::default(), 0);
        assert_eq!(zs.status, ZeroSetStatus::Unreachable);
        assert!(zs.is_empty());
    }

    #[test]
    fn search_is_deterministic_and_sorted() {
        let robot = RobotModel::two_link();
        let params = SolverParams::default().with_seeds(128);
        let p = Point2::new(-1.0, 2.5);
        let a = find_zero_configs(&robot, &p, &params, 77);
        let b = find_zero_configs(&robot, &p, &params, 77);
        assert_eq!(a, b);
        assert!(a.configs.windows(2).all(|w| lex_cmp(&w[0], &w[1]).is_le()));
    }

    #[test]
    fn accepted_costs_never_increase() {
        let robot = RobotModel::two_link();
        let p = Point2::new(1.5, -2.0);
        let params = SolverParams::default().lbfgs();
        for q0 in seed_configs(&robot, 64, 5) {
            let run = descend_to_contact(&robot, &p, q0, &params);
            assert!(run.cost_history.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn capsule_link_finds_both_contacts() {
        // A 0.5-radius capsule touches (1, 0) at q = +-asin(0.5).
        let robot = RobotModel::new(vec![2.0], vec![0.5], vec![(-PI, PI)]).unwrap();
        let zs = find_zero_configs(&robot, &Point2::new(1.0, 0.0), &SolverParams::default().with_seeds(256), 4);
        let target = 0.5f64.asin();
        assert!(zs.configs.iter().any(|q| (q[0] - target).abs() < 1e-2));
        assert!(zs.configs.iter().any(|q| (q[0] + target).abs() < 1e-2));
    }

    fn zs_from(values: &[f64]) -> ZeroSet {
        ZeroSet {
            point: Point2::zeros(),
            configs: values.iter().map(|v| JointConfig(vec![*v])).collect(),
            contact_links: vec![1; values.len()],
            residuals: values.iter().map(|v| v * 1e-6).collect(),
            status: ZeroSetStatus::Converged,
        }
    }

    #[test]
    fn fps_identity_and_three_point_case() {
        let zs = zs_from(&[0.0, 1.0, 10.0]);
        assert_eq!(fps_downsample(&zs, 3), zs);
        assert_eq!(fps_downsample(&zs, 7), zs);
        let out = fps_downsample(&zs, 2);
        let vals: Vec<f64> = out.configs.iter().map(|q| q[0]).collect();
        assert_eq!(vals, vec![1.0, 10.0]);
        assert_eq!(out.residuals, vec![1e-6, 10.0 * 1e-6]);
    }

    fn min_pairwise(configs: &[&JointConfig]) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..configs.len() {
            for j in i + 1..configs.len() {
                best = best.min(configs[i].distance(configs[j]));
            }
        }
        best
    }

    #[test]
    fn fps_beats_random_subsets() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let configs: Vec<JointConfig> = (0..200)
            .map(|_| JointConfig(vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]))
            .collect();
        let zs = ZeroSet {
            point: Point2::zeros(),
            contact_links: vec![2; 200],
            residuals: vec![0.0; 200],
            configs,
            status: ZeroSetStatus::Converged,
        };
        let out = fps_downsample(&zs, 20);
        let fps_min = min_pairwise(&out.configs.iter().collect::<Vec<_>>());
        for _ in 0..1000 {
            let subset: Vec<&JointConfig> = sample(&mut rng, 200, 20).iter().map(|i| &zs.configs[i]).collect();
            assert!(fps_min >= min_pairwise(&subset));
        }
    }
}
