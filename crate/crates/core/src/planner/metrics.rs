use serde::{Deserialize, Serialize};

use super::{Scene, Trajectory};
use crate::kinematics::RobotModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RolloutMetrics {
    pub success: bool,
    pub collision_free: bool,
    /// Joint-space distance from the final state to the goal, radians.
    pub tracking_error: f64,
    /// First step index with tracking error below the threshold, otherwise
    /// the number of states.
    pub time_steps: usize,
    /// Smallest task-space clearance to the scene over all states.
    pub min_clearance: f64,
}

/// Collision is judged on the exact obstacle geometry, independent of the
/// backend used for planning.
pub fn rollout_metrics(robot: &RobotModel, scene: &Scene, traj: &Trajectory, goal: &[f64], threshold: f64) -> RolloutMetrics {
    let min_clearance = traj
        .states
        .iter()
        .map(|q| scene.clearance(robot, q))
        .fold(f64::INFINITY, f64::min);
    let collision_free = min_clearance > 0.0;
    let tracking_error = traj.final_state().distance(goal);
    let time_steps = traj
        .states
        .iter()
        .position(|q| q.distance(goal) < threshold)
        .unwrap_or(traj.states.len());
    RolloutMetrics {
        success: collision_free && tracking_error < threshold,
        collision_free,
        tracking_error,
        time_steps,
        min_clearance,
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::kinematics::{JointConfig, Point2};
    use crate::planner::Obstacle;

    fn traj(states: Vec<Vec<f64>>) -> Trajectory {
        let n = states.len();
        Trajectory {
            states: states.into_iter().map(JointConfig).collect(),
            controls: vec![vec![0.0, 0.0]; n - 1],
            distances: vec![None; n],
            converged: true,
        }
    }

    #[test]
    fn ending_at_goal_is_success() {
        let robot = RobotModel::two_link();
        let m = rollout_metrics(&robot, &Scene::planar_benchmark(), &traj(vec![vec![0.0, 0.0], vec![0.1, 0.0]]), &[0.1, 0.0], 0.05);
        assert!(m.success);
        assert_eq!(m.tracking_error, 0.0);
        assert_eq!(m.time_steps, 1);
    }

    #[test]
    fn passing_through_obstacle_fails() {
        let robot = RobotModel::two_link();
        let scene = Scene::new(vec![Obstacle::circle(0.0, 3.0, 0.3)], 16);
        let t = traj(vec![vec![0.0, 0.0], vec![std::f64::consts::FRAC_PI_2, 0.0], vec![3.0, 0.0]]);
        let m = rollout_metrics(&robot, &scene, &t, &[3.0, 0.0], 0.05);
        assert!(!m.collision_free && !m.success);
        assert!(m.min_clearance < 0.0);
    }

    /// Independent re-computation: clearance from raw segment geometry.
    fn recompute(scene: &Scene, t: &Trajectory, goal: &[f64], threshold: f64) -> (bool, f64, usize) {
        let mut free = true;
        for q in &t.states {
            let (a1, a2) = (q[0], q[0] + q[1]);
            let j1 = Point2::new(2.0 * a1.cos(), 2.0 * a1.sin());
            let j2 = j1 + Point2::new(2.0 * a2.cos(), 2.0 * a2.sin());
            for o in &scene.obstacles {
                let Obstacle::Circle { center, radius } = o;
                let c = Point2::new(center[0], center[1]);
                for (s, e) in [(Point2::zeros(), j1), (j1, j2)] {
                    let d = e - s;
                    let t = ((c - s).dot(&d) / d.dot(&d)).clamp(0.0, 1.0);
                    if (s + d * t - c).norm() - radius <= 0.0 {
                        free = false;
                    }
                }
            }
        }
        let err = |q: &JointConfig| ((q[0] - goal[0]).powi(2) + (q[1] - goal[1]).powi(2)).sqrt();
        let last = err(t.states.last().unwrap());
        let steps = t.states.iter().position(|q| err(q) < threshold).unwrap_or(t.states.len());
        (free && last < threshold, last, steps)
    }

    #[test]
    fn metrics_match_independent_recompute() {
        let robot = RobotModel::two_link();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let obstacles = (0..rng.random_range(1..4))
                .map(|_| Obstacle::circle(rng.random_range(-3.5..3.5), rng.random_range(-3.5..3.5), rng.random_range(0.1..0.5)))
                .collect();
            let scene = Scene::new(obstacles, 16);
            let goal = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let mut q = vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let mut states = vec![q.clone()];
            for _ in 0..rng.random_range(1..50) {
                for j in 0..2 {
                    q[j] += 0.2 * (goal[j] - q[j]);
                }
                states.push(q.clone());
            }
            let t = traj(states);
            let m = rollout_metrics(&robot, &scene, &t, &goal, 0.05);
            let (success, err, steps) = recompute(&scene, &t, &goal, 0.05);
            assert_eq!(m.success, success);
            assert!((m.tracking_error - err).abs() < 1e-12);
            assert_eq!(m.time_steps, steps);
        }
    }
}
