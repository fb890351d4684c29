//! Trajectory optimization with a soft collision cost on the distance field.

use cdfkit::bench::sample_pairs;
use cdfkit::kinematics::RobotModel;
use cdfkit::planner::{ilqr_optimize, rollout_metrics, PlannerConfig, PointCloudCdf, Scene};
use cdfkit::zero_level_set::SolverParams;

fn main() -> cdfkit::Result<()> {
    let robot = RobotModel::two_link();
    let scene = Scene::planar_benchmark();
    let cdf = PointCloudCdf::build(&robot, &scene.points(), &SolverParams::default(), 16, 0);
    let params = PlannerConfig { horizon: 200, ..Default::default() }.params(robot.dof())?;
    let (start, goal) = sample_pairs(&robot, &scene, 11, 3).swap_remove(10);

    let report = ilqr_optimize(&robot, &cdf, &params, &start, &goal)?;
    let m = rollout_metrics(&robot, &scene, &report.trajectory, &goal, 0.05);
    println!(
        "{} iterations, cost {:.3} -> {:.3}",
        report.cost_history.len(),
        report.cost_history[0],
        report.cost_history.last().unwrap()
    );
    println!(
        "success {}, error {:.4} rad, min clearance {:.3}",
        m.success, m.tracking_error, m.min_clearance
    );
    Ok(())
}
