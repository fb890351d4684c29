//! One QP per step with a barrier on the distance field, on the two-circle
//! scene, with both distance backends.

use cdfkit::bench::sample_pairs;
use cdfkit::kinematics::RobotModel;
use cdfkit::planner::{reactive_rollout, rollout_metrics, DistanceBackend, PlannerConfig, PointCloudCdf, Scene, SdfBackend};
use cdfkit::zero_level_set::SolverParams;

fn main() -> cdfkit::Result<()> {
    let robot = RobotModel::two_link();
    let scene = Scene::planar_benchmark();
    let points = scene.points();
    let cdf = PointCloudCdf::build(&robot, &points, &SolverParams::default(), 32, 0);
    let sdf = SdfBackend { robot: &robot, points };
    // A seeded pair whose straight line runs through the upper obstacle.
    let (start, goal) = sample_pairs(&robot, &scene, 3, 3).swap_remove(2);

    for gamma in [0.3, 0.7] {
        let params = PlannerConfig {
            gamma,
            horizon: 200,
            ..Default::default()
        }.params(robot.dof())?;
        for backend in [&cdf as &dyn DistanceBackend, &sdf] {
            let traj = reactive_rollout(&robot, backend, &params, &start, &goal)?;
            let m = rollout_metrics(&robot, &scene, &traj, &goal, 0.05);
            println!(
                "gamma {gamma} {}: success {}, error {:.3} rad, {} steps, min clearance {:.3}",
                backend.name(),
                m.success,
                m.tracking_error,
                m.time_steps,
                m.min_clearance
            );
        }
    }
    Ok(())
}
