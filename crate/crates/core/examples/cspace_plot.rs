//! Level sets of the obstacle field over both joints, with a planned path,
//! written as SVG and CSV.

use cdfkit::bench::sample_pairs;
use cdfkit::kinematics::RobotModel;
use cdfkit::planner::{reactive_rollout, PlannerConfig, PointCloudCdf, Scene};
use cdfkit::plot::{render_svg, sample_field};
use cdfkit::zero_level_set::SolverParams;

fn main() -> cdfkit::Result<()> {
    let robot = RobotModel::two_link();
    let scene = Scene::planar_benchmark();
    let cdf = PointCloudCdf::build(&robot, &scene.points(), &SolverParams::default(), 32, 0);
    let sample = sample_field(&robot, [150, 150], &|q: &[f64]| cdf.value(q))?;
    let levels = [0.1, 0.5, 0.9];
    for l in levels {
        println!("level {l}: {} closed contours", sample.contours(l).len());
    }

    let params = PlannerConfig::default().params(robot.dof())?;
    let (start, goal) = sample_pairs(&robot, &scene, 3, 3).swap_remove(2);
    let traj = reactive_rollout(&robot, &cdf, &params, &start, &goal)?;

    let out = std::env::temp_dir().join("cdfkit-cspace");
    std::fs::create_dir_all(&out).map_err(|e| cdfkit::Error::Input(e.to_string()))?;
    cdfkit::io::write_atomic(&out.join("field.svg"), render_svg(&sample, &levels, &[("reactive".into(), &traj)]).as_bytes())?;
    let mut csv = Vec::new();
    sample.write_csv(&mut csv)?;
    cdfkit::io::write_atomic(&out.join("field.csv"), &csv)?;
    println!("wrote {}", out.display());
    Ok(())
}
