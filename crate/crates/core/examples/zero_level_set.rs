//! Every configuration that touches a point, then a spread-out subset.

use cdfkit::kinematics::{Point2, RobotModel};
use cdfkit::zero_level_set::{find_zero_configs, fps_downsample, SolverParams};

fn main() {
    let robot = RobotModel::two_link();
    let p = Point2::new(1.2, 0.9);
    let zs = find_zero_configs(&robot, &p, &SolverParams::default(), 0);
    let by_link = |k| zs.contact_links.iter().filter(|l| **l == k).count();
    println!(
        "{:?}: {} contact configs ({} on link 1, {} on link 2), worst residual {:.1e}",
        zs.status,
        zs.len(),
        by_link(1),
        by_link(2),
        zs.residuals.iter().cloned().fold(0.0, f64::max)
    );

    let few = fps_downsample(&zs, 8);
    for (q, k) in few.configs.iter().zip(&few.contact_links) {
        println!("  link {k}: q = [{:+.3}, {:+.3}]", q[0], q[1]);
    }

    let far = find_zero_configs(&robot, &Point2::new(5.0, 0.0), &SolverParams::default().with_seeds(64), 0);
    println!("out of reach: {:?}", far.status);
}
