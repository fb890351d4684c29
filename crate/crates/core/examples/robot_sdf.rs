//! Task-space distance from points to the arm, with both gradients.

use cdfkit::kinematics::{Point2, RobotModel};
use cdfkit::robot_sdf::{sdf, sdf_min_over};

fn main() {
    let robot = RobotModel::two_link();
    let q = [0.3, 0.8];
    for p in [Point2::new(1.0, 1.5), Point2::new(-2.0, 0.5), Point2::new(3.0, 2.0)] {
        let s = sdf(&robot, &q, &p);
        println!(
            "p = ({:>4}, {:>4}): distance {:.4}, link {}, grad_p {:.3?}, grad_q {:.3?}",
            p.x,
            p.y,
            s.distance,
            s.contact_link,
            s.grad_p.as_slice(),
            s.grad_q.as_slice()
        );
    }
    let cloud: Vec<Point2> = (0..8).map(|i| Point2::new(2.3 + 0.3 * (i as f64).cos(), -2.3 + 0.3 * (i as f64).sin())).collect();
    let nearest = sdf_min_over(&robot, &q, &cloud).unwrap();
    println!("closest of {} obstacle points: {:.4}", cloud.len(), nearest.distance);
}
