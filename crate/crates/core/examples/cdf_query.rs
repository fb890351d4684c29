//! Joint-space distance to contact, its unit gradient, and fusion of two points.

use cdfkit::cdf::{cdf_eval, FusedCdf};
use cdfkit::kinematics::{Point2, RobotModel};
use cdfkit::zero_level_set::{find_zero_configs, ContactSamples, SolverParams};

fn main() -> cdfkit::Result<()> {
    let robot = RobotModel::two_link();
    let a = find_zero_configs(&robot, &Point2::new(2.5, 1.0), &SolverParams::default(), 1);
    let b = find_zero_configs(&robot, &Point2::new(-1.0, -3.0), &SolverParams::default(), 2);

    let q = [0.0, 0.0];
    let qa = cdf_eval(&q, &a)?;
    println!(
        "to a: {:.4} rad via link {}, |grad| = {:.12}",
        qa.value,
        qa.contact_link,
        qa.gradient.norm()
    );
    println!("one step lands on {:.4?}", qa.projected(&q).0);

    let fused = FusedCdf::new(vec![&a as &dyn ContactSamples, &b]);
    let qb = cdf_eval(&q, &b)?;
    println!("to b: {:.4}; fused: {:.4}", qb.value, fused.query(&q)?.value);
    Ok(())
}
