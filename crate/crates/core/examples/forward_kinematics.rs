//! Link segments, joint positions and a point Jacobian for the two-link arm.

use cdfkit::kinematics::{forward_kinematics, joint_positions, point_jacobian, RobotModel};

fn main() -> cdfkit::Result<()> {
    let robot = RobotModel::two_link();
    let q = [0.4, -0.9];
    for seg in forward_kinematics(&robot, &q)? {
        println!(
            "link {}: ({:.3}, {:.3}) -> ({:.3}, {:.3})",
            seg.link_index, seg.start.x, seg.start.y, seg.end.x, seg.end.y
        );
    }
    let joints = joint_positions(&robot, &q);
    println!("tip at {:.3?}", joints.last().unwrap());

    // Velocity of the tip of link 2 per unit joint rate.
    let j = point_jacobian(&robot, &q, 2, 1.0)?;
    println!("tip jacobian:\n{j:.3}");

    let three = RobotModel::planar(&[1.5, 1.0, 0.5])?;
    println!("3-link reach {}, hash {}", three.reach(), &three.hash()[..12]);
    Ok(())
}
