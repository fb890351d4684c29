//! Whole-body IK by gradient projection: random configurations pushed onto
//! contact with a target, compared with per-start L-BFGS.

use std::time::Instant;

use cdfkit::cdf::{ExactField, Projector};
use cdfkit::kinematics::{Point2, RobotModel};
use cdfkit::robot_sdf::sdf_distance;
use cdfkit::zero_level_set::{descend_to_contact, SolverParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> cdfkit::Result<()> {
    let robot = RobotModel::two_link();
    let target = Point2::new(-1.5, 2.2);
    let field = ExactField {
        robot: &robot,
        solver: SolverParams::default(),
        rng_seed: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let inits: Vec<_> = (0..1000).map(|_| robot.sample_config(&mut rng)).collect();

    let proj = field.target(&target)?;
    for iters in 1..=3 {
        let t = Instant::now();
        let ok = inits
            .iter()
            .map(|q| proj.project(q, iters))
            .collect::<cdfkit::Result<Vec<_>>>()?
            .iter()
            .filter(|q| sdf_distance(&robot, q, &target) < 0.05)
            .count();
        println!("cdf, {iters} step(s): {ok}/1000 within 0.05 in {:.2?}", t.elapsed());
    }

    let t = Instant::now();
    let lbfgs = SolverParams::default().lbfgs();
    let ok = inits
        .iter()
        .filter(|q| descend_to_contact(&robot, &target, (*q).clone(), &lbfgs).residual < 0.05)
        .count();
    println!("sdf + l-bfgs: {ok}/1000 within 0.05 in {:.2?}", t.elapsed());
    Ok(())
}
