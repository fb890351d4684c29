//! Loading learned weights and using them for values, gradients and
//! projection. Random weights stand in for a trained model here.

use cdfkit::cdf::Projector;
use cdfkit::kinematics::{JointConfig, Point2, RobotModel};
use cdfkit::neural::{MlpModel, NeuralField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> cdfkit::Result<()> {
    let robot = RobotModel::two_link();
    let pi = std::f64::consts::PI;
    let bounds = vec![(-4.0, 4.0), (-4.0, 4.0), (-pi, pi), (-pi, pi)];
    let model = MlpModel::random(bounds, 4, &[64, 64, 64, 64], &mut ChaCha8Rng::seed_from_u64(0))?;

    let dir = tempfile::tempdir().map_err(|e| cdfkit::Error::Input(e.to_string()))?;
    let path = dir.path().join("weights.json");
    model.save(&path)?;
    let model = MlpModel::load(&path)?;

    let p = Point2::new(1.0, 2.0);
    let (value, grad) = model.value_and_grad_q(&p, &[0.2, 0.4])?;
    println!("f = {value:.5}, grad = {:.5?}", grad.as_slice());

    let field = NeuralField { model: &model, robot: &robot };
    let q = field.target(&p)?.project(&JointConfig(vec![0.2, 0.4]), 3)?;
    println!("after 3 steps: {:.4?}", q.0);
    Ok(())
}
