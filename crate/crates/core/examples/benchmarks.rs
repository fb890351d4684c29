//! Small runs of the three benchmark modes, printed as CSV.

use cdfkit::bench::{bench_ik, bench_noise, bench_planning, IkBenchParams, NoiseBenchParams, PlanBenchParams};
use cdfkit::cdf::{build_grid, ExactField, GridBounds};
use cdfkit::kinematics::RobotModel;
use cdfkit::planner::{PlannerConfig, Scene};
use cdfkit::zero_level_set::SolverParams;

fn main() -> cdfkit::Result<()> {
    let robot = RobotModel::two_link();
    let solver = SolverParams::default().with_seeds(256);
    let (grid, _) = build_grid(&robot, GridBounds::reachable(&robot), [10, 10], &solver, 32, 0)?;

    let ik = bench_ik(&robot, &grid, &IkBenchParams { targets: 5, inits: 200, ..Default::default() }, 0)?;
    ik.write_csv(std::io::stdout())?;

    let field = ExactField { robot: &robot, solver, rng_seed: 0 };
    let noise = bench_noise(&robot, &field, "cdf-exact", &NoiseBenchParams { targets: 10, inits: 20, ..Default::default() }, 0)?;
    noise.write_csv(std::io::stdout())?;

    let plan = PlanBenchParams {
        trials: 6,
        planner: PlannerConfig { horizon: 200, ..Default::default() },
        solver,
        ..Default::default()
    };
    let report = bench_planning(&robot, &Scene::planar_benchmark(), &plan, 0)?;
    report.write_csv(std::io::stdout())?;
    println!("excluded {} of {}", report.excluded, report.samples);
    Ok(())
}
