//! Offline grid of contact samples, saved, reloaded and queried for a point
//! cloud.

use cdfkit::cdf::{build_grid, load_grid, save_grid, CellStatus, GridBounds};
use cdfkit::kinematics::{Point2, RobotModel};
use cdfkit::zero_level_set::SolverParams;

fn main() -> cdfkit::Result<()> {
    let robot = RobotModel::two_link();
    let solver = SolverParams::default().with_seeds(256);
    let (grid, report) = build_grid(&robot, GridBounds::reachable(&robot), [12, 12], &solver, 32, 0)?;
    println!(
        "{} occupied, {} unreachable, {} without contact",
        report.count(CellStatus::Occupied),
        report.count(CellStatus::Unreachable),
        report.count(CellStatus::NotConverged)
    );

    let dir = tempfile::tempdir().map_err(|e| cdfkit::Error::Input(e.to_string()))?;
    let path = dir.path().join("grid.json");
    save_grid(&grid, &path)?;
    let grid = load_grid(&path)?;
    let field = grid.bind(&robot)?;

    let q = [0.5, -0.4];
    let p = Point2::new(2.0, 2.0);
    println!("single point: {:.4}", field.query_point(&p, &q)?.value);
    let cloud = [p, Point2::new(-2.5, 1.0), Point2::new(0.5, -3.0)];
    let fused = field.query_points(&cloud, &q)?;
    println!("cloud of {}: {:.4} via link {}", cloud.len(), fused.value, fused.contact_link);
    println!("projected: {:.4?}", field.project(&p, &q, 1)?.0);
    Ok(())
}
