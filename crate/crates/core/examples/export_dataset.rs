//! Training rows for the learned field, streamed as JSONL.

use std::io::BufReader;

use cdfkit::cdf::{build_grid, GridBounds};
use cdfkit::dataset::{export_dataset, read_dataset};
use cdfkit::kinematics::RobotModel;
use cdfkit::zero_level_set::SolverParams;

fn main() -> cdfkit::Result<()> {
    let robot = RobotModel::two_link();
    let (grid, _) = build_grid(&robot, GridBounds::reachable(&robot), [8, 8], &SolverParams::default().with_seeds(128), 16, 0)?;
    let field = grid.bind(&robot)?;

    let dir = tempfile::tempdir().map_err(|e| cdfkit::Error::Input(e.to_string()))?;
    let path = dir.path().join("rows.jsonl");
    cdfkit::io::with_atomic_writer(&path, |w| {
        export_dataset(&field, 500, 50, 0, w).map(|_| ()).map_err(std::io::Error::other)
    })?;

    let file = std::fs::File::open(&path).map_err(|e| cdfkit::Error::Input(e.to_string()))?;
    let rows = read_dataset(BufReader::new(file)).collect::<cdfkit::Result<Vec<_>>>()?;
    let mean = rows.iter().map(|r| r.fc).sum::<f64>() / rows.len() as f64;
    println!("{} rows, mean distance {mean:.3} rad", rows.len());
    println!("first: {}", serde_json::to_string(&rows[0]).unwrap());
    Ok(())
}
