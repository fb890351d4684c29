use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cdf_eval, cdf_project, prefix_sq, query_from, CdfQuery, Projector, TargetProjector};
use crate::error::{Error, Result};
use crate::kinematics::{JointConfig, Point2, RobotModel};
use crate::zero_level_set::{find_zero_configs, fps_downsample, ContactSamples, SolverParams, ZeroSetStatus};

/// Axis-aligned workspace box `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridBounds {
    pub min: Point2,
    pub max: Point2,
}

impl GridBounds {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        if !(x0 < x1 && y0 < y1) {
            return Err(Error::Input(format!("empty bounds [{x0}, {y0}] .. [{x1}, {y1}]")));
        }
        Ok(GridBounds {
            min: Point2::new(x0, y0),
            max: Point2::new(x1, y1),
        })
    }

    /// Square centred on the base that covers everything the robot can touch.
    pub fn reachable(robot: &RobotModel) -> Self {
        let r = robot.reach();
        GridBounds {
            min: Point2::new(-r, -r),
            max: Point2::new(r, r),
        }
    }

    pub fn contains(&self, p: &Point2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

/// Contact samples stored for one grid cell, evaluated at the cell centre.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub index: [usize; 2],
    pub point: Point2,
    pub configs: Vec<JointConfig>,
    pub contact_links: Vec<usize>,
}

impl ContactSamples for GridCell {
    fn configs(&self) -> &[JointConfig] {
        &self.configs
    }

    fn contact_links(&self) -> &[usize] {
        &self.contact_links
    }
}

/// Workspace grid of precomputed zero sets. Cell `[i, j]` covers the `i`-th
/// column along x and `j`-th row along y; empty cells are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfGrid {
    pub bounds: GridBounds,
    pub resolution: [usize; 2],
    pub robot_hash: String,
    pub cells: BTreeMap<[usize; 2], GridCell>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Occupied,
    Unreachable,
    NotConverged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildReport {
    pub statuses: BTreeMap<[usize; 2], CellStatus>,
}

impl BuildReport {
    pub fn count(&self, status: CellStatus) -> usize {
        self.statuses.values().filter(|s| **s == status).count()
    }
}

impl CdfGrid {
    pub fn cell_size(&self) -> Point2 {
        let span = self.bounds.max - self.bounds.min;
        Point2::new(span.x / self.resolution[0] as f64, span.y / self.resolution[1] as f64)
    }

    pub fn cell_center(&self, index: [usize; 2]) -> Point2 {
        let size = self.cell_size();
        Point2::new(
            self.bounds.min.x + (index[0] as f64 + 0.5) * size.x,
            self.bounds.min.y + (index[1] as f64 + 0.5) * size.y,
        )
    }

    /// Index of the cell containing `p` (its nearest centre).
    pub fn cell_index(&self, p: &Point2) -> Result<[usize; 2]> {
        if !self.bounds.contains(p) {
            return Err(Error::OutOfBounds { x: p.x, y: p.y });
        }
        let size = self.cell_size();
        let i = ((p.x - self.bounds.min.x) / size.x).floor() as usize;
        let j = ((p.y - self.bounds.min.y) / size.y).floor() as usize;
        Ok([i.min(self.resolution[0] - 1), j.min(self.resolution[1] - 1)])
    }

    pub fn cell_at(&self, p: &Point2) -> Result<Option<&GridCell>> {
        Ok(self.cells.get(&self.cell_index(p)?))
    }

    pub fn occupied(&self) -> impl Iterator<Item = &GridCell> {
        self.cells.values()
    }

    /// Checks the grid was built for `robot` and returns a query handle.
    pub fn bind<'a>(&'a self, robot: &'a RobotModel) -> Result<GridField<'a>> {
        let found = robot.hash();
        if found != self.robot_hash {
            return Err(Error::RobotMismatch {
                expected: self.robot_hash.clone(),
                found,
            });
        }
        Ok(GridField { grid: self, robot })
    }
}

/// Mixes the global seed with a cell index so each cell's search is
/// independent of build order.
fn cell_seed(rng_seed: u64, index: [usize; 2]) -> u64 {
    let mut z = rng_seed ^ ((index[0] as u64) << 32 | index[1] as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Precomputes, for every cell centre, a farthest-point subsample of its
/// zero-level-set configurations.
pub fn build_grid(
    robot: &RobotModel,
    bounds: GridBounds,
    resolution: [usize; 2],
    solver: &SolverParams,
    fps_k: usize,
    rng_seed: u64,
) -> Result<(CdfGrid, BuildReport)> {
    if resolution[0] < 2 || resolution[1] < 2 {
        return Err(Error::Input("grid resolution must be at least 2 per axis".into()));
    }
    if fps_k == 0 {
        return Err(Error::Input("fps_k must be at least 1".into()));
    }
    solver.validate()?;
    let mut grid = CdfGrid {
        bounds,
        resolution,
        robot_hash: robot.hash(),
        cells: BTreeMap::new(),
    };
    let indices: Vec<[usize; 2]> = (0..resolution[0])
        .flat_map(|i| (0..resolution[1]).map(move |j| [i, j]))
        .collect();
    let results: Vec<([usize; 2], CellStatus, Option<GridCell>)> = indices
        .par_iter()
        .map(|&index| {
            let point = grid.cell_center(index);
            let zs = find_zero_configs(robot, &point, solver, cell_seed(rng_seed, index));
            match zs.status {
                ZeroSetStatus::Unreachable => (index, CellStatus::Unreachable, None),
                ZeroSetStatus::NotConverged => (index, CellStatus::NotConverged, None),
                ZeroSetStatus::Converged => {
                    let zs = fps_downsample(&zs, fps_k);
                    let cell = GridCell {
                        index,
                        point,
                        configs: zs.configs,
                        contact_links: zs.contact_links,
                    };
                    (index, CellStatus::Occupied, Some(cell))
                }
            }
        })
        .collect();

    let mut statuses = BTreeMap::new();
    for (index, status, cell) in results {
        statuses.insert(index, status);
        if let Some(cell) = cell {
            grid.cells.insert(index, cell);
        }
    }
    Ok((grid, BuildReport { statuses }))
}

/// A grid bound to the robot it was built for.
#[derive(Debug, Clone, Copy)]
pub struct GridField<'a> {
    pub grid: &'a CdfGrid,
    pub robot: &'a RobotModel,
}

impl<'a> GridField<'a> {
    pub fn query_point(&self, p: &Point2, q: &[f64]) -> Result<CdfQuery> {
        self.robot.check_dim(q)?;
        match self.grid.cell_at(p)? {
            Some(cell) => cdf_eval(q, cell),
            None => Err(Error::NoZeroSetData),
        }
    }

    /// Fused field over a point cloud: each point snaps to its cell and the
    /// result is the minimum over occupied cells.
    pub fn query_points(&self, points: &[Point2], q: &[f64]) -> Result<CdfQuery> {
        self.robot.check_dim(q)?;
        self.fuse(points)?.query(q)
    }

    pub fn project(&self, p: &Point2, q: &[f64], iters: usize) -> Result<JointConfig> {
        match self.grid.cell_at(p)? {
            Some(cell) => cdf_project(self.robot, q, cell, iters),
            None => Err(Error::NoZeroSetData),
        }
    }

    /// Collects the distinct occupied cells under `points`.
    pub fn fuse(&self, points: &[Point2]) -> Result<FusedCdf<'a>> {
        let mut seen = std::collections::BTreeSet::new();
        let mut cells = Vec::new();
        for p in points {
            let index = self.grid.cell_index(p)?;
            if seen.insert(index) {
                if let Some(cell) = self.grid.cells.get(&index) {
                    cells.push(cell as &dyn ContactSamples);
                }
            }
        }
        Ok(FusedCdf { parts: cells })
    }
}

impl Projector for GridField<'_> {
    fn target<'b>(&'b self, p: &Point2) -> Result<Box<dyn TargetProjector + 'b>> {
        match self.grid.cell_at(p)? {
            Some(cell) => Ok(Box::new(CellTarget { robot: self.robot, cell })),
            None => Err(Error::NoZeroSetData),
        }
    }
}

struct CellTarget<'a> {
    robot: &'a RobotModel,
    cell: &'a GridCell,
}

impl TargetProjector for CellTarget<'_> {
    fn project(&self, q: &JointConfig, iters: usize) -> Result<JointConfig> {
        cdf_project(self.robot, q, self.cell, iters)
    }
}

/// Minimum over several contact sets, one per point or cell.
pub struct FusedCdf<'a> {
    parts: Vec<&'a dyn ContactSamples>,
}

impl<'a> FusedCdf<'a> {
    pub fn new(parts: Vec<&'a dyn ContactSamples>) -> Self {
        FusedCdf { parts }
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.iter().all(|p| p.is_empty())
    }

    /// Ties between parts go to the earlier part.
    pub fn query(&self, q: &[f64]) -> Result<CdfQuery> {
        let mut best: Option<CdfQuery> = None;
        for part in &self.parts {
            if part.is_empty() {
                continue;
            }
            let res = cdf_eval(q, *part)?;
            if best.as_ref().is_none_or(|b| res.value < b.value) {
                best = Some(res);
            }
        }
        best.ok_or(Error::NoZeroSetData)
    }

    /// Value only, without allocating the gradient for losing parts.
    pub fn value(&self, q: &[f64]) -> Option<f64> {
        let mut best_sq = f64::INFINITY;
        for part in &self.parts {
            for (qp, &k) in part.configs().iter().zip(part.contact_links()) {
                best_sq = best_sq.min(prefix_sq(q, qp, k));
            }
        }
        best_sq.is_finite().then(|| best_sq.sqrt())
    }

    pub(crate) fn query_fast(&self, q: &[f64]) -> Option<CdfQuery> {
        let mut best: Option<(f64, &JointConfig, usize)> = None;
        for part in &self.parts {
            for (qp, &k) in part.configs().iter().zip(part.contact_links()) {
                let d2 = prefix_sq(q, qp, k);
                if best.is_none_or(|(b, _, _)| d2 < b) {
                    best = Some((d2, qp, k));
                }
            }
        }
        best.map(|(d2, qp, k)| query_from(q, qp, k, d2))
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::robot_sdf::sdf;

    fn small_grid() -> (RobotModel, CdfGrid) {
        let robot = RobotModel::two_link();
        let (grid, _) = build_grid(
            &robot,
            GridBounds::reachable(&robot),
            [10, 10],
            &SolverParams::default().with_seeds(128),
            32,
            7,
        )
        .unwrap();
        (robot, grid)
    }

    #[test]
    fn out_of_reach_box_is_empty() {
        let robot = RobotModel::two_link();
        let (grid, report) = build_grid(
            &robot,
            GridBounds::new(10.0, 10.0, 12.0, 12.0).unwrap(),
            [2, 2],
            &SolverParams::default().with_seeds(16),
            8,
            0,
        )
        .unwrap();
        assert!(grid.cells.is_empty());
        assert_eq!(report.count(CellStatus::Unreachable), 4);
    }

    #[test]
    fn one_link_cells_on_the_reach_circle() {
        let robot = RobotModel::planar(&[2.0]).unwrap();
        // Centres at -2, -1, 0, 1, 2 along each axis.
        let (grid, _) = build_grid(
            &robot,
            GridBounds::new(-2.5, -2.5, 2.5, 2.5).unwrap(),
            [5, 5],
            &SolverParams::default().with_seeds(256),
            16,
            3,
        )
        .unwrap();
        let mut checked = 0;
        for cell in grid.occupied() {
            if (cell.point.norm() - 2.0).abs() < 1e-12 {
                let angle = cell.point.y.atan2(cell.point.x);
                for q in &cell.configs {
                    let diff = (q[0] - angle).abs();
                    // pi and -pi are the same contact for the point (-2, 0).
                    assert!(diff < 1e-2 || (diff - 2.0 * PI).abs() < 1e-2, "{q:?} vs {angle}");
                }
                checked += 1;
            }
        }
        assert_eq!(checked, 4);
    }

    #[test]
    fn stored_configs_revalidate() {
        let (robot, grid) = small_grid();
        let eps = SolverParams::default().epsilon;
        assert!(grid.cells.len() > 30);
        for cell in grid.occupied() {
            for (q, k) in cell.configs.iter().zip(&cell.contact_links) {
                let res = sdf(&robot, q, &cell.point);
                assert!(res.distance.abs() < eps);
                assert_eq!(res.contact_link, *k);
            }
        }
    }

    #[test]
    fn rebuild_is_identical() {
        let (_, a) = small_grid();
        let (_, b) = small_grid();
        assert_eq!(a, b);
    }

    #[test]
    fn mismatched_robot_is_rejected() {
        let (_, grid) = small_grid();
        let other = RobotModel::planar(&[2.0, 1.9]).unwrap();
        assert!(matches!(grid.bind(&other), Err(Error::RobotMismatch { .. })));
    }

    #[test]
    fn point_queries_snap_to_cells() {
        let (robot, grid) = small_grid();
        let field = grid.bind(&robot).unwrap();
        let cell = grid.occupied().nth(5).unwrap();
        let q = [0.3, -0.2];
        assert_eq!(field.query_points(&[cell.point], &q).unwrap(), cdf_eval(&q, cell).unwrap());
        // A config stored in the cell sits at distance zero.
        let on = &cell.configs[0];
        assert_eq!(field.query_point(&cell.point, on).unwrap().value, 0.0);

        assert!(matches!(
            field.query_points(&[Point2::new(100.0, 0.0)], &q),
            Err(Error::OutOfBounds { .. })
        ));
        let corner = grid.bounds.min;
        assert!(matches!(field.query_points(&[corner], &q), Err(Error::NoZeroSetData)));
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point2> {
        (0..n)
            .map(|_| Point2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)))
            .collect()
    }

    #[test]
    fn fused_value_is_min_of_single_point_queries() {
        let (robot, grid) = small_grid();
        let field = grid.bind(&robot).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let pts = random_points(&mut rng, 50);
            let q = robot.sample_config(&mut rng);
            let fused = field.query_points(&pts, &q).unwrap();
            let oracle = pts
                .iter()
                .filter_map(|p| field.query_point(p, &q).ok())
                .map(|r| r.value)
                .fold(f64::INFINITY, f64::min);
            assert_eq!(fused.value, oracle);
            assert_eq!(field.fuse(&pts).unwrap().value(&q), Some(oracle));
            assert_eq!(field.fuse(&pts).unwrap().query_fast(&q).unwrap().value, oracle);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn union_is_min_of_parts(seed in 0u64..1000, split in 1usize..29) {
            let (robot, grid) = small_grid_cached();
            let field = grid.bind(robot).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts = random_points(&mut rng, 30);
            let q = robot.sample_config(&mut rng);
            let (a, b) = pts.split_at(split);
            let whole = field.query_points(&pts, &q).unwrap().value;
            let va = field.query_points(a, &q).map(|r| r.value).unwrap_or(f64::INFINITY);
            let vb = field.query_points(b, &q).map(|r| r.value).unwrap_or(f64::INFINITY);
            prop_assert_eq!(whole, va.min(vb));
        }
    }

    fn small_grid_cached() -> &'static (RobotModel, CdfGrid) {
        static GRID: std::sync::OnceLock<(RobotModel, CdfGrid)> = std::sync::OnceLock::new();
        GRID.get_or_init(small_grid)
    }
}
