//! Comparative experiments: inverse-kinematics throughput, planning success
//! and noise sensitivity. Every report is deterministic given its seed except
//! for the wall-clock columns.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cdf::{cdf_project, CdfGrid, Projector};
use crate::error::{Error, Result};
use crate::io;
use crate::kinematics::{JointConfig, Point2, RobotModel};
use crate::planner::{
    ilqr_plan, reactive_rollout, rollout_metrics, DistanceBackend, PlannerConfig, PointCloudCdf, Scene, SdfBackend,
};
use crate::robot_sdf::sdf_distance;
use crate::zero_level_set::{descend_to_contact, SolverParams};

pub const REPORT_FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallClock {
    pub median_ms: f64,
    pub p90_ms: f64,
    pub total_ms: f64,
}

impl WallClock {
    pub fn from_samples(mut ms: Vec<f64>) -> Self {
        if ms.is_empty() {
            return WallClock {
                median_ms: 0.0,
                p90_ms: 0.0,
                total_ms: 0.0,
            };
        }
        ms.sort_by(f64::total_cmp);
        let pick = |q: f64| ms[((ms.len() - 1) as f64 * q).round() as usize];
        WallClock {
            median_ms: pick(0.5),
            p90_ms: pick(0.9),
            total_ms: ms.iter().sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: String,
    /// Free-form setting label, e.g. `iters=2` or `sigma=0.01`.
    pub setting: String,
    /// Successes over samples not excluded.
    pub success_rate: f64,
    pub successes: usize,
    pub evaluated: usize,
    /// Mean over all samples, in `error_unit`.
    pub mean_error: f64,
    pub error_unit: String,
    /// Mean over successful samples; planning only.
    pub mean_time_steps: Option<f64>,
    /// Raw successes per second of wall time; inverse kinematics only.
    pub valid_per_second: Option<f64>,
    pub wall_clock: WallClock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub version: u64,
    pub scenario: String,
    pub rng_seed: u64,
    pub samples: usize,
    /// Samples every method failed; they count in no denominator.
    pub excluded: usize,
    pub rows: Vec<MethodRow>,
}

impl BenchReport {
    pub fn row(&self, method: &str, setting: &str) -> Option<&MethodRow> {
        self.rows.iter().find(|r| r.method == method && r.setting == setting)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse(text, e))
    }

    pub const CSV_HEADER: [&'static str; 15] = [
        "scenario",
        "method",
        "setting",
        "success_rate",
        "successes",
        "evaluated",
        "mean_error",
        "error_unit",
        "mean_time_steps",
        "valid_per_second",
        "wall_median_ms",
        "wall_p90_ms",
        "wall_total_ms",
        "excluded",
        "rng_seed",
    ];

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::CSV_HEADER)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                self.scenario.clone(),
                r.method.clone(),
                r.setting.clone(),
                r.success_rate.to_string(),
                r.successes.to_string(),
                r.evaluated.to_string(),
                r.mean_error.to_string(),
                r.error_unit.clone(),
                opt(r.mean_time_steps),
                opt(r.valid_per_second),
                r.wall_clock.median_ms.to_string(),
                r.wall_clock.p90_ms.to_string(),
                r.wall_clock.total_ms.to_string(),
                self.excluded.to_string(),
                self.rng_seed.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "<csv>".into(),
            source: e,
        })?;
        Ok(())
    }

    /// Writes the CSV and its JSON mirror atomically.
    pub fn save(&self, csv_path: Option<&Path>, json_path: Option<&Path>) -> Result<()> {
        if let Some(path) = csv_path {
            let mut buf = Vec::new();
            self.write_csv(&mut buf)?;
            io::write_atomic(path, &buf)?;
        }
        if let Some(path) = json_path {
            io::write_atomic(path, self.to_json().as_bytes())?;
        }
        Ok(())
    }
}

/// Marks samples where every method failed. `outcomes[s][m]` is the success
/// of method `m` on sample `s`.
pub fn excluded_samples(outcomes: &[Vec<bool>]) -> Vec<bool> {
    outcomes.iter().map(|o| !o.iter().any(|s| *s)).collect()
}

struct Tally {
    success: Vec<bool>,
    error: Vec<f64>,
    steps: Vec<Option<usize>>,
    ms: Vec<f64>,
}

fn rows_from(
    names: &[(String, String)],
    tallies: &[Tally],
    excluded: &[bool],
    unit: &str,
    throughput: bool,
) -> Vec<MethodRow> {
    names
        .iter()
        .zip(tallies)
        .map(|((method, setting), t)| {
            let evaluated = excluded.iter().filter(|e| !**e).count();
            let successes = t.success.iter().zip(excluded).filter(|(s, e)| **s && !**e).count();
            let steps: Vec<f64> = t
                .steps
                .iter()
                .zip(&t.success)
                .filter(|(_, s)| **s)
                .filter_map(|(k, _)| k.map(|k| k as f64))
                .collect();
            let wall_clock = WallClock::from_samples(t.ms.clone());
            let raw_valid = t.success.iter().filter(|s| **s).count();
            MethodRow {
                method: method.clone(),
                setting: setting.clone(),
                success_rate: if evaluated == 0 { 0.0 } else { successes as f64 / evaluated as f64 },
                successes,
                evaluated,
                mean_error: mean(&t.error),
                error_unit: unit.into(),
                mean_time_steps: (!steps.is_empty()).then(|| mean(&steps)),
                valid_per_second: throughput.then(|| raw_valid as f64 / (wall_clock.total_ms.max(1e-9) / 1e3)),
                wall_clock,
            }
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IkBenchParams {
    pub targets: usize,
    pub inits: usize,
    /// Task-space residual below which a configuration counts as a solution.
    pub threshold: f64,
    /// Projection iteration counts, one report row each.
    pub cdf_iters: [usize; 3],
    /// Optimizer settings for the per-init baseline.
    pub baseline: SolverParams,
}

impl Default for IkBenchParams {
    fn default() -> Self {
        IkBenchParams {
            targets: 100,
            inits: 1000,
            threshold: 0.05,
            cdf_iters: [1, 2, 3],
            baseline: SolverParams::default(),
        }
    }
}

/// Whole-body IK from random initial configurations toward targets placed at
/// occupied cell centers. Rows: `cdf` at each iteration count and
/// `sdf-lbfgs`. Runs sequentially so the timings are comparable.
pub fn bench_ik(robot: &RobotModel, grid: &CdfGrid, params: &IkBenchParams, rng_seed: u64) -> Result<BenchReport> {
    let field = grid.bind(robot)?;
    let cells: Vec<_> = field.grid.occupied().collect();
    if cells.is_empty() {
        return Err(Error::NoZeroSetData);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut names: Vec<(String, String)> = params.cdf_iters.iter().map(|k| ("cdf".into(), format!("iters={k}"))).collect();
    names.push(("sdf-lbfgs".into(), format!("max_iters={}", params.baseline.max_iters)));
    let mut tallies: Vec<Tally> = names
        .iter()
        .map(|_| Tally {
            success: Vec::new(),
            error: Vec::new(),
            steps: Vec::new(),
            ms: Vec::new(),
        })
        .collect();
    let lbfgs = params.baseline.lbfgs();

    for _ in 0..params.targets {
        let cell = cells[rng.random_range(0..cells.len())];
        let p = cell.point;
        let inits: Vec<JointConfig> = (0..params.inits).map(|_| robot.sample_config(&mut rng)).collect();

        for (m, &iters) in params.cdf_iters.iter().enumerate() {
            let t = Instant::now();
            let solved: Vec<JointConfig> = inits
                .iter()
                .map(|q| cdf_project(robot, q, cell, iters))
                .collect::<Result<_>>()?;
            tallies[m].ms.push(elapsed_ms(t));
            record(&mut tallies[m], robot, &p, &solved, params.threshold);
        }

        let m = params.cdf_iters.len();
        let t = Instant::now();
        let solved: Vec<JointConfig> = inits
            .iter()
            .map(|q| descend_to_contact(robot, &p, q.clone(), &lbfgs).config)
            .collect();
        tallies[m].ms.push(elapsed_ms(t));
        record(&mut tallies[m], robot, &p, &solved, params.threshold);
    }

    let outcomes: Vec<Vec<bool>> = (0..tallies[0].success.len())
        .map(|s| tallies.iter().map(|t| t.success[s]).collect())
        .collect();
    let excluded = excluded_samples(&outcomes);
    Ok(BenchReport {
        version: REPORT_FORMAT_VERSION,
        scenario: "ik".into(),
        rng_seed,
        samples: outcomes.len(),
        excluded: excluded.iter().filter(|e| **e).count(),
        rows: rows_from(&names, &tallies, &excluded, "workspace", true),
    })
}

fn record(t: &mut Tally, robot: &RobotModel, p: &Point2, solved: &[JointConfig], threshold: f64) {
    for q in solved {
        let residual = sdf_distance(robot, q, p).abs();
        t.success.push(residual < threshold);
        t.error.push(residual);
        t.steps.push(None);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanMethod {
    Reactive,
    Ilqr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Cdf,
    Sdf,
}

impl BackendKind {
    pub fn name(self) -> &'static str {
        match self {
            BackendKind::Cdf => "cdf",
            BackendKind::Sdf => "sdf",
        }
    }
}

impl PlanMethod {
    pub fn name(self) -> &'static str {
        match self {
            PlanMethod::Reactive => "reactive",
            PlanMethod::Ilqr => "ilqr",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanBenchParams {
    pub trials: usize,
    pub methods: Vec<(PlanMethod, BackendKind)>,
    pub planner: PlannerConfig,
    /// Zero-set search for the configuration-space backend.
    pub solver: SolverParams,
    /// Samples kept per obstacle point.
    pub fps_k: usize,
    /// Goal tolerance in radians.
    pub threshold: f64,
    /// Run trials on the rayon pool; off gives clean timings.
    pub parallel: bool,
}

impl Default for PlanBenchParams {
    fn default() -> Self {
        PlanBenchParams {
            trials: 100,
            methods: vec![
                (PlanMethod::Reactive, BackendKind::Cdf),
                (PlanMethod::Reactive, BackendKind::Sdf),
                (PlanMethod::Ilqr, BackendKind::Cdf),
                (PlanMethod::Ilqr, BackendKind::Sdf),
            ],
            planner: PlannerConfig::default(),
            solver: SolverParams::default(),
            fps_k: 16,
            threshold: 0.05,
            parallel: true,
        }
    }
}

/// Collision-free start and goal pairs, resampled until both ends clear the
/// scene.
pub fn sample_pairs(robot: &RobotModel, scene: &Scene, count: usize, rng_seed: u64) -> Vec<(JointConfig, JointConfig)> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut draw = || loop {
        let q = robot.sample_config(&mut rng);
        if scene.collision_free(robot, &q) {
            return q;
        }
    };
    (0..count).map(|_| (draw(), draw())).collect()
}

/// Plans between the same sampled pairs with every method and backend.
pub fn bench_planning(robot: &RobotModel, scene: &Scene, params: &PlanBenchParams, rng_seed: u64) -> Result<BenchReport> {
    scene.validate()?;
    let planner = params.planner.params(robot.dof())?;
    let points = scene.points();
    let cdf = PointCloudCdf::build(robot, &points, &params.solver, params.fps_k, rng_seed);
    let sdf = SdfBackend { robot, points };
    let pairs = sample_pairs(robot, scene, params.trials, rng_seed);

    let run_trial = |(start, goal): &(JointConfig, JointConfig)| -> Result<Vec<(bool, f64, usize, f64)>> {
        params
            .methods
            .iter()
            .map(|&(method, backend)| {
                let be: &dyn DistanceBackend = match backend {
                    BackendKind::Cdf => &cdf,
                    BackendKind::Sdf => &sdf,
                };
                let t = Instant::now();
                let traj = match method {
                    PlanMethod::Reactive => reactive_rollout(robot, be, &planner, start, goal)?,
                    PlanMethod::Ilqr => ilqr_plan(robot, be, &planner, start, goal)?,
                };
                let ms = elapsed_ms(t);
                let m = rollout_metrics(robot, scene, &traj, goal, params.threshold);
                Ok((m.success, m.tracking_error, m.time_steps, ms))
            })
            .collect()
    };
    let results: Vec<Vec<(bool, f64, usize, f64)>> = if params.parallel {
        pairs.par_iter().map(run_trial).collect::<Result<_>>()?
    } else {
        pairs.iter().map(run_trial).collect::<Result<_>>()?
    };

    let names: Vec<(String, String)> = params
        .methods
        .iter()
        .map(|(m, b)| (format!("{}-{}", b.name(), m.name()), format!("gamma={}", params.planner.gamma)))
        .collect();
    let tallies: Vec<Tally> = (0..params.methods.len())
        .map(|m| Tally {
            success: results.iter().map(|r| r[m].0).collect(),
            error: results.iter().map(|r| r[m].1).collect(),
            steps: results.iter().map(|r| Some(r[m].2)).collect(),
            ms: results.iter().map(|r| r[m].3).collect(),
        })
        .collect();
    let outcomes: Vec<Vec<bool>> = results.iter().map(|r| r.iter().map(|x| x.0).collect()).collect();
    let excluded = excluded_samples(&outcomes);
    Ok(BenchReport {
        version: REPORT_FORMAT_VERSION,
        scenario: "planning".into(),
        rng_seed,
        samples: pairs.len(),
        excluded: excluded.iter().filter(|e| **e).count(),
        rows: rows_from(&names, &tallies, &excluded, "rad", false),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseBenchParams {
    pub sigmas: Vec<f64>,
    pub targets: usize,
    pub inits: usize,
    pub iters: usize,
    pub threshold: f64,
}

impl Default for NoiseBenchParams {
    fn default() -> Self {
        NoiseBenchParams {
            sigmas: vec![0.0, 0.01, 0.02, 0.03],
            targets: 100,
            inits: 100,
            iters: 2,
            threshold: 0.05,
        }
    }
}

/// Random reachable targets, uniform by area over the annulus between 5%
/// and 95% of the robot's reach.
pub fn sample_targets(robot: &RobotModel, count: usize, rng: &mut impl Rng) -> Vec<Point2> {
    let (r0, r1) = (0.05 * robot.reach(), 0.95 * robot.reach());
    (0..count)
        .map(|_| {
            let r = (rng.random_range(r0 * r0..r1 * r1)).sqrt();
            let t = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            Point2::new(r * t.cos(), r * t.sin())
        })
        .collect()
}

/// Projection toward targets perturbed by Gaussian noise; residuals are
/// measured against the true target. One row per sigma. Targets and inits
/// are shared across sigmas, and the noise draws depend only on the seed.
pub fn bench_noise(
    robot: &RobotModel,
    field: &dyn Projector,
    label: &str,
    params: &NoiseBenchParams,
    rng_seed: u64,
) -> Result<BenchReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let targets = sample_targets(robot, params.targets, &mut rng);
    let inits: Vec<Vec<JointConfig>> = targets
        .iter()
        .map(|_| (0..params.inits).map(|_| robot.sample_config(&mut rng)).collect())
        .collect();

    let mut names = Vec::new();
    let mut tallies = Vec::new();
    for (si, &sigma) in params.sigmas.iter().enumerate() {
        if !(sigma >= 0.0) {
            return Err(Error::Input(format!("noise sigma {sigma} must be non-negative")));
        }
        let mut noise_rng = ChaCha8Rng::seed_from_u64(rng_seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(si as u64 + 1)));
        let normal = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
        let mut tally = Tally {
            success: Vec::new(),
            error: Vec::new(),
            steps: Vec::new(),
            ms: Vec::new(),
        };
        for (p, qs) in targets.iter().zip(&inits) {
            let noisy = p + Point2::new(normal.sample(&mut noise_rng), normal.sample(&mut noise_rng));
            let t = Instant::now();
            let solved: Vec<JointConfig> = match field.target(&noisy) {
                Ok(target) => qs.iter().map(|q| target.project(q, params.iters)).collect::<Result<_>>()?,
                // No contact data at the perturbed point: nothing moves.
                Err(Error::NoZeroSetData) | Err(Error::OutOfBounds { .. }) => qs.clone(),
                Err(e) => return Err(e),
            };
            tally.ms.push(elapsed_ms(t));
            record(&mut tally, robot, p, &solved, params.threshold);
        }
        names.push((label.to_string(), format!("sigma={sigma}")));
        tallies.push(tally);
    }
    // Each sigma is a separate setting, not a competing method, so nothing
    // is excluded here.
    let samples = tallies.first().map_or(0, |t| t.success.len());
    let excluded = vec![false; samples];
    Ok(BenchReport {
        version: REPORT_FORMAT_VERSION,
        scenario: "noise".into(),
        rng_seed,
        samples,
        excluded: 0,
        rows: rows_from(&names, &tallies, &excluded, "workspace", false),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdf::{build_grid, ExactField, GridBounds};

    fn small_grid(robot: &RobotModel) -> CdfGrid {
        build_grid(robot, GridBounds::reachable(robot), [8, 8], &SolverParams::default().with_seeds(64), 16, 3)
            .unwrap()
            .0
    }

    #[test]
    fn wall_clock_quantiles() {
        let w = WallClock::from_samples((1..=10).map(|v| v as f64).collect());
        assert_eq!(w.median_ms, 6.0);
        assert_eq!(w.p90_ms, 9.0);
        assert_eq!(w.total_ms, 55.0);
    }

    #[test]
    fn exclusion_drops_all_fail_samples() {
        let ex = excluded_samples(&[vec![false, false], vec![true, false], vec![false, true]]);
        assert_eq!(ex, vec![true, false, false]);
    }

    #[test]
    fn infinite_threshold_is_vacuous() {
        let robot = RobotModel::two_link();
        let grid = small_grid(&robot);
        let params = IkBenchParams {
            targets: 3,
            inits: 10,
            threshold: f64::INFINITY,
            baseline: SolverParams::default().with_seeds(1),
            ..Default::default()
        };
        let report = bench_ik(&robot, &grid, &params, 1).unwrap();
        assert_eq!(report.rows.len(), 4);
        assert!(report.rows.iter().all(|r| r.success_rate == 1.0 && r.evaluated == 30));
    }

    #[test]
    fn inits_on_the_zero_set_are_fixed_points() {
        let robot = RobotModel::two_link();
        let grid = small_grid(&robot);
        let cell = grid.occupied().next().unwrap();
        for q in &cell.configs {
            let out = cdf_project(&robot, q, cell, 1).unwrap();
            assert_eq!(&out, q);
            assert!(sdf_distance(&robot, &out, &cell.point).abs() < 0.05);
        }
    }

    #[test]
    fn planning_is_deterministic_and_trivial_without_obstacles() {
        let robot = RobotModel::two_link();
        let scene = Scene::new(vec![], 8);
        let params = PlanBenchParams {
            trials: 4,
            planner: PlannerConfig {
                horizon: 400,
                ..Default::default()
            },
            ..Default::default()
        };
        let a = bench_planning(&robot, &scene, &params, 5).unwrap();
        assert!(a.rows.iter().all(|r| r.success_rate == 1.0), "{a:?}");
        let b = bench_planning(&robot, &scene, &params, 5).unwrap();
        let strip = |r: &BenchReport| r.rows.iter().map(|r| (r.successes, r.mean_error, r.mean_time_steps)).collect::<Vec<_>>();
        assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn zero_noise_matches_noiseless_run() {
        let robot = RobotModel::two_link();
        let field = ExactField {
            robot: &robot,
            solver: SolverParams::default().with_seeds(64),
            rng_seed: 2,
        };
        let params = NoiseBenchParams {
            sigmas: vec![0.0, 0.0],
            targets: 3,
            inits: 5,
            ..Default::default()
        };
        let r = bench_noise(&robot, &field, "exact", &params, 9).unwrap();
        assert_eq!(r.rows[0].successes, r.rows[1].successes);
        assert_eq!(r.rows[0].mean_error, r.rows[1].mean_error);
    }

    #[test]
    fn csv_and_json_mirror() {
        let robot = RobotModel::two_link();
        let grid = small_grid(&robot);
        let params = IkBenchParams {
            targets: 2,
            inits: 4,
            baseline: SolverParams::default().with_seeds(1),
            ..Default::default()
        };
        let report = bench_ik(&robot, &grid, &params, 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (csv_path, json_path) = (dir.path().join("r.csv"), dir.path().join("r.json"));
        report.save(Some(&csv_path), Some(&json_path)).unwrap();
        let back = BenchReport::from_json(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
        assert_eq!(back, report);
        let mut rd = csv::Reader::from_path(&csv_path).unwrap();
        assert_eq!(rd.headers().unwrap().iter().collect::<Vec<_>>(), BenchReport::CSV_HEADER);
        assert_eq!(rd.records().count(), report.rows.len());
    }
}
