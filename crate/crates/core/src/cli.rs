//! The `cdfkit` command line tool. Exit codes: 0 success, 1 runtime
//! failure, 2 usage error.

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::bench::{
    bench_ik, bench_noise, bench_planning, BackendKind, BenchReport, IkBenchParams, NoiseBenchParams, PlanBenchParams,
    PlanMethod,
};
use crate::cdf::{build_grid, load_grid, save_grid, CdfGrid, CellStatus, ExactField, FusedCdf, GridBounds, Projector};
use crate::config::{resolve, FileConfig};
use crate::dataset::export_dataset;
use crate::error::Error;
use crate::io;
use crate::kinematics::{JointConfig, Point2, RobotModel};
use crate::neural::{MlpModel, NeuralField};
use crate::planner::{
    ilqr_plan, reactive_rollout, rollout_metrics, DistanceBackend, PlannerConfig, PointCloudCdf, Scene, SdfBackend, Trajectory,
};
use crate::plot::{render_svg, sample_field};
use crate::robot_sdf::{sdf_distance, sdf_min_over};
use crate::zero_level_set::{find_zero_configs, ContactSamples, SolverParams, ZeroSet};

#[derive(Debug, Parser)]
#[command(name = "cdfkit", version, about = "Configuration-space distance fields for planar arms")]
pub struct Cli {
    /// Worker threads for parallel sections; defaults to all cores.
    #[arg(long, global = true, env = "CDFKIT_THREADS")]
    pub threads: Option<usize>,
    /// JSON settings file; flags and CDFKIT_* variables override it.
    #[arg(long, global = true, env = "CDFKIT_CONFIG")]
    pub config: Option<PathBuf>,
    /// Robot file; defaults to the two-link arm.
    #[arg(long, global = true, env = "CDFKIT_ROBOT")]
    pub robot: Option<PathBuf>,
    #[arg(long = "rng-seed", global = true, env = "CDFKIT_RNG_SEED")]
    pub rng_seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Precompute zero sets on a workspace grid.
    BuildGrid(BuildGridArgs),
    /// Write training rows as JSONL.
    ExportDataset(ExportArgs),
    /// Field value and gradient for a JSON request on stdin.
    Query(FieldArgs),
    /// Gradient projection for a JSON request on stdin.
    Project(FieldArgs),
    /// Plan between two configurations and print the trajectory.
    Plan(PlanArgs),
    /// Inverse kinematics throughput against the optimization baseline.
    BenchIk(BenchIkArgs),
    /// Planning success over seeded start and goal pairs.
    BenchPlan(BenchPlanArgs),
    /// Projection accuracy under target noise.
    BenchNoise(BenchNoiseArgs),
    /// Configuration-space contours and trajectories as SVG and CSV.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct SolverArgs {
    /// Random initial configurations per zero-set search.
    #[arg(long, env = "CDFKIT_SEEDS")]
    pub seeds: Option<usize>,
    /// Contact tolerance in workspace units.
    #[arg(long, env = "CDFKIT_EPS")]
    pub eps: Option<f64>,
    #[arg(long = "max-iters", env = "CDFKIT_MAX_ITERS")]
    pub max_iters: Option<usize>,
}

impl SolverArgs {
    fn apply(&self, mut base: SolverParams) -> SolverParams {
        base.seeds = self.seeds.unwrap_or(base.seeds);
        base.epsilon = self.eps.unwrap_or(base.epsilon);
        base.max_iters = self.max_iters.unwrap_or(base.max_iters);
        base
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct PlannerArgs {
    #[arg(long, env = "CDFKIT_GAMMA")]
    pub gamma: Option<f64>,
    #[arg(long, env = "CDFKIT_DT")]
    pub dt: Option<f64>,
    #[arg(long, env = "CDFKIT_HORIZON")]
    pub horizon: Option<usize>,
    /// Control effort weight.
    #[arg(long = "r-weight", env = "CDFKIT_R_WEIGHT")]
    pub r: Option<f64>,
    /// Tracking weight of the reactive controller.
    #[arg(long = "h-weight", env = "CDFKIT_H_WEIGHT")]
    pub h: Option<f64>,
    /// Terminal weight of iLQR.
    #[arg(long = "q1-weight", env = "CDFKIT_Q1_WEIGHT")]
    pub q1: Option<f64>,
    /// Collision weight of iLQR.
    #[arg(long = "q2-weight", env = "CDFKIT_Q2_WEIGHT")]
    pub q2: Option<f64>,
    #[arg(long = "u-max", env = "CDFKIT_U_MAX")]
    pub u_max: Option<f64>,
}

impl PlannerArgs {
    fn apply(&self, mut c: PlannerConfig) -> PlannerConfig {
        c.gamma = self.gamma.unwrap_or(c.gamma);
        c.dt = self.dt.unwrap_or(c.dt);
        c.horizon = self.horizon.unwrap_or(c.horizon);
        c.r = self.r.unwrap_or(c.r);
        c.h = self.h.unwrap_or(c.h);
        c.q1 = self.q1.unwrap_or(c.q1);
        c.q2 = self.q2.unwrap_or(c.q2);
        c.u_max = self.u_max.unwrap_or(c.u_max);
        c
    }
}

#[derive(Debug, Args)]
pub struct BuildGridArgs {
    /// x0,y0,x1,y1; defaults to the square covering the robot's reach.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub bounds: Option<Vec<f64>>,
    /// Cells per axis, `T` or `TX,TY`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "40")]
    pub res: Vec<usize>,
    /// Samples kept per cell.
    #[arg(long, env = "CDFKIT_FPS")]
    pub fps: Option<usize>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub rows: usize,
    /// Configurations drawn per sampled point.
    #[arg(long, default_value_t = 100)]
    pub b2: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Default, Args)]
pub struct FieldSource {
    /// Precomputed grid; without it (or --weights) the zero sets are searched on demand.
    #[arg(long, conflicts_with = "weights")]
    pub grid: Option<PathBuf>,
    /// Learned field weights.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct FieldArgs {
    #[command(flatten)]
    pub source: FieldSource,
    /// Read the request from this file instead of stdin.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Projection steps when the request does not say.
    #[arg(long, default_value_t = 2)]
    pub iters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Cdf,
    Sdf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Reactive,
    Ilqr,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Scene file; defaults to the two-circle benchmark.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "cdf")]
    pub backend: BackendArg,
    #[arg(long, value_enum, default_value = "reactive")]
    pub method: MethodArg,
    /// Comma-separated joint angles; with --goal, replaces the stdin request.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "goal")]
    pub start: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "start")]
    pub goal: Option<Vec<f64>>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Use the fused grid field instead of on-demand zero sets.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long, env = "CDFKIT_FPS")]
    pub fps: Option<usize>,
    #[command(flatten)]
    pub planner: PlannerArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Write the trajectory here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportOut {
    #[arg(long = "out-csv")]
    pub out_csv: Option<PathBuf>,
    #[arg(long = "out-json")]
    pub out_json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchIkArgs {
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub targets: usize,
    #[arg(long, default_value_t = 1000)]
    pub inits: usize,
    #[arg(long, default_value_t = 0.05)]
    pub threshold: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub out: ReportOut,
}

#[derive(Debug, Args)]
pub struct BenchPlanArgs {
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0.05)]
    pub threshold: f64,
    /// Skip the iLQR rows.
    #[arg(long)]
    pub reactive_only: bool,
    /// Run trials one at a time for clean timings.
    #[arg(long)]
    pub serial: bool,
    #[arg(long, env = "CDFKIT_FPS")]
    pub fps: Option<usize>,
    #[command(flatten)]
    pub planner: PlannerArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub out: ReportOut,
}

#[derive(Debug, Args)]
pub struct BenchNoiseArgs {
    #[command(flatten)]
    pub source: FieldSource,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0,0.01,0.02,0.03")]
    pub sigmas: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    pub targets: usize,
    #[arg(long, default_value_t = 100)]
    pub inits: usize,
    #[arg(long, default_value_t = 2)]
    pub iters: usize,
    #[arg(long, default_value_t = 0.05)]
    pub threshold: f64,
    #[command(flatten)]
    pub out: ReportOut,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "cdf")]
    pub field: BackendArg,
    /// Fuse cells of this grid instead of searching zero sets per point.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Samples per joint axis.
    #[arg(long, default_value_t = 200)]
    pub res: usize,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0.1,0.3,0.5,0.7,0.9")]
    pub levels: Vec<f64>,
    /// Trajectory files written by `plan`; repeatable.
    #[arg(long)]
    pub traj: Vec<PathBuf>,
    #[arg(long, env = "CDFKIT_FPS")]
    pub fps: Option<usize>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long = "out-svg")]
    pub out_svg: PathBuf,
    #[arg(long = "out-csv")]
    pub out_csv: Option<PathBuf>,
}

type In = dyn BufRead + Send;
type Out = dyn Write + Send;

/// Failures split by exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Resolved global settings.
struct Ctx<'a> {
    robot: RobotModel,
    rng_seed: u64,
    file: FileConfig,
    stdin: &'a mut In,
    stdout: &'a mut Out,
    stderr: &'a mut Out,
}

impl Ctx<'_> {
    fn solver(&self, args: &SolverArgs) -> CliResult<SolverParams> {
        let s = args.apply(self.file.solver);
        s.validate().map_err(|e| usage(e.to_string()))?;
        Ok(s)
    }

    fn fps(&self, flag: Option<usize>) -> usize {
        resolve(flag, self.file.fps_k, 32)
    }

    fn out(&mut self, text: &str) -> CliResult<()> {
        writeln!(self.stdout, "{text}").map_err(|e| Error::io("<stdout>", e))?;
        Ok(())
    }

    fn warn(&mut self, text: &str) {
        let _ = writeln!(self.stderr, "warning: {text}");
    }

    fn request<T: for<'de> Deserialize<'de>>(&mut self, input: &Option<PathBuf>) -> CliResult<T> {
        let text = match input {
            Some(path) => std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?,
            None => {
                let mut s = String::new();
                self.stdin.read_to_string(&mut s).map_err(|e| Error::io("<stdin>", e))?;
                s
            }
        };
        Ok(serde_json::from_str(&text).map_err(|e| Error::parse(&text, e))?)
    }

    fn grid(&self, path: &Path) -> CliResult<CdfGrid> {
        let grid = load_grid(path)?;
        grid.bind(&self.robot)?;
        Ok(grid)
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run<I, T>(args: I, stdin: &mut In, stdout: &mut Out, stderr: &mut Out) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{text}");
            } else {
                let _ = write!(stderr, "{text}");
            }
            return if code == 0 { 0 } else { 2 };
        }
    };
    let outcome = setup(cli, stdin, stdout, stderr);
    match outcome {
        Ok(()) => 0,
        Err((CliError::Usage(msg), err)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
        Err((CliError::Runtime(e), err)) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn setup<'a>(
    cli: Cli,
    stdin: &'a mut In,
    stdout: &'a mut Out,
    stderr: &'a mut Out,
) -> std::result::Result<(), (CliError, &'a mut Out)> {
    let file = match &cli.config {
        Some(path) => match FileConfig::load(path) {
            Ok(f) => f,
            Err(e) => return Err((CliError::Runtime(e), stderr)),
        },
        None => FileConfig::default(),
    };
    let robot_path = cli.robot.clone().or(file.robot.clone());
    let robot = match robot_path {
        Some(path) => match RobotModel::load(path) {
            Ok(r) => r,
            Err(e) => return Err((CliError::Runtime(e), stderr)),
        },
        None => RobotModel::two_link(),
    };
    let threads = resolve(cli.threads, file.threads, 0);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => return Err((usage(format!("thread pool: {e}")), stderr)),
    };
    let mut ctx = Ctx {
        robot,
        rng_seed: resolve(cli.rng_seed, file.rng_seed, 0),
        file,
        stdin,
        stdout,
        stderr,
    };
    match pool.install(|| dispatch(&cli.command, &mut ctx)) {
        Ok(()) => Ok(()),
        Err(e) => Err((e, ctx.stderr)),
    }
}

fn dispatch(cmd: &Command, ctx: &mut Ctx) -> CliResult<()> {
    match cmd {
        Command::BuildGrid(a) => cmd_build_grid(a, ctx),
        Command::ExportDataset(a) => cmd_export(a, ctx),
        Command::Query(a) => cmd_query(a, ctx),
        Command::Project(a) => cmd_project(a, ctx),
        Command::Plan(a) => cmd_plan(a, ctx),
        Command::BenchIk(a) => cmd_bench_ik(a, ctx),
        Command::BenchPlan(a) => cmd_bench_plan(a, ctx),
        Command::BenchNoise(a) => cmd_bench_noise(a, ctx),
        Command::Plot(a) => cmd_plot(a, ctx),
    }
}

#[derive(Serialize)]
struct BuildSummary {
    cells: usize,
    occupied: usize,
    unreachable: usize,
    not_converged: usize,
    out: PathBuf,
}

fn cmd_build_grid(a: &BuildGridArgs, ctx: &mut Ctx) -> CliResult<()> {
    let bounds = match a.bounds.as_deref() {
        None => GridBounds::reachable(&ctx.robot),
        Some([x0, y0, x1, y1]) => GridBounds::new(*x0, *y0, *x1, *y1).map_err(|e| usage(e.to_string()))?,
        Some(_) => return Err(usage("--bounds takes four numbers x0,y0,x1,y1")),
    };
    let res = match a.res[..] {
        [t] => [t, t],
        [tx, ty] => [tx, ty],
        _ => return Err(usage("--res takes T or TX,TY")),
    };
    let solver = ctx.solver(&a.solver)?;
    let fps = ctx.fps(a.fps);
    let (grid, report) = build_grid(&ctx.robot, bounds, res, &solver, fps, ctx.rng_seed).map_err(|e| match e {
        Error::Input(m) => usage(m),
        e => e.into(),
    })?;
    save_grid(&grid, &a.out)?;
    let summary = BuildSummary {
        cells: res[0] * res[1],
        occupied: report.count(CellStatus::Occupied),
        unreachable: report.count(CellStatus::Unreachable),
        not_converged: report.count(CellStatus::NotConverged),
        out: a.out.clone(),
    };
    if summary.occupied == 0 {
        ctx.warn("no cell is reachable; the grid is empty");
    }
    if summary.not_converged > 0 {
        ctx.warn(&format!("{} reachable cells found no contact; try more seeds", summary.not_converged));
    }
    ctx.out(&serde_json::to_string(&summary).expect("summary serializes"))
}

fn cmd_export(a: &ExportArgs, ctx: &mut Ctx) -> CliResult<()> {
    let grid = ctx.grid(&a.grid)?;
    let field = grid.bind(&ctx.robot)?;
    if grid.cells.is_empty() {
        return Err(Error::NoZeroSetData.into());
    }
    if a.b2 == 0 {
        return Err(usage("--b2 must be at least 1"));
    }
    let mut result = Ok(0);
    let written = io::with_atomic_writer(&a.out, |w| {
        result = export_dataset(&field, a.rows, a.b2, ctx.rng_seed, w);
        // Failing here drops the temporary file instead of renaming it.
        result.as_ref().map(|_| ()).map_err(|e| std::io::Error::other(e.to_string()))
    });
    let rows = result?;
    written?;
    ctx.out(&format!(r#"{{"rows":{rows},"out":{}}}"#, serde_json::to_string(&a.out).expect("path serializes")))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldRequest {
    q: Vec<f64>,
    #[serde(default)]
    point: Option<[f64; 2]>,
    #[serde(default)]
    points: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    iters: Option<usize>,
}

impl FieldRequest {
    fn points(&self) -> CliResult<Vec<Point2>> {
        match (&self.point, &self.points) {
            (Some(p), None) => Ok(vec![Point2::new(p[0], p[1])]),
            (None, Some(ps)) if !ps.is_empty() => Ok(ps.iter().map(|p| Point2::new(p[0], p[1])).collect()),
            _ => Err(Error::Input("request needs exactly one of `point` or a non-empty `points`".into()).into()),
        }
    }
}

#[derive(Debug, Serialize)]
struct QueryResponse {
    value: f64,
    gradient: Vec<f64>,
    nearest_config: Option<Vec<f64>>,
    contact_link: Option<usize>,
}

enum Source {
    Grid(CdfGrid),
    Neural(MlpModel),
    Exact(SolverParams),
}

fn field_source(s: &FieldSource, ctx: &Ctx) -> CliResult<Source> {
    if let Some(path) = &s.grid {
        return Ok(Source::Grid(ctx.grid(path)?));
    }
    if let Some(path) = &s.weights {
        let model = MlpModel::load(path)?;
        if model.joint_dim() != ctx.robot.dof() {
            return Err(Error::Dimension {
                expected: ctx.robot.dof(),
                found: model.joint_dim(),
            }
            .into());
        }
        return Ok(Source::Neural(model));
    }
    Ok(Source::Exact(ctx.solver(&s.solver)?))
}

fn cmd_query(a: &FieldArgs, ctx: &mut Ctx) -> CliResult<()> {
    let req: FieldRequest = ctx.request(&a.input)?;
    ctx.robot.check_dim(&req.q)?;
    let points = req.points()?;
    let resp = match field_source(&a.source, ctx)? {
        Source::Grid(grid) => {
            let q = grid.bind(&ctx.robot)?.query_points(&points, &req.q)?;
            from_query(q)
        }
        Source::Exact(solver) => {
            let sets: Vec<ZeroSet> = points
                .iter()
                .map(|p| find_zero_configs(&ctx.robot, p, &solver, ctx.rng_seed))
                .collect();
            let parts: Vec<&dyn ContactSamples> = sets.iter().map(|z| z as &dyn ContactSamples).collect();
            from_query(FusedCdf::new(parts).query(&req.q)?)
        }
        Source::Neural(model) => {
            let mut best: Option<(f64, Vec<f64>)> = None;
            for p in &points {
                let (v, g) = model.value_and_grad_q(p, &req.q)?;
                if best.as_ref().is_none_or(|(b, _)| v < *b) {
                    best = Some((v, g.iter().copied().collect()));
                }
            }
            let (value, gradient) = best.expect("at least one point");
            QueryResponse {
                value,
                gradient,
                nearest_config: None,
                contact_link: None,
            }
        }
    };
    ctx.out(&serde_json::to_string(&resp).expect("response serializes"))
}

fn from_query(q: crate::cdf::CdfQuery) -> QueryResponse {
    QueryResponse {
        value: q.value,
        gradient: q.gradient.iter().copied().collect(),
        nearest_config: Some(q.nearest_config.0),
        contact_link: Some(q.contact_link),
    }
}

#[derive(Debug, Serialize)]
struct ProjectResponse {
    q: Vec<f64>,
    /// Task-space distance from the projected robot surface to the point.
    residual: f64,
}

fn cmd_project(a: &FieldArgs, ctx: &mut Ctx) -> CliResult<()> {
    let req: FieldRequest = ctx.request(&a.input)?;
    ctx.robot.check_dim(&req.q)?;
    let points = req.points()?;
    let [p] = points[..] else {
        return Err(Error::Input("projection takes a single `point`".into()).into());
    };
    let iters = req.iters.unwrap_or(a.iters);
    if iters == 0 {
        return Err(usage("--iters must be at least 1"));
    }
    let q = JointConfig(req.q.clone());
    let source = field_source(&a.source, ctx)?;
    let out = match &source {
        Source::Grid(grid) => grid.bind(&ctx.robot)?.project(&p, &q, iters)?,
        Source::Neural(model) => {
            let field = NeuralField { model, robot: &ctx.robot };
            let target = field.target(&p)?;
            target.project(&q, iters)?
        }
        Source::Exact(solver) => {
            let field = ExactField {
                robot: &ctx.robot,
                solver: *solver,
                rng_seed: ctx.rng_seed,
            };
            let target = field.target(&p)?;
            target.project(&q, iters)?
        }
    };
    let resp = ProjectResponse {
        residual: sdf_distance(&ctx.robot, &out, &p),
        q: out.0,
    };
    ctx.out(&serde_json::to_string(&resp).expect("response serializes"))
}

fn load_scene(path: &Option<PathBuf>) -> CliResult<Scene> {
    let scene = match path {
        Some(p) => Scene::load(p)?,
        None => Scene::planar_benchmark(),
    };
    scene.validate()?;
    Ok(scene)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanRequest {
    start: Vec<f64>,
    goal: Vec<f64>,
}

fn planner_config(args: &PlannerArgs, ctx: &Ctx) -> CliResult<PlannerConfig> {
    let c = args.apply(ctx.file.planner);
    c.params(ctx.robot.dof()).map_err(|e| usage(e.to_string()))?;
    Ok(c)
}

fn cmd_plan(a: &PlanArgs, ctx: &mut Ctx) -> CliResult<()> {
    let req = match (&a.start, &a.goal) {
        (Some(start), Some(goal)) => PlanRequest {
            start: start.clone(),
            goal: goal.clone(),
        },
        _ => ctx.request(&a.input)?,
    };
    let scene = load_scene(&a.scene)?;
    let params = planner_config(&a.planner, ctx)?.params(ctx.robot.dof())?;
    let points = scene.points();
    let robot = &ctx.robot;

    let grid = a.grid.as_ref().map(|p| ctx.grid(p)).transpose()?;
    let bound = grid.as_ref().map(|g| g.bind(robot)).transpose()?;
    let fused = bound.as_ref().map(|f| f.fuse(&points)).transpose()?;
    let cloud;
    let sdf = SdfBackend { robot, points: points.clone() };
    let backend: &dyn DistanceBackend = match (a.backend, &fused) {
        (BackendArg::Sdf, _) => &sdf,
        (BackendArg::Cdf, Some(f)) => f,
        (BackendArg::Cdf, None) => {
            let solver = ctx.solver(&a.solver)?;
            cloud = PointCloudCdf::build(robot, &points, &solver, ctx.fps(a.fps), ctx.rng_seed);
            &cloud
        }
    };
    let traj = match a.method {
        MethodArg::Reactive => reactive_rollout(robot, backend, &params, &req.start, &req.goal)?,
        MethodArg::Ilqr => ilqr_plan(robot, backend, &params, &req.start, &req.goal)?,
    };
    let metrics = rollout_metrics(robot, &scene, &traj, &req.goal, 0.05);
    let _ = writeln!(ctx.stderr, "{}", serde_json::to_string(&metrics).expect("metrics serialize"));
    match &a.out {
        Some(path) => io::write_atomic(path, traj.to_json().as_bytes())?,
        None => ctx.out(&traj.to_json())?,
    }
    Ok(())
}

fn save_report(report: &BenchReport, out: &ReportOut, ctx: &mut Ctx) -> CliResult<()> {
    report.save(out.out_csv.as_deref(), out.out_json.as_deref())?;
    ctx.out(&report.to_json())
}

fn cmd_bench_ik(a: &BenchIkArgs, ctx: &mut Ctx) -> CliResult<()> {
    let grid = ctx.grid(&a.grid)?;
    let params = IkBenchParams {
        targets: a.targets,
        inits: a.inits,
        threshold: a.threshold,
        baseline: ctx.solver(&a.solver)?,
        ..Default::default()
    };
    let report = bench_ik(&ctx.robot, &grid, &params, ctx.rng_seed)?;
    save_report(&report, &a.out, ctx)
}

fn cmd_bench_plan(a: &BenchPlanArgs, ctx: &mut Ctx) -> CliResult<()> {
    let scene = load_scene(&a.scene)?;
    let mut params = PlanBenchParams {
        trials: a.trials,
        planner: planner_config(&a.planner, ctx)?,
        solver: ctx.solver(&a.solver)?,
        fps_k: resolve(a.fps, ctx.file.fps_k, PlanBenchParams::default().fps_k),
        threshold: a.threshold,
        parallel: !a.serial,
        ..Default::default()
    };
    if a.reactive_only {
        params.methods = vec![(PlanMethod::Reactive, BackendKind::Cdf), (PlanMethod::Reactive, BackendKind::Sdf)];
    }
    let report = bench_planning(&ctx.robot, &scene, &params, ctx.rng_seed)?;
    save_report(&report, &a.out, ctx)
}

fn cmd_bench_noise(a: &BenchNoiseArgs, ctx: &mut Ctx) -> CliResult<()> {
    if a.sigmas.iter().any(|s| !(*s >= 0.0)) {
        return Err(usage("--sigmas must be non-negative"));
    }
    let params = NoiseBenchParams {
        sigmas: a.sigmas.clone(),
        targets: a.targets,
        inits: a.inits,
        iters: a.iters,
        threshold: a.threshold,
    };
    let source = field_source(&a.source, ctx)?;
    let robot = &ctx.robot;
    let report = match &source {
        Source::Grid(grid) => bench_noise(robot, &grid.bind(robot)?, "cdf-grid", &params, ctx.rng_seed)?,
        Source::Neural(model) => bench_noise(robot, &NeuralField { model, robot }, "cdf-neural", &params, ctx.rng_seed)?,
        Source::Exact(solver) => {
            let field = ExactField {
                robot,
                solver: *solver,
                rng_seed: ctx.rng_seed,
            };
            bench_noise(robot, &field, "cdf-exact", &params, ctx.rng_seed)?
        }
    };
    save_report(&report, &a.out, ctx)
}

fn cmd_plot(a: &PlotArgs, ctx: &mut Ctx) -> CliResult<()> {
    if a.res < 2 {
        return Err(usage("--res must be at least 2"));
    }
    let scene = load_scene(&a.scene)?;
    let trajectories: Vec<(String, Trajectory)> = a
        .traj
        .iter()
        .map(|p| {
            let t = Trajectory::from_json(&std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?;
            Ok((p.display().to_string(), t))
        })
        .collect::<crate::Result<_>>()?;
    let points = scene.points();
    let robot = &ctx.robot;
    let res = [a.res, a.res];
    let sample = match a.field {
        BackendArg::Sdf => sample_field(robot, res, &|q: &[f64]| sdf_min_over(robot, q, &points).map(|s| s.distance))?,
        BackendArg::Cdf => match &a.grid {
            Some(path) => {
                let grid = ctx.grid(path)?;
                let field = grid.bind(robot)?;
                let fused = field.fuse(&points)?;
                sample_field(robot, res, &|q: &[f64]| fused.value(q))?
            }
            None => {
                let solver = ctx.solver(&a.solver)?;
                let cloud = PointCloudCdf::build(robot, &points, &solver, ctx.fps(a.fps), ctx.rng_seed);
                sample_field(robot, res, &|q: &[f64]| cloud.value(q))?
            }
        },
    };
    let named: Vec<(String, &Trajectory)> = trajectories.iter().map(|(n, t)| (n.clone(), t)).collect();
    io::write_atomic(&a.out_svg, render_svg(&sample, &a.levels, &named).as_bytes())?;
    if let Some(path) = &a.out_csv {
        let mut buf = Vec::new();
        sample.write_csv(&mut buf)?;
        io::write_atomic(path, &buf)?;
    }
    let rings: Vec<usize> = a.levels.iter().map(|l| sample.contours(*l).len()).collect();
    ctx.out(&format!(r#"{{"levels":{:?},"contours":{:?}}}"#, a.levels, rings))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str], stdin: &str) -> (i32, String, String) {
        let mut input = std::io::Cursor::new(stdin.as_bytes().to_vec());
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("cdfkit").chain(args.iter().copied()), &mut input, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run_str(&["frobnicate"], "").0, 2);
        assert_eq!(run_str(&["build-grid"], "").0, 2);
        assert_eq!(run_str(&["build-grid", "--res", "x", "--out", "g.json"], "").0, 2);
        assert_eq!(run_str(&["build-grid", "--res", "1", "--out", "g.json"], "").0, 2);
        assert_eq!(run_str(&["--help"], "").0, 0);
    }

    #[test]
    fn query_with_exact_field() {
        let (code, out, err) = run_str(&["query", "--seeds", "64"], r#"{"q":[0.3,0.2],"point":[2.5,1.0]}"#);
        assert_eq!(code, 0, "{err}");
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!(v["value"].as_f64().unwrap() >= 0.0);
        assert_eq!(v["gradient"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn bad_request_is_runtime_error() {
        let (code, _, err) = run_str(&["query"], r#"{"q":[0.3,0.2]"#);
        assert_eq!(code, 1);
        assert!(err.contains("parse error"), "{err}");
        let (code, _, _) = run_str(&["query"], r#"{"q":[0.3],"point":[1,1]}"#);
        assert_eq!(code, 1);
    }
}
