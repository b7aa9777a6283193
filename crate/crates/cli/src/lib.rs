//! Batch driver: runs the pipeline on photos or fixture scenes, scores
//! fixture suites against ground truth, and captures new fixtures.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use autotour::config::{Config, Mode};
use autotour::evalkit::{score_scene, system_metrics, weighted_score, GroundTruth, MetricWeights, SystemCounts};
use autotour::geo::GeoPoint;
use autotour::osm::{build_overpass_query, parse_overpass, ElementKind, ElementSource, OverpassClient};
use autotour::pipeline::Pipeline;
use autotour::presentation::{serialize_result, SceneResult};
use autotour::scene::CameraPose;

pub const EXIT_OK: u8 = 0;
pub const EXIT_PIPELINE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "autotour", version, about = "Annotate photo landmarks with OpenStreetMap features")]
pub struct Cli {
    /// TOML config file; defaults to $AUTOTOUR_CONFIG.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Fixture root directory.
    #[arg(long, global = true)]
    pub fixtures: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the pipeline on a photo or on fixture scenes.
    Run(RunArgs),
    /// Score fixture scenes against their ground truth.
    Evaluate(EvaluateArgs),
    /// Manage fixtures.
    Fixture {
        #[command(subcommand)]
        command: FixtureCommand,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Live,
    Fixture,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, conflicts_with = "scene")]
    pub photo: Option<PathBuf>,
    /// Fixture scene(s) carrying their own photo and pose.
    #[arg(long, num_args = 1..)]
    pub scene: Vec<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub lat: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub lon: Option<f64>,
    #[arg(long)]
    pub heading: Option<f64>,
    #[arg(long)]
    pub fov: Option<f64>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Mock scenario and fixture map used in fixture mode.
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Scenes processed in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Glob over scene directories, e.g. "fixtures/eval_*".
    #[arg(long)]
    pub scenes: String,
    #[arg(long, default_value = "out/eval")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Subcommand)]
pub enum FixtureCommand {
    /// Store a live Overpass response as a fixture scene.
    Capture {
        #[arg(long, allow_hyphen_values = true)]
        lat: f64,
        #[arg(long, allow_hyphen_values = true)]
        lon: f64,
        #[arg(long, default_value_t = 300.0)]
        radius: f64,
        #[arg(long)]
        name: String,
        #[arg(long)]
        force: bool,
        /// Overpass endpoint; defaults to the configured one.
        #[arg(long)]
        endpoint: Option<String>,
    },
}

/// Errors split by exit code.
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Pipeline(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Pipeline(_) => EXIT_PIPELINE,
        }
    }
}

fn cfg_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

fn pipe_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Pipeline(e.into())
}

/// Pose and photo of a fixture scene, from `scene.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneSpec {
    pub lat: f64,
    pub lon: f64,
    pub heading_deg: f64,
    #[serde(default)]
    pub fov_deg: Option<f64>,
    #[serde(default = "default_photo")]
    pub photo: String,
}

fn default_photo() -> String {
    "photo.png".into()
}

impl SceneSpec {
    pub fn load(dir: &Path) -> anyhow::Result<Self> {
        let path = dir.join("scene.json");
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// One unit of work for `run` and `evaluate`.
#[derive(Debug, Clone)]
pub struct Job {
    pub name: String,
    pub photo: PathBuf,
    pub camera: CameraPose,
    pub scenario: Option<String>,
}

pub fn camera_from(cfg: &Config, lat: f64, lon: f64, heading: f64, fov: Option<f64>) -> anyhow::Result<CameraPose> {
    let pos = GeoPoint::new(lat, lon).map_err(|e| anyhow::anyhow!("{e}"))?;
    let fov = fov.unwrap_or(cfg.camera.fov_deg);
    CameraPose::with_fov(pos, heading, fov, cfg.camera.fov_margin_deg).map_err(|e| anyhow::anyhow!("{e}"))
}

fn load_config(cli: &Cli) -> Result<Config, Failure> {
    let mut cfg = Config::load(cli.config.as_deref()).map_err(cfg_err)?;
    if let Some(f) = &cli.fixtures {
        cfg.fixtures_root = f.clone();
    }
    Ok(cfg)
}

/// Runs one job and returns the result.
pub fn execute(cfg: &Config, job: &Job) -> Result<SceneResult, Failure> {
    let photo = fs::read(&job.photo)
        .with_context(|| format!("reading photo {}", job.photo.display()))
        .map_err(cfg_err)?;
    if photo.is_empty() {
        return Err(cfg_err(anyhow::anyhow!("photo {} is empty", job.photo.display())));
    }
    let scenario = job.scenario.as_deref().unwrap_or(&cfg.vlm.scenario);
    let pipeline = Pipeline::from_config(cfg, scenario).map_err(cfg_err)?;
    pipeline
        .run(&photo, &job.camera, &autotour::pipeline::no_progress)
        .map_err(pipe_err)
}

fn parallel<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let jobs = jobs.max(1);
    let mut out = Vec::with_capacity(items.len());
    for chunk in items.chunks(jobs) {
        let part: Vec<R> = std::thread::scope(|s| {
            let hs: Vec<_> = chunk.iter().map(|it| s.spawn(|| f(it))).collect();
            hs.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        });
        out.extend(part);
    }
    out
}

fn write_result(out: &Path, name: &str, result: &SceneResult) -> anyhow::Result<PathBuf> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join(format!("{name}.result.json"));
    fs::write(&path, serialize_result(result))?;
    let timings = serde_json::to_string_pretty(&result.timings)? + "\n";
    fs::write(out.join(format!("{name}.timings.json")), timings)?;
    Ok(path)
}

fn print_timings(name: &str, result: &SceneResult) {
    println!("{name}: {} annotations", result.annotations.len());
    for t in &result.timings {
        println!("  {:<16} {:>9.1} ms", t.stage, t.ms);
    }
}

fn run_jobs(cli: &Cli, args: &RunArgs) -> Result<(), Failure> {
    let mut cfg = load_config(cli)?;
    if let Some(m) = args.mode {
        cfg.mode = match m {
            ModeArg::Live => Mode::Live,
            ModeArg::Fixture => Mode::Fixture,
        };
    }
    if let Some(r) = args.radius {
        cfg.overpass.radius_m = r;
    }
    if let Some(t) = args.threshold {
        cfg.matching.threshold = t;
    }
    if let Some(f) = args.fov {
        cfg.camera.fov_deg = f;
    }
    cfg.validate().map_err(cfg_err)?;

    let mut jobs = Vec::new();
    if let Some(photo) = &args.photo {
        let (Some(lat), Some(lon), Some(heading)) = (args.lat, args.lon, args.heading) else {
            return Err(cfg_err(anyhow::anyhow!("--photo needs --lat, --lon and --heading")));
        };
        if !photo.is_file() {
            return Err(cfg_err(anyhow::anyhow!("photo {} not found", photo.display())));
        }
        if cfg.mode == Mode::Fixture && args.scenario.is_none() {
            return Err(cfg_err(anyhow::anyhow!("fixture mode needs --scenario")));
        }
        let camera = camera_from(&cfg, lat, lon, heading, args.fov).map_err(cfg_err)?;
        let name = photo.file_stem().map_or("photo".into(), |s| s.to_string_lossy().into_owned());
        jobs.push(Job {
            name,
            photo: photo.clone(),
            camera,
            scenario: args.scenario.clone(),
        });
    } else if !args.scene.is_empty() {
        for scene in &args.scene {
            let dir = cfg.fixtures_root.join(scene);
            let spec = SceneSpec::load(&dir).map_err(cfg_err)?;
            let camera = camera_from(
                &cfg,
                args.lat.unwrap_or(spec.lat),
                args.lon.unwrap_or(spec.lon),
                args.heading.unwrap_or(spec.heading_deg),
                args.fov.or(spec.fov_deg),
            )
            .map_err(cfg_err)?;
            jobs.push(Job {
                name: scene.clone(),
                photo: dir.join(&spec.photo),
                camera,
                scenario: Some(args.scenario.clone().unwrap_or_else(|| scene.clone())),
            });
        }
    } else {
        return Err(cfg_err(anyhow::anyhow!("give --photo or --scene")));
    }

    let results = parallel(&jobs, args.jobs, |j| execute(&cfg, j));
    let mut first_err = None;
    for (job, r) in jobs.iter().zip(results) {
        match r {
            Ok(result) => {
                let path = write_result(&args.out, &job.name, &result).map_err(cfg_err)?;
                print_timings(&job.name, &result);
                println!("  wrote {}", path.display());
            }
            Err(e) => {
                eprintln!("{}: {}", job.name, describe_failure(&e));
                first_err.get_or_insert(e);
            }
        }
    }
    first_err.map_or(Ok(()), Err)
}

fn describe_failure(f: &Failure) -> String {
    match f {
        Failure::Config(e) | Failure::Pipeline(e) => format!("{e:#}"),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneReport {
    pub scene: String,
    pub counts: SystemCounts,
    pub ir: Option<f64>,
    pub ip: Option<f64>,
    pub mr: Option<f64>,
    pub mp: Option<f64>,
    pub weighted_score: Option<f64>,
    pub hallucinations: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub scenes: Vec<SceneReport>,
    pub skipped: Vec<Skipped>,
    pub aggregate: Option<SceneReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Skipped {
    pub scene: String,
    pub reason: String,
}

fn report_for(scene: &str, counts: SystemCounts, score: Option<f64>, hallucinations: Vec<String>) -> SceneReport {
    let m = system_metrics(&counts).ok();
    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    SceneReport {
        scene: scene.to_string(),
        counts,
        ir: m.map(|m| m.ir).or(ratio(counts.n_correct_identified, counts.n_ground_truth)),
        ip: m.map(|m| m.ip).or(ratio(counts.n_correct_identified, counts.n_total_identified)),
        mr: m.map(|m| m.mr).or(ratio(counts.n_correct_matches, counts.n_ground_truth)),
        mp: m.map(|m| m.mp).or(ratio(counts.n_correct_matches, counts.n_total_matches)),
        weighted_score: score,
        hallucinations,
    }
}

/// Scores every scene directory matching the glob.
pub fn evaluate_scenes(cfg: &Config, pattern: &str, jobs: usize) -> anyhow::Result<EvaluationReport> {
    let mut dirs: Vec<PathBuf> = glob::glob(pattern)?.filter_map(Result::ok).filter(|p| p.is_dir()).collect();
    dirs.sort();
    if dirs.is_empty() {
        bail!("no scene directories match {pattern}");
    }
    let weights = MetricWeights::default();
    let outcomes = parallel(&dirs, jobs, |dir| -> Result<(SceneReport, Option<f64>), Skipped> {
        let name = dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let skip = |reason: String| Skipped {
            scene: name.clone(),
            reason,
        };
        let truth_path = dir.join("ground_truth.json");
        let Ok(text) = fs::read_to_string(&truth_path) else {
            return Err(skip("missing ground truth".into()));
        };
        let truth: GroundTruth = serde_json::from_str(&text).map_err(|e| skip(format!("bad ground truth: {e}")))?;
        let spec = SceneSpec::load(dir).map_err(|e| skip(format!("{e:#}")))?;
        let camera = camera_from(cfg, spec.lat, spec.lon, spec.heading_deg, spec.fov_deg).map_err(|e| skip(format!("{e:#}")))?;
        let mut scene_cfg = cfg.clone();
        if let Some(root) = dir.parent() {
            scene_cfg.fixtures_root = root.to_path_buf();
        }
        let job = Job {
            name: name.clone(),
            photo: dir.join(&spec.photo),
            camera,
            scenario: Some(name.clone()),
        };
        let result = execute(&scene_cfg, &job).map_err(|e| skip(describe_failure(&e)))?;
        let scored = score_scene(&result, &truth);
        let ws = truth.ratings.map(|r| weighted_score(&r, &weights));
        Ok((report_for(&name, scored.counts, ws, scored.hallucinations), ws))
    });
    let mut scenes = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o {
            Ok((r, _)) => scenes.push(r),
            Err(s) => skipped.push(s),
        }
    }
    let aggregate = (!scenes.is_empty()).then(|| {
        let counts: SystemCounts = scenes.iter().map(|s| s.counts).sum();
        let scores: Vec<f64> = scenes.iter().filter_map(|s| s.weighted_score).collect();
        let mean = (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64);
        let halluc = scenes.iter().flat_map(|s| s.hallucinations.clone()).collect();
        report_for("aggregate", counts, mean, halluc)
    });
    Ok(EvaluationReport {
        scenes,
        skipped,
        aggregate,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |v| format!("{v:.3}"))
}

/// Markdown table of the report.
pub fn render_table(r: &EvaluationReport) -> String {
    let mut s = String::from("| scene | IR | IP | MR | MP | S |\n|---|---|---|---|---|---|\n");
    for row in r.scenes.iter().chain(r.aggregate.iter()) {
        s.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} |\n",
            row.scene,
            fmt_opt(row.ir),
            fmt_opt(row.ip),
            fmt_opt(row.mr),
            fmt_opt(row.mp),
            fmt_opt(row.weighted_score)
        ));
    }
    for sk in &r.skipped {
        s.push_str(&format!("\nskipped {}: {}", sk.scene, sk.reason));
    }
    s
}

fn evaluate(cli: &Cli, args: &EvaluateArgs) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    let report = evaluate_scenes(&cfg, &args.scenes, args.jobs).map_err(cfg_err)?;
    fs::create_dir_all(&args.out).map_err(cfg_err)?;
    let json = serde_json::to_string_pretty(&report).map_err(cfg_err)? + "\n";
    fs::write(args.out.join("report.json"), json).map_err(cfg_err)?;
    let table = render_table(&report);
    fs::write(args.out.join("report.md"), &table).map_err(cfg_err)?;
    println!("{table}");
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub query: String,
    pub timestamp: String,
    pub counts: Counts,
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct Counts {
    pub nodes: usize,
    pub ways: usize,
    pub relations: usize,
}

/// Fetches a live response and stores it with its manifest.
pub fn capture_fixture(
    source: &dyn ElementSource,
    root: &Path,
    center: GeoPoint,
    radius: f64,
    name: &str,
    force: bool,
) -> Result<PathBuf, Failure> {
    if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
        return Err(cfg_err(anyhow::anyhow!("invalid fixture name {name:?}")));
    }
    let dir = root.join(name);
    if dir.join("overpass.json").exists() && !force {
        return Err(cfg_err(anyhow::anyhow!("fixture {} exists; pass --force to replace", dir.display())));
    }
    let query = build_overpass_query(center, radius).map_err(cfg_err)?;
    let doc = source.fetch(&query).map_err(pipe_err)?;
    let parsed = parse_overpass(&doc).map_err(pipe_err)?;
    fs::create_dir_all(&dir).map_err(cfg_err)?;
    fs::write(dir.join("overpass.json"), &doc).map_err(cfg_err)?;
    let manifest = Manifest {
        query,
        timestamp: unix_timestamp(),
        counts: Counts {
            nodes: parsed.count(ElementKind::Node),
            ways: parsed.count(ElementKind::Way),
            relations: parsed.count(ElementKind::Relation),
        },
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(cfg_err)? + "\n";
    fs::write(dir.join("manifest.json"), text).map_err(cfg_err)?;
    Ok(dir)
}

fn unix_timestamp() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    format!("{secs}")
}

fn fixture(cli: &Cli, cmd: &FixtureCommand) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    match cmd {
        FixtureCommand::Capture {
            lat,
            lon,
            radius,
            name,
            force,
            endpoint,
        } => {
            let center = GeoPoint::new(*lat, *lon).map_err(cfg_err)?;
            let client = OverpassClient::new(endpoint.clone().unwrap_or(cfg.overpass.endpoint.clone()));
            let dir = capture_fixture(&client, &cfg.fixtures_root, center, *radius, name, *force)?;
            println!("captured {}", dir.display());
            Ok(())
        }
    }
}

pub fn dispatch(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Run(a) => run_jobs(cli, a),
        Command::Evaluate(a) => evaluate(cli, a),
        Command::Fixture { command } => fixture(cli, command),
    }
}

/// Parses arguments and runs; the exit code follows the 0/1/2 contract.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK });
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(f) => {
            eprintln!("error: {}", describe_failure(&f));
            ExitCode::from(f.code())
        }
    }
}
