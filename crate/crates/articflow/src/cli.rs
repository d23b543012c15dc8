//! The `articflow` command line.
//!
//! Exit codes: 0 success, 1 task failure (rollout did not succeed, flow
//! validation above tolerance, dataset pair failing its checks), 2 usage or
//! I/O error.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use articflow_core::camera::{backproject, bounding_box, random_viewpoint, render_depth, ViewpointRanges};
use articflow_core::eval::TrialRecord;
use articflow_core::flow::{fd_flow_oracle, gt_flow, FlowField};
use articflow_core::geom::{sample_surface, PointCloud};
use articflow_core::model::ArticulatedObject;
use articflow_core::policy::{estimate_flow, rollout_with, ContactSource, FlowEstimator};
use articflow_core::procgen::{default_suite, generate, generate_many, ProcKind, ProcSpec};
use articflow_core::{derive_seed, eval::SuiteObject};
use clap::{Args, Parser, Subcommand};

use crate::config::{parse_estimator, FileConfig, GraspSection, ObservationSection, RolloutSection};
use crate::error::{write_bytes, Error, Result};
use crate::{cloud_io, native, records, suite, validate};

pub const EXIT_OK: i32 = 0;
pub const EXIT_TASK_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Largest allowed gap between closed-form and finite-difference flow in a
/// generated dataset pair.
pub const DATASET_FLOW_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Parser)]
#[command(name = "articflow", version, about = "Articulation flow tools: datasets, rollouts, evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write (observation, ground-truth flow) pairs for random joint states.
    GenDataset(GenDatasetArgs),
    /// Run one manipulation episode and print its trial record.
    Rollout(RolloutArgs),
    /// Evaluate estimators over an object suite.
    Eval(EvalArgs),
    /// Compare closed-form flow against finite differences.
    ValidateFlow(ValidateFlowArgs),
    /// Write procedurally generated objects in the native scene format.
    Procgen(ProcgenArgs),
}

#[derive(Debug, Args)]
pub struct ObjectSource {
    /// Native scene (`.scene`) or URDF (`.urdf`) file.
    #[arg(long, conflicts_with = "procgen", required_unless_present = "procgen")]
    pub object: Option<PathBuf>,
    /// Procedural object kind: drawer, door, lid_sphere, lid_flat, cabinet.
    #[arg(long)]
    pub procgen: Option<String>,
    /// Seed of the procedural object.
    #[arg(long, default_value_t = 0)]
    pub object_seed: u64,
}

#[derive(Debug, Args)]
pub struct RolloutFlags {
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub step_size: Option<f64>,
    /// Success threshold on the normalized distance to the goal.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub contact_radius: Option<f64>,
    /// Observe through the rendered depth camera.
    #[arg(long, conflicts_with = "full_obs")]
    pub camera: bool,
    /// Observe area-uniform samples of the whole surface (default).
    #[arg(long)]
    pub full_obs: bool,
}

#[derive(Debug, Args)]
pub struct GenDatasetArgs {
    #[command(flatten)]
    pub source: ObjectSource,
    /// Number of pairs.
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    /// Target joint; by default pairs cycle through all joints.
    #[arg(long)]
    pub joint: Option<String>,
    /// Surface samples per pair in full observation.
    #[arg(long, default_value_t = 4096)]
    pub points: usize,
    /// Render from a random viewpoint instead of sampling the full surface.
    #[arg(long)]
    pub camera: bool,
    /// Pixel stride for camera back-projection.
    #[arg(long, default_value_t = 2)]
    pub stride: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RolloutArgs {
    #[command(flatten)]
    pub source: ObjectSource,
    /// Joint to open; defaults to the first joint.
    #[arg(long)]
    pub joint: Option<String>,
    /// oracle, normal, screw, screw:<deg> or screw:<deg>:<offset>.
    #[arg(long, default_value = "oracle")]
    pub estimator: String,
    /// Starting value of the target joint; defaults to its lower limit.
    #[arg(long)]
    pub start: Option<f64>,
    #[command(flatten)]
    pub flags: RolloutFlags,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the trial record here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory receiving one cloud+flow file per executed step.
    #[arg(long)]
    pub dump_steps: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Object files; the category is the file stem up to its last `_`.
    /// Without files the built-in 20-object suite is used.
    #[arg(long, num_args = 1..)]
    pub objects: Vec<PathBuf>,
    /// Seed of the built-in suite's objects.
    #[arg(long, default_value_t = 0)]
    pub suite_seed: u64,
    /// Comma-separated estimator list.
    #[arg(long, value_delimiter = ',')]
    pub estimators: Option<Vec<String>>,
    /// Comma-separated observation modes: full, camera.
    #[arg(long, value_delimiter = ',')]
    pub modes: Option<Vec<String>>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[command(flatten)]
    pub flags: RolloutFlags,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; output does not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Directory for trials.csv, trials.jsonl, report.json and table.txt.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateFlowArgs {
    /// Validate this object instead of generated ones.
    #[arg(long)]
    pub object: Option<PathBuf>,
    /// Number of generated objects.
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 5)]
    pub states: usize,
    #[arg(long, default_value_t = 500)]
    pub points: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub delta_theta: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ProcgenArgs {
    /// Object kind: drawer, door, lid_sphere, lid_flat, cabinet.
    #[arg(long, required_unless_present = "suite_dir", conflicts_with = "suite_dir")]
    pub kind: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output scene path for a single object.
    #[arg(long, requires = "kind")]
    pub out: Option<PathBuf>,
    /// Write the built-in 20-object suite into this directory.
    #[arg(long)]
    pub suite_dir: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::GenDataset(a) => cmd_gen_dataset(&a),
        Command::Rollout(a) => cmd_rollout(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::ValidateFlow(a) => cmd_validate_flow(&a),
        Command::Procgen(a) => cmd_procgen(&a),
    }
}

fn parse_kind(s: &str) -> Result<ProcKind> {
    ProcKind::parse(s).ok_or_else(|| {
        let names: Vec<_> = ProcKind::ALL.iter().map(|k| k.category()).collect();
        Error::Format(format!("unknown object kind `{s}` (expected one of {})", names.join(", ")))
    })
}

/// The object, its id and its category.
fn load_source(src: &ObjectSource) -> Result<(ArticulatedObject, String, String)> {
    match (&src.object, &src.procgen) {
        (Some(path), None) => {
            let obj = native::load_object(path)?;
            let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("object").to_string();
            Ok((obj, id.clone(), category_of(&id)))
        }
        (None, Some(kind)) => {
            let kind = parse_kind(kind)?;
            let obj = generate(&ProcSpec::new(kind, src.object_seed))?;
            Ok((obj, format!("{}_{}", kind.category(), src.object_seed), kind.category().to_string()))
        }
        _ => Err(Error::Format("exactly one of --object and --procgen is required".to_string())),
    }
}

fn category_of(stem: &str) -> String {
    stem.rsplit_once('_').map_or(stem, |(c, _)| c).to_string()
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn flag_config(flags: &RolloutFlags, seed: Option<u64>) -> FileConfig {
    let mode = if flags.camera { Some(vec!["camera".to_string()]) } else if flags.full_obs { Some(vec!["full".to_string()]) } else { None };
    FileConfig {
        seed,
        rollout: RolloutSection {
            max_steps: flags.steps,
            step_size: flags.step_size,
            delta: flags.delta,
            contact_radius: flags.contact_radius,
            break_angle_deg: None,
        },
        grasp: GraspSection::default(),
        observation: ObservationSection { modes: mode, ..Default::default() },
        ..Default::default()
    }
}

fn merged_config(file: &Option<PathBuf>, flags: FileConfig) -> Result<FileConfig> {
    let base = match file {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    Ok(base.overlay(flags))
}

fn cmd_gen_dataset(a: &GenDatasetArgs) -> Result<i32> {
    if a.count == 0 {
        return Err(Error::Format("empty dataset request".to_string()));
    }
    let (obj, id, _) = load_source(&a.source)?;
    let joints: Vec<String> = match &a.joint {
        Some(j) => {
            obj.joint(j)?;
            vec![j.clone()]
        }
        None => obj.joints().iter().map(|j| j.id.clone()).collect(),
    };
    if joints.is_empty() {
        return Err(Error::Format(format!("object `{id}` has no movable joints")));
    }
    if a.points == 0 || a.stride == 0 {
        return Err(Error::Format("--points and --stride must be positive".to_string()));
    }
    create_dir(&a.out)?;
    let mut manifest = String::new();
    for i in 0..a.count {
        let joint = &joints[i % joints.len()];
        let child = obj.child_link(joint)?.to_string();
        let seed = derive_seed(a.seed, &[i as u64]);
        let state = obj.random_state(derive_seed(seed, &[0]));
        let cloud = if a.camera {
            camera_observation(&obj, &state, &child, a.stride, seed)?
        } else {
            sample_surface(&obj, &state, a.points, derive_seed(seed, &[1]))?
        };
        let mask = cloud.link_mask(&child);
        let cloud = cloud.with_mask(mask.clone())?;
        let flow = gt_flow(&obj, &state, &cloud, joint)?;
        if let Err(m) = check_pair(&obj, &state, &cloud, &flow, &mask, joint) {
            eprintln!("error: pair {i}: {m}");
            return Ok(EXIT_TASK_FAILURE);
        }
        let file = format!("pair_{i:05}.afc");
        cloud_io::write_cloud(&a.out.join(&file), &cloud, Some(&flow))?;
        let entry = serde_json::json!({
            "file": file,
            "object": id,
            "joint": joint,
            "state": state,
            "points": cloud.len(),
            "view": if a.camera { "camera" } else { "full" },
        });
        manifest.push_str(&entry.to_string());
        manifest.push('\n');
    }
    write_bytes(&a.out.join("manifest.jsonl"), manifest.as_bytes())?;
    eprintln!("wrote {} pairs to {}", a.count, a.out.display());
    Ok(EXIT_OK)
}

/// Renders from random viewpoints until the target link is visible.
fn camera_observation(obj: &ArticulatedObject, state: &articflow_core::model::JointState, child: &str, stride: u32, seed: u64) -> Result<PointCloud> {
    let (lo, hi) = bounding_box(obj, state)?.ok_or(articflow_core::Error::ZeroArea)?;
    let center = nalgebra::center(&lo, &hi);
    let ranges = ViewpointRanges::for_diagonal((hi - lo).norm().max(0.1));
    let intrinsics = articflow_core::camera::Intrinsics::default();
    for attempt in 0..16u64 {
        let cam = random_viewpoint(derive_seed(seed, &[2, attempt]), &ranges, center, intrinsics)?;
        let cloud = backproject(&render_depth(obj, state, &cam)?, &cam, stride)?;
        if cloud.link_mask(child).iter().any(|&m| m) {
            return Ok(cloud);
        }
    }
    Err(Error::Format(format!("link `{child}` not visible from any sampled viewpoint")))
}

fn check_pair(
    obj: &ArticulatedObject,
    state: &articflow_core::model::JointState,
    cloud: &PointCloud,
    flow: &FlowField,
    mask: &[bool],
    joint: &str,
) -> std::result::Result<(), String> {
    flow.check_ground_truth(mask)?;
    let fd = fd_flow_oracle(obj, state, cloud, joint, 1e-6).map_err(|e| e.to_string())?;
    let worst = flow.vectors().iter().zip(fd.vectors()).map(|(g, f)| (g - f).norm()).fold(0.0, f64::max);
    if worst > DATASET_FLOW_TOLERANCE {
        return Err(format!("flow differs from finite differences by {worst}"));
    }
    Ok(())
}

fn cmd_rollout(a: &RolloutArgs) -> Result<i32> {
    let (obj, id, category) = load_source(&a.source)?;
    let cfg = merged_config(&a.config, flag_config(&a.flags, a.seed))?;
    let suite = cfg.suite_config()?;
    let mode = match (a.flags.camera, a.flags.full_obs) {
        (true, _) => cfg.mode("camera")?,
        (_, true) => cfg.mode("full")?,
        _ => suite.modes[0],
    };
    let seed = cfg.seed.unwrap_or(0);
    let joint = match &a.joint {
        Some(j) => j.clone(),
        None => obj.joints().first().map(|j| j.id.clone()).ok_or_else(|| Error::Format(format!("object `{id}` has no movable joints")))?,
    };
    let spec = obj.joint(&joint)?;
    let initial = obj.lower_state().with(&joint, a.start.unwrap_or(spec.lower));
    initial.validate(&obj)?;
    let estimator = parse_estimator(&a.estimator)?.reseeded(derive_seed(seed, &[u64::MAX]));
    if let Some(dir) = &a.dump_steps {
        create_dir(dir)?;
    }
    let contact_source = match estimator {
        FlowEstimator::NormalDirection => ContactSource::GroundTruth,
        _ => ContactSource::Estimate,
    };
    let mut dump_error: Option<Error> = None;
    let result = rollout_with(&obj, &initial, &joint, mode, &suite.rollout, &suite.constraints, seed, contact_source, &mut |o| {
        let flow = estimate_flow(&estimator, &obj, o.state, o.cloud, &joint)?;
        if let (Some(dir), None) = (&a.dump_steps, &dump_error) {
            // The grasp observation also drives the first step.
            let path = dir.join(format!("step_{:03}.afc", o.step.max(1)));
            if let Err(e) = cloud_io::write_cloud(&path, o.cloud, Some(&flow)) {
                dump_error = Some(e);
            }
        }
        Ok(flow)
    })?;
    if let Some(e) = dump_error {
        return Err(e);
    }
    let record = TrialRecord {
        index: 0,
        object_id: id,
        category,
        joint_id: joint,
        estimator: a.estimator.clone(),
        mode: mode.name().to_string(),
        repetition: 0,
        seed,
        e_goal: result.e_goal,
        success: result.success,
        steps: result.steps_used,
        termination: result.termination,
    };
    let line = records::record_json(&record)? + "\n";
    match &a.out {
        Some(p) => write_bytes(p, line.as_bytes())?,
        None => print_stdout(&line)?,
    }
    Ok(if result.termination == articflow_core::policy::Termination::Success { EXIT_OK } else { EXIT_TASK_FAILURE })
}

fn print_stdout(s: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(s.as_bytes()).and_then(|_| out.flush()).map_err(|e| Error::io("<stdout>", e))
}

fn cmd_eval(a: &EvalArgs) -> Result<i32> {
    let mut flags = flag_config(&a.flags, a.seed);
    flags.jobs = a.jobs;
    flags.estimators = a.estimators.clone();
    flags.repetitions = a.repetitions;
    if a.modes.is_some() {
        flags.observation.modes = a.modes.clone();
    }
    let cfg = merged_config(&a.config, flags)?;
    let suite_cfg = cfg.suite_config()?;
    let estimators = cfg.estimators()?;
    let objects: Vec<SuiteObject> = if a.objects.is_empty() {
        default_suite(a.suite_seed)?.into_iter().map(SuiteObject::from).collect()
    } else {
        a.objects
            .iter()
            .map(|p| {
                let id = p.file_stem().and_then(|s| s.to_str()).unwrap_or("object").to_string();
                let category = category_of(&id);
                let object = native::load_object(p).map_err(|e| e.to_string());
                if let Err(e) = &object {
                    eprintln!("warning: {e}");
                }
                SuiteObject { id, category, object }
            })
            .collect()
    };
    let jobs = cfg.jobs.unwrap_or_else(suite::available_jobs).max(1);
    let report = suite::run_suite_parallel(&objects, &estimators, &suite_cfg, cfg.seed.unwrap_or(0), jobs)?;
    let table = records::report_table(&report);
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        write_bytes(&dir.join("trials.csv"), records::trials_csv(&report.trials).as_bytes())?;
        write_bytes(&dir.join("trials.jsonl"), records::records_jsonl(&report.trials)?.as_bytes())?;
        write_bytes(&dir.join("report.json"), records::report_json(&report)?.as_bytes())?;
        write_bytes(&dir.join("table.txt"), table.as_bytes())?;
    }
    print_stdout(&table)?;
    Ok(EXIT_OK)
}

fn cmd_validate_flow(a: &ValidateFlowArgs) -> Result<i32> {
    if !(a.delta_theta > 0.0 && a.delta_theta.is_finite()) {
        return Err(Error::Format(format!("--delta-theta must be positive, got {}", a.delta_theta)));
    }
    let objects = match &a.object {
        Some(p) => vec![native::load_object(p)?],
        None => {
            if a.count == 0 {
                return Err(Error::Format("--count must be positive".to_string()));
            }
            generate_many(&ProcKind::ALL, a.count, a.seed)?.into_iter().map(|g| g.object).collect()
        }
    };
    let v = validate::validate_flow(&objects, a.states, a.points, a.delta_theta, a.seed)?;
    let json = serde_json::to_string_pretty(&v).map_err(|e| Error::Format(e.to_string()))?;
    print_stdout(&(json + "\n"))?;
    if v.passes(a.tolerance) {
        Ok(EXIT_OK)
    } else {
        eprintln!("flow validation above tolerance {}", a.tolerance);
        Ok(EXIT_TASK_FAILURE)
    }
}

fn cmd_procgen(a: &ProcgenArgs) -> Result<i32> {
    if let Some(dir) = &a.suite_dir {
        create_dir(dir)?;
        for g in default_suite(a.seed)? {
            native::write_scene(&g.object, &dir.join(format!("{}.scene", g.id)))?;
        }
        return Ok(EXIT_OK);
    }
    let kind = parse_kind(a.kind.as_deref().expect("clap requires --kind"))?;
    let obj = generate(&ProcSpec::new(kind, a.seed))?;
    match &a.out {
        Some(p) => native::write_scene(&obj, p)?,
        None => {
            let doc = native::serialize_scene(&obj, &format!("{}_{}", kind.category(), a.seed));
            if !doc.meshes.is_empty() {
                return Err(Error::Format("object has mesh links; use --out to write its mesh files".to_string()));
            }
            print_stdout(&doc.scene)?;
        }
    }
    Ok(EXIT_OK)
}
