//! The `corn` command line. [`dispatch`] parses arguments, runs one
//! subcommand and returns the process exit code: 0 on success, 1 when the
//! work itself failed, 2 for usage and configuration errors.
//!
//! Machine-readable output (JSON or CSV) goes to stdout and nothing else
//! does; progress and diagnostics go to stderr.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{CommandFactory, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::config::RunConfig;
use crate::contactgen::{
    dataset_stats, generate_dataset, primitive_objects, read_dataset, record_seed, write_dataset,
    DATASET_VERSION,
};
use crate::encoder::{
    decode_contact, encode, evaluate, prepare_dataset, read_checkpoint, train_with, write_checkpoint,
    EncoderParams, HandState, CHECKPOINT_VERSION,
};
use crate::error::Error;
use crate::geom::{primitives, sample_surface_points, PointCloud, Pose, TriMesh};
use crate::nn::sigmoid;
use crate::patches::{farthest_point_sample, make_patches};
use crate::percept::{parse_pcd, read_pcseq, segment, track_step, TrackerState, PCSEQ_VERSION};
use crate::policyhead::{attention_map, policy_forward, PolicyParams, TaskInputs};
use crate::poses::stable_orientations;
use crate::reward::{trace_to_csv, Trajectory};

#[derive(Debug, Parser)]
#[command(
    name = "corn",
    about = "Contact-based point-cloud representations for nonprehensile manipulation",
    disable_version_flag = true,
    subcommand_required = false
)]
struct Cli {
    /// JSON file with flat dotted keys (e.g. "train.optimizer.lr")
    #[arg(long, global = true, value_name = "JSON")]
    config: Option<PathBuf>,
    /// Override one config key; repeatable, applied after all other flags
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker threads for gen-data (default: all logical cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Master seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print version and file-format versions
    #[arg(short = 'V', long)]
    version: bool,
    #[command(subcommand)]
    cmd: Option<Cmd>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Generate a labeled contact dataset
    GenData {
        /// Directory of .obj meshes, or "builtin" for the primitive set
        #[arg(long, default_value = "builtin")]
        objects: String,
        /// Gripper .obj mesh, or "builtin"
        #[arg(long)]
        gripper: String,
        /// Dataset file to write
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        /// Contact offset standard deviation, meters
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Train the contact encoder and write a checkpoint
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Checkpoint file to write
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch: Option<usize>,
    },
    /// Patch-level contact metrics of a checkpoint on a dataset
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        ckpt: PathBuf,
    },
    /// Track an object through a point-cloud sequence (CSV)
    Track {
        /// .pcseq point-cloud sequence
        #[arg(long)]
        seq: PathBuf,
        /// Pose of the object in the first frame
        #[arg(long, value_names = ["TX", "TY", "TZ", "QX", "QY", "QZ", "QW"], num_args = 7, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        init_pose: Vec<f64>,
        /// Segment every frame before registration
        #[arg(long)]
        segment: bool,
    },
    /// Enumerate quasi-static resting orientations of a mesh
    StablePoses {
        /// .obj mesh, or builtin:<cube|box|cylinder|sphere|l-prism|gripper>
        #[arg(long)]
        mesh: String,
        /// Minimum COM margin, meters
        #[arg(long)]
        margin: Option<f64>,
    },
    /// Per-step reward terms of a JSON trajectory (CSV)
    RewardTrace {
        /// JSON with goal, half_extents, steps and optional params
        #[arg(long)]
        traj: PathBuf,
    },
    /// Policy attention over the patches of a cloud
    Attn {
        #[arg(long)]
        ckpt: PathBuf,
        /// .obj (surface-sampled) or ASCII .pcd
        #[arg(long)]
        cloud: String,
        /// Gripper pose in the cloud's frame
        #[arg(long, value_names = ["TX", "TY", "TZ", "QX", "QY", "QZ", "QW"], num_args = 7, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        pose: Vec<f64>,
    },
    /// Contact statistics of a dataset
    Stats {
        #[arg(long)]
        data: PathBuf,
    },
}

impl Cmd {
    fn is_gen_data(&self) -> bool {
        matches!(self, Cmd::GenData { .. })
    }
}

enum Failure {
    Usage(String),
    Domain(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => Failure::Usage(m),
            e => Failure::Domain(e),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Domain(e.into())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

pub fn version_text() -> String {
    format!(
        "corn {}\ndataset format {DATASET_VERSION}\ncheckpoint format {CHECKPOINT_VERSION}\npoint-cloud sequence format {PCSEQ_VERSION}\n",
        env!("CARGO_PKG_VERSION")
    )
}

/// Runs the command line against the process's stdout and stderr.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = io::stdout();
    let stderr = io::stderr();
    run(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// [`dispatch`] with explicit output streams.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp => {
                    let _ = write!(out, "{}", e.render());
                    0
                }
                _ => {
                    let _ = writeln!(err, "{}", e.render());
                    let _ = write!(err, "{}", help_for(&argv));
                    2
                }
            };
        }
    };
    if cli.version {
        let _ = write!(out, "{}", version_text());
        return 0;
    }
    let Some(cmd) = cli.cmd.as_ref() else {
        let _ = write!(err, "{}", Cli::command().render_help());
        return 2;
    };
    let cfg = match build_config(&cli) {
        Ok(c) => c,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            return 2;
        }
        Err(Failure::Domain(e)) => {
            let _ = writeln!(err, "error: {e}");
            return 1;
        }
    };
    let threads = if cmd.is_gen_data() {
        cfg.jobs
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    } else {
        1
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return 1;
        }
    };
    let mut buf = Vec::new();
    let res = execute(cmd, &cfg, &pool, &mut buf, err);
    match res {
        Ok(()) => {
            if out.write_all(&buf).and_then(|_| out.flush()).is_err() {
                return 1;
            }
            0
        }
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            2
        }
        Err(Failure::Domain(e)) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

/// Help for the subcommand named in `argv`, or the top-level help.
fn help_for(argv: &[OsString]) -> String {
    let mut cmd = Cli::command();
    let name = argv.iter().skip(1).find_map(|a| a.to_str().filter(|s| !s.starts_with('-')));
    if let Some(sub) = name.and_then(|n| cmd.find_subcommand_mut(n)) {
        return sub.render_help().to_string();
    }
    cmd.render_help().to_string()
}

/// Defaults, then the config file, then dedicated flags, then `--set`.
fn build_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut map = match &cli.config {
        Some(p) => {
            let s = std::fs::read_to_string(p)
                .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", p.display())))?;
            match serde_json::from_str::<Value>(&s) {
                Ok(Value::Object(m)) => m,
                Ok(_) => return Err(Failure::Usage("config file must hold a JSON object".into())),
                Err(e) => return Err(Failure::Usage(format!("config file: {e}"))),
            }
        }
        None => Map::new(),
    };
    let mut put = |k: &str, v: Value| {
        map.insert(k.to_string(), v);
    };
    if let Some(s) = cli.seed {
        put("seed", json!(s));
    }
    if let Some(j) = cli.jobs {
        put("jobs", json!(j));
    }
    match &cli.cmd {
        Some(Cmd::GenData { sigma: Some(s), .. }) => put("datagen.sigma", json!(s)),
        Some(Cmd::Train { epochs, lr, batch, .. }) => {
            if let Some(e) = epochs {
                put("train.epochs", json!(e));
            }
            if let Some(l) = lr {
                put("train.optimizer.lr", json!(l));
            }
            if let Some(b) = batch {
                put("train.batch_size", json!(b));
            }
        }
        Some(Cmd::StablePoses { margin: Some(m), .. }) => put("poses.margin_min", json!(m)),
        _ => {}
    }
    for s in &cli.set {
        let (k, v) = RunConfig::parse_assignment(s)?;
        map.insert(k, v);
    }
    Ok(RunConfig::default().apply(&map)?)
}

fn to_json_line<T: serde::Serialize>(out: &mut dyn Write, v: &T) -> CliResult<()> {
    let s = serde_json::to_string_pretty(v).map_err(Error::from)?;
    writeln!(out, "{s}")?;
    Ok(())
}

/// `builtin:<name>` or an OBJ path.
pub fn load_mesh(src: &str) -> crate::Result<TriMesh> {
    let Some(name) = src.strip_prefix("builtin:") else {
        return TriMesh::load_obj(src);
    };
    let prims = primitive_objects();
    let idx = match name {
        "gripper" => return Ok(primitives::gripper()),
        "cube" => 0,
        "box" => 1,
        "cylinder" => 2,
        "sphere" => 3,
        "l-prism" => 4,
        _ => return Err(Error::InvalidParameter(format!("unknown builtin mesh `{name}`"))),
    };
    Ok(prims[idx].clone())
}

fn load_objects(src: &str) -> crate::Result<Vec<TriMesh>> {
    if src == "builtin" {
        return Ok(primitive_objects());
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(src)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("obj")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InvalidParameter(format!("no .obj files in {src}")));
    }
    paths
        .iter()
        .map(|p| {
            let m = TriMesh::load_obj(p)?;
            m.require_watertight()?;
            Ok(m)
        })
        .collect()
}

fn load_cloud(src: &str, n: usize, seed: u64) -> crate::Result<PointCloud> {
    let path = Path::new(src);
    let is_pcd = path.extension().is_some_and(|x| x.eq_ignore_ascii_case("pcd"));
    let cloud = if is_pcd {
        parse_pcd(&std::fs::read_to_string(path)?)?
    } else {
        let mesh = load_mesh(src)?;
        sample_surface_points(&mesh, n, &mut ChaCha8Rng::seed_from_u64(seed))?
    };
    if cloud.len() < n {
        return Err(Error::TooFewPoints {
            needed: n,
            got: cloud.len(),
        });
    }
    if cloud.len() == n {
        return Ok(cloud);
    }
    Ok(cloud.select(&farthest_point_sample(&cloud, n)?))
}

fn execute(
    cmd: &Cmd,
    cfg: &RunConfig,
    pool: &rayon::ThreadPool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CliResult<()> {
    match cmd {
        Cmd::GenData {
            objects,
            gripper,
            out: path,
            count,
            ..
        } => {
            let objs = load_objects(objects)?;
            let grip = if gripper == "builtin" {
                primitives::gripper()
            } else {
                load_mesh(gripper)?
            };
            grip.require_watertight()?;
            let t0 = std::time::Instant::now();
            let records = pool.install(|| generate_dataset(&objs, &grip, &cfg.datagen, *count))?;
            write_dataset(&records, path)?;
            let _ = writeln!(
                err,
                "wrote {} records in {:.1} s",
                records.len(),
                t0.elapsed().as_secs_f64()
            );
            let stats = dataset_stats(&records, &cfg.encoder.patch)?;
            to_json_line(
                out,
                &json!({"records": records.len(), "objects": objs.len(), "stats": stats}),
            )
        }
        Cmd::Train { data, out: path, .. } => {
            let records = read_dataset(data)?;
            let stats = dataset_stats(&records, &cfg.encoder.patch)?;
            let samples = pool.install(|| prepare_dataset(&records, &cfg.encoder))?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut params = EncoderParams::new(cfg.encoder, &mut rng)?;
            let policy = PolicyParams::new(cfg.policy.clone(), &mut rng)?;
            let report = train_with(&mut params, &samples, &cfg.train, |e| {
                let val = e.val.map_or(String::new(), |v| {
                    format!(" val loss {:.4} acc {:.4} bal {:.4}", v.loss, v.accuracy, v.balanced_accuracy)
                });
                let _ = writeln!(
                    err,
                    "epoch {:>3}: train loss {:.4} acc {:.4}{val}",
                    e.epoch, e.train.loss, e.train.accuracy
                );
            })?;
            write_checkpoint(path, &params, &policy.named_tensors())?;
            to_json_line(
                out,
                &json!({
                    "n_train": report.n_train,
                    "n_val": report.n_val,
                    "majority_baseline": stats.majority_patch_accuracy(),
                    "epochs": report.epochs,
                }),
            )
        }
        Cmd::Eval { data, ckpt } => {
            let records = read_dataset(data)?;
            let (params, _) = read_checkpoint(ckpt)?;
            let stats = dataset_stats(&records, &params.cfg.patch)?;
            let samples = pool.install(|| prepare_dataset(&records, &params.cfg))?;
            let m = evaluate(&params, &samples)?;
            to_json_line(
                out,
                &json!({
                    "n_records": records.len(),
                    "loss": m.loss,
                    "accuracy": m.accuracy,
                    "precision": m.precision,
                    "recall": m.recall,
                    "balanced_accuracy": m.balanced_accuracy,
                    "patches": m.n,
                    "positive_patches": m.positives,
                    "majority_baseline": stats.majority_patch_accuracy(),
                }),
            )
        }
        Cmd::Track {
            seq,
            init_pose,
            segment: seg,
        } => {
            let init = Pose::from_slice(init_pose)?;
            let mut frames = read_pcseq(&mut BufReader::new(File::open(seq)?))?;
            if frames.is_empty() {
                return Err(Error::EmptyDataset.into());
            }
            if *seg {
                for f in &mut frames {
                    *f = segment(f, &cfg.segment, &[])?;
                }
            }
            let mut state = TrackerState::new(&frames[0], init, cfg.track)?;
            writeln!(
                out,
                "frame,tx,ty,tz,qx,qy,qz,qw,fitness_previous,fitness_initial,reregistered,lost"
            )?;
            let row = |out: &mut dyn Write, frame: u64, p: &Pose, fp: f64, fi: f64, rr: bool, lost: bool| {
                let a = p.to_array();
                writeln!(
                    out,
                    "{frame},{},{},{},{},{},{},{},{fp},{fi},{},{}",
                    a[0], a[1], a[2], a[3], a[4], a[5], a[6], rr as u8, lost as u8
                )
            };
            row(out, 0, &init, 1.0, 1.0, false, false)?;
            for f in &frames[1..] {
                let s = track_step(&mut state, f)?;
                if s.lost {
                    let _ = writeln!(err, "frame {}: no correspondences, pose held", s.frame);
                }
                row(out, s.frame, &s.pose, s.fitness_previous, s.fitness_initial, s.reregistered, s.lost)?;
            }
            Ok(())
        }
        Cmd::StablePoses { mesh, .. } => {
            let m = load_mesh(mesh)?;
            let poses = stable_orientations(&m, cfg.poses.margin_min)?;
            let list: Vec<Value> = poses
                .iter()
                .map(|p| {
                    json!({
                        "quaternion": p.rotation.to_xyzw(),
                        "rest_height": p.rest_height,
                        "margin": p.margin,
                    })
                })
                .collect();
            to_json_line(out, &list)
        }
        Cmd::RewardTrace { traj } => {
            let mut v: Value = serde_json::from_str(&std::fs::read_to_string(traj)?).map_err(Error::from)?;
            // reward.* config keys apply unless the file carries its own params
            if let Value::Object(m) = &mut v {
                m.entry("params")
                    .or_insert_with(|| serde_json::to_value(cfg.reward).expect("params serialize"));
            }
            let t = Trajectory::from_json(&v.to_string())?;
            write!(out, "{}", trace_to_csv(&t.reward_trace()))?;
            Ok(())
        }
        Cmd::Attn { ckpt, cloud, pose } => {
            let hand_pose = Pose::from_slice(pose)?;
            let (params, named) = read_checkpoint(ckpt)?;
            let enc = params.cfg;
            let mut pcfg = cfg.policy.clone();
            pcfg.embed_dim = enc.d_model;
            pcfg.n_patches = enc.patch.n_patches;
            let policy = match PolicyParams::from_named(pcfg.clone(), &named)? {
                Some(p) => p,
                None => {
                    let _ = writeln!(err, "checkpoint has no policy head; using a seeded initialization");
                    PolicyParams::new(pcfg, &mut ChaCha8Rng::seed_from_u64(record_seed(cfg.seed, 1)))?
                }
            };
            let pc = load_cloud(cloud, enc.patch.n_points, cfg.seed)?;
            let centroid = pc.centroid().ok_or(Error::EmptyDataset)?;
            let shifted = pc.transformed(&Pose::from_translation(-centroid));
            let ps = make_patches(&shifted, &enc.patch)?;
            let mut hp = hand_pose;
            hp.translation -= centroid;
            let e = encode(&params, &ps, &HandState::from_pose(&hp))?;
            let contact: Vec<f64> = decode_contact(&params, &e.patch_embeddings)?
                .into_iter()
                .map(sigmoid)
                .collect();
            let o = policy_forward(&policy, &e.patch_embeddings, &TaskInputs::default())?;
            let attention = attention_map(&o.attention, enc.patch.n_patches)?;
            let centers: Vec<[f64; 3]> = ps
                .centers
                .iter()
                .map(|c| {
                    let w = c + centroid;
                    [w.x, w.y, w.z]
                })
                .collect();
            to_json_line(
                out,
                &json!({"attention": attention, "centers": centers, "contact_probability": contact}),
            )
        }
        Cmd::Stats { data } => {
            let records = read_dataset(data)?;
            to_json_line(out, &dataset_stats(&records, &cfg.encoder.patch)?)
        }
    }
}
