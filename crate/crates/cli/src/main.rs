use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use drcpo_core::database::{build_database_from_files, load_database, save_database, GtDatabase};
use drcpo_core::io::{discover_frames, export_ply, load_frame, write_frame, ColorMode, FrameFiles};
use drcpo_core::pipeline::{augment_frame, augment_frame_staged, FrameStats, Mode, PipelineConfig};
use drcpo_core::seeding::hash64;
use drcpo_core::synthetic::{synthetic_corpus, synthetic_database};
use drcpo_core::ObjectClass;

/// Whole-body LiDAR object augmentation.
#[derive(Parser, Debug)]
#[command(name = "drcpo", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract every labeled object of a dataset into a ground-truth database.
    BuildDb(BuildDbArgs),
    /// Augment every frame of a dataset and write the results plus a manifest.
    Augment(AugmentArgs),
    /// Print per-frame averages of a dataset and, optionally, of a manifest.
    Stats(StatsArgs),
    /// Time augmentation on synthetic frames.
    Bench(BenchArgs),
    /// Write one colored PLY per pipeline stage for a single frame.
    ExportPly(ExportPlyArgs),
    /// Write a synthetic labeled dataset.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// Config file of `key = value` lines; unset keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Augmentation mode, overriding the config's `mode`.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
}

#[derive(Args, Debug)]
struct BuildDbArgs {
    /// Dataset root with `velodyne/<id>.bin` and `label/<id>.txt`.
    #[arg(long)]
    data_dir: PathBuf,
    /// Database file to write.
    #[arg(long)]
    out: PathBuf,
    /// Config file; only the `database.*` keys are used.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AugmentArgs {
    /// Ground-truth database (not needed in `none` mode).
    #[arg(long)]
    db: Option<PathBuf>,
    /// Input dataset root.
    #[arg(long)]
    frames: PathBuf,
    /// Output dataset root; receives `velodyne/`, `label/` and the manifest.
    #[arg(long)]
    out: PathBuf,
    /// Manifest path [default: <out>/manifest.jsonl].
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Frames augmented concurrently.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    workers: u16,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args, Debug)]
struct StatsArgs {
    /// Dataset root to summarize.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Manifest written by `augment` to summarize.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Frames timed.
    #[arg(long, default_value_t = 100)]
    frames: usize,
    /// Points per synthetic frame.
    #[arg(long, default_value_t = 18_000)]
    points: usize,
    /// Synthetic frames feeding the database.
    #[arg(long, default_value_t = 100)]
    db_frames: usize,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args, Debug)]
struct ExportPlyArgs {
    #[arg(long)]
    db: PathBuf,
    /// Input dataset root.
    #[arg(long)]
    frames: PathBuf,
    /// Frame to export.
    #[arg(long)]
    frame_id: String,
    /// Directory receiving `<id>_<stage>.ply`.
    #[arg(long)]
    out: PathBuf,
    /// Vertex colors: `class` or `intensity`.
    #[arg(long, default_value = "class")]
    color: ColorMode,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Output dataset root.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 20)]
    frames: usize,
    #[arg(long, default_value_t = 18_000)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Bad flags, missing inputs or an invalid config; exits with status 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

fn config_help() -> String {
    format!("Config keys and defaults:\n{}", PipelineConfig::describe_defaults())
}

fn require_dir(path: &Path, what: &str) -> Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(usage(format!("{what} {} is not a directory", path.display())))
    }
}

fn read_config(path: Option<&Path>) -> Result<PipelineConfig> {
    let Some(path) = path else {
        return Ok(PipelineConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    PipelineConfig::from_text(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = read_config(self.config.as_deref())?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(mode) = self.mode {
            cfg.mode = mode;
        }
        Ok(cfg)
    }
}

fn load_db(path: &Path) -> Result<GtDatabase> {
    if !path.is_file() {
        return Err(usage(format!("database {} does not exist", path.display())));
    }
    load_database(path).with_context(|| format!("loading {}", path.display()))
}

fn print_class_counts(counts: [usize; 3]) {
    for class in ObjectClass::ALL {
        println!("{:<11} {}", class.name(), counts[class.index()]);
    }
}

fn cmd_build_db(args: &BuildDbArgs) -> Result<ExitCode> {
    require_dir(&args.data_dir, "data dir")?;
    let cfg = read_config(args.config.as_deref())?;
    let files = discover_frames(&args.data_dir)?;
    log::info!("{} frames under {}", files.len(), args.data_dir.display());
    let db = build_database_from_files(&files, cfg.database)?;
    save_database(&db, &args.out)?;
    println!("wrote {} objects from {} frames to {}", db.len(), files.len(), args.out.display());
    print_class_counts(db.class_counts());
    Ok(ExitCode::SUCCESS)
}

fn augment_one(files: &FrameFiles, db: Option<&GtDatabase>, cfg: &PipelineConfig, out: &Path) -> Result<FrameStats> {
    let frame = load_frame(files)?;
    let (augmented, stats) = augment_frame(&frame, db, cfg, hash64(cfg.seed, &files.frame_id))?;
    write_frame(&augmented, out)?;
    Ok(stats)
}

fn frame_record(frame_id: &str, result: &Result<FrameStats>) -> serde_json::Value {
    match result {
        Ok(stats) => json!({ "frame_id": frame_id, "status": "ok", "stats": stats }),
        Err(e) => json!({ "frame_id": frame_id, "status": "failed", "error": format!("{e:#}") }),
    }
}

fn cmd_augment(args: &AugmentArgs) -> Result<ExitCode> {
    require_dir(&args.frames, "frames dir")?;
    let cfg = args.config.resolve()?;
    let db = match (&args.db, cfg.mode) {
        (Some(path), _) => Some(load_db(path)?),
        (None, Mode::None) => None,
        (None, mode) => return Err(usage(format!("mode `{mode}` needs --db"))),
    };
    let files = discover_frames(&args.frames)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let manifest_path = args.manifest.clone().unwrap_or_else(|| args.out.join("manifest.jsonl"));
    log::info!("augmenting {} frames with {} workers", files.len(), args.workers);

    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.workers as usize).build()?;
    let results: Vec<Result<FrameStats>> =
        pool.install(|| files.par_iter().map(|f| augment_one(f, db.as_ref(), &cfg, &args.out)).collect());

    let mut manifest = String::new();
    if !files.is_empty() {
        manifest.push_str(&json!({ "config": cfg.to_text() }).to_string());
        manifest.push('\n');
    }
    let mut failed = 0;
    for (files, result) in files.iter().zip(&results) {
        if let Err(e) = result {
            log::error!("frame {}: {e:#}", files.frame_id);
            failed += 1;
        }
        manifest.push_str(&frame_record(&files.frame_id, result).to_string());
        manifest.push('\n');
    }
    fs::File::create(&manifest_path)
        .and_then(|mut f| f.write_all(manifest.as_bytes()))
        .with_context(|| format!("writing {}", manifest_path.display()))?;
    println!("augmented {} of {} frames; manifest {}", files.len() - failed, files.len(), manifest_path.display());
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn cmd_stats(args: &StatsArgs) -> Result<ExitCode> {
    if args.data_dir.is_none() && args.manifest.is_none() {
        return Err(usage("give --data-dir, --manifest or both"));
    }
    let mut code = ExitCode::SUCCESS;
    if let Some(dir) = &args.data_dir {
        require_dir(dir, "data dir")?;
        let files = discover_frames(dir)?;
        let mut counts = [0usize; 3];
        let mut points = 0usize;
        let mut loaded = 0usize;
        for f in &files {
            match load_frame(f) {
                Ok(frame) => {
                    for (c, n) in counts.iter_mut().zip(frame.class_counts()) {
                        *c += n;
                    }
                    points += frame.total_points();
                    loaded += 1;
                }
                Err(e) => {
                    log::error!("{}: {e}", f.frame_id);
                    code = ExitCode::from(1);
                }
            }
        }
        let per = |x: usize| if loaded == 0 { 0.0 } else { x as f64 / loaded as f64 };
        println!("frames                  {loaded}");
        println!("objects per frame       {:.2} / {:.2} / {:.2}  (car / pedestrian / cyclist)", per(counts[0]), per(counts[1]), per(counts[2]));
        println!("total points per frame  {:.0}", per(points));
    }
    if let Some(path) = &args.manifest {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut stats = Vec::new();
        let mut failed = 0;
        for (n, line) in text.lines().enumerate() {
            let record: serde_json::Value = serde_json::from_str(line).with_context(|| format!("{}:{}", path.display(), n + 1))?;
            match record.get("status").and_then(|s| s.as_str()) {
                Some("ok") => stats.push(serde_json::from_value::<FrameStats>(record["stats"].clone())?),
                Some(_) => failed += 1,
                None => {}
            }
        }
        let avg = |f: &dyn Fn(&FrameStats) -> f64| mean(&stats.iter().map(f).collect::<Vec<_>>());
        println!("augmented frames        {} ({failed} failed)", stats.len());
        println!(
            "objects per frame       {:.2} / {:.2} / {:.2}  (car / pedestrian / cyclist)",
            avg(&|s| s.objects[0] as f64),
            avg(&|s| s.objects[1] as f64),
            avg(&|s| s.objects[2] as f64)
        );
        println!(
            "added per frame         {:.2} / {:.2} / {:.2}",
            avg(&|s| s.added[0] as f64),
            avg(&|s| s.added[1] as f64),
            avg(&|s| s.added[2] as f64)
        );
        println!("input points per frame  {:.0}", avg(&|s| s.input_points as f64));
        println!("total points per frame  {:.0}", avg(&|s| s.total_points as f64));
        println!(
            "ms per frame            {:.2} (construction {:.2}, placement {:.2}, s-hpr {:.2}, e-hpr {:.2})",
            avg(&|s| s.timings.total) * 1e3,
            avg(&|s| s.timings.construction) * 1e3,
            avg(&|s| s.timings.placement) * 1e3,
            avg(&|s| s.timings.s_hpr) * 1e3,
            avg(&|s| s.timings.e_hpr) * 1e3
        );
    }
    Ok(code)
}

fn cmd_bench(args: &BenchArgs) -> Result<ExitCode> {
    if args.frames == 0 {
        return Err(usage("--frames must be at least 1"));
    }
    let cfg = args.config.resolve()?;
    let db = synthetic_database(args.db_frames, cfg.seed, cfg.database)?;
    let frames = synthetic_corpus(args.frames, cfg.seed ^ 0x5eed, args.points);
    // One untimed frame to warm caches and the allocator.
    augment_frame(&frames[0], Some(&db), &cfg, 0)?;
    let mut ms = Vec::with_capacity(frames.len());
    for frame in &frames {
        let seed = hash64(cfg.seed, &frame.frame_id);
        let t = Instant::now();
        augment_frame(frame, Some(&db), &cfg, seed)?;
        ms.push(t.elapsed().as_secs_f64() * 1e3);
    }
    ms.sort_by(f64::total_cmp);
    let p95 = ms[((ms.len() as f64 * 0.95).ceil() as usize).clamp(1, ms.len()) - 1];
    println!("frames {}  points {}  mode {}", ms.len(), args.points, cfg.mode);
    println!("mean {:.2} ms  p95 {:.2} ms  max {:.2} ms", mean(&ms), p95, ms[ms.len() - 1]);
    Ok(ExitCode::SUCCESS)
}

fn cmd_export_ply(args: &ExportPlyArgs) -> Result<ExitCode> {
    require_dir(&args.frames, "frames dir")?;
    let cfg = args.config.resolve()?;
    let db = load_db(&args.db)?;
    let files = FrameFiles::in_dir(&args.frames, &args.frame_id);
    if !files.cloud_path.is_file() {
        return Err(usage(format!("no frame `{}` under {}", args.frame_id, args.frames.display())));
    }
    let frame = load_frame(&files)?;
    let stages = augment_frame_staged(&frame, &db, &cfg, hash64(cfg.seed, &args.frame_id))?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    for (stage, frame) in &stages {
        let path = args.out.join(format!("{}_{}.ply", args.frame_id, stage.name()));
        export_ply(frame, &path, args.color)?;
        println!("{:<12} {:>7} points  {}", stage.name(), frame.total_points(), path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_synth(args: &SynthArgs) -> Result<ExitCode> {
    for frame in synthetic_corpus(args.frames, args.seed, args.points) {
        write_frame(&frame, &args.out)?;
    }
    println!("wrote {} frames to {}", args.frames, args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::BuildDb(a) => cmd_build_db(a),
        Command::Augment(a) => cmd_augment(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Bench(a) => cmd_bench(a),
        Command::ExportPly(a) => cmd_export_ply(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DRCPO_LOG", "warn")).init();
    let help = config_help();
    let mut command = Cli::command().after_long_help(help.clone());
    for name in ["build-db", "augment", "bench", "export-ply"] {
        command = command.mut_subcommand(name, |c| c.after_long_help(help.clone()));
    }
    let cli = match Cli::from_arg_matches(&command.get_matches()) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
