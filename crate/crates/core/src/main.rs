use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use seedcount::config::RunConfig;
use seedcount::counting::CountReport;
use seedcount::dataset::{self, Background};
use seedcount::eval;
use seedcount::io::{self, DetectionRecord};
use seedcount::simulator;
use seedcount::tracking::Algorithm;
use seedcount::{pipeline, BBox, Detection, DetectionStream, Error, Result};

#[derive(Parser, Debug)]
#[command(name = "seedcount", version, about = "Seed-flow tracking and counting toolkit")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

/// Overrides applied on top of `--config`, in this order.
#[derive(Args, Debug)]
struct CommonArgs {
    /// key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    algorithm: Option<Algorithm>,
    #[arg(long, global = true)]
    fps: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long = "line-pos", global = true)]
    line_pos: Option<String>,
    #[arg(long = "tau-high", global = true)]
    tau_high: Option<String>,
    #[arg(long = "tau-low", global = true)]
    tau_low: Option<String>,
    /// Any configuration key, as key=value. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a seed flow and write detections and ground truth.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        /// Number of seeds to release.
        #[arg(long)]
        seeds: Option<String>,
    },
    /// Compose a synthetic training set with YOLO labels.
    GenDataset {
        #[arg(long)]
        out: PathBuf,
        /// Directory of `<class>/*.png` sprites; built-in sprites otherwise.
        #[arg(long)]
        sprites: Option<PathBuf>,
        #[arg(long)]
        images: Option<String>,
    },
    /// Track a detection file and write the confirmed tracks.
    Track {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Track and count a detection file.
    Count {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// True number of seeds, for the accuracy column.
        #[arg(long, allow_hyphen_values = true)]
        actual: Option<i64>,
        #[arg(long, default_value = "Seed")]
        label: String,
    },
    /// Precision, recall and AP50 of predictions against ground truth.
    ///
    /// Both files use the detection text format; the frame column is the image index.
    Eval {
        #[arg(long)]
        preds: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        #[arg(long, default_value = "Seed")]
        label: String,
    },
}

fn build_config(args: &CommonArgs, extra: &[(&str, &Option<String>)]) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        cfg.load_file(path)?;
    }
    if let Some(a) = args.algorithm {
        cfg.tracker.algorithm = a;
    }
    let flags = [
        ("fps", &args.fps),
        ("rng_seed", &args.seed),
        ("line_position", &args.line_pos),
        ("tau_high", &args.tau_high),
        ("tau_low", &args.tau_low),
    ];
    for (key, value) in flags.iter().chain(extra) {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig {
                field: kv.clone(),
                reason: "expected KEY=VALUE".into(),
            })?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    eprint!("{}", cfg.echo());
    Ok(cfg)
}

fn load_stream(cfg: &RunConfig, detections: &Path, embeddings: Option<&Path>) -> Result<DetectionStream> {
    let mut stream = io::read_detection_stream(detections, cfg.sim.fps)?;
    if let Some(p) = embeddings {
        let (_, records) = io::read_embeddings(p)?;
        io::attach_embeddings(&mut stream, records)?;
    }
    info!(
        "loaded {} frames, {} detections from {}",
        stream.len(),
        stream.detection_count(),
        detections.display()
    );
    Ok(stream)
}

fn print_report(algorithm: Algorithm, label: &str, fps: f64, r: &CountReport) -> Result<()> {
    println!("algorithm: {algorithm}");
    if let Some(actual) = r.actual_count {
        println!("{}", eval::counting_header());
        println!(
            "{}",
            eval::counting_row(label, fps, r.total_count, actual as i64, r.unique_ids)?
        );
    }
    for (class, n) in &r.per_class_counts {
        println!("class {class}: {n}");
    }
    let accuracy = r
        .accuracy_pct
        .map_or_else(|| "na".to_string(), |a| format!("{a:.1}"));
    println!(
        "count={} unique_ids={} accuracy={accuracy}",
        r.total_count, r.unique_ids
    );
    Ok(())
}

fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<()> {
    let (gt, stream) = simulator::simulate(&cfg.sim)?;
    fs::create_dir_all(out)?;
    io::write_detection_stream(&out.join("detections.txt"), &stream)?;
    io::write_records(&out.join("ground_truth.txt"), &gt.records())?;
    if cfg.sim.embedding_dim > 0 {
        io::write_embeddings(
            &out.join("embeddings.emb"),
            cfg.sim.embedding_dim as u32,
            &io::embeddings::stream_embeddings(&stream),
        )?;
    }
    fs::write(out.join("config.txt"), cfg.echo())?;
    println!(
        "true_count={} frames={} detections={}",
        gt.true_count,
        stream.len(),
        stream.detection_count()
    );
    Ok(())
}

fn cmd_gen_dataset(mut cfg: RunConfig, out: &Path, sprites: Option<&Path>) -> Result<()> {
    let assets = match sprites {
        Some(dir) => dataset::load_sprites(dir)?,
        None => dataset::builtin_sprites(),
    };
    if let Some(p) = &cfg.background_image {
        cfg.dataset.background = Background::Raster(image::open(p)?.to_rgb8());
    }
    fs::create_dir_all(out)?;
    let manifest = dataset::generate_dataset(&assets, &cfg.dataset, out)?;
    fs::write(out.join("config.txt"), cfg.echo())?;
    let kernels: usize = manifest.entries.iter().map(|e| e.kernel_count).sum();
    println!("images={} kernels={kernels}", manifest.entries.len());
    Ok(())
}

fn cmd_track(cfg: &RunConfig, detections: &Path, embeddings: Option<&Path>, out: &Path) -> Result<()> {
    let stream = load_stream(cfg, detections, embeddings)?;
    let res = pipeline::run(&stream, &cfg.tracker, cfg.line, cfg.sim.frame_h, None)?;
    fs::create_dir_all(out)?;
    io::write_tracks(&out.join("tracks.txt"), &res.tracked)?;
    fs::write(out.join("config.txt"), cfg.echo())?;
    print_report(cfg.tracker.algorithm, "Seed", cfg.sim.fps, &res.report)
}

fn cmd_count(
    cfg: &RunConfig,
    detections: &Path,
    embeddings: Option<&Path>,
    actual: Option<i64>,
    label: &str,
) -> Result<()> {
    if let Some(a) = actual {
        if a <= 0 {
            return Err(Error::ZeroActualCount(a));
        }
    }
    let stream = load_stream(cfg, detections, embeddings)?;
    let res = pipeline::run(&stream, &cfg.tracker, cfg.line, cfg.sim.frame_h, actual)?;
    print_report(cfg.tracker.algorithm, label, cfg.sim.fps, &res.report)
}

fn group_by_image(records: &[DetectionRecord]) -> BTreeMap<(u64, u32), Vec<&DetectionRecord>> {
    let mut map: BTreeMap<(u64, u32), Vec<&DetectionRecord>> = BTreeMap::new();
    for r in records {
        map.entry((r.frame, r.class_id)).or_default().push(r);
    }
    map
}

fn cmd_eval(preds: &Path, gt: &Path, iou_threshold: f64, label: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&iou_threshold) {
        return Err(Error::InvalidConfig {
            field: "iou".into(),
            reason: format!("must lie in [0, 1], got {iou_threshold}"),
        });
    }
    let preds = io::read_records(preds)?;
    let gts = io::read_records(gt)?;
    let pred_groups = group_by_image(&preds);
    let gt_groups = group_by_image(&gts);
    let mut keys: Vec<(u64, u32)> = pred_groups.keys().chain(gt_groups.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();

    let mut images = Vec::with_capacity(keys.len());
    for key in keys {
        let p: Vec<Detection> = pred_groups
            .get(&key)
            .into_iter()
            .flatten()
            .map(|r| Detection::new(r.bbox, r.confidence, r.class_id))
            .collect::<Result<_>>()?;
        let g: Vec<BBox> = gt_groups.get(&key).into_iter().flatten().map(|r| r.bbox).collect();
        images.push(eval::match_detections(&p, &g, iou_threshold));
    }
    let result = eval::evaluate(&images);
    print!("{}", eval::detection_table(label, &result));
    println!("{}", eval::detection_summary(&result));
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { out, seeds } => {
            let cfg = build_config(&cli.common, &[("n_seeds", &seeds)])?;
            cmd_simulate(&cfg, &out)
        }
        Command::GenDataset { out, sprites, images } => {
            let cfg = build_config(&cli.common, &[("n_images", &images)])?;
            cmd_gen_dataset(cfg, &out, sprites.as_deref())
        }
        Command::Track {
            detections,
            embeddings,
            out,
        } => {
            let cfg = build_config(&cli.common, &[])?;
            cmd_track(&cfg, &detections, embeddings.as_deref(), &out)
        }
        Command::Count {
            detections,
            embeddings,
            actual,
            label,
        } => {
            let cfg = build_config(&cli.common, &[])?;
            cmd_count(&cfg, &detections, embeddings.as_deref(), actual, &label)
        }
        Command::Eval { preds, gt, iou, label } => {
            build_config(&cli.common, &[])?;
            cmd_eval(&preds, &gt, iou, &label)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
