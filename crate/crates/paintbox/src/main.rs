use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use paintbox::server::{router, spawn_engine};
use paintbox_core::engine::{EngineSettings, Session};
use paintbox_core::evaluation::{self, EvalProtocol};
use paintbox_core::forest::{load_forest, save_forest};
use paintbox_core::presets::{self, RoomSpec};
use paintbox_core::rendering::{raycast, Intrinsics, RaycastOptions};
use paintbox_core::scene::{load_scene, save_scene, VoxelScene};
use paintbox_core::touch::{
    self, generate_synthetic_sequence, pretrained_classifier, read_sequence, write_sequence, TouchDetector, TouchScript,
    TouchSettings,
};

#[derive(Parser)]
#[command(name = "paintbox", version, about = "Interactive volumetric labelling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a labelling session behind the HTTP API.
    Serve {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Settings override, `key.path=value`; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Replay a recorded touch sequence, one depth frame per engine frame.
        #[arg(long)]
        touch: Option<PathBuf>,
        #[arg(long, default_value_t = 30.0)]
        fps: f64,
    },
    /// Run the Poker benchmark.
    EvalPoker {
        /// Directory with the UCI files; synthetic data when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        reweight: bool,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = evaluation::SYNTHETIC_SEED)]
        synthetic_seed: u64,
        /// Write the JSON report here.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Write the summed confusion matrix of all repeats as CSV.
        #[arg(long)]
        confusion: Option<PathBuf>,
    },
    /// Detect touches in a recorded depth sequence.
    TouchRun {
        #[arg(long)]
        sequence: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        /// Forest checkpoint; the built-in classifier by default.
        #[arg(long)]
        classifier: Option<PathBuf>,
    },
    /// Write a generated scene.
    GenScene {
        preset: Preset,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Render a touch script (JSON) against a scene from a top-down camera.
    GenTouchSequence {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        script: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Camera height above the scene, metres.
        #[arg(long, default_value_t = 1.0)]
        height: f64,
    },
    /// Write the synthetic Poker train/test files.
    GenPoker {
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = evaluation::SYNTHETIC_SEED)]
        seed: u64,
    },
    /// Retrain the touch component classifier on the synthetic corpus.
    TrainTouchClassifier {
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Desk,
    Room,
    RoomWalls,
    Random,
}

fn read_scene(path: &Path) -> Result<VoxelScene> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    load_scene(&bytes).with_context(|| format!("parsing {}", path.display()))
}

fn settings(config: Option<&Path>, overrides: &[String]) -> Result<EngineSettings> {
    let text = config.map(|p| fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))).transpose()?;
    Ok(EngineSettings::layered(text.as_deref(), std::env::vars(), overrides)?)
}

fn serve(scene: &Path, port: u16, config: Option<&Path>, overrides: &[String], touch: Option<&Path>, fps: f64) -> Result<()> {
    let settings = settings(config, overrides)?;
    let mut session = Session::new(read_scene(scene)?, settings.clone())?;
    if let Some(dir) = touch {
        let seq = read_sequence(dir)?;
        session.attach_touch(seq, TouchDetector::new(settings.touch, pretrained_classifier()));
    }
    let (handle, engine) = spawn_engine(session, fps);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let addr = SocketAddr::from(([0, 0, 0, 0], port));
        let listener = tokio::net::TcpListener::bind(addr).await?;
        tracing::info!("listening on {}", listener.local_addr()?);
        axum::serve(listener, router(handle))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        anyhow::Ok(())
    })?;
    drop(rt);
    let _ = engine.join();
    Ok(())
}

fn eval_poker(
    data: Option<&Path>,
    reweight: bool,
    repeats: usize,
    seed: u64,
    json: Option<&Path>,
    confusion: Option<&Path>,
) -> Result<()> {
    let dataset = match data {
        Some(dir) => evaluation::load_poker(dir)?,
        None => {
            eprintln!("no --data given; using synthetic Poker data (seed {seed})");
            evaluation::synthetic_poker(seed)
        }
    };
    let protocol = EvalProtocol { repeats, reweight, ..EvalProtocol::default() };
    let report = evaluation::evaluate(&evaluation::poker_forest_settings(), &dataset, &protocol)?;
    print!("{}", report.table());
    if let Some(p) = json {
        fs::write(p, report.to_json())?;
    }
    if let Some(p) = confusion {
        let mut total = evaluation::ConfusionMatrix::new(dataset.test.class_count);
        for r in &report.repeats {
            total.merge(&r.confusion)?;
        }
        fs::write(p, total.to_csv())?;
    }
    Ok(())
}

fn touch_run(sequence: &Path, scene: &Path, classifier: Option<&Path>) -> Result<()> {
    let seq = read_sequence(sequence)?;
    let scene = read_scene(scene)?;
    let forest = match classifier {
        Some(p) => load_forest(&fs::read(p)?)?,
        None => pretrained_classifier(),
    };
    let det = TouchDetector::new(TouchSettings::default(), forest);
    let mut metrics = touch::DetectionMetrics::default();
    let mut total_ms = 0.0;
    for (i, f) in seq.frames.iter().enumerate() {
        let rc = raycast(&scene, &f.pose, &seq.intrinsics, &RaycastOptions::default());
        let out = det.detect(&f.depth, rc.depth());
        total_ms += out.elapsed_ms;
        let p = out.best.map_or(0.0, |b| b.1);
        println!("frame {i:4}  touch {:5}  points {:4}  p {p:.3}  {:.2} ms", out.is_touch(), out.touch_points.len(), out.elapsed_ms);
        if let Some(truth) = &seq.truth {
            match (out.is_touch(), truth[i].touching) {
                (true, true) => metrics.true_positives += 1,
                (true, false) => metrics.false_positives += 1,
                (false, true) => metrics.false_negatives += 1,
                (false, false) => metrics.true_negatives += 1,
            }
        }
    }
    println!("mean latency {:.2} ms", total_ms / seq.frames.len().max(1) as f64);
    if seq.truth.is_some() {
        println!("recall {:.3}  precision {:.3}", metrics.recall(), metrics.precision());
    }
    Ok(())
}

fn gen_scene(preset: Preset, output: &Path, seed: u64) -> Result<()> {
    let scene = match preset {
        Preset::Desk => presets::desk(0.01, 1.6, 1.2),
        Preset::Room => presets::room(RoomSpec::default()).scene,
        Preset::RoomWalls => presets::room(RoomSpec { extent: 3.0, walls: true, ..RoomSpec::default() }).scene,
        Preset::Random => presets::random_scene(seed, 5000, 20, 0.02),
    };
    fs::write(output, save_scene(&scene))?;
    println!("{} voxels -> {}", scene.len(), output.display());
    Ok(())
}

fn gen_touch_sequence(scene: &Path, script: &Path, output: &Path, height: f64) -> Result<()> {
    let scene = read_scene(scene)?;
    let script: TouchScript = serde_json::from_str(&fs::read_to_string(script)?).context("parsing touch script")?;
    if script.frames == 0 {
        bail!("touch script has no frames");
    }
    let s = TouchSettings::default();
    let seq = generate_synthetic_sequence(&scene, &presets::top_down_pose(height), &Intrinsics::default(), &script, s.tau, s.gamma);
    write_sequence(output, &seq)?;
    println!("{} frames -> {}", seq.frames.len(), output.display());
    Ok(())
}

fn gen_poker(output: &Path, seed: u64) -> Result<()> {
    let d = evaluation::synthetic_poker(seed);
    fs::create_dir_all(output)?;
    fs::write(output.join(evaluation::TRAIN_FILE), evaluation::to_poker_csv(&d.train))?;
    fs::write(output.join(evaluation::TEST_FILE), evaluation::to_poker_csv(&d.test))?;
    println!("{} train, {} test rows -> {}", d.train.len(), d.test.len(), output.display());
    Ok(())
}

fn train_touch_classifier(output: &Path) -> Result<()> {
    let corpus = touch::default_corpus(&TouchSettings::default());
    let forest = touch::train_classifier(&corpus, touch::CLASSIFIER_SEED);
    fs::write(output, save_forest(&forest))?;
    println!("{} examples -> {}", corpus.len(), output.display());
    Ok(())
}

fn main() -> Result<()> {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    match Cli::parse().command {
        Command::Serve { scene, port, config, overrides, touch, fps } => {
            serve(&scene, port, config.as_deref(), &overrides, touch.as_deref(), fps)
        }
        Command::EvalPoker { data, reweight, repeats, synthetic_seed, json, confusion } => {
            eval_poker(data.as_deref(), reweight, repeats, synthetic_seed, json.as_deref(), confusion.as_deref())
        }
        Command::TouchRun { sequence, scene, classifier } => touch_run(&sequence, &scene, classifier.as_deref()),
        Command::GenScene { preset, output, seed } => gen_scene(preset, &output, seed),
        Command::GenTouchSequence { scene, script, output, height } => gen_touch_sequence(&scene, &script, &output, height),
        Command::GenPoker { output, seed } => gen_poker(&output, seed),
        Command::TrainTouchClassifier { output } => train_touch_classifier(&output),
    }
}
