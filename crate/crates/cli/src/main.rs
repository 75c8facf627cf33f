use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use c2ftp::data::{
    generate_synthetic, ingest_tracks, prepare_windows, split_dataset, write_tracks, CacheKey, LabelConfig, LengthUnit,
    SceneWindow, SyntheticConfig, WindowCache, WindowConfig,
};
use c2ftp::eval::{emit_case_plot, horizon_report, sweep_table, tau_sweep, Aggregation};
use c2ftp::model::SceneInput;
use c2ftp::pipeline::{
    load_checkpoint, save_checkpoint, scene_inputs, train_interaction, train_interaction_standalone, train_refiner,
    ModelCheckpoint, Pipeline, Stage, TrainConfig, TrainOutcome,
};
use c2ftp::traj::convert;
use c2ftp::Scalar;

#[derive(Parser)]
#[command(name = "c2ftp", version, about = "Coarse-to-fine vehicle trajectory prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Unit {
    Feet,
    Meters,
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    Refiner,
    Interaction,
    InteractionStandalone,
}

impl From<StageArg> for Stage {
    fn from(s: StageArg) -> Self {
        match s {
            StageArg::Refiner => Stage::Refiner,
            StageArg::Interaction => Stage::Interaction,
            StageArg::InteractionStandalone => Stage::InteractionStandalone,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AggArg {
    Best,
    Single,
}

#[derive(Clone, Copy, ValueEnum)]
enum Precision {
    F32,
    F64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic multi-lane highway track file (meters, 10 Hz).
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 40)]
        agents: usize,
        #[arg(long, default_value_t = 3)]
        lanes: i64,
        #[arg(long, default_value_t = 12.0)]
        duration: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Turn a track file into split, labelled scene windows.
    PrepareData {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        unit: Unit,
        /// Sampling rate of the input in Hz (a multiple of 5).
        #[arg(long)]
        hz: u32,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the default configuration of a stage.
    PrintConfig {
        #[arg(long, value_enum)]
        stage: StageArg,
    },
    /// Train one stage.
    Train {
        #[arg(long, value_enum)]
        stage: StageArg,
        #[arg(long)]
        data: PathBuf,
        /// Flat key/value overrides of the stage defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Checkpoint holding the trained refiner (interaction stage only).
        #[arg(long)]
        refiner: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "f64")]
        precision: Precision,
    },
    /// Predict K futures for one scene window (JSON).
    Predict {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = 20)]
        k: usize,
        #[arg(long, default_value_t = 10)]
        tau: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint on a prepared split.
    Evaluate {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 20)]
        k: usize,
        #[arg(long, default_value_t = 10)]
        tau: usize,
        #[arg(long, value_enum, default_value = "best")]
        agg: AggArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Accuracy and latency for several denoising step counts.
    Sweep {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "3,10,15")]
        taus: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write one scene window of a prepared split to a JSON file.
    ExportScene {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        #[arg(long)]
        index: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render one test scene with its predictions as SVG.
    PlotCase {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Index into the chosen split.
        #[arg(long)]
        scene: usize,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        #[arg(long, default_value_t = 20)]
        k: usize,
        #[arg(long, default_value_t = 10)]
        tau: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Synth {
            out,
            agents,
            lanes,
            duration,
            seed,
        } => {
            let cfg = SyntheticConfig {
                agents,
                lanes,
                duration_s: duration,
                seed,
                ..SyntheticConfig::default()
            };
            let tracks = generate_synthetic(&cfg)?;
            write_tracks(&out, &tracks)?;
            println!("wrote {} tracks to {}", tracks.len(), out.display());
        }
        Command::PrepareData {
            input,
            unit,
            hz,
            out,
            seed,
        } => {
            let unit = match unit {
                Unit::Feet => LengthUnit::Feet,
                Unit::Meters => LengthUnit::Meters,
            };
            let tracks = ingest_tracks(&input, unit)?;
            let wcfg = WindowConfig::new(hz);
            let windows = prepare_windows(&tracks, &wcfg, &LabelConfig::default())?;
            let n = windows.len();
            let key = CacheKey {
                dataset: input
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                history: wcfg.history,
                future: wcfg.future,
                hz: wcfg.target_hz,
            };
            let cache = WindowCache::new(key, seed, split_dataset(windows, seed));
            cache.save(&out)?;
            println!(
                "{n} windows: {} train, {} val, {} test -> {}",
                cache.split.train.len(),
                cache.split.val.len(),
                cache.split.test.len(),
                out.display()
            );
        }
        Command::PrintConfig { stage } => print!("{}", TrainConfig::defaults(stage.into()).to_toml()),
        Command::Train {
            stage,
            data,
            config,
            out,
            refiner,
            precision,
        } => {
            let stage: Stage = stage.into();
            let text = match &config {
                Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
                None => String::new(),
            };
            let cfg = TrainConfig::parse(&text, Some(stage))?;
            let cache = WindowCache::load(&data)?;
            let refiner = match (stage, refiner) {
                (Stage::Interaction, Some(p)) => Some(load_checkpoint(p)?),
                (Stage::Interaction, None) => bail!("the interaction stage needs --refiner <checkpoint>"),
                (_, _) => None,
            };
            let outcome = match precision {
                Precision::F64 => train_stage::<f64>(&cache, &cfg, refiner.as_ref())?,
                Precision::F32 => train_stage::<f32>(&cache, &cfg, refiner.as_ref())?,
            };
            for r in &outcome.last.history {
                match r.val_loss {
                    Some(v) => println!("epoch {:>3}  lr {:.2e}  train {:.4}  val {:.4}", r.epoch, r.learning_rate, r.train_loss, v),
                    None => println!("epoch {:>3}  lr {:.2e}  train {:.4}", r.epoch, r.learning_rate, r.train_loss),
                }
            }
            save_checkpoint(&outcome.last, &out)?;
            let best = best_path(&out);
            save_checkpoint(&outcome.best, &best)?;
            println!("saved {} (best epoch {} in {})", out.display(), outcome.best.epoch, best.display());
            if let Some(e) = outcome.diverged {
                return Err(e).context("training stopped early; last finite parameters were saved");
            }
        }
        Command::Predict {
            ckpt,
            scene,
            k,
            tau,
            seed,
            out,
        } => {
            let ckpt = load_checkpoint(&ckpt)?;
            let text = std::fs::read_to_string(&scene).with_context(|| format!("reading {}", scene.display()))?;
            let window: SceneWindow = serde_json::from_str(&text).context("parsing scene window")?;
            let value = if ckpt.scalar == f32::NAME {
                predict_json::<f32>(&ckpt, &window, k, tau, seed)?
            } else {
                predict_json::<f64>(&ckpt, &window, k, tau, seed)?
            };
            write_json(&out, &value)?;
        }
        Command::Evaluate {
            ckpt,
            data,
            k,
            tau,
            agg,
            seed,
            split,
            out,
        } => {
            let agg = match agg {
                AggArg::Best => Aggregation::BestOfK,
                AggArg::Single => Aggregation::Single,
            };
            let model = load_checkpoint(&ckpt)?;
            let cache = WindowCache::load(&data)?;
            let windows = split_of(&cache, split);
            let id = model.id();
            let report = if model.scalar == f32::NAME {
                let p = Pipeline::<f32>::from_checkpoint(&model)?;
                horizon_report(&p, &scene_inputs(windows), k, tau, seed, agg, &cache.key.dataset, &id)?
            } else {
                let p = Pipeline::<f64>::from_checkpoint(&model)?;
                horizon_report(&p, &scene_inputs(windows), k, tau, seed, agg, &cache.key.dataset, &id)?
            };
            let value = json!({ "report": report, "config": model.config });
            write_json(&out, &value)?;
            print!("{}", report.to_table());
        }
        Command::Sweep {
            ckpt,
            data,
            taus,
            k,
            seed,
            split,
            out,
        } => {
            let model = load_checkpoint(&ckpt)?;
            let cache = WindowCache::load(&data)?;
            let windows = split_of(&cache, split);
            let rows = if model.scalar == f32::NAME {
                let p = Pipeline::<f32>::from_checkpoint(&model)?;
                tau_sweep(&p, &scene_inputs(windows), &taus, k, seed, Aggregation::BestOfK)?
            } else {
                let p = Pipeline::<f64>::from_checkpoint(&model)?;
                tau_sweep(&p, &scene_inputs(windows), &taus, k, seed, Aggregation::BestOfK)?
            };
            print!("{}", sweep_table(&rows));
            if let Some(out) = out {
                write_json(&out, &json!({ "k": k, "seed": seed, "rows": rows }))?;
            }
        }
        Command::ExportScene {
            data,
            split,
            index,
            out,
        } => {
            let cache = WindowCache::load(&data)?;
            let window = scene_at(&cache, split, index)?;
            write_json(&out, &serde_json::to_value(window)?)?;
        }
        Command::PlotCase {
            ckpt,
            data,
            scene,
            split,
            k,
            tau,
            seed,
            out,
        } => {
            let model = load_checkpoint(&ckpt)?;
            let cache = WindowCache::load(&data)?;
            let window = scene_at(&cache, split, scene)?;
            let preds = if model.scalar == f32::NAME {
                predicted_futures::<f32>(&model, window, k, tau, seed)?
            } else {
                predicted_futures::<f64>(&model, window, k, tau, seed)?
            };
            emit_case_plot(window, &preds, &out)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn train_stage<T: Scalar>(cache: &WindowCache, cfg: &TrainConfig, refiner: Option<&ModelCheckpoint>) -> Result<TrainOutcome> {
    let (train, val) = (&cache.split.train, &cache.split.val);
    Ok(match cfg.stage {
        Stage::Refiner => train_refiner::<T>(train, val, cfg)?,
        Stage::InteractionStandalone => train_interaction_standalone::<T>(train, val, cfg)?,
        Stage::Interaction => train_interaction::<T>(train, val, refiner.expect("checked by caller"), cfg)?,
    })
}

fn best_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.best.ckpt"))
}

fn split_of(cache: &WindowCache, split: SplitArg) -> &[SceneWindow] {
    match split {
        SplitArg::Train => &cache.split.train,
        SplitArg::Val => &cache.split.val,
        SplitArg::Test => &cache.split.test,
    }
}

fn scene_at(cache: &WindowCache, split: SplitArg, index: usize) -> Result<&SceneWindow> {
    let windows = split_of(cache, split);
    windows
        .get(index)
        .with_context(|| format!("scene {index} out of range ({} scenes)", windows.len()))
}

fn predicted_futures<T: Scalar>(
    ckpt: &ModelCheckpoint,
    window: &SceneWindow,
    k: usize,
    tau: usize,
    seed: u64,
) -> Result<Vec<Vec<[f64; 2]>>> {
    if k == 0 {
        return Ok(Vec::new());
    }
    let p = Pipeline::<T>::from_checkpoint(ckpt)?;
    let pred = p.predict(&SceneInput::from_window(window), k, tau, seed)?;
    Ok(pred.trajectories.iter().map(|t| convert(t)).collect())
}

fn predict_json<T: Scalar>(
    ckpt: &ModelCheckpoint,
    window: &SceneWindow,
    k: usize,
    tau: usize,
    seed: u64,
) -> Result<serde_json::Value> {
    let p = Pipeline::<T>::from_checkpoint(ckpt)?;
    let pred = p.predict(&SceneInput::from_window(window), k, tau, seed)?;
    Ok(json!({
        "k": k,
        "tau": tau,
        "seed": seed,
        "origin": window.frame_origin,
        "mode": pred.mode,
        "probs": pred.probs,
        "trajectories": pred.trajectories,
        "coarse": pred.coarse,
        "distribution": pred.distribution,
    }))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}
