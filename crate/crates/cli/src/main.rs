use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;

use rirnav::acoustics::{RirDataset, RirRecord};
use rirnav::harness::{
    action_intervention, build_nn_bank, data_root, evaluate, pe_intervention, pretrain_generator, stream_rng, train,
    write_report, write_traces, EvalOptions, ModelKind, RunConfig, TrainedModels,
};
use rirnav::learn::Checkpoint;
use rirnav::metrics::MetricsReport;
use rirnav::spectral::Stft;
use rirnav::scene::{build_scene, parse_scene_spec, write_scene_spec, NavScene};

#[derive(Parser)]
#[command(name = "rirnav", version, about = "Two-agent room impulse response measurement simulator")]
struct Cli {
    /// Reference-scale hyperparameters instead of the desk profile.
    #[arg(long, global = true)]
    paper_profile: bool,
    /// Seed for every random choice of the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Config file (`key = value` lines) applied on top of the profile.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Single `key=value` overrides, applied last.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Scene files.
    #[command(subcommand)]
    Scene(SceneCmd),
    /// Ground-truth response datasets.
    #[command(subcommand)]
    Rir(RirCmd),
    /// Spectrograms of stored responses.
    #[command(subcommand)]
    Spec(SpecCmd),
    /// Pretrain the generator with random motion.
    Pretrain {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        updates: usize,
    },
    /// Train policies and predictor.
    Train {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Checkpoint to start from (e.g. a pretrained generator).
        #[arg(long)]
        init: Option<PathBuf>,
    },
    /// Evaluate a trained checkpoint on the test split.
    Eval(EvalArgs),
    /// Baselines.
    #[command(subcommand)]
    Baseline(BaselineCmd),
    /// Analyses of a trained checkpoint.
    #[command(subcommand)]
    Analyze(AnalyzeCmd),
    /// Trajectory, reward, spectrogram and waveform files from traces.
    Report {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Adds predicted responses by replaying the traces.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Metrics files.
    #[command(subcommand)]
    Metrics(MetricsCmd),
}

#[derive(Subcommand)]
enum SceneCmd {
    /// Write a randomized scene of the configured size.
    Gen {
        #[arg(long)]
        scene_seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize a scene file.
    Info { file: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Split {
    Train,
    Val,
    Test,
}

#[derive(Subcommand)]
enum RirCmd {
    /// Responses for random source/listener pairs on a split.
    Build {
        #[arg(long, value_enum, default_value_t = Split::Train)]
        split: Split,
        #[arg(long, default_value_t = 64)]
        pairs_per_scene: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a dataset header, or one record as CSV.
    Dump {
        file: PathBuf,
        #[arg(long)]
        index: Option<usize>,
    },
}

#[derive(Subcommand)]
enum SpecCmd {
    /// One channel of one dataset record as a frames x bins CSV.
    Dump {
        file: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// 0 = left, 1 = right.
        #[arg(long, default_value_t = 0)]
        channel: usize,
    },
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    greedy: bool,
    /// SiSDR with the optimal-scale projection.
    #[arg(long)]
    si_projection: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineName {
    Random,
    Nn,
    Occupancy,
    Curiosity,
}

#[derive(Subcommand)]
enum BaselineCmd {
    Run {
        #[arg(long, value_enum)]
        name: BaselineName,
        /// Predictor weights (random init when absent).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Training episodes per scene for the nearest-neighbor bank.
        #[arg(long, default_value_t = 4)]
        bank_episodes: usize,
        #[arg(long)]
        si_projection: bool,
    },
}

#[derive(Subcommand)]
enum AnalyzeCmd {
    /// Modality importance for actions and for prediction error.
    Interventions {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum MetricsCmd {
    /// Summary JSON from a per-episode metrics CSV.
    Report {
        csv: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let base = if cli.paper_profile { RunConfig::paper() } else { RunConfig::desk() };
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p, base)?,
        None => base,
    };
    for o in &cli.overrides {
        let (k, v) = o.split_once('=').with_context(|| format!("override `{o}` is not KEY=VALUE"))?;
        cfg.set(&k.split_whitespace().collect::<Vec<_>>().join(" "), v.trim())?;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(given: &Option<PathBuf>, default: &str) -> Result<PathBuf> {
    let dir = given.clone().unwrap_or_else(|| data_root().join(default));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn split_scenes(cfg: &RunConfig, split: Split) -> Result<Vec<NavScene>> {
    let seeds = match split {
        Split::Train => &cfg.train_scenes,
        Split::Val => &cfg.val_scenes,
        Split::Test => &cfg.test_scenes,
    };
    Ok(cfg.build_scenes(seeds)?)
}

fn load_models(cfg: &RunConfig, path: &Path) -> Result<TrainedModels> {
    let ckpt = Checkpoint::load(path)?;
    TrainedModels::from_checkpoint(cfg, &ckpt).with_context(|| format!("loading {}", path.display()))
}

fn write_eval(dir: &Path, report: &MetricsReport, traces: &[rirnav::harness::EpisodeTrace]) -> Result<()> {
    report.write_csv(BufWriter::new(File::create(dir.join("metrics.csv"))?))?;
    std::fs::write(dir.join("summary.json"), report.summary_json()?)?;
    write_traces(&dir.join("traces.jsonl"), traces)?;
    let s = report.summary();
    println!(
        "{}: WCR {:.4} ± {:.4}  PE {:.4} ± {:.4}  CR {:.4} ± {:.4}  RTE {:.2} ms  SiSDR {:.2} dB  (RTE skipped {})",
        s.model, s.wcr.mean, s.wcr.std, s.pe.mean, s.pe.std, s.cr.mean, s.cr.std, s.rte_ms.mean, s.sisdr_db.mean, s.rte_skipped
    );
    println!("wrote {}", dir.display());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg = load_config(&cli)?;
    match &cli.cmd {
        Cmd::Scene(SceneCmd::Gen { scene_seed, out }) => {
            let spec = cfg.scene_spec(*scene_seed);
            build_scene(&spec)?;
            std::fs::write(out, write_scene_spec(&spec))?;
            println!("wrote {}", out.display());
        }
        Cmd::Scene(SceneCmd::Info { file }) => {
            let text = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
            let spec = parse_scene_spec(&text)?;
            let scene = build_scene(&spec)?;
            let (nx, ny) = scene.grid_dims();
            println!("size        {} x {} x {} m", spec.width, spec.depth, spec.height);
            println!("resolution  {} m ({nx} x {ny} grid)", spec.resolution);
            println!("nodes       {}", scene.node_count());
            println!("edges       {}", scene.edge_count());
            println!("walls       {}", spec.walls.len());
            println!("absorption  {:?}", spec.absorption);
            println!("max order   {}", spec.max_order);
        }
        Cmd::Rir(RirCmd::Build { split, pairs_per_scene, out }) => {
            let seeds = match split {
                Split::Train => cfg.train_scenes.clone(),
                Split::Val => cfg.val_scenes.clone(),
                Split::Test => cfg.test_scenes.clone(),
            };
            let mut ds = RirDataset::new(cfg.sample_rate, cfg.rir_length);
            let mut rng = stream_rng(cfg.seed, 100, 0);
            for (scene, &id) in split_scenes(&cfg, *split)?.iter().zip(&seeds) {
                for _ in 0..*pairs_per_scene {
                    let pose = rirnav::harness::env::random_start(scene, &mut rng);
                    let source = rng.random_range(0..scene.node_count());
                    let rir = rirnav::harness::env::ground_truth(scene, source, pose[1], cfg.rir_length)?;
                    ds.push(RirRecord {
                        scene_id: id as u32,
                        source_node: source as u32,
                        listener_node: pose[1].node as u32,
                        heading_deg: pose[1].heading.degrees() as u16,
                        predicted: false,
                        rir,
                    })?;
                }
            }
            ds.save(out)?;
            println!("wrote {} records to {}", ds.records.len(), out.display());
        }
        Cmd::Rir(RirCmd::Dump { file, index }) => {
            let ds = RirDataset::load(file)?;
            match index {
                None => {
                    println!("sample rate {} Hz, length {}, records {}", ds.sample_rate, ds.length, ds.records.len());
                    for (i, r) in ds.records.iter().enumerate() {
                        println!(
                            "{i}: scene {} source {} listener {} heading {} predicted {} peak {:.4}",
                            r.scene_id, r.source_node, r.listener_node, r.heading_deg, r.predicted, r.rir.peak()
                        );
                    }
                }
                Some(i) => {
                    let r = ds.records.get(*i).with_context(|| format!("record {i} out of range"))?;
                    println!("sample,left,right");
                    for (k, (l, rr)) in r.rir.channel(0).iter().zip(r.rir.channel(1)).enumerate() {
                        println!("{k},{l:.7e},{rr:.7e}");
                    }
                }
            }
        }
        Cmd::Spec(SpecCmd::Dump { file, index, channel }) => {
            let ds = RirDataset::load(file)?;
            let r = ds.records.get(*index).with_context(|| format!("record {index} out of range"))?;
            if *channel > 1 {
                bail!("channel must be 0 or 1");
            }
            let spec = Stft::new(cfg.stft)?.magnitude(&r.rir.channel_f64(*channel))?;
            let header: Vec<String> = (0..spec.bins).map(|k| format!("bin{k}")).collect();
            println!("frame,{}", header.join(","));
            for f in 0..spec.frames {
                let row: Vec<String> = spec.frame(f).iter().map(|v| format!("{v:.6e}")).collect();
                println!("{f},{}", row.join(","));
            }
        }
        Cmd::Pretrain { out, updates } => {
            let dir = out_dir(out, "pretrain")?;
            let scenes = split_scenes(&cfg, Split::Train)?;
            let res = pretrain_generator(&cfg, &scenes, None, *updates, &mut |u, l| {
                if u % 10 == 0 {
                    eprintln!("pretrain {u}: L_xi {l:.4}");
                }
            })?;
            res.models.checkpoint().save(&dir.join("checkpoint.bin"))?;
            let log = res.losses.iter().enumerate().map(|(i, l)| format!("{i},{l:.9}\n")).collect::<String>();
            std::fs::write(dir.join("pretrain_loss.csv"), format!("update,l_xi\n{log}"))?;
            println!("wrote {}", dir.display());
        }
        Cmd::Train { out, init } => {
            let dir = out_dir(out, "train")?;
            let scenes = split_scenes(&cfg, Split::Train)?;
            let init = match init {
                Some(p) => {
                    let mut m = TrainedModels::init(&cfg)?;
                    m.load_predictor(&Checkpoint::load(p)?)?;
                    Some(m)
                }
                None => None,
            };
            let every = (cfg.updates / 100).max(1);
            train(&cfg, &scenes, init, Some(&dir), &mut |l| {
                if l.update % every == 0 {
                    eprintln!(
                        "update {}: L {:.4} (L_m {:.4}, L_xi {:.4}) reward(50) {}",
                        l.update,
                        l.total,
                        l.l_m,
                        l.l_xi.total,
                        l.reward_window_mean.map(|r| format!("{r:.4}")).unwrap_or_else(|| "-".into())
                    );
                }
            })?;
            println!("wrote {}", dir.display());
        }
        Cmd::Eval(a) => {
            let dir = out_dir(&a.out, "eval")?;
            let models = load_models(&cfg, &a.checkpoint)?;
            let scenes = split_scenes(&cfg, Split::Test)?;
            let opts = EvalOptions { greedy: a.greedy, si_projection: a.si_projection, ..Default::default() };
            let res = evaluate(&cfg, &scenes, &models, ModelKind::Trained, None, opts)?;
            write_eval(&dir, &res.report, &res.traces)?;
        }
        Cmd::Baseline(BaselineCmd::Run { name, checkpoint, out, bank_episodes, si_projection }) => {
            let kind = match name {
                BaselineName::Random => ModelKind::Random,
                BaselineName::Nn => ModelKind::NearestNeighbor,
                BaselineName::Occupancy => ModelKind::Occupancy,
                BaselineName::Curiosity => ModelKind::Curiosity,
            };
            let dir = out_dir(out, &format!("baseline_{}", kind.tag()))?;
            let models = match checkpoint {
                Some(p) => load_models(&cfg, p)?,
                None => TrainedModels::init(&cfg)?,
            };
            let bank = match kind {
                ModelKind::NearestNeighbor => Some(build_nn_bank(&cfg, &split_scenes(&cfg, Split::Train)?, &models, *bank_episodes)?),
                _ => None,
            };
            let scenes = split_scenes(&cfg, Split::Test)?;
            let opts = EvalOptions { si_projection: *si_projection, ..Default::default() };
            let res = evaluate(&cfg, &scenes, &models, kind, bank.as_ref(), opts)?;
            write_eval(&dir, &res.report, &res.traces)?;
        }
        Cmd::Analyze(AnalyzeCmd::Interventions { checkpoint, out }) => {
            let dir = out_dir(out, "interventions")?;
            let models = load_models(&cfg, checkpoint)?;
            let scenes = split_scenes(&cfg, Split::Test)?;
            let act = action_intervention(&cfg, &scenes, &models)?;
            act.write_rows_csv(BufWriter::new(File::create(dir.join("action_importance_steps.csv"))?))?;
            act.write_summary_csv(BufWriter::new(File::create(dir.join("action_importance.csv"))?))?;
            let pe = pe_intervention(&cfg, &scenes, &models)?;
            pe.write_csv(BufWriter::new(File::create(dir.join("pe_importance.csv"))?))?;
            for (j, m) in act.mean.iter().enumerate() {
                println!("agent {j}: vision {:.3} azimuth {:.3} position {:.3}", m[0], m[1], m[2]);
            }
            println!("PE: vision {:.3} azimuth {:.3} position {:.3}", pe.normalized[0], pe.normalized[1], pe.normalized[2]);
            println!("wrote {}", dir.display());
        }
        Cmd::Report { traces, out, checkpoint } => {
            let list = rirnav::harness::load_traces(traces)?;
            let models = match checkpoint {
                Some(p) => Some(load_models(&cfg, p)?),
                None => None,
            };
            let res = write_report(out, &cfg, &list, models.as_ref())?;
            for w in &res.warnings {
                eprintln!("warning: {w}");
            }
            println!("wrote {} files", res.files.len());
        }
        Cmd::Metrics(MetricsCmd::Report { csv, out }) => {
            let text = std::fs::read_to_string(csv).with_context(|| format!("reading {}", csv.display()))?;
            let report = MetricsReport::read_csv(&text, cfg.lambda)?;
            if report.episodes.is_empty() {
                bail!("{} has no episode rows", csv.display());
            }
            let json = report.summary_json()?;
            match out {
                Some(p) => std::fs::write(p, &json)?,
                None => println!("{json}"),
            }
        }
    }
    Ok(())
}
