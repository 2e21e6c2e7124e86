use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use trajatlas::metrics::{self, FrameSeries, MetricsError, VoteSet};
use trajatlas::pipeline::{self, PipelineError, RunConfig, RunContext};
use trajatlas::render::{read_frame_sequence, read_mask_sequence};

#[derive(Parser)]
#[command(name = "trajatlas", version, about = "Paired trajectory video generator and evaluation tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate pairs for a seed range into sharded output directories
    Generate {
        /// TOML run configuration; defaults are used when omitted
        #[arg(long)]
        config: Option<PathBuf>,
        /// Inclusive seed range, e.g. 0..49
        #[arg(long, value_parser = parse_seed_range)]
        seeds: Option<(u64, u64)>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<u32>,
    },
    /// Print a pair's manifest summary and re-check its files
    Inspect {
        #[arg(long)]
        pair: PathBuf,
        /// Also write the result as JSON
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Score predicted masks or frames against ground truth
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, value_enum)]
        metric: Metric,
        /// Per-frame JSON report [default: eval_<metric>.json]
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Fit Bradley–Terry strengths to pairwise votes
    Rank {
        /// CSV with header `winner,loser`
        #[arg(long)]
        votes: PathBuf,
        #[arg(long, default_value_t = metrics::DEFAULT_ALPHA)]
        alpha: f64,
        /// Also write the ranking as JSON
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Metric {
    Iou,
    Ssim,
}

fn parse_seed_range(s: &str) -> Result<(u64, u64), String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected A..B, got `{s}`"))?;
    let a: u64 = a.trim().parse().map_err(|e| format!("seed range start: {e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("seed range end: {e}"))?;
    if a > b {
        return Err(format!("seed range start {a} exceeds end {b}"));
    }
    Ok((a, b))
}

/// Exit 1 for bad input, exit 2 for failures while doing the work.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn pipeline_failure(e: PipelineError) -> Failure {
    match e {
        PipelineError::Config(_) | PipelineError::Disjointness(_) => usage(e),
        other => Failure::Runtime(other.into()),
    }
}

fn metrics_failure(e: MetricsError) -> Failure {
    match e {
        MetricsError::Mismatch(_) | MetricsError::Csv { .. } | MetricsError::InvalidVotes(_) => usage(e),
        other => Failure::Runtime(other.into()),
    }
}

fn write_report<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))
}

fn generate(
    config: Option<PathBuf>,
    seeds: Option<(u64, u64)>,
    out: Option<PathBuf>,
    workers: Option<u32>,
) -> Result<(), Failure> {
    let mut cfg = match &config {
        Some(p) => RunConfig::load(p).map_err(|e| match e {
            PipelineError::Io { .. } => Failure::Runtime(e.into()),
            other => usage(other),
        })?,
        None => RunConfig::default(),
    };
    if seeds.is_some() {
        cfg.seeds = seeds;
    }
    if let Some(w) = workers {
        cfg.workers = w;
    }
    let out = out
        .or_else(|| cfg.output_root.clone())
        .ok_or_else(|| usage(anyhow!("no output directory: pass --out or set output_root")))?;
    let shards = match (&cfg.shard_seeds, cfg.seeds) {
        (Some(explicit), _) => explicit.clone(),
        (None, Some((a, b))) => {
            let all: Vec<u64> = (a..=b).collect();
            pipeline::plan_shards(&all, cfg.workers as usize)
        }
        (None, None) => return Err(usage(anyhow!("no seeds: pass --seeds A..B or set seeds in the config"))),
    };
    let ctx = RunContext::new(cfg).map_err(pipeline_failure)?;
    let summary = pipeline::run(&ctx, &shards, &out).map_err(pipeline_failure)?;
    let m = &summary.manifest;
    println!("seeds processed: {} across {} worker(s)", m.seeds_processed, m.shards.len());
    println!(
        "pairs written: {} (hit {}, no-hit {}, no-hit fraction {:.3})",
        m.pairs_written,
        m.hit_pairs,
        m.no_hit_pairs,
        m.no_hit_fraction()
    );
    let rejected: usize = m.rejections_by_reason.values().sum();
    println!("rejections: {rejected}");
    for (reason, n) in &m.rejections_by_reason {
        println!("  {n:>4}  {reason}");
    }
    println!("manifest: {}", out.join(pipeline::RUN_MANIFEST).display());
    println!("elapsed: {:.2} s", summary.elapsed.as_secs_f64());
    Ok(())
}

#[derive(Serialize)]
struct InspectReport<'a> {
    pair: &'a Path,
    seed: u64,
    task: Option<String>,
    hit: Option<bool>,
    delta: Option<[f64; 3]>,
    counts: [usize; 4],
    passed: bool,
    failure: Option<&'static str>,
}

fn inspect(dir: &Path, report: Option<PathBuf>) -> Result<(), Failure> {
    let ins = pipeline::inspect_pair(dir).with_context(|| format!("inspecting {}", dir.display()))?;
    let r = &ins.record;
    let task = r.task.as_ref().map(|t| t.kind.to_string());
    let delta = r.delta().map(|d| [d.x, d.y, d.z]);
    println!("pair: {}", dir.display());
    println!("seed: {}", r.seed);
    println!("task: {}", task.as_deref().unwrap_or("-"));
    match r.hit {
        Some(h) => println!("hit: {h}"),
        None => println!("hit: -"),
    }
    match delta {
        Some([x, y, z]) => println!("delta: ({x:.6}, {y:.6}, {z:.6})"),
        None => println!("delta: -"),
    }
    let [fa, ma, fb, mb] = ins.counts;
    println!(
        "frames: A {fa} frames / {ma} masks, B {fb} frames / {mb} masks (expected {} at {}x{})",
        r.frames, r.width, r.height
    );
    match ins.check {
        Ok(()) => println!("check: pass"),
        Err(reason) => println!("check: FAIL ({reason})"),
    }
    if let Some(path) = report {
        write_report(
            &path,
            &InspectReport {
                pair: dir,
                seed: r.seed,
                task,
                hit: r.hit,
                delta,
                counts: ins.counts,
                passed: ins.check.is_ok(),
                failure: ins.check.err(),
            },
        )?;
    }
    ins.check
        .map_err(|reason| Failure::Runtime(anyhow!("canonical output check failed: {reason}")))
}

#[derive(Serialize)]
struct EvalReport<'a> {
    metric: Metric,
    pred: &'a Path,
    gt: &'a Path,
    mean: f64,
    valid_frames: usize,
    per_frame: &'a [Option<f64>],
}

fn eval(pred: &Path, gt: &Path, metric: Metric, report: Option<PathBuf>) -> Result<(), Failure> {
    let series: FrameSeries = match metric {
        Metric::Iou => {
            let p = read_mask_sequence(pred)?;
            let g = read_mask_sequence(gt)?;
            metrics::iou_traj(&p, &g).map_err(metrics_failure)?
        }
        Metric::Ssim => {
            let p = read_frame_sequence(pred)?;
            let g = read_frame_sequence(gt)?;
            let gm = read_mask_sequence(gt)?;
            let pm = read_mask_sequence(pred)?;
            let pm = (!pm.is_empty()).then_some(pm.as_slice());
            metrics::ssim_bg_video(&p, &g, &gm, pm).map_err(metrics_failure)?
        }
    };
    let name = match metric {
        Metric::Iou => "iou",
        Metric::Ssim => "ssim",
    };
    let path = report.unwrap_or_else(|| PathBuf::from(format!("eval_{name}.json")));
    write_report(
        &path,
        &EvalReport {
            metric,
            pred,
            gt,
            mean: series.mean,
            valid_frames: series.valid_frames(),
            per_frame: &series.values,
        },
    )?;
    println!("frames scored: {} of {}", series.valid_frames(), series.values.len());
    println!("{name}: {:.4}", series.mean);
    println!("report: {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct RankEntry<'a> {
    item: &'a str,
    utility: f64,
}

/// Four-decimal formatting without a stray `-0.0000`.
fn fmt4(v: f64) -> String {
    let s = format!("{v:.4}");
    if s == "-0.0000" {
        "0.0000".into()
    } else {
        s
    }
}

fn rank(votes: &Path, alpha: f64, report: Option<PathBuf>) -> Result<(), Failure> {
    let set = VoteSet::read_csv(votes).map_err(metrics_failure)?;
    let fit = metrics::bt_fit_ilsr(&set, alpha).map_err(metrics_failure)?;
    let ranked = fit.ranked();
    let width = ranked.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
    println!("{} votes, {} items, alpha {alpha}, {} iterations", set.votes.len(), set.items.len(), fit.iterations);
    for (i, (name, u)) in ranked.iter().enumerate() {
        println!("{:>3}. {name:<width$}  {:>8}", i + 1, fmt4(*u));
    }
    if let Some(path) = report {
        let entries: Vec<RankEntry> = ranked.iter().map(|&(item, utility)| RankEntry { item, utility }).collect();
        write_report(&path, &entries)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Generate {
            config,
            seeds,
            out,
            workers,
        } => generate(config, seeds, out, workers),
        Command::Inspect { pair, report } => inspect(&pair, report),
        Command::Eval {
            pred,
            gt,
            metric,
            report,
        } => eval(&pred, &gt, metric, report),
        Command::Rank { votes, alpha, report } => rank(&votes, alpha, report),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
