//! Sharded batch runs: each worker owns a disjoint seed list and a
//! `shard_<k>` directory; a run manifest merges the shard results.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::pair::{generate_pair, PairRecord};
use super::{io_err, ObjectPool, PipelineError, RunConfig};

pub const RUN_MANIFEST: &str = "run_manifest.json";
pub const SHARD_MANIFEST: &str = "shard_manifest.json";

/// Validated configuration plus everything derived from it once per run.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub config: RunConfig,
    pub pool: ObjectPool,
    pub config_hash: String,
}

impl RunContext {
    pub fn new(config: RunConfig) -> Result<RunContext, PipelineError> {
        config.validate()?;
        let pool = ObjectPool::load(&config.objects)?;
        let config_hash = config.hash();
        Ok(RunContext {
            config,
            pool,
            config_hash,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShardManifest {
    pub worker_id: usize,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub successes: usize,
    pub rejections: usize,
    pub records: Vec<PairRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShardSummary {
    pub worker_id: usize,
    pub dir: String,
    pub seeds_processed: usize,
    pub successes: usize,
    pub rejections: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub config_hash: String,
    pub seeds_processed: usize,
    pub pairs_written: usize,
    pub hit_pairs: usize,
    pub no_hit_pairs: usize,
    pub rejections_by_reason: BTreeMap<String, usize>,
    pub shards: Vec<ShardSummary>,
}

impl RunManifest {
    pub fn no_hit_fraction(&self) -> f64 {
        if self.pairs_written == 0 {
            0.0
        } else {
            self.no_hit_pairs as f64 / self.pairs_written as f64
        }
    }
}

/// Manifest plus wall-clock time, which is kept out of written files so
/// reruns stay byte-identical.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub manifest: RunManifest,
    pub elapsed: Duration,
}

/// Splits `seeds` into at most `workers` contiguous, non-empty chunks.
pub fn plan_shards(seeds: &[u64], workers: usize) -> Vec<Vec<u64>> {
    if seeds.is_empty() {
        return Vec::new();
    }
    let per = seeds.len().div_ceil(workers.max(1));
    seeds.chunks(per).map(<[u64]>::to_vec).collect()
}

fn check_disjoint(shards: &[Vec<u64>]) -> Result<(), PipelineError> {
    let mut seen = BTreeSet::new();
    for s in shards.iter().flatten() {
        if !seen.insert(*s) {
            return Err(PipelineError::Disjointness(*s));
        }
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let json = serde_json::to_string_pretty(value).expect("manifest serializes");
    fs::write(path, json + "\n").map_err(io_err(path))
}

/// Processes `seeds` in order into `out_root/shard_<worker_id>/`. Per-seed
/// failures become rejection records and never stop the shard.
pub fn run_shard(
    ctx: &RunContext,
    seeds: &[u64],
    worker_id: usize,
    out_root: &Path,
) -> Result<ShardManifest, PipelineError> {
    let dir = out_root.join(format!("shard_{worker_id}"));
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let records: Vec<PairRecord> = seeds.iter().map(|&s| generate_pair(s, ctx, &dir)).collect();
    let successes = records.iter().filter(|r| r.accepted).count();
    let manifest = ShardManifest {
        worker_id,
        config_hash: ctx.config_hash.clone(),
        seeds: seeds.to_vec(),
        successes,
        rejections: records.len() - successes,
        records,
    };
    write_json(&dir.join(SHARD_MANIFEST), &manifest)?;
    Ok(manifest)
}

/// Runs every shard on its own thread and writes the merged run manifest.
pub fn run(ctx: &RunContext, shards: &[Vec<u64>], out_root: &Path) -> Result<RunSummary, PipelineError> {
    check_disjoint(shards)?;
    let start = Instant::now();
    fs::create_dir_all(out_root).map_err(io_err(out_root))?;
    let results: Vec<Result<ShardManifest, PipelineError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = shards
            .iter()
            .enumerate()
            .map(|(k, seeds)| scope.spawn(move || run_shard(ctx, seeds, k, out_root)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });

    let mut manifest = RunManifest {
        config: ctx.config.recorded(),
        config_hash: ctx.config_hash.clone(),
        seeds_processed: 0,
        pairs_written: 0,
        hit_pairs: 0,
        no_hit_pairs: 0,
        rejections_by_reason: BTreeMap::new(),
        shards: Vec::new(),
    };
    for shard in results {
        let shard = shard?;
        manifest.seeds_processed += shard.records.len();
        manifest.pairs_written += shard.successes;
        for r in &shard.records {
            match (&r.rejection, r.accepted, r.hit) {
                (_, true, Some(true)) => manifest.hit_pairs += 1,
                (_, true, _) => manifest.no_hit_pairs += 1,
                (Some(reason), false, _) => {
                    *manifest.rejections_by_reason.entry(reason.clone()).or_default() += 1
                }
                (None, false, _) => {}
            }
        }
        manifest.shards.push(ShardSummary {
            worker_id: shard.worker_id,
            dir: format!("shard_{}", shard.worker_id),
            seeds_processed: shard.records.len(),
            successes: shard.successes,
            rejections: shard.rejections,
        });
    }
    write_json(&out_root.join(RUN_MANIFEST), &manifest)?;
    Ok(RunSummary {
        manifest,
        elapsed: start.elapsed(),
    })
}
