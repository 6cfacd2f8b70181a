//! Multi-run experiments: the ablation table, the unpaired-ratio sweep and
//! the λ/μ grid. Replicate `r` of every experiment point trains with seed
//! `derive_seed_at(master, "replicate", r)`, so points are comparable
//! replicate by replicate and each one can be rerun alone.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::Dataset;
use crate::rng::derive_seed_at;
use crate::training::{Phase, Session, TrainConfig};

use super::metrics::{evaluate_test, MetricPair};

pub fn replicate_seed(master: u64, replicate: usize) -> u64 {
    derive_seed_at(master, "replicate", replicate as u64)
}

/// A trained session with its test scores before and after training.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub session: Session,
    pub metrics: MetricPair,
    pub untrained: MetricPair,
}

/// Trains from scratch and scores the test pairs with anchors seeded by
/// `config.seed`, both at initialization and at the end.
pub fn train_and_evaluate(config: &TrainConfig, data: &Dataset) -> Result<RunResult> {
    let mut session = Session::new(config, data)?;
    let untrained = evaluate_test(&session.model, &data.paired_test, config.seed)?;
    session.run(data, None)?;
    let metrics = evaluate_test(&session.model, &data.paired_test, config.seed)?;
    Ok(RunResult { session, metrics, untrained })
}

/// Seed mean and sample standard deviation; deviations are `None` below two
/// runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mse_mean: f64,
    pub mse_std: Option<f64>,
    pub mape_mean: f64,
    pub mape_std: Option<f64>,
    pub runs: Vec<MetricPair>,
}

fn mean_std(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = (xs.len() >= 2).then(|| (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt());
    (mean, std)
}

impl Summary {
    pub fn of(runs: Vec<MetricPair>) -> Result<Summary> {
        if runs.is_empty() {
            return Err(Error::config("seeds", "must be at least 1"));
        }
        let (mse_mean, mse_std) = mean_std(&runs.iter().map(|m| m.mse).collect::<Vec<_>>());
        let (mape_mean, mape_std) = mean_std(&runs.iter().map(|m| m.mape).collect::<Vec<_>>());
        Ok(Summary { mse_mean, mse_std, mape_mean, mape_std, runs })
    }
}

/// One CSV with the given axis columns followed by
/// `mse_mean,mse_std,mape_mean,mape_std`. Missing deviations are empty
/// cells.
pub fn summary_csv(axes: &[&str], rows: &[(Vec<String>, Summary)]) -> String {
    let mut out = axes.join(",");
    out.push_str(",mse_mean,mse_std,mape_mean,mape_std\n");
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for (coords, s) in rows {
        let _ = writeln!(out, "{},{},{},{},{}", coords.join(","), s.mse_mean, opt(s.mse_std), s.mape_mean, opt(s.mape_std));
    }
    out
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if threads > 0 {
        b = b.num_threads(threads);
    }
    b.build().map_err(|e| Error::config("threads", e.to_string()))
}

fn check_seeds(seeds: usize) -> Result<()> {
    if seeds == 0 {
        return Err(Error::config("seeds", "must be at least 1"));
    }
    Ok(())
}

/// Runs `jobs` on a pool of `threads` workers (0 = one per core) and
/// returns the results in job order.
fn run_jobs<J: Sync, T: Send>(threads: usize, jobs: &[J], f: impl Fn(&J) -> Result<T> + Sync) -> Result<Vec<T>> {
    pool(threads)?.install(|| jobs.par_iter().map(&f).collect())
}

/// Ablation variants, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    SharedEmbedding,
    NoPosition,
    NoMi,
    NoAttention,
    Full,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::SharedEmbedding, Variant::NoPosition, Variant::NoMi, Variant::NoAttention, Variant::Full];

    pub fn name(self) -> &'static str {
        match self {
            Variant::SharedEmbedding => "Shared Embedding",
            Variant::NoPosition => "No position",
            Variant::NoMi => "No MI",
            Variant::NoAttention => "No multi-head attention",
            Variant::Full => "full",
        }
    }

    /// `base` with this variant's component removed.
    pub fn apply(self, base: &TrainConfig) -> TrainConfig {
        let mut cfg = base.clone();
        let a = &mut cfg.ablation;
        match self {
            Variant::SharedEmbedding => a.shared_embedding = true,
            Variant::NoPosition => a.no_position = true,
            Variant::NoMi => a.no_mi = true,
            Variant::NoAttention => a.no_attention = true,
            Variant::Full => {}
        }
        cfg
    }
}

/// Trains every variant on the same data and the same replicate seeds.
pub fn run_ablation_suite(data: &Dataset, base: &TrainConfig, seeds: usize, threads: usize) -> Result<Vec<(Variant, Summary)>> {
    check_seeds(seeds)?;
    let jobs: Vec<(Variant, usize)> = Variant::ALL.iter().flat_map(|&v| (0..seeds).map(move |r| (v, r))).collect();
    let results = run_jobs(threads, &jobs, |&(v, r)| {
        let mut cfg = v.apply(base);
        cfg.seed = replicate_seed(base.seed, r);
        Ok(train_and_evaluate(&cfg, data)?.metrics)
    })?;
    let mut it = results.into_iter();
    Variant::ALL.iter().map(|&v| Ok((v, Summary::of(it.by_ref().take(seeds).collect())?))).collect()
}

pub fn ablation_csv(rows: &[(Variant, Summary)]) -> String {
    let rows: Vec<_> = rows.iter().map(|(v, s)| (vec![v.name().to_string()], s.clone())).collect();
    summary_csv(&["variant"], &rows)
}

/// Unpaired graphs kept for `ratio`, read as the unpaired share of all
/// training graphs with the paired count held fixed.
pub fn unpaired_for_ratio(paired: usize, ratio: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::config("ratios", format!("{ratio} is outside [0, 1)")));
    }
    Ok((paired as f64 * ratio / (1.0 - ratio)).round() as usize)
}

/// `data` with its unpaired partitions cut to `total` graphs, split as
/// evenly as possible with the extra one on the source side.
pub fn with_unpaired_prefix(data: &Dataset, total: usize) -> Result<Dataset> {
    let (s, t) = (total.div_ceil(2), total / 2);
    if s > data.unpaired_source.len() || t > data.unpaired_target.len() {
        return Err(Error::config(
            "ratios",
            format!(
                "{total} unpaired graphs needed ({s} source, {t} target) but the dataset has {} and {}",
                data.unpaired_source.len(),
                data.unpaired_target.len()
            ),
        ));
    }
    Ok(Dataset {
        paired_train: data.paired_train.clone(),
        unpaired_source: data.unpaired_source[..s].to_vec(),
        unpaired_target: data.unpaired_target[..t].to_vec(),
        paired_test: data.paired_test.clone(),
    })
}

/// For each ratio, keeps every paired graph and a prefix of the unpaired
/// partitions sized by [`unpaired_for_ratio`], then trains and scores.
pub fn run_ratio_sweep(data: &Dataset, base: &TrainConfig, ratios: &[f64], seeds: usize, threads: usize) -> Result<Vec<(f64, Summary)>> {
    check_seeds(seeds)?;
    if ratios.is_empty() {
        return Err(Error::config("ratios", "must list at least one ratio"));
    }
    let sets = ratios
        .iter()
        .map(|&r| with_unpaired_prefix(data, unpaired_for_ratio(data.paired_train.len(), r)?))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..ratios.len()).flat_map(|i| (0..seeds).map(move |r| (i, r))).collect();
    let results = run_jobs(threads, &jobs, |&(i, r)| {
        let mut cfg = base.clone();
        cfg.seed = replicate_seed(base.seed, r);
        Ok(train_and_evaluate(&cfg, &sets[i])?.metrics)
    })?;
    let mut it = results.into_iter();
    ratios.iter().map(|&r| Ok((r, Summary::of(it.by_ref().take(seeds).collect())?))).collect()
}

/// Pretrains once per replicate, then fine-tunes a copy of that pretrained
/// session for every `(λ, μ)` pair. Rows are λ-major.
pub fn run_sensitivity_grid(
    data: &Dataset,
    base: &TrainConfig,
    lambdas: &[f64],
    mus: &[f64],
    seeds: usize,
    threads: usize,
) -> Result<Vec<((f64, f64), Summary)>> {
    check_seeds(seeds)?;
    if lambdas.is_empty() || mus.is_empty() {
        return Err(Error::config(if lambdas.is_empty() { "lambdas" } else { "mus" }, "must list at least one value"));
    }
    let replicates: Vec<usize> = (0..seeds).collect();
    let pretrained = run_jobs(threads, &replicates, |&r| {
        let mut cfg = base.clone();
        cfg.seed = replicate_seed(base.seed, r);
        let mut s = Session::new(&cfg, data)?;
        s.run_until(data, Phase::Finetune, 0, None)?;
        Ok(s)
    })?;
    let grid: Vec<(f64, f64)> = lambdas.iter().flat_map(|&l| mus.iter().map(move |&m| (l, m))).collect();
    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..seeds).map(move |r| (g, r))).collect();
    let results = run_jobs(threads, &jobs, |&(g, r)| {
        let mut s = pretrained[r].clone();
        (s.config.lambda, s.config.mu) = grid[g];
        s.config.validate()?;
        s.run(data, None)?;
        evaluate_test(&s.model, &data.paired_test, s.config.seed)
    })?;
    let mut it = results.into_iter();
    grid.iter().map(|&p| Ok((p, Summary::of(it.by_ref().take(seeds).collect())?))).collect()
}
