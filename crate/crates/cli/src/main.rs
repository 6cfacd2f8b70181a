use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use segtran::evaluation::{
    ablation_csv, evaluate_test, export_case_study, run_ablation_suite, run_ratio_sweep, run_sensitivity_grid, summary_csv, FinalMetrics,
    RunDir, RunResult,
};
use segtran::graphs::{build_ba_dataset, Dataset, DatasetCounts};
use segtran::training::{Session, TrainConfig};
use segtran::Error;

#[derive(Parser)]
#[command(name = "segtran", version, about = "Semi-supervised graph-to-graph translation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a Barabási–Albert dataset with 2-hop reachability targets.
    GenData(GenData),
    /// Train one model and write a run directory.
    Train(Train),
    /// Score a run directory's checkpoint on a dataset's test pairs.
    Eval(Eval),
    /// Train every ablation variant over several seeds.
    Ablate(Ablate),
    /// Vary the share of unpaired training graphs.
    SweepRatio(SweepRatio),
    /// Vary the reconstruction and MI weights from shared pretraining.
    SweepSensitivity(SweepSensitivity),
    /// Export one translated test pair as DOT files.
    CaseStudy(CaseStudyArgs),
}

#[derive(Args)]
struct GenData {
    #[arg(long, default_value_t = 20)]
    nodes: usize,
    #[arg(long, default_value_t = 150)]
    paired: usize,
    #[arg(long, default_value_t = 150)]
    unpaired_source: usize,
    #[arg(long, default_value_t = 150)]
    unpaired_target: usize,
    #[arg(long, default_value_t = 100)]
    test: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Configuration sources, lowest precedence first: defaults, `--config`,
/// `--set`, then the named flags.
#[derive(Args)]
struct ConfigArgs {
    /// TOML file with dotted keys, e.g. `lambda = 0.7` or `[model]`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set epochs.finetune=50`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_override)]
    overrides: Vec<(String, String)>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    mu: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    lr: Option<String>,
}

fn parse_override(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

impl ConfigArgs {
    fn resolve(&self) -> segtran::Result<TrainConfig> {
        let mut all = self.overrides.clone();
        let named = [("seed", &self.seed), ("lambda", &self.lambda), ("mu", &self.mu), ("delta", &self.delta), ("lr", &self.lr)];
        all.extend(named.into_iter().filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone()))));
        TrainConfig::resolve(self.config.as_deref(), &all)
    }
}

#[derive(Args)]
struct Train {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct Eval {
    /// Run directory holding `checkpoint.json`.
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Anchor seed; defaults to the run's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct Sweep {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Replicates per point.
    #[arg(long, default_value_t = 3)]
    seeds: usize,
    /// Worker threads; 0 uses one per core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct Ablate {
    #[command(flatten)]
    sweep: Sweep,
}

#[derive(Args)]
struct SweepRatio {
    #[command(flatten)]
    sweep: Sweep,
    /// Unpaired share of the training graphs, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6")]
    ratios: Vec<f64>,
}

#[derive(Args)]
struct SweepSensitivity {
    #[command(flatten)]
    sweep: Sweep,
    #[arg(long, value_delimiter = ',', default_value = "0.3,0.7,1.0,1.3")]
    lambdas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.3,0.7,1.0,1.3")]
    mus: Vec<f64>,
}

#[derive(Args)]
struct CaseStudyArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Test pair to translate.
    #[arg(long, default_value_t = 0)]
    index: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn load_data(dir: &Path) -> segtran::Result<Dataset> {
    Ok(Dataset::load(dir)?)
}

fn print_json(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("plain data serializes"));
}

fn gen_data(a: &GenData) -> segtran::Result<()> {
    let counts = DatasetCounts { paired_train: a.paired, unpaired_source: a.unpaired_source, unpaired_target: a.unpaired_target, paired_test: a.test };
    build_ba_dataset(counts, a.nodes, a.seed)?.save(&a.out, Some(a.nodes), Some(a.seed))?;
    println!("wrote {} ({} paired, {}+{} unpaired, {} test)", a.out.display(), a.paired, a.unpaired_source, a.unpaired_target, a.test);
    Ok(())
}

fn train(a: &Train) -> segtran::Result<()> {
    let cfg = a.config.resolve()?;
    let dir = RunDir::create(&a.out, &cfg)?;
    let data = load_data(&a.data)?;
    dir.log(&format!("data {}", a.data.display()))?;
    let mut session = Session::new(&cfg, &data)?;
    let untrained = evaluate_test(&session.model, &data.paired_test, cfg.seed)?;
    while let Some(r) = session.step_epoch(&data)? {
        dir.log(&format!("{} epoch {} total {}", r.phase, r.epoch + 1, r.total))?;
        if session.checkpoint_due(&r) {
            session.save(dir.path(), "checkpoint")?;
        }
    }
    let metrics = evaluate_test(&session.model, &data.paired_test, cfg.seed)?;
    let run = RunResult { session, metrics, untrained };
    dir.write_results(&run)?;
    dir.log("done")?;
    print_json(&FinalMetrics::new(run.metrics, run.untrained));
    Ok(())
}

fn eval(a: &Eval) -> segtran::Result<()> {
    let session = Session::load(&a.run, "checkpoint")?;
    let data = load_data(&a.data)?;
    let m = evaluate_test(&session.model, &data.paired_test, a.seed.unwrap_or(session.config.seed))?;
    print_json(&m);
    Ok(())
}

/// Resolves the config and writes its snapshot into the output directory
/// before any training.
fn start_sweep(s: &Sweep) -> segtran::Result<(TrainConfig, RunDir, Dataset)> {
    let cfg = s.config.resolve()?;
    let dir = RunDir::create(&s.out, &cfg)?;
    let data = load_data(&s.data)?;
    Ok((cfg, dir, data))
}

fn finish(dir: &RunDir, name: &str, csv: String) -> segtran::Result<()> {
    dir.write(name, &csv)?;
    dir.log("done")?;
    print!("{csv}");
    Ok(())
}

fn ablate(a: &Ablate) -> segtran::Result<()> {
    let (cfg, dir, data) = start_sweep(&a.sweep)?;
    let rows = run_ablation_suite(&data, &cfg, a.sweep.seeds, a.sweep.threads)?;
    finish(&dir, "ablation.csv", ablation_csv(&rows))
}

fn sweep_ratio(a: &SweepRatio) -> segtran::Result<()> {
    let (cfg, dir, data) = start_sweep(&a.sweep)?;
    let rows = run_ratio_sweep(&data, &cfg, &a.ratios, a.sweep.seeds, a.sweep.threads)?;
    let rows: Vec<_> = rows.into_iter().map(|(r, s)| (vec![r.to_string()], s)).collect();
    finish(&dir, "ratio_sweep.csv", summary_csv(&["ratio"], &rows))
}

fn sweep_sensitivity(a: &SweepSensitivity) -> segtran::Result<()> {
    let (cfg, dir, data) = start_sweep(&a.sweep)?;
    let rows = run_sensitivity_grid(&data, &cfg, &a.lambdas, &a.mus, a.sweep.seeds, a.sweep.threads)?;
    let rows: Vec<_> = rows.into_iter().map(|((l, m), s)| (vec![l.to_string(), m.to_string()], s)).collect();
    finish(&dir, "sensitivity.csv", summary_csv(&["lambda", "mu"], &rows))
}

fn case_study(a: &CaseStudyArgs) -> segtran::Result<()> {
    let session = Session::load(&a.run, "checkpoint")?;
    let data = load_data(&a.data)?;
    let pair = data.paired_test.get(a.index).ok_or_else(|| {
        Error::Config { key: "index".into(), message: format!("test set has {} pairs", data.paired_test.len()) }
    })?;
    let cs = export_case_study(&session.model, pair, a.seed, &a.out)?;
    let drawn = cs.edges.iter().filter(|e| e.bucket != segtran::evaluation::EdgeBucket::Omitted).count();
    println!("wrote {} ({drawn} of {} node pairs drawn)", a.out.display(), cs.edges.len());
    Ok(())
}

/// Bad input is 1, failures while running are 2.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::NoPairedData | Error::TooFewUnpaired(_) | Error::EmptyTestSet | Error::EmptyDataset => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Ablate(a) => ablate(a),
        Command::SweepRatio(a) => sweep_ratio(a),
        Command::SweepSensitivity(a) => sweep_sensitivity(a),
        Command::CaseStudy(a) => case_study(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
