//! End-to-end acceptance criteria. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fail.
//!
//! `ACCEPTANCE_ONLY=1,2,9` runs a subset; the rest print SKIP.

use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use segtran::decoder::{predict_adjacency, reconstruction_loss, Decoded, LinkFunction};
use segtran::encoder::NodeEmbeddings;
use segtran::evaluation::{
    adjacency_errors, evaluate_test, mi_separation, replicate_seed, run_ratio_sweep, weighted_mape, weighted_mse, MetricPair, MiSeparation,
};
use segtran::graphs::{
    build_ba_dataset, generate_ba, k_hop_reachability, position_embedding, Dataset, DatasetCounts, Graph, PositionTransform,
};
use segtran::model::{Ablation, Model, ModelConfig, TRANS};
use segtran::numerics::{check_gradients, Checkpoint, ParamBinder, ParamId, ParamStore, Tape, Tensor, Var};
use segtran::rng::stream;
use segtran::training::{
    estimator_objective, full_objective, records_csv, Batch, EpochRecord, Epochs, GraphItem, PairedItem, Phase, Session, TrainConfig,
    Weights,
};
use segtran::translator::translation_loss;
use segtran::Error;

const SEEDS: usize = 3;
const MASTER_SEED: u64 = 0;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor {
    Tensor::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn random_graph(n: usize, p: f64, d_f: usize, rng: &mut impl Rng) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    let attrs = random(n, d_f, rng);
    Graph::from_edges(n, &edges, attrs).unwrap()
}

fn desk_data() -> Dataset {
    let counts = DatasetCounts { paired_train: 150, unpaired_source: 150, unpaired_target: 150, paired_test: 100 };
    build_ba_dataset(counts, 20, MASTER_SEED).unwrap()
}

fn desk_config() -> TrainConfig {
    TrainConfig { epochs: Epochs { pretrain_ae: 100, pretrain_trans: 100, pretrain_mi: 50, finetune: 300 }, ..Default::default() }
}

fn small_model_config() -> ModelConfig {
    ModelConfig { d_hidden: 4, k: 3, heads: 2, d_k: 3, d_v: 2, attribute_hidden: 5, translator_hidden: 6, mi_hidden: 4, ..Default::default() }
}

/// Replaces zero-initialized parameters (the biases) with random values so
/// ReLU inputs stay off the kink, where central differences average the
/// one-sided slopes.
fn randomize_biases(store: &mut ParamStore, rng: &mut impl Rng) {
    for id in store.ids().collect::<Vec<_>>() {
        if store.value(id).data().iter().all(|&x| x == 0.0) {
            for x in store.value_mut(id).data_mut() {
                *x = rng.random_range(-0.5..0.5);
            }
        }
    }
}

// ---- 1 -------------------------------------------------------------------

type OpFn = for<'t> fn(&[Var<'t>], &'t Tape) -> Result<Var<'t>, Error>;

/// Builds a scalar from `op`'s output by a fixed random weighting so every
/// output entry contributes a distinct gradient.
fn op_check(name: &str, shapes: &[[usize; 2]], op: OpFn, rng: &mut impl Rng, worst: &mut (f64, String)) -> Result<(), String> {
    for _ in 0..20 {
        let mut store = ParamStore::new();
        let ids: Vec<ParamId> = shapes.iter().enumerate().map(|(i, s)| store.add(format!("x{i}"), random(s[0], s[1], rng))).collect();
        let probe = {
            let tape = Tape::new();
            let b = ParamBinder::frozen(&tape, &store);
            let inputs: Vec<_> = ids.iter().map(|&id| b.var(id)).collect();
            op(&inputs, &tape).map_err(|e| format!("{name}: {e}"))?.value()
        };
        let weights = random(probe.rows(), probe.cols(), rng);
        let result = check_gradients::<Error, _>(&mut store, &ids, 1e-6, |b| {
            let inputs: Vec<_> = ids.iter().map(|&id| b.var(id)).collect();
            let out = op(&inputs, b.tape())?;
            Ok(out.mul(b.tape().constant(weights.clone()))?.sum())
        })
        .map_err(|e| format!("{name}: {e}"))?;
        if result.rel_error > worst.0 {
            *worst = (result.rel_error, name.to_string());
        }
        if result.rel_error >= 1e-5 {
            return Err(format!("{name}: relative error {:.2e}", result.rel_error));
        }
    }
    Ok(())
}

fn composite_check(
    name: &str,
    rng: &mut impl Rng,
    worst: &mut (f64, String),
    loss: impl for<'t> Fn(&Model, &ParamBinder<'t, '_>, &Dataset) -> Result<Var<'t>, Error>,
) -> Result<(), String> {
    let counts = DatasetCounts { paired_train: 2, unpaired_source: 3, unpaired_target: 2, paired_test: 0 };
    for trial in 0..20 {
        let data = build_ba_dataset(counts, 6, trial).unwrap();
        let mut model = Model::new(&small_model_config(), Ablation::default(), 6, 6, trial).unwrap();
        randomize_biases(&mut model.store, rng);
        let ids: Vec<ParamId> = model.store.ids().collect();
        let mut store = std::mem::take(&mut model.store);
        let result = check_gradients::<Error, _>(&mut store, &ids, 1e-6, |b| loss(&model, b, &data)).map_err(|e| format!("{name}: {e}"))?;
        if result.rel_error > worst.0 {
            *worst = (result.rel_error, name.to_string());
        }
        if result.rel_error >= 1e-5 || result.analytic_norm == 0.0 {
            return Err(format!("{name}: trial {trial} relative error {:.2e}, gradient norm {:.2e}", result.rel_error, result.analytic_norm));
        }
    }
    Ok(())
}

fn anchors(model: &Model, g: &Graph, tag: &str) -> Vec<usize> {
    model.draw_anchors(g, &mut stream(1, tag)).unwrap()
}

fn gradient_correctness() -> Outcome {
    let mut rng = stream(101, "acceptance/gradients");
    let mut worst = (0.0, String::new());
    let ops: Vec<(&str, Vec<[usize; 2]>, OpFn)> = vec![
        ("matmul", vec![[3, 4], [4, 2]], |x, _| Ok(x[0].matmul(x[1])?)),
        ("matmul_t", vec![[3, 4], [2, 4]], |x, _| Ok(x[0].matmul_t(x[1])?)),
        ("transpose", vec![[3, 4]], |x, _| Ok(x[0].transpose())),
        ("add", vec![[3, 4], [3, 4]], |x, _| Ok(x[0].add(x[1])?)),
        ("sub", vec![[3, 4], [3, 4]], |x, _| Ok(x[0].sub(x[1])?)),
        ("mul", vec![[3, 4], [3, 4]], |x, _| Ok(x[0].mul(x[1])?)),
        ("add_row", vec![[3, 4], [1, 4]], |x, _| Ok(x[0].add_row(x[1])?)),
        ("scale", vec![[3, 4]], |x, _| Ok(x[0].scale(-1.7))),
        ("neg", vec![[3, 4]], |x, _| Ok(x[0].neg())),
        ("relu", vec![[3, 4]], |x, _| Ok(x[0].relu())),
        ("sigmoid", vec![[3, 4]], |x, _| Ok(x[0].sigmoid())),
        ("softplus", vec![[3, 4]], |x, _| Ok(x[0].softplus())),
        ("concat rows", vec![[2, 3], [3, 3]], |x, t| Ok(t.concat(&[x[0], x[1]], 0)?)),
        ("concat cols", vec![[3, 2], [3, 3]], |x, t| Ok(t.concat(&[x[0], x[1]], 1)?)),
        ("slice_cols", vec![[3, 5]], |x, _| Ok(x[0].slice_cols(1, 4)?)),
        ("select_rows", vec![[4, 3]], |x, _| Ok(x[0].select_rows(&[2, 0, 2, 3])?)),
        ("mean_rows", vec![[4, 3]], |x, _| Ok(x[0].mean_rows()?)),
        ("sum", vec![[4, 3]], |x, _| Ok(x[0].sum())),
        ("mean", vec![[4, 3]], |x, _| Ok(x[0].mean()?)),
        ("row_softmax", vec![[3, 4]], |x, _| Ok(x[0].row_softmax())),
        ("frobenius_sq", vec![[3, 4]], |x, _| Ok(x[0].frobenius_sq())),
    ];
    for (name, shapes, op) in &ops {
        op_check(name, shapes, *op, &mut rng, &mut worst)?;
    }
    let delta = 0.5;
    composite_check("reconstruction loss", &mut rng, &mut worst, |m, b, d| {
        let g = &d.unpaired_source[0];
        let emb = m.encode_source(b, g, &anchors(m, g, "r"))?;
        reconstruction_loss(b.tape(), g, &m.dec_s.decode(b, &emb)?, delta)
    })?;
    composite_check("translation loss", &mut rng, &mut worst, |m, b, d| {
        let p = &d.paired_train[0];
        let a = anchors(m, p.source(), "t");
        let pred = m.translate(b, &m.encode_source(b, p.source(), &a)?)?;
        translation_loss(&pred, &m.encode_target(b, p.target(), &a)?)
    })?;
    composite_check("combined objective", &mut rng, &mut worst, |m, b, d| {
        let batch = Batch {
            paired: d.paired_train.iter().map(|p| PairedItem { pair: p, anchors: anchors(m, p.source(), "p") }).collect(),
            sources: d.unpaired_source.iter().map(|g| GraphItem { graph: g, anchors: anchors(m, g, "s") }).collect(),
            targets: d.unpaired_target.iter().map(|g| GraphItem { graph: g, anchors: anchors(m, g, "u") }).collect(),
            derangement: Some(vec![2, 0, 1]),
        };
        Ok(full_objective(m, b, &batch, Weights { lambda: 0.8, mu: 1.2, delta })?.total)
    })?;
    composite_check("estimator loss", &mut rng, &mut worst, |m, b, d| {
        let items: Vec<_> = d.unpaired_source.iter().map(|g| GraphItem { graph: g, anchors: anchors(m, g, "e") }).collect();
        Ok(estimator_objective(m, b, &items, &[1, 2, 0])?.estimator_loss)
    })?;
    Ok(format!("{} ops + 4 losses x 20 trials, worst relative error {:.1e} ({})", ops.len(), worst.0, worst.1))
}

// ---- 2 -------------------------------------------------------------------

fn boolean_power_reachability(g: &Graph, k: usize) -> Vec<Vec<bool>> {
    let n = g.n();
    let a: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| g.has_edge(i, j)).collect()).collect();
    let mut power = a.clone();
    let mut reach = a.clone();
    for _ in 1..k {
        let next: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| (0..n).any(|m| power[i][m] && a[m][j])).collect()).collect();
        for i in 0..n {
            for j in 0..n {
                reach[i][j] |= next[i][j];
            }
        }
        power = next;
    }
    for (i, row) in reach.iter_mut().enumerate() {
        row[i] = false;
    }
    reach
}

fn floyd_warshall(g: &Graph) -> Vec<Vec<Option<usize>>> {
    let n = g.n();
    let mut d: Vec<Vec<Option<usize>>> =
        (0..n).map(|i| (0..n).map(|j| if i == j { Some(0) } else if g.has_edge(i, j) { Some(1) } else { None }).collect()).collect();
    for m in 0..n {
        for i in 0..n {
            for j in 0..n {
                if let (Some(a), Some(b)) = (d[i][m], d[m][j]) {
                    if d[i][j].is_none_or(|c| a + b < c) {
                        d[i][j] = Some(a + b);
                    }
                }
            }
        }
    }
    d
}

fn graph_oracles() -> Outcome {
    let mut rng = stream(102, "acceptance/graphs");
    for t in 0..100 {
        let n = rng.random_range(1..=30);
        let g = random_graph(n, rng.random_range(0.02..0.4), 1, &mut rng);
        let k = rng.random_range(1..=4);
        let got = k_hop_reachability(&g, k).map_err(|e| e.to_string())?;
        let want = boolean_power_reachability(&g, k);
        for i in 0..n {
            for j in 0..n {
                if got.has_edge(i, j) != want[i][j] {
                    return Err(format!("k-hop graph {t} (n={n}, k={k}) differs at ({i}, {j})"));
                }
            }
        }
    }
    for t in 0..50 {
        let n = rng.random_range(1..=30);
        let g = random_graph(n, rng.random_range(0.02..0.3), 1, &mut rng);
        let anchors: Vec<usize> = (0..rng.random_range(1..=8)).map(|_| rng.random_range(0..n)).collect();
        let dist = floyd_warshall(&g);
        for transform in [PositionTransform::Reciprocal, PositionTransform::RawHops] {
            let got = position_embedding(&g, &anchors, transform).map_err(|e| e.to_string())?.values;
            for i in 0..n {
                for (c, &a) in anchors.iter().enumerate() {
                    let want = match (transform, dist[i][a]) {
                        (PositionTransform::Reciprocal, Some(d)) => 1.0 / (d as f64 + 1.0),
                        (PositionTransform::Reciprocal, None) => 0.0,
                        (PositionTransform::RawHops, Some(d)) => d as f64,
                        (PositionTransform::RawHops, None) => n as f64,
                    };
                    if got.get(i, c) != want {
                        return Err(format!("position graph {t} node {i} anchor {a} {transform:?}: {} vs {want}", got.get(i, c)));
                    }
                }
            }
        }
    }
    Ok("100 reachability graphs and 50 position graphs match exactly".into())
}

// ---- 3 -------------------------------------------------------------------

fn recon_oracle(g: &Graph, a: &Tensor, f: &Tensor, delta: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..g.n() {
        for j in 0..g.n() {
            let (w, t) = if g.has_edge(i, j) { (1.0, 1.0) } else { (delta, 0.0) };
            total += (w * (a.get(i, j) - t)).powi(2);
        }
        for c in 0..g.attribute_dim() {
            total += (f.get(i, c) - g.attributes().get(i, c)).powi(2);
        }
    }
    total
}

fn metric_oracle(a: &Tensor, f: &Tensor, g: &Graph) -> (f64, f64) {
    let (mut sq, mut pct, mut count) = ([0.0; 2], [0.0; 2], [0usize; 2]);
    for i in 0..g.n() {
        for j in 0..g.n() {
            if i != j {
                let class = g.has_edge(i, j) as usize;
                let err = a.get(i, j) - class as f64;
                sq[class] += err * err;
                pct[class] += err.abs() / 1.0;
                count[class] += 1;
            }
        }
    }
    let classes: Vec<usize> = (0..2).filter(|&c| count[c] > 0).collect();
    let mut mse = 0.0;
    let mut mape = 0.0;
    for &c in &classes {
        mse += sq[c] / count[c] as f64 / classes.len() as f64;
        mape += pct[c] / count[c] as f64 / classes.len() as f64;
    }
    let entries = g.n() * g.attribute_dim();
    if entries > 0 {
        let (mut fsq, mut fpct) = (0.0, 0.0);
        for i in 0..g.n() {
            for c in 0..g.attribute_dim() {
                let t = g.attributes().get(i, c);
                let err = f.get(i, c) - t;
                fsq += err * err;
                fpct += err.abs() / if t.abs() > 1.0 { t.abs() } else { 1.0 };
            }
        }
        mse += fsq / entries as f64;
        mape += fpct / entries as f64;
    }
    (mse, mape)
}

fn loss_metric_oracles() -> Outcome {
    let mut rng = stream(103, "acceptance/oracles");
    let mut worst: f64 = 0.0;
    let mut agree = |what: &str, got: f64, want: f64| -> Result<(), String> {
        let diff = (got - want).abs();
        worst = worst.max(diff);
        if diff <= 1e-12 {
            Ok(())
        } else {
            Err(format!("{what}: {got} vs {want}"))
        }
    };
    for _ in 0..50 {
        let n = rng.random_range(1..14);
        let d_f = rng.random_range(1..5);
        let g = random_graph(n, rng.random_range(0.1..0.6), d_f, &mut rng);
        let a = Tensor::from_fn(n, n, |_, _| rng.random_range(0.0..1.0));
        let f = Tensor::from_fn(n, d_f, |_, _| rng.random_range(-3.0..3.0));
        let delta = rng.random_range(0.05..=1.0);
        let tape = Tape::new();
        let dec = Decoded { a_pred: tape.constant(a.clone()), f_pred: tape.constant(f.clone()) };
        agree("reconstruction", reconstruction_loss(&tape, &g, &dec, delta).unwrap().item(), recon_oracle(&g, &a, &f, delta))?;

        let (d_h, d_p) = (rng.random_range(1..6), rng.random_range(1..6));
        let (h1, p1, h2, p2) = (random(n, d_h, &mut rng), random(n, d_p, &mut rng), random(n, d_h, &mut rng), random(n, d_p, &mut rng));
        let e1 = NodeEmbeddings { h: tape.constant(h1.clone()), p: tape.constant(p1.clone()) };
        let e2 = NodeEmbeddings { h: tape.constant(h2.clone()), p: tape.constant(p2.clone()) };
        let mut want = 0.0;
        for i in 0..n {
            for c in 0..d_h {
                want += (h1.get(i, c) - h2.get(i, c)).powi(2);
            }
            for c in 0..d_p {
                want += (p1.get(i, c) - p2.get(i, c)).powi(2);
            }
        }
        agree("translation", translation_loss(&e1, &e2).unwrap().item(), want)?;

        let (mse, mape) = metric_oracle(&a, &f, &g);
        agree("weighted MSE", weighted_mse(&a, &f, &g).unwrap(), mse)?;
        agree("weighted MAPE", weighted_mape(&a, &f, &g).unwrap(), mape)?;
    }
    Ok(format!("4 quantities x 50 instances, worst difference {worst:.1e}"))
}

// ---- 4 and 7 -------------------------------------------------------------

struct DeskRun {
    trained: MetricPair,
    untrained: MetricPair,
    separation: Option<MiSeparation>,
    finetune_first_last: (f64, f64),
}

fn desk_run(cfg: &TrainConfig, data: &Dataset) -> Result<DeskRun, Error> {
    let mut s = Session::new(cfg, data)?;
    let untrained = evaluate_test(&s.model, &data.paired_test, cfg.seed)?;
    s.run_until(data, Phase::Finetune, 0, None)?;
    let separation = if s.model.mi.is_some() {
        let held_out: Vec<Graph> = data.paired_test.iter().map(|p| p.source().clone()).collect();
        Some(mi_separation(&s.model, &held_out, cfg.seed)?)
    } else {
        None
    };
    s.run(data, None)?;
    let trained = evaluate_test(&s.model, &data.paired_test, cfg.seed)?;
    let fine: Vec<&EpochRecord> = s.records().iter().filter(|r| r.phase == Phase::Finetune).collect();
    let finetune_first_last = (fine.first().map_or(f64::NAN, |r| r.total), fine.last().map_or(f64::NAN, |r| r.total));
    Ok(DeskRun { trained, untrained, separation, finetune_first_last })
}

struct DeskResults {
    full: Vec<DeskRun>,
    shared: Vec<DeskRun>,
}

fn desk_runs(data: &Dataset) -> Result<DeskResults, String> {
    let jobs: Vec<(bool, usize)> = (0..SEEDS).flat_map(|r| [(false, r), (true, r)]).collect();
    let mut runs = jobs
        .par_iter()
        .map(|&(shared, r)| {
            let mut cfg = desk_config();
            cfg.seed = replicate_seed(MASTER_SEED, r);
            cfg.ablation.shared_embedding = shared;
            desk_run(&cfg, data).map(|run| (shared, run))
        })
        .collect::<Result<Vec<_>, Error>>()
        .map_err(|e| e.to_string())?;
    let shared = runs.iter().filter(|(s, _)| *s).count();
    let mut out = DeskResults { full: Vec::with_capacity(SEEDS), shared: Vec::with_capacity(shared) };
    for (is_shared, run) in runs.drain(..) {
        if is_shared {
            out.shared.push(run);
        } else {
            out.full.push(run);
        }
    }
    Ok(out)
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn desk_end_to_end(r: &DeskResults) -> Outcome {
    let full = mean(r.full.iter().map(|x| x.trained.mse));
    let shared = mean(r.shared.iter().map(|x| x.trained.mse));
    let untrained = mean(r.full.iter().map(|x| x.untrained.mse));
    let per_seed: Vec<String> = r.full.iter().map(|x| format!("{:.3}/{:.3}", x.trained.mse, x.untrained.mse)).collect();
    let ratio_ok = r.full.iter().all(|x| x.trained.mse <= 0.5 * x.untrained.mse);
    let decreased = r.full.iter().chain(&r.shared).all(|x| x.finetune_first_last.1 < x.finetune_first_last.0);
    check(
        full < shared && ratio_ok,
        format!(
            "full {full:.4} vs shared embedding {shared:.4} (untrained {untrained:.4}); trained/untrained per seed [{}]; fine-tune total decreased in every run: {decreased}",
            per_seed.join(", ")
        ),
    )
}

fn mi_sanity(r: &DeskResults) -> Outcome {
    let seps: Vec<MiSeparation> = r.full.iter().filter_map(|x| x.separation).collect();
    let wins = seps.iter().filter(|s| s.matched > s.deranged).count();
    let detail: Vec<String> = seps.iter().map(|s| format!("{:.3}>{:.3}", s.matched, s.deranged)).collect();
    check(seps.len() == SEEDS && wins == SEEDS, format!("{wins}/{SEEDS} seeds separate on held-out sources [{}]", detail.join(", ")))
}

// ---- 5 -------------------------------------------------------------------

fn unpaired_benefit(data: &Dataset) -> Outcome {
    let rows = run_ratio_sweep(data, &desk_config(), &[0.1, 0.6], SEEDS, 0).map_err(|e| e.to_string())?;
    let (low, high) = (rows[0].1.mse_mean, rows[1].1.mse_mean);
    check(high <= low, format!("mean test MSE {low:.4} at 10% unpaired, {high:.4} at 60%"))
}

// ---- 6 -------------------------------------------------------------------

fn small_training() -> (Dataset, TrainConfig) {
    let data = build_ba_dataset(DatasetCounts { paired_train: 6, unpaired_source: 6, unpaired_target: 6, paired_test: 2 }, 10, 6).unwrap();
    let cfg = TrainConfig {
        epochs: Epochs { pretrain_ae: 3, pretrain_trans: 3, pretrain_mi: 3, finetune: 8 },
        model: ModelConfig { d_hidden: 6, heads: 2, d_k: 4, d_v: 4, ..Default::default() },
        ..Default::default()
    };
    (data, cfg)
}

fn ablation_structure() -> Outcome {
    let (data, base) = small_training();
    let mut cfg = base.clone();
    cfg.ablation.no_mi = true;
    let s = segtran::training::train(&cfg, &data).map_err(|e| e.to_string())?;
    let records = s.records().len();
    if let Some(r) = s.records().iter().find(|r| r.mi != 0.0) {
        return Err(format!("no-MI run logged L_MI = {} in {} epoch {}", r.mi, r.phase, r.epoch));
    }

    let mut cfg = base.clone();
    cfg.ablation.shared_embedding = true;
    let s = segtran::training::train(&cfg, &data).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    s.save(dir.path(), "checkpoint").map_err(|e| e.to_string())?;
    let ckpt = Checkpoint::load(dir.path(), "checkpoint").map_err(|e| e.to_string())?;
    let prefix = format!("{TRANS}.");
    let translator: usize = ckpt.tensors.iter().filter(|(name, _)| name.starts_with(&prefix)).map(|(_, t)| t.len()).sum();
    if translator != 0 {
        return Err(format!("shared-embedding checkpoint holds {translator} translator values"));
    }

    let m = Model::new(&ModelConfig::default(), Ablation { no_attention: true, ..Default::default() }, 20, 20, 6).unwrap();
    let g = generate_ba(20, &mut stream(6, "acceptance/no-attention")).unwrap();
    let a = m.draw_anchors(&g, &mut stream(6, "acceptance/no-attention-anchors")).unwrap();
    let tape = Tape::new();
    let b = ParamBinder::frozen(&tape, &m.store);
    let emb = m.encode_target(&b, &g, &a).unwrap();
    let decoded = m.dec_t.decode(&b, &emb).unwrap().a_pred.value();
    let direct = predict_adjacency(tape.concat(&[emb.h, emb.p], 1).unwrap(), b.var(m.dec_t.s_bilinear), LinkFunction::Sigmoid).unwrap().value();
    let diff = decoded.max_abs_diff(&direct);
    check(
        diff <= 1e-12 && m.dec_t.blocks.is_empty(),
        format!("no-MI L_MI zero over {records} epochs; shared checkpoint has 0 translator values; no-attention decoder differs by {diff:.1e}"),
    )
}

// ---- 8 -------------------------------------------------------------------

fn bits(r: &EpochRecord) -> [u64; 5] {
    [r.rec_s, r.rec_t, r.trans, r.mi, r.total].map(f64::to_bits)
}

fn determinism_and_persistence() -> Outcome {
    let (data, cfg) = small_training();
    let a = segtran::training::train(&cfg, &data).map_err(|e| e.to_string())?;
    let b = segtran::training::train(&cfg, &data).map_err(|e| e.to_string())?;
    let (ca, cb) = (records_csv(a.records()), records_csv(b.records()));
    if ca.as_bytes() != cb.as_bytes() {
        return Err("reports of two identical runs differ".into());
    }

    let resume_at = 2;
    let mut s = Session::new(&cfg, &data).map_err(|e| e.to_string())?;
    s.run_until(&data, Phase::Finetune, resume_at, None).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    s.save(dir.path(), "mid").map_err(|e| e.to_string())?;
    let mut resumed = Session::load(dir.path(), "mid").map_err(|e| e.to_string())?;
    resumed.run(&data, None).map_err(|e| e.to_string())?;
    let fresh: Vec<_> = a.records().iter().filter(|r| r.phase == Phase::Finetune && r.epoch >= resume_at).collect();
    let after: Vec<_> = resumed.records().iter().filter(|r| r.phase == Phase::Finetune && r.epoch >= resume_at).collect();
    if fresh.len() < 5 || fresh.len() != after.len() {
        return Err(format!("{} resumed epochs vs {} uninterrupted", after.len(), fresh.len()));
    }
    for (x, y) in fresh.iter().zip(&after) {
        if bits(x) != bits(y) {
            return Err(format!("fine-tune epoch {} differs after resume: {x:?} vs {y:?}", x.epoch));
        }
    }
    check(true, format!("report.csv identical ({} bytes); {} fine-tune epochs bit-identical after resume", ca.len(), fresh.len()))
}

// ---- 9 -------------------------------------------------------------------

fn constant_baseline() -> Outcome {
    let mut rng = stream(109, "acceptance/constant");
    let mut graphs: Vec<Graph> = (0..50).map(|_| random_graph(rng.random_range(2..25), rng.random_range(0.05..0.9), 1, &mut rng)).collect();
    graphs.push(Graph::from_edges(4, &[], Tensor::zeros(4, 1)).unwrap());
    graphs.push(Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)], Tensor::zeros(3, 1)).unwrap());
    for g in &graphs {
        let m = adjacency_errors(&Tensor::filled(g.n(), g.n(), 0.5), g).map_err(|e| e.to_string())?;
        if (m.mse - 0.25).abs() > 1e-12 || (m.mape - 0.5).abs() > 1e-12 {
            return Err(format!("n={} edges={}: MSE {} MAPE {}", g.n(), g.edge_count(), m.mse, m.mape));
        }
    }
    Ok(format!("MSE 0.25 and MAPE 0.5 on {} graphs including edgeless and complete", graphs.len()))
}

// --------------------------------------------------------------------------

fn main() -> ExitCode {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |c: usize| only.as_ref().is_none_or(|o| o.contains(&c));
    let names = [
        "gradient correctness",
        "graph oracles",
        "loss and metric oracles",
        "desk-scale end-to-end",
        "unpaired-benefit trend",
        "ablation structure",
        "MI estimator sanity",
        "determinism and persistence",
        "constant-predictor baseline",
    ];
    let mut outcomes: Vec<Option<(Outcome, f64)>> = vec![None; names.len()];
    let timed = |f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let out = f();
        (out, t.elapsed().as_secs_f64())
    };
    let quick: [(usize, fn() -> Outcome); 6] = [
        (1, gradient_correctness),
        (2, graph_oracles),
        (3, loss_metric_oracles),
        (6, ablation_structure),
        (8, determinism_and_persistence),
        (9, constant_baseline),
    ];
    for (c, f) in quick {
        if wanted(c) {
            outcomes[c - 1] = Some(timed(&f));
        }
    }
    if wanted(4) || wanted(5) || wanted(7) {
        let data = desk_data();
        if wanted(4) || wanted(7) {
            let t = Instant::now();
            let runs = desk_runs(&data);
            let secs = t.elapsed().as_secs_f64();
            for (c, f) in [(4, desk_end_to_end as fn(&DeskResults) -> Outcome), (7, mi_sanity)] {
                if wanted(c) {
                    outcomes[c - 1] = Some((runs.as_ref().map_err(Clone::clone).and_then(f), secs));
                }
            }
        }
        if wanted(5) {
            outcomes[4] = Some(timed(&|| unpaired_benefit(&data)));
        }
    }

    let mut failed = 0;
    for (i, (name, out)) in names.iter().zip(&outcomes).enumerate() {
        match out {
            None => println!("SKIP {} {name}", i + 1),
            Some((Ok(detail), secs)) => println!("PASS {} {name}: {detail} [{secs:.1}s]", i + 1),
            Some((Err(detail), secs)) => {
                failed += 1;
                println!("FAIL {} {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
