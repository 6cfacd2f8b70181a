use segtran::evaluation::mi_separation;
use segtran::graphs::{build_ba_dataset, Dataset, DatasetCounts};
use segtran::model::ModelConfig;
use segtran::training::{Epochs, Phase, Session, TrainConfig};

fn data(paired: usize, unpaired: usize, test: usize, seed: u64) -> Dataset {
    build_ba_dataset(DatasetCounts { paired_train: paired, unpaired_source: unpaired, unpaired_target: unpaired, paired_test: test }, 12, seed).unwrap()
}

fn config(epochs: Epochs) -> TrainConfig {
    TrainConfig { epochs, model: ModelConfig { d_hidden: 8, heads: 2, d_k: 8, d_v: 8, ..Default::default() }, ..Default::default() }
}

fn phase_records(s: &Session, phase: Phase) -> Vec<segtran::training::EpochRecord> {
    s.records().iter().copied().filter(|r| r.phase == phase).collect()
}

#[test]
fn autoencoder_pretraining_halves_reconstruction() {
    // 10 paired and 10 unpaired graphs per domain.
    let d = data(10, 10, 1, 3);
    let cfg = TrainConfig { epochs: Epochs { pretrain_ae: 50, pretrain_trans: 0, pretrain_mi: 0, finetune: 0 }, ..Default::default() };
    let mut s = Session::new(&cfg, &d).unwrap();
    s.run(&d, None).unwrap();
    let r = phase_records(&s, Phase::PretrainAe);
    assert_eq!(r.len(), 50);
    let (first, last) = (r[0].total, r[49].total);
    assert!(last < 0.5 * first, "reconstruction {first} -> {last}");
}

#[test]
fn translator_training_cuts_translation_loss() {
    let d = data(10, 0, 1, 4);
    let mut s = Session::new(&config(Epochs { pretrain_ae: 0, pretrain_trans: 100, pretrain_mi: 0, finetune: 0 }), &d).unwrap();
    s.run(&d, None).unwrap();
    let r = phase_records(&s, Phase::PretrainTrans);
    assert_eq!(r.len(), 100);
    let (first, last) = (r[0].trans, r[99].trans);
    assert!(last <= 0.7 * first, "translation {first} -> {last}");
}

#[test]
fn estimator_separates_held_out_pairs() {
    let d = data(10, 20, 16, 5);
    let cfg = config(Epochs { pretrain_ae: 20, pretrain_trans: 20, pretrain_mi: 50, finetune: 0 });
    let mut s = Session::new(&cfg, &d).unwrap();
    s.run(&d, None).unwrap();
    let held_out: Vec<_> = d.paired_test.iter().map(|p| p.source().clone()).collect();
    let sep = mi_separation(&s.model, &held_out, 11).unwrap();
    assert!(sep.matched > sep.deranged, "{sep:?}");
}
