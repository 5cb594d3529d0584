mod common;

use common::sharded::shard_check;
use common::{small_config, toy_problem};
use fwgd::engine::{Space, TrainConfig, Trainer};
use fwgd::error::Error;
use fwgd::parallel::{run_parallel, ParallelOptions};

fn check(cfg: &TrainConfig, workers: usize) {
    let c = shard_check(cfg, workers);
    assert_eq!(c.deviation, 0.0, "K={workers}: deviation {:e}, expected a bitwise match", c.deviation);
    assert!(c.bytes_match, "K={workers}: byte accounting differs from the closed form");
}

#[test]
fn matches_sequential_for_every_worker_count() {
    let cfg = small_config(Space::Feature, 4);
    for k in [1, 2, 4] {
        check(&cfg, k);
    }
}

#[test]
fn matches_sequential_without_projection_or_repulsion() {
    let base = small_config(Space::Feature, 4);
    check(&TrainConfig { projection: false, ..base.clone() }, 2);
    check(&TrainConfig { repulsion: false, ..base }, 4);
}

#[test]
fn epoch_records_follow_the_schedule() {
    let (x, y) = toy_problem(64, 5, 3, 8);
    let cfg = TrainConfig { epochs: 3, ..small_config(Space::Feature, 2) };
    let par = run_parallel(&cfg, &x, &y, 3, &ParallelOptions::new(2)).unwrap();
    let mut seq = Trainer::new(cfg.clone(), x.cols(), 3).unwrap();
    let records = seq.fit(&x, &y).unwrap();
    assert_eq!(par.records.len(), 3);
    for (a, b) in par.records.iter().zip(&records) {
        assert_eq!((a.epoch, a.steps, a.lr), (b.epoch, b.steps, b.lr));
        assert!((a.mean_loglik - b.mean_loglik).abs() < 1e-12);
        assert_eq!(a.accuracy, b.accuracy);
    }
}

#[test]
fn rejects_other_spaces() {
    let (x, y) = toy_problem(20, 5, 3, 9);
    let err = run_parallel(&small_config(Space::Weight, 2), &x, &y, 3, &ParallelOptions::new(2)).unwrap_err();
    assert!(matches!(err, Error::Config { .. }));
}
