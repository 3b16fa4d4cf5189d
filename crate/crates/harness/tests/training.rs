use listops::generator::{generate_dataset, GenConfig};
use listops::{Dataset, Exec};
use listops_harness::{evaluate, random_tree_report, run_restarts, scale_sweep, train_on, TrainConfig, TrainError};
use listops_models::{EncoderKind, Model};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn data(n_train: usize, n_test: usize, seed: u64) -> Dataset {
    generate_dataset(&GenConfig { n_train, n_test, max_depth: 3, max_args: 3, min_tokens: Some(5), max_tokens: Some(16), balance_ops: false, ..GenConfig::desk(seed) })
        .unwrap()
}

fn small(kind: EncoderKind, epochs: usize) -> TrainConfig {
    let mut c = TrainConfig::new(kind, 8, 3);
    c.max_epochs = epochs;
    c.batch_size = 8;
    c.lr = 5e-3;
    c
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let d = data(200, 200, 1);
    let mut cfg = small(EncoderKind::Lstm, 3);
    cfg.lr = 0.0;
    let out = train_on(&cfg, &d.train, &d.test).unwrap();
    let fresh = Model::new(cfg.encoder, &mut ChaCha8Rng::seed_from_u64(cfg.seed)).unwrap();
    assert_eq!(out.model.store, fresh.store);
    assert_eq!(out.record.epochs.len(), 1, "lr below the floor stops training");
    assert!(out.record.final_accuracy < 25.0);
}

#[test]
fn runs_are_deterministic_across_execution_modes() {
    let d = data(120, 40, 2);
    for kind in [EncoderKind::Lstm, EncoderKind::TreeLstm, EncoderKind::RlSpinn, EncoderKind::StGumbel] {
        let mut cfg = small(kind, 2);
        let a = train_on(&cfg, &d.train, &d.test).unwrap();
        let b = train_on(&cfg, &d.train, &d.test).unwrap();
        cfg.exec = Exec::Sequential;
        let c = train_on(&cfg, &d.train, &d.test).unwrap();
        assert!(a.record.same_outcome(&b.record), "{kind}");
        assert!(a.record.same_outcome(&c.record), "{kind}");
        assert_eq!(a.model.store, c.model.store);
        assert_eq!(a.record.epochs_csv(), c.record.epochs_csv());
    }
}

#[test]
fn epochs_are_indexed_and_learning_rate_never_rises() {
    let d = data(150, 50, 3);
    let mut cfg = small(EncoderKind::TreeLstm, 6);
    cfg.lr_decay = 0.5;
    let r = train_on(&cfg, &d.train, &d.test).unwrap().record;
    for (i, e) in r.epochs.iter().enumerate() {
        assert_eq!(e.epoch, i);
        assert!((0.0..=100.0).contains(&e.test_accuracy));
    }
    assert!(r.epochs.windows(2).all(|w| w[1].lr <= w[0].lr));
    let best = r.epochs.iter().map(|e| e.test_accuracy).fold(0.0, f64::max);
    assert_eq!(r.final_accuracy, best);
    assert_eq!(r.epochs[r.best_epoch].test_accuracy, best);
}

#[test]
fn learning_beats_chance_on_shallow_data() {
    let d = data(1500, 300, 4);
    let mut cfg = small(EncoderKind::TreeLstm, 6);
    cfg.encoder.model_dim = 24;
    cfg.encoder.mlp_hidden = 24;
    let r = train_on(&cfg, &d.train, &d.test).unwrap().record;
    assert!(r.final_accuracy > 30.0, "{}", r.epochs_csv());
}

#[test]
fn divergence_is_reported() {
    let d = data(64, 16, 5);
    let mut cfg = small(EncoderKind::Lstm, 3);
    cfg.lr = f64::MAX;
    match train_on(&cfg, &d.train, &d.test) {
        Err(e @ TrainError::Divergence { .. }) => assert_eq!(e.kind(), "divergence"),
        other => panic!("expected divergence, got {:?}", other.map(|o| o.record.final_accuracy)),
    }
}

#[test]
fn restarts_report_spread_and_self_f1() {
    let d = data(80, 30, 6);
    let latent = small(EncoderKind::StGumbel, 1);
    let same = run_restarts(&latent, 2, true, &d.train, &d.test).unwrap();
    assert_eq!(same.report.stddev, 0.0);
    assert_eq!(same.report.self_f1, Some(100.0));
    let varied = run_restarts(&latent, 3, false, &d.train, &d.test).unwrap();
    assert_eq!(varied.runs.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![3, 4, 5]);
    assert!(varied.report.self_f1.is_some_and(|f| f <= 100.0));

    let lstm = run_restarts(&small(EncoderKind::Lstm, 1), 2, false, &d.train, &d.test).unwrap();
    assert_eq!(lstm.report.self_f1, None);
    assert!(run_restarts(&latent, 1, false, &d.train, &d.test).is_err());
}

#[test]
fn single_size_scale_sweep_is_a_plain_train() {
    let d = data(100, 30, 7);
    let cfg = small(EncoderKind::Lstm, 2);
    let points = scale_sweep(&cfg, &[60], &d.train, &d.test).unwrap();
    let mut direct = cfg.clone();
    direct.max_train = Some(60);
    let r = train_on(&direct, &d.train, &d.test).unwrap().record;
    assert_eq!(points.len(), 1);
    assert_eq!(points[0].train_size, 60);
    assert_eq!(points[0].accuracy, r.final_accuracy);
}

#[test]
fn evaluation_scores_trees_against_reference_parses() {
    let d = data(60, 40, 8);
    let out = train_on(&small(EncoderKind::TreeLstm, 1), &d.train, &d.test).unwrap();
    let report = evaluate(&out.model, &d.test, Exec::Parallel).unwrap();
    assert_eq!(report.f1.unwrap().f1_gt, 100.0);
    assert_eq!(report.predictions, out.record.test_predictions);
    assert_eq!(report.accuracy, out.record.final_accuracy);

    let lstm = train_on(&small(EncoderKind::Lstm, 1), &d.train, &d.test).unwrap();
    assert!(evaluate(&lstm.model, &d.test, Exec::Sequential).unwrap().f1.is_none());

    let gumbel = train_on(&small(EncoderKind::StGumbel, 1), &d.train, &d.test).unwrap();
    let report = evaluate(&gumbel.model, &d.test, Exec::Parallel).unwrap();
    for (t, ex) in report.trees.unwrap().iter().zip(&d.test) {
        assert!(t.is_complete_over(ex.tokens.len()));
    }

    let random = random_tree_report(&d.test, 1).unwrap();
    assert!(random.f1_gt < 100.0 && random.f1_gt > 0.0);
}
