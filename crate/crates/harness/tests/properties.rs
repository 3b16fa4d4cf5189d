use listops_harness::TrainConfig;
use listops_models::EncoderKind;
use proptest::prelude::*;

fn kind() -> impl Strategy<Value = EncoderKind> {
    prop::sample::select(vec![EncoderKind::Lstm, EncoderKind::TreeLstm, EncoderKind::RlSpinn, EncoderKind::StGumbel])
}

fn config() -> impl Strategy<Value = TrainConfig> {
    (
        (kind(), 1usize..256, 1usize..256, 0.0f64..0.9, 0.05f64..5.0),
        (0.0f64..0.1, 0.0f64..1e-2, 0.01f64..=1.0, 1usize..128, 1usize..50, 1usize..5),
        (any::<u64>(), 0.01f64..0.99, prop::option::of(1usize..100_000)),
    )
        .prop_map(|((k, dim, hidden, dropout, tau), (lr, l2, decay, batch, epochs, patience), (seed, bd, max_train))| {
            let mut c = TrainConfig::new(k, dim, seed);
            c.encoder.mlp_hidden = hidden;
            c.encoder.dropout = dropout;
            c.encoder.temperature = tau;
            (c.lr, c.l2, c.lr_decay, c.batch_size, c.max_epochs, c.patience) = (lr, l2, decay, batch, epochs, patience);
            c.baseline_decay = bd;
            c.max_train = max_train;
            c
        })
}

proptest! {
    #[test]
    fn canonical_text_reproduces_the_config(c in config()) {
        let mut back = TrainConfig::new(EncoderKind::Lstm, 8, 0);
        back.apply_kv_text(&c.canonical()).unwrap();
        back.exec = c.exec;
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.hash(), c.hash());
        prop_assert!(c.validate().is_ok());
    }

    #[test]
    fn hash_separates_distinct_seeds(c in config(), delta in 1u64..1000) {
        let mut other = c.clone();
        other.seed = c.seed.wrapping_add(delta);
        prop_assert_ne!(other.hash(), c.hash());
    }
}
