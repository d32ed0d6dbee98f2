use proptest::prelude::*;
use qlyap::config::{RunConfig, Settings, ValueList};

fn config() -> impl Strategy<Value = RunConfig> {
    (
        prop::sample::select(vec!["brownian", "ou", "pitchfork", "septic"]),
        0.05f64..5.0,
        0.2f64..4.0,
        1e-4f64..1e-2,
        0.1f64..50.0,
        10usize..100_000,
        any::<u64>(),
        prop::collection::vec(-2.0f64..2.0, 1..3),
        prop::option::of((0.01f64..1.0, 2usize..20)),
    )
        .prop_map(|(model, sigma, c, dt, t, particles, seed, x0, grid)| {
            let mut cfg = RunConfig { model: model.into(), sigma, dt, t, particles, seed, ..RunConfig::default() };
            if model != "brownian" && model != "ou" {
                cfg.params = vec![("c".into(), c)];
            }
            cfg.x0 = Some(x0);
            if let Some((step, k)) = grid {
                cfg.t_grid = Some((1..=k).map(|i| i as f64 * step).collect());
                cfg.values = Some(ValueList::List((0..k).map(|i| i as f64 * step - 1.0).collect()));
            }
            cfg
        })
}

proptest! {
    #[test]
    fn serialized_config_parses_back(cfg in config()) {
        let text = cfg.serialize();
        let back = RunConfig::from_settings(&Settings::parse(&text).unwrap()).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.serialize(), text);
    }
}
