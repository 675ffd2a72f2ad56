use fbm_silt::constants::QuadSpec;
use fbm_silt::silt::MonteCarloConfig;
use fbm_silt::verify::HermiteRun;
use fbm_silt::{Backend, HurstConfig};
use fbm_silt_cli::{Command, RunConfig};
use proptest::prelude::*;

fn backend() -> impl Strategy<Value = Backend> {
    prop_oneof![Just(Backend::Auto), Just(Backend::Cholesky), Just(Backend::Circulant)]
}

fn command() -> impl Strategy<Value = Option<Command>> {
    prop_oneof![
        Just(None),
        Just(Some(Command::Constants)),
        Just(Some(Command::Simulate)),
        Just(Some(Command::Estimate)),
        Just(Some(Command::Verify)),
        Just(Some(Command::Report)),
    ]
}

proptest! {
    #[test]
    fn config_survives_json(
        h in 0.01f64..0.99,
        dim in 1usize..6,
        replicates in 2usize..100_000,
        base_seed in any::<u64>(),
        eps_set in prop::collection::btree_set(1u32..1_000_000, 1..5),
        steps_per_unit in 1usize..4096,
        backend in backend(),
        cells in 0.5f64..16.0,
        rel_tol in 1e-10f64..1e-1,
        radius in prop::option::of(1.0f64..1e6),
        horizons in prop::collection::vec(0.01f64..10.0, 1..4),
        chaos_order in 1usize..40,
        hermite in prop::option::of((1e-6f64..1e-2, 2usize..10_000, any::<u64>())),
        threads in prop::option::of(1usize..64),
        command in command(),
    ) {
        let eps_list: Vec<f64> = eps_set.iter().rev().map(|k| *k as f64 * 1e-6 * std::f64::consts::E / 3.0).collect();
        let config = RunConfig {
            command,
            hurst: HurstConfig::new(h, dim).unwrap(),
            monte_carlo: MonteCarloConfig { replicates, base_seed, eps_list, steps_per_unit, backend, cells_per_scale: cells },
            quadrature: QuadSpec::default().with_rel_tol(rel_tol).with_radius(radius),
            horizons,
            chaos_order,
            hermite: hermite.map(|(eps, replicates, base_seed)| HermiteRun { eps, replicates, base_seed, ..HermiteRun::default() }),
            out_dir: "out".into(),
            threads,
        };
        let back = RunConfig::from_json(&config.to_json()).unwrap();
        prop_assert_eq!(back, config);
    }
}
