//! Shared fixtures for the solver benchmarks.

use netslice_core::formulations::{build_ns, Model};
use netslice_core::instance::{examples, generate, GeneratorConfig, Instance};

/// Named instances used across benchmark groups.
pub fn instances() -> Vec<(&'static str, Instance)> {
    vec![
        ("chain", examples::chain_of_three()),
        ("diamond", examples::diamond()),
        ("grid20x3", generated(3, 7)),
        ("grid20x5", generated(5, 1)),
    ]
}

/// Twenty-node grid with `services` chains, default parameters otherwise.
pub fn generated(services: usize, seed: u64) -> Instance {
    generate(&GeneratorConfig {
        nodes: 20,
        services,
        seed,
        rate: (1, 20),
        ..Default::default()
    })
    .expect("benchmark generator settings are valid")
}

/// Full model of a generated instance, for LP relaxation timings.
pub fn full_model(services: usize, seed: u64) -> Model {
    build_ns(&generated(services, seed))
}
