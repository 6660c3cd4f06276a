//! Random instance generator.
//!
//! Defaults: cloud capacities in `[200, 600]`, link capacities in
//! `[20, 220]`, each link dropped with probability 0.1, chains of 4
//! distinct functions from a pool of 5, each cloud able to run 3 of them,
//! rates in `{1..40}`, activation power in `[1, 200]` and placement cost in
//! `[1, 20]`. Topologies are synthetic (grid or random geometric).

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Capacity, CloudNode, Instance, Link, Network, Service, Stage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Topology {
    /// Near-square grid; neighbours are joined in both directions.
    Grid,
    /// Points uniform in the unit square, joined in both directions when
    /// closer than `radius`.
    RandomGeometric { radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMode {
    /// One integer rate per service shared by every flow of the chain.
    Same,
    /// Independent rate per flow.
    PerStage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub nodes: usize,
    pub topology: Topology,
    pub link_removal_probability: f64,
    pub clouds: usize,
    pub cloud_capacity: (u32, u32),
    pub link_capacity: (u32, u32),
    pub infinite_links: bool,
    pub services: usize,
    pub chain_length: usize,
    pub function_pool: usize,
    pub functions_per_cloud: usize,
    pub rate: (u32, u32),
    pub rate_mode: RateMode,
    pub activation_power: (u32, u32),
    pub placement_cost: (u32, u32),
    pub common_destination: bool,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            nodes: 20,
            topology: Topology::Grid,
            link_removal_probability: 0.1,
            clouds: 4,
            cloud_capacity: (200, 600),
            link_capacity: (20, 220),
            infinite_links: false,
            services: 5,
            chain_length: 4,
            function_pool: 5,
            functions_per_cloud: 3,
            rate: (1, 40),
            rate_mode: RateMode::Same,
            activation_power: (1, 200),
            placement_cost: (1, 20),
            common_destination: true,
            seed: 1,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GeneratorError {
    #[error("range `{0}` is empty")]
    EmptyRange(&'static str),
    #[error("probability {0} outside [0, 1]")]
    Probability(f64),
    #[error("chains need {requested} distinct functions but the pool has {pool}")]
    ChainLongerThanPool { requested: usize, pool: usize },
    #[error("each cloud should run {requested} distinct functions but the pool has {pool}")]
    CloudFunctionsExceedPool { requested: usize, pool: usize },
    #[error("{nodes} nodes cannot host {clouds} clouds plus distinct sources and destinations")]
    TooFewNodes { nodes: usize, clouds: usize },
    #[error("chain length must be at least 1")]
    EmptyChain,
    #[error("invalid radius {0}")]
    Radius(f64),
}

impl GeneratorConfig {
    pub fn check(&self) -> Result<(), GeneratorError> {
        for (name, (lo, hi)) in [
            ("cloud_capacity", self.cloud_capacity),
            ("link_capacity", self.link_capacity),
            ("rate", self.rate),
            ("activation_power", self.activation_power),
            ("placement_cost", self.placement_cost),
        ] {
            if lo > hi {
                return Err(GeneratorError::EmptyRange(name));
            }
        }
        if self.rate.0 == 0 {
            return Err(GeneratorError::EmptyRange("rate"));
        }
        if !(0.0..=1.0).contains(&self.link_removal_probability) {
            return Err(GeneratorError::Probability(self.link_removal_probability));
        }
        if self.chain_length == 0 {
            return Err(GeneratorError::EmptyChain);
        }
        if self.chain_length > self.function_pool {
            return Err(GeneratorError::ChainLongerThanPool {
                requested: self.chain_length,
                pool: self.function_pool,
            });
        }
        if self.functions_per_cloud > self.function_pool {
            return Err(GeneratorError::CloudFunctionsExceedPool {
                requested: self.functions_per_cloud,
                pool: self.function_pool,
            });
        }
        if self.nodes < self.clouds + 2 {
            return Err(GeneratorError::TooFewNodes {
                nodes: self.nodes,
                clouds: self.clouds,
            });
        }
        if let Topology::RandomGeometric { radius } = self.topology {
            if !(radius > 0.0) {
                return Err(GeneratorError::Radius(radius));
            }
        }
        Ok(())
    }
}

fn pick(rng: &mut ChaCha8Rng, (lo, hi): (u32, u32)) -> f64 {
    rng.gen_range(lo..=hi) as f64
}

fn candidate_edges(config: &GeneratorConfig, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let n = config.nodes;
    let mut pairs = Vec::new();
    match config.topology {
        Topology::Grid => {
            let rows = ((n as f64).sqrt().floor() as usize).max(1);
            let cols = n.div_ceil(rows);
            for i in 0..n {
                if i % cols + 1 < cols && i + 1 < n {
                    pairs.push((i, i + 1));
                }
                if i + cols < n {
                    pairs.push((i, i + cols));
                }
            }
        }
        Topology::RandomGeometric { radius } => {
            let pts: Vec<(f64, f64)> = (0..n)
                .map(|_| (rng.gen::<f64>(), rng.gen::<f64>()))
                .collect();
            for i in 0..n {
                for j in i + 1..n {
                    let (dx, dy) = (pts[i].0 - pts[j].0, pts[i].1 - pts[j].1);
                    if dx * dx + dy * dy <= radius * radius {
                        pairs.push((i, j));
                    }
                }
            }
        }
    }
    pairs
        .into_iter()
        .flat_map(|(a, b)| [(a, b), (b, a)])
        .collect()
}

/// Build a random instance. Deterministic for a fixed `config.seed`.
pub fn generate(config: &GeneratorConfig) -> Result<Instance, GeneratorError> {
    config.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.nodes;
    let nodes: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();

    let mut links = Vec::new();
    for (tail, head) in candidate_edges(config, &mut rng) {
        if rng.gen_bool(config.link_removal_probability) {
            continue;
        }
        let capacity = if config.infinite_links {
            Capacity::Infinite
        } else {
            Capacity::Finite(pick(&mut rng, config.link_capacity))
        };
        links.push(Link {
            tail,
            head,
            capacity,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut cloud_nodes = order[..config.clouds].to_vec();
    cloud_nodes.sort_unstable();
    let mut others = order[config.clouds..].to_vec();
    others.sort_unstable();

    let functions: Vec<String> = (1..=config.function_pool)
        .map(|f| format!("f{f}"))
        .collect();
    let mut clouds = Vec::with_capacity(config.clouds);
    let mut runs: Vec<Vec<usize>> = Vec::with_capacity(config.clouds);
    for &node in &cloud_nodes {
        clouds.push(CloudNode {
            node,
            capacity: Capacity::Finite(pick(&mut rng, config.cloud_capacity)),
            power: pick(&mut rng, config.activation_power),
        });
        let mut f: Vec<usize> = (0..config.function_pool).collect();
        f.shuffle(&mut rng);
        f.truncate(config.functions_per_cloud);
        f.sort_unstable();
        runs.push(f);
    }

    let destination = if config.common_destination {
        let d = *others
            .choose(&mut rng)
            .expect("at least two non-cloud nodes");
        others.retain(|&o| o != d);
        Some(d)
    } else {
        None
    };

    let mut services = Vec::with_capacity(config.services);
    for k in 0..config.services {
        let source = *others.choose(&mut rng).expect("non-cloud nodes available");
        let dest = match destination {
            Some(d) => d,
            None => {
                let rest: Vec<usize> = others.iter().copied().filter(|&o| o != source).collect();
                *rest.choose(&mut rng).expect("at least two non-cloud nodes")
            }
        };
        let mut pool: Vec<usize> = (0..config.function_pool).collect();
        pool.shuffle(&mut rng);
        pool.truncate(config.chain_length);

        let shared = pick(&mut rng, config.rate);
        let mut rate = || match config.rate_mode {
            RateMode::Same => shared,
            RateMode::PerStage => pick(&mut rng, config.rate),
        };
        let rate_in = rate();
        let rates: Vec<f64> = (0..config.chain_length).map(|_| rate()).collect();

        let mut chain = Vec::with_capacity(config.chain_length);
        for (i, &func) in pool.iter().enumerate() {
            let mut costs = BTreeMap::new();
            for (c, run) in runs.iter().enumerate() {
                if run.contains(&func) {
                    costs.insert(c, pick(&mut rng, config.placement_cost));
                }
            }
            chain.push(Stage {
                function: functions[func].clone(),
                rate: rates[i],
                costs,
            });
        }
        services.push(Service {
            id: format!("s{}", k + 1),
            source,
            destination: dest,
            rate_in,
            chain,
        });
    }

    Ok(Instance {
        network: Network {
            nodes,
            links,
            clouds,
        },
        services,
    })
}


#[cfg(test)]
mod properties {
    use super::*;
    use crate::instance::validate;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn generated_instances_validate(seed in any::<u64>(), nodes in 6usize..30, services in 0usize..8, geo in any::<bool>()) {
            let topology = if geo { Topology::RandomGeometric { radius: 0.35 } } else { Topology::Grid };
            let cfg = GeneratorConfig { seed, nodes, services, topology, clouds: 3, ..Default::default() };
            let inst = generate(&cfg).unwrap();
            let report = validate(&inst);
            prop_assert!(report.is_valid(), "{}", report);
        }
    }
}
