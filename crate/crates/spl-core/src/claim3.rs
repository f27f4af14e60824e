//! The linked-versus-isolated two-loop experiment: matched energy budgets,
//! identical per-replicate seeds, and the self-sustain comparison between a
//! pair of loops joined by excitatory links and the same pair left apart.
//!
//! Replicate randomness enters only through per-node energy-capacity jitter
//! (the dynamics themselves are deterministic), so the linked and isolated
//! variants of a replicate see bit-identical budgets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, DynParams, DynamicsError, Stimulus};
use crate::network::{build_network, EdgeSpec, Network, NetworkSpec, NodeSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkedLoopConfig {
    pub loop_len_a: usize,
    pub loop_len_b: usize,
    /// Weight of edges inside each loop.
    pub in_loop_weight: f64,
    /// Weight of the bidirectional link between the two loop heads.
    pub link_weight: f64,
    pub threshold: f64,
    /// Refractory equal to the loop length keeps each loop single-fronted.
    pub refractory: u32,
    pub energy_capacity: f64,
    pub energy_recharge_rate: f64,
    pub firing_cost: f64,
    /// Per-node capacity multipliers are drawn uniformly from this range.
    pub capacity_jitter: (f64, f64),
    pub replicates: usize,
    pub seed: u64,
    /// Steps simulated after the stimulus cutoff.
    pub sustain_horizon: usize,
    /// Traversal window for loop detection: wide enough that circulation
    /// stretched by energy recovery still counts.
    pub trigger_window: usize,
}

impl Default for LinkedLoopConfig {
    fn default() -> Self {
        LinkedLoopConfig {
            loop_len_a: 3,
            loop_len_b: 3,
            in_loop_weight: 1.5,
            link_weight: 1.25,
            threshold: 1.0,
            refractory: 3,
            energy_capacity: 12.0,
            energy_recharge_rate: 0.25,
            firing_cost: 1.0,
            capacity_jitter: (0.3, 1.0),
            replicates: 100,
            seed: 42,
            sustain_horizon: 1500,
            trigger_window: 12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Linked,
    Isolated,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::Linked => f.write_str("linked"),
            Variant::Isolated => f.write_str("isolated"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claim3Row {
    pub replicate: usize,
    pub seed: u64,
    pub variant: Variant,
    pub sustain_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<Claim3Row>,
    pub median_linked: f64,
    pub median_isolated: f64,
    /// `median_linked / median_isolated`; infinite when only the isolated
    /// side dies immediately.
    pub median_ratio: f64,
}

fn loop_node_names(prefix: &str, len: usize) -> Vec<String> {
    (0..len).map(|i| format!("{prefix}{i}")).collect()
}

/// Two loops with heads `a0` and `b0`; `linked` adds the bidirectional
/// excitatory link between the heads.
pub fn two_loop_spec(cfg: &LinkedLoopConfig, linked: bool) -> NetworkSpec {
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for (prefix, len) in [("a", cfg.loop_len_a), ("b", cfg.loop_len_b)] {
        let names = loop_node_names(prefix, len);
        for name in &names {
            nodes.push(NodeSpec {
                id: name.clone(),
                threshold: cfg.threshold,
                refractory: cfg.refractory,
                energy_capacity: cfg.energy_capacity,
                energy_recharge_rate: cfg.energy_recharge_rate,
                firing_cost: cfg.firing_cost,
            });
        }
        for i in 0..len {
            edges.push(EdgeSpec {
                src: names[i].clone(),
                dst: names[(i + 1) % len].clone(),
                weight: cfg.in_loop_weight,
            });
        }
    }
    if linked && cfg.link_weight != 0.0 {
        // bidirectional links at two points of each loop, so a stalled loop
        // can be re-ignited from more than one phase; a zero link is no link
        let pairs = cfg.loop_len_a.min(cfg.loop_len_b).min(2);
        for i in 0..pairs {
            let a = format!("a{i}");
            let b = format!("b{i}");
            edges.push(EdgeSpec { src: a.clone(), dst: b.clone(), weight: cfg.link_weight });
            edges.push(EdgeSpec { src: b, dst: a, weight: cfg.link_weight });
        }
    }
    NetworkSpec {
        nodes,
        edges,
        input_surface: vec!["a0".into(), "b0".into()],
        output_surface: vec![],
    }
}

/// Scale each node's energy capacity by a seed-derived multiplier, drawn in
/// node order so matched networks receive identical budgets.
pub fn jitter_capacities(spec: &NetworkSpec, range: (f64, f64), seed: u64) -> NetworkSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = spec.clone();
    for node in &mut out.nodes {
        let factor = if range.0 >= range.1 {
            range.0
        } else {
            rng.gen_range(range.0..range.1)
        };
        node.energy_capacity *= factor;
    }
    out
}

fn kick_stimulus(cfg: &LinkedLoopConfig) -> Stimulus {
    Stimulus::new(
        &[("a0", cfg.threshold + 0.5), ("b0", cfg.threshold + 0.5)],
        0,
        1,
    )
}

fn sustain_of(spec: &NetworkSpec, cfg: &LinkedLoopConfig, seed: u64) -> Result<usize, DynamicsError> {
    let net: Network = build_network(spec).expect("two-loop spec is well-formed");
    let params = DynParams {
        sustain_horizon: Some(cfg.sustain_horizon),
        trigger_window: Some(cfg.trigger_window),
        seed,
        ..DynParams::default()
    };
    dynamics::self_sustain_time(&net, &[kick_stimulus(cfg)], 0, &params)
}

/// One replicate: identical jittered budgets for both variants.
pub fn replicate_sustains(
    cfg: &LinkedLoopConfig,
    replicate: usize,
) -> Result<(u64, usize, usize), DynamicsError> {
    let seed = cfg.seed + replicate as u64;
    let linked = jitter_capacities(&two_loop_spec(cfg, true), cfg.capacity_jitter, seed);
    let isolated = jitter_capacities(&two_loop_spec(cfg, false), cfg.capacity_jitter, seed);
    let linked_sustain = sustain_of(&linked, cfg, seed)?;
    let isolated_sustain = sustain_of(&isolated, cfg, seed)?;
    Ok((seed, linked_sustain, isolated_sustain))
}

pub fn median(values: &[usize]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0
    }
}

/// Run the linked-versus-isolated comparison over seeded replicates.
/// Replicates execute in parallel; the report is ordered by replicate
/// index, so output is independent of scheduling.
pub fn claim3_experiment(cfg: &LinkedLoopConfig) -> Result<ComparisonReport, DynamicsError> {
    let results: Result<Vec<(u64, usize, usize)>, DynamicsError> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| replicate_sustains(cfg, r))
        .collect();
    let results = results?;

    let mut rows = Vec::with_capacity(cfg.replicates * 2);
    let mut linked = Vec::with_capacity(cfg.replicates);
    let mut isolated = Vec::with_capacity(cfg.replicates);
    for (replicate, &(seed, l, i)) in results.iter().enumerate() {
        rows.push(Claim3Row { replicate, seed, variant: Variant::Linked, sustain_steps: l });
        rows.push(Claim3Row { replicate, seed, variant: Variant::Isolated, sustain_steps: i });
        linked.push(l);
        isolated.push(i);
    }
    let median_linked = median(&linked);
    let median_isolated = median(&isolated);
    let median_ratio = if median_isolated > 0.0 {
        median_linked / median_isolated
    } else if median_linked > 0.0 {
        f64::INFINITY
    } else {
        1.0
    };
    Ok(ComparisonReport {
        rows,
        median_linked,
        median_isolated,
        median_ratio,
    })
}
