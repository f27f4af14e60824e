//! Chemical-network oracles: stochastic means against an exact CTMC
//! transient solved by uniformization, generator counts against brute-force
//! minimal seed-set enumeration, persistence edge cases, and split
//! regeneration coverage.

use std::collections::{BTreeMap, BTreeSet};

use spl_core::chemical::{
    generator_sets, persistence_experiment, regenerates_from, run_split, simulate_reactions,
    ChemSimParams, ChemicalError, Direction, Reaction, ReactionNetwork, SimulationMethod,
    Species,
};
use spl_core::fixtures;

/// Closed three-species loop with unit-total counts small enough to
/// enumerate its CTMC exactly. Uphill activation is zero so the budget gate
/// stays open and mass-action kinetics describe it completely.
fn tiny_loop(total: u64) -> ReactionNetwork {
    let rate_down = 1.0;
    let rate_up = 0.6;
    ReactionNetwork {
        species: vec![
            Species { id: "M1".into(), energy_level: 2.0, initial_count: total },
            Species { id: "M2".into(), energy_level: 1.0, initial_count: 0 },
            Species { id: "M3".into(), energy_level: 0.0, initial_count: 0 },
        ],
        reactions: vec![
            Reaction {
                reactants: vec![("M1".into(), 1)],
                products: vec![("M2".into(), 1)],
                enzyme: None,
                activation_energy: 0.0,
                direction: Direction::Downhill,
                rate_constant: rate_down,
            },
            Reaction {
                reactants: vec![("M2".into(), 1)],
                products: vec![("M3".into(), 1)],
                enzyme: None,
                activation_energy: 0.0,
                direction: Direction::Downhill,
                rate_constant: rate_down,
            },
            Reaction {
                reactants: vec![("M3".into(), 1)],
                products: vec![("M1".into(), 1)],
                enzyme: None,
                activation_energy: 0.0,
                direction: Direction::Uphill,
                rate_constant: rate_up,
            },
        ],
        energy_supply: 100.0,
        abundant_species: BTreeSet::new(),
    }
}

/// Exact transient mean counts at time `t` by uniformization over the full
/// state space (compositions of `total` over three species).
fn ctmc_mean_counts(total: u64, t: f64) -> [f64; 3] {
    // enumerate states (a, b, c) with a + b + c = total
    let mut states = Vec::new();
    for a in 0..=total {
        for b in 0..=(total - a) {
            states.push((a, b, total - a - b));
        }
    }
    let index: BTreeMap<(u64, u64, u64), usize> =
        states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let n = states.len();

    let rate_down = 1.0;
    let rate_up = 0.6;
    // generator: rate matrix rows
    let mut rates: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut exit: Vec<f64> = vec![0.0; n];
    for (i, &(a, b, c)) in states.iter().enumerate() {
        let mut push = |to: (u64, u64, u64), r: f64| {
            if r > 0.0 {
                rates[i].push((index[&to], r));
                exit[i] += r;
            }
        };
        if a > 0 {
            push((a - 1, b + 1, c), rate_down * a as f64);
        }
        if b > 0 {
            push((a, b - 1, c + 1), rate_down * b as f64);
        }
        if c > 0 {
            push((a + 1, b, c - 1), rate_up * c as f64);
        }
    }

    // uniformization: p(t) = sum_k Poisson(k; Lambda t) p0 P^k
    let lambda = exit.iter().cloned().fold(0.0, f64::max).max(1e-9);
    let mut p = vec![0.0; n];
    p[index[&(total, 0, 0)]] = 1.0;
    let mut result = vec![0.0; n];
    let mut poisson = (-lambda * t).exp();
    let mut cumulative = 0.0;
    let mut k = 0usize;
    while cumulative < 1.0 - 1e-12 && k < 10_000 {
        for (i, &pi) in p.iter().enumerate() {
            result[i] += poisson * pi;
        }
        cumulative += poisson;
        // p <- p P, with P = I + Q / lambda
        let mut next = vec![0.0; n];
        for (i, &pi) in p.iter().enumerate() {
            if pi == 0.0 {
                continue;
            }
            next[i] += pi * (1.0 - exit[i] / lambda);
            for &(j, r) in &rates[i] {
                next[j] += pi * r / lambda;
            }
        }
        p = next;
        k += 1;
        poisson *= lambda * t / k as f64;
    }

    let mut means = [0.0f64; 3];
    for (i, &(a, b, c)) in states.iter().enumerate() {
        means[0] += result[i] * a as f64;
        means[1] += result[i] * b as f64;
        means[2] += result[i] * c as f64;
    }
    means
}

#[test]
fn stochastic_means_match_exact_ctmc_within_three_standard_errors() {
    let total = 4u64; // 15 states, well under the truncation bound
    let rnet = tiny_loop(total);
    let horizon = 3.0;
    let replicates = 200usize;

    let mut sums = [0.0f64; 3];
    let mut sq_sums = [0.0f64; 3];
    for i in 0..replicates {
        let trace = simulate_reactions(
            &rnet,
            &ChemSimParams {
                horizon,
                seed: 10_000 + i as u64,
                method: SimulationMethod::Stochastic,
            },
        )
        .unwrap();
        let finals = trace.final_counts();
        for s in 0..3 {
            sums[s] += finals[s] as f64;
            sq_sums[s] += (finals[s] as f64) * (finals[s] as f64);
        }
    }

    let exact = ctmc_mean_counts(total, horizon);
    for s in 0..3 {
        let mean = sums[s] / replicates as f64;
        let var = (sq_sums[s] / replicates as f64 - mean * mean).max(0.0);
        let se = (var / replicates as f64).sqrt().max(1e-6);
        assert!(
            (mean - exact[s]).abs() <= 3.0 * se,
            "species {s}: simulated {mean:.4} vs exact {:.4} (3se = {:.4})",
            exact[s],
            3.0 * se
        );
    }
}

/// Brute force: enumerate all subsets of species, find the minimal
/// regenerating ones under the closure, and compare with the component
/// product.
fn brute_force_minimal_seed_count(rnet: &ReactionNetwork) -> u64 {
    let ids: Vec<String> = rnet.species.iter().map(|s| s.id.clone()).collect();
    let enzymes: BTreeSet<String> = rnet
        .reactions
        .iter()
        .filter_map(|r| r.enzyme.clone())
        .collect();
    let candidates: Vec<&String> = ids.iter().filter(|id| !enzymes.contains(*id)).collect();
    let n = candidates.len();
    assert!(n <= 12, "brute force bound");
    let mut minimal: Vec<BTreeSet<String>> = Vec::new();
    for mask in 1u32..(1 << n) {
        let set: BTreeSet<String> = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| candidates[i].clone())
            .collect();
        if !regenerates_from(rnet, &set) {
            continue;
        }
        if minimal.iter().any(|m| m.is_subset(&set)) {
            continue;
        }
        minimal.retain(|m| !set.is_subset(m));
        minimal.push(set);
    }
    minimal.len() as u64
}

#[test]
fn generator_count_matches_brute_force_on_disjoint_loop_unions() {
    // disjoint loops of sizes 3 and 4: 12 minimal seed choices
    let mut species = Vec::new();
    let mut reactions = Vec::new();
    for (prefix, len) in [("X", 3usize), ("Y", 4usize)] {
        for i in 0..len {
            species.push(Species {
                id: format!("{prefix}{i}"),
                energy_level: (len - i) as f64,
                initial_count: 5,
            });
        }
        for i in 0..len {
            reactions.push(Reaction {
                reactants: vec![(format!("{prefix}{i}"), 1)],
                products: vec![(format!("{prefix}{}", (i + 1) % len), 1)],
                enzyme: None,
                activation_energy: 0.1,
                direction: if i == len - 1 { Direction::Uphill } else { Direction::Downhill },
                rate_constant: 1.0,
            });
        }
    }
    let rnet = ReactionNetwork {
        species,
        reactions,
        energy_supply: 10.0,
        abundant_species: BTreeSet::new(),
    };
    let report = generator_sets(&rnet).unwrap();
    assert_eq!(report.per_component_choices, vec![3, 4]);
    assert_eq!(report.total_count, 12);
    assert_eq!(brute_force_minimal_seed_count(&rnet), 12);
}

#[test]
fn generator_count_matches_brute_force_on_the_mapped_loop() {
    let rnet = fixtures::a4_loop_network();
    let report = generator_sets(&rnet).unwrap();
    assert_eq!(report.total_count, 3);
    assert_eq!(brute_force_minimal_seed_count(&rnet), 3);
}

#[test]
fn zero_energy_supply_starves_the_loop_toward_chain_behavior() {
    let mut starved = fixtures::a4_loop_network();
    starved.energy_supply = 0.0;
    let healthy = fixtures::a4_loop_network();
    let mut starved_survivals = 0;
    let mut healthy_survivals = 0;
    for seed in 0..30u64 {
        let params = fixtures::chem_params(seed);
        let st = simulate_reactions(&starved, &params).unwrap();
        let ht = simulate_reactions(&healthy, &params).unwrap();
        starved_survivals +=
            spl_core::chemical::all_species_survive(&starved, &st) as usize;
        healthy_survivals +=
            spl_core::chemical::all_species_survive(&healthy, &ht) as usize;
    }
    assert!(starved_survivals < healthy_survivals);
    assert_eq!(starved_survivals, 0, "an unclosable loop drains its top species");
}

#[test]
fn zero_horizon_survives_trivially() {
    let loop_net = fixtures::a4_loop_network();
    let chain_net = fixtures::a4_chain_network();
    let report = persistence_experiment(
        &loop_net,
        &chain_net,
        &ChemSimParams { horizon: 0.0, seed: 5, method: SimulationMethod::Stochastic },
        10,
    )
    .unwrap();
    assert_eq!(report.survival_loop, 1.0);
    assert_eq!(report.survival_chain, 1.0);
}

#[test]
fn persistence_rejects_mismatched_chains() {
    let loop_net = fixtures::a4_loop_network();
    let mut bad_chain = fixtures::a4_chain_network();
    bad_chain.reactions.pop();
    let err = persistence_experiment(
        &loop_net,
        &bad_chain,
        &fixtures::chem_params(0),
        5,
    )
    .unwrap_err();
    assert!(matches!(err, ChemicalError::ChainMismatch(_)));
}

#[test]
fn split_outcome_matches_generator_coverage_on_two_component_fixture() {
    // two disjoint loops; give half A all of loop X and nothing of loop Y
    let mut species = Vec::new();
    let mut reactions = Vec::new();
    for (prefix, len) in [("X", 3usize), ("Y", 3usize)] {
        for i in 0..len {
            species.push(Species {
                id: format!("{prefix}{i}"),
                energy_level: 1.0,
                initial_count: 6,
            });
        }
        for i in 0..len {
            reactions.push(Reaction {
                reactants: vec![(format!("{prefix}{i}"), 1)],
                products: vec![(format!("{prefix}{}", (i + 1) % len), 1)],
                enzyme: None,
                activation_energy: 0.0,
                direction: Direction::Downhill,
                rate_constant: 1.0,
            });
        }
    }
    let rnet = ReactionNetwork {
        species,
        reactions,
        energy_supply: 10.0,
        abundant_species: BTreeSet::new(),
    };
    // adversarial split: half A gets only loop X, so half B gets only loop
    // Y; coverage predicts that neither half regenerates the whole network
    let counts_a: Vec<u64> = rnet
        .species
        .iter()
        .map(|s| if s.id.starts_with('X') { s.initial_count } else { 0 })
        .collect();
    let report = run_split(&rnet, &fixtures::chem_params(3), &counts_a).unwrap();
    assert!(!report.coverage_a && !report.coverage_b);
    assert_eq!(report.part_a_regenerates, report.coverage_a);
    assert_eq!(report.part_b_regenerates, report.coverage_b);

    // fair random splits cover both components in both halves and both
    // halves regenerate, again as coverage predicts
    for seed in 0..5u64 {
        let report =
            spl_core::chemical::split_regeneration_test(&rnet, &fixtures::chem_params(40), seed)
                .unwrap();
        assert_eq!(report.part_a_regenerates, report.coverage_a, "seed {seed}");
        assert_eq!(report.part_b_regenerates, report.coverage_b, "seed {seed}");
        assert!(report.coverage_a && report.coverage_b, "unlucky split at seed {seed}");
    }
}
