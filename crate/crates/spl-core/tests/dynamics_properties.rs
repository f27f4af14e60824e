//! Dynamics-engine properties: seed determinism, the energy-conservation
//! bound, trigger-window monotonicity, quiescence, the analytic
//! energy-budget oracle for single-loop sustain, and an independent
//! cyclic-order matcher cross-checking triggered-loop detection.

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spl_core::dynamics::{
    loop_activation_events, run, self_sustain_time, triggered_loops, DynParams, Stimulus,
};
use spl_core::network::{
    build_network, enumerate_simple_cycles, EdgeSpec, Loop, Network, NetworkSpec, NodeSpec,
};
use spl_core::{LoopId, NodeId, Trace};

fn random_network(seed: u64, n: usize, p_edge: f64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes: Vec<NodeSpec> = (0..n).map(|i| NodeSpec::new(&format!("n{i:02}"))).collect();
    let mut edges = Vec::new();
    for s in 0..n {
        for d in 0..n {
            if s != d && rng.gen::<f64>() < p_edge {
                edges.push(EdgeSpec {
                    src: format!("n{s:02}"),
                    dst: format!("n{d:02}"),
                    weight: rng.gen_range(0.5..1.5),
                });
            }
        }
    }
    build_network(&NetworkSpec {
        nodes,
        edges,
        input_surface: (0..n.min(3)).map(|i| format!("n{i:02}")).collect(),
        output_surface: vec![],
    })
    .unwrap()
}

#[test]
fn quiescence_holds_for_fifty_random_networks() {
    for seed in 0..50u64 {
        let net = random_network(seed, 8, 0.3);
        let trace = run(&net, &[], &DynParams::default(), 30).unwrap();
        assert!(trace.is_quiescent(), "network {seed} fired without input");
    }
}

#[test]
fn energy_bound_holds_on_noisy_runs() {
    for seed in 0..10u64 {
        let net = random_network(seed, 8, 0.4);
        let params = DynParams {
            noise_rate: 0.1,
            seed,
            ..DynParams::default()
        };
        let stim = Stimulus::new(&[("n00", 2.0)], 0, 5);
        let horizon = 120;
        let trace = run(&net, &[stim], &params, horizon).unwrap();
        for node in net.node_ids() {
            let p = net.node_params(node);
            let spent = trace.total_firings(node) as f64 * p.firing_cost;
            let budget = p.energy_capacity + p.energy_recharge_rate * horizon as f64;
            assert!(
                spent <= budget + 1e-9,
                "node {:?} spent {spent} of budget {budget}",
                net.node_name(node)
            );
        }
    }
}

/// Independent matcher: build every valid traversal interval by a direct
/// step-by-step scan of the firing sets (first firing of each loop node in
/// order), then maximize the number of non-overlapping intervals by
/// dynamic programming rather than the engine's greedy walk.
fn oracle_traversal_count(trace: &Trace, lp: &Loop, window: usize) -> usize {
    let nodes = lp.nodes();
    let k = nodes.len();
    let fired_at = |step: usize, node: NodeId| -> bool {
        step < trace.horizon && trace.firings[step].contains(&node)
    };

    // all valid (anchor, close) intervals
    let mut intervals: Vec<(usize, usize)> = Vec::new();
    for anchor in 0..trace.horizon {
        if !fired_at(anchor, nodes[0]) {
            continue;
        }
        let mut t = anchor;
        let mut ok = true;
        for i in 1..=k {
            let target = nodes[i % k];
            let mut next = None;
            for step in t + 1..trace.horizon {
                if fired_at(step, target) {
                    next = Some(step);
                    break;
                }
            }
            match next {
                Some(step) => t = step,
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok && t - anchor <= window {
            intervals.push((anchor, t));
        }
    }

    // longest chain of intervals with start >= previous close
    intervals.sort_by_key(|&(_, close)| close);
    let mut best_ending: Vec<usize> = Vec::new(); // best count per interval
    let mut best = 0;
    for i in 0..intervals.len() {
        let (start, _) = intervals[i];
        let mut chain = 1;
        for j in 0..i {
            if intervals[j].1 <= start {
                chain = chain.max(best_ending[j] + 1);
            }
        }
        best_ending.push(chain);
        best = best.max(chain);
    }
    best
}

#[test]
fn triggered_loops_agree_with_oracle_matcher_on_noisy_traces() {
    for seed in 0..20u64 {
        let net = random_network(seed + 100, 7, 0.35);
        let loops = enumerate_simple_cycles(&net, 5);
        let params = DynParams {
            noise_rate: 0.15,
            seed,
            ..DynParams::default()
        };
        let stim = Stimulus::new(&[("n00", 2.0)], 0, 3);
        let trace = run(&net, &[stim], &params, 80).unwrap();
        let triggered = triggered_loops(&trace, &net, &loops, &params).unwrap();
        for lp in &loops {
            let oracle = oracle_traversal_count(&trace, lp, params.window_for(lp.len()));
            assert_eq!(
                triggered.contains(lp.id()),
                oracle >= params.min_traversals,
                "loop {} oracle count {oracle} (seed {seed})",
                lp.id()
            );
        }
    }
}

#[test]
fn loop_with_never_firing_node_is_absent() {
    // B never fires: the triangle must not trigger, confirmed by the oracle
    let mut nodes = vec![NodeSpec::new("A"), NodeSpec::new("B"), NodeSpec::new("C")];
    nodes[1].threshold = 99.0;
    let net = build_network(&NetworkSpec {
        nodes,
        edges: vec![
            EdgeSpec { src: "A".into(), dst: "B".into(), weight: 1.0 },
            EdgeSpec { src: "B".into(), dst: "C".into(), weight: 1.0 },
            EdgeSpec { src: "C".into(), dst: "A".into(), weight: 1.0 },
        ],
        input_surface: vec!["A".into()],
        output_surface: vec![],
    })
    .unwrap();
    let loops = enumerate_simple_cycles(&net, 3);
    let params = DynParams::default();
    let trace = run(&net, &[Stimulus::new(&[("A", 1.0)], 0, 5)], &params, 40).unwrap();
    assert!(triggered_loops(&trace, &net, &loops, &params).unwrap().is_empty());
    assert_eq!(oracle_traversal_count(&trace, &loops[0], 6), 0);
}

/// Single energized triangle: the sustain time follows from closed-form
/// energy bookkeeping. With capacity C, recharge r per step, firing cost c
/// (c > 3r so the reservoir drains), every node fires each third step.
/// Nodes start full, so recharges before the first firing clamp away and
/// the energy available at the k-th firing (k = 0, 1, ...) is
/// `C - k(c - 3r)`; the node fires while that stays >= c, i.e. through
/// `k_max = floor((C - c) / (c - 3r))`, and the loop's last completed
/// traversal closes at step `3 * k_max`.
#[test]
fn single_triangle_sustain_matches_energy_bookkeeping() {
    let capacity = 10.0;
    let recharge = 0.25;
    let cost = 1.0;
    let nodes: Vec<NodeSpec> = ["A", "B", "C"]
        .iter()
        .map(|name| {
            let mut n = NodeSpec::new(name);
            n.energy_capacity = capacity;
            n.energy_recharge_rate = recharge;
            n.firing_cost = cost;
            n
        })
        .collect();
    let net = build_network(&NetworkSpec {
        nodes,
        edges: vec![
            EdgeSpec { src: "A".into(), dst: "B".into(), weight: 1.0 },
            EdgeSpec { src: "B".into(), dst: "C".into(), weight: 1.0 },
            EdgeSpec { src: "C".into(), dst: "A".into(), weight: 1.0 },
        ],
        input_surface: vec!["A".into()],
        output_surface: vec![],
    })
    .unwrap();
    let params = DynParams {
        sustain_horizon: Some(400),
        ..DynParams::default()
    };
    let stim = Stimulus::new(&[("A", 1.0)], 0, 1);
    let sustain = self_sustain_time(&net, &[stim], 0, &params).unwrap();

    let k_max = ((capacity - cost) / (cost - 3.0 * recharge)).floor() as usize;
    let expected = 3 * k_max;
    assert_eq!(sustain, expected);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn identical_inputs_give_bit_identical_traces(seed in 0u64..500, noise in 0.0f64..0.3) {
        let net = random_network(seed, 6, 0.4);
        let params = DynParams { noise_rate: noise, seed, ..DynParams::default() };
        let stim = Stimulus::new(&[("n00", 2.0)], 0, 4);
        let a = run(&net, std::slice::from_ref(&stim), &params, 50).unwrap();
        let b = run(&net, std::slice::from_ref(&stim), &params, 50).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn larger_trigger_windows_never_shrink_triggered_sets(
        seed in 0u64..200,
        w1 in 3usize..10,
        extra in 1usize..10,
    ) {
        let net = random_network(seed + 40, 7, 0.35);
        let loops = enumerate_simple_cycles(&net, 5);
        let base = DynParams {
            noise_rate: 0.1,
            seed,
            ..DynParams::default()
        };
        let stim = Stimulus::new(&[("n00", 2.0)], 0, 3);
        let trace = run(&net, std::slice::from_ref(&stim), &base, 70).unwrap();

        let narrow = DynParams { trigger_window: Some(w1), ..base.clone() };
        let wide = DynParams { trigger_window: Some(w1 + extra), ..base };
        let t_narrow: BTreeSet<LoopId> =
            triggered_loops(&trace, &net, &loops, &narrow).unwrap();
        let t_wide: BTreeSet<LoopId> = triggered_loops(&trace, &net, &loops, &wide).unwrap();
        prop_assert!(
            t_narrow.is_subset(&t_wide),
            "narrow {:?} not within wide {:?}",
            t_narrow,
            t_wide
        );
    }

    #[test]
    fn annotations_match_event_lists(seed in 0u64..100) {
        let net = random_network(seed + 300, 6, 0.4);
        let loops = enumerate_simple_cycles(&net, 5);
        let params = DynParams { noise_rate: 0.12, seed, ..DynParams::default() };
        let stim = Stimulus::new(&[("n00", 2.0)], 0, 3);
        let mut trace = run(&net, std::slice::from_ref(&stim), &params, 60).unwrap();
        let events = loop_activation_events(&trace, &net, &loops, &params).unwrap();
        spl_core::dynamics::annotate_loop_activations(&mut trace, &net, &loops, &params).unwrap();
        for (id, steps) in &events {
            for &s in steps {
                prop_assert!(trace.loop_activations[s].contains(id));
            }
        }
        let annotated: usize = trace.loop_activations.iter().map(Vec::len).sum();
        let listed: usize = events.values().map(Vec::len).sum();
        prop_assert_eq!(annotated, listed);
    }
}
