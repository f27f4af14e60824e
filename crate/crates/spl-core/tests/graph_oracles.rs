//! Brute-force oracle checks for the graph algorithms: cycle enumeration
//! against exhaustive subsequence search, SCC against pairwise
//! reachability, and canonicalization/determinism properties.

use std::collections::BTreeSet;

use proptest::prelude::*;
use spl_core::network::{
    build_network, enumerate_simple_cycles, strongly_connected_components, EdgeSpec, Loop,
    Network, NetworkSpec, NodeSpec,
};

fn network_from_edges(n: usize, edges: &[(usize, usize)]) -> Network {
    let nodes: Vec<NodeSpec> = (0..n).map(|i| NodeSpec::new(&format!("n{i:02}"))).collect();
    let edge_specs: Vec<EdgeSpec> = edges
        .iter()
        .map(|&(s, d)| EdgeSpec {
            src: format!("n{s:02}"),
            dst: format!("n{d:02}"),
            weight: 1.0,
        })
        .collect();
    build_network(&NetworkSpec {
        nodes,
        edges: edge_specs,
        input_surface: vec![],
        output_surface: vec![],
    })
    .unwrap()
}

/// Exhaustive oracle: grow all simple paths and close them into cycles,
/// canonicalizing by smallest rotation of the index sequence.
fn brute_force_cycles(n: usize, edges: &[(usize, usize)], max_len: usize) -> BTreeSet<Vec<usize>> {
    let has_edge = |s: usize, d: usize| edges.contains(&(s, d));
    let mut found = BTreeSet::new();
    let mut stack: Vec<Vec<usize>> = (0..n).map(|v| vec![v]).collect();
    while let Some(path) = stack.pop() {
        let last = *path.last().unwrap();
        for next in 0..n {
            if next == path[0] && path.len() >= 2 && has_edge(last, next) {
                let mut best = path.clone();
                for rot in 1..path.len() {
                    let candidate: Vec<usize> = (0..path.len())
                        .map(|i| path[(rot + i) % path.len()])
                        .collect();
                    if candidate < best {
                        best = candidate;
                    }
                }
                found.insert(best);
            }
            if path.len() < max_len && !path.contains(&next) && has_edge(last, next) {
                let mut extended = path.clone();
                extended.push(next);
                stack.push(extended);
            }
        }
    }
    found
}

fn loops_as_index_sets(_net: &Network, loops: &[Loop]) -> BTreeSet<Vec<usize>> {
    loops
        .iter()
        .map(|lp| {
            let idx: Vec<usize> = lp.nodes().iter().map(|n| n.index()).collect();
            // rotate to the smallest index for comparison with the oracle
            let min_pos = idx
                .iter()
                .enumerate()
                .min_by_key(|(_, &v)| v)
                .map(|(i, _)| i)
                .unwrap();
            (0..idx.len()).map(|i| idx[(min_pos + i) % idx.len()]).collect()
        })
        .collect()
}

#[test]
fn complete_digraph_count_matches_brute_force() {
    let n = 4;
    let mut edges = Vec::new();
    for s in 0..n {
        for d in 0..n {
            if s != d {
                edges.push((s, d));
            }
        }
    }
    let net = network_from_edges(n, &edges);
    let loops = enumerate_simple_cycles(&net, 4);
    let oracle = brute_force_cycles(n, &edges, 4);
    assert_eq!(loops.len(), oracle.len());
    assert_eq!(loops_as_index_sets(&net, &loops), oracle);
    // K4: 6 two-cycles + 8 three-cycles + 6 four-cycles
    assert_eq!(loops.len(), 20);
}

#[test]
fn reachability_oracle_matches_scc_on_fixed_graph() {
    let edges = [
        (0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 5), (5, 3), (5, 6),
        (7, 0), (6, 7), (8, 9), (9, 8), (10, 11),
    ];
    let net = network_from_edges(12, &edges);
    let part = strongly_connected_components(&net);

    let reach = |from: usize| -> BTreeSet<usize> {
        let mut seen: BTreeSet<usize> = [from].into_iter().collect();
        let mut queue = vec![from];
        while let Some(v) = queue.pop() {
            for &(s, d) in &edges {
                if s == v && seen.insert(d) {
                    queue.push(d);
                }
            }
        }
        seen
    };
    let reachable: Vec<BTreeSet<usize>> = (0..12).map(reach).collect();
    for u in 0..12usize {
        for v in 0..12usize {
            let mutually = reachable[u].contains(&v) && reachable[v].contains(&u);
            let same = part.same_component(
                spl_core::NodeId(u as u32),
                spl_core::NodeId(v as u32),
            );
            assert_eq!(mutually, same, "nodes {u} and {v}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn enumeration_matches_brute_force_on_random_graphs(
        n in 2usize..=8,
        edge_bits in prop::collection::vec(any::<bool>(), 64),
        max_len in 2usize..=6,
    ) {
        let mut edges = Vec::new();
        let mut bit = 0;
        for s in 0..n {
            for d in 0..n {
                if s != d {
                    if edge_bits[bit % edge_bits.len()] {
                        edges.push((s, d));
                    }
                    bit += 1;
                }
            }
        }
        let net = network_from_edges(n, &edges);
        let loops = enumerate_simple_cycles(&net, max_len);
        let oracle = brute_force_cycles(n, &edges, max_len);
        prop_assert_eq!(loops_as_index_sets(&net, &loops), oracle);
    }

    #[test]
    fn scc_matches_reachability_on_random_graphs(
        n in 2usize..=10,
        edge_bits in prop::collection::vec(any::<bool>(), 100),
    ) {
        let mut edges = Vec::new();
        let mut bit = 0;
        for s in 0..n {
            for d in 0..n {
                if s != d {
                    if edge_bits[bit % edge_bits.len()] {
                        edges.push((s, d));
                    }
                    bit += 1;
                }
            }
        }
        let net = network_from_edges(n, &edges);
        let part = strongly_connected_components(&net);
        let adj: Vec<Vec<usize>> = (0..n)
            .map(|s| edges.iter().filter(|&&(a, _)| a == s).map(|&(_, d)| d).collect())
            .collect();
        let reach = |from: usize| -> BTreeSet<usize> {
            let mut seen: BTreeSet<usize> = [from].into_iter().collect();
            let mut queue = vec![from];
            while let Some(v) = queue.pop() {
                for &d in &adj[v] {
                    if seen.insert(d) {
                        queue.push(d);
                    }
                }
            }
            seen
        };
        let reachable: Vec<BTreeSet<usize>> = (0..n).map(reach).collect();
        for u in 0..n {
            for v in 0..n {
                let mutually = reachable[u].contains(&v) && reachable[v].contains(&u);
                let same = part.same_component(
                    spl_core::NodeId(u as u32),
                    spl_core::NodeId(v as u32),
                );
                prop_assert_eq!(mutually, same, "nodes {} and {}", u, v);
            }
        }
    }

    #[test]
    fn every_rotation_canonicalizes_to_the_same_id(
        len in 2usize..=6,
        rotation in 0usize..6,
    ) {
        let edges: Vec<(usize, usize)> = (0..len).map(|i| (i, (i + 1) % len)).collect();
        let net = network_from_edges(len, &edges);
        let cycle: Vec<spl_core::NodeId> = (0..len)
            .map(|i| spl_core::NodeId(((rotation + i) % len) as u32))
            .collect();
        let canonical = Loop::canonical(&net, &cycle);
        let reference: Vec<spl_core::NodeId> =
            (0..len).map(|i| spl_core::NodeId(i as u32)).collect();
        let reference_loop = Loop::canonical(&net, &reference);
        prop_assert_eq!(canonical.id(), reference_loop.id());
    }

    #[test]
    fn enumeration_is_deterministic(
        n in 2usize..=7,
        edge_bits in prop::collection::vec(any::<bool>(), 49),
    ) {
        let mut edges = Vec::new();
        let mut bit = 0;
        for s in 0..n {
            for d in 0..n {
                if s != d {
                    if edge_bits[bit % edge_bits.len()] {
                        edges.push((s, d));
                    }
                    bit += 1;
                }
            }
        }
        let net1 = network_from_edges(n, &edges);
        // same spec with edges listed in reverse order
        let mut reversed = edges.clone();
        reversed.reverse();
        let net2 = network_from_edges(n, &reversed);
        let l1: Vec<String> =
            enumerate_simple_cycles(&net1, 6).iter().map(|l| l.id().0.clone()).collect();
        let l2: Vec<String> =
            enumerate_simple_cycles(&net2, 6).iter().map(|l| l.id().0.clone()).collect();
        prop_assert_eq!(l1, l2);
    }
}
