//! Shared experiment fixtures: the looped-network figures (input surface
//! feeding two shallow loops, longitudinal table/chair branches, lateral
//! association), the track designs of the physical family, the three-species
//! reaction loop, and the sentence corpus.
//!
//! Conventions used throughout: thresholds are 1.0; functional excitatory
//! edges carry weight 1.5 (so a 0.8x global weight scale still propagates
//! while 0.6x does not); branch entries are driven by three 0.4375 edges,
//! so they ignite only on a three-way coincidence of parent-loop activity
//! and their own input taps. Interior nodes use refractory 2 and recharge
//! 0.5, which sustains wave-mode circulation indefinitely but not saturated
//! all-step firing.

use std::collections::BTreeSet;

use crate::dynamics::{DynParams, FeedbackRouting, Stimulus};
use crate::fixedset::{FixedSet, FixedSetId, FixedSetKind, FixedSetRegistry, StimulusFamily};
use crate::growth::{associate_lateral, extend_longitudinal, GrowthParams};
use crate::membrane::{BandThresholds, MembraneConfig};
use crate::network::{build_network, EdgeSpec, Network, NetworkSpec, NodeSpec};
use crate::LoopId;

/// Supra-threshold weight of functional edges.
pub const EDGE_W: f64 = 1.5;
/// Sub-threshold coincidence weight (three fire, two do not).
pub const COINCIDENCE_W: f64 = 0.4375;
/// Stimulus magnitude applied to input nodes.
pub const STIM_W: f64 = 1.5;

fn input_node(name: &str) -> NodeSpec {
    let mut n = NodeSpec::new(name);
    n.refractory = 1;
    n.energy_recharge_rate = 1.0;
    n
}

fn interior_node(name: &str) -> NodeSpec {
    let mut n = NodeSpec::new(name);
    n.refractory = 2;
    n.energy_recharge_rate = 0.5;
    n
}

fn edge(src: &str, dst: &str, weight: f64) -> EdgeSpec {
    EdgeSpec {
        src: src.into(),
        dst: dst.into(),
        weight,
    }
}

fn tri_edges(prefix: &str, weight: f64) -> Vec<EdgeSpec> {
    vec![
        edge(&format!("{prefix}a"), &format!("{prefix}b"), weight),
        edge(&format!("{prefix}b"), &format!("{prefix}c"), weight),
        edge(&format!("{prefix}c"), &format!("{prefix}a"), weight),
    ]
}

/// Minimal three-node cycle with ample energy, used by unit tests.
pub fn triangle() -> Network {
    let mut nodes = Vec::new();
    for name in ["A", "B", "C"] {
        let mut n = NodeSpec::new(name);
        n.energy_capacity = 100.0;
        n.energy_recharge_rate = 2.0;
        nodes.push(n);
    }
    let spec = NetworkSpec {
        nodes,
        edges: vec![edge("A", "B", 1.0), edge("B", "C", 1.0), edge("C", "A", 1.0)],
        input_surface: vec!["A".into()],
        output_surface: vec![],
    };
    build_network(&spec).unwrap()
}

/// Five input nodes feeding two interior loops (the looped-network figure):
/// any stimulated input ignites both L1 and L2, whose activity reaches the
/// two output nodes.
pub fn fig2() -> Network {
    build_network(&fig2_spec()).unwrap()
}

pub fn fig2_spec() -> NetworkSpec {
    let mut nodes: Vec<NodeSpec> = (1..=5).map(|i| input_node(&format!("I{i}"))).collect();
    for prefix in ["L1", "L2"] {
        for suffix in ["a", "b", "c"] {
            nodes.push(interior_node(&format!("{prefix}{suffix}")));
        }
    }
    nodes.push(interior_node("O1"));
    nodes.push(interior_node("O2"));

    let mut edges = Vec::new();
    for i in 1..=5 {
        edges.push(edge(&format!("I{i}"), "L1a", EDGE_W));
        edges.push(edge(&format!("I{i}"), "L2a", EDGE_W));
    }
    edges.extend(tri_edges("L1", EDGE_W));
    edges.extend(tri_edges("L2", EDGE_W));
    edges.push(edge("L1c", "O1", EDGE_W));
    edges.push(edge("L2c", "O2", EDGE_W));

    NetworkSpec {
        nodes,
        edges,
        input_surface: (1..=5).map(|i| format!("I{i}")).collect(),
        output_surface: vec!["O1".into(), "O2".into()],
    }
}

pub fn loop_l1() -> LoopId {
    LoopId("L1a->L1b->L1c".into())
}
pub fn loop_l2() -> LoopId {
    LoopId("L2a->L2b->L2c".into())
}
pub fn loop_l3() -> LoopId {
    LoopId("L3a->L3b->L3c".into())
}
pub fn loop_l4() -> LoopId {
    LoopId("L4a->L4b->L4c".into())
}
pub fn loop_l5() -> LoopId {
    LoopId("L5a->L5b->L5c".into())
}
pub fn loop_l6() -> LoopId {
    LoopId("L6a->L6b->L6c".into())
}
pub fn loop_dormant() -> LoopId {
    LoopId("D1a->D1b->D1c".into())
}

/// Registry holding only the shallow base fixed set {L1, L2}.
pub fn fig2_registry() -> FixedSetRegistry {
    let mut reg = FixedSetRegistry::new();
    reg.register(FixedSet {
        id: FixedSetId::new("base-fs"),
        label: "base-fs".into(),
        kind: FixedSetKind::Direct,
        loop_ids: [loop_l1(), loop_l2()].into_iter().collect(),
        parents: BTreeSet::new(),
    })
    .unwrap();
    reg
}

/// Dynamics parameters shared by the figure fixtures.
pub fn fig_params() -> DynParams {
    DynParams {
        seed: 7,
        ..DynParams::default()
    }
}

fn pattern(inputs: &[usize], onset: usize, duration: usize) -> Stimulus {
    let pairs: Vec<(String, f64)> = inputs
        .iter()
        .map(|i| (format!("I{i}"), STIM_W))
        .collect();
    Stimulus {
        pattern: pairs.into_iter().collect(),
        onset,
        duration,
    }
}

/// Translations of the I1-I3 pattern by one node across the input surface.
pub fn fig2_table_family() -> StimulusFamily {
    StimulusFamily {
        label: "table".into(),
        average: pattern(&[1, 2, 3], 0, 2),
        variations: vec![pattern(&[2, 3, 4], 0, 2), pattern(&[3, 4, 5], 0, 2)],
    }
}

/// The longitudinal-extension figure: the fig2 base plus four branch loops.
/// Branch entries are three-way coincidence gated on a parent-loop node and
/// two input taps, so table-like stimuli (I1-I3) ignite L3/L4 while
/// chair-like stimuli (I3-I5) ignite L5/L6, always strictly after the
/// shallow loops complete. A dormant triangle D1 exists structurally but is
/// reachable from nothing.
pub fn fig3() -> Network {
    build_network(&fig3_spec()).unwrap()
}

pub fn fig3_spec() -> NetworkSpec {
    let mut spec = fig2_spec();
    for prefix in ["L3", "L4", "L5", "L6", "D1"] {
        for suffix in ["a", "b", "c"] {
            spec.nodes.push(interior_node(&format!("{prefix}{suffix}")));
        }
        spec.edges.extend(tri_edges(prefix, EDGE_W));
    }
    // coincidence gates: one parent-loop node + two input taps
    for (entry, gates) in [
        ("L3a", ["L1c", "I1", "I2"]),
        ("L4a", ["L2c", "I2", "I3"]),
        ("L5a", ["L1c", "I3", "I4"]),
        ("L6a", ["L2c", "I4", "I5"]),
    ] {
        for gate in gates {
            spec.edges.push(edge(gate, entry, COINCIDENCE_W));
        }
    }
    spec.edges.push(edge("L3c", "O1", EDGE_W));
    spec.edges.push(edge("L4c", "O2", EDGE_W));
    spec.edges.push(edge("L5c", "O1", EDGE_W));
    spec.edges.push(edge("L6c", "O2", EDGE_W));
    spec
}

/// Table views: stimuli centered on I1-I3 (long enough for the branch
/// coincidence windows), with one wider and one shorter variation.
pub fn fig3_table_family() -> StimulusFamily {
    StimulusFamily {
        label: "table".into(),
        average: pattern(&[1, 2, 3], 0, 6),
        variations: vec![pattern(&[1, 2, 3, 4], 0, 6), pattern(&[1, 2, 3], 0, 5)],
    }
}

/// Chair views: stimuli centered on I3-I5.
pub fn fig3_chair_family() -> StimulusFamily {
    StimulusFamily {
        label: "chair".into(),
        average: pattern(&[3, 4, 5], 0, 6),
        variations: vec![pattern(&[2, 3, 4, 5], 0, 6), pattern(&[3, 4, 5], 0, 5)],
    }
}

/// fig3 registry with the promoted table/chair meta sets and the dormant
/// idle set, as the membrane and knowing experiments expect them.
pub fn fig3_meta_registry() -> FixedSetRegistry {
    let mut reg = fig2_registry();
    let base: BTreeSet<FixedSetId> = [FixedSetId::new("base-fs")].into_iter().collect();
    reg.register(FixedSet {
        id: FixedSetId::new("table-fs"),
        label: "table-fs".into(),
        kind: FixedSetKind::Meta,
        loop_ids: [loop_l3(), loop_l4()].into_iter().collect(),
        parents: base.clone(),
    })
    .unwrap();
    reg.register(FixedSet {
        id: FixedSetId::new("chair-fs"),
        label: "chair-fs".into(),
        kind: FixedSetKind::Meta,
        loop_ids: [loop_l5(), loop_l6()].into_iter().collect(),
        parents: base,
    })
    .unwrap();
    reg.register(FixedSet {
        id: FixedSetId::new("idle-fs"),
        label: "idle-fs".into(),
        kind: FixedSetKind::Direct,
        loop_ids: [loop_dormant()].into_iter().collect(),
        parents: BTreeSet::new(),
    })
    .unwrap();
    reg
}

/// The lateral-association figure: fig3 plus bidirectional links between the
/// attachment nodes of the table loops and the chair loops.
pub fn fig4() -> Network {
    build_network(&fig4_spec()).unwrap()
}

pub fn fig4_spec() -> NetworkSpec {
    let mut spec = fig3_spec();
    for ta in ["L3a", "L4a"] {
        for ca in ["L5a", "L6a"] {
            spec.edges.push(edge(ta, ca, EDGE_W));
            spec.edges.push(edge(ca, ta, EDGE_W));
        }
    }
    spec
}

pub fn fig4_registry() -> FixedSetRegistry {
    fig3_meta_registry()
}

/// fig4 after three growth rounds: each round extends the table and chair
/// sets by one branch loop and laterally associates the new candidates.
pub fn fig4_grown() -> (Network, FixedSetRegistry) {
    let mut net = fig4();
    let mut registry = fig4_registry();
    let table = FixedSetId::new("table-fs");
    let chair = FixedSetId::new("chair-fs");
    for round in 0..3u64 {
        let gp = GrowthParams {
            seed: 100 + round,
            ..GrowthParams::default()
        };
        let (n1, r1) = extend_longitudinal(&net, &registry, &table, &gp).unwrap();
        let gp2 = GrowthParams {
            seed: 200 + round,
            ..GrowthParams::default()
        };
        let (n2, r2) = extend_longitudinal(&n1, &r1, &chair, &gp2).unwrap();
        let (n3, r3) = associate_lateral(
            &n2,
            &r2,
            &FixedSetId(format!("table-fs+b{round}")),
            &FixedSetId(format!("chair-fs+b{round}")),
            &GrowthParams::default(),
        )
        .unwrap();
        net = n3;
        registry = r3;
    }
    (net, registry)
}

/// Sustained whole-surface drive used by the membrane experiments.
pub fn membrane_drive(horizon: usize) -> Vec<Stimulus> {
    vec![pattern(&[1, 2, 3, 4, 5], 0, horizon)]
}

/// Output-to-input feedback closing the sensorimotor loop.
pub fn fig_routing() -> FeedbackRouting {
    FeedbackRouting::new(&[("O1", "I1", STIM_W), ("O2", "I4", STIM_W)])
}

/// Membrane settings for the grown fig4 fixture: thresholds rescaled to
/// simulation activity levels (nine-ish co-active sets against a gamma
/// floor of six).
pub fn grown_membrane_config() -> MembraneConfig {
    MembraneConfig {
        thresholds: BandThresholds::scaled(0.2),
        routing: Some(fig_routing()),
        window: 25,
        min_sustain: Some(60),
        horizon: 240,
    }
}

/// Membrane settings for the plain fig4 knowing fixture (three co-active
/// sets against a gamma floor of 2.4).
pub fn knows_membrane_config() -> MembraneConfig {
    MembraneConfig {
        thresholds: BandThresholds::scaled(0.08),
        routing: Some(fig_routing()),
        window: 25,
        min_sustain: Some(60),
        horizon: 200,
    }
}

/// The shipped sentence corpus: one whitespace-tokenized sentence per line.
pub const PIZZA_CORPUS: &str = "\
I like to eat pizza tonight
I like to eat pasta today
I want to eat pizza now
we like to play chess tonight
pizza is delicious
pizza has cheese
I am happy tonight
we want to play now
";

/// Word -> fixed-set association for the knowing fixture. `include_idle`
/// additionally maps "chess" onto the dormant set, which never intersects a
/// live membrane.
pub fn knows_token_map(include_idle: bool) -> Vec<(String, FixedSetId)> {
    let mut map = vec![
        ("pizza".to_string(), FixedSetId::new("table-fs")),
        ("I".to_string(), FixedSetId::new("base-fs")),
        ("tonight".to_string(), FixedSetId::new("chair-fs")),
    ];
    if include_idle {
        map.push(("chess".to_string(), FixedSetId::new("idle-fs")));
    }
    map
}

// ---------------------------------------------------------------------------
// physical and chemical fixtures
// ---------------------------------------------------------------------------

use crate::physical::{Feature, TrackBlueprint, TrackSimParams};

/// The curled-incline design: one deep valley and one hill, so motion keeps
/// collapsing into the single stable point.
pub fn a1b_blueprint() -> TrackBlueprint {
    TrackBlueprint::single_cycle(
        vec![Feature::valley(1.5), Feature::hill(0.75)],
        0.05,
        3,
    )
}

/// The multi-valley redesign: three extra valleys spread along the path.
pub fn a1c_blueprint() -> TrackBlueprint {
    crate::physical::add_valleys(&a1b_blueprint(), 3).unwrap()
}

/// The looped redesign: every valley replaced by a tiny well-lubricated
/// storage loop.
pub fn a1d_blueprint() -> TrackBlueprint {
    let mut bp = a1c_blueprint();
    let valley_indices: Vec<usize> = bp.cycles[0]
        .iter()
        .enumerate()
        .filter(|(_, f)| f.is_valley())
        .map(|(i, _)| i)
        .collect();
    for idx in valley_indices {
        bp = crate::physical::valley_to_loop(&bp, idx).unwrap();
    }
    bp
}

pub fn track_params(seed: u64) -> TrackSimParams {
    TrackSimParams {
        step_dt: 0.02,
        energy_burst_rate: 0.15,
        burst_magnitude: 0.8,
        horizon: 250.0,
        seed,
        initial_speed: 1.0,
    }
}

/// Three-level cyclic blueprint whose chemical image is the three-species
/// loop (two downhill reactions and one uphill closing reaction).
pub fn three_level_blueprint() -> TrackBlueprint {
    TrackBlueprint::single_cycle(
        vec![Feature::valley(1.0), Feature::valley(1.0), Feature::hill(2.0)],
        0.05,
        30,
    )
}

pub fn two_level_blueprint() -> TrackBlueprint {
    TrackBlueprint::single_cycle(vec![Feature::valley(1.0), Feature::hill(1.0)], 0.05, 10)
}

use crate::chemical::{ChemSimParams, ReactionNetwork};

/// The mapped three-species loop with a workable energy supply.
pub fn a4_loop_network() -> ReactionNetwork {
    let mut rnet = crate::chemical::map_physical_to_chemical(&three_level_blueprint()).unwrap();
    rnet.energy_supply = 20.0;
    rnet
}

/// The same network with its closing uphill reaction removed: a dissipative
/// chain.
pub fn a4_chain_network() -> ReactionNetwork {
    let mut rnet = a4_loop_network();
    rnet.reactions.retain(|r| !r.is_uphill());
    rnet
}

pub fn chem_params(seed: u64) -> ChemSimParams {
    ChemSimParams {
        horizon: 40.0,
        seed,
        method: crate::chemical::SimulationMethod::Stochastic,
    }
}

/// Three disjoint four-species loops: the 4 x 4 x 4 = 64 generator-choice
/// fixture.
pub fn generators_3x4_network() -> ReactionNetwork {
    let mut species = Vec::new();
    let mut reactions = Vec::new();
    for (block, prefix) in ["A", "B", "C"].iter().enumerate() {
        for i in 0..4usize {
            species.push(crate::chemical::Species {
                id: format!("{prefix}{}", i + 1),
                energy_level: (3 - i) as f64 + block as f64 * 0.0,
                initial_count: 8,
            });
        }
        for i in 0..4usize {
            let from = format!("{prefix}{}", i + 1);
            let to = format!("{prefix}{}", (i + 1) % 4 + 1);
            let uphill = i == 3;
            reactions.push(crate::chemical::Reaction {
                reactants: vec![(from, 1)],
                products: vec![(to, 1)],
                enzyme: None,
                activation_energy: if uphill { 0.5 } else { 0.1 },
                direction: if uphill {
                    crate::chemical::Direction::Uphill
                } else {
                    crate::chemical::Direction::Downhill
                },
                rate_constant: 1.0,
            });
        }
    }
    ReactionNetwork {
        species,
        reactions,
        energy_supply: 50.0,
        abundant_species: BTreeSet::new(),
    }
}
