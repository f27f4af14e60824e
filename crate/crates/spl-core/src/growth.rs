//! Slow-timescale network evolution: longitudinal extension of a fixed
//! set's loops, lateral Hebbian association between fixed sets, co-firing
//! weight updates, and prediction-graph pruning. Every operator maps
//! immutable inputs to fresh outputs; dynamics never mutate mid-run.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::continuity::{PredictionGraph, TokenSeq};
use crate::fixedset::{FixedSet, FixedSetId, FixedSetKind, FixedSetRegistry};
use crate::network::{build_network, EdgeSpec, Network, NetworkError, NodeSpec};
use crate::Trace;

/// Largest weight the Hebbian rule will grow an edge to.
pub const HEBBIAN_WEIGHT_CAP: f64 = 8.0;

/// New-loop internal edges relative to the attachment node's threshold:
/// comfortably supra-threshold so an ignited branch loop self-sustains.
pub const EXTEND_LOOP_WEIGHT_FACTOR: f64 = 1.5;

/// Drive edges into and out of a new branch relative to threshold: three
/// coincident drives fire the entry node, two do not, so a branch ignites
/// only when its parent loops are active together with its own slice of the
/// input surface.
pub const EXTEND_DRIVE_FACTOR: f64 = 0.4375;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthParams {
    /// New loops added per extension.
    pub branch_factor: usize,
    /// Node count of each new loop.
    pub new_loop_len: usize,
    /// Steps within which a following firing counts as a co-firing.
    pub coactivation_window: usize,
    /// Weight added per co-firing.
    pub hebb_increment: f64,
    /// Weight of lateral association edges.
    pub link_weight: f64,
    /// Weights at or below this are treated as absent by pruning heuristics.
    pub prune_threshold: f64,
    pub seed: u64,
}

impl Default for GrowthParams {
    fn default() -> Self {
        GrowthParams {
            branch_factor: 1,
            new_loop_len: 3,
            coactivation_window: 1,
            hebb_increment: 0.125,
            link_weight: 1.5,
            prune_threshold: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GrowthError {
    #[error("invalid growth parameters: {0}")]
    InvalidParams(String),
    #[error("fixed set {0} is not registered")]
    UnknownFixedSet(FixedSetId),
    #[error("fixed set {0} has an empty loop set")]
    EmptyLoopSet(FixedSetId),
    #[error("cannot associate a fixed set with itself: {0}")]
    SelfAssociation(FixedSetId),
    #[error("loop node {0:?} not present in network")]
    MissingLoopNode(String),
    #[error("trace does not match network: node index {0} out of range")]
    TraceMismatch(usize),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

fn attachment_node(net: &Network, loop_id: &crate::LoopId) -> Result<String, GrowthError> {
    let first = loop_id
        .node_names()
        .first()
        .map(|s| s.to_string())
        .ok_or_else(|| GrowthError::MissingLoopNode(loop_id.0.clone()))?;
    if net.node_id(&first).is_none() {
        return Err(GrowthError::MissingLoopNode(first));
    }
    Ok(first)
}

fn fresh_name(existing: &BTreeSet<String>, counter: &mut usize) -> String {
    loop {
        let name = format!("g{}", *counter);
        *counter += 1;
        if !existing.contains(&name) {
            return name;
        }
    }
}

fn upsert_edge(edges: &mut Vec<EdgeSpec>, src: &str, dst: &str, weight: f64) {
    if let Some(e) = edges.iter_mut().find(|e| e.src == src && e.dst == dst) {
        e.weight = weight;
    } else {
        edges.push(EdgeSpec {
            src: src.to_string(),
            dst: dst.to_string(),
            weight,
        });
    }
}

/// Grow `branch_factor` fresh loops of `new_loop_len` nodes downstream of a
/// fixed set's loops. Each new loop gets:
///
/// - internal excitatory edges strong enough to self-sustain once ignited,
/// - a sub-threshold drive edge from the attachment node (the canonical
///   first node) of every parent loop into the new loop's entry, and a
///   sub-threshold edge from the new loop's last node back to each
///   attachment,
/// - sub-threshold taps from a seed-chosen pair of adjacent input-surface
///   nodes into the entry, so distinct stimuli ignite distinct branches.
///
/// The new loops are recorded in the registry as direct candidate sets named
/// `<fs>+b<k>`. Node parameters are copied from the first attachment node.
pub fn extend_longitudinal(
    net: &Network,
    registry: &FixedSetRegistry,
    fs_id: &FixedSetId,
    gp: &GrowthParams,
) -> Result<(Network, FixedSetRegistry), GrowthError> {
    if gp.branch_factor < 1 {
        return Err(GrowthError::InvalidParams("branch_factor must be >= 1".into()));
    }
    if gp.new_loop_len < 2 {
        return Err(GrowthError::InvalidParams("new_loop_len must be >= 2".into()));
    }
    let fs = registry
        .get(fs_id)
        .ok_or_else(|| GrowthError::UnknownFixedSet(fs_id.clone()))?;
    if fs.loop_ids.is_empty() {
        return Err(GrowthError::EmptyLoopSet(fs_id.clone()));
    }

    let attachments: Vec<String> = fs
        .loop_ids
        .iter()
        .map(|l| attachment_node(net, l))
        .collect::<Result<_, _>>()?;
    let template = *net.node_params(net.node_id(&attachments[0]).unwrap());

    let mut spec = net.to_spec();
    let mut existing: BTreeSet<String> = spec.nodes.iter().map(|n| n.id.clone()).collect();
    let mut counter = net.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(gp.seed);
    let inputs: Vec<String> = spec.input_surface.clone();
    let mut new_registry = registry.clone();

    for _branch in 0..gp.branch_factor {
        let names: Vec<String> = (0..gp.new_loop_len)
            .map(|_| {
                let name = fresh_name(&existing, &mut counter);
                existing.insert(name.clone());
                name
            })
            .collect();
        for name in &names {
            spec.nodes.push(NodeSpec {
                id: name.clone(),
                threshold: template.threshold,
                refractory: template.refractory,
                energy_capacity: template.energy_capacity,
                energy_recharge_rate: template.energy_recharge_rate,
                firing_cost: template.firing_cost,
            });
        }
        let loop_w = EXTEND_LOOP_WEIGHT_FACTOR * template.threshold;
        let drive_w = EXTEND_DRIVE_FACTOR * template.threshold;
        for i in 0..gp.new_loop_len {
            let src = &names[i];
            let dst = &names[(i + 1) % gp.new_loop_len];
            upsert_edge(&mut spec.edges, src, dst, loop_w);
        }
        let entry = &names[0];
        let tail = &names[gp.new_loop_len - 1];
        for attach in &attachments {
            upsert_edge(&mut spec.edges, attach, entry, drive_w);
            upsert_edge(&mut spec.edges, tail, attach, drive_w);
        }
        if !inputs.is_empty() {
            let offset = rng.gen_range(0..inputs.len());
            for tap in [offset, (offset + 1) % inputs.len()] {
                upsert_edge(&mut spec.edges, &inputs[tap], entry, drive_w);
            }
        }

        // record the candidate loop under a fresh id
        let mut k = 0usize;
        let candidate_id = loop {
            let id = FixedSetId(format!("{}+b{}", fs_id.0, k));
            if new_registry.get(&id).is_none() {
                break id;
            }
            k += 1;
        };
        let grown = build_network(&spec)?;
        let loop_nodes: Vec<crate::NodeId> = names
            .iter()
            .map(|n| grown.node_id(n).unwrap())
            .collect();
        let candidate_loop = crate::Loop::canonical(&grown, &loop_nodes);
        new_registry
            .register(FixedSet {
                id: candidate_id.clone(),
                label: candidate_id.0.clone(),
                kind: FixedSetKind::Direct,
                loop_ids: [candidate_loop.id().clone()].into_iter().collect(),
                parents: BTreeSet::new(),
            })
            .expect("candidate id chosen fresh");
    }

    let grown = build_network(&spec)?;
    Ok((grown, new_registry))
}

/// Add bidirectional excitatory edges of weight `link_weight` between the
/// attachment node of every loop in `a` and every loop in `b`, and record
/// the association in the registry. Re-associating overwrites the weight of
/// existing lateral edges.
pub fn associate_lateral(
    net: &Network,
    registry: &FixedSetRegistry,
    a: &FixedSetId,
    b: &FixedSetId,
    gp: &GrowthParams,
) -> Result<(Network, FixedSetRegistry), GrowthError> {
    if a == b {
        return Err(GrowthError::SelfAssociation(a.clone()));
    }
    let fs_a = registry
        .get(a)
        .ok_or_else(|| GrowthError::UnknownFixedSet(a.clone()))?;
    let fs_b = registry
        .get(b)
        .ok_or_else(|| GrowthError::UnknownFixedSet(b.clone()))?;
    if fs_a.loop_ids.is_empty() {
        return Err(GrowthError::EmptyLoopSet(a.clone()));
    }
    if fs_b.loop_ids.is_empty() {
        return Err(GrowthError::EmptyLoopSet(b.clone()));
    }

    let mut spec = net.to_spec();
    for la in &fs_a.loop_ids {
        let attach_a = attachment_node(net, la)?;
        for lb in &fs_b.loop_ids {
            let attach_b = attachment_node(net, lb)?;
            upsert_edge(&mut spec.edges, &attach_a, &attach_b, gp.link_weight);
            upsert_edge(&mut spec.edges, &attach_b, &attach_a, gp.link_weight);
        }
    }
    let mut new_registry = registry.clone();
    new_registry
        .add_link(a, b, gp.link_weight)
        .expect("endpoints checked above");
    Ok((build_network(&spec)?, new_registry))
}

/// Strengthen existing edges by `hebb_increment` per co-firing: every
/// ordered pair of firings `(u at t, v at t')` with
/// `1 <= t' - t <= coactivation_window` counts once. Weights cap at
/// [`HEBBIAN_WEIGHT_CAP`]; no new edges are created and untouched edges keep
/// their exact weights.
pub fn hebbian_update(
    net: &Network,
    trace: &Trace,
    gp: &GrowthParams,
) -> Result<Network, GrowthError> {
    for step in &trace.firings {
        for node in step {
            if node.index() >= net.node_count() {
                return Err(GrowthError::TraceMismatch(node.index()));
            }
        }
    }
    let window = gp.coactivation_window.max(1);
    let mut spec = net.to_spec();
    for edge in &mut spec.edges {
        let u = net.node_id(&edge.src).unwrap();
        let v = net.node_id(&edge.dst).unwrap();
        let count = co_firing_count(trace, u, v, window);
        if count > 0 {
            edge.weight =
                (edge.weight + count as f64 * gp.hebb_increment).min(HEBBIAN_WEIGHT_CAP);
        }
    }
    Ok(build_network(&spec)?)
}

/// Ordered co-firing pairs of `(u, v)` within `window` steps.
pub fn co_firing_count(trace: &Trace, u: crate::NodeId, v: crate::NodeId, window: usize) -> usize {
    let u_times = trace.firing_times(u);
    let v_times = trace.firing_times(v);
    let mut count = 0;
    let mut start = 0;
    for &tu in &u_times {
        while start < v_times.len() && v_times[start] <= tu {
            start += 1;
        }
        let mut j = start;
        while j < v_times.len() && v_times[j] <= tu + window {
            count += 1;
            j += 1;
        }
    }
    count
}

/// Result of a pruning pass.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneOutcome {
    pub network: Network,
    pub graph: PredictionGraph,
    /// Successor entries removed, as `(context, next)`.
    pub removed: Vec<(Vec<String>, String)>,
    /// Counterexamples skipped because of unknown tokens:
    /// `(counterexample index, unknown tokens)`.
    pub skipped: Vec<(usize, Vec<String>)>,
}

/// Delete prediction-graph successor entries exercised by the
/// counterexamples but attested by no training sequence, along with the
/// lateral network edges mapped to them (via `token_to_fixedset` and the
/// registry's links). Training-attested pairs are never removed, so
/// valid-corpus continuity verdicts are unchanged. Counterexamples with
/// unknown tokens are reported and skipped.
pub fn prune(
    net: &Network,
    registry: &FixedSetRegistry,
    graph: &PredictionGraph,
    counterexamples: &[TokenSeq],
) -> Result<PruneOutcome, GrowthError> {
    let mut new_graph = graph.clone();
    let mut spec = net.to_spec();
    let mut removed = Vec::new();
    let mut skipped = Vec::new();

    for (idx, seq) in counterexamples.iter().enumerate() {
        let unknown: Vec<String> = seq
            .tokens()
            .iter()
            .filter(|t| !graph.contains_token(t))
            .cloned()
            .collect();
        if !unknown.is_empty() {
            skipped.push((idx, unknown));
            continue;
        }
        let tokens = seq.tokens();
        for next_pos in 1..tokens.len() {
            let next = &tokens[next_pos];
            let max_n = graph.max_order().min(next_pos);
            for n in 1..=max_n {
                let ctx: Vec<String> = tokens[next_pos - n..next_pos].to_vec();
                if new_graph.remove_link(&ctx, next) {
                    remove_mapped_lateral_edges(&mut spec, registry, graph, &ctx, next);
                    removed.push((ctx, next.clone()));
                }
            }
        }
    }

    Ok(PruneOutcome {
        network: build_network(&spec)?,
        graph: new_graph,
        removed,
        skipped,
    })
}

fn remove_mapped_lateral_edges(
    spec: &mut crate::NetworkSpec,
    registry: &FixedSetRegistry,
    graph: &PredictionGraph,
    ctx: &[String],
    next: &str,
) {
    let Some(last) = ctx.last() else { return };
    let (Some(fs_from), Some(fs_to)) = (
        graph.token_to_fixedset.get(last),
        graph.token_to_fixedset.get(next),
    ) else {
        return;
    };
    let linked = registry
        .links
        .iter()
        .any(|l| (&l.a == fs_from && &l.b == fs_to) || (&l.a == fs_to && &l.b == fs_from));
    if !linked {
        return;
    }
    let (Some(from), Some(to)) = (registry.get(fs_from), registry.get(fs_to)) else {
        return;
    };
    // drop the pruned direction's attachment edges
    let from_attach: BTreeSet<&str> = from
        .loop_ids
        .iter()
        .filter_map(|l| l.node_names().first().copied())
        .collect();
    let to_attach: BTreeSet<&str> = to
        .loop_ids
        .iter()
        .filter_map(|l| l.node_names().first().copied())
        .collect();
    spec.edges
        .retain(|e| !(from_attach.contains(e.src.as_str()) && to_attach.contains(e.dst.as_str())));
}
