//! The directed weighted activation graph and its pure graph algorithms:
//! construction from a validated spec, bounded simple-cycle enumeration,
//! and strongly connected components.
//!
//! Everything here is immutable after construction and free of randomness,
//! so values can be shared across threads without synchronization.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph;

/// Compact per-network node handle. Indices are assigned in the order nodes
/// appear in the originating [`NetworkSpec`], so identical specs always yield
/// identical ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Canonical identity of a directed simple cycle: the node-name sequence in
/// the rotation that is lexicographically smallest, joined by `->`.
///
/// Rotations of the same cycle all canonicalize to the same id; reflections
/// are distinct cycles (directed cycles have one orientation).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LoopId(pub String);

impl fmt::Display for LoopId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl LoopId {
    /// Node names in cycle order (canonical rotation).
    pub fn node_names(&self) -> Vec<&str> {
        self.0.split("->").collect()
    }
}

/// A simple directed cycle of a network, stored in canonical rotation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Loop {
    id: LoopId,
    nodes: Vec<NodeId>,
}

impl Loop {
    /// Canonicalize a cycle given as node indices. The rotation is chosen so
    /// the node-name sequence is lexicographically smallest.
    pub fn canonical(net: &Network, cycle: &[NodeId]) -> Loop {
        assert!(cycle.len() >= 2, "loops have length >= 2");
        let names: Vec<&str> = cycle.iter().map(|&n| net.node_name(n)).collect();
        let k = cycle.len();
        let mut best = 0usize;
        for start in 1..k {
            for off in 0..k {
                let a = names[(start + off) % k];
                let b = names[(best + off) % k];
                match a.cmp(b) {
                    std::cmp::Ordering::Less => {
                        best = start;
                        break;
                    }
                    std::cmp::Ordering::Greater => break,
                    std::cmp::Ordering::Equal => continue,
                }
            }
        }
        let nodes: Vec<NodeId> = (0..k).map(|off| cycle[(best + off) % k]).collect();
        let id = LoopId(
            nodes
                .iter()
                .map(|&n| net.node_name(n))
                .collect::<Vec<_>>()
                .join("->"),
        );
        Loop { id, nodes }
    }

    pub fn id(&self) -> &LoopId {
        &self.id
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Per-node dynamical parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeParams {
    /// Activation required to fire.
    pub threshold: f64,
    /// Minimum number of steps between consecutive firings (1 = every step).
    pub refractory: u32,
    /// Energy reservoir ceiling; nodes start full.
    pub energy_capacity: f64,
    /// Energy regained per step, up to capacity.
    pub energy_recharge_rate: f64,
    /// Energy spent per firing; a node below this cannot fire.
    pub firing_cost: f64,
}

impl Default for NodeParams {
    fn default() -> Self {
        NodeParams {
            threshold: 1.0,
            refractory: 1,
            energy_capacity: 10.0,
            energy_recharge_rate: 1.0,
            firing_cost: 1.0,
        }
    }
}

/// Validation failures when building a [`Network`] from a spec.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetworkError {
    #[error("duplicate node id {0:?}")]
    DuplicateNode(String),
    #[error("unknown node {name:?} referenced by {referrer}")]
    UnknownNode { name: String, referrer: String },
    #[error("self-edge on node {0:?}")]
    SelfEdge(String),
    #[error("non-finite weight on edge {src:?} -> {dst:?}")]
    NonFiniteWeight { src: String, dst: String },
    #[error("non-finite parameter {param} on node {node:?}")]
    NonFiniteParam { node: String, param: String },
}

/// Directed weighted activation graph with input/output surfaces and
/// per-node energy budgets. Construct via [`build_network`].
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    names: Vec<String>,
    params: Vec<NodeParams>,
    /// Outgoing adjacency: `(dst, weight)` per source node, sorted by dst.
    out_edges: Vec<Vec<(NodeId, f64)>>,
    name_to_id: HashMap<String, NodeId>,
    input_surface: Vec<NodeId>,
    output_surface: Vec<NodeId>,
}

impl Network {
    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn node_name(&self, id: NodeId) -> &str {
        &self.names[id.index()]
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.name_to_id.get(name).copied()
    }

    pub fn node_params(&self, id: NodeId) -> &NodeParams {
        &self.params[id.index()]
    }

    pub fn out_edges(&self, id: NodeId) -> &[(NodeId, f64)] {
        &self.out_edges[id.index()]
    }

    pub fn edge_weight(&self, src: NodeId, dst: NodeId) -> Option<f64> {
        self.out_edges[src.index()]
            .iter()
            .find(|(d, _)| *d == dst)
            .map(|(_, w)| *w)
    }

    pub fn edge_count(&self) -> usize {
        self.out_edges.iter().map(Vec::len).sum()
    }

    pub fn input_surface(&self) -> &[NodeId] {
        &self.input_surface
    }

    pub fn output_surface(&self) -> &[NodeId] {
        &self.output_surface
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.names.len() as u32).map(NodeId)
    }

    /// All edges as `(src, dst, weight)` in deterministic order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        self.out_edges.iter().enumerate().flat_map(|(src, outs)| {
            outs.iter()
                .map(move |&(dst, w)| (NodeId(src as u32), dst, w))
        })
    }

    /// A copy with every edge weight multiplied by `lambda`. Used by the
    /// anesthesia/degradation experiments; node parameters are unchanged.
    pub fn scaled_weights(&self, lambda: f64) -> Network {
        let mut scaled = self.clone();
        for outs in &mut scaled.out_edges {
            for (_, w) in outs.iter_mut() {
                *w *= lambda;
            }
        }
        scaled
    }

    /// Serializable spec that rebuilds this network exactly.
    pub fn to_spec(&self) -> NetworkSpec {
        NetworkSpec {
            nodes: self
                .names
                .iter()
                .zip(&self.params)
                .map(|(name, p)| NodeSpec {
                    id: name.clone(),
                    threshold: p.threshold,
                    refractory: p.refractory,
                    energy_capacity: p.energy_capacity,
                    energy_recharge_rate: p.energy_recharge_rate,
                    firing_cost: p.firing_cost,
                })
                .collect(),
            edges: self
                .edges()
                .map(|(s, d, w)| EdgeSpec {
                    src: self.node_name(s).to_string(),
                    dst: self.node_name(d).to_string(),
                    weight: w,
                })
                .collect(),
            input_surface: self
                .input_surface
                .iter()
                .map(|&n| self.node_name(n).to_string())
                .collect(),
            output_surface: self
                .output_surface
                .iter()
                .map(|&n| self.node_name(n).to_string())
                .collect(),
        }
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        self.out_edges
            .iter()
            .map(|outs| outs.iter().map(|(d, _)| d.index()).collect())
            .collect()
    }
}

fn default_threshold() -> f64 {
    1.0
}
fn default_refractory() -> u32 {
    1
}
fn default_capacity() -> f64 {
    10.0
}
fn default_recharge() -> f64 {
    1.0
}
fn default_cost() -> f64 {
    1.0
}

/// One node of a [`NetworkSpec`]. Omitted numeric fields take the documented
/// defaults: threshold 1.0, refractory 1, energy_capacity 10.0,
/// energy_recharge_rate 1.0, firing_cost 1.0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: String,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_refractory")]
    pub refractory: u32,
    #[serde(default = "default_capacity")]
    pub energy_capacity: f64,
    #[serde(default = "default_recharge")]
    pub energy_recharge_rate: f64,
    #[serde(default = "default_cost")]
    pub firing_cost: f64,
}

impl NodeSpec {
    pub fn new(id: &str) -> NodeSpec {
        NodeSpec {
            id: id.to_string(),
            threshold: default_threshold(),
            refractory: default_refractory(),
            energy_capacity: default_capacity(),
            energy_recharge_rate: default_recharge(),
            firing_cost: default_cost(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub src: String,
    pub dst: String,
    /// Signed activation delivered one step after `src` fires; negative is
    /// inhibitory.
    pub weight: f64,
}

/// Declarative network description (the on-disk JSON schema).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub nodes: Vec<NodeSpec>,
    pub edges: Vec<EdgeSpec>,
    #[serde(default)]
    pub input_surface: Vec<String>,
    #[serde(default)]
    pub output_surface: Vec<String>,
}

/// Validate a spec and build the immutable network. Deterministic: node ids
/// follow spec order and edges are stored sorted.
pub fn build_network(spec: &NetworkSpec) -> Result<Network, NetworkError> {
    let mut name_to_id: HashMap<String, NodeId> = HashMap::new();
    let mut names = Vec::with_capacity(spec.nodes.len());
    let mut params = Vec::with_capacity(spec.nodes.len());

    for (i, node) in spec.nodes.iter().enumerate() {
        if name_to_id.contains_key(&node.id) {
            return Err(NetworkError::DuplicateNode(node.id.clone()));
        }
        for (value, param) in [
            (node.threshold, "threshold"),
            (node.energy_capacity, "energy_capacity"),
            (node.energy_recharge_rate, "energy_recharge_rate"),
            (node.firing_cost, "firing_cost"),
        ] {
            if !value.is_finite() {
                return Err(NetworkError::NonFiniteParam {
                    node: node.id.clone(),
                    param: param.to_string(),
                });
            }
        }
        name_to_id.insert(node.id.clone(), NodeId(i as u32));
        names.push(node.id.clone());
        params.push(NodeParams {
            threshold: node.threshold,
            refractory: node.refractory.max(1),
            energy_capacity: node.energy_capacity,
            energy_recharge_rate: node.energy_recharge_rate,
            firing_cost: node.firing_cost,
        });
    }

    let mut out_edges: Vec<Vec<(NodeId, f64)>> = vec![Vec::new(); names.len()];
    for edge in &spec.edges {
        let src = *name_to_id
            .get(&edge.src)
            .ok_or_else(|| NetworkError::UnknownNode {
                name: edge.src.clone(),
                referrer: format!("edge {} -> {}", edge.src, edge.dst),
            })?;
        let dst = *name_to_id
            .get(&edge.dst)
            .ok_or_else(|| NetworkError::UnknownNode {
                name: edge.dst.clone(),
                referrer: format!("edge {} -> {}", edge.src, edge.dst),
            })?;
        if src == dst {
            return Err(NetworkError::SelfEdge(edge.src.clone()));
        }
        if !edge.weight.is_finite() {
            return Err(NetworkError::NonFiniteWeight {
                src: edge.src.clone(),
                dst: edge.dst.clone(),
            });
        }
        out_edges[src.index()].push((dst, edge.weight));
    }
    for outs in &mut out_edges {
        outs.sort_by_key(|(d, _)| *d);
    }

    let resolve_surface = |surface: &[String], which: &str| -> Result<Vec<NodeId>, NetworkError> {
        surface
            .iter()
            .map(|name| {
                name_to_id
                    .get(name)
                    .copied()
                    .ok_or_else(|| NetworkError::UnknownNode {
                        name: name.clone(),
                        referrer: format!("{which} surface"),
                    })
            })
            .collect()
    };
    let input_surface = resolve_surface(&spec.input_surface, "input")?;
    let output_surface = resolve_surface(&spec.output_surface, "output")?;

    Ok(Network {
        names,
        params,
        out_edges,
        name_to_id,
        input_surface,
        output_surface,
    })
}

/// Every simple directed cycle of length `<= max_len`, canonicalized and
/// sorted by `(length, id)`. Empty for acyclic graphs.
pub fn enumerate_simple_cycles(net: &Network, max_len: usize) -> Vec<Loop> {
    assert!(max_len >= 2, "max_len must be at least 2");
    let index_cycles = graph::simple_cycles_bounded(&net.adjacency(), max_len);
    let mut loops: Vec<Loop> = index_cycles
        .iter()
        .map(|cycle| {
            let ids: Vec<NodeId> = cycle.iter().map(|&i| NodeId(i as u32)).collect();
            Loop::canonical(net, &ids)
        })
        .collect();
    loops.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.id().cmp(b.id())));
    loops
}

/// Disjoint strongly connected components plus the member->component map.
/// The condensation over it is acyclic by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SccPartition {
    pub components: Vec<BTreeSet<NodeId>>,
    pub component_of: BTreeMap<NodeId, usize>,
}

impl SccPartition {
    pub fn same_component(&self, a: NodeId, b: NodeId) -> bool {
        self.component_of[&a] == self.component_of[&b]
    }
}

pub fn strongly_connected_components(net: &Network) -> SccPartition {
    let comps = graph::tarjan_scc(&net.adjacency());
    let mut components = Vec::with_capacity(comps.len());
    let mut component_of = BTreeMap::new();
    for (ci, comp) in comps.iter().enumerate() {
        let set: BTreeSet<NodeId> = comp.iter().map(|&i| NodeId(i as u32)).collect();
        for &n in &set {
            component_of.insert(n, ci);
        }
        components.push(set);
    }
    SccPartition {
        components,
        component_of,
    }
}

/// The default bound on enumerated loop length. Cycle enumeration is
/// exponential in this bound, so it is an explicit experimental knob; all
/// shipped fixtures use loops of length <= 6.
pub const DEFAULT_MAX_LOOP_LEN: usize = 8;
