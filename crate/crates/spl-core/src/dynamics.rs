//! Discrete-time activation dynamics over a [`Network`]: leaky threshold
//! units with a refractory period and a per-node energy reservoir.
//!
//! A node fires at step `t` iff the decayed residual from `t-1` plus the
//! weighted input from nodes that fired at `t-1` plus any stimulus at `t`
//! reaches its threshold, the node is past its refractory gap, and its
//! energy covers the firing cost. Firing discharges the residual, spends
//! `firing_cost`, and energy recharges by `energy_recharge_rate` per step up
//! to capacity. Update is synchronous, so a run is a pure function of
//! `(network, stimuli, params, horizon)` and bit-identical across replays.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{enumerate_simple_cycles, Loop, LoopId, Network, NodeId, DEFAULT_MAX_LOOP_LEN};

/// External activation applied to input-surface nodes for
/// `[onset, onset + duration)` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stimulus {
    /// Node name -> activation units per step. All nodes must lie on the
    /// input surface.
    pub pattern: BTreeMap<String, f64>,
    #[serde(default)]
    pub onset: usize,
    pub duration: usize,
}

impl Stimulus {
    pub fn new(pattern: &[(&str, f64)], onset: usize, duration: usize) -> Stimulus {
        Stimulus {
            pattern: pattern
                .iter()
                .map(|(name, amount)| (name.to_string(), *amount))
                .collect(),
            onset,
            duration,
        }
    }

    /// Last step at which this stimulus is active (`None` for zero duration).
    pub fn offset(&self) -> Option<usize> {
        if self.duration == 0 {
            None
        } else {
            Some(self.onset + self.duration - 1)
        }
    }
}

/// Knobs of the dynamics engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynParams {
    /// Fraction of residual activation lost per step; 1.0 means only fresh
    /// inputs count.
    #[serde(default = "default_decay")]
    pub activation_decay: f64,
    /// A loop traversal must complete within this many steps to count.
    /// `None` uses 2x the loop length.
    #[serde(default)]
    pub trigger_window: Option<usize>,
    /// Complete cyclic traversals required before a loop counts as triggered.
    #[serde(default = "default_min_traversals")]
    pub min_traversals: usize,
    /// Steps simulated past the cutoff when measuring self-sustain time.
    /// `None` uses 10x the slowest enumerated loop length.
    #[serde(default)]
    pub sustain_horizon: Option<usize>,
    /// Probability per node per step of a spontaneous firing.
    #[serde(default)]
    pub noise_rate: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_decay() -> f64 {
    1.0
}
fn default_min_traversals() -> usize {
    2
}

impl Default for DynParams {
    fn default() -> Self {
        DynParams {
            activation_decay: default_decay(),
            trigger_window: None,
            min_traversals: default_min_traversals(),
            sustain_horizon: None,
            noise_rate: 0.0,
            seed: 0,
        }
    }
}

impl DynParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<(), DynamicsError> {
        if !(0.0..=1.0).contains(&self.activation_decay) {
            return Err(DynamicsError::InvalidParams(
                "activation_decay must lie in [0, 1]".into(),
            ));
        }
        if self.min_traversals < 2 {
            return Err(DynamicsError::InvalidParams(
                "min_traversals must be >= 2".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return Err(DynamicsError::InvalidParams(
                "noise_rate must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    pub fn window_for(&self, loop_len: usize) -> usize {
        self.trigger_window.unwrap_or(2 * loop_len)
    }
}

/// Scenario-declared sensorimotor feedback: when an output-surface node fires
/// at `t`, the routed input-surface node receives `weight` activation at
/// `t + 1`. This closes the sense/control loop without being part of the
/// network structure.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRouting {
    pub routes: Vec<Route>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub from: String,
    pub to: String,
    #[serde(default = "default_route_weight")]
    pub weight: f64,
}

fn default_route_weight() -> f64 {
    1.0
}

impl FeedbackRouting {
    pub fn new(routes: &[(&str, &str, f64)]) -> FeedbackRouting {
        FeedbackRouting {
            routes: routes
                .iter()
                .map(|(from, to, weight)| Route {
                    from: from.to_string(),
                    to: to.to_string(),
                    weight: *weight,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("invalid dynamics parameters: {0}")]
    InvalidParams(String),
    #[error("stimulus node {0:?} is not on the input surface")]
    StimulusOffSurface(String),
    #[error("unknown stimulus node {0:?}")]
    UnknownStimulusNode(String),
    #[error("routing endpoint {name:?} is not on the {surface} surface")]
    RoutingOffSurface { name: String, surface: String },
    #[error("trace refers to node index {0} outside the network")]
    TraceMismatch(usize),
    #[error("loop node {0:?} does not exist in the network")]
    LoopMismatch(String),
}

/// Time-indexed record of a run: which nodes fired at each step, which loop
/// traversals completed at each step (filled by [`annotate_loop_activations`]),
/// and which input nodes received routed feedback.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    /// Sorted node ids firing per step; `firings.len() == horizon`.
    pub firings: Vec<Vec<NodeId>>,
    /// Loop ids whose traversal completed at each step. Empty until annotated.
    pub loop_activations: Vec<Vec<LoopId>>,
    /// Input nodes that received a routed feedback injection per step.
    pub routed: Vec<Vec<NodeId>>,
    pub horizon: usize,
    pub seed: u64,
}

impl Trace {
    pub fn fired(&self, step: usize, node: NodeId) -> bool {
        self.firings[step].binary_search(&node).is_ok()
    }

    pub fn firing_times(&self, node: NodeId) -> Vec<usize> {
        (0..self.horizon)
            .filter(|&t| self.fired(t, node))
            .collect()
    }

    pub fn total_firings(&self, node: NodeId) -> usize {
        self.firings
            .iter()
            .filter(|step| step.binary_search(&node).is_ok())
            .count()
    }

    pub fn is_quiescent(&self) -> bool {
        self.firings.iter().all(Vec::is_empty)
    }
}

/// Simulate `horizon` steps. See the module docs for the firing rule.
pub fn run(
    net: &Network,
    stimuli: &[Stimulus],
    params: &DynParams,
    horizon: usize,
) -> Result<Trace, DynamicsError> {
    run_with_routing(net, stimuli, None, params, horizon)
}

/// [`run`] plus optional sensorimotor feedback routing.
pub fn run_with_routing(
    net: &Network,
    stimuli: &[Stimulus],
    routing: Option<&FeedbackRouting>,
    params: &DynParams,
    horizon: usize,
) -> Result<Trace, DynamicsError> {
    params.validate()?;
    let resolved_stimuli = resolve_stimuli(net, stimuli)?;
    let routes = resolve_routing(net, routing)?;

    let n = net.node_count();
    let mut potential = vec![0.0f64; n];
    let mut energy: Vec<f64> = net
        .node_ids()
        .map(|id| net.node_params(id).energy_capacity)
        .collect();
    let mut next_allowed = vec![0usize; n];
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut firings: Vec<Vec<NodeId>> = Vec::with_capacity(horizon);
    let mut routed_log: Vec<Vec<NodeId>> = Vec::with_capacity(horizon);
    let mut prev_fired: Vec<NodeId> = Vec::new();

    for t in 0..horizon {
        // recharge, then decay residuals
        for i in 0..n {
            let p = net.node_params(NodeId(i as u32));
            energy[i] = (energy[i] + p.energy_recharge_rate).min(p.energy_capacity);
            potential[i] *= 1.0 - params.activation_decay;
        }

        // synaptic input from the previous step
        for &src in &prev_fired {
            for &(dst, w) in net.out_edges(src) {
                potential[dst.index()] += w;
            }
        }

        // routed feedback from output-surface firings at t-1
        let mut routed_now = Vec::new();
        for &(from, to, w) in &routes {
            if prev_fired.binary_search(&from).is_ok() {
                potential[to.index()] += w;
                routed_now.push(to);
            }
        }
        routed_now.sort_unstable();
        routed_now.dedup();

        // external stimulus at t
        for (node, onset, duration, amount) in &resolved_stimuli {
            if t >= *onset && t < onset + duration {
                potential[node.index()] += amount;
            }
        }

        // synchronous firing decision
        let mut fired = Vec::new();
        for i in 0..n {
            let id = NodeId(i as u32);
            let p = net.node_params(id);
            let spontaneous = params.noise_rate > 0.0 && rng.gen::<f64>() < params.noise_rate;
            if t >= next_allowed[i]
                && energy[i] >= p.firing_cost
                && (potential[i] >= p.threshold || spontaneous)
            {
                fired.push(id);
                energy[i] -= p.firing_cost;
                next_allowed[i] = t + p.refractory as usize;
                potential[i] = 0.0;
            }
        }

        firings.push(fired.clone());
        routed_log.push(routed_now);
        prev_fired = fired;
    }

    Ok(Trace {
        firings,
        loop_activations: Vec::new(),
        routed: routed_log,
        horizon,
        seed: params.seed,
    })
}

type ResolvedStimulus = (NodeId, usize, usize, f64);

fn resolve_stimuli(
    net: &Network,
    stimuli: &[Stimulus],
) -> Result<Vec<ResolvedStimulus>, DynamicsError> {
    let surface: BTreeSet<NodeId> = net.input_surface().iter().copied().collect();
    let mut resolved = Vec::new();
    for s in stimuli {
        for (name, &amount) in &s.pattern {
            let id = net
                .node_id(name)
                .ok_or_else(|| DynamicsError::UnknownStimulusNode(name.clone()))?;
            if !surface.contains(&id) {
                return Err(DynamicsError::StimulusOffSurface(name.clone()));
            }
            resolved.push((id, s.onset, s.duration, amount));
        }
    }
    Ok(resolved)
}

fn resolve_routing(
    net: &Network,
    routing: Option<&FeedbackRouting>,
) -> Result<Vec<(NodeId, NodeId, f64)>, DynamicsError> {
    let Some(routing) = routing else {
        return Ok(Vec::new());
    };
    let outputs: BTreeSet<NodeId> = net.output_surface().iter().copied().collect();
    let inputs: BTreeSet<NodeId> = net.input_surface().iter().copied().collect();
    routing
        .routes
        .iter()
        .map(|r| {
            let from = net
                .node_id(&r.from)
                .filter(|id| outputs.contains(id))
                .ok_or_else(|| DynamicsError::RoutingOffSurface {
                    name: r.from.clone(),
                    surface: "output".into(),
                })?;
            let to = net
                .node_id(&r.to)
                .filter(|id| inputs.contains(id))
                .ok_or_else(|| DynamicsError::RoutingOffSurface {
                    name: r.to.clone(),
                    surface: "input".into(),
                })?;
            Ok((from, to, r.weight))
        })
        .collect()
}

/// Steps at which each loop completed a counted cyclic traversal.
///
/// A traversal of loop `(n_0 .. n_{k-1})` anchored at a firing of `n_0` at
/// step `s` follows the earliest-completion chain: each subsequent loop
/// node's first firing strictly after the previous one, closing at the
/// first `n_0` firing after `n_{k-1}`. The traversal counts iff its span
/// `close - s` is at most the trigger window. Counted traversals are the
/// maximum set of non-overlapping valid traversals (a closing firing may
/// anchor the next), which an earliest-end walk realizes because the
/// completion chain is monotone in its anchor. Enlarging the window only
/// enlarges the valid set, so the count is monotone in the window.
pub fn loop_activation_events(
    trace: &Trace,
    net: &Network,
    loops: &[Loop],
    params: &DynParams,
) -> Result<BTreeMap<LoopId, Vec<usize>>, DynamicsError> {
    for lp in loops {
        for &node in lp.nodes() {
            if node.index() >= net.node_count() {
                return Err(DynamicsError::LoopMismatch(format!("{:?}", node)));
            }
        }
    }
    let mut events: BTreeMap<LoopId, Vec<usize>> = BTreeMap::new();
    for lp in loops {
        let k = lp.len();
        let window = params.window_for(k);
        let nodes = lp.nodes();
        let times: Vec<Vec<usize>> = nodes
            .iter()
            .map(|&n| trace.firing_times(n))
            .collect();

        // earliest completion of a traversal anchored at time s
        let earliest_close = |s: usize| -> Option<usize> {
            let mut t = s;
            for i in 1..=k {
                let node_times = &times[i % k];
                let pos = node_times.partition_point(|&ft| ft <= t);
                t = *node_times.get(pos)?;
            }
            Some(t)
        };

        let mut completions = Vec::new();
        let mut cursor = 0usize;
        for &s in &times[0] {
            if s < cursor {
                continue;
            }
            if let Some(close) = earliest_close(s) {
                if close - s <= window {
                    completions.push(close);
                    cursor = close;
                }
            }
        }
        events.insert(lp.id().clone(), completions);
    }
    Ok(events)
}

/// Fill `trace.loop_activations` with per-step traversal completions.
pub fn annotate_loop_activations(
    trace: &mut Trace,
    net: &Network,
    loops: &[Loop],
    params: &DynParams,
) -> Result<(), DynamicsError> {
    let events = loop_activation_events(trace, net, loops, params)?;
    let mut per_step: Vec<Vec<LoopId>> = vec![Vec::new(); trace.horizon];
    for (id, steps) in &events {
        for &t in steps {
            per_step[t].push(id.clone());
        }
    }
    trace.loop_activations = per_step;
    Ok(())
}

/// Loops whose nodes fired in cyclic order at least `min_traversals` times,
/// each traversal completing within the trigger window.
pub fn triggered_loops(
    trace: &Trace,
    net: &Network,
    loops: &[Loop],
    params: &DynParams,
) -> Result<BTreeSet<LoopId>, DynamicsError> {
    let events = loop_activation_events(trace, net, loops, params)?;
    Ok(events
        .into_iter()
        .filter(|(_, completions)| completions.len() >= params.min_traversals)
        .map(|(id, _)| id)
        .collect())
}

/// Steps after `cutoff` during which some triggered loop still completes
/// traversals: the last post-cutoff completion time (over loops that reach
/// `min_traversals` in the whole trace) minus the cutoff; 0 when activity
/// dies immediately.
///
/// All stimuli are forced to zero after the cutoff, and the run extends
/// `sustain_horizon` steps past it (default: 10x the slowest loop length).
pub fn self_sustain_time(
    net: &Network,
    stimuli: &[Stimulus],
    cutoff: usize,
    params: &DynParams,
) -> Result<usize, DynamicsError> {
    let loops = enumerate_simple_cycles(net, DEFAULT_MAX_LOOP_LEN);
    self_sustain_time_with_loops(net, stimuli, cutoff, params, &loops)
}

/// [`self_sustain_time`] with a pre-enumerated loop set.
pub fn self_sustain_time_with_loops(
    net: &Network,
    stimuli: &[Stimulus],
    cutoff: usize,
    params: &DynParams,
    loops: &[Loop],
) -> Result<usize, DynamicsError> {
    if loops.is_empty() {
        return Ok(0);
    }
    let slowest = loops.iter().map(Loop::len).max().unwrap_or(2);
    let post = params.sustain_horizon.unwrap_or(10 * slowest);
    let horizon = cutoff + 1 + post;

    let clamped: Vec<Stimulus> = stimuli
        .iter()
        .map(|s| {
            let mut c = s.clone();
            if c.onset > cutoff {
                c.duration = 0;
            } else {
                c.duration = c.duration.min(cutoff - c.onset + 1);
            }
            c
        })
        .collect();

    let trace = run(net, &clamped, params, horizon)?;
    let events = loop_activation_events(&trace, net, loops, params)?;
    let mut sustain = 0usize;
    for completions in events.values() {
        if completions.len() < params.min_traversals {
            continue;
        }
        if let Some(&last) = completions.iter().filter(|&&t| t > cutoff).last() {
            sustain = sustain.max(last - cutoff);
        }
    }
    Ok(sustain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_network, EdgeSpec, NetworkSpec, NodeSpec};

    fn triangle(threshold: f64, weight: f64) -> Network {
        let mut nodes: Vec<NodeSpec> = ["A", "B", "C"]
            .iter()
            .map(|name| {
                let mut n = NodeSpec::new(name);
                n.threshold = threshold;
                n.energy_capacity = 100.0;
                n.energy_recharge_rate = 2.0;
                n
            })
            .collect();
        nodes[0].refractory = 1;
        let spec = NetworkSpec {
            nodes,
            edges: vec![
                EdgeSpec { src: "A".into(), dst: "B".into(), weight },
                EdgeSpec { src: "B".into(), dst: "C".into(), weight },
                EdgeSpec { src: "C".into(), dst: "A".into(), weight },
            ],
            input_surface: vec!["A".into()],
            output_surface: vec![],
        };
        build_network(&spec).unwrap()
    }

    #[test]
    fn single_loop_propagation() {
        let net = triangle(1.0, 1.0);
        let stim = Stimulus::new(&[("A", 1.0)], 0, 1);
        let trace = run(&net, &[stim], &DynParams::default(), 10).unwrap();
        let a = net.node_id("A").unwrap();
        let b = net.node_id("B").unwrap();
        let c = net.node_id("C").unwrap();
        assert_eq!(trace.firing_times(a), vec![0, 3, 6, 9]);
        assert_eq!(trace.firing_times(b), vec![1, 4, 7]);
        assert_eq!(trace.firing_times(c), vec![2, 5, 8]);
    }

    #[test]
    fn quiescent_without_stimulus() {
        let net = triangle(1.0, 1.0);
        let trace = run(&net, &[], &DynParams::default(), 20).unwrap();
        assert!(trace.is_quiescent());
    }

    #[test]
    fn stimulus_off_surface_is_contract_error() {
        let net = triangle(1.0, 1.0);
        let stim = Stimulus::new(&[("B", 1.0)], 0, 1);
        assert_eq!(
            run(&net, &[stim], &DynParams::default(), 5).unwrap_err(),
            DynamicsError::StimulusOffSurface("B".into())
        );
    }

    #[test]
    fn triangle_loop_triggers() {
        let net = triangle(1.0, 1.0);
        let loops = enumerate_simple_cycles(&net, 3);
        let stim = Stimulus::new(&[("A", 1.0)], 0, 1);
        let params = DynParams::default();
        let trace = run(&net, &[stim], &params, 12).unwrap();
        let triggered = triggered_loops(&trace, &net, &loops, &params).unwrap();
        assert_eq!(triggered.len(), 1);
        assert!(triggered.contains(&LoopId("A->B->C".into())));
    }

    #[test]
    fn loop_with_silent_node_never_triggers() {
        // B's threshold is unreachable, so the cycle cannot traverse.
        let mut nodes = vec![NodeSpec::new("A"), NodeSpec::new("B"), NodeSpec::new("C")];
        nodes[1].threshold = 50.0;
        let spec = NetworkSpec {
            nodes,
            edges: vec![
                EdgeSpec { src: "A".into(), dst: "B".into(), weight: 1.0 },
                EdgeSpec { src: "B".into(), dst: "C".into(), weight: 1.0 },
                EdgeSpec { src: "C".into(), dst: "A".into(), weight: 1.0 },
            ],
            input_surface: vec!["A".into()],
            output_surface: vec![],
        };
        let net = build_network(&spec).unwrap();
        let loops = enumerate_simple_cycles(&net, 3);
        let params = DynParams::default();
        let stim = Stimulus::new(&[("A", 1.0)], 0, 3);
        let trace = run(&net, &[stim], &params, 20).unwrap();
        assert!(triggered_loops(&trace, &net, &loops, &params)
            .unwrap()
            .is_empty());
        let b = net.node_id("B").unwrap();
        assert_eq!(trace.total_firings(b), 0);
    }

    #[test]
    fn identical_seeds_reproduce_traces() {
        let net = triangle(1.0, 1.0);
        let params = DynParams {
            noise_rate: 0.05,
            seed: 99,
            ..DynParams::default()
        };
        let stim = Stimulus::new(&[("A", 1.0)], 0, 2);
        let t1 = run(&net, std::slice::from_ref(&stim), &params, 60).unwrap();
        let t2 = run(&net, std::slice::from_ref(&stim), &params, 60).unwrap();
        assert_eq!(t1, t2);
    }

    #[test]
    fn no_edges_never_sustains() {
        let spec = NetworkSpec {
            nodes: vec![NodeSpec::new("A"), NodeSpec::new("B")],
            edges: vec![],
            input_surface: vec!["A".into()],
            output_surface: vec![],
        };
        let net = build_network(&spec).unwrap();
        let stim = Stimulus::new(&[("A", 1.0)], 0, 1);
        let sustain = self_sustain_time(&net, &[stim], 0, &DynParams::default()).unwrap();
        assert_eq!(sustain, 0);
    }

    #[test]
    fn energy_depletion_stops_firing() {
        // cost 1, recharge 0.25, capacity 4: a node firing every step stops
        // after the reservoir drains.
        let mut node = NodeSpec::new("A");
        node.energy_capacity = 4.0;
        node.energy_recharge_rate = 0.25;
        let mut b = NodeSpec::new("B");
        b.energy_capacity = 100.0;
        b.energy_recharge_rate = 2.0;
        let spec = NetworkSpec {
            nodes: vec![node, b],
            edges: vec![
                EdgeSpec { src: "A".into(), dst: "B".into(), weight: 1.0 },
                EdgeSpec { src: "B".into(), dst: "A".into(), weight: 1.0 },
            ],
            input_surface: vec!["A".into()],
            output_surface: vec![],
        };
        let net = build_network(&spec).unwrap();
        let stim = Stimulus::new(&[("A", 1.0)], 0, 1);
        let trace = run(&net, &[stim], &DynParams::default(), 200).unwrap();
        let a = net.node_id("A").unwrap();
        let firings = trace.total_firings(a) as f64;
        // energy bound: firings * cost <= capacity + recharge * horizon
        assert!(firings * 1.0 <= 4.0 + 0.25 * 200.0 + 1e-9);
        assert!(firings > 0.0);
    }
}
