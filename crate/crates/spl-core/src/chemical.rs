//! Chemical SPL reaction networks: the physical-to-chemical mapping (track
//! levels become species, transitions become enzyme-assisted reactions),
//! exact stochastic simulation with an energy-gated uphill budget, and the
//! persistence / generator-set / split-regeneration analyses.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::tarjan_scc;
use crate::physical::{FeatureKind, TrackBlueprint};

/// Uphill rate constants scale as `exp(-activation_energy / RATE_SCALE)`.
pub const RATE_SCALE: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Species {
    pub id: String,
    pub energy_level: f64,
    pub initial_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Downhill,
    Uphill,
}

/// A transformation between species multisets, optionally gated by an
/// enzyme species (a presence check, never consumed). Uphill reactions
/// additionally draw `activation_energy` from the shared supply budget per
/// firing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reaction {
    pub reactants: Vec<(String, u32)>,
    pub products: Vec<(String, u32)>,
    #[serde(default)]
    pub enzyme: Option<String>,
    pub activation_energy: f64,
    pub direction: Direction,
    pub rate_constant: f64,
}

impl Reaction {
    pub fn is_uphill(&self) -> bool {
        self.direction == Direction::Uphill
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactionNetwork {
    pub species: Vec<Species>,
    pub reactions: Vec<Reaction>,
    /// External energy made available per unit time for uphill reactions.
    pub energy_supply: f64,
    /// Species replenished to their initial counts after every event.
    #[serde(default)]
    pub abundant_species: BTreeSet<String>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ChemicalError {
    #[error("cannot map blueprint: {0}")]
    Mapping(String),
    #[error("unknown species {species:?} referenced by {referrer}")]
    UnknownSpecies { species: String, referrer: String },
    #[error("horizon must be non-negative")]
    InvalidHorizon,
    #[error("chain network is not the loop minus its closing reaction: {0}")]
    ChainMismatch(String),
    #[error("split precondition violated: {0}")]
    SplitPrecondition(String),
}

impl ReactionNetwork {
    pub fn species_index(&self, id: &str) -> Option<usize> {
        self.species.iter().position(|s| s.id == id)
    }

    pub fn get_species(&self, id: &str) -> Option<&Species> {
        self.species.iter().find(|s| s.id == id)
    }

    pub fn validate(&self) -> Result<(), ChemicalError> {
        let ids: BTreeSet<&str> = self.species.iter().map(|s| s.id.as_str()).collect();
        for (ri, r) in self.reactions.iter().enumerate() {
            for (id, _) in r.reactants.iter().chain(r.products.iter()) {
                if !ids.contains(id.as_str()) {
                    return Err(ChemicalError::UnknownSpecies {
                        species: id.clone(),
                        referrer: format!("reaction {ri}"),
                    });
                }
            }
            if let Some(e) = &r.enzyme {
                if !ids.contains(e.as_str()) {
                    return Err(ChemicalError::UnknownSpecies {
                        species: e.clone(),
                        referrer: format!("reaction {ri} enzyme"),
                    });
                }
            }
        }
        for id in &self.abundant_species {
            if !ids.contains(id.as_str()) {
                return Err(ChemicalError::UnknownSpecies {
                    species: id.clone(),
                    referrer: "abundant set".into(),
                });
            }
        }
        Ok(())
    }

    /// Directed species graph: one reactant -> product edge per reaction
    /// pair, as index adjacency.
    pub fn species_graph(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.species.len()];
        for r in &self.reactions {
            for (from, _) in &r.reactants {
                for (to, _) in &r.products {
                    let fi = self.species_index(from).unwrap();
                    let ti = self.species_index(to).unwrap();
                    if fi != ti && !adj[fi].contains(&ti) {
                        adj[fi].push(ti);
                    }
                }
            }
        }
        for outs in &mut adj {
            outs.sort_unstable();
        }
        adj
    }
}

/// Map a cyclic track design to a reaction network: every feature boundary
/// becomes a species at that track level (junction boundaries shared),
/// every feature becomes a reaction between consecutive species — downhill
/// for valleys and storage loops, uphill for hills — each assisted by a
/// fresh enzyme species, with activation energy equal to the feature's
/// height or depth. Products of each reaction are the reactants of the
/// next, which is what shrinks the naive three-chemicals-per-reaction count
/// to one shared species chain plus enzymes. Balls are distributed evenly
/// over the species as the initial molecule counts.
pub fn map_physical_to_chemical(bp: &TrackBlueprint) -> Result<ReactionNetwork, ChemicalError> {
    bp.validate()
        .map_err(|e| ChemicalError::Mapping(e.to_string()))?;
    for (ci, cycle) in bp.cycles.iter().enumerate() {
        if cycle.len() < 2 {
            return Err(ChemicalError::Mapping(format!(
                "cycle {ci} has fewer than 2 features; the mapped loop needs at least 2 levels"
            )));
        }
    }

    // union-find over (cycle, boundary) with junction pairs identified
    let mut boundary_ids: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut next = 0usize;
    for (ci, cycle) in bp.cycles.iter().enumerate() {
        for b in 0..cycle.len() {
            boundary_ids.insert((ci, b), next);
            next += 1;
        }
    }
    let mut parent: Vec<usize> = (0..next).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    for j in &bp.junctions {
        let a = boundary_ids[&j.a];
        let b = boundary_ids[&j.b];
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
        }
    }

    // walk each cycle to assign levels; junction-anchored cycles inherit
    let mut level: BTreeMap<usize, f64> = BTreeMap::new();
    for (ci, cycle) in bp.cycles.iter().enumerate() {
        let k = cycle.len();
        let anchored: Option<(usize, f64)> = (0..k).find_map(|b| {
            let root = find(&mut parent, boundary_ids[&(ci, b)]);
            level.get(&root).map(|&lv| (b, lv))
        });
        let (start, start_level) = anchored.unwrap_or((0, 0.0));
        let mut lv = start_level;
        for off in 0..k {
            let b = (start + off) % k;
            let root = find(&mut parent, boundary_ids[&(ci, b)]);
            level.entry(root).or_insert(lv);
            let f = &cycle[b];
            lv += match f.kind {
                FeatureKind::Hill => f.magnitude,
                FeatureKind::Valley | FeatureKind::Loop => -f.magnitude,
            };
        }
    }
    let min_level = level.values().cloned().fold(f64::INFINITY, f64::min);
    for lv in level.values_mut() {
        *lv -= min_level;
    }

    // species named by descending level: M1 highest
    let mut classes: Vec<(usize, f64)> = level.iter().map(|(&r, &lv)| (r, lv)).collect();
    classes.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    let mut class_name: BTreeMap<usize, String> = BTreeMap::new();
    let mut species = Vec::new();
    for (i, (root, lv)) in classes.iter().enumerate() {
        let name = format!("M{}", i + 1);
        class_name.insert(*root, name.clone());
        species.push(Species {
            id: name,
            energy_level: *lv,
            initial_count: 0,
        });
    }

    // molecule counts: balls spread evenly over species
    let n_species = species.len() as u64;
    let per = bp.n_balls as u64 / n_species;
    let extra = bp.n_balls as u64 % n_species;
    for (i, sp) in species.iter_mut().enumerate() {
        sp.initial_count = per + u64::from((i as u64) < extra);
    }

    // one reaction per feature, with a fresh enzyme
    let mut reactions = Vec::new();
    let mut enzymes = Vec::new();
    for (ci, cycle) in bp.cycles.iter().enumerate() {
        let k = cycle.len();
        for b in 0..k {
            let from_root = find(&mut parent, boundary_ids[&(ci, b)]);
            let to_root = find(&mut parent, boundary_ids[&(ci, (b + 1) % k)]);
            let from = class_name[&from_root].clone();
            let to = class_name[&to_root].clone();
            if from == to {
                return Err(ChemicalError::Mapping(format!(
                    "feature {b} of cycle {ci} maps a species onto itself"
                )));
            }
            let from_num = &from[1..];
            let to_num = &to[1..];
            let enzyme = if species.len() < 10 {
                format!("E{from_num}{to_num}")
            } else {
                format!("E{from_num}_{to_num}")
            };
            let f = &cycle[b];
            let direction = match f.kind {
                FeatureKind::Hill => Direction::Uphill,
                FeatureKind::Valley | FeatureKind::Loop => Direction::Downhill,
            };
            let rate_constant = match direction {
                Direction::Downhill => 1.0,
                Direction::Uphill => (-f.magnitude / RATE_SCALE).exp(),
            };
            if !enzymes.contains(&enzyme) {
                enzymes.push(enzyme.clone());
            }
            reactions.push(Reaction {
                reactants: vec![(from, 1)],
                products: vec![(to, 1)],
                enzyme: Some(enzyme),
                activation_energy: f.magnitude,
                direction,
                rate_constant,
            });
        }
    }
    for e in enzymes {
        species.push(Species {
            id: e,
            energy_level: 0.0,
            initial_count: 1,
        });
    }

    let rnet = ReactionNetwork {
        species,
        reactions,
        energy_supply: 10.0,
        abundant_species: BTreeSet::new(),
    };
    rnet.validate()?;
    Ok(rnet)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimulationMethod {
    Stochastic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChemSimParams {
    pub horizon: f64,
    pub seed: u64,
    pub method: SimulationMethod,
}

/// Event-by-event record of a stochastic run: the state snapshot after each
/// reaction event, plus the cumulative uphill energy drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationTrace {
    pub species_names: Vec<String>,
    pub times: Vec<f64>,
    pub counts: Vec<Vec<u64>>,
    /// Reaction index fired at `times[i]` (no entry for the initial state).
    pub events: Vec<usize>,
    pub uphill_spent: Vec<f64>,
    pub final_time: f64,
    pub seed: u64,
}

impl ConcentrationTrace {
    pub fn final_counts(&self) -> &[u64] {
        self.counts.last().expect("trace always has initial state")
    }

    pub fn ever_positive(&self, species_idx: usize) -> bool {
        self.counts.iter().any(|row| row[species_idx] > 0)
    }
}

/// Exact stochastic simulation (direct method): exponential waiting times
/// from the total propensity and categorical reaction choice; a reaction's
/// propensity is its rate constant times the falling-factorial reactant
/// multiplicity, gated on enzyme presence, and uphill reactions are
/// additionally gated on the accumulated energy budget
/// `supply * t - spent >= activation`. Abundant species replenish after
/// every event.
pub fn simulate_reactions(
    rnet: &ReactionNetwork,
    sim: &ChemSimParams,
) -> Result<ConcentrationTrace, ChemicalError> {
    rnet.validate()?;
    if sim.horizon < 0.0 || !sim.horizon.is_finite() {
        return Err(ChemicalError::InvalidHorizon);
    }
    let n = rnet.species.len();
    let mut counts: Vec<u64> = rnet.species.iter().map(|s| s.initial_count).collect();
    let abundant_idx: Vec<(usize, u64)> = rnet
        .abundant_species
        .iter()
        .map(|id| {
            let i = rnet.species_index(id).unwrap();
            (i, rnet.species[i].initial_count)
        })
        .collect();

    struct Compiled {
        reactants: Vec<(usize, u32)>,
        products: Vec<(usize, u32)>,
        enzyme: Option<usize>,
        rate: f64,
        uphill: bool,
        activation: f64,
    }
    let compiled: Vec<Compiled> = rnet
        .reactions
        .iter()
        .map(|r| Compiled {
            reactants: r
                .reactants
                .iter()
                .map(|(id, s)| (rnet.species_index(id).unwrap(), *s))
                .collect(),
            products: r
                .products
                .iter()
                .map(|(id, s)| (rnet.species_index(id).unwrap(), *s))
                .collect(),
            enzyme: r.enzyme.as_ref().map(|e| rnet.species_index(e).unwrap()),
            rate: r.rate_constant,
            uphill: r.is_uphill(),
            activation: r.activation_energy,
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
    let mut t = 0.0f64;
    let mut spent = 0.0f64;

    let mut times = vec![0.0];
    let mut snapshots = vec![counts.clone()];
    let mut events = Vec::new();
    let mut uphill_spent = vec![0.0];

    let budget = |t: f64, spent: f64| rnet.energy_supply * t - spent;

    loop {
        let mut a0 = 0.0;
        let mut props = Vec::with_capacity(compiled.len());
        let mut next_gate = f64::INFINITY;
        for c in &compiled {
            let mut p = c.rate;
            for &(si, stoich) in &c.reactants {
                let mut mult = 1.0;
                for k in 0..stoich {
                    mult *= counts[si].saturating_sub(k as u64) as f64;
                }
                p *= mult;
            }
            if let Some(ei) = c.enzyme {
                if counts[ei] == 0 {
                    p = 0.0;
                }
            }
            if c.uphill && p > 0.0 && budget(t, spent) < c.activation {
                if rnet.energy_supply > 0.0 {
                    next_gate = next_gate.min((spent + c.activation) / rnet.energy_supply);
                }
                p = 0.0;
            }
            props.push(p);
            a0 += p;
        }

        if a0 <= 0.0 {
            if next_gate.is_finite() && next_gate < sim.horizon {
                t = next_gate;
                continue;
            }
            break;
        }

        let tau = exp_variate(&mut rng, a0);
        let t_next = t + tau;
        if t_next > sim.horizon.min(next_gate) {
            if next_gate < sim.horizon {
                // an uphill reaction becomes eligible before the sampled
                // event; advance and resample (memoryless)
                t = next_gate;
                continue;
            }
            break;
        }
        t = t_next;

        let mut pick = rng.gen::<f64>() * a0;
        let mut chosen = props.len() - 1;
        for (i, &p) in props.iter().enumerate() {
            if pick < p {
                chosen = i;
                break;
            }
            pick -= p;
        }

        let c = &compiled[chosen];
        for &(si, stoich) in &c.reactants {
            counts[si] -= stoich as u64;
        }
        for &(si, stoich) in &c.products {
            counts[si] += stoich as u64;
        }
        if c.uphill {
            spent += c.activation;
        }
        for &(si, level) in &abundant_idx {
            counts[si] = level;
        }
        debug_assert!(counts.iter().all(|&c| c < u64::MAX / 2));
        let _ = n;

        times.push(t);
        snapshots.push(counts.clone());
        events.push(chosen);
        uphill_spent.push(spent);
    }

    Ok(ConcentrationTrace {
        species_names: rnet.species.iter().map(|s| s.id.clone()).collect(),
        times,
        counts: snapshots,
        events,
        uphill_spent,
        final_time: sim.horizon,
        seed: sim.seed,
    })
}

fn exp_variate(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    -u.ln() / rate
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceReport {
    /// (seed, loop survived, chain survived) per replicate.
    pub per_seed: Vec<(u64, bool, bool)>,
    pub survival_loop: f64,
    pub survival_chain: f64,
}

/// Does every non-abundant species hold a positive count at the end of the
/// trace?
pub fn all_species_survive(rnet: &ReactionNetwork, trace: &ConcentrationTrace) -> bool {
    let finals = trace.final_counts();
    rnet.species
        .iter()
        .enumerate()
        .filter(|(_, s)| !rnet.abundant_species.contains(&s.id))
        .all(|(i, _)| finals[i] > 0)
}

/// Compare survival of the looped network against the chain obtained by
/// removing its closing uphill reaction, over `replicates` seeded runs.
pub fn persistence_experiment(
    loop_net: &ReactionNetwork,
    chain_net: &ReactionNetwork,
    sim: &ChemSimParams,
    replicates: usize,
) -> Result<PersistenceReport, ChemicalError> {
    if loop_net.species != chain_net.species {
        return Err(ChemicalError::ChainMismatch(
            "species lists differ".into(),
        ));
    }
    let missing: Vec<&Reaction> = loop_net
        .reactions
        .iter()
        .filter(|r| !chain_net.reactions.contains(r))
        .collect();
    let extra: Vec<&Reaction> = chain_net
        .reactions
        .iter()
        .filter(|r| !loop_net.reactions.contains(r))
        .collect();
    if !extra.is_empty() || missing.len() != 1 || !missing[0].is_uphill() {
        return Err(ChemicalError::ChainMismatch(format!(
            "expected exactly one removed uphill reaction, found {} removed / {} added",
            missing.len(),
            extra.len()
        )));
    }

    let mut per_seed = Vec::with_capacity(replicates);
    let mut loop_survivals = 0usize;
    let mut chain_survivals = 0usize;
    for i in 0..replicates {
        let seed = sim.seed + i as u64;
        let params = ChemSimParams { seed, ..sim.clone() };
        let loop_trace = simulate_reactions(loop_net, &params)?;
        let chain_trace = simulate_reactions(chain_net, &params)?;
        let ls = all_species_survive(loop_net, &loop_trace);
        let cs = all_species_survive(chain_net, &chain_trace);
        loop_survivals += ls as usize;
        chain_survivals += cs as usize;
        per_seed.push((seed, ls, cs));
    }
    let denom = replicates.max(1) as f64;
    Ok(PersistenceReport {
        per_seed,
        survival_loop: loop_survivals as f64 / denom,
        survival_chain: chain_survivals as f64 / denom,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorReport {
    /// Strongly connected components of the species graph that contain a
    /// cycle, as sorted species-name lists.
    pub cyclic_components: Vec<Vec<String>>,
    pub per_component_choices: Vec<usize>,
    /// Product of the cyclic component sizes.
    pub total_count: u64,
    /// Lexicographically first generator sets, up to a cap.
    pub sample_generators: Vec<Vec<String>>,
}

const GENERATOR_SAMPLE_CAP: usize = 16;

/// Generator choices: one species per cyclic strongly connected component
/// of the species graph.
pub fn generator_sets(rnet: &ReactionNetwork) -> Result<GeneratorReport, ChemicalError> {
    rnet.validate()?;
    let adj = rnet.species_graph();
    let comps = tarjan_scc(&adj);
    let mut cyclic: Vec<Vec<usize>> = Vec::new();
    for comp in comps {
        let has_cycle = comp.len() > 1
            || adj[comp[0]].contains(&comp[0]);
        if has_cycle {
            cyclic.push(comp);
        }
    }
    let cyclic_components: Vec<Vec<String>> = cyclic
        .iter()
        .map(|c| c.iter().map(|&i| rnet.species[i].id.clone()).collect())
        .collect();
    let per_component_choices: Vec<usize> = cyclic.iter().map(Vec::len).collect();
    let total_count: u64 = per_component_choices.iter().map(|&c| c as u64).product();

    let mut sample_generators = Vec::new();
    if !cyclic_components.is_empty() {
        let mut indices = vec![0usize; cyclic_components.len()];
        'outer: loop {
            let set: Vec<String> = cyclic_components
                .iter()
                .zip(&indices)
                .map(|(comp, &i)| comp[i].clone())
                .collect();
            sample_generators.push(set);
            if sample_generators.len() >= GENERATOR_SAMPLE_CAP {
                break;
            }
            // odometer increment
            for pos in (0..indices.len()).rev() {
                indices[pos] += 1;
                if indices[pos] < cyclic_components[pos].len() {
                    continue 'outer;
                }
                indices[pos] = 0;
            }
            break;
        }
    }

    Ok(GeneratorReport {
        cyclic_components,
        per_component_choices,
        total_count,
        sample_generators,
    })
}

/// Set-closure regeneration: starting from the present species plus enzymes
/// and abundant species, can every species of the network be produced by
/// repeatedly applying reactions whose reactants are all available? Energy
/// supply is assumed.
pub fn regenerates_from(rnet: &ReactionNetwork, present: &BTreeSet<String>) -> bool {
    let enzymes: BTreeSet<String> = rnet
        .reactions
        .iter()
        .filter_map(|r| r.enzyme.clone())
        .collect();
    let mut avail: BTreeSet<String> = present.clone();
    avail.extend(enzymes);
    avail.extend(rnet.abundant_species.iter().cloned());

    loop {
        let mut changed = false;
        for r in &rnet.reactions {
            if r.reactants.iter().all(|(id, _)| avail.contains(id)) {
                for (id, _) in &r.products {
                    if avail.insert(id.clone()) {
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    rnet.species.iter().all(|s| avail.contains(&s.id))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub part_a_regenerates: bool,
    pub part_b_regenerates: bool,
    /// Initial counts given to each half.
    pub counts_a: Vec<u64>,
    pub counts_b: Vec<u64>,
    /// Coverage prediction per half: every cyclic component holds at least
    /// one present species.
    pub coverage_a: bool,
    pub coverage_b: bool,
}

/// Randomly split the molecule counts into two halves (binomial per
/// species; enzymes and abundant species granted to both), simulate each
/// half, and report whether every original species reappears by the
/// horizon.
pub fn split_regeneration_test(
    rnet: &ReactionNetwork,
    sim: &ChemSimParams,
    seed: u64,
) -> Result<SplitReport, ChemicalError> {
    let report = generator_sets(rnet)?;
    for comp in &report.cyclic_components {
        if comp.len() < 2 {
            return Err(ChemicalError::SplitPrecondition(format!(
                "cyclic component {comp:?} has fewer than 2 species"
            )));
        }
    }
    let enzymes: BTreeSet<String> = rnet
        .reactions
        .iter()
        .filter_map(|r| r.enzyme.clone())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts_a = Vec::with_capacity(rnet.species.len());
    for s in &rnet.species {
        if enzymes.contains(&s.id) || rnet.abundant_species.contains(&s.id) {
            counts_a.push(s.initial_count);
            continue;
        }
        let mut a = 0u64;
        for _ in 0..s.initial_count {
            if rng.gen_bool(0.5) {
                a += 1;
            }
        }
        counts_a.push(a);
    }
    run_split(rnet, sim, &counts_a)
}

/// [`split_regeneration_test`] with an explicit half-A allocation; half B
/// receives the remainder (enzymes and abundant species go to both halves
/// in full).
pub fn run_split(
    rnet: &ReactionNetwork,
    sim: &ChemSimParams,
    counts_a: &[u64],
) -> Result<SplitReport, ChemicalError> {
    rnet.validate()?;
    if counts_a.len() != rnet.species.len() {
        return Err(ChemicalError::SplitPrecondition(
            "half-A allocation length mismatch".into(),
        ));
    }
    let enzymes: BTreeSet<String> = rnet
        .reactions
        .iter()
        .filter_map(|r| r.enzyme.clone())
        .collect();
    let shared = |id: &str| enzymes.contains(id) || rnet.abundant_species.contains(id);

    let mut counts_b = Vec::with_capacity(rnet.species.len());
    for (s, &a) in rnet.species.iter().zip(counts_a) {
        if shared(&s.id) {
            counts_b.push(s.initial_count);
        } else {
            if a > s.initial_count {
                return Err(ChemicalError::SplitPrecondition(format!(
                    "half A holds more {} than the network has",
                    s.id
                )));
            }
            counts_b.push(s.initial_count - a);
        }
    }

    let build_half = |counts: &[u64]| -> ReactionNetwork {
        let mut half = rnet.clone();
        for (sp, &c) in half.species.iter_mut().zip(counts) {
            sp.initial_count = c;
        }
        half
    };

    let half_a = build_half(counts_a);
    let half_b = build_half(&counts_b);
    let trace_a = simulate_reactions(&half_a, &ChemSimParams { seed: sim.seed + 1, ..sim.clone() })?;
    let trace_b = simulate_reactions(&half_b, &ChemSimParams { seed: sim.seed + 2, ..sim.clone() })?;

    let regenerated = |trace: &ConcentrationTrace| {
        rnet.species
            .iter()
            .enumerate()
            .all(|(i, _)| trace.ever_positive(i))
    };
    let report = generator_sets(rnet)?;
    let coverage = |counts: &[u64]| {
        report.cyclic_components.iter().all(|comp| {
            comp.iter().any(|id| {
                let i = rnet.species_index(id).unwrap();
                counts[i] > 0
            })
        })
    };

    Ok(SplitReport {
        part_a_regenerates: regenerated(&trace_a),
        part_b_regenerates: regenerated(&trace_b),
        coverage_a: coverage(counts_a),
        coverage_b: coverage(&counts_b),
        counts_a: counts_a.to_vec(),
        counts_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn three_level_mapping_matches_shared_species_arithmetic() {
        let rnet = map_physical_to_chemical(&fixtures::three_level_blueprint()).unwrap();
        let m: Vec<&str> = rnet
            .species
            .iter()
            .map(|s| s.id.as_str())
            .filter(|id| id.starts_with('M'))
            .collect();
        let e: Vec<&str> = rnet
            .species
            .iter()
            .map(|s| s.id.as_str())
            .filter(|id| id.starts_with('E'))
            .collect();
        assert_eq!(m, vec!["M1", "M2", "M3"]);
        assert_eq!(e, vec!["E12", "E23", "E31"]);
        // 3 reactions x 3 roles = 9 naive chemicals collapse to 6
        assert_eq!(rnet.species.len(), 6);
        let lv = |id: &str| rnet.get_species(id).unwrap().energy_level;
        assert!(lv("M1") > lv("M2") && lv("M2") > lv("M3"));
        let downhill = rnet.reactions.iter().filter(|r| !r.is_uphill()).count();
        let uphill = rnet.reactions.iter().filter(|r| r.is_uphill()).count();
        assert_eq!((downhill, uphill), (2, 1));
    }

    #[test]
    fn two_level_mapping() {
        let rnet = map_physical_to_chemical(&fixtures::two_level_blueprint()).unwrap();
        let m_count = rnet.species.iter().filter(|s| s.id.starts_with('M')).count();
        assert_eq!(m_count, 2);
        assert_eq!(rnet.reactions.len(), 2);
        assert_eq!(
            rnet.reactions.iter().filter(|r| r.is_uphill()).count(),
            1
        );
    }

    #[test]
    fn single_feature_cycle_cannot_map() {
        let bp = crate::physical::TrackBlueprint::single_cycle(
            vec![crate::physical::Feature::valley(1.0)],
            0.05,
            1,
        );
        assert!(matches!(
            map_physical_to_chemical(&bp),
            Err(ChemicalError::Mapping(_))
        ));
    }

    #[test]
    fn irreversible_conversion_exhausts_reactant() {
        let rnet = ReactionNetwork {
            species: vec![
                Species { id: "A".into(), energy_level: 1.0, initial_count: 100 },
                Species { id: "B".into(), energy_level: 0.0, initial_count: 0 },
            ],
            reactions: vec![Reaction {
                reactants: vec![("A".into(), 1)],
                products: vec![("B".into(), 1)],
                enzyme: None,
                activation_energy: 0.0,
                direction: Direction::Downhill,
                rate_constant: 1.0,
            }],
            energy_supply: 0.0,
            abundant_species: BTreeSet::new(),
        };
        let trace = simulate_reactions(
            &rnet,
            &ChemSimParams { horizon: 200.0, seed: 4, method: SimulationMethod::Stochastic },
        )
        .unwrap();
        // A monotonically non-increasing, B non-decreasing, ends exhausted
        for w in trace.counts.windows(2) {
            assert!(w[1][0] <= w[0][0]);
            assert!(w[1][1] >= w[0][1]);
        }
        assert_eq!(trace.final_counts(), &[0, 100]);
    }

    #[test]
    fn loop_with_supply_keeps_all_species_alive() {
        let rnet = fixtures::a4_loop_network();
        let trace =
            simulate_reactions(&rnet, &fixtures::chem_params(11)).unwrap();
        assert!(all_species_survive(&rnet, &trace));
    }

    #[test]
    fn uphill_energy_gating_invariant() {
        let rnet = fixtures::a4_loop_network();
        let trace = simulate_reactions(&rnet, &fixtures::chem_params(5)).unwrap();
        for (t, spent) in trace.times.iter().zip(&trace.uphill_spent) {
            assert!(
                *spent <= rnet.energy_supply * t + 1e-9,
                "budget violated: spent {spent} at t {t}"
            );
        }
    }

    #[test]
    fn generator_counts() {
        let rnet = fixtures::generators_3x4_network();
        let report = generator_sets(&rnet).unwrap();
        assert_eq!(report.per_component_choices, vec![4, 4, 4]);
        assert_eq!(report.total_count, 64);
        assert_eq!(report.sample_generators.len(), 16);

        let single = fixtures::a4_loop_network();
        let report = generator_sets(&single).unwrap();
        assert_eq!(report.total_count, 3);
    }

    #[test]
    fn split_halves_regenerate() {
        let rnet = fixtures::a4_loop_network();
        let report =
            split_regeneration_test(&rnet, &fixtures::chem_params(21), 77).unwrap();
        assert!(report.coverage_a && report.coverage_b);
        assert!(report.part_a_regenerates);
        assert!(report.part_b_regenerates);
    }

    #[test]
    fn adversarial_empty_half_fails() {
        let rnet = fixtures::a4_loop_network();
        // everything to half A
        let counts_a: Vec<u64> = rnet.species.iter().map(|s| s.initial_count).collect();
        let report = run_split(&rnet, &fixtures::chem_params(22), &counts_a).unwrap();
        assert!(report.part_a_regenerates);
        assert!(!report.coverage_b);
        assert!(!report.part_b_regenerates);
    }
}
