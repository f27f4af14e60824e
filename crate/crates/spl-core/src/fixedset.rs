//! Fixed sets: named sets of loops shared across a stimulus family.
//!
//! A direct fixed set is the quorum intersection of the loops triggered by
//! an average scenario and its variations. A meta fixed set is built from
//! already-registered fixed sets and keeps only loops that activate strictly
//! downstream of its parents. The registry holds both plus lateral
//! association links.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    loop_activation_events, run, triggered_loops, DynParams, DynamicsError, Stimulus,
};
use crate::network::{Loop, LoopId, Network};

/// Registry key for a fixed set. Ordering is lexicographic, which also fixes
/// classification tie-breaks.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FixedSetId(pub String);

impl FixedSetId {
    pub fn new(id: &str) -> FixedSetId {
        FixedSetId(id.to_string())
    }
}

impl std::fmt::Display for FixedSetId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FixedSetKind {
    Direct,
    Meta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedSet {
    pub id: FixedSetId,
    pub label: String,
    pub kind: FixedSetKind,
    #[serde(rename = "loops")]
    pub loop_ids: BTreeSet<LoopId>,
    #[serde(default)]
    pub parents: BTreeSet<FixedSetId>,
}

impl FixedSet {
    pub fn is_meta(&self) -> bool {
        self.kind == FixedSetKind::Meta
    }
}

/// An average scenario plus its variations. Each variation is a complete
/// stimulus, not a delta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusFamily {
    pub label: String,
    pub average: Stimulus,
    pub variations: Vec<Stimulus>,
}

impl StimulusFamily {
    /// Average first, then the variations: the runs a family induces.
    pub fn scenarios(&self) -> impl Iterator<Item = &Stimulus> {
        std::iter::once(&self.average).chain(self.variations.iter())
    }

    pub fn len(&self) -> usize {
        1 + self.variations.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FixedSetError {
    #[error("stimulus family {0:?} has no variations")]
    EmptyFamily(String),
    #[error("quorum must lie in (0, 1], got {0}")]
    InvalidQuorum(f64),
    #[error("fixed set {0} is not registered")]
    UnknownFixedSet(FixedSetId),
    #[error("fixed set {0} has an empty loop set")]
    EmptyParent(FixedSetId),
    #[error("no parent loop triggered in run {run} of family {family:?}")]
    ParentNotTriggered { family: String, run: usize },
    #[error("duplicate fixed set id {0}")]
    DuplicateId(FixedSetId),
    #[error("link endpoint {0} is not registered")]
    DanglingLink(FixedSetId),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Named fixed sets plus lateral association links between them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FixedSetRegistry {
    #[serde(rename = "fixed_sets", with = "entries_as_list")]
    pub entries: BTreeMap<FixedSetId, FixedSet>,
    #[serde(default)]
    pub links: Vec<LateralLink>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LateralLink {
    pub a: FixedSetId,
    pub b: FixedSetId,
    pub weight: f64,
}

/// Serialize the entry map as the JSON list the registry schema declares.
mod entries_as_list {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        entries: &BTreeMap<FixedSetId, FixedSet>,
        ser: S,
    ) -> Result<S::Ok, S::Error> {
        ser.collect_seq(entries.values())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        de: D,
    ) -> Result<BTreeMap<FixedSetId, FixedSet>, D::Error> {
        let list = Vec::<FixedSet>::deserialize(de)?;
        Ok(list.into_iter().map(|fs| (fs.id.clone(), fs)).collect())
    }
}

impl FixedSetRegistry {
    pub fn new() -> FixedSetRegistry {
        FixedSetRegistry::default()
    }

    pub fn get(&self, id: &FixedSetId) -> Option<&FixedSet> {
        self.entries.get(id)
    }

    pub fn register(&mut self, fs: FixedSet) -> Result<(), FixedSetError> {
        if self.entries.contains_key(&fs.id) {
            return Err(FixedSetError::DuplicateId(fs.id));
        }
        self.entries.insert(fs.id.clone(), fs);
        Ok(())
    }

    pub fn add_link(
        &mut self,
        a: &FixedSetId,
        b: &FixedSetId,
        weight: f64,
    ) -> Result<(), FixedSetError> {
        for id in [a, b] {
            if !self.entries.contains_key(id) {
                return Err(FixedSetError::DanglingLink(id.clone()));
            }
        }
        self.links.push(LateralLink {
            a: a.clone(),
            b: b.clone(),
            weight,
        });
        Ok(())
    }

    pub fn meta_sets(&self) -> impl Iterator<Item = &FixedSet> {
        self.entries.values().filter(|fs| fs.is_meta())
    }

    /// Union of the loop ids of the given sets.
    pub fn loops_of(&self, ids: &BTreeSet<FixedSetId>) -> BTreeSet<LoopId> {
        ids.iter()
            .filter_map(|id| self.entries.get(id))
            .flat_map(|fs| fs.loop_ids.iter().cloned())
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(text: &str) -> serde_json::Result<FixedSetRegistry> {
        serde_json::from_str(text)
    }
}

/// Horizon used for per-scenario extraction runs: long enough for every
/// enumerated loop to complete several traversals after stimulus onset.
fn extraction_horizon(family: &StimulusFamily, loops: &[Loop], params: &DynParams) -> usize {
    let slowest = loops.iter().map(Loop::len).max().unwrap_or(2);
    let last_offset = family
        .scenarios()
        .filter_map(Stimulus::offset)
        .max()
        .unwrap_or(0);
    last_offset + 1 + slowest * (params.min_traversals + 3) + params.window_for(slowest)
}

/// Loops triggered in at least `quorum` of the family's runs (average plus
/// each variation). `quorum == 1.0` is the strict intersection. `Ok(None)`
/// is the empty-result: no loop met the quorum (the infant case).
pub fn extract_fixed_set(
    net: &Network,
    family: &StimulusFamily,
    params: &DynParams,
    quorum: f64,
    loops: &[Loop],
) -> Result<Option<FixedSet>, FixedSetError> {
    if family.variations.is_empty() {
        return Err(FixedSetError::EmptyFamily(family.label.clone()));
    }
    if !(quorum > 0.0 && quorum <= 1.0) {
        return Err(FixedSetError::InvalidQuorum(quorum));
    }

    let horizon = extraction_horizon(family, loops, params);
    let runs = family.len();
    let mut counts: BTreeMap<LoopId, usize> = BTreeMap::new();
    for stimulus in family.scenarios() {
        let trace = run(net, std::slice::from_ref(stimulus), params, horizon)?;
        for id in triggered_loops(&trace, net, loops, params)? {
            *counts.entry(id).or_insert(0) += 1;
        }
    }

    let loop_ids: BTreeSet<LoopId> = counts
        .into_iter()
        .filter(|(_, c)| (*c as f64) / (runs as f64) >= quorum - 1e-12)
        .map(|(id, _)| id)
        .collect();

    if loop_ids.is_empty() {
        return Ok(None);
    }
    Ok(Some(FixedSet {
        id: FixedSetId::new(&family.label),
        label: family.label.clone(),
        kind: FixedSetKind::Direct,
        loop_ids,
        parents: BTreeSet::new(),
    }))
}

/// Build a meta fixed set from registered parents: in every run of the
/// family at least one parent loop must complete a traversal, and the
/// resulting loop set is the strict intersection of the loops that first
/// activate strictly after the earliest parent completion (the parents' own
/// loops excluded).
pub fn promote_meta_fixed_set(
    registry: &FixedSetRegistry,
    parent_ids: &BTreeSet<FixedSetId>,
    net: &Network,
    family: &StimulusFamily,
    params: &DynParams,
    loops: &[Loop],
    label: &str,
) -> Result<FixedSet, FixedSetError> {
    if family.variations.is_empty() {
        return Err(FixedSetError::EmptyFamily(family.label.clone()));
    }
    let mut parent_loops: BTreeSet<LoopId> = BTreeSet::new();
    for pid in parent_ids {
        let parent = registry
            .get(pid)
            .ok_or_else(|| FixedSetError::UnknownFixedSet(pid.clone()))?;
        if parent.loop_ids.is_empty() {
            return Err(FixedSetError::EmptyParent(pid.clone()));
        }
        parent_loops.extend(parent.loop_ids.iter().cloned());
    }

    let horizon = extraction_horizon(family, loops, params);
    let mut intersection: Option<BTreeSet<LoopId>> = None;

    for (run_idx, stimulus) in family.scenarios().enumerate() {
        let trace = run(net, std::slice::from_ref(stimulus), params, horizon)?;
        let events = loop_activation_events(&trace, net, loops, params)?;
        let parent_first = events
            .iter()
            .filter(|(id, completions)| parent_loops.contains(id) && !completions.is_empty())
            .map(|(_, completions)| completions[0])
            .min()
            .ok_or_else(|| FixedSetError::ParentNotTriggered {
                family: family.label.clone(),
                run: run_idx,
            })?;

        let triggered = triggered_loops(&trace, net, loops, params)?;
        let downstream: BTreeSet<LoopId> = triggered
            .into_iter()
            .filter(|id| !parent_loops.contains(id))
            .filter(|id| {
                events
                    .get(id)
                    .and_then(|c| c.first())
                    .is_some_and(|&first| first > parent_first)
            })
            .collect();

        intersection = Some(match intersection {
            None => downstream,
            Some(acc) => acc.intersection(&downstream).cloned().collect(),
        });
    }

    Ok(FixedSet {
        id: FixedSetId::new(label),
        label: label.to_string(),
        kind: FixedSetKind::Meta,
        loop_ids: intersection.unwrap_or_default(),
        parents: parent_ids.clone(),
    })
}

/// Rank every registered fixed set by the fraction of its loops triggered by
/// the stimulus, descending, ties broken by id order.
pub fn classify_stimulus(
    net: &Network,
    registry: &FixedSetRegistry,
    stimulus: &Stimulus,
    params: &DynParams,
    loops: &[Loop],
) -> Result<Vec<(FixedSetId, f64)>, FixedSetError> {
    let slowest = loops.iter().map(Loop::len).max().unwrap_or(2);
    let horizon = stimulus.offset().unwrap_or(0) + 1 + slowest * (params.min_traversals + 3);
    let trace = run(net, std::slice::from_ref(stimulus), params, horizon)?;
    let triggered = triggered_loops(&trace, net, loops, params)?;

    let mut ranked: Vec<(FixedSetId, f64)> = registry
        .entries
        .values()
        .map(|fs| {
            let hit = fs.loop_ids.intersection(&triggered).count();
            let overlap = if fs.loop_ids.is_empty() {
                0.0
            } else {
                hit as f64 / fs.loop_ids.len() as f64
            };
            (fs.id.clone(), overlap)
        })
        .collect();
    ranked.sort_by(|(ida, va), (idb, vb)| {
        vb.partial_cmp(va)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| ida.cmp(idb))
    });
    Ok(ranked)
}
