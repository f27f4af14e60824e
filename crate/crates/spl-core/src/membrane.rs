//! Detection of the self-sustaining threshold membrane: activation-rate
//! bands over registered fixed sets, the closed sensorimotor loop, and the
//! minimal-consciousness predicate built on top of them.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    annotate_loop_activations, run_with_routing, DynParams, DynamicsError, FeedbackRouting,
    Stimulus, Trace,
};
use crate::fixedset::{FixedSetId, FixedSetRegistry};
use crate::network::{enumerate_simple_cycles, Loop, LoopId, Network, DEFAULT_MAX_LOOP_LEN};

/// Activation-rate band, ordered from deep sleep to alert.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Delta,
    Theta,
    Alpha,
    Beta,
    Gamma,
}

/// Rate boundaries in fixed-set activations per rate window. The numeric
/// defaults mirror the EEG analogy (gamma strictly above 30); simulation
/// scenarios normally rescale them to their own activity levels.
///
/// Classification uses the lower bounds: a rate at or above a band's lower
/// bound but below the next band's falls in that band, and gamma requires
/// `rate > gamma_min` strictly. The upper bounds only validate ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandThresholds {
    pub delta_max: f64,
    pub theta_range: (f64, f64),
    pub alpha_range: (f64, f64),
    pub beta_range: (f64, f64),
    pub gamma_min: f64,
}

impl Default for BandThresholds {
    fn default() -> Self {
        BandThresholds {
            delta_max: 4.0,
            theta_range: (4.0, 7.0),
            alpha_range: (8.0, 12.0),
            beta_range: (12.0, 30.0),
            gamma_min: 30.0,
        }
    }
}

impl BandThresholds {
    /// Uniformly rescaled thresholds for scenarios whose activity lives on a
    /// different scale than the Hz analogy.
    pub fn scaled(factor: f64) -> BandThresholds {
        let d = BandThresholds::default();
        BandThresholds {
            delta_max: d.delta_max * factor,
            theta_range: (d.theta_range.0 * factor, d.theta_range.1 * factor),
            alpha_range: (d.alpha_range.0 * factor, d.alpha_range.1 * factor),
            beta_range: (d.beta_range.0 * factor, d.beta_range.1 * factor),
            gamma_min: d.gamma_min * factor,
        }
    }

    pub fn validate(&self) -> Result<(), MembraneError> {
        let seq = [
            self.delta_max,
            self.theta_range.0,
            self.theta_range.1,
            self.alpha_range.0,
            self.alpha_range.1,
            self.beta_range.0,
            self.beta_range.1,
            self.gamma_min,
        ];
        if seq.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(MembraneError::InvalidThresholds(
                "thresholds must be finite and non-negative".into(),
            ));
        }
        if seq.windows(2).any(|w| w[0] > w[1]) {
            return Err(MembraneError::InvalidThresholds(
                "bands must be ordered delta < theta < alpha < beta < gamma".into(),
            ));
        }
        Ok(())
    }
}

/// Every non-negative rate maps to exactly one band.
pub fn band_classify(rate: f64, thr: &BandThresholds) -> Band {
    if rate > thr.gamma_min {
        Band::Gamma
    } else if rate >= thr.beta_range.0 {
        Band::Beta
    } else if rate >= thr.alpha_range.0 {
        Band::Alpha
    } else if rate >= thr.theta_range.0 {
        Band::Theta
    } else {
        Band::Delta
    }
}

/// A detected self-sustaining membrane episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Membrane {
    /// Fixed sets active through the entire sustained run.
    pub active_sets: BTreeSet<FixedSetId>,
    /// Minimum per-window activation rate over the run.
    pub rate: f64,
    pub band: Band,
    /// Length of the qualifying run in steps.
    pub sustained_for: usize,
    pub closed_loop: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum MembraneError {
    #[error("invalid band thresholds: {0}")]
    InvalidThresholds(String),
    #[error("window must be >= 1")]
    InvalidWindow,
    #[error("registry loop {0} is not an enumerable cycle of the network")]
    RegistryClosure(LoopId),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Scenario-level membrane detection settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembraneConfig {
    pub thresholds: BandThresholds,
    /// Output-to-input feedback routing; without it the closed-loop
    /// condition is unsatisfiable by design.
    #[serde(default)]
    pub routing: Option<FeedbackRouting>,
    /// Rate window in steps.
    pub window: usize,
    /// Consecutive qualifying steps required. `None` uses 10x the slowest
    /// registered loop length.
    #[serde(default)]
    pub min_sustain: Option<usize>,
    pub horizon: usize,
}

impl MembraneConfig {
    fn effective_min_sustain(&self, registry: &FixedSetRegistry) -> usize {
        self.min_sustain.unwrap_or_else(|| {
            let slowest = registry
                .entries
                .values()
                .flat_map(|fs| fs.loop_ids.iter())
                .map(|l| l.node_names().len())
                .max()
                .unwrap_or(2);
            10 * slowest
        })
    }
}

/// Per-window activation rates: for each consecutive window, the number of
/// distinct registered fixed sets whose entire loop set completed at least
/// one traversal within it. Requires an annotated trace (see
/// [`annotate_loop_activations`]).
pub fn activation_rate(
    trace: &Trace,
    registry: &FixedSetRegistry,
    window: usize,
) -> Result<Vec<f64>, MembraneError> {
    if window == 0 {
        return Err(MembraneError::InvalidWindow);
    }
    let n_windows = trace.horizon / window;
    let mut rates = Vec::with_capacity(n_windows);
    for w in 0..n_windows {
        let lo = w * window;
        let hi = lo + window;
        let mut seen: BTreeSet<LoopId> = BTreeSet::new();
        for step in lo..hi {
            // an unannotated trace counts as having no activations
            for id in trace.loop_activations.get(step).map_or(&[][..], Vec::as_slice) {
                seen.insert(id.clone());
            }
        }
        let active = registry
            .entries
            .values()
            .filter(|fs| !fs.loop_ids.is_empty() && fs.loop_ids.iter().all(|l| seen.contains(l)))
            .count();
        rates.push(active as f64);
    }
    Ok(rates)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MembraneCondition {
    /// (a) gamma-band activation rate.
    Gamma,
    /// (b) output activity re-entering the input surface and re-triggering
    /// a registered fixed set.
    ClosedLoop,
    /// (c) at least one active meta fixed set.
    MetaActive,
    /// Each condition sustains on its own but never jointly.
    JointOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsciousnessVerdict {
    pub conscious: bool,
    pub membrane: Option<Membrane>,
    /// Conditions whose standalone longest run fell short of `min_sustain`
    /// (empty when a membrane exists).
    pub failed: Vec<MembraneCondition>,
}

struct StepConditions {
    gamma: Vec<bool>,
    closed: Vec<bool>,
    meta: Vec<bool>,
    rates: Vec<f64>,
    active_sets: Vec<BTreeSet<FixedSetId>>,
    /// First evaluated step (windows need a full trailing window).
    offset: usize,
}

fn registry_loops(
    net: &Network,
    registry: &FixedSetRegistry,
) -> Result<Vec<Loop>, MembraneError> {
    let wanted: BTreeSet<LoopId> = registry
        .entries
        .values()
        .flat_map(|fs| fs.loop_ids.iter().cloned())
        .collect();
    let max_len = wanted
        .iter()
        .map(|l| l.node_names().len())
        .max()
        .unwrap_or(2)
        .max(DEFAULT_MAX_LOOP_LEN);
    let all = enumerate_simple_cycles(net, max_len);
    let by_id: BTreeMap<&LoopId, &Loop> = all.iter().map(|l| (l.id(), l)).collect();
    wanted
        .iter()
        .map(|id| {
            by_id
                .get(id)
                .map(|&l| l.clone())
                .ok_or_else(|| MembraneError::RegistryClosure(id.clone()))
        })
        .collect()
}

fn evaluate_steps(
    trace: &Trace,
    registry: &FixedSetRegistry,
    thr: &BandThresholds,
    window: usize,
) -> StepConditions {
    let horizon = trace.horizon;
    let offset = window.saturating_sub(1);

    // last completion step per loop, as of each step
    let mut last_completion: BTreeMap<&LoopId, Vec<Option<usize>>> = BTreeMap::new();
    let mut registry_loop_ids: BTreeSet<&LoopId> = BTreeSet::new();
    for fs in registry.entries.values() {
        for id in &fs.loop_ids {
            registry_loop_ids.insert(id);
        }
    }
    let activations_at =
        |step: usize| trace.loop_activations.get(step).map_or(&[][..], Vec::as_slice);
    for &id in &registry_loop_ids {
        let mut running: Vec<Option<usize>> = Vec::with_capacity(horizon);
        let mut last = None;
        for step in 0..horizon {
            if activations_at(step).iter().any(|l| l == id) {
                last = Some(step);
            }
            running.push(last);
        }
        last_completion.insert(id, running);
    }

    // last routed-injection step and last registered-loop completion at or
    // after it, for the closed-loop condition
    let mut gamma = vec![false; horizon];
    let mut closed = vec![false; horizon];
    let mut meta = vec![false; horizon];
    let mut rates = vec![0.0; horizon];
    let mut active_sets = vec![BTreeSet::new(); horizon];

    for t in offset..horizon {
        let lo = t + 1 - window;
        let in_window = |step: Option<usize>| step.is_some_and(|s| s >= lo);

        let mut active: BTreeSet<FixedSetId> = BTreeSet::new();
        for fs in registry.entries.values() {
            if !fs.loop_ids.is_empty()
                && fs
                    .loop_ids
                    .iter()
                    .all(|l| in_window(last_completion[l][t]))
            {
                active.insert(fs.id.clone());
            }
        }
        let rate = active.len() as f64;
        gamma[t] = band_classify(rate, thr) == Band::Gamma;
        meta[t] = active
            .iter()
            .any(|id| registry.get(id).is_some_and(|fs| fs.is_meta()));
        rates[t] = rate;

        // (b): a routed injection at r within the window, followed (at >= r)
        // by a completion of some registered loop
        let mut closed_here = false;
        'outer: for r in lo..=t {
            if trace.routed.get(r).is_none_or(Vec::is_empty) {
                continue;
            }
            for s in r..=t {
                if activations_at(s).iter().any(|l| registry_loop_ids.contains(l)) {
                    closed_here = true;
                    break 'outer;
                }
            }
        }
        closed[t] = closed_here;
        active_sets[t] = active;
    }

    StepConditions {
        gamma,
        closed,
        meta,
        rates,
        active_sets,
        offset,
    }
}

fn longest_run(flags: &[bool], from: usize) -> usize {
    let mut best = 0;
    let mut cur = 0;
    for &f in &flags[from..] {
        if f {
            cur += 1;
            best = best.max(cur);
        } else {
            cur = 0;
        }
    }
    best
}

/// Run the drive through the network (with feedback routing, when
/// configured) and look for `min_sustain` consecutive steps on which the
/// rate is gamma-band, the sensorimotor loop is closed, and a meta fixed
/// set is active. Returns the membrane of the longest qualifying run.
pub fn detect_membrane(
    net: &Network,
    registry: &FixedSetRegistry,
    drive: &[Stimulus],
    params: &DynParams,
    cfg: &MembraneConfig,
) -> Result<Option<Membrane>, MembraneError> {
    cfg.thresholds.validate()?;
    if cfg.window == 0 {
        return Err(MembraneError::InvalidWindow);
    }
    let loops = registry_loops(net, registry)?;
    let mut trace = run_with_routing(net, drive, cfg.routing.as_ref(), params, cfg.horizon)?;
    annotate_loop_activations(&mut trace, net, &loops, params)?;
    detect_membrane_in_trace(&trace, registry, cfg)
}

/// [`detect_membrane`] over an already annotated trace.
pub fn detect_membrane_in_trace(
    trace: &Trace,
    registry: &FixedSetRegistry,
    cfg: &MembraneConfig,
) -> Result<Option<Membrane>, MembraneError> {
    let min_sustain = cfg.effective_min_sustain(registry);
    let conds = evaluate_steps(trace, registry, &cfg.thresholds, cfg.window);

    // longest joint run
    let mut best: Option<(usize, usize)> = None; // (start, len)
    let mut cur_start = None;
    for t in conds.offset..trace.horizon {
        let ok = conds.gamma[t] && conds.closed[t] && conds.meta[t];
        match (ok, cur_start) {
            (true, None) => cur_start = Some(t),
            (true, Some(_)) => {}
            (false, Some(start)) => {
                let len = t - start;
                if best.map_or(true, |(_, blen)| len > blen) {
                    best = Some((start, len));
                }
                cur_start = None;
            }
            (false, None) => {}
        }
    }
    if let Some(start) = cur_start {
        let len = trace.horizon - start;
        if best.map_or(true, |(_, blen)| len > blen) {
            best = Some((start, len));
        }
    }

    let Some((start, len)) = best.filter(|&(_, len)| len >= min_sustain) else {
        return Ok(None);
    };

    let run_range = start..start + len;
    let mut active: Option<BTreeSet<FixedSetId>> = None;
    let mut min_rate = f64::INFINITY;
    for t in run_range {
        min_rate = min_rate.min(conds.rates[t]);
        active = Some(match active {
            None => conds.active_sets[t].clone(),
            Some(acc) => acc
                .intersection(&conds.active_sets[t])
                .cloned()
                .collect(),
        });
    }

    Ok(Some(Membrane {
        active_sets: active.unwrap_or_default(),
        rate: min_rate,
        band: band_classify(min_rate, &cfg.thresholds),
        sustained_for: len,
        closed_loop: true,
    }))
}

/// True iff [`detect_membrane`] finds a membrane; otherwise the evidence
/// lists every condition whose standalone run fell short.
pub fn is_minimally_conscious(
    net: &Network,
    registry: &FixedSetRegistry,
    drive: &[Stimulus],
    params: &DynParams,
    cfg: &MembraneConfig,
) -> Result<ConsciousnessVerdict, MembraneError> {
    cfg.thresholds.validate()?;
    if cfg.window == 0 {
        return Err(MembraneError::InvalidWindow);
    }
    let loops = registry_loops(net, registry)?;
    let mut trace = run_with_routing(net, drive, cfg.routing.as_ref(), params, cfg.horizon)?;
    annotate_loop_activations(&mut trace, net, &loops, params)?;

    if let Some(membrane) = detect_membrane_in_trace(&trace, registry, cfg)? {
        return Ok(ConsciousnessVerdict {
            conscious: true,
            membrane: Some(membrane),
            failed: Vec::new(),
        });
    }

    let min_sustain = cfg.effective_min_sustain(registry);
    let conds = evaluate_steps(&trace, registry, &cfg.thresholds, cfg.window);
    let mut failed = Vec::new();
    if longest_run(&conds.gamma, conds.offset) < min_sustain {
        failed.push(MembraneCondition::Gamma);
    }
    if longest_run(&conds.closed, conds.offset) < min_sustain {
        failed.push(MembraneCondition::ClosedLoop);
    }
    if longest_run(&conds.meta, conds.offset) < min_sustain {
        failed.push(MembraneCondition::MetaActive);
    }
    if failed.is_empty() {
        failed.push(MembraneCondition::JointOnly);
    }
    Ok(ConsciousnessVerdict {
        conscious: false,
        membrane: None,
        failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_bands_match_boundaries() {
        let thr = BandThresholds::default();
        assert_eq!(band_classify(35.0, &thr), Band::Gamma);
        assert_eq!(band_classify(30.0, &thr), Band::Beta);
        assert_eq!(band_classify(12.0, &thr), Band::Beta);
        assert_eq!(band_classify(9.0, &thr), Band::Alpha);
        assert_eq!(band_classify(5.0, &thr), Band::Theta);
        assert_eq!(band_classify(7.5, &thr), Band::Theta);
        assert_eq!(band_classify(2.0, &thr), Band::Delta);
        assert_eq!(band_classify(0.0, &thr), Band::Delta);
    }

    #[test]
    fn misordered_thresholds_rejected() {
        let mut thr = BandThresholds::default();
        thr.alpha_range = (13.0, 14.0);
        assert!(thr.validate().is_err());
    }
}
