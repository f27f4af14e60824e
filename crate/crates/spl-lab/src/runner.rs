//! Experiment orchestration: dispatch a validated scenario to the module
//! operations, derive replicate seeds as `seed + index`, and assemble the
//! metrics report in replicate order regardless of scheduling.

use std::collections::BTreeSet;

use rayon::prelude::*;
use thiserror::Error;

use spl_core::chemical::{
    all_species_survive, persistence_experiment, simulate_reactions, split_regeneration_test,
};
use spl_core::claim3::claim3_experiment;
use spl_core::continuity::{build_prediction_graph, is_abstractly_continuous, TokenSeq};
use spl_core::dynamics::{run, triggered_loops};
use spl_core::fixedset::{extract_fixed_set, promote_meta_fixed_set, FixedSetId};
use spl_core::growth::{associate_lateral, extend_longitudinal};
use spl_core::membrane::is_minimally_conscious;
use spl_core::network::enumerate_simple_cycles;
use spl_core::physical::{simulate_track, spl_test};

use crate::report::{iqr_of, median_of, MetricsReport};
use crate::scenario::{
    chem_params_with_seed, resolve_blueprint, resolve_corpus, resolve_network, resolve_reactions,
    resolve_registry, GrowthOp, LoadedScenario, Payload, ScenarioError,
};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("replicate {replicate}: {message}")]
    Module { replicate: usize, message: String },
}

fn module_err<E: std::fmt::Display>(replicate: usize) -> impl Fn(E) -> RunError {
    move |e| RunError::Module {
        replicate,
        message: e.to_string(),
    }
}

/// Run a loaded scenario to a metrics report. Deterministic for a fixed
/// scenario: replicates may execute concurrently but the report is reduced
/// in replicate order.
pub fn run_experiment(loaded: &LoadedScenario) -> Result<MetricsReport, RunError> {
    let s = &loaded.scenario;
    let mut report = MetricsReport::new(&s.id, s.payload.kind_name(), s.seed, s.replicates);
    if s.replicates == 0 {
        report.pass = None;
        return Ok(report);
    }

    match &s.payload {
        Payload::Dynamics {
            network,
            stimuli,
            params,
            horizon,
            max_loop_len,
        } => {
            let net = resolve_network(network, &loaded.base_dir)?;
            let loops = enumerate_simple_cycles(&net, *max_loop_len);
            report.columns = vec!["replicate".into(), "seed".into(), "loop".into(), "triggered".into()];
            let mut triggered_total = 0usize;
            for replicate in 0..s.replicates {
                let seed = s.seed + replicate as u64;
                let p = params.clone().with_seed(seed);
                let trace = run(&net, stimuli, &p, *horizon).map_err(module_err(replicate))?;
                let triggered =
                    triggered_loops(&trace, &net, &loops, &p).map_err(module_err(replicate))?;
                for lp in &loops {
                    let hit = triggered.contains(lp.id());
                    triggered_total += hit as usize;
                    report.push_row(vec![
                        replicate.into(),
                        seed.into(),
                        lp.id().0.as_str().into(),
                        hit.into(),
                    ]);
                }
            }
            report.summary.insert("loops_enumerated".into(), loops.len() as f64);
            report.summary.insert(
                "triggered_per_replicate".into(),
                triggered_total as f64 / s.replicates as f64,
            );
        }

        Payload::Fixedset {
            network,
            families,
            params,
            quorum,
            max_loop_len,
            promote,
        } => {
            let net = resolve_network(network, &loaded.base_dir)?;
            let loops = enumerate_simple_cycles(&net, *max_loop_len);
            report.columns = vec![
                "family".into(),
                "mode".into(),
                "loop_count".into(),
                "loops".into(),
            ];
            let mut extracted = Vec::new();
            for family in families {
                let fs = extract_fixed_set(&net, family, params, *quorum, &loops)
                    .map_err(module_err(0))?;
                let loops_list = fs
                    .as_ref()
                    .map(|f| {
                        f.loop_ids
                            .iter()
                            .map(|l| l.0.clone())
                            .collect::<Vec<_>>()
                            .join(";")
                    })
                    .unwrap_or_default();
                let count = fs.as_ref().map_or(0, |f| f.loop_ids.len());
                report.push_row(vec![
                    family.label.as_str().into(),
                    "direct".into(),
                    count.into(),
                    loops_list.into(),
                ]);
                extracted.push((family.label.clone(), fs));
            }
            if let Some(block) = promote {
                let registry = resolve_registry(&block.registry, &loaded.base_dir)?;
                let parents: BTreeSet<FixedSetId> =
                    block.parents.iter().map(|p| FixedSetId::new(p)).collect();
                let mut metas = Vec::new();
                for family in families {
                    let meta = promote_meta_fixed_set(
                        &registry,
                        &parents,
                        &net,
                        family,
                        params,
                        &loops,
                        &format!("{}-meta", family.label),
                    )
                    .map_err(module_err(0))?;
                    report.push_row(vec![
                        family.label.as_str().into(),
                        "meta".into(),
                        meta.loop_ids.len().into(),
                        meta.loop_ids
                            .iter()
                            .map(|l| l.0.clone())
                            .collect::<Vec<_>>()
                            .join(";")
                            .into(),
                    ]);
                    metas.push(meta);
                }
                if metas.len() >= 2 {
                    let overlap = metas[0]
                        .loop_ids
                        .intersection(&metas[1].loop_ids)
                        .count();
                    report.summary.insert("meta_overlap".into(), overlap as f64);
                }
                report.summary.insert(
                    "meta_loop_count".into(),
                    metas.iter().map(|m| m.loop_ids.len()).sum::<usize>() as f64,
                );
            }
            let direct_total: usize = extracted
                .iter()
                .map(|(_, fs)| fs.as_ref().map_or(0, |f| f.loop_ids.len()))
                .sum();
            report.summary.insert("direct_loop_count".into(), direct_total as f64);
            report.summary.insert("families".into(), families.len() as f64);
        }

        Payload::Growth { network, registry, ops } => {
            let mut net = resolve_network(network, &loaded.base_dir)?;
            let mut reg = resolve_registry(registry, &loaded.base_dir)?;
            report.columns = vec![
                "step".into(),
                "op".into(),
                "nodes".into(),
                "edges".into(),
                "registry_entries".into(),
            ];
            for (step, op) in ops.iter().enumerate() {
                let (label, next_net, next_reg) = match op {
                    GrowthOp::Extend { fixed_set, params } => {
                        let (n, r) =
                            extend_longitudinal(&net, &reg, &FixedSetId::new(fixed_set), params)
                                .map_err(module_err(step))?;
                        (format!("extend:{fixed_set}"), n, r)
                    }
                    GrowthOp::Associate { a, b, params } => {
                        let (n, r) = associate_lateral(
                            &net,
                            &reg,
                            &FixedSetId::new(a),
                            &FixedSetId::new(b),
                            params,
                        )
                        .map_err(module_err(step))?;
                        (format!("associate:{a}+{b}"), n, r)
                    }
                };
                net = next_net;
                reg = next_reg;
                report.push_row(vec![
                    step.into(),
                    label.into(),
                    net.node_count().into(),
                    net.edge_count().into(),
                    reg.entries.len().into(),
                ]);
            }
            report.summary.insert("final_nodes".into(), net.node_count() as f64);
            report.summary.insert("final_edges".into(), net.edge_count() as f64);
            report
                .summary
                .insert("final_registry_entries".into(), reg.entries.len() as f64);
            // replayable history
            report.evidence.insert(
                "ops".into(),
                serde_json::to_value(ops).expect("ops serialize"),
            );
            report.evidence.insert(
                "final_network".into(),
                serde_json::to_value(net.to_spec()).expect("network serializes"),
            );
        }

        Payload::Membrane {
            network,
            registry,
            drive,
            params,
            membrane,
        } => {
            let net = resolve_network(network, &loaded.base_dir)?;
            let reg = resolve_registry(registry, &loaded.base_dir)?;
            report.columns = vec![
                "replicate".into(),
                "seed".into(),
                "conscious".into(),
                "band".into(),
                "rate".into(),
                "sustained_for".into(),
                "active_sets".into(),
            ];
            let mut conscious_count = 0usize;
            for replicate in 0..s.replicates {
                let seed = s.seed + replicate as u64;
                let p = params.clone().with_seed(seed);
                let verdict = is_minimally_conscious(&net, &reg, drive, &p, membrane)
                    .map_err(module_err(replicate))?;
                conscious_count += verdict.conscious as usize;
                let (band, rate, sustained, active) = verdict
                    .membrane
                    .as_ref()
                    .map(|m| {
                        (
                            format!("{:?}", m.band).to_lowercase(),
                            m.rate,
                            m.sustained_for,
                            m.active_sets
                                .iter()
                                .map(|id| id.0.clone())
                                .collect::<Vec<_>>()
                                .join(";"),
                        )
                    })
                    .unwrap_or_else(|| ("none".into(), 0.0, 0, String::new()));
                if replicate == 0 {
                    report.evidence.insert(
                        "verdict".into(),
                        serde_json::to_value(&verdict).expect("verdict serializes"),
                    );
                }
                report.push_row(vec![
                    replicate.into(),
                    seed.into(),
                    verdict.conscious.into(),
                    band.into(),
                    rate.into(),
                    sustained.into(),
                    active.into(),
                ]);
            }
            report.summary.insert(
                "conscious_fraction".into(),
                conscious_count as f64 / s.replicates as f64,
            );
        }

        Payload::Continuity {
            corpus,
            max_order,
            orders,
            required_coverage,
            sequences,
        } => {
            let corpus = resolve_corpus(corpus, &loaded.base_dir)?;
            let graph =
                build_prediction_graph(&corpus, *max_order).map_err(module_err(0))?;
            let orders: BTreeSet<usize> = orders.iter().copied().collect();
            report.columns = vec![
                "sequence".into(),
                "continuous".into(),
                "coverage".into(),
                "first_break".into(),
                "matches_expectation".into(),
            ];
            let mut mismatches = 0usize;
            for check in sequences {
                let seq = TokenSeq::parse(&check.text);
                let verdict =
                    is_abstractly_continuous(&graph, &seq, &orders, *required_coverage)
                        .map_err(module_err(0))?;
                let matches = check
                    .expect_continuous
                    .map_or(true, |want| want == verdict.continuous);
                mismatches += (!matches) as usize;
                let first_break = verdict
                    .first_break
                    .as_ref()
                    .map(|(pos, ctx)| format!("{pos}:{}", ctx.join(" ")))
                    .unwrap_or_default();
                report.push_row(vec![
                    check.text.as_str().into(),
                    verdict.continuous.into(),
                    verdict.coverage.into(),
                    first_break.into(),
                    matches.into(),
                ]);
            }
            report.summary.insert("sequences".into(), sequences.len() as f64);
            report.summary.insert("mismatches".into(), mismatches as f64);
            report.summary.insert(
                "contexts".into(),
                graph.context_count() as f64,
            );
        }

        Payload::Physical { blueprint, sim } => {
            let bp = resolve_blueprint(blueprint, &loaded.base_dir)?;
            report.columns = vec![
                "replicate".into(),
                "seed".into(),
                "sustain_time".into(),
                "ratio".into(),
                "is_spl".into(),
                "audit_error".into(),
            ];
            let results: Result<Vec<_>, RunError> = (0..s.replicates)
                .into_par_iter()
                .map(|replicate| {
                    let seed = s.seed + replicate as u64;
                    let params = spl_core::physical::TrackSimParams { seed, ..sim.clone() };
                    let trace = simulate_track(&bp, &params).map_err(module_err(replicate))?;
                    let verdict = spl_test(&trace, &bp);
                    Ok((replicate, seed, verdict, trace.max_audit_error))
                })
                .collect();
            let mut sustains = Vec::new();
            let mut ratios = Vec::new();
            let mut spl_count = 0usize;
            let mut worst_audit = 0.0f64;
            for (replicate, seed, verdict, audit) in results? {
                sustains.push(verdict.sustain_time);
                ratios.push(verdict.ratio);
                spl_count += verdict.is_spl as usize;
                worst_audit = worst_audit.max(audit);
                report.push_row(vec![
                    replicate.into(),
                    seed.into(),
                    verdict.sustain_time.into(),
                    verdict.ratio.into(),
                    verdict.is_spl.into(),
                    audit.into(),
                ]);
            }
            report.summary.insert("median_sustain".into(), median_of(&sustains));
            report.summary.insert("iqr_sustain".into(), iqr_of(&sustains));
            report.summary.insert("median_ratio".into(), median_of(&ratios));
            report.summary.insert(
                "spl_fraction".into(),
                spl_count as f64 / s.replicates as f64,
            );
            report.summary.insert("max_audit_error".into(), worst_audit);
        }

        Payload::Chemical { reactions, sim } => {
            let rnet = resolve_reactions(reactions, &loaded.base_dir)?;
            report.columns = vec![
                "replicate".into(),
                "seed".into(),
                "survived".into(),
                "events".into(),
            ];
            let results: Result<Vec<_>, RunError> = (0..s.replicates)
                .into_par_iter()
                .map(|replicate| {
                    let seed = s.seed + replicate as u64;
                    let trace = simulate_reactions(&rnet, &chem_params_with_seed(sim, seed))
                        .map_err(module_err(replicate))?;
                    Ok((replicate, seed, all_species_survive(&rnet, &trace), trace.events.len()))
                })
                .collect();
            let mut survivals = 0usize;
            for (replicate, seed, survived, events) in results? {
                survivals += survived as usize;
                report.push_row(vec![
                    replicate.into(),
                    seed.into(),
                    survived.into(),
                    events.into(),
                ]);
            }
            report.summary.insert(
                "survival_fraction".into(),
                survivals as f64 / s.replicates as f64,
            );
        }

        Payload::Claim3 { config } => {
            let mut cfg = config.clone();
            cfg.seed = s.seed;
            cfg.replicates = s.replicates;
            let comparison = claim3_experiment(&cfg).map_err(module_err(0))?;
            report.columns = vec![
                "replicate".into(),
                "seed".into(),
                "variant".into(),
                "sustain_steps".into(),
            ];
            for row in &comparison.rows {
                report.push_row(vec![
                    row.replicate.into(),
                    row.seed.into(),
                    row.variant.to_string().into(),
                    row.sustain_steps.into(),
                ]);
            }
            report.summary.insert("median_linked".into(), comparison.median_linked);
            report
                .summary
                .insert("median_isolated".into(), comparison.median_isolated);
            report.summary.insert("median_ratio".into(), comparison.median_ratio);
        }

        Payload::Persistence { loop_net, chain_net, sim } => {
            let loop_rnet = resolve_reactions(loop_net, &loaded.base_dir)?;
            let chain_rnet = resolve_reactions(chain_net, &loaded.base_dir)?;
            let base = chem_params_with_seed(sim, s.seed);
            let result = persistence_experiment(&loop_rnet, &chain_rnet, &base, s.replicates)
                .map_err(module_err(0))?;
            report.columns = vec![
                "replicate".into(),
                "seed".into(),
                "loop_survived".into(),
                "chain_survived".into(),
            ];
            for (replicate, &(seed, l, c)) in result.per_seed.iter().enumerate() {
                report.push_row(vec![replicate.into(), seed.into(), l.into(), c.into()]);
            }
            report.summary.insert("survival_loop".into(), result.survival_loop);
            report.summary.insert("survival_chain".into(), result.survival_chain);
            report.summary.insert(
                "survival_gap".into(),
                result.survival_loop - result.survival_chain,
            );
        }

        Payload::Split { reactions, sim, split_seed } => {
            let rnet = resolve_reactions(reactions, &loaded.base_dir)?;
            report.columns = vec![
                "half".into(),
                "regenerates".into(),
                "coverage_predicts".into(),
            ];
            let result =
                split_regeneration_test(&rnet, &chem_params_with_seed(sim, s.seed), *split_seed)
                    .map_err(module_err(0))?;
            report.push_row(vec![
                "a".into(),
                result.part_a_regenerates.into(),
                result.coverage_a.into(),
            ]);
            report.push_row(vec![
                "b".into(),
                result.part_b_regenerates.into(),
                result.coverage_b.into(),
            ]);
            report.summary.insert(
                "both_regenerate".into(),
                (result.part_a_regenerates && result.part_b_regenerates) as u8 as f64,
            );
            report.summary.insert(
                "matches_coverage".into(),
                ((result.part_a_regenerates == result.coverage_a)
                    && (result.part_b_regenerates == result.coverage_b)) as u8 as f64,
            );
            report.evidence.insert(
                "split".into(),
                serde_json::to_value(&result).expect("split report serializes"),
            );
        }
    }

    report.apply_expectations(&s.expectations);
    Ok(report)
}
