//! Diagnostic dump of the shipped fixtures: loop extraction, meta
//! promotion, membrane detection, the claim-3 comparison, the physical
//! design ordering, and chemical persistence. Handy when retuning fixture
//! parameters.

use std::collections::BTreeSet;
use std::time::Instant;

use spl_core::chemical::{persistence_experiment, simulate_reactions};
use spl_core::claim3::{claim3_experiment, LinkedLoopConfig};
use spl_core::dynamics::{run, triggered_loops};
use spl_core::fixedset::{classify_stimulus, extract_fixed_set, promote_meta_fixed_set, FixedSetId};
use spl_core::fixtures;
use spl_core::membrane::{detect_membrane, is_minimally_conscious};
use spl_core::network::enumerate_simple_cycles;
use spl_core::physical::{simulate_track, spl_test};

fn main() {
    let params = fixtures::fig_params();

    println!("== fig2 ==");
    let fig2 = fixtures::fig2();
    let loops2 = enumerate_simple_cycles(&fig2, 8);
    println!("loops: {:?}", loops2.iter().map(|l| l.id().0.clone()).collect::<Vec<_>>());
    let fs = extract_fixed_set(&fig2, &fixtures::fig2_table_family(), &params, 1.0, &loops2)
        .unwrap()
        .unwrap();
    println!("extracted: {:?}", fs.loop_ids);

    println!("== fig3 ==");
    let fig3 = fixtures::fig3();
    let loops3 = enumerate_simple_cycles(&fig3, 8);
    println!("n loops: {}", loops3.len());
    let table_direct =
        extract_fixed_set(&fig3, &fixtures::fig3_table_family(), &params, 1.0, &loops3)
            .unwrap()
            .unwrap();
    let chair_direct =
        extract_fixed_set(&fig3, &fixtures::fig3_chair_family(), &params, 1.0, &loops3)
            .unwrap()
            .unwrap();
    println!("table direct: {:?}", table_direct.loop_ids);
    println!("chair direct: {:?}", chair_direct.loop_ids);
    let registry = fixtures::fig2_registry();
    let parents: BTreeSet<FixedSetId> = [FixedSetId::new("base-fs")].into_iter().collect();
    let table_meta = promote_meta_fixed_set(
        &registry, &parents, &fig3, &fixtures::fig3_table_family(), &params, &loops3, "table-fs",
    )
    .unwrap();
    let chair_meta = promote_meta_fixed_set(
        &registry, &parents, &fig3, &fixtures::fig3_chair_family(), &params, &loops3, "chair-fs",
    )
    .unwrap();
    println!("table meta: {:?}", table_meta.loop_ids);
    println!("chair meta: {:?}", chair_meta.loop_ids);

    println!("== fig4 association ==");
    let fig4 = fixtures::fig4();
    let loops4 = enumerate_simple_cycles(&fig4, 8);
    println!("fig4 loops: {}", loops4.len());
    let table_stim = fixtures::fig3_table_family().average;
    let trace = run(&fig4, &[table_stim.clone()], &params, 40).unwrap();
    let trig = triggered_loops(&trace, &fig4, &loops4, &params).unwrap();
    println!(
        "table stimulus triggers chair loops: L5={} L6={}",
        trig.contains(&fixtures::loop_l5()),
        trig.contains(&fixtures::loop_l6())
    );

    println!("== membrane (knows config, plain fig4) ==");
    let cfg = fixtures::knows_membrane_config();
    let drive = fixtures::membrane_drive(cfg.horizon);
    let reg4 = fixtures::fig4_registry();
    let membrane = detect_membrane(&fig4, &reg4, &drive, &params, &cfg).unwrap();
    println!("membrane: {membrane:?}");

    println!("== membrane (grown fig4) ==");
    let t0 = Instant::now();
    let (grown, grown_reg) = fixtures::fig4_grown();
    println!("grown nodes: {}, entries: {}", grown.node_count(), grown_reg.entries.len());
    let gcfg = fixtures::grown_membrane_config();
    let gdrive = fixtures::membrane_drive(gcfg.horizon);
    let gm = detect_membrane(&grown, &grown_reg, &gdrive, &params, &gcfg).unwrap();
    println!("grown membrane: {gm:?} ({:?})", t0.elapsed());
    let anesthesia = grown.scaled_weights(0.2);
    let am = detect_membrane(&anesthesia, &grown_reg, &gdrive, &params, &gcfg).unwrap();
    println!("anesthesia membrane: {:?}", am.is_some());
    let verdict = is_minimally_conscious(&anesthesia, &grown_reg, &gdrive, &params, &gcfg).unwrap();
    println!("anesthesia verdict: conscious={} failed={:?}", verdict.conscious, verdict.failed);

    println!("== infant fig2 ==");
    let mut icfg = fixtures::grown_membrane_config();
    icfg.thresholds = spl_core::membrane::BandThresholds::default();
    let iv = is_minimally_conscious(&fig2, &fixtures::fig2_registry(), &fixtures::membrane_drive(icfg.horizon), &params, &icfg).unwrap();
    println!("infant: conscious={} failed={:?}", iv.conscious, iv.failed);

    println!("== classify ==");
    let reg3 = fixtures::fig3_meta_registry();
    let ranked = classify_stimulus(&fig3, &reg3, &table_stim, &params, &loops3).unwrap();
    println!("table stimulus ranking: {ranked:?}");

    println!("== claim3 ==");
    let t0 = Instant::now();
    let cfg3 = LinkedLoopConfig::default();
    let report = claim3_experiment(&cfg3).unwrap();
    println!(
        "linked={} isolated={} ratio={} ({:?})",
        report.median_linked,
        report.median_isolated,
        report.median_ratio,
        t0.elapsed()
    );

    println!("== physical ordering ==");
    let t0 = Instant::now();
    for (name, bp) in [
        ("a1b", fixtures::a1b_blueprint()),
        ("a1c", fixtures::a1c_blueprint()),
        ("a1d", fixtures::a1d_blueprint()),
    ] {
        let mut sustains = Vec::new();
        let mut ratios = Vec::new();
        let mut spl_count = 0;
        for seed in 0..30u64 {
            let trace = simulate_track(&bp, &fixtures::track_params(seed)).unwrap();
            let verdict = spl_test(&trace, &bp);
            sustains.push(verdict.sustain_time);
            ratios.push(verdict.ratio);
            spl_count += verdict.is_spl as usize;
        }
        sustains.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let med = sustains[sustains.len() / 2];
        ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
        println!(
            "{name}: median sustain {med:.1}, median ratio {:.1}, spl {}/30",
            ratios[ratios.len() / 2],
            spl_count
        );
    }
    println!("physical took {:?}", t0.elapsed());

    println!("== chemical persistence ==");
    let t0 = Instant::now();
    let loop_net = fixtures::a4_loop_network();
    let chain_net = fixtures::a4_chain_network();
    let report =
        persistence_experiment(&loop_net, &chain_net, &fixtures::chem_params(1000), 100).unwrap();
    println!(
        "survival loop={} chain={} ({:?})",
        report.survival_loop,
        report.survival_chain,
        t0.elapsed()
    );
    let trace = simulate_reactions(&loop_net, &fixtures::chem_params(7)).unwrap();
    println!("loop events: {}, final {:?}", trace.events.len(), trace.final_counts());
}
