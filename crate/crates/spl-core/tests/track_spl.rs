//! SPL verdicts on the track designs: the looped design qualifies, the
//! no-burst run does not, blueprint rewrites keep invariants, and linked
//! blueprints show ball transfer in simulation.

use spl_core::fixtures;
use spl_core::physical::{
    link_blueprints, simulate_track, spl_test, Feature, TrackBlueprint, TrackSimParams,
};

#[test]
fn looped_design_is_spl_under_default_bursts() {
    let bp = fixtures::a1d_blueprint();
    let trace = simulate_track(&bp, &fixtures::track_params(0)).unwrap();
    let verdict = spl_test(&trace, &bp);
    assert!(verdict.condition_a, "no recurring circulation: {verdict:?}");
    assert!(verdict.condition_c);
    assert!(verdict.ratio >= 10.0, "ratio {} too small", verdict.ratio);
    assert!(verdict.is_spl, "{verdict:?}");
    assert!(!verdict.b_waived);
}

#[test]
fn single_valley_design_scores_below_looped_design() {
    let b = fixtures::a1b_blueprint();
    let d = fixtures::a1d_blueprint();
    let tb = simulate_track(&b, &fixtures::track_params(0)).unwrap();
    let td = simulate_track(&d, &fixtures::track_params(0)).unwrap();
    let vb = spl_test(&tb, &b);
    let vd = spl_test(&td, &d);
    assert!(
        vb.ratio < vd.ratio,
        "single-valley ratio {} not below looped ratio {}",
        vb.ratio,
        vd.ratio
    );
}

#[test]
fn no_burst_run_is_not_spl() {
    let bp = fixtures::a1d_blueprint();
    let sim = TrackSimParams {
        energy_burst_rate: 0.0,
        burst_magnitude: 0.0,
        ..fixtures::track_params(0)
    };
    let trace = simulate_track(&bp, &sim).unwrap();
    let verdict = spl_test(&trace, &bp);
    assert!(!verdict.is_spl, "dissipative run cannot be SPL: {verdict:?}");
    // sustain collapses to the settling transient
    assert!(verdict.sustain_time < 30.0);
}

#[test]
fn single_loop_design_waives_the_parallel_condition() {
    // the swing case: one cycle, no storage loops, nothing parallel
    let bp = TrackBlueprint::single_cycle(
        vec![Feature::valley(0.5), Feature::hill(0.3)],
        0.03,
        1,
    );
    let trace = simulate_track(&bp, &fixtures::track_params(3)).unwrap();
    let verdict = spl_test(&trace, &bp);
    assert!(verdict.b_waived);
    assert!(!verdict.condition_b);
}

#[test]
fn rewrites_preserve_blueprint_invariants_and_cycles() {
    let mut bp = fixtures::a1b_blueprint();
    let cycles_before = bp.cycle_count();
    bp = spl_core::physical::add_valleys(&bp, 2).unwrap();
    bp.validate().unwrap();
    bp = spl_core::physical::valley_to_loop(&bp, 0).unwrap();
    bp.validate().unwrap();
    assert!(bp.cycle_count() >= cycles_before);

    let merged = spl_core::physical::merge_blueprints(
        &bp,
        &fixtures::a1c_blueprint(),
        &[(0, 0)],
    )
    .unwrap();
    merged.validate().unwrap();
    assert_eq!(merged.cycle_count(), 2);
}

#[test]
fn linked_blueprints_transfer_balls_between_cycles() {
    let a = TrackBlueprint::single_cycle(
        vec![Feature::storage_loop(1.0, 0.004), Feature::hill(0.3)],
        0.03,
        2,
    );
    let b = TrackBlueprint::single_cycle(
        vec![Feature::storage_loop(0.8, 0.004), Feature::hill(0.4)],
        0.03,
        2,
    );
    let linked = link_blueprints(&a, &b, (1, 0)).unwrap();
    let sim = TrackSimParams {
        horizon: 150.0,
        ..fixtures::track_params(5)
    };
    let trace = simulate_track(&linked, &sim).unwrap();
    assert!(
        !trace.transfers.is_empty(),
        "no ball crossed the channel in {} passages",
        trace.passages.len()
    );
    let crossed = trace.transfers[0];
    assert_eq!(crossed.from_cycle, 0);
    assert_eq!(crossed.to_cycle, 1);
    assert!(trace.max_audit_error < 1e-9);
}

/// The paper-facing ordering at a reduced scale; the acceptance suite runs
/// the full grid.
#[test]
fn design_ordering_smoke() {
    let designs = [
        fixtures::a1b_blueprint(),
        fixtures::a1c_blueprint(),
        fixtures::a1d_blueprint(),
    ];
    let mut medians = Vec::new();
    for bp in &designs {
        let mut sustains: Vec<f64> = (0..15u64)
            .map(|seed| {
                let trace = simulate_track(bp, &fixtures::track_params(seed)).unwrap();
                spl_test(&trace, bp).sustain_time
            })
            .collect();
        sustains.sort_by(|x, y| x.partial_cmp(y).unwrap());
        medians.push(sustains[sustains.len() / 2]);
    }
    assert!(medians[0] <= medians[1] && medians[1] <= medians[2], "{medians:?}");
    assert!(medians[0] < medians[2], "{medians:?}");
}
