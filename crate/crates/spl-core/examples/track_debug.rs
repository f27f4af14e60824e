//! Deep-dive dump of single track runs while tuning the design fixtures.

use spl_core::fixtures;
use spl_core::physical::{simulate_track, spl_test};

fn main() {
    for (name, bp) in [
        ("a1b", fixtures::a1b_blueprint()),
        ("a1c", fixtures::a1c_blueprint()),
        ("a1d", fixtures::a1d_blueprint()),
    ] {
        println!("== {name} ==");
        println!(
            "features: {:?}",
            bp.cycles[0]
                .iter()
                .map(|f| format!("{:?}({})", f.kind, f.magnitude))
                .collect::<Vec<_>>()
        );
        let trace = simulate_track(&bp, &fixtures::track_params(0)).unwrap();
        let times = trace.primary_passage_times();
        println!("passages: {} first 20: {:?}", times.len(), &times[..times.len().min(20)]);
        if times.len() > 20 {
            println!("last 5: {:?}", &times[times.len() - 5..]);
        }
        let verdict = spl_test(&trace, &bp);
        println!("verdict: {verdict:?}");
        let last = trace.final_sample();
        println!(
            "final v: {:?} energy: {:.3} burst_in: {:.3} dissipated: {:.3}",
            last.velocities, last.mechanical_energy, last.burst_input, last.dissipated
        );
        // sample mid-run ball positions
        for frac in [0.2, 0.5, 0.8] {
            let idx = (trace.samples.len() as f64 * frac) as usize;
            let s = &trace.samples[idx];
            println!(
                "t={:.1} pos={:?} v={:?}",
                s.time,
                s.positions.iter().map(|p| format!("{:.2}", p.1)).collect::<Vec<_>>(),
                s.velocities.iter().map(|v| format!("{:.2}", v)).collect::<Vec<_>>()
            );
        }
        println!("audit err: {:.2e}", trace.max_audit_error);
        println!();
    }
}
