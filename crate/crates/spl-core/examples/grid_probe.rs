//! Sweep the burst-parameter grid and print median sustain per design.

use spl_core::fixtures;
use spl_core::physical::{simulate_track, spl_test, TrackSimParams};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

fn main() {
    let designs = [
        ("a1b", fixtures::a1b_blueprint()),
        ("a1c", fixtures::a1c_blueprint()),
        ("a1d", fixtures::a1d_blueprint()),
    ];
    for rate in [0.1, 0.15, 0.2] {
        for mag in [0.7, 0.8, 1.0] {
            let mut meds = Vec::new();
            for (_, bp) in &designs {
                let sustains: Vec<f64> = (0..50u64)
                    .map(|seed| {
                        let sim = TrackSimParams {
                            energy_burst_rate: rate,
                            burst_magnitude: mag,
                            ..fixtures::track_params(seed)
                        };
                        let trace = simulate_track(bp, &sim).unwrap();
                        spl_test(&trace, bp).sustain_time
                    })
                    .collect();
                meds.push(median(sustains));
            }
            let ok = meds[0] <= meds[1] + 1e-9 && meds[1] <= meds[2] + 1e-9 && meds[0] < meds[2];
            println!(
                "rate {rate:.2} mag {mag:.1}: b={:>6.1} c={:>6.1} d={:>6.1}  {}",
                meds[0],
                meds[1],
                meds[2],
                if ok { "OK" } else { "ORDER VIOLATION" }
            );
        }
    }
}
