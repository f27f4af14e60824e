//! Print a fixture asset as canonical JSON (used to regenerate the files
//! shipped under fixtures/).

use spl_core::fixtures;

fn main() {
    let which = std::env::args().nth(1).unwrap_or_default();
    let text = match which.as_str() {
        "fig2" => serde_json::to_string_pretty(&fixtures::fig2_spec()).unwrap(),
        "fig3" => serde_json::to_string_pretty(&fixtures::fig3_spec()).unwrap(),
        "fig4" => serde_json::to_string_pretty(&fixtures::fig4_spec()).unwrap(),
        "a1b" => serde_json::to_string_pretty(&fixtures::a1b_blueprint()).unwrap(),
        "a1c" => serde_json::to_string_pretty(&fixtures::a1c_blueprint()).unwrap(),
        "a1d" => serde_json::to_string_pretty(&fixtures::a1d_blueprint()).unwrap(),
        "a4-loop" => serde_json::to_string_pretty(&fixtures::a4_loop_network()).unwrap(),
        "corpus" => fixtures::PIZZA_CORPUS.to_string(),
        other => panic!("unknown fixture {other:?}"),
    };
    println!("{text}");
}
