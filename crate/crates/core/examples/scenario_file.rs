//! Loads user scenarios from files (text and JSON), overrides a parameter,
//! and runs the whole pipeline on them.
//!
//!     cargo run --example scenario_file [path]

use std::path::Path;

use bracket_reach::filtration::{analyze, local_frame};
use bracket_reach::reach::{connect, ConnectOptions};
use bracket_reach::load_scenario;

fn run(path: &str, from: &[f64], to: &[f64]) -> bracket_reach::Result<()> {
    let mut scenario = load_scenario(path)?;
    if scenario.params.contains_key("len") {
        scenario.set_param("len", 0.8)?;
    }
    let spec = scenario.spec()?;
    let d = &scenario.defaults;
    let report = analyze(&spec, &spec.domain().grid(d.grid), d.lmax, d.rank_tol, &spec.domain().center())?;
    println!(
        "{}: dim {}, depth {:?}, rank {}, bracket generating {}",
        spec.name(),
        spec.dim(),
        report.mu,
        report.rank,
        report.bracket_generating
    );
    let (mu, frame) = local_frame(&spec, from, d.lmax, d.rank_tol)?;
    let words: Vec<String> = frame.words.iter().map(|w| w.to_string()).collect();
    println!("  frame at start (depth {mu}): {}", words.join(" "));
    let opts = ConnectOptions {
        delta: d.delta,
        lmax: d.lmax,
        ..Default::default()
    };
    let conn = connect(&spec, from, to, &opts)?;
    println!(
        "  connected in {} arcs, {} waypoints, error {:.2e}",
        conn.path.arcs.len(),
        conn.waypoints.len(),
        conn.path.endpoint_error
    );
    Ok(())
}

fn main() -> bracket_reach::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/scenarios");
    if let Some(path) = std::env::args().nth(1) {
        let dim = load_scenario(&path)?.dim;
        let target = vec![0.05; dim];
        return run(&path, &vec![0.0; dim], &target);
    }
    run(dir.join("unicycle.txt").to_str().unwrap_or_default(), &[0.0; 3], &[0.1, 0.05, 0.2])?;
    run(dir.join("trailer.json").to_str().unwrap_or_default(), &[0.0; 4], &[0.05, 0.02, 0.0, 0.05])?;
    Ok(())
}
