//! Sideways motion of the Heisenberg system: the height gained equals the
//! signed area swept in the (x1, x2) plane.
//!
//!     cargo run --example parallel_parking [height]

use bracket_reach::reach::{connect, projected_area, ConnectOptions};
use bracket_reach::builtin;

fn main() -> bracket_reach::Result<()> {
    let c: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(0.05);
    let spec = builtin("heisenberg")?.spec()?;
    let conn = connect(&spec, &[0.0; 3], &[0.0, 0.0, c], &ConnectOptions::default())?;
    let path = &conn.path;
    println!("target height {c}: {} arcs through {} waypoints", path.arcs.len(), conn.waypoints.len());
    for (i, arc) in path.arcs.iter().take(12).enumerate() {
        println!("  arc {i:>2}: X{} for {:+.6}", arc.generator, arc.duration);
    }
    if path.arcs.len() > 12 {
        println!("  ...");
    }
    println!("endpoint {:?} (error {:.2e})", path.endpoint, path.endpoint_error);
    println!("swept area {:.8}", projected_area(path, 0, 1));
    let check = path.validate(&spec, 1e-6)?;
    println!("validation passed: {}", check.passed());
    Ok(())
}
