//! Joins two Engel points through a chain of certified balls and writes the
//! path as CSV plus a JSON manifest.
//!
//!     cargo run --example connect_points [out-dir]

use std::path::PathBuf;

use bracket_reach::reach::{connect, ConnectOptions, PathManifest};
use bracket_reach::builtin;

fn main() -> bracket_reach::Result<()> {
    let out: PathBuf = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(std::env::temp_dir);
    let scenario = builtin("engel")?;
    let spec = scenario.spec()?;
    let from = [0.0, 0.0, 0.0, 0.0];
    let to = [0.1, -0.1, 0.05, 0.02];
    let conn = connect(&spec, &from, &to, &ConnectOptions::default())?;
    for (w, c) in conn.waypoints.iter().zip(&conn.certificates) {
        println!("waypoint {w:.4?}  radius {:.3e}", c.radius);
    }
    let check = conn.path.validate(&spec, 1e-6)?;
    println!(
        "{} arcs, total time {:.4}, endpoint error {:.2e}, max flow residual {:.2e}",
        conn.path.arcs.len(),
        conn.path.total_time(),
        conn.path.endpoint_error,
        check.max_residual
    );
    let manifest = PathManifest {
        scenario: scenario.name.clone(),
        params: scenario.params.clone(),
        tol: 1e-8,
        csv: "engel_path.csv".into(),
        path: conn.path.clone(),
        certificates: conn.certificates.iter().filter_map(|c| serde_json::to_value(c).ok()).collect(),
    };
    conn.path.write(&out, "engel_path", &manifest)?;
    println!("wrote {}", out.join("engel_path.csv").display());
    Ok(())
}
