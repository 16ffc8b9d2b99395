//! Certified reachable ball around a Martinet point, checked by steering to
//! random targets on its boundary.
//!
//!     cargo run --example reachable_ball

use bracket_reach::filtration::local_frame;
use bracket_reach::flows::DEFAULT_TOL;
use bracket_reach::reach::{certified_radius, probe_targets, steer, EndpointMap, SamplingBudget, SteerOptions};
use bracket_reach::builtin;

fn main() -> bracket_reach::Result<()> {
    let spec = builtin("martinet")?.spec()?;
    for y in [[0.3, 0.0, 0.0], [0.05, 0.2, -0.1], [0.0, 0.0, 0.0]] {
        let (mu, frame) = local_frame(&spec, &y, 3, 1e-8)?;
        let words: Vec<String> = frame.words.iter().map(|w| w.to_string()).collect();
        let map = EndpointMap::new(&spec, &frame.words, &frame.rows, 0.2, DEFAULT_TOL)?;
        let cert = certified_radius(&map, &y, &SamplingBudget::default())?;
        println!("y = {y:?}: depth {mu}, frame {}", words.join(" "));
        println!(
            "  radius {:.4e} (|J^-1| = {:.3}, L = {:.3}, {} samples)",
            cert.radius, cert.inverse_norm, cert.lipschitz, cert.lipschitz_samples
        );
        let mut worst = 0.0f64;
        let mut iters = 0;
        for t in probe_targets(&y, &frame.rows, 0.9 * cert.radius, 10, 1) {
            let s = steer(&map, &y, &t, &SteerOptions::default())?;
            worst = worst.max(s.path.endpoint_error);
            iters = iters.max(s.iterations);
        }
        println!("  10 targets at 0.9 r reached; worst error {worst:.2e}, at most {iters} Newton steps");
    }
    Ok(())
}
