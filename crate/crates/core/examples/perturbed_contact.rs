//! A contact distribution perturbed by a term that is only finitely smooth
//! at x1 = 0 (smoothed by eps). Reachable radii barely move with the
//! perturbation strength.
//!
//!     cargo run --example perturbed_contact

use bracket_reach::filtration::local_frame;
use bracket_reach::flows::DEFAULT_TOL;
use bracket_reach::reach::{certified_radius, connect, ConnectOptions, EndpointMap, SamplingBudget};
use bracket_reach::builtin;

fn main() -> bracket_reach::Result<()> {
    let y = [0.8, 0.1, -0.2];
    println!("lambda   eps      radius at {y:?}   connect (0,0,0) -> (0.5,0.5,0.3)");
    for lambda in [0.0, 0.02, 0.05, 0.2] {
        for eps in [1e-3, 1e-1] {
            let mut scenario = builtin("contact-perturbed")?;
            scenario.set_param("lambda", lambda)?;
            scenario.set_param("eps", eps)?;
            let spec = scenario.spec()?;
            let (_, frame) = local_frame(&spec, &y, 3, 1e-8)?;
            let map = EndpointMap::new(&spec, &frame.words, &frame.rows, 0.2, DEFAULT_TOL)?;
            let cert = certified_radius(&map, &y, &SamplingBudget::default())?;
            let conn = connect(&spec, &[0.0; 3], &[0.5, 0.5, 0.3], &ConnectOptions::default())?;
            println!(
                "{lambda:<8} {eps:<8} {:<28.5e} {} waypoints, error {:.1e}",
                cert.radius,
                conn.waypoints.len(),
                conn.path.endpoint_error
            );
        }
    }
    Ok(())
}
