//! Finite-difference check that the commutator flow of a word of length r
//! starts like t^r times r! X_w, and that the shifted families converge to the
//! bracket as the shift shrinks.
//!
//!     cargo run --example taylor_check

use bracket_reach::commutator::{approx_velocity, commutator_flow, default_taylor_step, shifted_flow, verify_taylor};
use bracket_reach::flows::DEFAULT_TOL;
use bracket_reach::{builtin, BracketWord};

fn main() -> bracket_reach::Result<()> {
    let spec = builtin("martinet")?.spec()?;
    let x0 = [0.5, 0.1, -0.2];
    for w in ["1,2", "1,1,2", "2,1,2"] {
        let word: BracketWord = w.parse()?;
        let flow = commutator_flow(&spec, &word)?;
        println!("word ({w}): {} flows", flow.len());
        let report = verify_taylor(&spec, &word, &x0, default_taylor_step(word.len()), DEFAULT_TOL)?;
        for o in &report.orders {
            println!(
                "  order {}: |d| = {:.3e}, expected {:.3e}, error {:.2e} ({})",
                o.order,
                o.norm,
                o.target_norm,
                o.error,
                if o.pass { "ok" } else { "FAIL" }
            );
        }
    }

    // The velocity of the shifted family at t = 0 approaches [X1, X2] like
    // the square root of the shift.
    let word: BracketWord = "1,2".parse()?;
    let target = spec.iterated_bracket(&word)?.eval(&x0);
    println!("\nshift    |velocity - bracket|");
    for delta in [0.2, 0.1, 0.05, 0.025, 0.0125] {
        let family = shifted_flow(&spec, &word, delta)?;
        let v = approx_velocity(&spec, &family, delta, &x0, DEFAULT_TOL)?;
        let err = v.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        println!("{delta:<8} {err:.4e}");
    }
    Ok(())
}
