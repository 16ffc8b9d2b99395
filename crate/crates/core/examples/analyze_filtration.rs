//! Rank profiles of the bracket filtration for every built-in scenario.
//!
//!     cargo run --example analyze_filtration

use bracket_reach::filtration::{analyze, filtration_ranks};
use bracket_reach::scenario::BUILTIN_NAMES;
use bracket_reach::builtin;

fn main() -> bracket_reach::Result<()> {
    for name in BUILTIN_NAMES {
        let spec = builtin(name)?.spec()?;
        let samples = spec.domain().grid(5);
        let report = analyze(&spec, &samples, 3, 1e-8, &spec.domain().center())?;
        let words = report
            .frame
            .as_ref()
            .map(|f| f.words.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(" "))
            .unwrap_or_default();
        println!(
            "{name:<18} depth {:?}, rank {}, uniform {}, bracket generating {}, frame {words}",
            report.mu, report.rank, report.uniform, report.bracket_generating
        );
    }

    // The Martinet distribution only needs one bracket away from the plane
    // x1 = 0, and two on it.
    let spec = builtin("martinet")?.spec()?;
    for x1 in [0.0, 1e-3, 0.5] {
        let p = filtration_ranks(&spec, &[x1, 0.0, 0.0], 3, 1e-8)?;
        println!("martinet at x1 = {x1}: ranks {:?}, stabilizes at {:?}", p.ranks, p.stabilization_level(3));
    }

    // An even grid misses that plane, so the sampled depth is too small and
    // no frame of that depth exists at the origin.
    let coarse = analyze(&spec, &spec.domain().grid(4), 3, 1e-8, &[0.0; 3])?;
    println!(
        "martinet on a 4-point grid: depth {:?}; {}",
        coarse.mu,
        coarse.frame_issue.as_deref().unwrap_or("frame found")
    );
    Ok(())
}
