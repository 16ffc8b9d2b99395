//! Iterated brackets of the Engel generators, printed symbolically and at a
//! point.
//!
//!     cargo run --example brackets

use bracket_reach::{builtin, BracketWord};

fn main() -> bracket_reach::Result<()> {
    let spec = builtin("engel")?.spec()?;
    let x = [0.3, -0.2, 0.5, 0.1];
    println!("generators of {} at {x:?}", spec.name());
    for word in BracketWord::all_up_to(spec.generator_count(), 3) {
        let field = spec.iterated_bracket(&word)?;
        if field.is_zero() {
            println!("{word:<10} = 0");
            continue;
        }
        let comps: Vec<String> = field.components().iter().map(|c| c.to_string()).collect();
        println!("{word:<10} = ({})", comps.join(", "));
        println!("{:<10}   at x: {:?}", "", field.eval(&x));
    }
    Ok(())
}
