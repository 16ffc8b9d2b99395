//! Iterated Lie brackets, commutator flows, reachable-ball certificates and
//! path synthesis for distributions spanned by smooth vector fields.

pub mod cli;
pub mod commutator;
pub mod error;
pub mod expr;
pub mod fields;
pub mod filtration;
pub mod flows;
pub mod integrator;
pub mod reach;
pub mod scenario;
pub mod stencil;

pub use error::{Error, Result};
pub use fields::{lie_bracket, BoxDomain, BracketWord, DistributionSpec, SmoothField};
pub use flows::{Atom, FlowProgram, Schedule, Sign};
pub use scenario::{builtin, load_scenario, Scenario};
