//! Endpoint maps built from shifted commutator families, reachable-ball
//! radii, and steering by Newton inversion.

pub mod bounds;
pub mod certificate;
pub mod endpoint;
pub mod path;
pub mod steer;

pub use bounds::{delta_max, estimate_bounds, formula_radius, radius_exponent, BoundsEstimate, FormulaRadius};
pub use certificate::{certified_radius, probe_targets, RadiusCertificate, SamplingBudget};
pub use endpoint::{EndpointMap, Leg};
pub use path::{projected_area, DPath, PathArc, PathCheck, PathManifest};
pub use steer::{connect, steer, ConnectOptions, Connection, SteerOptions, Steered};
