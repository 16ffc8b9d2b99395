//! Generator flows and ordered compositions of them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{DistributionSpec, SmoothField};
use crate::integrator::Integrator;

pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

/// Flow-time schedule `σ(t)` of one atom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Schedule {
    /// `σ(t) = ±t`.
    Linear(Sign),
    /// `σ(t) ≡ value`; `delta` is the shift that produced it.
    Const { value: f64, delta: f64 },
    /// `σ(t) = ±(t + offset)^(1/order)`, defined for `t + offset >= 0` unless
    /// `order` is 1.
    SignedRoot { sign: Sign, order: u32, offset: f64 },
}

impl Schedule {
    pub fn eval(&self, t: f64) -> Result<f64> {
        match *self {
            Schedule::Linear(sign) => Ok(sign.value() * t),
            Schedule::Const { value, .. } => Ok(value),
            Schedule::SignedRoot {
                sign,
                order,
                offset,
            } => {
                let base = t + offset;
                if base < 0.0 && order != 1 {
                    return Err(Error::ScheduleDomain {
                        t,
                        offset,
                        atom: None,
                    });
                }
                let root = match order {
                    1 => base,
                    2 => base.sqrt(),
                    3 => base.cbrt(),
                    r => base.powf(1.0 / r as f64),
                };
                Ok(sign.value() * root)
            }
        }
    }

    pub fn negate(&self) -> Self {
        match *self {
            Schedule::Linear(sign) => Schedule::Linear(sign.flip()),
            Schedule::Const { value, delta } => Schedule::Const {
                value: -value,
                delta,
            },
            Schedule::SignedRoot {
                sign,
                order,
                offset,
            } => Schedule::SignedRoot {
                sign: sign.flip(),
                order,
                offset,
            },
        }
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = |sign: &Sign| if *sign == Sign::Plus { "+" } else { "-" };
        match self {
            Schedule::Linear(sign) => write!(f, "{}t", s(sign)),
            Schedule::Const { value, .. } => write!(f, "{value}"),
            Schedule::SignedRoot {
                sign,
                order,
                offset,
            } => write!(f, "{}(t+{offset})^(1/{order})", s(sign)),
        }
    }
}

/// One factor `Φ^{X_k}_{σ(t)}`; `generator` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub generator: usize,
    pub schedule: Schedule,
}

impl Atom {
    pub fn new(generator: usize, schedule: Schedule) -> Self {
        Atom {
            generator,
            schedule,
        }
    }
}

/// Composition of generator flows. Atoms are stored innermost first: the
/// first atom is applied to the input point first.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FlowProgram {
    atoms: Vec<Atom>,
}

impl FlowProgram {
    pub fn new(atoms: Vec<Atom>) -> Self {
        FlowProgram { atoms }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `self` applied after `inner`.
    pub fn after(&self, inner: &FlowProgram) -> FlowProgram {
        let mut atoms = inner.atoms.clone();
        atoms.extend_from_slice(&self.atoms);
        FlowProgram { atoms }
    }

    /// Reverses the atom order and negates every schedule.
    pub fn inverse(&self) -> FlowProgram {
        FlowProgram {
            atoms: self
                .atoms
                .iter()
                .rev()
                .map(|a| Atom::new(a.generator, a.schedule.negate()))
                .collect(),
        }
    }

    /// Maps every schedule through `f`.
    pub fn map_schedules(&self, f: impl Fn(&Schedule) -> Schedule) -> FlowProgram {
        FlowProgram {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom::new(a.generator, f(&a.schedule)))
                .collect(),
        }
    }

    pub fn validate(&self, spec: &DistributionSpec) -> Result<()> {
        for atom in &self.atoms {
            spec.generator(atom.generator)?;
        }
        Ok(())
    }

    /// The concrete `(generator, duration)` sequence at parameter `t`.
    pub fn realize(&self, t: f64) -> Result<Vec<(usize, f64)>> {
        self.atoms
            .iter()
            .enumerate()
            .map(|(i, a)| {
                a.schedule
                    .eval(t)
                    .map(|d| (a.generator, d))
                    .map_err(|e| e.at_atom(i))
            })
            .collect()
    }
}

/// `invert_program`.
pub fn invert_program(program: &FlowProgram) -> FlowProgram {
    program.inverse()
}

/// `Φ^X_t(x0)` inside the domain box of `spec`.
pub fn integrate_flow(
    spec: &DistributionSpec,
    field: &SmoothField,
    x0: &[f64],
    t: f64,
    tol: f64,
) -> Result<Vec<f64>> {
    Integrator::new(tol)?.integrate_with(field, spec.domain(), x0, t, |_, _| {})
}

/// Applies a realized sequence of `(generator, duration)` flows to `x0`.
pub fn apply_durations(
    spec: &DistributionSpec,
    durations: &[(usize, f64)],
    x0: &[f64],
    tol: f64,
) -> Result<Vec<f64>> {
    let integrator = Integrator::new(tol)?;
    let mut x = x0.to_vec();
    for (i, &(k, d)) in durations.iter().enumerate() {
        let field = spec.generator(k)?;
        x = integrator
            .integrate_with(field, spec.domain(), &x, d, |_, _| {})
            .map_err(|e| e.at_atom(i))?;
    }
    Ok(x)
}

/// Evaluates the program at parameter `t`, innermost atom first.
pub fn apply_program(
    spec: &DistributionSpec,
    program: &FlowProgram,
    x0: &[f64],
    t: f64,
    tol: f64,
) -> Result<Vec<f64>> {
    if x0.len() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            found: x0.len(),
        });
    }
    program.validate(spec)?;
    let durations = program.realize(t)?;
    apply_durations(spec, &durations, x0, tol)
}

/// Integrates one arc and returns `samples + 1` evenly spaced points
/// `(s, x(s))`, `s` running from 0 to `duration`.
pub fn sample_arc(
    spec: &DistributionSpec,
    generator: usize,
    x0: &[f64],
    duration: f64,
    samples: usize,
    tol: f64,
) -> Result<Vec<(f64, Vec<f64>)>> {
    let field = spec.generator(generator)?;
    let integrator = Integrator::new(tol)?;
    let samples = samples.max(1);
    let mut out = Vec::with_capacity(samples + 1);
    out.push((0.0, x0.to_vec()));
    let mut x = x0.to_vec();
    for j in 1..=samples {
        let s0 = duration * (j - 1) as f64 / samples as f64;
        let s1 = duration * j as f64 / samples as f64;
        x = integrator
            .integrate_with(field, spec.domain(), &x, s1 - s0, |_, _| {})
            .map_err(|e| match e {
                Error::DomainEscape {
                    time, point, atom, factor,
                } => Error::DomainEscape {
                    time: s0 + time,
                    point,
                    atom,
                    factor,
                },
                other => other,
            })?;
        out.push((s1, x.clone()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::builtin;

    fn heisenberg() -> DistributionSpec {
        builtin("heisenberg").unwrap().spec().unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn heisenberg_flows_match_closed_form() {
        let s = heisenberg();
        let (a, b, c) = (0.3, -0.4, 0.2);
        for &t in &[0.0, 0.25, -0.7] {
            let x = integrate_flow(&s, s.generator(2).unwrap(), &[a, b, c], t, DEFAULT_TOL).unwrap();
            assert!(close(&x, &[a, b + t, c + t * a], 1e-12));
        }
        let x = integrate_flow(&s, s.generator(1).unwrap(), &[0.0; 3], 0.3, DEFAULT_TOL).unwrap();
        assert!(close(&x, &[0.3, 0.0, 0.0], 1e-14));
    }

    #[test]
    fn empty_and_single_programs() {
        let s = heisenberg();
        let x0 = [0.1, 0.2, 0.3];
        let empty = FlowProgram::default();
        assert_eq!(apply_program(&s, &empty, &x0, 0.4, DEFAULT_TOL).unwrap(), x0.to_vec());
        let one = FlowProgram::new(vec![Atom::new(2, Schedule::Linear(Sign::Plus))]);
        let direct = integrate_flow(&s, s.generator(2).unwrap(), &x0, 0.4, DEFAULT_TOL).unwrap();
        assert_eq!(apply_program(&s, &one, &x0, 0.4, DEFAULT_TOL).unwrap(), direct);
    }

    #[test]
    fn inversion_is_an_involution() {
        let p = FlowProgram::new(vec![
            Atom::new(1, Schedule::Linear(Sign::Plus)),
            Atom::new(2, Schedule::Const { value: 0.3, delta: 0.09 }),
            Atom::new(
                1,
                Schedule::SignedRoot {
                    sign: Sign::Minus,
                    order: 2,
                    offset: 0.09,
                },
            ),
        ]);
        let inv = invert_program(&p);
        assert_eq!(inv.atoms()[0].schedule.eval(0.0).unwrap(), 0.3);
        assert_eq!(inv.atoms()[2].schedule, Schedule::Linear(Sign::Minus));
        assert_eq!(invert_program(&inv), p);
    }

    #[test]
    fn schedule_domain_error_names_the_atom() {
        let s = heisenberg();
        let p = FlowProgram::new(vec![
            Atom::new(1, Schedule::Linear(Sign::Plus)),
            Atom::new(
                2,
                Schedule::SignedRoot {
                    sign: Sign::Plus,
                    order: 2,
                    offset: 0.0,
                },
            ),
        ]);
        match apply_program(&s, &p, &[0.0; 3], -0.1, DEFAULT_TOL) {
            Err(Error::ScheduleDomain { atom: Some(1), .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn escape_error_names_the_atom() {
        let s = heisenberg();
        let p = FlowProgram::new(vec![
            Atom::new(1, Schedule::Const { value: 0.5, delta: 0.0 }),
            Atom::new(2, Schedule::Linear(Sign::Plus)),
        ]);
        match apply_program(&s, &p, &[0.0; 3], 5.0, DEFAULT_TOL) {
            Err(Error::DomainEscape { atom: Some(1), .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sampled_arc_chains_to_the_flow() {
        let s = heisenberg();
        let pts = sample_arc(&s, 2, &[0.5, 0.0, 0.0], -0.8, 8, DEFAULT_TOL).unwrap();
        assert_eq!(pts.len(), 9);
        let (send, xend) = pts.last().unwrap();
        assert_eq!(*send, -0.8);
        assert!(close(xend, &[0.5, -0.8, -0.4], 1e-13));
    }
}
