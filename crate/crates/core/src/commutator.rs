//! Recursive commutator flows and their Taylor behaviour.
//!
//! For a word `w = (k, ℓ_1, ..., ℓ_{r-1})` the commutator flow is
//!
//! ```text
//! G_{(k)t}   = Φ^{X_k}_t
//! G_{w t}    = Φ^{X_k}_{-t} ∘ G_{ℓ t} ∘ Φ^{X_k}_t ∘ (G_{ℓ t})^{-1}
//! ```
//!
//! whose `t`-expansion starts with `t^r X_w`. Reparametrizing by `t^{1/r}`
//! and shifting by `δ` gives a family whose velocity at `t = 0` approaches
//! `X_w` as `δ → 0`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{BracketWord, DistributionSpec};
use crate::flows::{apply_program, Atom, FlowProgram, Schedule, Sign};
use crate::stencil::central_derivatives;

/// Number of flows in a commutator flow of a length-`r` word:
/// `2^r + 2^(r-1) - 2`.
pub fn flow_count(r: usize) -> Result<usize> {
    if r < 1 {
        return Err(Error::InvalidArgument("word length must be at least 1".into()));
    }
    if r >= usize::BITS as usize {
        return Err(Error::InvalidArgument(format!("word length {r} too large")));
    }
    Ok((1usize << r) + (1usize << (r - 1)) - 2)
}

/// The commutator flow `G_{w t}` with `±t` schedules.
pub fn commutator_flow(spec: &DistributionSpec, word: &BracketWord) -> Result<FlowProgram> {
    word.validate(spec.generator_count())?;
    Ok(commutator_atoms(word))
}

fn commutator_atoms(word: &BracketWord) -> FlowProgram {
    let k = word.head();
    match word.tail() {
        None => FlowProgram::new(vec![Atom::new(k, Schedule::Linear(Sign::Plus))]),
        Some(tail) => {
            let inner = commutator_atoms(&tail);
            let mut atoms = inner.inverse().atoms().to_vec();
            atoms.push(Atom::new(k, Schedule::Linear(Sign::Plus)));
            atoms.extend_from_slice(inner.atoms());
            atoms.push(Atom::new(k, Schedule::Linear(Sign::Minus)));
            FlowProgram::new(atoms)
        }
    }
}

/// `g_{w t} = G_{w, t^{1/r}}`, defined for `t >= 0`. For `r = 1` this is the
/// commutator flow itself.
pub fn reparametrized_flow(spec: &DistributionSpec, word: &BracketWord) -> Result<FlowProgram> {
    let base = commutator_flow(spec, word)?;
    let r = word.len() as u32;
    if r == 1 {
        return Ok(base);
    }
    Ok(base.map_schedules(|s| match s {
        Schedule::Linear(sign) => Schedule::SignedRoot {
            sign: *sign,
            order: r,
            offset: 0.0,
        },
        other => *other,
    }))
}

/// The shifted family `f^{(δ)}_t = g_δ^{-1} ∘ g_{t+δ}`, for `t ∈ (-δ/2, δ/2)`.
///
/// The first half of the atoms realizes `g_{t+δ}`; the second half is the
/// inverse of `g` frozen at `δ`.
pub fn shifted_flow(spec: &DistributionSpec, word: &BracketWord, delta: f64) -> Result<FlowProgram> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidArgument(format!("shift δ must be positive, got {delta}")));
    }
    let base = commutator_flow(spec, word)?;
    let r = word.len() as u32;
    let root = delta.powf(1.0 / r as f64);
    let forward = base.map_schedules(|s| match s {
        Schedule::Linear(sign) => Schedule::SignedRoot {
            sign: *sign,
            order: r,
            offset: delta,
        },
        other => *other,
    });
    let frozen = base
        .map_schedules(|s| match s {
            Schedule::Linear(sign) => Schedule::Const {
                value: sign.value() * root,
                delta,
            },
            other => *other,
        })
        .inverse();
    Ok(frozen.after(&forward))
}

/// One row of a Taylor check.
#[derive(Debug, Clone, Serialize)]
pub struct TaylorOrder {
    pub order: usize,
    pub derivative: Vec<f64>,
    pub target: Vec<f64>,
    pub norm: f64,
    pub target_norm: f64,
    /// Absolute deviation for vanishing orders, relative deviation for the
    /// leading order.
    pub error: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TaylorReport {
    pub word: BracketWord,
    pub point: Vec<f64>,
    pub step: f64,
    pub orders: Vec<TaylorOrder>,
}

impl TaylorReport {
    pub fn passed(&self) -> bool {
        self.orders.iter().all(|o| o.pass)
    }
}

/// Relative tolerance on the leading derivative.
pub const LEADING_REL_TOL: f64 = 0.01;
/// Vanishing derivatives must satisfy `|d^m| < VANISHING_TOL·(1 + |r! X_w|)`.
pub const VANISHING_TOL: f64 = 1e-3;

/// Default finite-difference step for a word of length `r`. Steps between
/// 0.005 and 0.02 resolve cubic polynomial fields; larger steps let the
/// higher Taylor terms leak into the vanishing orders.
pub fn default_taylor_step(_r: usize) -> f64 {
    0.01
}

/// Finite-difference check that `G_{w t}(x0)` has vanishing derivatives of
/// orders `1..r-1` and `r`-th derivative `r!·X_w(x0)`.
pub fn verify_taylor(
    spec: &DistributionSpec,
    word: &BracketWord,
    x0: &[f64],
    h: f64,
    tol: f64,
) -> Result<TaylorReport> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    let program = commutator_flow(spec, word)?;
    let r = word.len();
    let bracket = spec.iterated_bracket(word)?;
    let factorial: f64 = (1..=r).map(|k| k as f64).product();
    let target: Vec<f64> = bracket.eval(x0).iter().map(|v| v * factorial).collect();
    let target_norm = norm(&target);

    let derivatives = central_derivatives(
        |t| {
            let y = apply_program(spec, &program, x0, t, tol)?;
            Ok::<_, Error>(y.iter().zip(x0).map(|(a, b)| a - b).collect())
        },
        h,
        r,
    )?;

    let orders = derivatives
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            let order = i + 1;
            let n = norm(&d);
            if order < r {
                let threshold = VANISHING_TOL * (1.0 + target_norm);
                TaylorOrder {
                    order,
                    norm: n,
                    target: vec![0.0; d.len()],
                    target_norm: 0.0,
                    error: n,
                    threshold,
                    pass: n < threshold,
                    derivative: d,
                }
            } else {
                let diff: Vec<f64> = d.iter().zip(&target).map(|(a, b)| a - b).collect();
                let dev = norm(&diff);
                // A vanishing bracket has no relative scale; fall back to the
                // absolute vanishing-order test.
                let (error, threshold) = if target_norm > 0.0 {
                    (dev / target_norm, LEADING_REL_TOL)
                } else {
                    (dev, VANISHING_TOL)
                };
                TaylorOrder {
                    order,
                    norm: n,
                    target: target.clone(),
                    target_norm,
                    error,
                    threshold,
                    pass: error < threshold,
                    derivative: d,
                }
            }
        })
        .collect();

    Ok(TaylorReport {
        word: word.clone(),
        point: x0.to_vec(),
        step: h,
        orders,
    })
}

/// Velocity at `t = 0` of a shifted family, by a fourth-order central
/// difference with nodes at most `δ/8` from the origin.
pub fn approx_velocity(
    spec: &DistributionSpec,
    shifted: &FlowProgram,
    delta: f64,
    x0: &[f64],
    tol: f64,
) -> Result<Vec<f64>> {
    let h = delta / 16.0;
    let d = central_derivatives(
        |t| {
            let y = apply_program(spec, shifted, x0, t, tol)?;
            Ok::<_, Error>(y.iter().zip(x0).map(|(a, b)| a - b).collect())
        },
        h,
        1,
    )?;
    Ok(d.into_iter().next().unwrap_or_default())
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::DEFAULT_TOL;
    use crate::scenario::builtin;

    fn spec(name: &str) -> DistributionSpec {
        builtin(name).unwrap().spec().unwrap()
    }

    fn w(s: &str) -> BracketWord {
        s.parse().unwrap()
    }

    #[test]
    fn flow_counts() {
        assert_eq!(flow_count(1).unwrap(), 1);
        assert_eq!(flow_count(2).unwrap(), 4);
        assert_eq!(flow_count(3).unwrap(), 10);
        assert_eq!(flow_count(4).unwrap(), 22);
        assert!(flow_count(0).is_err());
    }

    #[test]
    fn commutator_atom_order() {
        let s = spec("heisenberg");
        let g = commutator_flow(&s, &w("2")).unwrap();
        assert_eq!(g.atoms(), &[Atom::new(2, Schedule::Linear(Sign::Plus))]);
        let g = commutator_flow(&s, &w("1,2")).unwrap();
        let expected = [
            (2, Sign::Minus),
            (1, Sign::Plus),
            (2, Sign::Plus),
            (1, Sign::Minus),
        ];
        assert_eq!(g.len(), 4);
        for (a, (k, sign)) in g.atoms().iter().zip(expected) {
            assert_eq!(*a, Atom::new(k, Schedule::Linear(sign)));
        }
        assert!(commutator_flow(&s, &w("1,3")).is_err());
    }

    #[test]
    fn heisenberg_commutator_is_vertical_translation() {
        let s = spec("heisenberg");
        let g = commutator_flow(&s, &w("1,2")).unwrap();
        let y = apply_program(&s, &g, &[0.0; 3], 0.2, DEFAULT_TOL).unwrap();
        assert!((y[2] - 0.04).abs() < 1e-12 && y[0].abs() < 1e-14 && y[1].abs() < 1e-14);
        let x0 = [0.1, 0.2, 0.3];
        let y = apply_program(&s, &g, &x0, 0.2, DEFAULT_TOL).unwrap();
        let back = apply_program(&s, &g.inverse(), &y, 0.2, DEFAULT_TOL).unwrap();
        assert!(back.iter().zip(&x0).all(|(a, b)| (a - b).abs() < 1e-9));
    }

    #[test]
    fn reparametrized_flow_properties() {
        let s = spec("heisenberg");
        let g = reparametrized_flow(&s, &w("1,2")).unwrap();
        let y = apply_program(&s, &g, &[0.0; 3], 0.04, DEFAULT_TOL).unwrap();
        assert!((y[2] - 0.04).abs() < 1e-12);
        assert_eq!(apply_program(&s, &g, &[0.3, 0.1, 0.0], 0.0, DEFAULT_TOL).unwrap(), vec![0.3, 0.1, 0.0]);
        assert!(matches!(
            apply_program(&s, &g, &[0.0; 3], -0.01, DEFAULT_TOL),
            Err(Error::ScheduleDomain { .. })
        ));
        assert_eq!(reparametrized_flow(&s, &w("2")).unwrap(), commutator_flow(&s, &w("2")).unwrap());
    }

    #[test]
    fn shifted_flow_structure_and_identity() {
        let s = spec("martinet");
        for word in ["1", "1,2", "1,1,2"] {
            let word = w(word);
            let f = shifted_flow(&s, &word, 0.1).unwrap();
            assert_eq!(f.len(), 2 * flow_count(word.len()).unwrap());
            let x0 = [0.3, -0.2, 0.1];
            let y = apply_program(&s, &f, &x0, 0.0, DEFAULT_TOL).unwrap();
            assert!(y.iter().zip(&x0).all(|(a, b)| (a - b).abs() < 1e-8));
        }
        assert!(shifted_flow(&s, &w("1"), 0.0).is_err());
    }

    #[test]
    fn heisenberg_shifted_flow_translates() {
        let s = spec("heisenberg");
        let (a, b, c) = (0.2, -0.1, 0.05);
        for &delta in &[0.1, 0.5, 0.9] {
            let f = shifted_flow(&s, &w("1,2"), delta).unwrap();
            for &t in &[-0.04, 0.03] {
                let y = apply_program(&s, &f, &[a, b, c], t, DEFAULT_TOL).unwrap();
                assert!((y[0] - a).abs() < 1e-12 && (y[1] - b).abs() < 1e-12);
                assert!((y[2] - (c + t)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_letter_shift_is_the_flow() {
        let s = spec("martinet");
        let f = shifted_flow(&s, &w("2"), 0.2).unwrap();
        let x0 = [0.4, 0.0, 0.0];
        let y = apply_program(&s, &f, &x0, 0.07, DEFAULT_TOL).unwrap();
        let direct = crate::flows::integrate_flow(&s, s.generator(2).unwrap(), &x0, 0.07, DEFAULT_TOL).unwrap();
        assert!(y.iter().zip(&direct).all(|(a, b)| (a - b).abs() < 1e-9));
    }

    #[test]
    fn taylor_heisenberg_and_martinet() {
        let s = spec("heisenberg");
        let rep = verify_taylor(&s, &w("1,2"), &[0.0; 3], 0.1, DEFAULT_TOL).unwrap();
        assert!(rep.passed());
        assert!(rep.orders[0].norm < 1e-8);
        assert!((rep.orders[1].derivative[2] - 2.0).abs() < 1e-6);

        let rep = verify_taylor(&s, &w("2"), &[0.5, 0.0, 0.0], 0.05, DEFAULT_TOL).unwrap();
        assert!((rep.orders[0].derivative[2] - 0.5).abs() < 1e-8);

        let m = spec("martinet");
        let rep = verify_taylor(&m, &w("1,1,2"), &[0.0; 3], default_taylor_step(3), DEFAULT_TOL).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert!((rep.orders[2].derivative[2] - 12.0).abs() < 0.12);
    }

    #[test]
    fn velocity_of_martinet_shift_has_closed_form() {
        // G_{(1,2)s}(a,b,c) = (a, b, c + 2a s^2 + s^3), so the shifted family
        // moves x3 at rate 2a + 1.5 δ^{1/2} at t = 0.
        let s = spec("martinet");
        for &delta in &[0.2, 0.05] {
            let f = shifted_flow(&s, &w("1,2"), delta).unwrap();
            let v = approx_velocity(&s, &f, delta, &[0.5, 0.0, 0.0], DEFAULT_TOL).unwrap();
            let expected = 1.0 + 1.5 * delta.sqrt();
            assert!(v[0].abs() < 1e-7 && v[1].abs() < 1e-7);
            assert!((v[2] - expected).abs() < 1e-6, "{v:?} vs {expected}");
        }
    }
}
