//! Dormand–Prince 5(4) integration of autonomous fields inside a box.

use crate::error::{Error, Result};
use crate::fields::{BoxDomain, SmoothField};

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Fifth minus fourth order weights: coefficients of the embedded error estimate.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

pub const MIN_STEP: f64 = 1e-14;
const MAX_STEPS: usize = 2_000_000;

/// Adaptive integrator settings. `tol` bounds the local error per unit time.
#[derive(Debug, Clone, Copy)]
pub struct Integrator {
    pub tol: f64,
    /// Upper bound on the step length (absolute), if any.
    pub max_step: Option<f64>,
}

impl Integrator {
    pub fn new(tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
        }
        Ok(Integrator { tol, max_step: None })
    }

    /// Flows `x0` along `field` for signed time `t`, calling `visit` at every
    /// accepted step with `(elapsed, point)`.
    pub fn integrate_with(
        &self,
        field: &SmoothField,
        domain: &BoxDomain,
        x0: &[f64],
        t: f64,
        mut visit: impl FnMut(f64, &[f64]),
    ) -> Result<Vec<f64>> {
        let n = field.dim();
        if x0.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: x0.len(),
            });
        }
        if !domain.contains(x0) {
            return Err(Error::DomainEscape {
                time: 0.0,
                point: x0.to_vec(),
                atom: None,
                factor: None,
            });
        }
        let mut x = x0.to_vec();
        if t == 0.0 {
            return Ok(x);
        }
        let dir = t.signum();
        let span = t.abs();
        let cap = self.max_step.map_or(span, |m| m.min(span));
        let mut h = cap.min(0.05);
        let mut elapsed = 0.0;

        let mut k = vec![vec![0.0; n]; 7];
        let mut stage = vec![0.0; n];
        let mut next = vec![0.0; n];
        field.eval_into(&x, &mut k[0]);

        for _ in 0..MAX_STEPS {
            let remaining = span - elapsed;
            if remaining <= 0.0 {
                return Ok(x);
            }
            let last = h >= remaining;
            let step = if last { remaining } else { h };
            let signed = dir * step;

            for s in 1..7 {
                for i in 0..n {
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate().take(s) {
                        acc += A[s][j] * kj[i];
                    }
                    stage[i] = x[i] + signed * acc;
                }
                field.eval_into(&stage, &mut k[s]);
            }
            // stage now holds the 5th-order solution (FSAL row).
            next.copy_from_slice(&stage);
            let mut err: f64 = 0.0;
            for i in 0..n {
                let mut e = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    e += E[j] * kj[i];
                }
                let scale = 1.0f64.max(x[i].abs()).max(next[i].abs());
                err = err.max((signed * e).abs() / scale);
            }
            // Error per unit time relative to the tolerance.
            let ratio = err / (self.tol * step);
            if ratio <= 1.0 {
                elapsed = if last { span } else { elapsed + step };
                x.copy_from_slice(&next);
                let (first, rest) = k.split_at_mut(1);
                first[0].copy_from_slice(&rest[5]);
                if !domain.contains(&x) {
                    return Err(Error::DomainEscape {
                        time: dir * elapsed,
                        point: x,
                        atom: None,
                        factor: None,
                    });
                }
                visit(dir * elapsed, &x);
                let grow = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
                h = (step * grow).min(cap);
            } else {
                if !ratio.is_finite() {
                    h = step * 0.1;
                } else {
                    h = step * (0.9 * ratio.powf(-0.2)).clamp(0.1, 0.9);
                }
                if h < MIN_STEP {
                    return Err(Error::StepUnderflow {
                        time: dir * elapsed,
                        step: h,
                    });
                }
            }
        }
        Err(Error::StepUnderflow {
            time: dir * elapsed,
            step: h,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expr, ParseContext};

    fn field(comps: &[&str]) -> SmoothField {
        let ctx = ParseContext::new(comps.len());
        SmoothField::new(comps.iter().map(|c| parse_expr(c, &ctx).unwrap()).collect()).unwrap()
    }

    #[test]
    fn rotation_is_accurate() {
        let rot = field(&["-x2", "x1"]);
        let dom = BoxDomain::cube(2, 5.0);
        let t = std::f64::consts::PI / 3.0;
        let x = Integrator::new(1e-10)
            .unwrap()
            .integrate_with(&rot, &dom, &[1.0, 0.0], t, |_, _| {})
            .unwrap();
        assert!((x[0] - t.cos()).abs() < 1e-9);
        assert!((x[1] - t.sin()).abs() < 1e-9);
    }

    #[test]
    fn exponential_growth_backward() {
        let f = field(&["x1"]);
        let dom = BoxDomain::cube(1, 10.0);
        let x = Integrator::new(1e-11)
            .unwrap()
            .integrate_with(&f, &dom, &[1.0], -1.5, |_, _| {})
            .unwrap();
        assert!((x[0] - (-1.5f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn escape_is_reported() {
        let f = field(&["1", "0"]);
        let dom = BoxDomain::cube(2, 1.0);
        let err = Integrator::new(1e-10)
            .unwrap()
            .integrate_with(&f, &dom, &[0.0, 0.0], 3.0, |_, _| {})
            .unwrap_err();
        match err {
            Error::DomainEscape { time, .. } => assert!(time > 1.0 && time <= 3.0),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn blow_up_underflows() {
        let f = field(&["x1^2"]);
        let dom = BoxDomain::cube(1, 1e300);
        let err = Integrator::new(1e-10)
            .unwrap()
            .integrate_with(&f, &dom, &[1.0], 2.0, |_, _| {})
            .unwrap_err();
        assert!(matches!(
            err,
            Error::StepUnderflow { .. } | Error::DomainEscape { .. }
        ));
    }
}
