use serde::Serialize;

use crate::commutator::norm;
use crate::error::{Error, Result};
use crate::fields::DistributionSpec;
use crate::filtration::{filtration_ranks, select_frame, DEFAULT_LMAX, DEFAULT_RANK_TOL};
use crate::flows::DEFAULT_TOL;

use super::certificate::{certified_radius, RadiusCertificate, SamplingBudget};
use super::endpoint::EndpointMap;
use super::path::{distance, DPath};

pub const DEFAULT_STEER_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 50;
/// Armijo sufficient-decrease constant.
const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteerOptions {
    /// Required endpoint accuracy.
    pub tol: f64,
    pub max_iter: usize,
    /// Jacobian differencing step; `δ/100` when absent.
    pub h: Option<f64>,
}

impl Default for SteerOptions {
    fn default() -> Self {
        SteerOptions {
            tol: DEFAULT_STEER_TOL,
            max_iter: DEFAULT_MAX_ITER,
            h: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Steered {
    pub path: DPath,
    /// Parameters `s` of the endpoint map at the solution.
    pub params: Vec<f64>,
    pub iterations: usize,
    /// Chart residual of the Newton iteration at the solution.
    pub residual: f64,
}

fn clamp(s: &mut [f64], bound: f64) -> bool {
    let mut pinned = false;
    for v in s.iter_mut() {
        if *v > bound {
            *v = bound;
            pinned = true;
        } else if *v < -bound {
            *v = -bound;
            pinned = true;
        }
    }
    pinned
}

/// Damped Newton inversion of the endpoint map about `y`, followed by
/// re-integration of the realized flows as a [`DPath`].
pub fn steer(map: &EndpointMap<'_>, y: &[f64], target: &[f64], opts: &SteerOptions) -> Result<Steered> {
    let spec = map.spec();
    if target.len() != spec.dim() || y.len() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            found: target.len().min(y.len()),
        });
    }
    let m = map.arity();
    if target == y {
        return Ok(Steered {
            path: DPath::stationary(y),
            params: vec![0.0; m],
            iterations: 0,
            residual: 0.0,
        });
    }
    let h = opts.h.unwrap_or_else(|| map.default_step());
    let bound = 0.5 * map.delta() * (1.0 - 1e-9);
    let goal = map.chart_point(target);
    let residual_at = |s: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
        let x = map.eval(y, s)?;
        let r: Vec<f64> = map.chart_point(&x).iter().zip(&goal).map(|(a, b)| a - b).collect();
        Ok((x, r))
    };

    let mut s = vec![0.0; m];
    let (mut x, mut r) = residual_at(&s)?;
    let mut rn = norm(&r);
    let mut iterations = 0;
    while rn > 0.1 * opts.tol {
        if iterations == opts.max_iter {
            return Err(Error::NoConvergence {
                iterations,
                residual: rn,
            });
        }
        iterations += 1;
        let j = map.chart(&map.jacobian(y, &s, h)?);
        let rv = nalgebra::DVector::from_column_slice(&r);
        let Some(d) = j.clone().lu().solve(&rv) else {
            return Err(Error::SingularJacobian {
                sigma_min: j.singular_values().min(),
            });
        };
        let mut alpha = 1.0;
        let mut accepted = None;
        let mut pinned = false;
        let mut escape = None;
        while alpha >= MIN_STEP {
            let mut trial: Vec<f64> = s.iter().zip(d.iter()).map(|(a, b)| a - alpha * b).collect();
            pinned = clamp(&mut trial, bound);
            match residual_at(&trial) {
                Ok((xt, rt)) => {
                    let tn = norm(&rt);
                    if tn <= (1.0 - ARMIJO * alpha) * rn {
                        accepted = Some((trial, xt, rt, tn));
                        break;
                    }
                }
                Err(e @ (Error::DomainEscape { .. } | Error::StepUnderflow { .. })) => escape = Some(e),
                Err(e) => return Err(e),
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((st, xt, rt, tn)) => {
                s = st;
                x = xt;
                r = rt;
                rn = tn;
            }
            // At the evaluation noise floor no step decreases the residual.
            None if rn < opts.tol => break,
            None => {
                return Err(match escape {
                    Some(e) => e,
                    None if pinned => Error::HypercubeExhausted { residual: rn },
                    None => Error::NoConvergence {
                        iterations,
                        residual: rn,
                    },
                })
            }
        }
    }

    let miss = distance(&x, target);
    if m < spec.dim() && miss > opts.tol {
        return Err(Error::LeafMismatch { transverse: miss });
    }
    let legs: Vec<(usize, f64)> = map.legs(&s)?.into_iter().map(|l| (l.generator, l.duration)).collect();
    let path = DPath::integrate(spec, y, target, &legs, map.tol())?;
    if !(path.endpoint_error < opts.tol) {
        return Err(Error::EndpointMismatch {
            error: path.endpoint_error,
            tol: opts.tol,
        });
    }
    Ok(Steered {
        path,
        params: s,
        iterations,
        residual: rn,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConnectOptions {
    pub delta: f64,
    pub steer: SteerOptions,
    pub flow_tol: f64,
    pub rank_tol: f64,
    pub lmax: usize,
    /// Waypoint chaining stops with an error once a certified radius drops
    /// below this value.
    pub min_radius: f64,
    pub max_waypoints: usize,
    pub budget: SamplingBudget,
}

impl Default for ConnectOptions {
    fn default() -> Self {
        ConnectOptions {
            delta: 0.2,
            steer: SteerOptions::default(),
            flow_tol: DEFAULT_TOL,
            rank_tol: DEFAULT_RANK_TOL,
            lmax: DEFAULT_LMAX,
            min_radius: 1e-6,
            max_waypoints: 10_000,
            budget: SamplingBudget::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Connection {
    pub path: DPath,
    pub waypoints: Vec<Vec<f64>>,
    pub certificates: Vec<RadiusCertificate>,
}

/// Joins `from` to `to` by chaining steered pieces through waypoints on the
/// straight segment, each at most `0.9` of the local certified radius away.
///
/// Bracket generation is checked at both endpoints; the frame is reselected
/// at every waypoint.
pub fn connect(spec: &DistributionSpec, from: &[f64], to: &[f64], opts: &ConnectOptions) -> Result<Connection> {
    for p in [from, to] {
        if p.len() != spec.dim() {
            return Err(Error::DimensionMismatch {
                expected: spec.dim(),
                found: p.len(),
            });
        }
        if !spec.domain().contains(p) {
            return Err(Error::DomainEscape {
                time: 0.0,
                point: p.to_vec(),
                atom: None,
                factor: None,
            });
        }
    }
    let mut path = DPath::stationary(from);
    path.target = to.to_vec();
    path.endpoint_error = distance(from, to);
    let mut out = Connection {
        path,
        waypoints: Vec::new(),
        certificates: Vec::new(),
    };
    if from == to {
        return Ok(out);
    }

    let n = spec.dim();
    let depth = |x: &[f64]| -> Result<usize> {
        let profile = filtration_ranks(spec, x, opts.lmax, opts.rank_tol)?;
        match profile.stabilization_level(n) {
            Some(level) if profile.ranks.last() == Some(&n) => Ok(level),
            _ => Err(Error::InvalidArgument(format!(
                "distribution is not bracket generating at {x:?} up to length {} (ranks {:?})",
                opts.lmax, profile.ranks
            ))),
        }
    };
    let mu = depth(from)?.max(depth(to)?);

    loop {
        let y = out.path.endpoint.clone();
        let remaining = distance(&y, to);
        if remaining < opts.steer.tol {
            break;
        }
        if out.waypoints.len() == opts.max_waypoints {
            let radius = out.certificates.last().map_or(0.0, |c| c.radius);
            return Err(Error::Stalled { radius, remaining });
        }
        let frame = select_frame(spec, &y, mu, n, opts.rank_tol)?;
        let map = EndpointMap::new(spec, &frame.words, &frame.rows, opts.delta, opts.flow_tol)?;
        let budget = SamplingBudget {
            seed: opts.budget.seed.wrapping_add(out.waypoints.len() as u64),
            ..opts.budget
        };
        let cert = certified_radius(&map, &y, &budget)?;
        if cert.radius < opts.min_radius {
            return Err(Error::Stalled {
                radius: cert.radius,
                remaining,
            });
        }
        let step = 0.9 * cert.radius;
        let waypoint: Vec<f64> = if step >= remaining {
            to.to_vec()
        } else {
            y.iter().zip(to).map(|(a, b)| a + (b - a) * step / remaining).collect()
        };
        let piece = steer(&map, &y, &waypoint, &opts.steer)?;
        out.path.extend(piece.path)?;
        out.waypoints.push(waypoint);
        out.certificates.push(cert);
    }
    out.path.target = to.to_vec();
    out.path.endpoint_error = distance(&out.path.endpoint, to);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::BracketWord;
    use crate::reach::path::projected_area;
    use crate::scenario::builtin;

    fn words(s: &[&str]) -> Vec<BracketWord> {
        s.iter().map(|w| w.parse().unwrap()).collect()
    }

    #[test]
    fn heisenberg_steer_is_one_newton_step() {
        let spec = builtin("heisenberg").unwrap().spec().unwrap();
        let map = EndpointMap::new(&spec, &words(&["1", "2", "1,2"]), &[0, 1, 2], 0.2, DEFAULT_TOL).unwrap();
        let target = [0.01, -0.02, 0.005];
        let opts = SteerOptions {
            tol: 1e-9,
            ..Default::default()
        };
        let out = steer(&map, &[0.0; 3], &target, &opts).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(out.path.endpoint_error < 1e-9);
        assert_eq!(out.path.arcs.len(), 12);
        assert!(out.path.validate(&spec, 1e-9).unwrap().passed());
    }

    #[test]
    fn steering_to_the_base_point_is_empty() {
        let spec = builtin("heisenberg").unwrap().spec().unwrap();
        let map = EndpointMap::new(&spec, &words(&["1", "2", "1,2"]), &[0, 1, 2], 0.2, DEFAULT_TOL).unwrap();
        let y = [0.1, 0.2, 0.3];
        let out = steer(&map, &y, &y, &SteerOptions::default()).unwrap();
        assert!(out.path.arcs.is_empty());
        assert_eq!(out.params, vec![0.0; 3]);
    }

    #[test]
    fn martinet_half_radius_target() {
        let spec = builtin("martinet").unwrap().spec().unwrap();
        let map = EndpointMap::new(&spec, &words(&["1", "2", "1,2"]), &[0, 1, 2], 0.1, DEFAULT_TOL).unwrap();
        let y = [0.3, 0.0, 0.0];
        let cert = certified_radius(&map, &y, &SamplingBudget::default()).unwrap();
        let target = [0.3, 0.0, 0.5 * cert.radius];
        let out = steer(&map, &y, &target, &SteerOptions::default()).unwrap();
        assert!(out.path.endpoint_error < 1e-6);
    }

    #[test]
    fn leaf_targets_and_off_leaf_targets() {
        let spec = builtin("involutive2").unwrap().spec().unwrap();
        let map = EndpointMap::new(&spec, &words(&["1", "2"]), &[0, 1], 0.2, DEFAULT_TOL).unwrap();
        let y = [0.1, 0.1, 0.4];
        let ok = steer(&map, &y, &[0.13, 0.08, 0.4], &SteerOptions::default()).unwrap();
        assert!(ok.path.endpoint_error < 1e-8);
        assert!(matches!(
            steer(&map, &y, &[0.13, 0.08, 0.41], &SteerOptions::default()),
            Err(Error::LeafMismatch { .. })
        ));
    }

    #[test]
    fn parallel_parking() {
        let spec = builtin("heisenberg").unwrap().spec().unwrap();
        let to = [0.0, 0.0, 0.3];
        let c = connect(&spec, &[0.0; 3], &to, &ConnectOptions::default()).unwrap();
        assert!(c.path.endpoint_error < 1e-6);
        assert!(c.path.validate(&spec, 1e-6).unwrap().passed());
        assert!(c.waypoints.len() > 1);
        let area = projected_area(&c.path, 0, 1);
        assert!((area - 0.3).abs() < 0.02 * 0.3, "area {area}");
    }

    #[test]
    fn connecting_a_point_to_itself() {
        let spec = builtin("heisenberg").unwrap().spec().unwrap();
        let c = connect(&spec, &[0.2; 3], &[0.2; 3], &ConnectOptions::default()).unwrap();
        assert!(c.path.arcs.is_empty());
    }

    #[test]
    fn involutive_distribution_is_rejected() {
        let spec = builtin("involutive2").unwrap().spec().unwrap();
        assert!(connect(&spec, &[0.0; 3], &[0.0, 0.0, 0.1], &ConnectOptions::default()).is_err());
    }
}
