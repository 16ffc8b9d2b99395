use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

use super::endpoint::EndpointMap;

/// Inflation applied to the sampled Lipschitz constant.
pub const LIPSCHITZ_INFLATION: f64 = 1.25;
/// Lower bound on the Lipschitz constant, to keep radii finite.
pub const LIPSCHITZ_FLOOR: f64 = 1e-9;
/// Chart Jacobians with `σ_min <= SINGULAR_TOL·σ_max` are treated as singular.
pub const SINGULAR_TOL: f64 = 1e-8;

/// How the Lipschitz constant of the Jacobian is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplingBudget {
    /// Points in the first round; every later round doubles the count.
    pub initial: usize,
    pub max_rounds: usize,
    /// Stop once the implied radius changes by at most this fraction.
    pub rel_change: f64,
    pub seed: u64,
}

impl Default for SamplingBudget {
    fn default() -> Self {
        SamplingBudget {
            initial: 8,
            max_rounds: 8,
            rel_change: 0.1,
            seed: 0,
        }
    }
}

/// Radius `r` such that the endpoint map's image contains the ball of radius
/// `r` about `F(0) = y` (in chart coordinates), with the measurements that
/// back it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadiusCertificate {
    pub center: Vec<f64>,
    pub delta: f64,
    pub words: Vec<String>,
    pub rows: Vec<usize>,
    /// Chart Jacobian at `s = 0`, row-major.
    pub jacobian: Vec<Vec<f64>>,
    /// Operator norm of the inverse chart Jacobian at `s = 0`.
    pub inverse_norm: f64,
    /// Sampled Lipschitz constant of the chart Jacobian, inflated and floored.
    pub lipschitz: f64,
    pub lipschitz_samples: usize,
    pub rounds: usize,
    pub radius: f64,
    /// `2·r·A` against its bound `δ/2`.
    pub preimage_radius: f64,
    pub preimage_bound: f64,
    /// `L` against its bound `1/(2·r·A²)`.
    pub lipschitz_bound: f64,
}

impl RadiusCertificate {
    /// Both conditions, allowing for rounding when one of them is tight.
    pub fn holds(&self) -> bool {
        let slack = 1.0 + 1e-12;
        self.radius > 0.0
            && self.preimage_radius <= self.preimage_bound * slack
            && self.lipschitz <= self.lipschitz_bound * slack
    }
}

fn operator_norm(m: &DMatrix<f64>) -> f64 {
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

fn min_singular(m: &DMatrix<f64>) -> f64 {
    m.singular_values().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Uniform point in the open ball of radius `radius` in `R^m`.
fn ball_point(rng: &mut ChaCha8Rng, m: usize, radius: f64) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
        let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.0 {
            let r = radius * rng.random::<f64>().powf(1.0 / m as f64);
            return g.iter().map(|v| v * r / n).collect();
        }
    }
}

fn radius_for(delta: f64, a: f64, l: f64) -> f64 {
    (delta / (4.0 * a)).min(1.0 / (2.0 * l * a * a))
}

/// Certifies a reachable ball about `y`.
///
/// With `A = ‖J(0)⁻¹‖` and `L` bounding `‖J(s) − J(s')‖/|s − s'|` on the
/// ball `|s| < δ/2`, the radius `r = min{δ/(4A), 1/(2LA²)}` makes the Newton
/// map `s ↦ s − J(0)⁻¹(F(s) − x)` send the ball of radius `2rA` into itself
/// for every `|x − y| <= r`. `L` is sampled on pairs `(s, 0)` and on nearby
/// pairs, inflated by 1.25, and the sample count doubles until the implied
/// radius settles.
pub fn certified_radius(map: &EndpointMap<'_>, y: &[f64], budget: &SamplingBudget) -> Result<RadiusCertificate> {
    let m = map.arity();
    let delta = map.delta();
    let h = map.default_step();
    let j0 = map.chart(&map.jacobian(y, &vec![0.0; m], h)?);
    let sigma_min = min_singular(&j0);
    let sigma_max = operator_norm(&j0);
    if !(sigma_min > SINGULAR_TOL * sigma_max) {
        return Err(Error::SingularJacobian { sigma_min });
    }
    let a = 1.0 / sigma_min;

    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let reach = 0.5 * delta * (1.0 - 1e-6);
    let near = delta / 20.0;
    let mut slope = 0.0f64;
    let mut samples = 0;
    let mut previous: Option<f64> = None;
    let mut count = budget.initial.max(1);
    for round in 1..=budget.max_rounds.max(1) {
        // Draw sequentially so results do not depend on thread scheduling.
        let mut pairs = Vec::with_capacity(2 * count);
        for _ in 0..count {
            let s = ball_point(&mut rng, m, reach);
            pairs.push((s.clone(), None));
            let step = ball_point(&mut rng, m, near);
            let partner: Vec<f64> = s.iter().zip(&step).map(|(u, v)| u + v).collect();
            let pn = partner.iter().map(|v| v * v).sum::<f64>().sqrt();
            let partner = if pn < reach {
                partner
            } else {
                partner.iter().map(|v| v * reach / pn).collect()
            };
            pairs.push((s, Some(partner)));
        }
        let slopes = pairs
            .par_iter()
            .map(|(s, other)| {
                let js = map.chart(&map.jacobian(y, s, h)?);
                let (jo, so) = match other {
                    None => (j0.clone(), vec![0.0; m]),
                    Some(p) => (map.chart(&map.jacobian(y, p, h)?), p.clone()),
                };
                let ds = s.iter().zip(&so).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
                Ok(if ds > 0.0 { operator_norm(&(js - jo)) / ds } else { 0.0 })
            })
            .collect::<Result<Vec<f64>>>()?;
        slope = slopes.into_iter().fold(slope, f64::max);
        samples += pairs.len();
        let l = (LIPSCHITZ_INFLATION * slope).max(LIPSCHITZ_FLOOR);
        let r = radius_for(delta, a, l);
        if let Some(prev) = previous {
            if (r - prev).abs() <= budget.rel_change * prev {
                let cert = RadiusCertificate {
                    center: y.to_vec(),
                    delta,
                    words: map.words().iter().map(|w| w.to_string()).collect(),
                    rows: map.rows().to_vec(),
                    jacobian: j0.row_iter().map(|row| row.iter().copied().collect()).collect(),
                    inverse_norm: a,
                    lipschitz: l,
                    lipschitz_samples: samples,
                    rounds: round,
                    radius: r,
                    preimage_radius: 2.0 * r * a,
                    preimage_bound: 0.5 * delta,
                    lipschitz_bound: 1.0 / (2.0 * r * a * a),
                };
                return Ok(cert);
            }
        }
        previous = Some(r);
        count *= 2;
    }
    Err(Error::BudgetExceeded {
        rounds: budget.max_rounds,
    })
}

/// `count` targets at distance `radius` from `y` in the chart coordinates
/// `rows`, with uniformly random directions; other coordinates are copied
/// from `y`.
pub fn probe_targets(y: &[f64], rows: &[usize], radius: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let dir = loop {
                let g: Vec<f64> = (0..rows.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
                let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                if n > 0.0 {
                    break g.into_iter().map(|v| v / n).collect::<Vec<f64>>();
                }
            };
            let mut t = y.to_vec();
            for (&r, d) in rows.iter().zip(&dir) {
                t[r] += radius * d;
            }
            t
        })
        .collect()
}
