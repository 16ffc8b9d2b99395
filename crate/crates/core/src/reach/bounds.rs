use rayon::prelude::*;
use serde::Serialize;

use crate::commutator::flow_count;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::fields::{BracketWord, DistributionSpec};
use crate::filtration::{best_minor, frame_values};

use super::endpoint::EndpointMap;

/// Safety factor applied to the sampled determinant minimum.
pub const C0_SAFETY: f64 = 0.9;
/// Inflation applied to the sampled derivative sums.
pub const C1_INFLATION: f64 = 1.1;

/// Sampled lower bound on the frame determinant and upper bound on the
/// generators' `C^{μ+3}` norms over a region.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsEstimate {
    pub c0: f64,
    pub c1: f64,
    pub samples: usize,
    /// Derivative order used for `C1` (`μ + 3`).
    pub order: usize,
    pub min_det: f64,
    /// True when at least one component norm was raised to the floor 1.
    pub floor_applied: bool,
}

/// All partial derivatives of `e` of total order `<= order`, keyed by the
/// sorted list of differentiation variables. Zero derivatives are omitted.
pub fn partial_derivatives(e: &Expr, dim: usize, order: usize) -> Vec<(Vec<usize>, Expr)> {
    let mut out = vec![(Vec::new(), e.clone())];
    let mut frontier = vec![(Vec::<usize>::new(), e.clone())];
    for _ in 0..order {
        let mut next = Vec::new();
        for (alpha, d) in &frontier {
            let first = alpha.last().copied().unwrap_or(0);
            for v in first..dim {
                let dd = d.diff(v);
                if dd.is_zero() {
                    continue;
                }
                let mut beta = alpha.clone();
                beta.push(v);
                next.push((beta, dd));
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// `C0 = 0.9 · min |det|` of the best square minor of the frame values over
/// the samples; `C1 = 1.1 · Σ_{j,ℓ} max{1, max_x Σ_{|α| <= μ+3} |∂^α X^j_ℓ(x)|}`.
pub fn estimate_bounds(
    spec: &DistributionSpec,
    words: &[BracketWord],
    samples: &[Vec<f64>],
    mu: usize,
    rank_tol: f64,
) -> Result<BoundsEstimate> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no sample points".into()));
    }
    let order = mu + 3;
    let dets = samples
        .par_iter()
        .map(|x| {
            let values = frame_values(spec, words, x)?;
            Ok(best_minor(&values).1.abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    let min_det = dets.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_det >= rank_tol) {
        let found = crate::filtration::numerical_rank(
            &frame_values(spec, words, &samples[dets.iter().position(|d| *d == min_det).unwrap_or(0)])?,
            rank_tol,
        );
        return Err(Error::FrameDeficient {
            found,
            needed: words.len(),
        });
    }

    let components: Vec<&Expr> = spec.generators().flat_map(|g| g.components().iter()).collect();
    let norms = components
        .par_iter()
        .map(|e| {
            let partials = partial_derivatives(e, spec.dim(), order);
            samples
                .iter()
                .map(|x| partials.iter().map(|(_, d)| d.eval(x).abs()).sum::<f64>())
                .fold(0.0, f64::max)
        })
        .collect::<Vec<f64>>();
    let floor_applied = norms.iter().any(|&n| n < 1.0);
    let c1 = C1_INFLATION * norms.iter().map(|&n| n.max(1.0)).sum::<f64>();
    Ok(BoundsEstimate {
        c0: C0_SAFETY * min_det,
        c1,
        samples: samples.len(),
        order,
        min_det,
        floor_applied,
    })
}

/// Closed-form radius from the bounds, with user-chosen constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormulaRadius {
    /// Exponent `6·n_μ·(μ+3)·M·(2M+1)`.
    pub exponent: u64,
    pub delta_o: f64,
    pub r_o: f64,
    pub log10_delta_o: f64,
    pub log10_r_o: f64,
    pub k: f64,
    pub k_prime: f64,
    /// The constants are not known, so the value only shows the formula's shape.
    pub certified: bool,
}

/// `6·n_μ·(μ+3)·M·(2M+1)` with `n_μ = 2^μ + 2^(μ-1) - 2`.
pub fn radius_exponent(mu: usize, m: usize) -> Result<u64> {
    if m == 0 {
        return Err(Error::InvalidArgument("frame size must be positive".into()));
    }
    let n = flow_count(mu)? as u64;
    let (mu, m) = (mu as u64, m as u64);
    6u64.checked_mul(n)
        .and_then(|v| v.checked_mul(mu + 3))
        .and_then(|v| v.checked_mul(m))
        .and_then(|v| v.checked_mul(2 * m + 1))
        .ok_or_else(|| Error::InvalidArgument("exponent overflows".into()))
}

/// `δ_o = min{K C0^μ / C1^{μN}, δ_max}` and `r_o = K' δ_o min{C0, C0²} / C1^N`,
/// evaluated in log space since `C1^N` overflows for realistic inputs.
pub fn formula_radius(c0: f64, c1: f64, mu: usize, m: usize, delta_max: f64, k: f64, k_prime: f64) -> Result<FormulaRadius> {
    if !(c0 > 0.0) || !(c1 >= 1.0) {
        return Err(Error::InvalidArgument(format!("need C0 > 0 and C1 >= 1, got C0 = {c0}, C1 = {c1}")));
    }
    if !(delta_max > 0.0 && delta_max < 1.0) {
        return Err(Error::InvalidArgument(format!("δ_max must lie in (0, 1), got {delta_max}")));
    }
    if !(k > 0.0) || !(k_prime > 0.0) {
        return Err(Error::InvalidArgument("constants K, K' must be positive".into()));
    }
    let n = radius_exponent(mu, m)?;
    let nf = n as f64;
    let ln_c1 = c1.ln();
    let ln_delta = (k.ln() + mu as f64 * c0.ln() - mu as f64 * nf * ln_c1).min(delta_max.ln());
    let ln_r = k_prime.ln() + ln_delta + c0.min(c0 * c0).ln() - nf * ln_c1;
    Ok(FormulaRadius {
        exponent: n,
        delta_o: ln_delta.exp(),
        r_o: ln_r.exp(),
        log10_delta_o: ln_delta / std::f64::consts::LN_10,
        log10_r_o: ln_r / std::f64::consts::LN_10,
        k,
        k_prime,
        certified: false,
    })
}

/// Largest `δ` on a halving ladder, starting from `0.5·margin(y)/(1 + C1)`,
/// for which the endpoint map evaluates without leaving the domain at the
/// `2M` axis points `±(δ/2) e_ℓ`.
pub fn delta_max(
    spec: &DistributionSpec,
    words: &[BracketWord],
    rows: &[usize],
    y: &[f64],
    c1: f64,
    tol: f64,
) -> Result<f64> {
    let margin = spec.domain().margin(y);
    if !(margin > 0.0) {
        return Err(Error::DomainEscape {
            time: 0.0,
            point: y.to_vec(),
            atom: None,
            factor: None,
        });
    }
    let mut delta = (0.5 * margin / (1.0 + c1)).min(0.5);
    for _ in 0..60 {
        let map = EndpointMap::new(spec, words, rows, delta, tol)?;
        let m = words.len();
        let ok = (0..2 * m).into_par_iter().all(|i| {
            let mut s = vec![0.0; m];
            s[i / 2] = if i % 2 == 0 { 0.5 * delta } else { -0.5 * delta };
            !matches!(map.eval(y, &s), Err(Error::DomainEscape { .. }))
        });
        if ok {
            return Ok(delta);
        }
        delta *= 0.5;
    }
    Err(Error::InvalidArgument("no admissible δ found".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expr, ParseContext};
    use crate::fields::BoxDomain;
    use crate::scenario::builtin;

    fn words(s: &[&str]) -> Vec<BracketWord> {
        s.iter().map(|w| w.parse().unwrap()).collect()
    }

    #[test]
    fn exponents() {
        assert_eq!(radius_exponent(2, 3).unwrap(), 2520);
        assert_eq!(radius_exponent(1, 2).unwrap(), 240);
    }

    #[test]
    fn unit_bounds_give_delta_max() {
        let r = formula_radius(1.0, 1.0, 2, 3, 0.5, 1.0, 1.0).unwrap();
        assert_eq!(r.delta_o, 0.5);
        assert_eq!(r.r_o, 0.5);
        assert!(!r.certified);
        assert!(formula_radius(0.0, 1.0, 2, 3, 0.5, 1.0, 1.0).is_err());
        assert!(formula_radius(1.0, 0.5, 2, 3, 0.5, 1.0, 1.0).is_err());
        assert!(formula_radius(1.0, 1.0, 2, 3, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn partials_of_a_monomial() {
        let e = parse_expr("x1^2 * x2", &ParseContext::new(2)).unwrap();
        let d = partial_derivatives(&e, 2, 3);
        // x1^2 x2, 2x1x2, x1^2, 2x2, 2x1, 2
        assert_eq!(d.len(), 6);
        let total: f64 = d.iter().map(|(_, d)| d.eval(&[1.0, 1.0]).abs()).sum();
        assert_eq!(total, 1.0 + 2.0 + 1.0 + 2.0 + 2.0 + 2.0);
    }

    #[test]
    fn heisenberg_bounds() {
        let spec = builtin("heisenberg").unwrap().spec().unwrap();
        let region = BoxDomain::cube(3, 1.0);
        let b = estimate_bounds(&spec, &words(&["1", "2", "1,2"]), &region.grid(5), 2, 1e-8).unwrap();
        assert!((b.c0 - 0.9).abs() < 1e-12);
        // Five unit floors plus |x1| + 1 <= 2 for the third component of X2.
        assert!((b.c1 - 1.1 * 7.0).abs() < 1e-12);
        assert!(b.floor_applied);
    }

    #[test]
    fn involutive_bounds_hit_the_floor() {
        let spec = builtin("involutive2").unwrap().spec().unwrap();
        let b = estimate_bounds(&spec, &words(&["1", "2"]), &BoxDomain::cube(3, 1.0).grid(3), 1, 1e-8).unwrap();
        assert!((b.c1 - 1.1 * 6.0).abs() < 1e-12);
        assert_eq!(b.c0, 0.9);
    }

    #[test]
    fn degenerate_frame_is_rejected() {
        let spec = builtin("martinet").unwrap().spec().unwrap();
        let err = estimate_bounds(&spec, &words(&["1", "2", "1,2"]), &BoxDomain::cube(3, 1.0).grid(5), 3, 1e-8);
        assert!(matches!(err, Err(Error::FrameDeficient { .. })));
    }

    #[test]
    fn delta_max_is_admissible() {
        let spec = builtin("heisenberg").unwrap().spec().unwrap();
        let frame = words(&["1", "2", "1,2"]);
        let d = delta_max(&spec, &frame, &[0, 1, 2], &[0.0; 3], 7.7, 1e-10).unwrap();
        assert!(d > 0.0 && d <= 0.5 * 2.0 / 8.7);
    }
}
