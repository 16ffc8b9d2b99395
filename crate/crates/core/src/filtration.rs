//! Ranks of the bracket filtration, minimal depth, and frame selection.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{BracketWord, DistributionSpec};

pub const DEFAULT_RANK_TOL: f64 = 1e-8;
pub const DEFAULT_LMAX: usize = 3;

/// Rank of the span of all brackets of length `<= ℓ` at one point, for
/// `ℓ = 1..=lmax`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankProfile {
    pub point: Vec<f64>,
    pub ranks: Vec<usize>,
    /// Per level: smallest retained singular value relative to the reference
    /// scale, or `None` when nothing is retained.
    pub kept_min: Vec<Option<f64>>,
    /// Per level: largest discarded singular value relative to the reference
    /// scale, or `None` when nothing is discarded.
    pub dropped_max: Vec<Option<f64>>,
}

impl RankProfile {
    /// Smallest level from which the ranks stay constant up to `lmax`,
    /// provided that level is below `lmax` or already full rank.
    pub fn stabilization_level(&self, dim: usize) -> Option<usize> {
        let lmax = self.ranks.len();
        let last = *self.ranks.last()?;
        let mut level = lmax;
        while level > 1 && self.ranks[level - 2] == last {
            level -= 1;
        }
        (level < lmax || last == dim).then_some(level)
    }
}

fn values_matrix(spec: &DistributionSpec, words: &[BracketWord], x: &[f64]) -> Result<DMatrix<f64>> {
    let n = spec.dim();
    let mut data = Vec::with_capacity(n * words.len());
    for w in words {
        data.extend(spec.iterated_bracket(w)?.eval(x));
    }
    Ok(DMatrix::from_column_slice(n, words.len(), &data))
}

fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Numerical rank: singular values above `threshold`.
pub fn numerical_rank(m: &DMatrix<f64>, threshold: f64) -> usize {
    singular_values(m).iter().filter(|&&s| s > threshold).count()
}

/// Filtration ranks at `x` for levels `1..=lmax`.
///
/// All levels share one absolute threshold, `rank_tol` times the largest
/// singular value at level `lmax`; since adding columns can only raise
/// singular values, the ranks are non-decreasing in the level.
pub fn filtration_ranks(spec: &DistributionSpec, x: &[f64], lmax: usize, rank_tol: f64) -> Result<RankProfile> {
    if lmax == 0 {
        return Err(Error::InvalidArgument("lmax must be at least 1".into()));
    }
    if x.len() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            found: x.len(),
        });
    }
    let words = BracketWord::all_up_to(spec.generator_count(), lmax);
    let full = values_matrix(spec, &words, x)?;
    let scale = singular_values(&full).first().copied().unwrap_or(0.0);
    let threshold = rank_tol * scale;

    let p = spec.generator_count();
    let mut ranks = Vec::with_capacity(lmax);
    let mut kept_min = Vec::with_capacity(lmax);
    let mut dropped_max = Vec::with_capacity(lmax);
    let mut count = 0;
    for level in 1..=lmax {
        count += p.pow(level as u32);
        let sv = singular_values(&full.columns(0, count).into_owned());
        let rank = sv.iter().filter(|&&s| s > threshold && scale > 0.0).count();
        let rel = |s: f64| if scale > 0.0 { s / scale } else { 0.0 };
        kept_min.push(rank.checked_sub(1).map(|i| rel(sv[i])));
        dropped_max.push(sv.get(rank).map(|&s| rel(s)));
        ranks.push(rank);
    }
    Ok(RankProfile {
        point: x.to_vec(),
        ranks,
        kept_min,
        dropped_max,
    })
}

/// Outcome of the depth analysis over a set of samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DepthSummary {
    /// Minimal depth, or `None` when some sample has not stabilized by `lmax`.
    pub mu: Option<usize>,
    pub uniform: bool,
    /// Common rank at depth `mu` (the largest one when not uniform).
    pub rank: usize,
    pub bracket_generating: bool,
}

pub fn minimal_depth(spec: &DistributionSpec, profiles: &[RankProfile]) -> Result<DepthSummary> {
    if profiles.is_empty() {
        return Err(Error::InvalidArgument("no sample points".into()));
    }
    let n = spec.dim();
    let levels: Option<Vec<usize>> = profiles.iter().map(|p| p.stabilization_level(n)).collect();
    let bracket_generating = profiles.iter().all(|p| p.ranks.last() == Some(&n));
    let Some(levels) = levels else {
        let rank = profiles.iter().filter_map(|p| p.ranks.last().copied()).max().unwrap_or(0);
        return Ok(DepthSummary {
            mu: None,
            uniform: false,
            rank,
            bracket_generating,
        });
    };
    let mu = levels.into_iter().max().unwrap_or(1);
    let at_mu: Vec<usize> = profiles.iter().map(|p| p.ranks[mu - 1]).collect();
    let rank = at_mu.iter().copied().max().unwrap_or(0);
    Ok(DepthSummary {
        mu: Some(mu),
        uniform: at_mu.iter().all(|&r| r == rank),
        rank,
        bracket_generating,
    })
}

/// Frame words with the best `M×M` minor of their values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Frame {
    pub point: Vec<f64>,
    pub words: Vec<BracketWord>,
    /// Coordinate rows (0-based) of the best minor; all rows when `M = N`.
    pub rows: Vec<usize>,
    /// Signed determinant of the selected minor.
    pub det: f64,
}

impl Frame {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

fn determinant(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        1.0
    } else {
        m.clone().lu().determinant()
    }
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in start..n {
            if n - i < k - current.len() {
                break;
            }
            current.push(i);
            rec(i + 1, n, k, current, out);
            current.pop();
        }
    }
    rec(0, n, k, &mut current, &mut out);
    out
}

/// Rows of an `N×M` matrix (`M <= N`) whose square minor has the largest
/// absolute determinant; ties keep the lexicographically first rows.
pub fn best_minor(values: &DMatrix<f64>) -> (Vec<usize>, f64) {
    let (n, m) = values.shape();
    if m == n {
        return ((0..n).collect(), determinant(values));
    }
    let mut best = (Vec::new(), 0.0f64);
    for rows in combinations(n, m) {
        let minor = values.select_rows(rows.iter());
        let det = determinant(&minor);
        if best.0.is_empty() || det.abs() > best.1.abs() {
            best = (rows, det);
        }
    }
    best
}

/// Values of the frame fields at `x`, one column per word.
pub fn frame_values(spec: &DistributionSpec, words: &[BracketWord], x: &[f64]) -> Result<DMatrix<f64>> {
    values_matrix(spec, words, x)
}

/// Greedy frame: sweeps words by length then lexicographically and keeps a
/// word when it raises the numerical rank of the kept values.
pub fn select_frame(spec: &DistributionSpec, x: &[f64], mu: usize, m: usize, rank_tol: f64) -> Result<Frame> {
    if x.len() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            found: x.len(),
        });
    }
    let candidates = BracketWord::all_up_to(spec.generator_count(), mu);
    let all = values_matrix(spec, &candidates, x)?;
    let threshold = rank_tol * singular_values(&all).first().copied().unwrap_or(0.0);

    let mut words: Vec<BracketWord> = Vec::new();
    let mut columns: Vec<usize> = Vec::new();
    for (j, word) in candidates.iter().enumerate() {
        if words.len() == m {
            break;
        }
        let mut trial = columns.clone();
        trial.push(j);
        let sub = all.select_columns(trial.iter());
        if threshold > 0.0 && numerical_rank(&sub, threshold) == trial.len() {
            columns = trial;
            words.push(word.clone());
        }
    }
    if words.len() < m {
        return Err(Error::FrameDeficient {
            found: words.len(),
            needed: m,
        });
    }
    let values = all.select_columns(columns.iter());
    let (rows, det) = best_minor(&values);
    Ok(Frame {
        point: x.to_vec(),
        words,
        rows,
        det,
    })
}

/// Depth and frame at a single point: the depth is where the point's own
/// rank profile stabilizes, and the frame has that many fields.
pub fn local_frame(spec: &DistributionSpec, x: &[f64], lmax: usize, rank_tol: f64) -> Result<(usize, Frame)> {
    let profile = filtration_ranks(spec, x, lmax, rank_tol)?;
    let Some(mu) = profile.stabilization_level(spec.dim()) else {
        return Err(Error::InvalidArgument(format!(
            "bracket ranks {:?} at {x:?} have not stabilized by length {lmax}",
            profile.ranks
        )));
    };
    let frame = select_frame(spec, x, mu, profile.ranks[mu - 1], rank_tol)?;
    Ok((mu, frame))
}

/// Full filtration analysis over a sample set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiltrationReport {
    pub scenario: String,
    pub dim: usize,
    pub lmax: usize,
    pub rank_tol: f64,
    pub samples: Vec<RankProfile>,
    pub mu: Option<usize>,
    pub uniform: bool,
    pub bracket_generating: bool,
    pub rank: usize,
    /// Frame chosen at `frame.point`, present for uniform results.
    pub frame: Option<Frame>,
    /// Why `frame` is absent even though the samples are uniform: the
    /// frame point can have fewer independent brackets than the samples.
    pub frame_issue: Option<String>,
}

/// Ranks at every sample (in parallel, reported in sample order), depth
/// summary, and a frame at `frame_point`.
pub fn analyze(
    spec: &DistributionSpec,
    samples: &[Vec<f64>],
    lmax: usize,
    rank_tol: f64,
    frame_point: &[f64],
) -> Result<FiltrationReport> {
    let profiles = samples
        .par_iter()
        .map(|x| filtration_ranks(spec, x, lmax, rank_tol))
        .collect::<Result<Vec<_>>>()?;
    let summary = minimal_depth(spec, &profiles)?;
    let (frame, frame_issue) = match summary.mu {
        Some(mu) if summary.uniform => match select_frame(spec, frame_point, mu, summary.rank, rank_tol) {
            Ok(f) => (Some(f), None),
            Err(e @ Error::FrameDeficient { .. }) => (None, Some(format!("at {frame_point:?}: {e}"))),
            Err(e) => return Err(e),
        },
        _ => (None, None),
    };
    Ok(FiltrationReport {
        scenario: spec.name().to_string(),
        dim: spec.dim(),
        lmax,
        rank_tol,
        samples: profiles,
        mu: summary.mu,
        uniform: summary.uniform,
        bracket_generating: summary.bracket_generating,
        rank: summary.rank,
        frame,
        frame_issue,
    })
}
