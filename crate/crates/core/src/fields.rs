//! Vector fields on a coordinate box, their exact Jacobians, and iterated
//! Lie brackets.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;

/// Axis-aligned closed box `[lo_1, hi_1] x ... x [lo_N, hi_N]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::InvalidArgument("domain box has no coordinates".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidArgument("domain box is empty".into()));
        }
        Ok(BoxDomain { lower, upper })
    }

    /// The cube `[-half_width, half_width]^dim`.
    pub fn cube(dim: usize, half_width: f64) -> Self {
        BoxDomain {
            lower: vec![-half_width; dim],
            upper: vec![half_width; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    /// Distance from `x` to the boundary (negative outside).
    pub fn margin(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| (v - l).min(u - v))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    /// Box scaled about its centre.
    pub fn shrink(&self, factor: f64) -> Self {
        let c = self.center();
        let half: Vec<f64> = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (u - l) * factor)
            .collect();
        BoxDomain {
            lower: c.iter().zip(&half).map(|(c, h)| c - h).collect(),
            upper: c.iter().zip(&half).map(|(c, h)| c + h).collect(),
        }
    }

    /// Regular lattice with `per_axis` points on each of the first
    /// `min(N, 4)` axes; remaining axes are held at the centre.
    pub fn grid(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let per_axis = per_axis.max(1);
        let swept = self.dim().min(4);
        let center = self.center();
        let coord = |axis: usize, k: usize| {
            if per_axis == 1 {
                center[axis]
            } else {
                self.lower[axis]
                    + (self.upper[axis] - self.lower[axis]) * k as f64 / (per_axis - 1) as f64
            }
        };
        let total = per_axis.pow(swept as u32);
        (0..total)
            .map(|mut idx| {
                let mut p = center.clone();
                for axis in 0..swept {
                    p[axis] = coord(axis, idx % per_axis);
                    idx /= per_axis;
                }
                p
            })
            .collect()
    }
}

/// A smooth vector field on `R^N` given by closed-form components, with its
/// symbolic Jacobian precomputed.
#[derive(Debug, Clone)]
pub struct SmoothField {
    components: Vec<Expr>,
    /// `jacobian[i][j] = ∂X^i/∂x^j`.
    jacobian: Vec<Vec<Expr>>,
}

impl SmoothField {
    pub fn new(components: Vec<Expr>) -> Result<Self> {
        let dim = components.len();
        if dim == 0 {
            return Err(Error::InvalidArgument("field has no components".into()));
        }
        if let Some(max) = components.iter().filter_map(Expr::max_var).max() {
            if max >= dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: max + 1,
                });
            }
        }
        let jacobian = components
            .iter()
            .map(|c| (0..dim).map(|j| c.diff(j)).collect())
            .collect();
        Ok(SmoothField {
            components,
            jacobian,
        })
    }

    /// Constant coordinate field `∂/∂x^{axis+1}`.
    pub fn coordinate(dim: usize, axis: usize) -> Self {
        let components = (0..dim)
            .map(|i| if i == axis { Expr::one() } else { Expr::zero() })
            .collect();
        SmoothField::new(components).expect("coordinate field is well formed")
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn partial(&self, component: usize, var: usize) -> &Expr {
        &self.jacobian[component][var]
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.eval(x);
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.components.iter().map(|c| c.eval(x)).collect()
    }

    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.jacobian[i][j].eval(x))
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Expr::is_zero)
    }
}

impl fmt::Display for SmoothField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.components.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// `[X, Y] = JY·X − JX·Y`, computed symbolically.
pub fn lie_bracket(x: &SmoothField, y: &SmoothField) -> Result<SmoothField> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    let n = x.dim();
    let components = (0..n)
        .map(|i| {
            let mut acc = Expr::zero();
            for j in 0..n {
                let forward = y.partial(i, j).mul(&x.components[j]);
                let backward = x.partial(i, j).mul(&y.components[j]);
                acc = acc.add(&forward.sub(&backward));
            }
            acc
        })
        .collect();
    SmoothField::new(components)
}

/// Multi-index `(i_1, ..., i_r)` naming the right-nested bracket
/// `[X_{i_1}, [X_{i_2}, ... [X_{i_{r-1}}, X_{i_r}]...]]`. Indices are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BracketWord(Vec<usize>);

impl BracketWord {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyWord);
        }
        if let Some(&bad) = indices.iter().find(|&&i| i == 0) {
            return Err(Error::InvalidIndex {
                index: bad,
                generators: 0,
            });
        }
        Ok(BracketWord(indices))
    }

    pub fn single(index: usize) -> Self {
        BracketWord(vec![index.max(1)])
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn head(&self) -> usize {
        self.0[0]
    }

    /// The word without its first index, if any remains.
    pub fn tail(&self) -> Option<BracketWord> {
        (self.0.len() > 1).then(|| BracketWord(self.0[1..].to_vec()))
    }

    pub fn validate(&self, generators: usize) -> Result<()> {
        match self.0.iter().find(|&&i| i == 0 || i > generators) {
            Some(&index) => Err(Error::InvalidIndex { index, generators }),
            None => Ok(()),
        }
    }

    /// All words of exactly `len` letters over `generators`, lexicographic.
    pub fn all_of_length(generators: usize, len: usize) -> Vec<BracketWord> {
        let mut out = vec![Vec::new()];
        for _ in 0..len {
            out = out
                .into_iter()
                .flat_map(|w: Vec<usize>| {
                    (1..=generators).map(move |k| {
                        let mut next = w.clone();
                        next.push(k);
                        next
                    })
                })
                .collect();
        }
        out.into_iter().map(BracketWord).collect()
    }

    /// All words of length `1..=max_len`, by length then lexicographically.
    pub fn all_up_to(generators: usize, max_len: usize) -> Vec<BracketWord> {
        (1..=max_len)
            .flat_map(|len| Self::all_of_length(generators, len))
            .collect()
    }
}

impl fmt::Display for BracketWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, ")")
    }
}

impl std::str::FromStr for BracketWord {
    type Err = Error;

    /// Parses `1,2`, `(1,2)` or `1 2`.
    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
        let indices = inner
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| Error::InvalidArgument(format!("bad word index `{t}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        BracketWord::new(indices)
    }
}

/// Generators `X_1..X_p` on a coordinate box.
#[derive(Debug)]
pub struct DistributionSpec {
    name: String,
    generators: Vec<Arc<SmoothField>>,
    domain: BoxDomain,
    brackets: Mutex<HashMap<BracketWord, Arc<SmoothField>>>,
}

impl DistributionSpec {
    pub fn new(name: impl Into<String>, generators: Vec<SmoothField>, domain: BoxDomain) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::InvalidArgument("no generators".into()));
        }
        let dim = domain.dim();
        if let Some(g) = generators.iter().find(|g| g.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: g.dim(),
            });
        }
        Ok(DistributionSpec {
            name: name.into(),
            generators: generators.into_iter().map(Arc::new).collect(),
            domain,
            brackets: Mutex::new(HashMap::new()),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn generator_count(&self) -> usize {
        self.generators.len()
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    /// Generator `X_k`, 1-based.
    pub fn generator(&self, k: usize) -> Result<&SmoothField> {
        if k == 0 || k > self.generators.len() {
            return Err(Error::InvalidIndex {
                index: k,
                generators: self.generators.len(),
            });
        }
        Ok(&self.generators[k - 1])
    }

    pub fn generators(&self) -> impl Iterator<Item = &SmoothField> {
        self.generators.iter().map(|g| g.as_ref())
    }

    /// `X_w` for a right-nested word; memoized per spec.
    pub fn iterated_bracket(&self, word: &BracketWord) -> Result<Arc<SmoothField>> {
        word.validate(self.generator_count())?;
        if let Some(hit) = self.brackets.lock().expect("bracket cache").get(word) {
            return Ok(hit.clone());
        }
        let field = match word.tail() {
            None => self.generators[word.head() - 1].clone(),
            Some(tail) => {
                let inner = self.iterated_bracket(&tail)?;
                Arc::new(lie_bracket(&self.generators[word.head() - 1], &inner)?)
            }
        };
        self.brackets
            .lock()
            .expect("bracket cache")
            .insert(word.clone(), field.clone());
        Ok(field)
    }
}
