use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::commutator::{reparametrized_flow, shifted_flow};
use crate::error::{Error, Result};
use crate::fields::{BracketWord, DistributionSpec};
use crate::flows::{apply_durations, Atom, FlowProgram, Schedule};
use crate::stencil::central_derivatives;

/// `F(s) = f^{(1)}_{s_1} ∘ ... ∘ f^{(M)}_{s_M}(y)`: one shifted family per
/// frame word, the last factor applied first.
#[derive(Debug, Clone)]
pub struct EndpointMap<'a> {
    spec: &'a DistributionSpec,
    words: Vec<BracketWord>,
    factors: Vec<FlowProgram>,
    reparametrized: Vec<FlowProgram>,
    rows: Vec<usize>,
    delta: f64,
    tol: f64,
}

/// One realized flow of the composition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leg {
    /// 1-based frame factor the flow belongs to.
    pub factor: usize,
    pub generator: usize,
    pub duration: f64,
}

impl<'a> EndpointMap<'a> {
    /// `rows` are the chart coordinates (0-based) used when the frame has
    /// fewer fields than the dimension.
    pub fn new(
        spec: &'a DistributionSpec,
        words: &[BracketWord],
        rows: &[usize],
        delta: f64,
        tol: f64,
    ) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::InvalidArgument("frame has no words".into()));
        }
        if rows.len() != words.len() || rows.iter().any(|&r| r >= spec.dim()) {
            return Err(Error::InvalidArgument(format!(
                "chart rows {rows:?} do not match {} frame words in dimension {}",
                words.len(),
                spec.dim()
            )));
        }
        let factors = words
            .iter()
            .map(|w| shifted_flow(spec, w, delta))
            .collect::<Result<Vec<_>>>()?;
        let reparametrized = words
            .iter()
            .map(|w| reparametrized_flow(spec, w))
            .collect::<Result<Vec<_>>>()?;
        Ok(EndpointMap {
            spec,
            words: words.to_vec(),
            factors,
            reparametrized,
            rows: rows.to_vec(),
            delta,
            tol,
        })
    }

    pub fn spec(&self) -> &'a DistributionSpec {
        self.spec
    }

    pub fn words(&self) -> &[BracketWord] {
        &self.words
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Number of parameters `M`.
    pub fn arity(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[FlowProgram] {
        &self.factors
    }

    fn check(&self, s: &[f64]) -> Result<()> {
        if s.len() != self.arity() {
            return Err(Error::DimensionMismatch {
                expected: self.arity(),
                found: s.len(),
            });
        }
        Ok(())
    }

    /// Realized `(generator, duration)` flows of factor `l` at `t`.
    ///
    /// Below `t = -δ` the root schedules are undefined; there the factor is
    /// continued by `g_u := (g_{-u})^{-1}` for `u = t + δ < 0`, which agrees
    /// with the flow identity on the other side and leaves `|t| < δ` untouched.
    fn factor_durations(&self, l: usize, t: f64) -> Result<Vec<(usize, f64)>> {
        let u = t + self.delta;
        if u >= 0.0 || self.words[l].len() == 1 {
            return self.factors[l].realize(t);
        }
        let invert = |d: Vec<(usize, f64)>| d.into_iter().rev().map(|(k, v)| (k, -v));
        let g = &self.reparametrized[l];
        Ok(invert(g.realize(-u)?).chain(invert(g.realize(self.delta)?)).collect())
    }

    /// Realized flows in application order.
    pub fn legs(&self, s: &[f64]) -> Result<Vec<Leg>> {
        self.check(s)?;
        let mut out = Vec::new();
        for l in (0..self.arity()).rev() {
            for (generator, duration) in self.factor_durations(l, s[l])? {
                out.push(Leg {
                    factor: l + 1,
                    generator,
                    duration,
                });
            }
        }
        Ok(out)
    }

    /// The whole composition at `s` as one program with constant schedules.
    pub fn flattened(&self, s: &[f64]) -> Result<FlowProgram> {
        Ok(FlowProgram::new(
            self.legs(s)?
                .into_iter()
                .map(|leg| {
                    Atom::new(
                        leg.generator,
                        Schedule::Const {
                            value: leg.duration,
                            delta: self.delta,
                        },
                    )
                })
                .collect(),
        ))
    }

    pub fn eval(&self, y: &[f64], s: &[f64]) -> Result<Vec<f64>> {
        self.check(s)?;
        let mut x = y.to_vec();
        for l in (0..self.arity()).rev() {
            let durations = self.factor_durations(l, s[l])?;
            x = apply_durations(self.spec, &durations, &x, self.tol).map_err(|e| e.at_factor(l + 1))?;
        }
        Ok(x)
    }

    /// Raw `N×M` Jacobian by fourth-order central differences with step `h`,
    /// one column per parameter (computed in parallel).
    pub fn jacobian(&self, y: &[f64], s: &[f64], h: f64) -> Result<DMatrix<f64>> {
        self.check(s)?;
        let n = self.spec.dim();
        let columns = (0..self.arity())
            .into_par_iter()
            .map(|l| {
                let d = central_derivatives(
                    |t| {
                        let mut p = s.to_vec();
                        p[l] += t;
                        self.eval(y, &p)
                    },
                    h,
                    1,
                )?;
                Ok(d.into_iter().next().unwrap_or_default())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        let data: Vec<f64> = columns.into_iter().flatten().collect();
        Ok(DMatrix::from_column_slice(n, self.arity(), &data))
    }

    /// Rows of `m` belonging to the chart coordinates.
    pub fn chart(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        if self.rows.len() == m.nrows() && self.rows.iter().enumerate().all(|(i, &r)| i == r) {
            m.clone()
        } else {
            m.select_rows(self.rows.iter())
        }
    }

    /// Chart coordinates of a point.
    pub fn chart_point(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|&r| x[r]).collect()
    }

    /// Default differencing step `δ/100`.
    pub fn default_step(&self) -> f64 {
        self.delta / 100.0
    }
}
