//! Test-side oracles, kept independent of the library's symbolic layer.
#![allow(dead_code)]

use std::collections::BTreeMap;

use bracket_reach::reach::DPath;
use bracket_reach::DistributionSpec;
use rand::Rng;

/// Exact multivariate polynomial: exponent vector -> coefficient.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly {
    pub dim: usize,
    pub terms: BTreeMap<Vec<u32>, f64>,
}

impl Poly {
    pub fn zero(dim: usize) -> Self {
        Poly { dim, terms: BTreeMap::new() }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        let mut p = Poly::zero(dim);
        p.add_term(vec![0; dim], c);
        p
    }

    pub fn var(dim: usize, i: usize) -> Self {
        let mut e = vec![0; dim];
        e[i] = 1;
        let mut p = Poly::zero(dim);
        p.add_term(e, 1.0);
        p
    }

    pub fn add_term(&mut self, exps: Vec<u32>, c: f64) {
        let slot = self.terms.entry(exps).or_insert(0.0);
        *slot += c;
        if *slot == 0.0 {
            self.terms.retain(|_, v| *v != 0.0);
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), *c);
        }
        out
    }

    pub fn scale(&self, s: f64) -> Poly {
        let mut out = Poly::zero(self.dim);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c * s);
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero(self.dim);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }

    pub fn diff(&self, i: usize) -> Poly {
        let mut out = Poly::zero(self.dim);
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut f = e.clone();
                f[i] -= 1;
                out.add_term(f, c * e[i] as f64);
            }
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * e.iter().zip(x).map(|(k, v)| v.powi(*k as i32)).product::<f64>())
            .sum()
    }

    /// Source text in the scenario expression syntax.
    pub fn source(&self) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(e, c)| {
                let mut s = format!("({c:?})");
                for (i, k) in e.iter().enumerate() {
                    match k {
                        0 => {}
                        1 => s.push_str(&format!("*x{}", i + 1)),
                        k => s.push_str(&format!("*x{}^{k}", i + 1)),
                    }
                }
                s
            })
            .collect();
        parts.join(" + ")
    }
}

/// Vector field with polynomial components.
pub type PolyField = Vec<Poly>;

/// `[X, Y]_i = Σ_j X_j ∂_j Y_i − Y_j ∂_j X_i`.
pub fn poly_bracket(x: &PolyField, y: &PolyField) -> PolyField {
    let n = x.len();
    (0..n)
        .map(|i| {
            let mut acc = Poly::zero(n);
            for j in 0..n {
                acc = acc.add(&x[j].mul(&y[i].diff(j)));
                acc = acc.add(&y[j].mul(&x[i].diff(j)).scale(-1.0));
            }
            acc
        })
        .collect()
}

/// Right-nested bracket of the 1-based `word`.
pub fn poly_word(fields: &[PolyField], word: &[usize]) -> PolyField {
    let mut acc = fields[word[word.len() - 1] - 1].clone();
    for &k in word[..word.len() - 1].iter().rev() {
        acc = poly_bracket(&fields[k - 1], &acc);
    }
    acc
}

pub fn eval_field(f: &PolyField, x: &[f64]) -> Vec<f64> {
    f.iter().map(|p| p.eval(x)).collect()
}

/// Scenario text for polynomial generators on `[-2, 2]^N`.
pub fn poly_scenario(name: &str, fields: &[PolyField]) -> String {
    let dim = fields[0].len();
    let mut s = format!("name = {name}\ndim = {dim}\n\n[generators]\n");
    for (k, f) in fields.iter().enumerate() {
        let comps: Vec<String> = f.iter().map(Poly::source).collect();
        s.push_str(&format!("X{} = {}\n", k + 1, comps.join(", ")));
    }
    s.push_str("\n[domain]\nall = -2, 2\n");
    s
}

/// Random polynomial of degree at most `degree` in `dim` variables with
/// `terms` monomials and coefficients in `[-amp, amp]`.
pub fn random_poly(rng: &mut impl Rng, dim: usize, degree: u32, terms: usize, amp: f64) -> Poly {
    let mut p = Poly::zero(dim);
    for _ in 0..terms {
        let total = rng.random_range(0..=degree);
        let mut e = vec![0u32; dim];
        for _ in 0..total {
            e[rng.random_range(0..dim)] += 1;
        }
        p.add_term(e, rng.random_range(-amp..amp));
    }
    p
}

/// Classical RK4 with fixed step count.
pub fn rk4(f: impl Fn(&[f64]) -> Vec<f64>, x0: &[f64], t: f64, steps: usize) -> Vec<f64> {
    let h = t / steps as f64;
    let mut x = x0.to_vec();
    let axpy = |x: &[f64], k: &[f64], a: f64| -> Vec<f64> { x.iter().zip(k).map(|(u, v)| u + a * v).collect() };
    for _ in 0..steps {
        let k1 = f(&x);
        let k2 = f(&axpy(&x, &k1, h / 2.0));
        let k3 = f(&axpy(&x, &k2, h / 2.0));
        let k4 = f(&axpy(&x, &k3, h));
        for i in 0..x.len() {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    x
}

/// Steps so that RK4 runs with step at most `hmax`.
pub fn steps_for(t: f64, hmax: f64) -> usize {
    ((t.abs() / hmax).ceil() as usize).max(1)
}

/// Replays the arcs of `path` from its start with RK4.
pub fn replay(spec: &DistributionSpec, path: &DPath) -> Vec<f64> {
    let mut x = path.start.clone();
    for arc in &path.arcs {
        let field = spec.generator(arc.generator).unwrap();
        x = rk4(|y| field.eval(y), &x, arc.duration, steps_for(arc.duration, 1e-3));
    }
    x
}

/// Largest per-unit-time RK4 defect between consecutive arc samples.
pub fn sample_residual(spec: &DistributionSpec, path: &DPath) -> f64 {
    let mut worst = 0.0f64;
    for arc in &path.arcs {
        let field = spec.generator(arc.generator).unwrap();
        for pair in arc.samples.windows(2) {
            let (s0, x0) = &pair[0];
            let (s1, x1) = &pair[1];
            let ds = s1 - s0;
            if ds == 0.0 {
                continue;
            }
            let y = rk4(|y| field.eval(y), x0, ds, steps_for(ds, 2e-3));
            worst = worst.max(dist(&y, x1) / ds.abs());
        }
    }
    worst
}

/// Exact chaining of arc endpoints and samples.
pub fn chained(path: &DPath) -> bool {
    let mut prev = &path.start;
    for arc in &path.arcs {
        if &arc.start != prev || arc.samples.first().map(|s| &s.1) != Some(&arc.start) {
            return false;
        }
        if arc.samples.last().map(|s| &s.1) != Some(&arc.end) {
            return false;
        }
        prev = &arc.end;
    }
    prev == &path.endpoint
}

/// Shoelace area of the closed polygon through the `(a, b)` projections of
/// every sample.
pub fn shoelace(path: &DPath, a: usize, b: usize) -> f64 {
    let mut pts = vec![(path.start[a], path.start[b])];
    for arc in &path.arcs {
        for (_, x) in &arc.samples[1..] {
            pts.push((x[a], x[b]));
        }
    }
    let n = pts.len();
    0.5 * (0..n)
        .map(|i| {
            let (x0, y0) = pts[i];
            let (x1, y1) = pts[(i + 1) % n];
            x0 * y1 - x1 * y0
        })
        .sum::<f64>()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Uniform point in the open unit ball of `R^n`.
pub fn unit_ball(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    loop {
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = p.iter().map(|v| v * v).sum::<f64>();
        if r < 1.0 {
            return p;
        }
    }
}
