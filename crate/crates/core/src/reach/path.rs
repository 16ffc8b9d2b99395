use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::commutator::norm;
use crate::error::{Error, Result};
use crate::fields::DistributionSpec;
use crate::flows::sample_arc;
use crate::integrator::Integrator;

/// Samples per arc in emitted paths.
pub const ARC_SAMPLES: usize = 16;
/// Tolerance used when re-integrating arcs during validation.
pub const CHECK_TOL: f64 = 1e-12;
/// Bound on the per-unit-time flow defect between consecutive samples,
/// relative to the path scale.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Integral curve of one generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathArc {
    pub generator: usize,
    pub duration: f64,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    /// `(s, x(s))` with `s` running from 0 to `duration`.
    #[serde(skip)]
    pub samples: Vec<(f64, Vec<f64>)>,
}

/// Chain of generator arcs from `start` towards `target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DPath {
    pub start: Vec<f64>,
    pub target: Vec<f64>,
    pub endpoint: Vec<f64>,
    pub endpoint_error: f64,
    pub arcs: Vec<PathArc>,
}

/// Outcome of [`DPath::validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathCheck {
    pub chained: bool,
    pub max_residual: f64,
    pub residual_bound: f64,
    pub endpoint_error: f64,
    pub tol: f64,
}

impl PathCheck {
    pub fn passed(&self) -> bool {
        self.chained && self.max_residual < self.residual_bound && self.endpoint_error < self.tol
    }
}

impl DPath {
    /// The path that stays at `x`.
    pub fn stationary(x: &[f64]) -> Self {
        DPath {
            start: x.to_vec(),
            target: x.to_vec(),
            endpoint: x.to_vec(),
            endpoint_error: 0.0,
            arcs: Vec::new(),
        }
    }

    /// Integrates the `(generator, duration)` legs from `start`, dropping
    /// zero-duration legs; every arc begins exactly where the previous ended.
    pub fn integrate(
        spec: &DistributionSpec,
        start: &[f64],
        target: &[f64],
        legs: &[(usize, f64)],
        tol: f64,
    ) -> Result<Self> {
        let mut arcs = Vec::with_capacity(legs.len());
        let mut x = start.to_vec();
        for (i, &(k, d)) in legs.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let samples = sample_arc(spec, k, &x, d, ARC_SAMPLES, tol).map_err(|e| e.at_atom(i))?;
            let end = samples.last().map(|(_, p)| p.clone()).unwrap_or_else(|| x.clone());
            arcs.push(PathArc {
                generator: k,
                duration: d,
                start: x,
                end: end.clone(),
                samples,
            });
            x = end;
        }
        let endpoint_error = distance(&x, target);
        Ok(DPath {
            start: start.to_vec(),
            target: target.to_vec(),
            endpoint: x,
            endpoint_error,
            arcs,
        })
    }

    /// Appends `next`, which must start at this path's endpoint.
    pub fn extend(&mut self, next: DPath) -> Result<()> {
        if next.start != self.endpoint {
            return Err(Error::InvalidArgument("paths do not chain".into()));
        }
        self.arcs.extend(next.arcs);
        self.endpoint = next.endpoint;
        self.target = next.target;
        self.endpoint_error = next.endpoint_error;
        Ok(())
    }

    pub fn total_time(&self) -> f64 {
        self.arcs.iter().map(|a| a.duration.abs()).sum()
    }

    /// Largest coordinate magnitude along the path, plus one.
    pub fn scale(&self) -> f64 {
        let mut m = self.start.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for arc in &self.arcs {
            for (_, x) in &arc.samples {
                m = x.iter().fold(m, |m, v| m.max(v.abs()));
            }
        }
        1.0 + m
    }

    /// Checks exact chaining, the flow defect between consecutive samples of
    /// every arc (re-integrated at a tighter tolerance, per unit time), and
    /// the endpoint error against `tol`.
    pub fn validate(&self, spec: &DistributionSpec, tol: f64) -> Result<PathCheck> {
        let mut chained = true;
        let mut prev = &self.start;
        for arc in &self.arcs {
            let first = arc.samples.first().map(|(_, x)| x);
            let last = arc.samples.last().map(|(_, x)| x);
            chained &= arc.start == *prev && first == Some(&arc.start) && last == Some(&arc.end);
            prev = &arc.end;
        }
        chained &= *prev == self.endpoint;

        let integrator = Integrator::new(CHECK_TOL)?;
        let mut max_residual = 0.0f64;
        for arc in &self.arcs {
            let field = spec.generator(arc.generator)?;
            for pair in arc.samples.windows(2) {
                let (s0, x0) = &pair[0];
                let (s1, x1) = &pair[1];
                let ds = s1 - s0;
                if ds == 0.0 {
                    continue;
                }
                let y = integrator.integrate_with(field, spec.domain(), x0, ds, |_, _| {})?;
                max_residual = max_residual.max(distance(&y, x1) / ds.abs());
            }
        }
        Ok(PathCheck {
            chained,
            max_residual,
            residual_bound: RESIDUAL_TOL * self.scale(),
            endpoint_error: distance(&self.endpoint, &self.target),
            tol,
        })
    }

    /// Polyline rows `arc_index,k,sigma_value,s,x1..xN` with round-trip
    /// float formatting.
    pub fn to_csv(&self) -> String {
        let dim = self.start.len();
        let mut out = String::from("arc_index,k,sigma_value,s");
        for i in 1..=dim {
            let _ = write!(out, ",x{i}");
        }
        out.push('\n');
        for (i, arc) in self.arcs.iter().enumerate() {
            for (s, x) in &arc.samples {
                let _ = write!(out, "{i},{},{:?},{:?}", arc.generator, arc.duration, s);
                for v in x {
                    let _ = write!(out, ",{v:?}");
                }
                out.push('\n');
            }
        }
        out
    }

    /// Rebuilds a path from its manifest and polyline CSV.
    pub fn from_parts(manifest: &PathManifest, csv: &str) -> Result<Self> {
        let mut arcs: Vec<PathArc> = manifest
            .path
            .arcs
            .iter()
            .map(|a| PathArc {
                samples: Vec::new(),
                ..a.clone()
            })
            .collect();
        let mut lines = csv.lines().enumerate();
        let header = lines.next().map(|(_, l)| l).unwrap_or("");
        let columns = header.split(',').count();
        let dim = manifest.path.start.len();
        if columns != 4 + dim {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: format!("expected {} columns, found {columns}", 4 + dim),
            });
        }
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let bad = |c: usize, m: &str| Error::Parse {
                line: i + 1,
                column: c,
                message: m.to_string(),
            };
            if fields.len() != columns {
                return Err(bad(1, "wrong number of fields"));
            }
            let idx: usize = fields[0].parse().map_err(|_| bad(1, "bad arc index"))?;
            let k: usize = fields[1].parse().map_err(|_| bad(2, "bad generator index"))?;
            let arc = arcs.get_mut(idx).ok_or_else(|| bad(1, "arc index out of range"))?;
            if arc.generator != k {
                return Err(bad(2, "generator differs from manifest"));
            }
            let nums = fields[2..]
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|_| bad(3, "bad number"))?;
            if nums[0] != arc.duration {
                return Err(bad(3, "duration differs from manifest"));
            }
            arc.samples.push((nums[1], nums[2..].to_vec()));
        }
        Ok(DPath {
            arcs,
            ..manifest.path.clone()
        })
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str, manifest: &PathManifest) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{stem}.csv")), self.to_csv())?;
        std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(manifest)? + "\n")?;
        Ok(())
    }

    /// Reads a path written by [`DPath::write`].
    pub fn read(dir: &Path, stem: &str) -> Result<(Self, PathManifest)> {
        let manifest: PathManifest = serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
        let csv = std::fs::read_to_string(dir.join(format!("{stem}.csv")))?;
        let path = DPath::from_parts(&manifest, &csv)?;
        Ok((path, manifest))
    }
}

/// JSON companion of the polyline CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathManifest {
    pub scenario: String,
    #[serde(default)]
    pub params: std::collections::BTreeMap<String, f64>,
    pub tol: f64,
    pub csv: String,
    pub path: DPath,
    /// Certificates used while building the path, if any.
    #[serde(default)]
    pub certificates: Vec<serde_json::Value>,
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d)
}

/// Signed area enclosed by the projection of the path onto two coordinates,
/// by the shoelace formula over all samples (closing segment included).
pub fn projected_area(path: &DPath, a: usize, b: usize) -> f64 {
    let mut pts: Vec<(f64, f64)> = vec![(path.start[a], path.start[b])];
    for arc in &path.arcs {
        for (_, x) in arc.samples.iter().skip(1) {
            pts.push((x[a], x[b]));
        }
    }
    let n = pts.len();
    let mut twice = 0.0;
    for i in 0..n {
        let (x0, y0) = pts[i];
        let (x1, y1) = pts[(i + 1) % n];
        twice += x0 * y1 - x1 * y0;
    }
    0.5 * twice
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::DEFAULT_TOL;
    use crate::scenario::builtin;

    fn square(c: f64) -> Vec<(usize, f64)> {
        let a = c.sqrt();
        vec![(1, a), (2, a), (1, -a), (2, -a)]
    }

    #[test]
    fn heisenberg_square_lifts_area() {
        let spec = builtin("heisenberg").unwrap().spec().unwrap();
        let path = DPath::integrate(&spec, &[0.0; 3], &[0.0, 0.0, 0.04], &square(0.04), DEFAULT_TOL).unwrap();
        assert_eq!(path.arcs.len(), 4);
        assert!(path.endpoint_error < 1e-12);
        assert!((projected_area(&path, 0, 1) - 0.04).abs() < 1e-12);
        let check = path.validate(&spec, 1e-9).unwrap();
        assert!(check.passed(), "{check:?}");
    }

    #[test]
    fn csv_round_trip() {
        let spec = builtin("martinet").unwrap().spec().unwrap();
        let legs = [(1, 0.3), (2, -0.2), (1, 0.0), (2, 0.1)];
        let path = DPath::integrate(&spec, &[0.1, 0.0, 0.0], &[0.0; 3], &legs, DEFAULT_TOL).unwrap();
        assert_eq!(path.arcs.len(), 3);
        let manifest = PathManifest {
            scenario: "martinet".into(),
            params: Default::default(),
            tol: 1.0,
            csv: "p.csv".into(),
            path: path.clone(),
            certificates: vec![],
        };
        let dir = tempfile::tempdir().unwrap();
        path.write(dir.path(), "p", &manifest).unwrap();
        let (back, _) = DPath::read(dir.path(), "p").unwrap();
        assert_eq!(back, path);
        assert!(back.validate(&spec, 1.0).unwrap().passed());
    }

    #[test]
    fn tampered_path_fails_validation() {
        let spec = builtin("heisenberg").unwrap().spec().unwrap();
        let mut path = DPath::integrate(&spec, &[0.0; 3], &[0.0, 0.0, 0.01], &square(0.01), DEFAULT_TOL).unwrap();
        path.arcs[1].samples[3].1[2] += 1e-4;
        let check = path.validate(&spec, 1e-6).unwrap();
        assert!(check.chained);
        assert!(!check.passed());
        path.arcs[2].start[0] += 1e-15;
        assert!(!path.validate(&spec, 1e-6).unwrap().chained);
    }
}
