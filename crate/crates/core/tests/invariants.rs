mod common;

use bracket_reach::commutator::{approx_velocity, commutator_flow, flow_count, shifted_flow};
use bracket_reach::filtration::{analyze, best_minor, frame_values, numerical_rank, select_frame};
use bracket_reach::flows::{apply_program, integrate_flow, DEFAULT_TOL};
use bracket_reach::reach::EndpointMap;
use bracket_reach::{builtin, lie_bracket, BoxDomain, BracketWord, DistributionSpec, SmoothField};
use common::*;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BUILTINS: [&str; 5] = ["heisenberg", "martinet", "engel", "involutive2", "contact-perturbed"];

fn spec(name: &str) -> DistributionSpec {
    builtin(name).unwrap().spec().unwrap()
}

fn random_point(rng: &mut impl Rng, domain: &BoxDomain) -> Vec<f64> {
    let inner = domain.shrink(0.9);
    (0..domain.dim())
        .map(|i| {
            let (lo, hi) = (inner.lower[i], inner.upper[i]);
            rng.random_range(lo..hi)
        })
        .collect()
}

/// Least-squares slope of `log y` against `log x`.
fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    num / den
}

#[test]
fn jacobian_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = 1e-5;
    for name in BUILTINS {
        let s = spec(name);
        for _ in 0..20 {
            let x = random_point(&mut rng, s.domain());
            for field in s.generators() {
                let jac = field.jacobian(&x);
                let scale = 1.0 + jac.abs().max();
                for j in 0..s.dim() {
                    let mut up = x.clone();
                    let mut down = x.clone();
                    up[j] += h;
                    down[j] -= h;
                    let (fu, fd) = (field.eval(&up), field.eval(&down));
                    for i in 0..s.dim() {
                        let fd_ij = (fu[i] - fd[i]) / (2.0 * h);
                        assert!((fd_ij - jac[(i, j)]).abs() < 1e-6 * scale, "{name} at {x:?}: ({i},{j})");
                    }
                }
                assert_eq!(field.eval(&x), field.eval(&x));
            }
        }
    }
}

#[test]
fn antisymmetry_at_many_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let s = spec("contact-perturbed");
    let (a, b) = (s.generator(1).unwrap(), s.generator(2).unwrap());
    let ab = lie_bracket(a, b).unwrap();
    let ba = lie_bracket(b, a).unwrap();
    for _ in 0..100 {
        let x = random_point(&mut rng, s.domain());
        let (u, v) = (ab.eval(&x), ba.eval(&x));
        let scale = 1.0 + max_abs(&u);
        assert!(u.iter().zip(&v).all(|(p, q)| (p + q).abs() < 1e-10 * scale));
    }
}

#[test]
fn atom_counts_are_exhaustive() {
    for p in 1..=4 {
        let generators = (0..p).map(|k| SmoothField::coordinate(4, k)).collect();
        let s = DistributionSpec::new("coords", generators, BoxDomain::cube(4, 1.0)).unwrap();
        for word in BracketWord::all_up_to(p, 5) {
            let n = flow_count(word.len()).unwrap();
            assert_eq!(commutator_flow(&s, &word).unwrap().len(), n, "{word:?}");
            assert_eq!(shifted_flow(&s, &word, 0.1).unwrap().len(), 2 * n);
        }
    }
}

#[test]
fn flows_reverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let s = spec("contact-perturbed");
    for _ in 0..30 {
        let x = random_point(&mut rng, &s.domain().shrink(0.5));
        let t = rng.random_range(-0.4..0.4);
        for field in s.generators() {
            let y = integrate_flow(&s, field, &x, t, DEFAULT_TOL).unwrap();
            let back = integrate_flow(&s, field, &y, -t, DEFAULT_TOL).unwrap();
            assert!(dist(&back, &x) < 10.0 * DEFAULT_TOL);
        }
    }
}

#[test]
fn heisenberg_commutator_program_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let s = spec("heisenberg");
    let g = commutator_flow(&s, &"1,2".parse().unwrap()).unwrap();
    for _ in 0..20 {
        let x = random_point(&mut rng, &s.domain().shrink(0.5));
        let t: f64 = rng.random_range(-0.5..0.5);
        let y = apply_program(&s, &g, &x, t, DEFAULT_TOL).unwrap();
        assert!(dist(&y, &[x[0], x[1], x[2] + t * t]) <= 1e-9);
    }
}

#[test]
fn velocity_error_shrinks_with_the_shift() {
    let s = spec("martinet");
    let word: BracketWord = "1,2".parse().unwrap();
    let x0 = [0.5, 0.0, 0.0];
    let deltas = [0.2, 0.1, 0.05];
    let errors: Vec<f64> = deltas
        .iter()
        .map(|&d| {
            let f = shifted_flow(&s, &word, d).unwrap();
            let v = approx_velocity(&s, &f, d, &x0, DEFAULT_TOL).unwrap();
            dist(&v, &[0.0, 0.0, 1.0])
        })
        .collect();
    for w in errors.windows(2) {
        assert!(w[1] <= 1.1 * w[0], "{errors:?}");
    }
    let slope = log_slope(&deltas, &errors);
    assert!((slope - 0.5).abs() <= 0.3, "slope {slope}");
}

#[test]
fn jacobian_columns_approach_the_frame() {
    let s = spec("martinet");
    let words: Vec<BracketWord> = ["1", "2", "1,2"].iter().map(|w| w.parse().unwrap()).collect();
    let y = [0.5, 0.1, -0.1];
    let deltas = [0.2, 0.1, 0.05];
    let mut errors = vec![Vec::new(); words.len()];
    for &d in &deltas {
        let map = EndpointMap::new(&s, &words, &[0, 1, 2], d, DEFAULT_TOL).unwrap();
        let jac = map.jacobian(&y, &[0.0; 3], d / 16.0).unwrap();
        let frame = frame_values(&s, &words, &y).unwrap();
        for (l, e) in errors.iter_mut().enumerate() {
            e.push((jac.column(l) - frame.column(l)).norm());
        }
    }
    // Single letters are reproduced exactly up to integration error.
    assert!(errors[0].iter().chain(&errors[1]).all(|&e| e < 1e-6), "{errors:?}");
    let slope = log_slope(&deltas, &errors[2]);
    assert!((slope - 0.5).abs() <= 0.3, "slope {slope} from {:?}", errors[2]);
}

#[test]
fn uniform_frames_stay_independent() {
    let rank_tol = 1e-8;
    for name in ["heisenberg", "engel", "involutive2", "contact-perturbed"] {
        let s = spec(name);
        let grid = s.domain().grid(5);
        let center = s.domain().center();
        let report = analyze(&s, &grid, 4, rank_tol, &center).unwrap();
        assert!(report.uniform, "{name}");
        let mu = report.mu.unwrap();
        let frame = select_frame(&s, &center, mu, report.rank, rank_tol).unwrap();
        assert!(frame.words.iter().all(|w| w.len() <= mu));
        let dets: Vec<f64> = s
            .domain()
            .shrink(0.8)
            .grid(5)
            .iter()
            .map(|x| best_minor(&frame_values(&s, &frame.words, x).unwrap()).1.abs())
            .collect();
        let worst = dets.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(worst > rank_tol, "{name}: min |det| {worst}");
    }
}

/// Every bracketing of every word of length <= `len`, as fields.
fn all_bracketings(s: &DistributionSpec, len: usize) -> Vec<SmoothField> {
    // trees[r] holds every bracket tree with r leaves.
    let mut trees: Vec<Vec<SmoothField>> = vec![Vec::new(), s.generators().cloned().collect()];
    for r in 2..=len {
        let mut level = Vec::new();
        for left in 1..r {
            for a in &trees[left] {
                for b in &trees[r - left] {
                    level.push(lie_bracket(a, b).unwrap());
                }
            }
        }
        trees.push(level);
    }
    trees.into_iter().flatten().collect()
}

fn rank_of(columns: &[Vec<f64>]) -> usize {
    let n = columns[0].len();
    let m = DMatrix::from_column_slice(n, columns.len(), &columns.concat());
    let sigma = m.clone().svd(false, false).singular_values.max();
    numerical_rank(&m, 1e-8 * sigma)
}

#[test]
fn right_nested_words_span_all_bracketings() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut specs: Vec<DistributionSpec> = ["heisenberg", "martinet", "engel"].iter().map(|n| spec(n)).collect();
    for k in 0..3 {
        let fields: Vec<PolyField> = (0..2).map(|_| (0..3).map(|_| random_poly(&mut rng, 3, 3, 4, 0.5)).collect()).collect();
        let text = poly_scenario(&format!("poly{k}"), &fields);
        specs.push(bracket_reach::scenario::parse_scenario(&text).unwrap().spec().unwrap());
    }
    for s in &specs {
        let nested: Vec<_> = BracketWord::all_up_to(2, 3)
            .iter()
            .map(|w| s.iterated_bracket(w).unwrap())
            .collect();
        let every = all_bracketings(s, 3);
        for _ in 0..20 {
            let x = random_point(&mut rng, &s.domain().shrink(0.5));
            let a: Vec<Vec<f64>> = nested.iter().map(|f| f.eval(&x)).collect();
            let b: Vec<Vec<f64>> = every.iter().map(|f| f.eval(&x)).collect();
            assert_eq!(rank_of(&a), rank_of(&b), "{} at {x:?}", s.name());
        }
    }
}
