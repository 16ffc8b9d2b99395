//! Finite-difference weights on arbitrary grids (Fornberg's recursion) and
//! central derivative estimates with Richardson extrapolation.

/// Weights `w[m][j]` such that `f^{(m)}(x0) ≈ Σ_j w[m][j] f(nodes[j])` for
/// every derivative order `m <= max_order`.
pub fn fornberg_weights(x0: f64, nodes: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Central stencil offsets (in units of `h`) and weights for the `order`-th
/// derivative with the given even accuracy.
pub fn central_stencil(order: usize, accuracy: usize) -> (Vec<i32>, Vec<f64>) {
    let half = (order.div_ceil(2) + accuracy / 2 - 1) as i32;
    let offsets: Vec<i32> = (-half..=half).collect();
    let nodes: Vec<f64> = offsets.iter().map(|&o| o as f64).collect();
    let w = fornberg_weights(0.0, &nodes, order);
    (offsets, w[order].clone())
}

/// Derivative estimates of a vector-valued `f` at 0 for orders `1..=max_order`.
///
/// Orders 1 and 2 use fourth-order central stencils at step `h`; higher
/// orders use second-order central stencils at `h` and `h/2` combined by one
/// Richardson step. `f` is evaluated once per distinct node, in a fixed order.
pub fn central_derivatives<E>(
    f: impl Fn(f64) -> Result<Vec<f64>, E> + Sync,
    h: f64,
    max_order: usize,
) -> Result<Vec<Vec<f64>>, E>
where
    E: Send,
{
    use rayon::prelude::*;
    use std::collections::BTreeMap;

    struct Plan {
        order: usize,
        parts: Vec<(f64, f64, Vec<i32>, Vec<f64>)>, // (coefficient, step, offsets, weights)
    }

    let mut plans = Vec::new();
    for order in 1..=max_order {
        if order <= 2 {
            let (o, w) = central_stencil(order, 4);
            plans.push(Plan {
                order,
                parts: vec![(1.0, h, o, w)],
            });
        } else {
            let (o, w) = central_stencil(order, 2);
            plans.push(Plan {
                order,
                parts: vec![
                    (-1.0 / 3.0, h, o.clone(), w.clone()),
                    (4.0 / 3.0, h / 2.0, o, w),
                ],
            });
        }
    }

    // Nodes are keyed by (offset, half-step flag) so that shared points are
    // evaluated once.
    let mut nodes: BTreeMap<(i32, bool), f64> = BTreeMap::new();
    for plan in &plans {
        for (_, step, offsets, _) in &plan.parts {
            let half = *step != h;
            for &o in offsets {
                nodes.insert((o, half), o as f64 * step);
            }
        }
    }
    let keys: Vec<(i32, bool)> = nodes.keys().copied().collect();
    let values: Vec<Vec<f64>> = keys
        .par_iter()
        .map(|k| f(nodes[k]))
        .collect::<Result<Vec<_>, E>>()?;
    let lookup: BTreeMap<(i32, bool), &Vec<f64>> = keys.iter().copied().zip(values.iter()).collect();

    let dim = values.first().map_or(0, Vec::len);
    Ok(plans
        .iter()
        .map(|plan| {
            let mut out = vec![0.0; dim];
            for (coef, step, offsets, weights) in &plan.parts {
                let half = *step != h;
                let scale = coef / step.powi(plan.order as i32);
                for (o, w) in offsets.iter().zip(weights) {
                    if *w == 0.0 {
                        continue;
                    }
                    let v = lookup[&(*o, half)];
                    for (acc, vi) in out.iter_mut().zip(v.iter()) {
                        *acc += scale * w * vi;
                    }
                }
            }
            out
        })
        .collect())
}
