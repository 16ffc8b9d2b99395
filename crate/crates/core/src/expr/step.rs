//! Derivatives of the `C^∞` smooth step `S(z) = φ(z) / (φ(z) + φ(1 - z))`,
//! `φ(z) = exp(-1/z)` for `z > 0`, computed with truncated Taylor series.

/// `order`-th derivative of the smooth step at `z`.
pub fn smooth_step(order: u32, z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z <= 0.0 {
        return 0.0;
    }
    if z >= 1.0 {
        return if order == 0 { 1.0 } else { 0.0 };
    }
    let n = order as usize + 1;
    let left = phi_series(z, 1.0, n);
    let right = phi_series(1.0 - z, -1.0, n);
    let denom: Vec<f64> = left.iter().zip(&right).map(|(a, b)| a + b).collect();
    let series = divide(&left, &denom);
    let mut factorial = 1.0;
    for k in 1..=order {
        factorial *= k as f64;
    }
    series[order as usize] * factorial
}

/// Taylor coefficients in `τ` of `exp(-1/(w + slope·τ))` at `τ = 0`.
fn phi_series(w: f64, slope: f64, n: usize) -> Vec<f64> {
    let head = (-1.0 / w).exp();
    if head == 0.0 {
        return vec![0.0; n];
    }
    // -1/(w + slope τ) = -Σ (-slope)^k τ^k / w^{k+1}
    let mut exponent = Vec::with_capacity(n);
    let mut term = -1.0 / w;
    for _ in 0..n {
        exponent.push(term);
        term *= -slope / w;
    }
    exp_series(&exponent)
}

fn exp_series(a: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut e = vec![0.0; n];
    e[0] = a[0].exp();
    for m in 1..n {
        let mut acc = 0.0;
        for k in 1..=m {
            acc += k as f64 * a[k] * e[m - k];
        }
        e[m] = acc / m as f64;
    }
    e
}

fn divide(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut c = vec![0.0; n];
    for m in 0..n {
        let mut acc = a[m];
        for i in 1..=m {
            acc -= b[i] * c[m - i];
        }
        c[m] = acc / b[0];
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    fn closed_form(z: f64) -> f64 {
        let f = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
        f(z) / (f(z) + f(1.0 - z))
    }

    #[test]
    fn value_matches_closed_form() {
        for &z in &[-0.5, 0.0, 0.1, 0.37, 0.5, 0.83, 1.0, 1.4] {
            assert!((smooth_step(0, z) - closed_form(z)).abs() < 1e-14);
        }
        assert_eq!(smooth_step(0, 0.5), 0.5);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-4;
        for order in 0..5 {
            for &z in &[0.15, 0.4, 0.5, 0.71, 0.9] {
                let fd = (smooth_step(order, z + h) - smooth_step(order, z - h)) / (2.0 * h);
                let exact = smooth_step(order + 1, z);
                assert!(
                    (fd - exact).abs() < 1e-5 * (1.0 + exact.abs()),
                    "order {order} at {z}: {fd} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn flat_near_the_ends() {
        for order in 1..7 {
            assert_eq!(smooth_step(order, 1e-6), 0.0);
            assert!(smooth_step(order, 1.0 - 1e-6).abs() < 1e-300);
        }
    }
}
