//! Central finite-difference gradients for verifying analytic backprop.
//!
//! Nothing here touches the analytic path: the checker only evaluates a loss
//! closure at perturbed parameter vectors.

/// Central differences `(f(p + h e_i) - f(p - h e_i)) / 2h` for every `i`.
pub fn central_differences<F>(params: &[f64], step: f64, mut loss: F) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + step;
            let up = loss(&p);
            p[i] = orig - step;
            let down = loss(&p);
            p[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Largest componentwise relative error `|a - n| / max(|a|, |n|, floor)`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn differences_of_a_quadratic() {
        let g = central_differences(&[1.0, -2.0], 1e-5, |p| p[0] * p[0] + 3.0 * p[1]);
        assert!((g[0] - 2.0).abs() < 1e-8);
        assert!((g[1] - 3.0).abs() < 1e-8);
        assert!(max_relative_error(&[2.0, 3.0], &g, 1e-8) < 1e-8);
    }
}
