//! Finite-difference gradient verification (64-bit only).

/// Max relative error between analytic gradients and central finite
/// differences of `f` around `params`, with the given step.
///
/// Relative error per coordinate: |a - n| / max(1e-6, max(|a|, |n|)).
pub fn max_rel_error(
    f: &mut dyn FnMut(&[f64]) -> f64,
    params: &[f64],
    analytic: &[f64],
    step: f64,
) -> f64 {
    assert_eq!(params.len(), analytic.len(), "gradcheck: length mismatch");
    let mut work = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..params.len() {
        let orig = work[i];
        work[i] = orig + step;
        let up = f(&work);
        work[i] = orig - step;
        let down = f(&work);
        work[i] = orig;
        let numeric = (up - down) / (2.0 * step);
        let a = analytic[i];
        let denom = a.abs().max(numeric.abs()).max(1e-6);
        let err = (a - numeric).abs() / denom;
        if err > worst {
            worst = err;
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient_checks_out() {
        // f(p) = sum p_i^2, grad = 2p
        let p = vec![0.3, -1.2, 2.0];
        let g: Vec<f64> = p.iter().map(|v| 2.0 * v).collect();
        let err = max_rel_error(&mut |q| q.iter().map(|v| v * v).sum(), &p, &g, 1e-5);
        assert!(err < 1e-8, "err {err}");
    }

    #[test]
    fn wrong_gradient_is_flagged() {
        let p = vec![1.0, 2.0];
        let g = vec![2.0, 3.0]; // second entry should be 4.0
        let err = max_rel_error(&mut |q| q.iter().map(|v| v * v).sum(), &p, &g, 1e-5);
        assert!(err > 1e-2);
    }
}
