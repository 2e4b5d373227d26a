//! Routing-label generation for classifier training.
//!
//! From the two trained branches' errors we derive, per training window:
//! a hard label (did the linear branch win within margin xi), a smoothed
//! label (majority-vote inversion over a trailing window of length lambda;
//! 1 targets the component branch), an instability factor (count of hard-
//! label flips in the trailing window), and the soft label fed to the gate
//! (clamp to [0,1], then magnify).
//!
//! All functions here are pure; trailing windows are truncated at the
//! sequence head.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-window label data, aligned with the training window list.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSet<T> {
    /// 1 = linear branch error beat the component error within margin xi.
    pub hard: Vec<bool>,
    /// 1 = component branch preferred over the trailing window.
    pub smoothed: Vec<bool>,
    /// Hard-label flip count in the trailing window, in [0, lambda-1].
    pub instability: Vec<u32>,
    /// Gate training target in [0,1].
    pub soft: Vec<T>,
}

impl<T: Scalar> LabelSet<T> {
    pub fn len(&self) -> usize {
        self.hard.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hard.is_empty()
    }
}

/// hard[i] = 1 iff |err_linear[i]| < |err_component[i]| + xi.
pub fn hard_labels<T: Scalar>(err_linear: &[T], err_component: &[T], xi: f64) -> Vec<bool> {
    assert_eq!(err_linear.len(), err_component.len(), "label arrays differ");
    let xi = T::from_f64(xi);
    err_linear
        .iter()
        .zip(err_component.iter())
        .map(|(el, ec)| el.abs() < ec.abs() + xi)
        .collect()
}

/// smoothed[i] = 1 iff the count of 1s among hard[max(0, i-lambda+1)..=i]
/// is a strict minority of that (possibly truncated) window.
pub fn smoothed_labels(hard: &[bool], lambda: usize) -> Vec<bool> {
    assert!(lambda >= 1, "lambda must be >= 1");
    let mut ones = 0usize;
    let mut out = Vec::with_capacity(hard.len());
    for i in 0..hard.len() {
        ones += hard[i] as usize;
        if i >= lambda {
            ones -= hard[i - lambda] as usize;
        }
        let width = (i + 1).min(lambda);
        out.push((ones as f64) < width as f64 / 2.0);
    }
    out
}

/// instability[i] = number of adjacent hard-label flips whose both ends lie
/// in the trailing window [i-lambda+1, i] (so at most lambda-1 pairs).
pub fn instability(hard: &[bool], lambda: usize) -> Vec<u32> {
    assert!(lambda >= 1, "lambda must be >= 1");
    let mut out = Vec::with_capacity(hard.len());
    for i in 0..hard.len() {
        let lo = (i + 2).saturating_sub(lambda).max(1);
        let mut flips = 0u32;
        for j in lo..=i {
            flips += (hard[j] ^ hard[j - 1]) as u32;
        }
        out.push(flips);
    }
    out
}

/// Magnifier f(v) = (n+1)v / (nv+1), a concave bijection of [0,1] that
/// amplifies small routing signals.
pub fn magnify<T: Scalar>(v: T, n_mag: f64) -> Result<T> {
    if !(n_mag > 0.0) {
        return Err(Error::invalid("magnifier: n must be positive"));
    }
    let zero = T::zero();
    let one = T::one();
    if v < zero || v > one {
        return Err(Error::invalid(format!("magnifier: value {v} outside [0,1]")));
    }
    let n = T::from_f64(n_mag);
    Ok((n + one) * v / (n * v + one))
}

/// soft[i] = magnify(clamp01(smoothed[i] + w * instability[i])).
pub fn soft_labels<T: Scalar>(
    smoothed: &[bool],
    instability: &[u32],
    w: f64,
    n_mag: f64,
) -> Result<Vec<T>> {
    if smoothed.len() != instability.len() {
        return Err(Error::invalid("soft labels: array lengths differ"));
    }
    smoothed
        .iter()
        .zip(instability.iter())
        .map(|(s, k)| {
            let raw = (*s as u8 as f64) + w * (*k as f64);
            let clamped = raw.clamp(0.0, 1.0);
            magnify(T::from_f64(clamped), n_mag)
        })
        .collect()
}

/// Full label pipeline from branch errors.
pub fn build_label_set<T: Scalar>(
    err_linear: &[T],
    err_component: &[T],
    xi: f64,
    lambda: usize,
    w: f64,
    n_mag: f64,
) -> Result<LabelSet<T>> {
    if xi < 0.0 {
        return Err(Error::invalid("labels: xi must be >= 0"));
    }
    if lambda == 0 {
        return Err(Error::invalid("labels: lambda must be >= 1"));
    }
    let hard = hard_labels(err_linear, err_component, xi);
    let smoothed = smoothed_labels(&hard, lambda);
    let inst = instability(&hard, lambda);
    let soft = soft_labels(&smoothed, &inst, w, n_mag)?;
    Ok(LabelSet {
        hard,
        smoothed,
        instability: inst,
        soft,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hard_label_margin_arithmetic() {
        // |err_fc| = 2.0, |err_C| = 1.5, xi = 1.0 -> 1 since 2.0 < 2.5.
        assert_eq!(hard_labels(&[2.0f64], &[-1.5], 1.0), vec![true]);
    }

    #[test]
    fn hard_label_boundary_is_strict() {
        assert_eq!(hard_labels(&[1.5f64], &[1.5], 0.0), vec![false]);
    }

    #[test]
    fn huge_margin_saturates_labels() {
        let el = [3.0f64, 0.5, 9.0];
        let ec = [0.1f64, 0.2, 0.3];
        assert_eq!(hard_labels(&el, &ec, 100.0), vec![true; 3]);
    }

    #[test]
    fn smoothed_majority_example() {
        // Trailing window [1,1,1,0,1] with lambda=5: sum 4 >= 2.5 -> 0.
        let hard = vec![true, true, true, false, true];
        let sm = smoothed_labels(&hard, 5);
        assert!(!sm[4]);
    }

    #[test]
    fn all_linear_hard_labels_mean_linear_everywhere() {
        let hard = vec![true; 12];
        assert!(smoothed_labels(&hard, 5).iter().all(|v| !v));
    }

    #[test]
    fn all_component_hard_labels_mean_component_everywhere() {
        let hard = vec![false; 12];
        assert!(smoothed_labels(&hard, 5).iter().all(|v| *v));
    }

    #[test]
    fn instability_counts_transitions() {
        let hard = vec![false, true, false, true];
        let s = instability(&hard, 4);
        assert_eq!(s[3], 3);
    }

    #[test]
    fn constant_hard_labels_have_zero_instability() {
        let hard = vec![true; 8];
        assert!(instability(&hard, 5).iter().all(|v| *v == 0));
    }

    #[test]
    fn instability_bounded_by_lambda_minus_one() {
        let hard: Vec<bool> = (0..40).map(|i| i % 2 == 0).collect();
        for lambda in 1..8 {
            let s = instability(&hard, lambda);
            assert!(s.iter().all(|v| *v <= lambda as u32 - 1), "lambda={lambda}");
        }
    }

    #[test]
    fn magnifier_fixes_endpoints() {
        for n in [0.5, 1.0, 4.0, 10.0] {
            assert_eq!(magnify(0.0f64, n).unwrap(), 0.0);
            assert_eq!(magnify(1.0f64, n).unwrap(), 1.0);
        }
    }

    #[test]
    fn magnifier_formula_value() {
        assert!((magnify(0.5f64, 1.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn magnifier_never_shrinks() {
        for i in 0..=100 {
            let v = i as f64 / 100.0;
            assert!(magnify(v, 4.0).unwrap() >= v);
        }
    }

    #[test]
    fn magnifier_rejects_out_of_range() {
        assert!(magnify(-0.1f64, 4.0).is_err());
        assert!(magnify(1.1f64, 4.0).is_err());
        assert!(magnify(0.5f64, 0.0).is_err());
    }

    #[test]
    fn soft_label_trivial_cases() {
        // Stable series, linear target.
        let soft = soft_labels::<f64>(&[false], &[0], 0.25, 4.0).unwrap();
        assert_eq!(soft, vec![0.0]);
        // Smoothed = 1 clamps to 1 regardless of instability.
        let soft = soft_labels::<f64>(&[true, true], &[0, 7], 0.25, 4.0).unwrap();
        assert_eq!(soft, vec![1.0, 1.0]);
    }

    #[test]
    fn soft_label_formula_value() {
        // smoothed=0, s=2, w=0.25, n=4: clamp(0.5)=0.5 -> 5*0.5/(4*0.5+1) = 2.5/3.
        let soft = soft_labels::<f64>(&[false], &[2], 0.25, 4.0).unwrap();
        assert!((soft[0] - 2.5 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn soft_labels_stay_in_unit_interval() {
        let smoothed: Vec<bool> = (0..50).map(|i| i % 3 == 0).collect();
        let inst: Vec<u32> = (0..50).map(|i| (i % 9) as u32).collect();
        let soft = soft_labels::<f64>(&smoothed, &inst, 0.25, 4.0).unwrap();
        assert!(soft.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn hard_labels_monotone_in_margin() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(44);
        let el: Vec<f64> = (0..200).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let ec: Vec<f64> = (0..200).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let mut prev_count = 0usize;
        for xi in [0.0, 0.1, 0.5, 1.0, 2.0, 10.0] {
            let labels = hard_labels(&el, &ec, xi);
            let count = labels.iter().filter(|v| **v).count();
            assert!(count >= prev_count, "xi={xi}");
            prev_count = count;
        }
    }
}
