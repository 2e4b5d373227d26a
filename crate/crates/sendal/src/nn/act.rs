//! Elementwise activations and their derivatives.

use crate::scalar::Scalar;

/// Slope applied on the negative side of the leaky ReLU.
pub const LEAKY_SLOPE: f64 = 0.01;

#[inline]
pub fn leaky_relu<T: Scalar>(x: T, slope: T) -> T {
    if x >= T::zero() {
        x
    } else {
        slope * x
    }
}

#[inline]
pub fn leaky_relu_grad<T: Scalar>(x: T, slope: T) -> T {
    if x >= T::zero() {
        T::one()
    } else {
        slope
    }
}

#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// d sigmoid / dx expressed through the forward value s = sigmoid(x).
#[inline]
pub fn sigmoid_grad_from_value<T: Scalar>(s: T) -> T {
    s * (T::one() - s)
}

/// Numerically stable softmax over one row, in place.
pub fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let max = row.iter().cloned().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v = *v / sum;
    }
}

/// Binary cross-entropy on a raw logit z against target y in [0,1].
/// Stable form: max(z,0) - z·y + ln(1 + exp(-|z|)).
#[inline]
pub fn bce_with_logit<T: Scalar>(z: T, y: T) -> T {
    z.max(T::zero()) - z * y + (T::one() + (-z.abs()).exp()).ln()
}

/// dBCE/dz = sigmoid(z) - y.
#[inline]
pub fn bce_with_logit_grad<T: Scalar>(z: T, y: T) -> T {
    sigmoid(z) - y
}
