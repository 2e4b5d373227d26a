//! Fully-connected layer with exact analytic gradients.

use rand::Rng;

use super::matrix::Matrix;
use super::FlatParams;
use crate::scalar::Scalar;

/// out = W·x + b
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct DenseGrads<T> {
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Dense {
            weight: Matrix::zeros(out_dim, in_dim),
            bias: vec![T::zero(); out_dim],
        }
    }

    /// Fan-in uniform init: weights ~ U(-1/sqrt(in), 1/sqrt(in)), zero bias.
    pub fn init<R: Rng>(out_dim: usize, in_dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let data = (0..out_dim * in_dim)
            .map(|_| T::from_f64(rng.gen_range(-bound..bound)))
            .collect();
        Dense {
            weight: Matrix::from_vec(out_dim, in_dim, data),
            bias: vec![T::zero(); out_dim],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        let mut out = self.weight.matvec(x);
        for (o, b) in out.iter_mut().zip(self.bias.iter()) {
            *o += *b;
        }
        out
    }

    /// Backward pass: accumulates parameter gradients into `grads` and
    /// returns the gradient with respect to the input.
    pub fn backward(&self, x: &[T], grad_out: &[T], grads: &mut DenseGrads<T>) -> Vec<T> {
        assert_eq!(grad_out.len(), self.out_dim(), "dense backward: grad shape");
        grads.weight.add_outer(grad_out, x);
        for (b, g) in grads.bias.iter_mut().zip(grad_out.iter()) {
            *b += *g;
        }
        let mut dx = vec![T::zero(); self.in_dim()];
        self.weight.matvec_t_acc(grad_out, &mut dx);
        dx
    }

    pub fn grads_like(&self) -> DenseGrads<T> {
        DenseGrads {
            weight: Matrix::zeros(self.out_dim(), self.in_dim()),
            bias: vec![T::zero(); self.out_dim()],
        }
    }

    pub fn mac_count(&self) -> u64 {
        self.weight.mac_count()
    }
}

impl<T: Scalar> FlatParams<T> for Dense<T> {
    fn param_count(&self) -> usize {
        self.weight.data.len() + self.bias.len()
    }
    fn write_flat(&self, out: &mut Vec<T>) {
        out.extend_from_slice(&self.weight.data);
        out.extend_from_slice(&self.bias);
    }
    fn read_flat(&mut self, src: &[T], pos: &mut usize) {
        let nw = self.weight.data.len();
        self.weight.data.copy_from_slice(&src[*pos..*pos + nw]);
        *pos += nw;
        let nb = self.bias.len();
        self.bias.copy_from_slice(&src[*pos..*pos + nb]);
        *pos += nb;
    }
}

impl<T: Scalar> FlatParams<T> for DenseGrads<T> {
    fn param_count(&self) -> usize {
        self.weight.data.len() + self.bias.len()
    }
    fn write_flat(&self, out: &mut Vec<T>) {
        out.extend_from_slice(&self.weight.data);
        out.extend_from_slice(&self.bias);
    }
    fn read_flat(&mut self, src: &[T], pos: &mut usize) {
        let nw = self.weight.data.len();
        self.weight.data.copy_from_slice(&src[*pos..*pos + nw]);
        *pos += nw;
        let nb = self.bias.len();
        self.bias.copy_from_slice(&src[*pos..*pos + nb]);
        *pos += nb;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::FlatParams;

    #[test]
    fn identity_weights_pass_input_through() {
        let mut d = Dense::<f64>::zeros(3, 3);
        for i in 0..3 {
            *d.weight.at_mut(i, i) = 1.0;
        }
        let x = [0.5, -1.0, 2.0];
        assert_eq!(d.forward(&x), x.to_vec());
    }

    #[test]
    fn zero_input_yields_bias() {
        let mut d = Dense::<f64>::zeros(2, 4);
        d.bias = vec![0.7, -0.3];
        assert_eq!(d.forward(&[0.0; 4]), vec![0.7, -0.3]);
    }

    #[test]
    fn backward_matches_finite_differences() {
        use crate::nn::gradcheck::max_rel_error;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let layer = Dense::<f64>::init(3, 5, &mut rng);
        let x: Vec<f64> = (0..5).map(|i| 0.3 * i as f64 - 0.7).collect();

        // Loss: sum of outputs squared.
        let mut grads = layer.grads_like();
        let out = layer.forward(&x);
        let grad_out: Vec<f64> = out.iter().map(|o| 2.0 * o).collect();
        layer.backward(&x, &grad_out, &mut grads);

        let template = layer.clone();
        let xs = x.clone();
        let err = max_rel_error(
            &mut |p: &[f64]| {
                let mut l = template.clone();
                let mut pos = 0;
                l.read_flat(p, &mut pos);
                l.forward(&xs).iter().map(|o| o * o).sum()
            },
            &layer.to_flat(),
            &grads.to_flat(),
            1e-5,
        );
        assert!(err < 1e-4, "dense grad error {err}");
    }
}
