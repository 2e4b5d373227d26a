//! Single-head self-attention encoder over a fixed-length sequence.
//!
//! Sinusoidal positions are added to the inputs, scaled dot-product
//! attention (softmax(QK^T / sqrt(d)) V) mixes the sequence, the result is
//! mean-pooled over positions and passed through an output projection.

use rand::Rng;

use super::act::softmax_in_place;
use super::matrix::Matrix;
use super::FlatParams;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams<T> {
    pub model_size: usize,
    pub wq: Matrix<T>,
    pub wk: Matrix<T>,
    pub wv: Matrix<T>,
    pub wo: Matrix<T>,
    /// Fixed positional table, seq_len x model_size. Not trained.
    pub positional: Matrix<T>,
}

#[derive(Debug)]
pub struct AttentionCache<T> {
    x_pos: Vec<Vec<T>>,
    q: Vec<Vec<T>>,
    k: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    attn: Matrix<T>,
    pooled: Vec<T>,
}

/// Gradients for the four projections (the positional table is constant).
#[derive(Debug, Clone)]
pub struct AttentionGrads<T> {
    pub wq: Matrix<T>,
    pub wk: Matrix<T>,
    pub wv: Matrix<T>,
    pub wo: Matrix<T>,
}

impl<T: Scalar> AttentionGrads<T> {
    pub fn zeros_like(params: &AttentionParams<T>) -> Self {
        let d = params.model_size;
        AttentionGrads {
            wq: Matrix::zeros(d, d),
            wk: Matrix::zeros(d, d),
            wv: Matrix::zeros(d, d),
            wo: Matrix::zeros(d, d),
        }
    }
}

/// Standard sinusoidal position table: row t holds interleaved
/// sin/cos(t / 10000^(2k/d)).
pub fn sinusoidal_table<T: Scalar>(seq_len: usize, model_size: usize) -> Matrix<T> {
    let mut table = Matrix::zeros(seq_len, model_size);
    for t in 0..seq_len {
        for j in 0..model_size {
            let k = (j / 2) as f64;
            let angle = t as f64 / 10000f64.powf(2.0 * k / model_size as f64);
            let v = if j % 2 == 0 { angle.sin() } else { angle.cos() };
            *table.at_mut(t, j) = T::from_f64(v);
        }
    }
    table
}

impl<T: Scalar> AttentionParams<T> {
    pub fn zeros(seq_len: usize, model_size: usize) -> Self {
        AttentionParams {
            model_size,
            wq: Matrix::zeros(model_size, model_size),
            wk: Matrix::zeros(model_size, model_size),
            wv: Matrix::zeros(model_size, model_size),
            wo: Matrix::zeros(model_size, model_size),
            positional: sinusoidal_table(seq_len, model_size),
        }
    }

    pub fn init<R: Rng>(seq_len: usize, model_size: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (model_size as f64).sqrt();
        let mut proj = || {
            Matrix::from_vec(
                model_size,
                model_size,
                (0..model_size * model_size)
                    .map(|_| T::from_f64(rng.gen_range(-bound..bound)))
                    .collect(),
            )
        };
        AttentionParams {
            model_size,
            wq: proj(),
            wk: proj(),
            wv: proj(),
            wo: proj(),
            positional: sinusoidal_table(seq_len, model_size),
        }
    }

    pub fn seq_len(&self) -> usize {
        self.positional.rows
    }

    pub fn forward(&self, seq: &[Vec<T>]) -> (Vec<T>, AttentionCache<T>) {
        let n = self.positional.rows;
        let d = self.model_size;
        assert_eq!(seq.len(), n, "attention: sequence length mismatch");
        let mut x_pos = Vec::with_capacity(n);
        for (t, x) in seq.iter().enumerate() {
            assert_eq!(x.len(), d, "attention: input width mismatch");
            let row = self.positional.row(t);
            x_pos.push((0..d).map(|j| x[j] + row[j]).collect::<Vec<T>>());
        }
        let q: Vec<Vec<T>> = x_pos.iter().map(|x| self.wq.matvec(x)).collect();
        let k: Vec<Vec<T>> = x_pos.iter().map(|x| self.wk.matvec(x)).collect();
        let v: Vec<Vec<T>> = x_pos.iter().map(|x| self.wv.matvec(x)).collect();
        let scale = T::from_f64(1.0 / (d as f64).sqrt());
        let mut attn = Matrix::zeros(n, n);
        for t in 0..n {
            for s in 0..n {
                let mut dot = T::zero();
                for j in 0..d {
                    dot += q[t][j] * k[s][j];
                }
                *attn.at_mut(t, s) = dot * scale;
            }
            softmax_in_place(&mut attn.data[t * n..(t + 1) * n]);
        }
        let inv_n = T::from_f64(1.0 / n as f64);
        let mut pooled = vec![T::zero(); d];
        for t in 0..n {
            for s in 0..n {
                let a = attn.at(t, s);
                for j in 0..d {
                    pooled[j] += a * v[s][j] * inv_n;
                }
            }
        }
        let out = self.wo.matvec(&pooled);
        (
            out,
            AttentionCache {
                x_pos,
                q,
                k,
                v,
                attn,
                pooled,
            },
        )
    }

    pub fn backward(
        &self,
        cache: &AttentionCache<T>,
        grad_out: &[T],
        grads: &mut AttentionGrads<T>,
    ) -> Vec<Vec<T>> {
        let n = cache.x_pos.len();
        let d = self.model_size;
        grads.wo.add_outer(grad_out, &cache.pooled);
        let mut d_pooled = vec![T::zero(); d];
        self.wo.matvec_t_acc(grad_out, &mut d_pooled);

        // ctx[t] contributes pooled = mean over t, so d_ctx is shared.
        let inv_n = T::from_f64(1.0 / n as f64);
        let d_ctx: Vec<T> = d_pooled.iter().map(|g| *g * inv_n).collect();

        let mut dv = vec![vec![T::zero(); d]; n];
        let mut dq = vec![vec![T::zero(); d]; n];
        let mut dk = vec![vec![T::zero(); d]; n];
        let scale = T::from_f64(1.0 / (d as f64).sqrt());
        for t in 0..n {
            // d_attn[t][s] = d_ctx . v[s]; softmax row backward.
            let mut d_attn = vec![T::zero(); n];
            for s in 0..n {
                let mut dot = T::zero();
                for j in 0..d {
                    dot += d_ctx[j] * cache.v[s][j];
                }
                d_attn[s] = dot;
            }
            let row = cache.attn.row(t);
            let mut inner = T::zero();
            for s in 0..n {
                inner += d_attn[s] * row[s];
            }
            for s in 0..n {
                let d_score = row[s] * (d_attn[s] - inner);
                let ds = d_score * scale;
                for j in 0..d {
                    dq[t][j] += ds * cache.k[s][j];
                    dk[s][j] += ds * cache.q[t][j];
                }
                for j in 0..d {
                    dv[s][j] += row[s] * d_ctx[j];
                }
            }
        }

        let mut dxs = vec![vec![T::zero(); d]; n];
        for t in 0..n {
            grads.wq.add_outer(&dq[t], &cache.x_pos[t]);
            grads.wk.add_outer(&dk[t], &cache.x_pos[t]);
            grads.wv.add_outer(&dv[t], &cache.x_pos[t]);
            self.wq.matvec_t_acc(&dq[t], &mut dxs[t]);
            self.wk.matvec_t_acc(&dk[t], &mut dxs[t]);
            self.wv.matvec_t_acc(&dv[t], &mut dxs[t]);
        }
        dxs
    }

    /// Attention row weights for inspection (forward only).
    pub fn attention_rows(&self, seq: &[Vec<T>]) -> Matrix<T> {
        let (_, cache) = self.forward(seq);
        cache.attn
    }

    pub fn mac_count(&self, seq_len: usize) -> u64 {
        let n = seq_len as u64;
        let d = self.model_size as u64;
        // Q/K/V projections per position, two N x N x d attention products,
        // and the output projection after pooling.
        3 * n * d * d + 2 * n * n * d + d * d
    }
}

impl<T: Scalar> FlatParams<T> for AttentionParams<T> {
    fn param_count(&self) -> usize {
        4 * self.model_size * self.model_size
    }
    fn write_flat(&self, out: &mut Vec<T>) {
        out.extend_from_slice(&self.wq.data);
        out.extend_from_slice(&self.wk.data);
        out.extend_from_slice(&self.wv.data);
        out.extend_from_slice(&self.wo.data);
    }
    fn read_flat(&mut self, src: &[T], pos: &mut usize) {
        for chunk in [
            &mut self.wq.data,
            &mut self.wk.data,
            &mut self.wv.data,
            &mut self.wo.data,
        ] {
            let len = chunk.len();
            chunk.copy_from_slice(&src[*pos..*pos + len]);
            *pos += len;
        }
    }
}

impl<T: Scalar> FlatParams<T> for AttentionGrads<T> {
    fn param_count(&self) -> usize {
        self.wq.data.len() * 4
    }
    fn write_flat(&self, out: &mut Vec<T>) {
        out.extend_from_slice(&self.wq.data);
        out.extend_from_slice(&self.wk.data);
        out.extend_from_slice(&self.wv.data);
        out.extend_from_slice(&self.wo.data);
    }
    fn read_flat(&mut self, src: &[T], pos: &mut usize) {
        for chunk in [
            &mut self.wq.data,
            &mut self.wk.data,
            &mut self.wv.data,
            &mut self.wo.data,
        ] {
            let len = chunk.len();
            chunk.copy_from_slice(&src[*pos..*pos + len]);
            *pos += len;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::max_rel_error;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_inputs_with_zero_positions_give_uniform_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 6;
        let d = 4;
        let mut p = AttentionParams::<f64>::init(n, d, &mut rng);
        p.positional = Matrix::zeros(n, d);
        let seq = vec![vec![0.4, -0.2, 0.9, 0.1]; n];
        let attn = p.attention_rows(&seq);
        for t in 0..n {
            for s in 0..n {
                assert!((attn.at(t, s) - 1.0 / n as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn attention_rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 5;
        let d = 4;
        let p = AttentionParams::<f64>::init(n, d, &mut rng);
        let seq: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let attn = p.attention_rows(&seq);
        for t in 0..n {
            let sum: f64 = attn.row(t).iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 5;
        let d = 4;
        let p = AttentionParams::<f64>::init(n, d, &mut rng);
        let seq: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let (out, cache) = p.forward(&seq);
        let grad_out: Vec<f64> = out.iter().map(|v| 2.0 * v).collect();
        let mut grads = AttentionGrads::zeros_like(&p);
        p.backward(&cache, &grad_out, &mut grads);

        let template = p.clone();
        let s = seq.clone();
        let err = max_rel_error(
            &mut |q: &[f64]| {
                let mut m = template.clone();
                let mut pos = 0;
                m.read_flat(q, &mut pos);
                let (out, _) = m.forward(&s);
                out.iter().map(|v| v * v).sum()
            },
            &p.to_flat(),
            &grads.to_flat(),
            1e-5,
        );
        assert!(err < 1e-4, "attention grad error {err}");
    }

    #[test]
    fn input_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let n = 4;
        let d = 3;
        let p = AttentionParams::<f64>::init(n, d, &mut rng);
        let seq: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let (out, cache) = p.forward(&seq);
        let grad_out: Vec<f64> = out.iter().map(|v| 2.0 * v).collect();
        let mut grads = AttentionGrads::zeros_like(&p);
        let dxs = p.backward(&cache, &grad_out, &mut grads);

        let flat_x: Vec<f64> = seq.iter().flatten().cloned().collect();
        let flat_dx: Vec<f64> = dxs.iter().flatten().cloned().collect();
        let err = max_rel_error(
            &mut |q: &[f64]| {
                let s: Vec<Vec<f64>> = q.chunks(d).map(|c| c.to_vec()).collect();
                let (out, _) = p.forward(&s);
                out.iter().map(|v| v * v).sum()
            },
            &flat_x,
            &flat_dx,
            1e-5,
        );
        assert!(err < 1e-4, "attention input grad error {err}");
    }
}
