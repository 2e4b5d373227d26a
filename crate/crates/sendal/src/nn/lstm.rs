//! LSTM cell with backpropagation through time.
//!
//! Standard recurrence with sigmoid gates, tanh candidate and state
//! squashing, and zero initial hidden and cell state. The forward pass
//! returns the final hidden state plus a cache of per-step activations;
//! the backward pass is exact BPTT over that cache.

use rand::Rng;

use super::act::sigmoid;
use super::matrix::Matrix;
use super::FlatParams;
use crate::scalar::Scalar;

/// One gate's parameters: pre-activation = w·x + u·h_prev + b.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentGate<T> {
    pub w: Matrix<T>,
    pub u: Matrix<T>,
    pub b: Vec<T>,
}

impl<T: Scalar> RecurrentGate<T> {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        RecurrentGate {
            w: Matrix::zeros(hidden, input),
            u: Matrix::zeros(hidden, hidden),
            b: vec![T::zero(); hidden],
        }
    }

    pub fn init<R: Rng>(hidden: usize, input: usize, rng: &mut R) -> Self {
        let bw = 1.0 / (input as f64).sqrt();
        let bu = 1.0 / (hidden as f64).sqrt();
        RecurrentGate {
            w: Matrix::from_vec(
                hidden,
                input,
                (0..hidden * input)
                    .map(|_| T::from_f64(rng.gen_range(-bw..bw)))
                    .collect(),
            ),
            u: Matrix::from_vec(
                hidden,
                hidden,
                (0..hidden * hidden)
                    .map(|_| T::from_f64(rng.gen_range(-bu..bu)))
                    .collect(),
            ),
            b: vec![T::zero(); hidden],
        }
    }

    fn pre_activation_into(&self, x: &[T], h_prev: &[T], out: &mut [T]) {
        self.w.matvec_into(x, out);
        self.u.matvec_acc(h_prev, out);
        for (o, b) in out.iter_mut().zip(self.b.iter()) {
            *o += *b;
        }
    }

    pub fn mac_count(&self) -> u64 {
        self.w.mac_count() + self.u.mac_count()
    }
}

impl<T: Scalar> FlatParams<T> for RecurrentGate<T> {
    fn param_count(&self) -> usize {
        self.w.data.len() + self.u.data.len() + self.b.len()
    }
    fn write_flat(&self, out: &mut Vec<T>) {
        out.extend_from_slice(&self.w.data);
        out.extend_from_slice(&self.u.data);
        out.extend_from_slice(&self.b);
    }
    fn read_flat(&mut self, src: &[T], pos: &mut usize) {
        for chunk in [&mut self.w.data, &mut self.u.data, &mut self.b] {
            let len = chunk.len();
            chunk.copy_from_slice(&src[*pos..*pos + len]);
            *pos += len;
        }
    }
}

/// Gate order: input, forget, cell candidate, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams<T> {
    pub input_size: usize,
    pub hidden_size: usize,
    pub input_gate: RecurrentGate<T>,
    pub forget_gate: RecurrentGate<T>,
    pub cell_gate: RecurrentGate<T>,
    pub output_gate: RecurrentGate<T>,
}

#[derive(Debug)]
pub struct LstmCache<T> {
    xs: Vec<Vec<T>>,
    i: Vec<Vec<T>>,
    f: Vec<Vec<T>>,
    g: Vec<Vec<T>>,
    o: Vec<Vec<T>>,
    c: Vec<Vec<T>>,
    tanh_c: Vec<Vec<T>>,
    h: Vec<Vec<T>>,
}

pub type LstmGrads<T> = LstmParams<T>;

impl<T: Scalar> LstmParams<T> {
    pub fn zeros(hidden_size: usize, input_size: usize) -> Self {
        LstmParams {
            input_size,
            hidden_size,
            input_gate: RecurrentGate::zeros(hidden_size, input_size),
            forget_gate: RecurrentGate::zeros(hidden_size, input_size),
            cell_gate: RecurrentGate::zeros(hidden_size, input_size),
            output_gate: RecurrentGate::zeros(hidden_size, input_size),
        }
    }

    pub fn init<R: Rng>(hidden_size: usize, input_size: usize, rng: &mut R) -> Self {
        LstmParams {
            input_size,
            hidden_size,
            input_gate: RecurrentGate::init(hidden_size, input_size, rng),
            forget_gate: RecurrentGate::init(hidden_size, input_size, rng),
            cell_gate: RecurrentGate::init(hidden_size, input_size, rng),
            output_gate: RecurrentGate::init(hidden_size, input_size, rng),
        }
    }

    /// Runs the recurrence over `seq` and returns (final hidden, cache).
    pub fn forward(&self, seq: &[Vec<T>]) -> (Vec<T>, LstmCache<T>) {
        assert!(!seq.is_empty(), "lstm: empty sequence");
        let h_dim = self.hidden_size;
        let steps = seq.len();
        let mut cache = LstmCache {
            xs: Vec::with_capacity(steps),
            i: Vec::with_capacity(steps),
            f: Vec::with_capacity(steps),
            g: Vec::with_capacity(steps),
            o: Vec::with_capacity(steps),
            c: Vec::with_capacity(steps),
            tanh_c: Vec::with_capacity(steps),
            h: Vec::with_capacity(steps),
        };
        let mut h = vec![T::zero(); h_dim];
        let mut c = vec![T::zero(); h_dim];
        for x in seq {
            assert_eq!(x.len(), self.input_size, "lstm: input width mismatch");
            let mut i = vec![T::zero(); h_dim];
            let mut f = vec![T::zero(); h_dim];
            let mut g = vec![T::zero(); h_dim];
            let mut o = vec![T::zero(); h_dim];
            self.input_gate.pre_activation_into(x, &h, &mut i);
            self.forget_gate.pre_activation_into(x, &h, &mut f);
            self.cell_gate.pre_activation_into(x, &h, &mut g);
            self.output_gate.pre_activation_into(x, &h, &mut o);
            let mut c_new = vec![T::zero(); h_dim];
            let mut tanh_c = vec![T::zero(); h_dim];
            let mut h_new = vec![T::zero(); h_dim];
            for k in 0..h_dim {
                i[k] = sigmoid(i[k]);
                f[k] = sigmoid(f[k]);
                g[k] = g[k].tanh();
                o[k] = sigmoid(o[k]);
                c_new[k] = f[k] * c[k] + i[k] * g[k];
                tanh_c[k] = c_new[k].tanh();
                h_new[k] = o[k] * tanh_c[k];
            }
            cache.xs.push(x.clone());
            cache.i.push(i);
            cache.f.push(f);
            cache.g.push(g);
            cache.o.push(o);
            cache.c.push(c_new.clone());
            cache.tanh_c.push(tanh_c);
            cache.h.push(h_new.clone());
            h = h_new;
            c = c_new;
        }
        (h, cache)
    }

    /// Exact BPTT. Accumulates parameter grads into `grads` and returns the
    /// per-step input grads.
    pub fn backward(
        &self,
        cache: &LstmCache<T>,
        grad_h_final: &[T],
        grads: &mut LstmGrads<T>,
    ) -> Vec<Vec<T>> {
        let h_dim = self.hidden_size;
        let steps = cache.xs.len();
        let mut dxs = vec![vec![T::zero(); self.input_size]; steps];
        let mut dh = grad_h_final.to_vec();
        let mut dh_prev = vec![T::zero(); h_dim];
        let mut dc = vec![T::zero(); h_dim];
        let mut da_i = vec![T::zero(); h_dim];
        let mut da_f = vec![T::zero(); h_dim];
        let mut da_g = vec![T::zero(); h_dim];
        let mut da_o = vec![T::zero(); h_dim];
        let zeros = vec![T::zero(); h_dim];
        let one = T::one();
        for t in (0..steps).rev() {
            let i = &cache.i[t];
            let f = &cache.f[t];
            let g = &cache.g[t];
            let o = &cache.o[t];
            let tanh_c = &cache.tanh_c[t];
            let c_prev = if t > 0 { &cache.c[t - 1] } else { &zeros };
            let h_prev = if t > 0 { &cache.h[t - 1] } else { &zeros };

            for k in 0..h_dim {
                let do_k = dh[k] * tanh_c[k];
                let dct = dc[k] + dh[k] * o[k] * (one - tanh_c[k] * tanh_c[k]);
                let di = dct * g[k];
                let df = dct * c_prev[k];
                let dg = dct * i[k];
                dc[k] = dct * f[k]; // becomes dc_prev for the next iteration
                da_i[k] = di * i[k] * (one - i[k]);
                da_f[k] = df * f[k] * (one - f[k]);
                da_g[k] = dg * (one - g[k] * g[k]);
                da_o[k] = do_k * o[k] * (one - o[k]);
            }

            let x = &cache.xs[t];
            dh_prev.iter_mut().for_each(|v| *v = T::zero());
            for (gate, da) in [
                (&self.input_gate, &da_i),
                (&self.forget_gate, &da_f),
                (&self.cell_gate, &da_g),
                (&self.output_gate, &da_o),
            ] {
                gate.w.matvec_t_acc(da, &mut dxs[t]);
                gate.u.matvec_t_acc(da, &mut dh_prev);
            }
            for (ggate, da) in [
                (&mut grads.input_gate, &da_i),
                (&mut grads.forget_gate, &da_f),
                (&mut grads.cell_gate, &da_g),
                (&mut grads.output_gate, &da_o),
            ] {
                ggate.w.add_outer(da, x);
                ggate.u.add_outer(da, h_prev);
                for (b, d) in ggate.b.iter_mut().zip(da.iter()) {
                    *b += *d;
                }
            }
            std::mem::swap(&mut dh, &mut dh_prev);
        }
        dxs
    }

    /// MACs of one forward pass over a sequence of the given length
    /// (weight-matrix multiply-accumulates only).
    pub fn mac_count(&self, seq_len: usize) -> u64 {
        let per_step = self.input_gate.mac_count()
            + self.forget_gate.mac_count()
            + self.cell_gate.mac_count()
            + self.output_gate.mac_count();
        per_step * seq_len as u64
    }
}

impl<T: Scalar> FlatParams<T> for LstmParams<T> {
    fn param_count(&self) -> usize {
        self.input_gate.param_count()
            + self.forget_gate.param_count()
            + self.cell_gate.param_count()
            + self.output_gate.param_count()
    }
    fn write_flat(&self, out: &mut Vec<T>) {
        self.input_gate.write_flat(out);
        self.forget_gate.write_flat(out);
        self.cell_gate.write_flat(out);
        self.output_gate.write_flat(out);
    }
    fn read_flat(&mut self, src: &[T], pos: &mut usize) {
        self.input_gate.read_flat(src, pos);
        self.forget_gate.read_flat(src, pos);
        self.cell_gate.read_flat(src, pos);
        self.output_gate.read_flat(src, pos);
    }
}
