//! GRU cell with backpropagation through time.
//!
//! Update/reset gate formulation with the candidate computed from the
//! reset-masked hidden state:
//!   r = sigmoid(Wr x + Ur h + br)
//!   z = sigmoid(Wz x + Uz h + bz)
//!   n = tanh(Wn x + Un (r .* h) + bn)
//!   h' = z .* h + (1 - z) .* n

use rand::Rng;

use super::act::sigmoid;
use super::lstm::RecurrentGate;
use super::FlatParams;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct GruParams<T> {
    pub input_size: usize,
    pub hidden_size: usize,
    pub reset_gate: RecurrentGate<T>,
    pub update_gate: RecurrentGate<T>,
    pub candidate: RecurrentGate<T>,
}

#[derive(Debug)]
pub struct GruCache<T> {
    xs: Vec<Vec<T>>,
    r: Vec<Vec<T>>,
    z: Vec<Vec<T>>,
    n: Vec<Vec<T>>,
    rh: Vec<Vec<T>>, // r .* h_prev
    h: Vec<Vec<T>>,
}

pub type GruGrads<T> = GruParams<T>;

impl<T: Scalar> GruParams<T> {
    pub fn zeros(hidden_size: usize, input_size: usize) -> Self {
        GruParams {
            input_size,
            hidden_size,
            reset_gate: RecurrentGate::zeros(hidden_size, input_size),
            update_gate: RecurrentGate::zeros(hidden_size, input_size),
            candidate: RecurrentGate::zeros(hidden_size, input_size),
        }
    }

    pub fn init<R: Rng>(hidden_size: usize, input_size: usize, rng: &mut R) -> Self {
        GruParams {
            input_size,
            hidden_size,
            reset_gate: RecurrentGate::init(hidden_size, input_size, rng),
            update_gate: RecurrentGate::init(hidden_size, input_size, rng),
            candidate: RecurrentGate::init(hidden_size, input_size, rng),
        }
    }

    pub fn forward(&self, seq: &[Vec<T>]) -> (Vec<T>, GruCache<T>) {
        assert!(!seq.is_empty(), "gru: empty sequence");
        let h_dim = self.hidden_size;
        let mut cache = GruCache {
            xs: Vec::with_capacity(seq.len()),
            r: Vec::with_capacity(seq.len()),
            z: Vec::with_capacity(seq.len()),
            n: Vec::with_capacity(seq.len()),
            rh: Vec::with_capacity(seq.len()),
            h: Vec::with_capacity(seq.len()),
        };
        let mut h = vec![T::zero(); h_dim];
        let one = T::one();
        for x in seq {
            assert_eq!(x.len(), self.input_size, "gru: input width mismatch");
            let mut r = vec![T::zero(); h_dim];
            let mut z = vec![T::zero(); h_dim];
            let mut rh = vec![T::zero(); h_dim];
            self.reset_gate.w.matvec_into(x, &mut r);
            self.reset_gate.u.matvec_acc(&h, &mut r);
            self.update_gate.w.matvec_into(x, &mut z);
            self.update_gate.u.matvec_acc(&h, &mut z);
            for k in 0..h_dim {
                r[k] = sigmoid(r[k] + self.reset_gate.b[k]);
                z[k] = sigmoid(z[k] + self.update_gate.b[k]);
                rh[k] = r[k] * h[k];
            }
            let mut n = vec![T::zero(); h_dim];
            self.candidate.w.matvec_into(x, &mut n);
            self.candidate.u.matvec_acc(&rh, &mut n);
            let mut h_new = vec![T::zero(); h_dim];
            for k in 0..h_dim {
                n[k] = (n[k] + self.candidate.b[k]).tanh();
                h_new[k] = z[k] * h[k] + (one - z[k]) * n[k];
            }
            cache.xs.push(x.clone());
            cache.r.push(r);
            cache.z.push(z);
            cache.n.push(n);
            cache.rh.push(rh);
            cache.h.push(h_new.clone());
            h = h_new;
        }
        (h, cache)
    }

    /// Exact BPTT. Accumulates parameter grads into `grads` and returns the
    /// per-step input grads.
    pub fn backward(
        &self,
        cache: &GruCache<T>,
        grad_h_final: &[T],
        grads: &mut GruGrads<T>,
    ) -> Vec<Vec<T>> {
        let h_dim = self.hidden_size;
        let steps = cache.xs.len();
        let mut dxs = vec![vec![T::zero(); self.input_size]; steps];
        let mut dh = grad_h_final.to_vec();
        let mut dh_prev = vec![T::zero(); h_dim];
        let mut da_n = vec![T::zero(); h_dim];
        let mut da_z = vec![T::zero(); h_dim];
        let mut da_r = vec![T::zero(); h_dim];
        let mut drh = vec![T::zero(); h_dim];
        let zeros = vec![T::zero(); h_dim];
        let one = T::one();
        for t in (0..steps).rev() {
            let r = &cache.r[t];
            let z = &cache.z[t];
            let n = &cache.n[t];
            let rh = &cache.rh[t];
            let h_prev = if t > 0 { &cache.h[t - 1] } else { &zeros };

            for k in 0..h_dim {
                let dz = dh[k] * (h_prev[k] - n[k]);
                let dn = dh[k] * (one - z[k]);
                dh_prev[k] = dh[k] * z[k];
                da_n[k] = dn * (one - n[k] * n[k]);
                da_z[k] = dz * z[k] * (one - z[k]);
            }
            // Candidate path: a_n = Wn x + Un rh + bn.
            self.candidate.u.matvec_t_into(&da_n, &mut drh);
            for k in 0..h_dim {
                let dr = drh[k] * h_prev[k];
                dh_prev[k] += drh[k] * r[k];
                da_r[k] = dr * r[k] * (one - r[k]);
            }

            let x = &cache.xs[t];
            self.reset_gate.w.matvec_t_acc(&da_r, &mut dxs[t]);
            self.update_gate.w.matvec_t_acc(&da_z, &mut dxs[t]);
            self.candidate.w.matvec_t_acc(&da_n, &mut dxs[t]);
            self.reset_gate.u.matvec_t_acc(&da_r, &mut dh_prev);
            self.update_gate.u.matvec_t_acc(&da_z, &mut dh_prev);

            grads.reset_gate.w.add_outer(&da_r, x);
            grads.reset_gate.u.add_outer(&da_r, h_prev);
            grads.update_gate.w.add_outer(&da_z, x);
            grads.update_gate.u.add_outer(&da_z, h_prev);
            grads.candidate.w.add_outer(&da_n, x);
            grads.candidate.u.add_outer(&da_n, rh);
            for k in 0..h_dim {
                grads.reset_gate.b[k] += da_r[k];
                grads.update_gate.b[k] += da_z[k];
                grads.candidate.b[k] += da_n[k];
            }
            std::mem::swap(&mut dh, &mut dh_prev);
        }
        dxs
    }

    pub fn mac_count(&self, seq_len: usize) -> u64 {
        let per_step = self.reset_gate.mac_count()
            + self.update_gate.mac_count()
            + self.candidate.mac_count();
        per_step * seq_len as u64
    }
}

impl<T: Scalar> FlatParams<T> for GruParams<T> {
    fn param_count(&self) -> usize {
        self.reset_gate.param_count()
            + self.update_gate.param_count()
            + self.candidate.param_count()
    }
    fn write_flat(&self, out: &mut Vec<T>) {
        self.reset_gate.write_flat(out);
        self.update_gate.write_flat(out);
        self.candidate.write_flat(out);
    }
    fn read_flat(&mut self, src: &[T], pos: &mut usize) {
        self.reset_gate.read_flat(src, pos);
        self.update_gate.read_flat(src, pos);
        self.candidate.read_flat(src, pos);
    }
}
