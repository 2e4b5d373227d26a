//! Minimal trainable neural-network substrate: dense layers, activations,
//! LSTM/GRU cells, a single-head attention encoder, Adam, and gradient
//! verification. Everything is generic over [`crate::scalar::Scalar`].

pub mod act;
pub mod adam;
pub mod attention;
pub mod dense;
pub mod gradcheck;
pub mod gru;
pub mod lstm;
pub mod matrix;

use crate::scalar::Scalar;

/// Flat read/write of trainable parameters, used by the optimizer, the
/// gradient checker, and the checkpoint writer. Fixed traversal order.
pub trait FlatParams<T: Scalar> {
    fn param_count(&self) -> usize;
    fn write_flat(&self, out: &mut Vec<T>);
    fn read_flat(&mut self, src: &[T], pos: &mut usize);

    fn to_flat(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        self.write_flat(&mut out);
        out
    }

    fn assign_flat(&mut self, src: &[T]) {
        let mut pos = 0;
        self.read_flat(src, &mut pos);
        assert_eq!(pos, src.len(), "flat param length mismatch");
    }
}

