//! Row-major dense matrix; just enough linear algebra for the layers here.

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Matrix { rows, cols, data }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut T {
        &mut self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// y = A·x
    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.rows];
        self.matvec_into(x, &mut out);
        out
    }

    /// out = A·x (no allocation)
    pub fn matvec_into(&self, x: &[T], out: &mut [T]) {
        assert_eq!(x.len(), self.cols, "matvec: input length mismatch");
        assert_eq!(out.len(), self.rows, "matvec: output length mismatch");
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let mut acc = T::zero();
            for (w, v) in row.iter().zip(x.iter()) {
                acc += *w * *v;
            }
            *o = acc;
        }
    }

    /// out += A·x
    pub fn matvec_acc(&self, x: &[T], out: &mut [T]) {
        assert_eq!(x.len(), self.cols, "matvec: input length mismatch");
        assert_eq!(out.len(), self.rows, "matvec: output length mismatch");
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let mut acc = T::zero();
            for (w, v) in row.iter().zip(x.iter()) {
                acc += *w * *v;
            }
            *o += acc;
        }
    }

    /// out = Aᵀ·x
    pub fn matvec_t_into(&self, x: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|v| *v = T::zero());
        self.matvec_t_acc(x, out);
    }

    /// y = Aᵀ·x (accumulated into `out`, which must hold `cols` entries)
    pub fn matvec_t_acc(&self, x: &[T], out: &mut [T]) {
        assert_eq!(x.len(), self.rows, "matvec_t: input length mismatch");
        assert_eq!(out.len(), self.cols, "matvec_t: output length mismatch");
        for r in 0..self.rows {
            let row = self.row(r);
            let xr = x[r];
            for (o, w) in out.iter_mut().zip(row.iter()) {
                *o += *w * xr;
            }
        }
    }

    /// A += g ⊗ x (outer-product accumulate; g has `rows` entries, x `cols`)
    pub fn add_outer(&mut self, g: &[T], x: &[T]) {
        assert_eq!(g.len(), self.rows, "add_outer: rows mismatch");
        assert_eq!(x.len(), self.cols, "add_outer: cols mismatch");
        for (r, gr) in g.iter().enumerate() {
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (w, v) in row.iter_mut().zip(x.iter()) {
                *w += *gr * *v;
            }
        }
    }

    /// Multiply-accumulate count of one application of this matrix.
    pub fn mac_count(&self) -> u64 {
        (self.rows * self.cols) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_known_values() {
        let a = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let y = a.matvec(&[1.0, 0.0, -1.0]);
        assert_eq!(y, vec![-2.0, -2.0]);
    }

    #[test]
    fn matvec_t_is_transpose() {
        let a = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let mut out = vec![0.0; 3];
        a.matvec_t_acc(&[1.0, 1.0], &mut out);
        assert_eq!(out, vec![5.0, 7.0, 9.0]);
    }

    #[test]
    fn add_outer_accumulates() {
        let mut a = Matrix::zeros(2, 2);
        a.add_outer(&[1.0, 2.0], &[3.0, 4.0]);
        assert_eq!(a.data, vec![3.0, 4.0, 6.0, 8.0]);
    }
}
