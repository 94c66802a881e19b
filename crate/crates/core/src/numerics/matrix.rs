use super::Real;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![T::ZERO; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length must equal rows * cols");
        DenseMatrix { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn squared_norm(&self) -> f64 {
        self.data.iter().map(|v| v.to_f64() * v.to_f64()).sum()
    }

    pub fn cast<U: Real>(&self) -> DenseMatrix<U> {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| U::from_f64(v.to_f64())).collect(),
        }
    }

    /// `out += Wᵀ g` for `g` of length `rows`.
    pub fn transpose_mul_add(&self, g: &[T], out: &mut [T]) {
        assert_eq!(g.len(), self.rows);
        assert_eq!(out.len(), self.cols);
        let mut acc = vec![0.0f64; self.cols];
        for (i, &gi) in g.iter().enumerate() {
            if gi == T::ZERO {
                continue;
            }
            let gi = gi.to_f64();
            for (a, &w) in acc.iter_mut().zip(self.row(i)) {
                *a += gi * w.to_f64();
            }
        }
        for (o, a) in out.iter_mut().zip(acc) {
            *o += T::from_f64(a);
        }
    }

    /// `self += g xᵀ`.
    pub fn add_outer(&mut self, g: &[T], x: &[T]) {
        assert_eq!(g.len(), self.rows);
        assert_eq!(x.len(), self.cols);
        for (i, &gi) in g.iter().enumerate() {
            if gi == T::ZERO {
                continue;
            }
            for (w, &xj) in self.row_mut(i).iter_mut().zip(x) {
                *w += gi * xj;
            }
        }
    }
}

impl<T> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Dot product accumulated in `f64`.
pub fn dot<T: Real>(a: &[T], b: &[T]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot: length mismatch");
    a.iter().zip(b).map(|(x, y)| x.to_f64() * y.to_f64()).sum()
}

/// `Σ_k W_k x_k (+ b)` with one `f64` accumulator per output coordinate.
/// Terms are summed in block order, so a block of zeros leaves the result
/// bit-identical to omitting it.
pub fn affine_into<T: Real>(blocks: &[(&DenseMatrix<T>, &[T])], bias: Option<&[T]>, out: &mut [T]) {
    for (w, x) in blocks {
        assert_eq!(w.rows(), out.len(), "affine: output dimension mismatch");
        assert_eq!(w.cols(), x.len(), "affine: input dimension mismatch");
    }
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0f64;
        for (w, x) in blocks {
            for (&wij, &xj) in w.row(i).iter().zip(x.iter()) {
                acc += wij.to_f64() * xj.to_f64();
            }
        }
        if let Some(b) = bias {
            acc += b[i].to_f64();
        }
        *o = T::from_f64(acc);
    }
}

/// `y = W x (+ b)`.
pub fn affine<T: Real>(w: &DenseMatrix<T>, x: &[T], bias: Option<&[T]>) -> Vec<T> {
    if let Some(b) = bias {
        assert_eq!(b.len(), w.rows(), "affine: bias dimension mismatch");
    }
    let mut out = vec![T::ZERO; w.rows()];
    affine_into(&[(w, x)], bias, &mut out);
    out
}

/// Numerically stable softmax (max subtraction). Panics on empty input.
pub fn softmax<T: Real>(theta: &[T]) -> Vec<T> {
    assert!(!theta.is_empty(), "softmax of an empty vector");
    let max = theta.iter().map(|v| v.to_f64()).fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = theta.iter().map(|v| (v.to_f64() - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| T::from_f64(e / total)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_examples() {
        let eye = DenseMatrix::<f32>::identity(2);
        assert_eq!(affine(&eye, &[3.0, -1.0], None), vec![3.0, -1.0]);
        let w = DenseMatrix::from_vec(2, 2, vec![1.0f32, 2.0, 0.0, 1.0]);
        assert_eq!(affine(&w, &[1.0, 1.0], None), vec![3.0, 1.0]);
        assert_eq!(affine(&w, &[1.0, 1.0], Some(&[1.0, -1.0])), vec![4.0, 0.0]);
        let z = DenseMatrix::<f32>::zeros(3, 2);
        assert_eq!(affine(&z, &[5.0, 7.0], None), vec![0.0; 3]);
    }

    #[test]
    #[should_panic(expected = "input dimension mismatch")]
    fn affine_rejects_bad_shape() {
        let w = DenseMatrix::<f32>::zeros(2, 3);
        affine(&w, &[1.0, 2.0], None);
    }

    #[test]
    fn softmax_examples() {
        let u = softmax(&[4.0f64, 4.0, 4.0]);
        for p in u {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
        let p = softmax(&[2f64.ln(), 0.0]);
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-6 && (p[1] - 1.0 / 3.0).abs() < 1e-6);
        let p = softmax(&[1000.0f32, 0.0]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p[0] - 1.0).abs() < 1e-6 && p[1] < 1e-6);
    }

    #[test]
    #[should_panic(expected = "empty")]
    fn softmax_rejects_empty() {
        softmax::<f32>(&[]);
    }

    #[test]
    fn transpose_and_outer() {
        let w = DenseMatrix::from_vec(2, 3, vec![1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let mut out = vec![0.0; 3];
        w.transpose_mul_add(&[1.0, -1.0], &mut out);
        assert_eq!(out, vec![-3.0, -3.0, -3.0]);
        let mut g = DenseMatrix::<f64>::zeros(2, 3);
        g.add_outer(&[2.0, 0.0], &[1.0, 2.0, 3.0]);
        assert_eq!(g.as_slice(), &[2.0, 4.0, 6.0, 0.0, 0.0, 0.0]);
    }
}
