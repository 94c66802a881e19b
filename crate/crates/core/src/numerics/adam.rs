use super::{DenseMatrix, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Decoupled decay rate: a touched row moves by `-lr * weight_decay * row`.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Moments for one parameter matrix. Rows that never receive a gradient keep
/// zero moments and are never moved.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: DenseMatrix<T>,
    pub v: DenseMatrix<T>,
    pub step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(rows: usize, cols: usize) -> Self {
        AdamState {
            m: DenseMatrix::zeros(rows, cols),
            v: DenseMatrix::zeros(rows, cols),
            step: 0,
        }
    }

    pub fn for_param(param: &DenseMatrix<T>) -> Self {
        Self::new(param.rows(), param.cols())
    }

    /// One Adam step over the rows present in `grad_rows`; rows whose gradient
    /// is entirely zero are skipped. The step counter advances once per call.
    pub fn step<'a>(
        &mut self,
        param: &mut DenseMatrix<T>,
        grad_rows: impl IntoIterator<Item = (usize, &'a [T])>,
        cfg: &AdamConfig,
    ) where
        T: 'a,
    {
        assert_eq!((param.rows(), param.cols()), (self.m.rows(), self.m.cols()), "adam: shape mismatch");
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for (row, g) in grad_rows {
            assert_eq!(g.len(), param.cols(), "adam: gradient row length mismatch");
            if g.iter().all(|&x| x == T::ZERO) {
                continue;
            }
            let m = self.m.row_mut(row);
            let v = self.v.row_mut(row);
            let p = param.row_mut(row);
            for j in 0..g.len() {
                let gj = g[j].to_f64();
                let mj = cfg.beta1 * m[j].to_f64() + (1.0 - cfg.beta1) * gj;
                let vj = cfg.beta2 * v[j].to_f64() + (1.0 - cfg.beta2) * gj * gj;
                m[j] = T::from_f64(mj);
                v[j] = T::from_f64(vj);
                let m_hat = mj / bc1;
                let v_hat = vj / bc2;
                let pj = p[j].to_f64();
                let update = cfg.lr * (m_hat / (v_hat.sqrt() + cfg.epsilon) + cfg.weight_decay * pj);
                p[j] = T::from_f64(pj - update);
            }
        }
    }
}
