use super::{ParamId, ParamSet};
use crate::numerics::Real;

const ABSENT: u32 = u32::MAX;

/// Row-sparse gradient for one parameter array. Rows are kept in the order
/// they were first touched, so merging and applying are deterministic.
#[derive(Debug, Clone)]
pub struct GradRows<T> {
    cols: usize,
    pos: Vec<u32>,
    row_ids: Vec<u32>,
    data: Vec<T>,
}

impl<T: Real> GradRows<T> {
    pub fn new(rows: usize, cols: usize) -> Self {
        GradRows {
            cols,
            pos: vec![ABSENT; rows],
            row_ids: Vec::new(),
            data: Vec::new(),
        }
    }

    /// Accumulator for `row`, zero-initialized on first touch.
    pub fn row_mut(&mut self, row: usize) -> &mut [T] {
        let mut p = self.pos[row];
        if p == ABSENT {
            p = self.row_ids.len() as u32;
            self.pos[row] = p;
            self.row_ids.push(row as u32);
            self.data.extend(std::iter::repeat_n(T::ZERO, self.cols));
        }
        let start = p as usize * self.cols;
        &mut self.data[start..start + self.cols]
    }

    pub fn get(&self, row: usize) -> Option<&[T]> {
        let p = self.pos[row];
        (p != ABSENT).then(|| {
            let start = p as usize * self.cols;
            &self.data[start..start + self.cols]
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[T])> {
        self.row_ids
            .iter()
            .zip(self.data.chunks_exact(self.cols.max(1)))
            .map(|(&r, g)| (r as usize, g))
    }

    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn clear(&mut self) {
        for &r in &self.row_ids {
            self.pos[r as usize] = ABSENT;
        }
        self.row_ids.clear();
        self.data.clear();
    }
}

/// Gradients over a whole [`ParamSet`]; untouched rows are absent.
#[derive(Debug, Clone)]
pub struct SparseGrads<T> {
    params: Vec<GradRows<T>>,
}

impl<T: Real> SparseGrads<T> {
    pub fn for_params(params: &ParamSet<T>) -> Self {
        SparseGrads {
            params: params.mats().iter().map(|m| GradRows::new(m.rows(), m.cols())).collect(),
        }
    }

    #[inline]
    pub fn rows(&self, id: ParamId) -> &GradRows<T> {
        &self.params[id.index()]
    }

    #[inline]
    pub fn row_mut(&mut self, id: ParamId, row: usize) -> &mut [T] {
        self.params[id.index()].row_mut(row)
    }

    pub fn get(&self, id: ParamId, row: usize, col: usize) -> T {
        self.params[id.index()].get(row).map_or(T::ZERO, |g| g[col])
    }

    pub fn is_empty(&self) -> bool {
        self.params.iter().all(|p| p.n_rows() == 0)
    }

    pub fn touched_rows(&self) -> usize {
        self.params.iter().map(|p| p.n_rows()).sum()
    }

    pub fn clear(&mut self) {
        for p in &mut self.params {
            p.clear();
        }
    }

    /// Adds `other` row by row in `other`'s insertion order.
    pub fn merge(&mut self, other: &SparseGrads<T>) {
        for (mine, theirs) in self.params.iter_mut().zip(&other.params) {
            for (r, g) in theirs.iter() {
                for (a, &b) in mine.row_mut(r).iter_mut().zip(g) {
                    *a += b;
                }
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.data.iter().all(|v| v.is_finite()))
    }
}
