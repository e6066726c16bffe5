use serde::{Deserialize, Serialize};

/// Matrix in compressed sparse row layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseOperator {
    pub row_count: usize,
    pub col_count: usize,
    pub row_offsets: Vec<usize>,
    pub col_indices: Vec<usize>,
    pub values: Vec<f64>,
    pub symmetric: bool,
}

impl SparseOperator {
    /// Builds a CSR matrix from (row, col, value) triplets; duplicates are summed
    /// in a fixed order so the result is independent of hash state.
    pub fn from_triplets(
        row_count: usize,
        col_count: usize,
        mut triplets: Vec<(usize, usize, f64)>,
        symmetric: bool,
    ) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_offsets = vec![0usize; row_count + 1];
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            debug_assert!(r < row_count && c < col_count);
            if last == Some((r, c)) {
                *values.last_mut().expect("previous entry") += v;
            } else {
                col_indices.push(c);
                values.push(v);
                row_offsets[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..row_count {
            row_offsets[r + 1] += row_offsets[r];
        }
        Self { row_count, col_count, row_offsets, col_indices, values, symmetric }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_offsets[r]..self.row_offsets[r + 1];
        self.col_indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(j, _)| j == c).map_or(0.0, |(_, v)| v)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.row_count.min(self.col_count)).map(|i| self.get(i, i)).collect()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.row_count];
        self.apply_into(x, &mut y);
        y
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.col_count);
        for (r, yr) in y.iter_mut().enumerate().take(self.row_count) {
            let mut s = 0.0;
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                s += self.values[k] * x[self.col_indices[k]];
            }
            *yr = s;
        }
    }

    /// `xᵀ A x`
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        super::dot(x, &self.apply(x))
    }

    /// Sub-block with rows `rows` and columns `cols` (indices into this matrix).
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> SparseOperator {
        let mut col_map = vec![usize::MAX; self.col_count];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let mut triplets = Vec::new();
        for (i, &r) in rows.iter().enumerate() {
            for (c, v) in self.row(r) {
                let j = col_map[c];
                if j != usize::MAX {
                    triplets.push((i, j, v));
                }
            }
        }
        let symmetric = self.symmetric && rows == cols;
        SparseOperator::from_triplets(rows.len(), cols.len(), triplets, symmetric)
    }

    pub fn transpose(&self) -> SparseOperator {
        let mut triplets = Vec::with_capacity(self.nnz());
        for r in 0..self.row_count {
            for (c, v) in self.row(r) {
                triplets.push((c, r, v));
            }
        }
        SparseOperator::from_triplets(self.col_count, self.row_count, triplets, self.symmetric)
    }

    /// Largest |A_ij − A_ji| relative to the largest |A_ij|.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for r in 0..self.row_count {
            for (c, v) in self.row(r) {
                worst = worst.max((v - t.get(r, c)).abs());
                scale = scale.max(v.abs());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    /// `self + alpha * other` (same shape).
    pub fn add_scaled(&self, alpha: f64, other: &SparseOperator) -> SparseOperator {
        assert_eq!((self.row_count, self.col_count), (other.row_count, other.col_count));
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.row_count {
            triplets.extend(self.row(r).map(|(c, v)| (r, c, v)));
            triplets.extend(other.row(r).map(|(c, v)| (r, c, alpha * v)));
        }
        SparseOperator::from_triplets(
            self.row_count,
            self.col_count,
            triplets,
            self.symmetric && other.symmetric,
        )
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::zeros(self.row_count, self.col_count);
        for r in 0..self.row_count {
            for (c, v) in self.row(r) {
                d[(r, c)] += v;
            }
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_merge_and_apply() {
        let a = SparseOperator::from_triplets(
            2,
            3,
            vec![(1, 2, 1.0), (0, 0, 2.0), (1, 2, 0.5), (0, 1, -1.0)],
            false,
        );
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(1, 2), 1.5);
        assert_eq!(a.apply(&[1.0, 2.0, 3.0]), vec![0.0, 4.5]);
        let sub = a.submatrix(&[1], &[2, 0]);
        assert_eq!(sub.get(0, 0), 1.5);
        assert_eq!(a.transpose().get(2, 1), 1.5);
    }
}
