use crate::error::{LodError, Result};

/// Compressed sparse row matrix with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseMatrix {
    /// Assemble from `(row, col, value)` triplets; duplicates are summed in
    /// input order.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Self {
        let triplets: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        let mut counts = vec![0usize; rows + 1];
        for &(r, c, _) in &triplets {
            assert!(r < rows && c < cols, "triplet ({r}, {c}) outside {rows}x{cols}");
            counts[r + 1] += 1;
        }
        for i in 0..rows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut entries = vec![(0usize, 0.0f64); triplets.len()];
        for &(r, c, v) in &triplets {
            entries[next[r]] = (c, v);
            next[r] += 1;
        }

        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        for r in 0..rows {
            let row = &mut entries[counts[r]..counts[r + 1]];
            // stable sort keeps duplicate summation order deterministic
            row.sort_by_key(|e| e.0);
            for &(c, v) in row.iter() {
                if col_idx.len() > *row_ptr.last().unwrap() && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
            symmetric: false,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
            symmetric: true,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_ptr: vec![0; rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
            symmetric: rows == cols,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[range.clone()], &self.values[range])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    /// Check exact symmetry and set the symmetry flag.
    pub fn into_symmetric(mut self) -> Result<Self> {
        if self.rows != self.cols {
            return Err(LodError::Dimension(format!(
                "{}x{} matrix cannot be symmetric",
                self.rows, self.cols
            )));
        }
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if self.get(j, i) != v {
                    return Err(LodError::Dimension(format!(
                        "entry ({i}, {j}) = {v} differs from its transpose"
                    )));
                }
            }
        }
        self.symmetric = true;
        Ok(self)
    }

    /// Symmetrize as `(A + A^T) / 2`, removing round-off asymmetry from
    /// products such as `B^T K B`.
    pub fn symmetrized(&self) -> Self {
        let t = self.transpose();
        let mut triplets = Vec::with_capacity(2 * self.nnz());
        for m in [self, &t] {
            for i in 0..m.rows {
                let (cols, vals) = m.row(i);
                triplets.extend(cols.iter().zip(vals).map(|(&j, &v)| (i, j, 0.5 * v)));
            }
        }
        let mut s = Self::from_triplets(self.rows, self.cols, triplets);
        // a + b == b + a in IEEE arithmetic, so the result is exactly symmetric
        s.symmetric = true;
        s
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.cols, "vector length does not match columns");
        assert_eq!(y.len(), self.rows, "output length does not match rows");
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
        }
    }

    /// `A^T x`.
    pub fn mul_transpose_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows, "vector length does not match rows");
        let mut y = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                y[j] += v * xi;
            }
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for j in 0..self.cols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                col_idx[next[j]] = i;
                values[next[j]] = v;
                next[j] += 1;
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            row_ptr: counts,
            col_idx,
            values,
            symmetric: self.symmetric,
        }
    }

    /// Sparse product `A * B` (row-wise accumulation with a dense work row).
    pub fn matmul(&self, other: &SparseMatrix) -> Result<Self> {
        if self.cols != other.rows {
            return Err(LodError::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut acc = vec![0.0; other.cols];
        let mut marker = vec![usize::MAX; other.cols];
        let mut row_ptr = Vec::with_capacity(self.rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut pattern = Vec::new();
        row_ptr.push(0);
        for i in 0..self.rows {
            pattern.clear();
            let (cols, vals) = self.row(i);
            for (&k, &a) in cols.iter().zip(vals) {
                let (ocols, ovals) = other.row(k);
                for (&j, &b) in ocols.iter().zip(ovals) {
                    if marker[j] != i {
                        marker[j] = i;
                        acc[j] = 0.0;
                        pattern.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            pattern.sort_unstable();
            for &j in &pattern {
                col_idx.push(j);
                values.push(acc[j]);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            rows: self.rows,
            cols: other.cols,
            row_ptr,
            col_idx,
            values,
            symmetric: false,
        })
    }

    /// Submatrix with the given rows and columns, in the given order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_map = vec![usize::MAX; self.cols];
        for (new, &old) in cols.iter().enumerate() {
            col_map[old] = new;
        }
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for &r in rows {
            scratch.clear();
            let (c, v) = self.row(r);
            scratch.extend(
                c.iter()
                    .zip(v)
                    .filter(|(&j, _)| col_map[j] != usize::MAX)
                    .map(|(&j, &x)| (col_map[j], x)),
            );
            scratch.sort_unstable_by_key(|e| e.0);
            for &(j, x) in &scratch {
                col_idx.push(j);
                values.push(x);
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            rows: rows.len(),
            cols: cols.len(),
            row_ptr,
            col_idx,
            values,
            symmetric: self.symmetric && rows == cols,
        }
    }

    /// Rows that store at least one nonzero value.
    pub fn nonzero_rows(&self) -> Vec<usize> {
        (0..self.rows)
            .filter(|&i| self.row(i).1.iter().any(|&v| v != 0.0))
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.cols]; self.rows];
        for (i, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                row[j] = v;
            }
        }
        d
    }

    pub(crate) fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small() -> SparseMatrix {
        SparseMatrix::from_triplets(
            3,
            4,
            vec![(0, 1, 2.0), (2, 3, -1.0), (0, 1, 1.0), (1, 0, 4.0), (0, 0, 5.0)],
        )
    }

    #[test]
    fn triplets_sum_and_sort() {
        let a = small();
        assert_eq!(a.row(0), (&[0, 1][..], &[5.0, 3.0][..]));
        assert_eq!(a.get(1, 0), 4.0);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.nnz(), 4);
    }

    #[test]
    fn transpose_and_products() {
        let a = small();
        let at = a.transpose();
        assert_eq!(at.rows(), 4);
        assert_eq!(at.get(1, 0), 3.0);
        let ata = at.matmul(&a).unwrap();
        assert_eq!(ata.get(0, 0), 25.0 + 16.0);
        assert_eq!(ata.get(0, 1), 15.0);
        assert!(ata.clone().into_symmetric().is_ok());
        assert!(a.matmul(&a).is_err());
        assert_eq!(a.mul_transpose_vec(&[1.0, 1.0, 1.0]), at.mul_vec(&[1.0, 1.0, 1.0]));
    }

    #[test]
    fn select_and_nonzero_rows() {
        let a = small();
        let s = a.select(&[2, 0], &[3, 0]);
        assert_eq!(s.to_dense(), vec![vec![-1.0, 0.0], vec![0.0, 5.0]]);
        let z = SparseMatrix::from_triplets(3, 2, vec![(1, 0, 0.0), (2, 1, 1.0)]);
        assert_eq!(z.nonzero_rows(), vec![2]);
    }

    #[test]
    fn asymmetric_matrix_is_rejected() {
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 1, 1.0)]);
        assert!(a.clone().into_symmetric().is_err());
        assert!(a.symmetrized().into_symmetric().is_ok());
    }

    proptest! {
        #[test]
        fn matvec_matches_dense(entries in prop::collection::vec((0usize..6, 0usize..5, -3.0f64..3.0), 0..30),
                                x in prop::collection::vec(-2.0f64..2.0, 5)) {
            let a = SparseMatrix::from_triplets(6, 5, entries.clone());
            let mut dense = vec![vec![0.0; 5]; 6];
            for (i, j, v) in entries { dense[i][j] += v; }
            let y = a.mul_vec(&x);
            for i in 0..6 {
                let expect: f64 = (0..5).map(|j| dense[i][j] * x[j]).sum();
                prop_assert!((y[i] - expect).abs() < 1e-12);
            }
            prop_assert_eq!(a.transpose().transpose(), a);
        }
    }
}
