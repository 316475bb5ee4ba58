/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOp {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseOp {
    /// Builds a matrix from `(row, col, value)` triplets; duplicates are
    /// summed in input order, so equal inputs give bit-identical output.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(i, j, _) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) outside {nrows}x{ncols}");
            counts[i + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut raw = vec![(0usize, 0.0f64); triplets.len()];
        for &(i, j, v) in triplets {
            raw[fill[i]] = (j, v);
            fill[i] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..nrows {
            let row = &mut raw[counts[i]..counts[i + 1]];
            // stable sort keeps the summation order of duplicates fixed
            row.sort_by_key(|e| e.0);
            for &(j, v) in row.iter() {
                if cols.len() > row_ptr[i] && *cols.last().unwrap() == j {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        SparseOp {
            nrows,
            ncols,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn identity(n: usize) -> Self {
        SparseOp {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            cols: (0..n).collect(),
            vals: vec![1.0; n],
        }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut m = Self::identity(d.len());
        m.vals.copy_from_slice(d);
        m
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseOp {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            cols: vec![],
            vals: vec![],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    /// Iterates over stored entries as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        c.binary_search(&j).map_or(0.0, |k| v[k])
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "matvec dimension");
        (0..self.nrows)
            .map(|i| {
                let (c, v) = self.row(i);
                c.iter().zip(v).map(|(&j, a)| a * x[j]).sum()
            })
            .collect()
    }

    /// `self^T x`.
    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows, "transposed matvec dimension");
        let mut y = vec![0.0; self.ncols];
        for (i, xi) in x.iter().enumerate() {
            let (c, v) = self.row(i);
            for (&j, a) in c.iter().zip(v) {
                y[j] += a * xi;
            }
        }
        y
    }

    pub fn transpose(&self) -> SparseOp {
        let t: Vec<(usize, usize, f64)> = self.triplets().map(|(i, j, v)| (j, i, v)).collect();
        SparseOp::from_triplets(self.ncols, self.nrows, &t)
    }

    pub fn scale(&self, alpha: f64) -> SparseOp {
        let mut m = self.clone();
        m.vals.iter_mut().for_each(|v| *v *= alpha);
        m
    }

    /// `self + alpha * other`.
    pub fn add(&self, other: &SparseOp, alpha: f64) -> SparseOp {
        assert_eq!(
            (self.nrows, self.ncols),
            (other.nrows, other.ncols),
            "sparse add dimension"
        );
        let t: Vec<(usize, usize, f64)> = self
            .triplets()
            .chain(other.triplets().map(|(i, j, v)| (i, j, alpha * v)))
            .collect();
        SparseOp::from_triplets(self.nrows, self.ncols, &t)
    }

    /// Submatrix of the listed rows and columns, renumbered in list order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> SparseOp {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (k, &j) in cols.iter().enumerate() {
            col_map[j] = k;
        }
        let mut t = Vec::new();
        for (ri, &i) in rows.iter().enumerate() {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                if col_map[j] != usize::MAX {
                    t.push((ri, col_map[j], a));
                }
            }
        }
        SparseOp::from_triplets(rows.len(), cols.len(), &t)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Infinity norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest `|A_ij - sign * A_ji|`.
    pub fn symmetry_defect(&self, sign: f64) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let t = self.transpose();
        self.add(&t, -sign).max_abs()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.triplets() {
            d[i][j] += v;
        }
        d
    }

    /// Stacks blocks into one matrix. `blocks[r][c]` may be `None` for a
    /// zero block; every row and column of blocks needs at least one entry
    /// to fix its size.
    pub fn block(blocks: &[Vec<Option<&SparseOp>>]) -> SparseOp {
        let nbr = blocks.len();
        let nbc = blocks[0].len();
        let mut rsize = vec![0; nbr];
        let mut csize = vec![0; nbc];
        for (r, row) in blocks.iter().enumerate() {
            for (c, b) in row.iter().enumerate() {
                if let Some(b) = b {
                    rsize[r] = b.nrows;
                    csize[c] = b.ncols;
                }
            }
        }
        let roff: Vec<usize> = rsize
            .iter()
            .scan(0, |s, n| {
                let o = *s;
                *s += n;
                Some(o)
            })
            .collect();
        let coff: Vec<usize> = csize
            .iter()
            .scan(0, |s, n| {
                let o = *s;
                *s += n;
                Some(o)
            })
            .collect();
        let mut t = Vec::new();
        for (r, row) in blocks.iter().enumerate() {
            for (c, b) in row.iter().enumerate() {
                if let Some(b) = b {
                    t.extend(b.triplets().map(|(i, j, v)| (i + roff[r], j + coff[c], v)));
                }
            }
        }
        SparseOp::from_triplets(rsize.iter().sum(), csize.iter().sum(), &t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let m = SparseOp::from_triplets(2, 3, &[(0, 2, 1.0), (1, 0, 2.0), (0, 2, 0.5), (0, 0, -1.0)]);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 2), 1.5);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.matvec(&[1.0, 1.0, 2.0]), vec![2.0, 2.0]);
        assert_eq!(m.matvec_transpose(&[1.0, 1.0]), vec![1.0, 0.0, 1.5]);
    }

    #[test]
    fn transpose_and_select() {
        let m = SparseOp::from_triplets(3, 3, &[(0, 1, 1.0), (2, 0, 4.0), (1, 1, 3.0)]);
        let t = m.transpose();
        assert_eq!(t.get(1, 0), 1.0);
        assert_eq!(t.get(0, 2), 4.0);
        let s = m.select(&[2, 1], &[0, 1]);
        assert_eq!(s.to_dense(), vec![vec![4.0, 0.0], vec![0.0, 3.0]]);
    }

    #[test]
    fn block_assembly() {
        let a = SparseOp::identity(2);
        let b = SparseOp::from_triplets(2, 1, &[(1, 0, 5.0)]);
        let m = SparseOp::block(&[vec![Some(&a), Some(&b)], vec![Some(&b.transpose()), None]]);
        assert_eq!(m.nrows(), 3);
        assert_eq!(m.get(1, 2), 5.0);
        assert_eq!(m.get(2, 1), 5.0);
        assert_eq!(m.get(2, 2), 0.0);
    }

    #[test]
    fn antisymmetry_defect() {
        let m = SparseOp::from_triplets(2, 2, &[(0, 1, 2.0), (1, 0, -2.0)]);
        assert_eq!(m.symmetry_defect(-1.0), 0.0);
        assert_eq!(m.symmetry_defect(1.0), 4.0);
    }
}
