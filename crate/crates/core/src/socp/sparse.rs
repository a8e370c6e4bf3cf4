use crate::scalar::Scalar;

/// Compressed sparse column matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix<T> {
    pub nrows: usize,
    pub ncols: usize,
    pub colptr: Vec<usize>,
    pub rowval: Vec<usize>,
    pub nzval: Vec<T>,
}

impl<T: Scalar> CscMatrix<T> {
    /// Builds from (row, col, value) entries; duplicates are summed, explicit
    /// zeros kept so the sparsity pattern stays stable across value updates.
    pub fn from_triplets(nrows: usize, ncols: usize, entries: &[(usize, usize, T)]) -> Self {
        let mut sorted: Vec<(usize, usize, T)> = entries.to_vec();
        sorted.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
        let mut colptr = vec![0; ncols + 1];
        let mut rowval = Vec::with_capacity(sorted.len());
        let mut nzval: Vec<T> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            debug_assert!(r < nrows && c < ncols);
            if last == Some((r, c)) {
                *nzval.last_mut().unwrap() += v;
                continue;
            }
            rowval.push(r);
            nzval.push(v);
            colptr[c + 1] += 1;
            last = Some((r, c));
        }
        for c in 0..ncols {
            colptr[c + 1] += colptr[c];
        }
        CscMatrix {
            nrows,
            ncols,
            colptr,
            rowval,
            nzval,
        }
    }

    pub fn nnz(&self) -> usize {
        self.nzval.len()
    }

    pub fn col(&self, j: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        (self.colptr[j]..self.colptr[j + 1]).map(move |p| (self.rowval[p], self.nzval[p]))
    }

    /// `y += A x`
    pub fn gemv_add(&self, x: &[T], y: &mut [T]) {
        for (j, &xj) in x.iter().enumerate() {
            if xj == T::zero() {
                continue;
            }
            for p in self.colptr[j]..self.colptr[j + 1] {
                y[self.rowval[p]] += self.nzval[p] * xj;
            }
        }
    }

    /// `y += Aᵀ x`
    pub fn gemv_t_add(&self, x: &[T], y: &mut [T]) {
        for (j, yj) in y.iter_mut().enumerate() {
            let mut acc = T::zero();
            for p in self.colptr[j]..self.colptr[j + 1] {
                acc += self.nzval[p] * x[self.rowval[p]];
            }
            *yj += acc;
        }
    }

    pub fn mul(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.nrows];
        self.gemv_add(x, &mut y);
        y
    }

    pub fn mul_t(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.ncols];
        self.gemv_t_add(x, &mut y);
        y
    }

    /// `A ← diag(left) · A · diag(right)`
    pub fn scale(&mut self, left: &[T], right: &[T]) {
        for j in 0..self.ncols {
            for p in self.colptr[j]..self.colptr[j + 1] {
                self.nzval[p] = self.nzval[p] * left[self.rowval[p]] * right[j];
            }
        }
    }

    /// Infinity norm of every column.
    pub fn col_norms(&self) -> Vec<T> {
        (0..self.ncols)
            .map(|j| self.col(j).fold(T::zero(), |m, (_, v)| m.max(v.abs())))
            .collect()
    }

    /// Infinity norm of every row.
    pub fn row_norms(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.nrows];
        for (r, v) in self.rowval.iter().zip(&self.nzval) {
            out[*r] = out[*r].max(v.abs());
        }
        out
    }
}
