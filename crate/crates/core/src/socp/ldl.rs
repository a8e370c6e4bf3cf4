//! Sparse LDLᵀ factorization of quasi-definite matrices (no pivoting) with an
//! approximate-minimum-degree fill-reducing ordering.

use super::sparse::CscMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
pub struct LdlFactor<T> {
    n: usize,
    perm: Vec<usize>,
    /// Upper triangle in the permuted ordering.
    upper: CscMatrix<T>,
    /// Position in `upper` of each nonzero of the caller's matrix.
    map: Vec<usize>,
    etree: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<T>,
    d: Vec<T>,
    dinv: Vec<T>,
    /// Expected pivot signs (permuted order) for dynamic regularization.
    signs: Option<Vec<i8>>,
    reg_eps: T,
    reg_delta: T,
    regularized: usize,
}

impl<T: Scalar> LdlFactor<T> {
    /// Orders and factors the symmetric matrix whose upper triangle (diagonal
    /// included) is `upper`.
    pub fn new(upper: &CscMatrix<T>) -> Result<Self> {
        let mut factor = Self::symbolic(upper)?;
        factor.refactor()?;
        Ok(factor)
    }

    /// Like [`LdlFactor::new`], with dynamic regularization (see
    /// [`LdlFactor::set_pivot_signs`]) active from the first factorization.
    pub fn with_pivot_signs(upper: &CscMatrix<T>, signs: &[i8], eps: T, delta: T) -> Result<Self> {
        let mut factor = Self::symbolic(upper)?;
        factor.set_pivot_signs(signs, eps, delta);
        factor.refactor()?;
        Ok(factor)
    }

    fn symbolic(upper: &CscMatrix<T>) -> Result<Self> {
        let n = upper.ncols;
        debug_assert_eq!(upper.nrows, n);
        let (perm, iperm) = if n == 0 {
            (Vec::new(), Vec::new())
        } else {
            let control = amd::Control::default();
            let (p, pinv, _) = amd::order::<usize>(n, &upper.colptr, &upper.rowval, &control)
                .map_err(|s| Error::Numerical(format!("ordering failed: {s:?}")))?;
            (p, pinv)
        };

        // permute into upper-triangular CSC, remembering where each entry lands
        let nnz = upper.nnz();
        let mut target = Vec::with_capacity(nnz);
        let mut counts = vec![0usize; n + 1];
        for j in 0..n {
            for p in upper.colptr[j]..upper.colptr[j + 1] {
                let i = upper.rowval[p];
                let (pi, pj) = (iperm[i], iperm[j]);
                let (r, c) = if pi <= pj { (pi, pj) } else { (pj, pi) };
                target.push((r, c, p));
                counts[c + 1] += 1;
            }
        }
        for c in 0..n {
            counts[c + 1] += counts[c];
        }
        target.sort_by_key(|&(r, c, _)| (c, r));
        let mut map = vec![0; nnz];
        let mut rowval = Vec::with_capacity(nnz);
        let mut nzval = Vec::with_capacity(nnz);
        for (k, &(r, _, p)) in target.iter().enumerate() {
            map[p] = k;
            rowval.push(r);
            nzval.push(upper.nzval[p]);
        }
        let permuted = CscMatrix {
            nrows: n,
            ncols: n,
            colptr: counts,
            rowval,
            nzval,
        };

        let (etree, lnz) = elimination_tree(&permuted)?;
        let mut lp = vec![0; n + 1];
        for i in 0..n {
            lp[i + 1] = lp[i] + lnz[i];
        }
        let total = lp[n];
        Ok(LdlFactor {
            n,
            perm,
            upper: permuted,
            map,
            etree,
            lp,
            li: vec![0; total],
            lx: vec![T::zero(); total],
            d: vec![T::zero(); n],
            dinv: vec![T::zero(); n],
            signs: None,
            reg_eps: T::zero(),
            reg_delta: T::zero(),
            regularized: 0,
        })
    }

    /// Enables dynamic regularization: a pivot whose sign disagrees with
    /// `signs[k]` (original ordering) or whose magnitude is below `eps` is
    /// replaced by `signs[k]·delta`. Takes effect at the next refactor.
    pub fn set_pivot_signs(&mut self, signs: &[i8], eps: T, delta: T) {
        self.signs = Some((0..self.n).map(|k| signs[self.perm[k]]).collect());
        self.reg_eps = eps;
        self.reg_delta = delta;
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn factor_nnz(&self) -> usize {
        self.lp[self.n]
    }

    /// Pivots replaced by dynamic regularization in the last factorization.
    pub fn regularized_pivots(&self) -> usize {
        self.regularized
    }

    /// Overwrites the value of nonzero `index` of the original matrix.
    /// Call [`LdlFactor::refactor`] afterwards.
    pub fn set_value(&mut self, index: usize, value: T) {
        self.upper.nzval[self.map[index]] = value;
    }

    /// Numeric factorization on the fixed symbolic pattern.
    pub fn refactor(&mut self) -> Result<()> {
        let n = self.n;
        if n == 0 {
            return Ok(());
        }
        let a = &self.upper;
        let mut y_markers = vec![false; n];
        let mut y_vals = vec![T::zero(); n];
        let mut y_idx = vec![0usize; n];
        let mut elim = vec![0usize; n];
        let mut next_space: Vec<usize> = self.lp[..n].to_vec();
        self.d.iter_mut().for_each(|v| *v = T::zero());
        self.regularized = 0;

        for k in 0..n {
            let mut nnz_y = 0;
            for p in a.colptr[k]..a.colptr[k + 1] {
                let bidx = a.rowval[p];
                if bidx == k {
                    self.d[k] = a.nzval[p];
                    continue;
                }
                y_vals[bidx] = a.nzval[p];
                if !y_markers[bidx] {
                    y_markers[bidx] = true;
                    elim[0] = bidx;
                    let mut nnz_e = 1;
                    let mut next = self.etree[bidx];
                    while next != NONE && next < k {
                        if y_markers[next] {
                            break;
                        }
                        y_markers[next] = true;
                        elim[nnz_e] = next;
                        nnz_e += 1;
                        next = self.etree[next];
                    }
                    while nnz_e > 0 {
                        nnz_e -= 1;
                        y_idx[nnz_y] = elim[nnz_e];
                        nnz_y += 1;
                    }
                }
            }
            for i in (0..nnz_y).rev() {
                let c = y_idx[i];
                let tmp = next_space[c];
                let yc = y_vals[c];
                for j in self.lp[c]..tmp {
                    y_vals[self.li[j]] -= self.lx[j] * yc;
                }
                self.li[tmp] = k;
                self.lx[tmp] = yc * self.dinv[c];
                self.d[k] -= yc * self.lx[tmp];
                next_space[c] += 1;
                y_vals[c] = T::zero();
                y_markers[c] = false;
            }
            if let Some(signs) = &self.signs {
                let sign = T::lit(signs[k] as f64);
                if self.d[k] * sign <= self.reg_eps {
                    self.d[k] = sign * self.reg_delta;
                    self.regularized += 1;
                }
            }
            if self.d[k] == T::zero() || !self.d[k].is_finite() {
                return Err(Error::Numerical(format!(
                    "zero pivot at column {k} of the KKT system"
                )));
            }
            self.dinv[k] = T::one() / self.d[k];
        }
        Ok(())
    }

    /// Solves `K x = b` in place.
    pub fn solve(&self, b: &mut [T]) {
        let n = self.n;
        let mut x: Vec<T> = (0..n).map(|k| b[self.perm[k]]).collect();
        for i in 0..n {
            let xi = x[i];
            for j in self.lp[i]..self.lp[i + 1] {
                x[self.li[j]] -= self.lx[j] * xi;
            }
        }
        for i in 0..n {
            x[i] *= self.dinv[i];
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in self.lp[i]..self.lp[i + 1] {
                acc -= self.lx[j] * x[self.li[j]];
            }
            x[i] = acc;
        }
        for k in 0..n {
            b[self.perm[k]] = x[k];
        }
    }

    /// Number of negative pivots (the inertia count of the factored matrix).
    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|v| **v < T::zero()).count()
    }
}

fn elimination_tree<T: Scalar>(a: &CscMatrix<T>) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = a.ncols;
    let mut work = vec![NONE; n];
    let mut lnz = vec![0usize; n];
    let mut etree = vec![NONE; n];
    for j in 0..n {
        work[j] = j;
        for p in a.colptr[j]..a.colptr[j + 1] {
            let mut i = a.rowval[p];
            if i > j {
                return Err(Error::Numerical(
                    "KKT pattern is not upper triangular".into(),
                ));
            }
            while work[i] != j {
                if etree[i] == NONE {
                    etree[i] = j;
                }
                lnz[i] += 1;
                work[i] = j;
                i = etree[i];
            }
        }
    }
    Ok((etree, lnz))
}

/// `y = K x` for a symmetric matrix stored as its upper triangle.
pub fn sym_upper_mul<T: Scalar>(upper: &CscMatrix<T>, x: &[T]) -> Vec<T> {
    let mut y = vec![T::zero(); upper.ncols];
    for j in 0..upper.ncols {
        for p in upper.colptr[j]..upper.colptr[j + 1] {
            let i = upper.rowval[p];
            let v = upper.nzval[p];
            y[i] += v * x[j];
            if i != j {
                y[j] += v * x[i];
            }
        }
    }
    y
}
