//! Modified Ruiz equilibration of the constraint matrix.

use super::cones::{ConeBlock, ProductCone};
use super::sparse::CscMatrix;
use crate::scalar::{norm_inf, Scalar};

#[derive(Debug, Clone)]
pub(crate) struct Scaling<T> {
    /// Column scaling: `x = d ∘ x̄`.
    pub d: Vec<T>,
    /// Row scaling: `s̄ = e ∘ s`.
    pub e: Vec<T>,
    /// Cost scaling: `c̄ = k · d ∘ c`.
    pub k: T,
}

impl<T: Scalar> Scaling<T> {
    pub fn identity(n: usize, m: usize) -> Self {
        Scaling {
            d: vec![T::one(); n],
            e: vec![T::one(); m],
            k: T::one(),
        }
    }
}

fn clip<T: Scalar>(v: T) -> T {
    let (lo, hi) = (T::lit(1e-4), T::lit(1e4));
    if v < lo {
        // empty rows and columns keep unit scaling
        if v == T::zero() {
            T::one()
        } else {
            lo
        }
    } else {
        v.min(hi)
    }
}

/// Scales `a`, `b`, `c` and the interval bounds of `cone` in place and
/// returns the applied scaling. Second-order-cone blocks receive a single
/// row factor so the cone is preserved.
pub(crate) fn equilibrate<T: Scalar>(
    a: &mut CscMatrix<T>,
    b: &mut [T],
    c: &mut [T],
    cone: &mut ProductCone<T>,
    iterations: usize,
) -> Scaling<T> {
    let (m, n) = (a.nrows, a.ncols);
    let mut sc = Scaling::identity(n, m);
    for _ in 0..iterations {
        let dd: Vec<T> = a
            .col_norms()
            .into_iter()
            .map(|v| T::one() / clip(v).sqrt())
            .collect();
        let mut row = a.row_norms();
        for (range, block) in cone.ranges() {
            if let ConeBlock::Soc(_) = block {
                let worst = row[range.clone()]
                    .iter()
                    .fold(T::zero(), |acc, v| acc.max(*v));
                row[range].iter_mut().for_each(|v| *v = worst);
            }
        }
        let de: Vec<T> = row.into_iter().map(|v| T::one() / clip(v).sqrt()).collect();
        a.scale(&de, &dd);
        for j in 0..n {
            sc.d[j] *= dd[j];
        }
        for i in 0..m {
            sc.e[i] *= de[i];
        }
    }
    for j in 0..n {
        c[j] *= sc.d[j];
    }
    let cmax = norm_inf(c);
    sc.k = if cmax == T::zero() {
        T::one()
    } else {
        T::one() / clip(cmax)
    };
    c.iter_mut().for_each(|v| *v *= sc.k);
    for i in 0..m {
        b[i] *= sc.e[i];
    }
    for (range, block) in cone.ranges_mut() {
        if let ConeBlock::Interval { lo, hi } = block {
            for (k, i) in range.enumerate() {
                lo[k] *= sc.e[i];
                hi[k] *= sc.e[i];
            }
        }
    }
    sc
}

impl<T: Scalar> ProductCone<T> {
    pub(crate) fn ranges_mut(
        &mut self,
    ) -> impl Iterator<Item = (std::ops::Range<usize>, &mut ConeBlock<T>)> {
        let mut start = 0;
        self.blocks.iter_mut().map(move |b| {
            let r = start..start + b.dim();
            start = r.end;
            (r, b)
        })
    }
}
