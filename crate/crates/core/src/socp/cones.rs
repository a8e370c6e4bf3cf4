//! Closed-form projections onto the cones the solver supports.

use crate::conic::RotatedCone;
use crate::scalar::Scalar;

/// Euclidean projection onto `{(t, u) : t >= ||u||}`.
pub fn project_soc<T: Scalar>(v: &[T]) -> Vec<T> {
    let mut out = v.to_vec();
    project_soc_in_place(&mut out);
    out
}

pub fn project_soc_in_place<T: Scalar>(v: &mut [T]) {
    let Some((t, u)) = v.split_first_mut() else {
        return;
    };
    let norm = u.iter().map(|x| *x * *x).sum::<T>().sqrt();
    if norm <= *t {
        return;
    }
    if norm <= -*t {
        *t = T::zero();
        u.iter_mut().for_each(|x| *x = T::zero());
        return;
    }
    let half = (*t + norm) / T::lit(2.0);
    *t = half;
    let ratio = half / norm;
    u.iter_mut().for_each(|x| *x *= ratio);
}

/// Linear forms (lists of `(variable, coefficient)`) whose values make up the
/// second-order-cone vector equivalent to a rotated cone:
/// `2pq >= w||u||², p, q >= 0  ⇔  (p + q, p - q, √(2w)·u) ∈ SOC`.
pub fn rotated_to_soc<T: Scalar>(cone: &RotatedCone<T>) -> Vec<Vec<(usize, T)>> {
    let one = T::one();
    let mut rows = Vec::with_capacity(cone.body.len() + 2);
    rows.push(vec![(cone.p, one), (cone.q, one)]);
    rows.push(vec![(cone.p, one), (cone.q, -one)]);
    let s = (T::lit(2.0) * cone.weight).sqrt();
    for &u in &cone.body {
        rows.push(vec![(u, s)]);
    }
    rows
}

/// Pointwise version of [`rotated_to_soc`].
pub fn rotated_point_to_soc<T: Scalar>(p: T, q: T, u: &[T], weight: T) -> Vec<T> {
    let s = (T::lit(2.0) * weight).sqrt();
    let mut out = vec![p + q, p - q];
    out.extend(u.iter().map(|x| *x * s));
    out
}

/// Signed distance outside the second-order cone: `||u|| - t` (negative inside).
pub fn soc_violation<T: Scalar>(v: &[T]) -> T {
    let norm = v[1..].iter().map(|x| *x * *x).sum::<T>().sqrt();
    norm - v[0]
}

/// One block of the product cone `K` in `A x + s = b, s ∈ K`.
#[derive(Debug, Clone, PartialEq)]
pub enum ConeBlock<T> {
    /// `s = 0`
    Zero(usize),
    /// `lo <= s <= hi` elementwise; bounds may be infinite.
    Interval {
        lo: Vec<T>,
        hi: Vec<T>,
    },
    Soc(usize),
}

impl<T: Scalar> ConeBlock<T> {
    pub fn dim(&self) -> usize {
        match self {
            ConeBlock::Zero(d) | ConeBlock::Soc(d) => *d,
            ConeBlock::Interval { lo, .. } => lo.len(),
        }
    }

    pub fn project(&self, s: &mut [T]) {
        match self {
            ConeBlock::Zero(_) => s.iter_mut().for_each(|v| *v = T::zero()),
            ConeBlock::Interval { lo, hi } => {
                for (k, v) in s.iter_mut().enumerate() {
                    *v = v.max(lo[k]).min(hi[k]);
                }
            }
            ConeBlock::Soc(_) => project_soc_in_place(s),
        }
    }

    /// Support function `sup_{s ∈ K} yᵀs` (may be +∞).
    pub fn support(&self, y: &[T]) -> T {
        match self {
            ConeBlock::Zero(_) => T::zero(),
            ConeBlock::Interval { lo, hi } => {
                let mut acc = T::zero();
                for (k, &v) in y.iter().enumerate() {
                    if v > T::zero() {
                        acc += v * hi[k];
                    } else if v < T::zero() {
                        acc += v * lo[k];
                    }
                }
                acc
            }
            ConeBlock::Soc(_) => {
                // y must lie in the polar cone, i.e. -y ∈ SOC
                if soc_violation(&y.iter().map(|v| -*v).collect::<Vec<_>>()) <= T::zero() {
                    T::zero()
                } else {
                    T::infinity()
                }
            }
        }
    }

    /// Like [`ConeBlock::support`] but tolerant of numerical noise: infinite
    /// contributions count only when they exceed `tol` in magnitude.
    pub fn support_tolerant(&self, y: &[T], tol: T) -> T {
        match self {
            ConeBlock::Interval { lo, hi } => {
                let mut acc = T::zero();
                for (k, &v) in y.iter().enumerate() {
                    let bound = if v > T::zero() { hi[k] } else { lo[k] };
                    if v.abs() <= tol && !bound.is_finite() {
                        continue;
                    }
                    if v != T::zero() {
                        acc += v * bound;
                    }
                }
                acc
            }
            ConeBlock::Soc(_) => {
                let neg: Vec<T> = y.iter().map(|v| -*v).collect();
                if soc_violation(&neg) <= tol {
                    T::zero()
                } else {
                    T::infinity()
                }
            }
            ConeBlock::Zero(_) => T::zero(),
        }
    }

    /// Distance of a direction `d` from the recession cone of this block.
    pub fn recession_distance(&self, d: &[T]) -> T {
        match self {
            ConeBlock::Zero(_) => d.iter().fold(T::zero(), |m, v| m.max(v.abs())),
            ConeBlock::Interval { lo, hi } => {
                let mut worst = T::zero();
                for (k, &v) in d.iter().enumerate() {
                    let lo_ok = !lo[k].is_finite() || v >= T::zero();
                    let hi_ok = !hi[k].is_finite() || v <= T::zero();
                    if !lo_ok || !hi_ok {
                        worst = worst.max(v.abs());
                    }
                }
                worst
            }
            ConeBlock::Soc(_) => {
                let mut p = d.to_vec();
                project_soc_in_place(&mut p);
                p.iter()
                    .zip(d)
                    .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()))
            }
        }
    }
}

/// Product of cone blocks laid out contiguously.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProductCone<T> {
    pub blocks: Vec<ConeBlock<T>>,
}

impl<T: Scalar> ProductCone<T> {
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim()).sum()
    }

    pub fn ranges(&self) -> impl Iterator<Item = (std::ops::Range<usize>, &ConeBlock<T>)> {
        let mut start = 0;
        self.blocks.iter().map(move |b| {
            let r = start..start + b.dim();
            start = r.end;
            (r, b)
        })
    }

    pub fn project(&self, s: &mut [T]) {
        for (r, b) in self.ranges() {
            b.project(&mut s[r]);
        }
    }
}
