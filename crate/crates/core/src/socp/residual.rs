//! Unscaled iterates and the optimality measures reported by both algorithms.

use super::presolve::StandardForm;
use super::scaling::Scaling;
use super::{SocpStatus, TraceRow};
use crate::scalar::{dot, norm_inf, Scalar};

/// `sup_{s ∈ K} vᵀs`, ignoring unbounded directions whose weight is below `tol`.
pub(crate) fn support<T: Scalar>(form: &StandardForm<T>, v: &[T], tol: T) -> T {
    form.cone
        .ranges()
        .map(|(r, b)| b.support_tolerant(&v[r], tol))
        .fold(T::zero(), |a, b| a + b)
}

pub(crate) struct Residuals<T> {
    pub primal: T,
    pub dual: T,
    pub gap: T,
    pub primal_scale: T,
    pub dual_scale: T,
    pub pobj: T,
    pub dobj: T,
}

/// Unscaled iterate.
pub(crate) struct Point<T> {
    pub x: Vec<T>,
    pub s: Vec<T>,
    pub y: Vec<T>,
}

pub(crate) fn unscale<T: Scalar>(sc: &Scaling<T>, x: &[T], s: &[T], y: &[T]) -> Point<T> {
    Point {
        x: x.iter().zip(&sc.d).map(|(v, d)| *v * *d).collect(),
        s: s.iter().zip(&sc.e).map(|(v, e)| *v / *e).collect(),
        y: y.iter().zip(&sc.e).map(|(v, e)| *v * *e / sc.k).collect(),
    }
}

pub(crate) fn residuals<T: Scalar>(orig: &StandardForm<T>, p: &Point<T>) -> Residuals<T> {
    let ax = orig.a.mul(&p.x);
    let rp: Vec<T> = (0..orig.m()).map(|i| ax[i] + p.s[i] - orig.b[i]).collect();
    let aty = orig.a.mul_t(&p.y);
    let rd: Vec<T> = (0..orig.n()).map(|j| orig.c[j] - aty[j]).collect();
    let pobj = dot(&orig.c, &p.x);
    let tol = T::lit(1e-9) * (T::one() + norm_inf(&p.y));
    let dobj = dot(&orig.b, &p.y) - support(orig, &p.y, tol);
    Residuals {
        primal: norm_inf(&rp),
        dual: norm_inf(&rd),
        gap: (pobj - dobj).abs(),
        primal_scale: norm_inf(&ax).max(norm_inf(&p.s)).max(norm_inf(&orig.b)),
        dual_scale: norm_inf(&orig.c).max(norm_inf(&aty)),
        pobj,
        dobj,
    }
}

pub(crate) struct Outcome<T> {
    pub status: SocpStatus,
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub primal_residual: T,
    pub dual_residual: T,
    pub duality_gap: T,
    pub iters: usize,
    pub certificate: Option<String>,
    pub trace: Vec<TraceRow<T>>,
}

pub(crate) fn finish<T: Scalar>(
    status: SocpStatus,
    p: Point<T>,
    res: &Residuals<T>,
    iters: usize,
    certificate: Option<String>,
    trace: Vec<TraceRow<T>>,
) -> Outcome<T> {
    Outcome {
        status,
        x: p.x,
        // equality rows enter as `L x - rhs ∈ {0}` with `A = -L`, so `-y` is
        // the sensitivity of the optimum to `rhs`
        y: p.y.into_iter().map(|v| -v).collect(),
        primal_residual: res.primal,
        dual_residual: res.dual,
        duality_gap: res.gap,
        iters,
        certificate,
        trace,
    }
}
