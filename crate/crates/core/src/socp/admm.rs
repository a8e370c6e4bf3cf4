//! Operator-splitting iteration on the presolved standard form.
//!
//! Each step solves
//! `[σI  Āᵀ; Ā  -diag(1/ρ)] [x̃; ν] = [σx - c̄; b̄ - s + y/ρ]`,
//! over-relaxes, projects `ŝ + y/ρ` onto the cone and updates `y`.
//! At optimality `c = Aᵀy` with `y` in the polar cone of `K`.

use super::cones::ConeBlock;
use super::ldl::LdlFactor;
use super::presolve::StandardForm;
use super::residual::{finish, residuals, support, unscale, Outcome};
use super::scaling::{equilibrate, Scaling};
use super::sparse::CscMatrix;
use super::{SocpStatus, SolverSettings, TraceRow};
use crate::error::Result;
use crate::scalar::{norm_inf, Scalar};

const RUIZ_ITERS: usize = 25;
const RHO_CHECK_EVERY: usize = 25;
const INFEASIBILITY_START: usize = 100;
const INFEASIBILITY_EVERY: usize = 10;
const EQUALITY_RHO_FACTOR: f64 = 1e3;

struct Kkt<T> {
    factor: LdlFactor<T>,
    /// Nonzero index of each `-1/ρ_i` diagonal entry.
    rho_diag: Vec<usize>,
}

fn build_kkt<T: Scalar>(a: &CscMatrix<T>, sigma: T, rho: &[T]) -> Result<Kkt<T>> {
    let (m, n) = (a.nrows, a.ncols);
    let mut entries = Vec::with_capacity(n + m + a.nnz());
    for j in 0..n {
        entries.push((j, j, sigma));
    }
    for j in 0..n {
        for (i, v) in a.col(j) {
            entries.push((j, n + i, v));
        }
    }
    for i in 0..m {
        entries.push((n + i, n + i, -T::one() / rho[i]));
    }
    let k = CscMatrix::from_triplets(n + m, n + m, &entries);
    let rho_diag = (0..m)
        .map(|i| {
            let col = n + i;
            let last = k.colptr[col + 1] - 1;
            debug_assert_eq!(k.rowval[last], col);
            last
        })
        .collect();
    Ok(Kkt {
        factor: LdlFactor::new(&k)?,
        rho_diag,
    })
}

fn rho_vector<T: Scalar>(form: &StandardForm<T>, rho: T) -> Vec<T> {
    let mut out = Vec::with_capacity(form.m());
    for (_, block) in form.cone.ranges() {
        match block {
            ConeBlock::Zero(d) => {
                out.extend(std::iter::repeat_n(rho * T::lit(EQUALITY_RHO_FACTOR), *d))
            }
            ConeBlock::Interval { lo, hi } => out.extend(lo.iter().zip(hi).map(|(l, h)| {
                if l == h {
                    rho * T::lit(EQUALITY_RHO_FACTOR)
                } else {
                    rho
                }
            })),
            ConeBlock::Soc(d) => out.extend(std::iter::repeat_n(rho, *d)),
        }
    }
    out
}

pub(crate) fn run<T: Scalar>(
    form: StandardForm<T>,
    settings: &SolverSettings<T>,
) -> Result<Outcome<T>> {
    let (m, n) = (form.m(), form.n());
    let orig = form;
    let mut work = orig.clone();
    let sc = if settings.scaling {
        equilibrate(
            &mut work.a,
            &mut work.b,
            &mut work.c,
            &mut work.cone,
            RUIZ_ITERS,
        )
    } else {
        Scaling::identity(n, m)
    };

    let sigma = T::lit(1e-6);
    let alpha = settings.over_relaxation;
    let mut rho_base = settings.step_rho;
    let mut rho = rho_vector(&work, rho_base);
    let mut kkt = build_kkt(&work.a, sigma, &rho)?;

    let mut x = vec![T::zero(); n];
    let mut s = vec![T::zero(); m];
    work.cone.project(&mut s);
    let mut y = vec![T::zero(); m];
    let mut rhs = vec![T::zero(); n + m];
    let mut s_hat = vec![T::zero(); m];
    let mut trace = Vec::new();
    let (eps_p, eps_d, eps_inf) = (
        settings.eps_primal,
        settings.eps_dual,
        settings.eps_infeasible,
    );

    let mut last = None;
    for iter in 1..=settings.max_iters {
        let x_prev = x.clone();
        let y_prev = y.clone();

        for j in 0..n {
            rhs[j] = sigma * x[j] - work.c[j];
        }
        for i in 0..m {
            rhs[n + i] = work.b[i] - s[i] + y[i] / rho[i];
        }
        kkt.factor.solve(&mut rhs);
        for j in 0..n {
            x[j] = alpha * rhs[j] + (T::one() - alpha) * x[j];
        }
        for i in 0..m {
            let s_tilde = s[i] - (rhs[n + i] + y[i]) / rho[i];
            s_hat[i] = alpha * s_tilde + (T::one() - alpha) * s[i];
            s[i] = s_hat[i] + y[i] / rho[i];
        }
        work.cone.project(&mut s);
        for i in 0..m {
            y[i] += rho[i] * (s_hat[i] - s[i]);
        }

        let point = unscale(&sc, &x, &s, &y);
        let res = residuals(&orig, &point);
        if settings.record_trace {
            trace.push(TraceRow {
                iteration: iter,
                primal_residual: res.primal,
                dual_residual: res.dual,
                duality_gap: res.gap,
                rho: rho_base,
            });
        }
        let primal_ok = res.primal <= eps_p * (T::one() + res.primal_scale);
        let dual_ok = res.dual <= eps_d * (T::one() + res.dual_scale);
        let gap_ok = res.gap <= eps_p * (T::one() + res.pobj.abs().max(res.dobj.abs()));
        if primal_ok && dual_ok && gap_ok {
            return Ok(finish(SocpStatus::Optimal, point, &res, iter, None, trace));
        }

        if iter >= INFEASIBILITY_START && iter % INFEASIBILITY_EVERY == 0 {
            if let Some(cert) = primal_certificate(&orig, &sc, &y, &y_prev, eps_inf) {
                return Ok(finish(
                    SocpStatus::Infeasible,
                    point,
                    &res,
                    iter,
                    Some(cert),
                    trace,
                ));
            }
            if let Some(cert) = dual_certificate(&orig, &sc, &x, &x_prev, eps_inf) {
                return Ok(finish(
                    SocpStatus::Unbounded,
                    point,
                    &res,
                    iter,
                    Some(cert),
                    trace,
                ));
            }
        }

        if settings.adaptive_rho && iter % RHO_CHECK_EVERY == 0 {
            // balance the relative residuals in the scaled space
            let ax = work.a.mul(&x);
            let rp: Vec<T> = (0..m).map(|i| ax[i] + s[i] - work.b[i]).collect();
            let aty = work.a.mul_t(&y);
            let rd: Vec<T> = (0..n).map(|j| work.c[j] - aty[j]).collect();
            let tiny = T::lit(1e-30);
            let p_rel =
                norm_inf(&rp) / (norm_inf(&ax).max(norm_inf(&s)).max(norm_inf(&work.b)) + tiny);
            let d_rel = norm_inf(&rd) / (norm_inf(&work.c).max(norm_inf(&aty)) + tiny);
            let ratio = (p_rel / (d_rel + tiny)).sqrt();
            if ratio > T::lit(5.0) || ratio < T::lit(0.2) {
                let next = (rho_base * ratio).max(T::lit(1e-6)).min(T::lit(1e6));
                if next != rho_base {
                    rho_base = next;
                    rho = rho_vector(&work, rho_base);
                    for i in 0..m {
                        kkt.factor.set_value(kkt.rho_diag[i], -T::one() / rho[i]);
                    }
                    kkt.factor.refactor()?;
                }
            }
        }
        last = Some((point, res));
    }
    let (point, res) = match last {
        Some(v) => v,
        None => {
            let p = unscale(&sc, &x, &s, &y);
            let r = residuals(&orig, &p);
            (p, r)
        }
    };
    Ok(finish(
        SocpStatus::IterationLimit,
        point,
        &res,
        settings.max_iters,
        None,
        trace,
    ))
}

/// Farkas direction `w`: `Aᵀw = 0`, `bᵀw - σ_K(w) > 0`.
fn primal_certificate<T: Scalar>(
    orig: &StandardForm<T>,
    sc: &Scaling<T>,
    y: &[T],
    y_prev: &[T],
    eps: T,
) -> Option<String> {
    let mut w: Vec<T> = (0..y.len()).map(|i| (y[i] - y_prev[i]) * sc.e[i]).collect();
    let norm = norm_inf(&w);
    if !(norm > T::zero()) {
        return None;
    }
    w.iter_mut().for_each(|v| *v /= norm);
    let atw = norm_inf(&orig.a.mul_t(&w));
    if atw > eps {
        return None;
    }
    let value = crate::scalar::dot(&orig.b, &w) - support(orig, &w, eps);
    (value > eps).then(|| {
        format!("primal infeasibility certificate: |Aᵀw| = {atw:e}, bᵀw - σ(w) = {value:e}")
    })
}

/// Improving ray `w`: `cᵀw < 0`, `-Aw` in the recession cone of `K`.
fn dual_certificate<T: Scalar>(
    orig: &StandardForm<T>,
    sc: &Scaling<T>,
    x: &[T],
    x_prev: &[T],
    eps: T,
) -> Option<String> {
    let mut w: Vec<T> = (0..x.len()).map(|j| (x[j] - x_prev[j]) * sc.d[j]).collect();
    let norm = norm_inf(&w);
    if !(norm > T::zero()) {
        return None;
    }
    w.iter_mut().for_each(|v| *v /= norm);
    let cw = crate::scalar::dot(&orig.c, &w);
    if cw >= -eps {
        return None;
    }
    let aw: Vec<T> = orig.a.mul(&w).into_iter().map(|v| -v).collect();
    let dist = orig
        .cone
        .ranges()
        .map(|(r, b)| b.recession_distance(&aw[r]))
        .fold(T::zero(), |a, b| a.max(b));
    (dist <= eps).then(|| format!("unbounded ray: cᵀw = {cw:e}, recession distance {dist:e}"))
}
