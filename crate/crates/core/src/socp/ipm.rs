//! Primal-dual interior-point method with Nesterov-Todd scaling and a
//! Mehrotra predictor-corrector, applied to the homogeneous self-dual
//! embedding of
//!
//! ```text
//! min cᵀx  s.t.  A x = b,  G x + s = h,  s ∈ K = R₊^l × SOC × … × SOC
//! ```
//!
//! The embedding yields either an optimal pair (τ > 0) or an infeasibility
//! certificate (κ > 0) without a phase-one problem. Each iteration factors
//! one quasi-definite KKT matrix and solves it three times.

use super::cones::ConeBlock;
use super::ldl::LdlFactor;
use super::presolve::StandardForm;
use super::residual::{finish, residuals, unscale, Outcome};
use super::scaling::{equilibrate, Scaling};
use super::sparse::CscMatrix;
use super::{SocpStatus, SolverSettings, TraceRow};
use crate::error::Result;
use crate::scalar::{dot, norm2, norm_inf, Scalar};

const RUIZ_ITERS: usize = 25;
const STATIC_REG: f64 = 1e-9;
const DYNAMIC_EPS: f64 = 1e-13;
const DYNAMIC_DELTA: f64 = 1e-7;

/// Regularization constants, raised in single precision so that they stay
/// above the rounding level.
fn static_reg<T: Scalar>() -> T {
    T::lit(STATIC_REG).max(T::epsilon() * T::lit(10.0))
}

fn dynamic_reg<T: Scalar>() -> (T, T) {
    let eps = T::lit(DYNAMIC_EPS).max(T::epsilon() * T::epsilon());
    (eps, T::lit(DYNAMIC_DELTA).max(T::epsilon().sqrt()))
}
const GMRES_DIM: usize = 60;
const GMRES_RESTARTS: usize = 3;
const REFINE_STEPS: usize = 10;
const STEP_FRACTION: f64 = 0.99;
const MAX_STEP: f64 = 0.999;
const MIN_STEP: f64 = 1e-10;
const MAX_IPM_ITERS: usize = 500;
const NEIGHBOURHOOD: f64 = 1e-3;
const BACKTRACK: f64 = 0.8;
const BACKTRACK_STEPS: usize = 50;

/// Cone layout of the inequality rows: `l` orthant rows, then SOC blocks.
#[derive(Debug, Clone)]
struct Cones {
    l: usize,
    soc: Vec<usize>,
}

impl Cones {
    fn dim(&self) -> usize {
        self.l + self.soc.iter().sum::<usize>()
    }

    fn degree(&self) -> usize {
        self.l + self.soc.len()
    }

    fn soc_ranges(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        let mut start = self.l;
        self.soc.iter().map(move |d| {
            let r = start..start + d;
            start = r.end;
            r
        })
    }

    fn identity<T: Scalar>(&self) -> Vec<T> {
        let mut e = vec![T::zero(); self.dim()];
        e[..self.l].iter_mut().for_each(|v| *v = T::one());
        for r in self.soc_ranges() {
            e[r.start] = T::one();
        }
        e
    }

    /// Smallest `a` such that `v + a·e` lies in the cone (negative when `v`
    /// is interior).
    fn violation<T: Scalar>(&self, v: &[T]) -> T {
        let mut worst = T::neg_infinity();
        for &x in &v[..self.l] {
            worst = worst.max(-x);
        }
        for r in self.soc_ranges() {
            let u = &v[r];
            let norm = u[1..].iter().map(|x| *x * *x).sum::<T>().sqrt();
            worst = worst.max(norm - u[0]);
        }
        worst
    }

    fn shift_interior<T: Scalar>(&self, v: &mut [T]) {
        let a = self.violation(v);
        if a >= T::zero() || self.dim() == 0 {
            let shift = T::one() + a.max(T::zero());
            let e = self.identity::<T>();
            for (x, ei) in v.iter_mut().zip(&e) {
                *x += shift * *ei;
            }
        }
    }

    /// Smallest per-block complementarity: `s_i z_i` on the orthant and
    /// `√(det s · det z)` on each second-order block.
    fn centrality<T: Scalar>(&self, s: &[T], z: &[T]) -> T {
        let mut worst = T::infinity();
        for i in 0..self.l {
            worst = worst.min(s[i] * z[i]);
        }
        for r in self.soc_ranges() {
            let v = (jnorm_sq(&s[r.clone()]) * jnorm_sq(&z[r]))
                .max(T::zero())
                .sqrt();
            worst = worst.min(v);
        }
        worst
    }

    /// Jordan product `u ∘ v`.
    fn product<T: Scalar>(&self, u: &[T], v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); u.len()];
        for i in 0..self.l {
            out[i] = u[i] * v[i];
        }
        for r in self.soc_ranges() {
            let (uu, vv) = (&u[r.clone()], &v[r.clone()]);
            out[r.start] = dot(uu, vv);
            for k in 1..uu.len() {
                out[r.start + k] = uu[0] * vv[k] + vv[0] * uu[k];
            }
        }
        out
    }

    /// Solves `λ ∘ u = v` for `u`.
    fn division<T: Scalar>(&self, lambda: &[T], v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); v.len()];
        for i in 0..self.l {
            out[i] = v[i] / lambda[i];
        }
        for r in self.soc_ranges() {
            let (l, w) = (&lambda[r.clone()], &v[r.clone()]);
            let l1sq: T = l[1..].iter().map(|x| *x * *x).sum();
            let det = l[0] * l[0] - l1sq;
            let l1v1 = dot(&l[1..], &w[1..]);
            let u0 = (l[0] * w[0] - l1v1) / det;
            out[r.start] = u0;
            for k in 1..l.len() {
                out[r.start + k] = (w[k] - u0 * l[k]) / l[0];
            }
        }
        out
    }

    /// Largest `α ≥ 0` (capped at `cap`) with `u + α·d` in the cone.
    fn max_step<T: Scalar>(&self, u: &[T], d: &[T], cap: T) -> T {
        let mut alpha = cap;
        for i in 0..self.l {
            if d[i] < T::zero() {
                alpha = alpha.min(-u[i] / d[i]);
            }
        }
        for r in self.soc_ranges() {
            alpha = alpha.min(soc_step(&u[r.clone()], &d[r], cap));
        }
        alpha.max(T::zero())
    }
}

/// Largest step keeping `u + α d` inside one second-order cone.
fn soc_step<T: Scalar>(u: &[T], d: &[T], cap: T) -> T {
    // f(α) = (u0 + α d0)² - ||u1 + α d1||² = a α² + 2 b α + c
    let a = d[0] * d[0] - d[1..].iter().map(|x| *x * *x).sum::<T>();
    let b = u[0] * d[0] - dot(&u[1..], &d[1..]);
    let c = (u[0] * u[0] - u[1..].iter().map(|x| *x * *x).sum::<T>()).max(T::zero());
    let disc = b * b - a * c;
    let two = T::lit(2.0);
    let root = if a == T::zero() {
        if b < T::zero() {
            -c / (two * b)
        } else {
            cap
        }
    } else if a > T::zero() {
        if b >= T::zero() || disc < T::zero() {
            cap
        } else {
            // both roots positive; the smaller one in a cancellation-free form
            c / (-b + disc.sqrt())
        }
    } else {
        // one positive root
        let q = -b - disc.max(T::zero()).sqrt();
        if q == T::zero() {
            T::zero()
        } else {
            (q / a).max(c / q)
        }
    };
    let mut step = root.min(cap);
    // never leave through the negative cone
    if d[0] < T::zero() {
        step = step.min(-u[0] / d[0]);
    }
    step.max(T::zero())
}

/// Nesterov-Todd scaling point of one SOC block, `W = η·W̄`.
#[derive(Debug, Clone)]
struct SocScale<T> {
    eta: T,
    /// Normalized scaling vector `w̄` with `w̄ᵀJw̄ = 1`.
    w: Vec<T>,
}

#[derive(Debug, Clone)]
struct NtScaling<T> {
    lp: Vec<T>,
    soc: Vec<SocScale<T>>,
    lambda: Vec<T>,
}

fn jnorm_sq<T: Scalar>(v: &[T]) -> T {
    v[0] * v[0] - v[1..].iter().map(|x| *x * *x).sum::<T>()
}

impl<T: Scalar> NtScaling<T> {
    fn identity(cones: &Cones) -> Self {
        let soc = cones
            .soc
            .iter()
            .map(|&d| {
                let mut w = vec![T::zero(); d];
                w[0] = T::one();
                SocScale { eta: T::one(), w }
            })
            .collect();
        NtScaling {
            lp: vec![T::one(); cones.l],
            soc,
            lambda: cones.identity(),
        }
    }

    fn compute(cones: &Cones, s: &[T], z: &[T]) -> Option<Self> {
        let mut lp = Vec::with_capacity(cones.l);
        for i in 0..cones.l {
            if !(s[i] > T::zero() && z[i] > T::zero()) {
                return None;
            }
            lp.push((s[i] / z[i]).sqrt());
        }
        let mut soc = Vec::with_capacity(cones.soc.len());
        for r in cones.soc_ranges() {
            let (sb, zb) = (&s[r.clone()], &z[r]);
            let (sr, zr) = (jnorm_sq(sb), jnorm_sq(zb));
            if !(sr > T::zero() && zr > T::zero() && sb[0] > T::zero() && zb[0] > T::zero()) {
                return None;
            }
            let (sn, zn) = (sr.sqrt(), zr.sqrt());
            let sbar: Vec<T> = sb.iter().map(|v| *v / sn).collect();
            let zbar: Vec<T> = zb.iter().map(|v| *v / zn).collect();
            let gamma = ((T::one() + dot(&sbar, &zbar)) / T::lit(2.0)).sqrt();
            let mut w: Vec<T> = Vec::with_capacity(sb.len());
            w.push((sbar[0] + zbar[0]) / (T::lit(2.0) * gamma));
            for k in 1..sb.len() {
                w.push((sbar[k] - zbar[k]) / (T::lit(2.0) * gamma));
            }
            soc.push(SocScale {
                eta: (sn / zn).sqrt(),
                w,
            });
        }
        let mut sc = NtScaling {
            lp,
            soc,
            lambda: Vec::new(),
        };
        sc.lambda = sc.apply(cones, z, false);
        Some(sc)
    }

    /// `W v` or `W⁻¹ v`.
    fn apply(&self, cones: &Cones, v: &[T], inverse: bool) -> Vec<T> {
        let mut out = vec![T::zero(); v.len()];
        for i in 0..cones.l {
            out[i] = if inverse {
                v[i] / self.lp[i]
            } else {
                v[i] * self.lp[i]
            };
        }
        for (r, sc) in cones.soc_ranges().zip(&self.soc) {
            let vb = &v[r.clone()];
            let w = &sc.w;
            let w1v1 = dot(&w[1..], &vb[1..]);
            // W̄⁻¹ = J W̄ J
            let (v0, sign) = if inverse {
                (vb[0], -T::one())
            } else {
                (vb[0], T::one())
            };
            let head = w[0] * v0 + sign * w1v1;
            let coef = sign * v0 + w1v1 / (T::one() + w[0]);
            let factor = if inverse { T::one() / sc.eta } else { sc.eta };
            out[r.start] = factor * head;
            for k in 1..vb.len() {
                out[r.start + k] = factor * (vb[k] + coef * w[k]);
            }
        }
        out
    }

    /// `W² v`.
    fn apply_sq(&self, cones: &Cones, v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); v.len()];
        for i in 0..cones.l {
            out[i] = self.lp[i] * self.lp[i] * v[i];
        }
        for (r, sc) in cones.soc_ranges().zip(&self.soc) {
            let vb = &v[r.clone()];
            let e2 = sc.eta * sc.eta;
            let wv = T::lit(2.0) * dot(&sc.w, vb);
            out[r.start] = e2 * (wv * sc.w[0] - vb[0]);
            for k in 1..vb.len() {
                out[r.start + k] = e2 * (wv * sc.w[k] + vb[k]);
            }
        }
        out
    }
}

/// Problem in the solver's internal form, built from the equilibrated
/// standard form.
struct Form<T> {
    c: Vec<T>,
    a: CscMatrix<T>,
    b: Vec<T>,
    g: CscMatrix<T>,
    h: Vec<T>,
    cones: Cones,
    /// Standard-form row of each equality row.
    eq_rows: Vec<usize>,
    /// Standard-form row and sign of each inequality row.
    g_rows: Vec<(usize, T)>,
}

fn build_form<T: Scalar>(std: &StandardForm<T>) -> Form<T> {
    enum Kind<T> {
        Eq(usize),
        Lp {
            lo: Option<(usize, T)>,
            hi: Option<(usize, T)>,
        },
        Soc(usize),
    }
    let m_std = std.m();
    let mut kinds: Vec<Kind<T>> = Vec::with_capacity(m_std);
    let (mut p, mut l) = (0usize, 0usize);
    let mut b = Vec::new();
    let mut h_lp = Vec::new();
    let mut eq_rows = Vec::new();
    let mut g_rows_lp = Vec::new();
    for (range, block) in std.cone.ranges() {
        match block {
            ConeBlock::Zero(_) => {
                for i in range {
                    kinds.push(Kind::Eq(p));
                    b.push(std.b[i]);
                    eq_rows.push(i);
                    p += 1;
                }
            }
            ConeBlock::Interval { lo, hi } => {
                for (k, i) in range.enumerate() {
                    if lo[k] == hi[k] {
                        kinds.push(Kind::Eq(p));
                        b.push(std.b[i] - lo[k]);
                        eq_rows.push(i);
                        p += 1;
                        continue;
                    }
                    let mut lo_row = None;
                    let mut hi_row = None;
                    if lo[k].is_finite() {
                        lo_row = Some((l, T::one()));
                        h_lp.push(std.b[i] - lo[k]);
                        g_rows_lp.push((i, T::one()));
                        l += 1;
                    }
                    if hi[k].is_finite() {
                        hi_row = Some((l, -T::one()));
                        h_lp.push(hi[k] - std.b[i]);
                        g_rows_lp.push((i, -T::one()));
                        l += 1;
                    }
                    kinds.push(Kind::Lp {
                        lo: lo_row,
                        hi: hi_row,
                    });
                }
            }
            ConeBlock::Soc(_) => {
                for _ in range {
                    kinds.push(Kind::Soc(0));
                }
            }
        }
    }
    // SOC rows follow the orthant rows
    let mut soc_dims = Vec::new();
    let mut h = h_lp;
    let mut g_rows = g_rows_lp;
    let mut next = l;
    for (range, block) in std.cone.ranges() {
        if let ConeBlock::Soc(d) = block {
            soc_dims.push(*d);
            for i in range {
                kinds[i] = Kind::Soc(next);
                h.push(std.b[i]);
                g_rows.push((i, T::one()));
                next += 1;
            }
        }
    }
    let mut a_trip = Vec::new();
    let mut g_trip = Vec::new();
    for j in 0..std.n() {
        for (i, v) in std.a.col(j) {
            match &kinds[i] {
                Kind::Eq(r) => a_trip.push((*r, j, v)),
                Kind::Lp { lo, hi } => {
                    if let Some((r, sgn)) = lo {
                        g_trip.push((*r, j, *sgn * v));
                    }
                    if let Some((r, sgn)) = hi {
                        g_trip.push((*r, j, *sgn * v));
                    }
                }
                Kind::Soc(r) => g_trip.push((*r, j, v)),
            }
        }
    }
    let m = next;
    Form {
        c: std.c.clone(),
        a: CscMatrix::from_triplets(p, std.n(), &a_trip),
        b,
        g: CscMatrix::from_triplets(m, std.n(), &g_trip),
        h,
        cones: Cones { l, soc: soc_dims },
        eq_rows,
        g_rows,
    }
}

/// Quasi-definite KKT matrix
/// `[[δI, Aᵀ, Gᵀ], [A, -δI, 0], [G, 0, -W² - δI]]` with dense SOC blocks.
struct Kkt<T> {
    factor: LdlFactor<T>,
    /// Nonzero positions of the `(z, z)` block: orthant diagonals, then the
    /// upper triangle of every SOC block in column-major order.
    z_pos: Vec<usize>,
    n: usize,
    p: usize,
}

fn find_entry<T: Scalar>(k: &CscMatrix<T>, row: usize, col: usize) -> usize {
    (k.colptr[col]..k.colptr[col + 1])
        .find(|&q| k.rowval[q] == row)
        .expect("entry is part of the pattern")
}

impl<T: Scalar> Kkt<T> {
    fn new(f: &Form<T>) -> Result<Self> {
        let (n, p, m) = (f.c.len(), f.b.len(), f.h.len());
        let reg = static_reg::<T>();
        let zoff = n + p;
        let mut e = Vec::new();
        for j in 0..n {
            e.push((j, j, reg));
            for (i, v) in f.a.col(j) {
                e.push((j, n + i, v));
            }
            for (i, v) in f.g.col(j) {
                e.push((j, zoff + i, v));
            }
        }
        for i in 0..p {
            e.push((n + i, n + i, -reg));
        }
        for i in 0..f.cones.l {
            e.push((zoff + i, zoff + i, -T::one()));
        }
        // explicit zeros keep the dense SOC blocks in the pattern
        for r in f.cones.soc_ranges() {
            for b in r.clone() {
                for a in r.start..=b {
                    e.push((
                        zoff + a,
                        zoff + b,
                        if a == b { -T::one() } else { T::zero() },
                    ));
                }
            }
        }
        let k = CscMatrix::from_triplets(n + p + m, n + p + m, &e);
        let mut z_pos = Vec::new();
        for i in 0..f.cones.l {
            z_pos.push(find_entry(&k, zoff + i, zoff + i));
        }
        for r in f.cones.soc_ranges() {
            for b in r.clone() {
                for a in r.start..=b {
                    z_pos.push(find_entry(&k, zoff + a, zoff + b));
                }
            }
        }
        let signs: Vec<i8> = (0..n + p + m).map(|i| if i < n { 1 } else { -1 }).collect();
        let (eps, delta) = dynamic_reg::<T>();
        let factor = LdlFactor::with_pivot_signs(&k, &signs, eps, delta)?;
        let mut kkt = Kkt {
            factor,
            z_pos,
            n,
            p,
        };
        kkt.update(&f.cones, &NtScaling::identity(&f.cones))?;
        Ok(kkt)
    }

    fn update(&mut self, cones: &Cones, w: &NtScaling<T>) -> Result<()> {
        let reg = static_reg::<T>();
        let mut k = 0;
        for i in 0..cones.l {
            self.factor
                .set_value(self.z_pos[k], -(w.lp[i] * w.lp[i]) - reg);
            k += 1;
        }
        for (r, sc) in cones.soc_ranges().zip(&w.soc) {
            let d = r.len();
            let e2 = sc.eta * sc.eta;
            for col in 0..d {
                for row in 0..=col {
                    let j = match (row == col, row == 0) {
                        (true, true) => T::one(),
                        (true, false) => -T::one(),
                        _ => T::zero(),
                    };
                    let mut v = -(e2 * (T::lit(2.0) * sc.w[row] * sc.w[col] - j));
                    if row == col {
                        v -= reg;
                    }
                    self.factor.set_value(self.z_pos[k], v);
                    k += 1;
                }
            }
        }
        self.factor.refactor()
    }

    /// Unregularized KKT product.
    fn mul(&self, f: &Form<T>, w: &NtScaling<T>, v: &[T]) -> Vec<T> {
        let (n, p) = (self.n, self.p);
        let (vx, rest) = v.split_at(n);
        let (vy, vz) = rest.split_at(p);
        let mut out = vec![T::zero(); v.len()];
        {
            let (ox, rest) = out.split_at_mut(n);
            let (oy, oz) = rest.split_at_mut(p);
            f.a.gemv_t_add(vy, ox);
            f.g.gemv_t_add(vz, ox);
            f.a.gemv_add(vx, oy);
            f.g.gemv_add(vx, oz);
            for (o, h) in oz.iter_mut().zip(w.apply_sq(&f.cones, vz)) {
                *o -= h;
            }
        }
        out
    }

    /// Solves with the regularized factor and refines against the exact
    /// matrix while the residual keeps shrinking. When refinement stalls
    /// (typically after dynamic pivot replacement, a low-rank perturbation)
    /// GMRES preconditioned by the factor finishes the job.
    fn solve(&self, f: &Form<T>, w: &NtScaling<T>, rhs: &[T]) -> Vec<T> {
        let mut sol = rhs.to_vec();
        self.factor.solve(&mut sol);
        let target = T::epsilon() * T::lit(10.0) * (T::one() + norm_inf(rhs));
        let residual = |v: &[T]| -> Vec<T> {
            let kx = self.mul(f, w, v);
            rhs.iter().zip(&kx).map(|(a, b)| *a - *b).collect()
        };
        let mut r = residual(&sol);
        let mut err = norm_inf(&r);
        for _ in 0..REFINE_STEPS {
            if err <= target {
                return sol;
            }
            self.factor.solve(&mut r);
            let trial: Vec<T> = sol.iter().zip(&r).map(|(s, d)| *s + *d).collect();
            let r_trial = residual(&trial);
            let err_trial = norm_inf(&r_trial);
            if !(err_trial < err) {
                break;
            }
            sol = trial;
            r = r_trial;
            err = err_trial;
        }
        if err > target {
            let r = residual(&sol);
            let d = self.gmres(f, w, &r, target);
            let trial: Vec<T> = sol.iter().zip(&d).map(|(s, d)| *s + *d).collect();
            if norm_inf(&residual(&trial)) < err {
                sol = trial;
            }
        }
        sol
    }

    /// Right-preconditioned restarted GMRES for `K d = r` from `d = 0`.
    fn gmres(&self, f: &Form<T>, w: &NtScaling<T>, r: &[T], target: T) -> Vec<T> {
        let dim = r.len();
        let mut x = vec![T::zero(); dim];
        let mut res = r.to_vec();
        for _ in 0..GMRES_RESTARTS {
            let beta = norm2(&res);
            if !(beta > T::zero()) || norm_inf(&res) <= target {
                break;
            }
            let m = GMRES_DIM.min(dim);
            let mut v: Vec<Vec<T>> = vec![res.iter().map(|a| *a / beta).collect()];
            let mut z: Vec<Vec<T>> = Vec::with_capacity(m);
            let mut h = vec![vec![T::zero(); m]; m + 1];
            let (mut cs, mut sn) = (vec![T::zero(); m], vec![T::zero(); m]);
            let mut g = vec![T::zero(); m + 1];
            g[0] = beta;
            let mut k_used = 0;
            for k in 0..m {
                let mut zk = v[k].clone();
                self.factor.solve(&mut zk);
                let mut u = self.mul(f, w, &zk);
                z.push(zk);
                for i in 0..=k {
                    h[i][k] = dot(&u, &v[i]);
                    for (a, b) in u.iter_mut().zip(&v[i]) {
                        *a -= h[i][k] * *b;
                    }
                }
                let h_sub = norm2(&u);
                h[k + 1][k] = h_sub;
                for i in 0..k {
                    let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                    h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                    h[i][k] = t;
                }
                let rho = h[k][k].hypot(h[k + 1][k]);
                if !(rho > T::zero()) {
                    break;
                }
                cs[k] = h[k][k] / rho;
                sn[k] = h[k + 1][k] / rho;
                h[k][k] = rho;
                h[k + 1][k] = T::zero();
                g[k + 1] = -sn[k] * g[k];
                g[k] = cs[k] * g[k];
                k_used = k + 1;
                if g[k + 1].abs() <= target * T::lit(0.1) || !(h_sub > T::zero()) {
                    break;
                }
                v.push(u.iter().map(|a| *a / h_sub).collect());
            }
            // back substitution on the triangular least-squares system
            let mut y = vec![T::zero(); k_used];
            for i in (0..k_used).rev() {
                let mut acc = g[i];
                for j in i + 1..k_used {
                    acc -= h[i][j] * y[j];
                }
                y[i] = acc / h[i][i];
            }
            for (j, yj) in y.iter().enumerate() {
                for (a, b) in x.iter_mut().zip(&z[j]) {
                    *a += *yj * *b;
                }
            }
            let kx = self.mul(f, w, &x);
            res = r.iter().zip(&kx).map(|(a, b)| *a - *b).collect();
        }
        x
    }
}

/// Runs the method with the objective normalized to unit size and, if that
/// stops early, once more on the original objective scale. Which of the two
/// suits a program depends on the size of its optimal multipliers, which is
/// not known in advance.
pub(crate) fn run<T: Scalar>(
    orig: StandardForm<T>,
    settings: &SolverSettings<T>,
) -> Result<Outcome<T>> {
    let first = attempt(&orig, settings, true)?;
    if first.status != SocpStatus::IterationLimit || !settings.scaling {
        return Ok(first);
    }
    let mut second = attempt(&orig, settings, false)?;
    if second.status == SocpStatus::IterationLimit {
        return Ok(first);
    }
    second.iters += first.iters;
    let mut trace = first.trace;
    trace.append(&mut second.trace);
    second.trace = trace;
    Ok(second)
}

fn attempt<T: Scalar>(
    orig: &StandardForm<T>,
    settings: &SolverSettings<T>,
    cost_scaling: bool,
) -> Result<Outcome<T>> {
    let (m_std, n) = (orig.m(), orig.n());
    let mut work = orig.clone();
    let sc = if settings.scaling {
        let mut sc = equilibrate(
            &mut work.a,
            &mut work.b,
            &mut work.c,
            &mut work.cone,
            RUIZ_ITERS,
        );
        if !cost_scaling {
            work.c.iter_mut().for_each(|v| *v /= sc.k);
            sc.k = T::one();
        }
        sc
    } else {
        Scaling::identity(n, m_std)
    };
    let f = build_form(&work);
    let (p, m) = (f.b.len(), f.h.len());
    let cones = &f.cones;
    let nk = n + p + m;

    // reported point in standard-form coordinates
    let report = |x: &[T], y: &[T], z: &[T], s: &[T], tau: T| {
        let xs: Vec<T> = x.iter().map(|v| *v / tau).collect();
        let mut ys = vec![T::zero(); m_std];
        let mut ss = vec![T::zero(); m_std];
        for (k, &row) in f.eq_rows.iter().enumerate() {
            ys[row] = -y[k] / tau;
        }
        let ax = work.a.mul(&xs);
        for (k, &(row, sign)) in f.g_rows.iter().enumerate() {
            ys[row] -= sign * z[k] / tau;
            ss[row] = work.b[row] - ax[row];
        }
        // interval slacks are clipped to their bounds, cone slacks come from s
        let mut k_soc = f.cones.l;
        for (range, block) in work.cone.ranges() {
            match block {
                ConeBlock::Interval { lo, hi } => {
                    for (k, i) in range.enumerate() {
                        ss[i] = ss[i].max(lo[k]).min(hi[k]);
                    }
                }
                ConeBlock::Soc(_) => {
                    for i in range {
                        ss[i] = s[k_soc] / tau;
                        k_soc += 1;
                    }
                }
                ConeBlock::Zero(_) => {}
            }
        }
        unscale(&sc, &xs, &ss, &ys)
    };

    let mut kkt = Kkt::new(&f)?;
    let ident = NtScaling::identity(cones);
    let mut trace = Vec::new();

    // initial point: least-squares primal, least-norm dual, shifted inside
    let mut rhs = vec![T::zero(); nk];
    rhs[n..n + p].copy_from_slice(&f.b);
    rhs[n + p..].copy_from_slice(&f.h);
    let sol = kkt.solve(&f, &ident, &rhs);
    let mut x = sol[..n].to_vec();
    let mut s: Vec<T> = sol[n + p..].iter().map(|v| -*v).collect();
    cones.shift_interior(&mut s);
    let mut rhs = vec![T::zero(); nk];
    for j in 0..n {
        rhs[j] = -f.c[j];
    }
    let sol = kkt.solve(&f, &ident, &rhs);
    let mut y = sol[n..n + p].to_vec();
    let mut z = sol[n + p..].to_vec();
    cones.shift_interior(&mut z);
    let (mut tau, mut kappa) = (T::one(), T::one());

    let degree = T::lit((cones.degree() + 1) as f64);
    let (eps_p, eps_d) = (settings.eps_primal, settings.eps_dual);
    let bnorm = T::one().max(norm_inf(&f.b)).max(norm_inf(&f.h));
    let cnorm = T::one().max(norm_inf(&f.c));
    let e = cones.identity::<T>();
    let mut done = 0;
    let mut stop = String::from("iteration cap reached");
    let mut best = None;

    for iter in 0..settings.max_iters.min(MAX_IPM_ITERS) {
        // residuals of the embedding
        let mut r1 = f.a.mul_t(&y);
        f.g.gemv_t_add(&z, &mut r1);
        let hres_x = norm_inf(&r1);
        for j in 0..n {
            r1[j] += f.c[j] * tau;
        }
        let ax = f.a.mul(&x);
        let r2: Vec<T> = (0..p).map(|i| -ax[i] + f.b[i] * tau).collect();
        let gx = f.g.mul(&x);
        let r3: Vec<T> = (0..m).map(|i| -gx[i] + f.h[i] * tau - s[i]).collect();
        let cx = dot(&f.c, &x);
        let by_hz = dot(&f.b, &y) + dot(&f.h, &z);
        let r4 = -cx - by_hz - kappa;

        let pres = norm_inf(&r2).max(norm_inf(&r3)) / tau / bnorm;
        let dres = norm_inf(&r1) / tau / cnorm;
        let gap = dot(&s, &z) / (tau * tau);

        if settings.record_trace {
            trace.push(TraceRow {
                iteration: iter,
                primal_residual: pres,
                dual_residual: dres,
                duality_gap: gap,
                rho: T::zero(),
            });
        }

        let point = report(&x, &y, &z, &s, tau);
        let res = residuals(orig, &point);
        let primal_ok = res.primal <= eps_p * (T::one() + res.primal_scale);
        let dual_ok = res.dual <= eps_d * (T::one() + res.dual_scale);
        let gap_ok = res.gap.abs() <= eps_p * (T::one() + res.pobj.abs().max(res.dobj.abs()));
        if primal_ok && dual_ok && gap_ok {
            return Ok(finish(SocpStatus::Optimal, point, &res, iter, None, trace));
        }
        done = iter + 1;
        let merit = (res.primal / (T::one() + res.primal_scale))
            .max(res.dual / (T::one() + res.dual_scale))
            .max(res.gap.abs() / (T::one() + res.pobj.abs().max(res.dobj.abs())));
        if best.as_ref().is_none_or(|b: &(T, _, _)| merit < b.0) {
            best = Some((merit, point, res));
        }
        if by_hz < T::zero() {
            let infres = hres_x / (-by_hz) / cnorm;
            if infres <= eps_p {
                let point = report(&x, &y, &z, &s, tau);
                let res = residuals(orig, &point);
                let cert = format!(
                    "primal infeasibility certificate: |Aᵀy + Gᵀz| / -(bᵀy + hᵀz) = {infres:e}"
                );
                return Ok(finish(
                    SocpStatus::Infeasible,
                    point,
                    &res,
                    iter,
                    Some(cert),
                    trace,
                ));
            }
        }
        if cx < T::zero() {
            let mut gxs: Vec<T> = gx.iter().zip(&s).map(|(a, b)| *a + *b).collect();
            gxs.extend(ax.iter().copied());
            let infres = norm_inf(&gxs) / (-cx) / bnorm;
            if infres <= eps_d {
                let point = report(&x, &y, &z, &s, tau);
                let res = residuals(orig, &point);
                let cert = format!("unbounded ray: |(Ax, Gx + s)| / -cᵀx = {infres:e}");
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

        let Some(w) = NtScaling::compute(cones, &s, &z) else {
            stop = "iterate left the cone interior".into();
            break;
        };
        if let Err(e) = kkt.update(cones, &w) {
            stop = e.to_string();
            break;
        }
        let mu = (dot(&s, &z) + tau * kappa) / degree;

        let mut rhs1 = vec![T::zero(); nk];
        for j in 0..n {
            rhs1[j] = -f.c[j];
        }
        rhs1[n..n + p].copy_from_slice(&f.b);
        rhs1[n + p..].copy_from_slice(&f.h);
        let sol1 = kkt.solve(&f, &w, &rhs1);
        // cᵀx₁ + bᵀy₁ + hᵀz₁ = -‖W z₁‖² by the structure of the KKT matrix;
        // the right-hand side is the cancellation-free form
        let wz1 = w.apply(cones, &sol1[n + p..], false);
        let denom = kappa / tau + dot(&wz1, &wz1);

        // one Newton direction for residual weight (1 - σ) and complementarity target ds, dk
        let direction = |sigma: T, ds: &[T], dk: T| -> (Vec<T>, Vec<T>, Vec<T>, Vec<T>, T, T) {
            let u = cones.division(&w.lambda, ds);
            let wu = w.apply(cones, &u, false);
            let keep = T::one() - sigma;
            let mut rhs2 = vec![T::zero(); nk];
            for j in 0..n {
                rhs2[j] = -keep * r1[j];
            }
            for i in 0..p {
                rhs2[n + i] = keep * r2[i];
            }
            for i in 0..m {
                rhs2[n + p + i] = keep * r3[i] - wu[i];
            }
            let sol2 = kkt.solve(&f, &w, &rhs2);
            let num = -keep * r4
                + dot(&f.c, &sol2[..n])
                + dot(&f.b, &sol2[n..n + p])
                + dot(&f.h, &sol2[n + p..])
                + dk / tau;
            let dtau = num / denom;
            let dx: Vec<T> = (0..n).map(|j| sol2[j] + dtau * sol1[j]).collect();
            let dy: Vec<T> = (0..p).map(|i| sol2[n + i] + dtau * sol1[n + i]).collect();
            let dz: Vec<T> = (0..m)
                .map(|i| sol2[n + p + i] + dtau * sol1[n + p + i])
                .collect();
            let w2dz = w.apply_sq(cones, &dz);
            let ds_out: Vec<T> = (0..m).map(|i| wu[i] - w2dz[i]).collect();
            let dkappa = (dk - kappa * dtau) / tau;
            (dx, dy, dz, ds_out, dtau, dkappa)
        };
        let step = |dz: &[T], ds: &[T], dtau: T, dkappa: T| -> T {
            let mut a =
                cones
                    .max_step(&s, ds, T::lit(1e6))
                    .min(cones.max_step(&z, dz, T::lit(1e6)));
            if dtau < T::zero() {
                a = a.min(-tau / dtau);
            }
            if dkappa < T::zero() {
                a = a.min(-kappa / dkappa);
            }
            a
        };

        // predictor
        let lam_sq = cones.product(&w.lambda, &w.lambda);
        let ds_aff: Vec<T> = lam_sq.iter().map(|v| -*v).collect();
        let (_, _, dz_a, ds_a, dtau_a, dkappa_a) = direction(T::zero(), &ds_aff, -tau * kappa);
        let alpha_aff = step(&dz_a, &ds_a, dtau_a, dkappa_a).min(T::one());
        let sigma = (T::one() - alpha_aff).powi(3).max(T::zero()).min(T::one());

        // corrector
        let ws = w.apply(cones, &ds_a, true);
        let wz = w.apply(cones, &dz_a, false);
        let cross = cones.product(&ws, &wz);
        let ds_cc: Vec<T> = (0..m)
            .map(|i| -lam_sq[i] - cross[i] + sigma * mu * e[i])
            .collect();
        let dk_cc = -tau * kappa - dtau_a * dkappa_a + sigma * mu;
        let (dx, dy, dz, ds, dtau, dkappa) = direction(sigma, &ds_cc, dk_cc);
        let mut alpha =
            (step(&dz, &ds, dtau, dkappa) * T::lit(STEP_FRACTION)).min(T::lit(MAX_STEP));
        // backtrack until every block stays in a wide neighbourhood of the central path
        for _ in 0..BACKTRACK_STEPS {
            let s_new: Vec<T> = (0..m).map(|i| s[i] + alpha * ds[i]).collect();
            let z_new: Vec<T> = (0..m).map(|i| z[i] + alpha * dz[i]).collect();
            let (t_new, k_new) = (tau + alpha * dtau, kappa + alpha * dkappa);
            let mu_new = (dot(&s_new, &z_new) + t_new * k_new) / degree;
            if cones.centrality(&s_new, &z_new).min(t_new * k_new) >= T::lit(NEIGHBOURHOOD) * mu_new
            {
                break;
            }
            alpha *= T::lit(BACKTRACK);
        }

        let finite = dx
            .iter()
            .chain(&dy)
            .chain(&dz)
            .chain(&ds)
            .all(|v| v.is_finite());
        if !(finite && dtau.is_finite() && dkappa.is_finite()) {
            stop = format!("non-finite search direction after {done} iterations");
            break;
        }
        if !(alpha > T::lit(MIN_STEP)) || !alpha.is_finite() {
            stop = format!("step length {alpha:e} after {done} iterations");
            break;
        }
        for j in 0..n {
            x[j] += alpha * dx[j];
        }
        for i in 0..p {
            y[i] += alpha * dy[i];
        }
        for i in 0..m {
            z[i] += alpha * dz[i];
            s[i] += alpha * ds[i];
        }
        tau += alpha * dtau;
        kappa += alpha * dkappa;
        if !(tau.is_finite() && kappa.is_finite()) {
            stop = "non-finite homogenizing variables".into();
            break;
        }
    }
    // the best iterate seen, rather than a possibly diverged last one
    let (point, res) = match best {
        Some((_, point, res)) => (point, res),
        None => {
            let point = report(&x, &y, &z, &s, tau);
            let res = residuals(orig, &point);
            (point, res)
        }
    };
    Ok(finish(
        SocpStatus::IterationLimit,
        point,
        &res,
        done,
        Some(format!("interior-point method stopped early: {stop}")),
        trace,
    ))
}
