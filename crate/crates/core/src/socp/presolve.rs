//! Reduction of a [`ConicProgram`] to the solver's standard form
//! `min cᵀx  s.t.  A x + s = b, s ∈ K`.
//!
//! Before the conversion, variables whose values are forced by the
//! constraints are fixed and eliminated:
//! - coinciding lower and upper bounds,
//! - equality rows with a single free entry,
//! - forcing rows, whose right-hand side equals the minimum (or maximum)
//!   activity allowed by the variable bounds,
//! - cone bodies whose head is fixed at zero,
//! - slack pairs: rows that differ only in a private slack variable and
//!   together pin their common part to a single value.
//!
//! Fixing these exactly keeps switched-off lines at exactly zero flow, which
//! an iterative method would otherwise only approach.

use super::cones::{rotated_to_soc, ConeBlock, ProductCone};
use super::sparse::CscMatrix;
use crate::conic::ConicProgram;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub(crate) struct StandardForm<T> {
    pub c: Vec<T>,
    pub a: CscMatrix<T>,
    pub b: Vec<T>,
    pub cone: ProductCone<T>,
}

impl<T: Scalar> StandardForm<T> {
    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn m(&self) -> usize {
        self.b.len()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Reduction<T> {
    pub fixed: Vec<Option<T>>,
    /// Reduced column of every original variable (None when fixed).
    pub col_of: Vec<Option<usize>>,
    /// Original equality row of each zero-cone row.
    pub eq_rows: Vec<usize>,
    pub n_eq: usize,
}

impl<T: Scalar> Reduction<T> {
    pub fn expand_x(&self, x_red: &[T]) -> Vec<T> {
        self.fixed
            .iter()
            .zip(&self.col_of)
            .map(|(f, c)| match (f, c) {
                (Some(v), _) => *v,
                (None, Some(j)) => x_red[*j],
                (None, None) => T::zero(),
            })
            .collect()
    }

    pub fn expand_y(&self, y_red: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n_eq];
        for (k, &row) in self.eq_rows.iter().enumerate() {
            y[row] = y_red[k];
        }
        y
    }
}

#[derive(Debug)]
pub(crate) enum Presolved<T> {
    Reduced(StandardForm<T>, Reduction<T>),
    Infeasible(String),
}

pub(crate) fn tolerance<T: Scalar>() -> T {
    (T::epsilon().sqrt() * T::lit(0.1)).max(T::lit(1e-9))
}

struct State<T> {
    lo: Vec<T>,
    hi: Vec<T>,
    fixed: Vec<Option<T>>,
    tol: T,
}

impl<T: Scalar> State<T> {
    fn fix(&mut self, j: usize, v: T) -> Result<bool, String> {
        if let Some(old) = self.fixed[j] {
            if (old - v).abs() > self.tol * (T::one() + old.abs()) {
                return Err(format!("variable {j} forced to both {old} and {v}"));
            }
            return Ok(false);
        }
        if v < self.lo[j] - self.tol * (T::one() + self.lo[j].abs())
            || v > self.hi[j] + self.tol * (T::one() + self.hi[j].abs())
        {
            return Err(format!(
                "variable {j} forced to {v} outside [{}, {}]",
                self.lo[j], self.hi[j]
            ));
        }
        self.fixed[j] = Some(v.max(self.lo[j]).min(self.hi[j]));
        Ok(true)
    }
}

pub(crate) fn presolve<T: Scalar>(program: &ConicProgram<T>) -> Presolved<T> {
    match reduce(program) {
        Ok((fixed, live_rows)) => {
            let (form, reduction) = build_standard_form(program, fixed, live_rows);
            Presolved::Reduced(form, reduction)
        }
        Err(msg) => Presolved::Infeasible(msg),
    }
}

fn row_lists<T: Scalar>(program: &ConicProgram<T>) -> Vec<Vec<(usize, T)>> {
    let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); program.n_equalities()];
    for t in &program.equalities {
        rows[t.row].push((t.col, t.val));
    }
    for row in &mut rows {
        row.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, T)> = Vec::with_capacity(row.len());
        for &(c, v) in row.iter() {
            match merged.last_mut() {
                Some(last) if last.0 == c => last.1 += v,
                _ => merged.push((c, v)),
            }
        }
        merged.retain(|e| e.1 != T::zero());
        *row = merged;
    }
    rows
}

#[allow(clippy::type_complexity)]
fn reduce<T: Scalar>(program: &ConicProgram<T>) -> Result<(Vec<Option<T>>, Vec<bool>), String> {
    let (lo, hi) = program.bounds();
    let n = program.n_vars;
    let tol = tolerance::<T>();
    for j in 0..n {
        if lo[j] > hi[j] {
            return Err(format!(
                "variable {j} has empty bounds [{}, {}]",
                lo[j], hi[j]
            ));
        }
    }
    let mut st = State {
        lo,
        hi,
        fixed: vec![None; n],
        tol,
    };
    let rows = row_lists(program);
    let mut live = vec![true; rows.len()];

    loop {
        let mut changed = false;
        for j in 0..n {
            if st.fixed[j].is_none() && st.lo[j] == st.hi[j] {
                changed |= st.fix(j, st.lo[j])?;
            }
        }
        for (r, row) in rows.iter().enumerate() {
            if !live[r] {
                continue;
            }
            let mut rhs = program.rhs[r];
            let mut scale = rhs.abs();
            let mut free: Vec<(usize, T)> = Vec::new();
            for &(j, a) in row {
                match st.fixed[j] {
                    Some(v) => {
                        rhs -= a * v;
                        scale = scale.max((a * v).abs());
                    }
                    None => free.push((j, a)),
                }
            }
            let row_tol = tol * (T::one() + scale);
            match free.len() {
                0 => {
                    if rhs.abs() > row_tol {
                        return Err(format!(
                            "equality row {r} cannot be satisfied (residual {rhs})"
                        ));
                    }
                    live[r] = false;
                    changed = true;
                }
                1 => {
                    let (j, a) = free[0];
                    st.fix(j, rhs / a)?;
                    live[r] = false;
                    changed = true;
                }
                _ => {
                    let (mut min_act, mut max_act) = (T::zero(), T::zero());
                    for &(j, a) in &free {
                        let (l, h) = (st.lo[j], st.hi[j]);
                        if a > T::zero() {
                            min_act += a * l;
                            max_act += a * h;
                        } else {
                            min_act += a * h;
                            max_act += a * l;
                        }
                    }
                    if min_act.is_finite() && rhs < min_act - row_tol
                        || max_act.is_finite() && rhs > max_act + row_tol
                    {
                        return Err(format!("equality row {r} is outside its activity range"));
                    }
                    let at_min = min_act.is_finite() && (rhs - min_act).abs() <= row_tol;
                    let at_max = max_act.is_finite() && (rhs - max_act).abs() <= row_tol;
                    if at_min || at_max {
                        for &(j, a) in &free {
                            let low_side = (a > T::zero()) == at_min;
                            let v = if low_side { st.lo[j] } else { st.hi[j] };
                            st.fix(j, v)?;
                        }
                        live[r] = false;
                        changed = true;
                    }
                }
            }
        }
        for cone in &program.soc_cones {
            if let Some(t) = st.fixed[cone.head] {
                if t < -tol {
                    return Err(format!(
                        "cone head {} fixed at negative value {t}",
                        cone.head
                    ));
                }
                if t.abs() <= tol {
                    for &u in &cone.body {
                        changed |= st.fix(u, T::zero())?;
                    }
                }
            }
        }
        for cone in &program.rotated_cones {
            for head in [cone.p, cone.q] {
                if let Some(t) = st.fixed[head] {
                    if t < -tol {
                        return Err(format!(
                            "rotated cone head {head} fixed at negative value {t}"
                        ));
                    }
                    if t.abs() <= tol {
                        for &u in &cone.body {
                            changed |= st.fix(u, T::zero())?;
                        }
                    }
                }
            }
        }
        if !changed {
            changed = pin_parallel_rows(program, &rows, &mut live, &mut st)?;
        }
        if !changed {
            break;
        }
    }

    for cone in &program.soc_cones {
        let members = std::iter::once(&cone.head).chain(&cone.body);
        if let Some(vals) = members.map(|&i| st.fixed[i]).collect::<Option<Vec<T>>>() {
            let norm = vals[1..].iter().map(|v| *v * *v).sum::<T>().sqrt();
            if norm - vals[0] > tol * (T::one() + vals[0].abs()) {
                return Err(format!("fixed cone on head {} is violated", cone.head));
            }
        }
    }
    for cone in &program.rotated_cones {
        let members = [cone.p, cone.q]
            .into_iter()
            .chain(cone.body.iter().copied());
        if let Some(vals) = members.map(|i| st.fixed[i]).collect::<Option<Vec<T>>>() {
            let body: T = vals[2..].iter().map(|v| *v * *v).sum();
            let lhs = T::lit(2.0) * vals[0] * vals[1];
            if cone.weight * body - lhs > tol * (T::one() + lhs.abs()) {
                return Err(format!(
                    "fixed rotated cone on ({}, {}) is violated",
                    cone.p, cone.q
                ));
            }
        }
    }
    Ok((st.fixed, live))
}

/// Rows of the form `f·L(x) + a·s = b`, where `s` is a slack that appears in
/// no other live row or cone, confine `L(x)` to an interval. When several rows
/// share `L` and their intervals meet in a single point, their slacks are fixed
/// and all but one of the rows are dropped (they coincide after fixing).
fn pin_parallel_rows<T: Scalar>(
    program: &ConicProgram<T>,
    rows: &[Vec<(usize, T)>],
    live: &mut [bool],
    st: &mut State<T>,
) -> Result<bool, String> {
    let mut uses = vec![0usize; program.n_vars];
    for (r, row) in rows.iter().enumerate() {
        if live[r] {
            for &(j, _) in row {
                uses[j] += 1;
            }
        }
    }
    for cone in &program.soc_cones {
        for &j in std::iter::once(&cone.head).chain(&cone.body) {
            uses[j] += 1;
        }
    }
    for cone in &program.rotated_cones {
        for &j in [&cone.p, &cone.q].into_iter().chain(&cone.body) {
            uses[j] += 1;
        }
    }

    struct Member<T> {
        row: usize,
        slack: usize,
        a: T,
        f: T,
        rhs: T,
        lo: T,
        hi: T,
    }
    let mut groups: std::collections::BTreeMap<Vec<(usize, u64)>, Vec<Member<T>>> =
        Default::default();
    for (r, row) in rows.iter().enumerate() {
        if !live[r] {
            continue;
        }
        let mut rhs = program.rhs[r];
        let mut slack = None;
        let mut common = Vec::new();
        let mut ok = true;
        for &(j, a) in row {
            match st.fixed[j] {
                Some(v) => rhs -= a * v,
                None if uses[j] == 1 => {
                    if slack.is_some() {
                        ok = false;
                    }
                    slack = Some((j, a));
                }
                None => common.push((j, a)),
            }
        }
        let Some((j, a)) = slack else { continue };
        if !ok || common.is_empty() {
            continue;
        }
        let f = common[0].1;
        let key = common
            .iter()
            .map(|&(c, v)| (c, (v / f).as_f64().to_bits()))
            .collect();
        // L(x) = (rhs - a s) / f for s in [lo_s, hi_s]
        let e1 = (rhs - a * st.lo[j]) / f;
        let e2 = (rhs - a * st.hi[j]) / f;
        groups.entry(key).or_default().push(Member {
            row: r,
            slack: j,
            a,
            f,
            rhs,
            lo: e1.min(e2),
            hi: e1.max(e2),
        });
    }

    let mut changed = false;
    for members in groups.values() {
        if members.len() < 2 {
            continue;
        }
        let lo = members
            .iter()
            .map(|m| m.lo)
            .fold(T::neg_infinity(), |a, b| a.max(b));
        let hi = members
            .iter()
            .map(|m| m.hi)
            .fold(T::infinity(), |a, b| a.min(b));
        if !(lo.is_finite() && hi.is_finite()) {
            continue;
        }
        let row_tol = st.tol * (T::one() + lo.abs().max(hi.abs()));
        if lo > hi + row_tol {
            return Err(format!(
                "equality rows {} and {} are inconsistent",
                members[0].row, members[1].row
            ));
        }
        if hi - lo > row_tol {
            continue;
        }
        let v = (lo + hi) * T::lit(0.5);
        for (k, m) in members.iter().enumerate() {
            st.fix(m.slack, (m.rhs - m.f * v) / m.a)?;
            if k > 0 {
                live[m.row] = false;
            }
        }
        changed = true;
    }
    Ok(changed)
}

fn build_standard_form<T: Scalar>(
    program: &ConicProgram<T>,
    fixed: Vec<Option<T>>,
    live_rows: Vec<bool>,
) -> (StandardForm<T>, Reduction<T>) {
    let n_orig = program.n_vars;
    let mut col_of = vec![None; n_orig];
    let mut n = 0;
    for j in 0..n_orig {
        if fixed[j].is_none() {
            col_of[j] = Some(n);
            n += 1;
        }
    }
    let c: Vec<T> = (0..n_orig)
        .filter(|&j| fixed[j].is_none())
        .map(|j| program.objective[j])
        .collect();

    let mut entries: Vec<(usize, usize, T)> = Vec::new();
    let mut b: Vec<T> = Vec::new();
    let mut blocks = Vec::new();

    // Each constraint row is s = b - A x; a linear form L(x) placed in a cone
    // becomes A = -L (free part) and b = L(fixed part).
    let push_form =
        |entries: &mut Vec<(usize, usize, T)>, b: &mut Vec<T>, form: &[(usize, T)], rhs: T| {
            let row = b.len();
            let mut constant = rhs;
            for &(j, a) in form {
                match (fixed[j], col_of[j]) {
                    (Some(v), _) => constant += a * v,
                    (None, Some(col)) => entries.push((row, col, -a)),
                    (None, None) => unreachable!(),
                }
            }
            b.push(constant);
        };

    // equalities: L(x) - rhs ∈ {0}
    let rows = row_lists(program);
    let mut eq_rows = Vec::new();
    for (r, row) in rows.iter().enumerate() {
        if live_rows[r] {
            push_form(&mut entries, &mut b, row, -program.rhs[r]);
            eq_rows.push(r);
        }
    }
    if !eq_rows.is_empty() {
        blocks.push(ConeBlock::Zero(eq_rows.len()));
    }

    let (lo, hi) = program.bounds();
    let (mut ilo, mut ihi) = (Vec::new(), Vec::new());
    for j in 0..n_orig {
        if fixed[j].is_none() && (lo[j].is_finite() || hi[j].is_finite()) {
            push_form(&mut entries, &mut b, &[(j, T::one())], T::zero());
            ilo.push(lo[j]);
            ihi.push(hi[j]);
        }
    }
    if !ilo.is_empty() {
        blocks.push(ConeBlock::Interval { lo: ilo, hi: ihi });
    }

    let all_fixed = |idx: &mut dyn Iterator<Item = usize>| {
        let mut ok = true;
        for i in idx {
            ok &= fixed[i].is_some();
        }
        ok
    };
    for cone in &program.soc_cones {
        if all_fixed(&mut std::iter::once(cone.head).chain(cone.body.iter().copied())) {
            continue;
        }
        push_form(&mut entries, &mut b, &[(cone.head, T::one())], T::zero());
        for &u in &cone.body {
            push_form(&mut entries, &mut b, &[(u, T::one())], T::zero());
        }
        blocks.push(ConeBlock::Soc(cone.body.len() + 1));
    }
    for cone in &program.rotated_cones {
        if all_fixed(
            &mut [cone.p, cone.q]
                .into_iter()
                .chain(cone.body.iter().copied()),
        ) {
            continue;
        }
        let forms = rotated_to_soc(cone);
        for form in &forms {
            push_form(&mut entries, &mut b, form, T::zero());
        }
        blocks.push(ConeBlock::Soc(forms.len()));
    }

    let m = b.len();
    let a = CscMatrix::from_triplets(m, n, &entries);
    (
        StandardForm {
            c,
            a,
            b,
            cone: ProductCone { blocks },
        },
        Reduction {
            fixed,
            col_of,
            eq_rows,
            n_eq: program.n_equalities(),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::RotatedCone;

    #[test]
    fn forcing_row_and_zero_head_propagate() {
        // v + s = 0 with v, s >= 0 forces both to zero; the rotated cone on (v, i)
        // then forces its body (p, q) to zero; the row i - p = 0 fixes i.
        let mut prog: ConicProgram<f64> = ConicProgram::new();
        let v = prog.add_nonneg_var();
        let s = prog.add_nonneg_var();
        let i = prog.add_nonneg_var();
        let p = prog.add_var();
        let q = prog.add_var();
        let other = prog.add_box_var(0.0, 2.0);
        prog.set_cost(other, -1.0);
        prog.add_equality(&[(v, 1.0), (s, 1.0)], 0.0);
        prog.add_equality(&[(i, 1.0), (p, -1.0)], 0.0);
        prog.add_rotated(RotatedCone::product(v, i, vec![p, q]));
        let Presolved::Reduced(form, red) = presolve(&prog) else {
            panic!("infeasible")
        };
        assert_eq!(red.fixed[..5], [Some(0.0); 5]);
        assert_eq!(form.n(), 1);
        assert_eq!(form.m(), 1);
        assert_eq!(red.expand_x(&[1.5]), vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.5]);
    }

    #[test]
    fn inconsistent_rows_are_infeasible() {
        let mut prog: ConicProgram<f64> = ConicProgram::new();
        let a = prog.add_box_var(0.0, 1.0);
        let b = prog.add_box_var(0.0, 1.0);
        prog.add_equality(&[(a, 1.0), (b, 1.0)], 0.0);
        prog.add_equality(&[(b, 1.0)], 1.0);
        assert!(matches!(presolve(&prog), Presolved::Infeasible(_)));
    }

    #[test]
    fn untouched_program_keeps_all_rows() {
        let mut prog: ConicProgram<f64> = ConicProgram::new();
        let t = prog.add_var();
        let u = prog.add_var();
        let w = prog.add_var();
        prog.add_equality(&[(u, 1.0), (w, 1.0)], 1.0);
        prog.add_soc(t, vec![u, w]);
        let Presolved::Reduced(form, _) = presolve(&prog) else {
            panic!()
        };
        assert_eq!(form.n(), 3);
        assert_eq!(
            form.cone.blocks,
            vec![ConeBlock::Zero(1), ConeBlock::Soc(3)]
        );
    }

    #[test]
    fn slack_pair_pins_the_common_part() {
        // u - w - s2 = 0 and u - w + s3 = r with s2, s3 >= 0 allow u - w in [0, r]
        for (r, pinned) in [(0.0, true), (1.0, false)] {
            let mut prog: ConicProgram<f64> = ConicProgram::new();
            let t = prog.add_var();
            let u = prog.add_box_var(0.0, 1.0);
            let w = prog.add_box_var(0.0, 1.0);
            let s2 = prog.add_nonneg_var();
            let s3 = prog.add_nonneg_var();
            prog.add_equality(&[(u, 1.0), (w, -1.0), (s2, -1.0)], 0.0);
            prog.add_equality(&[(u, 1.0), (w, -1.0), (s3, 1.0)], r);
            prog.add_soc(t, vec![u, w]);
            let Presolved::Reduced(form, red) = presolve(&prog) else {
                panic!()
            };
            if pinned {
                assert_eq!(red.fixed[s2], Some(0.0));
                assert_eq!(red.fixed[s3], Some(0.0));
                assert_eq!((form.n(), red.eq_rows.len()), (3, 1));
            } else {
                assert_eq!(red.fixed, vec![None; 5]);
                assert_eq!(red.eq_rows.len(), 2);
            }
        }
    }
}
