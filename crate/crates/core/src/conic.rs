//! Solver-agnostic conic program: linear objective, linear equalities,
//! variable bounds and (rotated) second-order cones over variable indices.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triplet<T> {
    pub row: usize,
    pub col: usize,
    pub val: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxBound<T> {
    pub index: usize,
    pub lower: T,
    pub upper: T,
}

/// `head >= ||body||`
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderCone {
    pub head: usize,
    pub body: Vec<usize>,
}

/// `2·p·q >= weight·||body||²` with `p, q >= 0`. The standard rotated cone has
/// `weight = 1`; `weight = 2` expresses `p·q >= ||body||²`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotatedCone<T> {
    pub p: usize,
    pub q: usize,
    pub body: Vec<usize>,
    pub weight: T,
}

impl<T: Scalar> RotatedCone<T> {
    pub fn new(p: usize, q: usize, body: Vec<usize>) -> Self {
        RotatedCone {
            p,
            q,
            body,
            weight: T::one(),
        }
    }

    /// Cone for `p·q >= ||body||²`.
    pub fn product(p: usize, q: usize, body: Vec<usize>) -> Self {
        RotatedCone {
            p,
            q,
            body,
            weight: T::lit(2.0),
        }
    }
}

/// minimize `c·x` subject to `A x = b`, bounds and cone memberships.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram<T> {
    pub n_vars: usize,
    pub objective: Vec<T>,
    pub equalities: Vec<Triplet<T>>,
    pub rhs: Vec<T>,
    pub nonneg_vars: Vec<usize>,
    pub box_vars: Vec<BoxBound<T>>,
    pub soc_cones: Vec<SecondOrderCone>,
    pub rotated_cones: Vec<RotatedCone<T>>,
}

impl<T: Scalar> Default for ConicProgram<T> {
    fn default() -> Self {
        ConicProgram {
            n_vars: 0,
            objective: Vec::new(),
            equalities: Vec::new(),
            rhs: Vec::new(),
            nonneg_vars: Vec::new(),
            box_vars: Vec::new(),
            soc_cones: Vec::new(),
            rotated_cones: Vec::new(),
        }
    }
}

impl<T: Scalar> ConicProgram<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_equalities(&self) -> usize {
        self.rhs.len()
    }

    /// Adds a free variable with zero cost and returns its index.
    pub fn add_var(&mut self) -> usize {
        self.n_vars += 1;
        self.objective.push(T::zero());
        self.n_vars - 1
    }

    pub fn add_nonneg_var(&mut self) -> usize {
        let v = self.add_var();
        self.nonneg_vars.push(v);
        v
    }

    pub fn add_box_var(&mut self, lower: T, upper: T) -> usize {
        let v = self.add_var();
        self.box_vars.push(BoxBound {
            index: v,
            lower,
            upper,
        });
        v
    }

    pub fn set_cost(&mut self, var: usize, cost: T) {
        self.objective[var] = cost;
    }

    /// Adds `Σ coef·x = rhs` and returns the row index.
    pub fn add_equality(&mut self, terms: &[(usize, T)], rhs: T) -> usize {
        let row = self.rhs.len();
        for &(col, val) in terms {
            if val != T::zero() {
                self.equalities.push(Triplet { row, col, val });
            }
        }
        self.rhs.push(rhs);
        row
    }

    pub fn add_soc(&mut self, head: usize, body: Vec<usize>) {
        self.soc_cones.push(SecondOrderCone { head, body });
    }

    pub fn add_rotated(&mut self, cone: RotatedCone<T>) {
        self.rotated_cones.push(cone);
    }

    pub fn objective_value(&self, x: &[T]) -> T {
        self.objective.iter().zip(x).map(|(c, v)| *c * *v).sum()
    }

    /// `A x - b` per equality row.
    pub fn equality_residuals(&self, x: &[T]) -> Vec<T> {
        let mut r: Vec<T> = self.rhs.iter().map(|b| -*b).collect();
        for t in &self.equalities {
            r[t.row] += t.val * x[t.col];
        }
        r
    }

    /// Lower/upper bound per variable, intersecting nonnegativity and boxes.
    pub fn bounds(&self) -> (Vec<T>, Vec<T>) {
        let mut lo = vec![T::neg_infinity(); self.n_vars];
        let mut hi = vec![T::infinity(); self.n_vars];
        for &v in &self.nonneg_vars {
            lo[v] = lo[v].max(T::zero());
        }
        for b in &self.box_vars {
            lo[b.index] = lo[b.index].max(b.lower);
            hi[b.index] = hi[b.index].min(b.upper);
        }
        (lo, hi)
    }

    /// Largest violation of any constraint at `x` (equalities, bounds, cones).
    pub fn max_violation(&self, x: &[T]) -> T {
        let mut worst = T::zero();
        for r in self.equality_residuals(x) {
            worst = worst.max(r.abs());
        }
        let (lo, hi) = self.bounds();
        for i in 0..self.n_vars {
            worst = worst.max(lo[i] - x[i]).max(x[i] - hi[i]);
        }
        for cone in &self.soc_cones {
            let body: T = cone.body.iter().map(|&i| x[i] * x[i]).sum::<T>().sqrt();
            worst = worst.max(body - x[cone.head]);
        }
        for cone in &self.rotated_cones {
            let (p, q) = (x[cone.p], x[cone.q]);
            let body: T = cone.body.iter().map(|&i| x[i] * x[i]).sum();
            // same measure as the equivalent second-order cone
            let t = p + q;
            let u = ((p - q) * (p - q) + T::lit(2.0) * cone.weight * body).sqrt();
            worst = worst.max(u - t);
        }
        worst
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_vars;
        let bad = |msg: String| Err(Error::InvalidProgram(msg));
        if self.objective.len() != n {
            return bad(format!(
                "objective has {} entries for {} variables",
                self.objective.len(),
                n
            ));
        }
        for t in &self.equalities {
            if t.col >= n || t.row >= self.rhs.len() {
                return bad(format!(
                    "equality entry ({}, {}) out of range",
                    t.row, t.col
                ));
            }
            if !t.val.is_finite() {
                return bad(format!(
                    "non-finite equality coefficient at ({}, {})",
                    t.row, t.col
                ));
            }
        }
        if let Some(v) = self.nonneg_vars.iter().find(|&&v| v >= n) {
            return bad(format!("nonnegative variable {v} out of range"));
        }
        for b in &self.box_vars {
            if b.index >= n {
                return bad(format!("box variable {} out of range", b.index));
            }
            if b.lower > b.upper || b.lower.is_nan() || b.upper.is_nan() {
                return bad(format!("box on variable {} is empty", b.index));
            }
        }
        let mut heads = vec![false; n];
        let mut claim = |v: usize| -> Result<()> {
            if v >= n {
                return Err(Error::InvalidProgram(format!(
                    "cone index {v} out of range"
                )));
            }
            if std::mem::replace(&mut heads[v], true) {
                return Err(Error::InvalidProgram(format!(
                    "variable {v} heads two cones"
                )));
            }
            Ok(())
        };
        for c in &self.soc_cones {
            claim(c.head)?;
        }
        for c in &self.rotated_cones {
            claim(c.p)?;
            claim(c.q)?;
            if !(c.weight > T::zero()) {
                return bad(format!(
                    "rotated cone on ({}, {}) has non-positive weight",
                    c.p, c.q
                ));
            }
        }
        let bodies = self
            .soc_cones
            .iter()
            .flat_map(|c| c.body.iter())
            .chain(self.rotated_cones.iter().flat_map(|c| c.body.iter()));
        if let Some(v) = bodies.into_iter().find(|&&v| v >= n) {
            return bad(format!("cone index {v} out of range"));
        }
        Ok(())
    }

    /// Converts every coefficient to another scalar type.
    pub fn cast<U: Scalar>(&self) -> ConicProgram<U> {
        let c = |v: T| U::lit(v.as_f64());
        ConicProgram {
            n_vars: self.n_vars,
            objective: self.objective.iter().map(|&v| c(v)).collect(),
            equalities: self
                .equalities
                .iter()
                .map(|t| Triplet {
                    row: t.row,
                    col: t.col,
                    val: c(t.val),
                })
                .collect(),
            rhs: self.rhs.iter().map(|&v| c(v)).collect(),
            nonneg_vars: self.nonneg_vars.clone(),
            box_vars: self
                .box_vars
                .iter()
                .map(|b| BoxBound {
                    index: b.index,
                    lower: c(b.lower),
                    upper: c(b.upper),
                })
                .collect(),
            soc_cones: self.soc_cones.clone(),
            rotated_cones: self
                .rotated_cones
                .iter()
                .map(|r| RotatedCone {
                    p: r.p,
                    q: r.q,
                    body: r.body.clone(),
                    weight: c(r.weight),
                })
                .collect(),
        }
    }

    /// Line-oriented text dump used for debugging and golden-file tests.
    ///
    /// ```text
    /// conic-program 1
    /// vars <n>
    /// objective <nnz>        then "<var> <coef>" lines
    /// equalities <rows> <nnz> then "<row> <col> <coef>" lines
    /// rhs                     then "<row> <value>" lines for nonzero rhs
    /// nonneg <k>              then one index per line
    /// box <k>                 then "<var> <lower> <upper>" lines
    /// soc <k>                 then "<head> : <body...>" lines
    /// rotated <k>             then "<p> <q> <weight> : <body...>" lines
    /// ```
    /// Equality entries are listed sorted by (row, col).
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let f = |v: T| format!("{:e}", v.as_f64());
        writeln!(s, "conic-program 1").unwrap();
        writeln!(s, "vars {}", self.n_vars).unwrap();
        let obj: Vec<(usize, T)> = self
            .objective
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != T::zero())
            .map(|(i, c)| (i, *c))
            .collect();
        writeln!(s, "objective {}", obj.len()).unwrap();
        for (i, c) in obj {
            writeln!(s, "{} {}", i, f(c)).unwrap();
        }
        let mut eq = self.equalities.clone();
        eq.sort_by_key(|t| (t.row, t.col));
        writeln!(s, "equalities {} {}", self.rhs.len(), eq.len()).unwrap();
        for t in &eq {
            writeln!(s, "{} {} {}", t.row, t.col, f(t.val)).unwrap();
        }
        writeln!(s, "rhs").unwrap();
        for (r, b) in self.rhs.iter().enumerate() {
            if *b != T::zero() {
                writeln!(s, "{} {}", r, f(*b)).unwrap();
            }
        }
        writeln!(s, "nonneg {}", self.nonneg_vars.len()).unwrap();
        for v in &self.nonneg_vars {
            writeln!(s, "{v}").unwrap();
        }
        writeln!(s, "box {}", self.box_vars.len()).unwrap();
        for b in &self.box_vars {
            writeln!(s, "{} {} {}", b.index, f(b.lower), f(b.upper)).unwrap();
        }
        let join = |v: &[usize]| {
            v.iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        writeln!(s, "soc {}", self.soc_cones.len()).unwrap();
        for c in &self.soc_cones {
            writeln!(s, "{} : {}", c.head, join(&c.body)).unwrap();
        }
        writeln!(s, "rotated {}", self.rotated_cones.len()).unwrap();
        for c in &self.rotated_cones {
            writeln!(s, "{} {} {} : {}", c.p, c.q, f(c.weight), join(&c.body)).unwrap();
        }
        s
    }
}
