//! Oracles shared by the integration suites and the acceptance run.
#![allow(dead_code)]

use distreconf::conic::{ConicProgram, RotatedCone};
use distreconf::qubo::{index_to_bits, Qubo};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Tiny programs with known optimal values.
pub fn analytic_cases() -> Vec<(&'static str, ConicProgram<f64>, f64)> {
    let mut cases = Vec::new();

    // min x1 s.t. x1 >= |x2|, x2 = 1
    let mut p = ConicProgram::new();
    let x1 = p.add_var();
    let x2 = p.add_var();
    p.set_cost(x1, 1.0);
    p.add_equality(&[(x2, 1.0)], 1.0);
    p.add_soc(x1, vec![x2]);
    cases.push(("abs value", p, 1.0));

    // min -x, 0 <= x <= 2
    let mut p = ConicProgram::new();
    let x = p.add_box_var(0.0, 2.0);
    p.set_cost(x, -1.0);
    cases.push(("box", p, -2.0));

    // min t s.t. t >= |(u, w)|, u + w = 1
    let mut p = ConicProgram::new();
    let t = p.add_var();
    let u = p.add_var();
    let w = p.add_var();
    p.set_cost(t, 1.0);
    p.add_equality(&[(u, 1.0), (w, 1.0)], 1.0);
    p.add_soc(t, vec![u, w]);
    cases.push(("distance to a line", p, 0.5f64.sqrt()));

    // min a + b s.t. ab >= u², u = 2
    let mut p = ConicProgram::new();
    let a = p.add_nonneg_var();
    let b = p.add_nonneg_var();
    let u = p.add_var();
    p.set_cost(a, 1.0);
    p.set_cost(b, 1.0);
    p.add_equality(&[(u, 1.0)], 2.0);
    p.add_rotated(RotatedCone::product(a, b, vec![u]));
    cases.push(("product cone", p, 4.0));

    // distance from (3, 4) to the unit box [0, 1]²
    let mut p = ConicProgram::new();
    let t = p.add_var();
    let x = p.add_box_var(0.0, 1.0);
    let y = p.add_box_var(0.0, 1.0);
    let dx = p.add_var();
    let dy = p.add_var();
    p.set_cost(t, 1.0);
    p.add_equality(&[(dx, 1.0), (x, 1.0)], 3.0);
    p.add_equality(&[(dy, 1.0), (y, 1.0)], 4.0);
    p.add_soc(t, vec![dx, dy]);
    cases.push(("distance to a box", p, 13f64.sqrt()));

    // max x + y on the unit disk
    let mut p = ConicProgram::new();
    let r = p.add_var();
    let x = p.add_var();
    let y = p.add_var();
    p.set_cost(x, -1.0);
    p.set_cost(y, -1.0);
    p.add_equality(&[(r, 1.0)], 1.0);
    p.add_soc(r, vec![x, y]);
    cases.push(("disk", p, -(2f64.sqrt())));

    // min x + 2y s.t. x + y = 1, x, y >= 0
    let mut p = ConicProgram::new();
    let x = p.add_nonneg_var();
    let y = p.add_nonneg_var();
    p.set_cost(x, 1.0);
    p.set_cost(y, 2.0);
    p.add_equality(&[(x, 1.0), (y, 1.0)], 1.0);
    cases.push(("linear program", p, 1.0));

    // min t - 2x s.t. t >= x²
    let mut p = ConicProgram::new();
    let t = p.add_nonneg_var();
    let h = p.add_nonneg_var();
    let x = p.add_var();
    p.set_cost(t, 1.0);
    p.set_cost(x, -2.0);
    p.add_equality(&[(h, 1.0)], 1.0);
    p.add_rotated(RotatedCone::product(t, h, vec![x]));
    cases.push(("parabola", p, -1.0));

    // min t1 s.t. t1 >= |(t2, 1)|, t2 >= |(1, 1)|
    let mut p = ConicProgram::new();
    let t1 = p.add_var();
    let t2 = p.add_var();
    let one = p.add_var();
    let a = p.add_var();
    let b = p.add_var();
    p.set_cost(t1, 1.0);
    p.add_equality(&[(one, 1.0)], 1.0);
    p.add_equality(&[(a, 1.0)], 1.0);
    p.add_equality(&[(b, 1.0)], 1.0);
    p.add_soc(t1, vec![t2, one]);
    p.add_soc(t2, vec![a, b]);
    cases.push(("nested cones", p, 3f64.sqrt()));

    // max s s.t. s² <= ab, a + b = 2 (arithmetic-geometric mean)
    let mut p = ConicProgram::new();
    let a = p.add_nonneg_var();
    let b = p.add_nonneg_var();
    let s = p.add_var();
    p.set_cost(s, -1.0);
    p.add_equality(&[(a, 1.0), (b, 1.0)], 2.0);
    p.add_rotated(RotatedCone::product(a, b, vec![s]));
    cases.push(("geometric mean", p, -1.0));

    // min |x| s.t. (1, 2, 2)·x = 6 in three dimensions
    let mut p = ConicProgram::new();
    let t = p.add_var();
    let xs: Vec<usize> = (0..3).map(|_| p.add_var()).collect();
    p.set_cost(t, 1.0);
    p.add_equality(&[(xs[0], 1.0), (xs[1], 2.0), (xs[2], 2.0)], 6.0);
    p.add_soc(t, xs);
    cases.push(("distance to a plane", p, 2.0));

    cases
}

/// Random program over a box `[-1, 1]^k`: `min cᵀx` subject to a few cones
/// `|A x + b| <= dᵀx + e`, each strictly satisfied at `x = 0`.
pub struct Tiny {
    c: Vec<f64>,
    cones: Vec<(Vec<Vec<f64>>, Vec<f64>, Vec<f64>, f64)>,
}

impl Tiny {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let k = rng.random_range(2..=3);
        let c = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n_cones = rng.random_range(1..=2);
        let cones = (0..n_cones)
            .map(|_| {
                let rows = rng.random_range(1..=2);
                let a: Vec<Vec<f64>> = (0..rows)
                    .map(|_| (0..k).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .collect();
                let b: Vec<f64> = (0..rows).map(|_| rng.random_range(-0.5..0.5)).collect();
                let d: Vec<f64> = (0..k).map(|_| rng.random_range(-0.3..0.3)).collect();
                let e = b.iter().map(|v| v * v).sum::<f64>().sqrt() + rng.random_range(0.2..0.8);
                (a, b, d, e)
            })
            .collect();
        Tiny { c, cones }
    }

    fn feasible(&self, x: &[f64]) -> bool {
        self.cones.iter().all(|(a, b, d, e)| {
            let norm = a
                .iter()
                .zip(b)
                .map(|(row, bi)| {
                    let v: f64 = row.iter().zip(x).map(|(r, xi)| r * xi).sum::<f64>() + bi;
                    v * v
                })
                .sum::<f64>()
                .sqrt();
            norm <= d.iter().zip(x).map(|(di, xi)| di * xi).sum::<f64>() + e
        })
    }

    fn objective(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn program(&self) -> ConicProgram<f64> {
        let mut p = ConicProgram::new();
        let xs: Vec<usize> = self.c.iter().map(|_| p.add_box_var(-1.0, 1.0)).collect();
        for (&x, &c) in xs.iter().zip(&self.c) {
            p.set_cost(x, c);
        }
        for (a, b, d, e) in &self.cones {
            let t = p.add_var();
            let mut head: Vec<(usize, f64)> = vec![(t, 1.0)];
            head.extend(xs.iter().zip(d).map(|(&x, &di)| (x, -di)));
            p.add_equality(&head, *e);
            let body: Vec<usize> = a
                .iter()
                .zip(b)
                .map(|(row, &bi)| {
                    let u = p.add_var();
                    let mut terms = vec![(u, 1.0)];
                    terms.extend(xs.iter().zip(row).map(|(&x, &r)| (x, -r)));
                    p.add_equality(&terms, bi);
                    u
                })
                .collect();
            p.add_soc(t, body);
        }
        p
    }

    /// Grid search over the box, zooming in around the best feasible grid
    /// point. While that point sits on the edge of the window the window moves
    /// instead of shrinking, so the search can follow the optimum.
    pub fn grid_oracle(&self) -> f64 {
        let k = self.c.len();
        let points = 25usize;
        let mut center = vec![0.0f64; k];
        let mut half = 1.0f64;
        let mut best = (f64::INFINITY, vec![0.0; k]);
        for _ in 0..500 {
            if half < 1e-9 {
                break;
            }
            let lo: Vec<f64> = center.iter().map(|c| (c - half).max(-1.0)).collect();
            let hi: Vec<f64> = center.iter().map(|c| (c + half).min(1.0)).collect();
            let step: Vec<f64> = (0..k)
                .map(|i| (hi[i] - lo[i]) / (points - 1) as f64)
                .collect();
            let mut idx = vec![0usize; k];
            let mut at_edge = false;
            let mut level_best = f64::INFINITY;
            loop {
                let x: Vec<f64> = (0..k).map(|i| lo[i] + step[i] * idx[i] as f64).collect();
                if self.feasible(&x) {
                    let f = self.objective(&x);
                    if f < level_best {
                        level_best = f;
                        at_edge = (0..k).any(|i| {
                            (idx[i] == 0 && lo[i] > -1.0) || (idx[i] == points - 1 && hi[i] < 1.0)
                        });
                    }
                    if f < best.0 {
                        best = (f, x);
                    }
                }
                let mut i = 0;
                while i < k {
                    idx[i] += 1;
                    if idx[i] < points {
                        break;
                    }
                    idx[i] = 0;
                    i += 1;
                }
                if i == k {
                    break;
                }
            }
            center = best.1.clone();
            if !at_edge {
                half *= 0.5;
            }
        }
        best.0
    }
}

pub fn random_qubo(n: usize, rng: &mut ChaCha8Rng) -> Qubo {
    let quad = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let linear = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    Qubo::new(n, quad, linear, rng.random_range(-1.0..1.0)).unwrap()
}

pub fn all_energies(q: &Qubo) -> Vec<f64> {
    (0..1u64 << q.n())
        .map(|b| q.energy(&index_to_bits(b, q.n())).unwrap())
        .collect()
}

/// Closed-form minimizer of `(ρ/2)‖u − y + λ/ρ‖²` over `u ∈ {0,1}^m`; ties go to 0.
pub fn threshold_rule(y: &[f64], lambda: &[f64], rho: f64) -> Vec<u8> {
    y.iter()
        .zip(lambda)
        .map(|(y, l)| u8::from(y - l / rho > 0.5))
        .collect()
}
