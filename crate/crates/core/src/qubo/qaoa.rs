use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    build_cost_hamiltonian, index_to_bits, Diagnostics, QaoaDiagnostics, Qubo, QuboMethod,
    QuboSolution,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QaoaParams {
    pub p: usize,
    /// Starting phase angles of the first optimizer run.
    pub gamma: Vec<f64>,
    /// Starting mixer angles of the first optimizer run.
    pub beta: Vec<f64>,
    pub shots: usize,
    /// Expectation evaluations allowed per optimizer run.
    pub optimizer_budget: usize,
    /// Optimizer runs; all but the first start from random angles in `[0, π) × [0, π/2)`.
    pub restarts: usize,
    pub seed: u64,
}

impl QaoaParams {
    /// Linear-ramp starting angles for `p` layers.
    pub fn with_depth(p: usize) -> Self {
        let ramp = |k: usize| (k as f64 + 0.5) / p as f64;
        QaoaParams {
            p,
            gamma: (0..p).map(|k| 0.8 * ramp(k)).collect(),
            beta: (0..p).map(|k| 0.8 * (1.0 - ramp(k))).collect(),
            shots: 1024,
            optimizer_budget: 400,
            restarts: 5,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::InvalidParameter(
                "QAOA needs at least one layer".into(),
            ));
        }
        if self.gamma.len() != self.p || self.beta.len() != self.p {
            return Err(Error::InvalidParameter(format!(
                "QAOA with p = {} needs {} gamma and beta angles, got {} and {}",
                self.p,
                self.p,
                self.gamma.len(),
                self.beta.len()
            )));
        }
        if self.shots == 0 || self.restarts == 0 || self.optimizer_budget == 0 {
            return Err(Error::InvalidParameter(
                "QAOA shots, restarts and budget must be positive".into(),
            ));
        }
        if !self.gamma.iter().chain(&self.beta).all(|a| a.is_finite()) {
            return Err(Error::InvalidParameter("QAOA angles must be finite".into()));
        }
        Ok(())
    }
}

impl Default for QaoaParams {
    fn default() -> Self {
        QaoaParams::with_depth(3)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QaoaState {
    pub amplitudes: Vec<Complex64>,
    /// Norm after the initial superposition and after each layer.
    pub layer_norms: Vec<f64>,
}

impl QaoaState {
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn expectation(&self, diagonal: &[f64]) -> f64 {
        self.amplitudes
            .iter()
            .zip(diagonal)
            .map(|(a, c)| a.norm_sqr() * c)
            .sum()
    }
}

/// Prepares `|+⟩ⁿ` and applies `p` layers of `exp(−iβ_k ΣX) exp(−iγ_k C)`.
pub fn qaoa_statevector(qubo: &Qubo, gamma: &[f64], beta: &[f64]) -> Result<QaoaState> {
    if gamma.len() != beta.len() {
        return Err(Error::Dimension {
            expected: gamma.len(),
            got: beta.len(),
        });
    }
    let diagonal = build_cost_hamiltonian(qubo)?;
    Ok(evolve(&diagonal, qubo.n(), gamma, beta))
}

fn evolve(diagonal: &[f64], n: usize, gamma: &[f64], beta: &[f64]) -> QaoaState {
    let dim = diagonal.len();
    let amp0 = 1.0 / (dim as f64).sqrt();
    let mut psi = vec![Complex64::new(amp0, 0.0); dim];
    let mut layer_norms = Vec::with_capacity(gamma.len() + 1);
    layer_norms.push(norm(&psi));
    for (&g, &b) in gamma.iter().zip(beta) {
        for (a, &c) in psi.iter_mut().zip(diagonal) {
            *a *= Complex64::from_polar(1.0, -g * c);
        }
        let (s, co) = b.sin_cos();
        let off = Complex64::new(0.0, -s);
        for q in 0..n {
            let stride = 1usize << q;
            for block in (0..dim).step_by(2 * stride) {
                for k in block..block + stride {
                    let (a0, a1) = (psi[k], psi[k + stride]);
                    psi[k] = a0 * co + a1 * off;
                    psi[k + stride] = a0 * off + a1 * co;
                }
            }
        }
        layer_norms.push(norm(&psi));
    }
    QaoaState {
        amplitudes: psi,
        layer_norms,
    }
}

fn norm(psi: &[Complex64]) -> f64 {
    psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// Runs the ansatz with derivative-free angle optimization on the exact
/// expectation, then samples `shots` bitstrings and returns the best sample.
pub fn solve_qaoa(qubo: &Qubo, params: &QaoaParams) -> Result<QuboSolution> {
    params.validate()?;
    let n = qubo.n();
    let diagonal = build_cost_hamiltonian(qubo)?;
    let p = params.p;
    let objective = |x: &[f64]| evolve(&diagonal, n, &x[..p], &x[p..]).expectation(&diagonal);

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut trace = Vec::with_capacity(params.restarts);
    let mut evaluations = 0;
    for run in 0..params.restarts {
        let start: Vec<f64> = if run == 0 {
            params.gamma.iter().chain(&params.beta).copied().collect()
        } else {
            let mut x: Vec<f64> = (0..p).map(|_| rng.random_range(0.0..PI)).collect();
            x.extend((0..p).map(|_| rng.random_range(0.0..FRAC_PI_2)));
            x
        };
        let (x, f, used) = nelder_mead(&objective, start, params.optimizer_budget);
        evaluations += used;
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, x));
        }
        trace.push(f);
    }
    let (expectation, angles) = best.expect("at least one optimizer run");
    let state = evolve(&diagonal, n, &angles[..p], &angles[p..]);

    let sampler = WeightedIndex::new(state.probabilities())
        .map_err(|e| Error::Numerical(format!("QAOA sampling distribution: {e}")))?;
    let mut pick = (f64::INFINITY, usize::MAX);
    for _ in 0..params.shots {
        let b = sampler.sample(&mut rng);
        if diagonal[b] < pick.0 || (diagonal[b] == pick.0 && b < pick.1) {
            pick = (diagonal[b], b);
        }
    }

    Ok(QuboSolution {
        bits: index_to_bits(pick.1 as u64, n),
        energy: pick.0,
        method: QuboMethod::Qaoa,
        diagnostics: Diagnostics {
            samples: params.shots as u64,
            trace,
            qaoa: Some(QaoaDiagnostics {
                gamma: angles[..p].to_vec(),
                beta: angles[p..].to_vec(),
                expectation,
                evaluations,
                layer_norms: state.layer_norms,
            }),
        },
    })
}

/// Nelder–Mead simplex search limited to `budget` evaluations.
/// Returns the best point, its value and the evaluations spent.
fn nelder_mead(
    f: &dyn Fn(&[f64]) -> f64,
    start: Vec<f64>,
    budget: usize,
) -> (Vec<f64>, f64, usize) {
    let dim = start.len();
    let mut used = 0;
    let eval = |x: &[f64], used: &mut usize| {
        *used += 1;
        f(x)
    };
    let mut simplex = vec![(eval(&start, &mut used), start.clone())];
    for i in 0..dim {
        if used >= budget {
            break;
        }
        let mut v = start.clone();
        v[i] += 0.25;
        simplex.push((eval(&v, &mut used), v));
    }
    if simplex.len() <= dim {
        simplex.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (fx, x) = simplex.swap_remove(0);
        return (x, fx, used);
    }

    let along = |from: &[f64], to: &[f64], t: f64| -> Vec<f64> {
        from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect()
    };
    while used < budget {
        simplex.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (lo, hi) = (simplex[0].0, simplex[dim].0);
        if hi - lo <= 1e-12 * (1.0 + lo.abs()) {
            break;
        }
        let mut centroid = vec![0.0; dim];
        for (_, v) in &simplex[..dim] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / dim as f64;
            }
        }
        let worst = simplex[dim].1.clone();
        let xr = along(&centroid, &worst, -1.0);
        let fr = eval(&xr, &mut used);
        if fr < simplex[0].0 {
            if used < budget {
                let xe = along(&centroid, &worst, -2.0);
                let fe = eval(&xe, &mut used);
                simplex[dim] = if fe < fr { (fe, xe) } else { (fr, xr) };
            } else {
                simplex[dim] = (fr, xr);
            }
            continue;
        }
        if fr < simplex[dim - 1].0 {
            simplex[dim] = (fr, xr);
            continue;
        }
        if used >= budget {
            break;
        }
        // Outside contraction when the reflection beat the worst vertex, inside otherwise.
        let (xc, target) = if fr < simplex[dim].0 {
            (along(&centroid, &xr, 0.5), fr)
        } else {
            (along(&centroid, &worst, 0.5), simplex[dim].0)
        };
        let fc = eval(&xc, &mut used);
        if fc <= target {
            simplex[dim] = (fc, xc);
            continue;
        }
        // Shrink toward the best vertex.
        let best = simplex[0].1.clone();
        for k in 1..=dim {
            if used >= budget {
                break;
            }
            let v = along(&best, &simplex[k].1, 0.5);
            simplex[k] = (eval(&v, &mut used), v);
        }
    }
    simplex.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (fx, x) = simplex.swap_remove(0);
    (x, fx, used)
}
