//! Quadratic unconstrained binary optimization.
//!
//! Energy convention: `f(x) = xᵀQx + cᵀx + d` over `x ∈ {0,1}ⁿ`, minimized.
//! Basis states are indexed little-endian, bit `i` of an index is variable `i`.
//!
//! The mixed-binary ADMM keeps every conic constraint in its continuous block,
//! so the QUBOs built here never carry converted inequality constraints.

mod anneal;
mod qaoa;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use anneal::{solve_sa, AnnealSchedule};
pub use qaoa::{qaoa_statevector, solve_qaoa, QaoaParams, QaoaState};

/// Largest instance [`solve_exhaustive`] and [`approximation_ratio`] accept.
pub const MAX_EXHAUSTIVE_VARS: usize = 24;
/// Largest instance the statevector simulator accepts.
pub const MAX_STATEVECTOR_VARS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QuboDocument", into = "QuboDocument")]
pub struct Qubo {
    n: usize,
    /// Row-major, symmetric.
    quad: Vec<f64>,
    linear: Vec<f64>,
    offset: f64,
}

/// Serialized form: `quad` is a dense list of rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct QuboDocument {
    n: usize,
    quad: Vec<Vec<f64>>,
    linear: Vec<f64>,
    offset: f64,
}

impl TryFrom<QuboDocument> for Qubo {
    type Error = Error;

    fn try_from(doc: QuboDocument) -> Result<Self> {
        if doc.quad.len() != doc.n {
            return Err(Error::Dimension {
                expected: doc.n,
                got: doc.quad.len(),
            });
        }
        if let Some(row) = doc.quad.iter().find(|r| r.len() != doc.n) {
            return Err(Error::Dimension {
                expected: doc.n,
                got: row.len(),
            });
        }
        Qubo::new(doc.n, doc.quad.concat(), doc.linear, doc.offset)
    }
}

impl From<Qubo> for QuboDocument {
    fn from(q: Qubo) -> Self {
        let quad = if q.n == 0 {
            Vec::new()
        } else {
            q.quad.chunks(q.n).map(<[f64]>::to_vec).collect()
        };
        QuboDocument {
            n: q.n,
            quad,
            linear: q.linear,
            offset: q.offset,
        }
    }
}

impl Qubo {
    /// Builds an instance from a row-major `n × n` matrix, replacing it by `(Q + Qᵀ)/2`.
    pub fn new(n: usize, quad: Vec<f64>, linear: Vec<f64>, offset: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "a QUBO needs at least one variable".into(),
            ));
        }
        if quad.len() != n * n {
            return Err(Error::Dimension {
                expected: n * n,
                got: quad.len(),
            });
        }
        if linear.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: linear.len(),
            });
        }
        if !(quad.iter().chain(&linear).all(|v| v.is_finite()) && offset.is_finite()) {
            return Err(Error::InvalidParameter(
                "QUBO coefficients must be finite".into(),
            ));
        }
        let mut sym = quad;
        for i in 0..n {
            for j in i + 1..n {
                let m = 0.5 * (sym[i * n + j] + sym[j * n + i]);
                sym[i * n + j] = m;
                sym[j * n + i] = m;
            }
        }
        Ok(Qubo {
            n,
            quad: sym,
            linear,
            offset,
        })
    }

    /// Instance with `Q = 0`.
    pub fn separable(linear: Vec<f64>, offset: f64) -> Result<Self> {
        let n = linear.len();
        Qubo::new(n, vec![0.0; n * n], linear, offset)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn quad(&self, i: usize, j: usize) -> f64 {
        self.quad[i * self.n + j]
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("QUBO serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Energy of a 0/1 vector.
    pub fn energy(&self, bits: &[u8]) -> Result<f64> {
        if bits.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: bits.len(),
            });
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidParameter("bits must be 0 or 1".into()));
        }
        Ok(self.energy_unchecked(bits))
    }

    fn energy_unchecked(&self, bits: &[u8]) -> f64 {
        let n = self.n;
        let mut e = 0.0;
        for i in (0..n).filter(|&i| bits[i] == 1) {
            let row = &self.quad[i * n..(i + 1) * n];
            let mut s = self.linear[i];
            for j in (0..n).filter(|&j| bits[j] == 1) {
                s += row[j];
            }
            e += s;
        }
        e + self.offset
    }

    fn energy_of_index(&self, index: u64) -> f64 {
        self.energy_unchecked(&index_to_bits(index, self.n))
    }

    /// Energy change of flipping `0 → 1` at `i`, given the other bits: `c_i + Q_ii + 2 Σ_{j≠i} Q_ij x_j`.
    fn fields(&self, bits: &[u8]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let row = &self.quad[i * n..(i + 1) * n];
                let mut h = self.linear[i] + row[i];
                for j in (0..n).filter(|&j| j != i && bits[j] == 1) {
                    h += 2.0 * row[j];
                }
                h
            })
            .collect()
    }

    /// Sum of coefficient magnitudes, used as the scale for round-off tolerances.
    fn magnitude(&self) -> f64 {
        self.quad
            .iter()
            .chain(&self.linear)
            .map(|v| v.abs())
            .sum::<f64>()
            + self.offset.abs()
    }
}

/// `bitsᵀQ bits + cᵀbits + d`.
pub fn energy(qubo: &Qubo, bits: &[u8]) -> Result<f64> {
    qubo.energy(bits)
}

pub fn index_to_bits(index: u64, n: usize) -> Vec<u8> {
    (0..n).map(|i| ((index >> i) & 1) as u8).collect()
}

pub fn bits_to_index(bits: &[u8]) -> u64 {
    bits.iter()
        .enumerate()
        .fold(0, |acc, (i, &b)| acc | (u64::from(b & 1) << i))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuboMethod {
    Exhaustive,
    Annealing,
    Qaoa,
}

impl QuboMethod {
    pub fn name(self) -> &'static str {
        match self {
            QuboMethod::Exhaustive => "exhaustive",
            QuboMethod::Annealing => "sa",
            QuboMethod::Qaoa => "qaoa",
        }
    }
}

impl std::fmt::Display for QuboMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for QuboMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" => Ok(QuboMethod::Exhaustive),
            "sa" | "annealing" => Ok(QuboMethod::Annealing),
            "qaoa" => Ok(QuboMethod::Qaoa),
            _ => Err(Error::InvalidParameter(format!(
                "unknown QUBO backend '{s}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct QaoaDiagnostics {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    /// Exact `⟨C⟩` at the returned angles.
    pub expectation: f64,
    pub evaluations: usize,
    /// State norm after each layer at the returned angles.
    pub layer_norms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Configurations evaluated (exhaustive), proposals (annealing) or shots (QAOA).
    pub samples: u64,
    /// Best energy seen after each restart; for QAOA the best expectation per restart.
    pub trace: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qaoa: Option<QaoaDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuboSolution {
    pub bits: Vec<u8>,
    pub energy: f64,
    pub method: QuboMethod,
    pub diagnostics: Diagnostics,
}

impl QuboSolution {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serializes")
    }
}

fn check_size(n: usize, limit: usize) -> Result<()> {
    if n > limit {
        return Err(Error::TooLarge {
            what: "QUBO variables",
            size: n,
            limit,
        });
    }
    Ok(())
}

/// Lowest and highest energy over all states, each with the smallest index among ties.
#[derive(Debug, Clone, Copy)]
struct Extremes {
    min: (f64, u64),
    max: (f64, u64),
}

fn better_min(a: (f64, u64), b: (f64, u64)) -> (f64, u64) {
    if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
        b
    } else {
        a
    }
}

fn better_max(a: (f64, u64), b: (f64, u64)) -> (f64, u64) {
    if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
        b
    } else {
        a
    }
}

const CHUNK_BITS: usize = 14;

/// Walks every state with incremental energies in Gray-code order inside
/// chunks of the low bits. States within round-off of the running extremes
/// are re-evaluated with [`Qubo::energy`], so the answer equals a plain scan
/// of `energy()` values.
fn extremes(qubo: &Qubo) -> Extremes {
    let n = qubo.n;
    let low = n.min(CHUNK_BITS);
    let chunks = 1u64 << (n - low);
    let tol = 1e-9 * (1.0 + qubo.magnitude());
    (0..chunks)
        .into_par_iter()
        .map(|hi| chunk_extremes(qubo, hi << low, low, tol))
        .reduce_with(|a, b| Extremes {
            min: better_min(a.min, b.min),
            max: better_max(a.max, b.max),
        })
        .expect("at least one chunk")
}

fn chunk_extremes(qubo: &Qubo, base: u64, low: usize, tol: f64) -> Extremes {
    let n = qubo.n;
    let mut bits = index_to_bits(base, n);
    let mut h = qubo.fields(&bits);
    let mut e = qubo.energy_unchecked(&bits);
    let mut index = base;
    let first = (e, base);
    let (mut run_min, mut run_max) = (e, e);
    let (mut best_min, mut best_max) = (first, first);
    for k in 1u64..(1u64 << low) {
        let i = k.trailing_zeros() as usize;
        let up = bits[i] == 0;
        e += if up { h[i] } else { -h[i] };
        bits[i] ^= 1;
        index ^= 1 << i;
        let sign = if up { 2.0 } else { -2.0 };
        for (j, hj) in h.iter_mut().enumerate() {
            if j != i {
                *hj += sign * qubo.quad[j * n + i];
            }
        }
        if e <= run_min + tol {
            run_min = run_min.min(e);
            best_min = better_min(best_min, (qubo.energy_unchecked(&bits), index));
        }
        if e >= run_max - tol {
            run_max = run_max.max(e);
            best_max = better_max(best_max, (qubo.energy_unchecked(&bits), index));
        }
    }
    Extremes {
        min: best_min,
        max: best_max,
    }
}

/// Global minimizer by enumeration; ties go to the smallest index.
pub fn solve_exhaustive(qubo: &Qubo) -> Result<QuboSolution> {
    check_size(qubo.n, MAX_EXHAUSTIVE_VARS)?;
    let (energy, index) = extremes(qubo).min;
    Ok(QuboSolution {
        bits: index_to_bits(index, qubo.n),
        energy,
        method: QuboMethod::Exhaustive,
        diagnostics: Diagnostics {
            samples: 1 << qubo.n,
            trace: vec![energy],
            qaoa: None,
        },
    })
}

/// Diagonal of the cost operator: entry `b` is the energy of basis state `b`.
///
/// With `x_i = (1 − Z_i)/2` this is the Ising Hamiltonian of the instance.
pub fn build_cost_hamiltonian(qubo: &Qubo) -> Result<Vec<f64>> {
    check_size(qubo.n, MAX_STATEVECTOR_VARS)?;
    Ok((0..1u64 << qubo.n)
        .into_par_iter()
        .map(|b| qubo.energy_of_index(b))
        .collect())
}

/// Quality of `bits` on the maximization form `−f`, normalized so that the
/// optimum scores 1 and the worst state 0. A constant instance scores 1.
pub fn approximation_ratio(qubo: &Qubo, bits: &[u8]) -> Result<f64> {
    check_size(qubo.n, MAX_EXHAUSTIVE_VARS)?;
    let e = qubo.energy(bits)?;
    let ext = extremes(qubo);
    let (best, worst) = (-ext.min.0, -ext.max.0);
    if best == worst {
        return Ok(1.0);
    }
    Ok(((-e - worst) / (best - worst)).clamp(0.0, 1.0))
}
