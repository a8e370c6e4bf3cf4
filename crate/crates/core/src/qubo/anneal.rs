use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{bits_to_index, Diagnostics, Qubo, QuboMethod, QuboSolution};
use crate::error::{Error, Result};

/// Geometric cooling schedule.
///
/// Temperatures are relative: they are multiplied by the largest possible
/// single-flip energy change of the instance, so one schedule fits any scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealSchedule {
    pub t_start: f64,
    pub t_end: f64,
    pub sweeps: usize,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        AnnealSchedule {
            t_start: 1.0,
            t_end: 1e-3,
            sweeps: 400,
        }
    }
}

impl AnnealSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0 && self.t_start > self.t_end && self.t_start.is_finite()) {
            return Err(Error::InvalidParameter(
                "annealing needs t_start > t_end > 0".into(),
            ));
        }
        if self.sweeps == 0 {
            return Err(Error::InvalidParameter(
                "annealing needs at least one sweep".into(),
            ));
        }
        Ok(())
    }

    fn temperature(&self, sweep: usize) -> f64 {
        if self.sweeps == 1 {
            return self.t_end;
        }
        let frac = sweep as f64 / (self.sweeps - 1) as f64;
        self.t_start * (self.t_end / self.t_start).powf(frac)
    }
}

/// Simulated annealing with single-bit Metropolis moves and random restarts.
///
/// Every restart starts from a uniformly random state and ends with a greedy
/// descent. The all-zero state seeds the incumbent, so the result is never
/// worse than it. Ties between restarts go to the smaller index.
pub fn solve_sa(
    qubo: &Qubo,
    schedule: &AnnealSchedule,
    restarts: usize,
    seed: u64,
) -> Result<QuboSolution> {
    schedule.validate()?;
    if restarts == 0 {
        return Err(Error::InvalidParameter(
            "annealing needs at least one restart".into(),
        ));
    }
    let n = qubo.n();
    let scale = (0..n)
        .map(|i| {
            let mut s = (qubo.linear[i] + qubo.quad(i, i)).abs();
            for j in (0..n).filter(|&j| j != i) {
                s += 2.0 * qubo.quad(i, j).abs();
            }
            s
        })
        .fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zeros = vec![0u8; n];
    let mut best = (qubo.energy_unchecked(&zeros), zeros);
    let mut trace = Vec::with_capacity(restarts);
    let mut samples = 0u64;

    for _ in 0..restarts {
        let mut bits: Vec<u8> = (0..n).map(|_| rng.random_range(0..=1u8)).collect();
        let mut h = qubo.fields(&bits);
        let mut e = qubo.energy_unchecked(&bits);
        let mut run_best = (e, bits.clone());

        let flip = |bits: &mut Vec<u8>, h: &mut Vec<f64>, e: &mut f64, i: usize| {
            let up = bits[i] == 0;
            *e += if up { h[i] } else { -h[i] };
            bits[i] ^= 1;
            let sign = if up { 2.0 } else { -2.0 };
            for (j, hj) in h.iter_mut().enumerate() {
                if j != i {
                    *hj += sign * qubo.quad(j, i);
                }
            }
        };

        if scale > 0.0 {
            for sweep in 0..schedule.sweeps {
                let t = schedule.temperature(sweep) * scale;
                for i in 0..n {
                    samples += 1;
                    let delta = if bits[i] == 0 { h[i] } else { -h[i] };
                    if delta <= 0.0 || rng.random::<f64>() < (-delta / t).exp() {
                        flip(&mut bits, &mut h, &mut e, i);
                        if e < run_best.0 {
                            run_best = (e, bits.clone());
                        }
                    }
                }
            }
        }

        // Greedy descent from the best state of this run.
        bits = run_best.1;
        h = qubo.fields(&bits);
        e = qubo.energy_unchecked(&bits);
        for _ in 0..=n * n + 1 {
            let mut improved = false;
            for i in 0..n {
                samples += 1;
                let delta = if bits[i] == 0 { h[i] } else { -h[i] };
                if delta < 0.0 {
                    flip(&mut bits, &mut h, &mut e, i);
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }

        let exact = qubo.energy_unchecked(&bits);
        if exact < best.0 || (exact == best.0 && bits_to_index(&bits) < bits_to_index(&best.1)) {
            best = (exact, bits);
        }
        trace.push(best.0);
    }

    Ok(QuboSolution {
        bits: best.1,
        energy: best.0,
        method: QuboMethod::Annealing,
        diagnostics: Diagnostics {
            samples,
            trace,
            qaoa: None,
        },
    })
}
