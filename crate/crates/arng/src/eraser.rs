//! Delayed-choice quantum-eraser coincidence model: analytic joint
//! probabilities for the two environment measurement bases and a Monte
//! Carlo driven by an external bitstream choosing the basis per trial.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitStream;
use crate::error::{ArngError, Result};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// H/V measurement of the environment photon: which-path information
    /// revealed, no fringes.
    LinearHv,
    /// L/R measurement: which-path information erased, fringes appear in
    /// coincidences.
    CircularLr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detector {
    Upper,
    Lower,
}

/// Joint probability of the (environment, signal) detector pair at phase
/// phi. Linear basis: 1/4 for every pairing. Circular basis: matching
/// pairs get (1 + sin phi)/4 and crossed pairs (1 - sin phi)/4, which sums
/// to 1 at every phase.
pub fn coincidence_probability(
    basis: Basis,
    env_outcome: Detector,
    signal_outcome: Detector,
    phi: f64,
) -> f64 {
    match basis {
        Basis::LinearHv => 0.25,
        Basis::CircularLr => {
            let sign = if env_outcome == signal_outcome {
                1.0
            } else {
                -1.0
            };
            0.25 * (1.0 + sign * phi.sin())
        }
    }
}

/// Signal-upper probabilities vs phase for one (basis, env outcome) slice.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FringeSlice {
    pub basis: Basis,
    pub env_outcome: Detector,
    pub phases: Vec<f64>,
    pub signal_upper_probability: Vec<f64>,
    pub trials: Vec<u64>,
    /// Sinusoid visibility from a least-squares fit A + B sin + C cos.
    pub visibility: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FringeReport {
    pub slices: Vec<FringeSlice>,
    pub phases: Vec<f64>,
    /// Unconditioned signal-upper marginal per phase (all trials).
    pub signal_marginal: Vec<f64>,
    pub trials_per_phase: u64,
    pub bits_consumed: usize,
}

/// Monte Carlo eraser run. One external bit is consumed per trial to pick
/// the basis (0 -> linear, 1 -> circular); outcomes are drawn from the
/// analytic joint distribution. Trials for different phases run in
/// parallel with counter-derived seeds, deterministic for a fixed seed.
pub fn simulate_eraser(
    basis_bits: &BitStream,
    phases: &[f64],
    trials_per_phase: u64,
    seed: u64,
) -> Result<FringeReport> {
    let needed = phases.len() * trials_per_phase as usize;
    if basis_bits.len() < needed {
        return Err(ArngError::InsufficientData(format!(
            "need {needed} basis bits, have {}",
            basis_bits.len()
        )));
    }
    if phases.is_empty() || trials_per_phase == 0 {
        return Err(ArngError::invalid("need at least one phase and one trial"));
    }

    // tallies[basis][env][signal] per phase
    let per_phase: Vec<[[[u64; 2]; 2]; 2]> = par::map_indexed(phases.len(), |pi| {
        let phi = phases[pi];
        let mut rng = ChaCha12Rng::seed_from_u64(seed ^ (pi as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let offset = pi * trials_per_phase as usize;
        let mut tallies = [[[0u64; 2]; 2]; 2];
        for t in 0..trials_per_phase as usize {
            let basis = if basis_bits.bits[offset + t] == 0 {
                Basis::LinearHv
            } else {
                Basis::CircularLr
            };
            let (env, signal) = sample_outcomes(basis, phi, &mut rng);
            tallies[basis as usize][env as usize][signal as usize] += 1;
        }
        tallies
    });

    let mut slices = Vec::new();
    for basis in [Basis::LinearHv, Basis::CircularLr] {
        for env in [Detector::Upper, Detector::Lower] {
            let mut probs = Vec::with_capacity(phases.len());
            let mut trials = Vec::with_capacity(phases.len());
            for tallies in &per_phase {
                let row = &tallies[basis as usize][env as usize];
                let total = row[0] + row[1];
                trials.push(total);
                probs.push(if total > 0 {
                    row[Detector::Upper as usize] as f64 / total as f64
                } else {
                    f64::NAN
                });
            }
            let visibility = fit_visibility(phases, &probs);
            slices.push(FringeSlice {
                basis,
                env_outcome: env,
                phases: phases.to_vec(),
                signal_upper_probability: probs,
                trials,
                visibility,
            });
        }
    }
    let signal_marginal = per_phase
        .iter()
        .map(|tallies| {
            let mut upper = 0u64;
            let mut total = 0u64;
            for b in 0..2 {
                for e in 0..2 {
                    upper += tallies[b][e][Detector::Upper as usize];
                    total += tallies[b][e][0] + tallies[b][e][1];
                }
            }
            upper as f64 / total as f64
        })
        .collect();
    Ok(FringeReport {
        slices,
        phases: phases.to_vec(),
        signal_marginal,
        trials_per_phase,
        bits_consumed: needed,
    })
}

impl Detector {
    fn from_index(i: usize) -> Detector {
        if i == 0 {
            Detector::Upper
        } else {
            Detector::Lower
        }
    }
}

fn sample_outcomes(basis: Basis, phi: f64, rng: &mut impl Rng) -> (Detector, Detector) {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for e in 0..2 {
        for s in 0..2 {
            let env = Detector::from_index(e);
            let sig = Detector::from_index(s);
            acc += coincidence_probability(basis, env, sig, phi);
            if u < acc {
                return (env, sig);
            }
        }
    }
    (Detector::Lower, Detector::Lower)
}

/// Least-squares fit of p(phi) = A + B sin(phi) + C cos(phi); visibility
/// is sqrt(B^2 + C^2)/A, NaN points ignored.
pub fn fit_visibility(phases: &[f64], probs: &[f64]) -> f64 {
    // normal equations for the 3-parameter linear model
    let mut xtx = [[0.0f64; 3]; 3];
    let mut xty = [0.0f64; 3];
    let mut used = 0usize;
    for (&phi, &p) in phases.iter().zip(probs) {
        if !p.is_finite() {
            continue;
        }
        used += 1;
        let row = [1.0, phi.sin(), phi.cos()];
        for i in 0..3 {
            for j in 0..3 {
                xtx[i][j] += row[i] * row[j];
            }
            xty[i] += row[i] * p;
        }
    }
    if used < 3 {
        return f64::NAN;
    }
    match solve3(xtx, xty) {
        Some([a, b, c]) => (b * b + c * c).sqrt() / a,
        None => f64::NAN,
    }
}

fn solve3(mut m: [[f64; 3]; 3], mut y: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())?;
        if m[pivot][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        y.swap(col, pivot);
        for row in 0..3 {
            if row == col {
                continue;
            }
            let factor = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= factor * m[col][k];
            }
            y[row] -= factor * y[col];
        }
    }
    Some([y[0] / m[0][0], y[1] / m[1][1], y[2] / m[2][2]])
}
