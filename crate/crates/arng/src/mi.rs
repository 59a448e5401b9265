//! Statistical predictability of a bitstream: plug-in and bias-corrected
//! mutual information between an m-bit history and the next bit, surrogate
//! null distributions, conditional-probability tables, and the Poisson
//! variance check on binned count rates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitStream;
use crate::error::{ArngError, Result};
use crate::par;
use crate::stream::{Channel, TagStream};

/// Minimum samples to estimate at depth m: N >= 2^(m+4).
fn min_samples_plugin(m: u32) -> usize {
    1usize << (m + 4)
}

/// Quarter-chunks must stay estimable: N >= 2^(m+6).
fn min_samples_corrected(m: u32) -> usize {
    1usize << (m + 6)
}

/// Plug-in estimate of I(m; m+1) in bits over all overlapping
/// (m+1)-windows, with the 0 log 0 = 0 convention.
pub fn plugin_mutual_information(bits: &[u8], m: u32) -> Result<f64> {
    if m < 1 {
        return Err(ArngError::invalid("lookback depth must be >= 1"));
    }
    let n = bits.len();
    if n < min_samples_plugin(m) {
        return Err(ArngError::InsufficientData(format!(
            "need at least {} bits for m = {m}, have {n}",
            min_samples_plugin(m)
        )));
    }
    let histories = 1usize << m;
    let mask = histories - 1;
    let mut joint = vec![[0u64; 2]; histories];
    let mut window = 0usize;
    for &b in &bits[..m as usize] {
        window = (window << 1) | b as usize;
    }
    for &b in &bits[m as usize..] {
        let y = b as usize;
        joint[window & mask][y] += 1;
        window = ((window << 1) | y) & mask;
    }
    let total = (n - m as usize) as f64;

    let mut p_y = [0.0; 2];
    let mut mi = 0.0;
    for row in &joint {
        p_y[0] += row[0] as f64;
        p_y[1] += row[1] as f64;
    }
    p_y[0] /= total;
    p_y[1] /= total;
    for row in &joint {
        let p_x = (row[0] + row[1]) as f64 / total;
        if p_x == 0.0 {
            continue;
        }
        for y in 0..2 {
            let p_xy = row[y] as f64 / total;
            if p_xy > 0.0 {
                mi += p_xy * (p_xy / (p_x * p_y[y])).log2();
            }
        }
    }
    Ok(mi.max(0.0))
}

/// One depth's estimates plus the fitted nuisance coefficients of the
/// finite-sample bias ansatz I_hat = I + a/N + b/N^2.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MiEstimate {
    pub m: u32,
    pub plugin_value: f64,
    pub corrected_value: f64,
    pub a_hat: f64,
    pub b_hat: f64,
    pub n: usize,
}

/// Solve the ansatz from the full/half/quarter estimates:
/// u at N, v at N/2, w at N/4 give I = (8u - 6v + w)/3.
pub fn solve_bias_ansatz(u: f64, v: f64, w: f64, n: usize) -> (f64, f64, f64) {
    let i = (8.0 * u - 6.0 * v + w) / 3.0;
    let a_over_n = (4.0 * u - 3.0 * i - v) / 2.0;
    let b_over_n2 = u - i - a_over_n;
    let nf = n as f64;
    (i, a_over_n * nf, b_over_n2 * nf * nf)
}

/// Average plug-in MI over `parts` contiguous, equal-as-possible chunks
/// covering the data exactly once.
fn chunked_plugin(bits: &[u8], m: u32, parts: usize) -> Result<f64> {
    let n = bits.len();
    let mut sum = 0.0;
    for k in 0..parts {
        let lo = k * n / parts;
        let hi = (k + 1) * n / parts;
        sum += plugin_mutual_information(&bits[lo..hi], m)?;
    }
    Ok(sum / parts as f64)
}

/// Bias-corrected MI. The corrected value may be negative; it is reported
/// as-is and interpreted as consistent with zero.
pub fn corrected_mutual_information(bits: &[u8], m: u32) -> Result<MiEstimate> {
    let n = bits.len();
    if n < min_samples_corrected(m) {
        return Err(ArngError::InsufficientData(format!(
            "need at least {} bits for corrected MI at m = {m}, have {n}",
            min_samples_corrected(m)
        )));
    }
    let u = plugin_mutual_information(bits, m)?;
    let v = chunked_plugin(bits, m, 2)?;
    let w = chunked_plugin(bits, m, 4)?;
    let (i, a_hat, b_hat) = solve_bias_ansatz(u, v, w, n);
    Ok(MiEstimate {
        m,
        plugin_value: u,
        corrected_value: i,
        a_hat,
        b_hat,
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateKind {
    /// Fresh Bernoulli streams with the data's length and ones fraction.
    Bernoulli,
    /// Random permutations of the data bits.
    Permutation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NullDistribution {
    pub m: u32,
    pub samples: Vec<f64>,
    /// Number of surrogate values strictly below the data's corrected MI.
    pub data_rank: usize,
    pub data_value: f64,
}

impl NullDistribution {
    /// Significant when the data exceeds every surrogate.
    pub fn is_significant(&self) -> bool {
        self.data_rank == self.samples.len()
    }
}

pub const DEFAULT_SURROGATE_COUNT: usize = 50;

fn surrogate_seed(master: u64, index: usize) -> u64 {
    master ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Corrected MI of `count` surrogate streams sharing the data's length and
/// ones fraction, plus the data's rank among them. Surrogate evaluations
/// are independent and run on the parallel pool; results are deterministic
/// for a fixed seed.
pub fn surrogate_null(
    bits: &BitStream,
    m: u32,
    count: usize,
    seed: u64,
    kind: SurrogateKind,
) -> Result<NullDistribution> {
    let data = corrected_mutual_information(&bits.bits, m)?;
    let p_one = bits.ones_fraction();
    let n = bits.len();
    let results = par::map_indexed(count, |i| {
        let mut rng = ChaCha12Rng::seed_from_u64(surrogate_seed(seed, i));
        let surrogate: Vec<u8> = match kind {
            SurrogateKind::Bernoulli => (0..n)
                .map(|_| if rng.random::<f64>() < p_one { 1 } else { 0 })
                .collect(),
            SurrogateKind::Permutation => {
                let mut v = bits.bits.clone();
                // Fisher-Yates
                for j in (1..v.len()).rev() {
                    let k = rng.random_range(0..=j);
                    v.swap(j, k);
                }
                v
            }
        };
        corrected_mutual_information(&surrogate, m)
            .map(|e| e.corrected_value)
    });
    let mut samples = Vec::with_capacity(count);
    for r in results {
        samples.push(r?);
    }
    let data_rank = samples
        .iter()
        .filter(|&&s| s < data.corrected_value)
        .count();
    Ok(NullDistribution {
        m,
        samples,
        data_rank,
        data_value: data.corrected_value,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionalRow {
    /// History bits, most recent last, as a binary string.
    pub history: String,
    pub count: u64,
    pub p_one: f64,
    /// p(history -> 1) minus the global p(1).
    pub excess: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionalTable {
    pub m: u32,
    pub global_p_one: f64,
    pub rows: Vec<ConditionalRow>,
}

/// Per-history next-bit probabilities with counts and excess over the
/// global ones fraction.
pub fn conditional_probability_table(bits: &[u8], m: u32) -> Result<ConditionalTable> {
    let n = bits.len();
    if n < min_samples_plugin(m) {
        return Err(ArngError::InsufficientData(format!(
            "need at least {} bits for m = {m}, have {n}",
            min_samples_plugin(m)
        )));
    }
    let histories = 1usize << m;
    let mask = histories - 1;
    let mut counts = vec![[0u64; 2]; histories];
    let mut window = 0usize;
    for &b in &bits[..m as usize] {
        window = (window << 1) | b as usize;
    }
    for &b in &bits[m as usize..] {
        let y = b as usize;
        counts[window & mask][y] += 1;
        window = ((window << 1) | y) & mask;
    }
    let ones = bits.iter().map(|&b| b as u64).sum::<u64>();
    let global_p_one = ones as f64 / n as f64;
    let rows = (0..histories)
        .map(|x| {
            let total = counts[x][0] + counts[x][1];
            let p_one = if total > 0 {
                counts[x][1] as f64 / total as f64
            } else {
                f64::NAN
            };
            ConditionalRow {
                history: (0..m)
                    .rev()
                    .map(|bit| if x >> bit & 1 == 1 { '1' } else { '0' })
                    .collect(),
                count: total,
                p_one,
                excess: p_one - global_p_one,
            }
        })
        .collect();
    Ok(ConditionalTable {
        m,
        global_p_one,
        rows,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoissonCheck {
    pub bin_s: f64,
    pub bins: usize,
    pub fano_blue: Option<f64>,
    pub fano_red: Option<f64>,
    pub pass: bool,
}

pub const FANO_PASS_BAND: (f64, f64) = (0.8, 1.2);

/// Variance/mean (Fano factor) of binned per-channel counts. A channel
/// with no events reports None and does not affect the pass flag.
pub fn poisson_variance_check(stream: &TagStream, bin_s: f64) -> Result<PoissonCheck> {
    let tick_s = stream.clock_tick_s();
    let last = stream.events.last().map(|e| e.tick).unwrap_or(0);
    let span_s = last as f64 * tick_s;
    let bins = (span_s / bin_s).floor() as usize;
    if bins < 100 {
        return Err(ArngError::InsufficientData(format!(
            "need at least 100 bins, have {bins}"
        )));
    }
    let mut fano = [None, None];
    let mut pass = true;
    for (slot, channel) in [Channel::Blue, Channel::Red].into_iter().enumerate() {
        let mut counts = vec![0u64; bins];
        for e in stream.events.iter().filter(|e| e.channel == channel) {
            let idx = ((e.tick as f64 * tick_s) / bin_s) as usize;
            if idx < bins {
                counts[idx] += 1;
            }
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            continue;
        }
        let mean = total as f64 / bins as f64;
        let var = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - mean;
                d * d
            })
            .sum::<f64>()
            / (bins - 1) as f64;
        let f = var / mean;
        fano[slot] = Some(f);
        if f < FANO_PASS_BAND.0 || f > FANO_PASS_BAND.1 {
            pass = false;
        }
    }
    Ok(PoissonCheck {
        bin_s,
        bins,
        fano_blue: fano[0],
        fano_red: fano[1],
        pass,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MiReport {
    pub estimates: Vec<MiEstimate>,
    pub nulls: Vec<NullDistribution>,
    pub tables: Vec<ConditionalTable>,
    pub max_info: f64,
    pub max_info_m: u32,
    pub any_significant: bool,
    pub worst_conditional_excess: f64,
}

pub const DEFAULT_MAX_LOOKBACK: u32 = 6;

/// Full per-depth analysis for m = 1..=max_m, skipping depths the data is
/// too short for.
pub fn mi_report(
    bits: &BitStream,
    max_m: u32,
    surrogate_count: usize,
    seed: u64,
) -> Result<MiReport> {
    let mut estimates = Vec::new();
    let mut nulls = Vec::new();
    let mut tables = Vec::new();
    for m in 1..=max_m {
        if bits.len() < min_samples_corrected(m) {
            break;
        }
        estimates.push(corrected_mutual_information(&bits.bits, m)?);
        nulls.push(surrogate_null(
            bits,
            m,
            surrogate_count,
            seed,
            SurrogateKind::Bernoulli,
        )?);
        tables.push(conditional_probability_table(&bits.bits, m)?);
    }
    if estimates.is_empty() {
        return Err(ArngError::InsufficientData(
            "bitstream too short for any lookback depth".into(),
        ));
    }
    let best = estimates
        .iter()
        .max_by(|a, b| a.corrected_value.partial_cmp(&b.corrected_value).unwrap())
        .unwrap();
    let worst_conditional_excess = tables
        .iter()
        .flat_map(|t| t.rows.iter())
        .filter(|r| r.count >= 100)
        .map(|r| r.excess.abs())
        .fold(0.0_f64, f64::max);
    Ok(MiReport {
        max_info: best.corrected_value,
        max_info_m: best.m,
        any_significant: nulls.iter().any(|n| n.is_significant()),
        estimates,
        nulls,
        tables,
        worst_conditional_excess,
    })
}

/// Closed-form MI of a stationary first-order two-state Markov chain,
/// used as an independent oracle in tests: I = H(pi) - sum_x pi_x H(p(1|x)).
pub fn markov_chain_mi(p_one_given_one: f64, stationary_p_one: f64) -> f64 {
    let pi1 = stationary_p_one;
    let pi0 = 1.0 - pi1;
    // stationarity fixes p(1|0)
    let p_one_given_zero = pi1 * (1.0 - p_one_given_one) / pi0;
    binary_entropy(pi1) - (pi0 * binary_entropy(p_one_given_zero) + pi1 * binary_entropy(p_one_given_one))
}

/// p(1|0) implied by stationarity for the chain above.
pub fn markov_chain_p_one_given_zero(p_one_given_one: f64, stationary_p_one: f64) -> f64 {
    stationary_p_one * (1.0 - p_one_given_one) / (1.0 - stationary_p_one)
}

fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// Sample a stationary two-state Markov chain (test/bench helper and
/// surrogate for correlated sources).
pub fn sample_markov_chain(
    p_one_given_one: f64,
    stationary_p_one: f64,
    n: usize,
    seed: u64,
) -> Vec<u8> {
    let p01 = markov_chain_p_one_given_zero(p_one_given_one, stationary_p_one);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut bits = Vec::with_capacity(n);
    let mut state = if rng.random::<f64>() < stationary_p_one {
        1u8
    } else {
        0u8
    };
    bits.push(state);
    for _ in 1..n {
        let p = if state == 1 { p_one_given_one } else { p01 };
        state = if rng.random::<f64>() < p { 1 } else { 0 };
        bits.push(state);
    }
    bits
}
