//! Turning tag streams into bitstreams: color mapping (blue -> 0,
//! red -> 1) and timestamp parity, plus imbalance reporting.

use serde::{Deserialize, Serialize};

use crate::error::{ArngError, Result};
use crate::stream::{Channel, TagStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BitScheme {
    Color,
    TimeParity,
}

#[derive(Debug, Clone)]
pub struct BitStream {
    pub bits: Vec<u8>,
    pub ticks: Vec<u64>,
    pub scheme: BitScheme,
    pub metadata: String,
}

impl BitStream {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn ones_fraction(&self) -> f64 {
        if self.bits.is_empty() {
            return f64::NAN;
        }
        self.bits.iter().map(|&b| b as u64).sum::<u64>() as f64 / self.bits.len() as f64
    }
}

/// Blue maps to 0 and red to 1, order preserved.
pub fn bits_from_color(stream: &TagStream) -> BitStream {
    let bits = stream
        .events
        .iter()
        .map(|e| match e.channel {
            Channel::Blue => 0u8,
            Channel::Red => 1u8,
        })
        .collect();
    BitStream {
        bits,
        ticks: stream.events.iter().map(|e| e.tick).collect(),
        scheme: BitScheme::Color,
        metadata: "color (blue=0, red=1)".into(),
    }
}

/// Bit = floor(event_time / digit_period) mod 2, with event_time in seconds
/// reconstructed from ticks.
pub fn bits_from_time_parity(stream: &TagStream, digit_period_s: f64) -> Result<BitStream> {
    let tick_s = stream.clock_tick_s();
    if digit_period_s < tick_s {
        return Err(ArngError::invalid(format!(
            "digit period {digit_period_s} s is below one clock tick ({tick_s} s)"
        )));
    }
    // integer femtoseconds keep the floor exact for commensurate periods
    let period_fs = (digit_period_s * 1e15).round() as u128;
    let tick_fs = stream.clock_tick_fs as u128;
    let bits = stream
        .events
        .iter()
        .map(|e| ((e.tick as u128 * tick_fs / period_fs) % 2) as u8)
        .collect();
    Ok(BitStream {
        bits,
        ticks: stream.events.iter().map(|e| e.tick).collect(),
        scheme: BitScheme::TimeParity,
        metadata: format!("time parity, period {digit_period_s} s"),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImbalanceReport {
    pub ones_fraction: f64,
    pub ones: u64,
    pub zeros: u64,
    pub window_size: usize,
    /// Ones fraction per fixed-size window for drift inspection.
    pub window_fractions: Vec<f64>,
}

pub fn imbalance_report(bits: &BitStream, window_size: usize) -> Result<ImbalanceReport> {
    if bits.is_empty() {
        return Err(ArngError::InsufficientData("empty bitstream".into()));
    }
    let ones = bits.bits.iter().map(|&b| b as u64).sum::<u64>();
    let zeros = bits.len() as u64 - ones;
    let window_fractions = bits
        .bits
        .chunks(window_size.max(1))
        .map(|w| w.iter().map(|&b| b as u64).sum::<u64>() as f64 / w.len() as f64)
        .collect();
    Ok(ImbalanceReport {
        ones_fraction: ones as f64 / bits.len() as f64,
        ones,
        zeros,
        window_size,
        window_fractions,
    })
}

pub const DEFAULT_IMBALANCE_WINDOW: usize = 10_000;
