//! Seeded time-tag stream generation: Poisson arrivals per arm, crosstalk
//! misrouting, skyglow and dark counts, non-paralyzable detector dead time,
//! Gaussian timing jitter, clock quantization, and an optional
//! scintillation mode that injects correlated same-color bursts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{ArngError, Result};
use crate::spectral::CrosstalkFractions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Blue = 0,
    Red = 1,
}

impl Channel {
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn from_u8(v: u8) -> Result<Channel> {
        match v {
            0 => Ok(Channel::Blue),
            1 => Ok(Channel::Red),
            other => Err(ArngError::Format(format!("bad channel byte {other}"))),
        }
    }
}

/// Ground-truth label for where a detection came from. Stripped on export.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Astronomical,
    Wrongway,
    Skyglow,
    Dark,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TagEvent {
    pub channel: Channel,
    pub tick: u64,
    pub origin: Origin,
}

/// Astronomical and background rates in Hz.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Rates {
    pub s_blue: f64,
    pub s_red: f64,
    #[serde(default)]
    pub skyglow_blue: f64,
    #[serde(default)]
    pub skyglow_red: f64,
    #[serde(default)]
    pub dark_blue: f64,
    #[serde(default)]
    pub dark_red: f64,
}

fn default_dead_time_ns() -> f64 {
    420.0
}
fn default_jitter_ps() -> f64 {
    300.0
}
fn default_clock_tick_ps() -> f64 {
    80.955
}

/// Detector timing constants. Defaults match the instrument this models:
/// 420 ns extended dead time, 300 ps APD jitter, 80.955 ps TDC clock.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DetectorTiming {
    #[serde(default = "default_dead_time_ns")]
    pub dead_time_ns: f64,
    #[serde(default = "default_jitter_ps")]
    pub jitter_sigma_ps: f64,
    #[serde(default = "default_clock_tick_ps")]
    pub clock_tick_ps: f64,
}

impl Default for DetectorTiming {
    fn default() -> Self {
        DetectorTiming {
            dead_time_ns: default_dead_time_ns(),
            jitter_sigma_ps: default_jitter_ps(),
            clock_tick_ps: default_clock_tick_ps(),
        }
    }
}

impl DetectorTiming {
    pub fn dead_time_s(&self) -> f64 {
        self.dead_time_ns * 1e-9
    }
    pub fn jitter_sigma_s(&self) -> f64 {
        self.jitter_sigma_ps * 1e-12
    }
    pub fn clock_tick_s(&self) -> f64 {
        self.clock_tick_ps * 1e-12
    }
    pub fn clock_tick_fs(&self) -> u64 {
        (self.clock_tick_ps * 1e3).round() as u64
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RunParams {
    pub duration_s: f64,
    pub seed: u64,
}

/// Millisecond-scale source-coupling modulation shared imperfectly between
/// the two arms.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScintillationConfig {
    pub modulation_depth: f64,
    pub correlation_time_ms: f64,
    pub arm_coupling_mismatch: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub rates: Rates,
    #[serde(default = "CrosstalkFractions::zero")]
    pub crosstalk: CrosstalkFractions,
    #[serde(default)]
    pub detector: DetectorTiming,
    pub run: RunParams,
    #[serde(default)]
    pub scintillation: Option<ScintillationConfig>,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let rate_fields = [
            ("rates.s_blue", self.rates.s_blue),
            ("rates.s_red", self.rates.s_red),
            ("rates.skyglow_blue", self.rates.skyglow_blue),
            ("rates.skyglow_red", self.rates.skyglow_red),
            ("rates.dark_blue", self.rates.dark_blue),
            ("rates.dark_red", self.rates.dark_red),
        ];
        for (name, v) in rate_fields {
            if v < 0.0 || !v.is_finite() {
                return Err(ArngError::config(name, "rate must be finite and >= 0"));
            }
        }
        if !(0.0..=1.0).contains(&self.crosstalk.f_b_to_r)
            || !(0.0..=1.0).contains(&self.crosstalk.f_r_to_b)
        {
            return Err(ArngError::config("crosstalk", "fractions must be in [0,1]"));
        }
        if self.detector.dead_time_ns < 0.0 {
            return Err(ArngError::config("detector.dead_time_ns", "must be >= 0"));
        }
        if self.detector.jitter_sigma_ps < 0.0 {
            return Err(ArngError::config("detector.jitter_sigma_ps", "must be >= 0"));
        }
        if self.detector.clock_tick_ps <= 0.0 {
            return Err(ArngError::config("detector.clock_tick_ps", "must be > 0"));
        }
        if self.run.duration_s <= 0.0 || !self.run.duration_s.is_finite() {
            return Err(ArngError::config("run.duration_s", "must be > 0"));
        }
        if let Some(sc) = &self.scintillation {
            if !(0.0..1.0).contains(&sc.modulation_depth) {
                return Err(ArngError::config(
                    "scintillation.modulation_depth",
                    "must be in [0, 1)",
                ));
            }
            if sc.correlation_time_ms <= 0.0 {
                return Err(ArngError::config(
                    "scintillation.correlation_time_ms",
                    "must be > 0",
                ));
            }
            if !(0.0..=1.0).contains(&sc.arm_coupling_mismatch) {
                return Err(ArngError::config(
                    "scintillation.arm_coupling_mismatch",
                    "must be in [0, 1]",
                ));
            }
        }
        Ok(())
    }
}

/// An ordered tag stream plus the config that produced it.
#[derive(Debug, Clone)]
pub struct TagStream {
    pub events: Vec<TagEvent>,
    pub clock_tick_fs: u64,
    pub config: Option<ScenarioConfig>,
}

impl TagStream {
    pub fn clock_tick_s(&self) -> f64 {
        self.clock_tick_fs as f64 * 1e-15
    }

    pub fn channel_count(&self, channel: Channel) -> usize {
        self.events.iter().filter(|e| e.channel == channel).count()
    }

    /// Counts of (channel, origin) pairs over the final stream.
    pub fn origin_counts(&self) -> std::collections::HashMap<(Channel, Origin), u64> {
        let mut map = std::collections::HashMap::new();
        for e in &self.events {
            *map.entry((e.channel, e.origin)).or_insert(0) += 1;
        }
        map
    }
}

/// Mean-one log-normal of an Ornstein-Uhlenbeck driver, sampled on a step
/// grid. The two arms see imperfectly correlated copies when the coupling
/// mismatch is nonzero.
pub struct ScintillationModulator {
    pub dt_s: f64,
    pub blue: Vec<f64>,
    pub red: Vec<f64>,
}

impl ScintillationModulator {
    pub fn sample(
        config: &ScintillationConfig,
        duration_s: f64,
        rng: &mut impl Rng,
    ) -> ScintillationModulator {
        let theta = config.correlation_time_ms * 1e-3;
        let dt = theta / 8.0;
        let n_steps = (duration_s / dt).ceil() as usize + 1;
        let depth = config.modulation_depth;
        // log-amplitude chosen so the multiplier's relative std grows with
        // depth and vanishes smoothly as depth -> 0
        let sigma2 = (-((1.0 - depth).ln())).max(0.0);
        let sigma = sigma2.sqrt();
        let mismatch = config.arm_coupling_mismatch;
        let (w_common, w_own) = ((1.0 - mismatch).sqrt(), mismatch.sqrt());

        let decay = (-dt / theta).exp();
        let innov = (sigma2 * (1.0 - decay * decay)).sqrt();
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut x_common = sigma * normal.sample(rng);
        let mut x_blue_own = sigma * normal.sample(rng);
        let mut x_red_own = sigma * normal.sample(rng);
        let mut blue = Vec::with_capacity(n_steps);
        let mut red = Vec::with_capacity(n_steps);
        for _ in 0..n_steps {
            let xb = w_common * x_common + w_own * x_blue_own;
            let xr = w_common * x_common + w_own * x_red_own;
            blue.push((xb - sigma2 / 2.0).exp());
            red.push((xr - sigma2 / 2.0).exp());
            x_common = x_common * decay + innov * normal.sample(rng);
            x_blue_own = x_blue_own * decay + innov * normal.sample(rng);
            x_red_own = x_red_own * decay + innov * normal.sample(rng);
        }
        ScintillationModulator {
            dt_s: dt,
            blue,
            red,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Component {
    channel: Channel,
    origin: Origin,
    rate_hz: f64,
    modulated: bool,
}

/// Generate a deterministic tag stream for the scenario. Component Poisson
/// processes are superposed, scintillation modulates the astronomical and
/// wrong-way components, then per-channel non-paralyzable dead time,
/// Gaussian jitter, and clock quantization are applied in that order.
pub fn simulate(config: &ScenarioConfig) -> Result<TagStream> {
    config.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(config.run.seed);
    let duration = config.run.duration_s;
    let f_br = config.crosstalk.f_b_to_r;
    let f_rb = config.crosstalk.f_r_to_b;
    let components = [
        Component {
            channel: Channel::Blue,
            origin: Origin::Astronomical,
            rate_hz: config.rates.s_blue * (1.0 - f_br),
            modulated: true,
        },
        Component {
            channel: Channel::Red,
            origin: Origin::Wrongway,
            rate_hz: config.rates.s_blue * f_br,
            modulated: true,
        },
        Component {
            channel: Channel::Red,
            origin: Origin::Astronomical,
            rate_hz: config.rates.s_red * (1.0 - f_rb),
            modulated: true,
        },
        Component {
            channel: Channel::Blue,
            origin: Origin::Wrongway,
            rate_hz: config.rates.s_red * f_rb,
            modulated: true,
        },
        Component {
            channel: Channel::Blue,
            origin: Origin::Skyglow,
            rate_hz: config.rates.skyglow_blue,
            modulated: false,
        },
        Component {
            channel: Channel::Red,
            origin: Origin::Skyglow,
            rate_hz: config.rates.skyglow_red,
            modulated: false,
        },
        Component {
            channel: Channel::Blue,
            origin: Origin::Dark,
            rate_hz: config.rates.dark_blue,
            modulated: false,
        },
        Component {
            channel: Channel::Red,
            origin: Origin::Dark,
            rate_hz: config.rates.dark_red,
            modulated: false,
        },
    ];

    let modulator = config
        .scintillation
        .as_ref()
        .map(|sc| ScintillationModulator::sample(sc, duration, &mut rng));

    // (time_s, channel, origin) before the detector stage
    let mut arrivals: Vec<(f64, Channel, Origin)> = Vec::new();
    for comp in components {
        if comp.rate_hz <= 0.0 {
            continue;
        }
        match (&modulator, comp.modulated) {
            (Some(m), true) => {
                let path = match comp.channel {
                    Channel::Blue => &m.blue,
                    Channel::Red => &m.red,
                };
                sample_modulated(
                    comp,
                    path,
                    m.dt_s,
                    duration,
                    &mut rng,
                    &mut arrivals,
                );
            }
            _ => sample_homogeneous(comp, duration, &mut rng, &mut arrivals),
        }
    }
    arrivals.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then(a.1.cmp(&b.1))
    });

    // non-paralyzable dead time per channel
    let dead = config.detector.dead_time_s();
    let mut last_kept = [f64::NEG_INFINITY; 2];
    let mut survivors: Vec<(f64, Channel, Origin)> = Vec::with_capacity(arrivals.len());
    for (t, ch, origin) in arrivals {
        let slot = ch as usize;
        if t >= last_kept[slot] + dead {
            last_kept[slot] = t;
            survivors.push((t, ch, origin));
        }
    }

    // timing jitter, then clock quantization
    let tick_s = config.detector.clock_tick_s();
    let jitter = config.detector.jitter_sigma_s();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut events: Vec<TagEvent> = survivors
        .into_iter()
        .map(|(t, channel, origin)| {
            let jittered = if jitter > 0.0 {
                t + jitter * normal.sample(&mut rng)
            } else {
                t
            };
            let tick = (jittered / tick_s).round().max(0.0) as u64;
            TagEvent {
                channel,
                tick,
                origin,
            }
        })
        .collect();
    events.sort_by_key(|e| (e.tick, e.channel.as_u8()));

    Ok(TagStream {
        events,
        clock_tick_fs: config.detector.clock_tick_fs(),
        config: Some(config.clone()),
    })
}

fn sample_homogeneous(
    comp: Component,
    duration: f64,
    rng: &mut impl Rng,
    out: &mut Vec<(f64, Channel, Origin)>,
) {
    let exp = Exp::new(comp.rate_hz).expect("positive rate");
    let mut t = 0.0;
    loop {
        t += exp.sample(rng);
        if t >= duration {
            break;
        }
        out.push((t, comp.channel, comp.origin));
    }
}

/// Piecewise-constant doubly-stochastic sampling: within each modulator
/// step, counts are Poisson at the modulated rate and times are uniform.
fn sample_modulated(
    comp: Component,
    path: &[f64],
    dt: f64,
    duration: f64,
    rng: &mut impl Rng,
    out: &mut Vec<(f64, Channel, Origin)>,
) {
    let mut t0 = 0.0;
    let mut step = 0;
    while t0 < duration {
        let t1 = (t0 + dt).min(duration);
        let mult = path[step.min(path.len() - 1)];
        let mean = comp.rate_hz * mult * (t1 - t0);
        if mean > 0.0 {
            let n = Poisson::new(mean).expect("positive mean").sample(rng) as usize;
            for _ in 0..n {
                let u: f64 = rng.random();
                out.push((t0 + u * (t1 - t0), comp.channel, comp.origin));
            }
        }
        t0 = t1;
        step += 1;
    }
}

/// Keep an event only if its tick exceeds the last kept event's tick plus
/// the window, regardless of channel. Greedy forward pass; idempotent.
pub fn cross_channel_deadtime_filter(stream: &TagStream, window_s: f64) -> TagStream {
    let tick_s = stream.clock_tick_s();
    let window_ticks = (window_s / tick_s).round() as u64;
    let mut kept = Vec::with_capacity(stream.events.len());
    let mut last: Option<u64> = None;
    for e in &stream.events {
        let ok = match last {
            None => true,
            Some(prev) => e.tick >= prev + window_ticks,
        };
        if ok {
            last = Some(e.tick);
            kept.push(*e);
        }
    }
    TagStream {
        events: kept,
        clock_tick_fs: stream.clock_tick_fs,
        config: stream.config.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_config() -> ScenarioConfig {
        ScenarioConfig {
            rates: Rates {
                s_blue: 0.0,
                s_red: 0.0,
                skyglow_blue: 0.0,
                skyglow_red: 0.0,
                dark_blue: 0.0,
                dark_red: 0.0,
            },
            crosstalk: CrosstalkFractions::zero(),
            detector: DetectorTiming::default(),
            run: RunParams {
                duration_s: 1.0,
                seed: 7,
            },
            scintillation: None,
        }
    }

    #[test]
    fn all_rates_zero_gives_empty_stream() {
        let stream = simulate(&base_config()).unwrap();
        assert!(stream.events.is_empty());
    }

    #[test]
    fn dark_counts_match_poisson_expectations() {
        let mut cfg = base_config();
        cfg.rates.dark_blue = 41.0;
        cfg.rates.dark_red = 93.0;
        cfg.run.duration_s = 500.0;
        let stream = simulate(&cfg).unwrap();
        let blue = stream.channel_count(Channel::Blue) as f64;
        let red = stream.channel_count(Channel::Red) as f64;
        assert!((blue - 20500.0).abs() < 4.0 * 20500.0_f64.sqrt(), "blue = {blue}");
        assert!((red - 46500.0).abs() < 4.0 * 46500.0_f64.sqrt(), "red = {red}");

        // binned 1 s Fano factor near 1
        let report = crate::mi::poisson_variance_check(&stream, 1.0).unwrap();
        for fano in [report.fano_blue.unwrap(), report.fano_red.unwrap()] {
            assert!((fano - 1.0).abs() < 0.2, "fano = {fano}");
        }
    }

    #[test]
    fn dead_time_suppresses_rate_nonparalyzable() {
        let mut cfg = base_config();
        cfg.rates.dark_blue = 1e6;
        cfg.run.duration_s = 2.0;
        cfg.detector.jitter_sigma_ps = 0.0;
        let stream = simulate(&cfg).unwrap();
        let observed = stream.events.len() as f64 / cfg.run.duration_s;
        let expected = 1e6 / (1.0 + 1e6 * 420e-9);
        assert!(
            (observed - expected).abs() / expected < 0.01,
            "observed {observed} vs {expected}"
        );
    }

    #[test]
    fn per_channel_gap_respects_dead_time_before_jitter() {
        let mut cfg = base_config();
        cfg.rates.dark_blue = 5e4;
        cfg.detector.jitter_sigma_ps = 0.0;
        cfg.run.duration_s = 1.0;
        let stream = simulate(&cfg).unwrap();
        let dead_ticks = (420e-9 / stream.clock_tick_s()).floor() as u64;
        let ticks: Vec<u64> = stream.events.iter().map(|e| e.tick).collect();
        for w in ticks.windows(2) {
            // quantization can shave at most one tick off the gap
            assert!(w[1] - w[0] + 1 >= dead_ticks, "gap {} ticks", w[1] - w[0]);
        }
    }

    #[test]
    fn determinism_bit_identical() {
        let mut cfg = base_config();
        cfg.rates.s_blue = 600.0;
        cfg.rates.s_red = 1700.0;
        cfg.rates.skyglow_blue = 20.0;
        cfg.rates.dark_blue = 41.0;
        cfg.crosstalk = CrosstalkFractions::new(0.002, 0.002).unwrap();
        cfg.scintillation = Some(ScintillationConfig {
            modulation_depth: 0.3,
            correlation_time_ms: 1.0,
            arm_coupling_mismatch: 0.4,
        });
        cfg.run.duration_s = 2.0;
        let a = simulate(&cfg).unwrap();
        let b = simulate(&cfg).unwrap();
        assert_eq!(a.events, b.events);
    }

    #[test]
    fn ticks_are_sorted() {
        let mut cfg = base_config();
        cfg.rates.s_blue = 2000.0;
        cfg.rates.s_red = 2000.0;
        cfg.run.duration_s = 5.0;
        let stream = simulate(&cfg).unwrap();
        assert!(stream.events.windows(2).all(|w| w[0].tick <= w[1].tick));
    }

    #[test]
    fn origin_fractions_match_configured_rates() {
        let mut cfg = base_config();
        cfg.rates.s_blue = 500.0;
        cfg.rates.s_red = 1500.0;
        cfg.rates.skyglow_blue = 20.0;
        cfg.rates.skyglow_red = 60.0;
        cfg.rates.dark_blue = 41.0;
        cfg.rates.dark_red = 93.0;
        cfg.crosstalk = CrosstalkFractions::new(0.002, 0.002).unwrap();
        cfg.run.duration_s = 100.0;
        let stream = simulate(&cfg).unwrap();
        let counts = stream.origin_counts();
        let get = |ch, origin| *counts.get(&(ch, origin)).unwrap_or(&0) as f64;

        for (ch, s_own, s_other, f_in, sky, dark) in [
            (Channel::Blue, 500.0, 1500.0, 0.002, 20.0, 41.0),
            (Channel::Red, 1500.0, 500.0, 0.002, 60.0, 93.0),
        ] {
            let astro_rate = s_own * (1.0 - 0.002) + s_other * f_in;
            let total_rate = astro_rate + sky + dark;
            let expected_frac = astro_rate / total_rate;
            let total = get(ch, Origin::Astronomical)
                + get(ch, Origin::Wrongway)
                + get(ch, Origin::Skyglow)
                + get(ch, Origin::Dark);
            let astro_frac =
                (get(ch, Origin::Astronomical) + get(ch, Origin::Wrongway)) / total;
            let sigma = (expected_frac * (1.0 - expected_frac) / total).sqrt();
            assert!(
                (astro_frac - expected_frac).abs() < 3.0 * sigma + 1e-3,
                "{ch:?}: {astro_frac} vs {expected_frac}"
            );
        }
    }

    #[test]
    fn empirical_q_matches_validity_formula() {
        use crate::validity::{self, ArmObservation, DetectorObservation};
        let mut cfg = base_config();
        cfg.rates.s_blue = 600.0;
        cfg.rates.s_red = 1700.0;
        cfg.rates.skyglow_blue = 20.0;
        cfg.rates.skyglow_red = 60.0;
        cfg.rates.dark_blue = 41.0;
        cfg.rates.dark_red = 93.0;
        cfg.crosstalk = CrosstalkFractions::new(0.002, 0.002).unwrap();
        cfg.run.duration_s = 200.0;
        let stream = simulate(&cfg).unwrap();
        let counts = stream.origin_counts();
        let get = |ch, origin| *counts.get(&(ch, origin)).unwrap_or(&0) as f64;

        // empirical per-arm corruption from ground-truth labels
        let mut p_emp = [0.0; 2];
        for (i, ch) in [Channel::Blue, Channel::Red].into_iter().enumerate() {
            let bad =
                get(ch, Origin::Wrongway) + get(ch, Origin::Skyglow) + get(ch, Origin::Dark);
            let total = bad + get(ch, Origin::Astronomical);
            p_emp[i] = bad / total;
        }
        let q_emp = 1.0 - p_emp[0].max(p_emp[1]);

        // analytic budget from the same configuration
        let (r_blue, r_red) = validity::mix_rates(600.0, 1700.0, 61.0, 153.0, cfg.crosstalk);
        let det = DetectorObservation {
            blue: ArmObservation::new(r_blue, 61.0).unwrap(),
            red: ArmObservation::new(r_red, 153.0).unwrap(),
            crosstalk: cfg.crosstalk,
        };
        let budget = validity::detector_budget(&det).unwrap();
        assert!(
            (q_emp - budget.q_detector).abs() < 0.01,
            "empirical {q_emp} vs analytic {}",
            budget.q_detector
        );
    }

    #[test]
    fn zero_depth_modulator_is_identity() {
        let sc = ScintillationConfig {
            modulation_depth: 0.0,
            correlation_time_ms: 1.0,
            arm_coupling_mismatch: 0.5,
        };
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let m = ScintillationModulator::sample(&sc, 0.1, &mut rng);
        assert!(m.blue.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!(m.red.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn modulator_is_mean_one() {
        let sc = ScintillationConfig {
            modulation_depth: 0.5,
            correlation_time_ms: 1.0,
            arm_coupling_mismatch: 0.5,
        };
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let m = ScintillationModulator::sample(&sc, 200.0, &mut rng);
        let mean = m.blue.iter().sum::<f64>() / m.blue.len() as f64;
        assert!((mean - 1.0).abs() < 0.1, "mean = {mean}");
    }

    #[test]
    fn modulator_variance_tracks_depth() {
        // lognormal multiplier: var = exp(sigma^2) - 1 with
        // sigma^2 = -ln(1 - depth), so depth 0.5 -> var 1
        let sc = ScintillationConfig {
            modulation_depth: 0.5,
            correlation_time_ms: 1.0,
            arm_coupling_mismatch: 1.0,
        };
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let m = ScintillationModulator::sample(&sc, 500.0, &mut rng);
        let n = m.red.len() as f64;
        let mean = m.red.iter().sum::<f64>() / n;
        let var = m.red.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!((var - 1.0).abs() < 0.3, "var = {var}");
    }

    #[test]
    fn cross_channel_filter_removes_close_pairs() {
        let mk = |ticks: &[(u64, Channel)]| TagStream {
            events: ticks
                .iter()
                .map(|&(tick, channel)| TagEvent {
                    channel,
                    tick,
                    origin: Origin::Astronomical,
                })
                .collect(),
            clock_tick_fs: 1_000_000, // 1 ns ticks for easy arithmetic
            config: None,
        };
        // 100 ns apart across channels, window 420 ns -> second removed
        let s = mk(&[(0, Channel::Blue), (100, Channel::Red)]);
        let filtered = cross_channel_deadtime_filter(&s, 420e-9);
        assert_eq!(filtered.events.len(), 1);

        // 1 us apart -> all kept
        let s = mk(&[(0, Channel::Blue), (1000, Channel::Red), (2000, Channel::Blue)]);
        let filtered = cross_channel_deadtime_filter(&s, 420e-9);
        assert_eq!(filtered.events.len(), 3);
    }

    #[test]
    fn cross_channel_filter_idempotent() {
        let mut cfg = base_config();
        cfg.rates.s_blue = 3000.0;
        cfg.rates.s_red = 3000.0;
        cfg.run.duration_s = 3.0;
        let stream = simulate(&cfg).unwrap();
        let once = cross_channel_deadtime_filter(&stream, 420e-9);
        let twice = cross_channel_deadtime_filter(&once, 420e-9);
        assert_eq!(once.events, twice.events);
        // all surviving gaps at least the window
        let window_ticks = (420e-9 / once.clock_tick_s()).round() as u64;
        for w in once.events.windows(2) {
            assert!(w[1].tick - w[0].tick >= window_ticks);
        }
    }

    #[test]
    fn config_validation_names_fields() {
        let mut cfg = base_config();
        cfg.rates.s_blue = -1.0;
        let err = simulate(&cfg).unwrap_err();
        assert!(err.to_string().contains("s_blue"), "{err}");
    }
}
