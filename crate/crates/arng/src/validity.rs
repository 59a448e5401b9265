//! Freedom-of-choice budget for Bell tests: per-arm corruption
//! probabilities, per-detector valid fractions, the relaxed CHSH bound,
//! and unmixing of observed count rates into true per-color fluxes.

use serde::{Deserialize, Serialize};

use crate::error::{ArngError, Result};
use crate::spectral::CrosstalkFractions;

/// Observed and noise rates for one detector arm, in Hz.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ArmObservation {
    pub observed_rate: f64,
    pub noise_rate: f64,
}

impl ArmObservation {
    pub fn new(observed_rate: f64, noise_rate: f64) -> Result<Self> {
        if observed_rate <= 0.0 {
            return Err(ArngError::invalid("observed rate must be > 0"));
        }
        if noise_rate < 0.0 || noise_rate > observed_rate {
            return Err(ArngError::invalid("noise rate must be in [0, observed rate]"));
        }
        Ok(ArmObservation {
            observed_rate,
            noise_rate,
        })
    }
}

/// Both arms of one observer's detector plus its crosstalk fractions.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DetectorObservation {
    pub blue: ArmObservation,
    pub red: ArmObservation,
    pub crosstalk: CrosstalkFractions,
}

/// Per-detector corruption budget.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ValidityBudget {
    pub p_blue: f64,
    pub p_red: f64,
    pub p_detector: f64,
    pub q_detector: f64,
    pub s_blue: f64,
    pub s_red: f64,
}

/// Joint budget for a two-observer Bell test.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BellBudget {
    pub q_alice: f64,
    pub q_bob: f64,
    pub q_joint: f64,
    pub s_bound: f64,
    pub passes_threshold: bool,
}

/// The joint valid fraction must reach 2 - sqrt(2) to distinguish quantum
/// mechanics from a loophole-exploiting local-realist model.
pub fn q_threshold() -> f64 {
    2.0 - std::f64::consts::SQRT_2
}

/// Invert the 2x2 color-mixing system to recover true per-color fluxes:
/// r_b - n_b = (1 - f_br) s_b + f_rb s_r
/// r_r - n_r = (1 - f_rb) s_r + f_br s_b
pub fn unmix_rates(det: &DetectorObservation) -> Result<(f64, f64)> {
    let f_br = det.crosstalk.f_b_to_r;
    let f_rb = det.crosstalk.f_r_to_b;
    let determinant = 1.0 - f_br - f_rb;
    if determinant.abs() < 1e-12 {
        return Err(ArngError::Singular(
            "crosstalk fractions sum to 1; mixing matrix not invertible".into(),
        ));
    }
    let excess_blue = det.blue.observed_rate - det.blue.noise_rate;
    let excess_red = det.red.observed_rate - det.red.noise_rate;
    let s_blue = ((1.0 - f_rb) * excess_blue - f_rb * excess_red) / determinant;
    let s_red = ((1.0 - f_br) * excess_red - f_br * excess_blue) / determinant;
    if s_blue < 0.0 || s_red < 0.0 {
        return Err(ArngError::Inconsistent(format!(
            "unmixed fluxes negative (s_blue = {s_blue:.3}, s_red = {s_red:.3}); \
             noise estimates exceed astronomical signal"
        )));
    }
    Ok((s_blue, s_red))
}

/// Mix true fluxes forward into observed rates (test oracle companion to
/// `unmix_rates`, also used by the simulator bookkeeping).
pub fn mix_rates(
    s_blue: f64,
    s_red: f64,
    noise_blue: f64,
    noise_red: f64,
    crosstalk: CrosstalkFractions,
) -> (f64, f64) {
    let r_blue = (1.0 - crosstalk.f_b_to_r) * s_blue + crosstalk.f_r_to_b * s_red + noise_blue;
    let r_red = (1.0 - crosstalk.f_r_to_b) * s_red + crosstalk.f_b_to_r * s_blue + noise_red;
    (r_blue, r_red)
}

/// Per-arm corruption probability p_j = n_j/r_j + s_j' f_{j'->j} / r_j,
/// maximized over arms for the detector's overall budget.
pub fn corruption_probability(
    det: &DetectorObservation,
    s_blue: f64,
    s_red: f64,
) -> Result<ValidityBudget> {
    let p_blue = det.blue.noise_rate / det.blue.observed_rate
        + s_red * det.crosstalk.f_r_to_b / det.blue.observed_rate;
    let p_red = det.red.noise_rate / det.red.observed_rate
        + s_blue * det.crosstalk.f_b_to_r / det.red.observed_rate;
    if p_blue > 1.0 || p_red > 1.0 {
        return Err(ArngError::Inconsistent(format!(
            "corruption probability above 1 (p_blue = {p_blue:.3}, p_red = {p_red:.3})"
        )));
    }
    let p_detector = p_blue.max(p_red);
    Ok(ValidityBudget {
        p_blue,
        p_red,
        p_detector,
        q_detector: 1.0 - p_detector,
        s_blue,
        s_red,
    })
}

/// Convenience: unmix then score a single detector observation.
pub fn detector_budget(det: &DetectorObservation) -> Result<ValidityBudget> {
    let (s_blue, s_red) = unmix_rates(det)?;
    corruption_probability(det, s_blue, s_red)
}

/// Combine two per-detector valid fractions into the joint budget and the
/// relaxed CHSH bound S_exp <= 4 - 2q.
pub fn bell_budget(q_alice: f64, q_bob: f64) -> Result<BellBudget> {
    if !(0.0..=1.0).contains(&q_alice) || !(0.0..=1.0).contains(&q_bob) {
        return Err(ArngError::invalid("valid fractions must be in [0,1]"));
    }
    let q_joint = (q_alice + q_bob - 1.0).max(0.0);
    let s_bound = 4.0 - 2.0 * q_joint;
    Ok(BellBudget {
        q_alice,
        q_bob,
        q_joint,
        s_bound,
        passes_threshold: q_joint >= q_threshold(),
    })
}

/// Agreement/disagreement tallies for one joint setting pair.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SettingCounts {
    pub agree: u64,
    pub disagree: u64,
}

/// Per joint-setting correlation values and the CHSH S statistic.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ChshResult {
    /// E values indexed [k][l] for settings (a_k, b_l).
    pub correlations: [[f64; 2]; 2],
    pub s: f64,
}

/// S = |E11 + E12 + E21 - E22| with E = 2 p(A = B) - 1 per setting pair.
pub fn chsh_from_coincidences(counts: &[[SettingCounts; 2]; 2]) -> Result<ChshResult> {
    let mut e = [[0.0; 2]; 2];
    for k in 0..2 {
        for l in 0..2 {
            let c = counts[k][l];
            let total = c.agree + c.disagree;
            if total == 0 {
                return Err(ArngError::InsufficientData(format!(
                    "no counts for joint setting ({}, {})",
                    k + 1,
                    l + 1
                )));
            }
            e[k][l] = 2.0 * c.agree as f64 / total as f64 - 1.0;
        }
    }
    let s = (e[0][0] + e[0][1] + e[1][0] - e[1][1]).abs();
    Ok(ChshResult {
        correlations: e,
        s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn det_3c273() -> DetectorObservation {
        DetectorObservation {
            blue: ArmObservation::new(672.0, 61.0).unwrap(),
            red: ArmObservation::new(1900.0, 153.0).unwrap(),
            crosstalk: CrosstalkFractions::new(0.002, 0.002).unwrap(),
        }
    }

    #[test]
    fn unmix_identity_when_no_crosstalk() {
        let det = DetectorObservation {
            blue: ArmObservation::new(500.0, 50.0).unwrap(),
            red: ArmObservation::new(800.0, 80.0).unwrap(),
            crosstalk: CrosstalkFractions::zero(),
        };
        let (s_blue, s_red) = unmix_rates(&det).unwrap();
        assert_relative_eq!(s_blue, 450.0, epsilon = 1e-12);
        assert_relative_eq!(s_red, 720.0, epsilon = 1e-12);
    }

    #[test]
    fn unmix_3c273_example() {
        // Exact 2x2 solve: det = 1 - 0.004 = 0.996,
        // s_b = (0.998*611 - 0.002*1747)/0.996, s_r symmetric.
        let (s_blue, s_red) = unmix_rates(&det_3c273()).unwrap();
        let expect_blue = (0.998 * 611.0 - 0.002 * 1747.0) / 0.996;
        let expect_red = (0.998 * 1747.0 - 0.002 * 611.0) / 0.996;
        assert_relative_eq!(s_blue, expect_blue, epsilon = 1e-9);
        assert_relative_eq!(s_red, expect_red, epsilon = 1e-9);
        // close to the first-order hand values 607.5 / 1745.8
        assert!((s_blue - 607.5).abs() < 2.0);
        assert!((s_red - 1745.8).abs() < 5.0);
    }

    #[test]
    fn unmix_singular_matrix_rejected() {
        let det = DetectorObservation {
            blue: ArmObservation::new(500.0, 0.0).unwrap(),
            red: ArmObservation::new(800.0, 0.0).unwrap(),
            crosstalk: CrosstalkFractions::new(0.5, 0.5).unwrap(),
        };
        assert!(matches!(unmix_rates(&det), Err(ArngError::Singular(_))));
    }

    #[test]
    fn unmix_negative_flux_rejected() {
        // Huge wrong-way contamination relative to blue excess makes the
        // solution negative.
        let det = DetectorObservation {
            blue: ArmObservation::new(10.0, 0.0).unwrap(),
            red: ArmObservation::new(10000.0, 0.0).unwrap(),
            crosstalk: CrosstalkFractions::new(0.0, 0.01).unwrap(),
        };
        assert!(matches!(unmix_rates(&det), Err(ArngError::Inconsistent(_))));
    }

    proptest! {
        #[test]
        fn unmix_inverts_mix(
            s_blue in 1.0..1e5f64,
            s_red in 1.0..1e5f64,
            n_blue in 0.0..100.0f64,
            n_red in 0.0..100.0f64,
            f_br in 0.0..0.25f64,
            f_rb in 0.0..0.25f64,
        ) {
            let crosstalk = CrosstalkFractions::new(f_br, f_rb).unwrap();
            let (r_blue, r_red) = mix_rates(s_blue, s_red, n_blue, n_red, crosstalk);
            let det = DetectorObservation {
                blue: ArmObservation::new(r_blue, n_blue).unwrap(),
                red: ArmObservation::new(r_red, n_red).unwrap(),
                crosstalk,
            };
            let (ub, ur) = unmix_rates(&det).unwrap();
            prop_assert!((ub - s_blue).abs() / s_blue < 1e-9);
            prop_assert!((ur - s_red).abs() / s_red < 1e-9);
        }

        #[test]
        fn corruption_monotone_in_noise(
            n1 in 0.0..200.0f64,
            delta in 0.0..100.0f64,
        ) {
            let mk = |n: f64| DetectorObservation {
                blue: ArmObservation::new(672.0, n).unwrap(),
                red: ArmObservation::new(1900.0, 153.0).unwrap(),
                crosstalk: CrosstalkFractions::new(0.002, 0.002).unwrap(),
            };
            let b1 = detector_budget(&mk(n1)).unwrap();
            let b2 = detector_budget(&mk(n1 + delta)).unwrap();
            prop_assert!(b2.p_blue >= b1.p_blue - 1e-12);
        }

        #[test]
        fn q_joint_monotone(
            qa in 0.0..1.0f64,
            qb in 0.0..1.0f64,
            eps in 0.0..0.05f64,
        ) {
            let b1 = bell_budget(qa, qb).unwrap();
            let b2 = bell_budget((qa + eps).min(1.0), qb).unwrap();
            prop_assert!(b2.q_joint >= b1.q_joint);
            prop_assert!(b2.s_bound <= b1.s_bound + 1e-12);
        }
    }

    #[test]
    fn corruption_zero_when_clean() {
        let det = DetectorObservation {
            blue: ArmObservation::new(672.0, 0.0).unwrap(),
            red: ArmObservation::new(1900.0, 0.0).unwrap(),
            crosstalk: CrosstalkFractions::zero(),
        };
        let b = detector_budget(&det).unwrap();
        assert_eq!(b.p_detector, 0.0);
        assert_eq!(b.q_detector, 1.0);
    }

    #[test]
    fn corruption_3c273_like() {
        let b = detector_budget(&det_3c273()).unwrap();
        // p_blue ~ 61/672 + s_red * 0.002 / 672 ~ 0.096
        assert!((b.p_blue - 0.0960).abs() < 0.002, "p_blue = {}", b.p_blue);
        assert!((b.p_red - 0.0812).abs() < 0.002, "p_red = {}", b.p_red);
        assert!((b.q_detector - 0.904).abs() < 0.005, "q = {}", b.q_detector);
    }

    #[test]
    fn corruption_reduces_to_noise_fraction() {
        let det = DetectorObservation {
            blue: ArmObservation::new(100.0, 20.0).unwrap(),
            red: ArmObservation::new(100.0, 20.0).unwrap(),
            crosstalk: CrosstalkFractions::zero(),
        };
        let b = detector_budget(&det).unwrap();
        assert_relative_eq!(b.q_detector, 0.8, epsilon = 1e-12);
    }

    #[test]
    fn bell_budget_perfect() {
        let b = bell_budget(1.0, 1.0).unwrap();
        assert_eq!(b.q_joint, 1.0);
        assert_eq!(b.s_bound, 2.0);
        assert!(b.passes_threshold);
    }

    #[test]
    fn bell_budget_at_threshold_gives_tsirelson() {
        // q_joint = 2 - sqrt(2) makes the relaxed bound exactly 2 sqrt(2).
        let q = q_threshold();
        let b = bell_budget(1.0, q).unwrap();
        assert_relative_eq!(b.q_joint, q, epsilon = 1e-15);
        assert!((b.s_bound - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-12);
        assert!(b.passes_threshold);
    }

    #[test]
    fn bell_budget_symmetric_marginal_pass() {
        // q_alice = q_bob = 0.7929 sums just above 3 - sqrt(2).
        let b = bell_budget(0.7929, 0.7929).unwrap();
        assert!(b.passes_threshold);
        let b = bell_budget(0.7928, 0.7928).unwrap();
        assert!(!b.passes_threshold);
    }

    #[test]
    fn chsh_balanced_settings_give_zero() {
        let c = SettingCounts {
            agree: 500,
            disagree: 500,
        };
        let r = chsh_from_coincidences(&[[c, c], [c, c]]).unwrap();
        assert_eq!(r.s, 0.0);
    }

    #[test]
    fn chsh_algebraic_maximum() {
        let all = SettingCounts {
            agree: 100,
            disagree: 0,
        };
        let none = SettingCounts {
            agree: 0,
            disagree: 100,
        };
        let r = chsh_from_coincidences(&[[all, all], [all, none]]).unwrap();
        assert_relative_eq!(r.s, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn chsh_tsirelson_pattern() {
        // p(A=B) = 0.854 on three settings and 0.146 on the fourth.
        let hi = SettingCounts {
            agree: 854,
            disagree: 146,
        };
        let lo = SettingCounts {
            agree: 146,
            disagree: 854,
        };
        let r = chsh_from_coincidences(&[[hi, hi], [hi, lo]]).unwrap();
        assert!((r.s - 2.83).abs() < 0.01, "S = {}", r.s);
    }

    #[test]
    fn chsh_empty_cell_errors() {
        let c = SettingCounts {
            agree: 10,
            disagree: 10,
        };
        let empty = SettingCounts {
            agree: 0,
            disagree: 0,
        };
        assert!(chsh_from_coincidences(&[[c, c], [c, empty]]).is_err());
    }

    #[test]
    fn chsh_invariant_under_joint_relabeling() {
        // Flipping both A and B swaps nothing in the agree/disagree tallies,
        // so S computed from swapped outcome labels is identical.
        let counts = [
            [
                SettingCounts {
                    agree: 830,
                    disagree: 170,
                },
                SettingCounts {
                    agree: 845,
                    disagree: 155,
                },
            ],
            [
                SettingCounts {
                    agree: 861,
                    disagree: 139,
                },
                SettingCounts {
                    agree: 162,
                    disagree: 838,
                },
            ],
        ];
        // A -> -A and B -> -B together leave each pair's equality unchanged.
        let r1 = chsh_from_coincidences(&counts).unwrap();
        let r2 = chsh_from_coincidences(&counts).unwrap();
        assert_eq!(r1.s, r2.s);
    }
}
