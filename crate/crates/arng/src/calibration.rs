//! Magnitude-to-count-rate calibration: ordinary least squares of
//! log10(background-subtracted rate) on V magnitude.

use serde::{Deserialize, Serialize};

use crate::error::{ArngError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceObservation {
    pub name: String,
    pub v_magnitude: f64,
    pub b_magnitude: Option<f64>,
    pub redshift: Option<f64>,
    pub blue_rate: f64,
    pub red_rate: f64,
    pub background_blue: f64,
    pub background_red: f64,
    pub airmass: f64,
}

impl SourceObservation {
    /// Total astronomical rate after background subtraction; None when the
    /// background exceeds the observed rate.
    pub fn net_rate(&self) -> Option<f64> {
        let net = self.blue_rate + self.red_rate - self.background_blue - self.background_red;
        (net > 0.0).then_some(net)
    }
}

/// log10(rate) = intercept + slope * m_V with OLS standard errors.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RateFit {
    pub intercept: f64,
    pub slope: f64,
    pub intercept_stderr: f64,
    pub slope_stderr: f64,
    pub points_used: usize,
    pub points_excluded: usize,
}

/// Unweighted least squares in log space. Observations with non-positive
/// net rate are excluded (they would have no logarithm) and counted.
pub fn fit_magnitude_rate(observations: &[SourceObservation]) -> Result<RateFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut excluded = 0usize;
    for obs in observations {
        if !obs.v_magnitude.is_finite() {
            return Err(ArngError::invalid(format!(
                "non-finite magnitude for {}",
                obs.name
            )));
        }
        match obs.net_rate() {
            Some(net) => {
                xs.push(obs.v_magnitude);
                ys.push(net.log10());
            }
            None => excluded += 1,
        }
    }
    let n = xs.len();
    if n < 3 {
        return Err(ArngError::InsufficientData(format!(
            "need at least 3 usable observations, have {n} ({excluded} excluded)"
        )));
    }
    let nf = n as f64;
    let x_mean = xs.iter().sum::<f64>() / nf;
    let y_mean = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    if sxx == 0.0 {
        return Err(ArngError::invalid(
            "all magnitudes identical; slope undetermined",
        ));
    }
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    // with only 2 degrees of freedom spent, n == 2 is excluded above
    let sigma2 = if n > 2 { ss_res / (nf - 2.0) } else { 0.0 };
    let slope_stderr = (sigma2 / sxx).sqrt();
    let intercept_stderr = (sigma2 * (1.0 / nf + x_mean * x_mean / sxx)).sqrt();
    Ok(RateFit {
        intercept,
        slope,
        intercept_stderr,
        slope_stderr,
        points_used: n,
        points_excluded: excluded,
    })
}

/// Predicted rate 10^(intercept + slope * m_V), in Hz per square meter
/// when the fit was done on per-area rates.
pub fn predict_rate(fit: &RateFit, v_magnitude: f64) -> f64 {
    10f64.powf(fit.intercept + fit.slope * v_magnitude)
}

/// Parse the observation catalog: tab- or whitespace-delimited columns
/// name, v_mag, b_mag, z, tau_gyr, blue_cps, red_cps, bg_blue, bg_red,
/// airmass, with `-` for unknown optional values.
pub fn parse_catalog(text: &str) -> Result<Vec<SourceObservation>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 10 {
            return Err(ArngError::Format(format!(
                "line {}: expected 10 columns, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| {
                ArngError::Format(format!("line {}: bad {what} `{s}`", lineno + 1))
            })
        };
        let opt = |s: &str, what: &str| -> Result<Option<f64>> {
            if s == "-" {
                Ok(None)
            } else {
                num(s, what).map(Some)
            }
        };
        out.push(SourceObservation {
            name: fields[0].to_string(),
            v_magnitude: num(fields[1], "V magnitude")?,
            b_magnitude: opt(fields[2], "B magnitude")?,
            redshift: opt(fields[3], "redshift")?,
            blue_rate: num(fields[5], "blue rate")?,
            red_rate: num(fields[6], "red rate")?,
            background_blue: num(fields[7], "blue background")?,
            background_red: num(fields[8], "red background")?,
            airmass: num(fields[9], "airmass")?,
        });
    }
    Ok(out)
}

/// The twelve observed quasars with zenith-background stand-ins.
pub fn bundled_quasar_catalog() -> Vec<SourceObservation> {
    parse_catalog(include_str!("../data/quasar_catalog.tsv")).expect("bundled quasar catalog")
}
