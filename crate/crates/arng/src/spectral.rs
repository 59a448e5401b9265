//! Source spectra, atmosphere, and instrument response curves, plus the
//! wrong-way crosstalk fractions and expected per-arm count rates derived
//! from them.

use serde::Serialize;

use crate::error::{ArngError, Result};
use crate::table;

/// Planck constant times speed of light, in nm * K units used below.
const WIEN_B_NM_K: f64 = 2.897_771_955e6;
/// hc/k in nm*K, for the Planck exponent hc/(lambda k T).
const HC_OVER_K_NM_K: f64 = 1.438_776_877e7;

/// Strictly increasing wavelength samples in nanometers.
#[derive(Debug, Clone, PartialEq)]
pub struct WavelengthGrid {
    wavelengths: Vec<f64>,
}

impl WavelengthGrid {
    pub fn new(wavelengths: Vec<f64>) -> Result<Self> {
        if wavelengths.len() < 2 {
            return Err(ArngError::invalid("wavelength grid needs at least 2 points"));
        }
        if wavelengths[0] <= 0.0 {
            return Err(ArngError::invalid("wavelengths must be positive"));
        }
        if wavelengths.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ArngError::invalid("wavelengths must be strictly increasing"));
        }
        Ok(WavelengthGrid { wavelengths })
    }

    /// Uniform grid over [lo, hi] with the given step (hi is included when
    /// it falls on the step lattice).
    pub fn uniform(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if step <= 0.0 || hi <= lo {
            return Err(ArngError::invalid("bad uniform grid bounds"));
        }
        let n = ((hi - lo) / step).round() as usize + 1;
        Self::new((0..n).map(|i| lo + i as f64 * step).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn len(&self) -> usize {
        self.wavelengths.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min(&self) -> f64 {
        self.wavelengths[0]
    }

    pub fn max(&self) -> f64 {
        *self.wavelengths.last().unwrap()
    }

    /// Scale every wavelength by a positive factor (used for redshifting).
    pub fn scaled(&self, factor: f64) -> WavelengthGrid {
        WavelengthGrid {
            wavelengths: self.wavelengths.iter().map(|w| w * factor).collect(),
        }
    }
}

/// Photon number per wavelength per unit time, arbitrary normalization.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub grid: WavelengthGrid,
    pub density: Vec<f64>,
}

impl Spectrum {
    pub fn new(grid: WavelengthGrid, density: Vec<f64>) -> Result<Self> {
        if density.len() != grid.len() {
            return Err(ArngError::GridMismatch(format!(
                "density has {} values for a {}-point grid",
                density.len(),
                grid.len()
            )));
        }
        if density.iter().any(|&d| d < 0.0 || !d.is_finite()) {
            return Err(ArngError::invalid("density values must be finite and >= 0"));
        }
        Ok(Spectrum { grid, density })
    }

    pub fn from_table(text: &str) -> Result<Self> {
        let (xs, ys) = table::parse_two_column(text)?;
        Spectrum::new(WavelengthGrid::new(xs)?, ys)
    }

    /// Linear interpolation of the density at a wavelength; zero outside the
    /// tabulated range.
    pub fn density_at(&self, lambda: f64) -> f64 {
        interp_or_zero(self.grid.as_slice(), &self.density, lambda)
    }

    /// Re-tabulate onto another grid by linear interpolation (zero outside
    /// the source range).
    pub fn resample_onto(&self, grid: &WavelengthGrid) -> Spectrum {
        let density = grid
            .as_slice()
            .iter()
            .map(|&w| self.density_at(w))
            .collect();
        Spectrum {
            grid: grid.clone(),
            density,
        }
    }

    /// Total photon flux by trapezoidal quadrature (arbitrary units).
    pub fn total(&self) -> f64 {
        trapezoid(self.grid.as_slice(), &self.density)
    }
}

/// Zenith transmission and Rayleigh optical depth tabulated on a grid.
#[derive(Debug, Clone)]
pub struct AtmosphereModel {
    pub grid: WavelengthGrid,
    pub zenith_transmission: Vec<f64>,
    pub rayleigh_optical_depth: Vec<f64>,
}

impl AtmosphereModel {
    pub fn new(
        grid: WavelengthGrid,
        zenith_transmission: Vec<f64>,
        rayleigh_optical_depth: Vec<f64>,
    ) -> Result<Self> {
        if zenith_transmission.len() != grid.len() || rayleigh_optical_depth.len() != grid.len() {
            return Err(ArngError::GridMismatch(
                "atmosphere curves must match grid length".into(),
            ));
        }
        if zenith_transmission
            .iter()
            .any(|&t| !(0.0..=1.0).contains(&t))
        {
            return Err(ArngError::invalid("zenith transmission must be in [0,1]"));
        }
        if rayleigh_optical_depth.iter().any(|&t| t < 0.0) {
            return Err(ArngError::invalid("optical depth must be >= 0"));
        }
        Ok(AtmosphereModel {
            grid,
            zenith_transmission,
            rayleigh_optical_depth,
        })
    }

    /// Analytic Rayleigh optical depth tau0 * (lambda0/lambda)^4.
    pub fn rayleigh_tau(lambda_nm: f64, tau0: f64, lambda0_nm: f64) -> f64 {
        tau0 * (lambda0_nm / lambda_nm).powi(4)
    }

    /// Bundled stand-in: coarse tabulated zenith transmission with
    /// absorption notches plus tau(lambda) = 0.1 * (550/lambda)^4.
    pub fn bundled_default() -> AtmosphereModel {
        let text = include_str!("../data/atmosphere_zenith.tsv");
        let (xs, ys) = table::parse_two_column(text).expect("bundled atmosphere table");
        let tau = xs
            .iter()
            .map(|&w| Self::rayleigh_tau(w, 0.1, 550.0))
            .collect();
        let grid = WavelengthGrid::new(xs).expect("bundled atmosphere grid");
        AtmosphereModel::new(grid, ys, tau).expect("bundled atmosphere model")
    }

    /// Resample both curves onto another grid (edge-clamped, since a
    /// transmission of zero outside the table would be unphysical).
    pub fn resample_onto(&self, grid: &WavelengthGrid) -> AtmosphereModel {
        let trans = grid
            .as_slice()
            .iter()
            .map(|&w| interp_clamped(self.grid.as_slice(), &self.zenith_transmission, w))
            .collect();
        let tau = grid
            .as_slice()
            .iter()
            .map(|&w| interp_clamped(self.grid.as_slice(), &self.rayleigh_optical_depth, w))
            .collect();
        AtmosphereModel {
            grid: grid.clone(),
            zenith_transmission: trans,
            rayleigh_optical_depth: tau,
        }
    }
}

/// Logistic model for a dichroic beamsplitter transmission curve.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DichroicModel {
    pub center_nm: f64,
    pub width_nm: f64,
    pub leakage: f64,
}

impl DichroicModel {
    /// Transmission of a short-pass dichroic: high below the cut wavelength.
    pub fn shortpass_transmission(&self, lambda: f64) -> f64 {
        self.leakage
            + (1.0 - 2.0 * self.leakage) / (1.0 + ((lambda - self.center_nm) / self.width_nm).exp())
    }

    /// Transmission of a long-pass dichroic: high above the cut wavelength.
    pub fn longpass_transmission(&self, lambda: f64) -> f64 {
        self.leakage
            + (1.0 - 2.0 * self.leakage)
                / (1.0 + (-(lambda - self.center_nm) / self.width_nm).exp())
    }
}

/// Wavelength-dependent response of the two instrument arms.
#[derive(Debug, Clone)]
pub struct InstrumentResponse {
    pub grid: WavelengthGrid,
    pub lens_transmission: Vec<f64>,
    pub detector_efficiency: Vec<f64>,
    pub blue_path_probability: Vec<f64>,
    pub red_path_probability: Vec<f64>,
    /// Color cutoff lambda-prime in nm.
    pub cutoff_nm: f64,
}

impl InstrumentResponse {
    pub fn new(
        grid: WavelengthGrid,
        lens_transmission: Vec<f64>,
        detector_efficiency: Vec<f64>,
        blue_path_probability: Vec<f64>,
        red_path_probability: Vec<f64>,
        cutoff_nm: f64,
    ) -> Result<Self> {
        let n = grid.len();
        for (name, v) in [
            ("lens_transmission", &lens_transmission),
            ("detector_efficiency", &detector_efficiency),
            ("blue_path_probability", &blue_path_probability),
            ("red_path_probability", &red_path_probability),
        ] {
            if v.len() != n {
                return Err(ArngError::GridMismatch(format!(
                    "{name} must match grid length"
                )));
            }
            if v.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                return Err(ArngError::invalid(format!("{name} must be in [0,1]")));
            }
        }
        for i in 0..n {
            if blue_path_probability[i] + red_path_probability[i] > 1.0 + 1e-12 {
                return Err(ArngError::invalid(format!(
                    "R + B > 1 at {} nm",
                    grid.as_slice()[i]
                )));
            }
        }
        if cutoff_nm < grid.min() || cutoff_nm > grid.max() {
            return Err(ArngError::invalid("cutoff must lie within the grid range"));
        }
        Ok(InstrumentResponse {
            grid,
            lens_transmission,
            detector_efficiency,
            blue_path_probability,
            red_path_probability,
            cutoff_nm,
        })
    }

    /// Bundled defaults: logistic short-pass (697 nm) and long-pass (705 nm)
    /// dichroics composed short-pass first, with the bundled lens and
    /// detector curves and a 700 nm color cutoff.
    pub fn bundled_default(grid: &WavelengthGrid) -> InstrumentResponse {
        let shortpass = DichroicModel {
            center_nm: 697.0,
            width_nm: 5.0,
            leakage: 1e-3,
        };
        let longpass = DichroicModel {
            center_nm: 705.0,
            width_nm: 5.0,
            leakage: 1e-3,
        };
        Self::with_dichroics(grid, shortpass, longpass, 700.0)
    }

    /// Compose path probabilities from the two-dichroic model: blue is the
    /// light transmitted by the short-pass; red is reflected by the
    /// short-pass and then transmitted by the long-pass.
    pub fn with_dichroics(
        grid: &WavelengthGrid,
        shortpass: DichroicModel,
        longpass: DichroicModel,
        cutoff_nm: f64,
    ) -> InstrumentResponse {
        let (lens_x, lens_y) =
            table::parse_two_column(include_str!("../data/lens_transmission.tsv"))
                .expect("bundled lens table");
        let (det_x, det_y) = table::parse_two_column(include_str!("../data/detector_qe.tsv"))
            .expect("bundled detector table");
        let lens = grid
            .as_slice()
            .iter()
            .map(|&w| interp_clamped(&lens_x, &lens_y, w))
            .collect();
        let det = grid
            .as_slice()
            .iter()
            .map(|&w| interp_clamped(&det_x, &det_y, w))
            .collect();
        let blue: Vec<f64> = grid
            .as_slice()
            .iter()
            .map(|&w| shortpass.shortpass_transmission(w))
            .collect();
        let red: Vec<f64> = grid
            .as_slice()
            .iter()
            .map(|&w| {
                (1.0 - shortpass.shortpass_transmission(w)) * longpass.longpass_transmission(w)
            })
            .collect();
        InstrumentResponse::new(grid.clone(), lens, det, blue, red, cutoff_nm)
            .expect("bundled instrument response")
    }
}

/// Wrong-way routing probabilities through the dichroic stack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct CrosstalkFractions {
    pub f_b_to_r: f64,
    pub f_r_to_b: f64,
}

impl CrosstalkFractions {
    pub fn new(f_b_to_r: f64, f_r_to_b: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&f_b_to_r) || !(0.0..=1.0).contains(&f_r_to_b) {
            return Err(ArngError::invalid("crosstalk fractions must be in [0,1]"));
        }
        Ok(CrosstalkFractions { f_b_to_r, f_r_to_b })
    }

    pub fn zero() -> Self {
        CrosstalkFractions {
            f_b_to_r: 0.0,
            f_r_to_b: 0.0,
        }
    }
}

/// Planck photon-count spectral density on the grid, peak scaled to 1.
pub fn blackbody_spectrum(temperature_k: f64, grid: &WavelengthGrid) -> Result<Spectrum> {
    if temperature_k <= 0.0 || !temperature_k.is_finite() {
        return Err(ArngError::invalid("temperature must be positive"));
    }
    // Photon-count radiance: energy radiance (~ lambda^-5 / (exp - 1))
    // divided by photon energy hc/lambda, so ~ lambda^-4 / (exp - 1).
    let mut density: Vec<f64> = grid
        .as_slice()
        .iter()
        .map(|&lambda| {
            let x = HC_OVER_K_NM_K / (lambda * temperature_k);
            // exp_m1 for numerical stability at long wavelengths
            lambda.powi(-4) / x.exp_m1()
        })
        .collect();
    let peak = density.iter().cloned().fold(0.0_f64, f64::max);
    if peak > 0.0 {
        for d in &mut density {
            *d /= peak;
        }
    }
    Spectrum::new(grid.clone(), density)
}

/// Wien displacement wavelength (nm) of the energy-density peak.
pub fn wien_peak_nm(temperature_k: f64) -> f64 {
    WIEN_B_NM_K / temperature_k
}

/// Shift every rest wavelength to lambda * (1 + z). The output grid is the
/// scaled input grid, so features are preserved exactly and in order.
pub fn redshift_spectrum(s: &Spectrum, z: f64) -> Result<Spectrum> {
    if z < 0.0 || !z.is_finite() {
        return Err(ArngError::invalid("redshift must be >= 0"));
    }
    Ok(Spectrum {
        grid: s.grid.scaled(1.0 + z),
        density: s.density.clone(),
    })
}

/// N_in = rho_atm(lambda) * exp(-X * tau(lambda)) * N_source, pointwise.
pub fn attenuate(s: &Spectrum, atm: &AtmosphereModel, airmass: f64) -> Result<Spectrum> {
    if airmass < 0.0 || !airmass.is_finite() {
        return Err(ArngError::invalid("airmass must be >= 0"));
    }
    if atm.grid != s.grid {
        return Err(ArngError::GridMismatch(
            "atmosphere model grid differs from spectrum grid".into(),
        ));
    }
    let density = s
        .density
        .iter()
        .zip(&atm.zenith_transmission)
        .zip(&atm.rayleigh_optical_depth)
        .map(|((&d, &rho), &tau)| d * rho * (-airmass * tau).exp())
        .collect();
    Spectrum::new(s.grid.clone(), density)
}

/// Overall per-arm spectral responses: rho_j = path_j * lens^2 * det
/// (the light passes two lenses).
pub fn arm_spectral_response(resp: &InstrumentResponse) -> (Vec<f64>, Vec<f64>) {
    let combine = |path: &[f64]| {
        path.iter()
            .zip(&resp.lens_transmission)
            .zip(&resp.detector_efficiency)
            .map(|((&p, &l), &d)| p * l * l * d)
            .collect::<Vec<f64>>()
    };
    (
        combine(&resp.blue_path_probability),
        combine(&resp.red_path_probability),
    )
}

/// Wrong-way fractions by trapezoidal quadrature:
/// f_b_to_r integrates N_in * R below the cutoff over the full N_in * R
/// integral, and symmetrically for f_r_to_b with B above the cutoff.
pub fn crosstalk_fractions(n_in: &Spectrum, resp: &InstrumentResponse) -> Result<CrosstalkFractions> {
    if resp.grid != n_in.grid {
        return Err(ArngError::GridMismatch(
            "instrument response grid differs from spectrum grid".into(),
        ));
    }
    let x = n_in.grid.as_slice();
    let nr: Vec<f64> = n_in
        .density
        .iter()
        .zip(&resp.red_path_probability)
        .map(|(&n, &r)| n * r)
        .collect();
    let nb: Vec<f64> = n_in
        .density
        .iter()
        .zip(&resp.blue_path_probability)
        .map(|(&n, &b)| n * b)
        .collect();
    let red_total = trapezoid(x, &nr);
    let blue_total = trapezoid(x, &nb);
    if red_total <= 0.0 {
        return Err(ArngError::invalid("no flux reaches the red arm"));
    }
    if blue_total <= 0.0 {
        return Err(ArngError::invalid("no flux reaches the blue arm"));
    }
    let f_b_to_r = trapezoid_below(x, &nr, resp.cutoff_nm) / red_total;
    let f_r_to_b = (blue_total - trapezoid_below(x, &nb, resp.cutoff_nm)) / blue_total;
    CrosstalkFractions::new(f_b_to_r.clamp(0.0, 1.0), f_r_to_b.clamp(0.0, 1.0))
}

/// Expected arm rates s_j = scale * integral(rho_j * N_in), in Hz when the
/// scale carries the aperture-throughput normalization.
pub fn expected_arm_rates(
    n_in: &Spectrum,
    resp: &InstrumentResponse,
    scale: f64,
) -> Result<(f64, f64)> {
    if scale <= 0.0 || !scale.is_finite() {
        return Err(ArngError::invalid("scale must be > 0"));
    }
    if resp.grid != n_in.grid {
        return Err(ArngError::GridMismatch(
            "instrument response grid differs from spectrum grid".into(),
        ));
    }
    let (rho_blue, rho_red) = arm_spectral_response(resp);
    let x = n_in.grid.as_slice();
    let integ = |rho: &[f64]| {
        let y: Vec<f64> = n_in
            .density
            .iter()
            .zip(rho)
            .map(|(&n, &r)| n * r)
            .collect();
        trapezoid(x, &y)
    };
    Ok((scale * integ(&rho_blue), scale * integ(&rho_red)))
}

/// Bundled composite quasar rest-frame spectrum.
pub fn bundled_quasar_composite() -> Spectrum {
    Spectrum::from_table(include_str!("../data/quasar_composite_rest.tsv"))
        .expect("bundled quasar composite")
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let mut sum = 0.0;
    for i in 1..x.len() {
        sum += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
    }
    sum
}

/// Trapezoidal integral restricted to x <= cutoff, splitting the straddling
/// panel at the cutoff by linear interpolation.
fn trapezoid_below(x: &[f64], y: &[f64], cutoff: f64) -> f64 {
    let mut sum = 0.0;
    for i in 1..x.len() {
        if x[i] <= cutoff {
            sum += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
        } else if x[i - 1] < cutoff {
            let t = (cutoff - x[i - 1]) / (x[i] - x[i - 1]);
            let y_cut = y[i - 1] + t * (y[i] - y[i - 1]);
            sum += 0.5 * (y_cut + y[i - 1]) * (cutoff - x[i - 1]);
        }
    }
    sum
}

fn interp_or_zero(x: &[f64], y: &[f64], at: f64) -> f64 {
    if at < x[0] || at > x[x.len() - 1] {
        return 0.0;
    }
    interp_clamped(x, y, at)
}

fn interp_clamped(x: &[f64], y: &[f64], at: f64) -> f64 {
    if at <= x[0] {
        return y[0];
    }
    if at >= x[x.len() - 1] {
        return y[y.len() - 1];
    }
    let i = x.partition_point(|&v| v < at);
    let (x0, x1) = (x[i - 1], x[i]);
    let t = (at - x0) / (x1 - x0);
    y[i - 1] + t * (y[i] - y[i - 1])
}
