//! Rb Lambda-system response: susceptibility, EIT linewidth, rotation and
//! absorption rates, and the per-pixel rotation response map beta(y, z).
//!
//! Two rotation models are provided and deliberately kept separate:
//!
//! * `Linear` — the small-field rate `dphi/dx = (hbar c N / lambda I) gamma B`,
//!   valid on exact resonance with long-lived spin coherence;
//! * `Eit` — the rate `dphi/dx = alpha0 Gamma delta_B / Gamma_EIT^2` that
//!   follows from the Lambda-system susceptibility with power broadening.
//!
//! The two do not coincide analytically as written (their intensity scalings
//! differ), so calibration lets the caller choose, and the test suite
//! compares the resulting maps in shape rather than magnitude.
//!
//! Frequency conventions: decoherence rates and Zeeman shifts are angular
//! (rad/s). The gyromagnetic ratio is stored in Hz/T and converted with an
//! explicit 2*pi exactly once, in [`zeeman_shift`].

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::consts::{EPSILON_0, HBAR, SPEED_OF_LIGHT};
use crate::grid::{MaskedMap, ScalarMap, DEFAULT_MASK_THRESHOLD};

#[derive(Debug, Error, PartialEq)]
pub enum AtomicError {
    #[error("laser intensity must be > 0 for the linear rotation model")]
    ZeroIntensity,
    #[error("calibration field must be nonzero")]
    ZeroAppliedField,
    #[error("no pixel above the {0} intensity mask threshold")]
    AllMasked(f64),
    #[error("{name} must be > 0 (got {value})")]
    NonPositive { name: &'static str, value: f64 },
    #[error("ground decoherence must be below excited decoherence")]
    DecoherenceOrdering,
}

/// Vapor and Lambda-system constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomParams {
    /// Excited-state decoherence rate Gamma (rad/s).
    pub excited_decoherence: f64,
    /// Ground-state decoherence rate Gamma0 (rad/s).
    pub ground_decoherence: f64,
    /// Unsaturated resonant absorption coefficient alpha0 (1/m), treated as
    /// a direct model input.
    pub resonant_absorption: f64,
    /// Vapor number density N (atoms/m^3).
    pub vapor_density: f64,
    /// Probe vacuum wavelength (m).
    pub wavelength: f64,
    /// Gyromagnetic ratio (Hz/T); 5 Hz/nT for the Rb ground state.
    pub gyromagnetic_hz_per_t: f64,
    /// Power-broadening coefficient kappa ((rad/s) per W/m^2): the intensity
    /// term of Gamma_EIT = Gamma0 + kappa * I.
    pub power_broadening: f64,
}

impl Default for AtomParams {
    fn default() -> Self {
        AtomParams {
            excited_decoherence: 2.0 * PI * 6.07e6,
            ground_decoherence: 2.0 * PI * 10.0,
            resonant_absorption: 100.0,
            vapor_density: 2.7e17,
            wavelength: 780e-9,
            gyromagnetic_hz_per_t: 5e9,
            // broadens the EIT line ~10x at the nominal 30 W/m^2 probe peak
            power_broadening: 2.0 * PI * 100.0 / 30.0,
        }
    }
}

impl AtomParams {
    pub fn validate(&self) -> Result<(), AtomicError> {
        for (name, value) in [
            ("excited_decoherence", self.excited_decoherence),
            ("ground_decoherence", self.ground_decoherence),
            ("resonant_absorption", self.resonant_absorption),
            ("vapor_density", self.vapor_density),
            ("wavelength", self.wavelength),
            ("gyromagnetic_hz_per_t", self.gyromagnetic_hz_per_t),
            ("power_broadening", self.power_broadening),
        ] {
            if !(value > 0.0) {
                return Err(AtomicError::NonPositive { name, value });
            }
        }
        if self.ground_decoherence >= self.excited_decoherence {
            return Err(AtomicError::DecoherenceOrdering);
        }
        Ok(())
    }

    /// Zeeman shift delta_B = gamma B in angular units (rad/s). This is the
    /// single point where the Hz/T ratio meets a 2*pi.
    #[inline]
    pub fn zeeman_shift(&self, b: f64) -> f64 {
        2.0 * PI * self.gyromagnetic_hz_per_t * b
    }
}

/// Which of the two circular components of the linear polarization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CircularComponent {
    SigmaPlus,
    SigmaMinus,
}

impl CircularComponent {
    fn sign(self) -> f64 {
        match self {
            CircularComponent::SigmaPlus => 1.0,
            CircularComponent::SigmaMinus => -1.0,
        }
    }
}

/// Selectable rotation-response model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResponseModel {
    Linear,
    Eit,
}

/// Power-broadened EIT linewidth Gamma_EIT = Gamma0 + kappa * I (rad/s).
pub fn gamma_eit(intensity: f64, a: &AtomParams) -> f64 {
    a.ground_decoherence + a.power_broadening * intensity
}

/// Complex optical susceptibility of one circular component at Zeeman shift
/// `delta_b` (rad/s):
///
/// ```text
/// chi_pm = (i alpha0 lambda / pi) [ (Gamma0 Gamma_EIT + 4 d^2) - i d Gamma_EIT ]
///          / (4 d^2 + Gamma_EIT^2),   d = +-delta_b
/// ```
pub fn susceptibility(
    delta_b: f64,
    intensity: f64,
    a: &AtomParams,
    component: CircularComponent,
) -> Complex64 {
    let d = component.sign() * delta_b;
    let g_eit = gamma_eit(intensity, a);
    let denom = 4.0 * d * d + g_eit * g_eit;
    let numer = Complex64::new(a.ground_decoherence * g_eit + 4.0 * d * d, -d * g_eit);
    Complex64::new(0.0, a.resonant_absorption * a.wavelength / PI) * numer / denom
}

/// Rotation rate dphi/dx (rad/m) of the EIT model in the small-shift regime:
/// `alpha0 Gamma delta_B / Gamma_EIT^2`.
pub fn rotation_rate(delta_b: f64, intensity: f64, a: &AtomParams) -> f64 {
    let g_eit = gamma_eit(intensity, a);
    a.resonant_absorption * a.excited_decoherence * delta_b / (g_eit * g_eit)
}

/// Whether `delta_b` sits inside the small-shift validity window
/// |delta_B| < Gamma_EIT / 4 of [`rotation_rate`].
pub fn rotation_rate_in_range(delta_b: f64, intensity: f64, a: &AtomParams) -> bool {
    delta_b.abs() < gamma_eit(intensity, a) / 4.0
}

/// Rotation rate derived from the susceptibility difference of the two
/// circular components, `(pi/lambda) Re(chi+ - chi-) / 2`. Used as the
/// full-resonance reference shape for [`rotation_rate`].
pub fn rotation_rate_from_susceptibility(delta_b: f64, intensity: f64, a: &AtomParams) -> f64 {
    let plus = susceptibility(delta_b, intensity, a, CircularComponent::SigmaPlus);
    let minus = susceptibility(delta_b, intensity, a, CircularComponent::SigmaMinus);
    PI / a.wavelength * (plus - minus).re / 2.0
}

/// Attenuation coefficient (1/m) of the EIT model: `alpha0 Gamma0 / Gamma_EIT`,
/// to be used as dI/dx = -rate * I.
pub fn absorption_rate(intensity: f64, a: &AtomParams) -> f64 {
    a.resonant_absorption * a.ground_decoherence / gamma_eit(intensity, a)
}

/// Rotation rate dphi/dx (rad/m) of the linear on-resonance model:
/// `(hbar c N / (lambda I)) * (2 pi gamma) * B`.
pub fn rotation_rate_linear(b: f64, intensity: f64, a: &AtomParams) -> Result<f64, AtomicError> {
    if intensity <= 0.0 {
        return Err(AtomicError::ZeroIntensity);
    }
    Ok(HBAR * SPEED_OF_LIGHT * a.vapor_density / (a.wavelength * intensity) * a.zeeman_shift(b))
}

/// Per-pixel rotation response beta(y, z) (rad/(T·m)).
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMap {
    pub beta: MaskedMap,
}

impl ResponseMap {
    /// Beta must be finite and strictly positive wherever the mask holds.
    pub fn validate(&self) -> Result<(), AtomicError> {
        for (_, _, v) in self.beta.iter_valid() {
            if !(v > 0.0) || !v.is_finite() {
                return Err(AtomicError::NonPositive {
                    name: "beta",
                    value: v,
                });
            }
        }
        Ok(())
    }
}

/// Rotation response rate/B (rad/(T·m)) at one intensity, for either model.
/// Evaluated literally as rate(B)/B at the calibration field; in both models
/// the ratio is independent of B in the linear regime.
pub fn beta_at(intensity: f64, applied_b: f64, a: &AtomParams, model: ResponseModel) -> f64 {
    match model {
        ResponseModel::Linear => {
            rotation_rate_linear(applied_b, intensity, a).unwrap_or(f64::INFINITY) / applied_b
        }
        ResponseModel::Eit => {
            rotation_rate(a.zeeman_shift(applied_b), intensity, a) / applied_b
        }
    }
}

/// Derive the rotation response profile by applying a known uniform field
/// and recording the per-pixel rotation rate. Pixels below 5% of the peak
/// intensity are masked out.
pub fn calibrate_beta(
    applied_b: f64,
    laser_intensity: &ScalarMap,
    a: &AtomParams,
    model: ResponseModel,
) -> Result<ResponseMap, AtomicError> {
    if applied_b == 0.0 {
        return Err(AtomicError::ZeroAppliedField);
    }
    let peak = laser_intensity.max_value();
    let threshold = DEFAULT_MASK_THRESHOLD * peak;

    let mut beta = MaskedMap::zeros(laser_intensity.grid);
    let mut any = false;
    for (i, &intensity) in laser_intensity.data.iter().enumerate() {
        if intensity >= threshold && intensity > 0.0 {
            beta.data[i] = beta_at(intensity, applied_b, a, model);
            beta.mask[i] = true;
            any = true;
        }
    }
    if !any {
        return Err(AtomicError::AllMasked(DEFAULT_MASK_THRESHOLD));
    }
    Ok(ResponseMap { beta })
}

/// The textbook expression `mu^2 N / (2 eps0 hbar Gamma)` sometimes quoted
/// for alpha0. As written its units are not 1/m, so it is provided for
/// reference only; the crate treats [`AtomParams::resonant_absorption`] as a
/// direct input.
pub fn alpha0_reference_expression(dipole_moment: f64, a: &AtomParams) -> f64 {
    dipole_moment * dipole_moment * a.vapor_density
        / (2.0 * EPSILON_0 * HBAR * a.excited_decoherence)
}
