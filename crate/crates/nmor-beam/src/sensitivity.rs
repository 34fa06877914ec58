//! Sensitivity budget of the balanced-photodiode readout.
//!
//! The smallest detectable beam current per unit bandwidth is the smallest
//! resolvable rotation angle divided by the system responsivity S (rotation
//! per beam current). The rotation floor is set by laser shot noise,
//! `delta_phi = sqrt(2 h c / lambda / (eta P)) = sqrt(2 e / I_ph)`,
//! optionally joined by a detector dark floor and a 1/f rise at low
//! frequency.

use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::atomic::{calibrate_beta, AtomParams, ResponseModel};
use crate::consts::{ELEMENTARY_CHARGE, MU_0, PLANCK_H, SPEED_OF_LIGHT};
use crate::field::{BeamParams, GeometryParams};
use crate::imaging::{laser_profile, CameraConfig};
use crate::rng::pixel_rng;
use crate::signal::closed_form_signal;

#[derive(Debug, Error, PartialEq)]
pub enum SensitivityError {
    #[error("laser power must be > 0 for the shot-noise floor")]
    ZeroPower,
    #[error("photocurrent must be > 0 for the shot-noise floor")]
    ZeroPhotocurrent,
    #[error("detector efficiency must be in (0, 1] (got {0})")]
    BadEfficiency(f64),
    #[error("responsivity must be > 0 (got {0})")]
    BadResponsivity(f64),
    #[error("frequencies must be positive and ascending")]
    BadFrequencies,
}

/// What drives the shot-noise term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShotNoiseSource {
    /// Optical power (W) on a detector of the given quantum efficiency.
    Power { power: f64, efficiency: f64 },
    /// Total photocurrent (A) generated in the balanced detector.
    Photocurrent(f64),
}

/// Inputs of the sensitivity budget.
#[derive(Debug, Clone, Copy)]
pub struct SensitivityInputs {
    /// Responsivity S (rad per A of beam current).
    pub responsivity: f64,
    /// Probe vacuum wavelength (m); used by the power form.
    pub wavelength: f64,
    /// Shot-noise drive; `None` models a dark (light-off) measurement.
    pub shot: Option<ShotNoiseSource>,
    /// Detector dark floor in beam-current units (A/sqrt(Hz)).
    pub dark_floor: f64,
    /// Corner frequency (Hz) where the 1/f term equals the dark floor;
    /// zero disables the 1/f term.
    pub flicker_corner: f64,
}

impl Default for SensitivityInputs {
    fn default() -> Self {
        SensitivityInputs {
            responsivity: 210.0,
            wavelength: 780e-9,
            shot: Some(ShotNoiseSource::Photocurrent(45.4e-6)),
            dark_floor: 1e-9,
            flicker_corner: 10.0,
        }
    }
}

/// Shot-noise-limited rotation floor (rad/sqrt(Hz)).
///
/// The two forms agree when `I_ph = eta P e / (h c / lambda)`: the quantity
/// under the square root is 2 / (photoelectrons per second) either way.
pub fn shot_noise_rotation(
    source: ShotNoiseSource,
    wavelength: f64,
) -> Result<f64, SensitivityError> {
    match source {
        ShotNoiseSource::Power { power, efficiency } => {
            if power <= 0.0 {
                return Err(SensitivityError::ZeroPower);
            }
            if !(efficiency > 0.0 && efficiency <= 1.0) {
                return Err(SensitivityError::BadEfficiency(efficiency));
            }
            let photon = PLANCK_H * SPEED_OF_LIGHT / wavelength;
            Ok((2.0 * photon / (efficiency * power)).sqrt())
        }
        ShotNoiseSource::Photocurrent(i_ph) => {
            if i_ph <= 0.0 {
                return Err(SensitivityError::ZeroPhotocurrent);
            }
            Ok((2.0 * ELEMENTARY_CHARGE / i_ph).sqrt())
        }
    }
}

/// Smallest detectable beam current (A/sqrt(Hz)) at unit signal-to-noise:
/// `delta_I = delta_phi / S`.
pub fn min_detectable_current(delta_phi: f64, responsivity: f64) -> f64 {
    delta_phi / responsivity
}

/// Model amplitude spectral density (A/sqrt(Hz), beam-current referred):
/// `sqrt(shot^2 + dark^2 + (dark * f_corner / f)^2)`.
pub fn noise_spectrum_model(
    inputs: &SensitivityInputs,
    freqs: &[f64],
) -> Result<Vec<f64>, SensitivityError> {
    if freqs.is_empty() || freqs.windows(2).any(|w| w[1] <= w[0]) || freqs[0] <= 0.0 {
        return Err(SensitivityError::BadFrequencies);
    }
    if !(inputs.responsivity > 0.0) {
        return Err(SensitivityError::BadResponsivity(inputs.responsivity));
    }
    let shot_current = match inputs.shot {
        Some(src) => {
            min_detectable_current(shot_noise_rotation(src, inputs.wavelength)?, inputs.responsivity)
        }
        None => 0.0,
    };
    Ok(freqs
        .iter()
        .map(|&f| {
            let flicker = inputs.dark_floor * inputs.flicker_corner / f;
            (shot_current * shot_current
                + inputs.dark_floor * inputs.dark_floor
                + flicker * flicker)
                .sqrt()
        })
        .collect())
}

/// Seeded spectrum realization for plotting: each model point multiplied by
/// a Rayleigh-distributed amplitude factor of unit mean square, as a single
/// periodogram bin would scatter.
pub fn noise_spectrum_realization(
    inputs: &SensitivityInputs,
    freqs: &[f64],
    seed: u64,
) -> Result<Vec<f64>, SensitivityError> {
    const SPECTRUM_STREAM: u64 = 0x6e_6f69_7365; // distinct from frame tags
    let model = noise_spectrum_model(inputs, freqs)?;
    Ok(model
        .into_iter()
        .enumerate()
        .map(|(i, asd)| {
            let mut rng = pixel_rng(seed, SPECTRUM_STREAM, i as u64);
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            asd * ((a * a + b * b) / 2.0).sqrt()
        })
        .collect())
}

/// Responsivity of the full imaging pipeline (rad of power-weighted mean
/// rotation per A of beam current), by central finite differences.
///
/// The balanced photodiode sees the laser-power-weighted mean of the
/// rotation field, so the returned S corresponds to the integrated readout
/// used for alignment. For a beam centered on the laser axis the weighted
/// rotation cancels by symmetry; offset beams give a finite, sign-definite S.
pub fn pipeline_responsivity(
    beam: &BeamParams,
    g: &GeometryParams,
    atoms: &AtomParams,
    camera: &CameraConfig,
    laser_peak: f64,
    model: ResponseModel,
) -> f64 {
    let laser = laser_profile(camera, g, laser_peak);
    let beta = calibrate_beta(1e-9, &laser, atoms, model).expect("laser profile has bright pixels");

    let weighted_phi = |current: f64| -> f64 {
        let p = BeamParams {
            total_current: current,
            ..*beam
        };
        let grid = laser.grid;
        let mut num = 0.0;
        let mut den = 0.0;
        for iy in 0..grid.ny {
            let phi_row = closed_form_signal(grid.y(iy), &p, g);
            for iz in 0..grid.nz {
                let px = grid.idx(iy, iz);
                if !beta.beta.mask[px] {
                    continue;
                }
                let w = laser.data[px];
                num += w * MU_0 * beta.beta.data[px] * phi_row;
                den += w;
            }
        }
        num / den
    };

    let i0 = beam.total_current;
    let h = 0.05 * i0.abs().max(1e-6);
    (weighted_phi(i0 + h) - weighted_phi(i0 - h)) / (2.0 * h)
}
