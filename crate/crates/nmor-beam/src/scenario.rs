//! Scenario files: one TOML document describing a complete simulated
//! measurement.
//!
//! Every physical quantity carries an explicit unit suffix in its key
//! (`total_current_ua`, `exposure_us`, ...) — unit mistakes are the dominant
//! failure mode in this domain, so the file format refuses to be ambiguous.
//! Sections and keys are strict: unknown keys are rejected with the TOML
//! parser's line/column diagnostics.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atomic::{AtomParams, ResponseModel};
use crate::field::{BeamParams, GeometryParams};
use crate::fit::FitConfig;
use crate::fluorescence::FluorescenceConfig;
use crate::imaging::CameraConfig;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

/// A fully validated scenario, in SI units.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub beam: BeamParams,
    pub beam_energy_kev: f64,
    pub geometry: GeometryParams,
    pub atoms: AtomParams,
    pub camera: CameraConfig,
    pub fluorescence: FluorescenceConfig,
    pub fit: FitConfig,
    pub laser_peak_intensity: f64,
    pub calibration_field: f64,
    pub response_model: ResponseModel,
    pub noise_on: bool,
    pub seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        ScenarioFile::default().assemble("<default>").expect("default scenario is valid")
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let display = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|e| ScenarioError::Read {
            path: display.clone(),
            source: e,
        })?;
        let file: ScenarioFile = toml::from_str(&text).map_err(|e| ScenarioError::Parse {
            path: display.clone(),
            message: e.to_string(),
        })?;
        file.assemble(&display)
    }

    /// Serialize back to the unit-suffixed TOML representation.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(&ScenarioFile::from_scenario(self))
            .expect("scenario serializes")
    }
}

fn default_x0() -> f64 {
    0.0
}
fn default_energy() -> f64 {
    20.0
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct BeamSection {
    total_current_ua: f64,
    width_w_mm: f64,
    center_y0_mm: f64,
    #[serde(default = "default_x0")]
    center_x0_mm: f64,
    /// Pass-through metadata: the field model does not depend on it.
    #[serde(default = "default_energy")]
    energy_kev: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct GeometrySection {
    cell_path_l_mm: f64,
    laser_radius_mm: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct AtomsSection {
    excited_decoherence_hz: f64,
    ground_decoherence_hz: f64,
    resonant_absorption_per_m: f64,
    vapor_density_per_cm3: f64,
    wavelength_nm: f64,
    gyromagnetic_hz_per_nt: f64,
    power_broadening_hz_per_w_m2: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct CameraSection {
    pixels_y: usize,
    pixels_z: usize,
    pixel_pitch_um: f64,
    magnification: f64,
    exposure_us: f64,
    quantum_efficiency: f64,
    read_noise_e: f64,
    gain_e_per_dn: f64,
    bit_depth: u32,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct FluorescenceSection {
    pixels_y: usize,
    pixels_z: usize,
    pixel_pitch_um: f64,
    magnification: f64,
    exposure_s: f64,
    quantum_efficiency: f64,
    read_noise_e: f64,
    gain_e_per_dn: f64,
    bit_depth: u32,
    brightness_counts_per_a_m_s: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct FitSection {
    max_iterations: usize,
    parameter_tolerance: f64,
    residual_tolerance: f64,
    initial_damping: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    laser_peak_intensity_w_m2: f64,
    calibration_field_nt: f64,
    response_model: String,
    noise_on: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    beam: BeamSection,
    geometry: GeometrySection,
    atoms: AtomsSection,
    camera: CameraSection,
    fluorescence: FluorescenceSection,
    fit: FitSection,
    run: RunSection,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        ScenarioFile {
            beam: BeamSection {
                total_current_ua: 100.0,
                width_w_mm: 1.0,
                center_y0_mm: 0.0,
                center_x0_mm: 0.0,
                energy_kev: 20.0,
            },
            geometry: GeometrySection {
                cell_path_l_mm: 45.0,
                laser_radius_mm: 3.0,
            },
            atoms: AtomsSection {
                excited_decoherence_hz: 6.07e6,
                ground_decoherence_hz: 10.0,
                resonant_absorption_per_m: 100.0,
                vapor_density_per_cm3: 2.7e11,
                wavelength_nm: 780.0,
                gyromagnetic_hz_per_nt: 5.0,
                power_broadening_hz_per_w_m2: 100.0 / 30.0,
            },
            camera: CameraSection {
                pixels_y: 256,
                pixels_z: 256,
                pixel_pitch_um: 15.625,
                magnification: 0.50,
                exposure_us: 200.0,
                quantum_efficiency: 0.6,
                read_noise_e: 10.0,
                gain_e_per_dn: 125.0,
                bit_depth: 16,
            },
            fluorescence: FluorescenceSection {
                pixels_y: 256,
                pixels_z: 256,
                pixel_pitch_um: 31.25,
                magnification: 1.0,
                exposure_s: 30.0,
                quantum_efficiency: 0.25,
                read_noise_e: 10.0,
                gain_e_per_dn: 30.0,
                bit_depth: 16,
                brightness_counts_per_a_m_s: 2e6,
            },
            fit: FitSection {
                max_iterations: 200,
                parameter_tolerance: 1e-10,
                residual_tolerance: 1e-12,
                initial_damping: 1e-3,
            },
            run: RunSection {
                laser_peak_intensity_w_m2: 30.0,
                calibration_field_nt: 1.0,
                response_model: "linear".into(),
                noise_on: false,
                seed: Some(1),
            },
        }
    }
}

impl ScenarioFile {
    fn from_scenario(s: &Scenario) -> ScenarioFile {
        let mut f = ScenarioFile::default();
        f.beam = BeamSection {
            total_current_ua: s.beam.total_current * 1e6,
            width_w_mm: s.beam.width_w * 1e3,
            center_y0_mm: s.beam.center_y0 * 1e3,
            center_x0_mm: s.beam.center_x0 * 1e3,
            energy_kev: s.beam_energy_kev,
        };
        f.geometry = GeometrySection {
            cell_path_l_mm: s.geometry.cell_path_l * 1e3,
            laser_radius_mm: s.geometry.laser_radius * 1e3,
        };
        f.atoms = AtomsSection {
            excited_decoherence_hz: s.atoms.excited_decoherence / (2.0 * PI),
            ground_decoherence_hz: s.atoms.ground_decoherence / (2.0 * PI),
            resonant_absorption_per_m: s.atoms.resonant_absorption,
            vapor_density_per_cm3: s.atoms.vapor_density * 1e-6,
            wavelength_nm: s.atoms.wavelength * 1e9,
            gyromagnetic_hz_per_nt: s.atoms.gyromagnetic_hz_per_t * 1e-9,
            power_broadening_hz_per_w_m2: s.atoms.power_broadening / (2.0 * PI),
        };
        f.camera = CameraSection {
            pixels_y: s.camera.pixels_y,
            pixels_z: s.camera.pixels_z,
            pixel_pitch_um: s.camera.pixel_pitch * 1e6,
            magnification: s.camera.magnification,
            exposure_us: s.camera.exposure * 1e6,
            quantum_efficiency: s.camera.quantum_efficiency,
            read_noise_e: s.camera.read_noise,
            gain_e_per_dn: s.camera.gain,
            bit_depth: s.camera.bit_depth,
        };
        f.fluorescence = FluorescenceSection {
            pixels_y: s.fluorescence.camera.pixels_y,
            pixels_z: s.fluorescence.camera.pixels_z,
            pixel_pitch_um: s.fluorescence.camera.pixel_pitch * 1e6,
            magnification: s.fluorescence.camera.magnification,
            exposure_s: s.fluorescence.camera.exposure,
            quantum_efficiency: s.fluorescence.camera.quantum_efficiency,
            read_noise_e: s.fluorescence.camera.read_noise,
            gain_e_per_dn: s.fluorescence.camera.gain,
            bit_depth: s.fluorescence.camera.bit_depth,
            brightness_counts_per_a_m_s: s.fluorescence.brightness_scale,
        };
        f.fit = FitSection {
            max_iterations: s.fit.max_iterations,
            parameter_tolerance: s.fit.parameter_tolerance,
            residual_tolerance: s.fit.residual_tolerance,
            initial_damping: s.fit.initial_damping,
        };
        f.run = RunSection {
            laser_peak_intensity_w_m2: s.laser_peak_intensity,
            calibration_field_nt: s.calibration_field * 1e9,
            response_model: match s.response_model {
                ResponseModel::Linear => "linear".into(),
                ResponseModel::Eit => "eit".into(),
            },
            noise_on: s.noise_on,
            seed: Some(s.seed),
        };
        f
    }

    fn assemble(self, path: &str) -> Result<Scenario, ScenarioError> {
        let invalid = |message: String| ScenarioError::Invalid {
            path: path.to_string(),
            message,
        };

        let beam = BeamParams {
            total_current: self.beam.total_current_ua * 1e-6,
            width_w: self.beam.width_w_mm * 1e-3,
            center_y0: self.beam.center_y0_mm * 1e-3,
            center_x0: self.beam.center_x0_mm * 1e-3,
        };
        beam.validate()
            .map_err(|e| invalid(format!("[beam] {e}")))?;

        let camera = CameraConfig {
            pixels_y: self.camera.pixels_y,
            pixels_z: self.camera.pixels_z,
            pixel_pitch: self.camera.pixel_pitch_um * 1e-6,
            magnification: self.camera.magnification,
            exposure: self.camera.exposure_us * 1e-6,
            wavelength: self.atoms.wavelength_nm * 1e-9,
            quantum_efficiency: self.camera.quantum_efficiency,
            read_noise: self.camera.read_noise_e,
            gain: self.camera.gain_e_per_dn,
            bit_depth: self.camera.bit_depth,
            rng_seed: self.run.seed.unwrap_or(0),
        };
        camera
            .validate()
            .map_err(|e| invalid(format!("[camera] {e}")))?;

        let grid = camera.grid();
        let geometry = GeometryParams {
            cell_path_l: self.geometry.cell_path_l_mm * 1e-3,
            laser_radius: self.geometry.laser_radius_mm * 1e-3,
            grid_span_y: grid.span_y(),
            grid_span_z: grid.span_z(),
        };
        geometry
            .validate()
            .map_err(|e| invalid(format!("[geometry] {e}")))?;

        let atoms = AtomParams {
            excited_decoherence: 2.0 * PI * self.atoms.excited_decoherence_hz,
            ground_decoherence: 2.0 * PI * self.atoms.ground_decoherence_hz,
            resonant_absorption: self.atoms.resonant_absorption_per_m,
            vapor_density: self.atoms.vapor_density_per_cm3 * 1e6,
            wavelength: self.atoms.wavelength_nm * 1e-9,
            gyromagnetic_hz_per_t: self.atoms.gyromagnetic_hz_per_nt * 1e9,
            power_broadening: 2.0 * PI * self.atoms.power_broadening_hz_per_w_m2,
        };
        atoms
            .validate()
            .map_err(|e| invalid(format!("[atoms] {e}")))?;

        let fluor_camera = CameraConfig {
            pixels_y: self.fluorescence.pixels_y,
            pixels_z: self.fluorescence.pixels_z,
            pixel_pitch: self.fluorescence.pixel_pitch_um * 1e-6,
            magnification: self.fluorescence.magnification,
            exposure: self.fluorescence.exposure_s,
            wavelength: self.atoms.wavelength_nm * 1e-9,
            quantum_efficiency: self.fluorescence.quantum_efficiency,
            read_noise: self.fluorescence.read_noise_e,
            gain: self.fluorescence.gain_e_per_dn,
            bit_depth: self.fluorescence.bit_depth,
            rng_seed: self.run.seed.unwrap_or(0).wrapping_add(1),
        };
        fluor_camera
            .validate()
            .map_err(|e| invalid(format!("[fluorescence] {e}")))?;
        if !(self.fluorescence.brightness_counts_per_a_m_s > 0.0) {
            return Err(invalid(
                "[fluorescence] brightness_counts_per_a_m_s must be > 0".into(),
            ));
        }

        if self.fit.max_iterations < 1 {
            return Err(invalid("[fit] max_iterations must be >= 1".into()));
        }
        for (name, v) in [
            ("parameter_tolerance", self.fit.parameter_tolerance),
            ("residual_tolerance", self.fit.residual_tolerance),
            ("initial_damping", self.fit.initial_damping),
        ] {
            if !(v > 0.0) {
                return Err(invalid(format!("[fit] {name} must be > 0 (got {v})")));
            }
        }

        let response_model = match self.run.response_model.as_str() {
            "linear" => ResponseModel::Linear,
            "eit" => ResponseModel::Eit,
            other => {
                return Err(invalid(format!(
                    "[run] response_model must be 'linear' or 'eit' (got '{other}')"
                )))
            }
        };
        if !(self.run.laser_peak_intensity_w_m2 > 0.0) {
            return Err(invalid(
                "[run] laser_peak_intensity_w_m2 must be > 0".into(),
            ));
        }
        if self.run.calibration_field_nt == 0.0 {
            return Err(invalid("[run] calibration_field_nt must be nonzero".into()));
        }
        let seed = match (self.run.noise_on, self.run.seed) {
            (true, None) => {
                return Err(invalid(
                    "[run] seed is mandatory when noise_on = true".into(),
                ))
            }
            (_, s) => s.unwrap_or(0),
        };

        Ok(Scenario {
            beam,
            beam_energy_kev: self.beam.energy_kev,
            geometry,
            atoms,
            camera,
            fluorescence: FluorescenceConfig {
                camera: fluor_camera,
                brightness_scale: self.fluorescence.brightness_counts_per_a_m_s,
            },
            fit: FitConfig {
                max_iterations: self.fit.max_iterations,
                parameter_tolerance: self.fit.parameter_tolerance,
                residual_tolerance: self.fit.residual_tolerance,
                initial_damping: self.fit.initial_damping,
            },
            laser_peak_intensity: self.run.laser_peak_intensity_w_m2,
            calibration_field: self.run.calibration_field_nt * 1e-9,
            response_model,
            noise_on: self.run.noise_on,
            seed,
        })
    }
}
