//! Physical constants (CODATA 2018 / 2019 SI definitions).

use std::f64::consts::PI;

/// Vacuum permeability mu0 (T·m/A).
pub const MU_0: f64 = 1.256_637_062_12e-6;
/// Vacuum permittivity eps0 (F/m).
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Elementary charge e (C). Exact by the 2019 SI definition.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Planck constant h (J·s). Exact by the 2019 SI definition.
pub const PLANCK_H: f64 = 6.626_070_15e-34;
/// Reduced Planck constant hbar (J·s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light in vacuum c (m/s). Exact by SI definition.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// The fixed constants bundled as a value, for code that threads them through.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysConsts {
    pub mu0: f64,
    pub electron_charge: f64,
    pub planck_h: f64,
    pub light_speed_c: f64,
    pub hbar: f64,
}

impl Default for PhysConsts {
    fn default() -> Self {
        PhysConsts {
            mu0: MU_0,
            electron_charge: ELEMENTARY_CHARGE,
            planck_h: PLANCK_H,
            light_speed_c: SPEED_OF_LIGHT,
            hbar: HBAR,
        }
    }
}

/// Photon energy h·c/lambda (J) at vacuum wavelength `lambda` (m).
#[inline]
pub fn photon_energy(lambda: f64) -> f64 {
    PLANCK_H * SPEED_OF_LIGHT / lambda
}

/// Angular frequency (rad/s) for a linear frequency in Hz.
#[inline]
pub fn angular(hz: f64) -> f64 {
    2.0 * PI * hz
}
