//! Gaussian beam current density and its magnetostatic field.
//!
//! The beam is modeled as a collimated current along +z with a cylindrically
//! symmetric Gaussian transverse profile. Ampere's law then gives a purely
//! azimuthal field whose magnitude depends only on the distance from the
//! beam axis, with the enclosed-current factor `1 - exp(-r^2/w^2)`.

use std::f64::consts::PI;

use thiserror::Error;

use crate::consts::MU_0;

#[derive(Debug, Error, PartialEq)]
pub enum FieldError {
    #[error("width_w must be > 0 (got {0})")]
    NonPositiveWidth(f64),
    #[error("total_current must be finite (got {0})")]
    NonFiniteCurrent(f64),
    #[error("{name} must be > 0 (got {value})")]
    NonPositiveGeometry { name: &'static str, value: f64 },
}

/// Transverse description of the charged-particle beam; these are the
/// quantities the reconstruction recovers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamParams {
    /// Signed conventional current along +z (A). The sign encodes the
    /// current direction; an electron beam travelling along +z carries
    /// negative conventional current.
    pub total_current: f64,
    /// Gaussian width w (m), defined strictly by the exp(-r^2/w^2) density
    /// profile: the current density falls to 1/e of its peak at r = w.
    /// (Some sources label this same w a "1/e^2 half-width"; here the
    /// functional form is the definition.)
    pub width_w: f64,
    /// Vertical position of the beam axis (m).
    pub center_y0: f64,
    /// Horizontal position of the beam axis (m). The closed-form signal
    /// assumes the probe path straddles the beam symmetrically (x0 = 0);
    /// for x0 != 0 the quadrature route is the authoritative one.
    pub center_x0: f64,
}

impl BeamParams {
    /// Beam centered horizontally on the probe path (x0 = 0).
    pub fn new(total_current: f64, width_w: f64, center_y0: f64) -> Result<Self, FieldError> {
        let p = BeamParams {
            total_current,
            width_w,
            center_y0,
            center_x0: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        if !(self.width_w > 0.0) {
            return Err(FieldError::NonPositiveWidth(self.width_w));
        }
        if !self.total_current.is_finite() {
            return Err(FieldError::NonFiniteCurrent(self.total_current));
        }
        Ok(())
    }
}

/// Vapor-cell and probe-beam geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryParams {
    /// Probe path length through the vapor (m); nominally 45 mm.
    pub cell_path_l: f64,
    /// 1/e^2 intensity radius of the probe laser (m); nominally 3 mm.
    pub laser_radius: f64,
    /// Object-plane grid extent along y (m).
    pub grid_span_y: f64,
    /// Object-plane grid extent along z (m).
    pub grid_span_z: f64,
}

impl GeometryParams {
    pub fn validate(&self) -> Result<(), FieldError> {
        for (name, value) in [
            ("cell_path_l", self.cell_path_l),
            ("laser_radius", self.laser_radius),
            ("grid_span_y", self.grid_span_y),
            ("grid_span_z", self.grid_span_z),
        ] {
            if !(value > 0.0) {
                return Err(FieldError::NonPositiveGeometry { name, value });
            }
        }
        Ok(())
    }
}

impl Default for GeometryParams {
    fn default() -> Self {
        GeometryParams {
            cell_path_l: 45e-3,
            laser_radius: 3e-3,
            grid_span_y: 8e-3,
            grid_span_z: 8e-3,
        }
    }
}

/// Current density j(x, y) (A/m^2) of the Gaussian beam; integrates to the
/// total current over the transverse plane.
pub fn current_density(x: f64, y: f64, p: &BeamParams) -> f64 {
    let dx = x - p.center_x0;
    let dy = y - p.center_y0;
    let w2 = p.width_w * p.width_w;
    p.total_current / (PI * w2) * (-(dx * dx + dy * dy) / w2).exp()
}

/// Magnitude of the azimuthal field (T) at transverse position (x, y).
///
/// The removable singularity at the axis is handled by the two-term series
/// `B ~ mu0 |I| r / (2 pi w^2) * (1 - r^2/(2 w^2))` for r < 1e-6 w.
pub fn b_field_magnitude(x: f64, y: f64, p: &BeamParams) -> f64 {
    let dx = x - p.center_x0;
    let dy = y - p.center_y0;
    let r2 = dx * dx + dy * dy;
    let r = r2.sqrt();
    let w2 = p.width_w * p.width_w;
    let i_abs = p.total_current.abs();
    if r < 1e-6 * p.width_w {
        MU_0 * i_abs * r / (2.0 * PI * w2) * (1.0 - r2 / (2.0 * w2))
    } else {
        MU_0 * i_abs / (2.0 * PI * r) * (1.0 - (-r2 / w2).exp())
    }
}

/// x-component of the azimuthal field (T).
///
/// For positive conventional current along +z the right-hand rule gives
/// `B = sign(I) |B| phi_hat` with `phi_hat = (-(y - y0)/r, (x - x0)/r)`,
/// so B_x is antisymmetric about the beam axis and negative above it.
pub fn b_field_x(x: f64, y: f64, p: &BeamParams) -> f64 {
    let dx = x - p.center_x0;
    let dy = y - p.center_y0;
    let r = (dx * dx + dy * dy).sqrt();
    if r == 0.0 {
        return 0.0;
    }
    -p.total_current.signum() * b_field_magnitude(x, y, p) * dy / r
}

/// y-component of the azimuthal field (T); see [`b_field_x`].
pub fn b_field_y(x: f64, y: f64, p: &BeamParams) -> f64 {
    let dx = x - p.center_x0;
    let dy = y - p.center_y0;
    let r = (dx * dx + dy * dy).sqrt();
    if r == 0.0 {
        return 0.0;
    }
    p.total_current.signum() * b_field_magnitude(x, y, p) * dx / r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consts::MU_0;
    use proptest::prelude::*;

    fn beam_100ua() -> BeamParams {
        BeamParams::new(100e-6, 1e-3, 0.0).unwrap()
    }

    #[test]
    fn validation_rejects_bad_params() {
        assert_eq!(
            BeamParams::new(1e-6, 0.0, 0.0),
            Err(FieldError::NonPositiveWidth(0.0))
        );
        assert!(BeamParams::new(f64::NAN, 1e-3, 0.0).is_err());
        assert!(BeamParams::new(-50e-6, 1e-3, 0.0).is_ok());
    }

    #[test]
    fn peak_density_is_i0_over_pi_w2() {
        // I0 = pi * 1e-6 A, w = 1 mm: on-axis density is exactly 1 A/m^2
        let p = BeamParams::new(PI * 1e-6, 1e-3, 0.0).unwrap();
        assert!((current_density(0.0, 0.0, &p) - 1.0).abs() < 1e-12);
        // and falls to 1/e of the peak at r = w
        let at_w = current_density(1e-3, 0.0, &p);
        assert!((at_w - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn density_integrates_to_total_current() {
        // midpoint quadrature over |x|,|y| <= 8w
        let p = beam_100ua();
        let w = p.width_w;
        let n = 4000;
        let h = 16.0 * w / n as f64;
        let mut sum = 0.0;
        for i in 0..n {
            let x = -8.0 * w + (i as f64 + 0.5) * h;
            for j in 0..n {
                let y = -8.0 * w + (j as f64 + 0.5) * h;
                sum += current_density(x, y, &p);
            }
        }
        sum *= h * h;
        assert!(
            ((sum - p.total_current) / p.total_current).abs() < 1e-9,
            "integrated current {sum:e}"
        );
    }

    #[test]
    fn field_magnitude_hand_value_at_5mm() {
        // mu0 * 100 uA * (1 - e^-25) / (2 pi 5 mm) = 4.0000000021e-9 T
        let b = b_field_magnitude(0.0, 5e-3, &beam_100ua());
        assert!((b - 4.000_000_002_1e-9).abs() < 1e-13, "B = {b:e}");
    }

    #[test]
    fn field_vanishes_on_axis() {
        let p = beam_100ua();
        assert_eq!(b_field_magnitude(0.0, 0.0, &p), 0.0);
        assert_eq!(b_field_x(0.0, 0.0, &p), 0.0);
        // series branch continuous against the general branch near crossover
        let r_lo = 0.999e-6 * p.width_w;
        let r_hi = 1.001e-6 * p.width_w;
        let b_lo = b_field_magnitude(0.0, r_lo, &p);
        let b_hi = b_field_magnitude(0.0, r_hi, &p);
        assert!(((b_hi - b_lo) / b_hi).abs() < 1e-2);
        assert!(b_lo > 0.0);
    }

    #[test]
    fn enclosed_current_limit_far_from_beam() {
        let p = beam_100ua();
        let r = 10.0 * p.width_w;
        let b = b_field_magnitude(0.0, r, &p);
        let asympt = b * 2.0 * PI * r / (MU_0 * p.total_current);
        assert!((asympt - 1.0).abs() < 1e-10);
    }

    #[test]
    fn bx_zero_along_beam_plane() {
        let p = beam_100ua();
        for x in [-5e-3, 0.0, 2e-3, 7e-3] {
            assert_eq!(b_field_x(x, p.center_y0, &p), 0.0);
        }
    }

    #[test]
    fn bx_hand_value_at_3_4_mm() {
        // r = 5 mm, |B| = 4.0 nT; x-projection is dy/r = 4/5, sign negative
        // above the axis for positive current
        let p = beam_100ua();
        let bx = b_field_x(3e-3, 4e-3, &p);
        assert!((bx + 3.2e-9).abs() < 1e-12, "Bx = {bx:e}");
        // electron-like (negative) current flips the sign
        let p_neg = BeamParams::new(-100e-6, 1e-3, 0.0).unwrap();
        assert!((b_field_x(3e-3, 4e-3, &p_neg) - 3.2e-9).abs() < 1e-12);
    }

    #[test]
    fn ampere_loop_matches_enclosed_current() {
        // trapezoid rule around circles of several radii; the tangential
        // projection built from (Bx, By) must reproduce mu0 I (1 - e^{-R^2/w^2})
        let p = BeamParams {
            total_current: 100e-6,
            width_w: 1e-3,
            center_y0: 0.4e-3,
            center_x0: -0.2e-3,
        };
        let n = 4096;
        for rr in [0.5, 1.0, 3.0, 10.0] {
            let radius = rr * p.width_w;
            let mut line_integral = 0.0;
            for k in 0..n {
                let th = 2.0 * PI * (k as f64) / n as f64;
                let x = p.center_x0 + radius * th.cos();
                let y = p.center_y0 + radius * th.sin();
                let (tx, ty) = (-th.sin(), th.cos());
                line_integral += b_field_x(x, y, &p) * tx + b_field_y(x, y, &p) * ty;
            }
            line_integral *= 2.0 * PI * radius / n as f64;
            let expected = MU_0 * p.total_current * (1.0 - (-(rr * rr)).exp());
            assert!(
                ((line_integral - expected) / expected).abs() < 1e-8,
                "R = {rr}w: {line_integral:e} vs {expected:e}"
            );
        }
    }

    #[test]
    fn field_maximum_matches_bisection_oracle() {
        // |B| peaks where 2 t = e^t - 1 with t = (r/w)^2; bisect for t
        let (mut lo, mut hi) = (0.5f64, 3.0f64);
        let g = |t: f64| 2.0 * t - t.exp_m1();
        assert!(g(lo) > 0.0 && g(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let r_star = 0.5 * (lo + hi);
        let p = beam_100ua();
        let r_oracle = p.width_w * r_star.sqrt();

        // grid argmax of the implementation
        let n = 20000;
        let rmax = 4.0 * p.width_w;
        let step = rmax / n as f64;
        let (mut best_r, mut best_b) = (0.0, 0.0);
        for i in 1..=n {
            let r = i as f64 * step;
            let b = b_field_magnitude(0.0, r, &p);
            if b > best_b {
                best_b = b;
                best_r = r;
            }
        }
        assert!(
            (best_r - r_oracle).abs() <= step,
            "argmax {best_r:e} vs oracle {r_oracle:e}"
        );
    }

    proptest! {
        #[test]
        fn bx_antisymmetric_about_axis(delta in 1e-6f64..5e-3, x in -0.02f64..0.02) {
            let p = beam_100ua();
            let above = b_field_x(x, p.center_y0 + delta, &p);
            let below = b_field_x(x, p.center_y0 - delta, &p);
            prop_assert!((above + below).abs() <= 1e-18 + 1e-12 * above.abs());
        }
    }
}
