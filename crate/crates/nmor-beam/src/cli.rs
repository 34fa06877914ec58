//! Command-line pipelines behind the `nmor-beam` binary.
//!
//! Subcommands:
//!
//! * `simulate`    — scenario -> four polarimeter frames + response map + truth record
//! * `reconstruct` — frames + response map -> rotation map -> normalized map -> beam fit
//! * `sweep`       — repeat simulate+reconstruct over a parameter list, with the
//!   fluorescence cross-check and zero-intercept regressions
//! * `sensitivity` — shot-noise rotation floor, minimum detectable current,
//!   and the noise spectrum table
//! * `calibrate`   — write the beta(y, z) response map for a scenario
//!
//! Exit codes: 0 success, 2 configuration/input error, 3 I/O error,
//! 4 numerical non-convergence. Everything is driven by flags and files; no
//! environment variables are consulted.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::atomic::{beta_at, calibrate_beta, ResponseMap};
use crate::field::BeamParams;
use crate::fit::{fit_erf_model, fwhm_from_w, regression_compare, FitResult, Regression};
use crate::fluorescence::{fit_fluorescence, synthesize_fluorescence, FluorescenceFit};
use crate::grid::ScalarMap;
use crate::imaging::{
    laser_profile, normalize_map, rotation_from_frames_with, synthesize_frame_pair, BeamState,
    Frame, InversionModel, NormalizedMap, RotationMap,
};
use crate::io::{
    append_csv_row, load_frame, load_masked_map, save_frame, save_masked_map, scan_frames,
    IoError, Sidecar,
};
use crate::rng::mix;
use crate::scenario::{Scenario, ScenarioError};
use crate::sensitivity::{
    min_detectable_current, noise_spectrum_model, noise_spectrum_realization,
    pipeline_responsivity, shot_noise_rotation, SensitivityInputs, ShotNoiseSource,
};
use crate::signal::{check_closed_form_domain, closed_form_signal, quadrature_signal};
use crate::consts::MU_0;

/// Fraction of in-mask pixels allowed to clip before a saturation warning.
pub const SATURATION_WARN_FRACTION: f64 = 1e-3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    NonConvergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::NonConvergence(_) => 4,
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

// ---------------------------------------------------------------------------
// in-memory pipeline shared by simulate / sweep / the test suites
// ---------------------------------------------------------------------------

/// Everything one simulated acquisition produces.
pub struct Measurement {
    pub laser: ScalarMap,
    /// Masked calibration map, as a real calibration run would produce.
    pub response: ResponseMap,
    /// Dense rotation field used for synthesis (no mask; rotation exists
    /// wherever light goes).
    pub phi_true: ScalarMap,
    /// ch1/ch2 beam-on, then ch1/ch2 beam-off.
    pub frames: [Frame; 4],
}

impl Measurement {
    pub fn on_pair(&self) -> (&Frame, &Frame) {
        (&self.frames[0], &self.frames[1])
    }

    pub fn off_pair(&self) -> (&Frame, &Frame) {
        (&self.frames[2], &self.frames[3])
    }
}

/// Synthesize the four polarimeter frames plus calibration data for a
/// scenario. The normalized signal profile comes from the closed form when
/// the beam is centered on the probe path, and from the quadrature route
/// when `center_x0 != 0` (where the closed form carries a known bias).
pub fn synthesize_measurement(s: &Scenario) -> Result<Measurement, CliError> {
    let laser = laser_profile(&s.camera, &s.geometry, s.laser_peak_intensity);
    let response = calibrate_beta(s.calibration_field, &laser, &s.atoms, s.response_model)
        .map_err(|e| CliError::Config(e.to_string()))?;

    let grid = s.camera.grid();
    let mut profile = Vec::with_capacity(grid.ny);
    if s.beam.center_x0 == 0.0 {
        for iy in 0..grid.ny {
            profile.push(closed_form_signal(grid.y(iy), &s.beam, &s.geometry));
        }
    } else {
        for iy in 0..grid.ny {
            let v = quadrature_signal(grid.y(iy), &s.beam, &s.geometry, 1e-9)
                .map_err(|e| CliError::NonConvergence(e.to_string()))?;
            profile.push(v);
        }
    }

    let mut phi_true = ScalarMap::zeros(grid);
    for iy in 0..grid.ny {
        for iz in 0..grid.nz {
            let px = grid.idx(iy, iz);
            let beta = beta_at(
                laser.data[px].max(1e-300),
                s.calibration_field,
                &s.atoms,
                s.response_model,
            );
            phi_true.data[px] = MU_0 * beta * profile[iy];
        }
    }

    let (on1, on2) = synthesize_frame_pair(&phi_true, &laser, &s.camera, BeamState::On, 0, s.noise_on)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let (off1, off2) =
        synthesize_frame_pair(&phi_true, &laser, &s.camera, BeamState::Off, 1, s.noise_on)
            .map_err(|e| CliError::Config(e.to_string()))?;

    Ok(Measurement {
        laser,
        response,
        phi_true,
        frames: [on1, on2, off1, off2],
    })
}

/// Invert a measurement back to the fitted beam parameters.
pub fn reconstruct_measurement(
    m: &Measurement,
    s: &Scenario,
    mask_threshold: f64,
    inversion: InversionModel,
) -> Result<(RotationMap, NormalizedMap, FitResult), CliError> {
    let rotation = rotation_from_frames_with(m.on_pair(), m.off_pair(), mask_threshold, inversion)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let normalized = normalize_map(&rotation, &m.response)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let fit = fit_erf_model(&normalized, &s.geometry, &s.fit)
        .map_err(|e| CliError::NonConvergence(e.to_string()))?;
    Ok((rotation, normalized, fit))
}

// ---------------------------------------------------------------------------
// subcommand: simulate
// ---------------------------------------------------------------------------

pub struct SimulateOutput {
    pub out_dir: PathBuf,
    pub saturation_warnings: Vec<String>,
}

pub const FRAME_BASENAMES: [&str; 4] = [
    "frame_ch1_on",
    "frame_ch2_on",
    "frame_ch1_off",
    "frame_ch2_off",
];

pub fn cmd_simulate(s: &Scenario, out_dir: &Path) -> Result<SimulateOutput, CliError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
    let m = synthesize_measurement(s)?;

    let mut warnings = Vec::new();
    let mask_pixels = m.response.beta.valid_count();
    for (frame, base) in m.frames.iter().zip(FRAME_BASENAMES) {
        if frame.saturation_fraction(mask_pixels) > SATURATION_WARN_FRACTION {
            warnings.push(format!(
                "{base}: {} of {} masked pixels saturated",
                frame.saturated_pixels, mask_pixels
            ));
        }
        save_frame(out_dir, base, frame)?;
    }
    save_masked_map(out_dir, "beta", "response_map", "rad_per_t_m", &m.response.beta)?;

    let mut truth = Sidecar::default();
    truth.push("kind", "truth");
    truth.push("total_current_a", s.beam.total_current);
    truth.push("center_y0_m", s.beam.center_y0);
    truth.push("width_w_m", s.beam.width_w);
    truth.push("center_x0_m", s.beam.center_x0);
    truth.push("energy_kev", s.beam_energy_kev);
    truth.push("seed", s.seed);
    truth.push("noise_on", s.noise_on);
    truth.push(
        "response_model",
        match s.response_model {
            crate::atomic::ResponseModel::Linear => "linear",
            crate::atomic::ResponseModel::Eit => "eit",
        },
    );
    truth.push("laser_peak_w_m2", s.laser_peak_intensity);
    truth.write(&out_dir.join("truth.txt"))?;

    Ok(SimulateOutput {
        out_dir: out_dir.to_path_buf(),
        saturation_warnings: warnings,
    })
}

// ---------------------------------------------------------------------------
// subcommand: reconstruct
// ---------------------------------------------------------------------------

pub struct ReconstructOutput {
    pub fit: FitResult,
    pub fwhm: f64,
    pub report_path: PathBuf,
    pub csv_path: PathBuf,
}

pub const RESULT_CSV_HEADER: &str =
    "I0_A,I0_err,y0_m,y0_err,w_m,w_err,fwhm_m,residual,iterations,converged";

fn locate_frames(dir: &Path) -> Result<[Frame; 4], CliError> {
    let found = scan_frames(dir)?;
    let mut frames = Vec::with_capacity(4);
    let mut missing = Vec::new();
    for (ch, bs) in [("ch1", "on"), ("ch2", "on"), ("ch1", "off"), ("ch2", "off")] {
        let hit = found
            .iter()
            .find(|(_, (c, b))| c == ch && b == bs)
            .map(|(base, _)| base.clone());
        match hit {
            Some(base) => frames.push(load_frame(dir, &base)?),
            None => missing.push(format!("channel {ch} beam {bs}")),
        }
    }
    if !missing.is_empty() {
        return Err(CliError::Config(format!(
            "{}: missing frames: {}",
            dir.display(),
            missing.join(", ")
        )));
    }
    Ok(frames.try_into().map_err(|_| CliError::Config("frame set incomplete".into()))?)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_reconstruct(
    frames_dir: &Path,
    beta_base: &Path,
    s: &Scenario,
    mask_threshold: f64,
    exact_inversion: bool,
    out_dir: &Path,
) -> Result<ReconstructOutput, CliError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
    let [on1, on2, off1, off2] = locate_frames(frames_dir)?;

    let beta_dir = beta_base.parent().unwrap_or(Path::new("."));
    let beta_name = beta_base
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| CliError::Config(format!("bad beta path {}", beta_base.display())))?;
    let (kind, beta_map) = load_masked_map(beta_dir, beta_name)?;
    if kind != "response_map" {
        return Err(CliError::Config(format!(
            "{}: expected kind response_map, found {kind}",
            beta_base.display()
        )));
    }
    let response = ResponseMap { beta: beta_map };

    let inversion = if exact_inversion {
        InversionModel::Exact
    } else {
        InversionModel::PaperArcsin
    };
    let rotation = rotation_from_frames_with((&on1, &on2), (&off1, &off2), mask_threshold, inversion)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let normalized =
        normalize_map(&rotation, &response).map_err(|e| CliError::Config(e.to_string()))?;

    save_masked_map(out_dir, "rotation", "rotation_map", "rad", &rotation.phi)?;
    save_masked_map(out_dir, "normalized", "normalized_map", "a", &normalized.signal)?;

    let fit = fit_erf_model(&normalized, &s.geometry, &s.fit)
        .map_err(|e| CliError::NonConvergence(e.to_string()))?;
    let fwhm = fwhm_from_w(fit.width_w);

    let mut report = Sidecar::default();
    report.push("kind", "fit_report");
    report.push("current_a", fit.current);
    report.push("current_err_a", fit.current_err);
    report.push("center_y0_m", fit.center_y0);
    report.push("center_y0_err_m", fit.center_y0_err);
    report.push("width_w_m", fit.width_w);
    report.push("width_w_err_m", fit.width_w_err);
    report.push("fwhm_m", fwhm);
    report.push("residual_norm_a", fit.residual_norm);
    report.push("iterations", fit.iterations);
    report.push("converged", fit.converged);
    report.push("mask_threshold", mask_threshold);
    report.push(
        "inversion",
        if exact_inversion { "exact" } else { "arcsin_half" },
    );
    let report_path = out_dir.join("report.txt");
    report.write(&report_path)?;

    let csv_path = out_dir.join("results.csv");
    append_csv_row(
        &csv_path,
        RESULT_CSV_HEADER,
        &format!(
            "{},{},{},{},{},{},{},{},{},{}",
            fit.current,
            fit.current_err,
            fit.center_y0,
            fit.center_y0_err,
            fit.width_w,
            fit.width_w_err,
            fwhm,
            fit.residual_norm,
            fit.iterations,
            fit.converged
        ),
    )?;

    let out = ReconstructOutput {
        fwhm,
        report_path,
        csv_path,
        fit,
    };
    if !out.fit.converged {
        return Err(CliError::NonConvergence(format!(
            "fit did not converge in {} iterations (report written to {})",
            out.fit.iterations,
            out.report_path.display()
        )));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// subcommand: sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    /// Beam current; values in microamperes.
    TotalCurrent,
    /// Vertical beam position; values in millimeters.
    CenterY0,
    /// Electron kinetic energy; values in keV. The field model does not
    /// depend on it, so swept outputs are identical by construction.
    Energy,
}

pub struct SweepPoint {
    pub value: f64,
    pub truth: BeamParams,
    pub fit: Option<FitResult>,
    pub fluor: Option<FluorescenceFit>,
    pub error: Option<String>,
}

pub struct SweepOutput {
    pub points: Vec<SweepPoint>,
    pub nmor_vs_truth: Option<Regression>,
    pub nmor_vs_fluorescence: Option<Regression>,
    pub csv_path: PathBuf,
}

pub const SWEEP_CSV_HEADER: &str = "param,value,I0_true_A,y0_true_m,w_true_m,I0_fit_A,I0_err,\
y0_fit_m,y0_err,w_fit_m,w_err,fwhm_m,converged,y0_fluor_m,y0_fluor_err,w_fluor_m,w_fluor_err,status";

pub fn cmd_sweep(
    base: &Scenario,
    param: SweepParam,
    values: &[f64],
    out_dir: &Path,
) -> Result<SweepOutput, CliError> {
    if values.is_empty() {
        return Err(CliError::Config("sweep needs at least one value".into()));
    }
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;

    let param_name = match param {
        SweepParam::TotalCurrent => "total_current",
        SweepParam::CenterY0 => "center_y0",
        SweepParam::Energy => "energy",
    };

    let mut points = Vec::with_capacity(values.len());
    for (k, &value) in values.iter().enumerate() {
        let mut s = base.clone();
        match param {
            SweepParam::TotalCurrent => s.beam.total_current = value * 1e-6,
            SweepParam::CenterY0 => s.beam.center_y0 = value * 1e-3,
            SweepParam::Energy => s.beam_energy_kev = value,
        }
        // independent noise streams per point, reproducible from the base seed
        if s.noise_on {
            let point_seed = mix(&[base.seed, k as u64]);
            s.seed = point_seed;
            s.camera.rng_seed = point_seed;
            s.fluorescence.camera.rng_seed = point_seed.wrapping_add(1);
        }

        let result = synthesize_measurement(&s).and_then(|m| {
            let fit =
                reconstruct_measurement(&m, &s, crate::grid::DEFAULT_MASK_THRESHOLD, InversionModel::default())?
                    .2;
            let fluor_frame = synthesize_fluorescence(&s.beam, &s.fluorescence, s.noise_on)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let fluor =
                fit_fluorescence(&fluor_frame).map_err(|e| CliError::NonConvergence(e.to_string()))?;
            Ok((fit, fluor))
        });
        match result {
            Ok((fit, fluor)) => points.push(SweepPoint {
                value,
                truth: s.beam,
                fit: Some(fit),
                fluor: Some(fluor),
                error: None,
            }),
            Err(e) => points.push(SweepPoint {
                value,
                truth: s.beam,
                fit: None,
                fluor: None,
                error: Some(e.to_string()),
            }),
        }
    }

    // per-point rows, single ordered writer
    let csv_path = out_dir.join("sweep.csv");
    for p in &points {
        let (fit_cols, fwhm, conv) = match &p.fit {
            Some(f) => (
                format!(
                    "{},{},{},{},{},{}",
                    f.current, f.current_err, f.center_y0, f.center_y0_err, f.width_w, f.width_w_err
                ),
                format!("{}", fwhm_from_w(f.width_w)),
                format!("{}", f.converged),
            ),
            None => (",,,,,".into(), String::new(), String::new()),
        };
        let fluor_cols = match &p.fluor {
            Some(f) => format!(
                "{},{},{},{}",
                f.center_y0, f.center_y0_err, f.width_w, f.width_w_err
            ),
            None => ",,,".into(),
        };
        let status = p.error.clone().unwrap_or_else(|| "ok".into());
        append_csv_row(
            &csv_path,
            SWEEP_CSV_HEADER,
            &format!(
                "{param_name},{},{},{},{},{fit_cols},{fwhm},{conv},{fluor_cols},{status}",
                p.value, p.truth.total_current, p.truth.center_y0, p.truth.width_w
            ),
        )?;
    }

    // regressions over the successful points
    let ok: Vec<&SweepPoint> = points.iter().filter(|p| p.fit.is_some()).collect();
    let (nmor_vs_truth, nmor_vs_fluorescence) = match param {
        SweepParam::TotalCurrent => {
            let x: Vec<f64> = ok.iter().map(|p| p.truth.total_current).collect();
            let y: Vec<f64> = ok.iter().map(|p| p.fit.as_ref().unwrap().current).collect();
            (regression_compare(&x, &y).ok(), None)
        }
        SweepParam::CenterY0 => {
            let truth: Vec<f64> = ok.iter().map(|p| p.truth.center_y0).collect();
            let nmor: Vec<f64> = ok.iter().map(|p| p.fit.as_ref().unwrap().center_y0).collect();
            let fluor: Vec<f64> = ok
                .iter()
                .map(|p| p.fluor.as_ref().unwrap().center_y0)
                .collect();
            (
                regression_compare(&truth, &nmor).ok(),
                regression_compare(&fluor, &nmor).ok(),
            )
        }
        SweepParam::Energy => (None, None),
    };

    let mut summary = Sidecar::default();
    summary.push("kind", "sweep_summary");
    summary.push("param", param_name);
    summary.push("points", points.len());
    summary.push(
        "failed_points",
        points.iter().filter(|p| p.error.is_some()).count(),
    );
    if let Some(r) = &nmor_vs_truth {
        summary.push("slope_nmor_vs_truth", r.slope);
        summary.push("slope_nmor_vs_truth_err", r.slope_err);
    }
    if let Some(r) = &nmor_vs_fluorescence {
        summary.push("slope_nmor_vs_fluorescence", r.slope);
        summary.push("slope_nmor_vs_fluorescence_err", r.slope_err);
    }
    summary.write(&out_dir.join("sweep_summary.txt"))?;

    // diff-able plot script instead of a binary image
    let gp = format!(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel '{param_name}'\n\
         set ylabel 'fitted value'\n\
         plot 'sweep.csv' using 2:6 with points title 'I0 fit (A)', \\\n     \
         'sweep.csv' using 2:8 with points title 'y0 fit (m)'\n"
    );
    std::fs::write(out_dir.join("sweep.gp"), gp)
        .map_err(|e| CliError::Io(format!("sweep.gp: {e}")))?;

    Ok(SweepOutput {
        points,
        nmor_vs_truth,
        nmor_vs_fluorescence,
        csv_path,
    })
}

// ---------------------------------------------------------------------------
// subcommand: sensitivity
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    /// Laser power on the detector (W); pairs with --efficiency.
    #[arg(long)]
    pub power: Option<f64>,
    /// Detector quantum efficiency for --power.
    #[arg(long)]
    pub efficiency: Option<f64>,
    /// Total photocurrent (A); alternative to --power.
    #[arg(long)]
    pub photocurrent: Option<f64>,
    /// Responsivity S (rad per A of beam current). Without it, S is
    /// estimated from the scenario's simulation pipeline.
    #[arg(long)]
    pub responsivity: Option<f64>,
    /// Detector dark floor, beam-current referred (A/sqrt(Hz)).
    #[arg(long, default_value_t = 1e-9)]
    pub dark_floor: f64,
    /// 1/f corner frequency (Hz); 0 disables the flicker term.
    #[arg(long, default_value_t = 10.0)]
    pub flicker_corner: f64,
    /// Spectrum frequency range (Hz).
    #[arg(long, default_value_t = 0.1)]
    pub fmin: f64,
    #[arg(long, default_value_t = 1e4)]
    pub fmax: f64,
    #[arg(long, default_value_t = 200)]
    pub spectrum_points: usize,
    /// Also write a seeded spectrum realization table.
    #[arg(long)]
    pub realize: bool,
}

pub struct SensitivityOutput {
    pub responsivity: f64,
    pub shot_noise_rad: f64,
    pub min_current_a: f64,
    pub spectrum_path: PathBuf,
}

pub fn cmd_sensitivity(
    args: &SensitivityArgs,
    s: &Scenario,
    out_dir: &Path,
) -> Result<SensitivityOutput, CliError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;

    let shot_source = match (args.power, args.photocurrent) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config(
                "--power and --photocurrent are mutually exclusive".into(),
            ))
        }
        (Some(p), None) => ShotNoiseSource::Power {
            power: p,
            efficiency: args.efficiency.unwrap_or(1.0),
        },
        (None, Some(i)) => {
            if args.efficiency.is_some() {
                return Err(CliError::Config(
                    "--efficiency only applies to --power".into(),
                ));
            }
            ShotNoiseSource::Photocurrent(i)
        }
        (None, None) => {
            return Err(CliError::Config(
                "one of --power or --photocurrent is required".into(),
            ))
        }
    };

    let responsivity = match args.responsivity {
        Some(r) if r > 0.0 => r,
        Some(r) => return Err(CliError::Config(format!("responsivity must be > 0 (got {r})"))),
        None => {
            let est = pipeline_responsivity(
                &s.beam,
                &s.geometry,
                &s.atoms,
                &s.camera,
                s.laser_peak_intensity,
                s.response_model,
            );
            if !(est.abs() > 1e-9) {
                return Err(CliError::Config(format!(
                    "pipeline responsivity {est:e} rad/A is degenerate (offset the beam \
                     vertically or pass --responsivity)"
                )));
            }
            est.abs()
        }
    };

    let shot = shot_noise_rotation(shot_source, s.atoms.wavelength)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let min_current = min_detectable_current(shot, responsivity);

    let inputs = SensitivityInputs {
        responsivity,
        wavelength: s.atoms.wavelength,
        shot: Some(shot_source),
        dark_floor: args.dark_floor,
        flicker_corner: args.flicker_corner,
    };
    if !(args.fmin > 0.0 && args.fmax > args.fmin && args.spectrum_points >= 2) {
        return Err(CliError::Config(
            "need 0 < fmin < fmax and at least two spectrum points".into(),
        ));
    }
    let ratio = (args.fmax / args.fmin).powf(1.0 / (args.spectrum_points - 1) as f64);
    let freqs: Vec<f64> = (0..args.spectrum_points)
        .map(|i| args.fmin * ratio.powi(i as i32))
        .collect();
    let asd = noise_spectrum_model(&inputs, &freqs).map_err(|e| CliError::Config(e.to_string()))?;

    let spectrum_path = out_dir.join("spectrum.csv");
    let mut body = String::from("frequency_hz,asd_A_per_rtHz\n");
    for (f, a) in freqs.iter().zip(asd.iter()) {
        body.push_str(&format!("{f},{a}\n"));
    }
    std::fs::write(&spectrum_path, body)
        .map_err(|e| CliError::Io(format!("{}: {e}", spectrum_path.display())))?;

    if args.realize {
        let real = noise_spectrum_realization(&inputs, &freqs, s.seed)
            .map_err(|e| CliError::Config(e.to_string()))?;
        let mut body = String::from("frequency_hz,asd_A_per_rtHz\n");
        for (f, a) in freqs.iter().zip(real.iter()) {
            body.push_str(&format!("{f},{a}\n"));
        }
        let p = out_dir.join("spectrum_realization.csv");
        std::fs::write(&p, body).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
    }

    let gp = "set datafile separator ','\nset key autotitle columnhead\nset logscale xy\n\
              set xlabel 'frequency (Hz)'\nset ylabel 'ASD (A/sqrt(Hz))'\n\
              plot 'spectrum.csv' using 1:2 with lines\n";
    std::fs::write(out_dir.join("spectrum.gp"), gp)
        .map_err(|e| CliError::Io(format!("spectrum.gp: {e}")))?;

    let mut report = Sidecar::default();
    report.push("kind", "sensitivity_report");
    report.push("responsivity_rad_per_a", responsivity);
    report.push("shot_noise_rad_per_rthz", shot);
    report.push("min_detectable_current_a_per_rthz", min_current);
    report.push("dark_floor_a_per_rthz", args.dark_floor);
    report.push("flicker_corner_hz", args.flicker_corner);
    report.write(&out_dir.join("sensitivity.txt"))?;

    Ok(SensitivityOutput {
        responsivity,
        shot_noise_rad: shot,
        min_current_a: min_current,
        spectrum_path,
    })
}

// ---------------------------------------------------------------------------
// subcommand: calibrate
// ---------------------------------------------------------------------------

pub fn cmd_calibrate(s: &Scenario, out_dir: &Path) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
    let laser = laser_profile(&s.camera, &s.geometry, s.laser_peak_intensity);
    let response = calibrate_beta(s.calibration_field, &laser, &s.atoms, s.response_model)
        .map_err(|e| CliError::Config(e.to_string()))?;
    save_masked_map(out_dir, "beta", "response_map", "rad_per_t_m", &response.beta)?;
    Ok(out_dir.join("beta"))
}

// ---------------------------------------------------------------------------
// argument parsing and dispatch
// ---------------------------------------------------------------------------

#[derive(Debug, Parser)]
#[command(
    name = "nmor-beam",
    version,
    about = "Polarization-rotation beam diagnostics: simulate, reconstruct, sweep, sensitivity"
)]
struct Cli {
    /// Scenario TOML file; built-in defaults when omitted.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Output directory (default ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress human-readable output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize polarimeter frames, response map, and truth record.
    Simulate,
    /// Invert a frame directory back to beam parameters.
    Reconstruct {
        /// Directory containing the four frame files.
        #[arg(long)]
        frames: PathBuf,
        /// Basename of the response map (e.g. out/beta).
        #[arg(long)]
        beta: PathBuf,
        /// Relative beam-off intensity mask threshold.
        #[arg(long, default_value_t = 0.05)]
        mask_threshold: f64,
        /// Use the exact polarimeter inverse instead of the arcsin-half form.
        #[arg(long)]
        exact_inversion: bool,
    },
    /// Simulate + reconstruct across a list of parameter values.
    Sweep {
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Comma-separated values (uA for current, mm for position, keV for energy).
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Shot-noise floor, minimum detectable current, and noise spectrum.
    Sensitivity(#[command(flatten)] Box<SensitivityArgs>),
    /// Write the beta(y, z) response map for the scenario.
    Calibrate,
}

fn load_scenario(cli: &Cli) -> Result<Scenario, CliError> {
    let mut s = match &cli.scenario {
        Some(path) => Scenario::load(path)?,
        None => Scenario::default(),
    };
    if let Some(seed) = cli.seed {
        s.seed = seed;
        s.camera.rng_seed = seed;
        s.fluorescence.camera.rng_seed = seed.wrapping_add(1);
    }
    Ok(s)
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let s = load_scenario(cli)?;
    let say = |msg: String| {
        if !cli.quiet {
            println!("{msg}");
        }
    };

    match &cli.command {
        Command::Simulate => {
            if let Err(e) = check_closed_form_domain(&s.beam, &s.geometry) {
                eprintln!("warning: {e}");
            }
            let out = cmd_simulate(&s, &out_dir)?;
            for w in &out.saturation_warnings {
                eprintln!("warning: {w}");
            }
            say(format!(
                "simulate: wrote 4 frames + response map + truth to {}",
                out.out_dir.display()
            ));
        }
        Command::Reconstruct {
            frames,
            beta,
            mask_threshold,
            exact_inversion,
        } => {
            let out = cmd_reconstruct(frames, beta, &s, *mask_threshold, *exact_inversion, &out_dir)?;
            say(format!(
                "reconstruct: I0 = {:.6e} ± {:.1e} A, y0 = {:.6e} ± {:.1e} m, w = {:.6e} ± {:.1e} m \
                 (FWHM {:.6e} m), {} iterations",
                out.fit.current,
                out.fit.current_err,
                out.fit.center_y0,
                out.fit.center_y0_err,
                out.fit.width_w,
                out.fit.width_w_err,
                out.fwhm,
                out.fit.iterations,
            ));
            say(format!("report: {}", out.report_path.display()));
        }
        Command::Sweep { param, values } => {
            let out = cmd_sweep(&s, *param, values, &out_dir)?;
            if let Some(r) = &out.nmor_vs_truth {
                say(format!(
                    "sweep: slope vs truth = {:.6} ± {:.6} over {} points",
                    r.slope, r.slope_err, r.points
                ));
            }
            if let Some(r) = &out.nmor_vs_fluorescence {
                say(format!(
                    "sweep: centroid slope vs fluorescence = {:.6} ± {:.6}",
                    r.slope, r.slope_err
                ));
            }
            say(format!("table: {}", out.csv_path.display()));
            let failed = out.points.iter().filter(|p| p.error.is_some()).count();
            if failed > 0 {
                return Err(CliError::NonConvergence(format!(
                    "{failed} of {} sweep points failed; see {}",
                    out.points.len(),
                    out.csv_path.display()
                )));
            }
        }
        Command::Sensitivity(args) => {
            let out = cmd_sensitivity(args, &s, &out_dir)?;
            say(format!(
                "sensitivity: S = {:.4e} rad/A, shot floor = {:.4e} rad/sqrt(Hz), \
                 min current = {:.4e} A/sqrt(Hz)",
                out.responsivity, out.shot_noise_rad, out.min_current_a
            ));
            say(format!("spectrum: {}", out.spectrum_path.display()));
        }
        Command::Calibrate => {
            let base = cmd_calibrate(&s, &out_dir)?;
            say(format!("calibrate: wrote {}.f64/.mask/.txt", base.display()));
        }
    }
    Ok(())
}

/// Entry point used by the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
