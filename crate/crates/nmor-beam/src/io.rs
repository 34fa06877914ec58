//! On-disk formats.
//!
//! * Frames: 16-bit binary PGM (`P5`, big-endian samples, maxval 65535) —
//!   width is the z pixel count, height the y pixel count.
//! * Maps (rotation / normalized / response): raw little-endian f64 arrays
//!   (`.f64`) with a one-byte-per-pixel mask file (`.mask`).
//! * Every payload has a sidecar text file with the same basename: UTF-8
//!   `key = value` lines whose order is fixed, so write -> read -> write is
//!   byte-identical. Floats are printed with Rust's shortest round-trip
//!   formatting, which `parse::<f64>()` recovers exactly.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::grid::{GridSpec, MaskedMap};
use crate::imaging::{BeamState, CameraConfig, Channel, Frame};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: missing key '{key}'")]
    MissingKey { path: PathBuf, key: String },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl IoError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn format(path: &Path, message: impl Into<String>) -> Self {
        IoError::Format {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }
}

// ---------------------------------------------------------------------------
// sidecar key/value files
// ---------------------------------------------------------------------------

/// Ordered key/value metadata; order is part of the byte format.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Sidecar {
    pub entries: Vec<(String, String)>,
}

impl Sidecar {
    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require(&self, path: &Path, key: &str) -> Result<&str, IoError> {
        self.get(key).ok_or_else(|| IoError::MissingKey {
            path: path.to_path_buf(),
            key: key.to_string(),
        })
    }

    pub fn parse_f64(&self, path: &Path, key: &str) -> Result<f64, IoError> {
        let raw = self.require(path, key)?;
        raw.parse().map_err(|_| {
            IoError::format(path, format!("key '{key}': '{raw}' is not a number"))
        })
    }

    pub fn parse_usize(&self, path: &Path, key: &str) -> Result<usize, IoError> {
        let raw = self.require(path, key)?;
        raw.parse()
            .map_err(|_| IoError::format(path, format!("key '{key}': '{raw}' is not an integer")))
    }

    pub fn parse_u64(&self, path: &Path, key: &str) -> Result<u64, IoError> {
        let raw = self.require(path, key)?;
        raw.parse()
            .map_err(|_| IoError::format(path, format!("key '{key}': '{raw}' is not an integer")))
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| IoError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Sidecar, IoError> {
        let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once(" = ").ok_or_else(|| IoError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: "expected 'key = value'".into(),
            })?;
            entries.push((k.to_string(), v.to_string()));
        }
        Ok(Sidecar { entries })
    }
}

// ---------------------------------------------------------------------------
// 16-bit PGM frames
// ---------------------------------------------------------------------------

/// Write a 16-bit binary PGM. Values are rounded and clamped to [0, 65535].
pub fn write_pgm(path: &Path, ny: usize, nz: usize, data: &[f64]) -> Result<(), IoError> {
    debug_assert_eq!(data.len(), ny * nz);
    let mut bytes = Vec::with_capacity(32 + 2 * data.len());
    bytes.extend_from_slice(format!("P5\n{nz} {ny}\n65535\n").as_bytes());
    for &v in data {
        let dn = v.round().clamp(0.0, 65535.0) as u16;
        bytes.extend_from_slice(&dn.to_be_bytes());
    }
    let mut f = fs::File::create(path).map_err(|e| IoError::io(path, e))?;
    f.write_all(&bytes).map_err(|e| IoError::io(path, e))
}

/// Read a 16-bit binary PGM written by [`write_pgm`].
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u16>), IoError> {
    let bytes = fs::read(path).map_err(|e| IoError::io(path, e))?;
    // header: three whitespace-separated tokens after the magic
    let mut pos = 0usize;
    let mut token = |bytes: &[u8]| -> Result<String, IoError> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(IoError::format(path, "truncated PGM header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token(&bytes)?;
    if magic != "P5" {
        return Err(IoError::format(path, format!("not a P5 PGM (magic '{magic}')")));
    }
    let nz: usize = token(&bytes)?
        .parse()
        .map_err(|_| IoError::format(path, "bad width"))?;
    let ny: usize = token(&bytes)?
        .parse()
        .map_err(|_| IoError::format(path, "bad height"))?;
    let maxval: usize = token(&bytes)?
        .parse()
        .map_err(|_| IoError::format(path, "bad maxval"))?;
    if maxval != 65535 {
        return Err(IoError::format(path, format!("expected maxval 65535, got {maxval}")));
    }
    pos += 1; // single whitespace after maxval
    let need = 2 * ny * nz;
    if bytes.len() - pos < need {
        return Err(IoError::format(
            path,
            format!("expected {need} sample bytes, found {}", bytes.len() - pos),
        ));
    }
    let data = bytes[pos..pos + need]
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect();
    Ok((ny, nz, data))
}

// ---------------------------------------------------------------------------
// frames with sidecars
// ---------------------------------------------------------------------------

const FORMAT_VERSION: &str = "1";

fn frame_sidecar(frame: &Frame) -> Sidecar {
    let c = &frame.config;
    let mut s = Sidecar::default();
    s.push("format_version", FORMAT_VERSION);
    s.push("kind", "frame");
    s.push("channel", frame.channel.label());
    s.push("beam_state", frame.beam_state.label());
    s.push("acquisition_index", frame.acquisition_index);
    s.push("pixels_y", c.pixels_y);
    s.push("pixels_z", c.pixels_z);
    s.push("pixel_pitch_m", c.pixel_pitch);
    s.push("magnification", c.magnification);
    s.push("exposure_s", c.exposure);
    s.push("wavelength_m", c.wavelength);
    s.push("quantum_efficiency", c.quantum_efficiency);
    s.push("read_noise_e", c.read_noise);
    s.push("gain_e_per_dn", c.gain);
    s.push("bit_depth", c.bit_depth);
    s.push("rng_seed", c.rng_seed);
    s.push("saturated_pixels", frame.saturated_pixels);
    s
}

/// Write `<basename>.pgm` and `<basename>.txt`.
pub fn save_frame(dir: &Path, basename: &str, frame: &Frame) -> Result<(), IoError> {
    let grid = frame.grid();
    write_pgm(&dir.join(format!("{basename}.pgm")), grid.ny, grid.nz, &frame.data)?;
    frame_sidecar(frame).write(&dir.join(format!("{basename}.txt")))
}

/// Load a frame written by [`save_frame`].
pub fn load_frame(dir: &Path, basename: &str) -> Result<Frame, IoError> {
    let sidecar_path = dir.join(format!("{basename}.txt"));
    let s = Sidecar::read(&sidecar_path)?;
    let p = &sidecar_path;
    let channel = match s.require(p, "channel")? {
        "ch1" => Channel::Ch1,
        "ch2" => Channel::Ch2,
        other => return Err(IoError::format(p, format!("unknown channel '{other}'"))),
    };
    let beam_state = match s.require(p, "beam_state")? {
        "on" => BeamState::On,
        "off" => BeamState::Off,
        other => return Err(IoError::format(p, format!("unknown beam_state '{other}'"))),
    };
    let config = CameraConfig {
        pixels_y: s.parse_usize(p, "pixels_y")?,
        pixels_z: s.parse_usize(p, "pixels_z")?,
        pixel_pitch: s.parse_f64(p, "pixel_pitch_m")?,
        magnification: s.parse_f64(p, "magnification")?,
        exposure: s.parse_f64(p, "exposure_s")?,
        wavelength: s.parse_f64(p, "wavelength_m")?,
        quantum_efficiency: s.parse_f64(p, "quantum_efficiency")?,
        read_noise: s.parse_f64(p, "read_noise_e")?,
        gain: s.parse_f64(p, "gain_e_per_dn")?,
        bit_depth: s.parse_u64(p, "bit_depth")? as u32,
        rng_seed: s.parse_u64(p, "rng_seed")?,
    };
    let pgm_path = dir.join(format!("{basename}.pgm"));
    let (ny, nz, raw) = read_pgm(&pgm_path)?;
    if ny != config.pixels_y || nz != config.pixels_z {
        return Err(IoError::format(
            &pgm_path,
            format!(
                "PGM is {ny}x{nz} but sidecar says {}x{}",
                config.pixels_y, config.pixels_z
            ),
        ));
    }
    Ok(Frame {
        data: raw.into_iter().map(f64::from).collect(),
        channel,
        beam_state,
        config,
        acquisition_index: s.parse_u64(p, "acquisition_index")? as u32,
        saturated_pixels: s.parse_usize(p, "saturated_pixels")?,
    })
}

// ---------------------------------------------------------------------------
// masked maps with sidecars
// ---------------------------------------------------------------------------

/// Write `<basename>.f64`, `<basename>.mask` and `<basename>.txt`.
pub fn save_masked_map(
    dir: &Path,
    basename: &str,
    kind: &str,
    units: &str,
    map: &MaskedMap,
) -> Result<(), IoError> {
    let data_path = dir.join(format!("{basename}.f64"));
    let mut bytes = Vec::with_capacity(8 * map.data.len());
    for v in &map.data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(&data_path, bytes).map_err(|e| IoError::io(&data_path, e))?;

    let mask_path = dir.join(format!("{basename}.mask"));
    let mask_bytes: Vec<u8> = map.mask.iter().map(|&m| u8::from(m)).collect();
    fs::write(&mask_path, mask_bytes).map_err(|e| IoError::io(&mask_path, e))?;

    let mut s = Sidecar::default();
    s.push("format_version", FORMAT_VERSION);
    s.push("kind", kind);
    s.push("units", units);
    s.push("pixels_y", map.grid.ny);
    s.push("pixels_z", map.grid.nz);
    s.push("step_y_m", map.grid.step_y);
    s.push("step_z_m", map.grid.step_z);
    s.write(&dir.join(format!("{basename}.txt")))
}

/// Load a map written by [`save_masked_map`]; returns (kind, map).
pub fn load_masked_map(dir: &Path, basename: &str) -> Result<(String, MaskedMap), IoError> {
    let sidecar_path = dir.join(format!("{basename}.txt"));
    let s = Sidecar::read(&sidecar_path)?;
    let p = &sidecar_path;
    let kind = s.require(p, "kind")?.to_string();
    let grid = GridSpec {
        ny: s.parse_usize(p, "pixels_y")?,
        nz: s.parse_usize(p, "pixels_z")?,
        step_y: s.parse_f64(p, "step_y_m")?,
        step_z: s.parse_f64(p, "step_z_m")?,
    };

    let data_path = dir.join(format!("{basename}.f64"));
    let bytes = fs::read(&data_path).map_err(|e| IoError::io(&data_path, e))?;
    if bytes.len() != 8 * grid.len() {
        return Err(IoError::format(
            &data_path,
            format!("expected {} bytes, found {}", 8 * grid.len(), bytes.len()),
        ));
    }
    let data: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();

    let mask_path = dir.join(format!("{basename}.mask"));
    let mask_bytes = fs::read(&mask_path).map_err(|e| IoError::io(&mask_path, e))?;
    if mask_bytes.len() != grid.len() {
        return Err(IoError::format(
            &mask_path,
            format!("expected {} bytes, found {}", grid.len(), mask_bytes.len()),
        ));
    }
    Ok((
        kind,
        MaskedMap {
            grid,
            data,
            mask: mask_bytes.into_iter().map(|b| b != 0).collect(),
        },
    ))
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Append one CSV row, writing the header first if the file doesn't exist.
pub fn append_csv_row(path: &Path, header: &str, row: &str) -> Result<(), IoError> {
    let exists = path.exists();
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| IoError::io(path, e))?;
    if !exists {
        writeln!(f, "{header}").map_err(|e| IoError::io(path, e))?;
    }
    writeln!(f, "{row}").map_err(|e| IoError::io(path, e))
}

/// Read a two-column CSV of numbers (skipping the header line).
pub fn read_csv_columns(path: &Path) -> Result<Vec<Vec<f64>>, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for cell in line.split(',') {
            let cell = cell.trim();
            row.push(cell.parse::<f64>().map_err(|_| IoError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("'{cell}' is not a number"),
            })?);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Collect `basename -> (channel, beam_state)` for every frame sidecar in a
/// directory.
pub fn scan_frames(dir: &Path) -> Result<BTreeMap<String, (String, String)>, IoError> {
    let mut out = BTreeMap::new();
    let entries = fs::read_dir(dir).map_err(|e| IoError::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| IoError::io(dir, e))?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) != Some("txt") {
            continue;
        }
        let s = match Sidecar::read(&path) {
            Ok(s) => s,
            Err(_) => continue,
        };
        if s.get("kind") != Some("frame") {
            continue;
        }
        if let (Some(base), Some(ch), Some(bs)) = (
            path.file_stem().and_then(|b| b.to_str()),
            s.get("channel"),
            s.get("beam_state"),
        ) {
            out.insert(base.to_string(), (ch.to_string(), bs.to_string()));
        }
    }
    Ok(out)
}
