//! Optical-magnetometry diagnostics for charged-particle beams.
//!
//! An electron beam passing through a Rb vapor cell imprints its magnetic
//! field on the vapor's spin state; a transverse probe laser picks the field
//! up as a polarization rotation, imaged by a balanced polarimeter onto a
//! camera. This crate forward-models that measurement and inverts it:
//!
//! * [`field`] — Gaussian beam current density and its magnetostatic field;
//! * [`signal`] — the path-integrated rotation signal, in closed form and by
//!   adaptive quadrature;
//! * [`atomic`] — the Rb Lambda-system response and the beta(y, z)
//!   calibration map;
//! * [`imaging`] — balanced-polarimeter frame synthesis with camera noise,
//!   and the inversion back to masked rotation / normalized maps;
//! * [`fit`] — erf-model least squares recovering beam current, centroid and
//!   width with uncertainties;
//! * [`fluorescence`] — the electron-impact fluorescence cross-check;
//! * [`sensitivity`] — shot-noise-limited sensitivity budget and noise
//!   spectra;
//! * [`scenario`] / [`cli`] — end-to-end pipelines behind the `nmor-beam`
//!   binary and the runnable examples.
//!
//! Everything is deterministic under a fixed seed: noise streams are keyed
//! by (seed, frame, pixel), so outputs are byte-stable across runs and
//! execution orders.

pub mod atomic;
pub mod cli;
pub mod consts;
pub mod field;
pub mod fit;
pub mod fluorescence;
pub mod grid;
pub mod imaging;
pub mod io;
pub mod lm;
pub mod quad;
pub mod rng;
pub mod scenario;
pub mod sensitivity;
pub mod signal;
pub mod special;
