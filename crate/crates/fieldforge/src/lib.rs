//! Digital twin of a dual-channel resonant magnetic-field chamber.
//!
//! The crate designs the resonant compensation network, simulates the coupled
//! coil circuits under PWM drive, maps the magnetic field over the chamber
//! interior, and predicts coil and nanoparticle heating:
//!
//! - [`config`]: domain types, unit-suffixed config files, validation, and
//!   the declarative-layout to segment-geometry conversion.
//! - [`magnetics`]: finite-segment Biot-Savart fields, field maps with
//!   uniformity statistics, Neumann inductances, and the image-current
//!   ferrite model.
//! - [`resonance`]: compensation capacitance, capacitor-bank synthesis, and
//!   resonance prediction (closed form and simulated sweep).
//! - [`drive`]: PWM waveform synthesis, interleaved submodule scheduling, and
//!   RK4 transient simulation of the coupled channel loops.
//! - [`thermal`]: litz AC resistance, lumped coil heating, specific
//!   absorption rates, and the wall safety check.
//! - [`report`]: the consolidated design report.
//!
//! All types are immutable after construction and all operations are pure
//! functions of their inputs, so everything is safe to share across threads;
//! field maps and frequency sweeps parallelize internally via rayon.

pub mod config;
pub mod drive;
pub mod geom;
pub mod magnetics;
pub mod report;
pub mod resonance;
pub mod thermal;
pub mod units;

pub use config::{validate_config, ChamberConfig, ValidationReport};
pub use report::{DesignReport, ReportOptions};
