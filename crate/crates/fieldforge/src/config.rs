//! Domain types, configuration parsing/validation, and conversion of
//! declarative coil layouts into explicit segment geometry.
//!
//! Config files are TOML documents in which every dimensioned number is a
//! string with a unit suffix (see [`crate::units`]). All values are SI once
//! parsed.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{add, norm, scale, sub, Segment, Vec3};
use crate::units::{self, UnitError, UnitTable};

/// Loop endpoints closer than this are considered closed (m).
pub const LOOP_CLOSURE_TOLERANCE: f64 = 1e-9;

/// Packing fraction of copper inside a litz bundle cross-section, used to
/// derive the effective bundle radius from the strand count.
pub const LITZ_FILL_FACTOR: f64 = 0.5;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config syntax error: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("in {location}: {source}")]
    Unit { location: String, source: UnitError },
    #[error("winding #{coil_id}: layout has zero turns")]
    ZeroTurns { coil_id: u8 },
    #[error("winding #{coil_id}: degenerate footprint {side_a} m x {side_b} m")]
    DegenerateFootprint {
        coil_id: u8,
        side_a: f64,
        side_b: f64,
    },
    #[error("winding #{coil_id}: negative pitch {pitch} m")]
    NegativePitch { coil_id: u8, pitch: f64 },
    #[error("no winding with coil id {0}")]
    UnknownCoil(u8),
    #[error("no channel with id {0}")]
    UnknownChannel(u8),
    #[error("no network for channel {0}")]
    UnknownNetwork(u8),
    #[error("no sample named {0:?}")]
    UnknownSample(String),
}

// ---------------------------------------------------------------------------
// Domain types (all SI)
// ---------------------------------------------------------------------------

/// One drive channel of the chamber.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    /// Channel index (1 or 2).
    pub id: u8,
    /// Nominal resonant frequency (Hz).
    pub nominal_frequency: f64,
    /// Target flux density at chamber center (T, peak).
    pub target_field: f64,
    /// Rated coil current (A, peak).
    pub max_current: f64,
    /// Maximum PWM duty ratio, in (0, 1].
    pub max_duty: f64,
}

/// Litz wire construction of a winding.
#[derive(Debug, Clone, PartialEq)]
pub struct LitzWireSpec {
    /// Diameter of a single strand (m).
    pub strand_diameter: f64,
    /// Strands per bundle.
    pub strand_count: u32,
    /// Bundles connected in parallel.
    pub parallel_bundles: u32,
    /// Conductor resistivity (Ohm m).
    pub conductor_resistivity: f64,
}

impl LitzWireSpec {
    /// Total copper cross-section (m^2).
    pub fn copper_area(&self) -> f64 {
        let strand_area = PI * (self.strand_diameter / 2.0).powi(2);
        strand_area * self.strand_count as f64 * self.parallel_bundles as f64
    }

    /// Effective outer radius of the bundle (m), from the copper area and the
    /// litz packing fraction.
    pub fn bundle_radius(&self) -> f64 {
        (self.copper_area() / (PI * LITZ_FILL_FACTOR)).sqrt()
    }
}

/// Axis a rectangular-helix winding advances along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    /// Unit vector of the axis.
    pub fn unit(self) -> Vec3 {
        match self {
            Axis::X => [1.0, 0.0, 0.0],
            Axis::Y => [0.0, 1.0, 0.0],
            Axis::Z => [0.0, 0.0, 1.0],
        }
    }

    /// The two cross-section axes (u, v), chosen cyclically so the winding's
    /// positive circulation produces field along `+axis`.
    pub fn cross_axes(self) -> (Vec3, Vec3) {
        match self {
            Axis::X => ([0.0, 1.0, 0.0], [0.0, 0.0, 1.0]),
            Axis::Y => ([0.0, 0.0, 1.0], [1.0, 0.0, 0.0]),
            Axis::Z => ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]),
        }
    }
}

/// Declarative description of a rectangular-helix winding.
#[derive(Debug, Clone, PartialEq)]
pub struct RectHelixLayout {
    pub axis: Axis,
    /// Geometric center of the helix (m).
    pub center: Vec3,
    /// Side lengths of the rectangular cross-section along the two
    /// cross-section axes (m).
    pub footprint: [f64; 2],
    pub turns: u32,
    /// Axial advance per turn (m); 0 for stacked planar turns.
    pub pitch: f64,
}

/// A coil half as an explicit closed chain of straight segments.
#[derive(Debug, Clone, PartialEq)]
pub struct WindingGeometry {
    /// Coil identifier (#1..#4).
    pub coil_id: u8,
    /// Ordered segments. Every turn is present explicitly, so field and
    /// inductance kernels sum over segments at the terminal current without
    /// re-multiplying by `turns`.
    pub segments: Vec<Segment>,
    /// Number of turns represented in `segments`.
    pub turns: u32,
    pub wire: LitzWireSpec,
}

impl WindingGeometry {
    /// Total conductor length along the segment chain (m).
    pub fn conductor_length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    /// Gap between the end of the last segment and the start of the first (m).
    pub fn closure_gap(&self) -> f64 {
        match (self.segments.first(), self.segments.last()) {
            (Some(first), Some(last)) => norm(sub(last.end, first.start)),
            _ => f64::INFINITY,
        }
    }

    pub fn is_closed(&self) -> bool {
        self.closure_gap() <= LOOP_CLOSURE_TOLERANCE
    }

    /// Axis-aligned bounding box over all segment endpoints.
    pub fn bounding_box(&self) -> Option<(Vec3, Vec3)> {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for seg in &self.segments {
            for p in [seg.start, seg.end] {
                for k in 0..3 {
                    lo[k] = lo[k].min(p[k]);
                    hi[k] = hi[k].max(p[k]);
                }
            }
        }
        if self.segments.is_empty() {
            None
        } else {
            Some((lo, hi))
        }
    }
}

/// Build the explicit segment chain for a rectangular helix.
///
/// Each turn is a closed planar rectangle at its own axial offset; turns are
/// chained by axial risers and a final riser closes the loop, so the whole
/// path satisfies the loop-closure invariant for any pitch.
pub fn build_winding(
    coil_id: u8,
    layout: &RectHelixLayout,
    wire: LitzWireSpec,
) -> Result<WindingGeometry, ConfigError> {
    if layout.turns == 0 {
        return Err(ConfigError::ZeroTurns { coil_id });
    }
    if layout.footprint[0] <= 0.0 || layout.footprint[1] <= 0.0 {
        return Err(ConfigError::DegenerateFootprint {
            coil_id,
            side_a: layout.footprint[0],
            side_b: layout.footprint[1],
        });
    }
    if layout.pitch < 0.0 {
        return Err(ConfigError::NegativePitch {
            coil_id,
            pitch: layout.pitch,
        });
    }

    let axis = layout.axis.unit();
    let (u, v) = layout.axis.cross_axes();
    let hu = layout.footprint[0] / 2.0;
    let hv = layout.footprint[1] / 2.0;
    let turns = layout.turns as usize;

    let corner = |su: f64, sv: f64, a: f64| -> Vec3 {
        add(
            layout.center,
            add(scale(axis, a), add(scale(u, su * hu), scale(v, sv * hv))),
        )
    };
    let axial = |k: usize| (k as f64 - (turns as f64 - 1.0) / 2.0) * layout.pitch;

    let mut segments = Vec::with_capacity(4 * turns + turns + 1);
    for k in 0..turns {
        let a = axial(k);
        let c1 = corner(1.0, 1.0, a);
        let c2 = corner(-1.0, 1.0, a);
        let c3 = corner(-1.0, -1.0, a);
        let c4 = corner(1.0, -1.0, a);
        segments.push(Segment::new(c1, c2));
        segments.push(Segment::new(c2, c3));
        segments.push(Segment::new(c3, c4));
        segments.push(Segment::new(c4, c1));
        if layout.pitch > 0.0 && k + 1 < turns {
            segments.push(Segment::new(c1, corner(1.0, 1.0, axial(k + 1))));
        }
    }
    if layout.pitch > 0.0 && turns > 1 {
        // Return riser closing the loop back to the first turn's start corner.
        segments.push(Segment::new(
            corner(1.0, 1.0, axial(turns - 1)),
            corner(1.0, 1.0, axial(0)),
        ));
    }

    Ok(WindingGeometry {
        coil_id,
        segments,
        turns: layout.turns,
        wire,
    })
}

/// Chamber envelope, ferrite model switches, and field-map grid density.
#[derive(Debug, Clone, PartialEq)]
pub struct ChamberSpec {
    /// Inner dimensions of the chamber volume (m).
    pub inner_dimensions: Vec3,
    pub ferrite_enabled: bool,
    /// Clearance from the outermost winding extent to the ferrite wall (m).
    pub ferrite_gap: f64,
    /// Scalar multiplier applied to the total field when the image-current
    /// model is active.
    pub ferrite_calibration: f64,
    /// Grid samples along each of the two major axes; the third axis is
    /// scaled by the chamber aspect ratio.
    pub grid_resolution: u32,
}

impl ChamberSpec {
    /// Samples per axis for the field-map grid. The longest axes get
    /// `grid_resolution` points; shorter axes are scaled by aspect ratio
    /// (minimum 2).
    pub fn grid_dims(&self) -> [usize; 3] {
        let longest = self
            .inner_dimensions
            .iter()
            .cloned()
            .fold(f64::MIN, f64::max);
        self.inner_dimensions.map(|dim| {
            let n = (self.grid_resolution as f64 * dim / longest).round();
            (n as usize).max(2)
        })
    }
}

/// A nanoparticle suspension with its measured per-channel absorption rates.
#[derive(Debug, Clone, PartialEq)]
pub struct NanoparticleSample {
    pub name: String,
    /// Metal mass per suspension volume (kg/m^3, numerically equal to mg/mL).
    pub metal_concentration: f64,
    /// Specific heat of the carrier medium (J/(kg K)).
    pub medium_heat_capacity: f64,
    /// Density of the carrier medium (kg/m^3).
    pub medium_density: f64,
    /// Measured specific absorption rate per channel (W per kg of metal).
    pub sar_per_channel: Vec<(u8, f64)>,
}

impl NanoparticleSample {
    pub fn sar_for_channel(&self, channel: u8) -> Option<f64> {
        self.sar_per_channel
            .iter()
            .find(|(ch, _)| *ch == channel)
            .map(|(_, sar)| *sar)
    }
}

/// Series resistance of a coil half: either an explicit value or calibrated
/// so the rated duty produces the rated current at resonance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeriesResistance {
    Ohms(f64),
    Auto,
}

/// Per-channel resonant network: coil half inductances, mutual coupling,
/// compensation capacitors, loss resistance, and drive bus parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ResonantNetwork {
    pub channel: u8,
    /// Self-inductance of the first and second coil halves (H).
    pub coil_half_inductances: [f64; 2],
    /// Mutual inductance between the two halves (H).
    pub mutual: f64,
    /// Series loss resistance per half (Ohm), resolved from config.
    pub series_resistance: f64,
    /// True when `series_resistance` was calibrated from the rated operating
    /// point rather than given explicitly.
    pub series_resistance_auto: bool,
    /// Compensation capacitance per half (F), as implemented.
    pub compensation: [f64; 2],
    /// DC bus voltage feeding the inverters (V).
    pub dc_bus_voltage: f64,
    /// Measured resonant frequency, when available (Hz).
    pub measured_resonance: Option<f64>,
    /// Stock capacitor values available for bank synthesis (F).
    pub bank_stock: Vec<f64>,
    /// Maximum parts per parallel group in bank synthesis.
    pub bank_max_parts: u32,
}

impl ResonantNetwork {
    /// Equivalent series inductance of one half including the mutual
    /// contribution from its synchronized twin (H).
    pub fn equivalent_inductance(&self, half: usize) -> f64 {
        self.coil_half_inductances[half] + self.mutual
    }
}

/// Material constants and lumped thermal model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalParams {
    /// Copper resistivity (Ohm m).
    pub copper_resistivity: f64,
    /// Copper specific heat (J/(kg K)).
    pub copper_specific_heat: f64,
    /// Copper density (kg/m^3).
    pub copper_density: f64,
    /// Conductance from the coil lump to the coolant sink (W/K).
    pub coolant_sink_conductance: f64,
    /// Ambient and coolant temperature (degrees C).
    pub ambient: f64,
    /// Safety limit on the enclosure wall heating rate (degrees C per s).
    pub wall_rate_limit: f64,
    /// Multiplier on AC resistance covering proximity-effect losses.
    pub proximity_factor: f64,
    /// Measured enclosure-wall heating rate per channel (degrees C per s).
    pub measured_wall_rates: Vec<(u8, f64)>,
}

impl ThermalParams {
    pub fn wall_rate_for_channel(&self, channel: u8) -> Option<f64> {
        self.measured_wall_rates
            .iter()
            .find(|(ch, _)| *ch == channel)
            .map(|(_, r)| *r)
    }
}

/// Declarative winding entry: layout plus wire, tied to a channel.
#[derive(Debug, Clone, PartialEq)]
pub struct WindingSpec {
    pub coil_id: u8,
    pub channel: u8,
    pub layout: RectHelixLayout,
    pub wire: LitzWireSpec,
}

impl WindingSpec {
    pub fn geometry(&self) -> Result<WindingGeometry, ConfigError> {
        build_winding(self.coil_id, &self.layout, self.wire.clone())
    }
}

/// Full declarative description of the chamber, drive electronics, and
/// samples. Immutable after parsing; all operations take it by reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ChamberConfig {
    pub channels: Vec<ChannelSpec>,
    pub windings: Vec<WindingSpec>,
    pub chamber: ChamberSpec,
    pub networks: Vec<ResonantNetwork>,
    pub samples: Vec<NanoparticleSample>,
    pub thermal: ThermalParams,
}

impl ChamberConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let raw: raw::RawConfig = toml::from_str(text)?;
        raw.resolve()
    }

    /// Serialize back to config syntax (SI unit suffixes). Parsing the output
    /// yields an equal `ChamberConfig`.
    pub fn to_config_string(&self) -> String {
        raw::RawConfig::from_resolved(self).to_toml()
    }

    pub fn channel(&self, id: u8) -> Result<&ChannelSpec, ConfigError> {
        self.channels
            .iter()
            .find(|c| c.id == id)
            .ok_or(ConfigError::UnknownChannel(id))
    }

    pub fn network(&self, channel: u8) -> Result<&ResonantNetwork, ConfigError> {
        self.networks
            .iter()
            .find(|n| n.channel == channel)
            .ok_or(ConfigError::UnknownNetwork(channel))
    }

    pub fn windings_for_channel(&self, channel: u8) -> Vec<&WindingSpec> {
        self.windings
            .iter()
            .filter(|w| w.channel == channel)
            .collect()
    }

    pub fn winding(&self, coil_id: u8) -> Result<&WindingSpec, ConfigError> {
        self.windings
            .iter()
            .find(|w| w.coil_id == coil_id)
            .ok_or(ConfigError::UnknownCoil(coil_id))
    }

    pub fn sample(&self, name: &str) -> Result<&NanoparticleSample, ConfigError> {
        self.samples
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| ConfigError::UnknownSample(name.to_string()))
    }

    /// Realize all winding geometries, in config order.
    pub fn winding_geometries(&self) -> Result<Vec<WindingGeometry>, ConfigError> {
        self.windings.iter().map(WindingSpec::geometry).collect()
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// A single constraint violation; violations are data, not failures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub location: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            location: location.into(),
            message: message.into(),
        });
    }
}

/// Check every type invariant, cross-reference, and unit-sanity bound.
/// Returns an empty report for a valid config. Pure: identical input yields
/// an identical report.
pub fn validate_config(config: &ChamberConfig) -> ValidationReport {
    let mut report = ValidationReport::default();

    if config.channels.len() != 2 {
        report.push("channels", "exactly 2 channels required");
    }
    for ch in &config.channels {
        let loc = format!("channel {}", ch.id);
        if ch.id != 1 && ch.id != 2 {
            report.push(&loc, "channel id must be 1 or 2");
        }
        if ch.nominal_frequency <= 0.0 {
            report.push(&loc, "nominal_frequency must be positive");
        } else if !(1e3..=1e7).contains(&ch.nominal_frequency) {
            report.push(&loc, "nominal_frequency outside sane range [1 kHz, 10 MHz]");
        }
        if ch.target_field <= 0.0 {
            report.push(&loc, "target_field must be positive");
        } else if ch.target_field >= 1.0 {
            report.push(&loc, "target_field must be below 1 T");
        }
        if ch.max_current <= 0.0 {
            report.push(&loc, "max_current must be positive");
        }
        if !(ch.max_duty > 0.0 && ch.max_duty <= 1.0) {
            report.push(&loc, "max_duty must lie in (0, 1]");
        }
    }
    let mut channel_ids: Vec<u8> = config.channels.iter().map(|c| c.id).collect();
    channel_ids.sort_unstable();
    channel_ids.dedup();
    if channel_ids.len() != config.channels.len() {
        report.push("channels", "duplicate channel ids");
    }

    for ch in &config.channels {
        let count = config.windings_for_channel(ch.id).len();
        if count != 2 {
            report.push(
                format!("channel {}", ch.id),
                format!("exactly 2 windings per channel required, found {count}"),
            );
        }
        if config.network(ch.id).is_err() {
            report.push(
                format!("channel {}", ch.id),
                "no resonant network defined for this channel",
            );
        }
    }

    let mut coil_ids: Vec<u8> = config.windings.iter().map(|w| w.coil_id).collect();
    coil_ids.sort_unstable();
    let deduped = {
        let mut v = coil_ids.clone();
        v.dedup();
        v
    };
    if deduped.len() != coil_ids.len() {
        report.push("windings", "duplicate coil ids");
    }

    for w in &config.windings {
        let loc = format!("winding #{}", w.coil_id);
        if config.channel(w.channel).is_err() {
            report.push(&loc, format!("references unknown channel {}", w.channel));
        }
        if w.wire.strand_diameter <= 0.0 {
            report.push(&loc, "wire strand_diameter must be positive");
        }
        if w.wire.strand_count < 1 {
            report.push(&loc, "wire strand_count must be at least 1");
        }
        if w.wire.parallel_bundles < 1 {
            report.push(&loc, "wire parallel_bundles must be at least 1");
        }
        if w.wire.conductor_resistivity <= 0.0 {
            report.push(&loc, "wire conductor_resistivity must be positive");
        }
        match w.geometry() {
            Ok(geom) => {
                if !geom.is_closed() {
                    report.push(
                        &loc,
                        format!("loop not closed (gap {:.3e} m)", geom.closure_gap()),
                    );
                }
                if geom.segments.iter().any(|s| s.length() == 0.0) {
                    report.push(&loc, "zero-length segment");
                }
            }
            Err(err) => report.push(&loc, err.to_string()),
        }
    }

    let chamber = &config.chamber;
    if chamber.inner_dimensions.iter().any(|&d| d <= 0.0) {
        report.push("chamber", "all inner dimensions must be positive");
    }
    if chamber.ferrite_gap <= 0.0 {
        report.push("chamber", "ferrite_gap must be positive");
    }
    if chamber.ferrite_calibration <= 0.0 {
        report.push("chamber", "ferrite_calibration must sit above zero");
    }
    if chamber.grid_resolution < 2 {
        report.push("chamber", "grid_resolution must be at least 2");
    }

    for net in &config.networks {
        let loc = format!("network channel {}", net.channel);
        if config.channel(net.channel).is_err() {
            report.push(&loc, format!("references unknown channel {}", net.channel));
        }
        if net.coil_half_inductances.iter().any(|&l| l <= 0.0) {
            report.push(&loc, "coil half inductances must be positive");
        }
        if net.mutual < 0.0 {
            report.push(&loc, "mutual inductance must be non-negative");
        }
        if net.compensation.iter().any(|&c| c <= 0.0) {
            report.push(&loc, "compensation capacitances must be positive");
        }
        if net.series_resistance < 0.0 {
            report.push(&loc, "series_resistance must be non-negative");
        }
        if net.dc_bus_voltage <= 0.0 {
            report.push(&loc, "dc_bus_voltage must be positive");
        }
        if net.bank_stock.iter().any(|&c| c <= 0.0) {
            report.push(&loc, "bank stock values must be positive");
        }
    }

    for sample in &config.samples {
        let loc = format!("sample {:?}", sample.name);
        if sample.metal_concentration <= 0.0 {
            report.push(&loc, "metal_concentration must be positive");
        }
        if sample.medium_heat_capacity <= 0.0 {
            report.push(&loc, "medium_heat_capacity must be positive");
        }
        if sample.medium_density <= 0.0 {
            report.push(&loc, "medium_density must be positive");
        }
        for (ch, sar) in &sample.sar_per_channel {
            if config.channel(*ch).is_err() {
                report.push(&loc, format!("SAR entry references unknown channel {ch}"));
            }
            if *sar <= 0.0 {
                report.push(&loc, "SAR values must be positive");
            }
        }
    }

    let th = &config.thermal;
    if th.copper_resistivity <= 0.0
        || th.copper_specific_heat <= 0.0
        || th.copper_density <= 0.0
        || th.coolant_sink_conductance <= 0.0
        || th.wall_rate_limit <= 0.0
        || th.proximity_factor <= 0.0
    {
        report.push("thermal", "all thermal parameters must be positive");
    }

    report
}

// ---------------------------------------------------------------------------
// Raw TOML mirror with unit-suffixed strings
// ---------------------------------------------------------------------------

mod raw {
    use super::*;

    fn parse_field(table: &UnitTable, location: &str, value: &str) -> Result<f64, ConfigError> {
        units::parse(table, value).map_err(|source| ConfigError::Unit {
            location: location.to_string(),
            source,
        })
    }

    fn parse_vec3(
        table: &UnitTable,
        location: &str,
        value: &[String; 3],
    ) -> Result<Vec3, ConfigError> {
        Ok([
            parse_field(table, location, &value[0])?,
            parse_field(table, location, &value[1])?,
            parse_field(table, location, &value[2])?,
        ])
    }

    #[derive(Debug, Serialize, Deserialize)]
    pub struct RawConfig {
        pub chamber: RawChamber,
        pub channels: Vec<RawChannel>,
        pub windings: Vec<RawWinding>,
        pub networks: Vec<RawNetwork>,
        #[serde(default)]
        pub samples: Vec<RawSample>,
        pub thermal: RawThermal,
    }

    #[derive(Debug, Serialize, Deserialize)]
    pub struct RawChamber {
        pub inner_dimensions: [String; 3],
        pub ferrite_enabled: bool,
        pub ferrite_gap: String,
        #[serde(default = "default_calibration")]
        pub ferrite_calibration: f64,
        pub grid_resolution: u32,
    }

    fn default_calibration() -> f64 {
        1.0
    }

    #[derive(Debug, Serialize, Deserialize)]
    pub struct RawChannel {
        pub id: u8,
        pub nominal_frequency: String,
        pub target_field: String,
        pub max_current: String,
        pub max_duty: f64,
    }

    #[derive(Debug, Serialize, Deserialize)]
    pub struct RawWinding {
        pub coil_id: u8,
        pub channel: u8,
        pub axis: Axis,
        pub center: [String; 3],
        pub footprint: [String; 2],
        pub turns: u32,
        pub pitch: String,
        pub wire: RawWire,
    }

    #[derive(Debug, Serialize, Deserialize)]
    pub struct RawWire {
        pub strand_diameter: String,
        pub strand_count: u32,
        pub parallel_bundles: u32,
        pub conductor_resistivity: String,
    }

    #[derive(Debug, Serialize, Deserialize)]
    pub struct RawNetwork {
        pub channel: u8,
        pub coil_half_inductances: [String; 2],
        pub mutual: String,
        /// Either a resistance quantity or `"auto"` to calibrate so the
        /// channel's rated duty drives the rated current at resonance.
        pub series_resistance: String,
        pub compensation: [String; 2],
        pub dc_bus_voltage: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub measured_resonance: Option<String>,
        #[serde(default)]
        pub bank_stock: Vec<String>,
        #[serde(default = "default_bank_max_parts")]
        pub bank_max_parts: u32,
    }

    fn default_bank_max_parts() -> u32 {
        40
    }

    #[derive(Debug, Serialize, Deserialize)]
    pub struct RawSample {
        pub name: String,
        pub metal_concentration: String,
        pub medium_heat_capacity: String,
        pub medium_density: String,
        #[serde(default)]
        pub sar: Vec<RawSarEntry>,
    }

    #[derive(Debug, Serialize, Deserialize)]
    pub struct RawSarEntry {
        pub channel: u8,
        pub value: String,
    }

    #[derive(Debug, Serialize, Deserialize)]
    pub struct RawThermal {
        pub copper_resistivity: String,
        pub copper_specific_heat: String,
        pub copper_density: String,
        pub coolant_sink_conductance: String,
        pub ambient: String,
        pub wall_rate_limit: String,
        #[serde(default = "default_proximity")]
        pub proximity_factor: f64,
        #[serde(default)]
        pub measured_wall_rates: Vec<RawWallRate>,
    }

    fn default_proximity() -> f64 {
        1.5
    }

    #[derive(Debug, Serialize, Deserialize)]
    pub struct RawWallRate {
        pub channel: u8,
        pub rate: String,
    }

    impl RawConfig {
        pub fn resolve(&self) -> Result<ChamberConfig, ConfigError> {
            let channels = self
                .channels
                .iter()
                .map(|c| {
                    let loc = format!("channel {}", c.id);
                    Ok(ChannelSpec {
                        id: c.id,
                        nominal_frequency: parse_field(
                            &units::FREQUENCY,
                            &loc,
                            &c.nominal_frequency,
                        )?,
                        target_field: parse_field(&units::FLUX_DENSITY, &loc, &c.target_field)?,
                        max_current: parse_field(&units::CURRENT, &loc, &c.max_current)?,
                        max_duty: c.max_duty,
                    })
                })
                .collect::<Result<Vec<_>, ConfigError>>()?;

            let windings = self
                .windings
                .iter()
                .map(|w| {
                    let loc = format!("winding #{}", w.coil_id);
                    Ok(WindingSpec {
                        coil_id: w.coil_id,
                        channel: w.channel,
                        layout: RectHelixLayout {
                            axis: w.axis,
                            center: parse_vec3(&units::LENGTH, &loc, &w.center)?,
                            footprint: [
                                parse_field(&units::LENGTH, &loc, &w.footprint[0])?,
                                parse_field(&units::LENGTH, &loc, &w.footprint[1])?,
                            ],
                            turns: w.turns,
                            pitch: parse_field(&units::LENGTH, &loc, &w.pitch)?,
                        },
                        wire: LitzWireSpec {
                            strand_diameter: parse_field(
                                &units::LENGTH,
                                &loc,
                                &w.wire.strand_diameter,
                            )?,
                            strand_count: w.wire.strand_count,
                            parallel_bundles: w.wire.parallel_bundles,
                            conductor_resistivity: parse_field(
                                &units::RESISTIVITY,
                                &loc,
                                &w.wire.conductor_resistivity,
                            )?,
                        },
                    })
                })
                .collect::<Result<Vec<_>, ConfigError>>()?;

            let chamber = ChamberSpec {
                inner_dimensions: parse_vec3(
                    &units::LENGTH,
                    "chamber",
                    &self.chamber.inner_dimensions,
                )?,
                ferrite_enabled: self.chamber.ferrite_enabled,
                ferrite_gap: parse_field(&units::LENGTH, "chamber", &self.chamber.ferrite_gap)?,
                ferrite_calibration: self.chamber.ferrite_calibration,
                grid_resolution: self.chamber.grid_resolution,
            };

            let networks = self
                .networks
                .iter()
                .map(|n| {
                    let loc = format!("network channel {}", n.channel);
                    let dc_bus_voltage = parse_field(&units::VOLTAGE, &loc, &n.dc_bus_voltage)?;
                    let (series_resistance, auto) =
                        if n.series_resistance.trim().eq_ignore_ascii_case("auto") {
                            let ch = channels
                                .iter()
                                .find(|c| c.id == n.channel)
                                .ok_or(ConfigError::UnknownChannel(n.channel))?;
                            (
                                crate::drive::calibrated_series_resistance(
                                    dc_bus_voltage,
                                    ch.max_duty,
                                    ch.max_current,
                                ),
                                true,
                            )
                        } else {
                            (
                                parse_field(&units::RESISTANCE, &loc, &n.series_resistance)?,
                                false,
                            )
                        };
                    Ok(ResonantNetwork {
                        channel: n.channel,
                        coil_half_inductances: [
                            parse_field(&units::INDUCTANCE, &loc, &n.coil_half_inductances[0])?,
                            parse_field(&units::INDUCTANCE, &loc, &n.coil_half_inductances[1])?,
                        ],
                        mutual: parse_field(&units::INDUCTANCE, &loc, &n.mutual)?,
                        series_resistance,
                        series_resistance_auto: auto,
                        compensation: [
                            parse_field(&units::CAPACITANCE, &loc, &n.compensation[0])?,
                            parse_field(&units::CAPACITANCE, &loc, &n.compensation[1])?,
                        ],
                        dc_bus_voltage,
                        measured_resonance: n
                            .measured_resonance
                            .as_ref()
                            .map(|s| parse_field(&units::FREQUENCY, &loc, s))
                            .transpose()?,
                        bank_stock: n
                            .bank_stock
                            .iter()
                            .map(|s| parse_field(&units::CAPACITANCE, &loc, s))
                            .collect::<Result<Vec<_>, _>>()?,
                        bank_max_parts: n.bank_max_parts,
                    })
                })
                .collect::<Result<Vec<_>, ConfigError>>()?;

            let samples = self
                .samples
                .iter()
                .map(|s| {
                    let loc = format!("sample {:?}", s.name);
                    Ok(NanoparticleSample {
                        name: s.name.clone(),
                        metal_concentration: parse_field(
                            &units::CONCENTRATION,
                            &loc,
                            &s.metal_concentration,
                        )?,
                        medium_heat_capacity: parse_field(
                            &units::SPECIFIC_HEAT,
                            &loc,
                            &s.medium_heat_capacity,
                        )?,
                        medium_density: parse_field(&units::DENSITY, &loc, &s.medium_density)?,
                        sar_per_channel: s
                            .sar
                            .iter()
                            .map(|e| {
                                Ok((
                                    e.channel,
                                    parse_field(&units::SPECIFIC_POWER, &loc, &e.value)?,
                                ))
                            })
                            .collect::<Result<Vec<_>, ConfigError>>()?,
                    })
                })
                .collect::<Result<Vec<_>, ConfigError>>()?;

            let thermal = ThermalParams {
                copper_resistivity: parse_field(
                    &units::RESISTIVITY,
                    "thermal",
                    &self.thermal.copper_resistivity,
                )?,
                copper_specific_heat: parse_field(
                    &units::SPECIFIC_HEAT,
                    "thermal",
                    &self.thermal.copper_specific_heat,
                )?,
                copper_density: parse_field(
                    &units::DENSITY,
                    "thermal",
                    &self.thermal.copper_density,
                )?,
                coolant_sink_conductance: parse_field(
                    &units::THERMAL_CONDUCTANCE,
                    "thermal",
                    &self.thermal.coolant_sink_conductance,
                )?,
                ambient: parse_field(&units::TEMPERATURE, "thermal", &self.thermal.ambient)?,
                wall_rate_limit: parse_field(
                    &units::TEMPERATURE_RATE,
                    "thermal",
                    &self.thermal.wall_rate_limit,
                )?,
                proximity_factor: self.thermal.proximity_factor,
                measured_wall_rates: self
                    .thermal
                    .measured_wall_rates
                    .iter()
                    .map(|w| {
                        Ok((
                            w.channel,
                            parse_field(&units::TEMPERATURE_RATE, "thermal", &w.rate)?,
                        ))
                    })
                    .collect::<Result<Vec<_>, ConfigError>>()?,
            };

            Ok(ChamberConfig {
                channels,
                windings,
                chamber,
                networks,
                samples,
                thermal,
            })
        }

        pub fn from_resolved(cfg: &ChamberConfig) -> Self {
            let si = units::format_si;
            RawConfig {
                chamber: RawChamber {
                    inner_dimensions: cfg.chamber.inner_dimensions.map(|v| si(&units::LENGTH, v)),
                    ferrite_enabled: cfg.chamber.ferrite_enabled,
                    ferrite_gap: si(&units::LENGTH, cfg.chamber.ferrite_gap),
                    ferrite_calibration: cfg.chamber.ferrite_calibration,
                    grid_resolution: cfg.chamber.grid_resolution,
                },
                channels: cfg
                    .channels
                    .iter()
                    .map(|c| RawChannel {
                        id: c.id,
                        nominal_frequency: si(&units::FREQUENCY, c.nominal_frequency),
                        target_field: si(&units::FLUX_DENSITY, c.target_field),
                        max_current: si(&units::CURRENT, c.max_current),
                        max_duty: c.max_duty,
                    })
                    .collect(),
                windings: cfg
                    .windings
                    .iter()
                    .map(|w| RawWinding {
                        coil_id: w.coil_id,
                        channel: w.channel,
                        axis: w.layout.axis,
                        center: w.layout.center.map(|v| si(&units::LENGTH, v)),
                        footprint: w.layout.footprint.map(|v| si(&units::LENGTH, v)),
                        turns: w.layout.turns,
                        pitch: si(&units::LENGTH, w.layout.pitch),
                        wire: RawWire {
                            strand_diameter: si(&units::LENGTH, w.wire.strand_diameter),
                            strand_count: w.wire.strand_count,
                            parallel_bundles: w.wire.parallel_bundles,
                            conductor_resistivity: si(
                                &units::RESISTIVITY,
                                w.wire.conductor_resistivity,
                            ),
                        },
                    })
                    .collect(),
                networks: cfg
                    .networks
                    .iter()
                    .map(|n| RawNetwork {
                        channel: n.channel,
                        coil_half_inductances: n
                            .coil_half_inductances
                            .map(|v| si(&units::INDUCTANCE, v)),
                        mutual: si(&units::INDUCTANCE, n.mutual),
                        series_resistance: if n.series_resistance_auto {
                            "auto".to_string()
                        } else {
                            si(&units::RESISTANCE, n.series_resistance)
                        },
                        compensation: n.compensation.map(|v| si(&units::CAPACITANCE, v)),
                        dc_bus_voltage: si(&units::VOLTAGE, n.dc_bus_voltage),
                        measured_resonance: n.measured_resonance.map(|v| si(&units::FREQUENCY, v)),
                        bank_stock: n
                            .bank_stock
                            .iter()
                            .map(|&v| si(&units::CAPACITANCE, v))
                            .collect(),
                        bank_max_parts: n.bank_max_parts,
                    })
                    .collect(),
                samples: cfg
                    .samples
                    .iter()
                    .map(|s| RawSample {
                        name: s.name.clone(),
                        metal_concentration: si(&units::CONCENTRATION, s.metal_concentration),
                        medium_heat_capacity: si(&units::SPECIFIC_HEAT, s.medium_heat_capacity),
                        medium_density: si(&units::DENSITY, s.medium_density),
                        sar: s
                            .sar_per_channel
                            .iter()
                            .map(|&(channel, value)| RawSarEntry {
                                channel,
                                value: si(&units::SPECIFIC_POWER, value),
                            })
                            .collect(),
                    })
                    .collect(),
                thermal: RawThermal {
                    copper_resistivity: si(&units::RESISTIVITY, cfg.thermal.copper_resistivity),
                    copper_specific_heat: si(
                        &units::SPECIFIC_HEAT,
                        cfg.thermal.copper_specific_heat,
                    ),
                    copper_density: si(&units::DENSITY, cfg.thermal.copper_density),
                    coolant_sink_conductance: si(
                        &units::THERMAL_CONDUCTANCE,
                        cfg.thermal.coolant_sink_conductance,
                    ),
                    ambient: si(&units::TEMPERATURE, cfg.thermal.ambient),
                    wall_rate_limit: si(&units::TEMPERATURE_RATE, cfg.thermal.wall_rate_limit),
                    proximity_factor: cfg.thermal.proximity_factor,
                    measured_wall_rates: cfg
                        .thermal
                        .measured_wall_rates
                        .iter()
                        .map(|&(channel, rate)| RawWallRate {
                            channel,
                            rate: si(&units::TEMPERATURE_RATE, rate),
                        })
                        .collect(),
                },
            }
        }

        pub fn to_toml(&self) -> String {
            toml::to_string_pretty(self).expect("config serialization cannot fail")
        }
    }
}
