//! Consolidated design report: ties the compensation design, resonance,
//! field maps, crosstalk simulation, input power, and heating models into a
//! single structure mirroring the system's design and measurement tables.

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::config::{ChamberConfig, ConfigError};
use crate::drive::{
    estimate_input_power, simulate_transient, steady_state, DriveWaveformSpec, SolverError,
    SteadyStateMetrics,
};
use crate::magnetics::{
    channel_cross_coupling, compute_field_map, field_at_point, inductance_matrix, uniformity,
    FerriteImages, InductanceMatrix, MagneticsError, UniformityStats,
};
use crate::resonance::{design_network, predicted_resonance, DesignRow, ResonanceError};
use crate::thermal::{
    coil_temperature_rise, heating_curve, safety_check, HeatingResult, SafetyCheck, ThermalError,
};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Magnetics(#[from] MagneticsError),
    #[error(transparent)]
    Resonance(#[from] ResonanceError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Thermal(#[from] ThermalError),
}

/// Knobs for the costlier report sections.
#[derive(Debug, Clone)]
pub struct ReportOptions {
    /// Three-phase line voltage feeding the AC/DC units (V).
    pub line_voltage: f64,
    /// Lumped drive-chain efficiency (converter losses and power factor)
    /// used to turn coil dissipation into apparent input power.
    pub efficiency: f64,
    /// Duration of the coil heating run (s).
    pub heating_duration: f64,
    /// Duration of the sample heating runs (s).
    pub sample_duration: f64,
    /// Run the dual-channel crosstalk simulations.
    pub with_crosstalk: bool,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            line_voltage: 208.0,
            efficiency: 0.53,
            heating_duration: 2.0,
            sample_duration: 4.0,
            with_crosstalk: true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InputPowerReport {
    /// Coil dissipation at rated current (W).
    pub coil_dissipation_w: f64,
    /// Apparent power drawn from the outlet (VA).
    pub apparent_power_va: f64,
    /// Three-phase line current (A rms).
    pub line_current_a: f64,
    pub efficiency: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChannelReport {
    pub channel: u8,
    pub design: Vec<DesignRow>,
    /// Closed-form resonance per half (Hz).
    pub predicted_resonance_hz: [f64; 2],
    pub measured_resonance_hz: Option<f64>,
    /// omega (L+M) I at the rated current (V); omega from the measured
    /// resonance when available.
    pub rated_coil_voltage_v: f64,
    /// |B| at the chamber center at rated current, ferrite model per config (T).
    pub center_field_t: f64,
    /// Same evaluation without the ferrite images (T).
    pub center_field_free_space_t: f64,
    pub uniformity: UniformityStats,
    pub input_power: InputPowerReport,
    /// Lumped coil heating over the configured duration at rated current.
    pub coil_heating: HeatingResult,
    /// Wall heating-rate check from the measured per-channel rate, when the
    /// config carries one.
    pub wall_safety: Option<SafetyCheck>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CrosstalkReport {
    pub active_channel: u8,
    pub active_peak_a: f64,
    pub idle_peak_a: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleChannelHeating {
    pub channel: u8,
    pub rate_c_per_s: f64,
    pub delta_t_c: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleReport {
    pub name: String,
    pub heating: Vec<SampleChannelHeating>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DesignReport {
    pub channels: Vec<ChannelReport>,
    /// Geometry-derived coupling coefficient between the channel loops.
    pub cross_channel_coupling: f64,
    pub crosstalk: Vec<CrosstalkReport>,
    pub inductance_matrix: InductanceMatrix,
    pub samples: Vec<SampleReport>,
}

impl DesignReport {
    pub fn generate(config: &ChamberConfig, options: &ReportOptions) -> Result<Self, ReportError> {
        let matrix = inductance_matrix(config)?;
        let k_geom = channel_cross_coupling(config)?;
        let ferrite = FerriteImages::from_config(config)?;

        let mut channels = Vec::new();
        for ch in &config.channels {
            let network = config.network(ch.id)?;
            let design = design_network(network, ch.nominal_frequency)?;
            let predicted = [
                predicted_resonance(network, 0),
                predicted_resonance(network, 1),
            ];
            let omega = 2.0 * PI * network.measured_resonance.unwrap_or(predicted[0]);
            let rated_coil_voltage = omega * network.equivalent_inductance(0) * ch.max_current;

            let specs = config.windings_for_channel(ch.id);
            let windings: Vec<_> = specs
                .iter()
                .map(|s| s.geometry())
                .collect::<Result<_, _>>()?;
            let currents = vec![ch.max_current; windings.len()];
            let center_field = crate::geom::norm(field_at_point(
                &windings,
                &currents,
                [0.0; 3],
                ferrite.as_ref(),
            )?);
            let center_free =
                crate::geom::norm(field_at_point(&windings, &currents, [0.0; 3], None)?);

            let map = compute_field_map(config, ch.id, ch.max_current)?;
            let stats = uniformity(&map, 0.10)?;

            let rated_metrics = SteadyStateMetrics {
                peak_current: [ch.max_current; 2],
                peak_coil_voltage: [rated_coil_voltage; 2],
                crosstalk_ratio: 0.0,
                settle_cycles: 0,
            };
            let (apparent, line_current) = estimate_input_power(
                &rated_metrics,
                0,
                network,
                options.line_voltage,
                options.efficiency,
            )?;
            let input_power = InputPowerReport {
                coil_dissipation_w: 0.5
                    * ch.max_current
                    * ch.max_current
                    * network.series_resistance,
                apparent_power_va: apparent,
                line_current_a: line_current,
                efficiency: options.efficiency,
            };

            let winding_spec = specs[0];
            let coil_heating = coil_temperature_rise(
                network,
                &winding_spec.wire,
                &winding_spec.geometry()?,
                ch.max_current,
                options.heating_duration,
                &config.thermal,
            )?;
            let wall_safety = config.thermal.wall_rate_for_channel(ch.id).map(|rate| {
                let wall = HeatingResult {
                    rate,
                    delta_t: rate * options.heating_duration,
                    duration: options.heating_duration,
                    subject: format!("enclosure wall, channel {}", ch.id),
                };
                safety_check(&wall, &config.thermal)
            });

            channels.push(ChannelReport {
                channel: ch.id,
                design,
                predicted_resonance_hz: predicted,
                measured_resonance_hz: network.measured_resonance,
                rated_coil_voltage_v: rated_coil_voltage,
                center_field_t: center_field,
                center_field_free_space_t: center_free,
                uniformity: stats,
                input_power,
                coil_heating,
                wall_safety,
            });
        }

        let crosstalk = if options.with_crosstalk {
            let mut reports = Vec::new();
            for active in [1u8, 2u8] {
                reports.push(crosstalk_simulation(config, active, k_geom)?);
            }
            reports
        } else {
            Vec::new()
        };

        let samples = config
            .samples
            .iter()
            .map(|sample| {
                let heating = sample
                    .sar_per_channel
                    .iter()
                    .map(|&(channel, _)| {
                        let h = heating_curve(sample, channel, options.sample_duration)?;
                        Ok(SampleChannelHeating {
                            channel,
                            rate_c_per_s: h.rate,
                            delta_t_c: h.delta_t,
                        })
                    })
                    .collect::<Result<Vec<_>, ThermalError>>()?;
                Ok(SampleReport {
                    name: sample.name.clone(),
                    heating,
                })
            })
            .collect::<Result<Vec<_>, ThermalError>>()?;

        Ok(DesignReport {
            channels,
            cross_channel_coupling: k_geom,
            crosstalk,
            inductance_matrix: matrix,
            samples,
        })
    }

    /// Plain-text rendering for the terminal.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str("=== Resonant network design ===\n");
        out.push_str("channel half  C_calc_nF  C_bank_nF  bank  f_predicted_kHz\n");
        for ch in &self.channels {
            for row in &ch.design {
                let bank = row
                    .bank_parts
                    .iter()
                    .map(|&(v, n)| format!("{} x {:.1} nF", n, v * 1e9))
                    .collect::<Vec<_>>()
                    .join(" + ");
                out.push_str(&format!(
                    "{:>7} {:>4} {:>10.1} {:>10.1}  ({}) / 2  {:>10.2}\n",
                    row.channel,
                    row.half,
                    row.c_calc_f * 1e9,
                    row.c_bank_f * 1e9,
                    bank,
                    row.f_predicted_hz / 1e3,
                ));
            }
        }

        out.push_str("\n=== Resonance and drive ===\n");
        for ch in &self.channels {
            let measured = ch
                .measured_resonance_hz
                .map(|f| format!("{:.1} kHz", f / 1e3))
                .unwrap_or_else(|| "-".into());
            out.push_str(&format!(
                "channel {}: predicted {:.2} kHz (half 2: {:.2} kHz), measured {}, rated coil voltage {:.2} kV\n",
                ch.channel,
                ch.predicted_resonance_hz[0] / 1e3,
                ch.predicted_resonance_hz[1] / 1e3,
                measured,
                ch.rated_coil_voltage_v / 1e3,
            ));
        }

        out.push_str("\n=== Magnetic field at rated current ===\n");
        for ch in &self.channels {
            out.push_str(&format!(
                "channel {}: center {:.1} mT (free space {:.1} mT), median {:.1} mT, band +/-{:.0}% fraction {:.3}\n",
                ch.channel,
                ch.center_field_t * 1e3,
                ch.center_field_free_space_t * 1e3,
                ch.uniformity.median_magnitude * 1e3,
                ch.uniformity.band_halfwidth * 100.0,
                ch.uniformity.band_fraction,
            ));
        }

        out.push_str(&format!(
            "\ncross-channel coupling k = {:.2e}\n",
            self.cross_channel_coupling
        ));
        for x in &self.crosstalk {
            out.push_str(&format!(
                "crosstalk with channel {} active: idle/active = {:.2e} ({:.1} A / {:.1} A)\n",
                x.active_channel, x.ratio, x.idle_peak_a, x.active_peak_a
            ));
        }

        out.push_str("\n=== Input power at rated current ===\n");
        for ch in &self.channels {
            out.push_str(&format!(
                "channel {}: coil {:.2} kW, apparent {:.2} kVA, line {:.1} A rms (efficiency {:.2})\n",
                ch.channel,
                ch.input_power.coil_dissipation_w / 1e3,
                ch.input_power.apparent_power_va / 1e3,
                ch.input_power.line_current_a,
                ch.input_power.efficiency,
            ));
        }

        out.push_str("\n=== Thermal ===\n");
        for ch in &self.channels {
            out.push_str(&format!(
                "channel {}: coil dT {:.1} C over {:.1} s ({:.2} C/s)\n",
                ch.channel, ch.coil_heating.delta_t, ch.coil_heating.duration, ch.coil_heating.rate,
            ));
            if let Some(safety) = &ch.wall_safety {
                out.push_str(&format!(
                    "channel {}: wall rate {:.2} C/s vs limit {:.2} C/s -> {} (margin {:.2})\n",
                    ch.channel,
                    safety.rate,
                    safety.limit,
                    if safety.pass { "pass" } else { "FAIL" },
                    safety.margin,
                ));
            }
        }

        if !self.samples.is_empty() {
            out.push_str("\n=== Nanoparticle heating ===\n");
            for s in &self.samples {
                for h in &s.heating {
                    out.push_str(&format!(
                        "{}: channel {} -> {:.2} C/s, dT {:.1} C\n",
                        s.name, h.channel, h.rate_c_per_s, h.delta_t_c
                    ));
                }
            }
        }
        out
    }
}

/// Simulate one channel at rated duty with the other idle and measure the
/// induced idle-channel current.
pub fn crosstalk_simulation(
    config: &ChamberConfig,
    active_channel: u8,
    coupling: f64,
) -> Result<CrosstalkReport, ReportError> {
    let n1 = config.network(1)?;
    let n2 = config.network(2)?;
    let ch_active = config.channel(active_channel)?;
    let f1 = predicted_resonance(n1, 0);
    let f2 = predicted_resonance(n2, 0);

    let drive_for = |channel: u8, frequency: f64| -> DriveWaveformSpec {
        if channel == active_channel {
            DriveWaveformSpec::new(
                frequency,
                ch_active.max_duty,
                ch_active_bus(config, channel),
            )
        } else {
            DriveWaveformSpec::idle(frequency)
        }
    };
    let d1 = drive_for(1, f1);
    let d2 = drive_for(2, f2);

    let f_fast = f1.max(f2);
    let step = 1.0 / (f_fast * 220.0);
    // Long enough for the active channel's envelope to settle.
    let active_net = if active_channel == 1 { n1 } else { n2 };
    let q = 2.0 * PI * predicted_resonance(active_net, 0) * active_net.equivalent_inductance(0)
        / active_net.series_resistance.max(1e-6);
    let f_active = if active_channel == 1 { f1 } else { f2 };
    let settle = (2.5 * q).ceil().max(40.0) / f_active;
    let duration = settle.max(21.0 / f1.min(f2));

    let trace = simulate_transient([n1, n2], [&d1, &d2], coupling, duration, step)?;
    let metrics = steady_state(&trace, 10)?;
    let active_idx = (active_channel - 1) as usize;
    Ok(CrosstalkReport {
        active_channel,
        active_peak_a: metrics.peak_current[active_idx],
        idle_peak_a: metrics.peak_current[1 - active_idx],
        ratio: metrics.crosstalk_ratio,
    })
}

fn ch_active_bus(config: &ChamberConfig, channel: u8) -> f64 {
    config
        .network(channel)
        .map(|n| n.dc_bus_voltage)
        .unwrap_or(48.0)
}
