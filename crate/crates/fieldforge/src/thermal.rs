//! Loss and heating models: litz-wire AC resistance, lumped coil temperature
//! rise against a coolant sink, nanoparticle specific absorption rate, and
//! the wall heating safety check.

use std::f64::consts::PI;

use thiserror::Error;

use crate::config::{
    LitzWireSpec, NanoparticleSample, ResonantNetwork, ThermalParams, WindingGeometry,
};
use crate::magnetics::MU0;
use crate::resonance::predicted_resonance;

#[derive(Debug, Error)]
pub enum ThermalError {
    #[error("{quantity} must be positive, got {value}")]
    NonPositive { quantity: &'static str, value: f64 },
    #[error("sample {sample:?} has no SAR entry for channel {channel}")]
    MissingChannelSar { sample: String, channel: u8 },
}

/// Result of a heating computation or measurement.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct HeatingResult {
    /// Average heating rate (degrees C per s).
    pub rate: f64,
    /// Temperature change over the run (degrees C).
    pub delta_t: f64,
    /// Run duration (s).
    pub duration: f64,
    /// Sample name or coil identifier.
    pub subject: String,
}

/// Outcome of checking a heating rate against the wall safety limit.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SafetyCheck {
    pub pass: bool,
    /// limit - rate (degrees C per s); negative when failing.
    pub margin: f64,
    pub limit: f64,
    pub rate: f64,
}

/// Skin depth delta = sqrt(2 rho / (omega mu0)) (m).
pub fn skin_depth(resistivity: f64, frequency: f64) -> f64 {
    (2.0 * resistivity / (2.0 * PI * frequency * MU0)).sqrt()
}

/// AC resistance of a litz conductor: R_dc scaled by the low-frequency skin
/// factor 1 + (d/(2 delta))^4 / 3, with the strand radius clamped to the skin
/// depth where the low-frequency expansion stops being valid.
pub fn litz_resistance(wire: &LitzWireSpec, length: f64, frequency: f64) -> f64 {
    let r_dc = wire.conductor_resistivity * length / wire.copper_area();
    if frequency <= 0.0 {
        return r_dc;
    }
    let delta = skin_depth(wire.conductor_resistivity, frequency);
    let r_strand = (wire.strand_diameter / 2.0).min(delta);
    r_dc * (1.0 + (r_strand / delta).powi(4) / 3.0)
}

/// Temperature curve (t, T) of the lumped coil:
/// m c dT/dt = I^2 R_ac / 2 - G (T - T_coolant), integrated with fixed-step
/// RK4 from ambient. The coolant is an infinite sink at ambient temperature.
pub fn coil_temperature_curve(
    network: &ResonantNetwork,
    wire: &LitzWireSpec,
    geometry: &WindingGeometry,
    current: f64,
    duration: f64,
    params: &ThermalParams,
) -> Vec<(f64, f64)> {
    let length = geometry.conductor_length();
    let frequency = predicted_resonance(network, 0);
    let r_ac = litz_resistance(wire, length, frequency) * params.proximity_factor;
    let power = 0.5 * current * current * r_ac;
    let mass = length * wire.copper_area() * params.copper_density;
    let heat_capacity = mass * params.copper_specific_heat;
    let sink = params.coolant_sink_conductance;
    let t_coolant = params.ambient;

    let derivative = |temp: f64| -> f64 { (power - sink * (temp - t_coolant)) / heat_capacity };

    let n_steps = 2000usize;
    let h = duration / n_steps as f64;
    let mut temp = params.ambient;
    let mut curve = Vec::with_capacity(n_steps + 1);
    curve.push((0.0, temp));
    for i in 0..n_steps {
        let k1 = derivative(temp);
        let k2 = derivative(temp + h / 2.0 * k1);
        let k3 = derivative(temp + h / 2.0 * k2);
        let k4 = derivative(temp + h * k3);
        temp += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        curve.push(((i + 1) as f64 * h, temp));
    }
    curve
}

/// Net temperature rise of the coil lump over a run at constant peak current.
pub fn coil_temperature_rise(
    network: &ResonantNetwork,
    wire: &LitzWireSpec,
    geometry: &WindingGeometry,
    current: f64,
    duration: f64,
    params: &ThermalParams,
) -> Result<HeatingResult, ThermalError> {
    if duration <= 0.0 {
        return Err(ThermalError::NonPositive {
            quantity: "duration",
            value: duration,
        });
    }
    let curve = coil_temperature_curve(network, wire, geometry, current, duration, params);
    let delta_t = curve
        .last()
        .map(|&(_, t)| t - params.ambient)
        .unwrap_or(0.0);
    Ok(HeatingResult {
        rate: delta_t / duration,
        delta_t,
        duration,
        subject: format!("coil #{}", geometry.coil_id),
    })
}

/// Specific absorption rate from a measured heating ramp:
/// SAR = (C rho_medium / concentration) (dT/dt), in W per kg of metal.
pub fn sar(
    sample: &NanoparticleSample,
    delta_t: f64,
    delta_time: f64,
) -> Result<f64, ThermalError> {
    if delta_time <= 0.0 {
        return Err(ThermalError::NonPositive {
            quantity: "delta_t (time)",
            value: delta_time,
        });
    }
    Ok(
        sample.medium_heat_capacity * sample.medium_density / sample.metal_concentration
            * (delta_t / delta_time),
    )
}

/// Predicted constant-rate heating of a sample in one channel's field:
/// rate = SAR * concentration / (C rho_medium), delta_T = rate * duration.
pub fn heating_curve(
    sample: &NanoparticleSample,
    channel: u8,
    duration: f64,
) -> Result<HeatingResult, ThermalError> {
    if duration <= 0.0 {
        return Err(ThermalError::NonPositive {
            quantity: "duration",
            value: duration,
        });
    }
    let sar_value =
        sample
            .sar_for_channel(channel)
            .ok_or_else(|| ThermalError::MissingChannelSar {
                sample: sample.name.clone(),
                channel,
            })?;
    let rate = sar_value * sample.metal_concentration
        / (sample.medium_heat_capacity * sample.medium_density);
    Ok(HeatingResult {
        rate,
        delta_t: rate * duration,
        duration,
        subject: sample.name.clone(),
    })
}

/// Pass iff the wall heating rate sits strictly below the configured limit.
pub fn safety_check(wall_result: &HeatingResult, params: &ThermalParams) -> SafetyCheck {
    SafetyCheck {
        pass: wall_result.rate < params.wall_rate_limit,
        margin: params.wall_rate_limit - wall_result.rate,
        limit: params.wall_rate_limit,
        rate: wall_result.rate,
    }
}
