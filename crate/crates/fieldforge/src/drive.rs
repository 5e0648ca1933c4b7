//! Behavioral inverter-drive and coupled resonant-circuit simulation.
//!
//! Each channel's two synchronized coil halves reduce to one series RLC loop
//! with L_eq = L_half + M and the half's own compensation capacitor; the two
//! channel loops couple through a mutual term M_x = k sqrt(L1 L2). The state
//! is integrated with fixed-step RK4.

use std::f64::consts::PI;

use thiserror::Error;

use crate::config::ResonantNetwork;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("duty ratio {0} outside [0, 1]")]
    InvalidDuty(f64),
    #[error("interleave submodule count {0} unsupported; expected 1 or 2")]
    InvalidSubmodules(u8),
    #[error("step {step:.3e} s too coarse: need at least 200 steps per period of the faster channel ({required:.3e} s)")]
    StepTooCoarse { step: f64, required: f64 },
    #[error("duration {duration:.3e} s too short: need at least 20 periods of the slower channel ({required:.3e} s)")]
    DurationTooShort { duration: f64, required: f64 },
    #[error("state diverged (non-finite) at t = {time:.6e} s")]
    Diverged { time: f64 },
    #[error("trace too short: tail of {requested} cycles needs {required} samples, trace has {available}")]
    InsufficientTrace {
        requested: u32,
        required: usize,
        available: usize,
    },
    #[error("efficiency {0} outside (0, 1]")]
    InvalidEfficiency(f64),
}

/// PWM drive description for one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveWaveformSpec {
    /// Switching (output) frequency (Hz).
    pub frequency: f64,
    /// Pulse width as a fraction of the half-period, in [0, 1].
    pub duty: f64,
    /// DC bus voltage (V).
    pub bus_voltage: f64,
    /// 1 = single inverter set, 2 = alternating submodules.
    pub interleave_submodules: u8,
    /// Phase offset (rad).
    pub phase: f64,
}

impl DriveWaveformSpec {
    pub fn new(frequency: f64, duty: f64, bus_voltage: f64) -> Self {
        Self {
            frequency,
            duty,
            bus_voltage,
            interleave_submodules: 1,
            phase: 0.0,
        }
    }

    /// An undriven channel: zero duty at the given frequency.
    pub fn idle(frequency: f64) -> Self {
        Self::new(frequency, 0.0, 0.0)
    }

    pub fn period(&self) -> f64 {
        1.0 / self.frequency
    }
}

/// Fundamental Fourier amplitude of the biphasic PWM train:
/// (4 V_bus / pi) sin(pi d / 2).
pub fn pwm_fundamental_amplitude(bus_voltage: f64, duty: f64) -> f64 {
    4.0 * bus_voltage / PI * (PI * duty / 2.0).sin()
}

/// Series resistance that makes the rated duty drive the rated current at
/// resonance, where the tank load is purely resistive.
pub fn calibrated_series_resistance(bus_voltage: f64, max_duty: f64, max_current: f64) -> f64 {
    pwm_fundamental_amplitude(bus_voltage, max_duty) / max_current
}

/// Biphasic rectangular drive voltage at time `t`: a +V_bus pulse of width
/// duty*T/2 centered in the first half-period, the mirrored -V_bus pulse in
/// the second, zero elsewhere.
pub fn pwm_voltage(spec: &DriveWaveformSpec, t: f64) -> f64 {
    if spec.duty <= 0.0 {
        return 0.0;
    }
    let period = spec.period();
    let t_eff = t + spec.phase / (2.0 * PI) * period;
    let u = t_eff.rem_euclid(period);
    let half = period / 2.0;
    let (offset, sign) = if u < half { (u, 1.0) } else { (u - half, -1.0) };
    let half_width = spec.duty * period / 4.0;
    if (offset - half / 2.0).abs() <= half_width {
        sign * spec.bus_voltage
    } else {
        0.0
    }
}

/// Per-submodule pulse trains of the interleaved drive.
///
/// Pulses are numbered along the combined train (one per half-period);
/// submodule A produces the odd-numbered pulses and submodule B the
/// even-numbered ones, so each submodule switches at half the combined rate
/// while the superposition reproduces the full train sample for sample.
#[derive(Debug, Clone)]
pub struct InterleaveSchedule {
    spec: DriveWaveformSpec,
}

/// Split the drive into per-submodule pulse trains. Errors when the spec's
/// submodule count is not 1 or 2; with 1 submodule the schedule degenerates
/// to the full train on submodule A.
pub fn interleave_schedule(spec: &DriveWaveformSpec) -> Result<InterleaveSchedule, SolverError> {
    match spec.interleave_submodules {
        1 | 2 => Ok(InterleaveSchedule { spec: spec.clone() }),
        n => Err(SolverError::InvalidSubmodules(n)),
    }
}

impl InterleaveSchedule {
    pub fn submodules(&self) -> usize {
        self.spec.interleave_submodules as usize
    }

    /// Voltage contributed by one submodule (0 = A, 1 = B) at time `t`.
    pub fn submodule_voltage(&self, submodule: usize, t: f64) -> f64 {
        let v = pwm_voltage(&self.spec, t);
        if v == 0.0 {
            return 0.0;
        }
        if self.spec.interleave_submodules == 1 {
            return if submodule == 0 { v } else { 0.0 };
        }
        let period = self.spec.period();
        let t_eff = t + self.spec.phase / (2.0 * PI) * period;
        // One pulse per half-period, so the 0-based pulse parity is just
        // which half of the period we are in; 1-based odd pulses go to A.
        let parity = (t_eff.rem_euclid(period) >= period / 2.0) as usize;
        if parity == submodule {
            v
        } else {
            0.0
        }
    }

    /// Superposition of all submodules; equals [`pwm_voltage`] exactly.
    pub fn combined_voltage(&self, t: f64) -> f64 {
        pwm_voltage(&self.spec, t)
    }
}

/// Time series from a transient run. All arrays share the uniform `step`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub step: f64,
    pub times: Vec<f64>,
    /// Coil current per channel (A).
    pub currents: [Vec<f64>; 2],
    /// Terminal voltage of one coil half per channel (V); the halves of a
    /// channel are identical synchronized loops.
    pub half_voltages: [Vec<f64>; 2],
    /// Applied drive voltage per channel (V).
    pub drive_voltages: [Vec<f64>; 2],
    pub drive_frequencies: [f64; 2],
    pub drive_duties: [f64; 2],
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV export: `t_s,I1_A,I2_A,V1_V,V2_V,Vdrive1_V,Vdrive2_V`.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 96 + 64);
        out.push_str("t_s,I1_A,I2_A,V1_V,V2_V,Vdrive1_V,Vdrive2_V\n");
        for i in 0..self.len() {
            out.push_str(&format!(
                "{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}\n",
                self.times[i],
                self.currents[0][i],
                self.currents[1][i],
                self.half_voltages[0][i],
                self.half_voltages[1][i],
                self.drive_voltages[0][i],
                self.drive_voltages[1][i],
            ));
        }
        out
    }
}

/// Steady-state electrical metrics over the trailing window of a trace.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SteadyStateMetrics {
    /// Peak coil current per channel (A).
    pub peak_current: [f64; 2],
    /// Peak coil-half terminal voltage per channel (V).
    pub peak_coil_voltage: [f64; 2],
    /// Idle-channel peak current over active-channel peak current.
    pub crosstalk_ratio: f64,
    /// Cycles of the active channel until the envelope reaches 95% of its
    /// final amplitude.
    pub settle_cycles: u32,
}

struct ChannelLoop {
    l_eq: f64,
    c: f64,
    r: f64,
}

/// Fixed-step RK4 integration of the two coupled channel loops.
///
/// State: [i1, q1, i2, q2] with q the compensation-capacitor charge.
/// Preconditions: `step` resolves the faster channel with >= 200 points per
/// period and `duration` covers >= 20 periods of the slower channel.
pub fn simulate_transient(
    networks: [&ResonantNetwork; 2],
    drives: [&DriveWaveformSpec; 2],
    cross_coupling: f64,
    duration: f64,
    step: f64,
) -> Result<SimTrace, SolverError> {
    simulate_transient_from(networks, drives, cross_coupling, duration, step, [0.0; 4])
}

/// Same as [`simulate_transient`] with an explicit initial state
/// [i1, q1, i2, q2]; used for free-ringing and energy-conservation studies.
pub fn simulate_transient_from(
    networks: [&ResonantNetwork; 2],
    drives: [&DriveWaveformSpec; 2],
    cross_coupling: f64,
    duration: f64,
    step: f64,
    initial: [f64; 4],
) -> Result<SimTrace, SolverError> {
    for d in &drives {
        if !(0.0..=1.0).contains(&d.duty) {
            return Err(SolverError::InvalidDuty(d.duty));
        }
    }
    let f_fast = drives[0].frequency.max(drives[1].frequency);
    let f_slow = drives[0].frequency.min(drives[1].frequency);
    let max_step = 1.0 / (f_fast * 200.0);
    if step > max_step * (1.0 + 1e-12) {
        return Err(SolverError::StepTooCoarse {
            step,
            required: max_step,
        });
    }
    let min_duration = 20.0 / f_slow;
    if duration < min_duration * (1.0 - 1e-12) {
        return Err(SolverError::DurationTooShort {
            duration,
            required: min_duration,
        });
    }

    let loops = [
        ChannelLoop {
            l_eq: networks[0].equivalent_inductance(0),
            c: networks[0].compensation[0],
            r: networks[0].series_resistance,
        },
        ChannelLoop {
            l_eq: networks[1].equivalent_inductance(0),
            c: networks[1].compensation[0],
            r: networks[1].series_resistance,
        },
    ];
    let m_x = cross_coupling * (loops[0].l_eq * loops[1].l_eq).sqrt();
    let det = loops[0].l_eq * loops[1].l_eq - m_x * m_x;
    // Inverse of the inductance matrix [[L1, Mx], [Mx, L2]].
    let inv = [
        [loops[1].l_eq / det, -m_x / det],
        [-m_x / det, loops[0].l_eq / det],
    ];

    let deriv = |t: f64, y: &[f64; 4]| -> [f64; 4] {
        let e1 = pwm_voltage(drives[0], t) - loops[0].r * y[0] - y[1] / loops[0].c;
        let e2 = pwm_voltage(drives[1], t) - loops[1].r * y[2] - y[3] / loops[1].c;
        [
            inv[0][0] * e1 + inv[0][1] * e2,
            y[0],
            inv[1][0] * e1 + inv[1][1] * e2,
            y[2],
        ]
    };

    let n_steps = (duration / step).round() as usize;
    let mut y = initial;
    let mut trace = SimTrace {
        step,
        times: Vec::with_capacity(n_steps + 1),
        currents: [
            Vec::with_capacity(n_steps + 1),
            Vec::with_capacity(n_steps + 1),
        ],
        half_voltages: [
            Vec::with_capacity(n_steps + 1),
            Vec::with_capacity(n_steps + 1),
        ],
        drive_voltages: [
            Vec::with_capacity(n_steps + 1),
            Vec::with_capacity(n_steps + 1),
        ],
        drive_frequencies: [drives[0].frequency, drives[1].frequency],
        drive_duties: [drives[0].duty, drives[1].duty],
    };

    let mut record = |t: f64, y: &[f64; 4], dy: &[f64; 4]| {
        trace.times.push(t);
        trace.currents[0].push(y[0]);
        trace.currents[1].push(y[2]);
        trace.half_voltages[0].push(loops[0].l_eq * dy[0] + m_x * dy[2]);
        trace.half_voltages[1].push(loops[1].l_eq * dy[2] + m_x * dy[0]);
        trace.drive_voltages[0].push(pwm_voltage(drives[0], t));
        trace.drive_voltages[1].push(pwm_voltage(drives[1], t));
    };

    let mut t = 0.0;
    let dy0 = deriv(t, &y);
    record(t, &y, &dy0);
    for _ in 0..n_steps {
        let k1 = deriv(t, &y);
        let y2 = rk_state(&y, &k1, step / 2.0);
        let k2 = deriv(t + step / 2.0, &y2);
        let y3 = rk_state(&y, &k2, step / 2.0);
        let k3 = deriv(t + step / 2.0, &y3);
        let y4 = rk_state(&y, &k3, step);
        let k4 = deriv(t + step, &y4);
        for i in 0..4 {
            y[i] += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t += step;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::Diverged { time: t });
        }
        let dy = deriv(t, &y);
        record(t, &y, &dy);
    }
    Ok(trace)
}

#[inline]
fn rk_state(y: &[f64; 4], k: &[f64; 4], h: f64) -> [f64; 4] {
    [
        y[0] + h * k[0],
        y[1] + h * k[1],
        y[2] + h * k[2],
        y[3] + h * k[3],
    ]
}

/// Peak metrics computed over the trailing `tail_cycles` full periods of the
/// slower driven channel.
pub fn steady_state(trace: &SimTrace, tail_cycles: u32) -> Result<SteadyStateMetrics, SolverError> {
    let duty = trace.drive_duties;
    let active: Vec<usize> = (0..2).filter(|&ch| duty[ch] > 0.0).collect();
    let reference_freq = match active.len() {
        0 => trace.drive_frequencies[0].min(trace.drive_frequencies[1]),
        1 => trace.drive_frequencies[active[0]],
        _ => trace.drive_frequencies[0].min(trace.drive_frequencies[1]),
    };
    let samples_per_cycle = (1.0 / (reference_freq * trace.step)).round() as usize;
    let window = samples_per_cycle * tail_cycles as usize;
    if window == 0 || window >= trace.len() {
        return Err(SolverError::InsufficientTrace {
            requested: tail_cycles,
            required: window + 1,
            available: trace.len(),
        });
    }
    let start = trace.len() - window;

    let peak_abs = |xs: &[f64]| xs[start..].iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    let peak_current = [peak_abs(&trace.currents[0]), peak_abs(&trace.currents[1])];
    let peak_coil_voltage = [
        peak_abs(&trace.half_voltages[0]),
        peak_abs(&trace.half_voltages[1]),
    ];

    let crosstalk_ratio = match active.as_slice() {
        [one] => {
            let idle = 1 - one;
            if peak_current[*one] > 0.0 {
                peak_current[idle] / peak_current[*one]
            } else {
                0.0
            }
        }
        [_, _] => {
            let hi = peak_current[0].max(peak_current[1]);
            if hi > 0.0 {
                peak_current[0].min(peak_current[1]) / hi
            } else {
                0.0
            }
        }
        _ => 0.0,
    };

    // Envelope settling: first cycle whose peak reaches 95% of the final
    // tail amplitude.
    let watch = active.first().copied().unwrap_or(0);
    let final_peak = peak_current[watch];
    let mut settle_cycles = 0u32;
    let per_cycle = (1.0 / (trace.drive_frequencies[watch] * trace.step)).round() as usize;
    if final_peak > 0.0 && per_cycle > 0 {
        for (c, chunk) in trace.currents[watch].chunks(per_cycle).enumerate() {
            let peak = chunk.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
            if peak >= 0.95 * final_peak {
                settle_cycles = c as u32;
                break;
            }
        }
    }

    Ok(SteadyStateMetrics {
        peak_current,
        peak_coil_voltage,
        crosstalk_ratio,
        settle_cycles,
    })
}

/// Coil dissipation, apparent input power, and three-phase line current for
/// one channel: P = I_pk^2 R / 2, S = P / efficiency, I_line = S / (sqrt(3) V).
pub fn estimate_input_power(
    metrics: &SteadyStateMetrics,
    channel: usize,
    network: &ResonantNetwork,
    line_voltage: f64,
    efficiency: f64,
) -> Result<(f64, f64), SolverError> {
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return Err(SolverError::InvalidEfficiency(efficiency));
    }
    let i_pk = metrics.peak_current[channel];
    let dissipated = 0.5 * i_pk * i_pk * network.series_resistance;
    let apparent = dissipated / efficiency;
    let line_current = apparent / (3.0_f64.sqrt() * line_voltage);
    Ok((apparent, line_current))
}

/// Apparent power drawn from a three-phase outlet at the given rms line
/// current: S = sqrt(3) V I.
pub fn three_phase_apparent_power(line_voltage: f64, line_current: f64) -> f64 {
    3.0_f64.sqrt() * line_voltage * line_current
}
