//! Resonant network design: compensation capacitance with mutual-inductance
//! correction, discrete capacitor-bank synthesis from stock values, and
//! resonant-frequency prediction both closed-form and by simulated sweep.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::ResonantNetwork;
use crate::drive::{simulate_transient, steady_state, DriveWaveformSpec, SolverError};

#[derive(Debug, Error)]
pub enum ResonanceError {
    #[error("{quantity} must be positive, got {value}")]
    NonPositive { quantity: &'static str, value: f64 },
    #[error(
        "no capacitor combination within 10% of target {target_farad:.4e} F with at most {max_parts} parts per group (best: {best_farad:.4e} F)"
    )]
    NoBankWithinTolerance {
        target_farad: f64,
        max_parts: u32,
        best_farad: f64,
    },
    #[error("empty capacitor stock")]
    EmptyStock,
    #[error(
        "sweep range [{lo} Hz, {hi} Hz] does not contain the predicted resonance {predicted} Hz"
    )]
    SweepRangeExcludesResonance { lo: f64, hi: f64, predicted: f64 },
    #[error("sweep needs at least 8 steps, got {0}")]
    TooFewSweepSteps(u32),
    #[error("sweep simulation failed at {frequency} Hz: {source}")]
    SweepSimulation { frequency: f64, source: SolverError },
}

/// Series compensation capacitance canceling the coil-half reactance
/// including the mutual contribution: C = 1 / (omega^2 (L + M)).
pub fn compensation_capacitance(
    frequency: f64,
    self_inductance: f64,
    mutual: f64,
) -> Result<f64, ResonanceError> {
    if frequency <= 0.0 {
        return Err(ResonanceError::NonPositive {
            quantity: "frequency",
            value: frequency,
        });
    }
    if self_inductance <= 0.0 {
        return Err(ResonanceError::NonPositive {
            quantity: "self_inductance",
            value: self_inductance,
        });
    }
    if mutual < 0.0 {
        return Err(ResonanceError::NonPositive {
            quantity: "mutual",
            value: mutual,
        });
    }
    let omega = 2.0 * PI * frequency;
    Ok(1.0 / (omega * omega * (self_inductance + mutual)))
}

/// A compensation bank: two identical parallel groups connected in series, so
/// the effective capacitance is half the group sum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacitorBank {
    /// (stock value in F, count) pairs of one parallel group; counts >= 1.
    pub stock_value_counts: Vec<(f64, u32)>,
}

impl CapacitorBank {
    /// Sum of one parallel group (F).
    pub fn group_capacitance(&self) -> f64 {
        self.stock_value_counts
            .iter()
            .map(|&(value, count)| value * count as f64)
            .sum()
    }

    /// Effective capacitance of the series pair of groups (F).
    pub fn effective_capacitance(&self) -> f64 {
        self.group_capacitance() / 2.0
    }

    /// Parts in one group.
    pub fn parts_per_group(&self) -> u32 {
        self.stock_value_counts.iter().map(|&(_, n)| n).sum()
    }

    /// Human-readable composition, e.g. `(6 x 680.0 nF) / 2`.
    pub fn describe(&self) -> String {
        let terms: Vec<String> = self
            .stock_value_counts
            .iter()
            .map(|&(value, count)| format!("{} x {:.4} nF", count, value * 1e9))
            .collect();
        format!("({}) / 2", terms.join(" + "))
    }
}

/// Exhaustively search bounded part counts for the bank whose effective
/// capacitance is closest to `target`. Ties prefer fewer parts, then the
/// lexicographically smallest count vector over the stock order. Errors when
/// the best reachable bank deviates more than 10% from the target.
pub fn compose_bank(
    target: f64,
    stock: &[f64],
    max_parts_per_group: u32,
) -> Result<CapacitorBank, ResonanceError> {
    if target <= 0.0 {
        return Err(ResonanceError::NonPositive {
            quantity: "target",
            value: target,
        });
    }
    if stock.is_empty() {
        return Err(ResonanceError::EmptyStock);
    }

    struct Best {
        deviation: f64,
        parts: u32,
        counts: Vec<u32>,
    }

    struct Search<'a> {
        stock: &'a [f64],
        target: f64,
        budget: u32,
        counts: Vec<u32>,
        best: Option<Best>,
    }

    impl Search<'_> {
        fn recurse(&mut self, idx: usize, used: u32, group_sum: f64) {
            if idx == self.stock.len() {
                if used == 0 {
                    return;
                }
                let deviation = (group_sum / 2.0 - self.target).abs();
                let better = match &self.best {
                    None => true,
                    Some(b) => {
                        deviation < b.deviation - f64::EPSILON * self.target
                            || ((deviation - b.deviation).abs() <= f64::EPSILON * self.target
                                && (used < b.parts || (used == b.parts && self.counts < b.counts)))
                    }
                };
                if better {
                    self.best = Some(Best {
                        deviation,
                        parts: used,
                        counts: self.counts.clone(),
                    });
                }
                return;
            }
            for n in 0..=(self.budget - used) {
                self.counts[idx] = n;
                self.recurse(idx + 1, used + n, group_sum + self.stock[idx] * n as f64);
            }
            self.counts[idx] = 0;
        }
    }

    let mut search = Search {
        stock,
        target,
        budget: max_parts_per_group,
        counts: vec![0u32; stock.len()],
        best: None,
    };
    search.recurse(0, 0, 0.0);

    let best = search.best.ok_or(ResonanceError::EmptyStock)?;
    let bank = CapacitorBank {
        stock_value_counts: stock
            .iter()
            .zip(&best.counts)
            .filter(|&(_, &n)| n > 0)
            .map(|(&v, &n)| (v, n))
            .collect(),
    };
    let effective = bank.effective_capacitance();
    if (effective - target).abs() > 0.10 * target {
        return Err(ResonanceError::NoBankWithinTolerance {
            target_farad: target,
            max_parts: max_parts_per_group,
            best_farad: effective,
        });
    }
    Ok(bank)
}

/// Closed-form series resonance of one coil half:
/// f = 1 / (2 pi sqrt((L_half + M) C_half)).
pub fn predicted_resonance(network: &ResonantNetwork, half: usize) -> f64 {
    let l_eq = network.equivalent_inductance(half);
    let c = network.compensation[half];
    1.0 / (2.0 * PI * (l_eq * c).sqrt())
}

/// Locate the resonance by sweeping the drive frequency and maximizing the
/// simulated steady-state current amplitude (the frequency-confirmation
/// procedure used on the bench). Sweep points run concurrently.
pub fn sweep_resonance(
    network: &ResonantNetwork,
    drive: &DriveWaveformSpec,
    f_range: (f64, f64),
    steps: u32,
) -> Result<f64, ResonanceError> {
    if steps < 8 {
        return Err(ResonanceError::TooFewSweepSteps(steps));
    }
    let predicted = predicted_resonance(network, 0);
    let (lo, hi) = f_range;
    if !(lo < predicted && predicted < hi) {
        return Err(ResonanceError::SweepRangeExcludesResonance { lo, hi, predicted });
    }

    // The idle second loop is far detuned so it does not disturb the sweep.
    let idle_network = ResonantNetwork {
        channel: if network.channel == 1 { 2 } else { 1 },
        ..network.clone()
    };
    let amplitude_at = |frequency: f64| -> Result<f64, ResonanceError> {
        let d_active = DriveWaveformSpec {
            frequency,
            ..drive.clone()
        };
        let d_idle = DriveWaveformSpec::idle(frequency);
        let step = 1.0 / (frequency * 220.0);
        // Settle long enough for the envelope at this Q before measuring.
        let q = 2.0 * PI * predicted * network.equivalent_inductance(0)
            / network.series_resistance.max(1e-6);
        let settle_cycles = (2.0 * q).ceil().max(40.0);
        let duration = (settle_cycles + 20.0) / frequency;
        let trace = simulate_transient(
            [network, &idle_network],
            [&d_active, &d_idle],
            0.0,
            duration,
            step,
        )
        .map_err(|source| ResonanceError::SweepSimulation { frequency, source })?;
        let metrics = steady_state(&trace, 10)
            .map_err(|source| ResonanceError::SweepSimulation { frequency, source })?;
        Ok(metrics.peak_current[0])
    };

    let freqs: Vec<f64> = (0..steps)
        .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
        .collect();
    let amplitudes: Vec<f64> = freqs
        .par_iter()
        .map(|&f| amplitude_at(f))
        .collect::<Result<_, _>>()?;

    let best = amplitudes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(freqs[best])
}

/// One row of the compensation design table, mirroring the JSON export
/// schema of the `design-caps` command.
#[derive(Debug, Clone, Serialize)]
pub struct DesignRow {
    pub channel: u8,
    pub half: u8,
    #[serde(rename = "C_calc_F")]
    pub c_calc_f: f64,
    pub bank_parts: Vec<(f64, u32)>,
    #[serde(rename = "C_bank_F")]
    pub c_bank_f: f64,
    #[serde(rename = "f_predicted_Hz")]
    pub f_predicted_hz: f64,
}

/// Design both halves of a network: calculated compensation from the channel
/// frequency, a bank synthesized toward the as-built compensation value, and
/// the predicted resonance of the implemented network.
pub fn design_network(
    network: &ResonantNetwork,
    nominal_frequency: f64,
) -> Result<Vec<DesignRow>, ResonanceError> {
    (0..2)
        .map(|half| {
            let c_calc = compensation_capacitance(
                nominal_frequency,
                network.coil_half_inductances[half],
                network.mutual,
            )?;
            let bank = compose_bank(
                network.compensation[half],
                &network.bank_stock,
                network.bank_max_parts,
            )?;
            Ok(DesignRow {
                channel: network.channel,
                half: half as u8 + 1,
                c_calc_f: c_calc,
                c_bank_f: bank.effective_capacitance(),
                bank_parts: bank.stock_value_counts,
                f_predicted_hz: predicted_resonance(network, half),
            })
        })
        .collect()
}
