//! Parsing and formatting of unit-suffixed quantities in config files.
//!
//! Every dimensioned value in a config file is written as a string holding a
//! number followed by a unit suffix, e.g. `"50 kHz"`, `"4.4 uH"`, `"-28 mm"`.
//! Internally everything is SI (Hz, T, A, V, H, F, Ohm, m, s). Serialization
//! always emits the SI unit so that a round trip reproduces the same values.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum UnitError {
    #[error("cannot parse quantity {input:?}: missing numeric value")]
    MissingNumber { input: String },
    #[error("quantity {input:?} has no unit suffix; expected one of {expected}")]
    MissingUnit { input: String, expected: String },
    #[error("unknown {dimension} unit {unit:?} in {input:?}; expected one of {expected}")]
    UnknownUnit {
        input: String,
        unit: String,
        dimension: &'static str,
        expected: String,
    },
}

/// A physical dimension with its accepted unit suffixes and their SI scale
/// factors. The first entry is the SI unit used when formatting.
pub struct UnitTable {
    pub dimension: &'static str,
    pub units: &'static [(&'static str, f64)],
}

pub const FREQUENCY: UnitTable = UnitTable {
    dimension: "frequency",
    units: &[("Hz", 1.0), ("kHz", 1e3), ("MHz", 1e6)],
};

pub const FLUX_DENSITY: UnitTable = UnitTable {
    dimension: "flux density",
    units: &[("T", 1.0), ("mT", 1e-3), ("uT", 1e-6), ("µT", 1e-6)],
};

pub const CURRENT: UnitTable = UnitTable {
    dimension: "current",
    units: &[("A", 1.0), ("kA", 1e3), ("mA", 1e-3)],
};

pub const VOLTAGE: UnitTable = UnitTable {
    dimension: "voltage",
    units: &[("V", 1.0), ("kV", 1e3), ("mV", 1e-3)],
};

pub const INDUCTANCE: UnitTable = UnitTable {
    dimension: "inductance",
    units: &[
        ("H", 1.0),
        ("mH", 1e-3),
        ("uH", 1e-6),
        ("µH", 1e-6),
        ("nH", 1e-9),
    ],
};

pub const CAPACITANCE: UnitTable = UnitTable {
    dimension: "capacitance",
    units: &[
        ("F", 1.0),
        ("mF", 1e-3),
        ("uF", 1e-6),
        ("µF", 1e-6),
        ("nF", 1e-9),
        ("pF", 1e-12),
    ],
};

pub const RESISTANCE: UnitTable = UnitTable {
    dimension: "resistance",
    units: &[("Ohm", 1.0), ("kOhm", 1e3), ("mOhm", 1e-3), ("uOhm", 1e-6)],
};

pub const RESISTIVITY: UnitTable = UnitTable {
    dimension: "resistivity",
    units: &[("Ohm m", 1.0)],
};

pub const LENGTH: UnitTable = UnitTable {
    dimension: "length",
    units: &[
        ("m", 1.0),
        ("cm", 1e-2),
        ("mm", 1e-3),
        ("um", 1e-6),
        ("µm", 1e-6),
    ],
};

pub const TIME: UnitTable = UnitTable {
    dimension: "time",
    units: &[("s", 1.0), ("ms", 1e-3), ("us", 1e-6), ("µs", 1e-6)],
};

pub const TEMPERATURE: UnitTable = UnitTable {
    dimension: "temperature",
    units: &[("C", 1.0)],
};

pub const TEMPERATURE_RATE: UnitTable = UnitTable {
    dimension: "temperature rate",
    units: &[("C/s", 1.0)],
};

pub const THERMAL_CONDUCTANCE: UnitTable = UnitTable {
    dimension: "thermal conductance",
    units: &[("W/K", 1.0)],
};

pub const SPECIFIC_HEAT: UnitTable = UnitTable {
    dimension: "specific heat",
    units: &[("J/(kg K)", 1.0)],
};

pub const DENSITY: UnitTable = UnitTable {
    dimension: "density",
    units: &[("kg/m^3", 1.0), ("g/cm^3", 1e3)],
};

/// Mass of metal per volume of suspension. 1 mg/mL == 1 kg/m^3.
pub const CONCENTRATION: UnitTable = UnitTable {
    dimension: "concentration",
    units: &[("kg/m^3", 1.0), ("mg/mL", 1.0), ("g/L", 1.0)],
};

/// Power per mass of magnetic metal.
pub const SPECIFIC_POWER: UnitTable = UnitTable {
    dimension: "specific power",
    units: &[("W/kg", 1.0), ("W/g", 1e3), ("kW/kg", 1e3)],
};

/// Parse a `"<number> <unit>"` string against a unit table, returning the SI
/// value. Whitespace between number and unit is optional.
pub fn parse(table: &UnitTable, input: &str) -> Result<f64, UnitError> {
    let s = input.trim();
    // Greedy: take the longest prefix that parses as a float so that
    // exponents like "1.72e-8" are not confused with a unit suffix.
    let mut split = 0;
    let mut value = 0.0;
    for i in (1..=s.len()).rev() {
        if !s.is_char_boundary(i) {
            continue;
        }
        if let Ok(v) = s[..i].trim_end().parse::<f64>() {
            value = v;
            split = i;
            break;
        }
    }
    if split == 0 {
        return Err(UnitError::MissingNumber {
            input: input.to_string(),
        });
    }
    let unit = normalize_unit(&s[split..]);
    if unit.is_empty() {
        return Err(UnitError::MissingUnit {
            input: input.to_string(),
            expected: expected_units(table),
        });
    }
    for (name, factor) in table.units {
        if normalize_unit(name) == unit {
            return Ok(value * factor);
        }
    }
    Err(UnitError::UnknownUnit {
        input: input.to_string(),
        unit,
        dimension: table.dimension,
        expected: expected_units(table),
    })
}

/// Format an SI value with the table's SI unit. Uses the shortest
/// round-trippable float representation so serialize/parse is lossless.
pub fn format_si(table: &UnitTable, value: f64) -> String {
    format!("{} {}", value, table.units[0].0)
}

fn normalize_unit(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn expected_units(table: &UnitTable) -> String {
    table
        .units
        .iter()
        .map(|(name, _)| *name)
        .collect::<Vec<_>>()
        .join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn parses_common_suffixes() {
        assert_relative_eq!(parse(&FREQUENCY, "50 kHz").unwrap(), 5.0e4);
        assert_relative_eq!(parse(&FREQUENCY, "550kHz").unwrap(), 5.5e5);
        assert_relative_eq!(parse(&INDUCTANCE, "4.4 uH").unwrap(), 4.4e-6);
        assert_relative_eq!(parse(&INDUCTANCE, "0.7 µH").unwrap(), 7.0e-7);
        assert_relative_eq!(parse(&CAPACITANCE, "2040 nF").unwrap(), 2.04e-6);
        assert_relative_eq!(parse(&LENGTH, "-28 mm").unwrap(), -0.028);
        assert_relative_eq!(parse(&RESISTIVITY, "1.72e-8 Ohm m").unwrap(), 1.72e-8);
        assert_relative_eq!(parse(&CONCENTRATION, "20.68 mg/mL").unwrap(), 20.68);
        assert_relative_eq!(parse(&SPECIFIC_POWER, "707.4 W/g").unwrap(), 7.074e5);
    }

    #[test]
    fn rejects_missing_or_unknown_units() {
        assert!(matches!(
            parse(&FREQUENCY, "50"),
            Err(UnitError::MissingUnit { .. })
        ));
        assert!(matches!(
            parse(&FREQUENCY, "50 mT"),
            Err(UnitError::UnknownUnit { .. })
        ));
        assert!(matches!(
            parse(&FREQUENCY, "kHz"),
            Err(UnitError::MissingNumber { .. })
        ));
    }

    #[test]
    fn format_then_parse_round_trips() {
        for v in [5.0e4, 1.2566e-5, 4.4e-6, 1.0 / 3.0] {
            let s = format_si(&INDUCTANCE, v);
            assert_eq!(parse(&INDUCTANCE, &s).unwrap(), v);
        }
    }
}
