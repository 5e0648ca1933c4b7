//! Checks tied to the bundled rated-design config: geometry-derived
//! inductances, decoupling, field levels, validation, and round-tripping.

use approx::assert_relative_eq;

use fieldforge::config::{validate_config, ChamberConfig};
use fieldforge::magnetics::{
    channel_cross_coupling, compute_field_map, inductance_matrix, uniformity,
};

fn table1() -> ChamberConfig {
    ChamberConfig::from_toml_str(include_str!("../../../table1.cfg")).unwrap()
}

#[test]
fn bundled_config_is_valid() {
    let report = validate_config(&table1());
    assert!(report.is_valid(), "violations: {:?}", report.violations);
}

#[test]
fn three_channels_violate_validation() {
    let mut config = table1();
    let mut extra = config.channels[0].clone();
    extra.id = 3;
    config.channels.push(extra);
    let report = validate_config(&config);
    assert!(report
        .violations
        .iter()
        .any(|v| v.message.contains("exactly 2 channels")));
}

#[test]
fn zero_turn_winding_violates_validation() {
    let mut config = table1();
    config.windings[0].layout.turns = 0;
    let report = validate_config(&config);
    assert!(report
        .violations
        .iter()
        .any(|v| v.message.contains("zero turns")));
}

#[test]
fn validation_is_pure() {
    let config = table1();
    assert_eq!(validate_config(&config), validate_config(&config));
}

#[test]
fn config_round_trips_through_serialization() {
    let config = table1();
    let text = config.to_config_string();
    let reparsed = ChamberConfig::from_toml_str(&text).unwrap();
    assert_eq!(config, reparsed);
}

#[test]
fn geometry_inductances_sit_in_the_rated_bands() {
    let config = table1();
    let matrix = inductance_matrix(&config).unwrap();
    assert_eq!(matrix.labels, vec![1, 2, 3, 4]);

    // Coil #1 self-inductance: rated 4.4 uH, accept within 30%.
    let l11 = matrix.get(0, 0);
    assert!(
        (l11 - 4.4e-6).abs() / 4.4e-6 < 0.30,
        "L11 = {:.3} uH",
        l11 * 1e6
    );
    // Mutual between the Channel 1 halves: rated 0.7 uH, within 30%.
    let m12 = matrix.get(0, 1);
    assert!(
        (m12 - 0.7e-6).abs() / 0.7e-6 < 0.30,
        "M12 = {:.4} uH",
        m12 * 1e6
    );

    assert!(matrix.max_asymmetry() < 1e-18);
    assert!(matrix.is_positive_definite());

    // Channel decoupling mechanism: the two halves link equal and opposite
    // flux from the orthogonal channel, so the synchronized pair sees none.
    let (m13, m23) = (matrix.get(0, 2), matrix.get(1, 2));
    assert!(
        (m13 + m23).abs() < 1e-3 * m13.abs().max(1e-12),
        "M13 = {m13:e}, M23 = {m23:e}"
    );
    let k_channels = channel_cross_coupling(&config).unwrap();
    assert!(k_channels < 0.01, "k = {k_channels}");
}

#[test]
fn channel1_center_field_reaches_the_rated_band() {
    let config = table1();
    let geoms: Vec<_> = config
        .windings_for_channel(1)
        .iter()
        .map(|w| w.geometry().unwrap())
        .collect();
    let ferrite = fieldforge::magnetics::FerriteImages::from_config(&config).unwrap();
    let b = fieldforge::geom::norm(
        fieldforge::magnetics::field_at_point(
            &geoms,
            &[1000.0, 1000.0],
            [0.0; 3],
            ferrite.as_ref(),
        )
        .unwrap(),
    );
    // Rated band at 1.0 kA with the ferrite images enabled.
    assert!(
        (0.088..=0.110).contains(&b),
        "channel 1 center field {:.1} mT",
        b * 1e3
    );
}

#[test]
fn channel2_map_is_uniform_over_the_enclosure() {
    let config = table1();
    let map = compute_field_map(&config, 2, 260.0).unwrap();
    assert!(map.skipped.is_empty());
    let stats = uniformity(&map, 0.10).unwrap();
    // Rated operating point: roughly 13 mT, quite uniform; the acceptance
    // band on the center value is [9, 17] mT.
    assert!(
        stats.median_magnitude > 9e-3 && stats.median_magnitude < 17e-3,
        "median = {:.2} mT",
        stats.median_magnitude * 1e3
    );
    assert!(stats.band_fraction > 0.5, "band = {}", stats.band_fraction);

    // Linearity: doubling the excitation doubles the map exactly.
    let doubled = compute_field_map(&config, 2, 520.0).unwrap();
    for (a, b) in map.samples.iter().zip(&doubled.samples) {
        for k in 0..3 {
            assert_eq!(b[k], 2.0 * a[k]);
        }
    }
}

#[test]
fn ferrite_disabled_map_equals_free_space_bitwise() {
    let mut config = table1();
    config.chamber.ferrite_enabled = false;
    let map = compute_field_map(&config, 1, 1000.0).unwrap();

    let geoms: Vec<_> = config
        .windings_for_channel(1)
        .iter()
        .map(|w| w.geometry().unwrap())
        .collect();
    for (i, sample) in map.samples.iter().enumerate() {
        let free =
            fieldforge::magnetics::field_at_point(&geoms, &[1000.0, 1000.0], map.point(i), None)
                .unwrap();
        assert_eq!(*sample, free);
    }
}

#[test]
fn winding_layouts_describe_the_documented_coils() {
    let config = table1();
    for (coil, channel, turns) in [(1u8, 1u8, 5u32), (2, 1, 5), (3, 2, 2), (4, 2, 2)] {
        let spec = config.winding(coil).unwrap();
        assert_eq!(spec.channel, channel);
        let geom = spec.geometry().unwrap();
        assert_eq!(geom.turns, turns);
        assert!(geom.is_closed());
    }
    // Channel 1 litz: 3160 strands of 0.1 mm; Channel 2: 4 x 500 of 0.05 mm.
    let w1 = &config.winding(1).unwrap().wire;
    assert_eq!(w1.strand_count, 3160);
    assert_relative_eq!(w1.strand_diameter, 1e-4);
    let w3 = &config.winding(3).unwrap().wire;
    assert_eq!((w3.strand_count, w3.parallel_bundles), (500, 4));
    assert_relative_eq!(w3.strand_diameter, 5e-5);
}

#[test]
fn auto_series_resistance_hits_rated_current_at_rated_duty() {
    let config = table1();
    for id in [1u8, 2u8] {
        let ch = config.channel(id).unwrap();
        let net = config.network(id).unwrap();
        assert!(net.series_resistance_auto);
        let fundamental =
            fieldforge::drive::pwm_fundamental_amplitude(net.dc_bus_voltage, ch.max_duty);
        assert_relative_eq!(
            fundamental / net.series_resistance,
            ch.max_current,
            max_relative = 1e-12
        );
    }
}
