//! The engine checked against independent references at full scale.

use wsn_core::analytic::{
    brute_force_sc_ser, db_to_linear, high_snr_ber_floor, ser_to_ber, BRUTE_FORCE_MIN_TRIALS,
};
use wsn_core::metrics::wilson_ci;
use wsn_core::{run_point, BerPoint, SimParams};

fn simulate(order: usize, sensors: usize, snr_db: f64, p_c: f64, trials: u64, seed: u64) -> BerPoint {
    run_point(&SimParams {
        order,
        sensors,
        snr_db,
        p_c,
        trials,
        chunk_size: 50_000,
        seed,
        ..Default::default()
    })
    .unwrap()
}

fn overlaps(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 <= b.1 && b.0 <= a.1
}

#[test]
fn engine_agrees_with_brute_force_grid() {
    for sensors in [1, 4] {
        for order in [2, 8, 32] {
            for snr_db in [0.0, 8.0, 16.0] {
                let oracle =
                    brute_force_sc_ser(order, sensors, db_to_linear(snr_db), 1.0, BRUTE_FORCE_MIN_TRIALS)
                        .unwrap();
                let sim = simulate(order, sensors, snr_db, 1.0, 1_000_000, 11);
                let ci = wilson_ci(sim.symbol_errors, sim.trials, 0.99);
                assert!(
                    overlaps(ci, (oracle.ci_low, oracle.ci_high)),
                    "M={order} L={sensors} {snr_db} dB: engine {ci:?} vs oracle {oracle:?}"
                );
            }
        }
    }
}

#[test]
fn engine_agrees_with_brute_force_under_misdetection() {
    let oracle = brute_force_sc_ser(8, 4, db_to_linear(15.0), 0.99, 2_000_000).unwrap();
    let sim = simulate(8, 4, 15.0, 0.99, 2_000_000, 12);
    let ci = wilson_ci(sim.symbol_errors, sim.trials, 0.99);
    assert!(overlaps(ci, (oracle.ci_low, oracle.ci_high)), "{ci:?} vs {oracle:?}");
}

#[test]
fn misdetection_floor_is_reached() {
    let floor = high_snr_ber_floor(0.999, 16).unwrap();
    let at30 = simulate(16, 4, 30.0, 0.999, 3_000_000, 13);
    let at40 = simulate(16, 4, 40.0, 0.999, 3_000_000, 13);
    for p in [&at30, &at40] {
        assert!((p.ber - floor).abs() / floor < 0.15, "{} dB: {} vs {floor}", p.snr_db, p.ber);
    }
    let half_widths = (at30.ci_high - at30.ci_low + at40.ci_high - at40.ci_low) / 2.0;
    assert!((at30.ber - at40.ber).abs() < half_widths, "{} vs {}", at30.ber, at40.ber);
}

#[test]
fn ber_does_not_rise_with_snr() {
    let curve: Vec<BerPoint> = (0..=6)
        .map(|i| simulate(4, 2, 4.0 * i as f64, 1.0, 200_000, 14))
        .collect();
    for w in curve.windows(2) {
        assert!(
            w[1].ci_low <= w[0].ci_high,
            "{} dB: {} above {} dB: {}",
            w[1].snr_db,
            w[1].ber,
            w[0].snr_db,
            w[0].ber
        );
    }
    assert!(curve[6].ber < curve[0].ber / 10.0);
}

#[test]
fn bit_counting_matches_symbol_conversion() {
    let p = simulate(16, 4, 12.0, 1.0, 1_000_000, 15);
    let k = 4.0;
    let converted = ser_to_ber(p.ser, 16).unwrap();
    // Bit errors per trial lie in [0, k], so their variance is at most k times their mean.
    let sd = (k * p.bit_errors as f64 / p.trials as f64 / p.trials as f64).sqrt() / k;
    assert!((p.ber - converted).abs() <= 3.0 * sd, "{} vs {converted} (sd {sd})", p.ber);
}
