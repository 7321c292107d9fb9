//! Reference values used to validate the simulator.
//!
//! Everything here is computed without touching the simulation code paths:
//! closed forms, a quadrature route for the AWGN symbol error probability,
//! and a straight-line Monte Carlo estimator with its own generator.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};

use crate::metrics::wilson_ci;
use crate::{check_order, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    Sep,
    Ber,
    Floor,
}

impl OracleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OracleKind::Sep => "sep",
            OracleKind::Ber => "ber",
            OracleKind::Floor => "floor",
        }
    }
}

/// One analytic reference value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OraclePoint {
    pub snr_db: f64,
    #[serde(rename = "M")]
    pub order: usize,
    #[serde(rename = "L")]
    pub sensors: usize,
    pub p_c: f64,
    pub value: f64,
    pub kind: OracleKind,
}

/// `10^(db / 10)`.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Neumaier-compensated sum.
#[derive(Debug, Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Symbol error probability of non-coherent orthogonal `M`-FSK in AWGN at
/// symbol SNR `gamma`, by the alternating binomial series
/// `sum_{k=1}^{M-1} (-1)^{k+1} C(M-1, k) / (k + 1) exp(-k gamma / (k + 1))`.
///
/// Returns the value together with `sum |term|`, which bounds the
/// cancellation the summation had to survive.
pub fn awgn_mfsk_sep_series(order: usize, gamma: f64) -> (f64, f64) {
    let n = order - 1;
    let mut sum = CompensatedSum::default();
    let mut magnitude = 0.0;
    let mut binom = 1.0;
    for k in 1..=n {
        binom *= (n - k + 1) as f64 / k as f64;
        let kf = k as f64;
        let term = binom / (kf + 1.0) * (-kf * gamma / (kf + 1.0)).exp();
        magnitude += term;
        sum.add(if k % 2 == 1 { term } else { -term });
    }
    (sum.value(), magnitude)
}

/// `exp(-z) I0(z)` for `z >= 0`.
pub fn bessel_i0_scaled(z: f64) -> f64 {
    if z < 500.0 {
        // Trapezoid rule on the periodic integrand of
        // I0(z) e^{-z} = (1/2pi) int_0^{2pi} exp(z (cos t - 1)) dt;
        // aliasing error decays like exp(-N^2 / 2z).
        let n = 32 + (10.0 * z.sqrt()).ceil() as usize;
        let step = 2.0 * PI / n as f64;
        (0..n)
            .map(|k| (z * ((k as f64 * step).cos() - 1.0)).exp())
            .sum::<f64>()
            / n as f64
    } else {
        let inv = 1.0 / z;
        let series = 1.0
            + inv * (1.0 / 8.0 + inv * (9.0 / 128.0 + inv * (225.0 / 3072.0 + inv * 11025.0 / 98304.0)));
        series / (2.0 * PI * z).sqrt()
    }
}

/// Same probability as [`awgn_mfsk_sep_series`] by direct quadrature of
/// `int_0^inf f(x) [1 - (1 - e^{-x})^{M-1}] dx`, where `f` is the non-central
/// chi-square density of the signal-tone energy (unit noise).
pub fn awgn_mfsk_sep_integral(order: usize, gamma: f64) -> f64 {
    let root = gamma.sqrt();
    let others = (order - 1) as f64;
    // Substituting x = u^2 keeps the integrand smooth near the origin.
    let integrand = |u: f64| {
        let x = u * u;
        let miss = -(others * (-(-x).exp()).ln_1p()).exp_m1();
        2.0 * u * (-(u - root).powi(2)).exp() * bessel_i0_scaled(2.0 * u * root) * miss
    };
    let upper = root + 10.0;
    let panels = (((upper / 0.004).ceil() as usize).max(2000) + 1) & !1;
    let h = upper / panels as f64;
    let mut acc = CompensatedSum::default();
    acc.add(integrand(0.0));
    acc.add(integrand(upper));
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc.add(w * integrand(i as f64 * h));
    }
    (acc.value() * h / 3.0).clamp(0.0, others / order as f64)
}

/// Symbol error probability of non-coherent orthogonal `M`-FSK in AWGN.
///
/// Uses the compensated alternating series when its cancellation error is
/// provably negligible and falls back to quadrature otherwise (large `M`,
/// where binomial coefficients reach 1e75).
pub fn awgn_mfsk_sep(order: usize, gamma: f64) -> Result<f64> {
    check_order(order)?;
    if !(gamma >= 0.0) {
        return Err(Error::param(format!("SNR must be >= 0, got {gamma}")));
    }
    if gamma == 0.0 {
        return Ok((order - 1) as f64 / order as f64);
    }
    let (value, magnitude) = awgn_mfsk_sep_series(order, gamma);
    if value > 0.0 && magnitude * f64::EPSILON * order as f64 <= 1e-12 * value {
        Ok(value)
    } else {
        Ok(awgn_mfsk_sep_integral(order, gamma))
    }
}

/// Bit error probability of non-coherent BFSK over one Rayleigh branch with
/// average SNR `gamma_bar`: `1 / (2 + gamma_bar)`.
pub fn rayleigh_ncbfsk_ber(gamma_bar: f64) -> Result<f64> {
    if !(gamma_bar >= 0.0) {
        return Err(Error::param(format!("SNR must be >= 0, got {gamma_bar}")));
    }
    Ok(1.0 / (2.0 + gamma_bar))
}

/// Orthogonal-signaling conversion `Pb = Ps (M/2) / (M - 1)`.
pub fn ser_to_ber(ps: f64, order: usize) -> Result<f64> {
    check_order(order)?;
    if !(0.0..=1.0).contains(&ps) {
        return Err(Error::param(format!("probability must lie in [0, 1], got {ps}")));
    }
    Ok(ps * (order as f64 / 2.0) / (order - 1) as f64)
}

/// High-SNR BER plateau of selection combining with imperfect sensors.
///
/// Once noise is negligible the decision follows the strongest branch, and
/// that sensor misreports with probability `1 - p_c` regardless of its gain,
/// landing on a uniformly chosen wrong symbol.
pub fn high_snr_ber_floor(p_c: f64, order: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_c) {
        return Err(Error::param(format!("p_c must lie in [0, 1], got {p_c}")));
    }
    ser_to_ber(1.0 - p_c, order)
}

/// Result of the brute-force estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleEstimate {
    pub trials: u64,
    pub errors: u64,
    pub estimate: f64,
    /// 99% Wilson interval.
    pub ci_low: f64,
    pub ci_high: f64,
}

impl OracleEstimate {
    pub fn contains(&self, p: f64) -> bool {
        self.ci_low <= p && p <= self.ci_high
    }
}

pub const BRUTE_FORCE_MIN_TRIALS: u64 = 1_000_000;
const BRUTE_FORCE_SEED: u64 = 0x05EE_D0F0_AC1E;

/// Straight-line Monte Carlo estimate of the selection-combining SER over
/// independent Rayleigh branches. `gamma_bar` is the total linear SNR,
/// split evenly across the `L` sensors.
pub fn brute_force_sc_ser(
    order: usize,
    sensors: usize,
    gamma_bar: f64,
    p_c: f64,
    trials: u64,
) -> Result<OracleEstimate> {
    brute_force_sc_ser_seeded(order, sensors, gamma_bar, p_c, trials, BRUTE_FORCE_SEED)
}

pub fn brute_force_sc_ser_seeded(
    order: usize,
    sensors: usize,
    gamma_bar: f64,
    p_c: f64,
    trials: u64,
    seed: u64,
) -> Result<OracleEstimate> {
    check_order(order)?;
    if sensors == 0 || !(gamma_bar >= 0.0) || !(0.0..=1.0).contains(&p_c) {
        return Err(Error::param("invalid brute-force oracle parameters"));
    }
    if trials < BRUTE_FORCE_MIN_TRIALS {
        return Err(Error::param(format!(
            "brute-force oracle needs at least {BRUTE_FORCE_MIN_TRIALS} trials, got {trials}"
        )));
    }
    let mut rng = Pcg64::seed_from_u64(seed);
    let amplitude = (gamma_bar / sensors as f64).sqrt();
    // Unit-power circular Gaussian from two uniforms: Rayleigh radius
    // sqrt(-ln u) and uniform phase.
    let gaussian = |rng: &mut Pcg64| {
        let r = (-(1.0 - rng.random::<f64>()).ln()).sqrt();
        let theta = 2.0 * PI * rng.random::<f64>();
        (r * theta.cos(), r * theta.sin())
    };
    let mut errors = 0u64;
    for _ in 0..trials {
        let truth = rng.random_range(0..order);
        let mut best = f64::NEG_INFINITY;
        let mut decided = 0;
        for _ in 0..sensors {
            let reported = if rng.random::<f64>() < p_c {
                truth
            } else {
                let k = rng.random_range(0..order - 1);
                if k >= truth {
                    k + 1
                } else {
                    k
                }
            };
            let (hr, hi) = gaussian(&mut rng);
            for m in 0..order {
                let (mut re, mut im) = gaussian(&mut rng);
                if m == reported {
                    re += amplitude * hr;
                    im += amplitude * hi;
                }
                let energy = re * re + im * im;
                // Ties go to the lowest tone index.
                if energy > best || (energy == best && m < decided) {
                    best = energy;
                    decided = m;
                }
            }
        }
        if decided != truth {
            errors += 1;
        }
    }
    let (ci_low, ci_high) = wilson_ci(errors, trials, 0.99);
    Ok(OracleEstimate {
        trials,
        errors,
        estimate: errors as f64 / trials as f64,
        ci_low,
        ci_high,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn sep_at_zero_snr() {
        assert_eq!(awgn_mfsk_sep(2, 0.0).unwrap(), 0.5);
        for order in [4usize, 16, 256] {
            assert_eq!(awgn_mfsk_sep(order, 0.0).unwrap(), (order - 1) as f64 / order as f64);
            let integral = awgn_mfsk_sep_integral(order, 0.0);
            assert!(close(integral, (order - 1) as f64 / order as f64, 1e-9), "{order}: {integral}");
        }
    }

    #[test]
    fn binary_sep_closed_form() {
        for gamma in [0.1, 1.0, 4.0, 10.0, 30.0] {
            let expected = 0.5 * (-gamma / 2.0f64).exp();
            assert!(close(awgn_mfsk_sep(2, gamma).unwrap(), expected, 1e-14));
        }
        assert!((awgn_mfsk_sep(2, 1.0).unwrap() - 0.30327).abs() < 1e-5);
    }

    #[test]
    fn series_and_quadrature_agree() {
        for order in [2usize, 4, 8, 16, 32] {
            for gamma in [0.25, 1.0, 3.16, 10.0, 31.6] {
                let (series, _) = awgn_mfsk_sep_series(order, gamma);
                let integral = awgn_mfsk_sep_integral(order, gamma);
                assert!(close(integral, series, 1e-8), "M={order} g={gamma}: {series} vs {integral}");
            }
        }
    }

    #[test]
    fn large_orders_fall_back_to_quadrature() {
        let (series, magnitude) = awgn_mfsk_sep_series(256, 3.16);
        assert!(magnitude > 1e60, "series is ill-conditioned: {series}");
        let sep = awgn_mfsk_sep(256, 3.16).unwrap();
        assert!(sep > awgn_mfsk_sep(128, 3.16).unwrap());
        assert!(sep < 255.0 / 256.0);
    }

    #[test]
    fn scaled_bessel_matches_power_series() {
        for z in [0.0f64, 0.5, 2.0, 10.0, 40.0, 120.0] {
            let mut term = 1.0f64;
            let mut sum = 1.0f64;
            for k in 1..400 {
                term *= (z / 2.0).powi(2) / (k * k) as f64;
                sum += term;
            }
            let expected = sum * (-z).exp();
            assert!(close(bessel_i0_scaled(z), expected, 1e-12), "z={z}");
        }
        // Continuity across the switch to the asymptotic expansion.
        let below = bessel_i0_scaled(f64::from_bits(500f64.to_bits() - 1));
        let above = bessel_i0_scaled(500.0);
        assert!(close(below, above, 1e-12));
    }

    #[test]
    fn rayleigh_bfsk() {
        assert_eq!(rayleigh_ncbfsk_ber(0.0).unwrap(), 0.5);
        assert!(close(rayleigh_ncbfsk_ber(1.0).unwrap(), 1.0 / 3.0, 1e-15));
        assert!((rayleigh_ncbfsk_ber(100.0).unwrap() - 9.80e-3).abs() < 1e-5);
        assert!(rayleigh_ncbfsk_ber(-1.0).is_err());
    }

    #[test]
    fn conversions_and_floors() {
        assert_eq!(ser_to_ber(0.123, 2).unwrap(), 0.123);
        assert!(close(ser_to_ber(0.3, 4).unwrap(), 0.2, 1e-15));
        assert!(ser_to_ber(1.2, 4).is_err());
        assert_eq!(high_snr_ber_floor(1.0, 16).unwrap(), 0.0);
        let a = high_snr_ber_floor(0.9995, 16).unwrap();
        assert!((a - 2.67e-4).abs() < 5e-7, "{a}");
        let b = high_snr_ber_floor(0.999, 16).unwrap();
        assert!((b - 5.33e-4).abs() < 5e-7, "{b}");
    }

    #[test]
    fn brute_force_brackets_rayleigh_closed_form() {
        let est = brute_force_sc_ser(2, 1, 1.0, 1.0, 1_000_000).unwrap();
        assert!(est.contains(1.0 / 3.0), "{est:?}");
    }

    #[test]
    fn brute_force_with_broken_sensor() {
        let est = brute_force_sc_ser(2, 1, 1e8, 0.0, 1_000_000).unwrap();
        assert!(est.estimate > 0.999, "{est:?}");
    }

    #[test]
    fn brute_force_requires_precision() {
        assert!(brute_force_sc_ser(2, 1, 1.0, 1.0, 1000).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn sep_is_bounded_and_monotone(k in 1u32..7, g in 0.0f64..40.0, dg in 0.01f64..5.0) {
            let order = 1usize << k;
            let lo = awgn_mfsk_sep(order, g).unwrap();
            let hi_snr = awgn_mfsk_sep(order, g + dg).unwrap();
            let bigger = awgn_mfsk_sep(order * 2, g).unwrap();
            prop_assert!(0.0 <= lo && lo <= (order - 1) as f64 / order as f64);
            prop_assert!(hi_snr <= lo);
            prop_assert!(bigger >= lo);
        }

        #[test]
        fn rayleigh_identity(g in 0.0f64..1e6) {
            let p = rayleigh_ncbfsk_ber(g).unwrap();
            prop_assert!((p * (2.0 + g) - 1.0).abs() < 1e-15);
        }
    }
}
