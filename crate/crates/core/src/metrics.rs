//! Error counting and binomial confidence intervals.

use serde::{Deserialize, Serialize};

use crate::engine::{Fidelity, SimParams};
use crate::fusion::Combiner;
use crate::{bits_per_symbol, Error, Result};

/// Symbol and bit errors between two 1-based symbols of an `M`-ary alphabet.
///
/// Symbols carry the natural binary labels of `index - 1`.
pub fn count_errors(true_symbol: usize, decided_symbol: usize, order: usize) -> (u64, u32) {
    debug_assert!((1..=order).contains(&true_symbol) && (1..=order).contains(&decided_symbol));
    if true_symbol == decided_symbol {
        return (0, 0);
    }
    let diff = (true_symbol - 1) ^ (decided_symbol - 1);
    (1, diff.count_ones())
}

/// Running error counts for one simulation point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorTally {
    pub trials: u64,
    pub symbol_errors: u64,
    pub bit_errors: u64,
    pub bits_per_symbol: u32,
}

impl ErrorTally {
    pub fn new(bits_per_symbol: u32) -> Self {
        Self {
            trials: 0,
            symbol_errors: 0,
            bit_errors: 0,
            bits_per_symbol,
        }
    }

    pub fn for_order(order: usize) -> Self {
        Self::new(bits_per_symbol(order))
    }

    #[inline]
    pub fn record(&mut self, symbol_err: u64, bit_errs: u32) {
        self.trials += 1;
        self.symbol_errors += symbol_err;
        self.bit_errors += u64::from(bit_errs);
    }

    pub fn merge(&self, other: &ErrorTally) -> Result<ErrorTally> {
        if self.bits_per_symbol != other.bits_per_symbol {
            return Err(Error::Aggregation(self.bits_per_symbol, other.bits_per_symbol));
        }
        Ok(ErrorTally {
            trials: self.trials + other.trials,
            symbol_errors: self.symbol_errors + other.symbol_errors,
            bit_errors: self.bit_errors + other.bit_errors,
            bits_per_symbol: self.bits_per_symbol,
        })
    }

    pub fn bits(&self) -> u64 {
        self.trials * u64::from(self.bits_per_symbol)
    }

    pub fn ser(&self) -> f64 {
        ratio(self.symbol_errors, self.trials)
    }

    pub fn ber(&self) -> f64 {
        ratio(self.bit_errors, self.bits())
    }

    pub fn ser_ci(&self, confidence: f64) -> (f64, f64) {
        wilson_ci(self.symbol_errors, self.trials, confidence)
    }

    pub fn ber_ci(&self, confidence: f64) -> (f64, f64) {
        wilson_ci(self.bit_errors, self.bits(), confidence)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn merge_tallies(a: &ErrorTally, b: &ErrorTally) -> Result<ErrorTally> {
    a.merge(b)
}

/// Two-sided standard normal quantile, `z` such that `P(|Z| <= z) = confidence`.
pub fn two_sided_z(confidence: f64) -> f64 {
    normal_quantile(0.5 + 0.5 * confidence)
}

/// Inverse standard normal CDF (Acklam's rational approximation, relative
/// error below 1.2e-9).
pub fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383_577_518_672_69e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p > 1.0 - P_LOW {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_ci(errors: u64, trials: u64, confidence: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z = two_sided_z(confidence);
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let low = if errors == 0 { 0.0 } else { (centre - half).max(0.0) };
    let high = if errors == trials { 1.0 } else { (centre + half).min(1.0) };
    (low, high)
}

/// Aggregated result for one parameter point. Field order is the CSV column
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub snr_db: f64,
    #[serde(rename = "M")]
    pub order: usize,
    #[serde(rename = "L")]
    pub sensors: usize,
    pub pc: f64,
    pub rho: f64,
    pub combiner: Combiner,
    pub fidelity: Fidelity,
    pub trials: u64,
    pub symbol_errors: u64,
    pub bit_errors: u64,
    pub ser: f64,
    pub ber: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
}

impl BerPoint {
    pub fn from_tally(params: &SimParams, tally: &ErrorTally) -> Self {
        let (ci_low, ci_high) = tally.ber_ci(0.95);
        Self {
            snr_db: params.snr_db,
            order: params.order,
            sensors: params.sensors,
            pc: params.p_c,
            rho: params.rho,
            combiner: params.combiner,
            fidelity: params.fidelity,
            trials: tally.trials,
            symbol_errors: tally.symbol_errors,
            bit_errors: tally.bit_errors,
            ser: tally.ser(),
            ber: tally.ber(),
            ci_low,
            ci_high,
            seed: params.seed,
        }
    }

    pub fn tally(&self) -> ErrorTally {
        ErrorTally {
            trials: self.trials,
            symbol_errors: self.symbol_errors,
            bit_errors: self.bit_errors,
            bits_per_symbol: bits_per_symbol(self.order),
        }
    }
}

/// Formats like C's `%.17g`: 17 significant digits, which round-trips any
/// `f64`, with trailing zeros dropped.
pub fn format_g17(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        strip_zeros(format!("{:.*}", decimals, x))
    } else {
        let mantissa = strip_zeros(mantissa.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    }
}

fn strip_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Binomial, Distribution};

    #[test]
    fn error_counting() {
        assert_eq!(count_errors(5, 5, 16), (0, 0));
        assert_eq!(count_errors(1, 2, 2), (1, 1));
        assert_eq!(count_errors(1, 4, 4), (1, 2));
        assert_eq!(count_errors(16, 1, 16), (1, 4));
    }

    #[test]
    fn wilson_zero_errors() {
        let (low, high) = wilson_ci(0, 100, 0.95);
        assert_eq!(low, 0.0);
        // Closed form at zero successes: z^2 / (n + z^2).
        let z = 1.959_963_984_540_054_f64;
        let expected = z * z / (100.0 + z * z);
        assert!((high - expected).abs() < 1e-8, "{high} vs {expected}");
        assert!((high - 0.0370).abs() < 5e-5);
    }

    #[test]
    fn wilson_half() {
        let (low, high) = wilson_ci(50, 100, 0.95);
        assert!(low < 0.5 && 0.5 < high);
        assert!(((low + high) / 2.0 - 0.5).abs() < 1e-12);
        assert_eq!(wilson_ci(100, 100, 0.95).1, 1.0);
    }

    #[test]
    fn quantiles() {
        assert!((two_sided_z(0.95) - 1.959_963_984_540_054).abs() < 1e-8);
        assert!((two_sided_z(0.99) - 2.575_829_303_548_901).abs() < 1e-8);
        assert!((normal_quantile(0.001) + 3.090_232_306_167_813_5).abs() < 1e-8);
    }

    #[test]
    fn wilson_coverage() {
        let (p, n) = (0.01, 10_000u64);
        let binom = Binomial::new(n, p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let experiments = 10_000;
        let covered = (0..experiments)
            .filter(|_| {
                let (lo, hi) = wilson_ci(binom.sample(&mut rng), n, 0.95);
                lo <= p && p <= hi
            })
            .count();
        let rate = covered as f64 / experiments as f64;
        assert!((rate - 0.95).abs() <= 0.01, "coverage {rate}");
    }

    #[test]
    fn merge_rules() {
        let a = ErrorTally { trials: 10, symbol_errors: 3, bit_errors: 4, bits_per_symbol: 2 };
        let b = ErrorTally { trials: 5, symbol_errors: 1, bit_errors: 2, bits_per_symbol: 2 };
        assert_eq!(a.merge(&ErrorTally::new(2)).unwrap(), a);
        assert_eq!(a.merge(&b).unwrap(), b.merge(&a).unwrap());
        assert!(matches!(a.merge(&ErrorTally::new(3)), Err(Error::Aggregation(2, 3))));
    }

    #[test]
    fn g17_formatting() {
        assert_eq!(format_g17(10.0), "10");
        assert_eq!(format_g17(0.5), "0.5");
        assert_eq!(format_g17(1.0 / 3.0), "0.33333333333333331");
        assert_eq!(format_g17(0.1), "0.10000000000000001");
        assert_eq!(format_g17(2.67e-4), "0.00026699999999999998");
        assert_eq!(format_g17(1.5e-7), "1.4999999999999999e-07");
        assert_eq!(format_g17(1e20), "1e+20");
        assert_eq!(format_g17(-2.5), "-2.5");
    }

    fn tally_strategy() -> impl Strategy<Value = ErrorTally> {
        (0u64..1000, 0u64..1000, 0u64..1000).prop_map(|(t, s, b)| {
            let s = s.min(t);
            ErrorTally { trials: t, symbol_errors: s, bit_errors: b.min(s * 3), bits_per_symbol: 3 }
        })
    }

    proptest! {
        #[test]
        fn g17_round_trips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL) {
            prop_assert_eq!(format_g17(x).parse::<f64>().unwrap(), x);
        }

        #[test]
        fn merge_is_associative(a in tally_strategy(), b in tally_strategy(), c in tally_strategy()) {
            let left = a.merge(&b).unwrap().merge(&c).unwrap();
            let right = a.merge(&b.merge(&c).unwrap()).unwrap();
            prop_assert_eq!(left, right);
        }

        #[test]
        fn wilson_brackets_estimate(n in 1u64..100_000, frac in 0.0f64..=1.0, conf in 0.5f64..0.999) {
            let k = ((n as f64) * frac).round() as u64;
            let (lo, hi) = wilson_ci(k, n, conf);
            let p = k as f64 / n as f64;
            prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
        }

        #[test]
        fn ser_dominates_ber(errors in prop::collection::vec((1usize..=16, 1usize..=16), 1..200)) {
            let mut t = ErrorTally::for_order(16);
            for (a, b) in errors {
                let (s, bits) = count_errors(a, b, 16);
                t.record(s, bits);
            }
            prop_assert!(t.ser() >= t.ber());
        }
    }
}
