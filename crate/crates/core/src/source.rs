//! Source events and local sensor detection.
//!
//! Symbols are 1-based throughout: an `M`-ary event takes values in `1..=M`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{check_order, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventMode {
    /// Every symbol equally likely.
    UniformSymbol,
    /// A continuous reading drawn uniformly on `[lo, hi]` and quantized.
    Continuous,
}

/// Generator of the `M`-ary source event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventModel {
    mode: EventMode,
    range_lo: f64,
    range_hi: f64,
    order: usize,
}

impl EventModel {
    pub fn uniform(order: usize) -> Result<Self> {
        check_order(order)?;
        Ok(Self {
            mode: EventMode::UniformSymbol,
            range_lo: 0.0,
            range_hi: 1.0,
            order,
        })
    }

    pub fn continuous(order: usize, lo: f64, hi: f64) -> Result<Self> {
        check_order(order)?;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::param(format!(
                "quantizer range must satisfy lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self {
            mode: EventMode::Continuous,
            range_lo: lo,
            range_hi: hi,
            order,
        })
    }

    pub fn mode(&self) -> EventMode {
        self.mode
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn range(&self) -> (f64, f64) {
        (self.range_lo, self.range_hi)
    }

    /// Maps a continuous reading onto one of `M` equal-width, left-closed
    /// bins. The upper edge `hi` belongs to the last bin.
    pub fn quantize(&self, a: f64) -> Result<usize> {
        if self.mode != EventMode::Continuous {
            return Err(Error::param("quantize requires a continuous event model"));
        }
        let (lo, hi) = (self.range_lo, self.range_hi);
        if !(lo..=hi).contains(&a) {
            return Err(Error::Range { value: a, lo, hi });
        }
        let bin = ((a - lo) / (hi - lo) * self.order as f64).floor() as usize;
        Ok(bin.min(self.order - 1) + 1)
    }

    /// Draws one event. Consumes exactly one random number.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self.mode {
            EventMode::UniformSymbol => rng.random_range(1..=self.order),
            EventMode::Continuous => {
                let u: f64 = rng.random();
                let a = self.range_lo + (self.range_hi - self.range_lo) * u;
                // u < 1 keeps a inside the range.
                self.quantize(a).expect("draw stays in range")
            }
        }
    }
}

/// Free-function form of [`EventModel::quantize`].
pub fn quantize_event(a: f64, model: &EventModel) -> Result<usize> {
    model.quantize(a)
}

/// Free-function form of [`EventModel::draw`].
pub fn draw_event<R: Rng + ?Sized>(model: &EventModel, rng: &mut R) -> usize {
    model.draw(rng)
}

/// Which wrong symbol a misdetecting sensor reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MisdetectionKind {
    /// Uniform over the `M - 1` symbols other than the true one.
    #[default]
    UniformWrong,
}

/// The local detection layer: `L` sensors, each correct with probability `p_c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorModel {
    sensors: usize,
    p_c: f64,
    error_kind: MisdetectionKind,
}

impl SensorModel {
    pub fn new(sensors: usize, p_c: f64) -> Result<Self> {
        if sensors == 0 {
            return Err(Error::param("sensor count must be at least 1"));
        }
        if !(0.0..=1.0).contains(&p_c) {
            return Err(Error::param(format!(
                "probability of correct detection must lie in [0, 1], got {p_c}"
            )));
        }
        Ok(Self {
            sensors,
            p_c,
            error_kind: MisdetectionKind::UniformWrong,
        })
    }

    pub fn sensors(&self) -> usize {
        self.sensors
    }

    pub fn p_c(&self) -> f64 {
        self.p_c
    }

    pub fn error_kind(&self) -> MisdetectionKind {
        self.error_kind
    }

    /// Fills `out` with the symbol each sensor reports.
    ///
    /// Every sensor consumes exactly two uniforms whatever `p_c` is: one for
    /// the correct/incorrect coin and one for the wrong symbol. Two runs with
    /// the same stream and different `p_c` are therefore coupled, and the set
    /// of misdetecting sensors only grows as `p_c` falls.
    pub fn observe_into<R: Rng + ?Sized>(
        &self,
        true_symbol: usize,
        order: usize,
        rng: &mut R,
        out: &mut Vec<usize>,
    ) {
        debug_assert!((1..=order).contains(&true_symbol));
        out.clear();
        for _ in 0..self.sensors {
            let coin: f64 = rng.random();
            let pick: f64 = rng.random();
            if coin < self.p_c {
                out.push(true_symbol);
            } else {
                out.push(wrong_symbol(true_symbol, order, pick, self.error_kind));
            }
        }
    }

    pub fn observe<R: Rng + ?Sized>(
        &self,
        true_symbol: usize,
        order: usize,
        rng: &mut R,
    ) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.sensors);
        self.observe_into(true_symbol, order, rng, &mut out);
        out
    }
}

fn wrong_symbol(true_symbol: usize, order: usize, u: f64, kind: MisdetectionKind) -> usize {
    match kind {
        MisdetectionKind::UniformWrong => {
            let k = ((u * (order - 1) as f64) as usize).min(order - 2) + 1;
            if k >= true_symbol {
                k + 1
            } else {
                k
            }
        }
    }
}

/// Free-function form of [`SensorModel::observe`].
pub fn sensor_observe<R: Rng + ?Sized>(
    true_symbol: usize,
    order: usize,
    model: &SensorModel,
    rng: &mut R,
) -> Vec<usize> {
    model.observe(true_symbol, order, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn within_3_sigma(count: u64, n: u64, p: f64) -> bool {
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        ((count as f64 / n as f64) - p).abs() <= 3.0 * sigma
    }

    #[test]
    fn quantizer_boundaries() {
        let q = EventModel::continuous(4, 0.0, 1.0).unwrap();
        assert_eq!(q.quantize(0.0).unwrap(), 1);
        assert_eq!(q.quantize(1.0).unwrap(), 4);
        assert_eq!(q.quantize(0.49).unwrap(), 2);
        assert_eq!(q.quantize(0.25).unwrap(), 2);
    }

    #[test]
    fn quantizer_rejects_out_of_range() {
        let q = EventModel::continuous(4, 0.0, 1.0).unwrap();
        assert!(matches!(q.quantize(1.5), Err(Error::Range { .. })));
        assert!(matches!(q.quantize(-0.1), Err(Error::Range { .. })));
        assert!(EventModel::uniform(4).unwrap().quantize(0.5).is_err());
    }

    #[test]
    fn rejects_bad_orders_and_ranges() {
        assert!(EventModel::uniform(1).is_err());
        assert!(EventModel::uniform(6).is_err());
        assert!(EventModel::continuous(4, 1.0, 1.0).is_err());
        assert!(SensorModel::new(0, 0.5).is_err());
        assert!(SensorModel::new(3, 1.01).is_err());
    }

    #[test]
    fn binary_draws_are_fair() {
        let model = EventModel::uniform(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 1_000_000;
        let ones = (0..n).filter(|_| model.draw(&mut rng) == 1).count();
        assert!((ones as f64 / n as f64 - 0.5).abs() <= 0.002);
    }

    #[test]
    fn continuous_draws_fill_levels_evenly() {
        let model = EventModel::continuous(4, 0.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 400_000u64;
        let mut counts = [0u64; 4];
        for _ in 0..n {
            counts[model.draw(&mut rng) - 1] += 1;
        }
        for c in counts {
            assert!(within_3_sigma(c, n, 0.25), "{counts:?}");
        }
    }

    #[test]
    fn perfect_and_inverted_sensors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let perfect = SensorModel::new(6, 1.0).unwrap();
        assert_eq!(perfect.observe(3, 8, &mut rng), vec![3; 6]);
        let broken = SensorModel::new(5, 0.0).unwrap();
        assert_eq!(broken.observe(1, 2, &mut rng), vec![2; 5]);
    }

    #[test]
    fn misdetections_are_uniform_over_wrong_symbols() {
        let model = SensorModel::new(1, 0.9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 1_000_000u64;
        let truth = 7;
        let mut counts = [0u64; 16];
        let mut buf = Vec::new();
        for _ in 0..n {
            model.observe_into(truth, 16, &mut rng, &mut buf);
            counts[buf[0] - 1] += 1;
        }
        assert!(within_3_sigma(counts[truth - 1], n, 0.9));
        let wrong: Vec<u64> = counts
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != truth - 1)
            .map(|(_, &c)| c)
            .collect();
        let p = 0.1 / 15.0;
        for &c in &wrong {
            assert!(within_3_sigma(c, n, p), "{counts:?}");
        }
        // Chi-square over the 15 wrong symbols, 14 dof, 0.1% critical value.
        let total: u64 = wrong.iter().sum();
        let expected = total as f64 / 15.0;
        let chi2: f64 = wrong
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 36.123, "chi2 = {chi2}");
    }

    #[test]
    fn wrong_symbol_never_hits_truth() {
        for order in [2usize, 4, 16] {
            for truth in 1..=order {
                for i in 0..1000 {
                    let u = i as f64 / 1000.0;
                    let w = wrong_symbol(truth, order, u, MisdetectionKind::UniformWrong);
                    assert_ne!(w, truth);
                    assert!((1..=order).contains(&w));
                }
            }
        }
    }

    proptest! {
        #[test]
        fn quantizer_is_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0, k in 1u32..8) {
            let q = EventModel::continuous(1 << k, 0.0, 1.0).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(q.quantize(lo).unwrap() <= q.quantize(hi).unwrap());
        }

        #[test]
        fn quantizer_is_surjective(k in 1u32..8, lo in -10.0f64..10.0, width in 0.1f64..10.0) {
            let order = 1usize << k;
            let q = EventModel::continuous(order, lo, lo + width).unwrap();
            for level in 1..=order {
                let centre = lo + width * (level as f64 - 0.5) / order as f64;
                prop_assert_eq!(q.quantize(centre).unwrap(), level);
            }
        }
    }
}
