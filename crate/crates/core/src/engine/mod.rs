//! Deterministic Monte Carlo driver.
//!
//! A point's trials are split into fixed-size chunks. Chunk `i` draws from
//! its own ChaCha8 stream keyed by the master seed and selected with
//! `set_stream(i)`, so the merged tally depends only on the parameters and
//! the seed, never on the worker count or completion order.
//!
//! The stream does not depend on the point's position in a sweep: every
//! point sees the same random numbers (common random numbers), which keeps
//! comparisons between neighbouring points tight.

mod output;
mod sweep;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use self::output::{
    emit_results, oracle_rows, read_results, write_csv, write_json, write_oracle_csv,
    OracleRow, OutputFormat, CSV_COLUMNS,
};
pub use self::sweep::{run_sweep, Axis, SweepSpec, AXIS_FIELDS};

use crate::analytic::db_to_linear;
use crate::channel::{add_awgn, draw_gains_into};
use crate::fusion::{egc_argmax, mrc_argmax, sc_argmax, Combiner};
use crate::metrics::{count_errors, BerPoint, ErrorTally};
use crate::phy::{symbol_level_into, EnergyMatrix, MatchedOutputs, ToneBank, WaveformParams, WaveformSettings};
use crate::source::{EventModel, SensorModel};
use crate::{bits_per_symbol, check_order, Error, Result};

/// How the tone energies are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fidelity {
    /// Matched-filter outputs drawn directly.
    #[default]
    Symbol,
    /// Sampled slot waveforms through the correlator bank.
    Waveform,
}

impl Fidelity {
    pub fn as_str(self) -> &'static str {
        match self {
            Fidelity::Symbol => "symbol",
            Fidelity::Waveform => "waveform",
        }
    }
}

impl fmt::Display for Fidelity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Fidelity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "symbol" => Ok(Fidelity::Symbol),
            "waveform" => Ok(Fidelity::Waveform),
            other => Err(Error::Config(format!("unknown fidelity `{other}`"))),
        }
    }
}

/// Channel impairment between sensors and fusion center.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fading {
    #[default]
    Rayleigh,
    /// AWGN only (`h_l = 1`); for validation against closed forms.
    None,
}

impl FromStr for Fading {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rayleigh" => Ok(Fading::Rayleigh),
            "none" | "awgn" => Ok(Fading::None),
            other => Err(Error::Config(format!("unknown fading model `{other}`"))),
        }
    }
}

/// What the SNR axis measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SnrBasis {
    /// Total symbol energy over `n0`.
    #[default]
    Symbol,
    /// Total energy per information bit over `n0`; the symbol carries
    /// `log2 M` times as much.
    Bit,
}

impl SnrBasis {
    pub fn as_str(self) -> &'static str {
        match self {
            SnrBasis::Symbol => "symbol",
            SnrBasis::Bit => "bit",
        }
    }
}

impl FromStr for SnrBasis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "symbol" | "es" => Ok(SnrBasis::Symbol),
            "bit" | "eb" => Ok(SnrBasis::Bit),
            other => Err(Error::Config(format!("unknown SNR basis `{other}`"))),
        }
    }
}

/// Noise spectral density; SNR is carried entirely by the symbol energy.
pub const N0: f64 = 1.0;

/// One experiment point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    #[serde(rename = "M")]
    pub order: usize,
    #[serde(rename = "L")]
    pub sensors: usize,
    /// Total symbol energy over `n0`, in dB, shared by all sensors.
    pub snr_db: f64,
    pub snr_basis: SnrBasis,
    #[serde(rename = "pc", alias = "p_c")]
    pub p_c: f64,
    pub combiner: Combiner,
    pub fidelity: Fidelity,
    pub fading: Fading,
    pub rho: f64,
    pub trials: u64,
    pub seed: u64,
    pub chunk_size: u64,
    pub waveform: Option<WaveformSettings>,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            order: 2,
            sensors: 1,
            snr_db: 10.0,
            snr_basis: SnrBasis::Symbol,
            p_c: 1.0,
            combiner: Combiner::Sc,
            fidelity: Fidelity::Symbol,
            fading: Fading::Rayleigh,
            rho: 0.0,
            trials: 100_000,
            seed: 0,
            chunk_size: 10_000,
            waveform: None,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        check_order(self.order)?;
        EventModel::uniform(self.order)?;
        SensorModel::new(self.sensors, self.p_c)?;
        if !self.snr_db.is_finite() {
            return Err(Error::param(format!("snr_db must be finite, got {}", self.snr_db)));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::param(format!("rho must lie in [0, 1], got {}", self.rho)));
        }
        if self.trials == 0 || self.chunk_size == 0 {
            return Err(Error::param("trials and chunk_size must be >= 1"));
        }
        if self.fidelity == Fidelity::Waveform {
            self.waveform_params()?;
        }
        Ok(())
    }

    /// Total symbol energy over all sensors.
    pub fn symbol_energy(&self) -> f64 {
        let per_unit = db_to_linear(self.snr_db) * N0;
        match self.snr_basis {
            SnrBasis::Symbol => per_unit,
            SnrBasis::Bit => per_unit * f64::from(bits_per_symbol(self.order)),
        }
    }

    /// Energy each sensor transmits: total energy split evenly over `L`.
    pub fn per_sensor_energy(&self) -> f64 {
        self.symbol_energy() / self.sensors as f64
    }

    pub fn waveform_params(&self) -> Result<WaveformParams> {
        WaveformParams::from_settings(
            self.order,
            self.sensors,
            self.per_sensor_energy(),
            &self.waveform.unwrap_or_default(),
        )
    }

    pub fn chunk_count(&self) -> u64 {
        self.trials.div_ceil(self.chunk_size)
    }

    /// Trials assigned to chunk `index`.
    pub fn chunk_trials(&self, index: u64) -> u64 {
        let start = index * self.chunk_size;
        self.chunk_size.min(self.trials.saturating_sub(start))
    }
}

/// Per-trial trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub true_event: usize,
    pub observed: Vec<usize>,
    pub decided: usize,
    pub symbol_err: u64,
    pub bit_errs: u32,
}

/// Random stream for chunk `chunk` of a run seeded with `seed`.
///
/// The 256-bit ChaCha key is the SplitMix64 expansion of `seed`; the chunk
/// index selects the 64-bit stream.
pub fn substream(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut state = seed;
    let mut key = [0u8; 32];
    for word in key.chunks_exact_mut(8) {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        word.copy_from_slice(&(z ^ (z >> 31)).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(chunk);
    rng
}

/// Scratch buffers reused across trials.
#[derive(Debug, Default)]
struct Workspace {
    observed: Vec<usize>,
    gains: Vec<Complex64>,
    phases: Vec<f64>,
    samples: Vec<Complex64>,
    outputs: Option<MatchedOutputs>,
    energies: EnergyMatrix,
}

/// A validated point with everything precomputed for the trial loop.
#[derive(Debug, Clone)]
pub struct Simulator {
    params: SimParams,
    event: EventModel,
    sensors: SensorModel,
    es: f64,
    bank: Option<ToneBank>,
}

impl Simulator {
    pub fn new(params: &SimParams) -> Result<Self> {
        params.validate()?;
        let bank = match params.fidelity {
            Fidelity::Symbol => None,
            Fidelity::Waveform => Some(ToneBank::new(&params.waveform_params()?)?),
        };
        Ok(Self {
            params: params.clone(),
            event: EventModel::uniform(params.order)?,
            sensors: SensorModel::new(params.sensors, params.p_c)?,
            es: params.per_sensor_energy(),
            bank,
        })
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    /// Runs one trial; returns `(true event, decided event)`.
    ///
    /// Random draws per trial, in order: event, two uniforms per sensor,
    /// channel gains, then (waveform only) sensor phases, then noise.
    fn trial<R: Rng + ?Sized>(&self, rng: &mut R, ws: &mut Workspace) -> (usize, usize) {
        let p = &self.params;
        let truth = self.event.draw(rng);
        self.sensors.observe_into(truth, p.order, rng, &mut ws.observed);

        match p.fading {
            Fading::Rayleigh => draw_gains_into(p.sensors, p.rho, rng, &mut ws.gains),
            Fading::None => {
                ws.gains.clear();
                ws.gains.resize(p.sensors, Complex64::new(1.0, 0.0));
            }
        }

        let outputs = ws
            .outputs
            .get_or_insert_with(|| MatchedOutputs::zeros(p.order, p.sensors));
        match &self.bank {
            None => symbol_level_into(&ws.gains, self.es, N0, &ws.observed, p.order, rng, outputs),
            Some(bank) => {
                ws.phases.clear();
                ws.phases.extend((0..p.sensors).map(|_| 2.0 * PI * rng.random::<f64>()));
                bank.transmit_into(&ws.observed, &ws.gains, &ws.phases, &mut ws.samples);
                add_awgn(&mut ws.samples, bank.params().sample_noise_power(N0), rng)
                    .expect("n0 is non-negative");
                bank.correlate_into(&ws.samples, outputs)
                    .expect("transmit buffer matches framing");
                // The genie knows each sensor's carrier phase as part of its channel.
                for (g, phi) in ws.gains.iter_mut().zip(&ws.phases) {
                    *g *= Complex64::from_polar(1.0, *phi);
                }
            }
        }

        let decided = match p.combiner {
            Combiner::Sc => {
                outputs.energies_into(&mut ws.energies);
                sc_argmax(&ws.energies).0
            }
            Combiner::Egc => {
                outputs.energies_into(&mut ws.energies);
                egc_argmax(&ws.energies)
            }
            Combiner::Mrc => mrc_argmax(outputs, &ws.gains),
        };
        (truth, decided + 1)
    }

    /// Runs `trials` trials on `rng` and tallies the errors.
    pub fn run<R: Rng + ?Sized>(&self, rng: &mut R, trials: u64) -> ErrorTally {
        let mut ws = Workspace::default();
        let mut tally = ErrorTally::for_order(self.params.order);
        for _ in 0..trials {
            let (truth, decided) = self.trial(rng, &mut ws);
            let (sym, bits) = count_errors(truth, decided, self.params.order);
            tally.record(sym, bits);
        }
        tally
    }

    /// Tally for chunk `index` of the point.
    pub fn run_chunk(&self, index: u64) -> ErrorTally {
        let mut rng = substream(self.params.seed, index);
        self.run(&mut rng, self.params.chunk_trials(index))
    }
}

/// One end-to-end trial with a full trace.
pub fn run_trial<R: Rng + ?Sized>(params: &SimParams, rng: &mut R) -> Result<TrialRecord> {
    let sim = Simulator::new(params)?;
    let mut ws = Workspace::default();
    let (true_event, decided) = sim.trial(rng, &mut ws);
    let (symbol_err, bit_errs) = count_errors(true_event, decided, params.order);
    Ok(TrialRecord {
        true_event,
        observed: ws.observed,
        decided,
        symbol_err,
        bit_errs,
    })
}

/// Runs every chunk of a point and merges the tallies in chunk order.
pub fn run_tally(params: &SimParams) -> Result<ErrorTally> {
    let sim = Simulator::new(params)?;
    let tallies: Vec<ErrorTally> = (0..params.chunk_count())
        .into_par_iter()
        .map(|i| sim.run_chunk(i))
        .collect();
    tallies
        .iter()
        .try_fold(ErrorTally::for_order(params.order), |acc, t| acc.merge(t))
}

/// Estimates BER and SER for one point on the current rayon pool.
pub fn run_point(params: &SimParams) -> Result<BerPoint> {
    Ok(BerPoint::from_tally(params, &run_tally(params)?))
}

/// [`run_point`] on a dedicated pool of `workers` threads.
pub fn run_point_with_workers(params: &SimParams, workers: usize) -> Result<BerPoint> {
    with_workers(Some(workers), || run_point(params))
}

/// Runs `f` on a pool with `workers` threads, or on the ambient pool.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match workers {
        None => f(),
        Some(0) => Err(Error::Config("workers must be >= 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?
            .install(f),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> SimParams {
        SimParams {
            order: 4,
            sensors: 3,
            snr_db: 8.0,
            trials: 25_000,
            chunk_size: 3_000,
            seed: 99,
            ..Default::default()
        }
    }

    #[test]
    fn chunks_cover_all_trials() {
        let p = params();
        assert_eq!(p.chunk_count(), 9);
        let total: u64 = (0..p.chunk_count()).map(|i| p.chunk_trials(i)).sum();
        assert_eq!(total, p.trials);
        assert_eq!(p.chunk_trials(8), 1_000);
        assert_eq!(run_point(&p).unwrap().trials, p.trials);
    }

    #[test]
    fn validation_errors() {
        for bad in [
            SimParams { order: 3, ..params() },
            SimParams { sensors: 0, ..params() },
            SimParams { p_c: 1.5, ..params() },
            SimParams { rho: -0.1, ..params() },
            SimParams { trials: 0, ..params() },
            SimParams { chunk_size: 0, ..params() },
            SimParams { snr_db: f64::NAN, ..params() },
        ] {
            assert!(run_point(&bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn per_sensor_energy_splits_total() {
        let p = SimParams { snr_db: 20.0, sensors: 4, ..params() };
        assert!((p.per_sensor_energy() - 25.0).abs() < 1e-12);
        // Per-bit SNR scales the symbol energy by log2 M (M = 4 here).
        let bit = SimParams { snr_basis: SnrBasis::Bit, ..p };
        assert!((bit.per_sensor_energy() - 50.0).abs() < 1e-12);
        assert_eq!("eb".parse::<SnrBasis>().unwrap(), SnrBasis::Bit);
        assert!("dbm".parse::<SnrBasis>().is_err());
    }

    #[test]
    fn noiseless_perfect_sensing_never_errs() {
        for (fidelity, combiner) in [
            (Fidelity::Symbol, Combiner::Sc),
            (Fidelity::Symbol, Combiner::Egc),
            (Fidelity::Symbol, Combiner::Mrc),
            (Fidelity::Waveform, Combiner::Sc),
            (Fidelity::Waveform, Combiner::Mrc),
        ] {
            let p = SimParams {
                snr_db: 200.0,
                fidelity,
                combiner,
                trials: 2_000,
                ..params()
            };
            let point = run_point(&p).unwrap();
            assert_eq!(point.symbol_errors, 0, "{fidelity} {combiner}");
        }
    }

    #[test]
    fn inverted_binary_sensor_always_errs() {
        let p = SimParams {
            order: 2,
            sensors: 1,
            snr_db: 200.0,
            p_c: 0.0,
            trials: 5_000,
            ..params()
        };
        let point = run_point(&p).unwrap();
        assert_eq!(point.symbol_errors, p.trials);
        let mut rng = substream(1, 0);
        for _ in 0..100 {
            let t = run_trial(&p, &mut rng).unwrap();
            assert_eq!((t.symbol_err, t.bit_errs), (1, 1));
            assert_ne!(t.decided, t.true_event);
            assert_eq!(t.observed, vec![3 - t.true_event]);
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let p = params();
        let one = run_point_with_workers(&p, 1).unwrap();
        let four = run_point_with_workers(&p, 4).unwrap();
        assert_eq!(one, four);
        assert!(run_point_with_workers(&p, 0).is_err());
    }

    #[test]
    fn chunk_merging_matches_serial_substreams() {
        let p = SimParams { trials: 8 * 1_000, chunk_size: 1_000, ..params() };
        let sim = Simulator::new(&p).unwrap();
        let mut serial = ErrorTally::for_order(p.order);
        for i in 0..8 {
            let mut rng = substream(p.seed, i);
            let t = sim.run(&mut rng, 1_000);
            serial = serial.merge(&t).unwrap();
        }
        assert_eq!(serial, run_tally(&p).unwrap());
    }

    #[test]
    fn substreams_differ() {
        let mut a = substream(7, 0);
        let mut b = substream(7, 1);
        let mut c = substream(8, 0);
        let (x, y, z): (u64, u64, u64) = (a.random(), b.random(), c.random());
        assert!(x != y && x != z && y != z);
        assert_eq!(substream(7, 1).random::<u64>(), y);
    }
}
