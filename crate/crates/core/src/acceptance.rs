//! End-to-end validation suite.
//!
//! Each criterion runs real simulations at fixed seeds and checks them
//! against analytic references, reference operating points or exact
//! invariants. A criterion can pass, fail, or pass with a flag when a
//! reference value is only loosely comparable to this model.

use std::fmt;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

use crate::analytic::{awgn_mfsk_sep, db_to_linear, rayleigh_ncbfsk_ber};
use crate::engine::{run_point, run_sweep, write_csv, Axis, Fading, Fidelity, SimParams, SnrBasis, SweepSpec};
use crate::fusion::{egc_decide, sc_argmax, sc_decide, Combiner};
use crate::metrics::{wilson_ci, BerPoint, ErrorTally};
use crate::phy::{demodulate, synthesize_slot, EnergyMatrix, WaveformParams};
use crate::Result;

const SEED: u64 = 20_240_611;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    /// Passed, but a reference comparison fell outside its advisory band.
    Flag,
    Fail,
}

impl Outcome {
    pub fn passed(self) -> bool {
        self != Outcome::Fail
    }

    pub fn label(self) -> &'static str {
        match self {
            Outcome::Pass => "PASS",
            Outcome::Flag => "PASS (flagged)",
            Outcome::Fail => "FAIL",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub id: u8,
    pub name: &'static str,
    pub outcome: Outcome,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{}] {} ({:.1} s): {}",
            self.outcome.label(),
            self.id,
            self.name,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

pub struct Criterion {
    pub id: u8,
    pub name: &'static str,
    run: fn() -> Result<(Outcome, String)>,
}

impl Criterion {
    pub fn run(&self) -> Report {
        let start = Instant::now();
        let (outcome, detail) = match (self.run)() {
            Ok(r) => r,
            Err(e) => (Outcome::Fail, format!("error: {e}")),
        };
        Report {
            id: self.id,
            name: self.name,
            outcome,
            detail,
            elapsed: start.elapsed(),
        }
    }
}

pub const CRITERIA: [Criterion; 9] = [
    Criterion { id: 1, name: "awgn oracle", run: awgn_oracle },
    Criterion { id: 2, name: "rayleigh oracle", run: rayleigh_oracle },
    Criterion { id: 3, name: "error floors", run: error_floors },
    Criterion { id: 4, name: "alphabet scaling", run: alphabet_scaling },
    Criterion { id: 5, name: "detection probability sweep", run: detection_sweep },
    Criterion { id: 6, name: "combiner ordering", run: combiner_ordering },
    Criterion { id: 7, name: "fidelity equivalence", run: fidelity_equivalence },
    Criterion { id: 8, name: "exact properties", run: exact_properties },
    Criterion { id: 9, name: "worker determinism", run: worker_determinism },
];

/// Looks up a criterion by its number.
pub fn criterion(id: u8) -> Option<&'static Criterion> {
    CRITERIA.iter().find(|c| c.id == id)
}

pub fn run_all() -> Vec<Report> {
    CRITERIA.iter().map(Criterion::run).collect()
}

fn verdict(ok: bool) -> Outcome {
    if ok {
        Outcome::Pass
    } else {
        Outcome::Fail
    }
}

/// Distance from `p` to the observed rate, in binomial standard deviations.
fn sigmas(errors: u64, trials: u64, p: f64) -> f64 {
    let observed = errors as f64 / trials as f64;
    let sd = (p * (1.0 - p) / trials as f64).sqrt();
    (observed - p).abs() / sd
}

fn point(params: SimParams) -> Result<BerPoint> {
    run_point(&params)
}

fn awgn_oracle() -> Result<(Outcome, String)> {
    let mut ok = true;
    let mut worst = 0.0f64;
    for order in [2, 4, 16] {
        for snr_db in [0.0, 5.0, 10.0] {
            let r = point(SimParams {
                order,
                sensors: 1,
                snr_db,
                fading: Fading::None,
                trials: 1_000_000,
                seed: SEED,
                ..Default::default()
            })?;
            let p = awgn_mfsk_sep(order, db_to_linear(snr_db))?;
            let z = sigmas(r.symbol_errors, r.trials, p);
            worst = worst.max(z);
            ok &= z <= 3.0;
        }
    }
    Ok((verdict(ok), format!("9 points, worst deviation {worst:.2} sigma (limit 3)")))
}

fn rayleigh_oracle() -> Result<(Outcome, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    for snr_db in [0.0, 5.0, 10.0, 20.0] {
        let r = point(SimParams {
            snr_db,
            trials: 10_000_000,
            chunk_size: 100_000,
            seed: SEED,
            ..Default::default()
        })?;
        let p = rayleigh_ncbfsk_ber(db_to_linear(snr_db))?;
        let z = sigmas(r.bit_errors, r.trials, p);
        ok &= z <= 3.0;
        parts.push(format!("{snr_db} dB: {:.5} vs {p:.5} ({z:.2} sigma)", r.ber));
    }
    Ok((verdict(ok), parts.join("; ")))
}

fn error_floors() -> Result<(Outcome, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    for (p_c, target) in [(0.9995, 2.67e-4), (0.999, 5.33e-4)] {
        let r = point(SimParams {
            order: 16,
            sensors: 8,
            snr_db: 30.0,
            p_c,
            trials: 10_000_000,
            chunk_size: 100_000,
            seed: SEED,
            ..Default::default()
        })?;
        let rel = (r.ber - target).abs() / target;
        ok &= rel <= 0.15;
        parts.push(format!("pc={p_c}: {:.4e} vs {target:.3e} ({:.1}%)", r.ber, 100.0 * rel));
    }
    Ok((verdict(ok), parts.join("; ")))
}

fn alphabet_curve(snr_basis: SnrBasis) -> Result<Vec<BerPoint>> {
    (1..=8)
        .map(|k| {
            point(SimParams {
                order: 1 << k,
                sensors: 4,
                snr_db: 5.0,
                snr_basis,
                trials: 300_000,
                seed: SEED,
                ..Default::default()
            })
        })
        .collect()
}

/// The BER-vs-M trend only exists when the SNR axis is energy per bit: at a
/// fixed symbol energy, adding tones can only add competitors to the
/// correct one. The symbol-energy curve is reported alongside for reference.
fn alphabet_scaling() -> Result<(Outcome, String)> {
    let rows = alphabet_curve(SnrBasis::Bit)?;
    let per_symbol = alphabet_curve(SnrBasis::Symbol)?;
    let decreasing = rows.windows(2).all(|w| w[1].ber < w[0].ber);
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    let separated = last.ci_high < first.ci_low;
    let dev_first = (first.ber - 0.2414) / 0.2414;
    let dev_last = (last.ber - 0.09148) / 0.09148;
    let outcome = if !(decreasing && separated) {
        Outcome::Fail
    } else if dev_first.abs() > 0.25 || dev_last.abs() > 0.25 {
        Outcome::Flag
    } else {
        Outcome::Pass
    };
    let curve = |rows: &[BerPoint]| {
        rows.iter().map(|r| format!("{:.4}", r.ber)).collect::<Vec<_>>().join(", ")
    };
    Ok((
        outcome,
        format!(
            "BER for M=2..256 at 5 dB per bit: [{}]; strictly decreasing: {decreasing}; \
             CI-separated: {separated}; M=2 {:+.1}% from 0.2414, M=256 {:+.1}% from 0.09148; \
             same SNR per symbol: [{}]",
            curve(&rows),
            100.0 * dev_first,
            100.0 * dev_last,
            curve(&per_symbol)
        ),
    ))
}

fn detection_sweep() -> Result<(Outcome, String)> {
    let rows: Vec<BerPoint> = [1.0, 0.9995, 0.999, 0.99]
        .into_iter()
        .map(|p_c| {
            point(SimParams {
                order: 16,
                sensors: 8,
                snr_db: 16.0,
                p_c,
                trials: 2_000_000,
                chunk_size: 50_000,
                seed: SEED,
                ..Default::default()
            })
        })
        .collect::<Result<_>>()?;
    let increasing = rows.windows(2).all(|w| w[1].ber > w[0].ber);
    let curve: Vec<String> = rows.iter().map(|r| format!("pc={}: {:.3e}", r.pc, r.ber)).collect();
    Ok((verdict(increasing), format!("{}; strictly increasing: {increasing}", curve.join(", "))))
}

fn combiner_ordering() -> Result<(Outcome, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    for snr_db in [10.0, 15.0] {
        let run = |combiner| {
            point(SimParams {
                order: 8,
                sensors: 4,
                snr_db,
                combiner,
                trials: 1_000_000,
                seed: SEED,
                ..Default::default()
            })
        };
        let (sc, egc) = (run(Combiner::Sc)?, run(Combiner::Egc)?);
        let sc_ci = wilson_ci(sc.symbol_errors, sc.trials, 0.95);
        let egc_ci = wilson_ci(egc.symbol_errors, egc.trials, 0.95);
        let here = egc.ser <= sc.ser && egc_ci.1 <= sc_ci.0;
        ok &= here;
        parts.push(format!(
            "{snr_db} dB: EGC {:.4e} [{:.4e}, {:.4e}] vs SC {:.4e} [{:.4e}, {:.4e}]",
            egc.ser, egc_ci.0, egc_ci.1, sc.ser, sc_ci.0, sc_ci.1
        ));
    }
    Ok((verdict(ok), parts.join("; ")))
}

fn fidelity_equivalence() -> Result<(Outcome, String)> {
    let run = |fidelity| {
        point(SimParams {
            order: 4,
            sensors: 2,
            snr_db: 10.0,
            fidelity,
            trials: 100_000,
            seed: SEED,
            ..Default::default()
        })
    };
    let (sym, wave) = (run(Fidelity::Symbol)?, run(Fidelity::Waveform)?);
    let overlap = sym.ci_low <= wave.ci_high && wave.ci_low <= sym.ci_high;
    Ok((
        verdict(overlap),
        format!(
            "symbol {:.4e} [{:.4e}, {:.4e}], waveform {:.4e} [{:.4e}, {:.4e}]",
            sym.ber, sym.ci_low, sym.ci_high, wave.ber, wave.ci_low, wave.ci_high
        ),
    ))
}

fn random_matrix(rng: &mut Pcg64, rows: usize, cols: usize) -> Result<EnergyMatrix> {
    let data = (0..rows * cols).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    EnergyMatrix::new(rows, cols, data)
}

fn exact_properties() -> Result<(Outcome, String)> {
    let mut rng = Pcg64::seed_from_u64(SEED);
    let mut failures = Vec::new();

    // Selection combining against a straightforward search, plus invariances.
    let (mut argmax_bad, mut offset_bad, mut scale_bad) = (0, 0, 0);
    for _ in 0..10_000 {
        let rows = 1 << rng.random_range(1..=5);
        let cols = rng.random_range(1..=8);
        let e = random_matrix(&mut rng, rows, cols)?;
        let d = sc_decide(&e, 0.0)?;
        let mut best = (0, 0);
        for m in 0..rows {
            for l in 0..cols {
                if e.get(m, l) > e.get(best.0, best.1) {
                    best = (m, l);
                }
            }
        }
        argmax_bad += usize::from(d.symbol != best.0 + 1);
        let shifted = sc_decide(&e, rng.random_range(0.0..100.0))?;
        offset_bad += usize::from(shifted.symbol != d.symbol);
        let a = [0.25, 2.0, 1024.0][rng.random_range(0..3)];
        let scaled = EnergyMatrix::new(rows, cols, e.as_slice().iter().map(|x| a * x).collect())?;
        scale_bad += usize::from(sc_decide(&scaled, 0.0)?.symbol != d.symbol);
    }
    for (name, bad) in [("argmax", argmax_bad), ("offset", offset_bad), ("scale", scale_bad)] {
        if bad > 0 {
            failures.push(format!("{name}: {bad} mismatches"));
        }
    }

    // Ties resolve to the lowest tone, then the lowest sensor.
    let tied = EnergyMatrix::from_rows(&[vec![1.0, 3.0], vec![3.0, 3.0], vec![2.0, 0.0]])?;
    if sc_argmax(&tied) != (0, 1) || egc_decide(&tied)?.symbol != 2 {
        failures.push("tie-break".into());
    }
    let flat = EnergyMatrix::new(4, 3, vec![5.0; 12])?;
    if sc_decide(&flat, 1.0)?.symbol != 1 || egc_decide(&flat)?.symbol != 1 {
        failures.push("flat tie-break".into());
    }

    // Noiseless tones leak at most 1e-6 of their energy into other tones.
    let mut worst_leak = 0.0f64;
    for order in [2usize, 4, 16] {
        let p = WaveformParams::new(order, 2, 1e-3, 1.0)?;
        for m in 1..=order {
            let mut received = Vec::with_capacity(2 * p.samples_per_slot);
            for l in 1..=2 {
                received.extend(synthesize_slot(m, l, 0.3 * l as f64, &p)?);
            }
            let e = demodulate(&received, &p)?;
            for l in 0..2 {
                let on = e.get(m - 1, l);
                for k in (0..order).filter(|&k| k != m - 1) {
                    worst_leak = worst_leak.max(e.get(k, l) / on);
                }
            }
        }
    }
    if worst_leak > 1e-6 {
        failures.push(format!("leakage {worst_leak:.2e}"));
    }

    // Tally merging is associative and order-independent.
    let mut assoc_bad = 0;
    for _ in 0..1_000 {
        let mut t = [ErrorTally::new(4); 3];
        for tally in &mut t {
            tally.trials = rng.random_range(0..1_000_000);
            tally.symbol_errors = rng.random_range(0..=tally.trials);
            tally.bit_errors = rng.random_range(0..=4 * tally.symbol_errors);
        }
        let left = t[0].merge(&t[1])?.merge(&t[2])?;
        let right = t[0].merge(&t[1].merge(&t[2])?)?;
        let swapped = t[2].merge(&t[0])?.merge(&t[1])?;
        assoc_bad += usize::from(left != right || left != swapped);
    }
    if assoc_bad > 0 {
        failures.push(format!("merge: {assoc_bad} mismatches"));
    }

    let summary = format!(
        "10000 random matrices (argmax, offset, scale), tie-breaks, leakage {worst_leak:.1e}, 1000 merge triples"
    );
    if failures.is_empty() {
        Ok((Outcome::Pass, summary))
    } else {
        Ok((Outcome::Fail, format!("{summary}; failed: {}", failures.join(", "))))
    }
}

/// CSV bytes of a small sweep run on a pool of `workers` threads.
pub fn sweep_bytes(workers: usize) -> Result<Vec<u8>> {
    let base = SimParams {
        order: 8,
        sensors: 3,
        p_c: 0.99,
        trials: 60_000,
        chunk_size: 4_000,
        seed: SEED,
        ..Default::default()
    };
    let mut spec = SweepSpec::new(
        base,
        vec![
            Axis::new("snr_db", [0.0, 6.0, 12.0]),
            Axis::new("combiner", ["sc", "egc", "mrc"]),
        ],
    );
    spec.workers = Some(workers);
    let table = run_sweep(&spec)?;
    let mut buf = Vec::new();
    write_csv(&table, &mut buf)?;
    Ok(buf)
}

fn worker_determinism() -> Result<(Outcome, String)> {
    let reference = sweep_bytes(1)?;
    let mut same = true;
    for workers in [4, 8] {
        same &= sweep_bytes(workers)? == reference;
    }
    Ok((
        verdict(same),
        format!("9-point sweep, {} CSV bytes, identical for 1, 4 and 8 workers: {same}", reference.len()),
    ))
}
