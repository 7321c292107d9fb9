//! MFSK modulation and non-coherent detection.
//!
//! Two equivalent routes produce the `M x L` tone-energy matrix the fusion
//! center decides on:
//!
//! * the waveform route synthesizes each sensor's TDMA slot at complex
//!   baseband, adds sampled noise and runs a correlator bank;
//! * the symbol-level route draws the matched-filter outputs directly,
//!   `y = h sqrt(Es) + n` on the transmitted tone and `y = n` elsewhere.
//!
//! Both are normalized so that the noise energy at every correlator output
//! equals `n0` and a noiseless unit-gain tone yields the per-sensor energy.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{complex_normal, ChannelRealization};
use crate::{check_order, Error, Result};

/// Slot pulse shape.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Pulse {
    #[default]
    Rectangular,
    /// Gaussian pulse centred in the slot; `bt` is the bandwidth-time
    /// product relative to the slot duration.
    Gaussian { bt: f64 },
}

/// Frequency separation between adjacent tones.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ToneSpacing {
    /// `1 / T_h`: tones are orthogonal over one slot.
    #[default]
    PerSlot,
    /// `1 / T_s`: orthogonal over a whole symbol but not over a slot when
    /// `L > 1`. Accepted as an explicit override.
    PerSymbol,
    /// Explicit spacing in Hz; must be at least `1 / T_h`.
    Hz(f64),
}

/// User-facing waveform options. Order, sensor count and energy come from the
/// simulation point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaveformSettings {
    /// Symbol duration in seconds.
    pub ts: f64,
    /// Samples per TDMA slot; `None` picks `4 M`.
    pub samples_per_slot: Option<usize>,
    pub carrier_f: f64,
    pub pulse: Pulse,
    pub tone_spacing: ToneSpacing,
}

impl Default for WaveformSettings {
    fn default() -> Self {
        Self {
            ts: 1e-3,
            samples_per_slot: None,
            carrier_f: 0.0,
            pulse: Pulse::Rectangular,
            tone_spacing: ToneSpacing::PerSlot,
        }
    }
}

/// Fully resolved waveform description for one simulation point.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformParams {
    pub order: usize,
    pub sensors: usize,
    pub ts: f64,
    pub samples_per_slot: usize,
    pub carrier_f: f64,
    pub pulse: Pulse,
    pub tone_spacing: ToneSpacing,
    /// Energy each sensor puts into its slot, `E = P T_h`.
    pub per_sensor_energy: f64,
}

impl WaveformParams {
    pub fn new(order: usize, sensors: usize, ts: f64, per_sensor_energy: f64) -> Result<Self> {
        Self::from_settings(
            order,
            sensors,
            per_sensor_energy,
            &WaveformSettings {
                ts,
                ..Default::default()
            },
        )
    }

    pub fn from_settings(
        order: usize,
        sensors: usize,
        per_sensor_energy: f64,
        settings: &WaveformSettings,
    ) -> Result<Self> {
        let params = Self {
            order,
            sensors,
            ts: settings.ts,
            samples_per_slot: settings.samples_per_slot.unwrap_or(4 * order),
            carrier_f: settings.carrier_f,
            pulse: settings.pulse,
            tone_spacing: settings.tone_spacing,
            per_sensor_energy,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        check_order(self.order)?;
        if self.sensors == 0 {
            return Err(Error::param("sensor count must be at least 1"));
        }
        if !(self.ts > 0.0) || !self.ts.is_finite() {
            return Err(Error::param(format!("symbol duration must be > 0, got {}", self.ts)));
        }
        if self.samples_per_slot < 4 * self.order {
            return Err(Error::param(format!(
                "samples_per_slot must be >= 4 M = {}, got {}",
                4 * self.order,
                self.samples_per_slot
            )));
        }
        if !(self.per_sensor_energy >= 0.0) {
            return Err(Error::param("per-sensor energy must be >= 0"));
        }
        if let Pulse::Gaussian { bt } = self.pulse {
            if !(bt > 0.0) || !bt.is_finite() {
                return Err(Error::param(format!("gaussian bt must be > 0, got {bt}")));
            }
        }
        if let ToneSpacing::Hz(df) = self.tone_spacing {
            // Relative slack absorbs round-off in user-computed 1/T_h.
            if !(df * self.th() >= 1.0 - 1e-9) {
                return Err(Error::param(format!(
                    "tone spacing {df} Hz is below 1/T_h = {} Hz",
                    1.0 / self.th()
                )));
            }
        }
        Ok(())
    }

    /// Slot duration `T_h = T_s / L`.
    pub fn th(&self) -> f64 {
        self.ts / self.sensors as f64
    }

    pub fn dt(&self) -> f64 {
        self.th() / self.samples_per_slot as f64
    }

    pub fn tone_spacing_hz(&self) -> f64 {
        match self.tone_spacing {
            ToneSpacing::PerSlot => 1.0 / self.th(),
            ToneSpacing::PerSymbol => 1.0 / self.ts,
            ToneSpacing::Hz(df) => df,
        }
    }

    /// Transmit power `P = E / T_h`.
    pub fn power(&self) -> f64 {
        self.per_sensor_energy / self.th()
    }

    /// Noise power per complex sample that produces noise energy `n0` at
    /// each correlator output.
    pub fn sample_noise_power(&self, n0: f64) -> f64 {
        n0 / self.dt()
    }

    fn pulse_samples(&self) -> Vec<f64> {
        let n = self.samples_per_slot;
        let th = self.th();
        let raw: Vec<f64> = match self.pulse {
            Pulse::Rectangular => vec![1.0; n],
            Pulse::Gaussian { bt } => {
                let sigma = (2f64.ln()).sqrt() / (2.0 * PI * bt / th);
                (0..n)
                    .map(|k| {
                        let t = (k as f64 + 0.5) * self.dt() - 0.5 * th;
                        (-t * t / (2.0 * sigma * sigma)).exp()
                    })
                    .collect()
            }
        };
        // Normalize to sum(g^2) dt = T_h so slot energy is always P T_h.
        let energy: f64 = raw.iter().map(|g| g * g).sum::<f64>() * self.dt();
        let scale = (th / energy).sqrt();
        raw.into_iter().map(|g| g * scale).collect()
    }
}

/// Frequency of tone `m` (1-based) relative to the carrier.
pub fn tone_frequency(m: usize, params: &WaveformParams) -> Result<f64> {
    if !(1..=params.order).contains(&m) {
        return Err(Error::param(format!(
            "tone index {m} outside 1..={}",
            params.order
        )));
    }
    Ok(m as f64 * params.tone_spacing_hz())
}

/// Complex baseband samples of one sensor's slot.
///
/// Time is measured from the start of the symbol, so slot `l` covers sample
/// positions `[(l-1) n, l n)` of the full symbol buffer.
pub fn synthesize_slot(m: usize, l: usize, phi: f64, params: &WaveformParams) -> Result<Vec<Complex64>> {
    if !(1..=params.sensors).contains(&l) {
        return Err(Error::param(format!(
            "sensor index {l} outside 1..={}",
            params.sensors
        )));
    }
    let f = params.carrier_f + tone_frequency(m, params)?;
    let amp = params.power().sqrt();
    let n = params.samples_per_slot;
    let dt = params.dt();
    let offset = (l - 1) * n;
    Ok(params
        .pulse_samples()
        .into_iter()
        .enumerate()
        .map(|(k, g)| {
            let t = (offset + k) as f64 * dt;
            Complex64::from_polar(amp * g, 2.0 * PI * f * t + phi)
        })
        .collect())
}

/// Non-negative `M x L` matrix of tone energies; rows are tones, columns
/// are sensors. Indices are 0-based.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnergyMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl EnergyMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("empty {rows}x{cols} energy matrix")));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|e| !(**e >= 0.0)) {
            return Err(Error::Shape(format!("energy entry {bad} is not >= 0")));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged energy rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Complex matched-filter outputs `y[m][l]`, same layout as [`EnergyMatrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedOutputs {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl MatchedOutputs {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} entries for a {rows}x{cols} output matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.cols + col]
    }

    fn resize(&mut self, rows: usize, cols: usize) {
        self.rows = rows;
        self.cols = cols;
        self.data.resize(rows * cols, Complex64::new(0.0, 0.0));
    }

    pub fn energies(&self) -> EnergyMatrix {
        EnergyMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|y| y.norm_sqr()).collect(),
        }
    }

    pub(crate) fn energies_into(&self, out: &mut EnergyMatrix) {
        out.rows = self.rows;
        out.cols = self.cols;
        out.data.clear();
        out.data.extend(self.data.iter().map(|y| y.norm_sqr()));
    }
}

/// Precomputed correlator templates for one waveform configuration.
#[derive(Debug, Clone)]
pub struct ToneBank {
    params: WaveformParams,
    /// Pulse-shaped tones in slot-local time, `M x n`.
    templates: Vec<Complex64>,
    /// Phase each tone has accumulated at the start of each slot, `M x L`.
    slot_phase: Vec<Complex64>,
}

impl ToneBank {
    pub fn new(params: &WaveformParams) -> Result<Self> {
        params.validate()?;
        let n = params.samples_per_slot;
        let dt = params.dt();
        let th = params.th();
        let pulse = params.pulse_samples();
        let mut templates = Vec::with_capacity(params.order * n);
        let mut slot_phase = Vec::with_capacity(params.order * params.sensors);
        for m in 1..=params.order {
            let f = params.carrier_f + tone_frequency(m, params)?;
            templates.extend(
                pulse
                    .iter()
                    .enumerate()
                    .map(|(k, &g)| Complex64::from_polar(g, 2.0 * PI * f * k as f64 * dt)),
            );
            slot_phase.extend(
                (0..params.sensors).map(|l| Complex64::from_polar(1.0, 2.0 * PI * f * l as f64 * th)),
            );
        }
        Ok(Self {
            params: params.clone(),
            templates,
            slot_phase,
        })
    }

    pub fn params(&self) -> &WaveformParams {
        &self.params
    }

    /// Writes `y[m][l] = sum_k r_l[k] conj(template_m[k]) dt / sqrt(T_h)`.
    pub fn correlate_into(&self, received: &[Complex64], out: &mut MatchedOutputs) -> Result<()> {
        let p = &self.params;
        let n = p.samples_per_slot;
        let expected = n * p.sensors;
        if received.len() != expected {
            return Err(Error::Framing {
                expected,
                actual: received.len(),
            });
        }
        out.resize(p.order, p.sensors);
        let norm = p.dt() / p.th().sqrt();
        for (l, slot) in received.chunks_exact(n).enumerate() {
            for m in 0..p.order {
                let template = &self.templates[m * n..(m + 1) * n];
                let acc: Complex64 = slot
                    .iter()
                    .zip(template)
                    .map(|(r, t)| r * t.conj())
                    .sum();
                out.data[m * p.sensors + l] = acc * self.slot_phase[m * p.sensors + l].conj() * norm;
            }
        }
        Ok(())
    }

    pub fn correlate(&self, received: &[Complex64]) -> Result<MatchedOutputs> {
        let mut out = MatchedOutputs::zeros(self.params.order, self.params.sensors);
        self.correlate_into(received, &mut out)?;
        Ok(out)
    }

    /// Writes the faded, phase-rotated transmissions of all sensors into
    /// `buf` (length `L n`), without noise.
    pub(crate) fn transmit_into(
        &self,
        observed: &[usize],
        gains: &[Complex64],
        phases: &[f64],
        buf: &mut Vec<Complex64>,
    ) {
        let p = &self.params;
        let n = p.samples_per_slot;
        let amp = p.power().sqrt();
        buf.clear();
        for l in 0..p.sensors {
            let m = observed[l] - 1;
            let rot = gains[l]
                * self.slot_phase[m * p.sensors + l]
                * Complex64::from_polar(amp, phases[l]);
            buf.extend(self.templates[m * n..(m + 1) * n].iter().map(|t| rot * t));
        }
    }
}

/// Correlator-bank energies for `L` received slots laid out back to back.
pub fn demodulate(received: &[Complex64], params: &WaveformParams) -> Result<EnergyMatrix> {
    Ok(ToneBank::new(params)?.correlate(received)?.energies())
}

/// Draws symbol-level matched-filter outputs into `out`.
///
/// Noise is drawn for every entry, in storage order, so the number of random
/// draws depends only on the matrix shape.
pub(crate) fn symbol_level_into<R: Rng + ?Sized>(
    gains: &[Complex64],
    es: f64,
    n0: f64,
    observed: &[usize],
    order: usize,
    rng: &mut R,
    out: &mut MatchedOutputs,
) {
    let sensors = observed.len();
    out.resize(order, sensors);
    for y in out.data.iter_mut() {
        *y = complex_normal(rng, n0);
    }
    let amp = es.sqrt();
    for (l, (&m, h)) in observed.iter().zip(gains).enumerate() {
        out.data[(m - 1) * sensors + l] += h * amp;
    }
}

/// Symbol-level matched-filter outputs for one trial.
pub fn symbol_level_outputs<R: Rng + ?Sized>(
    h: &ChannelRealization,
    es: f64,
    n0: f64,
    observed: &[usize],
    order: usize,
    rng: &mut R,
) -> Result<MatchedOutputs> {
    check_order(order)?;
    if !(es >= 0.0) || !(n0 >= 0.0) {
        return Err(Error::param("symbol energy and n0 must be >= 0"));
    }
    if h.len() != observed.len() || observed.is_empty() {
        return Err(Error::Shape(format!(
            "{} gains for {} sensors",
            h.len(),
            observed.len()
        )));
    }
    if let Some(bad) = observed.iter().find(|m| !(1..=order).contains(*m)) {
        return Err(Error::param(format!("observed symbol {bad} outside 1..={order}")));
    }
    let mut out = MatchedOutputs::zeros(order, observed.len());
    symbol_level_into(&h.gains, es, n0, observed, order, rng, &mut out);
    Ok(out)
}

/// Symbol-level tone energies `|y[m][l]|^2` for one trial.
pub fn symbol_level_trial<R: Rng + ?Sized>(
    h: &ChannelRealization,
    es: f64,
    n0: f64,
    observed: &[usize],
    order: usize,
    rng: &mut R,
) -> Result<EnergyMatrix> {
    Ok(symbol_level_outputs(h, es, n0, observed, order, rng)?.energies())
}
