//! Fusion-center decision rules.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::phy::{EnergyMatrix, MatchedOutputs};
use crate::{Error, Result};

/// Diversity combiner used at the fusion center.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combiner {
    /// Selection combining: the largest single branch energy wins.
    #[default]
    Sc,
    /// Square-law equal-gain combining.
    Egc,
    /// Coherent maximal-ratio combining with perfect channel knowledge.
    Mrc,
}

impl Combiner {
    pub fn as_str(self) -> &'static str {
        match self {
            Combiner::Sc => "sc",
            Combiner::Egc => "egc",
            Combiner::Mrc => "mrc",
        }
    }
}

impl fmt::Display for Combiner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Combiner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sc" => Ok(Combiner::Sc),
            "egc" => Ok(Combiner::Egc),
            "mrc" => Ok(Combiner::Mrc),
            other => Err(Error::Config(format!("unknown combiner `{other}`"))),
        }
    }
}

/// Outcome of one fusion decision.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionDecision {
    /// Decided symbol, 1-based.
    pub symbol: usize,
    /// Sensor (1-based) whose branch won; selection combining only.
    pub winning_sensor: Option<usize>,
    /// Per-tone decision statistics `Z_1..Z_M`.
    pub statistics: Vec<f64>,
}

/// Index of the first maximum. Ties go to the lowest index.
fn first_argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

/// Row and column of the largest single energy, scanning row-major so ties
/// go to the lowest tone and then the lowest sensor.
pub(crate) fn sc_argmax(e: &EnergyMatrix) -> (usize, usize) {
    let idx = first_argmax(e.as_slice().iter().copied());
    (idx / e.cols(), idx % e.cols())
}

/// Selection combining: `Z_m = max_l (e[m][l] + N)`, decide `argmax_m Z_m`.
///
/// The comparison is done on the unshifted energies. Adding the common
/// offset `N` cannot change the ordering in exact arithmetic, but rounding in
/// `e + N` can merge two distinct energies into a tie.
pub fn sc_decide(e: &EnergyMatrix, branch_noise: f64) -> Result<FusionDecision> {
    if !(branch_noise >= 0.0) {
        return Err(Error::param(format!("branch noise must be >= 0, got {branch_noise}")));
    }
    let (m, l) = sc_argmax(e);
    let statistics = (0..e.rows())
        .map(|row| e.row(row).iter().fold(f64::NEG_INFINITY, |z, &x| z.max(x + branch_noise)))
        .collect();
    Ok(FusionDecision {
        symbol: m + 1,
        winning_sensor: Some(l + 1),
        statistics,
    })
}

pub(crate) fn egc_argmax(e: &EnergyMatrix) -> usize {
    first_argmax((0..e.rows()).map(|m| e.row(m).iter().sum::<f64>()))
}

pub(crate) fn mrc_argmax(y: &MatchedOutputs, gains: &[Complex64]) -> usize {
    first_argmax((0..y.rows()).map(|m| {
        gains
            .iter()
            .enumerate()
            .map(|(l, g)| (g.conj() * y.get(m, l)).re)
            .sum::<f64>()
    }))
}

/// Square-law combining: `Z_m = sum_l e[m][l]`.
pub fn egc_decide(e: &EnergyMatrix) -> Result<FusionDecision> {
    let statistics: Vec<f64> = (0..e.rows()).map(|m| e.row(m).iter().sum()).collect();
    Ok(FusionDecision {
        symbol: first_argmax(statistics.iter().copied()) + 1,
        winning_sensor: None,
        statistics,
    })
}

/// Genie-aided coherent combining: `Z_m = Re(sum_l conj(h_l) y[m][l])`.
pub fn mrc_decide(y: &MatchedOutputs, h: &ChannelRealization) -> Result<FusionDecision> {
    if y.cols() != h.len() {
        return Err(Error::Shape(format!(
            "{} channel gains for {} sensor columns",
            h.len(),
            y.cols()
        )));
    }
    let statistics: Vec<f64> = (0..y.rows())
        .map(|m| {
            h.gains
                .iter()
                .enumerate()
                .map(|(l, g)| (g.conj() * y.get(m, l)).re)
                .sum()
        })
        .collect();
    Ok(FusionDecision {
        symbol: first_argmax(statistics.iter().copied()) + 1,
        winning_sensor: None,
        statistics,
    })
}

/// The decided tone index is the event level.
pub fn decision_to_event(d: &FusionDecision) -> usize {
    d.symbol
}
