//! Core value types: signals, the five-concept decomposition, and the
//! recomposition / concept-substitution algebra.
//!
//! A decomposition splits a series into `levels + peaks + scale * (lf + hf)`,
//! where `scale` is a single positive scalar broadcast over the window and the
//! other four components are series of the same length. `hf` is defined as the
//! residual of the normalized signal after the moving-average `lf`, so
//! recomposition is exact by construction.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniformly sampled univariate series with timestamps in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    timestamps: Vec<f64>,
    values: Vec<f64>,
}

impl Signal {
    /// Validates lengths, ordering and finiteness before construction.
    pub fn new(timestamps: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::LengthMismatch {
                expected: timestamps.len(),
                actual: values.len(),
            });
        }
        if timestamps.is_empty() {
            return Err(Error::InvalidSignal("empty series".into()));
        }
        for pair in timestamps.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::InvalidSignal(format!(
                    "timestamps not strictly increasing ({} then {})",
                    pair[0], pair[1]
                )));
            }
        }
        if let Some(v) = timestamps
            .iter()
            .chain(values.iter())
            .find(|v| !v.is_finite())
        {
            return Err(Error::InvalidSignal(format!("non-finite value {v}")));
        }
        Ok(Self { timestamps, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Contiguous sub-signal over `range` (validated by the caller's slicing).
    pub fn slice(&self, start: usize, end: usize) -> Signal {
        Signal {
            timestamps: self.timestamps[start..end].to_vec(),
            values: self.values[start..end].to_vec(),
        }
    }
}

/// The five decomposition concepts, in the fixed order used for coalition
/// bit-indexing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConceptId {
    Levels,
    Peaks,
    Scale,
    Lf,
    Hf,
}

impl ConceptId {
    pub const ALL: [ConceptId; 5] = [
        ConceptId::Levels,
        ConceptId::Peaks,
        ConceptId::Scale,
        ConceptId::Lf,
        ConceptId::Hf,
    ];

    pub const COUNT: usize = 5;

    /// Position in the fixed concept order; doubles as the coalition bit.
    pub fn index(self) -> usize {
        match self {
            ConceptId::Levels => 0,
            ConceptId::Peaks => 1,
            ConceptId::Scale => 2,
            ConceptId::Lf => 3,
            ConceptId::Hf => 4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ConceptId::Levels => "Levels",
            ConceptId::Peaks => "Peaks",
            ConceptId::Scale => "Scale",
            ConceptId::Lf => "LF",
            ConceptId::Hf => "HF",
        }
    }
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Subset of concepts kept from the explained instance; the complement is
/// substituted from a background decomposition.
///
/// Stored as a 5-bit mask so the 32 coalitions enumerate as `0..32`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConceptMask(u8);

impl ConceptMask {
    pub const FULL: ConceptMask = ConceptMask(0b11111);
    pub const EMPTY: ConceptMask = ConceptMask(0);

    /// Number of distinct coalitions over the five concepts.
    pub const COALITIONS: usize = 1 << ConceptId::COUNT;

    pub fn from_bits(bits: u8) -> Self {
        ConceptMask(bits & 0b11111)
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn contains(self, c: ConceptId) -> bool {
        self.0 >> c.index() & 1 == 1
    }

    pub fn with(self, c: ConceptId) -> Self {
        ConceptMask(self.0 | 1 << c.index())
    }

    pub fn without(self, c: ConceptId) -> Self {
        ConceptMask(self.0 & !(1 << c.index()))
    }

    pub fn kept(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = ConceptId> {
        ConceptId::ALL.into_iter().filter(move |c| self.contains(*c))
    }
}

/// The five concept components of one window or cycle, plus bookkeeping of
/// which indices the extraction pipeline modified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// Piecewise-constant local mean.
    pub levels: Vec<f64>,
    /// Outlier excursions; zero outside `peak_indices`.
    pub peaks: Vec<f64>,
    /// Positive amplitude normalizer, broadcast as a constant series.
    pub scale: f64,
    /// Slow-varying component of the normalized signal.
    pub lf: Vec<f64>,
    /// Fast residual: `filtered / scale - lf` by construction.
    pub hf: Vec<f64>,
    /// Indices redrawn while filtering level-change residuals.
    pub resampled_indices: BTreeSet<usize>,
    /// Indices of detected outliers.
    pub peak_indices: BTreeSet<usize>,
}

impl Decomposition {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.levels.len();
        for (name, series) in [("peaks", &self.peaks), ("lf", &self.lf), ("hf", &self.hf)] {
            if series.len() != n {
                return Err(Error::InvalidSignal(format!(
                    "component {name} has length {} but levels has {n}",
                    series.len()
                )));
            }
        }
        if !(self.scale > 0.0) {
            return Err(Error::InvalidSignal(format!(
                "scale must be positive, got {}",
                self.scale
            )));
        }
        for (i, v) in self.peaks.iter().enumerate() {
            if *v != 0.0 && !self.peak_indices.contains(&i) {
                return Err(Error::InvalidSignal(format!(
                    "peaks is nonzero at {i}, outside peak_indices"
                )));
            }
        }
        if let Some(&i) = self.resampled_indices.iter().chain(self.peak_indices.iter()).next_back()
        {
            if i >= n {
                return Err(Error::InvalidSignal(format!(
                    "bookkeeping index {i} out of bounds for length {n}"
                )));
            }
        }
        Ok(())
    }
}

/// Rebuilds the series a decomposition represents:
/// `levels + peaks + scale * (lf + hf)`, elementwise.
pub fn recompose(d: &Decomposition) -> Vec<f64> {
    let mut out = Vec::with_capacity(d.len());
    for i in 0..d.len() {
        out.push(d.levels[i] + d.peaks[i] + d.scale * (d.lf[i] + d.hf[i]));
    }
    out
}

/// Recomposes a hybrid decomposition: concepts in `mask` are taken from
/// `instance`, the rest from `background`.
///
/// Both decompositions must have the same length; callers fit background
/// components to the window length first.
pub fn substitute(
    instance: &Decomposition,
    background: &Decomposition,
    mask: ConceptMask,
) -> Result<Vec<f64>> {
    if instance.len() != background.len() {
        return Err(Error::LengthMismatch {
            expected: instance.len(),
            actual: background.len(),
        });
    }
    let pick = |c: ConceptId| -> &Decomposition {
        if mask.contains(c) {
            instance
        } else {
            background
        }
    };
    let levels = &pick(ConceptId::Levels).levels;
    let peaks = &pick(ConceptId::Peaks).peaks;
    let scale = pick(ConceptId::Scale).scale;
    let lf = &pick(ConceptId::Lf).lf;
    let hf = &pick(ConceptId::Hf).hf;
    let mut out = Vec::with_capacity(instance.len());
    for i in 0..instance.len() {
        out.push(levels[i] + peaks[i] + scale * (lf[i] + hf[i]));
    }
    Ok(out)
}
