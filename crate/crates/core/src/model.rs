//! Containers for channel outputs, impulse responses, interferograms and the
//! source auto-correlation, plus the per-stage solve report.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::error::{FbdError, Result};
use crate::fbd::Weight;
use crate::seqcore::{self, Sequence};

/// `nr` equal-length sequences sharing one origin: channel outputs `d_i`
/// on `{0..T}` or impulse responses `g_i` on `{0..tau}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    signals: Vec<Sequence>,
}

impl ChannelSet {
    pub fn new(signals: Vec<Sequence>) -> Result<Self> {
        let first = signals
            .first()
            .ok_or_else(|| FbdError::Dimension("channel set needs at least one channel".into()))?;
        let (origin, len) = (first.origin(), first.len());
        for (i, s) in signals.iter().enumerate() {
            if s.origin() != origin || s.len() != len {
                return Err(FbdError::Dimension(format!(
                    "channel {i} on {}..={} but channel 0 on {}..={}",
                    s.origin(),
                    s.end(),
                    origin,
                    origin + len as isize - 1
                )));
            }
        }
        Ok(Self { signals })
    }

    /// Channels from raw rows, all starting at time 0.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let signals = rows
            .into_iter()
            .map(|r| Sequence::new(0, r))
            .collect::<Result<Vec<_>>>()?;
        Self::new(signals)
    }

    pub fn nr(&self) -> usize {
        self.signals.len()
    }

    /// Number of samples per channel (`T + 1` or `tau + 1`).
    pub fn span(&self) -> usize {
        self.signals[0].len()
    }

    pub fn origin(&self) -> isize {
        self.signals[0].origin()
    }

    pub fn channel(&self, i: usize) -> &Sequence {
        &self.signals[i]
    }

    pub fn channels(&self) -> &[Sequence] {
        &self.signals
    }

    pub fn total_energy(&self) -> f64 {
        self.signals.iter().map(seqcore::energy).sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            signals: self.signals.iter().map(|s| s.scaled(c)).collect(),
        }
    }

    /// Adds noise to every channel at exactly `snr_db`; channel `i` uses
    /// seed `seed + i`.
    pub fn with_noise(&self, snr_db: f64, seed: u64) -> Result<Self> {
        let signals = self
            .signals
            .iter()
            .enumerate()
            .map(|(i, s)| seqcore::add_noise(s, snr_db, seed.wrapping_add(i as u64)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(signals)
    }
}

/// Upper-triangular collection of cross-correlations `g_ij` (or `d_ij`),
/// `i <= j`, each on lags `{-maxlag..maxlag}`. Indices are zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferogramSet {
    nr: usize,
    maxlag: usize,
    entries: Vec<Sequence>,
}

/// Position of pair `(i, j)`, `i <= j`, in row-major upper-triangular order.
pub fn pair_index(nr: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < nr);
    i * nr - i * (i + 1) / 2 + j
}

/// All pairs `(i, j)` with `i <= j` in storage order.
pub fn pairs(nr: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..nr).flat_map(move |i| (i..nr).map(move |j| (i, j)))
}

impl InterferogramSet {
    /// `entries` in [`pairs`] order; each is re-windowed onto `{-maxlag..maxlag}`.
    pub fn new(nr: usize, maxlag: usize, entries: Vec<Sequence>) -> Result<Self> {
        if nr == 0 {
            return Err(FbdError::Dimension("interferogram set needs nr >= 1".into()));
        }
        let expected = nr * (nr + 1) / 2;
        if entries.len() != expected {
            return Err(FbdError::Dimension(format!(
                "expected {expected} interferograms for nr={nr}, got {}",
                entries.len()
            )));
        }
        let m = maxlag as isize;
        let entries = entries
            .into_iter()
            .map(|s| {
                if s.origin() == -m && s.len() == 2 * maxlag + 1 {
                    s
                } else {
                    s.window(-m, m)
                }
            })
            .collect();
        Ok(Self { nr, maxlag, entries })
    }

    pub fn nr(&self) -> usize {
        self.nr
    }

    pub fn maxlag(&self) -> usize {
        self.maxlag
    }

    /// Stored entry for `i <= j`.
    pub fn entry(&self, i: usize, j: usize) -> &Sequence {
        &self.entries[pair_index(self.nr, i, j)]
    }

    /// `g_ij`; for `i > j` this is the time-reversed `g_ji`.
    pub fn get(&self, i: usize, j: usize) -> Cow<'_, Sequence> {
        if i <= j {
            Cow::Borrowed(self.entry(i, j))
        } else {
            Cow::Owned(self.entry(j, i).reversed())
        }
    }

    pub fn entries(&self) -> &[Sequence] {
        &self.entries
    }

    pub fn map_entries(&self, f: impl Fn(&Sequence) -> Sequence) -> Self {
        Self {
            nr: self.nr,
            maxlag: self.maxlag,
            entries: self.entries.iter().map(f).collect(),
        }
    }

    /// Sum of squared differences against another set on the same lag window.
    pub fn misfit(&self, other: &InterferogramSet) -> Result<f64> {
        if self.nr != other.nr || self.maxlag != other.maxlag {
            return Err(FbdError::Dimension("interferogram sets differ in shape".into()));
        }
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| {
                a.samples()
                    .iter()
                    .zip(b.samples())
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
            })
            .sum())
    }

    /// Entries viewed as a channel set, for scoring.
    pub fn as_channel_set(&self) -> ChannelSet {
        ChannelSet {
            signals: self.entries.clone(),
        }
    }
}

/// Cross-correlates every channel pair on `{-maxlag..maxlag}`.
pub fn build_interferograms(d: &ChannelSet, maxlag: usize) -> Result<InterferogramSet> {
    if maxlag + 1 > d.span() {
        return Err(FbdError::InvalidArgument(format!(
            "maxlag {maxlag} exceeds span {} - 1",
            d.span()
        )));
    }
    let entries = pairs(d.nr())
        .map(|(i, j)| seqcore::xcorr(d.channel(i), d.channel(j), maxlag))
        .collect::<Result<Vec<_>>>()?;
    InterferogramSet::new(d.nr(), maxlag, entries)
}

/// Symmetric source auto-correlation on `{-maxlag..maxlag}`, stored one-sided.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceAutocorr {
    one_sided: Vec<f64>,
}

impl SourceAutocorr {
    /// `one_sided[t]` is `s_a(t) = s_a(-t)` for `t = 0..=maxlag`.
    pub fn new(one_sided: Vec<f64>) -> Result<Self> {
        if one_sided.is_empty() {
            return Err(FbdError::Empty);
        }
        if let Some(index) = one_sided.iter().position(|v| !v.is_finite()) {
            return Err(FbdError::NonFinite { index });
        }
        Ok(Self { one_sided })
    }

    pub fn delta(maxlag: usize) -> Self {
        let mut one_sided = vec![0.0; maxlag + 1];
        one_sided[0] = 1.0;
        Self { one_sided }
    }

    pub fn maxlag(&self) -> usize {
        self.one_sided.len() - 1
    }

    pub fn at(&self, t: isize) -> f64 {
        self.one_sided.get(t.unsigned_abs()).copied().unwrap_or(0.0)
    }

    pub fn one_sided(&self) -> &[f64] {
        &self.one_sided
    }

    /// Two-sided sequence on `{-maxlag..maxlag}`.
    pub fn to_sequence(&self) -> Sequence {
        let m = self.maxlag() as isize;
        Sequence::from_raw(-m, (-m..=m).map(|t| self.at(t)).collect())
    }

    /// Whether `s_a(t) <= s_a(0)` for every lag. A failure is reported as a
    /// warning only: it is necessary, not sufficient, for `s_a` to be an
    /// auto-correlation.
    pub fn check_peak(&self) -> bool {
        let peak = self.one_sided[0];
        let ok = self.one_sided.iter().all(|&v| v <= peak * (1.0 + 1e-12));
        if !ok {
            log::warn!("source auto-correlation exceeds its zero-lag value");
        }
        ok
    }
}

/// One homotopy leg (one regularisation weight) of a stage solve.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LegReport {
    pub weight: Option<Weight>,
    /// Objective after the first-block update of each outer iteration.
    pub objective_first: Vec<f64>,
    /// Objective after the second-block update of each outer iteration.
    pub objective_second: Vec<f64>,
    /// Convergence measure per outer iteration.
    pub delta: Vec<f64>,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    /// Accepted line-search steps.
    #[serde(default)]
    pub extrapolations: usize,
    pub converged: bool,
}

impl LegReport {
    pub fn final_objective(&self) -> Option<f64> {
        self.objective_second.last().or(self.objective_first.last()).copied()
    }
}

/// Per-stage record of objective trajectories and iteration counts.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SolveReport {
    pub stage: String,
    pub legs: Vec<LegReport>,
    pub seed: u64,
    pub wall_time_secs: f64,
    /// Objective of the stage's own functional (without regularisation) at
    /// the returned estimate.
    pub final_misfit: f64,
}

impl SolveReport {
    pub fn new(stage: &str, seed: u64) -> Self {
        Self {
            stage: stage.to_string(),
            seed,
            ..Default::default()
        }
    }

    pub fn total_outer_iterations(&self) -> usize {
        self.legs.iter().map(|l| l.outer_iterations).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_indexing_is_dense() {
        let nr = 5;
        for (n, (i, j)) in pairs(nr).enumerate() {
            assert_eq!(pair_index(nr, i, j), n);
        }
        assert_eq!(pairs(nr).count(), nr * (nr + 1) / 2);
    }

    #[test]
    fn single_delta_channel() {
        let d = ChannelSet::new(vec![Sequence::new(0, vec![1.0, 0.0, 0.0]).unwrap()]).unwrap();
        let dij = build_interferograms(&d, 2).unwrap();
        assert_eq!(dij.entry(0, 0).samples(), &[0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn reversed_access_for_lower_triangle() {
        let d = ChannelSet::from_rows(vec![vec![1.0, 2.0, -1.0], vec![0.5, 0.0, 3.0]]).unwrap();
        let dij = build_interferograms(&d, 2).unwrap();
        let g12 = dij.get(0, 1);
        let g21 = dij.get(1, 0);
        for t in -2..=2 {
            assert_eq!(g12.at(t), g21.at(-t));
        }
    }

    #[test]
    fn rejects_mismatched_channels() {
        let a = Sequence::new(0, vec![1.0, 2.0]).unwrap();
        let b = Sequence::new(0, vec![1.0]).unwrap();
        assert!(ChannelSet::new(vec![a, b]).is_err());
        let d = ChannelSet::from_rows(vec![vec![1.0, 2.0]]).unwrap();
        assert!(build_interferograms(&d, 2).is_err());
    }

    #[test]
    fn autocorr_is_mirrored() {
        let sa = SourceAutocorr::new(vec![1.0, 0.5, -0.25]).unwrap();
        assert_eq!(sa.at(-2), -0.25);
        assert_eq!(sa.at(3), 0.0);
        let s = sa.to_sequence();
        assert_eq!(s.samples(), &[-0.25, 0.5, 1.0, 0.5, -0.25]);
        assert!(sa.check_peak());
        assert!(!SourceAutocorr::new(vec![1.0, 1.5]).unwrap().check_peak());
    }
}
