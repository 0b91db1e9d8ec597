//! Seeded synthetic experiments and the recovery score used to judge them.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{FbdError, Result};
use crate::fbd::lsbd_truncated_conv;
use crate::model::{build_interferograms, ChannelSet, InterferogramSet};
use crate::seqcore::Sequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentId {
    /// Linear plus hyperbolic arrival.
    I,
    /// Single linear arrival.
    II,
    /// Experiment I responses, fitted through their interferograms.
    III,
    /// One damped cosine, translated per channel.
    IV,
    /// Dense responses whose energy grows with time.
    V,
    /// Dense responses whose energy decays with time.
    VFront,
    /// Direct arrival plus hyperbolic reflections, band-limited source.
    Layered,
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ExperimentId::I => "I",
            ExperimentId::II => "II",
            ExperimentId::III => "III",
            ExperimentId::IV => "IV",
            ExperimentId::V => "V",
            ExperimentId::VFront => "V-front",
            ExperimentId::Layered => "layered",
        };
        f.write_str(s)
    }
}

impl FromStr for ExperimentId {
    type Err = FbdError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "i" | "1" => ExperimentId::I,
            "ii" | "2" => ExperimentId::II,
            "iii" | "3" => ExperimentId::III,
            "iv" | "4" => ExperimentId::IV,
            "v" | "5" => ExperimentId::V,
            "v-front" | "vfront" | "5f" => ExperimentId::VFront,
            "layered" => ExperimentId::Layered,
            other => return Err(FbdError::InvalidArgument(format!("unknown experiment {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceKind {
    GaussianWhite,
    /// Gaussian noise band-passed to 5-60 Hz, Nyquist 60 Hz.
    BandLimited,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    pub nr: usize,
    pub tau: usize,
    pub t: usize,
    pub seed: u64,
    pub snr_db: Option<f64>,
    /// Linear arrival `onset + slope * i`, channel `i` zero-based.
    pub linear_onset: f64,
    pub linear_slope: f64,
    /// Hyperbolic arrival `sqrt(onset^2 + (slope * i)^2)`.
    pub hyperbolic_onset: f64,
    pub hyperbolic_slope: f64,
    pub amplitudes: (f64, f64),
    pub source: SourceKind,
}

impl ExperimentSpec {
    pub fn new(id: ExperimentId, seed: u64) -> Self {
        let layered = id == ExperimentId::Layered;
        Self {
            id,
            nr: 20,
            tau: 30,
            t: if layered { 600 } else { 400 },
            seed,
            snr_db: None,
            linear_onset: 6.0,
            linear_slope: 0.5,
            hyperbolic_onset: 10.0,
            hyperbolic_slope: 1.2,
            amplitudes: (1.0, 1.0),
            source: if layered {
                SourceKind::BandLimited
            } else {
                SourceKind::GaussianWhite
            },
        }
    }

    pub fn with_snr(mut self, snr_db: f64) -> Self {
        self.snr_db = Some(snr_db);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.nr < 2 {
            return Err(FbdError::InvalidArgument("experiments need at least 2 channels".into()));
        }
        if self.tau >= self.t {
            return Err(FbdError::InvalidArgument(format!(
                "tau {} must be below T {}",
                self.tau, self.t
            )));
        }
        Ok(())
    }
}

/// Ground truth and data of one experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub spec: ExperimentSpec,
    /// `g⁰_i` on `{0..tau}`.
    pub truth: ChannelSet,
    /// `s⁰` on `{0..T}`.
    pub source: Sequence,
    /// `d_i = s⁰ * g⁰_i` on `{0..T}`, noisy if the spec asks for it.
    pub data: ChannelSet,
}

impl Experiment {
    /// `g⁰_ij` on `{-tau..tau}`.
    pub fn truth_interferograms(&self) -> InterferogramSet {
        build_interferograms(&self.truth, self.spec.tau).expect("truth spans tau + 1 samples")
    }
}

fn spike_time(t: f64, tau: usize) -> Result<usize> {
    let r = t.round();
    if !(0.0..=tau as f64).contains(&r) {
        return Err(FbdError::InvalidArgument(format!(
            "arrival at {t} lies outside 0..={tau}"
        )));
    }
    Ok(r as usize)
}

fn linear_time(spec: &ExperimentSpec, i: usize) -> f64 {
    spec.linear_onset + spec.linear_slope * i as f64
}

fn hyperbolic_time(spec: &ExperimentSpec, i: usize) -> f64 {
    spec.hyperbolic_onset.hypot(spec.hyperbolic_slope * i as f64)
}

fn two_arrivals(spec: &ExperimentSpec) -> Result<Vec<Vec<f64>>> {
    (0..spec.nr)
        .map(|i| {
            let mut g = vec![0.0; spec.tau + 1];
            g[spike_time(linear_time(spec, i), spec.tau)?] += spec.amplitudes.0;
            g[spike_time(hyperbolic_time(spec, i), spec.tau)?] += spec.amplitudes.1;
            Ok(g)
        })
        .collect()
}

fn one_arrival(spec: &ExperimentSpec, wavelet: &[f64]) -> Result<Vec<Vec<f64>>> {
    (0..spec.nr)
        .map(|i| {
            let on = spike_time(linear_time(spec, i), spec.tau)?;
            if on + wavelet.len() > spec.tau + 1 {
                return Err(FbdError::InvalidArgument(format!(
                    "wavelet at {on} runs past tau {}",
                    spec.tau
                )));
            }
            let mut g = vec![0.0; spec.tau + 1];
            g[on..on + wavelet.len()].copy_from_slice(wavelet);
            Ok(g)
        })
        .collect()
}

/// Damped cosine carried by every channel of experiment IV.
pub fn translated_wavelet() -> Vec<f64> {
    (0..10)
        .map(|t| {
            let t = t as f64;
            (0.6 * t).cos() * (-t / 6.0).exp()
        })
        .collect()
}

fn dense(spec: &ExperimentSpec, rng: &mut ChaCha8Rng, envelope: impl Fn(f64) -> f64) -> Vec<Vec<f64>> {
    let tau = spec.tau as f64;
    (0..spec.nr)
        .map(|_| {
            (0..=spec.tau)
                .map(|t| {
                    let n: f64 = StandardNormal.sample(rng);
                    n * envelope(t as f64 / tau)
                })
                .collect()
        })
        .collect()
}

fn layered(spec: &ExperimentSpec, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    let tau = spec.tau as f64;
    // reflector zero-offset times and moveout, shared by all channels
    let reflectors: Vec<(f64, f64, f64)> = (0..4)
        .map(|k| {
            let t0 = spec.hyperbolic_onset + (k as f64) * 0.15 * tau + rng.random_range(0.0..2.0);
            let amp = rng.random_range(0.15..0.35) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            (t0, spec.hyperbolic_slope * rng.random_range(0.5..1.0), amp)
        })
        .collect();
    (0..spec.nr)
        .map(|i| {
            let mut g = vec![0.0; spec.tau + 1];
            g[spike_time(linear_time(spec, i), spec.tau)?] += 1.0;
            for &(t0, slope, amp) in &reflectors {
                let t = t0.hypot(slope * i as f64);
                if t.round() <= tau {
                    g[t.round() as usize] += amp;
                }
            }
            Ok(g)
        })
        .collect()
}

/// Zero-mean Gaussian noise band-passed to 5-60 Hz at a 120 Hz sampling
/// rate: cosine ramps over 3-5 Hz and 50-60 Hz, so only the lowest
/// frequencies and Nyquist itself are removed.
fn band_limited(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    use std::f64::consts::PI;
    let fs = 120.0;
    let mut buf: Vec<Complex<f64>> = (0..n).map(|_| Complex::new(StandardNormal.sample(rng), 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let f = k.min(n - k) as f64 * fs / n as f64;
        let w = if f < 3.0 {
            0.0
        } else if f < 5.0 {
            0.5 * (1.0 - (PI * (f - 3.0) / 2.0).cos())
        } else if f <= 50.0 {
            1.0
        } else {
            0.5 * (1.0 + (PI * (f - 50.0) / 10.0).cos())
        };
        *v *= w;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.into_iter().map(|c| c.re / n as f64).collect()
}

/// Builds truth, source and data for `spec`.
///
/// The source has unit energy and its last `tau` samples are zero, so
/// `s⁰ * g⁰_i` fits inside `{0..T}` without truncation.
pub fn make_experiment(spec: &ExperimentSpec) -> Result<Experiment> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let truth_rows = match spec.id {
        ExperimentId::I => two_arrivals(spec)?,
        ExperimentId::II => one_arrival(spec, &[spec.amplitudes.0])?,
        ExperimentId::III => two_arrivals(spec)?,
        ExperimentId::IV => one_arrival(spec, &translated_wavelet())?,
        ExperimentId::V => dense(spec, &mut rng, |x| 0.05 + x * x),
        ExperimentId::VFront => dense(spec, &mut rng, |x| (-x * 6.0).exp()),
        ExperimentId::Layered => layered(spec, &mut rng)?,
    };
    let truth = ChannelSet::from_rows(truth_rows)?;
    if let Some(i) = truth
        .channels()
        .iter()
        .position(|g| g.samples().iter().all(|v| *v == 0.0))
    {
        return Err(FbdError::DegenerateChannel(format!("channel {i} of the truth is zero")));
    }

    let n = spec.t + 1;
    let mut s: Vec<f64> = match spec.source {
        SourceKind::GaussianWhite => (0..n).map(|_| StandardNormal.sample(&mut rng)).collect(),
        SourceKind::BandLimited => band_limited(n, &mut rng),
    };
    for v in &mut s[n - spec.tau..] {
        *v = 0.0;
    }
    let norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
    s.iter_mut().for_each(|v| *v /= norm);
    let source = Sequence::new(0, s)?;
    let clean = ChannelSet::from_rows(
        truth
            .channels()
            .iter()
            .map(|g| lsbd_truncated_conv(source.samples(), g.samples(), n))
            .collect(),
    )?;
    let data = match spec.snr_db {
        Some(snr) => clean.with_noise(snr, spec.seed.wrapping_add(1_000_003))?,
        None => clean,
    };
    Ok(Experiment {
        spec: spec.clone(),
        truth,
        source,
        data,
    })
}

/// Mean normalised correlation between `est` and `truth` after the single
/// global shift and sign that maximise it.
///
/// Invariant to global scale, sign and time shift of `est`.
pub fn recovery_score(est: &ChannelSet, truth: &ChannelSet) -> Result<f64> {
    if est.nr() != truth.nr() {
        return Err(FbdError::Dimension(format!(
            "{} estimated channels against {} true ones",
            est.nr(),
            truth.nr()
        )));
    }
    if est.total_energy() == 0.0 {
        return Err(FbdError::ZeroEnergy("estimate"));
    }
    if truth.channels().iter().any(|c| crate::seqcore::energy(c) == 0.0) {
        return Err(FbdError::ZeroEnergy("truth channel"));
    }
    let norms: Vec<f64> = est
        .channels()
        .iter()
        .zip(truth.channels())
        .map(|(e, t)| (crate::seqcore::energy(e) * crate::seqcore::energy(t)).sqrt())
        .collect();
    let lo = truth.origin() - (est.origin() + est.span() as isize - 1);
    let hi = truth.origin() + truth.span() as isize - 1 - est.origin();
    let mut best = f64::NEG_INFINITY;
    for k in lo..=hi {
        let total: f64 = est
            .channels()
            .iter()
            .zip(truth.channels())
            .zip(&norms)
            .map(|((e, t), n)| if *n > 0.0 { e.shifted(k).dot(t) / n } else { 0.0 })
            .sum();
        best = best.max(total.abs());
    }
    Ok(best / est.nr() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn experiment_one_first_channel() {
        let e = make_experiment(&ExperimentSpec::new(ExperimentId::I, 1)).unwrap();
        let g = e.truth.channel(0).samples();
        let spikes: Vec<usize> = (0..g.len()).filter(|&t| g[t] != 0.0).collect();
        assert_eq!(spikes, vec![6, 10]);
    }

    #[test]
    fn default_steep_hyperbola_is_rejected() {
        let mut spec = ExperimentSpec::new(ExperimentId::I, 1);
        spec.hyperbolic_slope = 3.0;
        assert!(make_experiment(&spec).is_err());
    }

    #[test]
    fn all_experiments_build() {
        for id in [
            ExperimentId::I,
            ExperimentId::II,
            ExperimentId::III,
            ExperimentId::IV,
            ExperimentId::V,
            ExperimentId::VFront,
            ExperimentId::Layered,
        ] {
            let e = make_experiment(&ExperimentSpec::new(id, 3)).unwrap();
            assert_eq!(e.truth.span(), 31);
            assert_eq!(e.data.span(), e.spec.t + 1);
            assert!(e.truth.channels().iter().all(|g| crate::seqcore::energy(g) > 0.0));
            let again = make_experiment(&ExperimentSpec::new(id, 3)).unwrap();
            assert_eq!(again.data, e.data);
        }
    }

    #[test]
    fn score_invariances() {
        let e = make_experiment(&ExperimentSpec::new(ExperimentId::I, 1)).unwrap();
        assert!((recovery_score(&e.truth, &e.truth).unwrap() - 1.0).abs() < 1e-12);
        let moved = ChannelSet::new(e.truth.channels().iter().map(|g| g.scaled(-2.0).shifted(3)).collect()).unwrap();
        assert!((recovery_score(&moved, &e.truth).unwrap() - 1.0).abs() < 1e-12);
    }
}
