//! Finite-support discrete-time sequences with an explicit time origin.
//!
//! Every sequence carries the integer index of its first sample, so the
//! supports `{0..T}`, `{0..tau}`, `{-T..T}` and `{-tau..tau}` used by the
//! solvers can be mixed without off-by-one bookkeeping at call sites.
//!
//! Convolution and correlation switch to an FFT path when both operands are
//! longer than [`FFT_THRESHOLD`]; [`convolve_direct`] is always available and
//! is the reference the FFT path is tested against.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{FbdError, Result};
use crate::model::InterferogramSet;

/// Operand length above which convolution goes through the FFT.
pub const FFT_THRESHOLD: usize = 64;

/// A real-valued sequence on `{origin .. origin + len - 1}`, zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    origin: isize,
    samples: Vec<f64>,
}

impl Sequence {
    pub fn new(origin: isize, samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(FbdError::Empty);
        }
        if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
            return Err(FbdError::NonFinite { index });
        }
        Ok(Self { origin, samples })
    }

    /// Builds a sequence from samples that are known to be finite and non-empty.
    pub(crate) fn from_raw(origin: isize, samples: Vec<f64>) -> Self {
        debug_assert!(!samples.is_empty());
        debug_assert!(samples.iter().all(|v| v.is_finite()));
        Self { origin, samples }
    }

    pub fn zeros(origin: isize, len: usize) -> Self {
        Self::from_raw(origin, vec![0.0; len.max(1)])
    }

    /// Unit impulse at time `at`.
    pub fn delta(at: isize) -> Self {
        Self::from_raw(at, vec![1.0])
    }

    pub fn origin(&self) -> isize {
        self.origin
    }

    /// Index of the last stored sample.
    pub fn end(&self) -> isize {
        self.origin + self.samples.len() as isize - 1
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Value at time `t`; zero outside the stored support.
    pub fn at(&self, t: isize) -> f64 {
        let i = t - self.origin;
        if i < 0 || i as usize >= self.samples.len() {
            0.0
        } else {
            self.samples[i as usize]
        }
    }

    /// `a(-t)`.
    pub fn reversed(&self) -> Self {
        let mut samples = self.samples.clone();
        samples.reverse();
        Self::from_raw(-self.end(), samples)
    }

    /// `a(t - k)`.
    pub fn shifted(&self, k: isize) -> Self {
        Self::from_raw(self.origin + k, self.samples.clone())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::from_raw(self.origin, self.samples.iter().map(|v| v * c).collect())
    }

    /// Restriction (and zero extension) to `{from..=to}`.
    pub fn window(&self, from: isize, to: isize) -> Self {
        assert!(to >= from, "empty window {from}..={to}");
        let samples = (from..=to).map(|t| self.at(t)).collect();
        Self::from_raw(from, samples)
    }

    /// `sum_t a(t) b(t)` over the union of supports.
    pub fn dot(&self, other: &Sequence) -> f64 {
        let lo = self.origin.max(other.origin);
        let hi = self.end().min(other.end());
        (lo..=hi).map(|t| self.at(t) * other.at(t)).sum()
    }

    pub fn sum(&self) -> f64 {
        self.samples.iter().sum()
    }

    /// Largest absolute sample difference against `other` over both supports.
    pub fn max_abs_diff(&self, other: &Sequence) -> f64 {
        let lo = self.origin.min(other.origin);
        let hi = self.end().max(other.end());
        (lo..=hi).map(|t| (self.at(t) - other.at(t)).abs()).fold(0.0, f64::max)
    }
}

fn check_finite(a: &Sequence) -> Result<()> {
    match a.samples.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(FbdError::NonFinite { index }),
        None => Ok(()),
    }
}

/// Full linear convolution `a * b`.
pub fn convolve(a: &Sequence, b: &Sequence) -> Result<Sequence> {
    check_finite(a)?;
    check_finite(b)?;
    let origin = a.origin + b.origin;
    let samples = if a.len().min(b.len()) > FFT_THRESHOLD {
        convolve_fft_raw(&a.samples, &b.samples)
    } else {
        convolve_direct_raw(&a.samples, &b.samples)
    };
    Ok(Sequence::from_raw(origin, samples))
}

/// Direct double-sum convolution. Reference path for tests.
pub fn convolve_direct(a: &Sequence, b: &Sequence) -> Result<Sequence> {
    check_finite(a)?;
    check_finite(b)?;
    Ok(Sequence::from_raw(
        a.origin + b.origin,
        convolve_direct_raw(&a.samples, &b.samples),
    ))
}

/// FFT convolution regardless of length.
pub fn convolve_fft(a: &Sequence, b: &Sequence) -> Result<Sequence> {
    check_finite(a)?;
    check_finite(b)?;
    Ok(Sequence::from_raw(
        a.origin + b.origin,
        convolve_fft_raw(&a.samples, &b.samples),
    ))
}

pub(crate) fn convolve_direct_raw(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (o, &y) in out[i..].iter_mut().zip(b) {
            *o += x * y;
        }
    }
    out
}

pub(crate) fn convolve_fft_raw(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len() + b.len() - 1;
    let size = n.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);

    let mut fa: Vec<Complex<f64>> = a.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fa.resize(size, Complex::new(0.0, 0.0));
    let mut fb: Vec<Complex<f64>> = b.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fb.resize(size, Complex::new(0.0, 0.0));
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / size as f64;
    fa.iter().take(n).map(|c| c.re * scale).collect()
}

/// Full cross-correlation `(a ⊗ b)(t) = sum_s a(s) b(s + t)` over its
/// natural support.
pub fn xcorr_full(a: &Sequence, b: &Sequence) -> Result<Sequence> {
    convolve(&a.reversed(), b)
}

/// Cross-correlation on lags `{-maxlag..=maxlag}`, zero-padded outside the
/// natural support.
pub fn xcorr(a: &Sequence, b: &Sequence, maxlag: usize) -> Result<Sequence> {
    let m = maxlag as isize;
    Ok(xcorr_full(a, b)?.window(-m, m))
}

/// Direct double-sum correlation on `{-maxlag..=maxlag}`.
pub fn xcorr_direct(a: &Sequence, b: &Sequence, maxlag: usize) -> Result<Sequence> {
    check_finite(a)?;
    check_finite(b)?;
    let m = maxlag as isize;
    let samples = (-m..=m)
        .map(|t| (a.origin..=a.end()).map(|s| a.at(s) * b.at(s + t)).sum())
        .collect();
    Ok(Sequence::from_raw(-m, samples))
}

pub fn energy(a: &Sequence) -> f64 {
    a.samples.iter().map(|v| v * v).sum()
}

/// Running energy normalised by the total; ends at 1.
pub fn cumulative_energy(a: &Sequence) -> Result<Sequence> {
    let total = energy(a);
    if total <= 0.0 {
        return Err(FbdError::ZeroEnergy("cumulative_energy"));
    }
    let mut acc = 0.0;
    let mut samples: Vec<f64> = a
        .samples
        .iter()
        .map(|v| {
            acc += v * v;
            acc / total
        })
        .collect();
    // pin the endpoint against summation round-off
    if let Some(last) = samples.last_mut() {
        *last = 1.0;
    }
    Ok(Sequence::from_raw(a.origin, samples))
}

/// Adds i.i.d. Gaussian noise whose realised energy gives exactly `snr_db`.
///
/// `snr_db = +inf` returns the input unchanged.
pub fn add_noise(a: &Sequence, snr_db: f64, seed: u64) -> Result<Sequence> {
    if snr_db.is_nan() {
        return Err(FbdError::InvalidArgument("snr_db is NaN".into()));
    }
    if snr_db == f64::INFINITY {
        return Ok(a.clone());
    }
    let signal = energy(a);
    if signal <= 0.0 {
        return Err(FbdError::ZeroEnergy("add_noise"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<f64> = (0..a.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let drawn: f64 = noise.iter().map(|v| v * v).sum();
    if drawn <= 0.0 {
        return Err(FbdError::ZeroEnergy("noise draw"));
    }
    let target = signal / 10f64.powf(snr_db / 10.0);
    let scale = (target / drawn).sqrt();
    let samples = a.samples.iter().zip(&noise).map(|(s, n)| s + scale * n).collect();
    Sequence::new(a.origin, samples)
}

/// Divides every interferogram by `d_11(0)`, which becomes exactly 1.
pub fn max_normalize_interferograms(d: &InterferogramSet) -> Result<InterferogramSet> {
    let pivot = d.get(0, 0).at(0);
    if pivot == 0.0 {
        return Err(FbdError::DegenerateChannel(
            "first auto-correlation vanishes at zero lag".into(),
        ));
    }
    Ok(d.map_entries(|s| Sequence::from_raw(s.origin, s.samples.iter().map(|v| v / pivot).collect())))
}
