//! Least-squares blind deconvolution: fit `d_k ≈ s * g_k` on `{0..T}` with
//! `sum s^2 = 1`, alternating between the source and the responses.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::operators::{LsbdResponseOp, LsbdSourceOp};
use crate::altmin::{self, AltMinConfig, BlockProblem, InnerSolver, LinearOperator};
use crate::error::{FbdError, Result};
use crate::fbd::FbdResult;
use crate::linalg::{norm2, BandedSym, SymFactor};
use crate::model::{build_interferograms, ChannelSet, SolveReport, SourceAutocorr};
use crate::seqcore::{self, Sequence};
use nalgebra::DMatrix;

/// Alternating state for the LSBD functional `U`.
pub struct LsbdProblem<'a> {
    data: &'a ChannelSet,
    tau: usize,
    s: Vec<f64>,
    g: Vec<Vec<f64>>,
    inner: InnerSolver,
    scale: f64,
    prev: Option<(Vec<f64>, Vec<Vec<f64>>)>,
}

/// `U(s, g) = sum_k sum_{t=0..T} (d_k(t) - (s * g_k)(t))^2`.
pub fn lsbd_misfit(d: &ChannelSet, s: &[f64], g: &[Vec<f64>]) -> f64 {
    d.channels()
        .iter()
        .zip(g)
        .map(|(dk, gk)| {
            let pred = truncated_conv(s, gk, dk.len());
            dk.samples()
                .iter()
                .zip(&pred)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum()
}

/// `(s * g)(t)` for `t = 0..n`.
pub(crate) fn truncated_conv(s: &[f64], g: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (u, &gu) in g.iter().enumerate() {
        if gu == 0.0 || u >= n {
            continue;
        }
        for (o, &sv) in out[u..].iter_mut().zip(s) {
            *o += gu * sv;
        }
    }
    out
}

impl<'a> LsbdProblem<'a> {
    pub fn new(data: &'a ChannelSet, tau: usize, s: Vec<f64>, g: Vec<Vec<f64>>, inner: InnerSolver) -> Self {
        let scale = data.total_energy();
        Self {
            data,
            tau,
            s,
            g,
            inner,
            scale,
            prev: None,
        }
    }

    pub fn source(&self) -> &[f64] {
        &self.s
    }

    pub fn responses(&self) -> &[Vec<f64>] {
        &self.g
    }

    fn t_len(&self) -> usize {
        self.data.span()
    }

    /// Rescale `s` to unit energy, compensating in every `g_k`.
    fn normalize_source(&mut self) {
        let n = norm2(&self.s).sqrt();
        if n > 0.0 {
            self.s.iter_mut().for_each(|v| *v /= n);
            for gk in &mut self.g {
                gk.iter_mut().for_each(|v| *v *= n);
            }
        }
    }

    fn source_normal_equations(&self) -> (BandedSym, Vec<f64>) {
        let n = self.t_len();
        let tau = self.tau;
        let last = n - 1;
        // prefix[l][j] = sum_k sum_{i <= j} g_k(i + l) g_k(i)
        let mut prefix = vec![Vec::new(); tau + 1];
        for (l, p) in prefix.iter_mut().enumerate() {
            let mut acc = 0.0;
            *p = (0..=tau - l)
                .map(|j| {
                    acc += self.g.iter().map(|gk| gk[j + l] * gk[j]).sum::<f64>();
                    acc
                })
                .collect();
        }
        let mut m = BandedSym::zeros(n, tau);
        for col in 0..n {
            for l in 0..=tau.min(last - col) {
                let row = col + l;
                let jmax = (last - row).min(tau - l);
                m.add(row, col, prefix[l][jmax]);
            }
        }
        let rhs = (0..n)
            .map(|mm| {
                self.data
                    .channels()
                    .iter()
                    .zip(&self.g)
                    .map(|(dk, gk)| {
                        let d = dk.samples();
                        (mm..=(mm + tau).min(last)).map(|t| d[t] * gk[t - mm]).sum::<f64>()
                    })
                    .sum()
            })
            .collect();
        (m, rhs)
    }

    fn response_normal_matrix(&self) -> DMatrix<f64> {
        let n = self.t_len();
        let tau = self.tau;
        let s = &self.s;
        let mut a = DMatrix::zeros(tau + 1, tau + 1);
        for u in 0..=tau {
            for v in u..=tau {
                let l = v - u;
                let val: f64 = (0..n.saturating_sub(v)).map(|m| s[m] * s[m + l]).sum();
                a[(u, v)] = val;
                a[(v, u)] = val;
            }
        }
        a
    }
}

impl BlockProblem for LsbdProblem<'_> {
    fn objective(&self) -> f64 {
        lsbd_misfit(self.data, &self.s, &self.g)
    }

    fn update_first(&mut self) -> Result<usize> {
        let iters = match self.inner {
            InnerSolver::Direct => {
                let (m, rhs) = self.source_normal_equations();
                let ms = m.mul_vec(&self.s);
                let r: Vec<f64> = rhs.iter().zip(&ms).map(|(a, b)| a - b).collect();
                let step = m.solve(&r)?;
                let before = self.objective();
                let old = std::mem::take(&mut self.s);
                self.s = old.iter().zip(&step).map(|(a, b)| a + b).collect();
                // an ill-conditioned solve may miss the minimiser; never step uphill
                if !(self.objective() <= before) {
                    self.s = old;
                }
                1
            }
            InnerSolver::Cgls { tol, max_iters } => {
                let op = LsbdSourceOp::new(&self.g, self.t_len());
                let rhs: Vec<f64> = self.data.channels().iter().flat_map(|d| d.samples().to_vec()).collect();
                let sol = altmin::solve_linear_ls_from(
                    |x| op.apply(x),
                    |y| op.adjoint(y),
                    self.s.clone(),
                    &rhs,
                    tol,
                    max_iters,
                )?;
                self.s = sol.x;
                sol.iterations
            }
        };
        self.normalize_source();
        Ok(iters)
    }

    fn update_second(&mut self) -> Result<usize> {
        let n = self.t_len();
        let tau = self.tau;
        match self.inner {
            InnerSolver::Direct => {
                let factor = SymFactor::new(self.response_normal_matrix());
                let s = &self.s;
                let g = self
                    .data
                    .channels()
                    .par_iter()
                    .map(|dk| {
                        let d = dk.samples();
                        let rhs: Vec<f64> = (0..=tau).map(|u| (u..n).map(|t| d[t] * s[t - u]).sum()).collect();
                        factor.solve(&rhs)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let before = self.objective();
                let old = std::mem::replace(&mut self.g, g);
                if !(self.objective() <= before) {
                    self.g = old;
                }
                Ok(1)
            }
            InnerSolver::Cgls { tol, max_iters } => {
                let op = LsbdResponseOp::new(&self.s, tau, n);
                let mut total = 0;
                for (k, dk) in self.data.channels().iter().enumerate() {
                    let sol = altmin::solve_linear_ls_from(
                        |x| op.apply(x),
                        |y| op.adjoint(y),
                        self.g[k].clone(),
                        dk.samples(),
                        tol,
                        max_iters,
                    )?;
                    total += sol.iterations;
                    self.g[k] = sol.x;
                }
                Ok(total)
            }
        }
    }

    fn scale(&self) -> f64 {
        self.scale
    }

    fn name(&self) -> &str {
        "lsbd"
    }

    fn extrapolate(&mut self) -> Result<bool> {
        let Some((ps, pg)) = self.prev.replace((self.s.clone(), self.g.clone())) else {
            return Ok(false);
        };
        let n = self.t_len();
        let ds: Vec<f64> = self.s.iter().zip(&ps).map(|(a, b)| a - b).collect();
        let dg: Vec<Vec<f64>> = self
            .g
            .iter()
            .zip(&pg)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        // residual r(x) = d - p0 - x p1 - x^2 p2 along the line
        let mut c = [0.0; 5];
        for ((dk, gk), dgk) in self.data.channels().iter().zip(&self.g).zip(&dg) {
            let p0 = truncated_conv(&self.s, gk, n);
            let p1a = truncated_conv(&ds, gk, n);
            let p1b = truncated_conv(&self.s, dgk, n);
            let p2 = truncated_conv(&ds, dgk, n);
            for t in 0..n {
                let a = dk.samples()[t] - p0[t];
                let b = p1a[t] + p1b[t];
                let q = p2[t];
                c[0] += a * a;
                c[1] -= 2.0 * a * b;
                c[2] += b * b - 2.0 * a * q;
                c[3] += 2.0 * b * q;
                c[4] += q * q;
            }
        }
        let Some(x) = altmin::quartic_argmin(c) else {
            return Ok(false);
        };
        let before = self.objective();
        let (s_old, g_old) = (self.s.clone(), self.g.clone());
        self.s.iter_mut().zip(&ds).for_each(|(v, d)| *v += x * d);
        for (gk, dgk) in self.g.iter_mut().zip(&dg) {
            gk.iter_mut().zip(dgk).for_each(|(v, d)| *v += x * d);
        }
        self.normalize_source();
        if self.objective() < before {
            self.prev = Some((s_old, g_old));
            Ok(true)
        } else {
            self.s = s_old;
            self.g = g_old;
            Ok(false)
        }
    }
}

fn validate(d: &ChannelSet, tau: usize) -> Result<()> {
    if d.total_energy() == 0.0 {
        return Err(FbdError::ZeroEnergy("lsbd channel outputs"));
    }
    if d.span() <= tau + 1 {
        return Err(FbdError::InvalidArgument(format!(
            "outputs ({} samples) must be longer than responses ({} samples)",
            d.span(),
            tau + 1
        )));
    }
    if d.span() - 1 < 5 * tau {
        log::warn!(
            "T = {} is less than 5 tau = {}; recovery is unlikely",
            d.span() - 1,
            5 * tau
        );
    }
    Ok(())
}

/// LSBD from a seeded random start.
pub fn lsbd(d: &ChannelSet, tau: usize, config: &AltMinConfig, init_seed: u64) -> Result<FbdResult> {
    validate(d, tau)?;
    let mut rng = ChaCha8Rng::seed_from_u64(init_seed);
    let s: Vec<f64> = (0..d.span()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let g: Vec<Vec<f64>> = (0..d.nr())
        .map(|_| (0..=tau).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    lsbd_from(d, tau, s, g, config, init_seed)
}

/// LSBD warm-started at `(s, g)`.
pub fn lsbd_from(
    d: &ChannelSet,
    tau: usize,
    s: Vec<f64>,
    g: Vec<Vec<f64>>,
    config: &AltMinConfig,
    seed: u64,
) -> Result<FbdResult> {
    validate(d, tau)?;
    if s.len() != d.span() || g.len() != d.nr() || g.iter().any(|gk| gk.len() != tau + 1) {
        return Err(FbdError::Dimension("LSBD initial estimate has wrong shape".into()));
    }
    let start = Instant::now();
    let mut problem = LsbdProblem::new(d, tau, s, g, config.inner_solver);
    problem.normalize_source();
    let leg = altmin::alternate(&mut problem, config)?;
    let mut report = SolveReport::new("lsbd", seed);
    report.final_misfit = problem.objective();
    report.legs.push(leg);
    report.wall_time_secs = start.elapsed().as_secs_f64();
    assemble_result(problem.s, problem.g, tau, vec![report])
}

/// Least-squares source for fixed responses, normalised to unit energy.
/// Returns the source and the responses rescaled to compensate.
pub fn deconvolve_source(d: &ChannelSet, g: &ChannelSet) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let tau = g.span() - 1;
    let gv: Vec<Vec<f64>> = g.channels().iter().map(|c| c.samples().to_vec()).collect();
    let mut problem = LsbdProblem::new(d, tau, vec![0.0; d.span()], gv, InnerSolver::Direct);
    problem.update_first()?;
    Ok((problem.s, problem.g))
}

pub(crate) fn assemble_result(
    s: Vec<f64>,
    g: Vec<Vec<f64>>,
    tau: usize,
    reports: Vec<SolveReport>,
) -> Result<FbdResult> {
    let t = s.len() - 1;
    let source = Sequence::new(0, s)?;
    let sa_full = seqcore::xcorr(&source, &source, t)?;
    let source_autocorr = SourceAutocorr::new(sa_full.samples()[t..].to_vec())?;
    let responses = ChannelSet::from_rows(g)?;
    let interferograms = build_interferograms(&responses, tau)?;
    Ok(FbdResult {
        responses,
        source,
        source_autocorr,
        interferograms,
        reports,
    })
}
