//! Interferometric blind deconvolution with and without the zero-lag
//! focusing penalty.
//!
//! Fits `d_kl ≈ s_a * g_kl` on lags `{-T..T}` over the symmetric source
//! auto-correlation `s_a` (with `s_a(0) = 1`) and the interferometric
//! responses `g_kl` on `{-tau..tau}`. The focusing penalty
//! `alpha * sum_k sum_t t^2 g_kk(t)^2` acts on the auto-correlations only.
//! `alpha = inf` is solved as the hard constraint `g_kk(t) = 0` for `t != 0`.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::operators::{IbdResponseOp, IbdSourceOp};
use super::schedule::{HomotopySchedule, Weight};
use crate::altmin::{self, AltMinConfig, BlockProblem, InnerSolver, LinearOperator};
use crate::error::{FbdError, Result};
use crate::linalg::{BandedSym, LsFactor};
use crate::model::{pairs, InterferogramSet, SolveReport, SourceAutocorr};
use crate::seqcore::Sequence;

/// Alternating state for `W = V + alpha * focusing`.
pub struct InterferometricProblem<'a> {
    data: &'a InterferogramSet,
    tau: usize,
    /// Two-sided `s_a` on `{-T..T}`, index `x + T`.
    sa: Vec<f64>,
    /// `g_kl` on `{-tau..tau}`, index `u + tau`, in pair order.
    g: Vec<Vec<f64>>,
    diagonal: Vec<bool>,
    alpha: Weight,
    inner: InnerSolver,
    psd_projection: bool,
    scale: f64,
    prev: Option<(Vec<f64>, Vec<Vec<f64>>)>,
}

impl<'a> InterferometricProblem<'a> {
    pub fn new(
        data: &'a InterferogramSet,
        tau: usize,
        sa: &SourceAutocorr,
        g: Vec<Vec<f64>>,
        inner: InnerSolver,
    ) -> Result<Self> {
        let t = data.maxlag();
        if sa.maxlag() != t {
            return Err(FbdError::Dimension(format!(
                "source auto-correlation maxlag {} differs from data maxlag {t}",
                sa.maxlag()
            )));
        }
        if g.len() != data.entries().len() || g.iter().any(|e| e.len() != 2 * tau + 1) {
            return Err(FbdError::Dimension("interferometric responses have wrong shape".into()));
        }
        let diagonal = pairs(data.nr()).map(|(i, j)| i == j).collect();
        let scale = data
            .entries()
            .iter()
            .map(|e| e.samples().iter().map(|v| v * v).sum::<f64>())
            .sum();
        let m = t as isize;
        Ok(Self {
            data,
            tau,
            sa: (-m..=m).map(|x| sa.at(x)).collect(),
            g,
            diagonal,
            alpha: Weight::Finite(0.0),
            inner,
            psd_projection: false,
            scale,
            prev: None,
        })
    }

    pub fn set_alpha(&mut self, alpha: Weight) {
        self.alpha = alpha;
        self.prev = None;
        if alpha == Weight::Infinite {
            self.enforce_white_diagonal();
        }
    }

    pub fn set_psd_projection(&mut self, on: bool) {
        self.psd_projection = on;
    }

    fn tmax(&self) -> usize {
        self.data.maxlag()
    }

    fn enforce_white_diagonal(&mut self) {
        let tau = self.tau;
        for (gkl, &diag) in self.g.iter_mut().zip(&self.diagonal) {
            if diag {
                for (u, v) in gkl.iter_mut().enumerate() {
                    if u != tau {
                        *v = 0.0;
                    }
                }
            }
        }
    }

    pub fn source_autocorr(&self) -> SourceAutocorr {
        let t = self.tmax();
        SourceAutocorr::new(self.sa[t..].to_vec()).expect("finite s_a")
    }

    pub fn responses(&self) -> Result<InterferogramSet> {
        let m = self.tau as isize;
        let entries = self
            .g
            .iter()
            .map(|e| Sequence::new(-m, e.clone()))
            .collect::<Result<Vec<_>>>()?;
        InterferogramSet::new(self.data.nr(), self.tau, entries)
    }

    /// `V`, the data misfit without the focusing term.
    pub fn misfit(&self) -> f64 {
        let per_pair: Vec<f64> = self
            .g
            .par_iter()
            .zip(self.data.entries().par_iter())
            .map(|(gkl, dkl)| pair_misfit(&self.sa, gkl, dkl.samples(), self.tau))
            .collect();
        per_pair.iter().sum()
    }

    pub fn focusing_penalty(&self) -> f64 {
        let tau = self.tau as isize;
        self.g
            .iter()
            .zip(&self.diagonal)
            .filter(|(_, &d)| d)
            .map(|(gkk, _)| {
                gkk.iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let t = (i as isize - tau) as f64;
                        t * t * v * v
                    })
                    .sum::<f64>()
            })
            .sum()
    }

    /// Columns `s_a(t - u)` for `t` in `[-T, T]`, `u` in `[-tau, tau]`.
    fn response_operator(&self) -> DMatrix<f64> {
        let t = self.tmax();
        let tau = self.tau;
        DMatrix::from_fn(2 * t + 1, 2 * tau + 1, |i, j| {
            let k = i + tau;
            if k < j || k - j > 2 * t {
                0.0
            } else {
                self.sa[k - j]
            }
        })
    }

    /// Folded normal equations for `s_a(1..=T)` given `s_a(0) = 1`.
    fn source_normal_equations(&self) -> (BandedSym, Vec<f64>) {
        let tau = self.tau as isize;
        let t = self.tmax() as isize;
        let w = (2 * tau + 1) as usize;
        // Q(u, v) = sum_pairs g(u) g(v)
        let mut q = vec![0.0; w * w];
        for gkl in &self.g {
            for (i, &gu) in gkl.iter().enumerate() {
                if gu == 0.0 {
                    continue;
                }
                for (j, &gv) in gkl.iter().enumerate() {
                    q[i * w + j] += gu * gv;
                }
            }
        }
        let qat = |u: isize, v: isize| q[((u + tau) as usize) * w + (v + tau) as usize];
        // M(x, y) for y >= x, lag = y - x in 0..=2 tau
        let full = |x: isize, y: isize| -> f64 {
            let lag = y - x;
            // u in [-tau, tau], v = u - lag in [-tau, tau], t = x + u in [-T, T]
            let lo = (-tau).max(-tau + lag).max(-t - x);
            let hi = tau.min(tau + lag).min(t - x);
            (lo..=hi).map(|u| qat(u, u - lag)).sum()
        };
        let n = t as usize; // unknowns s_a(1..=T)
        let bw = (2 * tau) as usize;
        let mut folded = BandedSym::zeros(n + 1, bw);
        for m in 0..=t {
            for nn in m..=(m + 2 * tau).min(t) {
                let xs: &[isize] = if m == 0 { &[0] } else { &[m, -m] };
                let ys: &[isize] = if nn == 0 { &[0] } else { &[nn, -nn] };
                let mut val = 0.0;
                for &x in xs {
                    for &y in ys {
                        if (y - x).abs() <= 2 * tau {
                            val += if y >= x { full(x, y) } else { full(y, x) };
                        }
                    }
                }
                folded.add(nn as usize, m as usize, val);
            }
        }
        // c(x) = sum_pairs sum_t d(t) g(t - x)
        let c: Vec<f64> = (-t..=t)
            .into_par_iter()
            .map(|x| {
                let lo = (-tau).max(-t - x);
                let hi = tau.min(t - x);
                self.g
                    .iter()
                    .zip(self.data.entries())
                    .map(|(gkl, dkl)| {
                        let d = dkl.samples();
                        (lo..=hi)
                            .map(|u| gkl[(u + tau) as usize] * d[(x + u + t) as usize])
                            .sum::<f64>()
                    })
                    .sum()
            })
            .collect();
        let b_full: Vec<f64> = (0..=t)
            .map(|m| {
                if m == 0 {
                    c[t as usize]
                } else {
                    c[(m + t) as usize] + c[(t - m) as usize]
                }
            })
            .collect();
        // drop the pinned zero lag
        let mut reduced = BandedSym::zeros(n, bw);
        for i in 1..=n {
            for j in i.saturating_sub(bw).max(1)..=i {
                reduced.add(i - 1, j - 1, folded.get(i, j));
            }
        }
        let rhs = (1..=n).map(|i| b_full[i] - folded.get(i, 0)).collect();
        (reduced, rhs)
    }

    fn project_psd(&mut self) -> Result<()> {
        let t = self.tmax();
        let one = &self.sa[t..];
        let n = t + 1;
        let toep = DMatrix::from_fn(n, n, |i, j| one[i.abs_diff(j)]);
        let eig = toep.symmetric_eigen();
        if eig.eigenvalues.iter().all(|&v| v >= 0.0) {
            return Ok(());
        }
        let clipped = eig.eigenvalues.map(|v| v.max(0.0));
        let proj = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
        // nearest Toeplitz: average each diagonal
        let mut lag = vec![0.0; n];
        for (l, slot) in lag.iter_mut().enumerate() {
            let s: f64 = (0..n - l).map(|i| proj[(i + l, i)]).sum();
            *slot = s / (n - l) as f64;
        }
        let pivot = lag[0];
        if !(pivot > 0.0) {
            return Err(FbdError::Singular("PSD projection removed the zero lag".into()));
        }
        for (x, v) in self.sa.iter_mut().enumerate() {
            *v = lag[x.abs_diff(t)] / pivot;
        }
        for gkl in &mut self.g {
            gkl.iter_mut().for_each(|v| *v *= pivot);
        }
        Ok(())
    }
}

fn pair_misfit(sa: &[f64], g: &[f64], d: &[f64], tau: usize) -> f64 {
    let t = (sa.len() - 1) / 2;
    let pred = conv_window(sa, g, t, tau);
    d.iter().zip(&pred).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `(s_a * g)(t)` for `t` in `[-T, T]`; `s_a` on `[-T, T]`, `g` on `[-tau, tau]`.
pub(crate) fn conv_window(sa: &[f64], g: &[f64], t: usize, tau: usize) -> Vec<f64> {
    let n = 2 * t + 1;
    let mut out = vec![0.0; n];
    for (iu, &gu) in g.iter().enumerate() {
        if gu == 0.0 {
            continue;
        }
        let u = iu as isize - tau as isize;
        // out[t_idx] += gu * sa[t_idx - u]
        let (start_out, start_sa) = if u >= 0 { (u as usize, 0) } else { (0, (-u) as usize) };
        let len = n - u.unsigned_abs();
        for (o, s) in out[start_out..start_out + len]
            .iter_mut()
            .zip(&sa[start_sa..start_sa + len])
        {
            *o += gu * s;
        }
    }
    out
}

impl BlockProblem for InterferometricProblem<'_> {
    fn objective(&self) -> f64 {
        match self.alpha {
            Weight::Infinite => self.misfit(),
            Weight::Finite(a) if a == 0.0 => self.misfit(),
            Weight::Finite(a) => self.misfit() + a * self.focusing_penalty(),
        }
    }

    fn update_first(&mut self) -> Result<usize> {
        let t = self.tmax();
        let iters = match self.inner {
            InnerSolver::Direct => {
                // solve for the correction so directions the factorisation
                // drops keep their current values
                let (m, rhs) = self.source_normal_equations();
                let current = self.sa[t + 1..].to_vec();
                let mp = m.mul_vec(&current);
                let r: Vec<f64> = rhs.iter().zip(&mp).map(|(a, b)| a - b).collect();
                let step = m.solve(&r)?;
                let p: Vec<f64> = current.iter().zip(&step).map(|(a, b)| a + b).collect();
                for (k, v) in p.iter().enumerate() {
                    self.sa[t + k + 1] = *v;
                    self.sa[t - k - 1] = *v;
                }
                1
            }
            InnerSolver::Cgls { tol, max_iters } => {
                let op = IbdSourceOp::new(&self.g, t, self.tau);
                let offset = op.pinned_response();
                let rhs: Vec<f64> = self
                    .data
                    .entries()
                    .iter()
                    .flat_map(|e| e.samples().to_vec())
                    .zip(&offset)
                    .map(|(d, o)| d - o)
                    .collect();
                let sol = altmin::solve_linear_ls_from(
                    |x| op.apply(x),
                    |y| op.adjoint(y),
                    self.sa[t + 1..].to_vec(),
                    &rhs,
                    tol,
                    max_iters,
                )?;
                for (k, v) in sol.x.iter().enumerate() {
                    self.sa[t + k + 1] = *v;
                    self.sa[t - k - 1] = *v;
                }
                sol.iterations
            }
        };
        if self.psd_projection {
            self.project_psd()?;
        }
        Ok(iters)
    }

    fn update_second(&mut self) -> Result<usize> {
        let tau = self.tau;
        let n = 2 * tau + 1;
        match self.inner {
            InnerSolver::Direct => {
                let op = self.response_operator();
                let rows = op.nrows();
                let plain = LsFactor::new(op.clone())?;
                let focused = match self.alpha {
                    Weight::Finite(a) if a > 0.0 => {
                        let mut m = op.clone().resize_vertically(rows + n, 0.0);
                        for i in 0..n {
                            m[(rows + i, i)] = a.sqrt() * (i as f64 - tau as f64).abs();
                        }
                        Some(LsFactor::new(m)?)
                    }
                    _ => None,
                };
                let centre: Vec<f64> = op.column(tau).iter().copied().collect();
                let cc: f64 = centre.iter().map(|v| v * v).sum();
                let alpha = self.alpha;
                let g = self
                    .data
                    .entries()
                    .par_iter()
                    .zip(self.diagonal.par_iter())
                    .zip(self.g.par_iter())
                    .map(|((dkl, &diag), current)| {
                        let d = dkl.samples();
                        if diag && alpha == Weight::Infinite {
                            let mut out = vec![0.0; n];
                            if cc > 0.0 {
                                out[tau] = centre.iter().zip(d).map(|(a, b)| a * b).sum::<f64>() / cc;
                            }
                            return out;
                        }
                        // residual of the current estimate; solve for the correction
                        let pred = &op * DVector::from_column_slice(current);
                        let mut r: Vec<f64> = d.iter().zip(pred.iter()).map(|(a, b)| a - b).collect();
                        let factor = match (&focused, diag) {
                            (Some(f), true) => {
                                let a = alpha.value();
                                r.extend(
                                    current
                                        .iter()
                                        .enumerate()
                                        .map(|(i, v)| -a.sqrt() * (i as f64 - tau as f64).abs() * v),
                                );
                                f
                            }
                            _ => &plain,
                        };
                        let step = factor.solve(&r);
                        current.iter().zip(&step).map(|(a, b)| a + b).collect()
                    })
                    .collect::<Vec<_>>();
                self.g = g;
                Ok(1)
            }
            InnerSolver::Cgls { tol, max_iters } => {
                let t = self.tmax();
                let op = IbdResponseOp::new(&self.sa, t, tau);
                let mut total = 0;
                for idx in 0..self.g.len() {
                    let d = self.data.entries()[idx].samples();
                    let diag = self.diagonal[idx];
                    let sol = match (diag, self.alpha) {
                        (true, Weight::Infinite) => {
                            let centre = op.centre_column();
                            let cc: f64 = centre.iter().map(|v| v * v).sum();
                            let mut out = vec![0.0; n];
                            if cc > 0.0 {
                                out[tau] = centre.iter().zip(d).map(|(a, b)| a * b).sum::<f64>() / cc;
                            }
                            altmin::LsSolution {
                                x: out,
                                iterations: 1,
                                relative_normal_residual: 0.0,
                            }
                        }
                        (true, Weight::Finite(a)) if a > 0.0 => {
                            let reg = op.with_focusing(a);
                            let mut rhs = d.to_vec();
                            rhs.extend(std::iter::repeat_n(0.0, n));
                            altmin::solve_linear_ls_from(
                                |x| reg.apply(x),
                                |y| reg.adjoint(y),
                                self.g[idx].clone(),
                                &rhs,
                                tol,
                                max_iters,
                            )?
                        }
                        _ => altmin::solve_linear_ls_from(
                            |x| op.apply(x),
                            |y| op.adjoint(y),
                            self.g[idx].clone(),
                            d,
                            tol,
                            max_iters,
                        )?,
                    };
                    total += sol.iterations;
                    self.g[idx] = sol.x;
                }
                Ok(total)
            }
        }
    }

    fn scale(&self) -> f64 {
        self.scale
    }

    fn name(&self) -> &str {
        "interferometric"
    }

    fn monotone(&self) -> bool {
        !self.psd_projection
    }

    fn extrapolate(&mut self) -> Result<bool> {
        if self.psd_projection {
            return Ok(false);
        }
        let Some((psa, pg)) = self.prev.replace((self.sa.clone(), self.g.clone())) else {
            return Ok(false);
        };
        let t = self.tmax();
        let tau = self.tau;
        let dsa: Vec<f64> = self.sa.iter().zip(&psa).map(|(a, b)| a - b).collect();
        let dg: Vec<Vec<f64>> = self
            .g
            .iter()
            .zip(&pg)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        let per_pair: Vec<[f64; 5]> = (0..self.g.len())
            .into_par_iter()
            .map(|idx| {
                let (g, d) = (&self.g[idx], self.data.entries()[idx].samples());
                let p0 = conv_window(&self.sa, g, t, tau);
                let p1a = conv_window(&dsa, g, t, tau);
                let p1b = conv_window(&self.sa, &dg[idx], t, tau);
                let p2 = conv_window(&dsa, &dg[idx], t, tau);
                let mut c = [0.0; 5];
                for i in 0..d.len() {
                    let a = d[i] - p0[i];
                    let b = p1a[i] + p1b[i];
                    let q = p2[i];
                    c[0] += a * a;
                    c[1] -= 2.0 * a * b;
                    c[2] += b * b - 2.0 * a * q;
                    c[3] += 2.0 * b * q;
                    c[4] += q * q;
                }
                c
            })
            .collect();
        let mut c = [0.0; 5];
        for pc in &per_pair {
            for (a, b) in c.iter_mut().zip(pc) {
                *a += b;
            }
        }
        if let Weight::Finite(a) = self.alpha {
            for ((g, dgk), _) in self.g.iter().zip(&dg).zip(&self.diagonal).filter(|(_, &d)| d) {
                for (i, (v, dv)) in g.iter().zip(dgk).enumerate() {
                    let w = a * (i as f64 - tau as f64).powi(2);
                    c[0] += w * v * v;
                    c[1] += 2.0 * w * v * dv;
                    c[2] += w * dv * dv;
                }
            }
        }
        let Some(x) = altmin::quartic_argmin(c) else {
            return Ok(false);
        };
        let before = self.objective();
        let (sa_old, g_old) = (self.sa.clone(), self.g.clone());
        self.sa.iter_mut().zip(&dsa).for_each(|(v, d)| *v += x * d);
        for (gk, dgk) in self.g.iter_mut().zip(&dg) {
            gk.iter_mut().zip(dgk).for_each(|(v, d)| *v += x * d);
        }
        if self.objective() < before {
            self.prev = Some((sa_old, g_old));
            Ok(true)
        } else {
            self.sa = sa_old;
            self.g = g_old;
            Ok(false)
        }
    }
}

fn check_normalized(dij: &InterferogramSet) -> Result<()> {
    let pivot = dij.entry(0, 0).at(0);
    if (pivot - 1.0).abs() > 1e-12 {
        return Err(FbdError::InvalidArgument(format!(
            "interferograms must be max-normalised (d_11(0) = {pivot})"
        )));
    }
    Ok(())
}

/// Initial responses: `g_ii` zero off lag 0, everything else random.
pub(crate) fn initial_responses(nr: usize, tau: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pairs(nr)
        .map(|(i, j)| {
            (0..=2 * tau)
                .map(|u| {
                    let r: f64 = StandardNormal.sample(&mut rng);
                    if i == j && u != tau {
                        0.0
                    } else {
                        r
                    }
                })
                .collect()
        })
        .collect()
}

fn run(
    stage: &str,
    dij: &InterferogramSet,
    tau: usize,
    alphas: &HomotopySchedule,
    config: &AltMinConfig,
    init_seed: u64,
) -> Result<(SourceAutocorr, InterferogramSet, SolveReport)> {
    config.validate()?;
    check_normalized(dij)?;
    if tau > dij.maxlag() {
        return Err(FbdError::InvalidArgument(format!(
            "tau {tau} exceeds interferogram maxlag {}",
            dij.maxlag()
        )));
    }
    let start = Instant::now();
    let sa = SourceAutocorr::delta(dij.maxlag());
    let g = initial_responses(dij.nr(), tau, init_seed);
    let mut problem = InterferometricProblem::new(dij, tau, &sa, g, config.inner_solver)?;
    problem.set_psd_projection(config.psd_projection);
    let mut report = SolveReport::new(stage, init_seed);
    for &alpha in alphas.weights() {
        problem.set_alpha(alpha);
        let mut leg = altmin::alternate(&mut problem, config)?;
        leg.weight = Some(alpha);
        report.legs.push(leg);
    }
    report.final_misfit = problem.misfit();
    report.wall_time_secs = start.elapsed().as_secs_f64();
    let sa = problem.source_autocorr();
    sa.check_peak();
    Ok((sa, problem.responses()?, report))
}

/// Interferometric blind deconvolution (no focusing).
pub fn ibd(
    dij: &InterferogramSet,
    tau: usize,
    config: &AltMinConfig,
    init_seed: u64,
) -> Result<(SourceAutocorr, InterferogramSet, SolveReport)> {
    let schedule = HomotopySchedule::new(vec![Weight::Finite(0.0)])?;
    run("ibd", dij, tau, &schedule, config, init_seed)
}

/// Focused interferometric blind deconvolution over a decreasing `alpha` schedule.
pub fn fibd(
    dij: &InterferogramSet,
    tau: usize,
    alphas: &HomotopySchedule,
    config: &AltMinConfig,
    init_seed: u64,
) -> Result<(SourceAutocorr, InterferogramSet, SolveReport)> {
    run("fibd", dij, tau, alphas, config, init_seed)
}

/// `V` for given estimates, recomputed from scratch.
pub fn interferometric_misfit(dij: &InterferogramSet, sa: &SourceAutocorr, gij: &InterferogramSet) -> Result<f64> {
    if sa.maxlag() != dij.maxlag() || gij.nr() != dij.nr() {
        return Err(FbdError::Dimension("estimate does not match data".into()));
    }
    let t = dij.maxlag();
    let m = t as isize;
    let two_sided: Vec<f64> = (-m..=m).map(|x| sa.at(x)).collect();
    Ok(gij
        .entries()
        .iter()
        .zip(dij.entries())
        .map(|(g, d)| pair_misfit(&two_sided, g.samples(), d.samples(), gij.maxlag()))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_interferograms, ChannelSet};
    use crate::seqcore::max_normalize_interferograms;

    fn random_rows(nr: usize, len: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..nr)
            .map(|_| (0..len).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect()
    }

    fn small_problem(data: &InterferogramSet) -> InterferometricProblem<'_> {
        small_problem_tau(data, 3)
    }

    fn small_problem_tau(data: &InterferogramSet, tau: usize) -> InterferometricProblem<'_> {
        let mut sa = vec![1.0];
        sa.extend(random_rows(1, data.maxlag(), 9).remove(0).into_iter().map(|v| 0.3 * v));
        let sa = SourceAutocorr::new(sa).unwrap();
        let g = random_rows(data.entries().len(), 2 * tau + 1, 4);
        InterferometricProblem::new(data, tau, &sa, g, InnerSolver::Direct).unwrap()
    }

    #[test]
    fn folded_source_equations_match_dense_operator() {
        for (t, tau) in [(12, 3), (40, 9), (30, 12)] {
            check_source_equations(t, tau);
        }
    }

    fn check_source_equations(t: usize, tau: usize) {
        let d = ChannelSet::from_rows(random_rows(3, t + 1, 1)).unwrap();
        let dij = max_normalize_interferograms(&build_interferograms(&d, t).unwrap()).unwrap();
        let p = small_problem_tau(&dij, tau);
        let (m, rhs) = p.source_normal_equations();
        let op = IbdSourceOp::new(&p.g, t, p.tau);
        let offset = op.pinned_response();
        let y: Vec<f64> = dij
            .entries()
            .iter()
            .flat_map(|e| e.samples().to_vec())
            .zip(&offset)
            .map(|(a, b)| a - b)
            .collect();
        let want_rhs = op.adjoint(&y);
        for (a, b) in rhs.iter().zip(&want_rhs) {
            assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()), "{a} vs {b}");
        }
        for j in 0..t {
            let mut e = vec![0.0; t];
            e[j] = 1.0;
            let col = op.adjoint(&op.apply(&e));
            for i in 0..t {
                assert!((m.get(i, j) - col[i]).abs() < 1e-10 * (1.0 + col[i].abs()), "({i},{j})");
            }
        }
    }

    #[test]
    fn block_updates_never_raise_the_objective() {
        let d = ChannelSet::from_rows(random_rows(3, 13, 2)).unwrap();
        let dij = max_normalize_interferograms(&build_interferograms(&d, 12).unwrap()).unwrap();
        for alpha in [Weight::Infinite, Weight::Finite(0.5), Weight::Finite(0.0)] {
            let mut p = small_problem(&dij);
            p.set_alpha(alpha);
            let mut w = p.objective();
            for _ in 0..20 {
                p.update_first().unwrap();
                assert!(p.objective() <= w + 1e-12 * w.max(1.0));
                w = p.objective();
                p.update_second().unwrap();
                assert!(p.objective() <= w + 1e-12 * w.max(1.0));
                w = p.objective();
            }
        }
    }
}
