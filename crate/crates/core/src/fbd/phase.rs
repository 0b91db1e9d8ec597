//! Phase retrieval: recover responses `g_i` on `{0..tau}` from their
//! cross-correlations `g_ij` on `{-tau..tau}`.
//!
//! The misfit is quartic in the unknowns, so each stage is solved with
//! Levenberg-Marquardt. The Gauss-Newton matrix has closed-form blocks:
//! auto-correlation Toeplitz blocks on the diagonal and convolution Hankel
//! blocks between the two channels of a pair.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::schedule::{HomotopySchedule, Weight};
use crate::altmin::{AltMinConfig, LinearOperator};
use crate::error::{FbdError, Result};
use crate::linalg::SymFactor;
use crate::model::{pairs, ChannelSet, InterferogramSet, LegReport, SolveReport};
use crate::seqcore::convolve_direct_raw;

/// One fitted term: `target ≈ g_k ⊗ g_l` on `{-tau..tau}`.
#[derive(Debug, Clone)]
struct Term {
    k: usize,
    l: usize,
    target: Vec<f64>,
}

/// Phase-retrieval objective over a list of pair terms, with an optional
/// front-loading penalty `beta * sum_t t^2 g_f(t)^2`.
pub struct PhaseProblem {
    nr: usize,
    tau: usize,
    terms: Vec<Term>,
    front: Option<(usize, Weight)>,
    g: Vec<Vec<f64>>,
}

/// `(a ⊗ b)(t)` for `t = -tau..=tau`, both on `{0..tau}`.
fn corr(a: &[f64], b: &[f64]) -> Vec<f64> {
    let tau = a.len() - 1;
    let mut out = vec![0.0; 2 * tau + 1];
    for (s, &av) in a.iter().enumerate() {
        if av == 0.0 {
            continue;
        }
        // t = x - s for b index x
        for (x, &bv) in b.iter().enumerate() {
            out[x + tau - s] += av * bv;
        }
    }
    out
}

impl PhaseProblem {
    /// All pairs `k <= l`: the plain LSPR functional `X`.
    pub fn lspr(gij: &InterferogramSet, g: Vec<Vec<f64>>) -> Self {
        let terms = pairs(gij.nr())
            .map(|(k, l)| Term {
                k,
                l,
                target: gij.entry(k, l).samples().to_vec(),
            })
            .collect();
        Self {
            nr: gij.nr(),
            tau: gij.maxlag(),
            terms,
            front: None,
            g,
        }
    }

    /// Pairs `(k, f)` for every `k`, plus the penalty on `g_f`: the FPR
    /// functional `Y`.
    pub fn focused(gij: &InterferogramSet, front: usize, beta: Weight, g: Vec<Vec<f64>>) -> Self {
        let terms = (0..gij.nr())
            .map(|k| Term {
                k,
                l: front,
                target: gij.get(k, front).samples().to_vec(),
            })
            .collect();
        let mut p = Self {
            nr: gij.nr(),
            tau: gij.maxlag(),
            terms,
            front: Some((front, beta)),
            g,
        };
        p.apply_mask();
        p
    }

    pub fn responses(&self) -> &[Vec<f64>] {
        &self.g
    }

    pub fn into_responses(self) -> Vec<Vec<f64>> {
        self.g
    }

    fn len(&self) -> usize {
        self.tau + 1
    }

    fn fixed(&self, ch: usize, s: usize) -> bool {
        matches!(self.front, Some((f, Weight::Infinite)) if f == ch && s != 0)
    }

    fn apply_mask(&mut self) {
        if let Some((f, Weight::Infinite)) = self.front {
            for v in self.g[f].iter_mut().skip(1) {
                *v = 0.0;
            }
        }
    }

    fn penalty_weight(&self) -> Option<(usize, f64)> {
        match self.front {
            Some((f, Weight::Finite(b))) if b > 0.0 => Some((f, b)),
            _ => None,
        }
    }

    fn residuals(&self, g: &[Vec<f64>]) -> Vec<Vec<f64>> {
        self.terms
            .iter()
            .map(|term| {
                let pred = corr(&g[term.k], &g[term.l]);
                term.target.iter().zip(&pred).map(|(a, b)| a - b).collect()
            })
            .collect()
    }

    /// Data misfit of the fitted terms, without the penalty.
    pub fn misfit(&self) -> f64 {
        misfit_of(&self.residuals(&self.g))
    }

    fn objective_of(&self, g: &[Vec<f64>]) -> f64 {
        let mut val = misfit_of(&self.residuals(g));
        if let Some((f, b)) = self.penalty_weight() {
            val += b * g[f]
                .iter()
                .enumerate()
                .map(|(t, v)| (t * t) as f64 * v * v)
                .sum::<f64>();
        }
        val
    }

    pub fn objective(&self) -> f64 {
        self.objective_of(&self.g)
    }

    /// Gauss-Newton matrix `J^T J` and the descent vector `-grad / 2`.
    fn normal_system(&self) -> (DMatrix<f64>, Vec<f64>) {
        let l = self.len();
        let n = self.nr * l;
        let tau = self.tau;
        let g = &self.g;
        let mut h = DMatrix::zeros(n, n);
        let mut rhs = vec![0.0; n];
        let autos: Vec<Vec<f64>> = g.iter().map(|gk| corr(gk, gk)).collect();
        let res = self.residuals(g);

        for (term, r) in self.terms.iter().zip(&res) {
            let (k, m) = (term.k, term.l);
            if k == m {
                let gk = &g[k];
                let conv = convolve_direct_raw(gk, gk);
                for s in 0..l {
                    for s2 in 0..l {
                        let lag = s2 as isize - s as isize;
                        let auto = autos[k][(lag + tau as isize) as usize];
                        h[(k * l + s, k * l + s2)] += 2.0 * auto + 2.0 * conv[s + s2];
                    }
                    // sum_t [g(s + t) + g(s - t)] r(t)
                    let mut acc = 0.0;
                    for (ti, rv) in r.iter().enumerate() {
                        let t = ti as isize - tau as isize;
                        let a = s as isize + t;
                        let b = s as isize - t;
                        let mut jv = 0.0;
                        if (0..l as isize).contains(&a) {
                            jv += gk[a as usize];
                        }
                        if (0..l as isize).contains(&b) {
                            jv += gk[b as usize];
                        }
                        acc += jv * rv;
                    }
                    rhs[k * l + s] += acc;
                }
            } else {
                let (gk, gm) = (&g[k], &g[m]);
                let conv = convolve_direct_raw(gk, gm);
                for s in 0..l {
                    for s2 in 0..l {
                        let lag = s2 as isize - s as isize;
                        let idx = (lag + tau as isize) as usize;
                        h[(k * l + s, k * l + s2)] += autos[m][idx];
                        h[(m * l + s, m * l + s2)] += autos[k][idx];
                        let c = conv[s + s2];
                        h[(k * l + s, m * l + s2)] += c;
                        h[(m * l + s2, k * l + s)] += c;
                    }
                    // d pred(t) / d g_k(s) = g_m(s + t); d pred(t) / d g_m(s) = g_k(s - t)
                    let mut acc_k = 0.0;
                    let mut acc_m = 0.0;
                    for (ti, rv) in r.iter().enumerate() {
                        let t = ti as isize - tau as isize;
                        let a = s as isize + t;
                        if (0..l as isize).contains(&a) {
                            acc_k += gm[a as usize] * rv;
                        }
                        let b = s as isize - t;
                        if (0..l as isize).contains(&b) {
                            acc_m += gk[b as usize] * rv;
                        }
                    }
                    rhs[k * l + s] += acc_k;
                    rhs[m * l + s] += acc_m;
                }
            }
        }
        if let Some((f, b)) = self.penalty_weight() {
            for s in 0..l {
                let w = b * (s * s) as f64;
                h[(f * l + s, f * l + s)] += w;
                rhs[f * l + s] -= w * g[f][s];
            }
        }
        (h, rhs)
    }

    /// Levenberg-Marquardt until the accepted decrease falls to `epsilon`.
    pub fn solve(&mut self, epsilon: f64, max_iters: usize) -> Result<LegReport> {
        let l = self.len();
        let n = self.nr * l;
        let mut report = LegReport::default();
        let mut current = self.objective();
        let mut lambda: Option<f64> = None;
        report.objective_first.push(current);

        for _ in 0..max_iters {
            let (mut h, mut rhs) = self.normal_system();
            for ch in 0..self.nr {
                for s in 0..l {
                    if self.fixed(ch, s) {
                        let i = ch * l + s;
                        for j in 0..n {
                            h[(i, j)] = 0.0;
                            h[(j, i)] = 0.0;
                        }
                        h[(i, i)] = 1.0;
                        rhs[i] = 0.0;
                    }
                }
            }
            let diag: Vec<f64> = (0..n).map(|i| h[(i, i)]).collect();
            let dmax = diag.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
            let mut lam = lambda.unwrap_or(1e-3);
            let mut accepted = None;
            let mut trials = 0;
            while lam < 1e16 {
                trials += 1;
                let mut a = h.clone();
                for i in 0..n {
                    a[(i, i)] += lam * diag[i].max(1e-12 * dmax);
                }
                let step = SymFactor::new(a).solve(&rhs)?;
                let trial: Vec<Vec<f64>> = self
                    .g
                    .iter()
                    .enumerate()
                    .map(|(ch, gk)| gk.iter().enumerate().map(|(s, v)| v + step[ch * l + s]).collect())
                    .collect();
                let val = self.objective_of(&trial);
                if val.is_finite() && val < current {
                    accepted = Some((trial, val));
                    break;
                }
                lam *= 4.0;
            }
            report.inner_iterations += trials;
            report.outer_iterations += 1;
            let Some((trial, val)) = accepted else {
                // no descent direction left at machine precision
                report.delta.push(0.0);
                report.converged = true;
                break;
            };
            let delta = current - val;
            self.g = trial;
            current = val;
            lambda = Some((lam / 3.0).max(1e-12));
            report.objective_first.push(current);
            report.delta.push(delta);
            if delta <= epsilon {
                report.converged = true;
                break;
            }
        }
        if !current.is_finite() {
            return Err(FbdError::Divergence {
                stage: "phase retrieval".into(),
                before: report.objective_first[0],
                after: current,
            });
        }
        Ok(report)
    }
}

fn misfit_of(res: &[Vec<f64>]) -> f64 {
    res.iter().flatten().map(|v| v * v).sum()
}

/// Linearised phase-retrieval map `delta_g -> J delta_g` at a fixed point `g`,
/// over all pairs `k <= l`. Used for adjoint checks.
pub struct PhaseJacobianOp<'a> {
    g: &'a [Vec<f64>],
}

impl<'a> PhaseJacobianOp<'a> {
    pub fn new(g: &'a [Vec<f64>]) -> Self {
        Self { g }
    }

    fn dims(&self) -> (usize, usize) {
        (self.g.len(), self.g[0].len())
    }
}

impl LinearOperator for PhaseJacobianOp<'_> {
    fn n_in(&self) -> usize {
        let (nr, l) = self.dims();
        nr * l
    }
    fn n_out(&self) -> usize {
        let (nr, l) = self.dims();
        nr * (nr + 1) / 2 * (2 * l - 1)
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let (nr, l) = self.dims();
        let dx: Vec<&[f64]> = x.chunks(l).collect();
        pairs(nr)
            .flat_map(|(k, m)| {
                let a = corr(dx[k], &self.g[m]);
                let b = corr(&self.g[k], dx[m]);
                a.into_iter().zip(b).map(|(u, v)| u + v).collect::<Vec<_>>()
            })
            .collect()
    }
    fn adjoint(&self, y: &[f64]) -> Vec<f64> {
        let (nr, l) = self.dims();
        let tau = l - 1;
        let mut out = vec![0.0; nr * l];
        for ((k, m), r) in pairs(nr).zip(y.chunks(2 * l - 1)) {
            for s in 0..l {
                for (ti, rv) in r.iter().enumerate() {
                    let t = ti as isize - tau as isize;
                    let a = s as isize + t;
                    if (0..l as isize).contains(&a) {
                        out[k * l + s] += self.g[m][a as usize] * rv;
                    }
                    let b = s as isize - t;
                    if (0..l as isize).contains(&b) {
                        out[m * l + s] += self.g[k][b as usize] * rv;
                    }
                }
            }
        }
        out
    }
}

/// Random start with channel `k` scaled to the energy `g_kk(0)` implies.
fn random_start(gij: &InterferogramSet, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = gij.maxlag() + 1;
    (0..gij.nr())
        .map(|k| {
            let raw: Vec<f64> = (0..l).map(|_| StandardNormal.sample(&mut rng)).collect();
            let e: f64 = raw.iter().map(|v| v * v).sum();
            let target = gij.entry(k, k).at(0).abs();
            let c = if e > 0.0 && target > 0.0 {
                (target / e).sqrt()
            } else {
                1.0
            };
            raw.into_iter().map(|v| v * c).collect()
        })
        .collect()
}

fn to_channels(g: Vec<Vec<f64>>) -> Result<ChannelSet> {
    ChannelSet::from_rows(g)
}

/// Least-squares phase retrieval from a seeded random start.
pub fn lspr(gij: &InterferogramSet, config: &AltMinConfig, init_seed: u64) -> Result<(ChannelSet, SolveReport)> {
    config.validate()?;
    let start = Instant::now();
    let mut problem = PhaseProblem::lspr(gij, random_start(gij, init_seed));
    let leg = problem.solve(config.epsilon, config.max_outer_iters)?;
    let mut report = SolveReport::new("lspr", init_seed);
    report.final_misfit = problem.misfit();
    report.legs.push(leg);
    report.wall_time_secs = start.elapsed().as_secs_f64();
    Ok((to_channels(problem.into_responses())?, report))
}

/// LSPR refinement from a given estimate.
pub fn lspr_from(
    gij: &InterferogramSet,
    g: Vec<Vec<f64>>,
    config: &AltMinConfig,
) -> Result<(Vec<Vec<f64>>, LegReport)> {
    let mut problem = PhaseProblem::lspr(gij, g);
    let leg = problem.solve(config.epsilon, config.max_outer_iters)?;
    Ok((problem.into_responses(), leg))
}

/// Focused phase retrieval: the `beta` homotopy on pairs involving the
/// front channel, then a full LSPR refinement.
pub fn fpr(
    gij: &InterferogramSet,
    front_channel: usize,
    betas: &HomotopySchedule,
    config: &AltMinConfig,
    init_seed: u64,
) -> Result<(ChannelSet, SolveReport)> {
    config.validate()?;
    if front_channel >= gij.nr() {
        return Err(FbdError::InvalidArgument(format!(
            "front channel {front_channel} out of range for {} channels",
            gij.nr()
        )));
    }
    let start = Instant::now();
    let mut g = random_start(gij, init_seed);
    for v in g[front_channel].iter_mut().skip(1) {
        *v = 0.0;
    }
    let mut report = SolveReport::new("fpr", init_seed);
    for &beta in betas.weights() {
        let mut problem = PhaseProblem::focused(gij, front_channel, beta, g);
        let mut leg = problem.solve(config.epsilon, config.max_outer_iters)?;
        leg.weight = Some(beta);
        report.legs.push(leg);
        g = problem.into_responses();
    }
    let (g, leg) = lspr_from(gij, g, config)?;
    report.legs.push(leg);
    report.final_misfit = lspr_misfit(gij, &g);
    report.wall_time_secs = start.elapsed().as_secs_f64();
    Ok((to_channels(g)?, report))
}

/// `X` for the given responses.
pub fn lspr_misfit(gij: &InterferogramSet, g: &[Vec<f64>]) -> f64 {
    PhaseProblem::lspr(gij, g.to_vec()).misfit()
}

/// Heuristic front channel: largest share of energy in the first quarter
/// of the response window of `g_ii`'s one-sided part. Only a suggestion.
pub fn suggest_front_channel(responses: &ChannelSet) -> usize {
    let quarter = (responses.span() / 4).max(1);
    responses
        .channels()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let s = c.samples();
            let total: f64 = s.iter().map(|v| v * v).sum();
            let early: f64 = s[..quarter].iter().map(|v| v * v).sum();
            (i, if total > 0.0 { early / total } else { 0.0 })
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .unwrap_or(0)
}
