//! Alternating minimisation over two blocks of unknowns, plus a matrix-free
//! least-squares solver for the linear subproblems.
//!
//! The outer loop is the one used by every two-block stage: update the first
//! block, record `W1`; update the second block, record `W2`; stop once
//! `max(W1_prev - W1, W2_prev - W2) <= epsilon`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{FbdError, Result};
use crate::linalg::{dot, norm2};
use crate::model::LegReport;

/// How block subproblems are solved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InnerSolver {
    /// Assemble the normal equations and factorise them.
    Direct,
    /// Conjugate gradients on the normal equations.
    Cgls { tol: f64, max_iters: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AltMinConfig {
    /// Stop once the per-cycle objective decrease is at most this.
    pub epsilon: f64,
    pub max_outer_iters: usize,
    pub inner_solver: InnerSolver,
    pub seed: u64,
    /// Project `Toeplitz(s_a)` onto the PSD cone after each source update.
    pub psd_projection: bool,
    /// Before each cycle, step along the previous cycle's change to the
    /// exact minimiser of the objective on that line.
    pub line_search: bool,
}

impl Default for AltMinConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-8,
            max_outer_iters: 2000,
            inner_solver: InnerSolver::Direct,
            seed: 0,
            psd_projection: false,
            line_search: true,
        }
    }
}

impl AltMinConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(FbdError::InvalidArgument("epsilon must be positive".into()));
        }
        if self.max_outer_iters == 0 {
            return Err(FbdError::InvalidArgument("max_outer_iters must be >= 1".into()));
        }
        if let InnerSolver::Cgls { tol, max_iters } = self.inner_solver {
            if !(tol > 0.0) || max_iters == 0 {
                return Err(FbdError::InvalidArgument("invalid inner solver settings".into()));
            }
        }
        Ok(())
    }
}

/// A linear map given by its forward and adjoint actions.
pub trait LinearOperator {
    fn n_in(&self) -> usize;
    fn n_out(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    fn adjoint(&self, y: &[f64]) -> Vec<f64>;

    /// Relative mismatch of the randomised dot-product test.
    fn adjoint_mismatch(&self, seed: u64) -> f64 {
        adjoint_mismatch(|x| self.apply(x), |y| self.adjoint(y), self.n_in(), self.n_out(), seed)
    }
}

/// A two-block objective with exact (or near-exact) block minimisers.
///
/// Each update leaves the problem in a state satisfying its constraints.
pub trait BlockProblem {
    fn objective(&self) -> f64;
    /// Minimise over the first block with the second fixed. Returns the
    /// number of inner iterations spent.
    fn update_first(&mut self) -> Result<usize>;
    fn update_second(&mut self) -> Result<usize>;
    /// Absolute scale of the objective, used to tolerate round-off when
    /// checking monotonicity.
    fn scale(&self) -> f64;
    fn name(&self) -> &str;
    /// Whether block updates are exact minimisers, so the objective may not
    /// rise. Problems that project onto a constraint set afterwards return
    /// `false` and skip the divergence check.
    fn monotone(&self) -> bool {
        true
    }
    /// Steps along the change since the previous call, if that lowers the
    /// objective. Returns whether a step was taken.
    fn extrapolate(&mut self) -> Result<bool> {
        Ok(false)
    }
}

/// Runs the alternating loop to convergence or the iteration cap.
pub fn alternate<P: BlockProblem + ?Sized>(problem: &mut P, config: &AltMinConfig) -> Result<LegReport> {
    config.validate()?;
    let mut report = LegReport::default();
    let (mut w1, mut w2) = (f64::INFINITY, f64::INFINITY);
    let mut current = problem.objective();
    let slack = |prev: f64, scale: f64| 1e-6 * prev.abs() + 1e-13 * scale;

    for _ in 0..config.max_outer_iters {
        if config.line_search && problem.extrapolate()? {
            report.extrapolations += 1;
        }
        report.inner_iterations += problem.update_first()?;
        let w1p = w1;
        w1 = problem.objective();
        if problem.monotone() && w1 > current + slack(current, problem.scale()) {
            return Err(FbdError::Divergence {
                stage: problem.name().to_string(),
                before: current,
                after: w1,
            });
        }
        current = w1;

        report.inner_iterations += problem.update_second()?;
        let w2p = w2;
        w2 = problem.objective();
        if problem.monotone() && w2 > current + slack(current, problem.scale()) {
            return Err(FbdError::Divergence {
                stage: problem.name().to_string(),
                before: current,
                after: w2,
            });
        }
        current = w2;

        let delta = (w1p - w1).max(w2p - w2);
        report.objective_first.push(w1);
        report.objective_second.push(w2);
        report.delta.push(delta);
        report.outer_iterations += 1;
        if delta <= config.epsilon {
            report.converged = true;
            break;
        }
    }
    Ok(report)
}

/// Minimiser of the quartic `c[0] + c[1] x + ... + c[4] x^4` over the real
/// line, or `None` if it does not go below `c[0]`.
pub fn quartic_argmin(c: [f64; 5]) -> Option<f64> {
    let value = |x: f64| (((c[4] * x + c[3]) * x + c[2]) * x + c[1]) * x + c[0];
    let roots = cubic_roots(4.0 * c[4], 3.0 * c[3], 2.0 * c[2], c[1]);
    roots
        .into_iter()
        .filter(|x| x.is_finite())
        .map(|x| (x, value(x)))
        .filter(|(_, v)| *v < c[0])
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(x, _)| x)
}

/// Real roots of `a x^3 + b x^2 + c x + d`, polished by Newton steps.
fn cubic_roots(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs()).max(d.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    let mut roots = if a.abs() <= 1e-14 * scale {
        if b.abs() <= 1e-14 * scale {
            if c == 0.0 {
                Vec::new()
            } else {
                vec![-d / c]
            }
        } else {
            let disc = c * c - 4.0 * b * d;
            if disc < 0.0 {
                Vec::new()
            } else {
                let q = -0.5 * (c + c.signum() * disc.sqrt());
                let mut r = vec![q / b];
                if q != 0.0 {
                    r.push(d / q);
                }
                r
            }
        }
    } else {
        let (b, c, d) = (b / a, c / a, d / a);
        let q = (b * b - 3.0 * c) / 9.0;
        let r = (2.0 * b * b * b - 9.0 * b * c + 27.0 * d) / 54.0;
        if r * r < q * q * q {
            let theta = (r / (q * q * q).sqrt()).clamp(-1.0, 1.0).acos();
            let m = -2.0 * q.sqrt();
            let pi2 = 2.0 * std::f64::consts::PI;
            vec![
                m * (theta / 3.0).cos() - b / 3.0,
                m * ((theta + pi2) / 3.0).cos() - b / 3.0,
                m * ((theta - pi2) / 3.0).cos() - b / 3.0,
            ]
        } else {
            let big = -r.signum() * (r.abs() + (r * r - q * q * q).sqrt()).cbrt();
            let small = if big == 0.0 { 0.0 } else { q / big };
            vec![big + small - b / 3.0]
        }
    };
    for x in &mut roots {
        for _ in 0..3 {
            let f = ((a * *x + b) * *x + c) * *x + d;
            let df = (3.0 * a * *x + 2.0 * b) * *x + c;
            if df != 0.0 {
                *x -= f / df;
            }
        }
    }
    roots
}

/// Randomised dot-product test `<A x, y> = <x, A^T y>`; returns the
/// relative mismatch.
pub fn adjoint_mismatch<F, G>(forward: F, adjoint: G, n_in: usize, n_out: usize, seed: u64) -> f64
where
    F: Fn(&[f64]) -> Vec<f64>,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..n_in).map(|_| StandardNormal.sample(&mut rng)).collect();
    let y: Vec<f64> = (0..n_out).map(|_| StandardNormal.sample(&mut rng)).collect();
    let ax = forward(&x);
    let aty = adjoint(&y);
    let lhs = dot(&ax, &y);
    let rhs = dot(&x, &aty);
    let scale = norm2(&ax).sqrt() * norm2(&y).sqrt() + norm2(&x).sqrt() * norm2(&aty).sqrt();
    if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / scale
    }
}

/// Outcome of [`solve_linear_ls`].
#[derive(Debug, Clone)]
pub struct LsSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `||A^T (b - A x)|| / ||A^T b||` at exit.
    pub relative_normal_residual: f64,
}

/// Least-squares solution of `A x ≈ b` by conjugate gradients on the normal
/// equations (CGLS). `A` is given by its forward and adjoint actions.
///
/// The pair is checked with a randomised dot-product test first.
pub fn solve_linear_ls<F, G>(
    forward: F,
    adjoint: G,
    n_in: usize,
    rhs: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<LsSolution>
where
    F: Fn(&[f64]) -> Vec<f64>,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let mismatch = adjoint_mismatch(&forward, &adjoint, n_in, rhs.len(), 0x5eed);
    if mismatch > 1e-10 {
        return Err(FbdError::AdjointMismatch { mismatch });
    }
    solve_linear_ls_from(&forward, &adjoint, vec![0.0; n_in], rhs, tol, max_iters)
}

/// CGLS from a warm start, without the adjoint check.
pub fn solve_linear_ls_from<F, G>(
    forward: F,
    adjoint: G,
    x0: Vec<f64>,
    rhs: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<LsSolution>
where
    F: Fn(&[f64]) -> Vec<f64>,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let mut x = x0;
    let ax = forward(&x);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut s = adjoint(&r);
    let reference = norm2(&adjoint(rhs)).sqrt().max(norm2(&s).sqrt());
    if reference == 0.0 {
        return Ok(LsSolution {
            x,
            iterations: 0,
            relative_normal_residual: 0.0,
        });
    }
    let mut p = s.clone();
    let mut gamma = norm2(&s);
    let mut iterations = 0;
    while iterations < max_iters && gamma.sqrt() > tol * reference {
        let q = forward(&p);
        let qq = norm2(&q);
        if qq == 0.0 {
            break;
        }
        let alpha = gamma / qq;
        for (xi, pi) in x.iter_mut().zip(&p) {
            *xi += alpha * pi;
        }
        for (ri, qi) in r.iter_mut().zip(&q) {
            *ri -= alpha * qi;
        }
        s = adjoint(&r);
        let gamma_new = norm2(&s);
        let beta = gamma_new / gamma;
        gamma = gamma_new;
        for (pi, si) in p.iter_mut().zip(&s) {
            *pi = si + beta * *pi;
        }
        iterations += 1;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(FbdError::Singular("CGLS produced non-finite iterate".into()));
    }
    Ok(LsSolution {
        x,
        iterations,
        relative_normal_residual: gamma.sqrt() / reference,
    })
}
