//! Matrix-free forms of every linear block operator used by the stage
//! solvers. The direct solvers assemble the same normal equations in closed
//! form; these are what CGLS iterates on and what the adjoint tests check.

use crate::altmin::LinearOperator;
use crate::fbd::interferometric::conv_window;
use crate::fbd::lsbd::truncated_conv;

/// `s -> [(s * g_k)(t), t = 0..n]_k`, the LSBD source block.
pub struct LsbdSourceOp<'a> {
    g: &'a [Vec<f64>],
    n: usize,
}

impl<'a> LsbdSourceOp<'a> {
    pub fn new(g: &'a [Vec<f64>], n: usize) -> Self {
        Self { g, n }
    }
}

impl LinearOperator for LsbdSourceOp<'_> {
    fn n_in(&self) -> usize {
        self.n
    }
    fn n_out(&self) -> usize {
        self.n * self.g.len()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.g.iter().flat_map(|gk| truncated_conv(x, gk, self.n)).collect()
    }
    fn adjoint(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (gk, yk) in self.g.iter().zip(y.chunks(self.n)) {
            for (m, o) in out.iter_mut().enumerate() {
                *o += gk.iter().zip(yk.iter().skip(m)).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        out
    }
}

/// `g -> (s * g)(t), t = 0..n`, the LSBD response block for one channel.
pub struct LsbdResponseOp<'a> {
    s: &'a [f64],
    tau: usize,
    n: usize,
}

impl<'a> LsbdResponseOp<'a> {
    pub fn new(s: &'a [f64], tau: usize, n: usize) -> Self {
        Self { s, tau, n }
    }
}

impl LinearOperator for LsbdResponseOp<'_> {
    fn n_in(&self) -> usize {
        self.tau + 1
    }
    fn n_out(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        truncated_conv(self.s, x, self.n)
    }
    fn adjoint(&self, y: &[f64]) -> Vec<f64> {
        (0..=self.tau)
            .map(|u| (u..self.n).map(|t| y[t] * self.s[t - u]).sum())
            .collect()
    }
}

/// `s_a(1..=T) -> [(s_a * g_kl)(t), t = -T..T]_kl` with `s_a(0)` held at zero;
/// the pinned unit zero lag enters through [`IbdSourceOp::pinned_response`].
pub struct IbdSourceOp<'a> {
    g: &'a [Vec<f64>],
    t: usize,
    tau: usize,
}

impl<'a> IbdSourceOp<'a> {
    pub fn new(g: &'a [Vec<f64>], t: usize, tau: usize) -> Self {
        Self { g, t, tau }
    }

    fn two_sided(&self, p: &[f64], zero_lag: f64) -> Vec<f64> {
        let t = self.t;
        let mut sa = vec![0.0; 2 * t + 1];
        sa[t] = zero_lag;
        for (k, v) in p.iter().enumerate() {
            sa[t + k + 1] = *v;
            sa[t - k - 1] = *v;
        }
        sa
    }

    /// Contribution of `s_a(0) = 1`.
    pub fn pinned_response(&self) -> Vec<f64> {
        let sa = self.two_sided(&vec![0.0; self.t], 1.0);
        self.g
            .iter()
            .flat_map(|g| conv_window(&sa, g, self.t, self.tau))
            .collect()
    }
}

impl LinearOperator for IbdSourceOp<'_> {
    fn n_in(&self) -> usize {
        self.t
    }
    fn n_out(&self) -> usize {
        self.g.len() * (2 * self.t + 1)
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let sa = self.two_sided(x, 0.0);
        self.g
            .iter()
            .flat_map(|g| conv_window(&sa, g, self.t, self.tau))
            .collect()
    }
    fn adjoint(&self, y: &[f64]) -> Vec<f64> {
        let t = self.t as isize;
        let tau = self.tau as isize;
        let width = (2 * t + 1) as usize;
        // c(x) = sum_kl sum_u g(u) y(x + u)
        let c: Vec<f64> = (-t..=t)
            .map(|x| {
                let lo = (-tau).max(-t - x);
                let hi = tau.min(t - x);
                self.g
                    .iter()
                    .zip(y.chunks(width))
                    .map(|(g, yk)| {
                        (lo..=hi)
                            .map(|u| g[(u + tau) as usize] * yk[(x + u + t) as usize])
                            .sum::<f64>()
                    })
                    .sum()
            })
            .collect();
        (1..=self.t).map(|k| c[self.t + k] + c[self.t - k]).collect()
    }
}

/// `g -> (s_a * g)(t), t = -T..T` for one interferometric response.
pub struct IbdResponseOp<'a> {
    sa: &'a [f64],
    t: usize,
    tau: usize,
}

impl<'a> IbdResponseOp<'a> {
    pub fn new(sa: &'a [f64], t: usize, tau: usize) -> Self {
        Self { sa, t, tau }
    }

    /// Column of the zero-lag response sample.
    pub fn centre_column(&self) -> Vec<f64> {
        self.sa.to_vec()
    }

    /// The operator stacked with `sqrt(alpha) * |t|` rows.
    pub fn with_focusing(&self, alpha: f64) -> FocusedOp<'_, Self> {
        let tau = self.tau as f64;
        let weights = (0..=2 * self.tau)
            .map(|i| alpha.sqrt() * (i as f64 - tau).abs())
            .collect();
        FocusedOp { base: self, weights }
    }
}

impl LinearOperator for IbdResponseOp<'_> {
    fn n_in(&self) -> usize {
        2 * self.tau + 1
    }
    fn n_out(&self) -> usize {
        2 * self.t + 1
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        conv_window(self.sa, x, self.t, self.tau)
    }
    fn adjoint(&self, y: &[f64]) -> Vec<f64> {
        let t = self.t as isize;
        let tau = self.tau as isize;
        (-tau..=tau)
            .map(|u| {
                let lo = (-t).max(-t + u);
                let hi = t.min(t + u);
                (lo..=hi)
                    .map(|tt| y[(tt + t) as usize] * self.sa[(tt - u + t) as usize])
                    .sum()
            })
            .collect()
    }
}

/// `x -> [A x; diag(w) x]`.
pub struct FocusedOp<'a, A> {
    base: &'a A,
    weights: Vec<f64>,
}

impl<A: LinearOperator> LinearOperator for FocusedOp<'_, A> {
    fn n_in(&self) -> usize {
        self.base.n_in()
    }
    fn n_out(&self) -> usize {
        self.base.n_out() + self.weights.len()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.base.apply(x);
        out.extend(x.iter().zip(&self.weights).map(|(a, w)| a * w));
        out
    }
    fn adjoint(&self, y: &[f64]) -> Vec<f64> {
        let (head, tail) = y.split_at(self.base.n_out());
        let mut out = self.base.adjoint(head);
        for ((o, yt), w) in out.iter_mut().zip(tail).zip(&self.weights) {
            *o += yt * w;
        }
        out
    }
}
