//! Second-moment focusing functionals `J = sum_t t^2 a(t)` and the check
//! that smearing a nonnegative sequence never makes its auto-correlation
//! more focused.

use serde::{Deserialize, Serialize};

use crate::error::{FbdError, Result};
use crate::seqcore::{convolve, xcorr_full, Sequence};

/// `sum_t t^2 a(t)` over the stored support.
pub fn second_moment_functional(a: &Sequence) -> f64 {
    lag_moments(a).iter().map(|(_, v)| v).sum()
}

/// `(t, t^2 a(t))` for every stored lag.
fn lag_moments(a: &Sequence) -> Vec<(isize, f64)> {
    a.samples()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let t = a.origin() + i as isize;
            (t, (t * t) as f64 * v)
        })
        .collect()
}

/// Focusing summary of one sequence's auto-correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocusReport {
    pub j: f64,
    pub l1: f64,
    /// `(t, t^2 F(t))` per lag.
    pub by_lag: Vec<(isize, f64)>,
}

impl FocusReport {
    pub fn of(a: &Sequence) -> Result<Self> {
        let auto = xcorr_full(a, a)?;
        let by_lag = lag_moments(&auto);
        Ok(Self {
            j: by_lag.iter().map(|(_, v)| v).sum(),
            l1: a.samples().iter().map(|v| v.abs()).sum(),
            by_lag,
        })
    }
}

/// Result of comparing `f` with `g = f * phi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppendixCheck {
    pub j_f: f64,
    pub j_g: f64,
    pub l1_f: f64,
    pub l1_g: f64,
}

impl AppendixCheck {
    /// `J_G - J_F`, nonnegative up to rounding.
    pub fn gap(&self) -> f64 {
        self.j_g - self.j_f
    }
}

fn check_nonnegative(a: &Sequence, what: &str) -> Result<()> {
    if let Some(v) = a.samples().iter().find(|v| **v < 0.0) {
        return Err(FbdError::InvalidArgument(format!("{what} has negative entry {v}")));
    }
    Ok(())
}

/// Compare `J` of `f ⊗ f` and of `g ⊗ g` for `g = f * phi`.
///
/// `phi` is rescaled to unit sum first.
pub fn appendix_check(f: &Sequence, phi: &Sequence) -> Result<AppendixCheck> {
    check_nonnegative(f, "f")?;
    check_nonnegative(phi, "phi")?;
    if f.sum() == 0.0 {
        return Err(FbdError::ZeroEnergy("f"));
    }
    let total = phi.sum();
    if total == 0.0 {
        return Err(FbdError::InvalidArgument("phi sums to zero".into()));
    }
    let phi = Sequence::new(phi.origin(), phi.samples().iter().map(|v| v / total).collect())?;
    let g = convolve(f, &phi)?;
    let ff = FocusReport::of(f)?;
    let gg = FocusReport::of(&g)?;
    Ok(AppendixCheck {
        j_f: ff.j,
        j_g: gg.j,
        l1_f: ff.l1,
        l1_g: gg.l1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(origin: isize, v: &[f64]) -> Sequence {
        Sequence::new(origin, v.to_vec()).unwrap()
    }

    #[test]
    fn small_moments() {
        assert_eq!(second_moment_functional(&Sequence::delta(0)), 0.0);
        assert_eq!(second_moment_functional(&seq(-1, &[1.0, 0.0, 1.0])), 2.0);
        let auto = xcorr_full(&seq(0, &[1.0, 1.0]), &seq(0, &[1.0, 1.0])).unwrap();
        assert_eq!(auto.samples(), &[1.0, 2.0, 1.0]);
        assert_eq!(second_moment_functional(&auto), 2.0);
    }

    #[test]
    fn two_tap_smoothing() {
        let r = appendix_check(&seq(0, &[1.0, 1.0]), &seq(0, &[0.5, 0.5])).unwrap();
        assert_eq!((r.j_f, r.j_g, r.l1_f, r.l1_g), (2.0, 4.0, 2.0, 2.0));
    }

    #[test]
    fn delta_phi_is_equality() {
        let f = seq(0, &[0.3, 2.0, 0.0, 1.1]);
        let r = appendix_check(&f, &seq(5, &[4.0])).unwrap();
        assert_eq!(r.j_f, r.j_g);
    }

    #[test]
    fn rejects_bad_inputs() {
        let f = seq(0, &[1.0]);
        assert!(appendix_check(&f, &seq(0, &[1.0, -0.1])).is_err());
        assert!(appendix_check(&f, &seq(0, &[0.0, 0.0])).is_err());
        assert!(appendix_check(&seq(0, &[0.0]), &f).is_err());
    }
}
