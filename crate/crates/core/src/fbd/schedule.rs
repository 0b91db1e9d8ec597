use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{FbdError, Result};
use crate::seqcore::Sequence;

/// Regularisation weight of one homotopy leg. `Infinite` is solved as the
/// hard constraint the penalty converges to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Weight {
    Infinite,
    Finite(f64),
}

impl Weight {
    pub fn value(&self) -> f64 {
        match self {
            Weight::Infinite => f64::INFINITY,
            Weight::Finite(v) => *v,
        }
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::Infinite => write!(f, "inf"),
            Weight::Finite(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for Weight {
    type Err = FbdError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") {
            return Ok(Weight::Infinite);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| FbdError::InvalidArgument(format!("bad schedule weight {s:?}")))?;
        if v == f64::INFINITY {
            Ok(Weight::Infinite)
        } else if v.is_finite() && v >= 0.0 {
            Ok(Weight::Finite(v))
        } else {
            Err(FbdError::InvalidArgument(format!("weight {v} must be >= 0")))
        }
    }
}

/// Nonincreasing list of regularisation weights, each leg warm-starting the next.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomotopySchedule(Vec<Weight>);

impl HomotopySchedule {
    pub fn new(weights: Vec<Weight>) -> Result<Self> {
        if weights.is_empty() {
            return Err(FbdError::InvalidArgument("empty homotopy schedule".into()));
        }
        for w in weights.windows(2) {
            if w[1].value() > w[0].value() {
                return Err(FbdError::InvalidArgument(format!(
                    "schedule must be nonincreasing: {} before {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self(weights))
    }

    /// `[inf, 0]`, the schedule used throughout the idealised experiments.
    pub fn hard_then_free() -> Self {
        Self(vec![Weight::Infinite, Weight::Finite(0.0)])
    }

    pub fn weights(&self) -> &[Weight] {
        &self.0
    }
}

impl FromStr for HomotopySchedule {
    type Err = FbdError;

    /// Comma-separated weights, e.g. `inf,10,0`.
    fn from_str(s: &str) -> Result<Self> {
        let weights = s
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<Weight>>>()?;
        Self::new(weights)
    }
}

impl fmt::Display for HomotopySchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|w| w.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Which lag range the focusing weights cover.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FocusingSide {
    /// `t^2` on `{-tau..tau}`, for auto-correlations.
    TwoSided,
    /// `t^2` on `{0..tau}`, for the front-loaded response.
    Causal,
}

/// Quadratic focusing weights `w(t) = t^2`.
pub fn focusing_weights(tau: usize, side: FocusingSide) -> Sequence {
    let t = tau as isize;
    let (lo, hi) = match side {
        FocusingSide::TwoSided => (-t, t),
        FocusingSide::Causal => (0, t),
    };
    Sequence::from_raw(lo, (lo..=hi).map(|k| (k * k) as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_small_cases() {
        let w = focusing_weights(2, FocusingSide::TwoSided);
        assert_eq!(w.origin(), -2);
        assert_eq!(w.samples(), &[4.0, 1.0, 0.0, 1.0, 4.0]);
        let w = focusing_weights(2, FocusingSide::Causal);
        assert_eq!(w.origin(), 0);
        assert_eq!(w.samples(), &[0.0, 1.0, 4.0]);
        for tau in 0..5 {
            assert_eq!(focusing_weights(tau, FocusingSide::TwoSided).at(0), 0.0);
        }
    }

    #[test]
    fn schedule_parsing() {
        let s: HomotopySchedule = "inf,0".parse().unwrap();
        assert_eq!(s, HomotopySchedule::hard_then_free());
        let s: HomotopySchedule = "inf, 10, 1e-2 ,0".parse().unwrap();
        assert_eq!(s.weights().len(), 4);
        assert_eq!(s.to_string(), "inf,10,0.01,0");
        assert!("0,inf".parse::<HomotopySchedule>().is_err());
        assert!("-1".parse::<HomotopySchedule>().is_err());
        assert!("".parse::<HomotopySchedule>().is_err());
    }
}
