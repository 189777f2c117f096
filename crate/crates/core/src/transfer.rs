//! Single-step erasure-probability transfer functions.
//!
//! Under the all-zero codeword assumption on the BEC, a variable node emits an
//! erasure only when both inputs are erased, and a check node emits an erasure
//! when either input is. A faulty decoder additionally erases each surviving
//! message with probability `delta`.

use std::fmt;

use crate::error::{Error, Result};

/// A real number in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const ONE: Probability = Probability(1.0);

    /// Rejects NaN and anything outside `[0, 1]`; values are never clamped.
    pub fn new(value: f64) -> Result<Self> {
        Self::named("probability", value)
    }

    pub(crate) fn named(what: &'static str, value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(Error::OutOfRange { what, value })
        }
    }

    /// Caller guarantees `value` is in range (closed-form outputs of the
    /// transfer maps are).
    #[inline]
    pub(crate) const fn new_unchecked(value: f64) -> Self {
        Probability(value)
    }

    #[inline]
    pub const fn get(self) -> f64 {
        self.0
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl TryFrom<f64> for Probability {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Probability::new(value)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

/// How fault randomness is laid out across the bits of one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Correlation {
    /// Every intermediate message is computed once and reused by all later
    /// bits, as in a hardware decoder.
    Shared,
    /// Each bit's decision tree is recomputed with fresh faults, matching the
    /// independence assumed by density evolution.
    #[default]
    IndependentTree,
}

impl Correlation {
    pub fn as_str(self) -> &'static str {
        match self {
            Correlation::Shared => "shared",
            Correlation::IndependentTree => "independent-tree",
        }
    }
}

impl fmt::Display for Correlation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Decoder fault probability together with the protection layout.
///
/// `unprotected_steps` counts node-computation transitions from the leaf side
/// that suffer faults. Transitions beyond it (toward the root) are fault-free.
/// For a code of exponent `n` only `min(unprotected_steps, n)` of them exist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultSpec {
    pub delta: Probability,
    pub unprotected_steps: usize,
    pub correlation: Correlation,
}

impl FaultSpec {
    /// A fault-free decoder.
    pub fn reliable() -> Self {
        FaultSpec {
            delta: Probability::ZERO,
            unprotected_steps: 0,
            correlation: Correlation::default(),
        }
    }

    /// Faults with probability `delta` on every transition.
    pub fn unprotected(delta: Probability) -> Self {
        FaultSpec {
            delta,
            unprotected_steps: usize::MAX,
            correlation: Correlation::default(),
        }
    }

    pub fn with_unprotected_steps(mut self, steps: usize) -> Self {
        self.unprotected_steps = steps;
        self
    }

    /// Protect the `n_p` processing-element levels nearest the root of a
    /// depth-`n` tree (`0 <= n_p <= n + 1`).
    ///
    /// The tree has `n + 1` PE levels, so `n_u = (n + 1) - n_p` levels stay
    /// unprotected. Only `n` node computations exist, hence
    /// `faulty_steps(n) = min(n_u, n)`: protecting the root level alone
    /// changes nothing.
    pub fn with_protected_levels(mut self, n: usize, n_p: usize) -> Result<Self> {
        if n_p > n + 1 {
            return Err(Error::invalid(format!(
                "protected level count {n_p} exceeds the {} levels of a depth-{n} tree",
                n + 1
            )));
        }
        self.unprotected_steps = n + 1 - n_p;
        Ok(self)
    }

    pub fn with_correlation(mut self, correlation: Correlation) -> Self {
        self.correlation = correlation;
        self
    }

    /// Number of faulty transitions when applied to a code of exponent `n`.
    #[inline]
    pub fn faulty_steps(&self, n: usize) -> usize {
        if self.delta.get() == 0.0 {
            0
        } else {
            self.unprotected_steps.min(n)
        }
    }

    pub fn is_reliable(&self) -> bool {
        self.delta.get() == 0.0 || self.unprotected_steps == 0
    }
}

impl Default for FaultSpec {
    fn default() -> Self {
        FaultSpec::reliable()
    }
}

#[inline]
pub(crate) fn raw_plus(eps: f64) -> f64 {
    eps * eps
}

#[inline]
pub(crate) fn raw_minus(eps: f64) -> f64 {
    2.0 * eps - eps * eps
}

// Rounding must never push a result below `delta`, nor below
// `s = delta / (1 - delta)` for an input at or above `s`, and `eps = 1` must
// map to exactly 1. Each branch picks a form that guarantees this.
//
//   eps^2 + (1 - eps^2) delta = delta + eps^2 (1 - delta)
//                             = s + (1 - delta)(eps - s)(eps + s)
//                             = 1 - (1 - delta)(1 - eps)(1 + eps)
#[inline]
pub(crate) fn raw_plus_faulty(eps: f64, delta: f64) -> f64 {
    let keep = 1.0 - delta;
    let star = delta / keep;
    if eps < star {
        delta + eps * eps * keep
    } else if eps < 0.5 {
        star + keep * (eps - star) * (eps + star)
    } else {
        (1.0 - keep * (1.0 - eps) * (1.0 + eps)).max(star)
    }
}

//   2 eps - eps^2 + (1 - eps)^2 delta = delta + (2 eps - eps^2)(1 - delta)
#[inline]
pub(crate) fn raw_minus_faulty(eps: f64, delta: f64) -> f64 {
    delta + raw_minus(eps) * (1.0 - delta)
}

/// Variable-node erasure probability: `eps^2`.
pub fn t_plus(eps: Probability) -> Probability {
    Probability::new_unchecked(raw_plus(eps.get()))
}

/// Check-node erasure probability: `2 eps - eps^2`.
pub fn t_minus(eps: Probability) -> Probability {
    Probability::new_unchecked(raw_minus(eps.get()))
}

/// Variable node followed by a fault: `eps^2 + (1 - eps^2) delta`.
pub fn t_plus_faulty(eps: Probability, delta: Probability) -> Probability {
    Probability::new_unchecked(raw_plus_faulty(eps.get(), delta.get()).min(1.0))
}

/// Check node followed by a fault: `2 eps - eps^2 + (1 - eps)^2 delta`.
pub fn t_minus_faulty(eps: Probability, delta: Probability) -> Probability {
    Probability::new_unchecked(raw_minus_faulty(eps.get(), delta.get()).min(1.0))
}

/// Conditional mean of the next erasure probability when the variable and
/// check branches are taken with equal probability: `eps + (1 - eps) delta`.
pub fn mean_step(eps: Probability, delta: Probability) -> Probability {
    let e = eps.get();
    Probability::new_unchecked((e + (1.0 - e) * delta.get()).min(1.0))
}

/// The non-trivial fixed point `delta / (1 - delta)` of the faulty variable
/// map. `None` when it lies outside `[0, 1]`, i.e. for `delta > 1/2`.
pub fn variable_fixed_point(delta: Probability) -> Option<Probability> {
    let d = delta.get();
    if d > 0.5 {
        return None;
    }
    Some(Probability::new_unchecked(d / (1.0 - d)))
}
