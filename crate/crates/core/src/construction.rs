//! Density evolution over all synthesized bit-channels and frozen-set design.
//!
//! Indices are 0-based throughout: index `i` of a length-`2^n` code follows
//! the transform sequence given by the `n`-bit binary expansion of `i`, most
//! significant bit first. A `0` bit is a check-node step and a `1` bit a
//! variable-node step, and the first step acts on the channel erasure
//! probability. Equivalently, a parent at position `i` produces children
//! `2i` (check) and `2i + 1` (variable).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::transfer::{
    raw_minus, raw_minus_faulty, raw_plus, raw_plus_faulty, FaultSpec, Probability,
};

/// Largest exponent accepted by [`evolve_all`] unless a larger budget is
/// passed to [`evolve_all_with_budget`].
pub const DEFAULT_MAX_EXPONENT: usize = 24;

/// Largest step count [`expected_epsilon`] evaluates by enumeration.
pub const DEFAULT_ENUMERATION_CAP: usize = 20;

/// Levels at or above this length are expanded with rayon.
const PARALLEL_LEVEL_LEN: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Transform {
    /// Check node (`T-`).
    Check,
    /// Variable node (`T+`).
    Variable,
}

/// The transform sequence that produces bit-channel `index`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexPath {
    pub index: usize,
    pub steps: Vec<Transform>,
}

impl IndexPath {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Inverse of [`index_to_path`].
    pub fn to_index(steps: &[Transform]) -> usize {
        steps.iter().fold(0, |acc, t| {
            (acc << 1)
                | match t {
                    Transform::Check => 0,
                    Transform::Variable => 1,
                }
        })
    }
}

pub fn index_to_path(index: usize, n: usize) -> Result<IndexPath> {
    if n >= usize::BITS as usize || index >= (1usize << n) {
        return Err(Error::invalid(format!(
            "index {index} out of range for a code of exponent {n}"
        )));
    }
    let steps = (0..n)
        .rev()
        .map(|b| {
            if (index >> b) & 1 == 1 {
                Transform::Variable
            } else {
                Transform::Check
            }
        })
        .collect();
    Ok(IndexPath { index, steps })
}

#[inline]
fn step(eps: f64, t: Transform, faulty: bool, delta: f64) -> f64 {
    match (t, faulty) {
        (Transform::Check, false) => raw_minus(eps),
        (Transform::Variable, false) => raw_plus(eps),
        (Transform::Check, true) => raw_minus_faulty(eps, delta).min(1.0),
        (Transform::Variable, true) => raw_plus_faulty(eps, delta).min(1.0),
    }
}

/// Evolves `p` through `steps`. Step `j` is faulty iff `j < fault.faulty_steps(len)`.
pub fn evolve_steps(steps: &[Transform], p: Probability, fault: &FaultSpec) -> Probability {
    let faulty = fault.faulty_steps(steps.len());
    let delta = fault.delta.get();
    let eps = steps
        .iter()
        .enumerate()
        .fold(p.get(), |eps, (j, &t)| step(eps, t, j < faulty, delta));
    Probability::new_unchecked(eps)
}

pub fn evolve_path(path: &IndexPath, p: Probability, fault: &FaultSpec) -> Probability {
    evolve_steps(&path.steps, p, fault)
}

/// Erasure probabilities `Z_0..Z_{N-1}` of all `N = 2^n` bit-channels.
pub fn evolve_all(n: usize, p: Probability, fault: &FaultSpec) -> Result<Vec<f64>> {
    evolve_all_with_budget(n, p, fault, DEFAULT_MAX_EXPONENT)
}

/// Like [`evolve_all`] with an explicit exponent budget.
///
/// Every output is produced by exactly one chain of transfer-map applications,
/// so the result does not depend on how levels are split across threads.
pub fn evolve_all_with_budget(
    n: usize,
    p: Probability,
    fault: &FaultSpec,
    max_exponent: usize,
) -> Result<Vec<f64>> {
    if n > max_exponent {
        return Err(Error::Resource(format!(
            "2^{n} reliabilities exceed the budget of 2^{max_exponent}"
        )));
    }
    let len = 1usize << n;
    let faulty = fault.faulty_steps(n);
    let delta = fault.delta.get();

    let mut cur = Vec::with_capacity(len);
    let mut next = Vec::with_capacity(len);
    cur.push(p.get());
    for j in 0..n {
        let is_faulty = j < faulty;
        next.clear();
        next.resize(cur.len() * 2, 0.0);
        let expand = |(children, &parent): (&mut [f64], &f64)| {
            children[0] = step(parent, Transform::Check, is_faulty, delta);
            children[1] = step(parent, Transform::Variable, is_faulty, delta);
        };
        if cur.len() >= PARALLEL_LEVEL_LEN {
            next.par_chunks_mut(2).zip(cur.par_iter()).for_each(expand);
        } else {
            next.chunks_mut(2).zip(cur.iter()).for_each(expand);
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(cur)
}

/// Indices sorted from most to least reliable (ascending erasure
/// probability, ties toward the smaller index).
pub fn reliability_order(reliabilities: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..reliabilities.len()).collect();
    order.sort_by(|&a, &b| {
        reliabilities[a]
            .total_cmp(&reliabilities[b])
            .then(a.cmp(&b))
    });
    order
}

/// Picks the `k` indices with the smallest reliabilities as the information
/// set; ties go to the smaller index. Both returned sets are sorted.
pub fn design_code(reliabilities: &[f64], k: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let len = reliabilities.len();
    if k == 0 || k >= len {
        return Err(Error::invalid(format!(
            "information set size {k} must satisfy 0 < k < {len}"
        )));
    }
    let order = reliability_order(reliabilities);
    let mut info = order[..k].to_vec();
    let mut frozen = order[k..].to_vec();
    info.sort_unstable();
    frozen.sort_unstable();
    Ok((info, frozen))
}

/// A designed polar code: reliabilities plus the information/frozen split.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeConstruction {
    n: usize,
    channel_erasure: Probability,
    fault: FaultSpec,
    reliabilities: Vec<f64>,
    info_set: Vec<usize>,
    frozen_set: Vec<usize>,
    frozen_mask: Vec<bool>,
}

impl CodeConstruction {
    /// Runs density evolution for `(n, p, fault)` and keeps the `k` best channels.
    pub fn design(n: usize, p: Probability, fault: FaultSpec, k: usize) -> Result<Self> {
        let reliabilities = evolve_all(n, p, &fault)?;
        Self::from_reliabilities(n, p, fault, reliabilities, k)
    }

    /// Builds a code from precomputed reliabilities (e.g. one density-evolution
    /// run shared by several rates).
    pub fn from_reliabilities(
        n: usize,
        p: Probability,
        fault: FaultSpec,
        reliabilities: Vec<f64>,
        k: usize,
    ) -> Result<Self> {
        if n >= usize::BITS as usize || reliabilities.len() != 1usize << n {
            return Err(Error::DimensionMismatch {
                expected: 1usize.checked_shl(n as u32).unwrap_or(0),
                actual: reliabilities.len(),
            });
        }
        let (info_set, frozen_set) = design_code(&reliabilities, k)?;
        let mut frozen_mask = vec![false; reliabilities.len()];
        for &i in &frozen_set {
            frozen_mask[i] = true;
        }
        Ok(CodeConstruction {
            n,
            channel_erasure: p,
            fault,
            reliabilities,
            info_set,
            frozen_set,
            frozen_mask,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.reliabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reliabilities.is_empty()
    }

    pub fn k(&self) -> usize {
        self.info_set.len()
    }

    pub fn rate(&self) -> f64 {
        self.k() as f64 / self.len() as f64
    }

    pub fn channel_erasure(&self) -> Probability {
        self.channel_erasure
    }

    /// The fault model the reliabilities were computed under.
    pub fn fault(&self) -> &FaultSpec {
        &self.fault
    }

    pub fn reliabilities(&self) -> &[f64] {
        &self.reliabilities
    }

    pub fn info_set(&self) -> &[usize] {
        &self.info_set
    }

    pub fn frozen_set(&self) -> &[usize] {
        &self.frozen_set
    }

    /// `true` at frozen positions.
    pub fn frozen_mask(&self) -> &[bool] {
        &self.frozen_mask
    }

    #[inline]
    pub fn is_frozen(&self, index: usize) -> bool {
        self.frozen_mask[index]
    }
}

/// Mean erasure probability after `steps` faulty transitions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expectation {
    pub value: f64,
    /// `true` when obtained by enumerating all `2^steps` paths, `false` when
    /// the closed form was used because `steps` exceeded the cap.
    pub enumerated: bool,
}

/// `1 - (1 - p)(1 - delta)^steps`, exact because the mean step is affine.
pub fn expected_epsilon_closed_form(p: Probability, delta: Probability, steps: usize) -> f64 {
    let keep = (1.0 - delta.get()).powi(steps.min(i32::MAX as usize) as i32);
    1.0 - (1.0 - p.get()) * keep
}

/// Uniform average of the faulty process over all `2^steps` transform paths.
///
/// Fails with a resource error above `cap` steps.
pub fn expected_epsilon_enumerated(
    p: Probability,
    delta: Probability,
    steps: usize,
    cap: usize,
) -> Result<f64> {
    if steps > cap {
        return Err(Error::Resource(format!(
            "enumerating 2^{steps} paths exceeds the cap of 2^{cap}"
        )));
    }
    // Depth-first, so each node sums its two subtrees (pairwise summation).
    fn mean_below(eps: f64, remaining: usize, delta: f64) -> f64 {
        if remaining == 0 {
            return eps;
        }
        let minus = mean_below(raw_minus_faulty(eps, delta).min(1.0), remaining - 1, delta);
        let plus = mean_below(raw_plus_faulty(eps, delta).min(1.0), remaining - 1, delta);
        0.5 * (minus + plus)
    }
    Ok(mean_below(p.get(), steps, delta.get()))
}

/// Enumerates when `steps <= DEFAULT_ENUMERATION_CAP`, otherwise falls back to
/// the closed form and says so.
pub fn expected_epsilon(p: Probability, delta: Probability, steps: usize) -> Expectation {
    match expected_epsilon_enumerated(p, delta, steps, DEFAULT_ENUMERATION_CAP) {
        Ok(value) => Expectation {
            value,
            enumerated: true,
        },
        Err(_) => Expectation {
            value: expected_epsilon_closed_form(p, delta, steps),
            enumerated: false,
        },
    }
}

/// Capacity lost to `n_u` unprotected leaf-side transitions:
/// `E[eps_{n_u}] - p`.
pub fn rate_loss(p: Probability, delta: Probability, n_u: usize) -> f64 {
    // Rounding can leave a -1e-17 residue at delta = 0.
    (expected_epsilon(p, delta, n_u).value - p.get()).max(0.0)
}

/// [`rate_loss`] as a percentage of the capacity `1 - p`. Undefined for `p = 1`.
pub fn rate_loss_percent_of_capacity(
    p: Probability,
    delta: Probability,
    n_u: usize,
) -> Result<f64> {
    let capacity = 1.0 - p.get();
    if capacity <= 0.0 {
        return Err(Error::invalid("capacity is zero for p = 1"));
    }
    Ok(100.0 * rate_loss(p, delta, n_u) / capacity)
}

/// Processing-element bookkeeping for a depth-`n` decoder tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeCounts {
    pub total: u64,
    pub protected: u64,
    pub fraction: f64,
}

/// PE totals when the `n_p` levels nearest the root are protected.
pub fn pe_counts(n: usize, n_p: usize) -> Result<PeCounts> {
    if n >= 63 {
        return Err(Error::Resource(format!(
            "exponent {n} overflows PE counters"
        )));
    }
    if n_p > n + 1 {
        return Err(Error::invalid(format!(
            "protected level count {n_p} must be at most {}",
            n + 1
        )));
    }
    let total = (1u64 << (n + 1)) - 1;
    let protected = (1u64 << n_p) - 1;
    Ok(PeCounts {
        total,
        protected,
        fraction: protected as f64 / total as f64,
    })
}
