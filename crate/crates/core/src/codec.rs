//! Polar encoding, BEC transmission and ternary-message successive
//! cancellation decoding with fault injection.
//!
//! Bits are `u8` values in `{0, 1}`. Encoder and decoder both use natural
//! (non bit-reversed) order: `x = u F^{(x)n}` with `F = [[1, 0], [1, 1]]`, so
//! the first half of `u` sees a check node at the leaf-side stage and the
//! second half a variable node. Index `i` therefore follows the same
//! transform path as reliability `Z_i` in [`crate::construction`].

use rand::Rng;
use rand_distr::{Distribution, Geometric};

use crate::construction::CodeConstruction;
use crate::error::{Error, Result};
use crate::transfer::{Correlation, FaultSpec, Probability};

/// Saturated log-likelihood ratio on the erasure channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(i8)]
pub enum Llr {
    /// `-inf`: the bit is certainly 1.
    NegInfinite = -1,
    /// `0`: no information.
    Erased = 0,
    /// `+inf`: the bit is certainly 0.
    PosInfinite = 1,
}

impl Llr {
    #[inline]
    fn from_sign(s: i8) -> Llr {
        match s {
            1 => Llr::PosInfinite,
            -1 => Llr::NegInfinite,
            _ => Llr::Erased,
        }
    }

    #[inline]
    pub fn for_bit(bit: u8) -> Llr {
        if bit & 1 == 0 {
            Llr::PosInfinite
        } else {
            Llr::NegInfinite
        }
    }

    #[inline]
    pub fn is_erased(self) -> bool {
        self == Llr::Erased
    }

    #[inline]
    fn negate_if(self, flip: u8) -> Llr {
        if flip & 1 == 1 {
            Llr::from_sign(-(self as i8))
        } else {
            self
        }
    }
}

/// Product of signs; erased if either input is.
#[inline]
pub fn check_node(m1: Llr, m2: Llr) -> Llr {
    Llr::from_sign((m1 as i8) * (m2 as i8))
}

/// `m1 + (-1)^partial_sum m2` in saturated arithmetic, where opposing
/// infinities cancel to an erasure.
#[inline]
pub fn variable_node(m1: Llr, m2: Llr, partial_sum: u8) -> Llr {
    let m2 = m2.negate_if(partial_sum);
    match (m1, m2) {
        (Llr::Erased, m) | (m, Llr::Erased) => m,
        (a, b) if a == b => a,
        _ => Llr::Erased,
    }
}

/// Erases a surviving message with probability `delta`. An erased message
/// stays erased and consumes no randomness.
pub fn inject_fault<R: Rng + ?Sized>(m: Llr, delta: Probability, rng: &mut R) -> Llr {
    if !m.is_erased() && rng.random_bool(delta.get()) {
        Llr::Erased
    } else {
        m
    }
}

/// In-place polar transform. Its own inverse over GF(2).
pub fn encode_in_place(bits: &mut [u8]) -> Result<()> {
    let len = bits.len();
    if !len.is_power_of_two() {
        return Err(Error::invalid(format!(
            "block length {len} is not a power of two"
        )));
    }
    let mut half = 1;
    while half < len {
        for block in bits.chunks_exact_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter()) {
                *a ^= *b;
            }
        }
        half *= 2;
    }
    Ok(())
}

/// Encodes `u` of length `2^n`.
pub fn encode(u: &[u8], n: usize) -> Result<Vec<u8>> {
    if n >= usize::BITS as usize || u.len() != 1usize << n {
        return Err(Error::invalid(format!(
            "message of length {} does not match exponent {n}",
            u.len()
        )));
    }
    let mut x = u.to_vec();
    encode_in_place(&mut x)?;
    Ok(x)
}

/// Sends `x` over BEC(`p`).
pub fn transmit_bec<R: Rng + ?Sized>(x: &[u8], p: Probability, rng: &mut R) -> Vec<Llr> {
    let mut y = Vec::with_capacity(x.len());
    transmit_bec_into(x, p, rng, &mut y);
    y
}

pub(crate) fn transmit_bec_into<R: Rng + ?Sized>(
    x: &[u8],
    p: Probability,
    rng: &mut R,
    y: &mut Vec<Llr>,
) {
    y.clear();
    y.extend(x.iter().map(|&bit| {
        if rng.random_bool(p.get()) {
            Llr::Erased
        } else {
            Llr::for_bit(bit)
        }
    }));
}

/// Decides, once per node computation at an unprotected level, whether that
/// node's output is struck by a fault.
///
/// The decoder consults the source for every such node whether or not the
/// message is already erased, so two sources whose strike sets are nested
/// produce nested fault patterns on the same frame.
pub trait FaultSource {
    fn strikes(&mut self) -> bool;
}

/// Independent strikes with probability `delta`.
///
/// Draws the gap to the next strike from a geometric distribution instead of
/// one uniform per node, which matters at small `delta`.
pub struct BernoulliFaults<R> {
    rng: R,
    delta: f64,
    gap: Option<Geometric>,
    until_strike: u64,
}

impl<R: Rng> BernoulliFaults<R> {
    pub fn new(delta: Probability, mut rng: R) -> Self {
        let d = delta.get();
        let gap = if d > 0.0 && d < 1.0 {
            Geometric::new(d).ok()
        } else {
            None
        };
        let until_strike = gap.as_ref().map_or(0, |g| g.sample(&mut rng));
        BernoulliFaults {
            rng,
            delta: d,
            gap,
            until_strike,
        }
    }
}

impl<R: Rng> FaultSource for BernoulliFaults<R> {
    #[inline]
    fn strikes(&mut self) -> bool {
        match &self.gap {
            None => self.delta >= 1.0,
            Some(gap) => {
                if self.until_strike == 0 {
                    self.until_strike = gap.sample(&mut self.rng);
                    true
                } else {
                    self.until_strike -= 1;
                    false
                }
            }
        }
    }
}

/// Never strikes.
pub struct NoFaults;

impl FaultSource for NoFaults {
    #[inline]
    fn strikes(&mut self) -> bool {
        false
    }
}

/// Replays a fixed strike pattern, then stops striking.
pub struct ScriptedFaults<'a> {
    pattern: &'a [bool],
    pos: usize,
}

impl<'a> ScriptedFaults<'a> {
    pub fn new(pattern: &'a [bool]) -> Self {
        ScriptedFaults { pattern, pos: 0 }
    }

    /// Number of strike decisions requested so far.
    pub fn consumed(&self) -> usize {
        self.pos
    }
}

impl FaultSource for ScriptedFaults<'_> {
    fn strikes(&mut self) -> bool {
        let s = self.pattern.get(self.pos).copied().unwrap_or(false);
        self.pos += 1;
        s
    }
}

/// Outcome of one bit decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    Zero,
    One,
    Erased,
}

impl From<Llr> for Decision {
    fn from(m: Llr) -> Decision {
        match m {
            Llr::PosInfinite => Decision::Zero,
            Llr::NegInfinite => Decision::One,
            Llr::Erased => Decision::Erased,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeResult {
    /// Decisions at the information positions, in index order.
    pub u_hat: Vec<Decision>,
    /// The decision message of every bit, frozen ones included.
    pub decision_llrs: Vec<Llr>,
    pub frame_erased: bool,
    /// First information index whose decision message was erased.
    pub first_erasure_index: Option<usize>,
    pub info_bit_erasures: usize,
}

/// Reusable successive cancellation decoder for one block length.
#[derive(Debug, Clone)]
pub struct ScDecoder {
    n: usize,
    /// `llr[d]` holds the `N >> d` messages entering depth `d` (shared mode);
    /// `llr[0]` is the channel output.
    llr: Vec<Vec<Llr>>,
    /// `scratch[d]`: per-bit tree messages entering depth `d` (independent mode).
    scratch: Vec<Vec<Llr>>,
    /// `partial[d]`: re-encoded left half of the current depth-`d` block.
    partial: Vec<Vec<u8>>,
    /// `encoded[d]`: re-encoding of the most recently finished depth-`d` block.
    encoded: Vec<Vec<u8>>,
}

struct Run<'a, F> {
    code: &'a CodeConstruction,
    genie: Option<&'a [u8]>,
    faulty_steps: usize,
    mode: Correlation,
    faults: &'a mut F,
    result: DecodeResult,
}

impl<F: FaultSource> Run<'_, F> {
    #[inline]
    fn maybe_fault(&mut self, m: Llr, depth: usize) -> Llr {
        if depth < self.faulty_steps && self.faults.strikes() {
            Llr::Erased
        } else {
            m
        }
    }
}

impl ScDecoder {
    pub fn new(n: usize) -> Self {
        let len = 1usize << n;
        ScDecoder {
            n,
            llr: (0..=n).map(|d| vec![Llr::Erased; len >> d]).collect(),
            scratch: (0..=n).map(|d| vec![Llr::Erased; len >> d]).collect(),
            partial: (0..n).map(|d| vec![0; len >> (d + 1)]).collect(),
            encoded: (0..=n).map(|d| vec![0; len >> d]).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Decodes bits `0..N` in order.
    ///
    /// Every node output at one of the `fault.faulty_steps(n)` leaf-side
    /// depths consults `faults`; channel values never do. Frozen bits are
    /// zero. With `genie = Some(u)` the true `u_i` is fed forward after each
    /// decision; otherwise an erased information bit is fed forward as 0 and
    /// decoding continues.
    pub fn decode<F: FaultSource>(
        &mut self,
        y: &[Llr],
        code: &CodeConstruction,
        fault: &FaultSpec,
        faults: &mut F,
        genie: Option<&[u8]>,
    ) -> Result<DecodeResult> {
        let len = 1usize << self.n;
        if code.n() != self.n {
            return Err(Error::invalid(format!(
                "decoder exponent {} does not match code exponent {}",
                self.n,
                code.n()
            )));
        }
        if y.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                actual: y.len(),
            });
        }
        if let Some(u) = genie {
            if u.len() != len {
                return Err(Error::DimensionMismatch {
                    expected: len,
                    actual: u.len(),
                });
            }
        }

        self.llr[0].copy_from_slice(y);
        let mut run = Run {
            code,
            genie,
            faulty_steps: fault.faulty_steps(self.n),
            mode: fault.correlation,
            faults,
            result: DecodeResult {
                u_hat: Vec::with_capacity(code.k()),
                decision_llrs: Vec::with_capacity(len),
                frame_erased: false,
                first_erasure_index: None,
                info_bit_erasures: 0,
            },
        };
        self.node(&mut run, 0, 0);
        Ok(run.result)
    }

    fn node<F: FaultSource>(&mut self, run: &mut Run<'_, F>, depth: usize, base: usize) {
        if depth == self.n {
            let bit = self.leaf(run, base);
            self.encoded[depth][0] = bit;
            return;
        }
        let half = (1usize << (self.n - depth)) / 2;
        let shared = run.mode == Correlation::Shared;

        if shared {
            let (above, below) = self.llr.split_at_mut(depth + 1);
            let input = &above[depth];
            let out = &mut below[0];
            for k in 0..half {
                out[k] = run.maybe_fault(check_node(input[k], input[k + half]), depth);
            }
        }
        self.node(run, depth + 1, base);

        self.partial[depth][..half].copy_from_slice(&self.encoded[depth + 1][..half]);

        if shared {
            let (above, below) = self.llr.split_at_mut(depth + 1);
            let input = &above[depth];
            let out = &mut below[0];
            let ps = &self.partial[depth];
            for k in 0..half {
                out[k] = run.maybe_fault(variable_node(input[k + half], input[k], ps[k]), depth);
            }
        }
        self.node(run, depth + 1, base + half);

        let (enc_above, enc_below) = self.encoded.split_at_mut(depth + 1);
        let out = &mut enc_above[depth];
        let right = &enc_below[0];
        let left = &self.partial[depth];
        for k in 0..half {
            out[k] = left[k] ^ right[k];
            out[k + half] = right[k];
        }
    }

    /// Decision message for bit `index` computed on a fresh tree.
    fn fresh_tree<F: FaultSource>(&mut self, run: &mut Run<'_, F>, index: usize) -> Llr {
        let n = self.n;
        for depth in 0..n {
            let half = (1usize << (n - depth)) / 2;
            let variable = (index >> (n - 1 - depth)) & 1 == 1;
            let (above, below) = self.scratch.split_at_mut(depth + 1);
            let input: &[Llr] = if depth == 0 {
                &self.llr[0]
            } else {
                &above[depth]
            };
            let out = &mut below[0];
            if variable {
                let ps = &self.partial[depth];
                for k in 0..half {
                    out[k] =
                        run.maybe_fault(variable_node(input[k + half], input[k], ps[k]), depth);
                }
            } else {
                for k in 0..half {
                    out[k] = run.maybe_fault(check_node(input[k], input[k + half]), depth);
                }
            }
        }
        self.scratch[n][0]
    }

    /// Decides bit `index` and returns the value fed forward.
    fn leaf<F: FaultSource>(&mut self, run: &mut Run<'_, F>, index: usize) -> u8 {
        let m = if self.n == 0 {
            self.llr[0][0]
        } else {
            match run.mode {
                Correlation::Shared => self.llr[self.n][0],
                Correlation::IndependentTree => self.fresh_tree(run, index),
            }
        };
        run.result.decision_llrs.push(m);
        if run.code.is_frozen(index) {
            return 0;
        }
        let decision = Decision::from(m);
        run.result.u_hat.push(decision);
        if decision == Decision::Erased {
            run.result.info_bit_erasures += 1;
            if !run.result.frame_erased {
                run.result.frame_erased = true;
                run.result.first_erasure_index = Some(index);
            }
        }
        match run.genie {
            Some(u) => u[index],
            None => match decision {
                Decision::One => 1,
                Decision::Zero | Decision::Erased => 0,
            },
        }
    }
}

/// One-shot decode with independent faults of probability `fault.delta`.
pub fn sc_decode<R: Rng>(
    y: &[Llr],
    code: &CodeConstruction,
    fault: &FaultSpec,
    rng: R,
    genie: Option<&[u8]>,
) -> Result<DecodeResult> {
    let mut decoder = ScDecoder::new(code.n());
    let mut faults = BernoulliFaults::new(fault.delta, rng);
    decoder.decode(y, code, fault, &mut faults, genie)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::CodeConstruction;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use Llr::*;

    fn p(v: f64) -> Probability {
        Probability::new(v).unwrap()
    }

    #[test]
    fn check_node_table() {
        assert_eq!(check_node(PosInfinite, PosInfinite), PosInfinite);
        assert_eq!(check_node(Erased, PosInfinite), Erased);
        assert_eq!(check_node(NegInfinite, NegInfinite), PosInfinite);
        assert_eq!(check_node(NegInfinite, PosInfinite), NegInfinite);
        assert_eq!(check_node(NegInfinite, Erased), Erased);
    }

    #[test]
    fn variable_node_table() {
        assert_eq!(variable_node(PosInfinite, Erased, 0), PosInfinite);
        assert_eq!(variable_node(PosInfinite, PosInfinite, 1), Erased);
        assert_eq!(variable_node(Erased, Erased, 0), Erased);
        assert_eq!(variable_node(Erased, PosInfinite, 1), NegInfinite);
        assert_eq!(variable_node(NegInfinite, PosInfinite, 1), NegInfinite);
        assert_eq!(variable_node(NegInfinite, PosInfinite, 0), Erased);
    }

    #[test]
    fn encode_small() {
        assert_eq!(encode(&[0; 8], 3).unwrap(), vec![0; 8]);
        for u1 in 0..2u8 {
            for u2 in 0..2u8 {
                assert_eq!(encode(&[u1, u2], 1).unwrap(), vec![u1 ^ u2, u2]);
            }
        }
        assert_eq!(encode(&[1, 0, 0, 0], 2).unwrap(), vec![1, 0, 0, 0]);
        assert_eq!(encode(&[0, 0, 0, 1], 2).unwrap(), vec![1, 1, 1, 1]);
        assert!(encode(&[0; 3], 2).is_err());
        assert!(encode_in_place(&mut [0u8; 6]).is_err());
    }

    #[test]
    fn channel_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = [0, 1, 1, 0, 1];
        assert_eq!(
            transmit_bec(&x, p(0.0), &mut rng),
            vec![
                PosInfinite,
                NegInfinite,
                NegInfinite,
                PosInfinite,
                NegInfinite
            ]
        );
        assert!(transmit_bec(&x, p(1.0), &mut rng)
            .iter()
            .all(|m| m.is_erased()));
    }

    #[test]
    fn fault_injection_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for m in [PosInfinite, NegInfinite, Erased] {
            assert_eq!(inject_fault(m, p(0.0), &mut rng), m);
            assert_eq!(inject_fault(m, p(1.0), &mut rng), Erased);
        }
    }

    #[test]
    fn bernoulli_source_extremes() {
        let mut never = BernoulliFaults::new(p(0.0), ChaCha8Rng::seed_from_u64(3));
        let mut always = BernoulliFaults::new(p(1.0), ChaCha8Rng::seed_from_u64(3));
        assert!((0..1000).all(|_| !never.strikes()));
        assert!((0..1000).all(|_| always.strikes()));
    }

    fn n1_code() -> CodeConstruction {
        CodeConstruction::design(1, p(0.5), FaultSpec::reliable(), 1).unwrap()
    }

    #[test]
    fn frozen_first_bit_hand_trace() {
        let code = n1_code();
        assert!(code.is_frozen(0));
        for mode in [Correlation::Shared, Correlation::IndependentTree] {
            let fault = FaultSpec::reliable().with_correlation(mode);
            let r = ScDecoder::new(1)
                .decode(&[Erased, PosInfinite], &code, &fault, &mut NoFaults, None)
                .unwrap();
            assert_eq!(r.decision_llrs, vec![Erased, PosInfinite]);
            assert_eq!(r.u_hat, vec![Decision::Zero]);
            assert!(!r.frame_erased);
            assert_eq!(r.first_erasure_index, None);
        }
    }

    #[test]
    fn fully_faulty_decoder_erases_everything() {
        let code = CodeConstruction::design(4, p(0.3), FaultSpec::reliable(), 8).unwrap();
        let y = vec![PosInfinite; 16];
        for mode in [Correlation::Shared, Correlation::IndependentTree] {
            let fault = FaultSpec::unprotected(p(1.0)).with_correlation(mode);
            let r = sc_decode(&y, &code, &fault, ChaCha8Rng::seed_from_u64(5), None).unwrap();
            assert!(r.frame_erased);
            assert_eq!(r.info_bit_erasures, 8);
            assert!(r.u_hat.iter().all(|d| *d == Decision::Erased));
            assert_eq!(r.first_erasure_index, Some(code.info_set()[0]));
        }
    }

    #[test]
    fn decode_checks_dimensions() {
        let code = n1_code();
        let fault = FaultSpec::reliable();
        let mut dec = ScDecoder::new(1);
        assert!(matches!(
            dec.decode(&[PosInfinite], &code, &fault, &mut NoFaults, None),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(dec
            .decode(&[PosInfinite; 2], &code, &fault, &mut NoFaults, Some(&[0]))
            .is_err());
        let mut wrong = ScDecoder::new(2);
        assert!(wrong
            .decode(&[PosInfinite; 4], &code, &fault, &mut NoFaults, None)
            .is_err());
    }

    #[test]
    fn scripted_faults_count_every_unprotected_node() {
        // Shared mode touches N/2 nodes per depth twice: n N node outputs.
        let code = CodeConstruction::design(3, p(0.5), FaultSpec::reliable(), 4).unwrap();
        let y = vec![PosInfinite; 8];
        let pattern = vec![false; 1000];
        let fault = FaultSpec::unprotected(p(0.5)).with_correlation(Correlation::Shared);
        let mut src = ScriptedFaults::new(&pattern);
        ScDecoder::new(3)
            .decode(&y, &code, &fault, &mut src, None)
            .unwrap();
        assert_eq!(src.consumed(), 3 * 8);

        // Independent trees: N - 1 node outputs per bit.
        let fault = fault.with_correlation(Correlation::IndependentTree);
        let mut src = ScriptedFaults::new(&pattern);
        ScDecoder::new(3)
            .decode(&y, &code, &fault, &mut src, None)
            .unwrap();
        assert_eq!(src.consumed(), 8 * 7);

        // Two protected PE levels leave the root-side node computation clean.
        let fault = fault.with_protected_levels(3, 2).unwrap();
        let mut src = ScriptedFaults::new(&pattern);
        ScDecoder::new(3)
            .decode(&y, &code, &fault, &mut src, None)
            .unwrap();
        assert_eq!(src.consumed(), 8 * 6);
    }
}
