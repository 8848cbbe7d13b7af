//! Online correlated selection.
//!
//! Each offline vertex carries a three-valued memory `tau`. A step is
//! oblivious or adaptive with probability 1/2 each:
//!
//! - oblivious: draw `m` and `l`; forget the non-probed candidate
//!   `i_{-m}`, remember for `i_m` whether it was returned (`m == l`).
//! - adaptive: draw `m`; if `i_m` remembers being matched return the other
//!   candidate, if it remembers being unmatched return it, otherwise flip a
//!   fresh coin; then forget both.
//!
//! Bits are drawn in a fixed order (step type, `m`, then `l` when needed) so
//! that a seed pins the whole transcript.

use std::collections::HashMap;

use num::One;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitSource;
use crate::matcher::Selector;
use crate::rational::{int, pow2_neg, ratio, Exact};

/// Largest `k` for which the exact `f` is provided.
pub const F_MAX_K: u32 = 64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OcsError {
    #[error("candidates must be distinct, got {0} twice")]
    IdenticalCandidates(usize),
    #[error("k = {0} out of range 0..={F_MAX_K}")]
    KOutOfRange(u32),
    #[error("bound needs at least one sequence length")]
    EmptyLengths,
    #[error("sequence lengths must be positive")]
    NonPositiveLength,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tau {
    Matched,
    Unmatched,
    #[default]
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    Oblivious,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OcsStepRecord {
    pub kind: StepKind,
    /// Probed candidate, 1 or 2.
    pub m: u8,
    /// Returned candidate, 1 or 2.
    pub l: u8,
    pub fresh_coin_used: bool,
    pub pair: (usize, usize),
}

impl OcsStepRecord {
    pub fn probed(&self) -> usize {
        if self.m == 1 {
            self.pair.0
        } else {
            self.pair.1
        }
    }

    pub fn returned(&self) -> usize {
        if self.l == 1 {
            self.pair.0
        } else {
            self.pair.1
        }
    }
}

/// Result of one step on the two candidates' memories.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    pub record: OcsStepRecord,
    pub tau_first: Tau,
    pub tau_second: Tau,
}

fn other(x: u8) -> u8 {
    3 - x
}

/// One OCS step given the candidates' current memories. Pure apart from the
/// bits it consumes; both [`OcsState`] and the exact enumerator use it.
pub fn ocs_step(
    pair: (usize, usize),
    tau_first: Tau,
    tau_second: Tau,
    bits: &mut dyn BitSource,
) -> StepOutcome {
    let oblivious = !bits.next_bit();
    let m = bits.next_index();
    if oblivious {
        let l = bits.next_index();
        let remembered = if m == l { Tau::Matched } else { Tau::Unmatched };
        let (tau_first, tau_second) = if m == 1 {
            (remembered, Tau::Unknown)
        } else {
            (Tau::Unknown, remembered)
        };
        StepOutcome {
            record: OcsStepRecord {
                kind: StepKind::Oblivious,
                m,
                l,
                fresh_coin_used: true,
                pair,
            },
            tau_first,
            tau_second,
        }
    } else {
        let probed = if m == 1 { tau_first } else { tau_second };
        let (l, fresh) = match probed {
            Tau::Matched => (other(m), false),
            Tau::Unmatched => (m, false),
            Tau::Unknown => (bits.next_index(), true),
        };
        StepOutcome {
            record: OcsStepRecord {
                kind: StepKind::Adaptive,
                m,
                l,
                fresh_coin_used: fresh,
                pair,
            },
            tau_first: Tau::Unknown,
            tau_second: Tau::Unknown,
        }
    }
}

/// Sparse `tau` memory; vertices not present are `Unknown`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OcsState {
    tau: HashMap<usize, Tau>,
}

impl OcsState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn tau(&self, i: usize) -> Tau {
        self.tau.get(&i).copied().unwrap_or_default()
    }

    pub fn set_tau(&mut self, i: usize, t: Tau) {
        if t == Tau::Unknown {
            self.tau.remove(&i);
        } else {
            self.tau.insert(i, t);
        }
    }

    /// Number of vertices with a non-default memory.
    pub fn active(&self) -> usize {
        self.tau.len()
    }
}

/// Runs one OCS step on `state` and returns the chosen vertex.
pub fn ocs_select(
    state: &mut OcsState,
    pair: (usize, usize),
    bits: &mut dyn BitSource,
) -> Result<(usize, OcsStepRecord), OcsError> {
    let (i1, i2) = pair;
    if i1 == i2 {
        return Err(OcsError::IdenticalCandidates(i1));
    }
    let out = ocs_step(pair, state.tau(i1), state.tau(i2), bits);
    state.set_tau(i1, out.tau_first);
    state.set_tau(i2, out.tau_second);
    Ok((out.record.returned(), out.record))
}

/// OCS packaged as a matcher selector; keeps the step transcript.
#[derive(Debug, Clone, Default)]
pub struct OcsSelector {
    pub state: OcsState,
    pub transcript: Vec<OcsStepRecord>,
}

impl OcsSelector {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Selector for OcsSelector {
    fn select(&mut self, first: usize, second: usize, bits: &mut dyn BitSource) -> usize {
        let (chosen, rec) = ocs_select(&mut self.state, (first, second), bits)
            .expect("matcher always passes distinct candidates");
        self.transcript.push(rec);
        chosen
    }
}

/// Runs the OCS over a fixed pair sequence.
pub fn run_ocs_sequence(
    pairs: &[(usize, usize)],
    bits: &mut dyn BitSource,
) -> Result<Vec<OcsStepRecord>, OcsError> {
    let mut state = OcsState::new();
    pairs
        .iter()
        .map(|&p| ocs_select(&mut state, p, bits).map(|(_, r)| r))
        .collect()
}

/// `f_0 = f_1 = 1`, `f_k = f_{k-1} - f_{k-2} / 16`.
pub fn f(k: u32) -> Result<Exact, OcsError> {
    if k > F_MAX_K {
        return Err(OcsError::KOutOfRange(k));
    }
    let sixteenth = ratio(1, 16);
    let (mut prev, mut cur) = (int(1), int(1));
    for _ in 2..=k {
        let next = &cur - &sixteenth * &prev;
        prev = std::mem::replace(&mut cur, next);
    }
    Ok(cur)
}

/// Floating-point `f_k` for any `k` (used by the LP and the OCS certificate,
/// where levels can exceed the exact cap).
pub fn f_float(k: u32) -> f64 {
    let (mut prev, mut cur) = (1.0f64, 1.0f64);
    for _ in 2..=k {
        let next = cur - prev / 16.0;
        prev = cur;
        cur = next;
    }
    cur
}

/// Upper bound on the probability that a vertex is never chosen across
/// disjoint consecutive candidacy runs of the given lengths:
/// `prod 2^-k * f_k`.
pub fn unmatched_bound(lengths: &[u32]) -> Result<Exact, OcsError> {
    if lengths.is_empty() {
        return Err(OcsError::EmptyLengths);
    }
    let mut acc = Exact::one();
    for &k in lengths {
        if k == 0 {
            return Err(OcsError::NonPositiveLength);
        }
        acc *= pow2_neg(k) * f(k)?;
    }
    Ok(acc)
}

/// `2^-k * f_k`, with `k = 0` giving 1.
pub fn single_run_bound(k: u32) -> Result<Exact, OcsError> {
    if k == 0 {
        return Ok(Exact::one());
    }
    unmatched_bound(&[k])
}

impl Tau {
    pub fn is_known(self) -> bool {
        self != Tau::Unknown
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::ScriptedBits;
    use num::Zero;

    fn run_scripted(
        state: &mut OcsState,
        pair: (usize, usize),
        bits: &[bool],
    ) -> (usize, OcsStepRecord, usize) {
        let mut src = ScriptedBits::new(bits);
        let (c, r) = ocs_select(state, pair, &mut src).unwrap();
        (c, r, src.consumed())
    }

    #[test]
    fn oblivious_m_equals_l() {
        let mut st = OcsState::new();
        // oblivious (false), m = 1 (false), l = 1 (false)
        let (c, r, used) = run_scripted(&mut st, (0, 1), &[false, false, false]);
        assert_eq!(c, 0);
        assert_eq!(used, 3);
        assert_eq!(r.kind, StepKind::Oblivious);
        assert!(r.fresh_coin_used);
        assert_eq!(st.tau(0), Tau::Matched);
        assert_eq!(st.tau(1), Tau::Unknown);
    }

    #[test]
    fn oblivious_m_differs_from_l() {
        let mut st = OcsState::new();
        st.set_tau(0, Tau::Matched);
        // m = 2, l = 1
        let (c, _, _) = run_scripted(&mut st, (0, 1), &[false, true, false]);
        assert_eq!(c, 0);
        assert_eq!(st.tau(1), Tau::Unmatched);
        assert_eq!(st.tau(0), Tau::Unknown);
    }

    #[test]
    fn adaptive_probing_matched_returns_other() {
        let mut st = OcsState::new();
        st.set_tau(0, Tau::Matched);
        st.set_tau(1, Tau::Unmatched);
        // adaptive (true), m = 1 (false); no third bit consumed
        let (c, r, used) = run_scripted(&mut st, (0, 1), &[true, false]);
        assert_eq!(c, 1);
        assert_eq!(used, 2);
        assert!(!r.fresh_coin_used);
        assert_eq!(st.tau(0), Tau::Unknown);
        assert_eq!(st.tau(1), Tau::Unknown);
        assert_eq!(st.active(), 0);
    }

    #[test]
    fn adaptive_probing_unmatched_returns_it() {
        let mut st = OcsState::new();
        st.set_tau(5, Tau::Unmatched);
        let (c, _, _) = run_scripted(&mut st, (3, 5), &[true, true]);
        assert_eq!(c, 5);
    }

    #[test]
    fn adaptive_probing_unknown_flips_fresh_coin() {
        let mut st = OcsState::new();
        let (c, r, used) = run_scripted(&mut st, (3, 5), &[true, true, true]);
        assert_eq!(used, 3);
        assert!(r.fresh_coin_used);
        assert_eq!(c, 5);
    }

    #[test]
    fn one_step_marginal_from_all_unknown() {
        let mut first = 0;
        for code in 0..8u8 {
            let bits = [code & 4 != 0, code & 2 != 0, code & 1 != 0];
            let mut st = OcsState::new();
            let mut src = ScriptedBits::new(&bits);
            let (c, _) = ocs_select(&mut st, (0, 1), &mut src).unwrap();
            if c == 0 {
                first += 1;
            }
        }
        assert_eq!(first, 4);
    }

    #[test]
    fn identical_candidates_rejected() {
        let mut st = OcsState::new();
        let bits = [false; 3];
        let mut src = ScriptedBits::new(&bits);
        assert_eq!(
            ocs_select(&mut st, (2, 2), &mut src).unwrap_err(),
            OcsError::IdenticalCandidates(2)
        );
    }

    #[test]
    fn f_table_values() {
        assert_eq!(f(0).unwrap(), int(1));
        assert_eq!(f(1).unwrap(), int(1));
        assert_eq!(f(2).unwrap(), ratio(15, 16));
        assert_eq!(f(3).unwrap(), ratio(7, 8));
        assert_eq!(f(4).unwrap(), ratio(209, 256));
        assert_eq!(f(7).unwrap(), ratio(679, 1024));
        assert!(f(65).is_err());
        assert!((f_float(7) - 0.6630859375).abs() < 1e-15);
    }

    #[test]
    fn f_decreasing_and_positive() {
        let mut prev = f(1).unwrap();
        for k in 2..=F_MAX_K {
            let cur = f(k).unwrap();
            assert!(cur < prev, "f not decreasing at {k}");
            assert!(cur > Exact::zero(), "f not positive at {k}");
            prev = cur;
        }
    }

    #[test]
    fn bounds() {
        assert_eq!(unmatched_bound(&[1]).unwrap(), ratio(1, 2));
        assert_eq!(unmatched_bound(&[2]).unwrap(), ratio(15, 64));
        assert_eq!(unmatched_bound(&[1, 1]).unwrap(), ratio(1, 4));
        assert_eq!(unmatched_bound(&[3]).unwrap(), ratio(7, 64));
        assert_eq!(unmatched_bound(&[]).unwrap_err(), OcsError::EmptyLengths);
        assert_eq!(
            unmatched_bound(&[2, 0]).unwrap_err(),
            OcsError::NonPositiveLength
        );
        assert_eq!(single_run_bound(0).unwrap(), int(1));
    }

    #[test]
    fn transcript_is_deterministic() {
        use crate::bits::SeededBits;
        let pairs = [(0, 1), (1, 2), (0, 2), (2, 3), (0, 1)];
        let a = run_ocs_sequence(&pairs, &mut SeededBits::new(11)).unwrap();
        let b = run_ocs_sequence(&pairs, &mut SeededBits::new(11)).unwrap();
        assert_eq!(a, b);
    }
}
