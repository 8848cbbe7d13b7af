//! Two-choice greedy.
//!
//! On each arrival the matcher looks at the neighbors with the smallest
//! finite candidacy level. Two or more of them make a randomized round (the
//! first two in tie-break order go to the selector), exactly one makes a
//! deterministic round, none leaves the arrival unmatched.
//!
//! Round classification never depends on the selector's answers, so the
//! candidate-pair sequence of a run is a deterministic function of the
//! instance and tie-break. The exact engines here rely on that.

use std::fmt;
use std::str::FromStr;

use num::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::bits::{BitSource, SeededBits};
use crate::instances::Instance;
use crate::rational::{int, pow2_neg, ratio, Exact};

/// Candidacy level `k_i`: number of randomized rounds a vertex was a
/// candidate in, or infinite once it was chosen in a deterministic round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    Finite(u32),
    Infinite,
}

impl Level {
    pub fn finite(self) -> Option<u32> {
        match self {
            Level::Finite(k) => Some(k),
            Level::Infinite => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Level::Finite(_))
    }
}

impl Default for Level {
    fn default() -> Self {
        Level::Finite(0)
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Level::Finite(k) => write!(f, "{k}"),
            Level::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Level {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Level::Finite(k) => s.serialize_u32(*k),
            Level::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Level {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(u32),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(k) => Ok(Level::Finite(k)),
            Raw::S(s) if s == "inf" => Ok(Level::Infinite),
            Raw::S(s) => Err(serde::de::Error::custom(format!("bad level {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoundKind {
    Randomized,
    Deterministic,
    Unmatched,
}

/// Order in which equal-level neighbors are considered. `Lex` follows the
/// instance's offline index order, `ReverseLex` the opposite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    #[default]
    Lex,
    ReverseLex,
}

impl FromStr for TieBreak {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lex" => Ok(TieBreak::Lex),
            "reverse-lex" | "reverse_lex" => Ok(TieBreak::ReverseLex),
            _ => Err(format!(
                "unknown tie-break {s:?} (expected lex or reverse-lex)"
            )),
        }
    }
}

impl fmt::Display for TieBreak {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TieBreak::Lex => "lex",
            TieBreak::ReverseLex => "reverse-lex",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundOutcome {
    /// Index of the arrival in the instance.
    pub online: usize,
    pub kind: RoundKind,
    /// 0, 1 or 2 offline indices; for randomized rounds `(i1, i2)` in order.
    pub candidates: Vec<usize>,
    pub chosen: Option<usize>,
    pub k_min: Level,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub instance: String,
    pub offline_ids: Vec<String>,
    pub online_ids: Vec<String>,
    pub rounds: Vec<RoundOutcome>,
    pub final_levels: Vec<Level>,
    /// Offline vertices chosen at least once.
    pub matched_size: usize,
}

impl Trace {
    /// Candidate pairs of the randomized rounds, in order.
    pub fn pair_sequence(&self) -> Vec<(usize, usize)> {
        self.rounds
            .iter()
            .filter(|r| r.kind == RoundKind::Randomized)
            .map(|r| (r.candidates[0], r.candidates[1]))
            .collect()
    }

    pub fn randomized_rounds(&self) -> usize {
        self.rounds
            .iter()
            .filter(|r| r.kind == RoundKind::Randomized)
            .count()
    }

    /// Which offline vertices were chosen at least once.
    pub fn matched(&self) -> Vec<bool> {
        let mut m = vec![false; self.offline_ids.len()];
        for r in &self.rounds {
            if let Some(c) = r.chosen {
                m[c] = true;
            }
        }
        m
    }

    /// JSON-style export with one record per round.
    pub fn to_records(&self) -> Vec<TraceRecord> {
        self.rounds
            .iter()
            .enumerate()
            .map(|(t, r)| TraceRecord {
                round_index: t,
                online_id: self.online_ids[r.online].clone(),
                kind: r.kind,
                candidates: r
                    .candidates
                    .iter()
                    .map(|&i| self.offline_ids[i].clone())
                    .collect(),
                chosen: r.chosen.map(|i| self.offline_ids[i].clone()),
                k_min: r.k_min,
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_records()).expect("trace records serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub round_index: usize,
    pub online_id: String,
    pub kind: RoundKind,
    pub candidates: Vec<String>,
    pub chosen: Option<String>,
    pub k_min: Level,
}

/// Chooses one of two candidates in a randomized round. Implementations may
/// keep state across calls but draw randomness only from `bits`.
pub trait Selector {
    fn select(&mut self, first: usize, second: usize, bits: &mut dyn BitSource) -> usize;
}

/// Fair independent coin per round: one bit, `false` picks the first
/// candidate.
#[derive(Debug, Clone, Copy, Default)]
pub struct IndependentSelector;

impl Selector for IndependentSelector {
    fn select(&mut self, first: usize, second: usize, bits: &mut dyn BitSource) -> usize {
        independent_select(first, second, bits)
    }
}

pub fn independent_select(first: usize, second: usize, bits: &mut dyn BitSource) -> usize {
    if bits.next_bit() {
        second
    } else {
        first
    }
}

/// Always returns the first candidate; useful when only the round
/// classification matters.
#[derive(Debug, Clone, Copy, Default)]
pub struct FirstSelector;

impl Selector for FirstSelector {
    fn select(&mut self, first: usize, _second: usize, _bits: &mut dyn BitSource) -> usize {
        first
    }
}

/// Neighbors of `arrival` with minimal finite level, ordered by tie-break.
fn min_level_neighbors(
    neighbors: &[usize],
    levels: &[Level],
    tie_break: TieBreak,
) -> (Vec<usize>, Level) {
    let k_min = neighbors
        .iter()
        .map(|&i| levels[i])
        .min()
        .unwrap_or(Level::Infinite);
    if k_min == Level::Infinite {
        return (Vec::new(), k_min);
    }
    let mut b: Vec<usize> = neighbors
        .iter()
        .copied()
        .filter(|&i| levels[i] == k_min)
        .collect();
    match tie_break {
        TieBreak::Lex => b.sort_unstable(),
        TieBreak::ReverseLex => b.sort_unstable_by(|x, y| y.cmp(x)),
    }
    (b, k_min)
}

pub fn run_two_choice_greedy(
    inst: &Instance,
    selector: &mut dyn Selector,
    seed: u64,
    tie_break: TieBreak,
) -> Trace {
    let mut bits = SeededBits::new(seed);
    run_with_bits(inst, selector, &mut bits, tie_break)
}

pub fn run_with_bits(
    inst: &Instance,
    selector: &mut dyn Selector,
    bits: &mut dyn BitSource,
    tie_break: TieBreak,
) -> Trace {
    let mut levels = vec![Level::Finite(0); inst.n_offline()];
    let mut chosen_once = vec![false; inst.n_offline()];
    let mut rounds = Vec::with_capacity(inst.n_online());
    for (j, arrival) in inst.arrivals.iter().enumerate() {
        let (b, k_min) = min_level_neighbors(&arrival.neighbors, &levels, tie_break);
        let outcome = match b.len() {
            0 => RoundOutcome {
                online: j,
                kind: RoundKind::Unmatched,
                candidates: Vec::new(),
                chosen: None,
                k_min,
            },
            1 => {
                let i = b[0];
                levels[i] = Level::Infinite;
                chosen_once[i] = true;
                RoundOutcome {
                    online: j,
                    kind: RoundKind::Deterministic,
                    candidates: vec![i],
                    chosen: Some(i),
                    k_min,
                }
            }
            _ => {
                let (i1, i2) = (b[0], b[1]);
                let pick = selector.select(i1, i2, bits);
                assert!(
                    pick == i1 || pick == i2,
                    "selector returned {pick}, not one of ({i1}, {i2})"
                );
                let k = k_min.finite().expect("finite level in randomized round");
                levels[i1] = Level::Finite(k + 1);
                levels[i2] = Level::Finite(k + 1);
                chosen_once[pick] = true;
                RoundOutcome {
                    online: j,
                    kind: RoundKind::Randomized,
                    candidates: vec![i1, i2],
                    chosen: Some(pick),
                    k_min,
                }
            }
        };
        rounds.push(outcome);
    }
    Trace {
        instance: inst.name.clone(),
        offline_ids: inst.offline.clone(),
        online_ids: inst.arrivals.iter().map(|a| a.id.clone()).collect(),
        rounds,
        final_levels: levels,
        matched_size: chosen_once.iter().filter(|&&c| c).count(),
    }
}

/// Exact expected matched size under independent coins:
/// `sum_i (1 - 2^-k_i)` with `2^-inf = 0`.
pub fn exact_expected_value_vanilla(inst: &Instance, tie_break: TieBreak) -> Exact {
    let trace = run_two_choice_greedy(inst, &mut FirstSelector, 0, tie_break);
    trace
        .final_levels
        .iter()
        .map(|l| match l {
            Level::Finite(k) => Exact::one() - pow2_neg(*k),
            Level::Infinite => Exact::one(),
        })
        .fold(Exact::zero(), |acc, x| acc + x)
}

/// Fractional run of greedy with perfect negative correlation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PerfectCorrelationRun {
    /// Rounds as classified by the fractional rules; `chosen` is only set for
    /// deterministic rounds (randomized rounds split half-half).
    pub rounds: Vec<RoundOutcome>,
    /// Final `x_i` per offline vertex, each in `{0, 1/2, 1}`.
    pub x: Vec<Exact>,
    pub value: Exact,
}

/// Thought-experiment simulation where a vertex is matched for sure on its
/// second randomized candidacy. Vertices with `x = 1` leave the candidate
/// pool.
pub fn run_perfect_correlation(inst: &Instance, tie_break: TieBreak) -> PerfectCorrelationRun {
    // x in halves: 0, 1, 2
    let mut halves = vec![0u8; inst.n_offline()];
    let mut rounds = Vec::with_capacity(inst.n_online());
    for (j, arrival) in inst.arrivals.iter().enumerate() {
        let levels: Vec<Level> = halves
            .iter()
            .map(|&h| {
                if h >= 2 {
                    Level::Infinite
                } else {
                    Level::Finite(h as u32)
                }
            })
            .collect();
        let (b, k_min) = min_level_neighbors(&arrival.neighbors, &levels, tie_break);
        let outcome = match b.len() {
            0 => RoundOutcome {
                online: j,
                kind: RoundKind::Unmatched,
                candidates: Vec::new(),
                chosen: None,
                k_min,
            },
            1 => {
                halves[b[0]] = 2;
                RoundOutcome {
                    online: j,
                    kind: RoundKind::Deterministic,
                    candidates: vec![b[0]],
                    chosen: Some(b[0]),
                    k_min,
                }
            }
            _ => {
                let (i1, i2) = (b[0], b[1]);
                assert!(
                    halves[i1] == halves[i2] && halves[i1] < 2,
                    "randomized round with unequal candidate levels"
                );
                halves[i1] += 1;
                halves[i2] += 1;
                RoundOutcome {
                    online: j,
                    kind: RoundKind::Randomized,
                    candidates: vec![i1, i2],
                    chosen: None,
                    k_min,
                }
            }
        };
        rounds.push(outcome);
    }
    let x: Vec<Exact> = halves.iter().map(|&h| ratio(h as i64, 2)).collect();
    let value = x.iter().fold(int(0), |acc, v| acc + v);
    PerfectCorrelationRun { rounds, x, value }
}
