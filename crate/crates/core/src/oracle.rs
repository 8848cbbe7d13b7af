//! Exact oracles for the OCS and for perfect negative correlation.
//!
//! [`enumerate_exact`] walks every branch of the OCS randomness for a fixed
//! pair sequence. Each step has eight equally likely 3-bit scripts (some
//! leave the third bit unused), so after `t` steps every branch weight is an
//! integer over `8^t`. Branches are merged on (memory state, matched flags),
//! and memories of vertices that never appear again are reset to unknown
//! first, which keeps the state space small enough for `T = 14`.

use std::collections::{BTreeMap, HashMap};

use num::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::{trial_seed, ScriptedBits, SeededBits};
use crate::ocs::{self, ocs_step, OcsStepRecord, StepKind, Tau};
use crate::rational::{dyadic, int, ratio, to_f64, Exact};
use crate::simplex;

/// Longest pair sequence [`enumerate_exact`] accepts.
pub const MAX_ENUM_STEPS: usize = 14;
/// Longest sequence for which [`check_lemma_bounds`] checks every family of
/// disjoint runs; longer sequences only get single runs.
pub const MAX_FAMILY_STEPS: usize = 10;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("pair {index} has identical members {id:?}")]
    IdenticalPair { index: usize, id: String },
    #[error("sequence has {0} steps, enumeration supports at most {MAX_ENUM_STEPS}")]
    TooLong(usize),
    #[error("transcript has {transcript} steps but the graph has {nodes} nodes")]
    LengthMismatch { transcript: usize, nodes: usize },
    #[error("malformed sequence document: {0}")]
    Malformed(String),
}

/// Ordered candidate pairs over labelled offline vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSequence {
    pub labels: Vec<String>,
    pub pairs: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct SequenceDoc {
    pairs: Vec<[String; 2]>,
}

impl PairSequence {
    /// Builds a sequence from labelled pairs; vertices are indexed in order
    /// of first appearance.
    pub fn from_labels<S: AsRef<str>>(pairs: &[(S, S)]) -> Result<Self, OracleError> {
        let mut labels: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut out = Vec::with_capacity(pairs.len());
        for (t, (a, b)) in pairs.iter().enumerate() {
            let (a, b) = (a.as_ref(), b.as_ref());
            if a == b {
                return Err(OracleError::IdenticalPair {
                    index: t,
                    id: a.to_string(),
                });
            }
            let mut idx = |s: &str| {
                *index.entry(s.to_string()).or_insert_with(|| {
                    labels.push(s.to_string());
                    labels.len() - 1
                })
            };
            let ia = idx(a);
            let ib = idx(b);
            out.push((ia, ib));
        }
        Ok(Self { labels, pairs: out })
    }

    /// Sequence over unnamed vertices `0..n`, labelled by their index.
    pub fn from_indices(n: usize, pairs: &[(usize, usize)]) -> Result<Self, OracleError> {
        for (t, &(a, b)) in pairs.iter().enumerate() {
            if a == b {
                return Err(OracleError::IdenticalPair {
                    index: t,
                    id: a.to_string(),
                });
            }
        }
        let n = pairs
            .iter()
            .map(|&(a, b)| a.max(b) + 1)
            .max()
            .unwrap_or(0)
            .max(n);
        Ok(Self {
            labels: (0..n).map(|i| i.to_string()).collect(),
            pairs: pairs.to_vec(),
        })
    }

    pub fn parse(text: &str) -> Result<Self, OracleError> {
        let doc: SequenceDoc =
            serde_json::from_str(text).map_err(|e| OracleError::Malformed(e.to_string()))?;
        let pairs: Vec<(String, String)> = doc.pairs.into_iter().map(|[a, b]| (a, b)).collect();
        Self::from_labels(&pairs)
    }

    pub fn to_json(&self) -> String {
        let doc = SequenceDoc {
            pairs: self
                .pairs
                .iter()
                .map(|&(a, b)| [self.labels[a].clone(), self.labels[b].clone()])
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("sequence serializes");
        s.push('\n');
        s
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn n_vertices(&self) -> usize {
        self.labels.len()
    }

    /// Steps (0-based) at which each vertex is a candidate.
    pub fn candidacies(&self) -> Vec<Vec<usize>> {
        let mut c = vec![Vec::new(); self.n_vertices()];
        for (t, &(a, b)) in self.pairs.iter().enumerate() {
            c[a].push(t);
            c[b].push(t);
        }
        c
    }
}

/// The seven-pair example over offline vertices `a..e` used to illustrate
/// the dependence graphs. Vertex `a` is a candidate at steps 1, 3, 5, 7 and
/// `c` at steps 2, 3, 7, so the arcs touching `a` are (1,3), (3,5), (5,7)
/// and (3,7), the last one labelled `c`.
pub fn figure1_sequence() -> PairSequence {
    PairSequence::from_labels(&[
        ("a", "b"),
        ("b", "c"),
        ("a", "c"),
        ("b", "d"),
        ("a", "d"),
        ("d", "e"),
        ("a", "c"),
    ])
    .expect("static sequence is valid")
}

/// Arc between two steps (0-based) sharing `vertex` with no candidacy of
/// that vertex in between.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Arc {
    pub from: usize,
    pub to: usize,
    pub vertex: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependenceGraph {
    pub nodes: usize,
    pub arcs: Vec<Arc>,
}

impl DependenceGraph {
    pub fn out_degree(&self, t: usize) -> usize {
        self.arcs.iter().filter(|a| a.from == t).count()
    }

    pub fn in_degree(&self, t: usize) -> usize {
        self.arcs.iter().filter(|a| a.to == t).count()
    }
}

pub fn ex_ante_graph(seq: &PairSequence) -> DependenceGraph {
    let mut arcs: Vec<Arc> = seq
        .candidacies()
        .iter()
        .enumerate()
        .flat_map(|(v, steps)| {
            steps.windows(2).map(move |w| Arc {
                from: w[0],
                to: w[1],
                vertex: v,
            })
        })
        .collect();
    arcs.sort();
    DependenceGraph {
        nodes: seq.len(),
        arcs,
    }
}

/// Arcs realized by a transcript: the tail must be an oblivious step probing
/// the arc's vertex and the head an adaptive step probing it.
pub fn ex_post_arcs(
    graph: &DependenceGraph,
    transcript: &[OcsStepRecord],
) -> Result<Vec<Arc>, OracleError> {
    if transcript.len() != graph.nodes {
        return Err(OracleError::LengthMismatch {
            transcript: transcript.len(),
            nodes: graph.nodes,
        });
    }
    Ok(graph
        .arcs
        .iter()
        .copied()
        .filter(|arc| {
            let tail = &transcript[arc.from];
            let head = &transcript[arc.to];
            tail.kind == StepKind::Oblivious
                && tail.probed() == arc.vertex
                && head.kind == StepKind::Adaptive
                && head.probed() == arc.vertex
        })
        .collect())
}

/// One enumerated branch of a single step: whether the first candidate was
/// returned and the new memories of both candidates.
#[derive(Debug, Clone, Copy)]
struct Branch {
    first: bool,
    tau_first: Tau,
    tau_second: Tau,
}

fn tau_code(t: Tau) -> u64 {
    match t {
        Tau::Unknown => 0,
        Tau::Matched => 1,
        Tau::Unmatched => 2,
    }
}

fn tau_from_code(c: u64) -> Tau {
    match c {
        1 => Tau::Matched,
        2 => Tau::Unmatched,
        _ => Tau::Unknown,
    }
}

/// The eight equally likely branches for every pair of incoming memories,
/// obtained by running the OCS step on each 3-bit script.
fn branch_table() -> [[Branch; 8]; 9] {
    let taus = [Tau::Unknown, Tau::Matched, Tau::Unmatched];
    let mut table = [[Branch {
        first: true,
        tau_first: Tau::Unknown,
        tau_second: Tau::Unknown,
    }; 8]; 9];
    for (a, &ta) in taus.iter().enumerate() {
        for (b, &tb) in taus.iter().enumerate() {
            for script in 0..8u8 {
                let bits = [script & 4 != 0, script & 2 != 0, script & 1 != 0];
                let mut src = ScriptedBits::new(&bits);
                let out = ocs_step((0, 1), ta, tb, &mut src);
                table[a * 3 + b][script as usize] = Branch {
                    first: out.record.l == 1,
                    tau_first: out.tau_first,
                    tau_second: out.tau_second,
                };
            }
        }
    }
    table
}

fn table_index(t1: Tau, t2: Tau) -> usize {
    tau_code(t1) as usize * 3 + tau_code(t2) as usize
}

struct Walker<'a> {
    seq: &'a PairSequence,
    table: [[Branch; 8]; 9],
    last_use: Vec<usize>,
}

impl<'a> Walker<'a> {
    fn new(seq: &'a PairSequence) -> Self {
        let mut last_use = vec![0; seq.n_vertices()];
        for (t, &(a, b)) in seq.pairs.iter().enumerate() {
            last_use[a] = t;
            last_use[b] = t;
        }
        Self {
            seq,
            table: branch_table(),
            last_use,
        }
    }

    /// Advances a weighted state map by step `t`. `tag` maps (old tag,
    /// first returned) to the new tag. Returns the weight of branches that
    /// returned the first candidate.
    fn step<K, F>(
        &self,
        t: usize,
        states: HashMap<(u64, K), u64>,
        tag: F,
    ) -> (HashMap<(u64, K), u64>, u64)
    where
        K: Copy + Eq + std::hash::Hash,
        F: Fn(K, bool) -> K,
    {
        let (a, b) = self.seq.pairs[t];
        let (sa, sb) = (2 * a as u64, 2 * b as u64);
        let mut next: HashMap<(u64, K), u64> = HashMap::with_capacity(states.len() * 2);
        let mut first_weight = 0u64;
        for ((tau, k), w) in states {
            let ta = tau_from_code((tau >> sa) & 3);
            let tb = tau_from_code((tau >> sb) & 3);
            let cleared = tau & !(3 << sa) & !(3 << sb);
            for br in &self.table[table_index(ta, tb)] {
                let na = if self.last_use[a] == t {
                    Tau::Unknown
                } else {
                    br.tau_first
                };
                let nb = if self.last_use[b] == t {
                    Tau::Unknown
                } else {
                    br.tau_second
                };
                let ntau = cleared | (tau_code(na) << sa) | (tau_code(nb) << sb);
                *next.entry((ntau, tag(k, br.first))).or_insert(0) += w;
                if br.first {
                    first_weight += w;
                }
            }
        }
        (next, first_weight)
    }
}

/// Exact outcome distribution of the OCS on a fixed pair sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution {
    pub labels: Vec<String>,
    /// Steps at which each vertex is a candidate.
    pub candidacies: Vec<Vec<usize>>,
    /// P[vertex never chosen] over the whole sequence.
    pub never_chosen: Vec<Exact>,
    /// `prefix_chosen[v][c]`: P[v chosen within its first `c + 1`
    /// candidacies].
    pub prefix_chosen: Vec<Vec<Exact>>,
    /// P[step returns its first candidate].
    pub step_first: Vec<Exact>,
    pub mass: Exact,
    /// Peak number of merged states, for diagnostics.
    pub peak_states: usize,
}

impl ExactDistribution {
    /// Expected number of vertices chosen at least once.
    pub fn expected_matched(&self) -> Exact {
        self.never_chosen
            .iter()
            .fold(Exact::zero(), |acc, p| acc + (Exact::one() - p))
    }
}

pub fn enumerate_exact(seq: &PairSequence) -> Result<ExactDistribution, OracleError> {
    let t_len = seq.len();
    if t_len > MAX_ENUM_STEPS {
        return Err(OracleError::TooLong(t_len));
    }
    let n = seq.n_vertices();
    assert!(n <= 32, "at most 32 vertices fit the packed state");
    let walker = Walker::new(seq);
    let candidacies = seq.candidacies();
    let mut prefix_chosen: Vec<Vec<Exact>> = vec![Vec::new(); n];
    let mut step_first = Vec::with_capacity(t_len);
    let mut states: HashMap<(u64, u32), u64> = HashMap::from([((0u64, 0u32), 1u64)]);
    let mut peak = 1;
    for t in 0..t_len {
        let (a, b) = seq.pairs[t];
        let (next, first_w) = walker.step(t, states, |flags, first| {
            flags | if first { 1 << a } else { 1 << b }
        });
        states = next;
        peak = peak.max(states.len());
        let exp = 3 * (t as u32 + 1);
        step_first.push(dyadic(first_w, exp));
        for v in [a, b] {
            let w: u64 = states
                .iter()
                .filter(|((_, f), _)| f & (1 << v) != 0)
                .map(|(_, w)| *w)
                .sum();
            prefix_chosen[v].push(dyadic(w, exp));
        }
    }
    let exp = 3 * t_len as u32;
    let total: u64 = states.values().sum();
    let never_chosen = (0..n)
        .map(|v| {
            let w: u64 = states
                .iter()
                .filter(|((_, f), _)| f & (1 << v) == 0)
                .map(|(_, w)| *w)
                .sum();
            dyadic(w, exp)
        })
        .collect();
    Ok(ExactDistribution {
        labels: seq.labels.clone(),
        candidacies,
        never_chosen,
        prefix_chosen,
        step_first,
        mass: dyadic(total, exp),
        peak_states: peak,
    })
}

/// Exact joint law of the per-step choices: entry `h` is the weight (over
/// `8^T`) of the history where bit `t` of `h` is set iff step `t` returned
/// its second candidate.
pub fn choice_distribution(seq: &PairSequence) -> Result<Vec<u64>, OracleError> {
    let t_len = seq.len();
    if t_len > MAX_ENUM_STEPS {
        return Err(OracleError::TooLong(t_len));
    }
    let walker = Walker::new(seq);
    let mut states: HashMap<(u64, u16), u64> = HashMap::from([((0u64, 0u16), 1u64)]);
    for t in 0..t_len {
        let (next, _) = walker.step(t, states, |h, first| if first { h } else { h | (1 << t) });
        states = next;
    }
    let mut out = vec![0u64; 1 << t_len];
    for ((_, h), w) in states {
        out[h as usize] += w;
    }
    Ok(out)
}

/// One row of the prefix bound table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub vertex: String,
    pub k: u32,
    #[serde(serialize_with = "ser_exact")]
    pub exact_unmatched: Exact,
    #[serde(serialize_with = "ser_exact")]
    pub bound: Exact,
    #[serde(serialize_with = "ser_exact")]
    pub slack: Exact,
}

fn ser_exact<S: serde::Serializer>(x: &Exact, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyViolation {
    pub vertex: String,
    /// Runs as 1-based candidacy index ranges.
    pub runs: Vec<(usize, usize)>,
    #[serde(serialize_with = "ser_exact")]
    pub exact_unmatched: Exact,
    #[serde(serialize_with = "ser_exact")]
    pub bound: Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub steps: usize,
    pub rows: Vec<BoundRow>,
    pub families_checked: u64,
    /// Smallest `bound - exact` over all families, as a float.
    pub worst_family_slack: Option<f64>,
    pub family_violations: Vec<FamilyViolation>,
    /// Steps whose first-candidate marginal is not exactly 1/2.
    pub marginal_violations: Vec<usize>,
    #[serde(serialize_with = "ser_exact")]
    pub mass: Exact,
    pub passed: bool,
}

/// `2^-k f_k` as `F_k / 2^(5k)` with `F_k = f_k 16^k`, an integer.
fn scaled_f(kmax: usize) -> Vec<u128> {
    let mut v = vec![1u128, 16u128];
    while v.len() <= kmax {
        let k = v.len();
        v.push(16 * v[k - 1] - 16 * v[k - 2]);
    }
    v
}

/// All sets of disjoint non-empty intervals over `0..k`, each as a list of
/// `(start, len)`.
fn interval_families(k: usize, f: &mut impl FnMut(&[(usize, usize)])) {
    fn rec(
        pos: usize,
        k: usize,
        cur: &mut Vec<(usize, usize)>,
        f: &mut impl FnMut(&[(usize, usize)]),
    ) {
        if pos >= k {
            if !cur.is_empty() {
                f(cur);
            }
            return;
        }
        rec(pos + 1, k, cur, f);
        for len in 1..=(k - pos) {
            cur.push((pos, len));
            rec(pos + len, k, cur, f);
            cur.pop();
        }
    }
    rec(0, k, &mut Vec::new(), f);
}

/// Exact check of the per-vertex never-chosen bounds on every candidacy
/// prefix and every family of disjoint consecutive candidacy runs, plus
/// the uniform per-step marginal.
pub fn check_lemma_bounds(seq: &PairSequence) -> Result<LemmaReport, OracleError> {
    let dist = enumerate_exact(seq)?;
    let half = ratio(1, 2);
    let marginal_violations: Vec<usize> = dist
        .step_first
        .iter()
        .enumerate()
        .filter(|(_, p)| **p != half)
        .map(|(t, _)| t)
        .collect();

    let mut rows = Vec::new();
    for (v, steps) in dist.candidacies.iter().enumerate() {
        for c in 0..steps.len() {
            let k = c as u32 + 1;
            let exact = Exact::one() - &dist.prefix_chosen[v][c];
            let bound = ocs::single_run_bound(k).expect("k >= 1 within cap");
            rows.push(BoundRow {
                vertex: seq.labels[v].clone(),
                k,
                slack: &bound - &exact,
                exact_unmatched: exact,
                bound,
            });
        }
    }

    let t_len = seq.len();
    let joint = choice_distribution(seq)?;
    let sf = scaled_f(t_len);
    let all_families = t_len <= MAX_FAMILY_STEPS;
    let mut families_checked = 0u64;
    let mut worst: Option<f64> = None;
    let mut family_violations = Vec::new();
    for (v, steps) in dist.candidacies.iter().enumerate() {
        let k = steps.len();
        if k == 0 {
            continue;
        }
        // p[mask]: weight that v is chosen exactly at the candidacies in mask.
        let mut p = vec![0u64; 1 << k];
        for (h, &w) in joint.iter().enumerate() {
            if w == 0 {
                continue;
            }
            let mut mask = 0usize;
            for (c, &t) in steps.iter().enumerate() {
                let second = (h >> t) & 1 == 1;
                let (a, b) = seq.pairs[t];
                let chosen = if second { b } else { a };
                if chosen == v {
                    mask |= 1 << c;
                }
            }
            p[mask] += w;
        }
        // Subset sums: g[u] = sum of p[m] for m subset of u.
        let mut g = p;
        for bit in 0..k {
            for u in 0..(1usize << k) {
                if u & (1 << bit) != 0 {
                    g[u] += g[u ^ (1 << bit)];
                }
            }
        }
        let full = (1usize << k) - 1;
        let exp_t = 3 * t_len as u32;
        let mut check = |runs: &[(usize, usize)]| {
            let mut mask = 0usize;
            let mut total_len = 0usize;
            let mut prod: u128 = 1;
            for &(s, len) in runs {
                mask |= ((1usize << len) - 1) << s;
                total_len += len;
                prod *= sf[len];
            }
            let num = g[full & !mask] as u128;
            // num / 2^(3T) <= prod / 2^(5L), over the common 2^(8T).
            let lhs = (num << (5 * t_len)) as i128;
            let rhs = (prod << (3 * t_len + 5 * (t_len - total_len))) as i128;
            let slack = (rhs - lhs) as f64 / 2f64.powi(8 * t_len as i32);
            families_checked += 1;
            worst = Some(worst.map_or(slack, |w: f64| w.min(slack)));
            if lhs > rhs {
                family_violations.push(FamilyViolation {
                    vertex: seq.labels[v].clone(),
                    runs: runs.iter().map(|&(s, l)| (s + 1, s + l)).collect(),
                    exact_unmatched: dyadic(num as u64, exp_t),
                    bound: Exact::new(prod.into(), (num::BigInt::one()) << (5 * total_len)),
                });
            }
        };
        if all_families {
            interval_families(k, &mut check);
        } else {
            for s in 0..k {
                for len in 1..=(k - s) {
                    check(&[(s, len)]);
                }
            }
        }
    }

    let passed = marginal_violations.is_empty()
        && family_violations.is_empty()
        && rows.iter().all(|r| r.slack >= Exact::zero())
        && dist.mass == int(1);
    Ok(LemmaReport {
        steps: t_len,
        rows,
        families_checked,
        worst_family_slack: worst,
        family_violations,
        marginal_violations,
        mass: dist.mass,
        passed,
    })
}

/// Exact probability, over all `8^T` bit scripts, that each ex-ante arc is
/// realized. Intended for short sequences (`T <= 8`).
pub fn arc_realization_exact(seq: &PairSequence) -> Vec<(Arc, Exact)> {
    let t_len = seq.len();
    assert!(
        t_len <= 8,
        "arc realization enumeration is limited to 8 steps"
    );
    let graph = ex_ante_graph(seq);
    let total_bits = 3 * t_len;
    let mut counts = vec![0u64; graph.arcs.len()];
    let mut bits = vec![false; total_bits];
    for code in 0..(1u64 << total_bits) {
        for (i, b) in bits.iter_mut().enumerate() {
            *b = (code >> i) & 1 == 1;
        }
        // Each step reads exactly 3 bits so the script is aligned per step.
        let mut state = ocs::OcsState::new();
        let transcript: Vec<OcsStepRecord> = seq
            .pairs
            .iter()
            .enumerate()
            .map(|(t, &p)| {
                let mut src = ScriptedBits::new(&bits[3 * t..3 * t + 3]);
                ocs::ocs_select(&mut state, p, &mut src)
                    .expect("valid pair")
                    .1
            })
            .collect();
        let realized = ex_post_arcs(&graph, &transcript).expect("lengths agree");
        for arc in realized {
            let idx = graph
                .arcs
                .iter()
                .position(|a| *a == arc)
                .expect("arc in graph");
            counts[idx] += 1;
        }
    }
    graph
        .arcs
        .iter()
        .zip(counts)
        .map(|(a, c)| (*a, dyadic(c, total_bits as u32)))
        .collect()
}

/// Monte Carlo estimate for one sequence: for each vertex and candidacy
/// prefix, how many trials left it unchosen.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloCounts {
    pub trials: u64,
    /// `unchosen[v][c]`: trials where v was not chosen in its first `c + 1`
    /// candidacies.
    pub unchosen: Vec<Vec<u64>>,
    /// Trials in which each step returned its first candidate.
    pub step_first: Vec<u64>,
}

pub fn monte_carlo(seq: &PairSequence, trials: u64, seed: u64) -> MonteCarloCounts {
    let cand = seq.candidacies();
    let n = seq.n_vertices();
    let t_len = seq.len();
    let zero = || MonteCarloCounts {
        trials: 0,
        unchosen: cand.iter().map(|c| vec![0; c.len()]).collect(),
        step_first: vec![0; t_len],
    };
    (0..trials)
        .into_par_iter()
        .fold(zero, |mut acc, trial| {
            let mut bits = SeededBits::new(trial_seed(seed, trial));
            let transcript = ocs::run_ocs_sequence(&seq.pairs, &mut bits).expect("valid pairs");
            let mut first_hit: Vec<Option<usize>> = vec![None; n];
            let mut seen = vec![0usize; n];
            for (t, rec) in transcript.iter().enumerate() {
                if rec.l == 1 {
                    acc.step_first[t] += 1;
                }
                let chosen = rec.returned();
                for v in [rec.pair.0, rec.pair.1] {
                    if v == chosen && first_hit[v].is_none() {
                        first_hit[v] = Some(seen[v]);
                    }
                    seen[v] += 1;
                }
            }
            for v in 0..n {
                for c in 0..cand[v].len() {
                    if first_hit[v].is_none_or(|h| h > c) {
                        acc.unchosen[v][c] += 1;
                    }
                }
            }
            acc.trials += 1;
            acc
        })
        .reduce(zero, |mut a, b| {
            a.trials += b.trials;
            for (x, y) in a.unchosen.iter_mut().zip(&b.unchosen) {
                for (p, q) in x.iter_mut().zip(y) {
                    *p += q;
                }
            }
            for (p, q) in a.step_first.iter_mut().zip(&b.step_first) {
                *p += q;
            }
            a
        })
}

/// Empirical frequency and its standard error computed from the reference
/// probability `p` (the binomial standard error at `p`).
pub fn within_sigmas(count: u64, trials: u64, p: f64, sigmas: f64) -> bool {
    let freq = count as f64 / trials as f64;
    let se = (p * (1.0 - p) / trials as f64).sqrt();
    if se == 0.0 {
        return (freq - p).abs() < 1e-12;
    }
    (freq - p).abs() <= sigmas * se
}

/// Outcome of the perfect-negative-correlation feasibility system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub variant_a: SystemResult,
    pub variant_b: SystemResult,
    pub joint: SystemResult,
}

impl FeasibilityReport {
    /// Singles feasible, joint infeasible.
    pub fn as_expected(&self) -> bool {
        matches!(self.variant_a, SystemResult::Feasible { .. })
            && matches!(self.variant_b, SystemResult::Feasible { .. })
            && matches!(self.joint, SystemResult::Infeasible { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum SystemResult {
    Feasible {
        /// Joint law of the round-5 and round-6 choices, keyed `"c5,c6"`.
        rounds_5_6: BTreeMap<String, String>,
        /// `+1` if choices (2 in round 5) and (3 in round 6) coincide
        /// almost surely, `-1` if they exclude each other, `0` otherwise.
        correlation_2_5_and_3_6: i8,
    },
    Infeasible {
        /// Constraints with non-zero weight in the Farkas certificate.
        conflicting_constraints: Vec<String>,
        certificate_verified: bool,
    },
}

struct LinearSystem {
    labels: Vec<String>,
    rows: Vec<Vec<Exact>>,
    rhs: Vec<Exact>,
}

/// Rounds 5 (`{1,2}`), 6 (`{3,4}`), 7 (`{1,3}` in variant A, `{1,4}` in
/// variant B). Variables: `p(c5,c6)` shared by both variants (decided before
/// round 7 arrives), then `z_V(c5,c6,c7)` per requested variant.
fn feasibility_system(variants: &[char]) -> (LinearSystem, usize) {
    let round5 = [1u8, 2];
    let round6 = [3u8, 4];
    let p_vars: Vec<(u8, u8)> = round5
        .iter()
        .flat_map(|&a| round6.iter().map(move |&b| (a, b)))
        .collect();
    let mut z_vars: Vec<(char, u8, u8, u8)> = Vec::new();
    for &v in variants {
        let round7 = if v == 'A' { [1u8, 3] } else { [1u8, 4] };
        for &(a, b) in &p_vars {
            for &c in &round7 {
                z_vars.push((v, a, b, c));
            }
        }
    }
    let nvars = p_vars.len() + z_vars.len();
    let zidx = |i: usize| p_vars.len() + i;
    let mut sys = LinearSystem {
        labels: Vec::new(),
        rows: Vec::new(),
        rhs: Vec::new(),
    };
    let mut push = |label: String, coeffs: Vec<(usize, i64)>, rhs: Exact| {
        let mut row = vec![Exact::zero(); nvars];
        for (j, c) in coeffs {
            row[j] += int(c);
        }
        sys.labels.push(label);
        sys.rows.push(row);
        sys.rhs.push(rhs);
    };
    push(
        "rounds 5,6: total probability 1".into(),
        (0..p_vars.len()).map(|j| (j, 1)).collect(),
        int(1),
    );
    push(
        "round 5: offline 1 chosen w.p. 1/2".into(),
        p_vars
            .iter()
            .enumerate()
            .filter(|(_, &(a, _))| a == 1)
            .map(|(j, _)| (j, 1))
            .collect(),
        ratio(1, 2),
    );
    push(
        "round 6: offline 3 chosen w.p. 1/2".into(),
        p_vars
            .iter()
            .enumerate()
            .filter(|(_, &(_, b))| b == 3)
            .map(|(j, _)| (j, 1))
            .collect(),
        ratio(1, 2),
    );
    for &v in variants {
        let other = if v == 'A' { 3u8 } else { 4u8 };
        for (pj, &(a, b)) in p_vars.iter().enumerate() {
            let mut coeffs: Vec<(usize, i64)> = z_vars
                .iter()
                .enumerate()
                .filter(|(_, &(vv, za, zb, _))| vv == v && za == a && zb == b)
                .map(|(i, _)| (zidx(i), 1))
                .collect();
            coeffs.push((pj, -1));
            push(
                format!("variant {v}: round 7 policy given rounds 5,6 = ({a},{b})"),
                coeffs,
                int(0),
            );
        }
        push(
            format!("variant {v}: round 7 offline 1 chosen w.p. 1/2"),
            z_vars
                .iter()
                .enumerate()
                .filter(|(_, &(vv, _, _, c))| vv == v && c == 1)
                .map(|(i, _)| (zidx(i), 1))
                .collect(),
            ratio(1, 2),
        );
        // Perfect negative correlation: each offline vertex shared by two
        // randomized rounds is chosen in exactly one of them.
        push(
            format!("variant {v}: offline 1 chosen exactly once in rounds 5 and 7"),
            z_vars
                .iter()
                .enumerate()
                .filter(|(_, &(vv, a, _, c))| vv == v && ((a == 1) == (c == 1)))
                .map(|(i, _)| (zidx(i), 1))
                .collect(),
            int(0),
        );
        push(
            format!("variant {v}: offline {other} chosen exactly once in rounds 6 and 7"),
            z_vars
                .iter()
                .enumerate()
                .filter(|(_, &(vv, _, b, c))| vv == v && ((b == other) == (c == other)))
                .map(|(i, _)| (zidx(i), 1))
                .collect(),
            int(0),
        );
    }
    (sys, p_vars.len())
}

fn solve_system(variants: &[char]) -> SystemResult {
    let (sys, np) = feasibility_system(variants);
    match simplex::feasible(&sys.rows, &sys.rhs) {
        Ok(x) => {
            let keys = ["1,3", "1,4", "2,3", "2,4"];
            let p: Vec<Exact> = x[..np].to_vec();
            let positive = &p[1] + &p[2]; // (1,4) + (2,3)
            let negative = &p[0] + &p[3]; // (1,3) + (2,4)
            let corr = if positive == int(1) {
                1
            } else if negative == int(1) {
                -1
            } else {
                0
            };
            SystemResult::Feasible {
                rounds_5_6: keys
                    .iter()
                    .zip(&p)
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .collect(),
                correlation_2_5_and_3_6: corr,
            }
        }
        Err(y) => {
            let verified = simplex::check_farkas(&sys.rows, &sys.rhs, &y);
            SystemResult::Infeasible {
                conflicting_constraints: sys
                    .labels
                    .iter()
                    .zip(&y)
                    .filter(|(_, w)| !w.is_zero())
                    .map(|(l, _)| l.clone())
                    .collect(),
                certificate_verified: verified,
            }
        }
    }
}

/// Solves the perfect-negative-correlation requirements for the two
/// possible third arrivals, separately and jointly.
pub fn perfect_correlation_feasibility() -> FeasibilityReport {
    FeasibilityReport {
        variant_a: solve_system(&['A']),
        variant_b: solve_system(&['B']),
        joint: solve_system(&['A', 'B']),
    }
}

/// Floating view of a distribution, handy for reports.
pub fn never_chosen_f64(dist: &ExactDistribution) -> Vec<f64> {
    dist.never_chosen.iter().map(to_f64).collect()
}
