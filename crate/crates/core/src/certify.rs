//! The competitive-ratio LP and online primal-dual certificates.
//!
//! The LP picks per-level dual increments `dalpha(k)` for offline vertices
//! and `beta(k)` for online vertices so that every round's dual increment is
//! paid for by its primal increment, while every edge ends up with
//! `alpha_i + beta_j >= gamma`.

use num::{Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::instances::Instance;
use crate::matcher::{Level, RoundKind, Trace};
use crate::ocs::f_float;
use crate::rational::{int, pow2_neg, ratio, to_f64, Exact};
use crate::simplex::{self, Outcome, Problem};

pub const LP_MAX_K: u32 = 64;
/// Absolute tolerance for edge entries of float-valued certificates.
pub const OCS_TOL: f64 = 1e-9;
/// Tolerance for LP constraints and per-round budgets in the OCS
/// certificate; published tables are rounded to 8 decimals.
pub const LP_ROUNDING_TOL: f64 = 1e-7;

#[derive(Debug, Error, PartialEq)]
pub enum CertifyError {
    #[error("k_max {0} out of range 1..={LP_MAX_K}")]
    KOutOfRange(u32),
    #[error("solution arrays have lengths {dalpha} and {beta}, expected {expected}")]
    SizeMismatch {
        dalpha: usize,
        beta: usize,
        expected: usize,
    },
    #[error("LP solution does not verify: {0}")]
    Unverified(String),
    #[error("malformed trace: {0}")]
    MalformedTrace(String),
    #[error("malformed LP table: {0}")]
    MalformedTable(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpSolution {
    pub gamma: f64,
    pub k_max: u32,
    pub dalpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl LpSolution {
    /// `dalpha(k)`, zero beyond `k_max`.
    pub fn dalpha_at(&self, k: u32) -> f64 {
        self.dalpha.get(k as usize).copied().unwrap_or(0.0)
    }

    /// `beta(k)`, zero beyond `k_max`.
    pub fn beta_at(&self, k: u32) -> f64 {
        self.beta.get(k as usize).copied().unwrap_or(0.0)
    }

    /// `sum_{l < k} dalpha(l)`.
    pub fn prefix_alpha(&self, k: u32) -> f64 {
        self.dalpha.iter().take(k as usize).sum()
    }

    /// Largest gamma the arrays support: the tightest of the
    /// dual-feasibility and terminal constraints.
    pub fn implied_gamma(&self) -> f64 {
        let mut s = 0.0;
        let mut g = f64::INFINITY;
        for (da, b) in self.dalpha.iter().zip(&self.beta) {
            g = g.min(s + b);
            s += da;
        }
        g.min(s)
    }
}

/// `g_k = 2^-k f_k - 2^-(k+1) f_(k+1)`: the expected primal gain of one
/// candidate in a randomized round at level `k`.
pub fn gain(k: u32) -> f64 {
    f_float(k) * 0.5f64.powi(k as i32) - f_float(k + 1) * 0.5f64.powi(k as i32 + 1)
}

fn exact_gain(k: u32) -> Exact {
    let f = |k: u32| crate::ocs::f(k).expect("k within cap");
    pow2_neg(k) * f(k) - pow2_neg(k + 1) * f(k + 1)
}

/// Greedy completion for a fixed gamma: binding dual feasibility, then the
/// largest `dalpha` the gain split allows. `None` if some `dalpha` would be
/// negative or the terminal constraint fails.
fn greedy_at(gamma: f64, k_max: u32) -> Option<(Vec<f64>, Vec<f64>)> {
    let mut s = 0.0;
    let mut dalpha = Vec::with_capacity(k_max as usize + 1);
    let mut beta = Vec::with_capacity(k_max as usize + 1);
    for k in 0..=k_max {
        let b = (gamma - s).max(0.0);
        let da = gain(k) - b / 2.0;
        if da < 0.0 {
            return None;
        }
        beta.push(b);
        dalpha.push(da);
        s += da;
    }
    (s >= gamma).then_some((dalpha, beta))
}

/// Solves the restricted ratio LP by bisection on gamma.
pub fn solve_ratio_lp(k_max: u32) -> Result<LpSolution, CertifyError> {
    if !(1..=LP_MAX_K).contains(&k_max) {
        return Err(CertifyError::KOutOfRange(k_max));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if greedy_at(mid, k_max).is_some() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let (dalpha, beta) = greedy_at(lo, k_max).expect("gamma = 0 is always feasible");
    Ok(LpSolution {
        gamma: lo,
        k_max,
        dalpha,
        beta,
    })
}

/// Exact optimum of the restricted LP by the dense simplex. Returns gamma,
/// dalpha and beta as rationals.
pub fn solve_ratio_lp_exact(k_max: u32) -> Result<(Exact, Vec<Exact>, Vec<Exact>), CertifyError> {
    if !(1..=LP_MAX_K).contains(&k_max) {
        return Err(CertifyError::KOutOfRange(k_max));
    }
    let kk = k_max as usize + 1;
    // Columns: gamma, dalpha(0..kk), beta(0..kk), then one slack per
    // inequality.
    let gamma = 0;
    let da = |k: usize| 1 + k;
    let be = |k: usize| 1 + kk + k;
    let n_ineq = kk + kk + 1 + (kk - 1);
    let n = 1 + 2 * kk + n_ineq;
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut slack = 1 + 2 * kk;
    let mut row = |coeffs: &[(usize, Exact)], slack_sign: i64, rhs: Exact| {
        let mut r = vec![Exact::zero(); n];
        for (j, c) in coeffs {
            r[*j] += c;
        }
        r[slack] = int(slack_sign);
        slack += 1;
        a.push(r);
        b.push(rhs);
    };
    for k in 0..kk {
        // dalpha(k) + beta(k)/2 + s = g_k
        row(
            &[(da(k), int(1)), (be(k), ratio(1, 2))],
            1,
            exact_gain(k as u32),
        );
    }
    for k in 0..kk {
        // sum_{l<k} dalpha(l) + beta(k) - gamma - s = 0
        let mut c: Vec<(usize, Exact)> = (0..k).map(|l| (da(l), int(1))).collect();
        c.push((be(k), int(1)));
        c.push((gamma, int(-1)));
        row(&c, -1, int(0));
    }
    {
        let mut c: Vec<(usize, Exact)> = (0..kk).map(|l| (da(l), int(1))).collect();
        c.push((gamma, int(-1)));
        row(&c, -1, int(0));
    }
    for k in 0..kk - 1 {
        // beta(k) - beta(k+1) - s = 0
        row(&[(be(k), int(1)), (be(k + 1), int(-1))], -1, int(0));
    }
    let mut c = vec![Exact::zero(); n];
    c[gamma] = int(1);
    match simplex::solve(&Problem { a, b, c }) {
        Outcome::Optimal { x, value } => Ok((
            value,
            (0..kk).map(|k| x[da(k)].clone()).collect(),
            (0..kk).map(|k| x[be(k)].clone()).collect(),
        )),
        other => unreachable!("ratio LP is feasible and bounded, got {other:?}"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintCheck {
    pub name: &'static str,
    pub k: u32,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpReport {
    pub gamma: f64,
    pub tol: f64,
    pub constraints: Vec<ConstraintCheck>,
    /// Constraints with `|slack| <= tol`.
    pub binding: Vec<ConstraintCheck>,
    /// Constraints with `slack < -tol`.
    pub violated: Vec<ConstraintCheck>,
    pub passed: bool,
}

pub fn verify_lp_solution(sol: &LpSolution, tol: f64) -> Result<LpReport, CertifyError> {
    let expected = sol.k_max as usize + 1;
    if sol.dalpha.len() != expected || sol.beta.len() != expected {
        return Err(CertifyError::SizeMismatch {
            dalpha: sol.dalpha.len(),
            beta: sol.beta.len(),
            expected,
        });
    }
    let mut cs = Vec::new();
    let mut push = |name, k, slack| cs.push(ConstraintCheck { name, k, slack });
    let mut s = 0.0;
    for k in 0..=sol.k_max {
        let (da, b) = (sol.dalpha[k as usize], sol.beta[k as usize]);
        push("gain-split", k, gain(k) - da - b / 2.0);
        push("dual-feasibility", k, s + b - sol.gamma);
        push("nonnegative-dalpha", k, da);
        push("nonnegative-beta", k, b);
        if k < sol.k_max {
            push("monotone-beta", k, b - sol.beta[k as usize + 1]);
        }
        s += da;
    }
    push("terminal", sol.k_max, s - sol.gamma);
    let binding = cs
        .iter()
        .filter(|c| c.slack.abs() <= tol)
        .cloned()
        .collect();
    let violated: Vec<ConstraintCheck> = cs.iter().filter(|c| c.slack < -tol).cloned().collect();
    Ok(LpReport {
        gamma: sol.gamma,
        tol,
        passed: violated.is_empty(),
        constraints: cs,
        binding,
        violated,
    })
}

/// Published approximately optimal solution of the `k_max = 7` LP:
/// `(k, f_k, dalpha, beta)`.
pub const TABLE1: [(u32, f64, f64, f64); 8] = [
    (0, 1.00000000, 0.24744702, 0.50510596),
    (1, 1.00000000, 0.13679553, 0.25765895),
    (2, 0.93750000, 0.06456829, 0.12086342),
    (3, 0.87500000, 0.03020205, 0.05629513),
    (4, 0.81640625, 0.01417514, 0.02609308),
    (5, 0.76171875, 0.00674016, 0.01191794),
    (6, 0.71069336, 0.00333533, 0.00517779),
    (7, 0.66308594, 0.00184246, 0.00184246),
];
pub const TABLE1_GAMMA: f64 = 0.5051;

pub fn table1_solution() -> LpSolution {
    LpSolution {
        gamma: TABLE1_GAMMA,
        k_max: 7,
        dalpha: TABLE1.iter().map(|r| r.2).collect(),
        beta: TABLE1.iter().map(|r| r.3).collect(),
    }
}

/// CSV with columns `k,f_k,dalpha,beta`.
pub fn lp_to_csv(sol: &LpSolution) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["k", "f_k", "dalpha", "beta"])
        .expect("in-memory write");
    for k in 0..=sol.k_max {
        w.write_record([
            k.to_string(),
            format!("{:.8}", f_float(k)),
            format!("{:.8}", sol.dalpha[k as usize]),
            format!("{:.8}", sol.beta[k as usize]),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

/// Reads a `k,f_k,dalpha,beta` table. Rows must be `k = 0, 1, ...` in
/// order and `f_k` must agree with the recurrence to 8 decimals. Gamma is
/// set to the largest value the table supports.
pub fn lp_from_csv(text: &str) -> Result<LpSolution, CertifyError> {
    let bad = |m: String| CertifyError::MalformedTable(m);
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["k", "f_k", "dalpha", "beta"] {
        return Err(bad(format!("unexpected header {headers:?}")));
    }
    let mut dalpha = Vec::new();
    let mut beta = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |i: usize| -> Result<f64, CertifyError> {
            rec.get(i)
                .ok_or_else(|| bad(format!("row {row}: missing column {i}")))?
                .trim()
                .parse::<f64>()
                .map_err(|e| bad(format!("row {row}: {e}")))
        };
        let k: u32 = rec[0]
            .trim()
            .parse()
            .map_err(|e| bad(format!("row {row}: {e}")))?;
        if k as usize != row {
            return Err(bad(format!("row {row} has k = {k}")));
        }
        if (num(1)? - f_float(k)).abs() > 5e-9 {
            return Err(bad(format!("f_{k} column disagrees with the recurrence")));
        }
        dalpha.push(num(2)?);
        beta.push(num(3)?);
    }
    if dalpha.len() < 2 {
        return Err(bad("need at least two rows".into()));
    }
    let mut sol = LpSolution {
        gamma: 0.0,
        k_max: dalpha.len() as u32 - 1,
        dalpha,
        beta,
    };
    sol.gamma = sol.implied_gamma();
    Ok(sol)
}

/// Values a certificate can be computed in.
pub trait CertValue: Clone + PartialOrd + std::fmt::Debug {
    fn to_json(&self) -> serde_json::Value;
}

impl CertValue for Exact {
    fn to_json(&self) -> serde_json::Value {
        serde_json::Value::String(self.to_string())
    }
}

impl CertValue for f64 {
    fn to_json(&self) -> serde_json::Value {
        serde_json::json!(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeEntry<T> {
    pub offline: usize,
    pub online: usize,
    /// `alpha_i + beta_j` right after `j`'s round.
    pub value: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualCertificate<T> {
    pub instance: String,
    pub offline_ids: Vec<String>,
    pub online_ids: Vec<String>,
    pub gamma: T,
    pub alpha: Vec<T>,
    pub beta: Vec<T>,
    pub x: Vec<T>,
    pub primal: T,
    pub dual: T,
    pub entries: Vec<EdgeEntry<T>>,
    pub violations: Vec<String>,
}

impl<T: CertValue> DualCertificate<T> {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn min_entry(&self) -> Option<&T> {
        self.entries
            .iter()
            .map(|e| &e.value)
            .min_by(|a, b| a.partial_cmp(b).expect("comparable"))
    }

    pub fn to_json(&self) -> String {
        let v = |xs: &[T]| xs.iter().map(CertValue::to_json).collect::<Vec<_>>();
        let doc = serde_json::json!({
            "instance": self.instance,
            "gamma": self.gamma.to_json(),
            "primal": self.primal.to_json(),
            "dual": self.dual.to_json(),
            "passed": self.passed(),
            "alpha": v(&self.alpha),
            "beta": v(&self.beta),
            "x": v(&self.x),
            "edges": self.entries.iter().map(|e| serde_json::json!({
                "offline": self.offline_ids[e.offline],
                "online": self.online_ids[e.online],
                "value": e.value.to_json(),
            })).collect::<Vec<_>>(),
            "violations": self.violations,
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("certificate serializes");
        s.push('\n');
        s
    }
}

/// Replays `trace` against `inst` and checks that every round is consistent
/// with two-choice greedy for some tie-break. Returns the level of every
/// offline vertex before each round.
fn replay(inst: &Instance, trace: &Trace) -> Result<Vec<Vec<Level>>, CertifyError> {
    let bad = |m: String| Err(CertifyError::MalformedTrace(m));
    if trace.offline_ids != inst.offline {
        return bad("offline vertices differ from the instance".into());
    }
    if trace.rounds.len() != inst.n_online() {
        return bad(format!(
            "{} rounds for {} arrivals",
            trace.rounds.len(),
            inst.n_online()
        ));
    }
    let mut levels = vec![Level::Finite(0); inst.n_offline()];
    let mut before = Vec::with_capacity(trace.rounds.len());
    for (j, (round, arrival)) in trace.rounds.iter().zip(&inst.arrivals).enumerate() {
        before.push(levels.clone());
        if round.online != j {
            return bad(format!("round {j} refers to arrival {}", round.online));
        }
        let k_min = arrival
            .neighbors
            .iter()
            .map(|&i| levels[i])
            .min()
            .unwrap_or(Level::Infinite);
        if round.k_min != k_min {
            return bad(format!(
                "round {j}: k_min {} but replay gives {k_min}",
                round.k_min
            ));
        }
        let at_min = arrival
            .neighbors
            .iter()
            .filter(|&&i| k_min.is_finite() && levels[i] == k_min)
            .count();
        let cands_ok = round
            .candidates
            .iter()
            .all(|&i| arrival.neighbors.contains(&i) && levels[i] == k_min);
        if !cands_ok {
            return bad(format!(
                "round {j}: candidates are not minimal-level neighbors"
            ));
        }
        let chosen_ok = match round.chosen {
            Some(c) => round.candidates.contains(&c),
            None => round.kind == RoundKind::Unmatched,
        };
        if !chosen_ok {
            return bad(format!("round {j}: chosen vertex is not a candidate"));
        }
        match round.kind {
            RoundKind::Unmatched => {
                if at_min != 0 || !round.candidates.is_empty() {
                    return bad(format!("round {j}: unmatched round with a finite neighbor"));
                }
            }
            RoundKind::Deterministic => {
                if at_min != 1 || round.candidates.len() != 1 {
                    return bad(format!(
                        "round {j}: deterministic round needs exactly one candidate"
                    ));
                }
                levels[round.candidates[0]] = Level::Infinite;
            }
            RoundKind::Randomized => {
                let (c1, c2) = match round.candidates[..] {
                    [a, b] if a != b => (a, b),
                    _ => return bad(format!("round {j}: randomized round needs two candidates")),
                };
                let k = k_min.finite().expect("at_min >= 2 implies finite");
                levels[c1] = Level::Finite(k + 1);
                levels[c2] = Level::Finite(k + 1);
            }
        }
    }
    if levels != trace.final_levels {
        return bad("final levels disagree with the replay".into());
    }
    Ok(before)
}

/// Certificate for independent coins with gamma = 1/2, in exact arithmetic.
pub fn dual_certify_vanilla(
    inst: &Instance,
    trace: &Trace,
) -> Result<DualCertificate<Exact>, CertifyError> {
    let before = replay(inst, trace)?;
    let n = inst.n_offline();
    let gamma = ratio(1, 2);
    let mut alpha = vec![Exact::zero(); n];
    let mut x = vec![Exact::zero(); n];
    let mut beta = vec![Exact::zero(); inst.n_online()];
    let mut primal = Exact::zero();
    let mut dual = Exact::zero();
    let mut entries = Vec::new();
    let mut violations = Vec::new();
    for (j, round) in trace.rounds.iter().enumerate() {
        match (round.kind, round.k_min) {
            (RoundKind::Randomized, Level::Finite(k)) => {
                for &i in &round.candidates {
                    alpha[i] += pow2_neg(k + 2);
                    x[i] += pow2_neg(k + 1);
                }
                beta[j] = pow2_neg(k + 1);
                primal += pow2_neg(k);
                dual += pow2_neg(k + 1) + pow2_neg(k + 1);
            }
            (RoundKind::Deterministic, Level::Finite(k)) => {
                let i = round.candidates[0];
                alpha[i] += pow2_neg(k + 1);
                x[i] += pow2_neg(k);
                beta[j] = pow2_neg(k + 1);
                primal += pow2_neg(k);
                dual += pow2_neg(k);
            }
            _ => beta[j] = Exact::zero(),
        }
        if primal != dual {
            violations.push(format!("round {j}: primal {primal} != dual {dual}"));
        }
        let levels_after = before
            .get(j + 1)
            .cloned()
            .unwrap_or_else(|| trace.final_levels.clone());
        for (i, level) in levels_after.iter().enumerate() {
            let expect = match level {
                Level::Finite(k) => (Exact::from_integer(1.into()) - pow2_neg(*k)) / int(2),
                Level::Infinite => gamma.clone(),
            };
            if alpha[i] != expect {
                violations.push(format!(
                    "round {j}: alpha of offline {i} is {} not {expect}",
                    alpha[i]
                ));
            }
        }
        for &i in &inst.arrivals[j].neighbors {
            let value = &alpha[i] + &beta[j];
            if value < gamma {
                violations.push(format!("edge ({i},{j}): {value} < {gamma}"));
            }
            entries.push(EdgeEntry {
                offline: i,
                online: j,
                value,
            });
        }
    }
    debug_assert!(x.iter().all(|v| !v.is_negative()));
    Ok(DualCertificate {
        instance: inst.name.clone(),
        offline_ids: inst.offline.clone(),
        online_ids: inst.arrivals.iter().map(|a| a.id.clone()).collect(),
        gamma,
        alpha,
        beta,
        x,
        primal,
        dual,
        entries,
        violations,
    })
}

/// Certificate for the OCS analysis with the per-level increments of
/// `sol`. Levels above `k_max` carry zero increments.
pub fn dual_certify_ocs(
    inst: &Instance,
    trace: &Trace,
    sol: &LpSolution,
) -> Result<DualCertificate<f64>, CertifyError> {
    let report = verify_lp_solution(sol, LP_ROUNDING_TOL)?;
    if !report.passed {
        let names: Vec<String> = report
            .violated
            .iter()
            .map(|c| format!("{} at k={}", c.name, c.k))
            .collect();
        return Err(CertifyError::Unverified(names.join(", ")));
    }
    replay(inst, trace)?;
    let n = inst.n_offline();
    let total_alpha: f64 = sol.dalpha.iter().sum();
    let tail = |k: u32| -> f64 { sol.dalpha.iter().skip(k as usize).sum() };
    let xval = |level: Level| match level {
        Level::Finite(k) => 1.0 - 0.5f64.powi(k as i32) * f_float(k),
        Level::Infinite => 1.0,
    };
    let mut alpha = vec![0.0; n];
    let mut levels = vec![Level::Finite(0); n];
    let mut beta = vec![0.0; inst.n_online()];
    let mut primal = 0.0;
    let mut dual = 0.0;
    let mut entries = Vec::new();
    let mut violations = Vec::new();
    for (j, round) in trace.rounds.iter().enumerate() {
        let (mut dp, mut dd) = (0.0, 0.0);
        match (round.kind, round.k_min) {
            (RoundKind::Randomized, Level::Finite(k)) => {
                for &i in &round.candidates {
                    let next = Level::Finite(k + 1);
                    dp += xval(next) - xval(levels[i]);
                    levels[i] = next;
                    alpha[i] += sol.dalpha_at(k);
                    dd += sol.dalpha_at(k);
                }
                beta[j] = sol.beta_at(k);
            }
            (RoundKind::Deterministic, Level::Finite(k)) => {
                let i = round.candidates[0];
                dp += 1.0 - xval(levels[i]);
                levels[i] = Level::Infinite;
                alpha[i] += tail(k);
                dd += tail(k);
                beta[j] = sol.beta_at(k + 1);
            }
            _ => beta[j] = 0.0,
        }
        dd += beta[j];
        primal += dp;
        dual += dd;
        if dd > dp + LP_ROUNDING_TOL {
            violations.push(format!(
                "round {j}: dual increment {dd} exceeds primal increment {dp}"
            ));
        }
        for &i in &inst.arrivals[j].neighbors {
            let value = alpha[i] + beta[j];
            if value < sol.gamma - OCS_TOL {
                violations.push(format!("edge ({i},{j}): {value} < {}", sol.gamma));
            }
            entries.push(EdgeEntry {
                offline: i,
                online: j,
                value,
            });
        }
    }
    debug_assert!(alpha.iter().all(|&a| a <= total_alpha + OCS_TOL));
    let x = levels.iter().map(|&l| xval(l)).collect();
    Ok(DualCertificate {
        instance: inst.name.clone(),
        offline_ids: inst.offline.clone(),
        online_ids: inst.arrivals.iter().map(|a| a.id.clone()).collect(),
        gamma: sol.gamma,
        alpha,
        beta,
        x,
        primal,
        dual,
        entries,
        violations,
    })
}

/// Float view of an exact LP optimum.
pub fn exact_to_solution(
    k_max: u32,
    gamma: &Exact,
    dalpha: &[Exact],
    beta: &[Exact],
) -> LpSolution {
    LpSolution {
        gamma: to_f64(gamma),
        k_max,
        dalpha: dalpha.iter().map(to_f64).collect(),
        beta: beta.iter().map(to_f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{gen_tri_recursive, Instance};
    use crate::matcher::{run_two_choice_greedy, FirstSelector, TieBreak};

    fn single_edge() -> Instance {
        Instance::new("edge", vec!["a"], vec![("x", vec!["a"])]).unwrap()
    }

    #[test]
    fn kmax_out_of_range() {
        assert_eq!(solve_ratio_lp(0).unwrap_err(), CertifyError::KOutOfRange(0));
        assert_eq!(
            solve_ratio_lp(65).unwrap_err(),
            CertifyError::KOutOfRange(65)
        );
    }

    #[test]
    fn kmax_seven_matches_table() {
        let sol = solve_ratio_lp(7).unwrap();
        assert!(
            (sol.gamma - 0.5051).abs() < 1e-4 && sol.gamma >= 0.505,
            "{}",
            sol.gamma
        );
        assert!((sol.dalpha[0] - 0.24744702).abs() < 1e-4);
        assert!((sol.beta[0] - 0.50510596).abs() < 1e-4);
        assert!(verify_lp_solution(&sol, 1e-9).unwrap().passed);
    }

    #[test]
    fn kmax_one_by_hand() {
        let sol = solve_ratio_lp(1).unwrap();
        assert!((sol.gamma - 65.0 / 144.0).abs() < 1e-12);
        let (g, _, _) = solve_ratio_lp_exact(1).unwrap();
        assert_eq!(g, ratio(65, 144));
    }

    #[test]
    fn bisection_agrees_with_simplex() {
        for k in 1..=8 {
            let sol = solve_ratio_lp(k).unwrap();
            let (g, _, _) = solve_ratio_lp_exact(k).unwrap();
            assert!((sol.gamma - to_f64(&g)).abs() < 1e-7, "k = {k}");
        }
    }

    #[test]
    fn gamma_nondecreasing_in_kmax() {
        let mut prev = 0.0;
        for k in 1..=10 {
            let sol = solve_ratio_lp(k).unwrap();
            assert!(verify_lp_solution(&sol, 1e-9).unwrap().passed, "k = {k}");
            assert!(sol.gamma >= prev - 1e-12, "k = {k}");
            prev = sol.gamma;
        }
    }

    #[test]
    fn table_verifies_and_breaks() {
        assert!(verify_lp_solution(&table1_solution(), 1e-7).unwrap().passed);
        let mut bad = table1_solution();
        bad.beta[3] = 0.2;
        let r = verify_lp_solution(&bad, 1e-7).unwrap();
        assert!(!r.passed);
        assert!(r
            .violated
            .iter()
            .any(|c| c.name == "gain-split" && c.k == 3));
    }

    #[test]
    fn zero_solution_passes() {
        let z = LpSolution {
            gamma: 0.0,
            k_max: 3,
            dalpha: vec![0.0; 4],
            beta: vec![0.0; 4],
        };
        assert!(verify_lp_solution(&z, 0.0).unwrap().passed);
        let short = LpSolution {
            beta: vec![0.0; 3],
            ..z
        };
        assert!(matches!(
            verify_lp_solution(&short, 0.0),
            Err(CertifyError::SizeMismatch { .. })
        ));
    }

    #[test]
    fn csv_roundtrip() {
        let sol = solve_ratio_lp(7).unwrap();
        let back = lp_from_csv(&lp_to_csv(&sol)).unwrap();
        assert_eq!(back.k_max, 7);
        assert!((back.gamma - sol.gamma).abs() < 1e-7);
        assert!(lp_from_csv("k,f,dalpha,beta\n").is_err());
    }

    #[test]
    fn vanilla_single_edge() {
        let inst = single_edge();
        let t = run_two_choice_greedy(&inst, &mut FirstSelector, 0, TieBreak::Lex);
        let c = dual_certify_vanilla(&inst, &t).unwrap();
        assert!(c.passed());
        assert_eq!(c.alpha, vec![ratio(1, 2)]);
        assert_eq!(c.beta, vec![ratio(1, 2)]);
        assert_eq!(c.primal, int(1));
        assert_eq!(c.dual, int(1));
    }

    #[test]
    fn ocs_single_edge() {
        let inst = single_edge();
        let t = run_two_choice_greedy(&inst, &mut FirstSelector, 0, TieBreak::Lex);
        let sol = table1_solution();
        let c = dual_certify_ocs(&inst, &t, &sol).unwrap();
        assert!(c.passed(), "{:?}", c.violations);
        assert!((c.alpha[0] - 0.5051).abs() < 1e-4);
        assert!((c.beta[0] - 0.25765895).abs() < 1e-9);
    }

    #[test]
    fn tri_recursive_two_certifies() {
        let inst = gen_tri_recursive(2).unwrap();
        let t = run_two_choice_greedy(&inst, &mut FirstSelector, 0, TieBreak::ReverseLex);
        let c = dual_certify_ocs(&inst, &t, &table1_solution()).unwrap();
        assert!(c.passed(), "{:?}", c.violations);
        assert!(*c.min_entry().unwrap() >= 0.505);
        assert!(dual_certify_vanilla(&inst, &t).unwrap().passed());
    }

    #[test]
    fn levels_beyond_kmax() {
        // Four pairs on a,b push both to level 4 > k_max = 1.
        let arr: Vec<(String, Vec<&str>)> =
            (0..4).map(|t| (format!("j{t}"), vec!["a", "b"])).collect();
        let inst = Instance::new("deep", vec!["a", "b"], arr).unwrap();
        let t = run_two_choice_greedy(&inst, &mut FirstSelector, 0, TieBreak::Lex);
        let sol = solve_ratio_lp(1).unwrap();
        let c = dual_certify_ocs(&inst, &t, &sol).unwrap();
        assert!(c.passed(), "{:?}", c.violations);
    }

    #[test]
    fn unverified_solution_rejected() {
        let inst = single_edge();
        let t = run_two_choice_greedy(&inst, &mut FirstSelector, 0, TieBreak::Lex);
        let mut bad = table1_solution();
        bad.beta[3] = 0.2;
        assert!(matches!(
            dual_certify_ocs(&inst, &t, &bad),
            Err(CertifyError::Unverified(_))
        ));
    }

    #[test]
    fn tampered_trace_rejected() {
        let inst = gen_tri_recursive(1).unwrap();
        let mut t = run_two_choice_greedy(&inst, &mut FirstSelector, 0, TieBreak::Lex);
        t.rounds[0].chosen = Some(2);
        if t.rounds[0].candidates.contains(&2) {
            t.rounds[0].candidates = vec![0, 1];
        }
        assert!(matches!(
            dual_certify_vanilla(&inst, &t),
            Err(CertifyError::MalformedTrace(_))
        ));
        let mut t = run_two_choice_greedy(&inst, &mut FirstSelector, 0, TieBreak::Lex);
        t.rounds.pop();
        assert!(dual_certify_vanilla(&inst, &t).is_err());
    }
}
