//! Seeded trial runner and CSV/JSON reports.
//!
//! Trial `t` of a run with seed `s` draws its bits from
//! `trial_seed(s, t)`, so results do not depend on how rayon schedules the
//! trials, and sums are accumulated in integers.

use std::fmt;
use std::str::FromStr;

use num::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::{trial_seed, SeededBits};
use crate::instances::{optimal_matching_size, Instance};
use crate::matcher::{
    exact_expected_value_vanilla, run_perfect_correlation, run_two_choice_greedy, run_with_bits,
    FirstSelector, IndependentSelector, Level, TieBreak,
};
use crate::ocs::OcsSelector;
use crate::oracle::{enumerate_exact, PairSequence, MAX_ENUM_STEPS};
use crate::rational::{to_f64, Exact};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Vanilla,
    Ocs,
    Perfect,
}

impl FromStr for Algo {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vanilla" => Ok(Algo::Vanilla),
            "ocs" => Ok(Algo::Ocs),
            "perfect" => Ok(Algo::Perfect),
            _ => Err(HarnessError::UnknownAlgo(s.to_string())),
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algo::Vanilla => "vanilla",
            Algo::Ocs => "ocs",
            Algo::Perfect => "perfect",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(HarnessError::UnknownFormat(s.to_string())),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum HarnessError {
    #[error("unknown algorithm {0:?} (expected vanilla, ocs or perfect)")]
    UnknownAlgo(String),
    #[error("unknown report format {0:?} (expected csv or json)")]
    UnknownFormat(String),
    #[error("no statistics to report")]
    EmptyReport,
    #[error("trial count must be positive for randomized algorithms")]
    NoTrials,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub instance: String,
    pub algo: Algo,
    pub trials: u64,
    pub seed: u64,
    pub mean_size: f64,
    pub std_err: f64,
    pub opt: usize,
    pub empirical_ratio: f64,
    /// Exact expected matched size as `p/q`, when an exact engine applies.
    pub exact_expectation: Option<String>,
}

impl TrialStats {
    pub fn exact(&self) -> Option<Exact> {
        self.exact_expectation
            .as_deref()
            .and_then(crate::rational::parse_exact)
    }
}

/// Exact expected matched size of two-choice greedy with the OCS, when the
/// run has at most [`MAX_ENUM_STEPS`] randomized rounds.
pub fn exact_expected_value_ocs(inst: &Instance, tie_break: TieBreak) -> Option<Exact> {
    let trace = run_two_choice_greedy(inst, &mut FirstSelector, 0, tie_break);
    let pairs = trace.pair_sequence();
    if pairs.len() > MAX_ENUM_STEPS {
        return None;
    }
    let labelled: Vec<(String, String)> = pairs
        .iter()
        .map(|&(a, b)| (a.to_string(), b.to_string()))
        .collect();
    let seq = PairSequence::from_labels(&labelled).expect("matcher pairs are distinct");
    let dist = enumerate_exact(&seq).expect("length checked");
    let mut total = Exact::zero();
    for (i, level) in trace.final_levels.iter().enumerate() {
        match level {
            Level::Infinite => total += Exact::one(),
            Level::Finite(0) => {}
            Level::Finite(_) => {
                let v = seq
                    .labels
                    .iter()
                    .position(|l| *l == i.to_string())
                    .expect("vertex with positive level appears in a pair");
                total += Exact::one() - &dist.never_chosen[v];
            }
        }
    }
    Some(total)
}

fn one_trial(inst: &Instance, algo: Algo, seed: u64, trial: u64, tie_break: TieBreak) -> u64 {
    let mut bits = SeededBits::new(trial_seed(seed, trial));
    let trace = match algo {
        Algo::Vanilla => run_with_bits(inst, &mut IndependentSelector, &mut bits, tie_break),
        Algo::Ocs => run_with_bits(inst, &mut OcsSelector::new(), &mut bits, tie_break),
        Algo::Perfect => unreachable!("perfect correlation is not sampled"),
    };
    trace.matched_size as u64
}

pub fn run_trials(
    inst: &Instance,
    algo: Algo,
    trials: u64,
    seed: u64,
    tie_break: TieBreak,
) -> Result<TrialStats, HarnessError> {
    let opt = optimal_matching_size(inst);
    let ratio_of = |mean: f64| if opt == 0 { 1.0 } else { mean / opt as f64 };
    if algo == Algo::Perfect {
        let run = run_perfect_correlation(inst, tie_break);
        let mean = to_f64(&run.value);
        return Ok(TrialStats {
            instance: inst.name.clone(),
            algo,
            trials: 0,
            seed,
            mean_size: mean,
            std_err: 0.0,
            opt,
            empirical_ratio: ratio_of(mean),
            exact_expectation: Some(run.value.to_string()),
        });
    }
    if trials == 0 {
        return Err(HarnessError::NoTrials);
    }
    let (sum, sum_sq) = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = one_trial(inst, algo, seed, t, tie_break);
            (s as u128, (s as u128) * (s as u128))
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = trials as u128;
    let mean = sum as f64 / trials as f64;
    let std_err = if trials > 1 {
        // n * sum_sq - sum^2 is exact in integers.
        let centered = (n * sum_sq - sum * sum) as f64;
        let var = centered / (trials as f64 * (trials - 1) as f64);
        (var / trials as f64).sqrt()
    } else {
        0.0
    };
    let exact = match algo {
        Algo::Vanilla => Some(exact_expected_value_vanilla(inst, tie_break)),
        Algo::Ocs => exact_expected_value_ocs(inst, tie_break),
        Algo::Perfect => unreachable!(),
    };
    Ok(TrialStats {
        instance: inst.name.clone(),
        algo,
        trials,
        seed,
        mean_size: mean,
        std_err,
        opt,
        empirical_ratio: ratio_of(mean),
        exact_expectation: exact.map(|e| e.to_string()),
    })
}

pub const CSV_HEADER: &str =
    "instance,algo,trials,seed,mean_size,std_err,opt,empirical_ratio,exact_expectation";

pub fn emit_report(stats: &[TrialStats], format: Format) -> Result<String, HarnessError> {
    if stats.is_empty() {
        return Err(HarnessError::EmptyReport);
    }
    Ok(match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for s in stats {
                w.serialize(s).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
        }
        Format::Json => {
            let mut s = serde_json::to_string_pretty(stats).expect("stats serialize");
            s.push('\n');
            s
        }
    })
}

pub fn parse_json_report(text: &str) -> Result<Vec<TrialStats>, serde_json::Error> {
    serde_json::from_str(text)
}

pub fn parse_csv_report(text: &str) -> Result<Vec<TrialStats>, csv::Error> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{gen_five_ninths, gen_tri_recursive};
    use crate::rational::{int, ratio};

    fn single_edge() -> Instance {
        Instance::new("edge", vec!["a"], vec![("x", vec!["a"])]).unwrap()
    }

    #[test]
    fn single_edge_all_algos() {
        for algo in [Algo::Vanilla, Algo::Ocs, Algo::Perfect] {
            let s = run_trials(&single_edge(), algo, 100, 1, TieBreak::Lex).unwrap();
            assert_eq!(s.mean_size, 1.0);
            assert_eq!(s.empirical_ratio, 1.0);
            assert_eq!(s.std_err, 0.0);
        }
    }

    #[test]
    fn five_ninths_perfect() {
        let s = run_trials(
            &gen_five_ninths(),
            Algo::Perfect,
            10,
            0,
            TieBreak::ReverseLex,
        )
        .unwrap();
        assert_eq!(s.mean_size, 5.0);
        assert_eq!(s.opt, 9);
        assert_eq!(s.trials, 0);
        assert_eq!(s.exact(), Some(int(5)));
    }

    #[test]
    fn tri_recursive_vanilla_exact() {
        let inst = gen_tri_recursive(3).unwrap();
        let s = run_trials(&inst, Algo::Vanilla, 2000, 7, TieBreak::ReverseLex).unwrap();
        assert_eq!(s.exact(), Some(int(14)));
        assert_eq!(s.opt, 27);
        assert!((s.mean_size - 14.0).abs() <= 4.0 * s.std_err);
    }

    #[test]
    fn ocs_exact_on_small_instance() {
        let inst = Instance::new(
            "chain",
            vec!["a", "b", "c", "d"],
            vec![
                ("x", vec!["a", "b"]),
                ("y", vec!["c", "d"]),
                ("z", vec!["a", "c"]),
            ],
        )
        .unwrap();
        let exact = exact_expected_value_ocs(&inst, TieBreak::Lex).unwrap();
        // b and d contribute 1/2 each; a and c are each missed with
        // probability at most 15/64.
        assert!(exact > ratio(5, 2));
        let s = run_trials(&inst, Algo::Ocs, 20000, 3, TieBreak::Lex).unwrap();
        assert!((s.mean_size - to_f64(&exact)).abs() <= 4.0 * s.std_err);
    }

    #[test]
    fn reports() {
        let s = run_trials(&single_edge(), Algo::Vanilla, 10, 5, TieBreak::Lex).unwrap();
        let csv = emit_report(std::slice::from_ref(&s), Format::Csv).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(parse_csv_report(&csv).unwrap(), vec![s.clone()]);
        let json = emit_report(std::slice::from_ref(&s), Format::Json).unwrap();
        assert_eq!(parse_json_report(&json).unwrap(), vec![s]);
        assert_eq!(
            emit_report(&[], Format::Csv).unwrap_err(),
            HarnessError::EmptyReport
        );
    }

    #[test]
    fn deterministic_and_parsing() {
        let inst = gen_tri_recursive(2).unwrap();
        let a = run_trials(&inst, Algo::Ocs, 500, 11, TieBreak::Lex).unwrap();
        let b = run_trials(&inst, Algo::Ocs, 500, 11, TieBreak::Lex).unwrap();
        assert_eq!(a, b);
        assert_eq!("ocs".parse::<Algo>().unwrap(), Algo::Ocs);
        assert!("greedy".parse::<Algo>().is_err());
        assert_eq!(
            run_trials(&inst, Algo::Vanilla, 0, 1, TieBreak::Lex).unwrap_err(),
            HarnessError::NoTrials
        );
    }
}
