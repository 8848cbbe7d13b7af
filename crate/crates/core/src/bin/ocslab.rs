use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ocslab::bits::trial_seed;
use ocslab::certify::{self, LpSolution};
use ocslab::harness::{self, Algo, Format};
use ocslab::instances::{self, InfeasibilityVariant};
use ocslab::matcher::{run_with_bits, FirstSelector, IndependentSelector, TieBreak};
use ocslab::ocs::{single_run_bound, OcsSelector};
use ocslab::oracle::{self, PairSequence, MAX_ENUM_STEPS};
use ocslab::rational::to_f64;

const SEED_ENV: &str = "OCSLAB_SEED";

#[derive(Parser)]
#[command(
    name = "ocslab",
    version,
    about = "Two-choice greedy matching with online correlated selection"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate an instance document.
    Gen(GenArgs),
    /// Run trials of an algorithm on an instance.
    Run(RunArgs),
    /// Check the OCS guarantees on a pair sequence.
    OcsVerify(VerifyArgs),
    /// Solve the competitive-ratio LP.
    Lp(LpArgs),
    /// Show that perfect negative correlation cannot be maintained online.
    InfeasibilityCheck,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    TriRecursive,
    FiveNinths,
    InfeasibleA,
    InfeasibleB,
    Random,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    family: Family,
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    deg: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum CertifyKind {
    Vanilla,
    Ocs,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    algo: String,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "lex")]
    tie_break: TieBreak,
    #[arg(long, value_enum)]
    certify: Option<CertifyKind>,
    /// LP table (k,f_k,dalpha,beta) for the OCS certificate; defaults to
    /// the solved k_max = 7 LP.
    #[arg(long)]
    lp: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: String,
    /// Report destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Certificate destination (JSON).
    #[arg(long)]
    cert_out: Option<PathBuf>,
}

#[derive(Args)]
#[group(required = true, multiple = false, id = "mode")]
struct Mode {
    #[arg(long)]
    enumerate: bool,
    #[arg(long)]
    montecarlo: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    mode: Mode,
    #[arg(long)]
    sequence: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LpArgs {
    #[arg(long)]
    kmax: u32,
    #[arg(long)]
    verify_table: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn effective_seed(flag: u64) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .with_context(|| format!("{SEED_ENV}={v:?} is not a 64-bit unsigned integer")),
        Err(_) => Ok(flag),
    }
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn gen(a: GenArgs) -> Result<bool> {
    let seed = effective_seed(a.seed)?;
    let inst = match a.family {
        Family::TriRecursive => {
            let k = a.k.context("--k is required for tri-recursive")?;
            instances::gen_tri_recursive(k)?
        }
        Family::FiveNinths => instances::gen_five_ninths(),
        Family::InfeasibleA => instances::gen_infeasibility(InfeasibilityVariant::A),
        Family::InfeasibleB => instances::gen_infeasibility(InfeasibilityVariant::B),
        Family::Random => {
            let (Some(n), Some(m), Some(deg)) = (a.n, a.m, a.deg) else {
                bail!("--n, --m and --deg are required for random");
            };
            instances::gen_random(n, m, deg, seed)?
        }
    };
    write_or_print(Some(&a.out), &instances::serialize_instance(&inst))?;
    Ok(true)
}

fn run(a: RunArgs) -> Result<bool> {
    let seed = effective_seed(a.seed)?;
    let algo: Algo = a.algo.parse()?;
    let format: Format = a.format.parse()?;
    let inst = instances::parse_instance(&read(&a.instance)?)?;
    let stats = harness::run_trials(&inst, algo, a.trials, seed, a.tie_break)?;
    write_or_print(a.out.as_deref(), &harness::emit_report(&[stats], format)?)?;

    let Some(kind) = a.certify else {
        return Ok(true);
    };
    // The level sequence does not depend on the coins; trial 0's run is
    // used as the certified trace.
    let mut bits = ocslab::bits::SeededBits::new(trial_seed(seed, 0));
    let trace = match algo {
        Algo::Vanilla => run_with_bits(&inst, &mut IndependentSelector, &mut bits, a.tie_break),
        Algo::Ocs => run_with_bits(&inst, &mut OcsSelector::new(), &mut bits, a.tie_break),
        Algo::Perfect => run_with_bits(&inst, &mut FirstSelector, &mut bits, a.tie_break),
    };
    let (json, passed, summary) = match kind {
        CertifyKind::Vanilla => {
            let c = certify::dual_certify_vanilla(&inst, &trace)?;
            (
                c.to_json(),
                c.passed(),
                format!("gamma 1/2, {} edges", c.entries.len()),
            )
        }
        CertifyKind::Ocs => {
            let sol: LpSolution = match &a.lp {
                Some(p) => certify::lp_from_csv(&read(p)?)?,
                None => certify::solve_ratio_lp(7)?,
            };
            let c = certify::dual_certify_ocs(&inst, &trace, &sol)?;
            (
                c.to_json(),
                c.passed(),
                format!("gamma {:.8}, {} edges", sol.gamma, c.entries.len()),
            )
        }
    };
    if let Some(p) = &a.cert_out {
        fs::write(p, json).with_context(|| format!("writing {}", p.display()))?;
    }
    eprintln!(
        "certificate {}: {summary}",
        if passed { "passed" } else { "FAILED" }
    );
    Ok(passed)
}

#[derive(Serialize)]
struct McRow {
    vertex: String,
    k: u32,
    empirical_unmatched: f64,
    std_err: f64,
    reference: f64,
    reference_kind: &'static str,
    within_4_sigma: bool,
}

#[derive(Serialize)]
struct McReport {
    steps: usize,
    trials: u64,
    seed: u64,
    rows: Vec<McRow>,
    marginals_within_4_sigma: bool,
    passed: bool,
}

fn ocs_verify(a: VerifyArgs) -> Result<bool> {
    let seq = PairSequence::parse(&read(&a.sequence)?)?;
    if a.mode.enumerate {
        let report = oracle::check_lemma_bounds(&seq)?;
        let mut s = serde_json::to_string_pretty(&report)?;
        s.push('\n');
        write_or_print(a.out.as_deref(), &s)?;
        return Ok(report.passed);
    }
    let seed = effective_seed(a.seed)?;
    if a.trials == 0 {
        bail!("--trials must be positive");
    }
    let counts = oracle::monte_carlo(&seq, a.trials, seed);
    let exact = (seq.len() <= MAX_ENUM_STEPS)
        .then(|| oracle::enumerate_exact(&seq))
        .transpose()?;
    let mut rows = Vec::new();
    for (v, per_k) in counts.unchosen.iter().enumerate() {
        for (c, &count) in per_k.iter().enumerate() {
            let k = c as u32 + 1;
            let emp = count as f64 / a.trials as f64;
            let se = (emp * (1.0 - emp) / a.trials as f64).sqrt();
            let (reference, kind, ok) = match &exact {
                Some(d) => {
                    let p = 1.0 - to_f64(&d.prefix_chosen[v][c]);
                    (p, "exact", oracle::within_sigmas(count, a.trials, p, 4.0))
                }
                None => {
                    let b = to_f64(&single_run_bound(k)?);
                    (b, "bound", emp <= b + 4.0 * se.max(1.0 / a.trials as f64))
                }
            };
            rows.push(McRow {
                vertex: seq.labels[v].clone(),
                k,
                empirical_unmatched: emp,
                std_err: se,
                reference,
                reference_kind: kind,
                within_4_sigma: ok,
            });
        }
    }
    let marginals_ok = counts
        .step_first
        .iter()
        .all(|&c| oracle::within_sigmas(c, a.trials, 0.5, 4.0));
    let passed = marginals_ok && rows.iter().all(|r| r.within_4_sigma);
    let report = McReport {
        steps: seq.len(),
        trials: a.trials,
        seed,
        rows,
        marginals_within_4_sigma: marginals_ok,
        passed,
    };
    let mut s = serde_json::to_string_pretty(&report)?;
    s.push('\n');
    write_or_print(a.out.as_deref(), &s)?;
    Ok(passed)
}

fn lp(a: LpArgs) -> Result<bool> {
    let sol = certify::solve_ratio_lp(a.kmax)?;
    let report = certify::verify_lp_solution(&sol, certify::OCS_TOL)?;
    fs::write(&a.out, certify::lp_to_csv(&sol))
        .with_context(|| format!("writing {}", a.out.display()))?;
    println!("k_max {} gamma {:.10}", sol.k_max, sol.gamma);
    let mut ok = report.passed;
    if let Some(p) = &a.verify_table {
        let table = certify::lp_from_csv(&read(p)?)?;
        let r = certify::verify_lp_solution(&table, certify::LP_ROUNDING_TOL)?;
        println!(
            "table {} gamma {:.8}: {}",
            p.display(),
            table.gamma,
            if r.passed { "pass" } else { "fail" }
        );
        for c in &r.violated {
            println!("  violated {} at k={} (slack {:.3e})", c.name, c.k, c.slack);
        }
        ok &= r.passed;
    }
    Ok(ok)
}

fn infeasibility_check() -> Result<bool> {
    let report = oracle::perfect_correlation_feasibility();
    let mut s = serde_json::to_string_pretty(&report)?;
    s.push('\n');
    print!("{s}");
    Ok(report.as_expected())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Gen(a) => gen(a),
        Cmd::Run(a) => run(a),
        Cmd::OcsVerify(a) => ocs_verify(a),
        Cmd::Lp(a) => lp(a),
        Cmd::InfeasibilityCheck => infeasibility_check(),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
