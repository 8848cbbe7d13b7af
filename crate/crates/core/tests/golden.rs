use std::path::PathBuf;

use ocslab::certify::{self, verify_lp_solution, LP_ROUNDING_TOL};
use ocslab::instances::{
    gen_five_ninths, gen_infeasibility, gen_random, gen_tri_recursive, optimal_matching_size,
    parse_instance, serialize_instance, InfeasibilityVariant,
};
use ocslab::matcher::{
    exact_expected_value_vanilla, run_perfect_correlation, run_two_choice_greedy, FirstSelector,
    RoundKind, TieBreak,
};
use ocslab::oracle::{figure1_sequence, PairSequence};
use ocslab::rational::{int, ratio};

fn data(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "data", name]
        .iter()
        .collect();
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn generated_documents_match_golden_files() {
    let cases = [
        ("five_ninths.json", gen_five_ninths()),
        (
            "infeasible_a.json",
            gen_infeasibility(InfeasibilityVariant::A),
        ),
        (
            "infeasible_b.json",
            gen_infeasibility(InfeasibilityVariant::B),
        ),
        ("tri_recursive_k1.json", gen_tri_recursive(1).unwrap()),
        ("tri_recursive_k2.json", gen_tri_recursive(2).unwrap()),
        ("tri_recursive_k3.json", gen_tri_recursive(3).unwrap()),
        ("random_small.json", gen_random(8, 10, 3, 42).unwrap()),
    ];
    for (file, inst) in cases {
        let text = data(file);
        assert_eq!(serialize_instance(&inst), text, "{file}");
        assert_eq!(parse_instance(&text).unwrap(), inst, "{file}");
    }
}

#[test]
fn infeasibility_instances_have_the_published_shape() {
    // Arrivals 5 = {1,2}, 6 = {3,4}, then 7 = {1,3} or {1,4}.
    let a = parse_instance(&data("infeasible_a.json")).unwrap();
    let b = parse_instance(&data("infeasible_b.json")).unwrap();
    let ids = |inst: &ocslab::Instance, j: usize| -> Vec<String> {
        inst.arrivals[j]
            .neighbors
            .iter()
            .map(|&i| inst.offline[i].clone())
            .collect()
    };
    assert_eq!(ids(&a, 0), ["1", "2"]);
    assert_eq!(ids(&a, 1), ["3", "4"]);
    assert_eq!(ids(&a, 2), ["1", "3"]);
    assert_eq!(ids(&b, 2), ["1", "4"]);
}

#[test]
fn tri_recursive_one_by_hand() {
    let inst = parse_instance(&data("tri_recursive_k1.json")).unwrap();
    assert_eq!(optimal_matching_size(&inst), 3);
    let t = run_two_choice_greedy(&inst, &mut FirstSelector, 0, TieBreak::ReverseLex);
    let kinds: Vec<RoundKind> = t.rounds.iter().map(|r| r.kind).collect();
    assert_eq!(
        kinds,
        [
            RoundKind::Randomized,
            RoundKind::Deterministic,
            RoundKind::Deterministic
        ]
    );
    assert_eq!(
        exact_expected_value_vanilla(&inst, TieBreak::ReverseLex),
        int(2)
    );
}

#[test]
fn five_ninths_golden_values() {
    let inst = parse_instance(&data("five_ninths.json")).unwrap();
    assert_eq!(optimal_matching_size(&inst), 9);
    assert_eq!(
        run_perfect_correlation(&inst, TieBreak::ReverseLex).value,
        int(5)
    );
}

#[test]
fn perfect_correlation_on_infeasible_a() {
    let inst = parse_instance(&data("infeasible_a.json")).unwrap();
    let run = run_perfect_correlation(&inst, TieBreak::Lex);
    assert_eq!(run.value, int(3));
    assert_eq!(run.x, vec![int(1), ratio(1, 2), int(1), ratio(1, 2)]);
}

#[test]
fn table1_file_verifies() {
    let sol = certify::lp_from_csv(&data("table1.csv")).unwrap();
    assert_eq!(sol, {
        let mut t = certify::table1_solution();
        t.gamma = sol.gamma;
        t
    });
    assert!((sol.gamma - 0.5051).abs() < 1e-4);
    assert!(verify_lp_solution(&sol, LP_ROUNDING_TOL).unwrap().passed);
}

#[test]
fn lp_csv_for_kmax_seven_reproduces_table1() {
    let sol = certify::solve_ratio_lp(7).unwrap();
    assert_eq!(certify::lp_to_csv(&sol), data("table1.csv"));
}

#[test]
fn figure1_sequence_file() {
    let seq = PairSequence::parse(&data("figure1_sequence.json")).unwrap();
    assert_eq!(seq, figure1_sequence());
    assert_eq!(seq.to_json(), data("figure1_sequence.json"));
}
