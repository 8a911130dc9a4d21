use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kdissim::{generate_table, parse_newick, parse_table, IndexFamily};

const T0: &str = "((1:2,2:3):4,3:-1,4:5);\n";

fn kdissim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kdissim")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes the T0 table of `family` and returns its path.
fn t0_table(dir: &Path, family: &str) -> PathBuf {
    let tree = write(dir, "t0.nwk", T0);
    let out = dir.join(format!("{}.tsv", family.replace(':', "_")));
    let o = kdissim(&["weights", s(&tree), family, "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    out
}

#[test]
fn weights_of_t0() {
    let dir = tempfile::tempdir().unwrap();
    let tree = write(dir.path(), "t0.nwk", T0);
    let o = kdissim(&["weights", s(&tree), "fixed-k-subsets:2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let values: Vec<&str> = text.lines().skip(1).map(|l| l.split('\t').nth(1).unwrap()).collect();
    assert_eq!(values, ["5", "5", "11", "6", "12", "4"]);

    let m = t0_table(dir.path(), "all-multisets:3");
    let table = parse_table(&std::fs::read_to_string(m).unwrap()).unwrap();
    assert_eq!(table.len(), 30);
    let expected = generate_table(&parse_newick(T0.trim()).unwrap(), &IndexFamily::all_multisets(4, 3)).unwrap();
    assert_eq!(table, expected);
}

#[test]
fn malformed_newick_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.nwk", "((1:2,2:3:4,3:-1,4:5);");
    let o = kdissim(&["weights", s(&bad), "all-subsets"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.nwk") && err.contains("byte"), "{err}");
    let o = kdissim(&["weights", s(&bad), "pairs"]);
    assert_eq!(o.status.code(), Some(2));
    let o = kdissim(&["weights", s(&dir.path().join("missing.nwk")), "all-subsets"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn check_accepts_t0_and_names_the_pair() {
    let dir = tempfile::tempdir().unwrap();
    let table = t0_table(dir.path(), "all-subsets");
    let o = kdissim(&["check", s(&table)]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("PAIR alpha={1,2} beta={3,4}"), "{out}");
    assert!(out.lines().any(|l| l.starts_with("CONDITION Doubling2 PASS")), "{out}");
    assert!(out.contains("RESULT realizable"));
}

#[test]
fn check_rejects_a_perturbed_table_with_a_replayable_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let table = t0_table(dir.path(), "all-subsets");
    let text = std::fs::read_to_string(&table).unwrap().replace("1,2,3\t8", "1,2,3\t9");
    let bumped = write(dir.path(), "bumped.tsv", &text);
    let o = kdissim(&["check", s(&bumped)]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("RESULT not realizable"));
    assert!(out.lines().any(|l| l.starts_with("CONDITION ") && l.contains(" FAIL ")), "{out}");
    let parsed = parse_table(&text).unwrap();
    let report = kdissim::check_realizability(&parsed);
    assert!(report.certificate().unwrap().replays_on(&parsed));
    assert!(out.contains(&report.certificate().unwrap().to_string().lines().next().unwrap().to_string()));
}

#[test]
fn strict_signs_note_the_anchor_discrepancy() {
    let dir = tempfile::tempdir().unwrap();
    let table = t0_table(dir.path(), "fixed-k-multisets:3");
    assert_eq!(kdissim(&["check", s(&table)]).status.code(), Some(0));
    let o = kdissim(&["check", "--strict-paper-signs", s(&table)]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(
        out.contains("DISCREPANCY AnchorK3 labels=[1, 3] printed identity gives -5 vs 3 (A={2} B={4} D={2} delta=2)"),
        "{out}"
    );
}

#[test]
fn incomplete_table_lists_missing_indices() {
    let dir = tempfile::tempdir().unwrap();
    let table = t0_table(dir.path(), "all-subsets");
    let text: String = std::fs::read_to_string(&table).unwrap().lines().take(5).map(|l| format!("{l}\n")).collect();
    let partial = write(dir.path(), "partial.tsv", &text);
    let o = kdissim(&["check", s(&partial)]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("7 missing indices") && err.contains("{1,2,3,4}"), "{err}");
}

#[test]
fn reconstruct_writes_a_weight_equal_tree() {
    let dir = tempfile::tempdir().unwrap();
    let table = t0_table(dir.path(), "all-subsets");
    let out = dir.path().join("out.nwk");
    let o = kdissim(&["reconstruct", s(&table), "--engine", "both", "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    assert!(stdout(&o).contains("ENGINES agree"));
    let tree = parse_newick(std::fs::read_to_string(&out).unwrap().trim()).unwrap();
    let t0 = parse_newick(T0.trim()).unwrap();
    let family = IndexFamily::all_subsets(4);
    assert_eq!(generate_table(&tree, &family).unwrap(), generate_table(&t0, &family).unwrap());
    assert!(stdout(&o).lines().any(|l| l.starts_with("TRACE ")));
}

#[test]
fn reconstruct_pairs_of_multisets_with_the_linear_engine() {
    let dir = tempfile::tempdir().unwrap();
    let table = t0_table(dir.path(), "fixed-k-multisets:2");
    let o = kdissim(&["reconstruct", "--engine", "linear", s(&table)]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let newick = stdout(&o).lines().last().unwrap().to_string();
    let family = IndexFamily::fixed_k_multisets(4, 2);
    let t0 = parse_newick(T0.trim()).unwrap();
    assert_eq!(
        generate_table(&parse_newick(&newick).unwrap(), &family).unwrap(),
        generate_table(&t0, &family).unwrap()
    );
}

#[test]
fn reconstruct_reports_underdetermined_weights() {
    let dir = tempfile::tempdir().unwrap();
    let table = t0_table(dir.path(), "fixed-k-subsets:4");
    let o = kdissim(&["reconstruct", s(&table)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("UnderdeterminedWeights"));
}

#[test]
fn roundtrip_summaries() {
    let o = kdissim(&["roundtrip", "--trials", "30", "--family", "all-subsets", "--n-range", "4..9"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "30/30 pass");
    let o = kdissim(&["roundtrip", "--trials", "20", "--perturb", "--n-range", "4..7"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "20/20 detected");
    let o = kdissim(&["roundtrip", "--trials", "12", "--family", "fixed-k-multisets:2", "--engine", "both"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let first = stdout(&kdissim(&["roundtrip", "--trials", "5", "--seed", "9"]));
    assert_eq!(first, stdout(&kdissim(&["roundtrip", "--trials", "5", "--seed", "9"])));
}

#[test]
fn roundtrip_rejects_bad_flags() {
    assert_eq!(kdissim(&["roundtrip", "--n-range", "3..2"]).status.code(), Some(2));
    assert_eq!(kdissim(&["roundtrip", "--family", "fixed-k-subsets:9", "--n-range", "4..5"]).status.code(), Some(2));
    assert_eq!(kdissim(&["roundtrip", "--trials", "x"]).status.code(), Some(2));
    assert_eq!(kdissim(&["frobnicate"]).status.code(), Some(2));
}
