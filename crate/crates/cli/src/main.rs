use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use kdissim::conditions::RealizabilityReport;
use kdissim::testkit::{run_trials, EngineChoice, TrialOptions, TrialSummary};
use kdissim::{
    check_realizability_with, generate_table, parse_newick, parse_table, reconstruct, serialize_newick,
    serialize_table, CheckOptions, ConditionTag, DissimilarityTable, EngineKind, FamilyShape, IndexFamily,
    TableError, ViolationCertificate,
};

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "kdissim", version, about = "k-weights of weighted trees and reconstruction from them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Writes the table of k-weights of a Newick tree.
    Weights {
        tree: PathBuf,
        /// all-subsets | all-multisets:MAXCARD | fixed-k-subsets:K | fixed-k-multisets:K
        family: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Checks whether a table is the table of some weighted tree.
    Check {
        table: PathBuf,
        /// Use the anchor identity with its original signs.
        #[arg(long)]
        strict_paper_signs: bool,
    },
    /// Reconstructs a tree from a table and writes it as Newick.
    Reconstruct {
        table: PathBuf,
        #[arg(long, value_enum, default_value_t = Engine::Constructive)]
        engine: Engine,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Random trees through table generation and reconstruction.
    Roundtrip {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Leaf counts as A..B, both ends included.
        #[arg(long, default_value = "4..9")]
        n_range: String,
        #[arg(long, default_value = "all-subsets")]
        family: String,
        /// Add one to a random entry of each table and expect rejection.
        #[arg(long)]
        perturb: bool,
        #[arg(long, value_enum, default_value_t = Engine::Constructive)]
        engine: Engine,
        /// Draw only positive edge weights.
        #[arg(long)]
        positive: bool,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Engine {
    Constructive,
    Linear,
    Both,
}

impl Engine {
    fn kinds(self) -> Vec<EngineKind> {
        match self {
            Engine::Constructive => vec![EngineKind::Constructive],
            Engine::Linear => vec![EngineKind::Linear],
            Engine::Both => vec![EngineKind::Constructive, EngineKind::Linear],
        }
    }

    fn choice(self) -> EngineChoice {
        match self {
            Engine::Constructive => EngineChoice::Constructive,
            Engine::Linear => EngineChoice::Linear,
            Engine::Both => EngineChoice::Both,
        }
    }
}

/// Failure that ends the command with a message and an exit code.
struct Exit {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> Exit {
    Exit { code: EXIT_USAGE, message: message.into() }
}

type CmdResult = Result<u8, Exit>;

fn parse_family(spec: &str) -> Result<FamilyShape, Exit> {
    let (name, arg) = match spec.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (spec, None),
    };
    let number = |what: &str| -> Result<usize, Exit> {
        arg.ok_or_else(|| usage(format!("family `{name}` needs :{what}")))?
            .parse()
            .map_err(|_| usage(format!("bad {what} in family `{spec}`")))
    };
    match name {
        "all-subsets" if arg.is_none() => Ok(FamilyShape::AllSubsets),
        "all-multisets" => Ok(FamilyShape::AllMultisets { max_card: number("MAXCARD")? }),
        "fixed-k-subsets" => Ok(FamilyShape::FixedKSubsets { k: number("K")? }),
        "fixed-k-multisets" => Ok(FamilyShape::FixedKMultisets { k: number("K")? }),
        _ => Err(usage(format!(
            "unknown family `{spec}`; expected all-subsets, all-multisets:MAXCARD, fixed-k-subsets:K or fixed-k-multisets:K"
        ))),
    }
}

fn parse_range(text: &str) -> Result<std::ops::RangeInclusive<usize>, Exit> {
    let bad = || usage(format!("bad --n-range `{text}`; expected A..B with 2 <= A <= B"));
    let (a, b) = text.split_once("..").ok_or_else(bad)?;
    let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    if a < 2 || a > b {
        return Err(bad());
    }
    Ok(a..=b)
}

fn read(path: &Path) -> Result<String, Exit> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<(), Exit> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| usage(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_table(path: &Path) -> Result<DissimilarityTable, Exit> {
    let text = read(path)?;
    parse_table(&text).map_err(|e| match e {
        TableError::IncompleteTable { missing } => {
            let list: Vec<String> = missing.iter().map(|i| i.to_string()).collect();
            usage(format!("{}: incomplete table, {} missing indices: {}", path.display(), missing.len(), list.join(" ")))
        }
        e => usage(format!("{}: {e}", path.display())),
    })
}

fn cmd_weights(tree: &Path, family: &str, output: Option<&Path>) -> CmdResult {
    let shape = parse_family(family)?;
    let tree = parse_newick(read(tree)?.trim()).map_err(|e| usage(format!("{}: {e}", tree.display())))?;
    let family = IndexFamily::with_universe(shape, tree.labels());
    let table = generate_table(&tree, &family).map_err(|e| usage(e.to_string()))?;
    write_or_print(output, &serialize_table(&table))?;
    Ok(0)
}

fn set_text(set: &std::collections::BTreeSet<kdissim::Label>) -> String {
    let parts: Vec<String> = set.iter().map(|l| l.to_string()).collect();
    format!("{{{}}}", parts.join(","))
}

/// Every anchor failure in a certificate tree.
fn anchor_failures<'c>(cert: &'c ViolationCertificate, out: &mut Vec<&'c ViolationCertificate>) {
    if cert.tag == ConditionTag::AnchorK3 {
        out.push(cert);
    }
    for n in &cert.nested {
        anchor_failures(n, out);
    }
}

fn print_report(table: &DissimilarityTable, report: &RealizabilityReport, strict: bool) {
    println!("TABLE {} entries={}", table.family(), table.len());
    if !report.exhaustive {
        println!("NOTE table is above the exhaustive search size; checked by reconstruction and verification");
    }
    for level in &report.levels {
        let classes: Vec<String> = level.classes.iter().map(set_text).collect();
        let labels: Vec<String> = level.universe.iter().map(|l| l.to_string()).collect();
        print!("PSEUDOCHERRIES level={} labels={} classes={}", level.level, labels.join(","), classes.join(" "));
        if !level.note.is_empty() {
            print!(" ({})", level.note);
        }
        println!();
    }
    for line in &report.conditions {
        println!("{line}");
    }
    if let Some((alpha, beta)) = &report.pair {
        match beta {
            Some(b) => println!("PAIR alpha={} beta={}", set_text(alpha), set_text(b)),
            None => println!("PAIR alpha={}", set_text(alpha)),
        }
    }
    match &report.outcome {
        Ok(tree) => {
            for step in &report.trace {
                println!("TRACE {step}");
            }
            println!("RESULT realizable");
            println!("TREE {}", serialize_newick(tree));
        }
        Err(cert) => {
            println!("RESULT not realizable");
            println!("{cert}");
            if strict {
                let mut anchors = Vec::new();
                anchor_failures(cert, &mut anchors);
                for a in anchors {
                    println!(
                        "DISCREPANCY AnchorK3 labels={:?} printed identity gives {} vs {} ({})",
                        a.labels, a.rhs, a.lhs, a.detail
                    );
                }
            }
        }
    }
}

fn cmd_check(path: &Path, strict: bool) -> CmdResult {
    let table = load_table(path)?;
    let options = CheckOptions { strict_paper_signs: strict, ..CheckOptions::default() };
    let report = check_realizability_with(&table, options);
    print_report(&table, &report, strict);
    Ok(if report.realizable() { 0 } else { EXIT_FAIL })
}

fn cmd_reconstruct(path: &Path, engine: Engine, output: Option<&Path>) -> CmdResult {
    let table = load_table(path)?;
    let mut trees = Vec::new();
    for kind in engine.kinds() {
        match reconstruct(&table, kind) {
            Ok(rec) => {
                println!("ENGINE {}", kind.as_str());
                for step in &rec.trace {
                    println!("TRACE {step}");
                }
                trees.push(rec.tree);
            }
            Err(cert) => {
                println!("ENGINE {} failed", kind.as_str());
                println!("{cert}");
                return Ok(EXIT_FAIL);
            }
        }
    }
    if trees.len() == 2 {
        let tables: Vec<DissimilarityTable> =
            trees.iter().map(|t| generate_table(t, table.family()).expect("reconstructed tree covers the labels")).collect();
        let agree = tables[0] == tables[1];
        println!("ENGINES {}", if agree { "agree" } else { "disagree" });
        if !agree {
            return Ok(EXIT_FAIL);
        }
    }
    let newick = serialize_newick(&trees[0]);
    match output {
        Some(p) => {
            write_or_print(Some(p), &format!("{newick}\n"))?;
            println!("TREE {newick}");
        }
        None => println!("{newick}"),
    }
    Ok(0)
}

fn print_summary(summary: &TrialSummary, perturb: bool) {
    let verb = if perturb { "detected" } else { "pass" };
    println!("{}/{} {verb}", summary.passed, summary.trials);
    if let Some(f) = summary.first_failure() {
        println!("first failing seed {} {}: {}", f.seed, f.family, f.detail);
        println!("tree {}", f.newick);
        if let Some(i) = &f.perturbed {
            println!("perturbed entry {i}");
        }
        if let Some(c) = &f.certificate {
            println!("{c}");
        }
        print!("table\n{}", f.table_text);
    }
}

fn cmd_roundtrip(
    trials: usize,
    seed: u64,
    n_range: &str,
    family: &str,
    perturb: bool,
    engine: Engine,
    positive: bool,
) -> CmdResult {
    let range = parse_range(n_range)?;
    let shape = parse_family(family)?;
    for n in range.clone() {
        IndexFamily::new(shape, n).validate().map_err(|e| usage(format!("n={n}: {e}")))?;
    }
    let options = TrialOptions { engines: engine.choice(), perturb, positive_only: positive, ..TrialOptions::default() };
    let summary = run_trials(trials, seed, range, shape, &options);
    print_summary(&summary, perturb);
    Ok(if summary.all_passed() { 0 } else { EXIT_FAIL })
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Weights { tree, family, output } => cmd_weights(&tree, &family, output.as_deref()),
        Command::Check { table, strict_paper_signs } => cmd_check(&table, strict_paper_signs),
        Command::Reconstruct { table, engine, output } => cmd_reconstruct(&table, engine, output.as_deref()),
        Command::Roundtrip { trials, seed, n_range, family, perturb, engine, positive } => {
            cmd_roundtrip(trials, seed, &n_range, &family, perturb, engine, positive)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_specs() {
        assert_eq!(parse_family("all-subsets").ok(), Some(FamilyShape::AllSubsets));
        assert_eq!(parse_family("all-multisets:3").ok(), Some(FamilyShape::AllMultisets { max_card: 3 }));
        assert_eq!(parse_family("fixed-k-subsets:2").ok(), Some(FamilyShape::FixedKSubsets { k: 2 }));
        assert_eq!(parse_family("fixed-k-multisets:3").ok(), Some(FamilyShape::FixedKMultisets { k: 3 }));
        for bad in ["all-subsets:2", "fixed-k-subsets", "fixed-k-subsets:x", "pairs"] {
            assert_eq!(parse_family(bad).err().map(|e| e.code), Some(EXIT_USAGE), "{bad}");
        }
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("4..9").ok(), Some(4..=9));
        assert_eq!(parse_range("5..5").ok(), Some(5..=5));
        for bad in ["3..2", "1..4", "4-9", "a..b"] {
            assert!(parse_range(bad).is_err(), "{bad}");
        }
    }
}
