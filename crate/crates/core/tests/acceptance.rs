//! Acceptance criteria 1 to 10. Each criterion prints one line
//! `CRITERION <n> PASS|FAIL <summary>`; the process exits non-zero if any
//! criterion fails.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use kdissim::conditions::anchor_instance;
use kdissim::pseudocherry::star_relation;
use kdissim::reconstruct::{twig_lengths, TraceStep};
use kdissim::testkit::{
    bruteforce_conditions, perturb_random_entry, random_tree, run_trials, EngineChoice, GeneratorConfig, TrialOptions,
};
use kdissim::{
    check_buneman, check_realizability, check_realizability_with, generate_table, parse_newick, reconstruct,
    CheckOptions, CollapseStep, ConditionTag, DissimilarityTable, EngineKind, FamilyShape, Index, IndexFamily, Label,
    Scalar, ViolationCertificate,
};

// Pinned tolerances. All comparisons are exact rational equality.
const TOLERANCE: i64 = 0;
const C1_MAX_RUNTIME: Duration = Duration::from_secs(1);
const C2_MAX_RUNTIME: Duration = Duration::from_secs(60);
const C2_TRIALS: usize = 300;
const C3_TRIALS: usize = 100;
const C4_TRIALS: usize = 200;
const C5_TRIALS: usize = 100;
const C6_TRIALS: usize = 100;
const C7_TRIALS: usize = 100;
const C8_TRIALS: usize = 100;
const C10_TRIALS: usize = 50;
const SEED: u64 = 20_241;

const T0: &str = "((1:2,2:3):4,3:-1,4:5);";

struct Verdict {
    pass: bool,
    summary: String,
}

fn verdict(pass: bool, summary: impl Into<String>) -> Verdict {
    Verdict { pass, summary: summary.into() }
}

fn t0_table(family: IndexFamily) -> DissimilarityTable {
    generate_table(&parse_newick(T0).unwrap(), &family).unwrap()
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let table = t0_table(IndexFamily::all_subsets(4));
    let rec = reconstruct(&table, EngineKind::Constructive);
    let elapsed = start.elapsed();
    let Ok(rec) = rec else {
        return verdict(false, format!("reconstruction failed: {}", rec.unwrap_err()));
    };
    let regenerated = generate_table(&rec.tree, table.family()).unwrap();
    let exact = regenerated == table;
    verdict(
        table.len() == 11 && exact && elapsed < C1_MAX_RUNTIME,
        format!("entries={} exact={exact} runtime={:?} limit={:?}", table.len(), elapsed, C1_MAX_RUNTIME),
    )
}

fn summary_line(s: &kdissim::testkit::TrialSummary) -> String {
    match s.first_failure() {
        None => format!("{}/{} pass", s.passed, s.trials),
        Some(f) => format!(
            "{}/{} pass, first failing seed {} n={} {}: {} tree {}",
            s.passed,
            s.trials,
            f.seed,
            f.n,
            f.family.shape.keyword(),
            f.detail,
            f.newick
        ),
    }
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let s = run_trials(C2_TRIALS, SEED, 4..=9, FamilyShape::AllSubsets, &TrialOptions::default());
    let elapsed = start.elapsed();
    verdict(
        s.all_passed() && elapsed < C2_MAX_RUNTIME,
        format!("{} runtime={elapsed:?} limit={C2_MAX_RUNTIME:?}", summary_line(&s)),
    )
}

fn criterion_3() -> Verdict {
    let shape = FamilyShape::AllMultisets { max_card: 5 };
    let s = run_trials(C3_TRIALS, SEED, 4..=7, shape, &TrialOptions::default());
    verdict(s.all_passed(), summary_line(&s))
}

fn criterion_4() -> Verdict {
    let shapes = [
        FamilyShape::FixedKSubsets { k: 2 },
        FamilyShape::FixedKSubsets { k: 3 },
        FamilyShape::FixedKMultisets { k: 2 },
        FamilyShape::FixedKMultisets { k: 3 },
    ];
    let per_shape = C4_TRIALS / shapes.len();
    let mut passed = 0;
    let mut parts = Vec::new();
    let mut first_failure = None;
    // Trials with n < 2k - 1 on fixed-size subsets, reported separately.
    let (mut determined, mut determined_passed) = (0, 0);
    for (s_idx, &shape) in shapes.iter().enumerate() {
        // Both engines where the constructive engine applies on its own.
        let engines = match shape {
            FamilyShape::FixedKSubsets { k } if k >= 3 => EngineChoice::Linear,
            _ => EngineChoice::Both,
        };
        let options = TrialOptions { engines, ..TrialOptions::default() };
        let s = run_trials(per_shape, SEED + 1000 * s_idx as u64, 4..=8, shape, &options);
        passed += s.passed;
        parts.push(format!("{}:{}={}/{}", shape.keyword(), shape.fixed_k().unwrap(), s.passed, s.trials));
        let k = shape.fixed_k().unwrap();
        for t in 0..per_shape {
            let n = 4 + t % 5;
            if shape.is_multiset() || n + 1 >= 2 * k {
                determined += 1;
                let seed = SEED + 1000 * s_idx as u64 + t as u64;
                if !s.failures.iter().any(|f| f.seed == seed) {
                    determined_passed += 1;
                }
            }
        }
        if first_failure.is_none() {
            if let Some(f) = s.first_failure() {
                first_failure = Some(format!(
                    "first failing seed {} n={} {}:{}: {}",
                    f.seed,
                    f.n,
                    shape.keyword(),
                    k,
                    f.detail
                ));
            }
        }
    }
    let total = per_shape * shapes.len();
    verdict(
        passed == total,
        format!(
            "{passed}/{total} pass [{}]; excluding subsets with n < 2k-1: {determined_passed}/{determined}{}",
            parts.join(" "),
            first_failure.map(|f| format!("; {f}")).unwrap_or_default()
        ),
    )
}

fn criterion_5() -> Verdict {
    let options = TrialOptions { engines: EngineChoice::Both, perturb: true, ..TrialOptions::default() };
    let s = run_trials(C5_TRIALS, SEED, 4..=9, FamilyShape::AllSubsets, &options);
    let line = match s.first_failure() {
        None => format!("{}/{} detected", s.passed, s.trials),
        Some(f) => format!(
            "{}/{} detected, first undetected seed {} n={} entry {}: {}",
            s.passed,
            s.trials,
            f.seed,
            f.n,
            f.perturbed.as_ref().unwrap(),
            f.detail
        ),
    };
    verdict(s.all_passed(), line)
}

fn criterion_6() -> Verdict {
    let mut checked = 0;
    let mut mismatch = None;
    for t in 0..C6_TRIALS {
        let k = 2 + t % 2;
        let n_min = (2 * k - 1).max(4);
        let n = n_min + t % (10 - n_min);
        let cfg = GeneratorConfig::new(n, SEED + t as u64).positive();
        let tree = random_tree(&cfg);
        let table = generate_table(&tree, &IndexFamily::fixed_k_subsets(n, k)).unwrap();
        let mut cherry_pairs = BTreeSet::new();
        for c in tree.find_cherries().unwrap() {
            let leaves: Vec<Label> = c.leaves.iter().copied().collect();
            for (a, &x) in leaves.iter().enumerate() {
                for &y in &leaves[a + 1..] {
                    cherry_pairs.insert((x, y));
                }
            }
        }
        let mut star_pairs = BTreeSet::new();
        for x in 1..=n as Label {
            for y in x + 1..=n as Label {
                if star_relation(&table, x, y).holds {
                    star_pairs.insert((x, y));
                }
            }
        }
        checked += 1;
        if star_pairs != cherry_pairs && mismatch.is_none() {
            mismatch = Some(format!("seed {} n={n} k={k}: star {star_pairs:?} cherry {cherry_pairs:?}", cfg.seed));
        }
    }
    match mismatch {
        None => verdict(true, format!("{checked}/{checked} trees: star pairs equal cherry pairs")),
        Some(m) => verdict(false, m),
    }
}

fn criterion_7() -> Verdict {
    let (mut holds, mut detected) = (0, 0);
    let mut first_hole = None;
    let mut first_false_alarm = None;
    for t in 0..C7_TRIALS {
        let n = 4 + t % 6;
        let cfg = GeneratorConfig::new(n, SEED + t as u64).positive();
        let tree = random_tree(&cfg);
        let table = generate_table(&tree, &IndexFamily::fixed_k_subsets(n, 2)).unwrap();
        match check_buneman(&table) {
            Ok(_) => holds += 1,
            Err(c) => {
                first_false_alarm.get_or_insert_with(|| format!("seed {}: {c}", cfg.seed));
            }
        }
        let (bumped, index) = perturb_random_entry(&table, cfg.seed);
        if check_buneman(&bumped).is_err() {
            detected += 1;
        } else if first_hole.is_none() {
            let cherry = tree.find_cherries().unwrap().iter().any(|c| index.labels().iter().all(|l| c.leaves.contains(l)));
            first_hole = Some(format!("seed {} n={n}: +1 on {index} (same cherry: {cherry}) keeps four-point", cfg.seed));
        }
    }
    let mut line = format!("four-point holds {holds}/{C7_TRIALS}; perturbations detected {detected}/{C7_TRIALS}");
    for extra in [first_false_alarm, first_hole].into_iter().flatten() {
        line.push_str("; ");
        line.push_str(&extra);
    }
    verdict(holds == C7_TRIALS && detected == C7_TRIALS, line)
}

fn criterion_8() -> Verdict {
    let shapes = [
        FamilyShape::AllSubsets,
        FamilyShape::AllMultisets { max_card: 3 },
        FamilyShape::FixedKSubsets { k: 2 },
        FamilyShape::FixedKMultisets { k: 3 },
    ];
    let mut agree = 0;
    let mut first = None;
    for t in 0..2 * C8_TRIALS {
        let perturbed = t >= C8_TRIALS;
        let shape = shapes[t % shapes.len()];
        let n = 4 + t % 4;
        let cfg = GeneratorConfig::new(n, SEED + t as u64);
        let mut table = generate_table(&random_tree(&cfg), &IndexFamily::new(shape, n)).unwrap();
        if perturbed {
            table = perturb_random_entry(&table, cfg.seed).0;
        }
        let brute = bruteforce_conditions(&table).unwrap();
        let fast = check_realizability(&table);
        let same = match (brute.certificate(), fast.certificate()) {
            (None, None) => true,
            (Some(b), Some(f)) => b.equivalent(f),
            _ => false,
        };
        if same {
            agree += 1;
        } else if first.is_none() {
            let show = |c: Option<&kdissim::ViolationCertificate>| c.map(|c| c.to_string()).unwrap_or("pass".into());
            first = Some(format!(
                "seed {} n={n} {} perturbed={perturbed}: brute {} vs fast {}",
                cfg.seed,
                shape.keyword(),
                show(brute.certificate()),
                show(fast.certificate())
            ));
        }
    }
    let total = 2 * C8_TRIALS;
    verdict(agree == total, format!("{agree}/{total} agree{}", first.map(|f| format!("; {f}")).unwrap_or_default()))
}

fn criterion_9() -> Verdict {
    let table = t0_table(IndexFamily::fixed_k_multisets(4, 3));
    let (alpha, beta) = (BTreeSet::from([1, 2]), BTreeSet::from([3, 4]));
    let (ta, tb) = (twig_lengths(&table, &alpha).unwrap(), twig_lengths(&table, &beta).unwrap());
    let (a, b, d) = (Index::from([2]), Index::from([4]), Index::from([2]));
    let eval = |strict| {
        let (l, r) = anchor_instance(&table, &ta, &tb, (1, 3), (&a, &b, &d), 2, strict).unwrap();
        (l.evaluate(&table).unwrap(), r.evaluate(&table).unwrap())
    };
    let corrected = eval(false);
    let strict = eval(true);
    let check = check_realizability(&table);
    let strict_report = check_realizability_with(&table, CheckOptions { strict_paper_signs: true, ..CheckOptions::default() });
    // The strict failure sits under the base-pairing certificate of the
    // four-label level; look for the documented instance among all of them.
    fn find(c: &ViolationCertificate, want: &(Scalar, Scalar)) -> bool {
        (c.tag == ConditionTag::AnchorK3 && (c.lhs.clone(), c.rhs.clone()) == *want)
            || c.nested.iter().any(|n| find(n, want))
    }
    let strict_anchor = strict_report.certificate().map(|c| find(c, &strict)).unwrap_or(false);
    let pass = corrected == (Scalar::from_int(3), Scalar::from_int(3))
        && strict == (Scalar::from_int(3), Scalar::from_int(-5))
        && check.realizable()
        && strict_anchor;
    verdict(
        pass,
        format!(
            "corrected {} = {}; strict rhs {} vs lhs {}; corrected check realizable={}; strict check lists the mismatch={}",
            corrected.1,
            corrected.0,
            strict.1,
            strict.0,
            check.realizable(),
            strict_anchor,
        ),
    )
}

fn criterion_10() -> Verdict {
    let shapes = [
        FamilyShape::AllSubsets,
        FamilyShape::AllMultisets { max_card: 4 },
        FamilyShape::FixedKSubsets { k: 2 },
        FamilyShape::FixedKMultisets { k: 2 },
    ];
    let mut levels = 0;
    let mut failure = None;
    for t in 0..C10_TRIALS {
        let shape = shapes[t % shapes.len()];
        let n = 5 + t % 5;
        let cfg = GeneratorConfig::new(n, SEED + t as u64);
        let tree = random_tree(&cfg);
        let mut table = generate_table(&tree, &IndexFamily::new(shape, n)).unwrap();
        let rec = match reconstruct(&table, EngineKind::Constructive) {
            Ok(r) => r,
            Err(c) => {
                failure.get_or_insert_with(|| format!("seed {}: reconstruction failed: {c}", cfg.seed));
                continue;
            }
        };
        let mut partial = tree.clone();
        for step in &rec.trace {
            let TraceStep::Collapse { level, alpha, fresh, twigs } = step else { continue };
            let collapse = CollapseStep { alpha: alpha.clone(), fresh: *fresh, twigs: twigs.clone() };
            table = collapse.apply(&table).unwrap();
            partial = match partial.collapse_cherry(alpha, *fresh) {
                Ok(p) => p,
                Err(e) => {
                    failure.get_or_insert_with(|| format!("seed {} level {level}: {e}", cfg.seed));
                    break;
                }
            };
            levels += 1;
            let computed = kdissim::weights::evaluate_indices(&partial, table.indices()).unwrap();
            if let Some((index, v)) = table.iter().find(|(i, v)| computed[*i] != **v) {
                failure.get_or_insert_with(|| {
                    format!("seed {} level {level}: reduced {index}={v} but tree gives {}", cfg.seed, computed[index])
                });
                break;
            }
        }
    }
    match failure {
        None => verdict(levels > 0, format!("{C10_TRIALS} trials, {levels} collapse levels exact")),
        Some(f) => verdict(false, f),
    }
}

fn main() {
    assert_eq!(TOLERANCE, 0, "criteria use exact equality");
    let criteria: [(usize, fn() -> Verdict); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (n, run) in criteria {
        if !filter.is_empty() && !filter.contains(&n) {
            continue;
        }
        let v = catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|p| {
                let msg = p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                verdict(false, format!("panicked: {msg}"))
            });
        println!("CRITERION {n} {} {}", if v.pass { "PASS" } else { "FAIL" }, v.summary);
        if !v.pass {
            failed.push(n);
        }
    }
    if !failed.is_empty() {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
    println!("acceptance: all criteria pass");
}
