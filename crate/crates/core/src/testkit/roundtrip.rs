use std::ops::RangeInclusive;

use super::{perturb_random_entry, random_tree, GeneratorConfig};
use crate::certificate::ViolationCertificate;
use crate::conditions::check_realizability;
use crate::newick::serialize_newick;
use crate::reconstruct::{reconstruct, EngineKind};
use crate::table::{serialize_table, DissimilarityTable, FamilyShape, Index, IndexFamily};
use crate::weights::generate_table;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EngineChoice {
    Constructive,
    Linear,
    Both,
}

impl EngineChoice {
    fn engines(self) -> &'static [EngineKind] {
        match self {
            EngineChoice::Constructive => &[EngineKind::Constructive],
            EngineChoice::Linear => &[EngineKind::Linear],
            EngineChoice::Both => &[EngineKind::Constructive, EngineKind::Linear],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialOptions {
    pub engines: EngineChoice,
    /// Add one to a random entry and expect the table to be rejected.
    pub perturb: bool,
    pub positive_only: bool,
    pub max_degree: usize,
}

impl Default for TrialOptions {
    fn default() -> Self {
        TrialOptions { engines: EngineChoice::Constructive, perturb: false, positive_only: false, max_degree: 4 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialReport {
    pub seed: u64,
    pub n: usize,
    pub family: IndexFamily,
    pub newick: String,
    pub passed: bool,
    pub perturbed: Option<Index>,
    /// Whether both engines produced trees with equal tables, when both ran.
    pub engines_agree: Option<bool>,
    pub certificate: Option<ViolationCertificate>,
    pub detail: String,
    /// The table the trial ended up testing, for replay.
    pub table_text: String,
}

fn reconstructs_exactly(table: &DissimilarityTable, engine: EngineKind) -> Result<DissimilarityTable, String> {
    let rec = reconstruct(table, engine).map_err(|c| format!("{} engine: {c}", engine.as_str()))?;
    let regenerated = generate_table(&rec.tree, table.family())
        .map_err(|e| format!("{} engine produced an unusable tree: {e}", engine.as_str()))?;
    if &regenerated != table {
        return Err(format!("{} engine tree does not reproduce the table", engine.as_str()));
    }
    Ok(regenerated)
}

/// One generate, reconstruct and compare cycle.
pub fn roundtrip_trial(cfg: &GeneratorConfig, shape: FamilyShape, options: &TrialOptions) -> TrialReport {
    let tree = random_tree(cfg);
    let family = IndexFamily::new(shape, cfg.n);
    let mut report = TrialReport {
        seed: cfg.seed,
        n: cfg.n,
        family: family.clone(),
        newick: serialize_newick(&tree),
        passed: false,
        perturbed: None,
        engines_agree: None,
        certificate: None,
        detail: String::new(),
        table_text: String::new(),
    };
    let table = match generate_table(&tree, &family) {
        Ok(t) => t,
        Err(e) => {
            report.detail = format!("table generation failed: {e}");
            return report;
        }
    };
    if options.perturb {
        let (bumped, index) = perturb_random_entry(&table, cfg.seed);
        report.table_text = serialize_table(&bumped);
        report.perturbed = Some(index);
        let check = check_realizability(&bumped);
        let accepted: Vec<&str> = options
            .engines
            .engines()
            .iter()
            .filter(|&&e| reconstruct(&bumped, e).is_ok())
            .map(|e| e.as_str())
            .collect();
        report.certificate = check.certificate().cloned();
        report.passed = !check.realizable() && accepted.is_empty();
        report.detail = match (check.realizable(), accepted.is_empty()) {
            (false, true) => "rejected".into(),
            (true, _) => "perturbed table passed the condition check".into(),
            (false, false) => format!("reconstructed by {}", accepted.join(", ")),
        };
        return report;
    }
    report.table_text = serialize_table(&table);
    let mut outputs = Vec::new();
    for &engine in options.engines.engines() {
        match reconstructs_exactly(&table, engine) {
            Ok(t) => outputs.push(t),
            Err(detail) => {
                report.certificate = reconstruct(&table, engine).err();
                report.detail = detail;
                return report;
            }
        }
    }
    if outputs.len() == 2 {
        report.engines_agree = Some(outputs[0] == outputs[1]);
    }
    report.passed = report.engines_agree != Some(false);
    report.detail = "exact".into();
    report
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialSummary {
    pub trials: usize,
    pub passed: usize,
    pub failures: Vec<TrialReport>,
}

impl TrialSummary {
    pub fn all_passed(&self) -> bool {
        self.passed == self.trials
    }

    /// The failing trial with the smallest seed.
    pub fn first_failure(&self) -> Option<&TrialReport> {
        self.failures.iter().min_by_key(|r| r.seed)
    }
}

/// Runs `trials` trials with seeds `seed, seed+1, ...`, cycling `n` through
/// `n_range`.
pub fn run_trials(
    trials: usize,
    seed: u64,
    n_range: RangeInclusive<usize>,
    shape: FamilyShape,
    options: &TrialOptions,
) -> TrialSummary {
    let span = n_range.end() - n_range.start() + 1;
    let mut summary = TrialSummary { trials, passed: 0, failures: Vec::new() };
    for t in 0..trials {
        let mut cfg = GeneratorConfig::new(n_range.start() + t % span, seed.wrapping_add(t as u64));
        cfg.positive_only = options.positive_only;
        cfg.max_degree = options.max_degree;
        let report = roundtrip_trial(&cfg, shape, options);
        if report.passed {
            summary.passed += 1;
        } else {
            summary.failures.push(report);
        }
    }
    summary
}
