//! The level recursion shared by the condition check and the constructive
//! engine. In check mode a collapse is attempted only for a pseudocherry
//! that passes its conditions against some partner.

use std::collections::BTreeSet;

use super::{
    base_case_small_at, is_fixed_k_subsets_above_pairs, linear_at, pairings, quartet_attempt,
    star_topology, solve_weights_at, twig_lengths_at, verify_level, TraceStep, TwigError,
};
use crate::certificate::{CertificateContext, CollapseStep, ConditionTag, ViolationCertificate};
use crate::conditions::{
    additivity_at, alignment_at, anchor_at, doubling_at, CheckResult, ConditionLine, LevelSummary,
    Pass,
};
use crate::pseudocherry::{pseudocherries_at, PseudocherryReport};
use crate::table::{reduce_table, DissimilarityTable, FamilyShape, ReductionError};
use crate::tree::{Label, WeightedTree};
use crate::certificate::LinearForm;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Mode {
    Check { strict: bool },
    Construct,
}

#[derive(Debug)]
pub(crate) struct Solved {
    pub tree: WeightedTree,
    pub trace: Vec<TraceStep>,
    /// `(level, α, β)` accepted along the successful path.
    pub pairs: Vec<(usize, BTreeSet<Label>, Option<BTreeSet<Label>>)>,
}

type Step = Result<Solved, ViolationCertificate>;

pub(crate) struct Engine {
    mode: Mode,
    pub log: Vec<ConditionLine>,
    pub levels: Vec<LevelSummary>,
}

/// StarFail for a level where no pseudocherry can be collapsed.
pub(crate) fn no_pair_certificate(
    table: &DissimilarityTable,
    report: &PseudocherryReport,
    context: &CertificateContext,
) -> ViolationCertificate {
    report
        .first_failure()
        .and_then(|w| w.certificate(table, context))
        .expect("a partition other than the star has a failing pair")
        .with_detail("no pair of pseudocherries to collapse")
}

fn keep_deeper(best: &mut Option<ViolationCertificate>, candidate: ViolationCertificate) {
    match best {
        Some(b) if b.level() >= candidate.level() => {}
        _ => *best = Some(candidate),
    }
}

impl Engine {
    pub(crate) fn new(mode: Mode) -> Self {
        Engine { mode, log: Vec::new(), levels: Vec::new() }
    }

    pub(crate) fn run(&mut self, table: &DissimilarityTable) -> Step {
        self.solve(table, &[])
    }

    fn checking(&self) -> bool {
        matches!(self.mode, Mode::Check { .. })
    }

    fn note(&mut self, table: &DissimilarityTable, level: usize, classes: Vec<BTreeSet<Label>>, note: &str) {
        self.levels.push(LevelSummary {
            level,
            universe: table.universe().to_vec(),
            classes,
            note: note.to_string(),
        });
    }

    fn record(&mut self, tag: ConditionTag, result: CheckResult, context: &CertificateContext) -> Result<Pass, ViolationCertificate> {
        if self.checking() {
            self.log.push(ConditionLine::from_result(tag, &result, context));
        }
        result
    }

    fn solve(&mut self, table: &DissimilarityTable, trail: &[CollapseStep]) -> Step {
        let level = trail.len();
        let context = CertificateContext::at(level, trail);
        let labels = table.universe().to_vec();
        let m = labels.len();
        if m <= 3 {
            self.note(table, level, vec![labels.iter().copied().collect()], "base case");
            let tree = base_case_small_at(table, &context)?;
            return Ok(Solved { tree, trace: vec![TraceStep::Base { level, labels }], pairs: Vec::new() });
        }
        if is_fixed_k_subsets_above_pairs(table.shape()) {
            self.note(table, level, Vec::new(), "fixed-size subsets: linear engine");
            return linear_at(table, trail);
        }
        let report = pseudocherries_at(table, &context)?;
        if report.is_star() {
            self.note(table, level, report.classes.clone(), "star");
            let tree = solve_weights_at(&star_topology(&labels), table, &context)?;
            return Ok(Solved { tree, trace: vec![TraceStep::Star { level, labels }], pairs: Vec::new() });
        }
        if m == 4 {
            self.note(table, level, report.classes.clone(), "four labels");
            return self.quartet_level(table, &report, &context);
        }
        let classes: Vec<BTreeSet<Label>> = report.nontrivial().filter(|c| c.len() + 2 <= m).cloned().collect();
        let fixed_k = table.shape().fixed_k().is_some();
        if fixed_k
            && classes
                .iter()
                .any(|c| matches!(twig_lengths_at(table, c, &context), Err(TwigError::NotDerivable(_))))
        {
            self.note(table, level, report.classes.clone(), "twigs not derivable: linear engine");
            return linear_at(table, trail);
        }
        self.note(table, level, report.classes.clone(), "");
        let mut best: Option<ViolationCertificate> = None;
        for alpha in &classes {
            let mut partner = None;
            if self.checking() {
                for beta in classes.iter().filter(|b| *b != alpha) {
                    match self.pair_conditions(table, alpha, beta, &context) {
                        Ok(()) => {
                            partner = Some(beta.clone());
                            break;
                        }
                        Err(c) => keep_deeper(&mut best, c),
                    }
                }
                if partner.is_none() {
                    continue;
                }
            }
            match self.collapse(table, alpha, partner.as_ref(), trail) {
                Ok(s) => return Ok(s),
                Err(c) => {
                    if self.checking() {
                        let ctx = context.clone().with_pair(alpha, partner.as_ref());
                        self.log.push(ConditionLine::from_result(ConditionTag::Recursive4, &Err(c.clone()), &ctx));
                    }
                    keep_deeper(&mut best, c)
                }
            }
        }
        Err(best.unwrap_or_else(|| no_pair_certificate(table, &report, &context)))
    }

    /// The conditions tying `α` to a partner `β`, by family.
    fn pair_conditions(
        &mut self,
        table: &DissimilarityTable,
        alpha: &BTreeSet<Label>,
        beta: &BTreeSet<Label>,
        context: &CertificateContext,
    ) -> Result<(), ViolationCertificate> {
        let ctx = context.clone().with_pair(alpha, Some(beta));
        let shape = table.shape();
        if !matches!(shape, FamilyShape::AllSubsets) {
            self.record(ConditionTag::Align1, alignment_at(table, alpha, beta, &ctx), &ctx)?;
        }
        self.record(ConditionTag::Doubling2, doubling_at(table, alpha, beta, &ctx), &ctx)?;
        let twigs = |side: &BTreeSet<Label>| match twig_lengths_at(table, side, &ctx) {
            Ok(t) => Ok(Some(t)),
            Err(TwigError::NotDerivable(_)) => Ok(None),
            Err(TwigError::Inconsistent(c)) => Err(*c),
        };
        match shape {
            FamilyShape::AllSubsets | FamilyShape::AllMultisets { .. } => {
                let result = twigs(alpha).and_then(|t| match t {
                    Some(t) => additivity_at(table, &t, &ctx),
                    None => Ok(Pass { instances: 0 }),
                });
                self.record(ConditionTag::Additivity3, result, &ctx)?;
            }
            FamilyShape::FixedKSubsets { .. } | FamilyShape::FixedKMultisets { .. } => {
                let strict = matches!(self.mode, Mode::Check { strict: true });
                let result = twigs(alpha).and_then(|ta| {
                    let tb = twigs(beta)?;
                    match (ta, tb) {
                        (Some(ta), Some(tb)) => anchor_at(table, &ta, &tb, strict, &ctx),
                        _ => Ok(Pass { instances: 0 }),
                    }
                });
                self.record(ConditionTag::AnchorK3, result, &ctx)?;
            }
        }
        Ok(())
    }

    fn collapse(
        &mut self,
        table: &DissimilarityTable,
        alpha: &BTreeSet<Label>,
        beta: Option<&BTreeSet<Label>>,
        trail: &[CollapseStep],
    ) -> Step {
        let level = trail.len();
        let context = CertificateContext::at(level, trail).with_pair(alpha, beta);
        let twigs = match twig_lengths_at(table, alpha, &context) {
            Ok(t) => t,
            Err(TwigError::Inconsistent(c)) => return Err(*c),
            Err(TwigError::NotDerivable(_)) => return linear_at(table, trail),
        };
        let fresh = table.next_fresh_label();
        let reduced = match reduce_table(table, alpha, &twigs.values, fresh) {
            Ok(r) => r,
            Err(ReductionError::InconsistentReduction {
                target,
                first_label,
                first_source,
                second_label,
                second_source,
                ..
            }) => {
                let lhs = LinearForm::entry(first_source) - &twigs.forms[&first_label];
                let rhs = LinearForm::entry(second_source) - &twigs.forms[&second_label];
                return Err(ViolationCertificate::from_forms(
                    ConditionTag::InconsistentReduction,
                    vec![first_label, second_label],
                    lhs,
                    rhs,
                    table,
                    context,
                )
                .with_detail(format!("collapsed entry {target}")));
            }
            Err(e) => panic!("collapse of a pseudocherry failed: {e}"),
        };
        let step = CollapseStep { alpha: alpha.clone(), fresh, twigs: Some(twigs.values.clone()) };
        let mut next = trail.to_vec();
        next.push(step);
        let mut solved = self.solve(&reduced, &next)?;
        let tree = solved
            .tree
            .attach_cherry(fresh, &twigs.values)
            .expect("fresh label is a leaf of the reduced tree");
        verify_level(&tree, table, &context)?;
        solved.tree = tree;
        solved.trace.insert(
            0,
            TraceStep::Collapse { level, alpha: alpha.clone(), fresh, twigs: Some(twigs.values) },
        );
        solved.pairs.insert(0, (level, alpha.clone(), beta.cloned()));
        Ok(solved)
    }

    fn quartet_level(
        &mut self,
        table: &DissimilarityTable,
        report: &PseudocherryReport,
        context: &CertificateContext,
    ) -> Step {
        let labels = table.universe().to_vec();
        let mut failures = Vec::new();
        for (alpha, beta) in pairings(&labels) {
            let ctx = context.clone().with_pair(&alpha, Some(&beta));
            match self.quartet_pairing(table, report, &alpha, &beta, &ctx) {
                Ok(tree) => {
                    return Ok(Solved {
                        tree,
                        trace: vec![TraceStep::Quartet { level: context.level, alpha: alpha.clone(), beta: beta.clone() }],
                        pairs: vec![(context.level, alpha, Some(beta))],
                    })
                }
                Err(c) => failures.push(c),
            }
        }
        let first = &failures[0];
        let cert = ViolationCertificate::from_forms(
            ConditionTag::BasePairing,
            labels.clone(),
            first.lhs_form.clone(),
            first.rhs_form.clone(),
            table,
            context.clone(),
        )
        .with_detail("no pairing of the four labels is realized");
        Err(cert.with_nested(failures))
    }

    fn quartet_pairing(
        &mut self,
        table: &DissimilarityTable,
        report: &PseudocherryReport,
        alpha: &BTreeSet<Label>,
        beta: &BTreeSet<Label>,
        context: &CertificateContext,
    ) -> Result<WeightedTree, ViolationCertificate> {
        if self.checking() {
            for side in [alpha, beta] {
                let pair: Vec<Label> = side.iter().copied().collect();
                let witness = report.witness(pair[0], pair[1]);
                let result = if witness.holds {
                    Ok(Pass { instances: witness.instances })
                } else {
                    Err(witness.certificate(table, context).expect("failing witness"))
                };
                self.record(ConditionTag::StarFail, result, context)?;
            }
            self.pair_conditions(table, alpha, beta, context)?;
        }
        quartet_attempt(table, alpha, beta, context)
    }

    /// Public entry point for four-label tables.
    pub(crate) fn base_case_4(&mut self, table: &DissimilarityTable, context: &CertificateContext) -> Step {
        assert_eq!(table.universe().len(), 4, "base case takes four labels");
        let report = pseudocherries_at(table, context)?;
        self.quartet_level(table, &report, context)
    }
}
