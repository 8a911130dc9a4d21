//! Necessary and sufficient conditions for a table to come from a tree, each
//! checked with a replayable certificate on failure.

use std::collections::BTreeSet;
use std::fmt;

use crate::certificate::{CertificateContext, ConditionTag, LinearForm, ViolationCertificate};
use crate::pseudocherry::admissible_complements;
use crate::reconstruct::{
    linear_at, Engine, EngineKind, Mode, TraceStep, TwigAssignment,
};
use crate::table::{sub_indices, DissimilarityTable, Index};
use crate::tree::{Label, WeightedTree};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pass {
    /// Number of instances examined; zero means the condition is vacuous.
    pub instances: usize,
}

impl Pass {
    pub fn is_vacuous(&self) -> bool {
        self.instances == 0
    }
}

pub type CheckResult = Result<Pass, ViolationCertificate>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Regime {
    Mixed,
    InAlpha,
    InBeta,
}

impl Regime {
    fn of(x: &Index, alpha: &BTreeSet<Label>, beta: &BTreeSet<Label>) -> Option<Regime> {
        if x.meets(alpha) && x.meets(beta) {
            Some(Regime::Mixed)
        } else if x.is_subset_of(alpha) {
            Some(Regime::InAlpha)
        } else if x.is_subset_of(beta) {
            Some(Regime::InBeta)
        } else {
            None
        }
    }

    fn slot(self) -> usize {
        self as usize
    }

    fn name(self) -> &'static str {
        match self {
            Regime::Mixed => "X meets both",
            Regime::InAlpha => "X inside alpha",
            Regime::InBeta => "X inside beta",
        }
    }
}

fn difference(i: Label, j: Label, x: &Index) -> LinearForm {
    LinearForm::entry(x.with(i)) - LinearForm::entry(x.with(j))
}

fn pair_context(alpha: &BTreeSet<Label>, beta: &BTreeSet<Label>) -> CertificateContext {
    CertificateContext::default().with_pair(alpha, Some(beta))
}

/// `D[α_i ∪ X] − D[β_j ∪ X]` is constant over `X` within each regime.
pub fn check_alignment(table: &DissimilarityTable, alpha: &BTreeSet<Label>, beta: &BTreeSet<Label>) -> CheckResult {
    alignment_at(table, alpha, beta, &pair_context(alpha, beta))
}

/// Admissible `X` for `(i, j)` with their regime and difference value.
fn regime_differences(
    table: &DissimilarityTable,
    alpha: &BTreeSet<Label>,
    beta: &BTreeSet<Label>,
    i: Label,
    j: Label,
) -> Vec<(Regime, Index, crate::scalar::Scalar)> {
    admissible_complements(table, i, j)
        .into_iter()
        .filter_map(|x| {
            let r = Regime::of(&x, alpha, beta)?;
            let d = difference(i, j, &x).evaluate(table).expect("admissible");
            Some((r, x, d))
        })
        .collect()
}

pub(crate) fn alignment_at(
    table: &DissimilarityTable,
    alpha: &BTreeSet<Label>,
    beta: &BTreeSet<Label>,
    context: &CertificateContext,
) -> CheckResult {
    let mut instances = 0;
    for &i in alpha {
        for &j in beta {
            let mut reference: [Option<(Index, crate::scalar::Scalar)>; 3] = Default::default();
            for (r, x, d) in regime_differences(table, alpha, beta, i, j) {
                instances += 1;
                match &reference[r.slot()] {
                    None => reference[r.slot()] = Some((x, d)),
                    Some((x0, d0)) if !table.eq(d0, &d) => {
                        return Err(ViolationCertificate::from_forms(
                            ConditionTag::Align1,
                            vec![i, j],
                            difference(i, j, x0),
                            difference(i, j, &x),
                            table,
                            context.clone(),
                        )
                        .with_detail(format!("{}: X={x0} vs X={x}", r.name())));
                    }
                    Some(_) => {}
                }
            }
        }
    }
    Ok(Pass { instances })
}

/// `d(Z) + d(Y) = 2 d(W)` for `Z ⊆ α`, `Y ⊆ β` and `W` meeting both, where
/// `d(X) = D[α_i ∪ X] − D[β_j ∪ X]`. Vacuous when a regime is empty.
pub fn check_doubling(table: &DissimilarityTable, alpha: &BTreeSet<Label>, beta: &BTreeSet<Label>) -> CheckResult {
    doubling_at(table, alpha, beta, &pair_context(alpha, beta))
}

pub(crate) fn doubling_at(
    table: &DissimilarityTable,
    alpha: &BTreeSet<Label>,
    beta: &BTreeSet<Label>,
    context: &CertificateContext,
) -> CheckResult {
    let mut instances = 0;
    for &i in alpha {
        for &j in beta {
            let diffs = regime_differences(table, alpha, beta, i, j);
            let pick = |r: Regime| -> Vec<(&Index, &crate::scalar::Scalar)> {
                diffs.iter().filter(|(q, _, _)| *q == r).map(|(_, x, d)| (x, d)).collect()
            };
            let (zs, ys, ws) = (pick(Regime::InAlpha), pick(Regime::InBeta), pick(Regime::Mixed));
            if zs.is_empty() || ys.is_empty() || ws.is_empty() {
                continue;
            }
            instances += zs.len() * ys.len() * ws.len();
            let holds = |z: &crate::scalar::Scalar, y: &crate::scalar::Scalar, w: &crate::scalar::Scalar| {
                table.eq(&(z + y), &w.scale(2))
            };
            let (z0, y0, w0) = (zs[0], ys[0], ws[0]);
            // First failing triple in (Z, Y, W) order, W varying fastest.
            let failing = if !holds(z0.1, y0.1, w0.1) {
                Some((z0.0, y0.0, w0.0))
            } else if let Some(w) = ws.iter().find(|w| !table.eq(w.1, w0.1)) {
                Some((z0.0, y0.0, w.0))
            } else if let Some(y) = ys.iter().find(|y| !table.eq(y.1, y0.1)) {
                Some((z0.0, y.0, w0.0))
            } else {
                zs.iter().find(|z| !table.eq(z.1, z0.1)).map(|z| (z.0, y0.0, w0.0))
            };
            if let Some((z, y, w)) = failing {
                let dz = difference(i, j, z);
                let dy = difference(i, j, y);
                let lhs = -&dz - dy;
                let rhs = difference(i, j, w).scaled(&crate::scalar::Scalar::from_int(-2));
                return Err(ViolationCertificate::from_forms(
                    ConditionTag::Doubling2,
                    vec![i, j],
                    lhs,
                    rhs,
                    table,
                    context.clone(),
                )
                .with_detail(format!("Z={z} Y={y} W={w}")));
            }
        }
    }
    Ok(Pass { instances })
}

/// For every entry with at least two members of `α`:
/// `D[I] = Σ a(other members) + D[α_t ∪ δ]`, `δ` the part of `I` outside `α`.
pub fn check_additivity(table: &DissimilarityTable, twigs: &TwigAssignment) -> CheckResult {
    additivity_at(table, twigs, &CertificateContext::default().with_pair(&twigs.alpha, None))
}

pub(crate) fn additivity_at(
    table: &DissimilarityTable,
    twigs: &TwigAssignment,
    context: &CertificateContext,
) -> CheckResult {
    let alpha = &twigs.alpha;
    let mut instances = 0;
    for (index, _) in table.iter() {
        let members: Vec<Label> = index.labels().iter().copied().filter(|l| alpha.contains(l)).collect();
        if members.len() < 2 {
            continue;
        }
        let outside: Vec<Label> = index.labels().iter().copied().filter(|l| !alpha.contains(l)).collect();
        let mut kept: Vec<Label> = members.clone();
        kept.dedup();
        for &y in kept.iter().rev() {
            let mut rest = members.clone();
            let pos = rest.iter().position(|&l| l == y).expect("member");
            rest.remove(pos);
            let base = if outside.is_empty() {
                twigs.forms[&y].clone()
            } else {
                let mut labels = outside.clone();
                labels.push(y);
                let j = Index::new(labels);
                if !table.contains(&j) {
                    continue;
                }
                LinearForm::entry(j)
            };
            instances += 1;
            let rhs = rest.iter().fold(base, |acc, l| acc + &twigs.forms[l]);
            let lhs = LinearForm::entry(index.clone());
            let (l, r) = (lhs.evaluate(table), rhs.evaluate(table));
            if !table.eq(&l.expect("entry"), &r.expect("entries")) {
                return Err(ViolationCertificate::from_forms(
                    ConditionTag::Additivity3,
                    vec![y],
                    lhs,
                    rhs,
                    table,
                    context.clone(),
                )
                .with_detail(format!("I={index} keeping {y}")));
            }
        }
    }
    Ok(Pass { instances })
}

/// Fixed-size families: `a(α_i) − a(β_j) = D[α_i∪A∪D] − D[δ∪A∪D] − D[β_j∪B∪D] + D[δ∪B∪D]`
/// for nonempty `A ⊆ α`, `B ⊆ β` of equal size, nonempty `D` and `δ ∈ D`.
/// With `strict` the two middle terms trade signs.
pub fn check_anchor_fixed_k(
    table: &DissimilarityTable,
    alpha_twigs: &TwigAssignment,
    beta_twigs: &TwigAssignment,
    strict: bool,
) -> CheckResult {
    let context = pair_context(&alpha_twigs.alpha, &beta_twigs.alpha);
    anchor_at(table, alpha_twigs, beta_twigs, strict, &context)
}

/// One anchor instance, returned as `(lhs, rhs)` forms, if all four entries exist.
pub fn anchor_instance(
    table: &DissimilarityTable,
    alpha_twigs: &TwigAssignment,
    beta_twigs: &TwigAssignment,
    (i, j): (Label, Label),
    (a, b, d): (&Index, &Index, &Index),
    delta: Label,
    strict: bool,
) -> Option<(LinearForm, LinearForm)> {
    let i1 = a.union(d).with(i);
    let i2 = a.union(d).with(delta);
    let i3 = b.union(d).with(j);
    let i4 = b.union(d).with(delta);
    if ![&i1, &i2, &i3, &i4].iter().all(|x| table.contains(x)) {
        return None;
    }
    let lhs = alpha_twigs.forms.get(&i)?.clone() - beta_twigs.forms.get(&j)?;
    let e = LinearForm::entry;
    let rhs = if strict { e(i1) + e(i3) - e(i2) - e(i4) } else { e(i1) - e(i2) - e(i3) + e(i4) };
    Some((lhs, rhs))
}

pub(crate) fn anchor_at(
    table: &DissimilarityTable,
    alpha_twigs: &TwigAssignment,
    beta_twigs: &TwigAssignment,
    strict: bool,
    context: &CertificateContext,
) -> CheckResult {
    let Some(k) = table.shape().fixed_k() else {
        return Ok(Pass { instances: 0 });
    };
    let multiset = table.shape().is_multiset();
    let alpha: Vec<Label> = alpha_twigs.alpha.iter().copied().collect();
    let beta: Vec<Label> = beta_twigs.alpha.iter().copied().collect();
    let mut instances = 0;
    // Strict mode lists every failing instance: the first is the
    // certificate, the rest are nested under it.
    let mut failures = Vec::new();
    for &i in &alpha {
        for &j in &beta {
            for s in 1..=k.saturating_sub(2) {
                let rest = sub_indices(table.universe(), k - 1 - s, multiset);
                for a in sub_indices(&alpha, s, multiset) {
                    for b in sub_indices(&beta, s, multiset) {
                        for d in &rest {
                            for delta in d.support() {
                                let Some((lhs, rhs)) = anchor_instance(
                                    table,
                                    alpha_twigs,
                                    beta_twigs,
                                    (i, j),
                                    (&a, &b, d),
                                    delta,
                                    strict,
                                ) else {
                                    continue;
                                };
                                instances += 1;
                                let (l, r) = (lhs.evaluate(table).expect("entries"), rhs.evaluate(table).expect("entries"));
                                if !table.eq(&l, &r) {
                                    let cert = ViolationCertificate::from_forms(
                                        ConditionTag::AnchorK3,
                                        vec![i, j],
                                        lhs,
                                        rhs,
                                        table,
                                        context.clone(),
                                    )
                                    .with_detail(format!("A={a} B={b} D={d} delta={delta}"));
                                    if !strict {
                                        return Err(cert);
                                    }
                                    failures.push(cert);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    if !failures.is_empty() {
        let first = failures.remove(0);
        return Err(first.with_nested(failures));
    }
    Ok(Pass { instances })
}

/// Four-point condition on pair entries: of the three pairings of any four
/// labels, the largest pair sum is attained at least twice.
pub fn check_buneman(table: &DissimilarityTable) -> CheckResult {
    let context = CertificateContext::default();
    let mut instances = 0;
    let pair = |x: Label, y: Label| Index::new(vec![x, y]);
    for quad in sub_indices(table.universe(), 4, false) {
        let [a, b, c, d] = [quad.labels()[0], quad.labels()[1], quad.labels()[2], quad.labels()[3]];
        let sums: Vec<LinearForm> = [(a, b, c, d), (a, c, b, d), (a, d, b, c)]
            .into_iter()
            .map(|(p, q, r, s)| LinearForm::entry(pair(p, q)) + LinearForm::entry(pair(r, s)))
            .collect();
        let Some(values) = sums.iter().map(|f| f.evaluate(table)).collect::<Option<Vec<_>>>() else {
            continue;
        };
        instances += 1;
        let mut order = [0usize, 1, 2];
        order.sort_by(|&x, &y| table.equality().cmp(&values[y], &values[x]));
        if !table.eq(&values[order[0]], &values[order[1]]) {
            return Err(ViolationCertificate::from_forms(
                ConditionTag::FourPoint,
                vec![a, b, c, d],
                sums[order[0]].clone(),
                sums[order[1]].clone(),
                table,
                context.clone(),
            )
            .with_detail("largest pair sum attained once"));
        }
    }
    Ok(Pass { instances })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Vacuous,
    Fail,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Vacuous => "VACUOUS",
            Status::Fail => "FAIL",
        }
    }
}

/// One condition evaluated during the recursive check.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionLine {
    pub tag: ConditionTag,
    pub status: Status,
    pub level: usize,
    pub alpha: Option<BTreeSet<Label>>,
    pub beta: Option<BTreeSet<Label>>,
    pub instances: usize,
    pub detail: String,
}

impl ConditionLine {
    pub(crate) fn from_result(
        tag: ConditionTag,
        result: &CheckResult,
        context: &CertificateContext,
    ) -> Self {
        let (status, instances, detail) = match result {
            Ok(p) if p.is_vacuous() => (Status::Vacuous, 0, String::new()),
            Ok(p) => (Status::Pass, p.instances, String::new()),
            Err(c) => (Status::Fail, 0, format!("{} vs {}", c.lhs, c.rhs)),
        };
        ConditionLine {
            tag,
            status,
            level: context.level,
            alpha: context.alpha.clone(),
            beta: context.beta.clone(),
            instances,
            detail,
        }
    }
}

fn set_text(set: &BTreeSet<Label>) -> String {
    let parts: Vec<String> = set.iter().map(|l| l.to_string()).collect();
    format!("{{{}}}", parts.join(","))
}

impl fmt::Display for ConditionLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CONDITION {} {} level={}", self.tag, self.status.as_str(), self.level)?;
        if let Some(a) = &self.alpha {
            write!(f, " alpha={}", set_text(a))?;
        }
        if let Some(b) = &self.beta {
            write!(f, " beta={}", set_text(b))?;
        }
        if self.status == Status::Pass {
            write!(f, " instances={}", self.instances)?;
        }
        if !self.detail.is_empty() {
            write!(f, " {}", self.detail)?;
        }
        Ok(())
    }
}

/// The pseudocherry partition found at one level of the recursion.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSummary {
    pub level: usize,
    pub universe: Vec<Label>,
    pub classes: Vec<BTreeSet<Label>>,
    pub note: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckOptions {
    /// Use the anchor identity with the signs exactly as first written.
    pub strict_paper_signs: bool,
    /// Largest label count checked by the full recursive search; larger
    /// tables are reconstructed and then verified.
    pub exhaustive_limit: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { strict_paper_signs: false, exhaustive_limit: 10 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RealizabilityReport {
    pub outcome: Result<WeightedTree, ViolationCertificate>,
    /// The pair of pseudocherries accepted at the top level, if any.
    pub pair: Option<(BTreeSet<Label>, Option<BTreeSet<Label>>)>,
    pub conditions: Vec<ConditionLine>,
    pub levels: Vec<LevelSummary>,
    pub trace: Vec<TraceStep>,
    /// False when the table was too large and was checked by reconstruction.
    pub exhaustive: bool,
}

impl RealizabilityReport {
    pub fn realizable(&self) -> bool {
        self.outcome.is_ok()
    }

    pub fn certificate(&self) -> Option<&ViolationCertificate> {
        self.outcome.as_ref().err()
    }

    pub fn tree(&self) -> Option<&WeightedTree> {
        self.outcome.as_ref().ok()
    }
}

pub fn check_realizability(table: &DissimilarityTable) -> RealizabilityReport {
    check_realizability_with(table, CheckOptions::default())
}

/// Runs the recursive condition check. Every condition evaluated is logged;
/// on failure the deepest certificate found is returned.
pub fn check_realizability_with(table: &DissimilarityTable, options: CheckOptions) -> RealizabilityReport {
    if table.universe().len() > options.exhaustive_limit {
        let mut engine = Engine::new(Mode::Construct);
        let mut result = engine.run(table);
        if result.is_err() {
            if let Ok(s) = linear_at(table, &[]) {
                result = Ok(s);
            }
        }
        let (outcome, trace) = match result {
            Ok(s) => (Ok(s.tree), s.trace),
            Err(c) => (Err(c), Vec::new()),
        };
        return RealizabilityReport {
            outcome,
            pair: None,
            conditions: Vec::new(),
            levels: engine.levels,
            trace,
            exhaustive: false,
        };
    }
    let mut engine = Engine::new(Mode::Check { strict: options.strict_paper_signs });
    let result = engine.run(table);
    let (outcome, pair, trace) = match result {
        Ok(s) => {
            let pair = s.pairs.iter().find(|(l, _, _)| *l == 0).map(|(_, a, b)| (a.clone(), b.clone()));
            (Ok(s.tree), pair, s.trace)
        }
        Err(c) => (Err(c), None, Vec::new()),
    };
    RealizabilityReport { outcome, pair, conditions: engine.log, levels: engine.levels, trace, exhaustive: true }
}

/// Which engine produced a tree, for reports.
pub fn engine_of(trace: &[TraceStep]) -> EngineKind {
    if trace.iter().any(|s| matches!(s, TraceStep::Linear { .. })) {
        EngineKind::Linear
    } else {
        EngineKind::Constructive
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::newick::parse_newick;
    use crate::reconstruct::twig_lengths;
    use crate::scalar::Scalar;
    use crate::table::IndexFamily;
    use crate::weights::generate_table;

    const T0: &str = "((1:2,2:3):4,3:-1,4:5);";

    fn table(newick: &str, family: IndexFamily) -> DissimilarityTable {
        generate_table(&parse_newick(newick).unwrap(), &family).unwrap()
    }

    fn set(v: &[Label]) -> BTreeSet<Label> {
        v.iter().copied().collect()
    }

    #[test]
    fn doubling_on_t0() {
        let t = table(T0, IndexFamily::all_subsets(4));
        let p = check_doubling(&t, &set(&[1, 2]), &set(&[3, 4])).unwrap();
        assert!(p.instances > 0);
        let bumped = t.with_entry(&Index::from([3, 4]), Scalar::from_int(5)).unwrap();
        let c = check_doubling(&bumped, &set(&[1, 2]), &set(&[3, 4])).unwrap_err();
        assert_eq!(c.tag, ConditionTag::Doubling2);
        assert_eq!(c.labels, vec![1, 3]);
        assert_eq!((c.lhs.clone(), c.rhs.clone()), (Scalar::from_int(-5), Scalar::from_int(-6)));
        assert!(c.replays_on(&bumped));
    }

    #[test]
    fn doubling_is_vacuous_on_pairs() {
        let t = table(T0, IndexFamily::fixed_k_subsets(4, 2));
        assert!(check_doubling(&t, &set(&[1, 2]), &set(&[3, 4])).unwrap().is_vacuous());
    }

    #[test]
    fn additivity_on_t0() {
        let t = table(T0, IndexFamily::all_subsets(4));
        let tw = twig_lengths(&t, &set(&[1, 2])).unwrap();
        assert!(check_additivity(&t, &tw).unwrap().instances > 0);
        let bumped = t.with_entry(&Index::from([1, 2, 3]), Scalar::from_int(9)).unwrap();
        let tw = twig_lengths(&bumped, &set(&[1, 2])).unwrap();
        let c = check_additivity(&bumped, &tw).unwrap_err();
        assert_eq!(c.tag, ConditionTag::Additivity3);
        assert_eq!((c.lhs.clone(), c.rhs.clone()), (Scalar::from_int(9), Scalar::from_int(8)));
        assert!(c.replays_on(&bumped));
    }

    #[test]
    fn alignment_on_multisets() {
        let t = table(T0, IndexFamily::all_multisets(4, 3));
        assert!(check_alignment(&t, &set(&[1, 2]), &set(&[3, 4])).is_ok());
        let bumped = t.with_entry(&Index::from([1, 2, 4]), Scalar::from_int(15)).unwrap();
        let c = check_alignment(&bumped, &set(&[1, 2]), &set(&[3, 4])).unwrap_err();
        assert_eq!(c.tag, ConditionTag::Align1);
        assert_eq!(c.labels, vec![1, 3]);
        assert!(c.indices.contains(&Index::from([1, 2, 4])));
        assert!(c.replays_on(&bumped));
    }

    #[test]
    fn anchor_signs() {
        let t = table(T0, IndexFamily::fixed_k_multisets(4, 3));
        let ta = twig_lengths(&t, &set(&[1, 2])).unwrap();
        let tb = twig_lengths(&t, &set(&[3, 4])).unwrap();
        let inst = |strict| {
            let (l, r) = anchor_instance(
                &t,
                &ta,
                &tb,
                (1, 3),
                (&Index::from([2]), &Index::from([4]), &Index::from([2])),
                2,
                strict,
            )
            .unwrap();
            (l.evaluate(&t).unwrap(), r.evaluate(&t).unwrap())
        };
        assert_eq!(inst(false), (Scalar::from_int(3), Scalar::from_int(3)));
        assert_eq!(inst(true), (Scalar::from_int(3), Scalar::from_int(-5)));
        assert!(check_anchor_fixed_k(&t, &ta, &tb, false).unwrap().instances > 0);
        let c = check_anchor_fixed_k(&t, &ta, &tb, true).unwrap_err();
        assert_eq!(c.tag, ConditionTag::AnchorK3);
        assert!(c.replays_on(&t));
        let listed = std::iter::once(&c).chain(&c.nested).any(|c| {
            (c.lhs.clone(), c.rhs.clone()) == (Scalar::from_int(3), Scalar::from_int(-5))
                && c.detail == "A={2} B={4} D={2} delta=2"
        });
        assert!(listed, "{c:?}");
        let pairs = table(T0, IndexFamily::fixed_k_multisets(4, 2));
        let ta = twig_lengths(&pairs, &set(&[1, 2])).unwrap();
        let tb = twig_lengths(&pairs, &set(&[3, 4])).unwrap();
        assert!(check_anchor_fixed_k(&pairs, &ta, &tb, true).unwrap().is_vacuous());
    }

    #[test]
    fn four_point() {
        let pairs = table(T0, IndexFamily::fixed_k_subsets(4, 2));
        assert_eq!(check_buneman(&pairs), Ok(Pass { instances: 1 }));
        let bumped = pairs.with_entry(&Index::from([1, 3]), Scalar::from_int(6)).unwrap();
        let c = check_buneman(&bumped).unwrap_err();
        assert_eq!(c.tag, ConditionTag::FourPoint);
        assert_eq!((c.lhs.clone(), c.rhs.clone()), (Scalar::from_int(18), Scalar::from_int(17)));
        let three = table("(1:1,2:1,3:1);", IndexFamily::fixed_k_subsets(3, 2));
        assert!(check_buneman(&three).unwrap().is_vacuous());
    }

    #[test]
    fn realizability_on_t0() {
        for family in [
            IndexFamily::all_subsets(4),
            IndexFamily::all_multisets(4, 3),
            IndexFamily::fixed_k_multisets(4, 3),
        ] {
            let t = table(T0, family);
            let report = check_realizability(&t);
            assert!(report.realizable(), "{:?}", report.certificate());
            assert_eq!(report.pair, Some((set(&[1, 2]), Some(set(&[3, 4])))));
        }
        let t = table(T0, IndexFamily::all_subsets(4));
        let bumped = t.with_entry(&Index::from([1, 2, 3]), Scalar::from_int(9)).unwrap();
        let report = check_realizability(&bumped);
        let c = report.certificate().unwrap();
        assert!(c.replays_on(&bumped));
    }

    #[test]
    fn strict_signs_reject_a_valid_table() {
        let t = table(T0, IndexFamily::fixed_k_multisets(4, 3));
        let options = CheckOptions { strict_paper_signs: true, ..CheckOptions::default() };
        let report = check_realizability_with(&t, options);
        assert!(!report.realizable());
    }
}
