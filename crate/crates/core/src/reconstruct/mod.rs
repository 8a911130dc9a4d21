//! Recovering a weighted tree from a table.
//!
//! Two engines are provided. The constructive engine collapses one complete
//! pseudocherry at a time, reading twig lengths off the table. The linear
//! engine recovers the topology by collapsing pseudocherries with
//! representative values and then solves for all edge weights at once.

mod engine;
mod linear;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::certificate::{CertificateContext, ConditionTag, LinearForm, ViolationCertificate};
use crate::pseudocherry::admissible_complements;
use crate::scalar::Scalar;
use crate::table::{DissimilarityTable, FamilyShape, Index};
use crate::tree::{Label, TreeBuilder, TreeError, WeightedTree};
use crate::weights::evaluate_indices;

pub(crate) use engine::{Engine, Mode};
pub(crate) use linear::{linear_at, solve_weights_at};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EngineKind {
    Constructive,
    Linear,
}

impl EngineKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EngineKind::Constructive => "constructive",
            EngineKind::Linear => "linear",
        }
    }
}

/// One step of a successful reconstruction, outermost level first.
#[derive(Clone, Debug, PartialEq)]
pub enum TraceStep {
    Collapse {
        level: usize,
        alpha: BTreeSet<Label>,
        fresh: Label,
        twigs: Option<BTreeMap<Label, Scalar>>,
    },
    Star { level: usize, labels: Vec<Label> },
    Quartet { level: usize, alpha: BTreeSet<Label>, beta: BTreeSet<Label> },
    Base { level: usize, labels: Vec<Label> },
    /// A level handed to the linear engine.
    Linear { level: usize, unknowns: usize },
}

fn set_text(set: &BTreeSet<Label>) -> String {
    let parts: Vec<String> = set.iter().map(|l| l.to_string()).collect();
    format!("{{{}}}", parts.join(","))
}

impl fmt::Display for TraceStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceStep::Collapse { level, alpha, fresh, twigs } => {
                write!(f, "level {level}: collapse {} -> {fresh}", set_text(alpha))?;
                if let Some(twigs) = twigs {
                    let parts: Vec<String> = twigs.iter().map(|(l, w)| format!("{l}:{w}")).collect();
                    write!(f, " twigs {}", parts.join(" "))?;
                }
                Ok(())
            }
            TraceStep::Star { level, labels } => write!(f, "level {level}: star on {labels:?}"),
            TraceStep::Quartet { level, alpha, beta } => {
                write!(f, "level {level}: quartet {}|{}", set_text(alpha), set_text(beta))
            }
            TraceStep::Base { level, labels } => write!(f, "level {level}: base case on {labels:?}"),
            TraceStep::Linear { level, unknowns } => {
                write!(f, "level {level}: linear solve with {unknowns} unknowns")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction {
    pub tree: WeightedTree,
    pub engine: EngineKind,
    pub trace: Vec<TraceStep>,
}

pub type ReconstructionResult = Result<Reconstruction, ViolationCertificate>;

/// Twig lengths of a candidate cherry, with the table expression each value
/// was read from.
#[derive(Clone, Debug, PartialEq)]
pub struct TwigAssignment {
    pub alpha: BTreeSet<Label>,
    pub values: BTreeMap<Label, Scalar>,
    pub forms: BTreeMap<Label, LinearForm>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TwigError {
    /// No table entry determines the twig of this label.
    NotDerivable(Label),
    /// Two derivations disagree.
    Inconsistent(Box<ViolationCertificate>),
}

/// Twig lengths `a(α_i)` for every member of `alpha`, checking that every
/// available derivation agrees.
pub fn twig_lengths(
    table: &DissimilarityTable,
    alpha: &BTreeSet<Label>,
) -> Result<TwigAssignment, TwigError> {
    twig_lengths_at(table, alpha, &CertificateContext::default().with_pair(alpha, None))
}

pub(crate) fn twig_lengths_at(
    table: &DissimilarityTable,
    alpha: &BTreeSet<Label>,
    context: &CertificateContext,
) -> Result<TwigAssignment, TwigError> {
    let mut values = BTreeMap::new();
    let mut forms = BTreeMap::new();
    for &i in alpha {
        let derivations = twig_derivations(table, i, alpha);
        let Some(((j0, k0), first)) = derivations.first().cloned() else {
            return Err(TwigError::NotDerivable(i));
        };
        let v0 = first.evaluate(table).expect("derivation uses table entries");
        for ((j, k), form) in &derivations[1..] {
            let v = form.evaluate(table).expect("derivation uses table entries");
            if !table.eq(&v, &v0) {
                let tag = if (*j, *k) == (j0, k0) {
                    ConditionTag::StarFail
                } else if table.shape().fixed_k().is_some() {
                    ConditionTag::AnchorK3
                } else {
                    ConditionTag::Additivity3
                };
                let cert = ViolationCertificate::from_forms(
                    tag,
                    vec![i],
                    first.clone(),
                    form.clone(),
                    table,
                    context.clone(),
                )
                .with_detail(format!("twig of {i} derived in two ways"));
                return Err(TwigError::Inconsistent(Box::new(cert)));
            }
        }
        values.insert(i, v0);
        forms.insert(i, first);
    }
    Ok(TwigAssignment { alpha: alpha.clone(), values, forms })
}

type DerivationKey = (Label, usize);

/// All table expressions for `a(i)`, keyed by partner label and the
/// multiplicity of `i` in the anchoring entry.
fn twig_derivations(
    table: &DissimilarityTable,
    i: Label,
    alpha: &BTreeSet<Label>,
) -> Vec<(DerivationKey, LinearForm)> {
    let mut out = Vec::new();
    let delta = |j: Label, x: &Index| LinearForm::entry(x.with(i)) - LinearForm::entry(x.with(j));
    match table.shape().fixed_k() {
        None => {
            for &j in alpha.iter().filter(|&&j| j != i) {
                let pair = Index::new(vec![i, j]);
                if !table.contains(&pair) {
                    continue;
                }
                for x in admissible_complements(table, i, j) {
                    out.push(((j, 1), (LinearForm::entry(pair.clone()) + delta(j, &x)).half()));
                }
            }
        }
        Some(k) => {
            let inv_k = Scalar::ratio(1, k as i64);
            let pure = Index::new(vec![i; k]);
            if table.contains(&pure) {
                out.push(((i, k), LinearForm::entry(pure).scaled(&inv_k)));
            }
            for &j in alpha.iter().filter(|&&j| j != i) {
                let complements = admissible_complements(table, i, j);
                for ki in (0..k).rev() {
                    let kj = k - ki;
                    let mut labels = vec![i; ki];
                    labels.extend(std::iter::repeat_n(j, kj));
                    let anchor = Index::new(labels);
                    if !table.contains(&anchor) {
                        continue;
                    }
                    for x in &complements {
                        let form = LinearForm::entry(anchor.clone())
                            + delta(j, x).scaled(&Scalar::from_int(kj as i64));
                        out.push(((j, ki), form.scaled(&inv_k)));
                    }
                }
            }
        }
    }
    out
}

/// Checks `tree` against every entry of `table`; returns the number of
/// entries checked.
pub fn verify(tree: &WeightedTree, table: &DissimilarityTable) -> Result<usize, VerifyError> {
    verify_at(tree, table, &CertificateContext::default())
}

#[derive(Clone, Debug, PartialEq)]
pub enum VerifyError {
    Mismatch(Box<ViolationCertificate>),
    Tree(TreeError),
}

impl fmt::Display for VerifyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VerifyError::Mismatch(c) => write!(f, "{c}"),
            VerifyError::Tree(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for VerifyError {}

pub(crate) fn verify_at(
    tree: &WeightedTree,
    table: &DissimilarityTable,
    context: &CertificateContext,
) -> Result<usize, VerifyError> {
    let computed = evaluate_indices(tree, table.indices()).map_err(VerifyError::Tree)?;
    let mismatched: Vec<&Index> =
        table.iter().filter(|(i, v)| !table.eq(&computed[*i], v)).map(|(i, _)| i).collect();
    let Some(&first) = mismatched.first() else {
        return Ok(table.len());
    };
    let mut cert = ViolationCertificate::from_forms(
        ConditionTag::VerifyMismatch,
        first.support(),
        LinearForm::entry(first.clone()),
        LinearForm::constant(computed[first].clone()),
        table,
        context.clone(),
    )
    .with_detail(format!("{} of {} entries disagree with the tree", mismatched.len(), table.len()));
    cert.indices = mismatched.into_iter().cloned().collect();
    Err(VerifyError::Mismatch(Box::new(cert)))
}

/// Verification inside the engines, where trees always cover the level labels.
pub(crate) fn verify_level(
    tree: &WeightedTree,
    table: &DissimilarityTable,
    context: &CertificateContext,
) -> Result<(), ViolationCertificate> {
    match verify_at(tree, table, context) {
        Ok(_) => Ok(()),
        Err(VerifyError::Mismatch(c)) => Err(*c),
        Err(VerifyError::Tree(e)) => panic!("engine tree does not cover the table: {e}"),
    }
}

pub(crate) fn star_topology(labels: &[Label]) -> WeightedTree {
    let mut b = TreeBuilder::new();
    if let [p, q] = labels {
        let (p, q) = (b.add_leaf(*p), b.add_leaf(*q));
        b.add_edge(p, q, Scalar::zero());
    } else {
        let center = b.add_internal();
        for &l in labels {
            let leaf = b.add_leaf(l);
            b.add_edge(center, leaf, Scalar::zero());
        }
    }
    b.build().expect("star topology")
}

/// `alpha` on one side of an internal edge, `beta` on the other.
pub(crate) fn split_topology(alpha: &BTreeSet<Label>, beta: &BTreeSet<Label>) -> WeightedTree {
    let mut b = TreeBuilder::new();
    let u = b.add_internal();
    let v = b.add_internal();
    b.add_edge(u, v, Scalar::zero());
    for (side, hub) in [(alpha, u), (beta, v)] {
        for &l in side {
            let leaf = b.add_leaf(l);
            b.add_edge(hub, leaf, Scalar::zero());
        }
    }
    b.build().expect("split topology")
}

fn quartet_tree(
    alpha: &BTreeMap<Label, Scalar>,
    beta: &BTreeMap<Label, Scalar>,
    f: Scalar,
) -> WeightedTree {
    let mut b = TreeBuilder::new();
    let u = b.add_internal();
    let v = b.add_internal();
    b.add_edge(u, v, f);
    for (side, hub) in [(alpha, u), (beta, v)] {
        for (&l, w) in side {
            let leaf = b.add_leaf(l);
            b.add_edge(hub, leaf, w.clone());
        }
    }
    b.build().expect("quartet tree")
}

/// Tables on at most three labels: the unique topology, weights solved
/// from the entries and verified.
pub fn base_case_small(table: &DissimilarityTable) -> Result<WeightedTree, ViolationCertificate> {
    base_case_small_at(table, &CertificateContext::default())
}

pub(crate) fn base_case_small_at(
    table: &DissimilarityTable,
    context: &CertificateContext,
) -> Result<WeightedTree, ViolationCertificate> {
    assert!(table.universe().len() <= 3, "base case takes at most three labels");
    solve_weights_at(&star_topology(table.universe()), table, context)
}

/// Tables whose labels form a single pseudocherry.
pub fn star_solve(table: &DissimilarityTable) -> Result<WeightedTree, ViolationCertificate> {
    solve_weights_at(&star_topology(table.universe()), table, &CertificateContext::default())
}

/// The internal edge of a quartet `α | β` with twigs known:
/// `D[i ∪ Y] − D[j ∪ Y] − D[i ∪ W] + D[j ∪ W]` for `Y ⊆ β` and `W` meeting
/// both sides, or the pair formula when only pairs are available.
fn internal_edge(
    table: &DissimilarityTable,
    alpha: &BTreeSet<Label>,
    beta: &BTreeSet<Label>,
) -> Option<LinearForm> {
    let d = |i: Label, j: Label, x: &Index| LinearForm::entry(x.with(i)) - LinearForm::entry(x.with(j));
    for &i in alpha {
        for &j in beta {
            let xs = admissible_complements(table, i, j);
            let y = xs.iter().find(|x| x.is_subset_of(beta));
            let w = xs.iter().find(|x| x.meets(alpha) && x.meets(beta));
            if let (Some(y), Some(w)) = (y, w) {
                return Some(d(i, j, y) - d(i, j, w));
            }
        }
    }
    let (a, b): (Vec<Label>, Vec<Label>) = (alpha.iter().copied().collect(), beta.iter().copied().collect());
    let pair = |x: Label, y: Label| LinearForm::entry(Index::new(vec![x, y]));
    let needed =
        [[a[0], b[0]], [a[1], b[1]], [a[0], a[1]], [b[0], b[1]]].map(|p| Index::new(p.to_vec()));
    if needed.iter().all(|i| table.contains(i)) {
        return Some((pair(a[0], b[0]) + pair(a[1], b[1]) - pair(a[0], a[1]) - pair(b[0], b[1])).half());
    }
    None
}

/// Builds and verifies the quartet tree for one pairing.
pub(crate) fn quartet_attempt(
    table: &DissimilarityTable,
    alpha: &BTreeSet<Label>,
    beta: &BTreeSet<Label>,
    context: &CertificateContext,
) -> Result<WeightedTree, ViolationCertificate> {
    let tw = |side: &BTreeSet<Label>| match twig_lengths_at(table, side, context) {
        Ok(t) => Ok(Some(t)),
        Err(TwigError::NotDerivable(_)) => Ok(None),
        Err(TwigError::Inconsistent(c)) => Err(*c),
    };
    let (ta, tb) = (tw(alpha)?, tw(beta)?);
    let f = internal_edge(table, alpha, beta);
    match (ta, tb, f) {
        (Some(ta), Some(tb), Some(f)) => {
            let f = f.evaluate(table).expect("internal edge uses table entries");
            let tree = quartet_tree(&ta.values, &tb.values, f);
            verify_level(&tree, table, context)?;
            Ok(tree)
        }
        _ => solve_weights_at(&split_topology(alpha, beta), table, context),
    }
}

/// The three pairings of four labels, in fixed order.
pub(crate) fn pairings(labels: &[Label]) -> Vec<(BTreeSet<Label>, BTreeSet<Label>)> {
    let [a, b, c, d] = [labels[0], labels[1], labels[2], labels[3]];
    vec![
        (BTreeSet::from([a, b]), BTreeSet::from([c, d])),
        (BTreeSet::from([a, c]), BTreeSet::from([b, d])),
        (BTreeSet::from([a, d]), BTreeSet::from([b, c])),
    ]
}

/// Four-label tables: tries each pairing in turn.
pub fn base_case_4(table: &DissimilarityTable) -> Result<WeightedTree, ViolationCertificate> {
    let mut engine = Engine::new(Mode::Construct);
    engine.base_case_4(table, &CertificateContext::default()).map(|s| s.tree)
}

/// Constructive reconstruction; levels whose twigs cannot be read off the
/// table are solved by the linear engine.
pub fn reconstruct_constructive(table: &DissimilarityTable) -> ReconstructionResult {
    let mut engine = Engine::new(Mode::Construct);
    engine.run(table).map(|s| Reconstruction {
        tree: s.tree,
        engine: EngineKind::Constructive,
        trace: s.trace,
    })
}

pub fn reconstruct_linear(table: &DissimilarityTable) -> ReconstructionResult {
    linear_at(table, &[]).map(|s| Reconstruction { tree: s.tree, engine: EngineKind::Linear, trace: s.trace })
}

pub fn reconstruct(table: &DissimilarityTable, engine: EngineKind) -> ReconstructionResult {
    match engine {
        EngineKind::Constructive => reconstruct_constructive(table),
        EngineKind::Linear => reconstruct_linear(table),
    }
}

pub(crate) fn is_fixed_k_subsets_above_pairs(shape: FamilyShape) -> bool {
    matches!(shape, FamilyShape::FixedKSubsets { k } if k >= 3)
}
