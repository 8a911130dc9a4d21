//! Violation certificates. Both sides of a violated identity are kept as
//! linear forms over the entries of the table at the recursion level where
//! the identity was checked, together with the collapse trail that produced
//! that table, so any certificate can be re-evaluated from the input table.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Neg, Sub};

use thiserror::Error;

use crate::scalar::Scalar;
use crate::table::{
    collapse_by_representative, reduce_table, DissimilarityTable, Index, ReductionError,
};
use crate::tree::Label;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConditionTag {
    FourPoint,
    StarFail,
    Align1,
    Doubling2,
    Additivity3,
    AnchorK3,
    Recursive4,
    BasePairing,
    InconsistentReduction,
    VerifyMismatch,
    UnderdeterminedWeights,
}

impl ConditionTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConditionTag::FourPoint => "FourPoint",
            ConditionTag::StarFail => "StarFail",
            ConditionTag::Align1 => "Align1",
            ConditionTag::Doubling2 => "Doubling2",
            ConditionTag::Additivity3 => "Additivity3",
            ConditionTag::AnchorK3 => "AnchorK3",
            ConditionTag::Recursive4 => "Recursive4",
            ConditionTag::BasePairing => "BasePairing",
            ConditionTag::InconsistentReduction => "InconsistentReduction",
            ConditionTag::VerifyMismatch => "VerifyMismatch",
            ConditionTag::UnderdeterminedWeights => "UnderdeterminedWeights",
        }
    }
}

impl fmt::Display for ConditionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `constant + Σ coef·D[index]`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct LinearForm {
    pub terms: BTreeMap<Index, Scalar>,
    pub constant: Scalar,
}

impl LinearForm {
    pub fn entry(index: Index) -> Self {
        LinearForm { terms: BTreeMap::from([(index, Scalar::from_int(1))]), constant: Scalar::zero() }
    }

    pub fn constant(value: Scalar) -> Self {
        LinearForm { terms: BTreeMap::new(), constant: value }
    }

    pub fn scaled(&self, factor: &Scalar) -> Self {
        let mut out = LinearForm { terms: BTreeMap::new(), constant: &self.constant * factor };
        for (i, c) in &self.terms {
            let v = c * factor;
            if !v.is_zero() {
                out.terms.insert(i.clone(), v);
            }
        }
        out
    }

    pub fn half(&self) -> Self {
        self.scaled(&Scalar::ratio(1, 2))
    }

    fn add_term(&mut self, index: &Index, coef: &Scalar) {
        let v = self.terms.get(index).map(|c| c + coef).unwrap_or_else(|| coef.clone());
        if v.is_zero() {
            self.terms.remove(index);
        } else {
            self.terms.insert(index.clone(), v);
        }
    }

    pub fn evaluate(&self, table: &DissimilarityTable) -> Option<Scalar> {
        let mut total = self.constant.clone();
        for (i, c) in &self.terms {
            total = total + c * table.get(i)?;
        }
        Some(total)
    }

    pub fn indices(&self) -> impl Iterator<Item = &Index> {
        self.terms.keys()
    }
}

impl Add<&LinearForm> for LinearForm {
    type Output = LinearForm;
    fn add(mut self, rhs: &LinearForm) -> LinearForm {
        self.constant = &self.constant + &rhs.constant;
        for (i, c) in &rhs.terms {
            self.add_term(i, c);
        }
        self
    }
}

impl Add for LinearForm {
    type Output = LinearForm;
    fn add(self, rhs: LinearForm) -> LinearForm {
        self + &rhs
    }
}

impl Sub<&LinearForm> for LinearForm {
    type Output = LinearForm;
    fn sub(self, rhs: &LinearForm) -> LinearForm {
        self + &(-rhs)
    }
}

impl Sub for LinearForm {
    type Output = LinearForm;
    fn sub(self, rhs: LinearForm) -> LinearForm {
        self - &rhs
    }
}

impl Neg for &LinearForm {
    type Output = LinearForm;
    fn neg(self) -> LinearForm {
        self.scaled(&Scalar::from_int(-1))
    }
}

impl fmt::Display for LinearForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in &self.terms {
            let labels: Vec<String> = i.labels().iter().map(|l| l.to_string()).collect();
            let name = format!("D[{}]", labels.join(","));
            let one = Scalar::from_int(1);
            let minus_one = Scalar::from_int(-1);
            let text = if *c == one {
                name
            } else if *c == minus_one {
                format!("-{name}")
            } else {
                format!("{c}*{name}")
            };
            if first {
                f.write_str(&text)?;
            } else if let Some(rest) = text.strip_prefix('-') {
                write!(f, " - {rest}")?;
            } else {
                write!(f, " + {text}")?;
            }
            first = false;
        }
        if !self.constant.is_zero() || first {
            if first {
                write!(f, "{}", self.constant)?;
            } else if self.constant.is_positive() {
                write!(f, " + {}", self.constant)?;
            } else {
                write!(f, " - {}", self.constant.abs())?;
            }
        }
        Ok(())
    }
}

/// One collapse of a label set into a fresh label. Without twig values the
/// collapse copies the entries of the smallest member.
#[derive(Clone, Debug, PartialEq)]
pub struct CollapseStep {
    pub alpha: BTreeSet<Label>,
    pub fresh: Label,
    pub twigs: Option<BTreeMap<Label, Scalar>>,
}

impl CollapseStep {
    pub fn apply(&self, table: &DissimilarityTable) -> Result<DissimilarityTable, ReductionError> {
        match &self.twigs {
            Some(twigs) => reduce_table(table, &self.alpha, twigs, self.fresh),
            None => collapse_by_representative(table, &self.alpha, self.fresh),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct CertificateContext {
    pub alpha: Option<BTreeSet<Label>>,
    pub beta: Option<BTreeSet<Label>>,
    pub level: usize,
    pub trail: Vec<CollapseStep>,
}

impl CertificateContext {
    pub fn at(level: usize, trail: &[CollapseStep]) -> Self {
        CertificateContext { alpha: None, beta: None, level, trail: trail.to_vec() }
    }

    pub fn with_pair(mut self, alpha: &BTreeSet<Label>, beta: Option<&BTreeSet<Label>>) -> Self {
        self.alpha = Some(alpha.clone());
        self.beta = beta.cloned();
        self
    }

    /// Rebuilds the table this context refers to from the input table.
    pub fn level_table(&self, root: &DissimilarityTable) -> Result<DissimilarityTable, ReductionError> {
        let mut table = root.clone();
        for step in &self.trail {
            table = step.apply(&table)?;
        }
        Ok(table)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ViolationCertificate {
    pub tag: ConditionTag,
    /// The labels the failing instance is about, e.g. `(α_i, β_j)`.
    pub labels: Vec<Label>,
    pub indices: Vec<Index>,
    pub lhs: Scalar,
    pub rhs: Scalar,
    pub lhs_form: LinearForm,
    pub rhs_form: LinearForm,
    pub context: CertificateContext,
    pub detail: String,
    pub nested: Vec<ViolationCertificate>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReplayError {
    #[error("collapse trail does not replay: {0}")]
    Trail(#[from] ReductionError),
    #[error("certificate refers to index {0}, absent from the level table")]
    MissingEntry(Index),
}

impl ViolationCertificate {
    /// A certificate for `lhs ≠ rhs`, with values taken from `table`.
    pub fn from_forms(
        tag: ConditionTag,
        labels: Vec<Label>,
        lhs_form: LinearForm,
        rhs_form: LinearForm,
        table: &DissimilarityTable,
        context: CertificateContext,
    ) -> Self {
        let lhs = lhs_form.evaluate(table).expect("certificate terms are table entries");
        let rhs = rhs_form.evaluate(table).expect("certificate terms are table entries");
        let indices: BTreeSet<Index> =
            lhs_form.indices().chain(rhs_form.indices()).cloned().collect();
        ViolationCertificate {
            tag,
            labels,
            indices: indices.into_iter().collect(),
            lhs,
            rhs,
            lhs_form,
            rhs_form,
            context,
            detail: String::new(),
            nested: Vec::new(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    pub fn with_nested(mut self, nested: Vec<ViolationCertificate>) -> Self {
        self.nested = nested;
        self
    }

    pub fn level(&self) -> usize {
        self.context.level
    }

    /// Re-evaluates both sides starting from the input table.
    pub fn replay(&self, root: &DissimilarityTable) -> Result<(Scalar, Scalar), ReplayError> {
        let table = self.context.level_table(root)?;
        let eval = |form: &LinearForm| {
            form.evaluate(&table).ok_or_else(|| {
                ReplayError::MissingEntry(
                    form.indices().find(|i| !table.contains(i)).cloned().expect("missing entry"),
                )
            })
        };
        Ok((eval(&self.lhs_form)?, eval(&self.rhs_form)?))
    }

    /// True when replay reproduces the stored values and they differ.
    pub fn replays_on(&self, root: &DissimilarityTable) -> bool {
        match self.replay(root) {
            Ok((l, r)) => l == self.lhs && r == self.rhs && !root.eq(&l, &r),
            Err(_) => false,
        }
    }

    /// Same tag, same recursion context and same labels.
    pub fn equivalent(&self, other: &ViolationCertificate) -> bool {
        self.tag == other.tag
            && self.labels == other.labels
            && self.context.level == other.context.level
            && self.context.alpha == other.context.alpha
            && self.context.beta == other.context.beta
    }
}

fn set_text(set: &BTreeSet<Label>) -> String {
    let parts: Vec<String> = set.iter().map(|l| l.to_string()).collect();
    format!("{{{}}}", parts.join(","))
}

impl fmt::Display for ViolationCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CERTIFICATE {} level={}", self.tag, self.context.level)?;
        if let Some(a) = &self.context.alpha {
            write!(f, " alpha={}", set_text(a))?;
        }
        if let Some(b) = &self.context.beta {
            write!(f, " beta={}", set_text(b))?;
        }
        if !self.labels.is_empty() {
            let l: Vec<String> = self.labels.iter().map(|l| l.to_string()).collect();
            write!(f, " labels={}", l.join(","))?;
        }
        write!(f, " lhs={} rhs={}", self.lhs, self.rhs)?;
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        if !self.lhs_form.terms.is_empty() || !self.rhs_form.terms.is_empty() {
            write!(f, "\n  {} != {}", self.lhs_form, self.rhs_form)?;
        }
        for step in &self.context.trail {
            write!(f, "\n  after collapsing {} into {}", set_text(&step.alpha), step.fresh)?;
        }
        for n in &self.nested {
            for line in n.to_string().lines() {
                write!(f, "\n  | {line}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::parse_table;

    fn t0() -> DissimilarityTable {
        parse_table(
            "family=all-subsets n=4\n1,2\t5\n1,3\t5\n1,4\t11\n2,3\t6\n2,4\t12\n3,4\t4\n\
             1,2,3\t8\n1,2,4\t14\n1,3,4\t10\n2,3,4\t11\n1,2,3,4\t13\n",
        )
        .unwrap()
    }

    #[test]
    fn forms_combine_and_evaluate() {
        let t = t0();
        let f = LinearForm::entry(Index::from([1, 3])) - LinearForm::entry(Index::from([2, 3]));
        assert_eq!(f.evaluate(&t), Some(Scalar::from_int(-1)));
        let g = f.clone() + &f.half();
        assert_eq!(g.evaluate(&t), Some(Scalar::ratio(-3, 2)));
        let zero = f.clone() - f;
        assert!(zero.terms.is_empty());
        assert_eq!(zero.to_string(), "0");
        let h = LinearForm::entry(Index::from([1, 2])) - LinearForm::constant(Scalar::from_int(2));
        assert_eq!(h.to_string(), "D[1,2] - 2");
    }

    #[test]
    fn replay_through_a_collapse() {
        let t = t0();
        let twigs = BTreeMap::from([(1, Scalar::from_int(2)), (2, Scalar::from_int(3))]);
        let step = CollapseStep { alpha: BTreeSet::from([1, 2]), fresh: 5, twigs: Some(twigs) };
        let ctx = CertificateContext::at(1, std::slice::from_ref(&step));
        let level = ctx.level_table(&t).unwrap();
        let cert = ViolationCertificate::from_forms(
            ConditionTag::VerifyMismatch,
            vec![],
            LinearForm::entry(Index::from([3, 5])),
            LinearForm::constant(Scalar::from_int(4)),
            &level,
            ctx,
        );
        assert_eq!(cert.lhs, Scalar::from_int(3));
        assert!(cert.replays_on(&t));
        let bumped = t.with_entry(&Index::from([1, 3]), Scalar::from_int(6)).unwrap();
        assert!(!cert.replays_on(&bumped));
    }
}
