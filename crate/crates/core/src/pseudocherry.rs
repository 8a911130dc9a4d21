//! The star relation between two labels and the partition of a table's
//! labels into complete pseudocherries.

use std::collections::{BTreeMap, BTreeSet};

use crate::certificate::{CertificateContext, ConditionTag, LinearForm, ViolationCertificate};
use crate::scalar::Scalar;
use crate::table::{DissimilarityTable, Index};
use crate::tree::Label;

/// Outcome of testing whether `D[e ∪ X] − D[e' ∪ X]` is independent of `X`.
#[derive(Clone, Debug, PartialEq)]
pub struct StarWitness {
    pub pair: (Label, Label),
    pub holds: bool,
    /// Number of admissible `X`.
    pub instances: usize,
    pub constant: Option<Scalar>,
    pub counterexample: Option<(Index, Index)>,
}

impl StarWitness {
    pub fn is_vacuous(&self) -> bool {
        self.instances == 0
    }

    /// `D[e ∪ X] − D[e' ∪ X]` as a linear form.
    pub fn difference_form(&self, x: &Index) -> LinearForm {
        let (e, f) = self.pair;
        LinearForm::entry(x.with(e)) - LinearForm::entry(x.with(f))
    }

    pub fn certificate(
        &self,
        table: &DissimilarityTable,
        context: &CertificateContext,
    ) -> Option<ViolationCertificate> {
        let (x0, x1) = self.counterexample.as_ref()?;
        Some(
            ViolationCertificate::from_forms(
                ConditionTag::StarFail,
                vec![self.pair.0, self.pair.1],
                self.difference_form(x0),
                self.difference_form(x1),
                table,
                context.clone(),
            )
            .with_detail(format!("X={x0} vs X={x1}")),
        )
    }
}

/// Admissible `X` for the pair, in index order: every `X` such that both
/// `e ∪ X` and `e' ∪ X` are entries of the table.
pub fn admissible_complements(table: &DissimilarityTable, e: Label, e2: Label) -> Vec<Index> {
    table
        .indices()
        .filter(|i| i.contains(e))
        .filter_map(|i| {
            let x = i.without_one(e)?;
            table.contains(&x.with(e2)).then_some(x)
        })
        .collect()
}

pub fn star_relation(table: &DissimilarityTable, e: Label, e2: Label) -> StarWitness {
    let mut constant: Option<(Index, Scalar)> = None;
    let mut instances = 0;
    for x in admissible_complements(table, e, e2) {
        let diff = table.get(&x.with(e)).expect("admissible") - table.get(&x.with(e2)).expect("admissible");
        instances += 1;
        match &constant {
            None => constant = Some((x, diff)),
            Some((x0, c)) if !table.eq(c, &diff) => {
                return StarWitness {
                    pair: (e, e2),
                    holds: false,
                    instances,
                    constant: None,
                    counterexample: Some((x0.clone(), x)),
                };
            }
            Some(_) => {}
        }
    }
    StarWitness {
        pair: (e, e2),
        holds: true,
        instances,
        constant: constant.map(|(_, c)| c),
        counterexample: None,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PseudocherryReport {
    /// Disjoint classes covering the universe, ordered by smallest label.
    pub classes: Vec<BTreeSet<Label>>,
    /// Witness for every unordered pair `(e, e')`, `e < e'`.
    pub witnesses: BTreeMap<(Label, Label), StarWitness>,
}

impl PseudocherryReport {
    pub fn nontrivial(&self) -> impl Iterator<Item = &BTreeSet<Label>> {
        self.classes.iter().filter(|c| c.len() >= 2)
    }

    /// The whole universe forms one pseudocherry.
    pub fn is_star(&self) -> bool {
        self.classes.len() == 1 && self.classes[0].len() >= 2
    }

    pub fn holds(&self, a: Label, b: Label) -> bool {
        a == b || self.witnesses[&(a.min(b), a.max(b))].holds
    }

    pub fn witness(&self, a: Label, b: Label) -> &StarWitness {
        &self.witnesses[&(a.min(b), a.max(b))]
    }

    /// A failing witness between two labels of different classes, used when
    /// no class is large enough to proceed.
    pub fn first_failure(&self) -> Option<&StarWitness> {
        self.witnesses.values().find(|w| !w.holds)
    }
}

/// Partitions the labels into complete pseudocherries by growing cliques of
/// the star relation in ascending label order. Fails with a certificate when
/// the relation is not transitive.
pub fn enumerate_complete_pseudocherries(
    table: &DissimilarityTable,
) -> Result<PseudocherryReport, ViolationCertificate> {
    pseudocherries_at(table, &CertificateContext::default())
}

pub(crate) fn pseudocherries_at(
    table: &DissimilarityTable,
    context: &CertificateContext,
) -> Result<PseudocherryReport, ViolationCertificate> {
    let labels = table.universe().to_vec();
    let mut witnesses = BTreeMap::new();
    for (i, &a) in labels.iter().enumerate() {
        for &b in &labels[i + 1..] {
            witnesses.insert((a, b), star_relation(table, a, b));
        }
    }
    let holds = |a: Label, b: Label| a == b || witnesses[&(a.min(b), a.max(b))].holds;
    for (i, &x) in labels.iter().enumerate() {
        for &z in &labels[i + 1..] {
            if holds(x, z) {
                continue;
            }
            if let Some(&y) = labels.iter().find(|&&y| y != x && y != z && holds(x, y) && holds(y, z)) {
                let cert = witnesses[&(x, z)]
                    .certificate(table, context)
                    .expect("failing witness has a counterexample");
                return Err(cert.with_detail(format!(
                    "star relation not transitive: holds for ({x},{y}) and ({y},{z}) but not ({x},{z})"
                )));
            }
        }
    }
    let mut assigned = BTreeSet::new();
    let mut classes = Vec::new();
    for &a in &labels {
        if assigned.contains(&a) {
            continue;
        }
        let mut class = BTreeSet::from([a]);
        for &b in labels.iter().filter(|&&b| b > a && !assigned.contains(&b)) {
            if class.iter().all(|&c| holds(b, c)) {
                class.insert(b);
            }
        }
        assigned.extend(class.iter().copied());
        classes.push(class);
    }
    Ok(PseudocherryReport { classes, witnesses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::newick::parse_newick;
    use crate::table::IndexFamily;
    use crate::weights::generate_table;

    fn table(newick: &str, family: IndexFamily) -> DissimilarityTable {
        generate_table(&parse_newick(newick).unwrap(), &family).unwrap()
    }

    fn t0() -> DissimilarityTable {
        table("((1:2,2:3):4,3:-1,4:5);", IndexFamily::all_subsets(4))
    }

    #[test]
    fn star_relation_on_t0() {
        let t = t0();
        let w = star_relation(&t, 1, 2);
        assert!(w.holds);
        assert_eq!(w.instances, 3);
        assert_eq!(w.constant, Some(Scalar::from_int(-1)));
        let w = star_relation(&t, 1, 3);
        assert!(!w.holds);
        assert_eq!(w.counterexample, Some((Index::from([2]), Index::from([4]))));
        let cert = w.certificate(&t, &CertificateContext::default()).unwrap();
        assert_eq!((cert.lhs.clone(), cert.rhs.clone()), (Scalar::from_int(-1), Scalar::from_int(7)));
        assert!(cert.replays_on(&t));
        let back = star_relation(&t, 2, 1);
        assert_eq!(back.constant, Some(Scalar::from_int(1)));
    }

    #[test]
    fn vacuous_when_no_common_complement() {
        let t = table("((1:2,2:3):4,3:-1,4:5);", IndexFamily::fixed_k_subsets(4, 4));
        let w = star_relation(&t, 1, 2);
        assert!(w.holds && w.is_vacuous());
    }

    #[test]
    fn partitions() {
        let r = enumerate_complete_pseudocherries(&t0()).unwrap();
        assert_eq!(r.classes, vec![BTreeSet::from([1, 2]), BTreeSet::from([3, 4])]);
        let star = table("(1:2,2:3,3:-1,4:5);", IndexFamily::all_subsets(4));
        let r = enumerate_complete_pseudocherries(&star).unwrap();
        assert!(r.is_star());
        let bumped = t0().with_entry(&Index::from([1, 3]), Scalar::from_int(6)).unwrap();
        let r = enumerate_complete_pseudocherries(&bumped).unwrap();
        assert_eq!(r.classes.len(), 4);
        assert_eq!(r.nontrivial().count(), 0);
    }

    #[test]
    fn single_complement_pairs_are_one_class() {
        let family = IndexFamily::fixed_k_subsets(3, 2);
        let entries = [([1, 2], 1), ([1, 3], 4), ([2, 3], 9)]
            .into_iter()
            .map(|(i, v)| (Index::from(i), Scalar::from_int(v)))
            .collect();
        let t = DissimilarityTable::new(family, entries).unwrap();
        assert!(enumerate_complete_pseudocherries(&t).unwrap().is_star());
    }

    proptest::proptest! {
        #[test]
        fn reports_are_complete_partitions(
            values in proptest::collection::vec(-2i64..3, 26),
            multiset in proptest::bool::ANY,
        ) {
            let family = if multiset {
                IndexFamily::fixed_k_multisets(4, 2)
            } else {
                IndexFamily::all_subsets(5)
            };
            let indices = crate::table::enumerate_indices(&family).unwrap();
            let entries = indices
                .into_iter()
                .zip(values.iter().map(|&v| Scalar::from_int(v)))
                .collect();
            let t = DissimilarityTable::new(family, entries).unwrap();
            let report = enumerate_complete_pseudocherries(&t).unwrap();
            let covered: BTreeSet<Label> = report.classes.iter().flatten().copied().collect();
            let total: usize = report.classes.iter().map(|c| c.len()).sum();
            proptest::prop_assert_eq!(total, covered.len());
            proptest::prop_assert_eq!(covered.into_iter().collect::<Vec<_>>(), t.universe().to_vec());
            for class in &report.classes {
                for &a in class {
                    for &b in class {
                        proptest::prop_assert!(report.holds(a, b));
                    }
                }
                for &out in t.universe().iter().filter(|l| !class.contains(l)) {
                    proptest::prop_assert!(!class.iter().all(|&c| report.holds(out, c)));
                }
            }
        }
    }
}
