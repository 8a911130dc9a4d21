//! Topology by representative collapses, then one linear solve for every
//! edge weight against the whole table.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::engine::{no_pair_certificate, Solved};
use super::{pairings, split_topology, star_topology, verify_level, TraceStep};
use crate::certificate::{CertificateContext, CollapseStep, ConditionTag, LinearForm, ViolationCertificate};
use crate::linalg::RowReducer;
use crate::pseudocherry::{pseudocherries_at, PseudocherryReport};
use crate::scalar::Scalar;
use crate::table::{collapse_by_representative, DissimilarityTable, Index};
use crate::tree::{Label, WeightedTree};

/// For each edge, the leaf labels on one of its sides.
struct EdgeIncidence {
    sides: Vec<BTreeSet<Label>>,
    leaf_edge: BTreeMap<Label, usize>,
}

impl EdgeIncidence {
    fn new(tree: &WeightedTree) -> Self {
        let sides = (0..tree.edges().len())
            .map(|e| {
                let start = tree.edges()[e].ends.0;
                let mut seen = vec![false; tree.vertex_count()];
                seen[start.0] = true;
                let mut queue = VecDeque::from([start]);
                let mut side = BTreeSet::new();
                while let Some(v) = queue.pop_front() {
                    if let Some(l) = tree.label_of(v) {
                        side.insert(l);
                    }
                    for (w, f) in tree.neighbors(v) {
                        if f != e && !seen[w.0] {
                            seen[w.0] = true;
                            queue.push_back(w);
                        }
                    }
                }
                side
            })
            .collect();
        let leaf_edge = tree
            .labels()
            .map(|l| {
                let leaf = tree.leaf(l).expect("label of the tree");
                (l, tree.neighbors(leaf).next().expect("leaves have an edge").1)
            })
            .collect();
        EdgeIncidence { sides, leaf_edge }
    }

    /// Coefficients of `D[index]` in the edge weights. `None` when a repeated
    /// label has no branch vertex to measure its twig against.
    fn row(&self, index: &Index) -> Option<Vec<Scalar>> {
        let mut row = vec![Scalar::zero(); self.sides.len()];
        let counts = index.counts();
        let repeats = counts.iter().any(|&(_, m)| m > 1);
        if repeats && self.leaf_edge.len() < 3 {
            return None;
        }
        if let [(x, m)] = counts.as_slice() {
            row[self.leaf_edge[x]] = Scalar::from_int(*m as i64);
            return Some(row);
        }
        for (e, side) in self.sides.iter().enumerate() {
            let inside = counts.iter().filter(|(l, _)| side.contains(l)).count();
            if inside > 0 && inside < counts.len() {
                row[e] = Scalar::from_int(1);
            }
        }
        for &(x, m) in counts.iter().filter(|&&(_, m)| m > 1) {
            let e = self.leaf_edge[&x];
            row[e] = &row[e] + Scalar::from_int(m as i64 - 1);
        }
        Some(row)
    }
}

/// Edge weights of `topology` solved from `table`, then verified.
pub(crate) fn solve_weights_at(
    topology: &WeightedTree,
    table: &DissimilarityTable,
    context: &CertificateContext,
) -> Result<WeightedTree, ViolationCertificate> {
    let incidence = EdgeIncidence::new(topology);
    let unknowns = topology.edges().len();
    let mut reducer = RowReducer::new(unknowns, table.equality());
    let mut expressible = 0;
    for (index, value) in table.iter() {
        let Some(row) = incidence.row(index) else { continue };
        expressible += 1;
        if !reducer.is_full_rank() {
            reducer.push(row, value.clone());
        }
    }
    let underdetermined = |lhs: usize, rhs: usize, detail: String| {
        ViolationCertificate::from_forms(
            ConditionTag::UnderdeterminedWeights,
            topology.labels().collect(),
            LinearForm::constant(Scalar::from_int(lhs as i64)),
            LinearForm::constant(Scalar::from_int(rhs as i64)),
            table,
            context.clone(),
        )
        .with_detail(detail)
    };
    if expressible < table.len() {
        return Err(underdetermined(
            expressible,
            table.len(),
            "entries with repeated labels need a vertex of degree at least 3".into(),
        ));
    }
    let Some(weights) = reducer.solve() else {
        return Err(underdetermined(
            reducer.rank(),
            unknowns,
            format!("rank {} for {unknowns} edge weights", reducer.rank()),
        ));
    };
    let tree = topology.with_edge_weights(weights);
    verify_level(&tree, table, context)?;
    Ok(tree)
}

/// Topologies to try on four labels: the one the star relation points to,
/// then the other pairings, and the star.
fn quartet_candidates(labels: &[Label], report: &PseudocherryReport) -> Vec<WeightedTree> {
    let side_holds = |s: &BTreeSet<Label>| {
        let v: Vec<Label> = s.iter().copied().collect();
        report.holds(v[0], v[1])
    };
    let all = pairings(labels);
    let mut order: Vec<usize> = Vec::new();
    if let Some(p) = all.iter().position(|(a, b)| side_holds(a) && side_holds(b)) {
        order.push(p);
    }
    if let Some(p) = all.iter().position(|(a, b)| side_holds(a) || side_holds(b)) {
        if !order.contains(&p) {
            order.push(p);
        }
    }
    for p in 0..all.len() {
        if !order.contains(&p) {
            order.push(p);
        }
    }
    let mut out: Vec<WeightedTree> = order.into_iter().map(|p| split_topology(&all[p].0, &all[p].1)).collect();
    // With few admissible complements every pair can look related; the star
    // then goes first but the pairings are still tried.
    if report.is_star() {
        out.insert(0, star_topology(labels));
    } else {
        out.push(star_topology(labels));
    }
    out
}

/// The linear engine applied to a level table reached through `trail`.
pub(crate) fn linear_at(table: &DissimilarityTable, trail: &[CollapseStep]) -> Result<Solved, ViolationCertificate> {
    let base_level = trail.len();
    let mut level_table = table.clone();
    let mut steps = trail.to_vec();
    let mut expansions: Vec<(Label, BTreeSet<Label>)> = Vec::new();
    let mut trace = Vec::new();
    let candidates = loop {
        let level = steps.len();
        let context = CertificateContext::at(level, &steps);
        let labels = level_table.universe().to_vec();
        let m = labels.len();
        if m <= 3 {
            break vec![star_topology(&labels)];
        }
        let report = pseudocherries_at(&level_table, &context)?;
        if m == 4 {
            break quartet_candidates(&labels, &report);
        }
        if report.is_star() {
            break vec![star_topology(&labels)];
        }
        let classes: Vec<BTreeSet<Label>> =
            report.nontrivial().filter(|c| c.len() + 2 <= m).cloned().collect();
        if classes.is_empty() {
            return Err(no_pair_certificate(&level_table, &report, &context));
        }
        for alpha in classes {
            let fresh = level_table.next_fresh_label();
            level_table = collapse_by_representative(&level_table, &alpha, fresh)
                .expect("classes are disjoint subsets of the universe");
            trace.push(TraceStep::Collapse { level: steps.len(), alpha: alpha.clone(), fresh, twigs: None });
            steps.push(CollapseStep { alpha: alpha.clone(), fresh, twigs: None });
            expansions.push((fresh, alpha));
        }
    };
    let context = CertificateContext::at(base_level, trail);
    let mut first_failure = None;
    for candidate in candidates {
        let mut topology = candidate;
        for (fresh, alpha) in expansions.iter().rev() {
            let zeros: BTreeMap<Label, Scalar> = alpha.iter().map(|&l| (l, Scalar::zero())).collect();
            topology = topology.attach_cherry(*fresh, &zeros).expect("fresh label is a leaf");
        }
        match solve_weights_at(&topology, table, &context) {
            Ok(tree) => {
                trace.push(TraceStep::Linear { level: base_level, unknowns: topology.edges().len() });
                return Ok(Solved { tree, trace, pairs: Vec::new() });
            }
            Err(c) => {
                first_failure.get_or_insert(c);
            }
        }
    }
    Err(first_failure.expect("at least one candidate topology"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::newick::parse_newick;
    use crate::table::IndexFamily;
    use crate::weights::generate_table;

    const T0: &str = "((1:2,2:3):4,3:-1,4:5);";

    fn table(newick: &str, family: IndexFamily) -> DissimilarityTable {
        generate_table(&parse_newick(newick).unwrap(), &family).unwrap()
    }

    #[test]
    fn rows_follow_the_weight_convention() {
        let tree = parse_newick(T0).unwrap();
        let inc = EdgeIncidence::new(&tree);
        let weights: Vec<Scalar> = tree.edges().iter().map(|e| e.weight.clone()).collect();
        let fam = IndexFamily::all_multisets(4, 3);
        let t = generate_table(&tree, &fam).unwrap();
        for (index, value) in t.iter() {
            let row = inc.row(index).unwrap();
            let dot: Scalar = row.iter().zip(&weights).map(|(c, w)| c * w).sum();
            assert_eq!(&dot, value, "{index}");
        }
    }

    #[test]
    fn pair_table_of_t0() {
        let t = table(T0, IndexFamily::fixed_k_subsets(4, 2));
        let solved = linear_at(&t, &[]).unwrap();
        let mut weights: Vec<Scalar> = solved.tree.edges().iter().map(|e| e.weight.clone()).collect();
        weights.sort_by(|a, b| a.to_f64().total_cmp(&b.to_f64()));
        let expected: Vec<Scalar> = [-1, 2, 3, 4, 5].into_iter().map(Scalar::from_int).collect();
        assert_eq!(weights, expected);
    }

    #[test]
    fn all_of_four_is_underdetermined() {
        let t = table(T0, IndexFamily::fixed_k_subsets(4, 4));
        let c = linear_at(&t, &[]).unwrap_err();
        assert_eq!(c.tag, ConditionTag::UnderdeterminedWeights);
        assert!(c.replays_on(&t));
    }

    #[test]
    fn triples_of_a_star() {
        let t = table("(1:2,2:3,3:-1,4:5);", IndexFamily::fixed_k_subsets(4, 3));
        let solved = linear_at(&t, &[]).unwrap();
        assert_eq!(solved.tree.edges().len(), 4);
    }

    #[test]
    fn collapses_larger_trees() {
        let newick = "(((1:1,2:2):3,(3:1,4:-2):2):1,5:3,(6:2,7:1):4);";
        for family in [IndexFamily::fixed_k_subsets(7, 3), IndexFamily::fixed_k_subsets(7, 2)] {
            let t = table(newick, family);
            let solved = linear_at(&t, &[]).unwrap();
            assert!(solved.trace.iter().any(|s| matches!(s, TraceStep::Collapse { .. })));
            let all = IndexFamily::all_subsets(7);
            assert_eq!(
                generate_table(&solved.tree, &all).unwrap(),
                generate_table(&parse_newick(newick).unwrap(), &all).unwrap()
            );
        }
    }
}
