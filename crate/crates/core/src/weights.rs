//! Forward direction: k-weights of a tree and full dissimilarity tables.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::scalar::{Equality, Scalar};
use crate::table::{enumerate_indices, DissimilarityTable, Index, IndexFamily, TableError};
use crate::tree::{Label, TreeError, VertexId, WeightedTree};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WeightsError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("family has {family} labels but the tree has {tree} leaves")]
    LeafCountMismatch { family: usize, tree: usize },
    #[error("family labels {family:?} differ from tree labels {tree:?}")]
    LabelMismatch { family: Vec<Label>, tree: Vec<Label> },
}

/// Total weight of the minimal subtree spanning `leaves`; 0 for one leaf.
pub fn subtree_weight(tree: &WeightedTree, leaves: &[Label]) -> Result<Scalar, TreeError> {
    let sub = tree.minimal_subtree(leaves)?;
    Ok(sub.edges.iter().map(|&e| &tree.edges()[e].weight).sum())
}

/// `w(x, N(x, T))`: signed weight from leaf `x` to its nearest branch vertex.
pub fn twig_weight(tree: &WeightedTree, x: Label) -> Result<Scalar, TreeError> {
    let leaf = tree.leaf(x)?;
    let branch = tree.nearest_branch_vertex(x, &tree.full_subtree())?;
    tree.w_distance(leaf, branch)
}

/// k-weight of a multiset index.
///
/// With at least two distinct labels this is the weight spanning the support
/// plus `(m_x − 1)·w(x, N(x, T))` for every label of multiplicity `m_x`. A
/// single label repeated `m ≥ 2` times weighs `m·w(x, N(x, T))`, and a lone
/// label weighs 0.
pub fn multiset_weight(tree: &WeightedTree, index: &Index) -> Result<Scalar, TreeError> {
    let counts = index.counts();
    match counts.as_slice() {
        [] => Err(TreeError::EmptyLeafSet),
        [(x, 1)] => {
            tree.leaf(*x)?;
            Ok(Scalar::zero())
        }
        [(x, m)] => Ok(twig_weight(tree, *x)?.scale(*m as i64)),
        _ => {
            let support: Vec<Label> = counts.iter().map(|(l, _)| *l).collect();
            let mut total = subtree_weight(tree, &support)?;
            for &(x, m) in &counts {
                if m > 1 {
                    total = total + twig_weight(tree, x)?.scale(m as i64 - 1);
                }
            }
            Ok(total)
        }
    }
}

/// Precomputed splits: an edge lies in the minimal subtree of a leaf set
/// exactly when the set has leaves on both of its sides.
struct Evaluator<'a> {
    tree: &'a WeightedTree,
    position: BTreeMap<Label, usize>,
    below: Vec<Vec<bool>>,
    twigs: BTreeMap<Label, Scalar>,
}

impl<'a> Evaluator<'a> {
    fn new(tree: &'a WeightedTree, need_twigs: bool) -> Result<Self, TreeError> {
        let position: BTreeMap<Label, usize> =
            tree.labels().enumerate().map(|(i, l)| (l, i)).collect();
        let n = position.len();
        let root = VertexId(0);
        let mut parent_edge = vec![None; tree.vertex_count()];
        let mut order = Vec::with_capacity(tree.vertex_count());
        let mut seen = vec![false; tree.vertex_count()];
        seen[root.0] = true;
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            order.push(v);
            for (w, e) in tree.neighbors(v) {
                if !seen[w.0] {
                    seen[w.0] = true;
                    parent_edge[w.0] = Some((v, e));
                    stack.push(w);
                }
            }
        }
        let mut below_vertex = vec![vec![false; n]; tree.vertex_count()];
        let mut below = vec![vec![false; n]; tree.edges().len()];
        for &v in order.iter().rev() {
            if let Some(l) = tree.label_of(v) {
                below_vertex[v.0][position[&l]] = true;
            }
            if let Some((p, e)) = parent_edge[v.0] {
                below[e] = below_vertex[v.0].clone();
                for (i, &b) in below[e].iter().enumerate() {
                    if b {
                        below_vertex[p.0][i] = true;
                    }
                }
            }
        }
        let twigs = if need_twigs {
            tree.labels().map(|l| Ok((l, twig_weight(tree, l)?))).collect::<Result<_, TreeError>>()?
        } else {
            BTreeMap::new()
        };
        Ok(Evaluator { tree, position, below, twigs })
    }

    fn support_weight(&self, support: &[usize]) -> Scalar {
        let mut total = Scalar::zero();
        for (e, side) in self.below.iter().enumerate() {
            let inside = support.iter().filter(|&&p| side[p]).count();
            if inside > 0 && inside < support.len() {
                total = total + &self.tree.edges()[e].weight;
            }
        }
        total
    }

    fn weight(&self, index: &Index) -> Result<Scalar, TreeError> {
        let counts = index.counts();
        if let [(x, m)] = counts.as_slice() {
            self.position.get(x).ok_or(TreeError::UnknownLabel(*x))?;
            return Ok(if *m == 1 { Scalar::zero() } else { self.twig(*x)?.scale(*m as i64) });
        }
        let mut support = Vec::with_capacity(counts.len());
        for (l, _) in &counts {
            support.push(*self.position.get(l).ok_or(TreeError::UnknownLabel(*l))?);
        }
        let mut total = self.support_weight(&support);
        for &(x, m) in &counts {
            if m > 1 {
                total = total + self.twig(x)?.scale(m as i64 - 1);
            }
        }
        Ok(total)
    }

    fn twig(&self, x: Label) -> Result<&Scalar, TreeError> {
        self.twigs.get(&x).ok_or(TreeError::NoBranchVertex(x))
    }
}

/// k-weights of `tree` for each of `indices`.
pub fn evaluate_indices<'i>(
    tree: &WeightedTree,
    indices: impl IntoIterator<Item = &'i Index>,
) -> Result<BTreeMap<Index, Scalar>, TreeError> {
    let indices: Vec<&Index> = indices.into_iter().collect();
    let need_twigs = indices.iter().any(|i| i.has_repeats());
    let eval = Evaluator::new(tree, need_twigs)?;
    indices.into_iter().map(|i| Ok((i.clone(), eval.weight(i)?))).collect()
}

/// The full table of k-weights of `tree` over `family`. The family's label
/// universe must be exactly the tree's leaf labels.
pub fn generate_table(
    tree: &WeightedTree,
    family: &IndexFamily,
) -> Result<DissimilarityTable, WeightsError> {
    if family.n() != tree.leaf_count() {
        return Err(WeightsError::LeafCountMismatch { family: family.n(), tree: tree.leaf_count() });
    }
    let tree_labels: BTreeSet<Label> = tree.labels().collect();
    if !family.universe().iter().all(|l| tree_labels.contains(l)) {
        return Err(WeightsError::LabelMismatch {
            family: family.universe().to_vec(),
            tree: tree_labels.into_iter().collect(),
        });
    }
    let indices = enumerate_indices(family)?;
    let entries = evaluate_indices(tree, &indices)?;
    let exact = tree.edges().iter().all(|e| e.weight.is_exact());
    let table = DissimilarityTable::new(family.clone(), entries)?;
    Ok(if exact { table } else { table.with_equality(Equality::tolerant()) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::newick::parse_newick;
    use crate::table::reduce_table;

    fn t0() -> WeightedTree {
        parse_newick("((1:2,2:3):4,3:-1,4:5);").unwrap()
    }

    fn idx(labels: &[Label]) -> Index {
        Index::from_slice(labels)
    }

    #[test]
    fn subtree_weights_on_t0() {
        let t = t0();
        assert_eq!(subtree_weight(&t, &[1, 3]).unwrap(), Scalar::from_int(5));
        assert_eq!(subtree_weight(&t, &[1, 2, 3]).unwrap(), Scalar::from_int(8));
        assert_eq!(subtree_weight(&t, &[1, 2, 3, 4]).unwrap(), Scalar::from_int(13));
        assert_eq!(subtree_weight(&t, &[4]).unwrap(), Scalar::zero());
        assert_eq!(subtree_weight(&t, &[]), Err(TreeError::EmptyLeafSet));
        assert_eq!(subtree_weight(&t, &[1, 9]), Err(TreeError::UnknownLabel(9)));
    }

    #[test]
    fn multiset_weights_on_t0() {
        let t = t0();
        assert_eq!(multiset_weight(&t, &idx(&[1, 1, 3])).unwrap(), Scalar::from_int(7));
        assert_eq!(multiset_weight(&t, &idx(&[3, 3])).unwrap(), Scalar::from_int(-2));
        assert_eq!(multiset_weight(&t, &idx(&[1, 1, 1])).unwrap(), Scalar::from_int(6));
        assert_eq!(multiset_weight(&t, &idx(&[1, 1])).unwrap(), Scalar::from_int(4));
        assert_eq!(multiset_weight(&t, &idx(&[2, 2, 2])).unwrap(), Scalar::from_int(9));
        assert_eq!(multiset_weight(&t, &idx(&[2])).unwrap(), Scalar::zero());
    }

    #[test]
    fn repeats_need_a_branch_vertex() {
        let t = parse_newick("(1:1,2:1);").unwrap();
        assert_eq!(multiset_weight(&t, &idx(&[1, 2])).unwrap(), Scalar::from_int(2));
        assert_eq!(multiset_weight(&t, &idx(&[1, 1, 2])), Err(TreeError::NoBranchVertex(1)));
        assert!(generate_table(&t, &IndexFamily::fixed_k_multisets(2, 2)).is_err());
    }

    #[test]
    fn tables_on_t0() {
        let t = t0();
        let all = generate_table(&t, &IndexFamily::all_subsets(4)).unwrap();
        assert_eq!(all.len(), 11);
        let pairs = generate_table(&t, &IndexFamily::fixed_k_multisets(4, 2)).unwrap();
        assert_eq!(pairs.len(), 10);
        assert_eq!(pairs.value(&[2, 4]), Some(&Scalar::from_int(12)));
        assert_eq!(pairs.value(&[1, 1]), Some(&Scalar::from_int(4)));
        let multi = generate_table(&t, &IndexFamily::all_multisets(4, 3)).unwrap();
        assert_eq!(multi.len(), 30);
        for (i, v) in multi.iter() {
            assert_eq!(&multiset_weight(&t, i).unwrap(), v, "{i}");
        }
        assert_eq!(
            generate_table(&t, &IndexFamily::all_subsets(5)),
            Err(WeightsError::LeafCountMismatch { family: 5, tree: 4 })
        );
    }

    #[test]
    fn reduction_matches_collapsed_tree() {
        let t = t0();
        let table = generate_table(&t, &IndexFamily::all_subsets(4)).unwrap();
        let twigs = BTreeMap::from([(1, Scalar::from_int(2)), (2, Scalar::from_int(3))]);
        let reduced = reduce_table(&table, &BTreeSet::from([1, 2]), &twigs, 5).unwrap();
        let star = parse_newick("(5:4,3:-1,4:5);").unwrap();
        let expected = evaluate_indices(&star, reduced.indices()).unwrap();
        for (i, v) in reduced.iter() {
            assert_eq!(&expected[i], v, "{i}");
        }
    }

    #[test]
    fn repeated_fresh_label_breaks_the_collapse_formula() {
        let t = t0();
        let table = generate_table(&t, &IndexFamily::all_subsets(4)).unwrap();
        let formula = table.value(&[1, 2, 3]).unwrap() - Scalar::from_int(2) - Scalar::from_int(3);
        let star = parse_newick("(5:4,3:-1,4:5);").unwrap();
        let actual = multiset_weight(&star, &idx(&[5, 5, 3])).unwrap();
        assert_eq!(formula, Scalar::from_int(3));
        assert_eq!(actual, Scalar::from_int(7));
    }

    #[test]
    fn real_weights_give_tolerant_tables() {
        let t = t0().to_real();
        let table = generate_table(&t, &IndexFamily::all_subsets(4)).unwrap();
        assert!(matches!(table.equality(), Equality::Tolerant { .. }));
        assert!((table.value(&[1, 2, 3, 4]).unwrap().to_f64() - 13.0).abs() < 1e-12);
    }
}
