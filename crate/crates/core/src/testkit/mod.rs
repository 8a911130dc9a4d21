//! Seeded random trees, a brute-force condition oracle and the round-trip
//! harness.

mod brute;
mod roundtrip;

use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;
use crate::table::{DissimilarityTable, Index};
use crate::tree::{Label, TreeBuilder, VertexId, WeightedTree};

pub use brute::{bruteforce_conditions, BruteError, BruteReport, BRUTE_FORCE_LIMIT};
pub use roundtrip::{roundtrip_trial, run_trials, EngineChoice, TrialOptions, TrialReport, TrialSummary};

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorConfig {
    pub n: usize,
    pub seed: u64,
    /// Closed interval the edge weights are drawn from.
    pub weight_range: (Scalar, Scalar),
    pub positive_only: bool,
    pub max_degree: usize,
}

impl GeneratorConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        GeneratorConfig {
            n,
            seed,
            weight_range: (Scalar::from_int(-10), Scalar::from_int(10)),
            positive_only: false,
            max_degree: 4,
        }
    }

    pub fn positive(mut self) -> Self {
        self.positive_only = true;
        self
    }
}

pub const MAX_DENOMINATOR: i64 = 16;

fn rational(s: &Scalar) -> BigRational {
    match s {
        Scalar::Exact(q) => q.clone(),
        Scalar::Real(x) => BigRational::from_float(*x).expect("finite bound"),
    }
}

/// A nonzero rational `p/q` with `q ≤ 16` inside the configured range.
fn sample_weight(rng: &mut ChaCha8Rng, cfg: &GeneratorConfig) -> Scalar {
    let (lo, hi) = (rational(&cfg.weight_range.0), rational(&cfg.weight_range.1));
    loop {
        let q = rng.gen_range(1..=MAX_DENOMINATOR);
        let qr = BigRational::from_integer(q.into());
        let mut p_lo = (&lo * &qr).ceil().to_integer().to_i64().expect("small bound");
        let p_hi = (&hi * &qr).floor().to_integer().to_i64().expect("small bound");
        if cfg.positive_only {
            p_lo = p_lo.max(1);
        }
        if p_lo > p_hi {
            continue;
        }
        let p = rng.gen_range(p_lo..=p_hi);
        if p != 0 {
            return Scalar::ratio(p, q);
        }
    }
}

/// A random canonical tree on labels `1..=n`: leaves are added one at a time,
/// either subdividing a random edge or joining an internal vertex of degree
/// below `max_degree`. Zero weights are never drawn.
pub fn random_tree(cfg: &GeneratorConfig) -> WeightedTree {
    assert!(cfg.n >= 2, "a tree needs at least two leaves");
    assert!(cfg.max_degree >= 3, "max_degree must be at least 3");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut labels: Vec<Option<Label>> = Vec::new();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    if cfg.n == 2 {
        labels = vec![Some(1), Some(2)];
        edges.push((0, 1));
    } else {
        labels.push(None);
        for l in 1..=3 {
            labels.push(Some(l));
            edges.push((0, l as usize));
        }
        for l in 4..=cfg.n as Label {
            let degree = |v: usize, edges: &[(usize, usize)]| edges.iter().filter(|e| e.0 == v || e.1 == v).count();
            let hubs: Vec<usize> = (0..labels.len())
                .filter(|&v| labels[v].is_none() && degree(v, &edges) < cfg.max_degree)
                .collect();
            let choice = rng.gen_range(0..edges.len() + hubs.len());
            let leaf = labels.len();
            labels.push(Some(l));
            if choice < edges.len() {
                let (a, b) = edges[choice];
                let mid = labels.len();
                labels.push(None);
                edges[choice] = (a, mid);
                edges.push((mid, b));
                edges.push((mid, leaf));
            } else {
                edges.push((hubs[choice - edges.len()], leaf));
            }
        }
    }
    let mut b = TreeBuilder::new();
    for l in &labels {
        b.add_vertex(*l);
    }
    for (x, y) in edges {
        let w = sample_weight(&mut rng, cfg);
        b.add_edge(VertexId(x), VertexId(y), w);
    }
    b.build().expect("generated tree is valid")
}

/// Adds one to an entry chosen uniformly at random.
pub fn perturb_random_entry(table: &DissimilarityTable, seed: u64) -> (DissimilarityTable, Index) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let indices: Vec<&Index> = table.indices().collect();
    let index = (*indices.choose(&mut rng).expect("nonempty table")).clone();
    let value = table.get(&index).expect("entry") + Scalar::from_int(1);
    (table.with_entry(&index, value).expect("existing entry"), index)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_in_seed() {
        let cfg = GeneratorConfig::new(4, 7);
        assert_eq!(random_tree(&cfg), random_tree(&cfg));
        assert_ne!(random_tree(&cfg), random_tree(&GeneratorConfig::new(4, 8)));
    }

    #[test]
    fn structure_and_weights() {
        for seed in 0..50 {
            let cfg = GeneratorConfig::new(9, seed);
            let t = random_tree(&cfg);
            assert_eq!(t.leaf_count(), 9);
            assert!(t.is_canonical());
            for v in t.vertices().filter(|&v| t.label_of(v).is_none()) {
                assert!((3..=4).contains(&t.degree(v)));
            }
            for e in t.edges() {
                let w = e.weight.to_f64();
                assert!(w != 0.0 && (-10.0..=10.0).contains(&w));
                let Scalar::Exact(q) = &e.weight else { panic!("exact weights") };
                assert!(q.denom() <= &16.into());
            }
            let p = random_tree(&cfg.clone().positive());
            assert!(p.edges().iter().all(|e| e.weight.is_positive()));
        }
        assert_eq!(random_tree(&GeneratorConfig::new(2, 1)).edges().len(), 1);
    }

    #[test]
    fn perturbation_changes_one_entry() {
        let t = random_tree(&GeneratorConfig::new(5, 3));
        let table = crate::weights::generate_table(&t, &crate::table::IndexFamily::all_subsets(5)).unwrap();
        let (p, index) = perturb_random_entry(&table, 11);
        let diffs: Vec<&Index> = table.indices().filter(|i| table.get(i) != p.get(i)).collect();
        assert_eq!(diffs, vec![&index]);
    }
}
