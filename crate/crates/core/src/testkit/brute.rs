//! Literal evaluation of every quantified instance of the conditions, in the
//! same search order as the fast check. Exponential in the label count.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::certificate::{CertificateContext, CollapseStep, ConditionTag, LinearForm, ViolationCertificate};
use crate::reconstruct::{
    base_case_small_at, linear_at, pairings, quartet_attempt, solve_weights_at, star_topology,
};
use crate::scalar::Scalar;
use crate::table::{sub_indices, DissimilarityTable, FamilyShape, Index, IndexFamily};
use crate::tree::{Label, WeightedTree};
use crate::weights::evaluate_indices;

pub const BRUTE_FORCE_LIMIT: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BruteError {
    #[error("brute force is limited to {limit} labels, table has {n}")]
    TooLarge { n: usize, limit: usize },
    #[error("max_card {max_card} exceeds n + 1 = {bound}")]
    CardinalityTooLarge { max_card: usize, bound: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct BruteReport {
    pub outcome: Result<WeightedTree, ViolationCertificate>,
    /// Instances evaluated per condition.
    pub instances: BTreeMap<ConditionTag, usize>,
    /// Failing instances found per condition.
    pub failures: BTreeMap<ConditionTag, usize>,
}

impl BruteReport {
    pub fn realizable(&self) -> bool {
        self.outcome.is_ok()
    }

    pub fn certificate(&self) -> Option<&ViolationCertificate> {
        self.outcome.as_ref().err()
    }

    pub fn count(&self, tag: ConditionTag) -> usize {
        self.instances.get(&tag).copied().unwrap_or(0)
    }
}

pub fn bruteforce_conditions(table: &DissimilarityTable) -> Result<BruteReport, BruteError> {
    let n = table.universe().len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(BruteError::TooLarge { n, limit: BRUTE_FORCE_LIMIT });
    }
    if let FamilyShape::AllMultisets { max_card } = table.shape() {
        if max_card > n + 1 {
            return Err(BruteError::CardinalityTooLarge { max_card, bound: n + 1 });
        }
    }
    let mut oracle = Oracle::default();
    let outcome = oracle.level(table, &[]);
    Ok(BruteReport { outcome, instances: oracle.instances, failures: oracle.failures })
}

type Cert = ViolationCertificate;

struct Twigs {
    values: BTreeMap<Label, Scalar>,
    forms: BTreeMap<Label, LinearForm>,
}

enum TwigOutcome {
    Found(Twigs),
    Missing,
}

#[derive(Default)]
struct Oracle {
    instances: BTreeMap<ConditionTag, usize>,
    failures: BTreeMap<ConditionTag, usize>,
}

fn d(i: Label, j: Label, x: &Index) -> LinearForm {
    LinearForm::entry(x.with(i)) - LinearForm::entry(x.with(j))
}

fn value(table: &DissimilarityTable, form: &LinearForm) -> Scalar {
    form.evaluate(table).expect("instance uses table entries")
}

/// Every candidate `X`: all indices over the universe one smaller than some
/// entry cardinality.
fn all_complements(table: &DissimilarityTable) -> Vec<Index> {
    let sizes: BTreeSet<usize> = table.indices().map(|i| i.len() - 1).filter(|&s| s >= 1).collect();
    let multiset = table.shape().is_multiset();
    sizes.into_iter().flat_map(|s| sub_indices(table.universe(), s, multiset)).collect()
}

fn complements_for(table: &DissimilarityTable, all: &[Index], e: Label, f: Label) -> Vec<Index> {
    all.iter().filter(|x| table.contains(&x.with(e)) && table.contains(&x.with(f))).cloned().collect()
}

fn keep_deeper(best: &mut Option<Cert>, candidate: Cert) {
    match best {
        Some(b) if b.level() >= candidate.level() => {}
        _ => *best = Some(candidate),
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Regime {
    Mixed,
    InAlpha,
    InBeta,
}

fn regime(x: &Index, alpha: &BTreeSet<Label>, beta: &BTreeSet<Label>) -> Option<Regime> {
    let meets = |s: &BTreeSet<Label>| x.labels().iter().any(|l| s.contains(l));
    let inside = |s: &BTreeSet<Label>| x.labels().iter().all(|l| s.contains(l));
    if meets(alpha) && meets(beta) {
        Some(Regime::Mixed)
    } else if inside(alpha) {
        Some(Regime::InAlpha)
    } else if inside(beta) {
        Some(Regime::InBeta)
    } else {
        None
    }
}

impl Oracle {
    fn count(&mut self, tag: ConditionTag, ok: bool) {
        *self.instances.entry(tag).or_default() += 1;
        if !ok {
            *self.failures.entry(tag).or_default() += 1;
        }
    }

    /// Star relation checked over every pair of admissible complements.
    fn star(&mut self, table: &DissimilarityTable, all: &[Index], e: Label, f: Label) -> Option<(Index, Index)> {
        let xs = complements_for(table, all, e, f);
        let vals: Vec<Scalar> = xs.iter().map(|x| value(table, &d(e, f, x))).collect();
        let mut first = None;
        for a in 0..xs.len() {
            for b in a + 1..xs.len() {
                let ok = table.eq(&vals[a], &vals[b]);
                self.count(ConditionTag::StarFail, ok);
                if !ok && first.is_none() {
                    first = Some((xs[a].clone(), xs[b].clone()));
                }
            }
        }
        first
    }

    fn star_cert(table: &DissimilarityTable, e: Label, f: Label, pair: &(Index, Index), ctx: &CertificateContext) -> Cert {
        ViolationCertificate::from_forms(
            ConditionTag::StarFail,
            vec![e, f],
            d(e, f, &pair.0),
            d(e, f, &pair.1),
            table,
            ctx.clone(),
        )
    }

    /// Pseudocherry classes by enumerating every label subset, plus the
    /// failing witnesses by pair.
    #[allow(clippy::type_complexity)]
    fn partition(
        &mut self,
        table: &DissimilarityTable,
        ctx: &CertificateContext,
    ) -> Result<(Vec<BTreeSet<Label>>, BTreeMap<(Label, Label), Option<(Index, Index)>>), Cert> {
        let labels = table.universe().to_vec();
        let all = all_complements(table);
        let mut witness = BTreeMap::new();
        for (a, &x) in labels.iter().enumerate() {
            for &y in &labels[a + 1..] {
                let w = self.star(table, &all, x, y);
                witness.insert((x, y), w);
            }
        }
        let holds = |x: Label, y: Label| x == y || witness[&(x.min(y), x.max(y))].is_none();
        for (a, &x) in labels.iter().enumerate() {
            for &z in &labels[a + 1..] {
                if holds(x, z) {
                    continue;
                }
                if labels.iter().any(|&y| y != x && y != z && holds(x, y) && holds(y, z)) {
                    let pair = witness[&(x, z)].clone().expect("failing pair");
                    return Err(Self::star_cert(table, x, z, &pair, ctx));
                }
            }
        }
        let m = labels.len();
        let mut cliques: Vec<BTreeSet<Label>> = Vec::new();
        for mask in 1u32..(1 << m) {
            let set: BTreeSet<Label> = (0..m).filter(|b| mask & (1 << b) != 0).map(|b| labels[b]).collect();
            if set.iter().all(|&a| set.iter().all(|&b| holds(a, b))) {
                cliques.push(set);
            }
        }
        let mut classes: Vec<BTreeSet<Label>> = cliques
            .iter()
            .filter(|c| !cliques.iter().any(|o| o.len() > c.len() && c.is_subset(o)))
            .cloned()
            .collect();
        classes.sort_by_key(|c| *c.iter().next().expect("nonempty"));
        Ok((classes, witness))
    }

    fn twigs(&mut self, table: &DissimilarityTable, alpha: &BTreeSet<Label>, ctx: &CertificateContext) -> Result<TwigOutcome, Cert> {
        let all = all_complements(table);
        let mut values = BTreeMap::new();
        let mut forms = BTreeMap::new();
        for &i in alpha {
            let mut derivations: Vec<((Label, usize), LinearForm)> = Vec::new();
            match table.shape().fixed_k() {
                None => {
                    for &j in alpha.iter().filter(|&&j| j != i) {
                        let pair = Index::new(vec![i, j]);
                        if !table.contains(&pair) {
                            continue;
                        }
                        for x in complements_for(table, &all, i, j) {
                            derivations.push(((j, 1), (LinearForm::entry(pair.clone()) + d(i, j, &x)).half()));
                        }
                    }
                }
                Some(k) => {
                    let inv = Scalar::ratio(1, k as i64);
                    let pure = Index::new(vec![i; k]);
                    if table.contains(&pure) {
                        derivations.push(((i, k), LinearForm::entry(pure).scaled(&inv)));
                    }
                    for &j in alpha.iter().filter(|&&j| j != i) {
                        let xs = complements_for(table, &all, i, j);
                        for ki in (0..k).rev() {
                            let mut l = vec![i; ki];
                            l.extend(std::iter::repeat_n(j, k - ki));
                            let anchor = Index::new(l);
                            if !table.contains(&anchor) {
                                continue;
                            }
                            for x in &xs {
                                let form = LinearForm::entry(anchor.clone())
                                    + d(i, j, x).scaled(&Scalar::from_int((k - ki) as i64));
                                derivations.push(((j, ki), form.scaled(&inv)));
                            }
                        }
                    }
                }
            }
            let Some((key0, first)) = derivations.first().cloned() else {
                return Ok(TwigOutcome::Missing);
            };
            let v0 = value(table, &first);
            for (key, form) in &derivations[1..] {
                if !table.eq(&value(table, form), &v0) {
                    let tag = if *key == key0 {
                        ConditionTag::StarFail
                    } else if table.shape().fixed_k().is_some() {
                        ConditionTag::AnchorK3
                    } else {
                        ConditionTag::Additivity3
                    };
                    return Err(ViolationCertificate::from_forms(tag, vec![i], first, form.clone(), table, ctx.clone()));
                }
            }
            values.insert(i, v0);
            forms.insert(i, first);
        }
        Ok(TwigOutcome::Found(Twigs { values, forms }))
    }

    fn alignment(&mut self, table: &DissimilarityTable, alpha: &BTreeSet<Label>, beta: &BTreeSet<Label>, ctx: &CertificateContext) -> Result<(), Cert> {
        let all = all_complements(table);
        let mut failure = None;
        for &i in alpha {
            for &j in beta {
                let xs = complements_for(table, &all, i, j);
                for r in [Regime::Mixed, Regime::InAlpha, Regime::InBeta] {
                    let group: Vec<&Index> = xs.iter().filter(|x| regime(x, alpha, beta) == Some(r)).collect();
                    for a in 0..group.len() {
                        for b in a + 1..group.len() {
                            let ok = table.eq(&value(table, &d(i, j, group[a])), &value(table, &d(i, j, group[b])));
                            self.count(ConditionTag::Align1, ok);
                            if !ok && failure.is_none() {
                                failure = Some(ViolationCertificate::from_forms(
                                    ConditionTag::Align1,
                                    vec![i, j],
                                    d(i, j, group[a]),
                                    d(i, j, group[b]),
                                    table,
                                    ctx.clone(),
                                ));
                            }
                        }
                    }
                }
                if let Some(c) = failure {
                    return Err(c);
                }
            }
        }
        Ok(())
    }

    fn doubling(&mut self, table: &DissimilarityTable, alpha: &BTreeSet<Label>, beta: &BTreeSet<Label>, ctx: &CertificateContext) -> Result<(), Cert> {
        let all = all_complements(table);
        for &i in alpha {
            for &j in beta {
                let xs = complements_for(table, &all, i, j);
                let group = |r| -> Vec<&Index> { xs.iter().filter(|x| regime(x, alpha, beta) == Some(r)).collect() };
                let (zs, ys, ws) = (group(Regime::InAlpha), group(Regime::InBeta), group(Regime::Mixed));
                let mut failure = None;
                for z in &zs {
                    for y in &ys {
                        for w in &ws {
                            let lhs = -&d(i, j, z) - d(i, j, y);
                            let rhs = d(i, j, w).scaled(&Scalar::from_int(-2));
                            let ok = table.eq(&value(table, &lhs), &value(table, &rhs));
                            self.count(ConditionTag::Doubling2, ok);
                            if !ok && failure.is_none() {
                                failure = Some(ViolationCertificate::from_forms(
                                    ConditionTag::Doubling2,
                                    vec![i, j],
                                    lhs,
                                    rhs,
                                    table,
                                    ctx.clone(),
                                ));
                            }
                        }
                    }
                }
                if let Some(c) = failure {
                    return Err(c);
                }
            }
        }
        Ok(())
    }

    fn additivity(&mut self, table: &DissimilarityTable, alpha: &BTreeSet<Label>, twigs: &Twigs, ctx: &CertificateContext) -> Result<(), Cert> {
        let mut failure = None;
        for index in table.indices() {
            let members: Vec<Label> = index.labels().iter().copied().filter(|l| alpha.contains(l)).collect();
            if members.len() < 2 {
                continue;
            }
            let delta: Vec<Label> = index.labels().iter().copied().filter(|l| !alpha.contains(l)).collect();
            let distinct: BTreeSet<Label> = members.iter().copied().collect();
            for &t in distinct.iter().rev() {
                let mut others = members.clone();
                others.remove(others.iter().position(|&l| l == t).expect("member"));
                let kept = if delta.is_empty() {
                    twigs.forms[&t].clone()
                } else {
                    let mut l = delta.clone();
                    l.push(t);
                    let j = Index::new(l);
                    if !table.contains(&j) {
                        continue;
                    }
                    LinearForm::entry(j)
                };
                let rhs = others.iter().fold(kept, |acc, o| acc + &twigs.forms[o]);
                let lhs = LinearForm::entry(index.clone());
                let ok = table.eq(&value(table, &lhs), &value(table, &rhs));
                self.count(ConditionTag::Additivity3, ok);
                if !ok && failure.is_none() {
                    failure = Some(ViolationCertificate::from_forms(
                        ConditionTag::Additivity3,
                        vec![t],
                        lhs,
                        rhs,
                        table,
                        ctx.clone(),
                    ));
                }
            }
            if let Some(c) = failure {
                return Err(c);
            }
        }
        Ok(())
    }

    fn anchor(&mut self, table: &DissimilarityTable, alpha: &BTreeSet<Label>, beta: &BTreeSet<Label>, ta: &Twigs, tb: &Twigs, ctx: &CertificateContext) -> Result<(), Cert> {
        let Some(k) = table.shape().fixed_k() else { return Ok(()) };
        let multiset = table.shape().is_multiset();
        let (av, bv): (Vec<Label>, Vec<Label>) = (alpha.iter().copied().collect(), beta.iter().copied().collect());
        for &i in &av {
            for &j in &bv {
                let mut failure = None;
                for s in 1..=k.saturating_sub(2) {
                    for a in sub_indices(&av, s, multiset) {
                        for b in sub_indices(&bv, s, multiset) {
                            for dd in sub_indices(table.universe(), k - 1 - s, multiset) {
                                for delta in dd.support() {
                                    let ids = [
                                        a.union(&dd).with(i),
                                        a.union(&dd).with(delta),
                                        b.union(&dd).with(j),
                                        b.union(&dd).with(delta),
                                    ];
                                    if !ids.iter().all(|x| table.contains(x)) {
                                        continue;
                                    }
                                    let [i1, i2, i3, i4] = ids.map(LinearForm::entry);
                                    let lhs = ta.forms[&i].clone() - &tb.forms[&j];
                                    let rhs = i1 - i2 - i3 + i4;
                                    let ok = table.eq(&value(table, &lhs), &value(table, &rhs));
                                    self.count(ConditionTag::AnchorK3, ok);
                                    if !ok && failure.is_none() {
                                        failure = Some(ViolationCertificate::from_forms(
                                            ConditionTag::AnchorK3,
                                            vec![i, j],
                                            lhs,
                                            rhs,
                                            table,
                                            ctx.clone(),
                                        ));
                                    }
                                }
                            }
                        }
                    }
                }
                if let Some(c) = failure {
                    return Err(c);
                }
            }
        }
        Ok(())
    }

    fn pair_conditions(&mut self, table: &DissimilarityTable, alpha: &BTreeSet<Label>, beta: &BTreeSet<Label>, ctx: &CertificateContext) -> Result<(), Cert> {
        let shape = table.shape();
        if !matches!(shape, FamilyShape::AllSubsets) {
            self.alignment(table, alpha, beta, ctx)?;
        }
        self.doubling(table, alpha, beta, ctx)?;
        match shape {
            FamilyShape::AllSubsets | FamilyShape::AllMultisets { .. } => {
                if let TwigOutcome::Found(t) = self.twigs(table, alpha, ctx)? {
                    self.additivity(table, alpha, &t, ctx)?;
                }
            }
            _ => {
                let ta = self.twigs(table, alpha, ctx)?;
                let tb = self.twigs(table, beta, ctx)?;
                if let (TwigOutcome::Found(ta), TwigOutcome::Found(tb)) = (ta, tb) {
                    self.anchor(table, alpha, beta, &ta, &tb, ctx)?;
                }
            }
        }
        Ok(())
    }

    /// Literal collapse of `alpha` to `fresh`.
    fn reduce(&mut self, table: &DissimilarityTable, alpha: &BTreeSet<Label>, twigs: &Twigs, fresh: Label, ctx: &CertificateContext) -> Result<DissimilarityTable, Cert> {
        let universe: Vec<Label> =
            table.universe().iter().copied().filter(|l| !alpha.contains(l)).chain([fresh]).collect();
        let mut entries: BTreeMap<Index, Scalar> = table
            .iter()
            .filter(|(i, _)| !i.labels().iter().any(|l| alpha.contains(l)))
            .map(|(i, v)| (i.clone(), v.clone()))
            .collect();
        let sizes: BTreeSet<usize> = table.indices().map(|i| i.len()).collect();
        let multiset = table.shape().is_multiset();
        for size in sizes {
            for target in sub_indices(&universe, size, multiset) {
                if target.multiplicity(fresh) != 1 {
                    continue;
                }
                let rest = target.without_one(fresh).expect("fresh present");
                let mut first: Option<(Label, Index, Scalar)> = None;
                for &member in alpha {
                    let source = rest.with(member);
                    let Some(v) = table.get(&source) else { continue };
                    let v = v - &twigs.values[&member];
                    match &first {
                        None => first = Some((member, source, v)),
                        Some((l0, s0, v0)) => {
                            if !table.eq(v0, &v) {
                                return Err(ViolationCertificate::from_forms(
                                    ConditionTag::InconsistentReduction,
                                    vec![*l0, member],
                                    LinearForm::entry(s0.clone()) - &twigs.forms[l0],
                                    LinearForm::entry(source) - &twigs.forms[&member],
                                    table,
                                    ctx.clone(),
                                ));
                            }
                        }
                    }
                }
                if let Some((_, _, v)) = first {
                    entries.insert(target, v);
                }
            }
        }
        let mut collapsed = table.collapsed().clone();
        let mut originals = BTreeSet::new();
        for m in alpha {
            originals.extend(collapsed.remove(m).unwrap_or_else(|| BTreeSet::from([*m])));
        }
        collapsed.insert(fresh, originals);
        let family = IndexFamily::with_universe(table.shape(), universe);
        Ok(DissimilarityTable::with_provenance(family, entries, collapsed)
            .expect("reduced table is well formed")
            .with_equality(table.equality()))
    }

    /// Forward-oracle verification; the first disagreeing entry in table order.
    fn verify(table: &DissimilarityTable, tree: &WeightedTree, ctx: &CertificateContext) -> Result<(), Cert> {
        let computed = evaluate_indices(tree, table.indices()).expect("tree covers the labels");
        match table.iter().find(|(i, v)| !table.eq(&computed[*i], v)) {
            None => Ok(()),
            Some((i, _)) => Err(ViolationCertificate::from_forms(
                ConditionTag::VerifyMismatch,
                i.support(),
                LinearForm::entry(i.clone()),
                LinearForm::constant(computed[i].clone()),
                table,
                ctx.clone(),
            )),
        }
    }

    fn no_pair(table: &DissimilarityTable, witness: &BTreeMap<(Label, Label), Option<(Index, Index)>>, ctx: &CertificateContext) -> Cert {
        let (&(e, f), pair) = witness.iter().find(|(_, w)| w.is_some()).expect("a failing pair");
        Self::star_cert(table, e, f, pair.as_ref().expect("failing"), ctx)
    }

    fn level(&mut self, table: &DissimilarityTable, trail: &[CollapseStep]) -> Result<WeightedTree, Cert> {
        let level = trail.len();
        let ctx = CertificateContext::at(level, trail);
        let labels = table.universe().to_vec();
        let m = labels.len();
        if m <= 3 {
            return base_case_small_at(table, &ctx);
        }
        if matches!(table.shape(), FamilyShape::FixedKSubsets { k } if k >= 3) {
            return linear_at(table, trail).map(|s| s.tree);
        }
        let (classes, witness) = self.partition(table, &ctx)?;
        if classes.len() == 1 {
            return solve_weights_at(&star_topology(&labels), table, &ctx);
        }
        if m == 4 {
            return self.quartet(table, &witness, &ctx);
        }
        let candidates: Vec<BTreeSet<Label>> = classes.into_iter().filter(|c| c.len() >= 2 && c.len() + 2 <= m).collect();
        if table.shape().fixed_k().is_some() {
            for c in &candidates {
                if let Ok(TwigOutcome::Missing) = self.twigs(table, c, &ctx.clone().with_pair(c, None)) {
                    return linear_at(table, trail).map(|s| s.tree);
                }
            }
        }
        let mut best = None;
        for alpha in &candidates {
            let mut partner = None;
            for beta in candidates.iter().filter(|b| *b != alpha) {
                let pctx = ctx.clone().with_pair(alpha, Some(beta));
                match self.pair_conditions(table, alpha, beta, &pctx) {
                    Ok(()) => {
                        partner = Some(beta);
                        break;
                    }
                    Err(c) => keep_deeper(&mut best, c),
                }
            }
            let Some(beta) = partner else { continue };
            match self.collapse(table, alpha, beta, trail) {
                Ok(t) => return Ok(t),
                Err(c) => keep_deeper(&mut best, c),
            }
        }
        Err(best.unwrap_or_else(|| Self::no_pair(table, &witness, &ctx)))
    }

    fn collapse(&mut self, table: &DissimilarityTable, alpha: &BTreeSet<Label>, beta: &BTreeSet<Label>, trail: &[CollapseStep]) -> Result<WeightedTree, Cert> {
        let ctx = CertificateContext::at(trail.len(), trail).with_pair(alpha, Some(beta));
        let twigs = match self.twigs(table, alpha, &ctx)? {
            TwigOutcome::Found(t) => t,
            TwigOutcome::Missing => return linear_at(table, trail).map(|s| s.tree),
        };
        let fresh = table.universe().iter().chain(table.collapsed().values().flatten()).max().expect("labels") + 1;
        let reduced = self.reduce(table, alpha, &twigs, fresh, &ctx)?;
        let mut next = trail.to_vec();
        next.push(CollapseStep { alpha: alpha.clone(), fresh, twigs: Some(twigs.values.clone()) });
        let inner = self.level(&reduced, &next)?;
        let tree = inner.attach_cherry(fresh, &twigs.values).expect("fresh label is a leaf");
        Self::verify(table, &tree, &ctx)?;
        Ok(tree)
    }

    fn quartet(&mut self, table: &DissimilarityTable, witness: &BTreeMap<(Label, Label), Option<(Index, Index)>>, ctx: &CertificateContext) -> Result<WeightedTree, Cert> {
        let labels = table.universe().to_vec();
        let mut failures = Vec::new();
        for (alpha, beta) in pairings(&labels) {
            let pctx = ctx.clone().with_pair(&alpha, Some(&beta));
            let attempt = (|| {
                for side in [&alpha, &beta] {
                    let v: Vec<Label> = side.iter().copied().collect();
                    if let Some(pair) = &witness[&(v[0], v[1])] {
                        return Err(Self::star_cert(table, v[0], v[1], pair, &pctx));
                    }
                }
                self.pair_conditions(table, &alpha, &beta, &pctx)?;
                quartet_attempt(table, &alpha, &beta, &pctx)
            })();
            match attempt {
                Ok(t) => return Ok(t),
                Err(c) => failures.push(c),
            }
        }
        let first = &failures[0];
        let cert = ViolationCertificate::from_forms(
            ConditionTag::BasePairing,
            labels,
            first.lhs_form.clone(),
            first.rhs_form.clone(),
            table,
            ctx.clone(),
        );
        Err(cert.with_nested(failures))
    }
}
