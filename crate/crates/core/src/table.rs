//! Indices, index families and dissimilarity tables, with the line-based
//! table file format and the collapse of a pseudocherry into a fresh label.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::scalar::{Equality, Scalar, ScalarParseError};
use crate::tree::Label;

/// A multiset of leaf labels, stored sorted. Indices order by cardinality,
/// then lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Index(Vec<Label>);

impl Index {
    pub fn new(mut labels: Vec<Label>) -> Self {
        labels.sort_unstable();
        Index(labels)
    }

    pub fn from_slice(labels: &[Label]) -> Self {
        Index::new(labels.to_vec())
    }

    pub fn labels(&self) -> &[Label] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn multiplicity(&self, label: Label) -> usize {
        self.0.iter().filter(|&&l| l == label).count()
    }

    pub fn contains(&self, label: Label) -> bool {
        self.0.binary_search(&label).is_ok()
    }

    /// Distinct labels with their multiplicities, ascending.
    pub fn counts(&self) -> Vec<(Label, usize)> {
        let mut out: Vec<(Label, usize)> = Vec::new();
        for &l in &self.0 {
            match out.last_mut() {
                Some((last, c)) if *last == l => *c += 1,
                _ => out.push((l, 1)),
            }
        }
        out
    }

    pub fn support(&self) -> Vec<Label> {
        self.counts().into_iter().map(|(l, _)| l).collect()
    }

    pub fn has_repeats(&self) -> bool {
        self.0.windows(2).any(|w| w[0] == w[1])
    }

    pub fn with(&self, label: Label) -> Index {
        let mut v = self.0.clone();
        let pos = v.partition_point(|&l| l <= label);
        v.insert(pos, label);
        Index(v)
    }

    pub fn without_one(&self, label: Label) -> Option<Index> {
        let pos = self.0.iter().position(|&l| l == label)?;
        let mut v = self.0.clone();
        v.remove(pos);
        Some(Index(v))
    }

    /// Sum of two multisets.
    pub fn union(&self, other: &Index) -> Index {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Index::new(v)
    }

    pub fn is_subset_of(&self, set: &BTreeSet<Label>) -> bool {
        self.0.iter().all(|l| set.contains(l))
    }

    pub fn meets(&self, set: &BTreeSet<Label>) -> bool {
        self.0.iter().any(|l| set.contains(l))
    }
}

impl Ord for Index {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Index {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Index {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|l| l.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

impl<const N: usize> From<[Label; N]> for Index {
    fn from(labels: [Label; N]) -> Self {
        Index::new(labels.to_vec())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FamilyShape {
    AllSubsets,
    AllMultisets { max_card: usize },
    FixedKSubsets { k: usize },
    FixedKMultisets { k: usize },
}

impl FamilyShape {
    pub fn is_multiset(&self) -> bool {
        matches!(self, FamilyShape::AllMultisets { .. } | FamilyShape::FixedKMultisets { .. })
    }

    pub fn fixed_k(&self) -> Option<usize> {
        match self {
            FamilyShape::FixedKSubsets { k } | FamilyShape::FixedKMultisets { k } => Some(*k),
            _ => None,
        }
    }

    pub fn keyword(&self) -> &'static str {
        match self {
            FamilyShape::AllSubsets => "all-subsets",
            FamilyShape::AllMultisets { .. } => "all-multisets",
            FamilyShape::FixedKSubsets { .. } => "fixed-k-subsets",
            FamilyShape::FixedKMultisets { .. } => "fixed-k-multisets",
        }
    }

    fn cardinalities(&self, n: usize) -> std::ops::RangeInclusive<usize> {
        match *self {
            FamilyShape::AllSubsets => 2..=n,
            FamilyShape::AllMultisets { max_card } => 2..=max_card,
            FamilyShape::FixedKSubsets { k } | FamilyShape::FixedKMultisets { k } => k..=k,
        }
    }
}

/// Which indices a table must contain, over an explicit label universe.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IndexFamily {
    pub shape: FamilyShape,
    universe: Vec<Label>,
}

impl IndexFamily {
    pub fn new(shape: FamilyShape, n: usize) -> Self {
        IndexFamily { shape, universe: (1..=n as Label).collect() }
    }

    pub fn all_subsets(n: usize) -> Self {
        Self::new(FamilyShape::AllSubsets, n)
    }

    /// `max_card` conventionally defaults to `n + 1`.
    pub fn all_multisets(n: usize, max_card: usize) -> Self {
        Self::new(FamilyShape::AllMultisets { max_card }, n)
    }

    pub fn fixed_k_subsets(n: usize, k: usize) -> Self {
        Self::new(FamilyShape::FixedKSubsets { k }, n)
    }

    pub fn fixed_k_multisets(n: usize, k: usize) -> Self {
        Self::new(FamilyShape::FixedKMultisets { k }, n)
    }

    pub fn with_universe(shape: FamilyShape, labels: impl IntoIterator<Item = Label>) -> Self {
        let set: BTreeSet<Label> = labels.into_iter().collect();
        IndexFamily { shape, universe: set.into_iter().collect() }
    }

    pub fn n(&self) -> usize {
        self.universe.len()
    }

    pub fn universe(&self) -> &[Label] {
        &self.universe
    }

    pub fn is_standard_universe(&self) -> bool {
        self.universe.iter().enumerate().all(|(i, &l)| l as usize == i + 1)
    }

    pub fn validate(&self) -> Result<(), TableError> {
        let n = self.n();
        if self.universe.contains(&0) {
            return Err(TableError::InvalidFamily("label 0 is not allowed".into()));
        }
        match self.shape {
            FamilyShape::AllSubsets if n < 2 => {
                Err(TableError::InvalidFamily("all-subsets needs at least 2 labels".into()))
            }
            FamilyShape::AllMultisets { max_card } if max_card < 2 => {
                Err(TableError::InvalidFamily("max_card must be at least 2".into()))
            }
            FamilyShape::FixedKSubsets { k } | FamilyShape::FixedKMultisets { k } if k < 2 => {
                Err(TableError::InvalidFamily("k must be at least 2".into()))
            }
            FamilyShape::FixedKSubsets { k } if k > n => {
                Err(TableError::InvalidFamily(format!("k = {k} exceeds n = {n}")))
            }
            _ if n == 0 => Err(TableError::InvalidFamily("empty label universe".into())),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for IndexFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "family={} n={}", self.shape.keyword(), self.n())?;
        match self.shape {
            FamilyShape::AllMultisets { max_card } => write!(f, " max_card={max_card}")?,
            FamilyShape::FixedKSubsets { k } | FamilyShape::FixedKMultisets { k } => {
                write!(f, " k={k}")?
            }
            FamilyShape::AllSubsets => {}
        }
        if !self.is_standard_universe() {
            let labels: Vec<String> = self.universe.iter().map(|l| l.to_string()).collect();
            write!(f, " labels={}", labels.join(","))?;
        }
        Ok(())
    }
}

/// Deterministic enumeration of a family, in [`Index`] order.
pub fn enumerate_indices(family: &IndexFamily) -> Result<Vec<Index>, TableError> {
    family.validate()?;
    Ok(enumerate_unchecked(family))
}

pub(crate) fn enumerate_unchecked(family: &IndexFamily) -> Vec<Index> {
    let mut out = Vec::new();
    let multiset = family.shape.is_multiset();
    for card in family.shape.cardinalities(family.n()) {
        let mut current = Vec::with_capacity(card);
        combos(&family.universe, card, 0, multiset, &mut current, &mut out);
    }
    out
}

/// Every index of cardinality `card` over `labels`, in index order.
pub(crate) fn sub_indices(labels: &[Label], card: usize, multiset: bool) -> Vec<Index> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(card);
    combos(labels, card, 0, multiset, &mut current, &mut out);
    out
}

fn combos(
    universe: &[Label],
    card: usize,
    start: usize,
    multiset: bool,
    current: &mut Vec<Label>,
    out: &mut Vec<Index>,
) {
    if current.len() == card {
        out.push(Index(current.clone()));
        return;
    }
    for i in start..universe.len() {
        current.push(universe[i]);
        combos(universe, card, if multiset { i } else { i + 1 }, multiset, current, out);
        current.pop();
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TableError {
    #[error("invalid family: {0}")]
    InvalidFamily(String),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("line {line}: malformed index `{text}`")]
    MalformedIndex { line: usize, text: String },
    #[error("line {line}: malformed value: {source}")]
    MalformedValue { line: usize, source: ScalarParseError },
    #[error("line {line}: unknown label {label}")]
    UnknownLabel { line: usize, label: Label },
    #[error("duplicate index {0}")]
    DuplicateIndex(Index),
    #[error("index {0} is not part of the family")]
    UnexpectedIndex(Index),
    #[error("incomplete table: {} missing indices, first {}", missing.len(), missing[0])]
    IncompleteTable { missing: Vec<Index> },
}

/// A total map from the indices of a family to scalar values.
///
/// Reduced tables record in `collapsed` which labels stand for collapsed
/// pseudocherries (and which original leaves they replace); indices in which
/// such a label repeats are not part of a reduced table.
#[derive(Clone, Debug, PartialEq)]
pub struct DissimilarityTable {
    family: IndexFamily,
    entries: BTreeMap<Index, Scalar>,
    collapsed: BTreeMap<Label, BTreeSet<Label>>,
    equality: Equality,
}

impl DissimilarityTable {
    /// Builds a table and checks that its entries cover the family exactly.
    pub fn new(family: IndexFamily, entries: BTreeMap<Index, Scalar>) -> Result<Self, TableError> {
        Self::with_provenance(family, entries, BTreeMap::new())
    }

    pub fn with_provenance(
        family: IndexFamily,
        entries: BTreeMap<Index, Scalar>,
        collapsed: BTreeMap<Label, BTreeSet<Label>>,
    ) -> Result<Self, TableError> {
        family.validate().or_else(|e| match family.shape {
            // Collapsing can shrink the universe below k; such tables are empty.
            FamilyShape::FixedKSubsets { .. } if !collapsed.is_empty() => Ok(()),
            _ => Err(e),
        })?;
        let table = DissimilarityTable { family, entries, collapsed, equality: Equality::Exact };
        let expected: BTreeSet<Index> = table.expected_indices().into_iter().collect();
        if let Some(extra) = table.entries.keys().find(|i| !expected.contains(i)) {
            return Err(TableError::UnexpectedIndex(extra.clone()));
        }
        let missing: Vec<Index> =
            expected.into_iter().filter(|i| !table.entries.contains_key(i)).collect();
        if !missing.is_empty() {
            return Err(TableError::IncompleteTable { missing });
        }
        Ok(table)
    }

    pub fn with_equality(mut self, equality: Equality) -> Self {
        self.equality = equality;
        self
    }

    pub fn family(&self) -> &IndexFamily {
        &self.family
    }

    pub fn shape(&self) -> FamilyShape {
        self.family.shape
    }

    pub fn universe(&self) -> &[Label] {
        self.family.universe()
    }

    pub fn equality(&self) -> Equality {
        self.equality
    }

    pub fn eq(&self, a: &Scalar, b: &Scalar) -> bool {
        self.equality.eq(a, b)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: &Index) -> Option<&Scalar> {
        self.entries.get(index)
    }

    pub fn value(&self, labels: &[Label]) -> Option<&Scalar> {
        self.entries.get(&Index::from_slice(labels))
    }

    pub fn contains(&self, index: &Index) -> bool {
        self.entries.contains_key(index)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Index, &Scalar)> {
        self.entries.iter()
    }

    pub fn indices(&self) -> impl Iterator<Item = &Index> {
        self.entries.keys()
    }

    /// Collapsed labels and the original leaves each one replaces.
    pub fn collapsed(&self) -> &BTreeMap<Label, BTreeSet<Label>> {
        &self.collapsed
    }

    pub fn is_reduced(&self) -> bool {
        !self.collapsed.is_empty()
    }

    /// True if some family index was left out because a collapsed label
    /// would repeat in it.
    pub fn is_partial(&self) -> bool {
        self.is_reduced() && self.entries.len() < enumerate_unchecked(&self.family).len()
    }

    /// Original leaves a label stands for.
    pub fn original_leaves(&self, label: Label) -> BTreeSet<Label> {
        self.collapsed.get(&label).cloned().unwrap_or_else(|| BTreeSet::from([label]))
    }

    /// The exact index domain this table must have.
    pub fn expected_indices(&self) -> Vec<Index> {
        let mut all = enumerate_unchecked(&self.family);
        if !self.collapsed.is_empty() {
            all.retain(|i| self.collapsed.keys().all(|&c| i.multiplicity(c) <= 1));
        }
        all
    }

    /// Returns a copy with one entry replaced.
    pub fn with_entry(&self, index: &Index, value: Scalar) -> Result<Self, TableError> {
        if !self.entries.contains_key(index) {
            return Err(TableError::UnexpectedIndex(index.clone()));
        }
        let mut t = self.clone();
        t.entries.insert(index.clone(), value);
        Ok(t)
    }

    /// First label not in the universe or used by a collapse.
    pub fn next_fresh_label(&self) -> Label {
        let max_used = self
            .universe()
            .iter()
            .chain(self.collapsed.keys())
            .chain(self.collapsed.values().flatten())
            .copied()
            .max()
            .unwrap_or(0);
        max_used + 1
    }
}

/// Parses the line-based table format with exact values.
pub fn parse_table(text: &str) -> Result<DissimilarityTable, TableError> {
    parse_table_with(text, Equality::Exact)
}

/// Parses the table format; with a tolerant equality, values are read as
/// binary64.
pub fn parse_table_with(text: &str, equality: Equality) -> Result<DissimilarityTable, TableError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let (_, header) = lines.next().ok_or_else(|| TableError::MalformedHeader("empty input".into()))?;
    let (family, collapsed) = parse_header(header)?;
    let universe: BTreeSet<Label> = family.universe().iter().copied().collect();
    let mut entries = BTreeMap::new();
    for (line, body) in lines {
        let (idx_text, value_text) = body
            .split_once('\t')
            .ok_or_else(|| TableError::MalformedIndex { line, text: body.into() })?;
        let mut labels = Vec::new();
        for part in idx_text.split(',') {
            let label: Label = part
                .trim()
                .parse()
                .map_err(|_| TableError::MalformedIndex { line, text: idx_text.into() })?;
            if !universe.contains(&label) {
                return Err(TableError::UnknownLabel { line, label });
            }
            labels.push(label);
        }
        let value = match equality {
            Equality::Exact => Scalar::parse_exact(value_text),
            Equality::Tolerant { .. } => Scalar::parse_real(value_text),
        }
        .map_err(|source| TableError::MalformedValue { line, source })?;
        let index = Index::new(labels);
        if entries.insert(index.clone(), value).is_some() {
            return Err(TableError::DuplicateIndex(index));
        }
    }
    Ok(DissimilarityTable::with_provenance(family, entries, collapsed)?.with_equality(equality))
}

fn parse_header(
    header: &str,
) -> Result<(IndexFamily, BTreeMap<Label, BTreeSet<Label>>), TableError> {
    let bad = |m: &str| TableError::MalformedHeader(format!("{m} in `{header}`"));
    let mut fields = BTreeMap::new();
    for token in header.split_whitespace() {
        let (k, v) = token.split_once('=').ok_or_else(|| bad("expected key=value"))?;
        if fields.insert(k, v).is_some() {
            return Err(bad("repeated key"));
        }
    }
    let number = |key: &str| -> Result<usize, TableError> {
        fields
            .get(key)
            .ok_or_else(|| bad(&format!("missing `{key}`")))?
            .parse()
            .map_err(|_| bad(&format!("`{key}` is not a number")))
    };
    let n = number("n")?;
    let shape = match *fields.get("family").ok_or_else(|| bad("missing `family`"))? {
        "all-subsets" => FamilyShape::AllSubsets,
        "all-multisets" => FamilyShape::AllMultisets {
            max_card: if fields.contains_key("max_card") { number("max_card")? } else { n + 1 },
        },
        "fixed-k-subsets" => FamilyShape::FixedKSubsets { k: number("k")? },
        "fixed-k-multisets" => FamilyShape::FixedKMultisets { k: number("k")? },
        other => return Err(bad(&format!("unknown family `{other}`"))),
    };
    let family = match fields.get("labels") {
        Some(list) => {
            let labels: Vec<Label> = list
                .split(',')
                .map(|s| s.parse().map_err(|_| bad("bad label list")))
                .collect::<Result<_, _>>()?;
            let family = IndexFamily::with_universe(shape, labels.iter().copied());
            if family.n() != n || labels.len() != n {
                return Err(bad("`labels` does not match `n`"));
            }
            family
        }
        None => IndexFamily::new(shape, n),
    };
    let mut collapsed = BTreeMap::new();
    if let Some(spec) = fields.get("collapsed") {
        for group in spec.split(';') {
            let (fresh, members) = group.split_once(':').ok_or_else(|| bad("bad collapsed entry"))?;
            let fresh: Label = fresh.parse().map_err(|_| bad("bad collapsed label"))?;
            let members: BTreeSet<Label> = members
                .split('+')
                .map(|s| s.parse().map_err(|_| bad("bad collapsed member")))
                .collect::<Result<_, _>>()?;
            collapsed.insert(fresh, members);
        }
    }
    Ok((family, collapsed))
}

/// Writes the table format: a header line, then one `i1,...,ik<TAB>value`
/// line per index in enumeration order.
pub fn serialize_table(table: &DissimilarityTable) -> String {
    let mut out = table.family.to_string();
    if !table.collapsed.is_empty() {
        let groups: Vec<String> = table
            .collapsed
            .iter()
            .map(|(fresh, members)| {
                let m: Vec<String> = members.iter().map(|l| l.to_string()).collect();
                format!("{fresh}:{}", m.join("+"))
            })
            .collect();
        out.push_str(&format!(" collapsed={}", groups.join(";")));
    }
    out.push('\n');
    for (index, value) in &table.entries {
        let labels: Vec<String> = index.labels().iter().map(|l| l.to_string()).collect();
        out.push_str(&labels.join(","));
        out.push('\t');
        out.push_str(&value.to_string());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReductionError {
    #[error("collapse set must have at least two labels of the universe")]
    InvalidAlpha,
    #[error("twig length missing for label {0}")]
    MissingTwig(Label),
    #[error("fresh label {0} is already in use")]
    FreshInUse(Label),
    /// Two members of the collapsed set give different values for `target`.
    #[error("inconsistent collapse at {target}: {first_value} via {first_source} vs {second_value} via {second_source}")]
    InconsistentReduction {
        target: Index,
        first_label: Label,
        first_source: Index,
        first_value: Scalar,
        second_label: Label,
        second_source: Index,
        second_value: Scalar,
    },
    #[error(transparent)]
    Table(#[from] TableError),
}

/// Replaces the labels of `alpha` by `fresh`:
/// `D[fresh ∪ J] = D[α_i ∪ J] − a(α_i)`, checked equal across every member
/// `α_i` for which the source entry exists. Indices in which `fresh` would
/// repeat are omitted.
pub fn reduce_table(
    table: &DissimilarityTable,
    alpha: &BTreeSet<Label>,
    twigs: &BTreeMap<Label, Scalar>,
    fresh: Label,
) -> Result<DissimilarityTable, ReductionError> {
    if let Some(missing) = alpha.iter().find(|l| !twigs.contains_key(l)) {
        return Err(ReductionError::MissingTwig(*missing));
    }
    collapse(table, alpha, fresh, |l| twigs[&l].clone(), true)
}

/// Collapse without twig offsets: each merged entry takes the value of its
/// smallest available member. Preserves every difference the star relation
/// looks at, so it suffices for recovering topology.
pub fn collapse_by_representative(
    table: &DissimilarityTable,
    alpha: &BTreeSet<Label>,
    fresh: Label,
) -> Result<DissimilarityTable, ReductionError> {
    collapse(table, alpha, fresh, |_| Scalar::zero(), false)
}

fn collapse(
    table: &DissimilarityTable,
    alpha: &BTreeSet<Label>,
    fresh: Label,
    offset: impl Fn(Label) -> Scalar,
    check: bool,
) -> Result<DissimilarityTable, ReductionError> {
    let universe: BTreeSet<Label> = table.universe().iter().copied().collect();
    if alpha.len() < 2 || !alpha.is_subset(&universe) {
        return Err(ReductionError::InvalidAlpha);
    }
    if universe.contains(&fresh)
        || table.collapsed.contains_key(&fresh)
        || table.collapsed.values().any(|s| s.contains(&fresh))
    {
        return Err(ReductionError::FreshInUse(fresh));
    }
    let mut entries = BTreeMap::new();
    let mut candidates: BTreeMap<Index, Vec<(Label, Index, Scalar)>> = BTreeMap::new();
    for (index, value) in &table.entries {
        let members: Vec<Label> = index.labels().iter().copied().filter(|l| alpha.contains(l)).collect();
        match members.as_slice() {
            [] => {
                entries.insert(index.clone(), value.clone());
            }
            [member] => {
                let target = index.without_one(*member).expect("member present").with(fresh);
                candidates.entry(target).or_default().push((
                    *member,
                    index.clone(),
                    value - offset(*member),
                ));
            }
            _ => {}
        }
    }
    for (target, mut options) in candidates {
        options.sort_by_key(|(l, _, _)| *l);
        let (first_label, first_source, first_value) = options[0].clone();
        if check {
            if let Some((l, src, v)) = options[1..].iter().find(|(_, _, v)| !table.eq(v, &first_value)) {
                return Err(ReductionError::InconsistentReduction {
                    target,
                    first_label,
                    first_source,
                    first_value,
                    second_label: *l,
                    second_source: src.clone(),
                    second_value: v.clone(),
                });
            }
        }
        entries.insert(target, first_value);
    }
    let mut collapsed = table.collapsed.clone();
    let mut originals = BTreeSet::new();
    for member in alpha {
        match collapsed.remove(member) {
            Some(inner) => originals.extend(inner),
            None => {
                originals.insert(*member);
            }
        }
    }
    collapsed.insert(fresh, originals);
    let labels = universe.difference(alpha).copied().chain([fresh]);
    let family = IndexFamily::with_universe(table.family.shape, labels);
    Ok(DissimilarityTable::with_provenance(family, entries, collapsed)?.with_equality(table.equality))
}
