//! Newick reading and writing for [`WeightedTree`].
//!
//! Leaf names must be positive integers. Branch lengths are read exactly and
//! may be decimals (`-1.5`, `2e-3`) or rationals (`3/16`). Internal node
//! names are accepted and dropped.

use thiserror::Error;

use crate::scalar::Scalar;
use crate::tree::{Label, TreeBuilder, TreeError, VertexId, WeightedTree};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NewickError {
    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("leaf name `{name}` at byte {position} is not a positive integer")]
    NonIntegerLabel { name: String, position: usize },
    #[error("duplicate leaf name {0}")]
    DuplicateLabel(Label),
    #[error("invalid branch length `{text}` at byte {position}")]
    BadLength { text: String, position: usize },
    #[error(transparent)]
    Tree(#[from] TreeError),
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
    builder: TreeBuilder,
    seen: std::collections::BTreeSet<Label>,
}

const DELIMITERS: &[u8] = b"():,;";

impl<'a> Parser<'a> {
    fn syntax(&self, message: impl Into<String>) -> NewickError {
        NewickError::Syntax { position: self.pos, message: message.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.text.len() && self.text[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.text.get(self.pos).copied()
    }

    fn expect(&mut self, byte: u8) -> Result<(), NewickError> {
        match self.peek() {
            Some(b) if b == byte => {
                self.pos += 1;
                Ok(())
            }
            Some(b) => Err(self.syntax(format!("expected `{}`, found `{}`", byte as char, b as char))),
            None => Err(self.syntax(format!("expected `{}`, found end of input", byte as char))),
        }
    }

    fn token(&mut self) -> (usize, &'a str) {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.text.len()
            && !DELIMITERS.contains(&self.text[self.pos])
            && !self.text[self.pos].is_ascii_whitespace()
        {
            self.pos += 1;
        }
        let s = std::str::from_utf8(&self.text[start..self.pos]).unwrap_or("");
        (start, s)
    }

    /// Parses one subtree; returns its vertex.
    fn node(&mut self) -> Result<VertexId, NewickError> {
        if self.peek() == Some(b'(') {
            self.pos += 1;
            let mut children = Vec::new();
            loop {
                let child = self.node()?;
                let length = self.length()?;
                children.push((child, length));
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    Some(b) => return Err(self.syntax(format!("unexpected `{}`", b as char))),
                    None => return Err(self.syntax("unexpected end of input")),
                }
            }
            let _internal_name = self.token();
            let v = self.builder.add_internal();
            for (child, length) in children {
                self.builder.add_edge(v, child, length);
            }
            Ok(v)
        } else {
            let (start, name) = self.token();
            if name.is_empty() {
                return Err(match self.peek() {
                    None => self.syntax("unexpected end of input"),
                    Some(b) => self.syntax(format!("expected leaf name, found `{}`", b as char)),
                });
            }
            let label = match name.parse::<Label>() {
                Ok(l) if l > 0 => l,
                _ => {
                    return Err(NewickError::NonIntegerLabel { name: name.into(), position: start })
                }
            };
            if !self.seen.insert(label) {
                return Err(NewickError::DuplicateLabel(label));
            }
            Ok(self.builder.add_leaf(label))
        }
    }

    fn length(&mut self) -> Result<Scalar, NewickError> {
        if self.peek() != Some(b':') {
            return Err(self.syntax("missing branch length"));
        }
        self.pos += 1;
        let (start, text) = self.token();
        Scalar::parse_exact(text)
            .map_err(|_| NewickError::BadLength { text: text.into(), position: start })
    }
}

/// Parses a `;`-terminated Newick string.
pub fn parse_newick(text: &str) -> Result<WeightedTree, NewickError> {
    let mut p = Parser {
        text: text.as_bytes(),
        pos: 0,
        builder: TreeBuilder::new(),
        seen: Default::default(),
    };
    let root = p.node()?;
    if p.peek() == Some(b':') {
        // A length on the root edge has nothing to attach to.
        p.length()?;
    }
    p.expect(b';')?;
    if p.peek().is_some() {
        return Err(p.syntax("trailing characters after `;`"));
    }
    Ok(drop_unary_root(p.builder, root)?)
}

/// A root with a single child (`((1:1,2:1):3);`) would be an unlabeled leaf;
/// it is removed together with its edge.
fn drop_unary_root(builder: TreeBuilder, root: VertexId) -> Result<WeightedTree, TreeError> {
    match builder.clone().build() {
        Err(TreeError::UnlabeledLeaf(v, 1)) if v == root => {
            let tree = builder.build_unchecked_without(root);
            tree.build()
        }
        other => other,
    }
}

impl TreeBuilder {
    fn build_unchecked_without(self, drop: VertexId) -> TreeBuilder {
        let mut out = TreeBuilder::new();
        let mut ids = vec![None; self.vertex_count()];
        for (v, label) in self.labels.iter().enumerate() {
            if v != drop.0 {
                ids[v] = Some(out.add_vertex(*label));
            }
        }
        let mut next_root = None;
        for edge in &self.edges {
            let (a, b) = edge.ends;
            match (ids[a.0], ids[b.0]) {
                (Some(x), Some(y)) => out.add_edge(x, y, edge.weight.clone()),
                (None, Some(y)) | (Some(y), None) => next_root = Some(y),
                (None, None) => {}
            }
        }
        match next_root {
            // The new root may itself be unary.
            Some(r) => match out.clone().build() {
                Err(TreeError::UnlabeledLeaf(v, 1)) if v == r => out.build_unchecked_without(r),
                _ => out,
            },
            None => out,
        }
    }
}

/// Deterministic Newick rendering: rooted at the neighbor of the smallest
/// leaf, children ordered by their smallest leaf label. A two-leaf tree whose
/// leaves are adjacent renders as `(a:w,b:0);`.
pub fn serialize_newick(tree: &WeightedTree) -> String {
    let first = tree.labels().next().expect("tree has leaves");
    let leaf = tree.leaf(first).expect("label exists");
    let (root, edge) = tree.neighbors(leaf).next().expect("leaf has a neighbor");
    let mut out = String::new();
    if let Some(other) = tree.label_of(root) {
        let w = &tree.edges()[edge].weight;
        out.push_str(&format!("({first}:{w},{other}:0);"));
        return out;
    }
    let min_leaf = subtree_minima(tree, root);
    write_children(tree, root, None, &min_leaf, &mut out);
    out.push(';');
    out
}

fn subtree_minima(tree: &WeightedTree, root: VertexId) -> Vec<Label> {
    let mut min = vec![Label::MAX; tree.vertex_count()];
    let mut order = Vec::new();
    let mut parent = vec![None; tree.vertex_count()];
    let mut stack = vec![root];
    let mut seen = vec![false; tree.vertex_count()];
    seen[root.0] = true;
    while let Some(v) = stack.pop() {
        order.push(v);
        for (w, _) in tree.neighbors(v) {
            if !seen[w.0] {
                seen[w.0] = true;
                parent[w.0] = Some(v);
                stack.push(w);
            }
        }
    }
    for &v in order.iter().rev() {
        if let Some(l) = tree.label_of(v) {
            min[v.0] = min[v.0].min(l);
        }
        if let Some(p) = parent[v.0] {
            min[p.0] = min[p.0].min(min[v.0]);
        }
    }
    min
}

fn write_children(
    tree: &WeightedTree,
    v: VertexId,
    parent: Option<VertexId>,
    min_leaf: &[Label],
    out: &mut String,
) {
    let mut children: Vec<(VertexId, usize)> =
        tree.neighbors(v).filter(|(w, _)| Some(*w) != parent).collect();
    children.sort_by_key(|(w, _)| min_leaf[w.0]);
    out.push('(');
    for (i, (child, edge)) in children.into_iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        match tree.label_of(child) {
            Some(l) => out.push_str(&l.to_string()),
            None => write_children(tree, child, Some(v), min_leaf, out),
        }
        out.push(':');
        out.push_str(&tree.edges()[edge].weight.to_string());
    }
    out.push(')');
}

#[cfg(test)]
mod tests {
    use super::*;

    const T0: &str = "((1:2,2:3):4,3:-1,4:5);";

    #[test]
    fn parses_t0() {
        let t = parse_newick(T0).unwrap();
        assert_eq!(t.leaf_count(), 4);
        let l = |x| t.leaf(x).unwrap();
        assert_eq!(t.w_distance(l(1), l(3)).unwrap(), Scalar::from_int(5));
        assert_eq!(t.w_distance(l(2), l(4)).unwrap(), Scalar::from_int(12));
        assert_eq!(t.w_distance(l(3), l(4)).unwrap(), Scalar::from_int(4));
    }

    #[test]
    fn two_leaf_tree() {
        let t = parse_newick("(1:1,2:1);").unwrap();
        let (a, b) = (t.leaf(1).unwrap(), t.leaf(2).unwrap());
        assert_eq!(t.w_distance(a, b).unwrap(), Scalar::from_int(2));
        let c = t.canonicalize();
        assert_eq!(serialize_newick(&c), "(1:2,2:0);");
        let back = parse_newick(&serialize_newick(&c)).unwrap();
        let (a, b) = (back.leaf(1).unwrap(), back.leaf(2).unwrap());
        assert_eq!(back.w_distance(a, b).unwrap(), Scalar::from_int(2));
    }

    #[test]
    fn truncated_input_reports_end() {
        match parse_newick("((1:2,2:3") {
            Err(NewickError::Syntax { position, message }) => {
                assert_eq!(position, 9);
                assert!(message.contains("end of input"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_labels_and_duplicates() {
        assert!(matches!(parse_newick("(a:1,2:1);"), Err(NewickError::NonIntegerLabel { .. })));
        assert!(matches!(parse_newick("(0:1,2:1);"), Err(NewickError::NonIntegerLabel { .. })));
        assert_eq!(parse_newick("(1:1,1:1);"), Err(NewickError::DuplicateLabel(1)));
        assert!(matches!(parse_newick("(1:x,2:1);"), Err(NewickError::BadLength { .. })));
        assert!(matches!(parse_newick("(1,2:1);"), Err(NewickError::Syntax { .. })));
        assert!(matches!(parse_newick("(1:1,2:1);x"), Err(NewickError::Syntax { .. })));
    }

    #[test]
    fn rational_lengths_and_unary_root() {
        let t = parse_newick("((1:1/2,2:-3/4)inner:2.25,3:1e-1):7;").unwrap();
        let (a, c) = (t.leaf(1).unwrap(), t.leaf(3).unwrap());
        assert_eq!(t.w_distance(a, c).unwrap(), Scalar::ratio(57, 20));
        let u = parse_newick("(((1:1,2:1):3,3:1):9);").unwrap();
        assert_eq!(u.leaf_count(), 3);
        // The former child of the root keeps degree 2 until canonicalized.
        assert!(!u.is_canonical());
        assert_eq!(u.canonicalize().edges().len(), 3);
    }

    #[test]
    fn serialization_is_rooted_at_leaf_one_neighbor() {
        let t = parse_newick(T0).unwrap();
        assert_eq!(serialize_newick(&t), "(1:2,2:3,(3:-1,4:5):4);");
        let again = parse_newick(&serialize_newick(&t)).unwrap();
        assert_eq!(serialize_newick(&again), serialize_newick(&t));
    }
}
