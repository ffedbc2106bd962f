//! Labelled directed graphs.
//!
//! Queries and data instances share one representation: named nodes carrying
//! unary labels, plus binary atoms `pred(src, dst)`. The text format is a list
//! of atoms `T(a). R(a,b).`, several per line allowed, `#` starts a comment.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};

pub type NodeId = usize;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub pred: String,
}

#[derive(Clone, Debug, Default)]
pub struct LabelledGraph {
    names: Vec<String>,
    index: HashMap<String, NodeId>,
    labels: Vec<BTreeSet<String>>,
    edges: Vec<Edge>,
    edge_index: HashSet<(NodeId, NodeId, String)>,
    out: Vec<Vec<usize>>,
    inc: Vec<Vec<usize>>,
    fresh: usize,
}

pub const RESERVED_UNARY: [&str; 3] = ["F", "T", "A"];

impl LabelledGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Number of atoms, unary and binary.
    pub fn atom_count(&self) -> usize {
        self.edges.len() + self.labels.iter().map(|l| l.len()).sum::<usize>()
    }

    pub fn nodes(&self) -> std::ops::Range<NodeId> {
        0..self.names.len()
    }

    /// Returns the node called `name`, creating it if needed.
    pub fn add_node(&mut self, name: &str) -> NodeId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        self.labels.push(BTreeSet::new());
        self.out.push(Vec::new());
        self.inc.push(Vec::new());
        id
    }

    /// Adds a node whose name starts with `prefix` and is not yet used.
    pub fn fresh_node(&mut self, prefix: &str) -> NodeId {
        loop {
            self.fresh += 1;
            let name = format!("{prefix}{}", self.fresh);
            if !self.index.contains_key(&name) {
                return self.add_node(&name);
            }
        }
    }

    pub fn node(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied()
    }

    pub fn id(&self, name: &str) -> Result<NodeId> {
        self.node(name).ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn labels(&self, id: NodeId) -> &BTreeSet<String> {
        &self.labels[id]
    }

    pub fn has_label(&self, id: NodeId, label: &str) -> bool {
        self.labels[id].contains(label)
    }

    pub fn add_label(&mut self, id: NodeId, label: &str) {
        self.labels[id].insert(label.to_string());
    }

    pub fn remove_label(&mut self, id: NodeId, label: &str) -> bool {
        self.labels[id].remove(label)
    }

    pub fn nodes_with_label(&self, label: &str) -> Vec<NodeId> {
        self.nodes().filter(|&n| self.has_label(n, label)).collect()
    }

    /// Adds `pred(src, dst)`; returns false if the atom was already present.
    pub fn add_edge(&mut self, src: NodeId, dst: NodeId, pred: &str) -> bool {
        if !self.edge_index.insert((src, dst, pred.to_string())) {
            return false;
        }
        let e = self.edges.len();
        self.edges.push(Edge { src, dst, pred: pred.to_string() });
        self.out[src].push(e);
        self.inc[dst].push(e);
        true
    }

    /// Convenience for builders: creates both endpoints by name.
    pub fn add_edge_named(&mut self, src: &str, dst: &str, pred: &str) -> bool {
        let s = self.add_node(src);
        let d = self.add_node(dst);
        self.add_edge(s, d, pred)
    }

    pub fn add_label_named(&mut self, node: &str, label: &str) {
        let n = self.add_node(node);
        self.add_label(n, label);
    }

    pub fn has_edge(&self, src: NodeId, dst: NodeId, pred: &str) -> bool {
        self.edge_index.contains(&(src, dst, pred.to_string()))
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn out_edges(&self, id: NodeId) -> impl Iterator<Item = &Edge> + '_ {
        self.out[id].iter().map(move |&e| &self.edges[e])
    }

    pub fn in_edges(&self, id: NodeId) -> impl Iterator<Item = &Edge> + '_ {
        self.inc[id].iter().map(move |&e| &self.edges[e])
    }

    /// Distinct successors, in insertion order.
    pub fn successors(&self, id: NodeId) -> Vec<NodeId> {
        let mut seen = Vec::new();
        for e in self.out_edges(id) {
            if !seen.contains(&e.dst) {
                seen.push(e.dst);
            }
        }
        seen
    }

    /// Distinct predecessors, in insertion order.
    pub fn predecessors(&self, id: NodeId) -> Vec<NodeId> {
        let mut seen = Vec::new();
        for e in self.in_edges(id) {
            if !seen.contains(&e.src) {
                seen.push(e.src);
            }
        }
        seen
    }

    /// Predicates on the edges from `src` to `dst`.
    pub fn edge_preds(&self, src: NodeId, dst: NodeId) -> BTreeSet<String> {
        self.out_edges(src).filter(|e| e.dst == dst).map(|e| e.pred.clone()).collect()
    }

    pub fn degree(&self, id: NodeId) -> usize {
        self.out[id].len() + self.inc[id].len()
    }

    pub fn binary_predicates(&self) -> BTreeSet<String> {
        self.edges.iter().map(|e| e.pred.clone()).collect()
    }

    pub fn unary_predicates(&self) -> BTreeSet<String> {
        self.labels.iter().flatten().cloned().collect()
    }

    /// Copies every atom of `self` into `target`, naming each node through
    /// `rename`. Returns the node map.
    pub fn copy_into(&self, target: &mut LabelledGraph, rename: impl Fn(&str) -> String) -> Vec<NodeId> {
        let map: Vec<NodeId> = self.nodes().map(|n| target.add_node(&rename(self.name(n)))).collect();
        for n in self.nodes() {
            for l in &self.labels[n] {
                target.add_label(map[n], l);
            }
        }
        for e in &self.edges {
            target.add_edge(map[e.src], map[e.dst], &e.pred);
        }
        map
    }

    /// The same graph with every node name prefixed.
    pub fn prefixed(&self, prefix: &str) -> LabelledGraph {
        let mut g = LabelledGraph::new();
        self.copy_into(&mut g, |n| format!("{prefix}{n}"));
        g
    }

    /// Subgraph induced by the nodes with `keep[n]`. Names are preserved.
    pub fn induced(&self, keep: &[bool]) -> LabelledGraph {
        let mut g = LabelledGraph::new();
        let mut map = vec![None; self.node_count()];
        for n in self.nodes().filter(|&n| keep[n]) {
            let id = g.add_node(self.name(n));
            for l in &self.labels[n] {
                g.add_label(id, l);
            }
            map[n] = Some(id);
        }
        for e in &self.edges {
            if let (Some(s), Some(d)) = (map[e.src], map[e.dst]) {
                g.add_edge(s, d, &e.pred);
            }
        }
        g
    }

    /// Graph with `node` removed.
    pub fn without_node(&self, node: NodeId) -> LabelledGraph {
        let keep: Vec<bool> = self.nodes().map(|n| n != node).collect();
        self.induced(&keep)
    }

    /// The image of an endomorphism `h` (given as target ids in `self`): the
    /// atoms `h(a)` for every atom `a`, over the nodes in the image.
    pub fn endo_image(&self, h: &[NodeId]) -> LabelledGraph {
        let mut g = LabelledGraph::new();
        let mut image: Vec<NodeId> = h.to_vec();
        image.sort_unstable();
        image.dedup();
        for &n in &image {
            g.add_node(self.name(n));
        }
        for n in self.nodes() {
            let id = g.add_node(self.name(h[n]));
            for l in &self.labels[n] {
                g.add_label(id, l);
            }
        }
        for e in &self.edges {
            let s = g.add_node(self.name(h[e.src]));
            let d = g.add_node(self.name(h[e.dst]));
            g.add_edge(s, d, &e.pred);
        }
        g
    }

    /// Merges node `b` into node `a` (labels and edges), returning a new graph
    /// in which `b` no longer exists.
    pub fn identify(&self, a: NodeId, b: NodeId) -> LabelledGraph {
        let h: Vec<NodeId> = self.nodes().map(|n| if n == b { a } else { n }).collect();
        self.quotient(&h)
    }

    /// Graph obtained by mapping every node `n` to `h[n]` (ids in `self`),
    /// keeping all atoms. Nodes outside the image disappear.
    pub fn quotient(&self, h: &[NodeId]) -> LabelledGraph {
        self.endo_image(h)
    }

    /// Parses the atom-list format.
    pub fn parse(text: &str) -> Result<LabelledGraph> {
        let mut g = LabelledGraph::new();
        let mut arity: HashMap<String, usize> = RESERVED_UNARY.iter().map(|p| (p.to_string(), 1)).collect();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("");
            let mut p = Scanner { chars: line.chars().collect(), pos: 0, line: lineno + 1 };
            loop {
                p.skip_ws();
                if p.done() {
                    break;
                }
                let pred = p.ident()?;
                p.expect('(')?;
                let mut args = vec![p.ident()?];
                loop {
                    p.skip_ws();
                    if p.eat(',') {
                        args.push(p.ident()?);
                    } else {
                        p.expect(')')?;
                        break;
                    }
                }
                p.skip_ws();
                p.eat('.');
                if args.len() > 2 {
                    return Err(Error::Syntax { line: lineno + 1, msg: format!("`{pred}` has more than two arguments") });
                }
                let expected = *arity.entry(pred.clone()).or_insert(args.len());
                if expected != args.len() {
                    return Err(Error::Arity { pred, expected, found: args.len() });
                }
                if args.len() == 1 {
                    g.add_label_named(&args[0], &pred);
                } else {
                    g.add_edge_named(&args[0], &args[1], &pred);
                }
            }
        }
        Ok(g)
    }

    /// Atoms in canonical order: unary first, then binary, each sorted.
    pub fn atoms_text(&self) -> Vec<String> {
        let mut unary: Vec<String> = Vec::new();
        for n in self.nodes() {
            for l in &self.labels[n] {
                unary.push(format!("{l}({})", self.name(n)));
            }
        }
        let mut binary: Vec<String> = self
            .edges
            .iter()
            .map(|e| format!("{}({},{})", e.pred, self.name(e.src), self.name(e.dst)))
            .collect();
        unary.sort();
        binary.sort();
        unary.into_iter().chain(binary).collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for a in self.atoms_text() {
            s.push_str(&a);
            s.push_str(".\n");
        }
        s
    }
}

impl fmt::Display for LabelledGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

struct Scanner {
    chars: Vec<char>,
    pos: usize,
    line: usize,
}

impl Scanner {
    fn done(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn skip_ws(&mut self) {
        while !self.done() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if !self.done() && self.chars[self.pos] == c {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        self.skip_ws();
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{c}`")))
        }
    }

    fn ident(&mut self) -> Result<String> {
        self.skip_ws();
        let start = self.pos;
        while !self.done() && (self.chars[self.pos].is_ascii_alphanumeric() || self.chars[self.pos] == '_') {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected identifier"));
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn error(&self, msg: &str) -> Error {
        let found = self.chars.get(self.pos).map(|c| format!(", found `{c}`")).unwrap_or_default();
        Error::Syntax { line: self.line, msg: format!("{msg}{found}") }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_several_atoms_per_line() {
        let g = LabelledGraph::parse("T(a). R(a,b). F(b)\n# note\nS(b , c).").unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 2);
        assert!(g.has_label(g.id("a").unwrap(), "T"));
    }

    #[test]
    fn reports_line_of_syntax_error() {
        let err = LabelledGraph::parse("T(a).\nR(a,").unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 2, .. }));
    }

    #[test]
    fn rejects_binary_use_of_reserved_label() {
        let err = LabelledGraph::parse("F(a,b).").unwrap_err();
        assert!(matches!(err, Error::Arity { .. }));
    }

    #[test]
    fn rejects_arity_conflict() {
        assert!(LabelledGraph::parse("R(a,b). R(c).").is_err());
    }

    #[test]
    fn serializer_is_sorted() {
        let g = LabelledGraph::parse("R(b,a). T(b). F(a).").unwrap();
        assert_eq!(g.to_text(), "F(a).\nT(b).\nR(b,a).\n");
    }

    #[test]
    fn identify_merges_atoms() {
        let g = LabelledGraph::parse("R(a,b). T(b). R(c,d). F(d).").unwrap();
        let h = g.identify(g.id("b").unwrap(), g.id("d").unwrap());
        assert_eq!(h.node_count(), 3);
        let b = h.id("b").unwrap();
        assert!(h.has_label(b, "T") && h.has_label(b, "F"));
    }
}
