//! FO versus L-hardness for Λ-CQs.
//!
//! A Λ-CQ of span `k` is a ditree 1-CQ whose `k` solitary T-nodes are all
//! incomparable with the F-node. Cactuses of such a query are abstracted by
//! the type graph: a segment type `(P, i, C)` records the labels budded in
//! the parent segment, the label of the bud the segment hangs from and the
//! labels budded in the segment itself. Subgraphs of the type graph are blown
//! up back into data by gluing one segment per node.
//!
//! [`decide_fo`] first runs a sound local test (black and blue nodes, edges
//! cuttable at bounded depth, a final check over root neighbourhoods). If that
//! test does not settle the query, it searches the periodic structures for
//! one that violates conditions h1 to h3, which certifies L-hardness; an
//! exhausted search means FO.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde_json::{json, Value};

use crate::cactus::{self, Stages, Witness};
use crate::cq::OneCq;
use crate::error::{Error, Result};
use crate::graph::{LabelledGraph, NodeId};
use crate::hom::{self, Anchor};
use crate::tree::shape;

/// Largest span accepted unless overridden.
pub const DEFAULT_MAX_SPAN: usize = 6;
/// Default number of partial structures visited by the exact search.
pub const DEFAULT_SEARCH_CAP: usize = 200_000;

const OK_LABEL: &str = "\u{1}ok";

/// Segment type `(P, i, C)`; label sets are bitmasks with bit `j - 1` for
/// label `j`. Root types have `P = ∅` and `i = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SegmentType {
    pub p: u32,
    pub i: usize,
    pub c: u32,
}

impl SegmentType {
    pub fn is_root(&self) -> bool {
        self.i == 0
    }

    pub fn is_leaf(&self) -> bool {
        self.c == 0
    }

    /// Labels budded in the segment, ascending.
    pub fn budded(&self) -> Vec<usize> {
        mask_labels(self.c)
    }
}

fn mask_labels(m: u32) -> Vec<usize> {
    (0..32).filter(|b| m & (1 << b) != 0).map(|b| b + 1).collect()
}

fn mask_text(m: u32) -> String {
    if m == 0 {
        return "∅".into();
    }
    let parts: Vec<String> = mask_labels(m).iter().map(|l| l.to_string()).collect();
    format!("{{{}}}", parts.join(","))
}

impl std::fmt::Display for SegmentType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", mask_text(self.p), self.i, mask_text(self.c))
    }
}

/// All segment types for span `k` with their labelled edges.
#[derive(Clone, Debug)]
pub struct TypeGraph {
    pub k: usize,
    pub types: Vec<SegmentType>,
    /// `(t, j, t')`: a segment of type `t'` can hang from bud `j` of `t`.
    pub edges: Vec<(usize, usize, usize)>,
    index: HashMap<SegmentType, usize>,
}

impl TypeGraph {
    /// Builds the graph; errors when `k > max_span`.
    pub fn new(k: usize, max_span: usize) -> Result<TypeGraph> {
        if k > max_span || k > 16 {
            return Err(Error::CapExceeded(format!("span {k} exceeds the limit {max_span}")));
        }
        let full: u32 = (1u32 << k) - 1;
        let mut types: Vec<SegmentType> = (0..=full).map(|c| SegmentType { p: 0, i: 0, c }).collect();
        for p in 1..=full {
            for i in mask_labels(p) {
                for c in 0..=full {
                    types.push(SegmentType { p, i, c });
                }
            }
        }
        let index: HashMap<SegmentType, usize> = types.iter().enumerate().map(|(n, &t)| (t, n)).collect();
        let mut edges = Vec::new();
        for (s, t) in types.iter().enumerate() {
            for j in t.budded() {
                for (d, u) in types.iter().enumerate() {
                    if u.p == t.c && u.i == j {
                        edges.push((s, j, d));
                    }
                }
            }
        }
        Ok(TypeGraph { k, types, edges, index })
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn index_of(&self, t: SegmentType) -> Option<usize> {
        self.index.get(&t).copied()
    }

    /// Types that may hang from bud `j` of `t` (empty unless `j ∈ C(t)`).
    pub fn successors(&self, t: usize, j: usize) -> Vec<usize> {
        let ty = self.types[t];
        if j == 0 || ty.c & (1 << (j - 1)) == 0 {
            return Vec::new();
        }
        let mut out = Vec::new();
        for c in 0..(1u32 << self.k) {
            if let Some(n) = self.index_of(SegmentType { p: ty.c, i: j, c }) {
                out.push(n);
            }
        }
        out
    }

    pub fn has_edge(&self, t: usize, j: usize, u: usize) -> bool {
        let (a, b) = (self.types[t], self.types[u]);
        j >= 1 && a.c & (1 << (j - 1)) != 0 && b.p == a.c && b.i == j
    }

    pub fn roots(&self) -> Vec<usize> {
        (0..self.len()).filter(|&t| self.types[t].is_root()).collect()
    }
}

/// A digraph whose nodes carry segment types, with at most one successor per
/// budded label. Missing successors are left as bare A-nodes in blow-ups.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TypedDigraph {
    pub types: Vec<usize>,
    pub succ: Vec<BTreeMap<usize, usize>>,
}

impl TypedDigraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn add_node(&mut self, t: usize) -> usize {
        self.types.push(t);
        self.succ.push(BTreeMap::new());
        self.types.len() - 1
    }

    pub fn set(&mut self, n: usize, j: usize, m: usize) {
        self.succ[n].insert(j, m);
    }

    /// Budded labels of `n` with no successor.
    pub fn open_slots(&self, tg: &TypeGraph, n: usize) -> Vec<usize> {
        tg.types[self.types[n]].budded().into_iter().filter(|j| !self.succ[n].contains_key(j)).collect()
    }

    /// Every node has exactly one valid `j`-successor for each budded `j`.
    pub fn is_realisable(&self, tg: &TypeGraph) -> bool {
        (0..self.len()).all(|n| {
            let budded = tg.types[self.types[n]].budded();
            budded.len() == self.succ[n].len()
                && self.succ[n].iter().all(|(&j, &m)| budded.contains(&j) && tg.has_edge(self.types[n], j, self.types[m]))
        })
    }

    fn reach(&self, from: &[usize]) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut stack: Vec<usize> = from.to_vec();
        while let Some(n) = stack.pop() {
            if !seen[n] {
                seen[n] = true;
                stack.extend(self.succ[n].values().copied());
            }
        }
        seen
    }

    /// Nodes lying on a directed cycle.
    pub fn cyclic_nodes(&self) -> Vec<bool> {
        (0..self.len())
            .map(|n| {
                let starts: Vec<usize> = self.succ[n].values().copied().collect();
                self.reach(&starts)[n]
            })
            .collect()
    }

    pub fn is_acyclic(&self) -> bool {
        !self.cyclic_nodes().iter().any(|&c| c)
    }

    /// Nodes with `keep[n]` and the edges among them (others become open).
    pub fn induced(&self, keep: &[bool]) -> (TypedDigraph, Vec<Option<usize>>) {
        let mut out = TypedDigraph::new();
        let mut map = vec![None; self.len()];
        for n in 0..self.len() {
            if keep[n] {
                map[n] = Some(out.add_node(self.types[n]));
            }
        }
        for n in 0..self.len() {
            if let Some(a) = map[n] {
                for (&j, &m) in &self.succ[n] {
                    if let Some(b) = map[m] {
                        out.set(a, j, b);
                    }
                }
            }
        }
        (out, map)
    }

    /// Replaces every edge `(u, v)` such that some simple path from node 0
    /// to `u` visits `v` by an edge to a fresh copy of `v` without successors.
    pub fn acyclic_version(&self) -> TypedDigraph {
        let mut closing: BTreeSet<(usize, usize)> = BTreeSet::new();
        if !self.is_empty() {
            let mut on_path = vec![false; self.len()];
            self.closing_edges(0, &mut on_path, &mut closing);
        }
        let mut out = self.clone();
        for &(u, j) in &closing {
            let v = self.succ[u][&j];
            let copy = out.add_node(self.types[v]);
            out.set(u, j, copy);
        }
        out
    }

    fn closing_edges(&self, n: usize, on_path: &mut Vec<bool>, closing: &mut BTreeSet<(usize, usize)>) {
        on_path[n] = true;
        for (&j, &m) in &self.succ[n] {
            if on_path[m] {
                closing.insert((n, j));
            } else {
                self.closing_edges(m, on_path, closing);
            }
        }
        on_path[n] = false;
    }

    pub fn to_json(&self, tg: &TypeGraph) -> Value {
        let nodes: Vec<String> = self.types.iter().map(|&t| tg.types[t].to_string()).collect();
        let mut edges = Vec::new();
        for (n, s) in self.succ.iter().enumerate() {
            for (j, m) in s {
                edges.push(json!([n, j, m]));
            }
        }
        json!({ "nodes": nodes, "edges": edges })
    }
}

/// Disjoint segment copies with pending identifications.
pub(crate) struct Gluer {
    raw: LabelledGraph,
    parent: Vec<usize>,
}

impl Gluer {
    pub(crate) fn new() -> Gluer {
        Gluer { raw: LabelledGraph::new(), parent: Vec::new() }
    }

    /// Adds a copy of `g` with node names prefixed; returns the new ids.
    pub(crate) fn add(&mut self, g: &LabelledGraph, prefix: &str) -> Vec<usize> {
        let ids = g.copy_into(&mut self.raw, |n| format!("{prefix}{n}"));
        self.parent.resize(self.raw.node_count(), 0);
        for &id in &ids {
            self.parent[id] = id;
        }
        ids
    }

    fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] != a {
            self.parent[a] = self.parent[self.parent[a]];
            a = self.parent[a];
        }
        a
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }

    pub(crate) fn add_edge(&mut self, a: usize, b: usize, pred: &str) {
        self.raw.add_edge(a, b, pred);
    }

    /// The quotient graph and the image of every raw node.
    pub(crate) fn finish(mut self) -> (LabelledGraph, Vec<NodeId>) {
        let n = self.raw.node_count();
        let mut g = LabelledGraph::new();
        let mut rep_id: HashMap<usize, NodeId> = HashMap::new();
        let mut map = Vec::with_capacity(n);
        for v in 0..n {
            let r = self.find(v);
            let id = *rep_id.entry(r).or_insert_with(|| g.add_node(self.raw.name(r)));
            map.push(id);
        }
        for v in 0..n {
            for l in self.raw.labels(v) {
                g.add_label(map[v], l);
            }
        }
        for e in self.raw.edges() {
            g.add_edge(map[e.src], map[e.dst], &e.pred);
        }
        (g, map)
    }
}

/// Result of gluing segments: the graph and, per typed node, the image of
/// every query node.
#[derive(Clone, Debug)]
pub struct BlowUp {
    pub graph: LabelledGraph,
    pub segments: Vec<Vec<NodeId>>,
}

/// Central segment of a type: focus F for root types, A otherwise; budded
/// labels A and the rest T.
pub fn type_segment(q: &OneCq, t: SegmentType) -> LabelledGraph {
    q.segment(t.is_root(), &t.budded())
}

/// Blow-up of a typed digraph, allowing open slots.
pub fn blow_up_partial(q: &OneCq, tg: &TypeGraph, h: &TypedDigraph) -> BlowUp {
    let mut gl = Gluer::new();
    let segs: Vec<Vec<usize>> =
        (0..h.len()).map(|n| gl.add(&type_segment(q, tg.types[h.types[n]]), &format!("s{n}_"))).collect();
    for n in 0..h.len() {
        for (&j, &m) in &h.succ[n] {
            gl.union(segs[n][q.ys[j - 1]], segs[m][q.x]);
        }
    }
    let (graph, map) = gl.finish();
    let segments = segs.iter().map(|s| s.iter().map(|&r| map[r]).collect()).collect();
    BlowUp { graph, segments }
}

/// Blow-up of a realisable typed digraph.
pub fn blow_up(q: &OneCq, tg: &TypeGraph, h: &TypedDigraph) -> Result<LabelledGraph> {
    if !h.is_realisable(tg) {
        return Err(Error::Precondition("typed digraph is not realisable".into()));
    }
    Ok(blow_up_partial(q, tg, h).graph)
}

/// Does some root segment map into `g`?
pub fn root_segment_maps(q: &OneCq, g: &LabelledGraph) -> Result<bool> {
    let mut target = g.clone();
    for v in g.nodes() {
        if g.has_label(v, "T") || g.has_label(v, "A") {
            target.add_label(v, OK_LABEL);
        }
    }
    let src = q.variant(Some("F"), &vec![Some(OK_LABEL); q.span()]);
    Ok(hom::hom_exists(&src, &target, &Anchor::none())?.is_some())
}

/// Does the leaf segment (focus A, nothing budded) map into `g`?
pub fn leaf_segment_maps(q: &OneCq, g: &LabelledGraph) -> Result<bool> {
    Ok(hom::hom_exists(&q.segment(false, &[]), g, &Anchor::none())?.is_some())
}

/// Does some cactus map into `g`?
pub fn some_cactus_maps(q: &OneCq, g: &LabelledGraph) -> Result<bool> {
    let mut st = Stages::new(q, g);
    loop {
        if st.goal(None)? {
            return Ok(true);
        }
        if !st.advance()? {
            return Ok(false);
        }
    }
}

/// A periodic structure: a realisable `h` with a root-type source at node 0,
/// its pre-periodic part `b` and periodic part `p`, the nodes `r` of `p` and,
/// per node of `r`, an acyclic realisable `e[i]` with source node 0 of the
/// same type.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PeriodicStructure {
    pub h: TypedDigraph,
    pub b: Vec<usize>,
    pub p: Vec<usize>,
    pub r: Vec<usize>,
    pub e: Vec<TypedDigraph>,
}

/// Splits the nodes of `h` into those with bounded distance from the source
/// and those reachable from a cycle.
pub fn periodic_parts(h: &TypedDigraph) -> (Vec<usize>, Vec<usize>) {
    let cyc: Vec<usize> = h.cyclic_nodes().iter().enumerate().filter(|(_, &c)| c).map(|(n, _)| n).collect();
    let in_p = h.reach(&cyc);
    let b = (0..h.len()).filter(|&n| !in_p[n]).collect();
    let p = (0..h.len()).filter(|&n| in_p[n]).collect();
    (b, p)
}

impl PeriodicStructure {
    /// Checks the structural requirements.
    pub fn validate(&self, tg: &TypeGraph) -> Result<()> {
        let bad = |m: &str| Err(Error::Invalid(format!("periodic structure: {m}")));
        if self.h.is_empty() || !tg.types[self.h.types[0]].is_root() {
            return bad("source is not of root type");
        }
        if !self.h.is_realisable(tg) {
            return bad("not realisable");
        }
        if !self.h.reach(&[0]).iter().all(|&r| r) {
            return bad("nodes unreachable from the source");
        }
        let mut types = self.h.types.clone();
        types.sort_unstable();
        types.dedup();
        if types.len() != self.h.len() {
            return bad("repeated type");
        }
        if periodic_parts(&self.h) != (self.b.clone(), self.p.clone()) {
            return bad("wrong B/P split");
        }
        let mut keep = vec![false; self.h.len()];
        for &n in &self.p {
            keep[n] = true;
        }
        for &v in &self.r {
            if !self.p.contains(&v) {
                return bad("R outside P");
            }
            keep[v] = false;
        }
        if !self.h.induced(&keep).0.is_acyclic() {
            return bad("R misses a cycle of P");
        }
        if self.e.len() != self.r.len() {
            return bad("one acyclic part per node of R");
        }
        for (&v, ev) in self.r.iter().zip(&self.e) {
            if ev.is_empty() || ev.types[0] != self.h.types[v] || !ev.is_realisable(tg) || !ev.is_acyclic() {
                return bad("invalid acyclic part");
            }
        }
        Ok(())
    }

    fn part(&self, nodes: &[usize]) -> TypedDigraph {
        let mut keep = vec![false; self.h.len()];
        for &n in nodes {
            keep[n] = true;
        }
        self.h.induced(&keep).0
    }

    /// Blow-up of `P`.
    pub fn p_bar(&self, q: &OneCq, tg: &TypeGraph) -> BlowUp {
        blow_up_partial(q, tg, &self.part(&self.p))
    }

    /// Blow-up of `B`, whose edges into `P` are left open.
    pub fn b_bar(&self, q: &OneCq, tg: &TypeGraph) -> BlowUp {
        blow_up_partial(q, tg, &self.part(&self.b))
    }

    pub fn to_json(&self, tg: &TypeGraph) -> Value {
        json!({
            "h": self.h.to_json(tg),
            "b": self.b,
            "p": self.p,
            "r": self.r,
            "e": self.e.iter().map(|e| e.to_json(tg)).collect::<Vec<_>>(),
        })
    }
}

/// Outcome of the four conditions on one periodic structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct HConditions {
    pub h1: bool,
    pub h2: bool,
    pub h3: bool,
    pub h4: bool,
}

impl HConditions {
    pub fn any_of_first_three(&self) -> bool {
        self.h1 || self.h2 || self.h3
    }
}

/// Direct evaluation of h1 (a cactus maps into the blow-up of the acyclic
/// version of `B ∪ P`), h2 (a root segment maps into the blow-up of `P`), h3
/// (a root segment maps into the blow-up of some `e[i]`) and h4 (the leaf
/// segment maps into the blow-up of `B ∪ P`).
pub fn check_h_conditions(q: &OneCq, tg: &TypeGraph, ps: &PeriodicStructure) -> Result<HConditions> {
    let acyclic = blow_up_partial(q, tg, &ps.h.acyclic_version()).graph;
    let h1 = some_cactus_maps(q, &acyclic)?;
    let h2 = root_segment_maps(q, &ps.p_bar(q, tg).graph)?;
    let mut h3 = false;
    for ev in &ps.e {
        if root_segment_maps(q, &blow_up_partial(q, tg, ev).graph)? {
            h3 = true;
            break;
        }
    }
    let h4 = leaf_segment_maps(q, &blow_up_partial(q, tg, &ps.h).graph)?;
    Ok(HConditions { h1, h2, h3, h4 })
}

/// Counts visits against a cap.
struct Budget {
    used: usize,
    cap: usize,
}

impl Budget {
    fn tick(&mut self) -> Result<()> {
        self.used += 1;
        if self.used > self.cap {
            return Err(Error::CapExceeded(format!("structure search visited more than {} states", self.cap)));
        }
        Ok(())
    }
}

/// Pending choice for an open slot.
fn slot_choices(tg: &TypeGraph, h: &TypedDigraph, pos: &HashMap<usize, usize>, n: usize, j: usize) -> Vec<std::result::Result<usize, usize>> {
    // Ok(existing node) or Err(new type); existing nodes first.
    let succ = tg.successors(h.types[n], j);
    let mut out: Vec<std::result::Result<usize, usize>> = succ.iter().filter_map(|t| pos.get(t).map(|&m| Ok(m))).collect();
    out.extend(succ.iter().filter(|t| !pos.contains_key(t)).map(|&t| Err(t)));
    out
}

fn first_open(tg: &TypeGraph, h: &TypedDigraph) -> Option<(usize, usize)> {
    (0..h.len()).find_map(|n| h.open_slots(tg, n).first().map(|&j| (n, j)))
}

/// Enumerates every acyclic realisable typed subgraph with source type `v`,
/// stopping early when `visit` returns false. Sub-branches whose partial
/// blow-up already satisfies `prune` are skipped.
fn acyclic_from(
    q: &OneCq,
    tg: &TypeGraph,
    v: usize,
    budget: &mut Budget,
    prune: &mut dyn FnMut(&LabelledGraph) -> Result<bool>,
    visit: &mut dyn FnMut(&TypedDigraph) -> Result<bool>,
) -> Result<()> {
    let mut h = TypedDigraph::new();
    h.add_node(v);
    let mut pos = HashMap::new();
    pos.insert(v, 0);
    acyclic_rec(q, tg, &mut h, &mut pos, budget, prune, visit).map(|_| ())
}

fn acyclic_rec(
    q: &OneCq,
    tg: &TypeGraph,
    h: &mut TypedDigraph,
    pos: &mut HashMap<usize, usize>,
    budget: &mut Budget,
    prune: &mut dyn FnMut(&LabelledGraph) -> Result<bool>,
    visit: &mut dyn FnMut(&TypedDigraph) -> Result<bool>,
) -> Result<bool> {
    budget.tick()?;
    if prune(&blow_up_partial(q, tg, h).graph)? {
        return Ok(true);
    }
    let Some((n, j)) = first_open(tg, h) else {
        return visit(h);
    };
    for choice in slot_choices(tg, h, pos, n, j) {
        let saved = (h.clone(), pos.clone());
        match choice {
            Ok(m) => {
                if h.reach(&[m])[n] {
                    continue;
                }
                h.set(n, j, m);
            }
            Err(t) => {
                let m = h.add_node(t);
                pos.insert(t, m);
                h.set(n, j, m);
            }
        }
        let go_on = acyclic_rec(q, tg, h, pos, budget, prune, visit)?;
        *h = saved.0;
        *pos = saved.1;
        if !go_on {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Every realisable typed subgraph reachable from a root type (types are not
/// repeated), passed to `visit` until it returns false. `prune` sees partial
/// structures and may cut a branch.
fn realisable_from_roots(
    tg: &TypeGraph,
    budget: &mut Budget,
    prune: &mut dyn FnMut(&TypedDigraph) -> Result<bool>,
    visit: &mut dyn FnMut(&TypedDigraph) -> Result<bool>,
) -> Result<()> {
    for r in tg.roots() {
        let mut h = TypedDigraph::new();
        h.add_node(r);
        let mut pos = HashMap::new();
        pos.insert(r, 0);
        if !realisable_rec(tg, &mut h, &mut pos, budget, prune, visit)? {
            break;
        }
    }
    Ok(())
}

fn realisable_rec(
    tg: &TypeGraph,
    h: &mut TypedDigraph,
    pos: &mut HashMap<usize, usize>,
    budget: &mut Budget,
    prune: &mut dyn FnMut(&TypedDigraph) -> Result<bool>,
    visit: &mut dyn FnMut(&TypedDigraph) -> Result<bool>,
) -> Result<bool> {
    budget.tick()?;
    if prune(h)? {
        return Ok(true);
    }
    let Some((n, j)) = first_open(tg, h) else {
        return visit(h);
    };
    for choice in slot_choices(tg, h, pos, n, j) {
        let saved = (h.clone(), pos.clone());
        match choice {
            Ok(m) => h.set(n, j, m),
            Err(t) => {
                let m = h.add_node(t);
                pos.insert(t, m);
                h.set(n, j, m);
            }
        }
        let go_on = realisable_rec(tg, h, pos, budget, prune, visit)?;
        *h = saved.0;
        *pos = saved.1;
        if !go_on {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Every periodic structure with non-empty `P`, for oracle use at small span.
pub fn enumerate_structures(q: &OneCq, tg: &TypeGraph, cap: usize) -> Result<Vec<PeriodicStructure>> {
    let mut budget = Budget { used: 0, cap };
    let mut hs = Vec::new();
    realisable_from_roots(tg, &mut budget, &mut |_| Ok(false), &mut |h| {
        hs.push(h.clone());
        Ok(true)
    })?;
    let mut out = Vec::new();
    let mut acyclic_cache: HashMap<usize, Vec<TypedDigraph>> = HashMap::new();
    for h in hs {
        let (b, p) = periodic_parts(&h);
        if p.is_empty() {
            continue;
        }
        let cyclic = h.cyclic_nodes();
        for mask in 1u64..(1u64 << p.len().min(20)) {
            let r: Vec<usize> = p.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, &n)| n).collect();
            let mut keep = vec![false; h.len()];
            for &n in &p {
                keep[n] = !r.contains(&n);
            }
            if !h.induced(&keep).0.is_acyclic() || !r.iter().any(|&n| cyclic[n]) {
                continue;
            }
            let mut options = Vec::new();
            for &v in &r {
                let t = h.types[v];
                if let std::collections::hash_map::Entry::Vacant(slot) = acyclic_cache.entry(t) {
                    let mut all = Vec::new();
                    acyclic_from(q, tg, t, &mut budget, &mut |_| Ok(false), &mut |e| {
                        all.push(e.clone());
                        Ok(true)
                    })?;
                    slot.insert(all);
                }
                options.push(acyclic_cache[&t].clone());
            }
            let mut idx = vec![0usize; r.len()];
            loop {
                budget.tick()?;
                let e = idx.iter().zip(&options).map(|(&i, o)| o[i].clone()).collect();
                out.push(PeriodicStructure { h: h.clone(), b: b.clone(), p: p.clone(), r: r.clone(), e });
                let mut pos = 0;
                while pos < idx.len() {
                    idx[pos] += 1;
                    if idx[pos] < options[pos].len() {
                        break;
                    }
                    idx[pos] = 0;
                    pos += 1;
                }
                if pos == idx.len() {
                    break;
                }
            }
        }
    }
    Ok(out)
}

/// Black nodes, the pebble game, cuttable edges and the local checks.
#[derive(Clone, Debug)]
pub struct LocalAnalysis {
    /// Some root segment maps into the blow-up of the type alone.
    pub black: Vec<bool>,
    /// Winning positions of the second player (black ones included).
    pub second_player_wins: Vec<bool>,
    /// Least depth at which each edge `(t, j, t')` becomes cuttable, with
    /// extensions restricted to uncoloured types.
    pub cut_rank: BTreeMap<(usize, usize, usize), usize>,
    /// Depth at which the cuttable sets stop growing.
    pub stable_depth: usize,
    /// For every edge that is never cut, an extension of its target for
    /// which no segment maps.
    pub blocking: BTreeMap<(usize, usize, usize), Vec<(usize, usize)>>,
    /// Every root neighbourhood admits a root segment whose A-nodes are all
    /// cuttable.
    pub final_check: bool,
    /// A root neighbourhood failing the final check, if any.
    pub failing_root: Option<(usize, Vec<(usize, usize)>)>,
    /// Same checks without colour restrictions: every cactus has a window
    /// admitting a root segment with cuttable A-nodes, which directly bounds
    /// the depth of the cactuses that need to be considered.
    pub unrestricted_proof: bool,
}

impl LocalAnalysis {
    /// Blue nodes: second-player wins that are not black.
    pub fn blue(&self) -> Vec<bool> {
        self.black.iter().zip(&self.second_player_wins).map(|(&b, &w)| w && !b).collect()
    }

    /// Black or blue.
    pub fn coloured(&self) -> Vec<bool> {
        self.black.iter().zip(&self.second_player_wins).map(|(&b, &w)| w || b).collect()
    }

    /// Edges cuttable at depth `d`.
    pub fn cuttable_at(&self, d: usize) -> BTreeSet<(usize, usize, usize)> {
        self.cut_rank.iter().filter(|(_, &r)| r <= d).map(|(&e, _)| e).collect()
    }
}

/// Least fixpoint of the first player's attractor: `t` is won by the first
/// player iff it is not black and, for each budded label, some successor is
/// won by the first player (leaf types need nothing).
pub fn first_player_wins(tg: &TypeGraph, black: &[bool]) -> Vec<bool> {
    let mut win = vec![false; tg.len()];
    loop {
        let mut changed = false;
        for t in 0..tg.len() {
            if !win[t] && !black[t] && tg.types[t].budded().iter().all(|&j| tg.successors(t, j).iter().any(|&u| win[u])) {
                win[t] = true;
                changed = true;
            }
        }
        if !changed {
            return win;
        }
    }
}

/// Greatest fixpoint of the second player's condition: black, or some
/// budded label all of whose successors are again second-player wins.
pub fn second_player_gfp(tg: &TypeGraph, black: &[bool]) -> Vec<bool> {
    let mut win = vec![true; tg.len()];
    loop {
        let mut changed = false;
        for t in 0..tg.len() {
            if win[t]
                && !black[t]
                && !tg.types[t].budded().iter().any(|&j| tg.successors(t, j).iter().all(|&u| win[u]))
            {
                win[t] = false;
                changed = true;
            }
        }
        if !changed {
            return win;
        }
    }
}

/// All choices of one successor type per budded label of `t`, among the
/// `allowed` types.
fn extensions(tg: &TypeGraph, t: usize, allowed: &[bool]) -> Vec<Vec<(usize, usize)>> {
    extensions_where(tg, t, |_, u| allowed[u])
}

/// All choices of one successor per budded label `j` of `t` with `keep(j, u)`.
fn extensions_where(tg: &TypeGraph, t: usize, keep: impl Fn(usize, usize) -> bool) -> Vec<Vec<(usize, usize)>> {
    let mut out: Vec<Vec<(usize, usize)>> = vec![Vec::new()];
    for j in tg.types[t].budded() {
        let succ: Vec<usize> = tg.successors(t, j).into_iter().filter(|&u| keep(j, u)).collect();
        out = out.into_iter().flat_map(|e| succ.iter().map(move |&u| [e.clone(), vec![(j, u)]].concat())).collect();
    }
    out
}

/// How windows are read when deciding cuttability.
struct CutRules<'a> {
    /// Types that may fill unknown buds and extensions.
    allowed: &'a [bool],
    /// Remove the focus of the parent segment from edge windows.
    drop_parent_focus: bool,
    /// The bud the segment is anchored at may host A-nodes of the segment.
    anchor_usable: bool,
}

/// A window: node 0 is the parent (or the root), node 1 the child of an edge
/// window, the rest its extension.
fn edge_window(u: usize, j: usize, v: usize, ext: &[(usize, usize)]) -> TypedDigraph {
    let mut h = TypedDigraph::new();
    h.add_node(u);
    h.add_node(v);
    h.set(0, j, 1);
    for &(l, w) in ext {
        let m = h.add_node(w);
        h.set(1, l, m);
    }
    h
}

fn root_window(r: usize, ext: &[(usize, usize)]) -> TypedDigraph {
    let mut h = TypedDigraph::new();
    h.add_node(r);
    for &(l, w) in ext {
        let m = h.add_node(w);
        h.set(0, l, m);
    }
    h
}

/// Marks T-nodes and the A-nodes whose subtrees can be cut (per `cut`), then
/// looks for a segment: anchored at the focus of node 1 when `anchored`,
/// otherwise a root segment anywhere.
fn window_maps(
    q: &OneCq,
    tg: &TypeGraph,
    h: &TypedDigraph,
    cut: &BTreeSet<(usize, usize, usize)>,
    anchored: bool,
    rules: &CutRules,
) -> Result<bool> {
    let bu = blow_up_partial(q, tg, h);
    let mut g = bu.graph;
    for v in g.nodes() {
        if g.has_label(v, "T") {
            g.add_label(v, OK_LABEL);
        }
    }
    for n in 0..h.len() {
        let t = h.types[n];
        for j in tg.types[t].budded() {
            let ok = match h.succ[n].get(&j) {
                Some(&m) => cut.contains(&(t, j, h.types[m])),
                None => tg.successors(t, j).iter().filter(|&&u| rules.allowed[u]).all(|&u| cut.contains(&(t, j, u))),
            };
            if ok {
                g.add_label(bu.segments[n][q.ys[j - 1]], OK_LABEL);
            }
        }
    }
    let marks = vec![Some(OK_LABEL); q.span()];
    if !anchored {
        let src = q.variant(Some("F"), &marks);
        return Ok(hom::hom_exists(&src, &g, &Anchor::none())?.is_some());
    }
    let mut anchor = bu.segments[1][q.x];
    if rules.anchor_usable {
        g.add_label(anchor, OK_LABEL);
    }
    if rules.drop_parent_focus {
        let focus = bu.segments[0][q.x];
        g = g.without_node(focus);
        if anchor > focus {
            anchor -= 1;
        }
    }
    let src = q.variant(Some("A"), &marks);
    Ok(hom::hom_exists(&src, &g, &Anchor::one(q.x, anchor))?.is_some())
}

/// An extension of `v` under which no segment can be anchored at the edge
/// `(u, j, v)` using only cuttable A-nodes.
fn blocking_extension(
    q: &OneCq,
    tg: &TypeGraph,
    (u, j, v): (usize, usize, usize),
    cut: &BTreeSet<(usize, usize, usize)>,
    rules: &CutRules,
) -> Result<Option<Vec<(usize, usize)>>> {
    for ext in extensions(tg, v, rules.allowed) {
        if !window_maps(q, tg, &edge_window(u, j, v, &ext), cut, true, rules)? {
            return Ok(Some(ext));
        }
    }
    Ok(None)
}

/// Iterates cuttability to its fixpoint; returns the ranks and the depth.
fn cut_fixpoint(q: &OneCq, tg: &TypeGraph, rules: &CutRules) -> Result<(BTreeMap<(usize, usize, usize), usize>, usize)> {
    let mut rank = BTreeMap::new();
    let mut cut: BTreeSet<(usize, usize, usize)> = BTreeSet::new();
    let mut d = 0;
    loop {
        let mut next = cut.clone();
        for &e in &tg.edges {
            if !cut.contains(&e) && blocking_extension(q, tg, e, &cut, rules)?.is_none() {
                next.insert(e);
                rank.insert(e, d + 1);
            }
        }
        if next.len() == cut.len() {
            return Ok((rank, d));
        }
        cut = next;
        d += 1;
    }
}

/// Black nodes, game, cuttable ranks and the final check.
pub fn local_analysis(q: &OneCq, tg: &TypeGraph) -> Result<LocalAnalysis> {
    let mut black = Vec::with_capacity(tg.len());
    for t in 0..tg.len() {
        let mut h = TypedDigraph::new();
        h.add_node(t);
        black.push(root_segment_maps(q, &blow_up_partial(q, tg, &h).graph)?);
    }
    let second_player_wins: Vec<bool> = first_player_wins(tg, &black).iter().map(|w| !w).collect();
    let uncoloured: Vec<bool> = black.iter().zip(&second_player_wins).map(|(&b, &w)| !b && !w).collect();
    let all = vec![true; tg.len()];

    let rules = CutRules { allowed: &uncoloured, drop_parent_focus: true, anchor_usable: false };
    let (cut_rank, stable_depth) = cut_fixpoint(q, tg, &rules)?;
    let cut: BTreeSet<_> = cut_rank.keys().copied().collect();
    let mut blocking = BTreeMap::new();
    for &e in &tg.edges {
        if !cut.contains(&e) {
            if let Some(ext) = blocking_extension(q, tg, e, &cut, &rules)? {
                blocking.insert(e, ext);
            }
        }
    }
    let mut failing_root = None;
    'roots: for r in tg.roots() {
        for ext in extensions(tg, r, &all) {
            if !window_maps(q, tg, &root_window(r, &ext), &cut, false, &rules)? {
                failing_root = Some((r, ext));
                break 'roots;
            }
        }
    }

    let unrestricted_proof = unrestricted_local_proof(q, tg)?;
    Ok(LocalAnalysis {
        black,
        second_player_wins,
        cut_rank,
        stable_depth,
        blocking,
        final_check: failing_root.is_none(),
        failing_root,
        unrestricted_proof,
    })
}

/// Cuttability over all extensions, then a least fixpoint of edges below
/// which some finite subtree has no window (parent, child, grandchildren)
/// admitting a root segment with cuttable A-nodes. If no cactus is built
/// from such subtrees, every cactus contains the image of one of depth at
/// most the stable depth plus one.
fn unrestricted_local_proof(q: &OneCq, tg: &TypeGraph) -> Result<bool> {
    let all = vec![true; tg.len()];
    let rules = CutRules { allowed: &all, drop_parent_focus: false, anchor_usable: false };
    let (rank, _) = cut_fixpoint(q, tg, &rules)?;
    let cut: BTreeSet<_> = rank.keys().copied().collect();
    // only extensions through bad edges matter, so they are enumerated lazily
    let mut memo: HashMap<((usize, usize, usize), Vec<(usize, usize)>), bool> = HashMap::new();
    let mut bad: BTreeSet<(usize, usize, usize)> = BTreeSet::new();
    loop {
        let before = bad.len();
        for &(u, j, v) in &tg.edges {
            if bad.contains(&(u, j, v)) {
                continue;
            }
            for ext in extensions_where(tg, v, |l, w| bad.contains(&(v, l, w))) {
                let key = ((u, j, v), ext);
                let maps = match memo.get(&key) {
                    Some(&m) => m,
                    None => {
                        let m = window_maps(q, tg, &edge_window(u, j, v, &key.1), &cut, false, &rules)?;
                        memo.insert(key, m);
                        m
                    }
                };
                if !maps {
                    bad.insert((u, j, v));
                    break;
                }
            }
        }
        if bad.len() == before {
            break;
        }
    }
    for r in tg.roots() {
        for ext in extensions_where(tg, r, |l, w| bad.contains(&(r, l, w))) {
            if !window_maps(q, tg, &root_window(r, &ext), &cut, false, &rules)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Folds the non-cuttable continuation from a failing root neighbourhood
/// into a typed digraph (one node per type): blocked edges continue with
/// their blocking extension, other buds with the first uncoloured choice.
pub fn counterexample_structure(q: &OneCq, tg: &TypeGraph, a: &LocalAnalysis, cap: usize) -> Result<Option<PeriodicStructure>> {
    let Some((r, ext)) = &a.failing_root else { return Ok(None) };
    let uncoloured: Vec<bool> = a.coloured().iter().map(|c| !c).collect();
    let mut h = TypedDigraph::new();
    let mut pos: HashMap<usize, usize> = HashMap::new();
    h.add_node(*r);
    pos.insert(*r, 0);
    let mut plan: HashMap<usize, Vec<(usize, usize)>> = HashMap::new();
    plan.insert(0, ext.clone());
    let mut queue = vec![0usize];
    while let Some(n) = queue.pop() {
        let t = h.types[n];
        let chosen = plan.remove(&n).unwrap_or_default();
        for j in tg.types[t].budded() {
            let w = match chosen.iter().find(|(l, _)| *l == j) {
                Some(&(_, w)) => w,
                None => match tg.successors(t, j).into_iter().find(|&u| uncoloured[u]) {
                    Some(w) => w,
                    None => return Ok(None),
                },
            };
            let m = match pos.get(&w) {
                Some(&m) => m,
                None => {
                    let m = h.add_node(w);
                    pos.insert(w, m);
                    if let Some(b) = a.blocking.get(&(t, j, w)) {
                        plan.insert(m, b.clone());
                    }
                    queue.push(m);
                    m
                }
            };
            h.set(n, j, m);
        }
    }
    let (b, p) = periodic_parts(&h);
    if p.is_empty() {
        return Ok(None);
    }
    let mut budget = Budget { used: 0, cap };
    let mut r_nodes = Vec::new();
    let mut e = Vec::new();
    for &n in &p {
        if let Some(w) = non_blue_witness(q, tg, h.types[n], &mut budget)? {
            r_nodes.push(n);
            e.push(w);
        }
    }
    let ps = PeriodicStructure { h, b, p, r: r_nodes, e };
    Ok(ps.validate(tg).is_ok().then_some(ps))
}

/// Options for [`decide_fo`].
#[derive(Clone, Debug)]
pub struct LambdaOptions {
    pub max_span: usize,
    pub search_cap: usize,
    /// `(d_max, probe_depth)` for the empirical bound on FO verdicts.
    pub probe: Option<(usize, usize)>,
    pub cactus_cap: usize,
}

impl Default for LambdaOptions {
    fn default() -> Self {
        LambdaOptions { max_span: DEFAULT_MAX_SPAN, search_cap: DEFAULT_SEARCH_CAP, probe: Some((3, 4)), cactus_cap: 2_000 }
    }
}

/// How an FO verdict was reached.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FoMethod {
    /// Every cactus has a window admitting a root segment with cuttable
    /// A-nodes.
    LocalProof,
    /// Every root neighbourhood passes the check with colour restrictions.
    FinalCheck,
    /// No periodic structure violates h1 to h3.
    ExhaustiveSearch,
}

#[derive(Clone, Debug)]
pub enum LambdaVerdict {
    Fo { method: FoMethod, empirical_bound: Option<usize> },
    LHard { witness: PeriodicStructure, conditions: HConditions },
}

/// Full output of [`decide_fo`].
#[derive(Clone, Debug)]
pub struct LambdaDecision {
    pub type_graph: TypeGraph,
    pub analysis: LocalAnalysis,
    pub verdict: LambdaVerdict,
    /// States visited by the exact search (0 if it was not needed).
    pub searched: usize,
}

impl LambdaDecision {
    pub fn is_fo(&self) -> bool {
        matches!(self.verdict, LambdaVerdict::Fo { .. })
    }

    pub fn to_json(&self) -> Value {
        let tg = &self.type_graph;
        let names = |v: &[bool]| -> Vec<String> {
            v.iter().enumerate().filter(|(_, &b)| b).map(|(t, _)| tg.types[t].to_string()).collect()
        };
        let verdict = match &self.verdict {
            LambdaVerdict::Fo { method, empirical_bound } => json!({
                "verdict": "FO",
                "method": match method {
                    FoMethod::LocalProof => "local-proof",
                    FoMethod::FinalCheck => "final-check",
                    FoMethod::ExhaustiveSearch => "exhaustive-search",
                },
                "empirical_bound": empirical_bound,
            }),
            LambdaVerdict::LHard { witness, conditions } => json!({
                "verdict": "L-hard",
                "witness": witness.to_json(tg),
                "conditions": conditions,
            }),
        };
        json!({
            "span": tg.k,
            "types": tg.len(),
            "type_edges": tg.edges.len(),
            "black": names(&self.analysis.black),
            "blue": names(&self.analysis.blue()),
            "cuttable_edges": self.analysis.cut_rank.len(),
            "stable_depth": self.analysis.stable_depth,
            "final_check": self.analysis.final_check,
            "unrestricted_proof": self.analysis.unrestricted_proof,
            "searched": self.searched,
            "result": verdict,
        })
    }
}

/// Checks that `q` is a Λ-CQ and returns it as a 1-CQ.
pub fn lambda_query(q: &LabelledGraph) -> Result<OneCq> {
    let s = shape(q);
    if !s.is_ditree {
        return Err(Error::NotDitree("Λ-CQs are ditrees".into()));
    }
    if s.lambda_span.is_none() {
        return Err(Error::Shape("not a Λ-CQ".into()));
    }
    OneCq::new(q)
}

/// Non-blue witnesses per type, computed on demand: an acyclic realisable
/// subgraph into whose blow-up no root segment maps.
struct BlueOracle<'a> {
    q: &'a OneCq,
    tg: &'a TypeGraph,
    cache: HashMap<usize, Option<TypedDigraph>>,
}

impl BlueOracle<'_> {
    fn non_blue_witness(&mut self, t: usize, budget: &mut Budget) -> Result<Option<TypedDigraph>> {
        if let Some(w) = self.cache.get(&t) {
            return Ok(w.clone());
        }
        let found = non_blue_witness(self.q, self.tg, t, budget)?;
        self.cache.insert(t, found.clone());
        Ok(found)
    }
}

fn non_blue_witness(q: &OneCq, tg: &TypeGraph, t: usize, budget: &mut Budget) -> Result<Option<TypedDigraph>> {
    let mut found = None;
    acyclic_from(q, tg, t, budget, &mut |g| root_segment_maps(q, g), &mut |h| {
        found = Some(h.clone());
        Ok(false)
    })?;
    Ok(found)
}

/// An acyclic realisable subgraph with source type `t` into whose blow-up no
/// root segment maps, if there is one (`None` means `t` is blue).
pub fn exact_blue(q: &OneCq, tg: &TypeGraph, t: usize, cap: usize) -> Result<Option<TypedDigraph>> {
    non_blue_witness(q, tg, t, &mut Budget { used: 0, cap })
}

/// Decides FO-rewritability of `(Δq, G)` for a Λ-CQ `q`.
///
/// Order of evidence: the unrestricted local proof (FO), the final check
/// over root neighbourhoods (FO), a counterexample structure built from the
/// blocked edges and confirmed by [`check_h_conditions`] (L-hard), and
/// finally the capped exact search.
pub fn decide_fo(q: &LabelledGraph, opts: &LambdaOptions) -> Result<LambdaDecision> {
    let cq = lambda_query(q)?;
    let tg = TypeGraph::new(cq.span(), opts.max_span)?;
    let analysis = local_analysis(&cq, &tg)?;
    let fo = |method, analysis, tg| -> Result<LambdaDecision> {
        Ok(LambdaDecision {
            type_graph: tg,
            analysis,
            verdict: LambdaVerdict::Fo { method, empirical_bound: empirical_bound(&cq, opts)? },
            searched: 0,
        })
    };
    if analysis.unrestricted_proof {
        return fo(FoMethod::LocalProof, analysis, tg);
    }
    if analysis.final_check {
        return fo(FoMethod::FinalCheck, analysis, tg);
    }
    if let Some(ps) = counterexample_structure(&cq, &tg, &analysis, opts.search_cap)? {
        let conditions = check_h_conditions(&cq, &tg, &ps)?;
        if !conditions.any_of_first_three() {
            return Ok(LambdaDecision { type_graph: tg, analysis, verdict: LambdaVerdict::LHard { witness: ps, conditions }, searched: 0 });
        }
    }
    let (found, searched) = find_violation(&cq, &tg, opts.search_cap)?;
    let verdict = match found {
        Some((witness, conditions)) => LambdaVerdict::LHard { witness, conditions },
        None => LambdaVerdict::Fo { method: FoMethod::ExhaustiveSearch, empirical_bound: empirical_bound(&cq, opts)? },
    };
    Ok(LambdaDecision { type_graph: tg, analysis, verdict, searched })
}

fn empirical_bound(q: &OneCq, opts: &LambdaOptions) -> Result<Option<usize>> {
    let Some((d_max, probe)) = opts.probe else { return Ok(None) };
    Ok(match cactus::boundedness_witness(q, d_max, probe, false, opts.cactus_cap)? {
        Witness::Witness { d, .. } => Some(d),
        Witness::NoWitnessUpTo { .. } => None,
    })
}

/// Searches for a periodic structure violating h1 to h3, preferring one that
/// also violates h4. Returns the structure (if any) and the number of states
/// visited.
pub fn find_violation(q: &OneCq, tg: &TypeGraph, cap: usize) -> Result<(Option<(PeriodicStructure, HConditions)>, usize)> {
    let mut budget = Budget { used: 0, cap };
    let mut blue_budget = Budget { used: 0, cap };
    let mut oracle = BlueOracle { q, tg, cache: HashMap::new() };
    let mut best: Option<(PeriodicStructure, HConditions)> = None;
    let mut h2_cache: HashMap<Vec<(usize, Vec<(usize, usize)>)>, bool> = HashMap::new();

    let oracle_ref = std::cell::RefCell::new(&mut oracle);
    let blue_budget_ref = std::cell::RefCell::new(&mut blue_budget);
    let h2_ref = std::cell::RefCell::new(&mut h2_cache);

    let p_bar_maps = |h: &TypedDigraph, p: &[usize]| -> Result<bool> {
        let key: Vec<(usize, Vec<(usize, usize)>)> = p
            .iter()
            .map(|&n| (h.types[n], h.succ[n].iter().map(|(&j, &m)| (j, h.types[m])).collect()))
            .collect();
        if let Some(&v) = h2_ref.borrow().get(&key) {
            return Ok(v);
        }
        let mut keep = vec![false; h.len()];
        for &n in p {
            keep[n] = true;
        }
        let v = root_segment_maps(q, &blow_up_partial(q, tg, &h.induced(&keep).0).graph)?;
        h2_ref.borrow_mut().insert(key, v);
        Ok(v)
    };

    let is_blue = |t: usize| -> Result<bool> {
        let mut o = oracle_ref.borrow_mut();
        let mut b = blue_budget_ref.borrow_mut();
        Ok(o.non_blue_witness(t, &mut b)?.is_none())
    };

    let mut prune = |h: &TypedDigraph| -> Result<bool> {
        let (_, p) = periodic_parts(h);
        if p.is_empty() {
            return Ok(false);
        }
        // cycles through blue nodes only can never be hit by R
        let cyclic = h.cyclic_nodes();
        let mut keep = vec![false; h.len()];
        for &n in &p {
            keep[n] = cyclic[n] && is_blue(h.types[n])?;
        }
        if !h.induced(&keep).0.is_acyclic() {
            return Ok(true);
        }
        p_bar_maps(h, &p)
    };

    let mut visit = |h: &TypedDigraph| -> Result<bool> {
        let (b, p) = periodic_parts(h);
        if p.is_empty() {
            return Ok(true);
        }
        let acyclic = blow_up_partial(q, tg, &h.acyclic_version()).graph;
        if some_cactus_maps(q, &acyclic)? {
            return Ok(true);
        }
        let mut r = Vec::new();
        let mut e = Vec::new();
        for &n in &p {
            let w = {
                let mut o = oracle_ref.borrow_mut();
                let mut bb = blue_budget_ref.borrow_mut();
                o.non_blue_witness(h.types[n], &mut bb)?
            };
            if let Some(w) = w {
                r.push(n);
                e.push(w);
            }
        }
        let ps = PeriodicStructure { h: h.clone(), b, p, r, e };
        let h4 = leaf_segment_maps(q, &blow_up_partial(q, tg, h).graph)?;
        let conditions = HConditions { h1: false, h2: false, h3: false, h4 };
        let done = !h4;
        if best.as_ref().map_or(true, |(_, c)| c.h4 && !h4) {
            best = Some((ps, conditions));
        }
        Ok(!done)
    };

    realisable_from_roots(tg, &mut budget, &mut prune, &mut visit)?;
    Ok((best, budget.used))
}
