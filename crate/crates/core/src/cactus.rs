//! Cactus expansion of a 1-CQ.
//!
//! A cactus is built from `q` by repeatedly budding solitary T-nodes: the
//! budded node is relabelled `A` and becomes the focus of a fresh copy of `q`.
//! Segment `s` names its nodes `<s>_<name>`. Enumeration is canonical:
//! skeletons are listed by segment count, then by child choices, and each
//! skeleton is realised breadth-first with buds in label order.

use std::collections::HashMap;
use std::rc::Rc;
use std::sync::Arc;

use serde::Serialize;

use crate::cq::OneCq;
use crate::error::{Error, Result};
use crate::graph::{LabelledGraph, NodeId};
use crate::hom::{self, Anchor, HomOptions};

/// Default enumeration cap.
pub const DEFAULT_CAP: usize = 10_000;

/// Scratch label marking nodes already known to be in the `P` stage set.
const STAGE_LABEL: &str = "\u{1}P";

/// One node of a skeleton.
#[derive(Clone, Debug, Serialize)]
pub struct Segment {
    /// Parent segment, `None` for the root segment.
    pub parent: Option<usize>,
    /// Bud label on the edge from the parent (0 for the root).
    pub label: usize,
    pub depth: usize,
    pub focus: NodeId,
    /// Image of each node of `q` in this segment, indexed by `q`'s node ids.
    pub nodes: Vec<NodeId>,
}

/// Ditree over segments; edge labels are bud labels.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Skeleton {
    pub segments: Vec<Segment>,
}

impl Skeleton {
    pub fn depth(&self) -> usize {
        self.segments.iter().map(|s| s.depth).max().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Children of segment `s` as `(label, child)` pairs sorted by label.
    pub fn children(&self, s: usize) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self
            .segments
            .iter()
            .enumerate()
            .filter(|(_, seg)| seg.parent == Some(s))
            .map(|(i, seg)| (seg.label, i))
            .collect();
        out.sort();
        out
    }

    /// `(parent, child, label)` triples.
    pub fn edges(&self) -> Vec<(usize, usize, usize)> {
        self.segments
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.parent.map(|p| (p, i, s.label)))
            .collect()
    }
}

/// A cactus over a fixed 1-CQ.
#[derive(Clone, Debug)]
pub struct Cactus {
    pub graph: LabelledGraph,
    pub root_focus: NodeId,
    pub skeleton: Skeleton,
    query: Arc<OneCq>,
    /// For every cactus node, the segment that created it and its `q` node.
    origin: Vec<(usize, NodeId)>,
}

impl Cactus {
    /// The depth-0 cactus: a copy of `q` with names prefixed `0_`.
    pub fn from_query(q: Arc<OneCq>) -> Cactus {
        let graph = q.q.prefixed("0_");
        let nodes: Vec<NodeId> = q.q.nodes().collect();
        let origin = nodes.iter().map(|&n| (0, n)).collect();
        let root_focus = q.x;
        let seg = Segment { parent: None, label: 0, depth: 0, focus: root_focus, nodes };
        Cactus { graph, root_focus, skeleton: Skeleton { segments: vec![seg] }, query: q, origin }
    }

    pub fn query(&self) -> &OneCq {
        &self.query
    }

    pub fn depth(&self) -> usize {
        self.skeleton.depth()
    }

    pub fn segment_count(&self) -> usize {
        self.skeleton.len()
    }

    /// Solitary T-nodes of the cactus, i.e. the nodes that can still be budded.
    pub fn buddable(&self) -> Vec<NodeId> {
        self.graph
            .nodes()
            .filter(|&v| self.graph.has_label(v, "T") && !self.graph.has_label(v, "F"))
            .collect()
    }

    /// The copy of `y_label` (1-based) in segment `s`.
    pub fn y_in(&self, s: usize, label: usize) -> NodeId {
        self.skeleton.segments[s].nodes[self.query.ys[label - 1]]
    }

    /// Attach a fresh copy of `q` at the solitary T-node `target`.
    pub fn bud(&self, target: NodeId) -> Result<Cactus> {
        let g = &self.graph;
        if target >= g.node_count() || !g.has_label(target, "T") || g.has_label(target, "F") {
            return Err(Error::Precondition(format!(
                "bud target {} is not a solitary T-node",
                if target < g.node_count() { g.name(target) } else { "?" }
            )));
        }
        let (parent, qnode) = self.origin[target];
        let label = self
            .query
            .label_of(qnode)
            .ok_or_else(|| Error::Precondition(format!("{} is not a copy of a solitary T-node", g.name(target))))?;
        let q = &self.query.q;
        let idx = self.skeleton.len();
        let mut graph = g.clone();
        let mut origin = self.origin.clone();
        let mut map = vec![0; q.node_count()];
        for v in q.nodes() {
            map[v] = if v == self.query.x {
                target
            } else {
                let id = graph.add_node(&format!("{idx}_{}", q.name(v)));
                origin.push((idx, v));
                id
            };
            for l in q.labels(v) {
                if !(v == self.query.x && l == "F") {
                    graph.add_label(map[v], l);
                }
            }
        }
        graph.remove_label(target, "T");
        graph.add_label(target, "A");
        for e in q.edges() {
            graph.add_edge(map[e.src], map[e.dst], &e.pred);
        }
        let mut skeleton = self.skeleton.clone();
        let depth = skeleton.segments[parent].depth + 1;
        skeleton.segments.push(Segment { parent: Some(parent), label, depth, focus: target, nodes: map });
        Ok(Cactus { graph, root_focus: self.root_focus, skeleton, query: self.query.clone(), origin })
    }

    /// `C°`: the root focus relabelled from F to A.
    pub fn defocused(&self) -> LabelledGraph {
        defocus(&self.graph, self.root_focus)
    }

    /// Skeleton as JSON-friendly rows.
    pub fn skeleton_summary(&self) -> serde_json::Value {
        let segs: Vec<_> = self
            .skeleton
            .segments
            .iter()
            .enumerate()
            .map(|(i, s)| {
                serde_json::json!({
                    "segment": i,
                    "parent": s.parent,
                    "label": s.label,
                    "depth": s.depth,
                    "focus": self.graph.name(s.focus),
                })
            })
            .collect();
        serde_json::json!({ "depth": self.depth(), "segments": segs })
    }
}

/// Replace F on `root` with A. Idempotent.
pub fn defocus(g: &LabelledGraph, root: NodeId) -> LabelledGraph {
    let mut out = g.clone();
    if out.remove_label(root, "F") {
        out.add_label(root, "A");
    }
    out
}

/// Defocus a cactus.
pub fn defocus_root(c: &Cactus) -> LabelledGraph {
    c.defocused()
}

/// Skeleton shape: child slot `i` holds the subtree budded at label `i + 1`.
#[derive(Debug)]
struct Shape {
    children: Vec<Option<Rc<Shape>>>,
}

struct ShapeGen {
    k: usize,
    memo: HashMap<(usize, usize), Rc<Vec<Rc<Shape>>>>,
}

impl ShapeGen {
    /// All shapes with exactly `n` segments and depth at most `d`.
    fn shapes(&mut self, d: usize, n: usize) -> Rc<Vec<Rc<Shape>>> {
        if let Some(v) = self.memo.get(&(d, n)) {
            return v.clone();
        }
        let mut out = Vec::new();
        if n == 1 {
            out.push(Rc::new(Shape { children: vec![None; self.k] }));
        } else if n > 1 && d > 0 && self.k > 0 {
            let mut slots = Vec::new();
            self.fill(d - 1, n - 1, &mut slots, &mut out);
        }
        let v = Rc::new(out);
        self.memo.insert((d, n), v.clone());
        v
    }

    fn fill(&mut self, d: usize, left: usize, slots: &mut Vec<Option<Rc<Shape>>>, out: &mut Vec<Rc<Shape>>) {
        if slots.len() == self.k {
            if left == 0 {
                out.push(Rc::new(Shape { children: slots.clone() }));
            }
            return;
        }
        slots.push(None);
        self.fill(d, left, slots, out);
        slots.pop();
        for m in 1..=left {
            let subs = self.shapes(d, m);
            for s in subs.iter() {
                slots.push(Some(s.clone()));
                self.fill(d, left - m, slots, out);
                slots.pop();
            }
        }
    }
}

/// Number of skeletons of depth at most `d` with branching `k`, saturating.
pub fn cactus_count(k: usize, d: usize) -> u128 {
    let mut c: u128 = 1;
    for _ in 0..d {
        let base = 1u128.saturating_add(c);
        let mut next: u128 = 1;
        for _ in 0..k {
            next = next.saturating_mul(base);
        }
        c = next;
    }
    c
}

fn max_segments(k: usize, d: usize) -> usize {
    let mut total = 0usize;
    let mut level = 1usize;
    for _ in 0..=d {
        total = total.saturating_add(level);
        level = level.saturating_mul(k);
    }
    total
}

fn realise(root: &Cactus, shape: &Shape) -> Result<Cactus> {
    let mut c = root.clone();
    let mut queue = std::collections::VecDeque::from([(shape, 0usize)]);
    while let Some((sh, seg)) = queue.pop_front() {
        for (i, child) in sh.children.iter().enumerate() {
            if let Some(child) = child {
                let target = c.y_in(seg, i + 1);
                c = c.bud(target)?;
                queue.push_back((child, c.segment_count() - 1));
            }
        }
    }
    Ok(c)
}

/// Enumerated cactuses with an explicit truncation flag.
#[derive(Clone, Debug)]
pub struct Enumeration {
    pub cactuses: Vec<Cactus>,
    pub truncated: bool,
}

/// All cactuses of depth at most `d`, at most `cap` of them.
pub fn cactuses_up_to(q: &OneCq, d: usize, cap: usize) -> Result<Enumeration> {
    let q = Arc::new(q.clone());
    let base = Cactus::from_query(q.clone());
    let k = q.span();
    let total = cactus_count(k, d);
    let mut gen = ShapeGen { k, memo: HashMap::new() };
    let mut out = Vec::new();
    'outer: for n in 1..=max_segments(k, d) {
        for s in gen.shapes(d, n).iter() {
            if out.len() >= cap {
                break 'outer;
            }
            out.push(realise(&base, s)?);
        }
    }
    Ok(Enumeration { truncated: total > out.len() as u128, cactuses: out })
}

/// Stage sets `P_0 ⊆ P_1 ⊆ ...` of the unfolded sirup over `data`:
/// `P_0` holds the T-nodes and `P_{j+1}` adds every A-node `a` such that `q⁻`
/// maps with `x ↦ a` and all `y_i` into `P_j`. A node is in `P_j` iff it is
/// T or the focus image of a defocused cactus of depth below `j`.
pub struct Stages<'a> {
    q: &'a OneCq,
    data: LabelledGraph,
    rule: LabelledGraph,
    goal: LabelledGraph,
    member: Vec<bool>,
    stage: usize,
}

impl<'a> Stages<'a> {
    pub fn new(q: &'a OneCq, data: &LabelledGraph) -> Stages<'a> {
        let marks = vec![Some(STAGE_LABEL); q.span()];
        let mut data = data.clone();
        let member: Vec<bool> = data.nodes().map(|v| data.has_label(v, "T")).collect();
        for (v, &m) in member.iter().enumerate() {
            if m {
                data.add_label(v, STAGE_LABEL);
            }
        }
        Stages { q, rule: q.variant(Some("A"), &marks), goal: q.variant(Some("F"), &marks), data, member, stage: 0 }
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.member[v]
    }

    /// Advance one stage; returns whether anything was added.
    pub fn advance(&mut self) -> Result<bool> {
        let mut added = Vec::new();
        for a in self.data.nodes() {
            if !self.member[a]
                && self.data.has_label(a, "A")
                && hom::hom_exists(&self.rule, &self.data, &Anchor::one(self.q.x, a))?.is_some()
            {
                added.push(a);
            }
        }
        for &a in &added {
            self.member[a] = true;
            self.data.add_label(a, STAGE_LABEL);
        }
        self.stage += 1;
        Ok(!added.is_empty())
    }

    /// Does a cactus of depth at most the current stage map into the data
    /// (with the focus sent to `root` when given)?
    pub fn goal(&self, root: Option<NodeId>) -> Result<bool> {
        let anchor = match root {
            Some(r) => Anchor::one(self.q.x, r),
            None => Anchor::none(),
        };
        Ok(hom::hom_exists(&self.goal, &self.data, &anchor)?.is_some())
    }
}

/// Least `d ≤ d_max` such that some cactus of depth at most `d` maps into
/// `data`, optionally sending the focus to `root`.
pub fn least_mapping_depth(q: &OneCq, data: &LabelledGraph, d_max: usize, root: Option<NodeId>) -> Result<Option<usize>> {
    let mut st = Stages::new(q, data);
    loop {
        if st.goal(root)? {
            return Ok(Some(st.stage()));
        }
        if st.stage() >= d_max || !st.advance()? {
            return Ok(None);
        }
    }
}

/// Result of the empirical boundedness probe.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict")]
pub enum Witness {
    /// Every probed cactus contains an image of one of depth at most `d`.
    Witness { d: usize, probe_depth: usize, probed: usize, truncated: bool, empirical: bool },
    /// No depth up to `d_max` works for the probed cactuses.
    NoWitnessUpTo { d_max: usize, probe_depth: usize, probed: usize, truncated: bool, blocker: Option<usize> },
}

/// Search for a depth bound `d ≤ d_max` valid on all cactuses of depth at
/// most `probe_depth`.
pub fn boundedness_witness(q: &OneCq, d_max: usize, probe_depth: usize, rooted: bool, cap: usize) -> Result<Witness> {
    if probe_depth <= d_max {
        return Err(Error::Precondition(format!("probe depth {probe_depth} must exceed d_max {d_max}")));
    }
    let en = cactuses_up_to(q, probe_depth, cap)?;
    let mut need = 0;
    for (i, c) in en.cactuses.iter().enumerate() {
        let depth = c.depth();
        if depth <= need {
            continue;
        }
        let root = rooted.then_some(c.root_focus);
        match least_mapping_depth(q, &c.graph, d_max.min(depth), root)? {
            Some(d) if d <= d_max => need = need.max(d),
            _ => {
                return Ok(Witness::NoWitnessUpTo {
                    d_max,
                    probe_depth,
                    probed: en.cactuses.len(),
                    truncated: en.truncated,
                    blocker: Some(i),
                })
            }
        }
    }
    Ok(Witness::Witness { d: need, probe_depth, probed: en.cactuses.len(), truncated: en.truncated, empirical: true })
}

/// A hom `C → C′` sending the root focus of `C` to a node other than the
/// root focus of `C′`.
#[derive(Clone, Debug, Serialize)]
pub struct FocusCounterexample {
    pub source: usize,
    pub target: usize,
    pub image: String,
}

/// Outcome of the focusedness probe.
#[derive(Clone, Debug, Serialize)]
pub struct FocusReport {
    pub focused: bool,
    pub depth: usize,
    pub truncated: bool,
    pub counterexample: Option<FocusCounterexample>,
}

/// Check on all cactuses of depth at most `depth` that homs between them
/// preserve the root focus.
pub fn check_focused(q: &OneCq, depth: usize, cap: usize) -> Result<FocusReport> {
    let en = cactuses_up_to(q, depth, cap)?;
    for (j, tgt) in en.cactuses.iter().enumerate() {
        let others: Vec<NodeId> =
            tgt.graph.nodes_with_label("F").into_iter().filter(|&v| v != tgt.root_focus).collect();
        if others.is_empty() {
            continue;
        }
        for (i, src) in en.cactuses.iter().enumerate() {
            for &a in &others {
                if hom::hom_exists(&src.graph, &tgt.graph, &Anchor::one(src.root_focus, a))?.is_some() {
                    return Ok(FocusReport {
                        focused: false,
                        depth,
                        truncated: en.truncated,
                        counterexample: Some(FocusCounterexample {
                            source: i,
                            target: j,
                            image: tgt.graph.name(a).to_string(),
                        }),
                    });
                }
            }
        }
    }
    Ok(FocusReport { focused: true, depth, truncated: en.truncated, counterexample: None })
}

/// Which program a rewriting targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Target {
    /// Boolean goal: disjunction of cactuses.
    Delta,
    /// Unary answers: `T(r)` or a defocused cactus with focus at `r`.
    Sigma,
}

/// A union of CQs produced by expansion.
#[derive(Clone, Debug)]
pub struct Ucq {
    pub target: Target,
    pub disjuncts: Vec<LabelledGraph>,
    /// Answer node of each disjunct (the root focus).
    pub answer: Vec<NodeId>,
    pub truncated: bool,
}

impl Ucq {
    /// Boolean evaluation: some disjunct maps into `data`.
    pub fn holds(&self, data: &LabelledGraph) -> Result<bool> {
        for d in &self.disjuncts {
            if hom::hom_exists(d, data, &Anchor::none())?.is_some() {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Unary evaluation at `a`: `T(a)` (for Σ) or a disjunct maps with its
    /// answer node sent to `a`.
    pub fn answers(&self, data: &LabelledGraph, a: NodeId) -> Result<bool> {
        if self.target == Target::Sigma && data.has_label(a, "T") {
            return Ok(true);
        }
        for (d, &r) in self.disjuncts.iter().zip(&self.answer) {
            let opts = HomOptions { anchor: Anchor::one(r, a), ..HomOptions::default() };
            if hom::find(d, data, &opts)?.is_some() {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// UCQ rewriting from all cactuses of depth at most `d`.
pub fn ucq_rewriting(q: &OneCq, d: usize, target: Target, cap: usize) -> Result<Ucq> {
    if target == Target::Sigma {
        let rep = check_focused(q, d, cap)?;
        if let Some(cx) = rep.counterexample {
            return Err(Error::Precondition(format!(
                "query is not focused: cactus {} maps into cactus {} with the focus sent to {}",
                cx.source, cx.target, cx.image
            )));
        }
    }
    let en = cactuses_up_to(q, d, cap)?;
    let answer = en.cactuses.iter().map(|c| c.root_focus).collect();
    let disjuncts = en
        .cactuses
        .iter()
        .map(|c| if target == Target::Sigma { c.defocused() } else { c.graph.clone() })
        .collect();
    Ok(Ucq { target, disjuncts, answer, truncated: en.truncated })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(text: &str) -> OneCq {
        OneCq::new(&LabelledGraph::parse(text).unwrap()).unwrap()
    }

    #[test]
    fn chain_counts() {
        let q4 = q("R(y,x) F(x) R(y,z) T(z)");
        let en = cactuses_up_to(&q4, 2, DEFAULT_CAP).unwrap();
        assert_eq!(en.cactuses.len(), 3);
        assert!(!en.truncated);
        let depths: Vec<_> = en.cactuses.iter().map(|c| c.depth()).collect();
        assert_eq!(depths, vec![0, 1, 2]);
    }

    #[test]
    fn bud_names_and_labels() {
        let q4 = Arc::new(q("R(y,x) F(x) R(y,z) T(z)"));
        let c0 = Cactus::from_query(q4);
        let z = c0.graph.id("0_z").unwrap();
        let c1 = c0.bud(z).unwrap();
        assert!(c1.graph.has_label(z, "A"));
        assert!(c1.graph.node("1_y").is_some());
        assert!(c1.graph.has_label(c1.graph.id("1_z").unwrap(), "T"));
        assert!(c1.bud(z).is_err());
        assert_eq!(c1.skeleton.edges(), vec![(0, 1, 1)]);
    }

    #[test]
    fn count_formula() {
        assert_eq!(cactus_count(2, 2), 25);
        assert_eq!(cactus_count(1, 5), 6);
        assert_eq!(cactus_count(0, 9), 1);
    }

    #[test]
    fn defocus_idempotent() {
        let q4 = Arc::new(q("R(y,x) F(x) R(y,z) T(z)"));
        let c = Cactus::from_query(q4);
        let once = c.defocused();
        assert_eq!(defocus(&once, c.root_focus).to_text(), once.to_text());
        assert!(once.nodes_with_label("F").is_empty());
    }
}
