//! Homomorphisms between labelled graphs.
//!
//! Two engines: a bottom-up candidate-set program for ditree sources, and
//! backtracking with arc consistency and forward checking for everything else.
//! Variable choice is dynamic (smallest domain first), ties broken by degree
//! and then by node name so that runs are reproducible.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::graph::{LabelledGraph, NodeId};
use crate::tree::{ditree_root, Ditree};

/// Default number of candidate extensions tried before giving up.
pub const DEFAULT_BUDGET: u64 = 1_000_000;

/// Partial map from source nodes to required target nodes.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Anchor {
    pub pairs: Vec<(NodeId, NodeId)>,
}

impl Anchor {
    pub fn none() -> Self {
        Anchor::default()
    }

    pub fn one(src: NodeId, tgt: NodeId) -> Self {
        Anchor { pairs: vec![(src, tgt)] }
    }
}

#[derive(Clone, Debug)]
pub struct HomOptions {
    pub anchor: Anchor,
    pub budget: u64,
    pub injective: bool,
    /// Skip the ditree program even for tree-shaped sources.
    pub force_backtracking: bool,
}

impl Default for HomOptions {
    fn default() -> Self {
        HomOptions { anchor: Anchor::none(), budget: DEFAULT_BUDGET, injective: false, force_backtracking: false }
    }
}

/// A homomorphism as the list of images of the source nodes.
pub type Hom = Vec<NodeId>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HomOutcome {
    Found(Hom),
    NotFound,
    BudgetExceeded,
}

/// Existence of a homomorphism respecting `anchor`, with the default budget.
pub fn hom_exists(src: &LabelledGraph, tgt: &LabelledGraph, anchor: &Anchor) -> Result<Option<Hom>> {
    find(src, tgt, &HomOptions { anchor: anchor.clone(), ..Default::default() })
}

pub fn find(src: &LabelledGraph, tgt: &LabelledGraph, opts: &HomOptions) -> Result<Option<Hom>> {
    match search(src, tgt, opts) {
        HomOutcome::Found(h) => Ok(Some(h)),
        HomOutcome::NotFound => Ok(None),
        HomOutcome::BudgetExceeded => Err(Error::CapExceeded(format!(
            "homomorphism search exceeded {} extensions ({} source nodes, {} target nodes)",
            opts.budget,
            src.node_count(),
            tgt.node_count()
        ))),
    }
}

pub fn search(src: &LabelledGraph, tgt: &LabelledGraph, opts: &HomOptions) -> HomOutcome {
    if src.node_count() == 0 {
        return HomOutcome::Found(Vec::new());
    }
    if !opts.injective && !opts.force_backtracking {
        if let Some(root) = ditree_root(src) {
            return match ditree_search(src, tgt, &opts.anchor, root) {
                Some(h) => HomOutcome::Found(h),
                None => HomOutcome::NotFound,
            };
        }
    }
    Backtracker::new(src, tgt, opts).run()
}

/// Polynomial homomorphism test for ditree sources.
pub fn ditree_hom(src: &LabelledGraph, tgt: &LabelledGraph, anchor: &Anchor) -> Result<Option<Hom>> {
    let root = ditree_root(src).ok_or_else(|| Error::NotDitree("source of ditree_hom".into()))?;
    Ok(ditree_search(src, tgt, anchor, root))
}

/// Checks that `h` is a homomorphism from `src` to `tgt`.
pub fn verify(src: &LabelledGraph, tgt: &LabelledGraph, h: &[NodeId]) -> bool {
    if h.len() != src.node_count() || h.iter().any(|&t| t >= tgt.node_count()) {
        return false;
    }
    src.nodes().all(|n| src.labels(n).iter().all(|l| tgt.has_label(h[n], l)))
        && src.edges().iter().all(|e| tgt.has_edge(h[e.src], h[e.dst], &e.pred))
}

/// Calls `visit` on every homomorphism until it returns false. Budgeted.
pub fn for_each(src: &LabelledGraph, tgt: &LabelledGraph, opts: &HomOptions, visit: &mut dyn FnMut(&[NodeId]) -> bool) -> Result<()> {
    let mut bt = Backtracker::new(src, tgt, opts);
    bt.visitor = Some(visit);
    match bt.run() {
        HomOutcome::BudgetExceeded => Err(Error::CapExceeded("homomorphism enumeration budget".into())),
        _ => Ok(()),
    }
}

/// Compact indexing of both graphs shared by the two engines.
struct Index {
    t_labels: Vec<Vec<u32>>,
    s_labels: Vec<Vec<u32>>,
    t_out: Vec<Vec<(u32, u32)>>,
    t_in: Vec<Vec<(u32, u32)>>,
    t_edges: HashSet<(u32, u32, u32)>,
    /// Source edges as (src, dst, pred) with interned predicates; `None`
    /// predicate means the source uses a predicate absent from the target.
    s_edges: Vec<(usize, usize, Option<u32>)>,
    missing_label: bool,
}

impl Index {
    fn new(src: &LabelledGraph, tgt: &LabelledGraph) -> Index {
        let mut labels: HashMap<&str, u32> = HashMap::new();
        let mut preds: HashMap<&str, u32> = HashMap::new();
        let t_labels: Vec<Vec<u32>> = tgt
            .nodes()
            .map(|n| {
                let mut v: Vec<u32> = tgt
                    .labels(n)
                    .iter()
                    .map(|l| {
                        let k = labels.len() as u32;
                        *labels.entry(l.as_str()).or_insert(k)
                    })
                    .collect();
                v.sort_unstable();
                v
            })
            .collect();
        let mut t_out = vec![Vec::new(); tgt.node_count()];
        let mut t_in = vec![Vec::new(); tgt.node_count()];
        let mut t_edges = HashSet::new();
        for e in tgt.edges() {
            let k = preds.len() as u32;
            let p = *preds.entry(e.pred.as_str()).or_insert(k);
            t_out[e.src].push((p, e.dst as u32));
            t_in[e.dst].push((p, e.src as u32));
            t_edges.insert((e.src as u32, e.dst as u32, p));
        }
        let mut missing_label = false;
        let s_labels = src
            .nodes()
            .map(|n| {
                src.labels(n)
                    .iter()
                    .filter_map(|l| {
                        let id = labels.get(l.as_str()).copied();
                        if id.is_none() {
                            missing_label = true;
                        }
                        id
                    })
                    .collect()
            })
            .collect();
        let s_edges = src.edges().iter().map(|e| (e.src, e.dst, preds.get(e.pred.as_str()).copied())).collect();
        Index { t_labels, s_labels, t_out, t_in, t_edges, s_edges, missing_label }
    }

    fn labels_ok(&self, s: usize, t: usize) -> bool {
        self.s_labels[s].iter().all(|l| self.t_labels[t].binary_search(l).is_ok())
    }

    /// Initial domains from labels, anchors, self-loops and edge predicates.
    fn domains(&self, src: &LabelledGraph, anchor: &Anchor) -> Option<Vec<Vec<u32>>> {
        if self.missing_label || self.s_edges.iter().any(|e| e.2.is_none()) {
            return None;
        }
        let n_t = self.t_labels.len();
        let mut out_preds: Vec<Vec<u32>> = vec![Vec::new(); src.node_count()];
        let mut in_preds: Vec<Vec<u32>> = vec![Vec::new(); src.node_count()];
        let mut loops: Vec<Vec<u32>> = vec![Vec::new(); src.node_count()];
        for &(s, d, p) in &self.s_edges {
            let p = p.unwrap();
            if s == d {
                loops[s].push(p);
            }
            out_preds[s].push(p);
            in_preds[d].push(p);
        }
        let mut doms = Vec::with_capacity(src.node_count());
        for s in src.nodes() {
            let pinned: Vec<NodeId> = anchor.pairs.iter().filter(|p| p.0 == s).map(|p| p.1).collect();
            let candidates: Vec<usize> = if pinned.is_empty() { (0..n_t).collect() } else { pinned };
            let dom: Vec<u32> = candidates
                .into_iter()
                .filter(|&t| t < n_t)
                .filter(|&t| self.labels_ok(s, t))
                .filter(|&t| out_preds[s].iter().all(|p| self.t_out[t].iter().any(|e| e.0 == *p)))
                .filter(|&t| in_preds[s].iter().all(|p| self.t_in[t].iter().any(|e| e.0 == *p)))
                .filter(|&t| loops[s].iter().all(|p| self.t_edges.contains(&(t as u32, t as u32, *p))))
                .map(|t| t as u32)
                .collect();
            if dom.is_empty() {
                return None;
            }
            doms.push(dom);
        }
        Some(doms)
    }
}

fn ditree_search(src: &LabelledGraph, tgt: &LabelledGraph, anchor: &Anchor, root: NodeId) -> Option<Hom> {
    let idx = Index::new(src, tgt);
    let doms = idx.domains(src, anchor)?;
    let tree = Ditree::new(src).ok()?;
    debug_assert_eq!(tree.root, root);
    // Edge predicates from each node to each child.
    let child_preds = |x: NodeId, c: NodeId| -> Vec<u32> {
        idx.s_edges.iter().filter(|e| e.0 == x && e.1 == c).map(|e| e.2.unwrap()).collect()
    };
    let mut cand: Vec<Vec<bool>> = vec![Vec::new(); src.node_count()];
    let n_t = tgt.node_count();
    for &x in tree.preorder().iter().rev() {
        let mut ok = vec![false; n_t];
        for &a in &doms[x] {
            ok[a as usize] = true;
        }
        for &c in tree.children(x) {
            let preds = child_preds(x, c);
            for a in 0..n_t {
                if ok[a] && !supported(&idx, a as u32, &preds, &cand[c]) {
                    ok[a] = false;
                }
            }
        }
        if !ok.iter().any(|&b| b) {
            return None;
        }
        cand[x] = ok;
    }
    let mut h = vec![usize::MAX; src.node_count()];
    h[root] = cand[root].iter().position(|&b| b)?;
    for &x in tree.preorder() {
        for &c in tree.children(x) {
            let preds = child_preds(x, c);
            let a = h[x] as u32;
            let b = idx.t_out[a as usize]
                .iter()
                .map(|e| e.1)
                .find(|&b| cand[c][b as usize] && preds.iter().all(|p| idx.t_edges.contains(&(a, b, *p))))?;
            h[c] = b as usize;
        }
    }
    Some(h)
}

fn supported(idx: &Index, a: u32, preds: &[u32], cand_child: &[bool]) -> bool {
    idx.t_out[a as usize]
        .iter()
        .filter(|e| e.0 == preds[0])
        .any(|&(_, b)| cand_child[b as usize] && preds.iter().all(|p| idx.t_edges.contains(&(a, b, *p))))
}

/// Constraint from one source node to a neighbour.
#[derive(Clone, Copy)]
struct Arc {
    other: usize,
    pred: u32,
    /// true: edge goes self -> other.
    forward: bool,
}

struct Backtracker<'a> {
    idx: Index,
    doms: Option<Vec<Vec<u32>>>,
    arcs: Vec<Vec<Arc>>,
    rank: Vec<usize>,
    assigned: Vec<Option<u32>>,
    used: Vec<bool>,
    injective: bool,
    budget: u64,
    steps: u64,
    visitor: Option<&'a mut dyn FnMut(&[NodeId]) -> bool>,
}

impl<'a> Backtracker<'a> {
    fn new(src: &LabelledGraph, tgt: &LabelledGraph, opts: &HomOptions) -> Backtracker<'a> {
        let idx = Index::new(src, tgt);
        let doms = idx.domains(src, &opts.anchor);
        let mut arcs = vec![Vec::new(); src.node_count()];
        for &(s, d, p) in &idx.s_edges {
            if s == d {
                continue;
            }
            if let Some(p) = p {
                arcs[s].push(Arc { other: d, pred: p, forward: true });
                arcs[d].push(Arc { other: s, pred: p, forward: false });
            }
        }
        let mut order: Vec<NodeId> = src.nodes().collect();
        order.sort_by(|&a, &b| src.degree(b).cmp(&src.degree(a)).then_with(|| src.name(a).cmp(src.name(b))));
        let mut rank = vec![0; src.node_count()];
        for (i, &n) in order.iter().enumerate() {
            rank[n] = i;
        }
        let injective = opts.injective;
        if injective && src.node_count() > tgt.node_count() {
            return Backtracker {
                idx,
                doms: None,
                arcs,
                rank,
                assigned: vec![],
                used: vec![],
                injective,
                budget: opts.budget,
                steps: 0,
                visitor: None,
            };
        }
        Backtracker {
            idx,
            doms,
            arcs,
            rank,
            assigned: vec![None; src.node_count()],
            used: vec![false; tgt.node_count()],
            injective,
            budget: opts.budget,
            steps: 0,
            visitor: None,
        }
    }

    fn consistent(&self, a: u32, arc: &Arc, b: u32) -> bool {
        if arc.forward {
            self.idx.t_edges.contains(&(a, b, arc.pred))
        } else {
            self.idx.t_edges.contains(&(b, a, arc.pred))
        }
    }

    /// Arc consistency to a fixpoint; false if some domain empties.
    fn propagate_all(&self, doms: &mut [Vec<u32>]) -> bool {
        let mut changed = true;
        while changed {
            changed = false;
            for x in 0..doms.len() {
                for arc in &self.arcs[x] {
                    let before = doms[x].len();
                    let other: HashSet<u32> = doms[arc.other].iter().copied().collect();
                    let keep: Vec<u32> = doms[x]
                        .iter()
                        .copied()
                        .filter(|&a| self.support(a, arc, &other))
                        .collect();
                    if keep.is_empty() {
                        return false;
                    }
                    if keep.len() != before {
                        doms[x] = keep;
                        changed = true;
                    }
                }
            }
        }
        true
    }

    fn support(&self, a: u32, arc: &Arc, other: &HashSet<u32>) -> bool {
        let list = if arc.forward { &self.idx.t_out[a as usize] } else { &self.idx.t_in[a as usize] };
        list.iter().any(|&(p, b)| p == arc.pred && other.contains(&b))
    }

    fn run(mut self) -> HomOutcome {
        let Some(mut doms) = self.doms.take() else {
            return HomOutcome::NotFound;
        };
        if !self.propagate_all(&mut doms) {
            return HomOutcome::NotFound;
        }
        match self.extend(&mut doms) {
            Step::Found(h) => HomOutcome::Found(h),
            Step::Budget => HomOutcome::BudgetExceeded,
            Step::Fail => HomOutcome::NotFound,
        }
    }

    fn pick(&self, doms: &[Vec<u32>]) -> Option<usize> {
        (0..doms.len())
            .filter(|&x| self.assigned[x].is_none())
            .min_by(|&a, &b| doms[a].len().cmp(&doms[b].len()).then(self.rank[a].cmp(&self.rank[b])))
    }

    fn extend(&mut self, doms: &mut Vec<Vec<u32>>) -> Step {
        let Some(x) = self.pick(doms) else {
            let h: Hom = self.assigned.iter().map(|a| a.unwrap() as usize).collect();
            if let Some(v) = self.visitor.as_mut() {
                // Keep enumerating unless the visitor asks to stop.
                return if v(&h) { Step::Fail } else { Step::Found(h) };
            }
            return Step::Found(h);
        };
        let candidates = doms[x].clone();
        for a in candidates {
            self.steps += 1;
            if self.steps > self.budget {
                return Step::Budget;
            }
            if self.injective && self.used[a as usize] {
                continue;
            }
            self.assigned[x] = Some(a);
            if self.injective {
                self.used[a as usize] = true;
            }
            let mut saved: Vec<(usize, Vec<u32>)> = Vec::new();
            let mut ok = true;
            for arc in self.arcs[x].clone() {
                let y = arc.other;
                if self.assigned[y].is_some() {
                    if !self.consistent(a, &arc, self.assigned[y].unwrap()) {
                        ok = false;
                        break;
                    }
                    continue;
                }
                let keep: Vec<u32> = doms[y].iter().copied().filter(|&b| self.consistent(a, &arc, b)).collect();
                if keep.len() != doms[y].len() {
                    saved.push((y, std::mem::replace(&mut doms[y], keep)));
                }
                if doms[y].is_empty() {
                    ok = false;
                    break;
                }
            }
            if ok {
                match self.extend(doms) {
                    Step::Fail => {}
                    other => return other,
                }
            }
            for (y, old) in saved.into_iter().rev() {
                doms[y] = old;
            }
            if self.injective {
                self.used[a as usize] = false;
            }
            self.assigned[x] = None;
        }
        Step::Fail
    }
}

enum Step {
    Found(Hom),
    Fail,
    Budget,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(s: &str) -> LabelledGraph {
        LabelledGraph::parse(s).unwrap()
    }

    #[test]
    fn identity_exists() {
        let q = g("R(a,b). S(b,c). T(c). F(a). R(c,a).");
        let h = hom_exists(&q, &q, &Anchor::none()).unwrap().unwrap();
        assert!(verify(&q, &q, &h));
    }

    #[test]
    fn q4_into_single_edge_fails() {
        let q = g("R(y,x). F(x). R(y,z). T(z).");
        let d = g("R(a,b). F(b). T(b).");
        assert!(hom_exists(&q, &d, &Anchor::none()).unwrap().is_some());
        let d2 = g("R(a,b). F(b).");
        assert!(hom_exists(&q, &d2, &Anchor::none()).unwrap().is_none());
    }

    #[test]
    fn path_into_longer_path() {
        let p = g("R(a,b). T(a). F(b).");
        let d = g("R(x,y). R(y,z). T(y). T(x). F(z).");
        assert!(ditree_hom(&p, &d, &Anchor::none()).unwrap().is_some());
        let single = g("F(u). T(u).");
        assert!(ditree_hom(&g("R(a,b). F(a). T(b)."), &single, &Anchor::none()).unwrap().is_none());
    }

    #[test]
    fn anchors_are_respected() {
        let p = g("R(a,b).");
        let d = g("R(x,y). R(y,z).");
        let a = p.id("a").unwrap();
        let y = d.id("y").unwrap();
        let h = hom_exists(&p, &d, &Anchor::one(a, y)).unwrap().unwrap();
        assert_eq!(d.name(h[p.id("b").unwrap()]), "z");
        let z = d.id("z").unwrap();
        assert!(hom_exists(&p, &d, &Anchor::one(a, z)).unwrap().is_none());
    }

    #[test]
    fn enumeration_counts_maps() {
        let p = g("R(a,b).");
        let d = g("R(x,y). R(y,z). R(x,z).");
        let mut count = 0;
        for_each(&p, &d, &HomOptions { force_backtracking: true, ..Default::default() }, &mut |_| {
            count += 1;
            true
        })
        .unwrap();
        assert_eq!(count, 3);
    }

    #[test]
    fn injective_search() {
        let p = g("R(a,b). R(a,c).");
        let d = g("R(x,y).");
        let opts = HomOptions { injective: true, ..Default::default() };
        assert!(find(&p, &d, &opts).unwrap().is_none());
        assert!(find(&p, &d, &HomOptions::default()).unwrap().is_some());
    }
}
