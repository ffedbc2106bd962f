//! Structural analysis of queries: shape flags, ditree order, solitary pairs,
//! symmetry and minimisation.

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{LabelledGraph, NodeId};
use crate::hom;

/// Rooted view of a ditree-shaped graph.
#[derive(Clone, Debug)]
pub struct Ditree {
    pub root: NodeId,
    parent: Vec<Option<NodeId>>,
    depth: Vec<usize>,
    children: Vec<Vec<NodeId>>,
    preorder: Vec<NodeId>,
}

/// Root of `g` if `g` is a ditree: no self-loops, every node has at most one
/// distinct parent, and a unique parentless node reaches everything.
/// Parallel edges with different predicates between the same pair are allowed.
pub fn ditree_root(g: &LabelledGraph) -> Option<NodeId> {
    if g.node_count() == 0 {
        return None;
    }
    let mut root = None;
    for n in g.nodes() {
        let preds = g.predecessors(n);
        if preds.contains(&n) || preds.len() > 1 {
            return None;
        }
        if preds.is_empty() {
            if root.is_some() {
                return None;
            }
            root = Some(n);
        }
    }
    let root = root?;
    let mut seen = vec![false; g.node_count()];
    let mut queue = VecDeque::from([root]);
    seen[root] = true;
    let mut count = 1;
    while let Some(n) = queue.pop_front() {
        for s in g.successors(n) {
            if !seen[s] {
                seen[s] = true;
                count += 1;
                queue.push_back(s);
            }
        }
    }
    (count == g.node_count()).then_some(root)
}

impl Ditree {
    pub fn new(g: &LabelledGraph) -> Result<Ditree> {
        let root = ditree_root(g).ok_or_else(|| Error::NotDitree(describe_failure(g)))?;
        let n = g.node_count();
        let mut parent = vec![None; n];
        let mut depth = vec![0; n];
        let mut children = vec![Vec::new(); n];
        let mut preorder = Vec::with_capacity(n);
        let mut stack = vec![root];
        while let Some(x) = stack.pop() {
            preorder.push(x);
            let mut kids = g.successors(x);
            kids.sort_by(|a, b| g.name(*a).cmp(g.name(*b)));
            for &c in kids.iter().rev() {
                parent[c] = Some(x);
                depth[c] = depth[x] + 1;
                stack.push(c);
            }
            children[x] = kids;
        }
        Ok(Ditree { root, parent, depth, children, preorder })
    }

    pub fn parent(&self, x: NodeId) -> Option<NodeId> {
        self.parent[x]
    }

    pub fn depth(&self, x: NodeId) -> usize {
        self.depth[x]
    }

    pub fn children(&self, x: NodeId) -> &[NodeId] {
        &self.children[x]
    }

    /// Nodes in preorder, children sorted by name.
    pub fn preorder(&self) -> &[NodeId] {
        &self.preorder
    }

    /// `x ≺ y`: x is a proper ancestor of y.
    pub fn precedes(&self, x: NodeId, y: NodeId) -> bool {
        let mut cur = self.parent[y];
        while let Some(c) = cur {
            if c == x {
                return true;
            }
            cur = self.parent[c];
        }
        false
    }

    pub fn comparable(&self, x: NodeId, y: NodeId) -> bool {
        x == y || self.precedes(x, y) || self.precedes(y, x)
    }

    /// Lowest common ancestor.
    pub fn inf(&self, mut x: NodeId, mut y: NodeId) -> NodeId {
        while self.depth[x] > self.depth[y] {
            x = self.parent[x].unwrap();
        }
        while self.depth[y] > self.depth[x] {
            y = self.parent[y].unwrap();
        }
        while x != y {
            x = self.parent[x].unwrap();
            y = self.parent[y].unwrap();
        }
        x
    }

    /// Length of the path between two comparable nodes.
    pub fn delta(&self, x: NodeId, y: NodeId) -> usize {
        self.depth[x].abs_diff(self.depth[y])
    }

    /// Length of the undirected tree path between x and y.
    pub fn partial(&self, x: NodeId, y: NodeId) -> usize {
        let m = self.inf(x, y);
        self.delta(m, x) + self.delta(m, y)
    }

    /// Child of `anc` on the path towards `desc` (requires anc ≺ desc).
    pub fn child_towards(&self, anc: NodeId, desc: NodeId) -> NodeId {
        let mut cur = desc;
        while self.parent[cur] != Some(anc) {
            cur = self.parent[cur].expect("anc must precede desc");
        }
        cur
    }

    /// Nodes strictly between two comparable nodes.
    pub fn strictly_between(&self, x: NodeId, y: NodeId) -> Vec<NodeId> {
        let (top, bottom) = if self.precedes(x, y) { (x, y) } else { (y, x) };
        let mut out = Vec::new();
        let mut cur = self.parent[bottom];
        while let Some(c) = cur {
            if c == top {
                break;
            }
            out.push(c);
            cur = self.parent[c];
        }
        out
    }

    /// All nodes of the subtree rooted at x.
    pub fn subtree(&self, x: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![x];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.children[n].iter().copied());
        }
        out
    }
}

fn describe_failure(g: &LabelledGraph) -> String {
    if g.node_count() == 0 {
        return "empty graph".into();
    }
    for n in g.nodes() {
        let preds = g.predecessors(n);
        if preds.contains(&n) {
            return format!("self-loop on `{}`", g.name(n));
        }
        if preds.len() > 1 {
            return format!("`{}` has {} parents", g.name(n), preds.len());
        }
    }
    "no unique root reaching every node".into()
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct ShapeReport {
    pub is_dag: bool,
    pub is_ditree: bool,
    pub is_path: bool,
    pub root: Option<String>,
    pub solitary_f: Vec<String>,
    pub solitary_t: Vec<String>,
    pub ft_twins: Vec<String>,
    pub is_1cq: bool,
    pub lambda_span: Option<usize>,
}

pub fn solitary_f(g: &LabelledGraph) -> Vec<NodeId> {
    sorted_by_name(g, g.nodes().filter(|&n| g.has_label(n, "F") && !g.has_label(n, "T")).collect())
}

/// Solitary T-nodes sorted by name; position `i` is bud label `i + 1`.
pub fn solitary_t(g: &LabelledGraph) -> Vec<NodeId> {
    sorted_by_name(g, g.nodes().filter(|&n| g.has_label(n, "T") && !g.has_label(n, "F")).collect())
}

pub fn ft_twins(g: &LabelledGraph) -> Vec<NodeId> {
    sorted_by_name(g, g.nodes().filter(|&n| g.has_label(n, "T") && g.has_label(n, "F")).collect())
}

fn sorted_by_name(g: &LabelledGraph, mut v: Vec<NodeId>) -> Vec<NodeId> {
    v.sort_by(|a, b| g.name(*a).cmp(g.name(*b)));
    v
}

pub fn is_dag(g: &LabelledGraph) -> bool {
    let mut indeg: Vec<usize> = g.nodes().map(|n| g.predecessors(n).len()).collect();
    let mut queue: VecDeque<NodeId> = g.nodes().filter(|&n| indeg[n] == 0).collect();
    let mut seen = 0;
    while let Some(n) = queue.pop_front() {
        seen += 1;
        for s in g.successors(n) {
            indeg[s] -= 1;
            if indeg[s] == 0 {
                queue.push_back(s);
            }
        }
    }
    seen == g.node_count()
}

pub fn shape(g: &LabelledGraph) -> ShapeReport {
    let tree = Ditree::new(g).ok();
    let names = |v: Vec<NodeId>| v.into_iter().map(|n| g.name(n).to_string()).collect::<Vec<_>>();
    let sf = solitary_f(g);
    let st = solitary_t(g);
    let is_1cq = sf.len() == 1;
    let lambda_span = match (&tree, is_1cq) {
        (Some(t), true) if st.iter().all(|&y| !t.comparable(y, sf[0])) => Some(st.len()),
        _ => None,
    };
    ShapeReport {
        is_dag: is_dag(g),
        is_ditree: tree.is_some(),
        is_path: tree.as_ref().is_some_and(|t| g.nodes().all(|n| t.children(n).len() <= 1)),
        root: tree.as_ref().map(|t| g.name(t.root).to_string()),
        solitary_f: names(sf),
        solitary_t: names(st),
        ft_twins: names(ft_twins(g)),
        is_1cq,
        lambda_span,
    }
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct SolitaryPair {
    pub t: String,
    pub f: String,
    pub comparable: bool,
    pub distance: usize,
    pub symmetric: bool,
}

/// All pairs of a solitary T and a solitary F node, sorted by (t, f).
pub fn solitary_pairs(g: &LabelledGraph) -> Result<Vec<SolitaryPair>> {
    let tree = Ditree::new(g)?;
    let mut out = Vec::new();
    for &t in &solitary_t(g) {
        for &f in &solitary_f(g) {
            let comparable = tree.comparable(t, f);
            out.push(SolitaryPair {
                t: g.name(t).into(),
                f: g.name(f).into(),
                comparable,
                distance: tree.partial(t, f),
                symmetric: !comparable && is_symmetric(g, &tree, t, f),
            });
        }
    }
    Ok(out)
}

/// Symmetry of an incomparable pair: with m = inf(t, f), strip T from t and F
/// from f, cut everything below them, and ask for an isomorphism between the
/// branch of m containing t and the branch containing f that sends t to f.
/// Edge predicates on the two edges leaving m must agree as well.
pub fn is_symmetric(g: &LabelledGraph, tree: &Ditree, t: NodeId, f: NodeId) -> bool {
    let m = tree.inf(t, f);
    let ct = tree.child_towards(m, t);
    let cf = tree.child_towards(m, f);
    if g.edge_preds(m, ct) != g.edge_preds(m, cf) {
        return false;
    }
    let code_t = canonical_code(g, tree, ct, t, "T");
    let code_f = canonical_code(g, tree, cf, f, "F");
    code_t == code_f
}

/// AHU-style code of the subtree at `x`, pruned below `mark`, with `strip`
/// removed from the mark's labels and the mark itself tagged.
fn canonical_code(g: &LabelledGraph, tree: &Ditree, x: NodeId, mark: NodeId, strip: &str) -> String {
    let mut labels: Vec<&String> = g.labels(x).iter().filter(|l| !(x == mark && l.as_str() == strip)).collect();
    labels.sort();
    let mut s = String::from("(");
    if x == mark {
        s.push('*');
    }
    s.push_str(&labels.iter().map(|l| l.as_str()).collect::<Vec<_>>().join(","));
    if x != mark {
        let mut kids: Vec<String> = tree
            .children(x)
            .iter()
            .map(|&c| {
                let preds: Vec<String> = g.edge_preds(x, c).into_iter().collect();
                format!("{}:{}", preds.join(","), canonical_code(g, tree, c, mark, strip))
            })
            .collect();
        kids.sort();
        for k in kids {
            s.push_str(&k);
        }
    }
    s.push(')');
    s
}

/// No comparable solitary pair, and every pair of minimal distance is symmetric.
/// Vacuously true when there are no pairs.
pub fn is_quasi_symmetric(g: &LabelledGraph) -> Result<bool> {
    let pairs = solitary_pairs(g)?;
    if pairs.iter().any(|p| p.comparable) {
        return Ok(false);
    }
    let Some(min) = pairs.iter().map(|p| p.distance).min() else {
        return Ok(true);
    };
    Ok(pairs.iter().filter(|p| p.distance == min).all(|p| p.symmetric))
}

/// Core of a ditree CQ. A graph is minimal iff no endomorphism misses a node,
/// so we repeatedly look for a node `w` with `g -> g - w` and replace `g` by
/// the image of that homomorphism.
pub fn core_ditree(g: &LabelledGraph) -> Result<(LabelledGraph, bool)> {
    Ditree::new(g)?;
    let mut cur = g.clone();
    let mut minimal = true;
    'outer: loop {
        for w in cur.nodes() {
            let smaller = cur.without_node(w);
            if let Some(h) = hom::hom_exists(&cur, &smaller, &hom::Anchor::none())? {
                let into_cur: Vec<NodeId> = h.iter().map(|&n| cur.id(smaller.name(n)).unwrap()).collect();
                cur = cur.endo_image(&into_cur);
                minimal = false;
                continue 'outer;
            }
        }
        break;
    }
    Ok((cur, minimal))
}
