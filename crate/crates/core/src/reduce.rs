//! Data instances encoding reachability, built from a query.
//!
//! Each constructor turns a graph with two designated vertices into data on
//! which the certain answer to `(Δq, G)` is "yes" exactly when the second
//! vertex is reachable from the first.

use std::collections::{BTreeSet, VecDeque};

use rand::Rng;
use serde::Serialize;

use crate::cq::OneCq;
use crate::error::{Error, Result};
use crate::graph::LabelledGraph;
use crate::lambda::{check_h_conditions, type_segment, Gluer, PeriodicStructure, TypeGraph};
use crate::tree::{ft_twins, is_quasi_symmetric, solitary_f, solitary_pairs, solitary_t, Ditree, SolitaryPair};

/// A graph with vertices named by strings and designated vertices `s`, `t`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GraphInstance {
    pub vertices: Vec<String>,
    pub edges: Vec<(usize, usize)>,
    pub directed: bool,
    pub s: usize,
    pub t: usize,
}

impl GraphInstance {
    /// Vertices `g0..g{n-1}`.
    pub fn new(n: usize, edges: Vec<(usize, usize)>, directed: bool, s: usize, t: usize) -> Result<GraphInstance> {
        let g = GraphInstance { vertices: (0..n).map(|i| format!("g{i}")).collect(), edges, directed, s, t };
        g.check()?;
        Ok(g)
    }

    fn check(&self) -> Result<()> {
        let n = self.vertices.len();
        if self.s >= n || self.t >= n || self.edges.iter().any(|&(u, v)| u >= n || v >= n) {
            return Err(Error::Invalid("graph references a missing vertex".into()));
        }
        Ok(())
    }

    /// Reads a graph from atoms: every binary atom is an edge, `s(x)` and
    /// `t(x)` mark the endpoints.
    pub fn from_atoms(g: &LabelledGraph, directed: bool) -> Result<GraphInstance> {
        let pick = |l: &str| -> Result<usize> {
            match g.nodes_with_label(l).as_slice() {
                [v] => Ok(*v),
                _ => Err(Error::Invalid(format!("graph needs exactly one vertex labelled `{l}`"))),
            }
        };
        let edges = g.edges().iter().map(|e| (e.src, e.dst)).collect();
        let gi = GraphInstance { vertices: g.names().to_vec(), edges, directed, s: pick("s")?, t: pick("t")? };
        gi.check()?;
        Ok(gi)
    }

    /// Edges in both directions when undirected.
    pub fn arcs(&self) -> Vec<(usize, usize)> {
        let mut out: BTreeSet<(usize, usize)> = self.edges.iter().copied().collect();
        if !self.directed {
            out.extend(self.edges.iter().map(|&(u, v)| (v, u)));
        }
        out.into_iter().collect()
    }

    /// Is `t` reachable from `s`?
    pub fn reachable(&self) -> bool {
        let n = self.vertices.len();
        let mut adj = vec![Vec::new(); n];
        for (u, v) in self.arcs() {
            adj[u].push(v);
        }
        let mut seen = vec![false; n];
        seen[self.s] = true;
        let mut queue = VecDeque::from([self.s]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen[self.t]
    }
}

/// Random dag on `n` vertices (edges only go from lower to higher index)
/// with at most `max_edges` edges and `s != t`.
pub fn random_dag(rng: &mut impl Rng, n: usize, max_edges: usize) -> GraphInstance {
    let mut edges = BTreeSet::new();
    let m = rng.gen_range(0..=max_edges);
    for _ in 0..m {
        let u = rng.gen_range(0..n - 1);
        let v = rng.gen_range(u + 1..n);
        edges.insert((u, v));
    }
    let s = rng.gen_range(0..n - 1);
    let t = rng.gen_range(s + 1..n);
    GraphInstance::new(n, edges.into_iter().collect(), true, s, t).expect("valid by construction")
}

/// Random undirected graph on `n` vertices, each edge kept with probability
/// `p`, and `s != t`.
pub fn random_undirected(rng: &mut impl Rng, n: usize, p: f64) -> GraphInstance {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    let s = rng.gen_range(0..n);
    let t = (s + rng.gen_range(1..n)) % n;
    GraphInstance::new(n, edges, false, s, t).expect("valid by construction")
}

/// Which rule makes `pair` usable for the dag reduction, if any: a
/// comparable pair with no solitary node strictly between its ends, or a
/// non-symmetric incomparable pair of least distance in a twin-free query
/// that is not quasi-symmetric.
pub fn pair_rule(q: &LabelledGraph, pair: &SolitaryPair) -> Result<Option<&'static str>> {
    let tree = Ditree::new(q)?;
    let (t, f) = (q.id(&pair.t)?, q.id(&pair.f)?);
    if !solitary_t(q).contains(&t) || !solitary_f(q).contains(&f) {
        return Ok(None);
    }
    if tree.comparable(t, f) {
        let solitary: BTreeSet<_> = solitary_f(q).into_iter().chain(solitary_t(q)).collect();
        let clear = tree.strictly_between(t, f).iter().all(|v| !solitary.contains(v));
        return Ok(clear.then_some("comparable-pair"));
    }
    let pairs = solitary_pairs(q)?;
    let least = pairs.iter().map(|p| p.distance).min().unwrap_or(0);
    let ok = ft_twins(q).is_empty()
        && pairs.iter().all(|p| !p.comparable)
        && !is_quasi_symmetric(q)?
        && tree.partial(t, f) == least
        && !crate::tree::is_symmetric(q, &tree, t, f);
    Ok(ok.then_some("non-quasi-symmetric-twin-free"))
}

/// One copy of `q` per arc `(u, v)`, with `t` renamed to `u` and `f` to `v`
/// and both relabelled `A`, plus `T(s)` and `F(t)`.
fn glue_copies(q: &LabelledGraph, t: usize, f: usize, g: &GraphInstance) -> LabelledGraph {
    let mut d = LabelledGraph::new();
    let vs: Vec<usize> = g.vertices.iter().map(|v| d.add_node(v)).collect();
    for (i, (u, v)) in g.arcs().into_iter().enumerate() {
        let mut ids = Vec::with_capacity(q.node_count());
        for x in q.nodes() {
            let id = if x == t {
                vs[u]
            } else if x == f {
                vs[v]
            } else {
                d.add_node(&format!("e{i}_{}", q.name(x)))
            };
            for l in q.labels(x) {
                let skip = (x == t && l == "T") || (x == f && l == "F");
                if !skip {
                    d.add_label(id, l);
                }
            }
            ids.push(id);
        }
        d.add_label(vs[u], "A");
        d.add_label(vs[v], "A");
        for e in q.edges() {
            d.add_edge(ids[e.src], ids[e.dst], &e.pred);
        }
    }
    d.add_label(vs[g.s], "T");
    d.add_label(vs[g.t], "F");
    d
}

/// Reduction from dag reachability through an eligible solitary pair.
pub fn dag_reduction(q: &LabelledGraph, pair: &SolitaryPair, g: &GraphInstance) -> Result<LabelledGraph> {
    if pair_rule(q, pair)?.is_none() {
        return Err(Error::Precondition(format!("pair ({}, {}) is not eligible", pair.t, pair.f)));
    }
    if !g.directed {
        return Err(Error::Precondition("dag reduction needs a directed graph".into()));
    }
    Ok(glue_copies(q, q.id(&pair.t)?, q.id(&pair.f)?, g))
}

/// Reduction from undirected reachability for a quasi-symmetric query with
/// one solitary F and one solitary T; every edge is used in both directions.
pub fn undirected_reduction(q: &LabelledGraph, g: &GraphInstance) -> Result<LabelledGraph> {
    let (fs, ts) = (solitary_f(q), solitary_t(q));
    if fs.len() != 1 || ts.len() != 1 || !is_quasi_symmetric(q)? {
        return Err(Error::Precondition("needs a quasi-symmetric query with one solitary F and one solitary T".into()));
    }
    let mut g = g.clone();
    g.directed = false;
    Ok(glue_copies(q, ts[0], fs[0], &g))
}

/// Reduction from undirected reachability through a periodic structure for
/// which none of the four conditions holds: one copy of the blow-up of `P`
/// per vertex, edges of that blow-up repeated across every graph edge in both
/// directions, the blow-up of `B` attached to the copy at `s` and the
/// acyclic parts attached to the copy at `t`.
pub fn blowup_reduction(q: &OneCq, tg: &TypeGraph, ps: &PeriodicStructure, g: &GraphInstance) -> Result<LabelledGraph> {
    ps.validate(tg)?;
    let c = check_h_conditions(q, tg, ps)?;
    if c.h1 || c.h2 || c.h3 || c.h4 {
        return Err(Error::Precondition(format!("periodic structure satisfies a condition: {c:?}")));
    }
    let seg = |n: usize| type_segment(q, tg.types[ps.h.types[n]]);
    let n = ps.h.len();
    let in_p: Vec<bool> = (0..n).map(|m| ps.p.contains(&m)).collect();
    let mut gl = Gluer::new();

    // copies[w][m]: segment m (a node of P) in the copy for vertex w
    let mut copies: Vec<Vec<Option<Vec<usize>>>> = Vec::new();
    for (w, name) in g.vertices.iter().enumerate() {
        let row = (0..n).map(|m| in_p[m].then(|| gl.add(&seg(m), &format!("{name}_s{m}_")))).collect();
        copies.push(row);
        for &m in &ps.p {
            for (&j, &m2) in &ps.h.succ[m] {
                let (a, b) = (copies[w][m].as_ref().unwrap()[q.ys[j - 1]], copies[w][m2].as_ref().unwrap()[q.x]);
                gl.union(a, b);
            }
        }
    }
    let seg_edges: Vec<Vec<(usize, usize, String)>> = (0..n)
        .map(|m| seg(m).edges().iter().map(|e| (e.src, e.dst, e.pred.clone())).collect())
        .collect();
    for &(u, v) in &g.edges {
        for &m in &ps.p {
            for (a, b, pred) in &seg_edges[m] {
                let cu = copies[u][m].as_ref().unwrap();
                let cv = copies[v][m].as_ref().unwrap();
                gl.add_edge(cu[*a], cv[*b], pred);
                gl.add_edge(cv[*a], cu[*b], pred);
            }
        }
    }
    // gluing is the same in every copy, so raw cross edges land on the
    // images of the blow-up's edges
    let b_segs: Vec<Option<Vec<usize>>> = (0..n).map(|m| (!in_p[m]).then(|| gl.add(&seg(m), &format!("b_s{m}_")))).collect();
    for &m in &ps.b {
        for (&j, &m2) in &ps.h.succ[m] {
            let y = b_segs[m].as_ref().unwrap()[q.ys[j - 1]];
            let x = if in_p[m2] { copies[g.s][m2].as_ref().unwrap()[q.x] } else { b_segs[m2].as_ref().unwrap()[q.x] };
            gl.union(y, x);
        }
    }
    for (i, (&v, ev)) in ps.r.iter().zip(&ps.e).enumerate() {
        let segs: Vec<Vec<usize>> = (0..ev.len())
            .map(|m| {
                if m == 0 {
                    copies[g.t][v].clone().unwrap()
                } else {
                    gl.add(&type_segment(q, tg.types[ev.types[m]]), &format!("e{i}_s{m}_"))
                }
            })
            .collect();
        for m in 0..ev.len() {
            for (&j, &m2) in &ev.succ[m] {
                gl.union(segs[m][q.ys[j - 1]], segs[m2][q.x]);
            }
        }
    }
    let (d, _) = gl.finish();
    Ok(d)
}
