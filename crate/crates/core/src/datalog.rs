//! Monadic datalog over labelled graphs.
//!
//! Programs have unary IDB predicates and an optional nullary goal. EDB atoms
//! are node labels and edges of the data graph. Evaluation is semi-naive; a
//! naive evaluator is kept as a reference. Certain answers of the disjunctive
//! program `T(x) ∨ F(x) ← A(x)`, `G ← q` are computed by brute force over all
//! labellings of the A-nodes.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;

use crate::cq::OneCq;
use crate::error::{Error, Result};
use crate::graph::{LabelledGraph, NodeId};
use crate::hom::{self, Anchor};

/// Default bound on the number of A-nodes for brute-force certain answers.
pub const DEFAULT_MAX_A_NODES: usize = 22;

/// An atom `pred(args)` over variables; arity 0, 1 or 2.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Atom {
    pub pred: String,
    pub args: Vec<String>,
}

impl Atom {
    pub fn new(pred: &str, args: &[&str]) -> Atom {
        Atom { pred: pred.to_string(), args: args.iter().map(|s| s.to_string()).collect() }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.args.is_empty() {
            write!(f, "{}", self.pred)
        } else {
            write!(f, "{}({})", self.pred, self.args.join(","))
        }
    }
}

/// `head ← body`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Rule {
    pub head: Atom,
    pub body: Vec<Atom>,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body: Vec<String> = self.body.iter().map(|a| a.to_string()).collect();
        write!(f, "{} <- {}", self.head, body.join(", "))
    }
}

/// A monadic datalog program with a designated goal predicate.
#[derive(Clone, Debug, Serialize)]
pub struct DatalogProgram {
    pub rules: Vec<Rule>,
    pub idb: BTreeSet<String>,
    pub goal: String,
}

impl DatalogProgram {
    /// Builds a program; the IDB predicates are the rule heads.
    pub fn new(rules: Vec<Rule>, goal: &str) -> Result<DatalogProgram> {
        let idb: BTreeSet<String> = rules.iter().map(|r| r.head.pred.clone()).collect();
        for r in &rules {
            if r.head.args.len() > 1 {
                return Err(Error::Arity { pred: r.head.pred.clone(), expected: 1, found: r.head.args.len() });
            }
            for v in &r.head.args {
                if !r.body.iter().any(|a| a.args.contains(v)) {
                    return Err(Error::Invalid(format!("head variable {v} not in body of {r}")));
                }
            }
            for a in &r.body {
                if a.args.len() > 2 || (a.args.is_empty() && !idb.contains(&a.pred)) {
                    return Err(Error::Arity { pred: a.pred.clone(), expected: 2, found: a.args.len() });
                }
            }
        }
        Ok(DatalogProgram { rules, idb, goal: goal.to_string() })
    }

    pub fn is_recursive(&self) -> bool {
        self.rules.iter().any(|r| r.body.iter().any(|a| self.idb.contains(&a.pred)))
    }

    /// Every rule body has at most one IDB atom.
    pub fn is_linear(&self) -> bool {
        self.rules.iter().all(|r| r.body.iter().filter(|a| self.idb.contains(&a.pred)).count() <= 1)
    }
}

impl fmt::Display for DatalogProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

/// Derived IDB facts.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Closure {
    /// Unary IDB facts, by predicate.
    pub unary: BTreeMap<String, BTreeSet<NodeId>>,
    /// Derived nullary predicates.
    pub nullary: BTreeSet<String>,
    /// Number of rounds until the fixpoint.
    pub rounds: usize,
}

impl Closure {
    pub fn holds(&self, pred: &str, node: NodeId) -> bool {
        self.unary.get(pred).is_some_and(|s| s.contains(&node))
    }

    pub fn goal(&self, prog: &DatalogProgram) -> bool {
        self.nullary.contains(&prog.goal)
    }

    /// Nodes carrying `pred`.
    pub fn facts(&self, pred: &str) -> Vec<NodeId> {
        self.unary.get(pred).map(|s| s.iter().copied().collect()).unwrap_or_default()
    }

    fn same_facts(&self, other: &Closure) -> bool {
        self.unary == other.unary && self.nullary == other.nullary
    }
}

/// IDB state visible to a join: full facts plus an optional delta for one
/// body position.
struct View<'a> {
    full: &'a Closure,
    delta: Option<(usize, &'a Closure)>,
}

impl View<'_> {
    fn unary(&self, pos: usize, pred: &str, v: NodeId) -> bool {
        match self.delta {
            Some((p, d)) if p == pos => d.holds(pred, v),
            _ => self.full.holds(pred, v),
        }
    }

    fn nullary(&self, pos: usize, pred: &str) -> bool {
        match self.delta {
            Some((p, d)) if p == pos => d.nullary.contains(pred),
            _ => self.full.nullary.contains(pred),
        }
    }
}

/// Nested-loop join of a rule body with dynamic atom ordering. Calls `emit`
/// with the value of the head variable (if any) for every match.
fn join(rule: &Rule, idb: &BTreeSet<String>, data: &LabelledGraph, view: &View<'_>, emit: &mut dyn FnMut(Option<NodeId>) -> bool) {
    let mut vars: Vec<String> = Vec::new();
    for a in &rule.body {
        for v in &a.args {
            if !vars.contains(v) {
                vars.push(v.clone());
            }
        }
    }
    let idx: HashMap<&str, usize> = vars.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
    let atoms: Vec<(usize, &Atom, Vec<usize>)> =
        rule.body.iter().enumerate().map(|(i, a)| (i, a, a.args.iter().map(|v| idx[v.as_str()]).collect())).collect();
    let head = rule.head.args.first().map(|v| idx[v.as_str()]);
    let mut asg: Vec<Option<NodeId>> = vec![None; vars.len()];
    let mut done = vec![false; atoms.len()];
    let ctx = JoinCtx { idb, data, view, atoms: &atoms, head };
    ctx.go(&mut asg, &mut done, emit);
}

struct JoinCtx<'a, 'b> {
    idb: &'a BTreeSet<String>,
    data: &'a LabelledGraph,
    view: &'a View<'b>,
    atoms: &'a [(usize, &'a Atom, Vec<usize>)],
    head: Option<usize>,
}

impl JoinCtx<'_, '_> {
    fn check(&self, pos: usize, atom: &Atom, vals: &[NodeId]) -> bool {
        match vals.len() {
            0 => self.view.nullary(pos, &atom.pred),
            1 if self.idb.contains(&atom.pred) => self.view.unary(pos, &atom.pred, vals[0]),
            1 => self.data.has_label(vals[0], &atom.pred),
            _ => self.data.has_edge(vals[0], vals[1], &atom.pred),
        }
    }

    /// Candidates for the first unbound variable of an atom given the rest.
    fn candidates(&self, atom: &Atom, vars: &[usize], asg: &[Option<NodeId>]) -> (usize, Vec<NodeId>) {
        let free = *vars.iter().find(|&&v| asg[v].is_none()).unwrap();
        let cands = if vars.len() == 2 {
            let (s, t) = (vars[0], vars[1]);
            match (asg[s], asg[t]) {
                (Some(a), None) => self.data.out_edges(a).filter(|e| e.pred == atom.pred).map(|e| e.dst).collect(),
                (None, Some(b)) => self.data.in_edges(b).filter(|e| e.pred == atom.pred).map(|e| e.src).collect(),
                _ if s == t => self.data.edges().iter().filter(|e| e.pred == atom.pred && e.src == e.dst).map(|e| e.src).collect(),
                _ => {
                    let mut v: Vec<NodeId> = self.data.edges().iter().filter(|e| e.pred == atom.pred).map(|e| e.src).collect();
                    v.dedup();
                    v
                }
            }
        } else if self.idb.contains(&atom.pred) {
            self.data.nodes().collect()
        } else {
            self.data.nodes_with_label(&atom.pred)
        };
        let mut cands = cands;
        cands.sort_unstable();
        cands.dedup();
        (free, cands)
    }

    fn go(&self, asg: &mut Vec<Option<NodeId>>, done: &mut Vec<bool>, emit: &mut dyn FnMut(Option<NodeId>) -> bool) -> bool {
        // settle every atom whose variables are all bound
        let mut settled = Vec::new();
        for (k, (pos, atom, vars)) in self.atoms.iter().enumerate() {
            if !done[k] && vars.iter().all(|&v| asg[v].is_some()) {
                let vals: Vec<NodeId> = vars.iter().map(|&v| asg[v].unwrap()).collect();
                if !self.check(*pos, atom, &vals) {
                    for &s in &settled {
                        done[s] = false;
                    }
                    return true;
                }
                done[k] = true;
                settled.push(k);
            }
        }
        let undo = |done: &mut Vec<bool>| {
            for &s in &settled {
                done[s] = false;
            }
        };
        // pick the open atom with the most bound variables, preferring edges
        let pick = self
            .atoms
            .iter()
            .enumerate()
            .filter(|(k, _)| !done[*k])
            .max_by_key(|(k, (_, _, vars))| {
                let bound = vars.iter().filter(|&&v| asg[v].is_some()).count();
                (bound, vars.len(), std::cmp::Reverse(*k))
            })
            .map(|(k, _)| k);
        let Some(k) = pick else {
            let keep = emit(self.head.and_then(|h| asg[h]));
            undo(done);
            return keep;
        };
        let (_, atom, vars) = &self.atoms[k];
        let (free, cands) = self.candidates(atom, vars, asg);
        for c in cands {
            asg[free] = Some(c);
            let keep = self.go(asg, done, emit);
            asg[free] = None;
            if !keep {
                undo(done);
                return false;
            }
        }
        undo(done);
        true
    }
}

fn apply(prog: &DatalogProgram, data: &LabelledGraph, full: &Closure, delta: Option<&Closure>, out: &mut Closure) {
    for rule in &prog.rules {
        let positions: Vec<Option<usize>> = match delta {
            None => vec![None],
            Some(_) => rule
                .body
                .iter()
                .enumerate()
                .filter(|(_, a)| prog.idb.contains(&a.pred))
                .map(|(i, _)| Some(i))
                .collect(),
        };
        for p in positions {
            let view = View { full, delta: p.zip(delta) };
            let head = &rule.head.pred;
            join(rule, &prog.idb, data, &view, &mut |v| {
                match v {
                    Some(n) => {
                        if !full.holds(head, n) {
                            out.unary.entry(head.clone()).or_default().insert(n);
                        }
                    }
                    None => {
                        if !full.nullary.contains(head) {
                            out.nullary.insert(head.clone());
                        }
                        return false;
                    }
                }
                true
            });
        }
    }
}

fn merge(into: &mut Closure, from: &Closure) {
    for (p, s) in &from.unary {
        into.unary.entry(p.clone()).or_default().extend(s.iter().copied());
    }
    into.nullary.extend(from.nullary.iter().cloned());
}

/// Least fixpoint by semi-naive evaluation.
pub fn fixpoint(prog: &DatalogProgram, data: &LabelledGraph) -> Closure {
    let mut full = Closure::default();
    // first round: non-recursive rules fire on EDB only
    let mut delta = Closure::default();
    apply(prog, data, &full, None, &mut delta);
    let mut rounds = 1;
    while !(delta.unary.values().all(|s| s.is_empty()) && delta.nullary.is_empty()) {
        merge(&mut full, &delta);
        let mut next = Closure::default();
        apply(prog, data, &full, Some(&delta), &mut next);
        delta = next;
        rounds += 1;
    }
    full.rounds = rounds;
    full
}

/// Least fixpoint by naive iteration; `max_rounds` stops early.
pub fn fixpoint_naive(prog: &DatalogProgram, data: &LabelledGraph, max_rounds: Option<usize>) -> Closure {
    let mut full = Closure::default();
    let mut rounds = 0;
    loop {
        if max_rounds.is_some_and(|m| rounds >= m) {
            break;
        }
        let mut fresh = Closure::default();
        apply(prog, data, &full, None, &mut fresh);
        let mut next = full.clone();
        merge(&mut next, &fresh);
        rounds += 1;
        if next.same_facts(&full) {
            break;
        }
        full = next;
    }
    full.rounds = rounds;
    full
}

/// The recursive programs of a 1-CQ.
#[derive(Clone, Debug, Serialize)]
pub struct Programs {
    /// Goal `G`: rules for `G`, `P(x) ← T(x)` and the recursive `P` rule.
    pub pi: DatalogProgram,
    /// Goal `P`: the two `P` rules.
    pub sigma: DatalogProgram,
}

fn var(q: &LabelledGraph, v: NodeId) -> String {
    q.name(v).to_string()
}

fn q_minus_atoms(cq: &OneCq) -> Vec<Atom> {
    let qm = cq.q_minus();
    let mut atoms = Vec::new();
    for v in qm.nodes() {
        for l in qm.labels(v) {
            atoms.push(Atom { pred: l.clone(), args: vec![var(&qm, v)] });
        }
    }
    for e in qm.edges() {
        atoms.push(Atom { pred: e.pred.clone(), args: vec![var(&qm, e.src), var(&qm, e.dst)] });
    }
    atoms.sort();
    // isolated unlabelled nodes still need a domain atom; none arise in connected queries
    atoms
}

/// Build the goal program and the unary sirup of a 1-CQ.
pub fn build_programs(q: &LabelledGraph) -> Result<Programs> {
    let cq = OneCq::new(q)?;
    for p in ["G", "P"] {
        if q.unary_predicates().contains(p) || q.binary_predicates().contains(p) {
            return Err(Error::Invalid(format!("query uses reserved predicate {p}")));
        }
    }
    let x = var(q, cq.x);
    let qm = q_minus_atoms(&cq);
    let ps: Vec<Atom> = cq.ys.iter().map(|&y| Atom { pred: "P".into(), args: vec![var(q, y)] }).collect();
    let mut goal_body = vec![Atom { pred: "F".into(), args: vec![x.clone()] }];
    goal_body.extend(qm.iter().cloned());
    goal_body.extend(ps.iter().cloned());
    let mut rec_body = vec![Atom { pred: "A".into(), args: vec![x.clone()] }];
    rec_body.extend(qm.iter().cloned());
    rec_body.extend(ps.iter().cloned());
    let base = Rule { head: Atom::new("P", &["x"]), body: vec![Atom::new("T", &["x"])] };
    let rec = Rule { head: Atom { pred: "P".into(), args: vec![x] }, body: rec_body };
    let goal = Rule { head: Atom::new("G", &[]), body: goal_body };
    Ok(Programs {
        pi: DatalogProgram::new(vec![goal, base.clone(), rec.clone()], "G")?,
        sigma: DatalogProgram::new(vec![base, rec], "P")?,
    })
}

/// Outcome of a brute-force certain-answer computation.
#[derive(Clone, Debug, Serialize)]
pub struct CertainAnswer {
    pub answer: bool,
    /// Number of labellings examined (consistent or not).
    pub models: u64,
    /// A labelling with no match of `q`, as `(node, label)` pairs.
    pub countermodel: Option<Vec<(String, String)>>,
    /// A match of `q` in the first model, as `(query node, data node)` pairs.
    pub witness: Option<Vec<(String, String)>>,
}

/// Nodes to be labelled T or F, sorted by name.
fn choice_nodes(data: &LabelledGraph, pred: impl Fn(NodeId) -> bool) -> Vec<NodeId> {
    let mut v: Vec<NodeId> = data.nodes().filter(|&n| pred(n)).collect();
    v.sort_by(|&a, &b| data.name(a).cmp(data.name(b)));
    v
}

fn brute_force(q: &LabelledGraph, data: &LabelledGraph, nodes: &[NodeId], disjointness: bool, max: usize) -> Result<CertainAnswer> {
    if nodes.len() > max {
        return Err(Error::CapExceeded(format!("{} A-nodes exceed the bound {max}", nodes.len())));
    }
    let mut model = data.clone();
    let mut bits = vec![false; nodes.len()];
    for &n in nodes {
        model.add_label(n, "F");
    }
    let total: u64 = 1u64 << nodes.len();
    let mut witness = None;
    for step in 0..total {
        if step > 0 {
            // Gray code: flip the bit at the lowest set position of `step`
            let i = step.trailing_zeros() as usize;
            bits[i] = !bits[i];
            let n = nodes[i];
            let (add, del) = if bits[i] { ("T", "F") } else { ("F", "T") };
            if !data.has_label(n, del) {
                model.remove_label(n, del);
            }
            model.add_label(n, add);
        }
        if disjointness && model.nodes().any(|v| model.has_label(v, "F") && model.has_label(v, "T")) {
            continue;
        }
        match hom::hom_exists(q, &model, &Anchor::none())? {
            Some(h) => {
                if witness.is_none() {
                    witness = Some(q.nodes().map(|v| (q.name(v).to_string(), model.name(h[v]).to_string())).collect());
                }
            }
            None => {
                let cm = nodes
                    .iter()
                    .zip(&bits)
                    .map(|(&n, &b)| (data.name(n).to_string(), if b { "T" } else { "F" }.to_string()))
                    .collect();
                return Ok(CertainAnswer { answer: false, models: step + 1, countermodel: Some(cm), witness: None });
            }
        }
    }
    Ok(CertainAnswer { answer: true, models: total, countermodel: None, witness })
}

/// Certain answer to the Boolean d-sirup of `q` over `data`. With
/// `disjointness`, models with a node labelled both F and T are discarded.
pub fn certain_answer_delta(q: &LabelledGraph, data: &LabelledGraph, disjointness: bool, max_a_nodes: usize) -> Result<CertainAnswer> {
    let nodes = choice_nodes(data, |n| data.has_label(n, "A"));
    brute_force(q, data, &nodes, disjointness, max_a_nodes)
}

/// Transformation of the covering axiom `T ∨ F ← A` into `T(y) ∨ F(y) ← R(x, y)`
/// for a fresh binary predicate.
#[derive(Clone, Debug)]
pub struct SchemaOrg {
    pub pred: String,
}

/// Set up the transformation for `q` with fresh binary predicate `pred`.
pub fn to_schema_org(q: &LabelledGraph, pred: &str) -> Result<SchemaOrg> {
    if q.binary_predicates().contains(pred) || q.unary_predicates().contains(pred) {
        return Err(Error::Invalid(format!("predicate {pred} already occurs in the query")));
    }
    Ok(SchemaOrg { pred: pred.to_string() })
}

impl SchemaOrg {
    /// `D → D′`: every `A(b)` becomes `R(c, b)` for a fresh `c`.
    pub fn forward(&self, data: &LabelledGraph) -> Result<LabelledGraph> {
        if data.binary_predicates().contains(&self.pred) {
            return Err(Error::Invalid(format!("data already uses {}", self.pred)));
        }
        let mut out = data.clone();
        for b in data.nodes_with_label("A") {
            out.remove_label(b, "A");
            let c = out.fresh_node(&format!("{}_{}", self.pred, data.name(b)));
            out.add_edge(c, b, &self.pred);
        }
        Ok(out)
    }

    /// `D′ → D`: every `R(x, y)` becomes `A(y)`.
    pub fn backward(&self, data: &LabelledGraph) -> LabelledGraph {
        let mut out = LabelledGraph::new();
        for v in data.nodes() {
            let n = out.add_node(data.name(v));
            for l in data.labels(v) {
                out.add_label(n, l);
            }
        }
        for e in data.edges() {
            if e.pred == self.pred {
                out.add_label(e.dst, "A");
            } else {
                out.add_edge(e.src, e.dst, &e.pred);
            }
        }
        out
    }

    /// Certain answer of the transformed program over `D′`: every node with an
    /// incoming fresh edge is labelled T or F.
    pub fn certain_answer(&self, q: &LabelledGraph, data: &LabelledGraph, disjointness: bool, max: usize) -> Result<CertainAnswer> {
        let nodes = choice_nodes(data, |n| data.in_edges(n).any(|e| e.pred == self.pred));
        brute_force(q, data, &nodes, disjointness, max)
    }
}
