//! Boolean formulas compiled into dag-shaped 1-CQs.
//!
//! A gadget wires a formula into a shared base block. Its main block holds
//! the gate structure, its input block holds one gathering chain per
//! variable, and its frame decides which cactus segments it can react to.
//! A gadget is triggered at a segment `s` of a cactus when `q⁻_TT` maps into
//! the cactus with the gadget's `ι` node sent to the `α` node of `s`; that
//! happens exactly when the bits read off the skeleton around `s` satisfy the
//! formula.
//!
//! Node labels other than `F` and `T` are written as an edge with the same
//! predicate to a fresh node.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::cactus::{cactuses_up_to, Cactus};
use crate::cq::OneCq;
use crate::error::{Error, Result};
use crate::graph::{LabelledGraph, NodeId};
use crate::hom::{self, Anchor, HomOptions};

/// Gate tree. Variables are 0-based.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Gate {
    Var(usize),
    Not(Box<Gate>),
    And(Box<Gate>, Box<Gate>),
}

impl Gate {
    pub fn var(i: usize) -> Gate {
        Gate::Var(i)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(g: Gate) -> Gate {
        Gate::Not(Box::new(g))
    }

    pub fn and(a: Gate, b: Gate) -> Gate {
        Gate::And(Box::new(a), Box::new(b))
    }

    /// `a ∨ b` as `¬(¬a ∧ ¬b)`.
    pub fn or(a: Gate, b: Gate) -> Gate {
        Gate::not(Gate::and(Gate::not(a), Gate::not(b)))
    }

    /// Left-nested conjunction; panics on an empty list.
    pub fn and_all(gs: Vec<Gate>) -> Gate {
        gs.into_iter().reduce(Gate::and).expect("non-empty conjunction")
    }

    /// Left-nested disjunction; panics on an empty list.
    pub fn or_all(gs: Vec<Gate>) -> Gate {
        gs.into_iter().reduce(Gate::or).expect("non-empty disjunction")
    }

    /// `y_i` when `positive`, else `¬y_i`.
    pub fn literal(i: usize, positive: bool) -> Gate {
        if positive {
            Gate::var(i)
        } else {
            Gate::not(Gate::var(i))
        }
    }

    pub fn eval(&self, b: &[bool]) -> bool {
        match self {
            Gate::Var(i) => b[*i],
            Gate::Not(g) => !g.eval(b),
            Gate::And(x, y) => x.eval(b) && y.eval(b),
        }
    }

    /// Number of non-leaf gates.
    pub fn gate_count(&self) -> usize {
        match self {
            Gate::Var(_) => 0,
            Gate::Not(g) => 1 + g.gate_count(),
            Gate::And(x, y) => 1 + x.gate_count() + y.gate_count(),
        }
    }

    fn max_var(&self) -> Option<usize> {
        match self {
            Gate::Var(i) => Some(*i),
            Gate::Not(g) => g.max_var(),
            Gate::And(x, y) => x.max_var().max(y.max_var()),
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gate::Var(i) => write!(f, "y{}", i + 1),
            Gate::Not(g) => write!(f, "not({g})"),
            Gate::And(x, y) => write!(f, "and({x}, {y})"),
        }
    }
}

/// Where a tuple of inputs is read from, relative to the segment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum InputType {
    /// The bud labels on the path from the segment up to its ancestors,
    /// nearest first.
    Up(usize),
    /// The bud labels on some path down from the segment.
    Down(usize),
}

impl InputType {
    pub fn len(&self) -> usize {
        match self {
            InputType::Up(n) | InputType::Down(n) => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for InputType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputType::Up(n) => write!(f, "up {n}"),
            InputType::Down(n) => write!(f, "down {n}"),
        }
    }
}

/// A gate tree with input types covering its variables in order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Formula {
    pub root: Gate,
    pub inputs: Vec<InputType>,
}

impl Formula {
    /// Checks that the input types cover every variable used.
    pub fn new(root: Gate, inputs: Vec<InputType>) -> Result<Formula> {
        let n: usize = inputs.iter().map(InputType::len).sum();
        if inputs.iter().any(InputType::is_empty) {
            return Err(Error::Invalid("input tuples must be non-empty".into()));
        }
        if let Some(m) = root.max_var() {
            if m >= n {
                return Err(Error::Invalid(format!("formula uses y{} but input types cover {n} variables", m + 1)));
            }
        }
        Ok(Formula { root, inputs })
    }

    pub fn var_count(&self) -> usize {
        self.inputs.iter().map(InputType::len).sum()
    }

    pub fn eval(&self, b: &[bool]) -> bool {
        self.root.eval(b)
    }

    pub fn gate_count(&self) -> usize {
        self.root.gate_count()
    }

    /// Reads `inputs: up 2, down 1` and `formula: and(y1, not(y2))` lines;
    /// `or(a, b)` is accepted and desugared, `#` starts a comment.
    pub fn parse(text: &str) -> Result<Formula> {
        let mut inputs = None;
        let mut root = None;
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: &str| Error::Syntax { line: no + 1, msg: m.to_string() };
            let (key, rest) = line.split_once(':').ok_or_else(|| err("expected `key: value`"))?;
            match key.trim() {
                "inputs" => {
                    let mut v = Vec::new();
                    for part in rest.split(',') {
                        let words: Vec<&str> = part.split_whitespace().collect();
                        let [dir, n] = words.as_slice() else { return Err(err("input type is `up N` or `down N`")) };
                        let n: usize = n.parse().map_err(|_| err("bad tuple length"))?;
                        v.push(match *dir {
                            "up" => InputType::Up(n),
                            "down" => InputType::Down(n),
                            _ => return Err(err("input type is `up N` or `down N`")),
                        });
                    }
                    inputs = Some(v);
                }
                "formula" => {
                    let mut p = ExprParser { s: rest.as_bytes(), pos: 0 };
                    let g = p.expr().map_err(|m| err(&m))?;
                    p.ws();
                    if p.pos != p.s.len() {
                        return Err(err("trailing input after formula"));
                    }
                    root = Some(g);
                }
                other => return Err(err(&format!("unknown key `{other}`"))),
            }
        }
        let root = root.ok_or_else(|| Error::Invalid("missing `formula:` line".into()))?;
        let inputs = inputs.ok_or_else(|| Error::Invalid("missing `inputs:` line".into()))?;
        Formula::new(root, inputs)
    }

    pub fn to_text(&self) -> String {
        let inputs: Vec<String> = self.inputs.iter().map(|t| t.to_string()).collect();
        format!("inputs: {}\nformula: {}\n", inputs.join(", "), self.root)
    }
}

struct ExprParser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl ExprParser<'_> {
    fn ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> std::result::Result<(), String> {
        self.ws();
        if self.s.get(self.pos) == Some(&c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(format!("expected `{}` at column {}", c as char, self.pos + 1))
        }
    }

    fn word(&mut self) -> String {
        self.ws();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.s[start..self.pos]).to_lowercase()
    }

    fn expr(&mut self) -> std::result::Result<Gate, String> {
        let w = self.word();
        match w.as_str() {
            "not" => {
                self.eat(b'(')?;
                let g = self.expr()?;
                self.eat(b')')?;
                Ok(Gate::not(g))
            }
            "and" | "or" => {
                self.eat(b'(')?;
                let a = self.expr()?;
                self.eat(b',')?;
                let b = self.expr()?;
                self.eat(b')')?;
                Ok(if w == "and" { Gate::and(a, b) } else { Gate::or(a, b) })
            }
            v if v.starts_with('y') => match v[1..].parse::<usize>() {
                Ok(i) if i >= 1 => Ok(Gate::var(i - 1)),
                _ => Err(format!("bad variable `{v}`")),
            },
            _ => Err(format!("unexpected `{w}` at column {}", self.pos + 1)),
        }
    }
}

/// Does `b` contain the reverse of `0 0 1 *`, i.e. a window `* 1 0 0`?
pub fn has_reversed_001(b: &[bool]) -> bool {
    b.windows(4).any(|w| w[1] && !w[2] && !w[3])
}

/// Formula over one up-tuple of length `4d + 11` that is true iff the input
/// has no window `* 1 0 0`.
pub fn gen_good(d: usize) -> Result<Formula> {
    if d == 0 {
        return Err(Error::Invalid("gen_good needs d >= 1".into()));
    }
    let n = 4 * d + 11;
    let clauses = (0..n - 3)
        .map(|p| Gate::not(Gate::and_all(vec![Gate::var(p + 1), Gate::not(Gate::var(p + 2)), Gate::not(Gate::var(p + 3))])))
        .collect();
    Formula::new(Gate::and_all(clauses), vec![InputType::Up(n)])
}

/// Forward patterns (`Some(bit)` or wildcard) accepted by `gen_mustbranch`:
/// `001*(111*)^l w` with `w` empty and `l = 0`, or `w = 001`, or `w = 111`
/// and `l < d - 1`.
pub fn mustbranch_patterns(k: usize, d: usize) -> Vec<Vec<Option<bool>>> {
    let head = [Some(false), Some(false), Some(true), None];
    let block = [Some(true), Some(true), Some(true), None];
    let mut out = Vec::new();
    let mut push = |l: usize, w: &[Option<bool>]| {
        let mut p: Vec<Option<bool>> = head.to_vec();
        for _ in 0..l {
            p.extend_from_slice(&block);
        }
        p.extend_from_slice(w);
        if p.len() == k {
            out.push(p);
        }
    };
    push(0, &[]);
    if k >= 7 && (k - 7) % 4 == 0 {
        let l = (k - 7) / 4;
        push(l, &[Some(false), Some(false), Some(true)]);
        if l + 1 < d {
            push(l, &[Some(true), Some(true), Some(true)]);
        }
    }
    out
}

/// Formula over one up-tuple of length `k` that is true iff the input is the
/// reverse of one of [`mustbranch_patterns`].
pub fn gen_mustbranch(k: usize, d: usize) -> Result<Formula> {
    if d == 0 || !(4..=4 * d + 11).contains(&k) {
        return Err(Error::Invalid(format!("gen_mustbranch needs 4 <= k <= 4d+11, got k={k}, d={d}")));
    }
    let disjuncts: Vec<Gate> = mustbranch_patterns(k, d)
        .into_iter()
        .map(|p| {
            let lits = p.iter().rev().enumerate().filter_map(|(i, b)| b.map(|b| Gate::literal(i, b))).collect();
            Gate::and_all(lits)
        })
        .collect();
    let root = if disjuncts.is_empty() {
        Gate::and(Gate::var(0), Gate::not(Gate::var(0)))
    } else {
        Gate::or_all(disjuncts)
    };
    Formula::new(root, vec![InputType::Up(k)])
}

/// Frame type: which of `t₀`, `t₁` the frame routes to the real T-nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Frame {
    AT,
    TA,
    AA,
}

impl Frame {
    pub fn parse(s: &str) -> Result<Frame> {
        match s.to_ascii_uppercase().as_str() {
            "AT" => Ok(Frame::AT),
            "TA" => Ok(Frame::TA),
            "AA" => Ok(Frame::AA),
            _ => Err(Error::Invalid(format!("unknown frame type `{s}`"))),
        }
    }

    /// Can the frame fire at a segment whose `t₀` / `t₁` are budded as given?
    pub fn compatible(self, t0_budded: bool, t1_budded: bool) -> bool {
        match self {
            Frame::AT => !t1_budded,
            Frame::TA => !t0_budded,
            Frame::AA => true,
        }
    }
}

/// Base block node ids.
#[derive(Clone, Debug, Serialize)]
pub struct BaseNodes {
    pub f: NodeId,
    pub xi: NodeId,
    pub alpha: NodeId,
    pub t0: NodeId,
    pub t1: NodeId,
    pub w: NodeId,
    pub xi2: NodeId,
}

/// Distinguished nodes of one gadget.
#[derive(Clone, Debug, Serialize)]
pub struct GadgetNodes {
    pub frame: Frame,
    pub pi: NodeId,
    pub iota: NodeId,
    pub rho: NodeId,
    pub rho2: NodeId,
    pub tau: NodeId,
    pub ft: NodeId,
    /// `η` and `γ` of each gathering chain, by variable.
    pub eta: Vec<NodeId>,
    pub gamma: Vec<NodeId>,
}

/// An assembled gadget query.
#[derive(Clone, Debug)]
pub struct GadgetQuery {
    pub query: LabelledGraph,
    pub base: BaseNodes,
    pub formulas: Vec<Formula>,
    pub gadgets: Vec<GadgetNodes>,
}

struct Builder {
    g: LabelledGraph,
}

impl Builder {
    fn node(&mut self, prefix: &str) -> NodeId {
        self.g.fresh_node(prefix)
    }

    fn named(&mut self, name: &str) -> NodeId {
        assert!(self.g.node(name).is_none(), "duplicate node {name}");
        self.g.add_node(name)
    }

    fn r(&mut self, a: NodeId, b: NodeId) {
        self.g.add_edge(a, b, "R");
    }

    fn s(&mut self, a: NodeId, b: NodeId) {
        self.g.add_edge(a, b, "S");
    }

    fn rs(&mut self, a: NodeId, b: NodeId) {
        self.r(a, b);
        self.s(a, b);
    }

    fn edge(&mut self, a: NodeId, b: NodeId, pred: &str) {
        self.g.add_edge(a, b, pred);
    }

    /// Node label shorthand: a `label`-edge to a fresh node.
    fn mark(&mut self, a: NodeId, label: &str) {
        let name = format!("{}_{label}", self.g.name(a));
        let n = self.node(&name);
        self.g.add_edge(a, n, label);
    }

    /// Path of 4-edge units from `from` to `end`; the unit with index
    /// `s_unit` has an S-edge in third position.
    fn units(&mut self, prefix: &str, from: NodeId, end: NodeId, count: usize, s_unit: usize) {
        let mut cur = from;
        for u in 0..count {
            for pos in 0..4 {
                let next = if u + 1 == count && pos == 3 { end } else { self.node(prefix) };
                let pred = if u == s_unit && pos == 2 { "S" } else { "R" };
                self.edge(cur, next, pred);
                cur = next;
            }
        }
    }
}

/// Per-gadget label names.
struct Labels {
    rg: String,
    ug: String,
    e: String,
    d: String,
    prefix: String,
}

impl Labels {
    fn new(idx: usize) -> Labels {
        let p = format!("g{}", idx + 1);
        Labels { rg: format!("R{p}"), ug: format!("U{p}"), e: format!("E{p}"), d: format!("D{p}"), prefix: p }
    }

    fn b(&self, i: usize) -> String {
        format!("B{}_{}", self.prefix, i + 1)
    }

    fn bij(&self, i: usize, j: usize) -> String {
        format!("B{}_{}_{}", self.prefix, i + 1, j + 1)
    }
}

/// A leaf occurrence `(i, j)` and its non-leaf gates from leaf to root.
struct Branch {
    var: usize,
    occ: usize,
    gates: Vec<(usize, bool)>,
}

/// Numbers non-leaf gates in post-order and lists branches left to right.
fn branches(root: &Gate, n: usize) -> (Vec<Branch>, usize) {
    fn walk(g: &Gate, above: &mut Vec<(usize, bool)>, next: &mut usize, occ: &mut Vec<usize>, out: &mut Vec<Branch>) -> usize {
        // ids are handed out before descending so that `above` is complete
        match g {
            Gate::Var(i) => {
                let gates = above.iter().rev().copied().collect();
                out.push(Branch { var: *i, occ: occ[*i], gates });
                occ[*i] += 1;
                usize::MAX
            }
            Gate::Not(c) => {
                let id = *next;
                *next += 1;
                above.push((id, false));
                walk(c, above, next, occ, out);
                above.pop();
                id
            }
            Gate::And(a, b) => {
                let id = *next;
                *next += 1;
                above.push((id, true));
                walk(a, above, next, occ, out);
                walk(b, above, next, occ, out);
                above.pop();
                id
            }
        }
    }
    let mut out = Vec::new();
    let mut next = 0;
    walk(root, &mut Vec::new(), &mut next, &mut vec![0; n], &mut out);
    (out, next)
}

/// Builds `M_g` (or its copy) below `top`, ending in `rho`.
fn main_block(b: &mut Builder, lab: &Labels, f: &Formula, tag: &str, top: NodeId, rho: NodeId) {
    let n = f.var_count();
    let pre = format!("{}_{tag}_", lab.prefix);
    let beta_f = b.named(&format!("{pre}betaF"));
    for i in 0..n {
        let bt = b.named(&format!("{pre}betaT{}", i + 1));
        b.r(top, bt);
        b.mark(bt, &lab.b(i));
        b.r(bt, beta_f);
        b.mark(beta_f, &lab.b(i));
    }
    b.r(beta_f, rho);
    let mid = b.node(&pre);
    b.r(beta_f, mid);
    b.r(mid, rho);
    let mut occ = vec![0; n];
    compile_gate(b, lab, &pre, &f.root, true, beta_f, &mut occ);
}

/// Emits the gate gadget for `g` and returns its output node; leaves return
/// their lower `B_ij` node.
fn compile_gate(b: &mut Builder, lab: &Labels, pre: &str, g: &Gate, root: bool, beta_f: NodeId, occ: &mut [usize]) -> NodeId {
    match g {
        Gate::Var(i) => {
            let j = occ[*i];
            occ[*i] += 1;
            let upper = b.named(&format!("{pre}B{}_{}u", i + 1, j + 1));
            let lower = b.named(&format!("{pre}B{}_{}l", i + 1, j + 1));
            b.r(beta_f, upper);
            b.r(upper, lower);
            b.mark(upper, &lab.bij(*i, j));
            b.mark(lower, &lab.bij(*i, j));
            lower
        }
        Gate::Not(c) => {
            let i = compile_gate(b, lab, pre, c, false, beta_f, occ);
            let [n2, n3, n4, n5, o] = [(); 5].map(|_| b.node(pre));
            b.r(i, n2);
            b.s(n2, n3);
            b.r(n3, n5);
            b.r(n5, o);
            b.s(i, n4);
            b.r(n4, o);
            if root {
                b.mark(n5, &lab.d);
            }
            o
        }
        Gate::And(x, y) => {
            let i1 = compile_gate(b, lab, pre, x, false, beta_f, occ);
            let i2 = compile_gate(b, lab, pre, y, false, beta_f, occ);
            let [bb, dd, o, c1, c2, c3, n01, n02, n22, n23] = [(); 10].map(|_| b.node(pre));
            b.s(i1, bb);
            b.s(i2, bb);
            b.r(i2, n01);
            b.s(n01, c1);
            b.r(i1, n02);
            b.s(n02, c2);
            b.s(i1, c1);
            b.s(i2, c2);
            b.r(i1, n22);
            b.s(n22, c3);
            b.r(i2, n23);
            b.s(n23, c3);
            b.r(c1, o);
            b.r(c2, o);
            b.r(c3, o);
            b.r(bb, dd);
            b.r(dd, o);
            for v in [bb, c1, c2, c3] {
                let e = b.node(pre);
                b.r(v, e);
                b.mark(e, &lab.e);
            }
            if root {
                b.mark(dd, &lab.d);
            }
            o
        }
    }
}

/// Builds `I_g` ending in `pi`; returns the `η` and `γ` node of every variable.
fn input_block(b: &mut Builder, lab: &Labels, f: &Formula, pi: NodeId) -> (Vec<NodeId>, Vec<NodeId>) {
    let n = f.var_count();
    let pre = format!("{}_I_", lab.prefix);
    let mut bnode = Vec::with_capacity(n);
    let mut gammas = Vec::with_capacity(n);
    let mut etas = Vec::with_capacity(n);
    for i in 0..n {
        let gamma = b.named(&format!("{pre}gamma{}", i + 1));
        let x = b.node(&pre);
        let bi = b.named(&format!("{pre}B{}", i + 1));
        b.r(gamma, x);
        b.r(x, bi);
        b.mark(bi, &lab.b(i));
        let y = b.node(&pre);
        b.r(bi, y);
        b.r(y, pi);
        bnode.push(bi);
        gammas.push(gamma);
    }
    // gathering chains
    let mut k = 0;
    for (t, ty) in f.inputs.iter().enumerate() {
        let nj = ty.len();
        let shared_w = match ty {
            InputType::Down(_) => {
                let w = b.named(&format!("{pre}W{}", t + 1));
                b.mark(w, "W");
                Some(w)
            }
            InputType::Up(_) => None,
        };
        for i in 1..=nj {
            let v = k + i - 1;
            let cpre = format!("{pre}y{}_", v + 1);
            let eta = b.named(&format!("{pre}eta{}", v + 1));
            match ty {
                // η ... γ: n_j - i plain units, the S unit, then i - 1 plain units
                InputType::Up(_) => b.units(&cpre, eta, gammas[v], nj, nj - i),
                // γ ... η: i - 1 plain units, the S unit, then n_j - i plain units
                InputType::Down(_) => {
                    b.units(&cpre, gammas[v], eta, nj, i - 1);
                    b.r(eta, shared_w.unwrap());
                }
            }
            etas.push(eta);
        }
        k += nj;
    }
    // branch patterns
    let (brs, ngates) = branches(&f.root, n);
    let mut e_nodes: Vec<Option<NodeId>> = vec![None; ngates];
    let mut is_and = vec![false; ngates];
    for br in &brs {
        for &(id, and) in &br.gates {
            is_and[id] = and;
        }
    }
    for (id, and) in is_and.iter().enumerate() {
        if *and {
            let e = b.named(&format!("{pre}E{}", id + 1));
            b.mark(e, &lab.e);
            e_nodes[id] = Some(e);
        }
    }
    for br in &brs {
        let x = b.node(&pre);
        let bij = b.named(&format!("{pre}B{}_{}", br.var + 1, br.occ + 1));
        b.r(bnode[br.var], x);
        b.r(x, bij);
        b.mark(bij, &lab.bij(br.var, br.occ));
        let mut cur = bij;
        for &(id, _) in &br.gates {
            let [a, s_end, p] = [(); 3].map(|_| b.node(&pre));
            b.r(cur, a);
            b.s(a, s_end);
            b.r(s_end, p);
            if let Some(e) = e_nodes[id] {
                b.r(s_end, e);
            }
            cur = p;
        }
        if !br.gates.is_empty() {
            b.mark(cur, &lab.d);
        }
    }
    (etas, gammas)
}

/// Assembles the query from gadgets in order. Gadget `i` gets its own
/// predicates (`Rg{i+1}`, `Ug{i+1}`, `Bg{i+1}_..`, `Eg{i+1}`, `Dg{i+1}`).
pub fn build_query(gadgets: &[(Formula, Frame)]) -> Result<GadgetQuery> {
    if gadgets.is_empty() {
        return Err(Error::Invalid("build_query needs at least one gadget".into()));
    }
    for (f, _) in gadgets {
        Formula::new(f.root.clone(), f.inputs.clone())?;
        if f.gate_count() == 0 {
            return Err(Error::Invalid("formula needs at least one gate".into()));
        }
    }
    let mut b = Builder { g: LabelledGraph::new() };
    let f = b.named("f");
    let xi = b.named("xi");
    let alpha = b.named("alpha");
    let a4 = b.named("a4");
    let a6 = b.named("a6");
    let t0 = b.named("t0");
    let t1 = b.named("t1");
    let w = b.named("w");
    let xi2 = b.named("xi2");
    b.g.add_label(f, "F");
    b.g.add_label(t0, "T");
    b.g.add_label(t1, "T");
    b.r(f, xi);
    b.r(xi, alpha);
    b.r(alpha, a4);
    b.rs(a4, t0);
    b.rs(alpha, a6);
    b.r(a6, t1);
    b.r(f, w);
    b.r(xi, w);
    b.r(xi2, w);
    b.r(f, xi2);
    b.mark(w, "W");
    let base = BaseNodes { f, xi, alpha, t0, t1, w, xi2 };

    let mut nodes = Vec::new();
    for (idx, (formula, frame)) in gadgets.iter().enumerate() {
        let lab = Labels::new(idx);
        let p = &lab.prefix;
        let [pi, iota, rho, rho2, tau, i3, i4, ft] =
            ["pi", "iota", "rho", "rho2", "tau", "u1", "u2", "ft"].map(|s| b.named(&format!("{p}_{s}")));
        b.edge(rho, alpha, &lab.rg);
        b.edge(rho2, tau, &lab.rg);
        b.r(xi2, tau);
        b.r(alpha, i4);
        b.r(tau, i4);
        b.mark(i4, &lab.ug);
        b.r(iota, i3);
        b.r(alpha, i3);
        b.mark(i3, &lab.ug);
        b.edge(pi, iota, &lab.rg);
        b.g.add_label(ft, "F");
        b.g.add_label(ft, "T");
        let g6 = b.named(&format!("{p}_g6"));
        match frame {
            Frame::AT => {
                let g4 = b.named(&format!("{p}_g4"));
                b.rs(tau, g4);
                b.r(g4, t1);
                b.r(tau, g6);
                b.rs(g6, ft);
            }
            Frame::TA => {
                let g4 = b.named(&format!("{p}_g4"));
                b.r(tau, g4);
                b.rs(g4, t0);
                b.rs(tau, g6);
                b.r(g6, ft);
            }
            Frame::AA => {
                b.rs(tau, g6);
                b.rs(g6, ft);
            }
        }
        main_block(&mut b, &lab, formula, "M", xi, rho);
        main_block(&mut b, &lab, formula, "M2", xi2, rho2);
        let (eta, gamma) = input_block(&mut b, &lab, formula, pi);
        nodes.push(GadgetNodes { frame: *frame, pi, iota, rho, rho2, tau, ft, eta, gamma });
    }
    // cross wiring between gadgets
    if gadgets.len() > 1 {
        for (j, gj) in nodes.iter().enumerate() {
            let lab = Labels::new(j);
            let u = b.named(&format!("{}_u3", lab.prefix));
            b.r(gj.iota, u);
            b.mark(u, &lab.ug);
            for (i, gi) in nodes.iter().enumerate() {
                if i != j {
                    b.r(gi.tau, u);
                    b.edge(gj.rho2, gi.tau, &lab.rg);
                }
            }
        }
    }
    let q = b.g;
    Ok(GadgetQuery { query: q, base, formulas: gadgets.iter().map(|(f, _)| f.clone()).collect(), gadgets: nodes })
}

impl GadgetQuery {
    pub fn one_cq(&self) -> Result<OneCq> {
        OneCq::new(&self.query)
    }

    /// `q⁻_TT`: the query without `F` on its focus.
    pub fn q_minus_tt(&self) -> LabelledGraph {
        let mut g = self.query.clone();
        g.remove_label(self.base.f, "F");
        g
    }

    /// The F-node has successors and no FT-twin does.
    pub fn foc_holds(&self) -> bool {
        let q = &self.query;
        q.out_edges(self.base.f).next().is_some()
            && q.nodes().filter(|&v| q.has_label(v, "F") && q.has_label(v, "T")).all(|v| q.out_edges(v).next().is_none())
    }
}

/// Whether `t₀` and `t₁` of segment `s` were budded.
pub fn segment_form(c: &Cactus, s: usize) -> (bool, bool) {
    let kids = c.skeleton.children(s);
    (kids.iter().any(|&(l, _)| l == 1), kids.iter().any(|&(l, _)| l == 2))
}

/// Bud label of a non-root segment as a bit: `t₀` is 0, `t₁` is 1.
fn bit(c: &Cactus, s: usize) -> bool {
    c.skeleton.segments[s].label == 2
}

/// Bits on the path from `s` up to the root, nearest first.
pub fn uppath(c: &Cactus, s: usize) -> Vec<bool> {
    let mut out = Vec::new();
    let mut cur = s;
    while let Some(p) = c.skeleton.segments[cur].parent {
        out.push(bit(c, cur));
        cur = p;
    }
    out
}

/// Every bit sequence of length `n` read along a path down from `s`.
pub fn downpaths(c: &Cactus, s: usize, n: usize) -> Vec<Vec<bool>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (_, child) in c.skeleton.children(s) {
        for mut rest in downpaths(c, child, n - 1) {
            rest.insert(0, bit(c, child));
            out.push(rest);
        }
    }
    out
}

/// All inputs gathered around `s` according to the input types of `f`.
pub fn gatherable_inputs(f: &Formula, c: &Cactus, s: usize) -> Vec<Vec<bool>> {
    let up = uppath(c, s);
    let mut acc: Vec<Vec<bool>> = vec![Vec::new()];
    for ty in &f.inputs {
        let options: Vec<Vec<bool>> = match *ty {
            InputType::Up(n) if up.len() >= n => vec![up[..n].to_vec()],
            InputType::Up(_) => Vec::new(),
            InputType::Down(n) => downpaths(c, s, n),
        };
        acc = acc
            .iter()
            .flat_map(|prefix| {
                options.iter().map(move |o| {
                    let mut v = prefix.clone();
                    v.extend(o);
                    v
                })
            })
            .collect();
    }
    acc
}

/// The expected triggering verdict: the frame fits the segment and some
/// gathered input satisfies the formula.
pub fn expected_trigger(f: &Formula, frame: Frame, c: &Cactus, s: usize) -> bool {
    let (t0, t1) = segment_form(c, s);
    frame.compatible(t0, t1) && gatherable_inputs(f, c, s).iter().any(|b| f.eval(b))
}

/// Homomorphism budget for triggering checks.
pub const TRIGGER_BUDGET: u64 = 5_000_000;

/// Is gadget `g` triggered at segment `s`: does `q⁻_TT` map into `c` with
/// `ι_g` sent to the `α` node of `s`? `c` must be a cactus of `q`.
pub fn triggered(q: &GadgetQuery, c: &Cactus, s: usize, g: usize) -> Result<bool> {
    let gadget = q.gadgets.get(g).ok_or_else(|| Error::Invalid(format!("unknown gadget id {g}")))?;
    if c.query().q.node_count() != q.query.node_count() {
        return Err(Error::Precondition("cactus was not built from this query".into()));
    }
    let seg = c
        .skeleton
        .segments
        .get(s)
        .ok_or_else(|| Error::Invalid(format!("unknown segment {s}")))?;
    if c.skeleton.children(s).is_empty() {
        return Err(Error::Precondition(format!("segment {s} is a leaf")));
    }
    let alpha = seg.nodes[q.base.alpha];
    let opts = HomOptions { anchor: Anchor::one(gadget.iota, alpha), budget: TRIGGER_BUDGET, ..Default::default() };
    Ok(hom::find(&q.q_minus_tt(), &c.graph, &opts)?.is_some())
}

/// One disagreement between [`triggered`] and [`expected_trigger`].
#[derive(Clone, Debug, Serialize)]
pub struct Violation {
    pub gadget: usize,
    pub skeleton: serde_json::Value,
    pub segment: usize,
    pub triggered: bool,
    pub expected: bool,
}

/// Outcome for one query of the suite.
#[derive(Clone, Debug, Serialize)]
pub struct CaseReport {
    pub gadgets: Vec<(String, Frame)>,
    pub query_nodes: usize,
    pub cactuses: usize,
    pub checks: usize,
    pub triggered: usize,
    pub violations: Vec<Violation>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub depth: usize,
    pub cases: Vec<CaseReport>,
    pub checks: usize,
    pub violations: usize,
}

/// Compares triggering with the gathering oracle for every gadget, every
/// cactus of depth at most `depth` and every non-leaf segment.
pub fn verify_case(gadgets: &[(Formula, Frame)], depth: usize, cap: usize) -> Result<CaseReport> {
    let q = build_query(gadgets)?;
    let cq = q.one_cq()?;
    let en = cactuses_up_to(&cq, depth, cap)?;
    if en.truncated {
        return Err(Error::CapExceeded(format!("more than {cap} cactuses of depth {depth}")));
    }
    let mut report = CaseReport {
        gadgets: gadgets.iter().map(|(f, fr)| (f.to_text().replace('\n', "; ").trim_end_matches("; ").to_string(), *fr)).collect(),
        query_nodes: q.query.node_count(),
        cactuses: en.cactuses.len(),
        checks: 0,
        triggered: 0,
        violations: Vec::new(),
    };
    for c in &en.cactuses {
        for s in 0..c.segment_count() {
            if c.skeleton.children(s).is_empty() {
                continue;
            }
            for (g, (f, frame)) in gadgets.iter().enumerate() {
                let got = triggered(&q, c, s, g)?;
                let expected = expected_trigger(f, *frame, c, s);
                report.checks += 1;
                report.triggered += usize::from(got);
                if got != expected {
                    report.violations.push(Violation { gadget: g, skeleton: c.skeleton_summary(), segment: s, triggered: got, expected });
                }
            }
        }
    }
    Ok(report)
}

/// Small formulas exercising both gate kinds, both input types, all frames
/// and the `MustBranch` family, plus multi-gadget queries whose frames agree.
pub fn default_suite() -> Vec<Vec<(Formula, Frame)>> {
    use Gate as G;
    use InputType::{Down, Up};
    let f = |g: Gate, t: Vec<InputType>| Formula::new(g, t).expect("suite formula");
    let trio = || {
        vec![
            f(G::not(G::var(0)), vec![Down(1)]),
            f(G::and(G::var(0), G::not(G::var(1))), vec![Up(1), Down(1)]),
            f(G::not(G::not(G::var(0))), vec![Down(1)]),
        ]
    };
    vec![
        vec![(f(G::not(G::var(0)), vec![Down(1)]), Frame::AA)],
        vec![(f(G::and(G::var(0), G::not(G::var(1))), vec![Up(1), Down(1)]), Frame::AA)],
        vec![(f(G::and(G::not(G::var(0)), G::var(1)), vec![Down(2)]), Frame::AT)],
        vec![(f(G::and(G::var(0), G::var(1)), vec![Up(1), Down(1)]), Frame::TA)],
        vec![(f(G::not(G::and(G::var(0), G::var(1))), vec![Down(1), Down(1)]), Frame::AA)],
        vec![(gen_mustbranch(4, 1).expect("k = 4"), Frame::AT)],
        trio().into_iter().map(|x| (x, Frame::AA)).collect(),
        trio().into_iter().map(|x| (x, Frame::AT)).collect(),
    ]
}

/// The cactus whose skeleton is a single path: segment `i + 1` is budded at
/// label `labels[i]` of segment `i`.
pub fn chain_cactus(q: &OneCq, labels: &[usize]) -> Result<Cactus> {
    let mut c = Cactus::from_query(Arc::new(q.clone()));
    for (i, &l) in labels.iter().enumerate() {
        if l == 0 || l > q.span() {
            return Err(Error::Invalid(format!("bud label {l} out of range")));
        }
        c = c.bud(c.y_in(i, l))?;
    }
    Ok(c)
}

/// Runs [`verify_case`] on each entry.
pub fn verify_suite(suite: &[Vec<(Formula, Frame)>], depth: usize, cap: usize) -> Result<SuiteReport> {
    let cases = suite.iter().map(|g| verify_case(g, depth, cap)).collect::<Result<Vec<_>>>()?;
    let checks = cases.iter().map(|c| c.checks).sum();
    let violations = cases.iter().map(|c| c.violations.len()).sum();
    Ok(SuiteReport { depth, cases, checks, violations })
}
