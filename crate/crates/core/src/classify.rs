//! Data complexity of d-sirups with ditree queries.
//!
//! [`classify`] cores the query, applies the counting prechecks, looks for an
//! NL-hardness witness, settles queries with one solitary F and one solitary T
//! by the FO / L / NL trichotomy, and sends other Λ-CQs to
//! [`crate::lambda::decide_fo`]. F and T play symmetric roles in
//! `T(x) ∨ F(x) ← A(x)`, so a query is also examined with the two swapped.

use std::collections::BTreeSet;

use serde::Serialize;
use serde_json::{json, Value};

use crate::cactus::{self, Witness};
use crate::cq::OneCq;
use crate::datalog::{Atom, DatalogProgram, Rule};
use crate::error::{Error, Result};
use crate::graph::{LabelledGraph, NodeId};
use crate::hom::{self, Anchor};
use crate::lambda::{self, Gluer, LambdaOptions, LambdaVerdict};
use crate::tree::{core_ditree, is_quasi_symmetric, shape, solitary_f, solitary_pairs, solitary_t, Ditree, ShapeReport, SolitaryPair};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Class {
    #[serde(rename = "FO")]
    Fo,
    #[serde(rename = "L-complete")]
    LComplete,
    #[serde(rename = "NL-complete")]
    NlComplete,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Lower {
    #[serde(rename = "L-hard")]
    LHard,
    #[serde(rename = "NL-hard")]
    NlHard,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Upper {
    #[serde(rename = "FO")]
    Fo,
    #[serde(rename = "L")]
    L,
    #[serde(rename = "NL")]
    Nl,
    #[serde(rename = "P")]
    P,
    #[serde(rename = "coNP")]
    CoNp,
}

impl Class {
    pub fn as_str(&self) -> &'static str {
        match self {
            Class::Fo => "FO",
            Class::LComplete => "L-complete",
            Class::NlComplete => "NL-complete",
        }
    }
}

impl Lower {
    pub fn as_str(&self) -> &'static str {
        match self {
            Lower::LHard => "L-hard",
            Lower::NlHard => "NL-hard",
        }
    }
}

impl Upper {
    pub fn as_str(&self) -> &'static str {
        match self {
            Upper::Fo => "FO",
            Upper::L => "L",
            Upper::Nl => "NL",
            Upper::P => "P",
            Upper::CoNp => "coNP",
        }
    }
}

/// Why a bound holds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Provenance {
    /// `exact:<class>`, `lower:<bound>` or `upper:<bound>`.
    pub bound: String,
    pub criterion: String,
    /// Index into [`Classification::witnesses`].
    pub witness: Option<usize>,
}

/// Complexity verdict with the evidence behind it.
#[derive(Clone, Debug, Serialize)]
pub struct Classification {
    pub shape: ShapeReport,
    /// The classified query is the core of the input.
    pub cored: bool,
    /// F and T were swapped before the structural criteria were applied.
    pub swapped: bool,
    pub exact: Option<Class>,
    pub lower_bounds: BTreeSet<Lower>,
    pub upper_bounds: BTreeSet<Upper>,
    pub provenance: Vec<Provenance>,
    pub witnesses: Vec<Value>,
    pub warnings: Vec<String>,
}

impl Classification {
    fn new(shape: ShapeReport) -> Self {
        Classification {
            shape,
            cored: false,
            swapped: false,
            exact: None,
            lower_bounds: BTreeSet::new(),
            upper_bounds: BTreeSet::new(),
            provenance: Vec::new(),
            witnesses: Vec::new(),
            warnings: Vec::new(),
        }
    }

    fn witness(&mut self, w: Option<Value>) -> Option<usize> {
        w.map(|w| {
            self.witnesses.push(w);
            self.witnesses.len() - 1
        })
    }

    pub fn add_upper(&mut self, u: Upper, criterion: &str, w: Option<Value>) {
        let witness = self.witness(w);
        self.upper_bounds.insert(u);
        self.provenance.push(Provenance { bound: format!("upper:{}", u.as_str()), criterion: criterion.into(), witness });
    }

    pub fn add_lower(&mut self, l: Lower, criterion: &str, w: Option<Value>) {
        let witness = self.witness(w);
        self.lower_bounds.insert(l);
        self.provenance.push(Provenance { bound: format!("lower:{}", l.as_str()), criterion: criterion.into(), witness });
    }

    /// Sets the exact class together with the bounds it entails.
    pub fn set_exact(&mut self, c: Class, criterion: &str, w: Option<Value>) {
        let witness = self.witness(w);
        self.exact = Some(c);
        self.provenance.push(Provenance { bound: format!("exact:{}", c.as_str()), criterion: criterion.into(), witness });
        let (lower, upper) = match c {
            Class::Fo => (None, Upper::Fo),
            Class::LComplete => (Some(Lower::LHard), Upper::L),
            Class::NlComplete => (Some(Lower::NlHard), Upper::Nl),
        };
        if let Some(l) = lower {
            if self.lower_bounds.insert(l) {
                self.provenance.push(Provenance { bound: format!("lower:{}", l.as_str()), criterion: criterion.into(), witness });
            }
        }
        if self.upper_bounds.insert(upper) {
            self.provenance.push(Provenance { bound: format!("upper:{}", upper.as_str()), criterion: criterion.into(), witness });
        }
    }

    /// Exact class agrees with both bound sets, and every bound is cited.
    pub fn is_consistent(&self) -> bool {
        let cited = |b: String| self.provenance.iter().any(|p| p.bound == b);
        let bounds_cited = self.lower_bounds.iter().all(|l| cited(format!("lower:{}", l.as_str())))
            && self.upper_bounds.iter().all(|u| cited(format!("upper:{}", u.as_str())));
        let exact_ok = match self.exact {
            None => true,
            Some(Class::Fo) => self.lower_bounds.is_empty() && self.upper_bounds.contains(&Upper::Fo),
            Some(Class::LComplete) => {
                !self.lower_bounds.contains(&Lower::NlHard) && self.lower_bounds.contains(&Lower::LHard) && self.upper_bounds.contains(&Upper::L)
            }
            Some(Class::NlComplete) => self.lower_bounds.contains(&Lower::NlHard) && self.upper_bounds.contains(&Upper::Nl),
        };
        bounds_cited && exact_ok
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("classification serialises")
    }
}

/// Counting criteria on solitary nodes. With `m` the smaller and `n` the
/// larger of the solitary F and solitary T counts: `m = 0` gives FO, `m = 1`
/// gives P, `m = n = 1` gives NL, and L if the query is quasi-symmetric.
/// Otherwise only coNP is known.
pub fn precheck(q: &LabelledGraph) -> Result<Classification> {
    let mut c = Classification::new(shape(q));
    let (nf, nt) = (solitary_f(q).len(), solitary_t(q).len());
    if nf == 0 {
        c.set_exact(Class::Fo, "no-solitary-F", None);
        return Ok(c);
    }
    if nt == 0 {
        c.set_exact(Class::Fo, "no-solitary-T", None);
        return Ok(c);
    }
    c.add_upper(Upper::CoNp, if nf.min(nt) >= 2 { "several-solitary-F" } else { "disjunctive-datalog" }, None);
    if nf.min(nt) == 1 {
        c.add_upper(Upper::P, if nf == 1 { "single-solitary-F" } else { "single-solitary-T" }, None);
    }
    if nf == 1 && nt == 1 {
        c.add_upper(Upper::Nl, "one-F-one-T", None);
        if c.shape.is_ditree && is_quasi_symmetric(q)? {
            c.add_upper(Upper::L, "quasi-symmetric", None);
        }
    }
    Ok(c)
}

/// An NL-hardness witness: the solitary pair the reduction from dag
/// reachability glues on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NlWitness {
    pub pair: SolitaryPair,
    /// `comparable-pair` or `non-quasi-symmetric-twin-free`.
    pub rule: String,
}

fn ids(q: &LabelledGraph, p: &SolitaryPair) -> Result<(NodeId, NodeId)> {
    Ok((q.id(&p.t)?, q.id(&p.f)?))
}

/// Searches for an NL-hardness witness in a minimal ditree query: a
/// comparable solitary pair with no solitary node strictly between, or, for
/// twin-free queries that are not quasi-symmetric, a non-symmetric
/// incomparable pair of least distance. Ties go to the least `(t, f)`.
pub fn nl_hardness(q: &LabelledGraph) -> Result<Option<NlWitness>> {
    let (_, minimal) = core_ditree(q)?;
    if !minimal {
        return Err(Error::Precondition("query is not minimal; take its core first".into()));
    }
    if solitary_f(q).is_empty() || solitary_t(q).is_empty() {
        return Err(Error::Precondition("needs a solitary F-node and a solitary T-node".into()));
    }
    let tree = Ditree::new(q)?;
    let pairs = solitary_pairs(q)?;
    let solitary: BTreeSet<NodeId> = solitary_f(q).into_iter().chain(solitary_t(q)).collect();
    for p in pairs.iter().filter(|p| p.comparable) {
        let (t, f) = ids(q, p)?;
        if tree.strictly_between(t, f).iter().all(|v| !solitary.contains(v)) {
            return Ok(Some(NlWitness { pair: p.clone(), rule: "comparable-pair".into() }));
        }
    }
    let twin_free = crate::tree::ft_twins(q).is_empty();
    if twin_free && pairs.iter().all(|p| !p.comparable) && !is_quasi_symmetric(q)? {
        let d = pairs.iter().map(|p| p.distance).min().unwrap_or(0);
        if let Some(p) = pairs.iter().find(|p| p.distance == d && !p.symmetric) {
            return Ok(Some(NlWitness { pair: p.clone(), rule: "non-quasi-symmetric-twin-free".into() }));
        }
    }
    Ok(None)
}

/// Three copies `c0, c1, c2` of a query with one solitary F `f` and one
/// solitary T `t`, glued at `t` of each copy and `f` of the previous one.
/// The four contacts (including `t` of `c0` and `f` of `c2`) lose their F and
/// T labels; the two models label all of them F or all of them T.
#[derive(Clone, Debug)]
pub struct ContactStructure {
    pub h: LabelledGraph,
    pub contacts: Vec<NodeId>,
    pub i_ff: LabelledGraph,
    pub i_tt: LabelledGraph,
}

pub fn contact_structure(q: &LabelledGraph, t: NodeId, f: NodeId) -> ContactStructure {
    let mut gl = Gluer::new();
    let copies: Vec<Vec<NodeId>> = (0..3).map(|a| gl.add(q, &format!("c{a}_"))).collect();
    gl.union(copies[1][t], copies[0][f]);
    gl.union(copies[2][t], copies[1][f]);
    let (mut h, map) = gl.finish();
    let contacts: Vec<NodeId> = vec![map[copies[0][t]], map[copies[1][t]], map[copies[2][t]], map[copies[2][f]]];
    for &c in &contacts {
        h.remove_label(c, "F");
        h.remove_label(c, "T");
    }
    let model = |label: &str| {
        let mut m = h.clone();
        for &c in &contacts {
            m.add_label(c, label);
        }
        m
    };
    let (i_ff, i_tt) = (model("F"), model("T"));
    ContactStructure { h, contacts, i_ff, i_tt }
}

/// Trichotomy for a minimal ditree query with exactly one solitary F and one
/// solitary T: comparable pair gives NL-complete, quasi-symmetric gives
/// L-complete, otherwise FO iff `q` maps into one of the contact models.
pub fn trichotomy_1f1t(q: &LabelledGraph) -> Result<Classification> {
    let mut c = precheck(q)?;
    let (fs, ts) = (solitary_f(q), solitary_t(q));
    if !c.shape.is_ditree || fs.len() != 1 || ts.len() != 1 {
        return Err(Error::Shape("trichotomy needs a ditree with one solitary F and one solitary T".into()));
    }
    let pair = solitary_pairs(q)?.remove(0);
    if pair.comparable {
        let w = serde_json::to_value(NlWitness { pair, rule: "comparable-pair".into() }).ok();
        c.set_exact(Class::NlComplete, "comparable-pair", w);
        return Ok(c);
    }
    if is_quasi_symmetric(q)? {
        c.set_exact(Class::LComplete, "quasi-symmetric", serde_json::to_value(&pair).ok());
        return Ok(c);
    }
    let cs = contact_structure(q, ts[0], fs[0]);
    let ff = hom::hom_exists(q, &cs.i_ff, &Anchor::none())?;
    let tt = if ff.is_none() { hom::hom_exists(q, &cs.i_tt, &Anchor::none())? } else { None };
    match (ff, tt) {
        (Some(h), _) | (_, Some(h)) => {
            let model = if hom::verify(q, &cs.i_ff, &h) { "I_FF" } else { "I_TT" };
            let image: Vec<String> = h.iter().map(|&v| cs.h.name(v).to_string()).collect();
            c.set_exact(Class::Fo, "contact-model-hom", Some(json!({ "model": model, "image": image })));
        }
        _ => {
            let w = json!({ "pair": pair, "models": ["I_FF", "I_TT"] });
            c.add_lower(Lower::NlHard, "contact-model-no-hom", Some(w.clone()));
            c.set_exact(Class::NlComplete, "contact-model-no-hom", Some(w));
        }
    }
    Ok(c)
}

/// A directed path `v1 → ... → vk → x` over one edge predicate whose first
/// `k` nodes are solitary T and whose last node is the solitary F, or the
/// mirror image `x → v1 → ... → vk`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct UniformChain {
    pub pred: String,
    /// Path order from the T-end to the F-node.
    pub t_nodes: Vec<String>,
    pub f_node: String,
    /// The F-node is the last node of the directed path.
    pub f_last: bool,
}

/// Recognises uniform T-chains.
pub fn uniform_chain(q: &LabelledGraph) -> Option<UniformChain> {
    let s = shape(q);
    if !s.is_path || q.binary_predicates().len() != 1 || q.node_count() < 2 {
        return None;
    }
    let pred = q.binary_predicates().into_iter().next()?;
    let tree = Ditree::new(q).ok()?;
    let mut order = vec![tree.root];
    while let Some(&c) = tree.children(*order.last()?).first() {
        order.push(c);
    }
    let only = |v: NodeId, l: &str| q.labels(v).len() == 1 && q.has_label(v, l);
    let (first, last) = (order[0], *order.last()?);
    if only(last, "F") && order[..order.len() - 1].iter().all(|&v| only(v, "T")) {
        let t_nodes = order[..order.len() - 1].iter().map(|&v| q.name(v).to_string()).collect();
        return Some(UniformChain { pred, t_nodes, f_node: q.name(last).into(), f_last: true });
    }
    if only(first, "F") && order[1..].iter().all(|&v| only(v, "T")) {
        let t_nodes = order[1..].iter().rev().map(|&v| q.name(v).to_string()).collect();
        return Some(UniformChain { pred, t_nodes, f_node: q.name(first).into(), f_last: false });
    }
    None
}

/// Linear program equivalent to the sirup of a uniform T-chain with `k`
/// T-nodes. `Qj(w)` holds when `w` ends a run of `j` consecutive derived
/// nodes; a run of length `k` derives the next A-node and the goal.
pub fn chain_program(chain: &UniformChain) -> Result<DatalogProgram> {
    let k = chain.t_nodes.len();
    let r = chain.pred.as_str();
    let edge = |from: &str, to: &str| if chain.f_last { Atom::new(r, &[from, to]) } else { Atom::new(r, &[to, from]) };
    let q = |j: usize, v: &str| Atom::new(&format!("Q{j}"), &[v]);
    let mut rules = vec![Rule { head: q(1, "w"), body: vec![Atom::new("T", &["w"])] }];
    for j in 2..=k {
        rules.push(Rule { head: q(j, "w"), body: vec![edge("v", "w"), q(j - 1, "v"), Atom::new("T", &["w"])] });
    }
    for j in 1..=k {
        rules.push(Rule { head: q(j, "w"), body: vec![Atom::new("A", &["w"]), edge("v", "w"), q(k, "v")] });
    }
    rules.push(Rule { head: Atom::new("G", &[]), body: vec![Atom::new("F", &["x"]), edge("v", "x"), q(k, "v")] });
    if r == "G" || r.starts_with('Q') {
        return Err(Error::Invalid(format!("edge predicate {r} clashes with the program's IDB names")));
    }
    DatalogProgram::new(rules, "G")
}

/// The same query with F and T exchanged.
pub fn swap_ft(q: &LabelledGraph) -> LabelledGraph {
    let mut g = q.clone();
    for v in q.nodes() {
        let (f, t) = (q.has_label(v, "F"), q.has_label(v, "T"));
        g.remove_label(v, "F");
        g.remove_label(v, "T");
        if f {
            g.add_label(v, "T");
        }
        if t {
            g.add_label(v, "F");
        }
    }
    g
}

/// Options for [`classify`].
#[derive(Clone, Debug, Default)]
pub struct ClassifyOptions {
    pub lambda: LambdaOptions,
}

fn empirical(q: &LabelledGraph, opts: &LambdaOptions) -> Result<Option<Value>> {
    let Some((d_max, probe)) = opts.probe else { return Ok(None) };
    let cq = OneCq::new(q)?;
    let w: Witness = cactus::boundedness_witness(&cq, d_max, probe, false, opts.cactus_cap)?;
    Ok(serde_json::to_value(w).ok())
}

/// Classifies `(Δq, G)`.
pub fn classify(q: &LabelledGraph, opts: &ClassifyOptions) -> Result<Classification> {
    let input_shape = shape(q);
    if !input_shape.is_ditree {
        let mut c = precheck(q)?;
        if c.exact.is_none() {
            c.warnings.push("not a ditree: only counting criteria apply".into());
            c.provenance.push(Provenance { bound: "none".into(), criterion: "no-implemented-criterion".into(), witness: None });
        }
        return Ok(c);
    }
    let (core, minimal) = core_ditree(q)?;
    let mut c = precheck(&core)?;
    c.shape = input_shape;
    if !minimal {
        c.cored = true;
        c.warnings.push(format!("query is not minimal; classified its core ({} atoms)", core.atom_count()));
    }
    if c.exact.is_some() {
        return Ok(c);
    }
    // Orient so that the query has a single solitary F whenever possible.
    let (nf, nt) = (solitary_f(&core).len(), solitary_t(&core).len());
    let q1 = if nf != 1 && nt == 1 {
        c.swapped = true;
        swap_ft(&core)
    } else {
        core.clone()
    };

    let nl = nl_hardness(&q1)?;
    if let Some(w) = nl.as_ref().filter(|_| !(nf == 1 && nt == 1)) {
        c.add_lower(Lower::NlHard, &w.rule.clone(), serde_json::to_value(w).ok());
    }

    if nf == 1 && nt == 1 {
        let mut t = trichotomy_1f1t(&q1)?;
        t.shape = c.shape;
        t.cored = c.cored;
        t.swapped = c.swapped;
        t.warnings = c.warnings;
        if let Some(w) = &nl {
            if t.exact == Some(Class::Fo) {
                return Err(Error::Invalid("FO verdict alongside an NL-hardness witness".into()));
            }
            t.add_lower(Lower::NlHard, &w.rule.clone(), serde_json::to_value(w).ok());
        }
        if t.exact == Some(Class::Fo) {
            if let Some(w) = empirical(&q1, &opts.lambda)? {
                t.witnesses.push(json!({ "empirical_boundedness": w }));
            }
        }
        return Ok(t);
    }

    let qshape = shape(&q1);
    if qshape.lambda_span.is_some() {
        let d = lambda::decide_fo(&q1, &opts.lambda)?;
        let report = d.to_json();
        match &d.verdict {
            LambdaVerdict::Fo { .. } => {
                if nl.is_some() {
                    return Err(Error::Invalid("FO verdict alongside an NL-hardness witness".into()));
                }
                c.set_exact(Class::Fo, "lambda-decision", Some(report));
            }
            LambdaVerdict::LHard { .. } => c.add_lower(Lower::LHard, "lambda-decision", Some(report)),
        }
        return Ok(c);
    }

    if let Some(chain) = uniform_chain(&q1) {
        let prog = chain_program(&chain)?;
        let w = json!({ "chain": chain, "program": prog.to_string() });
        c.add_upper(Upper::Nl, "uniform-T-chain", Some(w));
        if nl.is_some() {
            c.set_exact(Class::NlComplete, "uniform-T-chain", None);
        }
        return Ok(c);
    }

    if c.exact.is_none() {
        c.provenance.push(Provenance { bound: "none".into(), criterion: "no-implemented-criterion".into(), witness: None });
    }
    Ok(c)
}
