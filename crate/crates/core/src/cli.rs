//! Command line front end.
//!
//! [`run`] parses the arguments, dispatches to one subcommand and returns the
//! exit code with the JSON report: 0 when a verdict was produced (negative
//! ones included), 1 on input errors, 2 when a cap was hit.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::cactus::{self, cactus_count, check_focused, cactuses_up_to, ucq_rewriting, Target};
use crate::classify::{self, nl_hardness, ClassifyOptions};
use crate::cq::OneCq;
use crate::datalog::{self, build_programs, certain_answer_delta, to_schema_org};
use crate::error::{Error, Result};
use crate::gadget::{self, build_query, Formula, Frame};
use crate::graph::LabelledGraph;
use crate::lambda::{self, decide_fo, LambdaOptions, LambdaVerdict, TypeGraph};
use crate::reduce::{self, GraphInstance};
use crate::report::Report;
use crate::tree::{self, is_quasi_symmetric};

#[derive(Parser, Debug)]
#[command(name = "sirup", version, about = "Analyse monadic disjunctive sirups")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Also write the report to this file.
    #[arg(long, global = true, value_name = "FILE")]
    pub json: Option<PathBuf>,
}

/// Query file given either positionally or with `--query`.
#[derive(Args, Debug, Clone)]
pub struct QueryArg {
    /// Query file in atom-list format.
    #[arg(long = "query", value_name = "FILE")]
    query_flag: Option<PathBuf>,
    #[arg(value_name = "QUERY", conflicts_with = "query_flag")]
    query_pos: Option<PathBuf>,
}

impl QueryArg {
    fn path(&self) -> Result<&Path> {
        self.query_flag
            .as_deref()
            .or(self.query_pos.as_deref())
            .ok_or_else(|| Error::Invalid("a query file is required".into()))
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Program {
    /// Certain answer of the d-sirup.
    Delta,
    /// Certain answer with F and T disjoint.
    #[value(name = "delta+")]
    DeltaPlus,
    /// Goal program of a 1-CQ.
    Pi,
    /// Unary sirup of a 1-CQ.
    Sigma,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum RewriteTarget {
    Delta,
    Sigma,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReductionKind {
    /// Pick from the query: dag, then undirected, then blow-up.
    Auto,
    Dag,
    Undirected,
    Blowup,
}

/// Options of the FO decision shared by `classify` and `bounded`.
#[derive(Args, Debug, Clone)]
pub struct LambdaArgs {
    /// Largest span accepted by the type graph.
    #[arg(long, default_value_t = lambda::DEFAULT_MAX_SPAN)]
    max_span: usize,
    /// State budget of the exact search.
    #[arg(long, default_value_t = lambda::DEFAULT_SEARCH_CAP)]
    cap: usize,
    /// Largest depth bound tried by the empirical probe (0 disables it).
    #[arg(long, default_value_t = 3)]
    depth: usize,
    /// Depth of the cactuses probed.
    #[arg(long, default_value_t = 4)]
    probe_depth: usize,
}

impl LambdaArgs {
    fn options(&self) -> LambdaOptions {
        LambdaOptions {
            max_span: self.max_span,
            search_cap: self.cap,
            probe: (self.depth > 0).then_some((self.depth, self.probe_depth)),
            ..LambdaOptions::default()
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse a query or data file and report its shape.
    Validate {
        #[command(flatten)]
        query: QueryArg,
    },
    /// Data complexity of the d-sirup of a ditree query.
    Classify {
        #[command(flatten)]
        query: QueryArg,
        #[command(flatten)]
        lambda: LambdaArgs,
    },
    /// FO-rewritability of a Λ-CQ.
    Bounded {
        #[command(flatten)]
        query: QueryArg,
        #[command(flatten)]
        lambda: LambdaArgs,
        /// Write witness files into `--out`.
        #[arg(long)]
        emit_witness: bool,
        #[arg(long, value_name = "DIR", default_value = ".")]
        out: PathBuf,
    },
    /// Evaluate a program over data.
    Evaluate {
        #[command(flatten)]
        query: QueryArg,
        #[arg(long, value_name = "FILE")]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "delta")]
        program: Program,
        /// Largest number of A-nodes the brute-force evaluator accepts.
        #[arg(long, default_value_t = datalog::DEFAULT_MAX_A_NODES)]
        max_a_nodes: usize,
    },
    /// UCQ rewriting from all cactuses up to a depth.
    Rewrite {
        #[command(flatten)]
        query: QueryArg,
        #[arg(long, default_value_t = 2)]
        depth: usize,
        #[arg(long, value_enum, default_value = "delta")]
        program: RewriteTarget,
        /// Largest number of disjuncts.
        #[arg(long, default_value_t = cactus::DEFAULT_CAP)]
        cap: usize,
        /// Write one `.cq` file per disjunct into this directory.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Enumerate cactuses with their skeletons.
    Cactus {
        #[command(flatten)]
        query: QueryArg,
        #[arg(long, default_value_t = 2)]
        depth: usize,
        /// Largest number of cactuses.
        #[arg(long, default_value_t = cactus::DEFAULT_CAP)]
        cap: usize,
        /// Also check that cactus homs preserve the root focus.
        #[arg(long)]
        check_focus: bool,
        /// Write one `.cq` file per cactus into this directory.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Build a hardness reduction instance from a graph.
    Reduce {
        #[command(flatten)]
        query: QueryArg,
        /// Graph file: binary atoms are edges, `s(..)` and `t(..)` mark the ends.
        /// Without it a random graph is drawn.
        #[arg(long, value_name = "FILE")]
        data: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "auto")]
        kind: ReductionKind,
        /// Vertices of the random graph.
        #[arg(long, default_value_t = 5)]
        nodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = lambda::DEFAULT_MAX_SPAN)]
        max_span: usize,
        /// State budget of the FO decision used by the blow-up reduction.
        #[arg(long, default_value_t = lambda::DEFAULT_SEARCH_CAP)]
        cap: usize,
        /// Also compute the certain answer and compare with reachability.
        #[arg(long)]
        check: bool,
        #[arg(long, default_value_t = datalog::DEFAULT_MAX_A_NODES)]
        max_a_nodes: usize,
        /// Write the instance to this `.data` file.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Compile formula files into a gadget query, or run the triggering suite.
    #[command(args_conflicts_with_subcommands = true)]
    Gadget {
        #[command(subcommand)]
        action: Option<GadgetAction>,
        /// Formula files, one gadget each.
        #[arg(value_name = "FORMULA")]
        formulas: Vec<PathBuf>,
        /// Frame per formula (AT, TA or AA); a single value applies to all.
        #[arg(long, value_name = "FRAME")]
        frame: Vec<String>,
        /// Write the query to this `.cq` file.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Replace the covering axiom by a fresh binary predicate.
    SchemaOrg {
        #[command(flatten)]
        query: QueryArg,
        #[arg(long, value_name = "FILE")]
        data: PathBuf,
        #[arg(long, default_value = "Cov")]
        pred: String,
        #[arg(long, default_value_t = datalog::DEFAULT_MAX_A_NODES)]
        max_a_nodes: usize,
        /// Write the transformed data to this file.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
pub enum GadgetAction {
    /// Compare triggering with the gathering oracle on the built-in suite.
    Verify {
        #[arg(long, default_value_t = 2)]
        depth: usize,
        /// Largest number of cactuses per query.
        #[arg(long, default_value_t = 1000)]
        cap: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate { .. } => "validate",
            Command::Classify { .. } => "classify",
            Command::Bounded { .. } => "bounded",
            Command::Evaluate { .. } => "evaluate",
            Command::Rewrite { .. } => "rewrite",
            Command::Cactus { .. } => "cactus",
            Command::Reduce { .. } => "reduce",
            Command::Gadget { action: Some(_), .. } => "gadget verify",
            Command::Gadget { .. } => "gadget",
            Command::SchemaOrg { .. } => "schema-org",
        }
    }
}

/// Exit code with the text for standard output and standard error.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Runs one command line (the first item is the program name).
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            return if code == 0 {
                Outcome { code, stdout: text, stderr: String::new() }
            } else {
                Outcome { code, stdout: String::new(), stderr: text }
            };
        }
    };
    let start = Instant::now();
    let mut report = Report::new(cli.command.name());
    let result = dispatch(&cli.command, &mut report);
    report.elapsed_ms = start.elapsed().as_millis() as u64;
    let (code, value, stderr) = match result {
        Ok(()) => (report.exit_code(), report.to_json(), String::new()),
        Err(e) => {
            if let Error::CapExceeded(_) = e {
                report.cap_hit("cap");
            }
            let mut v = report.to_json();
            v["error"] = json!({ "kind": error_kind(&e), "message": e.to_string() });
            (e.exit_code(), v, format!("error: {e}\n"))
        }
    };
    let mut stdout = serde_json::to_string_pretty(&value).expect("report serialises");
    stdout.push('\n');
    if let Some(path) = &cli.json {
        if let Err(e) = std::fs::write(path, &stdout) {
            return Outcome { code: 1, stdout, stderr: format!("error: cannot write {}: {e}\n", path.display()) };
        }
    }
    Outcome { code, stdout, stderr }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Syntax { .. } => "syntax",
        Error::Arity { .. } => "arity",
        Error::NotDitree(_) => "not-ditree",
        Error::NotOneCq(_) => "not-1cq",
        Error::Shape(_) => "shape",
        Error::UnknownNode(_) => "unknown-node",
        Error::Precondition(_) => "precondition",
        Error::CapExceeded(_) => "cap-exceeded",
        Error::Invalid(_) => "invalid",
    }
}

fn load(report: &mut Report, role: &str, path: &Path) -> Result<LabelledGraph> {
    let text = report.read_input(role, path)?;
    LabelledGraph::parse(&text)
}

fn dispatch(cmd: &Command, report: &mut Report) -> Result<()> {
    match cmd {
        Command::Validate { query } => {
            let g = load(report, "input", query.path()?)?;
            report.verdict = json!({
                "nodes": g.node_count(),
                "edges": g.edge_count(),
                "atoms": g.atom_count(),
                "unary_predicates": g.unary_predicates(),
                "binary_predicates": g.binary_predicates(),
                "shape": tree::shape(&g),
            });
        }
        Command::Classify { query, lambda } => {
            let q = load(report, "query", query.path()?)?;
            let c = classify::classify(&q, &ClassifyOptions { lambda: lambda.options() })?;
            let mut v = c.to_json();
            v["summary"] = json!(summary(&c));
            report.verdict = v;
        }
        Command::Bounded { query, lambda, emit_witness, out } => {
            let q = load(report, "query", query.path()?)?;
            let d = decide_fo(&q, &lambda.options())?;
            report.verdict = d.to_json();
            if *emit_witness {
                emit_bounded_witness(report, &q, &d, out, lambda)?;
            }
        }
        Command::Evaluate { query, data, program, max_a_nodes } => {
            let q = load(report, "query", query.path()?)?;
            let d = load(report, "data", data)?;
            report.verdict = evaluate(&q, &d, *program, *max_a_nodes)?;
        }
        Command::Rewrite { query, depth, program, cap, out } => {
            let q = load(report, "query", query.path()?)?;
            let cq = OneCq::new(&q)?;
            let target = match program {
                RewriteTarget::Delta => Target::Delta,
                RewriteTarget::Sigma => Target::Sigma,
            };
            let ucq = ucq_rewriting(&cq, *depth, target, *cap)?;
            if ucq.truncated {
                report.cap_hit("cap");
            }
            let mut rows = Vec::new();
            for (i, (g, &a)) in ucq.disjuncts.iter().zip(&ucq.answer).enumerate() {
                if let Some(dir) = out {
                    report.write_witness(&dir.join(format!("disjunct_{i}.cq")), &g.to_text())?;
                }
                rows.push(json!({ "index": i, "answer": g.name(a), "atoms": g.atom_count(), "cq": g.to_text() }));
            }
            report.verdict = json!({
                "target": ucq.target,
                "depth": depth,
                "disjunct_count": ucq.disjuncts.len(),
                "truncated": ucq.truncated,
                "disjuncts": rows,
            });
        }
        Command::Cactus { query, depth, cap, check_focus, out } => {
            let q = load(report, "query", query.path()?)?;
            let cq = OneCq::new(&q)?;
            let en = cactuses_up_to(&cq, *depth, *cap)?;
            if en.truncated {
                report.cap_hit("cap");
            }
            let mut rows = Vec::new();
            for (i, c) in en.cactuses.iter().enumerate() {
                if let Some(dir) = out {
                    report.write_witness(&dir.join(format!("cactus_{i}.cq")), &c.graph.to_text())?;
                }
                rows.push(json!({ "index": i, "nodes": c.graph.node_count(), "skeleton": c.skeleton_summary() }));
            }
            let mut v = json!({
                "span": cq.span(),
                "depth": depth,
                "count": en.cactuses.len(),
                "expected_count": cactus_count(cq.span(), *depth).to_string(),
                "truncated": en.truncated,
                "cactuses": rows,
            });
            if *check_focus {
                let f = check_focused(&cq, *depth, *cap)?;
                if f.truncated {
                    report.cap_hit("cap");
                }
                v["focus"] = serde_json::to_value(f).expect("focus report serialises");
            }
            report.verdict = v;
        }
        Command::Reduce { query, data, kind, nodes, seed, max_span, cap, check, max_a_nodes, out } => {
            let q = load(report, "query", query.path()?)?;
            let kind = match kind {
                ReductionKind::Auto => auto_kind(&q)?,
                k => *k,
            };
            let directed = kind == ReductionKind::Dag;
            let g = match data {
                Some(p) => GraphInstance::from_atoms(&load(report, "graph", p)?, directed)?,
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                    if directed {
                        reduce::random_dag(&mut rng, *nodes, 2 * nodes)
                    } else {
                        reduce::random_undirected(&mut rng, *nodes, 0.3)
                    }
                }
            };
            let instance = match kind {
                ReductionKind::Dag => {
                    let w = nl_hardness(&q)?.ok_or_else(|| Error::Precondition("no NL-hardness witness".into()))?;
                    reduce::dag_reduction(&q, &w.pair, &g)?
                }
                ReductionKind::Undirected => reduce::undirected_reduction(&q, &g)?,
                _ => {
                    let opts = LambdaOptions { max_span: *max_span, search_cap: *cap, probe: None, ..LambdaOptions::default() };
                    let d = decide_fo(&q, &opts)?;
                    let LambdaVerdict::LHard { witness, .. } = &d.verdict else {
                        return Err(Error::Precondition("query is FO-rewritable; no blow-up reduction".into()));
                    };
                    reduce::blowup_reduction(&OneCq::new(&q)?, &d.type_graph, witness, &g)?
                }
            };
            let mut v = json!({
                "kind": format!("{kind:?}").to_lowercase(),
                "graph": g,
                "reachable": g.reachable(),
                "instance_nodes": instance.node_count(),
                "instance_atoms": instance.atom_count(),
                "a_nodes": instance.nodes_with_label("A").len(),
            });
            match out {
                Some(p) => report.write_witness(p, &instance.to_text())?,
                None => v["instance"] = json!(instance.to_text()),
            }
            if *check {
                let a = certain_answer_delta(&q, &instance, false, *max_a_nodes)?;
                v["answer"] = json!(a.answer);
                v["agrees"] = json!(a.answer == g.reachable());
            }
            report.verdict = v;
        }
        Command::Gadget { action: Some(GadgetAction::Verify { depth, cap }), .. } => {
            let r = gadget::verify_suite(&gadget::default_suite(), *depth, *cap)?;
            report.verdict = serde_json::to_value(r).expect("suite report serialises");
        }
        Command::Gadget { action: None, formulas, frame, out } => {
            if formulas.is_empty() {
                return Err(Error::Invalid("gadget needs at least one formula file or `verify`".into()));
            }
            if frame.len() > 1 && frame.len() != formulas.len() {
                return Err(Error::Invalid("give one frame or one per formula".into()));
            }
            let mut gadgets = Vec::new();
            for (i, p) in formulas.iter().enumerate() {
                let f = Formula::parse(&report.read_input("formula", p)?)?;
                let fr = match frame.len() {
                    0 => Frame::AA,
                    1 => Frame::parse(&frame[0])?,
                    _ => Frame::parse(&frame[i])?,
                };
                gadgets.push((f, fr));
            }
            let gq = build_query(&gadgets)?;
            let mut v = json!({
                "nodes": gq.query.node_count(),
                "atoms": gq.query.atom_count(),
                "span": gq.one_cq()?.span(),
                "focused_by_construction": gq.foc_holds(),
                "formulas": gadgets.iter().map(|(f, fr)| json!({ "formula": f.root.to_string(), "gates": f.gate_count(), "frame": fr })).collect::<Vec<_>>(),
                "gadgets": gq.gadgets,
            });
            match out {
                Some(p) => report.write_witness(p, &gq.query.to_text())?,
                None => v["query"] = json!(gq.query.to_text()),
            }
            report.verdict = v;
        }
        Command::SchemaOrg { query, data, pred, max_a_nodes, out } => {
            let q = load(report, "query", query.path()?)?;
            let d = load(report, "data", data)?;
            let s = to_schema_org(&q, pred)?;
            let d2 = s.forward(&d)?;
            let before = certain_answer_delta(&q, &d, false, *max_a_nodes)?;
            let after = s.certain_answer(&q, &d2, false, *max_a_nodes)?;
            let mut v = json!({
                "pred": pred,
                "answer": before.answer,
                "transformed_answer": after.answer,
                "agrees": before.answer == after.answer,
                "round_trip": s.backward(&d2).to_text() == d.to_text(),
            });
            match out {
                Some(p) => report.write_witness(p, &d2.to_text())?,
                None => v["transformed"] = json!(d2.to_text()),
            }
            report.verdict = v;
        }
    }
    Ok(())
}

/// The exact class, or the known bounds.
pub fn summary(c: &classify::Classification) -> String {
    if let Some(e) = c.exact {
        return e.as_str().to_string();
    }
    let lower: Vec<&str> = c.lower_bounds.iter().map(|l| l.as_str()).collect();
    let upper: Vec<&str> = c.upper_bounds.iter().map(|u| u.as_str()).collect();
    format!("lower: {}; upper: {}", join_or_none(&lower), join_or_none(&upper))
}

fn join_or_none(v: &[&str]) -> String {
    if v.is_empty() {
        "none".into()
    } else {
        v.join(", ")
    }
}

fn evaluate(q: &LabelledGraph, d: &LabelledGraph, program: Program, max_a: usize) -> Result<Value> {
    Ok(match program {
        Program::Delta | Program::DeltaPlus => {
            let a = certain_answer_delta(q, d, program == Program::DeltaPlus, max_a)?;
            serde_json::to_value(a).expect("answer serialises")
        }
        Program::Pi | Program::Sigma => {
            let p = build_programs(q)?;
            let prog = if program == Program::Pi { &p.pi } else { &p.sigma };
            let c = datalog::fixpoint(prog, d);
            let mut facts: Vec<&str> = c.facts("P").into_iter().map(|v| d.name(v)).collect();
            facts.sort();
            json!({
                "program": prog.to_string(),
                "answer": if program == Program::Pi { json!(c.goal(prog)) } else { json!(facts) },
                "p_facts": facts,
                "rounds": c.rounds,
            })
        }
    })
}

fn auto_kind(q: &LabelledGraph) -> Result<ReductionKind> {
    if matches!(nl_hardness(q), Ok(Some(_))) {
        return Ok(ReductionKind::Dag);
    }
    if tree::solitary_f(q).len() == 1 && tree::solitary_t(q).len() == 1 && is_quasi_symmetric(q)? {
        return Ok(ReductionKind::Undirected);
    }
    if tree::shape(q).lambda_span.is_some() {
        return Ok(ReductionKind::Blowup);
    }
    Err(Error::Precondition("no reduction applies to this query".into()))
}

fn emit_bounded_witness(
    report: &mut Report,
    q: &LabelledGraph,
    d: &lambda::LambdaDecision,
    out: &Path,
    args: &LambdaArgs,
) -> Result<()> {
    let cq = OneCq::new(q)?;
    match &d.verdict {
        LambdaVerdict::LHard { witness, .. } => {
            let tg: &TypeGraph = &d.type_graph;
            let text = serde_json::to_string_pretty(&witness.to_json(tg)).expect("structure serialises");
            report.write_witness(&out.join("periodic_structure.json"), &text)?;
            report.write_witness(&out.join("b_bar.data"), &witness.b_bar(&cq, tg).graph.to_text())?;
            report.write_witness(&out.join("p_bar.data"), &witness.p_bar(&cq, tg).graph.to_text())?;
        }
        LambdaVerdict::Fo { empirical_bound, .. } => {
            let depth = empirical_bound.unwrap_or(0);
            let ucq = ucq_rewriting(&cq, depth, Target::Delta, cactus::DEFAULT_CAP)?;
            if ucq.truncated {
                report.cap_hit("cap");
            }
            for (i, g) in ucq.disjuncts.iter().enumerate() {
                report.write_witness(&out.join(format!("rewriting_{i}.cq")), &g.to_text())?;
            }
            if empirical_bound.is_none() && args.depth > 0 {
                report.verdict["witness_note"] = json!("no empirical bound found; rewriting files hold depth 0 only");
            }
        }
    }
    Ok(())
}
