//! Acceptance criteria: one PASS/FAIL line each, tolerances pinned below.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

mod common;

use std::time::{Duration, Instant};

use rand::Rng;
use serde_json::Value;
use sirup::cactus::{check_focused, ucq_rewriting, Target, DEFAULT_CAP};
use sirup::classify::nl_hardness;
use sirup::cq::OneCq;
use sirup::datalog::{build_programs, certain_answer_delta, fixpoint, fixpoint_naive};
use sirup::gadget::{default_suite, gen_mustbranch, verify_suite};
use sirup::hom::{ditree_hom, find, Anchor, HomOptions};
use sirup::lambda::{check_h_conditions, decide_fo, enumerate_structures, LambdaOptions, LambdaVerdict, TypeGraph};
use sirup::reduce::{blowup_reduction, dag_reduction, random_dag, random_undirected, undirected_reduction};
use sirup::tree::{core_ditree, shape};
use sirup::LabelledGraph;

/// Wall-clock limit for classifying all fixtures through the CLI.
const FIXTURE_LIMIT: Duration = Duration::from_secs(30);
/// Wall-clock limit for the oracle equivalence sweep.
const ORACLE_LIMIT: Duration = Duration::from_secs(300);
/// Random (1-CQ, data) pairs compared between Π and Δ.
const EVAL_PAIRS: usize = 200;
/// Largest number of A-nodes in random data.
const MAX_A: usize = 10;
/// Random instances per rewriting.
const REWRITE_INSTANCES: usize = 100;
/// Span-one queries the Λ decision is checked on.
const MIN_SPAN_ONE: usize = 10;
/// Random graphs per reduction.
const GRAPHS: usize = 20;
/// Largest random graph fed to a reduction.
const MAX_GRAPH_NODES: usize = 6;
/// Cactus depth and cap for the gadget suite.
const GADGET_DEPTH: usize = 2;
const GADGET_CAP: usize = 1000;
/// Random cases per oracle comparison.
const ORACLE_CASES: usize = 200;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixture(name: &str) -> String {
    format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn delta(q: &LabelledGraph, d: &LabelledGraph) -> Result<bool, String> {
    certain_answer_delta(q, d, false, 22).map(|c| c.answer).map_err(|e| e.to_string())
}

fn random_one_cq(rng: &mut rand_chacha::ChaCha8Rng) -> LabelledGraph {
    loop {
        let n = rng.gen_range(2..8);
        let q = common::random_ditree(rng, n, &["R", "S"], &["F", "T"], 0.35);
        if OneCq::new(&q).is_ok() {
            return q;
        }
    }
}

fn fixture_classes() -> Outcome {
    let want = [
        ("q1.cq", None),
        ("q2.cq", None),
        ("q3.cq", Some("NL-complete")),
        ("q4.cq", Some("L-complete")),
        ("q5.cq", Some("FO")),
        ("q6.cq", Some("FO")),
        ("q7.cq", Some("FO")),
        ("q8.cq", Some("FO")),
    ];
    let start = Instant::now();
    for (name, exact) in want {
        let out = sirup::cli::run(["sirup", "classify", &fixture(name)]);
        ensure(out.code == 0, || format!("{name}: exit {}", out.code))?;
        let r: Value = serde_json::from_str(&out.stdout).map_err(|e| e.to_string())?;
        let v = &r["verdict"];
        match exact {
            Some(c) => ensure(v["exact"] == c, || format!("{name}: {}", v["summary"]))?,
            None => ensure(v["exact"].is_null(), || format!("{name}: {}", v["summary"]))?,
        }
    }
    let r: Value = serde_json::from_str(&sirup::cli::run(["sirup", "classify", &fixture("q1.cq")]).stdout).unwrap();
    ensure(r["verdict"]["upper_bounds"] == serde_json::json!(["coNP"]), || "q1 upper bounds".into())?;
    let r: Value = serde_json::from_str(&sirup::cli::run(["sirup", "classify", &fixture("q2.cq")]).stdout).unwrap();
    let ups = r["verdict"]["upper_bounds"].as_array().cloned().unwrap_or_default();
    ensure(ups.iter().any(|u| u == "P"), || "q2 lacks P".into())?;
    let took = start.elapsed();
    ensure(took < FIXTURE_LIMIT, || format!("took {took:?}"))?;
    Ok(format!("8 fixtures in {} ms", took.as_millis()))
}

fn evaluator() -> Outcome {
    let (q2, d2) = (common::load("q2.cq"), common::load("d2.data"));
    ensure(delta(&q2, &d2)?, || "q2 over d2 should be yes".into())?;
    let (q1, d1) = (common::load("q1.cq"), common::load("d1.data"));
    ensure(delta(&q1, &d1)? == common::naive_certain(&q1, &d1, false), || "q1 over d1".into())?;
    let mut rng = common::rng(101);
    let mut yes = 0;
    for _ in 0..EVAL_PAIRS {
        let q = random_one_cq(&mut rng);
        let n = rng.gen_range(1..=12);
        let d = common::random_data(&mut rng, &common::DataSpec::new(n, &["R", "S"], MAX_A));
        let p = build_programs(&q).map_err(|e| e.to_string())?;
        let pi = fixpoint(&p.pi, &d).goal(&p.pi);
        let dl = delta(&q, &d)?;
        let naive = common::naive_certain(&q, &d, false);
        ensure(pi == dl && dl == naive, || format!("pi {pi}, delta {dl}, naive {naive}: {} over {}", q.to_text(), d.to_text()))?;
        yes += usize::from(dl);
    }
    ensure(yes > 0 && yes < EVAL_PAIRS, || format!("degenerate sample: {yes} yes"))?;
    Ok(format!("{EVAL_PAIRS} random pairs, {yes} yes"))
}

fn rewriting() -> Outcome {
    let mut rng = common::rng(102);
    let mut detail = Vec::new();
    for (name, depth, size) in [("q5.cq", 1, 2), ("q8.cq", 2, 3)] {
        let q = common::load(name);
        let cq = OneCq::new(&q).map_err(|e| e.to_string())?;
        let ucq = ucq_rewriting(&cq, depth, Target::Delta, DEFAULT_CAP).map_err(|e| e.to_string())?;
        ensure(ucq.disjuncts.len() == size && !ucq.truncated, || format!("{name}: {} disjuncts", ucq.disjuncts.len()))?;
        let mut yes = 0;
        for _ in 0..REWRITE_INSTANCES {
            let n = rng.gen_range(1..=12);
            let d = common::random_data(&mut rng, &common::DataSpec::new(n, &["R"], MAX_A));
            let a = ucq.holds(&d).map_err(|e| e.to_string())?;
            let b = delta(&q, &d)?;
            ensure(a == b, || format!("{name}: rewriting {a}, evaluator {b} on {}", d.to_text()))?;
            yes += usize::from(a);
        }
        detail.push(format!("{name} d={depth} {size} disjuncts ({yes} yes)"));
    }
    Ok(detail.join(", "))
}

fn focus() -> Outcome {
    let q5 = OneCq::new(&common::load("q5.cq")).map_err(|e| e.to_string())?;
    let r5 = check_focused(&q5, 2, DEFAULT_CAP).map_err(|e| e.to_string())?;
    ensure(r5.focused && !r5.truncated, || "q5 should be focused".into())?;
    let q6 = OneCq::new(&common::load("q6.cq")).map_err(|e| e.to_string())?;
    let r6 = check_focused(&q6, 2, DEFAULT_CAP).map_err(|e| e.to_string())?;
    let cx = r6.counterexample.ok_or("q6 should be unfocused")?;
    ensure(cx.image.ends_with("_ft"), || format!("q6 focus image {}", cx.image))?;
    Ok(format!("q5 focused, q6 focus sent to {}", cx.image))
}

const SPAN_ONE: &[&str] = &[
    "R(y,x). F(x). R(y,z). T(z).",
    "R(y,x). F(x). S(y,z). T(z).",
    "R(y,x). F(x). R(y,w). R(w,z). T(z).",
    "R(y,a). R(a,x). F(x). R(y,b). R(b,z). T(z).",
    "R(y,x). F(x). R(y,z). T(z). R(y,u). F(u). T(u).",
    "R(y,x). F(x). R(y,z). T(z). R(z,u). F(u). T(u).",
    "R(y,x). F(x). R(x,u). T(u). F(u). R(y,z). T(z).",
    "S(y,x). F(x). R(y,z). T(z). R(y,w). F(w). T(w).",
    "R(y,x). F(x). R(y,m). T(m). F(m). R(m,z). T(z).",
    "R(y,x). F(x). R(y,m). R(m,z). T(z). S(m,u). F(u). T(u).",
];

fn lambda_agreement() -> Outcome {
    let tg = TypeGraph::new(1, 6).map_err(|e| e.to_string())?;
    let mut queries: Vec<LabelledGraph> = ["q4.cq", "q5.cq", "q8.cq"].iter().map(|n| common::load(n)).collect();
    for t in SPAN_ONE {
        queries.push(LabelledGraph::parse(t).map_err(|e| e.to_string())?);
    }
    ensure(queries.len() >= MIN_SPAN_ONE, || "too few queries".into())?;
    let opts = LambdaOptions { probe: None, ..LambdaOptions::default() };
    let mut rng = common::rng(103);
    let (mut fo, mut hard) = (0, 0);
    for q in &queries {
        ensure(shape(q).lambda_span == Some(1), || format!("span of {}", q.to_text()))?;
        let cq = OneCq::new(q).map_err(|e| e.to_string())?;
        let d = decide_fo(q, &opts).map_err(|e| e.to_string())?;
        let structures = enumerate_structures(&cq, &tg, 100_000).map_err(|e| e.to_string())?;
        let mut oracle = true;
        for ps in &structures {
            oracle &= check_h_conditions(&cq, &tg, ps).map_err(|e| e.to_string())?.any_of_first_three();
        }
        ensure(d.is_fo() == oracle, || format!("decision {} vs conditions {oracle}: {}", d.is_fo(), q.to_text()))?;
        let LambdaVerdict::LHard { witness, .. } = &d.verdict else {
            fo += 1;
            continue;
        };
        hard += 1;
        for _ in 0..GRAPHS {
            let n = rng.gen_range(2..=MAX_GRAPH_NODES);
            let g = random_undirected(&mut rng, n, 0.3);
            let data = blowup_reduction(&cq, &tg, witness, &g).map_err(|e| e.to_string())?;
            let ans = delta(q, &data)?;
            ensure(ans == g.reachable(), || format!("blow-up of {} on {g:?}", q.to_text()))?;
        }
    }
    ensure(fo > 0 && hard > 0, || "both verdicts should occur".into())?;
    Ok(format!("{} span-one queries ({fo} FO, {hard} L-hard), {GRAPHS} graphs per L-hard case", queries.len()))
}

fn nl_and_l_reductions() -> Outcome {
    let mut rng = common::rng(104);
    let q3 = common::load("q3.cq");
    let w = nl_hardness(&q3).map_err(|e| e.to_string())?.ok_or("q3 has no NL witness")?;
    let mut reach = 0;
    for _ in 0..GRAPHS {
        let n = rng.gen_range(2..=MAX_GRAPH_NODES);
        let g = random_dag(&mut rng, n, 2 * n);
        let d = dag_reduction(&q3, &w.pair, &g).map_err(|e| e.to_string())?;
        ensure(delta(&q3, &d)? == g.reachable(), || format!("dag reduction on {g:?}"))?;
        reach += usize::from(g.reachable());
    }
    let q4 = common::load("q4.cq");
    for _ in 0..GRAPHS {
        let n = rng.gen_range(2..=MAX_GRAPH_NODES);
        let g = random_undirected(&mut rng, n, 0.3);
        let d = undirected_reduction(&q4, &g).map_err(|e| e.to_string())?;
        ensure(delta(&q4, &d)? == g.reachable(), || format!("undirected reduction on {g:?}"))?;
        reach += usize::from(g.reachable());
    }
    ensure(reach > 0 && reach < 2 * GRAPHS, || "degenerate graphs".into())?;
    Ok(format!("q3 dag and q4 undirected, {GRAPHS} graphs each, {reach} reachable"))
}

fn gadgets() -> Outcome {
    let suite = default_suite();
    let formulas: usize = suite.iter().map(|c| c.len()).sum();
    ensure(formulas >= 3, || "suite too small".into())?;
    let mb = gen_mustbranch(4, 1).map_err(|e| e.to_string())?.to_text();
    let mustbranch = suite.iter().flatten().any(|(f, _)| f.to_text() == mb);
    ensure(mustbranch, || "MustBranch(4) missing".into())?;
    let r = verify_suite(&suite, GADGET_DEPTH, GADGET_CAP).map_err(|e| e.to_string())?;
    ensure(r.violations == 0 && r.checks > 0, || format!("{} violations", r.violations))?;
    Ok(format!("{formulas} formulas, {} checks, 0 violations", r.checks))
}

fn brute_core_size(g: &LabelledGraph) -> usize {
    let n = g.node_count();
    (1u32..(1 << n))
        .filter(|mask| {
            let keep: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
            common::naive_hom(g, &g.induced(&keep), &[])
        })
        .map(|m| m.count_ones() as usize)
        .min()
        .unwrap_or(n)
}

fn oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = common::rng(105);
    let backtracking = HomOptions { force_backtracking: true, ..HomOptions::default() };
    for _ in 0..ORACLE_CASES {
        let n = rng.gen_range(1..=6);
        let src = common::random_ditree(&mut rng, n, &["R", "S"], &["F", "T"], 0.3);
        let m = rng.gen_range(1..=6);
        let tgt = common::random_data(&mut rng, &common::DataSpec { nodes: m, edge_prob: 0.3, preds: vec!["R", "S"], max_a: 0 });
        let a = ditree_hom(&src, &tgt, &Anchor::none()).map_err(|e| e.to_string())?.is_some();
        let b = find(&src, &tgt, &backtracking).map_err(|e| e.to_string())?.is_some();
        ensure(a == b, || format!("hom {} into {}", src.to_text(), tgt.to_text()))?;
    }
    for _ in 0..ORACLE_CASES {
        let q = random_one_cq(&mut rng);
        let n = rng.gen_range(1..=8);
        let d = common::random_data(&mut rng, &common::DataSpec::new(n, &["R", "S"], MAX_A));
        let p = build_programs(&q).map_err(|e| e.to_string())?;
        for prog in [&p.pi, &p.sigma] {
            let (x, y) = (fixpoint(prog, &d), fixpoint_naive(prog, &d, None));
            ensure(x.unary == y.unary && x.nullary == y.nullary, || format!("fixpoints of {} on {}", q.to_text(), d.to_text()))?;
        }
    }
    for _ in 0..ORACLE_CASES {
        let n = rng.gen_range(1..=7);
        let g = common::random_ditree(&mut rng, n, &["R", "S"], &["F", "T"], 0.3);
        let (core, _) = core_ditree(&g).map_err(|e| e.to_string())?;
        ensure(core.node_count() == brute_core_size(&g), || format!("core of {}", g.to_text()))?;
    }
    let took = start.elapsed();
    ensure(took < ORACLE_LIMIT, || format!("took {took:?}"))?;
    Ok(format!("{ORACLE_CASES} cases each for hom, fixpoint and core in {} ms", took.as_millis()))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("fixture-classes", fixture_classes),
        ("evaluator", evaluator),
        ("rewriting", rewriting),
        ("focus", focus),
        ("lambda-agreement", lambda_agreement),
        ("reductions", nl_and_l_reductions),
        ("gadgets", gadgets),
        ("oracles", oracles),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                println!("FAIL {name}: {why}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
