//! Gadget compiler: formula generators, query structure and triggering.

mod common;

use rand::Rng;
use regex::Regex;
use sirup::cactus::cactuses_up_to;
use sirup::gadget::*;
use sirup::tree::{is_dag, solitary_f, solitary_t};
use sirup::Error;
use Gate as G;
use InputType::{Down, Up};

fn bits(s: &str) -> Vec<bool> {
    s.chars().map(|c| c == '1').collect()
}

fn to_str(b: &[bool]) -> String {
    b.iter().map(|&x| if x { '1' } else { '0' }).collect()
}

fn not_y1() -> Formula {
    Formula::new(G::not(G::var(0)), vec![Down(1)]).unwrap()
}

#[test]
fn good_examples() {
    let f = gen_good(1).unwrap();
    assert_eq!(f.var_count(), 15);
    assert_eq!(f.inputs, vec![Up(15)]);
    assert!(f.eval(&[true; 15]));
    // reversed 0010 is 0100
    let mut b = vec![true; 15];
    b[5..9].copy_from_slice(&bits("0100"));
    assert!(!f.eval(&b));
    assert!(gen_good(0).is_err());
}

#[test]
fn good_matches_pattern_scan() {
    let mut rng = common::rng(21);
    for d in 1..=2 {
        let f = gen_good(d).unwrap();
        for _ in 0..1000 {
            let b: Vec<bool> = (0..f.var_count()).map(|_| rng.gen_bool(0.6)).collect();
            let rev = to_str(&b).chars().rev().collect::<String>();
            let scan = (0..rev.len().saturating_sub(3)).any(|i| &rev[i..i + 3] == "001");
            assert_eq!(f.eval(&b), !scan, "{}", to_str(&b));
            assert_eq!(has_reversed_001(&b), scan);
        }
    }
}

#[test]
fn mustbranch_k4_examples() {
    let f = gen_mustbranch(4, 1).unwrap();
    assert!(f.eval(&bits("0100")));
    assert!(f.eval(&bits("1100")));
    assert!(!f.eval(&bits("1111")));
    assert!(!f.eval(&bits("0010")));
}

#[test]
fn mustbranch_matches_regex_on_all_inputs() {
    for d in 1..=2usize {
        let mut alts = vec!["001.".to_string(), "001.(111.)*001".to_string()];
        if d >= 2 {
            alts.push(format!("001.(111.){{0,{}}}111", d - 2));
        }
        let re = Regex::new(&format!("^(?:{})$", alts.join("|"))).unwrap();
        for k in 4..=10 {
            let f = gen_mustbranch(k, d).unwrap();
            for x in 0..1u32 << k {
                let b: Vec<bool> = (0..k).map(|i| x >> i & 1 == 1).collect();
                let rev: String = to_str(&b).chars().rev().collect();
                assert_eq!(f.eval(&b), re.is_match(&rev), "k={k} d={d} b={}", to_str(&b));
            }
        }
    }
}

#[test]
fn mustbranch_rejects_out_of_range() {
    assert!(gen_mustbranch(3, 1).is_err());
    assert!(gen_mustbranch(16, 1).is_err());
    assert!(gen_mustbranch(15, 1).is_ok());
}

#[test]
fn formula_text_round_trip() {
    let f = Formula::parse("inputs: up 2, down 1\nformula: or(y1, and(not(y2), y3)) # comment\n").unwrap();
    assert_eq!(f.inputs, vec![Up(2), Down(1)]);
    assert_eq!(f.gate_count(), 6);
    assert_eq!(Formula::parse(&f.to_text()).unwrap(), f);
    assert!(Formula::parse("inputs: up 1\nformula: y2\n").is_err());
    assert!(Formula::parse("inputs: sideways 1\nformula: y1\n").is_err());
}

#[test]
fn not_gadget_has_expected_shape() {
    let q = build_query(&[(not_y1(), Frame::AA)]).unwrap();
    assert_eq!(solitary_f(&q.query), vec![q.base.f]);
    assert_eq!(solitary_t(&q.query), vec![q.base.t0, q.base.t1]);
    assert!(is_dag(&q.query));
    assert!(q.foc_holds());
    // only F and T remain as node labels
    assert!(q.query.unary_predicates().iter().all(|l| l == "F" || l == "T"));
}

/// Edge predicates along the unique path from `from` to `to`.
fn path_preds(q: &GadgetQuery, from: usize, to: usize) -> String {
    let g = &q.query;
    let mut cur = from;
    let mut out = String::new();
    while cur != to {
        let next: Vec<_> = g.out_edges(cur).filter(|e| g.name(e.dst).contains("_y") || e.dst == to).collect();
        assert_eq!(next.len(), 1, "chain branches at {}", g.name(cur));
        out.push_str(&next[0].pred);
        cur = next[0].dst;
    }
    out
}

#[test]
fn gathering_chains_have_expected_shape() {
    // (up 3) then (down 2), as in the worked example with five variables
    let f = Formula::new(G::and(G::var(0), G::and(G::var(2), G::var(4))), vec![Up(3), Down(2)]).unwrap();
    let q = build_query(&[(f, Frame::AA)]).unwrap();
    let g = &q.gadgets[0];
    // up: eta ... gamma, S unit after n_j - i plain units
    assert_eq!(path_preds(&q, g.eta[0], g.gamma[0]), "RRRRRRRRRRSR");
    assert_eq!(path_preds(&q, g.eta[1], g.gamma[1]), "RRRRRRSRRRRR");
    assert_eq!(path_preds(&q, g.eta[2], g.gamma[2]), "RRSRRRRRRRRR");
    // down: gamma ... eta, S unit after i - 1 plain units
    assert_eq!(path_preds(&q, g.gamma[3], g.eta[3]), "RRSRRRRR");
    assert_eq!(path_preds(&q, g.gamma[4], g.eta[4]), "RRRRRRSR");
    // the two down chains share one W-node, not the base one
    let w3: Vec<_> = q.query.successors(g.eta[3]);
    let w4: Vec<_> = q.query.successors(g.eta[4]);
    assert_eq!(w3, w4);
    assert_ne!(w3, vec![q.base.w]);
    assert!(q.query.out_edges(w3[0]).any(|e| e.pred == "W"));
}

/// Node count of a one-gadget query from the shape of its formula.
fn expected_nodes(f: &Formula, frame: Frame) -> usize {
    fn walk(g: &Gate, depth: usize, nots: &mut usize, ands: &mut usize, leaves: &mut usize, branch: &mut usize) {
        match g {
            Gate::Var(_) => {
                *leaves += 1;
                *branch += depth;
            }
            Gate::Not(c) => {
                *nots += 1;
                walk(c, depth + 1, nots, ands, leaves, branch);
            }
            Gate::And(a, b) => {
                *ands += 1;
                walk(a, depth + 1, nots, ands, leaves, branch);
                walk(b, depth + 1, nots, ands, leaves, branch);
            }
        }
    }
    let (mut nots, mut ands, mut leaves, mut branch) = (0, 0, 0, 0);
    walk(&f.root, 0, &mut nots, &mut ands, &mut leaves, &mut branch);
    let n = f.var_count();
    let base = 10;
    let frame_nodes = if frame == Frame::AA { 11 } else { 12 };
    // the root gate carries a D mark
    let main = 2 + 3 * n + 4 * leaves + 5 * nots + 18 * ands + 1;
    let chains: usize = f.inputs.iter().map(|t| t.len() * 4 * t.len() + if matches!(t, Down(_)) { 2 } else { 0 }).sum();
    let input = 5 * n + chains + 2 * ands + 4 * leaves + 3 * branch;
    base + frame_nodes + 2 * main + input
}

fn random_gate(rng: &mut impl Rng, n: usize, budget: usize) -> Gate {
    if budget == 0 || rng.gen_bool(0.25) {
        return G::var(rng.gen_range(0..n));
    }
    if rng.gen_bool(0.5) {
        G::not(random_gate(rng, n, budget - 1))
    } else {
        G::and(random_gate(rng, n, budget / 2), random_gate(rng, n, budget / 2))
    }
}

#[test]
fn node_count_follows_formula_size() {
    let mut rng = common::rng(22);
    for _ in 0..10 {
        let root = G::not(random_gate(&mut rng, 3, 6));
        let f = Formula::new(root, vec![Up(2), Down(1)]).unwrap();
        for frame in [Frame::AT, Frame::AA] {
            let q = build_query(&[(f.clone(), frame)]).unwrap();
            assert_eq!(q.query.node_count(), expected_nodes(&f, frame), "{}", f.root);
        }
    }
}

#[test]
fn assembled_queries_satisfy_foc() {
    for frame in [Frame::AT, Frame::TA, Frame::AA] {
        let q = build_query(&[(gen_mustbranch(4, 1).unwrap(), frame), (not_y1(), Frame::AA)]).unwrap();
        assert!(q.foc_holds());
        assert!(is_dag(&q.query));
    }
}

#[test]
fn build_query_rejects_bad_input() {
    assert!(build_query(&[]).is_err());
    let bare = Formula::new(G::var(0), vec![Up(1)]).unwrap();
    assert!(build_query(&[(bare, Frame::AA)]).is_err());
}

#[test]
fn triggered_errors() {
    let q = build_query(&[(not_y1(), Frame::AA)]).unwrap();
    let cq = q.one_cq().unwrap();
    let c = chain_cactus(&cq, &[1]).unwrap();
    assert!(matches!(triggered(&q, &c, 1, 0), Err(Error::Precondition(_))));
    assert!(matches!(triggered(&q, &c, 0, 3), Err(Error::Invalid(_))));
    assert!(triggered(&q, &c, 0, 0).unwrap());
}

#[test]
fn not_gadget_triggering_both_directions() {
    let f = not_y1();
    let q = build_query(&[(f.clone(), Frame::AA)]).unwrap();
    let cq = q.one_cq().unwrap();
    let en = cactuses_up_to(&cq, 2, 1000).unwrap();
    assert_eq!(en.cactuses.len(), 25);
    let (mut yes, mut no) = (0, 0);
    for c in &en.cactuses {
        for s in 0..c.segment_count() {
            if c.skeleton.children(s).is_empty() {
                continue;
            }
            let gathered = gatherable_inputs(&f, c, s);
            let satisfiable = gathered.iter().any(|b| f.eval(b));
            let got = triggered(&q, c, s, 0).unwrap();
            assert_eq!(got, satisfiable, "segment {s} of {}", c.skeleton_summary());
            // NOT y1 fires exactly when some child hangs off t0
            assert_eq!(got, segment_form(c, s).0);
            if got {
                yes += 1;
            } else {
                no += 1;
            }
        }
    }
    assert!(yes > 0 && no > 0);
}

#[test]
fn frame_type_discipline() {
    let taut = Formula::new(G::not(G::and(G::var(0), G::not(G::var(0)))), vec![Down(1)]).unwrap();
    for frame in [Frame::AT, Frame::TA] {
        let q = build_query(&[(taut.clone(), frame)]).unwrap();
        let cq = q.one_cq().unwrap();
        let mut fired = 0;
        for c in &cactuses_up_to(&cq, 2, 1000).unwrap().cactuses {
            for s in 0..c.segment_count() {
                let (t0, t1) = segment_form(c, s);
                if !t0 && !t1 {
                    continue;
                }
                let got = triggered(&q, c, s, 0).unwrap();
                match frame {
                    Frame::AT => assert_eq!(got, t0 && !t1),
                    _ => assert_eq!(got, !t0 && t1),
                }
                fired += usize::from(got);
            }
        }
        assert!(fired > 0);
    }
}

#[test]
fn mustbranch_on_deep_chains() {
    let f = gen_mustbranch(4, 1).unwrap();
    let q = build_query(&[(f.clone(), Frame::AT)]).unwrap();
    let cq = q.one_cq().unwrap();
    let mut fired = 0;
    for x in 0..16u32 {
        // labels from the root down; the last bud keeps t1 free for the AT frame
        let mut labels: Vec<usize> = (0..4).map(|k| 1 + (x >> (3 - k) & 1) as usize).collect();
        labels.push(1);
        let c = chain_cactus(&cq, &labels).unwrap();
        let got = triggered(&q, &c, 4, 0).unwrap();
        assert_eq!(got, expected_trigger(&f, Frame::AT, &c, 4), "{labels:?}");
        fired += usize::from(got);
    }
    // the path from the root must read 0 0 1 *
    assert_eq!(fired, 2);
}

#[test]
fn mixed_frames_block_each_other() {
    // when an AT gadget fires, every other frame must fold onto its own
    let taut = Formula::new(G::not(G::and(G::var(0), G::not(G::var(0)))), vec![Down(1)]).unwrap();
    let q = build_query(&[(taut.clone(), Frame::AA), (taut, Frame::AT)]).unwrap();
    let cq = q.one_cq().unwrap();
    let c = chain_cactus(&cq, &[1]).unwrap();
    assert!(triggered(&q, &c, 0, 0).unwrap());
    assert!(!triggered(&q, &c, 0, 1).unwrap());
}
