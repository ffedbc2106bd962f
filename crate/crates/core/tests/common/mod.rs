//! Shared fixtures and random instance generators for integration tests.
#![allow(dead_code)]

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sirup::LabelledGraph;

pub fn load(name: &str) -> LabelledGraph {
    let path = format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    LabelledGraph::parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Parameters of a random data instance.
#[derive(Clone, Debug)]
pub struct DataSpec {
    pub nodes: usize,
    pub edge_prob: f64,
    pub preds: Vec<&'static str>,
    pub max_a: usize,
}

impl DataSpec {
    pub fn new(nodes: usize, preds: &[&'static str], max_a: usize) -> DataSpec {
        DataSpec { nodes, edge_prob: 0.25, preds: preds.to_vec(), max_a }
    }
}

/// Random labelled graph: every node gets one of none, A, T, F or FT.
pub fn random_data(rng: &mut ChaCha8Rng, spec: &DataSpec) -> LabelledGraph {
    let mut g = LabelledGraph::new();
    let ids: Vec<_> = (0..spec.nodes).map(|i| g.add_node(&format!("d{i}"))).collect();
    let mut a_count = 0;
    for &v in &ids {
        match rng.gen_range(0..6) {
            0 | 1 if a_count < spec.max_a => {
                g.add_label(v, "A");
                a_count += 1;
            }
            2 => g.add_label(v, "T"),
            3 => g.add_label(v, "F"),
            4 => {
                g.add_label(v, "F");
                g.add_label(v, "T");
            }
            _ => {}
        }
    }
    for &u in &ids {
        for &v in &ids {
            for p in &spec.preds {
                if rng.gen_bool(spec.edge_prob) {
                    g.add_edge(u, v, p);
                }
            }
        }
    }
    g
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random ditree on at most `n` nodes with the given predicates and labels.
pub fn random_ditree(rng: &mut ChaCha8Rng, n: usize, preds: &[&str], labels: &[&str], label_prob: f64) -> LabelledGraph {
    let mut g = LabelledGraph::new();
    let root = g.add_node("v0");
    let mut ids = vec![root];
    for i in 1..n {
        let v = g.add_node(&format!("v{i}"));
        let p = ids[rng.gen_range(0..ids.len())];
        g.add_edge(p, v, preds[rng.gen_range(0..preds.len())]);
        ids.push(v);
    }
    for &v in &ids {
        for l in labels {
            if rng.gen_bool(label_prob) {
                g.add_label(v, l);
            }
        }
    }
    g
}

/// Proptest strategy for small random data instances.
pub fn data_strategy(max_nodes: usize, preds: &'static [&'static str], max_a: usize) -> impl Strategy<Value = LabelledGraph> {
    (1..=max_nodes, any::<u64>()).prop_map(move |(n, seed)| {
        let mut r = rng(seed);
        random_data(&mut r, &DataSpec::new(n, preds, max_a))
    })
}

/// Reference hom test: plain backtracking over source nodes in id order,
/// checking labels and every edge between assigned nodes.
pub fn naive_hom(src: &LabelledGraph, tgt: &LabelledGraph, fixed: &[(usize, usize)]) -> bool {
    fn go(src: &LabelledGraph, tgt: &LabelledGraph, fixed: &[(usize, usize)], h: &mut Vec<usize>) -> bool {
        let i = h.len();
        if i == src.node_count() {
            return true;
        }
        for c in tgt.nodes() {
            if fixed.iter().any(|&(s, t)| s == i && t != c) {
                continue;
            }
            if !src.labels(i).iter().all(|l| tgt.has_label(c, l)) {
                continue;
            }
            h.push(c);
            let ok = src.edges().iter().all(|e| {
                e.src.max(e.dst) != i || tgt.has_edge(h[e.src], h[e.dst], &e.pred)
            });
            if ok && go(src, tgt, fixed, h) {
                return true;
            }
            h.pop();
        }
        false
    }
    go(src, tgt, fixed, &mut Vec::new())
}

/// Reference certain answer: every T/F labelling of the A-nodes admits a match.
pub fn naive_certain(q: &LabelledGraph, data: &LabelledGraph, disjoint: bool) -> bool {
    let a: Vec<usize> = data.nodes().filter(|&v| data.has_label(v, "A")).collect();
    for mask in 0u64..(1 << a.len()) {
        let mut m = data.clone();
        for (i, &v) in a.iter().enumerate() {
            m.add_label(v, if mask >> i & 1 == 1 { "T" } else { "F" });
        }
        if disjoint && m.nodes().any(|v| m.has_label(v, "T") && m.has_label(v, "F")) {
            continue;
        }
        if !naive_hom(q, &m, &[]) {
            return false;
        }
    }
    true
}
