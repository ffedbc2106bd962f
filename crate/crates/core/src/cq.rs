//! 1-CQs: queries with exactly one solitary F-node.

use crate::error::{Error, Result};
use crate::graph::{LabelledGraph, NodeId};
use crate::tree::{solitary_f, solitary_t};

/// A query with its solitary F-node `x` and solitary T-nodes `ys`
/// (sorted by name, so `ys[i]` is bud label `i + 1`).
#[derive(Clone, Debug)]
pub struct OneCq {
    pub q: LabelledGraph,
    pub x: NodeId,
    pub ys: Vec<NodeId>,
}

impl OneCq {
    pub fn new(q: &LabelledGraph) -> Result<OneCq> {
        let fs = solitary_f(q);
        if fs.len() != 1 {
            return Err(Error::NotOneCq(format!("{} solitary F-nodes", fs.len())));
        }
        Ok(OneCq { q: q.clone(), x: fs[0], ys: solitary_t(q) })
    }

    pub fn span(&self) -> usize {
        self.ys.len()
    }

    pub fn x_name(&self) -> &str {
        self.q.name(self.x)
    }

    /// Label number (1-based) of a solitary T node.
    pub fn label_of(&self, y: NodeId) -> Option<usize> {
        self.ys.iter().position(|&v| v == y).map(|i| i + 1)
    }

    /// Copy of `q` where the focus gets `focus_label` instead of F (or loses F
    /// when `None`), and `ys[i]` is relabelled per `ys_label[i]` (None drops T).
    pub fn variant(&self, focus_label: Option<&str>, ys_label: &[Option<&str>]) -> LabelledGraph {
        let mut g = self.q.clone();
        g.remove_label(self.x, "F");
        if let Some(l) = focus_label {
            g.add_label(self.x, l);
        }
        for (i, &y) in self.ys.iter().enumerate() {
            g.remove_label(y, "T");
            if let Some(l) = ys_label.get(i).copied().flatten() {
                g.add_label(y, l);
            }
        }
        g
    }

    /// Segment copy: focus labelled F (root) or A, and the solitary T-nodes in
    /// `budded` (1-based labels) relabelled A.
    pub fn segment(&self, root: bool, budded: &[usize]) -> LabelledGraph {
        let labels: Vec<Option<&str>> =
            (1..=self.span()).map(|i| Some(if budded.contains(&i) { "A" } else { "T" })).collect();
        self.variant(Some(if root { "F" } else { "A" }), &labels)
    }

    /// `q⁻`: q without F(x) and without the T(y_i).
    pub fn q_minus(&self) -> LabelledGraph {
        self.variant(None, &vec![None; self.span()])
    }
}
