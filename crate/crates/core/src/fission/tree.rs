use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Per-layer parameters of a random reasoning tree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerParams {
    /// Probability a node is directly supplied by a retrieved document.
    pub p: f64,
    /// Probability a node is *not* wired to a given node of the layer above.
    pub q: f64,
    pub n_nodes: usize,
}

impl LayerParams {
    pub fn new(p: f64, q: f64, n_nodes: usize) -> Result<Self> {
        let lp = Self { p, q, n_nodes };
        lp.validate()?;
        Ok(lp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return domain(format!("p={} must lie in [0, 1]", self.p));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return domain(format!("q={} must lie in (0, 1)", self.q));
        }
        if self.n_nodes == 0 {
            return domain("every layer needs at least one node");
        }
        Ok(())
    }
}

/// Validates a bottom-to-top layer list: non-empty, every layer in domain,
/// and a single node at the top.
pub fn validate_layers(params: &[LayerParams]) -> Result<()> {
    let Some(top) = params.last() else {
        return domain("at least one layer is required");
    };
    for lp in params {
        lp.validate()?;
    }
    if top.n_nodes != 1 {
        return domain(format!("top layer must have exactly 1 node, got {}", top.n_nodes));
    }
    Ok(())
}

/// Layered DAG, layer 0 at the bottom. `parents[l][i]` lists the indices in
/// layer `l + 1` that node `(l, i)` feeds into; the top layer has none.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TreeTopology {
    pub layer_sizes: Vec<usize>,
    pub parents: Vec<Vec<Vec<usize>>>,
    /// Nodes that drew no edge and received one uniformly random parent.
    pub repaired: Vec<Vec<bool>>,
}

impl TreeTopology {
    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len()
    }

    pub fn top(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Builds a topology from explicit parent lists (layer 0 first). Used for
    /// hand-drawn fixtures.
    pub fn from_parents(layer_sizes: Vec<usize>, parents: Vec<Vec<Vec<usize>>>) -> Result<Self> {
        if layer_sizes.last() != Some(&1) {
            return domain("top layer must have exactly 1 node");
        }
        if parents.len() != layer_sizes.len() {
            return domain("one parent list per layer is required");
        }
        let top = layer_sizes.len() - 1;
        for (l, layer) in parents.iter().enumerate() {
            if layer.len() != layer_sizes[l] {
                return domain(format!("layer {l}: parent lists do not match layer size"));
            }
            for (i, ps) in layer.iter().enumerate() {
                if l == top {
                    if !ps.is_empty() {
                        return domain("top node cannot have parents");
                    }
                    continue;
                }
                if ps.is_empty() {
                    return domain(format!("node ({l},{i}) has no parent"));
                }
                if ps.iter().any(|&j| j >= layer_sizes[l + 1]) {
                    return domain(format!("node ({l},{i}) points outside layer {}", l + 1));
                }
            }
        }
        let repaired = layer_sizes.iter().map(|&s| vec![false; s]).collect();
        Ok(Self {
            layer_sizes,
            parents,
            repaired,
        })
    }
}

/// Samples a tree: each (child, parent) pair in consecutive layers is wired
/// with probability `1 - q` of the child's layer; a child with no edge gets
/// one uniformly random parent.
pub fn build_tree<R: Rng + ?Sized>(params: &[LayerParams], rng: &mut R) -> Result<TreeTopology> {
    validate_layers(params)?;
    let layer_sizes: Vec<usize> = params.iter().map(|lp| lp.n_nodes).collect();
    let top = layer_sizes.len() - 1;
    let mut parents = Vec::with_capacity(layer_sizes.len());
    let mut repaired = Vec::with_capacity(layer_sizes.len());
    for (l, lp) in params.iter().enumerate() {
        if l == top {
            parents.push(vec![Vec::new()]);
            repaired.push(vec![false]);
            continue;
        }
        let above = layer_sizes[l + 1];
        let mut layer_parents = Vec::with_capacity(lp.n_nodes);
        let mut layer_repaired = Vec::with_capacity(lp.n_nodes);
        for _ in 0..lp.n_nodes {
            let mut ps: Vec<usize> = (0..above).filter(|_| rng.random::<f64>() >= lp.q).collect();
            let isolated = ps.is_empty();
            if isolated {
                ps.push(rng.random_range(0..above));
            }
            layer_parents.push(ps);
            layer_repaired.push(isolated);
        }
        parents.push(layer_parents);
        repaired.push(layer_repaired);
    }
    Ok(TreeTopology {
        layer_sizes,
        parents,
        repaired,
    })
}
