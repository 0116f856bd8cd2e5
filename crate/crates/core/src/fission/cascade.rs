use rand::Rng;
use serde::Serialize;

use super::tree::{LayerParams, TreeTopology};
use crate::error::{domain, Result};

/// Per-node flags: `retrieved[l][i]` is set when node `(l, i)` is supplied by
/// a retrieved document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RetrievalMark {
    pub retrieved: Vec<Vec<bool>>,
}

impl RetrievalMark {
    pub fn none(tree: &TreeTopology) -> Self {
        Self {
            retrieved: tree.layer_sizes.iter().map(|&s| vec![false; s]).collect(),
        }
    }

    pub fn from_nodes(tree: &TreeTopology, nodes: &[(usize, usize)]) -> Result<Self> {
        let mut marks = Self::none(tree);
        for &(l, i) in nodes {
            match marks.retrieved.get_mut(l).and_then(|layer| layer.get_mut(i)) {
                Some(flag) => *flag = true,
                None => return domain(format!("node ({l},{i}) is not in the tree")),
            }
        }
        Ok(marks)
    }
}

pub fn apply_retrieval<R: Rng + ?Sized>(
    tree: &TreeTopology,
    params: &[LayerParams],
    rng: &mut R,
) -> Result<RetrievalMark> {
    if params.len() != tree.num_layers() {
        return domain(format!(
            "{} layer parameters for a {}-layer tree",
            params.len(),
            tree.num_layers()
        ));
    }
    let retrieved = tree
        .layer_sizes
        .iter()
        .zip(params)
        .map(|(&size, lp)| (0..size).map(|_| rng.random::<f64>() < lp.p).collect())
        .collect();
    Ok(RetrievalMark { retrieved })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ErasureCause {
    Retrieved,
    /// Every parent was erased.
    Cascaded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErasureState {
    pub cause: Vec<Vec<Option<ErasureCause>>>,
    pub t_per_layer: Vec<f64>,
}

impl ErasureState {
    pub fn is_erased(&self, layer: usize, node: usize) -> bool {
        self.cause[layer][node].is_some()
    }

    /// Layers still to be reasoned through: the index of the lowest layer
    /// above every fully erased layer. A fully erased layer `l` removes all
    /// layers at or below it.
    pub fn effective_depth(&self) -> usize {
        let total = self.t_per_layer.len();
        match self.t_per_layer.iter().rposition(|&t| t >= 1.0) {
            Some(l) => total - (l + 1),
            None => total,
        }
    }
}

/// Single top-down sweep: a node is erased when retrieved, or when all of
/// its parents are erased. Retrieval takes precedence as the recorded cause.
pub fn propagate_fission(tree: &TreeTopology, marks: &RetrievalMark) -> Result<ErasureState> {
    let shaped = marks.retrieved.len() == tree.num_layers()
        && marks
            .retrieved
            .iter()
            .zip(&tree.layer_sizes)
            .all(|(layer, &size)| layer.len() == size);
    if !shaped {
        return domain("retrieval marks do not match tree shape");
    }
    let top = tree.top();
    let mut cause: Vec<Vec<Option<ErasureCause>>> = vec![Vec::new(); tree.num_layers()];
    for l in (0..=top).rev() {
        cause[l] = (0..tree.layer_sizes[l])
            .map(|i| {
                if marks.retrieved[l][i] {
                    Some(ErasureCause::Retrieved)
                } else if l < top && tree.parents[l][i].iter().all(|&j| cause[l + 1][j].is_some())
                {
                    Some(ErasureCause::Cascaded)
                } else {
                    None
                }
            })
            .collect();
    }
    let t_per_layer = cause
        .iter()
        .map(|layer| layer.iter().filter(|c| c.is_some()).count() as f64 / layer.len() as f64)
        .collect();
    Ok(ErasureState { cause, t_per_layer })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fission::tree::build_tree;
    use crate::rng;

    /// Four-layer fixture reconstructed from the prose description of the
    /// classic example: retrieval hits u(2,0), u(1,1) and u(2,2); u(1,0) feeds
    /// only u(2,0); u(1,2) and u(1,3) feed only u(2,2). Layer 0 has two nodes,
    /// u(0,1) feeding only u(1,1).
    pub(crate) fn figure_fixture() -> (TreeTopology, RetrievalMark) {
        let tree = TreeTopology::from_parents(
            vec![2, 4, 3, 1],
            vec![
                vec![vec![0, 3], vec![1]],
                vec![vec![0], vec![1], vec![2], vec![2]],
                vec![vec![0], vec![0], vec![0]],
                vec![vec![]],
            ],
        )
        .unwrap();
        let marks = RetrievalMark::from_nodes(&tree, &[(2, 0), (1, 1), (2, 2)]).unwrap();
        (tree, marks)
    }

    #[test]
    fn figure_example_erases_layer_one() {
        let (tree, marks) = figure_fixture();
        let state = propagate_fission(&tree, &marks).unwrap();
        assert_eq!(state.t_per_layer[1], 1.0);
        assert_eq!(state.cause[1][0], Some(ErasureCause::Cascaded));
        assert_eq!(state.cause[1][1], Some(ErasureCause::Retrieved));
        assert_eq!(state.t_per_layer[0], 1.0);
        assert_eq!(state.effective_depth(), 2);
    }

    #[test]
    fn no_marks_no_erasure() {
        let params: Vec<_> = [6, 4, 1]
            .iter()
            .map(|&n| LayerParams::new(0.0, 0.5, n).unwrap())
            .collect();
        let mut r = rng::stream(9, 0);
        let tree = build_tree(&params, &mut r).unwrap();
        let marks = apply_retrieval(&tree, &params, &mut r).unwrap();
        assert!(marks.retrieved.iter().flatten().all(|&m| !m));
        let state = propagate_fission(&tree, &marks).unwrap();
        assert!(state.t_per_layer.iter().all(|&t| t == 0.0));
        assert_eq!(state.effective_depth(), 3);
    }

    #[test]
    fn full_retrieval_erases_everything() {
        let params: Vec<_> = [6, 4, 1]
            .iter()
            .map(|&n| LayerParams::new(1.0, 0.5, n).unwrap())
            .collect();
        let mut r = rng::stream(9, 1);
        let tree = build_tree(&params, &mut r).unwrap();
        let marks = apply_retrieval(&tree, &params, &mut r).unwrap();
        let state = propagate_fission(&tree, &marks).unwrap();
        assert!(state.t_per_layer.iter().all(|&t| t == 1.0));
        assert_eq!(state.effective_depth(), 0);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let (tree, _) = figure_fixture();
        let bad = RetrievalMark {
            retrieved: vec![vec![false; 2]],
        };
        assert!(propagate_fission(&tree, &bad).is_err());
        assert!(RetrievalMark::from_nodes(&tree, &[(3, 1)]).is_err());
    }
}
