//! Tree-based sequence weighting.
//!
//! Redundant sequences in an alignment would otherwise dominate the
//! weighted counts, so each sequence receives a weight from the
//! Gerstein/Sonnhammer/Chothia recursion over a UPGMA guide tree built
//! on fractional-identity distances. Weights are normalized to mean 1 and
//! broadcast across columns into a [`WeightMatrix`], the common currency
//! of every downstream weighting scheme.

use thiserror::Error;

use crate::seqdata::AnnotatedAlignment;

/// Errors raised by weighting operations.
#[derive(Debug, Error, PartialEq)]
pub enum WeightError {
    #[error("empty-input: no sequences to weight")]
    Empty,
    #[error("dimension-mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error("nonpositive-weight: value {value} at ({row}, {column})")]
    NonPositive {
        row: usize,
        column: usize,
        value: f64,
    },
}

/// Provenance of a weight matrix, tracked so combination steps cannot be
/// applied in the wrong order.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum WeightTag {
    /// Per-sequence weights broadcast across columns.
    Default,
    /// Per-residue structural weights.
    Structural,
    /// Element-wise product of a default and one or more structural
    /// matrices.
    Combined,
}

/// Dense per-cell weight matrix over an alignment (rows = sequences,
/// columns = alignment columns). All entries are finite and strictly
/// positive; gap cells carry the neutral weight 1.0 in structural
/// matrices and the sequence weight in broadcast matrices.
#[derive(Clone, PartialEq, Debug)]
pub struct WeightMatrix {
    tag: WeightTag,
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
}

impl WeightMatrix {
    /// Neutral weight stored on gap cells of structural matrices.
    pub const GAP_WEIGHT: f64 = 1.0;

    pub fn new(
        tag: WeightTag,
        n_rows: usize,
        n_cols: usize,
        values: Vec<f64>,
    ) -> Result<WeightMatrix, WeightError> {
        if n_rows == 0 || n_cols == 0 {
            return Err(WeightError::Empty);
        }
        if values.len() != n_rows * n_cols {
            return Err(WeightError::DimensionMismatch {
                context: format!(
                    "weight matrix has {} values for a {n_rows}x{n_cols} shape",
                    values.len()
                ),
            });
        }
        for (k, &v) in values.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(WeightError::NonPositive {
                    row: k / n_cols,
                    column: k % n_cols,
                    value: v,
                });
            }
        }
        Ok(WeightMatrix {
            tag,
            n_rows,
            n_cols,
            values,
        })
    }

    /// Constant matrix, e.g. the all-ones structural identity.
    pub fn filled(tag: WeightTag, n_rows: usize, n_cols: usize, value: f64) -> WeightMatrix {
        WeightMatrix::new(tag, n_rows, n_cols, vec![value; n_rows * n_cols])
            .expect("constant fill must be positive")
    }

    pub fn tag(&self) -> WeightTag {
        self.tag
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn get(&self, row: usize, column: usize) -> f64 {
        self.values[row * self.n_cols + column]
    }

    pub(crate) fn set(&mut self, row: usize, column: usize, value: f64) {
        self.values[row * self.n_cols + column] = value;
    }

    pub(crate) fn with_tag(mut self, tag: WeightTag) -> WeightMatrix {
        self.tag = tag;
        self
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.n_cols)
    }
}

/// Binary guide tree. Nodes `0..n_leaves` are the leaves (one per
/// sequence, in alignment row order); internal nodes follow in merge
/// order with the root last. `branch` is the length of the edge to the
/// parent (0 for the root), `height` the ultrametric height of the node.
#[derive(Clone, PartialEq, Debug)]
pub struct GuideTree {
    pub nodes: Vec<TreeNode>,
    n_leaves: usize,
}

#[derive(Clone, PartialEq, Debug)]
pub struct TreeNode {
    /// `None` for leaves.
    pub children: Option<(usize, usize)>,
    pub branch: f64,
    pub height: f64,
}

impl GuideTree {
    pub fn new(nodes: Vec<TreeNode>, n_leaves: usize) -> GuideTree {
        GuideTree { nodes, n_leaves }
    }

    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    /// Leaf indices below `node`, ascending.
    pub fn leaves_under(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(v) = stack.pop() {
            match self.nodes[v].children {
                None => out.push(v),
                Some((a, b)) => {
                    stack.push(a);
                    stack.push(b);
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// Fractional-identity distances between all sequence pairs.
///
/// A column contributes only when both sequences hold a residue there;
/// the distance is `1 - matches/compared`, or 1.0 when the pair shares
/// no columns at all.
pub fn pairwise_distances(aln: &AnnotatedAlignment) -> Vec<Vec<f64>> {
    let n = aln.n_sequences();
    let mut dist = vec![vec![0.0f64; n]; n];
    for a in 0..n {
        for b in (a + 1)..n {
            let mut compared = 0u64;
            let mut matches = 0u64;
            for j in 0..aln.length() {
                if let (Some(ra), Some(rb)) =
                    (aln.cell(a, j).residue(), aln.cell(b, j).residue())
                {
                    compared += 1;
                    if ra == rb {
                        matches += 1;
                    }
                }
            }
            let d = if compared == 0 {
                1.0
            } else {
                1.0 - matches as f64 / compared as f64
            };
            dist[a][b] = d;
            dist[b][a] = d;
        }
    }
    dist
}

/// UPGMA clustering of a symmetric distance matrix.
///
/// Cluster distances are size-weighted averages; among equally close
/// pairs the lexicographically lowest `(i, k)` node-id pair merges
/// first, which makes the tree deterministic.
pub fn upgma(dist: &[Vec<f64>]) -> Result<GuideTree, WeightError> {
    let n = dist.len();
    if n == 0 {
        return Err(WeightError::Empty);
    }
    for (i, row) in dist.iter().enumerate() {
        if row.len() != n {
            return Err(WeightError::DimensionMismatch {
                context: format!("distance row {i} has length {}, expected {n}", row.len()),
            });
        }
    }

    let mut nodes: Vec<TreeNode> = (0..n)
        .map(|_| TreeNode {
            children: None,
            branch: 0.0,
            height: 0.0,
        })
        .collect();
    if n == 1 {
        return Ok(GuideTree::new(nodes, 1));
    }

    // Distances indexed by node id; rows for internal nodes are appended
    // as merges happen.
    let total = 2 * n - 1;
    let mut d = vec![vec![0.0f64; total]; total];
    for i in 0..n {
        for j in 0..n {
            d[i][j] = dist[i][j];
        }
    }
    let mut size = vec![1usize; total];
    let mut active: Vec<usize> = (0..n).collect();

    while active.len() > 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for (ai, &i) in active.iter().enumerate() {
            for &k in &active[ai + 1..] {
                let dv = d[i][k];
                let better = match best {
                    None => true,
                    Some((bd, bi, bk)) => dv < bd || (dv == bd && (i, k) < (bi, bk)),
                };
                if better {
                    best = Some((dv, i, k));
                }
            }
        }
        let (dv, i, k) = best.expect("at least one active pair");
        let new = nodes.len();
        let height = dv / 2.0;
        nodes[i].branch = (height - nodes[i].height).max(0.0);
        nodes[k].branch = (height - nodes[k].height).max(0.0);
        nodes.push(TreeNode {
            children: Some((i, k)),
            branch: 0.0,
            height,
        });
        size[new] = size[i] + size[k];
        for &other in &active {
            if other == i || other == k {
                continue;
            }
            let avg = (size[i] as f64 * d[i][other] + size[k] as f64 * d[k][other])
                / size[new] as f64;
            d[new][other] = avg;
            d[other][new] = avg;
        }
        active.retain(|&v| v != i && v != k);
        active.push(new);
    }
    Ok(GuideTree::new(nodes, n))
}

/// Tree-based sequence weights, normalized to mean 1.
///
/// Each leaf starts with its terminal branch length; each internal
/// branch is then divided among the leaves below it in proportion to the
/// weights they have accumulated so far (equally when that total is
/// zero). A tree with no positive branch at all yields uniform weights.
pub fn gsc_weights(tree: &GuideTree) -> Vec<f64> {
    let n = tree.n_leaves();
    if n == 1 {
        return vec![1.0];
    }
    let mut w = vec![0.0f64; n];
    for leaf in 0..n {
        w[leaf] = tree.nodes[leaf].branch;
    }
    for v in n..tree.nodes.len() {
        let b = tree.nodes[v].branch;
        if b == 0.0 {
            continue;
        }
        let leaves = tree.leaves_under(v);
        let total: f64 = leaves.iter().map(|&l| w[l]).sum();
        if total > 0.0 {
            for &l in &leaves {
                w[l] += b * w[l] / total;
            }
        } else {
            let share = b / leaves.len() as f64;
            for &l in &leaves {
                w[l] += share;
            }
        }
    }
    let sum: f64 = w.iter().sum();
    if sum <= 0.0 {
        return vec![1.0; n];
    }
    let scale = n as f64 / sum;
    for x in &mut w {
        *x *= scale;
    }
    w
}

/// Broadcasts per-sequence weights across all columns into a
/// [`WeightTag::Default`] matrix.
pub fn broadcast(
    weights: &[f64],
    aln: &AnnotatedAlignment,
) -> Result<WeightMatrix, WeightError> {
    if weights.len() != aln.n_sequences() {
        return Err(WeightError::DimensionMismatch {
            context: format!(
                "{} weights for {} sequences",
                weights.len(),
                aln.n_sequences()
            ),
        });
    }
    let l = aln.length();
    let mut values = Vec::with_capacity(weights.len() * l);
    for &w in weights {
        values.extend(std::iter::repeat(w).take(l));
    }
    WeightMatrix::new(WeightTag::Default, weights.len(), l, values)
}

/// GSC weights for an alignment: distances, UPGMA, recursion, broadcast.
pub fn gsc_weight_matrix(aln: &AnnotatedAlignment) -> Result<WeightMatrix, WeightError> {
    let tree = upgma(&pairwise_distances(aln))?;
    broadcast(&gsc_weights(&tree), aln)
}
