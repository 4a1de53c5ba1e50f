//! Least-squares regression trees shared by the forest and the boosted
//! ensemble. On 0/1 targets the variance criterion equals Gini impurity.

use rand::seq::index::sample;
use rand::Rng;

use super::Row;

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features tried per split; `None` tries all of them.
    pub max_features: Option<usize>,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &Row) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Grows a tree on `indices` (repeats allowed, as in a bootstrap sample).
/// Splits minimize the summed squared error of `targets`; `leaf` maps the
/// samples reaching a leaf to its value.
pub fn fit_tree<R: Rng>(
    x: &[Row],
    targets: &[f64],
    indices: Vec<usize>,
    params: &TreeParams,
    rng: &mut R,
    leaf: &dyn Fn(&[usize]) -> f64,
) -> Tree {
    let mut tree = Tree { nodes: Vec::new() };
    grow(&mut tree, x, targets, indices, 0, params, rng, leaf);
    tree
}

#[allow(clippy::too_many_arguments)]
fn grow<R: Rng>(
    tree: &mut Tree,
    x: &[Row],
    targets: &[f64],
    indices: Vec<usize>,
    depth: usize,
    params: &TreeParams,
    rng: &mut R,
    leaf: &dyn Fn(&[usize]) -> f64,
) -> usize {
    let id = tree.nodes.len();
    tree.nodes.push(Node::Leaf(0.0));
    let split = if depth < params.max_depth && indices.len() >= 2 * params.min_samples_leaf.max(1) {
        best_split(x, targets, &indices, params, rng)
    } else {
        None
    };
    match split {
        None => tree.nodes[id] = Node::Leaf(leaf(&indices)),
        Some((feature, threshold)) => {
            let (l, r): (Vec<usize>, Vec<usize>) = indices.iter().partition(|&&i| x[i][feature] <= threshold);
            let left = grow(tree, x, targets, l, depth + 1, params, rng, leaf);
            let right = grow(tree, x, targets, r, depth + 1, params, rng, leaf);
            tree.nodes[id] = Node::Split { feature, threshold, left, right };
        }
    }
    id
}

fn best_split<R: Rng>(
    x: &[Row],
    targets: &[f64],
    indices: &[usize],
    params: &TreeParams,
    rng: &mut R,
) -> Option<(usize, f64)> {
    let n_features = x[indices[0]].len();
    let features: Vec<usize> = match params.max_features {
        Some(m) if m < n_features => {
            let mut f = sample(rng, n_features, m).into_vec();
            f.sort_unstable();
            f
        }
        _ => (0..n_features).collect(),
    };
    let n = indices.len() as f64;
    let total: f64 = indices.iter().map(|&i| targets[i]).sum();
    let total_sq: f64 = indices.iter().map(|&i| targets[i] * targets[i]).sum();
    let parent_sse = total_sq - total * total / n;
    if parent_sse <= 1e-12 {
        return None;
    }
    let min_leaf = params.min_samples_leaf.max(1);
    let mut best: Option<(f64, usize, f64)> = None;
    let mut order = indices.to_vec();
    for f in features {
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]));
        let (mut sum_l, mut sq_l) = (0.0, 0.0);
        for pos in 0..order.len() - 1 {
            let y = targets[order[pos]];
            sum_l += y;
            sq_l += y * y;
            let nl = (pos + 1) as f64;
            let (lo, hi) = (x[order[pos]][f], x[order[pos + 1]][f]);
            if lo == hi || pos + 1 < min_leaf || order.len() - pos - 1 < min_leaf {
                continue;
            }
            let nr = n - nl;
            let sum_r = total - sum_l;
            let sse = (sq_l - sum_l * sum_l / nl) + (total_sq - sq_l - sum_r * sum_r / nr);
            if best.is_none_or(|(b, _, _)| sse < b - 1e-12) {
                best = Some((sse, f, lo + (hi - lo) / 2.0));
            }
        }
    }
    best.filter(|(sse, _, _)| *sse < parent_sse - 1e-12).map(|(_, f, t)| (f, t))
}

pub fn mean_leaf(targets: &[f64]) -> impl Fn(&[usize]) -> f64 + '_ {
    move |idx: &[usize]| {
        if idx.is_empty() {
            0.0
        } else {
            idx.iter().map(|&i| targets[i]).sum::<f64>() / idx.len() as f64
        }
    }
}
