use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tree::{fit_tree, Tree, TreeParams};
use super::{sigmoid, Row};

/// Gradient-boosted trees on the logistic loss with Newton leaf values.
#[derive(Debug, Clone)]
pub struct BoostedTrees {
    base: f64,
    rate: f64,
    trees: Vec<Tree>,
}

impl BoostedTrees {
    pub fn fit(x: &[Row], y: &[bool], rounds: usize, max_depth: usize, rate: f64, seed: u64) -> Self {
        let n = x.len();
        let pos = y.iter().filter(|&&l| l).count() as f64;
        let prior = ((pos + 0.5) / (n as f64 + 1.0)).clamp(1e-6, 1.0 - 1e-6);
        let base = (prior / (1.0 - prior)).ln();
        let labels: Vec<f64> = y.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
        let mut margin = vec![base; n];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = TreeParams { max_depth, min_samples_leaf: 1, max_features: None };
        let mut trees = Vec::with_capacity(rounds);
        for _ in 0..rounds {
            let prob: Vec<f64> = margin.iter().map(|&m| sigmoid(m)).collect();
            let residual: Vec<f64> = labels.iter().zip(&prob).map(|(y, p)| y - p).collect();
            let leaf = |idx: &[usize]| {
                let num: f64 = idx.iter().map(|&i| residual[i]).sum();
                let den: f64 = idx.iter().map(|&i| prob[i] * (1.0 - prob[i])).sum();
                (num / (den + 1e-6)).clamp(-4.0, 4.0)
            };
            let tree = fit_tree(x, &residual, (0..n).collect(), &params, &mut rng, &leaf);
            for (i, row) in x.iter().enumerate() {
                margin[i] += rate * tree.predict(row);
            }
            trees.push(tree);
        }
        BoostedTrees { base, rate, trees }
    }

    pub fn match_probability(&self, x: &Row) -> f64 {
        sigmoid(self.base + self.rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>())
    }
}
