use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tree::{fit_tree, mean_leaf, Tree, TreeParams};
use super::Row;

#[derive(Debug, Clone)]
pub struct RandomForest {
    trees: Vec<Tree>,
}

impl RandomForest {
    /// Bagged trees on bootstrap samples with √p features per split.
    pub fn fit(x: &[Row], y: &[bool], trees: usize, max_depth: usize, seed: u64) -> Self {
        let targets: Vec<f64> = y.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = TreeParams {
            max_depth,
            min_samples_leaf: 1,
            max_features: Some(((super::FEATURES as f64).sqrt().round() as usize).max(1)),
        };
        let n = x.len();
        let trees = (0..trees)
            .map(|_| {
                let bootstrap: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                fit_tree(x, &targets, bootstrap, &params, &mut rng, &mean_leaf(&targets))
            })
            .collect();
        RandomForest { trees }
    }

    pub fn match_probability(&self, x: &Row) -> f64 {
        if self.trees.is_empty() {
            return 0.0;
        }
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}
