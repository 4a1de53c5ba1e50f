use nalgebra::{DMatrix, DVector};

use super::{sigmoid, Row, FEATURES};

/// L2-regularized logistic regression fitted by iteratively reweighted least
/// squares. The intercept is not penalized.
#[derive(Debug, Clone)]
pub struct LogisticRegression {
    coef: DVector<f64>,
}

impl LogisticRegression {
    pub fn fit(x: &[Row], y: &[bool], ridge: f64, iterations: usize) -> Self {
        let dim = FEATURES + 1;
        let n = x.len();
        let design = DMatrix::from_fn(n, dim, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] });
        let target = DVector::from_iterator(n, y.iter().map(|&l| if l { 1.0 } else { 0.0 }));
        let mut penalty = DMatrix::identity(dim, dim) * ridge;
        penalty[(0, 0)] = 1e-9;
        let mut coef = DVector::zeros(dim);
        for _ in 0..iterations {
            let margin = &design * &coef;
            let prob = margin.map(sigmoid);
            let weights = prob.map(|p| (p * (1.0 - p)).max(1e-9));
            let gradient = design.transpose() * (&target - &prob) - &penalty * &coef;
            let weighted = DMatrix::from_fn(n, dim, |i, j| design[(i, j)] * weights[i]);
            let hessian = design.transpose() * weighted + &penalty;
            let Some(step) = hessian.lu().solve(&gradient) else { break };
            coef += &step;
            if step.amax() < 1e-8 {
                break;
            }
        }
        LogisticRegression { coef }
    }

    pub fn match_probability(&self, x: &Row) -> f64 {
        let mut m = self.coef[0];
        for (j, v) in x.iter().enumerate() {
            m += self.coef[j + 1] * v;
        }
        sigmoid(m)
    }
}
