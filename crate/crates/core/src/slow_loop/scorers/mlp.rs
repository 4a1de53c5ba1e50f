use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{sigmoid, Row, FEATURES};

/// One tanh hidden layer and a sigmoid output, trained full-batch with Adam
/// on the cross-entropy loss.
#[derive(Debug, Clone)]
pub struct Mlp {
    w1: Vec<[f64; FEATURES]>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;

impl Mlp {
    pub fn fit(x: &[Row], y: &[bool], hidden: usize, epochs: usize, rate: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale1 = (1.0 / FEATURES as f64).sqrt();
        let scale2 = (1.0 / hidden as f64).sqrt();
        let mut net = Mlp {
            w1: (0..hidden).map(|_| std::array::from_fn(|_| rng.random_range(-scale1..scale1))).collect(),
            b1: vec![0.0; hidden],
            w2: (0..hidden).map(|_| rng.random_range(-scale2..scale2)).collect(),
            b2: 0.0,
        };
        let n_params = hidden * FEATURES + 2 * hidden + 1;
        let (mut m, mut v) = (vec![0.0; n_params], vec![0.0; n_params]);
        let n = x.len() as f64;
        let mut hidden_out = vec![0.0; hidden];
        for epoch in 1..=epochs {
            let mut grad = vec![0.0; n_params];
            for (row, &label) in x.iter().zip(y) {
                let out = net.forward(row, &mut hidden_out);
                let err = out - if label { 1.0 } else { 0.0 };
                for h in 0..hidden {
                    let g_hidden = err * net.w2[h] * (1.0 - hidden_out[h] * hidden_out[h]);
                    for (f, xf) in row.iter().enumerate() {
                        grad[h * FEATURES + f] += g_hidden * xf;
                    }
                    grad[hidden * FEATURES + h] += g_hidden;
                    grad[hidden * FEATURES + hidden + h] += err * hidden_out[h];
                }
                grad[n_params - 1] += err;
            }
            let (c1, c2) = (1.0 - BETA1.powi(epoch as i32), 1.0 - BETA2.powi(epoch as i32));
            let mut params = net.params_mut();
            for (k, p) in params.iter_mut().enumerate() {
                let g = grad[k] / n;
                m[k] = BETA1 * m[k] + (1.0 - BETA1) * g;
                v[k] = BETA2 * v[k] + (1.0 - BETA2) * g * g;
                **p -= rate * (m[k] / c1) / ((v[k] / c2).sqrt() + 1e-8);
            }
        }
        net
    }

    fn params_mut(&mut self) -> Vec<&mut f64> {
        let mut out: Vec<&mut f64> = self.w1.iter_mut().flat_map(|r| r.iter_mut()).collect();
        out.extend(self.b1.iter_mut());
        out.extend(self.w2.iter_mut());
        out.push(&mut self.b2);
        out
    }

    fn forward(&self, x: &Row, hidden_out: &mut [f64]) -> f64 {
        let mut z = self.b2;
        for (((row, b), w), out) in self.w1.iter().zip(&self.b1).zip(&self.w2).zip(hidden_out.iter_mut()) {
            let a = b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            *out = a.tanh();
            z += w * *out;
        }
        sigmoid(z)
    }

    pub fn match_probability(&self, x: &Row) -> f64 {
        let mut hidden_out = vec![0.0; self.w1.len()];
        self.forward(x, &mut hidden_out)
    }
}
