use serde::{Deserialize, Serialize};

const VAR_EPS: f64 = 1e-8;

/// Running per-dimension observation statistics.
///
/// `normalize` is an affine bijection, so [`ObsNormalizer::denormalize`]
/// inverts it exactly up to rounding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObsNormalizer {
    pub count: f64,
    pub mean: Vec<f64>,
    /// Sum of squared deviations from the mean.
    pub m2: Vec<f64>,
}

impl ObsNormalizer {
    pub fn new(dim: usize) -> Self {
        ObsNormalizer {
            count: 0.0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn std(&self, i: usize) -> f64 {
        let var = if self.count > 1.0 {
            self.m2[i] / self.count
        } else {
            1.0
        };
        (var + VAR_EPS).sqrt()
    }

    /// Merges a batch with Chan et al.'s parallel update.
    pub fn update(&mut self, batch: &[Vec<f64>]) {
        if batch.is_empty() {
            return;
        }
        let n = batch.len() as f64;
        let dim = self.dim();
        let mut bmean = vec![0.0; dim];
        for x in batch {
            for (m, v) in bmean.iter_mut().zip(x) {
                *m += v;
            }
        }
        for m in &mut bmean {
            *m /= n;
        }
        let mut bm2 = vec![0.0; dim];
        for x in batch {
            for i in 0..dim {
                let d = x[i] - bmean[i];
                bm2[i] += d * d;
            }
        }
        let total = self.count + n;
        for i in 0..dim {
            let delta = bmean[i] - self.mean[i];
            self.mean[i] += delta * n / total;
            self.m2[i] += bm2[i] + delta * delta * self.count * n / total;
        }
        self.count = total;
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, &v)| (v - self.mean[i]) / self.std(i))
            .collect()
    }

    pub fn denormalize(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .enumerate()
            .map(|(i, &v)| v * self.std(i) + self.mean[i])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statistics_match_direct_computation() {
        let data: Vec<Vec<f64>> = (0..50)
            .map(|k| vec![k as f64 * 0.1, (k as f64).sin()])
            .collect();
        let mut n = ObsNormalizer::new(2);
        n.update(&data[..17]);
        n.update(&data[17..]);
        let mean0: f64 = data.iter().map(|x| x[0]).sum::<f64>() / 50.0;
        let var0: f64 = data.iter().map(|x| (x[0] - mean0).powi(2)).sum::<f64>() / 50.0;
        assert!((n.mean[0] - mean0).abs() < 1e-12);
        assert!((n.m2[0] / n.count - var0).abs() < 1e-12);
    }

    #[test]
    fn normalization_is_invertible() {
        let mut n = ObsNormalizer::new(3);
        n.update(&[vec![1.0, 2.0, 3.0], vec![-1.0, 0.5, 4.0], vec![0.3, 0.1, 9.0]]);
        let x = [0.7, -2.0, 5.5];
        let back = n.denormalize(&n.normalize(&x));
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
