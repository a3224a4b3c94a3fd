use super::kernel::sq_dist;
use crate::data::Dataset;
use crate::error::{invalid, Result};

/// Nadaraya–Watson regression with a Gaussian kernel of bandwidth `h`.
#[derive(Clone, Debug)]
pub struct NwModel {
    data: Dataset,
    bandwidth: f64,
}

impl NwModel {
    pub fn fit(data: &Dataset, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0) {
            return Err(invalid(format!("bandwidth must be positive, got {bandwidth}")));
        }
        if data.is_empty() {
            return Err(crate::error::Error::Empty("training data"));
        }
        Ok(Self {
            data: data.clone(),
            bandwidth,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Weighted mean of the responses. When every weight underflows the
    /// prediction falls back to the nearest neighbour (lowest index on ties).
    pub fn predict(&self, x: &[f64]) -> f64 {
        let c = -1.0 / (2.0 * self.bandwidth * self.bandwidth);
        let mut num = 0.0;
        let mut den = 0.0;
        let mut nearest = (f64::INFINITY, 0usize);
        for (i, (xi, y)) in self.data.points().zip(self.data.responses()).enumerate() {
            let d2 = sq_dist(x, xi);
            if d2 < nearest.0 {
                nearest = (d2, i);
            }
            let w = (c * d2).exp();
            num += w * y;
            den += w;
        }
        if den > f64::MIN_POSITIVE {
            num / den
        } else {
            self.data.responses()[nearest.1]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limits_and_symmetry() {
        let data = Dataset::new(1, vec![0.2, 0.6, 0.9], vec![1.0, -2.0, 4.0]).unwrap();
        let wide = NwModel::fit(&data, 1e8).unwrap();
        assert!((wide.predict(&[0.3]) - 1.0).abs() < 1e-12);

        let single = Dataset::new(2, vec![0.5, 0.5], vec![3.5]).unwrap();
        let m = NwModel::fit(&single, 0.05).unwrap();
        assert_eq!(m.predict(&[0.0, 1.0]), 3.5);

        let pair = Dataset::new(1, vec![0.2, 0.8], vec![1.0, 3.0]).unwrap();
        let m = NwModel::fit(&pair, 0.1).unwrap();
        assert!((m.predict(&[0.5]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn underflow_falls_back_to_nearest_neighbour() {
        let data = Dataset::new(1, vec![0.2, 0.6, 0.9], vec![1.0, -2.0, 4.0]).unwrap();
        let m = NwModel::fit(&data, 1e-4).unwrap();
        assert_eq!(m.predict(&[0.5]), -2.0);
        assert_eq!(m.predict(&[0.99]), 4.0);
        assert!(NwModel::fit(&data, 0.0).is_err());
    }
}
