use super::kernel::sq_dist;
use crate::data::Dataset;
use crate::error::{invalid, Result};

/// k-nearest-neighbour regression under Euclidean distance. Ties in distance
/// go to the training point with the lowest index.
#[derive(Clone, Debug)]
pub struct KnnModel {
    data: Dataset,
    k: usize,
}

impl KnnModel {
    pub fn fit(data: &Dataset, k: usize) -> Result<Self> {
        if k == 0 || k > data.len() {
            return Err(invalid(format!("need 1 ≤ k ≤ n (k = {k}, n = {})", data.len())));
        }
        Ok(Self { data: data.clone(), k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Indices of the `k` nearest training points, nearest first.
    pub fn neighbours(&self, x: &[f64]) -> Vec<usize> {
        let mut keyed: Vec<(f64, usize)> = self.data.points().map(|xi| sq_dist(x, xi)).zip(0..).collect();
        let by_key = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < keyed.len() {
            keyed.select_nth_unstable_by(self.k - 1, by_key);
            keyed.truncate(self.k);
        }
        keyed.sort_unstable_by(by_key);
        keyed.into_iter().map(|(_, i)| i).collect()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let y = self.data.responses();
        self.neighbours(x).iter().map(|&i| y[i]).sum::<f64>() / self.k as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> Dataset {
        Dataset::new(1, vec![0.1, 0.4, 0.9], vec![1.0, 2.0, 6.0]).unwrap()
    }

    #[test]
    fn self_lookup_and_full_average() {
        let m = KnnModel::fit(&line(), 1).unwrap();
        assert_eq!(m.predict(&[0.4]), 2.0);
        let all = KnnModel::fit(&line(), 3).unwrap();
        assert_eq!(all.predict(&[0.77]), 3.0);
        assert!(KnnModel::fit(&line(), 4).is_err());
        assert!(KnnModel::fit(&line(), 0).is_err());
    }

    #[test]
    fn pairs_on_a_line() {
        let m = KnnModel::fit(&line(), 2).unwrap();
        // 0.2 is nearest to 0.1 then 0.4; 0.8 is nearest to 0.9 then 0.4.
        assert_eq!(m.predict(&[0.2]), 1.5);
        assert_eq!(m.predict(&[0.8]), 4.0);
        assert_eq!(m.predict(&[0.0]), 1.5);
    }

    #[test]
    fn ties_go_to_the_lowest_index() {
        let data = Dataset::new(1, vec![0.25, 0.75, 0.25], vec![1.0, 5.0, 9.0]).unwrap();
        let m = KnnModel::fit(&data, 1).unwrap();
        assert_eq!(m.predict(&[0.5]), 1.0);
        assert_eq!(m.neighbours(&[0.25]), vec![0]);
        let two = KnnModel::fit(&data, 2).unwrap();
        assert_eq!(two.neighbours(&[0.5]), vec![0, 1]);
    }
}
