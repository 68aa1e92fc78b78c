//! k-nearest-neighbour classifier under the mixed distance.

use alloc::vec::Vec;

use crate::dataset::{Class, Dataset};
use crate::model::Predictor;
use crate::regional::mixed_distance;
use crate::{Error, Result};

/// Majority label among the `k` training rows nearest to the query
/// (distance ties broken by lower row index, vote ties toward class 0).
#[derive(Debug, Clone)]
pub struct KnnModel {
    train: Dataset,
    k: usize,
}

pub fn train_knn(train: &Dataset, k: usize) -> Result<KnnModel> {
    if k == 0 || k > train.len() {
        return Err(Error::InvalidModel(alloc::format!(
            "k = {k} must lie in 1..={}",
            train.len()
        )));
    }
    Ok(KnnModel {
        train: train.clone(),
        k,
    })
}

impl KnnModel {
    pub fn k(&self) -> usize {
        self.k
    }
}

impl Predictor for KnnModel {
    fn predict(&self, x: &[f64]) -> Result<Class> {
        let schema = self.train.schema();
        let mut dist: Vec<(f64, usize)> = Vec::with_capacity(self.train.len());
        for (i, row) in self.train.rows().iter().enumerate() {
            dist.push((mixed_distance(schema, x, row)?, i));
        }
        let k = self.k;
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        let ones = dist[..k]
            .iter()
            .filter(|&&(_, i)| self.train.label(i) == Class::Undesirable)
            .count();
        Ok(if 2 * ones > k {
            Class::Undesirable
        } else {
            Class::Desirable
        })
    }
}
