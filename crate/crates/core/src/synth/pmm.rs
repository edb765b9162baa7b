use rand::Rng;

use crate::data::Value;
use crate::error::{Error, Result};
use crate::fit::{Feature, LinearModel};

/// Fitting-set predictions sorted for nearest-neighbour donor lookup.
#[derive(Debug, Clone)]
pub struct PmmDonorPool {
    sorted: Vec<(f64, usize)>,
    y: Vec<f64>,
}

impl PmmDonorPool {
    pub fn new(predictions: &[f64], y: &[f64]) -> Result<Self> {
        if predictions.len() != y.len() {
            return Err(Error::Layout(format!(
                "{} predictions for {} observations",
                predictions.len(),
                y.len()
            )));
        }
        let mut sorted: Vec<(f64, usize)> =
            predictions.iter().copied().enumerate().map(|(i, p)| (p, i)).collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Ok(PmmDonorPool {
            sorted,
            y: y.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Rows of the `k` predictions closest to `pred`, by absolute difference
    /// and then row index.
    pub fn nearest(&self, pred: f64, k: usize) -> Result<Vec<usize>> {
        if k == 0 || k > self.len() {
            return Err(Error::InvalidArgument(format!(
                "cannot choose {k} donors from {} fitting rows",
                self.len()
            )));
        }
        let s = &self.sorted;
        let dist = |i: usize| (s[i].0 - pred).abs();
        let start = s.partition_point(|&(p, _)| p < pred);
        let (mut lo, mut hi) = (start, start);
        let mut picked: Vec<(f64, usize)> = Vec::with_capacity(k + 4);
        // expand outwards, then keep taking anything tied with the k-th distance
        let mut kth = f64::INFINITY;
        loop {
            let left = (lo > 0).then(|| dist(lo - 1));
            let right = (hi < s.len()).then(|| dist(hi));
            let take_left = match (left, right) {
                (None, None) => break,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (Some(l), Some(r)) => l <= r,
            };
            let d = if take_left { left.unwrap() } else { right.unwrap() };
            if picked.len() >= k && d > kth {
                break;
            }
            if take_left {
                lo -= 1;
                picked.push((d, s[lo].1));
            } else {
                picked.push((d, s[hi].1));
                hi += 1;
            }
            if picked.len() == k {
                kth = d;
            }
        }
        picked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        picked.truncate(k);
        Ok(picked.into_iter().map(|(_, r)| r).collect())
    }

    pub fn draw<R: Rng + ?Sized>(&self, pred: f64, k: usize, rng: &mut R) -> Result<f64> {
        let donors = self.nearest(pred, k)?;
        Ok(self.y[donors[rng.random_range(0..donors.len())]])
    }
}

/// Predictive mean matching: predict at `x_row`, then return the observed
/// outcome of one of the `k_donors` fitting rows with the closest predictions.
pub fn pmm_draw<R: Rng + ?Sized>(
    model: &LinearModel,
    fitting_x: &[Feature<'_>],
    fitting_y: &[f64],
    x_row: &[Value],
    k_donors: usize,
    rng: &mut R,
) -> Result<f64> {
    if fitting_y.len() < k_donors {
        return Err(Error::InvalidArgument(format!(
            "fitting set has {} rows, fewer than {k_donors} donors",
            fitting_y.len()
        )));
    }
    let pool = PmmDonorPool::new(&model.predict_all(fitting_x), fitting_y)?;
    pool.draw(model.predict(x_row)?, k_donors, rng)
}
