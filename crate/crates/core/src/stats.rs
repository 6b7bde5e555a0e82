//! Sample statistics with a fixed summation order.

/// Sum by recursive halving. The result depends only on the slice contents
/// and order, never on how the values were produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 16;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let (left, right) = values.split_at(values.len() / 2);
    pairwise_sum(left) + pairwise_sum(right)
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(pairwise_sum(values) / values.len() as f64)
    }
}

/// Estimated variance of the sample mean: `sum (x - mean)^2 / (n (n - 1))`.
/// Undefined for fewer than two samples.
pub fn variance_of_mean(values: &[f64]) -> Option<f64> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    let m = mean(values)?;
    let squares: Vec<f64> = values.iter().map(|x| (x - m) * (x - m)).collect();
    Some(pairwise_sum(&squares) / (n as f64 * (n as f64 - 1.0)))
}

/// Mean and variance of the mean in one call.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub var_of_mean: Option<f64>,
}

impl Estimate {
    pub fn from_samples(values: &[f64]) -> Option<Self> {
        Some(Self {
            mean: mean(values)?,
            var_of_mean: variance_of_mean(values),
        })
    }

    pub fn std_error(&self) -> Option<f64> {
        self.var_of_mean.map(f64::sqrt)
    }
}
