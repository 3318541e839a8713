//! Small deterministic reductions shared by every module.
//!
//! All sums go through [`sum`], a Neumaier-compensated accumulation in index
//! order, so a reduction gives the same bits no matter how the caller
//! scheduled the work that produced its inputs.

/// Compensated sum in iteration order.
pub fn sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut total = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = total + v;
        if total.abs() >= v.abs() {
            comp += (total - t) + v;
        } else {
            comp += (v - t) + total;
        }
        total = t;
    }
    total + comp
}

/// Running compensated sum, for folds that cannot hold their inputs.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Accumulator {
    total: f64,
    comp: f64,
}

impl Accumulator {
    pub fn add(&mut self, v: f64) {
        let t = self.total + v;
        if self.total.abs() >= v.abs() {
            self.comp += (self.total - t) + v;
        } else {
            self.comp += (v - t) + self.total;
        }
        self.total = t;
    }

    /// Folds another accumulator in; merging in a fixed order keeps results reproducible.
    pub fn merge(&mut self, other: &Accumulator) {
        self.add(other.total);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.total + self.comp
    }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    sum(values.iter().copied()) / values.len() as f64
}

/// Sample variance with the `n - 1` denominator.
pub fn variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(values);
    sum(values.iter().map(|v| (v - m) * (v - m))) / (n - 1) as f64
}

pub fn std_dev(values: &[f64]) -> f64 {
    variance(values).sqrt()
}

pub fn weighted_mean(values: &[f64], weights: &[f64]) -> f64 {
    debug_assert_eq!(values.len(), weights.len());
    let wsum = sum(weights.iter().copied());
    sum(values.iter().zip(weights).map(|(v, w)| v * w)) / wsum
}

/// Weighted variance around the weighted mean, normalised by the weight total.
pub fn weighted_variance(values: &[f64], weights: &[f64]) -> f64 {
    let m = weighted_mean(values, weights);
    let wsum = sum(weights.iter().copied());
    sum(values.iter().zip(weights).map(|(v, w)| w * (v - m) * (v - m))) / wsum
}

/// Empirical quantile of an ascending-sorted slice, Hyndman-Fan type 7
/// (linear interpolation between order statistics, `h = (n - 1) p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let p = p.clamp(0.0, 1.0);
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Sorts a copy with a total order (NaN last) and returns it.
pub fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}
