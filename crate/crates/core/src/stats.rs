//! Small numeric helpers shared across modules.

use serde::{Serialize, Serializer};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation (divides by `n`).
pub fn population_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64;
    libm::sqrt(var)
}

/// `num / den` rounded to the nearest `f64` (ties to even), for
/// `num <= den < 2^126`. Long division, so no intermediate rounding.
pub fn unit_ratio_to_f64(num: u128, den: u128) -> f64 {
    assert!(num <= den && den > 0 && den < 1 << 126, "ratio out of supported range");
    if num == 0 {
        return 0.0;
    }
    // normalize so rem / den lies in [1, 2); value = (rem / den) * 2^exp
    let mut rem = num;
    let mut exp = 0i32;
    while rem < den {
        rem <<= 1;
        exp -= 1;
    }
    let mut mant: u64 = 0;
    for _ in 0..53 {
        mant <<= 1;
        if rem >= den {
            mant |= 1;
            rem -= den;
        }
        rem <<= 1;
    }
    // rem / (2 den) is the discarded tail
    if rem > den || (rem == den && mant & 1 == 1) {
        mant += 1;
    }
    libm::ldexp(mant as f64, exp - 52)
}

/// Outcome of a Pearson correlation. A constant input vector leaves the
/// coefficient undefined; that case is kept distinct from `0.0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pearson {
    Defined(f64),
    Undefined,
}

impl Pearson {
    pub fn value(self) -> Option<f64> {
        match self {
            Pearson::Defined(r) => Some(r),
            Pearson::Undefined => None,
        }
    }
}

impl Serialize for Pearson {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Pearson::Defined(r) => s.serialize_f64(*r),
            Pearson::Undefined => s.serialize_str("undefined"),
        }
    }
}

/// Sample Pearson correlation of two equal-length vectors.
///
/// Panics if the lengths differ; callers validate shapes first.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Pearson {
    assert_eq!(xs.len(), ys.len(), "pearson: length mismatch");
    let constant = |v: &[f64]| v.iter().all(|&x| x == v[0]);
    if xs.len() < 2 || constant(xs) || constant(ys) {
        return Pearson::Undefined;
    }
    let mx = mean(xs);
    let my = mean(ys);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Pearson::Undefined;
    }
    let r = sxy / (libm::sqrt(sxx) * libm::sqrt(syy));
    Pearson::Defined(r.clamp(-1.0, 1.0))
}

/// Average ranks (1-based, ties share the mean of their positions), ordered
/// so that the largest value gets rank 1.
pub fn average_ranks_desc(xs: &[f64]) -> alloc::vec::Vec<f64> {
    let mut order: alloc::vec::Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[b].total_cmp(&xs[a]).then(a.cmp(&b)));
    let mut ranks = alloc::vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson over average ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Pearson {
    pearson(&average_ranks_desc(xs), &average_ranks_desc(ys))
}
