use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Nominal,
    Ordinal,
    Interval,
}

impl core::str::FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nominal" => Ok(Level::Nominal),
            "ordinal" => Ok(Level::Ordinal),
            "interval" => Ok(Level::Interval),
            other => Err(Error::InvalidArgument(alloc::format!("unknown measurement level `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaResult {
    pub alpha: f64,
    pub level: Level,
    /// Number of pairable values (ratings on items rated at least twice).
    pub pairable: usize,
}

/// Krippendorff's alpha over a rater x item matrix; `None` is a missing rating.
///
/// Built from the coincidence matrix: each item with `m >= 2` ratings adds
/// `1 / (m - 1)` for every ordered pair of its ratings.
pub fn krippendorff_alpha(ratings: &[Vec<Option<f64>>], level: Level) -> Result<AlphaResult> {
    let items = ratings.iter().map(Vec::len).max().unwrap_or(0);
    if ratings.iter().flatten().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("rating".into()));
    }
    // distinct values in ascending order
    let mut values: Vec<f64> = ratings.iter().flatten().flatten().copied().collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let index: BTreeMap<u64, usize> = values.iter().enumerate().map(|(i, v)| (v.to_bits(), i)).collect();
    let v = values.len();
    let mut o = alloc::vec![0.0; v * v];
    for item in 0..items {
        let unit: Vec<usize> =
            ratings.iter().filter_map(|r| r.get(item).copied().flatten()).map(|x| index[&x.to_bits()]).collect();
        let m = unit.len();
        if m < 2 {
            continue;
        }
        let w = 1.0 / (m - 1) as f64;
        for (a, &c) in unit.iter().enumerate() {
            for (b, &k) in unit.iter().enumerate() {
                if a != b {
                    o[c * v + k] += w;
                }
            }
        }
    }
    let n_c: Vec<f64> = (0..v).map(|c| o[c * v..(c + 1) * v].iter().sum()).collect();
    let n: f64 = n_c.iter().sum();
    if n == 0.0 {
        return Err(Error::EmptyInput("no item was rated by two or more raters"));
    }
    let delta = |c: usize, k: usize| -> f64 {
        match level {
            Level::Nominal => f64::from(u8::from(c != k)),
            Level::Interval => (values[c] - values[k]) * (values[c] - values[k]),
            Level::Ordinal => {
                let (lo, hi) = if c <= k { (c, k) } else { (k, c) };
                let s: f64 = n_c[lo..=hi].iter().sum::<f64>() - (n_c[c] + n_c[k]) / 2.0;
                s * s
            }
        }
    };
    let (mut d_o, mut d_e) = (0.0, 0.0);
    for c in 0..v {
        for k in 0..v {
            let d = delta(c, k);
            d_o += o[c * v + k] * d;
            d_e += n_c[c] * n_c[k] * d;
        }
    }
    d_o /= n;
    d_e /= n * (n - 1.0);
    // no disagreement at all counts as perfect agreement
    let alpha = if d_o == 0.0 { 1.0 } else { 1.0 - d_o / d_e };
    Ok(AlphaResult { alpha, level, pairable: libm::round(n) as usize })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn some(xs: &[f64]) -> Vec<Option<f64>> {
        xs.iter().map(|x| Some(*x)).collect()
    }

    #[test]
    fn perfect_agreement_is_one() {
        let r = vec![some(&[1.0, 2.0, 3.0, 1.0, 2.0]), some(&[1.0, 2.0, 3.0, 1.0, 2.0])];
        for level in [Level::Nominal, Level::Ordinal, Level::Interval] {
            assert_eq!(krippendorff_alpha(&r, level).unwrap().alpha, 1.0);
        }
        let constant = vec![some(&[4.0, 4.0]), some(&[4.0, 4.0])];
        assert_eq!(krippendorff_alpha(&constant, Level::Nominal).unwrap().alpha, 1.0);
    }

    #[test]
    fn one_nominal_disagreement() {
        // o11 = 4, o22 = 2, o23 = o32 = 1; n = (4, 3, 1); alpha = 1 - (2/8) / (38/56) = 12/19
        let r = vec![some(&[1.0, 1.0, 2.0, 2.0]), some(&[1.0, 1.0, 2.0, 3.0])];
        let a = krippendorff_alpha(&r, Level::Nominal).unwrap();
        assert!((a.alpha - 12.0 / 19.0).abs() < 1e-12);
        assert_eq!(a.pairable, 8);
    }

    #[test]
    fn missing_values_are_skipped() {
        let r = vec![vec![Some(1.0), None, Some(2.0)], vec![Some(1.0), Some(5.0), Some(2.0)]];
        assert_eq!(krippendorff_alpha(&r, Level::Interval).unwrap().pairable, 4);
        let none = vec![vec![Some(1.0), None], vec![None, Some(2.0)]];
        assert!(krippendorff_alpha(&none, Level::Nominal).is_err());
    }
}
