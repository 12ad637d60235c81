use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    /// `+inf` when groups differ but have no spread within.
    pub f: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub ss_between: f64,
    pub ss_within: f64,
    pub group_means: Vec<f64>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// One-way ANOVA F statistic.
pub fn anova_oneway<G: AsRef<[f64]>>(groups: &[G]) -> Result<AnovaResult> {
    if groups.len() < 2 {
        return Err(Error::InvalidArgument("ANOVA needs at least 2 groups".into()));
    }
    if groups.iter().any(|g| g.as_ref().len() < 2) {
        return Err(Error::InvalidArgument("every ANOVA group needs at least 2 values".into()));
    }
    if groups.iter().flat_map(|g| g.as_ref()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ANOVA observation".into()));
    }
    let all: Vec<f64> = groups.iter().flat_map(|g| g.as_ref().iter().copied()).collect();
    let grand = mean(&all);
    let group_means: Vec<f64> = groups.iter().map(|g| mean(g.as_ref())).collect();
    let ss_between: f64 = groups
        .iter()
        .zip(&group_means)
        .map(|(g, m)| g.as_ref().len() as f64 * (m - grand) * (m - grand))
        .sum();
    let ss_within: f64 = groups
        .iter()
        .zip(&group_means)
        .map(|(g, m)| g.as_ref().iter().map(|v| (v - m) * (v - m)).sum::<f64>())
        .sum();
    let k = groups.len();
    let (df_between, df_within) = (k - 1, all.len() - k);
    let f = if ss_within == 0.0 {
        if ss_between == 0.0 {
            return Err(Error::DegenerateGraph("ANOVA undefined: no variance between or within groups"));
        }
        f64::INFINITY
    } else {
        (ss_between / df_between as f64) / (ss_within / df_within as f64)
    };
    Ok(AnovaResult { f, df_between, df_within, ss_between, ss_within, group_means })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn hand_example() {
        let r = anova_oneway(&[vec![1.0, 2.0, 3.0], vec![2.0, 3.0, 4.0], vec![3.0, 4.0, 5.0]]).unwrap();
        // SSB = 3 * (1 + 0 + 1) = 6, SSW = 3 * 2 = 6
        assert!((r.f - 3.0).abs() < 1e-9);
        assert_eq!((r.df_between, r.df_within), (2, 6));
    }

    #[test]
    fn equal_means_and_shapes() {
        let r = anova_oneway(&[vec![1.0, 3.0], vec![0.0, 4.0]]).unwrap();
        assert_eq!(r.f, 0.0);
        let groups = vec![vec![0.5; 1004], vec![0.25; 1004], vec![1.0; 1003].into_iter().chain([0.0]).collect()];
        let r = anova_oneway(&groups).unwrap();
        assert_eq!((r.df_between, r.df_within), (2, 3009));
    }

    #[test]
    fn degenerate_inputs() {
        assert!(anova_oneway(&[vec![1.0, 1.0], vec![1.0, 1.0]]).is_err());
        assert_eq!(anova_oneway(&[vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap().f, f64::INFINITY);
        assert!(anova_oneway(&[vec![1.0, 2.0]]).is_err());
        assert!(anova_oneway(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }
}
