use std::collections::BTreeMap;

use kgfq_core::gricean::QuestionRecord;
use kgfq_core::metrics::{anova_oneway, krippendorff_alpha, AlphaResult};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use super::score::GriceanArtifact;
use crate::artifact::{read_artifact, Output};
use crate::cli::{AlphaArgs, AnovaArgs, Ctx, Metric};
use crate::error::{Error, Result};
use crate::io;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaArtifact {
    /// `None` when the groups came from a plain JSON file.
    pub metric: Option<Metric>,
    pub groups: Vec<String>,
    pub sizes: Vec<usize>,
    /// `null` when groups differ but have no spread within (F is infinite).
    pub f: Option<f64>,
    pub df_between: usize,
    pub df_within: usize,
    pub ss_between: f64,
    pub ss_within: f64,
    pub group_means: Vec<f64>,
    /// Upper-tail probability of F under the null hypothesis.
    pub p_value: f64,
}

pub fn metric_value(r: &QuestionRecord, m: Metric) -> f64 {
    match m {
        Metric::Rel => f64::from(r.rel),
        Metric::Info => r.info,
        Metric::Truth => f64::from(r.truth),
        Metric::Cla => r.cla,
        Metric::Coh => f64::from(r.coh),
    }
}

/// `P(F' >= f)` for `F' ~ F(df1, df2)`.
pub fn f_upper_tail(f: f64, df1: usize, df2: usize) -> Result<f64> {
    if f.is_infinite() {
        return Ok(0.0);
    }
    let dist = FisherSnedecor::new(df1 as f64, df2 as f64).map_err(|e| Error::Usage(format!("F distribution: {e}")))?;
    Ok(dist.sf(f))
}

pub fn anova(mut ctx: Ctx, a: &AnovaArgs) -> Result<Output> {
    let (metric, named): (Option<Metric>, Vec<(String, Vec<f64>)>) = match &a.groups {
        Some(path) => {
            let text = io::read_text(path)?;
            let map: BTreeMap<String, Vec<f64>> = serde_json::from_str(&text).map_err(|e| Error::schema(path, e))?;
            (None, map.into_iter().collect())
        }
        None => {
            let mut groups = Vec::new();
            for p in &a.reports {
                let r = read_artifact::<GriceanArtifact>(p, "gricean")?.body;
                let values = r.report.records.iter().map(|q| metric_value(q, a.metric)).collect();
                groups.push((r.system, values));
            }
            (Some(a.metric), groups)
        }
    };
    let values: Vec<&[f64]> = named.iter().map(|(_, v)| v.as_slice()).collect();
    let result = anova_oneway(&values)?;
    let p_value = f_upper_tail(result.f, result.df_between, result.df_within)?;
    println!("F({}, {}) = {:.6}, p = {p_value:.3e}", result.df_between, result.df_within, result.f);
    let artifact = AnovaArtifact {
        metric,
        groups: named.iter().map(|(n, _)| n.clone()).collect(),
        sizes: named.iter().map(|(_, v)| v.len()).collect(),
        f: result.f.is_finite().then_some(result.f),
        df_between: result.df_between,
        df_within: result.df_within,
        ss_between: result.ss_between,
        ss_within: result.ss_within,
        group_means: result.group_means,
        p_value,
    };
    ctx.out.json("anova.json", "anova", &artifact)?;
    Ok(ctx.out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaArtifact {
    pub raters: usize,
    pub items: usize,
    #[serde(flatten)]
    pub result: AlphaResult,
}

pub fn alpha(mut ctx: Ctx, a: &AlphaArgs) -> Result<Output> {
    let ratings = io::read_ratings(&a.ratings)?;
    let result = krippendorff_alpha(&ratings, a.level)?;
    println!("alpha = {:.6} ({} pairable values)", result.alpha, result.pairable);
    let artifact = AlphaArtifact {
        raters: ratings.len(),
        items: ratings.iter().map(Vec::len).max().unwrap_or(0),
        result,
    };
    ctx.out.json("alpha.json", "alpha", &artifact)?;
    Ok(ctx.out)
}
