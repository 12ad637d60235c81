use std::fmt::Write as _;

use kgfq_core::gricean::Aggregates;
use kgfq_core::metrics::RougeSummary;
use serde::{Deserialize, Serialize};

use super::score::{GriceanArtifact, RougeArtifact};
use super::select::{SelectionEvalReport, SelectionRow};
use super::stats::{AlphaArtifact, AnovaArtifact};
use crate::artifact::{artifact_kind, read_artifact, Output};
use crate::cli::{Ctx, ReportArgs};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GriceanRow {
    pub system: String,
    #[serde(flatten)]
    pub aggregates: Aggregates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RougeRow {
    pub system: String,
    #[serde(flatten)]
    pub summary: RougeSummary,
}

/// Everything `report` joins, in input order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportTables {
    pub selection: Vec<SelectionRow>,
    pub gricean: Vec<GriceanRow>,
    pub rouge: Vec<RougeRow>,
    pub anova: Vec<AnovaArtifact>,
    pub alpha: Vec<AlphaArtifact>,
}

fn cell(v: Option<f64>, scale: f64) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{:.2}", x * scale))
}

pub fn render_markdown(t: &ReportTables) -> String {
    let mut md = String::from("# Results\n");
    if !t.selection.is_empty() {
        md.push_str("\n## Knowledge selection (recall@k, %)\n\n");
        md.push_str("| Selector | Embedding | Entity R@1 | Relation R@1 | Relation R@3 | Relation R@5 |\n");
        md.push_str("|---|---|---:|---:|---:|---:|\n");
        for r in &t.selection {
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} | {} | {} |",
                r.variant,
                r.embedding_family,
                cell(r.entity_r1, 100.0),
                cell(r.relation_r1, 100.0),
                cell(r.relation_r3, 100.0),
                cell(r.relation_r5, 100.0)
            );
        }
    }
    if !t.gricean.is_empty() {
        md.push_str("\n## Gricean scores\n\n");
        md.push_str("| System | N | REL (%) | INFO | TRUTH (%) | CLA | COH (%) |\n");
        md.push_str("|---|---:|---:|---:|---:|---:|---:|\n");
        for r in &t.gricean {
            let a = &r.aggregates;
            let _ = writeln!(
                md,
                "| {} | {} | {:.2} | {:.4} | {:.2} | {:.4} | {:.2} |",
                r.system, a.n, a.rel_pct, a.info_mean, a.truth_pct, a.cla_mean, a.coh_pct
            );
        }
    }
    if !t.rouge.is_empty() {
        md.push_str("\n## ROUGE (F1 / recall)\n\n");
        md.push_str("| System | N | ROUGE-1 | ROUGE-2 | ROUGE-L |\n");
        md.push_str("|---|---:|---:|---:|---:|\n");
        for r in &t.rouge {
            let s = &r.summary;
            let _ = writeln!(
                md,
                "| {} | {} | {:.4} / {:.4} | {:.4} / {:.4} | {:.4} / {:.4} |",
                r.system, s.n, s.r1_f1, s.r1_recall, s.r2_f1, s.r2_recall, s.rl_f1, s.rl_recall
            );
        }
    }
    if !t.anova.is_empty() || !t.alpha.is_empty() {
        md.push_str("\n## Statistics\n\n");
        for a in &t.anova {
            let metric = a.metric.map_or_else(|| "values".to_string(), |m| format!("{m:?}").to_uppercase());
            let f = a.f.map_or_else(|| "inf".to_string(), |f| format!("{f:.4}"));
            let _ = writeln!(
                md,
                "- One-way ANOVA on {metric} across {}: F({}, {}) = {f}, p = {:.3e}",
                a.groups.join(", "),
                a.df_between,
                a.df_within,
                a.p_value
            );
        }
        for a in &t.alpha {
            let _ = writeln!(
                md,
                "- Krippendorff's alpha ({:?}, {} raters, {} items): {:.4}",
                a.result.level, a.raters, a.items, a.result.alpha
            );
        }
    }
    md
}

pub fn report(mut ctx: Ctx, a: &ReportArgs) -> Result<Output> {
    let mut t = ReportTables::default();
    for p in &a.inputs {
        match artifact_kind(p)?.as_str() {
            "selection-eval" => t.selection.extend(read_artifact::<SelectionEvalReport>(p, "selection-eval")?.body.rows),
            "gricean" => {
                let g = read_artifact::<GriceanArtifact>(p, "gricean")?.body;
                t.gricean.push(GriceanRow { system: g.system, aggregates: g.report.aggregates });
            }
            "rouge" => {
                let r = read_artifact::<RougeArtifact>(p, "rouge")?.body;
                t.rouge.push(RougeRow { system: r.system, summary: r.summary });
            }
            "anova" => t.anova.push(read_artifact::<AnovaArtifact>(p, "anova")?.body),
            "alpha" => t.alpha.push(read_artifact::<AlphaArtifact>(p, "alpha")?.body),
            other => return Err(Error::schema(p, format!("`{other}` artifacts cannot be reported"))),
        }
    }
    let md = render_markdown(&t);
    print!("{md}");
    ctx.out.markdown("report.md", &md)?;
    ctx.out.json("report.json", "report", &t)?;
    Ok(ctx.out)
}
