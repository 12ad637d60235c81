//! Reference-based metrics and statistics for comparing systems.

mod alpha;
mod anova;
mod rouge;

pub use alpha::{krippendorff_alpha, AlphaResult, Level};
pub use anova::{anova_oneway, AnovaResult};
pub use rouge::{rouge, rouge_corpus, RougeScore, RougeScores, RougeSummary};
