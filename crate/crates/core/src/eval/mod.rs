//! ROC-AUC, per-theme reports and first-layer contribution analysis.

mod auc;
mod contribution;
mod report;

pub use auc::{pairs_auc, per_theme_auc, roc_auc, PerThemeReport, ScoredPair, ThemeAuc};
pub use contribution::{
    contribution, first_layer_masses, report_from_masses, Composition, ContributionReport,
    GroupContribution,
};
pub use report::{
    system_table, write_contribution, write_per_theme, write_table1, SystemRow, CONTRIBUTION,
    PER_THEME, TABLE1,
};
