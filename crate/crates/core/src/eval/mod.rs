//! Categorical verification: contingency tables, CSI/POD/FAR/Bias, per-cell
//! CSI maps and case-study bundles.

mod contingency;
mod csi_map;
mod render;
mod report;

pub use contingency::{accumulate, merge, metrics, scores, ContingencyTable, Counts, MetricReport, Scores};
pub use csi_map::{csi_map, CsiMapAccumulator};
pub use render::{csi_color, rate_color, write_ppm};
pub use report::{case_report, CaseProduct};
