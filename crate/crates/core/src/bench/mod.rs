//! Benchmark harness: cost model, Δ sweeps, baselines, ratios and reports.

pub mod baseline;
pub mod compare;
pub mod cost;
pub mod report;
pub mod sweep;

pub use baseline::{bundled, ingest_baseline, parse_baseline, BaselineMethod, BaselineRecord};
pub use compare::{compare, compare_with, CompareOptions, Comparison, ComparisonRow, ShortcutPoint};
pub use cost::{filter_cost, total_cost, total_cost_with, CostAssumptions, CostBreakdown, CostCombiner, ExpectedCalls, FilterCost};
pub use report::{Report, ReportFormat, ReportRow};
pub use sweep::{recommend_delta, sweep_delta, Recommendation, SweepReport};
