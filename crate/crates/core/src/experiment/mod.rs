//! Plan files, the resumable cell runner and result reports.

mod plan;
mod report;
mod runner;

pub use plan::{
    ArchBase, Cell, ExperimentPlan, FilterArm, InterventionConfig, ParaphraseArm, PlanBase, PlanMode, Point,
    PointValue, RepeatSeeds, SweepAxis, TrainBase, TrainPreset,
};
pub use report::{emit_report, parse_csv, parse_records, ReportFormat, CSV_HEADER};
pub use runner::{
    cell_dataset, load_rows, plan_dir, read_ledger, run_plan, CellRecord, CellStatus, Manifest, PlanRun, ResultRow,
    RunOptions,
};
