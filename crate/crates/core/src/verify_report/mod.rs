//! Exact-model verification of a storage schedule and run reports.

mod report;
mod verify;

pub use report::{
    emit_report, ApproximationError, Failure, FlowExtract, LoopRecord, ReportError, RunReport, StageRecord,
    REPORT_SCHEMA, SCHEMA_VERSION,
};
pub use verify::{find_overloads, rerun_threshold, verify_solution, Overload, ProfitComparison, Verification};
