//! Conceptual-distance evaluation of symbolic and coordinate forecasts,
//! persistence baselines, the domain-shift protocol and report output.

pub mod emit;
pub mod error;
pub mod extract;
pub mod harness;
pub mod score;

pub use emit::{attention_csv, domain_shift_csv, domain_shift_table, emit_reports, report_csv, report_table, RunResults};
pub use error::{EvalError, Result};
pub use extract::{extract_qtc_from_coords, ground_truth_prediction, QtcContext};
pub use harness::{domain_shift_eval, evaluate, predict_all, report_dictionaries, DomainShiftReport, EvalSettings};
pub use score::{
    batch_statistics, forecast_indices, label_indices, persistence_baseline, score, DistanceTable, EvalReport,
    ReportFramework,
};
