//! Experiment matrix, table reproduction, calibration oracle and CLI.

pub mod cli;
mod oracle;
mod report;

pub use oracle::{calibration_oracle, golden_rows, GoldenRow, Mismatch, OracleOutcome, GOLDEN_TABLE};
pub use report::{
    headline_deltas, run_matrix, Column, ColumnSummary, MatrixReport, MatrixRow, Percent, PointDelta, TrialParams,
    COLUMNS,
};
