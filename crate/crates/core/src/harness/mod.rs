//! Repeated sparse-data experiments and their reporting.

pub mod config;
pub mod metrics;
pub mod protocol;
pub mod report;

pub use config::RunFile;
pub use metrics::{paired_ttest, recalls, uar, TTest};
pub use protocol::{draw_seed, run_protocol, similarity, ProtocolConfig, ProtocolData, ProtocolOutcome, RunResult, Skipped};
pub use report::{emit_report, markdown_report, parse_csv, summarize, to_csv, CsvRow, TableAxis, CSV_HEADER};

use crate::error::Result;

/// Runs the protocol once per K in `k_list` (all other settings fixed) and
/// merges the outcomes. Infeasible K values end up in `skipped`.
pub fn k_sweep(data: ProtocolData, config: &ProtocolConfig, k_list: &[usize]) -> Result<ProtocolOutcome> {
    let cfg = ProtocolConfig {
        k_values: k_list.to_vec(),
        ..config.clone()
    };
    run_protocol(data, &cfg)
}
