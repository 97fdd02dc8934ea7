//! Robustness metrics: clean error, per-corruption error grids, mCE, delta
//! reports between two evaluations, and mean attention distance.
//!
//! All error values are percentages at full precision; one-decimal rounding
//! happens only when rendering ([`display1`], [`delta_report`]).

mod attention;
mod metrics;
mod predictions;
mod report;

pub use attention::{mean_attention_distance, AttentionDistances, AttentionDump, AttentionMeta, ROW_TOLERANCE};
pub use metrics::{clean_error, corruption_error_matrix, error_matrix_from_cells, mce, CorruptionErrorMatrix};
pub use predictions::{argmax, Prediction, PredictionSet};
pub use report::{delta_report, delta_row, display1, render_delta_table, round1, DeltaRow, EvalReport};
