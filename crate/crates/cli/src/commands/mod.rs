mod curves;
mod fdr;
mod fit;
mod simulate;
mod summarize;

pub use curves::{curves, parse_assignments, CurveReport};
pub use fdr::{fdr_report, FdrReport, FdrRow, DEFAULT_ALPHAS};
pub use fit::{fit, refit};
pub use simulate::{sidecar_path, simulate, Sidecar};
pub use summarize::{summarize, ParamSummary, Summary};
