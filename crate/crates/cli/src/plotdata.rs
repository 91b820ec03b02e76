//! Long-format plot data: one row per (method, iteration, metric), ready for
//! direct ingestion by plotting tools without pivoting.

use crate::experiment::{format_float, TraceRow};

pub const PLOT_CSV_HEADER: &str = "method,k,metric,value";

const METRICS: [(&str, fn(&TraceRow) -> f64); 2] = [
    ("residual_norm", |row| row.residual_norm),
    ("objective_value", |row| row.objective_value),
];

/// Renders every method's trace into the long format. Values are written
/// with 17 significant digits so they parse back bit-exactly; NaN (e.g. the
/// residual column of a subgradient baseline) is spelled `NaN`.
pub fn emit_plot_data(traces: &[(String, &[TraceRow])]) -> String {
    let mut out = String::from(PLOT_CSV_HEADER);
    out.push('\n');
    for (method, rows) in traces {
        for row in *rows {
            for (metric, extract) in METRICS {
                out.push_str(&format!(
                    "{method},{},{metric},{}\n",
                    row.k,
                    format_float(extract(row))
                ));
            }
        }
    }
    out
}
