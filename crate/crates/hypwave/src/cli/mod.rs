//! Command-line front end: flat key=value configs, experiment runners, CSV
//! emission. Numeric output is printed with 17 significant digits so reruns
//! with identical config and seed are byte-identical.

pub mod config;
pub mod run;

/// 17-significant-digit float formatting used by every CSV/table writer.
pub fn fmt_float(x: f64) -> String {
    format!("{:.16e}", x)
}
