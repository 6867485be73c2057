//! MATPOWER bridge: case file parsing, bus admittance construction, and
//! emission of equivalent model files in polar, rectangular or complex form.

pub mod case;
pub mod config;
pub mod emit;
pub mod ybus;

pub use case::{parse_case, Branch, Bus, BusType, CaseData, Gen};
pub use config::{load_config, ConvertOptions, Format, Symbols, Zip};
pub use emit::emit_model;
pub use ybus::build_ybus;
