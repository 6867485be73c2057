//! Shared test support: fixtures and result extraction helpers.
#![allow(dead_code)] // each test binary uses its own subset

pub mod refpf;

use num_complex::Complex64;

use modsolver::matpower::Format;
use modsolver::report::RunReport;
use modsolver::value::Value;

pub fn fixture(name: &str) -> String {
    let path = format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("read {path}: {e}"))
}

pub fn output(report: &RunReport, name: &str) -> Value {
    report
        .output(name)
        .unwrap_or_else(|| panic!("missing output `{name}`"))
}

/// Complex bus voltage from the outputs of a converted-model run.
pub fn bus_voltage(
    report: &RunReport,
    format: Format,
    id: usize,
    symbols_greek: bool,
) -> Complex64 {
    let real = |n: &str| output(report, n).as_real().unwrap();
    match format {
        Format::Polar => {
            let angle_name = if symbols_greek {
                format!("δ_{id}")
            } else {
                format!("d_{id}")
            };
            Complex64::from_polar(real(&format!("v_{id}")), real(&angle_name))
        }
        Format::Rectangular => Complex64::new(real(&format!("e_{id}")), real(&format!("f_{id}"))),
        Format::Complex => output(report, &format!("v_{id}")).as_complex().unwrap(),
    }
}
