//! Converter end-to-end checks: emit model text from case data, parse it
//! back, solve, and compare across formats.

use modsolver::engine::{run_document, RunOptions};
use modsolver::matpower::{emit_model, load_config, parse_case, ConvertOptions, Format, Symbols};
use modsolver::value::Value;
use modsolver::{parse_source, validate_document};

/// The three-node network behind the bundled examples: slack, a
/// zero-injection middle node and a PQ load, two identical branches.
const THREE_NODE: &str = "\
function mpc = three_node
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
    1  3  0    0   0  0  1  1.0  0  230  1  1.1  0.9;
    2  1  0    0   0  0  1  1.0  0  230  1  1.1  0.9;
    3  1  100  30  0  0  1  1.0  0  230  1  1.1  0.9;
];
mpc.gen = [
    1  0  0  300  -300  1.0  100  1  250  10;
];
mpc.branch = [
    1  2  0.005  0.03  0  250  250  250  0  0  1  -360  360;
    2  3  0.005  0.03  0  250  250  250  0  0  1  -360  360;
];
";

fn solve_emission(case_text: &str, format: Format) -> Vec<(String, Value)> {
    let case = parse_case(case_text).unwrap();
    let opts = ConvertOptions {
        format,
        ..ConvertOptions::default()
    };
    let text = emit_model(&case, &opts).unwrap();
    let doc =
        parse_source(&text).unwrap_or_else(|e| panic!("emitted model must parse: {e}\n{text}"));
    let diags = validate_document(&doc);
    assert!(
        diags.is_empty(),
        "emitted model diagnostics: {diags:?}\n{text}"
    );
    let report = run_document(&doc, &RunOptions::default()).unwrap();
    assert!(report.converged(), "emitted model must solve:\n{text}");
    report.records.last().unwrap().outputs.clone()
}

fn magnitude(outputs: &[(String, Value)], format: Format, id: usize) -> f64 {
    match format {
        Format::Polar => outputs
            .iter()
            .find(|(n, _)| *n == format!("v_{id}"))
            .map(|(_, v)| v.as_real().unwrap())
            .unwrap(),
        Format::Rectangular => {
            let e = outputs
                .iter()
                .find(|(n, _)| *n == format!("e_{id}"))
                .map(|(_, v)| v.as_real().unwrap())
                .unwrap();
            let f = outputs
                .iter()
                .find(|(n, _)| *n == format!("f_{id}"))
                .map(|(_, v)| v.as_real().unwrap())
                .unwrap();
            (e * e + f * f).sqrt()
        }
        Format::Complex => outputs
            .iter()
            .find(|(n, _)| *n == format!("v_{id}"))
            .map(|(_, v)| v.as_complex().unwrap().norm())
            .unwrap(),
    }
}

#[test]
fn three_node_all_formats_match_known_magnitudes() {
    for format in [Format::Polar, Format::Rectangular, Format::Complex] {
        let outs = solve_emission(THREE_NODE, format);
        let v2 = magnitude(&outs, format, 2);
        let v3 = magnitude(&outs, format, 3);
        assert!((v2 - 0.984267).abs() < 1e-5, "{format:?}: v2 = {v2}");
        assert!((v3 - 0.969386).abs() < 1e-5, "{format:?}: v3 = {v3}");
    }
}

#[test]
fn polar_emission_mirrors_handwritten_structure() {
    // The polar emission of the three-node network carries the same
    // equation set as the handwritten polar model: one current-sum pair for
    // the ZI node, one power pair for the PQ node.
    let case = parse_case(THREE_NODE).unwrap();
    let opts = ConvertOptions::default();
    let text = emit_model(&case, &opts).unwrap();
    assert!(text.contains("// node 2 (ZI): sum of currents = 0"));
    assert!(text.contains("// node 3 (PQ)"));
    let doc = parse_source(&text).unwrap();
    let nles = doc.group(modsolver::ast::GroupKind::Nles).unwrap();
    assert_eq!(nles.statements.len(), 4);
    // Greek symbols by default.
    assert!(text.contains("δ_2"));
    assert!(text.contains("θ_2_1"));
}

#[test]
fn ascii_symbols() {
    let case = parse_case(THREE_NODE).unwrap();
    let opts = ConvertOptions {
        symbols: Symbols::Ascii,
        ..ConvertOptions::default()
    };
    let text = emit_model(&case, &opts).unwrap();
    assert!(text.contains("d_2"));
    assert!(text.contains("th_2_1"));
    assert!(!text.contains("δ"));
}

#[test]
fn complex_emission_mirrors_handwritten_structure() {
    let case = parse_case(THREE_NODE).unwrap();
    let opts = ConvertOptions {
        format: Format::Complex,
        ..ConvertOptions::default()
    };
    let text = emit_model(&case, &opts).unwrap();
    // Current-sum pair and power pair, like the handwritten complex model.
    assert!(text.contains("conj(y_2_1*v_1 + y_2_2*v_2 + y_2_3*v_3) = 0"));
    assert!(text.contains("v_3*conj(y_3_2*v_2 + y_3_3*v_3) = S3_inj"));
    assert!(text.contains("conj(v_3)*(y_3_2*v_2 + y_3_3*v_3) = conj(S3_inj)"));
}

#[test]
fn emission_is_deterministic() {
    let case = parse_case(THREE_NODE).unwrap();
    let opts = ConvertOptions::default();
    assert_eq!(
        emit_model(&case, &opts).unwrap(),
        emit_model(&case, &opts).unwrap()
    );
}

#[test]
fn zip_composition_solves_and_reduces_load_below_nominal_voltage() {
    // With ZIP weights the delivered load shrinks as voltage sags, so the
    // PQ-bus voltage ends slightly higher than under constant power.
    let config = "<config><variables><zip>\
        <active z=\"0.2\" i=\"0.3\" p=\"0.5\"/>\
        <reactive z=\"0.2\" i=\"0.3\" p=\"0.5\"/>\
        </zip></variables></config>";
    let opts = load_config(config).unwrap();
    let case = parse_case(THREE_NODE).unwrap();
    let text = emit_model(&case, &opts).unwrap();
    let doc = parse_source(&text).unwrap();
    let report = run_document(&doc, &RunOptions::default()).unwrap();
    assert!(report.converged(), "{text}");
    let v3 = report.output("v_3").unwrap().as_real().unwrap();
    let constant_power = solve_emission(THREE_NODE, Format::Polar);
    let v3_cp = magnitude(&constant_power, Format::Polar, 3);
    assert!(v3 > v3_cp, "zip v3 {v3} vs constant-power {v3_cp}");
}

#[test]
fn q_limit_emission_solves_and_pins_reactive_output() {
    // PV bus with a reactive ceiling below what regulation needs: exactly
    // one TooHigh fires and the generator ends at its limit.
    let case_text = "\
function mpc = qlim
mpc.baseMVA = 100;
mpc.bus = [
    1  3  0    0   0  0  1  1.0   0  230  1  1.1  0.9;
    2  2  0    0   0  0  1  1.0   0  230  1  1.1  0.9;
    3  1  100  30  0  0  1  1.0   0  230  1  1.1  0.9;
];
mpc.gen = [
    1  0   0  300  -300  1.0   100  1  250  10;
    2  20  0  50   -100  1.01  100  1  250  10;
];
mpc.branch = [
    1  2  0.005  0.03  0  250  250  250  0  0  1  -360  360;
    2  3  0.005  0.03  0  250  250  250  0  0  1  -360  360;
];
";
    let config = "<config><limits><enforceQLimits>true</enforceQLimits></limits></config>";
    let opts = load_config(config).unwrap();
    assert!(opts.enforce_q_limits);
    let case = parse_case(case_text).unwrap();
    let text = emit_model(&case, &opts).unwrap();
    let doc = parse_source(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
    let diags = validate_document(&doc);
    assert!(diags.is_empty(), "{diags:?}\n{text}");
    let report = run_document(&doc, &RunOptions::default()).unwrap();
    assert!(report.converged(), "{text}");
    let fired: Vec<&str> = report.signals().map(|s| s.name.as_str()).collect();
    assert_eq!(fired, ["TooHigh"], "signals {fired:?}\n{text}");
    // 50 MVAr ceiling = 0.5 pu.
    let v2 = report.output("v_2").unwrap().as_real().unwrap();
    assert!(v2 < 1.01, "voltage must sag below the setpoint, got {v2}");
}

#[test]
fn case9_fixture_counts() {
    let case = parse_case(
        &std::fs::read_to_string(format!(
            "{}/tests/fixtures/matpower/case9.m",
            env!("CARGO_MANIFEST_DIR")
        ))
        .unwrap(),
    )
    .unwrap();
    assert_eq!(case.buses.len(), 9);
    assert_eq!(case.gens.len(), 3);
    assert_eq!(case.branches.len(), 9);
    assert_eq!(case.base_mva, 100.0);
}

#[test]
fn case9_ybus_matches_dense_oracle() {
    // Brute-force dense admittance construction, independent of the sparse
    // triplet path used by build_ybus.
    use num_complex::Complex64;
    let case = parse_case(
        &std::fs::read_to_string(format!(
            "{}/tests/fixtures/matpower/case9.m",
            env!("CARGO_MANIFEST_DIR")
        ))
        .unwrap(),
    )
    .unwrap();
    let n = case.buses.len();
    let index = case.bus_index();
    let mut dense = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for br in &case.branches {
        if !br.status {
            continue;
        }
        let ys = Complex64::new(1.0, 0.0) / Complex64::new(br.r, br.x);
        let bc = Complex64::new(0.0, br.b / 2.0);
        let tap = if br.tap == 0.0 { 1.0 } else { br.tap };
        let shift = br.shift_deg.to_radians();
        let t = Complex64::from_polar(tap, shift);
        let (f, to) = (index[&br.from], index[&br.to]);
        dense[f][f] += (ys + bc) / (tap * tap);
        dense[f][to] += -ys / t.conj();
        dense[to][f] += -ys / t;
        dense[to][to] += ys + bc;
    }
    for (i, bus) in case.buses.iter().enumerate() {
        dense[i][i] += Complex64::new(bus.gs, bus.bs) / case.base_mva;
    }
    let ybus = modsolver::matpower::build_ybus(&case).unwrap().to_dense();
    let mut max_diff = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            max_diff = max_diff.max((ybus[i][j] - dense[i][j]).norm());
        }
    }
    assert!(max_diff < 1e-12, "max entry diff {max_diff}");
}

#[test]
fn case9_polar_emission_counting_rule() {
    // Constant-power ZIP: two equations and two unknowns per non-slack bus,
    // 8 of them in this case, so 16 each.
    let case = parse_case(
        &std::fs::read_to_string(format!(
            "{}/tests/fixtures/matpower/case9.m",
            env!("CARGO_MANIFEST_DIR")
        ))
        .unwrap(),
    )
    .unwrap();
    let text = emit_model(&case, &ConvertOptions::default()).unwrap();
    let doc = parse_source(&text).unwrap();
    let nles = doc.group(modsolver::ast::GroupKind::Nles).unwrap();
    let rows: usize = nles
        .statements
        .iter()
        .map(|s| match s {
            modsolver::ast::Statement::Equation { .. } => 1,
            modsolver::ast::Statement::If { .. } | modsolver::ast::Statement::Switch { .. } => 1,
            _ => 0,
        })
        .sum();
    assert_eq!(rows, 16);
    let vars = doc.group(modsolver::ast::GroupKind::Vars).unwrap();
    assert_eq!(vars.statements.len(), 16);
}

#[test]
fn non_consecutive_bus_ids() {
    // Bus ids 1, 50, 70: the id->index map keeps everything lined up.
    let case_text = "\
function mpc = sparse_ids
mpc.baseMVA = 100;
mpc.bus = [
    1   3  0   0   0  0  1  1.0  0  230  1  1.1  0.9;
    50  1  0   0   0  0  1  1.0  0  230  1  1.1  0.9;
    70  1  80  25  0  0  1  1.0  0  230  1  1.1  0.9;
];
mpc.gen = [
    1  0  0  300  -300  1.0  100  1  250  10;
];
mpc.branch = [
    1   50  0.005  0.03  0  250  250  250  0  0  1  -360  360;
    50  70  0.005  0.03  0  250  250  250  0  0  1  -360  360;
];
";
    let case = parse_case(case_text).unwrap();
    assert_eq!(case.bus_index()[&70], 2);
    for format in [Format::Polar, Format::Rectangular, Format::Complex] {
        let opts = ConvertOptions {
            format,
            ..ConvertOptions::default()
        };
        let text = emit_model(&case, &opts).unwrap();
        let doc = parse_source(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
        let report = run_document(&doc, &RunOptions::default()).unwrap();
        assert!(report.converged(), "{format:?}:\n{text}");
    }
}

#[test]
fn complex_zip_matches_polar_zip() {
    let config = "<config><variables><zip>\
        <active z=\"0.3\" i=\"0.2\" p=\"0.5\"/>\
        <reactive z=\"0.1\" i=\"0.4\" p=\"0.5\"/>\
        </zip></variables></config>";
    let base = load_config(config).unwrap();
    let case = parse_case(THREE_NODE).unwrap();
    let mut mags = Vec::new();
    for format in [Format::Polar, Format::Rectangular, Format::Complex] {
        let opts = ConvertOptions { format, ..base };
        let text = emit_model(&case, &opts).unwrap();
        let doc = parse_source(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
        let report = run_document(&doc, &RunOptions::default()).unwrap();
        assert!(report.converged(), "{format:?}:\n{text}");
        mags.push(magnitude(
            &report.records.last().unwrap().outputs,
            format,
            3,
        ));
    }
    assert!((mags[0] - mags[1]).abs() < 1e-8, "{mags:?}");
    assert!((mags[0] - mags[2]).abs() < 1e-8, "{mags:?}");
}

#[test]
fn isolated_bus_rejected_at_emission() {
    let case_text = "\
function mpc = isolated
mpc.baseMVA = 100;
mpc.bus = [
    1  3  0   0   0  0  1  1.0  0  230  1  1.1  0.9;
    2  1  50  20  0  0  1  1.0  0  230  1  1.1  0.9;
    3  1  10  5   0  0  1  1.0  0  230  1  1.1  0.9;
];
mpc.gen = [
    1  0  0  300  -300  1.0  100  1  250  10;
];
mpc.branch = [
    1  2  0.01  0.1  0  250  250  250  0  0  1  -360  360;
    2  3  0.01  0.1  0  250  250  250  0  0  0  -360  360;
];
";
    // Branch 2-3 is out of service, leaving bus 3 unconnected.
    let case = parse_case(case_text).unwrap();
    let err = emit_model(&case, &ConvertOptions::default()).unwrap_err();
    assert!(err.to_string().contains("isolated"), "{err}");
}
