//! Acceptance suite: one test per criterion, each printing a PASS line.
//!
//! Run with `cargo test -p modsolver --test acceptance -- --nocapture` to
//! see the per-criterion lines.

mod common;

use num_complex::Complex64;

use common::{bus_voltage, fixture, output};
use modsolver::engine::{run_document, run_document_full, RunOptions};
use modsolver::matpower::{emit_model, parse_case, ConvertOptions, Format};
use modsolver::report::{emit_report, trace_csv};
use modsolver::value::Value;
use modsolver::{
    diff_real, diff_wirtinger, evaluate, normalize_conj, parse_expression_str, parse_source,
    pretty_print, validate_document, WirtVar,
};

fn run_fixture(name: &str) -> modsolver::report::RunReport {
    let doc = parse_source(&fixture(name)).unwrap();
    run_document(&doc, &RunOptions::default()).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn complex_of(v: Value) -> Complex64 {
    v.as_complex().unwrap()
}

// ----------------------------------------------------------------------
// 1. Example 1/2 equivalence
// ----------------------------------------------------------------------

#[test]
fn criterion_01_real_and_complex_power_flow_agree() {
    let polar = run_fixture("example1.mod");
    let complex = run_fixture("example2.mod");
    assert!(polar.converged() && complex.converged());

    let phasor = |mag: &str, ang: &str| {
        Complex64::from_polar(
            output(&polar, mag).as_real().unwrap(),
            output(&polar, ang).as_real().unwrap(),
        )
    };
    let v2_polar = phasor("v_2", "δ_2");
    let v3_polar = phasor("v_3", "δ_3");
    let v2_complex = complex_of(output(&complex, "v2"));
    let v3_complex = complex_of(output(&complex, "v3"));

    assert!(
        (v2_polar - v2_complex).norm() < 1e-8,
        "v2 differs: {v2_polar} vs {v2_complex}"
    );
    assert!(
        (v3_polar - v3_complex).norm() < 1e-8,
        "v3 differs: {v3_polar} vs {v3_complex}"
    );
    assert!((v2_complex.norm() - 0.984267).abs() < 1e-5);
    assert!((v3_complex.norm() - 0.969386).abs() < 1e-5);
    println!("criterion 1 (polar/complex power-flow equivalence): PASS");
}

// ----------------------------------------------------------------------
// 2. Constant cross-check
// ----------------------------------------------------------------------

#[test]
fn criterion_02_polar_constants() {
    let eval = |src: &str| {
        evaluate(&parse_expression_str(src).unwrap(), &modsolver::Env::new())
            .unwrap()
            .as_real()
            .unwrap()
    };
    let ay = eval("abs(1/(0.005+0.03i))");
    assert!((ay - 32.8797974610715).abs() < 1e-10, "aY = {ay}");
    // arg(1/z) and arg(-1/z) via atan of imag/real parts.
    let z = Complex64::new(0.005, 0.03);
    let diag = (Complex64::new(1.0, 0.0) / z).arg();
    let off = (-(Complex64::new(1.0, 0.0) / z)).arg();
    assert!((diag - -1.40564764938027).abs() < 1e-10, "θ_diag = {diag}");
    assert!((off - 1.73594500420952).abs() < 1e-10, "θ_offDiag = {off}");
    // The same constants through the evaluator.
    let diag_eval = eval("imag(log(1/(0.005+0.03i)))");
    let off_eval = eval("imag(log(-1/(0.005+0.03i)))");
    assert!((diag_eval - -1.40564764938027).abs() < 1e-10);
    assert!((off_eval - 1.73594500420952).abs() < 1e-10);
    println!("criterion 2 (admittance constant cross-check): PASS");
}

// ----------------------------------------------------------------------
// 3. Example 3: PV node with reactive limits
// ----------------------------------------------------------------------

#[test]
fn criterion_03_pv_node_with_q_limits() {
    // High ceiling: regulation holds, no signal fires.
    let doc = parse_source(&fixture("example3.mod")).unwrap();
    let (report, env) = run_document_full(&doc, &RunOptions::default()).unwrap();
    assert!(report.converged());
    assert_eq!(report.signals().count(), 0, "no signal expected");
    let v2 = complex_of(output(&report, "v2")).norm();
    assert!((v2 - 1.01).abs() < 1e-6, "regulated |v2| = {v2}");
    assert_eq!(env.value("cGen2Reg").unwrap(), Value::Bool(true));

    // Tight ceiling: exactly one TooHigh, generator pinned at 0.5.
    let doc = parse_source(&fixture("example3_qmax05.mod")).unwrap();
    let (report, env) = run_document_full(&doc, &RunOptions::default()).unwrap();
    assert!(report.converged());
    let fired: Vec<&str> = report.signals().map(|s| s.name.as_str()).collect();
    assert_eq!(fired, ["TooHigh"]);
    let q2 = env.value("Q2_inj").unwrap().as_real().unwrap();
    assert!((q2 - 0.5).abs() < 1e-12, "Q2_inj = {q2}");
    let v2 = complex_of(output(&report, "v2")).norm();
    assert!(v2 < 1.01, "|v2| = {v2} must sag below the setpoint");
    assert_eq!(env.value("cGen2Reg").unwrap(), Value::Bool(false));
    println!("criterion 3 (PV node reactive limit handling): PASS");
}

// ----------------------------------------------------------------------
// 4. Example 4: Volt-VAr curve
// ----------------------------------------------------------------------

/// Independent piecewise oracle for the Volt-VAr characteristic:
/// breakpoints 0.94 / 1.00 / 1.04 / 1.10, plateau 0.66, slopes -11.
fn volt_var_oracle(v: f64) -> f64 {
    const PLATEAU: f64 = 0.66;
    const K: f64 = -11.0;
    if v < 0.94 {
        PLATEAU
    } else if v < 1.00 {
        PLATEAU + K * (v - 0.94)
    } else if v <= 1.04 {
        0.0
    } else if v <= 1.10 {
        K * (v - 1.04)
    } else {
        -PLATEAU
    }
}

#[test]
fn criterion_04_volt_var_operating_point_on_curve() {
    let report = run_fixture("example4.mod");
    assert!(report.converged());
    let v2 = output(&report, "v_2").as_real().unwrap();
    let q2 = output(&report, "Q2_inj").as_real().unwrap();
    let expected = volt_var_oracle(v2);
    assert!(
        (q2 - expected).abs() < 1e-8,
        "(v2, Q2) = ({v2}, {q2}), curve says {expected}"
    );
    println!("criterion 4 (Volt-VAr operating point on the curve): PASS");
}

// ----------------------------------------------------------------------
// 5. Example 5: repeats to the nose
// ----------------------------------------------------------------------

#[test]
fn criterion_05_loadability_trace() {
    // reInit=false: warm starts give a continuous upper-branch trace that
    // ends at a Newton failure before the repeat bound.
    let doc = parse_source(&fixture("example5_noreinit.mod")).unwrap();
    let report = run_document(&doc, &RunOptions::default()).unwrap();
    let max_reps = doc.header.max_reps();
    assert!(report.records.len() <= max_reps, "repeat bound violated");
    let last = report.records.last().unwrap();
    assert!(!last.converged, "the trace must end at a solve failure");
    assert!(
        report.records.len() < max_reps,
        "nose must be found before maxReps"
    );
    let v3_mags: Vec<f64> = report
        .records
        .iter()
        .filter(|r| r.converged)
        .map(|r| {
            r.outputs
                .iter()
                .find(|(n, _)| n == "v3")
                .map(|(_, v)| v.as_complex().unwrap().norm())
                .unwrap()
        })
        .collect();
    assert!(v3_mags.len() > 10, "expected a long trace");
    for pair in v3_mags.windows(2) {
        assert!(
            (pair[1] - pair[0]).abs() < 0.05,
            "trace jump {} -> {}",
            pair[0],
            pair[1]
        );
    }
    let csv = trace_csv(&report).expect("repeats present");
    let rows = csv.lines().count() - 1;
    assert!(rows <= max_reps);
    assert_eq!(rows, v3_mags.len());

    // reInit=true: also terminates at a failure; no continuity assertion.
    let doc = parse_source(&fixture("example5.mod")).unwrap();
    let report = run_document(&doc, &RunOptions::default()).unwrap();
    assert!(!report.records.last().unwrap().converged);
    assert!(report.records.len() <= doc.header.max_reps());
    println!("criterion 5 (loadability trace to the nose): PASS");
}

// ----------------------------------------------------------------------
// 6. Example 6: WLS with equality constraints
// ----------------------------------------------------------------------

#[test]
fn criterion_06_equality_constrained_estimation() {
    let report = run_fixture("example6.mod");
    assert!(report.converged());
    let outcome = report.records.last().unwrap().outcome.as_ref().unwrap();
    let wls = outcome.as_wls().unwrap();
    assert!(
        wls.constraint_norm < 1e-8,
        "EC residual {}",
        wls.constraint_norm
    );
    assert!(wls.kkt_norm < 1e-6, "KKT norm {}", wls.kkt_norm);
    let v2 = complex_of(output(&report, "v2")).norm();
    let v3 = complex_of(output(&report, "v3")).norm();
    assert!((v2 - 0.984267).abs() < 1e-3, "|v2| = {v2}");
    assert!((v3 - 0.969386).abs() < 1e-3, "|v3| = {v3}");
    println!("criterion 6 (equality-constrained WLS estimation): PASS");
}

// ----------------------------------------------------------------------
// 7. Example 7: submodel-fed estimation
// ----------------------------------------------------------------------

#[test]
fn criterion_07_submodel_degenerates_and_reproduces() {
    // Zero noise: the submodel-fed estimate matches the direct one.
    let direct = run_fixture("example6.mod");
    let fed = run_fixture("example7_dev0.mod");
    for name in ["v1", "v2", "v3"] {
        let a = complex_of(output(&direct, name));
        let b = complex_of(output(&fed, name));
        assert!(
            (a - b).norm() < 1e-6,
            "{name}: direct {a} vs submodel-fed {b}"
        );
    }
    // Published devs with a fixed seed: bit-identical reruns.
    let doc = parse_source(&fixture("example7.mod")).unwrap();
    let opts = RunOptions {
        seed: 42,
        report_override: None,
    };
    let (r1, _) = run_document_full(&doc, &opts).unwrap();
    let (r2, _) = run_document_full(&doc, &opts).unwrap();
    assert_eq!(
        emit_report(&r1, r1.level),
        emit_report(&r2, r2.level),
        "reports must be byte-identical"
    );
    for ((n1, v1), (n2, v2)) in r1
        .records
        .last()
        .unwrap()
        .outputs
        .iter()
        .zip(&r2.records.last().unwrap().outputs)
    {
        assert_eq!(n1, n2);
        let bits = |v: &Value| match v {
            Value::Complex(z) => (z.re.to_bits(), z.im.to_bits()),
            Value::Real(x) => (x.to_bits(), 0),
            Value::Int(n) => (*n as u64, 0),
            Value::Bool(b) => (*b as u64, 0),
        };
        assert_eq!(bits(v1), bits(v2), "{n1} not bitwise reproducible");
    }
    println!("criterion 7 (submodel-fed estimation, noise degeneracy + reproducibility): PASS");
}

// ----------------------------------------------------------------------
// 8. Example 8: LTC discretization
// ----------------------------------------------------------------------

#[test]
fn criterion_08_ltc_discretization() {
    let doc = parse_source(&fixture("example8.mod")).unwrap();
    let (report, _env) = run_document_full(&doc, &RunOptions::default()).unwrap();
    assert!(report.converged());
    let t = output(&report, "t").as_real().unwrap();
    let steps = (t - 1.0) / 0.0125;
    assert!(
        (steps - steps.round()).abs() < 1e-9,
        "tap {t} is not on the 0.0125 grid"
    );
    let fired: Vec<&str> = report.signals().map(|s| s.name.as_str()).collect();
    assert_eq!(fired.len(), 1, "exactly one LTC signal, got {fired:?}");
    assert!(
        ["TooLow", "TooHigh", "Rounding"].contains(&fired[0]),
        "{fired:?}"
    );
    let pos = match output(&report, "LTC_pos") {
        Value::Int(n) => n,
        other => panic!("LTC_pos should be an int, got {other:?}"),
    };
    assert_eq!(pos, steps.round() as i64, "LTC_pos vs tap steps");
    println!("criterion 8 (LTC tap discretization): PASS");
}

// ----------------------------------------------------------------------
// 9. MATPOWER validation
// ----------------------------------------------------------------------

#[test]
fn criterion_09_matpower_conversion_matches_reference() {
    let cases = ["case5", "case9", "case14", "case30", "case118"];
    for name in cases {
        let case_text = fixture(&format!("matpower/{name}.m"));
        let case = parse_case(&case_text).unwrap();
        let reference = common::refpf::reference_power_flow(&case)
            .unwrap_or_else(|e| panic!("{name}: reference power flow: {e}"));
        power_balance_check(&case, &reference, name);

        let mut solutions: Vec<(Format, Vec<Complex64>)> = Vec::new();
        for format in [Format::Polar, Format::Rectangular, Format::Complex] {
            let opts = ConvertOptions {
                format,
                ..ConvertOptions::default()
            };
            let text = emit_model(&case, &opts).unwrap();
            let doc =
                parse_source(&text).unwrap_or_else(|e| panic!("{name} ({format:?}): parse: {e}"));
            let diags = validate_document(&doc);
            assert!(diags.is_empty(), "{name} ({format:?}): {diags:?}");
            let report = run_document(&doc, &RunOptions::default())
                .unwrap_or_else(|e| panic!("{name} ({format:?}): {e}"));
            assert!(report.converged(), "{name} ({format:?}) did not converge");
            let voltages: Vec<Complex64> = case
                .buses
                .iter()
                .map(|b| bus_voltage(&report, format, b.id, true))
                .collect();
            // Converter output vs the independent reference solver.
            let max_err = voltages
                .iter()
                .zip(&reference)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0f64, f64::max);
            assert!(
                max_err < 1e-6,
                "{name} ({format:?}): max |dV| vs reference = {max_err:.3e}"
            );
            solutions.push((format, voltages));
        }
        // Pairwise format agreement.
        for i in 0..solutions.len() {
            for j in i + 1..solutions.len() {
                let max_diff = solutions[i]
                    .1
                    .iter()
                    .zip(&solutions[j].1)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0f64, f64::max);
                assert!(
                    max_diff < 1e-8,
                    "{name}: {:?} vs {:?} max |dV| = {max_diff:.3e}",
                    solutions[i].0,
                    solutions[j].0
                );
            }
        }
    }
    println!("criterion 9 (MATPOWER conversion, 15 runs vs reference): PASS");
}

/// Power balance at the reference solution: total generation minus load
/// (the nodal injections implied by the solved voltages) equals the network
/// losses within 1e-8 pu. Losses are recomputed element-wise per branch and
/// shunt, independently of the Ybus matrix used by the solver.
fn power_balance_check(case: &modsolver::matpower::CaseData, voltages: &[Complex64], name: &str) {
    let index = case.bus_index();
    let ybus = modsolver::matpower::build_ybus(case).unwrap();
    let iv = ybus.mul_vec(voltages);
    let injections: f64 = voltages
        .iter()
        .zip(&iv)
        .map(|(v, i)| (v * i.conj()).re)
        .sum();
    // Element-wise losses: series + charging + bus shunts.
    let mut losses = 0.0;
    for br in &case.branches {
        if !br.status {
            continue;
        }
        let f = index[&br.from];
        let t = index[&br.to];
        let ys = Complex64::new(1.0, 0.0) / Complex64::new(br.r, br.x);
        let bc = Complex64::new(0.0, br.b / 2.0);
        let tap = if br.tap == 0.0 { 1.0 } else { br.tap };
        let tph = Complex64::from_polar(tap, br.shift_deg.to_radians());
        let vf = voltages[f] / tph;
        let vt = voltages[t];
        let i_series = (vf - vt) * ys;
        losses += ((vf - vt) * i_series.conj()).re;
        losses += (vf * (vf * bc).conj()).re + (vt * (vt * bc).conj()).re;
    }
    for (i, bus) in case.buses.iter().enumerate() {
        let y_sh = Complex64::new(bus.gs, bus.bs) / case.base_mva;
        losses += (voltages[i] * (voltages[i] * y_sh).conj()).re;
    }
    assert!(
        (injections - losses).abs() < 1e-8,
        "{name}: power balance violated: injections {injections} vs losses {losses}"
    );
}

// ----------------------------------------------------------------------
// 10. Derivative property suite
// ----------------------------------------------------------------------

struct Lcg(u64);

impl Lcg {
    fn next_f64(&mut self) -> f64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    fn in_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

fn env_with(name: &str, v: Value) -> modsolver::Env {
    let mut env = modsolver::Env::new();
    env.declare(
        name,
        modsolver::env::Slot {
            value: v,
            ty: v.scalar_type(),
            kind: modsolver::env::SymbolKind::Var,
            out: false,
        },
    );
    env
}

#[test]
fn criterion_10_derivatives_vs_finite_differences() {
    // Differentiable builtin compositions used across the bundled examples,
    // each with a sampling range that keeps central differences well-posed.
    let compositions: &[(&str, f64, f64)] = &[
        ("sin(x)", -3.0, 3.0),
        ("cos(x)", -3.0, 3.0),
        ("tan(x)", -1.2, 1.2),
        ("exp(x)", -2.0, 2.0),
        ("log(x)", 0.2, 5.0),
        ("sqrt(x)", 0.2, 5.0),
        ("abs(x)", 0.3, 4.0),
        ("asin(x)", -0.9, 0.9),
        ("acos(x)", -0.9, 0.9),
        ("atan(x)", -4.0, 4.0),
        ("x^2", -4.0, 4.0),
        ("x^3", -4.0, 4.0),
        ("1/x", 0.3, 5.0),
        ("x^2*cos(x)", -3.0, 3.0),
        ("sin(x)*cos(x)", -3.0, 3.0),
        ("exp(sin(x))", -3.0, 3.0),
        ("sqrt(x)*log(x)", 0.3, 5.0),
        ("x^2*32.8797974610715*cos(x - 1.40564764938027)", -2.0, 2.0),
        ("(x^2 + 1)/(x + 2)", -1.0, 4.0),
        ("e^(0.5*x)", -2.0, 2.0),
    ];
    let mut rng = Lcg(0x5EED);
    for (src, lo, hi) in compositions {
        let expr = parse_expression_str(src).unwrap();
        let deriv = diff_real(&expr, "x").unwrap();
        for _ in 0..200 {
            let x = rng.in_range(*lo, *hi);
            let h = 1e-6 * x.abs().max(1.0);
            let f = |x: f64| {
                evaluate(&expr, &env_with("x", Value::Real(x)))
                    .unwrap()
                    .as_real()
                    .unwrap()
            };
            let fd = (f(x + h) - f(x - h)) / (2.0 * h);
            let sym = evaluate(&deriv, &env_with("x", Value::Real(x)))
                .unwrap()
                .as_real()
                .unwrap();
            let scale = sym.abs().max(fd.abs()).max(1.0);
            assert!(
                (sym - fd).abs() / scale < 1e-6,
                "{src} at x={x}: symbolic {sym} vs fd {fd}"
            );
        }
    }

    // Wirtinger pair symmetry: dE/dv equals conj(d conj(E)/d conj(v)),
    // exactly in structure and to 1e-12 numerically.
    let pairs = [
        "v*conj(v)",
        "y22*v - y21*w",
        "v*conj(y22*v - y21*w)",
        "(v + conj(v))*v",
        "conj(v)*v^2",
        "v^3 - conj(w)*v",
    ];
    let mut rng = Lcg(0xC0FFEE);
    for src in pairs {
        let all = |_: &str| true;
        let e = normalize_conj(&parse_expression_str(src).unwrap(), &all);
        let partner = normalize_conj(&modsolver::Expr::conj(e.clone()), &all);
        let d_e = diff_wirtinger(&e, &WirtVar::plain("v")).unwrap();
        let d_p = diff_wirtinger(&partner, &WirtVar::conjugate("v")).unwrap();
        // Structure: identical occurrence pattern up to conjugation.
        let pattern = |expr: &modsolver::Expr| {
            let mut plain = std::collections::BTreeSet::new();
            let mut conj = std::collections::BTreeSet::new();
            expr.visit_idents(&mut |n, c| {
                if c {
                    conj.insert(n.to_string());
                } else {
                    plain.insert(n.to_string());
                }
            });
            (plain, conj)
        };
        let (p1, c1) = pattern(&d_e);
        let (p2, c2) = pattern(&d_p);
        assert_eq!(p1, c2, "{src}: structure asymmetry");
        assert_eq!(c1, p2, "{src}: structure asymmetry");
        for _ in 0..50 {
            let mut env = modsolver::Env::new();
            for name in ["v", "w", "y22", "y21"] {
                env.declare(
                    name,
                    modsolver::env::Slot {
                        value: Value::Complex(Complex64::new(
                            rng.in_range(-2.0, 2.0),
                            rng.in_range(-2.0, 2.0),
                        )),
                        ty: modsolver::value::ScalarType::Complex,
                        kind: modsolver::env::SymbolKind::Var,
                        out: false,
                    },
                );
            }
            let a = evaluate(&d_e, &env).unwrap().as_complex().unwrap();
            let b = evaluate(&d_p, &env).unwrap().as_complex().unwrap();
            assert!((a - b.conj()).norm() < 1e-12, "{src}: {a} vs conj({b})");
        }
    }
    println!("criterion 10 (symbolic derivatives vs finite differences, Wirtinger symmetry): PASS");
}

// ----------------------------------------------------------------------
// 11. Parser suite
// ----------------------------------------------------------------------

#[test]
fn criterion_11_parser_suite() {
    let examples = [
        "example1.mod",
        "example2.mod",
        "example3.mod",
        "example4.mod",
        "example5.mod",
        "example6.mod",
        "example7.mod",
        "example8.mod",
    ];
    for name in examples {
        let doc = parse_source(&fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        let diags = validate_document(&doc);
        assert!(diags.is_empty(), "{name}: {diags:?}");
        let p1 = pretty_print(&doc);
        let p2 = pretty_print(&parse_source(&p1).unwrap());
        assert_eq!(p1, p2, "{name}: pretty-print is not a fixed point");
    }
    // Reserved-word misuse is rejected.
    let doc = parse_source("Header: end\nModel:\nVars: end=1\nNLEs: 1=1\nend").unwrap();
    let diags = validate_document(&doc);
    assert!(
        diags.iter().any(|d| d.message.contains("reserved word")),
        "{diags:?}"
    );
    // Misplaced default is rejected.
    let doc = parse_source(
        "Header: end\nModel:\nVars: x=1\nNLEs:\nswitch:\ndefault -> x = 0\ncase x < 1 -> x = 1\nend\nend",
    )
    .unwrap();
    let diags = validate_document(&doc);
    assert!(
        diags
            .iter()
            .any(|d| d.message.contains("must be the last case")),
        "{diags:?}"
    );
    println!("criterion 11 (parser suite over all bundled examples): PASS");
}
