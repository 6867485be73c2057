//! Emit an equivalent model file from case data, in polar, rectangular or
//! complex form.
//!
//! Slack buses become fixed parameters, PV buses contribute a real-power
//! equation plus a magnitude equation (optionally guarded by reactive
//! limits), PQ buses contribute P/Q injection equations with ZIP load
//! composition, and zero-injection buses are written as current sums.

use std::fmt::Write;

use num_complex::Complex64;

use crate::error::Error;

use super::case::{BusType, CaseData};
use super::config::{ConvertOptions, Format, Symbols, Zip};
use super::ybus::build_ybus;

/// Full-precision literal for a real number (round-trips through the
/// model-language lexer).
fn r_lit(x: f64) -> String {
    format!("{x}")
}

/// Full-precision literal for a complex number, `a+bi` form.
fn c_lit(z: Complex64) -> String {
    if z.im == 0.0 {
        return format!("{}+0i", z.re);
    }
    if z.im < 0.0 {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

/// Aggregated in-service generation at one bus, per-unit. Multiple units
/// sum their P and reactive limits; the voltage set point comes from the
/// first in-service unit.
#[derive(Debug, Clone, Copy, PartialEq)]
struct GenAgg {
    pg: f64,
    qg: f64,
    vg: f64,
    qmin: f64,
    qmax: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Role {
    Slack,
    Pv,
    Pq,
    /// No load, no generation: written as a current sum.
    Zi,
}

struct EmitCtx {
    opts: ConvertOptions,
    /// Per bus: sorted (neighbor index, admittance) of the Ybus row.
    rows: Vec<Vec<(usize, Complex64)>>,
    roles: Vec<Role>,
    ids: Vec<usize>,
    /// Aggregated in-service generation per bus (pu).
    gen: Vec<Option<GenAgg>>,
    /// Loads per bus (pu).
    pd: Vec<f64>,
    qd: Vec<f64>,
    slack: usize,
}

impl EmitCtx {
    fn angle_name(&self, id: usize) -> String {
        match self.opts.symbols {
            Symbols::Greek => format!("δ_{id}"),
            Symbols::Ascii => format!("d_{id}"),
        }
    }

    fn theta_name(&self, i: usize, k: usize) -> String {
        match self.opts.symbols {
            Symbols::Greek => format!("θ_{i}_{k}"),
            Symbols::Ascii => format!("th_{i}_{k}"),
        }
    }

    /// Voltage-magnitude expression of a bus, by format.
    fn vmag(&self, id: usize) -> String {
        match self.opts.format {
            Format::Polar => format!("v_{id}"),
            Format::Rectangular => format!("sqrt(e_{id}^2 + f_{id}^2)"),
            Format::Complex => format!("sqrt(v_{id}*conj(v_{id}))"),
        }
    }

    /// ZIP composition factor for one bus, or None when constant power.
    fn zip_factor(&self, zip: &Zip, id: usize, prefix: &str) -> Option<String> {
        if zip.is_constant_power() {
            return None;
        }
        let v = self.vmag(id);
        Some(format!("({prefix}_z*{v}^2 + {prefix}_i*{v} + {prefix}_p)"))
    }
}

/// Emit the model text for a parsed case.
pub fn emit_model(case: &CaseData, opts: &ConvertOptions) -> Result<String, Error> {
    let ybus = build_ybus(case)?;
    let n = case.buses.len();
    let dense_rows: Vec<Vec<(usize, Complex64)>> = {
        let mut rows = vec![Vec::new(); n];
        for j in 0..n {
            for k in ybus.col_ptr[j]..ybus.col_ptr[j + 1] {
                rows[ybus.row_idx[k]].push((j, ybus.values[k]));
            }
        }
        for row in &mut rows {
            row.sort_by_key(|(j, _)| *j);
        }
        rows
    };
    for (i, row) in dense_rows.iter().enumerate() {
        if row.is_empty() {
            return Err(Error::Case(format!(
                "bus {} is isolated (no in-service branch or shunt touches it)",
                case.buses[i].id
            )));
        }
    }

    let mut gen = vec![None; n];
    let index = case.bus_index();
    for (i, bus) in case.buses.iter().enumerate() {
        let mut pg = 0.0;
        let mut qg = 0.0;
        let mut qmin = 0.0;
        let mut qmax = 0.0;
        let mut vg = None;
        for g in case.gens_at(bus.id) {
            pg += g.pg;
            qg += g.qg;
            qmin += g.qmin;
            qmax += g.qmax;
            if vg.is_none() {
                vg = Some(g.vg);
            }
        }
        if let Some(vg) = vg {
            gen[i] = Some(GenAgg {
                pg: pg / case.base_mva,
                qg: qg / case.base_mva,
                vg,
                qmin: qmin / case.base_mva,
                qmax: qmax / case.base_mva,
            });
        }
    }

    let mut roles = Vec::with_capacity(n);
    let mut slack = None;
    for (i, bus) in case.buses.iter().enumerate() {
        let role = match bus.bus_type {
            BusType::Slack => {
                slack = Some(i);
                Role::Slack
            }
            BusType::Pv if gen[i].is_some() => Role::Pv,
            _ => {
                if bus.pd == 0.0 && bus.qd == 0.0 && gen[i].is_none() {
                    Role::Zi
                } else {
                    Role::Pq
                }
            }
        };
        roles.push(role);
    }
    let slack = slack.ok_or_else(|| Error::Case("no slack bus".into()))?;
    let _ = index;

    let ctx = EmitCtx {
        opts: *opts,
        rows: dense_rows,
        roles,
        ids: case.buses.iter().map(|b| b.id).collect(),
        gen,
        pd: case.buses.iter().map(|b| b.pd / case.base_mva).collect(),
        qd: case.buses.iter().map(|b| b.qd / case.base_mva).collect(),
        slack,
    };

    let mut out = String::new();
    let _ = writeln!(out, "Header:");
    let _ = writeln!(out, "  maxIter=100");
    let _ = writeln!(out, "  report=Solved");
    let _ = writeln!(out, "end");
    let domain = match opts.format {
        Format::Complex => "cplx",
        _ => "real",
    };
    let name = if case.name.is_empty() {
        "converted case".to_string()
    } else {
        format!("{} ({})", case.name, opts.format.name())
    };
    let _ = writeln!(
        out,
        "Model [type=NL domain={domain} eps=1e-10 name=\"{name}\"]:"
    );

    emit_vars(&mut out, case, &ctx);
    emit_params(&mut out, case, &ctx);
    emit_equations(&mut out, case, &ctx)?;
    if opts.enforce_q_limits {
        emit_limits(&mut out, case, &ctx);
    }
    let _ = writeln!(out, "end");
    Ok(out)
}

fn emit_vars(out: &mut String, case: &CaseData, ctx: &EmitCtx) {
    let _ = writeln!(out, "Vars [out=true]:");
    let slack_bus = &case.buses[ctx.slack];
    let va0 = slack_bus.va_deg.to_radians();
    for (i, bus) in case.buses.iter().enumerate() {
        if ctx.roles[i] == Role::Slack {
            continue;
        }
        let id = bus.id;
        // Flat start at the slack angle; PV buses start on their setpoint.
        let vm0 = match ctx.roles[i] {
            Role::Pv => ctx.gen[i].expect("pv gen").vg,
            _ => 1.0,
        };
        match ctx.opts.format {
            Format::Polar => {
                let _ = writeln!(
                    out,
                    "  {}={}; v_{id}={}",
                    ctx.angle_name(id),
                    r_lit(va0),
                    r_lit(vm0)
                );
            }
            Format::Rectangular => {
                let z = Complex64::from_polar(vm0, va0);
                let _ = writeln!(out, "  e_{id}={}; f_{id}={}", r_lit(z.re), r_lit(z.im));
            }
            Format::Complex => {
                let z = Complex64::from_polar(vm0, va0);
                let _ = writeln!(out, "  v_{id}={}", c_lit(z));
            }
        }
    }
}

fn emit_params(out: &mut String, case: &CaseData, ctx: &EmitCtx) {
    let _ = writeln!(out, "Params:");
    // Slack voltage as fixed parameters.
    let slack_bus = &case.buses[ctx.slack];
    let sid = slack_bus.id;
    let va0 = slack_bus.va_deg.to_radians();
    let vz = Complex64::from_polar(slack_bus.vm, va0);
    match ctx.opts.format {
        Format::Polar => {
            let _ = writeln!(
                out,
                "  {}={} [out=true]; v_{sid}={} [out=true] //slack",
                ctx.angle_name(sid),
                r_lit(va0),
                r_lit(slack_bus.vm)
            );
        }
        Format::Rectangular => {
            let _ = writeln!(
                out,
                "  e_{sid}={} [out=true]; f_{sid}={} [out=true] //slack",
                r_lit(vz.re),
                r_lit(vz.im)
            );
        }
        Format::Complex => {
            let _ = writeln!(out, "  v_{sid}={} [out=true] //slack", c_lit(vz));
        }
    }
    // Admittance entries, row by row.
    for (i, row) in ctx.rows.iter().enumerate() {
        if ctx.roles[i] == Role::Slack {
            continue;
        }
        let bi = ctx.ids[i];
        let mut line = String::from("  ");
        for (pos, (k, y)) in row.iter().enumerate() {
            let bk = ctx.ids[*k];
            if pos > 0 {
                line.push_str("; ");
            }
            match ctx.opts.format {
                Format::Polar => {
                    let _ = write!(
                        line,
                        "aY_{bi}_{bk}={}; {}={}",
                        r_lit(y.norm()),
                        ctx.theta_name(bi, bk),
                        r_lit(y.arg())
                    );
                }
                Format::Rectangular => {
                    let _ = write!(
                        line,
                        "G_{bi}_{bk}={}; B_{bi}_{bk}={}",
                        r_lit(y.re),
                        r_lit(y.im)
                    );
                }
                Format::Complex => {
                    let _ = write!(line, "y_{bi}_{bk}={}", c_lit(*y));
                }
            }
        }
        let _ = writeln!(out, "{line}");
    }
    // ZIP coefficients when the composition is not constant power.
    if !ctx.opts.zip_p.is_constant_power() {
        let z = ctx.opts.zip_p;
        let _ = writeln!(
            out,
            "  zipP_z={}; zipP_i={}; zipP_p={}",
            r_lit(z.z),
            r_lit(z.i),
            r_lit(z.p)
        );
    }
    if !ctx.opts.zip_q.is_constant_power() {
        let z = ctx.opts.zip_q;
        let _ = writeln!(
            out,
            "  zipQ_z={}; zipQ_i={}; zipQ_p={}",
            r_lit(z.z),
            r_lit(z.i),
            r_lit(z.p)
        );
    }
    // Injections and generator setpoints.
    for (i, bus) in case.buses.iter().enumerate() {
        let id = bus.id;
        match ctx.roles[i] {
            Role::Slack | Role::Zi => {}
            Role::Pq => {
                let (p_rhs, q_rhs) = injection_params(ctx, i);
                match ctx.opts.format {
                    Format::Complex
                        if ctx.opts.zip_p.is_constant_power()
                            && ctx.opts.zip_q.is_constant_power() =>
                    {
                        let s = Complex64::new(p_rhs, q_rhs);
                        let _ = writeln!(out, "  S{id}_inj={}", c_lit(s));
                    }
                    _ => {
                        let _ = writeln!(
                            out,
                            "  P{id}_inj={}; Q{id}_inj={}",
                            r_lit(p_rhs),
                            r_lit(q_rhs)
                        );
                        if !ctx.opts.zip_p.is_constant_power()
                            || !ctx.opts.zip_q.is_constant_power()
                        {
                            let _ = writeln!(
                                out,
                                "  Pd{id}={}; Qd{id}={}",
                                r_lit(ctx.pd[i]),
                                r_lit(ctx.qd[i])
                            );
                        }
                    }
                }
            }
            Role::Pv => {
                let g = ctx.gen[i].expect("pv gen");
                let p_net = g.pg
                    - if ctx.opts.zip_p.is_constant_power() {
                        ctx.pd[i]
                    } else {
                        0.0
                    };
                let _ = writeln!(
                    out,
                    "  P{id}_inj={}; V{id}_sp={}",
                    r_lit(p_net),
                    r_lit(g.vg)
                );
                if !ctx.opts.zip_p.is_constant_power() && ctx.pd[i] != 0.0 {
                    let _ = writeln!(out, "  Pd{id}={}", r_lit(ctx.pd[i]));
                }
                if ctx.opts.enforce_q_limits {
                    let _ = writeln!(
                        out,
                        "  Qg_{id}=0; Qg_{id}_min={}; Qg_{id}_max={}",
                        r_lit(g.qmin),
                        r_lit(g.qmax)
                    );
                    let _ = writeln!(out, "  cGen{id}Reg=true [type=bool]");
                    if ctx.qd[i] != 0.0 {
                        let _ = writeln!(out, "  Qd{id}={}", r_lit(ctx.qd[i]));
                    }
                }
            }
        }
    }
}

/// Constant parts of the injection for a PQ bus: with constant-power ZIP the
/// full net injection, otherwise only the generation part (load terms are
/// emitted symbolically).
fn injection_params(ctx: &EmitCtx, i: usize) -> (f64, f64) {
    let (pg, qg) = match ctx.gen[i] {
        // A PQ-typed bus can still carry an in-service generator; its
        // output is a fixed injection.
        Some(g) => (g.pg, g.qg),
        None => (0.0, 0.0),
    };
    let p = if ctx.opts.zip_p.is_constant_power() {
        pg - ctx.pd[i]
    } else {
        pg
    };
    let q = if ctx.opts.zip_q.is_constant_power() {
        qg - ctx.qd[i]
    } else {
        qg
    };
    (p, q)
}

/// Right-hand side of the P equation for bus i (string form).
fn p_rhs(ctx: &EmitCtx, i: usize) -> String {
    let id = ctx.ids[i];
    match ctx.zip_factor(&ctx.opts.zip_p, id, "zipP") {
        None => format!("P{id}_inj"),
        Some(factor) if ctx.pd[i] != 0.0 => {
            format!("P{id}_inj - Pd{id}*{factor}")
        }
        Some(_) => format!("P{id}_inj"),
    }
}

fn q_rhs(ctx: &EmitCtx, i: usize) -> String {
    let id = ctx.ids[i];
    match ctx.zip_factor(&ctx.opts.zip_q, id, "zipQ") {
        None => format!("Q{id}_inj"),
        Some(factor) if ctx.qd[i] != 0.0 => {
            format!("Q{id}_inj - Qd{id}*{factor}")
        }
        Some(_) => format!("Q{id}_inj"),
    }
}

/// Reactive load term of a PV bus, used by the q-limit machinery.
fn qd_term(ctx: &EmitCtx, i: usize) -> Option<String> {
    if ctx.qd[i] == 0.0 {
        return None;
    }
    let id = ctx.ids[i];
    match ctx.zip_factor(&ctx.opts.zip_q, id, "zipQ") {
        None => Some(format!("Qd{id}")),
        Some(factor) => Some(format!("Qd{id}*{factor}")),
    }
}

/// Current-sum expressions for bus i.
fn current_exprs(ctx: &EmitCtx, i: usize) -> (String, String) {
    let bi = ctx.ids[i];
    let mut re_terms = Vec::new();
    let mut im_terms = Vec::new();
    for (k, _) in &ctx.rows[i] {
        let bk = ctx.ids[*k];
        match ctx.opts.format {
            Format::Polar => {
                let th = ctx.theta_name(bi, bk);
                let d = ctx.angle_name(bk);
                re_terms.push(format!("aY_{bi}_{bk}*v_{bk}*cos({th} + {d})"));
                im_terms.push(format!("aY_{bi}_{bk}*v_{bk}*sin({th} + {d})"));
            }
            Format::Rectangular => {
                re_terms.push(format!("(G_{bi}_{bk}*e_{bk} - B_{bi}_{bk}*f_{bk})"));
                im_terms.push(format!("(G_{bi}_{bk}*f_{bk} + B_{bi}_{bk}*e_{bk})"));
            }
            Format::Complex => {
                re_terms.push(format!("y_{bi}_{bk}*v_{bk}"));
            }
        }
    }
    (re_terms.join(" + "), im_terms.join(" + "))
}

/// Polar power-flow sums for bus i: the P and Q left-hand sides.
fn polar_power_lhs(ctx: &EmitCtx, i: usize) -> (String, String) {
    let bi = ctx.ids[i];
    let mut p_terms = Vec::new();
    let mut q_terms = Vec::new();
    for (k, _) in &ctx.rows[i] {
        let bk = ctx.ids[*k];
        if *k == i {
            continue;
        }
        let th = ctx.theta_name(bi, bk);
        let di = ctx.angle_name(bi);
        let dk = ctx.angle_name(bk);
        p_terms.push(format!("aY_{bi}_{bk}*v_{bk}*cos({di} - {th} - {dk})"));
        q_terms.push(format!("aY_{bi}_{bk}*v_{bk}*sin({di} - {th} - {dk})"));
    }
    let th_ii = ctx.theta_name(bi, bi);
    let p = format!(
        "v_{bi}^2*aY_{bi}_{bi}*cos({th_ii}) + v_{bi}*({})",
        p_terms.join(" + ")
    );
    let q = format!(
        "-v_{bi}^2*aY_{bi}_{bi}*sin({th_ii}) + v_{bi}*({})",
        q_terms.join(" + ")
    );
    (p, q)
}

/// P and Q flow left-hand sides by format.
fn power_lhs(ctx: &EmitCtx, i: usize) -> (String, String) {
    let bi = ctx.ids[i];
    match ctx.opts.format {
        Format::Polar => polar_power_lhs(ctx, i),
        Format::Rectangular => {
            let (ir, ii) = current_exprs(ctx, i);
            (
                format!("e_{bi}*({ir}) + f_{bi}*({ii})"),
                format!("f_{bi}*({ir}) - e_{bi}*({ii})"),
            )
        }
        Format::Complex => {
            let (isum, _) = current_exprs(ctx, i);
            (
                format!("v_{bi}*conj({isum}) + conj(v_{bi})*({isum})"),
                format!("v_{bi}*conj({isum}) - conj(v_{bi})*({isum})"),
            )
        }
    }
}

fn emit_equations(out: &mut String, case: &CaseData, ctx: &EmitCtx) -> Result<(), Error> {
    let _ = writeln!(out, "NLEs:");
    for (i, bus) in case.buses.iter().enumerate() {
        let id = bus.id;
        match ctx.roles[i] {
            Role::Slack => {}
            Role::Zi => {
                let (re, im) = current_exprs(ctx, i);
                let _ = writeln!(out, "  // node {id} (ZI): sum of currents = 0");
                match ctx.opts.format {
                    Format::Complex => {
                        let _ = writeln!(out, "  {re} = 0");
                        let _ = writeln!(out, "  conj({re}) = 0");
                    }
                    _ => {
                        let _ = writeln!(out, "  {re} = 0");
                        let _ = writeln!(out, "  {im} = 0");
                    }
                }
            }
            Role::Pq => {
                let _ = writeln!(out, "  // node {id} (PQ)");
                match ctx.opts.format {
                    Format::Complex
                        if ctx.opts.zip_p.is_constant_power()
                            && ctx.opts.zip_q.is_constant_power() =>
                    {
                        let (isum, _) = current_exprs(ctx, i);
                        let _ = writeln!(out, "  v_{id}*conj({isum}) = S{id}_inj");
                        let _ = writeln!(out, "  conj(v_{id})*({isum}) = conj(S{id}_inj)");
                    }
                    Format::Complex => {
                        let (isum, _) = current_exprs(ctx, i);
                        let s = format!("({}) + 1i*({})", p_rhs(ctx, i), q_rhs(ctx, i));
                        let _ = writeln!(out, "  v_{id}*conj({isum}) = {s}");
                        let _ = writeln!(out, "  conj(v_{id})*({isum}) = conj({s})");
                    }
                    _ => {
                        let (p, q) = power_lhs(ctx, i);
                        let _ = writeln!(out, "  {p} = {}", p_rhs(ctx, i));
                        let _ = writeln!(out, "  {q} = {}", q_rhs(ctx, i));
                    }
                }
            }
            Role::Pv => {
                let _ = writeln!(out, "  // node {id} (PV)");
                let (p, q) = power_lhs(ctx, i);
                let p_target = {
                    // Generation minus (possibly voltage-dependent) load.
                    let base = format!("P{id}_inj");
                    match ctx.zip_factor(&ctx.opts.zip_p, id, "zipP") {
                        Some(factor) if ctx.pd[i] != 0.0 => {
                            format!("{base} - Pd{id}*{factor}")
                        }
                        _ => base,
                    }
                };
                match ctx.opts.format {
                    Format::Complex => {
                        let _ = writeln!(out, "  {p} = 2*({p_target})");
                    }
                    _ => {
                        let _ = writeln!(out, "  {p} = {p_target}");
                    }
                }
                let mag_eq = match ctx.opts.format {
                    Format::Polar => format!("v_{id} = V{id}_sp"),
                    Format::Rectangular => format!("e_{id}^2 + f_{id}^2 = V{id}_sp^2"),
                    Format::Complex => format!("v_{id}*conj(v_{id}) = V{id}_sp^2"),
                };
                if ctx.opts.enforce_q_limits {
                    let q_net = match qd_term(ctx, i) {
                        Some(t) => format!("Qg_{id} - {t}"),
                        None => format!("Qg_{id}"),
                    };
                    let _ = writeln!(out, "  if cGen{id}Reg:");
                    let _ = writeln!(out, "    {mag_eq}");
                    let _ = writeln!(out, "  else:");
                    match ctx.opts.format {
                        Format::Complex => {
                            let _ = writeln!(out, "    {q} = 2i*({q_net})");
                        }
                        _ => {
                            let _ = writeln!(out, "    {q} = {q_net}");
                        }
                    }
                    let _ = writeln!(out, "  end");
                } else {
                    let _ = writeln!(out, "  {mag_eq}");
                }
            }
        }
    }
    Ok(())
}

fn emit_limits(out: &mut String, case: &CaseData, ctx: &EmitCtx) {
    let _ = writeln!(out, "Limits:");
    for (i, bus) in case.buses.iter().enumerate() {
        if ctx.roles[i] != Role::Pv {
            continue;
        }
        let id = bus.id;
        // Reactive flow leaving the bus, as an evaluable expression.
        let q_flow = match ctx.opts.format {
            Format::Complex => {
                let (isum, _) = current_exprs(ctx, i);
                format!("imag(v_{id}*conj({isum}))")
            }
            _ => power_lhs(ctx, i).1,
        };
        let qg_expr = match qd_term(ctx, i) {
            Some(t) => format!("{q_flow} + {t}"),
            None => q_flow,
        };
        let _ = writeln!(out, "  group [name=\"Gen{id}\"]:");
        let _ = writeln!(out, "    if cGen{id}Reg:");
        let _ = writeln!(out, "      Qg_{id} = {qg_expr}");
        let _ = writeln!(out, "      if Qg_{id} <= Qg_{id}_min [signal=TooLow]:");
        let _ = writeln!(out, "        cGen{id}Reg = false");
        let _ = writeln!(out, "        Qg_{id} = Qg_{id}_min");
        let _ = writeln!(out, "      else:");
        let _ = writeln!(out, "        if Qg_{id} >= Qg_{id}_max [signal=TooHigh]:");
        let _ = writeln!(out, "          cGen{id}Reg = false");
        let _ = writeln!(out, "          Qg_{id} = Qg_{id}_max");
        let _ = writeln!(out, "        end");
        let _ = writeln!(out, "      end");
        let _ = writeln!(out, "    end");
        let _ = writeln!(out, "  end");
    }
}
