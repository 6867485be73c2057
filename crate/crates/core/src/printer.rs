//! Canonical pretty-printer.
//!
//! Output is deterministic byte-for-byte for a given AST and re-parses to an
//! equivalent document: parse -> print -> parse -> print is a fixed point.

use std::fmt::Write;

use crate::ast::*;
use crate::expr::{BinOp, Expr};
use crate::value::Value;

/// Print a full model document in canonical form.
pub fn pretty_print(doc: &ModelDocument) -> String {
    let mut out = String::new();
    out.push_str("Header:\n");
    for a in &doc.header.attrs {
        let _ = writeln!(out, "  {}", fmt_attr(a));
    }
    out.push_str("end\n");
    out.push_str("Model");
    print_attr_list(&mut out, &doc.model_attrs);
    out.push_str(":\n");
    print_items(&mut out, &doc.items, 0);
    out.push_str("end\n");
    out
}

fn print_items(out: &mut String, items: &[ModelItem], indent: usize) {
    for item in items {
        match item {
            ModelItem::Group(g) => {
                pad(out, indent);
                out.push_str(g.kind.name());
                print_attr_list(out, &g.attrs);
                out.push_str(":\n");
                for s in &g.statements {
                    print_statement(out, s, indent + 1);
                }
            }
            ModelItem::SubModel(sm) => {
                pad(out, indent);
                out.push_str("SubModel");
                print_attr_list(out, &sm.attrs);
                out.push_str(":\n");
                print_items(out, &sm.items, indent + 1);
                pad(out, indent);
                out.push_str("end\n");
            }
        }
    }
}

fn pad(out: &mut String, indent: usize) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}

fn print_statement(out: &mut String, stmt: &Statement, indent: usize) {
    match stmt {
        Statement::Equation {
            lhs, rhs, weight, ..
        } => {
            pad(out, indent);
            if let Some(w) = weight {
                let _ = write!(out, "[w={}] ", fmt_attr_value(w));
            }
            out.push_str(&print_expr(lhs));
            if let Some(r) = rhs {
                out.push_str(" = ");
                out.push_str(&print_expr(r));
            }
            out.push('\n');
        }
        Statement::Assign {
            target, op, value, ..
        } => {
            pad(out, indent);
            if target.cross_model {
                out.push_str("@main.");
            }
            out.push_str(&target.name);
            match target.component {
                Some(Component::Real) => out.push_str(".real"),
                Some(Component::Imag) => out.push_str(".imag"),
                None => {}
            }
            let _ = writeln!(out, " {} {}", op.text(), print_expr(value));
        }
        Statement::VarDecl(d) | Statement::ParamDecl(d) => {
            pad(out, indent);
            out.push_str(&d.name);
            if let Some(init) = &d.init {
                out.push_str(" = ");
                out.push_str(&print_expr(init));
            }
            print_attr_list(out, &d.attrs);
            out.push('\n');
        }
        Statement::DistDecl { name, attrs, .. } => {
            pad(out, indent);
            out.push_str(name);
            print_attr_list(out, attrs);
            out.push('\n');
        }
        Statement::If { arms, .. } => {
            pad(out, indent);
            let first = &arms[0];
            out.push_str("if ");
            out.push_str(&print_expr(first.guard.as_ref().expect("if guard")));
            if let Some(sig) = &first.signal {
                let _ = write!(out, " [signal={sig}]");
            }
            out.push_str(":\n");
            for s in &first.body {
                print_statement(out, s, indent + 1);
            }
            if let Some(else_arm) = arms.get(1) {
                pad(out, indent);
                out.push_str("else:\n");
                for s in &else_arm.body {
                    print_statement(out, s, indent + 1);
                }
            }
            pad(out, indent);
            out.push_str("end\n");
        }
        Statement::Switch { cases, .. } => {
            pad(out, indent);
            out.push_str("switch:\n");
            for case in cases {
                pad(out, indent);
                match &case.guard {
                    Some(g) => {
                        out.push_str("case ");
                        out.push_str(&print_expr(g));
                    }
                    None => out.push_str("default"),
                }
                if let Some(sig) = &case.signal {
                    let _ = write!(out, " [signal={sig}]");
                }
                out.push_str(" -> ");
                // A switch arm is a single statement on the same line.
                let mut body = String::new();
                print_statement(&mut body, &case.body[0], 0);
                out.push_str(body.trim_end());
                out.push('\n');
            }
            pad(out, indent);
            out.push_str("end\n");
        }
        Statement::LimitGroup { attrs, body, .. } => {
            pad(out, indent);
            out.push_str("group");
            print_attr_list(out, attrs);
            out.push_str(":\n");
            for s in body {
                print_statement(out, s, indent + 1);
            }
            pad(out, indent);
            out.push_str("end\n");
        }
        Statement::RepeatMarker { .. } => {
            pad(out, indent);
            out.push_str("repeat\n");
        }
    }
}

fn print_attr_list(out: &mut String, attrs: &[Attribute]) {
    if attrs.is_empty() {
        return;
    }
    out.push_str(" [");
    for (i, a) in attrs.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&fmt_attr(a));
    }
    out.push(']');
}

fn fmt_attr(a: &Attribute) -> String {
    format!("{}={}", a.name, fmt_attr_value(&a.value))
}

fn fmt_attr_value(v: &AttrValue) -> String {
    match v {
        AttrValue::Num(n) => format!("{n}"),
        AttrValue::Word(w) => w.clone(),
        AttrValue::Str(s) => format!("\"{s}\""),
    }
}

/// Operator precedence for parenthesization.
fn prec(expr: &Expr) -> u8 {
    match expr {
        Expr::Bin(op, _, _) => match op {
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 1,
            BinOp::Add | BinOp::Sub => 2,
            BinOp::Mul | BinOp::Div => 3,
            BinOp::Pow => 5,
        },
        Expr::Neg(_) => 4,
        _ => 6,
    }
}

/// Position of a node relative to unary-minus capture: at the start of an
/// additive operand (or inside parentheses) a `-` takes the whole
/// multiplicative chain after it; directly after `*`, `/` or `^` it takes
/// only the next power.
#[derive(Clone, Copy, PartialEq)]
enum NegCtx {
    Chain,
    Tight,
}

/// Print an expression with minimal parentheses. Re-parsing the output
/// reconstructs the same tree.
pub fn print_expr(expr: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, expr, NegCtx::Chain);
    s
}

fn write_child(out: &mut String, child: &Expr, min_prec: u8, ctx: NegCtx) {
    if prec(child) < min_prec {
        out.push('(');
        write_expr(out, child, NegCtx::Chain);
        out.push(')');
    } else {
        write_expr(out, child, ctx);
    }
}

fn write_expr(out: &mut String, expr: &Expr, ctx: NegCtx) {
    match expr {
        Expr::Const(v) => match v {
            Value::Real(x) => {
                let _ = write!(out, "{x}");
            }
            Value::Complex(z) => {
                if z.re == 0.0 {
                    if z.im < 0.0 {
                        let _ = write!(out, "-{}i", -z.im);
                    } else {
                        let _ = write!(out, "{}i", z.im);
                    }
                } else {
                    let sign = if z.im < 0.0 { '-' } else { '+' };
                    let _ = write!(out, "({}{}{}i)", z.re, sign, z.im.abs());
                }
            }
            Value::Int(n) => {
                let _ = write!(out, "{n}");
            }
            Value::Bool(b) => {
                let _ = write!(out, "{b}");
            }
        },
        Expr::Ident(name) => out.push_str(name),
        Expr::Neg(a) => {
            out.push('-');
            match ctx {
                // Leading minus: the chain after it is captured whole, so
                // only additive/comparison children need parentheses.
                NegCtx::Chain => write_child(out, a, 3, NegCtx::Chain),
                // Minus after an operator: it captures a single power.
                NegCtx::Tight => write_child(out, a, 5, NegCtx::Tight),
            }
        }
        Expr::Conj(a) => {
            out.push_str("conj(");
            write_expr(out, a, NegCtx::Chain);
            out.push(')');
        }
        Expr::Call(f, args) => {
            out.push_str(f.name());
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, a, NegCtx::Chain);
            }
            out.push(')');
        }
        Expr::Bin(op, a, b) => {
            let p = prec(expr);
            match op {
                BinOp::Mul | BinOp::Div => {
                    // A negation opening a multiplicative chain would
                    // re-parse as a chain capture, so parenthesize it.
                    let lhs_min = if matches!(**a, Expr::Neg(_)) { 5 } else { p };
                    write_child(out, a, lhs_min, NegCtx::Chain);
                    out.push_str(op.text());
                    write_child(out, b, p + 1, NegCtx::Tight);
                }
                BinOp::Pow => {
                    // Right-associative; the exponent admits unary minus.
                    write_child(out, a, p + 1, NegCtx::Tight);
                    out.push_str(op.text());
                    write_child(out, b, 4, NegCtx::Tight);
                }
                _ => {
                    write_child(out, a, p, NegCtx::Chain);
                    let _ = write!(out, " {} ", op.text());
                    write_child(out, b, p + 1, NegCtx::Chain);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_expression_str, parse_source};

    fn roundtrip_expr(src: &str) {
        let e1 = parse_expression_str(src).unwrap();
        let printed = print_expr(&e1);
        let e2 = parse_expression_str(&printed)
            .unwrap_or_else(|err| panic!("reprint `{printed}` failed: {err}"));
        let printed2 = print_expr(&e2);
        assert_eq!(printed, printed2, "print not stable for {src}");
        assert_eq!(e1, e2, "structure drift for {src} via `{printed}`");
    }

    #[test]
    fn expression_roundtrips() {
        for src in [
            "-v_3^2*aY33*sin(θ_33)",
            "v2*conj(v2) = 1",
            "aY21*v_1*cos(θ_21+δ_1) + v_2*aY22*cos(θ_22+δ_2)",
            "a - (b - c)",
            "a - b - c",
            "(a+b)*c",
            "a^b^c",
            "(-a)^2",
            "-a^2",
            "2^-3",
            "a/(b*c)",
            "1/(0.005+0.03i)",
            "round((t-1)/deltaLTC, 0)",
        ] {
            let src = src.split(" = ").next().unwrap();
            roundtrip_expr(src);
        }
    }

    #[test]
    fn document_print_is_fixed_point() {
        let src = "Header:\nmaxIter=50\nreport=AllDetails\nend\nModel [type=NL domain=real eps=1e-6 name=\"demo\"]:\nVars [out=true]:\nδ_2=δ_1; v_2=v_1\nParams:\nδ_1=0; v_1=1\nNLEs:\nv_2^2 - v_1 = 0\nif v_2 < 1 [signal=Low]:\nv_2 = 1\nelse:\nv_2 = δ_1\nend\nend";
        let d1 = parse_source(src).unwrap();
        let p1 = pretty_print(&d1);
        let d2 = parse_source(&p1).unwrap();
        let p2 = pretty_print(&d2);
        assert_eq!(p1, p2);
    }
}
