//! Document validation. Collects every violation as a diagnostic instead of
//! aborting on the first error.

use std::collections::HashSet;

use crate::ast::*;
use crate::error::{Diagnostic, Pos};
use crate::expr::Expr;
use crate::lexer::Kw;

/// Validate a parsed document. Returns all findings; an empty list means the
/// document is clean.
pub fn validate_document(doc: &ModelDocument) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    validate_body(
        doc.model_type(),
        doc.domain(),
        &doc.items,
        doc.model_pos,
        false,
        &mut diags,
    );
    diags
}

fn is_reserved(name: &str) -> bool {
    Kw::from_str(name).is_some() || name == "e" || name == "pi" || name == "conj"
}

fn validate_body(
    model_type: ModelType,
    domain: Domain,
    items: &[ModelItem],
    model_pos: Pos,
    is_submodel: bool,
    diags: &mut Vec<Diagnostic>,
) {
    let mut param_names: HashSet<&str> = HashSet::new();
    let mut var_names: HashSet<&str> = HashSet::new();
    let mut unknown_count = 0usize;
    let mut equation_count = 0usize;
    let mut seen_kinds: Vec<GroupKind> = Vec::new();

    for item in items {
        let sub = match item {
            ModelItem::SubModel(s) => s,
            ModelItem::Group(group) => {
                if seen_kinds.contains(&group.kind) {
                    // Multiple groups of one kind are allowed only for Limits.
                    if group.kind != GroupKind::Limits {
                        diags.push(Diagnostic::error(
                            group.pos,
                            format!("duplicate {} group", group.kind.name()),
                        ));
                    }
                } else {
                    seen_kinds.push(group.kind);
                }
                match group.kind {
                    GroupKind::Ecs | GroupKind::Wlses if model_type == ModelType::Nl => {
                        diags.push(Diagnostic::error(
                            group.pos,
                            format!("{} group is not legal in an NL model", group.kind.name()),
                        ));
                    }
                    GroupKind::Nles if model_type == ModelType::Wls => {
                        diags.push(Diagnostic::error(
                            group.pos,
                            "NLEs group is not legal in a WLS model (use WLSEs/ECs)",
                        ));
                    }
                    _ => {}
                }
                match group.kind {
                    GroupKind::Vars => {
                        let group_conj = attr(&group.attrs, "conj")
                            .and_then(|v| v.as_bool())
                            .unwrap_or(domain == Domain::Complex);
                        for s in &group.statements {
                            if let Statement::VarDecl(d) = s {
                                check_decl_name(d, "variable", &mut var_names, diags);
                                if param_names.contains(d.name.as_str()) {
                                    diags.push(Diagnostic::warning(
                                        d.pos,
                                        format!("variable `{}` shadows a parameter", d.name),
                                    ));
                                }
                                if d.init.is_none() {
                                    diags.push(Diagnostic::warning(
                                        d.pos,
                                        format!(
                                            "variable `{}` has no initial value; explicit initialization is recommended",
                                            d.name
                                        ),
                                    ));
                                }
                                let conj = attr(&d.attrs, "conj")
                                    .and_then(|v| v.as_bool())
                                    .unwrap_or(group_conj);
                                unknown_count += if domain == Domain::Complex && conj {
                                    2
                                } else {
                                    1
                                };
                            }
                        }
                    }
                    GroupKind::Params => {
                        for s in &group.statements {
                            if let Statement::ParamDecl(d) = s {
                                check_decl_name(d, "parameter", &mut param_names, diags);
                            }
                        }
                    }
                    GroupKind::Nles | GroupKind::Wlses | GroupKind::Ecs => {
                        let is_wlse = group.kind == GroupKind::Wlses;
                        let is_ec = group.kind == GroupKind::Ecs;
                        for s in &group.statements {
                            equation_count += equation_rows(s, group.kind, diags);
                            check_equation_stmt(s, is_wlse, is_ec, diags);
                        }
                    }
                    _ => {
                        for s in &group.statements {
                            check_default_last(s, diags);
                        }
                    }
                }
                continue;
            }
        };
        // Submodels validate recursively with their own type/domain.
        let sub_type = match attr(&sub.attrs, "type").and_then(|v| v.as_text()) {
            Some("WLS") => ModelType::Wls,
            _ => ModelType::Nl,
        };
        let sub_domain = match attr(&sub.attrs, "domain").and_then(|v| v.as_text()) {
            Some("cplx") | Some("cmplx") | Some("complex") => Domain::Complex,
            _ => Domain::Real,
        };
        validate_body(sub_type, sub_domain, &sub.items, sub.pos, true, diags);
    }

    match model_type {
        ModelType::Nl => {
            if !seen_kinds.contains(&GroupKind::Nles) {
                diags.push(Diagnostic::error(
                    model_pos,
                    "an NL model must contain an NLEs group",
                ));
            } else if unknown_count != equation_count {
                diags.push(Diagnostic::error(
                    model_pos,
                    format!(
                        "NL system is not square: {equation_count} equation(s) for {unknown_count} unknown(s)"
                    ),
                ));
            }
        }
        ModelType::Wls => {
            if !seen_kinds.contains(&GroupKind::Wlses) {
                diags.push(Diagnostic::error(
                    model_pos,
                    "a WLS model must contain a WLSEs group",
                ));
            }
        }
    }
    let _ = is_submodel;
}

fn check_decl_name<'a>(
    d: &'a Decl,
    what: &str,
    seen: &mut HashSet<&'a str>,
    diags: &mut Vec<Diagnostic>,
) {
    if is_reserved(&d.name) {
        diags.push(Diagnostic::error(
            d.pos,
            format!("reserved word `{}` cannot be used as a {what} name", d.name),
        ));
    }
    if !seen.insert(d.name.as_str()) {
        diags.push(Diagnostic::error(
            d.pos,
            format!("duplicate {what} `{}`", d.name),
        ));
    }
}

/// Number of equation rows a statement contributes: one per plain equation,
/// and for a conditional site the common row count of its arms.
fn equation_rows(stmt: &Statement, kind: GroupKind, diags: &mut Vec<Diagnostic>) -> usize {
    match stmt {
        Statement::Equation { .. } => 1,
        Statement::If { arms, pos } => {
            let counts: Vec<usize> = arms
                .iter()
                .map(|a| a.body.iter().map(|s| equation_rows(s, kind, diags)).sum())
                .collect();
            if arms.len() < 2 {
                diags.push(Diagnostic::error(
                    *pos,
                    format!(
                        "if inside {} requires an else branch so exactly one arm is always active",
                        kind.name()
                    ),
                ));
                return counts.first().copied().unwrap_or(0);
            }
            if counts.windows(2).any(|w| w[0] != w[1]) {
                diags.push(Diagnostic::error(
                    *pos,
                    "if/else arms contribute different numbers of equations",
                ));
            }
            counts[0]
        }
        Statement::Switch { cases, pos } => {
            check_default_last(stmt, diags);
            if !cases.iter().any(|c| c.guard.is_none()) {
                diags.push(Diagnostic::error(
                    *pos,
                    format!(
                        "switch inside {} requires a default arm so exactly one arm is always active",
                        kind.name()
                    ),
                ));
            }
            let counts: Vec<usize> = cases
                .iter()
                .map(|a| a.body.iter().map(|s| equation_rows(s, kind, diags)).sum())
                .collect();
            if counts.windows(2).any(|w| w[0] != w[1]) {
                diags.push(Diagnostic::error(
                    *pos,
                    "switch arms contribute different numbers of equations",
                ));
            }
            counts.first().copied().unwrap_or(0)
        }
        other => {
            diags.push(Diagnostic::error(
                other.pos(),
                format!("only equations may appear in {}", kind.name()),
            ));
            0
        }
    }
}

fn check_equation_stmt(stmt: &Statement, is_wlse: bool, is_ec: bool, diags: &mut Vec<Diagnostic>) {
    match stmt {
        Statement::Equation {
            lhs,
            rhs,
            weight,
            pos,
        } => {
            if is_wlse && weight.is_none() {
                diags.push(Diagnostic::error(
                    *pos,
                    "every WLS measurement equation requires a weight attribute [w=...]",
                ));
            }
            if is_ec && weight.is_some() {
                diags.push(Diagnostic::error(
                    *pos,
                    "equality constraints carry no weights",
                ));
            }
            let mut check_expr = |e: &Expr| {
                if e.has_non_differentiable() {
                    diags.push(Diagnostic::error(
                        *pos,
                        "round/disc/rnd may appear only in assignment expressions, not in equations",
                    ));
                }
            };
            check_expr(lhs);
            if let Some(r) = rhs {
                check_expr(r);
            }
        }
        Statement::If { arms, .. } | Statement::Switch { cases: arms, .. } => {
            for arm in arms {
                for s in &arm.body {
                    check_equation_stmt(s, is_wlse, is_ec, diags);
                }
            }
        }
        _ => {}
    }
}

/// `default` (and `else`) must be the last case wherever a switch appears.
fn check_default_last(stmt: &Statement, diags: &mut Vec<Diagnostic>) {
    match stmt {
        Statement::Switch { cases, .. } => {
            for (i, case) in cases.iter().enumerate() {
                if case.guard.is_none() && i + 1 != cases.len() {
                    diags.push(Diagnostic::error(
                        case.pos,
                        "`default` must be the last case of a switch",
                    ));
                }
                for s in &case.body {
                    check_default_last(s, diags);
                }
            }
        }
        Statement::If { arms, .. } => {
            for arm in arms {
                for s in &arm.body {
                    check_default_last(s, diags);
                }
            }
        }
        Statement::LimitGroup { body, .. } => {
            for s in body {
                check_default_last(s, diags);
            }
        }
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Severity;
    use crate::parser::parse_source;

    fn diags(src: &str) -> Vec<Diagnostic> {
        validate_document(&parse_source(src).unwrap())
    }

    fn errors(src: &str) -> Vec<String> {
        diags(src)
            .into_iter()
            .filter(|d| d.severity == Severity::Error)
            .map(|d| d.message)
            .collect()
    }

    #[test]
    fn reserved_word_as_variable_name() {
        let errs = errors("Header: end\nModel:\nVars: end=1\nNLEs: 1=1\nend");
        assert!(
            errs.iter().any(|m| m.contains("reserved word `end`")),
            "{errs:?}"
        );
    }

    #[test]
    fn default_not_last_detected() {
        let errs = errors(
            "Header: end\nModel:\nVars: x=1\nNLEs:\nswitch:\ndefault -> x = 0\ncase x < 1 -> x = 1\nend\nend",
        );
        assert!(
            errs.iter().any(|m| m.contains("must be the last case")),
            "{errs:?}"
        );
    }

    #[test]
    fn square_system_accepted() {
        // 2 complex vars with conjugates = 4 unknowns, 4 equations.
        let d = diags(
            "Header: end\nModel [type=NL domain=cmplx]:\nVars [conj=true]:\nv2=1; v3=1\nParams: y=1\nNLEs:\ny*v2=0\nconj(y*v2)=0\nv3*conj(v3)=1\nconj(v3)*v3=1\nend",
        );
        assert!(d.is_empty(), "{d:?}");
    }

    #[test]
    fn non_square_flagged() {
        let errs = errors("Header: end\nModel:\nVars: x=1; y=2\nNLEs: x=1\nend");
        assert!(errs.iter().any(|m| m.contains("not square")), "{errs:?}");
    }

    #[test]
    fn variable_shadowing_param_warned() {
        let d = diags("Header: end\nModel:\nParams: x=1\nVars: x=1\nNLEs: x=1\nend");
        assert!(d
            .iter()
            .any(|m| m.severity == Severity::Warning && m.message.contains("shadows")));
    }

    #[test]
    fn ecs_in_nl_model_rejected() {
        let errs = errors("Header: end\nModel [type=NL]:\nVars: x=1\nNLEs: x=1\nECs: x=1\nend");
        assert!(
            errs.iter().any(|m| m.contains("not legal in an NL model")),
            "{errs:?}"
        );
    }

    #[test]
    fn wlse_weight_required() {
        let errs = errors("Header: end\nModel [type=WLS]:\nVars: x=1\nWLSEs:\nx = 5\nend");
        assert!(
            errs.iter().any(|m| m.contains("weight attribute")),
            "{errs:?}"
        );
    }

    #[test]
    fn rnd_in_equations_rejected() {
        let errs = errors("Header: end\nModel:\nVars: x=1\nNLEs: x=rnd(g)\nend");
        assert!(
            errs.iter().any(|m| m.contains("assignment expressions")),
            "{errs:?}"
        );
    }

    #[test]
    fn attribute_names_reusable_as_identifiers() {
        // `eps`, `out`, `name` are attribute names but legal identifiers.
        let d = diags(
            "Header: end\nModel:\nVars: eps=1\nParams: out=2; name=3\nNLEs: eps = out + name - 4\nend",
        );
        assert!(d.is_empty(), "{d:?}");
    }

    #[test]
    fn switch_in_equations_requires_default() {
        let errs =
            errors("Header: end\nModel:\nVars: x=1\nNLEs:\nswitch:\ncase x < 1 -> x = 1\nend\nend");
        assert!(errs.iter().any(|m| m.contains("default")), "{errs:?}");
    }
}
