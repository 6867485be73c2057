//! Execution engine: compiles a parsed document into a runnable model and
//! drives the full solution flow: preprocessing, submodels with noise
//! distributions, the inner Newton/Gauss-Newton solve with per-iteration
//! post-processing, limit groups with signals and re-solve, repeats with
//! optional reinitialization, and post-processing.

use std::collections::HashMap;

use crate::ast::*;
use crate::env::{seeded_rng, DistKind, Distribution, Env, RngStream, Slot, SymbolKind};
use crate::error::{Error, EvalError, Pos};
use crate::eval::{evaluate, evaluate_sampling};
use crate::expr::Expr;
use crate::newton::{newton_solve, NlSystem, SolveOptions};
use crate::report::{FiredSignal, RepeatRecord, RunReport, SolveOutcome};
use crate::symbolic::infer_type;
use crate::system::{compile_equation, unknown_slots, CondArm, CondSite, EqSite, UnknownSlot};
use crate::value::{ScalarType, Value};
use crate::wls::{gauss_newton_wls, Measurement, Weight, WlsSystem};

// ----------------------------------------------------------------------
// Compiled model
// ----------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct CompiledDecl {
    pub name: String,
    pub init: Option<Expr>,
    pub ty: ScalarType,
    pub out: bool,
    pub conj: bool,
    pub pos: Pos,
}

#[derive(Debug, Clone)]
pub struct CompiledLimitGroup {
    pub name: String,
    pub enabled: bool,
    pub body: Vec<Statement>,
}

#[derive(Debug, Clone)]
pub struct CompiledSubmodel {
    pub model: Box<CompiledModel>,
    pub copy_pars: usize,
    pub always_on: bool,
}

#[derive(Debug, Clone)]
pub enum Solver {
    Nl(NlSystem),
    Wls(WlsSystem),
}

#[derive(Debug, Clone)]
pub struct CompiledModel {
    pub name: String,
    pub model_type: ModelType,
    pub domain: Domain,
    pub eps: f64,
    pub max_iter: usize,
    pub max_reps: usize,
    pub report: ReportLevel,
    pub re_init: bool,
    pub params: Vec<CompiledDecl>,
    pub vars: Vec<CompiledDecl>,
    pub dists: Vec<Distribution>,
    pub solver: Solver,
    pub pre_proc: Vec<Statement>,
    pub re_init_stmts: Vec<Statement>,
    pub iter_post: Vec<Statement>,
    pub base_post: Vec<Statement>,
    pub post_proc: Vec<Statement>,
    pub repeats: Vec<Statement>,
    pub limits: Vec<CompiledLimitGroup>,
    pub submodels: Vec<CompiledSubmodel>,
    /// Out-tagged names in declaration order.
    pub out_names: Vec<String>,
    pub types: HashMap<String, ScalarType>,
}

impl CompiledModel {
    pub fn has_repeats(&self) -> bool {
        !self.repeats.is_empty()
    }
}

/// Compile a validated document.
pub fn compile(doc: &ModelDocument) -> Result<CompiledModel, Error> {
    let ctx = ModelCtx {
        model_type: doc.model_type(),
        domain: doc.domain(),
        eps: doc.eps(),
        max_iter: doc.header.max_iter(),
        max_reps: doc.header.max_reps(),
        report: doc.header.report(),
        re_init: doc.re_init(),
        name: doc.name().to_string(),
    };
    compile_body(&ctx, &doc.items, &HashMap::new())
}

struct ModelCtx {
    model_type: ModelType,
    domain: Domain,
    eps: f64,
    max_iter: usize,
    max_reps: usize,
    report: ReportLevel,
    re_init: bool,
    name: String,
}

fn attr_type(attrs: &[Attribute]) -> Option<ScalarType> {
    match attr(attrs, "type").and_then(|v| v.as_text()) {
        Some("real") => Some(ScalarType::Real),
        Some("int") => Some(ScalarType::Int),
        Some("bool") => Some(ScalarType::Bool),
        Some("cplx") | Some("cmplx") | Some("complex") => Some(ScalarType::Complex),
        _ => None,
    }
}

fn compile_body(
    ctx: &ModelCtx,
    items: &[ModelItem],
    inherited_types: &HashMap<String, ScalarType>,
) -> Result<CompiledModel, Error> {
    let mut types = inherited_types.clone();
    let mut params = Vec::new();
    let mut vars = Vec::new();
    let mut dists = Vec::new();
    let mut out_names = Vec::new();
    let mut pre_proc = Vec::new();
    let mut re_init_stmts = Vec::new();
    let mut iter_post = Vec::new();
    let mut base_post = Vec::new();
    let mut post_proc = Vec::new();
    let mut repeats = Vec::new();
    let mut limits = Vec::new();
    let mut submodels = Vec::new();
    let mut equation_groups: Vec<&Group> = Vec::new();

    // First pass: declarations and procedural groups, in document order.
    for item in items {
        match item {
            ModelItem::Group(g) => match g.kind {
                GroupKind::Params => {
                    let group_out = attr(&g.attrs, "out")
                        .and_then(|v| v.as_bool())
                        .unwrap_or(false);
                    for s in &g.statements {
                        if let Statement::ParamDecl(d) = s {
                            let ty = match attr_type(&d.attrs) {
                                Some(t) => t,
                                None => match &d.init {
                                    Some(init) => infer_type(init, &types, ctx.domain)
                                        .map_err(|e| decl_err(d.pos, &d.name, e))?,
                                    None => domain_default(ctx.domain),
                                },
                            };
                            let out = attr(&d.attrs, "out")
                                .and_then(|v| v.as_bool())
                                .unwrap_or(group_out);
                            if out {
                                out_names.push(d.name.clone());
                            }
                            types.insert(d.name.clone(), ty);
                            params.push(CompiledDecl {
                                name: d.name.clone(),
                                init: d.init.clone(),
                                ty,
                                out,
                                conj: false,
                                pos: d.pos,
                            });
                        }
                    }
                }
                GroupKind::Vars => {
                    let group_out = attr(&g.attrs, "out")
                        .and_then(|v| v.as_bool())
                        .unwrap_or(false);
                    let group_conj = attr(&g.attrs, "conj")
                        .and_then(|v| v.as_bool())
                        .unwrap_or(ctx.domain == Domain::Complex);
                    for s in &g.statements {
                        if let Statement::VarDecl(d) = s {
                            let ty = domain_default(ctx.domain);
                            let out = attr(&d.attrs, "out")
                                .and_then(|v| v.as_bool())
                                .unwrap_or(group_out);
                            let conj = attr(&d.attrs, "conj")
                                .and_then(|v| v.as_bool())
                                .unwrap_or(group_conj);
                            if out {
                                out_names.push(d.name.clone());
                            }
                            types.insert(d.name.clone(), ty);
                            vars.push(CompiledDecl {
                                name: d.name.clone(),
                                init: d.init.clone(),
                                ty,
                                out,
                                conj,
                                pos: d.pos,
                            });
                        }
                    }
                }
                GroupKind::Distributions => {
                    for s in &g.statements {
                        if let Statement::DistDecl { name, attrs, pos } = s {
                            let kind = match attr(attrs, "type").and_then(|v| v.as_text()) {
                                Some("Gauss") | None => DistKind::Gauss,
                                Some(other) => {
                                    return Err(Error::Run(format!(
                                        "{pos}: unknown distribution type `{other}`"
                                    )))
                                }
                            };
                            let mean = attr(attrs, "mean").and_then(|v| v.as_num()).unwrap_or(0.0);
                            let dev = attr(attrs, "dev").and_then(|v| v.as_num()).unwrap_or(0.0);
                            if dev < 0.0 {
                                return Err(Error::Run(format!(
                                    "{pos}: distribution `{name}` has negative dev"
                                )));
                            }
                            dists.push(Distribution {
                                name: name.clone(),
                                kind,
                                mean,
                                dev,
                            });
                        }
                    }
                }
                GroupKind::Nles | GroupKind::Wlses | GroupKind::Ecs => equation_groups.push(g),
                GroupKind::PreProc => pre_proc.extend(g.statements.iter().cloned()),
                GroupKind::ReInit => re_init_stmts.extend(g.statements.iter().cloned()),
                GroupKind::IterPostP => iter_post.extend(g.statements.iter().cloned()),
                GroupKind::BasePostP => base_post.extend(g.statements.iter().cloned()),
                GroupKind::PostProc => post_proc.extend(g.statements.iter().cloned()),
                GroupKind::Repeats => repeats.extend(g.statements.iter().cloned()),
                GroupKind::Limits => {
                    for s in &g.statements {
                        if let Statement::LimitGroup { attrs, body, .. } = s {
                            limits.push(CompiledLimitGroup {
                                name: attr(attrs, "name")
                                    .and_then(|v| v.as_text())
                                    .unwrap_or("")
                                    .to_string(),
                                enabled: attr(attrs, "enabled")
                                    .and_then(|v| v.as_bool())
                                    .unwrap_or(true),
                                body: body.clone(),
                            });
                        }
                    }
                }
            },
            ModelItem::SubModel(sm) => {
                let copy_pars = attr(&sm.attrs, "copyPars")
                    .and_then(|v| v.as_num())
                    .map(|n| n as usize)
                    .unwrap_or(0);
                let always_on = attr(&sm.attrs, "alwaysOn")
                    .and_then(|v| v.as_bool())
                    .unwrap_or(false);
                let sub_ctx = ModelCtx {
                    model_type: match attr(&sm.attrs, "type").and_then(|v| v.as_text()) {
                        Some("WLS") => ModelType::Wls,
                        _ => ModelType::Nl,
                    },
                    domain: match attr(&sm.attrs, "domain").and_then(|v| v.as_text()) {
                        Some("cplx") | Some("cmplx") | Some("complex") => Domain::Complex,
                        _ => Domain::Real,
                    },
                    eps: attr(&sm.attrs, "eps")
                        .and_then(|v| v.as_num())
                        .unwrap_or(1e-6),
                    max_iter: attr(&sm.attrs, "maxIter")
                        .and_then(|v| v.as_num())
                        .map(|n| n as usize)
                        .unwrap_or(100),
                    max_reps: 100,
                    report: ctx.report,
                    re_init: false,
                    name: attr(&sm.attrs, "name")
                        .and_then(|v| v.as_text())
                        .unwrap_or("submodel")
                        .to_string(),
                };
                // The first copyPars parent parameters are visible in the
                // child; seed its type table with exactly those.
                let copied: HashMap<String, ScalarType> = params
                    .iter()
                    .take(copy_pars)
                    .map(|p| (p.name.clone(), p.ty))
                    .collect();
                let model = compile_body(&sub_ctx, &sm.items, &copied)?;
                submodels.push(CompiledSubmodel {
                    model: Box::new(model),
                    copy_pars,
                    always_on,
                });
            }
        }
    }

    // Second pass: equations, now that every symbol is typed.
    let slot_spec: Vec<(String, bool)> = vars.iter().map(|v| (v.name.clone(), v.conj)).collect();
    let unknowns = unknown_slots(&slot_spec, ctx.domain);
    let is_complex = {
        let types = types.clone();
        move |name: &str| types.get(name).is_none_or(|t| *t == ScalarType::Complex)
    };

    let solver = match ctx.model_type {
        ModelType::Nl => {
            let mut sites = Vec::new();
            for g in &equation_groups {
                if g.kind != GroupKind::Nles {
                    continue;
                }
                for s in &g.statements {
                    sites.push(compile_site(s, &unknowns, ctx.domain, &is_complex)?);
                }
            }
            Solver::Nl(NlSystem {
                unknowns,
                sites,
                domain: ctx.domain,
            })
        }
        ModelType::Wls => {
            let mut measurements = Vec::new();
            let mut constraints = Vec::new();
            for g in &equation_groups {
                for s in &g.statements {
                    let (lhs, rhs, weight, pos) = match s {
                        Statement::Equation {
                            lhs,
                            rhs,
                            weight,
                            pos,
                        } => (lhs, rhs.as_ref(), weight, pos),
                        other => {
                            return Err(Error::Run(format!(
                                "{}: conditional equations are supported in NLEs only",
                                other.pos()
                            )))
                        }
                    };
                    let eq = compile_equation(lhs, rhs, &unknowns, ctx.domain, &is_complex)?;
                    match g.kind {
                        GroupKind::Wlses => {
                            let weight = match weight {
                                Some(AttrValue::Num(w)) => Weight::Const(*w),
                                Some(AttrValue::Word(name)) => Weight::Param(name.clone()),
                                _ => {
                                    return Err(Error::Run(format!(
                                    "{pos}: measurement weight must be a number or parameter name"
                                )))
                                }
                            };
                            measurements.push(Measurement { eq, weight });
                        }
                        GroupKind::Ecs => constraints.push(eq),
                        _ => {}
                    }
                }
            }
            Solver::Wls(WlsSystem {
                unknowns,
                measurements,
                constraints,
                domain: ctx.domain,
            })
        }
    };

    Ok(CompiledModel {
        name: ctx.name.clone(),
        model_type: ctx.model_type,
        domain: ctx.domain,
        eps: ctx.eps,
        max_iter: ctx.max_iter,
        max_reps: ctx.max_reps,
        report: ctx.report,
        re_init: ctx.re_init,
        params,
        vars,
        dists,
        solver,
        pre_proc,
        re_init_stmts,
        iter_post,
        base_post,
        post_proc,
        repeats,
        limits,
        submodels,
        out_names,
        types,
    })
}

fn domain_default(domain: Domain) -> ScalarType {
    match domain {
        Domain::Complex => ScalarType::Complex,
        Domain::Real => ScalarType::Real,
    }
}

fn decl_err(pos: Pos, name: &str, e: EvalError) -> Error {
    match e {
        EvalError::Unbound(missing) => Error::Run(format!(
            "{pos}: initializer of `{name}` references `{missing}` before it is defined"
        )),
        other => Error::Run(format!("{pos}: initializer of `{name}`: {other}")),
    }
}

fn compile_site(
    stmt: &Statement,
    unknowns: &[UnknownSlot],
    domain: Domain,
    is_complex: &dyn Fn(&str) -> bool,
) -> Result<EqSite, Error> {
    let compile_arm = |arm: &GuardedArm| -> Result<CondArm, Error> {
        let mut eqs = Vec::new();
        for s in &arm.body {
            match s {
                Statement::Equation { lhs, rhs, .. } => eqs.push(compile_equation(
                    lhs,
                    rhs.as_ref(),
                    unknowns,
                    domain,
                    is_complex,
                )?),
                other => {
                    return Err(Error::Run(format!(
                        "{}: conditional equation arms may contain only plain equations",
                        other.pos()
                    )))
                }
            }
        }
        Ok(CondArm {
            guard: arm.guard.clone(),
            eqs,
        })
    };
    match stmt {
        Statement::Equation { lhs, rhs, .. } => Ok(EqSite::Plain(compile_equation(
            lhs,
            rhs.as_ref(),
            unknowns,
            domain,
            is_complex,
        )?)),
        Statement::If { arms, .. } | Statement::Switch { cases: arms, .. } => {
            let compiled: Vec<CondArm> = arms.iter().map(compile_arm).collect::<Result<_, _>>()?;
            let rows = compiled.first().map(|a| a.eqs.len()).unwrap_or(0);
            Ok(EqSite::Conditional(CondSite {
                arms: compiled,
                rows,
            }))
        }
        other => Err(Error::Run(format!(
            "{}: only equations may appear in an equations group",
            other.pos()
        ))),
    }
}

// ----------------------------------------------------------------------
// Environment construction
// ----------------------------------------------------------------------

/// Bind parameters (in declaration order, forward references already
/// rejected at compile), then variables, then distributions.
fn init_env(cm: &CompiledModel, env: &mut Env, rng: &mut RngStream) -> Result<(), Error> {
    for p in &cm.params {
        let value = match &p.init {
            Some(init) => evaluate_sampling(init, env, rng, cm.domain == Domain::Complex)
                .map_err(|e| Error::Run(format!("{}: parameter `{}`: {e}", p.pos, p.name)))?,
            // Uninitialized parameters default to zero and may be written
            // later by assignments.
            None => Value::zero_of(p.ty),
        };
        let value = crate::env::coerce(&p.name, value, p.ty)
            .map_err(|e| Error::Run(format!("{}: parameter `{}`: {e}", p.pos, p.name)))?;
        env.declare(
            &p.name,
            Slot {
                value,
                ty: p.ty,
                kind: SymbolKind::Param,
                out: p.out,
            },
        );
    }
    for v in &cm.vars {
        let value = match &v.init {
            Some(init) => evaluate_sampling(init, env, rng, cm.domain == Domain::Complex)
                .map_err(|e| Error::Run(format!("{}: variable `{}`: {e}", v.pos, v.name)))?,
            None => match cm.domain {
                Domain::Complex => Value::Complex(num_complex::Complex64::new(1.0, 0.0)),
                Domain::Real => Value::Real(0.0),
            },
        };
        let value = crate::env::coerce(&v.name, value, v.ty)
            .map_err(|e| Error::Run(format!("{}: variable `{}`: {e}", v.pos, v.name)))?;
        env.declare(
            &v.name,
            Slot {
                value,
                ty: v.ty,
                kind: SymbolKind::Var,
                out: v.out,
            },
        );
    }
    for d in &cm.dists {
        env.declare_dist(d.clone());
    }
    Ok(())
}

// ----------------------------------------------------------------------
// Assignment execution
// ----------------------------------------------------------------------

/// Execution context for assignment statements.
pub struct ExecCtx<'a> {
    pub env: &'a mut Env,
    /// Parent scope for `@main.` writes; present only while a submodel's
    /// post-processing runs.
    pub main_env: Option<&'a mut Env>,
    pub rng: &'a mut RngStream,
    pub complex_domain: bool,
    /// Signal names fired by guarded cases during execution.
    pub signals: Vec<String>,
    /// Set when a `repeat` marker executes.
    pub repeat_requested: bool,
}

impl<'a> ExecCtx<'a> {
    pub fn new(env: &'a mut Env, rng: &'a mut RngStream, complex_domain: bool) -> Self {
        ExecCtx {
            env,
            main_env: None,
            rng,
            complex_domain,
            signals: Vec::new(),
            repeat_requested: false,
        }
    }
}

/// Apply assignment statements in order: operators =, +=, -=, *=, /=, ^=,
/// targets are parameters, variables or `@main.` paths with optional
/// .real/.imag selectors; if/switch branch on the current env and record
/// their signals when a signal-carrying case fires.
pub fn apply_statements(stmts: &[Statement], ctx: &mut ExecCtx) -> Result<(), Error> {
    for stmt in stmts {
        apply_statement(stmt, ctx)?;
    }
    Ok(())
}

fn apply_statement(stmt: &Statement, ctx: &mut ExecCtx) -> Result<(), Error> {
    match stmt {
        Statement::Assign {
            target, op, value, ..
        } => apply_assign(target, *op, value, ctx),
        Statement::If { arms, pos } => {
            let guard = arms[0].guard.as_ref().expect("if guard");
            let taken = evaluate(guard, ctx.env)
                .and_then(|v| v.as_bool())
                .map_err(|e| Error::Run(format!("{pos}: if guard: {e}")))?;
            let arm = if taken { Some(&arms[0]) } else { arms.get(1) };
            if let Some(arm) = arm {
                if taken {
                    if let Some(sig) = &arm.signal {
                        ctx.signals.push(sig.clone());
                    }
                }
                for s in &arm.body {
                    apply_statement(s, ctx)?;
                }
            }
            Ok(())
        }
        Statement::Switch { cases, pos } => {
            let mut chosen: Option<&GuardedArm> = None;
            let mut default: Option<&GuardedArm> = None;
            for case in cases {
                match &case.guard {
                    Some(g) => {
                        let hit = evaluate(g, ctx.env)
                            .and_then(|v| v.as_bool())
                            .map_err(|e| Error::Run(format!("{pos}: case guard: {e}")))?;
                        if hit {
                            chosen = Some(case);
                            break;
                        }
                    }
                    None => default = Some(case),
                }
            }
            if let Some(case) = chosen.or(default) {
                if let Some(sig) = &case.signal {
                    ctx.signals.push(sig.clone());
                }
                for s in &case.body {
                    apply_statement(s, ctx)?;
                }
            }
            Ok(())
        }
        Statement::RepeatMarker { .. } => {
            ctx.repeat_requested = true;
            Ok(())
        }
        other => Err(Error::Run(format!(
            "{}: statement not allowed in an assignment group",
            other.pos()
        ))),
    }
}

fn apply_assign(
    target: &AssignTarget,
    op: AssignOp,
    value: &Expr,
    ctx: &mut ExecCtx,
) -> Result<(), Error> {
    let rhs = evaluate_sampling(value, ctx.env, ctx.rng, ctx.complex_domain)
        .map_err(|e| Error::Run(format!("{}: {e}", target.pos)))?;
    // Resolve the scope the target lives in.
    let scope: &mut Env = if target.cross_model {
        match ctx.main_env.as_deref_mut() {
            Some(main) => main,
            None => {
                return Err(Error::Run(format!(
                    "{}: `@main.` targets are only available in a submodel's post-processing",
                    target.pos
                )))
            }
        }
    } else {
        ctx.env
    };
    let slot_ty = scope
        .slot(&target.name)
        .map(|s| s.ty)
        .ok_or_else(|| Error::Run(format!("{}: unbound target `{}`", target.pos, target.name)))?;

    let apply_op = |cur: Value, rhs: &Value| -> Result<Value, EvalError> {
        match op {
            AssignOp::Set => Ok(*rhs),
            AssignOp::Add => cur.add(rhs),
            AssignOp::Sub => cur.sub(rhs),
            AssignOp::Mul => cur.mul(rhs),
            AssignOp::Div => cur.div(rhs),
            AssignOp::Pow => cur.pow(rhs),
        }
    };

    match target.component {
        None => {
            let cur = scope.value(&target.name).unwrap_or(Value::zero_of(slot_ty));
            let next =
                apply_op(cur, &rhs).map_err(|e| Error::Run(format!("{}: {e}", target.pos)))?;
            scope
                .set(&target.name, next)
                .map_err(|e| Error::Run(format!("{}: {e}", target.pos)))?;
        }
        Some(comp) => {
            let cur = scope.value(&target.name).unwrap_or(Value::zero_of(slot_ty));
            let new_comp = {
                let cur_comp = match (slot_ty, comp) {
                    (ScalarType::Complex, Component::Real) => cur.as_complex().unwrap().re,
                    (ScalarType::Complex, Component::Imag) => cur.as_complex().unwrap().im,
                    // Writing the real component of a real slot replaces it.
                    (ScalarType::Real, Component::Real) => cur.as_real().unwrap_or(0.0),
                    (ScalarType::Real, Component::Imag) => {
                        return Err(Error::Run(format!(
                            "{}: cannot write .imag of real-typed `{}`",
                            target.pos, target.name
                        )))
                    }
                    _ => {
                        return Err(Error::Run(format!(
                            "{}: component selectors need a real or complex target, `{}` is {}",
                            target.pos,
                            target.name,
                            slot_ty.name()
                        )))
                    }
                };
                let rhs_real = rhs.as_real().map_err(|e| {
                    Error::Run(format!(
                        "{}: component assignment needs a real value: {e}",
                        target.pos
                    ))
                })?;
                apply_op(Value::Real(cur_comp), &Value::Real(rhs_real))
                    .and_then(|v| v.as_real())
                    .map_err(|e| Error::Run(format!("{}: {e}", target.pos)))?
            };
            let next = match (slot_ty, comp) {
                (ScalarType::Complex, Component::Real) => {
                    let z = cur.as_complex().unwrap();
                    Value::Complex(num_complex::Complex64::new(new_comp, z.im))
                }
                (ScalarType::Complex, Component::Imag) => {
                    let z = cur.as_complex().unwrap();
                    Value::Complex(num_complex::Complex64::new(z.re, new_comp))
                }
                (ScalarType::Real, Component::Real) => Value::Real(new_comp),
                _ => unreachable!("rejected above"),
            };
            scope
                .set(&target.name, next)
                .map_err(|e| Error::Run(format!("{}: {e}", target.pos)))?;
        }
    }
    Ok(())
}

// ----------------------------------------------------------------------
// Limit processing
// ----------------------------------------------------------------------

/// Process limit groups sequentially. The first group in which any
/// signal-carrying case fires stops processing: its assignments have been
/// applied and the caller must re-solve, restarting from the first group.
pub fn process_limits(
    groups: &[CompiledLimitGroup],
    env: &mut Env,
    rng: &mut RngStream,
    complex_domain: bool,
) -> Result<(bool, Vec<(String, String)>), Error> {
    for group in groups {
        if !group.enabled {
            continue;
        }
        let mut ctx = ExecCtx::new(env, rng, complex_domain);
        apply_statements(&group.body, &mut ctx)?;
        if !ctx.signals.is_empty() {
            let fired = ctx
                .signals
                .into_iter()
                .map(|name| (name, group.name.clone()))
                .collect();
            return Ok((true, fired));
        }
    }
    Ok((false, Vec::new()))
}

// ----------------------------------------------------------------------
// Run driver
// ----------------------------------------------------------------------

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: u64,
    pub report_override: Option<ReportLevel>,
}

/// Parse nothing, solve everything: execute a compiled document and build
/// its run report.
pub fn run_document(doc: &ModelDocument, opts: &RunOptions) -> Result<RunReport, Error> {
    run_document_full(doc, opts).map(|(report, _)| report)
}

/// Build the initial environment of a compiled model: parameters bound in
/// declaration order, then variables, then distributions.
pub fn prepare_env(cm: &CompiledModel, seed: u64) -> Result<Env, Error> {
    let mut rng = seeded_rng(seed);
    let mut env = Env::new();
    init_env(cm, &mut env, &mut rng)?;
    Ok(env)
}

/// Like [`run_document`], but also returns the final environment so callers
/// can inspect values that are not out-tagged.
pub fn run_document_full(
    doc: &ModelDocument,
    opts: &RunOptions,
) -> Result<(RunReport, Env), Error> {
    let mut cm = compile(doc)?;
    if let Some(level) = opts.report_override {
        cm.report = level;
    }
    let mut rng = seeded_rng(opts.seed);
    let mut env = Env::new();
    init_env(&cm, &mut env, &mut rng)?;
    let report = run_compiled(&cm, &mut env, &mut rng, None)?;
    Ok((report, env))
}

/// Execute an already-compiled model against a fresh environment.
pub fn run_compiled(
    cm: &CompiledModel,
    env: &mut Env,
    rng: &mut RngStream,
    parent: Option<&mut Env>,
) -> Result<RunReport, Error> {
    let complex = cm.domain == Domain::Complex;
    let mut records: Vec<RepeatRecord> = Vec::new();
    let mut pass = 0usize;
    let mut base_post_done = false;

    loop {
        if pass == 0 {
            let mut ctx = ExecCtx::new(env, rng, complex);
            apply_statements(&cm.pre_proc, &mut ctx)?;
        }
        if pass == 0 || cm.re_init {
            let mut ctx = ExecCtx::new(env, rng, complex);
            apply_statements(&cm.re_init_stmts, &mut ctx)?;
        }
        let mut submodel_log = Vec::new();
        for sm in &cm.submodels {
            if pass == 0 || sm.always_on {
                run_submodel(sm, env, rng, &mut submodel_log)?;
            }
        }

        // Inner solve plus the outer limit loop.
        let mut outer = 0usize;
        let mut signals: Vec<FiredSignal> = Vec::new();
        let mut failure: Option<String> = None;
        let mut outcome: Option<SolveOutcome> = None;
        loop {
            match solve_once(cm, env, rng) {
                Err(Error::Solve(e)) => {
                    // Numeric solve failure. Inside Repeats this ends the
                    // repetition normally; inside the outer limit loop of a
                    // non-repeating model it aborts the run.
                    if outer > 0 && !cm.has_repeats() {
                        return Err(Error::Run(format!(
                            "solve failed while re-solving after limit group assignments: {e}"
                        )));
                    }
                    failure = Some(e.to_string());
                    break;
                }
                Err(other) => return Err(other),
                Ok(res) => {
                    let conv = res.converged();
                    outcome = Some(res);
                    if !conv {
                        if outer > 0 && !cm.has_repeats() {
                            return Err(Error::Run(
                                "solve did not converge while re-solving after limit group assignments"
                                    .to_string(),
                            ));
                        }
                        break;
                    }
                    let (resolve, fired) = process_limits(&cm.limits, env, rng, complex)?;
                    signals.extend(fired.into_iter().map(|(name, group)| FiredSignal {
                        name,
                        group,
                        repeat: pass,
                        outer_pass: outer,
                    }));
                    if resolve {
                        outer += 1;
                        if outer > cm.max_iter {
                            return Err(Error::Run(format!(
                                "limit groups kept firing after {} outer passes (limit cycling)",
                                cm.max_iter
                            )));
                        }
                        continue;
                    }
                    break;
                }
            }
        }

        let converged = failure.is_none() && outcome.as_ref().is_some_and(|o| o.converged());
        if converged && !base_post_done {
            let mut ctx = ExecCtx::new(env, rng, complex);
            apply_statements(&cm.base_post, &mut ctx)?;
            base_post_done = true;
        }
        records.push(RepeatRecord {
            repeat: pass,
            converged,
            failure,
            outcome,
            outer_passes: outer,
            signals,
            outputs: collect_outputs(cm, env),
            submodel_log,
        });

        if cm.repeats.is_empty() || !converged {
            break;
        }
        let mut ctx = ExecCtx::new(env, rng, complex);
        apply_statements(&cm.repeats, &mut ctx)?;
        if !ctx.repeat_requested || pass + 1 >= cm.max_reps {
            break;
        }
        pass += 1;
    }

    // Final post-processing; cross-model writes reach the parent here.
    let mut ctx = ExecCtx::new(env, rng, complex);
    ctx.main_env = parent;
    apply_statements(&cm.post_proc, &mut ctx)?;
    if let Some(last) = records.last_mut() {
        last.outputs = collect_outputs(cm, env);
    }

    Ok(RunReport {
        model_name: cm.name.clone(),
        model_type: cm.model_type,
        domain: cm.domain,
        level: cm.report,
        has_repeats: cm.has_repeats(),
        out_names: cm.out_names.clone(),
        records,
    })
}

fn collect_outputs(cm: &CompiledModel, env: &Env) -> Vec<(String, Value)> {
    cm.out_names
        .iter()
        .filter_map(|name| env.value(name).ok().map(|v| (name.clone(), v)))
        .collect()
}

fn solve_once(
    cm: &CompiledModel,
    env: &mut Env,
    rng: &mut RngStream,
) -> Result<SolveOutcome, Error> {
    let opts = SolveOptions {
        eps: cm.eps,
        max_iter: cm.max_iter,
        trace: cm.report != ReportLevel::Solved,
    };
    let complex = cm.domain == Domain::Complex;
    let iter_post = &cm.iter_post;
    let mut hook = |env: &mut Env, _iter: usize| -> Result<(), Error> {
        if iter_post.is_empty() {
            return Ok(());
        }
        let mut ctx = ExecCtx::new(env, rng, complex);
        apply_statements(iter_post, &mut ctx)
    };
    match &cm.solver {
        Solver::Nl(system) => Ok(SolveOutcome::Nl(newton_solve(
            system, env, &opts, &mut hook,
        )?)),
        Solver::Wls(system) => Ok(SolveOutcome::Wls(gauss_newton_wls(
            system, env, &opts, &mut hook,
        )?)),
    }
}

fn run_submodel(
    sm: &CompiledSubmodel,
    parent_env: &mut Env,
    rng: &mut RngStream,
    log: &mut Vec<String>,
) -> Result<(), Error> {
    let mut child_env = Env::new();
    // Copy the first copyPars parent parameters into the child scope.
    let copied: Vec<(String, Slot)> = parent_env
        .iter()
        .filter(|(_, s)| s.kind == SymbolKind::Param)
        .take(sm.copy_pars)
        .map(|(n, s)| (n.clone(), s.clone()))
        .collect();
    for (name, mut slot) in copied {
        slot.out = false;
        child_env.declare(&name, slot);
    }
    init_env(&sm.model, &mut child_env, rng)?;
    let report = run_compiled(&sm.model, &mut child_env, rng, Some(parent_env))?;
    let last = report.records.last();
    let converged = last.is_some_and(|r| r.converged);
    log.push(format!(
        "submodel \"{}\": {} in {} iteration(s)",
        sm.model.name,
        if converged { "solved" } else { "failed" },
        last.and_then(|r| r.outcome.as_ref())
            .map(|o| o.iterations())
            .unwrap_or(0),
    ));
    if !converged {
        return Err(Error::Run(format!(
            "submodel \"{}\" failed to solve",
            sm.model.name
        )));
    }
    Ok(())
}
