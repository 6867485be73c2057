//! Recursive descent parser for the modeling language.
//!
//! Top-level groups (Vars, Params, NLEs, ...) terminate implicitly at the
//! next group keyword or at the model's `end`; `if`/`switch`, limit groups,
//! Header, Model and SubModel blocks terminate with an explicit `end`.
//! A redundant `end` before a new group keyword is accepted.
//!
//! Line continuation is implicit when a line ends mid-expression: newlines
//! are skipped at operand position (after `=` or a trailing operator), and
//! the lexer already swallows newlines inside parentheses and brackets.

use crate::ast::*;
use crate::error::{ParseError, Pos};
use crate::expr::{BinOp, Expr, Func};
use crate::lexer::{tokenize, Kw, Op, TokKind, Token};
use crate::value::Value;

/// Parse a complete model file from source text.
pub fn parse_source(source: &str) -> Result<ModelDocument, crate::error::Error> {
    let tokens = tokenize(source)?;
    Ok(parse_model(&tokens)?)
}

/// Parse a full token stream into a model document.
pub fn parse_model(tokens: &[Token]) -> Result<ModelDocument, ParseError> {
    let mut p = Parser::new(tokens);
    let doc = p.document()?;
    Ok(doc)
}

/// Parse a standalone expression (the token stream must contain exactly one
/// expression).
pub fn parse_expression(tokens: &[Token]) -> Result<Expr, ParseError> {
    let mut p = Parser::new(tokens);
    let expr = p.expr()?;
    p.skip_seps();
    if let Some(t) = p.current() {
        return Err(ParseError::new(
            t.pos,
            format!("unexpected {} after expression", t.describe()),
        ));
    }
    Ok(expr)
}

/// Convenience wrapper over [`parse_expression`] for text input.
pub fn parse_expression_str(source: &str) -> Result<Expr, crate::error::Error> {
    let tokens = tokenize(source)?;
    Ok(parse_expression(&tokens)?)
}

/// Statement context: each group kind parses a different statement shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ctx {
    VarDecl,
    ParamDecl,
    Equation,
    Assignment,
    Repeats,
    Distributions,
    Limits,
}

impl Ctx {
    fn for_group(kind: GroupKind) -> Ctx {
        match kind {
            GroupKind::Vars => Ctx::VarDecl,
            GroupKind::Params => Ctx::ParamDecl,
            GroupKind::Nles | GroupKind::Wlses | GroupKind::Ecs => Ctx::Equation,
            GroupKind::Limits => Ctx::Limits,
            GroupKind::Repeats => Ctx::Repeats,
            GroupKind::Distributions => Ctx::Distributions,
            GroupKind::ReInit
            | GroupKind::PreProc
            | GroupKind::PostProc
            | GroupKind::IterPostP
            | GroupKind::BasePostP => Ctx::Assignment,
        }
    }
}

fn group_kind(kw: Kw) -> Option<GroupKind> {
    Some(match kw {
        Kw::Vars => GroupKind::Vars,
        Kw::Params => GroupKind::Params,
        Kw::Nles => GroupKind::Nles,
        Kw::Wlses => GroupKind::Wlses,
        Kw::Ecs => GroupKind::Ecs,
        Kw::Limits => GroupKind::Limits,
        Kw::Repeats => GroupKind::Repeats,
        Kw::ReInit => GroupKind::ReInit,
        Kw::PreProc => GroupKind::PreProc,
        Kw::PostProc => GroupKind::PostProc,
        Kw::IterPostP => GroupKind::IterPostP,
        Kw::BasePostP => GroupKind::BasePostP,
        Kw::Distributions => GroupKind::Distributions,
        _ => return None,
    })
}

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
}

impl<'t> Parser<'t> {
    fn new(tokens: &'t [Token]) -> Self {
        Parser { tokens, pos: 0 }
    }

    fn current(&self) -> Option<&'t Token> {
        self.tokens.get(self.pos)
    }

    fn kind(&self) -> Option<&'t TokKind> {
        self.current().map(|t| &t.kind)
    }

    fn bump(&mut self) -> Option<&'t Token> {
        let t = self.tokens.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn here(&self) -> Pos {
        match self.current() {
            Some(t) => t.pos,
            None => self
                .tokens
                .last()
                .map(|t| t.pos)
                .unwrap_or_else(|| Pos::new(1, 1)),
        }
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError::new(self.here(), msg)
    }

    fn unexpected(&self, what: &str) -> ParseError {
        match self.current() {
            Some(t) => ParseError::new(t.pos, format!("expected {what}, found {}", t.describe())),
            None => self.err(format!("expected {what}, found end of input")),
        }
    }

    fn is_sep(kind: &TokKind) -> bool {
        matches!(kind, TokKind::Semi | TokKind::Newline)
    }

    fn skip_seps(&mut self) {
        while self.kind().is_some_and(Self::is_sep) {
            self.bump();
        }
    }

    /// Skip newlines only: used at operand position for implicit line
    /// continuation. Semicolons always terminate a statement.
    fn skip_newlines(&mut self) {
        while matches!(self.kind(), Some(TokKind::Newline)) {
            self.bump();
        }
    }

    fn at_keyword(&self, kw: Kw) -> bool {
        matches!(self.kind(), Some(TokKind::Keyword(k)) if *k == kw)
    }

    fn eat_keyword(&mut self, kw: Kw) -> bool {
        if self.at_keyword(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: Kw) -> Result<Pos, ParseError> {
        if self.at_keyword(kw) {
            Ok(self.bump().unwrap().pos)
        } else {
            Err(self.unexpected(&format!("`{}`", kw.text())))
        }
    }

    fn expect_colon(&mut self) -> Result<(), ParseError> {
        if matches!(self.kind(), Some(TokKind::Colon)) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected("`:`"))
        }
    }

    fn eat_op(&mut self, op: Op) -> bool {
        if matches!(self.kind(), Some(TokKind::Op(o)) if *o == op) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<(String, Pos), ParseError> {
        match self.kind() {
            Some(TokKind::Ident(name)) => {
                let pos = self.bump().unwrap().pos;
                Ok((name.clone(), pos))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    // ------------------------------------------------------------------
    // Document structure
    // ------------------------------------------------------------------

    fn document(&mut self) -> Result<ModelDocument, ParseError> {
        self.skip_seps();
        if !self.at_keyword(Kw::Header) {
            return Err(self.unexpected("`Header:` (the header is mandatory)"));
        }
        let header = self.header()?;
        self.skip_seps();
        let model_pos = self.expect_keyword(Kw::Model)?;
        let model_attrs = self.opt_attrs()?;
        self.expect_colon()?;
        let items = self.model_items(false)?;
        self.skip_seps();
        if let Some(t) = self.current() {
            return Err(ParseError::new(
                t.pos,
                format!("unexpected {} after end of model", t.describe()),
            ));
        }
        Ok(ModelDocument {
            header,
            model_attrs,
            model_pos,
            items,
        })
    }

    fn header(&mut self) -> Result<Header, ParseError> {
        let pos = self.expect_keyword(Kw::Header)?;
        self.expect_colon()?;
        let mut attrs = Vec::new();
        loop {
            self.skip_seps();
            if self.eat_keyword(Kw::End) {
                break;
            }
            if self.current().is_none() {
                return Err(self.err("missing `end` of Header"));
            }
            let (name, apos) = self.expect_ident("a header setting name")?;
            if !self.eat_op(Op::Assign) {
                return Err(self.unexpected("`=` in header setting"));
            }
            let value = self.attr_value()?;
            attrs.push(Attribute {
                name,
                value,
                pos: apos,
            });
        }
        Ok(Header { attrs, pos })
    }

    /// Parse group/submodel items until the terminating `end` (consumed).
    /// At the top level a redundant `end` directly followed by another group
    /// keyword closes only the current group; inside a SubModel `end` always
    /// closes the submodel, so its parent's groups can follow.
    fn model_items(&mut self, in_submodel: bool) -> Result<Vec<ModelItem>, ParseError> {
        let mut items = Vec::new();
        loop {
            self.skip_seps();
            match self.kind() {
                Some(TokKind::Keyword(Kw::End)) => {
                    self.bump();
                    if in_submodel {
                        break;
                    }
                    self.skip_seps();
                    match self.kind() {
                        // Redundant group `end` before the next group.
                        Some(TokKind::Keyword(k)) if k.is_group() => continue,
                        // Redundant group `end` followed by the model's own.
                        Some(TokKind::Keyword(Kw::End)) => {
                            self.bump();
                            break;
                        }
                        _ => break,
                    }
                }
                Some(TokKind::Keyword(Kw::SubModel)) => {
                    items.push(ModelItem::SubModel(self.submodel()?));
                }
                Some(TokKind::Keyword(k)) => {
                    if let Some(kind) = group_kind(*k) {
                        items.push(ModelItem::Group(self.group(kind)?));
                    } else {
                        return Err(self.unexpected("a group keyword or `end`"));
                    }
                }
                Some(_) => return Err(self.unexpected("a group keyword or `end`")),
                None => return Err(self.err("missing `end` of model")),
            }
        }
        Ok(items)
    }

    fn submodel(&mut self) -> Result<SubModel, ParseError> {
        let pos = self.expect_keyword(Kw::SubModel)?;
        let attrs = self.opt_attrs()?;
        self.expect_colon()?;
        let items = self.model_items(true)?;
        Ok(SubModel { attrs, items, pos })
    }

    fn group(&mut self, kind: GroupKind) -> Result<Group, ParseError> {
        let pos = self.bump().unwrap().pos; // group keyword
        let attrs = self.opt_attrs()?;
        self.expect_colon()?;
        let statements = self.statements(Ctx::for_group(kind))?;
        Ok(Group {
            kind,
            attrs,
            statements,
            pos,
        })
    }

    /// True when the current token closes a statement list: the next group
    /// keyword, a block keyword handled by the caller, or `end`.
    fn at_block_close(&self) -> bool {
        match self.kind() {
            None => true,
            Some(TokKind::Keyword(k)) => {
                k.is_group() || matches!(k, Kw::End | Kw::Else | Kw::Case | Kw::Default)
            }
            _ => false,
        }
    }

    fn statements(&mut self, ctx: Ctx) -> Result<Vec<Statement>, ParseError> {
        let mut out = Vec::new();
        loop {
            self.skip_seps();
            // In a declaration context a keyword immediately followed by `=`
            // is a (diagnosable) misuse of a reserved word as a name, not a
            // block boundary.
            let misused_keyword = matches!(ctx, Ctx::VarDecl | Ctx::ParamDecl)
                && matches!(self.kind(), Some(TokKind::Keyword(_)))
                && matches!(
                    self.tokens.get(self.pos + 1).map(|t| &t.kind),
                    Some(TokKind::Op(Op::Assign))
                );
            if !misused_keyword && self.at_block_close() {
                break;
            }
            out.push(self.statement(ctx)?);
        }
        Ok(out)
    }

    fn statement(&mut self, ctx: Ctx) -> Result<Statement, ParseError> {
        match ctx {
            Ctx::VarDecl | Ctx::ParamDecl => self.decl(ctx),
            Ctx::Equation => self.equation_statement(),
            Ctx::Assignment => self.assignment_statement(false),
            Ctx::Repeats => self.assignment_statement(true),
            Ctx::Distributions => self.dist_decl(),
            Ctx::Limits => self.limit_group(),
        }
    }

    // ------------------------------------------------------------------
    // Declarations
    // ------------------------------------------------------------------

    fn decl(&mut self, ctx: Ctx) -> Result<Statement, ParseError> {
        let (name, pos) = match self.kind() {
            Some(TokKind::Ident(n)) => {
                let p = self.bump().unwrap().pos;
                (n.clone(), p)
            }
            // A keyword directly followed by `=` is a misuse of a reserved
            // word as a declaration name. Parse it through so validation can
            // report every such misuse with its location.
            Some(TokKind::Keyword(k))
                if matches!(
                    self.tokens.get(self.pos + 1).map(|t| &t.kind),
                    Some(TokKind::Op(Op::Assign))
                ) =>
            {
                let text = k.text().to_string();
                let p = self.bump().unwrap().pos;
                (text, p)
            }
            Some(TokKind::Keyword(k)) => {
                return Err(ParseError::new(
                    self.here(),
                    format!(
                        "`{}` is a reserved keyword and cannot declare a variable or parameter",
                        k.text()
                    ),
                ));
            }
            _ => return Err(self.unexpected("a declaration name")),
        };
        let init = if self.eat_op(Op::Assign) {
            Some(self.expr()?)
        } else {
            None
        };
        let attrs = self.opt_attrs()?;
        let decl = Decl {
            name,
            init,
            attrs,
            pos,
        };
        Ok(if ctx == Ctx::VarDecl {
            Statement::VarDecl(decl)
        } else {
            Statement::ParamDecl(decl)
        })
    }

    fn dist_decl(&mut self) -> Result<Statement, ParseError> {
        let (name, pos) = self.expect_ident("a distribution name")?;
        let attrs = self.opt_attrs()?;
        Ok(Statement::DistDecl { name, attrs, pos })
    }

    // ------------------------------------------------------------------
    // Equations and conditionals
    // ------------------------------------------------------------------

    fn equation_statement(&mut self) -> Result<Statement, ParseError> {
        match self.kind() {
            Some(TokKind::Keyword(Kw::If)) => self.if_block(Ctx::Equation),
            Some(TokKind::Keyword(Kw::Switch)) => self.switch_block(Ctx::Equation),
            _ => {
                // Weight attributes bind to the equation on the same line
                // and are written before it: `[w=w_inj] <equation>`.
                let attrs = self.opt_attrs()?;
                let weight = attr(&attrs, "w").cloned();
                self.equation(weight)
            }
        }
    }

    fn equation(&mut self, weight: Option<AttrValue>) -> Result<Statement, ParseError> {
        let pos = self.here();
        let lhs = self.expr()?;
        let rhs = if self.eat_op(Op::Assign) {
            Some(self.expr()?)
        } else {
            None
        };
        if matches!(self.kind(), Some(TokKind::Op(Op::Assign))) {
            return Err(self.err("an equation may contain at most one `=`"));
        }
        Ok(Statement::Equation {
            lhs,
            rhs,
            weight,
            pos,
        })
    }

    fn if_block(&mut self, ctx: Ctx) -> Result<Statement, ParseError> {
        let pos = self.expect_keyword(Kw::If)?;
        let guard = self.expr()?;
        let attrs = self.opt_attrs()?;
        let signal = attr(&attrs, "signal")
            .and_then(|v| v.as_text())
            .map(str::to_string);
        self.expect_colon()?;
        let then_body = self.statements(ctx)?;
        let mut arms = vec![GuardedArm {
            guard: Some(guard),
            signal,
            body: then_body,
            pos,
        }];
        if self.at_keyword(Kw::Else) {
            let else_pos = self.bump().unwrap().pos;
            self.expect_colon()?;
            let else_body = self.statements(ctx)?;
            arms.push(GuardedArm {
                guard: None,
                signal: None,
                body: else_body,
                pos: else_pos,
            });
        }
        self.expect_keyword(Kw::End)?;
        Ok(Statement::If { arms, pos })
    }

    fn switch_block(&mut self, ctx: Ctx) -> Result<Statement, ParseError> {
        let pos = self.expect_keyword(Kw::Switch)?;
        self.expect_colon()?;
        let mut cases = Vec::new();
        loop {
            self.skip_seps();
            match self.kind() {
                Some(TokKind::Keyword(Kw::Case)) => {
                    let cpos = self.bump().unwrap().pos;
                    let guard = self.expr()?;
                    let attrs = self.opt_attrs()?;
                    let signal = attr(&attrs, "signal")
                        .and_then(|v| v.as_text())
                        .map(str::to_string);
                    if !self.eat_op(Op::Arrow) {
                        return Err(self.unexpected("`->` after case guard"));
                    }
                    let stmt = self.arm_statement(ctx)?;
                    cases.push(GuardedArm {
                        guard: Some(guard),
                        signal,
                        body: vec![stmt],
                        pos: cpos,
                    });
                }
                Some(TokKind::Keyword(Kw::Default)) => {
                    let cpos = self.bump().unwrap().pos;
                    let attrs = self.opt_attrs()?;
                    let signal = attr(&attrs, "signal")
                        .and_then(|v| v.as_text())
                        .map(str::to_string);
                    if !self.eat_op(Op::Arrow) {
                        return Err(self.unexpected("`->` after default"));
                    }
                    let stmt = self.arm_statement(ctx)?;
                    cases.push(GuardedArm {
                        guard: None,
                        signal,
                        body: vec![stmt],
                        pos: cpos,
                    });
                }
                Some(TokKind::Keyword(Kw::End)) => {
                    self.bump();
                    break;
                }
                _ => return Err(self.unexpected("`case`, `default` or `end` in switch")),
            }
        }
        Ok(Statement::Switch { cases, pos })
    }

    /// The single statement after `->` in a switch case.
    fn arm_statement(&mut self, ctx: Ctx) -> Result<Statement, ParseError> {
        match ctx {
            Ctx::Equation => self.equation(None),
            _ => self.assignment(),
        }
    }

    // ------------------------------------------------------------------
    // Assignments
    // ------------------------------------------------------------------

    fn assignment_statement(&mut self, allow_repeat: bool) -> Result<Statement, ParseError> {
        match self.kind() {
            Some(TokKind::Keyword(Kw::If)) => {
                let ctx = if allow_repeat {
                    Ctx::Repeats
                } else {
                    Ctx::Assignment
                };
                self.if_block(ctx)
            }
            Some(TokKind::Keyword(Kw::Switch)) => {
                let ctx = if allow_repeat {
                    Ctx::Repeats
                } else {
                    Ctx::Assignment
                };
                self.switch_block(ctx)
            }
            Some(TokKind::Keyword(Kw::Repeat)) => {
                let pos = self.bump().unwrap().pos;
                if !allow_repeat {
                    return Err(ParseError::new(
                        pos,
                        "`repeat` is only allowed inside the Repeats group",
                    ));
                }
                Ok(Statement::RepeatMarker { pos })
            }
            _ => self.assignment(),
        }
    }

    fn assignment(&mut self) -> Result<Statement, ParseError> {
        let target = self.assign_target()?;
        let pos = target.pos;
        let op = match self.kind() {
            Some(TokKind::Op(o)) => match AssignOp::from_op(*o) {
                Some(op) => {
                    self.bump();
                    op
                }
                None => return Err(self.unexpected("an assignment operator")),
            },
            _ => return Err(self.unexpected("an assignment operator")),
        };
        let value = self.expr()?;
        Ok(Statement::Assign {
            target,
            op,
            value,
            pos,
        })
    }

    fn assign_target(&mut self) -> Result<AssignTarget, ParseError> {
        let pos = self.here();
        let cross_model = if matches!(self.kind(), Some(TokKind::At)) {
            self.bump();
            let (ns, npos) = self.expect_ident("a scope name after `@`")?;
            if ns != "main" {
                return Err(ParseError::new(
                    npos,
                    format!("unknown cross-model scope `@{ns}` (only `@main` is supported)"),
                ));
            }
            if !matches!(self.kind(), Some(TokKind::Dot)) {
                return Err(self.unexpected("`.` after `@main`"));
            }
            self.bump();
            true
        } else {
            false
        };
        let (name, _) = self.expect_ident("an assignment target")?;
        let component = if matches!(self.kind(), Some(TokKind::Dot)) {
            self.bump();
            let (sel, spos) = self.expect_ident("`real` or `imag`")?;
            Some(match sel.as_str() {
                "real" => Component::Real,
                "imag" => Component::Imag,
                other => {
                    return Err(ParseError::new(
                        spos,
                        format!("unknown component selector `.{other}` (expected .real or .imag)"),
                    ))
                }
            })
        } else {
            None
        };
        Ok(AssignTarget {
            cross_model,
            name,
            component,
            pos,
        })
    }

    fn limit_group(&mut self) -> Result<Statement, ParseError> {
        if !self.at_keyword(Kw::Group) {
            return Err(self.unexpected("`group [...]:` (only limit groups may appear in Limits)"));
        }
        let pos = self.bump().unwrap().pos;
        let attrs = self.opt_attrs()?;
        self.expect_colon()?;
        let body = self.statements(Ctx::Assignment)?;
        self.expect_keyword(Kw::End)?;
        Ok(Statement::LimitGroup { attrs, body, pos })
    }

    // ------------------------------------------------------------------
    // Attributes
    // ------------------------------------------------------------------

    fn opt_attrs(&mut self) -> Result<Vec<Attribute>, ParseError> {
        if !matches!(self.kind(), Some(TokKind::LBracket)) {
            return Ok(Vec::new());
        }
        self.bump();
        let mut attrs = Vec::new();
        loop {
            match self.kind() {
                Some(TokKind::RBracket) => {
                    self.bump();
                    break;
                }
                Some(TokKind::Ident(_)) => {
                    let (name, pos) = self.expect_ident("an attribute name")?;
                    if !self.eat_op(Op::Assign) {
                        return Err(self.unexpected("`=` (each attribute must have a value)"));
                    }
                    let value = self.attr_value()?;
                    attrs.push(Attribute { name, value, pos });
                }
                _ => return Err(self.unexpected("an attribute name or `]`")),
            }
        }
        Ok(attrs)
    }

    fn attr_value(&mut self) -> Result<AttrValue, ParseError> {
        let negative = self.eat_op(Op::Minus);
        match self.kind() {
            Some(TokKind::Num(n)) => {
                let v = if negative { -n } else { *n };
                self.bump();
                Ok(AttrValue::Num(v))
            }
            Some(TokKind::Ident(w)) if !negative => {
                let w = w.clone();
                self.bump();
                Ok(AttrValue::Word(w))
            }
            Some(TokKind::Str(s)) if !negative => {
                let s = s.clone();
                self.bump();
                Ok(AttrValue::Str(s))
            }
            _ => Err(self.unexpected("an attribute value")),
        }
    }

    // ------------------------------------------------------------------
    // Expressions
    // ------------------------------------------------------------------

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.additive()?;
        let op = match self.kind() {
            Some(TokKind::Op(Op::Lt)) => Some(BinOp::Lt),
            Some(TokKind::Op(Op::Le)) => Some(BinOp::Le),
            Some(TokKind::Op(Op::Gt)) => Some(BinOp::Gt),
            Some(TokKind::Op(Op::Ge)) => Some(BinOp::Ge),
            _ => None,
        };
        match op {
            Some(op) => {
                self.bump();
                let rhs = self.additive()?;
                Ok(Expr::bin(op, lhs, rhs))
            }
            None => Ok(lhs),
        }
    }

    fn additive(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.neg_term()?;
        loop {
            let op = match self.kind() {
                Some(TokKind::Op(Op::Plus)) => BinOp::Add,
                Some(TokKind::Op(Op::Minus)) => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.neg_term()?;
            acc = Expr::bin(op, acc, rhs);
        }
        Ok(acc)
    }

    /// An additive operand. A leading minus negates the whole multiplicative
    /// chain: -v^2*a parses as -(v^2*a).
    fn neg_term(&mut self) -> Result<Expr, ParseError> {
        self.skip_newlines();
        if self.eat_op(Op::Minus) {
            let inner = self.neg_term()?;
            return Ok(Expr::neg(inner));
        }
        self.multiplicative()
    }

    fn multiplicative(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.unary()?;
        loop {
            let op = match self.kind() {
                Some(TokKind::Op(Op::Star)) => BinOp::Mul,
                Some(TokKind::Op(Op::Slash)) => BinOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.unary()?;
            acc = Expr::bin(op, acc, rhs);
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        // Operand position: a line break here is an implicit continuation.
        self.skip_newlines();
        if self.eat_op(Op::Minus) {
            let inner = self.unary()?;
            return Ok(Expr::neg(inner));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat_op(Op::Caret) {
            // Right-associative; `^` binds tighter than unary minus, so
            // -v^2 parses as -(v^2) while a^-b is still accepted.
            let exp = self.unary()?;
            return Ok(Expr::pow(base, exp));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        self.skip_newlines();
        match self.kind() {
            Some(TokKind::Num(n)) => {
                let n = *n;
                self.bump();
                Ok(Expr::real(n))
            }
            Some(TokKind::Imag(n)) => {
                let n = *n;
                self.bump();
                Ok(Expr::complex(0.0, n))
            }
            Some(TokKind::LParen) => {
                self.bump();
                let inner = self.expr()?;
                if !matches!(self.kind(), Some(TokKind::RParen)) {
                    return Err(self.unexpected("`)`"));
                }
                self.bump();
                Ok(inner)
            }
            Some(TokKind::Ident(name)) => {
                let name = name.clone();
                let pos = self.bump().unwrap().pos;
                if matches!(self.kind(), Some(TokKind::LParen)) {
                    return self.call(&name, pos);
                }
                match name.as_str() {
                    // Built-in constants.
                    "e" => Ok(Expr::real(std::f64::consts::E)),
                    "pi" => Ok(Expr::real(std::f64::consts::PI)),
                    "true" => Ok(Expr::Const(Value::Bool(true))),
                    "false" => Ok(Expr::Const(Value::Bool(false))),
                    _ => Ok(Expr::Ident(name)),
                }
            }
            _ => Err(self.unexpected("an expression")),
        }
    }

    fn call(&mut self, name: &str, pos: Pos) -> Result<Expr, ParseError> {
        self.bump(); // `(`
        let mut args = Vec::new();
        if !matches!(self.kind(), Some(TokKind::RParen)) {
            loop {
                args.push(self.expr()?);
                if matches!(self.kind(), Some(TokKind::Comma)) {
                    self.bump();
                    continue;
                }
                break;
            }
        }
        if !matches!(self.kind(), Some(TokKind::RParen)) {
            return Err(self.unexpected("`)` or `,` in argument list"));
        }
        self.bump();
        if name == "conj" {
            if args.len() != 1 {
                return Err(ParseError::new(
                    pos,
                    format!("conj expects 1 argument, found {}", args.len()),
                ));
            }
            return Ok(Expr::conj(args.into_iter().next().unwrap()));
        }
        match Func::from_name(name) {
            Some(f) => {
                if args.len() != f.arity() {
                    return Err(ParseError::new(
                        pos,
                        format!(
                            "{} expects {} argument(s), found {}",
                            f.name(),
                            f.arity(),
                            args.len()
                        ),
                    ));
                }
                Ok(Expr::call(f, args))
            }
            None => Err(ParseError::new(pos, format!("unknown function `{name}`"))),
        }
    }
}
