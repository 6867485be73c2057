//! AST for parsed model files: header, model attributes, ordered groups,
//! statements, and nested submodels.

use crate::error::Pos;
use crate::expr::Expr;
use crate::lexer::Op;

/// An attribute `name=value` from a `[...]` list. Duplicate names keep only
/// the first occurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct Attribute {
    pub name: String,
    pub value: AttrValue,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttrValue {
    Num(f64),
    /// Bare word: booleans, enums (NL, real, AllDetails, Gauss) or a
    /// parameter reference (weights such as `w=w_inj`).
    Word(String),
    Str(String),
}

impl AttrValue {
    pub fn as_bool(&self) -> Option<bool> {
        match self {
            AttrValue::Word(w) if w == "true" => Some(true),
            AttrValue::Word(w) if w == "false" => Some(false),
            _ => None,
        }
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            AttrValue::Num(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            AttrValue::Word(w) => Some(w),
            AttrValue::Str(s) => Some(s),
            _ => None,
        }
    }
}

/// Look up an attribute by name, first occurrence wins.
pub fn attr<'a>(attrs: &'a [Attribute], name: &str) -> Option<&'a AttrValue> {
    attrs.iter().find(|a| a.name == name).map(|a| &a.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKind {
    Vars,
    Params,
    Nles,
    Wlses,
    Ecs,
    Limits,
    Repeats,
    ReInit,
    PreProc,
    PostProc,
    IterPostP,
    BasePostP,
    Distributions,
}

impl GroupKind {
    pub fn name(self) -> &'static str {
        match self {
            GroupKind::Vars => "Vars",
            GroupKind::Params => "Params",
            GroupKind::Nles => "NLEs",
            GroupKind::Wlses => "WLSEs",
            GroupKind::Ecs => "ECs",
            GroupKind::Limits => "Limits",
            GroupKind::Repeats => "Repeats",
            GroupKind::ReInit => "ReInit",
            GroupKind::PreProc => "PreProc",
            GroupKind::PostProc => "PostProc",
            GroupKind::IterPostP => "IterPostP",
            GroupKind::BasePostP => "BasePostP",
            GroupKind::Distributions => "Distributions",
        }
    }

    /// Groups whose statements are equations.
    pub fn is_equation_group(self) -> bool {
        matches!(self, GroupKind::Nles | GroupKind::Wlses | GroupKind::Ecs)
    }
}

/// Assignment target: a plain name or a cross-model `@main.<name>` path,
/// optionally with a `.real`/`.imag` component selector.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignTarget {
    pub cross_model: bool,
    pub name: String,
    pub component: Option<Component>,
    pub pos: Pos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Real,
    Imag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignOp {
    Set,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl AssignOp {
    pub fn from_op(op: Op) -> Option<AssignOp> {
        Some(match op {
            Op::Assign => AssignOp::Set,
            Op::AddAssign => AssignOp::Add,
            Op::SubAssign => AssignOp::Sub,
            Op::MulAssign => AssignOp::Mul,
            Op::DivAssign => AssignOp::Div,
            Op::PowAssign => AssignOp::Pow,
            _ => return None,
        })
    }

    pub fn text(self) -> &'static str {
        match self {
            AssignOp::Set => "=",
            AssignOp::Add => "+=",
            AssignOp::Sub => "-=",
            AssignOp::Mul => "*=",
            AssignOp::Div => "/=",
            AssignOp::Pow => "^=",
        }
    }
}

/// One `case`/`default` arm of a switch, or one branch of an if.
#[derive(Debug, Clone, PartialEq)]
pub struct GuardedArm {
    /// `None` for `default`/`else`.
    pub guard: Option<Expr>,
    /// Signal attribute bound to this case, e.g. `[signal=TooHigh]`.
    pub signal: Option<String>,
    pub body: Vec<Statement>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    /// Equation `lhs [= rhs]`; a missing right-hand side means `= 0`.
    Equation {
        lhs: Expr,
        rhs: Option<Expr>,
        /// Weight attribute on WLS measurement equations.
        weight: Option<AttrValue>,
        pos: Pos,
    },
    Assign {
        target: AssignTarget,
        op: AssignOp,
        value: Expr,
        pos: Pos,
    },
    VarDecl(Decl),
    ParamDecl(Decl),
    DistDecl {
        name: String,
        attrs: Vec<Attribute>,
        pos: Pos,
    },
    If {
        /// `[0]` is the guarded then-branch; `[1]` (if present) the else.
        arms: Vec<GuardedArm>,
        pos: Pos,
    },
    Switch {
        cases: Vec<GuardedArm>,
        pos: Pos,
    },
    /// `group [name=...]:` block inside Limits.
    LimitGroup {
        attrs: Vec<Attribute>,
        body: Vec<Statement>,
        pos: Pos,
    },
    /// `repeat` marker inside the Repeats group.
    RepeatMarker {
        pos: Pos,
    },
}

impl Statement {
    pub fn pos(&self) -> Pos {
        match self {
            Statement::Equation { pos, .. }
            | Statement::Assign { pos, .. }
            | Statement::DistDecl { pos, .. }
            | Statement::If { pos, .. }
            | Statement::Switch { pos, .. }
            | Statement::LimitGroup { pos, .. }
            | Statement::RepeatMarker { pos } => *pos,
            Statement::VarDecl(d) | Statement::ParamDecl(d) => d.pos,
        }
    }
}

/// A variable or parameter declaration.
#[derive(Debug, Clone, PartialEq)]
pub struct Decl {
    pub name: String,
    pub init: Option<Expr>,
    pub attrs: Vec<Attribute>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub kind: GroupKind,
    pub attrs: Vec<Attribute>,
    pub statements: Vec<Statement>,
    pub pos: Pos,
}

/// An element of a model body, in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelItem {
    Group(Group),
    SubModel(SubModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubModel {
    pub attrs: Vec<Attribute>,
    pub items: Vec<ModelItem>,
    pub pos: Pos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelType {
    Nl,
    Wls,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Real,
    Complex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ReportLevel {
    Solved,
    All,
    AllDetails,
}

impl ReportLevel {
    pub fn from_word(w: &str) -> Option<ReportLevel> {
        Some(match w {
            "Solved" => ReportLevel::Solved,
            "All" => ReportLevel::All,
            "AllDetails" => ReportLevel::AllDetails,
            _ => return None,
        })
    }

    pub fn text(self) -> &'static str {
        match self {
            ReportLevel::Solved => "Solved",
            ReportLevel::All => "All",
            ReportLevel::AllDetails => "AllDetails",
        }
    }
}

/// The mandatory Header group: solver bounds and report level.
#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub attrs: Vec<Attribute>,
    pub pos: Pos,
}

impl Header {
    pub fn max_iter(&self) -> usize {
        attr(&self.attrs, "maxIter")
            .and_then(|v| v.as_num())
            .map(|n| n as usize)
            .unwrap_or(100)
    }

    pub fn max_reps(&self) -> usize {
        attr(&self.attrs, "maxReps")
            .and_then(|v| v.as_num())
            .map(|n| n as usize)
            .unwrap_or(100)
    }

    pub fn report(&self) -> ReportLevel {
        attr(&self.attrs, "report")
            .and_then(|v| v.as_text())
            .and_then(ReportLevel::from_word)
            .unwrap_or(ReportLevel::Solved)
    }
}

/// A parsed model file.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelDocument {
    pub header: Header,
    pub model_attrs: Vec<Attribute>,
    pub model_pos: Pos,
    pub items: Vec<ModelItem>,
}

impl ModelDocument {
    pub fn model_type(&self) -> ModelType {
        match attr(&self.model_attrs, "type").and_then(|v| v.as_text()) {
            Some("WLS") => ModelType::Wls,
            _ => ModelType::Nl,
        }
    }

    pub fn domain(&self) -> Domain {
        match attr(&self.model_attrs, "domain").and_then(|v| v.as_text()) {
            Some("cplx") | Some("cmplx") | Some("complex") => Domain::Complex,
            _ => Domain::Real,
        }
    }

    pub fn eps(&self) -> f64 {
        attr(&self.model_attrs, "eps")
            .and_then(|v| v.as_num())
            .unwrap_or(1e-6)
    }

    pub fn name(&self) -> &str {
        attr(&self.model_attrs, "name")
            .and_then(|v| v.as_text())
            .unwrap_or("")
    }

    pub fn re_init(&self) -> bool {
        attr(&self.model_attrs, "reInit")
            .and_then(|v| v.as_bool())
            .unwrap_or(false)
    }

    pub fn groups(&self) -> impl Iterator<Item = &Group> {
        self.items.iter().filter_map(|it| match it {
            ModelItem::Group(g) => Some(g),
            ModelItem::SubModel(_) => None,
        })
    }

    pub fn submodels(&self) -> impl Iterator<Item = &SubModel> {
        self.items.iter().filter_map(|it| match it {
            ModelItem::SubModel(s) => Some(s),
            ModelItem::Group(_) => None,
        })
    }

    pub fn group(&self, kind: GroupKind) -> Option<&Group> {
        self.groups().find(|g| g.kind == kind)
    }
}
