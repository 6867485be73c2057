//! Tokenizer for the modeling language.
//!
//! Identifiers may contain Unicode letters (Greek symbols such as δ or θ),
//! ASCII letters, digits and underscores, and do not start with a digit.
//! `//` starts a comment running to end of line. A numeric literal directly
//! suffixed by `i` is an imaginary literal. Both `;` and newline produce
//! statement separators; newlines inside parentheses or brackets are
//! swallowed so wrapped expressions continue on the next line.

use crate::error::{LexError, Pos};

#[derive(Debug, Clone, PartialEq)]
pub enum TokKind {
    Ident(String),
    Keyword(Kw),
    Num(f64),
    /// Imaginary literal: the stored number is the imaginary coefficient.
    Imag(f64),
    Str(String),
    Op(Op),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Colon,
    Comma,
    Dot,
    At,
    /// Statement separator from `;`.
    Semi,
    /// Statement separator from a line break.
    Newline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Lt,
    Le,
    Gt,
    Ge,
    Assign,
    AddAssign,
    SubAssign,
    MulAssign,
    DivAssign,
    PowAssign,
    Arrow,
}

impl Op {
    pub fn text(self) -> &'static str {
        match self {
            Op::Plus => "+",
            Op::Minus => "-",
            Op::Star => "*",
            Op::Slash => "/",
            Op::Caret => "^",
            Op::Lt => "<",
            Op::Le => "<=",
            Op::Gt => ">",
            Op::Ge => ">=",
            Op::Assign => "=",
            Op::AddAssign => "+=",
            Op::SubAssign => "-=",
            Op::MulAssign => "*=",
            Op::DivAssign => "/=",
            Op::PowAssign => "^=",
            Op::Arrow => "->",
        }
    }
}

/// Reserved keywords. Group names can never be used as variable or
/// parameter names.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kw {
    Header,
    Model,
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
    SubModel,
    Distributions,
    Group,
    If,
    Else,
    Switch,
    Case,
    Default,
    End,
    Repeat,
}

impl Kw {
    pub fn from_str(s: &str) -> Option<Kw> {
        Some(match s {
            "Header" => Kw::Header,
            "Model" => Kw::Model,
            "Vars" => Kw::Vars,
            "Params" => Kw::Params,
            "NLEs" => Kw::Nles,
            "WLSEs" => Kw::Wlses,
            "ECs" => Kw::Ecs,
            "Limits" => Kw::Limits,
            "Repeats" => Kw::Repeats,
            "ReInit" => Kw::ReInit,
            "PreProc" => Kw::PreProc,
            "PostProc" => Kw::PostProc,
            "IterPostP" => Kw::IterPostP,
            "BasePostP" => Kw::BasePostP,
            "SubModel" => Kw::SubModel,
            "Distributions" => Kw::Distributions,
            "group" => Kw::Group,
            "if" => Kw::If,
            "else" => Kw::Else,
            "switch" => Kw::Switch,
            "case" => Kw::Case,
            "default" => Kw::Default,
            "end" => Kw::End,
            "repeat" => Kw::Repeat,
            _ => return None,
        })
    }

    pub fn text(self) -> &'static str {
        match self {
            Kw::Header => "Header",
            Kw::Model => "Model",
            Kw::Vars => "Vars",
            Kw::Params => "Params",
            Kw::Nles => "NLEs",
            Kw::Wlses => "WLSEs",
            Kw::Ecs => "ECs",
            Kw::Limits => "Limits",
            Kw::Repeats => "Repeats",
            Kw::ReInit => "ReInit",
            Kw::PreProc => "PreProc",
            Kw::PostProc => "PostProc",
            Kw::IterPostP => "IterPostP",
            Kw::BasePostP => "BasePostP",
            Kw::SubModel => "SubModel",
            Kw::Distributions => "Distributions",
            Kw::Group => "group",
            Kw::If => "if",
            Kw::Else => "else",
            Kw::Switch => "switch",
            Kw::Case => "case",
            Kw::Default => "default",
            Kw::End => "end",
            Kw::Repeat => "repeat",
        }
    }

    /// Keywords that open a group inside a model body.
    pub fn is_group(self) -> bool {
        matches!(
            self,
            Kw::Vars
                | Kw::Params
                | Kw::Nles
                | Kw::Wlses
                | Kw::Ecs
                | Kw::Limits
                | Kw::Repeats
                | Kw::ReInit
                | Kw::PreProc
                | Kw::PostProc
                | Kw::IterPostP
                | Kw::BasePostP
                | Kw::SubModel
                | Kw::Distributions
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokKind,
    pub pos: Pos,
}

impl Token {
    pub fn describe(&self) -> String {
        match &self.kind {
            TokKind::Ident(s) => format!("identifier `{s}`"),
            TokKind::Keyword(k) => format!("keyword `{}`", k.text()),
            TokKind::Num(n) => format!("number `{n}`"),
            TokKind::Imag(n) => format!("imaginary number `{n}i`"),
            TokKind::Str(s) => format!("string \"{s}\""),
            TokKind::Op(op) => format!("`{}`", op.text()),
            TokKind::LParen => "`(`".into(),
            TokKind::RParen => "`)`".into(),
            TokKind::LBracket => "`[`".into(),
            TokKind::RBracket => "`]`".into(),
            TokKind::Colon => "`:`".into(),
            TokKind::Comma => "`,`".into(),
            TokKind::Dot => "`.`".into(),
            TokKind::At => "`@`".into(),
            TokKind::Semi => "`;`".into(),
            TokKind::Newline => "end of line".into(),
        }
    }
}

fn is_ident_start(c: char) -> bool {
    c == '_' || c.is_alphabetic()
}

fn is_ident_continue(c: char) -> bool {
    c == '_' || c.is_alphanumeric()
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: u32,
    col: u32,
    /// Nesting depth of `(` and `[`; newlines inside are not separators.
    depth: u32,
    out: Vec<Token>,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            chars: src.chars().peekable(),
            line: 1,
            col: 1,
            depth: 0,
            out: Vec::new(),
        }
    }

    fn pos(&self) -> Pos {
        Pos::new(self.line, self.col)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn push(&mut self, kind: TokKind, pos: Pos) {
        self.out.push(Token { kind, pos });
    }

    fn run(mut self) -> Result<Vec<Token>, LexError> {
        while let Some(c) = self.peek() {
            let pos = self.pos();
            match c {
                ' ' | '\t' | '\r' => {
                    self.bump();
                }
                '\n' => {
                    self.bump();
                    if self.depth == 0 {
                        self.push(TokKind::Newline, pos);
                    }
                }
                '/' => {
                    self.bump();
                    if self.peek() == Some('/') {
                        // Comment to end of line; the newline itself still
                        // separates statements.
                        while let Some(c) = self.peek() {
                            if c == '\n' {
                                break;
                            }
                            self.bump();
                        }
                    } else if self.peek() == Some('=') {
                        self.bump();
                        self.push(TokKind::Op(Op::DivAssign), pos);
                    } else {
                        self.push(TokKind::Op(Op::Slash), pos);
                    }
                }
                '0'..='9' => self.number(pos)?,
                '"' => self.string(pos)?,
                c if is_ident_start(c) => self.ident(pos),
                _ => self.operator(pos)?,
            }
        }
        Ok(self.out)
    }

    fn number(&mut self, pos: Pos) -> Result<(), LexError> {
        let mut text = String::new();
        while matches!(self.peek(), Some('0'..='9')) {
            text.push(self.bump().unwrap());
        }
        if self.peek() == Some('.') {
            // A digit must follow for this to be a fractional part; `1.real`
            // style selectors never follow numeric literals in practice.
            let mut look = self.chars.clone();
            look.next();
            if matches!(look.peek(), Some('0'..='9')) {
                text.push(self.bump().unwrap());
                while matches!(self.peek(), Some('0'..='9')) {
                    text.push(self.bump().unwrap());
                }
            }
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let mut look = self.chars.clone();
            look.next();
            let next = look.peek().copied();
            let exp_ok = match next {
                Some('0'..='9') => true,
                Some('+' | '-') => {
                    look.next();
                    matches!(look.peek(), Some('0'..='9'))
                }
                _ => false,
            };
            if exp_ok {
                text.push(self.bump().unwrap());
                if matches!(self.peek(), Some('+' | '-')) {
                    text.push(self.bump().unwrap());
                }
                while matches!(self.peek(), Some('0'..='9')) {
                    text.push(self.bump().unwrap());
                }
            }
        }
        let value: f64 = text.parse().map_err(|_| LexError {
            pos,
            message: format!("invalid numeric literal `{text}`"),
        })?;
        // An `i` suffix (not starting a longer identifier) marks an
        // imaginary literal: 0.3i, 2i, 1i.
        if self.peek() == Some('i') {
            let mut look = self.chars.clone();
            look.next();
            if !look.peek().copied().is_some_and(is_ident_continue) {
                self.bump();
                self.push(TokKind::Imag(value), pos);
                return Ok(());
            }
        }
        self.push(TokKind::Num(value), pos);
        Ok(())
    }

    fn string(&mut self, pos: Pos) -> Result<(), LexError> {
        self.bump(); // opening quote
        let mut text = String::new();
        loop {
            match self.peek() {
                Some('"') => {
                    self.bump();
                    break;
                }
                Some('\n') | None => {
                    return Err(LexError {
                        pos,
                        message: "unterminated string literal".into(),
                    })
                }
                Some(c) => {
                    text.push(c);
                    self.bump();
                }
            }
        }
        self.push(TokKind::Str(text), pos);
        Ok(())
    }

    fn ident(&mut self, pos: Pos) {
        let mut text = String::new();
        while self.peek().is_some_and(is_ident_continue) {
            text.push(self.bump().unwrap());
        }
        match Kw::from_str(&text) {
            Some(kw) => self.push(TokKind::Keyword(kw), pos),
            None => self.push(TokKind::Ident(text), pos),
        }
    }

    fn operator(&mut self, pos: Pos) -> Result<(), LexError> {
        let c = self.bump().unwrap();
        let eq_next = self.peek() == Some('=');
        let kind = match c {
            '+' if eq_next => {
                self.bump();
                TokKind::Op(Op::AddAssign)
            }
            '+' => TokKind::Op(Op::Plus),
            '-' if eq_next => {
                self.bump();
                TokKind::Op(Op::SubAssign)
            }
            '-' if self.peek() == Some('>') => {
                self.bump();
                TokKind::Op(Op::Arrow)
            }
            '-' => TokKind::Op(Op::Minus),
            '*' if eq_next => {
                self.bump();
                TokKind::Op(Op::MulAssign)
            }
            '*' => TokKind::Op(Op::Star),
            '^' if eq_next => {
                self.bump();
                TokKind::Op(Op::PowAssign)
            }
            '^' => TokKind::Op(Op::Caret),
            '<' if eq_next => {
                self.bump();
                TokKind::Op(Op::Le)
            }
            '<' => TokKind::Op(Op::Lt),
            '>' if eq_next => {
                self.bump();
                TokKind::Op(Op::Ge)
            }
            '>' => TokKind::Op(Op::Gt),
            '=' => TokKind::Op(Op::Assign),
            '(' => {
                self.depth += 1;
                TokKind::LParen
            }
            ')' => {
                self.depth = self.depth.saturating_sub(1);
                TokKind::RParen
            }
            '[' => {
                self.depth += 1;
                TokKind::LBracket
            }
            ']' => {
                self.depth = self.depth.saturating_sub(1);
                TokKind::RBracket
            }
            ':' => TokKind::Colon,
            ',' => TokKind::Comma,
            '.' => TokKind::Dot,
            '@' => TokKind::At,
            ';' => TokKind::Semi,
            other => {
                return Err(LexError {
                    pos,
                    message: format!("illegal character `{other}`"),
                })
            }
        };
        self.push(kind, pos);
        Ok(())
    }
}

/// Tokenize a model source. Comments are stripped; positions are preserved
/// for diagnostics.
pub fn tokenize(source: &str) -> Result<Vec<Token>, LexError> {
    Lexer::new(source).run()
}
