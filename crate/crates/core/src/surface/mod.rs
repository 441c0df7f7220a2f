//! Concrete syntax: surface expressions with sugar, program files, parsing,
//! printing and sugar expansion into core terms.

mod expand;
mod lexer;
mod parser;
mod printer;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::ast::{Binder, Comp, Term};
use crate::name::{Label, Name, OpName};
use crate::types::{AtmOpSig, Signature, TyExpr};

pub use expand::{expand_sugar, ExpandError};
pub use lexer::{lex, Spanned, Tok, KEYWORDS};
pub use parser::{parse, parse_expr, parse_type};
pub use printer::{print_comp, print_expr, print_handler, print_program, print_term, print_value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, col: usize, message: impl Into<String>) -> ParseError {
        ParseError {
            line,
            col,
            message: message.into(),
        }
    }
}

/// Surface expressions. Values and computations are not separated here;
/// [`expand_sugar`] inserts the `return`s and `let`s that the core needs.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Expr {
    Var(Name),
    Unit,
    True,
    False,
    Lam(Binder, Box<Expr>),
    Rec(Binder, Box<Expr>),
    Record(Vec<(Label, Expr)>),
    Return(Box<Expr>),
    Do(OpName, Box<Expr>),
    App(Box<Expr>, Box<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    Let(Name, Box<Expr>, Box<Expr>),
    Seq(Box<Expr>, Box<Expr>),
    Handle(Box<HandlerSrc>, Box<Expr>),
    Proj(Box<Expr>, Label),
    Ascribe(Box<Expr>, TyExpr),
    MRec(Vec<(Binder, Expr)>, Box<Expr>),
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct HandlerExpr {
    pub ret: (Name, Expr),
    pub clauses: Vec<OpClauseExpr>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct OpClauseExpr {
    pub op: OpName,
    pub param: Name,
    pub cont: Name,
    pub body: Expr,
}

/// The handler of a `with`-block: written inline or named by a `def`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum HandlerSrc {
    Literal(HandlerExpr),
    Named(Name),
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum DefBody {
    Expr(Expr),
    Handler(HandlerExpr),
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Def {
    pub name: String,
    pub body: DefBody,
}

/// One `effect op : T` line of a signature block; `ty` is the full arrow.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SigEntry {
    pub op: OpName,
    pub ty: TyExpr,
}

/// A parsed `.feh` file.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ProgramFile {
    pub st_signature: Option<Vec<SigEntry>>,
    pub atm_signature: Option<Vec<SigEntry>>,
    pub aliases: Vec<(String, TyExpr)>,
    pub defs: Vec<Def>,
    pub main: Expr,
}

impl ProgramFile {
    /// The operation types declared by the file's signature blocks.
    pub fn signature(&self) -> Signature {
        let mut sig = Signature::new();
        for e in self.st_signature.iter().flatten() {
            if let TyExpr::Arrow(a, b) = &e.ty {
                if let (Ok(a), Ok(b)) = (a.to_simple(), b.to_simple()) {
                    sig.st.insert(e.op.clone(), (a, b));
                }
            }
        }
        for e in self.atm_signature.iter().flatten() {
            if let Some(entry) = atm_entry(&e.ty) {
                sig.atm.insert(e.op.clone(), entry);
            }
        }
        sig
    }

    /// The closed, alpha-normalized core program.
    pub fn program(&self) -> Result<Comp, ExpandError> {
        expand::expand_program(self)
    }

    /// Replaces (or appends) a value definition.
    pub fn with_def(&self, name: &str, body: Expr) -> ProgramFile {
        let mut out = self.clone();
        match out.defs.iter_mut().find(|d| d.name == name) {
            Some(d) => d.body = DefBody::Expr(body),
            None => out.defs.push(Def {
                name: name.to_string(),
                body: DefBody::Expr(body),
            }),
        }
        out
    }

    pub fn print(&self) -> String {
        print_program(self)
    }

    /// Operations invoked anywhere in the file.
    pub fn invoked_ops(&self) -> BTreeSet<OpName> {
        let mut out = BTreeSet::new();
        for d in &self.defs {
            match &d.body {
                DefBody::Expr(e) => e.collect_ops(&mut out),
                DefBody::Handler(h) => h.collect_ops(&mut out),
            }
        }
        self.main.collect_ops(&mut out);
        out
    }
}

pub(crate) fn atm_entry(ty: &TyExpr) -> Option<AtmOpSig> {
    let TyExpr::Arrow(a, b) = ty else { return None };
    let TyExpr::Eff(t, r1, r2) = b.as_ref() else { return None };
    Some(AtmOpSig {
        arg: a.to_value_type().ok()?,
        result: t.to_value_type().ok()?,
        answer_in: r1.to_comp_type().ok()?,
        answer_out: r2.to_comp_type().ok()?,
    })
}

impl Expr {
    pub fn var(s: &str) -> Expr {
        Expr::Var(Name::new(s))
    }

    pub fn app(f: Expr, a: Expr) -> Expr {
        Expr::App(Box::new(f), Box::new(a))
    }

    pub fn bool(b: bool) -> Expr {
        if b {
            Expr::True
        } else {
            Expr::False
        }
    }

    /// Embeds a core term; the embedding uses no sugar, so expanding it
    /// gives the term back.
    pub fn from_term(t: &Term) -> Expr {
        match t {
            Term::Value(v) => printer::value_to_expr(v),
            Term::Comp(c) => printer::comp_to_expr(c),
        }
    }

    fn collect_ops(&self, out: &mut BTreeSet<OpName>) {
        match self {
            Expr::Var(_) | Expr::Unit | Expr::True | Expr::False => {}
            Expr::Lam(_, e) | Expr::Rec(_, e) | Expr::Return(e) | Expr::Proj(e, _) | Expr::Ascribe(e, _) => {
                e.collect_ops(out)
            }
            Expr::Record(fs) => fs.iter().for_each(|(_, e)| e.collect_ops(out)),
            Expr::Do(op, e) => {
                out.insert(op.clone());
                e.collect_ops(out);
            }
            Expr::App(a, b) | Expr::Let(_, a, b) | Expr::Seq(a, b) => {
                a.collect_ops(out);
                b.collect_ops(out);
            }
            Expr::If(a, b, c) => {
                a.collect_ops(out);
                b.collect_ops(out);
                c.collect_ops(out);
            }
            Expr::Handle(h, e) => {
                if let HandlerSrc::Literal(h) = h.as_ref() {
                    h.collect_ops(out);
                }
                e.collect_ops(out);
            }
            Expr::MRec(bs, e) => {
                bs.iter().for_each(|(_, v)| v.collect_ops(out));
                e.collect_ops(out);
            }
        }
    }
}

impl HandlerExpr {
    fn collect_ops(&self, out: &mut BTreeSet<OpName>) {
        self.ret.1.collect_ops(out);
        for cl in &self.clauses {
            out.insert(cl.op.clone());
            cl.body.collect_ops(out);
        }
    }
}

/// Parses a program file and returns its core program together with the
/// file.
pub fn load_program(text: &str) -> Result<(ProgramFile, Comp), String> {
    let file = parse(text).map_err(|e| e.to_string())?;
    let prog = file.program().map_err(|e| e.to_string())?;
    Ok((file, prog))
}
