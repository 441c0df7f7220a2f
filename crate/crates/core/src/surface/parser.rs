//! Recursive-descent parser for `.feh` files, expressions and types.

use std::collections::{BTreeSet, HashMap};

use super::lexer::{lex, Spanned, Tok};
use super::{atm_entry, Def, DefBody, Expr, HandlerExpr, HandlerSrc, OpClauseExpr, ParseError, ProgramFile, SigEntry};
use crate::ast::Binder;
use crate::name::{Label, Name};
use crate::types::TyExpr;

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    aliases: HashMap<String, TyExpr>,
    handler_defs: BTreeSet<String>,
    /// every `do op` and handler clause, for the signature check
    op_uses: Vec<(Label, usize, usize)>,
}

type PResult<T> = Result<T, ParseError>;

/// Parses a complete program file.
pub fn parse(text: &str) -> Result<ProgramFile, ParseError> {
    let mut p = Parser::new(text)?;
    p.file()
}

/// Parses a single expression (open terms allowed, no definitions).
pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(text)?;
    let e = p.expr()?;
    p.expect(&Tok::Eof)?;
    Ok(e)
}

/// Parses a single type.
pub fn parse_type(text: &str) -> Result<TyExpr, ParseError> {
    let mut p = Parser::new(text)?;
    let t = p.ty()?;
    p.expect(&Tok::Eof)?;
    Ok(t)
}

impl Parser {
    fn new(text: &str) -> PResult<Parser> {
        Ok(Parser {
            toks: lex(text)?,
            pos: 0,
            aliases: HashMap::new(),
            handler_defs: BTreeSet::new(),
            op_uses: Vec::new(),
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let (l, c) = self.here();
        Err(ParseError::new(l, c, msg))
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok) -> PResult<()> {
        if self.eat(t) {
            Ok(())
        } else {
            self.err(format!("expected {t}, found {}", self.peek()))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            t => self.err(format!("expected identifier, found {t}")),
        }
    }

    // -----------------------------------------------------------------------
    // files

    fn file(&mut self) -> PResult<ProgramFile> {
        let mut st = None;
        let mut atm = None;
        let mut aliases = Vec::new();
        let mut defs: Vec<Def> = Vec::new();
        let mut main = None;
        loop {
            let (line, col) = self.here();
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Signature => {
                    self.bump();
                    let kind = self.ident()?;
                    let entries = self.signature_block(&kind)?;
                    let slot = match kind.as_str() {
                        "st" => &mut st,
                        "atm" => &mut atm,
                        _ => return Err(ParseError::new(line, col, format!("unknown signature kind `{kind}`"))),
                    };
                    if slot.is_some() {
                        return Err(ParseError::new(line, col, format!("duplicate `signature {kind}` block")));
                    }
                    *slot = Some(entries);
                }
                Tok::Type => {
                    self.bump();
                    let name = self.ident()?;
                    if name == "Unit" || name == "Bool" || name == "pure" || self.aliases.contains_key(&name) {
                        return Err(ParseError::new(line, col, format!("cannot redefine type `{name}`")));
                    }
                    self.expect(&Tok::Eq)?;
                    let t = self.ty()?;
                    self.aliases.insert(name.clone(), t.clone());
                    aliases.push((name, t));
                }
                Tok::Def => {
                    self.bump();
                    let name = self.ident()?;
                    if defs.iter().any(|d| d.name == name) {
                        return Err(ParseError::new(line, col, format!("duplicate definition `{name}`")));
                    }
                    self.expect(&Tok::Eq)?;
                    let body = if self.peek() == &Tok::LBrace && self.peek_at(1) == &Tok::Return {
                        self.handler_defs.insert(name.clone());
                        DefBody::Handler(self.handler_literal()?)
                    } else {
                        DefBody::Expr(self.expr()?)
                    };
                    defs.push(Def { name, body });
                }
                Tok::Main => {
                    if main.is_some() {
                        return self.err("duplicate `main`");
                    }
                    self.bump();
                    self.expect(&Tok::Eq)?;
                    main = Some(self.expr()?);
                }
                t => return self.err(format!("expected `signature`, `type`, `def` or `main`, found {t}")),
            }
        }
        let Some(main) = main else {
            return self.err("missing `main`");
        };
        for (op, line, col) in &self.op_uses {
            let known = |b: &Option<Vec<SigEntry>>| b.iter().flatten().any(|e| &e.op == op);
            if !known(&st) && !known(&atm) {
                return Err(ParseError::new(*line, *col, format!("unknown operation `{op}`: no signature entry")));
            }
        }
        Ok(ProgramFile {
            st_signature: st,
            atm_signature: atm,
            aliases,
            defs,
            main,
        })
    }

    fn signature_block(&mut self, kind: &str) -> PResult<Vec<SigEntry>> {
        self.expect(&Tok::LBrace)?;
        let mut entries: Vec<SigEntry> = Vec::new();
        while self.eat(&Tok::Effect) {
            let (line, col) = self.here();
            let op = Label::new(&self.ident()?);
            self.expect(&Tok::Colon)?;
            let ty = self.ty()?;
            self.expect(&Tok::Semi)?;
            if entries.iter().any(|e| e.op == op) {
                return Err(ParseError::new(line, col, format!("duplicate signature entry for `{op}`")));
            }
            let ok = match kind {
                "st" => matches!(&ty, TyExpr::Arrow(a, b) if a.to_simple().is_ok() && b.to_simple().is_ok() && !b.is_computation()),
                _ => atm_entry(&ty).is_some(),
            };
            if !ok {
                let want = if kind == "st" { "S -> S'" } else { "T -> T' / R1 => R2" };
                return Err(ParseError::new(line, col, format!("operation `{op}` must have a type of the form {want}")));
            }
            entries.push(SigEntry { op, ty });
        }
        self.expect(&Tok::RBrace)?;
        Ok(entries)
    }

    // -----------------------------------------------------------------------
    // types
    //
    //   ty     := slash ('->' ty)?
    //   slash  := atom ('/' ('pure' | answer '=>' answer))?
    //   answer := atom ('/' 'pure')?
    //   atom   := Unit | Bool | Alias | '{' (l ':' ty),* '}' | '(' ty ')'

    fn ty(&mut self) -> PResult<TyExpr> {
        let lhs = self.ty_slash()?;
        if self.eat(&Tok::Arrow) {
            let rhs = self.ty()?;
            Ok(TyExpr::arrow(lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn ty_slash(&mut self) -> PResult<TyExpr> {
        let t = self.ty_atom()?;
        if !self.eat(&Tok::Slash) {
            return Ok(t);
        }
        if self.peek() == &Tok::Ident("pure".into()) {
            self.bump();
            return Ok(TyExpr::Pure(Box::new(t)));
        }
        let a = self.ty_answer()?;
        self.expect(&Tok::FatArrow)?;
        let b = self.ty_answer()?;
        Ok(TyExpr::Eff(Box::new(t), Box::new(a), Box::new(b)))
    }

    fn ty_answer(&mut self) -> PResult<TyExpr> {
        let t = self.ty_atom()?;
        if self.eat(&Tok::Slash) {
            if self.peek() == &Tok::Ident("pure".into()) {
                self.bump();
                return Ok(TyExpr::Pure(Box::new(t)));
            }
            return self.err("effectful answer types must be parenthesized");
        }
        if t.is_computation() {
            Ok(t)
        } else {
            self.err("answer type must be a computation type (`T/pure` or a parenthesized `T / R => R'`)")
        }
    }

    fn ty_atom(&mut self) -> PResult<TyExpr> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                match s.as_str() {
                    "Unit" => Ok(TyExpr::Unit),
                    "Bool" => Ok(TyExpr::Bool),
                    _ => match self.aliases.get(&s) {
                        Some(t) => Ok(t.clone()),
                        None => {
                            self.pos -= 1;
                            self.err(format!("unknown type `{s}`"))
                        }
                    },
                }
            }
            Tok::LParen => {
                self.bump();
                let t = self.ty()?;
                self.expect(&Tok::RParen)?;
                Ok(t)
            }
            Tok::LBrace => {
                self.bump();
                let mut fields: Vec<(Label, TyExpr)> = Vec::new();
                if !self.eat(&Tok::RBrace) {
                    loop {
                        let (line, col) = self.here();
                        let l = Label::new(&self.ident()?);
                        if fields.iter().any(|(m, _)| m == &l) {
                            return Err(ParseError::new(line, col, format!("duplicate label `{l}` in record type")));
                        }
                        self.expect(&Tok::Colon)?;
                        fields.push((l, self.ty()?));
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                    }
                    self.expect(&Tok::RBrace)?;
                }
                Ok(TyExpr::Record(fields))
            }
            t => self.err(format!("expected a type, found {t}")),
        }
    }

    // -----------------------------------------------------------------------
    // expressions
    //
    //   expr    := open (';' expr)?
    //   open    := fun b -> expr | rec b. expr | let x = expr in expr
    //            | if expr then expr else expr | with h handle expr
    //            | mrec b = expr (and b = expr)* in expr | app
    //   app     := return postfix | do op postfix | postfix postfix*
    //   postfix := atom ('.' label)*
    //   atom    := x | () | true | false | '(' expr (':' ty)? ')' | '{' (l = expr),* '}'

    fn expr(&mut self) -> PResult<Expr> {
        let lhs = self.open()?;
        if self.peek() == &Tok::Semi && !self.clause_follows_semi() {
            self.bump();
            let rhs = self.expr()?;
            return Ok(Expr::Seq(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    /// After `;` inside a handler literal: does a new clause start?
    fn clause_follows_semi(&self) -> bool {
        matches!(
            (self.peek_at(1), self.peek_at(2), self.peek_at(3)),
            (Tok::Return, Tok::Ident(_), Tok::Arrow)
        ) || matches!(
            (self.peek_at(1), self.peek_at(2), self.peek_at(3), self.peek_at(4), self.peek_at(5), self.peek_at(6), self.peek_at(7)),
            (Tok::Ident(_), Tok::LParen, Tok::Ident(_), Tok::Semi, Tok::Ident(_), Tok::RParen, Tok::Arrow)
        )
    }

    fn binder(&mut self) -> PResult<Binder> {
        if self.eat(&Tok::LParen) {
            let x = self.ident()?;
            self.expect(&Tok::Colon)?;
            let t = self.ty()?;
            self.expect(&Tok::RParen)?;
            Ok(Binder::annotated(Name::new(&x), t))
        } else {
            Ok(Binder::new(Name::new(&self.ident()?)))
        }
    }

    fn open(&mut self) -> PResult<Expr> {
        match self.peek() {
            Tok::Fun => {
                self.bump();
                let b = self.binder()?;
                self.expect(&Tok::Arrow)?;
                let body = self.expr()?;
                Ok(Expr::Lam(b, Box::new(body)))
            }
            Tok::Rec => {
                self.bump();
                let b = self.binder()?;
                self.expect(&Tok::Dot)?;
                let at = self.here();
                let body = self.expr()?;
                if !syntactic_value(&body) {
                    return Err(ParseError::new(at.0, at.1, "body of `rec` must be a value"));
                }
                Ok(Expr::Rec(b, Box::new(body)))
            }
            Tok::Let => {
                self.bump();
                let x = self.ident()?;
                self.expect(&Tok::Eq)?;
                let c1 = self.expr()?;
                self.expect(&Tok::In)?;
                let c2 = self.expr()?;
                Ok(Expr::Let(Name::new(&x), Box::new(c1), Box::new(c2)))
            }
            Tok::If => {
                self.bump();
                let c = self.expr()?;
                self.expect(&Tok::Then)?;
                let t = self.expr()?;
                self.expect(&Tok::Else)?;
                let e = self.expr()?;
                Ok(Expr::If(Box::new(c), Box::new(t), Box::new(e)))
            }
            Tok::With => {
                self.bump();
                let h = if self.peek() == &Tok::LBrace {
                    HandlerSrc::Literal(self.handler_literal()?)
                } else {
                    let at = self.here();
                    let n = self.ident()?;
                    if !self.handler_defs.contains(&n) {
                        return Err(ParseError::new(at.0, at.1, format!("`{n}` is not a handler definition")));
                    }
                    HandlerSrc::Named(Name::new(&n))
                };
                self.expect(&Tok::Handle)?;
                let c = self.expr()?;
                Ok(Expr::Handle(Box::new(h), Box::new(c)))
            }
            Tok::Mrec => {
                self.bump();
                let mut binds = Vec::new();
                loop {
                    let at = self.here();
                    let b = self.binder()?;
                    if binds.iter().any(|(x, _): &(Binder, Expr)| x.name == b.name) {
                        return Err(ParseError::new(at.0, at.1, format!("`{}` bound twice in `mrec`", b.name)));
                    }
                    self.expect(&Tok::Eq)?;
                    let at = self.here();
                    let v = self.expr()?;
                    if !syntactic_value(&v) {
                        return Err(ParseError::new(at.0, at.1, "`mrec` bindings must be values"));
                    }
                    binds.push((b, v));
                    if !self.eat(&Tok::And) {
                        break;
                    }
                }
                self.expect(&Tok::In)?;
                let c = self.expr()?;
                Ok(Expr::MRec(binds, Box::new(c)))
            }
            _ => self.app(),
        }
    }

    fn handler_literal(&mut self) -> PResult<HandlerExpr> {
        self.expect(&Tok::LBrace)?;
        let mut ret = None;
        let mut clauses: Vec<OpClauseExpr> = Vec::new();
        loop {
            let (line, col) = self.here();
            if self.eat(&Tok::Return) {
                if ret.is_some() {
                    return Err(ParseError::new(line, col, "handler has two return clauses"));
                }
                let x = self.ident()?;
                self.expect(&Tok::Arrow)?;
                let body = self.expr()?;
                ret = Some((Name::new(&x), body));
            } else {
                let op = Label::new(&self.ident()?);
                self.expect(&Tok::LParen)?;
                let x = self.ident()?;
                self.expect(&Tok::Semi)?;
                let k = self.ident()?;
                self.expect(&Tok::RParen)?;
                if x == k {
                    return Err(ParseError::new(line, col, "operation parameter and continuation must differ"));
                }
                self.expect(&Tok::Arrow)?;
                let body = self.expr()?;
                if clauses.iter().any(|c| c.op == op) {
                    return Err(ParseError::new(line, col, format!("duplicate clause for operation `{op}`")));
                }
                self.op_uses.push((op.clone(), line, col));
                clauses.push(OpClauseExpr {
                    op,
                    param: Name::new(&x),
                    cont: Name::new(&k),
                    body,
                });
            }
            if !self.eat(&Tok::Semi) {
                break;
            }
        }
        self.expect(&Tok::RBrace)?;
        let Some(ret) = ret else {
            return self.err("handler has no return clause");
        };
        Ok(HandlerExpr { ret, clauses })
    }

    fn app(&mut self) -> PResult<Expr> {
        match self.peek() {
            Tok::Return => {
                self.bump();
                let e = self.postfix()?;
                Ok(Expr::Return(Box::new(e)))
            }
            Tok::Do => {
                self.bump();
                let (line, col) = self.here();
                let op = Label::new(&self.ident()?);
                self.op_uses.push((op.clone(), line, col));
                let e = self.postfix()?;
                Ok(Expr::Do(op, Box::new(e)))
            }
            _ => {
                let mut e = self.postfix()?;
                while starts_atom(self.peek()) {
                    let a = self.postfix()?;
                    e = Expr::app(e, a);
                }
                Ok(e)
            }
        }
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.atom()?;
        while self.eat(&Tok::Dot) {
            let l = Label::new(&self.ident()?);
            e = Expr::Proj(Box::new(e), l);
        }
        Ok(e)
    }

    fn atom(&mut self) -> PResult<Expr> {
        let (line, col) = self.here();
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                if self.handler_defs.contains(&s) {
                    return Err(ParseError::new(line, col, format!("`{s}` names a handler; use it as `with {s} handle ...`")));
                }
                Ok(Expr::Var(Name::new(&s)))
            }
            Tok::True => {
                self.bump();
                Ok(Expr::True)
            }
            Tok::False => {
                self.bump();
                Ok(Expr::False)
            }
            Tok::LParen => {
                self.bump();
                if self.eat(&Tok::RParen) {
                    return Ok(Expr::Unit);
                }
                let e = self.expr()?;
                if self.eat(&Tok::Colon) {
                    let t = self.ty()?;
                    self.expect(&Tok::RParen)?;
                    return Ok(Expr::Ascribe(Box::new(e), t));
                }
                self.expect(&Tok::RParen)?;
                Ok(e)
            }
            Tok::LBrace => {
                self.bump();
                if self.peek() == &Tok::Return {
                    return Err(ParseError::new(line, col, "handler literal is only allowed after `with`"));
                }
                let mut fields: Vec<(Label, Expr)> = Vec::new();
                if !self.eat(&Tok::RBrace) {
                    loop {
                        let (line, col) = self.here();
                        let l = Label::new(&self.ident()?);
                        if fields.iter().any(|(m, _)| m == &l) {
                            return Err(ParseError::new(line, col, format!("duplicate label `{l}` in record")));
                        }
                        self.expect(&Tok::Eq)?;
                        fields.push((l, self.expr()?));
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                    }
                    self.expect(&Tok::RBrace)?;
                }
                Ok(Expr::Record(fields))
            }
            t => self.err(format!("expected an expression, found {t}")),
        }
    }
}

fn starts_atom(t: &Tok) -> bool {
    matches!(t, Tok::Ident(_) | Tok::True | Tok::False | Tok::LParen | Tok::LBrace)
}

/// Value syntax as far as the parser can tell (identifiers count as values).
fn syntactic_value(e: &Expr) -> bool {
    match e {
        Expr::Var(_) | Expr::Unit | Expr::True | Expr::False | Expr::Lam(..) | Expr::Rec(..) => true,
        Expr::Record(fs) => fs.iter().all(|(_, e)| syntactic_value(e)),
        Expr::MRec(_, body) => syntactic_value(body),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_return_true() {
        assert_eq!(parse_expr("return true").unwrap(), Expr::Return(Box::new(Expr::True)));
    }

    #[test]
    fn handler_with_one_op_clause() {
        let e = parse_expr("with {return x -> x; dec(x; k) -> or (k true) (k false)} handle do dec ()").unwrap();
        let Expr::Handle(h, _) = e else { panic!() };
        let HandlerSrc::Literal(h) = *h else { panic!() };
        assert_eq!(h.clauses.len(), 1);
        assert_eq!(h.clauses[0].op.as_str(), "dec");
    }

    #[test]
    fn sequencing_inside_clause_bodies() {
        let e = parse_expr("with {return x -> x; op(x; k) -> k x; true} handle do op (); ()").unwrap();
        let Expr::Handle(h, body) = e else { panic!() };
        let HandlerSrc::Literal(h) = *h else { panic!() };
        assert!(matches!(h.clauses[0].body, Expr::Seq(..)));
        assert!(matches!(*body, Expr::Seq(..)));
    }

    #[test]
    fn unknown_operation_is_an_error() {
        let err = parse("main = do nope ()").unwrap_err();
        assert!(err.message.contains("unknown operation"), "{err}");
        assert_eq!((err.line, err.col), (1, 11));
    }

    #[test]
    fn duplicate_record_label_is_an_error() {
        assert!(parse_expr("{a = (), a = ()}").unwrap_err().message.contains("duplicate label"));
    }

    #[test]
    fn duplicate_handler_clause_is_an_error() {
        let err = parse_expr("with {return x -> x; o(x; k) -> x; o(y; k) -> y} handle ()").unwrap_err();
        assert!(err.message.contains("duplicate clause"));
    }

    #[test]
    fn type_grammar() {
        let t = parse_type("Unit -> Bool / Bool/pure => (Unit / pure)").unwrap();
        assert_eq!(t.to_string(), "Unit -> Bool / Bool/pure => Unit/pure");
        let t = parse_type("(Unit -> Unit) -> Bool / pure").unwrap();
        assert!(matches!(t, TyExpr::Arrow(..)));
    }

    #[test]
    fn errors_carry_positions() {
        let err = parse("main =\n  let x = in x").unwrap_err();
        assert_eq!((err.line, err.col), (2, 11));
    }

    #[test]
    fn aliases_resolve() {
        let f = parse("type T = Unit -> Unit\nsignature st { effect o : T -> Unit; }\nmain = do o (fun (x : T) -> ())").unwrap();
        assert_eq!(f.aliases.len(), 1);
        assert!(f.signature().st.contains_key(&Label::new("o")));
    }
}
