//! Pretty-printer for expressions, core terms and program files.
//!
//! The output reparses to an alpha-equivalent term. Distinct variables that
//! share a spelling get `_N` suffixes, so no binder captures another.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use super::{DefBody, Expr, HandlerExpr, HandlerSrc, ProgramFile, SigEntry};
use crate::ast::{Binder, Comp, CompKind, Handler, Term, Value, ValueKind};
use crate::name::Name;
use crate::types::TyExpr;

const SEQ: u8 = 0;
const OPEN: u8 = 1;
const BOUNDED: u8 = 2;
const APP: u8 = 3;
const POSTFIX: u8 = 4;
const ATOM: u8 = 5;

/// Embeds a core value into the surface syntax without sugar.
pub(crate) fn value_to_expr(v: &Value) -> Expr {
    match v.kind() {
        ValueKind::Var(n) => Expr::Var(n.clone()),
        ValueKind::Unit => Expr::Unit,
        ValueKind::True => Expr::True,
        ValueKind::False => Expr::False,
        ValueKind::Lam(b, c) => Expr::Lam(b.clone(), Box::new(comp_to_expr(c))),
        ValueKind::Rec(b, v) => Expr::Rec(b.clone(), Box::new(value_to_expr(v))),
        ValueKind::Record(fs) => Expr::Record(fs.iter().map(|(l, v)| (l.clone(), value_to_expr(v))).collect()),
    }
}

/// Embeds a core computation into the surface syntax without sugar.
pub(crate) fn comp_to_expr(c: &Comp) -> Expr {
    // let-chains are converted iteratively; they can be long
    let mut spine = Vec::new();
    let mut cur = c;
    while let CompKind::Let(x, c1, c2) = cur.kind() {
        // an unused binder reads better as sequencing
        let used = c2.has_free(x);
        spine.push((used.then(|| x.clone()), comp_to_expr(c1)));
        cur = c2;
    }
    let mut out = match cur.kind() {
        CompKind::Return(v) => Expr::Return(Box::new(value_to_expr(v))),
        CompKind::Op(op, v) => Expr::Do(op.clone(), Box::new(value_to_expr(v))),
        CompKind::App(f, a) => Expr::app(value_to_expr(f), value_to_expr(a)),
        CompKind::If(v, a, b) => Expr::If(
            Box::new(value_to_expr(v)),
            Box::new(comp_to_expr(a)),
            Box::new(comp_to_expr(b)),
        ),
        CompKind::Handle(h, c) => Expr::Handle(
            Box::new(HandlerSrc::Literal(handler_to_expr(h))),
            Box::new(comp_to_expr(c)),
        ),
        CompKind::Proj(v, l) => Expr::Proj(Box::new(value_to_expr(v)), l.clone()),
        CompKind::Ascribe(c, t) => Expr::Ascribe(Box::new(comp_to_expr(c)), t.clone()),
        CompKind::Let(..) => unreachable!(),
    };
    for (x, c1) in spine.into_iter().rev() {
        out = match x {
            Some(x) => Expr::Let(x, Box::new(c1), Box::new(out)),
            None => Expr::Seq(Box::new(c1), Box::new(out)),
        };
    }
    out
}

fn handler_to_expr(h: &Handler) -> HandlerExpr {
    HandlerExpr {
        ret: (h.ret_binder().clone(), comp_to_expr(h.ret_body())),
        clauses: h
            .clauses()
            .iter()
            .map(|cl| super::OpClauseExpr {
                op: cl.op.clone(),
                param: cl.param.clone(),
                cont: cl.cont.clone(),
                body: comp_to_expr(&cl.body),
            })
            .collect(),
    }
}

pub fn print_value(v: &Value) -> String {
    print_expr(&value_to_expr(v))
}

pub fn print_comp(c: &Comp) -> String {
    print_expr(&comp_to_expr(c))
}

/// A handler literal, `{return x -> ...; op(x; k) -> ...}`.
pub fn print_handler(h: &Handler) -> String {
    let e = handler_to_expr(h);
    let mut names = BTreeSet::new();
    collect_handler_names(&e, &mut names);
    let mut p = Printer {
        out: String::new(),
        names: display_names(&names),
        aliases: &[],
        indent: 0,
    };
    p.handler(&e);
    p.out
}

pub fn print_term(t: &Term) -> String {
    print_expr(&Expr::from_term(t))
}

/// Prints a surface expression on as few lines as the layout allows.
pub fn print_expr(e: &Expr) -> String {
    let mut names = BTreeSet::new();
    collect_names(e, &mut names);
    let mut p = Printer {
        out: String::new(),
        names: display_names(&names),
        aliases: &[],
        indent: 0,
    };
    p.expr(e, SEQ);
    p.out
}

/// Prints a whole program file.
pub fn print_program(file: &ProgramFile) -> String {
    let mut names = BTreeSet::new();
    for d in &file.defs {
        names.insert(Name::new(&d.name));
        match &d.body {
            DefBody::Expr(e) => collect_names(e, &mut names),
            DefBody::Handler(h) => collect_handler_names(h, &mut names),
        }
    }
    collect_names(&file.main, &mut names);
    let mut p = Printer {
        out: String::new(),
        names: display_names(&names),
        aliases: &file.aliases,
        indent: 0,
    };
    for (i, (name, ty)) in file.aliases.iter().enumerate() {
        let _ = writeln!(p.out, "type {name} = {}", ty.display_with(&file.aliases[..i]));
    }
    if !file.aliases.is_empty() {
        p.out.push('\n');
    }
    for (kind, block) in [("st", &file.st_signature), ("atm", &file.atm_signature)] {
        if let Some(entries) = block {
            p.signature(kind, entries);
        }
    }
    for d in &file.defs {
        let shown = p.name(&Name::new(&d.name)).to_string();
        let _ = write!(p.out, "def {shown} =");
        p.indent = 1;
        p.newline();
        match &d.body {
            DefBody::Expr(e) => p.expr(e, SEQ),
            DefBody::Handler(h) => p.handler(h),
        }
        p.indent = 0;
        p.out.push_str("\n\n");
    }
    p.out.push_str("main =");
    p.indent = 1;
    p.newline();
    p.expr(&file.main, SEQ);
    p.out.push('\n');
    p.out
}

fn collect_names(e: &Expr, out: &mut BTreeSet<Name>) {
    match e {
        Expr::Var(n) => {
            out.insert(n.clone());
        }
        Expr::Unit | Expr::True | Expr::False => {}
        Expr::Lam(b, e) | Expr::Rec(b, e) => {
            out.insert(b.name.clone());
            collect_names(e, out);
        }
        Expr::Record(fs) => fs.iter().for_each(|(_, e)| collect_names(e, out)),
        Expr::Return(e) | Expr::Do(_, e) | Expr::Proj(e, _) | Expr::Ascribe(e, _) => collect_names(e, out),
        Expr::App(a, b) | Expr::Seq(a, b) => {
            collect_names(a, out);
            collect_names(b, out);
        }
        Expr::Let(x, a, b) => {
            out.insert(x.clone());
            collect_names(a, out);
            collect_names(b, out);
        }
        Expr::If(a, b, c) => {
            collect_names(a, out);
            collect_names(b, out);
            collect_names(c, out);
        }
        Expr::Handle(h, c) => {
            if let HandlerSrc::Literal(h) = h.as_ref() {
                collect_handler_names(h, out);
            }
            collect_names(c, out);
        }
        Expr::MRec(bs, c) => {
            for (b, v) in bs {
                out.insert(b.name.clone());
                collect_names(v, out);
            }
            collect_names(c, out);
        }
    }
}

fn collect_handler_names(h: &HandlerExpr, out: &mut BTreeSet<Name>) {
    out.insert(h.ret.0.clone());
    collect_names(&h.ret.1, out);
    for cl in &h.clauses {
        out.insert(cl.param.clone());
        out.insert(cl.cont.clone());
        collect_names(&cl.body, out);
    }
}

/// A spelling per distinct name: the bare base when no other name shares
/// it, otherwise `base_N` with `N` picked to clash with nothing.
fn display_names(names: &BTreeSet<Name>) -> BTreeMap<Name, String> {
    let mut by_base: BTreeMap<&str, Vec<&Name>> = BTreeMap::new();
    for n in names {
        by_base.entry(n.base()).or_default().push(n);
    }
    let mut taken: BTreeSet<String> = by_base.keys().map(|b| b.to_string()).collect();
    let mut out = BTreeMap::new();
    for (base, group) in &by_base {
        if group.len() == 1 {
            out.insert(group[0].clone(), base.to_string());
            continue;
        }
        let mut k = 1;
        for n in group {
            let shown = loop {
                let s = format!("{base}_{k}");
                k += 1;
                if !taken.contains(&s) {
                    break s;
                }
            };
            taken.insert(shown.clone());
            out.insert((*n).clone(), shown);
        }
    }
    out
}

struct Printer<'a> {
    out: String,
    names: BTreeMap<Name, String>,
    aliases: &'a [(String, TyExpr)],
    indent: usize,
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Seq(..) => SEQ,
        Expr::Lam(..) | Expr::Rec(..) | Expr::Let(..) | Expr::If(..) | Expr::Handle(..) | Expr::MRec(..) => OPEN,
        Expr::Return(_) | Expr::Do(..) => BOUNDED,
        Expr::App(..) => APP,
        Expr::Proj(..) => POSTFIX,
        Expr::Var(_) | Expr::Unit | Expr::True | Expr::False | Expr::Record(_) | Expr::Ascribe(..) => ATOM,
    }
}

impl Printer<'_> {
    fn name<'s>(&'s self, n: &'s Name) -> &'s str {
        self.names.get(n).map(String::as_str).unwrap_or_else(|| n.base())
    }

    fn newline(&mut self) {
        self.out.push('\n');
        for _ in 0..self.indent {
            self.out.push_str("  ");
        }
    }

    fn ty(&mut self, t: &TyExpr) {
        let _ = write!(self.out, "{}", t.display_with(self.aliases));
    }

    fn binder(&mut self, b: &Binder) {
        match &b.ann {
            None => self.out.push_str(&self.names.get(&b.name).cloned().unwrap_or_else(|| b.name.base().to_string())),
            Some(t) => {
                let shown = self.name(&b.name).to_string();
                let _ = write!(self.out, "({shown} : ");
                self.ty(t);
                self.out.push(')');
            }
        }
    }

    fn signature(&mut self, kind: &str, entries: &[SigEntry]) {
        let _ = writeln!(self.out, "signature {kind} {{");
        for e in entries {
            let _ = writeln!(self.out, "  effect {} : {};", e.op, e.ty.display_with(self.aliases));
        }
        self.out.push_str("}\n\n");
    }

    fn expr(&mut self, e: &Expr, min: u8) {
        if prec(e) < min {
            self.out.push('(');
            self.expr(e, SEQ);
            self.out.push(')');
            return;
        }
        match e {
            Expr::Var(n) => {
                let s = self.name(n).to_string();
                self.out.push_str(&s);
            }
            Expr::Unit => self.out.push_str("()"),
            Expr::True => self.out.push_str("true"),
            Expr::False => self.out.push_str("false"),
            Expr::Lam(b, body) => {
                self.out.push_str("fun ");
                self.binder(b);
                self.out.push_str(" -> ");
                self.expr(body, SEQ);
            }
            Expr::Rec(b, body) => {
                self.out.push_str("rec ");
                self.binder(b);
                self.out.push_str(". ");
                self.expr(body, SEQ);
            }
            Expr::Record(fs) => {
                self.out.push('{');
                for (i, (l, v)) in fs.iter().enumerate() {
                    if i > 0 {
                        self.out.push_str(", ");
                    }
                    let _ = write!(self.out, "{l} = ");
                    self.expr(v, SEQ);
                }
                self.out.push('}');
            }
            Expr::Return(v) => {
                self.out.push_str("return ");
                self.expr(v, POSTFIX);
            }
            Expr::Do(op, v) => {
                let _ = write!(self.out, "do {op} ");
                self.expr(v, POSTFIX);
            }
            Expr::App(f, a) => {
                self.expr(f, APP);
                self.out.push(' ');
                self.expr(a, POSTFIX);
            }
            Expr::If(c, t, f) => {
                self.out.push_str("if ");
                self.expr(c, SEQ);
                self.out.push_str(" then ");
                self.expr(t, SEQ);
                self.out.push_str(" else ");
                self.expr(f, SEQ);
            }
            Expr::Let(..) | Expr::Seq(..) => self.chain(e),
            Expr::Handle(h, c) => {
                self.out.push_str("with ");
                match h.as_ref() {
                    HandlerSrc::Literal(h) => self.handler(h),
                    HandlerSrc::Named(n) => {
                        let s = self.name(n).to_string();
                        self.out.push_str(&s);
                    }
                }
                self.out.push_str(" handle ");
                self.expr(c, SEQ);
            }
            Expr::Proj(v, l) => {
                self.expr(v, POSTFIX);
                let _ = write!(self.out, ".{l}");
            }
            Expr::Ascribe(c, t) => {
                self.out.push('(');
                self.expr(c, SEQ);
                self.out.push_str(" : ");
                self.ty(t);
                self.out.push(')');
            }
            Expr::MRec(bs, c) => {
                self.out.push_str("mrec ");
                for (i, (b, v)) in bs.iter().enumerate() {
                    if i > 0 {
                        self.out.push_str(" and ");
                    }
                    self.binder(b);
                    self.out.push_str(" = ");
                    self.expr(v, SEQ);
                }
                self.out.push_str(" in");
                self.newline();
                self.expr(c, SEQ);
            }
        }
    }

    /// `let` and `;` chains, printed without recursing down the spine.
    fn chain(&mut self, e: &Expr) {
        let mut cur = e;
        loop {
            match cur {
                Expr::Let(x, c1, c2) => {
                    let shown = self.name(x).to_string();
                    let _ = write!(self.out, "let {shown} = ");
                    self.expr(c1, SEQ);
                    self.out.push_str(" in");
                    self.newline();
                    cur = c2;
                }
                Expr::Seq(c1, c2) => {
                    self.expr(c1, BOUNDED);
                    self.out.push(';');
                    self.newline();
                    cur = c2;
                }
                _ => return self.expr(cur, SEQ),
            }
        }
    }

    fn handler(&mut self, h: &HandlerExpr) {
        self.indent += 1;
        let shown = self.name(&h.ret.0).to_string();
        let _ = write!(self.out, "{{return {shown} -> ");
        self.expr(&h.ret.1, SEQ);
        for cl in &h.clauses {
            self.out.push(';');
            self.newline();
            let x = self.name(&cl.param).to_string();
            let k = self.name(&cl.cont).to_string();
            let _ = write!(self.out, "{}({x}; {k}) -> ", cl.op);
            self.expr(&cl.body, SEQ);
        }
        self.out.push('}');
        self.indent -= 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::alpha_eq;
    use crate::surface::{expand_sugar, parse, parse_expr};

    fn round_trip(src: &str) {
        let e = parse_expr(src).unwrap();
        let printed = print_expr(&e);
        let again = parse_expr(&printed).unwrap_or_else(|err| panic!("{printed}\n{err}"));
        let a = expand_sugar(&e).unwrap();
        let b = expand_sugar(&again).unwrap();
        assert!(alpha_eq(&a, &b), "{src}\n=> {printed}");
    }

    #[test]
    fn return_true_prints_plainly() {
        assert_eq!(print_expr(&parse_expr("return true").unwrap()), "return true");
    }

    #[test]
    fn precedence_round_trips() {
        for src in [
            "(fun x -> x); ()",
            "f (return x)",
            "(return f) x",
            "return (fun x -> x)",
            "(if b then x else y) z",
            "let x = (do get ()).fst in x",
            "with {return x -> x; o(y; k) -> k y; k y} handle do o (); ()",
            "({a = (), b = true}.a : Unit)",
            "mrec f = fun x -> g x and g = fun y -> f y in f ()",
            "fun (p : (Bool -> Bool) -> Unit / Unit/pure => Bool/pure) -> p",
        ] {
            round_trip(src);
        }
    }

    #[test]
    fn distinct_names_with_one_spelling_are_kept_apart() {
        let x1 = Name::with_id("x", 1);
        let x2 = Name::with_id("x", 2);
        let v = Value::lam(
            Binder::new(x1.clone()),
            Comp::ret(Value::lam(Binder::new(x2), Comp::ret(Value::var(x1)))),
        );
        let s = print_value(&v);
        assert_eq!(s, "fun x_1 -> return (fun x_2 -> return x_1)");
        let back = expand_sugar(&parse_expr(&s).unwrap()).unwrap();
        assert!(alpha_eq(&back, &Term::Value(v)));
    }

    #[test]
    fn program_round_trips() {
        let src = "type S = Unit -> Unit\n\
                   signature st { effect set : S -> Unit; effect get : Unit -> S; }\n\
                   def h = {return x -> fun s -> x; set(x; k) -> fun s -> k () x; get(x; k) -> fun s -> k s s}\n\
                   main = (with h handle do set (fun z -> ()); (do get ()) ()) (fun y -> ())";
        let f = parse(src).unwrap();
        let printed = print_program(&f);
        let g = parse(&printed).unwrap_or_else(|e| panic!("{printed}\n{e}"));
        assert!(alpha_eq(&Term::Comp(f.program().unwrap()), &Term::Comp(g.program().unwrap())));
        assert!(printed.contains("effect set : S -> Unit;"), "{printed}");
    }
}
