//! Sugar expansion: surface expressions to core terms.

use std::collections::HashMap;

use thiserror::Error;

use super::{DefBody, Expr, HandlerExpr, HandlerSrc, ProgramFile};
use crate::ast::{alpha_normalize, max_id, AstError, Binder, Comp, Handler, OpClause, Term, Value};
use crate::name::{Name, NameSupply};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExpandError {
    #[error("body of `rec {0}` is not a value")]
    RecBodyNotValue(String),
    #[error("`{0}` names a handler and cannot be used as an expression")]
    HandlerAsExpr(String),
    #[error("`{0}` is not a handler definition")]
    NotAHandler(String),
    #[error("program has free variables: {0}")]
    FreeVariables(String),
    #[error(transparent)]
    Ast(#[from] AstError),
}

#[derive(Clone)]
enum DefTerm {
    Term(Term),
    Handler(Handler),
}

type Build<'k, S> = dyn FnMut(&mut S, Vec<Value>) -> Result<Comp, ExpandError> + 'k;

struct Expander<'a> {
    supply: NameSupply,
    defs: &'a HashMap<String, DefTerm>,
    bound: Vec<Name>,
}

/// Expands sugar without any definitions in scope. Core constructors map to
/// themselves, so sugar-free input comes back unchanged; fresh names are
/// tagged above every tag in the input.
pub fn expand_sugar(e: &Expr) -> Result<Term, ExpandError> {
    let defs = HashMap::new();
    let mut ex = Expander {
        supply: NameSupply::above(max_id_expr(e)),
        defs: &defs,
        bound: Vec::new(),
    };
    ex.term(e)
}

pub(super) fn expand_program(file: &ProgramFile) -> Result<Comp, ExpandError> {
    let mut max = max_id_expr(&file.main);
    for d in &file.defs {
        if let DefBody::Expr(e) = &d.body {
            max = max.max(max_id_expr(e));
        }
    }
    let mut defs: HashMap<String, DefTerm> = HashMap::new();
    let mut supply = NameSupply::above(max);
    for d in &file.defs {
        let mut ex = Expander {
            supply,
            defs: &defs,
            bound: Vec::new(),
        };
        let t = match &d.body {
            DefBody::Expr(e) => DefTerm::Term(ex.term(e)?),
            DefBody::Handler(h) => DefTerm::Handler(ex.handler(h)?),
        };
        supply = ex.supply;
        defs.insert(d.name.clone(), t);
    }
    let mut ex = Expander {
        supply,
        defs: &defs,
        bound: Vec::new(),
    };
    let main = ex.comp(&file.main)?;
    let free = main.free_vars();
    if !free.is_empty() {
        let names: Vec<String> = free.iter().map(|n| n.base().to_string()).collect();
        return Err(ExpandError::FreeVariables(names.join(", ")));
    }
    match alpha_normalize(&Term::Comp(main)) {
        Term::Comp(c) => Ok(c),
        Term::Value(_) => unreachable!(),
    }
}

pub(crate) fn max_id_expr(e: &Expr) -> u32 {
    fn b(x: &Binder) -> u32 {
        x.name.id()
    }
    match e {
        Expr::Var(n) => n.id(),
        Expr::Unit | Expr::True | Expr::False => 0,
        Expr::Lam(x, e) | Expr::Rec(x, e) => b(x).max(max_id_expr(e)),
        Expr::Record(fs) => fs.iter().map(|(_, e)| max_id_expr(e)).max().unwrap_or(0),
        Expr::Return(e) | Expr::Do(_, e) | Expr::Proj(e, _) | Expr::Ascribe(e, _) => max_id_expr(e),
        Expr::App(a, c) | Expr::Seq(a, c) => max_id_expr(a).max(max_id_expr(c)),
        Expr::Let(x, a, c) => x.id().max(max_id_expr(a)).max(max_id_expr(c)),
        Expr::If(a, c, d) => max_id_expr(a).max(max_id_expr(c)).max(max_id_expr(d)),
        Expr::Handle(h, c) => {
            let hm = match h.as_ref() {
                HandlerSrc::Literal(h) => h
                    .clauses
                    .iter()
                    .map(|cl| cl.param.id().max(cl.cont.id()).max(max_id_expr(&cl.body)))
                    .fold(h.ret.0.id().max(max_id_expr(&h.ret.1)), u32::max),
                HandlerSrc::Named(_) => 0,
            };
            hm.max(max_id_expr(c))
        }
        Expr::MRec(bs, c) => bs
            .iter()
            .map(|(x, v)| b(x).max(max_id_expr(v)))
            .fold(max_id_expr(c), u32::max),
    }
}

impl Expander<'_> {
    fn def(&self, n: &Name) -> Option<&DefTerm> {
        if n.id() != 0 || self.bound.contains(n) {
            return None;
        }
        self.defs.get(n.base())
    }

    fn is_value(&self, e: &Expr) -> bool {
        match e {
            Expr::Var(n) => match self.def(n) {
                Some(DefTerm::Term(t)) => matches!(t, Term::Value(_)),
                Some(DefTerm::Handler(_)) => false,
                None => true,
            },
            Expr::Unit | Expr::True | Expr::False | Expr::Lam(..) | Expr::Rec(..) => true,
            Expr::Record(fs) => fs.iter().all(|(_, e)| self.is_value(e)),
            Expr::MRec(_, body) => self.is_value(body),
            _ => false,
        }
    }

    fn term(&mut self, e: &Expr) -> Result<Term, ExpandError> {
        if self.is_value(e) {
            Ok(Term::Value(self.value(e)?))
        } else {
            Ok(Term::Comp(self.comp(e)?))
        }
    }

    fn scoped<T>(&mut self, names: &[&Name], f: impl FnOnce(&mut Self) -> T) -> T {
        let depth = self.bound.len();
        self.bound.extend(names.iter().map(|n| (*n).clone()));
        let r = f(self);
        self.bound.truncate(depth);
        r
    }

    /// Expansion of an expression known to be value syntax.
    fn value(&mut self, e: &Expr) -> Result<Value, ExpandError> {
        Ok(match e {
            Expr::Var(n) => match self.def(n) {
                Some(DefTerm::Term(Term::Value(v))) => v.clone(),
                Some(_) => unreachable!("checked by is_value"),
                None => Value::var(n.clone()),
            },
            Expr::Unit => Value::unit(),
            Expr::True => Value::bool(true),
            Expr::False => Value::bool(false),
            Expr::Lam(b, body) => {
                let body = self.scoped(&[&b.name], |s| s.comp(body))?;
                Value::lam(b.clone(), body)
            }
            Expr::Rec(b, body) => {
                let body = self.scoped(&[&b.name], |s| {
                    if s.is_value(body) {
                        s.value(body)
                    } else {
                        Err(ExpandError::RecBodyNotValue(b.name.base().to_string()))
                    }
                })?;
                Value::rec(b.clone(), body)
            }
            Expr::Record(fs) => {
                let mut out = Vec::with_capacity(fs.len());
                for (l, e) in fs {
                    out.push((l.clone(), self.value(e)?));
                }
                Value::record(out)?
            }
            Expr::MRec(binds, body) => self.mrec_value(binds, body)?,
            _ => unreachable!("checked by is_value"),
        })
    }

    /// `mrec f1 = v1 and ... in v` in value position: `v` with every `fi`
    /// replaced by `rec fi. (mrec <the others> in vi)`.
    fn mrec_value(&mut self, binds: &[(Binder, Expr)], body: &Expr) -> Result<Value, ExpandError> {
        let names: Vec<&Name> = binds.iter().map(|(b, _)| &b.name).collect();
        let mut v = self.scoped(&names, |s| {
            if s.is_value(body) {
                s.value(body)
            } else {
                Err(ExpandError::RecBodyNotValue(names[0].base().to_string()))
            }
        })?;
        for i in 0..binds.len() {
            let ri = self.mrec_component(binds, i)?;
            v = v.subst(&binds[i].0.name, &ri);
        }
        // substitution may have renamed binders with fresh tags
        self.supply.ensure_above(max_id(&Term::Value(v.clone())));
        Ok(v)
    }

    fn mrec_component(&mut self, binds: &[(Binder, Expr)], i: usize) -> Result<Value, ExpandError> {
        let (b, vi) = &binds[i];
        let others: Vec<(Binder, Expr)> = binds
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, x)| x.clone())
            .collect();
        let inner = self.scoped(&[&b.name], |s| s.mrec_value(&others, vi))?;
        Ok(Value::rec(b.clone(), inner))
    }

    /// Lifts each expression to a value, let-binding the computations left
    /// to right, then builds the computation with `k`.
    fn with_values(
        &mut self,
        es: &[&Expr],
        k: &mut Build<'_, Self>,
    ) -> Result<Comp, ExpandError> {
        let mut lets = Vec::new();
        let mut vals = Vec::with_capacity(es.len());
        for e in es {
            if self.is_value(e) {
                vals.push(self.value(e)?);
            } else {
                let c = self.comp(e)?;
                let w = self.supply.fresh("w");
                vals.push(Value::var(w.clone()));
                lets.push((w, c));
            }
        }
        let mut body = k(self, vals)?;
        for (w, c) in lets.into_iter().rev() {
            body = Comp::let_(w, c, body);
        }
        Ok(body)
    }

    fn comp(&mut self, e: &Expr) -> Result<Comp, ExpandError> {
        match e {
            Expr::Var(n) => match self.def(n) {
                Some(DefTerm::Term(Term::Comp(c))) => Ok(c.clone()),
                Some(DefTerm::Handler(_)) => Err(ExpandError::HandlerAsExpr(n.base().to_string())),
                _ => Ok(Comp::ret(self.value(e)?)),
            },
            Expr::Unit | Expr::True | Expr::False | Expr::Lam(..) | Expr::Rec(..) => Ok(Comp::ret(self.value(e)?)),
            Expr::Record(fs) => {
                let es: Vec<&Expr> = fs.iter().map(|(_, e)| e).collect();
                let labels: Vec<_> = fs.iter().map(|(l, _)| l.clone()).collect();
                self.with_values(&es, &mut |_, vs| {
                    Ok(Comp::ret(Value::record(labels.iter().cloned().zip(vs).collect())?))
                })
            }
            Expr::Return(e) => self.with_values(&[e], &mut |_, vs| Ok(Comp::ret(vs[0].clone()))),
            Expr::Do(op, e) => self.with_values(&[e], &mut |_, vs| Ok(Comp::op(op.clone(), vs[0].clone()))),
            Expr::App(f, a) => self.with_values(&[f, a], &mut |_, vs| Ok(Comp::app(vs[0].clone(), vs[1].clone()))),
            Expr::If(c, t, f) => self.with_values(&[c], &mut |s, vs| {
                let t = s.comp(t)?;
                let f = s.comp(f)?;
                Ok(Comp::if_(vs[0].clone(), t, f))
            }),
            Expr::Let(x, c1, c2) => {
                let c1 = self.comp(c1)?;
                let c2 = self.scoped(&[x], |s| s.comp(c2))?;
                Ok(Comp::let_(x.clone(), c1, c2))
            }
            Expr::Seq(c1, c2) => {
                let c1 = self.comp(c1)?;
                let c2 = self.comp(c2)?;
                let x = self.supply.fresh("_");
                Ok(Comp::let_(x, c1, c2))
            }
            Expr::Handle(h, c) => {
                let h = match h.as_ref() {
                    HandlerSrc::Literal(h) => self.handler(h)?,
                    HandlerSrc::Named(n) => match self.def(n) {
                        Some(DefTerm::Handler(h)) => h.clone(),
                        _ => return Err(ExpandError::NotAHandler(n.base().to_string())),
                    },
                };
                Ok(Comp::handle(h, self.comp(c)?))
            }
            Expr::Proj(e, l) => self.with_values(&[e], &mut |_, vs| Ok(Comp::proj(vs[0].clone(), l.clone()))),
            Expr::Ascribe(e, ty) => Ok(Comp::ascribe(self.comp(e)?, ty.clone())),
            Expr::MRec(binds, body) => {
                let mut rs = Vec::with_capacity(binds.len());
                for i in 0..binds.len() {
                    rs.push(self.mrec_component(binds, i)?);
                }
                let names: Vec<&Name> = binds.iter().map(|(b, _)| &b.name).collect();
                let mut out = self.scoped(&names, |s| s.comp(body))?;
                for (i, r) in rs.into_iter().enumerate().rev() {
                    out = Comp::let_(binds[i].0.name.clone(), Comp::ret(r), out);
                }
                Ok(out)
            }
        }
    }

    fn handler(&mut self, h: &HandlerExpr) -> Result<Handler, ExpandError> {
        let ret_body = self.scoped(&[&h.ret.0], |s| s.comp(&h.ret.1))?;
        let mut clauses = Vec::with_capacity(h.clauses.len());
        for cl in &h.clauses {
            let body = self.scoped(&[&cl.param, &cl.cont], |s| s.comp(&cl.body))?;
            clauses.push(OpClause {
                op: cl.op.clone(),
                param: cl.param.clone(),
                cont: cl.cont.clone(),
                body,
            });
        }
        Ok(Handler::new(h.ret.0.clone(), ret_body, clauses)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{alpha_eq, CompKind, ValueKind};
    use crate::surface::parse_expr;

    fn expand(src: &str) -> Term {
        expand_sugar(&parse_expr(src).unwrap()).unwrap()
    }

    #[test]
    fn seq_is_let_with_unused_binder() {
        let t = expand("do a (); do b ()");
        let Term::Comp(c) = t else { panic!() };
        match c.kind() {
            CompKind::Let(x, _, body) => assert!(!body.has_free(x)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn application_is_left_associative() {
        let got = expand("x y z");
        let want = expand("let w = x y in w z");
        assert!(alpha_eq(&got, &want));
    }

    #[test]
    fn single_mrec_is_let_rec() {
        let got = expand("mrec f = fun x -> f x in f ()");
        let want = expand("let f = rec f. fun x -> f x in f ()");
        assert!(alpha_eq(&got, &want));
    }

    #[test]
    fn mrec_pair_matches_inductive_definition() {
        let got = expand("mrec f = fun x -> g x and g = fun y -> f y in f ()");
        let want = expand(
            "let f = rec f. fun x -> (rec g. fun y -> f y) x in \
             let g = rec g. fun y -> (rec f. fun x -> g x) y in f ()",
        );
        assert!(alpha_eq(&got, &want), "{}", crate::surface::print_term(&got));
    }

    #[test]
    fn values_in_computation_position_return() {
        let t = expand("fun x -> x");
        let Term::Value(v) = t else { panic!() };
        let ValueKind::Lam(_, body) = v.kind() else { panic!() };
        assert!(matches!(body.kind(), CompKind::Return(_)));
    }
}
