//! The simple type system, with records.
//!
//! The rules are syntax directed except for the types of binders, so the
//! checker runs bidirectionally: a `fun` or `rec` binder needs an annotation
//! only where no expected type reaches it.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::ast::{Comp, CompKind, Handler, Term, Value, ValueKind};
use crate::name::Name;
use crate::surface::{print_comp, print_value};
use crate::types::{Signature, SimpleType, TyExpr};

/// Typing environment for the simple system.
pub type StEnv = BTreeMap<Name, SimpleType>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StError {
    #[error("{rule}: `{term}` needs a type annotation")]
    NeedsAnnotation { rule: &'static str, term: String },
    #[error("{rule}: `{term}` has type {found}, expected {expected}")]
    Mismatch {
        rule: &'static str,
        term: String,
        expected: SimpleType,
        found: SimpleType,
    },
    #[error("{rule}: `{term}`: {message}")]
    Invalid {
        rule: &'static str,
        term: String,
        message: String,
    },
}

impl StError {
    /// Name of the rule that failed.
    pub fn rule(&self) -> &'static str {
        match self {
            StError::NeedsAnnotation { rule, .. } | StError::Mismatch { rule, .. } | StError::Invalid { rule, .. } => rule,
        }
    }
}

type R<T> = Result<T, StError>;

pub(crate) fn short(s: String) -> String {
    const MAX: usize = 72;
    let flat: String = s.split_whitespace().collect::<Vec<_>>().join(" ");
    if flat.chars().count() <= MAX {
        flat
    } else {
        let cut: String = flat.chars().take(MAX).collect();
        format!("{cut} ...")
    }
}

pub(crate) fn vt(v: &Value) -> String {
    short(print_value(v))
}

pub(crate) fn ct(c: &Comp) -> String {
    short(print_comp(c))
}

/// Synthesizes the type of `t` under `env`.
pub fn check_st(sig: &Signature, env: &StEnv, t: &Term) -> R<SimpleType> {
    let mut ck = Checker::new(sig, env);
    match t {
        Term::Value(v) => ck.synth_v(v),
        Term::Comp(c) => ck.synth_c(c),
    }
}

/// Checks `c` against `expected`.
pub fn check_st_against(sig: &Signature, env: &StEnv, c: &Comp, expected: &SimpleType) -> R<()> {
    Checker::new(sig, env).check_c(c, expected)
}

/// Closed-program shorthand.
pub fn check_st_program(sig: &Signature, c: &Comp) -> R<SimpleType> {
    check_st(sig, &StEnv::new(), &Term::Comp(c.clone()))
}

struct Checker<'a> {
    sig: &'a Signature,
    env: HashMap<Name, SimpleType>,
}

fn simple(ann: &TyExpr, rule: &'static str, term: impl FnOnce() -> String) -> R<SimpleType> {
    ann.to_simple().map_err(|e| StError::Invalid {
        rule,
        term: term(),
        message: e.to_string(),
    })
}

impl<'a> Checker<'a> {
    fn new(sig: &'a Signature, env: &StEnv) -> Checker<'a> {
        Checker {
            sig,
            env: env.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
        }
    }

    fn scoped<T>(&mut self, binds: &[(&Name, SimpleType)], f: impl FnOnce(&mut Self) -> T) -> T {
        let saved: Vec<_> = binds
            .iter()
            .map(|(x, t)| ((*x).clone(), self.env.insert((*x).clone(), t.clone())))
            .collect();
        let out = f(self);
        for (x, old) in saved.into_iter().rev() {
            match old {
                Some(t) => self.env.insert(x, t),
                None => self.env.remove(&x),
            };
        }
        out
    }

    fn same(rule: &'static str, term: impl FnOnce() -> String, expected: &SimpleType, found: SimpleType) -> R<()> {
        if &found == expected {
            Ok(())
        } else {
            Err(StError::Mismatch {
                rule,
                term: term(),
                expected: expected.clone(),
                found,
            })
        }
    }

    // -- values

    fn synth_v(&mut self, v: &Value) -> R<SimpleType> {
        match v.kind() {
            ValueKind::Var(x) => self.env.get(x).cloned().ok_or_else(|| StError::Invalid {
                rule: "St-Var",
                term: x.to_string(),
                message: "unbound variable".into(),
            }),
            ValueKind::Unit => Ok(SimpleType::Unit),
            ValueKind::True | ValueKind::False => Ok(SimpleType::Bool),
            ValueKind::Lam(b, body) => {
                let Some(ann) = &b.ann else {
                    return Err(StError::NeedsAnnotation {
                        rule: "St-Lam",
                        term: vt(v),
                    });
                };
                let a = simple(ann, "St-Lam", || vt(v))?;
                let r = self.scoped(&[(&b.name, a.clone())], |s| s.synth_c(body))?;
                Ok(SimpleType::arrow(a, r))
            }
            ValueKind::Rec(b, body) => {
                let Some(ann) = &b.ann else {
                    return Err(StError::NeedsAnnotation {
                        rule: "St-Rec",
                        term: vt(v),
                    });
                };
                let t = simple(ann, "St-Rec", || vt(v))?;
                self.scoped(&[(&b.name, t.clone())], |s| s.check_v(body, &t))?;
                Ok(t)
            }
            ValueKind::Record(fs) => {
                let mut out = BTreeMap::new();
                for (l, w) in fs {
                    out.insert(l.clone(), self.synth_v(w)?);
                }
                Ok(SimpleType::Record(out))
            }
        }
    }

    fn check_v(&mut self, v: &Value, expected: &SimpleType) -> R<()> {
        match (v.kind(), expected) {
            (ValueKind::Lam(b, body), SimpleType::Arrow(a, r)) => {
                if let Some(ann) = &b.ann {
                    let t = simple(ann, "St-Lam", || vt(v))?;
                    Checker::same("St-Lam", || b.name.to_string(), a, t)?;
                }
                self.scoped(&[(&b.name, (**a).clone())], |s| s.check_c(body, r))
            }
            (ValueKind::Lam(..), _) => Err(StError::Invalid {
                rule: "St-Lam",
                term: vt(v),
                message: format!("a function cannot have type {expected}"),
            }),
            (ValueKind::Rec(b, body), _) => {
                if let Some(ann) = &b.ann {
                    let t = simple(ann, "St-Rec", || vt(v))?;
                    Checker::same("St-Rec", || b.name.to_string(), expected, t)?;
                }
                self.scoped(&[(&b.name, expected.clone())], |s| s.check_v(body, expected))
            }
            (ValueKind::Record(fs), SimpleType::Record(want)) => {
                if fs.len() != want.len() || fs.iter().any(|(l, _)| !want.contains_key(l)) {
                    return Err(StError::Invalid {
                        rule: "St-Record",
                        term: vt(v),
                        message: format!("labels differ from {expected}"),
                    });
                }
                for (l, w) in fs {
                    self.check_v(w, &want[l])?;
                }
                Ok(())
            }
            _ => {
                let t = self.synth_v(v)?;
                Checker::same(rule_of_value(v), || vt(v), expected, t)
            }
        }
    }

    // -- computations

    fn synth_c(&mut self, c: &Comp) -> R<SimpleType> {
        match c.kind() {
            CompKind::Return(v) => self.synth_v(v),
            CompKind::Op(op, v) => {
                let (a, r) = self.sig.st.get(op).cloned().ok_or_else(|| StError::Invalid {
                    rule: "St-Op",
                    term: ct(c),
                    message: format!("operation `{op}` has no simple signature entry"),
                })?;
                self.check_v(v, &a)?;
                Ok(r)
            }
            CompKind::App(f, a) => self.app(c, f, a, None),
            CompKind::If(v, c1, c2) => {
                self.check_v(v, &SimpleType::Bool)?;
                match self.synth_c(c1) {
                    Ok(t) => {
                        self.check_c(c2, &t)?;
                        Ok(t)
                    }
                    Err(StError::NeedsAnnotation { .. }) => {
                        let t = self.synth_c(c2)?;
                        self.check_c(c1, &t)?;
                        Ok(t)
                    }
                    Err(e) => Err(e),
                }
            }
            CompKind::Let(..) => self.let_chain(c, None),
            CompKind::Handle(h, body) => self.handle(c, h, body, None),
            CompKind::Proj(v, l) => match self.synth_v(v)? {
                SimpleType::Record(fs) => fs.get(l).cloned().ok_or_else(|| StError::Invalid {
                    rule: "St-Proj",
                    term: ct(c),
                    message: format!("no field `{l}`"),
                }),
                t => Err(StError::Invalid {
                    rule: "St-Proj",
                    term: ct(c),
                    message: format!("projection from non-record type {t}"),
                }),
            },
            CompKind::Ascribe(inner, ty) => {
                let t = simple(ty, "St-Ascribe", || ct(c))?;
                self.check_c(inner, &t)?;
                Ok(t)
            }
        }
    }

    fn check_c(&mut self, c: &Comp, expected: &SimpleType) -> R<()> {
        match c.kind() {
            CompKind::Return(v) => self.check_v(v, expected),
            CompKind::If(v, c1, c2) => {
                self.check_v(v, &SimpleType::Bool)?;
                self.check_c(c1, expected)?;
                self.check_c(c2, expected)
            }
            CompKind::Let(..) => self.let_chain(c, Some(expected)).map(|_| ()),
            CompKind::Handle(h, body) => self.handle(c, h, body, Some(expected)).map(|_| ()),
            CompKind::App(f, a) => self.app(c, f, a, Some(expected)).map(|_| ()),
            _ => {
                let t = self.synth_c(c)?;
                Checker::same(rule_of_comp(c), || ct(c), expected, t)
            }
        }
    }

    fn app(&mut self, c: &Comp, f: &Value, a: &Value, expected: Option<&SimpleType>) -> R<SimpleType> {
        // an unannotated function applied on the spot takes its domain from
        // the argument
        if let ValueKind::Lam(b, body) = f.kind() {
            if b.ann.is_none() {
                let d = self.synth_v(a)?;
                return self.scoped(&[(&b.name, d)], |s| match expected {
                    Some(t) => s.check_c(body, t).map(|_| t.clone()),
                    None => s.synth_c(body),
                });
            }
        }
        let r = match self.synth_v(f)? {
            SimpleType::Arrow(d, r) => {
                self.check_v(a, &d)?;
                *r
            }
            t => {
                return Err(StError::Invalid {
                    rule: "St-App",
                    term: ct(c),
                    message: format!("applying a value of type {t}"),
                })
            }
        };
        if let Some(t) = expected {
            Checker::same("St-App", || ct(c), t, r.clone())?;
        }
        Ok(r)
    }

    /// A right-nested `let` spine, walked without recursion.
    fn let_chain(&mut self, c: &Comp, expected: Option<&SimpleType>) -> R<SimpleType> {
        let mut binds: Vec<(Name, SimpleType)> = Vec::new();
        let mut saved = Vec::new();
        let mut cur = c.clone();
        let res = loop {
            let CompKind::Let(x, c1, c2) = cur.kind() else {
                break match expected {
                    Some(t) => self.check_c(&cur, t).map(|_| t.clone()),
                    None => self.synth_c(&cur),
                };
            };
            let t = match self.synth_c(c1) {
                Ok(t) => t,
                Err(e) => break Err(e),
            };
            saved.push((x.clone(), self.env.insert(x.clone(), t.clone())));
            binds.push((x.clone(), t));
            let next = c2.clone();
            cur = next;
        };
        for (x, old) in saved.into_iter().rev() {
            match old {
                Some(t) => self.env.insert(x, t),
                None => self.env.remove(&x),
            };
        }
        res
    }

    fn handle(&mut self, c: &Comp, h: &Handler, body: &Comp, expected: Option<&SimpleType>) -> R<SimpleType> {
        let sigma = self.synth_c(body)?;
        let answer = self.scoped(&[(h.ret_binder(), sigma)], |s| match expected {
            Some(t) => s.check_c(h.ret_body(), t).map(|_| t.clone()),
            None => s.synth_c(h.ret_body()),
        })?;
        for cl in h.clauses() {
            let (a, r) = self.sig.st.get(&cl.op).cloned().ok_or_else(|| StError::Invalid {
                rule: "St-Hdlr",
                term: ct(c),
                message: format!("operation `{}` has no simple signature entry", cl.op),
            })?;
            let k = SimpleType::arrow(r, answer.clone());
            self.scoped(&[(&cl.param, a), (&cl.cont, k)], |s| s.check_c(&cl.body, &answer))?;
        }
        Ok(answer)
    }
}

fn rule_of_value(v: &Value) -> &'static str {
    match v.kind() {
        ValueKind::Var(_) => "St-Var",
        ValueKind::Unit => "St-Unit",
        ValueKind::True | ValueKind::False => "St-Bool",
        ValueKind::Lam(..) => "St-Lam",
        ValueKind::Rec(..) => "St-Rec",
        ValueKind::Record(_) => "St-Record",
    }
}

fn rule_of_comp(c: &Comp) -> &'static str {
    match c.kind() {
        CompKind::Return(_) => "St-Ret",
        CompKind::Op(..) => "St-Op",
        CompKind::App(..) => "St-App",
        CompKind::If(..) => "St-If",
        CompKind::Let(..) => "St-Let",
        CompKind::Handle(..) => "St-Han",
        CompKind::Proj(..) => "St-Proj",
        CompKind::Ascribe(..) => "St-Ascribe",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{expand_sugar, parse_expr, parse_type};

    fn term(src: &str) -> Term {
        expand_sugar(&parse_expr(src).unwrap()).unwrap()
    }

    fn ty(src: &str) -> SimpleType {
        parse_type(src).unwrap().to_simple().unwrap()
    }

    fn synth(sig: &Signature, src: &str) -> R<SimpleType> {
        check_st(sig, &StEnv::new(), &term(src))
    }

    #[test]
    fn return_true_is_bool() {
        assert_eq!(synth(&Signature::new(), "return true"), Ok(SimpleType::Bool));
    }

    #[test]
    fn lambdas_need_annotations_only_when_synthesized() {
        let e = synth(&Signature::new(), "fun x -> x").unwrap_err();
        assert_eq!(e.rule(), "St-Lam");
        assert!(matches!(e, StError::NeedsAnnotation { .. }));
        assert_eq!(synth(&Signature::new(), "(fun x -> x) true"), Ok(SimpleType::Bool));
        assert_eq!(synth(&Signature::new(), "(fun (x : Bool) -> x)"), Ok(ty("Bool -> Bool")));
    }

    #[test]
    fn handler_answer_types_must_agree() {
        let sig = Signature::new().with_st("op", SimpleType::Unit, SimpleType::Unit);
        // the return clause answers Unit, the op clause Bool
        let e = synth(&sig, "with {return x -> return (); op(x; k) -> return true} handle do op ()").unwrap_err();
        assert!(
            matches!(&e, StError::Mismatch { expected: SimpleType::Unit, found: SimpleType::Bool, .. }),
            "{e}"
        );
        assert_eq!(
            synth(&sig, "with {return x -> return true; op(x; k) -> k ()} handle do op ()"),
            Ok(SimpleType::Bool)
        );
    }

    #[test]
    fn records_and_projections() {
        assert_eq!(synth(&Signature::new(), "{a = true, b = ()}.b"), Ok(SimpleType::Unit));
        let e = synth(&Signature::new(), "{a = true}.b").unwrap_err();
        assert_eq!(e.rule(), "St-Proj");
    }

    #[test]
    fn rec_checks_against_its_annotation() {
        assert_eq!(
            synth(&Signature::new(), "(rec (f : Unit -> Bool). fun u -> f u) ()"),
            Ok(SimpleType::Bool)
        );
    }

    #[test]
    fn unknown_operation_is_rejected() {
        let e = synth(&Signature::new(), "do boom ()").unwrap_err();
        assert_eq!(e.rule(), "St-Op");
    }

    #[test]
    fn environment_is_respected() {
        let t = term("if z then () else ()");
        let env: StEnv = crate::ast::free_vars(&t).into_iter().map(|n| (n, SimpleType::Bool)).collect();
        assert_eq!(env.len(), 1);
        assert_eq!(check_st(&Signature::new(), &env, &t), Ok(SimpleType::Unit));
    }
}
