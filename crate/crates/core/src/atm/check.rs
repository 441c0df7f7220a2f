//! Annotation-assisted checker producing typing derivations.
//!
//! Types are synthesized at variables, applications, operations and
//! returns, and pushed down into function bodies, branches, handler clauses
//! and ascriptions. Where a pushed-down type and a synthesized one differ,
//! one subsumption step is tried. The derivations mention the program with
//! its ascriptions erased.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::deriv::{AtmEnv, Rule, Subject, TypeDeriv};
use super::subtype::{is_subtype_value, subtype_comp, subtype_value, AtmType};
use crate::ast::{Binder, Comp, CompKind, Handler, OpClause, Term, Value, ValueKind};
use crate::name::Name;
use crate::simple::{ct, vt};
use crate::types::{CType, Signature, TyExpr, VType};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AtmError {
    #[error("{rule}: `{term}` needs a type annotation")]
    NeedsAnnotation { rule: &'static str, term: String },
    #[error("{rule}: `{term}` has type {found}, which is not a subtype of {expected}")]
    Mismatch {
        rule: &'static str,
        term: String,
        expected: AtmType,
        found: AtmType,
    },
    #[error("{rule}: `{term}`: answer type {first} does not fit answer type {second}")]
    AnswerMismatch {
        rule: &'static str,
        term: String,
        first: CType,
        second: CType,
    },
    #[error("{rule}: `{term}`: {message}")]
    Invalid {
        rule: &'static str,
        term: String,
        message: String,
    },
}

impl AtmError {
    pub fn rule(&self) -> &'static str {
        match self {
            AtmError::NeedsAnnotation { rule, .. }
            | AtmError::Mismatch { rule, .. }
            | AtmError::AnswerMismatch { rule, .. }
            | AtmError::Invalid { rule, .. } => rule,
        }
    }
}

type R<T> = Result<T, AtmError>;

/// Checks `t` under `env`, against `expected` when given.
pub fn check_atm(sig: &Signature, env: &BTreeMap<Name, VType>, t: &Term, expected: Option<&AtmType>) -> R<TypeDeriv> {
    let ck = Checker { sig };
    let env = AtmEnv::from(env);
    match (t, expected) {
        (Term::Value(v), None) => ck.synth_v(&env, v),
        (Term::Value(v), Some(AtmType::Value(ty))) => ck.check_v(&env, v, ty),
        (Term::Comp(c), None) => ck.synth_c(&env, c),
        (Term::Comp(c), Some(AtmType::Comp(r))) => ck.check_c(&env, c, r),
        (t, Some(ty)) => Err(AtmError::Invalid {
            rule: "T-Ret",
            term: match t {
                Term::Value(v) => vt(v),
                Term::Comp(c) => ct(c),
            },
            message: format!("expected type {ty} is of the wrong kind"),
        }),
    }
}

/// A closed program is typable when it has a pure type.
pub fn check_atm_program(sig: &Signature, c: &Comp) -> R<TypeDeriv> {
    let d = Checker { sig }.synth_c(&AtmEnv::new(), c)?;
    match d.comp_type() {
        Some(CType::Pure(_)) => Ok(d),
        other => Err(AtmError::Invalid {
            rule: "T-CSub",
            term: ct(c),
            message: format!(
                "program type {} is effectful; only pure program types are accepted",
                other.map(|t| t.to_string()).unwrap_or_default()
            ),
        }),
    }
}

struct Checker<'a> {
    sig: &'a Signature,
}

fn node(rule: Rule, env: &AtmEnv, subject: Subject, ty: impl Into<AtmType>, premises: Vec<TypeDeriv>) -> TypeDeriv {
    TypeDeriv {
        rule,
        env: env.clone(),
        subject,
        ty: Some(ty.into()),
        premises,
        sub: None,
    }
}

fn annotation(b: &Binder, rule: &'static str, term: impl FnOnce() -> String) -> R<Option<VType>> {
    b.ann
        .as_ref()
        .map(|t| {
            t.to_value_type().map_err(|e| AtmError::Invalid {
                rule,
                term: term(),
                message: e.to_string(),
            })
        })
        .transpose()
}

fn comp_annotation(t: &TyExpr, term: impl FnOnce() -> String) -> R<CType> {
    t.to_comp_type().map_err(|e| AtmError::Invalid {
        rule: "T-CSub",
        term: term(),
        message: e.to_string(),
    })
}

fn subject_value(d: &TypeDeriv) -> Value {
    d.value().expect("value derivation").clone()
}

fn subject_comp(d: &TypeDeriv) -> Comp {
    d.comp().expect("computation derivation").clone()
}

fn ctype(d: &TypeDeriv) -> CType {
    d.comp_type().expect("computation type").clone()
}

fn vtype(d: &TypeDeriv) -> VType {
    d.value_type().expect("value type").clone()
}

/// Wraps `d` in `T-VSub` unless it already has type `t`.
fn vsub(d: TypeDeriv, t: &VType, rule: &'static str) -> R<TypeDeriv> {
    let found = vtype(&d);
    if &found == t {
        return Ok(d);
    }
    match subtype_value(&found, t) {
        Some(s) => Ok(TypeDeriv {
            rule: Rule::VSub,
            env: d.env.clone(),
            subject: d.subject.clone(),
            ty: Some(t.clone().into()),
            premises: vec![d],
            sub: Some(s),
        }),
        None => Err(AtmError::Mismatch {
            rule,
            term: vt(&subject_value(&d)),
            expected: t.clone().into(),
            found: found.into(),
        }),
    }
}

/// Wraps `d` in `T-CSub` unless it already has type `r`.
fn csub(d: TypeDeriv, r: &CType, rule: &'static str) -> R<TypeDeriv> {
    let found = ctype(&d);
    if &found == r {
        return Ok(d);
    }
    match subtype_comp(&found, r) {
        Some(s) => Ok(TypeDeriv {
            rule: Rule::CSub,
            env: d.env.clone(),
            subject: d.subject.clone(),
            ty: Some(r.clone().into()),
            premises: vec![d],
            sub: Some(s),
        }),
        None => {
            let term = ct(&subject_comp(&d));
            match (&found, r) {
                (CType::Eff(t1, _, b1), CType::Eff(t2, _, b2)) if is_subtype_value(t1, t2) => Err(AtmError::AnswerMismatch {
                    rule,
                    term,
                    first: (**b1).clone(),
                    second: (**b2).clone(),
                }),
                _ => Err(AtmError::Mismatch {
                    rule,
                    term,
                    expected: r.clone().into(),
                    found: found.into(),
                }),
            }
        }
    }
}

impl Checker<'_> {
    // -- values

    fn synth_v(&self, env: &AtmEnv, v: &Value) -> R<TypeDeriv> {
        match v.kind() {
            ValueKind::Var(x) => match env.lookup(x) {
                Some(t) => Ok(node(Rule::Var, env, Subject::Value(v.clone()), t.clone(), vec![])),
                None => Err(AtmError::Invalid {
                    rule: "T-Var",
                    term: x.to_string(),
                    message: "unbound variable".into(),
                }),
            },
            ValueKind::Unit => Ok(node(Rule::Unit, env, Subject::Value(v.clone()), VType::Unit, vec![])),
            ValueKind::True | ValueKind::False => Ok(node(Rule::Bool, env, Subject::Value(v.clone()), VType::Bool, vec![])),
            ValueKind::Lam(b, body) => {
                let Some(t) = annotation(b, "T-Lam", || vt(v))? else {
                    return Err(AtmError::NeedsAnnotation {
                        rule: "T-Lam",
                        term: vt(v),
                    });
                };
                let inner = env.extend(&b.name, t.clone());
                let d = self.synth_c(&inner, body)?;
                Ok(self.lam(env, b, t, d))
            }
            ValueKind::Rec(b, _) => {
                let Some(t) = annotation(b, "T-Rec", || vt(v))? else {
                    return Err(AtmError::NeedsAnnotation {
                        rule: "T-Rec",
                        term: vt(v),
                    });
                };
                self.check_v(env, v, &t)
            }
            ValueKind::Record(_) => Err(AtmError::Invalid {
                rule: "T-Var",
                term: vt(v),
                message: "records are not part of the source language".into(),
            }),
        }
    }

    fn lam(&self, env: &AtmEnv, b: &Binder, t: VType, body: TypeDeriv) -> TypeDeriv {
        let ty = VType::arrow(t, ctype(&body));
        let subject = Value::lam(b.clone(), subject_comp(&body));
        node(Rule::Lam, env, Subject::Value(subject), ty, vec![body])
    }

    fn check_v(&self, env: &AtmEnv, v: &Value, t: &VType) -> R<TypeDeriv> {
        match (v.kind(), t) {
            (ValueKind::Lam(b, body), VType::Arrow(a, r)) => {
                match annotation(b, "T-Lam", || vt(v))? {
                    Some(ann) if &ann != a.as_ref() => return vsub(self.synth_v(env, v)?, t, "T-VSub"),
                    _ => {}
                }
                let inner = env.extend(&b.name, (**a).clone());
                let d = self.check_c(&inner, body, r)?;
                Ok(self.lam(env, b, (**a).clone(), d))
            }
            (ValueKind::Rec(b, body), _) => {
                match annotation(b, "T-Rec", || vt(v))? {
                    Some(ann) if &ann != t => return vsub(self.synth_v(env, v)?, t, "T-VSub"),
                    _ => {}
                }
                let inner = env.extend(&b.name, t.clone());
                let d = self.check_v(&inner, body, t)?;
                let subject = Value::rec(b.clone(), subject_value(&d));
                Ok(node(Rule::Rec, env, Subject::Value(subject), t.clone(), vec![d]))
            }
            _ => vsub(self.synth_v(env, v)?, t, "T-VSub"),
        }
    }

    // -- computations

    fn synth_c(&self, env: &AtmEnv, c: &Comp) -> R<TypeDeriv> {
        match c.kind() {
            CompKind::Return(v) => {
                let d = self.synth_v(env, v)?;
                Ok(self.ret(env, d))
            }
            CompKind::Op(op, v) => {
                let Some(s) = self.sig.atm.get(op) else {
                    return Err(AtmError::Invalid {
                        rule: "T-Op",
                        term: ct(c),
                        message: format!("operation `{op}` has no ATM signature entry"),
                    });
                };
                let d = self.check_v(env, v, &s.arg)?;
                let ty = CType::eff(s.result.clone(), s.answer_in.clone(), s.answer_out.clone());
                let subject = Comp::op(op.clone(), subject_value(&d));
                Ok(node(Rule::Op, env, Subject::Comp(subject), ty, vec![d]))
            }
            CompKind::App(f, a) => self.app(env, c, f, a, None),
            CompKind::If(v, c1, c2) => {
                let dv = self.check_v(env, v, &VType::Bool)?;
                let (d1, d2) = match self.synth_c(env, c1) {
                    Ok(d1) => {
                        let d2 = match self.synth_c(env, c2) {
                            Err(AtmError::NeedsAnnotation { .. }) => self.check_c(env, c2, &ctype(&d1))?,
                            r => r?,
                        };
                        (d1, d2)
                    }
                    Err(AtmError::NeedsAnnotation { .. }) => {
                        let d2 = self.synth_c(env, c2)?;
                        (self.check_c(env, c1, &ctype(&d2))?, d2)
                    }
                    Err(e) => return Err(e),
                };
                let (r1, r2) = (ctype(&d1), ctype(&d2));
                let (d1, d2, r) = if r1 == r2 {
                    (d1, d2, r1)
                } else if subtype_comp(&r2, &r1).is_some() {
                    (d1, csub(d2, &r1, "T-If")?, r1)
                } else {
                    (csub(d1, &r2, "T-If")?, d2, r2)
                };
                Ok(self.if_node(env, dv, d1, d2, r))
            }
            CompKind::Let(x, c1, c2) => self.let_(env, x, c1, c2, None),
            CompKind::Handle(h, body) => self.handle(env, c, h, body, None),
            CompKind::Proj(..) => Err(AtmError::Invalid {
                rule: "T-App",
                term: ct(c),
                message: "records are not part of the source language".into(),
            }),
            CompKind::Ascribe(inner, ty) => {
                let r = comp_annotation(ty, || ct(c))?;
                self.check_c(env, inner, &r)
            }
        }
    }

    fn check_c(&self, env: &AtmEnv, c: &Comp, r: &CType) -> R<TypeDeriv> {
        match c.kind() {
            CompKind::Return(v) => {
                let d = self.check_v(env, v, r.value_type())?;
                csub(self.ret(env, d), r, "T-Ret")
            }
            CompKind::If(v, c1, c2) => {
                let dv = self.check_v(env, v, &VType::Bool)?;
                let d1 = self.check_c(env, c1, r)?;
                let d2 = self.check_c(env, c2, r)?;
                Ok(self.if_node(env, dv, d1, d2, r.clone()))
            }
            CompKind::Let(x, c1, c2) => self.let_(env, x, c1, c2, Some(r)),
            CompKind::Handle(h, body) => self.handle(env, c, h, body, Some(r)),
            CompKind::App(f, a) => self.app(env, c, f, a, Some(r)),
            CompKind::Ascribe(inner, ty) => {
                let ra = comp_annotation(ty, || ct(c))?;
                csub(self.check_c(env, inner, &ra)?, r, "T-CSub")
            }
            _ => csub(self.synth_c(env, c)?, r, "T-CSub"),
        }
    }

    fn ret(&self, env: &AtmEnv, d: TypeDeriv) -> TypeDeriv {
        let ty = CType::pure(vtype(&d));
        let subject = Comp::ret(subject_value(&d));
        node(Rule::Ret, env, Subject::Comp(subject), ty, vec![d])
    }

    fn if_node(&self, env: &AtmEnv, dv: TypeDeriv, d1: TypeDeriv, d2: TypeDeriv, r: CType) -> TypeDeriv {
        let subject = Comp::if_(subject_value(&dv), subject_comp(&d1), subject_comp(&d2));
        node(Rule::If, env, Subject::Comp(subject), r, vec![dv, d1, d2])
    }

    fn app(&self, env: &AtmEnv, c: &Comp, f: &Value, a: &Value, expected: Option<&CType>) -> R<TypeDeriv> {
        let (df, da) = match f.kind() {
            // the argument fixes the binder type of an unannotated head
            ValueKind::Lam(b, body) if b.ann.is_none() => {
                let da = self.synth_v(env, a)?;
                let t = vtype(&da);
                let inner = env.extend(&b.name, t.clone());
                let db = match expected {
                    Some(r) => self.check_c(&inner, body, r)?,
                    None => self.synth_c(&inner, body)?,
                };
                (self.lam(env, b, t, db), da)
            }
            _ => {
                let df = self.synth_v(env, f)?;
                let VType::Arrow(dom, _) = vtype(&df) else {
                    return Err(AtmError::Invalid {
                        rule: "T-App",
                        term: ct(c),
                        message: format!("applying a value of type {}", vtype(&df)),
                    });
                };
                let da = self.check_v(env, a, &dom)?;
                (df, da)
            }
        };
        let VType::Arrow(_, r) = vtype(&df) else { unreachable!() };
        let subject = Comp::app(subject_value(&df), subject_value(&da));
        let d = node(Rule::App, env, Subject::Comp(subject), (*r).clone(), vec![df, da]);
        match expected {
            Some(e) => csub(d, e, "T-App"),
            None => Ok(d),
        }
    }

    fn let_node(&self, env: &AtmEnv, x: &Name, d1: TypeDeriv, d2: TypeDeriv) -> TypeDeriv {
        let subject = Comp::let_(x.clone(), subject_comp(&d1), subject_comp(&d2));
        let (rule, ty) = match (ctype(&d1), ctype(&d2)) {
            (CType::Pure(_), CType::Pure(t2)) => (Rule::LetP, CType::pure(t2)),
            (CType::Eff(_, _, out), CType::Eff(t2, a2, _)) => (Rule::LetIp, CType::Eff(t2, a2, out)),
            _ => unreachable!("let premises have mixed purity"),
        };
        node(rule, env, Subject::Comp(subject), ty, vec![d1, d2])
    }

    fn let_(&self, env: &AtmEnv, x: &Name, c1: &Comp, c2: &Comp, expected: Option<&CType>) -> R<TypeDeriv> {
        let d1 = self.synth_c(env, c1)?;
        let r1 = ctype(&d1);
        let inner = env.extend(x, r1.value_type().clone());
        match expected {
            None => {
                let d2 = self.synth_c(&inner, c2)?;
                match (&r1, ctype(&d2)) {
                    (CType::Pure(_), CType::Pure(_)) => Ok(self.let_node(env, x, d1, d2)),
                    (CType::Pure(t1), CType::Eff(_, _, out)) => {
                        let d1 = csub(d1, &CType::Eff(t1.clone(), out.clone(), out), "T-LetIp")?;
                        Ok(self.let_node(env, x, d1, d2))
                    }
                    (CType::Eff(_, a, _), CType::Pure(t2)) => {
                        let d2 = csub(d2, &CType::Eff(t2, a.clone(), a.clone()), "T-LetIp")?;
                        Ok(self.let_node(env, x, d1, d2))
                    }
                    (CType::Eff(_, a, _), CType::Eff(t2, a2, _)) => {
                        let d2 = csub(d2, &CType::Eff(t2, a2, a.clone()), "T-LetIp")?;
                        Ok(self.let_node(env, x, d1, d2))
                    }
                }
            }
            Some(CType::Pure(t)) => {
                if !r1.is_pure() {
                    return Err(AtmError::Mismatch {
                        rule: "T-LetP",
                        term: ct(c1),
                        expected: CType::pure(r1.value_type().clone()).into(),
                        found: r1.into(),
                    });
                }
                let d2 = self.check_c(&inner, c2, &CType::pure(t.clone()))?;
                Ok(self.let_node(env, x, d1, d2))
            }
            Some(CType::Eff(t, alpha, beta)) => {
                let (d1, mid) = match &r1 {
                    CType::Pure(t1) => {
                        let d1 = csub(d1, &CType::Eff(t1.clone(), beta.clone(), beta.clone()), "T-LetIp")?;
                        (d1, beta.clone())
                    }
                    CType::Eff(t1, a, _) => {
                        let d1 = csub(d1, &CType::Eff(t1.clone(), a.clone(), beta.clone()), "T-LetIp")?;
                        (d1, a.clone())
                    }
                };
                let d2 = self.check_c(&inner, c2, &CType::Eff(t.clone(), alpha.clone(), mid))?;
                Ok(self.let_node(env, x, d1, d2))
            }
        }
    }

    fn handle(&self, env: &AtmEnv, c: &Comp, h: &Handler, body: &Comp, expected: Option<&CType>) -> R<TypeDeriv> {
        // every operation of the signature needs a clause, so that the
        // handler can stand for the whole signature
        let ops: BTreeSet<_> = h.clauses().iter().map(|cl| cl.op.clone()).collect();
        let sig_ops: BTreeSet<_> = self.sig.atm.keys().cloned().collect();
        if ops != sig_ops {
            let list = |s: &BTreeSet<crate::name::Label>| s.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(", ");
            return Err(AtmError::Invalid {
                rule: "T-Hdlr",
                term: ct(c),
                message: format!("handler handles {{{}}} but the signature declares {{{}}}", list(&ops), list(&sig_ops)),
            });
        }
        let mut clause_ds = Vec::new();
        for cl in h.clauses() {
            let s = &self.sig.atm[&cl.op];
            let k = VType::arrow(s.result.clone(), s.answer_in.clone());
            let inner = env.extend(&cl.param, s.arg.clone()).extend(&cl.cont, k);
            clause_ds.push(self.check_c(&inner, &cl.body, &s.answer_out)?);
        }

        let db = self.synth_c(env, body)?;
        let (db, dret, result) = match ctype(&db) {
            CType::Eff(t, a, b) => {
                let inner = env.extend(h.ret_binder(), t);
                let dret = self.check_c(&inner, h.ret_body(), &a)?;
                (db, dret, (*b).clone())
            }
            CType::Pure(t) => {
                let inner = env.extend(h.ret_binder(), t.clone());
                let dret = match expected {
                    Some(r) => self.check_c(&inner, h.ret_body(), r)?,
                    None => self.synth_c(&inner, h.ret_body())?,
                };
                let rho = ctype(&dret);
                let db = csub(db, &CType::eff(t, rho.clone(), rho.clone()), "T-Han")?;
                (db, dret, rho)
            }
        };

        let clauses = h
            .clauses()
            .iter()
            .zip(&clause_ds)
            .map(|(cl, d)| OpClause {
                op: cl.op.clone(),
                param: cl.param.clone(),
                cont: cl.cont.clone(),
                body: subject_comp(d),
            })
            .collect();
        let h2 = Handler::new(h.ret_binder().clone(), subject_comp(&dret), clauses).expect("clauses stay distinct");
        let dh = TypeDeriv {
            rule: Rule::Hdlr,
            env: env.clone(),
            subject: Subject::Handler(h2.clone()),
            ty: None,
            premises: clause_ds,
            sub: None,
        };
        let subject = Comp::handle(h2, subject_comp(&db));
        let d = node(Rule::Han, env, Subject::Comp(subject), result, vec![dh, db, dret]);
        match expected {
            Some(r) => csub(d, r, "T-Han"),
            None => Ok(d),
        }
    }
}
