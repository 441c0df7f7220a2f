//! Independent re-check of a typing derivation, node by node.

use std::collections::BTreeSet;

use super::deriv::{Rule, Subject, TypeDeriv};
use super::subtype::{validate_sub, AtmType};
use crate::ast::{CompKind, ValueKind};
use crate::types::{CType, Signature, VType};

/// Checks that every node is an instance of its rule: premise count and
/// kinds, environments, subjects and types all have to line up.
pub fn validate_derivation(sig: &Signature, d: &TypeDeriv) -> Result<(), String> {
    let mut stack = vec![d];
    while let Some(d) = stack.pop() {
        check_node(sig, d).map_err(|m| format!("{} node at `{}`: {m}", d.rule, subject_text(&d.subject)))?;
        stack.extend(d.premises.iter());
    }
    Ok(())
}

fn subject_text(s: &Subject) -> String {
    match s {
        Subject::Value(v) => crate::simple::vt(v),
        Subject::Comp(c) => crate::simple::ct(c),
        Subject::Handler(_) => "handler".into(),
    }
}

fn vty(d: &TypeDeriv) -> Result<&VType, String> {
    d.value_type().ok_or_else(|| format!("premise {} should have a value type", d.rule))
}

fn cty(d: &TypeDeriv) -> Result<&CType, String> {
    d.comp_type().ok_or_else(|| format!("premise {} should have a computation type", d.rule))
}

fn expect(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn same_env(d: &TypeDeriv, p: &TypeDeriv) -> Result<(), String> {
    expect(p.env.same(&d.env), || format!("premise {} has a different environment", p.rule))
}

fn check_node(sig: &Signature, d: &TypeDeriv) -> Result<(), String> {
    let arity = match d.rule {
        Rule::Unit | Rule::Bool | Rule::Var => 0,
        Rule::Lam | Rule::Rec | Rule::Ret | Rule::Op | Rule::VSub | Rule::CSub => 1,
        Rule::App | Rule::LetP | Rule::LetIp => 2,
        Rule::If | Rule::Han => 3,
        Rule::Hdlr => d.premises.len(),
    };
    expect(d.premises.len() == arity, || format!("expected {arity} premises, found {}", d.premises.len()))?;
    if d.rule != Rule::Hdlr && d.ty.is_none() {
        return Err("missing type".into());
    }
    if !matches!(d.rule, Rule::VSub | Rule::CSub) && d.sub.is_some() {
        return Err("only subsumption nodes carry a subtyping derivation".into());
    }
    let p = &d.premises;
    match (d.rule, &d.subject) {
        (Rule::Unit, Subject::Value(v)) => {
            expect(matches!(v.kind(), ValueKind::Unit), || "subject is not ()".into())?;
            expect(d.value_type() == Some(&VType::Unit), || "type is not Unit".into())
        }
        (Rule::Bool, Subject::Value(v)) => {
            expect(matches!(v.kind(), ValueKind::True | ValueKind::False), || "subject is not a boolean".into())?;
            expect(d.value_type() == Some(&VType::Bool), || "type is not Bool".into())
        }
        (Rule::Var, Subject::Value(v)) => {
            let ValueKind::Var(x) = v.kind() else {
                return Err("subject is not a variable".into());
            };
            expect(d.env.lookup(x).is_some() && d.env.lookup(x) == d.value_type(), || {
                format!("environment does not give `{x}` the type {}", d.ty.as_ref().unwrap())
            })
        }
        (Rule::Lam, Subject::Value(v)) => {
            let ValueKind::Lam(b, body) = v.kind() else {
                return Err("subject is not a function".into());
            };
            let Some(VType::Arrow(a, r)) = d.value_type() else {
                return Err("type is not a function type".into());
            };
            if let Some(ann) = &b.ann {
                expect(ann.to_value_type().ok().as_ref() == Some(a.as_ref()), || "binder annotation disagrees with the domain".into())?;
            }
            expect(p[0].env.extends(&d.env, &[(&b.name, a)]), || "body environment is not the extended one".into())?;
            expect(p[0].comp() == Some(body), || "body premise types a different term".into())?;
            expect(cty(&p[0])? == r.as_ref(), || "body type differs from the codomain".into())
        }
        (Rule::Rec, Subject::Value(v)) => {
            let ValueKind::Rec(b, body) = v.kind() else {
                return Err("subject is not a recursive function".into());
            };
            let t = d.value_type().unwrap();
            if let Some(ann) = &b.ann {
                expect(ann.to_value_type().ok().as_ref() == Some(t), || "binder annotation disagrees with the type".into())?;
            }
            expect(p[0].env.extends(&d.env, &[(&b.name, t)]), || "body environment is not the extended one".into())?;
            expect(p[0].value() == Some(body), || "body premise types a different term".into())?;
            expect(vty(&p[0])? == t, || "body type differs".into())
        }
        (Rule::If, Subject::Comp(c)) => {
            let CompKind::If(v, c1, c2) = c.kind() else {
                return Err("subject is not a conditional".into());
            };
            p.iter().try_for_each(|q| same_env(d, q))?;
            expect(p[0].value() == Some(v) && p[1].comp() == Some(c1) && p[2].comp() == Some(c2), || {
                "premises type different terms".into()
            })?;
            expect(vty(&p[0])? == &VType::Bool, || "guard is not Bool".into())?;
            let r = d.comp_type().unwrap();
            expect(cty(&p[1])? == r && cty(&p[2])? == r, || "branch types differ from the result".into())
        }
        (Rule::App, Subject::Comp(c)) => {
            let CompKind::App(f, a) = c.kind() else {
                return Err("subject is not an application".into());
            };
            p.iter().try_for_each(|q| same_env(d, q))?;
            expect(p[0].value() == Some(f) && p[1].value() == Some(a), || "premises type different terms".into())?;
            let VType::Arrow(dom, r) = vty(&p[0])? else {
                return Err("function premise is not a function type".into());
            };
            expect(vty(&p[1])? == dom.as_ref(), || "argument type differs from the domain".into())?;
            expect(d.comp_type() == Some(r.as_ref()), || "result type differs from the codomain".into())
        }
        (Rule::LetP | Rule::LetIp, Subject::Comp(c)) => {
            let CompKind::Let(x, c1, c2) = c.kind() else {
                return Err("subject is not a let".into());
            };
            same_env(d, &p[0])?;
            expect(p[0].comp() == Some(c1) && p[1].comp() == Some(c2), || "premises type different terms".into())?;
            let (r1, r2) = (cty(&p[0])?, cty(&p[1])?);
            expect(p[1].env.extends(&d.env, &[(x, r1.value_type())]), || "body environment is not the extended one".into())?;
            let r = d.comp_type().unwrap();
            if d.rule == Rule::LetP {
                expect(r1.is_pure() && r2.is_pure(), || "premises are not both pure".into())?;
                expect(r2 == r, || "result type differs from the body".into())
            } else {
                let (CType::Eff(_, in1, out1), CType::Eff(t2, in2, out2)) = (r1, r2) else {
                    return Err("premises are not both effectful".into());
                };
                expect(out2 == in1, || "body answer-out differs from the bound answer-in".into())?;
                expect(r == &CType::Eff(t2.clone(), in2.clone(), out1.clone()), || "result type does not chain the answers".into())
            }
        }
        (Rule::Ret, Subject::Comp(c)) => {
            let CompKind::Return(v) = c.kind() else {
                return Err("subject is not a return".into());
            };
            same_env(d, &p[0])?;
            expect(p[0].value() == Some(v), || "premise types a different term".into())?;
            expect(d.comp_type() == Some(&CType::pure(vty(&p[0])?.clone())), || "type is not the pure premise type".into())
        }
        (Rule::Op, Subject::Comp(c)) => {
            let CompKind::Op(op, v) = c.kind() else {
                return Err("subject is not an operation call".into());
            };
            let s = sig.atm.get(op).ok_or_else(|| format!("`{op}` is not in the signature"))?;
            same_env(d, &p[0])?;
            expect(p[0].value() == Some(v), || "premise types a different term".into())?;
            expect(vty(&p[0])? == &s.arg, || "argument type differs from the signature".into())?;
            let want = CType::eff(s.result.clone(), s.answer_in.clone(), s.answer_out.clone());
            expect(d.comp_type() == Some(&want), || "type differs from the signature".into())
        }
        (Rule::Hdlr, Subject::Handler(h)) => {
            expect(d.ty.is_none(), || "handlers have no type".into())?;
            let ops: BTreeSet<_> = h.clauses().iter().map(|c| &c.op).collect();
            expect(ops == sig.atm.keys().collect::<BTreeSet<_>>(), || "clauses do not cover exactly the signature".into())?;
            expect(p.len() == h.clauses().len(), || "one premise per clause expected".into())?;
            for (cl, q) in h.clauses().iter().zip(p) {
                let s = &sig.atm[&cl.op];
                let k = VType::arrow(s.result.clone(), s.answer_in.clone());
                expect(q.env.extends(&d.env, &[(&cl.param, &s.arg), (&cl.cont, &k)]), || {
                    format!("clause `{}` has the wrong environment", cl.op)
                })?;
                expect(q.comp() == Some(&cl.body), || format!("clause `{}` premise types a different term", cl.op))?;
                expect(cty(q)? == &s.answer_out, || format!("clause `{}` does not have the answer-out type", cl.op))?;
            }
            Ok(())
        }
        (Rule::Han, Subject::Comp(c)) => {
            let CompKind::Handle(h, body) = c.kind() else {
                return Err("subject is not a handling construct".into());
            };
            same_env(d, &p[0])?;
            same_env(d, &p[1])?;
            expect(p[0].rule == Rule::Hdlr && p[0].subject == Subject::Handler(h.clone()), || "first premise must type the handler".into())?;
            expect(p[1].comp() == Some(body), || "body premise types a different term".into())?;
            let CType::Eff(t, a, b) = cty(&p[1])? else {
                return Err("handled body is not effectful".into());
            };
            expect(p[2].env.extends(&d.env, &[(h.ret_binder(), t)]), || "return clause environment is wrong".into())?;
            expect(p[2].comp() == Some(h.ret_body()), || "return premise types a different term".into())?;
            expect(cty(&p[2])? == a.as_ref(), || "return clause type differs from the answer-in".into())?;
            expect(d.comp_type() == Some(b.as_ref()), || "result differs from the answer-out".into())
        }
        (Rule::VSub | Rule::CSub, s) => {
            same_env(d, &p[0])?;
            expect(&p[0].subject == s, || "premise types a different term".into())?;
            let kind_ok = match d.rule {
                Rule::VSub => matches!(d.ty, Some(AtmType::Value(_))),
                _ => matches!(d.ty, Some(AtmType::Comp(_))),
            };
            expect(kind_ok, || "type has the wrong kind".into())?;
            let sub = d.sub.as_ref().ok_or("missing subtyping derivation")?;
            validate_sub(sub)?;
            expect(Some(&sub.lhs) == p[0].ty.as_ref() && Some(&sub.rhs) == d.ty.as_ref(), || {
                "subtyping endpoints do not match the types".into()
            })
        }
        _ => Err("subject has the wrong kind for the rule".into()),
    }
}
