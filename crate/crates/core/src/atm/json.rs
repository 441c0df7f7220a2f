//! JSON rendering of derivations.

use serde_json::{json, Value as Json};

use super::deriv::{Subject, TypeDeriv};
use super::subtype::SubDeriv;
use crate::surface;

fn subject(s: &Subject) -> String {
    match s {
        Subject::Value(v) => surface::print_value(v),
        Subject::Comp(c) => surface::print_comp(c),
        Subject::Handler(h) => surface::print_handler(h),
    }
}

pub fn sub_deriv_to_json(d: &SubDeriv) -> Json {
    json!({
        "rule": d.rule.name(),
        "lhs": d.lhs.to_string(),
        "rhs": d.rhs.to_string(),
        "premises": d.premises.iter().map(sub_deriv_to_json).collect::<Vec<_>>(),
    })
}

/// `{rule, env, subject, type, premises, sub}`; `type` is null for handler
/// nodes and `sub` is null outside the subsumption rules.
pub fn deriv_to_json(d: &TypeDeriv) -> Json {
    let mut env: Vec<Json> = d
        .env
        .iter()
        .map(|(x, t)| json!({"name": x.to_string(), "type": t.to_string()}))
        .collect();
    env.reverse();
    json!({
        "rule": d.rule.name(),
        "env": env,
        "subject": subject(&d.subject),
        "type": d.ty.as_ref().map(|t| t.to_string()),
        "premises": d.premises.iter().map(deriv_to_json).collect::<Vec<_>>(),
        "sub": d.sub.as_ref().map(sub_deriv_to_json),
    })
}
