//! Algorithmic subtyping. The rules are syntax directed on the shapes of
//! both sides, so the search is a plain structural recursion.

use std::fmt;

use crate::types::{CType, VType};

/// Either kind of ATM type.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum AtmType {
    Value(VType),
    Comp(CType),
}

impl AtmType {
    pub fn as_value(&self) -> Option<&VType> {
        match self {
            AtmType::Value(t) => Some(t),
            AtmType::Comp(_) => None,
        }
    }

    pub fn as_comp(&self) -> Option<&CType> {
        match self {
            AtmType::Comp(t) => Some(t),
            AtmType::Value(_) => None,
        }
    }
}

impl fmt::Display for AtmType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AtmType::Value(t) => t.fmt(f),
            AtmType::Comp(t) => t.fmt(f),
        }
    }
}

impl From<VType> for AtmType {
    fn from(t: VType) -> AtmType {
        AtmType::Value(t)
    }
}

impl From<CType> for AtmType {
    fn from(t: CType) -> AtmType {
        AtmType::Comp(t)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum SubRule {
    Base,
    Arr,
    Pure,
    Ipure,
    Embed,
}

impl SubRule {
    pub fn name(self) -> &'static str {
        match self {
            SubRule::Base => "S-Base",
            SubRule::Arr => "S-Arr",
            SubRule::Pure => "S-Pure",
            SubRule::Ipure => "S-Ipure",
            SubRule::Embed => "S-Embed",
        }
    }

    pub fn from_name(s: &str) -> Option<SubRule> {
        [SubRule::Base, SubRule::Arr, SubRule::Pure, SubRule::Ipure, SubRule::Embed]
            .into_iter()
            .find(|r| r.name() == s)
    }
}

/// A subtyping derivation. Premises are in rule order:
///
/// * `S-Arr`: domain (`τ2 ≤ τ1`), codomain (`ρ1 ≤ ρ2`)
/// * `S-Pure`: result type
/// * `S-Ipure`: result type, answer-in (`ρ2 ≤ ρ1`), answer-out (`ρ1' ≤ ρ2'`)
/// * `S-Embed`: result type, answers (`ρ1 ≤ ρ2` of the right side)
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SubDeriv {
    pub rule: SubRule,
    pub lhs: AtmType,
    pub rhs: AtmType,
    pub premises: Vec<SubDeriv>,
}

impl SubDeriv {
    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(SubDeriv::size).sum::<usize>()
    }
}

/// `τ1 ≤ τ2` with a witness, if it holds.
pub fn subtype_value(t1: &VType, t2: &VType) -> Option<SubDeriv> {
    let premises = match (t1, t2) {
        (VType::Unit, VType::Unit) | (VType::Bool, VType::Bool) => {
            return Some(SubDeriv {
                rule: SubRule::Base,
                lhs: t1.clone().into(),
                rhs: t2.clone().into(),
                premises: vec![],
            })
        }
        (VType::Arrow(a1, r1), VType::Arrow(a2, r2)) => vec![subtype_value(a2, a1)?, subtype_comp(r1, r2)?],
        _ => return None,
    };
    Some(SubDeriv {
        rule: SubRule::Arr,
        lhs: t1.clone().into(),
        rhs: t2.clone().into(),
        premises,
    })
}

/// `ρ1 ≤ ρ2` with a witness, if it holds.
pub fn subtype_comp(r1: &CType, r2: &CType) -> Option<SubDeriv> {
    let (rule, premises) = match (r1, r2) {
        (CType::Pure(t1), CType::Pure(t2)) => (SubRule::Pure, vec![subtype_value(t1, t2)?]),
        (CType::Pure(t1), CType::Eff(t2, a, b)) => (SubRule::Embed, vec![subtype_value(t1, t2)?, subtype_comp(a, b)?]),
        (CType::Eff(t1, a1, b1), CType::Eff(t2, a2, b2)) => (
            SubRule::Ipure,
            vec![subtype_value(t1, t2)?, subtype_comp(a2, a1)?, subtype_comp(b1, b2)?],
        ),
        (CType::Eff(..), CType::Pure(_)) => return None,
    };
    Some(SubDeriv {
        rule,
        lhs: r1.clone().into(),
        rhs: r2.clone().into(),
        premises,
    })
}

/// Subtyping on either kind; mixed kinds are never related.
pub fn subtype(t1: &AtmType, t2: &AtmType) -> Option<SubDeriv> {
    match (t1, t2) {
        (AtmType::Value(a), AtmType::Value(b)) => subtype_value(a, b),
        (AtmType::Comp(a), AtmType::Comp(b)) => subtype_comp(a, b),
        _ => None,
    }
}

/// The relation alone, without building a witness.
pub fn is_subtype_value(t1: &VType, t2: &VType) -> bool {
    match (t1, t2) {
        (VType::Unit, VType::Unit) | (VType::Bool, VType::Bool) => true,
        (VType::Arrow(a1, r1), VType::Arrow(a2, r2)) => is_subtype_value(a2, a1) && is_subtype_comp(r1, r2),
        _ => false,
    }
}

pub fn is_subtype_comp(r1: &CType, r2: &CType) -> bool {
    match (r1, r2) {
        (CType::Pure(t1), CType::Pure(t2)) => is_subtype_value(t1, t2),
        (CType::Pure(t1), CType::Eff(t2, a, b)) => is_subtype_value(t1, t2) && is_subtype_comp(a, b),
        (CType::Eff(t1, a1, b1), CType::Eff(t2, a2, b2)) => {
            is_subtype_value(t1, t2) && is_subtype_comp(a2, a1) && is_subtype_comp(b1, b2)
        }
        (CType::Eff(..), CType::Pure(_)) => false,
    }
}

/// Checks that every node instantiates its rule with the right endpoints.
pub fn validate_sub(d: &SubDeriv) -> Result<(), String> {
    let fail = |msg: &str| Err(format!("{} node `{} <= {}`: {msg}", d.rule.name(), d.lhs, d.rhs));
    let ends = |i: usize, l: AtmType, r: AtmType| -> Result<(), String> {
        let p = &d.premises[i];
        if p.lhs != l || p.rhs != r {
            return Err(format!(
                "{} node `{} <= {}`: premise {} proves `{} <= {}`, expected `{l} <= {r}`",
                d.rule.name(),
                d.lhs,
                d.rhs,
                i + 1,
                p.lhs,
                p.rhs
            ));
        }
        Ok(())
    };
    let arity = match d.rule {
        SubRule::Base => 0,
        SubRule::Pure => 1,
        SubRule::Arr | SubRule::Embed => 2,
        SubRule::Ipure => 3,
    };
    if d.premises.len() != arity {
        return fail(&format!("expected {arity} premises, found {}", d.premises.len()));
    }
    match (d.rule, &d.lhs, &d.rhs) {
        (SubRule::Base, AtmType::Value(a), AtmType::Value(b)) if a == b && a.is_base() => {}
        (SubRule::Arr, AtmType::Value(VType::Arrow(a1, r1)), AtmType::Value(VType::Arrow(a2, r2))) => {
            ends(0, (**a2).clone().into(), (**a1).clone().into())?;
            ends(1, (**r1).clone().into(), (**r2).clone().into())?;
        }
        (SubRule::Pure, AtmType::Comp(CType::Pure(t1)), AtmType::Comp(CType::Pure(t2))) => {
            ends(0, t1.clone().into(), t2.clone().into())?;
        }
        (SubRule::Embed, AtmType::Comp(CType::Pure(t1)), AtmType::Comp(CType::Eff(t2, a, b))) => {
            ends(0, t1.clone().into(), t2.clone().into())?;
            ends(1, (**a).clone().into(), (**b).clone().into())?;
        }
        (SubRule::Ipure, AtmType::Comp(CType::Eff(t1, a1, b1)), AtmType::Comp(CType::Eff(t2, a2, b2))) => {
            ends(0, t1.clone().into(), t2.clone().into())?;
            ends(1, (**a2).clone().into(), (**a1).clone().into())?;
            ends(2, (**b1).clone().into(), (**b2).clone().into())?;
        }
        _ => return fail("endpoints do not fit the rule"),
    }
    d.premises.iter().try_for_each(validate_sub)
}

/// Glues `a ≤ b` and `b ≤ c` into `a ≤ c`.
pub fn compose(d1: &SubDeriv, d2: &SubDeriv) -> Option<SubDeriv> {
    if d1.rhs != d2.lhs {
        return None;
    }
    let p = |i: usize, j: usize| compose(&d1.premises[i], &d2.premises[j]);
    // contravariant positions compose the other way round
    let q = |i: usize, j: usize| compose(&d2.premises[j], &d1.premises[i]);
    let (rule, premises) = match (d1.rule, d2.rule) {
        (SubRule::Base, SubRule::Base) => (SubRule::Base, vec![]),
        (SubRule::Arr, SubRule::Arr) => (SubRule::Arr, vec![q(0, 0)?, p(1, 1)?]),
        (SubRule::Pure, SubRule::Pure) => (SubRule::Pure, vec![p(0, 0)?]),
        (SubRule::Pure, SubRule::Embed) => (SubRule::Embed, vec![p(0, 0)?, d2.premises[1].clone()]),
        (SubRule::Embed, SubRule::Ipure) => {
            // a ≤ b from the embed, then b ≤ b' and a' ≤ a from the Ipure:
            // the new answers are a' ≤ b'
            let ans = compose(&compose(&d2.premises[1], &d1.premises[1])?, &d2.premises[2])?;
            (SubRule::Embed, vec![p(0, 0)?, ans])
        }
        (SubRule::Ipure, SubRule::Ipure) => (SubRule::Ipure, vec![p(0, 0)?, q(1, 1)?, p(2, 2)?]),
        _ => return None,
    };
    Some(SubDeriv {
        rule,
        lhs: d1.lhs.clone(),
        rhs: d2.rhs.clone(),
        premises,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pure(t: VType) -> CType {
        CType::pure(t)
    }

    #[test]
    fn base_is_reflexive() {
        let d = subtype_value(&VType::Bool, &VType::Bool).unwrap();
        assert_eq!(d.rule, SubRule::Base);
        assert!(subtype_value(&VType::Bool, &VType::Unit).is_none());
    }

    #[test]
    fn pure_embeds_into_effectful() {
        let rho = pure(VType::Unit);
        let d = subtype_comp(&pure(VType::Bool), &CType::eff(VType::Bool, rho.clone(), rho)).unwrap();
        assert_eq!(d.rule, SubRule::Embed);
        assert!(validate_sub(&d).is_ok());
    }

    #[test]
    fn effectful_never_below_pure() {
        let rho = pure(VType::Unit);
        assert!(subtype_comp(&CType::eff(VType::Bool, rho.clone(), rho), &pure(VType::Bool)).is_none());
    }

    #[test]
    fn answer_in_is_contravariant() {
        let u = pure(VType::Unit);
        let e = CType::eff(VType::Unit, u.clone(), u.clone());
        // u ≤ e but not e ≤ u
        let l = CType::eff(VType::Bool, e.clone(), e.clone());
        let r = CType::eff(VType::Bool, u.clone(), e.clone());
        assert!(subtype_comp(&l, &r).is_some());
        assert!(subtype_comp(&r, &l).is_none());
    }

    #[test]
    fn tampered_endpoints_fail_validation() {
        let mut d = subtype_comp(&pure(VType::Bool), &pure(VType::Bool)).unwrap();
        d.rhs = pure(VType::Unit).into();
        assert!(validate_sub(&d).is_err());
    }
}
