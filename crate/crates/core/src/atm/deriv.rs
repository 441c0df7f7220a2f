//! Typing derivations as data.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::subtype::{AtmType, SubDeriv};
use crate::ast::{Comp, Handler, Value};
use crate::name::Name;
use crate::types::{CType, VType};

/// Persistent typing environment; extension shares the tail.
#[derive(Clone, Default)]
pub struct AtmEnv(Option<Arc<EnvNode>>);

struct EnvNode {
    name: Name,
    ty: VType,
    next: AtmEnv,
    len: usize,
}

impl AtmEnv {
    pub fn new() -> AtmEnv {
        AtmEnv(None)
    }

    pub fn extend(&self, x: &Name, t: VType) -> AtmEnv {
        AtmEnv(Some(Arc::new(EnvNode {
            name: x.clone(),
            ty: t,
            next: self.clone(),
            len: self.len() + 1,
        })))
    }

    pub fn len(&self) -> usize {
        self.0.as_ref().map_or(0, |n| n.len)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_none()
    }

    pub fn lookup(&self, x: &Name) -> Option<&VType> {
        self.iter().find(|(n, _)| *n == x).map(|(_, t)| t)
    }

    /// Most recent binding first.
    pub fn iter(&self) -> impl Iterator<Item = (&Name, &VType)> {
        let mut cur = self.0.as_deref();
        std::iter::from_fn(move || {
            let n = cur?;
            cur = n.next.0.as_deref();
            Some((&n.name, &n.ty))
        })
    }

    /// The visible bindings as a map.
    pub fn to_map(&self) -> BTreeMap<Name, VType> {
        let mut out = BTreeMap::new();
        for (x, t) in self.iter() {
            out.entry(x.clone()).or_insert_with(|| t.clone());
        }
        out
    }

    /// `self` is `parent` extended with exactly `binds`, in order.
    pub fn extends(&self, parent: &AtmEnv, binds: &[(&Name, &VType)]) -> bool {
        let mut cur = self;
        for (x, t) in binds.iter().rev() {
            match &cur.0 {
                Some(n) if &n.name == *x && &n.ty == *t => cur = &n.next,
                _ => return false,
            }
        }
        cur.same(parent)
    }

    pub fn same(&self, other: &AtmEnv) -> bool {
        if self.len() != other.len() {
            return false;
        }
        let (mut a, mut b) = (self, other);
        loop {
            match (&a.0, &b.0) {
                (None, None) => return true,
                (Some(x), Some(y)) => {
                    if Arc::ptr_eq(x, y) {
                        return true;
                    }
                    if x.name != y.name || x.ty != y.ty {
                        return false;
                    }
                    a = &x.next;
                    b = &y.next;
                }
                _ => return false,
            }
        }
    }
}

impl From<&BTreeMap<Name, VType>> for AtmEnv {
    fn from(m: &BTreeMap<Name, VType>) -> AtmEnv {
        m.iter().fold(AtmEnv::new(), |env, (x, t)| env.extend(x, t.clone()))
    }
}

impl fmt::Debug for AtmEnv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.iter().map(|(x, t)| (x.to_string(), t.to_string()))).finish()
    }
}

impl Drop for EnvNode {
    fn drop(&mut self) {
        let mut next = self.next.0.take();
        while let Some(node) = next {
            match Arc::try_unwrap(node) {
                Ok(mut n) => next = n.next.0.take(),
                Err(_) => break,
            }
        }
    }
}

/// What a derivation node types.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Subject {
    Value(Value),
    Comp(Comp),
    Handler(Handler),
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Rule {
    Unit,
    Bool,
    Var,
    Lam,
    Rec,
    If,
    App,
    LetP,
    LetIp,
    Ret,
    Op,
    Hdlr,
    Han,
    VSub,
    CSub,
}

impl Rule {
    pub const ALL: [Rule; 15] = [
        Rule::Unit,
        Rule::Bool,
        Rule::Var,
        Rule::Lam,
        Rule::Rec,
        Rule::If,
        Rule::App,
        Rule::LetP,
        Rule::LetIp,
        Rule::Ret,
        Rule::Op,
        Rule::Hdlr,
        Rule::Han,
        Rule::VSub,
        Rule::CSub,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rule::Unit => "T-Unit",
            Rule::Bool => "T-Bool",
            Rule::Var => "T-Var",
            Rule::Lam => "T-Lam",
            Rule::Rec => "T-Rec",
            Rule::If => "T-If",
            Rule::App => "T-App",
            Rule::LetP => "T-LetP",
            Rule::LetIp => "T-LetIp",
            Rule::Ret => "T-Ret",
            Rule::Op => "T-Op",
            Rule::Hdlr => "T-Hdlr",
            Rule::Han => "T-Han",
            Rule::VSub => "T-VSub",
            Rule::CSub => "T-CSub",
        }
    }

    pub fn from_name(s: &str) -> Option<Rule> {
        Rule::ALL.into_iter().find(|r| r.name() == s)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One node of a typing derivation. `ty` is `None` only for `T-Hdlr`,
/// which types a handler without giving it a type; `sub` is set only for
/// the two subsumption rules.
///
/// Premise order follows the rules: `T-If` (guard, then, else), `T-App`
/// (function, argument), lets (bound, body), `T-Hdlr` (one per operation
/// clause, in clause order), `T-Han` (handler, body, return clause).
#[derive(Clone, Debug)]
pub struct TypeDeriv {
    pub rule: Rule,
    pub env: AtmEnv,
    pub subject: Subject,
    pub ty: Option<AtmType>,
    pub premises: Vec<TypeDeriv>,
    pub sub: Option<SubDeriv>,
}

impl TypeDeriv {
    pub fn value_type(&self) -> Option<&VType> {
        self.ty.as_ref().and_then(AtmType::as_value)
    }

    pub fn comp_type(&self) -> Option<&CType> {
        self.ty.as_ref().and_then(AtmType::as_comp)
    }

    pub fn value(&self) -> Option<&Value> {
        match &self.subject {
            Subject::Value(v) => Some(v),
            _ => None,
        }
    }

    pub fn comp(&self) -> Option<&Comp> {
        match &self.subject {
            Subject::Comp(c) => Some(c),
            _ => None,
        }
    }

    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(TypeDeriv::size).sum::<usize>()
    }

    /// Count of nodes using each rule.
    pub fn rule_counts(&self) -> BTreeMap<&'static str, usize> {
        let mut out = BTreeMap::new();
        let mut stack = vec![self];
        while let Some(d) = stack.pop() {
            *out.entry(d.rule.name()).or_insert(0) += 1;
            stack.extend(d.premises.iter());
        }
        out
    }
}
