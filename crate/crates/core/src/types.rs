//! Type syntax, simple types, ATM types and operation signatures.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::name::{Label, OpName};

/// Type annotations as written in source files. One syntax serves both type
/// systems; [`TyExpr::to_simple`] and [`TyExpr::to_value_type`] give the two
/// readings.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum TyExpr {
    Unit,
    Bool,
    Arrow(Box<TyExpr>, Box<TyExpr>),
    Record(Vec<(Label, TyExpr)>),
    /// `T / pure`
    Pure(Box<TyExpr>),
    /// `T / R1 => R2`
    Eff(Box<TyExpr>, Box<TyExpr>, Box<TyExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeSyntaxError {
    #[error("record types are not ATM types: {0}")]
    RecordInAtm(TyExpr),
    #[error("expected a value type, found computation type {0}")]
    ComputationAsValue(TyExpr),
    #[error("duplicate label `{0}` in record type")]
    DuplicateLabel(Label),
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum SimpleType {
    Unit,
    Bool,
    Arrow(Box<SimpleType>, Box<SimpleType>),
    Record(BTreeMap<Label, SimpleType>),
}

impl SimpleType {
    pub fn arrow(a: SimpleType, b: SimpleType) -> SimpleType {
        SimpleType::Arrow(Box::new(a), Box::new(b))
    }

    pub fn depth(&self) -> usize {
        match self {
            SimpleType::Unit | SimpleType::Bool => 1,
            SimpleType::Arrow(a, b) => 1 + a.depth().max(b.depth()),
            SimpleType::Record(fs) => 1 + fs.values().map(SimpleType::depth).max().unwrap_or(0),
        }
    }
}

/// ATM value types.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum VType {
    Unit,
    Bool,
    Arrow(Arc<VType>, Arc<CType>),
}

/// ATM computation types.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum CType {
    Pure(VType),
    Eff(VType, Arc<CType>, Arc<CType>),
}

impl VType {
    pub fn arrow(a: VType, c: CType) -> VType {
        VType::Arrow(Arc::new(a), Arc::new(c))
    }

    pub fn is_base(&self) -> bool {
        matches!(self, VType::Unit | VType::Bool)
    }

    pub fn depth(&self) -> usize {
        match self {
            VType::Unit | VType::Bool => 1,
            VType::Arrow(a, c) => 1 + a.depth().max(c.depth()),
        }
    }
}

impl CType {
    pub fn pure(t: VType) -> CType {
        CType::Pure(t)
    }

    pub fn eff(t: VType, ans_in: CType, ans_out: CType) -> CType {
        CType::Eff(t, Arc::new(ans_in), Arc::new(ans_out))
    }

    pub fn is_pure(&self) -> bool {
        matches!(self, CType::Pure(_))
    }

    pub fn value_type(&self) -> &VType {
        match self {
            CType::Pure(t) | CType::Eff(t, _, _) => t,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            CType::Pure(t) => 1 + t.depth(),
            CType::Eff(t, a, b) => 1 + t.depth().max(a.depth()).max(b.depth()),
        }
    }
}

impl TyExpr {
    pub fn arrow(a: TyExpr, b: TyExpr) -> TyExpr {
        TyExpr::Arrow(Box::new(a), Box::new(b))
    }

    pub fn is_computation(&self) -> bool {
        matches!(self, TyExpr::Pure(_) | TyExpr::Eff(..))
    }

    /// Simple-type reading: computation annotations are erased to their
    /// result type, so `T / R1 => R2` reads as `T`.
    pub fn to_simple(&self) -> Result<SimpleType, TypeSyntaxError> {
        Ok(match self {
            TyExpr::Unit => SimpleType::Unit,
            TyExpr::Bool => SimpleType::Bool,
            TyExpr::Arrow(a, b) => SimpleType::arrow(a.to_simple()?, b.to_simple()?),
            TyExpr::Record(fs) => {
                let mut map = BTreeMap::new();
                for (l, t) in fs {
                    if map.insert(l.clone(), t.to_simple()?).is_some() {
                        return Err(TypeSyntaxError::DuplicateLabel(l.clone()));
                    }
                }
                SimpleType::Record(map)
            }
            TyExpr::Pure(t) | TyExpr::Eff(t, _, _) => t.to_simple()?,
        })
    }

    /// ATM value-type reading. An arrow whose codomain is written without
    /// `/` has a pure codomain, so every simple type without records reads
    /// as the corresponding pure ATM type.
    pub fn to_value_type(&self) -> Result<VType, TypeSyntaxError> {
        Ok(match self {
            TyExpr::Unit => VType::Unit,
            TyExpr::Bool => VType::Bool,
            TyExpr::Arrow(a, b) => VType::arrow(a.to_value_type()?, b.to_comp_type()?),
            TyExpr::Record(_) => return Err(TypeSyntaxError::RecordInAtm(self.clone())),
            TyExpr::Pure(_) | TyExpr::Eff(..) => return Err(TypeSyntaxError::ComputationAsValue(self.clone())),
        })
    }

    /// ATM computation-type reading; a bare value type `T` means `T / pure`.
    pub fn to_comp_type(&self) -> Result<CType, TypeSyntaxError> {
        Ok(match self {
            TyExpr::Pure(t) => CType::Pure(t.to_value_type()?),
            TyExpr::Eff(t, a, b) => CType::eff(t.to_value_type()?, a.to_comp_type()?, b.to_comp_type()?),
            _ => CType::Pure(self.to_value_type()?),
        })
    }
}

impl From<&SimpleType> for TyExpr {
    fn from(t: &SimpleType) -> TyExpr {
        match t {
            SimpleType::Unit => TyExpr::Unit,
            SimpleType::Bool => TyExpr::Bool,
            SimpleType::Arrow(a, b) => TyExpr::arrow(a.as_ref().into(), b.as_ref().into()),
            SimpleType::Record(fs) => TyExpr::Record(fs.iter().map(|(l, t)| (l.clone(), t.into())).collect()),
        }
    }
}

impl From<&VType> for TyExpr {
    fn from(t: &VType) -> TyExpr {
        match t {
            VType::Unit => TyExpr::Unit,
            VType::Bool => TyExpr::Bool,
            VType::Arrow(a, c) => TyExpr::arrow(a.as_ref().into(), c.as_ref().into()),
        }
    }
}

impl From<&CType> for TyExpr {
    fn from(t: &CType) -> TyExpr {
        match t {
            CType::Pure(t) => TyExpr::Pure(Box::new(t.into())),
            CType::Eff(t, a, b) => TyExpr::Eff(
                Box::new(t.into()),
                Box::new(a.as_ref().into()),
                Box::new(b.as_ref().into()),
            ),
        }
    }
}

// ---------------------------------------------------------------------------
// printing

type Aliases<'a> = &'a [(String, TyExpr)];

impl TyExpr {
    fn alias<'a>(&self, al: Aliases<'a>) -> Option<&'a str> {
        if matches!(self, TyExpr::Unit | TyExpr::Bool) {
            return None;
        }
        al.iter().rev().find(|(_, t)| t == self).map(|(n, _)| n.as_str())
    }

    fn fmt_arrow(&self, f: &mut fmt::Formatter<'_>, al: Aliases) -> fmt::Result {
        match self {
            TyExpr::Arrow(a, b) if self.alias(al).is_none() => {
                a.fmt_slash(f, al)?;
                f.write_str(" -> ")?;
                b.fmt_arrow(f, al)
            }
            _ => self.fmt_slash(f, al),
        }
    }

    fn fmt_slash(&self, f: &mut fmt::Formatter<'_>, al: Aliases) -> fmt::Result {
        if self.alias(al).is_some() {
            return self.fmt_atom(f, al);
        }
        match self {
            TyExpr::Pure(t) => {
                t.fmt_atom(f, al)?;
                f.write_str(" / pure")
            }
            TyExpr::Eff(t, a, b) => {
                t.fmt_atom(f, al)?;
                f.write_str(" / ")?;
                a.fmt_answer(f, al)?;
                f.write_str(" => ")?;
                b.fmt_answer(f, al)
            }
            _ => self.fmt_atom(f, al),
        }
    }

    fn fmt_answer(&self, f: &mut fmt::Formatter<'_>, al: Aliases) -> fmt::Result {
        if self.alias(al).is_some() {
            return self.fmt_atom(f, al);
        }
        match self {
            TyExpr::Pure(t) => {
                t.fmt_atom(f, al)?;
                f.write_str("/pure")
            }
            _ => {
                f.write_str("(")?;
                self.fmt_arrow(f, al)?;
                f.write_str(")")
            }
        }
    }

    fn fmt_atom(&self, f: &mut fmt::Formatter<'_>, al: Aliases) -> fmt::Result {
        if let Some(name) = self.alias(al) {
            return f.write_str(name);
        }
        match self {
            TyExpr::Unit => f.write_str("Unit"),
            TyExpr::Bool => f.write_str("Bool"),
            TyExpr::Record(fs) => {
                f.write_str("{")?;
                for (i, (l, t)) in fs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{l} : ")?;
                    t.fmt_arrow(f, al)?;
                }
                f.write_str("}")
            }
            _ => {
                f.write_str("(")?;
                self.fmt_arrow(f, al)?;
                f.write_str(")")
            }
        }
    }

    /// Renders the type, writing alias names in place of their expansions.
    pub fn display_with<'a>(&'a self, aliases: &'a [(String, TyExpr)]) -> impl fmt::Display + 'a {
        struct D<'a>(&'a TyExpr, &'a [(String, TyExpr)]);
        impl fmt::Display for D<'_> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt_arrow(f, self.1)
            }
        }
        D(self, aliases)
    }
}

impl fmt::Display for TyExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_arrow(f, &[])
    }
}

impl fmt::Display for SimpleType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        TyExpr::from(self).fmt(f)
    }
}

impl fmt::Display for VType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        TyExpr::from(self).fmt(f)
    }
}

impl fmt::Display for CType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        TyExpr::from(self).fmt(f)
    }
}

// ---------------------------------------------------------------------------
// signatures

/// ATM type of an operation: `arg -> result / answer_in => answer_out`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct AtmOpSig {
    pub arg: VType,
    pub result: VType,
    pub answer_in: CType,
    pub answer_out: CType,
}

impl AtmOpSig {
    /// The operation's type as a single value type.
    pub fn as_arrow(&self) -> VType {
        VType::arrow(
            self.arg.clone(),
            CType::eff(self.result.clone(), self.answer_in.clone(), self.answer_out.clone()),
        )
    }
}

/// Operation types for both systems.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Signature {
    pub st: BTreeMap<OpName, (SimpleType, SimpleType)>,
    pub atm: BTreeMap<OpName, AtmOpSig>,
}

impl Signature {
    pub fn new() -> Signature {
        Signature::default()
    }

    pub fn with_st(mut self, op: &str, arg: SimpleType, result: SimpleType) -> Signature {
        self.st.insert(Label::new(op), (arg, result));
        self
    }

    pub fn with_atm(mut self, op: &str, entry: AtmOpSig) -> Signature {
        self.atm.insert(Label::new(op), entry);
        self
    }

    pub fn mentions(&self, op: &OpName) -> bool {
        self.st.contains_key(op) || self.atm.contains_key(op)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_reading_erases_effects() {
        let t = TyExpr::arrow(
            TyExpr::Unit,
            TyExpr::Eff(
                Box::new(TyExpr::Bool),
                Box::new(TyExpr::Pure(Box::new(TyExpr::Bool))),
                Box::new(TyExpr::Pure(Box::new(TyExpr::Bool))),
            ),
        );
        assert_eq!(t.to_simple().unwrap(), SimpleType::arrow(SimpleType::Unit, SimpleType::Bool));
    }

    #[test]
    fn bare_codomain_reads_pure() {
        let t = TyExpr::arrow(TyExpr::Unit, TyExpr::Bool);
        assert_eq!(t.to_value_type().unwrap(), VType::arrow(VType::Unit, CType::Pure(VType::Bool)));
    }

    #[test]
    fn records_are_not_atm_types() {
        let t = TyExpr::Record(vec![(Label::new("a"), TyExpr::Unit)]);
        assert!(matches!(t.to_value_type(), Err(TypeSyntaxError::RecordInAtm(_))));
    }

    #[test]
    fn display_uses_explicit_answers() {
        let ty = CType::eff(VType::Unit, CType::Pure(VType::Unit), CType::Pure(VType::Bool));
        assert_eq!(ty.to_string(), "Unit / Unit/pure => Bool/pure");
        let arr = VType::arrow(VType::Unit, ty);
        assert_eq!(arr.to_string(), "Unit -> Unit / Unit/pure => Bool/pure");
    }
}
