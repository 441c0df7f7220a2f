//! Derivation-directed CPS transformation into the handler-free fragment.
//!
//! Effectful computations become functions of a handler record and a
//! continuation. Every `@` of the translation rules is reduced at transform
//! time by [`static_apply`]; only applications whose head is not a literal
//! function survive into the target. Every emitted binder carries its simple
//! type so the target checks without inference.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::ast::{self, Binder, Comp, CompKind, Term, Value, ValueKind};
use crate::atm::{validate_derivation, validate_sub, AtmType, Rule, Subject, SubDeriv, SubRule, TypeDeriv};
use crate::name::{Label, Name, NameSupply};
use crate::simple::StEnv;
use crate::types::{CType, Signature, SimpleType, TyExpr, VType};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CpsError {
    /// `⟦Σ⟧` would contain itself: some operation type mentions an
    /// effectful computation type.
    #[error("operation `{op}` has an effectful type inside its signature entry, so the handler record type would be infinite")]
    CircularSignature { op: Label },
    #[error("invalid derivation: {0}")]
    InvalidDerivation(String),
}

type R<T> = Result<T, CpsError>;

fn effect_free_v(t: &VType) -> bool {
    match t {
        VType::Unit | VType::Bool => true,
        VType::Arrow(a, r) => effect_free_v(a) && effect_free_c(r),
    }
}

fn effect_free_c(r: &CType) -> bool {
    match r {
        CType::Pure(t) => effect_free_v(t),
        CType::Eff(..) => false,
    }
}

/// The type translation for one signature.
#[derive(Clone, Debug)]
pub struct CpsTypes {
    sig: Signature,
    sigma: SimpleType,
}

impl CpsTypes {
    pub fn new(sig: &Signature) -> R<CpsTypes> {
        let mut fields = BTreeMap::new();
        for (op, s) in &sig.atm {
            let ok = effect_free_v(&s.arg)
                && effect_free_v(&s.result)
                && effect_free_c(&s.answer_in)
                && effect_free_c(&s.answer_out);
            if !ok {
                return Err(CpsError::CircularSignature { op: op.clone() });
            }
            let placeholder = SimpleType::Record(BTreeMap::new());
            let t = |x: &VType| value_type_with(&placeholder, x);
            let c = |x: &CType| comp_type_with(&placeholder, x);
            let k = SimpleType::arrow(t(&s.result), c(&s.answer_in));
            fields.insert(op.clone(), SimpleType::arrow(t(&s.arg), SimpleType::arrow(k, c(&s.answer_out))));
        }
        Ok(CpsTypes {
            sig: sig.clone(),
            sigma: SimpleType::Record(fields),
        })
    }

    /// `⟦Σ⟧`, the type of handler records.
    pub fn sigma(&self) -> &SimpleType {
        &self.sigma
    }

    pub fn signature(&self) -> &Signature {
        &self.sig
    }

    pub fn value(&self, t: &VType) -> SimpleType {
        value_type_with(&self.sigma, t)
    }

    pub fn comp(&self, r: &CType) -> SimpleType {
        comp_type_with(&self.sigma, r)
    }

    pub fn any(&self, t: &AtmType) -> SimpleType {
        match t {
            AtmType::Value(t) => self.value(t),
            AtmType::Comp(r) => self.comp(r),
        }
    }

    /// `⟦Γ⟧`.
    pub fn env(&self, env: &BTreeMap<Name, VType>) -> StEnv {
        env.iter().map(|(x, t)| (x.clone(), self.value(t))).collect()
    }
}

fn value_type_with(sigma: &SimpleType, t: &VType) -> SimpleType {
    match t {
        VType::Unit => SimpleType::Unit,
        VType::Bool => SimpleType::Bool,
        VType::Arrow(a, r) => SimpleType::arrow(value_type_with(sigma, a), comp_type_with(sigma, r)),
    }
}

fn comp_type_with(sigma: &SimpleType, r: &CType) -> SimpleType {
    match r {
        CType::Pure(t) => value_type_with(sigma, t),
        CType::Eff(t, a, b) => SimpleType::arrow(
            sigma.clone(),
            SimpleType::arrow(
                SimpleType::arrow(value_type_with(sigma, t), comp_type_with(sigma, a)),
                comp_type_with(sigma, b),
            ),
        ),
    }
}

/// `⟦τ⟧`, `⟦ρ⟧` under `sig`.
pub fn cps_type(sig: &Signature, t: &AtmType) -> R<SimpleType> {
    Ok(CpsTypes::new(sig)?.any(t))
}

/// `⟦Σ⟧`.
pub fn cps_signature(sig: &Signature) -> R<SimpleType> {
    Ok(CpsTypes::new(sig)?.sigma)
}

fn to_term(c: Comp) -> Term {
    match c.kind() {
        CompKind::Return(v) => Term::Value(v.clone()),
        _ => Term::Comp(c),
    }
}

fn to_comp(t: Term) -> Comp {
    match t {
        Term::Value(v) => Comp::ret(v),
        Term::Comp(c) => c,
    }
}

/// `f @ a`. A literal function head is reduced now: by substitution when
/// the argument is a value, by a `let` when it is a computation. Any other
/// head gives a residual application, with a computation argument or head
/// bound first.
pub fn static_apply(f: Term, a: Term, supply: &mut NameSupply) -> Term {
    match f {
        Term::Value(fv) => match (fv.kind(), a) {
            (ValueKind::Lam(b, body), Term::Value(av)) => to_term(body.subst(&b.name, &av)),
            (ValueKind::Lam(b, body), Term::Comp(ac)) => {
                if let CompKind::Return(r) = body.kind() {
                    if matches!(r.kind(), ValueKind::Var(y) if *y == b.name) {
                        return Term::Comp(ac);
                    }
                }
                Term::Comp(Comp::let_(b.name.clone(), ac, body.clone()))
            }
            (_, Term::Value(av)) => Term::Comp(Comp::app(fv, av)),
            (_, Term::Comp(ac)) => {
                let z = supply.fresh("z");
                Term::Comp(Comp::let_(z.clone(), ac, Comp::app(fv, Value::var(z))))
            }
        },
        Term::Comp(fc) => {
            let g = supply.fresh("g");
            let inner = static_apply(Term::Value(Value::var(g.clone())), a, supply);
            Term::Comp(Comp::let_(g, fc, to_comp(inner)))
        }
    }
}

/// The transformation state: type translation plus a fresh-name supply.
pub struct Cps {
    types: CpsTypes,
    supply: NameSupply,
}

impl Cps {
    /// Fresh names start above `max_id`, the largest tag in the source.
    pub fn new(sig: &Signature, max_id: u32) -> R<Cps> {
        Ok(Cps {
            types: CpsTypes::new(sig)?,
            supply: NameSupply::above(max_id),
        })
    }

    pub fn types(&self) -> &CpsTypes {
        &self.types
    }

    fn fresh(&mut self, base: &str, ty: &SimpleType) -> Binder {
        Binder::annotated(self.supply.fresh(base), TyExpr::from(ty))
    }

    fn lam(b: &Binder, body: Term) -> Term {
        Term::Value(Value::lam(b.clone(), to_comp(body)))
    }

    fn var(b: &Binder) -> Term {
        Term::Value(Value::var(b.name.clone()))
    }

    fn app(&mut self, f: Term, a: Term) -> Term {
        static_apply(f, a, &mut self.supply)
    }

    /// The coercion for a subtyping derivation, a function value of type
    /// `⟦lhs⟧ → ⟦rhs⟧`.
    pub fn sub(&mut self, d: &SubDeriv) -> R<Value> {
        validate_sub(d).map_err(CpsError::InvalidDerivation)?;
        Ok(self.sub_unchecked(d))
    }

    fn sub_unchecked(&mut self, d: &SubDeriv) -> Value {
        let t = match (d.rule, &d.lhs, &d.rhs) {
            // A reflexive coercion is an eta-expansion of the identity. Emitting
            // the identity keeps state that loops through it from growing.
            (_, lhs, rhs) if lhs == rhs => {
                let x = self.fresh("x", &self.types.any(lhs));
                Self::lam(&x, Self::var(&x))
            }
            (SubRule::Base, lhs, _) => {
                let x = self.fresh("x", &self.types.any(lhs));
                Self::lam(&x, Self::var(&x))
            }
            (SubRule::Arr, lhs, AtmType::Value(VType::Arrow(a2, _))) => {
                let f = self.fresh("f", &self.types.any(lhs));
                let x = self.fresh("x", &self.types.value(a2));
                let dom = Term::Value(self.sub_unchecked(&d.premises[0]));
                let cod = Term::Value(self.sub_unchecked(&d.premises[1]));
                let arg = self.app(dom, Self::var(&x));
                let call = self.app(Self::var(&f), arg);
                let body = self.app(cod, call);
                Self::lam(&f, Self::lam(&x, body))
            }
            (SubRule::Pure, lhs, _) => {
                let x = self.fresh("x", &self.types.any(lhs));
                let inner = Term::Value(self.sub_unchecked(&d.premises[0]));
                let body = self.app(inner, Self::var(&x));
                Self::lam(&x, body)
            }
            (SubRule::Ipure, AtmType::Comp(CType::Eff(t1, _, _)), AtmType::Comp(CType::Eff(t2, a2, _))) => {
                // λx.λh.λk. ⟦ρ1'≤ρ2'⟧@(x@h@λy. ⟦ρ2≤ρ1⟧@(k@(⟦τ1≤τ2⟧@y)))
                let x = self.fresh("x", &self.types.any(&d.lhs));
                let h = self.fresh("h", &self.types.sigma.clone());
                let k_ty = SimpleType::arrow(self.types.value(t2), self.types.comp(a2));
                let k = self.fresh("k", &k_ty);
                let y = self.fresh("y", &self.types.value(t1));
                let res = Term::Value(self.sub_unchecked(&d.premises[0]));
                let ans_in = Term::Value(self.sub_unchecked(&d.premises[1]));
                let ans_out = Term::Value(self.sub_unchecked(&d.premises[2]));
                let ry = self.app(res, Self::var(&y));
                let ky = self.app(Self::var(&k), ry);
                let cont = self.app(ans_in, ky);
                let cont = Self::lam(&y, cont);
                let xh = self.app(Self::var(&x), Self::var(&h));
                let call = self.app(xh, cont);
                let body = self.app(ans_out, call);
                Self::lam(&x, Self::lam(&h, Self::lam(&k, body)))
            }
            (SubRule::Embed, lhs, AtmType::Comp(CType::Eff(t2, a, _))) => {
                // λx.λh.λk. ⟦ρ1≤ρ2⟧@(k@(⟦τ1≤τ2⟧@x))
                let x = self.fresh("x", &self.types.any(lhs));
                let h = self.fresh("h", &self.types.sigma.clone());
                let k_ty = SimpleType::arrow(self.types.value(t2), self.types.comp(a));
                let k = self.fresh("k", &k_ty);
                let res = Term::Value(self.sub_unchecked(&d.premises[0]));
                let ans = Term::Value(self.sub_unchecked(&d.premises[1]));
                let rx = self.app(res, Self::var(&x));
                let kx = self.app(Self::var(&k), rx);
                let body = self.app(ans, kx);
                Self::lam(&x, Self::lam(&h, Self::lam(&k, body)))
            }
            _ => unreachable!("validated subtyping derivation"),
        };
        match t {
            Term::Value(v) => v,
            Term::Comp(_) => unreachable!("coercions start with a lambda"),
        }
    }

    /// The target of a typing derivation. Value derivations give values;
    /// computation derivations give a value or a computation, a value
    /// standing for `return v`.
    pub fn term(&mut self, sig: &Signature, d: &TypeDeriv) -> R<Term> {
        validate_derivation(sig, d).map_err(CpsError::InvalidDerivation)?;
        Ok(self.term_unchecked(d))
    }

    fn value_of(&mut self, d: &TypeDeriv) -> Value {
        match self.term_unchecked(d) {
            Term::Value(v) => v,
            Term::Comp(_) => unreachable!("value derivations translate to values"),
        }
    }

    fn term_unchecked(&mut self, d: &TypeDeriv) -> Term {
        let p = &d.premises;
        match d.rule {
            Rule::Unit | Rule::Bool | Rule::Var => Term::Value(d.value().expect("value subject").clone()),
            Rule::Lam => {
                let ValueKind::Lam(b, _) = d.value().expect("value subject").kind() else { unreachable!() };
                let Some(VType::Arrow(a, _)) = d.value_type() else { unreachable!() };
                let x = Binder::annotated(b.name.clone(), TyExpr::from(&self.types.value(a)));
                let body = self.term_unchecked(&p[0]);
                Self::lam(&x, body)
            }
            Rule::Rec => {
                let ValueKind::Rec(b, _) = d.value().expect("value subject").kind() else { unreachable!() };
                let t = self.types.value(d.value_type().expect("value type"));
                let f = Binder::annotated(b.name.clone(), TyExpr::from(&t));
                let body = self.value_of(&p[0]);
                Term::Value(Value::rec(f, body))
            }
            Rule::If => {
                let v = self.value_of(&p[0]);
                let c1 = to_comp(self.term_unchecked(&p[1]));
                let c2 = to_comp(self.term_unchecked(&p[2]));
                Term::Comp(Comp::if_(v, c1, c2))
            }
            Rule::App => {
                let f = self.value_of(&p[0]);
                let a = self.value_of(&p[1]);
                Term::Comp(Comp::app(f, a))
            }
            Rule::LetP => {
                let CompKind::Let(x, _, _) = d.comp().expect("computation subject").kind() else { unreachable!() };
                let c1 = to_comp(self.term_unchecked(&p[0]));
                let c2 = to_comp(self.term_unchecked(&p[1]));
                to_term(Comp::let_(x.clone(), c1, c2))
            }
            Rule::LetIp => {
                // λh.λk. ⟦c1⟧@h@(λx. ⟦c2⟧@h@k)
                let CompKind::Let(x, _, _) = d.comp().expect("computation subject").kind() else { unreachable!() };
                let Some(CType::Eff(t2, a2, _)) = d.comp_type() else { unreachable!() };
                let t1 = p[0].comp_type().expect("computation type").value_type().clone();
                let h = self.fresh("h", &self.types.sigma.clone());
                let k_ty = SimpleType::arrow(self.types.value(t2), self.types.comp(a2));
                let k = self.fresh("k", &k_ty);
                let xb = Binder::annotated(x.clone(), TyExpr::from(&self.types.value(&t1)));
                let c1 = self.term_unchecked(&p[0]);
                let c2 = self.term_unchecked(&p[1]);
                let c2h = self.app(c2, Self::var(&h));
                let c2hk = self.app(c2h, Self::var(&k));
                let cont = Self::lam(&xb, c2hk);
                let c1h = self.app(c1, Self::var(&h));
                let body = self.app(c1h, cont);
                Self::lam(&h, Self::lam(&k, body))
            }
            Rule::Ret => Term::Value(self.value_of(&p[0])),
            Rule::Op => {
                // λh.λk. h.op ⟦v⟧ k
                let CompKind::Op(op, _) = d.comp().expect("computation subject").kind() else { unreachable!() };
                let Some(CType::Eff(t, a, _)) = d.comp_type() else { unreachable!() };
                let h = self.fresh("h", &self.types.sigma.clone());
                let k_ty = SimpleType::arrow(self.types.value(t), self.types.comp(a));
                let k = self.fresh("k", &k_ty);
                let v = self.value_of(&p[0]);
                let (g, g2) = (self.supply.fresh("op"), self.supply.fresh("op"));
                let body = Comp::let_(
                    g.clone(),
                    Comp::proj(Value::var(h.name.clone()), op.clone()),
                    Comp::let_(
                        g2.clone(),
                        Comp::app(Value::var(g), v),
                        Comp::app(Value::var(g2), Value::var(k.name.clone())),
                    ),
                );
                Self::lam(&h, Self::lam(&k, Term::Comp(body)))
            }
            Rule::Hdlr => Term::Value(self.handler_record(d)),
            Rule::Han => {
                // let hv = {…} in ⟦c⟧@hv@(λx. ⟦c'⟧); the record is bound once
                // rather than copied into every operation site
                let CompKind::Handle(hd, _) = d.comp().expect("computation subject").kind() else { unreachable!() };
                let Some(CType::Eff(t, _, _)) = p[1].comp_type() else { unreachable!() };
                let record = self.handler_record(&p[0]);
                let hv = self.supply.fresh("hv");
                let body = self.term_unchecked(&p[1]);
                let xb = Binder::annotated(hd.ret_binder().clone(), TyExpr::from(&self.types.value(t)));
                let ret = self.term_unchecked(&p[2]);
                let ch = self.app(body, Term::Value(Value::var(hv.clone())));
                let out = self.app(ch, Self::lam(&xb, ret));
                Term::Comp(Comp::let_(hv, Comp::ret(record), to_comp(out)))
            }
            Rule::VSub | Rule::CSub => {
                let coercion = Term::Value(self.sub_unchecked(d.sub.as_ref().expect("subsumption node")));
                let inner = self.term_unchecked(&p[0]);
                self.app(coercion, inner)
            }
        }
    }

    fn handler_record(&mut self, d: &TypeDeriv) -> Value {
        let Subject::Handler(h) = &d.subject else { unreachable!("handler node") };
        let mut fields = Vec::new();
        for (cl, pd) in h.clauses().iter().zip(&d.premises) {
            let s = &self.types.sig.atm[&cl.op];
            let x = Binder::annotated(cl.param.clone(), TyExpr::from(&self.types.value(&s.arg)));
            let k_ty = SimpleType::arrow(self.types.value(&s.result), self.types.comp(&s.answer_in));
            let k = Binder::annotated(cl.cont.clone(), TyExpr::from(&k_ty));
            let body = self.term_unchecked(pd);
            let Term::Value(f) = Self::lam(&x, Self::lam(&k, body)) else { unreachable!() };
            fields.push((cl.op.clone(), f));
        }
        Value::record(fields).expect("handler clauses have distinct operations")
    }
}

/// `⟦≤⟧` for one subtyping derivation, with fresh names above `max_id`.
pub fn cps_sub(sig: &Signature, d: &SubDeriv, max_id: u32) -> R<Value> {
    Cps::new(sig, max_id)?.sub(d)
}

/// The target of a derivation together with its expected simple type.
#[derive(Clone, Debug)]
pub struct CpsOutput {
    pub term: Term,
    /// `⟦τ⟧` or `⟦ρ⟧` of the derivation's conclusion.
    pub ty: SimpleType,
    /// `⟦Γ⟧` of the conclusion.
    pub env: StEnv,
    /// `⟦Σ⟧`, also the natural alias for printing the target.
    pub sigma: SimpleType,
}

impl CpsOutput {
    /// The target as a computation; a value target means `return v`.
    pub fn comp(&self) -> Comp {
        to_comp(self.term.clone())
    }
}

/// `⟦d⟧`. The derivation is revalidated first.
pub fn cps_term(sig: &Signature, d: &TypeDeriv) -> R<CpsOutput> {
    let subject = match &d.subject {
        Subject::Value(v) => Term::Value(v.clone()),
        Subject::Comp(c) => Term::Comp(c.clone()),
        Subject::Handler(_) => {
            return Err(CpsError::InvalidDerivation("a handler derivation has no standalone target".into()))
        }
    };
    let mut max_id = ast::max_id(&subject);
    for (x, _) in d.env.iter() {
        max_id = max_id.max(x.id());
    }
    let mut cps = Cps::new(sig, max_id)?;
    let term = cps.term(sig, d)?;
    let ty = cps.types.any(d.ty.as_ref().expect("typed conclusion"));
    let env = cps.types.env(&d.env.to_map());
    Ok(CpsOutput {
        term,
        ty,
        env,
        sigma: cps.types.sigma.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::alpha_eq_value;
    use crate::atm::{subtype_comp, subtype_value};
    use crate::surface::{expand_sugar, parse_expr, parse_type};
    use crate::types::AtmOpSig;

    fn value(src: &str) -> Value {
        match expand_sugar(&parse_expr(src).unwrap()).unwrap() {
            Term::Value(v) => v,
            t => panic!("not a value: {t:?}"),
        }
    }

    fn comp_ty(src: &str) -> CType {
        parse_type(src).unwrap().to_comp_type().unwrap()
    }

    #[test]
    fn embed_coercion_returns_to_the_continuation() {
        let d = subtype_comp(&comp_ty("Bool / pure"), &comp_ty("Bool / Unit/pure => Unit/pure")).unwrap();
        let k = cps_sub(&Signature::new(), &d, 0).unwrap();
        let want = value("fun (x : Bool) -> fun (h : {}) -> fun (k : Bool -> Unit) -> k x");
        assert!(alpha_eq_value(&k, &want), "{}", crate::surface::print_value(&k));
    }

    #[test]
    fn reflexive_coercions_are_the_identity() {
        let t = parse_type("(Unit -> Bool / Bool/pure => Bool/pure) -> Unit").unwrap().to_value_type().unwrap();
        let d = subtype_value(&t, &t).unwrap();
        let k = cps_sub(&Signature::new(), &d, 0).unwrap();
        let ValueKind::Lam(b, body) = k.kind() else { panic!() };
        assert!(matches!(body.kind(), CompKind::Return(v) if matches!(v.kind(), ValueKind::Var(y) if *y == b.name)));
    }

    #[test]
    fn effectful_operation_types_are_circular() {
        let sig = Signature::new().with_atm(
            "op",
            AtmOpSig {
                arg: parse_type("Unit -> Unit / Unit/pure => Unit/pure").unwrap().to_value_type().unwrap(),
                result: VType::Unit,
                answer_in: CType::Pure(VType::Unit),
                answer_out: CType::Pure(VType::Unit),
            },
        );
        assert!(matches!(cps_signature(&sig), Err(CpsError::CircularSignature { .. })));
    }

    #[test]
    fn static_apply_reduces_literal_heads() {
        let mut supply = NameSupply::above(100);
        let id = Term::Value(value("fun (x : Bool) -> x"));
        let r = static_apply(id.clone(), Term::Value(Value::bool(true)), &mut supply);
        assert_eq!(r.as_value(), Some(&Value::bool(true)));
        let c = Term::Comp(Comp::op(crate::name::Label::new("op"), Value::unit()));
        // the identity applied to a computation is that computation
        let r = static_apply(id, c.clone(), &mut supply);
        assert_eq!(r, c);
        let r = static_apply(Term::Value(Value::var(Name::new("f"))), c, &mut supply);
        assert!(matches!(r.as_comp().map(Comp::kind), Some(CompKind::Let(..))));
    }
}
