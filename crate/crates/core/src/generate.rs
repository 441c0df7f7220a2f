//! Seeded random programs and exhaustive type enumeration, for tests and
//! benchmarks.
//!
//! [`ProgramGen`] builds closed programs directed by an ATM type, so that
//! most of its output checks; callers still run the checker and keep what
//! passes (see [`typable_programs`]). [`random_term`] builds arbitrary
//! syntax with no typing discipline, for printer round trips.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ast::{Binder, Comp, Handler, OpClause, Value};
use crate::atm::{check_atm_program, TypeDeriv};
use crate::name::{Label, Name, NameSupply};
use crate::types::{AtmOpSig, CType, Signature, SimpleType, TyExpr, VType};

/// Value types of depth at most `d`, where base types have depth 1 and an
/// arrow is one deeper than its deepest component. `T / pure` has the depth
/// of `T`; `T / R1 => R2` is one deeper than its deepest component.
pub fn value_types(d: usize) -> Vec<VType> {
    let mut out = vec![VType::Unit, VType::Bool];
    if d >= 2 {
        for a in value_types(d - 1) {
            for r in comp_types(d - 1) {
                out.push(VType::arrow(a.clone(), r));
            }
        }
    }
    out
}

/// Computation types of depth at most `d`, same measure as [`value_types`].
pub fn comp_types(d: usize) -> Vec<CType> {
    if d == 0 {
        return vec![];
    }
    let mut out: Vec<CType> = value_types(d).into_iter().map(CType::Pure).collect();
    if d >= 2 {
        let inner = comp_types(d - 1);
        for t in value_types(d - 1) {
            for a in &inner {
                for b in &inner {
                    out.push(CType::eff(t.clone(), a.clone(), b.clone()));
                }
            }
        }
    }
    out
}

const BASE: [VType; 2] = [VType::Unit, VType::Bool];

fn erase_v(t: &VType) -> SimpleType {
    match t {
        VType::Unit => SimpleType::Unit,
        VType::Bool => SimpleType::Bool,
        VType::Arrow(a, r) => SimpleType::arrow(erase_v(a), erase_v(r.value_type())),
    }
}

/// One or two operations over base types with pure base answer types, so
/// the handler record type of the CPS image is finite.
pub fn random_signature(rng: &mut impl Rng) -> Signature {
    let mut sig = Signature::new();
    let names = ["op", "get", "put"];
    let n = rng.gen_range(1..=2);
    for name in names.choose_multiple(rng, n) {
        let pick = |rng: &mut dyn rand::RngCore| BASE[rng.gen_range(0..2)].clone();
        let entry = AtmOpSig {
            arg: pick(rng),
            result: pick(rng),
            answer_in: CType::Pure(pick(rng)),
            answer_out: CType::Pure(pick(rng)),
        };
        sig = sig.with_st(name, erase_v(&entry.arg), erase_v(&entry.result)).with_atm(name, entry);
    }
    sig
}

type Env = Vec<(Name, VType)>;

/// Type-directed program generator over one signature.
pub struct ProgramGen {
    rng: ChaCha8Rng,
    supply: NameSupply,
    sig: Signature,
    ops: Vec<(Label, AtmOpSig)>,
    recursion: bool,
    failed: bool,
}

impl ProgramGen {
    pub fn new(seed: u64, recursion: bool) -> ProgramGen {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sig = random_signature(&mut rng);
        ProgramGen::with_signature(rng, sig, recursion)
    }

    pub fn with_signature(rng: ChaCha8Rng, sig: Signature, recursion: bool) -> ProgramGen {
        let ops = sig.atm.iter().map(|(l, s)| (l.clone(), s.clone())).collect();
        ProgramGen {
            rng,
            supply: NameSupply::above(0),
            sig,
            ops,
            recursion,
            failed: false,
        }
    }

    pub fn signature(&self) -> &Signature {
        &self.sig
    }

    fn answers(&self) -> Vec<CType> {
        BASE.iter().cloned().map(CType::Pure).collect()
    }

    fn small_vtype(&mut self, depth: usize) -> VType {
        if depth <= 1 || self.rng.gen_bool(0.6) {
            return BASE[self.rng.gen_range(0..2)].clone();
        }
        let a = self.small_vtype(depth - 1);
        let r = if self.rng.gen_bool(0.5) {
            CType::Pure(self.small_vtype(depth - 1))
        } else {
            let ans = self.answers();
            let t = self.small_vtype(depth - 1);
            CType::eff(t, ans.choose(&mut self.rng).unwrap().clone(), ans.choose(&mut self.rng).unwrap().clone())
        };
        VType::arrow(a, r)
    }

    fn binder(&mut self, base: &str, t: &VType) -> Binder {
        Binder::annotated(self.supply.fresh(base), TyExpr::from(t))
    }

    fn var_of(&mut self, env: &Env, t: &VType) -> Option<Value> {
        let hits: Vec<&Name> = env.iter().filter(|(_, u)| u == t).map(|(x, _)| x).collect();
        hits.choose(&mut self.rng).map(|x| Value::var((*x).clone()))
    }

    /// A closed program of type `Bool / pure`, nested at most `depth` deep.
    pub fn program(&mut self, depth: usize) -> Option<Comp> {
        self.failed = false;
        let c = self.comp(&Env::new(), &CType::Pure(VType::Bool), depth)?;
        (!self.failed).then_some(c)
    }

    pub fn value(&mut self, env: &Env, t: &VType, depth: usize) -> Value {
        if self.rng.gen_bool(0.3) {
            if let Some(v) = self.var_of(env, t) {
                return v;
            }
        }
        match t {
            VType::Unit => Value::unit(),
            VType::Bool => Value::bool(self.rng.gen()),
            VType::Arrow(a, r) => {
                let d = depth.saturating_sub(1);
                if self.recursion && depth > 1 && self.rng.gen_bool(0.15) {
                    let f = self.binder("f", t);
                    let x = self.binder("x", a);
                    let mut inner = env.clone();
                    inner.push((f.name.clone(), t.clone()));
                    inner.push((x.name.clone(), (**a).clone()));
                    if let Some(body) = self.comp(&inner, r, d) {
                        return Value::rec(f, Value::lam(x, body));
                    }
                }
                let x = self.binder("x", a);
                let mut inner = env.clone();
                inner.push((x.name.clone(), (**a).clone()));
                let body = self.comp(&inner, r, d).unwrap_or_else(|| self.fallback(&inner, r));
                Value::lam(x, body)
            }
        }
    }

    /// Something of type `r` built with as little structure as possible.
    fn fallback(&mut self, env: &Env, r: &CType) -> Comp {
        if let Some(c) = self.chain(env, r, 3) {
            return c;
        }
        // no operation chain connects the answers; without recursion the
        // whole program is abandoned, with it a diverging call fits any type
        if !self.recursion {
            self.failed = true;
        }
        let t = VType::arrow(VType::Unit, r.clone());
        let f = self.binder("f", &t);
        let x = self.binder("x", &VType::Unit);
        let lp = Value::rec(f.clone(), Value::lam(x, Comp::app(Value::var(f.name), Value::unit())));
        Comp::app(lp, Value::unit())
    }

    /// `do op1 v; ...; return v` whose answers run from `B` back to `A`.
    fn chain(&mut self, env: &Env, r: &CType, fuel: usize) -> Option<Comp> {
        match r {
            CType::Pure(t) => Some(Comp::ret(self.value(env, t, 0))),
            CType::Eff(t, a, b) => {
                if a == b && self.rng.gen_bool(0.5) {
                    return Some(Comp::ret(self.value(env, t, 0)));
                }
                let mut cands: Vec<(Label, AtmOpSig)> =
                    self.ops.iter().filter(|(_, s)| s.answer_out == **b).cloned().collect();
                cands.shuffle(&mut self.rng);
                for (op, s) in cands {
                    let arg = self.value(env, &s.arg, 0);
                    if s.answer_in == **a && s.result == *t && self.rng.gen_bool(0.5) {
                        return Some(Comp::op(op, arg));
                    }
                    if fuel == 0 {
                        continue;
                    }
                    let y = self.supply.fresh("y");
                    let mut inner = env.clone();
                    inner.push((y.clone(), s.result.clone()));
                    let rest = CType::eff(t.clone(), (**a).clone(), s.answer_in.clone());
                    if let Some(c2) = self.chain(&inner, &rest, fuel - 1) {
                        return Some(Comp::let_(y, Comp::op(op, arg), c2));
                    }
                }
                (a == b).then(|| Comp::ret(self.value(env, t, 0)))
            }
        }
    }

    pub fn comp(&mut self, env: &Env, r: &CType, depth: usize) -> Option<Comp> {
        if depth == 0 {
            return self.chain(env, r, 3);
        }
        let d = depth - 1;
        for _ in 0..4 {
            let pick = self.rng.gen_range(0..7);
            let got = match pick {
                0 => self.chain(env, r, 3),
                1 => {
                    let g = self.value(env, &VType::Bool, d);
                    let c1 = self.comp(env, r, d);
                    let c2 = self.comp(env, r, d);
                    c1.zip(c2).map(|(c1, c2)| Comp::if_(g, c1, c2))
                }
                2 => self.let_(env, r, d),
                3 => self.app(env, r, d),
                4 | 5 => self.handle(env, r, d),
                _ => {
                    let t = r.value_type().clone();
                    r.is_pure().then(|| Comp::ret(self.value(env, &t, d)))
                }
            };
            if got.is_some() {
                return got;
            }
        }
        self.chain(env, r, 3)
    }

    fn let_(&mut self, env: &Env, r: &CType, d: usize) -> Option<Comp> {
        let t1 = self.small_vtype(2);
        let x = self.supply.fresh("x");
        let mut inner = env.clone();
        inner.push((x.clone(), t1.clone()));
        let (r1, r2) = match r {
            CType::Pure(_) => (CType::Pure(t1), r.clone()),
            CType::Eff(t, a, b) => {
                if self.rng.gen_bool(0.3) {
                    (CType::Pure(t1), r.clone())
                } else {
                    let mid = self.answers().choose(&mut self.rng).unwrap().clone();
                    (CType::eff(t1, mid.clone(), (**b).clone()), CType::eff(t.clone(), (**a).clone(), mid))
                }
            }
        };
        let c1 = self.comp(env, &r1, d)?;
        let c2 = self.comp(&inner, &r2, d)?;
        Some(Comp::let_(x, c1, c2))
    }

    fn app(&mut self, env: &Env, r: &CType, d: usize) -> Option<Comp> {
        let fs: Vec<(Name, VType)> = env
            .iter()
            .filter(|(_, t)| matches!(t, VType::Arrow(_, c) if **c == *r))
            .cloned()
            .collect();
        if let Some((f, VType::Arrow(a, _))) = fs.choose(&mut self.rng).cloned() {
            if self.rng.gen_bool(0.7) {
                let arg = self.value(env, &a, d);
                return Some(Comp::app(Value::var(f), arg));
            }
        }
        let a = self.small_vtype(2);
        let ft = VType::arrow(a.clone(), r.clone());
        let f = self.value(env, &ft, d + 1);
        let arg = self.value(env, &a, d);
        Some(Comp::app(f, arg))
    }

    fn handle(&mut self, env: &Env, r: &CType, d: usize) -> Option<Comp> {
        if !r.is_pure() {
            return None;
        }
        let t = self.small_vtype(2);
        let ans = self.answers();
        let a = ans.choose(&mut self.rng).unwrap().clone();
        let body = self.comp(env, &CType::eff(t.clone(), a.clone(), r.clone()), d)?;
        let x = self.supply.fresh("x");
        let mut inner = env.clone();
        inner.push((x.clone(), t));
        let ret = self.comp(&inner, &a, d)?;
        let mut clauses = Vec::new();
        for (op, s) in self.ops.clone() {
            let p = self.supply.fresh("p");
            let k = self.supply.fresh("k");
            let mut inner = env.clone();
            inner.push((p.clone(), s.arg.clone()));
            inner.push((k.clone(), VType::arrow(s.result.clone(), s.answer_in.clone())));
            let body = self.comp(&inner, &s.answer_out, d)?;
            clauses.push(OpClause {
                op,
                param: p,
                cont: k,
                body,
            });
        }
        let h = Handler::new(x, ret, clauses).ok()?;
        Some(Comp::handle(h, body))
    }
}

/// A generated program that the ATM checker accepts.
pub struct Generated {
    pub seed: u64,
    pub sig: Signature,
    pub program: Comp,
    pub deriv: TypeDeriv,
}

/// The first `count` checker-accepted programs from seeds `first_seed..`.
/// Gives up after `10 * count + 100` seeds.
pub fn typable_programs(first_seed: u64, count: usize, depth: usize, recursion: bool) -> Vec<Generated> {
    let mut out = Vec::new();
    let limit = first_seed + 10 * count as u64 + 100;
    let mut seed = first_seed;
    while out.len() < count && seed < limit {
        let mut g = ProgramGen::new(seed, recursion);
        if let Some(c) = g.program(depth) {
            let sig = g.signature().clone();
            if let Ok(d) = check_atm_program(&sig, &c) {
                out.push(Generated {
                    seed,
                    sig,
                    program: c,
                    deriv: d,
                });
            }
        }
        seed += 1;
    }
    out
}

// ---------------------------------------------------------------------------
// untyped syntax

/// Random closed syntax of every form the printer knows, including
/// records, projections and ascriptions. Binders reuse a few spellings with
/// several tags so shadowing and the printer's renaming are exercised.
pub fn random_term(seed: u64, depth: usize) -> Comp {
    let mut g = TermGen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        scope: Vec::new(),
    };
    g.comp(depth)
}

struct TermGen {
    rng: ChaCha8Rng,
    scope: Vec<Name>,
}

const SPELLINGS: [&str; 4] = ["x", "y", "f", "k"];
const LABELS: [&str; 4] = ["op", "get", "fst", "snd"];

impl TermGen {
    fn name(&mut self) -> Name {
        let base = SPELLINGS.choose(&mut self.rng).unwrap();
        Name::with_id(base, self.rng.gen_range(0..3))
    }

    fn label(&mut self) -> Label {
        Label::new(LABELS.choose(&mut self.rng).unwrap())
    }

    /// Runs `f` with `names` bound.
    fn under<T>(&mut self, names: &[&Name], f: impl FnOnce(&mut TermGen) -> T) -> T {
        let n = self.scope.len();
        self.scope.extend(names.iter().map(|x| (*x).clone()));
        let out = f(self);
        self.scope.truncate(n);
        out
    }

    fn vty(&mut self, depth: usize) -> TyExpr {
        match self.rng.gen_range(0..if depth == 0 { 2 } else { 4 }) {
            0 => TyExpr::Unit,
            1 => TyExpr::Bool,
            _ => TyExpr::arrow(self.vty(depth - 1), self.cty(depth - 1)),
        }
    }

    fn cty(&mut self, depth: usize) -> TyExpr {
        match self.rng.gen_range(0..3) {
            0 => self.vty(depth),
            1 => TyExpr::Pure(Box::new(self.vty(depth))),
            _ => {
                let ans = |g: &mut TermGen| TyExpr::Pure(Box::new(g.vty(0)));
                let t = self.vty(depth);
                TyExpr::Eff(Box::new(t), Box::new(ans(self)), Box::new(ans(self)))
            }
        }
    }

    fn binder(&mut self) -> Binder {
        let n = self.name();
        if self.rng.gen_bool(0.4) {
            Binder::annotated(n, self.vty(2))
        } else {
            Binder::new(n)
        }
    }

    fn value(&mut self, depth: usize) -> Value {
        let top = if depth == 0 { 4 } else { 8 };
        match self.rng.gen_range(0..top) {
            0 => Value::unit(),
            1 => Value::bool(self.rng.gen()),
            2 | 3 => match self.scope.choose(&mut self.rng) {
                Some(x) => Value::var(x.clone()),
                None => Value::unit(),
            },
            4 | 5 => {
                let b = self.binder();
                let body = self.under(&[&b.name], |g| g.comp(depth - 1));
                Value::lam(b, body)
            }
            6 => {
                let b = self.binder();
                let body = self.under(&[&b.name], |g| g.value(depth - 1));
                Value::rec(b, body)
            }
            _ => {
                let labels: Vec<&str> = LABELS.choose_multiple(&mut self.rng, 2).copied().collect();
                let fields = labels.into_iter().map(|l| (Label::new(l), self.value(depth - 1))).collect();
                Value::record(fields).expect("labels are distinct")
            }
        }
    }

    fn let_(&mut self, d: usize) -> Comp {
        let x = self.name();
        let c1 = self.comp(d);
        let c2 = self.under(&[&x], |g| g.comp(d));
        Comp::let_(x, c1, c2)
    }

    fn comp(&mut self, depth: usize) -> Comp {
        if depth == 0 {
            return Comp::ret(self.value(0));
        }
        let d = depth - 1;
        match self.rng.gen_range(0..9) {
            0 => Comp::ret(self.value(d)),
            1 => Comp::op(self.label(), self.value(d)),
            2 => Comp::app(self.value(d), self.value(d)),
            3 => Comp::if_(self.value(d), self.comp(d), self.comp(d)),
            4 | 8 => self.let_(d),
            5 => {
                let n = self.rng.gen_range(0..3);
                let labels: Vec<&str> = LABELS.choose_multiple(&mut self.rng, n).copied().collect();
                let mut clauses = Vec::new();
                for l in labels {
                    let param = self.name();
                    let mut cont = self.name();
                    while cont == param {
                        cont = self.name();
                    }
                    let body = self.under(&[&param, &cont], |g| g.comp(d));
                    clauses.push(OpClause {
                        op: Label::new(l),
                        param,
                        cont,
                        body,
                    });
                }
                let x = self.name();
                let ret = self.under(&[&x], |g| g.comp(d));
                let h = Handler::new(x, ret, clauses).expect("labels are distinct");
                Comp::handle(h, self.comp(d))
            }
            6 => Comp::proj(self.value(d), self.label()),
            _ => {
                let t = self.cty(2);
                Comp::ascribe(self.comp(d), t)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_sizes() {
        assert_eq!(value_types(3).len(), 86);
        assert_eq!(comp_types(3).len(), 1262);
    }

    #[test]
    fn generator_is_deterministic() {
        let a = ProgramGen::new(7, true).program(4);
        let b = ProgramGen::new(7, true).program(4);
        assert_eq!(a, b);
    }
}
