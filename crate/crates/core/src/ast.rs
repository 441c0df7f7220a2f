//! Core terms: values, computations and handlers.
//!
//! Values and computations are separate Rust types, so a computation can
//! never sit where a value is expected. Every node is reference counted and
//! caches a structural hash and its free-variable set; both are computed
//! once at construction.

use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, LazyLock};

use thiserror::Error;

use crate::name::{Label, Name, NameSupply, OpName};
use crate::types::TyExpr;

pub(crate) fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub(crate) fn mix(a: u64, b: u64) -> u64 {
    splitmix(a.rotate_left(23) ^ splitmix(b))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AstError {
    #[error("duplicate label `{0}` in record")]
    DuplicateLabel(Label),
    #[error("duplicate clause for operation `{0}` in handler")]
    DuplicateOp(OpName),
    #[error("substitution replacement must be a value, got a computation")]
    ComputationReplacement,
}

/// A sorted, duplicate-free set of names. `None` is the empty set.
#[derive(Clone, Default)]
struct FreeVars(Option<Arc<[Name]>>);

impl FreeVars {
    fn single(n: &Name) -> FreeVars {
        FreeVars(Some(Arc::from(vec![n.clone()])))
    }

    fn as_slice(&self) -> &[Name] {
        self.0.as_deref().unwrap_or(&[])
    }

    fn contains(&self, n: &Name) -> bool {
        self.as_slice().binary_search(n).is_ok()
    }

    fn union(parts: &[&FreeVars]) -> FreeVars {
        let nonempty: Vec<&FreeVars> = parts.iter().copied().filter(|p| p.0.is_some()).collect();
        match nonempty.len() {
            0 => FreeVars(None),
            1 => nonempty[0].clone(),
            _ => {
                let mut all: Vec<Name> = nonempty.iter().flat_map(|p| p.as_slice().iter().cloned()).collect();
                all.sort();
                all.dedup();
                FreeVars(Some(Arc::from(all)))
            }
        }
    }

    fn without(&self, bound: &[&Name]) -> FreeVars {
        if !bound.iter().any(|b| self.contains(b)) {
            return self.clone();
        }
        let rest: Vec<Name> = self
            .as_slice()
            .iter()
            .filter(|n| !bound.contains(n))
            .cloned()
            .collect();
        if rest.is_empty() {
            FreeVars(None)
        } else {
            FreeVars(Some(Arc::from(rest)))
        }
    }
}

/// A binder with an optional type annotation.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Binder {
    pub name: Name,
    pub ann: Option<TyExpr>,
}

impl Binder {
    pub fn new(name: Name) -> Binder {
        Binder { name, ann: None }
    }

    pub fn annotated(name: Name, ann: TyExpr) -> Binder {
        Binder { name, ann: Some(ann) }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum ValueKind {
    Var(Name),
    Unit,
    True,
    False,
    Lam(Binder, Comp),
    Rec(Binder, Value),
    Record(Vec<(Label, Value)>),
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum CompKind {
    Return(Value),
    Op(OpName, Value),
    App(Value, Value),
    If(Value, Comp, Comp),
    Let(Name, Comp, Comp),
    Handle(Handler, Comp),
    Proj(Value, Label),
    /// `(c : R)`; transparent to evaluation.
    Ascribe(Comp, TyExpr),
}

struct ValueNode {
    kind: ValueKind,
    hash: u64,
    free: FreeVars,
}

struct CompNode {
    kind: CompKind,
    hash: u64,
    free: FreeVars,
}

struct HandlerNode {
    ret: (Name, Comp),
    clauses: Vec<OpClause>,
    hash: u64,
    free: FreeVars,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct OpClause {
    pub op: OpName,
    pub param: Name,
    pub cont: Name,
    pub body: Comp,
}

#[derive(Clone)]
pub struct Value(Arc<ValueNode>);

#[derive(Clone)]
pub struct Comp(Arc<CompNode>);

#[derive(Clone)]
pub struct Handler(Arc<HandlerNode>);

/// Either syntactic class.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Term {
    Value(Value),
    Comp(Comp),
}

// ---------------------------------------------------------------------------
// construction

const T_VAR: u64 = 1;
const T_UNIT: u64 = 2;
const T_TRUE: u64 = 3;
const T_FALSE: u64 = 4;
const T_LAM: u64 = 5;
const T_REC: u64 = 6;
const T_RECORD: u64 = 7;
const T_RETURN: u64 = 8;
const T_OP: u64 = 9;
const T_APP: u64 = 10;
const T_IF: u64 = 11;
const T_LET: u64 = 12;
const T_HANDLE: u64 = 13;
const T_PROJ: u64 = 14;
const T_ASCRIBE: u64 = 15;
const T_HANDLER: u64 = 16;

static UNIT: LazyLock<Value> = LazyLock::new(|| Value::build(ValueKind::Unit));

impl Value {
    fn build(kind: ValueKind) -> Value {
        let (hash, free) = match &kind {
            ValueKind::Var(n) => (mix(T_VAR, n.hash64()), FreeVars::single(n)),
            ValueKind::Unit => (splitmix(T_UNIT), FreeVars(None)),
            ValueKind::True => (splitmix(T_TRUE), FreeVars(None)),
            ValueKind::False => (splitmix(T_FALSE), FreeVars(None)),
            ValueKind::Lam(b, body) => (
                mix(mix(T_LAM, b.name.hash64()), body.hash()),
                body.0.free.without(&[&b.name]),
            ),
            ValueKind::Rec(b, body) => (
                mix(mix(T_REC, b.name.hash64()), body.hash()),
                body.0.free.without(&[&b.name]),
            ),
            ValueKind::Record(fields) => {
                let mut h = splitmix(T_RECORD);
                for (l, v) in fields {
                    h = mix(mix(h, l.hash64()), v.hash());
                }
                let parts: Vec<&FreeVars> = fields.iter().map(|(_, v)| &v.0.free).collect();
                (h, FreeVars::union(&parts))
            }
        };
        Value(Arc::new(ValueNode { kind, hash, free }))
    }

    pub fn var(n: Name) -> Value {
        Value::build(ValueKind::Var(n))
    }

    pub fn unit() -> Value {
        UNIT.clone()
    }

    pub fn bool(b: bool) -> Value {
        Value::build(if b { ValueKind::True } else { ValueKind::False })
    }

    pub fn lam(b: Binder, body: Comp) -> Value {
        Value::build(ValueKind::Lam(b, body))
    }

    pub fn rec(b: Binder, body: Value) -> Value {
        Value::build(ValueKind::Rec(b, body))
    }

    pub fn record(fields: Vec<(Label, Value)>) -> Result<Value, AstError> {
        let mut seen = BTreeSet::new();
        for (l, _) in &fields {
            if !seen.insert(l.clone()) {
                return Err(AstError::DuplicateLabel(l.clone()));
            }
        }
        Ok(Value::build(ValueKind::Record(fields)))
    }

    pub fn kind(&self) -> &ValueKind {
        &self.0.kind
    }

    pub fn hash(&self) -> u64 {
        self.0.hash
    }

    pub fn has_free(&self, n: &Name) -> bool {
        self.0.free.contains(n)
    }

    pub fn is_closed(&self) -> bool {
        self.0.free.0.is_none()
    }

    pub fn free_vars(&self) -> BTreeSet<Name> {
        self.0.free.as_slice().iter().cloned().collect()
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self.kind() {
            ValueKind::True => Some(true),
            ValueKind::False => Some(false),
            _ => None,
        }
    }

    pub fn ptr_eq(a: &Value, b: &Value) -> bool {
        Arc::ptr_eq(&a.0, &b.0)
    }
}

impl Comp {
    fn build(kind: CompKind) -> Comp {
        let (hash, free) = match &kind {
            CompKind::Return(v) => (mix(T_RETURN, v.hash()), v.0.free.clone()),
            CompKind::Op(op, v) => (mix(mix(T_OP, op.hash64()), v.hash()), v.0.free.clone()),
            CompKind::App(f, a) => (
                mix(mix(T_APP, f.hash()), a.hash()),
                FreeVars::union(&[&f.0.free, &a.0.free]),
            ),
            CompKind::If(v, c1, c2) => (
                mix(mix(mix(T_IF, v.hash()), c1.hash()), c2.hash()),
                FreeVars::union(&[&v.0.free, &c1.0.free, &c2.0.free]),
            ),
            CompKind::Let(x, c1, c2) => (
                mix(mix(mix(T_LET, x.hash64()), c1.hash()), c2.hash()),
                FreeVars::union(&[&c1.0.free, &c2.0.free.without(&[x])]),
            ),
            CompKind::Handle(h, c) => (
                mix(mix(T_HANDLE, h.hash()), c.hash()),
                FreeVars::union(&[&h.0.free, &c.0.free]),
            ),
            CompKind::Proj(v, l) => (mix(mix(T_PROJ, v.hash()), l.hash64()), v.0.free.clone()),
            // annotations do not contribute to the hash
            CompKind::Ascribe(c, _) => (mix(T_ASCRIBE, c.hash()), c.0.free.clone()),
        };
        Comp(Arc::new(CompNode { kind, hash, free }))
    }

    pub fn ret(v: Value) -> Comp {
        Comp::build(CompKind::Return(v))
    }

    pub fn op(op: OpName, v: Value) -> Comp {
        Comp::build(CompKind::Op(op, v))
    }

    pub fn app(f: Value, a: Value) -> Comp {
        Comp::build(CompKind::App(f, a))
    }

    pub fn if_(v: Value, c1: Comp, c2: Comp) -> Comp {
        Comp::build(CompKind::If(v, c1, c2))
    }

    pub fn let_(x: Name, c1: Comp, c2: Comp) -> Comp {
        Comp::build(CompKind::Let(x, c1, c2))
    }

    pub fn handle(h: Handler, c: Comp) -> Comp {
        Comp::build(CompKind::Handle(h, c))
    }

    pub fn proj(v: Value, l: Label) -> Comp {
        Comp::build(CompKind::Proj(v, l))
    }

    pub fn ascribe(c: Comp, ty: TyExpr) -> Comp {
        Comp::build(CompKind::Ascribe(c, ty))
    }

    pub fn kind(&self) -> &CompKind {
        &self.0.kind
    }

    pub fn hash(&self) -> u64 {
        self.0.hash
    }

    pub fn has_free(&self, n: &Name) -> bool {
        self.0.free.contains(n)
    }

    pub fn is_closed(&self) -> bool {
        self.0.free.0.is_none()
    }

    pub fn free_vars(&self) -> BTreeSet<Name> {
        self.0.free.as_slice().iter().cloned().collect()
    }

    pub fn ptr_eq(a: &Comp, b: &Comp) -> bool {
        Arc::ptr_eq(&a.0, &b.0)
    }

    /// The computation with any root ascriptions removed.
    pub fn strip_ascriptions(&self) -> &Comp {
        let mut c = self;
        while let CompKind::Ascribe(inner, _) = c.kind() {
            c = inner;
        }
        c
    }
}

impl Handler {
    pub fn new(ret_binder: Name, ret_body: Comp, clauses: Vec<OpClause>) -> Result<Handler, AstError> {
        let mut seen = BTreeSet::new();
        for cl in &clauses {
            if !seen.insert(cl.op.clone()) {
                return Err(AstError::DuplicateOp(cl.op.clone()));
            }
        }
        let mut h = mix(mix(T_HANDLER, ret_binder.hash64()), ret_body.hash());
        let mut parts = vec![ret_body.0.free.without(&[&ret_binder])];
        for cl in &clauses {
            h = mix(mix(mix(mix(h, cl.op.hash64()), cl.param.hash64()), cl.cont.hash64()), cl.body.hash());
            parts.push(cl.body.0.free.without(&[&cl.param, &cl.cont]));
        }
        let refs: Vec<&FreeVars> = parts.iter().collect();
        let free = FreeVars::union(&refs);
        Ok(Handler(Arc::new(HandlerNode {
            ret: (ret_binder, ret_body),
            clauses,
            hash: h,
            free,
        })))
    }

    pub fn ret_binder(&self) -> &Name {
        &self.0.ret.0
    }

    pub fn ret_body(&self) -> &Comp {
        &self.0.ret.1
    }

    pub fn clauses(&self) -> &[OpClause] {
        &self.0.clauses
    }

    pub fn clause(&self, op: &OpName) -> Option<&OpClause> {
        self.0.clauses.iter().find(|c| &c.op == op)
    }

    pub fn hash(&self) -> u64 {
        self.0.hash
    }

    pub fn has_free(&self, n: &Name) -> bool {
        self.0.free.contains(n)
    }

    pub fn is_closed(&self) -> bool {
        self.0.free.0.is_none()
    }
}

impl Term {
    pub fn free_vars(&self) -> BTreeSet<Name> {
        match self {
            Term::Value(v) => v.free_vars(),
            Term::Comp(c) => c.free_vars(),
        }
    }

    pub fn has_free(&self, n: &Name) -> bool {
        match self {
            Term::Value(v) => v.has_free(n),
            Term::Comp(c) => c.has_free(n),
        }
    }

    pub fn as_value(&self) -> Option<&Value> {
        match self {
            Term::Value(v) => Some(v),
            Term::Comp(_) => None,
        }
    }

    pub fn as_comp(&self) -> Option<&Comp> {
        match self {
            Term::Comp(c) => Some(c),
            Term::Value(_) => None,
        }
    }
}

impl From<Value> for Term {
    fn from(v: Value) -> Term {
        Term::Value(v)
    }
}

impl From<Comp> for Term {
    fn from(c: Comp) -> Term {
        Term::Comp(c)
    }
}

// ---------------------------------------------------------------------------
// equality and hashing: structural, names compared exactly

impl PartialEq for Value {
    fn eq(&self, other: &Value) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || (self.0.hash == other.0.hash && self.0.kind == other.0.kind)
    }
}
impl Eq for Value {}

impl PartialEq for Comp {
    fn eq(&self, other: &Comp) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || (self.0.hash == other.0.hash && self.0.kind == other.0.kind)
    }
}
impl Eq for Comp {}

impl PartialEq for Handler {
    fn eq(&self, other: &Handler) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.hash == other.0.hash && self.0.ret == other.0.ret && self.0.clauses == other.0.clauses)
    }
}
impl Eq for Handler {}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash)
    }
}

impl Hash for Comp {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash)
    }
}

impl Hash for Handler {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash)
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(&self.0.kind, f)
    }
}

impl fmt::Debug for Comp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(&self.0.kind, f)
    }
}

impl fmt::Debug for Handler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Handler")
            .field("ret", &self.0.ret)
            .field("clauses", &self.0.clauses)
            .finish()
    }
}

// ---------------------------------------------------------------------------
// iterative drop, so that very deep terms do not overflow the stack

enum Child {
    V(Value),
    C(Comp),
    H(Handler),
}

fn take_value_children(kind: &mut ValueKind, out: &mut Vec<Child>) {
    match std::mem::replace(kind, ValueKind::Unit) {
        ValueKind::Lam(_, c) => out.push(Child::C(c)),
        ValueKind::Rec(_, v) => out.push(Child::V(v)),
        ValueKind::Record(fs) => out.extend(fs.into_iter().map(|(_, v)| Child::V(v))),
        _ => {}
    }
}

fn take_comp_children(kind: &mut CompKind, out: &mut Vec<Child>) {
    match std::mem::replace(kind, CompKind::Return(Value::unit())) {
        CompKind::Return(v) | CompKind::Op(_, v) | CompKind::Proj(v, _) => out.push(Child::V(v)),
        CompKind::App(f, a) => {
            out.push(Child::V(f));
            out.push(Child::V(a));
        }
        CompKind::If(v, c1, c2) => {
            out.push(Child::V(v));
            out.push(Child::C(c1));
            out.push(Child::C(c2));
        }
        CompKind::Let(_, c1, c2) => {
            out.push(Child::C(c1));
            out.push(Child::C(c2));
        }
        CompKind::Handle(h, c) => {
            out.push(Child::H(h));
            out.push(Child::C(c));
        }
        CompKind::Ascribe(c, _) => out.push(Child::C(c)),
    }
}

fn take_handler_children(node: &mut HandlerNode, out: &mut Vec<Child>) {
    let body = std::mem::replace(&mut node.ret.1, Comp::ret(Value::unit()));
    out.push(Child::C(body));
    for cl in std::mem::take(&mut node.clauses) {
        out.push(Child::C(cl.body));
    }
}

fn drain(mut work: Vec<Child>) {
    while let Some(child) = work.pop() {
        match child {
            Child::V(v) => {
                if let Ok(mut node) = Arc::try_unwrap(v.0) {
                    take_value_children(&mut node.kind, &mut work);
                }
            }
            Child::C(c) => {
                if let Ok(mut node) = Arc::try_unwrap(c.0) {
                    take_comp_children(&mut node.kind, &mut work);
                }
            }
            Child::H(h) => {
                if let Ok(mut node) = Arc::try_unwrap(h.0) {
                    take_handler_children(&mut node, &mut work);
                }
            }
        }
    }
}

impl Drop for ValueNode {
    fn drop(&mut self) {
        if matches!(self.kind, ValueKind::Lam(..) | ValueKind::Rec(..) | ValueKind::Record(_)) {
            let mut work = Vec::new();
            take_value_children(&mut self.kind, &mut work);
            drain(work);
        }
    }
}

impl Drop for CompNode {
    fn drop(&mut self) {
        if let CompKind::Return(v) = &self.kind {
            if Arc::ptr_eq(&v.0, &UNIT.0) || Arc::strong_count(&v.0) > 1 {
                return;
            }
        }
        let mut work = Vec::new();
        take_comp_children(&mut self.kind, &mut work);
        drain(work);
    }
}

impl Drop for HandlerNode {
    fn drop(&mut self) {
        let mut work = Vec::new();
        take_handler_children(self, &mut work);
        drain(work);
    }
}

// ---------------------------------------------------------------------------
// substitution

fn note(m: &mut u32, n: &Name) {
    if n.id() != crate::name::CONTINUATION_ID {
        *m = (*m).max(n.id());
    }
}

/// Largest freshness tag occurring anywhere in a term (bound or free),
/// ignoring the tag reserved for evaluator continuations.
pub fn max_id(t: &Term) -> u32 {
    let mut m = 0;
    match t {
        Term::Value(v) => max_id_value(v, &mut m),
        Term::Comp(c) => max_id_comp(c, &mut m),
    }
    m
}

fn max_id_value(v: &Value, m: &mut u32) {
    match v.kind() {
        ValueKind::Var(n) => note(m, n),
        ValueKind::Unit | ValueKind::True | ValueKind::False => {}
        ValueKind::Lam(b, c) => {
            note(m, &b.name);
            max_id_comp(c, m);
        }
        ValueKind::Rec(b, body) => {
            note(m, &b.name);
            max_id_value(body, m);
        }
        ValueKind::Record(fs) => fs.iter().for_each(|(_, v)| max_id_value(v, m)),
    }
}

fn max_id_comp(c: &Comp, m: &mut u32) {
    match c.kind() {
        CompKind::Return(v) | CompKind::Op(_, v) | CompKind::Proj(v, _) => max_id_value(v, m),
        CompKind::App(f, a) => {
            max_id_value(f, m);
            max_id_value(a, m);
        }
        CompKind::If(v, c1, c2) => {
            max_id_value(v, m);
            max_id_comp(c1, m);
            max_id_comp(c2, m);
        }
        CompKind::Let(x, c1, c2) => {
            note(m, x);
            max_id_comp(c1, m);
            max_id_comp(c2, m);
        }
        CompKind::Handle(h, body) => {
            max_id_handler(h, m);
            max_id_comp(body, m);
        }
        CompKind::Ascribe(c, _) => max_id_comp(c, m),
    }
}

fn max_id_handler(h: &Handler, m: &mut u32) {
    note(m, h.ret_binder());
    max_id_comp(h.ret_body(), m);
    for cl in h.clauses() {
        note(m, &cl.param);
        note(m, &cl.cont);
        max_id_comp(&cl.body, m);
    }
}

struct Subst<'a> {
    x: &'a Name,
    v: &'a Value,
    root: Term,
    supply: Option<NameSupply>,
}

impl Subst<'_> {
    fn fresh(&mut self, like: &Name) -> Name {
        if self.supply.is_none() {
            let m = max_id(&self.root).max(max_id(&Term::Value(self.v.clone())));
            self.supply = Some(NameSupply::above(m));
        }
        self.supply.as_mut().unwrap().fresh(like.base())
    }

    /// Renames `b` if it would capture a free variable of the replacement.
    fn binder(&mut self, b: &Name) -> Option<Name> {
        if self.v.has_free(b) {
            Some(self.fresh(b))
        } else {
            None
        }
    }

    fn value(&mut self, t: &Value) -> Value {
        if !t.has_free(self.x) {
            return t.clone();
        }
        match t.kind() {
            ValueKind::Var(_) => self.v.clone(),
            ValueKind::Unit | ValueKind::True | ValueKind::False => t.clone(),
            ValueKind::Lam(b, body) => match self.binder(&b.name) {
                None => Value::lam(b.clone(), self.comp(body)),
                Some(fresh) => {
                    let body = rename_comp(body, &b.name, &fresh);
                    Value::lam(Binder { name: fresh, ann: b.ann.clone() }, self.comp(&body))
                }
            },
            ValueKind::Rec(b, body) => match self.binder(&b.name) {
                None => Value::rec(b.clone(), self.value(body)),
                Some(fresh) => {
                    let body = rename_value(body, &b.name, &fresh);
                    Value::rec(Binder { name: fresh, ann: b.ann.clone() }, self.value(&body))
                }
            },
            ValueKind::Record(fs) => Value::build(ValueKind::Record(
                fs.iter().map(|(l, v)| (l.clone(), self.value(v))).collect(),
            )),
        }
    }

    fn comp(&mut self, t: &Comp) -> Comp {
        if !t.has_free(self.x) {
            return t.clone();
        }
        match t.kind() {
            CompKind::Return(v) => Comp::ret(self.value(v)),
            CompKind::Op(op, v) => Comp::op(op.clone(), self.value(v)),
            CompKind::App(f, a) => Comp::app(self.value(f), self.value(a)),
            CompKind::If(v, c1, c2) => Comp::if_(self.value(v), self.comp(c1), self.comp(c2)),
            CompKind::Let(y, c1, c2) => {
                let c1 = self.comp(c1);
                if y == self.x {
                    return Comp::let_(y.clone(), c1, c2.clone());
                }
                match self.binder(y) {
                    None => Comp::let_(y.clone(), c1, self.comp(c2)),
                    Some(fresh) => {
                        let c2 = rename_comp(c2, y, &fresh);
                        let c2 = self.comp(&c2);
                        Comp::let_(fresh, c1, c2)
                    }
                }
            }
            CompKind::Handle(h, c) => Comp::handle(self.handler(h), self.comp(c)),
            CompKind::Proj(v, l) => Comp::proj(self.value(v), l.clone()),
            CompKind::Ascribe(c, ty) => Comp::ascribe(self.comp(c), ty.clone()),
        }
    }

    fn handler(&mut self, h: &Handler) -> Handler {
        if !h.has_free(self.x) {
            return h.clone();
        }
        let (rx, rbody) = self.under(h.ret_binder(), &[], h.ret_body());
        let mut clauses = Vec::with_capacity(h.clauses().len());
        for cl in h.clauses() {
            let (p, rest) = (cl.param.clone(), cl.cont.clone());
            let (p2, body) = self.under2(&p, &rest, &cl.body);
            clauses.push(OpClause {
                op: cl.op.clone(),
                param: p2.0,
                cont: p2.1,
                body,
            });
        }
        Handler::new(rx, rbody, clauses).expect("substitution preserves clause labels")
    }

    fn under(&mut self, b: &Name, _more: &[Name], body: &Comp) -> (Name, Comp) {
        if b == self.x {
            return (b.clone(), body.clone());
        }
        match self.binder(b) {
            None => (b.clone(), self.comp(body)),
            Some(fresh) => {
                let body = rename_comp(body, b, &fresh);
                (fresh, self.comp(&body))
            }
        }
    }

    fn under2(&mut self, a: &Name, b: &Name, body: &Comp) -> ((Name, Name), Comp) {
        if a == self.x || b == self.x {
            return ((a.clone(), b.clone()), body.clone());
        }
        let mut body = body.clone();
        let a2 = match self.binder(a) {
            None => a.clone(),
            Some(f) => {
                body = rename_comp(&body, a, &f);
                f
            }
        };
        let b2 = match self.binder(b) {
            None => b.clone(),
            Some(f) => {
                body = rename_comp(&body, b, &f);
                f
            }
        };
        ((a2, b2), self.comp(&body))
    }
}

fn rename_comp(c: &Comp, from: &Name, to: &Name) -> Comp {
    let v = Value::var(to.clone());
    Subst {
        x: from,
        v: &v,
        root: Term::Comp(c.clone()),
        supply: None,
    }
    .comp(c)
}

fn rename_value(t: &Value, from: &Name, to: &Name) -> Value {
    let v = Value::var(to.clone());
    Subst {
        x: from,
        v: &v,
        root: Term::Value(t.clone()),
        supply: None,
    }
    .value(t)
}

impl Comp {
    /// Capture-avoiding `self[v/x]`.
    pub fn subst(&self, x: &Name, v: &Value) -> Comp {
        Subst {
            x,
            v,
            root: Term::Comp(self.clone()),
            supply: None,
        }
        .comp(self)
    }
}

impl Value {
    /// Capture-avoiding `self[v/x]`.
    pub fn subst(&self, x: &Name, v: &Value) -> Value {
        Subst {
            x,
            v,
            root: Term::Value(self.clone()),
            supply: None,
        }
        .value(self)
    }
}

/// Capture-avoiding substitution of a value for a variable.
pub fn substitute(body: &Term, x: &Name, replacement: &Term) -> Result<Term, AstError> {
    let v = match replacement {
        Term::Value(v) => v,
        Term::Comp(_) => return Err(AstError::ComputationReplacement),
    };
    Ok(match body {
        Term::Value(b) => Term::Value(b.subst(x, v)),
        Term::Comp(b) => Term::Comp(b.subst(x, v)),
    })
}

pub fn free_vars(t: &Term) -> BTreeSet<Name> {
    t.free_vars()
}

// ---------------------------------------------------------------------------
// alpha-equivalence and normalization

#[derive(Default)]
struct AlphaEnv {
    left: Vec<Name>,
    right: Vec<Name>,
}

impl AlphaEnv {
    fn vars_match(&self, a: &Name, b: &Name) -> bool {
        let ia = self.left.iter().rposition(|n| n == a);
        let ib = self.right.iter().rposition(|n| n == b);
        match (ia, ib) {
            (Some(i), Some(j)) => i == j,
            (None, None) => a == b,
            _ => false,
        }
    }

    fn push(&mut self, a: &Name, b: &Name) {
        self.left.push(a.clone());
        self.right.push(b.clone());
    }

    fn pop(&mut self, k: usize) {
        for _ in 0..k {
            self.left.pop();
            self.right.pop();
        }
    }
}

fn alpha_value(env: &mut AlphaEnv, a: &Value, b: &Value) -> bool {
    if env.left.is_empty() && a == b {
        return true;
    }
    match (a.kind(), b.kind()) {
        (ValueKind::Var(x), ValueKind::Var(y)) => env.vars_match(x, y),
        (ValueKind::Unit, ValueKind::Unit)
        | (ValueKind::True, ValueKind::True)
        | (ValueKind::False, ValueKind::False) => true,
        (ValueKind::Lam(bx, cx), ValueKind::Lam(by, cy)) => {
            if bx.ann != by.ann {
                return false;
            }
            env.push(&bx.name, &by.name);
            let r = alpha_comp(env, cx, cy);
            env.pop(1);
            r
        }
        (ValueKind::Rec(bx, vx), ValueKind::Rec(by, vy)) => {
            if bx.ann != by.ann {
                return false;
            }
            env.push(&bx.name, &by.name);
            let r = alpha_value(env, vx, vy);
            env.pop(1);
            r
        }
        (ValueKind::Record(fx), ValueKind::Record(fy)) => {
            fx.len() == fy.len()
                && fx
                    .iter()
                    .zip(fy)
                    .all(|((lx, vx), (ly, vy))| lx == ly && alpha_value(env, vx, vy))
        }
        _ => false,
    }
}

fn alpha_comp(env: &mut AlphaEnv, a: &Comp, b: &Comp) -> bool {
    if env.left.is_empty() && a == b {
        return true;
    }
    match (a.kind(), b.kind()) {
        (CompKind::Return(x), CompKind::Return(y)) => alpha_value(env, x, y),
        (CompKind::Op(o1, x), CompKind::Op(o2, y)) => o1 == o2 && alpha_value(env, x, y),
        (CompKind::App(f1, a1), CompKind::App(f2, a2)) => alpha_value(env, f1, f2) && alpha_value(env, a1, a2),
        (CompKind::If(v1, t1, e1), CompKind::If(v2, t2, e2)) => {
            alpha_value(env, v1, v2) && alpha_comp(env, t1, t2) && alpha_comp(env, e1, e2)
        }
        (CompKind::Let(x, c1, d1), CompKind::Let(y, c2, d2)) => {
            if !alpha_comp(env, c1, c2) {
                return false;
            }
            env.push(x, y);
            let r = alpha_comp(env, d1, d2);
            env.pop(1);
            r
        }
        (CompKind::Handle(h1, c1), CompKind::Handle(h2, c2)) => alpha_handler(env, h1, h2) && alpha_comp(env, c1, c2),
        (CompKind::Proj(v1, l1), CompKind::Proj(v2, l2)) => l1 == l2 && alpha_value(env, v1, v2),
        (CompKind::Ascribe(c1, t1), CompKind::Ascribe(c2, t2)) => t1 == t2 && alpha_comp(env, c1, c2),
        _ => false,
    }
}

fn alpha_handler(env: &mut AlphaEnv, a: &Handler, b: &Handler) -> bool {
    if a.clauses().len() != b.clauses().len() {
        return false;
    }
    env.push(a.ret_binder(), b.ret_binder());
    let r = alpha_comp(env, a.ret_body(), b.ret_body());
    env.pop(1);
    if !r {
        return false;
    }
    for (ca, cb) in a.clauses().iter().zip(b.clauses()) {
        if ca.op != cb.op {
            return false;
        }
        env.push(&ca.param, &cb.param);
        env.push(&ca.cont, &cb.cont);
        let r = alpha_comp(env, &ca.body, &cb.body);
        env.pop(2);
        if !r {
            return false;
        }
    }
    true
}

/// Equality up to renaming of bound variables. Free variables must agree
/// exactly; annotations must agree exactly.
pub fn alpha_eq(a: &Term, b: &Term) -> bool {
    let mut env = AlphaEnv::default();
    match (a, b) {
        (Term::Value(x), Term::Value(y)) => alpha_value(&mut env, x, y),
        (Term::Comp(x), Term::Comp(y)) => alpha_comp(&mut env, x, y),
        _ => false,
    }
}

pub fn alpha_eq_comp(a: &Comp, b: &Comp) -> bool {
    alpha_comp(&mut AlphaEnv::default(), a, b)
}

pub fn alpha_eq_value(a: &Value, b: &Value) -> bool {
    alpha_value(&mut AlphaEnv::default(), a, b)
}

struct Normalizer {
    supply: NameSupply,
    scope: Vec<(Name, Name)>,
}

impl Normalizer {
    fn bind(&mut self, n: &Name) -> Name {
        let fresh = self.supply.fresh(n.base());
        self.scope.push((n.clone(), fresh.clone()));
        fresh
    }

    fn lookup(&self, n: &Name) -> Name {
        self.scope
            .iter()
            .rev()
            .find(|(from, _)| from == n)
            .map(|(_, to)| to.clone())
            .unwrap_or_else(|| n.clone())
    }

    fn value(&mut self, v: &Value) -> Value {
        match v.kind() {
            ValueKind::Var(n) => Value::var(self.lookup(n)),
            ValueKind::Unit | ValueKind::True | ValueKind::False => v.clone(),
            ValueKind::Lam(b, body) => {
                let name = self.bind(&b.name);
                let body = self.comp(body);
                self.scope.pop();
                Value::lam(Binder { name, ann: b.ann.clone() }, body)
            }
            ValueKind::Rec(b, body) => {
                let name = self.bind(&b.name);
                let body = self.value(body);
                self.scope.pop();
                Value::rec(Binder { name, ann: b.ann.clone() }, body)
            }
            ValueKind::Record(fs) => Value::build(ValueKind::Record(
                fs.iter().map(|(l, v)| (l.clone(), self.value(v))).collect(),
            )),
        }
    }

    fn comp(&mut self, c: &Comp) -> Comp {
        match c.kind() {
            CompKind::Return(v) => Comp::ret(self.value(v)),
            CompKind::Op(op, v) => Comp::op(op.clone(), self.value(v)),
            CompKind::App(f, a) => {
                let f = self.value(f);
                Comp::app(f, self.value(a))
            }
            CompKind::If(v, c1, c2) => {
                let v = self.value(v);
                let c1 = self.comp(c1);
                Comp::if_(v, c1, self.comp(c2))
            }
            CompKind::Let(x, c1, c2) => {
                let c1 = self.comp(c1);
                let x2 = self.bind(x);
                let c2 = self.comp(c2);
                self.scope.pop();
                Comp::let_(x2, c1, c2)
            }
            CompKind::Handle(h, body) => {
                let h = self.handler(h);
                Comp::handle(h, self.comp(body))
            }
            CompKind::Proj(v, l) => Comp::proj(self.value(v), l.clone()),
            CompKind::Ascribe(c, ty) => Comp::ascribe(self.comp(c), ty.clone()),
        }
    }

    fn handler(&mut self, h: &Handler) -> Handler {
        let rx = self.bind(h.ret_binder());
        let rbody = self.comp(h.ret_body());
        self.scope.pop();
        let mut clauses = Vec::new();
        for cl in h.clauses() {
            let p = self.bind(&cl.param);
            let k = self.bind(&cl.cont);
            let body = self.comp(&cl.body);
            self.scope.pop();
            self.scope.pop();
            clauses.push(OpClause {
                op: cl.op.clone(),
                param: p,
                cont: k,
                body,
            });
        }
        Handler::new(rx, rbody, clauses).expect("normalization preserves clause labels")
    }
}

/// Renames every binder to a fresh tag, in left-to-right preorder, starting
/// just above the largest tag among the free variables. Free variables are
/// untouched. The result depends only on the alpha-class of the input, so
/// normalizing twice gives the same term as normalizing once.
pub fn alpha_normalize(t: &Term) -> Term {
    let max_free = t.free_vars().iter().map(Name::id).max().unwrap_or(0);
    let mut n = Normalizer {
        supply: NameSupply::above(max_free),
        scope: Vec::new(),
    };
    match t {
        Term::Value(v) => Term::Value(n.value(v)),
        Term::Comp(c) => Term::Comp(n.comp(c)),
    }
}

pub fn alpha_normalize_comp(c: &Comp) -> Comp {
    match alpha_normalize(&Term::Comp(c.clone())) {
        Term::Comp(c) => c,
        Term::Value(_) => unreachable!(),
    }
}

// ---------------------------------------------------------------------------
// queries

/// Whether the term contains any `with`-handle, operation call or handler.
pub fn is_handler_free(t: &Term) -> bool {
    fn v(x: &Value) -> bool {
        match x.kind() {
            ValueKind::Lam(_, c) => c_(c),
            ValueKind::Rec(_, b) => v(b),
            ValueKind::Record(fs) => fs.iter().all(|(_, x)| v(x)),
            _ => true,
        }
    }
    fn c_(x: &Comp) -> bool {
        match x.kind() {
            CompKind::Op(..) | CompKind::Handle(..) => false,
            CompKind::Return(a) | CompKind::Proj(a, _) => v(a),
            CompKind::App(f, a) => v(f) && v(a),
            CompKind::If(a, b, e) => v(a) && c_(b) && c_(e),
            CompKind::Let(_, a, b) => c_(a) && c_(b),
            CompKind::Ascribe(a, _) => c_(a),
        }
    }
    match t {
        Term::Value(x) => v(x),
        Term::Comp(x) => c_(x),
    }
}

/// Whether the term contains a `rec` binder.
pub fn is_recursion_free(t: &Term) -> bool {
    fn v(x: &Value) -> bool {
        match x.kind() {
            ValueKind::Rec(..) => false,
            ValueKind::Lam(_, c) => c_(c),
            ValueKind::Record(fs) => fs.iter().all(|(_, x)| v(x)),
            _ => true,
        }
    }
    fn c_(x: &Comp) -> bool {
        match x.kind() {
            CompKind::Return(a) | CompKind::Proj(a, _) | CompKind::Op(_, a) => v(a),
            CompKind::App(f, a) => v(f) && v(a),
            CompKind::If(a, b, e) => v(a) && c_(b) && c_(e),
            CompKind::Let(_, a, b) => c_(a) && c_(b),
            CompKind::Handle(h, b) => {
                c_(h.ret_body()) && h.clauses().iter().all(|cl| c_(&cl.body)) && c_(b)
            }
            CompKind::Ascribe(a, _) => c_(a),
        }
    }
    match t {
        Term::Value(x) => v(x),
        Term::Comp(x) => c_(x),
    }
}

/// Number of constructor nodes.
pub fn size(t: &Term) -> usize {
    fn v(x: &Value) -> usize {
        1 + match x.kind() {
            ValueKind::Lam(_, c) => c_(c),
            ValueKind::Rec(_, b) => v(b),
            ValueKind::Record(fs) => fs.iter().map(|(_, x)| v(x)).sum(),
            _ => 0,
        }
    }
    fn c_(x: &Comp) -> usize {
        1 + match x.kind() {
            CompKind::Return(a) | CompKind::Proj(a, _) | CompKind::Op(_, a) => v(a),
            CompKind::App(f, a) => v(f) + v(a),
            CompKind::If(a, b, e) => v(a) + c_(b) + c_(e),
            CompKind::Let(_, a, b) => c_(a) + c_(b),
            CompKind::Handle(h, b) => {
                1 + c_(h.ret_body()) + h.clauses().iter().map(|cl| c_(&cl.body)).sum::<usize>() + c_(b)
            }
            CompKind::Ascribe(a, _) => c_(a),
        }
    }
    match t {
        Term::Value(x) => v(x),
        Term::Comp(x) => c_(x),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(s: &str) -> Name {
        Name::new(s)
    }

    fn var(s: &str) -> Value {
        Value::var(n(s))
    }

    #[test]
    fn substitutes_free_occurrence() {
        let body = Comp::ret(var("x"));
        assert_eq!(body.subst(&n("x"), &Value::bool(true)), Comp::ret(Value::bool(true)));
    }

    #[test]
    fn shadowed_binder_untouched() {
        let lam = Value::lam(Binder::new(n("x")), Comp::ret(var("x")));
        assert_eq!(lam.subst(&n("x"), &Value::bool(true)), lam);
    }

    #[test]
    fn substitution_avoids_capture() {
        let lam = Value::lam(Binder::new(n("y")), Comp::ret(var("x")));
        let out = lam.subst(&n("x"), &var("y"));
        match out.kind() {
            ValueKind::Lam(b, body) => {
                assert_ne!(b.name, n("y"));
                assert_eq!(body, &Comp::ret(var("y")));
            }
            _ => panic!("expected lambda"),
        }
    }

    #[test]
    fn computation_replacement_rejected() {
        let r = substitute(&Term::Comp(Comp::ret(var("x"))), &n("x"), &Term::Comp(Comp::ret(Value::unit())));
        assert_eq!(r, Err(AstError::ComputationReplacement));
    }

    #[test]
    fn free_vars_of_lambdas() {
        let closed = Value::lam(Binder::new(n("x")), Comp::ret(var("x")));
        assert!(closed.free_vars().is_empty());
        let open = Value::lam(Binder::new(n("x")), Comp::ret(var("y")));
        assert_eq!(open.free_vars().into_iter().collect::<Vec<_>>(), vec![n("y")]);
    }

    #[test]
    fn duplicate_record_label_rejected() {
        let r = Value::record(vec![(Label::new("a"), Value::unit()), (Label::new("a"), Value::unit())]);
        assert!(matches!(r, Err(AstError::DuplicateLabel(_))));
    }

    #[test]
    fn normalize_is_idempotent_and_alpha_preserving() {
        let t = Term::Comp(Comp::let_(
            n("x"),
            Comp::ret(Value::unit()),
            Comp::ret(Value::lam(Binder::new(n("x")), Comp::ret(var("x")))),
        ));
        let once = alpha_normalize(&t);
        assert_eq!(alpha_normalize(&once), once);
        assert!(alpha_eq(&t, &once));
    }

    #[test]
    fn alpha_eq_distinguishes_binding_structure() {
        let a = Value::lam(Binder::new(n("x")), Comp::ret(Value::lam(Binder::new(n("y")), Comp::ret(var("x")))));
        let b = Value::lam(Binder::new(n("y")), Comp::ret(Value::lam(Binder::new(n("x")), Comp::ret(var("y")))));
        let c = Value::lam(Binder::new(n("x")), Comp::ret(Value::lam(Binder::new(n("y")), Comp::ret(var("y")))));
        assert!(alpha_eq_value(&a, &b));
        assert!(!alpha_eq_value(&a, &c));
    }

    #[test]
    fn deep_terms_drop_without_overflow() {
        let mut c = Comp::ret(Value::unit());
        for i in 0..300_000u32 {
            c = Comp::let_(Name::with_id("x", i + 1), Comp::ret(Value::unit()), c);
        }
        drop(c);
    }
}
