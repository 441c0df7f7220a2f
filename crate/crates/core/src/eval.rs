//! Small-step evaluation with step budgets, cycle detection and
//! active-handler counting.
//!
//! A configuration is a focused computation plus a stack of evaluation
//! frames. Moving the focus into `let` and `with`-blocks is bookkeeping and
//! costs no step; every reduction rule costs exactly one.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::ast::{mix, splitmix, Binder, Comp, CompKind, Handler, Value, ValueKind};
use crate::name::{Name, OpName, CONTINUATION_ID};

pub const DEFAULT_BUDGET: u64 = 1_000_000;

/// Seen-set size after which cycle detection silently stops recording.
pub const DEFAULT_SEEN_CAP: usize = 1 << 20;

/// The budget from `FEH_BUDGET` if set and valid, else [`DEFAULT_BUDGET`].
pub fn budget_from_env() -> u64 {
    std::env::var("FEH_BUDGET")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .filter(|&b| b >= 1)
        .unwrap_or(DEFAULT_BUDGET)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("dynamic type error: {0}")]
pub struct DynamicError(pub String);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Returned(Value),
    /// An operation with no handler clause to catch it; `depth` counts the
    /// frames around it.
    Stuck { op: OpName, arg: Value, depth: usize },
    /// The configuration after `step` steps equals the one `period` steps
    /// earlier.
    CycleDetected { step: u64, period: u64 },
    BudgetExhausted { steps: u64 },
    DynamicError { step: u64, message: String },
}

impl Outcome {
    pub fn returned(&self) -> Option<&Value> {
        match self {
            Outcome::Returned(v) => Some(v),
            _ => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Outcome::Returned(_) => "returned",
            Outcome::Stuck { .. } => "stuck",
            Outcome::CycleDetected { .. } => "cycle",
            Outcome::BudgetExhausted { .. } => "budget-exhausted",
            Outcome::DynamicError { .. } => "dynamic-error",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Returned(v) => write!(f, "returned {}", crate::surface::print_value(v)),
            Outcome::Stuck { op, arg, depth } => {
                write!(f, "stuck on `do {op} {}` at depth {depth}", crate::surface::print_value(arg))
            }
            Outcome::CycleDetected { step, period } => write!(f, "cycle of period {period} detected at step {step}"),
            Outcome::BudgetExhausted { steps } => write!(f, "budget of {steps} steps exhausted"),
            Outcome::DynamicError { step, message } => write!(f, "dynamic type error at step {step}: {message}"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct EvalStats {
    pub steps: u64,
    /// Largest number of `with`-blocks enclosing the focus over the run.
    pub max_active_handlers: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct EvalConfig {
    pub budget: u64,
    pub detect_cycles: bool,
    pub seen_cap: usize,
}

impl Default for EvalConfig {
    fn default() -> EvalConfig {
        EvalConfig {
            budget: DEFAULT_BUDGET,
            detect_cycles: true,
            seen_cap: DEFAULT_SEEN_CAP,
        }
    }
}

// ---------------------------------------------------------------------------
// frames

#[derive(Clone, PartialEq, Eq)]
enum Frame {
    Let(Name, Comp),
    Handle(Handler),
}

struct StackNode {
    frame: Frame,
    next: Stack,
    hash: u64,
    handlers: usize,
    len: usize,
}

/// Persistent frame stack; pushing and popping share tails.
#[derive(Clone, Default)]
struct Stack(Option<Arc<StackNode>>);

const EMPTY_STACK_HASH: u64 = 0x5eed;

impl Stack {
    fn hash(&self) -> u64 {
        self.0.as_ref().map_or(EMPTY_STACK_HASH, |n| n.hash)
    }

    fn handlers(&self) -> usize {
        self.0.as_ref().map_or(0, |n| n.handlers)
    }

    fn len(&self) -> usize {
        self.0.as_ref().map_or(0, |n| n.len)
    }

    fn push(&self, frame: Frame) -> Stack {
        let fh = match &frame {
            Frame::Let(x, c) => mix(mix(splitmix(1), x.hash64()), c.hash()),
            Frame::Handle(h) => mix(splitmix(2), h.hash()),
        };
        let is_handler = matches!(frame, Frame::Handle(_)) as usize;
        Stack(Some(Arc::new(StackNode {
            frame,
            hash: mix(self.hash(), fh),
            handlers: self.handlers() + is_handler,
            len: self.len() + 1,
            next: self.clone(),
        })))
    }

    fn top(&self) -> Option<(&Frame, &Stack)> {
        self.0.as_ref().map(|n| (&n.frame, &n.next))
    }

    fn iter(&self) -> impl Iterator<Item = &Frame> {
        let mut cur = self.0.as_deref();
        std::iter::from_fn(move || {
            let n = cur?;
            cur = n.next.0.as_deref();
            Some(&n.frame)
        })
    }

    fn same(&self, other: &Stack) -> bool {
        if self.len() != other.len() || self.hash() != other.hash() {
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
                    if x.frame != y.frame {
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

impl Drop for StackNode {
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

// ---------------------------------------------------------------------------
// the machine

enum Step {
    Stepped,
    Halted(Outcome),
}

#[derive(Clone)]
struct Machine {
    focus: Comp,
    stack: Stack,
}

fn continuation_binder() -> Name {
    Name::with_id("y", CONTINUATION_ID)
}

impl Machine {
    fn new(c: &Comp) -> Machine {
        let mut m = Machine {
            focus: c.clone(),
            stack: Stack::default(),
        };
        m.refocus();
        m
    }

    fn refocus(&mut self) {
        loop {
            let next = match self.focus.kind() {
                CompKind::Let(x, c1, c2) => {
                    self.stack = self.stack.push(Frame::Let(x.clone(), c2.clone()));
                    c1.clone()
                }
                CompKind::Handle(h, c) => {
                    self.stack = self.stack.push(Frame::Handle(h.clone()));
                    c.clone()
                }
                CompKind::Ascribe(c, _) => c.clone(),
                _ => return,
            };
            self.focus = next;
        }
    }

    fn config_hash(&self) -> u64 {
        mix(self.stack.hash(), self.focus.hash())
    }

    fn same(&self, other: &Machine) -> bool {
        self.focus == other.focus && self.stack.same(&other.stack)
    }

    /// The whole configuration as one computation.
    fn plug(&self) -> Comp {
        let mut c = self.focus.clone();
        for f in self.stack.iter() {
            c = match f {
                Frame::Let(x, body) => Comp::let_(x.clone(), c, body.clone()),
                Frame::Handle(h) => Comp::handle(h.clone(), c),
            };
        }
        c
    }

    fn dynamic(msg: impl Into<String>) -> Result<Step, DynamicError> {
        Err(DynamicError(msg.into()))
    }

    fn step(&mut self) -> Result<Step, DynamicError> {
        let next = match self.focus.kind() {
            CompKind::Return(v) => match self.stack.top() {
                None => return Ok(Step::Halted(Outcome::Returned(v.clone()))),
                Some((Frame::Let(x, body), rest)) => {
                    let c = body.subst(x, v);
                    self.stack = rest.clone();
                    c
                }
                Some((Frame::Handle(h), rest)) => {
                    let c = h.ret_body().subst(h.ret_binder(), v);
                    self.stack = rest.clone();
                    c
                }
            },
            CompKind::Op(op, v) => {
                // let-frames up to the nearest handler form the context E
                let mut lets = Vec::new();
                let mut cur = &self.stack;
                let (h, rest) = loop {
                    match cur.top() {
                        None => {
                            return Ok(Step::Halted(Outcome::Stuck {
                                op: op.clone(),
                                arg: v.clone(),
                                depth: self.stack.len(),
                            }))
                        }
                        Some((Frame::Let(x, c), next)) => {
                            lets.push((x, c));
                            cur = next;
                        }
                        Some((Frame::Handle(h), next)) => break (h, next),
                    }
                };
                let Some(clause) = h.clause(op) else {
                    return Ok(Step::Halted(Outcome::Stuck {
                        op: op.clone(),
                        arg: v.clone(),
                        depth: self.stack.len(),
                    }));
                };
                let y = continuation_binder();
                let mut inner = Comp::ret(Value::var(y.clone()));
                for (x, c) in lets {
                    inner = Comp::let_(x.clone(), inner, c.clone());
                }
                let k = Value::lam(Binder::new(y), Comp::handle(h.clone(), inner));
                let body = clause.body.subst(&clause.param, v).subst(&clause.cont, &k);
                self.stack = rest.clone();
                body
            }
            CompKind::App(f, a) => match f.kind() {
                ValueKind::Lam(b, body) => body.subst(&b.name, a),
                ValueKind::Rec(b, body) => Comp::app(body.subst(&b.name, f), a.clone()),
                _ => return Machine::dynamic(format!("applying a non-function `{}`", crate::surface::print_value(f))),
            },
            CompKind::If(v, c1, c2) => match v.as_bool() {
                Some(true) => c1.clone(),
                Some(false) => c2.clone(),
                None => return Machine::dynamic(format!("`if` on a non-boolean `{}`", crate::surface::print_value(v))),
            },
            CompKind::Proj(v, l) => match v.kind() {
                ValueKind::Record(fs) => match fs.iter().find(|(m, _)| m == l) {
                    Some((_, w)) => Comp::ret(w.clone()),
                    None => return Machine::dynamic(format!("record has no field `{l}`")),
                },
                _ => return Machine::dynamic(format!("projecting `{l}` from a non-record")),
            },
            CompKind::Let(..) | CompKind::Handle(..) | CompKind::Ascribe(..) => unreachable!("focus is refocused"),
        };
        self.focus = next;
        self.refocus();
        Ok(Step::Stepped)
    }
}

/// One reduction step: `Ok(None)` for a returned value or a stuck
/// operation, otherwise the unique successor.
pub fn step(c: &Comp) -> Result<Option<Comp>, DynamicError> {
    let mut m = Machine::new(c);
    match m.step()? {
        Step::Stepped => Ok(Some(m.plug())),
        Step::Halted(_) => Ok(None),
    }
}

/// Evaluates with the given budget; see [`eval_with`].
pub fn eval(c: &Comp, budget: u64, detect_cycles: bool) -> (Outcome, EvalStats) {
    eval_with(
        c,
        &EvalConfig {
            budget,
            detect_cycles,
            ..EvalConfig::default()
        },
    )
}

/// Runs to a result, a stuck operation, a repeated configuration or the
/// end of the budget, whichever comes first.
///
/// Configurations are hashed exactly (names included). A hash hit is
/// confirmed by replaying the run from the start, so a collision can never
/// produce a false cycle.
pub fn eval_with(c: &Comp, cfg: &EvalConfig) -> (Outcome, EvalStats) {
    let mut m = Machine::new(c);
    let mut stats = EvalStats {
        steps: 0,
        max_active_handlers: m.stack.handlers(),
    };
    let mut seen: HashMap<u64, u64> = HashMap::new();
    loop {
        if cfg.detect_cycles {
            let h = m.config_hash();
            match seen.get(&h) {
                Some(&first) if replay(c, first).is_some_and(|old| old.same(&m)) => {
                    return (
                        Outcome::CycleDetected {
                            step: stats.steps,
                            period: stats.steps - first,
                        },
                        stats,
                    );
                }
                Some(_) => {}
                None if seen.len() < cfg.seen_cap => {
                    seen.insert(h, stats.steps);
                }
                None => {}
            }
        }
        if stats.steps >= cfg.budget {
            // a final value is still reported even with the budget spent
            if let CompKind::Return(v) = m.focus.kind() {
                if m.stack.0.is_none() {
                    return (Outcome::Returned(v.clone()), stats);
                }
            }
            return (Outcome::BudgetExhausted { steps: stats.steps }, stats);
        }
        match m.step() {
            Ok(Step::Stepped) => {
                stats.steps += 1;
                stats.max_active_handlers = stats.max_active_handlers.max(m.stack.handlers());
            }
            Ok(Step::Halted(o)) => return (o, stats),
            Err(e) => {
                return (
                    Outcome::DynamicError {
                        step: stats.steps,
                        message: e.0,
                    },
                    stats,
                )
            }
        }
    }
}

fn replay(c: &Comp, steps: u64) -> Option<Machine> {
    let mut m = Machine::new(c);
    for _ in 0..steps {
        match m.step() {
            Ok(Step::Stepped) => {}
            _ => return None,
        }
    }
    Some(m)
}

/// The first `budget` configurations of the run (the program itself
/// first).
pub fn trace(c: &Comp, budget: usize) -> Vec<Comp> {
    let mut out = Vec::new();
    if budget == 0 {
        return out;
    }
    let mut m = Machine::new(c);
    out.push(c.clone());
    while out.len() < budget {
        match m.step() {
            Ok(Step::Stepped) => out.push(m.plug()),
            _ => break,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::alpha_eq_comp;
    use crate::surface::{expand_sugar, parse_expr};

    fn comp(src: &str) -> Comp {
        match expand_sugar(&parse_expr(src).unwrap()).unwrap() {
            crate::ast::Term::Comp(c) => c,
            crate::ast::Term::Value(v) => Comp::ret(v),
        }
    }

    #[test]
    fn let_return_substitutes() {
        let c = comp("let x = return true in if x then return true else return false");
        let next = step(&c).unwrap().unwrap();
        assert!(alpha_eq_comp(&next, &comp("if true then return true else return false")));
    }

    #[test]
    fn op_clause_replaces_the_block() {
        let c = comp("with {return x -> return x; op(x; k) -> return ()} handle do op true");
        assert!(alpha_eq_comp(&step(&c).unwrap().unwrap(), &comp("return ()")));
    }

    #[test]
    fn return_clause_runs() {
        let c = comp("with {return x -> return false} handle return true");
        assert!(alpha_eq_comp(&step(&c).unwrap().unwrap(), &comp("return false")));
    }

    #[test]
    fn values_are_normal() {
        assert_eq!(step(&comp("return true")).unwrap(), None);
        assert_eq!(trace(&comp("return true"), 10).len(), 1);
    }

    #[test]
    fn continuation_rewraps_the_handler() {
        let c = comp("with {return x -> return x; flip(u; k) -> k true} handle let b = do flip () in if b then false else true");
        let (o, s) = eval(&c, 100, true);
        assert_eq!(o.returned().and_then(Value::as_bool), Some(false));
        assert_eq!(s.max_active_handlers, 1);
    }

    #[test]
    fn unhandled_op_is_stuck() {
        let (o, _) = eval(&comp("let x = do boom () in return x"), 100, true);
        assert!(matches!(o, Outcome::Stuck { depth: 1, .. }), "{o:?}");
    }

    #[test]
    fn loops_are_cycles() {
        let (o, _) = eval(&comp("(rec f. fun u -> f u) ()"), 1000, true);
        assert!(matches!(o, Outcome::CycleDetected { period: 2, .. }), "{o:?}");
        let (o, s) = eval(&comp("(rec f. fun u -> f u) ()"), 1000, false);
        assert_eq!(o, Outcome::BudgetExhausted { steps: 1000 });
        assert_eq!(s.steps, 1000);
    }

    #[test]
    fn misuse_is_a_dynamic_error() {
        let (o, _) = eval(&comp("true ()"), 10, true);
        assert!(matches!(o, Outcome::DynamicError { .. }));
    }

    #[test]
    fn records_project() {
        let (o, _) = eval(&comp("{a = true, b = ()}.a"), 10, true);
        assert_eq!(o.returned().and_then(Value::as_bool), Some(true));
    }

    #[test]
    fn deep_let_chain_is_fine() {
        let mut c = Comp::ret(Value::bool(true));
        for i in 0..50_000 {
            c = Comp::let_(Name::with_id("x", i + 1), Comp::ret(Value::unit()), c);
        }
        let (o, s) = eval(&c, DEFAULT_BUDGET, true);
        assert!(o.returned().is_some());
        assert_eq!(s.steps, 50_000);
    }
}
