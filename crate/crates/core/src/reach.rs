//! Does a program reach `return true`?
//!
//! Two routes. `direct` evaluates the source. `via-cps` checks the program
//! in the ATM system, transforms the derivation and evaluates the
//! handler-free target. Evaluation is bounded and detects repeated
//! configurations, so the answer is exact whenever a run returns, gets
//! stuck or cycles, and `Unknown` otherwise.

use std::fmt;

use serde_json::json;
use thiserror::Error;

use crate::ast::{Comp, ValueKind};
use crate::atm::{check_atm_program, AtmError};
use crate::cps::{cps_term, CpsError};
use crate::eval::{eval, EvalStats, Outcome};
use crate::simple::check_st_program;
use crate::surface::ProgramFile;
use crate::types::Signature;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Route {
    Direct,
    ViaCps,
}

impl Route {
    pub fn name(self) -> &'static str {
        match self {
            Route::Direct => "direct",
            Route::ViaCps => "via-cps",
        }
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which route to take; `Auto` prefers `via-cps` and cross-checks.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum RouteChoice {
    #[default]
    Auto,
    Direct,
    ViaCps,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum NoReason {
    Stuck,
    Cycle,
    ReturnedOther,
}

impl NoReason {
    pub fn name(self) -> &'static str {
        match self {
            NoReason::Stuck => "stuck",
            NoReason::Cycle => "cycle",
            NoReason::ReturnedOther => "returned-other",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Verdict {
    Yes,
    No(NoReason),
    Unknown,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Yes => "yes",
            Verdict::No(_) => "no",
            Verdict::Unknown => "unknown",
        }
    }

    /// Yes and No agree with themselves whatever the reason.
    pub fn same_answer(self, other: Verdict) -> bool {
        self.name() == other.name()
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::No(r) => write!(f, "no ({})", r.name()),
            v => f.write_str(v.name()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ReachVerdict {
    pub verdict: Verdict,
    pub route: Route,
    pub steps: u64,
    pub stats: EvalStats,
    /// The verdict of the other route when `Auto` ran both.
    pub cross_check: Option<Verdict>,
}

impl ReachVerdict {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "verdict": self.verdict.name(),
            "route": self.route.name(),
            "steps": self.steps,
            "stats": {"max_active_handlers": self.stats.max_active_handlers},
        })
    }
}

#[derive(Debug, Error)]
pub enum ReachError {
    #[error("program does not expand: {0}")]
    Expand(String),
    #[error("route via-cps needs an ATM-typable program: {0}")]
    Untypable(Box<AtmError>),
    #[error("CPS transformation failed: {0}")]
    Cps(CpsError),
    #[error("{route} evaluation hit a dynamic type error: {message}")]
    Dynamic { route: Route, message: String },
    #[error("routes disagree: direct says {direct}, via-cps says {via_cps}")]
    Disagreement { direct: Verdict, via_cps: Verdict },
}

fn classify(route: Route, outcome: &Outcome, stats: EvalStats) -> Result<ReachVerdict, ReachError> {
    let verdict = match outcome {
        Outcome::Returned(v) if matches!(v.kind(), ValueKind::True) => Verdict::Yes,
        Outcome::Returned(_) => Verdict::No(NoReason::ReturnedOther),
        Outcome::Stuck { .. } => Verdict::No(NoReason::Stuck),
        Outcome::CycleDetected { .. } => Verdict::No(NoReason::Cycle),
        Outcome::BudgetExhausted { .. } => Verdict::Unknown,
        Outcome::DynamicError { message, .. } => {
            return Err(ReachError::Dynamic {
                route,
                message: message.clone(),
            })
        }
    };
    Ok(ReachVerdict {
        verdict,
        route,
        steps: stats.steps,
        stats,
        cross_check: None,
    })
}

/// Evaluates the source.
pub fn reach_direct(c: &Comp, budget: u64) -> Result<ReachVerdict, ReachError> {
    let (o, s) = eval(c, budget, true);
    classify(Route::Direct, &o, s)
}

/// The handler-free target of `c`, if `c` is ATM-typable.
pub fn cps_target(sig: &Signature, c: &Comp) -> Result<Comp, ReachError> {
    let d = check_atm_program(sig, c).map_err(|e| ReachError::Untypable(Box::new(e)))?;
    Ok(cps_term(sig, &d).map_err(ReachError::Cps)?.comp())
}

/// Transforms and evaluates the target.
pub fn reach_via_cps(sig: &Signature, c: &Comp, budget: u64) -> Result<ReachVerdict, ReachError> {
    let target = cps_target(sig, c)?;
    let (o, s) = eval(&target, budget, true);
    classify(Route::ViaCps, &o, s)
}

/// Decides reachability of a core program.
pub fn decide(sig: &Signature, c: &Comp, budget: u64, route: RouteChoice) -> Result<ReachVerdict, ReachError> {
    match route {
        RouteChoice::Direct => reach_direct(c, budget),
        RouteChoice::ViaCps => reach_via_cps(sig, c, budget),
        RouteChoice::Auto => {
            let target = match cps_target(sig, c) {
                Ok(t) => t,
                Err(ReachError::Untypable(_) | ReachError::Cps(_)) => return reach_direct(c, budget),
                Err(e) => return Err(e),
            };
            let (via, direct) = std::thread::scope(|s| {
                let h = s.spawn(|| reach_direct(c, budget));
                let (o, st) = eval(&target, budget, true);
                (classify(Route::ViaCps, &o, st), h.join().expect("direct route panicked"))
            });
            let (mut via, direct) = (via?, direct?);
            let both_known = via.verdict != Verdict::Unknown && direct.verdict != Verdict::Unknown;
            if both_known && !via.verdict.same_answer(direct.verdict) {
                return Err(ReachError::Disagreement {
                    direct: direct.verdict,
                    via_cps: via.verdict,
                });
            }
            via.cross_check = Some(direct.verdict);
            // an Unknown target with a decided source is still decided
            if via.verdict == Verdict::Unknown && direct.verdict != Verdict::Unknown {
                return Ok(ReachVerdict {
                    cross_check: Some(Verdict::Unknown),
                    ..direct
                });
            }
            Ok(via)
        }
    }
}

/// Decides reachability of a program file.
pub fn decide_reachability(p: &ProgramFile, budget: u64, route: RouteChoice) -> Result<ReachVerdict, ReachError> {
    let c = p.program().map_err(|e| ReachError::Expand(e.to_string()))?;
    decide(&p.signature(), &c, budget, route)
}

/// Typability under both systems.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Typability {
    pub st: bool,
    pub atm: bool,
}

pub fn typability(sig: &Signature, c: &Comp) -> Typability {
    Typability {
        st: check_st_program(sig, c).is_ok(),
        atm: check_atm_program(sig, c).is_ok(),
    }
}

pub fn typability_matrix(p: &ProgramFile) -> Result<Typability, ReachError> {
    let c = p.program().map_err(|e| ReachError::Expand(e.to_string()))?;
    Ok(typability(&p.signature(), &c))
}
