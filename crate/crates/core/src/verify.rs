//! The end-to-end checks behind `feh corpus verify`.
//!
//! Each criterion runs a batch of programs or types through the pipeline
//! and reports a single pass or fail with a short account of what it saw.

use std::collections::BTreeMap;
use std::fmt;
use std::time::{Duration, Instant};

use crate::ast::{alpha_eq, alpha_eq_comp, is_handler_free, Comp, Term, Value, ValueKind};
use crate::atm::{check_atm_program, is_subtype_comp, subtype, AtmType};
use crate::corpus;
use crate::cps::{cps_sub, cps_term, cps_type};
use crate::eval::{eval, trace, Outcome};
use crate::generate::{comp_types, random_term, typable_programs, value_types};
use crate::minsky::{compile_mm, parse_machine, Instr, Machine};
use crate::reach::{decide, decide_reachability, RouteChoice, Verdict};
use crate::simple::{check_st, check_st_program, StEnv};
use crate::surface::{expand_sugar, parse, parse_expr, print_comp, print_program, ProgramFile};
use crate::types::{AtmOpSig, CType, Signature, SimpleType, VType};

/// Knobs for the randomized parts.
#[derive(Clone, Copy, Debug)]
pub struct Params {
    pub random_programs: usize,
    pub recursion_free_programs: usize,
    pub random_terms: usize,
    pub seed: u64,
}

impl Default for Params {
    fn default() -> Params {
        Params {
            random_programs: 200,
            recursion_free_programs: 500,
            random_terms: 1000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}. {}: {} ({:.2?})",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.detail,
            self.elapsed
        )
    }
}

type Check = Result<String, String>;

fn run(id: u8, title: &'static str, f: impl FnOnce() -> Check) -> Report {
    let t = Instant::now();
    let r = f();
    let elapsed = t.elapsed();
    let (passed, detail) = match r {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    Report {
        id,
        title,
        passed,
        detail,
        elapsed,
    }
}

/// Runs every criterion, several at a time.
pub fn all(p: Params) -> Vec<Report> {
    let jobs: Vec<Box<dyn FnOnce() -> Report + Send>> = vec![
        Box::new(|| run(1, "typability matrix", typability_matrix)),
        Box::new(|| run(2, "reachability of the counter and choice programs", corpus_reachability)),
        Box::new(move || run(3, "CPS targets are handler-free and simply typed", || cps_typing(p))),
        Box::new(move || run(4, "direct and via-cps routes agree", || route_agreement(p))),
        Box::new(move || run(5, "termination without recursion", || termination(p))),
        Box::new(|| run(6, "Minsky machines against their compiled programs", minsky)),
        Box::new(|| run(7, "subtyping over all types of depth 3", subtyping)),
        Box::new(move || run(8, "parse, print, parse round trip", || round_trip(p))),
    ];
    let mut out: Vec<Report> = std::thread::scope(|s| {
        let hs: Vec<_> = jobs.into_iter().map(|j| s.spawn(j)).collect();
        hs.into_iter().map(|h| h.join().expect("criterion panicked")).collect()
    });
    out.sort_by_key(|r| r.id);
    out
}

fn expand(f: &ProgramFile) -> Result<Comp, String> {
    f.program().map_err(|e| e.to_string())
}

// -- 1

/// `(program, st, atm)`.
pub const MATRIX: [(&str, bool, bool); 5] = [
    ("c_ex1", true, true),
    ("c_ex2", true, true),
    ("c_ex3", false, true),
    ("c_ex4", true, false),
    ("c_ex5", true, false),
];

pub fn typability_matrix() -> Check {
    let mut bad = Vec::new();
    for (name, st, atm) in MATRIX {
        let f = corpus::program(name);
        let c = expand(&f)?;
        let sig = f.signature();
        let got = (check_st_program(&sig, &c).is_ok(), check_atm_program(&sig, &c).is_ok());
        if got != (st, atm) {
            bad.push(format!("{name}: st={} atm={}", got.0, got.1));
        }
    }
    if bad.is_empty() {
        Ok("all 5 rows match".into())
    } else {
        Err(bad.join("; "))
    }
}

// -- 2

const CORPUS_BUDGET: u64 = 1_000_000;

fn timed_reach(f: &ProgramFile) -> Result<(Verdict, Duration), String> {
    let t = Instant::now();
    let v = decide_reachability(f, CORPUS_BUDGET, RouteChoice::Auto).map_err(|e| e.to_string())?;
    Ok((v.verdict, t.elapsed()))
}

pub fn corpus_reachability() -> Check {
    let mut bad = Vec::new();
    let mut slowest = Duration::ZERO;
    for n in 0..4u8 {
        let (v, d) = timed_reach(&corpus::c_ex1_with_state(n))?;
        slowest = slowest.max(d);
        let want = if n < 2 {
            Verdict::Yes
        } else {
            Verdict::No(crate::reach::NoReason::Cycle)
        };
        if v != want {
            bad.push(format!("c_ex1 from state {n}: {v}"));
        }
    }
    let mut yes = 0;
    for (bits, f) in corpus::c_ex2_instances() {
        let (v, d) = timed_reach(&f)?;
        slowest = slowest.max(d);
        let all_equal = bits.iter().all(|b| *b == bits[0]);
        yes += usize::from(v == Verdict::Yes);
        if (v == Verdict::Yes) != all_equal || v == Verdict::Unknown {
            bad.push(format!("c_ex2 {bits:?}: {v}"));
        }
    }
    if slowest >= Duration::from_secs(1) {
        bad.push(format!("slowest run took {slowest:.2?}"));
    }
    if bad.is_empty() {
        Ok(format!("4 + 16 runs as expected, {yes} yes for c_ex2, slowest {slowest:.2?}"))
    } else {
        Err(bad.join("; "))
    }
}

// -- 3 and 4

/// A closed program with its signature.
pub struct Subject {
    pub name: String,
    pub sig: Signature,
    pub program: Comp,
    pub budget: u64,
}

/// Every ATM-typable corpus program and instantiation, then `n` random
/// typable programs.
pub fn typable_subjects(p: Params) -> Result<Vec<Subject>, String> {
    let mut files: Vec<(String, ProgramFile)> = MATRIX
        .iter()
        .filter(|(_, _, atm)| *atm)
        .map(|(n, _, _)| (n.to_string(), corpus::program(n)))
        .collect();
    files.extend((0..4).map(|n| (format!("c_ex1[{n}]"), corpus::c_ex1_with_state(n))));
    files.extend(corpus::c_ex2_instances().into_iter().map(|(b, f)| (format!("c_ex2{b:?}"), f)));
    let mut out = Vec::new();
    for (name, f) in files {
        let c = expand(&f)?;
        let sig = f.signature();
        if check_atm_program(&sig, &c).is_ok() {
            out.push(Subject {
                name,
                sig,
                program: c,
                budget: CORPUS_BUDGET,
            });
        }
    }
    let gen = typable_programs(p.seed, p.random_programs, 6, true);
    if gen.len() < p.random_programs {
        return Err(format!("only {} random programs were accepted", gen.len()));
    }
    out.extend(gen.into_iter().map(|g| Subject {
        name: format!("random seed {}", g.seed),
        sig: g.sig,
        program: g.program,
        budget: 100_000,
    }));
    Ok(out)
}

pub fn cps_typing(p: Params) -> Check {
    let subjects = typable_subjects(p)?;
    for s in &subjects {
        let d = check_atm_program(&s.sig, &s.program).map_err(|e| format!("{}: {e}", s.name))?;
        let out = cps_term(&s.sig, &d).map_err(|e| format!("{}: {e}", s.name))?;
        if !is_handler_free(&out.term) {
            return Err(format!("{}: target contains a handler", s.name));
        }
        let want = cps_type(&s.sig, d.ty.as_ref().expect("computations have types")).map_err(|e| e.to_string())?;
        match check_st(&Signature::new(), &out.env, &out.term) {
            Ok(t) if t == want => {}
            Ok(t) => return Err(format!("{}: target has type {t}, expected {want}", s.name)),
            Err(e) => return Err(format!("{}: target does not check: {e}", s.name)),
        }
    }
    Ok(format!("{} programs", subjects.len()))
}

#[derive(PartialEq, Eq, Debug, Clone, Copy, PartialOrd, Ord)]
enum Class {
    ReturnedTrue,
    ReturnedOther,
    NoReturn,
}

fn class(o: &Outcome) -> Class {
    match o.returned().map(Value::kind) {
        Some(ValueKind::True) => Class::ReturnedTrue,
        Some(_) => Class::ReturnedOther,
        None => Class::NoReturn,
    }
}

/// Base values must coincide; functions only have to be functions.
fn corresponds(src: &Value, tgt: &Value) -> bool {
    let is_fn = |v: &Value| matches!(v.kind(), ValueKind::Lam(..) | ValueKind::Rec(..));
    match (src.kind(), tgt.kind()) {
        (ValueKind::Unit | ValueKind::True | ValueKind::False, _) => src == tgt,
        _ => is_fn(src) && is_fn(tgt),
    }
}

pub fn route_agreement(p: Params) -> Check {
    let subjects = typable_subjects(p)?;
    let mut tally: BTreeMap<Class, usize> = BTreeMap::new();
    for s in &subjects {
        let d = check_atm_program(&s.sig, &s.program).map_err(|e| format!("{}: {e}", s.name))?;
        let target = cps_term(&s.sig, &d).map_err(|e| format!("{}: {e}", s.name))?.comp();
        let (src, _) = eval(&s.program, s.budget, true);
        let (tgt, _) = eval(&target, s.budget, true);
        let (a, b) = (class(&src), class(&tgt));
        if a != b {
            return Err(format!("{}: source {src}, target {tgt}", s.name));
        }
        if let (Some(v), Some(w)) = (src.returned(), tgt.returned()) {
            if !corresponds(v, w) {
                return Err(format!("{}: source returned {src}, target {tgt}", s.name));
            }
        }
        *tally.entry(a).or_default() += 1;
    }
    Ok(format!("{} programs, classes {:?}", subjects.len(), tally))
}

// -- 5

const TERMINATION_BUDGET: u64 = 100_000;

/// The configuration the divergent state program keeps coming back to.
pub fn c_ex5_loop_point() -> Result<Comp, String> {
    let src = corpus::source("c_ex5").expect("shipped");
    let head = &src[..src.find("main =").expect("c_ex5 has a main")];
    let f = parse(&format!("{head}main = (with h_state handle v_f ()) v_f\n")).map_err(|e| e.to_string())?;
    expand(&f)
}

pub fn termination(p: Params) -> Check {
    let gen = typable_programs(p.seed + 1_000_000, p.recursion_free_programs, 6, false);
    if gen.len() < p.recursion_free_programs {
        return Err(format!("only {} recursion-free programs were accepted", gen.len()));
    }
    for g in &gen {
        let (o, _) = eval(&g.program, TERMINATION_BUDGET, false);
        if o.returned().is_none() {
            return Err(format!("seed {}: source {o}", g.seed));
        }
        let target = cps_term(&g.sig, &g.deriv).map_err(|e| e.to_string())?.comp();
        let (o, _) = eval(&target, TERMINATION_BUDGET, false);
        if o.returned().is_none() {
            return Err(format!("seed {}: target {o}", g.seed));
        }
    }

    let f = corpus::program("c_ex5");
    let c = expand(&f)?;
    if check_atm_program(&f.signature(), &c).is_ok() {
        return Err("c_ex5 is accepted by the ATM checker".into());
    }
    let (o, _) = eval(&c, CORPUS_BUDGET, true);
    let Outcome::CycleDetected { step, period } = o else {
        return Err(format!("c_ex5: {o}"));
    };
    let point = c_ex5_loop_point()?;
    let tr = trace(&c, (step + 1) as usize);
    let hits: Vec<usize> = (0..tr.len()).filter(|i| alpha_eq_comp(&tr[*i], &point)).collect();
    if hits.len() < 2 {
        return Err(format!("c_ex5 cycles but visits the loop point {} times", hits.len()));
    }
    Ok(format!(
        "{} programs return on both sides; c_ex5 cycles with period {period} through the loop point at steps {:?}",
        gen.len(),
        hits
    ))
}

// -- 6

fn uses_dec(m: &Machine) -> bool {
    // states reachable from q0
    let mut seen = vec![false; m.states()];
    let mut stack = vec![0];
    while let Some(q) = stack.pop() {
        if std::mem::replace(&mut seen[q], true) {
            continue;
        }
        match m.instrs()[q] {
            Instr::Inc { next, .. } => stack.push(next),
            Instr::DecOrZero { .. } => return true,
            Instr::Halt => {}
        }
    }
    false
}

pub fn minsky() -> Check {
    let nat = SimpleType::arrow(SimpleType::Unit, SimpleType::Unit);
    let mut lines = Vec::new();
    for (name, src) in corpus::MACHINES {
        let m = parse_machine(src).map_err(|e| format!("{name}: {e}"))?;
        let sim = m.simulate(CORPUS_BUDGET);
        let f = compile_mm(&m).map_err(|e| format!("{name}: {e}"))?;
        let sig = f.signature();
        if sig.st.get(&crate::name::Label::new("succ")) != Some(&(nat.clone(), SimpleType::Unit)) {
            return Err(format!("{name}: succ is not declared as (Unit -> Unit) -> Unit"));
        }
        let c = expand(&f)?;
        match check_st_program(&sig, &c) {
            Ok(SimpleType::Bool) => {}
            other => return Err(format!("{name}: compiled program checks as {other:?}")),
        }
        let v = decide(&sig, &c, CORPUS_BUDGET, RouteChoice::Auto).map_err(|e| e.to_string())?;
        if sim.halted() != (v.verdict == Verdict::Yes) {
            return Err(format!("{name}: machine {sim}, program {}", v.verdict));
        }
        if let crate::minsky::SimOutcome::Halted { steps, .. } = sim {
            if v.steps > 10 * (steps + 1) {
                return Err(format!("{name}: {} evaluation steps for {steps} machine steps", v.steps));
            }
        }
        let mah = v.stats.max_active_handlers;
        let want = usize::from(uses_dec(&m));
        if mah != want {
            return Err(format!("{name}: {mah} active handlers at most, expected {want}"));
        }
        lines.push(format!("{name} {}", v.verdict));
    }
    Ok(lines.join(", "))
}

// -- 7

fn cps_sig() -> Signature {
    Signature::new().with_atm(
        "op",
        AtmOpSig {
            arg: VType::Unit,
            result: VType::Bool,
            answer_in: CType::Pure(VType::Unit),
            answer_out: CType::Pure(VType::Bool),
        },
    )
}

pub fn subtyping() -> Check {
    let vs: Vec<AtmType> = value_types(3).into_iter().map(AtmType::Value).collect();
    let cs: Vec<CType> = comp_types(3);
    let sig = cps_sig();

    // when an effectful type has its own answer-out below it, its answer-in is pure
    let mut answers = 0;
    for r in &cs {
        if let CType::Eff(_, a, b) = r {
            if is_subtype_comp(b, r) {
                answers += 1;
                if !a.is_pure() {
                    return Err(format!("{b} <= {r} although the answer-in is effectful"));
                }
            }
        }
    }

    let cts: Vec<AtmType> = cs.iter().cloned().map(AtmType::Comp).collect();
    let mut pairs = 0;
    for group in [&vs, &cts] {
        let n = group.len();
        let mut rel = vec![false; n * n];
        for i in 0..n {
            for j in 0..n {
                let d = subtype(&group[i], &group[j]);
                if i == j && d.is_none() {
                    return Err(format!("{} is not a subtype of itself", group[i]));
                }
                if let Some(d) = d {
                    rel[i * n + j] = true;
                    pairs += 1;
                    let k = cps_sub(&sig, &d, 0).map_err(|e| e.to_string())?;
                    let want = SimpleType::arrow(
                        cps_type(&sig, &group[i]).map_err(|e| e.to_string())?,
                        cps_type(&sig, &group[j]).map_err(|e| e.to_string())?,
                    );
                    match check_st(&Signature::new(), &StEnv::new(), &Term::Value(k)) {
                        Ok(t) if t == want => {}
                        other => return Err(format!("coercion {} <= {}: {other:?}", group[i], group[j])),
                    }
                }
            }
        }
        for b in 0..n {
            for a in (0..n).filter(|a| rel[a * n + b]) {
                for c in (0..n).filter(|c| rel[b * n + c]) {
                    if !rel[a * n + c] {
                        return Err(format!("{} <= {} <= {} but not transitively", group[a], group[b], group[c]));
                    }
                }
            }
        }
    }
    Ok(format!(
        "{} value and {} computation types, {pairs} subtype pairs, {answers} answer-type instances",
        vs.len(),
        cs.len()
    ))
}

// -- 8

fn file_round_trip(name: &str, text: &str) -> Result<(), String> {
    let f = parse(text).map_err(|e| format!("{name}: {e}"))?;
    let printed = print_program(&f);
    let g = parse(&printed).map_err(|e| format!("{name} reprinted: {e}\n{printed}"))?;
    let (a, b) = (expand(&f)?, expand(&g)?);
    if alpha_eq_comp(&a, &b) {
        Ok(())
    } else {
        Err(format!("{name} changed under printing"))
    }
}

pub fn round_trip(p: Params) -> Check {
    let mut files = 0;
    for (name, text) in corpus::PROGRAMS {
        file_round_trip(name, text)?;
        files += 1;
    }
    for (name, text) in corpus::MACHINES {
        let m = parse_machine(text).map_err(|e| e.to_string())?;
        let f = compile_mm(&m).map_err(|e| e.to_string())?;
        file_round_trip(name, &print_program(&f))?;
        files += 1;
    }
    for i in 0..p.random_terms {
        let seed = p.seed + i as u64;
        let t = Term::Comp(random_term(seed, 5));
        let printed = print_comp(t.as_comp().unwrap());
        let back = parse_expr(&printed)
            .map_err(|e| format!("term {seed}: {e}\n{printed}"))
            .and_then(|e| expand_sugar(&e).map_err(|e| format!("term {seed}: {e}\n{printed}")))?;
        let back = match back {
            Term::Value(v) => Term::Comp(Comp::ret(v)),
            c => c,
        };
        if !alpha_eq(&t, &back) {
            return Err(format!("term {seed} changed under printing:\n{printed}"));
        }
    }
    Ok(format!("{files} files and {} terms", p.random_terms))
}
