//! Runs every acceptance criterion and prints one PASS or FAIL line each.
//!
//! Each line combines the library check with an oracle written here from
//! scratch, so a bug shared by the checker and the evaluator cannot pass
//! both.

use std::collections::{BTreeMap, HashSet};
use std::process::ExitCode;
use std::time::Instant;

use feh::corpus;
use feh::generate::{comp_types, value_types};
use feh::minsky::compile_mm;
use feh::reach::{decide_reachability, RouteChoice, Verdict};
use feh::verify::{self, Params, Report};

type Oracle = Result<String, String>;

/// The two-bit counter as a finite-state machine: `true` when the loop
/// exits, `false` when a state repeats first.
fn counter_exits(start: (bool, bool)) -> bool {
    let mut seen = HashSet::new();
    let mut s = start;
    loop {
        if s == (true, false) {
            return true;
        }
        if !seen.insert(s) {
            return false;
        }
        s = match s {
            (true, true) => (true, true),
            (true, false) => (false, true),
            (false, true) => (true, true),
            (false, false) => (true, false),
        };
    }
}

/// The choice program returns true exactly when no branch makes the xor
/// true.
fn choice_returns_true(v: [bool; 4]) -> bool {
    let branch = |a: bool, b: bool| (if a { v[0] } else { v[1] }) ^ (if b { v[2] } else { v[3] });
    ![(true, true), (true, false), (false, true), (false, false)]
        .iter()
        .any(|&(a, b)| branch(a, b))
}

fn oracle_reachability() -> Oracle {
    for n in 0..4u8 {
        let want = counter_exits((n & 1 == 1, n & 2 == 2));
        let got = decide_reachability(&corpus::c_ex1_with_state(n), 1_000_000, RouteChoice::Direct)
            .map_err(|e| e.to_string())?
            .verdict;
        if (got == Verdict::Yes) != want || got == Verdict::Unknown {
            return Err(format!("counter from {n}: {got}, model says {want}"));
        }
    }
    let mut yes = 0;
    for (bits, f) in corpus::c_ex2_instances() {
        let want = choice_returns_true(bits);
        yes += usize::from(want);
        let got = decide_reachability(&f, 1_000_000, RouteChoice::Direct)
            .map_err(|e| e.to_string())?
            .verdict;
        if (got == Verdict::Yes) != want || got == Verdict::Unknown {
            return Err(format!("choice {bits:?}: {got}, model says {want}"));
        }
    }
    if yes != 2 {
        return Err(format!("model gives {yes} yes instances"));
    }
    Ok("counter and choice models agree".into())
}

/// A second Minsky interpreter, over the raw text.
fn machine_halts(src: &str, fuel: u64) -> bool {
    let mut prog: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for line in src.lines() {
        let line = line.split("//").next().unwrap().trim();
        if let Some((q, rest)) = line.split_once(':') {
            prog.insert(q.trim()[1..].parse().unwrap(), rest.split_whitespace().map(String::from).collect());
        }
    }
    let num = |s: &str| s[1..].parse::<usize>().unwrap();
    let (mut q, mut r) = (0usize, [0u64; 2]);
    for _ in 0..=fuel {
        let w = &prog[&q];
        match w[0].as_str() {
            "halt" => return true,
            "inc" => {
                r[num(&w[1])] += 1;
                q = num(&w[3]);
            }
            _ => {
                let i = num(&w[1]);
                if r[i] == 0 {
                    q = num(&w[3]);
                } else {
                    r[i] -= 1;
                    q = num(&w[7]);
                }
            }
        }
    }
    false
}

fn oracle_minsky() -> Oracle {
    for (name, src) in corpus::MACHINES {
        let halts = machine_halts(src, 1_000_000);
        let m = feh::minsky::parse_machine(src).map_err(|e| e.to_string())?;
        let v = decide_reachability(&compile_mm(&m).map_err(|e| e.to_string())?, 1_000_000, RouteChoice::Auto)
            .map_err(|e| e.to_string())?;
        if halts != (v.verdict == Verdict::Yes) {
            return Err(format!("{name}: interpreter says halts={halts}, program {}", v.verdict));
        }
        if v.stats.max_active_handlers > 1 {
            return Err(format!("{name}: {} handlers active", v.stats.max_active_handlers));
        }
    }
    Ok("independent interpreter agrees".into())
}

fn oracle_enumeration() -> Oracle {
    // counts by recurrence on depth
    let (mut v, mut c) = (2usize, 2usize);
    for _ in 2..=3 {
        let arrows = v * c;
        let effs = v * c * c;
        v = 2 + arrows;
        c = v + effs;
    }
    let (vs, cs) = (value_types(3), comp_types(3));
    let distinct_v: HashSet<String> = vs.iter().map(|t| t.to_string()).collect();
    let distinct_c: HashSet<String> = cs.iter().map(|t| t.to_string()).collect();
    if (vs.len(), cs.len()) != (v, c) || distinct_v.len() != v || distinct_c.len() != c {
        return Err(format!(
            "enumeration has {}/{} types ({} / {} distinct), recurrence gives {v}/{c}",
            vs.len(),
            cs.len(),
            distinct_v.len(),
            distinct_c.len()
        ));
    }
    Ok(format!("{v} and {c} types, all distinct"))
}

fn with_oracle(mut r: Report, o: Option<Oracle>) -> Report {
    match o {
        Some(Ok(d)) => r.detail = format!("{}; {d}", r.detail),
        Some(Err(d)) => {
            r.passed = false;
            r.detail = format!("{}; oracle: {d}", r.detail);
        }
        None => {}
    }
    r
}

fn main() -> ExitCode {
    let start = Instant::now();
    let reports = verify::all(Params::default());
    let mut failed = 0;
    for r in reports {
        let o = match r.id {
            2 => Some(oracle_reachability()),
            6 => Some(oracle_minsky()),
            7 => Some(oracle_enumeration()),
            _ => None,
        };
        let r = with_oracle(r, o);
        failed += usize::from(!r.passed);
        println!("{r}");
    }
    println!("{} criteria failed, {:.2?} in total", failed, start.elapsed());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
