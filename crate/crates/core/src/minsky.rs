//! Two-register Minsky machines: a text format, an exact simulator and a
//! compiler into handler programs with at most one active handler.
//!
//! ```text
//! // comments run to the end of the line
//! q0: inc r0 goto q1
//! q1: ifz r0 goto q2 else dec goto q1
//! q2: halt
//! ```

use std::fmt;
use std::fmt::Write as _;

use thiserror::Error;

use crate::surface::{parse, ParseError, ProgramFile};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Instr {
    /// Increment the register, then go to the state.
    Inc { reg: u8, next: usize },
    /// Go to `zero` if the register is zero, else decrement it and go to `dec`.
    DecOrZero { reg: u8, zero: usize, dec: usize },
    Halt,
}

/// States are `q0..qn`, one instruction each; `q0` is initial.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Machine {
    instrs: Vec<Instr>,
}

#[derive(Clone, PartialEq, Eq, Debug, Error)]
pub enum MachineError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("state q{0} is defined twice")]
    Duplicate(usize),
    #[error("state q{0} has no instruction")]
    Missing(usize),
    #[error("q{from} jumps to undefined state q{to}")]
    Dangling { from: usize, to: usize },
    #[error("register r{0} does not exist; only r0 and r1 do")]
    Register(u8),
    #[error("a machine needs at least one state")]
    Empty,
}

impl Machine {
    pub fn new(instrs: Vec<Instr>) -> Result<Machine, MachineError> {
        if instrs.is_empty() {
            return Err(MachineError::Empty);
        }
        for (q, i) in instrs.iter().enumerate() {
            let (reg, targets) = match *i {
                Instr::Inc { reg, next } => (Some(reg), vec![next]),
                Instr::DecOrZero { reg, zero, dec } => (Some(reg), vec![zero, dec]),
                Instr::Halt => (None, vec![]),
            };
            if let Some(r) = reg.filter(|r| *r > 1) {
                return Err(MachineError::Register(r));
            }
            if let Some(&to) = targets.iter().find(|t| **t >= instrs.len()) {
                return Err(MachineError::Dangling { from: q, to });
            }
        }
        Ok(Machine { instrs })
    }

    pub fn instrs(&self) -> &[Instr] {
        &self.instrs
    }

    pub fn states(&self) -> usize {
        self.instrs.len()
    }

    /// Runs from `(q0, 0, 0)` for at most `fuel` instructions.
    pub fn simulate(&self, fuel: u64) -> SimOutcome {
        let mut c = Config { state: 0, regs: [0, 0] };
        for steps in 0..=fuel {
            match self.instrs[c.state] {
                Instr::Halt => return SimOutcome::Halted { steps, regs: c.regs },
                _ if steps == fuel => break,
                Instr::Inc { reg, next } => {
                    c.regs[reg as usize] += 1;
                    c.state = next;
                }
                Instr::DecOrZero { reg, zero, dec } => {
                    let r = &mut c.regs[reg as usize];
                    if *r == 0 {
                        c.state = zero;
                    } else {
                        *r -= 1;
                        c.state = dec;
                    }
                }
            }
        }
        SimOutcome::OutOfFuel { state: c.state, regs: c.regs }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
struct Config {
    state: usize,
    regs: [u64; 2],
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SimOutcome {
    Halted { steps: u64, regs: [u64; 2] },
    OutOfFuel { state: usize, regs: [u64; 2] },
}

impl SimOutcome {
    pub fn halted(&self) -> bool {
        matches!(self, SimOutcome::Halted { .. })
    }
}

impl fmt::Display for SimOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimOutcome::Halted { steps, regs } => write!(f, "halted after {steps} steps with r0={} r1={}", regs[0], regs[1]),
            SimOutcome::OutOfFuel { state, regs } => {
                write!(f, "out of fuel in q{state} with r0={} r1={}", regs[0], regs[1])
            }
        }
    }
}

fn state_index(tok: &str) -> Option<usize> {
    tok.strip_prefix('q')?.parse().ok()
}

fn reg_index(tok: &str) -> Option<u8> {
    tok.strip_prefix('r')?.parse().ok()
}

pub fn parse_machine(src: &str) -> Result<Machine, MachineError> {
    let mut slots: Vec<Option<Instr>> = Vec::new();
    for (n, raw) in src.lines().enumerate() {
        let line = raw.split("//").next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |message: &str| MachineError::Syntax {
            line: n + 1,
            message: message.to_string(),
        };
        let (head, rest) = line.split_once(':').ok_or_else(|| bad("expected `qJ: <instruction>`"))?;
        let q = state_index(head.trim()).ok_or_else(|| bad("expected a state name like `q0`"))?;
        let words: Vec<&str> = rest.split_whitespace().collect();
        let st = |w: &str| state_index(w).ok_or_else(|| bad(&format!("`{w}` is not a state")));
        let rg = |w: &str| reg_index(w).ok_or_else(|| bad(&format!("`{w}` is not a register")));
        let instr = match words.as_slice() {
            ["halt"] => Instr::Halt,
            ["inc", r, "goto", k] => Instr::Inc { reg: rg(r)?, next: st(k)? },
            ["ifz", r, "goto", k, "else", "dec", "goto", l] => Instr::DecOrZero {
                reg: rg(r)?,
                zero: st(k)?,
                dec: st(l)?,
            },
            _ => return Err(bad("expected `inc rI goto qK`, `ifz rI goto qK else dec goto qL` or `halt`")),
        };
        if slots.len() <= q {
            slots.resize(q + 1, None);
        }
        if slots[q].replace(instr).is_some() {
            return Err(MachineError::Duplicate(q));
        }
    }
    let instrs = slots
        .into_iter()
        .enumerate()
        .map(|(q, i)| i.ok_or(MachineError::Missing(q)))
        .collect::<Result<Vec<_>, _>>()?;
    Machine::new(instrs)
}

impl fmt::Display for Machine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (q, i) in self.instrs.iter().enumerate() {
            match i {
                Instr::Inc { reg, next } => writeln!(f, "q{q}: inc r{reg} goto q{next}")?,
                Instr::DecOrZero { reg, zero, dec } => writeln!(f, "q{q}: ifz r{reg} goto q{zero} else dec goto q{dec}")?,
                Instr::Halt => writeln!(f, "q{q}: halt")?,
            }
        }
        Ok(())
    }
}

/// Registers are unary: zero is `fun x -> ()` and an increment wraps the
/// old register as `fun y -> do succ old`. A decrement runs the register
/// under a handler whose `succ` clause receives the old register.
const NAT: &str = "(Unit -> Unit)";

fn call(j: usize) -> String {
    format!("f{j} x0 x1")
}

/// The source text of the compiled program.
pub fn compile_mm_source(m: &Machine) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "// compiled from a {}-state Minsky machine\n", m.states());
    s.push_str("signature st {\n  effect succ : (Unit -> Unit) -> Unit;\n}\n\nmain =\n");
    for (q, i) in m.instrs.iter().enumerate() {
        let body = match *i {
            Instr::Inc { reg, next } => {
                format!("let x{reg} = fun (y : Unit) -> do succ x{reg} in {}", call(next))
            }
            Instr::DecOrZero { reg, zero, dec } => format!(
                "with {{return x -> {}; succ(x{reg}; k) -> {}}} handle x{reg} ()",
                call(zero),
                call(dec)
            ),
            Instr::Halt => "()".to_string(),
        };
        let kw = if q == 0 { "mrec" } else { "and" };
        let _ = writeln!(
            s,
            "  {kw} (f{q} : {NAT} -> {NAT} -> Unit) = fun (x0 : {NAT}) -> fun (x1 : {NAT}) ->\n    {body}"
        );
    }
    s.push_str("  in (f0 (fun (x : Unit) -> ()) (fun (x : Unit) -> ())); true\n");
    s
}

/// Compiles `m` into a program that returns `true` iff `m` halts.
pub fn compile_mm(m: &Machine) -> Result<ProgramFile, ParseError> {
    parse(&compile_mm_source(m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_state_halts_after_three() {
        let m = parse_machine("q0: inc r0 goto q1\nq1: ifz r0 goto q2 else dec goto q1\nq2: halt\n").unwrap();
        assert_eq!(m.simulate(100), SimOutcome::Halted { steps: 3, regs: [0, 0] });
        assert_eq!(m.simulate(2), SimOutcome::OutOfFuel { state: 1, regs: [0, 0] });
    }

    #[test]
    fn halt_only_halts_at_zero_fuel() {
        let m = parse_machine("q0: halt").unwrap();
        assert_eq!(m.simulate(0), SimOutcome::Halted { steps: 0, regs: [0, 0] });
    }

    #[test]
    fn text_round_trips() {
        let m = parse_machine("q1: halt\n// c\n\nq0: ifz r1 goto q1 else dec goto q0").unwrap();
        assert_eq!(parse_machine(&m.to_string()).unwrap(), m);
    }

    #[test]
    fn rejects_bad_machines() {
        assert_eq!(parse_machine("q0: inc r2 goto q0"), Err(MachineError::Register(2)));
        assert_eq!(parse_machine("q0: inc r0 goto q3"), Err(MachineError::Dangling { from: 0, to: 3 }));
        assert_eq!(parse_machine("q1: halt"), Err(MachineError::Missing(0)));
        assert_eq!(parse_machine("q0: halt\nq0: halt"), Err(MachineError::Duplicate(0)));
        assert!(matches!(parse_machine("q0: jump"), Err(MachineError::Syntax { line: 1, .. })));
        assert_eq!(parse_machine("// nothing"), Err(MachineError::Empty));
    }
}
