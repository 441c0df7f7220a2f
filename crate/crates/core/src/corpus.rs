//! The shipped example programs and machines, embedded at build time.

use crate::surface::{parse, Expr, ProgramFile};

/// `(name, source)` for every corpus program.
pub const PROGRAMS: [(&str, &str); 5] = [
    ("c_ex1", include_str!("../corpus/c_ex1.feh")),
    ("c_ex2", include_str!("../corpus/c_ex2.feh")),
    ("c_ex3", include_str!("../corpus/c_ex3.feh")),
    ("c_ex4", include_str!("../corpus/c_ex4.feh")),
    ("c_ex5", include_str!("../corpus/c_ex5.feh")),
];

/// `(name, source)` for every shipped Minsky machine.
pub const MACHINES: [(&str, &str); 5] = [
    ("halt", include_str!("../corpus/machines/halt.mm")),
    ("inc_loop", include_str!("../corpus/machines/inc_loop.mm")),
    ("three_state", include_str!("../corpus/machines/three_state.mm")),
    ("count_down", include_str!("../corpus/machines/count_down.mm")),
    ("ping_pong", include_str!("../corpus/machines/ping_pong.mm")),
];

pub fn source(name: &str) -> Option<&'static str> {
    PROGRAMS.iter().chain(MACHINES.iter()).find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Parses a corpus program. Panics on an unknown name or a broken file,
/// both of which are build defects.
pub fn program(name: &str) -> ProgramFile {
    let text = PROGRAMS
        .iter()
        .find(|(n, _)| *n == name)
        .unwrap_or_else(|| panic!("no corpus program `{name}`"))
        .1;
    parse(text).unwrap_or_else(|e| panic!("corpus program `{name}`: {e}"))
}

/// The counter program started from state `n` (0 to 3); bit 0 is the first
/// component of the pair.
pub fn c_ex1_with_state(n: u8) -> ProgramFile {
    assert!(n < 4, "the counter has two bits");
    let init = Expr::app(
        Expr::app(Expr::var("v_tup"), Expr::bool(n & 1 == 1)),
        Expr::bool(n & 2 == 2),
    );
    program("c_ex1").with_def("init", init)
}

/// The choice program with `v0..v3` set to `bits`.
pub fn c_ex2_with(bits: [bool; 4]) -> ProgramFile {
    bits.iter()
        .enumerate()
        .fold(program("c_ex2"), |f, (i, b)| f.with_def(&format!("v{i}"), Expr::bool(*b)))
}

/// All sixteen instantiations, in binary order of `v0 v1 v2 v3`.
pub fn c_ex2_instances() -> Vec<([bool; 4], ProgramFile)> {
    (0..16u8)
        .map(|m| {
            let bits = [m & 8 != 0, m & 4 != 0, m & 2 != 0, m & 1 != 0];
            (bits, c_ex2_with(bits))
        })
        .collect()
}
