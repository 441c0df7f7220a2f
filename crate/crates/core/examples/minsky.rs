//! Minsky machines: simulate, compile to a handler program, compare.

use feh::corpus;
use feh::minsky::{compile_mm, compile_mm_source, parse_machine};
use feh::reach::{decide_reachability, RouteChoice};

fn main() {
    for (name, src) in corpus::MACHINES {
        let m = parse_machine(src).unwrap();
        let sim = m.simulate(1_000_000);
        let v = decide_reachability(&compile_mm(&m).unwrap(), 1_000_000, RouteChoice::Direct).unwrap();
        println!(
            "{name}: machine {sim}; program {} after {} steps, at most {} handler active",
            v.verdict, v.steps, v.stats.max_active_handlers
        );
    }
    let m = parse_machine(corpus::MACHINES[2].1).unwrap();
    print!("{m}\n{}", compile_mm_source(&m));
}
