//! Small-step evaluation with cycle detection.

use feh::corpus;
use feh::eval::{eval, trace, DEFAULT_BUDGET};
use feh::surface::print_comp;

fn main() {
    // the state-passing counter returns from states 0 and 1 and loops otherwise
    for n in 0..4 {
        let c = corpus::c_ex1_with_state(n).program().unwrap();
        let (outcome, stats) = eval(&c, DEFAULT_BUDGET, true);
        println!("c_ex1 from state {n}: {outcome} ({} steps, {} handlers deep)", stats.steps, stats.max_active_handlers);
    }

    // the first few configurations of the handler that changes answer type
    let c = corpus::program("c_ex3").program().unwrap();
    for (i, cfg) in trace(&c, 4).iter().enumerate() {
        println!("--- {i}\n{}", print_comp(cfg));
    }
}
