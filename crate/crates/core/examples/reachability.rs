//! Reachability of `return true` along both routes.

use feh::corpus;
use feh::reach::{decide_reachability, RouteChoice};

fn main() {
    for (bits, file) in corpus::c_ex2_instances() {
        let v = decide_reachability(&file, 1_000_000, RouteChoice::Auto).unwrap();
        println!("c_ex2 {bits:?}: {} via {} (other route: {:?})", v.verdict, v.route, v.cross_check);
    }
    // not ATM-typable, so only the direct route applies
    let v = decide_reachability(&corpus::program("c_ex5"), 1_000_000, RouteChoice::Auto).unwrap();
    println!("c_ex5: {}", v.to_json());
}
