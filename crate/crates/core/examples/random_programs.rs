//! Seeded random programs that the ATM checker accepts.

use feh::generate::typable_programs;
use feh::surface::print_comp;

fn main() {
    for g in typable_programs(42, 3, 4, false) {
        let ops: Vec<String> = g.sig.atm.iter().map(|(op, s)| format!("{op} : {}", s.as_arrow())).collect();
        println!("seed {} [{}]\n{}\n", g.seed, ops.join("; "), print_comp(&g.program));
    }
}
