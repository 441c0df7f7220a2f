//! Which corpus programs each type system accepts.

use feh::corpus;
use feh::reach::typability_matrix;

fn main() {
    let mark = |b: bool| if b { "yes" } else { "no" };
    println!("{:8} {:4} {:4}", "program", "st", "atm");
    for (name, _) in corpus::PROGRAMS {
        let t = typability_matrix(&corpus::program(name)).unwrap();
        println!("{name:8} {:4} {:4}", mark(t.st), mark(t.atm));
    }
}
