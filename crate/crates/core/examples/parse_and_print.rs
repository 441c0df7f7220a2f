//! Parse a program, print it back, and show the core term it expands to.
//!
//! cargo run --example parse_and_print [FILE]

use feh::ast::alpha_eq_comp;
use feh::surface::{parse, print_comp, print_program};

fn main() {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path).expect("readable file"),
        None => feh::corpus::source("c_ex3").unwrap().to_string(),
    };
    let file = parse(&text).unwrap_or_else(|e| panic!("parse error at {e}"));
    let printed = print_program(&file);
    println!("{printed}");

    // definitions and sugar are gone in the core program
    let core = file.program().expect("expands");
    println!("-- core --\n{}", print_comp(&core));

    let again = parse(&printed).expect("printed text parses").program().unwrap();
    assert!(alpha_eq_comp(&core, &again));
}
