//! Transform a typing derivation into a handler-free program and run both.

use feh::atm::check_atm_program;
use feh::ast::is_handler_free;
use feh::corpus;
use feh::cps::cps_term;
use feh::eval::eval;
use feh::simple::check_st;
use feh::surface::print_term;
use feh::types::Signature;

fn main() {
    for name in ["c_ex1", "c_ex2", "c_ex3"] {
        let file = corpus::program(name);
        let sig = file.signature();
        let source = file.program().unwrap();
        let d = check_atm_program(&sig, &source).unwrap();
        let out = cps_term(&sig, &d).unwrap();
        assert!(is_handler_free(&out.term));

        // the target is simply typed at the translated type, without any
        // operation signature
        let t = check_st(&Signature::new(), &out.env, &out.term).unwrap();
        assert_eq!(t, out.ty);

        let (a, _) = eval(&source, 1_000_000, true);
        let (b, stats) = eval(&out.comp(), 1_000_000, true);
        println!("{name}: source {a}; target {b} in {} steps", stats.steps);
        if name == "c_ex3" {
            println!("{}", print_term(&out.term));
        }
    }
}
