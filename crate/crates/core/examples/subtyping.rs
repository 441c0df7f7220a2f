//! Algorithmic subtyping and the coercions the CPS transform gives it.

use feh::atm::{subtype_comp, AtmType};
use feh::cps::{cps_sub, cps_type};
use feh::surface::{parse_type, print_value};
use feh::types::Signature;

fn main() {
    let sig = Signature::new();
    let pairs = [
        ("Bool / pure", "Bool / Unit/pure => Unit/pure"),
        ("(Unit -> Bool / pure) / pure", "(Unit -> Bool / Bool/pure => Bool/pure) / pure"),
        ("Unit / Bool/pure => Unit/pure", "Unit / pure"),
    ];
    for (l, r) in pairs {
        let lhs = parse_type(l).unwrap().to_comp_type().unwrap();
        let rhs = parse_type(r).unwrap().to_comp_type().unwrap();
        match subtype_comp(&lhs, &rhs) {
            Some(d) => {
                let k = cps_sub(&sig, &d, 0).unwrap();
                let from = cps_type(&sig, &AtmType::Comp(lhs.clone())).unwrap();
                let to = cps_type(&sig, &AtmType::Comp(rhs.clone())).unwrap();
                println!("{lhs} <= {rhs} by {}\n  coercion {from} -> {to}:\n  {}", d.rule.name(), print_value(&k));
            }
            None => println!("{lhs} is not a subtype of {rhs}"),
        }
    }
}
