use std::sync::OnceLock;

use proptest::prelude::*;

use feh::ast::{alpha_eq, alpha_eq_comp, is_handler_free, Comp, Term};
use feh::atm::{check_atm_program, compose, subtype, validate_sub, AtmType};
use feh::corpus;
use feh::cps::{cps_term, cps_type};
use feh::eval::{eval, trace};
use feh::generate::{comp_types, random_term, typable_programs, value_types};
use feh::minsky::{compile_mm, Instr, Machine};
use feh::reach::{decide, RouteChoice, Verdict};
use feh::simple::{check_st, check_st_program};
use feh::surface::{expand_sugar, parse_expr, print_comp};
use feh::types::Signature;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 64,
        ..ProptestConfig::default()
    }
}

fn types() -> &'static Vec<AtmType> {
    static T: OnceLock<Vec<AtmType>> = OnceLock::new();
    T.get_or_init(|| {
        value_types(3)
            .into_iter()
            .map(AtmType::Value)
            .chain(comp_types(2).into_iter().map(AtmType::Comp))
            .collect()
    })
}

fn reparse(c: &Comp) -> Term {
    let e = parse_expr(&print_comp(c)).unwrap();
    match expand_sugar(&e).unwrap() {
        Term::Value(v) => Term::Comp(Comp::ret(v)),
        t => t,
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn printing_preserves_terms(seed in any::<u64>(), depth in 1usize..7) {
        let c = random_term(seed, depth);
        prop_assert!(alpha_eq(&Term::Comp(c.clone()), &reparse(&c)), "{}", print_comp(&c));
    }

    #[test]
    fn subtyping_is_reflexive(i in 0usize..200) {
        let t = &types()[i % types().len()];
        let d = subtype(t, t);
        prop_assert!(d.is_some(), "{t}");
        prop_assert!(validate_sub(&d.unwrap()).is_ok());
    }

    #[test]
    fn subtyping_composes(i in 0usize..10_000, j in 0usize..10_000, k in 0usize..10_000) {
        let ts = types();
        let (a, b, c) = (&ts[i % ts.len()], &ts[j % ts.len()], &ts[k % ts.len()]);
        if let (Some(d1), Some(d2)) = (subtype(a, b), subtype(b, c)) {
            prop_assert!(subtype(a, c).is_some(), "{a} <= {b} <= {c}");
            let d = compose(&d1, &d2).expect("composable");
            prop_assert_eq!(&d.lhs, a);
            prop_assert_eq!(&d.rhs, c);
            prop_assert!(validate_sub(&d).is_ok());
        }
    }

    #[test]
    fn cps_targets_are_simply_typed(seed in 0u64..1_000_000) {
        for g in typable_programs(seed, 1, 5, true) {
            let out = cps_term(&g.sig, &g.deriv).unwrap();
            prop_assert!(is_handler_free(&out.term));
            let want = cps_type(&g.sig, g.deriv.ty.as_ref().unwrap()).unwrap();
            prop_assert_eq!(check_st(&Signature::new(), &out.env, &out.term).unwrap(), want);
        }
    }

    #[test]
    fn cps_commutes_with_evaluation(seed in 0u64..1_000_000) {
        for g in typable_programs(seed, 1, 5, false) {
            let target = cps_term(&g.sig, &g.deriv).unwrap().comp();
            let (a, _) = eval(&g.program, 100_000, false);
            let (b, _) = eval(&target, 100_000, false);
            let (v, w) = (a.returned().unwrap(), b.returned().unwrap());
            prop_assert_eq!(v.as_bool(), w.as_bool());
            if v.as_bool().is_none() {
                prop_assert_eq!(v == &feh::ast::Value::unit(), w == &feh::ast::Value::unit());
            }
        }
    }

    #[test]
    fn simple_checking_is_deterministic(seed in any::<u64>(), depth in 1usize..6) {
        let c = random_term(seed, depth);
        let sig = Signature::new();
        let a = check_st_program(&sig, &c);
        prop_assert_eq!(&a, &check_st_program(&sig, &c));
        if let Term::Comp(back) = reparse(&c) {
            prop_assert_eq!(a.is_ok(), check_st_program(&sig, &back).is_ok());
        }
    }

    #[test]
    fn evaluation_is_deterministic(seed in 0u64..1_000_000) {
        for g in typable_programs(seed, 1, 5, true) {
            prop_assert_eq!(eval(&g.program, 10_000, true), eval(&g.program, 10_000, true));
        }
    }

    #[test]
    fn reduction_preserves_atm_types(pick in 0usize..20, len in 1usize..=200) {
        let f = if pick < 4 {
            corpus::c_ex1_with_state(pick as u8)
        } else if pick < 19 {
            corpus::c_ex2_instances().swap_remove(pick - 4).1
        } else {
            corpus::program("c_ex3")
        };
        let sig = f.signature();
        let c = f.program().unwrap();
        let want = check_atm_program(&sig, &c).unwrap().ty;
        for cfg in trace(&c, len) {
            let d = check_atm_program(&sig, &cfg);
            prop_assert!(d.is_ok(), "{}", print_comp(&cfg));
            prop_assert_eq!(&d.unwrap().ty, &want);
        }
    }

    #[test]
    fn compiled_machines_agree_with_simulation(
        raw in prop::collection::vec((0u8..3, 0u8..2, 0usize..4, 0usize..4), 1..5)
    ) {
        let n = raw.len();
        let instrs = raw
            .iter()
            .map(|&(kind, reg, a, b)| match kind {
                0 => Instr::Inc { reg, next: a % n },
                1 => Instr::DecOrZero { reg, zero: a % n, dec: b % n },
                _ => Instr::Halt,
            })
            .collect();
        let m = Machine::new(instrs).unwrap();
        let f = compile_mm(&m).unwrap();
        let c = f.program().unwrap();
        prop_assert!(check_st_program(&f.signature(), &c).is_ok());
        let v = decide(&f.signature(), &c, 10_000, RouteChoice::Direct).unwrap();
        prop_assert!(v.stats.max_active_handlers <= 1);
        let sim = m.simulate(1_000_000);
        if v.verdict == Verdict::Yes {
            prop_assert!(sim.halted(), "{m}");
        }
        if m.simulate(100).halted() {
            prop_assert_eq!(v.verdict, Verdict::Yes, "{}", m);
        }
    }
}

#[test]
fn alpha_equivalence_ignores_binder_names() {
    let a = feh::surface::parse("main = (fun (x : Bool) -> x) true").unwrap().program().unwrap();
    let b = feh::surface::parse("main = (fun (y : Bool) -> y) true").unwrap().program().unwrap();
    let c = feh::surface::parse("main = (fun (y : Bool) -> false) true").unwrap().program().unwrap();
    assert!(alpha_eq_comp(&a, &b));
    assert!(!alpha_eq_comp(&a, &c));
}
