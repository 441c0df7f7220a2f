use feh::ast::is_handler_free;
use feh::atm::{check_atm_program, deriv_to_json, validate_derivation, AtmType, Rule};
use feh::corpus;
use feh::cps::cps_term;
use feh::eval::{eval, trace, Outcome};
use feh::reach::{decide_reachability, NoReason, RouteChoice, Verdict};
use feh::simple::check_st_program;
use feh::surface::{parse, print_program};
use feh::types::{CType, VType};

fn atm_typable(name: &str) -> bool {
    let f = corpus::program(name);
    check_atm_program(&f.signature(), &f.program().unwrap()).is_ok()
}

fn st_typable(name: &str) -> bool {
    let f = corpus::program(name);
    check_st_program(&f.signature(), &f.program().unwrap()).is_ok()
}

#[test]
fn typability_rows() {
    let got: Vec<(bool, bool)> = ["c_ex1", "c_ex2", "c_ex3", "c_ex4", "c_ex5"]
        .iter()
        .map(|n| (st_typable(n), atm_typable(n)))
        .collect();
    assert_eq!(got, [(true, true), (true, true), (false, true), (true, false), (true, false)]);
}

#[test]
fn corpus_outcomes() {
    for (name, _) in corpus::PROGRAMS {
        let (o, _) = eval(&corpus::program(name).program().unwrap(), 1_000_000, true);
        let ok = match &o {
            Outcome::Returned(v) if name == "c_ex4" => v.as_bool().is_none(),
            Outcome::Returned(v) => v.as_bool() == Some(true),
            Outcome::CycleDetected { .. } => name == "c_ex5",
            _ => false,
        };
        assert!(ok, "{name}: {o}");
    }
}

#[test]
fn counter_verdicts_on_every_route() {
    for route in [RouteChoice::Direct, RouteChoice::ViaCps, RouteChoice::Auto] {
        for n in 0..4 {
            let v = decide_reachability(&corpus::c_ex1_with_state(n), 1_000_000, route).unwrap();
            let want = if n < 2 { Verdict::Yes } else { Verdict::No(NoReason::Cycle) };
            assert_eq!(v.verdict, want, "state {n} via {route:?}");
        }
    }
}

#[test]
fn choice_is_yes_only_when_all_agree() {
    let yes: Vec<[bool; 4]> = corpus::c_ex2_instances()
        .into_iter()
        .filter(|(_, f)| decide_reachability(f, 1_000_000, RouteChoice::Auto).unwrap().verdict == Verdict::Yes)
        .map(|(b, _)| b)
        .collect();
    assert_eq!(yes, [[false; 4], [true; 4]]);
}

#[test]
fn auto_cross_checks_typable_programs() {
    let v = decide_reachability(&corpus::program("c_ex3"), 1_000_000, RouteChoice::Auto).unwrap();
    assert_eq!(v.verdict, Verdict::Yes);
    assert_eq!(v.cross_check, Some(Verdict::Yes));
    // untypable: no second opinion
    let v = decide_reachability(&corpus::program("c_ex5"), 1_000_000, RouteChoice::Auto).unwrap();
    assert_eq!(v.verdict, Verdict::No(NoReason::Cycle));
    assert_eq!(v.cross_check, None);
    assert!(decide_reachability(&corpus::program("c_ex5"), 1_000_000, RouteChoice::ViaCps).is_err());
}

#[test]
fn verdict_json_shape() {
    let v = decide_reachability(&corpus::c_ex1_with_state(2), 1_000_000, RouteChoice::Direct).unwrap();
    let j = v.to_json();
    assert_eq!(j["verdict"], "no");
    assert_eq!(j["route"], "direct");
    assert!(j["steps"].as_u64().unwrap() > 0);
    assert_eq!(j["stats"]["max_active_handlers"], 1);
}

#[test]
fn budget_exhaustion_is_unknown() {
    let v = decide_reachability(&corpus::c_ex1_with_state(0), 5, RouteChoice::Direct).unwrap();
    assert_eq!(v.verdict, Verdict::Unknown);
    assert_eq!(v.steps, 5);
}

#[test]
fn derivations_validate_and_have_pure_conclusions() {
    for name in ["c_ex1", "c_ex2", "c_ex3"] {
        let f = corpus::program(name);
        let sig = f.signature();
        let d = check_atm_program(&sig, &f.program().unwrap()).unwrap();
        validate_derivation(&sig, &d).unwrap();
        assert_eq!(d.ty, Some(AtmType::Comp(CType::Pure(VType::Bool))), "{name}");
    }
}

fn first_node_mut(d: &mut feh::atm::TypeDeriv, rule: Rule) -> Option<&mut feh::atm::TypeDeriv> {
    if d.rule == rule {
        return Some(d);
    }
    d.premises.iter_mut().find_map(|p| first_node_mut(p, rule))
}

#[test]
fn tampered_derivations_are_rejected() {
    let f = corpus::program("c_ex3");
    let sig = f.signature();
    let good = check_atm_program(&sig, &f.program().unwrap()).unwrap();

    let mut d = good.clone();
    d.ty = Some(AtmType::Comp(CType::Pure(VType::Unit)));
    assert!(validate_derivation(&sig, &d).is_err(), "wrong conclusion type");

    let mut d = good.clone();
    first_node_mut(&mut d, Rule::Han).unwrap().premises.pop();
    assert!(validate_derivation(&sig, &d).is_err(), "missing premise");

    let mut d = good.clone();
    first_node_mut(&mut d, Rule::Op).unwrap().rule = Rule::Ret;
    assert!(validate_derivation(&sig, &d).is_err(), "wrong rule");

    let mut d = good.clone();
    let op = first_node_mut(&mut d, Rule::Op).unwrap();
    op.ty = Some(AtmType::Comp(CType::Pure(VType::Unit)));
    assert!(validate_derivation(&sig, &d).is_err(), "operation typed as pure");
}

#[test]
fn derivation_json_nests_premises() {
    let f = corpus::program("c_ex3");
    let d = check_atm_program(&f.signature(), &f.program().unwrap()).unwrap();
    let j = deriv_to_json(&d);
    assert_eq!(j["type"], "Bool / pure");
    fn count(j: &serde_json::Value) -> usize {
        1 + j["premises"].as_array().unwrap().iter().map(count).sum::<usize>()
    }
    assert_eq!(count(&j), d.size());
    for key in ["rule", "env", "subject", "sub"] {
        assert!(j.get(key).is_some(), "{key}");
    }
}

#[test]
fn rejections_name_a_rule() {
    for name in ["c_ex4", "c_ex5"] {
        let f = corpus::program(name);
        let e = check_atm_program(&f.signature(), &f.program().unwrap()).unwrap_err();
        assert!(e.rule().starts_with("T-") || e.rule().starts_with("S-"), "{name}: {}", e.rule());
    }
    let f = corpus::program("c_ex3");
    let e = check_st_program(&f.signature(), &f.program().unwrap()).unwrap_err();
    assert!(e.rule().starts_with("St-"), "{}", e.rule());
}

#[test]
fn c_ex5_returns_to_the_same_configuration() {
    let c = corpus::program("c_ex5").program().unwrap();
    let point = feh::verify::c_ex5_loop_point().unwrap();
    let tr = trace(&c, 40);
    let hits: Vec<usize> = (0..tr.len())
        .filter(|&i| feh::ast::alpha_eq_comp(&tr[i], &point))
        .collect();
    assert!(hits.len() >= 3, "{hits:?}");
    let period = hits[1] - hits[0];
    assert!(hits.windows(2).all(|w| w[1] - w[0] == period));
    let (o, stats) = eval(&c, 1_000_000, true);
    // detection compares configurations syntactically, so it may trail
    // the first alpha-equivalent repeat by part of a period
    let Outcome::CycleDetected { step, period: p } = o else { panic!("{o}") };
    assert_eq!(p, period as u64);
    assert!(step >= hits[1] as u64 && step < (hits[1] + period) as u64, "{step}");
    assert_eq!(stats.max_active_handlers, 1);
}

#[test]
fn cps_targets_print_as_programs() {
    for name in ["c_ex1", "c_ex2", "c_ex3"] {
        let f = corpus::program(name);
        let d = check_atm_program(&f.signature(), &f.program().unwrap()).unwrap();
        let out = cps_term(&f.signature(), &d).unwrap();
        assert!(is_handler_free(&out.term));
        let target = feh::surface::ProgramFile {
            st_signature: None,
            atm_signature: None,
            aliases: vec![],
            defs: vec![],
            main: feh::surface::Expr::from_term(&out.term),
        };
        let text = print_program(&target);
        let back = parse(&text).unwrap().program().unwrap();
        let (o, _) = eval(&back, 1_000_000, true);
        assert_eq!(o.returned().and_then(|v| v.as_bool()), Some(true), "{name}");
    }
}

#[test]
fn parse_errors_have_positions() {
    let e = parse("main =\n  fun (x : Unit) -> \n  )").unwrap_err();
    assert_eq!(e.line, 3);
    assert!(e.col >= 1);
    assert!(parse("main = with {return x -> x} handle").is_err());
    assert!(parse("signature st { effect op : Unit; }\nmain = ()").is_err());
}
