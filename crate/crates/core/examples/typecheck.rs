//! Both type systems on the corpus, and a derivation exported as JSON.

use feh::atm::{check_atm_program, deriv_to_json, validate_derivation};
use feh::corpus;
use feh::simple::check_st_program;

fn main() {
    for (name, _) in corpus::PROGRAMS {
        let file = corpus::program(name);
        let sig = file.signature();
        let c = file.program().unwrap();
        let st = match check_st_program(&sig, &c) {
            Ok(t) => t.to_string(),
            Err(e) => format!("rejected ({e})"),
        };
        let atm = match check_atm_program(&sig, &c) {
            Ok(d) => {
                validate_derivation(&sig, &d).expect("checker output validates");
                format!("{} in {} nodes", d.ty.as_ref().unwrap(), d.size())
            }
            Err(e) => format!("rejected ({e})"),
        };
        println!("{name}\n  st:  {st}\n  atm: {atm}");
    }

    let file = corpus::program("c_ex3");
    let d = check_atm_program(&file.signature(), &file.program().unwrap()).unwrap();
    let json = serde_json::to_string_pretty(&deriv_to_json(&d)).unwrap();
    println!("{}", &json[..json.len().min(600)]);
}
