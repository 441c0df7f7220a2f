//! Command-line front end.
//!
//! Exit codes: 0 success or yes, 1 no or untypable, 2 unknown, 3 usage or
//! internal error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use feh::ast::{alpha_eq_comp, Term};
use feh::atm::{check_atm_program, deriv_to_json};
use feh::cps::cps_term;
use feh::eval::{budget_from_env, eval, trace, Outcome};
use feh::minsky::{compile_mm_source, parse_machine};
use feh::reach::{decide_reachability, RouteChoice, Verdict};
use feh::simple::check_st_program;
use feh::surface::{parse, print_comp, print_program, Expr, ProgramFile};
use feh::types::TyExpr;
use feh::verify;

#[derive(Parser)]
#[command(name = "feh", version, about = "Effect handlers workbench")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse, print and re-parse a program, checking the round trip.
    Parse { file: PathBuf },
    /// Evaluate a program.
    Run {
        file: PathBuf,
        #[arg(long)]
        budget: Option<u64>,
        /// Print every configuration.
        #[arg(long)]
        trace: bool,
    },
    /// Type-check a program.
    Check {
        file: PathBuf,
        #[arg(long, value_enum)]
        system: System,
        #[arg(long)]
        json: bool,
    },
    /// CPS-transform an ATM-typable program into a handler-free one.
    Cps {
        file: PathBuf,
        #[arg(short = 'o')]
        out: PathBuf,
        /// Also write the typing derivation and the target type as JSON.
        #[arg(long)]
        deriv: Option<PathBuf>,
    },
    /// Decide whether a program returns true.
    Reach {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "auto")]
        route: RouteArg,
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long)]
        json: bool,
    },
    /// Two-register Minsky machines.
    Minsky {
        #[command(subcommand)]
        cmd: MinskyCmd,
    },
    /// The shipped corpus.
    Corpus {
        #[command(subcommand)]
        cmd: CorpusCmd,
    },
}

#[derive(Subcommand)]
enum MinskyCmd {
    Simulate {
        file: PathBuf,
        #[arg(long)]
        fuel: u64,
    },
    Compile {
        file: PathBuf,
        #[arg(short = 'o')]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum CorpusCmd {
    /// Run every acceptance check.
    Verify,
}

#[derive(Clone, Copy, ValueEnum)]
enum System {
    St,
    Atm,
}

#[derive(Clone, Copy, ValueEnum)]
enum RouteArg {
    Auto,
    Direct,
    ViaCps,
}

const YES: u8 = 0;
const NO: u8 = 1;
const UNKNOWN: u8 = 2;
const ERROR: u8 = 3;

type Res = Result<u8, String>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { ERROR } else { YES });
        }
    };
    match dispatch(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(ERROR)
        }
    }
}

fn dispatch(cmd: Cmd) -> Res {
    match cmd {
        Cmd::Parse { file } => parse_cmd(&file),
        Cmd::Run { file, budget, trace } => run_cmd(&file, budget, trace),
        Cmd::Check { file, system, json } => check_cmd(&file, system, json),
        Cmd::Cps { file, out, deriv } => cps_cmd(&file, &out, deriv.as_deref()),
        Cmd::Reach {
            file,
            route,
            budget,
            json,
        } => reach_cmd(&file, route, budget, json),
        Cmd::Minsky {
            cmd: MinskyCmd::Simulate { file, fuel },
        } => {
            let m = parse_machine(&read(&file)?).map_err(|e| e.to_string())?;
            let o = m.simulate(fuel);
            println!("{o}");
            Ok(if o.halted() { YES } else { UNKNOWN })
        }
        Cmd::Minsky {
            cmd: MinskyCmd::Compile { file, out },
        } => {
            let m = parse_machine(&read(&file)?).map_err(|e| e.to_string())?;
            write(&out, &compile_mm_source(&m))?;
            Ok(YES)
        }
        Cmd::Corpus { cmd: CorpusCmd::Verify } => {
            let reports = verify::all(verify::Params::default());
            for r in &reports {
                println!("{r}");
            }
            Ok(if reports.iter().all(|r| r.passed) { YES } else { NO })
        }
    }
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<(), String> {
    std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn load(path: &Path) -> Result<ProgramFile, String> {
    parse(&read(path)?).map_err(|e| format!("{}:{e}", path.display()))
}

fn budget(flag: Option<u64>) -> u64 {
    flag.unwrap_or_else(budget_from_env)
}

fn parse_cmd(path: &Path) -> Res {
    let f = load(path)?;
    let printed = print_program(&f);
    let g = parse(&printed).map_err(|e| format!("printed program does not parse: {e}"))?;
    let (a, b) = (
        f.program().map_err(|e| e.to_string())?,
        g.program().map_err(|e| e.to_string())?,
    );
    if !alpha_eq_comp(&a, &b) {
        return Err("printing changed the program".into());
    }
    print!("{printed}");
    Ok(YES)
}

fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::Yes => YES,
        Verdict::No(_) => NO,
        Verdict::Unknown => UNKNOWN,
    }
}

fn run_cmd(path: &Path, flag: Option<u64>, show: bool) -> Res {
    let f = load(path)?;
    let c = f.program().map_err(|e| e.to_string())?;
    let budget = budget(flag);
    if show {
        let limit = usize::try_from(budget.saturating_add(1)).unwrap_or(usize::MAX);
        for (i, cfg) in trace(&c, limit).iter().enumerate() {
            println!("{i}: {}", print_comp(cfg));
        }
    }
    let (o, stats) = eval(&c, budget, true);
    println!("{o}");
    println!("steps: {}, max active handlers: {}", stats.steps, stats.max_active_handlers);
    Ok(match &o {
        Outcome::Returned(v) if v.as_bool() == Some(true) => YES,
        Outcome::Returned(_) | Outcome::Stuck { .. } | Outcome::CycleDetected { .. } => NO,
        Outcome::BudgetExhausted { .. } => UNKNOWN,
        Outcome::DynamicError { .. } => ERROR,
    })
}

fn check_cmd(path: &Path, system: System, as_json: bool) -> Res {
    let f = load(path)?;
    let c = f.program().map_err(|e| e.to_string())?;
    let sig = f.signature();
    let (name, result) = match system {
        System::St => ("st", check_st_program(&sig, &c).map(|t| (t.to_string(), None)).map_err(|e| e.to_string())),
        System::Atm => (
            "atm",
            check_atm_program(&sig, &c)
                .map(|d| (d.ty.as_ref().map(|t| t.to_string()).unwrap_or_default(), Some(deriv_to_json(&d))))
                .map_err(|e| e.to_string()),
        ),
    };
    if as_json {
        let v = match &result {
            Ok((ty, d)) => json!({"system": name, "typable": true, "type": ty, "derivation": d}),
            Err(e) => json!({"system": name, "typable": false, "error": e}),
        };
        println!("{v}");
    } else {
        match &result {
            Ok((ty, _)) => println!("{ty}"),
            Err(e) => println!("untypable: {e}"),
        }
    }
    Ok(if result.is_ok() { YES } else { NO })
}

fn cps_cmd(path: &Path, out: &Path, deriv: Option<&Path>) -> Res {
    let f = load(path)?;
    let c = f.program().map_err(|e| e.to_string())?;
    let sig = f.signature();
    let d = match check_atm_program(&sig, &c) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("not ATM-typable: {e}");
            return Ok(NO);
        }
    };
    let o = cps_term(&sig, &d).map_err(|e| e.to_string())?;
    let target = ProgramFile {
        st_signature: None,
        atm_signature: None,
        aliases: vec![("Handlers".to_string(), TyExpr::from(&o.sigma))],
        defs: vec![],
        main: Expr::from_term(&Term::Comp(o.comp())),
    };
    write(out, &print_program(&target))?;
    if let Some(p) = deriv {
        let side = json!({
            "type": o.ty.to_string(),
            "handlers": o.sigma.to_string(),
            "derivation": deriv_to_json(&d),
        });
        write(p, &serde_json::to_string_pretty(&side).map_err(|e| e.to_string())?)?;
    }
    println!("{}", o.ty);
    Ok(YES)
}

fn reach_cmd(path: &Path, route: RouteArg, flag: Option<u64>, as_json: bool) -> Res {
    let f = load(path)?;
    let route = match route {
        RouteArg::Auto => RouteChoice::Auto,
        RouteArg::Direct => RouteChoice::Direct,
        RouteArg::ViaCps => RouteChoice::ViaCps,
    };
    let v = match decide_reachability(&f, budget(flag), route) {
        Ok(v) => v,
        Err(e @ feh::reach::ReachError::Untypable(_)) => {
            eprintln!("{e}");
            return Ok(NO);
        }
        Err(e) => return Err(e.to_string()),
    };
    if as_json {
        println!("{}", v.to_json());
    } else {
        println!("{} via {} after {} steps", v.verdict, v.route, v.steps);
    }
    Ok(verdict_code(v.verdict))
}
