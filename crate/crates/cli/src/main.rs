use std::path::PathBuf;
use std::process::ExitCode;

use cgsde::artifacts::write_outputs;
use cgsde::config::read_config_file;
use cgsde::error::{config_error, Result};
use cgsde::Experiment;

const USAGE: &str = "usage: cgsde <experiment> [--key value ...] [--config FILE] --out DIR
       cgsde list
       cgsde help <experiment>

exit codes: 0 all checks pass, 1 a check fails or the run errors, 2 configuration error";

enum Command {
    Help(Option<Experiment>),
    List,
    Run { experiment: Experiment, overrides: Vec<(String, String)>, out: PathBuf },
}

fn parse(args: &[String]) -> Result<Command> {
    let Some(first) = args.first() else {
        return config_error(format!("missing experiment\n{USAGE}"));
    };
    match first.as_str() {
        "-h" | "--help" | "help" => return Ok(Command::Help(args.get(1).map(|id| Experiment::parse(id)).transpose()?)),
        "list" => return Ok(Command::List),
        _ => {}
    }
    let experiment = Experiment::parse(first)?;
    let mut overrides = Vec::new();
    let mut out = None;
    let mut rest = args[1..].iter();
    while let Some(flag) = rest.next() {
        if flag == "-h" || flag == "--help" {
            return Ok(Command::Help(Some(experiment)));
        }
        let Some(name) = flag.strip_prefix("--") else {
            return config_error(format!("unexpected argument {flag:?}\n{USAGE}"));
        };
        let Some(value) = rest.next() else {
            return config_error(format!("{flag} needs a value"));
        };
        match name {
            "out" => out = Some(PathBuf::from(value)),
            // file values come before later command-line overrides
            "config" => overrides.extend(read_config_file(value.as_ref())?),
            _ => overrides.push((name.to_string(), value.clone())),
        }
    }
    let Some(out) = out else {
        return config_error("--out DIR is required");
    };
    Ok(Command::Run { experiment, overrides, out })
}

fn help(e: Option<Experiment>) {
    match e {
        None => {
            println!("{USAGE}\n\nexperiments:");
            for e in Experiment::ALL {
                println!("  {:<16} {}", e.id(), e.summary());
            }
        }
        Some(e) => {
            println!("{}: {}\n\nparameters (--key value):", e.id(), e.summary());
            for k in e.schema() {
                println!("  {:<22} {:<20} {}", k.name, k.default, k.help);
            }
        }
    }
}

fn run(args: &[String]) -> Result<bool> {
    match parse(args)? {
        Command::Help(e) => help(e),
        Command::List => Experiment::ALL.iter().for_each(|e| println!("{}", e.id())),
        Command::Run { experiment, overrides, out } => {
            let params = experiment.resolve(&overrides)?;
            let outcome = experiment.run(&params)?;
            write_outputs(&out, experiment, &params, &outcome)?;
            for c in &outcome.verdict.checks {
                println!("{} {}: value {:.6e} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.rule);
            }
            let failed = outcome.verdict.failures().count();
            println!("{}: {} of {} checks passed; outputs in {}", experiment.id(), outcome.verdict.checks.len() - failed, outcome.verdict.checks.len(), out.display());
            return Ok(failed == 0);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("cgsde: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
