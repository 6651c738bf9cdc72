use opweight::suite::{run_all, SuiteConfig};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn opweight(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opweight"))
        .args(args)
        .env("OPWEIGHT_THREADS", "0")
        .output()
        .expect("binary runs")
}

fn path_arg(name: &str) -> String {
    fixture(name).to_string_lossy().into_owned()
}

fn cli_determinism() -> (bool, String) {
    let args = ["suite", "--samples", "20", "--seed", "11"];
    let first = opweight(&args);
    let second = opweight(&args);
    let identical = first.status.code() == Some(0) && !first.stdout.is_empty() && first.stdout == second.stdout;

    let w = path_arg("faithful_weight.json");
    let a = opweight(&["verify", &w, "--seed", "3"]);
    let b = opweight(&["verify", &w, "--seed", "3"]);
    let verify_identical = a.stdout == b.stdout && a.status.code() == Some(0);

    let pass_code = opweight(&["ksgns", &path_arg("identity_weight.json")]).status.code();
    let fail_code = opweight(&["verify", &w, "--tol", "1e-30"]).status.code();
    let parse_code = opweight(&["ksgns", &path_arg("malformed.json")]).status.code();

    let ok = identical && verify_identical && pass_code == Some(0) && fail_code == Some(1) && parse_code == Some(2);
    let detail = format!(
        "suite identical {identical}, verify identical {verify_identical}, exit codes pass {pass_code:?} property-fail {fail_code:?} parse-fail {parse_code:?}"
    );
    (ok, detail)
}

fn main() -> ExitCode {
    let outcomes = run_all(&SuiteConfig::default());
    let mut all = true;
    for o in &outcomes {
        println!("{}", o.line());
        if !o.pass {
            all = false;
            for c in o.checks.failures() {
                println!("    failing {} residual {:e}", c.check, c.residual);
            }
        }
    }
    let (ok, detail) = cli_determinism();
    println!("criterion 12 {:<28} {} ({detail})", "cli-determinism", if ok { "PASS" } else { "FAIL" });
    all &= ok;
    all &= outcomes.len() == 11;
    println!("acceptance: {}", if all { "all criteria pass" } else { "FAILED" });
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
