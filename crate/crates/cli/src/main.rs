use clap::{Parser, Subcommand, ValueEnum};
use opweight::cpmap::{check_completely_positive, CpFamilySampler};
use opweight::json::{self, FormatError};
use opweight::ksgns::{build_canonical_ksgns, check_lower_semicontinuity, multiplier_extension_check, verify_ksgns};
use opweight::random::substream;
use opweight::regular::{construct_weight, regular_data};
use opweight::suite::{self, SuiteConfig};
use opweight::tensor::{check_T_transport, check_factorization, tensor_weight, RegularWeight};
use opweight::{Element, Error, Report};
use rand::Rng;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "opweight", version, about = "Constructions and certification for C*-valued weights")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Relative tolerance of every residual check.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    /// Seed of the run generator.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Instance budget per suite; sampler budgets are derived from it.
    #[arg(long, global = true, default_value_t = 200)]
    samples: usize,
    /// Write the JSON document here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Canonical KSGNS construction of a weight.
    Ksgns { weight: PathBuf },
    /// Full certification of a weight: KSGNS clauses, lower semicontinuity, truncating net.
    Verify { weight: PathBuf },
    /// Weight from seed data.
    Construct {
        #[arg(value_name = "SEED_FILE")]
        seed_file: PathBuf,
    },
    /// Tensor product of two weights.
    Tensor { first: PathBuf, second: PathBuf },
    /// Every certification suite.
    Suite,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum Format {
    Json,
    Text,
}

enum Failure {
    Io(String),
    Parse(FormatError),
    Lib(Error),
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        Failure::Parse(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Io(_) | Failure::Parse(_) => 2,
            Failure::Lib(Error::NotCompletelyPositive { .. })
            | Failure::Lib(Error::SeedInconsistent { .. })
            | Failure::Lib(Error::IllDefined { .. }) => 3,
            Failure::Lib(_) => 1,
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Failure::Io(m) => json!({ "kind": "io", "message": m }),
            Failure::Parse(e @ FormatError::Syntax { line, column, .. }) => {
                json!({ "kind": "parse", "message": e.to_string(), "line": line, "column": column })
            }
            Failure::Parse(e @ FormatError::Schema { path, .. }) => {
                json!({ "kind": "parse", "message": e.to_string(), "path": path })
            }
            Failure::Lib(e) => {
                let mut v = json!({ "kind": kind_of(e), "message": e.to_string() });
                if let Error::NotCompletelyPositive { witness, .. } = e {
                    v["witness"] = witness.clone();
                }
                v
            }
        }
    }
}

fn kind_of(e: &Error) -> &'static str {
    match e {
        Error::NotCompletelyPositive { .. } => "not-completely-positive",
        Error::SeedInconsistent { .. } => "seed-inconsistent",
        Error::IllDefined { .. } => "ill-defined",
        Error::CertificationFailed(_) => "certification-failed",
        _ => "error",
    }
}

struct Outcome {
    report: Report,
    result: Option<(&'static str, Value)>,
    lines: Vec<String>,
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn sampler_budget(samples: usize) -> usize {
    (samples / 8).max(1)
}

fn cmd_ksgns(cli: &Cli, path: &Path) -> Result<Outcome, Failure> {
    let phi = json::parse_weight(&read(path)?)?;
    check_completely_positive(phi.map(), cli.tol)?;
    let t = build_canonical_ksgns(&phi)?;
    let report = verify_ksgns(&phi, &t, cli.tol);
    Ok(Outcome { report, result: Some(("triplet", json::triplet_to_json(&t))), lines: Vec::new() })
}

fn cmd_verify(cli: &Cli, path: &Path) -> Result<Outcome, Failure> {
    let phi = json::parse_weight(&read(path)?)?;
    check_completely_positive(phi.map(), cli.tol)?;
    let t = build_canonical_ksgns(&phi)?;
    let mut report = verify_ksgns(&phi, &t, cli.tol);
    if phi.is_densely_defined() {
        let mut sampler = CpFamilySampler::new(&t, 0.9, cli.seed)?.with_budget(sampler_budget(cli.samples));
        report.extend(check_lower_semicontinuity(&phi, &mut sampler, cli.tol)?);
        report.extend(multiplier_extension_check(&phi, &mut sampler)?);
        match regular_data(&phi, cli.tol) {
            Ok((_, net)) => report.extend(net.report().clone()),
            Err(e) => report.flag("def3.1/net", false, Some(json!({ "error": e.to_string() }))),
        }
    } else {
        report.flag(
            "def3.1/net",
            true,
            Some(json!({ "skipped": "weight is not densely defined" })),
        );
    }
    Ok(Outcome { report, result: None, lines: Vec::new() })
}

fn cmd_construct(cli: &Cli, path: &Path) -> Result<Outcome, Failure> {
    let seed = json::parse_seed(&read(path)?)?;
    let c = construct_weight(&seed, cli.tol)?;
    Ok(Outcome {
        report: c.report,
        result: Some(("weight", json::weight_to_json(&c.weight))),
        lines: Vec::new(),
    })
}

fn cmd_tensor(cli: &Cli, first: &Path, second: &Path) -> Result<Outcome, Failure> {
    let w1 = json::parse_weight(&read(first)?)?;
    let w2 = json::parse_weight(&read(second)?)?;
    for w in [&w1, &w2] {
        check_completely_positive(w.map(), cli.tol)?;
    }
    let f1 = RegularWeight::canonical(w1, cli.tol)?;
    let f2 = RegularWeight::canonical(w2, cli.tol)?;
    let tw = tensor_weight(&f1, &f2, cli.tol)?;
    let mut report = tw.report().clone();
    report.extend(check_factorization(&tw, cli.tol));
    let mut s1 = CpFamilySampler::new(&f1.triplet, 0.5, cli.seed)?;
    let mut s2 = CpFamilySampler::new(&f2.triplet, 0.5, substream(cli.seed, "tensor").random())?;
    report.extend(check_T_transport(&tw, &s1.sample(), &s2.sample(), cli.tol));
    let unit = Element::unit(tw.product().source());
    let mut rng = substream(cli.seed, "tensor-probe");
    let d = opweight::random::gaussian_element(&mut rng, tw.product().target());
    let mut s1 = s1.with_budget(sampler_budget(cli.samples).min(16));
    let mut s2 = s2.with_budget(sampler_budget(cli.samples).min(16));
    report.extend(opweight::tensor::check_product_convergence(&tw, &unit, &d, &mut s1, &mut s2, cli.tol));
    Ok(Outcome {
        report,
        result: Some(("weight", json::weight_to_json(tw.product()))),
        lines: Vec::new(),
    })
}

fn cmd_suite(cli: &Cli) -> Result<Outcome, Failure> {
    let cfg = SuiteConfig { tol: cli.tol, seed: cli.seed, samples: cli.samples };
    let outcomes = suite::run_all(&cfg);
    let mut report = Report::new();
    let mut lines = Vec::new();
    for o in &outcomes {
        lines.push(o.line());
        report.extend_prefixed(&format!("c{:02}:", o.id), o.checks.clone());
    }
    let criteria = serde_json::to_value(&outcomes).expect("serializable");
    Ok(Outcome { report, result: Some(("criteria", criteria)), lines })
}

fn text_document(command: &str, report: &Report, lines: &[String], error: Option<&Value>) -> String {
    let mut out = format!("{command}: {}\n", if error.is_none() && report.all_pass() { "PASS" } else { "FAIL" });
    for l in lines {
        out.push_str(l);
        out.push('\n');
    }
    for c in &report.checks {
        out.push_str(&format!(
            "  [{}] {:<40} {:.3e}\n",
            if c.pass { "ok" } else { "FAIL" },
            c.check,
            c.residual
        ));
    }
    if let Some(e) = error {
        out.push_str(&format!("error: {}\n", e["message"].as_str().unwrap_or("")));
    }
    out
}

fn emit(cli: &Cli, doc: String) -> Result<(), Failure> {
    match &cli.out {
        Some(p) => std::fs::write(p, doc).map_err(|e| Failure::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{doc}");
            Ok(())
        }
    }
}

fn configure_threads() {
    let n = std::env::var("OPWEIGHT_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .unwrap_or(0);
    if n > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let name = match &cli.command {
        Command::Ksgns { .. } => "ksgns",
        Command::Verify { .. } => "verify",
        Command::Construct { .. } => "construct",
        Command::Tensor { .. } => "tensor",
        Command::Suite => "suite",
    };
    let result = match &cli.command {
        Command::Ksgns { weight } => cmd_ksgns(&cli, weight),
        Command::Verify { weight } => cmd_verify(&cli, weight),
        Command::Construct { seed_file } => cmd_construct(&cli, seed_file),
        Command::Tensor { first, second } => cmd_tensor(&cli, first, second),
        Command::Suite => cmd_suite(&cli),
    };
    let (code, doc) = match result {
        Ok(o) => {
            let report = o.report.sorted();
            let pass = report.all_pass();
            let doc = match cli.format {
                Format::Json => {
                    let mut v = json!({ "command": name, "pass": pass, "checks": report });
                    if let Some((k, r)) = o.result {
                        v[k] = r;
                    }
                    serde_json::to_string_pretty(&v).expect("serializable") + "\n"
                }
                Format::Text => text_document(name, &report, &o.lines, None),
            };
            (if pass { 0 } else { 1 }, doc)
        }
        Err(f) => {
            let e = f.to_json();
            let doc = match cli.format {
                Format::Json => {
                    let v = json!({ "command": name, "pass": false, "error": e });
                    serde_json::to_string_pretty(&v).expect("serializable") + "\n"
                }
                Format::Text => text_document(name, &Report::new(), &[], Some(&e)),
            };
            eprintln!("opweight {name}: {}", e["message"].as_str().unwrap_or("error"));
            (f.exit_code(), doc)
        }
    };
    match emit(&cli, doc) {
        Ok(()) => ExitCode::from(code),
        Err(f) => {
            eprintln!("opweight: {}", f.to_json()["message"].as_str().unwrap_or("write failed"));
            ExitCode::from(2)
        }
    }
}
