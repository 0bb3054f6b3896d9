mod commands;
mod context;
mod selftest;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ocq_core::{Error, ErrorKind};
use serde_json::json;

use crate::context::Context;

#[derive(Parser, Debug)]
#[command(
    name = "ocq",
    version,
    about = "p-adic families of nearly overconvergent forms on q-expansions"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Residue characteristic.
    #[arg(long, global = true, default_value_t = 5)]
    p: u32,
    /// p-adic precision N.
    #[arg(long = "prec-p", global = true, default_value_t = 12)]
    prec_p: u32,
    /// Family truncation M (coefficients in Z_p[T]/T^M).
    #[arg(long = "family-m", global = true, default_value_t = 4)]
    family_m: usize,
    /// q-adic precision Q (highest coefficient index).
    #[arg(long = "prec-q", global = true, default_value_t = 200)]
    prec_q: usize,
    /// Tail order J of fractional iterates (default 2p^2 + 8).
    #[arg(long, global = true)]
    tail: Option<usize>,
    /// Absolute precision floor (default ceil(N/2)).
    #[arg(long, global = true, allow_hyphen_values = true)]
    floor: Option<i64>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for independent computations.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Eigenform fixtures: a JSON object keyed by label, or a directory of `<label>.json`.
    #[arg(long, global = true, env = "OCQ_FIXTURES")]
    fixtures: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate or transform a q-expansion.
    Qexp(commands::QexpArgs),
    /// Iterate the Gauss-Manin connection.
    Nabla(commands::NablaArgs),
    /// Fractional iterate of the connection.
    #[command(name = "nabla-s")]
    NablaS(commands::NablaSArgs),
    /// Overconvergent projection.
    Hdagger(commands::HdaggerArgs),
    /// Twist by a tame character.
    Twist(commands::TwistArgs),
    /// Newton polygons, slope factorizations and projectors.
    Spectral(commands::SpectralArgs),
    /// The two p-stabilizations of an eigenform.
    Stabilize(commands::StabilizeArgs),
    /// Euler factors and the interpolation bracket.
    Euler(commands::EulerArgs),
    /// The triple-product bracket at a classical point.
    Triple(commands::TripleArgs),
    /// Run the invariant suite and report.
    Selftest,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Qexp(_) => "qexp",
            Command::Nabla(_) => "nabla",
            Command::NablaS(_) => "nabla-s",
            Command::Hdagger(_) => "hdagger",
            Command::Twist(_) => "twist",
            Command::Spectral(_) => "spectral",
            Command::Stabilize(_) => "stabilize",
            Command::Euler(_) => "euler",
            Command::Triple(_) => "triple",
            Command::Selftest => "selftest",
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<serde_json::Value> {
    let g = cli.global;
    let ctx = Context::new(
        g.p, g.prec_p, g.family_m, g.prec_q, g.tail, g.floor, g.seed, g.fixtures,
    )?;
    match cli.command {
        Command::Qexp(a) => commands::qexp(&ctx, &a),
        Command::Nabla(a) => commands::nabla(&ctx, &a),
        Command::NablaS(a) => commands::nabla_s(&ctx, &a),
        Command::Hdagger(a) => commands::hdagger(&ctx, &a),
        Command::Twist(a) => commands::twist(&ctx, &a),
        Command::Spectral(a) => commands::spectral(&ctx, &a),
        Command::Stabilize(a) => commands::stabilize(&ctx, &a),
        Command::Euler(a) => commands::euler(&ctx, &a),
        Command::Triple(a) => commands::triple(&ctx, &a),
        Command::Selftest => selftest::run(&ctx, g.jobs.max(1)),
    }
}

/// Context layers down to the first library error, which already renders its sources.
fn message(err: &anyhow::Error) -> String {
    let mut parts = Vec::new();
    for layer in err.chain() {
        parts.push(layer.to_string());
        if layer.is::<Error>() {
            break;
        }
    }
    parts.join(": ")
}

fn exit_code(err: &anyhow::Error, command: &str) -> (u8, serde_json::Value) {
    let Some(e) = err.chain().find_map(|c| c.downcast_ref::<Error>()) else {
        if err.chain().any(|c| c.is::<serde_json::Error>()) {
            return (
                2,
                json!({ "error": format!("{err:#}"), "kind": "malformed" }),
            );
        }
        return (1, json!({ "error": format!("{err:#}"), "kind": "other" }));
    };
    let (code, kind) = match e.kind() {
        ErrorKind::Malformed => (2, "malformed"),
        ErrorKind::Precision => (3, "precision"),
        ErrorKind::Assumption => (4, "assumption"),
        ErrorKind::Other => (1, "other"),
    };
    let stage = match e {
        Error::Stage { stage, .. } => stage.as_str(),
        _ => command,
    };
    (
        code,
        json!({ "error": message(err), "kind": kind, "stage": stage }),
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = cli.command.name();
    match run(cli) {
        Ok(out) => {
            let text = serde_json::to_string_pretty(&out).expect("serializable output");
            if writeln!(std::io::stdout(), "{text}").is_err() {
                return ExitCode::FAILURE;
            }
            match out.get("pass") {
                Some(serde_json::Value::Bool(false)) => ExitCode::FAILURE,
                _ => ExitCode::SUCCESS,
            }
        }
        Err(err) => {
            let (code, report) = exit_code(&err, command);
            eprintln!(
                "{}",
                serde_json::to_string_pretty(&report).expect("serializable report")
            );
            ExitCode::from(code)
        }
    }
}
