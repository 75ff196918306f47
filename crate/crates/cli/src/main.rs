//! `bewley`: validate, audit and query variational Bewley preference profiles.
//!
//! Exit codes: 0 clean, 1 bad input to `validate`/`dominance`, 2 the audited
//! profile is invalid, 3 a condition violation was found (witness attached),
//! 4 the oracle found a Pareto violation the condition missed, 5 an internal
//! certificate failed verification.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bewley::audit::{run_audit, AuditOptions};
use bewley::document::{ActsDocument, NamedAct, ProfileDocument};
use bewley::preference::relation_with_tolerance;
use bewley::{fixtures, validate_profile, Profile, Tolerances, ValidationError, EPS_DEC};
use clap::{Parser, Subcommand};
use serde_json::json;

const EXIT_INPUT: u8 = 1;
const EXIT_INVALID_PROFILE: u8 = 2;
const EXIT_INTERNAL: u8 = 5;

#[derive(Parser)]
#[command(name = "bewley", version, about)]
struct Cli {
    /// Directory searched for profile and acts files not found as given.
    #[arg(long, env = "BEWLEY_FIXTURES", global = true)]
    fixtures: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a profile and check every invariant.
    Validate { profile: PathBuf },
    /// Run the aggregation audit and print a JSON report.
    Audit {
        profile: PathBuf,
        /// Seed of the act sampler.
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Resolution of the prior lattice used by the oracle.
        #[arg(long)]
        grid: Option<usize>,
        /// Number of sampled act pairs.
        #[arg(long, default_value_t = 4096)]
        samples: usize,
        /// Decision threshold for margins and gaps.
        #[arg(long, default_value_t = EPS_DEC)]
        tolerance: f64,
        /// Print only the human-readable summary.
        #[arg(long)]
        summary: bool,
    },
    /// Compare two acts for one member of the profile.
    Dominance {
        profile: PathBuf,
        /// Member index: 0 is the planner, 1..=n the individuals.
        #[arg(long)]
        agent: usize,
        /// Acts file; the first two acts are compared unless named.
        #[arg(long)]
        acts: PathBuf,
        #[arg(long)]
        f: Option<String>,
        #[arg(long)]
        g: Option<String>,
        #[arg(long, default_value_t = EPS_DEC)]
        tolerance: f64,
    },
    /// Print one of the embedded example profiles.
    Fixture { name: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let fixtures = cli.fixtures.as_deref();
    match cli.command {
        Command::Validate { profile } => validate(&resolve(&profile, fixtures)),
        Command::Audit {
            profile,
            seed,
            grid,
            samples,
            tolerance,
            summary,
        } => {
            let options = AuditOptions {
                seed,
                grid,
                samples,
                tolerances: Tolerances {
                    decision: tolerance,
                    ..Tolerances::default()
                },
            };
            audit(&resolve(&profile, fixtures), &options, summary)
        }
        Command::Dominance {
            profile,
            agent,
            acts,
            f,
            g,
            tolerance,
        } => dominance(
            &resolve(&profile, fixtures),
            agent,
            &resolve(&acts, fixtures),
            f.as_deref(),
            g.as_deref(),
            tolerance,
        ),
        Command::Fixture { name } => {
            let key = if name.ends_with(".json") {
                name
            } else {
                format!("{name}.json")
            };
            match fixtures::PROFILES.iter().find(|(n, _)| *n == key) {
                Some((_, text)) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                None => {
                    let known: Vec<&str> = fixtures::PROFILES.iter().map(|(n, _)| *n).collect();
                    eprintln!("unknown fixture '{key}'; available: {}", known.join(", "));
                    ExitCode::from(EXIT_INPUT)
                }
            }
        }
    }
}

fn resolve(path: &Path, fixtures: Option<&Path>) -> PathBuf {
    match fixtures {
        Some(dir) if !path.exists() && path.is_relative() => {
            let candidate = dir.join(path);
            if candidate.exists() {
                return candidate;
            }
            path.file_name()
                .map(|name| dir.join(name))
                .filter(|p| p.exists())
                .unwrap_or_else(|| path.to_path_buf())
        }
        _ => path.to_path_buf(),
    }
}

fn error_list(errors: &[ValidationError]) -> serde_json::Value {
    json!({
        "valid": false,
        "errors": errors
            .iter()
            .map(|e| json!({ "member": e.member, "message": e.to_string() }))
            .collect::<Vec<_>>(),
    })
}

#[allow(clippy::large_enum_variant)] // built once per run
enum Load {
    Ok(ProfileDocument, Profile),
    Unreadable(String),
    Invalid(Vec<ValidationError>),
}

fn load(path: &Path) -> Load {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return Load::Unreadable(format!("{}: {e}", path.display())),
    };
    let doc = match ProfileDocument::from_json(&text) {
        Ok(d) => d,
        Err(e) => return Load::Unreadable(format!("{}: {e}", path.display())),
    };
    match validate_profile(&doc) {
        Ok(p) => Load::Ok(doc, p),
        Err(errors) => Load::Invalid(errors),
    }
}

fn report_unreadable(message: &str) {
    println!(
        "{}",
        serde_json::to_string_pretty(
            &json!({ "valid": false, "errors": [{ "member": null, "message": message }] })
        )
        .expect("json")
    );
    eprintln!("error: {message}");
}

fn report_invalid(errors: &[ValidationError]) {
    println!(
        "{}",
        serde_json::to_string_pretty(&error_list(errors)).expect("json")
    );
    for e in errors {
        eprintln!("error: {e}");
    }
}

fn validate(path: &Path) -> ExitCode {
    match load(path) {
        Load::Ok(_, profile) => {
            let summary = json!({
                "valid": true,
                "states": profile.state_count(),
                "agents": profile.agent_count(),
                "outcome_dim": profile.outcome_dim(),
            });
            println!("{}", serde_json::to_string_pretty(&summary).expect("json"));
            ExitCode::SUCCESS
        }
        Load::Unreadable(message) => {
            report_unreadable(&message);
            ExitCode::from(EXIT_INPUT)
        }
        Load::Invalid(errors) => {
            report_invalid(&errors);
            ExitCode::from(EXIT_INPUT)
        }
    }
}

fn audit(path: &Path, options: &AuditOptions, summary_only: bool) -> ExitCode {
    let (doc, profile) = match load(path) {
        Load::Ok(doc, profile) => (doc, profile),
        Load::Unreadable(message) => {
            report_unreadable(&message);
            return ExitCode::from(EXIT_INVALID_PROFILE);
        }
        Load::Invalid(errors) => {
            report_invalid(&errors);
            return ExitCode::from(EXIT_INVALID_PROFILE);
        }
    };
    match run_audit(&profile, &doc.acts, options) {
        Ok(report) => {
            if summary_only {
                println!("{}", report.summary);
            } else {
                println!("{}", report.to_json());
                eprintln!("{}", report.summary);
            }
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INTERNAL)
        }
    }
}

fn pick<'a>(
    acts: &'a [NamedAct],
    name: Option<&str>,
    fallback: usize,
) -> Result<&'a NamedAct, String> {
    match name {
        Some(n) => acts
            .iter()
            .find(|a| a.name == n)
            .ok_or_else(|| format!("no act named '{n}'")),
        None => acts
            .get(fallback)
            .ok_or_else(|| format!("acts file needs at least {} acts", fallback + 1)),
    }
}

fn dominance(
    path: &Path,
    member: usize,
    acts_path: &Path,
    f_name: Option<&str>,
    g_name: Option<&str>,
    tolerance: f64,
) -> ExitCode {
    let fail = |message: String| {
        eprintln!("error: {message}");
        ExitCode::from(EXIT_INPUT)
    };
    let profile = match load(path) {
        Load::Ok(_, profile) => profile,
        Load::Unreadable(message) => return fail(message),
        Load::Invalid(errors) => {
            report_invalid(&errors);
            return ExitCode::from(EXIT_INPUT);
        }
    };
    let Some(pref) = profile.member(member) else {
        return fail(format!(
            "unknown agent {member}: use 0 for the planner or 1..={}",
            profile.agent_count()
        ));
    };
    let acts = match fs::read_to_string(acts_path)
        .map_err(|e| e.to_string())
        .and_then(|t| ActsDocument::from_json(&t).map_err(|e| e.to_string()))
    {
        Ok(doc) => doc.acts,
        Err(e) => return fail(format!("{}: {e}", acts_path.display())),
    };
    let (fa, ga) = match (pick(&acts, f_name, 0), pick(&acts, g_name, 1)) {
        (Ok(f), Ok(g)) => (f, g),
        (Err(e), _) | (_, Err(e)) => return fail(e),
    };
    let parsed = fa.to_act().and_then(|f| {
        profile.check_act(&f)?;
        let g = ga.to_act()?;
        profile.check_act(&g)?;
        Ok((f, g))
    });
    let (f, g) = match parsed {
        Ok(pair) => pair,
        Err(e) => return fail(format!("malformed acts: {e}")),
    };
    let report = match relation_with_tolerance(&pref.utility, &pref.perception, &f, &g, tolerance) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INTERNAL);
        }
    };
    let out = json!({
        "member": member,
        "f": fa.name,
        "g": ga.name,
        "comparison": report.comparison,
        "forward": report.forward,
        "backward": report.backward,
    });
    println!("{}", serde_json::to_string_pretty(&out).expect("json"));
    eprintln!(
        "{} vs {} for {}: {:?} (margin f over g {}, g over f {})",
        fa.name,
        ga.name,
        if member == 0 {
            "the planner".to_string()
        } else {
            format!("individual {member}")
        },
        report.comparison,
        report.forward.margin,
        report.backward.margin
    );
    ExitCode::SUCCESS
}
