//! `conflict-dss`: command line front end and HTTP service.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 when an input fails to
//! parse or validate.

pub mod server;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;

use reflexive_conflict::api::{handle_evaluate, handle_evaluate_series, EvaluationRequest, Scenario, Semantics};
use reflexive_conflict::ingest::{
    aggregate_expert_estimates, bind_series_to_leaves, group_estimates_by_edge, parse_topic_series, ExpertEstimate,
    LeafBinding,
};
use reflexive_conflict::reflexive::{enumerate_truth_table, Side};
use reflexive_conflict::{build_pattern, GoalGraph, Series, SubjectSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "conflict-dss", version, about = "Reflexive two-subject conflict knowledge bases")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a KB document for structural problems
    Validate { kb: PathBuf },
    /// Emit the two-subject conflict pattern as a KB document
    Pattern {
        #[arg(long)]
        subject_a: String,
        #[arg(long)]
        subject_b: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Evaluate a KB (weighted) or the reflexive formulas (logic)
    Eval {
        kb: Option<PathBuf>,
        /// Flat JSON object of leaf or variable values
        #[arg(long)]
        leaves: Option<PathBuf>,
        #[arg(long, default_value = "weighted", value_parser = parse_semantics)]
        semantics: Semantics,
        #[arg(long)]
        epsilon: Option<f64>,
        /// Bound leaf series, as written by `ingest`
        #[arg(long)]
        series: Option<PathBuf>,
        /// Evaluate once at this date of the series
        #[arg(long)]
        at: Option<NaiveDate>,
        #[arg(long)]
        json: bool,
    },
    /// Enumerate all crisp assignments of one subject's variables
    TruthTable {
        #[arg(long, default_value = "A")]
        side: Side,
        #[arg(long)]
        json: bool,
    },
    /// Normalize topic counts and bind them to KB leaves
    Ingest {
        csv: PathBuf,
        #[arg(long)]
        bindings: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// KB to bind against; defaults to the conflict pattern
        #[arg(long)]
        kb: Option<PathBuf>,
    },
    /// Aggregate expert estimates into edge weights
    Aggregate {
        estimates: PathBuf,
        /// Apply the weights to this KB
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(short, long, requires = "kb")]
        output: Option<PathBuf>,
    },
    /// Run the HTTP/JSON service
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
}

fn parse_semantics(s: &str) -> Result<Semantics, String> {
    match s {
        "logic" => Ok(Semantics::Logic),
        "weighted" => Ok(Semantics::Weighted),
        other => Err(format!("expected `logic` or `weighted`, got `{other}`")),
    }
}

/// Failure of a subcommand after argument parsing.
#[derive(Debug)]
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type Outcome = Result<String, Failure>;

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn json_pretty<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Runs one invocation. `argv[0]` is the program name.
pub fn run_command<I, T>(argv: I) -> (i32, String)
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            return (code, e.render().to_string());
        }
    };
    match dispatch(cli.command) {
        Ok(out) => (EXIT_OK, out),
        Err(Failure(msg)) => (EXIT_INVALID, format!("error: {msg}\n")),
    }
}

fn dispatch(command: Command) -> Outcome {
    match command {
        Command::Validate { kb } => validate(&kb),
        Command::Pattern {
            subject_a,
            subject_b,
            output,
        } => pattern(&subject_a, &subject_b, output.as_deref()),
        Command::Eval {
            kb,
            leaves,
            semantics,
            epsilon,
            series,
            at,
            json,
        } => eval(EvalArgs {
            kb,
            leaves,
            semantics,
            epsilon,
            series,
            at,
            json,
        }),
        Command::TruthTable { side, json } => truth_table(side, json),
        Command::Ingest {
            csv,
            bindings,
            output,
            kb,
        } => ingest(&csv, &bindings, output.as_deref(), kb.as_deref()),
        Command::Aggregate { estimates, kb, output } => aggregate(&estimates, kb.as_deref(), output.as_deref()),
        Command::Serve { port, scenario } => serve(port, scenario.as_deref()),
    }
}

fn validate(path: &Path) -> Outcome {
    let kb: GoalGraph = read_json(path)?;
    let report = kb.validate();
    if report.is_valid() {
        Ok(format!(
            "valid: {} nodes, {} edges, {} groups\n",
            kb.nodes.len(),
            kb.edges.len(),
            kb.groups.len()
        ))
    } else {
        Err(Failure(format!("{} is invalid\n{report}", path.display())))
    }
}

fn pattern(a: &str, b: &str, output: Option<&Path>) -> Outcome {
    let kb = build_pattern(&SubjectSpec::new(a)?, &SubjectSpec::new(b)?)?;
    let doc = kb.to_document();
    match output {
        Some(path) => {
            write_text(path, &doc)?;
            Ok(format!(
                "wrote {}: {} nodes, {} edges\n",
                path.display(),
                kb.nodes.len(),
                kb.edges.len()
            ))
        }
        None => Ok(doc),
    }
}

struct EvalArgs {
    kb: Option<PathBuf>,
    leaves: Option<PathBuf>,
    semantics: Semantics,
    epsilon: Option<f64>,
    series: Option<PathBuf>,
    at: Option<NaiveDate>,
    json: bool,
}

fn eval(args: EvalArgs) -> Outcome {
    let values: BTreeMap<String, f64> = match &args.leaves {
        Some(p) => read_json(p)?,
        None => BTreeMap::new(),
    };
    let series: BTreeMap<String, Series> = match &args.series {
        Some(p) => read_json(p)?,
        None => BTreeMap::new(),
    };

    let scenario = match &args.kb {
        Some(path) => {
            let mut s = Scenario::new(read_json(path)?);
            if let Some(eps) = args.epsilon {
                s.epsilon = eps;
            }
            s.series = series;
            if args.semantics == Semantics::Weighted {
                s.leaves = values.clone();
            }
            s.check()?;
            Some(s)
        }
        None if args.semantics == Semantics::Weighted => {
            return Err(Failure("weighted evaluation needs a KB document".into()))
        }
        None => None,
    };

    // a series without --at yields G(t); everything else is one evaluation
    if args.semantics == Semantics::Weighted && args.at.is_none() && args.series.is_some() {
        let eval = handle_evaluate_series(scenario.as_ref())?;
        if args.json {
            return Ok(json_pretty(&eval));
        }
        let mut out = String::new();
        for p in &eval.points {
            let r = &p.result;
            writeln!(
                out,
                "{} g={} winner={} goal_a={} goal_b={} self_esteem_a={} self_esteem_b={}",
                p.timestamp,
                r.g_degree,
                r.winner,
                r.goal_a_degree,
                r.goal_b_degree,
                r.self_esteem_a_degree,
                r.self_esteem_b_degree
            )?;
        }
        return Ok(out);
    }

    let req = EvaluationRequest {
        semantics: args.semantics,
        values: if args.semantics == Semantics::Logic { values } else { BTreeMap::new() },
        timestamp: args.at,
        epsilon: None,
    };
    let resp = handle_evaluate(scenario.as_ref(), &req)?;
    if args.json {
        return Ok(json_pretty(&resp));
    }
    let mut out = String::new();
    if let Some(at) = resp.timestamp {
        writeln!(out, "at={at}")?;
    }
    if let Some(r) = &resp.conflict {
        writeln!(out, "g={} winner={}", r.g_degree, r.winner)?;
        writeln!(out, "goal_a={} goal_b={}", r.goal_a_degree, r.goal_b_degree)?;
        writeln!(out, "self_esteem_a={} self_esteem_b={}", r.self_esteem_a_degree, r.self_esteem_b_degree)?;
    }
    if let Some(o) = &resp.reflexive {
        writeln!(
            out,
            "A={} A1={} B={} B1={}",
            o.readiness_a, o.self_esteem_a, o.readiness_b, o.self_esteem_b
        )?;
    }
    for v in &resp.compatibility_violations {
        writeln!(out, "warning: compatibility group #{} has active members {}", v.group, v.active.join(", "))?;
    }
    Ok(out)
}

fn truth_table(side: Side, json: bool) -> Outcome {
    let rows = enumerate_truth_table(side);
    if json {
        return Ok(json_pretty(&rows));
    }
    let mut out = String::new();
    let names = side.variables();
    writeln!(
        out,
        "{} | {side} {side}1 | dnf:{side} dnf:{side}1",
        names.join(" ")
    )?;
    for row in &rows {
        let bits: Vec<String> = row.assignment.iter().map(|g| g.to_string()).collect();
        writeln!(
            out,
            "{} | {} {} | {} {}",
            bits.join("  "),
            row.logic.readiness,
            row.logic.self_esteem,
            row.dnf.readiness,
            row.dnf.self_esteem
        )?;
    }
    let ready = rows.iter().filter(|r| r.logic.readiness.value() == 1.0).count();
    let mismatches = rows.iter().filter(|r| !r.forms_agree()).count();
    writeln!(out, "rows={} readiness_true={ready} mismatches={mismatches}", rows.len())?;
    Ok(out)
}

fn default_kb() -> GoalGraph {
    build_pattern(
        &SubjectSpec::new("Subject A").expect("non-empty"),
        &SubjectSpec::new("Subject B").expect("non-empty"),
    )
    .expect("distinct subjects")
}

fn ingest(csv: &Path, bindings: &Path, output: Option<&Path>, kb: Option<&Path>) -> Outcome {
    let topics = parse_topic_series(&read_text(csv)?).map_err(|e| Failure(format!("{}: {e}", csv.display())))?;
    let bindings: Vec<LeafBinding> = read_json(bindings)?;
    let kb = match kb {
        Some(p) => read_json(p)?,
        None => default_kb(),
    };
    let bound = bind_series_to_leaves(&kb, &bindings, &topics)?;
    let doc = json_pretty(&bound);
    match output {
        Some(path) => {
            write_text(path, &doc)?;
            let steps = bound.values().map(Vec::len).max().unwrap_or(0);
            Ok(format!(
                "wrote {}: {} leaves, {} timestamps\n",
                path.display(),
                bound.len(),
                steps
            ))
        }
        None => Ok(doc),
    }
}

fn aggregate(estimates: &Path, kb: Option<&Path>, output: Option<&Path>) -> Outcome {
    let estimates: Vec<ExpertEstimate> = read_json(estimates)?;
    let mut weights = Vec::new();
    for ((child, parent), group) in group_estimates_by_edge(&estimates) {
        let w = aggregate_expert_estimates(&group)?;
        weights.push((child, parent, w, group.len()));
    }
    let mut out = String::new();
    for (child, parent, w, n) in &weights {
        writeln!(out, "{child} -> {parent}: {w} ({n} estimates)")?;
    }
    if let Some(kb_path) = kb {
        let mut kb: GoalGraph = read_json(kb_path)?;
        for (child, parent, w, _) in &weights {
            kb.set_weight(child, parent, *w)?;
        }
        let report = kb.validate();
        if !report.is_valid() {
            return Err(Failure(format!("weighted KB is invalid\n{report}")));
        }
        match output {
            Some(path) => {
                write_text(path, &kb.to_document())?;
                writeln!(out, "wrote {}", path.display())?;
            }
            None => out.push_str(&kb.to_document()),
        }
    }
    Ok(out)
}

fn serve(port: u16, scenario: Option<&Path>) -> Outcome {
    let scenario: Option<Scenario> = match scenario {
        Some(p) => {
            let s: Scenario = read_json(p)?;
            s.check()?;
            Some(s)
        }
        None => None,
    };
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(server::serve(port, scenario))?;
    Ok(String::new())
}
