//! `dewat`: batch front-end for the technology-selection pipeline.
//!
//! Exit codes:
//!
//! | code | meaning                                              |
//! |------|------------------------------------------------------|
//! | 0    | success                                              |
//! | 1    | internal or numerical failure                        |
//! | 2    | input file unreadable or failing schema validation   |
//! | 3    | a qualitative matrix failed the consistency gate     |
//! | 4    | required data missing (cells, pairs or criteria)     |
//! | 64   | invalid command line                                 |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dewat_mca::ahp::AhpError;
use dewat_mca::anova::{anova_two_factor_no_rep, decide, AnovaDecision, AnovaTable};
use dewat_mca::domain::{
    build_criterion_vector, parse_performance_table, Criterion, DataError, PerformanceTable,
    CASE_STUDY_CSV,
};
use dewat_mca::grid::parse_grid_csv;
use dewat_mca::pipeline::{
    judgments_by_criterion, run_pipeline, InjectionDocument, JudgmentDocument, PipelineError,
    PipelineOptions, PolicyKind, QualitativeInput, DEFAULT_ALPHA,
};
use dewat_mca::report::{InputsEcho, ReportDocument, SourceEcho};

#[derive(Debug, Parser)]
#[command(
    name = "dewat",
    version,
    about = "Score, rank and test decentralized wastewater treatment technologies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the full scoring pipeline and write a report document.
    Run(RunArgs),
    /// Two-factor ANOVA without replication on a labeled CSV grid.
    Anova(AnovaArgs),
    /// Print the mid-range vector of one quantitative criterion.
    Midrange(MidrangeArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Performance table CSV; the bundled case-study table when omitted.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Consensus judgments: a list, one session export, or a list of exports.
    #[arg(long)]
    judgments: Option<PathBuf>,
    /// Given priority columns and values for missing cells.
    #[arg(long)]
    inject: Option<PathBuf>,
    /// Ten comma-separated criterion weights summing to 1; equal when omitted.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    /// Missing-cell policy: exclude, worst or inject.
    #[arg(long, default_value = "exclude")]
    policy: PolicyKind,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// Report destination; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report inconsistent matrices as warnings instead of failing.
    #[arg(long)]
    allow_inconsistent: bool,
}

#[derive(Debug, Args)]
struct AnovaArgs {
    /// Grid CSV (header row of column labels, one labeled row per line); `-` reads stdin.
    #[arg(long)]
    matrix: String,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct MidrangeArgs {
    /// Criterion id, parameter code or name.
    #[arg(long)]
    criterion: String,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Debug)]
enum Failure {
    Internal(String),
    Input(String),
    Consistency(String),
    MissingData(String),
    Usage(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Internal(_) => 1,
            Failure::Input(_) => 2,
            Failure::Consistency(_) => 3,
            Failure::MissingData(_) => 4,
            Failure::Usage(_) => 64,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Internal(m)
            | Failure::Input(m)
            | Failure::Consistency(m)
            | Failure::MissingData(m)
            | Failure::Usage(m) => m,
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let msg = e.to_string();
        match e {
            PipelineError::ConsistencyGate(_) => Failure::Consistency(msg),
            PipelineError::MissingData(_) | PipelineError::MissingQualitative(_) => {
                Failure::MissingData(msg)
            }
            PipelineError::Alpha(_)
            | PipelineError::Ahp(
                AhpError::WeightCount { .. } | AhpError::NegativeWeight(_) | AhpError::WeightSum(_),
            ) => Failure::Usage(msg),
            PipelineError::Anova(_) => Failure::Internal(msg),
            _ => Failure::Input(msg),
        }
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))
}

fn load_table(path: Option<&PathBuf>) -> Result<(PerformanceTable, SourceEcho), Failure> {
    let (source, shown) = match path {
        Some(p) => (read_file(p)?, Some(p.display().to_string())),
        None => (CASE_STUDY_CSV.to_string(), None),
    };
    let table = parse_performance_table(&source).map_err(|e| match &shown {
        Some(p) => Failure::Input(format!("{p}: {e}")),
        None => Failure::Internal(format!("bundled dataset: {e}")),
    })?;
    let echo = SourceEcho::new("dataset", shown.as_deref(), source.as_bytes());
    Ok((table, echo))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, source: &str) -> Result<T, Failure> {
    serde_json::from_str(source).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let (table, dataset_echo) = load_table(args.dataset.as_ref())?;
    let mut sources = vec![dataset_echo];
    let mut qualitative: BTreeMap<u8, QualitativeInput> = BTreeMap::new();
    let mut injections = BTreeMap::new();

    if let Some(path) = &args.judgments {
        let source = read_file(path)?;
        let doc: JudgmentDocument = parse_json(path, &source)?;
        qualitative = judgments_by_criterion(doc.into_judgments());
        sources.push(SourceEcho::new(
            "judgments",
            Some(&path.display().to_string()),
            source.as_bytes(),
        ));
    }
    if let Some(path) = &args.inject {
        let source = read_file(path)?;
        let doc: InjectionDocument = parse_json(path, &source)?;
        for (criterion, column) in doc.qualitative {
            if qualitative.contains_key(&criterion) {
                return Err(Failure::Input(format!(
                    "criterion {criterion} has both judgments and an injected priority column"
                )));
            }
            qualitative.insert(criterion, QualitativeInput::Priorities(column));
        }
        injections = doc.missing_cells;
        sources.push(SourceEcho::new(
            "inject",
            Some(&path.display().to_string()),
            source.as_bytes(),
        ));
    }

    let options = PipelineOptions {
        weights: args.weights,
        policy: args.policy,
        injections,
        alpha: args.alpha,
        allow_inconsistent: args.allow_inconsistent,
    };
    let results = run_pipeline(&table, &qualitative, &options)?;
    for w in &results.warnings {
        eprintln!("warning: {w}");
    }
    let report = ReportDocument::build(InputsEcho { sources, options }, &results).to_json();
    match &args.out {
        Some(path) => std::fs::write(path, report)
            .map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{report}"),
    }
    Ok(())
}

fn fmt_f(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        "inf".to_string()
    }
}

fn anova_text(t: &AnovaTable, d: &AnovaDecision) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:>12} {:>4} {:>12} {:>10} {:>10} {:>10}",
        "source", "SS", "df", "MS", "F", "p", "F crit"
    );
    let _ = writeln!(
        out,
        "{:<10} {:>12.6} {:>4} {:>12.6} {:>10} {:>10.6} {:>10.6}",
        "rows",
        t.ss_rows,
        t.df_rows,
        t.ms_rows,
        fmt_f(t.f_rows),
        t.p_rows,
        d.f_critical_rows
    );
    let _ = writeln!(
        out,
        "{:<10} {:>12.6} {:>4} {:>12.6} {:>10} {:>10.6} {:>10.6}",
        "columns",
        t.ss_cols,
        t.df_cols,
        t.ms_cols,
        fmt_f(t.f_cols),
        t.p_cols,
        d.f_critical_cols
    );
    let _ = writeln!(
        out,
        "{:<10} {:>12.6} {:>4} {:>12.6}",
        "error", t.ss_error, t.df_error, t.ms_error
    );
    let _ = writeln!(
        out,
        "{:<10} {:>12.6} {:>4}",
        "total",
        t.ss_total,
        t.df_rows + t.df_cols + t.df_error
    );
    let verdict = |reject: bool| {
        if reject {
            "reject H0"
        } else {
            "fail to reject H0"
        }
    };
    let _ = writeln!(out, "rows at alpha {}: {}", d.alpha, verdict(d.reject_rows));
    let _ = writeln!(
        out,
        "columns at alpha {}: {}",
        d.alpha,
        verdict(d.reject_cols)
    );
    for (factor, flag) in [("rows", t.degenerate_rows), ("columns", t.degenerate_cols)] {
        if let Some(flag) = flag {
            let _ = writeln!(out, "note: {factor} F is degenerate ({flag:?})");
        }
    }
    out
}

fn cmd_anova(args: AnovaArgs) -> Result<(), Failure> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(Failure::Usage(format!(
            "alpha {} must lie in (0, 1)",
            args.alpha
        )));
    }
    let source = if args.matrix == "-" {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| Failure::Input(format!("cannot read stdin: {e}")))?;
        s
    } else {
        read_file(&PathBuf::from(&args.matrix))?
    };
    let grid =
        parse_grid_csv(&source).map_err(|e| Failure::Input(format!("{}: {e}", args.matrix)))?;
    let table = anova_two_factor_no_rep(&grid.values)
        .map_err(|e| Failure::Input(format!("{}: {e}", args.matrix)))?;
    let decision = decide(&table, args.alpha).map_err(|e| Failure::Internal(e.to_string()))?;
    if args.json {
        let doc = serde_json::json!({
            "rows": grid.row_labels,
            "columns": grid.col_labels,
            "anova": table,
            "decision": decision,
        });
        println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
    } else {
        print!("{}", anova_text(&table, &decision));
    }
    Ok(())
}

fn cmd_midrange(args: MidrangeArgs) -> Result<(), Failure> {
    let criterion =
        Criterion::lookup(&args.criterion).map_err(|e| Failure::Usage(e.to_string()))?;
    let (table, _) = load_table(args.dataset.as_ref())?;
    let vector = build_criterion_vector(&table, &criterion).map_err(|e| match e {
        DataError::QualitativeCriterion(_) => Failure::Usage(e.to_string()),
        other => Failure::Input(other.to_string()),
    })?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&vector).expect("json"));
        return Ok(());
    }
    let unit = criterion.parameter().map(|p| p.unit()).unwrap_or("");
    println!("criterion {} ({}), {unit}", criterion.id, criterion.name);
    for (t, v) in vector.technologies.iter().zip(&vector.values) {
        match v {
            Some(v) => println!("{t:<10} {v}"),
            None => println!("{t:<10} missing"),
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(64)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Anova(args) => cmd_anova(args),
        Command::Midrange(args) => cmd_midrange(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
